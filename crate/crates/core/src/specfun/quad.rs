//! Tanh-sinh (double-exponential) quadrature for kernel integrals with an
//! integrable endpoint singularity.
//!
//! The substitution u = t − s moves the singularity of kernels like
//! (t−s)^{c} ln^k(t−s) to the origin, so the integrand oracle passed to
//! [`singular_quad`] receives the distance u ∈ (0, t) from the singular
//! point rather than s itself. Abscissas are computed directly as distances
//! to the interval endpoints, which keeps full precision arbitrarily close
//! to the singularity.

use crate::error::{Error, Result};

const MAX_LEVEL: usize = 10;
/// Beyond |τ| ≈ 7.6 the tanh-sinh weights underflow for every integrand
/// of interest here.
const TAU_MAX: f64 = 7.6;

/// ∫₀ᵗ f(u) du where f may have an integrable singularity at u = 0
/// (equivalently ∫₀ᵗ g(s) ds with g singular only at s = t and
/// f(u) = g(t − u)).
///
/// Converges to relative accuracy `tol` for integrands of the form
/// u^c · ln^k(u) with c > −1 and k ∈ {0, 1, 2}.
pub fn singular_quad(f: impl Fn(f64) -> f64, t: f64, tol: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!(
            "singular_quad: interval length must be positive and finite, got {t}"
        )));
    }
    if !(1e-14..=1e-2).contains(&tol) {
        return Err(Error::Domain(format!(
            "singular_quad: tolerance must lie in [1e-14, 1e-2], got {tol:e}"
        )));
    }

    let scale = 0.5 * t;
    let mut h = 1.0;
    // Level 0: all integer abscissas, including τ = 0 (weight π/2, u = t/2).
    let mut total = std::f64::consts::FRAC_PI_2 * guarded(&f, 0.5 * t);
    total += level_sum(&f, t, h, 1);
    let mut estimate = scale * h * total;

    for _level in 1..=MAX_LEVEL {
        h *= 0.5;
        // Refinement adds the odd multiples of the new step.
        total += level_sum(&f, t, h, 2);
        let refined = scale * h * total;
        let err = (refined - estimate).abs();
        estimate = refined;
        if err <= tol * estimate.abs() || (err == 0.0 && estimate == 0.0) {
            return Ok(estimate);
        }
    }
    Err(Error::QuadratureNotConverged {
        estimate,
        error_estimate: f64::NAN,
    })
}

/// Sum of weighted integrand values at τ = j·h for j = start, start+stride, …
/// (stride 1 on the initial level, 2 on refinements).
fn level_sum(f: &impl Fn(f64) -> f64, t: f64, h: f64, start_stride: usize) -> f64 {
    let (start, stride) = if start_stride == 1 { (1, 1) } else { (1, 2) };
    let mut sum = 0.0;
    let mut j = start;
    loop {
        let tau = j as f64 * h;
        if tau > TAU_MAX {
            break;
        }
        let g = std::f64::consts::FRAC_PI_2 * tau.sinh();
        let cg = g.cosh();
        let w = std::f64::consts::FRAC_PI_2 * tau.cosh() / (cg * cg);
        if w > 0.0 && w.is_finite() {
            // Distances from the two interval endpoints, cancellation-free.
            let e = (-2.0 * g).exp();
            let u_near = t * e / (1.0 + e); // close to the singular end u = 0
            let u_far = t / (1.0 + e); // close to u = t
            if u_near > 0.0 {
                let v = f(u_near);
                if v.is_finite() {
                    sum += w * v;
                }
            }
            if u_far < t {
                let v = f(u_far);
                if v.is_finite() {
                    sum += w * v;
                }
            }
        }
        j += stride;
    }
    sum
}

fn guarded(f: &impl Fn(f64) -> f64, u: f64) -> f64 {
    let v = f(u);
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Standard normal cumulative distribution function, evaluated by
/// quadrature of the density (accurate to ~1e−13; used for the analytic
/// Gaussian reference values in the weak-rate experiments).
pub fn normal_cdf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let a = x.abs();
    if a > 12.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let tail = singular_quad(|u| norm * (-0.5 * (a - u) * (a - u)).exp(), a, 1e-13)
        .expect("normal density quadrature converges");
    if x > 0.0 {
        0.5 + tail
    } else {
        0.5 - tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrand() {
        let v = singular_quad(|_| 1.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        // ∫₀¹ u^{−1/2} du = 2
        let v = singular_quad(|u| u.powf(-0.5), 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn squared_log_singularity() {
        // ∫₀¹ ln²u du = 2 (by parts)
        let v = singular_quad(|u| u.ln() * u.ln(), 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn power_times_log_on_general_interval() {
        // ∫₀ᵗ u^{c} ln u du = t^{c+1} (ln t / (c+1) − 1/(c+1)²)
        let (c, t): (f64, f64) = (-0.25, 0.7);
        let exact = t.powf(c + 1.0) * (t.ln() / (c + 1.0) - 1.0 / ((c + 1.0) * (c + 1.0)));
        let v = singular_quad(|u| u.powf(c) * u.ln(), t, 1e-12).unwrap();
        assert!((v - exact).abs() < 1e-11 * exact.abs());
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(singular_quad(|_| 1.0, 0.0, 1e-10).is_err());
        assert!(singular_quad(|_| 1.0, 1.0, 1e-1).is_err());
        assert!(singular_quad(|_| 1.0, 1.0, 1e-15).is_err());
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // Φ(1) and Φ(−1), 13-digit references
        assert!((normal_cdf(1.0) - 0.841344746068543).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158655253931457).abs() < 1e-12);
        // symmetry
        for &x in &[0.3, 0.7, 2.5] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-13);
        }
    }
}
