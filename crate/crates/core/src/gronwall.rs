//! Explicit bounds for the singular Gronwall inequality
//!
//! ```text
//! v(t) ≤ ω(t) + a ∫₀ᵗ (t−s)^{η−1} v(s) ds,   a > 0, 0 < η < 1,
//! ```
//!
//! and a checker that verifies the bounds dominate discrete solutions of
//! the inequality. Three bounds are evaluated side by side: the explicit
//! bound
//!
//! ```text
//! v(t) ≤ 2ω(t) + (8a t^{η/2}/η) exp(4^{2/η} a^{2/η} t² / η^{2/η})
//!        (∫₀ᵗ ω^{2/η}(s) ds)^{η/2},
//! ```
//!
//! its sharper variant for non-decreasing ω,
//!
//! ```text
//! v(t) ≤ 2ω(t) exp(4^{2/η} a^{2/η} t² / η^{2/η}),
//! ```
//!
//! and the classical Henry resolvent series
//!
//! ```text
//! v(t) ≤ ω(t) + ∫₀ᵗ [Σ_{n≥1} (aΓ(η))ⁿ (t−s)^{nη−1}/Γ(nη)] ω(s) ds.
//! ```
//!
//! η = 1 lies outside the singular hypothesis but is accepted as the
//! classical-Gronwall limit (the Henry series then collapses to the
//! exponential a·e^{a(t−s)}); reports flag this case.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::TimeGrid;
use crate::specfun::{self, kernel_weights, KernelKind};

/// Relative slack allowed on the discrete-inequality precondition
/// (floating-point rounding only).
const INEQUALITY_SLACK: f64 = 1e-9;

/// Discretization slack allowed when asserting dominance of the explicit
/// bound over a saturated discrete solution.
const DOMINANCE_SLACK: f64 = 1e-6;

/// One instance of the singular Gronwall inequality: kernel coefficient,
/// singularity exponent, horizon and the non-negative forcing ω.
#[derive(Clone)]
pub struct GronwallProblem {
    a: f64,
    eta: f64,
    horizon: f64,
    omega: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    monotone: bool,
}

impl std::fmt::Debug for GronwallProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GronwallProblem")
            .field("a", &self.a)
            .field("eta", &self.eta)
            .field("horizon", &self.horizon)
            .field("monotone", &self.monotone)
            .finish()
    }
}

impl GronwallProblem {
    /// Build a problem instance. `monotone` declares (and is the caller's
    /// promise) that ω is non-decreasing. ω must be non-negative on
    /// [0, T]; this is spot-checked on a coarse grid at construction.
    pub fn new(
        a: f64,
        eta: f64,
        horizon: f64,
        omega: impl Fn(f64) -> f64 + Send + Sync + 'static,
        monotone: bool,
    ) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::Domain(format!(
                "gronwall: kernel coefficient a must be positive, got {a}"
            )));
        }
        if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
            return Err(Error::Domain(format!(
                "gronwall: exponent eta must lie in (0, 1] (1 = classical limit), got {eta}"
            )));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Domain(format!(
                "gronwall: horizon must be positive, got {horizon}"
            )));
        }
        for k in 0..=32 {
            let t = horizon * k as f64 / 32.0;
            let w = omega(t);
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Domain(format!(
                    "gronwall: forcing must be non-negative and finite, got ω({t}) = {w}"
                )));
            }
        }
        Ok(Self {
            a,
            eta,
            horizon,
            omega: Arc::new(omega),
            monotone,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn monotone(&self) -> bool {
        self.monotone
    }

    /// η = 1 is outside the lemma's hypothesis and handled as the
    /// classical-Gronwall limit.
    pub fn is_classical_limit(&self) -> bool {
        self.eta == 1.0
    }

    pub fn omega(&self, t: f64) -> f64 {
        (self.omega)(t)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 || t > self.horizon {
            return Err(Error::Domain(format!(
                "gronwall: time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// exp(4^{2/η} a^{2/η} t² / η^{2/η}), the growth factor shared by the
    /// explicit and monotone bounds.
    fn growth_factor(&self, t: f64) -> f64 {
        let q = 2.0 / self.eta;
        ((4.0 * self.a / self.eta).powf(q) * t * t).exp()
    }
}

/// The explicit bound of the singular Gronwall lemma at time `t`, with the
/// inner ∫₀ᵗ ω^{2/η} integral evaluated by tanh-sinh quadrature.
///
/// At η = 1 (classical limit) a monotone forcing is bounded by
/// [`monotone_bound`]; otherwise the same formula is instantiated at η = 1.
pub fn explicit_bound(problem: &GronwallProblem, t: f64) -> Result<f64> {
    problem.check_time(t)?;
    if problem.is_classical_limit() && problem.monotone {
        return monotone_bound(problem, t);
    }
    if t == 0.0 {
        return Ok(2.0 * problem.omega(0.0));
    }
    let q = 2.0 / problem.eta;
    let forcing_lq = specfun::singular_quad(|u| problem.omega(t - u).powf(q), t, 1e-10)?;
    let prefactor = 8.0 * problem.a * t.powf(0.5 * problem.eta) / problem.eta;
    Ok(2.0 * problem.omega(t)
        + prefactor * problem.growth_factor(t) * forcing_lq.powf(0.5 * problem.eta))
}

/// The sharper bound 2ω(t)·exp(4^{2/η}a^{2/η}t²/η^{2/η}) available when ω
/// is non-decreasing. Contract error when the problem does not declare
/// monotone forcing.
pub fn monotone_bound(problem: &GronwallProblem, t: f64) -> Result<f64> {
    if !problem.monotone {
        return Err(Error::Contract(
            "monotone_bound requires a problem with non-decreasing forcing declared".into(),
        ));
    }
    problem.check_time(t)?;
    Ok(2.0 * problem.omega(t) * problem.growth_factor(t))
}

/// Henry series bound with an explicit truncation-error estimate.
#[derive(Debug, Clone, Copy)]
pub struct HenrySeriesBound {
    pub value: f64,
    /// Upper estimate of the truncated tail.
    pub truncation_error: f64,
    /// Number of series terms actually summed.
    pub terms: usize,
    /// True when the problem sits at the η = 1 classical limit.
    pub classical_limit: bool,
}

/// Number of cells of the internal sampling grid used for the Henry
/// resolvent integrals (exact per-cell kernel antiderivatives against
/// left-point forcing values).
const HENRY_CELLS: usize = 1024;

/// Maximum number of resolvent series terms.
const HENRY_TERM_CAP: usize = 200;

/// Evaluate the Henry resolvent-series bound
/// ω(t) + Σ_{n≥1} (aΓ(η))ⁿ/Γ(nη) ∫₀ᵗ (t−s)^{nη−1} ω(s) ds at time `t`,
/// truncating once the tail bound (aΓ(η))ⁿ t^{nη}/Γ(nη+1) · sup ω drops
/// below `tol` times the running sum.
pub fn henry_series_bound(problem: &GronwallProblem, t: f64, tol: f64) -> Result<HenrySeriesBound> {
    problem.check_time(t)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Domain(format!(
            "henry_series_bound: tolerance must lie in (0, 1), got {tol}"
        )));
    }
    if t == 0.0 {
        return Ok(HenrySeriesBound {
            value: problem.omega(0.0),
            truncation_error: 0.0,
            terms: 0,
            classical_limit: problem.is_classical_limit(),
        });
    }

    let eta = problem.eta;
    let h = t / HENRY_CELLS as f64;
    // Left-point forcing samples over [0, t].
    let omega_left: Vec<f64> = (0..HENRY_CELLS)
        .map(|j| problem.omega(j as f64 * h))
        .collect();
    let sup_omega = omega_left.iter().cloned().fold(problem.omega(t), f64::max);
    if sup_omega == 0.0 {
        return Ok(HenrySeriesBound {
            value: 0.0,
            truncation_error: 0.0,
            terms: 0,
            classical_limit: problem.is_classical_limit(),
        });
    }

    let ln_rho = problem.a.ln() + specfun::ln_gamma(eta);
    let mut value = problem.omega(t);
    let mut terms = 0;
    for n in 1..=HENRY_TERM_CAP {
        let ne = n as f64 * eta;
        // coefficient (aΓ(η))ⁿ/Γ(nη), in log space to survive large n
        let coeff = (n as f64 * ln_rho - specfun::ln_gamma(ne)).exp();
        // ∫₀ᵗ (t−s)^{nη−1} ω(s) ds on the sampling grid: per-cell exact
        // antiderivative of the kernel against the left-point ω value.
        let mut integral = 0.0;
        let mut prev_pow = t.powf(ne); // (t − s_j)^{nη} at j = 0
        for (j, w) in omega_left.iter().enumerate() {
            let next = t - (j + 1) as f64 * h;
            let next_pow = if next > 0.0 { next.powf(ne) } else { 0.0 };
            integral += w * (prev_pow - next_pow);
            prev_pow = next_pow;
        }
        integral /= ne;
        let term = coeff * integral;
        if !term.is_finite() {
            return Err(Error::SeriesNotConverged {
                partial: value,
                terms: n,
            });
        }
        value += term;
        terms = n;

        // tail majorant: Σ_{m>n} (aΓη)^m t^{mη}/Γ(mη+1) · sup ω
        let bound = |m: usize| -> f64 {
            let me = m as f64 * eta;
            (m as f64 * ln_rho + me * t.ln() - specfun::ln_gamma(me + 1.0)).exp() * sup_omega
        };
        let next_bound = bound(n + 1);
        if next_bound < tol * value.abs() {
            let tail: f64 = (n + 1..n + 61).map(bound).sum();
            return Ok(HenrySeriesBound {
                value,
                truncation_error: tail,
                terms,
                classical_limit: problem.is_classical_limit(),
            });
        }
    }
    Err(Error::SeriesNotConverged {
        partial: value,
        terms,
    })
}

/// Result of [`check_inequality_dominance`].
#[derive(Debug, Clone, Copy)]
pub struct DominanceReport {
    /// max_k v(t_k) / explicit_bound(t_k)
    pub max_ratio: f64,
    /// Node where the maximum ratio is attained.
    pub argmax_node: usize,
    pub classical_limit: bool,
}

/// Verify that `v`, a gridded function satisfying the discrete inequality
/// v(t_k) ≤ ω(t_k) + a Σ_{j<k} w_{k,j} v(t_j) (plain kernel weights of
/// exponent η), is dominated by the explicit bound at every node.
///
/// Contract errors identify the offending node, both when the discrete
/// inequality itself fails (precondition) and when dominance fails beyond
/// the discretization slack.
pub fn check_inequality_dominance(
    problem: &GronwallProblem,
    grid: &TimeGrid,
    v: &[f64],
) -> Result<DominanceReport> {
    if v.len() != grid.steps() + 1 {
        return Err(Error::Contract(format!(
            "v has {} samples but the grid has {} nodes",
            v.len(),
            grid.steps() + 1
        )));
    }
    if grid.horizon() > problem.horizon {
        return Err(Error::Domain(
            "grid horizon exceeds the problem horizon".into(),
        ));
    }
    let weights = kernel_weights(problem.eta, grid, KernelKind::Plain)?;
    let lags = weights.lags();
    for k in 0..=grid.steps() {
        let mut rhs = problem.omega(grid.node(k));
        for j in 0..k {
            rhs += problem.a * lags[k - j] * v[j];
        }
        if v[k] > rhs * (1.0 + INEQUALITY_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::Contract(format!(
                "discrete inequality fails at node {k}: v = {} > rhs = {rhs}",
                v[k]
            )));
        }
    }

    let mut max_ratio = 0.0_f64;
    let mut argmax = 0;
    for (k, &vk) in v.iter().enumerate() {
        let bound = explicit_bound(problem, grid.node(k))?;
        let ratio = if vk == 0.0 { 0.0 } else { vk / bound };
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax = k;
        }
    }
    if max_ratio > 1.0 + DOMINANCE_SLACK {
        return Err(Error::Contract(format!(
            "explicit bound fails to dominate at node {argmax}: ratio {max_ratio}"
        )));
    }
    Ok(DominanceReport {
        max_ratio,
        argmax_node: argmax,
        classical_limit: problem.is_classical_limit(),
    })
}

/// Build the discrete function that saturates the inequality:
/// v(t_k) = ω(t_k) + a Σ_{j<k} w_{k,j} v(t_j). Serves as the worst-case
/// input for the dominance check.
pub fn saturated_inequality(problem: &GronwallProblem, grid: &TimeGrid) -> Result<Vec<f64>> {
    if grid.horizon() > problem.horizon {
        return Err(Error::Domain(
            "grid horizon exceeds the problem horizon".into(),
        ));
    }
    let weights = kernel_weights(problem.eta, grid, KernelKind::Plain)?;
    let lags = weights.lags();
    let mut v = vec![0.0; grid.steps() + 1];
    for k in 0..=grid.steps() {
        let mut val = problem.omega(grid.node(k));
        for j in 0..k {
            val += problem.a * lags[k - j] * v[j];
        }
        v[k] = val;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::make_grid;

    fn constant(c: f64) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        move |_| c
    }

    #[test]
    fn zero_forcing_gives_zero_bounds() {
        let p = GronwallProblem::new(1.0, 0.8, 1.0, constant(0.0), true).unwrap();
        for &t in &[0.0, 0.3, 1.0] {
            assert_eq!(explicit_bound(&p, t).unwrap(), 0.0);
            assert_eq!(monotone_bound(&p, t).unwrap(), 0.0);
            assert_eq!(henry_series_bound(&p, t, 1e-10).unwrap().value, 0.0);
        }
    }

    #[test]
    fn monotone_bound_closed_form() {
        // ω ≡ c, η = 1: 2c·exp(16 a² t²)
        let (a, c, t) = (0.4, 1.3, 0.9);
        let p = GronwallProblem::new(a, 1.0, 1.0, constant(c), true).unwrap();
        let expected = 2.0 * c * (16.0 * a * a * t * t).exp();
        let got = monotone_bound(&p, t).unwrap();
        assert!((got - expected).abs() < 1e-13 * expected);

        // a = 1, η = 0.6, ω(t) = t, t = 1: 2·exp((4/0.6)^{10/3})
        let p = GronwallProblem::new(1.0, 0.6, 1.0, |t| t, true).unwrap();
        let expected = 2.0 * ((4.0_f64 / 0.6).powf(10.0 / 3.0)).exp();
        let got = monotone_bound(&p, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn monotone_bound_requires_flag() {
        let p = GronwallProblem::new(1.0, 0.8, 1.0, constant(1.0), false).unwrap();
        assert!(matches!(monotone_bound(&p, 0.5), Err(Error::Contract(_))));
    }

    #[test]
    fn explicit_bound_matches_direct_formula() {
        // a = 1, η = 0.8, ω ≡ 1, t = 0.5: independent re-evaluation of the
        // formula with the inner integral in closed form (∫₀ᵗ 1 ds = t).
        let (a, eta, t): (f64, f64, f64) = (1.0, 0.8, 0.5);
        let p = GronwallProblem::new(a, eta, 1.0, constant(1.0), false).unwrap();
        let q = 2.0 / eta;
        let expected = 2.0
            + (8.0 * a * t.powf(eta / 2.0) / eta)
                * ((4.0 * a / eta).powf(q) * t * t).exp()
                * t.powf(eta / 2.0);
        let got = explicit_bound(&p, t).unwrap();
        assert!(
            (got - expected).abs() < 1e-9 * expected,
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn explicit_bound_at_classical_limit_uses_monotone_form() {
        let (a, c, t) = (0.3, 2.0, 0.7);
        let p = GronwallProblem::new(a, 1.0, 1.0, constant(c), true).unwrap();
        let expected = 2.0 * c * (16.0 * a * a * t * t).exp();
        assert!((explicit_bound(&p, t).unwrap() - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn henry_series_collapses_to_exponential_at_eta_one() {
        // η = 1, ω ≡ c: kernel collapses to a e^{a(t−s)}, bound = c·e^{at}
        let (a, c) = (0.8, 1.7);
        let p = GronwallProblem::new(a, 1.0, 1.5, constant(c), true).unwrap();
        for &t in &[0.25, 1.0, 1.5] {
            let got = henry_series_bound(&p, t, 1e-12).unwrap();
            let expected = c * (a * t).exp();
            assert!(
                (got.value - expected).abs() < 1e-8 * expected,
                "t = {t}: got {}, expected {expected}",
                got.value
            );
            assert!(got.classical_limit);
        }
    }

    #[test]
    fn henry_series_between_forcing_and_explicit_bound() {
        let p = GronwallProblem::new(1.0, 0.8, 1.0, constant(1.0), true).unwrap();
        let henry = henry_series_bound(&p, 1.0, 1e-10).unwrap();
        let explicit = explicit_bound(&p, 1.0).unwrap();
        assert!(henry.value > 1.0);
        assert!(henry.value < explicit);
        assert!(henry.truncation_error < 1e-8 * henry.value);
    }

    #[test]
    fn henry_dominated_by_explicit_pointwise() {
        // Pointwise comparison on [0, 1] for a = 1, η = 0.8
        let p = GronwallProblem::new(1.0, 0.8, 1.0, constant(1.0), true).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let henry = henry_series_bound(&p, t, 1e-10).unwrap().value;
            let explicit = explicit_bound(&p, t).unwrap();
            assert!(
                henry <= explicit,
                "t = {t}: henry {henry} > explicit {explicit}"
            );
        }
    }

    #[test]
    fn saturated_solution_dominated() {
        let p = GronwallProblem::new(0.5, 0.7, 1.0, constant(1.0), true).unwrap();
        let grid = make_grid(1.0, 200).unwrap();
        let v = saturated_inequality(&p, &grid).unwrap();
        let report = check_inequality_dominance(&p, &grid, &v).unwrap();
        assert!(report.max_ratio <= 1.0 + DOMINANCE_SLACK);
        assert!(report.max_ratio > 0.0);
    }

    #[test]
    fn zero_v_has_zero_ratio() {
        let p = GronwallProblem::new(0.5, 0.7, 1.0, constant(1.0), true).unwrap();
        let grid = make_grid(1.0, 50).unwrap();
        let v = vec![0.0; 51];
        let report = check_inequality_dominance(&p, &grid, &v).unwrap();
        assert_eq!(report.max_ratio, 0.0);
    }

    #[test]
    fn violated_inequality_is_rejected() {
        let p = GronwallProblem::new(0.5, 0.7, 1.0, constant(1.0), true).unwrap();
        let grid = make_grid(1.0, 50).unwrap();
        let mut v = saturated_inequality(&p, &grid).unwrap();
        v[30] *= 1.5; // break the inequality at node 30
        let err = check_inequality_dominance(&p, &grid, &v).unwrap_err();
        match err {
            Error::Contract(msg) => assert!(msg.contains("node 30"), "message: {msg}"),
            other => panic!("expected contract error, got {other:?}"),
        }
    }

    #[test]
    fn bounds_monotone_in_a_and_t() {
        // all three bounds non-decreasing in a and t for non-decreasing ω
        let omega = |t: f64| 0.5 + t;
        let mut prev = (0.0, 0.0, 0.0);
        for i in 1..=6 {
            let a = 0.1 * i as f64;
            let p = GronwallProblem::new(a, 0.75, 1.0, omega, true).unwrap();
            let trio = (
                explicit_bound(&p, 0.8).unwrap(),
                monotone_bound(&p, 0.8).unwrap(),
                henry_series_bound(&p, 0.8, 1e-9).unwrap().value,
            );
            assert!(trio.0 >= prev.0 && trio.1 >= prev.1 && trio.2 >= prev.2);
            prev = trio;
        }
        let p = GronwallProblem::new(0.4, 0.75, 1.0, omega, true).unwrap();
        let mut prev = (0.0, 0.0, 0.0);
        for k in 1..=10 {
            let t = k as f64 / 10.0;
            let trio = (
                explicit_bound(&p, t).unwrap(),
                monotone_bound(&p, t).unwrap(),
                henry_series_bound(&p, t, 1e-9).unwrap().value,
            );
            assert!(trio.0 >= prev.0 && trio.1 >= prev.1 && trio.2 >= prev.2);
            prev = trio;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GronwallProblem::new(0.0, 0.8, 1.0, constant(1.0), false).is_err());
        assert!(GronwallProblem::new(1.0, 1.2, 1.0, constant(1.0), false).is_err());
        assert!(GronwallProblem::new(1.0, 0.8, 0.0, constant(1.0), false).is_err());
        assert!(GronwallProblem::new(1.0, 0.8, 1.0, |_| -1.0, false).is_err());
        let p = GronwallProblem::new(1.0, 0.8, 1.0, constant(1.0), false).unwrap();
        assert!(explicit_bound(&p, 2.0).is_err());
        assert!(explicit_bound(&p, -0.1).is_err());
    }
}
