//! Malliavin derivative grids of the solution and the derived Sobolev-norm
//! and inverse-moment functionals.
//!
//! The first derivative solves, for each perturbation time θ < t,
//!
//! ```text
//! D_θX_t = σ(θ, X_θ)(t−θ)^{α−1}/Γ(α)
//!        + (1/Γ(α)) ∫_θ^t (t−s)^{α−1} b′(s, X_s) D_θX_s ds
//!        + (1/Γ(α)) ∫_θ^t (t−s)^{α−1} σ′(s, X_s) D_θX_s dB_s,
//! ```
//!
//! with D_θX_t = 0 for θ > t, and the second derivative D_rD_θX_t adds the
//! two explicit source terms (t−r)^{α−1}σ′(r,X_r)D_θX_r and
//! (t−θ)^{α−1}σ′(θ,X_θ)D_rX_θ plus the coupled linear recursion in D².
//!
//! Perturbation times are the grid nodes; θ-integrals (L²[0,T] norms) use
//! the node trapezoid rule. The diagonal D_{t_k}X_{t_k} is singular for
//! α < 1 and is not represented (stored as zero). Evolving one source
//! index over the grid costs O(n²); the full first-derivative grid is
//! O(n³) arithmetic and the second-derivative cube is O(n⁴), which is why
//! the latter is capped.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::paths::{NoiseBatch, TimeGrid};
use crate::rates::mean_and_stderr;
use crate::solver::validate_order;
use crate::solver::{
    order_kernels, solve_with_kernels, CoefficientModel, SchemeConfig, Trajectory,
};
use crate::specfun::gamma_eval;

/// Default grid cap for the O(n⁴) second-derivative solver.
pub const SECOND_DERIVATIVE_CAP: usize = 128;

/// Lower-triangular table D[i][k] ≈ D_{θ_i}X_{t_k} for θ_i = t_i < t_k,
/// zero for θ_i ≥ t_k.
#[derive(Debug, Clone)]
pub struct MalliavinGrid {
    grid: TimeGrid,
    order: f64,
    /// row-major (n+1)×(n+1): entries[i·(n+1) + k]
    entries: Vec<f64>,
}

impl MalliavinGrid {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// D_{θ_i}X_{t_k}; exactly zero whenever i ≥ k.
    pub fn entry(&self, i: usize, k: usize) -> f64 {
        let n = self.grid.steps();
        assert!(i <= n && k <= n, "grid index out of range");
        self.entries[i * (n + 1) + k]
    }
}

/// Dense cube D2[r][i][k] ≈ D_{t_r}D_{θ_i}X_{t_k}, zero unless r, i < k.
#[derive(Debug, Clone)]
pub struct SecondDerivGrid {
    grid: TimeGrid,
    order: f64,
    entries: Vec<f64>,
}

impl SecondDerivGrid {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn entry(&self, r: usize, i: usize, k: usize) -> f64 {
        let n = self.grid.steps();
        assert!(r <= n && i <= n && k <= n, "grid index out of range");
        self.entries[(r * (n + 1) + i) * (n + 1) + k]
    }
}

/// Left-point kernel (d·h)^{α−1} by lag.
fn left_point_kernel(order: f64, h: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|d| {
            if d == 0 {
                0.0
            } else {
                (d as f64 * h).powf(order - 1.0)
            }
        })
        .collect()
}

/// Evolve the first Malliavin derivative for every source node of the
/// base trajectory, driven by the same increments.
pub fn solve_first_derivative(
    model: &CoefficientModel,
    order: f64,
    base: &Trajectory,
    increments: &[f64],
) -> Result<MalliavinGrid> {
    validate_order(order)?;
    if base.order() != order {
        return Err(Error::Contract(format!(
            "base trajectory was solved at order {}, not α = {order}",
            base.order()
        )));
    }
    let grid = *base.grid();
    let n = grid.steps();
    if increments.len() != n {
        return Err(Error::Contract(format!(
            "expected {n} increments, got {}",
            increments.len()
        )));
    }
    let h = grid.step_size();
    let inv_gamma = 1.0 / gamma_eval(order)?.value;
    let kernel = left_point_kernel(order, h, n);
    let x = base.values();
    // per-node linear multiplier (b′ h + σ′ ΔB) of the evolution terms
    let mult: Vec<f64> = (0..n)
        .map(|j| {
            let tj = grid.node(j);
            model.db(tj, x[j]) * h + model.dsigma(tj, x[j]) * increments[j]
        })
        .collect();

    let mut entries = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..n {
        let source = model.sigma(grid.node(i), x[i]) * inv_gamma;
        let row = &mut entries[i * (n + 1)..(i + 1) * (n + 1)];
        for k in (i + 1)..=n {
            let mut acc = 0.0;
            for j in (i + 1)..k {
                acc += kernel[k - j] * mult[j] * row[j];
            }
            let value = source * kernel[k - i] + inv_gamma * acc;
            if !value.is_finite() {
                return Err(Error::Divergence {
                    step: k,
                    time: grid.node(k),
                    order,
                });
            }
            row[k] = value;
        }
    }
    Ok(MalliavinGrid {
        grid,
        order,
        entries,
    })
}

/// Evolve the second Malliavin derivative cube. Requires the first
/// derivative grid of the same path; refuses grids above `cap`
/// (O(n⁴) arithmetic, see [`SECOND_DERIVATIVE_CAP`]).
pub fn solve_second_derivative(
    model: &CoefficientModel,
    order: f64,
    base: &Trajectory,
    first: &MalliavinGrid,
    increments: &[f64],
    cap: usize,
) -> Result<SecondDerivGrid> {
    validate_order(order)?;
    let grid = *base.grid();
    let n = grid.steps();
    if n > cap {
        return Err(Error::GridTooLarge { steps: n, cap });
    }
    if base.order() != order || first.order() != order {
        return Err(Error::Contract(
            "base trajectory, first-derivative grid and order disagree".into(),
        ));
    }
    if increments.len() != n {
        return Err(Error::Contract(format!(
            "expected {n} increments, got {}",
            increments.len()
        )));
    }
    let h = grid.step_size();
    let inv_gamma = 1.0 / gamma_eval(order)?.value;
    let kernel = left_point_kernel(order, h, n);
    let x = base.values();
    let dsig: Vec<f64> = (0..=n).map(|j| model.dsigma(grid.node(j), x[j])).collect();
    // first-order multiplier b′h + σ′ΔB and second-order source weight
    // b″h + σ″ΔB per node
    let mult: Vec<f64> = (0..n)
        .map(|j| {
            let tj = grid.node(j);
            model.db(tj, x[j]) * h + model.dsigma(tj, x[j]) * increments[j]
        })
        .collect();
    let mult2: Vec<f64> = (0..n)
        .map(|j| {
            let tj = grid.node(j);
            model.d2b(tj, x[j]) * h + model.d2sigma(tj, x[j]) * increments[j]
        })
        .collect();

    let stride = n + 1;
    let mut entries = vec![0.0; stride * stride * stride];
    for r in 0..=n {
        for i in 0..=n {
            let m0 = r.max(i);
            let d_ir = first.entry(i, r); // nonzero only when i < r
            let d_ri = first.entry(r, i); // nonzero only when r < i
            let base_idx = (r * stride + i) * stride;
            for k in (m0 + 1)..=n {
                let source =
                    inv_gamma * (kernel[k - r] * dsig[r] * d_ir + kernel[k - i] * dsig[i] * d_ri);
                let mut acc = 0.0;
                for j in (m0 + 1)..k {
                    let dd = first.entry(r, j) * first.entry(i, j);
                    acc += kernel[k - j] * (mult2[j] * dd + mult[j] * entries[base_idx + j]);
                }
                let value = source + inv_gamma * acc;
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        step: k,
                        time: grid.node(k),
                        order,
                    });
                }
                entries[base_idx + k] = value;
            }
        }
    }
    Ok(SecondDerivGrid {
        grid,
        order,
        entries,
    })
}

/// Trapezoid approximation of ∫₀^{t_k} |D_θX_{t_k}|² dθ over the source
/// nodes (the unrepresented singular diagonal enters as zero).
pub fn sobolev_norm_sq(first: &MalliavinGrid, k: usize) -> f64 {
    let n = first.grid.steps();
    assert!(k <= n, "node index out of range");
    if k == 0 {
        return 0.0;
    }
    let h = first.grid.step_size();
    let sq = |i: usize| {
        let v = first.entry(i, k);
        v * v
    };
    let mut sum = 0.5 * sq(0);
    for i in 1..k {
        sum += sq(i);
    }
    // upper endpoint contributes the stored zero
    h * sum
}

/// Double trapezoid approximation of ∬ |D_rD_θX_{t_k}|² dr dθ over
/// [0, t_k]².
pub fn double_norm_sq(second: &SecondDerivGrid, k: usize) -> f64 {
    let n = second.grid.steps();
    assert!(k <= n, "node index out of range");
    if k == 0 {
        return 0.0;
    }
    let h = second.grid.step_size();
    let mut sum = 0.0;
    for r in 0..=k {
        let wr = if r == 0 || r == k { 0.5 } else { 1.0 };
        for i in 0..=k {
            let wi = if i == 0 || i == k { 0.5 } else { 1.0 };
            let v = second.entry(r, i, k);
            sum += wr * wi * v * v;
        }
    }
    h * h * sum
}

/// Monte Carlo estimate of E‖DX_{α,T}‖^{−2γ}_{L²[0,T]}.
#[derive(Debug, Clone, Copy)]
pub struct InverseMomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub gamma: f64,
    /// Evaluation time (the grid horizon).
    pub t: f64,
    /// Set when γ falls outside the window (1, 1/(2−2α)] covered by the
    /// inverse-moment bound; the estimate is still computed.
    pub outside_hypothesis: bool,
    pub replicas: usize,
    pub failures: usize,
}

/// Estimate E‖DX_{α,T}‖^{−2γ} by plain Monte Carlo over the batch:
/// replica-wise sobolev_norm_sq(T)^{−γ}, averaged with a deterministic
/// tree reduction. Requires declared ellipticity σ₀ > 0, which keeps the
/// integrand bounded.
pub fn inverse_moment_estimate(
    model: &CoefficientModel,
    order: f64,
    grid: &TimeGrid,
    noise: &NoiseBatch,
    gamma: f64,
    cfg: SchemeConfig,
) -> Result<InverseMomentEstimate> {
    validate_order(order)?;
    if model.ellipticity <= 0.0 {
        return Err(Error::Contract(
            "inverse_moment_estimate requires a model with declared ellipticity σ₀ > 0".into(),
        ));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Domain(format!(
            "inverse-moment exponent must be non-negative, got {gamma}"
        )));
    }
    if noise.steps() != grid.steps() {
        return Err(Error::Contract(
            "noise batch and grid disagree on the number of steps".into(),
        ));
    }
    let outside = if order < 1.0 {
        !(gamma > 1.0 && gamma <= 1.0 / (2.0 - 2.0 * order))
    } else {
        gamma <= 1.0
    };
    let kernels = order_kernels(order, grid, cfg)?;
    let n = grid.steps();
    let samples: Vec<Result<f64>> = (0..noise.replicas())
        .into_par_iter()
        .map(|r| {
            let incs = noise.replica_increments(r);
            let values = solve_with_kernels(model, &kernels, grid, &incs)?;
            let base = trajectory_from_values(grid, order, values);
            let d = solve_first_derivative(model, order, &base, &incs)?;
            let s = sobolev_norm_sq(&d, n);
            if s <= 0.0 {
                return Err(Error::Contract(format!(
                    "replica {r} produced a non-positive Sobolev norm {s} despite σ₀ > 0"
                )));
            }
            Ok(s.powf(-gamma))
        })
        .collect();

    let mut values = Vec::with_capacity(samples.len());
    let mut failures = 0;
    for s in samples {
        match s {
            Ok(v) => values.push(v),
            Err(Error::Divergence { .. }) => failures += 1,
            Err(other) => return Err(other),
        }
    }
    if values.is_empty() {
        return Err(Error::Contract(
            "all replicas diverged; no inverse-moment samples".into(),
        ));
    }
    let (mean, std_error) = mean_and_stderr(&values);
    Ok(InverseMomentEstimate {
        mean,
        std_error,
        gamma,
        t: grid.horizon(),
        outside_hypothesis: outside,
        replicas: values.len(),
        failures,
    })
}

/// Internal constructor used when replica paths are solved against
/// precomputed kernels.
fn trajectory_from_values(grid: &TimeGrid, order: f64, values: Vec<f64>) -> Trajectory {
    Trajectory::from_parts(*grid, order, values)
}
