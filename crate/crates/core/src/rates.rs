//! Monte Carlo estimators and log–log regressions that turn coupled
//! simulations into convergence-rate measurements in the fractional order.
//!
//! Every estimator couples the orders through common random numbers (one
//! Brownian path drives X_β and every X_α) and reduces replicas with a
//! fixed-shape pairwise tree, so results are bitwise independent of the
//! parallel schedule. Error curves are measured against α = β − δ for the
//! requested offsets δ, keeping every order inside (1/2, 1]; replicas
//! whose state recursion diverges are excluded and reported, never
//! silently dropped.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::paths::{NoiseBatch, TimeGrid};
use crate::solver::{
    order_kernels, solve_with_kernels, validate_order, CoefficientModel, OrderKernels,
    SchemeConfig, Trajectory,
};
use crate::variation::solve_first_variation;

/// Fixed-shape pairwise tree summation; the reduction order depends only
/// on the slice length, never on the thread schedule.
pub(crate) fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
}

/// Tree-reduced sample mean and standard error (stdev/√m).
pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    let mean = tree_sum(xs) / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let centered: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = tree_sum(&centered) / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// A Monte Carlo moment estimate with its replica accounting.
#[derive(Debug, Clone, Copy)]
pub struct MomentEstimate {
    pub mean: f64,
    /// sample stdev / √m
    pub std_error: f64,
    /// replicas that contributed (diverged ones excluded)
    pub replicas: usize,
    pub failures: usize,
}

/// Ordinary least squares on (log x, log y).
#[derive(Debug, Clone)]
pub struct RateFit {
    /// the (log x, log y) pairs that entered the regression
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub r_squared: f64,
}

/// Fit log y = slope · log x + intercept by ordinary least squares.
/// Requires at least three points with positive coordinates.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::DegenerateFit(format!(
                "log–log fit needs positive finite values, got ({x}, {y})"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit(
            "all abscissas coincide; slope undefined".into(),
        ));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let sst: f64 = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let dof = (logs.len() - 2).max(1) as f64;
    let slope_std_error = (ssr / dof / sxx).sqrt();
    let r_squared = if sst == 0.0 { 1.0 } else { 1.0 - ssr / sst };
    Ok(RateFit {
        points: logs,
        slope,
        intercept,
        slope_std_error,
        r_squared,
    })
}

/// One offset of an error curve: δ = β − α, the moment estimate of the
/// coupled error and its replica accounting.
#[derive(Debug, Clone, Copy)]
pub struct ErrorCurvePoint {
    pub delta: f64,
    pub alpha: f64,
    pub error: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub failures: usize,
}

/// Error-vs-offset curve with its fitted log–log slope.
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    pub points: Vec<ErrorCurvePoint>,
    pub fit: RateFit,
}

/// Weak error curve: per-offset |Ê g(X_α) − Ê g(X_β)| plus the ratio
/// table error/δ, whose stability (rather than just the fitted slope) is
/// what first-order weak convergence asserts.
#[derive(Debug, Clone)]
pub struct WeakErrorCurve {
    pub points: Vec<ErrorCurvePoint>,
    /// error / δ per offset
    pub ratios: Vec<f64>,
    pub fit: RateFit,
    /// β < 7/8 is outside the weak-rate hypothesis; results are still
    /// computed but flagged.
    pub outside_hypothesis: bool,
}

/// Bounded-measurable and continuous test functions for the weak
/// experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// x ↦ 1{x ≤ threshold}; bounded, discontinuous.
    Indicator { threshold: f64 },
    /// x ↦ 1/(1 + exp(−(x−center)/scale)); bounded, continuous.
    Sigmoid { center: f64, scale: f64 },
    /// x ↦ x; continuous, unbounded.
    Identity,
    /// x ↦ c; the degenerate control.
    Constant { value: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Indicator { threshold } => {
                if x <= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Sigmoid { center, scale } => 1.0 / (1.0 + (-(x - center) / scale).exp()),
            TestFunction::Identity => x,
            TestFunction::Constant { value } => value,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, TestFunction::Identity)
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, TestFunction::Indicator { .. })
    }
}

/// Offsets are taken downward: α = β − δ. Validates that every α stays in
/// (1/2, 1] and returns the α list.
fn offset_orders(beta: f64, deltas: &[f64]) -> Result<Vec<f64>> {
    validate_order(beta)?;
    if deltas.is_empty() {
        return Err(Error::Domain("need at least one offset".into()));
    }
    deltas
        .iter()
        .map(|&d| {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Domain(format!("offsets must be positive, got {d}")));
            }
            let alpha = beta - d;
            validate_order(alpha)?;
            Ok(alpha)
        })
        .collect()
}

/// Run `f` once per replica, filling one row of `width` values; rows of
/// replicas whose recursion diverged are marked failed and excluded from
/// the column statistics. Non-divergence errors abort the whole run.
fn per_replica_table<F>(replicas: usize, width: usize, f: F) -> Result<(Vec<f64>, Vec<bool>, usize)>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let mut table = vec![0.0; replicas * width];
    let results: Vec<Result<()>> = table
        .par_chunks_mut(width)
        .enumerate()
        .map(|(r, row)| f(r, row))
        .collect();
    let mut failed = vec![false; replicas];
    let mut failures = 0;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(()) => {}
            Err(Error::Divergence { .. }) => {
                failed[r] = true;
                failures += 1;
            }
            Err(other) => return Err(other),
        }
    }
    if failures == replicas {
        return Err(Error::Contract(
            "every replica diverged; nothing to estimate".into(),
        ));
    }
    Ok((table, failed, failures))
}

fn column_estimate(
    table: &[f64],
    failed: &[bool],
    width: usize,
    col: usize,
    failures: usize,
) -> MomentEstimate {
    let values: Vec<f64> = failed
        .iter()
        .enumerate()
        .filter(|(_, &bad)| !bad)
        .map(|(r, _)| table[r * width + col])
        .collect();
    let (mean, std_error) = mean_and_stderr(&values);
    MomentEstimate {
        mean,
        std_error,
        replicas: values.len(),
        failures,
    }
}

/// Strong error curve: Ê|X_{β−δ,t} − X_{β,t}|^p per offset δ with common
/// random numbers, plus the fitted log–log slope (the strong rate
/// statement predicts slope p).
#[allow(clippy::too_many_arguments)]
pub fn strong_error_curve(
    model: &CoefficientModel,
    beta: f64,
    deltas: &[f64],
    p: f64,
    t: f64,
    grid: &TimeGrid,
    noise: &NoiseBatch,
    cfg: SchemeConfig,
) -> Result<ErrorCurve> {
    if p < 2.0 {
        return Err(Error::Domain(format!("moment order must be ≥ 2, got {p}")));
    }
    let alphas = offset_orders(beta, deltas)?;
    let k_t = grid.node_index(t)?;
    let beta_kernels = order_kernels(beta, grid, cfg)?;
    let alpha_kernels: Vec<OrderKernels> = alphas
        .iter()
        .map(|&a| order_kernels(a, grid, cfg))
        .collect::<Result<_>>()?;

    let (table, failed, failures) = per_replica_table(noise.replicas(), deltas.len(), |r, row| {
        let incs = noise.replica_increments(r);
        let xb = solve_with_kernels(model, &beta_kernels, grid, &incs)?[k_t];
        for (slot, kernels) in row.iter_mut().zip(&alpha_kernels) {
            let xa = solve_with_kernels(model, kernels, grid, &incs)?[k_t];
            *slot = (xa - xb).abs().powf(p);
        }
        Ok(())
    })?;

    let points: Vec<ErrorCurvePoint> = deltas
        .iter()
        .zip(&alphas)
        .enumerate()
        .map(|(c, (&delta, &alpha))| {
            let est = column_estimate(&table, &failed, deltas.len(), c, failures);
            ErrorCurvePoint {
                delta,
                alpha,
                error: est.mean,
                std_error: est.std_error,
                replicas: est.replicas,
                failures: est.failures,
            }
        })
        .collect();
    let fit = fit_loglog(
        &points
            .iter()
            .map(|pt| (pt.delta, pt.error))
            .collect::<Vec<_>>(),
    )?;
    Ok(ErrorCurve { points, fit })
}

/// First-variation error curve: Ê|(X_{β−δ,t} − X_{β,t})/(−δ) − Y_{β,t}|^p
/// per offset, fitted against δ (expected slope p·δ_Hölder for models
/// whose coefficient derivatives are δ_Hölder-regular).
#[allow(clippy::too_many_arguments)]
pub fn variation_error_curve(
    model: &CoefficientModel,
    beta: f64,
    deltas: &[f64],
    p: f64,
    t: f64,
    grid: &TimeGrid,
    noise: &NoiseBatch,
    cfg: SchemeConfig,
) -> Result<ErrorCurve> {
    if p < 2.0 {
        return Err(Error::Domain(format!("moment order must be ≥ 2, got {p}")));
    }
    let alphas = offset_orders(beta, deltas)?;
    let k_t = grid.node_index(t)?;
    let beta_kernels = order_kernels(beta, grid, cfg)?;
    let alpha_kernels: Vec<OrderKernels> = alphas
        .iter()
        .map(|&a| order_kernels(a, grid, cfg))
        .collect::<Result<_>>()?;

    let (table, failed, failures) = per_replica_table(noise.replicas(), deltas.len(), |r, row| {
        let incs = noise.replica_increments(r);
        let xb_values = solve_with_kernels(model, &beta_kernels, grid, &incs)?;
        let xb_t = xb_values[k_t];
        let base = Trajectory::from_parts(*grid, beta, xb_values);
        let y = solve_first_variation(model, beta, &base, &incs, cfg)?;
        let y_t = y.values()[k_t];
        for ((slot, kernels), &alpha) in row.iter_mut().zip(&alpha_kernels).zip(&alphas) {
            let xa = solve_with_kernels(model, kernels, grid, &incs)?[k_t];
            let quotient = (xa - xb_t) / (alpha - beta);
            *slot = (quotient - y_t).abs().powf(p);
        }
        Ok(())
    })?;

    let points: Vec<ErrorCurvePoint> = deltas
        .iter()
        .zip(&alphas)
        .enumerate()
        .map(|(c, (&delta, &alpha))| {
            let est = column_estimate(&table, &failed, deltas.len(), c, failures);
            ErrorCurvePoint {
                delta,
                alpha,
                error: est.mean,
                std_error: est.std_error,
                replicas: est.replicas,
                failures: est.failures,
            }
        })
        .collect();
    let fit = fit_loglog(
        &points
            .iter()
            .map(|pt| (pt.delta, pt.error))
            .collect::<Vec<_>>(),
    )?;
    Ok(ErrorCurve { points, fit })
}

/// Weak error curve for a bounded measurable test function: per offset,
/// |Ê[g(X_α,t) − g(X_β,t)]| with the difference taken per replica (CRN
/// variance control), plus the ratio table error/δ.
#[allow(clippy::too_many_arguments)]
pub fn weak_error_curve(
    model: &CoefficientModel,
    beta: f64,
    deltas: &[f64],
    g: TestFunction,
    t: f64,
    grid: &TimeGrid,
    noise: &NoiseBatch,
    cfg: SchemeConfig,
) -> Result<WeakErrorCurve> {
    if !g.is_bounded() {
        return Err(Error::Domain(
            "weak_error_curve requires a bounded test function (‖g‖∞ < ∞)".into(),
        ));
    }
    if model.ellipticity <= 0.0 {
        return Err(Error::Contract(
            "weak_error_curve requires a model with declared ellipticity σ₀ > 0".into(),
        ));
    }
    let alphas = offset_orders(beta, deltas)?;
    let outside_hypothesis = beta < 7.0 / 8.0;
    let k_t = grid.node_index(t)?;
    let beta_kernels = order_kernels(beta, grid, cfg)?;
    let alpha_kernels: Vec<OrderKernels> = alphas
        .iter()
        .map(|&a| order_kernels(a, grid, cfg))
        .collect::<Result<_>>()?;

    let (table, failed, failures) = per_replica_table(noise.replicas(), deltas.len(), |r, row| {
        let incs = noise.replica_increments(r);
        let gb = g.eval(solve_with_kernels(model, &beta_kernels, grid, &incs)?[k_t]);
        for (slot, kernels) in row.iter_mut().zip(&alpha_kernels) {
            let xa = solve_with_kernels(model, kernels, grid, &incs)?[k_t];
            *slot = g.eval(xa) - gb;
        }
        Ok(())
    })?;

    let mut points = Vec::with_capacity(deltas.len());
    let mut ratios = Vec::with_capacity(deltas.len());
    for (c, (&delta, &alpha)) in deltas.iter().zip(&alphas).enumerate() {
        let est = column_estimate(&table, &failed, deltas.len(), c, failures);
        points.push(ErrorCurvePoint {
            delta,
            alpha,
            error: est.mean.abs(),
            std_error: est.std_error,
            replicas: est.replicas,
            failures: est.failures,
        });
        ratios.push(est.mean.abs() / delta);
    }
    let fit = fit_loglog(
        &points
            .iter()
            .map(|pt| (pt.delta, pt.error))
            .collect::<Vec<_>>(),
    )?;
    Ok(WeakErrorCurve {
        points,
        ratios,
        fit,
        outside_hypothesis,
    })
}

/// One central-difference level of the weak derivative estimate.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeLevel {
    pub delta: f64,
    /// Ê[g(X_{β+δ}) − g(X_{β−δ})]/(2δ)
    pub quotient: f64,
    pub std_error: f64,
}

/// Richardson-extrapolated limit of the weak difference quotient
/// ∂_α Ê g(X_{α,t}) at α = β.
#[derive(Debug, Clone)]
pub struct WeakDerivativeEstimate {
    pub levels: Vec<DerivativeLevel>,
    /// Diagonal of the Neville table per level (last entry = best).
    pub extrapolants: Vec<f64>,
    pub extrapolated: f64,
    /// Last extrapolation increment plus the propagated MC error.
    pub error_estimate: f64,
    /// Propagated Monte Carlo standard error of the extrapolated value.
    pub mc_std_error: f64,
    /// Whether successive extrapolants were Cauchy within the combined
    /// tolerance; a false value is a report, not an exception.
    pub contracting: bool,
}

/// Estimate lim_{α→β} [Ê g(X_α,t) − Ê g(X_β,t)]/(α−β) by central
/// differences across shrinking offsets, Richardson-extrapolated in δ².
/// The test function must be continuous (it need not be bounded).
#[allow(clippy::too_many_arguments)]
pub fn weak_derivative_estimate(
    model: &CoefficientModel,
    beta: f64,
    t: f64,
    g: TestFunction,
    grid: &TimeGrid,
    noise: &NoiseBatch,
    deltas: &[f64],
    cfg: SchemeConfig,
) -> Result<WeakDerivativeEstimate> {
    if !g.is_continuous() {
        return Err(Error::Domain(
            "weak_derivative_estimate requires a continuous test function".into(),
        ));
    }
    validate_order(beta)?;
    if deltas.len() < 2 {
        return Err(Error::Domain(
            "need at least two offsets for extrapolation".into(),
        ));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite offsets"));
    for &d in &sorted {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Domain(format!("offsets must be positive, got {d}")));
        }
        validate_order(beta + d)?;
        validate_order(beta - d)?;
    }
    let k_t = grid.node_index(t)?;
    let kernels: Vec<(OrderKernels, OrderKernels)> = sorted
        .iter()
        .map(|&d| {
            Ok((
                order_kernels(beta + d, grid, cfg)?,
                order_kernels(beta - d, grid, cfg)?,
            ))
        })
        .collect::<Result<_>>()?;

    let (table, failed, _failures) =
        per_replica_table(noise.replicas(), sorted.len(), |r, row| {
            let incs = noise.replica_increments(r);
            for (slot, ((up, down), &d)) in row.iter_mut().zip(kernels.iter().zip(&sorted)) {
                let xu = solve_with_kernels(model, up, grid, &incs)?[k_t];
                let xd = solve_with_kernels(model, down, grid, &incs)?[k_t];
                *slot = (g.eval(xu) - g.eval(xd)) / (2.0 * d);
            }
            Ok(())
        })?;

    let mut levels = Vec::with_capacity(sorted.len());
    for (c, &delta) in sorted.iter().enumerate() {
        let est = column_estimate(&table, &failed, sorted.len(), c, 0);
        levels.push(DerivativeLevel {
            delta,
            quotient: est.mean,
            std_error: est.std_error,
        });
    }

    // Neville extrapolation to δ² → 0; track the coefficients of each
    // diagonal entry in the raw quotients to propagate the MC error.
    let m = levels.len();
    let xs: Vec<f64> = levels.iter().map(|l| l.delta * l.delta).collect();
    let mut vals: Vec<f64> = levels.iter().map(|l| l.quotient).collect();
    let mut coeffs: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut c = vec![0.0; m];
            c[i] = 1.0;
            c
        })
        .collect();
    let mut extrapolants = vec![vals[0]];
    let mut final_coeffs = coeffs[0].clone();
    for level in 1..m {
        // one Neville sweep: after this pass vals[i] extrapolates points
        // i..=i+level; vals[0] is the diagonal entry
        for i in 0..(m - level) {
            let (x_lo, x_hi) = (xs[i], xs[i + level]);
            let w_hi = x_lo / (x_lo - x_hi);
            let w_lo = 1.0 - w_hi;
            vals[i] = w_lo * vals[i] + w_hi * vals[i + 1];
            let next: Vec<f64> = coeffs[i]
                .iter()
                .zip(&coeffs[i + 1])
                .map(|(a, b)| w_lo * a + w_hi * b)
                .collect();
            coeffs[i] = next;
        }
        extrapolants.push(vals[0]);
        final_coeffs = coeffs[0].clone();
    }
    let extrapolated = *extrapolants.last().expect("at least one level");
    let mc_var: f64 = final_coeffs
        .iter()
        .zip(&levels)
        .map(|(c, l)| (c * l.std_error) * (c * l.std_error))
        .sum();
    let mc_std_error = mc_var.sqrt();

    // Cauchy check: the final extrapolation step must either sit below the
    // propagated noise floor or keep shrinking geometrically.
    let steps: Vec<f64> = extrapolants
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .collect();
    let last_step = *steps.last().expect("at least two levels");
    let scale = extrapolated.abs().max(1.0);
    let noise_floor = 3.0 * mc_std_error + 64.0 * f64::EPSILON * scale;
    let geometric = steps.len() >= 2 && last_step <= 0.5 * steps[steps.len() - 2];
    let contracting = last_step <= noise_floor || geometric;
    Ok(WeakDerivativeEstimate {
        levels,
        extrapolated,
        error_estimate: last_step + mc_std_error,
        mc_std_error,
        contracting,
        extrapolants,
    })
}

/// Per-order moment table Ê|X_{α,t}|^p with the max/min spread that the
/// uniform-moment bound controls.
#[derive(Debug, Clone)]
pub struct MomentScan {
    pub rows: Vec<(f64, MomentEstimate)>,
    /// max mean / min mean across orders
    pub spread: f64,
}

/// Estimate Ê|X_{α,t}|^p for each order in the list on common noise.
#[allow(clippy::too_many_arguments)]
pub fn moment_scan(
    model: &CoefficientModel,
    orders: &[f64],
    p: f64,
    t: f64,
    grid: &TimeGrid,
    noise: &NoiseBatch,
    cfg: SchemeConfig,
) -> Result<MomentScan> {
    if p < 2.0 {
        return Err(Error::Domain(format!("moment order must be ≥ 2, got {p}")));
    }
    if orders.is_empty() {
        return Err(Error::Domain("need at least one order".into()));
    }
    let k_t = grid.node_index(t)?;
    let kernels: Vec<OrderKernels> = orders
        .iter()
        .map(|&a| order_kernels(a, grid, cfg))
        .collect::<Result<_>>()?;
    let (table, failed, failures) = per_replica_table(noise.replicas(), orders.len(), |r, row| {
        let incs = noise.replica_increments(r);
        for (slot, k) in row.iter_mut().zip(&kernels) {
            let x = solve_with_kernels(model, k, grid, &incs)?[k_t];
            *slot = x.abs().powf(p);
        }
        Ok(())
    })?;
    let rows: Vec<(f64, MomentEstimate)> = orders
        .iter()
        .enumerate()
        .map(|(c, &a)| {
            (
                a,
                column_estimate(&table, &failed, orders.len(), c, failures),
            )
        })
        .collect();
    let max = rows.iter().map(|r| r.1.mean).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.1.mean).fold(f64::MAX, f64::min);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    Ok(MomentScan { rows, spread })
}
