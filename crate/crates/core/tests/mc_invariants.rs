//! Seed-pinned Monte Carlo invariants: moment boundedness, coupling
//! variance reduction, variance isometries, first-variation and Malliavin
//! scaling laws. Tolerances follow the asymptotic statements; seeds are
//! fixed so the tests are deterministic.

use fracsde_core::malliavin::{
    double_norm_sq, inverse_moment_estimate, sobolev_norm_sq, solve_first_derivative,
    solve_second_derivative, SECOND_DERIVATIVE_CAP,
};
use fracsde_core::paths::{make_grid, sample_noise};
use fracsde_core::rates::{
    fit_loglog, moment_scan, variation_error_curve, weak_derivative_estimate, TestFunction,
};
use fracsde_core::solver::{solve_path, CoefficientModel, DiffusionRule, SchemeConfig, Trajectory};
use fracsde_core::specfun::{gamma_eval, singular_quad};
use fracsde_core::variation::{difference_quotient, solve_first_variation};

fn linear_additive() -> CoefficientModel {
    // b(x) = −x, σ ≡ 1
    CoefficientModel::linear(-1.0, 0.0, 0.0, 1.0, 1.0)
}

#[test]
fn moments_bounded_uniformly_in_order() {
    // E|X_{α,1}|⁴ varies by less than one order of magnitude over α
    let model = linear_additive();
    let grid = make_grid(1.0, 128).unwrap();
    let noise = sample_noise(&grid, 10_000, 35).unwrap();
    let scan = moment_scan(
        &model,
        &[0.6, 0.75, 0.9, 1.0],
        4.0,
        1.0,
        &grid,
        &noise,
        SchemeConfig::default(),
    )
    .unwrap();
    for (a, est) in &scan.rows {
        assert!(est.mean.is_finite(), "E|X|⁴ at α = {a} not finite");
        assert_eq!(est.failures, 0);
    }
    assert!(scan.spread < 10.0, "spread {}", scan.spread);
}

#[test]
fn common_noise_coupling_reduces_variance() {
    // E|X_α − X_β|² with shared increments is far below the independent
    // coupling.
    let model = linear_additive();
    let grid = make_grid(1.0, 128).unwrap();
    let m = 2000;
    let shared = sample_noise(&grid, m, 37).unwrap();
    let indep = sample_noise(&grid, m, 38).unwrap();
    let cfg = SchemeConfig::default();
    let (mut crn, mut ind) = (0.0, 0.0);
    for r in 0..m {
        let incs = shared.replica_increments(r);
        let incs2 = indep.replica_increments(r);
        let xb = solve_path(&model, 0.9, &grid, &incs, cfg)
            .unwrap()
            .terminal();
        let xa = solve_path(&model, 0.8, &grid, &incs, cfg)
            .unwrap()
            .terminal();
        let xa2 = solve_path(&model, 0.8, &grid, &incs2, cfg)
            .unwrap()
            .terminal();
        crn += (xa - xb) * (xa - xb);
        ind += (xa2 - xb) * (xa2 - xb);
    }
    assert!(
        crn < ind,
        "coupled second moment {crn} not below independent {ind}"
    );
}

#[test]
fn additive_variation_variance_matches_isometry_integral() {
    // Var Y_{β,1} = σ0²/Γ(β)² ∫₀¹ u^{2β−2} (ln u − Γ′(β)/Γ(β))² du,
    // within 3 MC standard errors of the variance estimate.
    let beta = 0.9;
    let model = CoefficientModel::additive_noise(0.0, 1.0, 0.0);
    let grid = make_grid(1.0, 512).unwrap();
    let m = 2000;
    let noise = sample_noise(&grid, m, 39).unwrap();
    let cfg = SchemeConfig {
        diffusion: DiffusionRule::IntegratedL2Weights,
        ..Default::default()
    };
    let mut ys = Vec::with_capacity(m);
    for r in 0..m {
        let incs = noise.replica_increments(r);
        let base = solve_path(&model, beta, &grid, &incs, cfg).unwrap();
        let run = solve_first_variation(&model, beta, &base, &incs, cfg).unwrap();
        ys.push(run.terminal());
    }
    let mean = ys.iter().sum::<f64>() / m as f64;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (m - 1) as f64;
    let g = gamma_eval(beta).unwrap();
    let c = g.d1 / g.value;
    let integral = singular_quad(
        |u| {
            let l = u.ln() - c;
            u.powf(2.0 * beta - 2.0) * l * l
        },
        1.0,
        1e-12,
    )
    .unwrap();
    let exact = integral / (g.value * g.value);
    let se = var * (2.0 / m as f64).sqrt();
    assert!(
        (var - exact).abs() <= 3.0 * se,
        "variance {var} vs isometry {exact} (3se {})",
        3.0 * se
    );
}

#[test]
fn variation_limit_sup_over_nodes_has_quadratic_rate() {
    // sup_k E|(X_α − X_β)/(α−β) − Y_β|²(t_k) decays with slope 2 ± 0.3
    let model = linear_additive();
    let grid = make_grid(1.0, 128).unwrap();
    let m = 2000;
    let noise = sample_noise(&grid, m, 33).unwrap();
    let cfg = SchemeConfig::default();
    let beta = 0.9;
    let deltas = [0.125, 0.0625, 0.03125];
    let mut pts = Vec::new();
    for &d in &deltas {
        let alpha = beta - d;
        let mut sums = vec![0.0; 129];
        for r in 0..m {
            let incs = noise.replica_increments(r);
            let xb = solve_path(&model, beta, &grid, &incs, cfg).unwrap();
            let xa = solve_path(&model, alpha, &grid, &incs, cfg).unwrap();
            let y = solve_first_variation(&model, beta, &xb, &incs, cfg).unwrap();
            let q = difference_quotient(&xa, &xb).unwrap();
            for (sum, (qv, yv)) in sums.iter_mut().zip(q.iter().zip(y.values())) {
                let z = qv - yv;
                *sum += z * z;
            }
        }
        let sup = sums.iter().cloned().fold(f64::MIN, f64::max) / m as f64;
        pts.push((d, sup));
    }
    let fit = fit_loglog(&pts).unwrap();
    assert!(
        (fit.slope - 2.0).abs() <= 0.3,
        "sup-node slope {}",
        fit.slope
    );
}

#[test]
fn holder_kink_variation_rate_is_at_least_p_delta() {
    // derivative with Hölder exponent δ = 1/2: the variation limit
    // converges at rate pδ or better; one-sided check with slack 0.3.
    let delta_holder = 0.5;
    let model = CoefficientModel::holder_kink(0.8, delta_holder, 0.5);
    let grid = make_grid(1.0, 256).unwrap();
    let noise = sample_noise(&grid, 4000, 31).unwrap();
    let deltas = [0.125, 0.0625, 0.03125, 0.015625];
    let curve = variation_error_curve(
        &model,
        0.9,
        &deltas,
        2.0,
        1.0,
        &grid,
        &noise,
        SchemeConfig::default(),
    )
    .unwrap();
    let floor = 2.0 * delta_holder - 0.3;
    assert!(
        curve.fit.slope >= floor,
        "slope {} below pδ − 0.3 = {floor}",
        curve.fit.slope
    );
}

#[test]
fn weak_derivative_contracts_for_smooth_test_function() {
    // stochastic sigmoid case of the weak-derivative limit: successive
    // Richardson extrapolants must be Cauchy within combined errors
    let model = CoefficientModel::additive_noise(1.0, 1.0, 0.0);
    let grid = make_grid(1.0, 64).unwrap();
    let noise = sample_noise(&grid, 50_000, 20250405).unwrap();
    let cfg = SchemeConfig {
        diffusion: DiffusionRule::IntegratedL2Weights,
        ..Default::default()
    };
    let est = weak_derivative_estimate(
        &model,
        0.9,
        1.0,
        TestFunction::Sigmoid {
            center: 0.5,
            scale: 0.5,
        },
        &grid,
        &noise,
        &[0.08, 0.04, 0.02],
        cfg,
    )
    .unwrap();
    assert!(est.contracting, "extrapolants {:?}", est.extrapolants);
    assert!(est.extrapolated.is_finite());
}

#[test]
fn sobolev_norm_scaling_follows_first_derivative_bound() {
    // ∫₀ᵗ E|D_θX_t|² dθ grows like t^{2α−1}: slope 0.5 ± 0.2 at α = 0.75
    // for a gently mean-reverting linear model (per-horizon grids with a
    // common step count isolate the t-scaling).
    let a = 0.75;
    let model = CoefficientModel::linear(-0.25, 0.0, 0.0, 1.0, 1.0);
    let mut pts = Vec::new();
    for &t in &[0.25, 0.5, 1.0] {
        let grid = make_grid(t, 128).unwrap();
        let noise = sample_noise(&grid, 16, 2).unwrap();
        let mut acc = 0.0;
        for r in 0..16 {
            let incs = noise.replica_increments(r);
            let base = solve_path(&model, a, &grid, &incs, SchemeConfig::default()).unwrap();
            let d = solve_first_derivative(&model, a, &base, &incs).unwrap();
            acc += sobolev_norm_sq(&d, 128);
        }
        pts.push((t, acc / 16.0));
    }
    let fit = fit_loglog(&pts).unwrap();
    assert!(
        (fit.slope - (2.0 * a - 1.0)).abs() <= 0.2,
        "slope {} vs {}",
        fit.slope,
        2.0 * a - 1.0
    );
}

#[test]
fn second_derivative_scaling_follows_double_norm_bound() {
    // E(∬|D_rD_θX_t|² dr dθ)² scales like t^{2p(2α−1)}, p = 2, within
    // ±0.4; multiplicative noise so the second-derivative sources load.
    let a = 0.9;
    let model = CoefficientModel::linear(-0.5, 0.0, 0.5, 1.0, 1.0);
    let mut pts = Vec::new();
    for &t in &[0.25, 0.5, 1.0] {
        let grid = make_grid(t, 48).unwrap();
        let m = 200;
        let noise = sample_noise(&grid, m, 20250408).unwrap();
        let mut vals = Vec::new();
        for r in 0..m {
            let incs = noise.replica_increments(r);
            let base = solve_path(&model, a, &grid, &incs, SchemeConfig::default()).unwrap();
            let d1 = solve_first_derivative(&model, a, &base, &incs).unwrap();
            let d2 = solve_second_derivative(&model, a, &base, &d1, &incs, SECOND_DERIVATIVE_CAP)
                .unwrap();
            let q = double_norm_sq(&d2, 48);
            vals.push(q * q);
        }
        pts.push((t, vals.iter().sum::<f64>() / vals.len() as f64));
    }
    let fit = fit_loglog(&pts).unwrap();
    let target = 2.0 * 2.0 * (2.0 * a - 1.0);
    assert!(
        (fit.slope - target).abs() <= 0.4,
        "slope {} vs {target}",
        fit.slope
    );
}

#[test]
fn inverse_moment_scaling_linear_model() {
    // E‖DX‖^{−2γ} ~ t^{(1−2α)γ} for the gently reverting linear model;
    // per-horizon grids with a fixed step count, γ = 2, α = 0.9.
    let a = 0.9;
    let gamma_exp = 2.0;
    let model = CoefficientModel::linear(-0.25, 0.0, 0.0, 1.0, 1.0);
    let mut pts = Vec::new();
    for &t in &[0.25, 0.5, 1.0] {
        let grid = make_grid(t, 256).unwrap();
        let noise = sample_noise(&grid, 8, 20250406).unwrap();
        let est =
            inverse_moment_estimate(&model, a, &grid, &noise, gamma_exp, SchemeConfig::default())
                .unwrap();
        assert!(!est.outside_hypothesis);
        pts.push((t, est.mean));
    }
    let fit = fit_loglog(&pts).unwrap();
    let target = (1.0 - 2.0 * a) * gamma_exp;
    assert!(
        (fit.slope - target).abs() <= 0.3,
        "slope {} vs {target}",
        fit.slope
    );
}

#[test]
fn sobolev_norms_positive_under_ellipticity() {
    // min over replicas of ‖DX‖² stays strictly positive when σ₀ > 0
    let model = CoefficientModel::linear(-0.5, 0.0, 0.0, 1.0, 1.0);
    let grid = make_grid(1.0, 64).unwrap();
    let noise = sample_noise(&grid, 32, 41).unwrap();
    let cfg = SchemeConfig::default();
    let mut min_norm = f64::MAX;
    for r in 0..32 {
        let incs = noise.replica_increments(r);
        let base: Trajectory = solve_path(&model, 0.8, &grid, &incs, cfg).unwrap();
        let d = solve_first_derivative(&model, 0.8, &base, &incs).unwrap();
        min_norm = min_norm.min(sobolev_norm_sq(&d, 64));
    }
    assert!(min_norm > 0.0, "minimum Sobolev norm {min_norm}");
}
