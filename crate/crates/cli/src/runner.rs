//! Experiment dispatch: configs in, CSV/JSON artifacts and a
//! reproducibility manifest out. The manifest is written last, after every
//! artifact is complete, so its presence marks a finished run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use fracsde_core::gronwall::{explicit_bound, henry_series_bound, monotone_bound, GronwallProblem};
use fracsde_core::malliavin::{inverse_moment_estimate, sobolev_norm_sq, solve_first_derivative};
use fracsde_core::paths::{make_grid, sample_noise, TimeGrid};
use fracsde_core::rates::{
    strong_error_curve, variation_error_curve, weak_derivative_estimate, weak_error_curve,
    ErrorCurve,
};
use fracsde_core::solver::solve_path;
use fracsde_core::variation::solve_first_variation;
use fracsde_core::Error as CoreError;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::csvio::{emit_csv, Table};
use crate::selfcheck;

/// Exit discipline: 0 success, 1 validation, 2 runtime, 3 inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Inconclusive,
}

#[derive(Debug)]
pub enum RunError {
    Validation(String),
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "validation error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_) | CoreError::Contract(_) => RunError::Validation(e.to_string()),
            other => RunError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

/// Reproducibility manifest; re-running with the same config and seed
/// reproduces byte-identical CSV bodies.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub replicas: usize,
    pub artifacts: Vec<String>,
    pub tool_version: String,
    pub wall_time_seconds: f64,
}

/// SHA-256 of the canonical JSON serialization (object keys sorted by
/// serde_json's default BTreeMap ordering).
pub fn config_hash(config: &ExperimentConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct ArtifactSink {
    dir: PathBuf,
    files: Vec<String>,
}

impl ArtifactSink {
    fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write_table(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        emit_csv(table, &self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| RunError::Runtime(format!("serializing {name}: {e}")))?;
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Run one experiment: validate, dispatch, write artifacts, then the
/// manifest as the final commit marker.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, RunError> {
    config.validate().map_err(RunError::Validation)?;
    // the declared model assumptions are a contract; spot-check them on
    // a deterministic sample before spending any simulation time
    if !matches!(
        config.kind,
        ExperimentKind::Selfcheck | ExperimentKind::Gronwall
    ) {
        let model = config.model.build();
        let horizon = config.grid.as_ref().map(|g| g.horizon).unwrap_or(1.0);
        model
            .spot_check_lipschitz(horizon, 256, 0x5eed)
            .map_err(|e| RunError::Validation(e.to_string()))?;
        model
            .spot_check_ellipticity(horizon, 256, 0x5eee)
            .map_err(|e| RunError::Validation(e.to_string()))?;
    }
    let started = Instant::now();
    let mut sink = ArtifactSink::new(out_dir)?;
    let outcome = dispatch(config, &mut sink)?;
    let manifest = RunManifest {
        config_hash: config_hash(config),
        seed: config.mc.as_ref().map(|m| m.seed).unwrap_or(0),
        replicas: config.mc.as_ref().map(|m| m.replicas).unwrap_or(0),
        artifacts: sink.files.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunError::Runtime(format!("serializing manifest: {e}")))?;
    // temp-write then rename so a torn manifest is never observable
    let tmp = out_dir.join("manifest.json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, out_dir.join("manifest.json"))?;
    Ok(outcome)
}

fn grid_of(config: &ExperimentConfig) -> Result<TimeGrid, RunError> {
    let g = config
        .grid
        .as_ref()
        .ok_or_else(|| RunError::Validation("grid: required".into()))?;
    Ok(make_grid(g.horizon, g.steps)?)
}

fn curve_table(curve: &ErrorCurve, replicas: usize) -> Table {
    let mut table = Table::new(&["delta", "error", "stderr", "m"]);
    for pt in &curve.points {
        table.push(vec![pt.delta, pt.error, pt.std_error, replicas as f64]);
    }
    table
}

#[derive(Serialize)]
struct FitSummary {
    kind: String,
    slope: f64,
    slope_std_error: f64,
    intercept: f64,
    r_squared: f64,
    seed: u64,
    config_hash: String,
}

fn dispatch(config: &ExperimentConfig, sink: &mut ArtifactSink) -> Result<Outcome, RunError> {
    let hash = config_hash(config);
    match config.kind {
        ExperimentKind::Selfcheck => {
            let report = selfcheck::run();
            let mut table = Table::new(&["value", "reference", "abs_error"]);
            for row in &report.rows {
                table.push(vec![
                    row.value,
                    row.reference,
                    (row.value - row.reference).abs(),
                ]);
            }
            sink.write_table("selfcheck.csv", &table)?;
            if report.all_ok() {
                Ok(Outcome::Success)
            } else {
                Err(RunError::Runtime(
                    "selfcheck found out-of-tolerance values".into(),
                ))
            }
        }

        ExperimentKind::Gronwall => {
            let grid = grid_of(config)?;
            let gw = config.gronwall.as_ref().expect("validated");
            let omega = gw.omega.build();
            let problem = GronwallProblem::new(gw.a, gw.eta, grid.horizon(), omega, true)?;
            let table = gronwall_table(&problem, &grid)?;
            sink.write_table("bounds.csv", &table)?;
            Ok(Outcome::Success)
        }

        ExperimentKind::Solve => {
            let grid = grid_of(config)?;
            let mc = config.mc.as_ref().expect("validated");
            let model = config.model.build();
            let scheme = config.scheme.build();
            let order = config.order.expect("validated");
            let replica = config.replica.unwrap_or(0);
            let noise = sample_noise(&grid, mc.replicas, mc.seed)?;
            if replica >= mc.replicas {
                return Err(RunError::Validation(format!(
                    "replica: index {replica} out of range (m = {})",
                    mc.replicas
                )));
            }
            let incs = noise.replica_increments(replica);
            let path = solve_path(&model, order, &grid, &incs, scheme)?;
            if config.with_variation.unwrap_or(false) {
                let run = solve_first_variation(&model, order, &path, &incs, scheme)?;
                let mut table = Table::new(&["t", "X", "Y"]);
                for k in 0..=grid.steps() {
                    table.push(vec![grid.node(k), path.values()[k], run.values()[k]]);
                }
                sink.write_table("trajectory.csv", &table)?;
            } else {
                let mut table = Table::new(&["t", "X"]);
                for k in 0..=grid.steps() {
                    table.push(vec![grid.node(k), path.values()[k]]);
                }
                sink.write_table("trajectory.csv", &table)?;
            }
            Ok(Outcome::Success)
        }

        ExperimentKind::Strong | ExperimentKind::Variation => {
            let grid = grid_of(config)?;
            let mc = config.mc.as_ref().expect("validated");
            let model = config.model.build();
            let scheme = config.scheme.build();
            let beta = config.beta.expect("validated");
            let deltas = config.deltas.as_ref().expect("validated");
            let p = config.p.expect("validated");
            let t = config.time();
            let noise = sample_noise(&grid, mc.replicas, mc.seed)?;
            let curve = if config.kind == ExperimentKind::Strong {
                strong_error_curve(&model, beta, deltas, p, t, &grid, &noise, scheme)?
            } else {
                variation_error_curve(&model, beta, deltas, p, t, &grid, &noise, scheme)?
            };
            sink.write_table("curve.csv", &curve_table(&curve, mc.replicas))?;
            sink.write_json(
                "summary.json",
                &FitSummary {
                    kind: config.kind.to_string(),
                    slope: curve.fit.slope,
                    slope_std_error: curve.fit.slope_std_error,
                    intercept: curve.fit.intercept,
                    r_squared: curve.fit.r_squared,
                    seed: mc.seed,
                    config_hash: hash,
                },
            )?;
            Ok(Outcome::Success)
        }

        ExperimentKind::Weak => {
            let grid = grid_of(config)?;
            let mc = config.mc.as_ref().expect("validated");
            let model = config.model.build();
            let scheme = config.scheme.build();
            let beta = config.beta.expect("validated");
            let deltas = config.deltas.as_ref().expect("validated");
            let g = config.g.as_ref().expect("validated").build();
            let t = config.time();
            let noise = sample_noise(&grid, mc.replicas, mc.seed)?;
            let curve = weak_error_curve(&model, beta, deltas, g, t, &grid, &noise, scheme)?;
            let mut table = Table::new(&["delta", "error", "stderr", "m", "ratio"]);
            for (pt, &ratio) in curve.points.iter().zip(&curve.ratios) {
                table.push(vec![
                    pt.delta,
                    pt.error,
                    pt.std_error,
                    mc.replicas as f64,
                    ratio,
                ]);
            }
            sink.write_table("curve.csv", &table)?;
            #[derive(Serialize)]
            struct WeakSummary {
                kind: String,
                slope: f64,
                slope_std_error: f64,
                r_squared: f64,
                ratios: Vec<f64>,
                outside_hypothesis: bool,
                seed: u64,
                config_hash: String,
            }
            sink.write_json(
                "summary.json",
                &WeakSummary {
                    kind: "weak".into(),
                    slope: curve.fit.slope,
                    slope_std_error: curve.fit.slope_std_error,
                    r_squared: curve.fit.r_squared,
                    ratios: curve.ratios.clone(),
                    outside_hypothesis: curve.outside_hypothesis,
                    seed: mc.seed,
                    config_hash: hash,
                },
            )?;
            Ok(Outcome::Success)
        }

        ExperimentKind::WeakDerivative => {
            let grid = grid_of(config)?;
            let mc = config.mc.as_ref().expect("validated");
            let model = config.model.build();
            let scheme = config.scheme.build();
            let beta = config.beta.expect("validated");
            let deltas = config.deltas.as_ref().expect("validated");
            let g = config.g.as_ref().expect("validated").build();
            let t = config.time();
            let noise = sample_noise(&grid, mc.replicas, mc.seed)?;
            let est = weak_derivative_estimate(&model, beta, t, g, &grid, &noise, deltas, scheme)?;
            let mut table = Table::new(&["delta", "quotient", "stderr"]);
            for level in &est.levels {
                table.push(vec![level.delta, level.quotient, level.std_error]);
            }
            sink.write_table("levels.csv", &table)?;
            #[derive(Serialize)]
            struct DerivativeSummary {
                kind: String,
                extrapolated: f64,
                error_estimate: f64,
                mc_std_error: f64,
                contracting: bool,
                seed: u64,
                config_hash: String,
            }
            sink.write_json(
                "summary.json",
                &DerivativeSummary {
                    kind: "weak-derivative".into(),
                    extrapolated: est.extrapolated,
                    error_estimate: est.error_estimate,
                    mc_std_error: est.mc_std_error,
                    contracting: est.contracting,
                    seed: mc.seed,
                    config_hash: hash,
                },
            )?;
            if est.contracting {
                Ok(Outcome::Success)
            } else {
                Ok(Outcome::Inconclusive)
            }
        }

        ExperimentKind::Malliavin => {
            let grid = grid_of(config)?;
            let mc = config.mc.as_ref().expect("validated");
            let model = config.model.build();
            let scheme = config.scheme.build();
            let order = config.order.expect("validated");
            let replica = config.replica.unwrap_or(0);
            let noise = sample_noise(&grid, mc.replicas, mc.seed)?;
            if replica >= mc.replicas {
                return Err(RunError::Validation(format!(
                    "replica: index {replica} out of range (m = {})",
                    mc.replicas
                )));
            }
            let incs = noise.replica_increments(replica);
            let base = solve_path(&model, order, &grid, &incs, scheme)?;
            let d = solve_first_derivative(&model, order, &base, &incs)?;
            let mut table = Table::new(&["theta", "t", "D"]);
            for i in 0..grid.steps() {
                for k in (i + 1)..=grid.steps() {
                    table.push(vec![grid.node(i), grid.node(k), d.entry(i, k)]);
                }
            }
            sink.write_table("dgrid.csv", &table)?;

            #[derive(Serialize)]
            struct MalliavinSummary {
                kind: String,
                order: f64,
                sobolev_norm_sq_at_horizon: f64,
                #[serde(skip_serializing_if = "Option::is_none")]
                inverse_moment: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                inverse_moment_std_error: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                outside_hypothesis: Option<bool>,
                seed: u64,
                config_hash: String,
            }
            let mut summary = MalliavinSummary {
                kind: "malliavin".into(),
                order,
                sobolev_norm_sq_at_horizon: sobolev_norm_sq(&d, grid.steps()),
                inverse_moment: None,
                inverse_moment_std_error: None,
                outside_hypothesis: None,
                seed: mc.seed,
                config_hash: hash,
            };
            if let Some(gamma) = config.gamma {
                let est = inverse_moment_estimate(&model, order, &grid, &noise, gamma, scheme)?;
                summary.inverse_moment = Some(est.mean);
                summary.inverse_moment_std_error = Some(est.std_error);
                summary.outside_hypothesis = Some(est.outside_hypothesis);
            }
            sink.write_json("summary.json", &summary)?;
            Ok(Outcome::Success)
        }
    }
}

/// The three Gronwall bounds tabulated over the grid.
pub fn gronwall_table(problem: &GronwallProblem, grid: &TimeGrid) -> Result<Table, RunError> {
    let mut table = Table::new(&["t", "omega", "explicit", "monotone", "henry"]);
    for k in 0..=grid.steps() {
        let t = grid.node(k);
        let henry = henry_series_bound(problem, t, 1e-10)?;
        table.push(vec![
            t,
            problem.omega(t),
            explicit_bound(problem, t)?,
            monotone_bound(problem, t)?,
            henry.value,
        ]);
    }
    Ok(table)
}
