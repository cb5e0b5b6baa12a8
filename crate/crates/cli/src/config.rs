//! Experiment configuration: a single JSON document with named model and
//! test-function presets (coefficient oracles cannot be serialized, so
//! reproducibility rests on presets plus overridable parameters).
//! Unknown fields are rejected.

use serde::{Deserialize, Serialize};

use fracsde_core::rates::TestFunction;
use fracsde_core::solver::{CoefficientModel, DiffusionRule, DriftRule, SchemeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Solve,
    Strong,
    Variation,
    Weak,
    WeakDerivative,
    Malliavin,
    Gronwall,
    Selfcheck,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Strong => "strong",
            ExperimentKind::Variation => "variation",
            ExperimentKind::Weak => "weak",
            ExperimentKind::WeakDerivative => "weak-derivative",
            ExperimentKind::Malliavin => "malliavin",
            ExperimentKind::Gronwall => "gronwall",
            ExperimentKind::Selfcheck => "selfcheck",
        };
        f.write_str(name)
    }
}

fn default_one() -> f64 {
    1.0
}

fn default_minus_one() -> f64 {
    -1.0
}

fn default_half() -> f64 {
    0.5
}

/// Named coefficient-model presets with overridable parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// b ≡ b0, σ ≡ 0
    DeterministicDrift {
        #[serde(default = "default_one")]
        b0: f64,
        #[serde(default)]
        x0: f64,
    },
    /// b ≡ b0, σ ≡ sigma0
    AdditiveNoise {
        #[serde(default)]
        b0: f64,
        #[serde(default = "default_one")]
        sigma0: f64,
        #[serde(default)]
        x0: f64,
    },
    /// b = drift_slope·x + drift_const, σ = diff_slope·x + diff_const
    Linear {
        #[serde(default = "default_minus_one")]
        drift_slope: f64,
        #[serde(default)]
        drift_const: f64,
        #[serde(default)]
        diff_slope: f64,
        #[serde(default = "default_one")]
        diff_const: f64,
        #[serde(default = "default_one")]
        x0: f64,
    },
    /// b = −x + kappa·ρ_δ(x) with Hölder-δ derivative kink, σ ≡ 1
    HolderKink {
        #[serde(default = "default_one")]
        kappa: f64,
        #[serde(default = "default_half")]
        delta: f64,
        #[serde(default)]
        x0: f64,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Linear {
            drift_slope: -1.0,
            drift_const: 0.0,
            diff_slope: 0.0,
            diff_const: 1.0,
            x0: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> CoefficientModel {
        match *self {
            ModelConfig::DeterministicDrift { b0, x0 } => {
                CoefficientModel::deterministic_drift(b0, x0)
            }
            ModelConfig::AdditiveNoise { b0, sigma0, x0 } => {
                CoefficientModel::additive_noise(b0, sigma0, x0)
            }
            ModelConfig::Linear {
                drift_slope,
                drift_const,
                diff_slope,
                diff_const,
                x0,
            } => CoefficientModel::linear(drift_slope, drift_const, diff_slope, diff_const, x0),
            ModelConfig::HolderKink { kappa, delta, x0 } => {
                CoefficientModel::holder_kink(kappa, delta, x0)
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let ModelConfig::HolderKink { delta, .. } = self {
            if !(*delta > 0.0 && *delta <= 1.0) {
                return Err(format!(
                    "model.delta: Hölder exponent must lie in (0, 1], got {delta}"
                ));
            }
        }
        Ok(())
    }
}

/// Test-function presets for the weak experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFnConfig {
    Indicator { threshold: f64 },
    Sigmoid { center: f64, scale: f64 },
    Identity,
    Constant { value: f64 },
}

impl TestFnConfig {
    pub fn build(&self) -> TestFunction {
        match *self {
            TestFnConfig::Indicator { threshold } => TestFunction::Indicator { threshold },
            TestFnConfig::Sigmoid { center, scale } => TestFunction::Sigmoid { center, scale },
            TestFnConfig::Identity => TestFunction::Identity,
            TestFnConfig::Constant { value } => TestFunction::Constant { value },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftRuleConfig {
    IntegratedWeights,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionRuleConfig {
    LeftPointKernel,
    IntegratedL2Weights,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfigDto {
    #[serde(default = "default_drift_rule")]
    pub drift: DriftRuleConfig,
    #[serde(default = "default_diffusion_rule")]
    pub diffusion: DiffusionRuleConfig,
}

fn default_drift_rule() -> DriftRuleConfig {
    DriftRuleConfig::IntegratedWeights
}

fn default_diffusion_rule() -> DiffusionRuleConfig {
    DiffusionRuleConfig::LeftPointKernel
}

impl Default for SchemeConfigDto {
    fn default() -> Self {
        Self {
            drift: default_drift_rule(),
            diffusion: default_diffusion_rule(),
        }
    }
}

impl SchemeConfigDto {
    pub fn build(&self) -> SchemeConfig {
        SchemeConfig {
            drift: match self.drift {
                DriftRuleConfig::IntegratedWeights => DriftRule::IntegratedWeights,
            },
            diffusion: match self.diffusion {
                DiffusionRuleConfig::LeftPointKernel => DiffusionRule::LeftPointKernel,
                DiffusionRuleConfig::IntegratedL2Weights => DiffusionRule::IntegratedL2Weights,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub replicas: usize,
    pub seed: u64,
}

/// Forcing presets for the Gronwall experiment (all non-decreasing).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OmegaConfig {
    Constant { value: f64 },
    Linear { rate: f64 },
    Sqrt { scale: f64 },
}

impl OmegaConfig {
    pub fn build(&self) -> Box<dyn Fn(f64) -> f64 + Send + Sync> {
        match *self {
            OmegaConfig::Constant { value } => Box::new(move |_| value),
            OmegaConfig::Linear { rate } => Box::new(move |t| rate * t),
            OmegaConfig::Sqrt { scale } => Box::new(move |t| scale * t.sqrt()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallConfig {
    pub a: f64,
    pub eta: f64,
    pub omega: OmegaConfig,
}

/// Top-level experiment description. Kind-specific fields are optional at
/// parse time and checked by [`ExperimentConfig::validate`], which reports
/// field-level messages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub scheme: SchemeConfigDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<TestFnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_variation: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gronwall: Option<GronwallConfig>,
}

fn order_in_range(name: &str, v: f64) -> Result<(), String> {
    if !(v > 0.5 && v <= 1.0) {
        return Err(format!(
            "{name}: fractional order must lie in (1/2, 1], got {v}"
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Validate the numeric domains and per-kind required fields.
    pub fn validate(&self) -> Result<(), String> {
        self.model.validate()?;
        if let Some(grid) = &self.grid {
            if !(grid.horizon > 0.0 && grid.horizon.is_finite()) {
                return Err(format!(
                    "grid.horizon: must be positive, got {}",
                    grid.horizon
                ));
            }
            if grid.steps == 0 {
                return Err("grid.steps: need at least one step".into());
            }
        }
        if let Some(mc) = &self.mc {
            if mc.replicas == 0 {
                return Err("mc.replicas: need at least one replica".into());
            }
        }

        let need_grid = |kind: &str| -> Result<&GridConfig, String> {
            self.grid
                .as_ref()
                .ok_or_else(|| format!("grid: required for kind={kind}"))
        };
        let need_mc = |kind: &str| -> Result<&McConfig, String> {
            self.mc
                .as_ref()
                .ok_or_else(|| format!("mc: required for kind={kind}"))
        };
        let need_beta = |kind: &str| -> Result<f64, String> {
            let b = self
                .beta
                .ok_or_else(|| format!("beta: required for kind={kind}"))?;
            order_in_range("beta", b)?;
            Ok(b)
        };
        let need_deltas = |kind: &str| -> Result<&Vec<f64>, String> {
            let d = self
                .deltas
                .as_ref()
                .ok_or_else(|| format!("deltas: required for kind={kind}"))?;
            if d.is_empty() {
                return Err("deltas: need at least one offset".into());
            }
            for &v in d {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("deltas: offsets must be positive, got {v}"));
                }
            }
            Ok(d)
        };

        match self.kind {
            ExperimentKind::Selfcheck => Ok(()),
            ExperimentKind::Gronwall => {
                need_grid("gronwall")?;
                let gw = self
                    .gronwall
                    .as_ref()
                    .ok_or("gronwall: required for kind=gronwall")?;
                if !(gw.a > 0.0 && gw.a.is_finite()) {
                    return Err(format!("gronwall.a: must be positive, got {}", gw.a));
                }
                if !(gw.eta > 0.0 && gw.eta <= 1.0) {
                    return Err(format!(
                        "gronwall.eta: must lie in (0, 1] (1 = classical limit), got {}",
                        gw.eta
                    ));
                }
                Ok(())
            }
            ExperimentKind::Solve => {
                need_grid("solve")?;
                need_mc("solve")?;
                let order = self.order.ok_or("order: required for kind=solve")?;
                order_in_range("order", order)?;
                Ok(())
            }
            ExperimentKind::Malliavin => {
                need_grid("malliavin")?;
                need_mc("malliavin")?;
                let order = self.order.ok_or("order: required for kind=malliavin")?;
                order_in_range("order", order)?;
                if let Some(g) = self.gamma {
                    if !(g >= 0.0 && g.is_finite()) {
                        return Err(format!("gamma: must be non-negative, got {g}"));
                    }
                }
                Ok(())
            }
            ExperimentKind::Strong | ExperimentKind::Variation => {
                let kind = self.kind.to_string();
                need_grid(&kind)?;
                need_mc(&kind)?;
                let beta = need_beta(&kind)?;
                let deltas = need_deltas(&kind)?;
                for &d in deltas {
                    order_in_range("beta - delta", beta - d)?;
                }
                let p = self
                    .p
                    .ok_or_else(|| format!("p: required for kind={kind}"))?;
                if p < 2.0 {
                    return Err(format!("p: moment order must be ≥ 2, got {p}"));
                }
                Ok(())
            }
            ExperimentKind::Weak => {
                need_grid("weak")?;
                need_mc("weak")?;
                let beta = need_beta("weak")?;
                let deltas = need_deltas("weak")?;
                for &d in deltas {
                    order_in_range("beta - delta", beta - d)?;
                }
                let g = self.g.as_ref().ok_or("g: required for kind=weak")?;
                if matches!(g, TestFnConfig::Identity) {
                    return Err("g: weak experiments need a bounded test function".into());
                }
                Ok(())
            }
            ExperimentKind::WeakDerivative => {
                need_grid("weak-derivative")?;
                need_mc("weak-derivative")?;
                let beta = need_beta("weak-derivative")?;
                let deltas = need_deltas("weak-derivative")?;
                if deltas.len() < 2 {
                    return Err("deltas: extrapolation needs at least two offsets".into());
                }
                for &d in deltas {
                    order_in_range("beta + delta", beta + d)?;
                    order_in_range("beta - delta", beta - d)?;
                }
                let g = self
                    .g
                    .as_ref()
                    .ok_or("g: required for kind=weak-derivative")?;
                if matches!(g, TestFnConfig::Indicator { .. }) {
                    return Err("g: the derivative limit needs a continuous test function".into());
                }
                Ok(())
            }
        }
    }

    /// Evaluation time for estimators; defaults to the grid horizon.
    pub fn time(&self) -> f64 {
        self.t
            .or(self.grid.as_ref().map(|g| g.horizon))
            .unwrap_or(1.0)
    }
}
