//! Experiment configuration files.
//!
//! Configurations are TOML. Nested keys may be written as tables (`[init]`)
//! or dotted (`init.alpha = 0.1`). Unknown keys are rejected. `depth`,
//! `init.alpha` and `init.m` accept a single value or a list; `init.m` also
//! accepts the string `"inf"`.

use std::path::PathBuf;

use deepfact_core::Sharpness;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub scheme: Option<String>,
    pub alpha: Option<OneOrMany<f64>>,
    pub m: Option<OneOrMany<MValue>>,
    /// One value, or one value per entry of `depth`.
    pub std: Option<OneOrMany<f64>>,
    /// Treat every `alpha` value as the product scale `alpha^L`.
    pub alpha_is_product_scale: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObsSection {
    pub mode: Option<String>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub block_size: Option<usize>,
    /// Number of entries observed before the post-training phase.
    pub pre_count: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub kind: Option<String>,
    pub rank: Option<usize>,
    pub seed: Option<u64>,
    /// Common value of a `block_constant` ground truth.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub method: Option<String>,
    pub step: Option<f64>,
    pub t_max: Option<f64>,
    pub stop_loss: Option<f64>,
    pub record_every: Option<usize>,
}

/// The file as written, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Option<String>,
    pub dim: usize,
    pub depth: OneOrMany<usize>,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub obs: ObsSection,
    #[serde(default)]
    pub truth: TruthSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    pub trials: Option<usize>,
    pub out: Option<String>,
}

pub fn parse_config(text: &str) -> CliResult<RawConfig> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Simulate,
    Theory,
    Coupling,
    Plasticity,
    Sweep,
    Metrics,
}

impl Kind {
    pub fn parse(s: &str) -> CliResult<Self> {
        Ok(match s {
            "simulate" => Kind::Simulate,
            "theory" => Kind::Theory,
            "coupling" => Kind::Coupling,
            "plasticity" => Kind::Plasticity,
            "sweep" => Kind::Sweep,
            "metrics" => Kind::Metrics,
            other => return Err(CliError::Validation(format!("unknown experiment kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    AlphaM,
    Identity,
    AllOnes,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsMode {
    UniformWithoutReplacement,
    Diagonal,
    Block,
    UpperTriangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    RankR { rank: usize },
    BlockConstant { target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Rk4,
    Euler,
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitSpec {
    pub scheme: SchemeKind,
    pub alphas: Vec<f64>,
    #[serde(serialize_with = "serialize_ms")]
    pub ms: Vec<Sharpness>,
    /// Gaussian standard deviation per depth, as `(depth, std)` pairs.
    pub std: Vec<(usize, f64)>,
    pub alpha_is_product_scale: bool,
}

fn serialize_ms<S: serde::Serializer>(ms: &[Sharpness], s: S) -> Result<S::Ok, S::Error> {
    let text: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
    text.serialize(s)
}

impl InitSpec {
    /// The per-factor `alpha` for a given depth.
    pub fn std_for(&self, depth: usize) -> Option<f64> {
        self.std.iter().find(|(l, _)| *l == depth).map(|&(_, s)| s)
    }

    pub fn factor_alpha(&self, alpha: f64, depth: usize) -> f64 {
        if self.alpha_is_product_scale {
            alpha.powf(1.0 / depth as f64)
        } else {
            alpha
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObsSpec {
    pub mode: ObsMode,
    pub count: Option<usize>,
    pub seed: u64,
    pub block_size: Option<usize>,
    pub pre_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthSpec {
    pub kind: TruthKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorSpec {
    pub method: MethodKind,
    pub step: Option<f64>,
    pub t_max: f64,
    pub stop_loss: f64,
    pub record_every: usize,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub kind: Kind,
    pub dim: usize,
    pub depths: Vec<usize>,
    pub init: InitSpec,
    pub obs: ObsSpec,
    pub truth: TruthSpec,
    pub integrator: IntegratorSpec,
    pub trials: usize,
    pub out: Option<PathBuf>,
    /// Seed for Gaussian initializations.
    pub seed: u64,
}

fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

fn parse_m(v: &MValue) -> CliResult<Sharpness> {
    let m = match v {
        MValue::Number(x) if x.is_infinite() && *x > 0.0 => Sharpness::Infinite,
        MValue::Number(x) => Sharpness::Finite(*x),
        MValue::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Sharpness::Infinite,
        MValue::Text(t) => return invalid(format!("init.m must be a number or \"inf\", got `{t}`")),
    };
    m.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(m)
}

impl RawConfig {
    /// Checks every field and fills defaults. `kind` is the subcommand; a
    /// `kind` key in the file must agree with it.
    pub fn validate(&self, kind: Kind, seed_override: Option<u64>) -> CliResult<Experiment> {
        if let Some(k) = &self.kind {
            let file_kind = Kind::parse(k)?;
            if file_kind != kind {
                return invalid(format!("configuration is for `{k}` but a different subcommand was run"));
            }
        }
        if self.dim == 0 {
            return invalid("dim must be positive");
        }
        let depths = self.depth.to_vec();
        if depths.is_empty() || depths.contains(&0) {
            return invalid("depth values must be positive");
        }

        let scheme = match self.init.scheme.as_deref().unwrap_or("alpha_m") {
            "alpha_m" => SchemeKind::AlphaM,
            "identity" => SchemeKind::Identity,
            "all_ones" => SchemeKind::AllOnes,
            "gaussian" => SchemeKind::Gaussian,
            other => return invalid(format!("unknown init.scheme `{other}`")),
        };
        let alphas = self.init.alpha.as_ref().map(|a| a.to_vec()).unwrap_or_else(|| vec![1e-2]);
        if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return invalid("init.alpha values must be positive and finite");
        }
        let ms = match &self.init.m {
            Some(m) => m.to_vec().iter().map(parse_m).collect::<CliResult<Vec<_>>>()?,
            None => vec![Sharpness::Infinite],
        };
        if ms.is_empty() {
            return invalid("init.m must not be empty");
        }
        let stds = self.init.std.as_ref().map(|s| s.to_vec()).unwrap_or_default();
        if let Some(s) = stds.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return invalid(format!("init.std must be positive, got {s}"));
        }
        let std = match stds.len() {
            0 => Vec::new(),
            1 => depths.iter().map(|&l| (l, stds[0])).collect(),
            n if n == depths.len() => depths.iter().copied().zip(stds.iter().copied()).collect(),
            n => return invalid(format!("init.std has {n} values for {} depths", depths.len())),
        };
        if scheme == SchemeKind::Gaussian && std.is_empty() {
            return invalid("init.std is required for the gaussian scheme");
        }

        let mode = match self.obs.mode.as_deref().unwrap_or("block") {
            "uniform_without_replacement" | "uniform" => ObsMode::UniformWithoutReplacement,
            "diagonal" => ObsMode::Diagonal,
            "block" => ObsMode::Block,
            "upper_triangular" => ObsMode::UpperTriangular,
            other => return invalid(format!("unknown obs.mode `{other}`")),
        };
        let d2 = self.dim * self.dim;
        if let Some(c) = self.obs.count {
            if c == 0 || c > d2 {
                return invalid(format!("obs.count must be in 1..={d2}, got {c}"));
            }
        }
        if mode == ObsMode::UniformWithoutReplacement && self.obs.count.is_none() {
            return invalid("obs.count is required for uniform sampling");
        }
        let block_size = match (mode, self.obs.block_size) {
            (ObsMode::Block, None) => Some(1),
            (_, b) => b,
        };
        if let Some(b) = block_size {
            if b == 0 || !self.dim.is_multiple_of(b) {
                return invalid(format!("obs.block_size {b} must divide dim {}", self.dim));
            }
        }
        if let Some(p) = self.obs.pre_count {
            if p == 0 || Some(p) > self.obs.count {
                return invalid("obs.pre_count must be positive and at most obs.count");
            }
        }
        if kind == Kind::Plasticity && (mode != ObsMode::UniformWithoutReplacement || self.obs.pre_count.is_none()) {
            return invalid("plasticity needs uniform sampling with obs.count and obs.pre_count");
        }
        if matches!(kind, Kind::Theory | Kind::Sweep) && mode != ObsMode::Block {
            return invalid("theory and sweep experiments use block observations");
        }

        let truth_kind = match self.truth.kind.as_deref().unwrap_or("block_constant") {
            "rank_r" => {
                let rank = self.truth.rank.unwrap_or(1);
                if rank == 0 || rank > self.dim {
                    return invalid(format!("truth.rank must be in 1..={}", self.dim));
                }
                TruthKind::RankR { rank }
            }
            "block_constant" => {
                let target = self.truth.target.unwrap_or(1.0);
                if !(target > 0.0 && target.is_finite()) {
                    return invalid("truth.target must be positive");
                }
                TruthKind::BlockConstant { target }
            }
            other => return invalid(format!("unknown truth.kind `{other}`")),
        };
        if matches!(kind, Kind::Theory | Kind::Sweep) && !matches!(truth_kind, TruthKind::BlockConstant { .. }) {
            return invalid("theory and sweep experiments need a block_constant ground truth");
        }

        let method = match self.integrator.method.as_deref().unwrap_or("rk4") {
            "rk4" => MethodKind::Rk4,
            "euler" => MethodKind::Euler,
            "gd" => MethodKind::Gd,
            other => return invalid(format!("unknown integrator.method `{other}`")),
        };
        if let Some(h) = self.integrator.step {
            if !(h > 0.0 && h.is_finite()) {
                return invalid("integrator.step must be positive");
            }
        }
        if method == MethodKind::Gd && self.integrator.step.is_none() {
            return invalid("gradient descent needs integrator.step");
        }
        let t_max = self.integrator.t_max.unwrap_or(1e4);
        if !(t_max > 0.0 && t_max.is_finite()) {
            return invalid("integrator.t_max must be positive and finite");
        }
        let stop_loss = self.integrator.stop_loss.unwrap_or(1e-12);
        if !(stop_loss >= 0.0) {
            return invalid("integrator.stop_loss must be non-negative");
        }

        let trials = self.trials.unwrap_or(1);
        if trials == 0 {
            return invalid("trials must be positive");
        }
        if kind == Kind::Simulate && depths.len() * alphas.len() * ms.len() != 1 {
            return invalid("simulate takes a single depth, alpha and m; use sweep for grids");
        }

        let obs_seed = seed_override.unwrap_or(self.obs.seed.unwrap_or(0));
        let truth_seed = seed_override.map(|s| s.wrapping_add(1)).unwrap_or(self.truth.seed.unwrap_or(0));
        Ok(Experiment {
            kind,
            dim: self.dim,
            depths,
            init: InitSpec {
                scheme,
                alphas,
                ms,
                std,
                alpha_is_product_scale: self.init.alpha_is_product_scale.unwrap_or(false),
            },
            obs: ObsSpec { mode, count: self.obs.count, seed: obs_seed, block_size, pre_count: self.obs.pre_count },
            truth: TruthSpec { kind: truth_kind, seed: truth_seed },
            integrator: IntegratorSpec {
                method,
                step: self.integrator.step,
                t_max,
                stop_loss,
                record_every: self.integrator.record_every.unwrap_or(100),
            },
            trials,
            out: self.out.as_ref().map(PathBuf::from),
            seed: seed_override.unwrap_or(self.obs.seed.unwrap_or(0)).wrapping_add(2),
        })
    }
}
