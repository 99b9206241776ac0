//! Run configuration: a TOML document with a fixed schema. Unknown keys are
//! rejected at every level.

use std::path::Path;

use heatlab_core::{CheckpointSchedule, EvolveConfig, Grading, GridSpec};
use serde::{Deserialize, Serialize};

use crate::initial::InitialDataSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// One evolution, diagnostics only.
    Simulate,
    /// One evolution with the decay surrogate and trapping monitor.
    Decay,
    /// Amplitude bisection between decay and blow-up.
    Threshold,
    /// Convexity functionals and the refined criterion on a blow-up run.
    Levine,
    /// Below-threshold sweep over several amplitudes.
    DecaySuite,
    /// Linear-flow decay exponents.
    HeatCheck,
    /// Synthetic bubble decompositions and modulation tracking.
    Bubbles,
    /// Grid and tolerance refinement study.
    Convergence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Decay => "decay",
            Self::Threshold => "threshold",
            Self::Levine => "levine",
            Self::DecaySuite => "decay-suite",
            Self::HeatCheck => "heat-check",
            Self::Bubbles => "bubbles",
            Self::Convergence => "convergence",
        }
    }

    /// Horizon used when the config does not set one.
    pub fn default_t_final(self) -> f64 {
        match self {
            Self::Levine => 20.0,
            Self::Convergence => 1.0,
            _ => 50.0,
        }
    }

    /// Grid used when the config has no `[grid]` table.
    pub fn default_grid(self) -> GridSpec {
        match self {
            Self::HeatCheck => GridSpec {
                r_max: 300.0,
                n: 2048,
                grading: Grading::Graded { half_radius: 30.0 },
                ..GridSpec::default()
            },
            Self::Bubbles => GridSpec {
                r_max: 1000.0,
                n: 8192,
                ..GridSpec::default()
            },
            _ => GridSpec::default(),
        }
    }

    /// Blow-up probes resolve the first hundredth of a time unit finely.
    pub fn default_checkpoints(self) -> CheckpointSchedule<f64> {
        match self {
            Self::Levine => CheckpointSchedule::Graded {
                early_step: 1e-4,
                early_until: 1.0,
                growth: 1.02,
            },
            _ => CheckpointSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    pub a_min: f64,
    pub a_max: f64,
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Also bisect on a grid with twice the nodes and compare brackets.
    pub refine_check: bool,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            a_min: 0.5,
            a_max: 20.0,
            rel_tol: 1e-3,
            max_iterations: 60,
            refine_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevineSection {
    pub alpha: f64,
    pub epsilon: f64,
    /// Offset `A`; chosen automatically when absent.
    pub offset: Option<f64>,
    /// Samples with `||u||_inf` above this are treated as unresolved.
    pub resolved_linf: f64,
    /// Offsets for the monotonicity check of the certified time.
    pub offset_sweep: Vec<f64>,
}

impl Default for LevineSection {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            offset: None,
            resolved_linf: 1e2,
            offset_sweep: vec![1.0, 10.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSection {
    /// Amplitudes substituted into the initial-data family.
    pub amplitudes: Vec<f64>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        Self {
            amplitudes: (1..=10).map(|k| 0.23 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatSection {
    /// `(a, p)` exponent pairs; `inf` is allowed for `p`.
    pub pairs: Vec<[f64; 2]>,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub tol: f64,
}

impl Default for HeatSection {
    fn default() -> Self {
        Self {
            pairs: vec![[1.0, f64::INFINITY], [2.0, 4.0], [2.0, 2.0]],
            t_start: 20.0,
            t_end: 200.0,
            samples: 12,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BubblesSection {
    /// Scale ratios of the synthetic two-bubble fields `W + W_ratio`.
    pub ratios: Vec<f64>,
    pub j_max: usize,
    pub stop_tol: f64,
    /// Also evolve the initial data and fit a bubble at every checkpoint.
    pub track: bool,
}

impl Default for BubblesSection {
    fn default() -> Self {
        Self {
            ratios: vec![10.0, 100.0, 1000.0],
            j_max: 4,
            stop_tol: 1e-3,
            track: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    /// Number of refinement levels; each doubles N and divides error_tol by 8.
    pub levels: usize,
    /// Also rerun the finest level with R_max doubled (and N doubled to keep spacing).
    pub double_rmax: bool,
    /// Grid sizes for the static-solution residual.
    pub static_sizes: Vec<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            levels: 3,
            double_rmax: true,
            static_sizes: vec![512, 1024, 2048, 4096],
        }
    }
}

/// Top-level run configuration. The initial-data keys (`family`, `a`, ...) sit
/// at the top level; everything else lives in its own table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(flatten)]
    pub initial: InitialDataSpec,
    pub grid: GridSpec,
    pub evolve: EvolveConfig<f64>,
    pub threshold: ThresholdSection,
    pub levine: LevineSection,
    pub suite: SuiteSection,
    pub heat: HeatSection,
    pub bubbles: BubblesSection,
    pub convergence: ConvergenceSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Simulate,
            initial: InitialDataSpec::default(),
            grid: GridSpec::default(),
            evolve: EvolveConfig::default(),
            threshold: ThresholdSection::default(),
            levine: LevineSection::default(),
            suite: SuiteSection::default(),
            heat: HeatSection::default(),
            bubbles: BubblesSection::default(),
            convergence: ConvergenceSection::default(),
        }
    }
}

const TOP_LEVEL_KEYS: &[&str] = &[
    "experiment",
    "grid",
    "evolve",
    "threshold",
    "levine",
    "suite",
    "heat",
    "bubbles",
    "convergence",
];

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        // `flatten` disables serde's unknown-field check, so the top level is checked by hand
        for key in table.keys() {
            if !TOP_LEVEL_KEYS.contains(&key.as_str())
                && !InitialDataSpec::KEYS.contains(&key.as_str())
            {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        let evolve_has = |key: &str| {
            table
                .get("evolve")
                .and_then(|e| e.as_table())
                .is_some_and(|e| e.contains_key(key))
        };
        let (has_t_final, has_checkpoints) = (evolve_has("t_final"), evolve_has("checkpoints"));
        let has_grid = table.contains_key("grid");
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if !has_t_final {
            cfg.evolve.t_final = cfg.experiment.default_t_final();
        }
        if !has_checkpoints {
            cfg.evolve.checkpoints = cfg.experiment.default_checkpoints();
        }
        if !has_grid {
            cfg.grid = cfg.experiment.default_grid();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema-level checks that need no numerics.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.grid.d == 3 || self.grid.d == 4) {
            return invalid(format!("grid.d must be 3 or 4, got {}", self.grid.d));
        }
        if self.grid.n < 16 {
            return invalid(format!("grid.n must be at least 16, got {}", self.grid.n));
        }
        if !(self.grid.r_max > 0.0 && self.grid.r_max.is_finite()) {
            return invalid(format!(
                "grid.r_max must be positive, got {}",
                self.grid.r_max
            ));
        }
        if let Grading::Graded { half_radius } = self.grid.grading {
            if !(half_radius > 0.0 && half_radius < self.grid.r_max / 2.0) {
                return invalid(format!(
                    "grid.grading.half_radius must lie in (0, r_max/2), got {half_radius}"
                ));
            }
        }
        self.evolve
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("evolve: {e}")))?;
        self.initial.validate().map_err(ConfigError::Invalid)?;
        let t = &self.threshold;
        if !(t.a_min > 0.0 && t.a_min < t.a_max && t.rel_tol > 0.0 && t.max_iterations > 0) {
            return invalid(
                "threshold needs 0 < a_min < a_max, rel_tol > 0, max_iterations > 0".into(),
            );
        }
        let l = &self.levine;
        if !(l.alpha > 0.0 && l.epsilon > 0.0 && l.resolved_linf > 0.0)
            || l.offset.is_some_and(|a| !(a > 0.0))
        {
            return invalid("levine parameters must be positive".into());
        }
        if self.suite.amplitudes.iter().any(|a| !a.is_finite()) {
            return invalid("suite amplitudes must be finite".into());
        }
        let h = &self.heat;
        if !(h.t_start > 0.0 && h.t_start < h.t_end && h.samples >= 2 && h.tol > 0.0) {
            return invalid("heat needs 0 < t_start < t_end, samples >= 2, tol > 0".into());
        }
        let b = &self.bubbles;
        if b.j_max == 0 || !(b.stop_tol >= 0.0) || b.ratios.iter().any(|r| !(*r >= 1.0)) {
            return invalid("bubbles needs j_max >= 1, stop_tol >= 0, ratios >= 1".into());
        }
        if self.convergence.levels < 2 {
            return invalid("convergence.levels must be at least 2".into());
        }
        Ok(())
    }
}
