//! Initial-data families and their threshold classification.

use std::sync::Arc;

use heatlab_core::variational::energy;
use heatlab_core::{Constants, Field, Grid, GroundState, RadialField};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `a exp(-r^2 / sigma^2)`
    #[default]
    Gaussian,
    /// `eps W_lambda`
    BubbleScaled,
    /// `s W(r) chi(r / r_c)` with a smooth cutoff `chi`.
    TruncatedBubble,
}

/// Requested initial datum. Missing parameters take the family defaults
/// (`sigma = 1`, `lambda = 1`, `r_c = 20`); the amplitude has no default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialDataSpec {
    pub family: Family,
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub s: Option<f64>,
    pub r_c: Option<f64>,
    /// Truncated bubble only: choose `s` so that `||grad u0|| = grad_ratio ||grad W||`.
    pub grad_ratio: Option<f64>,
}

/// A datum on a grid together with the quantities that classify it.
#[derive(Debug, Clone)]
pub struct BuiltInitial {
    pub field: Field,
    pub info: InitialInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialInfo {
    pub amplitude: f64,
    pub energy: f64,
    pub grad_sq: f64,
    /// `E(u0) <= E(W)` and `||grad u0|| < ||grad W||`: global decay expected.
    pub below_threshold: bool,
    /// `E(u0) < E(W)` and `||grad u0|| >= ||grad W||`: blow-up expected.
    pub above_threshold: bool,
}

pub const DEFAULT_CUTOFF_RADIUS: f64 = 20.0;

/// Smooth step equal to 1 on `[0, 1]` and 0 on `[2, inf)`.
pub fn cutoff(x: f64) -> f64 {
    let bump = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let y = (2.0 - x).clamp(0.0, 1.0);
    bump(y) / (bump(y) + bump(1.0 - y))
}

impl InitialDataSpec {
    pub const KEYS: &'static [&'static str] = &[
        "family",
        "a",
        "sigma",
        "eps",
        "lambda",
        "s",
        "r_c",
        "grad_ratio",
    ];

    pub fn gaussian(a: f64) -> Self {
        Self {
            family: Family::Gaussian,
            a: Some(a),
            ..Self::default()
        }
    }

    pub fn truncated_bubble(grad_ratio: f64) -> Self {
        Self {
            family: Family::TruncatedBubble,
            grad_ratio: Some(grad_ratio),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("a", self.a),
            ("sigma", self.sigma),
            ("eps", self.eps),
            ("lambda", self.lambda),
            ("s", self.s),
            ("r_c", self.r_c),
            ("grad_ratio", self.grad_ratio),
        ];
        for (name, v) in named {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(format!("{name} must be finite"));
            }
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("lambda", self.lambda),
            ("r_c", self.r_c),
            ("grad_ratio", self.grad_ratio),
        ] {
            if v.is_some_and(|x| x <= 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.s.is_some() && self.grad_ratio.is_some() {
            return Err("give either s or grad_ratio, not both".into());
        }
        Ok(())
    }

    /// The family's amplitude parameter, if set.
    pub fn amplitude(&self) -> Option<f64> {
        match self.family {
            Family::Gaussian => self.a,
            Family::BubbleScaled => self.eps,
            Family::TruncatedBubble => self.s,
        }
    }

    /// Same datum with the amplitude parameter replaced.
    pub fn with_amplitude(&self, amp: f64) -> Self {
        let mut out = self.clone();
        match self.family {
            Family::Gaussian => out.a = Some(amp),
            Family::BubbleScaled => out.eps = Some(amp),
            Family::TruncatedBubble => {
                out.s = Some(amp);
                out.grad_ratio = None;
            }
        }
        out
    }

    /// Pointwise profile before the Dirichlet projection.
    pub fn profile(&self, grid: &Arc<Grid>) -> Result<Vec<f64>, String> {
        self.validate()?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| format!("{:?} data needs `{name}`", self.family))
        };
        let d = grid.dim();
        Ok(match self.family {
            Family::Gaussian => {
                let a = need(self.a, "a")?;
                let s2 = self.sigma.unwrap_or(1.0).powi(2);
                grid.sample(|r| a * (-r * r / s2).exp())
            }
            Family::BubbleScaled => {
                let eps = need(self.eps, "eps")?;
                let w = GroundState::<f64>::new(d, self.lambda.unwrap_or(1.0))
                    .map_err(|e| e.to_string())?;
                grid.sample(|r| eps * w.eval(r))
            }
            Family::TruncatedBubble => {
                let w = GroundState::<f64>::unit(d).map_err(|e| e.to_string())?;
                let rc = self.r_c.unwrap_or(DEFAULT_CUTOFF_RADIUS);
                let base = grid.sample(|r| w.eval(r) * cutoff(r / rc));
                let s = match (self.s, self.grad_ratio) {
                    (Some(s), _) => s,
                    (None, Some(ratio)) => {
                        let w_grad = GroundState::<f64>::unit(d)
                            .map_err(|e| e.to_string())?
                            .sample(grid.clone())
                            .h1dot_norm_sq();
                        ratio * (w_grad / grid.h1dot_norm_sq(&base)).sqrt()
                    }
                    (None, None) => {
                        return Err("truncated_bubble data needs `s` or `grad_ratio`".into())
                    }
                };
                base.into_iter().map(|v| s * v).collect()
            }
        })
    }

    /// Builds the datum on `grid`, zeroes it at `R_max` (the evolved space carries
    /// the Dirichlet condition), and classifies it against the threshold.
    pub fn build(&self, grid: &Arc<Grid>, consts: &Constants) -> Result<BuiltInitial, String> {
        let mut values = self.profile(grid)?;
        if let Some(last) = values.last_mut() {
            *last = 0.0;
        }
        let field = RadialField::new(grid.clone(), values, 0.0).map_err(|e| e.to_string())?;
        let e = energy(&field).total;
        let grad_sq = field.h1dot_norm_sq();
        let amplitude = match self.family {
            Family::TruncatedBubble if self.s.is_none() => {
                let w = GroundState::<f64>::unit(grid.dim()).map_err(|e| e.to_string())?;
                field.values()[0] / w.eval(0.0)
            }
            _ => self.amplitude().unwrap_or(f64::NAN),
        };
        Ok(BuiltInitial {
            field,
            info: InitialInfo {
                amplitude,
                energy: e,
                grad_sq,
                below_threshold: e <= consts.energy_w && grad_sq < consts.grad_w_sq,
                above_threshold: e < consts.energy_w && grad_sq >= consts.grad_w_sq,
            },
        })
    }
}
