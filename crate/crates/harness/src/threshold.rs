//! Amplitude bisection between the decaying and the blowing-up regime.

use std::sync::Arc;

use heatlab_core::{simulate, Constants, EvolveConfig, Grid, Record, VerdictKind};
use serde::Serialize;

use crate::initial::{InitialDataSpec, InitialInfo};

/// `||grad u(T)||^2 / ||grad u0||^2` below which a bisection run counts as decayed.
pub const DEFAULT_DECAY_FLOOR: f64 = 1e-2;

#[derive(Debug, thiserror::Error)]
pub enum ThresholdError {
    #[error("invalid bisection request: {0}")]
    Invalid(String),
    #[error("endpoints do not bracket: a_min = {a_min} gave {lo:?}, a_max = {a_max} gave {hi:?}")]
    NotBracketing {
        a_min: f64,
        a_max: f64,
        lo: VerdictKind,
        hi: VerdictKind,
    },
    #[error("run at a = {amplitude} stayed {verdict:?} after a retry with T_final = {t_final}; bracket was [{a_lo}, {a_hi}]")]
    Unresolved {
        amplitude: f64,
        verdict: VerdictKind,
        t_final: f64,
        a_lo: f64,
        a_hi: f64,
    },
    #[error("bracket [{a_lo}, {a_hi}] still wider than requested after {iterations} iterations")]
    BudgetExhausted {
        a_lo: f64,
        a_hi: f64,
        iterations: usize,
    },
    #[error("simulation failed at a = {amplitude}: {source}")]
    Numerical {
        amplitude: f64,
        source: heatlab_core::Error,
    },
}

/// One evolution performed during the bisection.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRun {
    pub index: usize,
    pub amplitude: f64,
    pub verdict: VerdictKind,
    pub terminal_time: f64,
    pub t_final: f64,
    pub error_tol: f64,
    pub retried: bool,
    pub initial: InitialInfo,
    pub a_lo: f64,
    pub a_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdResult {
    pub a_lo: f64,
    pub a_hi: f64,
    pub verdict_lo: VerdictKind,
    pub verdict_hi: VerdictKind,
    /// Bisection steps after the two endpoint runs.
    pub iterations: usize,
    pub rel_width: f64,
    /// Energy and gradient of the endpoint data; the threshold itself is stated in these coordinates.
    pub lo: InitialInfo,
    pub hi: InitialInfo,
    pub runs: Vec<ThresholdRun>,
}

impl ThresholdResult {
    /// Whether `[a_lo, a_hi]` meets `other` widened by `slack` (relative) on each side.
    pub fn overlaps(&self, other: &ThresholdResult, slack: f64) -> bool {
        let lo = other.a_lo * (1.0 - slack);
        let hi = other.a_hi * (1.0 + slack);
        self.a_lo <= hi && self.a_hi >= lo
    }
}

pub struct Bisection<'a> {
    pub spec: &'a InitialDataSpec,
    pub grid: &'a Arc<Grid>,
    pub consts: &'a Constants,
    pub evolve: &'a EvolveConfig<f64>,
    pub max_iterations: usize,
}

impl Bisection<'_> {
    fn evolve_config(&self) -> EvolveConfig<f64> {
        let mut cfg = self.evolve.clone();
        cfg.decay_floor.get_or_insert(DEFAULT_DECAY_FLOOR);
        cfg
    }

    /// Runs one amplitude; an undetermined verdict is retried once with twice the
    /// horizon and half the tolerance.
    fn classify(
        &self,
        amplitude: f64,
        on_run: &mut dyn FnMut(&ThresholdRun, &Record),
        index: usize,
        bracket: (f64, f64),
    ) -> Result<ThresholdRun, ThresholdError> {
        let built = self
            .spec
            .with_amplitude(amplitude)
            .build(self.grid, self.consts)
            .map_err(ThresholdError::Invalid)?;
        let mut cfg = self.evolve_config();
        let mut retried = false;
        loop {
            let rec = simulate(&built.field, &cfg, &mut |_| {})
                .map_err(|source| ThresholdError::Numerical { amplitude, source })?;
            let run = ThresholdRun {
                index,
                amplitude,
                verdict: rec.verdict.kind,
                terminal_time: rec.verdict.terminal_time,
                t_final: cfg.t_final,
                error_tol: cfg.error_tol,
                retried,
                initial: built.info,
                a_lo: bracket.0,
                a_hi: bracket.1,
            };
            on_run(&run, &rec);
            match run.verdict {
                VerdictKind::Decayed | VerdictKind::BlewUp => return Ok(run),
                _ if !retried => {
                    retried = true;
                    cfg.t_final *= 2.0;
                    cfg.error_tol *= 0.5;
                    cfg.dt_init = cfg.dt_init.min(cfg.dt_max);
                }
                verdict => {
                    return Err(ThresholdError::Unresolved {
                        amplitude,
                        verdict,
                        t_final: cfg.t_final,
                        a_lo: bracket.0,
                        a_hi: bracket.1,
                    })
                }
            }
        }
    }

    /// Bisects `[a_min, a_max]` until `(a_hi - a_lo) / a_lo <= rel_tol`. `on_run`
    /// sees every evolution, including retries.
    pub fn run(
        &self,
        a_min: f64,
        a_max: f64,
        rel_tol: f64,
        on_run: &mut dyn FnMut(&ThresholdRun, &Record),
    ) -> Result<ThresholdResult, ThresholdError> {
        if !(a_min > 0.0 && a_min < a_max && rel_tol > 0.0) {
            return Err(ThresholdError::Invalid(format!(
                "need 0 < a_min < a_max and rel_tol > 0, got [{a_min}, {a_max}], {rel_tol}"
            )));
        }
        let mut runs = Vec::new();
        let mut sink = |r: &ThresholdRun, rec: &Record| {
            runs.push(r.clone());
            on_run(r, rec);
        };
        let lo = self.classify(a_min, &mut sink, 0, (a_min, a_max))?;
        let hi = self.classify(a_max, &mut sink, 1, (a_min, a_max))?;
        if lo.verdict != VerdictKind::Decayed || hi.verdict != VerdictKind::BlewUp {
            return Err(ThresholdError::NotBracketing {
                a_min,
                a_max,
                lo: lo.verdict,
                hi: hi.verdict,
            });
        }
        let (mut a_lo, mut a_hi) = (a_min, a_max);
        let (mut info_lo, mut info_hi) = (lo.initial, hi.initial);
        let mut iterations = 0;
        while (a_hi - a_lo) / a_lo > rel_tol {
            if iterations == self.max_iterations {
                return Err(ThresholdError::BudgetExhausted {
                    a_lo,
                    a_hi,
                    iterations,
                });
            }
            iterations += 1;
            let mid = 0.5 * (a_lo + a_hi);
            let r = self.classify(mid, &mut sink, iterations + 1, (a_lo, a_hi))?;
            if r.verdict == VerdictKind::Decayed {
                a_lo = mid;
                info_lo = r.initial;
            } else {
                a_hi = mid;
                info_hi = r.initial;
            }
        }
        Ok(ThresholdResult {
            a_lo,
            a_hi,
            verdict_lo: VerdictKind::Decayed,
            verdict_hi: VerdictKind::BlewUp,
            iterations,
            rel_width: (a_hi - a_lo) / a_lo,
            lo: info_lo,
            hi: info_hi,
            runs,
        })
    }
}
