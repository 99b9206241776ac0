//! Linear heat-flow decay exponents.
//!
//! For a pair `(a, p)` the fitted quantity is `||u(t)||_p / ||u(t/2)||_a`, where
//! `u` is the linear flow from `exp(-r^2)`: this is the operator norm ratio for
//! `e^{(t/2) Lap}` applied to the datum `u(t/2)`, so its slope in `log t` is
//! compared with `-(d/2)(1/a - 1/p)`.

use std::sync::Arc;

use heatlab_core::{
    simulate, CheckpointSchedule, EvolveConfig, Grading, Grid, RadialField, RadialGrid,
};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum HeatRateError {
    #[error("inadmissible exponent pair (a, p) = ({a}, {p}): need 1 <= a <= p <= inf")]
    Inadmissible { a: f64, p: f64 },
    #[error("invalid fitting window: {0}")]
    Window(String),
    #[error(transparent)]
    Numerical(#[from] heatlab_core::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub a: f64,
    /// `"inf"` or the decimal exponent; JSON has no infinity.
    pub p: String,
    pub expected: f64,
    pub fitted: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct HeatWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub tol: f64,
}

/// Grid wide enough that the Dirichlet wall is invisible up to `t = 200`
/// (the solution width there is about 28).
pub fn default_heat_grid(d: usize) -> Result<Arc<Grid>, heatlab_core::Error> {
    Ok(Arc::new(RadialGrid::new(
        d,
        300.0,
        2048,
        Grading::Graded { half_radius: 30.0 },
    )?))
}

pub fn expected_slope(d: usize, a: f64, p: f64) -> f64 {
    -(d as f64) / 2.0 * (1.0 / a - 1.0 / p)
}

fn check_pair(a: f64, p: f64) -> Result<(), HeatRateError> {
    if a.is_finite() && a >= 1.0 && p >= a && !p.is_nan() {
        Ok(())
    } else {
        Err(HeatRateError::Inadmissible { a, p })
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits every pair from a single linear evolution.
pub fn heat_rate_suite(
    grid: &Arc<Grid>,
    pairs: &[(f64, f64)],
    window: HeatWindow,
) -> Result<Vec<RateFit>, HeatRateError> {
    for &(a, p) in pairs {
        check_pair(a, p)?;
    }
    let HeatWindow {
        t_start,
        t_end,
        samples,
        tol,
    } = window;
    if !(t_start > 0.0 && t_start < t_end && samples >= 2) {
        return Err(HeatRateError::Window(format!(
            "[{t_start}, {t_end}] with {samples} samples"
        )));
    }
    let ratio = (t_end / t_start).powf(1.0 / (samples - 1) as f64);
    let fit_times: Vec<f64> = (0..samples)
        .map(|k| t_start * ratio.powi(k as i32))
        .collect();
    let mut all: Vec<f64> = fit_times.iter().flat_map(|&t| [0.5 * t, t]).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let cfg = EvolveConfig {
        t_final: t_end,
        error_tol: tol,
        dt_max: 1.0,
        nonlinear: false,
        store_fields: true,
        checkpoints: CheckpointSchedule::Explicit { times: all },
        ..EvolveConfig::default()
    };
    let u0 = RadialField::from_fn(grid.clone(), |r| (-r * r).exp());
    let rec = simulate(&u0, &cfg, &mut |_| {})?;
    let at = |t: f64| -> Result<&RadialField<f64>, HeatRateError> {
        Ok(&rec.checkpoints[rec.sample_index(t)?])
    };

    let d = grid.dim();
    let mut out = Vec::with_capacity(pairs.len());
    for &(a, p) in pairs {
        let mut ratios = Vec::with_capacity(samples);
        for &t in &fit_times {
            ratios.push(at(t)?.lp_norm(p) / at(0.5 * t)?.lp_norm(a));
        }
        let lx: Vec<f64> = fit_times.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        let fitted = ls_slope(&lx, &ly);
        let expected = expected_slope(d, a, p);
        let tolerance = (0.05 * expected.abs()).max(0.02);
        out.push(RateFit {
            a,
            p: if p.is_infinite() {
                "inf".into()
            } else {
                p.to_string()
            },
            expected,
            fitted,
            tolerance,
            pass: (fitted - expected).abs() <= tolerance,
            times: fit_times.clone(),
            ratios,
        });
    }
    Ok(out)
}
