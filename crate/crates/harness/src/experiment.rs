//! Experiment drivers. Each writes `manifest.json` (config, grid, grid hash,
//! constants, verdicts) plus its own CSVs and reports into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use heatlab_core::blowup::{
    build_levine_series_with, choose_offset, convexity_check, predicted_blowup_time,
    refined_criterion_check, ConvexityReport, LevineParams, LevineSeries, RefinedReport,
};
use heatlab_core::diagnostics::{
    decay_verdict, energy_dissipation_residual, gradient_trapping_monitor, l2_dissipation_residual,
    s_norm_converged, TrappingReport,
};
use heatlab_core::profiles::{extract_bubbles, track_modulation};
use heatlab_core::variational::static_residual;
use heatlab_core::{
    simulate, Constants, EvolveConfig, Grid, GridSpec, GroundState, RadialField, Record,
    VerdictKind,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, ExperimentKind, RunConfig};
use crate::heat_rate::{heat_rate_suite, HeatWindow, RateFit};
use crate::initial::{BuiltInitial, InitialInfo};
use crate::io;
use crate::threshold::{Bisection, ThresholdError, ThresholdResult, DEFAULT_DECAY_FLOOR};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Schema(#[from] ConfigError),
    #[error("{0:#}")]
    Aborted(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Schema(_) => 2,
            Self::Aborted(_) => 3,
        }
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        Self::Aborted(e)
    }
}

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<ExperimentKind>,
    pub grid_n: Option<usize>,
    pub r_max: Option<f64>,
    pub t_final: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), ConfigError> {
        if let Some(k) = self.experiment {
            let compatible = k == cfg.experiment
                || (k == ExperimentKind::Simulate && cfg.experiment == ExperimentKind::Decay);
            if !compatible {
                return Err(ConfigError::Invalid(format!(
                    "subcommand `{}` does not match config experiment `{}`",
                    k.name(),
                    cfg.experiment.name()
                )));
            }
        }
        if let Some(n) = self.grid_n {
            cfg.grid.n = n;
        }
        if let Some(r) = self.r_max {
            cfg.grid.r_max = r;
        }
        if let Some(t) = self.t_final {
            cfg.evolve.t_final = t;
        }
        cfg.validate()
    }
}

/// Loads, overrides, validates and runs a config file.
pub fn run_experiment(
    config: &Path,
    out: &Path,
    overrides: &Overrides,
    workers: usize,
) -> Result<(), RunError> {
    let mut cfg = RunConfig::from_path(config)?;
    overrides.apply(&mut cfg)?;
    run_config(&cfg, out, workers)
}

pub fn run_config(cfg: &RunConfig, out: &Path, workers: usize) -> Result<(), RunError> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    let grid = build_grid(&cfg.grid)?;
    let consts = constants(&grid)?;
    let ctx = Ctx {
        cfg,
        out,
        grid: &grid,
        consts: &consts,
    };
    pool.install(|| match cfg.experiment {
        ExperimentKind::Simulate => ctx.simulate(false),
        ExperimentKind::Decay => ctx.simulate(true),
        ExperimentKind::Threshold => ctx.threshold(),
        ExperimentKind::Levine => ctx.levine(),
        ExperimentKind::DecaySuite => ctx.decay_suite(),
        ExperimentKind::HeatCheck => ctx.heat_check(),
        ExperimentKind::Bubbles => ctx.bubbles(),
        ExperimentKind::Convergence => ctx.convergence(),
    })
}

fn build_grid(spec: &GridSpec) -> anyhow::Result<Arc<Grid>> {
    Ok(Arc::new(spec.build()?))
}

fn constants(grid: &Arc<Grid>) -> anyhow::Result<Constants> {
    Constants::on_grid(grid).context("ground-state constants on the run grid")
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    grid: &'a Arc<Grid>,
    consts: &'a Constants,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    verdict: VerdictKind,
    terminal_time: f64,
    reason: String,
    steps: usize,
    rejected_steps: usize,
    initial: InitialInfo,
    energy_residual_rel: f64,
    l2_residual_rel: f64,
}

impl RunSummary {
    fn new(rec: &Record, initial: InitialInfo) -> anyhow::Result<Self> {
        let s0 = rec.initial();
        let last = rec.last();
        let (e_res, l2_res) = if last.t > s0.t {
            (
                energy_dissipation_residual(rec, s0.t, last.t)?.abs()
                    / s0.energy.abs().max(f64::MIN_POSITIVE),
                l2_dissipation_residual(rec, last.t)?.abs() / s0.l2_sq.max(f64::MIN_POSITIVE),
            )
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            verdict: rec.verdict.kind,
            terminal_time: rec.verdict.terminal_time,
            reason: rec.verdict.reason.clone(),
            steps: rec.steps.len(),
            rejected_steps: rec.rejected_steps,
            initial,
            energy_residual_rel: e_res,
            l2_residual_rel: l2_res,
        })
    }
}

/// One row of a decay report.
#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub amplitude: f64,
    pub energy0: f64,
    pub grad_sq0: f64,
    pub below_threshold: bool,
    pub verdict: VerdictKind,
    pub decayed: bool,
    pub final_grad_ratio: f64,
    pub s_converged: bool,
    pub max_trapping_ratio: f64,
    pub trapping_violated: bool,
}

fn decay_row(rec: &Record, info: &InitialInfo, trap: &TrappingReport<f64>, floor: f64) -> DecayRow {
    let decayed = decay_verdict(rec, floor).unwrap_or(false);
    DecayRow {
        amplitude: info.amplitude,
        energy0: info.energy,
        grad_sq0: info.grad_sq,
        below_threshold: info.below_threshold,
        verdict: rec.verdict.kind,
        decayed,
        final_grad_ratio: rec.last().grad_sq() / rec.initial().grad_sq().max(f64::MIN_POSITIVE),
        s_converged: s_norm_converged(rec),
        max_trapping_ratio: trap.max_ratio,
        trapping_violated: trap.violated,
    }
}

impl Ctx<'_> {
    fn built(&self) -> Result<BuiltInitial, RunError> {
        self.cfg
            .initial
            .build(self.grid, self.consts)
            .map_err(|e| RunError::Schema(ConfigError::Invalid(format!("initial data: {e}"))))
    }

    fn manifest<V: Serialize>(&self, verdicts: V) -> anyhow::Result<()> {
        io::write_manifest(
            self.out,
            self.cfg.experiment.name(),
            self.cfg,
            self.grid,
            self.consts,
            verdicts,
        )
    }

    fn decay_config(&self) -> EvolveConfig<f64> {
        let mut ev = self.cfg.evolve.clone();
        ev.decay_floor.get_or_insert(DEFAULT_DECAY_FLOOR);
        ev
    }

    fn simulate(&self, decay: bool) -> Result<(), RunError> {
        let built = self.built()?;
        let ev = if decay {
            self.decay_config()
        } else {
            self.cfg.evolve.clone()
        };
        let rec = simulate(&built.field, &ev, &mut |_| {}).context("evolution")?;
        io::write_samples_csv(&self.out.join("run.csv"), &rec.samples)?;
        io::write_field(self.out, "final", &rec.final_field)?;
        for (k, cp) in rec.checkpoints.iter().enumerate() {
            io::write_field(self.out, &format!("checkpoint_{k:04}"), cp)?;
        }
        let summary = RunSummary::new(&rec, built.info)?;
        if decay {
            let trap = gradient_trapping_monitor(&rec, self.consts);
            let row = decay_row(
                &rec,
                &built.info,
                &trap,
                ev.decay_floor.unwrap_or(DEFAULT_DECAY_FLOOR),
            );
            io::write_rows_csv(&self.out.join("decay.csv"), std::slice::from_ref(&row))?;
            #[derive(Serialize)]
            struct V<'a> {
                run: &'a RunSummary,
                decay: &'a DecayRow,
                trapping: &'a TrappingReport<f64>,
            }
            self.manifest(V {
                run: &summary,
                decay: &row,
                trapping: &trap,
            })?;
        } else {
            self.manifest(&summary)?;
        }
        Ok(())
    }

    fn bisect(
        &self,
        grid: &Arc<Grid>,
        consts: &Constants,
        dir: &Path,
    ) -> Result<ThresholdResult, RunError> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let t = &self.cfg.threshold;
        let bis = Bisection {
            spec: &self.cfg.initial,
            grid,
            consts,
            evolve: &self.cfg.evolve,
            max_iterations: t.max_iterations,
        };
        let mut io_err = None;
        let mut count = 0usize;
        let result = bis.run(t.a_min, t.a_max, t.rel_tol, &mut |_, rec| {
            let path = dir.join(format!("run_{count:03}.csv"));
            count += 1;
            if let Err(e) = io::write_samples_csv(&path, &rec.samples) {
                io_err.get_or_insert(e);
            }
        });
        if let Some(e) = io_err {
            return Err(e.into());
        }
        result.map_err(|e| match e {
            ThresholdError::Invalid(m) => RunError::Schema(ConfigError::Invalid(m)),
            other => RunError::Aborted(other.into()),
        })
    }

    fn threshold(&self) -> Result<(), RunError> {
        #[derive(Serialize)]
        struct Report {
            bracket: ThresholdResult,
            refined: Option<ThresholdResult>,
            refined_overlaps: Option<bool>,
        }
        let report = if self.cfg.threshold.refine_check {
            let fine_spec = GridSpec {
                n: 2 * self.cfg.grid.n,
                ..self.cfg.grid
            };
            let fine = build_grid(&fine_spec)?;
            let fine_consts = constants(&fine)?;
            let (a, b) = rayon::join(
                || self.bisect(self.grid, self.consts, &self.out.join("runs")),
                || self.bisect(&fine, &fine_consts, &self.out.join("runs_2n")),
            );
            let (a, b) = (a?, b?);
            let overlaps = b.overlaps(&a, 0.05);
            Report {
                bracket: a,
                refined: Some(b),
                refined_overlaps: Some(overlaps),
            }
        } else {
            let a = self.bisect(self.grid, self.consts, &self.out.join("runs"))?;
            Report {
                bracket: a,
                refined: None,
                refined_overlaps: None,
            }
        };
        io::write_rows_csv(
            &self.out.join("bisection.csv"),
            &history_rows(&report.bracket),
        )?;
        io::write_json(&self.out.join("threshold.json"), &report)?;
        self.manifest(&report)?;
        Ok(())
    }

    fn levine(&self) -> Result<(), RunError> {
        let built = self.built()?;
        let rec = simulate(&built.field, &self.cfg.evolve, &mut |_| {}).context("evolution")?;
        io::write_samples_csv(&self.out.join("run.csv"), &rec.samples)?;
        let report = levine_report(&rec, self.consts, &self.cfg.levine)?;
        if let Some(series) = &report.1 {
            io::write_rows_csv(&self.out.join("levine.csv"), &series_rows(series))?;
        }
        io::write_json(&self.out.join("levine.json"), &report.0)?;
        self.manifest(&report.0)?;
        Ok(())
    }

    fn decay_suite(&self) -> Result<(), RunError> {
        let ev = self.decay_config();
        let floor = ev.decay_floor.unwrap_or(DEFAULT_DECAY_FLOOR);
        let amps = &self.cfg.suite.amplitudes;
        let rows: Vec<anyhow::Result<DecayRow>> = amps
            .par_iter()
            .enumerate()
            .map(|(k, &a)| {
                let dir = self.out.join(format!("runs/{k:03}"));
                fs::create_dir_all(&dir)?;
                let built = self
                    .cfg
                    .initial
                    .with_amplitude(a)
                    .build(self.grid, self.consts)
                    .map_err(|e| anyhow!("amplitude {a}: {e}"))?;
                let rec = simulate(&built.field, &ev, &mut |_| {})
                    .with_context(|| format!("amplitude {a}"))?;
                io::write_samples_csv(&dir.join("run.csv"), &rec.samples)?;
                let trap = gradient_trapping_monitor(&rec, self.consts);
                Ok(decay_row(&rec, &built.info, &trap, floor))
            })
            .collect();
        let mut rows = rows.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
        rows.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));
        io::write_rows_csv(&self.out.join("summary.csv"), &rows)?;
        #[derive(Serialize)]
        struct V {
            runs: usize,
            all_below_threshold: bool,
            all_trapped: bool,
            none_blew_up: bool,
            all_decayed: bool,
        }
        let v = V {
            runs: rows.len(),
            all_below_threshold: rows.iter().all(|r| r.below_threshold),
            all_trapped: rows
                .iter()
                .all(|r| !r.trapping_violated && r.max_trapping_ratio < 1.0),
            none_blew_up: rows.iter().all(|r| r.verdict != VerdictKind::BlewUp),
            all_decayed: rows.iter().all(|r| r.decayed),
        };
        self.manifest(&v)?;
        Ok(())
    }

    fn heat_check(&self) -> Result<(), RunError> {
        let h = &self.cfg.heat;
        let pairs: Vec<(f64, f64)> = h.pairs.iter().map(|p| (p[0], p[1])).collect();
        let window = HeatWindow {
            t_start: h.t_start,
            t_end: h.t_end,
            samples: h.samples,
            tol: h.tol,
        };
        let fits = heat_rate_suite(self.grid, &pairs, window).map_err(|e| match e {
            crate::heat_rate::HeatRateError::Inadmissible { .. }
            | crate::heat_rate::HeatRateError::Window(_) => {
                RunError::Schema(ConfigError::Invalid(e.to_string()))
            }
            other => RunError::Aborted(other.into()),
        })?;
        #[derive(Serialize)]
        struct Row<'a> {
            a: f64,
            p: &'a str,
            expected: f64,
            fitted: f64,
            tolerance: f64,
            pass: bool,
        }
        let rows: Vec<Row> = fits
            .iter()
            .map(|f: &RateFit| Row {
                a: f.a,
                p: &f.p,
                expected: f.expected,
                fitted: f.fitted,
                tolerance: f.tolerance,
                pass: f.pass,
            })
            .collect();
        io::write_rows_csv(&self.out.join("heat_rates.csv"), &rows)?;
        io::write_json(&self.out.join("heat_rates.json"), &fits)?;
        self.manifest(&rows)?;
        Ok(())
    }

    fn bubbles(&self) -> Result<(), RunError> {
        let b = &self.cfg.bubbles;
        let rows = two_bubble_study(self.grid, &b.ratios, b.j_max, b.stop_tol)?;
        io::write_rows_csv(&self.out.join("decoupling.csv"), &rows)?;
        let monotone = rows
            .windows(2)
            .all(|w| w[1].h1_residual_rel.abs() < w[0].h1_residual_rel.abs());
        let mut concentrating = None;
        if b.track {
            let built = self.built()?;
            let ev = EvolveConfig {
                store_fields: true,
                ..self.cfg.evolve.clone()
            };
            let rec = simulate(&built.field, &ev, &mut |_| {}).context("evolution")?;
            let m = track_modulation(&rec).context("modulation tracking")?;
            #[derive(Serialize)]
            struct Row {
                t: f64,
                scale: f64,
                amplitude: f64,
                fit_residual: f64,
            }
            let mrows: Vec<Row> = m
                .times
                .iter()
                .zip(&m.fits)
                .map(|(&t, f)| Row {
                    t,
                    scale: f.scale,
                    amplitude: f.amplitude,
                    fit_residual: f.fit_residual,
                })
                .collect();
            io::write_rows_csv(&self.out.join("modulation.csv"), &mrows)?;
            concentrating = m.concentrating;
        }
        #[derive(Serialize)]
        struct V<'a> {
            ratios: &'a [DecouplingRow],
            residual_decreasing: bool,
            concentrating: Option<bool>,
        }
        self.manifest(V {
            ratios: &rows,
            residual_decreasing: monotone,
            concentrating,
        })?;
        Ok(())
    }

    fn convergence(&self) -> Result<(), RunError> {
        let c = &self.cfg.convergence;
        let built_on = |spec: &GridSpec| -> anyhow::Result<(Arc<Grid>, BuiltInitial)> {
            let g = build_grid(spec)?;
            let consts = Constants::on_grid_unchecked(&g)?;
            let b = self
                .cfg
                .initial
                .build(&g, &consts)
                .map_err(|e| anyhow!("initial data: {e}"))?;
            Ok((g, b))
        };
        let mut jobs: Vec<(GridSpec, f64)> = (0..c.levels)
            .map(|k| {
                let spec = GridSpec {
                    n: self.cfg.grid.n << k,
                    ..self.cfg.grid
                };
                (spec, self.cfg.evolve.error_tol / 8f64.powi(k as i32))
            })
            .collect();
        if c.double_rmax {
            let (last, tol) = *jobs.last().expect("levels >= 2");
            jobs.push((
                GridSpec {
                    r_max: 2.0 * last.r_max,
                    n: 2 * last.n,
                    ..last
                },
                tol,
            ));
        }
        let levels: Vec<anyhow::Result<ConvergenceRow>> = jobs
            .par_iter()
            .map(|&(spec, tol)| {
                let (_, b) = built_on(&spec)?;
                let ev = EvolveConfig {
                    error_tol: tol,
                    ..self.cfg.evolve.clone()
                };
                let rec = simulate(&b.field, &ev, &mut |_| {})?;
                let s0 = rec.initial();
                let last = rec.last();
                anyhow::ensure!(last.t > 0.0, "run stopped at t = 0");
                Ok(ConvergenceRow {
                    n: spec.n,
                    r_max: spec.r_max,
                    error_tol: tol,
                    verdict: rec.verdict.kind,
                    t_end: last.t,
                    energy_end: last.energy,
                    energy_residual_rel: energy_dissipation_residual(&rec, 0.0, last.t)?.abs()
                        / s0.energy.abs(),
                    l2_residual_rel: l2_dissipation_residual(&rec, last.t)?.abs() / s0.l2_sq,
                })
            })
            .collect();
        let levels = levels.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
        io::write_rows_csv(&self.out.join("convergence.csv"), &levels)?;

        let statics: Vec<StaticRow> = c
            .static_sizes
            .par_iter()
            .map(|&n| -> anyhow::Result<StaticRow> {
                let g = build_grid(&GridSpec { n, ..self.cfg.grid })?;
                let w = GroundState::<f64>::unit(g.dim())?.sample(g.clone());
                Ok(StaticRow {
                    n,
                    residual: static_residual(&w)?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        io::write_rows_csv(&self.out.join("static_residual.csv"), &statics)?;

        let refinement = &levels[..c.levels];
        let ratios = |f: fn(&ConvergenceRow) -> f64| -> Vec<f64> {
            refinement.windows(2).map(|w| f(&w[0]) / f(&w[1])).collect()
        };
        #[derive(Serialize)]
        struct V {
            energy_residual_ratios: Vec<f64>,
            l2_residual_ratios: Vec<f64>,
            static_residual_ratios: Vec<f64>,
            rmax_energy_shift_rel: Option<f64>,
        }
        let finest = &refinement[refinement.len() - 1];
        let v = V {
            energy_residual_ratios: ratios(|r| r.energy_residual_rel),
            l2_residual_ratios: ratios(|r| r.l2_residual_rel),
            static_residual_ratios: statics
                .windows(2)
                .map(|w| w[0].residual / w[1].residual)
                .collect(),
            rmax_energy_shift_rel: levels
                .get(c.levels)
                .map(|wide| ((wide.energy_end - finest.energy_end) / finest.energy_end).abs()),
        };
        self.manifest(&v)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub r_max: f64,
    pub error_tol: f64,
    pub verdict: VerdictKind,
    pub t_end: f64,
    pub energy_end: f64,
    pub energy_residual_rel: f64,
    pub l2_residual_rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StaticRow {
    pub n: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
struct HistoryRow {
    index: usize,
    amplitude: f64,
    verdict: VerdictKind,
    retried: bool,
    t_final: f64,
    terminal_time: f64,
    energy0: f64,
    grad_sq0: f64,
    a_lo: f64,
    a_hi: f64,
}

fn history_rows(r: &ThresholdResult) -> Vec<HistoryRow> {
    r.runs
        .iter()
        .map(|x| HistoryRow {
            index: x.index,
            amplitude: x.amplitude,
            verdict: x.verdict,
            retried: x.retried,
            t_final: x.t_final,
            terminal_time: x.terminal_time,
            energy0: x.initial.energy,
            grad_sq0: x.initial.grad_sq,
            a_lo: x.a_lo,
            a_hi: x.a_hi,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LevineParamsReport {
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OffsetPoint {
    #[serde(rename = "A")]
    pub a: f64,
    pub t_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevineReport {
    /// `E(u0) < 0`.
    pub in_set: bool,
    pub energy0: f64,
    pub verdict: VerdictKind,
    pub t_blow_observed: Option<f64>,
    pub t_hat: Option<f64>,
    pub worst_margin: Option<f64>,
    pub convexity: Option<ConvexityReport<f64>>,
    pub params: Option<LevineParamsReport>,
    pub offset_sweep: Vec<OffsetPoint>,
    pub refined: RefinedReport<f64>,
}

pub fn levine_report(
    rec: &Record,
    consts: &Constants,
    sec: &crate::config::LevineSection,
) -> anyhow::Result<(LevineReport, Option<LevineSeries<f64>>)> {
    let s0 = rec.initial();
    let refined = refined_criterion_check(rec, consts, sec.resolved_linf)?;
    let t_blow_observed =
        (rec.verdict.kind == VerdictKind::BlewUp).then_some(rec.verdict.terminal_time);
    let mut report = LevineReport {
        in_set: s0.energy < 0.0,
        energy0: s0.energy,
        verdict: rec.verdict.kind,
        t_blow_observed,
        t_hat: None,
        worst_margin: None,
        convexity: None,
        params: None,
        offset_sweep: Vec::new(),
        refined,
    };
    if !report.in_set {
        return Ok((report, None));
    }
    let params = LevineParams {
        alpha: sec.alpha,
        epsilon: sec.epsilon,
        ..LevineParams::critical(rec.grid.dim())
    };
    params.validate()?;
    let a = match sec.offset {
        Some(a) => a,
        None => choose_offset(-s0.energy, s0.l2_sq, &params)?,
    };
    let series = build_levine_series_with(rec, a, params)?;
    let conv = convexity_check(&series, sec.resolved_linf);
    report.t_hat = Some(predicted_blowup_time(&series)?);
    report.worst_margin = Some(conv.worst_margin);
    report.convexity = Some(conv);
    report.params = Some(LevineParamsReport {
        a,
        alpha: params.alpha,
        delta: params.delta,
        epsilon: params.epsilon,
    });
    for &a in &sec.offset_sweep {
        let s = build_levine_series_with(rec, a, params)?;
        report.offset_sweep.push(OffsetPoint {
            a,
            t_hat: predicted_blowup_time(&s)?,
        });
    }
    Ok((report, Some(series)))
}

#[derive(Debug, Clone, Serialize)]
struct SeriesRow {
    t: f64,
    #[serde(rename = "I")]
    i: f64,
    #[serde(rename = "I1")]
    i_prime: f64,
    #[serde(rename = "I2")]
    i_second: f64,
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "J_energy")]
    j_energy: f64,
    linf: f64,
}

fn series_rows(s: &LevineSeries<f64>) -> Vec<SeriesRow> {
    (0..s.t.len())
        .map(|k| SeriesRow {
            t: s.t[k],
            i: s.i[k],
            i_prime: s.i_prime[k],
            i_second: s.i_second[k],
            j: s.j[k],
            j_energy: s.j_energy[k],
            linf: s.linf[k],
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecouplingRow {
    pub ratio: f64,
    pub profiles: usize,
    pub scale_small: f64,
    pub scale_large: f64,
    pub scale_error: f64,
    pub h1_residual_rel: f64,
    pub energy_residual_rel: f64,
    pub reconstruction_error: f64,
}

/// Decomposes `W + W_ratio` for each ratio.
pub fn two_bubble_study(
    grid: &Arc<Grid>,
    ratios: &[f64],
    j_max: usize,
    stop_tol: f64,
) -> anyhow::Result<Vec<DecouplingRow>> {
    ratios
        .par_iter()
        .map(|&ratio| {
            let d = grid.dim();
            let w1 = GroundState::<f64>::unit(d)?;
            let w2 = GroundState::<f64>::new(d, ratio)?;
            let values = grid.sample(|r| w1.eval(r) + w2.eval(r));
            let u = RadialField::new(grid.clone(), values.clone(), 0.0)?;
            let dec = extract_bubbles(&u, j_max, stop_tol)?;
            let mut scales: Vec<f64> = dec.profiles.iter().map(|p| p.scale).collect();
            scales.sort_by(f64::total_cmp);
            let scale_error = if scales.len() == 2 {
                ((scales[0] - 1.0).abs()).max((scales[1] - ratio).abs() / ratio)
            } else {
                f64::INFINITY
            };
            let reconstruction_error = dec
                .reconstruct()
                .iter()
                .zip(&values)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            Ok(DecouplingRow {
                ratio,
                profiles: scales.len(),
                scale_small: scales.first().copied().unwrap_or(f64::NAN),
                scale_large: scales.last().copied().unwrap_or(f64::NAN),
                scale_error,
                h1_residual_rel: dec.h1_residual_rel,
                energy_residual_rel: dec.energy_residual / dec.input_h1_norm_sq,
                reconstruction_error,
            })
        })
        .collect()
}

/// Default output directory for a config: `out/<experiment>`.
pub fn default_out_dir(kind: ExperimentKind) -> PathBuf {
    PathBuf::from("out").join(kind.name())
}
