//! Time integration: Crank-Nicolson diffusion with an explicit second-order
//! treatment of the nonlinearity, step-doubling error control, and blow-up
//! detection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Accumulators, DiagnosticSample};
use crate::error::{Error, Result};
use crate::grid::{Boundary, RadialField, RadialGrid};
use crate::tridiag::solve_tridiagonal;
use crate::Scalar;

/// When diagnostics are sampled. Sampling times are independent of the step
/// size; steps are shortened to land on them exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CheckpointSchedule<T> {
    /// Every `early_step` up to `early_until`, then geometric with ratio `growth`.
    Graded {
        early_step: T,
        early_until: T,
        growth: T,
    },
    Explicit {
        times: Vec<T>,
    },
}

impl<T: Scalar> Default for CheckpointSchedule<T> {
    fn default() -> Self {
        Self::Graded {
            early_step: T::lit(0.01),
            early_until: T::one(),
            growth: T::lit(1.02),
        }
    }
}

impl<T: Scalar> CheckpointSchedule<T> {
    /// Strictly increasing checkpoint times in `(0, t_final]`, always ending at `t_final`.
    pub fn times(&self, t_final: T) -> Vec<T> {
        let mut out = Vec::new();
        match self {
            Self::Graded {
                early_step,
                early_until,
                growth,
            } => {
                let mut k = 1usize;
                loop {
                    let t = *early_step * T::from_usize_lossy(k);
                    if t > *early_until * (T::one() + T::lit(1e-12)) || t >= t_final {
                        break;
                    }
                    out.push(t);
                    k += 1;
                }
                let mut t = out.last().copied().unwrap_or(*early_step);
                if out.is_empty() && t < t_final {
                    out.push(t);
                }
                loop {
                    t = t * *growth;
                    if t >= t_final {
                        break;
                    }
                    out.push(t);
                }
            }
            Self::Explicit { times } => {
                out.extend(
                    times
                        .iter()
                        .copied()
                        .filter(|&t| t > T::zero() && t < t_final),
                );
                out.sort_by(|a, b| a.partial_cmp(b).expect("finite checkpoint times"));
                out.dedup();
            }
        }
        out.push(t_final);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig<T> {
    pub dt_init: T,
    /// Step-size floor; a controller request below it is the dt-collapse signal.
    pub dt_min: T,
    pub dt_max: T,
    /// Local tolerance for the step-doubling estimate (relative to `||u||_inf`).
    pub error_tol: T,
    pub t_final: T,
    /// `||u||_inf` above which the norm-escape signal fires.
    pub linf_ceiling: T,
    pub checkpoints: CheckpointSchedule<T>,
    /// `Decayed` iff `||grad u(T)||^2 <= decay_floor * ||grad u(0)||^2`.
    pub decay_floor: Option<T>,
    pub nonlinear: bool,
    pub boundary: Boundary,
    /// Keep a copy of the field at every checkpoint.
    pub store_fields: bool,
}

impl<T: Scalar> Default for EvolveConfig<T> {
    fn default() -> Self {
        Self {
            dt_init: T::lit(1e-4),
            dt_min: T::lit(1e-16),
            dt_max: T::lit(0.5),
            error_tol: T::lit(1e-7),
            t_final: T::lit(50.0),
            linf_ceiling: T::lit(1e6),
            checkpoints: CheckpointSchedule::default(),
            decay_floor: None,
            nonlinear: true,
            boundary: Boundary::Dirichlet,
            store_fields: false,
        }
    }
}

impl<T: Scalar> EvolveConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        if !(pos(self.dt_init)
            && pos(self.dt_min)
            && pos(self.dt_max)
            && pos(self.error_tol)
            && pos(self.t_final)
            && pos(self.linf_ceiling))
        {
            return Err(Error::InvalidParameter(
                "evolve parameters must be positive and finite".into(),
            ));
        }
        if !(self.dt_min < self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::InvalidParameter(
                "need dt_min < dt_init <= dt_max".into(),
            ));
        }
        if let Some(f) = self.decay_floor {
            if !pos(f) {
                return Err(Error::InvalidParameter(
                    "decay_floor must be positive".into(),
                ));
            }
        }
        if let CheckpointSchedule::Graded {
            early_step,
            early_until,
            growth,
        } = &self.checkpoints
        {
            if !(pos(*early_step) && pos(*early_until) && *growth > T::one()) {
                return Err(Error::InvalidParameter(
                    "checkpoint schedule needs positive steps and growth > 1".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Decayed,
    BlewUp,
    ReachedTFinal,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict<T> {
    pub kind: VerdictKind,
    /// For `BlewUp`, the first time `||u||_inf` exceeded the ceiling.
    pub terminal_time: T,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo<T> {
    pub t: T,
    pub dt: T,
    pub error: T,
}

/// Full trajectory log of one simulation.
#[derive(Debug, Clone)]
pub struct RunRecord<T> {
    pub grid: Arc<RadialGrid<T>>,
    pub config: EvolveConfig<T>,
    pub samples: Vec<DiagnosticSample<T>>,
    /// Field at each sample time (same order as `samples`) when `store_fields` is set.
    pub checkpoints: Vec<RadialField<T>>,
    pub steps: Vec<StepInfo<T>>,
    pub rejected_steps: usize,
    pub verdict: Verdict<T>,
    pub final_field: RadialField<T>,
}

impl<T: Scalar> RunRecord<T> {
    pub fn initial(&self) -> &DiagnosticSample<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &DiagnosticSample<T> {
        self.samples
            .last()
            .expect("records always hold the initial sample")
    }

    /// Index of the sample taken at time `t` (to a relative 1e-9).
    pub fn sample_index(&self, t: T) -> Result<usize> {
        let tol = T::lit(1e-9) * t.abs().max(T::one());
        self.samples
            .iter()
            .position(|s| (s.t - t).abs() <= tol)
            .ok_or(Error::UnsampledTime(t.as_f64()))
    }
}

/// Right-hand side `Lap u + |u|^{p-1} u` of the evolution, `p = 2* - 1`.
#[derive(Debug, Clone)]
pub struct Rhs<T> {
    grid: Arc<RadialGrid<T>>,
    boundary: Boundary,
    nonlinear: bool,
    power: T,
}

impl<T: Scalar> Rhs<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, boundary: Boundary, nonlinear: bool) -> Self {
        let power = grid.critical_exponent() - T::one();
        Self {
            grid,
            boundary,
            nonlinear,
            power,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear
    }

    /// `|u|^{p-1} u`, or 0 for the linear flow.
    #[inline]
    pub fn nonlinearity(&self, u: T) -> T {
        if !self.nonlinear {
            T::zero()
        } else if self.power == T::lit(3.0) {
            u * u * u
        } else {
            u.abs().powf(self.power - T::one()) * u
        }
    }

    pub fn eval(&self, u: &[T], out: &mut [T]) {
        self.grid.laplacian_into(u, out, self.boundary);
        for (o, &x) in out.iter_mut().zip(u) {
            *o = *o + self.nonlinearity(x);
        }
        if self.boundary == Boundary::Dirichlet {
            if let Some(last) = out.last_mut() {
                *last = T::zero();
            }
        }
    }
}

/// One IMEX step. Diffusion is Crank-Nicolson; the nonlinearity is evaluated at
/// a predictor half step (itself Crank-Nicolson with an explicit Euler source).
pub struct ImexStepper<T> {
    rhs: Rhs<T>,
    lower: Vec<T>,
    diag: Vec<T>,
    upper: Vec<T>,
    lap: Vec<T>,
    source: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> ImexStepper<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, boundary: Boundary, nonlinear: bool) -> Self {
        let n = grid.len();
        Self {
            rhs: Rhs::new(grid, boundary, nonlinear),
            lower: vec![T::zero(); n],
            diag: vec![T::zero(); n],
            upper: vec![T::zero(); n],
            lap: vec![T::zero(); n],
            source: vec![T::zero(); n],
            scratch: Vec::with_capacity(n),
        }
    }

    pub fn rhs(&self) -> &Rhs<T> {
        &self.rhs
    }

    /// Solves `(I - a Lap) x = (I + a Lap) u + source` into `out`.
    fn crank_nicolson(&mut self, u: &[T], a: T, out: &mut [T]) {
        let n = u.len();
        let grid = &self.rhs.grid;
        let boundary = self.rhs.boundary;
        grid.laplacian_into(u, &mut self.lap, boundary);
        for i in 0..n {
            let (lo, di, up) = grid.laplacian_row(i, boundary);
            self.lower[i] = -a * lo;
            self.diag[i] = T::one() - a * di;
            self.upper[i] = -a * up;
            out[i] = u[i] + a * self.lap[i] + self.source[i];
        }
        if boundary == Boundary::Dirichlet {
            self.lower[n - 1] = T::zero();
            self.diag[n - 1] = T::one();
            self.upper[n - 1] = T::zero();
            out[n - 1] = T::zero();
        }
        solve_tridiagonal(&self.lower, &self.diag, &self.upper, out, &mut self.scratch);
    }

    /// Advances `u` by `dt` into `out`. Fails with [`Error::NonFinite`] on overflow.
    pub fn step(&mut self, u: &[T], dt: T, out: &mut [T]) -> Result<()> {
        let half_dt = dt * T::lit(0.5);
        for (s, &x) in self.source.iter_mut().zip(u) {
            *s = half_dt * self.rhs.nonlinearity(x);
        }
        // predictor at t + dt/2, written into `out`
        self.crank_nicolson(u, dt * T::lit(0.25), out);
        for (s, &x) in self.source.iter_mut().zip(out.iter()) {
            *s = dt * self.rhs.nonlinearity(x);
        }
        self.crank_nicolson(u, half_dt, out);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(dt.as_f64()));
        }
        Ok(())
    }
}

/// Outcome of an adaptive advance.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Advance {
    Reached,
    /// The controller asked for a step below `dt_min`.
    Collapsed,
}

/// Step-doubling controller around an [`ImexStepper`].
struct Adaptive<T> {
    stepper: ImexStepper<T>,
    dt: T,
    dt_min: T,
    dt_max: T,
    tol: T,
    full: Vec<T>,
    half: Vec<T>,
    fine: Vec<T>,
    rejected: usize,
}

impl<T: Scalar> Adaptive<T> {
    fn new(stepper: ImexStepper<T>, cfg: &EvolveConfig<T>) -> Self {
        let n = stepper.rhs().grid().len();
        Self {
            stepper,
            dt: cfg.dt_init,
            dt_min: cfg.dt_min,
            dt_max: cfg.dt_max,
            tol: cfg.error_tol,
            full: vec![T::zero(); n],
            half: vec![T::zero(); n],
            fine: vec![T::zero(); n],
            rejected: 0,
        }
    }

    /// Estimated local error of the two-half-step solution relative to its sup norm;
    /// `None` when a trial overflowed.
    fn trial(&mut self, u: &[T], h: T) -> Option<T> {
        let half_h = h * T::lit(0.5);
        self.stepper.step(u, h, &mut self.full).ok()?;
        self.stepper.step(u, half_h, &mut self.half).ok()?;
        let half = std::mem::take(&mut self.half);
        let res = self.stepper.step(&half, half_h, &mut self.fine);
        self.half = half;
        res.ok()?;
        let mut diff = T::zero();
        let mut scale = T::zero();
        for (a, b) in self.fine.iter().zip(&self.full) {
            diff = diff.max((*a - *b).abs());
            scale = scale.max(a.abs());
        }
        if scale.is_zero() {
            return Some(T::zero());
        }
        Some(diff / (T::lit(3.0) * scale))
    }

    /// Advances `(u, t)` to `target`, calling `on_accept(u, t, h, err)` after every accepted step.
    fn advance(
        &mut self,
        u: &mut [T],
        t: &mut T,
        target: T,
        mut on_accept: impl FnMut(&[T], T, T, T) -> bool,
    ) -> Advance {
        while *t < target {
            let remaining = target - *t;
            let clipped = self.dt >= remaining;
            let h = if clipped { remaining } else { self.dt };
            match self.trial(u, h) {
                Some(err) if err <= self.tol => {
                    u.copy_from_slice(&self.fine);
                    *t = if clipped { target } else { *t + h };
                    if !clipped || err < self.tol * T::lit(0.25) {
                        let grown = if err < self.tol * T::lit(0.25) {
                            h * T::lit(1.25)
                        } else {
                            h
                        };
                        self.dt = if clipped { self.dt.max(grown) } else { grown };
                    }
                    self.dt = self.dt.min(self.dt_max);
                    if !on_accept(u, *t, h, err) {
                        return Advance::Reached;
                    }
                }
                _ => {
                    self.rejected += 1;
                    self.dt = h * T::lit(0.5);
                    if self.dt < self.dt_min {
                        return Advance::Collapsed;
                    }
                }
            }
        }
        Advance::Reached
    }
}

fn project_boundary<T: Scalar>(values: &mut [T], boundary: Boundary) {
    if boundary == Boundary::Dirichlet {
        if let Some(last) = values.last_mut() {
            *last = T::zero();
        }
    }
}

/// Applies the linear heat flow `e^{t Lap}` (Dirichlet at `R_max`) with
/// adaptive Crank-Nicolson steps at local tolerance `tol`.
pub fn heat_semigroup_apply<T: Scalar>(
    field: &RadialField<T>,
    t: T,
    tol: T,
) -> Result<RadialField<T>> {
    if t < T::zero() {
        return Err(Error::InvalidParameter(
            "heat flow time must be non-negative".into(),
        ));
    }
    let grid = field.grid().clone();
    let mut u = field.values().to_vec();
    project_boundary(&mut u, Boundary::Dirichlet);
    if t.is_zero() {
        return RadialField::new(grid, field.values().to_vec(), field.time());
    }
    let cfg = EvolveConfig {
        dt_init: (t * T::lit(1e-3)).min(T::lit(1e-3)),
        dt_min: T::lit(1e-16),
        dt_max: t,
        error_tol: tol,
        t_final: t,
        ..EvolveConfig::default()
    };
    let mut ctl = Adaptive::new(
        ImexStepper::new(grid.clone(), Boundary::Dirichlet, false),
        &cfg,
    );
    let mut now = T::zero();
    if ctl.advance(&mut u, &mut now, t, |_, _, _, _| true) == Advance::Collapsed {
        return Err(Error::NonFinite(now.as_f64()));
    }
    RadialField::new(grid, u, field.time() + t)
}

/// Runs the nonlinear (or linear, per `config.nonlinear`) evolution from
/// `initial`, sampling diagnostics at the configured checkpoints and passing
/// each sample to `hook` as it is produced.
///
/// Blow-up needs both signals: `||u||_inf` above `linf_ceiling`, then a
/// controller request below `dt_min` (or overflow). Either alone ends the run as
/// `Inconclusive`.
pub fn simulate<T: Scalar>(
    initial: &RadialField<T>,
    config: &EvolveConfig<T>,
    hook: &mut dyn FnMut(&DiagnosticSample<T>),
) -> Result<RunRecord<T>> {
    config.validate()?;
    let grid = initial.grid().clone();
    let mut u = initial.values().to_vec();
    project_boundary(&mut u, config.boundary);
    let rhs = Rhs::new(grid.clone(), config.boundary, config.nonlinear);
    let mut acc = Accumulators::new(rhs.clone(), &u);
    let mut ctl = Adaptive::new(
        ImexStepper::new(grid.clone(), config.boundary, config.nonlinear),
        config,
    );

    let mut samples = Vec::new();
    let mut checkpoints = Vec::new();
    let mut steps = Vec::new();
    let mut t = T::zero();

    let first = acc.sample(&u, t);
    hook(&first);
    samples.push(first);
    if config.store_fields {
        checkpoints.push(RadialField::new(grid.clone(), u.clone(), t)?);
    }
    let grad0 = samples[0].kinetic * T::lit(2.0);

    let mut ceiling_time: Option<T> = None;
    let mut collapsed = false;
    for target in config.checkpoints.times(config.t_final) {
        let ceiling = config.linf_ceiling;
        let outcome = {
            let acc = &mut acc;
            let steps = &mut steps;
            let ceiling_time = &mut ceiling_time;
            ctl.advance(&mut u, &mut t, target, |v, now, h, err| {
                acc.accumulate(v, h);
                steps.push(StepInfo {
                    t: now,
                    dt: h,
                    error: err,
                });
                if ceiling_time.is_none() && v.iter().any(|x| x.abs() > ceiling) {
                    *ceiling_time = Some(now);
                }
                true
            })
        };
        if outcome == Advance::Collapsed {
            collapsed = true;
            break;
        }
        let s = acc.sample(&u, t);
        hook(&s);
        samples.push(s);
        if config.store_fields {
            checkpoints.push(RadialField::new(grid.clone(), u.clone(), t)?);
        }
    }

    let verdict = if collapsed {
        match ceiling_time {
            Some(tb) => Verdict {
                kind: VerdictKind::BlewUp,
                terminal_time: tb,
                reason: format!(
                    "||u||_inf exceeded {:e} at t = {:e}, then the step size collapsed below {:e} at t = {:e} \
                     (operational criterion: norm escape together with dt collapse)",
                    config.linf_ceiling, tb, config.dt_min, t
                ),
            },
            None => Verdict {
                kind: VerdictKind::Inconclusive,
                terminal_time: t,
                reason: format!(
                    "step size collapsed below {:e} at t = {:e} without ||u||_inf reaching {:e}",
                    config.dt_min, t, config.linf_ceiling
                ),
            },
        }
    } else if let Some(tb) = ceiling_time {
        Verdict {
            kind: VerdictKind::Inconclusive,
            terminal_time: t,
            reason: format!(
                "||u||_inf exceeded {:e} at t = {:e} but the step size never collapsed",
                config.linf_ceiling, tb
            ),
        }
    } else {
        let grad_t = samples
            .last()
            .map(|s| s.kinetic * T::lit(2.0))
            .unwrap_or(T::zero());
        match config.decay_floor {
            Some(floor) if grad0 > T::zero() && grad_t <= floor * grad0 => Verdict {
                kind: VerdictKind::Decayed,
                terminal_time: t,
                reason: format!(
                    "||grad u(T)||^2 / ||grad u(0)||^2 = {:e} <= {:e}",
                    grad_t / grad0,
                    floor
                ),
            },
            _ => Verdict {
                kind: VerdictKind::ReachedTFinal,
                terminal_time: t,
                reason: "reached t_final".into(),
            },
        }
    };

    let final_field =
        RadialField::new(grid.clone(), u, t).unwrap_or_else(|_| RadialField::zeros(grid.clone()));
    Ok(RunRecord {
        grid,
        config: config.clone(),
        samples,
        checkpoints,
        steps,
        rejected_steps: ctl.rejected,
        verdict,
        final_field,
    })
}
