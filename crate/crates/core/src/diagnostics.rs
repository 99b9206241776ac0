//! Norms, conserved-quantity residuals, and verdicts along trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Rhs, RunRecord, VerdictKind};
use crate::grid::Boundary;
use crate::quadrature::integrate_samples;
use crate::variational::VariationalConstants;
use crate::Scalar;

/// Allowed relative growth of the space-time accumulator over the last decade
/// `[T/10, T]` for it to count as converged.
pub const S_NORM_CONVERGENCE: f64 = 0.01;

/// One time slice of the trajectory diagnostics.
///
/// `l4_4th` holds `int |u|^{2*}` (the quartic integral when d = 4). The three
/// accumulators integrate over `[0, t]`: `s_accum` the sixth power of the
/// space-time `L^6` norm (`L^{2(d+2)/(d-2)}` in general), `grad_l3_accum` the
/// cube of `||grad u||_{L^3_{t,x}}`, and `ut_accum` the dissipated `int int |u_t|^2`.
/// For the linear flow `E` and `K` drop the nonlinear terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticSample<T> {
    pub t: T,
    #[serde(rename = "E")]
    pub energy: T,
    pub kinetic: T,
    pub potential: T,
    pub l2_sq: T,
    pub l4_4th: T,
    pub linf: T,
    #[serde(rename = "K")]
    pub k: T,
    #[serde(rename = "s_accum")]
    pub s_accum: T,
    pub grad_l3_accum: T,
    #[serde(rename = "ut_accum")]
    pub ut_accum: T,
}

impl<T: Scalar> DiagnosticSample<T> {
    pub fn grad_sq(&self) -> T {
        self.kinetic * T::lit(2.0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Integrands<T> {
    s: T,
    grad3: T,
    ut: T,
}

/// Running trapezoidal accumulators, advanced once per accepted time step.
pub struct Accumulators<T> {
    rhs: Rhs<T>,
    buf: Vec<T>,
    prev: Integrands<T>,
    s: T,
    grad3: T,
    ut: T,
}

impl<T: Scalar> Accumulators<T> {
    pub fn new(rhs: Rhs<T>, u: &[T]) -> Self {
        let n = u.len();
        let mut acc = Self {
            rhs,
            buf: vec![T::zero(); n],
            prev: Integrands::default(),
            s: T::zero(),
            grad3: T::zero(),
            ut: T::zero(),
        };
        acc.prev = acc.integrands(u);
        acc
    }

    fn integrands(&mut self, u: &[T]) -> Integrands<T> {
        let grid = self.rhs.grid().clone();
        let d = T::from_usize_lossy(grid.dim());
        let two = T::lit(2.0);
        let s_exp = two * (d + two) / (d - two);
        let s = if grid.dim() == 4 {
            grid.weighted_sum(u.iter().map(|&x| {
                let x2 = x * x;
                x2 * x2 * x2
            }))
        } else {
            grid.lp_power(u, s_exp)
        };
        let g = grid.gradient(u);
        let grad3 = grid.weighted_sum(g.iter().map(|&x| x.abs() * x * x));
        self.rhs.eval(u, &mut self.buf);
        let ut = grid.weighted_sum(self.buf.iter().map(|&x| x * x));
        Integrands { s, grad3, ut }
    }

    pub fn accumulate(&mut self, u_new: &[T], h: T) {
        let next = self.integrands(u_new);
        let half_h = h * T::lit(0.5);
        self.s = self.s + half_h * (self.prev.s + next.s);
        self.grad3 = self.grad3 + half_h * (self.prev.grad3 + next.grad3);
        self.ut = self.ut + half_h * (self.prev.ut + next.ut);
        self.prev = next;
    }

    pub fn sample(&self, u: &[T], t: T) -> DiagnosticSample<T> {
        let grid = self.rhs.grid();
        let grad_sq = grid.h1dot_norm_sq(u);
        let crit = if grid.dim() == 4 {
            grid.weighted_sum(u.iter().map(|&x| (x * x) * (x * x)))
        } else {
            grid.lp_power(u, grid.critical_exponent())
        };
        let kinetic = T::lit(0.5) * grad_sq;
        // the linear flow dissipates the Dirichlet energy alone
        let potential = if self.rhs.is_nonlinear() {
            -crit / grid.critical_exponent()
        } else {
            T::zero()
        };
        DiagnosticSample {
            t,
            energy: kinetic + potential,
            kinetic,
            potential,
            l2_sq: grid.weighted_sum(u.iter().map(|&x| x * x)),
            l4_4th: crit,
            linf: u.iter().fold(T::zero(), |a, &x| a.max(x.abs())),
            k: if self.rhs.is_nonlinear() {
                grad_sq - crit
            } else {
                grad_sq
            },
            s_accum: self.s,
            grad_l3_accum: self.grad3,
            ut_accum: self.ut,
        }
    }
}

/// Computes a stand-alone sample (zero accumulators) for a field.
pub fn sample_field<T: Scalar>(
    field: &crate::RadialField<T>,
    nonlinear: bool,
) -> DiagnosticSample<T> {
    let rhs = Rhs::new(field.grid().clone(), Boundary::Dirichlet, nonlinear);
    Accumulators::new(rhs, field.values()).sample(field.values(), field.time())
}

/// `E(t2) + int_{t1}^{t2} int |u_t|^2 - E(t1)`; zero for exact solutions.
pub fn energy_dissipation_residual<T: Scalar>(record: &RunRecord<T>, t1: T, t2: T) -> Result<T> {
    if !(t1 < t2) {
        return Err(Error::InvalidParameter(format!(
            "need t1 < t2, got {t1} and {t2}"
        )));
    }
    let a = &record.samples[record.sample_index(t1)?];
    let b = &record.samples[record.sample_index(t2)?];
    Ok(b.energy + (b.ut_accum - a.ut_accum) - a.energy)
}

/// `||u(t)||^2 - ||u(0)||^2 + 2 int_0^t K(u(s)) ds`, with the time integral by
/// the piecewise quadratic rule over checkpoints.
pub fn l2_dissipation_residual<T: Scalar>(record: &RunRecord<T>, t: T) -> Result<T> {
    let idx = record.sample_index(t)?;
    let s = &record.samples[..=idx];
    let times: Vec<T> = s.iter().map(|x| x.t).collect();
    let k: Vec<T> = s.iter().map(|x| x.k).collect();
    let integral = integrate_samples(&times, &k);
    Ok(s[idx].l2_sq - s[0].l2_sq + T::lit(2.0) * integral)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappingReport<T> {
    pub applicable: bool,
    pub reason: String,
    /// `max_t ||grad u(t)||^2 / ||grad W||^2`.
    pub max_ratio: T,
    pub violated: bool,
    /// Smallest sampled energy; non-negative (up to discretisation) when trapped.
    pub min_energy: T,
}

/// Tracks `||grad u(t)||^2 / ||grad W||^2` for data starting below the threshold
/// (`E(u0) <= E(W)`, `||grad u0|| < ||grad W||`).
pub fn gradient_trapping_monitor<T: Scalar>(
    record: &RunRecord<T>,
    consts: &VariationalConstants<T>,
) -> TrappingReport<T> {
    let s0 = record.initial();
    let g = consts.grad_w_sq;
    let max_ratio = record
        .samples
        .iter()
        .fold(T::zero(), |m, s| m.max(s.grad_sq() / g));
    let min_energy = record
        .samples
        .iter()
        .fold(T::infinity(), |m, s| m.min(s.energy));
    if !(s0.energy <= consts.energy_w && s0.grad_sq() < g) {
        return TrappingReport {
            applicable: false,
            reason: format!(
                "initial data outside the trapping region: E(u0) = {:e} vs E(W) = {:e}, \
                 ||grad u0||^2 = {:e} vs ||grad W||^2 = {:e}",
                s0.energy,
                consts.energy_w,
                s0.grad_sq(),
                g
            ),
            max_ratio,
            violated: false,
            min_energy,
        };
    }
    TrappingReport {
        applicable: true,
        reason: "E(u0) <= E(W) and ||grad u0|| < ||grad W||".into(),
        max_ratio,
        violated: max_ratio >= T::one(),
        min_energy,
    }
}

/// Finite-horizon decay surrogate: `||grad u(T)||^2 <= floor * ||grad u(0)||^2`
/// and the space-time accumulator grew less than 1% over `[T/10, T]`.
pub fn decay_verdict<T: Scalar>(record: &RunRecord<T>, decay_floor: T) -> Result<bool> {
    match record.verdict.kind {
        VerdictKind::BlewUp => return Err(Error::NotApplicable("run ended in blow-up".into())),
        VerdictKind::Inconclusive => {
            return Err(Error::NotApplicable("run did not reach t_final".into()))
        }
        _ => {}
    }
    let first = record.initial();
    let last = record.last();
    let decayed = last.grad_sq() <= decay_floor * first.grad_sq();
    Ok(decayed && s_norm_converged(record))
}

/// Relative growth of `s_accum` over the last decade of the run is below 1%.
pub fn s_norm_converged<T: Scalar>(record: &RunRecord<T>) -> bool {
    let last = record.last();
    if last.s_accum.is_zero() {
        return true;
    }
    let t_dec = last.t / T::lit(10.0);
    let earlier = record
        .samples
        .iter()
        .rev()
        .find(|s| s.t <= t_dec)
        .unwrap_or(record.initial());
    (last.s_accum - earlier.s_accum) / last.s_accum < T::lit(S_NORM_CONVERGENCE)
}
