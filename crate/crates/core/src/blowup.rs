//! Convexity (Levine-type) blow-up functionals and the refined positive-energy
//! criterion built on the threshold curves `f`, `e`, `g`.
//!
//! With `I(t) = int_0^t ||u||_2^2 ds + A` and `J(t) = -E(u(t))`:
//!
//! * `I' = ||u||_2^2`, `I'' = -2 K(u)`, `J(t) = J(0) + int_0^t ||u_t||_2^2`;
//! * `I'' >= 4 (1 + delta) J` with `delta = (p - 1) / 2`;
//! * for `1 + delta >= (1 + alpha)(1 + epsilon)` and `A` large enough,
//!   `I'' I - (1 + alpha) I'^2 > 0`, so `I^{-alpha}` is concave and `I` escapes to
//!   infinity no later than `t_hat = 1 / (I(0)^alpha * alpha * I'(0) / I(0)^{alpha + 1})`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{RunRecord, VerdictKind};
use crate::variational::VariationalConstants;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevineParams<T> {
    pub alpha: T,
    pub epsilon: T,
    pub delta: T,
}

impl<T: Scalar> LevineParams<T> {
    /// `alpha = epsilon = 0.1`, `delta = (p - 1) / 2` for the critical power `p = 2* - 1` of dimension `d`.
    pub fn critical(d: usize) -> Self {
        let dd = T::from_usize_lossy(d);
        let p = (dd + T::lit(2.0)) / (dd - T::lit(2.0));
        Self {
            alpha: T::lit(0.1),
            epsilon: T::lit(0.1),
            delta: T::lit(0.5) * (p - T::one()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.epsilon > T::zero() && self.delta > T::zero()) {
            return Err(Error::InvalidParameter(
                "alpha, epsilon, delta must be positive".into(),
            ));
        }
        if (T::one() + self.alpha) * (T::one() + self.epsilon) > T::one() + self.delta {
            return Err(Error::InvalidParameter(
                "need (1 + alpha)(1 + epsilon) <= 1 + delta".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevineSeries<T> {
    /// Offset `A` in `I`.
    pub a_offset: T,
    pub params: LevineParams<T>,
    pub t: Vec<T>,
    pub i: Vec<T>,
    pub i_prime: Vec<T>,
    pub i_second: Vec<T>,
    /// `J(0) + int_0^t ||u_t||^2` from the dissipation accumulator.
    pub j: Vec<T>,
    /// `-E(u(t))` evaluated directly.
    pub j_energy: Vec<T>,
    pub linf: Vec<T>,
}

impl<T: Scalar> LevineSeries<T> {
    /// `J(0)`, or zero for an empty series.
    pub fn j0(&self) -> T {
        self.j.first().copied().unwrap_or_else(T::zero)
    }
}

/// Builds `I`, `I'`, `I''`, `J` from the sampled diagnostics (trapezoid in time for `I`),
/// with the default parameters for the critical power of the record's dimension.
pub fn build_levine_series<T: Scalar>(
    record: &RunRecord<T>,
    a_offset: T,
) -> Result<LevineSeries<T>> {
    build_levine_series_with(record, a_offset, LevineParams::critical(record.grid.dim()))
}

pub fn build_levine_series_with<T: Scalar>(
    record: &RunRecord<T>,
    a_offset: T,
    params: LevineParams<T>,
) -> Result<LevineSeries<T>> {
    params.validate()?;
    if !(a_offset > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "offset A must be positive, got {a_offset}"
        )));
    }
    let s = &record.samples;
    if s.is_empty() {
        return Err(Error::InvalidParameter(
            "record holds no diagnostics".into(),
        ));
    }
    let j0 = -s[0].energy;
    let mut integral = T::zero();
    let mut out = LevineSeries {
        a_offset,
        params,
        t: Vec::with_capacity(s.len()),
        i: Vec::with_capacity(s.len()),
        i_prime: Vec::with_capacity(s.len()),
        i_second: Vec::with_capacity(s.len()),
        j: Vec::with_capacity(s.len()),
        j_energy: Vec::with_capacity(s.len()),
        linf: Vec::with_capacity(s.len()),
    };
    for (k, smp) in s.iter().enumerate() {
        if k > 0 {
            integral = integral + T::lit(0.5) * (smp.t - s[k - 1].t) * (smp.l2_sq + s[k - 1].l2_sq);
        }
        out.t.push(smp.t);
        out.i.push(integral + a_offset);
        out.i_prime.push(smp.l2_sq);
        out.i_second.push(T::lit(-2.0) * smp.k);
        out.j.push(j0 + smp.ut_accum);
        out.j_energy.push(-smp.energy);
        out.linf.push(smp.linf);
    }
    Ok(out)
}

/// Smallest power of ten `A` for which the lower bound
/// `4 (1 + delta) J(0) A - (1 + 1/epsilon)(1 + alpha) ||u0||^4` is non-negative.
pub fn choose_offset<T: Scalar>(j0: T, l2_sq0: T, params: &LevineParams<T>) -> Result<T> {
    if !(j0 > T::zero()) {
        return Err(Error::HypothesisFailure(format!(
            "J(0) = -E(u0) = {j0} is not positive"
        )));
    }
    let need = (T::one() + params.epsilon.recip()) * (T::one() + params.alpha) * l2_sq0 * l2_sq0
        / (T::lit(4.0) * (T::one() + params.delta) * j0);
    if !(need > T::zero()) {
        return Ok(T::one());
    }
    let ten = T::lit(10.0);
    let mut a = ten.powf(need.log10().ceil());
    // guard against log10 rounding
    while a < need {
        a = a * ten;
    }
    while a / ten >= need {
        a = a / ten;
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport<T> {
    /// `J(0) > 0`, the hypothesis under which the inequalities are claimed.
    pub applicable: bool,
    /// `min_k [I''_k - 4 (1 + delta) J_k]`.
    pub worst_margin: T,
    pub worst_margin_time: T,
    /// `min_k [I''_k I_k - (1 + alpha) I'_k^2]`.
    pub worst_product_margin: T,
    /// `max_k |J_k - (-E_k)|`: the discrete energy-dissipation defect, the only
    /// source of violations of the first inequality.
    pub consistency_defect: T,
    pub samples_used: usize,
    pub t_end: T,
}

/// Checks the two convexity inequalities over the samples with `||u||_inf <= resolved_linf`.
pub fn convexity_check<T: Scalar>(
    series: &LevineSeries<T>,
    resolved_linf: T,
) -> ConvexityReport<T> {
    let params = &series.params;
    let four = T::lit(4.0);
    let mut worst = T::infinity();
    let mut worst_t = T::zero();
    let mut worst_prod = T::infinity();
    let mut defect = T::zero();
    let mut used = 0;
    let mut t_end = T::zero();
    for k in 0..series.t.len() {
        if !(series.linf[k] <= resolved_linf) {
            break;
        }
        let m = series.i_second[k] - four * (T::one() + params.delta) * series.j[k];
        if m < worst {
            worst = m;
            worst_t = series.t[k];
        }
        let p = series.i_second[k] * series.i[k]
            - (T::one() + params.alpha) * series.i_prime[k] * series.i_prime[k];
        worst_prod = worst_prod.min(p);
        defect = defect.max((series.j[k] - series.j_energy[k]).abs());
        used += 1;
        t_end = series.t[k];
    }
    ConvexityReport {
        applicable: series.j0() > T::zero(),
        worst_margin: if used > 0 { worst } else { T::zero() },
        worst_margin_time: worst_t,
        worst_product_margin: if used > 0 { worst_prod } else { T::zero() },
        consistency_defect: defect,
        samples_used: used,
        t_end,
    }
}

/// Certified upper bound `t_hat` on the lifespan.
pub fn predicted_blowup_time<T: Scalar>(series: &LevineSeries<T>) -> Result<T> {
    let alpha = series.params.alpha;
    let j0 = series.j0();
    if !(j0 > T::zero()) {
        return Err(Error::HypothesisFailure(format!(
            "J(0) = {j0} is not positive"
        )));
    }
    let (i0, ip0) = (series.i[0], series.i_prime[0]);
    if !(ip0 > T::zero()) {
        return Err(Error::HypothesisFailure("I'(0) = ||u0||^2 vanishes".into()));
    }
    let a_tilde = ip0 / i0.powf(alpha + T::one());
    Ok(T::one() / (i0.powf(alpha) * alpha * a_tilde))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinedReport<T> {
    /// `E(u0) < E(W)` and `||grad u0|| >= ||grad W||`.
    pub in_set: bool,
    pub reason: String,
    /// `min_k [-K(u_k) - g(E(u_k))]` over resolved samples.
    pub worst_virial_margin: Option<T>,
    /// `min_k [||grad u_k||^2 - e(E(u_k))]` over resolved samples.
    pub worst_branch_margin: Option<T>,
    pub samples_checked: usize,
    pub verdict: VerdictKind,
}

/// Positive-energy blow-up criterion: on the set `E < E(W)`, `||grad u|| >= ||grad W||`
/// the flow keeps `-K(u) >= g(E(u)) > 0`.
pub fn refined_criterion_check<T: Scalar>(
    record: &RunRecord<T>,
    consts: &VariationalConstants<T>,
    resolved_linf: T,
) -> Result<RefinedReport<T>> {
    let s0 = record.initial();
    let in_set = s0.energy < consts.energy_w && s0.grad_sq() >= consts.grad_w_sq;
    if !in_set {
        return Ok(RefinedReport {
            in_set,
            reason: format!(
                "not applicable: E(u0) = {:e} (E(W) = {:e}), ||grad u0||^2 = {:e} (||grad W||^2 = {:e})",
                s0.energy,
                consts.energy_w,
                s0.grad_sq(),
                consts.grad_w_sq
            ),
            worst_virial_margin: None,
            worst_branch_margin: None,
            samples_checked: 0,
            verdict: record.verdict.kind,
        });
    }
    let mut worst_k = T::infinity();
    let mut worst_b = T::infinity();
    let mut n = 0;
    for s in record
        .samples
        .iter()
        .take_while(|s| s.linf <= resolved_linf)
    {
        // energy is non-increasing; clamp round-off above the threshold
        let e = s.energy.min(consts.energy_w);
        let g = consts.g_of_e(e)?;
        let branch = consts.e_inverse(e)?;
        worst_k = worst_k.min(-s.k - g);
        worst_b = worst_b.min(s.grad_sq() - branch);
        n += 1;
    }
    Ok(RefinedReport {
        in_set,
        reason: "E(u0) < E(W) and ||grad u0|| >= ||grad W||".into(),
        worst_virial_margin: (n > 0).then_some(worst_k),
        worst_branch_margin: (n > 0).then_some(worst_b),
        samples_checked: n,
        verdict: record.verdict.kind,
    })
}
