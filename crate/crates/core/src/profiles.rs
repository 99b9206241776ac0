//! Bubble fitting, greedy extraction of rescaled ground states, and modulation
//! tracking along trajectories. Radial symmetry pins all centres at the origin.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::RunRecord;
use crate::grid::{RadialField, RadialGrid};
use crate::variational::{energy, GroundState};
use crate::Scalar;

/// Relative tolerance of the golden-section refinement of the scale.
pub const SCALE_TOL: f64 = 1e-3;

const BACKFIT_SWEEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleFit<T> {
    /// Scale `lambda` of the best-matching `W_lambda`.
    pub scale: T,
    /// Hdot^1 projection coefficient of the field onto `W_lambda`.
    pub amplitude: T,
    /// `||lambda^{-(d-2)/2} u(. / lambda) - W||_{Hdot^1} / ||W||_{Hdot^1}`.
    pub fit_residual: T,
}

/// Fits `u ~ W_lambda`: initial scale from the sup-norm ratio, then golden-section
/// minimisation of the Hdot^1 residual over `lambda` in `[lambda0 / 2, 2 lambda0]`.
///
/// The Hdot^1 norm is scale invariant, so the residual of the rescaled field
/// against `W` is evaluated as `||u - W_lambda|| / ||W||` on the field's own grid,
/// with `W_lambda` sampled from its closed form. This avoids interpolating `u`
/// and the artificial jump a rescaled field would have at `lambda * R_max`.
/// Scales are restricted to those the grid resolves.
pub fn fit_bubble<T: Scalar>(field: &RadialField<T>) -> Result<BubbleFit<T>> {
    Fitter::new(field.grid())?.fit(field.values())
}

/// Scales whose sampled `||W_lambda||^2` departs from `||W||^2` by more than this
/// (too wide for `R_max` or too narrow for the node spacing) are not fitted.
const SCALE_RESOLUTION: f64 = 1e-2;

struct Fitter<T> {
    grid: Arc<RadialGrid<T>>,
    w_norm_sq: T,
    exponent: T,
    lambda_min: T,
    lambda_max: T,
}

impl<T: Scalar> Fitter<T> {
    fn new(grid: &Arc<RadialGrid<T>>) -> Result<Self> {
        let gs = GroundState::<T>::unit(grid.dim())?;
        let w = grid.sample(|r| gs.eval(r));
        let mut f = Self {
            grid: grid.clone(),
            w_norm_sq: grid.h1dot_norm_sq(&w),
            exponent: T::from_usize_lossy(grid.dim() - 2) / T::lit(2.0),
            lambda_min: T::one(),
            lambda_max: T::one(),
        };
        let resolved = |f: &Self, l: T| {
            (f.grid.h1dot_norm_sq(&f.bubble(l)) / f.w_norm_sq - T::one()).abs()
                <= T::lit(SCALE_RESOLUTION)
        };
        let step = T::lit(2.0).sqrt();
        while f.lambda_min > T::lit(1e-12) && resolved(&f, f.lambda_min / step) {
            f.lambda_min = f.lambda_min / step;
        }
        while f.lambda_max < T::lit(1e12) && resolved(&f, f.lambda_max * step) {
            f.lambda_max = f.lambda_max * step;
        }
        Ok(f)
    }

    fn clamp(&self, lambda: T) -> T {
        lambda.max(self.lambda_min).min(self.lambda_max)
    }

    fn bubble(&self, lambda: T) -> Vec<T> {
        // scale is always positive and finite here
        let b = GroundState::new(self.grid.dim(), lambda).expect("positive scale");
        self.grid.sample(|r| b.eval(r))
    }

    fn residual(&self, u: &[T], lambda: T) -> T {
        let diff: Vec<T> = u
            .iter()
            .zip(self.bubble(lambda))
            .map(|(a, b)| *a - b)
            .collect();
        (self.grid.h1dot_norm_sq(&diff) / self.w_norm_sq).sqrt()
    }

    /// L^inf guess, compared against a coarse log-spaced scan over the resolvable
    /// scales (other bubbles can dominate the sup norm of a remainder), then refined.
    fn fit(&self, u: &[T]) -> Result<BubbleFit<T>> {
        let linf = u.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if linf.is_zero() {
            return Err(Error::ZeroField);
        }
        // W_lambda(0) = lambda^{(d-2)/2}
        let mut best = self.clamp(linf.powf(self.exponent.recip()));
        let mut best_res = self.residual(u, best);
        let step = T::lit(2.0).sqrt();
        let mut lambda = self.lambda_min;
        while lambda <= self.lambda_max {
            let r = self.residual(u, lambda);
            if r < best_res {
                best = lambda;
                best_res = r;
            }
            lambda = lambda * step;
        }
        Ok(self.refine(u, best))
    }

    /// Golden-section minimisation of the residual over `[lambda0 / 2, 2 lambda0]` in `ln lambda`.
    fn refine(&self, u: &[T], lambda0: T) -> BubbleFit<T> {
        let ln2 = T::LN_2();
        let (mut a, mut b) = (
            (lambda0.ln() - ln2).max(self.lambda_min.ln()),
            (lambda0.ln() + ln2).min(self.lambda_max.ln()),
        );
        let phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = self.residual(u, c.exp());
        let mut fd = self.residual(u, d.exp());
        let tol = T::lit(SCALE_TOL);
        while b - a > tol {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = self.residual(u, c.exp());
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = self.residual(u, d.exp());
            }
        }
        let lambda = (T::lit(0.5) * (a + b)).exp();
        let b = self.bubble(lambda);
        BubbleFit {
            scale: lambda,
            amplitude: self.grid.dirichlet_form(u, &b) / self.grid.h1dot_norm_sq(&b),
            fit_residual: self.residual(u, lambda),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Profile<T> {
    pub scale: T,
    pub fit: BubbleFit<T>,
    #[serde(skip)]
    pub values: Vec<T>,
    pub h1_norm_sq: T,
    pub energy: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleSeparation<T> {
    pub i: usize,
    pub j: usize,
    /// `lambda_i / lambda_j + lambda_j / lambda_i`.
    pub scale_ratio_sum: T,
    /// `|x_i - x_j|^2 / (lambda_i lambda_j)`; identically 0 for radial profiles.
    pub center_term: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition<T> {
    pub profiles: Vec<Profile<T>>,
    #[serde(skip)]
    pub remainder: Vec<T>,
    pub input_h1_norm_sq: T,
    pub remainder_h1_norm_sq: T,
    /// `||u||^2 - sum ||phi_j||^2 - ||w||^2` in Hdot^1.
    pub h1_residual: T,
    /// `h1_residual / ||u||^2`.
    pub h1_residual_rel: T,
    /// `E(u) - sum E(phi_j) - E(w)`.
    pub energy_residual: T,
    pub separations: Vec<ScaleSeparation<T>>,
}

impl<T: Scalar> Decomposition<T> {
    /// `sum_j phi_j + w` at the nodes.
    pub fn reconstruct(&self) -> Vec<T> {
        let mut out = self.remainder.clone();
        for p in &self.profiles {
            for (o, &v) in out.iter_mut().zip(&p.values) {
                *o = *o + v;
            }
        }
        out
    }
}

/// Greedy extraction: fit a bubble to the remainder, subtract `W_lambda`, and
/// repeat while the Hdot^1 energy removed (relative to the input) is at least
/// `stop_tol`, up to `j_max` profiles. The greedy scales are then polished by
/// back-fitting: each profile is refitted against the input minus all others.
pub fn extract_bubbles<T: Scalar>(
    field: &RadialField<T>,
    j_max: usize,
    stop_tol: T,
) -> Result<Decomposition<T>> {
    if j_max == 0 {
        return Err(Error::InvalidParameter("j_max must be at least 1".into()));
    }
    let grid = field.grid().clone();
    let fitter = Fitter::new(&grid)?;
    let sub = |a: &[T], b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(x, y)| *x - *y).collect() };
    let input = field.values();
    let input_norm = grid.h1dot_norm_sq(input);

    let mut fits: Vec<BubbleFit<T>> = Vec::new();
    let mut values: Vec<Vec<T>> = Vec::new();
    let mut remainder = input.to_vec();
    let mut rem_norm = input_norm;
    while fits.len() < j_max && input_norm > T::zero() {
        let fit = match fitter.fit(&remainder) {
            Ok(f) => f,
            Err(Error::ZeroField) => break,
            Err(e) => return Err(e),
        };
        let v = fitter.bubble(fit.scale);
        let next = sub(&remainder, &v);
        let next_norm = grid.h1dot_norm_sq(&next);
        if (rem_norm - next_norm) / input_norm < stop_tol {
            break;
        }
        fits.push(fit);
        values.push(v);
        remainder = next;
        rem_norm = next_norm;
    }

    if fits.len() > 1 {
        for _sweep in 0..BACKFIT_SWEEPS {
            let mut moved = T::zero();
            for j in 0..fits.len() {
                let mut target = input.to_vec();
                for (i, v) in values.iter().enumerate() {
                    if i != j {
                        target = sub(&target, v);
                    }
                }
                let fit = fitter.refine(&target, fits[j].scale);
                moved = moved.max((fit.scale / fits[j].scale).ln().abs());
                values[j] = fitter.bubble(fit.scale);
                fits[j] = fit;
            }
            if moved < T::lit(SCALE_TOL) {
                break;
            }
        }
        remainder = input.to_vec();
        for v in &values {
            remainder = sub(&remainder, v);
        }
        rem_norm = grid.h1dot_norm_sq(&remainder);
    }

    let mut profiles = Vec::with_capacity(fits.len());
    for (fit, v) in fits.into_iter().zip(values) {
        let pf = RadialField::new(grid.clone(), v, T::zero())?;
        profiles.push(Profile {
            scale: fit.scale,
            fit,
            h1_norm_sq: pf.h1dot_norm_sq(),
            energy: energy(&pf).total,
            values: pf.into_values(),
        });
    }

    let rem_field = RadialField::new(grid.clone(), remainder.clone(), field.time())?;
    let h1_residual = input_norm - profiles.iter().map(|p| p.h1_norm_sq).sum::<T>() - rem_norm;
    let energy_residual = energy(field).total
        - profiles.iter().map(|p| p.energy).sum::<T>()
        - energy(&rem_field).total;
    let mut separations = Vec::new();
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            let (a, b) = (profiles[i].scale, profiles[j].scale);
            separations.push(ScaleSeparation {
                i,
                j,
                scale_ratio_sum: a / b + b / a,
                center_term: T::zero(),
            });
        }
    }
    Ok(Decomposition {
        profiles,
        remainder,
        input_h1_norm_sq: input_norm,
        remainder_h1_norm_sq: rem_norm,
        h1_residual,
        h1_residual_rel: if input_norm.is_zero() {
            T::zero()
        } else {
            h1_residual / input_norm
        },
        energy_residual,
        separations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulationSeries<T> {
    pub times: Vec<T>,
    pub fits: Vec<BubbleFit<T>>,
    /// Whether `lambda(t_k)` is non-decreasing over the last ten checkpoints
    /// (an observation, not a test). `None` with fewer than two fits.
    pub concentrating: Option<bool>,
}

/// Fits a bubble to every stored checkpoint. Identically zero checkpoints are skipped.
pub fn track_modulation<T: Scalar>(record: &RunRecord<T>) -> Result<ModulationSeries<T>> {
    if record.checkpoints.is_empty() {
        return Err(Error::NoCheckpoints);
    }
    let fitter = Fitter::new(&record.grid)?;
    let mut times = Vec::new();
    let mut fits = Vec::new();
    for cp in &record.checkpoints {
        match fitter.fit(cp.values()) {
            Ok(f) => {
                times.push(cp.time());
                fits.push(f);
            }
            Err(Error::ZeroField) => {}
            Err(e) => return Err(e),
        }
    }
    let tail = &fits[fits.len().saturating_sub(10)..];
    let concentrating =
        (tail.len() >= 2).then(|| tail.windows(2).all(|w| w[1].scale >= w[0].scale));
    Ok(ModulationSeries {
        times,
        fits,
        concentrating,
    })
}
