//! Radially symmetric functions on R^d: nodes, quadrature, and the discrete
//! operators acting on them.
//!
//! The discretisation is a vertex-centred finite-volume scheme. Node `i` owns the
//! shell between the neighbouring edge midpoints, so the quadrature weight `w_i`
//! is the exact volume of that shell and the Laplacian is the net flux through
//! its two bounding spheres divided by `w_i`. Two consequences are used all over
//! the crate:
//!
//! * `-sum_i w_i v_i (Lap u)_i` equals the edge-based Dirichlet form `D(u, v)`
//!   exactly whenever `v` vanishes at `R_max`, so the semi-discrete equation is
//!   an exact gradient flow of the discrete energy;
//! * the stencil reproduces `Lap r^2 = 2d` exactly on any node distribution.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::sphere_area;
use crate::Scalar;

/// Node distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Grading<T> {
    Uniform,
    /// `r(xi) = a sinh(b xi)`, tuned so that half of the nodes lie in `r <= half_radius`.
    /// Spacing is nearly constant at the origin and grows geometrically outwards.
    Graded {
        half_radius: T,
    },
}

/// Condition imposed at the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `u(R_max) = 0`; the outermost node is not a degree of freedom.
    #[default]
    Dirichlet,
    /// Zero flux through the sphere `r = R_max`.
    Neumann,
}

/// Serializable grid description, as it appears in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub d: usize,
    pub r_max: f64,
    pub n: usize,
    pub grading: Grading<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            d: 4,
            r_max: 100.0,
            n: 2048,
            grading: Grading::Graded { half_radius: 5.0 },
        }
    }
}

impl GridSpec {
    pub fn build<T: Scalar>(&self) -> Result<RadialGrid<T>> {
        let grading = match self.grading {
            Grading::Uniform => Grading::Uniform,
            Grading::Graded { half_radius } => Grading::Graded {
                half_radius: T::lit(half_radius),
            },
        };
        RadialGrid::new(self.d, T::lit(self.r_max), self.n, grading)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T> {
    dim: usize,
    r_max: T,
    grading: Grading<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
    /// `omega * m_e^{d-1} / h_e` for the edge between nodes `e` and `e + 1`.
    edge_coef: Vec<T>,
    omega: T,
}

impl<T: Scalar> RadialGrid<T> {
    /// Builds the grid (`make_grid`).
    pub fn new(d: usize, r_max: T, n: usize, grading: Grading<T>) -> Result<Self> {
        if d != 3 && d != 4 {
            return Err(Error::InvalidDimension(d));
        }
        if n < 16 {
            return Err(Error::TooFewNodes(n));
        }
        if !(r_max > T::zero()) || !r_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        let last = T::from_usize_lossy(n - 1);
        let nodes: Vec<T> = match grading {
            Grading::Uniform => (0..n)
                .map(|i| r_max * T::from_usize_lossy(i) / last)
                .collect(),
            Grading::Graded { half_radius } => {
                let two = T::lit(2.0);
                if !(half_radius > T::zero()) || !(r_max > two * half_radius) {
                    return Err(Error::InvalidParameter(format!(
                        "graded grid needs 0 < half_radius < r_max / 2, got {half_radius}"
                    )));
                }
                // a sinh(b) = R, a sinh(b/2) = r_h  =>  cosh(b/2) = R / (2 r_h)
                let b = two * (r_max / (two * half_radius)).acosh();
                let a = r_max / b.sinh();
                (0..n)
                    .map(|i| a * (b * T::from_usize_lossy(i) / last).sinh())
                    .collect()
            }
        };
        let mut nodes = nodes;
        nodes[0] = T::zero();
        nodes[n - 1] = r_max;
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "node spacing underflows; reduce n or the grading".into(),
            ));
        }

        let omega: T = sphere_area(d);
        let dt = T::from_usize_lossy(d);
        let half = T::lit(0.5);
        let mids: Vec<T> = nodes.windows(2).map(|w| half * (w[0] + w[1])).collect();
        let edge_coef = nodes
            .windows(2)
            .zip(&mids)
            .map(|(w, &m)| omega * m.powi(d as i32 - 1) / (w[1] - w[0]))
            .collect();
        let shell = |lo: T, hi: T| omega / dt * (hi.powi(d as i32) - lo.powi(d as i32));
        let weights = (0..n)
            .map(|i| {
                let lo = if i == 0 { T::zero() } else { mids[i - 1] };
                let hi = if i == n - 1 { r_max } else { mids[i] };
                shell(lo, hi)
            })
            .collect();

        Ok(Self {
            dim: d,
            r_max,
            grading,
            nodes,
            weights,
            edge_coef,
            omega,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn grading(&self) -> Grading<T> {
        self.grading
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Shell volumes; `sum_i w_i f(r_i)` approximates `int_{B_Rmax} f dx`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn edge_coefficients(&self) -> &[T] {
        &self.edge_coef
    }

    /// Surface area of the unit sphere in R^d.
    pub fn sphere_area(&self) -> T {
        self.omega
    }

    /// Critical Sobolev exponent `2* = 2d / (d - 2)`.
    pub fn critical_exponent(&self) -> T {
        let d = T::from_usize_lossy(self.dim);
        T::lit(2.0) * d / (d - T::lit(2.0))
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            d: self.dim,
            r_max: self.r_max.as_f64(),
            n: self.len(),
            grading: match self.grading {
                Grading::Uniform => Grading::Uniform,
                Grading::Graded { half_radius } => Grading::Graded {
                    half_radius: half_radius.as_f64(),
                },
            },
        }
    }

    pub fn sample(&self, f: impl Fn(T) -> T) -> Vec<T> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// `sum_i w_i samples_i`.
    pub fn integrate(&self, samples: &[T]) -> Result<T> {
        self.check_len(samples.len())?;
        Ok(self.weighted_sum(samples.iter().copied()))
    }

    pub(crate) fn weighted_sum(&self, samples: impl Iterator<Item = T>) -> T {
        self.weights
            .iter()
            .zip(samples)
            .fold(T::zero(), |acc, (&w, s)| acc + w * s)
    }

    /// `sum_i w_i |u_i|^p`.
    pub fn lp_power(&self, u: &[T], p: T) -> T {
        self.weighted_sum(u.iter().map(|x| x.abs().powf(p)))
    }

    /// Edge-based Dirichlet form `D(u, v) = sum_e c_e (u_{e+1} - u_e)(v_{e+1} - v_e)`.
    pub fn dirichlet_form(&self, u: &[T], v: &[T]) -> T {
        self.edge_coef
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (e, &c)| {
                acc + c * (u[e + 1] - u[e]) * (v[e + 1] - v[e])
            })
    }

    pub fn h1dot_norm_sq(&self, u: &[T]) -> T {
        self.edge_coef
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (e, &c)| {
                let du = u[e + 1] - u[e];
                acc + c * du * du
            })
    }

    /// Writes the radial Laplacian of `u` into `out`.
    ///
    /// Under [`Boundary::Dirichlet`] the outermost entry is 0 (the boundary node
    /// carries no dynamics); under [`Boundary::Neumann`] the outer shell has no
    /// outward flux.
    pub fn laplacian_into(&self, u: &[T], out: &mut [T], boundary: Boundary) {
        let n = self.len();
        let c = &self.edge_coef;
        for i in 0..n {
            let flux_out = if i + 1 < n {
                c[i] * (u[i + 1] - u[i])
            } else {
                T::zero()
            };
            let flux_in = if i > 0 {
                c[i - 1] * (u[i] - u[i - 1])
            } else {
                T::zero()
            };
            out[i] = (flux_out - flux_in) / self.weights[i];
        }
        if boundary == Boundary::Dirichlet {
            out[n - 1] = T::zero();
        }
    }

    /// Tridiagonal coefficients of the Laplacian: `(lower, diag, upper)` per row.
    pub fn laplacian_row(&self, i: usize, boundary: Boundary) -> (T, T, T) {
        let n = self.len();
        if i == n - 1 && boundary == Boundary::Dirichlet {
            return (T::zero(), T::zero(), T::zero());
        }
        let w = self.weights[i];
        let lo = if i > 0 {
            self.edge_coef[i - 1] / w
        } else {
            T::zero()
        };
        let up = if i + 1 < n {
            self.edge_coef[i] / w
        } else {
            T::zero()
        };
        (lo, -(lo + up), up)
    }

    /// Pointwise radial derivative: second-order centred differences in the
    /// interior, 0 at the origin by symmetry, one-sided at `R_max`.
    pub fn gradient(&self, u: &[T]) -> Vec<T> {
        let n = self.len();
        let r = &self.nodes;
        let mut g = vec![T::zero(); n];
        for i in 1..n - 1 {
            let hm = r[i] - r[i - 1];
            let hp = r[i + 1] - r[i];
            g[i] =
                (hm * hm * (u[i + 1] - u[i]) + hp * hp * (u[i] - u[i - 1])) / (hm * hp * (hm + hp));
        }
        g[n - 1] = (u[n - 1] - u[n - 2]) / (r[n - 1] - r[n - 2]);
        g
    }

    /// Monotone (Fritsch-Carlson) piecewise-cubic interpolation of nodal
    /// `values` at `queries`. The slope at the origin is pinned to 0 by symmetry
    /// and values beyond `R_max` are 0.
    pub fn interpolate_monotone(&self, values: &[T], queries: &[T]) -> Vec<T> {
        let slopes = self.monotone_slopes(values);
        let r = &self.nodes;
        let n = r.len();
        queries
            .iter()
            .map(|&q| {
                if q > self.r_max || q < T::zero() {
                    return T::zero();
                }
                let k = r.partition_point(|&x| x <= q).clamp(1, n - 1) - 1;
                let h = r[k + 1] - r[k];
                let s = (q - r[k]) / h;
                let s2 = s * s;
                let s3 = s2 * s;
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                let h00 = two * s3 - three * s2 + T::one();
                let h10 = s3 - two * s2 + s;
                let h01 = three * s2 - two * s3;
                let h11 = s3 - s2;
                h00 * values[k]
                    + h10 * h * slopes[k]
                    + h01 * values[k + 1]
                    + h11 * h * slopes[k + 1]
            })
            .collect()
    }

    fn monotone_slopes(&self, y: &[T]) -> Vec<T> {
        let r = &self.nodes;
        let n = r.len();
        let h: Vec<T> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut m = vec![T::zero(); n];
        for k in 1..n - 1 {
            let (d0, d1) = (delta[k - 1], delta[k]);
            if d0 * d1 <= T::zero() {
                continue;
            }
            let two = T::lit(2.0);
            let w1 = two * h[k] + h[k - 1];
            let w2 = h[k] + two * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
        m[n - 1] = delta[n - 2];
        m
    }
}

/// Sampled radial function at one time.
#[derive(Debug, Clone)]
pub struct RadialField<T> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<T>,
    time: T,
}

impl<T: Scalar> RadialField<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, values: Vec<T>, time: T) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(time.as_f64()));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn(grid: Arc<RadialGrid<T>>, f: impl Fn(T) -> T) -> Self {
        let values = grid.sample(f);
        Self {
            grid,
            values,
            time: T::zero(),
        }
    }

    pub fn zeros(grid: Arc<RadialGrid<T>>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![T::zero(); n],
            time: T::zero(),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn with_time(mut self, t: T) -> Self {
        self.time = t;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    /// Radial Laplacian with the Dirichlet closure at `R_max`.
    pub fn laplacian(&self) -> RadialField<T> {
        let mut out = vec![T::zero(); self.values.len()];
        self.grid
            .laplacian_into(&self.values, &mut out, Boundary::Dirichlet);
        RadialField {
            grid: self.grid.clone(),
            values: out,
            time: self.time,
        }
    }

    pub fn h1dot_norm_sq(&self) -> T {
        self.grid.h1dot_norm_sq(&self.values)
    }

    pub fn l2_norm_sq(&self) -> T {
        self.grid.weighted_sum(self.values.iter().map(|&x| x * x))
    }

    pub fn l4_norm_4th(&self) -> T {
        self.grid
            .weighted_sum(self.values.iter().map(|&x| (x * x) * (x * x)))
    }

    /// `int |u|^{2*}`, the potential-energy integrand at the critical power.
    pub fn critical_power_integral(&self) -> T {
        if self.grid.dim() == 4 {
            self.l4_norm_4th()
        } else {
            self.grid
                .lp_power(&self.values, self.grid.critical_exponent())
        }
    }

    /// `||u||_{L^p}` for finite `p >= 1`, or the sup norm when `p` is infinite.
    pub fn lp_norm(&self, p: T) -> T {
        if p.is_infinite() {
            return self.linf_norm();
        }
        self.grid.lp_power(&self.values, p).powf(p.recip())
    }

    pub fn linf_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// One-sided difference quotient at the origin; vanishes to stencil accuracy
    /// for even functions.
    pub fn origin_slope(&self) -> T {
        let r1 = self.grid.nodes()[1];
        (self.values[1] - self.values[0]) / r1
    }

    pub fn axpy(&mut self, a: T, other: &[T]) {
        for (x, &y) in self.values.iter_mut().zip(other) {
            *x = *x + a * y;
        }
    }
}
