//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the solver is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot represent it at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Gamma function on positive half-integers and integers, which is all the
/// dimension-dependent constants need.
pub(crate) fn gamma_half_integer<T: Scalar>(x2: usize) -> T {
    // x = x2 / 2
    debug_assert!(x2 >= 1);
    if x2.is_multiple_of(2) {
        let n = x2 / 2;
        (1..n).fold(T::one(), |acc, k| acc * T::from_usize_lossy(k))
    } else {
        // Gamma(1/2) = sqrt(pi), Gamma(k + 1/2) = (k - 1/2) Gamma(k - 1/2)
        let mut g = T::PI().sqrt();
        let mut k2 = 1;
        while k2 < x2 {
            g = g * T::from_usize_lossy(k2) / T::lit(2.0);
            k2 += 2;
        }
        g
    }
}

/// Surface area of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
pub fn sphere_area<T: Scalar>(d: usize) -> T {
    let half_d = T::from_usize_lossy(d) / T::lit(2.0);
    T::lit(2.0) * T::PI().powf(half_d) / gamma_half_integer::<T>(d)
}

/// Volume of the unit ball in R^d: pi^{d/2} / Gamma(d/2 + 1).
pub fn ball_volume<T: Scalar>(d: usize) -> T {
    let half_d = T::from_usize_lossy(d) / T::lit(2.0);
    T::PI().powf(half_d) / gamma_half_integer::<T>(d + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_constants() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area::<f64>(4) - 2.0 * pi * pi).abs() < 1e-12);
        assert!((sphere_area::<f64>(3) - 4.0 * pi).abs() < 1e-12);
        assert!((ball_volume::<f64>(4) - pi * pi / 2.0).abs() < 1e-12);
        assert!((ball_volume::<f64>(3) - 4.0 * pi / 3.0).abs() < 1e-12);
    }
}
