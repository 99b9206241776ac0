//! Adaptive Gauss-Kronrod (7/15) quadrature on intervals, used as the
//! grid-independent reference for the variational constants, and a quadratic
//! rule for tabulated time series.

use crate::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to the requested absolute/relative tolerance.
/// Returns `(value, error_estimate)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let mut err = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        let scale = (hi - lo) / (b - a);
        if e <= (abs_tol * scale).max(rel_tol * v.abs()) || depth >= 48 {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    (total, err)
}

/// Integrates over `[0, r_end]` by splitting at powers of ten, which suits
/// algebraically decaying integrands.
pub fn integrate_radial(f: impl Fn(f64) -> f64, r_end: f64, rel_tol: f64) -> (f64, f64) {
    let mut edges = vec![0.0];
    let mut x = 1.0;
    while x < r_end {
        edges.push(x);
        x *= 10.0;
    }
    edges.push(r_end);
    edges.windows(2).fold((0.0, 0.0), |(v, e), w| {
        let (dv, de) = integrate(&f, w[0], w[1], 1e-300, rel_tol);
        (v + dv, e + de)
    })
}

/// Integral of tabulated values over strictly increasing abscissae by piecewise
/// quadratic interpolation (Simpson's rule generalised to uneven spacing); a
/// trailing odd interval uses the parabola through the last three points, and two
/// points fall back to the trapezoid.
pub fn integrate_samples<T: Scalar>(t: &[T], f: &[T]) -> T {
    assert_eq!(t.len(), f.len(), "abscissae and values differ in length");
    let n = t.len();
    if n < 2 {
        return T::zero();
    }
    if n == 2 {
        return T::lit(0.5) * (t[1] - t[0]) * (f[0] + f[1]);
    }
    let six = T::lit(6.0);
    let two = T::lit(2.0);
    let mut sum = T::zero();
    let mut k = 0;
    while k + 2 < n {
        let (h0, h1) = (t[k + 1] - t[k], t[k + 2] - t[k + 1]);
        let h = h0 + h1;
        sum = sum
            + h / six
                * ((two - h1 / h0) * f[k]
                    + h * h / (h0 * h1) * f[k + 1]
                    + (two - h0 / h1) * f[k + 2]);
        k += 2;
    }
    if k + 1 < n {
        let (h0, h1) = (t[k] - t[k - 1], t[k + 1] - t[k]);
        let three = T::lit(3.0);
        sum = sum - h1 * h1 * h1 / (six * h0 * (h0 + h1)) * f[k - 1]
            + h1 * (three * h0 + h1) / (six * h0) * f[k]
            + h1 * (three * h0 + two * h1) / (six * (h0 + h1)) * f[k + 1];
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_gaussian() {
        let (v, _) = integrate(|x| x * x * x, 0.0, 2.0, 1e-14, 1e-14);
        assert!((v - 4.0).abs() < 1e-12);
        let (v, _) = integrate_radial(|r| (-r * r).exp(), 50.0, 1e-13);
        assert!((v - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn beta_function_integral() {
        // int_0^inf s (1+s)^-4 ds = B(2,2) = 1/6
        let (v, _) = integrate_radial(|s| s * (1.0 + s).powi(-4), 1e7, 1e-13);
        assert!((v - 1.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn tabulated_quadratic_rule() {
        // exact for quadratics on uneven abscissae, both parities
        let t = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let f: Vec<f64> = t.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let exact = |b: f64| b * b * b - 0.5 * b * b + 2.0 * b;
        assert!((integrate_samples(&t, &f) - exact(1.0)).abs() < 1e-13);
        assert!((integrate_samples(&t[..5], &f[..5]) - exact(0.9)).abs() < 1e-13);
        assert!((integrate_samples(&t[..2], &[1.0, 3.0]) - 0.2).abs() < 1e-15);
        assert_eq!(integrate_samples::<f64>(&[], &[]), 0.0);
    }
}
