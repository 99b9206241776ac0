use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use heatlab_core::variational::{energy, sobolev_quotient, trapping_margin, virial_k};
use heatlab_core::*;

const G_EXACT: f64 = 32.0 * PI * PI / 3.0;

fn grid(d: usize, r_max: f64, n: usize) -> Arc<Grid> {
    Arc::new(RadialGrid::new(d, r_max, n, Grading::Graded { half_radius: 5.0 }).unwrap())
}

fn default_grid() -> Arc<Grid> {
    Arc::new(GridSpec::default().build().unwrap())
}

fn w_field(g: &Arc<Grid>, scale: f64, eps: f64) -> Field {
    let w = GroundState::<f64>::new(g.dim(), scale).unwrap();
    RadialField::from_fn(g.clone(), |r| eps * w.eval(r))
}

#[test]
fn ball_volumes() {
    // a sampled indicator is only first-order accurate, so use a fine grid
    let uniform = |d| Arc::new(RadialGrid::<f64>::new(d, 2.0, 8192, Grading::Uniform).unwrap());
    let g4 = uniform(4);
    let v = g4
        .integrate(&g4.sample(|r| if r <= 1.0 { 1.0 } else { 0.0 }))
        .unwrap();
    assert_relative_eq!(v, PI * PI / 2.0, max_relative = 1e-3);
    let g3 = uniform(3);
    let v = g3
        .integrate(&g3.sample(|r| if r <= 1.0 { 1.0 } else { 0.0 }))
        .unwrap();
    assert_relative_eq!(v, 4.0 * PI / 3.0, max_relative = 1e-3);
}

#[test]
fn ground_state_integrals() {
    let g = default_grid();
    let w = w_field(&g, 1.0, 1.0);
    assert_relative_eq!(w.critical_power_integral(), G_EXACT, max_relative = 1e-3);
    assert_relative_eq!(w.h1dot_norm_sq(), G_EXACT, max_relative = 5e-3);
    assert_eq!(w.linf_norm(), 1.0);
}

#[test]
fn laplacian_of_ground_state_matches_cubic() {
    let g = default_grid();
    let w = w_field(&g, 1.0, 1.0);
    let lap = w.laplacian();
    for (i, &r) in g.nodes().iter().enumerate().take(g.len() - 1) {
        if r < 10.0 {
            let exact = -w.values()[i].powi(3);
            assert!((lap.values()[i] - exact).abs() < 1e-3, "r = {r}");
        }
    }
}

#[test]
fn static_residual_converges_at_second_order() {
    let mut prev = f64::INFINITY;
    for n in [512, 1024, 2048, 4096] {
        let res = variational::static_residual(&w_field(&grid(4, 100.0, n), 1.0, 1.0)).unwrap();
        assert!(res * 3.0 <= prev, "N = {n}: {res:e} after {prev:e}");
        prev = res;
    }
    let d3 = grid(3, 1e4, 2048);
    assert!(variational::static_residual(&w_field(&d3, 1.0, 1.0)).unwrap() < 1e-3);
}

#[test]
fn hdot1_norm_is_scale_invariant() {
    let g = default_grid();
    let base = w_field(&g, 1.0, 1.0).h1dot_norm_sq();
    for lambda in [0.5, 0.75, 1.5, 2.0] {
        let n = w_field(&g, lambda, 1.0).h1dot_norm_sq();
        assert_relative_eq!(n, base, max_relative = 1e-2);
    }
}

#[test]
fn energy_virial_and_sobolev_examples() {
    let g = default_grid();
    let zero = RadialField::zeros(g.clone());
    assert_eq!(energy(&zero).total, 0.0);
    assert_eq!(virial_k(&zero), 0.0);

    let w = w_field(&g, 1.0, 1.0);
    assert_relative_eq!(energy(&w).total, G_EXACT / 4.0, max_relative = 5e-3);
    assert!(virial_k(&w).abs() < 1e-3 * G_EXACT * 3.0);

    let half = w_field(&g, 1.0, 0.5);
    assert_relative_eq!(energy(&half).total, 11.5146, max_relative = 5e-3);
    assert_relative_eq!(virial_k(&half), 19.74, max_relative = 5e-3);

    let c = G_EXACT.powf(-0.25);
    assert_relative_eq!(sobolev_quotient(&w).unwrap(), c, max_relative = 5e-3);
    let big = grid(4, 1e4, 8192);
    assert_relative_eq!(
        sobolev_quotient(&w_field(&big, 1.0, 1.0)).unwrap(),
        c,
        max_relative = 1e-3
    );
    assert_relative_eq!(
        sobolev_quotient(&w_field(&g, 2.0, 1.0)).unwrap(),
        c,
        max_relative = 1e-2
    );
    let gauss = RadialField::from_fn(g.clone(), |r| (-r * r).exp());
    assert!(sobolev_quotient(&gauss).unwrap() < c * 0.99);
    assert!(matches!(sobolev_quotient(&zero), Err(Error::ZeroField)));
}

#[test]
fn energy_of_scaled_ground_state_peaks_at_one() {
    let g = default_grid();
    let gw = w_field(&g, 1.0, 1.0).h1dot_norm_sq();
    let mut best = f64::NEG_INFINITY;
    for eps in [0.25, 0.5, 0.75, 1.0] {
        let e = energy(&w_field(&g, 1.0, eps)).total;
        assert_relative_eq!(
            e,
            (eps * eps / 2.0 - eps.powi(4) / 4.0) * gw,
            max_relative = 5e-3
        );
        best = best.max(e);
    }
    assert_relative_eq!(best, energy(&w_field(&g, 1.0, 1.0)).total);
}

#[test]
fn constants_and_threshold_curves() {
    let g = default_grid();
    let c = Constants::on_grid(&g).unwrap();
    assert_relative_eq!(c.grad_w_sq, G_EXACT, max_relative = 5e-3);
    assert_relative_eq!(c.energy_w, c.grad_w_sq / 4.0, max_relative = 1e-12);
    assert_relative_eq!(c.sobolev_c, c.grad_w_sq.powf(-0.25), max_relative = 1e-12);
    assert_relative_eq!(c.f_curve(c.grad_w_sq), c.energy_w, max_relative = 1e-6);
    assert_relative_eq!(
        c.e_inverse(c.energy_w).unwrap(),
        c.grad_w_sq,
        max_relative = 1e-6
    );
    assert!(c.g_of_e(c.energy_w).unwrap().abs() < 1e-6 * c.grad_w_sq);
    assert_relative_eq!(
        c.g_of_e(0.0).unwrap(),
        2.0 * c.grad_w_sq,
        max_relative = 1e-10
    );
    assert_relative_eq!(c.g_of_e(0.0).unwrap(), 210.55, max_relative = 5e-3);
    assert!(matches!(
        c.e_inverse(c.energy_w * 1.01),
        Err(Error::DomainViolation(_))
    ));
    assert!(matches!(
        c.g_of_e(c.energy_w * 1.01),
        Err(Error::DomainViolation(_))
    ));
}

#[test]
fn threshold_curve_properties() {
    let c = Constants::on_grid(&default_grid()).unwrap();
    // round trip on the decreasing branch
    for k in 0..=40 {
        let e = c.energy_w * (1.0 - 11.0 * k as f64 / 40.0);
        let y = c.e_inverse(e).unwrap();
        assert!(y >= c.grad_w_sq * (1.0 - 1e-12));
        assert!((c.f_curve(y) - e).abs() <= 1e-10 * c.energy_w.max(e.abs()));
    }
    // concavity of f
    let h = 1.0;
    for k in 1..100 {
        let y = 4.0 * k as f64;
        assert!(c.f_curve(y + h) - 2.0 * c.f_curve(y) + c.f_curve(y - h) <= 1e-9);
    }
    // g decreasing with slope below -2*
    let mut e = -10.0 * c.energy_w;
    while e < c.energy_w - 0.5 {
        let slope = c.g_of_e(e + 0.5).unwrap() - c.g_of_e(e).unwrap();
        assert!(slope / 0.5 <= -4.0 + 1e-6, "slope {} at {e}", slope / 0.5);
        e += 0.5;
    }
}

#[test]
fn trapping_margin_examples() {
    let big = grid(4, 1e4, 8192);
    let c = Constants::on_grid(&big).unwrap();
    assert!(trapping_margin(&w_field(&big, 1.0, 0.5), &c).unwrap().abs() < 1e-6);
    let g = default_grid();
    let c = Constants::on_grid(&g).unwrap();
    assert!(matches!(
        trapping_margin(&RadialField::zeros(g.clone()), &c),
        Err(Error::ZeroField)
    ));
    let gauss = RadialField::from_fn(g.clone(), |r| 0.5 * (-r * r).exp());
    assert!(trapping_margin(&gauss, &c).unwrap() > 0.0);
}

#[test]
fn trapped_fields_satisfy_the_sobolev_chain() {
    let g = default_grid();
    let c = Constants::on_grid(&g).unwrap();
    for (a, s) in [(0.5, 1.0), (1.5, 0.5), (2.0, 2.0), (3.0, 1.0)] {
        let u = RadialField::from_fn(g.clone(), |r| a * (-(r / s).powi(2)).exp());
        let gu = u.h1dot_norm_sq();
        if gu < c.grad_w_sq {
            assert!(virial_k(&u) >= (1.0 - gu / c.grad_w_sq) * gu - 1e-6 * c.grad_w_sq);
        }
    }
}

#[test]
fn three_dimensional_constants() {
    // W = (1 + r^2/3)^{-1/2}; the slow tail needs a large domain to pass the gate
    let g = grid(3, 1e6, 8192);
    let c = Constants::on_grid(&g).unwrap();
    let (oracle, _) = variational::reference_integrals(3);
    assert_relative_eq!(c.grad_w_sq, oracle, max_relative = 5e-3);
    assert_relative_eq!(c.energy_w, c.grad_w_sq / 3.0, max_relative = 1e-12);
}

#[test]
fn default_grid_constants_are_quick() {
    let t0 = std::time::Instant::now();
    let c = Constants::on_grid(&default_grid()).unwrap();
    assert!(
        c.grad_w_sq_err < 5e-3
            && c.energy_w_err < 5e-3
            && c.crit_integral_err < 5e-3
            && c.sobolev_c_err < 5e-3
    );
    assert!(t0.elapsed().as_secs_f64() < 1.0);
}
