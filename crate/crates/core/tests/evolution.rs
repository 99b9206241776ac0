use std::sync::Arc;

use approx::assert_relative_eq;
use heatlab_core::diagnostics::*;
use heatlab_core::evolve::{heat_semigroup_apply, ImexStepper};
use heatlab_core::*;

fn grid(r_max: f64, n: usize) -> Arc<Grid> {
    Arc::new(RadialGrid::new(4, r_max, n, Grading::Graded { half_radius: 5.0 }).unwrap())
}

fn gaussian(g: &Arc<Grid>, a: f64) -> Field {
    RadialField::from_fn(g.clone(), |r| a * (-r * r).exp())
}

fn run(u0: &Field, cfg: EvolveConfig<f64>) -> Record {
    simulate(u0, &cfg, &mut |_| {}).unwrap()
}

#[test]
fn zero_is_a_fixed_point() {
    let g = grid(100.0, 256);
    let mut st = ImexStepper::new(g.clone(), Boundary::Dirichlet, true);
    let mut out = vec![1.0; g.len()];
    st.step(&vec![0.0; g.len()], 0.1, &mut out).unwrap();
    assert!(out.iter().all(|&x| x == 0.0));

    let rec = run(
        &RadialField::zeros(g),
        EvolveConfig {
            t_final: 1.0,
            ..Default::default()
        },
    );
    assert_eq!(rec.verdict.kind, VerdictKind::ReachedTFinal);
    for s in &rec.samples {
        assert_eq!(
            [
                s.energy,
                s.kinetic,
                s.potential,
                s.l2_sq,
                s.l4_4th,
                s.linf,
                s.k,
                s.s_accum,
                s.grad_l3_accum,
                s.ut_accum
            ],
            [0.0; 10]
        );
    }
}

#[test]
fn ground_state_is_stationary_under_one_step() {
    for n in [2048, 4096, 8192] {
        let g = grid(1e4, n);
        // W restricted to the Dirichlet condition at R_max
        let mut w = GroundState::<f64>::unit(4).unwrap().sample(g.clone());
        *w.values_mut().last_mut().unwrap() = 0.0;
        let mut st = ImexStepper::new(g.clone(), Boundary::Dirichlet, true);
        let mut out = vec![0.0; g.len()];
        st.step(w.values(), 1e-3, &mut out).unwrap();
        let diff: Vec<f64> = out.iter().zip(w.values()).map(|(a, b)| a - b).collect();
        let rel = (g.h1dot_norm_sq(&diff) / w.h1dot_norm_sq()).sqrt();
        assert!(rel < 1e-6, "n = {n}: {rel}");
        assert_eq!(*out.last().unwrap(), 0.0);
    }
}

#[test]
fn constant_state_follows_the_ode() {
    // no-flux boundary: u' = u^3, u(t) = c / sqrt(1 - 2 c^2 t)
    let g = grid(100.0, 64);
    let c = 0.8;
    let exact = |t: f64| c / (1.0 - 2.0 * c * c * t).sqrt();
    let mut st = ImexStepper::new(g.clone(), Boundary::Neumann, true);
    let mut out = vec![0.0; g.len()];
    let mut errs = Vec::new();
    for dt in [0.02, 0.01, 0.005] {
        st.step(&vec![c; g.len()], dt, &mut out).unwrap();
        assert!(out.iter().all(|&x| (x - out[0]).abs() < 1e-12));
        errs.push((out[0] - exact(dt)).abs());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 2.7, "local order {order}");
    }
}

#[test]
fn heat_flow_matches_the_gaussian_solution() {
    let g = grid(100.0, 2048);
    let u0 = gaussian(&g, 1.0);
    assert_eq!(
        heat_semigroup_apply(&u0, 0.0, 1e-8).unwrap().values(),
        u0.values()
    );
    let mut u = u0.clone();
    let mut t = 0.0;
    for t_next in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        u = heat_semigroup_apply(&u, t_next - t, 1e-8).unwrap();
        t = t_next;
        let exact = (1.0 + 4.0 * t).powi(-2);
        assert_relative_eq!(u.linf_norm(), exact, max_relative = 1e-2);
        assert!(u.l2_norm_sq() <= u0.l2_norm_sq());
    }
}

#[test]
fn heat_flow_sup_norm_decays_like_t_to_minus_two() {
    let g = grid(100.0, 2048);
    let times: Vec<f64> = (0..=10)
        .map(|k| 10.0 * 10f64.powf(k as f64 / 10.0))
        .collect();
    let mut u = heat_semigroup_apply(&gaussian(&g, 1.0), times[0], 1e-8).unwrap();
    let mut pts = vec![(times[0].ln(), u.linf_norm().ln())];
    for w in times.windows(2) {
        u = heat_semigroup_apply(&u, w[1] - w[0], 1e-8).unwrap();
        pts.push((w[1].ln(), u.linf_norm().ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 2.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn small_data_decays() {
    let g = grid(100.0, 2048);
    let rec = run(
        &gaussian(&g, 0.1),
        EvolveConfig {
            t_final: 50.0,
            decay_floor: Some(1e-6),
            ..Default::default()
        },
    );
    assert_eq!(rec.verdict.kind, VerdictKind::Decayed);
    assert!(rec.last().grad_sq().sqrt() < 1e-3 * rec.initial().grad_sq().sqrt());
    assert!(decay_verdict(&rec, 1e-2).unwrap());
    for w in rec.samples.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-12);
        assert!(w[1].ut_accum >= w[0].ut_accum);
        assert!(w[1].s_accum >= w[0].s_accum);
        assert!(w[1].grad_l3_accum >= w[0].grad_l3_accum);
    }
}

#[test]
fn negative_energy_gaussian_blows_up() {
    let g = grid(100.0, 2048);
    let u0 = gaussian(&g, 7.0);
    assert!(variational::energy(&u0).total < 0.0);
    let rec = run(
        &u0,
        EvolveConfig {
            t_final: 20.0,
            ..Default::default()
        },
    );
    assert_eq!(
        rec.verdict.kind,
        VerdictKind::BlewUp,
        "{}",
        rec.verdict.reason
    );
    assert!(rec.verdict.terminal_time > 0.0 && rec.verdict.terminal_time < 1.0);
    assert!(matches!(
        decay_verdict(&rec, 1e-2),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn ceiling_alone_is_inconclusive() {
    let g = grid(100.0, 512);
    // the datum already exceeds the ceiling but the step never collapses on [0, 1e-6]
    let u0 = gaussian(&g, 0.5);
    let rec = run(
        &u0,
        EvolveConfig {
            t_final: 1e-3,
            linf_ceiling: 0.1,
            ..Default::default()
        },
    );
    assert_eq!(rec.verdict.kind, VerdictKind::Inconclusive);
}

#[test]
fn config_invariants_are_enforced() {
    let g = grid(100.0, 256);
    let u0 = gaussian(&g, 0.1);
    for cfg in [
        EvolveConfig {
            dt_min: 1e-3,
            dt_init: 1e-4,
            ..Default::default()
        },
        EvolveConfig {
            dt_max: 1e-5,
            ..Default::default()
        },
        EvolveConfig {
            error_tol: 0.0,
            ..Default::default()
        },
        EvolveConfig {
            t_final: -1.0,
            ..Default::default()
        },
        EvolveConfig {
            linf_ceiling: f64::NAN,
            ..Default::default()
        },
    ] {
        assert!(matches!(
            simulate(&u0, &cfg, &mut |_| {}),
            Err(Error::InvalidParameter(_))
        ));
    }
}

#[test]
fn dissipation_identities_on_small_data() {
    let g = grid(100.0, 2048);
    let rec = run(
        &gaussian(&g, 0.1),
        EvolveConfig {
            t_final: 1.0,
            ..Default::default()
        },
    );
    let s0 = rec.initial();
    assert!(energy_dissipation_residual(&rec, 0.0, 1.0).unwrap().abs() <= 1e-4 * s0.energy.abs());
    assert!(l2_dissipation_residual(&rec, 1.0).unwrap().abs() <= 1e-3 * s0.l2_sq);
    assert!(matches!(
        energy_dissipation_residual(&rec, 0.0, 0.123456),
        Err(Error::UnsampledTime(_))
    ));
    for s in &rec.samples {
        assert!((s.energy - s.kinetic - s.potential).abs() <= 1e-12 * s.kinetic);
        assert!((s.k - (2.0 * s.kinetic + 4.0 * s.potential)).abs() <= 1e-12 * s.kinetic);
        assert!((s.k - (2.0 * s.energy - 0.5 * s.l4_4th)).abs() <= 1e-12 * s.kinetic);
    }
}

#[test]
fn linear_l2_identity_against_the_exact_solution() {
    let g = grid(100.0, 2048);
    let rec = run(
        &gaussian(&g, 1.0),
        EvolveConfig {
            t_final: 1.0,
            nonlinear: false,
            ..Default::default()
        },
    );
    let s0 = rec.initial();
    assert!(l2_dissipation_residual(&rec, 1.0).unwrap().abs() <= 1e-4 * s0.l2_sq);
    let pi2 = std::f64::consts::PI.powi(2);
    for s in &rec.samples {
        let exact = pi2 / (4.0 * (1.0 + 4.0 * s.t).powi(2));
        assert_relative_eq!(s.l2_sq, exact, max_relative = 1e-4);
    }
}

#[test]
fn stationary_ground_state_energy_drift() {
    let g = grid(1e4, 4096);
    let w = GroundState::<f64>::unit(4).unwrap().sample(g.clone());
    let rec = run(
        &w,
        EvolveConfig {
            t_final: 1.0,
            ..Default::default()
        },
    );
    let e_w = rec.initial().energy;
    assert!(energy_dissipation_residual(&rec, 0.0, 1.0).unwrap().abs() <= 1e-3 * e_w);
    assert!((rec.last().energy - e_w).abs() <= 1e-3 * e_w);
}

#[test]
fn zero_solution_diagnostics() {
    let g = grid(100.0, 256);
    let rec = run(
        &RadialField::zeros(g.clone()),
        EvolveConfig {
            t_final: 1.0,
            ..Default::default()
        },
    );
    assert_eq!(energy_dissipation_residual(&rec, 0.0, 1.0).unwrap(), 0.0);
    assert_eq!(l2_dissipation_residual(&rec, 1.0).unwrap(), 0.0);
    assert!(decay_verdict(&rec, 1e-2).unwrap());
    let c = Constants::on_grid_unchecked(&g).unwrap();
    let rep = gradient_trapping_monitor(&rec, &c);
    assert!(rep.applicable && !rep.violated);
    assert_eq!(rep.max_ratio, 0.0);
}

#[test]
fn trapping_monitor_gate_and_bound() {
    let g = grid(100.0, 1024);
    let c = Constants::on_grid(&g).unwrap();
    let big = gaussian(&g, 1.5);
    let scale = (1.2 * c.grad_w_sq / big.h1dot_norm_sq()).sqrt();
    let rec = run(
        &gaussian(&g, 1.5 * scale),
        EvolveConfig {
            t_final: 1e-3,
            ..Default::default()
        },
    );
    assert!(!gradient_trapping_monitor(&rec, &c).applicable);

    let rec = run(
        &gaussian(&g, 2.0),
        EvolveConfig {
            t_final: 5.0,
            ..Default::default()
        },
    );
    let rep = gradient_trapping_monitor(&rec, &c);
    assert!(rep.applicable && !rep.violated && rep.max_ratio < 1.0);
    assert!(rep.min_energy >= -1e-9);
}
