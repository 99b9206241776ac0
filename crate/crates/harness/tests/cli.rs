use std::fs;
use std::path::Path;
use std::process::Command;

use heatlab::config::RunConfig;
use heatlab::initial::InitialDataSpec;
use heatlab::threshold::{Bisection, ThresholdError};
use heatlab::{run_config, ExperimentKind};
use heatlab_core::{Constants, EvolveConfig, GridSpec, VerdictKind};
use serde_json::Value;

fn heatlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn minimal_decay_config_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "experiment = \"decay\"\nfamily = \"gaussian\"\na = 0.1\n",
    );
    let out = tmp.path().join("out");
    let o = heatlab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let decay = fs::read_to_string(out.join("decay.csv")).unwrap();
    let mut lines = decay.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("decayed"), "true");
    assert_eq!(col("verdict"), "Decayed");
    let m = manifest(&out);
    assert_eq!(m["grid_hash"].as_str().unwrap().len(), 64);
    assert!(m["constants"]["grad_w_sq"].as_f64().unwrap() > 100.0);
    assert!(out.join("final.bin").exists() && out.join("final.json").exists());
}

#[test]
fn schema_violations_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for (name, text) in [
        (
            "d5.toml",
            "experiment = \"decay\"\nfamily = \"gaussian\"\na = 0.1\n[grid]\nd = 5\n",
        ),
        (
            "unknown.toml",
            "experiment = \"decay\"\nfamily = \"gaussian\"\na = 0.1\ncolour = 1\n",
        ),
        (
            "noamp.toml",
            "experiment = \"decay\"\nfamily = \"gaussian\"\n",
        ),
        (
            "pair.toml",
            "experiment = \"heat-check\"\n[heat]\npairs = [[4.0, 2.0]]\n",
        ),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let o = heatlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let cfg = write_config(
        tmp.path(),
        "ok.toml",
        "experiment = \"decay\"\nfamily = \"gaussian\"\na = 0.1\n",
    );
    let o = heatlab(&["levine", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "subcommand and experiment disagree"
    );
}

#[test]
fn numerical_aborts_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    // 64 nodes cannot resolve W to 0.5%, so the constants check fails
    let cfg = write_config(
        tmp.path(),
        "coarse.toml",
        "experiment = \"decay\"\nfamily = \"gaussian\"\na = 0.1\n[grid]\nn = 64\n",
    );
    let out = tmp.path().join("out");
    let o = heatlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn negative_energy_levine_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "l.toml",
        "experiment = \"levine\"\nfamily = \"gaussian\"\na = 7.0\n",
    );
    let out = tmp.path().join("out");
    let o = heatlab(&[
        "levine",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--grid-N",
        "1024",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r: Value = serde_json::from_slice(&fs::read(out.join("levine.json")).unwrap()).unwrap();
    assert_eq!(r["in_set"], Value::Bool(true));
    assert_eq!(r["verdict"], "BlewUp");
    assert!(r["t_blow_observed"].as_f64().unwrap() <= r["t_hat"].as_f64().unwrap());
    for k in ["A", "alpha", "delta", "epsilon"] {
        assert!(r["params"][k].as_f64().unwrap() > 0.0);
    }
    assert_eq!(manifest(&out)["grid"]["n"], 1024);
    assert!(fs::read_to_string(out.join("levine.csv"))
        .unwrap()
        .starts_with("t,I,I1,I2,J,J_energy,linf"));
}

#[test]
fn cli_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "experiment = \"simulate\"\nfamily = \"gaussian\"\na = 0.2\n",
    );
    let out = tmp.path().join("out");
    let o = heatlab(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--tfinal",
        "0.5",
        "--rmax",
        "200",
        "--grid-N",
        "1024",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let m = manifest(&out);
    assert_eq!(m["grid"]["r_max"], 200.0);
    assert_eq!(m["config"]["evolve"]["t_final"], 0.5);
    let csv = fs::read_to_string(out.join("run.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("0.5,"));
}

fn small_bisection_setup() -> (
    std::sync::Arc<heatlab_core::Grid>,
    Constants,
    EvolveConfig<f64>,
) {
    let g = std::sync::Arc::new(
        GridSpec {
            n: 1024,
            ..GridSpec::default()
        }
        .build()
        .unwrap(),
    );
    let c = Constants::on_grid(&g).unwrap();
    let ev = EvolveConfig {
        t_final: 20.0,
        error_tol: 1e-6,
        ..EvolveConfig::default()
    };
    (g, c, ev)
}

#[test]
fn bisection_rejects_non_bracketing_endpoints() {
    let (g, c, ev) = small_bisection_setup();
    let spec = InitialDataSpec::gaussian(1.0);
    assert!(spec.with_amplitude(7.0).build(&g, &c).unwrap().info.energy < 0.0);
    assert!(spec.with_amplitude(8.0).build(&g, &c).unwrap().info.energy < 0.0);
    let bis = Bisection {
        spec: &spec,
        grid: &g,
        consts: &c,
        evolve: &ev,
        max_iterations: 30,
    };
    let err = bis.run(7.0, 8.0, 1e-2, &mut |_, _| {}).unwrap_err();
    assert!(
        matches!(
            err,
            ThresholdError::NotBracketing {
                lo: VerdictKind::BlewUp,
                hi: VerdictKind::BlewUp,
                ..
            }
        ),
        "{err}"
    );
    assert!(matches!(
        bis.run(2.0, 1.0, 1e-2, &mut |_, _| {}),
        Err(ThresholdError::Invalid(_))
    ));
}

#[test]
fn bisection_brackets_are_monotone() {
    let (g, c, ev) = small_bisection_setup();
    let spec = InitialDataSpec::gaussian(1.0);
    let bis = Bisection {
        spec: &spec,
        grid: &g,
        consts: &c,
        evolve: &ev,
        max_iterations: 30,
    };
    let mut seen = 0;
    let r = bis.run(1.0, 8.0, 1e-2, &mut |_, _| seen += 1).unwrap();
    assert_eq!(seen, r.runs.len());
    assert!(r.rel_width <= 1e-2 && r.a_lo < r.a_hi);
    for run in &r.runs {
        assert!(run.a_lo < run.a_hi);
    }
    let lo = r.runs.iter().find(|x| x.amplitude == r.a_lo).unwrap();
    let hi = r.runs.iter().find(|x| x.amplitude == r.a_hi).unwrap();
    assert_eq!(
        (lo.verdict, hi.verdict),
        (VerdictKind::Decayed, VerdictKind::BlewUp)
    );
    assert!(r.lo.energy < r.hi.energy && r.lo.grad_sq < r.hi.grad_sq);

    let capped = Bisection {
        max_iterations: 2,
        ..bis
    };
    assert!(matches!(
        capped.run(1.0, 8.0, 1e-2, &mut |_, _| {}),
        Err(ThresholdError::BudgetExhausted { iterations: 2, .. })
    ));
}

#[test]
fn undetermined_runs_are_retried_once() {
    let (g, c, _) = small_bisection_setup();
    let spec = InitialDataSpec::gaussian(1.0);
    // too short a horizon for a near-threshold datum to decide either way
    let ev = EvolveConfig {
        t_final: 0.05,
        error_tol: 1e-6,
        ..EvolveConfig::default()
    };
    let bis = Bisection {
        spec: &spec,
        grid: &g,
        consts: &c,
        evolve: &ev,
        max_iterations: 30,
    };
    let mut horizons = Vec::new();
    let err = bis
        .run(1.0, 8.0, 1e-2, &mut |r, _| {
            horizons.push((r.t_final, r.retried))
        })
        .unwrap_err();
    assert!(matches!(err, ThresholdError::Unresolved { .. }), "{err}");
    assert_eq!(horizons, vec![(0.05, false), (0.1, true)]);
}

#[test]
fn suite_outputs_are_sorted_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::from_toml(
        "experiment = \"decay-suite\"\nfamily = \"gaussian\"\n[grid]\nn = 1024\n",
    )
    .unwrap();
    cfg.suite.amplitudes = vec![0.3, 0.1, 0.2];
    cfg.evolve.t_final = 5.0;
    assert_eq!(cfg.experiment, ExperimentKind::DecaySuite);
    run_config(&cfg, tmp.path(), 2).unwrap();
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let amps: Vec<f64> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(amps, vec![0.1, 0.2, 0.3]);
    for k in 0..3 {
        assert!(tmp.path().join(format!("runs/{k:03}/run.csv")).exists());
    }
    let serial = tempfile::tempdir().unwrap();
    run_config(&cfg, serial.path(), 1).unwrap();
    for name in ["summary.csv", "manifest.json", "runs/001/run.csv"] {
        assert_eq!(
            fs::read(tmp.path().join(name)).unwrap(),
            fs::read(serial.path().join(name)).unwrap(),
            "{name} depends on the worker count"
        );
    }
}
