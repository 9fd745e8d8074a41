//! End-to-end runs of the `osmoid` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use osmoid::dataio::{read_manifest, read_trace_csv};
use osmoid::EstimatorKind;

fn osmoid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osmoid"))
        .args(args)
        .current_dir(dir)
        .env_remove("OSMOID_OUT_DIR")
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const FO_DERIV_OFFSET: &str = r#"
name = "bias"

[stimulus]
kind = "square"
period = 2
n_periods = 100

[plant]
model = "first-order-deriv"
a = 0.155
b = 0.075
c = 0.00797
stage = "additive-offset"

[estimator]
kind = "fo-deriv"

[output]
plot = false
"#;

#[test]
fn preset_simulate_creates_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = osmoid(tmp.path(), &["--preset", "fig3-like", "simulate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = tmp.path().join("runs/fig3-like-plant");
    for f in ["plant.csv", "manifest.toml", "output.svg"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let m = read_manifest(run.join("manifest.toml")).unwrap();
    assert_eq!(m.command, "simulate");
    assert!(m.verdict.is_none());
}

#[test]
fn out_dir_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_osmoid"))
        .args(["simulate", "--preset", "fig3-like", "--no-plot"])
        .current_dir(tmp.path())
        .env("OSMOID_OUT_DIR", "elsewhere")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(tmp.path().join("elsewhere/fig3-like-plant/plant.csv").is_file());
    assert!(!tmp.path().join("elsewhere/fig3-like-plant/output.svg").exists());
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_dt = write(tmp.path(), "dt.toml", &format!("{FO_DERIV_OFFSET}\n[grid]\ndt = 0.0\n"));
    let out = osmoid(tmp.path(), &["--config", bad_dt.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("dt"), "{}", stderr(&out));

    assert_eq!(code(&osmoid(tmp.path(), &["--preset", "fig3-like", "--dt", "-1", "identify"])), 2);

    let unstable = write(tmp.path(), "u.toml", &FO_DERIV_OFFSET.replace("a = 0.155", "a = -0.155"));
    let out = osmoid(tmp.path(), &["--config", unstable.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unstable"), "{}", stderr(&out));
    let allowed = write(
        tmp.path(),
        "ok.toml",
        &FO_DERIV_OFFSET.replace("a = -0.155", "").replace("a = 0.155", "a = -0.01\nallow_unstable = true"),
    );
    assert_eq!(code(&osmoid(tmp.path(), &["--config", allowed.to_str().unwrap(), "simulate"])), 0);

    assert_eq!(code(&osmoid(tmp.path(), &["--config", "missing.toml", "simulate"])), 2);
    assert_eq!(code(&osmoid(tmp.path(), &["simulate"])), 2);
    assert_eq!(code(&osmoid(tmp.path(), &["bogus"])), 2);
}

#[test]
fn divergence_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "blowup.toml",
        r#"
        [stimulus]
        kind = "constant"

        [plant]
        model = "poly"
        beta = [-0.1, 1.0, 0.0]
        input = [1.0, 0.0, 0.0]

        [grid]
        t1 = 100.0
        "#,
    );
    let out = osmoid(tmp.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverge"));
}

#[test]
fn missing_dataset_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let out = osmoid(tmp.path(), &["--preset", "fig3-like", "identify", "--dataset", "nope.csv"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn identify_on_dataset_file() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = osmoid(tmp.path(), &["--preset", "fig3-like", "--no-plot", "simulate"]);
    assert_eq!(code(&sim), 0);
    let cfg = write(
        tmp.path(),
        "data.toml",
        r#"
        name = "from-data"

        [dataset]
        path = "runs/fig3-like-plant/plant.csv"
        stage = "additive-offset"

        [estimator]
        kind = "fo"
        stage = "additive-offset"

        [output]
        plot = false
        "#,
    );
    let out = osmoid(tmp.path(), &["--config", cfg.to_str().unwrap(), "identify"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = read_manifest(tmp.path().join("runs/from-data/manifest.toml")).unwrap();
    let path = &m.config.dataset.as_ref().unwrap().path;
    assert!(path.is_absolute());
    let v = m.verdict.unwrap();
    assert!(v.steady_bias.abs() < 0.05, "{v:?}");
}

#[test]
fn identify_reports_offset_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bias.toml", FO_DERIV_OFFSET);
    let out = osmoid(tmp.path(), &["--config", cfg.to_str().unwrap(), "identify"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = tmp.path().join("runs/bias");
    let m = read_manifest(run.join("manifest.toml")).unwrap();
    let v = m.verdict.unwrap();
    assert!((-1.35..=-1.10).contains(&v.steady_bias), "{}", v.steady_bias);
    assert!(!run.join("errors.svg").exists());

    // final parameters echo the trace's last sample exactly
    let tr = read_trace_csv(run.join(&m.trace_file), EstimatorKind::FirstOrderDeriv).unwrap();
    let (a, b, c) = tr.final_params().unwrap();
    assert_eq!(m.final_params.unwrap().map(f64::to_bits), [a, b, c].map(f64::to_bits));
}

#[test]
fn filtered_estimator_converges_on_matched_plant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "sof.toml",
        r#"
        name = "sof"

        [stimulus]
        kind = "square"
        period = 2
        n_periods = 250

        [plant]
        model = "second-order"
        a = 0.1995
        b = 0.0825
        c = 0.1025

        [estimator]
        kind = "so-filtered"
        "#,
    );
    let out = osmoid(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--law-variant", "lyapunov-corrected", "identify"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = read_manifest(tmp.path().join("runs/sof/manifest.toml")).unwrap();
    assert_eq!(m.law_variant, osmoid::LawVariant::LyapunovCorrected);
    assert!(m.verdict.unwrap().converged);
    let header = std::fs::read_to_string(tmp.path().join("runs/sof/trace.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 11);
}

#[test]
fn manifest_replay_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bias.toml", FO_DERIV_OFFSET);
    assert_eq!(code(&osmoid(tmp.path(), &["--config", cfg.to_str().unwrap(), "identify"])), 0);
    let first = tmp.path().join("runs/bias");
    let out = osmoid(
        tmp.path(),
        &["--config", first.join("manifest.toml").to_str().unwrap(), "--out-dir", "replay", "identify"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let second = tmp.path().join("replay/bias");
    for f in ["trace.csv", "manifest.toml"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn default_sweep_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = osmoid(tmp.path(), &["--preset", "paper-protocol", "--workers", "3", "--no-plot", "sweep"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sweep = tmp.path().join("runs/paper-protocol");
    let runs: Vec<_> = std::fs::read_dir(&sweep)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    assert_eq!(runs.len(), 6);
    let summary = std::fs::read_to_string(sweep.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 7);
    assert!(summary.lines().nth(1).unwrap().starts_with("T002_n10_g1,2,10,"));

    let out = osmoid(tmp.path(), &["report", sweep.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = std::fs::read_to_string(sweep.join("summary.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 6);

    let single = sweep.join("T008_n08_g1");
    std::fs::remove_file(single.join("errors.svg")).unwrap();
    std::fs::remove_file(single.join("params.svg")).unwrap();
    assert_eq!(code(&osmoid(tmp.path(), &["report", single.to_str().unwrap()])), 0);
    let svgs: Vec<_> = std::fs::read_dir(&single)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 2);

    let out = osmoid(tmp.path(), &["--preset", "paper-protocol", "--no-plot", "identify"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(code(&osmoid(tmp.path(), &["report", sweep.to_str().unwrap()])), 0);
    let svg = std::fs::read_to_string(sweep.join("summary.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 7);

    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(code(&osmoid(tmp.path(), &["report", "empty"])), 4);
    assert_eq!(code(&osmoid(tmp.path(), &["report", "does-not-exist"])), 4);
}

#[test]
fn gain_sweep_shares_fixed_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "gains.toml",
        r#"
        name = "gains"

        [stimulus]
        kind = "square"

        [plant]
        model = "first-order"
        a = 0.155
        b = 0.075

        [estimator]
        kind = "fo"

        [output]
        plot = false

        [sweep]
        periods = [{ period = 8, n_periods = 100 }]
        gain_scales = [0.5, 1.0, 2.0]
        "#,
    );
    let out = osmoid(tmp.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = std::fs::read_to_string(tmp.path().join("runs/gains/summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let a: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    let b: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    for k in 1..3 {
        assert!(((a[k] - a[0]) / a[0]).abs() < 0.01 && ((b[k] - b[0]) / b[0]).abs() < 0.01, "{a:?} {b:?}");
    }
}

#[test]
fn failing_sweep_children_still_summarised() {
    let tmp = tempfile::tempdir().unwrap();
    // bounded for short high phases, finite-time blow-up for long ones
    let cfg = write(
        tmp.path(),
        "blow.toml",
        r#"
        name = "blow"

        [stimulus]
        kind = "square"

        [plant]
        model = "poly"
        beta = [-1.0, 0.3, 0.0]
        input = [1.0, 0.0, 0.0]

        [output]
        plot = false

        [sweep]
        "#,
    );
    let out = osmoid(tmp.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let summary = std::fs::read_to_string(tmp.path().join("runs/blow/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[1].ends_with(",ok"), "{summary}");
    assert!(lines[6].contains("error: numerical divergence"), "{summary}");
}
