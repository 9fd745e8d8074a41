//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use osmoid::dataio::{read_trace_csv, write_trace_csv};
use osmoid::diagnose::{evaluate, lyapunov_samples};
use osmoid::integrate::simulate;
use osmoid::*;

const FO: (f64, f64) = (0.155, 0.075);
const FO_C: f64 = 0.00797;
const SO: (f64, f64, f64) = (0.1995, 0.0825, 0.1025);

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(est: f64, truth: f64) -> f64 {
    ((est - truth) / truth).abs()
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn square(period: f64, horizon: f64) -> Stimulus64 {
    Stimulus::square(SquareWave::new(1.0, period, (horizon / period).ceil() as u32)).unwrap()
}

fn run(
    plant: &Plant64,
    stage: OutputStage<f64>,
    estimator: &Estimator64,
    period: f64,
    horizon: f64,
    dt: f64,
) -> RunTrace64 {
    let stim = square(period, horizon);
    let source = Source::Plant {
        plant,
        stage,
        stimulus: &stim,
        x0: None,
    };
    let grid = TimeGrid::new(0.0, horizon, dt).unwrap();
    identify(&source, estimator, &IdentifyOptions::new(grid)).unwrap()
}

fn unit(kind: EstimatorKind, variant: LawVariant) -> Estimator64 {
    Estimator::new(kind, Gains::unit(variant))
}

fn first_order() -> Plant64 {
    Plant::FirstOrder(FirstOrderPlant::new(FO.0, FO.1).unwrap())
}

fn first_order_deriv() -> Plant64 {
    Plant::FirstOrderDeriv(FirstOrderDerivPlant::new(FO.0, FO.1, FO_C).unwrap())
}

fn second_order() -> Plant64 {
    Plant::SecondOrder(SecondOrderPlant::new(SO.0, SO.1, SO.2).unwrap())
}

fn c1_first_order_recovery() -> Outcome {
    let est = unit(EstimatorKind::FirstOrder, LawVariant::PaperLiteral);
    let start = Instant::now();
    let tr = run(&first_order(), OutputStage::identity(), &est, 2.0, 200.0, 0.001);
    let secs = start.elapsed().as_secs_f64();
    let (a, b, _) = tr.final_params().unwrap();
    let (ea, eb) = (rel(a, FO.0), rel(b, FO.1));
    outcome(
        ea < 0.05 && eb < 0.05 && secs < 5.0,
        format!("a_hat={a:.5} ({}), b_hat={b:.5} ({}), tol 5%, runtime {secs:.2}s < 5s", pct(ea), pct(eb)),
    )
}

fn c2_first_order_deriv_recovery() -> Outcome {
    let est = unit(EstimatorKind::FirstOrderDeriv, LawVariant::PaperLiteral);
    let plant = first_order_deriv();
    let mut notes = Vec::new();
    let mut needed = None;
    let mut last = None;
    for horizon in [100.0, 200.0, 300.0, 500.0] {
        let tr = run(&plant, OutputStage::identity(), &est, 2.0, horizon, 0.001);
        let (a, b, c) = tr.final_params().unwrap();
        let worst = rel(a, FO.0).max(rel(b, FO.1)).max(rel(c, FO_C));
        notes.push(format!("{horizon:.0}min:{}", pct(worst)));
        if worst < 0.10 && needed.is_none() {
            needed = Some(horizon);
        }
        last = Some((tr, worst));
    }
    let (tr, worst) = last.unwrap();
    let du = &tr.internals.as_ref().unwrap().du;
    let mut plateau_steps = 0usize;
    let mut frozen = true;
    for k in 0..tr.len() - 1 {
        if du[k] == 0.0 && du[k + 1] == 0.0 {
            plateau_steps += 1;
            frozen &= tr.c_hat[k].to_bits() == tr.c_hat[k + 1].to_bits();
        }
    }
    outcome(
        worst < 0.10 && frozen && plateau_steps > 0,
        format!(
            "worst rel. error by horizon [{}], first within 10% at {:?} min; c_hat bit-frozen on {plateau_steps} plateau steps: {frozen}",
            notes.join(", "),
            needed
        ),
    )
}

fn c3_bias_reproduction() -> Outcome {
    let est = unit(EstimatorKind::FirstOrderDeriv, LawVariant::PaperLiteral);
    let tr = run(&first_order_deriv(), OutputStage::basal_offset(), &est, 2.0, 200.0, 0.001);
    let v = evaluate(&tr, 0.05, 0.25).unwrap();
    outcome(
        (-1.35..=-1.10).contains(&v.steady_bias),
        format!("steady_bias={:.4} in [-1.35, -1.10]", v.steady_bias),
    )
}

fn c4_model_rejection() -> Outcome {
    let est = unit(EstimatorKind::FirstOrder, LawVariant::PaperLiteral);
    let tr = run(&second_order(), OutputStage::identity(), &est, 2.0, 400.0, 0.001);
    let v = evaluate(&tr, 0.05, 0.25).unwrap();
    outcome(!v.converged, format!("converged={} at rel_tol 0.05 (expected false)", v.converged))
}

fn c5_lyapunov_monotonicity() -> Outcome {
    let est = unit(EstimatorKind::FirstOrder, LawVariant::LyapunovCorrected);
    let tr = run(&first_order(), OutputStage::identity(), &est, 2.0, 200.0, 0.001);
    let v = lyapunov_samples(&tr, &est.gains).unwrap();
    let worst = v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= 1e-9,
        format!("max V(k+1)-V(k)={worst:.3e} <= 1e-9 over {} steps, V {:.4e} -> {:.4e}", v.len() - 1, v[0], v[v.len() - 1]),
    )
}

fn c6_filtered_identity() -> Outcome {
    let plant = second_order();
    let est = unit(EstimatorKind::FilteredSecondOrder, LawVariant::LyapunovCorrected);
    let tr = run(&plant, OutputStage::identity(), &est, 2.0, 200.0, 0.001);
    let inner = tr.internals.as_ref().unwrap();
    let f = est.filtered;
    let mut worst: f64 = 0.0;
    for k in 0..tr.len() {
        let state = EstimatorState {
            xhat1: inner.xhat1[k],
            xhat2: inner.xhat2[k],
            a: tr.a_hat[k],
            b: tr.b_hat[k],
            c: tr.c_hat[k],
        };
        let m = adapt::Measured {
            x1: inner.x1[k],
            x2: inner.x2[k],
            u: tr.u[k],
            du: inner.du[k],
        };
        let r = est.rates(&state, &m);
        let mut dx = [0.0; 2];
        plant.dynamics(&[m.x1, m.x2], m.u, m.du, &mut dx).unwrap();
        let e = state.xhat1 - m.x1;
        let de = r.xhat1 - dx[0];
        let dde = r.xhat2 - dx[1];
        let residual = dde + f.lambda1 * de + f.lambda2 * e + (state.a - SO.0) * m.x2 + (state.b - SO.1) * m.x1
            - (state.c - SO.2) * m.u;
        worst = worst.max(residual.abs());
    }
    outcome(worst < 1e-6, format!("max |residual|={worst:.3e} < 1e-6 over {} samples", tr.len()))
}

fn c7_integrator_order() -> Outcome {
    let err = |dt: f64| {
        let grid = TimeGrid::new(0.0, 1.0, dt).unwrap();
        let out = simulate(|_, x: &[f64], dx: &mut [f64]| dx[0] = -x[0], &grid, vec![1.0].into(), Scheme::Rk4).unwrap();
        (out.last().unwrap().1[0] - (-1.0f64).exp()).abs()
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    outcome(
        (12.0..=20.0).contains(&ratio),
        format!("error {e1:.3e} (dt 0.1) / {e2:.3e} (dt 0.05) = {ratio:.2} in [12, 20]"),
    )
}

fn c8_protocol_table() -> Outcome {
    let got: Vec<(u32, u32)> = protocol_table().iter().map(|e| (e.period, e.n_periods)).collect();
    let want = [(2, 10), (4, 8), (8, 8), (16, 6), (32, 4), (64, 4)];
    outcome(got == want, format!("{got:?}"))
}

fn files_below(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c9_sweep_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut codes = Vec::new();
    for out in ["first", "second"] {
        let status = Command::new(env!("CARGO_BIN_EXE_osmoid"))
            .args(["--preset", "paper-protocol", "--workers", "4", "--out-dir", out, "sweep"])
            .current_dir(tmp.path())
            .env_remove("RUST_LOG")
            .output()
            .unwrap()
            .status;
        codes.push(status.code());
    }
    let secs = start.elapsed().as_secs_f64();
    let a = files_below(&tmp.path().join("first"));
    let b = files_below(&tmp.path().join("second"));
    let traces = a.keys().filter(|p| p.ends_with("trace.csv")).count();
    let identical = !a.is_empty() && a == b;
    outcome(
        codes == [Some(0), Some(0)] && identical && traces == 6 && secs < 60.0,
        format!(
            "exit codes {codes:?}, {} files ({traces} traces + summary) byte-identical: {identical}, total {secs:.2}s < 60s",
            a.len()
        ),
    )
}

fn c10_csv_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    let cases = [
        (first_order(), EstimatorKind::FirstOrder),
        (first_order_deriv(), EstimatorKind::FirstOrderDeriv),
        (second_order(), EstimatorKind::SecondOrder),
        (second_order(), EstimatorKind::FilteredSecondOrder),
    ];
    for (plant, kind) in cases {
        let tr = run(&plant, OutputStage::basal_offset(), &unit(kind, LawVariant::LyapunovCorrected), 2.0, 20.0, 0.001);
        let path = tmp.path().join(format!("{}.csv", kind.preset_name()));
        write_trace_csv(&tr, &path).unwrap();
        let back = read_trace_csv(&path, kind).unwrap();
        for col in tr.columns() {
            let (x, y) = (tr.channel(col).unwrap(), back.channel(col).unwrap());
            assert_eq!(x.len(), y.len());
            samples += x.len();
            for (p, q) in x.iter().zip(y) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max |written - read|={worst:e} over {samples} values"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("C1 first-order parameter recovery", c1_first_order_recovery),
        ("C2 first-order-deriv parameter recovery", c2_first_order_deriv_recovery),
        ("C3 basal-offset bias reproduction", c3_bias_reproduction),
        ("C4 model rejection", c4_model_rejection),
        ("C5 Lyapunov monotonicity", c5_lyapunov_monotonicity),
        ("C6 filtered second-order error identity", c6_filtered_identity),
        ("C7 integrator order", c7_integrator_order),
        ("C8 protocol fidelity", c8_protocol_table),
        ("C9 end-to-end sweep determinism", c9_sweep_determinism),
        ("C10 CSV round-trip", c10_csv_round_trip),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
