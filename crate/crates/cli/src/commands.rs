use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use osmoid::config::{RunConfig, SweepPoint};
use osmoid::dataio::{
    emit_plot, format_value, read_manifest, read_timeseries_csv, read_trace_csv, write_chart, write_manifest,
    write_plant_trace_csv, write_trace_csv_strided, ChartSeries, Manifest,
};
use osmoid::diagnose::evaluate;
use osmoid::{identify as run_identify, simulate_plant, DatasetSignals, IdentifyOptions, RunTrace64, Source, Verdict64};

use crate::{run_dir, CliError};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRACE_FILE: &str = "trace.csv";
pub const PLANT_FILE: &str = "plant.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
/// Appended to the run name for plant-only runs.
pub const PLANT_SUFFIX: &str = "-plant";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Simulates the plant alone into `<name>-plant`; returns the run directory.
pub fn simulate(cfg: &RunConfig, root: &Path) -> Result<PathBuf, CliError> {
    if cfg.plant.is_none() {
        return Err(CliError::Usage("simulate needs a [plant] section".into()));
    }
    let stimulus = cfg.build_stimulus::<f64>()?;
    let (plant, stage) = cfg.build_plant::<f64>()?;
    let grid = cfg.build_grid::<f64>(None)?;
    let x0 = cfg.plant.as_ref().and_then(|p| p.x0.as_deref());
    let trace = simulate_plant(&plant, &stage, &stimulus, &grid, cfg.grid.scheme, x0).map_err(|e| match e {
        osmoid::plant::PlantSimError::Plant(e) => CliError::from(e),
        osmoid::plant::PlantSimError::Integrate(e) => CliError::from(e),
    })?;

    let dir = run_dir(root, &format!("{}{PLANT_SUFFIX}", cfg.name))?;
    create_dir(&dir)?;
    write_plant_trace_csv(&trace, dir.join(PLANT_FILE), cfg.output.csv_stride)?;
    write_manifest(&Manifest::new(cfg, "simulate", PLANT_FILE), dir.join(MANIFEST_FILE))?;
    if cfg.output.plot {
        let series = [
            ChartSeries::new("u", trace.t.clone(), trace.u.clone()),
            ChartSeries::new("y", trace.t.clone(), trace.y.clone()),
        ];
        write_chart(&format!("{} plant", plant.preset_name()), "t [min]", &series, dir.join("output.svg"))?;
    }
    info!("simulated {} samples into {}", trace.len(), dir.display());
    Ok(dir)
}

fn run_estimator(cfg: &RunConfig) -> Result<RunTrace64, CliError> {
    let est_cfg = cfg
        .estimator
        .as_ref()
        .ok_or_else(|| CliError::Usage("identify needs an [estimator] section".into()))?;
    let estimator = cfg.build_estimator::<f64>()?;
    let initial = est_cfg.initial_state();
    if let Some(ds) = &cfg.dataset {
        let data = read_timeseries_csv(&ds.path)?;
        let stage = osmoid::OutputStage::new(ds.stage, ds.r0)?;
        let signals = DatasetSignals::new(&data, &stage)?;
        let grid = cfg.build_grid::<f64>(Some(signals.last_time()))?;
        let opts = IdentifyOptions::new(grid).with_initial(initial).with_scheme(cfg.grid.scheme);
        Ok(run_identify(&Source::Dataset(&signals), &estimator, &opts)?)
    } else {
        let stimulus = cfg.build_stimulus::<f64>()?;
        let (plant, stage) = cfg.build_plant::<f64>()?;
        let grid = cfg.build_grid::<f64>(None)?;
        let source = Source::Plant {
            plant: &plant,
            stage,
            stimulus: &stimulus,
            x0: cfg.plant.as_ref().and_then(|p| p.x0.as_deref()),
        };
        let opts = IdentifyOptions::new(grid).with_initial(initial).with_scheme(cfg.grid.scheme);
        Ok(run_identify(&source, &estimator, &opts)?)
    }
}

fn emit_run_plots(trace: &RunTrace64, dir: &Path) -> Result<(), CliError> {
    let mut errors = vec!["e"];
    if trace.second_order.is_some() {
        errors.extend(["e1", "e2"]);
    }
    emit_plot(trace, &errors, dir.join("errors.svg"))?;
    emit_plot(trace, &["a_hat", "b_hat", "c_hat"], dir.join("params.svg"))?;
    Ok(())
}

/// Runs the estimator and writes trace, manifest and plots.
pub fn identify(cfg: &RunConfig, root: &Path) -> Result<(PathBuf, Verdict64), CliError> {
    let trace = run_estimator(cfg)?;
    let d = &cfg.diagnostics;
    let verdict =
        evaluate(&trace, d.rel_tol, d.window_fraction).map_err(|e| CliError::Usage(format!("diagnostics: {e}")))?;

    let dir = run_dir(root, &cfg.name)?;
    create_dir(&dir)?;
    write_trace_csv_strided(&trace, dir.join(TRACE_FILE), cfg.output.csv_stride)?;
    write_manifest(
        &Manifest::new(cfg, "identify", TRACE_FILE).with_verdict(verdict),
        dir.join(MANIFEST_FILE),
    )?;
    if cfg.output.plot {
        emit_run_plots(&trace, &dir)?;
    }
    info!("identified {} samples into {}", trace.len(), dir.display());
    Ok((dir, verdict))
}

/// One row of a sweep summary.
#[derive(Debug)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub outcome: Result<Option<Verdict64>, CliError>,
}

#[derive(Debug)]
pub struct SweepSummary {
    pub path: PathBuf,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    /// Fails with the first child's exit code when any child failed.
    pub fn into_result(self) -> Result<Vec<SweepRow>, CliError> {
        let failed: Vec<_> = self.rows.iter().filter_map(|r| r.outcome.as_ref().err()).collect();
        match failed.first() {
            None => Ok(self.rows),
            Some(first) => Err(CliError::SweepFailed {
                failed: failed.len(),
                total: self.rows.len(),
                code: first.exit_code(),
            }),
        }
    }
}

fn summary_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "run_id,period,n_periods,gain_scale,a_hat,b_hat,c_hat,steady_bias,rms_error,converged,status\n",
    );
    for r in rows {
        let p = &r.point;
        let _ = write!(out, "{},{},{},{},", p.run_id(), p.entry.period, p.entry.n_periods, p.gain_scale);
        match &r.outcome {
            Ok(Some(v)) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},ok",
                    format_value(v.final_params[0]),
                    format_value(v.final_params[1]),
                    format_value(v.final_params[2]),
                    format_value(v.steady_bias),
                    format_value(v.rms_error),
                    v.converged
                );
            }
            Ok(None) => out.push_str(",,,,,,ok\n"),
            Err(e) => {
                let msg: String = e.to_string().chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
                let _ = writeln!(out, ",,,,,,error: {msg}");
            }
        }
    }
    out
}

/// Runs every sweep child (identify, or simulate when there is no
/// estimator) and writes `summary.csv` in sweep order.
pub fn sweep(cfg: &RunConfig, root: &Path, workers: Option<usize>) -> Result<SweepSummary, CliError> {
    let dir = run_dir(root, &cfg.name)?;
    create_dir(&dir)?;
    let points = cfg.sweep_points();
    let children: Vec<RunConfig> = points.iter().map(|p| cfg.for_sweep_point(p)).collect();
    for child in &children {
        child.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", workers.unwrap_or(0))))?;
    let outcomes: Vec<Result<Option<Verdict64>, CliError>> = pool.install(|| {
        children
            .par_iter()
            .map(|child| {
                let out = if child.estimator.is_some() {
                    identify(child, root).map(|(_, v)| Some(v))
                } else {
                    simulate(child, root).map(|_| None)
                };
                if let Err(e) = &out {
                    warn!("{}: {e}", child.name);
                }
                out
            })
            .collect()
    });
    let rows: Vec<SweepRow> = points
        .into_iter()
        .zip(outcomes)
        .map(|(point, outcome)| SweepRow { point, outcome })
        .collect();
    let path = dir.join(SUMMARY_FILE);
    std::fs::write(&path, summary_csv(&rows)).map_err(|e| CliError::io(&path, e))?;
    Ok(SweepSummary { path, rows })
}

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut runs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    runs.sort();
    if dir.join(MANIFEST_FILE).is_file() {
        runs.insert(0, dir.to_path_buf());
    }
    Ok(runs)
}

/// Writes error and parameter plots for every run under `dir`, plus a
/// combined `summary.svg` when there is more than one. Returns the number
/// of runs plotted.
pub fn report(dir: &Path) -> Result<usize, CliError> {
    let runs = run_dirs(dir)?;
    if runs.is_empty() {
        return Err(CliError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no run manifests found"),
        ));
    }
    let mut combined = Vec::new();
    for run in &runs {
        let manifest = read_manifest(run.join(MANIFEST_FILE))?;
        let label = run.file_name().map_or_else(|| run.display().to_string(), |n| n.to_string_lossy().into_owned());
        let trace_path = run.join(&manifest.trace_file);
        match manifest.config.estimator.as_ref().filter(|_| manifest.command == "identify") {
            Some(est) => {
                let trace = read_trace_csv(&trace_path, est.kind)?;
                emit_run_plots(&trace, run)?;
                combined.push(ChartSeries::new(label, trace.t, trace.e));
            }
            None => {
                let data = read_timeseries_csv(&trace_path)?;
                let series = [
                    ChartSeries::new("u", data.t().to_vec(), data.u().to_vec()),
                    ChartSeries::new("y", data.t().to_vec(), data.y().to_vec()),
                ];
                write_chart("plant output", "t [min]", &series, run.join("output.svg"))?;
                combined.push(ChartSeries::new(label, data.t().to_vec(), data.y().to_vec()));
            }
        }
    }
    if runs.len() > 1 {
        write_chart("sweep summary", "t [min]", &combined, dir.join("summary.svg"))?;
    }
    Ok(runs.len())
}
