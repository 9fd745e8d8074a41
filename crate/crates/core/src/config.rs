//! Run configuration: a TOML document describing one experiment.
//!
//! ```toml
//! name = "example"
//! law_variant = "paper-literal"
//!
//! [stimulus]
//! kind = "square"
//! period = 8.0
//! n_periods = 8
//!
//! [plant]
//! model = "first-order"
//! a = 0.155
//! b = 0.075
//! stage = "additive-offset"
//!
//! [estimator]
//! kind = "fo"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{AdaptError, Estimator, EstimatorKind, EstimatorState, FilteredConfig, Gains, LawVariant};
use crate::diagnose::{DEFAULT_REL_TOL, DEFAULT_WINDOW_FRACTION};
use crate::integrate::{IntegrateError, Scheme, TimeGrid, DEFAULT_DT};
use crate::plant::{
    FirstOrderDerivPlant, FirstOrderPlant, OutputStage, Plant, PlantError, PolyPlant, SecondOrderPlant, StageMode,
    BASAL_LEVEL_R0,
};
use crate::scalar::Scalar;
use crate::signalgen::{
    protocol_table, ProtocolEntry, SquareWave, Stimulus, StimulusError, DEFAULT_DUTY, DEFAULT_RISE_TIME,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unknown preset `{0}` (known: {known})", known = PRESETS.join(", "))]
    UnknownPreset(String),
    #[error("{0}")]
    Invalid(String),
    #[error("stimulus: {0}")]
    Stimulus(#[from] StimulusError),
    #[error("plant: {0}")]
    Plant(#[from] PlantError),
    #[error("estimator: {0}")]
    Adapt(#[from] AdaptError),
    #[error("grid: {0}")]
    Grid(#[from] IntegrateError),
}

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 2] = ["fig3-like", "paper-protocol"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusShape {
    Square,
    Step,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusConfig {
    pub kind: StimulusShape,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "default_n_periods")]
    pub n_periods: u32,
    #[serde(default = "default_duty")]
    pub duty: f64,
    #[serde(default = "default_rise")]
    pub rise_time: f64,
    #[serde(default)]
    pub t_start: f64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            kind: StimulusShape::Square,
            amplitude: 1.0,
            period: default_period(),
            n_periods: default_n_periods(),
            duty: DEFAULT_DUTY,
            rise_time: DEFAULT_RISE_TIME,
            t_start: 0.0,
        }
    }
}

impl StimulusConfig {
    pub fn square(period: f64, n_periods: u32) -> Self {
        Self {
            period,
            n_periods,
            ..Self::default()
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<Stimulus<T>, StimulusError> {
        let lit = T::lit;
        match self.kind {
            StimulusShape::Square => Stimulus::square(
                SquareWave::new(lit(self.amplitude), lit(self.period), self.n_periods)
                    .with_duty(lit(self.duty))
                    .with_rise_time(lit(self.rise_time))
                    .with_start(lit(self.t_start)),
            ),
            StimulusShape::Step => Stimulus::step(lit(self.amplitude), lit(self.t_start), lit(self.rise_time)),
            StimulusShape::Constant => Stimulus::constant(lit(self.amplitude)),
        }
    }

    /// Natural end of the stimulus, if it has one.
    pub fn end_time(&self) -> Option<f64> {
        match self.kind {
            StimulusShape::Square => Some(self.t_start + self.period * f64::from(self.n_periods)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantModel {
    FirstOrder,
    FirstOrderDeriv,
    SecondOrder,
    Poly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub model: PlantModel,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    /// Drift coefficients `β1..β3` of the poly model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 3]>,
    /// Input coefficients `c1..c3` of the poly model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<[f64; 3]>,
    #[serde(default)]
    pub stage: StageMode,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default)]
    pub allow_unstable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl PlantConfig {
    pub fn linear(model: PlantModel, a: f64, b: f64, c: f64) -> Self {
        Self {
            model,
            a,
            b,
            c,
            beta: None,
            input: None,
            stage: StageMode::None,
            r0: BASAL_LEVEL_R0,
            allow_unstable: false,
            x0: None,
        }
    }

    pub fn with_stage(mut self, stage: StageMode) -> Self {
        self.stage = stage;
        self
    }

    pub fn build<T: Scalar>(&self) -> Result<Plant<T>, PlantError> {
        let (a, b, c) = (T::lit(self.a), T::lit(self.b), T::lit(self.c));
        let free = self.allow_unstable;
        Ok(match self.model {
            PlantModel::FirstOrder if free => Plant::FirstOrder(FirstOrderPlant::new_allow_unstable(a, b)?),
            PlantModel::FirstOrder => Plant::FirstOrder(FirstOrderPlant::new(a, b)?),
            PlantModel::FirstOrderDeriv if free => {
                Plant::FirstOrderDeriv(FirstOrderDerivPlant::new_allow_unstable(a, b, c)?)
            }
            PlantModel::FirstOrderDeriv => Plant::FirstOrderDeriv(FirstOrderDerivPlant::new(a, b, c)?),
            PlantModel::SecondOrder if free => Plant::SecondOrder(SecondOrderPlant::new_allow_unstable(a, b, c)?),
            PlantModel::SecondOrder => Plant::SecondOrder(SecondOrderPlant::new(a, b, c)?),
            PlantModel::Poly => {
                let beta = self.beta.unwrap_or([-self.a, 0.0, 0.0]).map(T::lit);
                let input = self.input.unwrap_or([self.b, 0.0, 0.0]).map(T::lit);
                if !free && beta[0] >= T::zero() {
                    return Err(PlantError::Unstable(format!(
                        "poly plant linearization needs beta1 < 0, got {}",
                        beta[0]
                    )));
                }
                Plant::Poly(PolyPlant::new(beta, input)?)
            }
        })
    }

    pub fn stage<T: Scalar>(&self) -> Result<OutputStage<T>, PlantError> {
        OutputStage::new(self.stage, T::lit(self.r0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Output stage used to de-bias the measurements.
    #[serde(default)]
    pub stage: StageMode,
    #[serde(default = "default_r0")]
    pub r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub c: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub w1: f64,
    pub w2: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let d = FilteredConfig::<f64>::default();
        Self {
            lambda1: d.lambda1,
            lambda2: d.lambda2,
            w1: d.w1,
            w2: d.w2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub gains: GainsConfig,
    /// Initial `(â, b̂, ĉ)`.
    #[serde(default)]
    pub initial: [f64; 3],
    #[serde(default)]
    pub projection: bool,
    /// Output stage applied to the estimator state.
    #[serde(default)]
    pub stage: StageMode,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default)]
    pub filter: FilterConfig,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            gains: GainsConfig::default(),
            initial: [0.0; 3],
            projection: false,
            stage: StageMode::None,
            r0: BASAL_LEVEL_R0,
            filter: FilterConfig::default(),
        }
    }

    pub fn build<T: Scalar>(&self, variant: LawVariant) -> Result<Estimator<T>, ConfigError> {
        let g = self.gains;
        let gains = Gains::new(T::lit(g.a), T::lit(g.b), T::lit(g.c), variant)?;
        let f = self.filter;
        let filtered = FilteredConfig::new(T::lit(f.lambda1), T::lit(f.lambda2), T::lit(f.w1), T::lit(f.w2))?;
        Ok(Estimator::new(self.kind, gains)
            .with_filtered(filtered)
            .with_projection(self.projection)
            .with_output_stage(OutputStage::new(self.stage, T::lit(self.r0))?))
    }

    pub fn initial_state<T: Scalar>(&self) -> EstimatorState<T> {
        let [a, b, c] = self.initial.map(T::lit);
        EstimatorState::with_params(a, b, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: f64,
    /// Defaults to the end of the stimulus or dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: None,
            dt: DEFAULT_DT,
            scheme: Scheme::Rk4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_window")]
    pub window_fraction: f64,
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            window_fraction: DEFAULT_WINDOW_FRACTION,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Write every n-th sample to the trace file (the last sample is always written).
    #[serde(default = "default_stride")]
    pub csv_stride: usize,
    #[serde(default = "yes")]
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv_stride: default_stride(),
            plot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `(period, n_periods)` pairs; the protocol table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<ProtocolEntry>>,
    /// Multipliers applied to every adaptation gain; `[1.0]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_scales: Option<Vec<f64>>,
}

/// One child of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub entry: ProtocolEntry,
    pub gain_scale: f64,
}

impl SweepPoint {
    /// Directory name of the child run.
    pub fn run_id(&self) -> String {
        format!("T{:03}_n{:02}_g{}", self.entry.period, self.entry.n_periods, self.gain_scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub law_variant: LawVariant,
    /// Reserved; every computation is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<StimulusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: default_name(),
            law_variant: LawVariant::default(),
            seed: 0,
            stimulus: None,
            plant: None,
            dataset: None,
            estimator: None,
            grid: GridConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            output: OutputConfig::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "fig3-like" => Ok(Self {
                name: name.into(),
                stimulus: Some(StimulusConfig::square(8.0, 8)),
                plant: Some(
                    PlantConfig::linear(PlantModel::FirstOrder, 0.155, 0.075, 0.0).with_stage(StageMode::AdditiveOffset),
                ),
                estimator: Some(EstimatorConfig::new(EstimatorKind::FirstOrder)),
                ..Self::default()
            }),
            "paper-protocol" => Ok(Self {
                name: name.into(),
                stimulus: Some(StimulusConfig::square(2.0, 10)),
                plant: Some(
                    PlantConfig::linear(PlantModel::FirstOrderDeriv, 0.155, 0.075, 0.00797)
                        .with_stage(StageMode::AdditiveOffset),
                ),
                estimator: Some(EstimatorConfig::new(EstimatorKind::FirstOrderDeriv)),
                sweep: Some(SweepConfig::default()),
                ..Self::default()
            }),
            other => Err(ConfigError::UnknownPreset(other.into())),
        }
    }

    pub fn build_stimulus<T: Scalar>(&self) -> Result<Stimulus<T>, ConfigError> {
        let s = self
            .stimulus
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("a [stimulus] section is required with a plant".into()))?;
        Ok(s.build()?)
    }

    pub fn build_plant<T: Scalar>(&self) -> Result<(Plant<T>, OutputStage<T>), ConfigError> {
        let p = self
            .plant
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("a [plant] section is required".into()))?;
        let plant = p.build()?;
        if let Some(x0) = &p.x0 {
            if x0.len() != plant.order() {
                return Err(PlantError::Dimension {
                    expected: plant.order(),
                    got: x0.len(),
                }
                .into());
            }
        }
        Ok((plant, p.stage()?))
    }

    pub fn build_estimator<T: Scalar>(&self) -> Result<Estimator<T>, ConfigError> {
        self.estimator
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("an [estimator] section is required".into()))?
            .build(self.law_variant)
    }

    /// Time grid; `default_end` is used when `grid.t1` is absent and the
    /// stimulus has no natural end (datasets pass their last sample time).
    pub fn build_grid<T: Scalar>(&self, default_end: Option<f64>) -> Result<TimeGrid<T>, ConfigError> {
        let g = &self.grid;
        let t1 = g
            .t1
            .or(default_end)
            .or_else(|| self.stimulus.as_ref().and_then(StimulusConfig::end_time))
            .ok_or_else(|| ConfigError::Invalid("grid.t1 is required for stimuli without a natural end".into()))?;
        Ok(TimeGrid::new(T::lit(g.t0), T::lit(t1), T::lit(g.dt))?)
    }

    /// Checks everything that does not require touching the file system.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.plant, &self.dataset) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("[plant] and [dataset] are mutually exclusive".into()))
            }
            (Some(_), None) => {
                self.build_stimulus::<f64>()?;
                self.build_plant::<f64>()?;
                self.build_grid::<f64>(None)?;
            }
            (None, _) => {
                if !(self.grid.dt.is_finite() && self.grid.dt > 0.0) {
                    return Err(IntegrateError::InvalidGrid(format!("dt must be > 0, got {}", self.grid.dt)).into());
                }
            }
        }
        if let Some(s) = &self.stimulus {
            s.build::<f64>()?;
        }
        if self.estimator.is_some() {
            self.build_estimator::<f64>()?;
        }
        let d = &self.diagnostics;
        if !(d.window_fraction > 0.0 && d.window_fraction <= 0.5) {
            return Err(ConfigError::Invalid(format!(
                "diagnostics.window_fraction must lie in (0, 0.5], got {}",
                d.window_fraction
            )));
        }
        if !(d.rel_tol > 0.0 && d.rel_tol.is_finite()) {
            return Err(ConfigError::Invalid(format!("diagnostics.rel_tol must be > 0, got {}", d.rel_tol)));
        }
        if self.output.csv_stride == 0 {
            return Err(ConfigError::Invalid("output.csv_stride must be >= 1".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.periods.as_ref().is_some_and(|p| p.is_empty() || p.iter().any(|e| e.period == 0 || e.n_periods == 0)) {
                return Err(ConfigError::Invalid("sweep.periods entries must be positive".into()));
            }
            if sw.gain_scales.as_ref().is_some_and(|g| g.is_empty() || g.iter().any(|&k| !(k.is_finite() && k >= 0.0))) {
                return Err(ConfigError::Invalid("sweep.gain_scales must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    /// Sweep children in canonical order: by period, then gain scale.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let sw = self.sweep.clone().unwrap_or_default();
        let mut entries = sw.periods.unwrap_or_else(|| protocol_table().to_vec());
        entries.sort_by_key(|e| (e.period, e.n_periods));
        let mut scales = sw.gain_scales.unwrap_or_else(|| vec![1.0]);
        scales.sort_by(f64::total_cmp);
        entries
            .iter()
            .flat_map(|&entry| scales.iter().map(move |&gain_scale| SweepPoint { entry, gain_scale }))
            .collect()
    }

    /// Concrete configuration of one sweep child.
    pub fn for_sweep_point(&self, point: &SweepPoint) -> Self {
        let mut child = self.clone();
        child.name = format!("{}/{}", self.name, point.run_id());
        child.sweep = None;
        let mut stim = child.stimulus.take().unwrap_or_default();
        stim.kind = StimulusShape::Square;
        stim.period = f64::from(point.entry.period);
        stim.n_periods = point.entry.n_periods;
        child.stimulus = Some(stim);
        child.grid.t1 = None;
        if let Some(est) = child.estimator.as_mut() {
            let g = &mut est.gains;
            g.a *= point.gain_scale;
            g.b *= point.gain_scale;
            g.c *= point.gain_scale;
        }
        child
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_period() -> f64 {
    2.0
}
fn default_n_periods() -> u32 {
    10
}
fn default_duty() -> f64 {
    DEFAULT_DUTY
}
fn default_rise() -> f64 {
    DEFAULT_RISE_TIME
}
fn default_r0() -> f64 {
    BASAL_LEVEL_R0
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_window() -> f64 {
    DEFAULT_WINDOW_FRACTION
}
fn default_tol() -> f64 {
    DEFAULT_REL_TOL
}
fn default_stride() -> usize {
    10
}
fn default_name() -> String {
    "run".into()
}
