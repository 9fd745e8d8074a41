//! Adaptive-observer identification of low-order models for osmotic-shock
//! signaling responses.
//!
//! The pieces compose left to right:
//! [`signalgen`] builds input waveforms, [`plant`] simulates ground-truth
//! models, [`adapt`] runs online parameter estimators against a plant or a
//! measured dataset, [`diagnose`] judges the resulting [`RunTrace`], and
//! [`dataio`] reads datasets and writes traces, manifests and plots.
//!
//! Numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision for common use.
//!
//! ```
//! use osmoid::{identify, Estimator64, EstimatorKind, Gains, IdentifyOptions, LawVariant};
//! use osmoid::{OutputStage, Plant64, FirstOrderPlant, Source, SquareWave, Stimulus64, TimeGrid};
//!
//! let plant = Plant64::FirstOrder(FirstOrderPlant::new(0.155, 0.075).unwrap());
//! let stim = Stimulus64::square(SquareWave::new(1.0, 2.0, 5)).unwrap();
//! let source = Source::Plant { plant: &plant, stage: OutputStage::identity(), stimulus: &stim, x0: None };
//! let est = Estimator64::new(EstimatorKind::FirstOrder, Gains::unit(LawVariant::PaperLiteral));
//! let grid = TimeGrid::new(0.0, 10.0, 0.01).unwrap();
//! let trace = identify(&source, &est, &IdentifyOptions::new(grid)).unwrap();
//! assert_eq!(trace.len(), 1001);
//! ```

pub mod adapt;
pub mod config;
pub mod dataio;
pub mod diagnose;
pub mod integrate;
pub mod plant;
pub mod scalar;
pub mod signalgen;
pub mod trace;

pub use adapt::{
    identify, DatasetSignals, Estimator, EstimatorKind, EstimatorState, FilteredConfig, Gains, IdentifyError,
    IdentifyOptions, LawVariant, Source,
};
pub use config::{ConfigError, RunConfig};
pub use dataio::{Dataset, DataError, Manifest};
pub use diagnose::Verdict;
pub use integrate::{IntegrateError, Scheme, StateVector, TimeGrid};
pub use plant::{
    simulate_plant, FirstOrderDerivPlant, FirstOrderPlant, OutputStage, Plant, PlantError, PolyPlant,
    SecondOrderPlant, StageMode, TrueParams,
};
pub use scalar::Scalar;
pub use signalgen::{protocol_table, ProtocolEntry, SquareWave, Stimulus, StimulusError};
pub use trace::{PlantTrace, RunTrace};

pub type Stimulus64 = Stimulus<f64>;
pub type Plant64 = Plant<f64>;
pub type Estimator64 = Estimator<f64>;
pub type RunTrace64 = RunTrace<f64>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type Verdict64 = Verdict<f64>;

pub type Stimulus32 = Stimulus<f32>;
pub type Plant32 = Plant<f32>;
pub type Estimator32 = Estimator<f32>;
pub type RunTrace32 = RunTrace<f32>;
pub type TimeGrid32 = TimeGrid<f32>;
pub type Verdict32 = Verdict<f32>;
