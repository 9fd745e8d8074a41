#![allow(dead_code)]

use osmoid::*;

pub const FO: (f64, f64) = (0.155, 0.075);
pub const FO_C: f64 = 0.00797;
pub const SO: (f64, f64, f64) = (0.1995, 0.0825, 0.1025);

pub fn first_order() -> Plant64 {
    Plant::FirstOrder(FirstOrderPlant::new(FO.0, FO.1).unwrap())
}

pub fn first_order_deriv() -> Plant64 {
    Plant::FirstOrderDeriv(FirstOrderDerivPlant::new(FO.0, FO.1, FO_C).unwrap())
}

pub fn second_order() -> Plant64 {
    Plant::SecondOrder(SecondOrderPlant::new(SO.0, SO.1, SO.2).unwrap())
}

pub struct Run {
    pub plant: Plant64,
    pub stage: OutputStage<f64>,
    pub estimator: Estimator64,
    pub period: f64,
    pub horizon: f64,
    pub dt: f64,
    pub initial: EstimatorState<f64>,
}

impl Run {
    pub fn new(plant: Plant64, kind: EstimatorKind, variant: LawVariant) -> Self {
        Self {
            plant,
            stage: OutputStage::identity(),
            estimator: Estimator::new(kind, Gains::unit(variant)),
            period: 2.0,
            horizon: 200.0,
            dt: 0.001,
            initial: EstimatorState::default(),
        }
    }

    pub fn period(mut self, period: f64, horizon: f64) -> Self {
        self.period = period;
        self.horizon = horizon;
        self
    }

    pub fn stimulus(&self) -> Stimulus64 {
        let n = (self.horizon / self.period).ceil() as u32;
        Stimulus::square(SquareWave::new(1.0, self.period, n)).unwrap()
    }

    pub fn go(&self) -> RunTrace64 {
        let stim = self.stimulus();
        let source = Source::Plant {
            plant: &self.plant,
            stage: self.stage,
            stimulus: &stim,
            x0: None,
        };
        let grid = TimeGrid::new(0.0, self.horizon, self.dt).unwrap();
        identify(&source, &self.estimator, &IdentifyOptions::new(grid).with_initial(self.initial)).unwrap()
    }
}

pub fn rel_err(est: f64, truth: f64) -> f64 {
    ((est - truth) / truth).abs()
}
