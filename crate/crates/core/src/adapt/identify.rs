//! Co-integration of plant (or dataset), estimator and parameter states.
//!
//! The augmented state is `[plant states.. | x̂1, x̂2 | â, b̂, ĉ]` and is
//! advanced as one system with a single fixed-step scheme. Steps that
//! straddle a stimulus breakpoint are split there.

use std::cell::Cell;

use log::warn;
use thiserror::Error;

use super::{Estimator, EstimatorState, Measured, Rates};
use crate::dataio::Dataset;
use crate::integrate::{IntegrateError, Integrator, Scheme, TimeGrid};
use crate::plant::{OutputStage, Plant, PlantError};
use crate::scalar::Scalar;
use crate::signalgen::{Stimulus, StimulusError};
use crate::trace::{RunTrace, TraceInternals};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentifyError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("dataset covers [{first}, {last}] but the grid needs [{t0}, {t1}]")]
    DatasetTooShort { first: f64, last: f64, t0: f64, t1: f64 },
    #[error("dataset needs at least two samples")]
    DatasetTooSmall,
    #[error("dataset input column is invalid: {0}")]
    DatasetInput(#[from] StimulusError),
    #[error("initial estimates must be finite")]
    NonFiniteInitial,
}

/// Interpolated dataset channels in the form the estimators consume.
///
/// `x1` is the de-biased output and `x2` a centred five-sample
/// least-squares slope of `x1`, both linearly interpolated between samples.
#[derive(Debug, Clone)]
pub struct DatasetSignals<T> {
    times: Vec<T>,
    u: Stimulus<T>,
    y: Vec<T>,
    x1: Vec<T>,
    x2: Vec<T>,
}

impl<T: Scalar> DatasetSignals<T> {
    pub fn new(dataset: &Dataset<T>, stage: &OutputStage<T>) -> Result<Self, IdentifyError> {
        let times = dataset.t().to_vec();
        if times.len() < 2 {
            return Err(IdentifyError::DatasetTooSmall);
        }
        let u = Stimulus::piecewise(times.clone(), dataset.u().to_vec())?;
        let y = dataset.y().to_vec();
        let x1: Vec<T> = y.iter().map(|&v| stage.debias(v)).collect();
        let x2 = smoothed_slope(&times, &x1, 2);
        Ok(Self { times, u, y, x1, x2 })
    }

    pub fn first_time(&self) -> T {
        self.times[0]
    }

    pub fn last_time(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn x2_samples(&self) -> &[T] {
        &self.x2
    }

    fn interp(&self, values: &[T], t: T) -> T {
        crate::signalgen::interpolate(&self.times, values, t)
    }
}

/// Least-squares slope over a centred window of `2*half + 1` samples,
/// truncated at the ends.
fn smoothed_slope<T: Scalar>(t: &[T], x: &[T], half: usize) -> Vec<T> {
    let n = t.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            let m = T::from_usize(hi - lo + 1).unwrap();
            let tm = t[lo..=hi].iter().fold(T::zero(), |s, &v| s + v) / m;
            let xm = x[lo..=hi].iter().fold(T::zero(), |s, &v| s + v) / m;
            let (mut num, mut den) = (T::zero(), T::zero());
            for i in lo..=hi {
                num += (t[i] - tm) * (x[i] - xm);
                den += (t[i] - tm) * (t[i] - tm);
            }
            num / den
        })
        .collect()
}

/// Where the estimator's regressors come from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a, T> {
    /// Simulated ground-truth plant driven by a stimulus.
    Plant {
        plant: &'a Plant<T>,
        stage: OutputStage<T>,
        stimulus: &'a Stimulus<T>,
        /// Initial plant state; zeros when `None`.
        x0: Option<&'a [T]>,
    },
    Dataset(&'a DatasetSignals<T>),
}

impl<T: Scalar> Source<'_, T> {
    fn plant_order(&self) -> usize {
        match self {
            Source::Plant { plant, .. } => plant.order(),
            Source::Dataset(_) => 0,
        }
    }

    fn stimulus(&self) -> &Stimulus<T> {
        match self {
            Source::Plant { stimulus, .. } => stimulus,
            Source::Dataset(sig) => &sig.u,
        }
    }

    /// Regressors and measured output at time `t`, with the input rate
    /// supplied by the caller. For a plant source the plant derivative is
    /// written to `dplant`.
    #[inline]
    fn measure(&self, t: T, du: T, plant_state: &[T], dplant: &mut [T]) -> (Measured<T>, T) {
        match self {
            Source::Plant { plant, stage, stimulus, .. } => {
                let u = stimulus.eval(t);
                plant.rhs(plant_state, u, du, dplant);
                let m = Measured {
                    x1: plant_state[0],
                    x2: dplant[0],
                    u,
                    du,
                };
                (m, stage.apply(plant_state[0]))
            }
            Source::Dataset(sig) => {
                let m = Measured {
                    x1: sig.interp(&sig.x1, t),
                    x2: sig.interp(&sig.x2, t),
                    u: sig.u.eval(t),
                    du,
                };
                (m, sig.interp(&sig.y, t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentifyOptions<T> {
    pub grid: TimeGrid<T>,
    pub scheme: Scheme,
    pub initial: EstimatorState<T>,
    /// Keep regressors and estimator states in the trace (needed for
    /// Lyapunov diagnostics).
    pub record_internals: bool,
}

impl<T: Scalar> IdentifyOptions<T> {
    pub fn new(grid: TimeGrid<T>) -> Self {
        Self {
            grid,
            scheme: Scheme::Rk4,
            initial: EstimatorState::default(),
            record_internals: true,
        }
    }

    pub fn with_initial(mut self, initial: EstimatorState<T>) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
}

#[inline]
fn unpack<T: Scalar>(s: &[T]) -> EstimatorState<T> {
    EstimatorState {
        xhat1: s[0],
        xhat2: s[1],
        a: s[2],
        b: s[3],
        c: s[4],
    }
}

#[inline]
fn pack<T: Scalar>(r: &Rates<T>, out: &mut [T]) {
    out[0] = r.xhat1;
    out[1] = r.xhat2;
    out[2] = r.a;
    out[3] = r.b;
    out[4] = r.c;
}

/// Runs `estimator` against `source` over the grid and records every sample.
pub fn identify<T: Scalar>(
    source: &Source<'_, T>,
    estimator: &Estimator<T>,
    opts: &IdentifyOptions<T>,
) -> Result<RunTrace<T>, IdentifyError> {
    let grid = &opts.grid;
    if !opts.initial.is_finite() {
        return Err(IdentifyError::NonFiniteInitial);
    }
    let np = source.plant_order();
    let mut state = vec![T::zero(); np + 5];

    match source {
        Source::Plant { stimulus, x0, .. } => {
            if let Some(x0) = x0 {
                if x0.len() != np {
                    return Err(PlantError::Dimension {
                        expected: np,
                        got: x0.len(),
                    }
                    .into());
                }
                state[..np].copy_from_slice(x0);
            }
            if let Some(rise) = stimulus.rise_time() {
                if grid.dt() > rise / T::lit(5.0) {
                    warn!(
                        "dt = {} exceeds rise_time/5 = {}; edge dynamics will be under-resolved",
                        grid.dt(),
                        rise / T::lit(5.0)
                    );
                }
            }
        }
        Source::Dataset(sig) => {
            if grid.t0() < sig.first_time() || grid.t1() > sig.last_time() {
                return Err(IdentifyError::DatasetTooShort {
                    first: sig.first_time().to_f64_lossy(),
                    last: sig.last_time().to_f64_lossy(),
                    t0: grid.t0().to_f64_lossy(),
                    t1: grid.t1().to_f64_lossy(),
                });
            }
        }
    }
    let i = opts.initial;
    state[np..].copy_from_slice(&[i.xhat1, i.xhat2, i.a, i.b, i.c]);

    let mut trace = RunTrace::empty(estimator.kind);
    trace.filtered = estimator.filtered;
    if let Source::Plant { plant, .. } = source {
        trace.true_params = plant.true_params();
    }
    if opts.record_internals {
        trace.internals = Some(TraceInternals::default());
    }
    let n = grid.len();
    reserve(&mut trace, n);

    let mut dplant = vec![T::zero(); np.max(1)];
    let record = |trace: &mut RunTrace<T>, t: T, s: &[T], dplant: &mut [T]| {
        let du = source.stimulus().eval_derivative(t);
        let (m, y) = source.measure(t, du, &s[..np], dplant);
        let est = unpack(&s[np..]);
        let r = estimator.rates(&est, &m);
        let yhat = estimator.output_stage.apply(est.xhat1);
        trace.t.push(t);
        trace.u.push(m.u);
        trace.y.push(y);
        trace.yhat.push(yhat);
        trace.e.push(yhat - y);
        trace.a_hat.push(est.a);
        trace.b_hat.push(est.b);
        trace.c_hat.push(est.c);
        if let Some(so) = trace.second_order.as_mut() {
            so.e1.push(est.xhat1 - m.x1);
            so.e2.push(est.xhat2 - m.x2);
            so.eps.push(r.eps);
        }
        if let Some(inner) = trace.internals.as_mut() {
            inner.du.push(m.du);
            inner.x1.push(m.x1);
            inner.x2.push(m.x2);
            inner.xhat1.push(est.xhat1);
            inner.xhat2.push(est.xhat2);
        }
    };

    // The input is linear between stimulus breakpoints, so each step is
    // split at them and du is held at its value inside the piece.
    let piece_du = Cell::new(T::zero());
    let mut rhs = |t: T, s: &[T], ds: &mut [T]| {
        let (plant_s, est_s) = s.split_at(np);
        let (dplant_s, dest) = ds.split_at_mut(np);
        let mut scratch = [T::zero(); 2];
        let (m, _) = source.measure(t, piece_du.get(), plant_s, &mut scratch[..np.max(1)]);
        dplant_s.copy_from_slice(&scratch[..np]);
        let r = estimator.rates(&unpack(est_s), &m);
        pack(&r, dest);
    };

    let stimulus = source.stimulus();
    let half = T::lit(0.5);
    let mut stepper = Integrator::new(opts.scheme, state.len());
    let mut knots = Vec::new();
    record(&mut trace, grid.time(0), &state, &mut dplant);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let end = t + grid.dt();
        stimulus.breakpoints_between(t, end, &mut knots);
        knots.push(end);
        let mut ok = true;
        let mut from = t;
        for (i, &to) in knots.iter().enumerate() {
            let h = if i == 0 && knots.len() == 1 { grid.dt() } else { to - from };
            piece_du.set(stimulus.eval_derivative(from + h * half));
            ok &= stepper.advance(&mut rhs, from, &mut state, h);
            from = to;
        }
        if !ok {
            return Err(IntegrateError::Diverged {
                t: grid.time(k + 1).to_f64_lossy(),
                step: k + 1,
            }
            .into());
        }
        let mut est = unpack(&state[np..]);
        estimator.project(&mut est);
        state[np + 2] = est.a;
        state[np + 3] = est.b;
        record(&mut trace, grid.time(k + 1), &state, &mut dplant);
    }
    Ok(trace)
}

fn reserve<T>(trace: &mut RunTrace<T>, n: usize) {
    for v in [
        &mut trace.t,
        &mut trace.u,
        &mut trace.y,
        &mut trace.yhat,
        &mut trace.e,
        &mut trace.a_hat,
        &mut trace.b_hat,
        &mut trace.c_hat,
    ] {
        v.reserve_exact(n);
    }
    if let Some(so) = trace.second_order.as_mut() {
        for v in [&mut so.e1, &mut so.e2, &mut so.eps] {
            v.reserve_exact(n);
        }
    }
    if let Some(inner) = trace.internals.as_mut() {
        for v in [
            &mut inner.du,
            &mut inner.x1,
            &mut inner.x2,
            &mut inner.xhat1,
            &mut inner.xhat2,
        ] {
            v.reserve_exact(n);
        }
    }
}
