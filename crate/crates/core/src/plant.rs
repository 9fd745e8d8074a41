//! Ground-truth plant models and the static output stage.
//!
//! All plants are single-input. First-order plants carry one state `x`;
//! the second-order plant carries `[x1, x2] = [x, dx/dt]`. The input rate
//! `du` is always supplied by the caller (from the stimulus's analytic
//! derivative), never differenced here.

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{IntegrateError, Integrator, Scheme, TimeGrid};
use crate::scalar::Scalar;
use crate::signalgen::Stimulus;
use crate::trace::PlantTrace;

/// Basal nuclear Hog1 level observed without stimulus.
pub const BASAL_LEVEL_R0: f64 = 1.237;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("plant coefficient `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("unstable plant: {0} (set allow_unstable to simulate it anyway)")]
    Unstable(String),
    #[error("state has {got} components, plant expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("basal level R0 must be finite and >= 0, got {0}")]
    InvalidR0(f64),
}

fn check_finite<T: Scalar>(fields: &[(&'static str, T)]) -> Result<(), PlantError> {
    match fields.iter().find(|(_, v)| !v.is_finite()) {
        Some((name, _)) => Err(PlantError::NonFinite(name)),
        None => Ok(()),
    }
}

/// `dx/dt + a x = b u`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderPlant<T> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> FirstOrderPlant<T> {
    pub fn new(a: T, b: T) -> Result<Self, PlantError> {
        let p = Self::new_allow_unstable(a, b)?;
        if a <= T::zero() {
            return Err(PlantError::Unstable(format!("first-order pole requires a > 0, got a = {a}")));
        }
        Ok(p)
    }

    /// Skips the stability requirement but still rejects non-finite values.
    pub fn new_allow_unstable(a: T, b: T) -> Result<Self, PlantError> {
        check_finite(&[("a", a), ("b", b)])?;
        Ok(Self { a, b })
    }
}

/// `dx/dt + a x = b u + c du/dt`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderDerivPlant<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> FirstOrderDerivPlant<T> {
    pub fn new(a: T, b: T, c: T) -> Result<Self, PlantError> {
        let p = Self::new_allow_unstable(a, b, c)?;
        if a <= T::zero() {
            return Err(PlantError::Unstable(format!("first-order pole requires a > 0, got a = {a}")));
        }
        Ok(p)
    }

    pub fn new_allow_unstable(a: T, b: T, c: T) -> Result<Self, PlantError> {
        check_finite(&[("a", a), ("b", b), ("c", c)])?;
        Ok(Self { a, b, c })
    }
}

/// `d2x/dt2 + a dx/dt + b x = c u`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderPlant<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> SecondOrderPlant<T> {
    pub fn new(a: T, b: T, c: T) -> Result<Self, PlantError> {
        let p = Self::new_allow_unstable(a, b, c)?;
        if a <= T::zero() || b <= T::zero() {
            return Err(PlantError::Unstable(format!(
                "s^2 + {a} s + {b} is not Hurwitz (needs a > 0 and b > 0)"
            )));
        }
        Ok(p)
    }

    pub fn new_allow_unstable(a: T, b: T, c: T) -> Result<Self, PlantError> {
        check_finite(&[("a", a), ("b", b), ("c", c)])?;
        Ok(Self { a, b, c })
    }
}

/// `dx/dt = β1 x + β2 x² + β3 x³ + c1 u + c2 u² + c3 u³`
///
/// Blow-up is not prevented here; the integrator reports it as divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyPlant<T> {
    pub beta: [T; 3],
    pub c: [T; 3],
}

impl<T: Scalar> PolyPlant<T> {
    pub fn new(beta: [T; 3], c: [T; 3]) -> Result<Self, PlantError> {
        check_finite(&[
            ("beta1", beta[0]),
            ("beta2", beta[1]),
            ("beta3", beta[2]),
            ("c1", c[0]),
            ("c2", c[1]),
            ("c3", c[2]),
        ])?;
        Ok(Self { beta, c })
    }

    /// Linear in the control: `c2 = c3 = 0`.
    pub fn linear_in_control(beta: [T; 3], c1: T) -> Result<Self, PlantError> {
        Self::new(beta, [c1, T::zero(), T::zero()])
    }
}

/// Coefficients `(a, b, c)` of a plant in the linear model ladder, used as
/// ground truth for parameter errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plant<T> {
    FirstOrder(FirstOrderPlant<T>),
    FirstOrderDeriv(FirstOrderDerivPlant<T>),
    SecondOrder(SecondOrderPlant<T>),
    Poly(PolyPlant<T>),
}

impl<T: Scalar> Plant<T> {
    pub fn order(&self) -> usize {
        match self {
            Plant::SecondOrder(_) => 2,
            _ => 1,
        }
    }

    pub fn preset_name(&self) -> &'static str {
        match self {
            Plant::FirstOrder(_) => "first-order",
            Plant::FirstOrderDeriv(_) => "first-order-deriv",
            Plant::SecondOrder(_) => "second-order",
            Plant::Poly(_) => "poly",
        }
    }

    /// Right-hand side of the plant ODE in state-space form.
    pub fn dynamics(&self, state: &[T], u: T, du: T, out: &mut [T]) -> Result<(), PlantError> {
        let n = self.order();
        if state.len() != n || out.len() != n {
            return Err(PlantError::Dimension {
                expected: n,
                got: state.len().min(out.len()),
            });
        }
        self.rhs(state, u, du, out);
        Ok(())
    }

    /// Unchecked variant of [`Plant::dynamics`] for inner loops.
    #[inline]
    pub(crate) fn rhs(&self, x: &[T], u: T, du: T, out: &mut [T]) {
        match self {
            Plant::FirstOrder(p) => out[0] = -p.a * x[0] + p.b * u,
            Plant::FirstOrderDeriv(p) => out[0] = -p.a * x[0] + p.b * u + p.c * du,
            Plant::SecondOrder(p) => {
                out[0] = x[1];
                out[1] = -p.a * x[1] - p.b * x[0] + p.c * u;
            }
            Plant::Poly(p) => {
                let x = x[0];
                let drift = x * (p.beta[0] + x * (p.beta[1] + x * p.beta[2]));
                let input = u * (p.c[0] + u * (p.c[1] + u * p.c[2]));
                out[0] = drift + input;
            }
        }
    }

    /// Ground-truth coefficients when the plant belongs to the linear ladder.
    /// A poly plant qualifies only when it reduces to a first-order plant.
    pub fn true_params(&self) -> Option<TrueParams<T>> {
        let z = T::zero();
        match *self {
            Plant::FirstOrder(p) => Some(TrueParams { a: p.a, b: p.b, c: z }),
            Plant::FirstOrderDeriv(p) => Some(TrueParams { a: p.a, b: p.b, c: p.c }),
            Plant::SecondOrder(p) => Some(TrueParams { a: p.a, b: p.b, c: p.c }),
            Plant::Poly(p) => (p.beta[1] == z && p.beta[2] == z && p.c[1] == z && p.c[2] == z)
                .then_some(TrueParams { a: -p.beta[0], b: p.c[0], c: z }),
        }
    }

    /// Equilibrium output under a constant input, for the linear plants.
    pub fn steady_state(&self, u: T) -> Option<T> {
        match *self {
            Plant::FirstOrder(p) => Some(p.b / p.a * u),
            Plant::FirstOrderDeriv(p) => Some(p.b / p.a * u),
            Plant::SecondOrder(p) => Some(p.c / p.b * u),
            Plant::Poly(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageMode {
    #[default]
    None,
    AdditiveOffset,
    Floor,
}

/// Static output map from the plant state `x` to the measured output `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputStage<T> {
    pub mode: StageMode,
    pub r0: T,
}

impl<T: Scalar> Default for OutputStage<T> {
    fn default() -> Self {
        Self {
            mode: StageMode::None,
            r0: T::lit(BASAL_LEVEL_R0),
        }
    }
}

impl<T: Scalar> OutputStage<T> {
    pub fn new(mode: StageMode, r0: T) -> Result<Self, PlantError> {
        if !r0.is_finite() || r0 < T::zero() {
            return Err(PlantError::InvalidR0(r0.to_f64_lossy()));
        }
        Ok(Self { mode, r0 })
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// Additive offset at the basal level, the default for biological presets.
    pub fn basal_offset() -> Self {
        Self {
            mode: StageMode::AdditiveOffset,
            r0: T::lit(BASAL_LEVEL_R0),
        }
    }

    #[inline]
    pub fn apply(&self, x: T) -> T {
        match self.mode {
            StageMode::None => x,
            StageMode::AdditiveOffset => x + self.r0,
            StageMode::Floor => x.max(self.r0),
        }
    }

    /// Best inverse of [`OutputStage::apply`]. The floor is not invertible
    /// and passes measurements through unchanged.
    #[inline]
    pub fn debias(&self, y: T) -> T {
        match self.mode {
            StageMode::AdditiveOffset => y - self.r0,
            StageMode::None | StageMode::Floor => y,
        }
    }
}

/// Measured output of `plant` in `state`.
pub fn observe<T: Scalar>(_plant: &Plant<T>, stage: &OutputStage<T>, state: &[T]) -> T {
    stage.apply(state[0])
}

/// Simulates `plant` alone under `stimulus`, recording its measured output.
pub fn simulate_plant<T: Scalar>(
    plant: &Plant<T>,
    stage: &OutputStage<T>,
    stimulus: &Stimulus<T>,
    grid: &TimeGrid<T>,
    scheme: Scheme,
    x0: Option<&[T]>,
) -> Result<PlantTrace<T>, PlantSimError> {
    let n = plant.order();
    let x0 = match x0 {
        Some(x) if x.len() != n => {
            return Err(PlantError::Dimension {
                expected: n,
                got: x.len(),
            }
            .into())
        }
        Some(x) => x.to_vec(),
        None => vec![T::zero(); n],
    };
    let mut x = x0;
    let mut tr = PlantTrace {
        x: vec![Vec::with_capacity(grid.len()); n],
        ..Default::default()
    };
    let record = |tr: &mut PlantTrace<T>, t: T, x: &[T]| {
        tr.t.push(t);
        tr.u.push(stimulus.eval(t));
        tr.du.push(stimulus.eval_derivative(t));
        tr.y.push(observe(plant, stage, x));
        for (i, v) in x.iter().enumerate() {
            tr.x[i].push(*v);
        }
    };
    // same breakpoint splitting as the identification loop
    let piece_du = Cell::new(T::zero());
    let mut rhs = |t: T, x: &[T], dx: &mut [T]| plant.rhs(x, stimulus.eval(t), piece_du.get(), dx);
    let mut stepper = Integrator::new(scheme, n);
    let mut knots = Vec::new();
    record(&mut tr, grid.time(0), &x);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let end = t + grid.dt();
        stimulus.breakpoints_between(t, end, &mut knots);
        knots.push(end);
        let mut from = t;
        let mut ok = true;
        for (i, &to) in knots.iter().enumerate() {
            let h = if i == 0 && knots.len() == 1 { grid.dt() } else { to - from };
            piece_du.set(stimulus.eval_derivative(from + h * T::lit(0.5)));
            ok &= stepper.advance(&mut rhs, from, &mut x, h);
            from = to;
        }
        if !ok {
            return Err(IntegrateError::Diverged {
                t: grid.time(k + 1).to_f64_lossy(),
                step: k + 1,
            }
            .into());
        }
        record(&mut tr, grid.time(k + 1), &x);
    }
    Ok(tr)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantSimError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}
