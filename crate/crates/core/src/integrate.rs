//! Fixed-step explicit integration on a uniform time grid.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Default step in minutes.
pub const DEFAULT_DT: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("integration diverged at t = {t} (step {step}): non-finite state component")]
    Diverged { t: f64, step: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Rk4,
    Euler,
}

/// Uniform grid `t0, t0 + dt, ..., t1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    t0: T,
    t1: T,
    dt: T,
    steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t0: T, t1: T, dt: T) -> Result<Self, IntegrateError> {
        if !(t0.is_finite() && t1.is_finite() && dt.is_finite()) {
            return Err(IntegrateError::InvalidGrid("non-finite bound or step".into()));
        }
        if t0 >= t1 {
            return Err(IntegrateError::InvalidGrid(format!("t0 ({t0}) must be < t1 ({t1})")));
        }
        if dt <= T::zero() {
            return Err(IntegrateError::InvalidGrid(format!("dt must be > 0, got {dt}")));
        }
        let ratio = (t1 - t0) / dt;
        let steps = ratio.round();
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(4.0)) * steps.max(T::one());
        if (ratio - steps).abs() > tol {
            return Err(IntegrateError::InvalidGrid(format!(
                "span {} is not an integer multiple of dt {dt}",
                t1 - t0
            )));
        }
        let steps = steps
            .to_usize()
            .ok_or_else(|| IntegrateError::InvalidGrid("too many steps".into()))?;
        Ok(Self { t0, t1, dt, steps })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn t1(&self) -> T {
        self.t1
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of point `k`, computed as `t0 + k*dt` so it does not drift.
    #[inline]
    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt * T::from_usize(k).unwrap()
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }
}

/// Ordered state components of a simulated system.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector<T>(pub Vec<T>);

impl<T: Scalar> StateVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T> From<Vec<T>> for StateVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

impl<T> Deref for StateVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for StateVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

/// Reusable stepper holding scratch buffers for one state dimension.
///
/// The right-hand side is `f(t, x, dx)`, writing the derivative into `dx`.
#[derive(Debug, Clone)]
pub struct Integrator<T> {
    scheme: Scheme,
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Integrator<T> {
    pub fn new(scheme: Scheme, dim: usize) -> Self {
        let z = vec![T::zero(); dim];
        Self {
            scheme,
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Advances `x` in place from `t` to `t + dt`. The state is left updated
    /// even when it turns non-finite; callers decide what to report.
    pub fn advance<F>(&mut self, f: &mut F, t: T, x: &mut [T], dt: T) -> bool
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        debug_assert_eq!(x.len(), self.k1.len());
        match self.scheme {
            Scheme::Euler => {
                f(t, x, &mut self.k1);
                for (xi, ki) in x.iter_mut().zip(&self.k1) {
                    *xi += dt * *ki;
                }
            }
            #[allow(clippy::needless_range_loop)]
            Scheme::Rk4 => {
                let half = dt * T::lit(0.5);
                let sixth = dt / T::lit(6.0);
                let two = T::lit(2.0);
                f(t, x, &mut self.k1);
                for i in 0..x.len() {
                    self.tmp[i] = x[i] + half * self.k1[i];
                }
                f(t + half, &self.tmp, &mut self.k2);
                for i in 0..x.len() {
                    self.tmp[i] = x[i] + half * self.k2[i];
                }
                f(t + half, &self.tmp, &mut self.k3);
                for i in 0..x.len() {
                    self.tmp[i] = x[i] + dt * self.k3[i];
                }
                f(t + dt, &self.tmp, &mut self.k4);
                for i in 0..x.len() {
                    x[i] += sixth * (self.k1[i] + two * self.k2[i] + two * self.k3[i] + self.k4[i]);
                }
            }
        }
        x.iter().all(|v| v.is_finite())
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn step_rk4<T, F>(
    mut f: F,
    t: T,
    state: &StateVector<T>,
    dt: T,
) -> Result<StateVector<T>, IntegrateError>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]),
{
    let mut next = state.clone();
    let mut stepper = Integrator::new(Scheme::Rk4, state.len());
    if stepper.advance(&mut f, t, &mut next, dt) {
        Ok(next)
    } else {
        Err(IntegrateError::Diverged {
            t: (t + dt).to_f64_lossy(),
            step: 1,
        })
    }
}

/// Integrates `f` over `grid` from `x0`, returning every grid point.
pub fn simulate<T, F>(
    mut f: F,
    grid: &TimeGrid<T>,
    x0: StateVector<T>,
    scheme: Scheme,
) -> Result<Vec<(T, StateVector<T>)>, IntegrateError>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]),
{
    if !x0.is_finite() {
        return Err(IntegrateError::Diverged {
            t: grid.t0().to_f64_lossy(),
            step: 0,
        });
    }
    let mut stepper = Integrator::new(scheme, x0.len());
    let mut out = Vec::with_capacity(grid.len());
    let mut x = x0;
    out.push((grid.t0(), x.clone()));
    for k in 0..grid.steps() {
        if !stepper.advance(&mut f, grid.time(k), &mut x, grid.dt()) {
            return Err(IntegrateError::Diverged {
                t: grid.time(k + 1).to_f64_lossy(),
                step: k + 1,
            });
        }
        out.push((grid.time(k + 1), x.clone()));
    }
    Ok(out)
}
