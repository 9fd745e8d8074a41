//! Stimulus signals `u(t)` and their exact time derivatives.
//!
//! Square pulses use trapezoidal edges of width `rise_time` so that the
//! derivative stays bounded: `+amplitude/rise_time` on rising edges,
//! `-amplitude/rise_time` on falling edges and zero on plateaus. At an exact
//! breakpoint the derivative reports the mean of its one-sided values, which
//! makes the trapezoid rule integrate it exactly on breakpoint-aligned grids.
//!
//! An amplitude of `1.0` encodes a 0.2 M NaCl pulse; physical molarity is
//! carried only as metadata elsewhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Edge width used when none is given, in minutes.
pub const DEFAULT_RISE_TIME: f64 = 0.05;
/// Fraction of each period spent high when none is given.
pub const DEFAULT_DUTY: f64 = 0.5;
/// Molar NaCl concentration represented by a unit amplitude.
pub const UNIT_AMPLITUDE_MOLAR_NACL: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StimulusError {
    #[error("stimulus field `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("amplitude must be >= 0, got {0}")]
    NegativeAmplitude(f64),
    #[error("period must be > 0, got {0}")]
    NonPositivePeriod(f64),
    #[error("duty must lie in (0, 1), got {0}")]
    DutyOutOfRange(f64),
    #[error("rise time {rise_time} must be > 0 and below {limit} (half of the shorter plateau)")]
    RiseTimeOutOfRange { rise_time: f64, limit: f64 },
    #[error("rise time must be > 0, got {0}")]
    NonPositiveRiseTime(f64),
    #[error("n_periods must be a positive integer")]
    ZeroPeriods,
    #[error("t_start must be >= 0, got {0}")]
    NegativeStart(f64),
    #[error("piecewise stimulus needs matching, non-empty time and value lists ({times} times, {values} values)")]
    PiecewiseLength { times: usize, values: usize },
    #[error("piecewise stimulus times must be strictly increasing (sample {index})")]
    PiecewiseNotIncreasing { index: usize },
}

/// Which family a [`Stimulus`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusKind {
    Square,
    Step,
    Constant,
    PiecewiseFromSamples,
}

/// Parameters of a trapezoidal square-pulse train.
///
/// Each period starts low and ramps up at its beginning (`t_start + k*period`),
/// stays high until `duty*period`, ramps down over another `rise_time` and
/// stays low for the remainder. Outside `[t_start, t_start + n_periods*period]`
/// the signal is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareWave<T> {
    pub amplitude: T,
    pub period: T,
    pub duty: T,
    pub rise_time: T,
    pub n_periods: u32,
    pub t_start: T,
}

impl<T: Scalar> SquareWave<T> {
    pub fn new(amplitude: T, period: T, n_periods: u32) -> Self {
        Self {
            amplitude,
            period,
            duty: T::lit(DEFAULT_DUTY),
            rise_time: T::lit(DEFAULT_RISE_TIME),
            n_periods,
            t_start: T::zero(),
        }
    }

    pub fn with_duty(mut self, duty: T) -> Self {
        self.duty = duty;
        self
    }

    pub fn with_rise_time(mut self, rise_time: T) -> Self {
        self.rise_time = rise_time;
        self
    }

    pub fn with_start(mut self, t_start: T) -> Self {
        self.t_start = t_start;
        self
    }

    /// End of the pulse train.
    pub fn end_time(&self) -> T {
        self.t_start + self.period * T::from_u32(self.n_periods).unwrap()
    }

    fn validate(&self) -> Result<(), StimulusError> {
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("period", self.period),
            ("duty", self.duty),
            ("rise_time", self.rise_time),
            ("t_start", self.t_start),
        ] {
            if !v.is_finite() {
                return Err(StimulusError::NonFinite(name));
            }
        }
        if self.amplitude < T::zero() {
            return Err(StimulusError::NegativeAmplitude(self.amplitude.to_f64_lossy()));
        }
        if self.period <= T::zero() {
            return Err(StimulusError::NonPositivePeriod(self.period.to_f64_lossy()));
        }
        if self.duty <= T::zero() || self.duty >= T::one() {
            return Err(StimulusError::DutyOutOfRange(self.duty.to_f64_lossy()));
        }
        let half = T::lit(0.5);
        let high = self.duty * self.period * half;
        let low = (T::one() - self.duty) * self.period * half;
        let limit = high.min(low);
        if self.rise_time <= T::zero() || self.rise_time >= limit {
            return Err(StimulusError::RiseTimeOutOfRange {
                rise_time: self.rise_time.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            });
        }
        if self.n_periods == 0 {
            return Err(StimulusError::ZeroPeriods);
        }
        if self.t_start < T::zero() {
            return Err(StimulusError::NegativeStart(self.t_start.to_f64_lossy()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape<T> {
    Square(SquareWave<T>),
    Step {
        amplitude: T,
        t_start: T,
        rise_time: T,
    },
    Constant(T),
    Piecewise {
        times: Vec<T>,
        values: Vec<T>,
    },
}

/// Where `t` falls relative to a breakpoint sequence.
enum Segment<T> {
    /// Strictly inside a segment with the given slope.
    Inside(T),
    /// Exactly on a breakpoint joining two slopes.
    Knot(T, T),
}

impl<T: Scalar> Segment<T> {
    fn slope(self) -> T {
        match self {
            Segment::Inside(s) => s,
            Segment::Knot(l, r) => (l + r) * T::lit(0.5),
        }
    }
}

/// An immutable, validated input signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus<T> {
    shape: Shape<T>,
}

impl<T: Scalar> Stimulus<T> {
    pub fn square(wave: SquareWave<T>) -> Result<Self, StimulusError> {
        wave.validate()?;
        Ok(Self {
            shape: Shape::Square(wave),
        })
    }

    /// Zero before `t_start`, a linear ramp over `rise_time`, then `amplitude`.
    pub fn step(amplitude: T, t_start: T, rise_time: T) -> Result<Self, StimulusError> {
        if !amplitude.is_finite() {
            return Err(StimulusError::NonFinite("amplitude"));
        }
        if !t_start.is_finite() {
            return Err(StimulusError::NonFinite("t_start"));
        }
        if !rise_time.is_finite() {
            return Err(StimulusError::NonFinite("rise_time"));
        }
        if amplitude < T::zero() {
            return Err(StimulusError::NegativeAmplitude(amplitude.to_f64_lossy()));
        }
        if t_start < T::zero() {
            return Err(StimulusError::NegativeStart(t_start.to_f64_lossy()));
        }
        if rise_time <= T::zero() {
            return Err(StimulusError::NonPositiveRiseTime(rise_time.to_f64_lossy()));
        }
        Ok(Self {
            shape: Shape::Step {
                amplitude,
                t_start,
                rise_time,
            },
        })
    }

    pub fn constant(amplitude: T) -> Result<Self, StimulusError> {
        if !amplitude.is_finite() {
            return Err(StimulusError::NonFinite("amplitude"));
        }
        if amplitude < T::zero() {
            return Err(StimulusError::NegativeAmplitude(amplitude.to_f64_lossy()));
        }
        Ok(Self {
            shape: Shape::Constant(amplitude),
        })
    }

    /// Linear interpolation through `(times[i], values[i])`, held constant
    /// outside the sampled range.
    pub fn piecewise(times: Vec<T>, values: Vec<T>) -> Result<Self, StimulusError> {
        if times.is_empty() || times.len() != values.len() {
            return Err(StimulusError::PiecewiseLength {
                times: times.len(),
                values: values.len(),
            });
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(StimulusError::NonFinite("samples"));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(StimulusError::PiecewiseNotIncreasing { index: i + 1 });
        }
        Ok(Self {
            shape: Shape::Piecewise { times, values },
        })
    }

    pub fn kind(&self) -> StimulusKind {
        match self.shape {
            Shape::Square(_) => StimulusKind::Square,
            Shape::Step { .. } => StimulusKind::Step,
            Shape::Constant(_) => StimulusKind::Constant,
            Shape::Piecewise { .. } => StimulusKind::PiecewiseFromSamples,
        }
    }

    pub fn as_square(&self) -> Option<&SquareWave<T>> {
        match &self.shape {
            Shape::Square(w) => Some(w),
            _ => None,
        }
    }

    /// Shortest edge duration, which bounds the usable integration step.
    pub fn rise_time(&self) -> Option<T> {
        match &self.shape {
            Shape::Square(w) => Some(w.rise_time),
            Shape::Step { rise_time, .. } => Some(*rise_time),
            _ => None,
        }
    }

    pub fn eval(&self, t: T) -> T {
        match &self.shape {
            Shape::Square(w) => square_value(w, t),
            Shape::Step {
                amplitude,
                t_start,
                rise_time,
            } => {
                if t <= *t_start {
                    T::zero()
                } else if t >= *t_start + *rise_time {
                    *amplitude
                } else {
                    *amplitude * (t - *t_start) / *rise_time
                }
            }
            Shape::Constant(a) => *a,
            Shape::Piecewise { times, values } => interpolate(times, values, t),
        }
    }

    pub fn eval_derivative(&self, t: T) -> T {
        match &self.shape {
            Shape::Square(w) => square_segment(w, t).slope(),
            Shape::Step {
                amplitude,
                t_start,
                rise_time,
            } => {
                let slope = *amplitude / *rise_time;
                let end = *t_start + *rise_time;
                if t < *t_start || t > end {
                    T::zero()
                } else if t == *t_start || t == end {
                    slope * T::lit(0.5)
                } else {
                    slope
                }
            }
            Shape::Constant(_) => T::zero(),
            Shape::Piecewise { times, values } => piecewise_segment(times, values, t).slope(),
        }
    }
}

impl<T: Scalar> Stimulus<T> {
    /// Replaces `out` with the slope breakpoints strictly inside `(t0, t1)`,
    /// ascending. Between consecutive breakpoints the signal is linear.
    pub fn breakpoints_between(&self, t0: T, t1: T, out: &mut Vec<T>) {
        out.clear();
        let mut push = |t: T| {
            if t > t0 && t < t1 {
                out.push(t);
            }
        };
        match &self.shape {
            Shape::Square(w) => {
                if t1 <= w.t_start || t0 >= w.end_time() {
                    return;
                }
                let first = ((t0 - w.t_start) / w.period).floor().max(T::zero());
                let high = w.duty * w.period;
                let offsets = [T::zero(), w.rise_time, high, high + w.rise_time];
                let mut k = first.to_u32().unwrap_or(0);
                while k < w.n_periods {
                    let start = w.t_start + T::from_u32(k).unwrap() * w.period;
                    if start >= t1 {
                        break;
                    }
                    for off in offsets {
                        push(start + off);
                    }
                    k += 1;
                }
            }
            Shape::Step { t_start, rise_time, .. } => {
                push(*t_start);
                push(*t_start + *rise_time);
            }
            Shape::Constant(_) => {}
            Shape::Piecewise { times, .. } => {
                let lo = times.partition_point(|&s| s <= t0);
                for &s in times[lo..].iter().take_while(|&&s| s < t1) {
                    push(s);
                }
            }
        }
    }
}

/// Phase of `t` inside its period, or `None` outside the pulse window.
fn square_phase<T: Scalar>(w: &SquareWave<T>, t: T) -> Option<T> {
    let rel = t - w.t_start;
    if rel < T::zero() || t >= w.end_time() {
        return None;
    }
    let k = (rel / w.period).floor();
    let p = rel - k * w.period;
    Some(p.max(T::zero()).min(w.period))
}

fn square_value<T: Scalar>(w: &SquareWave<T>, t: T) -> T {
    let Some(p) = square_phase(w, t) else {
        return T::zero();
    };
    let high = w.duty * w.period;
    let v = if p < w.rise_time {
        w.amplitude * p / w.rise_time
    } else if p < high {
        w.amplitude
    } else if p < high + w.rise_time {
        w.amplitude * (high + w.rise_time - p) / w.rise_time
    } else {
        T::zero()
    };
    v.max(T::zero()).min(w.amplitude)
}

fn square_segment<T: Scalar>(w: &SquareWave<T>, t: T) -> Segment<T> {
    let Some(p) = square_phase(w, t) else {
        return Segment::Inside(T::zero());
    };
    let slope = w.amplitude / w.rise_time;
    let high = w.duty * w.period;
    let fall_end = high + w.rise_time;
    let zero = T::zero();
    if p == zero {
        Segment::Knot(zero, slope)
    } else if p < w.rise_time {
        Segment::Inside(slope)
    } else if p == w.rise_time {
        Segment::Knot(slope, zero)
    } else if p < high {
        Segment::Inside(zero)
    } else if p == high {
        Segment::Knot(zero, -slope)
    } else if p < fall_end {
        Segment::Inside(-slope)
    } else if p == fall_end {
        Segment::Knot(-slope, zero)
    } else {
        Segment::Inside(zero)
    }
}

pub(crate) fn interpolate<T: Scalar>(times: &[T], values: &[T], t: T) -> T {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    // first index with times[i] > t; 1 <= i <= n-1 here
    let i = times.partition_point(|&s| s <= t);
    let (t0, t1) = (times[i - 1], times[i]);
    let (v0, v1) = (values[i - 1], values[i]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

fn piecewise_segment<T: Scalar>(times: &[T], values: &[T], t: T) -> Segment<T> {
    let n = times.len();
    let slope = |i: usize| (values[i + 1] - values[i]) / (times[i + 1] - times[i]);
    if n == 1 || t < times[0] || t > times[n - 1] {
        return Segment::Inside(T::zero());
    }
    let i = times.partition_point(|&s| s < t);
    if i < n && times[i] == t {
        let left = if i == 0 { T::zero() } else { slope(i - 1) };
        let right = if i == n - 1 { T::zero() } else { slope(i) };
        Segment::Knot(left, right)
    } else {
        Segment::Inside(slope(i - 1))
    }
}

/// One row of the periodic-shock measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolEntry {
    /// Square-wave period in minutes.
    pub period: u32,
    pub n_periods: u32,
}

impl ProtocolEntry {
    pub fn duration(&self) -> u32 {
        self.period * self.n_periods
    }

    /// Unit-amplitude square wave with default duty and edges.
    pub fn stimulus<T: Scalar>(&self) -> Stimulus<T> {
        Stimulus::square(SquareWave::new(
            T::one(),
            T::from_u32(self.period).unwrap(),
            self.n_periods,
        ))
        .expect("protocol entries are valid square waves")
    }
}

const PROTOCOL: [ProtocolEntry; 6] = [
    ProtocolEntry { period: 2, n_periods: 10 },
    ProtocolEntry { period: 4, n_periods: 8 },
    ProtocolEntry { period: 8, n_periods: 8 },
    ProtocolEntry { period: 16, n_periods: 6 },
    ProtocolEntry { period: 32, n_periods: 4 },
    ProtocolEntry { period: 64, n_periods: 4 },
];

/// The periods and repeat counts used in the periodic-shock experiments.
pub fn protocol_table() -> &'static [ProtocolEntry] {
    &PROTOCOL
}
