//! Online adaptive estimators and their gradient adaptation laws.
//!
//! Four estimators form a ladder of model classes:
//!
//! | kind          | estimator dynamics                                              | adapted |
//! |---------------|-----------------------------------------------------------------|---------|
//! | `fo`          | `x̂' = -â x̂ + b̂ u`                                               | â, b̂    |
//! | `fo-deriv`    | `x̂' = -â x̂ + b̂ u + ĉ u'`                                        | â, b̂, ĉ |
//! | `so`          | `x̂1' = x̂2`, `x̂2' = -â x̂2 - b̂ x̂1 + ĉ u`                          | â, b̂, ĉ |
//! | `so-filtered` | `x̂2' = -λ1 x̂2 - (â-λ1) x2 - λ2 x̂1 - (b̂-λ2) x1 + ĉ u`             | â, b̂, ĉ |
//!
//! The second-order laws come in two sign conventions. [`LawVariant::PaperLiteral`]
//! drives `ĉ` with `+e2 u` (or `+ε u`); [`LawVariant::LyapunovCorrected`] flips
//! that sign so the `c̃` term cancels in the Lyapunov derivative. The
//! first-order laws are the same under both variants.

mod identify;

pub use identify::{identify, DatasetSignals, IdentifyError, IdentifyOptions, Source};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::OutputStage;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptError {
    #[error("adaptation gain `{0}` must be finite and >= 0")]
    InvalidGain(&'static str),
    #[error("reference polynomial s^2 + {lambda1} s + {lambda2} is not Hurwitz")]
    NotHurwitz { lambda1: f64, lambda2: f64 },
    #[error("composite-error weight `{0}` is not finite")]
    InvalidWeight(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "fo")]
    FirstOrder,
    #[serde(rename = "fo-deriv")]
    FirstOrderDeriv,
    #[serde(rename = "so")]
    SecondOrder,
    #[serde(rename = "so-filtered")]
    FilteredSecondOrder,
}

impl EstimatorKind {
    pub fn preset_name(&self) -> &'static str {
        match self {
            EstimatorKind::FirstOrder => "fo",
            EstimatorKind::FirstOrderDeriv => "fo-deriv",
            EstimatorKind::SecondOrder => "so",
            EstimatorKind::FilteredSecondOrder => "so-filtered",
        }
    }

    pub fn from_preset(name: &str) -> Option<Self> {
        match name {
            "fo" => Some(EstimatorKind::FirstOrder),
            "fo-deriv" => Some(EstimatorKind::FirstOrderDeriv),
            "so" => Some(EstimatorKind::SecondOrder),
            "so-filtered" => Some(EstimatorKind::FilteredSecondOrder),
            _ => None,
        }
    }

    pub fn is_second_order(&self) -> bool {
        matches!(self, EstimatorKind::SecondOrder | EstimatorKind::FilteredSecondOrder)
    }

    /// Whether `ĉ` is part of the model.
    pub fn adapts_c(&self) -> bool {
        !matches!(self, EstimatorKind::FirstOrder)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawVariant {
    #[default]
    PaperLiteral,
    LyapunovCorrected,
}

impl LawVariant {
    pub fn name(&self) -> &'static str {
        match self {
            LawVariant::PaperLiteral => "paper-literal",
            LawVariant::LyapunovCorrected => "lyapunov-corrected",
        }
    }
}

/// Adaptation gains. A zero gain freezes its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub variant: LawVariant,
}

impl<T: Scalar> Default for Gains<T> {
    fn default() -> Self {
        Self::unit(LawVariant::default())
    }
}

impl<T: Scalar> Gains<T> {
    pub fn new(a: T, b: T, c: T, variant: LawVariant) -> Result<Self, AdaptError> {
        for (name, g) in [("a", a), ("b", b), ("c", c)] {
            if !g.is_finite() || g < T::zero() {
                return Err(AdaptError::InvalidGain(name));
            }
        }
        Ok(Self { a, b, c, variant })
    }

    pub fn unit(variant: LawVariant) -> Self {
        Self {
            a: T::one(),
            b: T::one(),
            c: T::one(),
            variant,
        }
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            a: self.a * k,
            b: self.b * k,
            c: self.c * k,
            variant: self.variant,
        }
    }

    /// Sign applied to the `ĉ` law of the second-order estimators.
    fn c_sign(&self) -> T {
        match self.variant {
            LawVariant::PaperLiteral => T::one(),
            LawVariant::LyapunovCorrected => -T::one(),
        }
    }
}

/// Reference polynomial `s² + λ1 s + λ2` and composite-error weights
/// `ε = w1 e1 + w2 e2` of the filtered second-order estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredConfig<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub w1: T,
    pub w2: T,
}

impl<T: Scalar> Default for FilteredConfig<T> {
    fn default() -> Self {
        Self {
            lambda1: T::lit(0.2),
            lambda2: T::lit(0.1),
            w1: T::lit(0.5),
            w2: T::lit(9.0),
        }
    }
}

impl<T: Scalar> FilteredConfig<T> {
    pub fn new(lambda1: T, lambda2: T, w1: T, w2: T) -> Result<Self, AdaptError> {
        if !(lambda1.is_finite() && lambda2.is_finite()) || lambda1 <= T::zero() || lambda2 <= T::zero() {
            return Err(AdaptError::NotHurwitz {
                lambda1: lambda1.to_f64_lossy(),
                lambda2: lambda2.to_f64_lossy(),
            });
        }
        if !w1.is_finite() {
            return Err(AdaptError::InvalidWeight("w1"));
        }
        if !w2.is_finite() {
            return Err(AdaptError::InvalidWeight("w2"));
        }
        Ok(Self { lambda1, lambda2, w1, w2 })
    }

    #[inline]
    pub fn composite_error(&self, e1: T, e2: T) -> T {
        self.w1 * e1 + self.w2 * e2
    }

    /// Symmetric `P = [[p11, w1], [w1, w2]]` with `p11 = λ1 w1 + λ2 w2`, the
    /// unique choice making `Aᵀ P + P A` diagonal for the companion matrix of
    /// the reference polynomial, so that `Pb = (w1, w2)` and `bᵀ P e = ε`.
    pub fn lyapunov_matrix(&self) -> [[T; 2]; 2] {
        let p11 = self.lambda1 * self.w1 + self.lambda2 * self.w2;
        [[p11, self.w1], [self.w1, self.w2]]
    }

    /// True when `P` is positive definite and `Aᵀ P + P A` negative definite,
    /// i.e. the corrected laws give a non-increasing Lyapunov function.
    pub fn is_lyapunov_consistent(&self) -> bool {
        let [[p11, p12], [_, p22]] = self.lyapunov_matrix();
        let pd = p11 > T::zero() && p11 * p22 - p12 * p12 > T::zero();
        let q = self.w1 > T::zero() && self.w1 < self.lambda1 * self.w2;
        pd && q
    }
}

/// Estimator states and parameter estimates. `xhat2` is unused by the
/// first-order kinds and `c` by `fo`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimatorState<T> {
    pub xhat1: T,
    pub xhat2: T,
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> EstimatorState<T> {
    pub fn with_params(a: T, b: T, c: T) -> Self {
        Self {
            xhat1: T::zero(),
            xhat2: T::zero(),
            a,
            b,
            c,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.xhat1, self.xhat2, self.a, self.b, self.c]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Plant-side signals available to an estimator at one instant: the
/// (de-biased) state `x1`, its rate `x2`, the input and its rate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Measured<T> {
    pub x1: T,
    pub x2: T,
    pub u: T,
    pub du: T,
}

/// Time derivatives of every estimator component plus the error signal
/// driving adaptation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rates<T> {
    pub xhat1: T,
    pub xhat2: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub eps: T,
}

/// `(â', b̂') = (γa e x̂, -γb e u)`.
#[inline]
pub fn first_order_laws<T: Scalar>(e: T, xhat: T, u: T, gains: &Gains<T>) -> (T, T) {
    (gains.a * e * xhat, -gains.b * e * u)
}

/// First-order laws plus `ĉ' = -γc e u'`.
#[inline]
pub fn first_order_deriv_laws<T: Scalar>(e: T, xhat: T, u: T, du: T, gains: &Gains<T>) -> (T, T, T) {
    let (da, db) = first_order_laws(e, xhat, u, gains);
    (da, db, -gains.c * e * du)
}

/// `(γa e2 x̂2, γb e2 x̂1, ±γc e2 u)`; the `ĉ` sign follows the law variant.
#[inline]
pub fn second_order_laws<T: Scalar>(e2: T, xhat1: T, xhat2: T, u: T, gains: &Gains<T>) -> (T, T, T) {
    (
        gains.a * e2 * xhat2,
        gains.b * e2 * xhat1,
        gains.c_sign() * gains.c * e2 * u,
    )
}

/// Series-parallel second-order estimator with a fixed reference polynomial.
/// The true plant states `x1`, `x2` enter as regressors.
pub fn filtered_second_order_step<T: Scalar>(
    m: &Measured<T>,
    est: &EstimatorState<T>,
    cfg: &FilteredConfig<T>,
    gains: &Gains<T>,
) -> Rates<T> {
    let e1 = est.xhat1 - m.x1;
    let e2 = est.xhat2 - m.x2;
    let eps = cfg.composite_error(e1, e2);
    let dxhat2 = -cfg.lambda1 * est.xhat2 - (est.a - cfg.lambda1) * m.x2 - cfg.lambda2 * est.xhat1
        - (est.b - cfg.lambda2) * m.x1
        + est.c * m.u;
    Rates {
        xhat1: est.xhat2,
        xhat2: dxhat2,
        a: gains.a * eps * m.x2,
        b: gains.b * eps * m.x1,
        c: gains.c_sign() * gains.c * eps * m.u,
        eps,
    }
}

/// A configured estimator of one kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimator<T> {
    pub kind: EstimatorKind,
    pub gains: Gains<T>,
    pub filtered: FilteredConfig<T>,
    /// Keep `â, b̂ >= 0` by blocking outward motion at the boundary.
    pub projection: bool,
    /// Static output map applied to `x̂1` to form the estimator's output.
    pub output_stage: OutputStage<T>,
}

impl<T: Scalar> Estimator<T> {
    pub fn new(kind: EstimatorKind, gains: Gains<T>) -> Self {
        Self {
            kind,
            gains,
            filtered: FilteredConfig::default(),
            projection: false,
            output_stage: OutputStage::identity(),
        }
    }

    pub fn with_filtered(mut self, cfg: FilteredConfig<T>) -> Self {
        self.filtered = cfg;
        self
    }

    pub fn with_projection(mut self, on: bool) -> Self {
        self.projection = on;
        self
    }

    pub fn with_output_stage(mut self, stage: OutputStage<T>) -> Self {
        self.output_stage = stage;
        self
    }

    /// Right-hand side of the estimator and its adaptation laws.
    pub fn rates(&self, est: &EstimatorState<T>, m: &Measured<T>) -> Rates<T> {
        let g = &self.gains;
        let mut r = match self.kind {
            EstimatorKind::FirstOrder => {
                let e = est.xhat1 - m.x1;
                let (da, db) = first_order_laws(e, est.xhat1, m.u, g);
                Rates {
                    xhat1: -est.a * est.xhat1 + est.b * m.u,
                    xhat2: T::zero(),
                    a: da,
                    b: db,
                    c: T::zero(),
                    eps: e,
                }
            }
            EstimatorKind::FirstOrderDeriv => {
                let e = est.xhat1 - m.x1;
                let (da, db, dc) = first_order_deriv_laws(e, est.xhat1, m.u, m.du, g);
                Rates {
                    xhat1: -est.a * est.xhat1 + est.b * m.u + est.c * m.du,
                    xhat2: T::zero(),
                    a: da,
                    b: db,
                    c: dc,
                    eps: e,
                }
            }
            EstimatorKind::SecondOrder => {
                let e2 = est.xhat2 - m.x2;
                let (da, db, dc) = second_order_laws(e2, est.xhat1, est.xhat2, m.u, g);
                Rates {
                    xhat1: est.xhat2,
                    xhat2: -est.a * est.xhat2 - est.b * est.xhat1 + est.c * m.u,
                    a: da,
                    b: db,
                    c: dc,
                    eps: e2,
                }
            }
            EstimatorKind::FilteredSecondOrder => filtered_second_order_step(m, est, &self.filtered, g),
        };
        if self.projection {
            if est.a <= T::zero() && r.a < T::zero() {
                r.a = T::zero();
            }
            if est.b <= T::zero() && r.b < T::zero() {
                r.b = T::zero();
            }
        }
        r
    }

    /// Post-step clamp that keeps the projected parameters in bounds.
    pub(crate) fn project(&self, est: &mut EstimatorState<T>) {
        if self.projection {
            est.a = est.a.max(T::zero());
            est.b = est.b.max(T::zero());
        }
    }
}
