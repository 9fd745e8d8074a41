//! Time-indexed record of an identification run.

use crate::adapt::{EstimatorKind, FilteredConfig};
use crate::plant::TrueParams;
use crate::scalar::Scalar;

/// State-error channels written for second-order estimators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SecondOrderChannels<T> {
    pub e1: Vec<T>,
    pub e2: Vec<T>,
    pub eps: Vec<T>,
}

/// Signals kept in memory but not part of the trace file schema.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceInternals<T> {
    pub du: Vec<T>,
    /// Regressor state seen by the estimator (plant state, or de-biased data).
    pub x1: Vec<T>,
    pub x2: Vec<T>,
    pub xhat1: Vec<T>,
    pub xhat2: Vec<T>,
}

/// Every sequence has one entry per grid point and `e[k] == yhat[k] - y[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T> {
    pub kind: EstimatorKind,
    pub t: Vec<T>,
    pub u: Vec<T>,
    pub y: Vec<T>,
    pub yhat: Vec<T>,
    pub e: Vec<T>,
    pub a_hat: Vec<T>,
    pub b_hat: Vec<T>,
    pub c_hat: Vec<T>,
    pub second_order: Option<SecondOrderChannels<T>>,
    pub internals: Option<TraceInternals<T>>,
    pub true_params: Option<TrueParams<T>>,
    pub filtered: FilteredConfig<T>,
}

/// Columns shared by every trace file, in order.
pub const BASE_COLUMNS: [&str; 8] = ["t", "u", "y", "yhat", "e", "a_hat", "b_hat", "c_hat"];
/// Extra columns for second-order estimators.
pub const SECOND_ORDER_COLUMNS: [&str; 3] = ["e1", "e2", "eps"];

impl<T: Scalar> RunTrace<T> {
    pub fn empty(kind: EstimatorKind) -> Self {
        Self {
            kind,
            t: Vec::new(),
            u: Vec::new(),
            y: Vec::new(),
            yhat: Vec::new(),
            e: Vec::new(),
            a_hat: Vec::new(),
            b_hat: Vec::new(),
            c_hat: Vec::new(),
            second_order: kind.is_second_order().then(SecondOrderChannels::default),
            internals: None,
            true_params: None,
            filtered: FilteredConfig::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `(â, b̂, ĉ)` at the last sample.
    pub fn final_params(&self) -> Option<(T, T, T)> {
        let k = self.len().checked_sub(1)?;
        Some((self.a_hat[k], self.b_hat[k], self.c_hat[k]))
    }

    /// Column names this trace serializes to.
    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols = BASE_COLUMNS.to_vec();
        if self.second_order.is_some() {
            cols.extend(SECOND_ORDER_COLUMNS);
        }
        cols
    }

    /// Looks up a channel by its column name (or an internal channel name).
    pub fn channel(&self, name: &str) -> Option<&[T]> {
        let so = self.second_order.as_ref();
        let inner = self.internals.as_ref();
        Some(match name {
            "t" => &self.t,
            "u" => &self.u,
            "y" => &self.y,
            "yhat" => &self.yhat,
            "e" => &self.e,
            "a_hat" => &self.a_hat,
            "b_hat" => &self.b_hat,
            "c_hat" => &self.c_hat,
            "e1" => &so?.e1,
            "e2" => &so?.e2,
            "eps" => &so?.eps,
            "du" => &inner?.du,
            "x1" => &inner?.x1,
            "x2" => &inner?.x2,
            "xhat1" => &inner?.xhat1,
            "xhat2" => &inner?.xhat2,
            _ => return None,
        })
    }

    /// Checks the shared-length and `e = yhat - y` invariants.
    pub fn is_consistent(&self) -> bool {
        let n = self.len();
        let base = [&self.u, &self.y, &self.yhat, &self.e, &self.a_hat, &self.b_hat, &self.c_hat]
            .iter()
            .all(|v| v.len() == n);
        let so = self
            .second_order
            .as_ref()
            .is_none_or(|s| s.e1.len() == n && s.e2.len() == n && s.eps.len() == n);
        let inner = self.internals.as_ref().is_none_or(|i| {
            [&i.du, &i.x1, &i.x2, &i.xhat1, &i.xhat2]
                .iter()
                .all(|v| v.len() == n)
        });
        base && so
            && inner
            && self
                .e
                .iter()
                .zip(self.yhat.iter().zip(&self.y))
                .all(|(&e, (&yh, &y))| e == yh - y)
    }
}

/// Record of a plant-only simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlantTrace<T> {
    pub t: Vec<T>,
    pub u: Vec<T>,
    pub du: Vec<T>,
    pub y: Vec<T>,
    /// One vector per plant state component.
    pub x: Vec<Vec<T>>,
}

impl<T> PlantTrace<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}
