//! One metric observation from a learning run.

use serde::{Deserialize, Serialize};

use crate::losses::LossKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub iteration: u64,
    pub loss_kind: LossKind,
    pub alpha: f64,
    pub metric_name: String,
    /// Kept even when non-finite.
    pub metric_value: f64,
}

impl RunRecord {
    pub fn new(
        seed: u64,
        iteration: u64,
        loss_kind: LossKind,
        alpha: f64,
        metric_name: impl Into<String>,
        metric_value: f64,
    ) -> Self {
        Self { seed, iteration, loss_kind, alpha, metric_name: metric_name.into(), metric_value }
    }
}
