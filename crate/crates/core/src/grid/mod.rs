//! Network data, admittance assembly and study-model evaluation.

pub mod admittance;
pub mod builtin;
pub mod case;
pub mod model;
pub mod quad;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use admittance::{build_admittance, network_admittance, series_admittance};
pub use case::{BranchSpec, BusKind, BusSpec, GridCase, ZipNominal, ZipSplit};
pub use model::{
    Adjustable, MetricMap, MetricOutput, MetricSelector, MetricSpec, ModelKind, OperatingPoint,
    Quantity, StudyModel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid case: {0}")]
    Invalid(String),
    #[error("unknown bus id {0}")]
    UnknownBus(u32),
    #[error("network graph is disconnected")]
    Disconnected,
}

/// How a case is turned into a study model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub kind: ModelKind,
    /// Static dispatch only; defaults to the active power of every generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjustable_buses: Option<Vec<Adjustable>>,
    pub metric: MetricSpec,
}

impl StudySpec {
    pub fn adjustables(&self, case: &GridCase) -> Vec<Adjustable> {
        match &self.adjustable_buses {
            Some(list) => list.clone(),
            None => case
                .buses
                .iter()
                .filter(|b| b.kind != BusKind::Pq)
                .map(|b| Adjustable::p(b.id))
                .collect(),
        }
    }

    pub fn build(&self, case: &GridCase) -> Result<StudyModel, GridError> {
        match self.kind {
            ModelKind::StaticDispatch => {
                StudyModel::static_dispatch(case, &self.adjustables(case), &self.metric)
            }
            ModelKind::DynamicClassical => {
                if self.adjustable_buses.is_some() {
                    return Err(GridError::Invalid(
                        "adjustable_buses applies to static_dispatch studies only".into(),
                    ));
                }
                StudyModel::dynamic_classical(case, &self.metric)
            }
        }
    }
}
