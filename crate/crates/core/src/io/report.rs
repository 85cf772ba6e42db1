use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::euclidean::EuclideanResult;
use crate::grid::{OperatingPoint, StudyModel};
use crate::manifold::{AssociatedPath, AssociatedStatus, MarginResult};
use crate::nlp::SolveStatus;
use crate::singularity::{diagnose_at, SurfaceClass};

/// Version of the report layout; bumped on incompatible changes.
pub const REPORT_SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euclidean,
    Manifold,
    Geodesic,
    Associated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Metric-space coordinates of the endpoint.
    pub metric: Vec<f64>,
}

impl Endpoint {
    pub fn new(model: &StudyModel, p: &OperatingPoint) -> Self {
        Self {
            x: p.x.clone(),
            y: p.y.clone(),
            metric: model.metric_output(&p.z()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_manifold_residual: Option<f64>,
    pub sigma_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub case: String,
    pub options_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub schema_version: String,
    pub method: Method,
    /// Straight-line distance in metric space (Euclidean method).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    /// On-manifold arc length; for Euclidean results, of the associated path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_length: Option<f64>,
    pub endpoint: Endpoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nose_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface_class: Option<SurfaceClass>,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

fn status_name(s: SolveStatus) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Hex SHA-256 of the canonical JSON of `options` (object keys sorted).
pub fn options_hash<T: Serialize>(options: &T) -> String {
    let value = serde_json::to_value(options).expect("options serialize");
    let text = serde_json::to_string(&value).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl MarginReport {
    pub fn from_euclidean(model: &StudyModel, r: &EuclideanResult, provenance: Provenance) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            method: Method::Euclidean,
            distance: Some(r.distance),
            arc_length: r
                .associated
                .as_ref()
                .filter(|a| a.status == AssociatedStatus::Reached)
                .map(|a| a.arc_length),
            endpoint: Endpoint::new(model, &r.endpoint),
            nose_count: r.nose_count,
            surface_class: r.surface_class,
            diagnostics: Diagnostics {
                status: None,
                iterations: Some(r.iterations),
                kkt_residual: Some(r.kkt_residual),
                max_manifold_residual: Some(crate::linalg::norm_inf(&model.residual(&r.endpoint.z()))),
                sigma_min: r.sigma_min,
                null_residual: Some(r.null_residual),
                ..Diagnostics::default()
            },
            provenance,
        }
    }

    /// Report of a collocation solve; `method` is `Manifold` or `Geodesic`.
    pub fn from_margin(model: &StudyModel, method: Method, r: &MarginResult, provenance: Provenance) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            method,
            distance: None,
            arc_length: Some(r.arc_length),
            endpoint: Endpoint::new(model, &r.endpoint),
            nose_count: r.nose_count,
            surface_class: r.surface_class,
            diagnostics: Diagnostics {
                status: Some(status_name(r.status)),
                iterations: Some(r.iterations),
                kkt_residual: Some(r.kkt_residual),
                max_manifold_residual: Some(r.max_manifold_residual),
                sigma_min: r.terminal_sigma_min,
                null_residual: r.r_norm.map(|_| r.null_residual),
                intervals: Some(r.intervals),
                regularization: Some(r.regularization),
            },
            provenance,
        }
    }

    pub fn from_associated(model: &StudyModel, a: &AssociatedPath, provenance: Provenance) -> Option<Self> {
        let last = a.nodes.last()?;
        let z = last.z();
        Some(Self {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            method: Method::Associated,
            distance: None,
            arc_length: Some(a.arc_length),
            endpoint: Endpoint::new(model, last),
            nose_count: Some(a.interior_noses),
            surface_class: None,
            diagnostics: Diagnostics {
                status: Some(
                    serde_json::to_value(a.status)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                ),
                max_manifold_residual: Some(
                    a.nodes
                        .iter()
                        .map(|p| crate::linalg::norm_inf(&model.residual(&p.z())))
                        .fold(0.0, f64::max),
                ),
                sigma_min: diagnose_at(model, &z).sigma_min,
                ..Diagnostics::default()
            },
            provenance,
        })
    }

    /// Checks that every numeric field is finite.
    pub fn validate(&self) -> Result<(), ReportError> {
        let check = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ReportError::NonFinite(name.into()))
            }
        };
        for (name, v) in [("distance", self.distance), ("arc_length", self.arc_length)] {
            if let Some(v) = v {
                check(name, v)?;
            }
        }
        for (name, vs) in [
            ("endpoint.x", &self.endpoint.x),
            ("endpoint.y", &self.endpoint.y),
            ("endpoint.metric", &self.endpoint.metric),
        ] {
            for &v in vs {
                check(name, v)?;
            }
        }
        let d = &self.diagnostics;
        check("diagnostics.sigma_min", d.sigma_min)?;
        for (name, v) in [
            ("diagnostics.kkt_residual", d.kkt_residual),
            ("diagnostics.max_manifold_residual", d.max_manifold_residual),
            ("diagnostics.null_residual", d.null_residual),
            ("diagnostics.regularization", d.regularization),
        ] {
            if let Some(v) = v {
                check(name, v)?;
            }
        }
        Ok(())
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

/// One row per report: method, distance, arc_length, nose_count,
/// surface_class, status, sigma_min, then the endpoint metric coordinates.
pub fn reports_to_csv(model: &StudyModel, reports: &[MarginReport]) -> String {
    let mut out = String::from("method,distance,arc_length,nose_count,surface_class,status,sigma_min");
    for l in model.metric.labels() {
        out.push_str(",end_");
        out.push_str(&l);
    }
    out.push('\n');
    for r in reports {
        let method = serde_json::to_value(r.method).unwrap();
        let class = r
            .surface_class
            .map(|c| serde_json::to_value(c).unwrap().as_str().unwrap_or_default().to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6e}",
            method.as_str().unwrap_or_default(),
            opt_f(r.distance),
            opt_f(r.arc_length),
            opt(r.nose_count),
            class.unwrap_or_default(),
            r.diagnostics.status.clone().unwrap_or_default(),
            r.diagnostics.sigma_min
        ));
        for v in &r.endpoint.metric {
            out.push_str(&format!(",{v:.12e}"));
        }
        out.push('\n');
    }
    out
}
