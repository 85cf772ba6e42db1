//! Path on the manifold whose parameters move on a straight segment from the
//! base point to a target point.

use serde::{Deserialize, Serialize};

use crate::grid::{OperatingPoint, StudyModel};
use crate::powerflow::{continuation_trace, ContinuationOptions, ContinuationTrace, PowerflowError, TraceEnd};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociatedOptions {
    /// Continue through nose points met before the target.
    pub traverse_noses: bool,
    pub max_step: f64,
    pub max_steps: usize,
    /// Largest `|z - target|_inf` accepted as arriving at the target.
    pub arrival_tolerance: f64,
}

impl Default for AssociatedOptions {
    fn default() -> Self {
        Self {
            traverse_noses: false,
            max_step: 0.02,
            max_steps: 4000,
            arrival_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociatedStatus {
    Reached,
    /// Stopped at a nose point before the target; not an error.
    NosePointBeforeTarget,
    /// The trace ended elsewhere (step collapse, step limit, other branch).
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociatedPath {
    pub nodes: Vec<OperatingPoint>,
    /// Segment parameter per node; the target sits at 1.
    pub lambda: Vec<f64>,
    pub status: AssociatedStatus,
    /// Segment parameter of the first nose point strictly before the target.
    pub first_nose_fraction: Option<f64>,
    /// Nose points passed before the final node.
    pub interior_noses: usize,
    /// Polyline length of the nodes in metric space.
    pub arc_length: f64,
    /// `|z_last - target|_inf`.
    pub endpoint_gap: f64,
}

/// Polyline length of on-manifold samples measured in the metric subspace.
pub fn polyline_length(model: &StudyModel, samples: &[Vec<f64>]) -> f64 {
    let outs: Vec<Vec<f64>> = samples.iter().map(|z| model.metric_output(z)).collect();
    outs.windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Traces the manifold while the free parameters move from `base` to
/// `target` on a straight line.
pub fn trace_associated_path(
    model: &StudyModel,
    base: &OperatingPoint,
    target: &OperatingPoint,
    opts: &AssociatedOptions,
) -> AssociatedPath {
    let dir: Vec<f64> = target.x.iter().zip(&base.x).map(|(a, b)| a - b).collect();
    let copts = ContinuationOptions {
        initial_step: opts.max_step.min(0.05),
        max_step: opts.max_step,
        max_steps: opts.max_steps,
        stop_after_noses: if opts.traverse_noses { None } else { Some(1) },
        lambda_target: Some(1.0),
        target_point: Some(target.z()),
        arrival_tolerance: opts.arrival_tolerance,
        ..ContinuationOptions::default()
    };
    let trace = match continuation_trace(model, base, &dir, &copts) {
        Ok(t) => t,
        Err(PowerflowError::StepCollapse { partial, .. }) => *partial,
        Err(_) => ContinuationTrace {
            nodes: Vec::new(),
            step_sizes: Vec::new(),
            nose_events: Vec::new(),
            end: TraceEnd::MaxSteps,
        },
    };
    summarize(model, &trace, target)
}

fn summarize(
    model: &StudyModel,
    trace: &ContinuationTrace,
    target: &OperatingPoint,
) -> AssociatedPath {
    let zt = target.z();
    let samples = trace.points();
    let endpoint_gap = samples
        .last()
        .map(|z| z.iter().zip(&zt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .unwrap_or(f64::INFINITY);
    let last = trace.nodes.len().saturating_sub(1);
    let interior: Vec<usize> = trace
        .nose_events
        .iter()
        .copied()
        .filter(|&k| !(k == last && trace.end == TraceEnd::TargetReached))
        .collect();
    let status = if trace.end == TraceEnd::TargetReached {
        AssociatedStatus::Reached
    } else if trace.end == TraceEnd::NoseLimit {
        AssociatedStatus::NosePointBeforeTarget
    } else {
        AssociatedStatus::Incomplete
    };
    AssociatedPath {
        nodes: trace.nodes.iter().map(|n| n.point.clone()).collect(),
        lambda: trace.nodes.iter().map(|n| n.lambda).collect(),
        status,
        first_nose_fraction: interior.first().map(|&k| trace.nodes[k].lambda),
        interior_noses: interior.len(),
        arc_length: polyline_length(model, &samples),
        endpoint_gap,
    }
}
