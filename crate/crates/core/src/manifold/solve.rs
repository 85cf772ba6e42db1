use serde::{Deserialize, Serialize};

use super::path::{regrid, resample, DiscretizedPath};
use super::transcribe::{transcribe, TerminalCondition, TranscriptionError, TranscriptionOptions};
use crate::grid::{OperatingPoint, StudyModel};
use crate::linalg::norm_inf;
use crate::nlp::{self, IpmOptions, NlpProblem, SolveStatus};
use crate::powerflow::{continuation_trace, ContinuationOptions, PowerflowError};
use crate::singularity::{canonical_sign, diagnose_at, nose_point_count, SurfaceClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSolveOptions {
    pub transcription: TranscriptionOptions,
    pub ipm: IpmOptions,
}

impl Default for PathSolveOptions {
    fn default() -> Self {
        Self {
            transcription: TranscriptionOptions::default(),
            ipm: IpmOptions {
                max_iterations: 300,
                ..IpmOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginResult {
    pub status: SolveStatus,
    /// Post-hoc quadrature of `|dz_c/dtau|`.
    pub arc_length: f64,
    pub objective: f64,
    pub endpoint: OperatingPoint,
    pub nose_count: Option<usize>,
    pub surface_class: Option<SurfaceClass>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Largest `|g|_inf` over the nodes.
    pub max_manifold_residual: f64,
    pub terminal_sigma_min: f64,
    /// `|(dg/dy)' r|_inf` at the final node; zero without `r`.
    pub null_residual: f64,
    pub r_norm: Option<f64>,
    pub intervals: usize,
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
    #[error("seed has {got} nodes, expected {expected}")]
    SeedGrid { got: usize, expected: usize },
    #[error("could not build a seed path: {0}")]
    Seed(String),
}

/// Solves the transcribed problem from a seed path and evaluates the result.
pub fn solve_shortest_path(
    model: &StudyModel,
    initial: &OperatingPoint,
    terminal: TerminalCondition,
    seed: &DiscretizedPath,
    opts: &PathSolveOptions,
) -> Result<(DiscretizedPath, MarginResult), PathError> {
    let problem = transcribe(model, initial, terminal.clone(), &opts.transcription)?;
    let seed = if seed.len() == problem.intervals() + 1 {
        seed.clone()
    } else {
        regrid(model, seed, problem.intervals())
    };
    let r0 = match terminal {
        TerminalCondition::SingularSurface => Some(
            seed.r_terminal
                .clone()
                .unwrap_or_else(|| diagnose_at(model, &seed.z(seed.len() - 1)).left_vector),
        ),
        _ => None,
    };
    let w0 = problem.pack(&seed, r0.as_deref());
    let report = nlp::solve(&problem, &w0, &opts.ipm);
    let mut path = problem.unpack(&report.solution);
    if let Some(r) = path.r_terminal.as_mut() {
        canonical_sign(r);
    }
    let result = evaluate(model, &path, &terminal, &report, &opts.transcription);
    Ok((path, result))
}

fn evaluate(
    model: &StudyModel,
    path: &DiscretizedPath,
    terminal: &TerminalCondition,
    report: &nlp::SolveReport,
    topts: &TranscriptionOptions,
) -> MarginResult {
    let endpoint = path.endpoint();
    let ze = endpoint.z();
    let sigma = diagnose_at(model, &ze).sigma_min;
    let (null_residual, r_norm) = match &path.r_terminal {
        Some(r) => (
            norm_inf(&model.null_residual(&ze, r)),
            Some(crate::linalg::norm2(r)),
        ),
        None => (0.0, None),
    };
    let (nose_count, surface_class) = match terminal {
        TerminalCondition::SingularSurface => match nose_point_count(model, &path.points(), 1e-6) {
            Ok(c) => {
                let class = if c.count > 1 {
                    SurfaceClass::WrongSurface
                } else {
                    SurfaceClass::CorrectSurface
                };
                (Some(c.count), Some(class))
            }
            Err(_) => (None, None),
        },
        _ => (None, None),
    };
    MarginResult {
        status: report.status,
        arc_length: path.arc_length,
        objective: report.objective,
        endpoint,
        nose_count,
        surface_class,
        kkt_residual: report.kkt_residual,
        iterations: report.iterations,
        max_manifold_residual: path.max_residual(model),
        terminal_sigma_min: sigma,
        null_residual,
        r_norm,
        intervals: topts.intervals,
        regularization: topts.regularization,
    }
}

/// Seed path: continuation from `base` along `direction` to the first nose
/// point, resampled on the collocation grid.
pub fn continuation_seed(
    model: &StudyModel,
    base: &OperatingPoint,
    direction: &[f64],
    intervals: usize,
) -> Result<DiscretizedPath, PathError> {
    let opts = ContinuationOptions::default();
    let trace = match continuation_trace(model, base, direction, &opts) {
        Ok(t) => t,
        Err(PowerflowError::StepCollapse { partial, .. }) => *partial,
        Err(e) => return Err(PathError::Seed(e.to_string())),
    };
    if trace.nose_events.is_empty() {
        return Err(PathError::Seed(format!("no nose point along the direction ({:?})", trace.end)));
    }
    let samples = trace.points();
    let mut path = resample(model, &samples, intervals);
    let mut r = diagnose_at(model, samples.last().unwrap()).left_vector;
    canonical_sign(&mut r);
    path.r_terminal = Some(r);
    Ok(path)
}

/// Seed path from on-manifold samples ending on the singular surface.
pub fn samples_seed(model: &StudyModel, samples: &[Vec<f64>], intervals: usize) -> DiscretizedPath {
    let mut path = resample(model, samples, intervals);
    let mut r = diagnose_at(model, samples.last().unwrap()).left_vector;
    canonical_sign(&mut r);
    path.r_terminal = Some(r);
    path
}

/// Shortest path between two points on the manifold.
///
/// The seed follows the straight parameter segment between the points when
/// that stays on one branch, and otherwise interpolates in `z`.
pub fn geodesic_between_points(
    model: &StudyModel,
    start: &OperatingPoint,
    end: &OperatingPoint,
    opts: &PathSolveOptions,
) -> Result<(DiscretizedPath, MarginResult), PathError> {
    let n = opts.transcription.intervals;
    let path = super::trace_associated_path(model, start, end, &super::AssociatedOptions::default());
    let seed = if path.status == super::AssociatedStatus::Reached && path.interior_noses == 0 {
        resample(model, &path.nodes.iter().map(|p| p.z()).collect::<Vec<_>>(), n)
    } else {
        resample(model, &[start.z(), end.z()], n)
    };
    solve_shortest_path(model, start, TerminalCondition::EndPoint(end.clone()), &seed, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub intervals: usize,
    pub arc_length: f64,
    pub status: SolveStatus,
}

/// Doubles the interval count, warm-started from the previous solution,
/// until the arc length changes by less than `rel_tol` or `max_intervals`
/// is exceeded.
pub fn refine_mesh(
    model: &StudyModel,
    initial: &OperatingPoint,
    terminal: TerminalCondition,
    seed: &DiscretizedPath,
    opts: &PathSolveOptions,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<(DiscretizedPath, MarginResult, Vec<RefinementStep>), PathError> {
    let mut o = *opts;
    let (mut path, mut result) = solve_shortest_path(model, initial, terminal.clone(), seed, &o)?;
    let mut history = vec![RefinementStep {
        intervals: o.transcription.intervals,
        arc_length: result.arc_length,
        status: result.status,
    }];
    while 2 * o.transcription.intervals <= max_intervals {
        o.transcription.intervals *= 2;
        let warm = regrid(model, &path, o.transcription.intervals);
        let (p, r) = solve_shortest_path(model, initial, terminal.clone(), &warm, &o)?;
        let change = (r.arc_length - result.arc_length).abs() / result.arc_length.abs().max(1e-12);
        history.push(RefinementStep {
            intervals: o.transcription.intervals,
            arc_length: r.arc_length,
            status: r.status,
        });
        path = p;
        result = r;
        if change < rel_tol {
            break;
        }
    }
    Ok((path, result, history))
}

/// Number of decision variables of a transcription, for sizing checks.
pub fn decision_count(
    model: &StudyModel,
    initial: &OperatingPoint,
    terminal: TerminalCondition,
    opts: &TranscriptionOptions,
) -> Result<(usize, usize), TranscriptionError> {
    let p = transcribe(model, initial, terminal, opts)?;
    Ok((p.num_variables(), p.num_constraints()))
}
