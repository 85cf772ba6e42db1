use rayon::prelude::*;

use super::associated::AssociatedStatus;
use super::path::DiscretizedPath;
use super::solve::{continuation_seed, samples_seed, solve_shortest_path, MarginResult, PathSolveOptions};
use super::transcribe::TerminalCondition;
use crate::euclidean::EuclideanResult;
use crate::grid::{OperatingPoint, StudyModel};
use crate::linalg::norm_inf;
use crate::nlp::SolveStatus;
use crate::powerflow::base_direction;

/// Seed paths for singular-surface solves: continuation traces along the
/// base direction and each of `directions`, then the associated path of
/// every Euclidean minimum that reaches its endpoint without passing a nose
/// point.
pub fn seed_paths(
    model: &StudyModel,
    base: &OperatingPoint,
    directions: &[Vec<f64>],
    euclidean: &[EuclideanResult],
    intervals: usize,
) -> Vec<DiscretizedPath> {
    let mut out = Vec::new();
    let base_dir = base_direction(model, base);
    for d in std::iter::once(&base_dir).chain(directions) {
        if let Ok(s) = continuation_seed(model, base, d, intervals) {
            out.push(s);
        }
    }
    for r in euclidean {
        if let Some(a) = &r.associated {
            if a.status == AssociatedStatus::Reached && a.interior_noses == 0 && a.nodes.len() >= 2 {
                let samples: Vec<Vec<f64>> = a.nodes.iter().map(|p| p.z()).collect();
                out.push(samples_seed(model, &samples, intervals));
            }
        }
    }
    out
}

/// Solves the singular-surface problem from every seed in parallel, keeps
/// converged solves, merges those whose endpoints agree within `merge_tol`
/// in metric space and sorts by arc length.
pub fn solve_from_seeds(
    model: &StudyModel,
    base: &OperatingPoint,
    seeds: &[DiscretizedPath],
    opts: &PathSolveOptions,
    merge_tol: f64,
) -> Vec<(DiscretizedPath, MarginResult)> {
    let mut solved: Vec<(DiscretizedPath, MarginResult)> = seeds
        .par_iter()
        .filter_map(|s| solve_shortest_path(model, base, TerminalCondition::SingularSurface, s, opts).ok())
        .filter(|(_, r)| r.status == SolveStatus::Optimal)
        .collect();
    solved.sort_by(|a, b| a.1.arc_length.total_cmp(&b.1.arc_length));
    let mut out: Vec<(DiscretizedPath, MarginResult)> = Vec::new();
    for (p, r) in solved {
        let end = model.metric_output(&r.endpoint.z());
        let dup = out.iter().any(|(_, q)| {
            let e: Vec<f64> = model
                .metric_output(&q.endpoint.z())
                .iter()
                .zip(&end)
                .map(|(a, b)| a - b)
                .collect();
            norm_inf(&e) < merge_tol
        });
        if !dup {
            out.push((p, r));
        }
    }
    out
}
