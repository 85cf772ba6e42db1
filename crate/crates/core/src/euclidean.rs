//! Closest singular point in straight-line distance within the metric
//! subspace, with multi-start enumeration of local minima.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{OperatingPoint, StudyModel};
use crate::linalg::{norm2, norm_inf};
use crate::manifold::associated::{
    trace_associated_path, AssociatedOptions, AssociatedPath, AssociatedStatus,
};
use crate::nlp::{self, IpmOptions, NlpProblem, SolveStatus};
use crate::powerflow::{continuation_trace, ContinuationOptions};
use crate::singularity::{canonical_sign, classify_endpoint_surface, diagnose_at, SurfaceClass};

/// Decision vector `(x, y, r)`; constraints `g = 0`, `(dg/dy)' r = 0`,
/// `<r, r> = 1`; objective `|z_c - z0|^2`.
pub struct EuclideanProblem<'a> {
    pub model: &'a StudyModel,
    pub z0: Vec<f64>,
}

pub fn build_euclidean_nlp<'a>(model: &'a StudyModel, z0: &[f64]) -> EuclideanProblem<'a> {
    assert_eq!(z0.len(), model.metric.len(), "z0 must match the metric dimension");
    EuclideanProblem {
        model,
        z0: z0.to_vec(),
    }
}

pub(crate) fn push_dense(
    out: &mut Vec<(usize, usize, f64)>,
    m: &DMatrix<f64>,
    row0: usize,
    col0: usize,
) {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != 0.0 {
                out.push((row0 + r, col0 + c, v));
            }
        }
    }
}

pub(crate) fn push_lower(out: &mut Vec<(usize, usize, f64)>, m: &DMatrix<f64>, off: usize) {
    for c in 0..m.ncols() {
        for r in c..m.nrows() {
            let v = m[(r, c)];
            if v != 0.0 {
                out.push((off + r, off + c, v));
            }
        }
    }
}

impl EuclideanProblem<'_> {
    fn split<'w>(&self, w: &'w [f64]) -> (&'w [f64], &'w [f64]) {
        w.split_at(self.model.n_z())
    }
}

impl NlpProblem for EuclideanProblem<'_> {
    fn num_variables(&self) -> usize {
        self.model.n_z() + self.model.n_y()
    }

    fn num_constraints(&self) -> usize {
        self.model.n_rows() + self.model.n_y() + 1
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let (z, _) = self.split(w);
        self.model
            .metric_output(z)
            .iter()
            .zip(&self.z0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let (z, _) = self.split(w);
        let out = self.model.metric_output(z);
        let jm = self.model.metric_jacobian(z);
        let mut g = vec![0.0; self.num_variables()];
        for k in 0..out.len() {
            let d = 2.0 * (out[k] - self.z0[k]);
            for a in 0..z.len() {
                g[a] += d * jm[(k, a)];
            }
        }
        g
    }

    fn constraints(&self, w: &[f64]) -> Vec<f64> {
        let (z, r) = self.split(w);
        let mut c = self.model.residual(z);
        c.extend(self.model.null_residual(z, r));
        c.push(r.iter().map(|v| v * v).sum::<f64>() - 1.0);
        c
    }

    fn jacobian(&self, w: &[f64]) -> Vec<(usize, usize, f64)> {
        let (z, r) = self.split(w);
        let n_z = self.model.n_z();
        let rows = self.model.n_rows();
        let full = self.model.jacobian(z);
        let mut out = Vec::new();
        push_dense(&mut out, &full, 0, 0);
        push_dense(&mut out, &self.model.null_jacobian(z, r), rows, 0);
        let js = self.model.select_singular(&full);
        push_dense(&mut out, &js.transpose(), rows, n_z);
        let last = rows + self.model.n_y();
        for (k, &v) in r.iter().enumerate() {
            if v != 0.0 {
                out.push((last, n_z + k, 2.0 * v));
            }
        }
        out
    }

    fn hessian(&self, w: &[f64], sigma: f64, lambda: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        let (z, r) = self.split(w);
        let model = self.model;
        let (n_z, n_y, rows) = (model.n_z(), model.n_y(), model.n_rows());
        let (lg, rest) = lambda.split_at(rows);
        let (mu, ln) = rest.split_at(n_y);
        // objective: 2 Jm' Jm + 2 sum_k (out_k - z0_k) Hess(out_k)
        let out = model.metric_output(z);
        let jm = model.metric_jacobian(z);
        let weights: Vec<f64> = out.iter().zip(&self.z0).map(|(a, b)| 2.0 * sigma * (a - b)).collect();
        let mut hzz = jm.transpose() * &jm * (2.0 * sigma);
        hzz += model.metric_weighted_hessian(z, &weights);
        hzz += model.weighted_hessian(z, lg);
        hzz += model.null_hessian_zz(z, r, mu);
        let mut t = Vec::new();
        push_lower(&mut t, &hzz, 0);
        // d2/dr dz of mu' (dg/dy)' r, stored below the diagonal
        let hzr = model.null_hessian_zr(z, mu);
        push_dense(&mut t, &hzr.transpose(), n_z, 0);
        for k in 0..n_y {
            t.push((n_z + k, n_z + k, 2.0 * ln[0]));
        }
        Some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanSeed {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOptions {
    /// Random continuation directions in the free parameters.
    pub random_directions: usize,
    /// Also trace along +/- every free parameter axis.
    pub axis_directions: bool,
    /// Nose points taken from each trace.
    pub noses_per_trace: usize,
    /// Perturbed copies per nose seed.
    pub perturbations: usize,
    pub perturbation_scale: f64,
    pub rng_seed: u64,
}

impl Default for SeedOptions {
    fn default() -> Self {
        Self {
            random_directions: 8,
            axis_directions: true,
            noses_per_trace: 2,
            perturbations: 1,
            perturbation_scale: 0.02,
            rng_seed: 7,
        }
    }
}

/// Seeds from continuation traces stopped at their nose points, with the
/// left singular vector there as the initial `r`.
pub fn generate_seeds(model: &StudyModel, base: &OperatingPoint, opts: &SeedOptions) -> Vec<EuclideanSeed> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let dirs = directions(model, opts, &mut rng);
    traced_seeds(model, base, opts, dirs, &mut rng)
}

/// Continuation directions of the multi-start: +/- every free axis when
/// enabled, then the random unit directions.
pub fn seed_directions(model: &StudyModel, opts: &SeedOptions) -> Vec<Vec<f64>> {
    directions(model, opts, &mut ChaCha8Rng::seed_from_u64(opts.rng_seed))
}

fn directions(model: &StudyModel, opts: &SeedOptions, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n_x = model.n_x();
    let free: Vec<usize> = (0..n_x).filter(|&m| !model.is_dependent_x(m)).collect();
    let mut dirs = Vec::new();
    if opts.axis_directions {
        for &m in &free {
            for s in [1.0, -1.0] {
                let mut d = vec![0.0; n_x];
                d[m] = s;
                dirs.push(d);
            }
        }
    }
    for _ in 0..opts.random_directions {
        let mut d = vec![0.0; n_x];
        for &m in &free {
            d[m] = StandardNormal.sample(rng);
        }
        let n = norm2(&d);
        if n > 0.0 {
            d.iter_mut().for_each(|v| *v /= n);
            dirs.push(d);
        }
    }
    dirs
}

fn traced_seeds(model: &StudyModel, base: &OperatingPoint, opts: &SeedOptions, dirs: Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> Vec<EuclideanSeed> {
    let copts = ContinuationOptions {
        stop_after_noses: Some(opts.noses_per_trace),
        max_steps: 600,
        ..ContinuationOptions::default()
    };
    let noses: Vec<Vec<Vec<f64>>> = dirs
        .par_iter()
        .map(|d| {
            let trace = match continuation_trace(model, base, d, &copts) {
                Ok(t) => t,
                Err(crate::powerflow::PowerflowError::StepCollapse { partial, .. }) => *partial,
                Err(_) => return Vec::new(),
            };
            seed_nodes(&trace)
                .into_iter()
                .map(|k| trace.nodes[k].point.z())
                .collect()
        })
        .collect();
    let mut seeds = Vec::new();
    for z in noses.into_iter().flatten() {
        let r = diagnose_at(model, &z).left_vector;
        for _ in 0..opts.perturbations {
            let zp: Vec<f64> = z
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(rng);
                    v + opts.perturbation_scale * e
                })
                .collect();
            seeds.push(EuclideanSeed { z: zp, r: r.clone() });
        }
        seeds.push(EuclideanSeed { z, r });
    }
    seeds
}

/// Nose points of a trace plus interior local minima of `sigma_min`, which
/// mark near-misses of singular surfaces the ray does not cross.
fn seed_nodes(trace: &crate::powerflow::ContinuationTrace) -> Vec<usize> {
    let n = trace.nodes.len();
    let near_nose = |k: usize| trace.nose_events.iter().any(|&e| e.abs_diff(k) <= 1);
    let mut out = trace.nose_events.clone();
    for k in 1..n.saturating_sub(1) {
        let s = trace.nodes[k].sigma_min;
        if s < trace.nodes[k - 1].sigma_min && s < trace.nodes[k + 1].sigma_min && !near_nose(k) {
            out.push(k);
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanOptions {
    pub ipm: IpmOptions,
    /// Endpoints closer than this in `(x, y)` are merged.
    pub dedup_tolerance: f64,
    /// Trace the associated path of every result and classify its endpoint.
    pub classify: bool,
    pub associated: AssociatedOptions,
}

impl Default for EuclideanOptions {
    fn default() -> Self {
        Self {
            ipm: IpmOptions {
                max_iterations: 300,
                ..IpmOptions::default()
            },
            dedup_tolerance: 1e-4,
            classify: true,
            associated: AssociatedOptions {
                traverse_noses: true,
                ..AssociatedOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanResult {
    pub z_start: Vec<f64>,
    pub z_end: Vec<f64>,
    pub distance: f64,
    pub endpoint: OperatingPoint,
    pub null_vector: Vec<f64>,
    pub sigma_min: f64,
    /// `|(dg/dy)' r|_inf` at the endpoint.
    pub null_residual: f64,
    pub surface_class: Option<SurfaceClass>,
    pub nose_count: Option<usize>,
    pub associated: Option<AssociatedPath>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Solves the Euclidean problem from every seed, merges duplicates and
/// sorts by distance, then lexicographically by endpoint.
pub fn solve_multistart(
    model: &StudyModel,
    base: &OperatingPoint,
    seeds: &[EuclideanSeed],
    opts: &EuclideanOptions,
) -> Vec<EuclideanResult> {
    let z_base = base.z();
    let z0 = model.metric_output(&z_base);
    let problem = build_euclidean_nlp(model, &z0);
    let solved: Vec<Option<EuclideanResult>> = seeds
        .par_iter()
        .map(|seed| {
            let mut w0 = seed.z.clone();
            w0.extend_from_slice(&seed.r);
            let report = nlp::solve(&problem, &w0, &opts.ipm);
            if report.status != SolveStatus::Optimal {
                return None;
            }
            let (z, r) = report.solution.split_at(model.n_z());
            let mut r = r.to_vec();
            let z_end = model.metric_output(z);
            let diag = diagnose_at(model, z);
            let null_residual = norm_inf(&model.null_residual(z, &r));
            canonical_sign(&mut r);
            Some(EuclideanResult {
                distance: norm2(
                    &z_end.iter().zip(&z0).map(|(a, b)| a - b).collect::<Vec<_>>(),
                ),
                z_start: z0.clone(),
                z_end,
                endpoint: OperatingPoint::from_z(z, model.n_x()),
                null_vector: r,
                sigma_min: diag.sigma_min,
                null_residual,
                surface_class: None,
                nose_count: None,
                associated: None,
                iterations: report.iterations,
                kkt_residual: report.kkt_residual,
            })
        })
        .collect();
    let mut results: Vec<EuclideanResult> = solved.into_iter().flatten().collect();
    sort_results(&mut results);
    let mut kept: Vec<EuclideanResult> = Vec::new();
    for r in results {
        let ze = r.endpoint.z();
        let dup = kept.iter().any(|k| {
            let zk = k.endpoint.z();
            zk.iter().zip(&ze).all(|(a, b)| (a - b).abs() < opts.dedup_tolerance)
        });
        if !dup {
            kept.push(r);
        }
    }
    if opts.classify {
        kept.par_iter_mut().for_each(|r| classify_result(model, base, r, &opts.associated));
    }
    kept
}

fn sort_results(results: &mut [EuclideanResult]) {
    results.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                let (za, zb) = (a.endpoint.z(), b.endpoint.z());
                za.partial_cmp(&zb).unwrap_or(std::cmp::Ordering::Equal)
            })
    });
}

/// Follows the associated path toward the endpoint and classifies the
/// endpoint by the nose points on the way.
pub fn classify_result(
    model: &StudyModel,
    base: &OperatingPoint,
    result: &mut EuclideanResult,
    opts: &AssociatedOptions,
) {
    let path = trace_associated_path(model, base, &result.endpoint, opts);
    let samples: Vec<Vec<f64>> = path.nodes.iter().map(|p| p.z()).collect();
    if let Ok((class, count)) =
        classify_endpoint_surface(model, &result.endpoint.z(), &samples, 1e-6)
    {
        // without arrival, a clean path proves nothing about the endpoint
        let unverified = path.status != AssociatedStatus::Reached && count.count < 2;
        if !unverified {
            result.surface_class = Some(class);
            result.nose_count = Some(count.count);
        }
    }
    result.associated = Some(path);
}
