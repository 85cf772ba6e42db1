//! Newton power flow and pseudo-arclength continuation on the manifold.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{OperatingPoint, StudyModel};
use crate::linalg::{norm2, norm_inf, solve_dense};
use crate::singularity::{det_sign, smallest_singular_pair};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerflowError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("power flow Jacobian is singular")]
    SingularJacobian,
    #[error("initial point is off the manifold (residual {residual:e})")]
    InitialPointOffManifold { residual: f64 },
    #[error("continuation step collapsed below {step:e}")]
    StepCollapse {
        step: f64,
        partial: Box<ContinuationTrace>,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub pivot_tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            pivot_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub point: OperatingPoint,
    pub iterations: usize,
    pub residual: f64,
}

/// Unknowns of the power flow: `y` followed by the dependent `x` entries.
fn unknown_columns(model: &StudyModel) -> Vec<usize> {
    let n_x = model.n_x();
    let mut cols: Vec<usize> = (n_x..model.n_z()).collect();
    cols.extend(model.dependent_x().iter().map(|&(m, _)| m));
    cols
}

/// Solves `g(x, y) = 0` for `y` (and any dependent `x` entries, whose given
/// values serve as initial guesses) with damped Newton.
pub fn newton_solve(
    model: &StudyModel,
    x: &[f64],
    y0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution, PowerflowError> {
    if x.len() != model.n_x() || y0.len() != model.n_y() {
        return Err(PowerflowError::Dimension(format!(
            "expected x[{}], y[{}], got x[{}], y[{}]",
            model.n_x(),
            model.n_y(),
            x.len(),
            y0.len()
        )));
    }
    let cols = unknown_columns(model);
    let mut z = OperatingPoint::new(x.to_vec(), y0.to_vec()).z();
    let mut g = model.residual(&z);
    let mut norm = norm_inf(&g);
    for iteration in 0..=opts.max_iterations {
        if norm < opts.tolerance {
            return Ok(NewtonSolution {
                point: OperatingPoint::from_z(&z, model.n_x()),
                iterations: iteration,
                residual: norm,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }
        let full = model.jacobian(&z);
        let j = DMatrix::from_fn(g.len(), cols.len(), |i, k| full[(i, cols[k])]);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = solve_dense(&j, &rhs, opts.pivot_tolerance)
            .map_err(|_| PowerflowError::SingularJacobian)?;
        let mut alpha = 1.0;
        loop {
            let mut trial = z.clone();
            for (k, &c) in cols.iter().enumerate() {
                trial[c] += alpha * step[k];
            }
            let tg = model.residual(&trial);
            let tn = norm_inf(&tg);
            if tn < norm || alpha < 1e-3 {
                z = trial;
                g = tg;
                norm = tn;
                break;
            }
            alpha *= 0.5;
        }
    }
    Err(PowerflowError::MaxIterations {
        iterations: opts.max_iterations,
        residual: norm,
    })
}

/// Base operating point of a study: nominal parameters from a flat start.
pub fn base_point(model: &StudyModel) -> Result<OperatingPoint, PowerflowError> {
    newton_solve(
        model,
        &model.nominal_x,
        &model.flat_start(),
        &NewtonOptions::default(),
    )
    .map(|s| s.point)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub shrink: f64,
    pub grow: f64,
    pub max_steps: usize,
    pub corrector_tolerance: f64,
    pub corrector_max_iterations: usize,
    /// Stop at the refined nose point once this many have been passed.
    pub stop_after_noses: Option<usize>,
    /// Stop when the ray parameter reaches this value, landing on it exactly.
    pub lambda_target: Option<f64>,
    /// Bisection width (in arclength) used to localize a nose point.
    pub nose_resolution: f64,
    /// A nose within this distance of `lambda_target` counts as reaching it.
    pub target_tolerance: f64,
    /// When set, reaching `lambda_target` only counts within
    /// `arrival_tolerance` (max norm in `z`) of this point; crossings on
    /// other branches are passed through.
    pub target_point: Option<Vec<f64>>,
    pub arrival_tolerance: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            min_step: 1e-8,
            max_step: 0.2,
            shrink: 0.5,
            grow: 1.3,
            max_steps: 2000,
            corrector_tolerance: 1e-10,
            corrector_max_iterations: 12,
            stop_after_noses: Some(1),
            lambda_target: None,
            nose_resolution: 1e-6,
            target_tolerance: 1e-5,
            target_point: None,
            arrival_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    /// Ray parameter: the free `x` entries equal `x0 + lambda * direction`.
    pub lambda: f64,
    pub point: OperatingPoint,
    pub sigma_min: f64,
    pub det_sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEnd {
    Stationary,
    NoseLimit,
    TargetReached,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub nodes: Vec<TraceNode>,
    /// Arclength increment that produced each node after the first.
    pub step_sizes: Vec<f64>,
    /// Indices into `nodes` of the refined nose points.
    pub nose_events: Vec<usize>,
    pub end: TraceEnd,
}

impl ContinuationTrace {
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|n| n.point.z()).collect()
    }
    pub fn last(&self) -> &TraceNode {
        self.nodes.last().expect("trace has at least one node")
    }
}

/// Ray through the free parameters; unknowns are `(y, x_dep, lambda)`.
struct Ray<'a> {
    model: &'a StudyModel,
    x0: Vec<f64>,
    dir: Vec<f64>,
    cols: Vec<usize>,
}

impl<'a> Ray<'a> {
    fn z_of(&self, u: &[f64]) -> Vec<f64> {
        let lambda = u[u.len() - 1];
        let mut z = vec![0.0; self.model.n_z()];
        for m in 0..self.model.n_x() {
            z[m] = self.x0[m] + lambda * self.dir[m];
        }
        for (k, &c) in self.cols.iter().enumerate() {
            z[c] = u[k];
        }
        z
    }

    fn u_of(&self, z: &[f64], lambda: f64) -> Vec<f64> {
        let mut u: Vec<f64> = self.cols.iter().map(|&c| z[c]).collect();
        u.push(lambda);
        u
    }

    /// `[dg/d(y, x_dep), dg/dx * dir]`.
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let z = self.z_of(u);
        let full = self.model.jacobian(&z);
        let n = self.cols.len();
        let mut j = DMatrix::zeros(full.nrows(), n + 1);
        for i in 0..full.nrows() {
            for (k, &c) in self.cols.iter().enumerate() {
                j[(i, k)] = full[(i, c)];
            }
            j[(i, n)] = (0..self.model.n_x()).map(|m| full[(i, m)] * self.dir[m]).sum();
        }
        j
    }

    fn tangent(&self, u: &[f64], reference: &[f64]) -> Option<Vec<f64>> {
        let j = self.jacobian(u);
        let n = j.ncols();
        let mut a = DMatrix::zeros(n, n);
        a.rows_mut(0, n - 1).copy_from(&j);
        for k in 0..n {
            a[(n - 1, k)] = reference[k];
        }
        let mut rhs = vec![0.0; n];
        rhs[n - 1] = 1.0;
        let t = solve_dense(&a, &rhs, 1e-14 * a.amax()).ok()?;
        let nt = norm2(&t);
        let mut t: Vec<f64> = t.iter().map(|v| v / nt).collect();
        if crate::linalg::dot(&t, reference) < 0.0 {
            t.iter_mut().for_each(|v| *v = -*v);
        }
        Some(t)
    }

    /// Newton on `g = 0` plus `t'(u - pred) = 0`.
    fn correct(
        &self,
        pred: &[f64],
        t: &[f64],
        opts: &ContinuationOptions,
    ) -> Option<(Vec<f64>, usize)> {
        let n = pred.len();
        let mut u = pred.to_vec();
        let mut prev = f64::INFINITY;
        for it in 0..=opts.corrector_max_iterations {
            let g = self.model.residual(&self.z_of(&u));
            let norm = norm_inf(&g);
            if !norm.is_finite() || norm > 10.0 * prev.max(1e-6) {
                return None;
            }
            if norm < opts.corrector_tolerance {
                return Some((u, it));
            }
            if it == opts.corrector_max_iterations {
                return None;
            }
            prev = norm;
            let j = self.jacobian(&u);
            let mut a = DMatrix::zeros(n, n);
            a.rows_mut(0, n - 1).copy_from(&j);
            for k in 0..n {
                a[(n - 1, k)] = t[k];
            }
            let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            rhs.push(-crate::linalg::dot(t, &sub(&u, pred)));
            let du = solve_dense(&a, &rhs, 1e-14 * a.amax()).ok()?;
            for k in 0..n {
                u[k] += du[k];
            }
        }
        None
    }

    /// Solves at a fixed ray parameter.
    fn land(&self, guess: &[f64], lambda: f64, tol: f64) -> Option<Vec<f64>> {
        let mut x = self.x0.clone();
        for m in 0..x.len() {
            x[m] += lambda * self.dir[m];
        }
        let z = self.z_of(guess);
        for &(m, _) in self.model.dependent_x() {
            x[m] = z[m];
        }
        let opts = NewtonOptions {
            tolerance: tol,
            ..NewtonOptions::default()
        };
        let sol = newton_solve(self.model, &x, &z[self.model.n_x()..], &opts).ok()?;
        Some(self.u_of(&sol.point.z(), lambda))
    }

    fn node(&self, u: &[f64]) -> TraceNode {
        node_at(self.model, &self.z_of(u), u[u.len() - 1])
    }
}

fn node_at(model: &StudyModel, z: &[f64], lambda: f64) -> TraceNode {
    let js = model.singular_jacobian(z);
    let (sigma_min, _) = smallest_singular_pair(&js);
    TraceNode {
        lambda,
        point: OperatingPoint::from_z(z, model.n_x()),
        sigma_min,
        det_sign: det_sign(&js),
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

/// Traces the manifold along the ray `x = x0 + lambda * direction` in the
/// free parameters with pseudo-arclength predictor-corrector steps.
///
/// Dependent parameters (e.g. slack generation) are solved with `y`, so any
/// component of `direction` on them is ignored. Nose points are located by
/// determinant sign changes of the reduced Jacobian and refined by
/// bisection; each refined nose is inserted as a node.
pub fn continuation_trace(
    model: &StudyModel,
    start: &OperatingPoint,
    direction: &[f64],
    opts: &ContinuationOptions,
) -> Result<ContinuationTrace, PowerflowError> {
    if direction.len() != model.n_x() {
        return Err(PowerflowError::Dimension(format!(
            "direction has {} entries, model has {} parameters",
            direction.len(),
            model.n_x()
        )));
    }
    let z0 = start.z();
    let residual = norm_inf(&model.residual(&z0));
    if !(residual < 1e-8) {
        return Err(PowerflowError::InitialPointOffManifold { residual });
    }
    let mut dir = direction.to_vec();
    for &(m, _) in model.dependent_x() {
        dir[m] = 0.0;
    }
    let ray = Ray {
        model,
        x0: start.x.clone(),
        dir: dir.clone(),
        cols: unknown_columns(model),
    };
    let mut u = ray.u_of(&z0, 0.0);
    let mut trace = ContinuationTrace {
        nodes: vec![ray.node(&u)],
        step_sizes: Vec::new(),
        nose_events: Vec::new(),
        end: TraceEnd::Stationary,
    };
    if norm2(&dir) == 0.0 {
        return Ok(trace);
    }
    let n = u.len();
    let mut e_lambda = vec![0.0; n];
    e_lambda[n - 1] = 1.0;
    let mut t = ray
        .tangent(&u, &e_lambda)
        .ok_or(PowerflowError::SingularJacobian)?;
    let mut ds = opts.initial_step;
    let mut sign = trace.nodes[0].det_sign;
    let noses_allowed = opts.stop_after_noses.unwrap_or(usize::MAX);

    for _ in 0..opts.max_steps {
        let pred: Vec<f64> = u.iter().zip(&t).map(|(a, b)| a + ds * b).collect();
        let Some((next, iters)) = ray.correct(&pred, &t, opts) else {
            ds *= opts.shrink;
            if ds < opts.min_step {
                return Err(PowerflowError::StepCollapse {
                    step: ds,
                    partial: Box::new(trace),
                });
            }
            continue;
        };
        let next_node = ray.node(&next);

        // passing through the target point, e.g. tangentially at a fold
        if let Some(tp) = &opts.target_point {
            let (a, b) = (ray.z_of(&u), ray.z_of(&next));
            if let Some(frac) = closest_approach(&a, &b, tp, opts.arrival_tolerance) {
                let lambda = u[n - 1] + frac * (next[n - 1] - u[n - 1]);
                trace.step_sizes.push(ds * frac);
                trace.nodes.push(node_at(model, tp, lambda));
                trace.end = TraceEnd::TargetReached;
                return Ok(trace);
            }
        }

        // landing on the target parameter
        if let Some(target) = opts.lambda_target {
            let (l0, l1) = (u[n - 1], next[n - 1]);
            if (l0 - target) * (l1 - target) <= 0.0 && l1 != l0 {
                let frac = (target - l0) / (l1 - l0);
                let guess: Vec<f64> = u
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| a + frac * (b - a))
                    .collect();
                if let Some(landed) = ray.land(&guess, target, opts.corrector_tolerance) {
                    let node = ray.node(&landed);
                    // a nose before the landing point is handled below instead
                    if (node.det_sign == sign || node.det_sign == 0) && arrived(opts, &node) {
                        trace.step_sizes.push(ds * frac);
                        trace.nodes.push(node);
                        trace.end = TraceEnd::TargetReached;
                        return Ok(trace);
                    }
                }
            }
        }

        if next_node.det_sign != sign && next_node.det_sign != 0 && sign != 0 {
            let (nose_u, nose_s) = locate_nose(&ray, &u, &t, ds, sign, opts);
            trace.step_sizes.push(nose_s);
            trace.nodes.push(ray.node(&nose_u));
            trace.nose_events.push(trace.nodes.len() - 1);
            let at_target = opts
                .lambda_target
                .is_some_and(|t| (trace.last().lambda - t).abs() < opts.target_tolerance)
                && arrived(opts, trace.last());
            if at_target {
                trace.end = TraceEnd::TargetReached;
                return Ok(trace);
            }
            if trace.nose_events.len() >= noses_allowed {
                trace.end = TraceEnd::NoseLimit;
                return Ok(trace);
            }
            trace.step_sizes.push(ds - nose_s);
        } else {
            trace.step_sizes.push(ds);
        }
        sign = next_node.det_sign;
        trace.nodes.push(next_node);
        let Some(t_next) = ray.tangent(&next, &t) else {
            return Err(PowerflowError::SingularJacobian);
        };
        u = next;
        t = t_next;
        if iters <= 3 {
            ds = (ds * opts.grow).min(opts.max_step);
        }
    }
    trace.end = TraceEnd::MaxSteps;
    Ok(trace)
}

/// Position on the chord `a -> b` closest to `p`, if within `tol` (max norm).
fn closest_approach(a: &[f64], b: &[f64], p: &[f64], tol: f64) -> Option<f64> {
    let d = sub(b, a);
    let dd = crate::linalg::dot(&d, &d);
    if dd == 0.0 {
        return None;
    }
    let t = (crate::linalg::dot(&sub(p, a), &d) / dd).clamp(0.0, 1.0);
    let gap = (0..a.len())
        .map(|k| (a[k] + t * d[k] - p[k]).abs())
        .fold(0.0, f64::max);
    (gap < tol).then_some(t)
}

fn arrived(opts: &ContinuationOptions, node: &TraceNode) -> bool {
    let Some(target) = &opts.target_point else {
        return true;
    };
    node.point
        .z()
        .iter()
        .zip(target)
        .all(|(a, b)| (a - b).abs() < opts.arrival_tolerance)
}

/// Bisects the arclength step from `u` along `t` for the determinant sign
/// change.
fn locate_nose(
    ray: &Ray,
    u: &[f64],
    t: &[f64],
    ds: f64,
    sign: i8,
    opts: &ContinuationOptions,
) -> (Vec<f64>, f64) {
    let (mut lo, mut hi) = (0.0, ds);
    let mut best_hi: Option<Vec<f64>> = None;
    let mut best_lo = u.to_vec();
    while hi - lo > opts.nose_resolution {
        let mid = 0.5 * (lo + hi);
        let pred: Vec<f64> = u.iter().zip(t).map(|(a, b)| a + mid * b).collect();
        let Some((p, _)) = ray.correct(&pred, t, opts) else {
            break;
        };
        let s = det_sign(&ray.model.singular_jacobian(&ray.z_of(&p)));
        if s == sign {
            lo = mid;
            best_lo = p;
        } else {
            hi = mid;
            best_hi = Some(p);
        }
    }
    // report the side with the smaller singular value
    let pick = match best_hi {
        Some(h) => {
            let sh = smallest_singular_pair(&ray.model.singular_jacobian(&ray.z_of(&h))).0;
            let sl = smallest_singular_pair(&ray.model.singular_jacobian(&ray.z_of(&best_lo))).0;
            if sh < sl {
                (h, hi)
            } else {
                (best_lo, lo)
            }
        }
        None => (best_lo, lo),
    };
    pick
}

/// Trace as CSV: step, lambda, x..., y..., sigma_min, det_sign.
pub fn trace_to_csv(model: &StudyModel, trace: &ContinuationTrace) -> String {
    let mut out = String::from("step,lambda");
    for l in model.x_labels.iter().chain(&model.y_labels) {
        out.push(',');
        out.push_str(l);
    }
    out.push_str(",sigma_min,det_sign\n");
    for (k, node) in trace.nodes.iter().enumerate() {
        out.push_str(&format!("{k},{:.12e}", node.lambda));
        for v in node.point.x.iter().chain(&node.point.y) {
            out.push_str(&format!(",{v:.12e}"));
        }
        out.push_str(&format!(",{:.6e},{}\n", node.sigma_min, node.det_sign));
    }
    out
}

/// Unit vector of the base dispatch: every free parameter scaled by its
/// nominal value (load growth and matching generation), falling back to
/// equal weights when all nominal values vanish.
pub fn base_direction(model: &StudyModel, base: &OperatingPoint) -> Vec<f64> {
    let mut d: Vec<f64> = (0..model.n_x())
        .map(|m| {
            if model.is_dependent_x(m) {
                0.0
            } else {
                base.x[m]
            }
        })
        .collect();
    let n = norm2(&d);
    if n == 0.0 {
        d = (0..model.n_x())
            .map(|m| if model.is_dependent_x(m) { 0.0 } else { 1.0 })
            .collect();
    }
    let n = norm2(&d);
    if n > 0.0 {
        d.iter_mut().for_each(|v| *v /= n);
    }
    d
}
