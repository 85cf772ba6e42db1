//! Smooth equality-constrained NLP with box bounds, solved by a primal-dual
//! interior-point method.

mod derivcheck;
mod ipm;

pub use derivcheck::{check_derivatives, check_hessian, DerivativeReport, FlaggedEntry};
pub use ipm::solve;

use serde::{Deserialize, Serialize};

/// `minimize f(w)  s.t.  c(w) = 0,  lower <= w <= upper`.
///
/// Multipliers follow the Lagrangian `f + lambda' c`.
pub trait NlpProblem: Sync {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;

    /// Variable bounds; infinite entries mean unbounded.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.num_variables();
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    fn objective(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
    fn constraints(&self, w: &[f64]) -> Vec<f64>;

    /// Constraint Jacobian as `(row, col, value)`; duplicates are summed.
    fn jacobian(&self, w: &[f64]) -> Vec<(usize, usize, f64)>;

    /// Lower triangle (`row >= col`) of
    /// `obj_factor * Hessian(f) + sum_i lambda_i * Hessian(c_i)`.
    /// `None` selects the quasi-Newton approximation.
    fn hessian(
        &self,
        _w: &[f64],
        _obj_factor: f64,
        _lambda: &[f64],
    ) -> Option<Vec<(usize, usize, f64)>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// Problem-supplied second derivatives, quasi-Newton if unavailable.
    Exact,
    /// Damped BFGS regardless of what the problem supplies.
    Bfgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub dual_tolerance: f64,
    pub constraint_tolerance: f64,
    pub complementarity_tolerance: f64,
    pub max_iterations: usize,
    pub mu_init: f64,
    pub mu_factor: f64,
    pub mu_min: f64,
    pub hessian: HessianMode,
    /// Largest primal regularization tried before giving up.
    pub max_regularization: f64,
    pub keep_log: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            dual_tolerance: 1e-6,
            constraint_tolerance: 1e-8,
            complementarity_tolerance: 1e-6,
            max_iterations: 500,
            mu_init: 0.1,
            mu_factor: 0.2,
            mu_min: 1e-11,
            hessian: HessianMode::Exact,
            max_regularization: 1e6,
            keep_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub barrier: f64,
    pub step_length: f64,
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Largest of scaled dual infeasibility, constraint violation and
    /// scaled complementarity at the returned point.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub objective: f64,
    pub solution: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// `z_lower - z_upper` per variable.
    pub bound_multipliers: Vec<f64>,
    pub constraint_violation: f64,
    pub dual_infeasibility: f64,
    /// "exact" or "bfgs".
    pub hessian: String,
    pub log: Vec<IterationLog>,
}

/// Iteration log as CSV.
pub fn log_to_csv(log: &[IterationLog]) -> String {
    let mut out = String::from("iteration,objective,primal_inf,dual_inf,barrier,step_length,regularization\n");
    for l in log {
        out.push_str(&format!(
            "{},{:.12e},{:.6e},{:.6e},{:.3e},{:.6e},{:.3e}\n",
            l.iteration,
            l.objective,
            l.primal_infeasibility,
            l.dual_infeasibility,
            l.barrier,
            l.step_length,
            l.regularization
        ));
    }
    out
}
