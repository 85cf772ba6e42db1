use serde::{Deserialize, Serialize};

use super::NlpProblem;

/// Entries whose error exceeds this are listed in the report.
const FLAG_THRESHOLD: f64 = 1e-5;
const MAX_FLAGGED: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedEntry {
    /// `None` for gradient entries.
    pub row: Option<usize>,
    pub col: usize,
    pub analytic: f64,
    pub finite_difference: f64,
}

/// Worst relative error `|a - fd| / max(1, |fd|)` per callback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub gradient_error: f64,
    pub gradient_worst: Option<usize>,
    pub jacobian_error: f64,
    pub jacobian_worst: Option<(usize, usize)>,
    pub flagged: Vec<FlaggedEntry>,
}

impl DerivativeReport {
    pub fn max_error(&self) -> f64 {
        self.gradient_error.max(self.jacobian_error)
    }
}

fn rel_err(a: f64, fd: f64) -> f64 {
    (a - fd).abs() / fd.abs().max(1.0)
}

/// Compares gradient and constraint Jacobian with central differences.
pub fn check_derivatives<P: NlpProblem + ?Sized>(problem: &P, w: &[f64], step: f64) -> DerivativeReport {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let grad = problem.gradient(w);
    let mut jac = vec![vec![0.0; n]; m];
    for (i, j, v) in problem.jacobian(w) {
        jac[i][j] += v;
    }
    let mut report = DerivativeReport {
        gradient_error: 0.0,
        gradient_worst: None,
        jacobian_error: 0.0,
        jacobian_worst: None,
        flagged: Vec::new(),
    };
    let mut wp = w.to_vec();
    for j in 0..n {
        let orig = wp[j];
        wp[j] = orig + step;
        let fp = problem.objective(&wp);
        let cp = problem.constraints(&wp);
        wp[j] = orig - step;
        let fm = problem.objective(&wp);
        let cm = problem.constraints(&wp);
        wp[j] = orig;

        let fd = (fp - fm) / (2.0 * step);
        let e = rel_err(grad[j], fd);
        if e > report.gradient_error || report.gradient_worst.is_none() {
            report.gradient_error = e;
            report.gradient_worst = Some(j);
        }
        if e > FLAG_THRESHOLD && report.flagged.len() < MAX_FLAGGED {
            report.flagged.push(FlaggedEntry {
                row: None,
                col: j,
                analytic: grad[j],
                finite_difference: fd,
            });
        }
        for i in 0..m {
            let fd = (cp[i] - cm[i]) / (2.0 * step);
            let e = rel_err(jac[i][j], fd);
            if e > report.jacobian_error || report.jacobian_worst.is_none() {
                report.jacobian_error = e;
                report.jacobian_worst = Some((i, j));
            }
            if e > FLAG_THRESHOLD && report.flagged.len() < MAX_FLAGGED {
                report.flagged.push(FlaggedEntry {
                    row: Some(i),
                    col: j,
                    analytic: jac[i][j],
                    finite_difference: fd,
                });
            }
        }
    }
    report
}

/// Worst relative error of the Lagrangian Hessian against central
/// differences of the Lagrangian gradient, with its `(row, col)`.
pub fn check_hessian<P: NlpProblem + ?Sized>(
    problem: &P,
    w: &[f64],
    obj_factor: f64,
    lambda: &[f64],
    step: f64,
) -> Option<(f64, (usize, usize))> {
    let n = problem.num_variables();
    let lower = problem.hessian(w, obj_factor, lambda)?;
    let mut h = vec![vec![0.0; n]; n];
    for (r, c, v) in lower {
        h[r][c] += v;
        if r != c {
            h[c][r] += v;
        }
    }
    let lag_grad = |w: &[f64]| {
        let mut g: Vec<f64> = problem.gradient(w).iter().map(|v| v * obj_factor).collect();
        for (i, j, v) in problem.jacobian(w) {
            g[j] += lambda[i] * v;
        }
        g
    };
    let mut worst = (0.0, (0, 0));
    let mut wp = w.to_vec();
    for j in 0..n {
        let orig = wp[j];
        wp[j] = orig + step;
        let gp = lag_grad(&wp);
        wp[j] = orig - step;
        let gm = lag_grad(&wp);
        wp[j] = orig;
        for i in 0..n {
            let e = rel_err(h[i][j], (gp[i] - gm[i]) / (2.0 * step));
            if e > worst.0 {
                worst = (e, (i, j));
            }
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad {
        corrupt: bool,
    }
    impl NlpProblem for Quad {
        fn num_variables(&self) -> usize {
            3
        }
        fn num_constraints(&self) -> usize {
            2
        }
        fn objective(&self, w: &[f64]) -> f64 {
            w[0] * w[0] + 3.0 * w[0] * w[1] - w[2] * w[2]
        }
        fn gradient(&self, w: &[f64]) -> Vec<f64> {
            vec![2.0 * w[0] + 3.0 * w[1], 3.0 * w[0], -2.0 * w[2]]
        }
        fn constraints(&self, w: &[f64]) -> Vec<f64> {
            vec![w[0] * w[1] - 1.0, w[1] + w[2] * w[2]]
        }
        fn jacobian(&self, w: &[f64]) -> Vec<(usize, usize, f64)> {
            let bad = if self.corrupt { 0.5 } else { 0.0 };
            vec![
                (0, 0, w[1]),
                (0, 1, w[0]),
                (1, 1, 1.0),
                (1, 2, 2.0 * w[2] + bad),
            ]
        }
    }

    #[test]
    fn exact_polynomial_derivatives_pass() {
        let r = check_derivatives(&Quad { corrupt: false }, &[0.3, -1.2, 2.0], 1e-6);
        assert!(r.max_error() < 1e-9, "{r:?}");
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn injected_jacobian_fault_is_flagged() {
        let r = check_derivatives(&Quad { corrupt: true }, &[0.3, -1.2, 2.0], 1e-6);
        assert_eq!(r.jacobian_worst, Some((1, 2)));
        assert!(r.flagged.iter().any(|f| f.row == Some(1) && f.col == 2));
    }
}
