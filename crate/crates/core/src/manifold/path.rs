use serde::{Deserialize, Serialize};

use crate::grid::{OperatingPoint, StudyModel};
use crate::linalg::norm2;
use crate::powerflow::{newton_solve, NewtonOptions};

/// States and controls on a `tau` grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedPath {
    pub tau_grid: Vec<f64>,
    pub x_nodes: Vec<Vec<f64>>,
    pub y_nodes: Vec<Vec<f64>>,
    pub u_nodes: Vec<Vec<f64>>,
    pub v_nodes: Vec<Vec<f64>>,
    /// Left null vector at the final node, for singular-surface paths.
    pub r_terminal: Option<Vec<f64>>,
    pub arc_length: f64,
}

impl DiscretizedPath {
    pub fn len(&self) -> usize {
        self.tau_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_grid.is_empty()
    }

    pub fn z(&self, k: usize) -> Vec<f64> {
        let mut z = self.x_nodes[k].clone();
        z.extend_from_slice(&self.y_nodes[k]);
        z
    }

    pub fn w(&self, k: usize) -> Vec<f64> {
        let mut w = self.u_nodes[k].clone();
        w.extend_from_slice(&self.v_nodes[k]);
        w
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.z(k)).collect()
    }

    pub fn endpoint(&self) -> OperatingPoint {
        let k = self.len() - 1;
        OperatingPoint::new(self.x_nodes[k].clone(), self.y_nodes[k].clone())
    }

    /// Largest `|g|_inf` over the nodes.
    pub fn max_residual(&self, model: &StudyModel) -> f64 {
        (0..self.len())
            .map(|k| crate::linalg::norm_inf(&model.residual(&self.z(k))))
            .fold(0.0, f64::max)
    }

    /// Builds a path from node states, taking controls as finite differences
    /// in `tau`.
    pub fn from_states(model: &StudyModel, tau: Vec<f64>, states: Vec<Vec<f64>>) -> Self {
        let n = states.len();
        assert!(n >= 2 && tau.len() == n, "need matching tau and at least two states");
        let n_x = model.n_x();
        let mut w = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            let dt = tau[b] - tau[a];
            w.push(
                states[b]
                    .iter()
                    .zip(&states[a])
                    .map(|(p, q)| (p - q) / dt)
                    .collect::<Vec<f64>>(),
            );
        }
        let mut path = DiscretizedPath {
            tau_grid: tau,
            x_nodes: states.iter().map(|z| z[..n_x].to_vec()).collect(),
            y_nodes: states.iter().map(|z| z[n_x..].to_vec()).collect(),
            u_nodes: w.iter().map(|v| v[..n_x].to_vec()).collect(),
            v_nodes: w.iter().map(|v| v[n_x..].to_vec()).collect(),
            r_terminal: None,
            arc_length: 0.0,
        };
        path.arc_length = arc_length(model, &path);
        path
    }

    /// Path as CSV: tau, x..., y..., z_c..., sigma_min.
    pub fn to_csv(&self, model: &StudyModel) -> String {
        let mut out = String::from("tau");
        for l in model.x_labels.iter().chain(&model.y_labels) {
            out.push(',');
            out.push_str(l);
        }
        for l in model.metric.labels() {
            out.push_str(",zc_");
            out.push_str(&l);
        }
        out.push_str(",sigma_min\n");
        for k in 0..self.len() {
            let z = self.z(k);
            out.push_str(&format!("{:.12e}", self.tau_grid[k]));
            for v in z.iter().chain(&model.metric_output(&z)) {
                out.push_str(&format!(",{v:.12e}"));
            }
            let sigma = crate::singularity::diagnose_at(model, &z).sigma_min;
            out.push_str(&format!(",{sigma:.6e}\n"));
        }
        out
    }
}

/// Arc length `int |dz_c/dtau| dtau`: per interval, the chord velocity
/// (averaged node controls) measured by the metric Jacobian at both ends.
pub fn arc_length(model: &StudyModel, path: &DiscretizedPath) -> f64 {
    (0..path.len().saturating_sub(1))
        .map(|k| {
            let (wa, wb) = (path.w(k), path.w(k + 1));
            let wm = nalgebra::DVector::from_iterator(wa.len(), wa.iter().zip(&wb).map(|(a, b)| 0.5 * (a + b)));
            let speed = |z: &[f64]| (model.metric_jacobian(z) * &wm).norm();
            0.5 * (path.tau_grid[k + 1] - path.tau_grid[k]) * (speed(&path.z(k)) + speed(&path.z(k + 1)))
        })
        .sum()
}

/// Composite trapezoidal rule on a possibly non-uniform grid.
pub fn trapezoid(tau: &[f64], values: &[f64]) -> f64 {
    tau.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Resamples on-manifold samples to `intervals + 1` nodes equally spaced
/// in cumulative `z` distance, pulling each node back onto the manifold at
/// fixed parameters.
pub fn resample(model: &StudyModel, samples: &[Vec<f64>], intervals: usize) -> DiscretizedPath {
    assert!(samples.len() >= 2, "need at least two samples");
    let mut cum = vec![0.0];
    for w in samples.windows(2) {
        let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
        cum.push(cum.last().unwrap() + norm2(&d));
    }
    let total = *cum.last().unwrap();
    let n_x = model.n_x();
    let opts = NewtonOptions::default();
    let mut states = Vec::with_capacity(intervals + 1);
    let mut seg = 0;
    for k in 0..=intervals {
        let z = if k == 0 {
            samples[0].clone()
        } else if k == intervals {
            samples[samples.len() - 1].clone()
        } else {
            let s = total * k as f64 / intervals as f64;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let span = cum[seg + 1] - cum[seg];
            let t = if span > 0.0 { (s - cum[seg]) / span } else { 0.0 };
            let z: Vec<f64> = samples[seg]
                .iter()
                .zip(&samples[seg + 1])
                .map(|(a, b)| a + t * (b - a))
                .collect();
            newton_solve(model, &z[..n_x], &z[n_x..], &opts)
                .map(|s| s.point.z())
                .unwrap_or(z)
        };
        states.push(z);
    }
    let tau = (0..=intervals).map(|k| k as f64 / intervals as f64).collect();
    DiscretizedPath::from_states(model, tau, states)
}

/// Linear interpolation of the node states onto a new uniform grid,
/// corrected back onto the manifold.
pub fn regrid(model: &StudyModel, path: &DiscretizedPath, intervals: usize) -> DiscretizedPath {
    let n_x = model.n_x();
    let opts = NewtonOptions::default();
    let last = path.len() - 1;
    let mut states = Vec::with_capacity(intervals + 1);
    for k in 0..=intervals {
        let t = k as f64 / intervals as f64;
        let z = if k == 0 {
            path.z(0)
        } else if k == intervals {
            path.z(last)
        } else {
            let j = path.tau_grid.partition_point(|&s| s <= t).clamp(1, last);
            let (t0, t1) = (path.tau_grid[j - 1], path.tau_grid[j]);
            let f = (t - t0) / (t1 - t0);
            let (a, b) = (path.z(j - 1), path.z(j));
            let z: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + f * (q - p)).collect();
            newton_solve(model, &z[..n_x], &z[n_x..], &opts)
                .map(|s| s.point.z())
                .unwrap_or(z)
        };
        states.push(z);
    }
    let tau = (0..=intervals).map(|k| k as f64 / intervals as f64).collect();
    let mut out = DiscretizedPath::from_states(model, tau, states);
    out.r_terminal = path.r_terminal.clone();
    out
}
