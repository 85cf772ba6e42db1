use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::euclidean::{push_dense, push_lower};
use crate::grid::{OperatingPoint, StudyModel};
use crate::nlp::NlpProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Trapezoidal,
    HermiteSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathObjective {
    /// `int <zeta, zeta> dtau`
    Energy,
    /// `int sqrt(<zeta, zeta> + eps^2) dtau`
    SmoothedArcLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranscriptionOptions {
    /// Number of collocation intervals `N`; the grid has `N + 1` nodes.
    pub intervals: usize,
    pub scheme: Scheme,
    pub objective: PathObjective,
    pub smoothing_eps: f64,
    /// Weight of `|(u, v)|^2` at the nodes, added to the objective.
    pub regularization: f64,
}

impl Default for TranscriptionOptions {
    fn default() -> Self {
        Self {
            intervals: 50,
            scheme: Scheme::Trapezoidal,
            objective: PathObjective::Energy,
            smoothing_eps: 1e-6,
            regularization: 1e-8,
        }
    }
}

/// `h(z(1), w(1)) = 0` on the final node's states `z` and controls `w`.
pub trait TerminalManifold: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: &[f64], w: &[f64]) -> Vec<f64>;
    /// `dim x 2 n_z`, columns ordered `(z, w)`.
    fn jacobian(&self, z: &[f64], w: &[f64]) -> DMatrix<f64>;
    /// Hessian of `sum_i weights_i h_i` over `(z, w)`.
    fn weighted_hessian(&self, z: &[f64], w: &[f64], weights: &[f64]) -> DMatrix<f64>;
}

#[derive(Clone)]
pub enum TerminalCondition {
    /// Final state on the singular surface, with a unit left null vector.
    SingularSurface,
    /// Final state pinned to a given point.
    EndPoint(OperatingPoint),
    CustomManifold(Arc<dyn TerminalManifold>),
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SingularSurface => f.write_str("SingularSurface"),
            Self::EndPoint(p) => f.debug_tuple("EndPoint").field(p).finish(),
            Self::CustomManifold(h) => write!(f, "CustomManifold(dim = {})", h.dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranscriptionError {
    #[error("initial point is off the manifold (residual {residual:e})")]
    InitialPointOffManifold { residual: f64 },
    #[error("at least 10 intervals are required, got {0}")]
    TooFewIntervals(usize),
    #[error("smoothing epsilon must be positive")]
    NonPositiveSmoothing,
}

/// One quadrature sample of the metric integrand: states and controls as
/// linear combinations of `n_z`-sized variable blocks.
struct Sample {
    weight: f64,
    z: Vec<(usize, f64)>,
    w: Vec<(usize, f64)>,
}

/// Direct-collocation transcription of the shortest-path problem.
///
/// Variables are node-major `[x_k, y_k, u_k, v_k]` for `k = 0..=N`, then
/// midpoint controls (Hermite-Simpson only), then `r` (singular surface
/// only).
pub struct PathProblem<'a> {
    pub model: &'a StudyModel,
    pub initial: Vec<f64>,
    pub terminal: TerminalCondition,
    pub options: TranscriptionOptions,
    samples: Vec<Sample>,
    /// Control blocks and quadrature weights of the regularizer.
    regularized: Vec<(usize, f64)>,
}

pub fn transcribe<'a>(
    model: &'a StudyModel,
    initial: &OperatingPoint,
    terminal: TerminalCondition,
    options: &TranscriptionOptions,
) -> Result<PathProblem<'a>, TranscriptionError> {
    if options.intervals < 10 {
        return Err(TranscriptionError::TooFewIntervals(options.intervals));
    }
    if !(options.smoothing_eps > 0.0) {
        return Err(TranscriptionError::NonPositiveSmoothing);
    }
    let z0 = initial.z();
    let residual = crate::linalg::norm_inf(&model.residual(&z0));
    if !(residual < 1e-8) {
        return Err(TranscriptionError::InitialPointOffManifold { residual });
    }
    let mut p = PathProblem {
        model,
        initial: z0,
        terminal,
        options: *options,
        samples: Vec::new(),
        regularized: Vec::new(),
    };
    (p.samples, p.regularized) = p.quadrature();
    Ok(p)
}

impl PathProblem<'_> {
    pub fn intervals(&self) -> usize {
        self.options.intervals
    }

    fn nz(&self) -> usize {
        self.model.n_z()
    }

    fn h(&self) -> f64 {
        1.0 / self.options.intervals as f64
    }

    pub fn z_offset(&self, k: usize) -> usize {
        2 * self.nz() * k
    }

    pub fn w_offset(&self, k: usize) -> usize {
        2 * self.nz() * k + self.nz()
    }

    fn mid_offset(&self, k: usize) -> usize {
        2 * self.nz() * (self.intervals() + 1) + k * self.nz()
    }

    pub fn r_offset(&self) -> usize {
        let mids = match self.options.scheme {
            Scheme::Trapezoidal => 0,
            Scheme::HermiteSimpson => self.intervals() * self.nz(),
        };
        2 * self.nz() * (self.intervals() + 1) + mids
    }

    fn has_r(&self) -> bool {
        matches!(self.terminal, TerminalCondition::SingularSurface)
    }

    /// Nodes carrying a path constraint: node 0 is pinned by the initial
    /// condition, and the last node too when it is an end point.
    fn path_nodes(&self) -> std::ops::Range<usize> {
        let n = self.intervals();
        match self.terminal {
            TerminalCondition::EndPoint(_) => 1..n,
            _ => 1..n + 1,
        }
    }

    fn defect_row(&self, k: usize) -> usize {
        self.nz() + k * self.nz()
    }

    fn path_row(&self, k: usize) -> usize {
        self.nz() * (1 + self.intervals()) + (k - 1) * self.model.n_rows()
    }

    fn terminal_row(&self) -> usize {
        self.nz() * (1 + self.intervals()) + self.path_nodes().len() * self.model.n_rows()
    }

    /// Trapezoidal: the metric integrand is taken at both ends of each
    /// interval with the averaged control. By the defect the averaged control
    /// is the chord velocity, so alternating node controls cannot hide motion,
    /// and the metric Jacobian is only evaluated at on-manifold nodes.
    fn quadrature(&self) -> (Vec<Sample>, Vec<(usize, f64)>) {
        let n = self.intervals();
        let h = self.h();
        let mut out = Vec::new();
        let mut reg = Vec::new();
        match self.options.scheme {
            Scheme::Trapezoidal => {
                for k in 0..n {
                    for j in [k, k + 1] {
                        out.push(Sample {
                            weight: 0.5 * h,
                            z: vec![(self.z_offset(j), 1.0)],
                            w: vec![(self.w_offset(k), 0.5), (self.w_offset(k + 1), 0.5)],
                        });
                    }
                }
                for k in 0..=n {
                    let weight = if k == 0 || k == n { 0.5 * h } else { h };
                    reg.push((self.w_offset(k), weight));
                }
            }
            Scheme::HermiteSimpson => {
                for k in 0..=n {
                    let weight = if k == 0 || k == n { h / 6.0 } else { h / 3.0 };
                    out.push(Sample {
                        weight,
                        z: vec![(self.z_offset(k), 1.0)],
                        w: vec![(self.w_offset(k), 1.0)],
                    });
                    reg.push((self.w_offset(k), weight));
                }
                for k in 0..n {
                    reg.push((self.mid_offset(k), 4.0 * h / 6.0));
                    out.push(Sample {
                        weight: 4.0 * h / 6.0,
                        z: vec![
                            (self.z_offset(k), 0.5),
                            (self.z_offset(k + 1), 0.5),
                            (self.w_offset(k), h / 8.0),
                            (self.w_offset(k + 1), -h / 8.0),
                        ],
                        w: vec![(self.mid_offset(k), 1.0)],
                    });
                }
            }
        }
        (out, reg)
    }

    fn combine(&self, w: &[f64], terms: &[(usize, f64)]) -> Vec<f64> {
        let nz = self.nz();
        let mut out = vec![0.0; nz];
        for &(off, c) in terms {
            for i in 0..nz {
                out[i] += c * w[off + i];
            }
        }
        out
    }

    fn block<'w>(&self, w: &'w [f64], off: usize) -> &'w [f64] {
        &w[off..off + self.nz()]
    }

    /// Metric integrand value, gradient over `(z, w)` and optionally the
    /// Hessian.
    fn integrand(&self, z: &[f64], w: &[f64], want_hessian: bool) -> (f64, Vec<f64>, Option<DMatrix<f64>>) {
        let model = self.model;
        let nz = self.nz();
        let jm = model.metric_jacobian(z);
        let wv = DVector::from_column_slice(w);
        let zeta = &jm * &wv;
        let e = zeta.norm_squared();
        let linear = model.metric_is_linear();
        let hv = (!linear).then(|| model.metric_hessian_vecs(z, w));

        let mut grad = vec![0.0; 2 * nz];
        let gw = jm.transpose() * &zeta * 2.0;
        grad[nz..].copy_from_slice(gw.as_slice());
        if let Some(hv) = &hv {
            let gz = hv * &zeta * 2.0;
            grad[..nz].copy_from_slice(gz.as_slice());
        }
        let mut hess = want_hessian.then(|| {
            let mut hm = DMatrix::zeros(2 * nz, 2 * nz);
            let ww = jm.transpose() * &jm * 2.0;
            hm.view_mut((nz, nz), (nz, nz)).copy_from(&ww);
            if let Some(hv) = &hv {
                let zeta_s = zeta.as_slice();
                let wz = (jm.transpose() * hv.transpose()
                    + model.metric_weighted_hessian(z, zeta_s))
                    * 2.0;
                hm.view_mut((nz, 0), (nz, nz)).copy_from(&wz);
                hm.view_mut((0, nz), (nz, nz)).copy_from(&wz.transpose());
                let zz = (hv * hv.transpose() + model.metric_weighted_third(z, zeta_s, w)) * 2.0;
                hm.view_mut((0, 0), (nz, nz)).copy_from(&zz);
            }
            hm
        });
        match self.options.objective {
            PathObjective::Energy => (e, grad, hess),
            PathObjective::SmoothedArcLength => {
                let eps = self.options.smoothing_eps;
                let s = (e + eps * eps).sqrt();
                if let Some(hm) = hess.as_mut() {
                    let g = DVector::from_column_slice(&grad);
                    *hm = &*hm / (2.0 * s) - &g * g.transpose() / (4.0 * s * s * s);
                }
                grad.iter_mut().for_each(|v| *v /= 2.0 * s);
                (s, grad, hess)
            }
        }
    }

    /// Final-node constraint rows.
    fn terminal_dim(&self) -> usize {
        match &self.terminal {
            TerminalCondition::SingularSurface => self.model.n_y() + 1,
            TerminalCondition::EndPoint(_) => self.nz(),
            TerminalCondition::CustomManifold(h) => h.dim(),
        }
    }

    /// Packs a path (and `r`) into a decision vector; midpoint controls are
    /// averaged from the neighbouring nodes.
    pub fn pack(&self, path: &super::DiscretizedPath, r: Option<&[f64]>) -> Vec<f64> {
        assert_eq!(path.len(), self.intervals() + 1, "path grid does not match the transcription");
        let nz = self.nz();
        let mut w = vec![0.0; self.num_variables()];
        for k in 0..path.len() {
            w[self.z_offset(k)..self.z_offset(k) + nz].copy_from_slice(&path.z(k));
            w[self.w_offset(k)..self.w_offset(k) + nz].copy_from_slice(&path.w(k));
        }
        if self.options.scheme == Scheme::HermiteSimpson {
            for k in 0..self.intervals() {
                let (a, b) = (path.w(k), path.w(k + 1));
                for i in 0..nz {
                    w[self.mid_offset(k) + i] = 0.5 * (a[i] + b[i]);
                }
            }
        }
        if self.has_r() {
            let off = self.r_offset();
            match r {
                Some(r) => w[off..off + r.len()].copy_from_slice(r),
                None => w[off] = 1.0,
            }
        }
        w
    }

    /// Unpacks a decision vector into a path with its arc length.
    pub fn unpack(&self, w: &[f64]) -> super::DiscretizedPath {
        let n_x = self.model.n_x();
        let n = self.intervals();
        let nodes = 0..=n;
        let mut path = super::DiscretizedPath {
            tau_grid: nodes.clone().map(|k| k as f64 * self.h()).collect(),
            x_nodes: nodes.clone().map(|k| self.block(w, self.z_offset(k))[..n_x].to_vec()).collect(),
            y_nodes: nodes.clone().map(|k| self.block(w, self.z_offset(k))[n_x..].to_vec()).collect(),
            u_nodes: nodes.clone().map(|k| self.block(w, self.w_offset(k))[..n_x].to_vec()).collect(),
            v_nodes: nodes.map(|k| self.block(w, self.w_offset(k))[n_x..].to_vec()).collect(),
            r_terminal: self
                .has_r()
                .then(|| w[self.r_offset()..self.r_offset() + self.model.n_y()].to_vec()),
            arc_length: 0.0,
        };
        path.tau_grid[n] = 1.0;
        path.arc_length = super::arc_length(self.model, &path);
        path
    }
}

impl NlpProblem for PathProblem<'_> {
    fn num_variables(&self) -> usize {
        self.r_offset() + if self.has_r() { self.model.n_y() } else { 0 }
    }

    fn num_constraints(&self) -> usize {
        self.terminal_row() + self.terminal_dim()
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let delta = self.options.regularization;
        let metric: f64 = self
            .samples
            .iter()
            .map(|s| {
                let (z, u) = (self.combine(w, &s.z), self.combine(w, &s.w));
                s.weight * self.integrand(&z, &u, false).0
            })
            .sum();
        let reg: f64 = self
            .regularized
            .iter()
            .map(|&(off, c)| c * self.block(w, off).iter().map(|v| v * v).sum::<f64>())
            .sum();
        metric + delta * reg
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let nz = self.nz();
        let mut g = vec![0.0; self.num_variables()];
        for s in &self.samples {
            let (z, u) = (self.combine(w, &s.z), self.combine(w, &s.w));
            let (_, gs, _) = self.integrand(&z, &u, false);
            for (part, terms) in [(0, &s.z), (nz, &s.w)] {
                for &(off, c) in terms {
                    for i in 0..nz {
                        g[off + i] += s.weight * c * gs[part + i];
                    }
                }
            }
        }
        let delta = self.options.regularization;
        for &(off, c) in &self.regularized {
            for i in off..off + nz {
                g[i] += 2.0 * delta * c * w[i];
            }
        }
        g
    }

    fn constraints(&self, w: &[f64]) -> Vec<f64> {
        let nz = self.nz();
        let n = self.intervals();
        let h = self.h();
        let mut c = Vec::with_capacity(self.num_constraints());
        let z0 = self.block(w, self.z_offset(0));
        c.extend(z0.iter().zip(&self.initial).map(|(a, b)| a - b));
        for k in 0..n {
            let (za, zb) = (self.block(w, self.z_offset(k)), self.block(w, self.z_offset(k + 1)));
            let (wa, wb) = (self.block(w, self.w_offset(k)), self.block(w, self.w_offset(k + 1)));
            match self.options.scheme {
                Scheme::Trapezoidal => {
                    c.extend((0..nz).map(|i| zb[i] - za[i] - 0.5 * h * (wa[i] + wb[i])));
                }
                Scheme::HermiteSimpson => {
                    let wm = self.block(w, self.mid_offset(k));
                    c.extend(
                        (0..nz).map(|i| zb[i] - za[i] - h / 6.0 * (wa[i] + 4.0 * wm[i] + wb[i])),
                    );
                }
            }
        }
        for k in self.path_nodes() {
            c.extend(self.model.residual(self.block(w, self.z_offset(k))));
        }
        let zn = self.block(w, self.z_offset(n));
        match &self.terminal {
            TerminalCondition::SingularSurface => {
                let r = &w[self.r_offset()..self.r_offset() + self.model.n_y()];
                c.extend(self.model.null_residual(zn, r));
                c.push(r.iter().map(|v| v * v).sum::<f64>() - 1.0);
            }
            TerminalCondition::EndPoint(target) => {
                c.extend(zn.iter().zip(target.z()).map(|(a, b)| a - b));
            }
            TerminalCondition::CustomManifold(hm) => {
                c.extend(hm.eval(zn, self.block(w, self.w_offset(n))));
            }
        }
        c
    }

    fn jacobian(&self, w: &[f64]) -> Vec<(usize, usize, f64)> {
        let nz = self.nz();
        let n = self.intervals();
        let h = self.h();
        let mut t = Vec::new();
        for i in 0..nz {
            t.push((i, self.z_offset(0) + i, 1.0));
        }
        for k in 0..n {
            let row = self.defect_row(k);
            for i in 0..nz {
                t.push((row + i, self.z_offset(k + 1) + i, 1.0));
                t.push((row + i, self.z_offset(k) + i, -1.0));
                match self.options.scheme {
                    Scheme::Trapezoidal => {
                        t.push((row + i, self.w_offset(k) + i, -0.5 * h));
                        t.push((row + i, self.w_offset(k + 1) + i, -0.5 * h));
                    }
                    Scheme::HermiteSimpson => {
                        t.push((row + i, self.w_offset(k) + i, -h / 6.0));
                        t.push((row + i, self.mid_offset(k) + i, -4.0 * h / 6.0));
                        t.push((row + i, self.w_offset(k + 1) + i, -h / 6.0));
                    }
                }
            }
        }
        for k in self.path_nodes() {
            let jk = self.model.jacobian(self.block(w, self.z_offset(k)));
            push_dense(&mut t, &jk, self.path_row(k), self.z_offset(k));
        }
        let row = self.terminal_row();
        let zn = self.block(w, self.z_offset(n));
        match &self.terminal {
            TerminalCondition::SingularSurface => {
                let n_y = self.model.n_y();
                let r = &w[self.r_offset()..self.r_offset() + n_y];
                push_dense(&mut t, &self.model.null_jacobian(zn, r), row, self.z_offset(n));
                let js = self.model.singular_jacobian(zn);
                push_dense(&mut t, &js.transpose(), row, self.r_offset());
                for (k, &v) in r.iter().enumerate() {
                    t.push((row + n_y, self.r_offset() + k, 2.0 * v));
                }
            }
            TerminalCondition::EndPoint(_) => {
                for i in 0..nz {
                    t.push((row + i, self.z_offset(n) + i, 1.0));
                }
            }
            TerminalCondition::CustomManifold(hm) => {
                let jac = hm.jacobian(zn, self.block(w, self.w_offset(n)));
                push_dense(&mut t, &jac, row, self.z_offset(n));
            }
        }
        t
    }

    fn hessian(&self, w: &[f64], sigma: f64, lambda: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        let nz = self.nz();
        let n = self.intervals();
        let mut t = Vec::new();
        if sigma != 0.0 {
            for s in &self.samples {
                let (z, u) = (self.combine(w, &s.z), self.combine(w, &s.w));
                let hs = self.integrand(&z, &u, true).2.expect("hessian requested");
                let terms: Vec<(usize, usize, f64)> = s
                    .z
                    .iter()
                    .map(|&(o, c)| (o, 0, c))
                    .chain(s.w.iter().map(|&(o, c)| (o, nz, c)))
                    .collect();
                let scale = sigma * s.weight;
                for &(oa, pa, ca) in &terms {
                    for &(ob, pb, cb) in &terms {
                        if oa < ob {
                            continue;
                        }
                        let f = scale * ca * cb;
                        for i in 0..nz {
                            for j in 0..nz {
                                let (row, col) = (oa + i, ob + j);
                                if row < col {
                                    continue;
                                }
                                let v = hs[(pa + i, pb + j)];
                                if v != 0.0 {
                                    t.push((row, col, f * v));
                                }
                            }
                        }
                    }
                }
            }
            let delta = self.options.regularization;
            for &(off, c) in &self.regularized {
                for i in off..off + nz {
                    t.push((i, i, 2.0 * sigma * delta * c));
                }
            }
        }
        let rows = self.model.n_rows();
        for k in self.path_nodes() {
            let off = self.path_row(k);
            let lk = &lambda[off..off + rows];
            if lk.iter().any(|&v| v != 0.0) {
                let hk = self.model.weighted_hessian(self.block(w, self.z_offset(k)), lk);
                push_lower(&mut t, &hk, self.z_offset(k));
            }
        }
        let row = self.terminal_row();
        let zn = self.block(w, self.z_offset(n));
        match &self.terminal {
            TerminalCondition::SingularSurface => {
                let n_y = self.model.n_y();
                let r = &w[self.r_offset()..self.r_offset() + n_y];
                let mu = &lambda[row..row + n_y];
                let hzz = self.model.null_hessian_zz(zn, r, mu);
                push_lower(&mut t, &hzz, self.z_offset(n));
                let hzr = self.model.null_hessian_zr(zn, mu);
                push_dense(&mut t, &hzr.transpose(), self.r_offset(), self.z_offset(n));
                for k in 0..n_y {
                    t.push((self.r_offset() + k, self.r_offset() + k, 2.0 * lambda[row + n_y]));
                }
            }
            TerminalCondition::EndPoint(_) => {}
            TerminalCondition::CustomManifold(hm) => {
                let weights = &lambda[row..row + hm.dim()];
                let hh = hm.weighted_hessian(zn, self.block(w, self.w_offset(n)), weights);
                push_lower(&mut t, &hh, self.z_offset(n));
            }
        }
        Some(t)
    }
}
