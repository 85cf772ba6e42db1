use geomargin::nlp::NlpProblem;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// min w0 + w1  s.t.  w0^2 + w1^2 = 1.
pub struct Circle;

impl NlpProblem for Circle {
    fn num_variables(&self) -> usize {
        2
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn objective(&self, w: &[f64]) -> f64 {
        w[0] + w[1]
    }
    fn gradient(&self, _w: &[f64]) -> Vec<f64> {
        vec![1.0, 1.0]
    }
    fn constraints(&self, w: &[f64]) -> Vec<f64> {
        vec![w[0] * w[0] + w[1] * w[1] - 1.0]
    }
    fn jacobian(&self, w: &[f64]) -> Vec<(usize, usize, f64)> {
        vec![(0, 0, 2.0 * w[0]), (0, 1, 2.0 * w[1])]
    }
    fn hessian(&self, _w: &[f64], _obj_factor: f64, lambda: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        Some(vec![(0, 0, 2.0 * lambda[0]), (1, 1, 2.0 * lambda[0])])
    }
}

/// min (w - 1)^2  s.t.  w - 2 = 0.
pub struct Pinned;

impl NlpProblem for Pinned {
    fn num_variables(&self) -> usize {
        1
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn objective(&self, w: &[f64]) -> f64 {
        (w[0] - 1.0).powi(2)
    }
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        vec![2.0 * (w[0] - 1.0)]
    }
    fn constraints(&self, w: &[f64]) -> Vec<f64> {
        vec![w[0] - 2.0]
    }
    fn jacobian(&self, _w: &[f64]) -> Vec<(usize, usize, f64)> {
        vec![(0, 0, 1.0)]
    }
    fn hessian(&self, _w: &[f64], obj_factor: f64, _lambda: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        Some(vec![(0, 0, 2.0 * obj_factor)])
    }
}

/// min 1/2 w'Qw + c'w  s.t.  Aw = b.
pub struct Qp {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Qp {
    pub fn random(n: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let root = draw(n, n);
        let q = root.transpose() * &root + DMatrix::identity(n, n);
        let c = draw(n, 1).column(0).into_owned();
        let a = draw(m, n);
        let b = draw(m, 1).column(0).into_owned();
        Qp { q, c, a, b }
    }

    /// Direct solve of `[Q A'; A 0] [w; lambda] = [-c; b]`.
    pub fn kkt_solution(&self) -> (DVector<f64>, DVector<f64>) {
        let (n, m) = (self.q.nrows(), self.a.nrows());
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&self.q);
        k.view_mut((0, n), (n, m)).copy_from(&self.a.transpose());
        k.view_mut((n, 0), (m, n)).copy_from(&self.a);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&self.c));
        rhs.rows_mut(n, m).copy_from(&self.b);
        let sol = k.lu().solve(&rhs).unwrap();
        (sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned())
    }
}

impl NlpProblem for Qp {
    fn num_variables(&self) -> usize {
        self.q.nrows()
    }
    fn num_constraints(&self) -> usize {
        self.a.nrows()
    }
    fn objective(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        0.5 * w.dot(&(&self.q * &w)) + self.c.dot(&w)
    }
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        (&self.q * DVector::from_column_slice(w) + &self.c).as_slice().to_vec()
    }
    fn constraints(&self, w: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(w) - &self.b).as_slice().to_vec()
    }
    fn jacobian(&self, _w: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.a.nrows() {
            for j in 0..self.a.ncols() {
                out.push((i, j, self.a[(i, j)]));
            }
        }
        out
    }
    fn hessian(&self, _w: &[f64], obj_factor: f64, _lambda: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        let mut out = Vec::new();
        for i in 0..self.q.nrows() {
            for j in 0..=i {
                out.push((i, j, obj_factor * self.q[(i, j)]));
            }
        }
        Some(out)
    }
}

/// Delegates to `inner` with one Jacobian entry corrupted.
pub struct Faulty<'a, P: NlpProblem> {
    pub inner: &'a P,
    pub entry: (usize, usize),
}

impl<P: NlpProblem> NlpProblem for Faulty<'_, P> {
    fn num_variables(&self) -> usize {
        self.inner.num_variables()
    }
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }
    fn objective(&self, w: &[f64]) -> f64 {
        self.inner.objective(w)
    }
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.inner.gradient(w)
    }
    fn constraints(&self, w: &[f64]) -> Vec<f64> {
        self.inner.constraints(w)
    }
    fn jacobian(&self, w: &[f64]) -> Vec<(usize, usize, f64)> {
        let mut j = self.inner.jacobian(w);
        j.push((self.entry.0, self.entry.1, 1e-3));
        j
    }
}
