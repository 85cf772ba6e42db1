//! Quadratic forms in the rectangular voltage vector and their derivatives
//! with respect to model coordinates.
//!
//! Every residual row and every derived metric output is `w' A w` for a
//! sparse symmetric `A`, where `w = (e_1, f_1, ..., e_n, f_n)` collects the
//! real and imaginary voltage parts. Each component of `w` is either a model
//! coordinate, a constant, or `E cos(x_m)` / `E sin(x_m)` of a single angle
//! coordinate, so the chain rule stays diagonal.

use nalgebra::DMatrix;

/// Sparse symmetric matrix stored with both triangles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadForm {
    pub terms: Vec<(usize, usize, f64)>,
}

impl QuadForm {
    /// Adds `c * w_p * w_q` to the form.
    pub fn add_product(&mut self, p: usize, q: usize, c: f64) {
        if c == 0.0 {
            return;
        }
        if p == q {
            self.terms.push((p, p, c));
        } else {
            self.terms.push((p, q, 0.5 * c));
            self.terms.push((q, p, 0.5 * c));
        }
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        self.terms.iter().map(|&(p, q, a)| a * w[p] * w[q]).sum()
    }

    /// Appends `scale * self` to `out`.
    pub fn accumulate_into(&self, scale: f64, out: &mut QuadForm) {
        if scale == 0.0 {
            return;
        }
        out.terms
            .extend(self.terms.iter().map(|&(p, q, a)| (p, q, scale * a)));
    }
}

/// Dependence of one voltage component on a model coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dep {
    pub coord: usize,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Voltage vector and its coordinate derivatives at one point.
#[derive(Debug, Clone)]
pub struct Lift {
    pub w: Vec<f64>,
    pub deps: Vec<Option<Dep>>,
    pub n_coords: usize,
}

impl Lift {
    /// Gradient of `w' A w` with respect to the coordinates.
    pub fn grad(&self, form: &QuadForm) -> Vec<f64> {
        let mut g = vec![0.0; self.n_coords];
        self.add_grad(form, 1.0, &mut g);
        g
    }

    pub fn add_grad(&self, form: &QuadForm, scale: f64, g: &mut [f64]) {
        for &(p, q, a) in &form.terms {
            if let Some(d) = self.deps[p] {
                g[d.coord] += scale * 2.0 * a * d.d1 * self.w[q];
            }
        }
    }

    /// Adds `scale * Hessian(w' A w)` to `h`.
    pub fn add_hessian(&self, form: &QuadForm, scale: f64, h: &mut DMatrix<f64>) {
        for &(p, q, a) in &form.terms {
            let Some(dp) = self.deps[p] else { continue };
            if let Some(dq) = self.deps[q] {
                h[(dp.coord, dq.coord)] += scale * 2.0 * a * dp.d1 * dq.d1;
            }
            if dp.d2 != 0.0 {
                h[(dp.coord, dp.coord)] += scale * 2.0 * a * dp.d2 * self.w[q];
            }
        }
    }

    pub fn hessian(&self, form: &QuadForm) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n_coords, self.n_coords);
        self.add_hessian(form, 1.0, &mut h);
        h
    }

    /// `Hessian(w' A w) * m`, without forming the Hessian.
    pub fn hessian_vec(&self, form: &QuadForm, m: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_coords];
        for &(p, q, a) in &form.terms {
            let Some(dp) = self.deps[p] else { continue };
            if let Some(dq) = self.deps[q] {
                out[dp.coord] += 2.0 * a * dp.d1 * dq.d1 * m[dq.coord];
            }
            if dp.d2 != 0.0 {
                out[dp.coord] += 2.0 * a * dp.d2 * self.w[q] * m[dp.coord];
            }
        }
        out
    }

    /// Adds `scale * sum_c d^3(w' A w)/dz_a dz_b dz_c * m_c` to `h`.
    ///
    /// Only angle-driven components have nonzero second and third
    /// derivatives, so this vanishes for models that are polynomial in their
    /// coordinates.
    pub fn add_third_contracted(
        &self,
        form: &QuadForm,
        m: &[f64],
        scale: f64,
        h: &mut DMatrix<f64>,
    ) {
        for &(p, s, a) in &form.terms {
            let Some(dp) = self.deps[p] else { continue };
            let a2 = 2.0 * a * scale;
            if let Some(ds) = self.deps[s] {
                let v = m[dp.coord] * dp.d2 * ds.d1 + m[ds.coord] * dp.d1 * ds.d2;
                if v != 0.0 {
                    h[(dp.coord, ds.coord)] += a2 * v;
                }
                if dp.d2 != 0.0 {
                    // d2_p * (A wdot)_p with wdot_s = d1_s m_{coord(s)}
                    h[(dp.coord, dp.coord)] += a2 * dp.d2 * ds.d1 * m[ds.coord];
                }
            }
            if dp.d3 != 0.0 {
                h[(dp.coord, dp.coord)] += a2 * dp.d3 * m[dp.coord] * self.w[s];
            }
        }
    }
}
