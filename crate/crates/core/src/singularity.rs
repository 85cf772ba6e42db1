//! Distance to the singular surface: smallest singular pair of the reduced
//! Jacobian, determinant sign tracking and nose-point counting along paths.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::StudyModel;
use crate::linalg::norm_inf;
use crate::powerflow::{self, NewtonOptions};

/// A reduced Jacobian whose smallest singular value is below this is
/// considered to lie on the singular surface.
pub const SINGULAR_THRESHOLD: f64 = 1e-4;

const MAX_INVERSE_ITERATIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularityError {
    #[error("path sample {index} is off the manifold (residual {residual:e})")]
    OffManifoldSample { index: usize, residual: f64 },
    #[error("endpoint is not singular (smallest singular value {sigma_min:e})")]
    EndpointNotSingular { sigma_min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDiagnosis {
    pub sigma_min: f64,
    pub left_vector: Vec<f64>,
    pub det_sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceClass {
    CorrectSurface,
    WrongSurface,
}

/// Flips `v` so that its first nonzero component is positive.
pub fn canonical_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// Sign of `det(j)` from an LU factorization with partial pivoting.
pub fn det_sign(j: &DMatrix<f64>) -> i8 {
    if j.nrows() == 0 {
        return 1;
    }
    let lu = j.clone().lu();
    let mut sign = lu.p().determinant::<f64>();
    let u = lu.u();
    for k in 0..u.nrows() {
        let d = u[(k, k)];
        if d == 0.0 || !d.is_finite() {
            return 0;
        }
        if d < 0.0 {
            sign = -sign;
        }
    }
    if sign > 0.0 {
        1
    } else {
        -1
    }
}

fn svd_pair(j: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let svd = j.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let (k, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, &s)| {
            if s < best.1 {
                (k, s)
            } else {
                best
            }
        });
    (s, u.column(k).iter().copied().collect())
}

/// Smallest singular value `sigma` of square `j` with a unit left vector
/// `r`, `|r' j| = sigma`. Inverse iteration on `j j'`, falling back to a
/// full SVD when the LU is singular or iteration stalls.
pub fn smallest_singular_pair(j: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let n = j.nrows();
    assert_eq!(n, j.ncols(), "square matrix required");
    if n == 0 {
        return (f64::INFINITY, Vec::new());
    }
    let (sigma, mut r) = match inverse_iteration(j) {
        Some(pair) => pair,
        None => svd_pair(j),
    };
    canonical_sign(&mut r);
    (sigma, r)
}

fn inverse_iteration(j: &DMatrix<f64>) -> Option<(f64, Vec<f64>)> {
    let n = j.nrows();
    let lu = j.clone().lu();
    let lut = j.transpose().lu();
    let scale = j.amax();
    if !(scale > 0.0) {
        return None;
    }
    let u = lu.u();
    if (0..n).any(|k| u[(k, k)].abs() <= 1e-14 * scale) {
        return None;
    }
    // deterministic start with no special alignment
    let mut r = DVector::from_fn(n, |k, _| 1.0 + 0.1 * ((k * 7 + 3) % 11) as f64);
    r /= r.norm();
    let mut prev_sigma = f64::INFINITY;
    for _ in 0..MAX_INVERSE_ITERATIONS {
        // (j j')^{-1} r = j'^{-1} j^{-1} r
        let a = lu.solve(&r)?;
        let b = lut.solve(&a)?;
        let nb = b.norm();
        if !(nb.is_finite() && nb > 0.0) {
            return None;
        }
        let next = b / nb;
        let sigma = (j.transpose() * &next).norm();
        let aligned = if next.dot(&r) < 0.0 { -&next } else { next.clone() };
        let change = (&aligned - &r).norm();
        r = aligned;
        if change < 1e-13 || (prev_sigma - sigma).abs() <= 1e-15 * scale && change < 1e-9 {
            return Some((sigma, r.as_slice().to_vec()));
        }
        prev_sigma = sigma;
    }
    None
}

pub fn diagnose(j: &DMatrix<f64>) -> SingularDiagnosis {
    let (sigma_min, left_vector) = smallest_singular_pair(j);
    SingularDiagnosis {
        sigma_min,
        left_vector,
        det_sign: det_sign(j),
    }
}

/// Diagnosis of the reduced Jacobian of `model` at `z`.
pub fn diagnose_at(model: &StudyModel, z: &[f64]) -> SingularDiagnosis {
    diagnose(&model.singular_jacobian(z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoseCrossing {
    /// Index of the sample that starts the bracketing segment.
    pub segment: usize,
    /// Position of the crossing within the segment, in `[0, 1]`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoseCount {
    pub count: usize,
    pub crossings: Vec<NoseCrossing>,
    /// Whether the final sample lies on the singular surface.
    pub terminal: bool,
}

/// Counts nose points along an ordered list of on-manifold samples `z`.
///
/// Interior crossings are determinant sign changes between consecutive
/// regular samples; a singular final sample adds one more.
pub fn nose_point_count(
    model: &StudyModel,
    samples: &[Vec<f64>],
    manifold_tol: f64,
) -> Result<NoseCount, SingularityError> {
    let mut diag = Vec::with_capacity(samples.len());
    for (index, z) in samples.iter().enumerate() {
        let residual = norm_inf(&model.residual(z));
        if !(residual < manifold_tol) {
            return Err(SingularityError::OffManifoldSample { index, residual });
        }
        let j = model.singular_jacobian(z);
        let (sigma, _) = smallest_singular_pair(&j);
        diag.push((sigma, det_sign(&j)));
    }
    let mut crossings = Vec::new();
    let mut last: Option<(usize, i8)> = None;
    for (k, &(sigma, sign)) in diag.iter().enumerate() {
        if sigma < SINGULAR_THRESHOLD || sign == 0 {
            continue;
        }
        if let Some((prev, prev_sign)) = last {
            if prev_sign != sign {
                crossings.push(NoseCrossing {
                    segment: prev,
                    fraction: refine_crossing(model, &samples[prev], &samples[k], prev_sign),
                });
            }
        }
        last = Some((k, sign));
    }
    let terminal = diag
        .last()
        .map(|&(s, _)| s < SINGULAR_THRESHOLD)
        .unwrap_or(false);
    Ok(NoseCount {
        count: crossings.len() + usize::from(terminal),
        crossings,
        terminal,
    })
}

/// Locates a sign change between two samples by bisection over the linear
/// interpolant, correcting each trial point back onto the manifold.
fn refine_crossing(model: &StudyModel, a: &[f64], b: &[f64], sign_a: i8) -> f64 {
    let n_x = model.n_x();
    let (mut lo, mut hi) = (0.0, 1.0);
    let opts = NewtonOptions::default();
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let z: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + mid * (q - p)).collect();
        let corrected = powerflow::newton_solve(model, &z[..n_x], &z[n_x..], &opts)
            .map(|s| s.point.z())
            .unwrap_or(z);
        let s = det_sign(&model.singular_jacobian(&corrected));
        if s == sign_a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Classifies a singular endpoint by the nose points met along the path that
/// leads to it.
pub fn classify_endpoint_surface(
    model: &StudyModel,
    endpoint: &[f64],
    reference_path: &[Vec<f64>],
    manifold_tol: f64,
) -> Result<(SurfaceClass, NoseCount), SingularityError> {
    let (sigma_min, _) = smallest_singular_pair(&model.singular_jacobian(endpoint));
    if !(sigma_min < SINGULAR_THRESHOLD) {
        return Err(SingularityError::EndpointNotSingular { sigma_min });
    }
    let mut samples = reference_path.to_vec();
    let ends_there = samples
        .last()
        .map(|z| z.iter().zip(endpoint).all(|(p, q)| (p - q).abs() < 1e-9))
        .unwrap_or(false);
    if !ends_there {
        samples.push(endpoint.to_vec());
    }
    let count = nose_point_count(model, &samples, manifold_tol)?;
    let class = if count.count > 1 {
        SurfaceClass::WrongSurface
    } else {
        SurfaceClass::CorrectSurface
    };
    Ok((class, count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_has_unit_sigma() {
        let (s, r) = smallest_singular_pair(&DMatrix::identity(4, 4));
        assert!((s - 1.0).abs() < 1e-12);
        assert!((r.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_diagonal() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (s, r) = smallest_singular_pair(&j);
        assert!(s.abs() < 1e-14);
        assert!((r[0]).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_matrix_matches_full_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let j = DMatrix::from_fn(20, 20, |_, _| rng.random_range(-1.0..1.0));
        let (s, r) = smallest_singular_pair(&j);
        let (s_ref, mut r_ref) = svd_pair(&j);
        canonical_sign(&mut r_ref);
        assert!((s - s_ref).abs() < 1e-10, "{s} vs {s_ref}");
        for (a, b) in r.iter().zip(&r_ref) {
            assert!((a - b).abs() < 1e-8);
        }
        let rt_j = j.transpose() * DVector::from_column_slice(&r);
        assert!((rt_j.norm() - s).abs() < 1e-10);
    }

    #[test]
    fn det_sign_matches_permutation_parity() {
        // a permutation matrix of one transposition has determinant -1
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(det_sign(&p), -1);
        let mut q = p.clone();
        q.row_mut(0).scale_mut(3.5);
        q.row_mut(2).scale_mut(0.01);
        assert_eq!(det_sign(&q), -1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
            let d = m.determinant();
            assert_eq!(det_sign(&m), if d > 0.0 { 1 } else { -1 });
        }
    }
}
