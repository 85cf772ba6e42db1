use nalgebra::DMatrix;

use super::{HessianMode, IpmOptions, IterationLog, NlpProblem, SolveReport, SolveStatus};
use crate::linalg::{dot, norm_inf, Factorization, Triplets};

const CURVATURE_KAPPA: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;
const DELTA_C: f64 = 1e-8;
const DUAL_SCALE_MAX: f64 = 100.0;
const Z_SAFEGUARD: f64 = 1e10;

struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn has_l(&self, i: usize) -> bool {
        self.lower[i].is_finite()
    }
    fn has_u(&self, i: usize) -> bool {
        self.upper[i].is_finite()
    }
    fn any(&self) -> bool {
        (0..self.lower.len()).any(|i| self.has_l(i) || self.has_u(i))
    }

    fn push_inside(&self, w: &mut [f64]) {
        for i in 0..w.len() {
            let (l, u) = (self.lower[i], self.upper[i]);
            let mut pl = 1e-2 * l.abs().max(1.0);
            let mut pu = 1e-2 * u.abs().max(1.0);
            if l.is_finite() && u.is_finite() {
                pl = pl.min(0.5 * (u - l));
                pu = pu.min(0.5 * (u - l));
            }
            if l.is_finite() && w[i] < l + pl {
                w[i] = l + pl;
            }
            if u.is_finite() && w[i] > u - pu {
                w[i] = u - pu;
            }
        }
    }
}

/// Largest `alpha <= 1` keeping `v + alpha dv` at least a fraction
/// `1 - tau` of the way from its bound.
fn fraction_to_boundary(dist: &[f64], ddist: &[f64], tau: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (&s, &ds) in dist.iter().zip(ddist) {
        if ds < 0.0 {
            alpha = alpha.min(-tau * s / ds);
        }
    }
    alpha
}

struct Evaluation {
    f: f64,
    grad: Vec<f64>,
    c: Vec<f64>,
    jac: Vec<(usize, usize, f64)>,
}

fn evaluate<P: NlpProblem + ?Sized>(p: &P, w: &[f64]) -> Evaluation {
    Evaluation {
        f: p.objective(w),
        grad: p.gradient(w),
        c: p.constraints(w),
        jac: p.jacobian(w),
    }
}

fn jt_times(jac: &[(usize, usize, f64)], lambda: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for &(i, j, v) in jac {
        out[j] += v * lambda[i];
    }
    out
}

fn sym_times(lower: &[(usize, usize, f64)], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for &(r, c, a) in lower {
        out[r] += a * v[c];
        if r != c {
            out[c] += a * v[r];
        }
    }
    out
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

struct State {
    w: Vec<f64>,
    lambda: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

fn bound_distances(b: &Bounds, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let sl = (0..w.len())
        .map(|i| if b.has_l(i) { w[i] - b.lower[i] } else { 1.0 })
        .collect();
    let su = (0..w.len())
        .map(|i| if b.has_u(i) { b.upper[i] - w[i] } else { 1.0 })
        .collect();
    (sl, su)
}

fn barrier_value(b: &Bounds, w: &[f64], f: f64, mu: f64) -> f64 {
    let mut v = f;
    for i in 0..w.len() {
        if b.has_l(i) {
            v -= mu * (w[i] - b.lower[i]).ln();
        }
        if b.has_u(i) {
            v -= mu * (b.upper[i] - w[i]).ln();
        }
    }
    v
}

/// Scaled optimality measures `(dual, primal, complementarity)` for barrier `mu`.
fn errors(
    b: &Bounds,
    st: &State,
    ev: &Evaluation,
    mu: f64,
) -> (f64, f64, f64, Vec<f64>) {
    let n = st.w.len();
    let m = st.lambda.len();
    let mut grad_lag = jt_times(&ev.jac, &st.lambda, n);
    for i in 0..n {
        grad_lag[i] += ev.grad[i] - st.zl[i] + st.zu[i];
    }
    let zsum = norm1(&st.zl) + norm1(&st.zu);
    let s_d = (DUAL_SCALE_MAX.max((norm1(&st.lambda) + zsum) / (m + n).max(1) as f64))
        / DUAL_SCALE_MAX;
    let s_c = DUAL_SCALE_MAX.max(zsum / n.max(1) as f64) / DUAL_SCALE_MAX;
    let (sl, su) = bound_distances(b, &st.w);
    let mut comp: f64 = 0.0;
    for i in 0..n {
        if b.has_l(i) {
            comp = comp.max((sl[i] * st.zl[i] - mu).abs());
        }
        if b.has_u(i) {
            comp = comp.max((su[i] * st.zu[i] - mu).abs());
        }
    }
    (
        norm_inf(&grad_lag) / s_d,
        norm_inf(&ev.c),
        comp / s_c,
        grad_lag,
    )
}

struct Kkt {
    fact: Factorization,
    n: usize,
}

impl Kkt {
    fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rhs = r1.to_vec();
        rhs.extend_from_slice(r2);
        let sol = self.fact.solve(&rhs);
        (sol[..self.n].to_vec(), sol[self.n..].to_vec())
    }
}

fn assemble(
    n: usize,
    m: usize,
    hess: &[(usize, usize, f64)],
    diag: &[f64],
    jac: &[(usize, usize, f64)],
    delta_c: f64,
) -> Triplets {
    let mut t = Triplets::with_capacity(n + m, 2 * hess.len() + n + 2 * jac.len() + m);
    for &(r, c, v) in hess {
        t.push(r, c, v);
        if r != c {
            t.push(c, r, v);
        }
    }
    for (i, &d) in diag.iter().enumerate() {
        t.push(i, i, d);
    }
    for &(i, j, v) in jac {
        t.push(n + i, j, v);
        t.push(j, n + i, v);
    }
    for i in 0..m {
        t.push(n + i, n + i, -delta_c);
    }
    t
}

/// Solves `problem` from `w0` with a primal-dual interior-point method:
/// log barrier on bounds, Newton steps on the regularized KKT system, and a
/// backtracking line search on an l1 merit function with second-order
/// correction.
pub fn solve<P: NlpProblem + ?Sized>(problem: &P, w0: &[f64], opts: &IpmOptions) -> SolveReport {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    assert_eq!(w0.len(), n, "initial point has wrong dimension");
    let (lower, upper) = problem.bounds();
    let bounds = Bounds { lower, upper };
    let has_bounds = bounds.any();
    let mut w = w0.to_vec();
    bounds.push_inside(&mut w);
    let zl: Vec<f64> = (0..n).map(|i| if bounds.has_l(i) { 1.0 } else { 0.0 }).collect();
    let zu: Vec<f64> = (0..n).map(|i| if bounds.has_u(i) { 1.0 } else { 0.0 }).collect();
    let mut st = State {
        w,
        lambda: vec![0.0; m],
        zl,
        zu,
    };
    let exact = opts.hessian == HessianMode::Exact
        && problem.hessian(&st.w, 1.0, &st.lambda).is_some();
    let mut bfgs = if exact { None } else { Some(DMatrix::<f64>::identity(n, n)) };

    let mut ev = evaluate(problem, &st.w);
    st.lambda = least_squares_multipliers(n, m, &ev, &st);
    let mut mu = if has_bounds { opts.mu_init } else { 0.0 };
    let mut nu: f64 = 1.0;
    let mut delta_w_last = 0.0;
    let mut log = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    for iter in 0..=opts.max_iterations {
        iterations = iter;
        let (e_d, e_p, e_c, _) = errors(&bounds, &st, &ev, 0.0);
        if e_d <= opts.dual_tolerance
            && e_p <= opts.constraint_tolerance
            && e_c <= opts.complementarity_tolerance
        {
            status = SolveStatus::Optimal;
            break;
        }
        if iter == opts.max_iterations {
            break;
        }
        if has_bounds {
            loop {
                let (d, p, c, _) = errors(&bounds, &st, &ev, mu);
                if mu > opts.mu_min && d.max(p).max(c) <= 10.0 * mu {
                    mu = (mu * opts.mu_factor).max(opts.mu_min);
                } else {
                    break;
                }
            }
        }

        // Newton system pieces
        let (sl, su) = bound_distances(&bounds, &st.w);
        let mut sigma = vec![0.0; n];
        let mut grad_phi = ev.grad.clone();
        for i in 0..n {
            if bounds.has_l(i) {
                sigma[i] += st.zl[i] / sl[i];
                grad_phi[i] -= mu / sl[i];
            }
            if bounds.has_u(i) {
                sigma[i] += st.zu[i] / su[i];
                grad_phi[i] += mu / su[i];
            }
        }
        let hess: Vec<(usize, usize, f64)> = match &bfgs {
            None => problem
                .hessian(&st.w, 1.0, &st.lambda)
                .expect("problem stopped supplying a Hessian"),
            Some(b) => {
                let mut t = Vec::with_capacity(n * (n + 1) / 2);
                for r in 0..n {
                    for c in 0..=r {
                        t.push((r, c, b[(r, c)]));
                    }
                }
                t
            }
        };
        let jt_lambda = jt_times(&ev.jac, &st.lambda, n);
        let r1: Vec<f64> = (0..n).map(|i| -(grad_phi[i] + jt_lambda[i])).collect();
        let r2: Vec<f64> = ev.c.iter().map(|v| -v).collect();
        let zero_m = vec![0.0; m];
        let zero_n = vec![0.0; n];

        // regularize until the tangential step has positive curvature
        let mut delta_w = 0.0;
        let mut delta_c = 0.0;
        let (kkt, dw, dlambda) = loop {
            let mut diag = sigma.clone();
            diag.iter_mut().for_each(|d| *d += delta_w);
            let trip = assemble(n, m, &hess, &diag, &ev.jac, delta_c);
            let fact = Factorization::new(&trip);
            let accepted = match fact {
                Err(_) => {
                    if delta_c == 0.0 && m > 0 {
                        delta_c = DELTA_C;
                    } else {
                        delta_c *= 10.0;
                    }
                    None
                }
                Ok(fact) => {
                    let kkt = Kkt { fact, n };
                    let (tw, tl) = kkt.solve(&r1, &zero_m);
                    let (nw, nl) = kkt.solve(&zero_n, &r2);
                    let finite = tw.iter().chain(&nw).chain(&tl).chain(&nl).all(|v| v.is_finite());
                    let htw = sym_times(&hess, &tw);
                    let curv: f64 = (0..n).map(|i| tw[i] * (htw[i] + diag[i] * tw[i])).sum();
                    let tn2 = dot(&tw, &tw);
                    if finite && (curv >= CURVATURE_KAPPA * tn2 || tn2 == 0.0) {
                        let dw: Vec<f64> = (0..n).map(|i| tw[i] + nw[i]).collect();
                        let dl: Vec<f64> = (0..m).map(|i| tl[i] + nl[i]).collect();
                        Some((kkt, dw, dl))
                    } else {
                        None
                    }
                }
            };
            if let Some(found) = accepted {
                if delta_w > 0.0 {
                    delta_w_last = delta_w;
                }
                break found;
            }
            delta_w = if delta_w == 0.0 {
                if delta_w_last == 0.0 {
                    1e-4
                } else {
                    (delta_w_last / 3.0).max(1e-20)
                }
            } else {
                delta_w * 8.0
            };
            if delta_w > opts.max_regularization {
                status = SolveStatus::NumericalFailure;
                break (
                    Kkt {
                        fact: Factorization::from_dense(&DMatrix::identity(1, 1)).unwrap(),
                        n,
                    },
                    Vec::new(),
                    Vec::new(),
                );
            }
        };
        if status == SolveStatus::NumericalFailure {
            break;
        }

        let tau = (1.0 - mu).max(0.99);
        let (dsl, dsu): (Vec<f64>, Vec<f64>) = (
            (0..n).map(|i| if bounds.has_l(i) { dw[i] } else { 0.0 }).collect(),
            (0..n).map(|i| if bounds.has_u(i) { -dw[i] } else { 0.0 }).collect(),
        );
        let alpha_max = fraction_to_boundary(&sl, &dsl, tau).min(fraction_to_boundary(&su, &dsu, tau));
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for i in 0..n {
            if bounds.has_l(i) {
                dzl[i] = mu / sl[i] - st.zl[i] - st.zl[i] / sl[i] * dw[i];
            }
            if bounds.has_u(i) {
                dzu[i] = mu / su[i] - st.zu[i] + st.zu[i] / su[i] * dw[i];
            }
        }
        let alpha_z = fraction_to_boundary(&st.zl, &dzl, tau).min(fraction_to_boundary(&st.zu, &dzu, tau));

        // merit function
        let theta = norm1(&ev.c);
        let hdw = sym_times(&hess, &dw);
        let dhd: f64 = (0..n).map(|i| dw[i] * (hdw[i] + (sigma[i] + delta_w) * dw[i])).sum();
        let gphi_dw = dot(&grad_phi, &dw);
        if theta > 0.0 {
            let required = (gphi_dw + 0.5 * dhd.max(0.0)) / (0.9 * theta);
            if nu < required {
                nu = required + 1.0;
            }
        }
        let merit = |w: &[f64], f: f64, c: &[f64]| barrier_value(&bounds, w, f, mu) + nu * norm1(c);
        let phi0 = merit(&st.w, ev.f, &ev.c);
        let slope = gphi_dw - nu * theta;

        let mut alpha = alpha_max;
        let mut accepted: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        let tiny = (0..n).all(|i| (alpha * dw[i]).abs() <= 1e-14 * st.w[i].abs().max(1.0));
        for trial in 0..50 {
            let wt: Vec<f64> = (0..n).map(|i| st.w[i] + alpha * dw[i]).collect();
            let ft = problem.objective(&wt);
            let ct = problem.constraints(&wt);
            let phit = merit(&wt, ft, &ct);
            if tiny || (phit.is_finite() && phit <= phi0 + ARMIJO * alpha * slope) {
                accepted = Some((wt, alpha, dlambda.clone()));
                break;
            }
            if trial == 0 && alpha == alpha_max {
                // second-order correction against constraint curvature
                let c_soc: Vec<f64> = (0..m).map(|i| -(alpha * ev.c[i] + ct[i])).collect();
                let (sw, sl_soc) = kkt.solve(&r1, &c_soc);
                let dsl2: Vec<f64> = (0..n).map(|i| if bounds.has_l(i) { sw[i] } else { 0.0 }).collect();
                let dsu2: Vec<f64> = (0..n).map(|i| if bounds.has_u(i) { -sw[i] } else { 0.0 }).collect();
                let a_soc = fraction_to_boundary(&sl, &dsl2, tau).min(fraction_to_boundary(&su, &dsu2, tau));
                let ws: Vec<f64> = (0..n).map(|i| st.w[i] + a_soc * sw[i]).collect();
                let fs = problem.objective(&ws);
                let cs = problem.constraints(&ws);
                let phis = merit(&ws, fs, &cs);
                if phis.is_finite() && phis <= phi0 + ARMIJO * alpha * slope {
                    accepted = Some((ws, a_soc, sl_soc));
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-14 {
                break;
            }
        }

        let (w_new, alpha, dl) = match accepted {
            Some(a) => a,
            None => match restoration(problem, &bounds, &st, &ev, tau) {
                Some(w_r) => {
                    let lambda_keep = st.lambda.clone();
                    (w_r, 0.0, lambda_keep.iter().map(|_| 0.0).collect())
                }
                None => {
                    status = if e_p > opts.constraint_tolerance {
                        SolveStatus::Infeasible
                    } else {
                        SolveStatus::NumericalFailure
                    };
                    break;
                }
            },
        };
        let restored = alpha == 0.0;
        let old_grad_lag_new_lambda = |lambda: &[f64]| {
            let mut g = jt_times(&ev.jac, lambda, n);
            for i in 0..n {
                g[i] += ev.grad[i];
            }
            g
        };
        let w_old = std::mem::replace(&mut st.w, w_new);
        for i in 0..m {
            st.lambda[i] += alpha * dl[i];
        }
        let az = if restored { 0.0 } else { alpha_z };
        for i in 0..n {
            st.zl[i] += az * dzl[i];
            st.zu[i] += az * dzu[i];
        }
        let g_old = old_grad_lag_new_lambda(&st.lambda);
        ev = evaluate(problem, &st.w);
        if restored {
            st.lambda = least_squares_multipliers(n, m, &ev, &st);
        }
        // keep bound multipliers within a band around mu / s
        let (sl_new, su_new) = bound_distances(&bounds, &st.w);
        for i in 0..n {
            if bounds.has_l(i) && mu > 0.0 {
                let c = mu / sl_new[i];
                st.zl[i] = st.zl[i].clamp(c / Z_SAFEGUARD, c * Z_SAFEGUARD);
            }
            if bounds.has_u(i) && mu > 0.0 {
                let c = mu / su_new[i];
                st.zu[i] = st.zu[i].clamp(c / Z_SAFEGUARD, c * Z_SAFEGUARD);
            }
        }
        if let Some(b) = bfgs.as_mut() {
            let mut g_new = jt_times(&ev.jac, &st.lambda, n);
            for i in 0..n {
                g_new[i] += ev.grad[i];
            }
            let s: Vec<f64> = (0..n).map(|i| st.w[i] - w_old[i]).collect();
            let y: Vec<f64> = (0..n).map(|i| g_new[i] - g_old[i]).collect();
            damped_bfgs_update(b, &s, &y);
        }
        if opts.keep_log {
            let (d, p, _, _) = errors(&bounds, &st, &ev, mu);
            log.push(IterationLog {
                iteration: iter + 1,
                objective: ev.f,
                primal_infeasibility: p,
                dual_infeasibility: d,
                barrier: mu,
                step_length: alpha,
                regularization: delta_w,
            });
        }
    }

    let (e_d, e_p, e_c, grad_lag) = errors(&bounds, &st, &ev, 0.0);
    let _ = grad_lag;
    SolveReport {
        status,
        kkt_residual: e_d.max(e_p).max(e_c),
        iterations,
        objective: ev.f,
        solution: st.w.clone(),
        multipliers: st.lambda.clone(),
        bound_multipliers: (0..n).map(|i| st.zl[i] - st.zu[i]).collect(),
        constraint_violation: e_p,
        dual_infeasibility: e_d,
        hessian: if exact { "exact".into() } else { "bfgs".into() },
        log,
    }
}

/// Multipliers minimizing `|grad f - z + J' lambda|`, zero if implausibly large.
fn least_squares_multipliers(n: usize, m: usize, ev: &Evaluation, st: &State) -> Vec<f64> {
    if m == 0 {
        return Vec::new();
    }
    let ones = vec![1.0; n];
    let trip = assemble(n, m, &[], &ones, &ev.jac, DELTA_C);
    let Ok(fact) = Factorization::new(&trip) else {
        return vec![0.0; m];
    };
    let kkt = Kkt { fact, n };
    let r1: Vec<f64> = (0..n).map(|i| -(ev.grad[i] - st.zl[i] + st.zu[i])).collect();
    let (_, lambda) = kkt.solve(&r1, &vec![0.0; m]);
    if lambda.iter().all(|v| v.is_finite()) && norm_inf(&lambda) <= 1e3 {
        lambda
    } else {
        vec![0.0; m]
    }
}

/// Gauss-Newton steps on `|c|^2` with the minimum-norm step. Returns a point
/// with reduced violation, or `None` when no progress is possible.
fn restoration<P: NlpProblem + ?Sized>(
    problem: &P,
    bounds: &Bounds,
    st: &State,
    ev: &Evaluation,
    tau: f64,
) -> Option<Vec<f64>> {
    let n = st.w.len();
    let m = ev.c.len();
    if m == 0 {
        return None;
    }
    let theta0 = norm1(&ev.c);
    if theta0 == 0.0 {
        return None;
    }
    let ones = vec![1.0; n];
    let trip = assemble(n, m, &[], &ones, &ev.jac, DELTA_C);
    let fact = Factorization::new(&trip).ok()?;
    let kkt = Kkt { fact, n };
    let r2: Vec<f64> = ev.c.iter().map(|v| -v).collect();
    let (dw, _) = kkt.solve(&vec![0.0; n], &r2);
    let (sl, su) = bound_distances(bounds, &st.w);
    let dsl: Vec<f64> = (0..n).map(|i| if bounds.has_l(i) { dw[i] } else { 0.0 }).collect();
    let dsu: Vec<f64> = (0..n).map(|i| if bounds.has_u(i) { -dw[i] } else { 0.0 }).collect();
    let mut alpha = fraction_to_boundary(&sl, &dsl, tau).min(fraction_to_boundary(&su, &dsu, tau));
    while alpha > 1e-10 {
        let wt: Vec<f64> = (0..n).map(|i| st.w[i] + alpha * dw[i]).collect();
        let theta = norm1(&problem.constraints(&wt));
        if theta.is_finite() && theta <= (1.0 - 1e-4 * alpha) * theta0 {
            return Some(wt);
        }
        alpha *= 0.5;
    }
    None
}

fn damped_bfgs_update(b: &mut DMatrix<f64>, s: &[f64], y: &[f64]) {
    let n = s.len();
    let sv = nalgebra::DVector::from_column_slice(s);
    let yv = nalgebra::DVector::from_column_slice(y);
    let bs = &*b * &sv;
    let sbs = sv.dot(&bs);
    if !(sbs > 1e-16) {
        return;
    }
    let sy = sv.dot(&yv);
    let theta = if sy >= 0.2 * sbs {
        1.0
    } else {
        0.8 * sbs / (sbs - sy)
    };
    let r = &yv * theta + &bs * (1.0 - theta);
    let sr = sv.dot(&r);
    if !(sr > 1e-16) {
        return;
    }
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += -bs[i] * bs[j] / sbs + r[i] * r[j] / sr;
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::nlp::{solve, IpmOptions, NlpProblem, SolveStatus};

    struct Shift;
    impl NlpProblem for Shift {
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
        fn hessian(&self, _w: &[f64], s: f64, _l: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
            Some(vec![(0, 0, 2.0 * s)])
        }
    }

    #[test]
    fn linear_constraint_quadratic() {
        let r = solve(&Shift, &[0.0], &IpmOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.solution[0] - 2.0).abs() < 1e-8);
        assert!((r.multipliers[0] + 2.0).abs() < 1e-8);
    }

    struct Boxed;
    impl NlpProblem for Boxed {
        fn num_variables(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
            (vec![0.5, f64::NEG_INFINITY], vec![f64::INFINITY, -0.25])
        }
        fn objective(&self, w: &[f64]) -> f64 {
            w[0] * w[0] + w[1] * w[1]
        }
        fn gradient(&self, w: &[f64]) -> Vec<f64> {
            vec![2.0 * w[0], 2.0 * w[1]]
        }
        fn constraints(&self, _w: &[f64]) -> Vec<f64> {
            Vec::new()
        }
        fn jacobian(&self, _w: &[f64]) -> Vec<(usize, usize, f64)> {
            Vec::new()
        }
    }

    #[test]
    fn active_bounds_with_quasi_newton() {
        let r = solve(&Boxed, &[3.0, -2.0], &IpmOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.hessian, "bfgs");
        assert!((r.solution[0] - 0.5).abs() < 1e-6);
        assert!((r.solution[1] + 0.25).abs() < 1e-6);
        // multipliers of the active bounds equal the objective gradient
        assert!((r.bound_multipliers[0] - 1.0).abs() < 1e-5);
        assert!((r.bound_multipliers[1] + 0.5).abs() < 1e-5);
    }
}
