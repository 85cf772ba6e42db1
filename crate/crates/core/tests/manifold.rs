mod common;

use std::sync::Arc;

use geomargin::euclidean::{generate_seeds, solve_multistart, EuclideanOptions, SeedOptions};
use geomargin::grid::builtin::builtin;
use geomargin::grid::{OperatingPoint, StudyModel};
use geomargin::linalg::norm2;
use geomargin::manifold::{
    arc_length, continuation_seed, decision_count, geodesic_between_points, polyline_length, refine_mesh, regrid,
    solve_shortest_path, trace_associated_path, transcribe, AssociatedOptions, AssociatedStatus, DiscretizedPath,
    PathSolveOptions, TerminalCondition, TerminalManifold, TranscriptionOptions,
};
use geomargin::nlp::{NlpProblem, SolveStatus};
use geomargin::powerflow::{base_direction, base_point, newton_solve, NewtonOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn options(intervals: usize) -> PathSolveOptions {
    let mut o = PathSolveOptions::default();
    o.transcription.intervals = intervals;
    o
}

fn lossless_static() -> (StudyModel, OperatingPoint) {
    let (case, spec) = builtin("case9mod1-static").unwrap();
    let model = spec.build(&case.lossless()).unwrap();
    let base = base_point(&model).unwrap();
    (model, base)
}

/// Re-dispatches the free generators by `shift` and solves the power flow.
fn dispatch(model: &StudyModel, base: &OperatingPoint, shift: &[f64]) -> OperatingPoint {
    let mut x = base.x.clone();
    let free: Vec<usize> = (0..model.n_x()).filter(|&m| !model.is_dependent_x(m)).collect();
    for (&m, s) in free.iter().zip(shift) {
        x[m] += s;
    }
    newton_solve(model, &x, &base.y, &NewtonOptions::default()).unwrap().point
}

/// Path with the given metric coordinates as `x`, constant `y`.
fn coordinate_path(model: &StudyModel, y: &[f64], xs: Vec<Vec<f64>>, us: Vec<Vec<f64>>) -> DiscretizedPath {
    let n = xs.len();
    let mut path = DiscretizedPath {
        tau_grid: (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
        x_nodes: xs,
        y_nodes: vec![y.to_vec(); n],
        u_nodes: us,
        v_nodes: vec![vec![0.0; y.len()]; n],
        r_terminal: None,
        arc_length: 0.0,
    };
    path.arc_length = arc_length(model, &path);
    path
}

#[test]
fn static_transcription_size() {
    let (model, base) = common::study("case9mod1-static");
    let (vars, _) = decision_count(&model, &base, TerminalCondition::SingularSurface, &TranscriptionOptions::default()).unwrap();
    assert_eq!(vars, (3 + 23 + 3 + 23) * 51 + 23);
}

#[test]
fn off_manifold_start_is_rejected() {
    let (model, base) = common::study("case9mod1-static");
    let mut off = base.clone();
    off.y[0] += 0.1;
    assert!(transcribe(&model, &off, TerminalCondition::SingularSurface, &TranscriptionOptions::default()).is_err());
    let short = TranscriptionOptions {
        intervals: 5,
        ..TranscriptionOptions::default()
    };
    assert!(transcribe(&model, &base, TerminalCondition::SingularSurface, &short).is_err());
}

#[test]
fn geodesic_to_the_start_is_empty() {
    let (model, base) = common::study("case9mod2");
    let (path, r) = geodesic_between_points(&model, &base, &base, &options(20)).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.arc_length < 1e-8, "{}", r.arc_length);
    assert!(r.objective.abs() < 1e-8);
    for k in 0..path.len() {
        assert!(norm2(&path.w(k)) < 1e-6);
    }
}

#[test]
fn defects_vanish_at_second_order_on_a_smooth_path() {
    let (model, base) = lossless_static();
    let end = dispatch(&model, &base, &[0.4, -0.3]);
    let defect = |n: usize| {
        let assoc = trace_associated_path(&model, &base, &end, &AssociatedOptions::default());
        assert_eq!(assoc.status, AssociatedStatus::Reached);
        let samples: Vec<Vec<f64>> = assoc.nodes.iter().map(|p| p.z()).collect();
        let path = geomargin::manifold::resample(&model, &samples, n);
        let opts = TranscriptionOptions {
            intervals: n,
            ..TranscriptionOptions::default()
        };
        let problem = transcribe(&model, &base, TerminalCondition::EndPoint(path.endpoint()), &opts).unwrap();
        let c = problem.constraints(&problem.pack(&path, None));
        c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let (coarse, fine) = (defect(20), defect(40));
    assert!(coarse < 1e-2, "{coarse:e}");
    assert!(fine < coarse / 3.5, "{coarse:e} -> {fine:e}");
}

#[test]
fn straight_segment_length_is_exact() {
    let model = common::two_bus_model(0.01, 0.1, 50.0);
    let base = base_point(&model).unwrap();
    let (a, b) = ([-0.5, 0.0], [-1.1, -0.3]);
    let n = 17;
    let xs = (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect();
    let us = vec![vec![b[0] - a[0], b[1] - a[1]]; n + 1];
    let path = coordinate_path(&model, &base.y, xs, us);
    let l = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    assert!((path.arc_length - l).abs() < 1e-10);
}

#[test]
fn quarter_circle_length_converges_quadratically() {
    let model = common::two_bus_model(0.01, 0.1, 50.0);
    let base = base_point(&model).unwrap();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let err = |n: usize| {
        let theta = |k: usize| half_pi * k as f64 / n as f64;
        let xs = (0..=n).map(|k| vec![theta(k).cos(), theta(k).sin()]).collect();
        let us = (0..=n).map(|k| vec![-half_pi * theta(k).sin(), half_pi * theta(k).cos()]).collect();
        (coordinate_path(&model, &base.y, xs, us).arc_length - half_pi).abs()
    };
    for n in [10, 20, 40] {
        assert!(err(n) < 1.0 / (n * n) as f64, "N = {n}: {:e}", err(n));
    }
    let ratio = err(20) / err(40);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn lossless_geodesic_is_a_straight_segment() {
    let (model, base) = lossless_static();
    let a = dispatch(&model, &base, &[0.2, -0.1]);
    let b = dispatch(&model, &base, &[-0.3, 0.4]);
    let (path, r) = geodesic_between_points(&model, &a, &b, &options(20)).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let (za, zb) = (model.metric_output(&a.z()), model.metric_output(&b.z()));
    let d = norm2(&za.iter().zip(&zb).map(|(p, q)| p - q).collect::<Vec<_>>());
    assert!((r.arc_length - d).abs() < 1e-6, "{} vs {d}", r.arc_length);
    for k in 0..path.len() {
        let (loss, _) = model.active_power_loss(&path.z(k));
        assert!(loss.abs() < 1e-12, "node {k}: {loss:e}");
    }
}

#[test]
fn two_bus_geodesic_beats_random_paths() {
    let model = common::two_bus_model(0.02, 0.1, 50.0);
    let base = base_point(&model).unwrap();
    let solve_at = |x: [f64; 2]| newton_solve(&model, &x, &base.y, &NewtonOptions::default()).unwrap().point;
    let (a, b) = (solve_at([-0.5, 0.0]), solve_at([-1.0, -0.2]));
    let (_, geo) = geodesic_between_points(&model, &a, &b, &options(20)).unwrap();
    assert_eq!(geo.status, SolveStatus::Optimal);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let aopts = AssociatedOptions::default();
    let mut checked = 0;
    while checked < 100 {
        let via = solve_at([rng.random_range(-1.3..-0.3), rng.random_range(-0.5..0.3)]);
        let first = trace_associated_path(&model, &a, &via, &aopts);
        let second = trace_associated_path(&model, &via, &b, &aopts);
        if first.status != AssociatedStatus::Reached || second.status != AssociatedStatus::Reached {
            continue;
        }
        let mut samples: Vec<Vec<f64>> = first.nodes.iter().map(|p| p.z()).collect();
        samples.extend(second.nodes.iter().skip(1).map(|p| p.z()));
        let len = polyline_length(&model, &samples);
        assert!(geo.arc_length <= len + 1e-9, "geodesic {} > random {len}", geo.arc_length);
        checked += 1;
    }
}

#[test]
fn lossless_associated_length_equals_euclidean_distance() {
    let (model, base) = lossless_static();
    let seeds = generate_seeds(
        &model,
        &base,
        &SeedOptions {
            random_directions: 2,
            ..SeedOptions::default()
        },
    );
    let results = solve_multistart(&model, &base, &seeds, &EuclideanOptions::default());
    let mut compared = 0;
    for r in &results {
        let a = trace_associated_path(&model, &base, &r.endpoint, &AssociatedOptions::default());
        if a.status == AssociatedStatus::Reached {
            assert!((a.arc_length - r.distance).abs() < 1e-6, "{} vs {}", a.arc_length, r.distance);
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn dynamic_path_converges_under_refinement() {
    let (model, base) = common::study("case9mod1-dynamic");
    let seed = continuation_seed(&model, &base, &base_direction(&model, &base), 100).unwrap();
    let (_, r, history) =
        refine_mesh(&model, &base, TerminalCondition::SingularSurface, &seed, &options(100), 0.002, 200).unwrap();
    assert_eq!(history.len(), 2);
    assert!(history.iter().all(|h| h.status == SolveStatus::Optimal));
    let change = (history[1].arc_length - history[0].arc_length).abs() / history[0].arc_length;
    assert!(change < 0.002, "{history:?}");
    assert!(r.kkt_residual < 1e-6);
}

#[test]
fn arc_length_survives_regridding() {
    let (model, base) = common::study("case9mod2");
    let seed = continuation_seed(&model, &base, &base_direction(&model, &base), 30).unwrap();
    let (path, r) = solve_shortest_path(&model, &base, TerminalCondition::SingularSurface, &seed, &options(30)).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let fine = regrid(&model, &path, 77);
    let change = (fine.arc_length - r.arc_length).abs() / r.arc_length;
    assert!(change < 0.005, "{} vs {}", fine.arc_length, r.arc_length);
}

/// `x_m(1) = value`.
struct Plane {
    index: usize,
    value: f64,
    nz: usize,
}

impl TerminalManifold for Plane {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, z: &[f64], _w: &[f64]) -> Vec<f64> {
        vec![z[self.index] - self.value]
    }
    fn jacobian(&self, _z: &[f64], _w: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(1, 2 * self.nz);
        j[(0, self.index)] = 1.0;
        j
    }
    fn weighted_hessian(&self, _z: &[f64], _w: &[f64], _weights: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(2 * self.nz, 2 * self.nz)
    }
}

#[test]
fn custom_terminal_manifold_is_reached() {
    let (model, base) = lossless_static();
    let m = (0..model.n_x()).find(|&m| !model.is_dependent_x(m)).unwrap();
    let value = base.x[m] + 0.3;
    let plane = Plane {
        index: m,
        value,
        nz: model.n_z(),
    };
    let end = dispatch(&model, &base, &[0.3, 0.0]);
    let seed = geomargin::manifold::resample(&model, &[base.z(), end.z()], 20);
    let (path, r) =
        solve_shortest_path(&model, &base, TerminalCondition::CustomManifold(Arc::new(plane)), &seed, &options(20)).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((path.endpoint().x[m] - value).abs() < 1e-8);
    // Lossless balance: the other two generators each give up half the move.
    let expected = 0.3 * 1.5f64.sqrt();
    assert!((r.arc_length - expected).abs() < 1e-6, "{} vs {expected}", r.arc_length);
    assert!(r.max_manifold_residual < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]
    #[test]
    fn solved_paths_stay_on_the_manifold(angle in 0.0f64..std::f64::consts::TAU) {
        let (model, base) = common::study("case9mod2");
        let mut dir = base_direction(&model, &base);
        let free: Vec<usize> = (0..model.n_x()).filter(|&m| !model.is_dependent_x(m)).collect();
        dir[free[0]] += 0.5 * angle.cos();
        dir[free[1]] += 0.5 * angle.sin();
        let Ok(seed) = continuation_seed(&model, &base, &dir, 20) else { return Ok(()) };
        let (path, r) = solve_shortest_path(&model, &base, TerminalCondition::SingularSurface, &seed, &options(20)).unwrap();
        prop_assume!(r.status == SolveStatus::Optimal);
        prop_assert!(r.max_manifold_residual < 1e-6);
        prop_assert!(r.terminal_sigma_min < 1e-4);
        prop_assert!(r.null_residual < 1e-6);
        prop_assert!((r.r_norm.unwrap() - 1.0).abs() < 1e-8);
        prop_assert!(r.kkt_residual < 1e-6);
        prop_assert_eq!(path.z(0), base.z());
    }
}
