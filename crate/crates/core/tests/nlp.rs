mod common;

use geomargin::manifold::{continuation_seed, transcribe, PathObjective, TerminalCondition, TranscriptionOptions};
use geomargin::nlp::{check_derivatives, check_hessian, solve, HessianMode, IpmOptions, NlpProblem, SolveStatus};
use geomargin::powerflow::base_direction;
use common::problems::{Circle, Faulty, Pinned, Qp};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn circle_minimum() {
    let target = -std::f64::consts::FRAC_1_SQRT_2;
    for hessian in [HessianMode::Exact, HessianMode::Bfgs] {
        let opts = IpmOptions {
            hessian,
            ..IpmOptions::default()
        };
        let rep = solve(&Circle, &[-0.9, -0.1], &opts);
        assert_eq!(rep.status, SolveStatus::Optimal, "{hessian:?}");
        for w in &rep.solution {
            assert!((w - target).abs() < 1e-8, "{hessian:?}: {:?}", rep.solution);
        }
        // Stationarity 1 + 2 lambda w = 0.
        assert!((rep.multipliers[0] - 1.0 / (2.0 * -target)).abs() < 1e-6);
    }
}

#[test]
fn linear_constraint_multiplier() {
    let rep = solve(&Pinned, &[-3.0], &IpmOptions::default());
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.solution[0] - 2.0).abs() < 1e-8);
    assert!((rep.multipliers[0] + 2.0).abs() < 1e-8, "{:?}", rep.multipliers);
}

/// min (w - 2)^2  s.t.  w <= 1, no equality constraints.
struct Boxed;

impl NlpProblem for Boxed {
    fn num_variables(&self) -> usize {
        1
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY], vec![1.0])
    }
    fn objective(&self, w: &[f64]) -> f64 {
        (w[0] - 2.0).powi(2)
    }
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        vec![2.0 * (w[0] - 2.0)]
    }
    fn constraints(&self, _w: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn jacobian(&self, _w: &[f64]) -> Vec<(usize, usize, f64)> {
        Vec::new()
    }
    fn hessian(&self, _w: &[f64], obj_factor: f64, _lambda: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        Some(vec![(0, 0, 2.0 * obj_factor)])
    }
}

#[test]
fn active_upper_bound() {
    let rep = solve(&Boxed, &[0.0], &IpmOptions::default());
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!((rep.solution[0] - 1.0).abs() < 1e-6, "{:?}", rep.solution);
}

#[test]
fn random_qp_matches_kkt_solve() {
    let qp = Qp::random(50, 20, 11);
    let (w_ref, lambda_ref) = qp.kkt_solution();
    let rep = solve(&qp, &vec![0.0; 50], &IpmOptions::default());
    assert_eq!(rep.status, SolveStatus::Optimal);
    let dw = (DVector::from_column_slice(&rep.solution) - &w_ref).amax();
    let dl = (DVector::from_column_slice(&rep.multipliers) - &lambda_ref).amax();
    assert!(dw < 1e-8, "solution error {dw:e}");
    assert!(dl < 1e-8, "multiplier error {dl:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn small_qps_match_kkt_solve(seed in any::<u64>(), n in 3usize..12, m in 1usize..3) {
        let qp = Qp::random(n, m, seed);
        let (w_ref, _) = qp.kkt_solution();
        let rep = solve(&qp, &vec![0.0; n], &IpmOptions::default());
        prop_assert_eq!(rep.status, SolveStatus::Optimal);
        let dw = (DVector::from_column_slice(&rep.solution) - &w_ref).amax();
        prop_assert!(dw < 1e-7, "solution error {:e}", dw);
    }
}

fn transcribed_point(objective: PathObjective) -> (geomargin::grid::StudyModel, geomargin::grid::OperatingPoint, geomargin::manifold::DiscretizedPath, TranscriptionOptions) {
    let (model, base) = common::study("case9mod1-static");
    let opts = TranscriptionOptions {
        intervals: 12,
        objective,
        ..TranscriptionOptions::default()
    };
    let seed = continuation_seed(&model, &base, &base_direction(&model, &base), opts.intervals).unwrap();
    (model, base, seed, opts)
}

fn jitter(w: &mut [f64], scale: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    w.iter_mut().for_each(|v| *v += scale * rng.random_range(-1.0..1.0));
}

#[test]
fn transcribed_derivatives_agree_with_finite_differences() {
    for objective in [PathObjective::Energy, PathObjective::SmoothedArcLength] {
        let (model, base, seed, opts) = transcribed_point(objective);
        let problem = transcribe(&model, &base, TerminalCondition::SingularSurface, &opts).unwrap();
        let mut w = problem.pack(&seed, seed.r_terminal.as_deref());
        jitter(&mut w, 1e-3, 5);
        let rep = check_derivatives(&problem, &w, 1e-6);
        assert!(rep.max_error() < 1e-5, "{objective:?}: {rep:?}");
        assert!(rep.flagged.is_empty());
        if objective == PathObjective::Energy {
            let lambda: Vec<f64> = (0..problem.num_constraints()).map(|i| ((i % 7) as f64 - 3.0) * 0.1).collect();
            let (err, at) = check_hessian(&problem, &w, 0.7, &lambda, 1e-5).unwrap();
            assert!(err < 1e-5, "hessian error {err:e} at {at:?}");
        }
    }
}

#[test]
fn injected_fault_in_transcription_is_flagged() {
    let (model, base, seed, opts) = transcribed_point(PathObjective::Energy);
    let problem = transcribe(&model, &base, TerminalCondition::SingularSurface, &opts).unwrap();
    let w = problem.pack(&seed, seed.r_terminal.as_deref());
    let entry = (problem.num_constraints() / 2, problem.num_variables() / 3);
    let rep = check_derivatives(&Faulty { inner: &problem, entry }, &w, 1e-6);
    assert_eq!(rep.jacobian_worst, Some(entry));
    assert!(rep.flagged.iter().any(|f| f.row == Some(entry.0) && f.col == entry.1));
}
