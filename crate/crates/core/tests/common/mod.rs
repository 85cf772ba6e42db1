#![allow(dead_code)]

pub mod problems;

use geomargin::grid::builtin::builtin;
use geomargin::grid::{Adjustable, BranchSpec, BusKind, BusSpec, GridCase, MetricSpec, ModelKind, OperatingPoint, StudyModel, StudySpec, ZipNominal, ZipSplit};
use geomargin::powerflow::base_point;

pub fn study(name: &str) -> (StudyModel, OperatingPoint) {
    let (case, spec) = builtin(name).unwrap();
    let model = spec.build(&case).unwrap();
    let base = base_point(&model).unwrap();
    (model, base)
}

/// Slack bus 1 at 1.0 pu feeding bus 2 (load `p_mw`, `q_mvar`) over one line.
pub fn two_bus_case(r: f64, x: f64, p_mw: f64, q_mvar: f64) -> GridCase {
    GridCase {
        name: "two-bus".into(),
        base_mva: 100.0,
        buses: vec![
            BusSpec {
                id: 1,
                kind: BusKind::Slack,
                p_inject: 0.0,
                q_inject: 0.0,
                v_setpoint: Some(1.0),
            },
            BusSpec {
                id: 2,
                kind: BusKind::Pq,
                p_inject: -p_mw,
                q_inject: -q_mvar,
                v_setpoint: None,
            },
        ],
        branches: vec![BranchSpec::line(1, 2, r, x, 0.0)],
        zip: ZipSplit::CONSTANT_POWER,
        zip_nominal: ZipNominal::Flat,
    }
}

/// Two-bus study with the load active and reactive power as coordinates.
pub fn two_bus_model(r: f64, x: f64, p_mw: f64) -> StudyModel {
    let spec = StudySpec {
        kind: ModelKind::StaticDispatch,
        adjustable_buses: Some(vec![Adjustable::p(2), Adjustable::q(2)]),
        metric: MetricSpec::Adjustable,
    };
    spec.build(&two_bus_case(r, x, p_mw, 0.0)).unwrap()
}

pub fn index_of(labels: &[String], name: &str) -> usize {
    labels.iter().position(|l| l == name).unwrap_or_else(|| panic!("no label {name}"))
}

/// Central finite differences of `f` at `z`, one column per coordinate.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, z: &[f64], h: f64) -> Vec<Vec<f64>> {
    let m = f(z).len();
    let mut cols = vec![vec![0.0; z.len()]; m];
    for j in 0..z.len() {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[j] += h;
        zm[j] -= h;
        let (fp, fm) = (f(&zp), f(&zm));
        for i in 0..m {
            cols[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    cols
}

/// Largest entry error relative to `max(1, |fd|)`.
pub fn max_rel_error(analytic: &nalgebra::DMatrix<f64>, fd: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in fd.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            worst = worst.max((analytic[(i, j)] - v).abs() / v.abs().max(1.0));
        }
    }
    worst
}
