mod common;

use common::*;
use geomargin::powerflow::{
    base_direction, continuation_trace, newton_solve, ContinuationOptions, NewtonOptions, TraceEnd,
};
use geomargin::singularity::{classify_endpoint_surface, diagnose_at, nose_point_count, SurfaceClass};

#[test]
fn flat_start_reaches_high_voltage_solution() {
    let (model, base) = study("case9mod1-static");
    let sol = newton_solve(&model, &base.x, &model.flat_start(), &NewtonOptions::default()).unwrap();
    let v = model.bus_voltages(&sol.point.z());
    assert!(v.iter().all(|v| v.norm() > 0.9), "{v:?}");
    assert!((v[9].norm() - 1.0388).abs() < 1e-9);
}

#[test]
fn start_at_solution_takes_no_iterations() {
    let (model, base) = study("case9mod2");
    let sol = newton_solve(&model, &base.x, &base.y, &NewtonOptions::default()).unwrap();
    assert_eq!(sol.iterations, 0);
}

#[test]
fn two_bus_voltage_matches_closed_form() {
    // Lossless line X = 1 with a unity power factor load p: |V|^2 = (1 + sqrt(1 - 4 p^2)) / 2.
    for p in [0.1, 0.3, 0.45] {
        let model = two_bus_model(0.0, 1.0, 100.0 * p);
        let sol = newton_solve(&model, &[-p, 0.0], &model.flat_start(), &NewtonOptions::default()).unwrap();
        let v = model.bus_voltages(&sol.point.z())[1].norm();
        let exact = ((1.0 + (1.0 - 4.0 * p * p).sqrt()) / 2.0).sqrt();
        assert!((v - exact).abs() < 1e-10, "p={p}: {v} vs {exact}");
    }
}

#[test]
fn two_bus_nose_at_maximum_transfer() {
    let model = two_bus_model(0.0, 1.0, 20.0);
    let base = geomargin::powerflow::base_point(&model).unwrap();
    let trace = continuation_trace(&model, &base, &[-1.0, 0.0], &ContinuationOptions::default()).unwrap();
    assert_eq!(trace.end, TraceEnd::NoseLimit);
    let nose = &trace.last().point;
    assert!((nose.x[0] + 0.5).abs() < 1e-4, "{:?}", nose.x);
    assert!(diagnose_at(&model, &nose.z()).sigma_min < 1e-4);
}

#[test]
fn zero_direction_is_stationary() {
    let (model, base) = study("case9mod1-static");
    let trace = continuation_trace(&model, &base, &[0.0; 3], &ContinuationOptions::default()).unwrap();
    assert_eq!(trace.nodes.len(), 1);
    assert_eq!(trace.end, TraceEnd::Stationary);
}

#[test]
fn base_ray_ends_on_outer_surface() {
    let (model, base) = study("case9mod1-static");
    let dir = base_direction(&model, &base);
    let trace = continuation_trace(&model, &base, &dir, &ContinuationOptions::default()).unwrap();
    assert_eq!(trace.end, TraceEnd::NoseLimit);
    let end = trace.last().point.z();
    assert!(diagnose_at(&model, &end).sigma_min < 1e-4);
    let points = trace.points();
    let interior = nose_point_count(&model, &points[..points.len() - 1], 1e-6).unwrap();
    assert_eq!(interior.count, 0);
    let (class, count) = classify_endpoint_surface(&model, &end, &points, 1e-6).unwrap();
    assert_eq!(count.count, 1);
    assert_eq!(class, SurfaceClass::CorrectSurface);
}

#[test]
fn trace_through_two_noses_is_wrong_surface() {
    let (model, base) = study("case9mod1-static");
    let dir = base_direction(&model, &base);
    let opts = ContinuationOptions {
        stop_after_noses: Some(2),
        ..ContinuationOptions::default()
    };
    let trace = continuation_trace(&model, &base, &dir, &opts).unwrap();
    assert_eq!(trace.nose_events.len(), 2);
    let points = trace.points();
    let (class, count) = classify_endpoint_surface(&model, points.last().unwrap(), &points, 1e-6).unwrap();
    assert!(count.count >= 2);
    assert_eq!(class, SurfaceClass::WrongSurface);
}

#[test]
fn every_trace_node_is_on_the_manifold() {
    let (model, base) = study("case9mod2");
    let dir = base_direction(&model, &base);
    let trace = continuation_trace(&model, &base, &dir, &ContinuationOptions::default()).unwrap();
    for node in &trace.nodes {
        assert!(geomargin::linalg::norm_inf(&model.residual(&node.point.z())) < 1e-8);
    }
}
