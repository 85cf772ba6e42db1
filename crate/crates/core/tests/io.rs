mod common;

use geomargin::euclidean::{generate_seeds, solve_multistart, EuclideanOptions, SeedOptions};
use geomargin::grid::builtin::BUILTIN_NAMES;
use geomargin::io::{
    emit_svg, load_case, options_hash, parse_case, reports_to_csv, CaseError, MarginReport, Method, Projection,
    Provenance, SvgPath,
};
use geomargin::manifold::{continuation_seed, solve_shortest_path, PathSolveOptions, TerminalCondition};
use geomargin::powerflow::base_direction;
use serde_json::Value;

const TWO_BUS: &str = r#"{
  "name": "two-bus",
  "base_mva": 100.0,
  "zip": {
    "z_fraction": 0.25,
    "p_fraction": 0.75
  },
  "buses": [
    {
      "id": 1,
      "kind": "slack",
      "p_mw": 0.0,
      "q_mvar": 0.0,
      "v_setpoint": 1.02
    },
    {
      "id": 2,
      "kind": "pq",
      "p_mw": -80.5,
      "q_mvar": -12.125
    }
  ],
  "branches": [
    {
      "from": 1,
      "to": 2,
      "r": 0.013,
      "x": 0.0917,
      "b": 0.0211
    }
  ],
  "study": {
    "kind": "static_dispatch",
    "adjustable_buses": [
      {
        "bus": 2,
        "quantity": "p"
      }
    ],
    "metric": "adjustable"
  }
}
"#;

fn schema(name: &str) -> jsonschema::Validator {
    let path = format!("{}/../../schemas/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn handwritten_case_round_trips_byte_for_byte() {
    let loaded = parse_case(TWO_BUS.as_bytes()).unwrap();
    assert_eq!(loaded.file.to_json(), TWO_BUS);
    assert_eq!(loaded.model.n_x(), 1);
    assert_eq!(loaded.model.x_labels, vec!["P2".to_string()]);
}

#[test]
fn unknown_bus_points_at_the_branch_end() {
    let bad = TWO_BUS.replace("\"to\": 2", "\"to\": 7");
    let err = parse_case(bad.as_bytes()).unwrap_err();
    assert_eq!(err.pointer(), Some("/branches/0/to"), "{err}");
}

#[test]
fn type_errors_point_at_the_field() {
    let bad = TWO_BUS.replace("\"p_mw\": -80.5", "\"p_mw\": \"heavy\"");
    let err = parse_case(bad.as_bytes()).unwrap_err();
    assert_eq!(err.pointer(), Some("/buses/1/p_mw"), "{err}");
    let bad = TWO_BUS.replace("\"kind\": \"pq\"", "\"kind\": \"pv2\"");
    assert_eq!(parse_case(bad.as_bytes()).unwrap_err().pointer(), Some("/buses/1/kind"));
}

#[test]
fn unknown_fields_are_rejected() {
    let bad = TWO_BUS.replacen("\"name\"", "\"colour\": 1,\n  \"name\"", 1);
    assert!(matches!(parse_case(bad.as_bytes()), Err(CaseError::Schema { .. })));
}

#[test]
fn missing_file_and_unknown_builtin() {
    assert!(matches!(load_case("case118"), Err(CaseError::UnknownBuiltin(_))));
    assert!(matches!(load_case("/nonexistent/case.json"), Err(CaseError::Io { .. })));
}

#[test]
fn cases_conform_to_the_case_schema() {
    let v = schema("case.schema.json");
    assert_valid(&v, &serde_json::from_str(TWO_BUS).unwrap());
    for name in BUILTIN_NAMES {
        let text = load_case(name).unwrap().file.to_json();
        assert_valid(&v, &serde_json::from_str(&text).unwrap());
    }
    let bad: Value = serde_json::from_str(&TWO_BUS.replace("\"slack\"", "\"swing\"")).unwrap();
    assert!(!v.is_valid(&bad));
}

fn provenance() -> Provenance {
    Provenance {
        case: "case9mod2".into(),
        options_hash: options_hash(&serde_json::json!({ "nodes": 20 })),
        seed: Some(7),
    }
}

#[test]
fn reports_conform_to_the_report_schema() {
    let (model, base) = common::study("case9mod2");
    let mut reports = Vec::new();
    let seeds = generate_seeds(
        &model,
        &base,
        &SeedOptions {
            random_directions: 1,
            ..SeedOptions::default()
        },
    );
    for r in solve_multistart(&model, &base, &seeds, &EuclideanOptions::default()).iter().take(3) {
        reports.push(MarginReport::from_euclidean(&model, r, provenance()));
        if let Some(a) = &r.associated {
            reports.extend(MarginReport::from_associated(&model, a, provenance()));
        }
    }
    let mut opts = PathSolveOptions::default();
    opts.transcription.intervals = 20;
    let seed = continuation_seed(&model, &base, &base_direction(&model, &base), 20).unwrap();
    let (_, m) = solve_shortest_path(&model, &base, TerminalCondition::SingularSurface, &seed, &opts).unwrap();
    reports.push(MarginReport::from_margin(&model, Method::Manifold, &m, provenance()));

    let v = schema("margin_report.schema.json");
    for r in &reports {
        r.validate().unwrap();
        assert_valid(&v, &serde_json::to_value(r).unwrap());
        let back: MarginReport = serde_json::from_str(&serde_json::to_string(r).unwrap()).unwrap();
        assert_eq!(&back, r);
    }
    assert!(reports.iter().any(|r| r.method == Method::Associated));

    let csv = reports_to_csv(&model, &reports);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), reports.len() + 1);
    let width = lines[0].split(',').count();
    assert_eq!(width, 7 + model.metric.len());
    assert!(lines.iter().all(|l| l.split(',').count() == width));
}

#[test]
fn options_hash_ignores_key_order() {
    let a: Value = serde_json::from_str(r#"{"nodes": 50, "objective": "energy"}"#).unwrap();
    let b: Value = serde_json::from_str(r#"{"objective": "energy", "nodes": 50}"#).unwrap();
    assert_eq!(options_hash(&a), options_hash(&b));
    assert_ne!(options_hash(&a), options_hash(&serde_json::json!({"nodes": 51, "objective": "energy"})));
    assert_eq!(options_hash(&a).len(), 64);
}

#[test]
fn svg_is_well_formed() {
    let paths = vec![
        SvgPath {
            label: "a < b".into(),
            color: "red".into(),
            points: vec![vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 0.5]],
            singular_end: true,
        },
        SvgPath {
            label: "straight".into(),
            color: "black".into(),
            points: vec![vec![0.0, 0.0, 0.0], vec![2.0, 1.0, 0.5]],
            singular_end: false,
        },
    ];
    for projection in [Projection::Plane(0, 1), Projection::Oblique(0, 1, 2)] {
        let svg = emit_svg(&paths, Some(&[0.0, 0.0, 0.0]), projection, ["P10", "P11"]);
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("a &lt; b"));
        assert!(!svg.contains("NaN"));
    }
}
