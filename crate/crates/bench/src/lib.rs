//! Fixtures shared by the benchmarks.

use geomargin::grid::builtin::builtin;
use geomargin::grid::{OperatingPoint, StudyModel};
use geomargin::powerflow::base_point;

/// Study model of a builtin case with its base operating point.
pub fn fixture(name: &str) -> (StudyModel, OperatingPoint) {
    let (case, spec) = builtin(name).expect("builtin case");
    let model = spec.build(&case).expect("valid study");
    let base = base_point(&model).expect("base case converges");
    (model, base)
}
