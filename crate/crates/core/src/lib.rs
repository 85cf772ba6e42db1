//! Voltage-collapse margins measured along the power-flow manifold.

pub mod grid;
pub mod linalg;
pub mod powerflow;
pub mod singularity;
pub mod nlp;
pub mod euclidean;
pub mod manifold;
pub mod io;

pub use grid::{GridCase, OperatingPoint, StudyModel, ZipSplit};
pub use io::{MarginReport, Method, Provenance};
pub use manifold::DiscretizedPath;
pub use singularity::SurfaceClass;
