//! Shortest paths on the power-flow manifold by direct collocation.

pub mod associated;
mod multistart;
mod path;
mod solve;
mod transcribe;

pub use associated::{polyline_length, trace_associated_path, AssociatedOptions, AssociatedPath, AssociatedStatus};
pub use multistart::{seed_paths, solve_from_seeds};
pub use path::{arc_length, regrid, resample, trapezoid, DiscretizedPath};
pub use solve::{
    continuation_seed, decision_count, geodesic_between_points, refine_mesh, samples_seed,
    solve_shortest_path, MarginResult, PathError, PathSolveOptions, RefinementStep,
};
pub use transcribe::{
    transcribe, PathObjective, PathProblem, Scheme, TerminalCondition, TerminalManifold,
    TranscriptionError, TranscriptionOptions,
};
