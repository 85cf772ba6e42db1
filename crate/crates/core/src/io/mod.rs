//! Case files, result reports and plots.

mod case_file;
mod report;
mod svg;

pub use case_file::{load_case, parse_case, CaseError, CaseFile, LoadedCase};
pub use report::{
    options_hash, reports_to_csv, Diagnostics, Endpoint, MarginReport, Method, Provenance, ReportError,
    REPORT_SCHEMA_VERSION,
};
pub use svg::{emit_svg, Projection, SvgPath};
