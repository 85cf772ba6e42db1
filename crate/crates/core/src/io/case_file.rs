use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::builtin::{builtin, BUILTIN_NAMES};
use crate::grid::{BranchSpec, BusSpec, GridCase, GridError, StudyModel, StudySpec, ZipNominal, ZipSplit};

/// On-disk case: network data plus the study layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub name: String,
    pub base_mva: f64,
    pub zip: ZipSplit,
    #[serde(default, skip_serializing_if = "is_flat")]
    pub zip_nominal: ZipNominal,
    pub buses: Vec<BusSpec>,
    pub branches: Vec<BranchSpec>,
    pub study: StudySpec,
}

fn is_flat(n: &ZipNominal) -> bool {
    *n == ZipNominal::Flat
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("case file is not UTF-8")]
    Utf8,
    #[error("schema violation at '{pointer}': {message}")]
    Schema { pointer: String, message: String },
    #[error("unknown builtin case '{0}' (known: {known})", known = BUILTIN_NAMES.join(", "))]
    UnknownBuiltin(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CaseError {
    /// JSON pointer of the offending value, if any.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            CaseError::Schema { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

/// A validated case with its study model.
#[derive(Debug, Clone)]
pub struct LoadedCase {
    pub file: CaseFile,
    pub case: GridCase,
    pub model: StudyModel,
}

impl CaseFile {
    pub fn from_parts(case: &GridCase, study: &StudySpec) -> Self {
        Self {
            name: case.name.clone(),
            base_mva: case.base_mva,
            zip: case.zip,
            zip_nominal: case.zip_nominal,
            buses: case.buses.clone(),
            branches: case.branches.clone(),
            study: study.clone(),
        }
    }

    pub fn grid_case(&self) -> GridCase {
        GridCase {
            name: self.name.clone(),
            base_mva: self.base_mva,
            buses: self.buses.clone(),
            branches: self.branches.clone(),
            zip: self.zip,
            zip_nominal: self.zip_nominal,
        }
    }

    /// Pretty JSON with a trailing newline; `parse_case` reads it back to an
    /// identical value.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("case serializes");
        s.push('\n');
        s
    }

    pub fn load(self) -> Result<LoadedCase, CaseError> {
        let case = self.grid_case();
        case.validate().map_err(|e| self.locate(e))?;
        let model = self.study.build(&case).map_err(|e| CaseError::Schema {
            pointer: "/study".into(),
            message: e.to_string(),
        })?;
        Ok(LoadedCase { file: self, case, model })
    }

    fn locate(&self, err: GridError) -> CaseError {
        let pointer = match &err {
            GridError::UnknownBus(id) => self
                .branches
                .iter()
                .enumerate()
                .find_map(|(k, b)| {
                    if b.from == *id {
                        Some(format!("/branches/{k}/from"))
                    } else if b.to == *id {
                        Some(format!("/branches/{k}/to"))
                    } else {
                        None
                    }
                })
                .unwrap_or_default(),
            GridError::Disconnected => "/branches".into(),
            GridError::Invalid(msg) if msg.starts_with("zip") => "/zip".into(),
            GridError::Invalid(msg) if msg.starts_with("base_mva") => "/base_mva".into(),
            GridError::Invalid(msg) if msg.starts_with("branch") => "/branches".into(),
            GridError::Invalid(_) => "/buses".into(),
        };
        CaseError::Schema {
            pointer,
            message: err.to_string(),
        }
    }
}

/// Parses and validates a JSON case document.
pub fn parse_case(bytes: &[u8]) -> Result<LoadedCase, CaseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CaseError::Utf8)?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: CaseFile = serde_path_to_error::deserialize(de).map_err(|e| CaseError::Schema {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    file.load()
}

/// Resolves a builtin name, or reads a JSON case from a path.
pub fn load_case(name_or_path: &str) -> Result<LoadedCase, CaseError> {
    if let Ok((case, study)) = builtin(name_or_path) {
        return CaseFile::from_parts(&case, &study).load();
    }
    let path = std::path::Path::new(name_or_path);
    if !path.exists() && !name_or_path.ends_with(".json") {
        return Err(CaseError::UnknownBuiltin(name_or_path.into()));
    }
    let bytes = std::fs::read(path).map_err(|source| CaseError::Io {
        path: name_or_path.into(),
        source,
    })?;
    parse_case(&bytes)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_loads() {
        for name in BUILTIN_NAMES {
            let loaded = load_case(name).unwrap();
            assert_eq!(loaded.case.name, name);
        }
    }

    #[test]
    fn builtin_round_trips() {
        for name in BUILTIN_NAMES {
            let text = load_case(name).unwrap().file.to_json();
            let again = parse_case(text.as_bytes()).unwrap().file.to_json();
            assert_eq!(text, again);
        }
    }

    #[test]
    fn unknown_name_is_reported() {
        assert!(matches!(load_case("case7"), Err(CaseError::UnknownBuiltin(_))));
    }
}
