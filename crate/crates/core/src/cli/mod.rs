//! Configuration-driven front end: parse a JSON experiment spec, run its
//! seeded trials and write CSV, JSON and a manifest.
//!
//! See [`spec`] for the document grammar and [`output`] for the table schemas.

pub mod output;
mod run;
pub mod spec;

use std::path::PathBuf;

use serde_json::Value;

pub use run::{execute, run_spec, Artifacts, AssertionOutcome, CliError, RunSummary};
pub use spec::{parse_spec, parse_spec_value, Assertions, ExperimentKind, ExperimentSpec, ParameterRule, SpecErrors};

/// Command-line values that take precedence over the config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parses `text` as a spec of the given kind, applying `overrides` first.
///
/// A missing `kind` is filled in; a conflicting one is an error.
pub fn load_spec(text: &str, kind: ExperimentKind, overrides: &Overrides) -> Result<ExperimentSpec, SpecErrors> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| SpecErrors(vec![format!("malformed JSON: {e}")]))?;
    let Some(map) = value.as_object_mut() else {
        return Err(SpecErrors(vec!["spec must be a JSON object".into()]));
    };
    match map.get("kind").and_then(Value::as_str).map(ExperimentKind::parse) {
        Some(Some(k)) if k != kind => {
            return Err(SpecErrors(vec![format!(
                "kind: config is a {} spec but the {} command was used",
                k.as_str(),
                kind.as_str()
            )]))
        }
        Some(_) => {}
        None => {
            map.insert("kind".into(), kind.as_str().into());
        }
    }
    if let Some(seed) = overrides.seed {
        map.insert("seed".into(), seed.into());
    }
    if let Some(w) = overrides.workers {
        map.insert("workers".into(), w.into());
    }
    if let Some(out) = &overrides.out {
        map.insert("out".into(), out.to_string_lossy().into_owned().into());
    }
    parse_spec_value(&value)
}
