//! Benchmark dataset loaders.
//!
//! Two layouts: one directory per design (description, testbench, and
//! an optional meta file with the module interface), or a JSONL file
//! whose per-record testbenches get materialized to disk. Loaders
//! consume user-supplied copies; no dataset is redistributed here.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_design_spec, DesignSpec, PortDecl, PpaConstraints};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    DesignDirs,
    Jsonl,
}

/// Where a dataset lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub kind: DatasetKind,
    pub root: PathBuf,
    /// design_dirs: file names inside each design directory.
    #[serde(default = "default_description_file")]
    pub description_file: String,
    #[serde(default = "default_testbench_file")]
    pub testbench_file: String,
    /// Optional per-design interface file (module name, ports, bounds).
    #[serde(default = "default_meta_file")]
    pub meta_file: String,
    /// jsonl: field names for the prompt, the testbench text, and the id.
    #[serde(default = "default_prompt_field")]
    pub prompt_field: String,
    #[serde(default = "default_test_field")]
    pub test_field: String,
    #[serde(default = "default_id_field")]
    pub id_field: String,
    /// Name of the workbench parser rule set this dataset's testbenches
    /// follow; resolved against the named rule sets in the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parser_rules: Option<String>,
}

fn default_description_file() -> String {
    "description.txt".to_string()
}
fn default_testbench_file() -> String {
    "testbench.v".to_string()
}
fn default_meta_file() -> String {
    "meta.json".to_string()
}
fn default_prompt_field() -> String {
    "prompt".to_string()
}
fn default_test_field() -> String {
    "test".to_string()
}
fn default_id_field() -> String {
    "task_id".to_string()
}

impl DatasetDescriptor {
    pub fn design_dirs(root: impl Into<PathBuf>) -> Self {
        Self {
            kind: DatasetKind::DesignDirs,
            root: root.into(),
            description_file: default_description_file(),
            testbench_file: default_testbench_file(),
            meta_file: default_meta_file(),
            prompt_field: default_prompt_field(),
            test_field: default_test_field(),
            id_field: default_id_field(),
            parser_rules: None,
        }
    }

    pub fn jsonl(root: impl Into<PathBuf>) -> Self {
        Self {
            kind: DatasetKind::Jsonl,
            ..Self::design_dirs(root)
        }
    }
}

/// Per-design sidecar with the module interface the descriptions
/// describe in prose.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DesignMeta {
    #[serde(default)]
    pub module_name: Option<String>,
    #[serde(default)]
    pub ports: Vec<PortDecl>,
    #[serde(default)]
    pub ppa_constraints: Option<PpaConstraints>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset root does not exist: {0}")]
    RootMissing(PathBuf),
    #[error("dataset entry {entry}: {message}")]
    BadEntry { entry: String, message: String },
    #[error("dataset is empty: {0}")]
    Empty(PathBuf),
    #[error("duplicate design_id {0:?}")]
    DuplicateId(String),
    #[error("dataset io: {0}")]
    Io(String),
}

/// A loaded dataset plus the entries skipped under `--skip-bad`.
#[derive(Debug)]
pub struct LoadedDataset {
    pub specs: Vec<DesignSpec>,
    pub skipped: Vec<(String, String)>,
}

/// Loads a dataset. Malformed entries fail the whole load unless
/// `skip_bad`, in which case they are recorded and the rest proceed.
/// JSONL testbenches are materialized under `materialize_dir`.
pub fn load_dataset(
    desc: &DatasetDescriptor,
    materialize_dir: &Path,
    skip_bad: bool,
) -> Result<LoadedDataset, DatasetError> {
    if !desc.root.exists() {
        return Err(DatasetError::RootMissing(desc.root.clone()));
    }
    let mut specs = Vec::new();
    let mut skipped = Vec::new();
    let mut push = |entry: String, result: Result<DesignSpec, String>| match result {
        Ok(spec) => {
            specs.push(spec);
            Ok(())
        }
        Err(message) if skip_bad => {
            skipped.push((entry, message));
            Ok(())
        }
        Err(message) => Err(DatasetError::BadEntry { entry, message }),
    };

    match desc.kind {
        DatasetKind::DesignDirs => {
            let mut dirs: Vec<PathBuf> = std::fs::read_dir(&desc.root)
                .map_err(|e| DatasetError::Io(e.to_string()))?
                .flatten()
                .map(|e| e.path())
                .filter(|p| p.is_dir())
                .collect();
            dirs.sort();
            for dir in dirs {
                let entry = dir.file_name().unwrap().to_string_lossy().to_string();
                push(entry.clone(), load_design_dir(desc, &dir, &entry))?;
            }
        }
        DatasetKind::Jsonl => {
            let text = std::fs::read_to_string(&desc.root)
                .map_err(|e| DatasetError::Io(format!("{}: {e}", desc.root.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry = format!("{}:{}", desc.root.display(), lineno + 1);
                push(
                    entry.clone(),
                    load_jsonl_record(desc, line, materialize_dir, lineno),
                )?;
            }
        }
    }

    if specs.is_empty() {
        return Err(DatasetError::Empty(desc.root.clone()));
    }
    let mut seen = BTreeSet::new();
    for spec in &specs {
        if !seen.insert(spec.design_id.clone()) {
            return Err(DatasetError::DuplicateId(spec.design_id.clone()));
        }
    }
    Ok(LoadedDataset { specs, skipped })
}

fn load_design_dir(
    desc: &DatasetDescriptor,
    dir: &Path,
    entry: &str,
) -> Result<DesignSpec, String> {
    let description_path = dir.join(&desc.description_file);
    let testbench_path = dir.join(&desc.testbench_file);
    let description = std::fs::read_to_string(&description_path)
        .map_err(|e| format!("missing {}: {e}", desc.description_file))?;
    if !testbench_path.is_file() {
        return Err(format!("missing testbench file {}", desc.testbench_file));
    }
    let meta: DesignMeta = match std::fs::read_to_string(dir.join(&desc.meta_file)) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| format!("bad meta: {e}"))?,
        Err(_) => DesignMeta::default(),
    };
    let spec = DesignSpec {
        design_id: entry.to_string(),
        module_name: meta
            .module_name
            .or_else(|| infer_module_name(&description))
            .unwrap_or_else(|| entry.to_string()),
        description,
        ports: meta.ports,
        testbench_path,
        ppa_constraints: meta.ppa_constraints,
    };
    let violations = validate_design_spec(&spec);
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(violations.join("; "))
    }
}

fn load_jsonl_record(
    desc: &DatasetDescriptor,
    line: &str,
    materialize_dir: &Path,
    lineno: usize,
) -> Result<DesignSpec, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("bad json: {e}"))?;
    let field = |name: &str| {
        value
            .get(name)
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| format!("missing field {name:?}"))
    };
    let design_id = sanitize_id(&field(&desc.id_field).unwrap_or(format!("line_{}", lineno + 1)));
    let description = field(&desc.prompt_field)?;
    let test = field(&desc.test_field)?;

    std::fs::create_dir_all(materialize_dir).map_err(|e| e.to_string())?;
    let testbench_path = materialize_dir.join(format!("{design_id}_tb.v"));
    std::fs::write(&testbench_path, &test).map_err(|e| e.to_string())?;

    let spec = DesignSpec {
        module_name: value
            .get("module_name")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .or_else(|| infer_module_name(&description))
            .unwrap_or_else(|| design_id.clone()),
        design_id,
        description,
        ports: Vec::new(),
        testbench_path,
        ppa_constraints: None,
    };
    let violations = validate_design_spec(&spec);
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(violations.join("; "))
    }
}

static MODULE_NAME: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)").unwrap());

/// First module name mentioned in a prose description, when any.
fn infer_module_name(description: &str) -> Option<String> {
    MODULE_NAME.captures(description).map(|c| c[1].to_string())
}

fn sanitize_id(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
