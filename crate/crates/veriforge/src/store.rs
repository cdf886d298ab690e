//! The persistent run store: every pipeline decision lands on disk in a
//! fixed layout so runs are auditable, resumable, and re-renderable.
//!
//! Layout per run:
//!
//! ```text
//! <root>/<run_id>/manifest.json
//! <root>/<run_id>/designs/<design_id>/attempt_<n>/round_<i>/{prompt.txt, response.txt, source.v, diagnostics.json}
//! <root>/<run_id>/designs/<design_id>/attempt_<n>/ppa/{sdc/, reports…, ppa_round_<m>.json}
//! <root>/<run_id>/designs/<design_id>/attempt_<n>/record.json
//! <root>/<run_id>/scoreboard.json
//! ```
//!
//! `record.json` is the per-attempt commit point: an attempt directory
//! without one is incomplete and gets redone on resume. Manifest and
//! scoreboard writes are atomic (write-temp-then-rename).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use once_cell::sync::Lazy;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::ScoreBoard;
use crate::model::{write_json_atomic, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Aborted,
}

/// Frozen description of one run: the fully-resolved config snapshot,
/// the dataset it ran over, and the probed tool versions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: RunStatus,
    pub created_unix: u64,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<serde_json::Value>,
    #[serde(default)]
    pub tool_versions: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store root unwritable: {path}: {source}")]
    RootUnwritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown run_id {0:?}")]
    UnknownRun(String),
    #[error("run {run_id}: {context}: {source}")]
    Io {
        run_id: String,
        context: String,
        source: std::io::Error,
    },
    #[error("run {run_id}: manifest unreadable: {message}")]
    BadManifest { run_id: String, message: String },
}

/// A store root containing zero or more runs.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates a new run directory with a running manifest. A caller
    /// may pin `run_id` (tests, resume-by-name); the default is
    /// timestamp plus a random suffix, unique within the root.
    pub fn create_run(
        &self,
        run_id: Option<String>,
        config: serde_json::Value,
        dataset: Option<serde_json::Value>,
        tool_versions: BTreeMap<String, String>,
    ) -> Result<RunDir, StoreError> {
        std::fs::create_dir_all(&self.root).map_err(|e| StoreError::RootUnwritable {
            path: self.root.clone(),
            source: e,
        })?;
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let run_id = match run_id {
            Some(id) => id,
            None => loop {
                let suffix: u32 = rand::thread_rng().gen_range(0x1000..=0xffff);
                let candidate = format!("run_{now}_{suffix:04x}");
                if !self.root.join(&candidate).exists() {
                    break candidate;
                }
            },
        };
        let path = self.root.join(&run_id);
        std::fs::create_dir_all(&path).map_err(|e| StoreError::RootUnwritable {
            path: path.clone(),
            source: e,
        })?;
        let run = RunDir { path, run_id };
        let manifest = RunManifest {
            run_id: run.run_id.clone(),
            status: RunStatus::Running,
            created_unix: now,
            config,
            dataset,
            tool_versions,
        };
        run.write_manifest(&manifest)?;
        Ok(run)
    }

    /// Opens an existing run (resume, report).
    pub fn open_run(&self, run_id: &str) -> Result<RunDir, StoreError> {
        let path = self.root.join(run_id);
        if !path.join("manifest.json").is_file() {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        Ok(RunDir {
            path,
            run_id: run_id.to_string(),
        })
    }

    /// Most recently created run, by manifest timestamp then name.
    pub fn latest_run(&self) -> Option<RunDir> {
        let mut runs: Vec<(u64, String)> = std::fs::read_dir(&self.root)
            .ok()?
            .flatten()
            .filter_map(|entry| {
                let run_id = entry.file_name().to_string_lossy().to_string();
                let run = self.open_run(&run_id).ok()?;
                let manifest = run.read_manifest().ok()?;
                Some((manifest.created_unix, run_id))
            })
            .collect();
        runs.sort();
        let (_, run_id) = runs.pop()?;
        self.open_run(&run_id).ok()
    }
}

/// Handle to one run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
    run_id: String,
}

impl RunDir {
    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn design_dir(&self, design_id: &str) -> PathBuf {
        self.path.join("designs").join(design_id)
    }

    pub fn attempt_dir(&self, design_id: &str, attempt: usize) -> PathBuf {
        self.design_dir(design_id)
            .join(format!("attempt_{attempt}"))
    }

    pub fn record_path(&self, design_id: &str, attempt: usize) -> PathBuf {
        self.attempt_dir(design_id, attempt).join("record.json")
    }

    pub fn scoreboard_path(&self) -> PathBuf {
        self.path.join("scoreboard.json")
    }

    pub fn read_manifest(&self) -> Result<RunManifest, StoreError> {
        let path = self.path.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| StoreError::Io {
            run_id: self.run_id.clone(),
            context: "read manifest".into(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| StoreError::BadManifest {
            run_id: self.run_id.clone(),
            message: e.to_string(),
        })
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), StoreError> {
        write_json_atomic(&self.path.join("manifest.json"), manifest).map_err(|e| StoreError::Io {
            run_id: self.run_id.clone(),
            context: "write manifest".into(),
            source: e,
        })
    }

    pub fn set_status(&self, status: RunStatus) -> Result<(), StoreError> {
        let mut manifest = self.read_manifest()?;
        manifest.status = status;
        self.write_manifest(&manifest)
    }

    /// Commits one attempt: the record file is what marks the attempt
    /// complete for resume.
    pub fn write_record(&self, record: &RunRecord, attempt: usize) -> Result<(), StoreError> {
        write_json_atomic(&self.record_path(&record.design_id, attempt), record).map_err(|e| {
            StoreError::Io {
                run_id: self.run_id.clone(),
                context: format!("write record {}", record.attempt_id),
                source: e,
            }
        })
    }

    pub fn read_record(&self, design_id: &str, attempt: usize) -> Option<RunRecord> {
        let text = std::fs::read_to_string(self.record_path(design_id, attempt)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn write_scoreboard(&self, board: &ScoreBoard) -> Result<(), StoreError> {
        write_json_atomic(&self.scoreboard_path(), board).map_err(|e| StoreError::Io {
            run_id: self.run_id.clone(),
            context: "write scoreboard".into(),
            source: e,
        })
    }

    pub fn read_scoreboard(&self) -> Option<ScoreBoard> {
        let text = std::fs::read_to_string(self.scoreboard_path()).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// All committed records, in (design, attempt) order.
    pub fn load_records(&self) -> Vec<RunRecord> {
        let mut records = Vec::new();
        let designs_dir = self.path.join("designs");
        let mut designs: Vec<PathBuf> = std::fs::read_dir(&designs_dir)
            .map(|it| {
                it.flatten()
                    .map(|e| e.path())
                    .filter(|p| p.is_dir())
                    .collect()
            })
            .unwrap_or_default();
        designs.sort();
        for design in designs {
            let mut attempts: Vec<(usize, PathBuf)> = std::fs::read_dir(&design)
                .map(|it| {
                    it.flatten()
                        .filter_map(|e| {
                            let name = e.file_name().to_string_lossy().to_string();
                            let index = name.strip_prefix("attempt_")?.parse::<usize>().ok()?;
                            Some((index, e.path().join("record.json")))
                        })
                        .collect()
                })
                .unwrap_or_default();
            attempts.sort();
            for (_, path) in attempts {
                if let Ok(text) = std::fs::read_to_string(&path) {
                    if let Ok(record) = serde_json::from_str::<RunRecord>(&text) {
                        records.push(record);
                    }
                }
            }
        }
        records
    }

    /// Validates the whole run directory: every record against the
    /// shipped JSON schema, the milestone-monotonicity and consistency
    /// checks, and scoreboard conservation. Returns one message per
    /// violation.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let max_rounds_k = self
            .read_manifest()
            .ok()
            .and_then(|m| {
                m.config
                    .pointer("/rectify/max_rounds_k")
                    .and_then(|v| v.as_u64())
            })
            .unwrap_or(4) as u32;

        let records = self.load_records();
        if records.is_empty() {
            problems.push(format!("{}: no records found", self.run_id));
        }
        for record in &records {
            match serde_json::to_value(record) {
                Ok(value) => {
                    for error in schema().iter_errors(&value) {
                        problems.push(format!(
                            "{}: schema violation at {}: {error}",
                            record.attempt_id,
                            error.instance_path()
                        ));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", record.attempt_id)),
            }
            problems.extend(record.validate(max_rounds_k));
        }
        if let Some(stored) = self.read_scoreboard() {
            let recomputed = ScoreBoard::from_records(&records);
            if stored != recomputed {
                problems.push(format!(
                    "{}: scoreboard does not match its records (stored {} functional passes, recomputed {})",
                    self.run_id, stored.functional_passes, recomputed.functional_passes
                ));
            }
        }
        problems
    }
}

/// The RunRecord schema shipped with the crate.
pub const RUN_RECORD_SCHEMA: &str = include_str!("../assets/schema/run_record.schema.json");

fn schema() -> &'static jsonschema::Validator {
    static SCHEMA: Lazy<jsonschema::Validator> = Lazy::new(|| {
        let value: serde_json::Value =
            serde_json::from_str(RUN_RECORD_SCHEMA).expect("schema asset parses");
        jsonschema::validator_for(&value).expect("schema asset compiles")
    });
    &SCHEMA
}
