//! Layered configuration: a TOML file, then environment overrides, then
//! CLI flags, in that precedence order (later wins).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::DatasetDescriptor;
use crate::gateway::{BackendConfig, BackendKind};
use crate::model::{PpaConstraints, RectifyConfig};
use crate::prompt::StrategyRanking;
use crate::synth::PpaStageConfig;
use crate::workbench::{RulesConfig, SimulatorConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("environment override {var}: {message}")]
    Env { var: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

/// The fully resolved configuration tree. Field names are the
/// documented config-file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    #[serde(default = "default_store_root")]
    pub store_root: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
    #[serde(default)]
    pub rectify: RectifyConfig,
    #[serde(default)]
    pub simulator: SimulatorConfig,
    /// Default workbench parser rules plus named per-dataset rule sets.
    #[serde(default)]
    pub parser_rules: RulesConfig,
    #[serde(default)]
    pub parser_rule_sets: BTreeMap<String, RulesConfig>,
    #[serde(default = "PpaStageConfig::mock_default")]
    pub synthesis: PpaStageConfig,
    /// Directory of template/ICL overrides (see prompt module); the
    /// builtin set is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub few_shot_path: Option<PathBuf>,
    #[serde(default)]
    pub shots: usize,
    #[serde(default = "default_icl_limit")]
    pub icl_limit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy_ranking: Option<StrategyRanking>,
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetDescriptor>,
    /// Per-design quality bounds, keyed by design_id. A sample ships
    /// in the repo config: adder_32bit under 300 ps.
    #[serde(default)]
    pub ppa_constraints: BTreeMap<String, PpaConstraints>,
    #[serde(default = "default_macs_per_token")]
    pub macs_per_token: f64,
}

fn default_store_root() -> PathBuf {
    PathBuf::from("runs")
}
fn default_workers() -> usize {
    1
}
fn default_backend() -> BackendConfig {
    let mut backend =
        BackendConfig::http_chat("https://api.openai.com/v1/chat/completions", "gpt-4");
    backend.api_key_env = Some("OPENAI_API_KEY".to_string());
    backend
}
fn default_icl_limit() -> usize {
    2
}
fn default_macs_per_token() -> f64 {
    crate::bench::DEFAULT_MACS_PER_TOKEN
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl Config {
    /// Loads the file (when given), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                let mut config: Config = toml::from_str(&text).map_err(|e| ConfigError::File {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                // Relative paths in a config file resolve against the
                // file's own directory, made absolute so rebased paths
                // survive later working-directory changes (subprocess
                // workdirs in particular).
                let base = match path.parent() {
                    Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                    _ => PathBuf::from("."),
                };
                let base = std::fs::canonicalize(&base).unwrap_or_else(|_| {
                    std::env::current_dir()
                        .map(|cwd| cwd.join(&base))
                        .unwrap_or(base)
                });
                config.rebase(&base);
                config
            }
            None => Config::default(),
        };
        config.apply_env()?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let rebase_one = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase_one(&mut self.store_root);
        if let Some(p) = self.prompts_dir.as_mut() {
            rebase_one(p);
        }
        if let Some(p) = self.few_shot_path.as_mut() {
            rebase_one(p);
        }
        if let Some(p) = self.backend.script_path.as_mut() {
            rebase_one(p);
        }
        for dataset in self.datasets.values_mut() {
            rebase_one(&mut dataset.root);
        }
        // Command templates may reference files shipped next to the
        // config via a {config_dir} placeholder.
        let base_str = base.display().to_string();
        let substitute = |arg: &mut String| {
            if arg.contains("{config_dir}") {
                *arg = arg.replace("{config_dir}", &base_str);
            }
        };
        self.simulator
            .compile_command
            .iter_mut()
            .for_each(substitute);
        self.simulator.run_command.iter_mut().for_each(substitute);
        if let Some(template) = self.synthesis.backend.command_template.as_mut() {
            let mut t = template.clone();
            substitute(&mut t);
            *template = t;
        }
    }

    /// Documented environment overrides, every key prefixed VERIFORGE_.
    fn apply_env(&mut self) -> Result<(), ConfigError> {
        let get = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        if let Some(v) = get("VERIFORGE_STORE") {
            self.store_root = PathBuf::from(v);
        }
        if let Some(v) = get("VERIFORGE_WORKERS") {
            self.workers = parse_env("VERIFORGE_WORKERS", &v)?;
        }
        if let Some(v) = get("VERIFORGE_BACKEND") {
            self.backend.backend_kind = match v.as_str() {
                "http_chat" => BackendKind::HttpChat,
                "scripted" => BackendKind::Scripted,
                other => {
                    return Err(ConfigError::Env {
                        var: "VERIFORGE_BACKEND".into(),
                        message: format!("unknown backend kind {other:?}"),
                    })
                }
            };
        }
        if let Some(v) = get("VERIFORGE_MODEL") {
            self.backend.model_name = v;
        }
        if let Some(v) = get("VERIFORGE_ENDPOINT") {
            self.backend.endpoint = Some(v);
        }
        if let Some(v) = get("VERIFORGE_SCRIPT") {
            self.backend.script_path = Some(PathBuf::from(v));
        }
        if let Some(v) = get("VERIFORGE_API_KEY_ENV") {
            self.backend.api_key_env = Some(v);
        }
        if let Some(v) = get("VERIFORGE_TEMPERATURE") {
            self.rectify.temperature = parse_env("VERIFORGE_TEMPERATURE", &v)?;
        }
        if let Some(v) = get("VERIFORGE_MAX_ROUNDS") {
            self.rectify.max_rounds_k = parse_env("VERIFORGE_MAX_ROUNDS", &v)?;
        }
        if let Some(v) = get("VERIFORGE_GENERATIONS") {
            self.rectify.generations_n = parse_env("VERIFORGE_GENERATIONS", &v)?;
        }
        if let Some(v) = get("VERIFORGE_SIM_TIMEOUT_SECS") {
            self.simulator.timeout_secs = parse_env("VERIFORGE_SIM_TIMEOUT_SECS", &v)?;
        }
        if let Some(v) = get("VERIFORGE_MACS_PER_TOKEN") {
            self.macs_per_token = parse_env("VERIFORGE_MACS_PER_TOKEN", &v)?;
        }
        Ok(())
    }

    /// Parser rules for a dataset by rule-set id, falling back to the
    /// default rules.
    pub fn rules_for(&self, id: Option<&str>) -> Result<RulesConfig, ConfigError> {
        match id {
            None => Ok(self.parser_rules.clone()),
            Some(id) => self
                .parser_rule_sets
                .get(id)
                .cloned()
                .ok_or_else(|| ConfigError::Invalid(format!("unknown parser rule set {id:?}"))),
        }
    }

    /// Snapshot for the run manifest: fully resolved, secrets excluded
    /// by construction (only the key's env-var NAME is ever stored).
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

fn parse_env<T: std::str::FromStr>(var: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Env {
        var: var.to_string(),
        message: e.to_string(),
    })
}
