//! Pipeline configuration.
//!
//! Values are layered: built-in defaults, then a `key = value` file, then
//! environment overrides, then command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use qoekit_core::har::{DEFAULT_SEGMENT_DURATION_MS, DEFAULT_SEGMENT_PATTERN};
use qoekit_core::learner::ForestParams;
use qoekit_core::quality::{Backend, Mode, ScorerConfig};

use crate::CliError;

pub const ENV_OUTPUT_DIR: &str = "QOE_OUTPUT_DIR";
pub const ENV_EXTERNAL_SCORER: &str = "QOE_EXTERNAL_SCORER";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub test_fraction: f64,
    pub segment_pattern: String,
    pub segment_duration_ms: u64,
    pub profile_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub scorer: ScorerConfig,
    pub forest: ForestParams,
    pub ridge: Option<f64>,
    /// Length of each synthesized session.
    pub session_duration_s: u32,
    pub segment_length_s: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("qoekit-out"),
            test_fraction: 0.2,
            segment_pattern: DEFAULT_SEGMENT_PATTERN.to_string(),
            segment_duration_ms: DEFAULT_SEGMENT_DURATION_MS,
            profile_path: None,
            dataset_path: None,
            scorer: ScorerConfig::default(),
            forest: ForestParams::default(),
            ridge: None,
            session_duration_s: 40,
            segment_length_s: 4,
        }
    }
}

fn bad(line: usize, key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("line {line}: `{key} = {value}`: {why}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(line, key, value, "not a valid number"))
}

fn boolean(line: usize, key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(line, key, value, "expected true or false")),
    }
}

impl PipelineConfig {
    /// Applies a config document on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let Some((key, value)) = t.split_once('=') else {
                return Err(CliError::Config(format!("line {line}: expected `key = value`, got `{t}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => self.seed = num(line, key, value)?,
                "output_dir" => self.output_dir = PathBuf::from(value),
                "test_fraction" => {
                    let f: f64 = num(line, key, value)?;
                    if !(f > 0.0 && f < 1.0) {
                        return Err(bad(line, key, value, "must lie strictly between 0 and 1"));
                    }
                    self.test_fraction = f;
                }
                "segment_pattern" => self.segment_pattern = value.to_string(),
                "segment_duration_ms" => self.segment_duration_ms = num(line, key, value)?,
                "profiles" => self.profile_path = Some(PathBuf::from(value)),
                "dataset" => self.dataset_path = Some(PathBuf::from(value)),
                "scorer" => {
                    self.scorer.backend = match value {
                        "surrogate" => Backend::Surrogate,
                        "external" => Backend::External,
                        _ => return Err(bad(line, key, value, "expected surrogate or external")),
                    }
                }
                "scorer_mode" => {
                    let m: i64 = num(line, key, value)?;
                    self.scorer.mode = Mode::try_from(m).map_err(|e| bad(line, key, value, &e.to_string()))?;
                }
                "scorer_command" => self.scorer.external_command = Some(value.to_string()),
                "scorer_use_average" => self.scorer.use_average = boolean(line, key, value)?,
                "scorer_timeout_s" => self.scorer.timeout = Duration::from_secs(num(line, key, value)?),
                "n_estimators" => self.forest.n_estimators = num(line, key, value)?,
                "max_depth" => self.forest.max_depth = num(line, key, value)?,
                "max_features_fraction" => self.forest.max_features_fraction = num(line, key, value)?,
                "min_samples_leaf" => self.forest.min_samples_leaf = num(line, key, value)?,
                "bootstrap" => self.forest.bootstrap = boolean(line, key, value)?,
                "ridge" => self.ridge = Some(num(line, key, value)?),
                "session_duration_s" => self.session_duration_s = num(line, key, value)?,
                "segment_length_s" => self.segment_length_s = num(line, key, value)?,
                _ => return Err(CliError::Config(format!("line {line}: unknown key `{key}`"))),
            }
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `QOE_OUTPUT_DIR` replaces the output directory. A non-empty
    /// `QOE_EXTERNAL_SCORER` sets the scorer command and selects the
    /// external backend.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(dir) = get(ENV_OUTPUT_DIR).filter(|s| !s.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Some(cmd) = get(ENV_EXTERNAL_SCORER).filter(|s| !s.trim().is_empty()) {
            self.scorer.external_command = Some(cmd);
            self.scorer.backend = Backend::External;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.forest
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.scorer
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.segment_length_s == 0 || self.session_duration_s < self.segment_length_s {
            return Err(CliError::Config(format!(
                "session of {} s cannot hold {} s segments",
                self.session_duration_s, self.segment_length_s
            )));
        }
        Ok(())
    }
}
