//! Run configuration: a TOML file, `ADLFORGE_*` environment overrides, then
//! command-line flags (applied by the caller).

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backends::{Endpoints, ModelIds, RetryPolicy};
use crate::error::{Error, Result};
use crate::objects::LinkMode;
use crate::video::SequenceGenerator;

pub const ENV_PREFIX: &str = "ADLFORGE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub workers: usize,
    pub backends: BackendConfig,
    pub stages: StageConfig,
    pub paths: PathConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Base URL serving all four routes.
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: usize,
    pub retry_base_ms: u64,
    /// 0 disables rate limiting.
    pub rate_limit_per_min: u32,
    pub models: ModelIds,
    /// Model answering benchmark questions and writing descriptions.
    pub candidate_model: String,
    /// Chat model grading descriptions.
    pub judge_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub margin_frac: f64,
    pub sequence_generator: SequenceGenerator,
    pub sequence_count: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub target_count: usize,
    pub output_size: u32,
    pub max_skips_per_video: usize,
    pub target_fps: f64,
    pub max_failed_caption_fraction: f64,
    pub score_floor: f64,
    pub min_sim: f64,
    pub link_mode: LinkMode,
    pub pose_qa: bool,
    pub object_qa: bool,
    pub mcq_options: usize,
    pub clip_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    /// Directory holding `corpus.jsonl` and, optionally, `actions.json`.
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub cache: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 7,
            workers: 4,
            backends: BackendConfig::default(),
            stages: StageConfig::default(),
            paths: PathConfig::default(),
        }
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "http://127.0.0.1:8700".into(),
            timeout_ms: 120_000,
            max_retries: 3,
            retry_base_ms: 500,
            rate_limit_per_min: 0,
            models: ModelIds::default(),
            candidate_model: "candidate".into(),
            judge_model: "gpt-3.5-turbo".into(),
        }
    }
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            margin_frac: crate::video::DEFAULT_MARGIN,
            sequence_generator: SequenceGenerator::Sampler,
            sequence_count: 160,
            min_len: 3,
            max_len: 7,
            target_count: 100,
            output_size: 512,
            max_skips_per_video: 10,
            target_fps: 0.5,
            max_failed_caption_fraction: 0.5,
            score_floor: crate::objects::DEFAULT_SCORE_FLOOR,
            min_sim: 0.0,
            link_mode: LinkMode::Literal,
            pose_qa: true,
            object_qa: true,
            mcq_options: crate::eval::DEFAULT_OPTIONS,
            clip_seconds: crate::eval::DEFAULT_CLIP_SECONDS,
        }
    }
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            corpus: "corpus".into(),
            out: "out".into(),
            cache: "cache".into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        Self::from_table(table, |_| None)
    }

    /// Reads `path` (defaults when `None`), applies environment overrides and
    /// resolves relative paths against the config file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let (table, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let table: toml::Table =
                    text.parse().map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                (table, p.parent().map(Path::to_path_buf))
            }
            None => (toml::Table::new(), None),
        };
        let mut cfg = Self::from_table(table, |k| std::env::var(k).ok())?;
        if let Some(base) = base.filter(|b| !b.as_os_str().is_empty()) {
            for p in [&mut cfg.paths.corpus, &mut cfg.paths.out, &mut cfg.paths.cache] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Overrides every leaf `a.b.c` present in the defaults from
    /// `ADLFORGE_A_B_C` when `env` yields a value.
    pub fn from_table(mut table: toml::Table, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let defaults = toml::Table::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        let mut leaves = Vec::new();
        collect_leaves(&defaults, &mut Vec::new(), &mut leaves);
        for (path, default) in leaves {
            let var = format!("{ENV_PREFIX}{}", path.join("_").to_uppercase());
            let Some(raw) = env(&var) else { continue };
            let value = parse_like(&default, &raw).ok_or_else(|| Error::Config(format!("{var}={raw:?} is not a valid value")))?;
            set_leaf(&mut table, &path, value);
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    pub fn validate(&self, needs_corpus: bool) -> Result<()> {
        let s = &self.stages;
        let mut bad = Vec::new();
        if self.workers == 0 {
            bad.push("workers must be >= 1".to_string());
        }
        if !(0.0..=1.0).contains(&s.margin_frac) {
            bad.push(format!("stages.margin_frac {} outside [0, 1]", s.margin_frac));
        }
        if s.min_len < 2 || s.min_len > s.max_len {
            bad.push(format!("stages.min_len/max_len [{}, {}] invalid", s.min_len, s.max_len));
        }
        if s.sequence_count == 0 || s.target_count == 0 {
            bad.push("stages.sequence_count and stages.target_count must be >= 1".into());
        }
        if s.output_size < 8 {
            bad.push("stages.output_size must be >= 8".into());
        }
        if s.target_fps.is_nan() || s.target_fps <= 0.0 {
            bad.push("stages.target_fps must be > 0".into());
        }
        if !(0.0..=1.0).contains(&s.max_failed_caption_fraction) {
            bad.push("stages.max_failed_caption_fraction outside [0, 1]".into());
        }
        if !(-1.0..=1.0).contains(&s.min_sim) {
            bad.push(format!("stages.min_sim {} outside [-1, 1]", s.min_sim));
        }
        if !(0.0..=1.0).contains(&s.score_floor) {
            bad.push("stages.score_floor outside [0, 1]".into());
        }
        if s.mcq_options < 2 {
            bad.push("stages.mcq_options must be >= 2".into());
        }
        if s.clip_seconds.is_nan() || s.clip_seconds <= 0.0 {
            bad.push("stages.clip_seconds must be > 0".into());
        }
        if needs_corpus && !self.paths.corpus.join("corpus.jsonl").is_file() {
            bad.push(format!("paths.corpus: {} has no corpus.jsonl", self.paths.corpus.display()));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn endpoints(&self) -> Endpoints {
        Endpoints::all(&self.backends.base_url)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.backends.timeout_ms)
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.backends.max_retries,
            base_delay: Duration::from_millis(self.backends.retry_base_ms),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn collect_leaves(t: &toml::Table, prefix: &mut Vec<String>, out: &mut Vec<(Vec<String>, toml::Value)>) {
    for (k, v) in t {
        prefix.push(k.clone());
        match v {
            toml::Value::Table(inner) => collect_leaves(inner, prefix, out),
            other => out.push((prefix.clone(), other.clone())),
        }
        prefix.pop();
    }
}

fn parse_like(default: &toml::Value, raw: &str) -> Option<toml::Value> {
    Some(match default {
        toml::Value::Integer(_) => toml::Value::Integer(raw.trim().parse().ok()?),
        toml::Value::Float(_) => toml::Value::Float(raw.trim().parse().ok()?),
        toml::Value::Boolean(_) => toml::Value::Boolean(raw.trim().parse().ok()?),
        _ => toml::Value::String(raw.to_string()),
    })
}

fn set_leaf(t: &mut toml::Table, path: &[String], value: toml::Value) {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = t;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if !entry.is_table() {
            *entry = toml::Value::Table(toml::Table::new());
        }
        cur = entry.as_table_mut().expect("table");
    }
    cur.insert(last.clone(), value);
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn defaults_validate_without_corpus() {
        RunConfig::default().validate(false).unwrap();
        let back = RunConfig::from_toml_str(&RunConfig::default().to_toml()).unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn file_values_and_env_overrides() {
        let table: toml::Table = "master_seed = 11\n[stages]\nmin_sim = 0.25\n".parse().unwrap();
        let env: HashMap<&str, &str> = [
            ("ADLFORGE_WORKERS", "2"),
            ("ADLFORGE_STAGES_MIN_SIM", "0.5"),
            ("ADLFORGE_BACKENDS_MODELS_CHAT", "local-llm"),
            ("ADLFORGE_STAGES_LINK_MODE", "exclusive"),
        ]
        .into();
        let cfg = RunConfig::from_table(table, |k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.master_seed, 11);
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.stages.min_sim, 0.5);
        assert_eq!(cfg.backends.models.chat, "local-llm");
        assert_eq!(cfg.stages.link_mode, LinkMode::Exclusive);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("wrkers = 3").is_err());
        assert!(RunConfig::from_table(toml::Table::new(), |k| (k == "ADLFORGE_WORKERS").then(|| "many".into())).is_err());
        let mut cfg = RunConfig {
            workers: 0,
            ..RunConfig::default()
        };
        cfg.stages.margin_frac = 1.5;
        let msg = cfg.validate(false).unwrap_err().to_string();
        assert!(msg.contains("workers") && msg.contains("margin_frac"));
        let mut cfg = RunConfig::default();
        cfg.paths.corpus = "/nonexistent/corpus".into();
        assert!(cfg.validate(true).is_err());
    }
}
