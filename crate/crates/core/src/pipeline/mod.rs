//! Stage drivers over on-disk artifacts: every stage reads manifests,
//! writes its outputs into one directory and records a provenance file.

mod fixtures;
mod stages;
mod synth;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::{
    sha256_hex, BackendClient, Backends, CountingTransport, HttpTransport, MockTransport, RateLimiter, ResponseCache, Transport,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::media::{AdlvCodec, VideoCodec};
use crate::model::ActionTable;

pub use fixtures::{builtin_fixtures, SCENE_OBJECTS};
pub use stages::*;
pub use synth::{clip_id, generate_corpus, SynthSpec, JOINT_COUNT};

pub const PROVENANCE_FILE: &str = "provenance.json";
pub const TOOL_NAME: &str = "adlforge";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a stage needs besides its input paths.
pub struct Context {
    pub config: RunConfig,
    /// Annotation models (caption, detect, localize, chat).
    pub backends: Backends,
    /// The model under evaluation, reached through the caption route.
    pub candidate: Backends,
    /// Chat model grading descriptions.
    pub judge: Backends,
    pub codec: Arc<dyn VideoCodec>,
    pub actions: ActionTable,
    pub mock_backends: bool,
    calls: Arc<AtomicUsize>,
}

impl Context {
    /// Wraps `transport` with the configured cache, retry policy and rate
    /// limit. The cache lives in `<cache>/mock` for mock runs so fixture
    /// replies never mix with real ones.
    pub fn new(config: RunConfig, transport: Arc<dyn Transport>, mock_backends: bool) -> Result<Self> {
        let cache_dir = if mock_backends {
            config.paths.cache.join("mock")
        } else {
            config.paths.cache.clone()
        };
        let counting = CountingTransport::new(transport);
        let calls = counting.counter();
        let mut client = BackendClient::new(Arc::new(counting))
            .with_cache(ResponseCache::open(cache_dir)?)
            .with_retry(config.retry());
        if config.backends.rate_limit_per_min > 0 {
            client = client.with_rate_limiter(RateLimiter::global(config.backends.rate_limit_per_min));
        }
        let mut backends = Backends::new(client);
        backends.models = config.backends.models.clone();
        let mut candidate = backends.clone();
        candidate.models.caption = config.backends.candidate_model.clone();
        let mut judge = backends.clone();
        judge.models.chat = config.backends.judge_model.clone();
        let actions_path = config.paths.corpus.join("actions.json");
        let actions = if actions_path.is_file() {
            ActionTable::load(&actions_path)?
        } else {
            ActionTable::ntu120()
        };
        Ok(Context {
            config,
            backends,
            candidate,
            judge,
            codec: Arc::new(AdlvCodec),
            actions,
            mock_backends,
            calls,
        })
    }

    /// Built-in fixtures; no network access is possible.
    pub fn mock(config: RunConfig) -> Result<Self> {
        Self::new(config, Arc::new(MockTransport::new(builtin_fixtures())), true)
    }

    pub fn http(config: RunConfig) -> Result<Self> {
        let t = HttpTransport::new(config.endpoints(), config.timeout());
        Self::new(config, Arc::new(t), false)
    }

    /// Calls that missed the cache and reached the transport so far.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn corpus_dir(&self) -> &Path {
        &self.config.paths.corpus
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Written beside every stage's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub master_seed: u64,
    pub mock_backends: bool,
    pub created_at: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub records: usize,
}

impl Provenance {
    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(PROVENANCE_FILE);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn hash_file(path: &Path) -> Result<InputHash> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputHash {
        path: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: sha256_hex(&bytes),
    })
}

fn write_provenance(ctx: &Context, dir: &Path, stage: &str, inputs: &[PathBuf], records: usize) -> Result<()> {
    let mut hashes = inputs.iter().map(|p| hash_file(p)).collect::<Result<Vec<_>>>()?;
    hashes.sort();
    let prov = Provenance {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        stage: stage.into(),
        master_seed: ctx.config.master_seed,
        mock_backends: ctx.mock_backends,
        created_at: chrono::Utc::now().to_rfc3339(),
        config: serde_json::to_value(&ctx.config)?,
        inputs: hashes,
        records,
    };
    let p = dir.join(PROVENANCE_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&prov)?).map_err(|e| Error::io(&p, e))
}

/// `<root>/<name>-v<N>`: the next unused version, or the latest one
/// emptied when `overwrite` is set.
pub fn versioned_dir(root: &Path, name: &str, overwrite: bool) -> Result<PathBuf> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let prefix = format!("{name}-v");
    let mut latest = 0u32;
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let file_name = entry.file_name();
        if let Some(n) = file_name.to_str().and_then(|s| s.strip_prefix(&prefix)).and_then(|v| v.parse::<u32>().ok()) {
            latest = latest.max(n);
        }
    }
    let version = if overwrite { latest.max(1) } else { latest + 1 };
    let dir = root.join(format!("{prefix}{version}"));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Runs `body` in `dir` (created if missing) and records provenance.
/// `body` returns the number of records it wrote.
pub fn run_in_dir(
    ctx: &Context,
    dir: &Path,
    stage: &str,
    inputs: &[PathBuf],
    body: impl FnOnce(&Path) -> Result<usize>,
) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let _span = tracing::info_span!("stage", name = stage).entered();
    tracing::info!(dir = %dir.display(), "stage started");
    let records = body(dir)?;
    write_provenance(ctx, dir, stage, inputs, records)?;
    tracing::info!(records, "stage finished");
    Ok(records)
}

/// Like [`run_in_dir`] in a fresh versioned directory under the output root.
pub fn run_stage(
    ctx: &Context,
    stage: &str,
    overwrite: bool,
    inputs: &[PathBuf],
    body: impl FnOnce(&Path) -> Result<usize>,
) -> Result<PathBuf> {
    let dir = versioned_dir(&ctx.config.paths.out, stage, overwrite)?;
    run_in_dir(ctx, &dir, stage, inputs, body)?;
    Ok(dir)
}

/// Accepts a manifest file or a stage directory containing `file_name`.
pub fn locate(path: &Path, file_name: &str) -> Result<PathBuf> {
    let p = if path.is_dir() { path.join(file_name) } else { path.to_path_buf() };
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::Precondition(format!("{} not found", p.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions_increase_unless_overwriting() {
        let root = tempfile::tempdir().unwrap();
        let a = versioned_dir(root.path(), "crop", false).unwrap();
        std::fs::write(a.join("x"), "1").unwrap();
        let b = versioned_dir(root.path(), "crop", false).unwrap();
        assert!(a.ends_with("crop-v1") && b.ends_with("crop-v2"));
        std::fs::write(b.join("x"), "1").unwrap();
        let c = versioned_dir(root.path(), "crop", true).unwrap();
        assert_eq!(c, b);
        assert!(!c.join("x").exists());
        assert!(a.join("x").exists());
    }
}
