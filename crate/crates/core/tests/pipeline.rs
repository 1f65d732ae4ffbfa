use std::path::{Path, PathBuf};
use std::sync::Arc;

use adlforge_core::backends::{
    BackendClient, Backends, CountingTransport, FixtureTable, Matcher, MockReply, MockTransport, Role,
    SentinelTransport, Transport,
};
use adlforge_core::config::RunConfig;
use adlforge_core::media::AdlvCodec;
use adlforge_core::model::ActionTable;
use adlforge_core::objects::filter_relevant;
use adlforge_core::pipeline::{builtin_fixtures, generate_corpus, pipeline, Context, SynthSpec, PROVENANCE_FILE};

fn corpus(dir: &Path) {
    let actions = ActionTable::from_pairs(ActionTable::ntu120().iter().take(12).map(|(i, l)| (i, l.to_string())));
    let spec = SynthSpec {
        subjects: 2,
        cameras: 1,
        ..SynthSpec::default()
    };
    generate_corpus(dir, &actions, &spec, &AdlvCodec).unwrap();
    std::fs::write(dir.join("actions.json"), actions.to_json()).unwrap();
}

fn config(root: &Path, out: &str, cache: &str) -> RunConfig {
    let mut c = RunConfig::default();
    c.paths.corpus = root.join("corpus");
    c.paths.out = root.join(out);
    c.paths.cache = root.join(cache);
    c.stages.output_size = 48;
    c.stages.target_count = 8;
    c.stages.sequence_count = 30;
    c
}

fn run(config: RunConfig) -> (PathBuf, usize) {
    let counting = Arc::new(CountingTransport::new(Arc::new(MockTransport::new(builtin_fixtures()))));
    let ctx = Context::new(config, counting.clone() as Arc<dyn Transport>, true).unwrap();
    let summary = pipeline(&ctx, false).unwrap();
    assert_eq!(summary.videos, 8);
    assert_eq!((summary.min_qa_per_video, summary.max_qa_per_video), (11, 11));
    (summary.dir, counting.count())
}

/// Relative path to contents, skipping provenance records (they carry a
/// timestamp).
fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != PROVENANCE_FILE {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn deterministic_and_warm_cache_is_silent() {
    let root = tempfile::tempdir().unwrap();
    corpus(&root.path().join("corpus"));

    let (a, calls_a) = run(config(root.path(), "out_a", "cache_a"));
    let (b, calls_b) = run(config(root.path(), "out_b", "cache_b"));
    assert!(calls_a > 0);
    assert_eq!(calls_a, calls_b);
    let ta = tree(&a);
    assert!(ta.len() > 20);
    assert_eq!(ta, tree(&b), "cold runs differ");

    let (c, calls_c) = run(config(root.path(), "out_c", "cache_a"));
    assert_eq!(calls_c, 0, "warm cache still reached the transport");
    assert_eq!(ta, tree(&c), "warm run differs");
}

#[test]
fn different_seed_changes_the_output() {
    let root = tempfile::tempdir().unwrap();
    corpus(&root.path().join("corpus"));
    let (a, _) = run(config(root.path(), "out_a", "cache"));
    let mut other = config(root.path(), "out_b", "cache");
    other.master_seed += 1;
    let (b, _) = run(other);
    let seqs = |d: &Path| std::fs::read(d.join("sequences/sequences.jsonl")).unwrap();
    assert_ne!(seqs(&a), seqs(&b));
}

#[test]
fn relevance_filter_with_scripted_replies() {
    let found: Vec<String> = ["plant", "chair", "bottle", "table"].iter().map(|s| s.to_string()).collect();
    let backends = |reply: &str| {
        let table = FixtureTable::new().rule(Matcher::role_contains(Role::Chat, "Drinking"), MockReply::chat(reply));
        Backends::new(BackendClient::new(Arc::new(MockTransport::new(table))))
    };
    assert_eq!(filter_relevant("Drinking", &found, &backends("bottle")).unwrap(), vec!["bottle"]);
    assert!(filter_relevant("Drinking", &found, &backends("None")).unwrap().is_empty());
    // Names outside the detections are dropped.
    assert_eq!(filter_relevant("Drinking", &found, &backends("cup, Bottle")).unwrap(), vec!["bottle"]);
    // The built-in fixtures pick the drinking vessel too.
    let builtin = Backends::new(BackendClient::new(Arc::new(MockTransport::new(builtin_fixtures()))));
    assert_eq!(filter_relevant("Drinking", &found, &builtin).unwrap(), vec!["bottle"]);
}

#[test]
fn sentinel_rejects_any_call() {
    let b = Backends::new(BackendClient::new(Arc::new(SentinelTransport)));
    assert!(b.chat(&[]).is_err());
}
