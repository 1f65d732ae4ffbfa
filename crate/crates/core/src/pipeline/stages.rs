use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{locate, run_in_dir, versioned_dir, Context, PROVENANCE_FILE};
use crate::annotate::{
    augment_with_context, caption_video, generate_qa, prompts, summarize_dense, CaptionDict, CaptionOptions,
    ContextKind, DenseDescription,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_judge, align_answers, build_mcq, describe_long_video, judge_description, mementos_corpus, mementos_f1,
    render_mcq_prompt, score_mcq, AnswerRecord, DescriptionPair, EvalReport, JudgeReport, Lexicon, McqItem,
    McqTask, MementosReport,
};
use crate::media::encode_png;
use crate::model::{
    load_corpus_manifest, read_jsonl, validate_qa_pairs, validate_stitched_set, write_jsonl, ClipRecord,
    FeatureMeta, PoseSequence, QaPair, QaType, StitchedVideo, Violation, PRODUCER_OBJECT,
};
use crate::objects::{
    detect_objects, filter_relevant, localize_and_embed, object_qa_and_context, track_by_similarity, ObjectTrackSet,
};
use crate::pose::{pose_context, pose_qa, traces_from_poses, PeripheralJointTrace, PoseCueOptions};
use crate::video::{
    assign_and_stitch, crop_corpus, derive_seed, generate_composite_sequences, resolve, ClipCrop,
    CompositeSequence, CropBox, MediaIo, SequenceSpec, StitchOptions,
};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const CROPS_FILE: &str = "crops.jsonl";
pub const SEQUENCES_FILE: &str = "sequences.jsonl";
pub const STITCHED_FILE: &str = "stitched.jsonl";
pub const CAPTIONS_FILE: &str = "captions.jsonl";
pub const DENSE_FILE: &str = "dense.jsonl";
pub const QA_FILE: &str = "qa.jsonl";
pub const QA_AUGMENTED_FILE: &str = "qa_augmented.jsonl";
pub const TRACK_INDEX_FILE: &str = "index.jsonl";
pub const TRACKS_DIR: &str = "objects";
pub const OBJECT_QA_FILE: &str = "object_qa.jsonl";
pub const OBJECT_CONTEXT_FILE: &str = "object_context.jsonl";
pub const POSE_TRACES_FILE: &str = "pose_traces.jsonl";
pub const POSE_QA_FILE: &str = "pose_qa.jsonl";
pub const POSE_CONTEXT_FILE: &str = "pose_context.jsonl";
pub const MCQ_FILE: &str = "mcq.jsonl";
pub const ANSWERS_FILE: &str = "answers.jsonl";
pub const DESCRIPTIONS_FILE: &str = "descriptions.jsonl";
pub const REPORT_FILE: &str = "report.json";

// Per-stage streams derived from the master seed.
const STREAM_SEQUENCES: u64 = 1;
const STREAM_STITCH: u64 = 2;
const STREAM_MCQ: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackRef {
    pub video_id: String,
    pub clip_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub video_id: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub video_id: String,
    pub traces: Vec<PeripheralJointTrace>,
}

pub fn corpus_file(ctx: &Context) -> PathBuf {
    ctx.corpus_dir().join(CORPUS_FILE)
}

pub fn load_corpus(ctx: &Context) -> Result<Vec<ClipRecord>> {
    load_corpus_manifest(&corpus_file(ctx), &ctx.actions)
}

fn base_dir(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or(Path::new("."))
}

fn by_video<T>(items: Vec<T>, id: impl Fn(&T) -> &str) -> HashMap<String, T> {
    items.into_iter().map(|t| (id(&t).to_string(), t)).collect()
}

fn missing(what: &str, video_id: &str) -> Error {
    Error::Precondition(format!("{video_id}: no {what} record"))
}

pub fn crop(ctx: &Context, out: &Path) -> Result<usize> {
    let corpus = load_corpus(ctx)?;
    let crops = crop_corpus(&corpus, ctx.corpus_dir(), ctx.config.stages.margin_frac)?;
    write_jsonl(&out.join(CROPS_FILE), &crops)?;
    Ok(crops.len())
}

pub fn sequences(ctx: &Context, out: &Path) -> Result<usize> {
    let s = &ctx.config.stages;
    let spec = SequenceSpec {
        count: s.sequence_count,
        min_len: s.min_len,
        max_len: s.max_len,
        seed: derive_seed(ctx.config.master_seed, STREAM_SEQUENCES),
    };
    let seqs = generate_composite_sequences(&ctx.actions, spec, s.sequence_generator, Some(&ctx.backends))?;
    write_jsonl(&out.join(SEQUENCES_FILE), &seqs)?;
    Ok(seqs.len())
}

pub fn stitch(ctx: &Context, sequences_file: &Path, crops_file: Option<&Path>, out: &Path) -> Result<usize> {
    let seqs: Vec<CompositeSequence> = read_jsonl(sequences_file)?;
    let corpus = load_corpus(ctx)?;
    let crops: HashMap<String, CropBox> = match crops_file {
        Some(p) => read_jsonl::<ClipCrop>(p)?.into_iter().map(|c| (c.clip_id, c.crop_box)).collect(),
        None => HashMap::new(),
    };
    let s = &ctx.config.stages;
    let opts = StitchOptions {
        seed: derive_seed(ctx.config.master_seed, STREAM_STITCH),
        target_count: s.target_count,
        output_size: s.output_size,
        max_skips_per_video: s.max_skips_per_video,
    };
    let io = MediaIo {
        codec: ctx.codec.as_ref(),
        corpus_dir: ctx.corpus_dir(),
        out_dir: out,
    };
    let videos = assign_and_stitch(&seqs, &corpus, &crops, &io, &opts)?;
    write_jsonl(&out.join(STITCHED_FILE), &videos)?;
    Ok(videos.len())
}

pub fn caption(ctx: &Context, stitched: &Path, out: &Path) -> Result<usize> {
    let videos: Vec<StitchedVideo> = read_jsonl(stitched)?;
    let base = base_dir(stitched);
    let caption_prompts = prompts::caption_prompts().to_vec();
    let opts = CaptionOptions {
        target_fps: ctx.config.stages.target_fps,
        max_failed_fraction: ctx.config.stages.max_failed_caption_fraction,
    };
    let dicts = videos
        .par_iter()
        .map(|v| {
            let media = ctx.codec.decode(&resolve(base, &v.video_path))?;
            caption_video(v, &media, &ctx.backends, &caption_prompts, opts)
        })
        .collect::<Result<Vec<CaptionDict>>>()?;
    write_jsonl(&out.join(CAPTIONS_FILE), &dicts)?;
    Ok(dicts.len())
}

pub fn describe(ctx: &Context, stitched: &Path, captions: &Path, out: &Path) -> Result<usize> {
    let videos: Vec<StitchedVideo> = read_jsonl(stitched)?;
    let caps = by_video(read_jsonl::<CaptionDict>(captions)?, |c| &c.video_id);
    let dense = videos
        .par_iter()
        .map(|v| {
            let c = caps.get(&v.video_id).ok_or_else(|| missing("caption", &v.video_id))?;
            summarize_dense(c, &v.action_labels(), &ctx.backends)
        })
        .collect::<Result<Vec<DenseDescription>>>()?;
    write_jsonl(&out.join(DENSE_FILE), &dense)?;
    Ok(dense.len())
}

pub fn qagen(ctx: &Context, stitched: &Path, captions: &Path, dense: &Path, out: &Path) -> Result<usize> {
    let videos: Vec<StitchedVideo> = read_jsonl(stitched)?;
    let caps = by_video(read_jsonl::<CaptionDict>(captions)?, |c| &c.video_id);
    let dense = by_video(read_jsonl::<DenseDescription>(dense)?, |d| &d.video_id);
    let pairs = videos
        .par_iter()
        .map(|v| {
            let c = caps.get(&v.video_id).ok_or_else(|| missing("caption", &v.video_id))?;
            let d = dense.get(&v.video_id).ok_or_else(|| missing("dense description", &v.video_id))?;
            generate_qa(v, d, c, &ctx.backends)
        })
        .collect::<Result<Vec<Vec<QaPair>>>>()?
        .concat();
    write_jsonl(&out.join(QA_FILE), &pairs)?;
    Ok(pairs.len())
}

/// Detection, relevance filtering and localization per stitched segment.
/// Segments with no relevant or localizable object get no track file.
pub fn objects(ctx: &Context, stitched: &Path, out: &Path) -> Result<usize> {
    let videos: Vec<StitchedVideo> = read_jsonl(stitched)?;
    let base = base_dir(stitched);
    let tracks_dir = out.join(TRACKS_DIR);
    let refs = videos
        .par_iter()
        .map(|v| -> Result<Vec<TrackRef>> {
            let media = ctx.codec.decode(&resolve(base, &v.video_path))?;
            let (w, h) = media
                .dimensions()
                .ok_or_else(|| Error::Media(format!("{}: no frames", v.video_id)))?;
            let mut refs = Vec::new();
            for seg in &v.segments {
                let frames = media
                    .frames
                    .get(seg.start_frame..seg.end_frame)
                    .ok_or_else(|| Error::Media(format!("{}: segment {} beyond media", v.video_id, seg.clip_id)))?;
                let found = detect_objects(frames, &ctx.backends)?;
                let relevant = filter_relevant(&seg.action_label, &found, &ctx.backends)?;
                if relevant.is_empty() {
                    tracing::warn!(video = %v.video_id, clip = %seg.clip_id, "no relevant objects");
                    continue;
                }
                let meta = FeatureMeta {
                    producer: PRODUCER_OBJECT.into(),
                    model_id: ctx.backends.models.localize.clone(),
                    subject_id: v.subject_id.clone(),
                };
                let loc = match localize_and_embed(frames, &relevant, &ctx.backends, ctx.config.stages.score_floor, meta) {
                    Ok(l) => l,
                    Err(Error::Precondition(msg)) => {
                        tracing::warn!(video = %v.video_id, clip = %seg.clip_id, "{msg}");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let ts = ObjectTrackSet {
                    video_id: v.video_id.clone(),
                    clip_id: seg.clip_id.clone(),
                    labels: relevant,
                    frames: loc.frames.iter().map(|f| seg.start_frame + f).collect(),
                    frame_w: w,
                    frame_h: h,
                    boxes: loc.boxes,
                    links: Vec::new(),
                    features: Some(loc.features),
                };
                ts.save(&tracks_dir)?;
                refs.push(TrackRef {
                    video_id: v.video_id.clone(),
                    clip_id: seg.clip_id.clone(),
                });
            }
            Ok(refs)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    write_jsonl(&out.join(TRACK_INDEX_FILE), &refs)?;
    Ok(refs.len())
}

/// Links tracks and emits the object QA pairs and context per video.
pub fn track(ctx: &Context, objects_dir: &Path, out: &Path) -> Result<usize> {
    let index = locate(objects_dir, TRACK_INDEX_FILE)?;
    let src = base_dir(&index).join(TRACKS_DIR);
    let dst = out.join(TRACKS_DIR);
    let refs: Vec<TrackRef> = read_jsonl(&index)?;
    let s = &ctx.config.stages;
    let linked = refs
        .par_iter()
        .map(|r| {
            let ts = ObjectTrackSet::load(&src, &r.video_id, &r.clip_id)?;
            let linked = match track_by_similarity(&ts, s.min_sim, s.link_mode) {
                Ok(t) => t,
                Err(Error::Precondition(msg)) => {
                    tracing::warn!(video = %r.video_id, clip = %r.clip_id, "{msg}; left unlinked");
                    ts
                }
                Err(e) => return Err(e),
            };
            linked.save(&dst)?;
            Ok(linked)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grouped: BTreeMap<String, Vec<ObjectTrackSet>> = BTreeMap::new();
    for t in linked {
        grouped.entry(t.video_id.clone()).or_default().push(t);
    }
    let mut qa = Vec::new();
    let mut contexts = Vec::new();
    for (video_id, tracks) in &grouped {
        let (pairs, context) = object_qa_and_context(video_id, tracks)?;
        qa.extend(pairs);
        contexts.push(ContextRecord {
            video_id: video_id.clone(),
            context,
        });
    }
    write_jsonl(&out.join(TRACK_INDEX_FILE), &refs)?;
    write_jsonl(&out.join(OBJECT_QA_FILE), &qa)?;
    write_jsonl(&out.join(OBJECT_CONTEXT_FILE), &contexts)?;
    Ok(qa.len())
}

/// Peripheral-joint traces, pose context and pose QA per stitched video.
pub fn posecues(ctx: &Context, stitched: &Path, out: &Path) -> Result<usize> {
    let videos: Vec<StitchedVideo> = read_jsonl(stitched)?;
    let corpus = load_corpus(ctx)?;
    let clips: HashMap<&str, &ClipRecord> = corpus.iter().map(|c| (c.clip_id.as_str(), c)).collect();
    let opts = PoseCueOptions {
        target_fps: ctx.config.stages.target_fps,
        ..PoseCueOptions::default()
    };
    let results = videos
        .par_iter()
        .map(|v| -> Result<Option<(TraceRecord, Vec<QaPair>, ContextRecord)>> {
            let mut parts = Vec::with_capacity(v.segments.len());
            for seg in &v.segments {
                let Some(pose_path) = clips.get(seg.clip_id.as_str()).and_then(|c| c.pose_path.as_ref()) else {
                    tracing::warn!(video = %v.video_id, clip = %seg.clip_id, "no pose sidecar; video skipped");
                    return Ok(None);
                };
                parts.push(PoseSequence::load(&resolve(ctx.corpus_dir(), pose_path))?);
            }
            let poses = PoseSequence::concat(&parts)?;
            let traces = traces_from_poses(&poses, v.fps, &opts)?;
            let context = pose_context(&traces, &ctx.backends)?;
            let qa = pose_qa(&v.video_id, &traces, &v.action_labels().join(", "), &ctx.backends)?;
            Ok(Some((
                TraceRecord {
                    video_id: v.video_id.clone(),
                    traces,
                },
                qa,
                ContextRecord {
                    video_id: v.video_id.clone(),
                    context,
                },
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut traces, mut qa, mut contexts) = (Vec::new(), Vec::new(), Vec::new());
    for (t, q, c) in results.into_iter().flatten() {
        traces.push(t);
        qa.extend(q);
        contexts.push(c);
    }
    write_jsonl(&out.join(POSE_TRACES_FILE), &traces)?;
    write_jsonl(&out.join(POSE_QA_FILE), &qa)?;
    write_jsonl(&out.join(POSE_CONTEXT_FILE), &contexts)?;
    Ok(qa.len())
}

/// Merged QA per video (base, then pose, then object pairs) and the
/// context-augmented copies of the base pairs.
pub fn assemble_qa(
    base_qa: &Path,
    pose_dir: Option<&Path>,
    track_dir: Option<&Path>,
    out: &Path,
) -> Result<(usize, usize)> {
    let base: Vec<QaPair> = read_jsonl(base_qa)?;
    let load_qa = |dir: Option<&Path>, file: &str| -> Result<Vec<QaPair>> {
        dir.map(|d| read_jsonl(&d.join(file))).transpose().map(Option::unwrap_or_default)
    };
    let load_ctx = |dir: Option<&Path>, file: &str| -> Result<HashMap<String, String>> {
        Ok(dir
            .map(|d| read_jsonl::<ContextRecord>(&d.join(file)))
            .transpose()?
            .unwrap_or_default()
            .into_iter()
            .map(|c| (c.video_id, c.context))
            .collect())
    };
    let pose_qa = load_qa(pose_dir, POSE_QA_FILE)?;
    let object_qa = load_qa(track_dir, OBJECT_QA_FILE)?;
    let pose_ctx = load_ctx(pose_dir, POSE_CONTEXT_FILE)?;
    let object_ctx = load_ctx(track_dir, OBJECT_CONTEXT_FILE)?;
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, Vec<&QaPair>> = HashMap::new();
    for p in &base {
        if !grouped.contains_key(p.video_id.as_str()) {
            order.push(&p.video_id);
        }
        grouped.entry(&p.video_id).or_default().push(p);
    }
    let mut merged = Vec::new();
    let mut augmented = Vec::new();
    for vid in order {
        let own: Vec<QaPair> = grouped[vid].iter().map(|p| (*p).clone()).collect();
        merged.extend(own.iter().cloned());
        merged.extend(pose_qa.iter().filter(|p| p.video_id == vid).cloned());
        merged.extend(object_qa.iter().filter(|p| p.video_id == vid).cloned());
        if let Some(c) = pose_ctx.get(vid) {
            augmented.extend(augment_with_context(&own, c, ContextKind::Pose)?);
        }
        if let Some(c) = object_ctx.get(vid) {
            augmented.extend(augment_with_context(&own, c, ContextKind::Object)?);
        }
    }
    write_jsonl(&out.join(QA_FILE), &merged)?;
    write_jsonl(&out.join(QA_AUGMENTED_FILE), &augmented)?;
    Ok((merged.len(), augmented.len()))
}

pub fn package_features(input: &Path, out: &Path) -> Result<usize> {
    crate::pose::package_pose_features(input, out)?;
    Ok(1)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

const QA_FILES: [&str; 4] = [QA_FILE, QA_AUGMENTED_FILE, POSE_QA_FILE, OBJECT_QA_FILE];

/// Runs every manifest invariant over the artifact tree under `dir`.
pub fn validate(ctx: &Context, dir: &Path) -> Result<Vec<Violation>> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    let name = |p: &Path| p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
    let corpus = if corpus_file(ctx).is_file() { Some(load_corpus(ctx)?) } else { None };
    let mut violations = Vec::new();
    let mut video_ids: HashSet<String> = HashSet::new();
    let mut any_stitched = false;
    let mut manifest_dirs: HashSet<PathBuf> = HashSet::new();
    for f in files.iter().filter(|f| name(f) == STITCHED_FILE) {
        any_stitched = true;
        manifest_dirs.insert(base_dir(f).to_path_buf());
        let videos: Vec<StitchedVideo> = read_jsonl(f)?;
        violations.extend(validate_stitched_set(&videos, corpus.as_deref()));
        for v in &videos {
            if !resolve(base_dir(f), &v.video_path).is_file() {
                violations.push(Violation {
                    record: v.video_id.clone(),
                    segment: None,
                    message: format!("media {} missing", v.video_path),
                });
            }
        }
        video_ids.extend(videos.into_iter().map(|v| v.video_id));
    }
    for f in files.iter().filter(|f| QA_FILES.contains(&name(f).as_str())) {
        manifest_dirs.insert(base_dir(f).to_path_buf());
        let pairs: Vec<QaPair> = read_jsonl(f)?;
        let known: HashSet<&str> = if any_stitched {
            video_ids.iter().map(String::as_str).collect()
        } else {
            pairs.iter().map(|p| p.video_id.as_str()).collect()
        };
        violations.extend(validate_qa_pairs(&pairs, &known));
    }
    for f in files.iter().filter(|f| name(f) == TRACK_INDEX_FILE) {
        manifest_dirs.insert(base_dir(f).to_path_buf());
        for r in read_jsonl::<TrackRef>(f)? {
            if let Err(e) = ObjectTrackSet::load(&base_dir(f).join(TRACKS_DIR), &r.video_id, &r.clip_id) {
                violations.push(Violation {
                    record: format!("{}/{}", r.video_id, r.clip_id),
                    segment: None,
                    message: e.to_string(),
                });
            }
        }
    }
    let mut dirs: Vec<_> = manifest_dirs.into_iter().collect();
    dirs.sort();
    for d in dirs {
        if !d.join(PROVENANCE_FILE).is_file() {
            violations.push(Violation {
                record: d.display().to_string(),
                segment: None,
                message: "no provenance record".into(),
            });
        }
    }
    Ok(violations)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub dir: PathBuf,
    pub videos: usize,
    pub mean_actions: f64,
    pub qa_pairs: usize,
    pub augmented_pairs: usize,
    pub min_qa_per_video: usize,
    pub max_qa_per_video: usize,
    /// Model calls not answered by the response cache.
    pub backend_calls: usize,
}

/// Every curation stage end to end in `<out>/pipeline-vN/<stage>`, then the
/// merged QA and a validation pass over the whole tree.
pub fn pipeline(ctx: &Context, overwrite: bool) -> Result<PipelineSummary> {
    let calls_before = ctx.backend_calls();
    let root = versioned_dir(&ctx.config.paths.out, "pipeline", overwrite)?;
    let corpus = corpus_file(ctx);
    let d = |name: &str| root.join(name);
    run_in_dir(ctx, &d("crop"), "crop", std::slice::from_ref(&corpus), |o| crop(ctx, o))?;
    run_in_dir(ctx, &d("sequences"), "sequences", &[], |o| sequences(ctx, o))?;
    let seqs = d("sequences").join(SEQUENCES_FILE);
    let crops = d("crop").join(CROPS_FILE);
    run_in_dir(ctx, &d("stitch"), "stitch", &[seqs.clone(), crops.clone(), corpus.clone()], |o| {
        stitch(ctx, &seqs, Some(&crops), o)
    })?;
    let stitched = d("stitch").join(STITCHED_FILE);
    run_in_dir(ctx, &d("caption"), "caption", std::slice::from_ref(&stitched), |o| caption(ctx, &stitched, o))?;
    let captions = d("caption").join(CAPTIONS_FILE);
    run_in_dir(ctx, &d("describe"), "describe", &[stitched.clone(), captions.clone()], |o| {
        describe(ctx, &stitched, &captions, o)
    })?;
    let dense = d("describe").join(DENSE_FILE);
    run_in_dir(
        ctx,
        &d("qagen"),
        "qagen",
        &[stitched.clone(), captions.clone(), dense.clone()],
        |o| qagen(ctx, &stitched, &captions, &dense, o),
    )?;
    let s = &ctx.config.stages;
    let track_dir = if s.object_qa {
        run_in_dir(ctx, &d("objects"), "objects", std::slice::from_ref(&stitched), |o| objects(ctx, &stitched, o))?;
        let index = d("objects").join(TRACK_INDEX_FILE);
        run_in_dir(ctx, &d("track"), "track", &[index], |o| track(ctx, &d("objects"), o))?;
        Some(d("track"))
    } else {
        None
    };
    let pose_dir = if s.pose_qa {
        run_in_dir(ctx, &d("posecues"), "posecues", &[stitched.clone(), corpus.clone()], |o| {
            posecues(ctx, &stitched, o)
        })?;
        Some(d("posecues"))
    } else {
        None
    };
    let base_qa = d("qagen").join(QA_FILE);
    let mut inputs = vec![corpus, base_qa.clone()];
    inputs.extend(pose_dir.iter().map(|p| p.join(POSE_QA_FILE)));
    inputs.extend(track_dir.iter().map(|p| p.join(OBJECT_QA_FILE)));
    let mut augmented = 0;
    run_in_dir(ctx, &root, "pipeline", &inputs, |o| {
        let (m, a) = assemble_qa(&base_qa, pose_dir.as_deref(), track_dir.as_deref(), o)?;
        augmented = a;
        Ok(m)
    })?;
    let violations = validate(ctx, &root)?;
    if !violations.is_empty() {
        let shown: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
        return Err(Error::Invalid(format!(
            "{} manifest violation(s): {}",
            violations.len(),
            shown.join("; ")
        )));
    }
    let videos: Vec<StitchedVideo> = read_jsonl(&stitched)?;
    let qa: Vec<QaPair> = read_jsonl(&root.join(QA_FILE))?;
    let mut per_video: HashMap<&str, usize> = videos.iter().map(|v| (v.video_id.as_str(), 0)).collect();
    for p in &qa {
        *per_video.entry(p.video_id.as_str()).or_default() += 1;
    }
    Ok(PipelineSummary {
        dir: root.clone(),
        videos: videos.len(),
        mean_actions: videos.iter().map(|v| v.segments.len()).sum::<usize>() as f64 / videos.len().max(1) as f64,
        qa_pairs: qa.len(),
        augmented_pairs: augmented,
        min_qa_per_video: per_video.values().copied().min().unwrap_or(0),
        max_qa_per_video: per_video.values().copied().max().unwrap_or(0),
        backend_calls: ctx.backend_calls() - calls_before,
    })
}

pub fn write_report(out: &Path, report: &EvalReport) -> Result<()> {
    let p = out.join(REPORT_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&p, e))
}

fn ask_candidate(ctx: &Context, videos: &[StitchedVideo], base: &Path, items: &[McqItem]) -> Result<Vec<AnswerRecord>> {
    let by_id: HashMap<&str, &StitchedVideo> = videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    let mut grouped: BTreeMap<&str, Vec<&McqItem>> = BTreeMap::new();
    for item in items {
        grouped.entry(item.video_id.as_str()).or_default().push(item);
    }
    let grouped: Vec<(&str, Vec<&McqItem>)> = grouped.into_iter().collect();
    let answers = grouped
        .par_iter()
        .map(|(vid, items)| -> Result<Vec<AnswerRecord>> {
            let v = by_id.get(vid).ok_or_else(|| missing("stitched video", vid))?;
            let media = ctx.codec.decode(&resolve(base, &v.video_path))?;
            items
                .iter()
                .map(|item| {
                    let visible = item.visible_frames.unwrap_or(media.len()).min(media.len());
                    let frame = &media.frames[visible.saturating_sub(1) / 2];
                    let prompt = render_mcq_prompt(item)?;
                    let reply = ctx.candidate.caption(encode_png(frame), &prompt).unwrap_or_else(|e| {
                        tracing::warn!(item = %item.item_id, error = %e, "candidate failed; scored as unanswered");
                        String::new()
                    });
                    Ok(AnswerRecord {
                        item_id: item.item_id.clone(),
                        reply,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(answers.concat())
}

/// Builds recognition and forecasting items, collects answers (from
/// `answers` or by asking the candidate model) and scores them.
pub fn eval_mcq(ctx: &Context, stitched: &Path, answers: Option<&Path>, out: &Path) -> Result<EvalReport> {
    let videos: Vec<StitchedVideo> = read_jsonl(stitched)?;
    let vocab: Vec<String> = ctx.actions.iter().map(|(_, l)| l.to_string()).collect();
    let seed = derive_seed(ctx.config.master_seed, STREAM_MCQ);
    let k = ctx.config.stages.mcq_options;
    let ar = build_mcq(&videos, &vocab, McqTask::Recognition, k, seed)?;
    let af = build_mcq(&videos, &vocab, McqTask::Forecasting, k, seed)?;
    let items: Vec<McqItem> = ar.iter().chain(&af).cloned().collect();
    write_jsonl(&out.join(MCQ_FILE), &items)?;
    let records = match answers {
        Some(p) => read_jsonl(p)?,
        None => ask_candidate(ctx, &videos, base_dir(stitched), &items)?,
    };
    write_jsonl(&out.join(ANSWERS_FILE), &records)?;
    let report = EvalReport {
        recognition: Some(score_mcq(&ar, &align_answers(&ar, &records))?),
        forecasting: Some(score_mcq(&af, &align_answers(&af, &records))?),
        ..EvalReport::default()
    };
    write_report(out, &report)?;
    Ok(report)
}

/// Reads description pairs from `descriptions`, or builds them: the
/// reference is each video's dense description from `qa`, the generated
/// text comes from the candidate model clip by clip.
pub fn description_pairs(
    ctx: &Context,
    descriptions: Option<&Path>,
    stitched: Option<&Path>,
    qa: Option<&Path>,
    out: &Path,
) -> Result<Vec<DescriptionPair>> {
    let pairs = match (descriptions, stitched, qa) {
        (Some(p), _, _) => read_jsonl(p)?,
        (None, Some(stitched), Some(qa)) => {
            let videos: Vec<StitchedVideo> = read_jsonl(stitched)?;
            let reference: HashMap<String, String> = read_jsonl::<QaPair>(qa)?
                .into_iter()
                .filter(|p| p.qtype == QaType::DenseDescription)
                .map(|p| (p.video_id, p.answer))
                .collect();
            let base = base_dir(stitched);
            videos
                .par_iter()
                .map(|v| {
                    let reference = reference.get(&v.video_id).ok_or_else(|| missing("dense description", &v.video_id))?;
                    let media = ctx.codec.decode(&resolve(base, &v.video_path))?;
                    let d = describe_long_video(&media, ctx.config.stages.clip_seconds, &ctx.candidate, &ctx.backends)?;
                    Ok(DescriptionPair {
                        video_id: v.video_id.clone(),
                        generated: d.summary,
                        reference: reference.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            return Err(Error::Precondition(
                "need a descriptions file, or both a stitched manifest and a QA file".into(),
            ))
        }
    };
    write_jsonl(&out.join(DESCRIPTIONS_FILE), &pairs)?;
    Ok(pairs)
}

pub fn eval_desc(ctx: &Context, pairs: &[DescriptionPair], out: &Path) -> Result<EvalReport> {
    let per_video = pairs
        .par_iter()
        .map(|p| judge_description(&p.video_id, &p.generated, &p.reference, &ctx.judge))
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport {
        judge: Some(JudgeReport {
            corpus: aggregate_judge(&per_video)?,
            per_video,
        }),
        ..EvalReport::default()
    };
    write_report(out, &report)?;
    Ok(report)
}

pub fn eval_mementos(pairs: &[DescriptionPair], out: &Path) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Eval("no description pairs".into()));
    }
    let lex = Lexicon::builtin();
    let per_video: Vec<_> = pairs
        .iter()
        .map(|p| (p.video_id.clone(), mementos_f1(&p.generated, &p.reference, &lex)))
        .collect();
    let scores: Vec<_> = per_video.iter().map(|(_, s)| *s).collect();
    let report = EvalReport {
        mementos: Some(MementosReport {
            corpus: mementos_corpus(&scores),
            per_video,
        }),
        ..EvalReport::default()
    };
    write_report(out, &report)?;
    Ok(report)
}
