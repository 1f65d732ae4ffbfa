use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::crop::{union_crop, CropBox};
use super::sequences::CompositeSequence;
use crate::error::{Error, Result};
use crate::media::{self, VideoCodec, VideoFrames};
use crate::model::{ClipRecord, PoseSequence, Rect, Segment, StitchedVideo};

/// Seed for item `index` of a run seeded with `master`. Independent of
/// processing order, so parallel workers reproduce sequential results.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Resolves a manifest path against the manifest's directory.
pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn video_id(index: usize) -> String {
    format!("vid-{:05}", index + 1)
}

/// Crop box of one clip, as emitted by the crop stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipCrop {
    pub clip_id: String,
    pub crop_box: CropBox,
}

/// Union person crop for every clip with a pose sidecar. Clips without poses
/// or without a detectable person are reported and left uncropped.
pub fn crop_corpus(corpus: &[ClipRecord], corpus_dir: &Path, margin: f64) -> Result<Vec<ClipCrop>> {
    let crops: Vec<Result<Option<ClipCrop>>> = corpus
        .par_iter()
        .map(|clip| {
            let Some(pose_path) = &clip.pose_path else {
                tracing::warn!(clip = %clip.clip_id, "no pose sidecar; clip left uncropped");
                return Ok(None);
            };
            let poses = PoseSequence::load(&resolve(corpus_dir, pose_path))?;
            match union_crop(&poses, margin) {
                Ok(b) => Ok(Some(ClipCrop {
                    clip_id: clip.clip_id.clone(),
                    crop_box: b,
                })),
                Err(Error::NoPersonDetected) => {
                    tracing::warn!(clip = %clip.clip_id, "no person detected; clip left uncropped");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    crops.into_iter().filter_map(Result::transpose).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StitchOptions {
    pub seed: u64,
    pub target_count: usize,
    /// Side of the square output frame.
    pub output_size: u32,
    /// Skipped sequences tolerated per requested video before giving up.
    pub max_skips_per_video: usize,
}

impl Default for StitchOptions {
    fn default() -> Self {
        StitchOptions {
            seed: 0,
            target_count: 100,
            output_size: 512,
            max_skips_per_video: 10,
        }
    }
}

type GroupKey = (String, String);

/// Chooses a sequence, a covering (subject, camera) group and one clip per
/// action for each output video. Media is not touched.
pub fn plan_stitching(
    sequences: &[CompositeSequence],
    corpus: &[ClipRecord],
    opts: &StitchOptions,
) -> Result<Vec<StitchedVideo>> {
    if sequences.is_empty() {
        return Err(Error::Stitch("no composite sequences".into()));
    }
    let mut groups: BTreeMap<GroupKey, BTreeMap<u32, Vec<usize>>> = BTreeMap::new();
    for (i, c) in corpus.iter().enumerate() {
        groups
            .entry((c.subject_id.clone(), c.camera_id.clone()))
            .or_default()
            .entry(c.action_id)
            .or_default()
            .push(i);
    }
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));

    let budget = opts.target_count * (opts.max_skips_per_video + 1);
    let mut out = Vec::with_capacity(opts.target_count);
    let mut uncovered: BTreeMap<String, usize> = BTreeMap::new();
    let mut cursor = 0usize;
    while out.len() < opts.target_count {
        if cursor >= budget {
            let report: Vec<String> = uncovered.iter().map(|(s, n)| format!("{s} x{n}")).collect();
            return Err(Error::Stitch(format!(
                "produced {} of {} videos after {cursor} attempts; uncovered sequences: {}",
                out.len(),
                opts.target_count,
                report.join(", ")
            )));
        }
        let seq = &sequences[order[cursor % order.len()]];
        cursor += 1;
        let mut need: BTreeMap<u32, usize> = BTreeMap::new();
        for a in &seq.action_ids {
            *need.entry(*a).or_default() += 1;
        }
        let covering: Vec<&GroupKey> = groups
            .iter()
            .filter(|(_, by_action)| {
                need.iter()
                    .all(|(a, n)| by_action.get(a).is_some_and(|v| v.len() >= *n))
            })
            .map(|(k, _)| k)
            .collect();
        if covering.is_empty() {
            tracing::warn!(sequence = %seq.sequence_id, "no subject/camera group covers sequence; resampling");
            *uncovered.entry(seq.sequence_id.clone()).or_default() += 1;
            continue;
        }
        let index = out.len();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, index as u64));
        let key = covering[rng.random_range(0..covering.len())];
        let mut pools = groups[key].clone();
        let mut segments = Vec::with_capacity(seq.action_ids.len());
        let mut start = 0usize;
        let mut fps = None;
        for a in &seq.action_ids {
            let pool = pools.get_mut(a).expect("covered");
            let clip = &corpus[pool.swap_remove(rng.random_range(0..pool.len()))];
            match fps {
                None => fps = Some(clip.fps),
                Some(f) if f != clip.fps => {
                    return Err(Error::Stitch(format!(
                        "clip {} has fps {} but the video uses {f}",
                        clip.clip_id, clip.fps
                    )))
                }
                _ => {}
            }
            segments.push(Segment {
                clip_id: clip.clip_id.clone(),
                action_id: clip.action_id,
                action_label: clip.action_label.clone(),
                start_frame: start,
                end_frame: start + clip.num_frames,
            });
            start += clip.num_frames;
        }
        let vid = video_id(index);
        out.push(StitchedVideo {
            video_path: format!("videos/{vid}.adlv"),
            video_id: vid,
            subject_id: key.0.clone(),
            camera_id: key.1.clone(),
            sequence_id: Some(seq.sequence_id.clone()),
            segments,
            fps: fps.expect("sequence is non-empty"),
            crop_box: None,
        });
    }
    Ok(out)
}

/// Where clip media is read from and stitched media is written to.
pub struct MediaIo<'a> {
    pub codec: &'a dyn VideoCodec,
    pub corpus_dir: &'a Path,
    pub out_dir: &'a Path,
}

/// Crops, letterboxes and concatenates each planned video's clips, writing
/// `<out_dir>/<video_path>`. Returns the plan with `crop_box` filled.
pub fn render_stitched(
    plan: Vec<StitchedVideo>,
    corpus: &[ClipRecord],
    crops: &HashMap<String, CropBox>,
    io: &MediaIo<'_>,
    output_size: u32,
) -> Result<Vec<StitchedVideo>> {
    let by_id: HashMap<&str, &ClipRecord> = corpus.iter().map(|c| (c.clip_id.as_str(), c)).collect();
    plan.into_par_iter()
        .map(|mut video| {
            let mut frames = Vec::with_capacity(video.total_frames());
            let mut union: Option<Rect> = None;
            for seg in &video.segments {
                let clip = by_id
                    .get(seg.clip_id.as_str())
                    .ok_or_else(|| Error::Stitch(format!("unknown clip {}", seg.clip_id)))?;
                let decoded = io.codec.decode(&resolve(io.corpus_dir, &clip.video_path))?;
                if decoded.len() != clip.num_frames {
                    return Err(Error::Stitch(format!(
                        "clip {} declares {} frames but its media has {}",
                        clip.clip_id,
                        clip.num_frames,
                        decoded.len()
                    )));
                }
                let rect = match crops.get(&clip.clip_id) {
                    Some(b) => b.rect(),
                    None => {
                        let (w, h) = decoded.dimensions().expect("non-empty");
                        Rect::new(0, 0, w as i64, h as i64)
                    }
                };
                union = Some(union.map_or(rect, |u| u.union(&rect)));
                frames.extend(
                    decoded
                        .frames
                        .iter()
                        .map(|f| media::letterbox(&media::crop(f, &rect), output_size, output_size)),
                );
            }
            let out = VideoFrames {
                fps: video.fps,
                frames,
            };
            io.codec.encode(&resolve(io.out_dir, &video.video_path), &out)?;
            video.crop_box = union;
            Ok(video)
        })
        .collect()
}

/// Plans and renders in one call.
pub fn assign_and_stitch(
    sequences: &[CompositeSequence],
    corpus: &[ClipRecord],
    crops: &HashMap<String, CropBox>,
    io: &MediaIo<'_>,
    opts: &StitchOptions,
) -> Result<Vec<StitchedVideo>> {
    let plan = plan_stitching(sequences, corpus, opts)?;
    render_stitched(plan, corpus, crops, io, opts.output_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_stitched_set;

    fn clip(subject: &str, camera: &str, action: u32, frames: usize) -> ClipRecord {
        ClipRecord {
            clip_id: format!("{subject}{camera}A{action:03}"),
            subject_id: subject.into(),
            camera_id: camera.into(),
            action_id: action,
            action_label: format!("action {action}"),
            video_path: "x.adlv".into(),
            num_frames: frames,
            fps: 30.0,
            pose_path: None,
        }
    }

    fn seq(ids: &[u32]) -> CompositeSequence {
        CompositeSequence {
            sequence_id: "seq-0001".into(),
            action_ids: ids.to_vec(),
        }
    }

    #[test]
    fn prefix_sum_segments() {
        let corpus = vec![clip("S1", "C1", 1, 60), clip("S1", "C1", 3, 90), clip("S1", "C1", 17, 45)];
        let opts = StitchOptions {
            target_count: 1,
            ..Default::default()
        };
        let v = &plan_stitching(&[seq(&[1, 3, 17])], &corpus, &opts).unwrap()[0];
        let spans: Vec<_> = v.segments.iter().map(|s| (s.start_frame, s.end_frame)).collect();
        assert_eq!(spans, vec![(0, 60), (60, 150), (150, 195)]);
        let ids: Vec<_> = v.segments.iter().map(|s| s.action_id).collect();
        assert_eq!(ids, vec![1, 3, 17]);
    }

    #[test]
    fn only_covering_groups_are_used() {
        let mut corpus = vec![clip("S1", "C1", 1, 10), clip("S1", "C1", 2, 10)];
        corpus.push(clip("S2", "C1", 1, 10));
        let opts = StitchOptions {
            target_count: 20,
            ..Default::default()
        };
        let videos = plan_stitching(&[seq(&[1, 2])], &corpus, &opts).unwrap();
        assert!(videos.iter().all(|v| v.subject_id == "S1"));
        assert!(validate_stitched_set(&videos, Some(&corpus)).is_empty());
    }

    #[test]
    fn repeated_action_needs_distinct_clips() {
        let corpus = vec![clip("S1", "C1", 1, 10), clip("S1", "C1", 2, 10)];
        let opts = StitchOptions {
            target_count: 1,
            ..Default::default()
        };
        let err = plan_stitching(&[seq(&[1, 2, 1])], &corpus, &opts).unwrap_err();
        assert!(err.to_string().contains("seq-0001"), "{err}");
    }

    #[test]
    fn plan_is_deterministic() {
        let corpus: Vec<_> = (1..=5)
            .flat_map(|a| [clip("S1", "C1", a, 10), clip("S2", "C2", a, 12)])
            .collect();
        let seqs = [seq(&[1, 2, 3]), seq(&[4, 5])];
        let opts = StitchOptions {
            target_count: 10,
            seed: 3,
            ..Default::default()
        };
        assert_eq!(
            plan_stitching(&seqs, &corpus, &opts).unwrap(),
            plan_stitching(&seqs, &corpus, &opts).unwrap()
        );
    }
}
