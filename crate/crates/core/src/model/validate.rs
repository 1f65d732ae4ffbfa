use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{ClipRecord, QaPair, StitchedVideo};

/// One failed manifest invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub record: String,
    pub segment: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.segment {
            Some(s) => write!(f, "{} segment {}: {}", self.record, s, self.message),
            None => write!(f, "{}: {}", self.record, self.message),
        }
    }
}

/// Checks tiling and, when the corpus is supplied, subject/camera coherence.
pub fn validate_stitched(
    video: &StitchedVideo,
    clips: Option<&HashMap<&str, &ClipRecord>>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |segment: Option<usize>, message: String| {
        out.push(Violation {
            record: video.video_id.clone(),
            segment,
            message,
        })
    };
    if video.segments.is_empty() {
        push(None, "no segments".into());
    }
    if !(video.fps.is_finite() && video.fps > 0.0) {
        push(None, format!("fps {} must be > 0", video.fps));
    }
    let mut expected_start = 0usize;
    for (k, seg) in video.segments.iter().enumerate() {
        if seg.start_frame != expected_start {
            push(
                Some(k),
                format!(
                    "starts at frame {} but previous segment ended at {}",
                    seg.start_frame, expected_start
                ),
            );
        }
        if seg.end_frame <= seg.start_frame {
            push(
                Some(k),
                format!("empty range [{}, {})", seg.start_frame, seg.end_frame),
            );
        }
        expected_start = seg.end_frame;
        if let Some(index) = clips {
            match index.get(seg.clip_id.as_str()) {
                None => push(Some(k), format!("clip {} not in corpus", seg.clip_id)),
                Some(clip) => {
                    if clip.subject_id != video.subject_id || clip.camera_id != video.camera_id {
                        push(
                            Some(k),
                            format!(
                                "clip {} is subject {} camera {}, video is subject {} camera {}",
                                clip.clip_id,
                                clip.subject_id,
                                clip.camera_id,
                                video.subject_id,
                                video.camera_id
                            ),
                        );
                    }
                    if clip.action_id != seg.action_id {
                        push(
                            Some(k),
                            format!(
                                "segment action {} but clip {} is action {}",
                                seg.action_id, clip.clip_id, clip.action_id
                            ),
                        );
                    }
                }
            }
        }
    }
    out
}

pub fn validate_stitched_set(
    videos: &[StitchedVideo],
    clips: Option<&[ClipRecord]>,
) -> Vec<Violation> {
    let index: Option<HashMap<&str, &ClipRecord>> =
        clips.map(|c| c.iter().map(|r| (r.clip_id.as_str(), r)).collect());
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for v in videos {
        if !seen.insert(v.video_id.as_str()) {
            out.push(Violation {
                record: v.video_id.clone(),
                segment: None,
                message: "duplicate video_id".into(),
            });
        }
        out.extend(validate_stitched(v, index.as_ref()));
    }
    out
}

pub fn validate_qa_pairs(pairs: &[QaPair], video_ids: &HashSet<&str>) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        if !video_ids.contains(p.video_id.as_str()) {
            out.push(Violation {
                record: format!("qa[{i}]"),
                segment: None,
                message: format!("unknown video_id {}", p.video_id),
            });
        }
        if let Err(message) = p.check() {
            out.push(Violation {
                record: format!("qa[{i}]"),
                segment: None,
                message,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QaSource, QaType, Segment};

    fn seg(clip: &str, a: u32, s: usize, e: usize) -> Segment {
        Segment {
            clip_id: clip.into(),
            action_id: a,
            action_label: format!("a{a}"),
            start_frame: s,
            end_frame: e,
        }
    }

    fn video(segments: Vec<Segment>) -> StitchedVideo {
        StitchedVideo {
            video_id: "v1".into(),
            subject_id: "S001".into(),
            camera_id: "C001".into(),
            sequence_id: None,
            segments,
            video_path: "v1.adlv".into(),
            fps: 30.0,
            crop_box: None,
        }
    }

    #[test]
    fn tiling_accepts_prefix_sums() {
        let v = video(vec![seg("a", 1, 0, 60), seg("b", 3, 60, 150), seg("c", 17, 150, 195)]);
        assert!(validate_stitched(&v, None).is_empty());
        assert_eq!(v.total_frames(), 195);
    }

    #[test]
    fn tiling_gap_names_segment() {
        let v = video(vec![seg("a", 1, 0, 60), seg("b", 3, 61, 150)]);
        let errs = validate_stitched(&v, None);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].segment, Some(1));
        assert!(errs[0].to_string().starts_with("v1 segment 1"));
    }

    #[test]
    fn nonzero_first_start_rejected() {
        let v = video(vec![seg("a", 1, 5, 60)]);
        assert_eq!(validate_stitched(&v, None)[0].segment, Some(0));
    }

    #[test]
    fn mixed_subjects_rejected() {
        let mk = |id: &str, subj: &str| ClipRecord {
            clip_id: id.into(),
            subject_id: subj.into(),
            camera_id: "C001".into(),
            action_id: 1,
            action_label: "a1".into(),
            video_path: String::new(),
            num_frames: 60,
            fps: 30.0,
            pose_path: None,
        };
        let clips = vec![mk("a", "S001"), mk("b", "S002")];
        let v = video(vec![seg("a", 1, 0, 60), seg("b", 1, 60, 120)]);
        let errs = validate_stitched_set(&[v], Some(&clips));
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].segment, Some(1));
    }

    #[test]
    fn qa_context_prefix_checked() {
        let ids: HashSet<&str> = ["v1"].into_iter().collect();
        let mut p = QaPair::new("v1", "ctx q?", "a", QaType::PoseContextAugmented, QaSource::Llm);
        assert_eq!(validate_qa_pairs(&[p.clone()], &ids).len(), 1);
        p.context_prefix = Some("ctx".into());
        assert!(validate_qa_pairs(&[p.clone()], &ids).is_empty());
        p.video_id = "nope".into();
        assert_eq!(validate_qa_pairs(&[p], &ids).len(), 1);
    }
}
