//! Shared data model: clip and stitched-video manifests, pose sequences,
//! instruction-tuning QA records and binary feature matrices.

mod actions;
mod features;
mod manifest;
mod pose;
mod validate;

use serde::{Deserialize, Serialize};

pub use actions::ActionTable;
pub use features::{
    read_feature_matrix, sidecar_path, write_feature_matrix, FeatureMatrix, FeatureMeta,
    PRODUCER_OBJECT, PRODUCER_POSE,
};
pub use manifest::{load_corpus_manifest, read_jsonl, write_corpus_manifest, write_jsonl};
pub use pose::{Joint, PoseFrame, PoseSequence, Skeleton};
pub use validate::{validate_qa_pairs, validate_stitched, validate_stitched_set, Violation};

/// Object feature width produced by the open-vocabulary localizer.
pub const OBJECT_FEATURE_DIM: usize = 512;
/// Pose feature width produced by the pose-language encoder.
pub const POSE_FEATURE_DIM: usize = 216;

/// One trimmed single-action clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub subject_id: String,
    pub camera_id: String,
    pub action_id: u32,
    pub action_label: String,
    pub video_path: String,
    pub num_frames: usize,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_path: Option<String>,
}

impl ClipRecord {
    pub fn check(&self) -> Result<(), String> {
        if self.clip_id.is_empty() {
            return Err("clip_id is empty".into());
        }
        if self.num_frames == 0 {
            return Err(format!("{}: num_frames must be >= 1", self.clip_id));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(format!("{}: fps must be > 0", self.clip_id));
        }
        if !(1..=120).contains(&self.action_id) {
            return Err(format!(
                "{}: action_id {} outside [1,120]",
                self.clip_id, self.action_id
            ));
        }
        Ok(())
    }
}

/// Pixel rectangle; `x2`/`y2` are exclusive edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl Rect {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Self {
        Rect { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> i64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> i64 {
        self.y2 - self.y1
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }

    pub fn contains_point(&self, u: f64, v: f64) -> bool {
        u >= self.x1 as f64 && u <= self.x2 as f64 && v >= self.y1 as f64 && v <= self.y2 as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub clip_id: String,
    pub action_id: u32,
    pub action_label: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_frame.saturating_sub(self.start_frame)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A composite video built by concatenating same-subject, same-camera clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchedVideo {
    pub video_id: String,
    pub subject_id: String,
    pub camera_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_id: Option<String>,
    pub segments: Vec<Segment>,
    pub video_path: String,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_box: Option<Rect>,
}

impl StitchedVideo {
    pub fn total_frames(&self) -> usize {
        self.segments.last().map(|s| s.end_frame).unwrap_or(0)
    }

    pub fn action_labels(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.action_label.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaType {
    DenseDescription,
    Summary,
    Detail,
    ActionSequence,
    PoseQa,
    ObjectQa,
    PoseContextAugmented,
    ObjectContextAugmented,
}

impl QaType {
    pub fn is_context_augmented(self) -> bool {
        matches!(
            self,
            QaType::PoseContextAugmented | QaType::ObjectContextAugmented
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaSource {
    Llm,
    Template,
}

/// One instruction-tuning question/answer pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub video_id: String,
    pub question: String,
    pub answer: String,
    pub qtype: QaType,
    pub source: QaSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_prefix: Option<String>,
}

impl QaPair {
    pub fn new(
        video_id: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
        qtype: QaType,
        source: QaSource,
    ) -> Self {
        QaPair {
            video_id: video_id.into(),
            question: question.into(),
            answer: answer.into(),
            qtype,
            source,
            context_prefix: None,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.question.trim().is_empty() {
            return Err(format!("{}: empty question", self.video_id));
        }
        if self.answer.trim().is_empty() {
            return Err(format!("{}: empty answer", self.video_id));
        }
        if self.qtype.is_context_augmented() {
            match &self.context_prefix {
                Some(prefix) if !prefix.is_empty() && self.question.starts_with(prefix.as_str()) => {}
                _ => {
                    return Err(format!(
                        "{}: context-augmented question must start with a non-empty context_prefix",
                        self.video_id
                    ))
                }
            }
        }
        Ok(())
    }
}
