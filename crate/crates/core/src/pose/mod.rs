//! Pose cues: peripheral-joint traces, their text serialization, pose
//! context and pose QA, and packaging of precomputed pose features.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotate::{chat_structured, parse_llm_mapping, prompts, sample_frames, Expect, ParseError};
use crate::backends::Backends;
use crate::error::{Error, Result};
use crate::model::{
    read_feature_matrix, write_feature_matrix, FeatureMatrix, PoseSequence, QaPair, QaSource, QaType,
    POSE_FEATURE_DIM, PRODUCER_POSE,
};

pub const MOTION_QUESTION: &str = "What is the motion of the body and joints relative to the actions?";
pub const JOINTS_QUESTION: &str = "Which joints are moving in the video?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeripheralJoint {
    Head,
    RightHand,
    LeftHand,
    RightKnee,
    LeftKnee,
}

impl PeripheralJoint {
    /// Serialization order of the pose string.
    pub const ORDER: [PeripheralJoint; 5] = [
        PeripheralJoint::RightKnee,
        PeripheralJoint::LeftKnee,
        PeripheralJoint::RightHand,
        PeripheralJoint::LeftHand,
        PeripheralJoint::Head,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PeripheralJoint::Head => "head",
            PeripheralJoint::RightHand => "right hand",
            PeripheralJoint::LeftHand => "left hand",
            PeripheralJoint::RightKnee => "right knee",
            PeripheralJoint::LeftKnee => "left knee",
        }
    }
}

/// Skeleton joint index of each peripheral joint. The default is the
/// 25-joint Kinect v2 layout, 0-based, using hand rather than fingertip joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointMap {
    pub head: usize,
    pub right_hand: usize,
    pub left_hand: usize,
    pub right_knee: usize,
    pub left_knee: usize,
}

impl Default for JointMap {
    fn default() -> Self {
        JointMap {
            head: 3,
            right_hand: 11,
            left_hand: 7,
            right_knee: 17,
            left_knee: 13,
        }
    }
}

impl JointMap {
    pub fn index(&self, j: PeripheralJoint) -> usize {
        match j {
            PeripheralJoint::Head => self.head,
            PeripheralJoint::RightHand => self.right_hand,
            PeripheralJoint::LeftHand => self.left_hand,
            PeripheralJoint::RightKnee => self.right_knee,
            PeripheralJoint::LeftKnee => self.left_knee,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeripheralJointTrace {
    pub joint: PeripheralJoint,
    pub observations: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseCueOptions {
    pub target_fps: f64,
    pub joints: JointMap,
}

impl Default for PoseCueOptions {
    fn default() -> Self {
        PoseCueOptions {
            target_fps: 0.5,
            joints: JointMap::default(),
        }
    }
}

/// Image-space coordinates of the five peripheral joints at the caption
/// sampling times. Each observation uses the first skeleton of the nearest
/// frame (earlier on ties) whose five joints all have image coordinates.
pub fn traces_from_poses(poses: &PoseSequence, fps: f64, opts: &PoseCueOptions) -> Result<Vec<PeripheralJointTrace>> {
    let usable: Vec<Option<[(i64, i64); 5]>> = poses
        .frames
        .iter()
        .map(|f| {
            let s = f.skeletons.first()?;
            let mut out = [(0, 0); 5];
            for (k, j) in PeripheralJoint::ORDER.iter().enumerate() {
                let uv = s.joints.get(opts.joints.index(*j))?.uv?;
                out[k] = (uv[0].round() as i64, uv[1].round() as i64);
            }
            Some(out)
        })
        .collect();
    if usable.iter().all(Option::is_none) {
        return Err(Error::NoPersonDetected);
    }
    let picks: Vec<[(i64, i64); 5]> = sample_frames(poses.len().max(1), fps, opts.target_fps)
        .into_iter()
        .map(|t| {
            (0..usable.len())
                .flat_map(|d| [t.checked_sub(d), Some(t + d)])
                .flatten()
                .find_map(|i| usable.get(i).copied().flatten())
                .expect("some frame is usable")
        })
        .collect();
    Ok(PeripheralJoint::ORDER
        .iter()
        .enumerate()
        .map(|(k, j)| PeripheralJointTrace {
            joint: *j,
            observations: picks.iter().map(|p| p[k]).collect(),
        })
        .collect())
}

pub fn build_pose_str(traces: &[PeripheralJointTrace]) -> Result<String> {
    let mut ordered = Vec::with_capacity(5);
    for j in PeripheralJoint::ORDER {
        let t = traces
            .iter()
            .find(|t| t.joint == j)
            .ok_or_else(|| Error::Precondition(format!("missing trace for the {}", j.name())))?;
        ordered.push(t);
    }
    let n = ordered[0].observations.len();
    if n == 0 || ordered.iter().any(|t| t.observations.len() != n) {
        return Err(Error::Precondition("joint traces are empty or ragged".into()));
    }
    let sentences: Vec<String> = (0..n)
        .map(|k| {
            let parts: Vec<String> = ordered
                .iter()
                .map(|t| {
                    let (u, v) = t.observations[k];
                    format!("the {} is at ({u}, {v})", t.joint.name())
                })
                .collect();
            format!("In observation {k}, {}.", parts.join(" and "))
        })
        .collect();
    Ok(sentences.join(" "))
}

/// Inverse of [`build_pose_str`]: per observation, coordinates in
/// serialization order.
pub fn parse_pose_str(text: &str) -> Result<Vec<[(i64, i64); 5]>> {
    let bad = |m: &str| Error::Invalid(format!("pose string: {m}"));
    let mut out = Vec::new();
    for (k, chunk) in text.split("In observation ").skip(1).enumerate() {
        let (idx, rest) = chunk.split_once(", ").ok_or_else(|| bad("missing observation index"))?;
        if idx.parse::<usize>().ok() != Some(k) {
            return Err(bad("observation indices out of order"));
        }
        let rest = rest.trim_end().strip_suffix('.').ok_or_else(|| bad("missing final period"))?;
        let parts: Vec<&str> = rest.split(" and ").collect();
        if parts.len() != 5 {
            return Err(bad("expected five joints"));
        }
        let mut obs = [(0, 0); 5];
        for (slot, (part, joint)) in parts.iter().zip(PeripheralJoint::ORDER).enumerate() {
            let coords = part
                .strip_prefix(&format!("the {} is at (", joint.name()))
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| bad("unexpected joint clause"))?;
            let (u, v) = coords.split_once(", ").ok_or_else(|| bad("bad coordinate pair"))?;
            obs[slot] = (
                u.parse().map_err(|_| bad("bad u"))?,
                v.parse().map_err(|_| bad("bad v"))?,
            );
        }
        out.push(obs);
    }
    if out.is_empty() {
        return Err(bad("no observations"));
    }
    Ok(out)
}

/// Joint-motion description used as the pose context prefix.
pub fn pose_context(traces: &[PeripheralJointTrace], backends: &Backends) -> Result<String> {
    let pose_str = build_pose_str(traces)?;
    let messages = prompts::pose_motion_messages(&pose_str)?;
    let reply = chat_structured(backends, &messages, |r| {
        let r = r.trim();
        if r.is_empty() {
            Err(ParseError::Unparseable(r.to_string()))
        } else {
            Ok(r.to_string())
        }
    })?;
    let lower = reply.to_lowercase();
    let missing: Vec<&str> = PeripheralJoint::ORDER
        .iter()
        .map(|j| j.name())
        .filter(|n| !lower.contains(n))
        .collect();
    if !missing.is_empty() {
        tracing::warn!(?missing, "pose context does not mention every joint");
    }
    Ok(reply)
}

/// Two pose QA pairs via a description-then-questions chain. Empty LLM
/// questions fall back to the canonical question texts.
pub fn pose_qa(
    video_id: &str,
    traces: &[PeripheralJointTrace],
    action_label: &str,
    backends: &Backends,
) -> Result<Vec<QaPair>> {
    if action_label.trim().is_empty() {
        return Err(Error::Precondition("empty action label".into()));
    }
    let pose_str = build_pose_str(traces)?;
    let describe = prompts::pose_describe_messages(action_label, &pose_str)?;
    let description = chat_structured(backends, &describe, |r| {
        let r = r.trim();
        if r.is_empty() {
            Err(ParseError::Unparseable(r.to_string()))
        } else {
            Ok(r.to_string())
        }
    })?;
    let ask = prompts::pose_qa_messages(action_label, &description)?;
    let items = chat_structured(backends, &ask, |r| parse_llm_mapping(r, Expect::List(2)))?;
    let canonical = [MOTION_QUESTION, JOINTS_QUESTION];
    items
        .into_iter()
        .zip(canonical)
        .map(|(item, fallback)| {
            if item.a.trim().is_empty() {
                return Err(Error::LlmReply {
                    attempts: 1,
                    reason: "empty pose answer".into(),
                    raw: item.a,
                });
            }
            let (q, source) = if item.q.trim().is_empty() {
                (fallback.to_string(), QaSource::Template)
            } else {
                (item.q, QaSource::Llm)
            };
            Ok(QaPair::new(video_id, q, item.a, QaType::PoseQa, source))
        })
        .collect()
}

/// Validates a pose feature file and re-emits it under `out_dir` with the
/// pose producer stamped. Data bytes are copied unchanged.
pub fn package_pose_features(input: &Path, out_dir: &Path) -> Result<PathBuf> {
    let m = read_feature_matrix(input).map_err(|e| Error::Feature(format!("{}: {e}", input.display())))?;
    if m.dim != POSE_FEATURE_DIM {
        return Err(Error::Feature(format!(
            "{}: pose features must have dim {POSE_FEATURE_DIM}, found {}",
            input.display(),
            m.dim
        )));
    }
    let mut meta = m.meta.clone();
    meta.producer = PRODUCER_POSE.into();
    let out = FeatureMatrix::new(m.rows, m.dim, m.data, meta)?;
    let name = input
        .file_name()
        .ok_or_else(|| Error::Precondition(format!("{}: not a file path", input.display())))?;
    let path = out_dir.join(name);
    write_feature_matrix(&out, &path)?;
    Ok(path)
}
