//! Action-conditioned object cues: detection, relevance filtering,
//! localization with features, similarity tracking, and object QA/context.

mod track;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use track::{cosine, link_frames, link_transition, LinkMode};

use crate::annotate::{chat_structured, prompts, uniform_indices, ParseError};
use crate::backends::Backends;
use crate::error::{Error, Result};
use crate::media::{encode_png, Frame};
use crate::model::{
    read_feature_matrix, write_feature_matrix, FeatureMatrix, FeatureMeta, QaPair, QaSource, QaType,
    Rect, OBJECT_FEATURE_DIM,
};

/// Frames sampled per clip for detection and localization.
pub const OBJECT_SAMPLES: usize = 8;
pub const DEFAULT_SCORE_FLOOR: f64 = 0.1;
pub const RELEVANT_OBJECTS_QUESTION: &str = "What are the relevant objects in the scene?";
pub const CONTEXT_PREFIX: &str = "The relevant objects in the video are: ";

pub fn trajectory_question(b: &Rect) -> String {
    format!(
        "What is the object in the trajectory [{},{},{},{}]?",
        b.x1, b.y1, b.x2, b.y2
    )
}

/// Relevant objects of one clip: labels, per-frame boxes, features and links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrackSet {
    pub video_id: String,
    pub clip_id: String,
    pub labels: Vec<String>,
    /// Absolute frame indices in the stitched video.
    pub frames: Vec<usize>,
    pub frame_w: u32,
    pub frame_h: u32,
    /// `boxes[t][i]`: box of object `i` in sampled frame `t`, absent if not found.
    pub boxes: Vec<Vec<Option<Rect>>>,
    /// `links[t][i]`: index of object `i`'s match in frame `t + 1`.
    #[serde(default)]
    pub links: Vec<Vec<Option<usize>>>,
    /// Row `t * n + i` belongs to object `i` in frame `t`; absent rows are zero.
    #[serde(skip)]
    pub features: Option<FeatureMatrix>,
}

impl ObjectTrackSet {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: String| Err(Error::Invalid(format!("{}/{}: {m}", self.video_id, self.clip_id)));
        if self.boxes.len() != self.frames.len() || self.boxes.iter().any(|r| r.len() != n) {
            return bad("boxes do not match frames x labels".into());
        }
        for b in self.boxes.iter().flatten().flatten() {
            if !(0 <= b.x1 && b.x1 < b.x2 && b.x2 <= self.frame_w as i64 && 0 <= b.y1 && b.y1 < b.y2 && b.y2 <= self.frame_h as i64) {
                return bad(format!("box {b:?} outside the frame"));
            }
        }
        if let Some(f) = &self.features {
            if f.rows != self.frames.len() * n {
                return bad(format!("{} feature rows for {} frames x {n} objects", f.rows, self.frames.len()));
            }
        }
        if !self.links.is_empty() && self.links.len() + 1 != self.frames.len() {
            return bad("one link row per frame transition expected".into());
        }
        for (t, row) in self.links.iter().enumerate() {
            for (i, l) in row.iter().enumerate() {
                if let Some(j) = l {
                    if *j >= n || self.boxes[t + 1][*j].is_none() || self.boxes[t][i].is_none() {
                        return bad(format!("link {i}->{j} at transition {t} is not between present objects"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Feature rows per frame, `None` where the object is absent.
    pub fn feature_rows(&self) -> Result<Vec<Vec<Option<&[f32]>>>> {
        let f = self
            .features
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("{}: no features loaded", self.clip_id)))?;
        let n = self.n();
        Ok((0..self.frames.len())
            .map(|t| {
                (0..n)
                    .map(|i| self.boxes[t][i].map(|_| f.row(t * n + i)))
                    .collect()
            })
            .collect())
    }

    pub fn track_path(dir: &Path, video_id: &str, clip_id: &str) -> PathBuf {
        dir.join(video_id).join(format!("{clip_id}.json"))
    }

    pub fn feature_path(dir: &Path, video_id: &str, clip_id: &str) -> PathBuf {
        dir.join(video_id).join(format!("{clip_id}.features.f32"))
    }

    /// Writes `<dir>/<video_id>/<clip_id>.json` plus its feature pair.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.check()?;
        let path = Self::track_path(dir, &self.video_id, &self.clip_id);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))?;
        if let Some(f) = &self.features {
            write_feature_matrix(f, &Self::feature_path(dir, &self.video_id, &self.clip_id))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, video_id: &str, clip_id: &str) -> Result<Self> {
        let path = Self::track_path(dir, video_id, clip_id);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut ts: ObjectTrackSet = serde_json::from_str(&text)?;
        let fpath = Self::feature_path(dir, video_id, clip_id);
        if fpath.exists() {
            ts.features = Some(read_feature_matrix(&fpath)?);
        }
        ts.check()?;
        Ok(ts)
    }
}

/// Union of per-frame detections over 8 uniformly sampled frames,
/// case-folded and deduplicated in first-seen order.
pub fn detect_objects(frames: &[Frame], backends: &Backends) -> Result<Vec<String>> {
    if frames.is_empty() {
        return Err(Error::Precondition("clip has no frames".into()));
    }
    let mut indices = uniform_indices(frames.len(), OBJECT_SAMPLES);
    indices.dedup();
    let mut names: Vec<String> = Vec::new();
    let mut failures = 0;
    for &i in &indices {
        match backends.detect(vec![encode_png(&frames[i])]) {
            Ok(found) => {
                for n in found {
                    let n = n.trim().to_lowercase();
                    if !n.is_empty() && !names.contains(&n) {
                        names.push(n);
                    }
                }
            }
            Err(e) => {
                tracing::warn!(frame = i, error = %e, "detection failed; frame skipped");
                failures += 1;
            }
        }
    }
    if failures == indices.len() {
        return Err(Error::Precondition("object detection failed on every sampled frame".into()));
    }
    Ok(names)
}

/// Parses the relevance reply: `None`, or comma-separated names kept only
/// when present in `found` (case-insensitive), in reply order.
pub fn parse_relevant_reply(reply: &str, found: &[String]) -> Vec<String> {
    let trimmed = reply.trim().trim_end_matches('.').trim();
    if trimmed.eq_ignore_ascii_case("none") || trimmed.trim_matches('"').eq_ignore_ascii_case("none") {
        return Vec::new();
    }
    let mut out: Vec<String> = Vec::new();
    for part in trimmed.split([',', '\n']) {
        let name = part
            .trim()
            .trim_matches(|c: char| matches!(c, '"' | '\'' | '[' | ']' | '.' | '-' | '*'))
            .trim()
            .to_lowercase();
        if name.is_empty() || name == "none" {
            continue;
        }
        match found.iter().find(|f| f.to_lowercase() == name) {
            Some(f) if !out.contains(f) => out.push(f.clone()),
            Some(_) => {}
            None => tracing::warn!(object = %name, "dropping object not among the detections"),
        }
    }
    out
}

pub fn filter_relevant(action_label: &str, found: &[String], backends: &Backends) -> Result<Vec<String>> {
    if found.is_empty() {
        return Ok(Vec::new());
    }
    let messages = prompts::relevant_objects_messages(action_label, &found.join(", "))?;
    chat_structured(backends, &messages, |reply| {
        if reply.trim().is_empty() {
            Err(ParseError::Unparseable(reply.to_string()))
        } else {
            Ok(parse_relevant_reply(reply, found))
        }
    })
}

/// Boxes and unit-norm features for `labels` on the 8 sampled frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Localized {
    /// Sampled indices relative to the clip.
    pub frames: Vec<usize>,
    pub boxes: Vec<Vec<Option<Rect>>>,
    pub features: FeatureMatrix,
}

pub fn localize_and_embed(
    frames: &[Frame],
    labels: &[String],
    backends: &Backends,
    score_floor: f64,
    meta: FeatureMeta,
) -> Result<Localized> {
    if labels.is_empty() {
        return Err(Error::Precondition("no labels to localize".into()));
    }
    if frames.is_empty() {
        return Err(Error::Precondition("clip has no frames".into()));
    }
    let n = labels.len();
    let indices = uniform_indices(frames.len(), OBJECT_SAMPLES);
    let mut features = FeatureMatrix::zeros(indices.len() * n, OBJECT_FEATURE_DIM, meta);
    let mut boxes = Vec::with_capacity(indices.len());
    for (t, &idx) in indices.iter().enumerate() {
        let frame = &frames[idx];
        let (w, h) = frame.dimensions();
        let resp = backends.localize(encode_png(frame), labels)?;
        let mut row = vec![None; n];
        for (i, label) in labels.iter().enumerate() {
            let best = (0..resp.labels.len())
                .filter(|&k| resp.labels[k].eq_ignore_ascii_case(label) && resp.scores[k] >= score_floor)
                .fold(None::<usize>, |b, k| match b {
                    Some(b) if resp.scores[b] >= resp.scores[k] => Some(b),
                    _ => Some(k),
                });
            let Some(k) = best else { continue };
            let [x1, y1, x2, y2] = resp.boxes[k];
            let rect = Rect::new(
                (x1.round() as i64).clamp(0, w as i64),
                (y1.round() as i64).clamp(0, h as i64),
                (x2.round() as i64).clamp(0, w as i64),
                (y2.round() as i64).clamp(0, h as i64),
            );
            if rect.width() <= 0 || rect.height() <= 0 {
                tracing::warn!(label = %label, frame = idx, "degenerate box treated as absent");
                continue;
            }
            let feat = &resp.features[k];
            if feat.len() != OBJECT_FEATURE_DIM {
                return Err(Error::Feature(format!(
                    "localizer returned a {}-dim feature, expected {OBJECT_FEATURE_DIM}",
                    feat.len()
                )));
            }
            let norm = feat.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                tracing::warn!(label = %label, frame = idx, "zero or non-finite feature treated as absent");
                continue;
            }
            for (dst, v) in features.row_mut(t * n + i).iter_mut().zip(feat) {
                *dst = (*v as f64 / norm) as f32;
            }
            row[i] = Some(rect);
        }
        boxes.push(row);
    }
    if boxes.iter().flatten().all(Option::is_none) {
        return Err(Error::Precondition("objects not localizable".into()));
    }
    Ok(Localized {
        frames: indices,
        boxes,
        features,
    })
}

/// Fills `links` by cosine matching between consecutive sampled frames.
pub fn track_by_similarity(ts: &ObjectTrackSet, min_sim: f64, mode: LinkMode) -> Result<ObjectTrackSet> {
    let rows = ts.feature_rows()?;
    let with_objects = rows.iter().filter(|r| r.iter().any(Option::is_some)).count();
    if with_objects < 2 {
        return Err(Error::Precondition(format!(
            "{}: tracking needs objects in at least two frames",
            ts.clip_id
        )));
    }
    let links = link_frames(&rows, min_sim, mode);
    Ok(ObjectTrackSet {
        links,
        ..ts.clone()
    })
}

/// Labels merged across a video's clips, first-seen order.
pub fn merged_labels(tracks: &[ObjectTrackSet]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for l in tracks.iter().flat_map(|t| &t.labels) {
        if !out.contains(l) {
            out.push(l.clone());
        }
    }
    out
}

/// The two object questions and the object context string for a video.
/// The trajectory question quotes the first present box of the most
/// relevant object that was localized.
pub fn object_qa_and_context(video_id: &str, tracks: &[ObjectTrackSet]) -> Result<(Vec<QaPair>, String)> {
    let labels = merged_labels(tracks);
    if labels.is_empty() {
        return Err(Error::Precondition(format!("{video_id}: no relevant objects")));
    }
    let first_box = |label: &String| {
        tracks.iter().find_map(|t| {
            let i = t.labels.iter().position(|l| l == label)?;
            t.boxes.iter().find_map(|row| row[i])
        })
    };
    let (label, rect) = labels
        .iter()
        .find_map(|l| first_box(l).map(|b| (l, b)))
        .ok_or_else(|| Error::Precondition(format!("{video_id}: no localized object boxes")))?;
    let joined = labels.join(", ");
    let pairs = vec![
        QaPair::new(video_id, RELEVANT_OBJECTS_QUESTION, &joined, QaType::ObjectQa, QaSource::Template),
        QaPair::new(video_id, trajectory_question(&rect), label, QaType::ObjectQa, QaSource::Template),
    ];
    Ok((pairs, format!("{CONTEXT_PREFIX}{joined}")))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use image::RgbImage;
    use serde_json::json;

    use super::*;
    use crate::backends::{BackendClient, FixtureTable, Matcher, MockReply, MockTransport, Role};

    fn backends(t: FixtureTable) -> Backends {
        Backends::new(BackendClient::new(Arc::new(MockTransport::new(t))))
    }

    fn frames(n: usize) -> Vec<Frame> {
        (0..n).map(|i| RgbImage::from_pixel(100, 80, image::Rgb([i as u8, 0, 0]))).collect()
    }

    fn meta() -> FeatureMeta {
        FeatureMeta {
            producer: crate::model::PRODUCER_OBJECT.into(),
            model_id: "owlv2-large".into(),
            subject_id: "c1".into(),
        }
    }

    #[test]
    fn detection_dedups_and_case_folds() {
        let t = FixtureTable::new().rule(
            Matcher::Role(Role::Detect),
            MockReply::func(|req| {
                let px = crate::media::decode_png(&req.media[0]).unwrap().get_pixel(0, 0)[0];
                let names: &[&str] = if px == 0 { &["Chair", "chair"] } else { &["table"] };
                Ok(serde_json::to_vec(&json!({ "objects": names })).unwrap())
            }),
        );
        assert_eq!(detect_objects(&frames(16), &backends(t)).unwrap(), vec!["chair", "table"]);
    }

    #[test]
    fn empty_detections() {
        let t = FixtureTable::new().rule(Matcher::Role(Role::Detect), MockReply::objects::<&str>(&[]));
        assert!(detect_objects(&frames(8), &backends(t)).unwrap().is_empty());
        assert!(detect_objects(&frames(8), &backends(FixtureTable::new())).is_err());
    }

    fn found() -> Vec<String> {
        ["plant", "chair", "bottle", "table"].map(String::from).to_vec()
    }

    #[test]
    fn drinking_keeps_bottle() {
        let t = FixtureTable::new().rule(
            Matcher::Contains("relevant to the action \"Drinking\"".into()),
            MockReply::chat("bottle"),
        );
        assert_eq!(filter_relevant("Drinking", &found(), &backends(t)).unwrap(), vec!["bottle"]);
    }

    #[test]
    fn relevance_reply_parsing() {
        assert!(parse_relevant_reply("None", &found()).is_empty());
        assert!(parse_relevant_reply("\"None\".", &found()).is_empty());
        let f = vec!["bottle".to_string()];
        assert_eq!(parse_relevant_reply("bottle, goblet", &f), vec!["bottle"]);
        assert_eq!(parse_relevant_reply("Table, chair.", &found()), vec!["table", "chair"]);
    }

    #[test]
    fn no_found_objects_skips_the_call() {
        assert!(filter_relevant("Drinking", &[], &backends(FixtureTable::new())).unwrap().is_empty());
    }

    fn unit(i: usize) -> Vec<f32> {
        let mut v = vec![0.0; OBJECT_FEATURE_DIM];
        v[i] = 3.0;
        v
    }

    fn localizer() -> FixtureTable {
        FixtureTable::new().rule(
            Matcher::Role(Role::Localize),
            MockReply::json(json!({
                "boxes": [[12.0, 40.0, 80.0, 120.0], [1.0, 1.0, 5.0, 5.0], [0.0, 0.0, 10.0, 10.0]],
                "features": [unit(0), unit(1), unit(2)],
                "labels": ["bottle", "table", "bottle"],
                "scores": [0.9, 0.5, 0.3],
            })),
        )
    }

    #[test]
    fn localization_shapes_and_norms() {
        let labels = vec!["bottle".to_string(), "table".to_string()];
        let loc = localize_and_embed(&frames(16), &labels, &backends(localizer()), 0.1, meta()).unwrap();
        assert_eq!((loc.features.rows, loc.features.dim), (16, 512));
        // Clamped to the 100x80 frame.
        assert_eq!(loc.boxes[0][0], Some(Rect::new(12, 40, 80, 80)));
        for r in 0..16 {
            let norm: f64 = loc.features.row(r).iter().map(|v| (*v as f64).powi(2)).sum();
            assert!((norm - 1.0).abs() < 1e-6);
        }
        let cup = vec!["cup".to_string()];
        assert!(localize_and_embed(&frames(16), &cup, &backends(localizer()), 0.1, meta()).is_err());
    }

    #[test]
    fn tracking_identity_and_file_round_trip() {
        let labels = vec!["bottle".to_string(), "table".to_string()];
        let loc = localize_and_embed(&frames(16), &labels, &backends(localizer()), 0.1, meta()).unwrap();
        let ts = ObjectTrackSet {
            video_id: "vid-00001".into(),
            clip_id: "c1".into(),
            labels,
            frames: loc.frames,
            frame_w: 100,
            frame_h: 80,
            boxes: loc.boxes,
            links: vec![],
            features: Some(loc.features),
        };
        let tracked = track_by_similarity(&ts, 0.0, LinkMode::Literal).unwrap();
        assert_eq!(tracked.links, vec![vec![Some(0), Some(1)]; 7]);
        let dir = tempfile::tempdir().unwrap();
        tracked.save(dir.path()).unwrap();
        assert_eq!(ObjectTrackSet::load(dir.path(), "vid-00001", "c1").unwrap(), tracked);

        let (qa, ctx) = object_qa_and_context("vid-00001", &[tracked]).unwrap();
        assert_eq!(qa[0].answer, "bottle, table");
        assert_eq!(qa[1].question, "What is the object in the trajectory [12,40,80,80]?");
        assert_eq!(qa[1].answer, "bottle");
        assert_eq!(ctx, "The relevant objects in the video are: bottle, table");
    }

    #[test]
    fn qa_requires_labels() {
        assert!(object_qa_and_context("v", &[]).is_err());
    }
}
