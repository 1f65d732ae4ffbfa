use serde::{Deserialize, Serialize};

use super::parse::{parse_llm_mapping, Expect};
use super::{chat_structured, prompts, sampling};
use crate::backends::Backends;
use crate::error::{Error, Result};
use crate::media::{encode_png, VideoFrames};
use crate::model::{QaPair, QaSource, QaType, StitchedVideo};

/// Soft cap on dense-description length; exceeding it only logs.
pub const DENSE_WORD_LIMIT: usize = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionEntry {
    pub frame: usize,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionDict {
    pub video_id: String,
    pub sample_rate_fps: f64,
    pub entries: Vec<CaptionEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_frames: Vec<usize>,
}

impl CaptionDict {
    /// `In frame <idx>: <caption>` lines.
    pub fn mega_caption(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("In frame {}: {}", e.frame, e.caption))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptionOptions {
    pub target_fps: f64,
    /// A video fails when more than this fraction of its frames fail.
    pub max_failed_fraction: f64,
}

impl Default for CaptionOptions {
    fn default() -> Self {
        CaptionOptions {
            target_fps: 0.5,
            max_failed_fraction: 0.5,
        }
    }
}

/// Captions the sampled frames of `media`; each prompt's reply is joined
/// with `" | "` into one entry.
pub fn caption_video(
    video: &StitchedVideo,
    media: &VideoFrames,
    backends: &Backends,
    prompts: &[String],
    opts: CaptionOptions,
) -> Result<CaptionDict> {
    if prompts.is_empty() {
        return Err(Error::Precondition("no caption prompts".into()));
    }
    if media.is_empty() {
        return Err(Error::Media(format!("{}: no frames", video.video_id)));
    }
    let indices = sampling::sample_frames(media.len(), video.fps, opts.target_fps);
    let mut entries = Vec::with_capacity(indices.len());
    let mut failed = Vec::new();
    for &idx in &indices {
        let png = encode_png(&media.frames[idx]);
        let replies: Result<Vec<String>, _> = prompts
            .iter()
            .map(|p| backends.caption(png.clone(), p))
            .collect();
        match replies {
            Ok(r) if r.iter().all(|c| !c.trim().is_empty()) => entries.push(CaptionEntry {
                frame: idx,
                caption: r.join(" | "),
            }),
            Ok(_) => {
                tracing::warn!(video = %video.video_id, frame = idx, "empty caption");
                failed.push(idx);
            }
            Err(e) => {
                tracing::warn!(video = %video.video_id, frame = idx, error = %e, "caption failed");
                failed.push(idx);
            }
        }
    }
    if failed.len() as f64 > opts.max_failed_fraction * indices.len() as f64 || entries.is_empty() {
        return Err(Error::Precondition(format!(
            "{}: {} of {} frames failed captioning",
            video.video_id,
            failed.len(),
            indices.len()
        )));
    }
    Ok(CaptionDict {
        video_id: video.video_id.clone(),
        sample_rate_fps: opts.target_fps,
        entries,
        failed_frames: failed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseDescription {
    pub video_id: String,
    pub question: String,
    pub answer: String,
    pub word_count: usize,
}

pub fn summarize_dense(
    captions: &CaptionDict,
    action_labels: &[String],
    backends: &Backends,
) -> Result<DenseDescription> {
    if captions.entries.is_empty() {
        return Err(Error::Precondition(format!(
            "{}: no captions to summarize",
            captions.video_id
        )));
    }
    let mut mega = captions.mega_caption();
    if !action_labels.is_empty() {
        mega.push_str("\nThe actions performed in the video, in order, are: ");
        mega.push_str(&action_labels.join(", "));
    }
    let messages = prompts::dense_caption_messages(&mega)?;
    let item = chat_structured(backends, &messages, |r| {
        parse_llm_mapping(r, Expect::Single).map(|mut v| v.remove(0))
    })?;
    let word_count = item.a.split_whitespace().count();
    if word_count > DENSE_WORD_LIMIT {
        tracing::warn!(video = %captions.video_id, word_count, "dense description exceeds word limit");
    }
    Ok(DenseDescription {
        video_id: captions.video_id.clone(),
        question: item.q,
        answer: item.a,
        word_count,
    })
}

/// One dense-description pair plus three summary and three detail pairs.
pub fn generate_qa(
    video: &StitchedVideo,
    dense: &DenseDescription,
    captions: &CaptionDict,
    backends: &Backends,
) -> Result<Vec<QaPair>> {
    if dense.answer.trim().is_empty() {
        return Err(Error::Precondition(format!(
            "{}: empty dense description",
            video.video_id
        )));
    }
    let mega = captions.mega_caption();
    let mut out = vec![QaPair::new(
        &video.video_id,
        &dense.question,
        &dense.answer,
        QaType::DenseDescription,
        QaSource::Llm,
    )];
    let stages = [
        (prompts::qa_summary_messages(&dense.answer, &mega)?, QaType::Summary),
        (prompts::qa_detail_messages(&dense.answer, &mega)?, QaType::Detail),
    ];
    for (messages, qtype) in stages {
        let items = chat_structured(backends, &messages, |r| parse_llm_mapping(r, Expect::List(3)))?;
        out.extend(
            items
                .into_iter()
                .map(|i| QaPair::new(&video.video_id, i.q, i.a, qtype, QaSource::Llm)),
        );
    }
    for p in &out {
        p.check().map_err(Error::Invalid)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    Pose,
    Object,
}

/// Prefixes every question with `context` and retags the pair.
pub fn augment_with_context(pairs: &[QaPair], context: &str, kind: ContextKind) -> Result<Vec<QaPair>> {
    if context.trim().is_empty() {
        return Err(Error::Precondition("empty context".into()));
    }
    let qtype = match kind {
        ContextKind::Pose => QaType::PoseContextAugmented,
        ContextKind::Object => QaType::ObjectContextAugmented,
    };
    Ok(pairs
        .iter()
        .map(|p| QaPair {
            question: format!("{context} {}", p.question),
            qtype,
            context_prefix: Some(context.to_string()),
            ..p.clone()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use image::{Rgb, RgbImage};

    use super::*;
    use crate::backends::{
        BackendClient, CountingTransport, FixtureTable, Matcher, MockReply, MockTransport, Role,
        Transport,
    };
    use crate::model::Segment;

    fn video(frames: usize, fps: f64) -> StitchedVideo {
        StitchedVideo {
            video_id: "v0001".into(),
            subject_id: "S001".into(),
            camera_id: "C001".into(),
            sequence_id: None,
            segments: vec![Segment {
                clip_id: "c1".into(),
                action_id: 1,
                action_label: "drink water".into(),
                start_frame: 0,
                end_frame: frames,
            }],
            video_path: "v.adlv".into(),
            fps,
            crop_box: None,
        }
    }

    fn media(frames: usize, fps: f64) -> VideoFrames {
        VideoFrames {
            fps,
            frames: (0..frames)
                .map(|i| RgbImage::from_pixel(4, 4, Rgb([i as u8, 0, 0])))
                .collect(),
        }
    }

    fn backends(table: FixtureTable) -> (Backends, Arc<CountingTransport>) {
        let counting = Arc::new(CountingTransport::new(Arc::new(MockTransport::new(table))));
        let t: Arc<dyn Transport> = counting.clone();
        (Backends::new(BackendClient::new(t)), counting)
    }

    fn frame_echo() -> FixtureTable {
        let mut t = FixtureTable::default();
        t.push(
            Matcher::Role(Role::Caption),
            MockReply::func(|req| {
                let img = crate::media::decode_png(&req.media[0]).unwrap();
                let idx = img.get_pixel(0, 0)[0];
                Ok(serde_json::to_vec(&serde_json::json!({ "caption": format!("frame:{idx}") })).unwrap())
            }),
        );
        t
    }

    #[test]
    fn ten_seconds_gives_five_entries() {
        let (b, _) = backends(frame_echo());
        let d = caption_video(
            &video(300, 30.0),
            &media(300, 30.0),
            &b,
            &[prompts::CAPTION_FRAME_1.to_string()],
            CaptionOptions::default(),
        )
        .unwrap();
        let frames: Vec<usize> = d.entries.iter().map(|e| e.frame).collect();
        assert_eq!(frames, vec![0, 60, 120, 180, 240]);
        assert_eq!(d.entries[1].caption, "frame:60");
    }

    #[test]
    fn two_prompts_join_with_bar() {
        let (b, _) = backends(frame_echo());
        let d = caption_video(
            &video(2, 0.5),
            &media(2, 0.5),
            &b,
            &prompts::caption_prompts(),
            CaptionOptions::default(),
        )
        .unwrap();
        assert_eq!(d.entries[0].caption, "frame:0 | frame:0");
    }

    #[test]
    fn caption_fails_past_threshold() {
        let (b, _) = backends(FixtureTable::default());
        let err = caption_video(
            &video(4, 0.5),
            &media(4, 0.5),
            &b,
            &prompts::caption_prompts(),
            CaptionOptions::default(),
        );
        assert!(err.is_err());
    }

    fn dict() -> CaptionDict {
        CaptionDict {
            video_id: "v0001".into(),
            sample_rate_fps: 0.5,
            entries: vec![
                CaptionEntry {
                    frame: 0,
                    caption: "a".into(),
                },
                CaptionEntry {
                    frame: 60,
                    caption: "b".into(),
                },
            ],
            failed_frames: vec![],
        }
    }

    #[test]
    fn dense_prompt_carries_labels_and_fences_parse() {
        let mut t = FixtureTable::default();
        t.push(
            Matcher::All(vec![
                Matcher::Contains("drink water".into()),
                Matcher::Contains("sit down".into()),
            ]),
            MockReply::chat("```json\n{\"Q\":\"Describe the video.\",\"A\":\"A person sits then drinks.\"}\n```"),
        );
        let (b, _) = backends(t);
        let d = summarize_dense(&dict(), &["drink water".into(), "sit down".into()], &b).unwrap();
        assert_eq!(d.question, "Describe the video.");
        assert_eq!(d.answer, "A person sits then drinks.");
        assert_eq!(d.word_count, 5);
    }

    #[test]
    fn garbage_reply_fails_after_three_attempts() {
        let mut t = FixtureTable::default();
        t.push(Matcher::Role(Role::Chat), MockReply::chat("no idea"));
        let (b, counter) = backends(t);
        let err = summarize_dense(&dict(), &[], &b).unwrap_err();
        assert!(matches!(err, Error::LlmReply { attempts: 3, .. }), "{err}");
        assert_eq!(counter.count(), 3);
    }

    #[test]
    fn second_attempt_carries_suffix() {
        let mut t = FixtureTable::default();
        t.push(
            Matcher::Contains(prompts::REPROMPT_SUFFIX.into()),
            MockReply::chat(r#"{"Q":"q","A":"a"}"#),
        );
        t.push(Matcher::Role(Role::Chat), MockReply::chat("sorry"));
        let (b, counter) = backends(t);
        let d = summarize_dense(&dict(), &[], &b).unwrap();
        assert_eq!(d.answer, "a");
        assert_eq!(counter.count(), 2);
    }

    const THREE: &str = r#"[{"Q":"q1","A":"a1"},{"Q":"q2","A":"a2"},{"Q":"q3","A":"a3"}]"#;

    #[test]
    fn seven_pairs_per_video() {
        let mut t = FixtureTable::default();
        t.push(Matcher::Role(Role::Chat), MockReply::chat(THREE));
        let (b, _) = backends(t);
        let dense = DenseDescription {
            video_id: "v0001".into(),
            question: "Describe.".into(),
            answer: "A person drinks.".into(),
            word_count: 3,
        };
        let qa = generate_qa(&video(10, 1.0), &dense, &dict(), &b).unwrap();
        assert_eq!(qa.len(), 7);
        let count = |q| qa.iter().filter(|p| p.qtype == q).count();
        assert_eq!(count(QaType::DenseDescription), 1);
        assert_eq!(count(QaType::Summary), 3);
        assert_eq!(count(QaType::Detail), 3);
    }

    #[test]
    fn wrong_arity_gets_one_retry() {
        let mut t = FixtureTable::default();
        t.push(Matcher::Role(Role::Chat), MockReply::chat(r#"[{"Q":"q","A":"a"}]"#));
        let (b, counter) = backends(t);
        let dense = DenseDescription {
            video_id: "v0001".into(),
            question: "Describe.".into(),
            answer: "x".into(),
            word_count: 1,
        };
        let err = generate_qa(&video(10, 1.0), &dense, &dict(), &b).unwrap_err();
        assert!(matches!(err, Error::LlmReply { attempts: 2, .. }));
        assert_eq!(counter.count(), 2);
    }

    #[test]
    fn empty_dense_is_precondition_error() {
        let (b, counter) = backends(FixtureTable::default());
        let dense = DenseDescription {
            video_id: "v0001".into(),
            question: "q".into(),
            answer: " ".into(),
            word_count: 0,
        };
        assert!(matches!(
            generate_qa(&video(10, 1.0), &dense, &dict(), &b),
            Err(Error::Precondition(_))
        ));
        assert_eq!(counter.count(), 0);
    }

    #[test]
    fn augmentation() {
        let p = QaPair::new("v", "What is the person doing?", "Drinking.", QaType::Summary, QaSource::Llm);
        let out = augment_with_context(std::slice::from_ref(&p), "Relevant objects: bottle.", ContextKind::Object).unwrap();
        assert_eq!(out[0].question, "Relevant objects: bottle. What is the person doing?");
        assert_eq!(out[0].answer, p.answer);
        assert_eq!(out[0].qtype, QaType::ObjectContextAugmented);
        out[0].check().unwrap();
        assert!(augment_with_context(&[], "ctx", ContextKind::Pose).unwrap().is_empty());
        assert!(augment_with_context(&[p], "", ContextKind::Pose).is_err());
    }
}
