use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::annotate::{chat_structured, parse_llm_mapping, prompts, Expect};
use crate::backends::Backends;
use crate::error::{Error, Result};
use crate::media::{encode_png, VideoFrames};

pub const DEFAULT_CLIP_SECONDS: f64 = 60.0;

/// Consecutive frame ranges of `clip_seconds` each; the last may be shorter.
pub fn split_clips(num_frames: usize, fps: f64, clip_seconds: f64) -> Result<Vec<Range<usize>>> {
    if !(clip_seconds > 0.0 && fps > 0.0) {
        return Err(Error::Precondition("clip_seconds and fps must be positive".into()));
    }
    let step = ((clip_seconds * fps).round() as usize).max(1);
    Ok((0..num_frames)
        .step_by(step)
        .map(|s| s..(s + step).min(num_frames))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongVideoDescription {
    /// `(clip index, description)` for clips the model described.
    pub clips: Vec<(usize, String)>,
    pub summary: String,
}

/// Describes each clip with the candidate model (shown the clip's middle
/// frame through the caption route) and summarizes the clip descriptions
/// with the dense-description prompt.
pub fn describe_long_video(
    media: &VideoFrames,
    clip_seconds: f64,
    candidate: &Backends,
    summarizer: &Backends,
) -> Result<LongVideoDescription> {
    let ranges = split_clips(media.len(), media.fps, clip_seconds)?;
    let mut clips = Vec::new();
    for (k, r) in ranges.iter().enumerate() {
        let mid = r.start + (r.end - r.start) / 2;
        match candidate.caption(encode_png(&media.frames[mid]), prompts::CAPTION_FRAME_1) {
            Ok(d) if !d.trim().is_empty() => clips.push((k, d)),
            Ok(_) => tracing::warn!(clip = k, "empty clip description skipped"),
            Err(e) => tracing::warn!(clip = k, error = %e, "clip description failed; skipped"),
        }
    }
    if clips.is_empty() {
        return Err(Error::Eval("no clip of the long video could be described".into()));
    }
    let joined = clips
        .iter()
        .map(|(k, d)| format!("In clip {k}: {d}"))
        .collect::<Vec<_>>()
        .join("\n");
    let messages = prompts::dense_caption_messages(&joined)?;
    let item = chat_structured(summarizer, &messages, |r| {
        parse_llm_mapping(r, Expect::Single).map(|mut v| v.remove(0))
    })?;
    Ok(LongVideoDescription {
        clips,
        summary: item.a,
    })
}
