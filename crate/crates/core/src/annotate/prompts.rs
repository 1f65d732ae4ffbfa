//! Versioned prompt assets and single-pass placeholder substitution.

use crate::backends::ChatMessage;
use crate::error::{Error, Result};

pub const PROMPT_VERSION: &str = "v1";

pub const DENSE_CAPTION_SYSTEM: &str = include_str!("../../assets/prompts/dense_caption.system.txt");
pub const DENSE_CAPTION_USER: &str = include_str!("../../assets/prompts/dense_caption.user.txt");
pub const QA_SUMMARY_SYSTEM: &str = include_str!("../../assets/prompts/qa_summary.system.txt");
pub const QA_SUMMARY_USER: &str = include_str!("../../assets/prompts/qa_summary.user.txt");
pub const QA_DETAIL_SYSTEM: &str = include_str!("../../assets/prompts/qa_detail.system.txt");
pub const QA_DETAIL_USER: &str = include_str!("../../assets/prompts/qa_detail.user.txt");
pub const POSE_MOTION: &str = include_str!("../../assets/prompts/pose_motion.txt");
pub const RELEVANT_OBJECTS: &str = include_str!("../../assets/prompts/relevant_objects.txt");
pub const CAPTION_FRAME_1: &str = include_str!("../../assets/prompts/caption_frame_1.txt");
pub const CAPTION_FRAME_2: &str = include_str!("../../assets/prompts/caption_frame_2.txt");
pub const POSE_DESCRIBE: &str = include_str!("../../assets/prompts/pose_describe.txt");
pub const POSE_QA: &str = include_str!("../../assets/prompts/pose_qa.txt");
pub const SEQUENCES: &str = include_str!("../../assets/prompts/sequences.txt");
pub const JUDGE: &str = include_str!("../../assets/prompts/judge.txt");
pub const MCQ: &str = include_str!("../../assets/prompts/mcq.txt");

/// Appended to the last user turn when a reply must be re-requested.
pub const REPROMPT_SUFFIX: &str = "Return ONLY the requested structure.";

/// The two per-frame captioner prompts.
pub fn caption_prompts() -> [String; 2] {
    [CAPTION_FRAME_1.to_string(), CAPTION_FRAME_2.to_string()]
}

/// Replaces each `{name}` for the supplied names in one left-to-right pass;
/// substituted text is never rescanned. Other braces are left untouched.
/// Every supplied name must occur in the template.
pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String> {
    let mut used = vec![false; vars.len()];
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .position(|(k, _)| *k == name)
                .map(|i| (i, close))
        });
        match hit {
            Some((i, close)) => {
                out.push_str(vars[i].1);
                used[i] = true;
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Error::Precondition(format!(
            "placeholder {{{}}} not present in template",
            vars[i].0
        )));
    }
    Ok(out)
}

pub fn dense_caption_messages(mega_caption: &str) -> Result<Vec<ChatMessage>> {
    Ok(vec![
        ChatMessage::system(DENSE_CAPTION_SYSTEM),
        ChatMessage::user(render(DENSE_CAPTION_USER, &[("mega_caption", mega_caption)])?),
    ])
}

pub fn qa_summary_messages(caption: &str, mega_caption: &str) -> Result<Vec<ChatMessage>> {
    Ok(vec![
        ChatMessage::system(QA_SUMMARY_SYSTEM),
        ChatMessage::user(render(
            QA_SUMMARY_USER,
            &[("caption", caption), ("mega_caption", mega_caption)],
        )?),
    ])
}

pub fn qa_detail_messages(caption: &str, mega_caption: &str) -> Result<Vec<ChatMessage>> {
    Ok(vec![
        ChatMessage::system(QA_DETAIL_SYSTEM),
        ChatMessage::user(render(
            QA_DETAIL_USER,
            &[("caption", caption), ("mega_caption", mega_caption)],
        )?),
    ])
}

pub fn pose_motion_messages(pose_str: &str) -> Result<Vec<ChatMessage>> {
    Ok(vec![ChatMessage::user(render(POSE_MOTION, &[("pose_str", pose_str)])?)])
}

pub fn relevant_objects_messages(action_label: &str, found_objects: &str) -> Result<Vec<ChatMessage>> {
    Ok(vec![ChatMessage::user(render(
        RELEVANT_OBJECTS,
        &[("action_label", action_label), ("found_objects", found_objects)],
    )?)])
}

pub fn pose_describe_messages(action_label: &str, pose_str: &str) -> Result<Vec<ChatMessage>> {
    Ok(vec![ChatMessage::user(render(
        POSE_DESCRIBE,
        &[("action_label", action_label), ("pose_str", pose_str)],
    )?)])
}

pub fn pose_qa_messages(action_label: &str, pose_description: &str) -> Result<Vec<ChatMessage>> {
    Ok(vec![ChatMessage::user(render(
        POSE_QA,
        &[("action_label", action_label), ("pose_description", pose_description)],
    )?)])
}
