//! Frame captioning, dense descriptions and QA generation.

mod describe;
pub mod parse;
pub mod prompts;
pub mod sampling;

pub use describe::{
    augment_with_context, caption_video, generate_qa, summarize_dense, CaptionDict, CaptionEntry,
    CaptionOptions, ContextKind, DenseDescription, DENSE_WORD_LIMIT,
};
pub use parse::{extract_json, parse_llm_mapping, Expect, ParseError, QaItem};
pub use sampling::{sample_frames, uniform_indices};

use crate::backends::{Backends, ChatMessage};
use crate::error::{Error, Result};

/// Attempts per structured LLM call.
pub const LLM_ATTEMPTS: usize = 3;

/// Issues `messages` and validates the reply with `accept`, re-prompting on
/// failure. The second attempt appends [`prompts::REPROMPT_SUFFIX`] to the
/// last user turn; the third also replays the rejected reply as an
/// assistant turn. Arity errors get a single re-prompt.
pub fn chat_structured<T>(
    backends: &Backends,
    messages: &[ChatMessage],
    mut accept: impl FnMut(&str) -> std::result::Result<T, ParseError>,
) -> Result<T> {
    let mut last_reply = String::new();
    let mut last_reason = String::new();
    let mut arity_failures = 0;
    for attempt in 1..=LLM_ATTEMPTS {
        let convo = reprompt(messages, attempt, &last_reply);
        let reply = backends.chat(&convo)?;
        match accept(&reply) {
            Ok(v) => return Ok(v),
            Err(e) => {
                tracing::warn!(attempt, error = %e, "rejected LLM reply");
                if matches!(e, ParseError::Arity { .. }) {
                    arity_failures += 1;
                }
                last_reason = e.to_string();
                last_reply = reply;
                if arity_failures >= 2 {
                    return Err(Error::LlmReply {
                        attempts: attempt,
                        reason: last_reason,
                        raw: last_reply,
                    });
                }
            }
        }
    }
    Err(Error::LlmReply {
        attempts: LLM_ATTEMPTS,
        reason: last_reason,
        raw: last_reply,
    })
}

fn reprompt(messages: &[ChatMessage], attempt: usize, last_reply: &str) -> Vec<ChatMessage> {
    let mut convo = messages.to_vec();
    match attempt {
        1 => {}
        2 => {
            if let Some(m) = convo.iter_mut().rev().find(|m| m.role == "user") {
                m.content.push('\n');
                m.content.push_str(prompts::REPROMPT_SUFFIX);
            }
        }
        _ => {
            convo.push(ChatMessage::assistant(last_reply));
            convo.push(ChatMessage::user(prompts::REPROMPT_SUFFIX));
        }
    }
    convo
}
