use serde::{Deserialize, Serialize};

use crate::annotate::{chat_structured, prompts, ParseError};
use crate::backends::{Backends, ChatMessage};
use crate::error::{Error, Result};

/// Largest tolerated share of unscoreable judge replies per metric.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JudgeMetric {
    #[serde(rename = "CI")]
    CorrectnessOfInformation,
    #[serde(rename = "DO")]
    DetailOrientation,
    #[serde(rename = "CU")]
    ContextualUnderstanding,
    #[serde(rename = "TU")]
    TemporalUnderstanding,
    #[serde(rename = "Con")]
    Consistency,
}

impl JudgeMetric {
    pub const ALL: [JudgeMetric; 5] = [
        JudgeMetric::CorrectnessOfInformation,
        JudgeMetric::DetailOrientation,
        JudgeMetric::ContextualUnderstanding,
        JudgeMetric::TemporalUnderstanding,
        JudgeMetric::Consistency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JudgeMetric::CorrectnessOfInformation => "Correctness of Information",
            JudgeMetric::DetailOrientation => "Detail Orientation",
            JudgeMetric::ContextualUnderstanding => "Contextual Understanding",
            JudgeMetric::TemporalUnderstanding => "Temporal Understanding",
            JudgeMetric::Consistency => "Consistency",
        }
    }

    pub fn guidance(self) -> &'static str {
        match self {
            JudgeMetric::CorrectnessOfInformation => {
                "check that the actions, objects and events it states actually appear in the reference and that nothing is invented."
            }
            JudgeMetric::DetailOrientation => {
                "check that it covers all the actions and objects of the reference and describes them specifically rather than generically."
            }
            JudgeMetric::ContextualUnderstanding => {
                "check that it places the actions in the right setting and explains how the person interacts with the objects around them."
            }
            JudgeMetric::TemporalUnderstanding => {
                "check that it reports the actions in the same order as the reference and keeps their sequence coherent."
            }
            JudgeMetric::Consistency => {
                "check that it does not contradict itself or the reference anywhere in the description."
            }
        }
    }
}

pub fn judge_prompt(metric: JudgeMetric, generated: &str, reference: &str) -> Result<String> {
    prompts::render(
        prompts::JUDGE,
        &[
            ("metric_name", metric.name()),
            ("metric_guidance", metric.guidance()),
            ("reference", reference),
            ("generated", generated),
        ],
    )
}

/// Accepts a reply that is a single integer 1..=5, optionally followed by a
/// period.
pub fn parse_judge_reply(reply: &str) -> Option<u8> {
    let t = reply.trim().trim_end_matches('.').trim();
    t.parse::<u8>().ok().filter(|v| (1..=5).contains(v))
}

/// Raw 1..=5 ratings; `None` where the judge never gave a usable integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRatings {
    pub video_id: String,
    pub ratings: Vec<(JudgeMetric, Option<u8>)>,
}

pub fn judge_description(video_id: &str, generated: &str, reference: &str, backends: &Backends) -> Result<JudgeRatings> {
    if generated.trim().is_empty() || reference.trim().is_empty() {
        return Err(Error::Precondition(format!("{video_id}: empty description")));
    }
    let mut ratings = Vec::with_capacity(5);
    for metric in JudgeMetric::ALL {
        let prompt = judge_prompt(metric, generated, reference)?;
        let r = chat_structured(backends, &[ChatMessage::user(prompt)], |reply| {
            parse_judge_reply(reply).ok_or_else(|| ParseError::Unparseable(reply.to_string()))
        });
        let score = match r {
            Ok(v) => Some(v),
            Err(Error::LlmReply { raw, .. }) => {
                tracing::warn!(video = video_id, metric = metric.name(), reply = %raw, "judge reply excluded");
                None
            }
            Err(e) => return Err(e),
        };
        ratings.push((metric, score));
    }
    Ok(JudgeRatings {
        video_id: video_id.to_string(),
        ratings,
    })
}

/// Per-metric corpus means on the 0..=100 scale (raw x 20).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionScore {
    pub scores: Vec<(JudgeMetric, f64)>,
    pub excluded: Vec<(JudgeMetric, usize)>,
    pub total: usize,
}

impl DescriptionScore {
    pub fn get(&self, m: JudgeMetric) -> Option<f64> {
        self.scores.iter().find(|(k, _)| *k == m).map(|(_, v)| *v)
    }
}

pub fn aggregate_judge(items: &[JudgeRatings]) -> Result<DescriptionScore> {
    if items.is_empty() {
        return Err(Error::Eval("no judged descriptions".into()));
    }
    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    for metric in JudgeMetric::ALL {
        let vals: Vec<u8> = items
            .iter()
            .filter_map(|i| i.ratings.iter().find(|(m, _)| *m == metric).and_then(|(_, v)| *v))
            .collect();
        let dropped = items.len() - vals.len();
        if dropped as f64 > MAX_EXCLUDED_FRACTION * items.len() as f64 {
            return Err(Error::Eval(format!(
                "{}: {dropped} of {} judge replies unusable",
                metric.name(),
                items.len()
            )));
        }
        let mean = vals.iter().map(|v| *v as f64 * 20.0).sum::<f64>() / vals.len() as f64;
        scores.push((metric, mean));
        excluded.push((metric, dropped));
    }
    Ok(DescriptionScore {
        scores,
        excluded,
        total: items.len(),
    })
}
