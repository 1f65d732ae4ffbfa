//! Evaluation harness: multiple-choice recognition/forecasting, verb/noun
//! F1 and judge-scored descriptions.

mod judge;
mod longvideo;
mod mcq;
mod mementos;

use serde::{Deserialize, Serialize};

pub use judge::{
    aggregate_judge, judge_description, judge_prompt, parse_judge_reply, DescriptionScore, JudgeMetric,
    JudgeRatings, MAX_EXCLUDED_FRACTION,
};
pub use longvideo::{describe_long_video, split_clips, LongVideoDescription, DEFAULT_CLIP_SECONDS};
pub use mcq::{
    align_answers, build_mcq, match_answer, normalize, render_mcq_prompt, score_mcq, AnswerRecord, MatchKind,
    McqItem, McqReport, McqTask, McqVerdict, AF_QUESTION, AR_QUESTION, DEFAULT_OPTIONS,
};
pub use mementos::{lemma_candidates, mementos_corpus, mementos_f1, prf, Lexicon, MementosScore, Prf};

/// Contents of `report.json`; sections absent when not evaluated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recognition: Option<McqReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecasting: Option<McqReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mementos: Option<MementosReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<JudgeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MementosReport {
    pub corpus: MementosScore,
    pub per_video: Vec<(String, MementosScore)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeReport {
    pub corpus: DescriptionScore,
    pub per_video: Vec<JudgeRatings>,
}

/// A generated/reference description pair, one line of a description file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionPair {
    pub video_id: String,
    pub generated: String,
    pub reference: String,
}
