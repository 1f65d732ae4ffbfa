use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::prompts;
use crate::error::{Error, Result};
use crate::model::StitchedVideo;
use crate::video::derive_seed;

pub const DEFAULT_OPTIONS: usize = 4;
pub const AR_QUESTION: &str = "Which of the following actions does the person perform in the video?";
pub const AF_QUESTION: &str = "Based on the actions seen so far, which action will the person perform next?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum McqTask {
    #[serde(rename = "AR")]
    Recognition,
    #[serde(rename = "AF")]
    Forecasting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub item_id: String,
    pub video_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub task: McqTask,
    /// Forecasting only: frames before this index are shown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_frames: Option<usize>,
}

/// Case-folded, punctuation replaced by spaces, whitespace collapsed.
pub fn normalize(s: &str) -> String {
    s.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn option_letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

/// Prompt shown to the model under evaluation.
pub fn render_mcq_prompt(item: &McqItem) -> Result<String> {
    let options: Vec<String> = item
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {o}", option_letter(i)))
        .collect();
    prompts::render(
        prompts::MCQ,
        &[("question", &item.question), ("options", &options.join("\n"))],
    )
}

/// Builds one item per video (recognition) or per multi-segment video
/// (forecasting). Distractors come from `vocab` and never normalize equal to
/// any excluded label.
pub fn build_mcq(videos: &[StitchedVideo], vocab: &[String], task: McqTask, k: usize, seed: u64) -> Result<Vec<McqItem>> {
    if k < 2 {
        return Err(Error::Precondition(format!("K must be at least 2, got {k}")));
    }
    let mut uniq: Vec<&String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in vocab {
        if seen.insert(normalize(v)) {
            uniq.push(v);
        }
    }
    if uniq.len() < k {
        return Err(Error::Eval(format!("vocabulary of {} labels is smaller than K={k}", uniq.len())));
    }
    let mut items = Vec::new();
    for (vi, video) in videos.iter().enumerate() {
        if video.segments.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, vi as u64));
        let (question, correct, excluded, boundary) = match task {
            McqTask::Recognition => {
                let seg = video.segments.choose(&mut rng).expect("non-empty");
                let excluded: Vec<String> = video.segments.iter().map(|s| normalize(&s.action_label)).collect();
                (AR_QUESTION, seg.action_label.clone(), excluded, None)
            }
            McqTask::Forecasting => {
                if video.segments.len() < 2 {
                    tracing::warn!(video = %video.video_id, "single-segment video skipped for forecasting");
                    continue;
                }
                let m = rng.random_range(1..video.segments.len());
                let mut excluded: Vec<String> =
                    video.segments[..m].iter().map(|s| normalize(&s.action_label)).collect();
                let correct = video.segments[m].action_label.clone();
                excluded.push(normalize(&correct));
                (AF_QUESTION, correct, excluded, Some(video.segments[m - 1].end_frame))
            }
        };
        let pool: Vec<&String> = uniq
            .iter()
            .copied()
            .filter(|l| !excluded.contains(&normalize(l)))
            .collect();
        if pool.len() < k - 1 {
            return Err(Error::Eval(format!(
                "{}: only {} distractor labels available for K={k}",
                video.video_id,
                pool.len()
            )));
        }
        let mut options: Vec<String> = pool.choose_multiple(&mut rng, k - 1).map(|s| (*s).clone()).collect();
        options.push(correct.clone());
        options.shuffle(&mut rng);
        let correct_index = options.iter().position(|o| *o == correct).expect("inserted");
        let tag = match task {
            McqTask::Recognition => "ar",
            McqTask::Forecasting => "af",
        };
        items.push(McqItem {
            item_id: format!("{tag}-{}", video.video_id),
            video_id: video.video_id.clone(),
            question: question.to_string(),
            options,
            correct_index,
            task,
            visible_frames: boundary,
        });
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    ExactText,
    Letter,
    Substring,
    Ambiguous,
    NoMatch,
}

/// Maps a raw reply to an option index.
pub fn match_answer(options: &[String], reply: &str) -> (Option<usize>, MatchKind) {
    let norm = normalize(reply);
    let opts: Vec<String> = options.iter().map(|o| normalize(o)).collect();
    if let Some(i) = opts.iter().position(|o| !o.is_empty() && *o == norm) {
        return (Some(i), MatchKind::ExactText);
    }
    if let Some(i) = letter_choice(&norm, reply, options.len()) {
        return (Some(i), MatchKind::Letter);
    }
    let padded = format!(" {norm} ");
    let hits: Vec<usize> = opts
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.is_empty() && padded.contains(&format!(" {o} ")))
        .map(|(i, _)| i)
        .collect();
    match hits.as_slice() {
        [i] => (Some(*i), MatchKind::Substring),
        [] => (None, MatchKind::NoMatch),
        _ => (None, MatchKind::Ambiguous),
    }
}

fn token_choice(tok: &str, k: usize) -> Option<usize> {
    let mut chars = tok.chars();
    let c = chars.next()?;
    if chars.next().is_some() {
        return tok.parse::<usize>().ok().filter(|n| (1..=k).contains(n)).map(|n| n - 1);
    }
    if c.is_ascii_lowercase() {
        let i = (c as u8 - b'a') as usize;
        return (i < k).then_some(i);
    }
    c.to_digit(10).map(|d| d as usize).filter(|n| (1..=k).contains(n)).map(|n| n - 1)
}

fn letter_choice(norm: &str, raw: &str, k: usize) -> Option<usize> {
    let toks: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
    match toks.len() {
        0 => return None,
        1 => return token_choice(toks[0], k),
        _ => {}
    }
    // "B. drink water", "(b) ...", "2) ..."
    let raw = raw.trim_start().trim_start_matches('(');
    let mut chars = raw.chars();
    if let (Some(c), Some(sep)) = (chars.next(), chars.next()) {
        if matches!(sep, '.' | ')' | ':') {
            if let Some(i) = token_choice(&c.to_ascii_lowercase().to_string(), k) {
                return Some(i);
            }
        }
    }
    // "the answer is (b)", "option 2", "answer: c"
    for i in 0..toks.len() - 1 {
        let cue = matches!(toks[i], "option" | "answer" | "choice")
            || (toks[i] == "is" && i > 0 && toks[i - 1] == "answer");
        if cue && toks[i + 1].len() <= 2 {
            if let Some(c) = token_choice(toks[i + 1], k) {
                return Some(c);
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqVerdict {
    pub item_id: String,
    pub chosen: Option<usize>,
    pub correct: bool,
    pub how: MatchKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub verdicts: Vec<McqVerdict>,
}

/// Unmatched and ambiguous replies count as wrong.
pub fn score_mcq(items: &[McqItem], answers: &[String]) -> Result<McqReport> {
    if items.len() != answers.len() {
        return Err(Error::Eval(format!(
            "{} items but {} answers",
            items.len(),
            answers.len()
        )));
    }
    let verdicts: Vec<McqVerdict> = items
        .iter()
        .zip(answers)
        .map(|(item, reply)| {
            let (chosen, how) = match_answer(&item.options, reply);
            if matches!(how, MatchKind::Ambiguous | MatchKind::NoMatch) {
                tracing::debug!(item = %item.item_id, ?how, "unscored reply");
            }
            McqVerdict {
                item_id: item.item_id.clone(),
                chosen,
                correct: chosen == Some(item.correct_index),
                how,
            }
        })
        .collect();
    let correct = verdicts.iter().filter(|v| v.correct).count();
    let total = items.len();
    Ok(McqReport {
        accuracy: if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 },
        correct,
        total,
        verdicts,
    })
}

/// One raw model reply, keyed by item id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub item_id: String,
    pub reply: String,
}

/// Aligns keyed answers with items; missing answers score as empty replies.
pub fn align_answers(items: &[McqItem], answers: &[AnswerRecord]) -> Vec<String> {
    let by_id: HashMap<&str, &str> = answers.iter().map(|a| (a.item_id.as_str(), a.reply.as_str())).collect();
    items
        .iter()
        .map(|i| {
            by_id.get(i.item_id.as_str()).map(|s| s.to_string()).unwrap_or_else(|| {
                tracing::warn!(item = %i.item_id, "no answer; scored as wrong");
                String::new()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Segment;

    fn video(id: &str, labels: &[&str]) -> StitchedVideo {
        StitchedVideo {
            video_id: id.into(),
            subject_id: "S1".into(),
            camera_id: "C1".into(),
            sequence_id: None,
            segments: labels
                .iter()
                .enumerate()
                .map(|(i, l)| Segment {
                    clip_id: format!("{id}-{i}"),
                    action_id: i as u32 + 1,
                    action_label: l.to_string(),
                    start_frame: i * 10,
                    end_frame: i * 10 + 10,
                })
                .collect(),
            video_path: "v.adlv".into(),
            fps: 10.0,
            crop_box: None,
        }
    }

    fn vocab(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("action {i}")).collect()
    }

    #[test]
    fn forecasting_two_segments() {
        let v = video("v1", &["sit down", "drink water"]);
        let mut voc = vocab(10);
        voc.push("sit down".into());
        voc.push("drink water".into());
        let items = build_mcq(&[v], &voc, McqTask::Forecasting, 4, 1).unwrap();
        let it = &items[0];
        assert_eq!(it.options[it.correct_index], "drink water");
        assert_eq!(it.visible_frames, Some(10));
        assert!(!it.options.iter().any(|o| o == "sit down"));
    }

    #[test]
    fn single_segment_forecasting_is_skipped() {
        let items = build_mcq(&[video("v1", &["sit down"])], &vocab(10), McqTask::Forecasting, 4, 1).unwrap();
        assert!(items.is_empty());
    }

    #[test]
    fn small_vocab_errors() {
        assert!(build_mcq(&[video("v1", &["a"])], &vocab(3), McqTask::Recognition, 4, 1).is_err());
    }

    #[test]
    fn letter_and_text_matching() {
        let opts: Vec<String> = ["drink water", "sit down", "eat meal", "read"].map(String::from).to_vec();
        assert_eq!(match_answer(&opts, "The answer is (b)").0, Some(1));
        assert_eq!(match_answer(&opts, "B").0, Some(1));
        assert_eq!(match_answer(&opts, "2.").0, Some(1));
        assert_eq!(match_answer(&opts, "C. eat meal").0, Some(2));
        assert_eq!(match_answer(&opts, "Sit down!").0, Some(1));
        assert_eq!(match_answer(&opts, "I think they drink water here").0, Some(0));
        assert_eq!(match_answer(&opts, "drink water or read").1, MatchKind::Ambiguous);
        assert_eq!(match_answer(&opts, "no idea").1, MatchKind::NoMatch);
    }

    #[test]
    fn prompt_lists_lettered_options() {
        let item = McqItem {
            item_id: "ar-v1".into(),
            video_id: "v1".into(),
            question: AR_QUESTION.into(),
            options: vec!["x".into(), "y".into()],
            correct_index: 0,
            task: McqTask::Recognition,
            visible_frames: None,
        };
        let p = render_mcq_prompt(&item).unwrap();
        assert!(p.contains("\nA. x\nB. y\n"));
    }

    #[test]
    fn length_mismatch() {
        assert!(score_mcq(&[], &["a".into()]).is_err());
    }
}
