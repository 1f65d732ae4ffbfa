use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::annotate::{chat_structured, extract_json, prompts, ParseError};
use crate::backends::{Backends, ChatMessage};
use crate::error::{Error, Result};
use crate::model::ActionTable;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSequence {
    pub sequence_id: String,
    pub action_ids: Vec<u32>,
}

impl CompositeSequence {
    pub fn check(&self, min_len: usize, max_len: usize) -> std::result::Result<(), String> {
        let n = self.action_ids.len();
        if n < 2 || n < min_len || n > max_len {
            return Err(format!("{}: length {n} outside [{min_len},{max_len}]", self.sequence_id));
        }
        if let Some(w) = self.action_ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(format!("{}: action {} repeated consecutively", self.sequence_id, w[0]));
        }
        Ok(())
    }
}

pub fn sequence_id(index: usize) -> String {
    format!("seq-{:04}", index + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceGenerator {
    #[default]
    Sampler,
    Llm,
}

/// Lengths are drawn uniformly from `min_len..=max_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        SequenceSpec {
            count: 160,
            min_len: 3,
            max_len: 7,
            seed: 7,
        }
    }
}

/// Number of distinct no-immediate-repeat sequences over `a` actions.
fn distinct_possible(a: usize, min_len: usize, max_len: usize) -> u128 {
    let a = a as u128;
    (min_len..=max_len)
        .map(|len| {
            (1..len).fold(a, |acc, _| acc.saturating_mul(a.saturating_sub(1)))
        })
        .fold(0u128, |acc, x| acc.saturating_add(x))
}

pub fn generate_composite_sequences(
    actions: &ActionTable,
    spec: SequenceSpec,
    generator: SequenceGenerator,
    backends: Option<&Backends>,
) -> Result<Vec<CompositeSequence>> {
    if spec.count == 0 || actions.is_empty() {
        return Err(Error::Precondition("count and action table must be non-empty".into()));
    }
    if spec.min_len < 2 || spec.min_len > spec.max_len {
        return Err(Error::Precondition(format!(
            "invalid length range [{}, {}]",
            spec.min_len, spec.max_len
        )));
    }
    let possible = distinct_possible(actions.len(), spec.min_len, spec.max_len);
    if (spec.count as u128) > possible {
        return Err(Error::Sequence(format!(
            "{} sequences requested but only {possible} distinct sequences exist",
            spec.count
        )));
    }
    match generator {
        SequenceGenerator::Sampler => sample(actions, spec),
        SequenceGenerator::Llm => {
            let backends = backends.ok_or_else(|| {
                Error::Precondition("llm sequence generation needs a chat backend".into())
            })?;
            from_llm(actions, spec, backends)
        }
    }
}

fn sample(actions: &ActionTable, spec: SequenceSpec) -> Result<Vec<CompositeSequence>> {
    let ids = actions.ids();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut out = Vec::with_capacity(spec.count);
    let budget = spec.count.saturating_mul(1000).max(10_000);
    for _ in 0..budget {
        if out.len() == spec.count {
            break;
        }
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut prev = rng.random_range(0..ids.len());
        let mut seq = vec![ids[prev]];
        while seq.len() < len {
            let mut next = rng.random_range(0..ids.len() - 1);
            if next >= prev {
                next += 1;
            }
            seq.push(ids[next]);
            prev = next;
        }
        if seen.insert(seq.clone()) {
            out.push(CompositeSequence {
                sequence_id: sequence_id(out.len()),
                action_ids: seq,
            });
        }
    }
    if out.len() < spec.count {
        return Err(Error::Sequence(format!(
            "only {} distinct sequences after {budget} draws",
            out.len()
        )));
    }
    Ok(out)
}

fn from_llm(actions: &ActionTable, spec: SequenceSpec, backends: &Backends) -> Result<Vec<CompositeSequence>> {
    let list: Vec<String> = actions.iter().map(|(id, l)| format!("{id}: {l}")).collect();
    let prompt = prompts::render(
        prompts::SEQUENCES,
        &[
            ("action_list", &list.join("\n")),
            ("count", &spec.count.to_string()),
            ("min_len", &spec.min_len.to_string()),
            ("max_len", &spec.max_len.to_string()),
        ],
    )?;
    chat_structured(backends, &[ChatMessage::user(prompt)], |reply| {
        let value = extract_json(reply)?;
        let accepted = accept_llm_sequences(&value, actions, spec);
        if accepted.len() < spec.count {
            return Err(ParseError::Unparseable(format!(
                "only {} of {} requested sequences are valid and distinct",
                accepted.len(),
                spec.count
            )));
        }
        Ok(accepted)
    })
}

fn accept_llm_sequences(value: &Value, actions: &ActionTable, spec: SequenceSpec) -> Vec<CompositeSequence> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in value.as_array().into_iter().flatten() {
        let Some(ids) = item
            .as_array()
            .and_then(|a| a.iter().map(|v| v.as_u64().map(|x| x as u32)).collect::<Option<Vec<u32>>>())
        else {
            tracing::warn!(%item, "dropping non-integer sequence");
            continue;
        };
        let candidate = CompositeSequence {
            sequence_id: sequence_id(out.len()),
            action_ids: ids,
        };
        if let Some(bad) = candidate.action_ids.iter().find(|id| !actions.contains(**id)) {
            tracing::warn!(action_id = bad, "dropping sequence with unknown action");
            continue;
        }
        if let Err(e) = candidate.check(spec.min_len, spec.max_len) {
            tracing::warn!(reason = %e, "dropping invalid sequence");
            continue;
        }
        if seen.insert(candidate.action_ids.clone()) && out.len() < spec.count {
            out.push(candidate);
        }
    }
    out
}
