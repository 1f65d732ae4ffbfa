//! Tolerant parsing of LLM replies that should contain `{"Q": .., "A": ..}`
//! mappings (or lists of them).
//!
//! Strategies, in order:
//! 1. strict JSON over the trimmed reply;
//! 2. strict JSON over a fenced code block or the first balanced
//!    `{...}` / `[...]` span, which drops surrounding prose;
//! 3. the same candidates after rewriting Python-style literals: single
//!    quotes become double quotes outside string bodies, trailing commas are
//!    removed, `True`/`False`/`None` map to JSON, raw newlines inside strings
//!    are escaped.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no parseable mapping in reply: {0:?}")]
    Unparseable(String),
    #[error("expected {expected} item(s), found {found}")]
    Arity { expected: usize, found: usize },
    #[error("item {index} is missing string key {key:?}")]
    MissingKey { index: usize, key: &'static str },
    #[error("item {index} is not a mapping")]
    NotAMapping { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Single,
    List(usize),
}

impl Expect {
    fn count(self) -> usize {
        match self {
            Expect::Single => 1,
            Expect::List(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    #[serde(rename = "Q")]
    pub q: String,
    #[serde(rename = "A")]
    pub a: String,
}

impl QaItem {
    pub fn new(q: impl Into<String>, a: impl Into<String>) -> Self {
        QaItem {
            q: q.into(),
            a: a.into(),
        }
    }
}

/// Strict JSON rendering: a bare object for one item, a list otherwise.
pub fn items_to_json(items: &[QaItem], expect: Expect) -> String {
    match expect {
        Expect::Single => serde_json::to_string(&items[0]).expect("serializable"),
        Expect::List(_) => serde_json::to_string(items).expect("serializable"),
    }
}

pub fn parse_llm_mapping(text: &str, expect: Expect) -> Result<Vec<QaItem>, ParseError> {
    let value = extract_json(text)?;
    items_from_value(value, expect)
}

fn items_from_value(value: Value, expect: Expect) -> Result<Vec<QaItem>, ParseError> {
    let raw: Vec<Value> = match value {
        Value::Array(items) => items,
        obj @ Value::Object(_) => vec![obj],
        _ => return Err(ParseError::NotAMapping { index: 0 }),
    };
    if raw.len() != expect.count() {
        return Err(ParseError::Arity {
            expected: expect.count(),
            found: raw.len(),
        });
    }
    raw.into_iter()
        .enumerate()
        .map(|(index, v)| {
            let Value::Object(map) = v else {
                return Err(ParseError::NotAMapping { index });
            };
            let get = |key: &'static str| match map.get(key) {
                Some(Value::String(s)) => Ok(s.clone()),
                _ => Err(ParseError::MissingKey { index, key }),
            };
            let item = QaItem::new(get("Q")?, get("A")?);
            let extra: Vec<&String> = map.keys().filter(|k| *k != "Q" && *k != "A").collect();
            if !extra.is_empty() {
                tracing::warn!(index, ?extra, "ignoring extra keys in LLM mapping");
            }
            Ok(item)
        })
        .collect()
}

/// Pulls one JSON value (object or array) out of free-form LLM text.
pub fn extract_json(text: &str) -> Result<Value, ParseError> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        if v.is_object() || v.is_array() {
            return Ok(v);
        }
    }
    let candidates = candidates(trimmed);
    for c in &candidates {
        if let Ok(v) = serde_json::from_str::<Value>(c) {
            if v.is_object() || v.is_array() {
                return Ok(v);
            }
        }
    }
    for c in std::iter::once(trimmed).chain(candidates.iter().map(String::as_str)) {
        let normalized = normalize_pythonish(c);
        if let Ok(v) = serde_json::from_str::<Value>(&normalized) {
            if v.is_object() || v.is_array() {
                return Ok(v);
            }
        }
        if let Some(span) = balanced_span(&normalized) {
            if let Ok(v) = serde_json::from_str::<Value>(span) {
                return Ok(v);
            }
        }
    }
    Err(ParseError::Unparseable(text.to_string()))
}

fn candidates(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(body) = fenced_body(text) {
        out.push(body.trim().to_string());
        if let Some(span) = balanced_span(body) {
            out.push(span.to_string());
        }
    }
    if let Some(span) = balanced_span(text) {
        out.push(span.to_string());
    }
    out
}

/// Body of the first ``` fence, skipping an optional language tag.
fn fenced_body(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let tag = after[..body_start].trim();
    let body = if tag.chars().all(|c| c.is_ascii_alphanumeric()) {
        &after[body_start..]
    } else {
        after
    };
    let end = body.find("```").unwrap_or(body.len());
    Some(&body[..end])
}

/// First balanced `{...}` or `[...]` span, honoring both quote styles.
fn balanced_span(text: &str) -> Option<&str> {
    let start = text.find(['{', '['])?;
    let bytes = text.as_bytes();
    let mut stack: Vec<u8> = Vec::new();
    let mut quote: Option<u8> = None;
    let mut i = start;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) => {
                if b == b'\\' {
                    i += 1;
                } else if b == q && (q == b'"' || closes_single(text, i)) {
                    quote = None;
                }
            }
            None => match b {
                b'"' => quote = Some(b'"'),
                b'\'' => quote = Some(b'\''),
                b'{' => stack.push(b'}'),
                b'[' => stack.push(b']'),
                b'}' | b']' => {
                    if stack.pop() != Some(b) {
                        return None;
                    }
                    if stack.is_empty() {
                        return Some(&text[start..=i]);
                    }
                }
                _ => {}
            },
        }
        i += 1;
    }
    None
}

/// A `'` at byte `i` closes a single-quoted string only when followed (after
/// whitespace) by a structural character; otherwise it is an apostrophe.
fn closes_single(text: &str, i: usize) -> bool {
    match text[i + 1..].chars().find(|c| !c.is_whitespace()) {
        None => true,
        Some(c) => matches!(c, ',' | ':' | '}' | ']'),
    }
}

fn normalize_pythonish(text: &str) -> String {
    #[derive(PartialEq)]
    enum State {
        Outside,
        Double,
        Single,
    }
    let mut out = String::with_capacity(text.len() + 16);
    let mut state = State::Outside;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match state {
            State::Outside => match c {
                '"' => {
                    out.push('"');
                    state = State::Double;
                }
                '\'' => {
                    out.push('"');
                    state = State::Single;
                }
                ',' => {
                    let next = text[i + 1..].chars().find(|c| !c.is_whitespace());
                    if !matches!(next, Some('}') | Some(']')) {
                        out.push(',');
                    }
                }
                c if c.is_ascii_alphabetic() => {
                    let word_end = text[i..]
                        .find(|ch: char| !ch.is_ascii_alphanumeric() && ch != '_')
                        .map(|e| i + e)
                        .unwrap_or(text.len());
                    let word = &text[i..word_end];
                    let mapped = match word {
                        "True" => "true",
                        "False" => "false",
                        "None" => "null",
                        other => other,
                    };
                    out.push_str(mapped);
                    while chars.peek().is_some_and(|(j, _)| *j < word_end) {
                        chars.next();
                    }
                }
                _ => out.push(c),
            },
            State::Double => match c {
                '\\' => {
                    out.push('\\');
                    if let Some((_, n)) = chars.next() {
                        out.push(n);
                    }
                }
                '"' => {
                    out.push('"');
                    state = State::Outside;
                }
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                '\r' => {}
                _ => out.push(c),
            },
            State::Single => match c {
                '\\' => match chars.next() {
                    Some((_, '\'')) => out.push('\''),
                    Some((_, n)) => {
                        out.push('\\');
                        out.push(n);
                    }
                    None => out.push_str("\\\\"),
                },
                '"' => out.push_str("\\\""),
                '\'' if closes_single(text, i) => {
                    out.push('"');
                    state = State::Outside;
                }
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                '\r' => {}
                _ => out.push(c),
            },
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_json_single() {
        let items = parse_llm_mapping(r#"{"Q": "q", "A": "a"}"#, Expect::Single).unwrap();
        assert_eq!(items, vec![QaItem::new("q", "a")]);
    }

    #[test]
    fn python_list_of_three() {
        let text = "[{'Q': 'q1', 'A': 'a1'}, {'Q': 'q2', 'A': 'a2'}, {'Q': 'q3', 'A': 'a3'}]";
        let items = parse_llm_mapping(text, Expect::List(3)).unwrap();
        let oracle: Vec<QaItem> = serde_json::from_str(
            r#"[{"Q": "q1", "A": "a1"}, {"Q": "q2", "A": "a2"}, {"Q": "q3", "A": "a3"}]"#,
        )
        .unwrap();
        assert_eq!(items, oracle);
    }

    #[test]
    fn fenced_with_prose() {
        let text = "Here you go:\n```json\n{\"Q\":\"q\",\"A\":\"a\"}\n```";
        assert_eq!(
            parse_llm_mapping(text, Expect::Single).unwrap(),
            vec![QaItem::new("q", "a")]
        );
    }

    #[test]
    fn apostrophes_inside_single_quoted_strings() {
        let text = "{'Q': 'What is in the person's hand?', 'A': 'A bottle.'}";
        assert_eq!(
            parse_llm_mapping(text, Expect::Single).unwrap(),
            vec![QaItem::new("What is in the person's hand?", "A bottle.")]
        );
    }

    #[test]
    fn arity_error() {
        let text = r#"[{"Q": "q", "A": "a"}, {"Q": "q", "A": "a"}]"#;
        assert_eq!(
            parse_llm_mapping(text, Expect::List(3)),
            Err(ParseError::Arity { expected: 3, found: 2 })
        );
    }

    #[test]
    fn missing_key() {
        assert_eq!(
            parse_llm_mapping(r#"{"Q": "q"}"#, Expect::Single),
            Err(ParseError::MissingKey { index: 0, key: "A" })
        );
    }

    #[test]
    fn garbage_is_unparseable() {
        assert!(matches!(
            parse_llm_mapping("I cannot help with that.", Expect::Single),
            Err(ParseError::Unparseable(_))
        ));
    }

    #[test]
    fn extra_keys_ignored() {
        let items = parse_llm_mapping(r#"{"Q": "q", "A": "a", "note": 1}"#, Expect::Single).unwrap();
        assert_eq!(items, vec![QaItem::new("q", "a")]);
    }
}
