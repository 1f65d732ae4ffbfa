//! Each entry of `parser_corpus.json` is a loosely formatted reply paired with the strict
//! JSON it should be read as. The oracle is serde_json on the strict text.

use adlforge_core::annotate::{extract_json, parse_llm_mapping, Expect, ParseError, QaItem};
use serde::Deserialize;
use serde_json::Value;

#[derive(Deserialize)]
struct Case {
    name: String,
    reply: String,
    strict: String,
}

fn corpus() -> Vec<Case> {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/parser_corpus.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn expect_for(v: &Value) -> Expect {
    match v {
        Value::Array(a) => Expect::List(a.len()),
        _ => Expect::Single,
    }
}

fn oracle_items(v: &Value) -> Vec<QaItem> {
    let objs: Vec<&Value> = match v {
        Value::Array(a) => a.iter().collect(),
        o => vec![o],
    };
    objs.iter()
        .map(|o| QaItem::new(o["Q"].as_str().unwrap(), o["A"].as_str().unwrap()))
        .collect()
}

#[test]
fn corpus_has_thirty_cases() {
    assert_eq!(corpus().len(), 30);
}

#[test]
fn tolerant_parse_agrees_with_strict_oracle() {
    let mut failures = Vec::new();
    for c in corpus() {
        let oracle: Value = serde_json::from_str(&c.strict).unwrap_or_else(|e| panic!("{}: bad oracle: {e}", c.name));
        match extract_json(&c.reply) {
            Ok(v) if v == oracle => {}
            Ok(v) => failures.push(format!("{}: value {v} != {oracle}", c.name)),
            Err(e) => failures.push(format!("{}: {e}", c.name)),
        }
        match parse_llm_mapping(&c.reply, expect_for(&oracle)) {
            Ok(items) if items == oracle_items(&oracle) => {}
            Ok(items) => failures.push(format!("{}: items {items:?}", c.name)),
            Err(e) => failures.push(format!("{}: {e}", c.name)),
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn arity_and_missing_keys_are_rejected() {
    let two = r#"[{"Q": "q1", "A": "a1"}, {"Q": "q2", "A": "a2"}]"#;
    assert_eq!(
        parse_llm_mapping(two, Expect::List(3)),
        Err(ParseError::Arity { expected: 3, found: 2 })
    );
    assert!(matches!(
        parse_llm_mapping(r#"{"Q": "q"}"#, Expect::Single),
        Err(ParseError::MissingKey { key: "A", .. })
    ));
    assert!(matches!(
        parse_llm_mapping("I cannot help with that.", Expect::Single),
        Err(ParseError::Unparseable(_))
    ));
}
