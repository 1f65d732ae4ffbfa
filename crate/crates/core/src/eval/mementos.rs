use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const VERBS: &str = include_str!("../../assets/mementos/verbs.txt");
const NOUNS: &str = include_str!("../../assets/mementos/nouns.txt");
const SYNONYMS: &str = include_str!("../../assets/mementos/synonyms.json");

/// Irregular inflections mapped to their base form.
const IRREGULAR: &[(&str, &str)] = &[
    ("ate", "eat"),
    ("eaten", "eat"),
    ("drank", "drink"),
    ("drunk", "drink"),
    ("sat", "sit"),
    ("stood", "stand"),
    ("took", "take"),
    ("taken", "take"),
    ("threw", "throw"),
    ("thrown", "throw"),
    ("fell", "fall"),
    ("fallen", "fall"),
    ("gave", "give"),
    ("given", "give"),
    ("held", "hold"),
    ("made", "make"),
    ("ran", "run"),
    ("wrote", "write"),
    ("written", "write"),
    ("wore", "wear"),
    ("worn", "wear"),
    ("tore", "tear"),
    ("torn", "tear"),
    ("put", "put"),
    ("cut", "cut"),
    ("hit", "hit"),
    ("lay", "lie"),
    ("lying", "lie"),
    ("knelt", "kneel"),
    ("shook", "shake"),
    ("swung", "swing"),
    ("caught", "catch"),
    ("stepped", "step"),
    ("people", "person"),
    ("feet", "foot"),
    ("knives", "knife"),
    ("shelves", "shelf"),
    ("dishes", "dish"),
    ("boxes", "box"),
    ("brushes", "brush"),
    ("glasses", "glasses"),
    ("scissors", "scissors"),
    ("clothes", "clothes"),
];

/// Verb and noun vocabularies with synonym folding.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub verbs: HashSet<String>,
    pub nouns: HashSet<String>,
    pub synonyms: HashMap<String, String>,
}

fn word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Lexicon {
    pub fn builtin() -> Self {
        Lexicon::new(
            word_list(VERBS),
            word_list(NOUNS),
            serde_json::from_str(SYNONYMS).expect("bundled synonym map is valid JSON"),
        )
        .expect("bundled vocabularies are non-empty")
    }

    pub fn new(verbs: HashSet<String>, nouns: HashSet<String>, synonyms: HashMap<String, String>) -> Result<Self> {
        if verbs.is_empty() || nouns.is_empty() {
            return Err(Error::Precondition("verb and noun vocabularies must be non-empty".into()));
        }
        Ok(Lexicon { verbs, nouns, synonyms })
    }

    fn fold(&self, w: &str) -> String {
        self.synonyms.get(w).cloned().unwrap_or_else(|| w.to_string())
    }

    /// First candidate base form found in `vocab`, after synonym folding.
    fn lemma_in(&self, word: &str, vocab: &HashSet<String>) -> Option<String> {
        lemma_candidates(word)
            .into_iter()
            .map(|c| self.fold(&c))
            .find(|c| vocab.contains(c))
    }

    /// Verb and noun keyword sets of a text.
    pub fn keywords(&self, text: &str) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut verbs = BTreeSet::new();
        let mut nouns = BTreeSet::new();
        for word in text
            .to_lowercase()
            .split(|c: char| !c.is_alphabetic() && c != '\'')
            .map(|w| w.trim_matches('\''))
            .filter(|w| !w.is_empty())
        {
            if let Some(v) = self.lemma_in(word, &self.verbs) {
                verbs.insert(v);
            }
            if let Some(n) = self.lemma_in(word, &self.nouns) {
                nouns.insert(n);
            }
        }
        (verbs, nouns)
    }
}

/// Rule-based inflection stripping; the word itself comes first.
pub fn lemma_candidates(word: &str) -> Vec<String> {
    let w = word.strip_suffix("'s").unwrap_or(word);
    let mut out = vec![w.to_string()];
    if let Some((_, base)) = IRREGULAR.iter().find(|(f, _)| *f == w) {
        out.push(base.to_string());
    }
    let undouble = |stem: &str| -> Option<String> {
        let b = stem.as_bytes();
        (b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2]).then(|| stem[..stem.len() - 1].to_string())
    };
    for suffix in ["ing", "ed"] {
        if let Some(stem) = w.strip_suffix(suffix).filter(|s| s.len() >= 2) {
            out.push(stem.to_string());
            out.push(format!("{stem}e"));
            out.extend(undouble(stem));
        }
    }
    if let Some(stem) = w.strip_suffix("ies") {
        out.push(format!("{stem}y"));
    }
    if let Some(stem) = w.strip_suffix("es") {
        out.push(stem.to_string());
    }
    if let Some(stem) = w.strip_suffix('s').filter(|s| !s.ends_with('s')) {
        out.push(stem.to_string());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set precision/recall/F1 of `generated` against `reference`; empty
/// denominators give 0.
pub fn prf<T: Ord>(generated: &BTreeSet<T>, reference: &BTreeSet<T>) -> Prf {
    let hit = generated.intersection(reference).count() as f64;
    let precision = if generated.is_empty() { 0.0 } else { hit / generated.len() as f64 };
    let recall = if reference.is_empty() { 0.0 } else { hit / reference.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MementosScore {
    pub verb_f1: f64,
    pub noun_f1: f64,
    /// Over verb and noun keywords pooled.
    pub precision: f64,
    pub recall: f64,
}

pub fn mementos_f1(generated: &str, reference: &str, lex: &Lexicon) -> MementosScore {
    let (gv, gn) = lex.keywords(generated);
    let (rv, rn) = lex.keywords(reference);
    let tag = |v: &BTreeSet<String>, n: &BTreeSet<String>| -> BTreeSet<String> {
        v.iter().map(|x| format!("v:{x}")).chain(n.iter().map(|x| format!("n:{x}"))).collect()
    };
    let pooled = prf(&tag(&gv, &gn), &tag(&rv, &rn));
    MementosScore {
        verb_f1: prf(&gv, &rv).f1,
        noun_f1: prf(&gn, &rn).f1,
        precision: pooled.precision,
        recall: pooled.recall,
    }
}

/// Macro average over videos.
pub fn mementos_corpus(scores: &[MementosScore]) -> MementosScore {
    let n = scores.len().max(1) as f64;
    let mean = |f: fn(&MementosScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    MementosScore {
        verb_f1: mean(|s| s.verb_f1),
        noun_f1: mean(|s| s.noun_f1),
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
    }
}
