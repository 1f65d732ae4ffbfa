use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NTU120: &str = include_str!("../../assets/ntu120_actions.json");

#[derive(Debug, Serialize, Deserialize)]
struct ActionTableDoc {
    name: String,
    version: u32,
    actions: Vec<ActionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActionEntry {
    id: u32,
    label: String,
}

/// Versioned id → label vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionTable {
    pub name: String,
    pub version: u32,
    labels: BTreeMap<u32, String>,
}

impl ActionTable {
    /// The shipped 120-class NTU RGB+D table.
    pub fn ntu120() -> Self {
        Self::from_json(NTU120).expect("bundled action table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ActionTableDoc = serde_json::from_str(text)?;
        let mut labels = BTreeMap::new();
        for entry in doc.actions {
            if labels.insert(entry.id, entry.label).is_some() {
                return Err(Error::Invalid(format!(
                    "action table lists id {} twice",
                    entry.id
                )));
            }
        }
        if labels.is_empty() {
            return Err(Error::Invalid("action table is empty".into()));
        }
        Ok(ActionTable {
            name: doc.name,
            version: doc.version,
            labels,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (u32, S)>,
        S: Into<String>,
    {
        ActionTable {
            name: "custom".into(),
            version: 1,
            labels: pairs.into_iter().map(|(i, s)| (i, s.into())).collect(),
        }
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(&id).map(String::as_str)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.labels.contains_key(&id)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.labels.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.labels.iter().map(|(k, v)| (*k, v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_json(&self) -> String {
        let doc = ActionTableDoc {
            name: self.name.clone(),
            version: self.version,
            actions: self
                .labels
                .iter()
                .map(|(id, label)| ActionEntry {
                    id: *id,
                    label: label.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}
