use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{ActionTable, ClipRecord};
use crate::error::{Error, Result};

/// Reads a JSON Lines file; blank lines are skipped but still counted.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(read_jsonl_numbered(path)?.into_iter().map(|(_, r)| r).collect())
}

pub(crate) fn read_jsonl_numbered<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::ManifestLine {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads `corpus.jsonl`, enforcing the clip-record invariants.
pub fn load_corpus_manifest(path: &Path, actions: &ActionTable) -> Result<Vec<ClipRecord>> {
    let rows: Vec<(usize, ClipRecord)> = read_jsonl_numbered(path)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut labels: HashMap<u32, (String, usize)> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        rec.check().map_err(|message| Error::ManifestLine {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        if !actions.contains(rec.action_id) {
            return Err(Error::UnknownAction {
                line,
                action_id: rec.action_id,
            });
        }
        if let Some(first) = seen.insert(rec.clip_id.clone(), line) {
            return Err(Error::DuplicateClipId {
                clip_id: rec.clip_id,
                first,
                second: line,
            });
        }
        match labels.get(&rec.action_id) {
            Some((label, first)) if *label != rec.action_label => {
                return Err(Error::ManifestLine {
                    path: path.to_path_buf(),
                    line,
                    message: format!(
                        "action_id {} labelled {:?} here but {:?} on line {first}",
                        rec.action_id, rec.action_label, label
                    ),
                });
            }
            Some(_) => {}
            None => {
                labels.insert(rec.action_id, (rec.action_label.clone(), line));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_corpus_manifest(path: &Path, records: &[ClipRecord]) -> Result<()> {
    write_jsonl(path, records)
}
