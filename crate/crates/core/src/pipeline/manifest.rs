use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{format_err, Error, Result};

use super::layout::read_text;

/// One parallel utterance of the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub source_wav: PathBuf,
    pub source_labels: PathBuf,
    pub target_wav: PathBuf,
    pub target_labels: PathBuf,
}

/// Parses `utt_id src_wav src_lab tgt_wav tgt_lab` lines. Blank lines and
/// `#` comments are skipped; relative paths are taken relative to `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(format_err(format!("manifest line {}: expected 5 fields, found {}", n + 1, f.len())));
        }
        if !seen.insert(f[0].to_string()) {
            return Err(format_err(format!("manifest line {}: duplicate utterance id {}", n + 1, f[0])));
        }
        let path = |s: &str| {
            let p = PathBuf::from(s);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        out.push(ManifestEntry {
            id: f[0].to_string(),
            source_wav: path(f[1]),
            source_labels: path(f[2]),
            target_wav: path(f[3]),
            target_labels: path(f[4]),
        });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&read_text(path)?, base).map_err(|e| e.at_path(path))
}

/// Utterance ids, one per line.
pub fn read_id_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    Ok(read_text(path)?
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Train and test id lists, checked to be disjoint.
pub fn read_splits(train: &Path, test: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let train_ids = read_id_list(train)?;
    let test_ids = read_id_list(test)?;
    let set: HashSet<&String> = train_ids.iter().collect();
    if let Some(dup) = test_ids.iter().find(|id| set.contains(id)) {
        return Err(Error::Config(format!("utterance {dup} is in both train and test lists")));
    }
    Ok((train_ids, test_ids))
}
