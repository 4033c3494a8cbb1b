// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! JSON-lines corpus manifests and record filtering.
//!
//! One object per line:
//! `{"path", "category", "kind", "sketchability"?, "system"?, "sign_name"?}`.
//! Blank lines are skipped; unknown keys are ignored with a warning.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::fsutil::atomic_write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Image,
    Sketch,
    Pictograph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WritingSystem {
    Hieroglyph,
    Oracle,
    Protocuneiform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub path: String,
    pub category: String,
    pub kind: RecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketchability: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<WritingSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_name: Option<String>,
}

const FIELDS: [&str; 6] = ["path", "category", "kind", "sketchability", "system", "sign_name"];

impl CorpusRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.path.is_empty() {
            return Err("path must not be empty".into());
        }
        if let Some(s) = self.sketchability {
            if !(1..=5).contains(&s) {
                return Err(format!("sketchability must be within 1..=5, got {s}"));
            }
        }
        if self.kind == RecordKind::Pictograph
            && self.system == Some(WritingSystem::Protocuneiform)
            && self.sign_name.as_deref().is_none_or(str::is_empty)
        {
            return Err("sign_name is required for proto-cuneiform pictographs".into());
        }
        Ok(())
    }

    /// File stem of `path`; the key embeddings are stored under.
    pub fn id(&self) -> String {
        Path::new(&self.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<CorpusRecord>,
    pub warnings: Vec<String>,
    /// Directory relative record paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn resolve(&self, record: &CorpusRecord) -> PathBuf {
        self.base_dir.join(&record.path)
    }
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut manifest = Manifest::default();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Manifest { line: line_no, message };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let object = value.as_object().ok_or_else(|| err("expected a JSON object".into()))?;
        for key in object.keys().filter(|k| !FIELDS.contains(&k.as_str())) {
            manifest
                .warnings
                .push(format!("line {line_no}: ignoring unknown field `{key}`"));
        }
        let record: CorpusRecord = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
        record.validate().map_err(err)?;
        manifest.records.push(record);
    }
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut manifest = parse_manifest(&text)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}

pub fn manifest_to_string(records: &[CorpusRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records always serialize") + "\n")
        .collect()
}

pub fn save_manifest(records: &[CorpusRecord], path: &Path) -> Result<()> {
    atomic_write(path, manifest_to_string(records).as_bytes())
}

/// Conjunction of optional criteria. Sketchability bounds only apply to
/// records that carry a rating; prefix exclusions only to records with a
/// sign name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecordFilter {
    pub categories: Option<BTreeSet<String>>,
    pub kinds: Option<BTreeSet<RecordKind>>,
    pub systems: Option<BTreeSet<WritingSystem>>,
    pub min_sketchability: Option<u8>,
    pub max_sketchability: Option<u8>,
    pub exclude_prefixes: Vec<String>,
}

impl RecordFilter {
    pub fn accepts(&self, r: &CorpusRecord) -> bool {
        if self.categories.as_ref().is_some_and(|c| !c.contains(&r.category)) {
            return false;
        }
        if self.kinds.as_ref().is_some_and(|k| !k.contains(&r.kind)) {
            return false;
        }
        if let Some(systems) = &self.systems {
            if !r.system.is_some_and(|s| systems.contains(&s)) {
                return false;
            }
        }
        if let Some(level) = r.sketchability {
            if self.min_sketchability.is_some_and(|m| level < m) || self.max_sketchability.is_some_and(|m| level > m) {
                return false;
            }
        }
        if let Some(name) = &r.sign_name {
            if self.exclude_prefixes.iter().any(|p| name.starts_with(p.as_str())) {
                return false;
            }
        }
        true
    }
}

/// Records accepted by `filter`, in their original order.
pub fn filter_records(records: &[CorpusRecord], filter: &RecordFilter) -> Vec<CorpusRecord> {
    records.iter().filter(|r| filter.accepts(r)).cloned().collect()
}
