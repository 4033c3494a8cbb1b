// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Embedding caches.
//!
//! Layout: `"EMB1" | count u32 | dim u32 | count × (id_len u32 | UTF-8 id |
//! dim × f32)`, all little-endian. The encoder name lives only in memory;
//! the file format has no slot for it.

use std::collections::BTreeSet;
use std::path::Path;

use glyphforge_core::analysis::EmbeddingSet;
use glyphforge_core::encoder::Embedding;

use crate::error::{io_err, Error, Result};
use crate::fsutil::atomic_write;

pub const CACHE_MAGIC: [u8; 4] = *b"EMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRecord {
    pub id: String,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    pub encoder: String,
    dim: usize,
    records: Vec<CacheRecord>,
}

impl EmbeddingCache {
    pub fn new(encoder: impl Into<String>, dim: usize) -> Self {
        EmbeddingCache {
            encoder: encoder.into(),
            dim,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[CacheRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CacheRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn push(&mut self, id: impl Into<String>, values: Vec<f32>) -> Result<()> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(Error::Format(format!(
                "record `{id}` has dimension {}, cache holds {}",
                values.len(),
                self.dim
            )));
        }
        if self.get(&id).is_some() {
            return Err(Error::Format(format!("duplicate cache id `{id}`")));
        }
        self.records.push(CacheRecord { id, values });
        Ok(())
    }

    /// Stores `embeddings` narrowed to f32.
    pub fn from_embeddings(encoder: impl Into<String>, dim: usize, embeddings: &[Embedding]) -> Result<Self> {
        let mut cache = EmbeddingCache::new(encoder, dim);
        for e in embeddings {
            cache.push(e.id.clone(), e.values.iter().map(|&v| v as f32).collect())?;
        }
        Ok(cache)
    }

    pub fn to_embeddings(&self) -> Vec<Embedding> {
        self.records
            .iter()
            .map(|r| Embedding::new(r.id.clone(), r.values.iter().map(|&v| f64::from(v)).collect()))
            .collect()
    }

    pub fn to_set(&self) -> Result<EmbeddingSet> {
        Ok(EmbeddingSet::new(self.to_embeddings())?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CACHE_MAGIC);
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.id.len() as u32).to_le_bytes());
            out.extend_from_slice(r.id.as_bytes());
            for v in &r.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a whole cache file. Nothing is returned unless every record
    /// is present and the buffer ends exactly after the last one.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != CACHE_MAGIC {
            return Err(Error::Format("not an embedding cache (bad magic)".into()));
        }
        let mut reader = Reader { bytes, pos: 4 };
        let count = reader.u32("record count")? as usize;
        let dim = reader.u32("dimension")? as usize;
        let mut records = Vec::new();
        let mut seen = BTreeSet::new();
        for index in 0..count {
            let id_len = reader.u32("id length")? as usize;
            let id = std::str::from_utf8(reader.take(id_len, "id")?)
                .map_err(|_| Error::Format(format!("record {index} id is not UTF-8")))?
                .to_owned();
            if !seen.insert(id.clone()) {
                return Err(Error::Format(format!("duplicate cache id `{id}`")));
            }
            let raw = reader.take(
                dim.checked_mul(4)
                    .ok_or_else(|| Error::Format("dimension overflows".into()))?,
                "values",
            )?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            records.push(CacheRecord { id, values });
        }
        if reader.pos != bytes.len() {
            return Err(Error::Length(format!(
                "{} bytes follow the declared {count} records",
                bytes.len() - reader.pos
            )));
        }
        Ok(EmbeddingCache {
            encoder: String::new(),
            dim,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        EmbeddingCache::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::Length(format!(
                "truncated {what}: need {n} bytes at offset {}, {available} left",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}
