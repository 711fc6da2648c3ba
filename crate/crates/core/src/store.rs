//! Embedding gallery: the `.emb` binary interchange format and the in-memory
//! store with upsert and filtered views.
//!
//! Layout (little-endian):
//!
//! ```text
//! "EMB1" | version u8 = 1 | 3 reserved bytes | dim u32 | count u64
//! | encoder_id: u16 length + UTF-8
//! then per record:
//!   key "video_id/frame_index": u16 length + UTF-8
//!   label flag u8 (0/1) [+ label: u16 length + UTF-8]
//!   dim × f32
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{EmbeddingRecord, FrameKey};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    encoder_id: String,
    dim: usize,
    records: Vec<EmbeddingRecord>,
    index: HashMap<FrameKey, usize>,
}

impl EmbeddingStore {
    pub fn new(encoder_id: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "embedding dim must be positive".into(),
            ));
        }
        Ok(EmbeddingStore {
            encoder_id: encoder_id.into(),
            dim,
            records: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in insertion order.
    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, key: &FrameKey) -> Option<&EmbeddingRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    fn check(&self, r: &EmbeddingRecord) -> Result<()> {
        if r.encoder_id != self.encoder_id {
            return Err(Error::EncoderMismatch {
                expected: self.encoder_id.clone(),
                actual: r.encoder_id.clone(),
            });
        }
        if r.vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: r.vector.len(),
            });
        }
        if !r.vector.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Appends new keys and replaces existing ones in place. Either every
    /// record is accepted or the store is left untouched.
    pub fn upsert<I>(&mut self, records: I) -> Result<()>
    where
        I: IntoIterator<Item = EmbeddingRecord>,
    {
        let records: Vec<_> = records.into_iter().collect();
        for r in &records {
            self.check(r)?;
        }
        for r in records {
            let key = r.key();
            match self.index.get(&key) {
                Some(&pos) => self.records[pos] = r,
                None => {
                    self.index.insert(key, self.records.len());
                    self.records.push(r);
                }
            }
        }
        Ok(())
    }

    /// Consuming form of [`upsert`](Self::upsert).
    pub fn upserted<I>(mut self, records: I) -> Result<Self>
    where
        I: IntoIterator<Item = EmbeddingRecord>,
    {
        self.upsert(records)?;
        Ok(self)
    }

    /// Stable-ordered view of the records matching `pred`.
    pub fn filter_by<F>(&self, pred: F) -> StoreView<'_>
    where
        F: Fn(&EmbeddingRecord) -> bool,
    {
        StoreView {
            dim: self.dim,
            records: self.records.iter().filter(|r| pred(r)).collect(),
        }
    }

    pub fn view(&self) -> StoreView<'_> {
        self.filter_by(|_| true)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(32 + self.records.len() * (24 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&[0u8; 3]);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        put_str(&mut out, &self.encoder_id)?;
        for r in &self.records {
            put_str(&mut out, &r.key().to_string())?;
            match &r.label {
                Some(label) => {
                    out.push(1);
                    put_str(&mut out, label)?;
                }
                None => out.push(0),
            }
            for v in &r.vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4, "magic")? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = cur.take(1, "version")?[0];
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        cur.take(3, "reserved")?;
        let dim = u32::from_le_bytes(cur.take(4, "dim")?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(cur.take(8, "count")?.try_into().unwrap());
        let encoder_id = cur.string("encoder_id")?;
        let mut store = EmbeddingStore::new(encoder_id, dim)?;
        for i in 0..count {
            let key_text = cur.string("record key")?;
            let key = FrameKey::parse(&key_text)
                .ok_or_else(|| Error::Truncated(format!("record {i}: bad key {key_text:?}")))?;
            let label = match cur.take(1, "label flag")?[0] {
                0 => None,
                1 => Some(cur.string("label")?),
                f => return Err(Error::Truncated(format!("record {i}: bad label flag {f}"))),
            };
            let raw = cur.take(4 * dim, "vector")?;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if store.index.contains_key(&key) {
                return Err(Error::DuplicateKey(key.to_string()));
            }
            let rec = EmbeddingRecord {
                video_id: key.video_id,
                frame_index: key.frame_index,
                encoder_id: store.encoder_id.clone(),
                vector,
                label,
            };
            store.upsert([rec])?;
        }
        if cur.pos != bytes.len() {
            return Err(Error::DimensionMismatch {
                expected: cur.pos,
                actual: bytes.len(),
            });
        }
        Ok(store)
    }
}

/// Borrowed subset of a store's records.
#[derive(Debug, Clone)]
pub struct StoreView<'a> {
    dim: usize,
    records: Vec<&'a EmbeddingRecord>,
}

impl<'a> StoreView<'a> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a EmbeddingRecord> + '_ {
        self.records.iter().copied()
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::InvalidParameter(format!("string too long: {} bytes", s.len())))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!("{what} at byte {}", self.pos))),
        }
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()) as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Truncated(format!("{what}: invalid UTF-8")))
    }
}

pub fn write_store(store: &EmbeddingStore, path: &Path) -> Result<()> {
    fs::write(path, store.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_store(path: &Path) -> Result<EmbeddingStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes)
}
