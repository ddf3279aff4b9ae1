//! Assignment-scoped flat vector index.
//!
//! Every query is an exhaustive scan, so results are exact: top-k by cosine
//! score, ties broken by ascending chunk id. The whole index is persisted as
//! one line-delimited file (`chunks.vec`): a header line with magic, format
//! version and dimension, then one JSON object per ingested material.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::domain::{Chunk, MaterialKind};
use crate::error::{Error, Result};
use crate::id::Id;
use crate::store::atomic::write_atomic;

pub const INDEX_MAGIC: &str = "LEAFTUTOR-VEC";
pub const INDEX_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub assignment_id: Id,
    pub query_text: String,
    pub k: usize,
    pub kind_filter: Option<BTreeSet<MaterialKind>>,
}

impl RetrievalQuery {
    pub fn new(assignment_id: Id, query_text: impl Into<String>) -> Self {
        Self {
            assignment_id,
            query_text: query_text.into(),
            k: DEFAULT_TOP_K,
            kind_filter: None,
        }
    }
}

/// Where a chunk came from, carried alongside search hits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSource {
    pub material_id: Id,
    pub kind: MaterialKind,
    pub filename: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub score: f64,
    pub source: ChunkSource,
}

/// All chunks of one material, the unit of atomic replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedMaterial {
    pub material_id: Id,
    pub assignment_id: Id,
    pub kind: MaterialKind,
    pub filename: String,
    pub content_hash: String,
    pub chunks: Vec<Chunk>,
}

type Snapshot = Arc<BTreeMap<Id, IndexedMaterial>>;

pub struct VectorIndex {
    path: Option<PathBuf>,
    dimension: usize,
    state: RwLock<Snapshot>,
    writer: Mutex<()>,
}

/// Orders hits by score descending, then chunk id ascending.
pub fn rank_order(a: &ScoredChunk, b: &ScoredChunk) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.chunk.chunk_id.cmp(&b.chunk.chunk_id))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl VectorIndex {
    pub fn in_memory(dimension: usize) -> Self {
        Self {
            path: None,
            dimension,
            state: RwLock::new(Arc::default()),
            writer: Mutex::new(()),
        }
    }

    /// Opens (or creates) the index file at `path`.
    pub fn open(path: impl Into<PathBuf>, dimension: usize) -> Result<Self> {
        let path = path.into();
        let materials = if path.exists() {
            load(&path, dimension)?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            path: Some(path),
            dimension,
            state: RwLock::new(Arc::new(materials)),
            writer: Mutex::new(()),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn snapshot(&self) -> Snapshot {
        self.state.read().clone()
    }

    /// Applies `edit` to a copy of the state, persists it, then publishes it.
    /// Readers keep seeing the previous snapshot until the file is in place.
    fn commit<T>(&self, edit: impl FnOnce(&mut BTreeMap<Id, IndexedMaterial>) -> T) -> Result<T> {
        let _w = self.writer.lock();
        let mut next = (*self.snapshot()).clone();
        let out = edit(&mut next);
        if let Some(path) = &self.path {
            persist(path, self.dimension, &next).map_err(|e| Error::AtomicWriteFailed(e.to_string()))?;
        }
        *self.state.write() = Arc::new(next);
        Ok(out)
    }

    /// Content hash the material was last indexed under.
    pub fn indexed_hash(&self, material_id: &Id) -> Option<String> {
        self.snapshot().get(material_id).map(|m| m.content_hash.clone())
    }

    /// Replaces every chunk of `entry.material_id` in one atomic step.
    pub fn replace_material(&self, entry: IndexedMaterial) -> Result<()> {
        for c in &entry.chunks {
            if c.vector.len() != self.dimension {
                return Err(Error::Validation(format!(
                    "chunk vector has {} dimensions, index expects {}",
                    c.vector.len(),
                    self.dimension
                )));
            }
        }
        self.commit(|m| {
            m.insert(entry.material_id.clone(), entry);
        })
    }

    /// Drops a material's chunks; returns how many were removed.
    pub fn remove_material(&self, material_id: &Id) -> Result<usize> {
        if !self.snapshot().contains_key(material_id) {
            return Ok(0);
        }
        self.commit(|m| m.remove(material_id).map_or(0, |e| e.chunks.len()))
    }

    pub fn chunks_for_material(&self, material_id: &Id) -> Vec<Chunk> {
        self.snapshot()
            .get(material_id)
            .map(|m| m.chunks.clone())
            .unwrap_or_default()
    }

    pub fn get_chunk(&self, chunk_id: &Id) -> Option<Chunk> {
        self.snapshot()
            .values()
            .flat_map(|m| m.chunks.iter())
            .find(|c| &c.chunk_id == chunk_id)
            .cloned()
    }

    pub fn chunk_count(&self) -> usize {
        self.snapshot().values().map(|m| m.chunks.len()).sum()
    }

    /// Exact top-k over chunks of `assignment_id` passing `kind_filter`.
    pub fn search(
        &self,
        assignment_id: &Id,
        query_vector: &[f64],
        k: usize,
        kind_filter: Option<&BTreeSet<MaterialKind>>,
    ) -> Vec<ScoredChunk> {
        let snap = self.snapshot();
        let mut hits: Vec<ScoredChunk> = snap
            .values()
            .filter(|m| &m.assignment_id == assignment_id)
            .filter(|m| kind_filter.is_none_or(|f| f.contains(&m.kind)))
            .flat_map(|m| {
                let source = ChunkSource {
                    material_id: m.material_id.clone(),
                    kind: m.kind,
                    filename: m.filename.clone(),
                };
                m.chunks.iter().map(move |c| ScoredChunk {
                    score: dot(query_vector, &c.vector),
                    chunk: c.clone(),
                    source: source.clone(),
                })
            })
            .collect();
        hits.sort_by(rank_order);
        hits.truncate(k);
        hits
    }
}

fn persist(path: &Path, dimension: usize, materials: &BTreeMap<Id, IndexedMaterial>) -> std::io::Result<()> {
    let mut buf = format!("{INDEX_MAGIC} {INDEX_VERSION} {dimension}\n").into_bytes();
    for m in materials.values() {
        serde_json::to_writer(&mut buf, m)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

fn load(path: &Path, dimension: usize) -> Result<BTreeMap<Id, IndexedMaterial>> {
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Corrupt("empty vector index file".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    let (version, dim) = match fields.as_slice() {
        [magic, v, d] if *magic == INDEX_MAGIC => (
            v.parse::<u32>()
                .map_err(|_| Error::Corrupt("bad index version".into()))?,
            d.parse::<usize>()
                .map_err(|_| Error::Corrupt("bad index dimension".into()))?,
        ),
        _ => return Err(Error::Corrupt("vector index header missing magic".into())),
    };
    if version > INDEX_VERSION {
        return Err(Error::SchemaTooNew {
            found: version,
            supported: INDEX_VERSION,
        });
    }
    if dim != dimension {
        return Err(Error::InvalidConfig(format!(
            "vector index has dimension {dim}, embedder produces {dimension}"
        )));
    }
    let mut out = BTreeMap::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let m: IndexedMaterial = serde_json::from_str(&line)?;
        out.insert(m.material_id.clone(), m);
    }
    Ok(out)
}
