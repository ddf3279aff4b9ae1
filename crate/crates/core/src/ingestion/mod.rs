//! Material ingestion: chunk, embed, and index instructor uploads.

pub mod chunker;
pub mod embed;

use std::sync::Arc;

pub use chunker::{chunk_text, reassemble, ChunkingConfig, TextChunk};
pub use embed::{Embedder, ExternalEmbedder, HashEmbedder};

use crate::domain::{Chunk, Material};
use crate::error::Result;
use crate::id::Id;
use crate::locks::KeyedLocks;
use crate::retrieval::{IndexedMaterial, VectorIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    /// Zero when the material was already indexed with the same content.
    pub chunks_created: usize,
    pub chunks: Vec<Chunk>,
}

pub struct Ingestor {
    embedder: Arc<dyn Embedder>,
    index: Arc<VectorIndex>,
    config: ChunkingConfig,
    locks: KeyedLocks,
}

impl Ingestor {
    pub fn new(embedder: Arc<dyn Embedder>, index: Arc<VectorIndex>, config: ChunkingConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            embedder,
            index,
            config,
            locks: KeyedLocks::default(),
        })
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn config(&self) -> &ChunkingConfig {
        &self.config
    }

    /// Chunks and embeds `material` without touching the index.
    pub async fn build_chunks(&self, material: &Material) -> Result<Vec<Chunk>> {
        let mut chunks = Vec::new();
        for (seq, piece) in chunk_text(&material.content, &self.config).into_iter().enumerate() {
            let vector = self.embedder.embed(&piece.text).await?;
            chunks.push(Chunk {
                chunk_id: Id::new(),
                material_id: material.material_id.clone(),
                seq,
                text: piece.text,
                vector,
            });
        }
        Ok(chunks)
    }

    /// Indexes `material`, replacing any chunks from an older version of it.
    /// Re-ingesting unchanged content is a no-op.
    pub async fn ingest_material(&self, material: &Material) -> Result<IngestOutcome> {
        let _guard = self.locks.lock(&material.material_id).await;
        if self.index.indexed_hash(&material.material_id).as_deref() == Some(&material.content_hash) {
            return Ok(IngestOutcome {
                chunks_created: 0,
                chunks: self.index.chunks_for_material(&material.material_id),
            });
        }
        let chunks = self.build_chunks(material).await?;
        self.index.replace_material(IndexedMaterial {
            material_id: material.material_id.clone(),
            assignment_id: material.assignment_id.clone(),
            kind: material.kind,
            filename: material.filename.clone(),
            content_hash: material.content_hash.clone(),
            chunks: chunks.clone(),
        })?;
        Ok(IngestOutcome {
            chunks_created: chunks.len(),
            chunks,
        })
    }
}
