use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub chunk_max_chars: usize,
    pub overlap_chars: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            chunk_max_chars: 1000,
            overlap_chars: 200,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_max_chars < 100 {
            return Err(Error::InvalidConfig("chunk_max_chars must be at least 100".into()));
        }
        if self.overlap_chars >= self.chunk_max_chars {
            return Err(Error::InvalidConfig(
                "overlap_chars must be smaller than chunk_max_chars".into(),
            ));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        self.chunk_max_chars - self.overlap_chars
    }
}

/// One slice of a source text. Offsets and lengths count chars, not bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextChunk {
    pub text: String,
    /// Char offset of the first char in the source.
    pub start: usize,
    /// Number of leading chars repeated from the previous chunk.
    pub overlap: usize,
}

fn paragraph_break() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:\r?\n[ \t]*){2,}").expect("static regex"))
}

/// Splits `text` into paragraphs whose concatenation is `text`. Each
/// paragraph keeps its trailing blank-line separator.
fn paragraphs(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut from = 0;
    for m in paragraph_break().find_iter(text) {
        if m.end() > from {
            out.push(&text[from..m.end()]);
            from = m.end();
        }
    }
    if from < text.len() {
        out.push(&text[from..]);
    }
    out
}

/// Chunks `text` for embedding.
///
/// Whole paragraphs are packed greedily up to `chunk_max_chars`. A paragraph
/// longer than that is cut with a sliding window of stride
/// `chunk_max_chars - overlap_chars`, so consecutive windows repeat
/// `overlap_chars` chars. Whitespace-only input yields no chunks.
pub fn chunk_text(text: &str, cfg: &ChunkingConfig) -> Vec<TextChunk> {
    if text.trim().is_empty() {
        return Vec::new();
    }
    let max = cfg.chunk_max_chars;
    let mut chunks = Vec::new();
    let mut pending = String::new();
    let mut pending_len = 0usize;
    let mut pending_start = 0usize;
    let mut cursor = 0usize;

    for para in paragraphs(text) {
        let len = para.chars().count();
        if len > max {
            flush(&mut chunks, &mut pending, &mut pending_len, pending_start);
            window(&mut chunks, para, len, cursor, cfg);
            pending_start = cursor + len;
        } else if pending_len + len <= max {
            if pending.is_empty() {
                pending_start = cursor;
            }
            pending.push_str(para);
            pending_len += len;
        } else {
            flush(&mut chunks, &mut pending, &mut pending_len, pending_start);
            pending_start = cursor;
            pending.push_str(para);
            pending_len = len;
        }
        cursor += len;
    }
    flush(&mut chunks, &mut pending, &mut pending_len, pending_start);
    chunks
}

fn flush(chunks: &mut Vec<TextChunk>, pending: &mut String, pending_len: &mut usize, start: usize) {
    if !pending.is_empty() {
        chunks.push(TextChunk {
            text: std::mem::take(pending),
            start,
            overlap: 0,
        });
        *pending_len = 0;
    }
}

fn window(chunks: &mut Vec<TextChunk>, para: &str, len: usize, base: usize, cfg: &ChunkingConfig) {
    // Byte offset of every char boundary, plus the end.
    let bounds: Vec<usize> = para
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(para.len()))
        .collect();
    let mut start = 0;
    let mut prev_end: usize = 0;
    while start < len {
        let end = (start + cfg.chunk_max_chars).min(len);
        chunks.push(TextChunk {
            text: para[bounds[start]..bounds[end]].to_owned(),
            start: base + start,
            overlap: prev_end.saturating_sub(start),
        });
        prev_end = end;
        start += cfg.stride();
    }
}

/// Concatenates chunks with their repeated prefixes removed.
pub fn reassemble(chunks: &[TextChunk]) -> String {
    chunks.iter().flat_map(|c| c.text.chars().skip(c.overlap)).collect()
}
