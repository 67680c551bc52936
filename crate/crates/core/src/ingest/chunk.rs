use serde::{Deserialize, Serialize};

use crate::gateway::{estimate_tokens, TokenCount};

pub const DEFAULT_CHUNK_BUDGET: TokenCount = TokenCount(3000);
pub const DEFAULT_CHUNK_OVERLAP: TokenCount = TokenCount(200);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub index: usize,
    pub text: String,
    pub token_estimate: TokenCount,
    /// Byte offset of `text` in the source.
    pub start: usize,
    /// Leading bytes of `text` repeated from the previous chunk.
    pub overlap: usize,
}

/// Splits `text` into chunks of at most `budget` estimated tokens, each
/// repeating up to `overlap` tokens from the end of its predecessor.
///
/// A split lands on the last blank line in the second half of the window if
/// there is one, otherwise on the last line break there, otherwise at the
/// window edge (rounded down to a character boundary).
///
/// # Panics
///
/// If `budget <= overlap`.
pub fn chunk_text(text: &str, budget: TokenCount, overlap: TokenCount) -> Vec<TextChunk> {
    assert!(budget > overlap, "chunk budget must exceed overlap");
    let max = budget.max_bytes();
    let back = overlap.max_bytes();

    let mut chunks = Vec::new();
    let mut start = 0;
    let mut prev_end = 0;
    loop {
        let end = if text.len() - start <= max {
            text.len()
        } else {
            split_point(text, start, max, prev_end)
        };
        let piece = &text[start..end];
        chunks.push(TextChunk {
            index: chunks.len(),
            text: piece.to_string(),
            token_estimate: estimate_tokens(piece),
            start,
            overlap: prev_end.saturating_sub(start),
        });
        if end == text.len() {
            return chunks;
        }
        let next = end.saturating_sub(back).max(start + 1);
        start = ceil_boundary(text, next).min(end);
        prev_end = end;
    }
}

fn split_point(text: &str, start: usize, max: usize, prev_end: usize) -> usize {
    let window_end = floor_boundary(text, start + max);
    let lo = ceil_boundary(text, (start + max / 2).max(prev_end + 1));
    if lo < window_end {
        let window = &text[lo..window_end];
        if let Some(i) = window.rfind("\n\n") {
            return lo + i + 2;
        }
        if let Some(i) = window.rfind('\n') {
            return lo + i + 1;
        }
    }
    window_end
}

fn floor_boundary(text: &str, mut i: usize) -> usize {
    i = i.min(text.len());
    while !text.is_char_boundary(i) {
        i -= 1;
    }
    i
}

fn ceil_boundary(text: &str, mut i: usize) -> usize {
    i = i.min(text.len());
    while !text.is_char_boundary(i) {
        i += 1;
    }
    i
}

/// Concatenates chunks, dropping each chunk's repeated prefix.
pub fn reassemble(chunks: &[TextChunk]) -> String {
    chunks.iter().map(|c| &c.text[c.overlap..]).collect()
}
