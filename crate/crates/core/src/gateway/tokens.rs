use serde::{Deserialize, Serialize};

/// Estimated model tokens for a piece of text.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TokenCount(pub usize);

impl TokenCount {
    /// Upper bound on the UTF-8 byte length of text that estimates to at most
    /// this many tokens.
    pub fn max_bytes(self) -> usize {
        self.0.saturating_mul(BYTES_PER_TOKEN)
    }
}

const BYTES_PER_TOKEN: usize = 4;

/// `ceil(utf8_len / 4)`. Pure, and monotone under concatenation.
pub fn estimate_tokens(text: &str) -> TokenCount {
    TokenCount(text.len().div_ceil(BYTES_PER_TOKEN))
}
