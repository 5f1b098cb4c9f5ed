use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { lowercase: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub raw: String,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Contiguous windows of `n` tokens, in order, with repetitions.
    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = &[String]> {
        debug_assert!(n > 0);
        self.tokens.windows(n)
    }
}

/// Splits on whitespace; every non-alphanumeric, non-space character becomes
/// its own token. Runs of letters and digits stay together.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> TokenSeq {
    let folded: String = if config.lowercase {
        text.to_lowercase().nfc().collect()
    } else {
        text.nfc().collect()
    };
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in folded.chars() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenSeq { tokens, raw: text.to_string() }
}

pub(crate) fn tokens(text: &str) -> TokenSeq {
    tokenize(text, &TokenizerConfig::default())
}

pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}
