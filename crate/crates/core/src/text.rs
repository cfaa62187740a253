//! Shared tokenization rule: lowercase, split on non-alphanumerics.
//!
//! Used identically by the BM25 index, the stub encoder, and the
//! property-graph lexical fallback so that sparse and dense scores see
//! the same token stream.

/// Lowercase tokens split on any non-alphanumeric character.
/// No stemming, no stop-words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(tokenize("The cat, the hat!"), ["the", "cat", "the", "hat"]);
    }

    #[test]
    fn keeps_digits() {
        assert_eq!(tokenize("price $11.80"), ["price", "11", "80"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("  ").is_empty());
    }
}
