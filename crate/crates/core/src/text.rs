//! Tokenization and the shared stopword list.
//!
//! All lexical scoring, token labeling and the deterministic embedder use the
//! same tokenizer: lowercase, split on non-alphanumeric characters. Keeping a
//! single tokenizer means lexical scores, hop queries and hashed embeddings
//! agree on what a "term" is.

use std::collections::BTreeSet;

/// Fixed stopword list used by lexical overlap and token labeling.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "did", "do",
    "does", "for", "from", "has", "have", "how", "if", "in", "into", "is",
    "it", "its", "no", "not", "of", "on", "or", "so", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "to",
    "was", "were", "what", "when", "where", "which", "who", "whom", "why",
    "will", "with", "you", "your",
];

/// The stopword list as an owned set, for configs that carry their own copy.
pub fn default_stopwords() -> BTreeSet<String> {
    STOPWORDS.iter().map(|s| (*s).to_string()).collect()
}

/// Lowercased tokens, split on non-alphanumeric boundaries. Empty segments
/// are dropped, so punctuation runs never produce tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Tokens with their original casing preserved, same boundaries as
/// [`tokenize`]. Used by the token labeler to detect capitalization.
pub fn tokenize_cased(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_splits_on_punctuation() {
        assert_eq!(
            tokenize("Scott Derrickson's 1994 film!"),
            vec!["scott", "derrickson", "s", "1994", "film"]
        );
    }

    #[test]
    fn tokenize_empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("--- ...").is_empty());
    }

    #[test]
    fn cased_tokens_align_with_lowercase_tokens() {
        let text = "Ed Wood, 1994";
        let cased = tokenize_cased(text);
        let lower = tokenize(text);
        assert_eq!(cased.len(), lower.len());
        for (c, l) in cased.iter().zip(&lower) {
            assert_eq!(c.to_lowercase(), *l);
        }
    }

    #[test]
    fn stopword_list_is_deduplicated() {
        let set = default_stopwords();
        assert_eq!(set.len(), STOPWORDS.len());
    }
}
