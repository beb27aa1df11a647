//! Tokenization helpers shared by the lexical scorer and the corpus analyses.

/// Lowercased alphanumeric runs.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

const NEGATION_WORDS: [&str; 3] = ["not", "no", "never"];

/// Whether the text carries one of the cues `not`, `no`, `never`, `n't`.
pub fn has_negation_cue(text: &str) -> bool {
    let lower = text.to_lowercase();
    if lower.contains("n't") || lower.contains("n\u{2019}t") {
        return true;
    }
    word_tokens(&lower)
        .iter()
        .any(|t| NEGATION_WORDS.contains(&t.as_str()))
}
