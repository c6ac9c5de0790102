//! The shared raw-text pipeline feeding every classical baseline:
//! tokenization, raw term counts and smoothed TF-IDF.

mod vectorizer;

pub use vectorizer::{SparseVector, Vectorizer, VectorizerConfig};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("cannot fit a vectorizer on an empty corpus")]
    EmptyCorpus,
    #[error("vectorizer file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn is_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

/// Lowercases, drops URLs and `@mentions`, then splits on anything that is
/// not alphanumeric.
///
/// ```
/// assert_eq!(tcls::text::preprocess("Visit http://x.co NOW @user"), ["visit", "now"]);
/// ```
pub fn preprocess(raw: &str) -> Vec<String> {
    raw.to_lowercase()
        .split_whitespace()
        .filter(|w| !is_url(w) && !w.starts_with('@'))
        .flat_map(|w| w.split(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}
