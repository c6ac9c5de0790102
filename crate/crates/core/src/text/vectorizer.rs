use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TextError;

const FORMAT_VERSION: u32 = 1;

/// Sparse feature vector: `(column, weight)` pairs with strictly increasing columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds from unordered pairs; duplicate columns are summed, zeros dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in pairs {
            *acc.entry(i).or_insert(0.0) += w;
        }
        Self { entries: acc.into_iter().filter(|(_, w)| *w != 0.0).collect() }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.iter().copied().enumerate())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// One past the largest stored column, or 0 for the zero vector.
    pub fn min_dim(&self) -> usize {
        self.entries.last().map_or(0, |(i, _)| i + 1)
    }

    pub fn get(&self, col: usize) -> f64 {
        self.entries.binary_search_by_key(&col, |(i, _)| *i).map_or(0.0, |k| self.entries[k].1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for &(i, w) in &self.entries {
            if i < dim {
                v[i] = w;
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizerConfig {
    pub lowercase: bool,
    pub min_df: usize,
    pub max_features: usize,
    pub stopwords: Vec<String>,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        Self { lowercase: true, min_df: 1, max_features: 50_000, stopwords: Vec::new() }
    }
}

/// Fitted unigram vocabulary with smoothed inverse document frequencies,
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectorizer {
    config: VectorizerConfig,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

#[derive(Serialize, Deserialize)]
struct VectorizerFile {
    format_version: u32,
    config: VectorizerConfig,
    n_docs: usize,
    tokens: Vec<String>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
}

impl Vectorizer {
    pub fn fit(corpus: &[Vec<String>], config: VectorizerConfig) -> Result<Self, TextError> {
        if corpus.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        let stop: HashSet<&str> = config.stopwords.iter().map(String::as_str).collect();
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in corpus {
            let mut seen = HashSet::new();
            for tok in doc {
                let tok = normalize(tok, config.lowercase);
                if stop.contains(tok.as_str()) {
                    continue;
                }
                if seen.insert(tok.clone()) {
                    *df.entry(tok).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = df.into_iter().filter(|(_, d)| *d >= config.min_df.max(1)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(config.max_features);
        ranked.sort_by(|a, b| a.0.cmp(&b.0));

        let n = corpus.len();
        let idf = ranked.iter().map(|(_, d)| smoothed_idf(n, *d)).collect();
        let doc_freq = ranked.iter().map(|(_, d)| *d).collect();
        let tokens: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
        Ok(Self::assemble(config, tokens, doc_freq, idf, n))
    }

    fn assemble(
        config: VectorizerConfig,
        tokens: Vec<String>,
        doc_freq: Vec<usize>,
        idf: Vec<f64>,
        n_docs: usize,
    ) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { config, tokens, index, idf, doc_freq, n_docs }
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(&normalize(token, self.config.lowercase)).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        self.idf[index]
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn config(&self) -> &VectorizerConfig {
        &self.config
    }

    /// Raw in-vocabulary term counts.
    pub fn counts(&self, tokens: &[String]) -> SparseVector {
        SparseVector::from_pairs(tokens.iter().filter_map(|t| self.index_of(t)).map(|i| (i, 1.0)))
    }

    /// L2-normalized tf-idf; out-of-vocabulary tokens are ignored.
    pub fn vectorize(&self, tokens: &[String]) -> SparseVector {
        let counts = self.counts(tokens);
        let weighted: Vec<(usize, f64)> = counts.entries.iter().map(|&(i, tf)| (i, tf * self.idf[i])).collect();
        let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SparseVector::default();
        }
        SparseVector { entries: weighted.into_iter().map(|(i, w)| (i, w / norm)).collect() }
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        let file = VectorizerFile {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            n_docs: self.n_docs,
            tokens: self.tokens.clone(),
            doc_freq: self.doc_freq.clone(),
            idf: self.idf.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&file).map_err(|e| TextError::Format(e.to_string()))?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let bytes = std::fs::read(path)?;
        let file: VectorizerFile = serde_json::from_slice(&bytes).map_err(|e| TextError::Format(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(TextError::Format(format!("unsupported format version {}", file.format_version)));
        }
        if file.tokens.len() != file.idf.len() || file.tokens.len() != file.doc_freq.len() {
            return Err(TextError::Format("vocabulary and weight lengths differ".into()));
        }
        if file.idf.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(TextError::Format("idf weights must be finite and positive".into()));
        }
        Ok(Self::assemble(file.config, file.tokens, file.doc_freq, file.idf, file.n_docs))
    }
}

fn normalize(token: &str, lowercase: bool) -> String {
    if lowercase {
        token.to_lowercase()
    } else {
        token.to_string()
    }
}

fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn idf_hand_values() {
        let v = Vectorizer::fit(&docs(&[&["a", "b"], &["a"]]), VectorizerConfig::default()).unwrap();
        let a = v.index_of("a").unwrap();
        let b = v.index_of("b").unwrap();
        assert_eq!(v.doc_freq(a), 2);
        assert_eq!(v.doc_freq(b), 1);
        assert!((v.idf(a) - 1.0).abs() < 1e-15);
        assert!((v.idf(b) - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn min_df_filters() {
        let cfg = VectorizerConfig { min_df: 2, ..Default::default() };
        let v = Vectorizer::fit(&docs(&[&["a", "b"], &["a"]]), cfg).unwrap();
        assert_eq!(v.vocab_size(), 1);
        assert_eq!(v.token(0), "a");
    }

    #[test]
    fn max_features_keeps_most_frequent_then_lexicographic() {
        let cfg = VectorizerConfig { max_features: 2, ..Default::default() };
        let v = Vectorizer::fit(&docs(&[&["z", "y", "x"], &["z", "x"], &["q"]]), cfg).unwrap();
        assert_eq!((v.token(0), v.token(1)), ("x", "z"));
    }

    #[test]
    fn identical_docs_share_idf() {
        let v = Vectorizer::fit(&docs(&[&["a", "b", "c"], &["a", "b", "c"]]), VectorizerConfig::default()).unwrap();
        assert!(v.idf.iter().all(|w| *w == v.idf[0]));
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(matches!(Vectorizer::fit(&[], VectorizerConfig::default()), Err(TextError::EmptyCorpus)));
    }

    #[test]
    fn vectorize_cases() {
        let v = Vectorizer::fit(&docs(&[&["a", "b"], &["a", "b"]]), VectorizerConfig::default()).unwrap();
        assert!(v.vectorize(&docs(&[&["zzz"]])[0]).is_zero());
        let single = v.vectorize(&docs(&[&["b"]])[0]);
        assert_eq!(single.entries(), &[(v.index_of("b").unwrap(), 1.0)]);
        // equal idf: weights proportional to (2, 1), so (2, 1) / sqrt(5)
        let x = v.vectorize(&docs(&[&["a", "a", "b"]])[0]);
        let s5 = 5f64.sqrt();
        assert!((x.get(v.index_of("a").unwrap()) - 2.0 / s5).abs() < 1e-12);
        assert!((x.get(v.index_of("b").unwrap()) - 1.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn stopwords_are_excluded() {
        let cfg = VectorizerConfig { stopwords: vec!["the".into()], ..Default::default() };
        let v = Vectorizer::fit(&docs(&[&["the", "cat"]]), cfg).unwrap();
        assert_eq!(v.index_of("the"), None);
    }

    #[test]
    fn save_load_round_trip() {
        let v = Vectorizer::fit(&docs(&[&["a", "b"], &["c"]]), VectorizerConfig::default()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        v.save(f.path()).unwrap();
        assert_eq!(Vectorizer::load(f.path()).unwrap(), v);
    }

    #[test]
    fn sparse_dot_matches_dense() {
        let a = SparseVector::from_pairs([(0, 1.0), (3, 2.0), (5, -1.0)]);
        let b = SparseVector::from_pairs([(3, 4.0), (5, 1.0), (7, 9.0)]);
        assert_eq!(a.dot(&b), 7.0);
        assert_eq!(a.min_dim(), 6);
    }

    proptest! {
        #[test]
        fn nonzero_vectors_are_unit_and_in_vocab(
            corpus in prop::collection::vec(prop::collection::vec("[a-e]{1,2}", 0..6), 1..8),
            probe in 0usize..8,
        ) {
            let v = Vectorizer::fit(&corpus, VectorizerConfig::default()).unwrap();
            for doc in &corpus {
                let x = v.vectorize(doc);
                prop_assert!(x.entries().iter().all(|(i, w)| *i < v.vocab_size() && w.is_finite()));
                prop_assert!(x.entries().windows(2).all(|w| w[0].0 < w[1].0));
                if !x.is_zero() {
                    prop_assert!((x.norm() - 1.0).abs() < 1e-9);
                }
            }
            let doc = &corpus[probe % corpus.len()];
            prop_assert!(v.counts(doc).entries().iter().all(|(i, _)| *i < v.vocab_size()));
            prop_assert!(v.idf.iter().all(|w| w.is_finite() && *w > 0.0));
        }
    }
}
