//! Seeded synthetic corpora with the label counts of the four benchmark
//! datasets, for offline runs, examples and tests.
//!
//! Each label draws a share of its words from its own topic list, a smaller
//! share from other labels' lists and the rest from neutral filler, so the
//! classes are learnable but not perfectly separable.

use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    write_dataset, CorpusError, Dataset, DatasetFormat, LabelSchema, LabeledExample, Provenance, Split,
};

/// Train and test counts per raw label, in the label order of [`raw_schema`].
pub fn published_counts(corpus: &str, split: Split) -> Option<Vec<usize>> {
    Some(match (corpus, split) {
        ("covid", Split::Train) => vec![15398, 7712, 18046],
        ("covid", Split::Test) => vec![1633, 619, 1546],
        // merged 3-level counts are 483 / 2302 / 1091; the 5-level split is not published
        ("economic", Split::Train) => vec![121, 362, 2302, 818, 273],
        ("economic", Split::Test) => vec![30, 91, 576, 204, 68],
        ("ecommerce", Split::Train) => vec![15449, 9456, 6936, 8497],
        ("ecommerce", Split::Test) => vec![3863, 2364, 1734, 2124],
        ("sms", Split::Train) => vec![3859, 598],
        ("sms", Split::Test) => vec![966, 149],
        _ => return None,
    })
}

/// Schema the raw files are labeled with.
pub fn raw_schema(corpus: &str) -> Option<LabelSchema> {
    LabelSchema::builtin(match corpus {
        "covid" => "sentiment3",
        "economic" => "sentiment5",
        "ecommerce" => "ecommerce",
        "sms" => "sms",
        _ => return None,
    })
}

const FILLER: &[&str] = &[
    "the", "a", "and", "to", "of", "in", "is", "it", "for", "on", "this", "that", "with", "at", "be", "we", "you",
    "they", "was", "are", "have", "just", "now", "today", "all", "so", "my", "our", "from", "about", "more", "will",
    "there", "some", "out", "up", "get", "new", "time", "day", "people", "one", "also", "still", "very", "much",
];

fn topic(label: &str) -> &'static [&'static str] {
    match label {
        "very negative" => &["collapse", "plunge", "bankruptcy", "crisis", "default", "slump", "layoffs", "losses"],
        "negative" => &[
            "worse",
            "fear",
            "panic",
            "shortage",
            "decline",
            "fell",
            "loss",
            "empty",
            "angry",
            "stuck",
            "scam",
            "overpriced",
            "cut",
            "drop",
            "warning",
            "crisis",
        ],
        "neutral" => &[
            "report",
            "store",
            "hours",
            "update",
            "announced",
            "according",
            "statement",
            "week",
            "market",
            "quarter",
            "company",
            "said",
            "information",
            "schedule",
            "local",
        ],
        "positive" => &[
            "thanks", "great", "grateful", "safe", "helping", "support", "rose", "growth", "profit", "improved",
            "good", "kind", "heroes", "increase", "better", "strong",
        ],
        "very positive" => &["record", "soared", "surged", "outstanding", "doubled", "best", "excellent", "milestone"],
        "household" => &[
            "kitchen",
            "steel",
            "cookware",
            "bedsheet",
            "cotton",
            "storage",
            "container",
            "wall",
            "decor",
            "lamp",
            "curtain",
            "towel",
            "mop",
            "bottle",
            "jar",
            "shelf",
        ],
        "books" => &[
            "author",
            "edition",
            "paperback",
            "novel",
            "chapter",
            "guide",
            "exam",
            "publisher",
            "pages",
            "reader",
            "story",
            "series",
            "hardcover",
            "study",
            "history",
            "series",
        ],
        "clothing & accessories" => &[
            "shirt", "women", "men", "fit", "fabric", "sleeve", "dress", "jeans", "wallet", "leather", "size",
            "casual", "kurta", "saree", "belt", "socks",
        ],
        "electronics" => &[
            "usb",
            "cable",
            "charger",
            "battery",
            "wireless",
            "bluetooth",
            "speaker",
            "hdmi",
            "laptop",
            "mouse",
            "keyboard",
            "power",
            "adapter",
            "headphones",
            "port",
            "led",
        ],
        "normal" => &[
            "ok", "lor", "home", "later", "sorry", "dinner", "tonight", "love", "going", "meet", "tomorrow", "ya",
            "gonna", "wat", "lunch", "class",
        ],
        "spam" => &[
            "free",
            "win",
            "prize",
            "claim",
            "urgent",
            "txt",
            "cash",
            "award",
            "guaranteed",
            "offer",
            "mobile",
            "ringtone",
            "reply",
            "stop",
            "winner",
            "selected",
        ],
        _ => &["thing"],
    }
}

struct Style {
    min_len: usize,
    max_len: usize,
    own: f64,
    other: f64,
}

fn style(corpus: &str) -> Style {
    match corpus {
        "covid" => Style { min_len: 8, max_len: 30, own: 0.18, other: 0.10 },
        "economic" => Style { min_len: 10, max_len: 28, own: 0.16, other: 0.08 },
        "ecommerce" => Style { min_len: 12, max_len: 45, own: 0.25, other: 0.05 },
        _ => Style { min_len: 4, max_len: 24, own: 0.22, other: 0.05 },
    }
}

fn sentence(rng: &mut ChaCha8Rng, corpus: &str, label: &str, labels: &[String]) -> String {
    let st = style(corpus);
    let len = rng.random_range(st.min_len..=st.max_len);
    let mut words: Vec<String> = Vec::with_capacity(len + 2);
    for _ in 0..len {
        let r: f64 = rng.random();
        let w = if r < st.own {
            *topic(label).choose(rng).expect("topic words")
        } else if r < st.own + st.other {
            let other = labels.choose(rng).expect("labels");
            *topic(other).choose(rng).expect("topic words")
        } else {
            *FILLER.choose(rng).expect("filler words")
        };
        words.push(w.to_owned());
    }
    match corpus {
        "covid" if rng.random_bool(0.3) => words.push(format!("https://t.co/x{}", rng.random_range(100..999))),
        "covid" if rng.random_bool(0.2) => words.insert(0, "@user".into()),
        "sms" if label == "spam" && rng.random_bool(0.5) => {
            words.push(format!("0800{:06}", rng.random_range(0..1_000_000)));
        }
        _ => {}
    }
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        s = first.to_uppercase() + &s[1..];
    }
    s.push('.');
    s
}

/// `counts[i]` examples of `schema.label(i)`, shuffled, with ids `<corpus>-<split>-<n>`.
pub fn generate(corpus: &str, schema: &LabelSchema, counts: &[usize], split: Split, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ if split == Split::Train { 0 } else { 0x9e37_79b9 });
    let mut golds: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    golds.shuffle(&mut rng);
    let split_name = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    let examples = golds
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let label = schema.label(c);
            LabeledExample::new(
                format!("{corpus}-{split_name}-{i}"),
                sentence(&mut rng, corpus, label, schema.labels()),
                label,
            )
        })
        .collect();
    Dataset::new(schema.clone(), split, examples, Provenance::default()).expect("generated examples are valid")
}

/// The benchmark corpus `corpus` at its published size.
pub fn corpus(corpus: &str, split: Split, seed: u64) -> Option<Dataset> {
    let schema = raw_schema(corpus)?;
    let counts = published_counts(corpus, split)?;
    Some(generate(corpus, &schema, &counts, split, seed))
}

/// Writes `<dir>/<corpus>_train.csv` and `<dir>/<corpus>_test.csv` in the corpus's file layout.
pub fn write_corpus(dir: &Path, name: &str, seed: u64) -> Result<(PathBuf, PathBuf), CorpusError> {
    let format = DatasetFormat::builtin(name)
        .ok_or_else(|| CorpusError::InvalidFormat(format!("no built-in layout `{name}`")))?;
    std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut paths = Vec::new();
    for (split, suffix) in [(Split::Train, "train"), (Split::Test, "test")] {
        let ds =
            corpus(name, split, seed).ok_or_else(|| CorpusError::InvalidFormat(format!("unknown corpus `{name}`")))?;
        let path = dir.join(format!("{name}_{suffix}.csv"));
        write_dataset(&ds, &format, &path)?;
        paths.push(path);
    }
    let test = paths.pop().expect("two paths");
    let train = paths.pop().expect("two paths");
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_sentiment_merge, label_distribution, load_dataset, merge_labels, LoadOptions};

    #[test]
    fn sms_matches_published_counts() {
        let train = corpus("sms", Split::Train, 1).unwrap();
        assert_eq!(label_distribution(&train).counts(), [3859, 598]);
        let test = corpus("sms", Split::Test, 1).unwrap();
        assert_eq!(test.len(), 1115);
    }

    #[test]
    fn economic_merges_to_three_levels() {
        let train = corpus("economic", Split::Train, 1).unwrap();
        let three = LabelSchema::builtin("sentiment3").unwrap();
        let merged = merge_labels(&train, &default_sentiment_merge(), &three).unwrap();
        assert_eq!(label_distribution(&merged).counts(), [483, 2302, 1091]);
        let test = corpus("economic", Split::Test, 1).unwrap();
        let merged = merge_labels(&test, &default_sentiment_merge(), &three).unwrap();
        assert_eq!(label_distribution(&merged).counts(), [121, 576, 272]);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate("sms", &raw_schema("sms").unwrap(), &[5, 5], Split::Train, 9);
        let b = generate("sms", &raw_schema("sms").unwrap(), &[5, 5], Split::Train, 9);
        let c = generate("sms", &raw_schema("sms").unwrap(), &[5, 5], Split::Train, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn files_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let (train, test) = write_corpus(dir.path(), "ecommerce", 3).unwrap();
        let fmt = DatasetFormat::builtin("ecommerce").unwrap();
        let schema = raw_schema("ecommerce").unwrap();
        let ds = load_dataset(&train, &fmt, &schema, &LoadOptions::default()).unwrap();
        assert_eq!(label_distribution(&ds).counts(), [15449, 9456, 6936, 8497]);
        let ds = load_dataset(&test, &fmt, &schema, &LoadOptions::default()).unwrap();
        assert_eq!(ds.len(), 3863 + 2364 + 1734 + 2124);
    }
}
