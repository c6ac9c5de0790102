use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{label_distribution, write_dataset, CorpusError, Dataset, DatasetFormat, LabelCounts, SamplingRecord};

/// Largest-remainder (Hamilton) apportionment of `cap` seats over `counts`.
///
/// Each label gets `floor(cap * count / total)`; the leftover seats go to the
/// largest fractional remainders, ties broken by position (schema order).
/// Exact integer arithmetic, so results are platform independent.
pub fn apportion(counts: &[usize], cap: usize) -> Vec<usize> {
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    if total == 0 {
        return vec![0; counts.len()];
    }
    let cap_wide = cap as u128;
    let mut quotas = Vec::with_capacity(counts.len());
    let mut remainders = Vec::with_capacity(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        let scaled = cap_wide * c as u128;
        quotas.push((scaled / total) as usize);
        remainders.push((scaled % total, i));
    }
    let leftover = cap - quotas.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(leftover) {
        quotas[i] += 1;
    }
    quotas
}

/// Down-samples `ds` to `cap` examples preserving its label proportions.
///
/// Datasets at or under the cap come back unchanged. Otherwise per-label
/// quotas come from [`apportion`]; within a label the draw is uniform without
/// replacement from a ChaCha8 stream seeded by `seed`. Output is ordered by
/// schema label, then by original position.
pub fn stratified_sample(ds: &Dataset, cap: usize, seed: u64) -> Result<Dataset, CorpusError> {
    let dist = label_distribution(ds);
    let counts = dist.counts();
    let nonzero = counts.iter().filter(|&&c| c > 0).count();
    if cap == 0 || cap < nonzero {
        return Err(CorpusError::CapTooSmall { cap, labels: nonzero });
    }
    if ds.len() <= cap {
        return Ok(ds.clone());
    }
    let quotas = apportion(&counts, cap);
    let schema = ds.schema();

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); schema.len()];
    for (pos, ex) in ds.examples().iter().enumerate() {
        by_label[schema.index_of(&ex.gold).expect("valid gold")].push(pos);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(cap);
    for (members, &quota) in by_label.iter().zip(&quotas) {
        let mut chosen: Vec<usize> =
            rand::seq::index::sample(&mut rng, members.len(), quota).into_iter().map(|k| members[k]).collect();
        chosen.sort_unstable();
        picked.extend(chosen);
    }

    let examples = picked.into_iter().map(|i| ds.examples()[i].clone()).collect();
    let mut provenance = ds.provenance().clone();
    provenance.sampling = Some(SamplingRecord {
        seed,
        cap,
        quotas: LabelCounts::from_pairs(schema.labels().iter().cloned().zip(quotas).collect()),
    });
    Ok(ds.with_examples(examples, provenance))
}

/// Sidecar written next to a persisted sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub schema: String,
    pub split: super::Split,
    pub source: Option<String>,
    pub source_digest: Option<String>,
    pub seed: Option<u64>,
    pub cap: Option<usize>,
    pub quotas: Option<LabelCounts>,
    pub counts: LabelCounts,
    pub total: usize,
}

/// Persists a (possibly sampled) dataset as delimited text plus
/// `<path>.manifest.json`. Returns the manifest path.
pub fn write_sample(ds: &Dataset, format: &DatasetFormat, path: &Path) -> Result<std::path::PathBuf, CorpusError> {
    write_dataset(ds, format, path)?;
    let prov = ds.provenance();
    let counts = label_distribution(ds);
    let manifest = SampleManifest {
        schema: ds.schema().id().to_string(),
        split: ds.split(),
        source: prov.source.as_ref().map(|p| p.display().to_string()),
        source_digest: prov.source_digest.clone(),
        seed: prov.sampling.as_ref().map(|s| s.seed),
        cap: prov.sampling.as_ref().map(|s| s.cap),
        quotas: prov.sampling.as_ref().map(|s| s.quotas.clone()),
        total: counts.total(),
        counts,
    };
    let manifest_path = manifest_path(path);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json + "\n").map_err(|e| CorpusError::io(&manifest_path, e))?;
    Ok(manifest_path)
}

pub fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}
