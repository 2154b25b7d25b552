//! Datasets: featurization, loading, splitting, and the baseline
//! constructions used alongside soft-label fine-tuning.
//!
//! Text pairs are featurized with a hashed bag of words: two independently
//! L2-normalized segments (one per text), FNV-1a 64-bit bucket hashing. The
//! hash is fixed so feature vectors are bit-reproducible everywhere.
//!
//! Dataset files are JSON Lines. A hard example line carries either raw text
//! (`{"item_id","text_a","text_b","label"}`) or a precomputed feature vector
//! (`{"item_id","features",...,"label"}`); a soft example line carries
//! `"probs"` (and optionally `"counts"`) instead of `"label"`. Extra fields
//! are ignored, so one item table can serve several roles.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::label_core::{ClassLabel, LabelDistribution};
use crate::rng::{self, domain};

/// A raw premise/hypothesis pair before featurization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TextPairItem {
    pub item_id: String,
    pub text_a: String,
    pub text_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<ClassLabel>,
}

/// Dense feature vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadConfig(format!(
                "feature {bad} is not finite ({})",
                values[bad]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Vec<f64> {
        f.values
    }
}

/// A training item with a single class target.
#[derive(Debug, Clone, PartialEq)]
pub struct HardExample {
    pub features: FeatureVector,
    pub label: ClassLabel,
}

/// A training item whose target is a distribution over classes, optionally
/// with the raw per-class annotation counts it was estimated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftExample {
    pub features: FeatureVector,
    pub target: LabelDistribution,
    pub counts: Option<Vec<u64>>,
}

impl SoftExample {
    /// Build from raw counts; the target is the α-smoothed proportion vector.
    pub fn from_counts(features: FeatureVector, counts: Vec<u64>, alpha: f64) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.len() < 2 || (total == 0 && alpha == 0.0) {
            return Err(Error::MissingCounts { index: 0 });
        }
        let denom = total as f64 + alpha * counts.len() as f64;
        let probs = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
        Ok(Self {
            features,
            target: LabelDistribution::new(probs)?,
            counts: Some(counts),
        })
    }
}

/// Bucket hashers supported by the featurizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HashKind {
    #[serde(rename = "fnv1a64")]
    Fnv1a64,
}

/// Hashed bag-of-words featurizer over text pairs.
///
/// Tokens are the maximal alphanumeric runs of the lowercased text. Each
/// token of `text_a` increments bucket `fnv1a64(token) mod dim` of the first
/// segment, tokens of `text_b` likewise in the second segment, and each
/// segment is L2-normalized when nonzero. Output dimension is
/// `2 * dim_per_segment`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub dim_per_segment: usize,
    #[serde(default = "Featurizer::default_hash")]
    pub hash: HashKind,
}

impl Featurizer {
    fn default_hash() -> HashKind {
        HashKind::Fnv1a64
    }

    pub fn new(dim_per_segment: usize) -> Result<Self> {
        let f = Self {
            dim_per_segment,
            hash: HashKind::Fnv1a64,
        };
        f.validate()?;
        Ok(f)
    }

    /// dim_per_segment must be a power of two, at least 16.
    pub fn validate(&self) -> Result<()> {
        if self.dim_per_segment < 16 || !self.dim_per_segment.is_power_of_two() {
            return Err(Error::BadConfig(format!(
                "dim_per_segment must be a power of two >= 16, got {}",
                self.dim_per_segment
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        2 * self.dim_per_segment
    }

    pub fn featurize(&self, text_a: &str, text_b: &str) -> FeatureVector {
        let dim = self.dim_per_segment;
        let mut values = vec![0.0; 2 * dim];
        fill_segment(&mut values[..dim], text_a);
        fill_segment(&mut values[dim..], text_b);
        FeatureVector { values }
    }
}

fn fill_segment(segment: &mut [f64], text: &str) {
    let dim = segment.len() as u64;
    for token in text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        segment[(fnv1a64(token.as_bytes()) % dim) as usize] += 1.0;
    }
    let norm = segment.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in segment.iter_mut() {
            *v /= norm;
        }
    }
}

/// FNV-1a, 64-bit: offset basis 0xcbf29ce484222325, prime 0x100000001b3.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x1_0000_0001_b3);
    }
    h
}

/// Reduce a soft example to its most probable class (ties toward the lowest
/// class index).
pub fn harden(item: &SoftExample) -> HardExample {
    HardExample {
        features: item.features.clone(),
        label: item.target.argmax(),
    }
}

/// All-in-one-classifier expansion: each crowd response becomes its own hard
/// example, so an item with counts `(n_0..n_{K-1})` emits `n_y` copies per
/// class `y`. Requires counts on every item.
pub fn build_aoc_dataset(items: &[SoftExample]) -> Result<Vec<HardExample>> {
    let mut out = Vec::new();
    for (index, item) in items.iter().enumerate() {
        let counts = item.counts.as_ref().ok_or(Error::MissingCounts { index })?;
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::MissingCounts { index });
        }
        for (label, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                out.push(HardExample {
                    features: item.features.clone(),
                    label: ClassLabel(label),
                });
            }
        }
    }
    Ok(out)
}

/// Comparable-label-effort construction: `base` plus `n_extra` examples
/// sampled uniformly without replacement from `extra_pool`.
pub fn build_cle_dataset(
    base: &[HardExample],
    extra_pool: &[HardExample],
    n_extra: usize,
    seed: u64,
) -> Result<Vec<HardExample>> {
    if n_extra > extra_pool.len() {
        return Err(Error::PoolTooSmall {
            requested: n_extra,
            available: extra_pool.len(),
        });
    }
    let mut indices: Vec<usize> = (0..extra_pool.len()).collect();
    indices.shuffle(&mut rng::stream(seed, domain::CLE_SAMPLE, 0));
    let mut out = base.to_vec();
    out.extend(indices[..n_extra].iter().map(|&i| extra_pool[i].clone()));
    Ok(out)
}

/// Seeded shuffle followed by a contiguous split. Part sizes are
/// `floor(fraction * n)` with the remainder distributed one item each in
/// declaration order, so the partition is exhaustive and disjoint.
pub fn split<T>(items: Vec<T>, fractions: &[f64], seed: u64) -> Result<Vec<Vec<T>>> {
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadFractions { sum });
    }
    let mut items = items;
    items.shuffle(&mut rng::stream(seed, domain::SPLIT, 0));

    let n = items.len();
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| (f * n as f64).floor() as usize)
        .collect();
    let mut remainder = n - sizes.iter().sum::<usize>();
    for size in sizes.iter_mut() {
        if remainder == 0 {
            break;
        }
        *size += 1;
        remainder -= 1;
    }

    let mut parts = Vec::with_capacity(sizes.len());
    let mut rest = items;
    for &size in &sizes {
        let tail = rest.split_off(size);
        parts.push(rest);
        rest = tail;
    }
    Ok(parts)
}

/// One line of a dataset file; which fields are present decides how it can
/// be interpreted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetLine {
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn line_features(
    row: &DatasetLine,
    featurizer: Option<&Featurizer>,
    path: &Path,
    line: usize,
) -> Result<FeatureVector> {
    if let Some(values) = &row.features {
        return FeatureVector::new(values.clone()).map_err(|e| malformed(path, line, e.to_string()));
    }
    match (&row.text_a, &row.text_b, featurizer) {
        (Some(a), Some(b), Some(f)) => Ok(f.featurize(a, b)),
        (Some(_), Some(_), None) => Err(malformed(
            path,
            line,
            "text item but no featurizer configured",
        )),
        _ => Err(malformed(
            path,
            line,
            "need \"features\" or both \"text_a\" and \"text_b\"",
        )),
    }
}

/// Read the raw lines of a dataset file.
pub fn load_lines(path: &Path) -> Result<Vec<DatasetLine>> {
    jsonl::read_jsonl(path)
}

/// Interpret lines as hard examples: each must carry `"label"` plus either
/// `"features"` or text (featurized with `featurizer`). `path` is used for
/// error messages only.
pub fn hard_from_lines(
    rows: &[DatasetLine],
    path: &Path,
    classes: usize,
    featurizer: Option<&Featurizer>,
) -> Result<Vec<HardExample>> {
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let line = i + 1;
        let label = row
            .label
            .ok_or_else(|| malformed(path, line, "missing \"label\""))?;
        if label >= classes {
            return Err(malformed(
                path,
                line,
                format!("label {label} out of range for {classes} classes"),
            ));
        }
        out.push(HardExample {
            features: line_features(row, featurizer, path, line)?,
            label: ClassLabel(label),
        });
    }
    Ok(out)
}

/// Load hard examples from a file; see [`hard_from_lines`].
pub fn load_hard_dataset(
    path: &Path,
    classes: usize,
    featurizer: Option<&Featurizer>,
) -> Result<Vec<HardExample>> {
    hard_from_lines(&load_lines(path)?, path, classes, featurizer)
}

/// Interpret lines as soft examples: each must carry `"probs"` plus either
/// `"features"` or text; `"counts"` is optional.
pub fn soft_from_lines(
    rows: &[DatasetLine],
    path: &Path,
    classes: usize,
    featurizer: Option<&Featurizer>,
) -> Result<Vec<SoftExample>> {
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let line = i + 1;
        let probs = row
            .probs
            .clone()
            .ok_or_else(|| malformed(path, line, "missing \"probs\""))?;
        if probs.len() != classes {
            return Err(malformed(
                path,
                line,
                format!("expected {classes} probabilities, got {}", probs.len()),
            ));
        }
        let target =
            LabelDistribution::new(probs).map_err(|e| malformed(path, line, e.to_string()))?;
        if let Some(counts) = &row.counts {
            if counts.len() != classes {
                return Err(malformed(
                    path,
                    line,
                    format!("expected {classes} counts, got {}", counts.len()),
                ));
            }
        }
        out.push(SoftExample {
            features: line_features(row, featurizer, path, line)?,
            target,
            counts: row.counts.clone(),
        });
    }
    Ok(out)
}

/// Load soft examples from a file; see [`soft_from_lines`].
pub fn load_soft_dataset(
    path: &Path,
    classes: usize,
    featurizer: Option<&Featurizer>,
) -> Result<Vec<SoftExample>> {
    soft_from_lines(&load_lines(path)?, path, classes, featurizer)
}

/// Load raw text pairs: lines must carry `"text_a"` and `"text_b"`, with
/// `"label"` becoming the optional gold class.
pub fn load_text_pairs(path: &Path) -> Result<Vec<TextPairItem>> {
    let rows = load_lines(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        match (row.text_a, row.text_b) {
            (Some(text_a), Some(text_b)) => out.push(TextPairItem {
                item_id: row.item_id,
                text_a,
                text_b,
                gold: row.label.map(ClassLabel),
            }),
            _ => {
                return Err(malformed(
                    path,
                    i + 1,
                    "missing \"text_a\" or \"text_b\"",
                ))
            }
        }
    }
    Ok(out)
}

/// Load a gold-label map from any JSON Lines file whose rows carry
/// `"item_id"` and `"label"`.
pub fn load_gold_labels(path: &Path) -> Result<BTreeMap<String, ClassLabel>> {
    let rows: Vec<DatasetLine> = jsonl::read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for (i, row) in rows.into_iter().enumerate() {
        let label = row
            .label
            .ok_or_else(|| malformed(path, i + 1, "missing \"label\""))?;
        out.insert(row.item_id, ClassLabel(label));
    }
    Ok(out)
}

/// Write dataset lines; features and probs are printed at 17 significant
/// digits for lossless reload.
pub fn write_dataset_lines(path: &Path, rows: &[DatasetLine]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str("{\"item_id\":");
        out.push_str(&serde_json::to_string(&row.item_id).map_err(|e| Error::json(path, e))?);
        if let Some(a) = &row.text_a {
            out.push_str(",\"text_a\":");
            out.push_str(&serde_json::to_string(a).map_err(|e| Error::json(path, e))?);
        }
        if let Some(b) = &row.text_b {
            out.push_str(",\"text_b\":");
            out.push_str(&serde_json::to_string(b).map_err(|e| Error::json(path, e))?);
        }
        if let Some(features) = &row.features {
            out.push_str(",\"features\":");
            out.push_str(&jsonl::f64_array_sig17(features));
        }
        if let Some(label) = row.label {
            out.push_str(&format!(",\"label\":{label}"));
        }
        if let Some(probs) = &row.probs {
            out.push_str(",\"probs\":");
            out.push_str(&jsonl::f64_array_sig17(probs));
        }
        if let Some(counts) = &row.counts {
            out.push_str(",\"counts\":");
            out.push_str(&serde_json::to_string(counts).map_err(|e| Error::json(path, e))?);
        }
        out.push_str("}\n");
    }
    jsonl::write_string(path, &out)
}
