//! Crowd annotation aggregation and analysis.
//!
//! Raw `(item, annotator, label)` records become per-item soft labels by
//! (smoothed) proportion counting. On top of that sit the three analyses this
//! crate cares about: Fleiss' kappa agreement, the gold-label agreement
//! histogram, and the label-budget curve (how fast sampled soft labels
//! converge to the full-population estimate as annotators are added).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::label_core::{ClassLabel, LabelDistribution};
use crate::rng::{self, domain};

/// One crowd response: annotator `annotator_id` labeled `item_id` as `label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub annotator_id: String,
    pub label: ClassLabel,
}

/// A validated collection of annotations over `k` classes.
///
/// Duplicate `(item, annotator)` pairs are collapsed on construction, keeping
/// the last record (crowd exports contain resubmissions). Records, item ids,
/// and annotator ids are kept in sorted order so every downstream procedure
/// is order-independent.
#[derive(Debug, Clone)]
pub struct AnnotationSet {
    k: usize,
    records: Vec<AnnotationRecord>,
    items: Vec<String>,
    annotators: Vec<String>,
    duplicates_dropped: usize,
}

impl AnnotationSet {
    pub fn from_records(k: usize, records: Vec<AnnotationRecord>) -> Result<Self> {
        if k < 2 {
            return Err(Error::BadConfig(format!("need at least 2 classes, got {k}")));
        }
        for r in &records {
            if r.label.index() >= k {
                return Err(Error::ClassOutOfRange {
                    class: r.label.index(),
                    classes: k,
                });
            }
        }
        let total = records.len();
        let mut dedup: BTreeMap<(String, String), ClassLabel> = BTreeMap::new();
        for r in records {
            dedup.insert((r.item_id, r.annotator_id), r.label);
        }
        let duplicates_dropped = total - dedup.len();
        let mut items: Vec<String> = Vec::new();
        let mut annotators: HashSet<String> = HashSet::new();
        let records: Vec<AnnotationRecord> = dedup
            .into_iter()
            .map(|((item_id, annotator_id), label)| {
                if items.last() != Some(&item_id) {
                    items.push(item_id.clone());
                }
                annotators.insert(annotator_id.clone());
                AnnotationRecord {
                    item_id,
                    annotator_id,
                    label,
                }
            })
            .collect();
        let mut annotators: Vec<String> = annotators.into_iter().collect();
        annotators.sort();
        Ok(Self {
            k,
            records,
            items,
            annotators,
            duplicates_dropped,
        })
    }

    /// Load from JSON Lines; when `k` is `None` it is inferred as
    /// `max label + 1` (at least 2).
    pub fn from_jsonl(path: &Path, k: Option<usize>) -> Result<Self> {
        let records: Vec<AnnotationRecord> = jsonl::read_jsonl(path)?;
        let k = match k {
            Some(k) => k,
            None => records
                .iter()
                .map(|r| r.label.index() + 1)
                .max()
                .unwrap_or(2)
                .max(2),
        };
        Self::from_records(k, records)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).map_err(|e| Error::json(path, e))?);
            out.push('\n');
        }
        jsonl::write_string(path, &out)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    /// Distinct item ids, sorted.
    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// Distinct annotator ids, sorted.
    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    /// How many duplicate `(item, annotator)` records were collapsed on load.
    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// Per-item label counts, keyed by item id.
    pub fn counts_by_item(&self) -> BTreeMap<String, Vec<u64>> {
        let mut counts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for r in &self.records {
            counts
                .entry(r.item_id.clone())
                .or_insert_with(|| vec![0; self.k])[r.label.index()] += 1;
        }
        counts
    }
}

/// `(count + α) / (total + αK)` for every class.
fn smoothed_probs(counts: &[u64], alpha: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + alpha * counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
}

/// Estimate one soft label per item as the α-smoothed proportion of labels:
/// `P(y) = (N_y + α) / (N + αK)`. With `α = 0` this is the raw proportion.
pub fn estimate_soft_labels(
    set: &AnnotationSet,
    alpha: f64,
) -> Result<BTreeMap<String, LabelDistribution>> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::BadConfig(format!(
            "smoothing alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let mut out = BTreeMap::new();
    for (item_id, counts) in set.counts_by_item() {
        let total: u64 = counts.iter().sum();
        if total == 0 && alpha == 0.0 {
            return Err(Error::EmptyItem { item_id });
        }
        out.insert(item_id, LabelDistribution::new(smoothed_probs(&counts, alpha))?);
    }
    Ok(out)
}

/// Soft label of a single item; errors if the item has no annotations.
pub fn soft_label_for(set: &AnnotationSet, item_id: &str, alpha: f64) -> Result<LabelDistribution> {
    estimate_soft_labels(set, alpha)?
        .remove(item_id)
        .ok_or_else(|| Error::EmptyItem {
            item_id: item_id.to_string(),
        })
}

/// Fleiss' kappa over items with a uniform rating count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FleissKappa {
    pub kappa: f64,
    /// Items entering the computation.
    pub items_used: usize,
    /// Items dropped for not having exactly `ratings_per_item` ratings.
    pub items_dropped: usize,
    /// The uniform rating count `n` the computation used.
    pub ratings_per_item: usize,
}

/// Chance-corrected multi-rater agreement, κ = (P̄ − P̄ₑ) / (1 − P̄ₑ).
///
/// Fleiss' construction requires the same number of ratings `n ≥ 2` on every
/// item; `n` is taken as the most common per-item rating count (ties toward
/// the larger count) and items with any other count are dropped, with the
/// drop count reported.
pub fn fleiss_kappa(set: &AnnotationSet) -> Result<FleissKappa> {
    let counts: Vec<Vec<u64>> = set.counts_by_item().into_values().collect();
    let mut count_freq: BTreeMap<u64, usize> = BTreeMap::new();
    for c in &counts {
        let n: u64 = c.iter().sum();
        if n >= 2 {
            *count_freq.entry(n).or_insert(0) += 1;
        }
    }
    // Mode of eligible rating counts; BTreeMap iteration order makes the
    // ">=" comparison resolve ties toward the larger n.
    let n = count_freq
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .map(|(&n, _)| n)
        .ok_or(Error::NoRatableItems)?;

    let used: Vec<&Vec<u64>> = counts
        .iter()
        .filter(|c| c.iter().sum::<u64>() == n)
        .collect();
    let items_used = used.len();
    let items_dropped = counts.len() - items_used;

    let n_f = n as f64;
    let mut p_bar = 0.0;
    let mut category_mass = vec![0.0; set.k()];
    for c in &used {
        let sum_sq: u64 = c.iter().map(|&x| x * x).sum();
        p_bar += (sum_sq as f64 - n_f) / (n_f * (n_f - 1.0));
        for (j, &x) in c.iter().enumerate() {
            category_mass[j] += x as f64;
        }
    }
    p_bar /= items_used as f64;
    let total = items_used as f64 * n_f;
    let p_e: f64 = category_mass.iter().map(|m| (m / total).powi(2)).sum();

    let kappa = if (1.0 - p_e).abs() < 1e-12 {
        // All mass on one category. Observed agreement is then necessarily
        // perfect; anything else is a degenerate input.
        if (p_bar - 1.0).abs() < 1e-12 {
            1.0
        } else {
            return Err(Error::DegenerateAgreement);
        }
    } else {
        (p_bar - p_e) / (1.0 - p_e)
    };
    Ok(FleissKappa {
        kappa,
        items_used,
        items_dropped,
        ratings_per_item: n as usize,
    })
}

/// Histogram of the crowd-estimated probability of each item's gold label.
///
/// Bins cover [0, 1] with the given width; every bin is right-open except the
/// last, which is closed so that probability 1 lands in it. Returns
/// `(bin_start, relative_frequency)` pairs whose frequencies sum to 1.
pub fn gold_agreement_histogram(
    soft: &BTreeMap<String, LabelDistribution>,
    gold: &BTreeMap<String, ClassLabel>,
    bin_width: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::BadConfig(format!(
            "bin width must be in (0, 1], got {bin_width}"
        )));
    }
    if soft.is_empty() {
        return Err(Error::EmptyData);
    }
    let bins = (1.0 / bin_width).ceil() as usize;
    let mut hits = vec![0u64; bins];
    for (item_id, dist) in soft {
        let label = gold.get(item_id).ok_or_else(|| Error::MissingGold {
            item_id: item_id.clone(),
        })?;
        let p = dist.prob(*label)?;
        let bin = ((p / bin_width).floor() as usize).min(bins - 1);
        hits[bin] += 1;
    }
    let total = soft.len() as f64;
    Ok(hits
        .iter()
        .enumerate()
        .map(|(i, &h)| (i as f64 * bin_width, h as f64 / total))
        .collect())
}

/// Keep the records of `n` annotators drawn uniformly without replacement.
pub fn subsample_annotators(set: &AnnotationSet, n: usize, seed: u64) -> Result<AnnotationSet> {
    if n > set.annotators().len() {
        return Err(Error::InsufficientAnnotators {
            requested: n,
            available: set.annotators().len(),
        });
    }
    let mut order: Vec<&String> = set.annotators().iter().collect();
    order.shuffle(&mut rng::stream(seed, domain::SUBSAMPLE, 0));
    let chosen: HashSet<&str> = order[..n].iter().map(|s| s.as_str()).collect();
    let records = set
        .records()
        .iter()
        .filter(|r| chosen.contains(r.annotator_id.as_str()))
        .cloned()
        .collect();
    AnnotationSet::from_records(set.k(), records)
}

/// KL divergence between full-population soft labels and sub-sampled ones,
/// as a function of how many annotators have been sampled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetCurve {
    pub runs: usize,
    pub points: Vec<BudgetPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetPoint {
    pub n_annotators: usize,
    pub mean_kl: f64,
    pub per_run_kl: Vec<f64>,
}

impl BudgetCurve {
    /// CSV with header `n,run,kl`, one row per (n, run); runs are 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,run,kl\n");
        for p in &self.points {
            for (run, kl) in p.per_run_kl.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", p.n_annotators, run + 1, kl));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        jsonl::write_string(path, &self.to_csv())
    }
}

/// Simulate shrinking the labeling budget: for each run, draw a random
/// annotator order, then grow the sample one annotator at a time and record
/// the mean KL divergence between the full-population soft labels and the
/// sampled ones.
///
/// Sampling is cumulative within a run. Both the reference and the sampled
/// estimates use the same `alpha > 0`, so the divergence stays finite even
/// when small samples miss a class entirely, and is exactly 0 once the
/// sample covers the whole population.
pub fn budget_curve(
    set: &AnnotationSet,
    runs: usize,
    max_n: usize,
    alpha: f64,
    seed: u64,
) -> Result<BudgetCurve> {
    if runs < 1 {
        return Err(Error::BadConfig("runs must be >= 1".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::BadConfig(format!(
            "budget curve needs finite alpha > 0, got {alpha}"
        )));
    }
    if max_n < 1 || max_n > set.annotators().len() {
        return Err(Error::InsufficientAnnotators {
            requested: max_n,
            available: set.annotators().len(),
        });
    }

    let k = set.k();
    let item_index: HashMap<&str, usize> = set
        .items()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n_items = set.items().len();
    if n_items == 0 {
        return Err(Error::EmptyData);
    }

    // Reference distributions from the full population, same smoothing.
    let mut full_counts = vec![vec![0u64; k]; n_items];
    let mut by_annotator: HashMap<&str, Vec<(usize, usize)>> = HashMap::new();
    for r in set.records() {
        let ii = item_index[r.item_id.as_str()];
        full_counts[ii][r.label.index()] += 1;
        by_annotator
            .entry(r.annotator_id.as_str())
            .or_default()
            .push((ii, r.label.index()));
    }
    let reference: Vec<LabelDistribution> = full_counts
        .iter()
        .map(|c| LabelDistribution::new(smoothed_probs(c, alpha)))
        .collect::<Result<_>>()?;

    let mut per_run: Vec<Vec<f64>> = vec![Vec::with_capacity(max_n); runs];
    for (run, kls) in per_run.iter_mut().enumerate() {
        let mut order: Vec<&String> = set.annotators().iter().collect();
        order.shuffle(&mut rng::stream(seed, domain::BUDGET_RUN, run as u64));
        let mut counts = vec![vec![0u64; k]; n_items];
        for annotator in order.iter().take(max_n) {
            if let Some(responses) = by_annotator.get(annotator.as_str()) {
                for &(ii, label) in responses {
                    counts[ii][label] += 1;
                }
            }
            let mut sum = 0.0;
            for (ii, c) in counts.iter().enumerate() {
                let sampled = LabelDistribution::new(smoothed_probs(c, alpha))?;
                sum += reference[ii].kl_divergence(&sampled)?;
            }
            kls.push(sum / n_items as f64);
        }
    }

    let points = (1..=max_n)
        .map(|n| {
            let per_run_kl: Vec<f64> = per_run.iter().map(|r| r[n - 1]).collect();
            let mean_kl = per_run_kl.iter().sum::<f64>() / runs as f64;
            BudgetPoint {
                n_annotators: n,
                mean_kl,
                per_run_kl,
            }
        })
        .collect();
    Ok(BudgetCurve { runs, points })
}

/// One soft-label line: `{"item_id", "probs"}` plus optional raw counts and
/// optional feature vector (present when aggregation was joined against an
/// item table).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftLabelLine {
    pub item_id: String,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

/// Write soft labels as JSON Lines. Probabilities and features are printed
/// at 17 significant digits so reloading reproduces every f64 bit-exactly.
pub fn write_soft_labels(path: &Path, rows: &[SoftLabelLine]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str("{\"item_id\":");
        out.push_str(&serde_json::to_string(&row.item_id).map_err(|e| Error::json(path, e))?);
        out.push_str(",\"probs\":");
        out.push_str(&jsonl::f64_array_sig17(&row.probs));
        if let Some(counts) = &row.counts {
            out.push_str(",\"counts\":");
            out.push_str(&serde_json::to_string(counts).map_err(|e| Error::json(path, e))?);
        }
        if let Some(features) = &row.features {
            out.push_str(",\"features\":");
            out.push_str(&jsonl::f64_array_sig17(features));
        }
        out.push_str("}\n");
    }
    jsonl::write_string(path, &out)
}

pub fn read_soft_labels(path: &Path) -> Result<Vec<SoftLabelLine>> {
    jsonl::read_jsonl(path)
}
