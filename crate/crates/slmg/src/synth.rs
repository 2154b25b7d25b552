//! Synthetic populations: items with known label distributions, features
//! correlated with those distributions, and simulated annotators.
//!
//! Each item draws its true distribution from a Dirichlet whose concentration
//! is `ambiguity` on every class except a randomly chosen dominant class,
//! which gets ten times that. Small `ambiguity` yields near-one-hot items;
//! larger values yield genuinely ambiguous ones. Features are the dominant
//! class's template vector plus isotropic Gaussian noise whose scale is the
//! item's normalized entropy, so ambiguous items are also harder to classify.
//! Annotators label each item from its true distribution, except that with
//! probability `annotator_noise` they answer uniformly at random.
//!
//! All randomness comes from per-item substreams of the root seed (see
//! [`crate::rng`]), so generation is reproducible and order-independent
//! across items.

use std::path::Path;

use rand::RngExt;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crowd::{AnnotationRecord, AnnotationSet};
use crate::dataset::{self, DatasetLine, FeatureVector, HardExample, SoftExample};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::label_core::{ClassLabel, LabelDistribution};
use crate::rng::{self, domain};

/// Shape of a synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n_items: usize,
    pub n_annotators: usize,
    pub classes: usize,
    #[serde(default = "PopulationConfig::default_feature_dim")]
    pub feature_dim: usize,
    /// Dirichlet concentration; the dominant class gets 10x this value.
    #[serde(default = "PopulationConfig::default_ambiguity")]
    pub ambiguity: f64,
    /// Probability that an annotator answers uniformly at random.
    #[serde(default = "PopulationConfig::default_annotator_noise")]
    pub annotator_noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationConfig {
    fn default_feature_dim() -> usize {
        32
    }

    fn default_ambiguity() -> f64 {
        1.0
    }

    fn default_annotator_noise() -> f64 {
        0.1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items < 1 || self.n_annotators < 1 || self.feature_dim < 1 {
            return Err(Error::BadConfig(
                "n_items, n_annotators, and feature_dim must be >= 1".into(),
            ));
        }
        if self.classes < 2 {
            return Err(Error::BadConfig(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if !(self.ambiguity > 0.0) || !self.ambiguity.is_finite() {
            return Err(Error::BadConfig(format!(
                "ambiguity must be finite and > 0, got {}",
                self.ambiguity
            )));
        }
        if !(0.0..=1.0).contains(&self.annotator_noise) {
            return Err(Error::BadConfig(format!(
                "annotator_noise must be in [0, 1], got {}",
                self.annotator_noise
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PopulationConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One generated item.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub item_id: String,
    pub features: FeatureVector,
    pub true_dist: LabelDistribution,
    /// argmax of `true_dist`.
    pub gold: ClassLabel,
}

/// Items plus the simulated crowd's annotations over them.
#[derive(Debug, Clone)]
pub struct SyntheticPopulation {
    pub config: PopulationConfig,
    pub items: Vec<SynthItem>,
    pub annotations: AnnotationSet,
}

fn sample_class(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Generate a population deterministically from its config.
pub fn generate_population(config: &PopulationConfig) -> Result<SyntheticPopulation> {
    config.validate()?;
    let k = config.classes;
    let seed = config.seed;

    // Unit-norm class templates, one fixed direction per class.
    let mut template_rng = rng::stream(seed, domain::CLASS_TEMPLATES, 0);
    let templates: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let mut t: Vec<f64> = (0..config.feature_dim)
                .map(|_| StandardNormal.sample(&mut template_rng))
                .collect();
            let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in t.iter_mut() {
                    *x /= norm;
                }
            } else {
                t[0] = 1.0;
            }
            t
        })
        .collect();

    let max_entropy = (k as f64).ln();
    let mut items = Vec::with_capacity(config.n_items);
    let mut records = Vec::with_capacity(config.n_items * config.n_annotators);
    for i in 0..config.n_items {
        let item_id = format!("i{i:06}");

        let mut dist_rng = rng::stream(seed, domain::ITEM_DISTRIBUTION, i as u64);
        let dominant = dist_rng.random_range(0..k);
        let mut raw = Vec::with_capacity(k);
        for class in 0..k {
            let shape = if class == dominant {
                10.0 * config.ambiguity
            } else {
                config.ambiguity
            };
            let gamma = Gamma::new(shape, 1.0)
                .map_err(|e| Error::Internal(format!("gamma sampler: {e}")))?;
            raw.push(gamma.sample(&mut dist_rng));
        }
        let sum: f64 = raw.iter().sum();
        let probs: Vec<f64> = if sum > 0.0 && sum.is_finite() {
            raw.iter().map(|x| x / sum).collect()
        } else {
            // Deep-underflow corner of tiny concentrations.
            (0..k).map(|c| if c == dominant { 1.0 } else { 0.0 }).collect()
        };
        let true_dist = LabelDistribution::new(probs)?;
        let gold = true_dist.argmax();

        let mut feature_rng = rng::stream(seed, domain::ITEM_FEATURES, i as u64);
        let sigma = true_dist.entropy() / max_entropy;
        let values: Vec<f64> = templates[dominant]
            .iter()
            .map(|&t| {
                let noise: f64 = StandardNormal.sample(&mut feature_rng);
                t + sigma * noise
            })
            .collect();
        let features = FeatureVector::new(values)?;

        let mut annotation_rng = rng::stream(seed, domain::ITEM_ANNOTATIONS, i as u64);
        for a in 0..config.n_annotators {
            let coin: f64 = annotation_rng.random();
            let u: f64 = annotation_rng.random();
            let label = if coin < config.annotator_noise {
                (u * k as f64) as usize % k
            } else {
                sample_class(true_dist.probs(), u)
            };
            records.push(AnnotationRecord {
                item_id: item_id.clone(),
                annotator_id: format!("a{a:06}"),
                label: ClassLabel(label),
            });
        }

        items.push(SynthItem {
            item_id,
            features,
            true_dist,
            gold,
        });
    }

    let annotations = AnnotationSet::from_records(k, records)?;
    Ok(SyntheticPopulation {
        config: config.clone(),
        items,
        annotations,
    })
}

impl SyntheticPopulation {
    /// Items as hard examples labeled with their gold class.
    pub fn hard_examples(&self) -> Vec<HardExample> {
        self.items
            .iter()
            .map(|it| HardExample {
                features: it.features.clone(),
                label: it.gold,
            })
            .collect()
    }

    /// Items as soft examples targeted at their true distributions.
    pub fn true_soft_examples(&self) -> Vec<SoftExample> {
        self.items
            .iter()
            .map(|it| SoftExample {
                features: it.features.clone(),
                target: it.true_dist.clone(),
                counts: None,
            })
            .collect()
    }

    /// Write `items.jsonl`, `annotations.jsonl`, and `manifest.json` into
    /// `dir` (created if missing).
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let rows: Vec<DatasetLine> = self
            .items
            .iter()
            .map(|it| DatasetLine {
                item_id: it.item_id.clone(),
                text_a: None,
                text_b: None,
                features: Some(it.features.values().to_vec()),
                label: Some(it.gold.index()),
                probs: Some(it.true_dist.probs().to_vec()),
                counts: None,
            })
            .collect();
        dataset::write_dataset_lines(&dir.join("items.jsonl"), &rows)?;
        self.annotations.write_jsonl(&dir.join("annotations.jsonl"))?;
        let manifest_path = dir.join("manifest.json");
        let manifest = serde_json::to_string_pretty(&self.config)
            .map_err(|e| Error::json(&manifest_path, e))?;
        jsonl::write_string(&manifest_path, &format!("{manifest}\n"))
    }
}
