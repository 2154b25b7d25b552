//! Training schedules.
//!
//! All schedules share one epoch primitive: seeded shuffle, sequential
//! mini-batches, one SGD step per batch. Hard-labeled data runs through the
//! same path as soft data by converting each hard example into a one-hot
//! soft example, which also makes the single-label cross-entropy reduction
//! automatic.
//!
//! - `train_b1`: plain supervised training on hard labels.
//! - `train_slmg_i` (interspersed): every epoch, one hard pass then one soft
//!   pass.
//! - `train_slmg_s` (sequential): per meta-epoch, `e` hard epochs then `e`
//!   soft epochs.
//!
//! Shuffle seeds derive from the config seed and the global epoch index per
//! phase kind, so B1 and the SLMG schedules perform bit-identical hard
//! updates until the first soft pass, and collapse to B1 exactly when the
//! soft set is empty.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, build_aoc_dataset, build_cle_dataset, harden, Featurizer, HardExample, SoftExample,
};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport};
use crate::jsonl;
use crate::label_core::LabelDistribution;
use crate::model::{
    self, gradient, init_params, mean_loss, Architecture, ClassifierParams, LossKind,
};
use crate::rng::{self, domain};

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Epochs per hard (and per soft, in SLMG-S) phase.
    pub epochs: usize,
    /// Meta-epochs; only SLMG-S consumes this.
    pub meta_epochs: usize,
    pub hard_loss: LossKind,
    pub soft_loss: LossKind,
    pub lr_hard: f64,
    pub lr_soft: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// When true and a dev set is given, the selected parameters are those
    /// of the epoch with the highest dev accuracy (ties toward the earlier
    /// epoch) instead of the final ones.
    pub dev_selection: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            meta_epochs: 3,
            hard_loss: LossKind::Cce,
            soft_loss: LossKind::Cce,
            lr_hard: 0.1,
            lr_soft: 0.1,
            batch_size: 32,
            seed: 0,
            dev_selection: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::BadConfig("batch_size must be >= 1".into()));
        }
        for (name, lr) in [("lr_hard", self.lr_hard), ("lr_soft", self.lr_soft)] {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(Error::BadConfig(format!(
                    "{name} must be finite and > 0, got {lr}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Hard,
    Soft,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Hard => write!(f, "hard"),
            Phase::Soft => write!(f, "soft"),
        }
    }
}

/// One epoch's telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: Phase,
    pub meta_epoch: usize,
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_accuracy: Option<f64>,
    /// SGD steps taken this epoch: ceil(|data| / batch_size).
    pub steps: usize,
}

/// Soft-set loss measured immediately before and after one soft phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPhaseDelta {
    /// Sequential index of the soft phase within the schedule.
    pub index: usize,
    pub loss_before: f64,
    pub loss_after: f64,
}

/// Full telemetry of a training run.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub records: Vec<PhaseRecord>,
    pub soft_deltas: Vec<SoftPhaseDelta>,
    pub final_params: ClassifierParams,
    /// Best-dev-epoch parameters under dev selection, otherwise the final
    /// parameters.
    pub selected_params: ClassifierParams,
}

impl TrainTrace {
    /// CSV with header `phase,meta_epoch,epoch,mean_loss,dev_accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,meta_epoch,epoch,mean_loss,dev_accuracy\n");
        for r in &self.records {
            let dev = r.dev_accuracy.map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.phase, r.meta_epoch, r.epoch, r.mean_loss, dev
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        jsonl::write_string(path, &self.to_csv())
    }
}

/// Convert hard examples to one-hot soft examples so every schedule trains
/// through a single code path.
pub fn to_one_hot(data: &[HardExample], classes: usize) -> Result<Vec<SoftExample>> {
    data.iter()
        .map(|h| {
            Ok(SoftExample {
                features: h.features.clone(),
                target: LabelDistribution::one_hot(h.label, classes)?,
                counts: None,
            })
        })
        .collect()
}

/// One full pass over `data`: seeded shuffle, sequential mini-batches (the
/// last may be short), one SGD step per batch. The reported loss is the
/// example-weighted mean of the batch losses, each measured before its step.
pub fn train_epoch(
    params: &ClassifierParams,
    data: &[SoftExample],
    loss: LossKind,
    lr: f64,
    batch_size: usize,
    shuffle_seed: u64,
) -> Result<(ClassifierParams, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if batch_size < 1 {
        return Err(Error::BadConfig("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));

    let mut params = params.clone();
    let mut weighted_loss = 0.0;
    let mut batch = Vec::with_capacity(batch_size.min(data.len()));
    for chunk in order.chunks(batch_size) {
        batch.clear();
        batch.extend(chunk.iter().map(|&i| data[i].clone()));
        let (batch_loss, grads) = gradient(&params, &batch, loss)?;
        weighted_loss += batch_loss * batch.len() as f64;
        params = params.sgd_step(&grads, lr)?;
    }
    Ok((params, weighted_loss / data.len() as f64))
}

fn steps_for(len: usize, batch_size: usize) -> usize {
    len.div_ceil(batch_size)
}

/// Tracks the best dev-accuracy parameters seen so far (strict improvement,
/// so ties resolve toward the earlier epoch).
struct Selector<'a> {
    dev: Option<&'a [HardExample]>,
    enabled: bool,
    best: Option<(f64, ClassifierParams)>,
}

impl<'a> Selector<'a> {
    fn new(dev: Option<&'a [HardExample]>, enabled: bool) -> Self {
        Self {
            dev,
            enabled,
            best: None,
        }
    }

    fn observe(&mut self, params: &ClassifierParams) -> Result<Option<f64>> {
        let (Some(dev), true) = (self.dev, self.enabled) else {
            return Ok(None);
        };
        let accuracy = eval::evaluate(params, dev)?.accuracy;
        if self.best.as_ref().map_or(true, |(b, _)| accuracy > *b) {
            self.best = Some((accuracy, params.clone()));
        }
        Ok(Some(accuracy))
    }

    fn select(self, final_params: &ClassifierParams) -> ClassifierParams {
        match self.best {
            Some((_, p)) => p,
            None => final_params.clone(),
        }
    }
}

struct Runner<'a> {
    cfg: &'a TrainConfig,
    params: ClassifierParams,
    records: Vec<PhaseRecord>,
    soft_deltas: Vec<SoftPhaseDelta>,
    selector: Selector<'a>,
}

impl<'a> Runner<'a> {
    fn new(init: &ClassifierParams, cfg: &'a TrainConfig, dev: Option<&'a [HardExample]>) -> Self {
        Self {
            cfg,
            params: init.clone(),
            records: Vec::new(),
            soft_deltas: Vec::new(),
            selector: Selector::new(dev, cfg.dev_selection),
        }
    }

    /// One epoch of `phase`; `global_epoch` indexes the shuffle substream.
    fn epoch(
        &mut self,
        phase: Phase,
        data: &[SoftExample],
        meta_epoch: usize,
        epoch: usize,
        global_epoch: usize,
    ) -> Result<()> {
        let (loss_kind, lr, dom) = match phase {
            Phase::Hard => (self.cfg.hard_loss, self.cfg.lr_hard, domain::HARD_SHUFFLE),
            Phase::Soft => (self.cfg.soft_loss, self.cfg.lr_soft, domain::SOFT_SHUFFLE),
        };
        let shuffle_seed = rng::derive_seed(self.cfg.seed, dom, global_epoch as u64);
        let (params, mean_epoch_loss) = train_epoch(
            &self.params,
            data,
            loss_kind,
            lr,
            self.cfg.batch_size,
            shuffle_seed,
        )?;
        self.params = params;
        let dev_accuracy = self.selector.observe(&self.params)?;
        self.records.push(PhaseRecord {
            phase,
            meta_epoch,
            epoch,
            mean_loss: mean_epoch_loss,
            dev_accuracy,
            steps: steps_for(data.len(), self.cfg.batch_size),
        });
        Ok(())
    }

    fn soft_loss_on(&self, soft: &[SoftExample]) -> Result<f64> {
        mean_loss(&self.params, soft, self.cfg.soft_loss)
    }

    fn finish(self) -> TrainTrace {
        let selected_params = self.selector.select(&self.params);
        TrainTrace {
            records: self.records,
            soft_deltas: self.soft_deltas,
            final_params: self.params,
            selected_params,
        }
    }
}

/// Traditional training: `epochs` hard-label epochs. Any soft items the
/// caller wants included must already be hardened into `hard`.
pub fn train_b1(
    init: &ClassifierParams,
    hard: &[HardExample],
    cfg: &TrainConfig,
    dev: Option<&[HardExample]>,
) -> Result<TrainTrace> {
    if hard.is_empty() {
        return Err(Error::EmptyData);
    }
    let data = to_one_hot(hard, init.classes)?;
    let mut runner = Runner::new(init, cfg, dev);
    for epoch in 0..cfg.epochs {
        runner.epoch(Phase::Hard, &data, 0, epoch, epoch)?;
    }
    Ok(runner.finish())
}

/// Interspersed fine-tuning: each epoch trains once on the hard set, then
/// once on the soft set. With an empty soft set this is exactly `train_b1`.
pub fn train_slmg_i(
    init: &ClassifierParams,
    hard: &[HardExample],
    soft: &[SoftExample],
    cfg: &TrainConfig,
    dev: Option<&[HardExample]>,
) -> Result<TrainTrace> {
    if hard.is_empty() {
        return Err(Error::EmptyData);
    }
    let hard_data = to_one_hot(hard, init.classes)?;
    let mut runner = Runner::new(init, cfg, dev);
    for epoch in 0..cfg.epochs {
        runner.epoch(Phase::Hard, &hard_data, 0, epoch, epoch)?;
        if !soft.is_empty() {
            let loss_before = runner.soft_loss_on(soft)?;
            runner.epoch(Phase::Soft, soft, 0, epoch, epoch)?;
            let loss_after = runner.soft_loss_on(soft)?;
            runner.soft_deltas.push(SoftPhaseDelta {
                index: epoch,
                loss_before,
                loss_after,
            });
        }
    }
    Ok(runner.finish())
}

/// Sequential fine-tuning: each meta-epoch runs `epochs` hard epochs and
/// then `epochs` soft epochs. With an empty soft set and one meta-epoch this
/// is exactly `train_b1`.
pub fn train_slmg_s(
    init: &ClassifierParams,
    hard: &[HardExample],
    soft: &[SoftExample],
    cfg: &TrainConfig,
    dev: Option<&[HardExample]>,
) -> Result<TrainTrace> {
    if hard.is_empty() {
        return Err(Error::EmptyData);
    }
    let hard_data = to_one_hot(hard, init.classes)?;
    let mut runner = Runner::new(init, cfg, dev);
    for meta in 0..cfg.meta_epochs {
        for epoch in 0..cfg.epochs {
            runner.epoch(Phase::Hard, &hard_data, meta, epoch, meta * cfg.epochs + epoch)?;
        }
        if !soft.is_empty() {
            let loss_before = runner.soft_loss_on(soft)?;
            for epoch in 0..cfg.epochs {
                runner.epoch(Phase::Soft, soft, meta, epoch, meta * cfg.epochs + epoch)?;
            }
            let loss_after = runner.soft_loss_on(soft)?;
            runner.soft_deltas.push(SoftPhaseDelta {
                index: meta,
                loss_before,
                loss_after,
            });
        }
    }
    Ok(runner.finish())
}

/// The experiment grid's row labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    B1,
    Cle,
    Aoc,
    SlmgS,
    SlmgI,
}

impl ScheduleKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "B1" => Ok(Self::B1),
            "CLE" => Ok(Self::Cle),
            "AOC" => Ok(Self::Aoc),
            "SLMG-S" => Ok(Self::SlmgS),
            "SLMG-I" => Ok(Self::SlmgI),
            _ => Err(Error::UnknownSchedule {
                name: name.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::B1 => "B1",
            Self::Cle => "CLE",
            Self::Aoc => "AOC",
            Self::SlmgS => "SLMG-S",
            Self::SlmgI => "SLMG-I",
        }
    }
}

/// Data files of one experiment. Every file is JSON Lines in the dataset
/// module's format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataPaths {
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    pub test: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_pool: Option<PathBuf>,
    #[serde(default)]
    pub n_extra: usize,
}

/// Training hyperparameters as written in a manifest; unset learning rates
/// fall back to the architecture default (0.1 linear, 0.05 one-hidden) and
/// `lr_soft` falls back to `lr_hard`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub meta_epochs: Option<usize>,
    #[serde(default)]
    pub hard_loss: Option<LossKind>,
    #[serde(default)]
    pub soft_loss: Option<LossKind>,
    #[serde(default)]
    pub lr_hard: Option<f64>,
    #[serde(default)]
    pub lr_soft: Option<f64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dev_selection: Option<bool>,
}

impl TrainSettings {
    pub fn resolve(&self, arch: Architecture) -> Result<TrainConfig> {
        let defaults = TrainConfig::default();
        let arch_lr = match arch {
            Architecture::Linear => 0.1,
            Architecture::OneHidden { .. } => 0.05,
        };
        let lr_hard = self.lr_hard.unwrap_or(arch_lr);
        let cfg = TrainConfig {
            epochs: self.epochs.unwrap_or(defaults.epochs),
            meta_epochs: self.meta_epochs.unwrap_or(defaults.meta_epochs),
            hard_loss: self.hard_loss.unwrap_or(defaults.hard_loss),
            soft_loss: self.soft_loss.unwrap_or(defaults.soft_loss),
            lr_hard,
            lr_soft: self.lr_soft.unwrap_or(lr_hard),
            batch_size: self.batch_size.unwrap_or(defaults.batch_size),
            seed: self.seed.unwrap_or(defaults.seed),
            dev_selection: self.dev_selection.unwrap_or(defaults.dev_selection),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
}

/// A whole experiment: schedule, data, featurizer, model, training settings,
/// and where to write results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schedule: String,
    pub classes: usize,
    pub data: DataPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub featurizer: Option<Featurizer>,
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainSettings,
    /// When set, `eval.json` also reports the binary-collapse accuracy with
    /// this class as positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_positive: Option<usize>,
    pub out_dir: PathBuf,
}

impl ExperimentManifest {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct ExperimentResult {
    pub schedule: ScheduleKind,
    pub config: TrainConfig,
    pub trace: TrainTrace,
    pub report: EvalReport,
}

/// Run one manifest end to end: build the schedule's training set, train,
/// evaluate the selected parameters on the test set, and write `trace.csv`,
/// `eval.json`, `confusion.csv`, and `checkpoint.json` into `out_dir`.
pub fn run_experiment(manifest: &ExperimentManifest) -> Result<ExperimentResult> {
    let schedule = ScheduleKind::parse(&manifest.schedule)?;
    if manifest.classes < 2 {
        return Err(Error::BadConfig(format!(
            "need at least 2 classes, got {}",
            manifest.classes
        )));
    }
    if let Some(f) = &manifest.featurizer {
        f.validate()?;
    }
    let cfg = manifest.train.resolve(manifest.model.arch)?;
    let k = manifest.classes;
    let feat = manifest.featurizer.as_ref();

    let train_hard = dataset::load_hard_dataset(&manifest.data.train, k, feat)?;
    let soft: Vec<SoftExample> = match &manifest.data.soft {
        Some(path) => dataset::load_soft_dataset(path, k, feat)?,
        None => Vec::new(),
    };
    let dev = manifest
        .data
        .dev
        .as_ref()
        .map(|p| dataset::load_hard_dataset(p, k, feat))
        .transpose()?;
    let test_lines = dataset::load_lines(&manifest.data.test)?;
    let test_hard = dataset::hard_from_lines(&test_lines, &manifest.data.test, k, feat)?;
    let test_soft = if !test_lines.is_empty() && test_lines.iter().all(|l| l.probs.is_some()) {
        Some(dataset::soft_from_lines(
            &test_lines,
            &manifest.data.test,
            k,
            feat,
        )?)
    } else {
        None
    };

    // The hard set each schedule trains on. SLMG schedules keep the soft
    // items out of it; they are seen only through the soft phases.
    let hard: Vec<HardExample> = match schedule {
        ScheduleKind::B1 => with_hardened(&train_hard, &soft),
        ScheduleKind::Cle => {
            let pool_path = manifest.data.extra_pool.as_ref().ok_or_else(|| {
                Error::BadConfig("CLE needs data.extra_pool and data.n_extra".into())
            })?;
            let pool = dataset::load_hard_dataset(pool_path, k, feat)?;
            build_cle_dataset(
                &with_hardened(&train_hard, &soft),
                &pool,
                manifest.data.n_extra,
                cfg.seed,
            )?
        }
        ScheduleKind::Aoc => {
            let mut hard = train_hard.clone();
            hard.extend(build_aoc_dataset(&soft)?);
            hard
        }
        ScheduleKind::SlmgS | ScheduleKind::SlmgI => train_hard.clone(),
    };
    if hard.is_empty() {
        return Err(Error::EmptyData);
    }

    let input_dim = hard[0].features.dim();
    let init = init_params(manifest.model.arch, input_dim, k, cfg.seed)?;
    let dev_ref = dev.as_deref();
    let trace = match schedule {
        ScheduleKind::B1 | ScheduleKind::Cle | ScheduleKind::Aoc => {
            train_b1(&init, &hard, &cfg, dev_ref)?
        }
        ScheduleKind::SlmgI => train_slmg_i(&init, &hard, &soft, &cfg, dev_ref)?,
        ScheduleKind::SlmgS => train_slmg_s(&init, &hard, &soft, &cfg, dev_ref)?,
    };

    let mut report = eval::evaluate(&trace.selected_params, &test_hard)?;
    if let Some(positive) = manifest.binary_positive {
        report.binary_accuracy = Some(eval::binary_collapse_accuracy(
            &report.confusion,
            crate::label_core::ClassLabel(positive),
        )?);
    }
    if let Some(test_soft) = &test_soft {
        report.mean_kl_to_reference =
            Some(eval::mean_kl_to_reference(&trace.selected_params, test_soft)?);
    }

    let out = &manifest.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    trace.write_csv(&out.join("trace.csv"))?;
    report.write_json(&out.join("eval.json"))?;
    report.write_confusion_csv(&out.join("confusion.csv"))?;
    model::save_checkpoint(
        &trace.selected_params,
        manifest.featurizer.as_ref(),
        &out.join("checkpoint.json"),
    )?;

    Ok(ExperimentResult {
        schedule,
        config: cfg,
        trace,
        report,
    })
}

fn with_hardened(train: &[HardExample], soft: &[SoftExample]) -> Vec<HardExample> {
    let mut hard = train.to_vec();
    hard.extend(soft.iter().map(harden));
    hard
}
