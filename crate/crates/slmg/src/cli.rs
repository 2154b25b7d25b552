//! The `slmg` command-line tool.
//!
//! One thin binary with a subcommand per capability; every subcommand
//! delegates to the library and writes its outputs plus a manifest echoing
//! the effective parameters (including defaults) and a creation timestamp.
//! Output files are deterministic given identical inputs and seeds; the
//! timestamp lives only in the manifest.
//!
//! Exit codes: 0 on success, 2 on input or validation errors, 1 on internal
//! invariant violations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::crowd::{self, AnnotationSet, SoftLabelLine};
use crate::dataset;
use crate::error::{Error, Result};
use crate::eval;
use crate::jsonl;
use crate::label_core::{ClassLabel, LabelDistribution};
use crate::model;
use crate::schedule::{self, ExperimentManifest};
use crate::synth::{self, PopulationConfig};

#[derive(Debug, Parser)]
#[command(
    name = "slmg",
    version,
    about = "Soft-label training from crowd annotations: aggregation, agreement, label budgets, and fine-tuning schedules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate raw annotations into per-item soft labels.
    Aggregate {
        /// Annotations JSON Lines: {"item_id","annotator_id","label"}.
        #[arg(long)]
        annotations: PathBuf,
        /// Number of classes.
        #[arg(long)]
        classes: usize,
        /// Additive smoothing; 0 gives raw proportions.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Optional item table with "features" per item_id; when given, the
        /// output lines also carry the features, ready for training.
        #[arg(long)]
        items: Option<PathBuf>,
        /// Output soft-label JSON Lines.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fleiss' kappa inter-annotator agreement.
    Agreement {
        #[arg(long)]
        annotations: PathBuf,
        /// Number of classes; inferred from the data when omitted.
        #[arg(long)]
        classes: Option<usize>,
        /// Output JSON report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean KL divergence between full-population and sub-sampled soft
    /// labels as annotators are added one at a time.
    BudgetCurve {
        #[arg(long)]
        annotations: PathBuf,
        /// Number of classes; inferred from the data when omitted.
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Largest annotator sample size.
        #[arg(long)]
        max_n: usize,
        /// Additive smoothing for both the reference and sampled estimates.
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV with header n,run,kl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the records of a random subset of annotators.
    Subsample {
        #[arg(long)]
        annotations: PathBuf,
        /// Number of classes; inferred from the data when omitted.
        #[arg(long)]
        classes: Option<usize>,
        /// How many annotators to keep.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output annotations JSON Lines.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic population (items.jsonl, annotations.jsonl).
    Synth {
        /// Population config JSON; see PopulationConfig in the docs.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a training experiment from a manifest.
    Train {
        /// Experiment manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Evaluate a checkpoint on a test set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test set JSON Lines (hard labels; probs enable the KL report).
        #[arg(long)]
        test: PathBuf,
        /// Also report binary-collapse accuracy with this positive class.
        #[arg(long)]
        binary_positive: Option<usize>,
        /// Output eval JSON; a confusion CSV lands next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram of the crowd-estimated probability of each gold label.
    Report {
        /// Soft labels JSON Lines: {"item_id","probs"}.
        #[arg(long)]
        soft: PathBuf,
        /// Gold labels JSON Lines: {"item_id","label"}.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        bin_width: f64,
        /// Output CSV with header bin_start,relative_frequency.
        #[arg(long)]
        out: PathBuf,
    },
}

fn unix_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Manifest path for a file output: `soft.jsonl` -> `soft.jsonl.manifest.json`.
fn manifest_path_for_file(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    out.with_file_name(format!("{name}.manifest.json"))
}

fn write_manifest(path: &Path, command: &str, parameters: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "command": command,
        "created_unix": unix_seconds(),
        "parameters": parameters,
    });
    let mut text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    jsonl::write_string(path, &text)
}

fn load_feature_table(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let rows = dataset::load_lines(path)?;
    let mut out = BTreeMap::new();
    for (i, row) in rows.into_iter().enumerate() {
        let features = row.features.ok_or_else(|| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: "missing \"features\"".into(),
        })?;
        out.insert(row.item_id, features);
    }
    Ok(out)
}

fn cmd_aggregate(
    annotations: &Path,
    classes: usize,
    alpha: f64,
    items: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let set = AnnotationSet::from_jsonl(annotations, Some(classes))?;
    if set.duplicates_dropped() > 0 {
        eprintln!(
            "note: dropped {} duplicate (item, annotator) record(s), keeping the last",
            set.duplicates_dropped()
        );
    }
    let soft = crowd::estimate_soft_labels(&set, alpha)?;
    let counts = set.counts_by_item();
    let feature_table = items.map(load_feature_table).transpose()?;

    let mut rows = Vec::with_capacity(soft.len());
    for (item_id, dist) in &soft {
        let features = match &feature_table {
            Some(table) => Some(table.get(item_id).cloned().ok_or_else(|| {
                Error::BadConfig(format!("item table has no features for {item_id:?}"))
            })?),
            None => None,
        };
        rows.push(SoftLabelLine {
            item_id: item_id.clone(),
            probs: dist.probs().to_vec(),
            counts: Some(counts[item_id].clone()),
            features,
        });
    }
    crowd::write_soft_labels(out, &rows)?;
    write_manifest(
        &manifest_path_for_file(out),
        "aggregate",
        json!({
            "annotations": annotations,
            "classes": classes,
            "alpha": alpha,
            "items": items,
            "out": out,
            "duplicates_dropped": set.duplicates_dropped(),
        }),
    )?;
    println!("wrote {} soft labels to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_agreement(annotations: &Path, classes: Option<usize>, out: &Path) -> Result<()> {
    let set = AnnotationSet::from_jsonl(annotations, classes)?;
    let report = crowd::fleiss_kappa(&set)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::json(out, e))?;
    text.push('\n');
    jsonl::write_string(out, &text)?;
    write_manifest(
        &manifest_path_for_file(out),
        "agreement",
        json!({
            "annotations": annotations,
            "classes": set.k(),
            "out": out,
        }),
    )?;
    println!(
        "kappa = {:.4} over {} items ({} dropped, {} ratings each)",
        report.kappa, report.items_used, report.items_dropped, report.ratings_per_item
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_budget_curve(
    annotations: &Path,
    classes: Option<usize>,
    runs: usize,
    max_n: usize,
    alpha: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let set = AnnotationSet::from_jsonl(annotations, classes)?;
    let curve = crowd::budget_curve(&set, runs, max_n, alpha, seed)?;
    curve.write_csv(out)?;
    write_manifest(
        &manifest_path_for_file(out),
        "budget-curve",
        json!({
            "annotations": annotations,
            "classes": set.k(),
            "runs": runs,
            "max_n": max_n,
            "alpha": alpha,
            "seed": seed,
            "out": out,
        }),
    )?;
    let last = curve.points.last().map(|p| p.mean_kl).unwrap_or(f64::NAN);
    println!(
        "wrote {} curve points to {} (mean KL at n={max_n}: {last})",
        curve.points.len(),
        out.display()
    );
    Ok(())
}

fn cmd_subsample(
    annotations: &Path,
    classes: Option<usize>,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let set = AnnotationSet::from_jsonl(annotations, classes)?;
    let sub = crowd::subsample_annotators(&set, n, seed)?;
    sub.write_jsonl(out)?;
    write_manifest(
        &manifest_path_for_file(out),
        "subsample",
        json!({
            "annotations": annotations,
            "classes": set.k(),
            "n": n,
            "seed": seed,
            "out": out,
        }),
    )?;
    println!(
        "kept {} records from {} annotators",
        sub.records().len(),
        n
    );
    Ok(())
}

fn cmd_synth(config: &Path, out: &Path) -> Result<()> {
    let cfg = PopulationConfig::from_json_file(config)?;
    let population = synth::generate_population(&cfg)?;
    population.write_to_dir(out)?;
    // Replace the bare config echo with the full command manifest.
    write_manifest(
        &out.join("manifest.json"),
        "synth",
        json!({
            "config": config,
            "out": out,
            "population": cfg,
        }),
    )?;
    println!(
        "generated {} items x {} annotators into {}",
        cfg.n_items,
        cfg.n_annotators,
        out.display()
    );
    Ok(())
}

fn cmd_train(manifest_path: &Path) -> Result<()> {
    let manifest = ExperimentManifest::from_json_file(manifest_path)?;
    let result = schedule::run_experiment(&manifest)?;
    write_manifest(
        &manifest.out_dir.join("manifest.json"),
        "train",
        json!({
            "manifest": manifest_path,
            "schedule": result.schedule.name(),
            "classes": manifest.classes,
            "data": manifest.data,
            "featurizer": manifest.featurizer,
            "model": manifest.model,
            "train": result.config,
            "binary_positive": manifest.binary_positive,
            "out_dir": manifest.out_dir,
        }),
    )?;
    println!(
        "{}: test accuracy {:.4} over {} examples (results in {})",
        result.schedule.name(),
        result.report.accuracy,
        result.report.n,
        manifest.out_dir.display()
    );
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    test: &Path,
    binary_positive: Option<usize>,
    out: &Path,
) -> Result<()> {
    let (params, featurizer) = model::load_checkpoint(checkpoint)?;
    let lines = dataset::load_lines(test)?;
    let hard = dataset::hard_from_lines(&lines, test, params.classes, featurizer.as_ref())?;
    let mut report = eval::evaluate(&params, &hard)?;
    if let Some(positive) = binary_positive {
        report.binary_accuracy = Some(eval::binary_collapse_accuracy(
            &report.confusion,
            ClassLabel(positive),
        )?);
    }
    if !lines.is_empty() && lines.iter().all(|l| l.probs.is_some()) {
        let soft = dataset::soft_from_lines(&lines, test, params.classes, featurizer.as_ref())?;
        report.mean_kl_to_reference = Some(eval::mean_kl_to_reference(&params, &soft)?);
    }
    report.write_json(out)?;
    report.write_confusion_csv(&out.with_extension("confusion.csv"))?;
    write_manifest(
        &manifest_path_for_file(out),
        "eval",
        json!({
            "checkpoint": checkpoint,
            "test": test,
            "binary_positive": binary_positive,
            "out": out,
        }),
    )?;
    println!("accuracy {:.4} over {} examples", report.accuracy, report.n);
    Ok(())
}

fn cmd_report(soft_path: &Path, gold_path: &Path, bin_width: f64, out: &Path) -> Result<()> {
    let rows = crowd::read_soft_labels(soft_path)?;
    let mut soft = BTreeMap::new();
    for (i, row) in rows.into_iter().enumerate() {
        let dist = LabelDistribution::new(row.probs).map_err(|e| Error::MalformedLine {
            path: soft_path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        soft.insert(row.item_id, dist);
    }
    let gold = dataset::load_gold_labels(gold_path)?;
    let histogram = crowd::gold_agreement_histogram(&soft, &gold, bin_width)?;
    let mut csv = String::from("bin_start,relative_frequency\n");
    for (start, freq) in &histogram {
        csv.push_str(&format!("{start},{freq}\n"));
    }
    jsonl::write_string(out, &csv)?;
    write_manifest(
        &manifest_path_for_file(out),
        "report",
        json!({
            "soft": soft_path,
            "gold": gold_path,
            "bin_width": bin_width,
            "out": out,
        }),
    )?;
    println!("wrote {} bins to {}", histogram.len(), out.display());
    Ok(())
}

/// Dispatch a parsed command line.
pub fn run_with(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Aggregate {
            annotations,
            classes,
            alpha,
            items,
            out,
        } => cmd_aggregate(&annotations, classes, alpha, items.as_deref(), &out),
        Command::Agreement {
            annotations,
            classes,
            out,
        } => cmd_agreement(&annotations, classes, &out),
        Command::BudgetCurve {
            annotations,
            classes,
            runs,
            max_n,
            alpha,
            seed,
            out,
        } => cmd_budget_curve(&annotations, classes, runs, max_n, alpha, seed, &out),
        Command::Subsample {
            annotations,
            classes,
            n,
            seed,
            out,
        } => cmd_subsample(&annotations, classes, n, seed, &out),
        Command::Synth { config, out } => cmd_synth(&config, &out),
        Command::Train { manifest } => cmd_train(&manifest),
        Command::Eval {
            checkpoint,
            test,
            binary_positive,
            out,
        } => cmd_eval(&checkpoint, &test, binary_positive, &out),
        Command::Report {
            soft,
            gold,
            bin_width,
            out,
        } => cmd_report(&soft, &gold, bin_width, &out),
    }
}

/// Parse the process arguments, run, and map the outcome onto the exit-code
/// contract (0 success, 2 bad input, 1 internal error; panics count as
/// internal).
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    match std::panic::catch_unwind(move || run_with(cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_internal() {
                1
            } else {
                2
            }
        }
        Err(_) => {
            eprintln!("error: internal invariant violated (panic)");
            1
        }
    }
}
