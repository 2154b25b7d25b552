//! How much probability does the crowd put on the official gold label?
//! Prints the relative-frequency histogram as plot-ready CSV.
//!
//! Run with: cargo run -p slmg --example gold_histogram

use std::collections::BTreeMap;

use slmg::crowd::{estimate_soft_labels, gold_agreement_histogram};
use slmg::synth::{generate_population, PopulationConfig};

fn main() -> slmg::Result<()> {
    let population = generate_population(&PopulationConfig {
        n_items: 500,
        n_annotators: 200,
        classes: 3,
        feature_dim: 4,
        ambiguity: 0.4,
        annotator_noise: 0.1,
        seed: 23,
    })?;

    let soft = estimate_soft_labels(&population.annotations, 0.0)?;
    let gold: BTreeMap<_, _> = population
        .items
        .iter()
        .map(|it| (it.item_id.clone(), it.gold))
        .collect();

    let histogram = gold_agreement_histogram(&soft, &gold, 0.1)?;
    println!("bin_start,relative_frequency");
    for (start, freq) in &histogram {
        println!("{start:.1},{freq}");
    }

    let below_80: f64 = histogram
        .iter()
        .filter(|(start, _)| *start < 0.75)
        .map(|(_, f)| f)
        .sum();
    println!();
    println!(
        "share of items whose gold label gets < 80% of the crowd: {:.1}%",
        100.0 * below_80
    );
    println!("most items concentrate near 1.0, with a tail of ambiguous ones");
    Ok(())
}
