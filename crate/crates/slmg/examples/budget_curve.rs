//! How many annotators do you actually need? Mean KL divergence between
//! full-population soft labels and estimates from the first n sampled
//! annotators, grown one at a time.
//!
//! Run with: cargo run -p slmg --example budget_curve

use slmg::crowd::budget_curve;
use slmg::synth::{generate_population, PopulationConfig};

fn main() -> slmg::Result<()> {
    // 180 items, 1000 noiseless annotators sampling from the true
    // per-item distributions.
    let population = generate_population(&PopulationConfig {
        n_items: 180,
        n_annotators: 1000,
        classes: 3,
        feature_dim: 4,
        ambiguity: 0.1,
        annotator_noise: 0.0,
        seed: 2026,
    })?;

    let curve = budget_curve(&population.annotations, 5, 1000, 0.01, 31)?;

    println!("n      mean KL   per-run KL");
    for n in [1, 2, 5, 10, 15, 20, 50, 100, 500, 1000] {
        let point = &curve.points[n - 1];
        let runs: Vec<String> = point
            .per_run_kl
            .iter()
            .map(|kl| format!("{kl:.4}"))
            .collect();
        println!("{n:<6} {:.4}    [{}]", point.mean_kl, runs.join(", "));
    }
    println!();
    println!("the divergence is already small by n = 15-20 and exactly 0 at n = 1000,");
    println!("so a 20-annotator budget buys nearly the full population's soft labels");
    Ok(())
}
