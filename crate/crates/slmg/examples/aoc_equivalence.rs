//! The all-in-one-classifier (AOC) construction turns every crowd response
//! into its own hard example. Under cross-entropy with full batches, that
//! expansion is algebraically the same as training on the soft proportions
//! directly. This example shows the identity numerically.
//!
//! Run with: cargo run -p slmg --example aoc_equivalence

use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slmg::dataset::{build_aoc_dataset, FeatureVector, SoftExample};
use slmg::label_core::LabelDistribution;
use slmg::model::{gradient, init_params, Architecture, LossKind};

fn main() -> slmg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    // Twelve items, each with 40 crowd responses over 3 classes.
    let items: Vec<SoftExample> = (0..12)
        .map(|_| {
            let features: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut counts = vec![0u64; 3];
            for _ in 0..40 {
                counts[rng.random_range(0..3)] += 1;
            }
            SoftExample::from_counts(FeatureVector::new(features).unwrap(), counts, 0.0).unwrap()
        })
        .collect();

    let expansion = build_aoc_dataset(&items)?;
    println!(
        "{} soft items expand into {} hard examples",
        items.len(),
        expansion.len()
    );

    let params = init_params(Architecture::Linear, 6, 3, 7)?;
    let expansion_soft: Vec<SoftExample> = expansion
        .iter()
        .map(|h| {
            Ok(SoftExample {
                features: h.features.clone(),
                target: LabelDistribution::one_hot(h.label, 3)?,
                counts: None,
            })
        })
        .collect::<slmg::Result<_>>()?;

    let (aoc_loss, aoc_grads) = gradient(&params, &expansion_soft, LossKind::Cce)?;
    let (soft_loss, soft_grads) = gradient(&params, &items, LossKind::Cce)?;

    println!("mean loss over the 480-example expansion: {aoc_loss:.12}");
    println!("mean loss over the 12 soft items:         {soft_loss:.12}");

    let mut worst = 0.0f64;
    for (a, b) in aoc_grads.layers.iter().zip(&soft_grads.layers) {
        for (x, y) in a
            .weights
            .iter()
            .chain(&a.bias)
            .zip(b.weights.iter().chain(&b.bias))
        {
            worst = worst.max((x - y).abs());
        }
    }
    println!("largest elementwise gradient difference:  {worst:.2e}");
    println!();
    println!("with equal per-item response totals the two routes agree to");
    println!("summation-order rounding, so AOC+CCE and soft-CCE coincide on");
    println!("full batches (mini-batch SGD breaks the exact correspondence)");
    Ok(())
}
