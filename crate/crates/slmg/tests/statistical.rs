//! Statistical invariants that hold across many seeds rather than for any
//! single one.

use slmg::crowd::budget_curve;
use slmg::synth::{generate_population, PopulationConfig};

/// More annotators give better soft-label estimates: mean KL at n=5 exceeds
/// mean KL at n=50 in at least 90% of seeds.
#[test]
fn budget_curve_is_statistically_monotone() {
    let seeds = 20u64;
    let mut monotone = 0;
    for seed in 0..seeds {
        let population = generate_population(&PopulationConfig {
            n_items: 40,
            n_annotators: 100,
            classes: 3,
            feature_dim: 4,
            ambiguity: 0.3,
            annotator_noise: 0.1,
            seed: 4000 + seed,
        })
        .unwrap();
        let curve = budget_curve(&population.annotations, 1, 50, 0.01, seed).unwrap();
        if curve.points[4].mean_kl > curve.points[49].mean_kl {
            monotone += 1;
        }
    }
    assert!(
        monotone as f64 >= 0.9 * seeds as f64,
        "KL(n=5) > KL(n=50) in only {monotone}/{seeds} seeds"
    );
}

/// Estimates from an annotator subsample equal estimates from manually
/// filtered records, across several seeds and subsample sizes.
#[test]
fn subsample_estimation_oracle_equivalence() {
    use std::collections::HashSet;

    for seed in 0..5u64 {
        let population = generate_population(&PopulationConfig {
            n_items: 15,
            n_annotators: 30,
            classes: 3,
            feature_dim: 4,
            ambiguity: 1.0,
            annotator_noise: 0.2,
            seed: 5000 + seed,
        })
        .unwrap();
        let set = &population.annotations;
        for n in [1usize, 7, 30] {
            let sub = slmg::crowd::subsample_annotators(set, n, seed).unwrap();
            let kept: HashSet<&str> = sub.annotators().iter().map(|s| s.as_str()).collect();
            let manual: Vec<_> = set
                .records()
                .iter()
                .filter(|r| kept.contains(r.annotator_id.as_str()))
                .cloned()
                .collect();
            let manual_set =
                slmg::crowd::AnnotationSet::from_records(set.k(), manual).unwrap();
            assert_eq!(
                slmg::crowd::estimate_soft_labels(&sub, 0.25).unwrap(),
                slmg::crowd::estimate_soft_labels(&manual_set, 0.25).unwrap()
            );
        }
    }
}
