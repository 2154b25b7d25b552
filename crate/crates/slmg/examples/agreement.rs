//! Fleiss' kappa: chance-corrected agreement between many annotators.
//!
//! Run with: cargo run -p slmg --example agreement

use slmg::crowd::{fleiss_kappa, AnnotationRecord, AnnotationSet};
use slmg::label_core::ClassLabel;
use slmg::synth::{generate_population, PopulationConfig};

fn tiny_set(ratings: &[(&str, &[usize])]) -> AnnotationSet {
    let mut records = Vec::new();
    for (item, labels) in ratings {
        for (rater, &label) in labels.iter().enumerate() {
            records.push(AnnotationRecord {
                item_id: item.to_string(),
                annotator_id: format!("r{rater}"),
                label: ClassLabel(label),
            });
        }
    }
    AnnotationSet::from_records(2, records).unwrap()
}

fn main() -> slmg::Result<()> {
    // Perfect agreement: kappa = 1.
    let unanimous = tiny_set(&[("a", &[0, 0, 0]), ("b", &[1, 1, 1])]);
    println!("unanimous raters: kappa = {}", fleiss_kappa(&unanimous)?.kappa);

    // Two raters, two items, one disagreement: kappa = -1/3 by hand.
    let mixed = tiny_set(&[("a", &[0, 0]), ("b", &[0, 1])]);
    println!("hand-checkable case: kappa = {:.4}", fleiss_kappa(&mixed)?.kappa);

    // On simulated crowds, kappa tracks the annotator noise level.
    println!("\nsimulated 60-item, 3-class populations, 30 annotators:");
    println!("noise  kappa");
    for noise in [0.0, 0.2, 0.5, 1.0] {
        let population = generate_population(&PopulationConfig {
            n_items: 60,
            n_annotators: 30,
            classes: 3,
            feature_dim: 4,
            ambiguity: 0.3,
            annotator_noise: noise,
            seed: 17,
        })?;
        let report = fleiss_kappa(&population.annotations)?;
        println!("{noise:<5}  {:+.3}", report.kappa);
    }
    println!("(independently drawn labels at noise 1.0 push kappa toward 0)");
    Ok(())
}
