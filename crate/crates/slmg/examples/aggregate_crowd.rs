//! From raw annotation records to per-item soft labels.
//!
//! Run with: cargo run -p slmg --example aggregate_crowd

use slmg::crowd::{estimate_soft_labels, AnnotationRecord, AnnotationSet};
use slmg::label_core::ClassLabel;

fn records_for(item: &str, counts: &[u64]) -> Vec<AnnotationRecord> {
    let mut out = Vec::new();
    let mut annotator = 0;
    for (label, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            out.push(AnnotationRecord {
                item_id: item.to_string(),
                annotator_id: format!("worker{annotator:04}"),
                label: ClassLabel(label),
            });
            annotator += 1;
        }
    }
    out
}

fn main() -> slmg::Result<()> {
    // 1000 crowd responses per item, three classes.
    let mut records = records_for("pair-081", &[5, 839, 156]);
    records.extend(records_for("pair-132", &[45, 542, 413]));
    // A resubmission: the same worker answering the same item twice. The
    // last record wins.
    records.push(AnnotationRecord {
        item_id: "pair-081".into(),
        annotator_id: "worker0000".into(),
        label: ClassLabel(2),
    });

    let set = AnnotationSet::from_records(3, records)?;
    println!(
        "{} records over {} items from {} annotators ({} duplicate dropped)",
        set.records().len(),
        set.items().len(),
        set.annotators().len(),
        set.duplicates_dropped()
    );

    // Raw proportions: P(y) = N_y / N.
    let raw = estimate_soft_labels(&set, 0.0)?;
    for (item, dist) in &raw {
        println!(
            "{item}: {:?}  entropy {:.3}",
            dist.probs()
                .iter()
                .map(|p| (p * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            dist.entropy()
        );
    }

    // Additive smoothing pulls estimates toward uniform and guarantees
    // strictly positive probabilities, which keeps downstream KL finite.
    let smoothed = estimate_soft_labels(&set, 1.0)?;
    let item = "pair-081";
    println!(
        "\nalpha = 1 smoothing for {item}:\n  raw      {:?}\n  smoothed {:?}",
        raw[item].probs(),
        smoothed[item].probs()
    );
    Ok(())
}
