//! Label distributions and their information measures: entropy, KL
//! divergence, and binary collapse.
//!
//! Run with: cargo run -p slmg --example soft_labels

use slmg::label_core::{ClassLabel, LabelDistribution};

fn main() -> slmg::Result<()> {
    // Two items that share a gold label but differ sharply in how certain
    // a crowd of annotators was about it.
    let confident = LabelDistribution::new(vec![0.005, 0.839, 0.156])?;
    let ambiguous = LabelDistribution::new(vec![0.045045, 0.542542, 0.412413])?;

    println!("confident item: {:?}", confident.probs());
    println!("  entropy = {:.3} nats", confident.entropy());
    println!("ambiguous item: {:?}", ambiguous.probs());
    println!("  entropy = {:.3} nats", ambiguous.entropy());
    println!();

    // Entropy is 0 for a one-hot target and ln(K) for a uniform one.
    let one_hot = LabelDistribution::one_hot(ClassLabel(1), 3)?;
    let uniform = LabelDistribution::uniform(3)?;
    println!("one-hot entropy = {}", one_hot.entropy());
    println!("uniform entropy = {:.4} (ln 3 = {:.4})", uniform.entropy(), 3f64.ln());
    println!();

    // KL divergence measures how far an estimate sits from a reference.
    println!(
        "D(confident || uniform) = {:.3} nats",
        confident.kl_divergence(&uniform)?
    );
    println!(
        "D(confident || confident) = {}",
        confident.kl_divergence(&confident)?
    );
    // ... and is undefined when the estimate has a hole the reference needs.
    let hole = LabelDistribution::new(vec![0.0, 0.5, 0.5])?;
    println!(
        "D(confident || zero-support) -> {}",
        confident.kl_divergence(&hole).unwrap_err()
    );
    println!();

    // Collapsing to positive-vs-rest keeps the positive mass and pools the
    // remainder.
    let binary = confident.collapse_to_binary(ClassLabel(1))?;
    println!(
        "collapse to class 1 vs rest: {:?} (argmax {})",
        binary.probs(),
        confident.argmax()
    );

    // Construction validates instead of renormalizing: smoothing has to be
    // explicit.
    match LabelDistribution::new(vec![0.5, 0.6, 0.1]) {
        Err(e) => println!("rejected invalid vector: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
