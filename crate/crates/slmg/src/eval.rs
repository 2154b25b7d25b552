//! Evaluation: accuracy, confusion matrices, binary collapse, and
//! calibration against reference distributions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{HardExample, SoftExample};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::label_core::ClassLabel;
use crate::model::{forward, ClassifierParams};

/// Evaluation outputs. The confusion matrix has gold labels down the rows
/// and predicted labels across the columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_kl_to_reference: Option<f64>,
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        text.push('\n');
        jsonl::write_string(path, &text)
    }

    /// CSV companion: header `gold,pred_0..pred_{K-1}`, one row per gold
    /// class.
    pub fn confusion_csv(&self) -> String {
        let k = self.confusion.len();
        let mut out = String::from("gold");
        for j in 0..k {
            out.push_str(&format!(",pred_{j}"));
        }
        out.push('\n');
        for (gold, row) in self.confusion.iter().enumerate() {
            out.push_str(&gold.to_string());
            for &count in row {
                out.push_str(&format!(",{count}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_confusion_csv(&self, path: &Path) -> Result<()> {
        jsonl::write_string(path, &self.confusion_csv())
    }
}

/// Predict every test item (argmax of the forward pass, ties toward the
/// lowest class) and tabulate accuracy and the confusion matrix.
pub fn evaluate(params: &ClassifierParams, test: &[HardExample]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyData);
    }
    let k = params.classes;
    let mut confusion = vec![vec![0u64; k]; k];
    for example in test {
        if example.label.index() >= k {
            return Err(Error::ClassOutOfRange {
                class: example.label.index(),
                classes: k,
            });
        }
        let predicted = forward(params, &example.features)?.argmax();
        confusion[example.label.index()][predicted.index()] += 1;
    }
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    Ok(EvalReport {
        n: test.len(),
        accuracy: correct as f64 / test.len() as f64,
        confusion,
        binary_accuracy: None,
        mean_kl_to_reference: None,
    })
}

/// Accuracy after merging every non-positive class into one "negative"
/// class: (TP + TN) / n over the collapsed 2x2 table.
pub fn binary_collapse_accuracy(confusion: &[Vec<u64>], positive: ClassLabel) -> Result<f64> {
    let k = confusion.len();
    if k == 0 || confusion.iter().any(|row| row.len() != k) {
        return Err(Error::BadConfig("confusion matrix must be square".into()));
    }
    let p = positive.index();
    if p >= k {
        return Err(Error::ClassOutOfRange {
            class: p,
            classes: k,
        });
    }
    let mut total = 0u64;
    let mut correct = 0u64;
    for (i, row) in confusion.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            total += count;
            if (i == p) == (j == p) {
                correct += count;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptyData);
    }
    Ok(correct as f64 / total as f64)
}

/// Mean over items of D(reference ‖ model output). This direction lets
/// zero-probability reference classes contribute nothing, while softmax
/// outputs keep the denominator positive.
pub fn mean_kl_to_reference(params: &ClassifierParams, items: &[SoftExample]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut total = 0.0;
    for item in items {
        let predicted = forward(params, &item.features)?;
        total += item.target.kl_divergence(&predicted)?;
    }
    Ok(total / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureVector;
    use crate::label_core::LabelDistribution;
    use crate::model::{Architecture, Layer};

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new(values.to_vec()).unwrap()
    }

    /// Linear model whose weights are `scale` times the identity: a one-hot
    /// input at position j yields prediction j.
    fn picker_params(k: usize, scale: f64) -> ClassifierParams {
        let mut weights = vec![0.0; k * k];
        for i in 0..k {
            weights[i * k + i] = scale;
        }
        ClassifierParams {
            arch: Architecture::Linear,
            input_dim: k,
            classes: k,
            layers: vec![Layer {
                in_dim: k,
                out_dim: k,
                weights,
                bias: vec![0.0; k],
            }],
        }
    }

    fn one_hot_input(k: usize, j: usize) -> FeatureVector {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        fv(&v)
    }

    #[test]
    fn perfect_predictions_give_diagonal_confusion() {
        let params = picker_params(3, 5.0);
        let test: Vec<HardExample> = (0..3)
            .flat_map(|j| {
                (0..=j).map(move |_| HardExample {
                    features: one_hot_input(3, j),
                    label: ClassLabel(j),
                })
            })
            .collect();
        let report = evaluate(&params, &test).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.n, 6);
        assert_eq!(
            report.confusion,
            vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 3]]
        );
    }

    #[test]
    fn uniform_outputs_predict_class_zero_by_tie_rule() {
        let params = picker_params(3, 0.0);
        let test = vec![
            HardExample {
                features: one_hot_input(3, 1),
                label: ClassLabel(1),
            },
            HardExample {
                features: one_hot_input(3, 2),
                label: ClassLabel(2),
            },
        ];
        let report = evaluate(&params, &test).unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(
            report.confusion,
            vec![vec![0, 0, 0], vec![1, 0, 0], vec![1, 0, 0]]
        );
    }

    #[test]
    fn confusion_matches_manual_count_on_known_logits() {
        let params = picker_params(3, 10.0);
        // Inputs pick classes (0, 0, 1, 2); golds are (0, 1, 1, 0).
        let test = vec![
            HardExample { features: one_hot_input(3, 0), label: ClassLabel(0) },
            HardExample { features: one_hot_input(3, 0), label: ClassLabel(1) },
            HardExample { features: one_hot_input(3, 1), label: ClassLabel(1) },
            HardExample { features: one_hot_input(3, 2), label: ClassLabel(0) },
        ];
        let report = evaluate(&params, &test).unwrap();
        // Manual recount: gold 0 -> pred 0 once, pred 2 once; gold 1 ->
        // pred 0 once, pred 1 once.
        assert_eq!(
            report.confusion,
            vec![vec![1, 0, 1], vec![1, 1, 0], vec![0, 0, 0]]
        );
        assert_eq!(report.accuracy, 0.5);
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let params = picker_params(3, 10.0);
        let mut test = vec![
            HardExample { features: one_hot_input(3, 0), label: ClassLabel(0) },
            HardExample { features: one_hot_input(3, 1), label: ClassLabel(2) },
            HardExample { features: one_hot_input(3, 2), label: ClassLabel(2) },
        ];
        let a = evaluate(&params, &test).unwrap();
        test.reverse();
        let b = evaluate(&params, &test).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn confusion_rows_and_columns_conserve_counts() {
        let params = picker_params(3, 10.0);
        let test: Vec<HardExample> = (0..30)
            .map(|i| HardExample {
                features: one_hot_input(3, (i * 7) % 3),
                label: ClassLabel(i % 3),
            })
            .collect();
        let report = evaluate(&params, &test).unwrap();
        let mut gold_counts = vec![0u64; 3];
        let mut pred_counts = vec![0u64; 3];
        for e in &test {
            gold_counts[e.label.index()] += 1;
            let p = forward(&params, &e.features).unwrap().argmax();
            pred_counts[p.index()] += 1;
        }
        for i in 0..3 {
            assert_eq!(report.confusion[i].iter().sum::<u64>(), gold_counts[i]);
            let col: u64 = (0..3).map(|g| report.confusion[g][i]).sum();
            assert_eq!(col, pred_counts[i]);
        }
    }

    #[test]
    fn binary_collapse_on_published_counts() {
        let baseline = vec![
            vec![2739u64, 191, 438],
            vec![333, 2360, 544],
            vec![441, 332, 2446],
        ];
        let acc = binary_collapse_accuracy(&baseline, ClassLabel(0)).unwrap();
        // Hand arithmetic: TP 2739, TN 2360+544+332+2446 = 5682, n = 9824.
        assert_eq!(acc, 8421.0 / 9824.0);
        assert!((acc - 0.8572).abs() < 5e-5);
    }

    #[test]
    fn binary_collapse_of_diagonal_is_one() {
        let diag = vec![vec![5u64, 0, 0], vec![0, 7, 0], vec![0, 0, 2]];
        assert_eq!(binary_collapse_accuracy(&diag, ClassLabel(1)).unwrap(), 1.0);
    }

    #[test]
    fn binary_collapse_validates_inputs() {
        let m = vec![vec![1u64, 2], vec![3, 4]];
        assert!(matches!(
            binary_collapse_accuracy(&m, ClassLabel(5)),
            Err(Error::ClassOutOfRange { .. })
        ));
        let ragged = vec![vec![1u64, 2], vec![3]];
        assert!(matches!(
            binary_collapse_accuracy(&ragged, ClassLabel(0)),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn kl_to_reference_zero_when_model_matches() {
        let params = picker_params(3, 2.0);
        let x = one_hot_input(3, 1);
        let reference = forward(&params, &x).unwrap();
        let items = vec![SoftExample {
            features: x,
            target: reference,
            counts: None,
        }];
        assert_eq!(mean_kl_to_reference(&params, &items).unwrap(), 0.0);
    }

    #[test]
    fn kl_to_reference_uniform_model_vs_one_hot() {
        let params = picker_params(3, 0.0);
        let items: Vec<SoftExample> = (0..3)
            .map(|j| SoftExample {
                features: one_hot_input(3, j),
                target: LabelDistribution::one_hot(ClassLabel(j), 3).unwrap(),
                counts: None,
            })
            .collect();
        let kl = mean_kl_to_reference(&params, &items).unwrap();
        assert!((kl - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_to_reference_matches_per_item_recomputation() {
        let params = picker_params(3, 1.5);
        let items = vec![
            SoftExample {
                features: fv(&[0.2, 0.5, 0.1]),
                target: LabelDistribution::new(vec![0.3, 0.4, 0.3]).unwrap(),
                counts: None,
            },
            SoftExample {
                features: fv(&[0.9, 0.0, 0.4]),
                target: LabelDistribution::new(vec![0.8, 0.1, 0.1]).unwrap(),
                counts: None,
            },
        ];
        let mut expected = 0.0;
        for item in &items {
            let pred = forward(&params, &item.features).unwrap();
            expected += item.target.kl_divergence(&pred).unwrap();
        }
        expected /= 2.0;
        let got = mean_kl_to_reference(&params, &items).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn report_serialization_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let report = EvalReport {
            n: 4,
            accuracy: 0.75,
            confusion: vec![vec![2, 0], vec![1, 1]],
            binary_accuracy: Some(0.75),
            mean_kl_to_reference: None,
        };
        let path = dir.path().join("eval.json");
        report.write_json(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);

        let csv = report.confusion_csv();
        assert_eq!(csv, "gold,pred_0,pred_1\n0,2,0\n1,1,1\n");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn collapsing_never_lowers_accuracy(
                rows in proptest::collection::vec(
                    proptest::collection::vec(0u64..50, 3),
                    3,
                ),
                positive in 0usize..3,
            ) {
                let total: u64 = rows.iter().flatten().sum();
                prop_assume!(total > 0);
                let diag: u64 = (0..3).map(|i| rows[i][i]).sum();
                let accuracy = diag as f64 / total as f64;
                let collapsed =
                    binary_collapse_accuracy(&rows, ClassLabel(positive)).unwrap();
                prop_assert!(collapsed >= accuracy - 1e-15);
            }
        }
    }
}
