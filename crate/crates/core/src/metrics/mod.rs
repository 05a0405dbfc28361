//! Confusion matrices and per-class precision, recall, F1 and accuracy.

mod report;

pub use report::{parse_json_report, render_text, report, ClassMetrics, ModelReport, ReportFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square tally of `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::invalid("confusion matrix needs at least one class"));
        }
        let k = class_names.len();
        Ok(Self {
            class_names,
            counts: vec![vec![0; k]; k],
        })
    }

    pub fn from_counts(class_names: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = class_names.len();
        if k == 0 || counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::dim(format!(
                "confusion counts must be {k}×{k} to match the class names"
            )));
        }
        Ok(Self { class_names, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let k = self.num_classes();
        for label in [truth, predicted] {
            if label >= k {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    /// Elementwise sum with a matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.class_names != other.class_names {
            return Err(Error::dim("cannot merge confusion matrices over different classes"));
        }
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        Ok(())
    }
}

/// Tally `(truth, predicted)` pairs over `k` classes named `class_0..`.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    let names = (0..k).map(|i| format!("class_{i}")).collect();
    confusion_matrix_named(truth, predicted, names)
}

pub fn confusion_matrix_named(
    truth: &[usize],
    predicted: &[usize],
    class_names: Vec<String>,
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::dim(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(class_names)?;
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

/// Precision and recall of one class. A zero denominator yields 0 and sets
/// the matching flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

pub fn precision_recall(cm: &ConfusionMatrix, class: usize) -> Result<PrecisionRecall> {
    let k = cm.num_classes();
    if class >= k {
        return Err(Error::LabelOutOfRange { label: class, classes: k });
    }
    let tp = cm.counts[class][class];
    let predicted: u64 = (0..k).map(|t| cm.counts[t][class]).sum();
    let actual: u64 = cm.counts[class].iter().sum();
    let ratio = |den: u64| if den == 0 { 0.0 } else { tp as f64 / den as f64 };
    Ok(PrecisionRecall {
        precision: ratio(predicted),
        recall: ratio(actual),
        precision_undefined: predicted == 0,
        recall_undefined: actual == 0,
    })
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    let sum = precision + recall;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / sum
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::invalid("accuracy of an empty confusion matrix")),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary(counts: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            vec!["Alert".into(), "Drowsy".into()],
            counts.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_and_all_wrong() {
        let t = [0, 1, 1, 0, 1];
        let cm = confusion_matrix(&t, &t, 2).unwrap();
        assert_eq!(cm.counts(), &[vec![2, 0], vec![0, 3]]);
        let wrong: Vec<usize> = t.iter().map(|x| 1 - x).collect();
        let cm = confusion_matrix(&t, &wrong, 2).unwrap();
        assert_eq!(cm.counts(), &[vec![0, 2], vec![3, 0]]);
    }

    #[test]
    fn hand_tally() {
        let truth = [0, 0, 1, 1, 1, 0];
        let pred = [0, 1, 1, 0, 1, 0];
        let cm = confusion_matrix(&truth, &pred, 2).unwrap();
        assert_eq!(cm.counts(), &[vec![2, 1], vec![1, 2]]);
        assert_eq!(cm.total(), 6);
        assert!((accuracy(&cm).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(confusion_matrix(&[0], &[0, 1], 2), Err(Error::Dimension(_))));
        assert!(matches!(
            confusion_matrix(&[2], &[0], 2),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn diagonal_is_perfect() {
        let cm = binary([[5, 0], [0, 7]]);
        for c in 0..2 {
            let pr = precision_recall(&cm, c).unwrap();
            assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
        }
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn never_predicted_class_is_flagged() {
        let cm = binary([[5, 0], [3, 0]]);
        let pr = precision_recall(&cm, 1).unwrap();
        assert_eq!((pr.precision, pr.recall), (0.0, 0.0));
        assert!(pr.precision_undefined && !pr.recall_undefined);

        let cm = binary([[5, 0], [0, 0]]);
        let pr = precision_recall(&cm, 1).unwrap();
        assert!(pr.precision_undefined && pr.recall_undefined);
        assert_eq!(f1(pr.precision, pr.recall), 0.0);
    }

    #[test]
    fn worked_drowsy_example() {
        let cm = binary([[90, 10], [5, 45]]);
        let pr = precision_recall(&cm, 1).unwrap();
        assert!((pr.precision - 45.0 / 55.0).abs() < 1e-15);
        assert!((pr.recall - 0.9).abs() < 1e-15);
    }

    #[test]
    fn f1_values() {
        assert!((f1(0.969, 0.875) - 0.9196).abs() < 5e-5);
        assert!((f1(0.97, 0.903) - 0.9353).abs() < 5e-5);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&binary([[50, 50], [50, 50]])).unwrap(), 0.5);
        assert!(accuracy(&binary([[0, 0], [0, 0]])).is_err());
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = binary([[1, 2], [3, 4]]);
        a.merge(&binary([[10, 20], [30, 40]])).unwrap();
        assert_eq!(a.counts(), &[vec![11, 22], vec![33, 44]]);
        let other = ConfusionMatrix::new(vec!["x".into(), "y".into()]).unwrap();
        assert!(a.merge(&other).is_err());
    }

    proptest! {
        #[test]
        fn recall_is_one_minus_miss_rate(a in 0u64..500, b in 0u64..500, c in 0u64..500, d in 0u64..500) {
            let cm = binary([[a, b], [c, d]]);
            for (class, row) in [(0, [a, b]), (1, [c, d])] {
                let n = row[0] + row[1];
                prop_assume!(n > 0);
                let miss = row[1 - class] as f64 / n as f64;
                let r = precision_recall(&cm, class).unwrap().recall;
                prop_assert!((r - (1.0 - miss)).abs() < 1e-12);
            }
        }

        #[test]
        fn f1_symmetric_and_bounded(p in 1e-6f64..=1.0, r in 1e-6f64..=1.0) {
            let v = f1(p, r);
            prop_assert_eq!(v, f1(r, p));
            prop_assert!(v >= p.min(r) - 1e-12);
            prop_assert!(v <= (p * r).sqrt() + 1e-12);
        }

        #[test]
        fn scale_invariance(a in 0u64..200, b in 0u64..200, c in 0u64..200, d in 1u64..200, s in 1u64..50) {
            let base = binary([[a, b], [c, d]]);
            let scaled = binary([[a * s, b * s], [c * s, d * s]]);
            prop_assert!((accuracy(&base).unwrap() - accuracy(&scaled).unwrap()).abs() < 1e-12);
            for class in 0..2 {
                let x = precision_recall(&base, class).unwrap();
                let y = precision_recall(&scaled, class).unwrap();
                prop_assert!((x.precision - y.precision).abs() < 1e-12);
                prop_assert!((x.recall - y.recall).abs() < 1e-12);
                prop_assert_eq!(x.precision_undefined, y.precision_undefined);
            }
        }
    }
}
