//! Confusion-matrix metrics: accuracy and true-class-weighted
//! precision, recall and F1, reported as percentages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if counts.iter().any(|r| r.len() != c) {
            return Err(Error::invalid("confusion matrix must be square"));
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    /// Number of samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape {
            op: "confusion",
            left: (y_true.len(), 1),
            right: (y_pred.len(), 1),
        });
    }
    let mut cm = ConfusionMatrix::zeros(num_classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for l in [t, p] {
            if l >= num_classes {
                return Err(Error::LabelOutOfRange { label: l, num_classes });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

fn nonempty(cm: &ConfusionMatrix) -> Result<u64> {
    match cm.total() {
        0 => Err(Error::Empty("confusion matrix")),
        n => Ok(n),
    }
}

/// `100 · trace / total`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let n = nonempty(cm)?;
    Ok(100.0 * cm.trace() as f64 / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// Fractions in [0, 1].
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when the term had a zero denominator and was taken as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPrf {
    /// Percentages.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

pub fn per_class(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.num_classes())
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let predicted = cm.predicted(c);
            let support = cm.support(c);
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp / support as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                precision_undefined: predicted == 0,
                recall_undefined: support == 0,
            }
        })
        .collect()
}

/// Per-class metrics averaged with weights `N_c / N` taken from the true
/// labels of the evaluated set.
pub fn weighted_prf(cm: &ConfusionMatrix) -> Result<WeightedPrf> {
    let n = nonempty(cm)? as f64;
    let per_class = per_class(cm);
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for m in &per_class {
        let w = m.support as f64 / n;
        p += w * m.precision;
        r += w * m.recall;
        f += w * m.f1;
    }
    Ok(WeightedPrf {
        precision: 100.0 * p,
        recall: 100.0 * r,
        f1: 100.0 * f,
        per_class,
    })
}

/// Rounds half away from zero at two decimals. A relative slack of a few
/// ulps keeps values such as 72.745 (stored as 72.74499…) rounding up.
pub fn round2(x: f64) -> f64 {
    let s = x * 100.0;
    let slack = s.abs() * 4.0 * f64::EPSILON;
    (s.abs() + 0.5 + slack).floor().copysign(s) / 100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// One evaluated algorithm. Headline metrics are percentages rounded to two
/// decimals; per-class metrics are percentages rounded likewise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: String,
    pub accuracy: f64,
    pub precision_w: f64,
    pub recall_w: f64,
    pub f1_w: f64,
    pub per_class: Vec<ClassReport>,
    pub confusion: ConfusionMatrix,
    /// Zero-denominator terms that were taken as 0.
    pub flags: Vec<String>,
}

impl EvalReport {
    pub fn new(algorithm: &str, cm: ConfusionMatrix, class_names: &[&str]) -> Result<Self> {
        if class_names.len() != cm.num_classes() {
            return Err(Error::invalid("one class name per confusion-matrix row"));
        }
        let acc = accuracy(&cm)?;
        let w = weighted_prf(&cm)?;
        let mut flags = Vec::new();
        for (m, name) in w.per_class.iter().zip(class_names) {
            if m.precision_undefined {
                flags.push(format!("{name}: no predictions, precision taken as 0"));
            }
            if m.recall_undefined {
                flags.push(format!("{name}: no true samples, recall taken as 0"));
            }
        }
        Ok(Self {
            algorithm: algorithm.to_string(),
            accuracy: round2(acc),
            precision_w: round2(w.precision),
            recall_w: round2(w.recall),
            f1_w: round2(w.f1),
            per_class: w
                .per_class
                .iter()
                .zip(class_names)
                .map(|(m, name)| ClassReport {
                    class: (*name).to_string(),
                    precision: round2(100.0 * m.precision),
                    recall: round2(100.0 * m.recall),
                    f1: round2(100.0 * m.f1),
                    support: m.support,
                })
                .collect(),
            confusion: cm,
            flags,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Aligned text table with one row per report:
/// `Algorithm | Acc | Pre_w | Recall_w | F1_w`.
pub fn format_table(reports: &[EvalReport]) -> String {
    let header = ["Algorithm", "Acc", "Pre_w", "Recall_w", "F1_w"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.algorithm.clone(),
                format!("{:.2}", r.accuracy),
                format!("{:.2}", r.precision_w),
                format!("{:.2}", r.recall_w),
                format!("{:.2}", r.f1_w),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<width$}", width = widths[i])
                } else {
                    format!("{c:>width$}", width = widths[i])
                }
            })
            .collect();
        parts.join(" | ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn confusion_counts() {
        assert_eq!(
            confusion(&[0, 0, 1, 1], &[0, 0, 0, 1], 2).unwrap(),
            cm(&[&[2, 0], &[1, 1]])
        );
        assert_eq!(confusion(&[], &[], 3).unwrap(), ConfusionMatrix::zeros(3));
        assert_eq!(confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap().trace(), 3);
        assert!(confusion(&[0, 3], &[0, 1], 3).is_err());
        assert!(confusion(&[0], &[0, 1], 3).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&cm(&[&[3, 0], &[0, 5]])).unwrap(), 100.0);
        assert_eq!(accuracy(&cm(&[&[2, 0], &[1, 1]])).unwrap(), 75.0);
        assert_eq!(accuracy(&cm(&[&[1, 1], &[1, 1]])).unwrap(), 50.0);
        assert!(accuracy(&ConfusionMatrix::zeros(2)).is_err());
    }

    #[test]
    fn weighted_example() {
        let w = weighted_prf(&cm(&[&[2, 0], &[1, 1]])).unwrap();
        assert!((w.precision - 250.0 / 3.0).abs() < 1e-12);
        assert!((w.recall - 75.0).abs() < 1e-12);
        assert!((w.f1 - 220.0 / 3.0).abs() < 1e-12);
        let r = EvalReport::new("toy", cm(&[&[2, 0], &[1, 1]]), &["a", "b"]).unwrap();
        assert_eq!(
            (r.accuracy, r.precision_w, r.recall_w, r.f1_w),
            (75.0, 83.33, 75.0, 73.33)
        );
    }

    #[test]
    fn absent_class_has_zero_weight_and_is_flagged() {
        let r = EvalReport::new("x", cm(&[&[3, 1, 0], &[0, 0, 0], &[0, 0, 2]]), &["a", "b", "c"]).unwrap();
        assert_eq!(r.recall_w, r.accuracy);
        assert!(r.flags.iter().any(|f| f.starts_with("b: no true samples")));
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(round2(72.745), 72.75);
        assert_eq!(round2(79.4), 79.4);
        assert_eq!(round2(1.005), 1.01);
        assert_eq!(round2(83.3333), 83.33);
        assert_eq!(round2(0.0), 0.0);
    }

    #[test]
    fn table_layout() {
        let r = EvalReport::new("Original imbalanced", cm(&[&[2, 0], &[1, 1]]), &["a", "b"]).unwrap();
        let t = format_table(&[r]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Algorithm           |   Acc | Pre_w | Recall_w |  F1_w");
        assert_eq!(lines[2], "Original imbalanced | 75.00 | 83.33 |    75.00 | 73.33");
    }
}
