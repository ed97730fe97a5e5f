use serde::{Deserialize, Serialize};

use super::model::{ClassifierModel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::synth::GestureClass;

pub type Confusion = [[u64; NUM_CLASSES]; NUM_CLASSES];

/// Confusion counts (rows = true class, columns = predicted) and the
/// accuracies derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub normalized: [[f64; NUM_CLASSES]; NUM_CLASSES],
    pub per_class_accuracy: [f64; NUM_CLASSES],
    /// Macro average over classes present in the test set.
    pub mean_accuracy: f64,
    pub seeds: Vec<u64>,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion, seeds: Vec<u64>) -> Self {
        let mut normalized = [[0.0; NUM_CLASSES]; NUM_CLASSES];
        let mut per_class_accuracy = [0.0; NUM_CLASSES];
        let mut acc_sum = 0.0;
        let mut present = 0usize;
        for (t, row) in confusion.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                continue;
            }
            for (p, &n) in row.iter().enumerate() {
                normalized[t][p] = n as f64 / total as f64;
            }
            per_class_accuracy[t] = normalized[t][t];
            acc_sum += per_class_accuracy[t];
            present += 1;
        }
        EvalReport {
            confusion,
            normalized,
            per_class_accuracy,
            mean_accuracy: if present > 0 { acc_sum / present as f64 } else { 0.0 },
            seeds,
        }
    }

    pub fn row_sums(&self) -> [u64; NUM_CLASSES] {
        std::array::from_fn(|t| self.confusion[t].iter().sum())
    }

    /// Off-diagonal counts restricted to the given classes.
    pub fn off_diagonal_within(&self, classes: &[GestureClass]) -> u64 {
        let mut n = 0;
        for &t in classes {
            for &p in classes {
                if t != p {
                    n += self.confusion[t.index()][p.index()];
                }
            }
        }
        n
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Accumulates predictions into a confusion matrix.
pub fn confusion_from_predictions(
    truth: &[GestureClass],
    predicted: &[GestureClass],
) -> Confusion {
    let mut c = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (t, p) in truth.iter().zip(predicted) {
        c[t.index()][p.index()] += 1;
    }
    c
}

/// Evaluates the model on pre-extracted test windows.
pub fn evaluate(
    model: &ClassifierModel,
    windows: &[Vec<f64>],
    labels: &[GestureClass],
    seeds: Vec<u64>,
) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    if windows.len() != labels.len() {
        return Err(Error::dims(windows.len(), format!("{} labels", labels.len())));
    }
    let predicted = windows
        .iter()
        .map(|w| model.predict(w).map(|(c, _)| c))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_confusion(
        confusion_from_predictions(labels, &predicted),
        seeds,
    ))
}
