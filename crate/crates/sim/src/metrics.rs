use semap_core::{CellLabel, LabelMap};

use crate::env::Environment;

/// Per object class `k = 1..=K`: among explored cells labelled `k`, the
/// share whose true class is `k`. `None` when no cell is labelled `k`.
pub fn class_precision(labels: &LabelMap, env: &Environment) -> Vec<Option<f64>> {
    let k = env.num_classes;
    let mut predicted = vec![0usize; k + 1];
    let mut correct = vec![0usize; k + 1];
    for (cell, label) in labels.labels.iter().enumerate() {
        if let CellLabel::Class(c) = *label {
            if c > 0 {
                predicted[c] += 1;
                if env.class_of(cell) == c {
                    correct[c] += 1;
                }
            }
        }
    }
    (1..=k)
        .map(|c| (predicted[c] > 0).then(|| correct[c] as f64 / predicted[c] as f64))
        .collect()
}
