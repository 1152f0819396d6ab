use crate::error::{Error, Result};
use crate::label::Labels;

/// Gini impurity 1 − Σ p² from class counts.
pub fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let mut sq = 0.0;
    for &c in counts {
        let p = c as f64 / n;
        sq += p * p;
    }
    1.0 - sq
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

pub fn class_counts(classes: &[usize], slots: usize) -> Vec<usize> {
    let mut counts = vec![0usize; slots];
    for &c in classes {
        counts[c] += 1;
    }
    counts
}

/// Gini impurity for class labels, variance for real labels.
pub fn impurity(labels: &Labels) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::domain("impurity of an empty label set"));
    }
    Ok(match labels {
        Labels::Classes(c) => gini(&class_counts(c, labels.class_count()), c.len()),
        Labels::Values(v) => variance(v),
    })
}

/// Majority class, lowest index on ties.
pub fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}
