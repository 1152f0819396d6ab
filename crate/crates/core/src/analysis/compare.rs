use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::fidelity::FidelityReport;
use crate::error::{Error, Result};
use crate::tree::DecisionTree;

/// Depths 0, 1 and 2 count as the top of a tree.
const TOP_LEVELS: usize = 3;

/// A feature is flagged when its presence rate among poor models exceeds the
/// rate among good models by at least this much.
const FLAG_MARGIN: f64 = 0.75;

#[derive(Clone, Debug)]
pub struct ModelEntry {
    pub tag: String,
    pub tree: DecisionTree,
    pub fidelity: Option<FidelityReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub tag: String,
    /// Features split on in the top three levels, in pre-order of first use.
    pub top_features: Vec<String>,
    pub relative: Option<f64>,
    pub absolute: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRange {
    pub feature: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedFeature {
    pub feature: String,
    pub poor_with: usize,
    pub poor: usize,
    pub good_with: usize,
    pub good: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Top-level features common to every tree.
    pub shared: Vec<String>,
    /// Top-level features used by some trees but not all.
    pub distinct: Vec<String>,
    /// Thresholds at the top levels for each shared feature.
    pub thresholds: Vec<ThresholdRange>,
    /// Features whose presence anywhere in a tree tracks poor model scores.
    pub flagged: Vec<FlaggedFeature>,
}

fn top_splits(tree: &DecisionTree) -> impl Iterator<Item = (usize, f64)> + '_ {
    tree.splits()
        .filter(move |s| tree.depth(s.0) < TOP_LEVELS)
        .map(|(_, f, t)| (f, t))
}

/// Score used to rank models: the absolute metric when present, else the
/// relative one, oriented so that higher is better.
fn score(r: &FidelityReport) -> f64 {
    let (v, metric) = match r.absolute {
        Some(a) => (a, r.absolute_metric),
        None => (r.relative, r.relative_metric),
    };
    if metric.higher_is_better() {
        v
    } else {
        -v
    }
}

pub fn compare_models(entries: &[ModelEntry]) -> Result<Comparison> {
    if entries.len() < 2 {
        return Err(Error::domain("comparison needs at least two models"));
    }
    let names = entries[0].tree.feature_names();
    if entries.iter().any(|e| e.tree.feature_names() != names) {
        return Err(Error::domain("trees do not share a feature space"));
    }
    let rows = entries
        .iter()
        .map(|e| {
            let mut seen = Vec::new();
            for (f, _) in top_splits(&e.tree) {
                if !seen.contains(&f) {
                    seen.push(f);
                }
            }
            ComparisonRow {
                tag: e.tag.clone(),
                top_features: seen.iter().map(|&f| names[f].clone()).collect(),
                relative: e.fidelity.as_ref().map(|r| r.relative),
                absolute: e.fidelity.as_ref().and_then(|r| r.absolute),
            }
        })
        .collect();

    let sets: Vec<BTreeSet<usize>> = entries.iter().map(|e| top_splits(&e.tree).map(|s| s.0).collect()).collect();
    let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();
    let shared: BTreeSet<usize> = union.iter().copied().filter(|f| sets.iter().all(|s| s.contains(f))).collect();
    let thresholds = shared
        .iter()
        .map(|&f| {
            let ts: Vec<f64> = entries
                .iter()
                .flat_map(|e| top_splits(&e.tree).filter(|s| s.0 == f).map(|s| s.1).collect::<Vec<_>>())
                .collect();
            ThresholdRange {
                feature: names[f].clone(),
                min: ts.iter().copied().fold(f64::INFINITY, f64::min),
                max: ts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();

    Ok(Comparison {
        rows,
        shared: shared.iter().map(|&f| names[f].clone()).collect(),
        distinct: union.difference(&shared).map(|&f| names[f].clone()).collect(),
        thresholds,
        flagged: flag(entries),
    })
}

/// Models scoring strictly below the median are poor, the rest good.
fn flag(entries: &[ModelEntry]) -> Vec<FlaggedFeature> {
    let Some(scores) = entries.iter().map(|e| e.fidelity.as_ref().map(score)).collect::<Option<Vec<f64>>>() else {
        return Vec::new();
    };
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    let poor: Vec<bool> = scores.iter().map(|&s| s < median).collect();
    let n_poor = poor.iter().filter(|&&p| p).count();
    let n_good = m - n_poor;
    if n_poor == 0 || n_good == 0 {
        return Vec::new();
    }
    let names = entries[0].tree.feature_names();
    (0..names.len())
        .filter_map(|f| {
            let uses: Vec<bool> = entries.iter().map(|e| e.tree.splits().any(|s| s.1 == f)).collect();
            let poor_with = uses.iter().zip(&poor).filter(|(u, p)| **u && **p).count();
            let good_with = uses.iter().zip(&poor).filter(|(u, p)| **u && !**p).count();
            let gap = poor_with as f64 / n_poor as f64 - good_with as f64 / n_good as f64;
            (gap >= FLAG_MARGIN).then(|| FlaggedFeature {
                feature: names[f].clone(),
                poor_with,
                poor: n_poor,
                good_with,
                good: n_good,
            })
        })
        .collect()
}

impl Comparison {
    pub fn render(&self) -> String {
        let mut s = String::from("model  relative  absolute  top features\n");
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for r in &self.rows {
            s += &format!(
                "{}  {:>8}  {:>8}  {}\n",
                r.tag,
                fmt(r.relative),
                fmt(r.absolute),
                r.top_features.join(", ")
            );
        }
        s += &format!("shared: {}\n", self.shared.join(", "));
        s += &format!("distinct: {}\n", self.distinct.join(", "));
        for t in &self.thresholds {
            s += &format!("threshold range {}: [{:.4}, {:.4}]\n", t.feature, t.min, t.max);
        }
        for f in &self.flagged {
            s += &format!(
                "flagged {}: in {}/{} poor and {}/{} good models\n",
                f.feature, f.poor_with, f.poor, f.good_with, f.good
            );
        }
        s
    }
}
