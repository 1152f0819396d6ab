//! Exhaustive axis-aligned split search.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::impurity::{class_counts, gini};
use crate::label::Labels;
use crate::par;
use crate::space::FeatureKind;

/// Label summary on one side of a split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SideSummary {
    Counts(Vec<usize>),
    Mean { n: usize, mean: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left: SideSummary,
    pub right: SideSummary,
}

/// Which splits are admissible.
#[derive(Clone, Debug)]
pub struct SplitRules<'a> {
    pub kinds: &'a [FeatureKind],
    /// Restrict the scan to these features (ascending); all when `None`.
    pub features: Option<&'a [usize]>,
    /// Candidates must have gain strictly greater than this.
    pub min_gain: f64,
}

/// Threshold between two consecutive distinct values, guaranteed to send `lo`
/// left and `hi` right.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    if m >= hi || !m.is_finite() {
        lo
    } else {
        m
    }
}

/// Best split of `rows` of `x`, or `None` if no candidate beats `min_gain`.
///
/// Scans every feature and every midpoint between consecutive distinct values.
/// Binary-indicator features are only split at 0.5. Ties keep the lowest
/// feature index, then the lowest threshold.
pub fn best_split_rows(x: ArrayView2<'_, f64>, y: &Labels, rows: &[usize], rules: &SplitRules<'_>) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let all: Vec<usize>;
    let features = match rules.features {
        Some(f) => f,
        None => {
            all = (0..x.ncols()).collect();
            &all
        }
    };
    let ctx = ScanContext::new(y, rows);
    if ctx.parent_impurity() == 0.0 {
        return None;
    }
    let per_feature = par::map_range(features.len(), |fi| {
        let f = features[fi];
        let binary = rules.kinds.get(f) == Some(&FeatureKind::BinaryIndicator);
        ctx.scan_feature(x, y, rows, f, binary)
    });
    let mut best: Option<SplitCandidate> = None;
    for cand in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| cand.gain > b.gain) {
            best = Some(cand);
        }
    }
    best.filter(|b| b.gain > rules.min_gain)
}

/// Split search over all rows.
pub fn best_split(x: ArrayView2<'_, f64>, y: &Labels, rules: &SplitRules<'_>) -> Option<SplitCandidate> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    best_split_rows(x, y, &rows, rules)
}

enum ScanContext {
    Classes {
        slots: usize,
        parent: Vec<usize>,
        parent_gini: f64,
    },
    Values {
        mean: f64,
        sum: f64,
        sumsq: f64,
        parent_var: f64,
    },
}

impl ScanContext {
    fn parent_impurity(&self) -> f64 {
        match self {
            ScanContext::Classes { parent_gini, .. } => *parent_gini,
            ScanContext::Values { parent_var, .. } => *parent_var,
        }
    }

    fn new(y: &Labels, rows: &[usize]) -> Self {
        match y {
            Labels::Classes(c) => {
                let slots = rows.iter().map(|&r| c[r]).max().map_or(0, |m| m + 1);
                let sub: Vec<usize> = rows.iter().map(|&r| c[r]).collect();
                let parent = class_counts(&sub, slots);
                let parent_gini = gini(&parent, rows.len());
                ScanContext::Classes {
                    slots,
                    parent,
                    parent_gini,
                }
            }
            Labels::Values(v) => {
                let n = rows.len() as f64;
                let mean = rows.iter().map(|&r| v[r]).sum::<f64>() / n;
                let (mut sum, mut sumsq) = (0.0, 0.0);
                for &r in rows {
                    let d = v[r] - mean;
                    sum += d;
                    sumsq += d * d;
                }
                let parent_var = (sumsq / n - (sum / n) * (sum / n)).max(0.0);
                ScanContext::Values {
                    mean,
                    sum,
                    sumsq,
                    parent_var,
                }
            }
        }
    }

    fn scan_feature(&self, x: ArrayView2<'_, f64>, y: &Labels, rows: &[usize], f: usize, binary: bool) -> Option<SplitCandidate> {
        let mut order: Vec<(f64, usize)> = rows.iter().map(|&r| (x[[r, f]], r)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = order.len();
        let mut best: Option<SplitCandidate> = None;
        match (self, y) {
            (
                ScanContext::Classes {
                    slots,
                    parent,
                    parent_gini,
                },
                Labels::Classes(c),
            ) => {
                let mut left = vec![0usize; *slots];
                let mut right = vec![0usize; *slots];
                for pos in 0..n - 1 {
                    left[c[order[pos].1]] += 1;
                    let (lo, hi) = (order[pos].0, order[pos + 1].0);
                    let boundary = if binary { lo <= 0.5 && hi > 0.5 } else { lo < hi };
                    if !boundary {
                        continue;
                    }
                    let threshold = if binary { 0.5 } else { midpoint(lo, hi) };
                    let nl = pos + 1;
                    let nr = n - nl;
                    right.iter_mut().zip(parent.iter().zip(&left)).for_each(|(r, (p, l))| *r = p - l);
                    let gain = classification_gain(*parent_gini, &left, nl, &right, nr);
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(SplitCandidate {
                            feature: f,
                            threshold,
                            gain,
                            left: SideSummary::Counts(left.clone()),
                            right: SideSummary::Counts(right.clone()),
                        });
                    }
                }
            }
            (
                ScanContext::Values {
                    mean,
                    sum,
                    sumsq,
                    parent_var,
                },
                Labels::Values(v),
            ) => {
                let (mut ls, mut lss) = (0.0, 0.0);
                for pos in 0..n - 1 {
                    let d = v[order[pos].1] - mean;
                    ls += d;
                    lss += d * d;
                    let (lo, hi) = (order[pos].0, order[pos + 1].0);
                    let boundary = if binary { lo <= 0.5 && hi > 0.5 } else { lo < hi };
                    if !boundary {
                        continue;
                    }
                    let threshold = if binary { 0.5 } else { midpoint(lo, hi) };
                    let nl = (pos + 1) as f64;
                    let nr = (n - pos - 1) as f64;
                    let lvar = (lss / nl - (ls / nl) * (ls / nl)).max(0.0);
                    let rs = sum - ls;
                    let rss = sumsq - lss;
                    let rvar = (rss / nr - (rs / nr) * (rs / nr)).max(0.0);
                    let total = n as f64;
                    let gain = parent_var - (nl / total) * lvar - (nr / total) * rvar;
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(SplitCandidate {
                            feature: f,
                            threshold,
                            gain,
                            left: SideSummary::Mean {
                                n: pos + 1,
                                mean: mean + ls / nl,
                            },
                            right: SideSummary::Mean {
                                n: n - pos - 1,
                                mean: mean + rs / nr,
                            },
                        });
                    }
                }
            }
            _ => unreachable!("scan context matches label kind"),
        }
        best
    }
}

/// Parent Gini minus the size-weighted child Gini impurities.
pub fn classification_gain(parent_gini: f64, left: &[usize], nl: usize, right: &[usize], nr: usize) -> f64 {
    let total = (nl + nr) as f64;
    parent_gini - (nl as f64 / total) * gini(left, nl) - (nr as f64 / total) * gini(right, nr)
}
