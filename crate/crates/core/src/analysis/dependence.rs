//! Monte-Carlo estimates of how much an oracle's output depends on a feature,
//! overall and within the subgroups an extracted tree exposes.
//!
//! Each conditional expectation is estimated from samples drawn under its own
//! box, with a random stream keyed by the box. The same box therefore always
//! sees the same points for a given seed, which makes contrasts exactly
//! antisymmetric and lets reports share estimates.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::constraint::{BoxConstraint, Interval};
use crate::error::{Error, Result};
use crate::extraction::node_sample;
use crate::gmm::DiagonalGmm;
use crate::label::Labels;
use crate::oracle::Oracle;
use crate::rng::Stream;
use crate::space::{check_dim, Task};
use crate::tree::{DecisionTree, Node, NodeId};

/// How oracle outputs become the real numbers being averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "class")]
pub enum Response {
    /// The regression output itself.
    Value,
    /// 1 when the predicted class equals the given one, else 0.
    ClassIndicator(usize),
    /// The predicted class index as a number.
    ClassValue,
}

impl Response {
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Regression => Response::Value,
            Task::Classification => Response::ClassIndicator(1),
        }
    }

    fn values(self, labels: &Labels) -> Result<Vec<f64>> {
        match (self, labels) {
            (Response::Value, Labels::Values(v)) => Ok(v.clone()),
            (Response::ClassIndicator(c), Labels::Classes(y)) => {
                Ok(y.iter().map(|&k| if k == c { 1.0 } else { 0.0 }).collect())
            }
            (Response::ClassValue, Labels::Classes(y)) => Ok(y.iter().map(|&k| k as f64).collect()),
            (Response::Value, Labels::Classes(_)) => Err(Error::domain(
                "classification oracles need a class indicator or class-value response",
            )),
            (_, Labels::Values(_)) => Err(Error::domain("class responses need a classification oracle")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectConfig {
    pub n: usize,
    pub seed: u64,
    pub response: Option<Response>,
}

impl Default for EffectConfig {
    fn default() -> Self {
        EffectConfig {
            n: 100_000,
            seed: 0,
            response: None,
        }
    }
}

/// A sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        Estimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// A difference of two conditional means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub delta: f64,
    pub std_error: f64,
    pub high: Estimate,
    pub low: Estimate,
}

/// Subgroup size as a count, so sibling counts add up exactly to the parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prevalence {
    pub count: usize,
    pub total: usize,
}

impl Prevalence {
    pub fn fraction(&self) -> f64 {
        self.count as f64 / self.total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupEntry {
    pub node: NodeId,
    pub depth: usize,
    pub feature: usize,
    pub threshold: f64,
    /// E[f | left child] − E[f | right child]
    pub delta_n: f64,
    pub std_error: f64,
    pub prevalence: Prevalence,
    /// P · (high-side minus low-side effect) / Δ, oriented like Δ.
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub feature: usize,
    pub feature_name: String,
    pub response: Response,
    pub effect: EffectEstimate,
    pub entries: Vec<SubgroupEntry>,
}

/// The two halves of a {0, 1} indicator, split at 0.5.
pub fn indicator_regions() -> (Interval, Interval) {
    (Interval::at_most(0.5), Interval::above(0.5))
}

fn conditional_mean(oracle: &dyn Oracle, gmm: &DiagonalGmm, bbox: &BoxConstraint, cfg: &EffectConfig, response: Response) -> Result<Estimate> {
    let stream = Stream::new(cfg.seed).child(bbox.fingerprint());
    let sample = match node_sample(oracle, gmm, bbox, cfg.n, stream) {
        Ok(s) => s,
        Err(Error::ZeroMass) => {
            return Err(Error::DegenerateConditioning(format!(
                "the input distribution puts no mass on {bbox:?}"
            )))
        }
        Err(e) => return Err(e),
    };
    Ok(Estimate::of(&response.values(&sample.labels)?))
}

fn contrast(oracle: &dyn Oracle, gmm: &DiagonalGmm, high: &BoxConstraint, low: &BoxConstraint, cfg: &EffectConfig) -> Result<EffectEstimate> {
    check_dim(oracle.dimension(), gmm.dim())?;
    let response = cfg.response.unwrap_or_else(|| Response::default_for(oracle.task()));
    let h = conditional_mean(oracle, gmm, high, cfg, response)?;
    let l = conditional_mean(oracle, gmm, low, cfg, response)?;
    Ok(EffectEstimate {
        delta: h.mean - l.mean,
        std_error: h.std_error.hypot(l.std_error),
        high: h,
        low: l,
    })
}

/// Δ = E[f(x) | x_i ∈ high] − E[f(x) | x_i ∈ low] under the mixture.
pub fn feature_effect(
    oracle: &dyn Oracle,
    gmm: &DiagonalGmm,
    feature: usize,
    low: Interval,
    high: Interval,
    cfg: &EffectConfig,
) -> Result<EffectEstimate> {
    if feature >= gmm.dim() {
        return Err(Error::domain(format!("feature {feature} out of range for d = {}", gmm.dim())));
    }
    let full = BoxConstraint::full(gmm.dim());
    contrast(oracle, gmm, &full.with_interval(feature, high)?, &full.with_interval(feature, low)?, cfg)
}

/// Number of rows of `x` that reach `node`.
pub fn prevalence(tree: &DecisionTree, node: NodeId, x: ArrayView2<'_, f64>) -> Result<Prevalence> {
    check_dim(tree.dim(), x.ncols())?;
    if x.nrows() == 0 {
        return Err(Error::domain("prevalence needs a non-empty test set"));
    }
    let region = tree.path_constraint(node)?;
    let mut count = 0;
    let mut row = vec![0.0; x.ncols()];
    for r in x.rows() {
        row.iter_mut().zip(r).for_each(|(a, b)| *a = *b);
        count += usize::from(region.contains(&row)?);
    }
    Ok(Prevalence { count, total: x.nrows() })
}

/// (Δ_N, P) for an internal node: the contrast between its children and the
/// share of test points reaching it.
pub fn subgroup_effect(
    oracle: &dyn Oracle,
    gmm: &DiagonalGmm,
    tree: &DecisionTree,
    node: NodeId,
    x: ArrayView2<'_, f64>,
    cfg: &EffectConfig,
) -> Result<(EffectEstimate, Prevalence)> {
    let Node::Split { left, right, .. } = *tree.node(node)? else {
        return Err(Error::domain(format!("node {node} is a leaf")));
    };
    let left_box = tree.path_constraint(left)?;
    let right_box = tree.path_constraint(right)?;
    let effect = contrast(oracle, gmm, &left_box, &right_box, cfg)?;
    Ok((effect, prevalence(tree, node, x)?))
}

/// Δ for `feature` plus one subgroup entry per node of `tree` that branches
/// on it.
pub fn dependence_report(
    oracle: &dyn Oracle,
    gmm: &DiagonalGmm,
    tree: &DecisionTree,
    feature: usize,
    (low, high): (Interval, Interval),
    x: ArrayView2<'_, f64>,
    cfg: &EffectConfig,
) -> Result<DependenceReport> {
    check_dim(tree.dim(), gmm.dim())?;
    let effect = feature_effect(oracle, gmm, feature, low, high, cfg)?;
    let mut entries = Vec::new();
    for (node, f, threshold) in tree.splits() {
        if f != feature {
            continue;
        }
        let (e, p) = subgroup_effect(oracle, gmm, tree, node, x, cfg)?;
        entries.push(SubgroupEntry {
            node,
            depth: tree.depth(node),
            feature,
            threshold,
            delta_n: e.delta,
            std_error: e.std_error,
            prevalence: p,
            // the left child is the low side of the feature
            share: p.fraction() * -e.delta / effect.delta,
        });
    }
    Ok(DependenceReport {
        feature,
        feature_name: tree.feature_names()[feature].clone(),
        response: cfg.response.unwrap_or_else(|| Response::default_for(oracle.task())),
        effect,
        entries,
    })
}

impl DependenceReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "feature '{}': delta = {:.4} (se {:.4}; high {:.4}, low {:.4})\n",
            self.feature_name, self.effect.delta, self.effect.std_error, self.effect.high.mean, self.effect.low.mean
        );
        if self.entries.is_empty() {
            s += "the tree does not branch on this feature\n";
            return s;
        }
        s += "node  depth  threshold   delta_n      se   prevalence   share\n";
        for e in &self.entries {
            s += &format!(
                "{:>4}  {:>5}  {:>9.4}  {:>8.4}  {:>6.4}  {:>10.3}  {:>6.3}\n",
                e.node,
                e.depth,
                e.threshold,
                e.delta_n,
                e.std_error,
                e.prevalence.fraction(),
                e.share
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;
    use crate::oracle::FnOracle;

    fn gmm() -> DiagonalGmm {
        DiagonalGmm::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![1.0, 2.0]],
            vec![vec![0.2, 1.0], vec![0.2, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn swapping_regions_negates_exactly() {
        let f = FnOracle::new(2, Task::Regression, |x: &[f64]| Label::Value(x[1] + 3.0 * x[0]));
        let cfg = EffectConfig { n: 2000, seed: 4, response: None };
        let (lo, hi) = indicator_regions();
        let a = feature_effect(&f, &gmm(), 0, lo, hi, &cfg).unwrap();
        let b = feature_effect(&f, &gmm(), 0, hi, lo, &cfg).unwrap();
        assert_eq!(a.delta, -b.delta);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn ignored_feature_has_no_effect() {
        let g = DiagonalGmm::new(vec![1.0], vec![vec![0.5, 0.0]], vec![vec![0.5, 1.0]]).unwrap();
        let f = FnOracle::new(2, Task::Regression, |x: &[f64]| Label::Value(x[1]));
        let cfg = EffectConfig { n: 20_000, seed: 1, response: None };
        let (lo, hi) = indicator_regions();
        let e = feature_effect(&f, &g, 0, lo, hi, &cfg).unwrap();
        assert!(e.delta.abs() <= 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn identity_response() {
        let f = FnOracle::new(2, Task::Classification, |x: &[f64]| Label::Class(usize::from(x[0] > 0.5)));
        let cfg = EffectConfig { n: 1000, seed: 2, response: Some(Response::ClassIndicator(1)) };
        let (lo, hi) = indicator_regions();
        let e = feature_effect(&f, &gmm(), 0, lo, hi, &cfg).unwrap();
        assert_eq!(e.delta, 1.0);
    }

    #[test]
    fn zero_mass_region_is_degenerate() {
        let f = FnOracle::new(2, Task::Regression, |x: &[f64]| Label::Value(x[0]));
        let cfg = EffectConfig { n: 100, seed: 0, response: None };
        let err = feature_effect(&f, &gmm(), 0, Interval::at_most(-1e3), Interval::above(0.5), &cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateConditioning(_)), "{err}");
    }

    #[test]
    fn value_response_rejected_for_classifiers() {
        let f = FnOracle::new(2, Task::Classification, |_: &[f64]| Label::Class(0));
        let cfg = EffectConfig { n: 10, seed: 0, response: Some(Response::Value) };
        let (lo, hi) = indicator_regions();
        assert!(feature_effect(&f, &gmm(), 0, lo, hi, &cfg).is_err());
    }
}
