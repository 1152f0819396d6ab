//! Estimated greedy tree extraction.
//!
//! Every node draws a fresh sample from the input mixture conditioned on the
//! node's path constraint, labels it with one oracle call, and scans it for
//! the best split. Leaves are labelled with the sample majority (or mean).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::grow::{grow, Evaluated, GrowLimits, NodeEvaluator};
use super::impurity::{class_counts, majority};
use super::split::{best_split, SplitCandidate, SplitRules};
use crate::constraint::BoxConstraint;
use crate::error::{Error, Result};
use crate::gmm::DiagonalGmm;
use crate::label::{Label, Labels};
use crate::oracle::{Oracle, Serialized};
use crate::rng::Stream;
use crate::space::{check_dim, FeatureKind, FeatureSpace, Task};
use crate::tree::DecisionTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Node budget; even values are rounded down.
    pub k: usize,
    /// Samples drawn per node.
    pub n: usize,
    pub seed: u64,
    pub min_gain: f64,
    pub max_depth: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            k: 31,
            n: 10_000,
            seed: 0,
            min_gain: 1e-7,
            max_depth: 64,
        }
    }
}

impl ExtractionConfig {
    /// Largest realizable (odd) node count not above `k`.
    pub fn budget(&self) -> usize {
        if self.k.is_multiple_of(2) {
            self.k.saturating_sub(1).max(1)
        } else {
            self.k
        }
    }
}

/// Points drawn inside one node together with their oracle labels.
#[derive(Clone, Debug)]
pub struct LabeledSample {
    pub points: Array2<f64>,
    pub labels: Labels,
}

impl LabeledSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Majority class or mean value.
    pub fn leaf_label(&self) -> Label {
        leaf_label(&self.labels)
    }
}

pub(crate) fn leaf_label(labels: &Labels) -> Label {
    match labels {
        Labels::Classes(c) => Label::Class(majority(&class_counts(c, labels.class_count().max(1)))),
        Labels::Values(v) => Label::Value(v.iter().sum::<f64>() / v.len().max(1) as f64),
    }
}

/// Draws `n` points from `gmm | bbox` and labels them with one oracle batch.
pub fn node_sample(oracle: &dyn Oracle, gmm: &DiagonalGmm, bbox: &BoxConstraint, n: usize, stream: Stream) -> Result<LabeledSample> {
    node_sample_serialized(&Serialized::new(oracle), gmm, bbox, n, stream)
}

fn node_sample_serialized(oracle: &Serialized<'_>, gmm: &DiagonalGmm, bbox: &BoxConstraint, n: usize, stream: Stream) -> Result<LabeledSample> {
    if n == 0 {
        return Err(Error::domain("node sample size must be positive"));
    }
    let points = gmm.sample_conditional(bbox, n, stream)?;
    let labels = oracle.query(points.view())?;
    Ok(LabeledSample { points, labels })
}

struct Extractor<'a> {
    oracle: Serialized<'a>,
    gmm: &'a DiagonalGmm,
    kinds: Vec<FeatureKind>,
    cfg: &'a ExtractionConfig,
    stream: Stream,
}

impl Extractor<'_> {
    fn evaluate(&self, bbox: &BoxConstraint, creation: usize) -> Result<Option<Evaluated<()>>> {
        let sample = match node_sample_serialized(&self.oracle, self.gmm, bbox, self.cfg.n, self.stream.child(creation as u64)) {
            Ok(s) => s,
            Err(Error::ZeroMass) => return Ok(None),
            Err(e) => return Err(Error::at_node(creation, e)),
        };
        let rules = SplitRules {
            kinds: &self.kinds,
            features: None,
            min_gain: self.cfg.min_gain,
        };
        let split = best_split(sample.points.view(), &sample.labels, &rules);
        Ok(Some(Evaluated {
            label: sample.leaf_label(),
            split,
            payload: (),
        }))
    }
}

impl NodeEvaluator for Extractor<'_> {
    type Payload = ();

    fn root(&self, bbox: &BoxConstraint) -> Result<Evaluated<()>> {
        self.evaluate(bbox, 0)?
            .ok_or_else(|| Error::domain("the input distribution has zero mass at the root"))
    }

    fn child(&self, _: &(), bbox: &BoxConstraint, _: &SplitCandidate, _: bool, creation: usize) -> Result<Option<Evaluated<()>>> {
        self.evaluate(bbox, creation)
    }

    fn concurrent(&self) -> bool {
        self.oracle.inner().concurrent()
    }
}

/// Extracts a decision tree of at most `cfg.k` nodes approximating `oracle`
/// under the input distribution `gmm`.
pub fn extract_tree(oracle: &dyn Oracle, gmm: &DiagonalGmm, space: &FeatureSpace, cfg: &ExtractionConfig) -> Result<DecisionTree> {
    check_dim(space.dim(), oracle.dimension())?;
    check_dim(space.dim(), gmm.dim())?;
    if cfg.k == 0 {
        return Err(Error::domain("node budget must be at least 1"));
    }
    if cfg.n < 2 {
        return Err(Error::domain("need at least 2 samples per node"));
    }
    let extractor = Extractor {
        oracle: Serialized::new(oracle),
        gmm,
        kinds: space.kinds(),
        cfg,
        stream: Stream::new(cfg.seed),
    };
    let limits = GrowLimits {
        budget: cfg.budget(),
        max_depth: cfg.max_depth,
    };
    grow(&extractor, oracle.task(), space.names(), &limits)
}

/// Fraction of points on which two classifiers agree, or their mean squared
/// difference for regression.
pub(crate) fn disagreement(a: &Labels, b: &Labels) -> f64 {
    match (a, b) {
        (Labels::Classes(x), Labels::Classes(y)) => {
            x.iter().zip(y).filter(|(p, q)| p != q).count() as f64 / x.len().max(1) as f64
        }
        (Labels::Values(x), Labels::Values(y)) => {
            x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len().max(1) as f64
        }
        _ => f64::NAN,
    }
}

/// Pr_{x ~ gmm}[a(x) ≠ b(x)] estimated on `n` fresh samples.
pub fn distribution_disagreement(a: &dyn Oracle, b: &dyn Oracle, gmm: &DiagonalGmm, n: usize, stream: Stream) -> Result<f64> {
    if a.task() != Task::Classification || b.task() != a.task() {
        return Err(Error::domain("disagreement is defined for two classifiers"));
    }
    let x = gmm.sample_conditional(&BoxConstraint::full(gmm.dim()), n, stream)?;
    let la = crate::oracle::query_batch(a, x.view())?;
    let lb = crate::oracle::query_batch(b, x.view())?;
    Ok(disagreement(&la, &lb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;
    use crate::tree::Node;

    fn std_normal(d: usize) -> DiagonalGmm {
        DiagonalGmm::new(vec![1.0], vec![vec![0.0; d]], vec![vec![1.0; d]]).unwrap()
    }

    #[test]
    fn constant_oracle_gives_single_leaf() {
        let o = FnOracle::new(2, Task::Classification, |_| Label::Class(3));
        let space = FeatureSpace::anonymous(2).unwrap();
        let cfg = ExtractionConfig { n: 500, ..Default::default() };
        let t = extract_tree(&o, &std_normal(2), &space, &cfg).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.predict(&[0.0, 0.0]).unwrap(), Label::Class(3));
    }

    #[test]
    fn recovers_a_stump() {
        let space = FeatureSpace::anonymous(2).unwrap();
        let truth = DecisionTree::from_nodes(
            Task::Classification,
            space.names(),
            vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
                Node::Leaf { label: Label::Class(0) },
                Node::Leaf { label: Label::Class(1) },
            ],
        )
        .unwrap();
        let cfg = ExtractionConfig { k: 3, n: 10_000, seed: 1, ..Default::default() };
        let g = std_normal(2);
        let t = extract_tree(&truth, &g, &space, &cfg).unwrap();
        assert_eq!(t.node_count(), 3);
        match t.nodes()[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!(threshold.abs() < 0.05, "{threshold}");
            }
            _ => panic!("expected a split at the root"),
        }
        let d = distribution_disagreement(&t, &truth, &g, 100_000, Stream::new(99)).unwrap();
        assert!(d <= 0.01, "{d}");
    }

    #[test]
    fn node_sample_rejects_empty_request() {
        let o = FnOracle::new(1, Task::Classification, |_| Label::Class(0));
        let err = node_sample(&o, &std_normal(1), &BoxConstraint::full(1), 0, Stream::new(0));
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn node_sample_label_proportions() {
        let o = FnOracle::new(1, Task::Classification, |x| Label::Class(usize::from(x[0] > 0.0)));
        let n = 10_000;
        let s = node_sample(&o, &std_normal(1), &BoxConstraint::full(1), n, Stream::new(4)).unwrap();
        let ones = s.labels.classes().unwrap().iter().filter(|&&c| c == 1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn even_budget_rounds_down() {
        let cfg = ExtractionConfig { k: 8, ..Default::default() };
        assert_eq!(cfg.budget(), 7);
    }

    #[test]
    fn oracle_errors_carry_node_context() {
        struct Failing;
        impl Oracle for Failing {
            fn dimension(&self) -> usize { 1 }
            fn task(&self) -> Task { Task::Classification }
            fn predict_batch(&self, _: ndarray::ArrayView2<'_, f64>) -> Result<Labels> {
                Err(Error::Oracle("boom".into()))
            }
        }
        let space = FeatureSpace::anonymous(1).unwrap();
        let err = extract_tree(&Failing, &std_normal(1), &space, &ExtractionConfig { n: 10, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::AtNode { node: 0, .. }));
        assert!(matches!(err.root_cause(), Error::Oracle(_)));
    }
}
