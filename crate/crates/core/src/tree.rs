//! Axis-aligned binary decision trees stored as pre-order node arrays.

use std::fmt::Write as _;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::constraint::{simplify_constraint, Atom, BoxConstraint};
use crate::error::{Error, Result};
use crate::label::{Label, Labels};
use crate::space::{check_dim, Task};

/// Index of a node in [`DecisionTree::nodes`].
pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes to `left`, otherwise `right`.
    Split {
        feature: usize,
        threshold: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        label: Label,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    task: Task,
    feature_names: Vec<String>,
    nodes: Vec<Node>,
    parents: Vec<Option<NodeId>>,
}

impl DecisionTree {
    /// Validates and wraps a pre-order node array. Node 0 is the root, the left
    /// child of a split immediately follows it, and every path constraint must
    /// be non-empty.
    pub fn from_nodes(task: Task, feature_names: Vec<String>, nodes: Vec<Node>) -> Result<Self> {
        let dim = feature_names.len();
        if dim == 0 {
            return Err(Error::domain("tree needs at least one feature"));
        }
        if nodes.is_empty() {
            return Err(Error::domain("tree has no nodes"));
        }
        let mut parents = vec![None; nodes.len()];
        let mut expected = 0usize;
        let mut stack = vec![(0usize, None::<NodeId>, BoxConstraint::full(dim))];
        while let Some((id, parent, bbox)) = stack.pop() {
            if id != expected {
                return Err(Error::domain(format!(
                    "nodes are not in pre-order: found node {id} where {expected} was expected"
                )));
            }
            expected += 1;
            if bbox.is_empty() {
                return Err(Error::domain(format!("node {id} is unreachable (empty path constraint)")));
            }
            parents[id] = parent;
            match &nodes[id] {
                Node::Leaf { label } => {
                    if label.task() != task {
                        return Err(Error::domain(format!("leaf {id} label does not match task {task}")));
                    }
                    if let Label::Value(v) = label {
                        if !v.is_finite() {
                            return Err(Error::domain(format!("leaf {id} has a non-finite value")));
                        }
                    }
                }
                &Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= dim {
                        return Err(Error::domain(format!(
                            "node {id} splits on feature {feature}, dimension is {dim}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::domain(format!("node {id} has a non-finite threshold")));
                    }
                    if left >= nodes.len() || right >= nodes.len() {
                        return Err(Error::domain(format!("node {id} has a child out of range")));
                    }
                    let lbox = bbox.with_atom(Atom::le(feature, threshold))?;
                    let rbox = bbox.with_atom(Atom::gt(feature, threshold))?;
                    // right is visited after the whole left subtree
                    stack.push((right, Some(id), rbox));
                    stack.push((left, Some(id), lbox));
                }
            }
        }
        if expected != nodes.len() {
            return Err(Error::domain(format!(
                "{} nodes are not reachable from the root",
                nodes.len() - expected
            )));
        }
        Ok(DecisionTree {
            task,
            feature_names,
            nodes,
            parents,
        })
    }

    pub fn leaf(task: Task, feature_names: Vec<String>, label: Label) -> Result<Self> {
        Self::from_nodes(task, feature_names, vec![Node::Leaf { label }])
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::domain(format!("node {id} does not belong to this tree")))
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parents.get(id).copied().flatten()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
            .map(|(i, _)| i)
    }

    pub fn splits(&self) -> impl Iterator<Item = (NodeId, usize, f64)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match *n {
            Node::Split {
                feature, threshold, ..
            } => Some((i, feature, threshold)),
            Node::Leaf { .. } => None,
        })
    }

    pub fn depth(&self, id: NodeId) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            d += 1;
            cur = p;
        }
        d
    }

    /// Branch atoms on the root-to-node path, root first.
    pub fn path_atoms(&self, id: NodeId) -> Result<Vec<Atom>> {
        self.node(id)?;
        let mut atoms = Vec::new();
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            if let Node::Split {
                feature,
                threshold,
                left,
                ..
            } = self.nodes[p]
            {
                atoms.push(if left == cur {
                    Atom::le(feature, threshold)
                } else {
                    Atom::gt(feature, threshold)
                });
            }
            cur = p;
        }
        atoms.reverse();
        Ok(atoms)
    }

    pub fn path_constraint(&self, id: NodeId) -> Result<BoxConstraint> {
        simplify_constraint(self.dim(), &self.path_atoms(id)?)
    }

    /// Leaf reached by `x`; assumes `x` has the right dimension.
    pub(crate) fn leaf_for(&self, x: &[f64]) -> NodeId {
        let mut cur = 0;
        loop {
            match self.nodes[cur] {
                Node::Leaf { .. } => return cur,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => cur = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_of(&self, x: &[f64]) -> Result<NodeId> {
        check_dim(self.dim(), x.len())?;
        Ok(self.leaf_for(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let leaf = self.leaf_of(x)?;
        Ok(self.leaf_label(leaf))
    }

    fn leaf_label(&self, id: NodeId) -> Label {
        match self.nodes[id] {
            Node::Leaf { label } => label,
            Node::Split { .. } => unreachable!("leaf_for returns leaves"),
        }
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        check_dim(self.dim(), x.ncols())?;
        let mut row = vec![0.0; self.dim()];
        let mut out = Labels::empty(self.task);
        for r in x.rows() {
            row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
            match (&mut out, self.leaf_label(self.leaf_for(&row))) {
                (Labels::Classes(c), Label::Class(v)) => c.push(v),
                (Labels::Values(c), Label::Value(v)) => c.push(v),
                _ => unreachable!("leaf labels are validated against the task"),
            }
        }
        Ok(out)
    }

    fn format_atom(&self, atom: &Atom) -> String {
        let op = match atom.direction {
            crate::constraint::Direction::Le => "<=",
            crate::constraint::Direction::Gt => ">",
        };
        format!("{} {op} {}", self.feature_names[atom.feature], atom.bound)
    }

    /// One `if ... then ...` rule per leaf, in pre-order.
    pub fn rules(&self) -> Vec<String> {
        self.leaves()
            .map(|leaf| {
                let atoms = self.path_atoms(leaf).expect("leaf belongs to tree");
                let cond = if atoms.is_empty() {
                    "true".to_string()
                } else {
                    atoms
                        .iter()
                        .map(|a| self.format_atom(a))
                        .collect::<Vec<_>>()
                        .join(" and ")
                };
                format!("if {cond} then {}", self.leaf_label(leaf))
            })
            .collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(
                        out,
                        "  n{i} [label=\"{} <= {threshold}\"];",
                        escape_dot(&self.feature_names[feature])
                    );
                    let _ = writeln!(out, "  n{i} -> n{left} [label=\"yes\"];");
                    let _ = writeln!(out, "  n{i} -> n{right} [label=\"no\"];");
                }
                Node::Leaf { label } => {
                    let _ = writeln!(out, "  n{i} [label=\"{label}\", shape=ellipse];");
                }
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            task: self.task,
            feature_names: self.feature_names.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| match *n {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => NodeRecord::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    },
                    Node::Leaf { label } => NodeRecord::Leaf { label },
                })
                .collect(),
        }
    }

    pub fn from_document(doc: TreeDocument) -> Result<Self> {
        let task = doc.task;
        let nodes = doc
            .nodes
            .into_iter()
            .map(|r| match r {
                NodeRecord::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => Ok(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                }),
                NodeRecord::Leaf { label } => Ok(Node::Leaf {
                    label: coerce_label(label, task)?,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_nodes(task, doc.feature_names, nodes)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}

fn coerce_label(label: Label, task: Task) -> Result<Label> {
    match (label, task) {
        (Label::Class(c), Task::Regression) => Ok(Label::Value(c as f64)),
        (Label::Value(v), Task::Classification) => Err(Error::domain(format!(
            "classification leaf label must be a non-negative integer, got {v}"
        ))),
        (l, _) => Ok(l),
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Serialized form: `{task, feature_names, nodes: [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeDocument {
    pub task: Task,
    pub feature_names: Vec<String>,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeRecord {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
    },
}

/// Assembles a tree from nodes created in arbitrary order (e.g. best-first
/// growth) and renumbers them into pre-order.
#[derive(Debug, Default)]
pub(crate) struct TreeBuilder {
    nodes: Vec<BuilderNode>,
}

#[derive(Debug)]
enum BuilderNode {
    Leaf(Label),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

impl TreeBuilder {
    pub(crate) fn push_leaf(&mut self, label: Label) -> usize {
        self.nodes.push(BuilderNode::Leaf(label));
        self.nodes.len() - 1
    }

    pub(crate) fn set_split(&mut self, id: usize, feature: usize, threshold: f64, left: usize, right: usize) {
        self.nodes[id] = BuilderNode::Split {
            feature,
            threshold,
            left,
            right,
        };
    }

    pub(crate) fn build(self, task: Task, feature_names: Vec<String>) -> Result<DecisionTree> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(0usize, None::<(usize, bool)>)];
        while let Some((id, parent)) = stack.pop() {
            let new_id = out.len();
            if let Some((p, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut out[p] {
                    if is_left {
                        *left = new_id;
                    } else {
                        *right = new_id;
                    }
                }
            }
            match self.nodes[id] {
                BuilderNode::Leaf(label) => out.push(Node::Leaf { label }),
                BuilderNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(Node::Split {
                        feature,
                        threshold,
                        left: usize::MAX,
                        right: usize::MAX,
                    });
                    stack.push((right, Some((new_id, false))));
                    stack.push((left, Some((new_id, true))));
                }
            }
        }
        DecisionTree::from_nodes(task, feature_names, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    /// Acts right when pole velocity >= -0.286 and pole angle >= -0.071.
    fn cartpole_rule_tree() -> DecisionTree {
        let names = vec!["pole_velocity".to_string(), "pole_angle".to_string()];
        DecisionTree::from_nodes(
            Task::Classification,
            names,
            vec![
                Node::Split { feature: 0, threshold: -0.286, left: 1, right: 2 },
                Node::Leaf { label: Label::Class(0) },
                Node::Split { feature: 1, threshold: -0.071, left: 3, right: 4 },
                Node::Leaf { label: Label::Class(0) },
                Node::Leaf { label: Label::Class(1) },
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_leaf_predicts_constant() {
        let t = DecisionTree::leaf(Task::Classification, names(3), Label::Class(1)).unwrap();
        assert_eq!(t.predict(&[9.0, -1.0, 0.0]).unwrap(), Label::Class(1));
        assert!(matches!(t.predict(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cartpole_rule_tree_predictions() {
        let t = cartpole_rule_tree();
        assert_eq!(t.predict(&[0.0, 0.0]).unwrap(), Label::Class(1));
        assert_eq!(t.predict(&[-1.0, 0.0]).unwrap(), Label::Class(0));
        assert_eq!(t.predict(&[0.0, -0.2]).unwrap(), Label::Class(0));
    }

    #[test]
    fn path_constraints() {
        let t = cartpole_rule_tree();
        assert_eq!(t.path_constraint(0).unwrap(), BoxConstraint::full(2));
        let left = t.path_constraint(1).unwrap();
        assert_eq!(left.intervals().unwrap()[0].upper, -0.286);
        assert!(t.path_constraint(17).is_err());
    }

    #[test]
    fn repeated_feature_on_path_merges() {
        let t = DecisionTree::from_nodes(
            Task::Regression,
            names(1),
            vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 4 },
                Node::Split { feature: 0, threshold: -1.0, left: 2, right: 3 },
                Node::Leaf { label: Label::Value(0.0) },
                Node::Leaf { label: Label::Value(1.0) },
                Node::Leaf { label: Label::Value(2.0) },
            ],
        )
        .unwrap();
        let atoms = t.path_atoms(3).unwrap();
        assert_eq!(atoms, vec![Atom::le(0, 0.0), Atom::gt(0, -1.0)]);
        assert_eq!(t.path_constraint(3).unwrap(), simplify_constraint(1, &atoms).unwrap());
        let iv = t.path_constraint(3).unwrap().intervals().unwrap()[0];
        assert_eq!((iv.lower, iv.upper, iv.lower_open), (-1.0, 0.0, true));
    }

    #[test]
    fn rejects_unreachable_and_out_of_order_nodes() {
        // right subtree contradicts the root split
        let bad = DecisionTree::from_nodes(
            Task::Regression,
            names(1),
            vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
                Node::Leaf { label: Label::Value(0.0) },
                Node::Split { feature: 0, threshold: -1.0, left: 3, right: 4 },
                Node::Leaf { label: Label::Value(1.0) },
                Node::Leaf { label: Label::Value(2.0) },
            ],
        );
        assert!(bad.is_err());
        let swapped = DecisionTree::from_nodes(
            Task::Regression,
            names(1),
            vec![
                Node::Split { feature: 0, threshold: 0.0, left: 2, right: 1 },
                Node::Leaf { label: Label::Value(0.0) },
                Node::Leaf { label: Label::Value(1.0) },
            ],
        );
        assert!(swapped.is_err());
    }

    #[test]
    fn json_round_trip_and_renderers() {
        let t = cartpole_rule_tree();
        let json = t.to_json();
        assert!(json.contains("\"kind\": \"split\""));
        let back = DecisionTree::from_json(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), json);
        let rules = t.rules();
        assert_eq!(rules.len(), 3);
        assert_eq!(rules[2], "if pole_velocity > -0.286 and pole_angle > -0.071 then 1");
        assert!(t.to_dot().contains("n0 -> n1"));
    }

    #[test]
    fn batch_prediction_matches_rowwise() {
        let t = cartpole_rule_tree();
        let x = array![[0.0, 0.0], [-1.0, 0.0], [0.5, -0.5]];
        let batch = t.predict_batch(x.view()).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            assert_eq!(batch.get(i), t.predict(row.as_slice().unwrap()).unwrap());
        }
    }

    #[test]
    fn builder_renumbers_to_preorder() {
        let mut b = TreeBuilder::default();
        let root = b.push_leaf(Label::Class(0));
        let l = b.push_leaf(Label::Class(0));
        let r = b.push_leaf(Label::Class(1));
        b.set_split(root, 0, 0.0, l, r);
        let rl = b.push_leaf(Label::Class(1));
        let rr = b.push_leaf(Label::Class(2));
        b.set_split(r, 1, 0.0, rl, rr);
        let ll = b.push_leaf(Label::Class(3));
        let lr = b.push_leaf(Label::Class(4));
        b.set_split(l, 1, 1.0, ll, lr);
        let t = b.build(Task::Classification, names(2)).unwrap();
        assert_eq!(t.node_count(), 7);
        assert_eq!(t.predict(&[-1.0, 0.5]).unwrap(), Label::Class(3));
        assert_eq!(t.predict(&[1.0, 0.5]).unwrap(), Label::Class(2));
    }
}
