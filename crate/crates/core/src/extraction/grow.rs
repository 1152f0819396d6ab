//! Best-first tree growth shared by the extractor and CART.

use super::split::SplitCandidate;
use crate::constraint::{Atom, BoxConstraint};
use crate::error::Result;
use crate::label::Label;
use crate::par;
use crate::space::Task;
use crate::tree::{DecisionTree, TreeBuilder};

/// A node after its sample has been drawn and scanned.
pub(crate) struct Evaluated<P> {
    pub label: Label,
    pub split: Option<SplitCandidate>,
    pub payload: P,
}

pub(crate) trait NodeEvaluator: Sync {
    type Payload: Send + Sync;

    fn root(&self, bbox: &BoxConstraint) -> Result<Evaluated<Self::Payload>>;

    /// `None` marks the child infeasible; the parent then stays a leaf.
    fn child(
        &self,
        parent: &Self::Payload,
        bbox: &BoxConstraint,
        split: &SplitCandidate,
        left: bool,
        creation: usize,
    ) -> Result<Option<Evaluated<Self::Payload>>>;

    /// Whether the two children may be evaluated concurrently.
    fn concurrent(&self) -> bool;
}

pub(crate) struct GrowLimits {
    /// Maximum node count (odd).
    pub budget: usize,
    pub max_depth: usize,
}

struct GrowNode<P> {
    bbox: BoxConstraint,
    depth: usize,
    label: Label,
    split: Option<SplitCandidate>,
    payload: Option<P>,
    builder_id: usize,
    expanded: bool,
}

/// Repeatedly expands the frontier leaf with the highest estimated gain until
/// the budget is spent or no leaf has an admissible split.
pub(crate) fn grow<E: NodeEvaluator>(
    eval: &E,
    task: Task,
    feature_names: Vec<String>,
    limits: &GrowLimits,
) -> Result<DecisionTree> {
    let dim = feature_names.len();
    let root_box = BoxConstraint::full(dim);
    let root = eval.root(&root_box)?;
    let mut builder = TreeBuilder::default();
    let mut nodes = vec![GrowNode {
        bbox: root_box,
        depth: 0,
        builder_id: builder.push_leaf(root.label),
        label: root.label,
        split: root.split,
        payload: Some(root.payload),
        expanded: false,
    }];
    let mut count = 1usize;
    while count + 2 <= limits.budget {
        let mut pick: Option<usize> = None;
        for (i, n) in nodes.iter().enumerate() {
            if n.expanded || n.depth >= limits.max_depth {
                continue;
            }
            let Some(s) = &n.split else { continue };
            if pick.is_none_or(|p| s.gain > nodes[p].split.as_ref().map_or(f64::NEG_INFINITY, |b| b.gain)) {
                pick = Some(i);
            }
        }
        let Some(p) = pick else { break };
        nodes[p].expanded = true;
        let split = nodes[p].split.clone().expect("picked nodes have a split");
        let lbox = nodes[p].bbox.with_atom(Atom::le(split.feature, split.threshold))?;
        let rbox = nodes[p].bbox.with_atom(Atom::gt(split.feature, split.threshold))?;
        let (lid, rid) = (nodes.len(), nodes.len() + 1);
        let payload = nodes[p].payload.take().expect("unexpanded nodes keep their payload");
        let (l, r) = if eval.concurrent() {
            par::join(
                || eval.child(&payload, &lbox, &split, true, lid),
                || eval.child(&payload, &rbox, &split, false, rid),
            )
        } else {
            (
                eval.child(&payload, &lbox, &split, true, lid),
                eval.child(&payload, &rbox, &split, false, rid),
            )
        };
        let (Some(l), Some(r)) = (l?, r?) else {
            // infeasible child: keep the parent as a leaf
            continue;
        };
        let depth = nodes[p].depth + 1;
        let lb = builder.push_leaf(l.label);
        let rb = builder.push_leaf(r.label);
        builder.set_split(nodes[p].builder_id, split.feature, split.threshold, lb, rb);
        for (ev, bbox, bid) in [(l, lbox, lb), (r, rbox, rb)] {
            nodes.push(GrowNode {
                bbox,
                depth,
                label: ev.label,
                split: ev.split,
                payload: Some(ev.payload),
                builder_id: bid,
                expanded: false,
            });
        }
        count += 2;
    }
    debug_assert!(nodes.iter().all(|n| n.label.task() == task));
    builder.build(task, feature_names)
}
