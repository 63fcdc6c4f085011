//! Cost-aware regression trees.
//!
//! Squared-error CART with one twist: every split candidate's gain is reduced
//! by `cost_weight · feature_cost` unless the feature is already *free* —
//! either charged earlier in the ensemble (per-ensemble charging) or used by
//! an earlier split of the same tree. Split search enumerates every midpoint
//! between consecutive distinct values of every feature, so small trees are
//! exact, not sampled.
//!
//! Evaluation mirrors the budget story: walking a tree extracts features on
//! first touch per input, and an optional [`CostMeter`] accumulates what the
//! walk would cost at test time.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Who pays for a feature again, per tree or once per ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargingMode {
    /// Features purchased by earlier trees stay free for later trees.
    PerEnsemble,
    /// Every tree pays for its own features from scratch.
    PerTree,
}

/// One node of a tree, stored in a flat array; children are indices into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted regression tree. Node 0 is the root; inputs with
/// `x[feature] < threshold` go left, everything else (ties included) right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    used_features: BTreeSet<usize>,
}

/// The best split found at one node, with its cost accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Parent SSE minus the summed child SSEs; never negative.
    pub sse_reduction: f64,
    /// `cost_weight · feature_cost`, or 0 when the feature is free.
    pub cost_penalty: f64,
    /// `sse_reduction - cost_penalty`; splits are taken only when positive.
    pub net_gain: f64,
}

/// Accumulates what evaluating trees on one input costs: first-touch feature
/// extraction plus the number of trees walked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostMeter {
    pub feature_cost: f64,
    pub trees_evaluated: usize,
}

impl CostMeter {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RegressionTree {
    /// Flat node storage, root first.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Features appearing in any split of this tree.
    pub fn used_features(&self) -> &BTreeSet<usize> {
        &self.used_features
    }

    /// Number of nodes (splits + leaves).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Plain evaluation without cost tracking. The caller guarantees `x`
    /// covers every feature the tree splits on.
    pub fn response(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Rebuilds a tree from raw nodes (model deserialization). Validates that
    /// child indices are in range and acyclic (children strictly after their
    /// parent, which is how fitting lays them out).
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Invalid("tree has no nodes".into()));
        }
        let mut used_features = BTreeSet::new();
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = node
            {
                if *left <= i || *right <= i || *left >= nodes.len() || *right >= nodes.len() {
                    return Err(Error::Invalid(format!(
                        "node {} has out-of-order child indices ({}, {})",
                        i, left, right
                    )));
                }
                if !threshold.is_finite() {
                    return Err(Error::Invalid(format!(
                        "node {} has non-finite threshold",
                        i
                    )));
                }
                used_features.insert(*feature);
            }
        }
        Ok(RegressionTree {
            nodes,
            used_features,
        })
    }
}

/// Walks `tree` on `x`, tracking feature extraction in `extracted` (shared
/// across the trees applied to one input) and, when `meter` is given,
/// charging first-touch feature costs from `costs` and counting the tree.
pub fn evaluate_tree(
    tree: &RegressionTree,
    x: &[f64],
    costs: &[f64],
    extracted: &mut HashSet<usize>,
    mut meter: Option<&mut CostMeter>,
) -> Result<f64> {
    if meter.is_some() && costs.len() != x.len() {
        return Err(Error::Dimension(format!(
            "{} costs for {} features",
            costs.len(),
            x.len()
        )));
    }
    let mut at = 0;
    let value = loop {
        match &tree.nodes[at] {
            Node::Leaf { value } => break *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= x.len() {
                    return Err(Error::Dimension(format!(
                        "tree splits on feature {} but input has {}",
                        feature,
                        x.len()
                    )));
                }
                if extracted.insert(*feature) {
                    if let Some(m) = meter.as_deref_mut() {
                        m.feature_cost += costs[*feature];
                    }
                }
                at = if x[*feature] < *threshold { *left } else { *right };
            }
        }
    };
    if let Some(m) = meter {
        m.trees_evaluated += 1;
    }
    Ok(value)
}

/// Sums and squared sums over a node's rows, for O(1) SSE updates while
/// scanning candidate thresholds.
#[derive(Clone, Copy, Default)]
struct Moments {
    count: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, y: f64) {
        self.count += 1.0;
        self.sum += y;
        self.sum_sq += y * y;
    }

    fn sse(&self) -> f64 {
        if self.count == 0.0 {
            0.0
        } else {
            (self.sum_sq - self.sum * self.sum / self.count).max(0.0)
        }
    }
}

/// Finds the best penalized split for the rows in `rows`, or `None` when no
/// candidate has positive net gain. `free` holds features whose cost penalty
/// is waived. Candidates are midpoints between consecutive distinct sorted
/// values; ties on net gain resolve to the lowest feature index, then the
/// lowest threshold, so fitting is a pure function of its inputs.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // `!(threshold > value)` is the exact guard we mean
pub fn best_split(
    features: &[f64],
    num_features: usize,
    rows: &[usize],
    targets: &[f64],
    costs: &[f64],
    cost_weight: f64,
    free: &BTreeSet<usize>,
) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let mut parent = Moments::default();
    for &r in rows {
        parent.push(targets[r]);
    }
    let parent_sse = parent.sse();

    let mut best: Option<SplitCandidate> = None;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    for feature in 0..num_features {
        sorted.clear();
        sorted.extend(
            rows.iter()
                .map(|&r| (features[r * num_features + feature], targets[r])),
        );
        // Stable by value; rows arrive in ascending order, so equal values
        // keep a deterministic order too.
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

        let penalty = if free.contains(&feature) {
            0.0
        } else {
            cost_weight * costs[feature]
        };

        let mut left = Moments::default();
        let mut right = parent;
        for i in 0..sorted.len() - 1 {
            let (value, y) = sorted[i];
            left.push(y);
            right.count -= 1.0;
            right.sum -= y;
            right.sum_sq -= y * y;
            let next = sorted[i + 1].0;
            if value >= next {
                continue;
            }
            let threshold = 0.5 * (value + next);
            // Guard against midpoints that round onto the left value, which
            // would send the left block right and produce an empty child.
            if !(threshold > value) {
                continue;
            }
            let sse_reduction = (parent_sse - left.sse() - right.sse()).max(0.0);
            let net_gain = sse_reduction - penalty;
            if net_gain <= 0.0 {
                continue;
            }
            // Strict improvement keeps the earliest (feature, threshold) on
            // ties.
            if best.as_ref().is_none_or(|b| net_gain > b.net_gain) {
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    sse_reduction,
                    cost_penalty: penalty,
                    net_gain,
                });
            }
        }
    }
    best
}

/// Fits a depth-limited regression tree to `targets` over row-major
/// `features`, penalizing splits on features outside `charged` by
/// `cost_weight · costs[feature]`. Within one tree a feature is paid for at
/// most once: after its first split (in depth-first induction order) it is
/// free for the rest of the tree.
///
/// Nodes become leaves when fewer than 2 rows remain, the depth limit is hit,
/// targets are constant, or no candidate has positive net gain. Leaf values
/// are the row-order mean of their targets.
pub fn fit_tree(
    features: &[f64],
    num_features: usize,
    targets: &[f64],
    costs: &[f64],
    cost_weight: f64,
    max_depth: usize,
    charged: &BTreeSet<usize>,
) -> Result<RegressionTree> {
    if num_features == 0 {
        return Err(Error::Invalid("no feature columns".into()));
    }
    if !features.len().is_multiple_of(num_features) {
        return Err(Error::Dimension(format!(
            "{} feature values do not tile into rows of {}",
            features.len(),
            num_features
        )));
    }
    let rows = features.len() / num_features;
    if rows == 0 {
        return Err(Error::Invalid("no rows to fit".into()));
    }
    if targets.len() != rows {
        return Err(Error::Dimension(format!(
            "{} targets for {} rows",
            targets.len(),
            rows
        )));
    }
    if costs.len() != num_features {
        return Err(Error::Dimension(format!(
            "{} costs for {} features",
            costs.len(),
            num_features
        )));
    }
    if !(cost_weight.is_finite() && cost_weight >= 0.0) {
        return Err(Error::Invalid(format!(
            "cost weight must be finite and non-negative, got {}",
            cost_weight
        )));
    }
    if let Some(bad) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::Invalid(format!("non-finite target {}", bad)));
    }

    let mut nodes = Vec::new();
    let mut free = charged.clone();
    let all_rows: Vec<usize> = (0..rows).collect();
    build_node(
        features,
        num_features,
        targets,
        costs,
        cost_weight,
        max_depth,
        &all_rows,
        0,
        &mut free,
        &mut nodes,
    );

    let mut used_features = BTreeSet::new();
    for node in &nodes {
        if let Node::Split { feature, .. } = node {
            used_features.insert(*feature);
        }
    }
    Ok(RegressionTree {
        nodes,
        used_features,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    features: &[f64],
    num_features: usize,
    targets: &[f64],
    costs: &[f64],
    cost_weight: f64,
    max_depth: usize,
    rows: &[usize],
    depth: usize,
    free: &mut BTreeSet<usize>,
    nodes: &mut Vec<Node>,
) -> usize {
    let mean = rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64;
    let split = if depth < max_depth {
        best_split(
            features,
            num_features,
            rows,
            targets,
            costs,
            cost_weight,
            free,
        )
    } else {
        None
    };
    let Some(split) = split else {
        nodes.push(Node::Leaf { value: mean });
        return nodes.len() - 1;
    };

    // Paid (or already free): the feature is free for the rest of this tree,
    // including sibling subtrees induced after this one.
    free.insert(split.feature);

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| features[r * num_features + split.feature] < split.threshold);

    let here = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 }); // placeholder until children exist
    let left = build_node(
        features,
        num_features,
        targets,
        costs,
        cost_weight,
        max_depth,
        &left_rows,
        depth + 1,
        free,
        nodes,
    );
    let right = build_node(
        features,
        num_features,
        targets,
        costs,
        cost_weight,
        max_depth,
        &right_rows,
        depth + 1,
        free,
        nodes,
    );
    nodes[here] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    here
}
