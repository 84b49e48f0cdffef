use crate::features::Class;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: None, min_leaf: 2 }
    }
}

/// Tree nodes in preorder. A split's left child is the next node; rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, right: usize },
    Leaf { probs: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
}

impl DecisionTree {
    /// Validates preorder structure: every split's right child lies after
    /// its left subtree and inside the node list.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, String> {
        fn walk(nodes: &[Node], at: usize) -> Result<usize, String> {
            match nodes.get(at) {
                None => Err(format!("node {at} missing")),
                Some(Node::Leaf { probs }) => {
                    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (probs[0] + probs[1] - 1.0).abs() > 1e-12 {
                        return Err(format!("leaf {at} probabilities {probs:?} do not sum to 1"));
                    }
                    Ok(at + 1)
                }
                Some(Node::Split { right, threshold, .. }) => {
                    if !threshold.is_finite() {
                        return Err(format!("split {at} has non-finite threshold"));
                    }
                    let after_left = walk(nodes, at + 1)?;
                    if *right != after_left {
                        return Err(format!("split {at} right child {right}, expected {after_left}"));
                    }
                    walk(nodes, *right)
                }
            }
        }
        let end = walk(&nodes, 0)?;
        if end != nodes.len() {
            return Err(format!("{} trailing nodes", nodes.len() - end));
        }
        Ok(DecisionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn leaf_probs(&self, x: &[f64]) -> [f64; 2] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return *probs,
                Node::Split { feature, threshold, right } => {
                    at = if x[*feature] <= *threshold { at + 1 } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> (usize, usize) {
            match &nodes[at] {
                Node::Leaf { .. } => (0, at + 1),
                Node::Split { right, .. } => {
                    let (l, _) = go(nodes, at + 1);
                    let (r, end) = go(nodes, *right);
                    (1 + l.max(r), end)
                }
            }
        }
        go(&self.nodes, 0).0
    }
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (counts[0] as f64 / n, counts[1] as f64 / n);
    1.0 - a * a - b * b
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

const GAIN_EPS: f64 = 1e-12;

/// Greedy CART induction with Gini impurity.
///
/// Candidate thresholds are midpoints between consecutive distinct values.
/// The best split maximises impurity decrease; ties go to the lowest
/// feature, then the lowest threshold. A node becomes a leaf when it is
/// pure, at `max_depth`, or has no admissible split (every candidate would
/// leave a child below `min_leaf`, or all rows share their feature values).
pub fn tree_train(rows: &[Vec<f64>], labels: &[Class], params: &TreeParams) -> DecisionTree {
    assert_eq!(rows.len(), labels.len(), "rows and labels differ in length");
    assert!(!rows.is_empty(), "tree needs at least one row");
    let mut nodes = Vec::new();
    let mut indices: Vec<usize> = (0..rows.len()).collect();
    grow(rows, labels, params, &mut indices, 0, &mut nodes);
    DecisionTree { nodes }
}

fn grow(
    rows: &[Vec<f64>],
    labels: &[Class],
    params: &TreeParams,
    idx: &mut [usize],
    depth: usize,
    nodes: &mut Vec<Node>,
) {
    let mut counts = [0usize; 2];
    for &i in idx.iter() {
        counts[labels[i].index()] += 1;
    }
    let n = idx.len();
    let leaf = |counts: [usize; 2]| Node::Leaf {
        probs: [counts[0] as f64 / n as f64, counts[1] as f64 / n as f64],
    };

    let pure = counts[0] == 0 || counts[1] == 0;
    let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
    let min_leaf = params.min_leaf.max(1);
    if pure || depth_capped || n < 2 * min_leaf {
        nodes.push(leaf(counts));
        return;
    }

    let Some((feature, threshold)) = best_split(rows, labels, idx, counts, min_leaf) else {
        nodes.push(leaf(counts));
        return;
    };

    // stable partition keeps row order deterministic
    let (mut left, mut right): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| rows[i][feature] <= threshold);
    let at = nodes.len();
    nodes.push(Node::Split { feature, threshold, right: 0 });
    grow(rows, labels, params, &mut left, depth + 1, nodes);
    let right_at = nodes.len();
    if let Node::Split { right, .. } = &mut nodes[at] {
        *right = right_at;
    }
    grow(rows, labels, params, &mut right, depth + 1, nodes);
}

fn best_split(
    rows: &[Vec<f64>],
    labels: &[Class],
    idx: &[usize],
    counts: [usize; 2],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = idx.len();
    let parent = gini(counts);
    let p = rows[idx[0]].len();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<usize> = idx.to_vec();

    for f in 0..p {
        order.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
        let mut left = [0usize; 2];
        for k in 0..n - 1 {
            left[labels[order[k]].index()] += 1;
            let (lo, hi) = (rows[order[k]][f], rows[order[k + 1]][f]);
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let weighted = (n_left as f64 * gini(left) + (n - n_left) as f64 * gini(right)) / n as f64;
            let gain = parent - weighted;
            if best.is_none_or(|(g, _, _)| gain > g + GAIN_EPS) {
                best = Some((gain, f, midpoint(lo, hi)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
