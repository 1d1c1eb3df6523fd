use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, Result};
use crate::frame::FeatureFrame;

/// Regression tree. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the leaf constraint stops it; `Some(0)` is a stump
    /// with no split at all.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Cost-complexity parameter on the mean-squared-error scale.
    pub ccp_alpha: f64,
    /// Features drawn per split; `None` uses all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            ccp_alpha: 0.0,
            max_features: None,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(BaselineError::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if !(self.ccp_alpha >= 0.0) || !self.ccp_alpha.is_finite() {
            return Err(BaselineError::InvalidConfig(
                "ccp_alpha must be a finite non-negative number".into(),
            ));
        }
        if self.max_features == Some(0) {
            return Err(BaselineError::InvalidConfig(
                "max_features must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl TreeNode {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &FeatureFrame) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Leaf values in left-to-right order.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        fn walk(n: &TreeNode, out: &mut Vec<f64>) {
            match n {
                TreeNode::Leaf { value } => out.push(*value),
                TreeNode::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Preorder `[feature or -1, threshold, value]` triples.
    pub fn to_preorder(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        fn walk(n: &TreeNode, out: &mut Vec<[f64; 3]>) {
            match n {
                TreeNode::Leaf { value } => out.push([-1.0, 0.0, *value]),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push([*feature as f64, *threshold, 0.0]);
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn from_preorder(nodes: &[[f64; 3]]) -> Option<TreeNode> {
        fn build(nodes: &[[f64; 3]], pos: &mut usize) -> Option<TreeNode> {
            let [f, t, v] = *nodes.get(*pos)?;
            *pos += 1;
            if f < 0.0 {
                return Some(TreeNode::Leaf { value: v });
            }
            if f.fract() != 0.0 {
                return None;
            }
            let left = build(nodes, pos)?;
            let right = build(nodes, pos)?;
            Some(TreeNode::Split {
                feature: f as usize,
                threshold: t,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        let mut pos = 0;
        let tree = build(nodes, &mut pos)?;
        (pos == nodes.len()).then_some(tree)
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }

    /// True when every split feature index is below `n_features`.
    pub fn fits_width(&self, n_features: usize) -> bool {
        self.max_feature().is_none_or(|m| m < n_features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Reduction in summed squared error.
    pub gain: f64,
}

const TIE_RTOL: f64 = 1e-12;

fn sse(sum: f64, sumsq: f64, n: usize) -> f64 {
    (sumsq - sum * sum / n as f64).max(0.0)
}

/// Best split of `rows` over `features` (ascending). A candidate replaces the
/// incumbent only on strictly greater gain, so ties resolve to the lower
/// feature index and then the lower threshold.
fn find_split(
    data: &[f64],
    n_cols: usize,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| y[r] * y[r]).sum();
    let parent = sse(total, total_sq, n);
    if parent <= 0.0 {
        return None;
    }
    let mut best: Option<SplitCandidate> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (data[r * n_cols + f], y[r])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut ls = 0.0;
        let mut lsq = 0.0;
        for i in 1..n {
            let yv = pairs[i - 1].1;
            ls += yv;
            lsq += yv * yv;
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let (a, b) = (pairs[i - 1].0, pairs[i].0);
            if a >= b {
                continue;
            }
            let child = sse(ls, lsq, i) + sse(total - ls, total_sq - lsq, n - i);
            let gain = parent - child;
            // Identical partitions reached through different features give
            // gains that differ only by summation order, hence the slack.
            if gain > 0.0 && best.is_none_or(|bst| gain > bst.gain * (1.0 + TIE_RTOL)) {
                let mut threshold = 0.5 * (a + b);
                if threshold >= b {
                    threshold = a;
                }
                best = Some(SplitCandidate {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Best single split of the whole frame, considering every feature.
pub fn best_split(x: &FeatureFrame, y: &[f64], min_samples_leaf: usize) -> Option<SplitCandidate> {
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let features: Vec<usize> = (0..x.n_cols()).collect();
    find_split(x.data(), x.n_cols(), y, &rows, &features, min_samples_leaf.max(1))
}

struct Node {
    value: f64,
    sse: f64,
    split: Option<(usize, f64, usize, usize)>,
}

struct Grower<'a> {
    data: &'a [f64],
    n_cols: usize,
    y: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.n_cols;
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut f = sample(rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let sumsq: f64 = rows.iter().map(|&r| self.y[r] * self.y[r]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node {
            value: sum / n as f64,
            sse: sse(sum, sumsq, n),
            split: None,
        });
        if self.params.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let features = self.candidate_features();
        let Some(s) = find_split(
            self.data,
            self.n_cols,
            self.y,
            rows,
            &features,
            self.params.min_samples_leaf,
        ) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.data[r * self.n_cols + s.feature] <= s.threshold);
        let l = self.grow(&left, depth + 1);
        let r = self.grow(&right, depth + 1);
        self.nodes[id].split = Some((s.feature, s.threshold, l, r));
        id
    }

    /// Subtree risk and leaf count for every node, children before parents.
    fn subtree_stats(&self) -> Vec<(f64, usize)> {
        let mut stats = vec![(0.0, 0); self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            stats[i] = match self.nodes[i].split {
                None => (self.nodes[i].sse, 1),
                Some((_, _, l, r)) => (stats[l].0 + stats[r].0, stats[l].1 + stats[r].1),
            };
        }
        stats
    }

    fn reachable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some((_, _, l, r)) = self.nodes[i].split {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Weakest-link pruning. Returns the effective alphas at which nodes
    /// were collapsed, in order.
    fn prune(&mut self, alpha: f64, n_total: usize) -> Vec<f64> {
        let mut path = Vec::new();
        loop {
            // Children always have larger ids than parents, so the reverse
            // sweep in subtree_stats sees them first.
            let stats = self.subtree_stats();
            let mut weakest: Option<(usize, f64)> = None;
            for i in self.reachable() {
                if self.nodes[i].split.is_none() {
                    continue;
                }
                let (r_sub, leaves) = stats[i];
                let g = (self.nodes[i].sse - r_sub) / n_total as f64 / (leaves - 1) as f64;
                if weakest.is_none_or(|(_, w)| g < w) {
                    weakest = Some((i, g));
                }
            }
            match weakest {
                Some((i, g)) if g <= alpha => {
                    self.nodes[i].split = None;
                    path.push(g);
                }
                _ => break,
            }
        }
        path
    }

    fn to_tree(&self, i: usize) -> TreeNode {
        match self.nodes[i].split {
            None => TreeNode::Leaf {
                value: self.nodes[i].value,
            },
            Some((feature, threshold, l, r)) => TreeNode::Split {
                feature,
                threshold,
                left: Box::new(self.to_tree(l)),
                right: Box::new(self.to_tree(r)),
            },
        }
    }
}

/// Grows (and prunes) a tree on the given row multiset. Rows may repeat.
pub(crate) fn grow_tree(
    data: &[f64],
    n_cols: usize,
    y: &[f64],
    rows: &[usize],
    params: TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> TreeNode {
    let mut g = Grower {
        data,
        n_cols,
        y,
        params,
        rng,
        nodes: Vec::new(),
    };
    if rows.is_empty() {
        return TreeNode::Leaf { value: 0.0 };
    }
    g.grow(rows, 0);
    if params.ccp_alpha > 0.0 {
        g.prune(params.ccp_alpha, rows.len());
    }
    g.to_tree(0)
}

fn check_inputs(x: &FeatureFrame, y: &[f64], params: &TreeParams) -> Result<()> {
    params.validate()?;
    if y.len() != x.n_rows() {
        return Err(BaselineError::TargetLength {
            target: y.len(),
            rows: x.n_rows(),
        });
    }
    let needed = 2 * params.min_samples_leaf;
    if x.n_rows() < needed {
        return Err(BaselineError::TooFewRows {
            needed,
            got: x.n_rows(),
        });
    }
    Ok(())
}

/// Fits a single CART regression tree using all features.
pub fn tree_fit(x: &FeatureFrame, y: &[f64], params: TreeParams) -> Result<TreeNode> {
    check_inputs(x, y, &params)?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let params = TreeParams {
        max_features: None,
        ..params
    };
    Ok(grow_tree(x.data(), x.n_cols(), y, &rows, params, None))
}

/// Effective alphas of the full weakest-link sequence down to the root for
/// a tree grown under `params` (ignoring its `ccp_alpha`).
pub fn pruning_path(x: &FeatureFrame, y: &[f64], params: TreeParams) -> Result<Vec<f64>> {
    check_inputs(x, y, &params)?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut g = Grower {
        data: x.data(),
        n_cols: x.n_cols(),
        y,
        params: TreeParams {
            max_features: None,
            ..params
        },
        rng: None,
        nodes: Vec::new(),
    };
    g.grow(&rows, 0);
    Ok(g.prune(f64::INFINITY, rows.len()))
}
