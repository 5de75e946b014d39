//! Greedy CART regression trees with squared-error splitting.
//!
//! Splits are chosen by exhaustive scan over the midpoints between
//! consecutive distinct sorted feature values, maximising
//! `S_L^2 / n_L + S_R^2 / n_R` (equivalent to minimising the children's
//! summed squared error). Exact ties go to the lowest feature index, then the
//! lowest threshold. Routing sends `x[f] <= threshold` left.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::Regressor;
use crate::data::TabularDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 5,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
    max_depth: usize,
    n_features: usize,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { .. } => return at,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Depth of the deepest leaf; the root is depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Regressor for RegressionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }
}

/// Feature columns plus responses, the shared input of every tree routine.
pub(crate) struct Columns<'a> {
    pub cols: Vec<Vec<f64>>,
    pub y: &'a [f64],
}

impl<'a> Columns<'a> {
    pub fn new(ds: &'a TabularDataset) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..ds.n_features()).map(|j| ds.column(j)).collect();
        if cols.iter().flatten().chain(ds.targets()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("fit_tree"));
        }
        Ok(Columns { cols, y: ds.targets() })
    }

    fn d(&self) -> usize {
        self.cols.len()
    }

    /// Per-feature sample orders sorted by `(value, index)`.
    pub fn sorted_orders(&self, samples: &[u32]) -> Vec<Vec<u32>> {
        self.cols
            .iter()
            .map(|col| {
                let mut o = samples.to_vec();
                o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect()
    }

    fn node_sum(&self, order: &[u32]) -> f64 {
        order.iter().map(|&s| self.y[s as usize]).sum()
    }

    fn is_pure(&self, order: &[u32]) -> bool {
        let first = self.y[order[0] as usize];
        order.iter().all(|&s| self.y[s as usize] == first)
    }

    /// Stable partition of every order into the samples routed to `go_left`.
    fn route(&self, orders: &[Vec<u32>], feature: usize, threshold: f64, go_left: bool) -> Vec<Vec<u32>> {
        let col = &self.cols[feature];
        orders
            .iter()
            .map(|o| {
                o.iter()
                    .copied()
                    .filter(|&s| (col[s as usize] <= threshold) == go_left)
                    .collect()
            })
            .collect()
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid >= b {
        a
    } else {
        mid
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    /// Position in the feature's sorted order of the last left sample.
    boundary: usize,
    threshold: f64,
    gain: f64,
}

/// Gains within this relative distance of the best are treated as equal.
/// Removing or reordering rows changes summation order, so splits that induce
/// the same partition would otherwise be ranked by rounding noise.
const TIE_TOLERANCE: f64 = 1e-10;

fn tie_band(max_gain: f64) -> f64 {
    TIE_TOLERANCE * max_gain.abs()
}

fn lower_key(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Exhaustive split search. Every valid candidate is left in `all`, in
/// (feature, threshold) order.
fn scan(data: &Columns<'_>, orders: &[Vec<u32>], total: f64, min_leaf: usize, all: &mut Vec<Split>) -> Option<Split> {
    all.clear();
    let m = orders[0].len();
    for (f, order) in orders.iter().enumerate() {
        let col = &data.cols[f];
        let mut left = 0.0;
        for j in 0..m - 1 {
            left += data.y[order[j] as usize];
            let n_left = j + 1;
            let n_right = m - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let (a, b) = (col[order[j] as usize], col[order[j + 1] as usize]);
            if a >= b {
                continue;
            }
            let right = total - left;
            all.push(Split {
                feature: f,
                boundary: j,
                threshold: midpoint(a, b),
                gain: left * left / n_left as f64 + right * right / n_right as f64,
            });
        }
    }
    let max = all.iter().map(|c| c.gain).fold(f64::NEG_INFINITY, f64::max);
    all.iter().find(|c| c.gain >= max - tie_band(max)).copied()
}

pub fn fit_tree(ds: &TabularDataset, params: TreeParams) -> Result<RegressionTree> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data = Columns::new(ds)?;
    let samples: Vec<u32> = (0..ds.len() as u32).collect();
    let mut tree = RegressionTree {
        nodes: Vec::new(),
        max_depth: params.max_depth,
        n_features: ds.n_features(),
    };
    grow(&data, data.sorted_orders(&samples), 0, params, &mut tree.nodes);
    Ok(tree)
}

fn grow(data: &Columns<'_>, orders: Vec<Vec<u32>>, depth: usize, params: TreeParams, nodes: &mut Vec<TreeNode>) -> usize {
    let m = orders[0].len();
    let total = data.node_sum(&orders[0]);
    let at = nodes.len();
    let leaf = TreeNode::Leaf {
        value: total / m as f64,
        samples: m,
    };
    let min_leaf = params.min_leaf.max(1);
    if depth >= params.max_depth || m < 2 * min_leaf || data.is_pure(&orders[0]) || data.d() == 0 {
        nodes.push(leaf);
        return at;
    }
    let Some(split) = scan(data, &orders, total, min_leaf, &mut Vec::new()) else {
        nodes.push(leaf);
        return at;
    };
    nodes.push(leaf);
    let left_orders = data.route(&orders, split.feature, split.threshold, true);
    let right_orders = data.route(&orders, split.feature, split.threshold, false);
    drop(orders);
    let left = grow(data, left_orders, depth + 1, params, nodes);
    let right = grow(data, right_orders, depth + 1, params, nodes);
    nodes[at] = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}

// ---------------------------------------------------------------------------
// Leave-one-out predictions without n refits.
//
// The tree trained without sample i differs from the full tree only on the
// path that i's removal can disturb. At each node on that path the split
// search is redone with i removed, using the full node's prefix sums; only
// candidates whose full-data gain lies within 2 * max (mean - y_i)^2 of the
// best can win after removing one point, so that frontier is precomputed per
// node. Where the chosen split keeps the original partition, the walk
// continues into the original child; where it does not, the affected child is
// regrown along x_i's path only.
// ---------------------------------------------------------------------------

/// Up to two distinct response values and their counts; `distinct == 3`
/// means three or more.
#[derive(Debug, Clone, Copy)]
struct ValueSummary {
    distinct: u8,
    first: (f64, usize),
    second: (f64, usize),
}

impl ValueSummary {
    fn of(y: &[f64], order: &[u32]) -> Self {
        let mut s = ValueSummary {
            distinct: 0,
            first: (0.0, 0),
            second: (0.0, 0),
        };
        for &i in order {
            let v = y[i as usize];
            if s.distinct >= 1 && v == s.first.0 {
                s.first.1 += 1;
            } else if s.distinct >= 2 && v == s.second.0 {
                s.second.1 += 1;
            } else if s.distinct == 0 {
                s = ValueSummary { distinct: 1, first: (v, 1), ..s };
            } else if s.distinct == 1 {
                s = ValueSummary { distinct: 2, second: (v, 1), ..s };
            } else {
                s.distinct = 3;
                break;
            }
        }
        s
    }

    fn pure_without(&self, v: f64) -> bool {
        match self.distinct {
            1 => true,
            2 => (self.first.0 == v && self.first.1 == 1) || (self.second.0 == v && self.second.1 == 1),
            _ => false,
        }
    }
}

struct Profile {
    depth: usize,
    m: usize,
    sum: f64,
    y_lo: f64,
    y_hi: f64,
    values: ValueSummary,
    inner: Option<Internal>,
}

struct Internal {
    orders: Vec<Vec<u32>>,
    /// Feature values in each order.
    vals: Vec<Vec<f64>>,
    prefix: Vec<Vec<f64>>,
    best: Split,
    /// Candidates that can still win after removing one sample, by gain desc.
    frontier: Vec<Split>,
    /// Bounds over consecutive frontier blocks.
    blocks: Vec<Block>,
    left: usize,
    right: usize,
}

const BLOCK: usize = 16;

/// Removing a sample with response y from a side of size n and mean mu
/// changes the gain by `n (mu - y)^2 / (n - 1) - y^2`. A block records the
/// range of side means (sides of size at least 2) and the largest
/// `n / (n - 1)` over its candidates, which bounds that change for all of them.
struct Block {
    mean_lo: f64,
    mean_hi: f64,
    factor: f64,
}

impl Block {
    fn reach(&self, y: f64) -> f64 {
        self.factor * (self.mean_hi - y).powi(2).max((y - self.mean_lo).powi(2))
    }
}

/// A full tree annotated for leave-one-out queries.
pub(crate) struct LooTree<'a> {
    data: Rc<Columns<'a>>,
    params: TreeParams,
    nodes: Vec<Profile>,
    /// Subtrees for node sides that a removal turned into a child, keyed by
    /// (node, feature, canonical boundary, left side). Many held-out samples
    /// near a near-tie switch to the same alternative split.
    alternatives: RefCell<HashMap<(usize, usize, usize, bool), LooTree<'a>>>,
}

/// Candidate chosen at a node with one sample removed.
#[derive(Debug, Clone, Copy)]
struct Removed {
    feature: usize,
    threshold: f64,
    gain: f64,
    /// Canonical boundary: the remaining left set is positions `0..=key`
    /// of the feature order, minus the removed sample.
    key: usize,
    merged: bool,
}

impl<'a> LooTree<'a> {
    pub fn new(ds: &'a TabularDataset, params: TreeParams) -> Result<Self> {
        if ds.len() < 2 {
            return Err(Error::InvalidArgument("leave-one-out needs at least 2 rows".into()));
        }
        let data = Columns::new(ds)?;
        let samples: Vec<u32> = (0..ds.len() as u32).collect();
        let orders = data.sorted_orders(&samples);
        let params = TreeParams {
            min_leaf: params.min_leaf.max(1),
            ..params
        };
        Ok(Self::build(Rc::new(data), params, orders, 0))
    }

    fn build(data: Rc<Columns<'a>>, params: TreeParams, orders: Vec<Vec<u32>>, depth: usize) -> Self {
        let mut tree = LooTree {
            data,
            params,
            nodes: Vec::new(),
            alternatives: RefCell::new(HashMap::new()),
        };
        tree.grow(orders, depth);
        tree
    }

    fn grow(&mut self, orders: Vec<Vec<u32>>, depth: usize) -> usize {
        let data = &self.data;
        let m = orders[0].len();
        let sum = data.node_sum(&orders[0]);
        let (y_lo, y_hi) = orders[0].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            let v = data.y[s as usize];
            (lo.min(v), hi.max(v))
        });
        let at = self.nodes.len();
        self.nodes.push(Profile {
            depth,
            m,
            sum,
            y_lo,
            y_hi,
            values: ValueSummary::of(data.y, &orders[0]),
            inner: None,
        });
        let min_leaf = self.params.min_leaf;
        if depth >= self.params.max_depth || m < 2 * min_leaf || y_lo == y_hi || data.d() == 0 {
            return at;
        }
        let mut all = Vec::new();
        let Some(best) = scan(data, &orders, sum, min_leaf, &mut all) else {
            return at;
        };
        let range2 = (y_hi - y_lo).powi(2);
        let cutoff = best.gain - 2.0 * range2 - slack(best.gain.abs() + 2.0 * range2);
        let mut frontier: Vec<Split> = all.into_iter().filter(|c| c.gain >= cutoff).collect();
        frontier.sort_by(|a, b| {
            b.gain
                .total_cmp(&a.gain)
                .then(a.feature.cmp(&b.feature))
                .then(a.boundary.cmp(&b.boundary))
        });
        let prefix: Vec<Vec<f64>> = orders
            .iter()
            .map(|o| {
                o.iter()
                    .scan(0.0, |acc, &s| {
                        *acc += data.y[s as usize];
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let left_orders = data.route(&orders, best.feature, best.threshold, true);
        let right_orders = data.route(&orders, best.feature, best.threshold, false);
        let left = self.grow(left_orders, depth + 1);
        let right = self.grow(right_orders, depth + 1);
        let blocks = frontier
            .chunks(BLOCK)
            .map(|chunk| {
                let mut b = Block {
                    mean_lo: f64::INFINITY,
                    mean_hi: f64::NEG_INFINITY,
                    factor: 1.0,
                };
                for c in chunk {
                    let s_left = prefix[c.feature][c.boundary];
                    let n_left = c.boundary + 1;
                    for (n, total) in [(n_left, s_left), (m - n_left, sum - s_left)] {
                        if n >= 2 {
                            let mean = total / n as f64;
                            b.mean_lo = b.mean_lo.min(mean);
                            b.mean_hi = b.mean_hi.max(mean);
                            b.factor = b.factor.max(n as f64 / (n - 1) as f64);
                        }
                    }
                }
                b
            })
            .collect();
        let vals = orders
            .iter()
            .zip(&self.data.cols)
            .map(|(o, col)| o.iter().map(|&s| col[s as usize]).collect())
            .collect();
        self.nodes[at].inner = Some(Internal {
            orders,
            vals,
            prefix,
            best,
            frontier,
            blocks,
            left,
            right,
        });
        at
    }

    fn predict_from(&self, mut at: usize, x: &[f64]) -> f64 {
        loop {
            let node = &self.nodes[at];
            match &node.inner {
                None => return node.sum / node.m as f64,
                Some(inner) => {
                    at = if x[inner.best.feature] <= inner.best.threshold {
                        inner.left
                    } else {
                        inner.right
                    }
                }
            }
        }
    }

    /// Prediction at sample `i` of the tree grown without sample `i`.
    pub fn loo_prediction(&self, i: usize) -> f64 {
        let data = &self.data;
        let yi = data.y[i];
        let x: Vec<f64> = data.cols.iter().map(|c| c[i]).collect();
        let mut at = 0;
        loop {
            let node = &self.nodes[at];
            let m = node.m - 1;
            let reduced_mean = (node.sum - yi) / m as f64;
            let Some(inner) = &node.inner else {
                return reduced_mean;
            };
            if m < 2 * self.params.min_leaf || node.values.pure_without(yi) {
                return reduced_mean;
            }
            let positions: Vec<usize> = (0..data.d()).map(|f| self.position(inner, f, i)).collect();
            let Some(chosen) = self.search_without(node, inner, i, &positions) else {
                return reduced_mean;
            };
            let go_left = x[chosen.feature] <= chosen.threshold;

            let best = inner.best;
            let p = positions[best.feature];
            let same_partition = chosen.feature == best.feature
                && (chosen.key == best.boundary
                    || (chosen.merged && (best.boundary == p || best.boundary + 1 == p)));
            if same_partition {
                let i_went_left = p <= best.boundary;
                match (go_left, i_went_left) {
                    (true, true) => at = inner.left,
                    (false, false) => at = inner.right,
                    // x_i crosses to the sibling, whose data did not contain i.
                    (true, false) => return self.predict_from(inner.left, &x),
                    (false, true) => return self.predict_from(inner.right, &x),
                }
                continue;
            }

            // The partition changed: the child x_i falls into is one side of
            // the chosen split over the full node, less sample i if present.
            let side = (at, chosen.feature, chosen.key, go_left);
            let contains_i = (positions[chosen.feature] <= chosen.key) == go_left;
            let mut alternatives = self.alternatives.borrow_mut();
            let sub = alternatives.entry(side).or_insert_with(|| {
                let order = &inner.orders[chosen.feature];
                let members = if go_left { &order[..=chosen.key] } else { &order[chosen.key + 1..] };
                let mut keep = vec![false; data.y.len()];
                members.iter().for_each(|&s| keep[s as usize] = true);
                let orders = inner
                    .orders
                    .iter()
                    .map(|o| o.iter().copied().filter(|&s| keep[s as usize]).collect())
                    .collect();
                LooTree::build(Rc::clone(&self.data), self.params, orders, node.depth + 1)
            });
            return if contains_i {
                sub.loo_prediction(i)
            } else {
                sub.predict_from(0, &x)
            };
        }
    }

    fn position(&self, inner: &Internal, f: usize, i: usize) -> usize {
        let col = &self.data.cols[f];
        let key = col[i];
        inner.orders[f]
            .binary_search_by(|&s| col[s as usize].total_cmp(&key).then((s as usize).cmp(&i)))
            .expect("sample belongs to node")
    }

    /// The node's candidate `(f, j)` evaluated with sample `i` removed.
    fn evaluate(&self, node: &Profile, inner: &Internal, f: usize, j: usize, i: usize, p: usize) -> Option<Removed> {
        let vals = &inner.vals[f];
        let prefix = &inner.prefix[f];
        let m = node.m;
        let yi = self.data.y[i];
        let val = |q: usize| vals[q];
        let unique = (p == 0 || val(p - 1) < val(p)) && (p + 1 == m || val(p + 1) > val(p));
        let min_leaf = self.params.min_leaf;

        if unique && (j == p || j + 1 == p) {
            // Removing a sample with a unique value merges the boundaries on
            // either side of it into one.
            if p == 0 || p + 1 == m {
                return None;
            }
            let key = p - 1;
            let (n_left, n_right) = (p, m - 1 - p);
            if n_left < min_leaf || n_right < min_leaf {
                return None;
            }
            let left = prefix[key];
            let right = node.sum - prefix[key] - yi;
            return Some(Removed {
                feature: f,
                threshold: midpoint(val(p - 1), val(p + 1)),
                gain: left * left / n_left as f64 + right * right / n_right as f64,
                key,
                merged: true,
            });
        }

        let (n_left, left, n_right, right) = if p <= j {
            (j, prefix[j] - yi, m - 1 - j, node.sum - prefix[j])
        } else {
            (j + 1, prefix[j], m - j - 2, node.sum - prefix[j] - yi)
        };
        if n_left < min_leaf || n_right < min_leaf {
            return None;
        }
        Some(Removed {
            feature: f,
            threshold: midpoint(val(j), val(j + 1)),
            gain: left * left / n_left as f64 + right * right / n_right as f64,
            key: j,
            merged: false,
        })
    }

    fn search_without(&self, node: &Profile, inner: &Internal, i: usize, positions: &[usize]) -> Option<Removed> {
        let yi = self.data.y[i];
        let m = node.m;
        let min_leaf = self.params.min_leaf;
        let mut found: Vec<Removed> = Vec::new();
        let mut merged_seen = vec![false; self.data.d()];
        let mut max = f64::NEG_INFINITY;
        let mut consider = |c: Removed, found: &mut Vec<Removed>, max: &mut f64| {
            if c.merged {
                if merged_seen[c.feature] {
                    return;
                }
                merged_seen[c.feature] = true;
            }
            if c.gain > *max {
                *max = c.gain;
            }
            if c.gain >= *max - tie_band(*max) {
                found.push(c);
            }
        };

        let b = inner.best;
        let original_survives = self.evaluate(node, inner, b.feature, b.boundary, i, positions[b.feature]).is_some();
        if original_survives {
            let unique: Vec<bool> = positions
                .iter()
                .zip(&inner.vals)
                .map(|(&p, v)| (p == 0 || v[p - 1] < v[p]) && (p + 1 == m || v[p + 1] > v[p]))
                .collect();
            let global_reach = 2.0 * (node.y_hi - yi).powi(2).max((yi - node.y_lo).powi(2));
            for (chunk, block) in inner.frontier.chunks(BLOCK).zip(&inner.blocks) {
                let floor = max - tie_band(max) - slack(max);
                if chunk[0].gain - yi * yi + global_reach < floor {
                    break;
                }
                if chunk[0].gain - yi * yi + block.reach(yi) < floor {
                    continue;
                }
                for cand in chunk {
                    let (f, j) = (cand.feature, cand.boundary);
                    let p = positions[f];
                    if unique[f] && (j == p || j + 1 == p) {
                        if let Some(c) = self.evaluate(node, inner, f, j, i, p) {
                            consider(c, &mut found, &mut max);
                        }
                        continue;
                    }
                    let pre = inner.prefix[f][j];
                    let (n_left, left, n_right, right) = if p <= j {
                        (j, pre - yi, m - 1 - j, node.sum - pre)
                    } else {
                        (j + 1, pre, m - j - 2, node.sum - pre - yi)
                    };
                    if n_left < min_leaf || n_right < min_leaf {
                        continue;
                    }
                    let gain = left * left / n_left as f64 + right * right / n_right as f64;
                    let c = Removed {
                        feature: f,
                        threshold: cand.threshold,
                        gain,
                        key: j,
                        merged: false,
                    };
                    consider(c, &mut found, &mut max);
                }
            }
        } else {
            // The frontier bound needs the original best as a witness.
            for (f, v) in inner.vals.iter().enumerate() {
                for j in 0..m - 1 {
                    if v[j] < v[j + 1] {
                        if let Some(c) = self.evaluate(node, inner, f, j, i, positions[f]) {
                            consider(c, &mut found, &mut max);
                        }
                    }
                }
            }
        }
        found
            .into_iter()
            .filter(|c| c.gain >= max - tie_band(max))
            .reduce(|a, c| if lower_key((c.feature, c.threshold), (a.feature, a.threshold)) { c } else { a })
    }
}

fn slack(gain: f64) -> f64 {
    1e-9 * gain.abs().max(1.0)
}

/// `out[i]` is the prediction at row `i` of the tree fitted without row `i`.
pub fn tree_loo_predictions(ds: &TabularDataset, params: TreeParams) -> Result<Vec<f64>> {
    let tree = LooTree::new(ds, params)?;
    Ok((0..ds.len()).map(|i| tree.loo_prediction(i)).collect())
}
