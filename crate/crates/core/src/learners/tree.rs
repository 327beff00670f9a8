//! Binary regression trees shared by CART, random forests, boosting and the
//! conditional-inference forest.

use std::cell::RefCell;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tabular::{Feature, FeatureMatrix};

/// Routing rule at an internal node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Split {
    /// Continuous: rows with `x <= threshold` go left.
    Threshold(f64),
    /// Categorical: rows whose level index is flagged go left.
    Levels(Vec<bool>),
}

impl Split {
    #[inline]
    pub fn goes_left(&self, v: f64) -> bool {
        match self {
            Split::Threshold(t) => v <= *t,
            Split::Levels(mask) => mask.get(v as usize).copied().unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
        n: usize,
    },
    Internal {
        feature: usize,
        split: Split,
        left: usize,
        right: usize,
    },
}

/// Tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, n: usize) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, n }],
        }
    }

    /// Predict with feature values supplied by `get(feature_index)`.
    #[inline]
    pub fn predict_with(&self, get: impl Fn(usize) -> f64) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value, .. } => return *value,
                Node::Internal {
                    feature,
                    split,
                    left,
                    right,
                } => k = if split.goes_left(get(*feature)) { *left } else { *right },
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        self.predict_with(|j| x.value(j, row))
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_row(x, i)).collect()
    }

    pub fn is_leaf_only(&self) -> bool {
        matches!(self.nodes[0], Node::Leaf { .. })
    }

    pub fn uses_feature(&self, j: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, Node::Internal { feature, .. } if *feature == j))
    }

    pub fn root_feature(&self) -> Option<usize> {
        match &self.nodes[0] {
            Node::Internal { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match &t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per node; `None` means all.
    pub mtry: Option<usize>,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: 6,
            min_leaf: 10,
            mtry: None,
        }
    }
}

/// Best split found for one feature at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSplit {
    pub feature: usize,
    pub split: Split,
    pub gain: f64,
    /// Position along the scan; lower wins ties within a feature.
    pub order: usize,
}

thread_local! {
    static PAIRS: RefCell<Vec<(f64, f64)>> = const { RefCell::new(Vec::new()) };
}

/// Greedy variance-reduction split search over one feature. `rows` may
/// contain duplicates (bootstrap samples).
pub fn best_variance_split(
    x: &FeatureMatrix,
    y: &[f64],
    rows: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<CandidateSplit> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let parent = total * total / n as f64;
    match &x.features[feature] {
        Feature::Continuous(v) => PAIRS.with(|buf| {
            let mut pairs = buf.borrow_mut();
            pairs.clear();
            pairs.extend(rows.iter().map(|&i| (v[i], y[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut best: Option<CandidateSplit> = None;
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += pairs[k - 1].1;
                if k < min_leaf.max(1) || n - k < min_leaf.max(1) || pairs[k - 1].0 >= pairs[k].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(CandidateSplit {
                        feature,
                        split: Split::Threshold(0.5 * (pairs[k - 1].0 + pairs[k].0)),
                        gain,
                        order: k,
                    });
                }
            }
            best
        }),
        Feature::Categorical { codes, levels } => {
            let scores: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let cats: Vec<u32> = rows.iter().map(|&i| codes[i]).collect();
            let ordered = order_levels_by_mean(&cats, &scores, levels.len());
            let mut best: Option<CandidateSplit> = None;
            let (mut left_n, mut left_sum) = (0usize, 0.0);
            for cut in 0..ordered.len().saturating_sub(1) {
                let (_, cnt, sum) = ordered[cut];
                left_n += cnt;
                left_sum += sum;
                if left_n < min_leaf.max(1) || n - left_n < min_leaf.max(1) {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain =
                    left_sum * left_sum / left_n as f64 + right_sum * right_sum / (n - left_n) as f64 - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut mask = vec![false; levels.len()];
                    ordered[..=cut].iter().for_each(|&(l, _, _)| mask[l] = true);
                    best = Some(CandidateSplit {
                        feature,
                        split: Split::Levels(mask),
                        gain,
                        order: cut,
                    });
                }
            }
            best
        }
    }
}

/// Levels present among `codes`, ordered by mean score (ties by level
/// index), as `(level, count, score_sum)`.
pub fn order_levels_by_mean(codes: &[u32], scores: &[f64], n_levels: usize) -> Vec<(usize, usize, f64)> {
    let mut count = vec![0usize; n_levels];
    let mut sum = vec![0.0; n_levels];
    for (&c, &s) in codes.iter().zip(scores) {
        count[c as usize] += 1;
        sum[c as usize] += s;
    }
    let mut present: Vec<(usize, usize, f64)> =
        (0..n_levels).filter(|&l| count[l] > 0).map(|l| (l, count[l], sum[l])).collect();
    present.sort_by(|a, b| {
        (a.2 / a.1 as f64)
            .total_cmp(&(b.2 / b.1 as f64))
            .then(a.0.cmp(&b.0))
    });
    present
}

/// Draw `mtry` distinct candidate features (ascending), or all when `mtry`
/// is `None` or at least `p`.
pub fn candidate_features<R: Rng>(p: usize, mtry: Option<usize>, rng: &mut R) -> Vec<usize> {
    match mtry {
        Some(m) if m < p => {
            let mut v = rand::seq::index::sample(rng, p, m.max(1)).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..p).collect(),
    }
}

/// Grow a regression tree by greedy variance reduction over `rows`.
pub fn grow_cart<R: Rng>(
    x: &FeatureMatrix,
    y: &[f64],
    rows: Vec<usize>,
    params: &CartParams,
    rng: &mut R,
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    grow_node(x, y, rows, 0, params, rng, &mut tree);
    tree
}

fn grow_node<R: Rng>(
    x: &FeatureMatrix,
    y: &[f64],
    rows: Vec<usize>,
    depth: usize,
    params: &CartParams,
    rng: &mut R,
    tree: &mut Tree,
) -> usize {
    let id = tree.nodes.len();
    let n = rows.len();
    let mean = if n == 0 { 0.0 } else { rows.iter().map(|&i| y[i]).sum::<f64>() / n as f64 };
    tree.nodes.push(Node::Leaf { value: mean, n });
    if depth >= params.max_depth || n < 2 * params.min_leaf.max(1) {
        return id;
    }
    let sse: f64 = rows.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    let scale: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
    if sse <= 1e-12 * scale || sse == 0.0 {
        return id;
    }
    let mut best: Option<CandidateSplit> = None;
    for j in candidate_features(x.n_features(), params.mtry, rng) {
        if let Some(c) = best_variance_split(x, y, &rows, j, params.min_leaf) {
            if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
    }
    let Some(best) = best.filter(|b| b.gain > 1e-12 * sse) else {
        return id;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| best.split.goes_left(x.value(best.feature, i)));
    drop(rows);
    let left = grow_node(x, y, left_rows, depth + 1, params, rng, tree);
    let right = grow_node(x, y, right_rows, depth + 1, params, rng, tree);
    tree.nodes[id] = Node::Internal {
        feature: best.feature,
        split: best.split,
        left,
        right,
    };
    id
}

/// Threshold split over rows already sorted by the feature's value.
fn best_sorted_split(
    v: &[f64],
    y: &[f64],
    sorted: &[usize],
    feature: usize,
    min_leaf: usize,
    total: f64,
) -> Option<CandidateSplit> {
    let n = sorted.len();
    let m = min_leaf.max(1);
    let parent = total * total / n as f64;
    let mut best: Option<CandidateSplit> = None;
    let mut left_sum = 0.0;
    for k in 1..n {
        let (prev, next) = (sorted[k - 1], sorted[k]);
        left_sum += y[prev];
        if k < m || n - k < m || v[prev] >= v[next] {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - parent;
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(CandidateSplit {
                feature,
                split: Split::Threshold(0.5 * (v[prev] + v[next])),
                gain,
                order: k,
            });
        }
    }
    best
}

/// Per-feature row orders for [`grow_cart_presorted`]: ascending value,
/// ties by row index. Empty for categorical features.
pub fn presort(x: &FeatureMatrix) -> Vec<Vec<usize>> {
    x.features
        .iter()
        .map(|f| match f {
            Feature::Continuous(v) => {
                let mut idx: Vec<usize> = (0..v.len()).collect();
                idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
                idx
            }
            Feature::Categorical { .. } => Vec::new(),
        })
        .collect()
}

/// Same tree as [`grow_cart`] on all rows with every feature a candidate,
/// but continuous features are scanned in a precomputed order instead of
/// being sorted at every node.
pub fn grow_cart_presorted(x: &FeatureMatrix, y: &[f64], order: &[Vec<usize>], params: &CartParams) -> Tree {
    let n = x.n_rows();
    let mut g = SortedGrowth {
        x,
        y,
        params,
        // Last list: the rows in index order.
        lists: order.iter().cloned().chain(std::iter::once((0..n).collect())).collect(),
        left_mask: vec![false; n],
        scratch: Vec::with_capacity(n),
        tree: Tree { nodes: Vec::new() },
    };
    g.grow(0, n, 0);
    g.tree
}

/// Per-feature row lists; a node owns the same index range in every list.
struct SortedGrowth<'a> {
    x: &'a FeatureMatrix,
    y: &'a [f64],
    params: &'a CartParams,
    lists: Vec<Vec<usize>>,
    left_mask: Vec<bool>,
    scratch: Vec<usize>,
    tree: Tree,
}

impl SortedGrowth<'_> {
    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let (x, y, params) = (self.x, self.y, self.params);
        let id = self.tree.nodes.len();
        let n = hi - lo;
        let rows = &self.lists[self.lists.len() - 1][lo..hi];
        let total: f64 = rows.iter().map(|&i| y[i]).sum();
        let mean = if n == 0 { 0.0 } else { total / n as f64 };
        self.tree.nodes.push(Node::Leaf { value: mean, n });
        if depth >= params.max_depth || n < 2 * params.min_leaf.max(1) {
            return id;
        }
        let sse: f64 = rows.iter().map(|&i| (y[i] - mean).powi(2)).sum();
        let scale: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
        if sse <= 1e-12 * scale || sse == 0.0 {
            return id;
        }
        let mut best: Option<CandidateSplit> = None;
        for (j, f) in x.features.iter().enumerate() {
            let c = match f {
                Feature::Continuous(v) => best_sorted_split(v, y, &self.lists[j][lo..hi], j, params.min_leaf, total),
                Feature::Categorical { .. } => best_variance_split(x, y, rows, j, params.min_leaf),
            };
            if let Some(c) = c {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best.filter(|b| b.gain > 1e-12 * sse) else {
            return id;
        };
        let mut n_left = 0;
        for &i in rows {
            let l = best.split.goes_left(x.value(best.feature, i));
            self.left_mask[i] = l;
            n_left += usize::from(l);
        }
        for list in self.lists.iter_mut() {
            if list.is_empty() {
                continue;
            }
            stable_partition(&mut list[lo..hi], &self.left_mask, &mut self.scratch);
        }
        let left = self.grow(lo, lo + n_left, depth + 1);
        let right = self.grow(lo + n_left, hi, depth + 1);
        self.tree.nodes[id] = Node::Internal {
            feature: best.feature,
            split: best.split,
            left,
            right,
        };
        id
    }
}

/// Move rows flagged in `left` to the front, keeping relative order on
/// both sides.
fn stable_partition(seg: &mut [usize], left: &[bool], scratch: &mut Vec<usize>) {
    scratch.clear();
    let mut w = 0;
    for k in 0..seg.len() {
        let i = seg[k];
        if left[i] {
            seg[w] = i;
            w += 1;
        } else {
            scratch.push(i);
        }
    }
    seg[w..].copy_from_slice(scratch);
}

/// Fit a single CART regression tree on all rows.
pub fn fit_cart(x: &FeatureMatrix, y: &[f64], params: &CartParams, seed: u64) -> Tree {
    let mut rng = crate::rng::stream(seed, crate::rng::Domain::ForestTree, &[u64::MAX]);
    grow_cart(x, y, (0..x.n_rows()).collect(), params, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_response_is_single_leaf() {
        let x = FeatureMatrix::from_columns(vec![(0..50).map(|i| i as f64).collect()]);
        let y = vec![3.25; 50];
        let t = fit_cart(&x, &y, &CartParams::default(), 1);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&x, 7), 3.25);
    }

    #[test]
    fn step_function_splits_once_between_groups() {
        let xs: Vec<f64> = (0..100).map(|i| if i < 50 { -1.0 - i as f64 * 0.01 } else { 0.5 + i as f64 * 0.01 }).collect();
        let y: Vec<f64> = xs.iter().map(|&v| f64::from(v > 0.0)).collect();
        let x = FeatureMatrix::from_columns(vec![xs.clone()]);
        let t = fit_cart(&x, &y, &CartParams::default(), 1);
        assert_eq!(t.depth(), 1);
        let max_neg = xs.iter().copied().filter(|v| *v < 0.0).fold(f64::MIN, f64::max);
        let min_pos = xs.iter().copied().filter(|v| *v > 0.0).fold(f64::MAX, f64::min);
        match &t.nodes[0] {
            Node::Internal { split: Split::Threshold(th), .. } => assert!(*th > max_neg && *th <= min_pos),
            other => panic!("{other:?}"),
        }
        assert_eq!(t.predict(&x), y);
    }

    #[test]
    fn categorical_subset_split() {
        let codes: Vec<u32> = (0..60).map(|i| (i % 3) as u32).collect();
        let y: Vec<f64> = codes.iter().map(|&c| if c == 1 { 5.0 } else { 0.0 }).collect();
        let x = FeatureMatrix::new(
            vec!["g".into()],
            vec![Feature::Categorical { codes, levels: vec!["a".into(), "b".into(), "c".into()] }],
        )
        .unwrap();
        let t = fit_cart(&x, &y, &CartParams { min_leaf: 5, ..Default::default() }, 0);
        match &t.nodes[0] {
            Node::Internal { split: Split::Levels(mask), .. } => assert_eq!(mask, &vec![true, false, true]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn presorted_growth_matches_plain() {
        let n = 120;
        let cols: Vec<Vec<f64>> = (0..3).map(|j| (0..n).map(|i| ((i * (5 + 2 * j) + 3 * j) % 17) as f64).collect()).collect();
        let mut feats: Vec<Feature> = cols.into_iter().map(Feature::Continuous).collect();
        feats.push(Feature::Categorical {
            codes: (0..n).map(|i| (i % 3) as u32).collect(),
            levels: vec!["a".into(), "b".into(), "c".into()],
        });
        let x = FeatureMatrix::new(vec!["a".into(), "b".into(), "c".into(), "d".into()], feats).unwrap();
        let y: Vec<f64> = (0..n).map(|i| (x.value(0, i) - 8.0).abs() + 2.0 * x.value(3, i) + ((i * 7) % 5) as f64).collect();
        let params = CartParams { max_depth: 4, min_leaf: 5, mtry: None };
        let mut rng = crate::rng::stream(1, crate::rng::Domain::ForestTree, &[]);
        let plain = grow_cart(&x, &y, (0..n).collect(), &params, &mut rng);
        assert_eq!(grow_cart_presorted(&x, &y, &presort(&x), &params), plain);
    }

    #[test]
    fn respects_min_leaf_and_depth() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64).collect();
        let y: Vec<f64> = xs.iter().map(|v| (v / 10.0).sin()).collect();
        let x = FeatureMatrix::from_columns(vec![xs]);
        let t = fit_cart(&x, &y, &CartParams { max_depth: 4, min_leaf: 7, mtry: None }, 0);
        assert!(t.depth() <= 4);
        assert!(t.nodes.iter().all(|n| !matches!(n, Node::Leaf { n, .. } if *n < 7)));
    }
}
