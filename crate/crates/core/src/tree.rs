//! CART-style regression trees: the shared base learner for forests,
//! boosting and EBM term fitting.
//!
//! Trees are grown by greedy top-down exact split search over sorted
//! feature values. Every node records its cover (training-sample count
//! reaching it), which the Shapley attribution engine uses to weight
//! unvisited branches. Thresholds sit at the midpoint of adjacent distinct
//! values and route strictly-less-than to the left, so tie behavior is
//! deterministic and testable.

use rand::seq::index::sample as index_sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Node arena entry; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training samples reaching this node.
        cover: f64,
    },
    Leaf { value: f64, cover: f64 },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Internal { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitObjective {
    /// Maximize SSE reduction; leaf value is the target mean. On 0/1
    /// targets this ranks splits identically to Gini impurity.
    Variance,
    /// Maximize the second-order gain
    /// `0.5 * (G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l))`
    /// with leaf value `-G/(H+l)`.
    NewtonGain { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    /// floor(sqrt(d)), at least 1.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).clamp(1, d),
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// None = unlimited depth.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub objective: SplitObjective,
    /// Used only when feature subsampling is active.
    pub rng_seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
            objective: SplitObjective::Variance,
            rng_seed: 0,
        }
    }
}

/// Fit targets. `Values` pairs with [`SplitObjective::Variance`],
/// `GradHess` with [`SplitObjective::NewtonGain`].
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Values(&'a [f64]),
    GradHess { grad: &'a [f64], hess: &'a [f64] },
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Values(v) => v.len(),
            Targets::GradHess { grad, .. } => grad.len(),
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Targets::Values(v) => v.iter().all(|t| t.is_finite()),
            Targets::GradHess { grad, hess } => {
                grad.iter().all(|t| t.is_finite()) && hess.iter().all(|t| t.is_finite())
            }
        }
    }
}

/// Sufficient statistics for either objective: (sum, sum of squares, n)
/// for variance, (G, H, n) for Newton.
#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    a: f64,
    b: f64,
    n: f64,
}

impl Stats {
    fn add(&mut self, a: f64, b: f64) {
        self.a += a;
        self.b += b;
        self.n += 1.0;
    }

    fn sub(&mut self, a: f64, b: f64) {
        self.a -= a;
        self.b -= b;
        self.n -= 1.0;
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    targets: Targets<'a>,
    params: TreeParams,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    subsample: bool,
}

pub fn fit_tree(x: &Matrix, targets: Targets<'_>, params: &TreeParams) -> Result<Tree> {
    fit_tree_on(x, targets, params, &(0..x.n_rows()).collect::<Vec<_>>())
}

/// Fit on a subset of rows (bootstrap indices may repeat).
pub fn fit_tree_on(
    x: &Matrix,
    targets: Targets<'_>,
    params: &TreeParams,
    rows: &[usize],
) -> Result<Tree> {
    if rows.is_empty() || x.n_rows() == 0 {
        return Err(Error::Config("cannot fit a tree on zero samples".into()));
    }
    if targets.len() != x.n_rows() {
        return Err(Error::Integrity(format!(
            "targets length {} does not match {} rows",
            targets.len(),
            x.n_rows()
        )));
    }
    if !targets.all_finite() {
        return Err(Error::Integrity("non-finite fit targets".into()));
    }
    match (params.objective, &targets) {
        (SplitObjective::Variance, Targets::Values(_)) => {}
        (SplitObjective::NewtonGain { .. }, Targets::GradHess { .. }) => {}
        _ => {
            return Err(Error::Config(
                "objective and target kind disagree (Variance needs values, NewtonGain needs grad/hess)"
                    .into(),
            ))
        }
    }
    let d = x.n_cols();
    let subsample = params.max_features.resolve(d) < d;
    let mut builder = Builder {
        x,
        targets,
        params: *params,
        nodes: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
        subsample,
    };
    let mut rows = rows.to_vec();
    builder.grow(&mut rows, 0);
    Ok(Tree { nodes: builder.nodes })
}

impl Builder<'_> {
    fn stat_of(&self, row: usize) -> (f64, f64) {
        match self.targets {
            Targets::Values(v) => (v[row], v[row] * v[row]),
            Targets::GradHess { grad, hess } => (grad[row], hess[row]),
        }
    }

    fn leaf_value(&self, s: &Stats) -> f64 {
        match self.params.objective {
            SplitObjective::Variance => s.a / s.n,
            SplitObjective::NewtonGain { lambda } => {
                let denom = s.b + lambda;
                if denom.abs() < 1e-300 {
                    0.0
                } else {
                    -s.a / denom
                }
            }
        }
    }

    /// Objective value of a candidate side; splits maximize the summed
    /// child objectives minus the parent's.
    fn objective_term(&self, s: &Stats) -> f64 {
        match self.params.objective {
            // SSE reduction expands to sum^2/n terms; the sum-of-squares
            // part cancels between parent and children.
            SplitObjective::Variance => s.a * s.a / s.n,
            SplitObjective::NewtonGain { lambda } => s.a * s.a / (s.b + lambda),
        }
    }

    fn gain(&self, left: &Stats, right: &Stats, parent: &Stats) -> f64 {
        let raw =
            self.objective_term(left) + self.objective_term(right) - self.objective_term(parent);
        match self.params.objective {
            SplitObjective::Variance => raw,
            SplitObjective::NewtonGain { .. } => 0.5 * raw,
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let mut parent = Stats::default();
        for &r in rows.iter() {
            let (a, b) = self.stat_of(r);
            parent.add(a, b);
        }
        let cover = rows.len() as f64;
        let value = self.leaf_value(&parent);

        let depth_ok = self.params.max_depth.map_or(true, |m| depth < m);
        if !depth_ok || rows.len() < self.params.min_samples_split {
            return self.push_leaf(value, cover);
        }

        let split = self.best_split(rows, &parent);
        let Some(split) = split else {
            return self.push_leaf(value, cover);
        };

        // Partition rows in place around the chosen threshold.
        let mut lo = 0;
        let mut hi = rows.len();
        while lo < hi {
            if self.x.get(rows[lo], split.feature) < split.threshold {
                lo += 1;
            } else {
                hi -= 1;
                rows.swap(lo, hi);
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(lo);
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let idx = self.nodes.len();
        self.nodes.push(Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
            cover,
        });
        let left = self.grow_child(left_rows, depth + 1);
        let right = self.grow_child(right_rows, depth + 1);
        if let Node::Internal { left: l, right: r, .. } = &mut self.nodes[idx] {
            *l = left;
            *r = right;
        }
        idx
    }

    fn grow_child(&mut self, rows: &mut [usize], depth: usize) -> usize {
        self.grow(rows, depth)
    }

    fn push_leaf(&mut self, value: f64, cover: f64) -> usize {
        self.nodes.push(Node::Leaf { value, cover });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.n_cols();
        if !self.subsample {
            return (0..d).collect();
        }
        let k = self.params.max_features.resolve(d);
        let mut picked: Vec<usize> = index_sample(&mut self.rng, d, k).into_iter().collect();
        picked.sort_unstable();
        picked
    }

    fn best_split(&mut self, rows: &[usize], parent: &Stats) -> Option<Split> {
        let features = self.candidate_features();
        let min_leaf = self.params.min_samples_leaf as f64;
        let mut best: Option<Split> = None;
        let mut buf: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in features {
            buf.clear();
            for &r in rows {
                buf.push((self.x.get(r, f), r));
            }
            // Secondary sort key keeps ordering fully deterministic when
            // feature values tie.
            buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut left = Stats::default();
            let mut right = *parent;
            for w in 0..buf.len() - 1 {
                let (xv, r) = buf[w];
                let (a, b) = self.stat_of(r);
                left.add(a, b);
                right.sub(a, b);
                let next = buf[w + 1].0;
                if next <= xv {
                    continue; // no boundary between equal values
                }
                if left.n < min_leaf || right.n < min_leaf {
                    continue;
                }
                let gain = self.gain(&left, &right, parent);
                if gain <= 0.0 {
                    continue;
                }
                let threshold = xv + 0.5 * (next - xv);
                // Strictly-greater comparison keeps the first (lowest
                // feature, lowest threshold) among equal-gain splits.
                if best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(Split { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Tree {
    /// Route the sample down the tree; `x[feature] < threshold` goes left.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return Ok(*value),
                Node::Internal { feature, threshold, left, right, .. } => {
                    let v = *x
                        .get(*feature)
                        .ok_or_else(|| Error::Integrity(format!(
                            "tree splits on feature {feature} but sample has {} features",
                            x.len()
                        )))?;
                    if !v.is_finite() {
                        return Err(Error::Integrity(format!(
                            "non-finite value for feature {feature}"
                        )));
                    }
                    idx = if v < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Cover-weighted mean of leaf values: the tree's expected output over
    /// its training distribution.
    pub fn expected_value(&self) -> f64 {
        self.expected_from(0)
    }

    fn expected_from(&self, idx: usize) -> f64 {
        match &self.nodes[idx] {
            Node::Leaf { value, .. } => *value,
            Node::Internal { left, right, cover, .. } => {
                let lw = self.nodes[*left].cover() / cover;
                let rw = self.nodes[*right].cover() / cover;
                lw * self.expected_from(*left) + rw * self.expected_from(*right)
            }
        }
    }

    /// Sequence of (feature, left-subset-size) describing the split
    /// structure, used by structure-invariance tests.
    pub fn structure_signature(&self) -> Vec<(usize, u64)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, left, .. } => {
                    Some((*feature, self.nodes[*left].cover() as u64))
                }
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_rows(values.iter().map(|v| vec![*v]).collect()).unwrap()
    }

    #[test]
    fn constant_targets_single_leaf() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let t = [3.0, 3.0, 3.0, 3.0];
        let tree = fit_tree(&x, Targets::Values(&t), &TreeParams::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.nodes[0], Node::Leaf { value: 3.0, cover: 4.0 });
    }

    #[test]
    fn perfect_stump() {
        let x = col(&[0.0, 1.0]);
        let t = [0.0, 1.0];
        let params = TreeParams { max_depth: Some(1), ..Default::default() };
        let tree = fit_tree(&x, Targets::Values(&t), &params).unwrap();
        assert_eq!(tree.n_leaves(), 2);
        match &tree.nodes[0] {
            Node::Internal { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!(*threshold > 0.0 && *threshold < 1.0);
            }
            _ => panic!("expected a split at the root"),
        }
        assert_eq!(tree.predict(&[0.0]).unwrap(), 0.0);
        assert_eq!(tree.predict(&[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn newton_leaf_weights() {
        let x = col(&[0.0, 1.0]);
        let grad = [-0.5, 0.5];
        let hess = [0.25, 0.25];
        let params = TreeParams {
            max_depth: Some(1),
            objective: SplitObjective::NewtonGain { lambda: 1.0 },
            ..Default::default()
        };
        let tree = fit_tree(&x, Targets::GradHess { grad: &grad, hess: &hess }, &params).unwrap();
        // -G/(H + lambda) per side.
        assert!((tree.predict(&[0.0]).unwrap() - 0.4).abs() < 1e-15);
        assert!((tree.predict(&[1.0]).unwrap() + 0.4).abs() < 1e-15);
    }

    #[test]
    fn tie_value_routes_right() {
        let x = col(&[0.0, 1.0]);
        let t = [0.0, 1.0];
        let params = TreeParams { max_depth: Some(1), ..Default::default() };
        let tree = fit_tree(&x, Targets::Values(&t), &params).unwrap();
        let threshold = match &tree.nodes[0] {
            Node::Internal { threshold, .. } => *threshold,
            _ => unreachable!(),
        };
        assert_eq!(tree.predict(&[threshold]).unwrap(), 1.0);
    }

    #[test]
    fn single_leaf_predicts_everywhere() {
        let tree = Tree { nodes: vec![Node::Leaf { value: 3.0, cover: 1.0 }] };
        assert_eq!(tree.predict(&[]).unwrap(), 3.0);
        assert_eq!(tree.predict(&[123.0, -4.0]).unwrap(), 3.0);
    }

    #[test]
    fn empty_fit_errors_and_nonfinite_predict_errors() {
        let x = Matrix::from_rows(vec![]).unwrap();
        let t: [f64; 0] = [];
        assert!(fit_tree(&x, Targets::Values(&t), &TreeParams::default()).is_err());

        let x = col(&[0.0, 1.0]);
        let t = [0.0, 1.0];
        let tree = fit_tree(&x, Targets::Values(&t), &TreeParams::default()).unwrap();
        assert!(tree.predict(&[f64::NAN]).is_err());
    }

    #[test]
    fn memorizes_distinct_training_points() {
        let xs = [0.3, 1.7, 2.2, 5.0, -3.1, 0.9];
        let ts = [1.0, -2.0, 0.5, 7.0, 3.0, 0.0];
        let x = col(&xs);
        let tree = fit_tree(&x, Targets::Values(&ts), &TreeParams::default()).unwrap();
        for (xv, tv) in xs.iter().zip(ts.iter()) {
            assert_eq!(tree.predict(&[*xv]).unwrap(), *tv);
        }
    }

    #[test]
    fn cover_is_conserved() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin() * 10.0).collect();
        let ts: Vec<f64> = (0..50).map(|i| (i as f64 * 1.3).cos()).collect();
        let tree = fit_tree(&col(&xs), Targets::Values(&ts), &TreeParams::default()).unwrap();
        for node in &tree.nodes {
            if let Node::Internal { left, right, cover, .. } = node {
                let sum = tree.nodes[*left].cover() + tree.nodes[*right].cover();
                assert_eq!(sum, *cover);
            }
        }
    }

    #[test]
    fn huge_lambda_shrinks_leaves_to_zero() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let grad = [-1.0, 1.0, -1.0, 1.0];
        let hess = [0.25; 4];
        let params = TreeParams {
            objective: SplitObjective::NewtonGain { lambda: 1e12 },
            ..Default::default()
        };
        let tree = fit_tree(&x, Targets::GradHess { grad: &grad, hess: &hess }, &params).unwrap();
        for xv in [0.0, 1.0, 2.0, 3.0] {
            assert!(tree.predict(&[xv]).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn monotone_transform_preserves_structure() {
        let xs: Vec<f64> = vec![0.2, 1.4, -0.5, 3.3, 2.1, 0.9, -1.7, 4.0];
        let other: Vec<f64> = vec![5.0, 1.0, 2.0, 2.0, 8.0, 1.0, 3.0, 0.0];
        let ts: Vec<f64> = vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let rows: Vec<Vec<f64>> = xs.iter().zip(&other).map(|(a, b)| vec![*a, *b]).collect();
        let x1 = Matrix::from_rows(rows).unwrap();
        // exp is strictly increasing; feature 0 transformed, feature 1 kept.
        let rows2: Vec<Vec<f64>> = xs.iter().zip(&other).map(|(a, b)| vec![a.exp(), *b]).collect();
        let x2 = Matrix::from_rows(rows2).unwrap();
        let t1 = fit_tree(&x1, Targets::Values(&ts), &TreeParams::default()).unwrap();
        let t2 = fit_tree(&x2, Targets::Values(&ts), &TreeParams::default()).unwrap();
        assert_eq!(t1.structure_signature(), t2.structure_signature());
        for (row1, row2) in x1.rows_iter().zip(x2.rows_iter()) {
            assert_eq!(t1.predict(row1).unwrap(), t2.predict(row2).unwrap());
        }
    }
}
