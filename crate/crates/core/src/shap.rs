//! Exact Shapley attributions for tree ensembles under cover-weighted
//! path-dependent conditioning, plus the global and local aggregations
//! behind the report artifacts.
//!
//! The conditional-expectation game is: for a feature subset S, descend
//! each tree following the known branch when the split feature is in S and
//! otherwise averaging both children weighted by cover. [`tree_shap`]
//! computes the exact Shapley values of that game in polynomial time with
//! the path algorithm; [`brute_force_shap`] evaluates the same game by
//! subset enumeration and serves as the independent oracle.
//!
//! Boosted models are explained in raw-score (log-odds) space, forests in
//! probability-vote space; both keep the attribution sum exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{cell_index_from_name, GRID_CELLS, GRID_SIDE};
use crate::ensemble::{BoostedModel, FittedModel, ForestModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tree::{Node, Tree};

/// Space the attribution sums in. Boosted ensembles are additive in
/// log-odds; forests in vote-fraction probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSpace {
    RawScore,
    Probability,
}

impl std::fmt::Display for TargetSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetSpace::RawScore => "raw_score",
            TargetSpace::Probability => "probability",
        })
    }
}

/// Additive per-feature contributions for one prediction:
/// `base_value + sum(phi) = output` (local accuracy).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribution {
    /// Expected model output over the training distribution.
    pub base_value: f64,
    pub phi: Vec<f64>,
    /// Model output at the explained sample, in `target_space`.
    pub output: f64,
    pub target_space: TargetSpace,
}

/// Trees plus the affine map turning their sum into the model output.
struct EnsembleView<'a> {
    trees: &'a [Tree],
    scale: f64,
    offset: f64,
    space: TargetSpace,
}

impl<'a> EnsembleView<'a> {
    fn of(model: &'a FittedModel) -> Result<Self> {
        match model {
            FittedModel::Forest(ForestModel { trees, .. }) => {
                if trees.is_empty() {
                    return Err(Error::Config("forest has no trees".into()));
                }
                Ok(Self {
                    trees,
                    scale: 1.0 / trees.len() as f64,
                    offset: 0.0,
                    space: TargetSpace::Probability,
                })
            }
            FittedModel::Boosted(BoostedModel { trees, base_score, params, .. }) => Ok(Self {
                trees,
                scale: params.learning_rate,
                offset: *base_score,
                space: TargetSpace::RawScore,
            }),
            FittedModel::Ebm(_) => Err(Error::Config(
                "EBM models are explained by their own term scores, not tree Shapley values".into(),
            )),
        }
    }

    fn validate_covers(&self) -> Result<()> {
        for tree in self.trees {
            for node in &tree.nodes {
                if !(node.cover() > 0.0) {
                    return Err(Error::Integrity(
                        "tree node without positive cover; Shapley conditioning needs cover at every node"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn base_value(&self) -> f64 {
        self.offset + self.scale * self.trees.iter().map(Tree::expected_value).sum::<f64>()
    }

    fn output(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for tree in self.trees {
            sum += tree.predict(x)?;
        }
        Ok(self.offset + self.scale * sum)
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

const ROOT_FEATURE: usize = usize::MAX;

fn extend_path(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: usize) {
    path.push(PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        weight: if path.is_empty() { 1.0 } else { 0.0 },
    });
    let l = path.len() - 1;
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let l = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let tmp = path[j].weight;
            path[j].weight = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            next = tmp - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in index..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero_fraction = path[j + 1].zero_fraction;
        path[j].one_fraction = path[j + 1].one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let l = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next = path[l].weight;
    let mut total = 0.0;
    for j in (0..l).rev() {
        if one != 0.0 {
            let tmp = next * (l + 1) as f64 / ((j + 1) as f64 * one);
            total += tmp;
            next = path[j].weight - tmp * zero * ((l - j) as f64 / (l + 1) as f64);
        } else if zero != 0.0 {
            total += (path[j].weight / zero) / ((l - j) as f64 / (l + 1) as f64);
        } else {
            debug_assert_eq!(path[j].weight, 0.0, "inconsistent path weight");
        }
    }
    total
}

fn shap_recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node_idx: usize,
    mut path: Vec<PathElement>,
    parent_zero: f64,
    parent_one: f64,
    parent_feature: usize,
) -> Result<()> {
    extend_path(&mut path, parent_zero, parent_one, parent_feature);
    match &tree.nodes[node_idx] {
        Node::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(&path, i);
                let el = &path[i];
                phi[el.feature] += w * (el.one_fraction - el.zero_fraction) * value;
            }
            Ok(())
        }
        Node::Internal { feature, threshold, left, right, cover } => {
            let v = *x.get(*feature).ok_or_else(|| {
                Error::Integrity(format!(
                    "tree splits on feature {feature} but sample has {} features",
                    x.len()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Integrity(format!("non-finite value for feature {feature}")));
            }
            let (hot, cold) = if v < *threshold { (*left, *right) } else { (*right, *left) };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path.iter().position(|e| e.feature == *feature) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, k);
            }
            let hot_zero = tree.nodes[hot].cover() / cover * incoming_zero;
            let cold_zero = tree.nodes[cold].cover() / cover * incoming_zero;
            shap_recurse(tree, x, phi, hot, path.clone(), hot_zero, incoming_one, *feature)?;
            shap_recurse(tree, x, phi, cold, path, cold_zero, 0.0, *feature)
        }
    }
}

fn single_tree_phi(tree: &Tree, x: &[f64], d: usize) -> Result<Vec<f64>> {
    // The sentinel root element never reaches the leaf accumulation loop
    // (it starts at path position 1), so plain d-length storage suffices.
    let mut phi = vec![0.0; d];
    shap_recurse(tree, x, &mut phi, 0, Vec::new(), 1.0, 1.0, ROOT_FEATURE)?;
    Ok(phi)
}

/// Exact Shapley attribution of a tree-ensemble prediction.
pub fn tree_shap(model: &FittedModel, x: &[f64]) -> Result<Attribution> {
    let view = EnsembleView::of(model)?;
    view.validate_covers()?;
    let d = model.n_features();
    if x.len() != d {
        return Err(Error::Integrity(format!(
            "sample has {} features, model expects {d}",
            x.len()
        )));
    }
    let mut phi = vec![0.0; d];
    for tree in view.trees {
        let tree_phi = single_tree_phi(tree, x, d)?;
        for (acc, p) in phi.iter_mut().zip(&tree_phi) {
            *acc += p;
        }
    }
    for p in &mut phi {
        *p *= view.scale;
    }
    Ok(Attribution {
        base_value: view.base_value(),
        phi,
        output: view.output(x)?,
        target_space: view.space,
    })
}

/// Guard for the subset enumeration: 2^d conditional descents per tree.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 20;

fn descend_conditional(tree: &Tree, node_idx: usize, x: &[f64], mask: u32) -> f64 {
    match &tree.nodes[node_idx] {
        Node::Leaf { value, .. } => *value,
        Node::Internal { feature, threshold, left, right, cover } => {
            if mask & (1 << feature) != 0 {
                let next = if x[*feature] < *threshold { *left } else { *right };
                descend_conditional(tree, next, x, mask)
            } else {
                let lw = tree.nodes[*left].cover() / cover;
                let rw = tree.nodes[*right].cover() / cover;
                lw * descend_conditional(tree, *left, x, mask)
                    + rw * descend_conditional(tree, *right, x, mask)
            }
        }
    }
}

/// Shapley values by direct subset enumeration of the same conditional
/// game as [`tree_shap`]. Test oracle; refuses more than
/// [`BRUTE_FORCE_MAX_FEATURES`] features.
pub fn brute_force_shap(model: &FittedModel, x: &[f64]) -> Result<Attribution> {
    let view = EnsembleView::of(model)?;
    view.validate_covers()?;
    let d = model.n_features();
    if d > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::Config(format!(
            "brute-force Shapley enumeration capped at {BRUTE_FORCE_MAX_FEATURES} features, got {d}"
        )));
    }
    if x.len() != d {
        return Err(Error::Integrity(format!(
            "sample has {} features, model expects {d}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrity("non-finite feature value".into()));
    }

    // v(S) for every subset, summed over trees and affinely mapped.
    let n_masks = 1usize << d;
    let mut v = vec![view.offset; n_masks];
    for tree in view.trees {
        for (mask, value) in v.iter_mut().enumerate() {
            *value += view.scale * descend_conditional(tree, 0, x, mask as u32);
        }
    }

    // Shapley weights |S|! (d-|S|-1)! / d!.
    let mut factorial = vec![1.0f64; d + 1];
    for i in 1..=d {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight =
        |s: usize| -> f64 { factorial[s] * factorial[d - s - 1] / factorial[d] };

    let mut phi = vec![0.0; d];
    for mask in 0..n_masks {
        let s = (mask as u32).count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if mask & (1 << i) == 0 {
                let with = mask | (1 << i);
                *p += weight(s) * (v[with] - v[mask]);
            }
        }
    }
    Ok(Attribution {
        base_value: v[0],
        phi,
        output: view.output(x)?,
        target_space: view.space,
    })
}

/// Global view over a background set: per-sample attributions, mean |phi|
/// ranking, and the raw feature values needed for violin/dependence plots.
#[derive(Debug, Clone)]
pub struct GlobalShapSummary {
    pub base_value: f64,
    pub target_space: TargetSpace,
    pub mean_abs_phi: Vec<f64>,
    /// n x d matrix of per-sample attributions.
    pub phi: Matrix,
    /// n x d copy of the background feature values.
    pub feature_values: Matrix,
    /// Feature indices sorted by mean |phi| descending, ties by index.
    pub ranking: Vec<usize>,
}

/// Attribute every background sample (the fold's training matrix) and
/// aggregate. Samples are independent; the computation fans out across
/// worker threads and reassembles in row order.
pub fn global_summary(model: &FittedModel, background: &Matrix) -> Result<GlobalShapSummary> {
    let d = model.n_features();
    let attributions: Vec<Attribution> = (0..background.n_rows())
        .into_par_iter()
        .map(|r| tree_shap(model, background.row(r)))
        .collect::<Result<_>>()?;
    let mut phi = Matrix::zeros(background.n_rows(), d);
    let mut mean_abs = vec![0.0; d];
    for (r, att) in attributions.iter().enumerate() {
        for (c, p) in att.phi.iter().enumerate() {
            phi.set(r, c, *p);
            mean_abs[c] += p.abs();
        }
    }
    let n = background.n_rows().max(1) as f64;
    for m in &mut mean_abs {
        *m /= n;
    }
    let mut ranking: Vec<usize> = (0..d).collect();
    ranking.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    let (base_value, target_space) = attributions
        .first()
        .map(|a| (a.base_value, a.target_space))
        .unwrap_or((0.0, TargetSpace::RawScore));
    Ok(GlobalShapSummary {
        base_value,
        target_space,
        mean_abs_phi: mean_abs,
        phi,
        feature_values: background.clone(),
        ranking,
    })
}

/// Reshape per-feature values into the 8x8 grid using `row.column`
/// feature names. Works for mean |phi| (global) and signed phi (local).
pub fn shap_grid(values: &[f64], feature_names: &[String]) -> Result<[[f64; GRID_SIDE]; GRID_SIDE]> {
    if values.len() != GRID_CELLS || feature_names.len() != GRID_CELLS {
        return Err(Error::Config(format!(
            "grid layout needs exactly {GRID_CELLS} features, got {}",
            values.len()
        )));
    }
    let mut grid = [[0.0; GRID_SIDE]; GRID_SIDE];
    for (name, value) in feature_names.iter().zip(values) {
        let idx = cell_index_from_name(name)?;
        grid[idx / GRID_SIDE][idx % GRID_SIDE] = *value;
    }
    Ok(grid)
}

/// One waterfall line: feature index and its contribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaterfallItem {
    pub feature: usize,
    pub phi: f64,
}

/// Ordered reconciliation of one prediction: the top contributions by
/// magnitude plus everything else folded into a remainder, chosen so that
/// `base_value + shown + remainder == output` bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Waterfall {
    pub base_value: f64,
    pub output: f64,
    pub target_space: TargetSpace,
    pub items: Vec<WaterfallItem>,
    pub folded_count: usize,
    pub remainder: f64,
}

pub fn waterfall(attribution: &Attribution, max_items: usize) -> Waterfall {
    let mut order: Vec<usize> = (0..attribution.phi.len())
        .filter(|&i| attribution.phi[i] != 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        attribution.phi[b]
            .abs()
            .total_cmp(&attribution.phi[a].abs())
            .then(a.cmp(&b))
    });
    let shown = order.len().min(max_items);
    let items: Vec<WaterfallItem> = order[..shown]
        .iter()
        .map(|&i| WaterfallItem { feature: i, phi: attribution.phi[i] })
        .collect();
    let shown_sum: f64 = items.iter().map(|i| i.phi).sum();
    Waterfall {
        base_value: attribution.base_value,
        output: attribution.output,
        target_space: attribution.target_space,
        folded_count: order.len() - shown,
        remainder: attribution.output - attribution.base_value - shown_sum,
        items,
    }
}

/// Scatter-ready (feature value, phi) pairs for one feature across the
/// background samples.
pub fn dependence_data(summary: &GlobalShapSummary, feature: usize) -> Result<Vec<(f64, f64)>> {
    if feature >= summary.mean_abs_phi.len() {
        return Err(Error::Config(format!("feature index {feature} out of range")));
    }
    Ok((0..summary.phi.n_rows())
        .map(|r| (summary.feature_values.get(r, feature), summary.phi.get(r, feature)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{
        fit_gradient_boosting, fit_random_forest, BoostParams, ForestParams,
    };
    use crate::seed::rng_for;
    use rand::Rng;

    fn stump(a: f64, b: f64, cover_left: f64, cover_right: f64) -> Tree {
        Tree {
            nodes: vec![
                Node::Internal {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover: cover_left + cover_right,
                },
                Node::Leaf { value: a, cover: cover_left },
                Node::Leaf { value: b, cover: cover_right },
            ],
        }
    }

    fn forest_of(trees: Vec<Tree>, d: usize) -> FittedModel {
        FittedModel::Forest(ForestModel {
            params: ForestParams::default(),
            n_features: d,
            trees,
        })
    }

    #[test]
    fn single_leaf_tree_attributes_nothing() {
        let model = forest_of(vec![Tree { nodes: vec![Node::Leaf { value: 3.0, cover: 5.0 }] }], 2);
        let att = tree_shap(&model, &[0.0, 0.0]).unwrap();
        assert_eq!(att.phi, vec![0.0, 0.0]);
        assert_eq!(att.base_value, 3.0);
        assert_eq!(att.output, 3.0);
    }

    #[test]
    fn equal_cover_stump_hand_value() {
        let model = forest_of(vec![stump(1.0, 5.0, 10.0, 10.0)], 1);
        // x routed right (value b = 5): phi = (b - a) / 2, base = (a+b)/2.
        let att = tree_shap(&model, &[1.0]).unwrap();
        assert!((att.base_value - 3.0).abs() < 1e-12);
        assert!((att.phi[0] - 2.0).abs() < 1e-12);
        assert!((att.output - 5.0).abs() < 1e-12);
        // d = 1 stump: phi equals f(x) - base exactly (brute force too).
        let brute = brute_force_shap(&model, &[1.0]).unwrap();
        assert!((brute.phi[0] - (brute.output - brute.base_value)).abs() < 1e-12);
    }

    #[test]
    fn extra_features_get_zero_phi() {
        let model = forest_of(vec![stump(1.0, 5.0, 4.0, 6.0)], 3);
        let att = tree_shap(&model, &[0.0, 9.0, -2.0]).unwrap();
        assert_eq!(att.phi[1], 0.0);
        assert_eq!(att.phi[2], 0.0);
    }

    #[test]
    fn constant_model_attributes_zero() {
        let model = forest_of(
            vec![
                Tree { nodes: vec![Node::Leaf { value: 0.7, cover: 3.0 }] },
                Tree { nodes: vec![Node::Leaf { value: 0.7, cover: 3.0 }] },
            ],
            2,
        );
        let att = brute_force_shap(&model, &[1.0, 2.0]).unwrap();
        assert_eq!(att.phi, vec![0.0, 0.0]);
    }

    #[test]
    fn missing_cover_is_an_error() {
        let model = forest_of(vec![stump(0.0, 1.0, 0.0, 10.0)], 1);
        assert!(tree_shap(&model, &[1.0]).is_err());
    }

    #[test]
    fn brute_force_guard() {
        let trees = vec![Tree { nodes: vec![Node::Leaf { value: 1.0, cover: 1.0 }] }];
        let model = forest_of(trees, 21);
        let x = vec![0.0; 21];
        assert!(brute_force_shap(&model, &x).is_err());
        assert!(tree_shap(&model, &x).is_ok()); // polynomial path has no guard
    }

    fn random_model(seed: u64, d: usize, n_trees: usize) -> (FittedModel, Matrix) {
        let mut rng = rng_for(seed, "shap-random-model");
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0 || rng.random::<bool>())).collect();
        let x = Matrix::from_rows(rows).unwrap();
        let model = if seed % 2 == 0 {
            FittedModel::Forest(
                fit_random_forest(
                    &x,
                    &y,
                    &ForestParams {
                        n_estimators: n_trees,
                        max_depth: Some(4),
                        seed,
                        ..Default::default()
                    },
                )
                .unwrap(),
            )
        } else {
            FittedModel::Boosted(
                fit_gradient_boosting(
                    &x,
                    &y,
                    &BoostParams {
                        n_estimators: n_trees,
                        max_depth: 4,
                        ..Default::default()
                    },
                )
                .unwrap(),
            )
        };
        (model, x)
    }

    #[test]
    fn path_algorithm_matches_brute_force() {
        for seed in 0..12u64 {
            let d = 2 + (seed as usize % 5);
            let (model, x) = random_model(seed, d, 1 + seed as usize % 4);
            let mut rng = rng_for(seed, "shap-query");
            for _ in 0..5 {
                let q: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
                let fast = tree_shap(&model, &q).unwrap();
                let brute = brute_force_shap(&model, &q).unwrap();
                for (a, b) in fast.phi.iter().zip(&brute.phi) {
                    assert!((a - b).abs() < 1e-9, "phi mismatch: {a} vs {b} (seed {seed})");
                }
                assert!((fast.base_value - brute.base_value).abs() < 1e-9);
            }
            // Also on training rows.
            let q = x.row(0);
            let fast = tree_shap(&model, q).unwrap();
            let brute = brute_force_shap(&model, q).unwrap();
            for (a, b) in fast.phi.iter().zip(&brute.phi) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn duplicated_feature_columns_agree_with_oracle() {
        // Two identical columns; the model only ever splits on whichever
        // the search selects first. Conditioning must agree between the
        // path algorithm and the oracle (no hand value asserted).
        let mut rng = rng_for(31, "shap-dup");
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
                vec![v, v]
            })
            .collect();
        let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.0)).collect();
        let x = Matrix::from_rows(rows).unwrap();
        let model = FittedModel::Boosted(
            fit_gradient_boosting(
                &x,
                &y,
                &BoostParams { n_estimators: 3, max_depth: 3, ..Default::default() },
            )
            .unwrap(),
        );
        for q in [[0.4, 0.4], [-0.9, -0.9], [0.4, -0.9]] {
            let fast = tree_shap(&model, &q).unwrap();
            let brute = brute_force_shap(&model, &q).unwrap();
            for (a, b) in fast.phi.iter().zip(&brute.phi) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn local_accuracy_and_dummy_feature() {
        for seed in 20..26u64 {
            let (model, x) = random_model(seed, 4, 3);
            for r in 0..x.n_rows() {
                let att = tree_shap(&model, x.row(r)).unwrap();
                let sum = att.base_value + att.phi.iter().sum::<f64>();
                assert!((sum - att.output).abs() < 1e-6, "local accuracy violated");
            }
        }
        // A feature never split on has exactly zero phi.
        let model = forest_of(vec![stump(0.0, 1.0, 3.0, 7.0)], 4);
        let att = tree_shap(&model, &[0.9, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(att.phi[1], 0.0);
        assert_eq!(att.phi[2], 0.0);
        assert_eq!(att.phi[3], 0.0);
    }

    #[test]
    fn ensemble_additivity_over_trees() {
        let (model, x) = random_model(40, 5, 4);
        let FittedModel::Forest(forest) = &model else { panic!() };
        let q = x.row(3);
        let whole = tree_shap(&model, q).unwrap();
        let mut summed = vec![0.0; 5];
        for tree in &forest.trees {
            let single = forest_of(vec![tree.clone()], 5);
            let att = tree_shap(&single, q).unwrap();
            for (s, p) in summed.iter_mut().zip(&att.phi) {
                *s += p / forest.trees.len() as f64;
            }
        }
        for (a, b) in whole.phi.iter().zip(&summed) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn boosted_space_is_raw_score_and_forest_probability() {
        let (boosted, xb) = random_model(41, 3, 2);
        assert_eq!(tree_shap(&boosted, xb.row(0)).unwrap().target_space, TargetSpace::RawScore);
        let (forest, xf) = random_model(42, 3, 2);
        assert_eq!(tree_shap(&forest, xf.row(0)).unwrap().target_space, TargetSpace::Probability);
    }

    #[test]
    fn global_summary_ranks_single_feature_model_first() {
        let model = forest_of(vec![stump(0.0, 1.0, 5.0, 5.0)], 3);
        let background =
            Matrix::from_rows(vec![vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 4.0], vec![0.3, 0.0, 1.0]])
                .unwrap();
        let summary = global_summary(&model, &background).unwrap();
        assert_eq!(summary.ranking[0], 0);
        assert!(summary.mean_abs_phi[0] > 0.0);
        assert_eq!(summary.mean_abs_phi[1], 0.0);

        let constant = forest_of(vec![Tree { nodes: vec![Node::Leaf { value: 0.5, cover: 2.0 }] }], 3);
        let zero = global_summary(&constant, &background).unwrap();
        assert!(zero.mean_abs_phi.iter().all(|m| *m == 0.0));
        // Zero summary ties break by feature index.
        assert_eq!(zero.ranking, vec![0, 1, 2]);
    }

    #[test]
    fn grid_reshape_places_named_cells() {
        let names: Vec<String> = (0..GRID_CELLS).map(crate::data::cell_name_from_index).collect();
        let mut values = vec![0.0; GRID_CELLS];
        values[crate::data::cell_index_from_name("5.4").unwrap()] = 2.5;
        let grid = shap_grid(&values, &names).unwrap();
        for r in 0..GRID_SIDE {
            for c in 0..GRID_SIDE {
                let expected = if (r, c) == (4, 3) { 2.5 } else { 0.0 };
                assert_eq!(grid[r][c], expected);
            }
        }
        assert!(shap_grid(&[0.0; 6], &names[..6].to_vec()).is_err());
    }

    #[test]
    fn waterfall_orders_and_reconciles() {
        let att = Attribution {
            base_value: 0.2,
            phi: vec![0.5, -1.2, 0.0, 0.1, -0.05],
            output: 0.2 + 0.5 - 1.2 + 0.1 - 0.05,
            target_space: TargetSpace::RawScore,
        };
        let w = waterfall(&att, 2);
        assert_eq!(w.items.len(), 2);
        assert_eq!(w.items[0].feature, 1);
        assert_eq!(w.items[1].feature, 0);
        assert_eq!(w.folded_count, 2); // the zero-phi feature is dropped
        let reconciled = w.base_value + w.items.iter().map(|i| i.phi).sum::<f64>() + w.remainder;
        assert_eq!(reconciled, w.output);

        let zero = Attribution {
            base_value: 0.3,
            phi: vec![0.0; 4],
            output: 0.3,
            target_space: TargetSpace::Probability,
        };
        let wz = waterfall(&zero, 10);
        assert!(wz.items.is_empty());
        assert_eq!(wz.remainder, 0.0);
    }

    #[test]
    fn opposing_top_contributions_reproducible() {
        // Two-feature construction where the top two waterfall items fight:
        // feature 0 pushes toward MS, feature 1 neutralizes it.
        let trees = vec![stump(-1.0, 1.0, 5.0, 5.0), {
            Tree {
                nodes: vec![
                    Node::Internal { feature: 1, threshold: 0.5, left: 1, right: 2, cover: 10.0 },
                    Node::Leaf { value: 0.9, cover: 5.0 },
                    Node::Leaf { value: -0.9, cover: 5.0 },
                ],
            }
        }];
        let model = FittedModel::Boosted(BoostedModel {
            params: BoostParams { learning_rate: 1.0, ..Default::default() },
            n_features: 2,
            base_score: 0.0,
            trees,
            loss_trace: vec![],
        });
        // x = [1, 1]: feature 0 contributes +1 (toward MS), feature 1 -0.9.
        let att = tree_shap(&model, &[1.0, 1.0]).unwrap();
        let w = waterfall(&att, 2);
        assert_eq!(w.items.len(), 2);
        assert!(w.items[0].phi * w.items[1].phi < 0.0, "top items should oppose");
    }

    #[test]
    fn dependence_pairs() {
        let model = forest_of(vec![stump(0.0, 1.0, 5.0, 5.0)], 2);
        let background = Matrix::from_rows(vec![vec![0.0, 7.0], vec![1.0, 7.0]]).unwrap();
        let summary = global_summary(&model, &background).unwrap();
        let pairs = dependence_data(&summary, 1).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|(v, _)| *v == 7.0));
        let empty = global_summary(&model, &Matrix::zeros(0, 2)).unwrap();
        assert!(dependence_data(&empty, 0).unwrap().is_empty());
        assert!(dependence_data(&summary, 5).is_err());
    }
}
