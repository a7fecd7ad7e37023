//! Random-forest and Newton gradient-boosting classifiers over the tree
//! module, with probability outputs and a versioned model-file format.
//!
//! The booster follows the stated defaults of its reference setting:
//! learning rate 0.3, max depth 6, 100 rounds, L2 leaf regularization 1.0,
//! logistic loss with second-order (Newton) leaf weights and no row or
//! column subsampling. The forest uses bootstrap resamples, unlimited
//! depth, and floor(sqrt(d)) feature subsampling per split.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ebm::EbmModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::derive_seed;
use crate::tree::{fit_tree, fit_tree_on, MaxFeatures, SplitObjective, Targets, Tree, TreeParams};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Mean logistic loss of raw scores against 0/1 labels.
pub fn log_loss(scores: &[f64], labels: &[u8]) -> f64 {
    let n = scores.len() as f64;
    scores
        .iter()
        .zip(labels)
        .map(|(s, y)| {
            // -[y log p + (1-y) log(1-p)] in the numerically stable form.
            let z = if *y == 1 { -s } else { *s };
            ln_1p_exp(z)
        })
        .sum::<f64>()
        / n
}

/// ln(1 + e^z) without overflow.
fn ln_1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_binary_labels(y: &[u8]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Config("empty label vector".into()));
    }
    if y.iter().any(|v| *v > 1) {
        return Err(Error::Integrity("labels must be 0 (HC) or 1 (MS)".into()));
    }
    let pos = y.iter().filter(|v| **v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Config(
            "training labels contain a single class; both MS and HC are required".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// None = unlimited.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

/// Bagged classification forest. Each tree is a regression tree on 0/1
/// labels (split ranking equivalent to Gini), so a leaf holds its class
/// fraction; with the default unlimited depth and min_samples_leaf = 1,
/// leaves are pure and the ensemble mean equals the majority-vote fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

pub fn fit_random_forest(x: &Matrix, y: &[u8], params: &ForestParams) -> Result<ForestModel> {
    check_binary_labels(y)?;
    if x.n_rows() != y.len() {
        return Err(Error::Integrity("row/label count mismatch".into()));
    }
    if params.n_estimators == 0 {
        return Err(Error::Config("n_estimators must be at least 1".into()));
    }
    let targets: Vec<f64> = y.iter().map(|v| f64::from(*v)).collect();
    let n = x.n_rows();
    let trees: Vec<Tree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let boot_seed = derive_seed(params.seed, &format!("forest/bootstrap/{t}"));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(boot_seed);
            use rand_chacha::rand_core::SeedableRng;
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let tree_params = TreeParams {
                max_depth: params.max_depth,
                min_samples_leaf: params.min_samples_leaf,
                min_samples_split: params.min_samples_split,
                max_features: params.max_features,
                objective: SplitObjective::Variance,
                rng_seed: derive_seed(params.seed, &format!("forest/features/{t}")),
            };
            fit_tree_on(x, Targets::Values(&targets), &tree_params, &rows)
        })
        .collect::<Result<Vec<Tree>>>()?;
    Ok(ForestModel { params: *params, n_features: x.n_cols(), trees })
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if self.trees.is_empty() {
            return Err(Error::Config("forest has no trees".into()));
        }
        if row.len() != self.n_features {
            return Err(Error::Integrity(format!(
                "sample has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict(row)?;
        }
        Ok(sum / self.trees.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub reg_lambda: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            max_depth: 6,
            n_estimators: 100,
            reg_lambda: 1.0,
            min_samples_leaf: 1,
        }
    }
}

/// Newton-boosted logistic ensemble. Raw score is
/// `base_score + learning_rate * sum(tree outputs)`; probability is the
/// sigmoid of the raw score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostedModel {
    pub params: BoostParams,
    pub n_features: usize,
    /// Log-odds of the training prevalence.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Mean training logistic loss after each round (round 0 entry is the
    /// loss at the base score).
    pub loss_trace: Vec<f64>,
}

pub fn fit_gradient_boosting(x: &Matrix, y: &[u8], params: &BoostParams) -> Result<BoostedModel> {
    check_binary_labels(y)?;
    if x.n_rows() != y.len() {
        return Err(Error::Integrity("row/label count mismatch".into()));
    }
    let n = x.n_rows();
    let prevalence = y.iter().filter(|v| **v == 1).count() as f64 / n as f64;
    let base_score = logit(prevalence);
    let mut scores = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut loss_trace = Vec::with_capacity(params.n_estimators + 1);
    loss_trace.push(log_loss(&scores, y));

    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf,
        min_samples_split: 2,
        max_features: MaxFeatures::All,
        objective: SplitObjective::NewtonGain { lambda: params.reg_lambda },
        rng_seed: 0,
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..params.n_estimators {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let tree = fit_tree(x, Targets::GradHess { grad: &grad, hess: &hess }, &tree_params)?;
        for i in 0..n {
            scores[i] += params.learning_rate * tree.predict(x.row(i))?;
        }
        loss_trace.push(log_loss(&scores, y));
        trees.push(tree);
    }
    Ok(BoostedModel { params: *params, n_features: x.n_cols(), base_score, trees, loss_trace })
}

impl BoostedModel {
    pub fn raw_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::Integrity(format!(
                "sample has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut s = self.base_score;
        for tree in &self.trees {
            s += self.params.learning_rate * tree.predict(row)?;
        }
        Ok(s)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.raw_score(row)?))
    }
}

/// Any classifier the study can train.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FittedModel {
    Forest(ForestModel),
    Boosted(BoostedModel),
    Ebm(EbmModel),
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Forest(m) => m.n_features,
            FittedModel::Boosted(m) => m.n_features,
            FittedModel::Ebm(m) => m.n_features(),
        }
    }

    pub fn kind_tag(&self) -> &'static str {
        match self {
            FittedModel::Forest(_) => "forest",
            FittedModel::Boosted(_) => "boosted",
            FittedModel::Ebm(_) => "ebm",
        }
    }

    /// Per-row MS probability.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::Integrity(format!(
                "input has {} features, model expects {}",
                x.n_cols(),
                self.n_features()
            )));
        }
        x.rows_iter()
            .map(|row| match self {
                FittedModel::Forest(m) => m.predict_row(row),
                FittedModel::Boosted(m) => m.predict_row(row),
                FittedModel::Ebm(m) => m.predict_row(row),
            })
            .collect()
    }
}

const MODEL_MAGIC: &str = "octml-model";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelEnvelope {
    magic: String,
    version: u32,
    kind: String,
    payload: serde_json::Value,
}

/// Serialize any model into the versioned JSON envelope.
pub fn save_model(model: &FittedModel, path: &Path) -> Result<()> {
    let payload = match model {
        FittedModel::Forest(m) => serde_json::to_value(m),
        FittedModel::Boosted(m) => serde_json::to_value(m),
        FittedModel::Ebm(m) => serde_json::to_value(m),
    }
    .map_err(|e| Error::Internal(format!("model serialization failed: {e}")))?;
    let envelope = ModelEnvelope {
        magic: MODEL_MAGIC.to_string(),
        version: MODEL_VERSION,
        kind: model.kind_tag().to_string(),
        payload,
    };
    let text = serde_json::to_string(&envelope)
        .map_err(|e| Error::Internal(format!("model serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    let text = std::fs::read_to_string(path)?;
    let envelope: ModelEnvelope = serde_json::from_str(&text)
        .map_err(|e| Error::CorruptModel(format!("{}: {e}", path.display())))?;
    if envelope.magic != MODEL_MAGIC {
        return Err(Error::CorruptModel(format!(
            "{}: bad magic '{}'",
            path.display(),
            envelope.magic
        )));
    }
    if envelope.version != MODEL_VERSION {
        return Err(Error::ModelVersion(format!(
            "unsupported model version {} (supported: {MODEL_VERSION})",
            envelope.version
        )));
    }
    let parse = |e: serde_json::Error| Error::CorruptModel(format!("{}: {e}", path.display()));
    match envelope.kind.as_str() {
        "forest" => Ok(FittedModel::Forest(serde_json::from_value(envelope.payload).map_err(parse)?)),
        "boosted" => {
            Ok(FittedModel::Boosted(serde_json::from_value(envelope.payload).map_err(parse)?))
        }
        "ebm" => Ok(FittedModel::Ebm(serde_json::from_value(envelope.payload).map_err(parse)?)),
        other => Err(Error::ModelVersion(format!("unknown model kind tag '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy_separable() -> (Matrix, Vec<u8>) {
        let x = Matrix::from_rows(vec![
            vec![0.0, 5.0],
            vec![0.2, 4.0],
            vec![3.0, 1.0],
            vec![3.3, 0.0],
        ])
        .unwrap();
        (x, vec![0, 0, 1, 1])
    }

    #[test]
    fn forest_memorizes_separable_points() {
        let (x, y) = xy_separable();
        let params = ForestParams { n_estimators: 1, ..Default::default() };
        let model = fit_random_forest(&x, &y, &params).unwrap();
        let probs = FittedModel::Forest(model).predict_proba(&x).unwrap();
        for (p, yy) in probs.iter().zip(&y) {
            let pred = u8::from(*p >= 0.5);
            assert_eq!(pred, *yy);
        }
    }

    #[test]
    fn forest_on_constant_features_is_input_independent_and_near_prior() {
        let n = 40;
        let x = Matrix::from_rows(vec![vec![1.0, 1.0]; n]).unwrap();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let model = fit_random_forest(&x, &y, &ForestParams::default()).unwrap();
        let q = Matrix::from_rows(vec![vec![1.0, 1.0], vec![-5.0, 9.0], vec![0.0, 0.0]]).unwrap();
        let probs = FittedModel::Forest(model).predict_proba(&q).unwrap();
        assert_eq!(probs[0], probs[1]);
        assert_eq!(probs[0], probs[2]);
        // Constant features give single-leaf trees whose value is the
        // bootstrap class fraction; the 100-tree mean stays near the prior.
        assert!((probs[0] - 0.5).abs() < 0.1, "prob {} far from prior", probs[0]);
    }

    #[test]
    fn forest_probability_is_vote_fraction_on_pure_leaves() {
        let (x, y) = xy_separable();
        let params = ForestParams { n_estimators: 7, ..Default::default() };
        let model = fit_random_forest(&x, &y, &params).unwrap();
        let probs = FittedModel::Forest(model).predict_proba(&x).unwrap();
        for p in probs {
            let votes = p * 7.0;
            assert!((votes - votes.round()).abs() < 1e-9, "not a vote fraction: {p}");
        }
    }

    #[test]
    fn forest_fixed_seed_reproduces_trees() {
        let (x, y) = xy_separable();
        let params = ForestParams { n_estimators: 5, seed: 99, ..Default::default() };
        let a = fit_random_forest(&x, &y, &params).unwrap();
        let b = fit_random_forest(&x, &y, &params).unwrap();
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn single_class_labels_rejected() {
        let (x, _) = xy_separable();
        let y = vec![1, 1, 1, 1];
        assert!(fit_random_forest(&x, &y, &ForestParams::default()).is_err());
        assert!(fit_gradient_boosting(&x, &y, &BoostParams::default()).is_err());
    }

    #[test]
    fn boosting_zero_rounds_predicts_prevalence() {
        let (x, y) = xy_separable();
        let params = BoostParams { n_estimators: 0, ..Default::default() };
        let model = fit_gradient_boosting(&x, &y, &params).unwrap();
        assert!((model.base_score).abs() < 1e-12); // logit(0.5) = 0
        let probs = FittedModel::Boosted(model).predict_proba(&x).unwrap();
        for p in probs {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn boosting_one_round_hand_example() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let y = vec![0u8, 1u8];
        let params = BoostParams {
            learning_rate: 0.3,
            max_depth: 1,
            n_estimators: 1,
            reg_lambda: 1.0,
            min_samples_leaf: 1,
        };
        let model = fit_gradient_boosting(&x, &y, &params).unwrap();
        assert!((model.trees[0].predict(&[0.0]).unwrap() - (-0.4)).abs() < 1e-15);
        assert!((model.trees[0].predict(&[1.0]).unwrap() - 0.4).abs() < 1e-15);
        let p0 = model.predict_row(&[0.0]).unwrap();
        let p1 = model.predict_row(&[1.0]).unwrap();
        assert!((p0 - sigmoid(-0.12)).abs() < 1e-15);
        assert!((p1 - sigmoid(0.12)).abs() < 1e-15);
    }

    #[test]
    fn boosting_separates_pair_after_many_rounds() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let y = vec![0u8, 1u8];
        let model = fit_gradient_boosting(&x, &y, &BoostParams::default()).unwrap();
        assert!(model.predict_row(&[0.0]).unwrap() < 0.01);
        assert!(model.predict_row(&[1.0]).unwrap() > 0.99);
        // Training loss never increases across the 100 rounds.
        for w in model.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn boosting_row_permutation_invariant() {
        let (x, y) = xy_separable();
        let perm = [2usize, 0, 3, 1];
        let xp = x.select_rows(&perm);
        let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        let a = fit_gradient_boosting(&x, &y, &BoostParams::default()).unwrap();
        let b = fit_gradient_boosting(&xp, &yp, &BoostParams::default()).unwrap();
        for row in x.rows_iter() {
            let pa = a.predict_row(row).unwrap();
            let pb = b.predict_row(row).unwrap();
            assert!((pa - pb).abs() < 1e-12);
        }
    }

    #[test]
    fn base_score_matches_prevalence() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = vec![0u8, 0, 0, 1];
        let model = fit_gradient_boosting(&x, &y, &BoostParams::default()).unwrap();
        assert!((sigmoid(model.base_score) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn duplicated_input_rows_get_identical_probabilities() {
        let (x, y) = xy_separable();
        let model = FittedModel::Boosted(
            fit_gradient_boosting(&x, &y, &BoostParams::default()).unwrap(),
        );
        let q = Matrix::from_rows(vec![vec![0.1, 4.5], vec![0.1, 4.5]]).unwrap();
        let probs = model.predict_proba(&q).unwrap();
        assert_eq!(probs[0], probs[1]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (x, y) = xy_separable();
        let model = FittedModel::Boosted(
            fit_gradient_boosting(&x, &y, &BoostParams::default()).unwrap(),
        );
        let q = Matrix::from_rows(vec![vec![0.1]]).unwrap();
        assert!(model.predict_proba(&q).is_err());
    }

    #[test]
    fn model_file_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y) = xy_separable();
        let model = FittedModel::Boosted(
            fit_gradient_boosting(&x, &y, &BoostParams::default()).unwrap(),
        );
        let path = dir.path().join("m.model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let before = model.predict_proba(&x).unwrap();
        let after = loaded.predict_proba(&x).unwrap();
        assert_eq!(before, after);

        // Truncation corrupts the file.
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::CorruptModel(_))));

        // Unknown kind tag is a version error.
        let hacked = text.replace("\"kind\":\"boosted\"", "\"kind\":\"mystery\"");
        std::fs::write(&path, hacked).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelVersion(_))));

        // Future version is a version error.
        let hacked = text.replace("\"version\":1", "\"version\":999");
        std::fs::write(&path, hacked).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelVersion(_))));
    }
}
