//! Evaluation layer: subject-level cross-validation, SMOTE oversampling,
//! classification metrics, Welch's t-test, and the per-fold pipeline that
//! ties them together without leaking test information into training.

pub mod folds;
pub mod metrics;
pub mod smote;
pub mod stats;

pub use folds::{subject_kfold, FoldAssignment, FoldPlan};
pub use metrics::{auc_rank, compute_metrics, MetricsReport};
pub use smote::{convex_residual, smote, SmoteRow};
pub use stats::{student_t_sf, welch_t_test, WelchResult};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Laterality};
use crate::ebm::{detect_interactions, fit_ebm, fit_pair_terms, EbmParams};
use crate::ensemble::{
    fit_gradient_boosting, fit_random_forest, BoostParams, FittedModel, ForestParams,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    GradientBoosting,
    RandomForest,
    Ebm,
    EbmInteractions,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gb" | "xgb" | "boosting" => Ok(ModelKind::GradientBoosting),
            "rf" | "forest" => Ok(ModelKind::RandomForest),
            "ebm" => Ok(ModelKind::Ebm),
            "ebmi" | "ebm+i" | "ebm-i" => Ok(ModelKind::EbmInteractions),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }

    pub fn all() -> [ModelKind; 4] {
        [
            ModelKind::GradientBoosting,
            ModelKind::RandomForest,
            ModelKind::Ebm,
            ModelKind::EbmInteractions,
        ]
    }

    /// Explained through tree Shapley values (vs own term scores).
    pub fn uses_shap(self) -> bool {
        matches!(self, ModelKind::GradientBoosting | ModelKind::RandomForest)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::GradientBoosting => "gb",
            ModelKind::RandomForest => "rf",
            ModelKind::Ebm => "ebm",
            ModelKind::EbmInteractions => "ebmi",
        })
    }
}

/// Hyperparameters for every model family plus the pipeline knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub boost: BoostParams,
    pub forest: ForestParams,
    pub ebm: EbmParams,
    /// Pair count for EBM with interactions.
    pub ebm_pairs: usize,
    pub smote_k: usize,
    pub threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            boost: BoostParams::default(),
            forest: ForestParams::default(),
            ebm: EbmParams::default(),
            ebm_pairs: 10,
            smote_k: 5,
            threshold: 0.5,
        }
    }
}

/// One test sample's stored outcome; metrics are recomputable from these.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub subject_id: String,
    pub laterality: Laterality,
    pub label: u8,
    pub probability: f64,
}

/// Provenance of the synthetic rows a fold trained on.
#[derive(Debug, Clone)]
pub struct SmoteAudit {
    /// The real minority training rows the synthetics interpolate.
    pub minority: Matrix,
    pub minority_label: u8,
    pub rows: Vec<SmoteRow>,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub metrics: MetricsReport,
    pub predictions: Vec<SamplePrediction>,
    pub model: FittedModel,
    /// None when the fold's training classes were already balanced.
    pub smote: Option<SmoteAudit>,
    /// Row indices into the cell's feature matrix (real samples only).
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Run one fold end to end: materialize train/test, oversample the
/// training minority to parity, fit, predict, measure. Binning, SMOTE
/// neighbors and every fitted statistic see training rows only.
pub fn run_fold(
    fm: &FeatureMatrix,
    plan: &FoldPlan,
    fold_idx: usize,
    kind: ModelKind,
    config: &ModelConfig,
    seed: u64,
) -> Result<FoldOutcome> {
    let assignment = plan
        .folds
        .get(fold_idx)
        .ok_or_else(|| Error::Config(format!("fold {fold_idx} out of range")))?;
    if let Some(shared) = assignment
        .train_subjects
        .intersection(&assignment.test_subjects)
        .next()
    {
        return Err(Error::Integrity(format!(
            "leakage: subject {shared} in both train and test of fold {fold_idx}"
        )));
    }

    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (r, id) in fm.subject_ids.iter().enumerate() {
        if assignment.train_subjects.contains(id) {
            train_rows.push(r);
        } else if assignment.test_subjects.contains(id) {
            test_rows.push(r);
        } else {
            return Err(Error::Integrity(format!(
                "subject {id} missing from the fold plan"
            )));
        }
    }
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::Config(format!(
            "fold {fold_idx} has an empty train or test side"
        )));
    }

    let mut x_train = fm.x.select_rows(&train_rows);
    let mut y_train: Vec<u8> = train_rows.iter().map(|&r| fm.labels[r]).collect();

    // Oversample the training minority to class parity; the test side is
    // never touched and keeps the cohort's natural imbalance.
    let pos = y_train.iter().filter(|y| **y == 1).count();
    let neg = y_train.len() - pos;
    let smote_audit = if pos != neg && pos > 0 && neg > 0 {
        let minority_label = u8::from(pos < neg);
        let minority_rows: Vec<usize> = (0..y_train.len())
            .filter(|&i| y_train[i] == minority_label)
            .collect();
        let minority = x_train.select_rows(&minority_rows);
        let n_synthetic = pos.abs_diff(neg);
        let rows = smote(
            &minority,
            config.smote_k,
            n_synthetic,
            derive_seed(seed, &format!("smote/fold-{fold_idx}")),
        )?;
        for s in &rows {
            x_train.push_row(&s.row);
            y_train.push(minority_label);
        }
        Some(SmoteAudit { minority, minority_label, rows })
    } else {
        None
    };

    let model = fit_model(&x_train, &y_train, kind, config, seed, fold_idx)?;

    let x_test = fm.x.select_rows(&test_rows);
    let probabilities = model.predict_proba(&x_test)?;
    let test_labels: Vec<u8> = test_rows.iter().map(|&r| fm.labels[r]).collect();
    let metrics = compute_metrics(&probabilities, &test_labels, config.threshold)?;
    let predictions = test_rows
        .iter()
        .zip(&probabilities)
        .map(|(&r, p)| SamplePrediction {
            subject_id: fm.subject_ids[r].clone(),
            laterality: fm.lateralities[r],
            label: fm.labels[r],
            probability: *p,
        })
        .collect();

    Ok(FoldOutcome {
        fold: fold_idx,
        metrics,
        predictions,
        model,
        smote: smote_audit,
        train_rows,
        test_rows,
    })
}

fn fit_model(
    x: &Matrix,
    y: &[u8],
    kind: ModelKind,
    config: &ModelConfig,
    seed: u64,
    fold_idx: usize,
) -> Result<FittedModel> {
    match kind {
        ModelKind::GradientBoosting => {
            Ok(FittedModel::Boosted(fit_gradient_boosting(x, y, &config.boost)?))
        }
        ModelKind::RandomForest => {
            let params = ForestParams {
                seed: derive_seed(seed, &format!("forest/fold-{fold_idx}")),
                ..config.forest
            };
            Ok(FittedModel::Forest(fit_random_forest(x, y, &params)?))
        }
        ModelKind::Ebm => Ok(FittedModel::Ebm(fit_ebm(x, y, &config.ebm)?)),
        ModelKind::EbmInteractions => {
            let mains = fit_ebm(x, y, &config.ebm)?;
            let candidates = detect_interactions(x, y, &mains, config.ebm_pairs)?;
            let pairs: Vec<(usize, usize)> = candidates.iter().map(|c| c.pair).collect();
            Ok(FittedModel::Ebm(fit_pair_terms(x, y, &mains, &pairs)?))
        }
    }
}

/// Per-fold subject-level class ratio sanity: test MS fraction must stay
/// near the cohort's natural fraction (no rebalancing of test sets).
pub fn test_ratio_deviation(fm: &FeatureMatrix, outcome: &FoldOutcome) -> f64 {
    let cohort_ms = fm.labels.iter().filter(|y| **y == 1).count() as f64 / fm.labels.len() as f64;
    let test_ms = outcome
        .test_rows
        .iter()
        .filter(|&&r| fm.labels[r] == 1)
        .count() as f64
        / outcome.test_rows.len() as f64;
    (test_ms - cohort_ms).abs()
}

/// Subjects seen in any training side together with test sides, for
/// whole-study leakage scans.
pub fn assert_no_subject_overlap(plan: &FoldPlan) -> Result<()> {
    plan.leakage_scan()
}
