//! Explainable tabular machine learning for posterior-pole OCT cohorts.
//!
//! The crate bundles everything needed to run an MS-vs-HC discrimination
//! study on 8x8 retinal thickness grids end to end:
//!
//! * [`data`] — dataset schema, CSV ingestion, zone aggregation, eye
//!   selection strategies, and feature-matrix materialization.
//! * [`tree`] — CART-style regression trees with variance and second-order
//!   (Newton) split objectives, carrying per-node cover counts.
//! * [`ensemble`] — random forests and Newton gradient boosting with
//!   probability outputs and versioned model serialization.
//! * [`ebm`] — explainable boosting machines (additive models of per-feature
//!   score tables) with optional pairwise interaction terms.
//! * [`shap`] — exact Shapley attributions for tree ensembles
//!   (polynomial-time path algorithm plus a brute-force oracle) and the
//!   global/local aggregations behind the report artifacts.
//! * [`eval`] — subject-level stratified k-fold plans, SMOTE oversampling,
//!   classification metrics, Welch's t-test, and the leakage-guarded
//!   per-fold pipeline.
//! * [`synth`] — a synthetic cohort generator calibrated to published
//!   zone-level thickness statistics.
//! * [`study`] — the experiment orchestrator running the full axis matrix.
//! * [`report`] — CSV/SVG artifact emission, including bicubic display
//!   upsampling and a file manifest.

pub mod data;
pub mod ebm;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod report;
pub mod seed;
pub mod shap;
pub mod study;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
