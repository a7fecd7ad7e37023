//! Explainable boosting machine: a generalized additive model on the
//! logit link whose per-feature score functions are built by cyclic,
//! low-learning-rate Newton boosting of small trees over quantile bins,
//! with optional pairwise interaction terms.
//!
//! The raw score of a fitted model is
//! `intercept + sum_j f_j(x_j) + sum_(i,j) f_ij(x_i, x_j)` where every term
//! is a bin-table lookup, so additivity is exact by construction and each
//! term doubles as its own explanation.

use serde::{Deserialize, Serialize};

use crate::ensemble::{log_loss, logit, sigmoid};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::shap::{Attribution, TargetSpace};

/// Ascending quantile cut points for one feature. Bin of `x` is the number
/// of cuts `<= x`, so out-of-range values clamp to the extreme bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    cuts: Vec<f64>,
    /// Training range, kept for score-curve exports.
    pub value_min: f64,
    pub value_max: f64,
}

impl BinEdges {
    /// Quantile-based cuts with at most `max_bins` bins. When the feature
    /// has no more distinct values than bins, every distinct value gets its
    /// own bin.
    pub fn quantile(values: &[f64], max_bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("cannot bin an empty feature".into()));
        }
        if max_bins < 2 {
            return Err(Error::Config("bin count must be at least 2".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(|a, b| a.total_cmp(b));
        let n = sorted.len();
        let mut distinct = sorted.clone();
        distinct.dedup();

        let mut cuts = Vec::new();
        if distinct.len() <= max_bins {
            for w in distinct.windows(2) {
                cuts.push(w[0] + 0.5 * (w[1] - w[0]));
            }
        } else {
            for k in 1..max_bins {
                let idx = (k * n) / max_bins;
                if idx == 0 || idx >= n {
                    continue;
                }
                let lo = sorted[idx - 1];
                let hi = sorted[idx];
                if hi > lo {
                    cuts.push(lo + 0.5 * (hi - lo));
                }
            }
            cuts.dedup();
        }
        Ok(Self { cuts, value_min: sorted[0], value_max: sorted[n - 1] })
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn bin(&self, x: f64) -> usize {
        // cuts are ascending; partition_point gives the count of cuts <= x.
        self.cuts.partition_point(|c| *c <= x)
    }

    /// Value range covered by a bin, clipped to the training range.
    pub fn bin_span(&self, b: usize) -> (f64, f64) {
        let lo = if b == 0 { self.value_min } else { self.cuts[b - 1] };
        let hi = if b == self.cuts.len() { self.value_max } else { self.cuts[b] };
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbmParams {
    pub max_bins: usize,
    pub learning_rate: f64,
    pub outer_rounds: usize,
    /// L2 regularization on inner-tree leaf weights.
    pub leaf_reg: f64,
    /// Bin resolution for pairwise terms and interaction scoring.
    pub pair_bins: usize,
    /// Cyclic rounds over pair tables when fitting interactions.
    pub pair_rounds: usize,
    /// Pairs whose detection gain per training sample falls below this are
    /// flagged weak.
    pub weak_gain_per_sample: f64,
}

impl Default for EbmParams {
    fn default() -> Self {
        Self {
            max_bins: 256,
            learning_rate: 0.01,
            outer_rounds: 500,
            leaf_reg: 0.0,
            pair_bins: 32,
            pair_rounds: 500,
            weak_gain_per_sample: 0.05,
        }
    }
}

/// A fitted pairwise term f_ij, tabulated on its own coarser bin grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub edges_i: BinEdges,
    pub edges_j: BinEdges,
    /// Row-major `n_bins(i) x n_bins(j)` score table.
    pub table: Vec<f64>,
    /// Training sample count per cell.
    pub counts: Vec<f64>,
}

impl PairTerm {
    pub fn width(&self) -> usize {
        self.edges_j.n_bins()
    }

    pub fn score_at(&self, xi: f64, xj: f64) -> f64 {
        let bi = self.edges_i.bin(xi);
        let bj = self.edges_j.bin(xj);
        self.table[bi * self.width() + bj]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmModel {
    pub params: EbmParams,
    /// Log-odds intercept (centering shifts folded in).
    pub intercept: f64,
    pub bin_edges: Vec<BinEdges>,
    /// Per feature, score per bin.
    pub main_tables: Vec<Vec<f64>>,
    /// Per feature, training sample count per bin.
    pub main_counts: Vec<Vec<f64>>,
    pub pairs: Vec<PairTerm>,
    /// Mean training log-loss after each outer round (entry 0 is the
    /// intercept-only loss; pair-fitting rounds append further entries).
    pub loss_trace: Vec<f64>,
}

impl EbmModel {
    pub fn n_features(&self) -> usize {
        self.bin_edges.len()
    }

    pub fn n_terms(&self) -> usize {
        self.n_features() + self.pairs.len()
    }

    /// Term names: feature names first, then "a x b" for pairs.
    pub fn term_names(&self, feature_names: &[String]) -> Vec<String> {
        let mut names: Vec<String> = feature_names.to_vec();
        for p in &self.pairs {
            names.push(format!("{} x {}", feature_names[p.i], feature_names[p.j]));
        }
        names
    }

    pub fn raw_score(&self, row: &[f64]) -> Result<f64> {
        Ok(self.term_scores(row)?.iter().sum::<f64>() + self.intercept)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.raw_score(row)?))
    }

    /// Per-term contributions at a sample: main terms then pair terms.
    pub fn term_scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(Error::Integrity(format!(
                "sample has {} features, model expects {}",
                row.len(),
                self.n_features()
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Integrity(format!("non-finite feature value {v}")));
        }
        let mut scores = Vec::with_capacity(self.n_terms());
        for (j, edges) in self.bin_edges.iter().enumerate() {
            scores.push(self.main_tables[j][edges.bin(row[j])]);
        }
        for p in &self.pairs {
            scores.push(p.score_at(row[p.i], row[p.j]));
        }
        Ok(scores)
    }
}

/// Newton statistics for one histogram cell or region.
#[derive(Debug, Clone, Copy, Default)]
struct GhStats {
    g: f64,
    h: f64,
    n: f64,
}

impl GhStats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1.0;
    }

    fn merge(&mut self, o: &GhStats) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }

    fn term(&self, lambda: f64) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let denom = self.h + lambda;
        if denom <= 0.0 {
            0.0
        } else {
            self.g * self.g / denom
        }
    }

    fn leaf(&self, lambda: f64) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let denom = self.h + lambda;
        if denom <= 0.0 {
            0.0
        } else {
            -self.g / denom
        }
    }
}

/// Best single cut of a bin-range histogram: returns (cut, gain) where the
/// left side covers bins < cut. Only cuts with at least one sample on each
/// side are considered.
fn best_histogram_cut(hist: &[GhStats], lambda: f64) -> Option<(usize, f64)> {
    let mut total = GhStats::default();
    for s in hist {
        total.merge(s);
    }
    let mut left = GhStats::default();
    let mut best: Option<(usize, f64)> = None;
    for c in 1..hist.len() {
        left.merge(&hist[c - 1]);
        if left.n == 0.0 || left.n == total.n {
            continue;
        }
        let mut right = total;
        right.g -= left.g;
        right.h -= left.h;
        right.n -= left.n;
        let gain = 0.5 * (left.term(lambda) + right.term(lambda) - total.term(lambda));
        if gain > 0.0 && best.map_or(true, |(_, g)| gain > g) {
            best = Some((c, gain));
        }
    }
    best
}

/// Depth-2 update on a single feature's histogram: per-bin additive deltas
/// (already scaled by the learning rate), or None when no split has gain.
fn depth2_histogram_update(hist: &[GhStats], lambda: f64, eta: f64) -> Option<Vec<f64>> {
    let (root_cut, _) = best_histogram_cut(hist, lambda)?;
    let mut deltas = vec![0.0; hist.len()];
    let mut fill = |lo: usize, hi: usize| {
        let side = &hist[lo..hi];
        match best_histogram_cut(side, lambda) {
            Some((c, _)) => {
                let mut a = GhStats::default();
                for s in &side[..c] {
                    a.merge(s);
                }
                let mut b = GhStats::default();
                for s in &side[c..] {
                    b.merge(s);
                }
                let (va, vb) = (a.leaf(lambda), b.leaf(lambda));
                for d in &mut deltas[lo..lo + c] {
                    *d = eta * va;
                }
                for d in &mut deltas[lo + c..hi] {
                    *d = eta * vb;
                }
            }
            None => {
                let mut a = GhStats::default();
                for s in side {
                    a.merge(s);
                }
                let v = a.leaf(lambda);
                for d in &mut deltas[lo..hi] {
                    *d = eta * v;
                }
            }
        }
    };
    fill(0, root_cut);
    fill(root_cut, hist.len());
    Some(deltas)
}

fn binned_column(x: &Matrix, j: usize, edges: &BinEdges) -> Vec<u32> {
    (0..x.n_rows()).map(|r| edges.bin(x.get(r, j)) as u32).collect()
}

/// Fit the main-effects model: quantile-bin every feature, then cycle over
/// features in index order for `outer_rounds` rounds, each time taking one
/// damped depth-2 Newton step on that feature's binned residuals. Tables
/// are mean-centered afterwards with the shifts folded into the intercept.
pub fn fit_ebm(x: &Matrix, y: &[u8], params: &EbmParams) -> Result<EbmModel> {
    if x.n_rows() != y.len() {
        return Err(Error::Integrity("row/label count mismatch".into()));
    }
    if params.max_bins < 2 {
        return Err(Error::Config("max_bins must be at least 2".into()));
    }
    crate::ebm::check_labels(y)?;
    let n = x.n_rows();
    let d = x.n_cols();

    let bin_edges: Vec<BinEdges> = (0..d)
        .map(|j| BinEdges::quantile(&x.column(j), params.max_bins))
        .collect::<Result<_>>()?;
    let binned: Vec<Vec<u32>> = (0..d).map(|j| binned_column(x, j, &bin_edges[j])).collect();
    let mut main_counts: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut c = vec![0.0; bin_edges[j].n_bins()];
            for &b in &binned[j] {
                c[b as usize] += 1.0;
            }
            c
        })
        .collect();
    let mut main_tables: Vec<Vec<f64>> =
        (0..d).map(|j| vec![0.0; bin_edges[j].n_bins()]).collect();

    let prevalence = y.iter().filter(|v| **v == 1).count() as f64 / n as f64;
    let intercept = logit(prevalence);
    let mut scores = vec![intercept; n];
    let mut loss_trace = vec![log_loss(&scores, y)];

    for _ in 0..params.outer_rounds {
        for j in 0..d {
            let mut hist = vec![GhStats::default(); bin_edges[j].n_bins()];
            for i in 0..n {
                let p = sigmoid(scores[i]);
                hist[binned[j][i] as usize].add(p - f64::from(y[i]), p * (1.0 - p));
            }
            if let Some(deltas) = depth2_histogram_update(&hist, params.leaf_reg, params.learning_rate)
            {
                for (b, delta) in deltas.iter().enumerate() {
                    main_tables[j][b] += delta;
                }
                for i in 0..n {
                    scores[i] += deltas[binned[j][i] as usize];
                }
            }
        }
        loss_trace.push(log_loss(&scores, y));
    }

    let mut model = EbmModel {
        params: *params,
        intercept,
        bin_edges,
        main_tables,
        main_counts: std::mem::take(&mut main_counts),
        pairs: Vec::new(),
        loss_trace,
    };
    center_main_terms(&mut model, n as f64);
    Ok(model)
}

fn check_labels(y: &[u8]) -> Result<()> {
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

fn center_main_terms(model: &mut EbmModel, n: f64) {
    for j in 0..model.n_features() {
        let mean: f64 = model.main_tables[j]
            .iter()
            .zip(&model.main_counts[j])
            .map(|(v, c)| v * c)
            .sum::<f64>()
            / n;
        for v in &mut model.main_tables[j] {
            *v -= mean;
        }
        model.intercept += mean;
    }
}

fn center_pair_terms(model: &mut EbmModel, n: f64) {
    for p in &mut model.pairs {
        let mean: f64 =
            p.table.iter().zip(&p.counts).map(|(v, c)| v * c).sum::<f64>() / n;
        for v in &mut p.table {
            *v -= mean;
        }
        model.intercept += mean;
    }
}

/// A scored candidate interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionCandidate {
    /// Feature indices, i < j.
    pub pair: (usize, usize),
    /// Best single quadrant-split Newton gain on the main-effects
    /// residuals.
    pub gain: f64,
    /// Gain per training sample fell below the configured threshold.
    pub weak: bool,
}

struct PairGrid {
    edges_i: BinEdges,
    edges_j: BinEdges,
    bins_i: Vec<u32>,
    bins_j: Vec<u32>,
}

fn pair_grid(x: &Matrix, i: usize, j: usize, pair_bins: usize) -> Result<PairGrid> {
    let edges_i = BinEdges::quantile(&x.column(i), pair_bins)?;
    let edges_j = BinEdges::quantile(&x.column(j), pair_bins)?;
    let bins_i = binned_column(x, i, &edges_i);
    let bins_j = binned_column(x, j, &edges_j);
    Ok(PairGrid { edges_i, edges_j, bins_i, bins_j })
}

/// Best 4-quadrant split (one cut per feature) of a pair's 2-D Newton
/// histogram. Returns (cut_i, cut_j, gain, quadrant leaf deltas).
fn best_quadrant_split(
    grid: &PairGrid,
    g: &[f64],
    h: &[f64],
    lambda: f64,
) -> Option<(usize, usize, f64, [GhStats; 4])> {
    let bi = grid.edges_i.n_bins();
    let bj = grid.edges_j.n_bins();
    let mut cells = vec![GhStats::default(); bi * bj];
    for r in 0..g.len() {
        cells[grid.bins_i[r] as usize * bj + grid.bins_j[r] as usize].add(g[r], h[r]);
    }
    // Prefix sums over the cell grid: pre[a][b] = stats of bins_i < a, bins_j < b.
    let mut pre = vec![GhStats::default(); (bi + 1) * (bj + 1)];
    for a in 1..=bi {
        for b in 1..=bj {
            let mut s = cells[(a - 1) * bj + (b - 1)];
            let at = |p: &Vec<GhStats>, aa: usize, bb: usize| p[aa * (bj + 1) + bb];
            s.merge(&at(&pre, a - 1, b));
            s.merge(&at(&pre, a, b - 1));
            let sub = at(&pre, a - 1, b - 1);
            s.g -= sub.g;
            s.h -= sub.h;
            s.n -= sub.n;
            pre[a * (bj + 1) + b] = s;
        }
    }
    let at = |aa: usize, bb: usize| pre[aa * (bj + 1) + bb];
    let total = at(bi, bj);
    let total_term = total.term(lambda);
    let mut best: Option<(usize, usize, f64, [GhStats; 4])> = None;
    for ci in 1..bi {
        for cj in 1..bj {
            let q00 = at(ci, cj);
            let mut q01 = at(ci, bj);
            q01.g -= q00.g;
            q01.h -= q00.h;
            q01.n -= q00.n;
            let mut q10 = at(bi, cj);
            q10.g -= q00.g;
            q10.h -= q00.h;
            q10.n -= q00.n;
            let mut q11 = total;
            for q in [&q00, &q01, &q10] {
                q11.g -= q.g;
                q11.h -= q.h;
                q11.n -= q.n;
            }
            let quads = [q00, q01, q10, q11];
            let split_sides = quads.iter().filter(|q| q.n > 0.0).count();
            if split_sides < 2 {
                continue;
            }
            let gain =
                0.5 * (quads.iter().map(|q| q.term(lambda)).sum::<f64>() - total_term);
            if gain > 0.0 && best.as_ref().map_or(true, |(_, _, g, _)| gain > *g) {
                best = Some((ci, cj, gain, quads));
            }
        }
    }
    best
}

/// Score every feature pair by the best achievable quadrant-split gain on
/// the main-effects residuals and return the top `k`, ties broken
/// lexicographically.
pub fn detect_interactions(
    x: &Matrix,
    y: &[u8],
    model: &EbmModel,
    k: usize,
) -> Result<Vec<InteractionCandidate>> {
    let d = x.n_cols();
    if d != model.n_features() {
        return Err(Error::Integrity("matrix width does not match the model".into()));
    }
    let max_pairs = d * d.saturating_sub(1) / 2;
    if k > max_pairs {
        return Err(Error::Config(format!(
            "requested {k} pairs but only {max_pairs} exist for {d} features"
        )));
    }
    let n = x.n_rows();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for r in 0..n {
        let p = model.predict_row(x.row(r))?;
        g[r] = p - f64::from(y[r]);
        h[r] = p * (1.0 - p);
    }
    let mut candidates = Vec::with_capacity(max_pairs);
    for i in 0..d {
        for j in i + 1..d {
            let grid = pair_grid(x, i, j, model.params.pair_bins)?;
            let gain = best_quadrant_split(&grid, &g, &h, model.params.leaf_reg)
                .map_or(0.0, |(_, _, gain, _)| gain);
            candidates.push(InteractionCandidate {
                pair: (i, j),
                gain,
                weak: gain < model.params.weak_gain_per_sample * n as f64,
            });
        }
    }
    candidates.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.pair.cmp(&b.pair)));
    candidates.truncate(k);
    Ok(candidates)
}

/// Add pairwise terms on top of the frozen main effects by cyclic quadrant
/// boosting; pair tables are mean-centered and the intercept adjusted.
pub fn fit_pair_terms(
    x: &Matrix,
    y: &[u8],
    model: &EbmModel,
    pairs: &[(usize, usize)],
) -> Result<EbmModel> {
    let mut model = model.clone();
    if pairs.is_empty() {
        return Ok(model);
    }
    if !model.pairs.is_empty() {
        return Err(Error::Config("model already has pair terms".into()));
    }
    let d = model.n_features();
    let mut seen = std::collections::HashSet::new();
    for &(i, j) in pairs {
        if i >= d || j >= d || i == j {
            return Err(Error::Config(format!("invalid feature pair ({i}, {j})")));
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(Error::Config(format!("duplicate feature pair ({i}, {j})")));
        }
    }
    let n = x.n_rows();
    if n != y.len() {
        return Err(Error::Integrity("row/label count mismatch".into()));
    }

    let grids: Vec<PairGrid> = pairs
        .iter()
        .map(|&(i, j)| pair_grid(x, i.min(j), i.max(j), model.params.pair_bins))
        .collect::<Result<_>>()?;
    for (&(i, j), grid) in pairs.iter().zip(&grids) {
        let (i, j) = (i.min(j), i.max(j));
        let bj = grid.edges_j.n_bins();
        let mut counts = vec![0.0; grid.edges_i.n_bins() * bj];
        for r in 0..n {
            counts[grid.bins_i[r] as usize * bj + grid.bins_j[r] as usize] += 1.0;
        }
        model.pairs.push(PairTerm {
            i,
            j,
            edges_i: grid.edges_i.clone(),
            edges_j: grid.edges_j.clone(),
            table: vec![0.0; grid.edges_i.n_bins() * bj],
            counts,
        });
    }

    // Scores of the frozen mains; pair updates accumulate on top.
    let mut scores = Vec::with_capacity(n);
    for r in 0..n {
        scores.push(model.raw_score(x.row(r))?);
    }
    let lambda = model.params.leaf_reg;
    let eta = model.params.learning_rate;
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..model.params.pair_rounds {
        for (p_idx, grid) in grids.iter().enumerate() {
            for r in 0..n {
                let p = sigmoid(scores[r]);
                g[r] = p - f64::from(y[r]);
                h[r] = p * (1.0 - p);
            }
            let Some((ci, cj, _gain, quads)) = best_quadrant_split(grid, &g, &h, lambda) else {
                continue;
            };
            let deltas = [
                eta * quads[0].leaf(lambda),
                eta * quads[1].leaf(lambda),
                eta * quads[2].leaf(lambda),
                eta * quads[3].leaf(lambda),
            ];
            let bj = grid.edges_j.n_bins();
            let pair = &mut model.pairs[p_idx];
            for a in 0..grid.edges_i.n_bins() {
                for b in 0..bj {
                    let q = usize::from(a >= ci) * 2 + usize::from(b >= cj);
                    pair.table[a * bj + b] += deltas[q];
                }
            }
            for r in 0..n {
                let q = usize::from(grid.bins_i[r] as usize >= ci) * 2
                    + usize::from(grid.bins_j[r] as usize >= cj);
                scores[r] += deltas[q];
            }
        }
        model.loss_trace.push(log_loss(&scores, y));
    }
    center_pair_terms(&mut model, n as f64);
    Ok(model)
}

/// Exact per-term explanation of one prediction: contribution of term t is
/// its table value at the sample's bin(s); base value is the intercept.
pub fn ebm_explain(model: &EbmModel, row: &[f64]) -> Result<Attribution> {
    let phi = model.term_scores(row)?;
    let output = model.intercept + phi.iter().sum::<f64>();
    Ok(Attribution {
        base_value: model.intercept,
        phi,
        output,
        target_space: TargetSpace::RawScore,
    })
}

/// Score curve of one main term: (bin low, bin high, score, count) per bin.
pub type ScoreCurve = Vec<(f64, f64, f64, f64)>;

#[derive(Debug, Clone)]
pub struct EbmGlobal {
    /// Mean |term score| over the training distribution, mains then pairs.
    pub importance: Vec<f64>,
    /// Term indices sorted by importance descending, ties by index.
    pub ranking: Vec<usize>,
    pub curves: Vec<ScoreCurve>,
}

/// Global term importances (mean |score| weighted by training bin counts)
/// plus per-feature score curves. Pair heat tables live on the model.
pub fn ebm_global(model: &EbmModel) -> EbmGlobal {
    let n: f64 = model.main_counts.first().map_or(0.0, |c| c.iter().sum());
    let mut importance = Vec::with_capacity(model.n_terms());
    for j in 0..model.n_features() {
        let s: f64 = model.main_tables[j]
            .iter()
            .zip(&model.main_counts[j])
            .map(|(v, c)| v.abs() * c)
            .sum();
        importance.push(if n > 0.0 { s / n } else { 0.0 });
    }
    for p in &model.pairs {
        let s: f64 = p.table.iter().zip(&p.counts).map(|(v, c)| v.abs() * c).sum();
        importance.push(if n > 0.0 { s / n } else { 0.0 });
    }
    let mut ranking: Vec<usize> = (0..importance.len()).collect();
    ranking.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let curves = (0..model.n_features())
        .map(|j| {
            (0..model.bin_edges[j].n_bins())
                .map(|b| {
                    let (lo, hi) = model.bin_edges[j].bin_span(b);
                    (lo, hi, model.main_tables[j][b], model.main_counts[j][b])
                })
                .collect()
        })
        .collect();
    EbmGlobal { importance, ranking, curves }
}
