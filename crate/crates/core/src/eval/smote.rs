//! SMOTE oversampling: synthetic minority rows interpolated between a
//! minority sample and one of its k nearest minority neighbors.
//!
//! Applied to training data only, after splitting, until class counts
//! match. Distances are unscaled Euclidean; all features here share
//! micrometer units.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_for;

/// One synthetic row with its provenance, kept so the convex-combination
/// residual check can be audited after the fact.
#[derive(Debug, Clone)]
pub struct SmoteRow {
    pub row: Vec<f64>,
    /// Index of the base minority row.
    pub base: usize,
    /// Index of the chosen neighbor row.
    pub neighbor: usize,
    /// Interpolation coefficient in [0, 1).
    pub u: f64,
}

/// Indices of the k nearest rows to `i` (excluding `i`), squared Euclidean
/// distance, ties by index.
fn k_nearest(x: &Matrix, i: usize, k: usize) -> Vec<usize> {
    let mut dists: Vec<(f64, usize)> = (0..x.n_rows())
        .filter(|&j| j != i)
        .map(|j| {
            let d: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, j)
        })
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.truncate(k);
    dists.into_iter().map(|(_, j)| j).collect()
}

/// Generate `n_synthetic` rows. Requires strictly more minority rows than
/// neighbors so every row has k real neighbors.
pub fn smote(
    x_minority: &Matrix,
    k_neighbors: usize,
    n_synthetic: usize,
    seed: u64,
) -> Result<Vec<SmoteRow>> {
    let m = x_minority.n_rows();
    if k_neighbors == 0 {
        return Err(Error::Config("SMOTE needs at least one neighbor".into()));
    }
    if m <= k_neighbors {
        return Err(Error::Config(format!(
            "SMOTE with k = {k_neighbors} needs at least {} minority rows, got {m}",
            k_neighbors + 1
        )));
    }
    let neighbors: Vec<Vec<usize>> = (0..m).map(|i| k_nearest(x_minority, i, k_neighbors)).collect();
    let mut rng = rng_for(seed, "smote");
    let mut out = Vec::with_capacity(n_synthetic);
    for _ in 0..n_synthetic {
        let base = rng.random_range(0..m);
        let neighbor = neighbors[base][rng.random_range(0..k_neighbors)];
        let u: f64 = rng.random::<f64>();
        let row: Vec<f64> = x_minority
            .row(base)
            .iter()
            .zip(x_minority.row(neighbor))
            .map(|(a, b)| a + u * (b - a))
            .collect();
        out.push(SmoteRow { row, base, neighbor, u });
    }
    Ok(out)
}

/// Residual of the convex-combination identity for one synthetic row
/// against its recorded endpoints: max |s - (a + u (b - a))|.
pub fn convex_residual(row: &SmoteRow, x_minority: &Matrix) -> f64 {
    let a = x_minority.row(row.base);
    let b = x_minority.row(row.neighbor);
    row.row
        .iter()
        .zip(a.iter().zip(b))
        .map(|(s, (av, bv))| (s - (av + row.u * (bv - av))).abs())
        .fold(0.0, f64::max)
}
