//! Dataset schema, CSV ingestion, zone aggregation, eye-selection
//! strategies, and feature-set materialization.
//!
//! The atomic record is one eye's 8x8 posterior-pole thickness grid for one
//! retinal layer. Grids use the device coordinate convention: origin at cell
//! (1,1), names `row.column`, stored row-major.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_for;

pub const GRID_SIDE: usize = 8;
pub const GRID_CELLS: usize = GRID_SIDE * GRID_SIDE;
pub const N_ZONES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    MS,
    HC,
}

impl Group {
    pub fn label(self) -> u8 {
        match self {
            Group::MS => 1,
            Group::HC => 0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "MS" => Ok(Group::MS),
            "HC" => Ok(Group::HC),
            other => Err(Error::Parse(format!("unknown group '{other}'"))),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::MS => "MS",
            Group::HC => "HC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

impl Sex {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(Sex::M),
            "F" => Ok(Sex::F),
            other => Err(Error::Parse(format!("unknown sex '{other}'"))),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::M => "M",
            Sex::F => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Laterality {
    L,
    R,
}

impl Laterality {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "L" => Ok(Laterality::L),
            "R" => Ok(Laterality::R),
            other => Err(Error::Parse(format!("unknown eye '{other}'"))),
        }
    }
}

impl fmt::Display for Laterality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Laterality::L => "L",
            Laterality::R => "R",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    GCL,
    RNFL,
}

impl Layer {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "GCL" => Ok(Layer::GCL),
            "RNFL" => Ok(Layer::RNFL),
            other => Err(Error::Parse(format!("unknown layer '{other}'"))),
        }
    }

    pub fn all() -> [Layer; 2] {
        [Layer::GCL, Layer::RNFL]
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::GCL => "GCL",
            Layer::RNFL => "RNFL",
        })
    }
}

/// One eye's 8x8 thickness grid for one retinal layer, plus subject
/// metadata. Exactly one record may exist per (subject, eye, layer).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EyeSample {
    pub subject_id: String,
    pub group: Group,
    pub age: f64,
    pub sex: Sex,
    pub laterality: Laterality,
    pub layer: Layer,
    /// Row-major 64-cell grid, micrometers, all finite and non-negative.
    pub grid: Vec<f64>,
    pub quality_score: Option<f64>,
}

impl EyeSample {
    pub fn validate(&self) -> Result<()> {
        if self.grid.len() != GRID_CELLS {
            return Err(Error::Integrity(format!(
                "grid has {} cells, expected {GRID_CELLS}",
                self.grid.len()
            )));
        }
        for (i, v) in self.grid.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Integrity(format!(
                    "grid cell {} is not a finite non-negative thickness: {v}",
                    cell_name_from_index(i)
                )));
            }
        }
        Ok(())
    }

    /// Thickness at 1-indexed (row, col).
    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.grid[(row - 1) * GRID_SIDE + (col - 1)]
    }
}

/// Feature name of the row-major flat index, e.g. index 0 -> "1.1",
/// index 35 -> "5.4".
pub fn cell_name_from_index(i: usize) -> String {
    format!("{}.{}", i / GRID_SIDE + 1, i % GRID_SIDE + 1)
}

/// Inverse of [`cell_name_from_index`].
pub fn cell_index_from_name(name: &str) -> Result<usize> {
    let (r, c) = name
        .split_once('.')
        .ok_or_else(|| Error::Parse(format!("bad cell name '{name}'")))?;
    let r: usize = r.parse().map_err(|_| Error::Parse(format!("bad cell name '{name}'")))?;
    let c: usize = c.parse().map_err(|_| Error::Parse(format!("bad cell name '{name}'")))?;
    if !(1..=GRID_SIDE).contains(&r) || !(1..=GRID_SIDE).contains(&c) {
        return Err(Error::Parse(format!("cell name '{name}' out of the 8x8 grid")));
    }
    Ok((r - 1) * GRID_SIDE + (c - 1))
}

/// Assignment of each of the 64 grid cells to one of six zones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneMap {
    /// Row-major zone ids in 1..=6.
    assignment: Vec<u8>,
}

impl ZoneMap {
    pub fn new(assignment: Vec<u8>) -> Result<Self> {
        if assignment.len() != GRID_CELLS {
            return Err(Error::Parse(format!(
                "zone map has {} cells, expected {GRID_CELLS}",
                assignment.len()
            )));
        }
        let mut counts = [0usize; N_ZONES];
        for (i, z) in assignment.iter().enumerate() {
            if !(1..=N_ZONES as u8).contains(z) {
                return Err(Error::Parse(format!(
                    "cell {} has zone id {z}, expected 1..=6",
                    cell_name_from_index(i)
                )));
            }
            counts[usize::from(*z) - 1] += 1;
        }
        if let Some(z) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Parse(format!("zone Z{} has no cells", z + 1)));
        }
        Ok(Self { assignment })
    }

    /// Default map approximating the published zone figure: a central
    /// macular block (Z2), a nasal papillomacular band (Z1), upper quadrants
    /// (Z4 nasal, Z5 temporal) and lower quadrants (Z3 nasal, Z6 temporal).
    /// The exact clinical assignment is configuration data; replace this map
    /// with the real one via a zone-map file when available.
    pub fn default_map() -> Self {
        #[rustfmt::skip]
        const MAP: [u8; GRID_CELLS] = [
            4, 4, 4, 4, 5, 5, 5, 5,
            4, 4, 4, 4, 5, 5, 5, 5,
            4, 4, 4, 4, 5, 5, 5, 5,
            1, 1, 1, 2, 2, 5, 5, 5,
            1, 1, 1, 2, 2, 6, 6, 6,
            3, 3, 3, 3, 6, 6, 6, 6,
            3, 3, 3, 3, 6, 6, 6, 6,
            3, 3, 3, 3, 6, 6, 6, 6,
        ];
        Self { assignment: MAP.to_vec() }
    }

    /// Zone id (1..=6) of the row-major flat cell index.
    pub fn zone_of(&self, cell: usize) -> u8 {
        self.assignment[cell]
    }

    /// Flat cell indices belonging to zone `z` (1..=6), in row-major order.
    pub fn cells_of_zone(&self, z: u8) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, zz)| **zz == z)
            .map(|(i, _)| i)
            .collect()
    }

    /// Parse the text format: 8 lines of 8 space-separated integers 1..=6.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut assignment = Vec::with_capacity(GRID_CELLS);
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != GRID_SIDE {
            return Err(Error::Parse(format!(
                "zone map has {} non-empty lines, expected {GRID_SIDE}",
                lines.len()
            )));
        }
        for (ln, line) in lines.iter().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != GRID_SIDE {
                return Err(Error::Parse(format!(
                    "zone map line {} has {} fields, expected {GRID_SIDE}",
                    ln + 1,
                    fields.len()
                )));
            }
            for f in fields {
                let z: u8 = f
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad zone id '{f}' on line {}", ln + 1)))?;
                assignment.push(z);
            }
        }
        Self::new(assignment)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in 0..GRID_SIDE {
            let row: Vec<String> = (0..GRID_SIDE)
                .map(|c| self.assignment[r * GRID_SIDE + c].to_string())
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Which feature representation to materialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// Six zone-mean thicknesses Z1..Z6.
    Zones,
    /// All 64 grid cells, row-major, named "row.column".
    Grid,
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Zones => "zones",
            FeatureSet::Grid => "grid",
        })
    }
}

impl FeatureSet {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zones" => Ok(FeatureSet::Zones),
            "grid" | "ppole" => Ok(FeatureSet::Grid),
            other => Err(Error::Config(format!("unknown feature set '{other}'"))),
        }
    }

    pub fn all() -> [FeatureSet; 2] {
        [FeatureSet::Zones, FeatureSet::Grid]
    }
}

/// How eyes are chosen when a subject contributed one or two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EyeStrategy {
    /// Left eyes only; subjects without a left eye are dropped.
    L,
    /// Right eyes only.
    R,
    /// One eye per subject: the only available one, or a seeded uniform
    /// pick when both exist.
    Rand { seed: u64 },
    /// Both eyes as independent samples.
    LR,
}

impl fmt::Display for EyeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EyeStrategy::L => "L",
            EyeStrategy::R => "R",
            EyeStrategy::Rand { .. } => "rand",
            EyeStrategy::LR => "LR",
        })
    }
}

/// Materialized design matrix with labels and subject bookkeeping.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub x: Matrix,
    /// MS = 1, HC = 0.
    pub labels: Vec<u8>,
    pub subject_ids: Vec<String>,
    pub lateralities: Vec<Laterality>,
}

impl FeatureMatrix {
    pub fn n_samples(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.n_rows();
        if self.labels.len() != n || self.subject_ids.len() != n || self.lateralities.len() != n {
            return Err(Error::Integrity(
                "row, label, subject-id and laterality counts disagree".into(),
            ));
        }
        if self.feature_names.len() != self.x.n_cols() {
            return Err(Error::Integrity("feature name count does not match width".into()));
        }
        Ok(())
    }
}

/// Ingestion knobs. All default to off: grids are used exactly as stored.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Mirror left-eye grids horizontally (column flip) so both eyes share
    /// one nasal/temporal orientation. Off by default: models are trained
    /// per laterality or on raw data.
    pub mirror_left: bool,
    /// Drop samples whose quality score is present and below this value.
    pub min_quality: Option<f64>,
}

const CSV_FIXED_COLUMNS: [&str; 7] = ["subject_id", "group", "age", "sex", "eye", "layer", "quality"];

/// Expected CSV header: the seven fixed columns followed by c1_1..c8_8.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = CSV_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for r in 1..=GRID_SIDE {
        for c in 1..=GRID_SIDE {
            h.push(format!("c{r}_{c}"));
        }
    }
    h
}

/// Load the dataset CSV. One `EyeSample` per row; duplicate
/// (subject, eye, layer) keys are rejected.
pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<Vec<EyeSample>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Parse(format!("cannot open dataset {}: {e}", path.display())))?;
    load_dataset_from_reader(file, opts)
}

pub fn load_dataset_from_reader<R: Read>(reader: R, opts: &LoadOptions) -> Result<Vec<EyeSample>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let expected = csv_header();
    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("cannot read CSV header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Parse(format!(
                "unexpected CSV header: got {} columns, expected {} (subject_id,group,age,sex,eye,layer,quality,c1_1,...,c8_8)",
                got.len(),
                expected.len()
            )));
        }
    }

    let mut samples = Vec::new();
    let mut seen: HashSet<(String, Laterality, Layer)> = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 1; // 1-based data row, excluding the header
        let record = record.map_err(|e| Error::Parse(format!("row {row_no}: {e}")))?;
        if record.len() != expected.len() {
            return Err(Error::Parse(format!(
                "row {row_no}: has {} columns, expected {}",
                record.len(),
                expected.len()
            )));
        }
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let subject_id = field(0).to_string();
        if subject_id.is_empty() {
            return Err(Error::Parse(format!("row {row_no}: empty subject_id")));
        }
        let group = Group::parse(field(1)).map_err(|e| prefix_row(row_no, e))?;
        let age: f64 = field(2)
            .parse()
            .map_err(|_| Error::Parse(format!("row {row_no}: bad age '{}'", field(2))))?;
        let sex = Sex::parse(field(3)).map_err(|e| prefix_row(row_no, e))?;
        let laterality = Laterality::parse(field(4)).map_err(|e| prefix_row(row_no, e))?;
        let layer = Layer::parse(field(5)).map_err(|e| prefix_row(row_no, e))?;
        let quality_score = match field(6) {
            "" => None,
            q => Some(
                q.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {row_no}: bad quality '{q}'")))?,
            ),
        };
        let mut grid = Vec::with_capacity(GRID_CELLS);
        for k in 0..GRID_CELLS {
            let raw = field(7 + k);
            let v: f64 = raw.parse().map_err(|_| {
                Error::Parse(format!(
                    "row {row_no}: non-numeric cell {} = '{raw}'",
                    cell_name_from_index(k)
                ))
            })?;
            grid.push(v);
        }
        if opts.mirror_left && laterality == Laterality::L {
            grid = mirror_columns(&grid);
        }
        let sample = EyeSample {
            subject_id,
            group,
            age,
            sex,
            laterality,
            layer,
            grid,
            quality_score,
        };
        sample.validate().map_err(|e| prefix_row(row_no, e))?;
        if let (Some(minq), Some(q)) = (opts.min_quality, sample.quality_score) {
            if q < minq {
                continue;
            }
        }
        let key = (sample.subject_id.clone(), sample.laterality, sample.layer);
        if !seen.insert(key) {
            return Err(Error::Integrity(format!(
                "row {row_no}: duplicate record for (subject {}, {}, {})",
                sample.subject_id, sample.laterality, sample.layer
            )));
        }
        samples.push(sample);
    }
    Ok(samples)
}

fn prefix_row(row_no: usize, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("row {row_no}: {m}")),
        Error::Integrity(m) => Error::Integrity(format!("row {row_no}: {m}")),
        other => other,
    }
}

fn mirror_columns(grid: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; GRID_CELLS];
    for r in 0..GRID_SIDE {
        for c in 0..GRID_SIDE {
            out[r * GRID_SIDE + c] = grid[r * GRID_SIDE + (GRID_SIDE - 1 - c)];
        }
    }
    out
}

/// Write samples back out in the standard CSV schema.
pub fn save_dataset(path: &Path, samples: &[EyeSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(csv_header())
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for s in samples {
        let mut rec: Vec<String> = vec![
            s.subject_id.clone(),
            s.group.to_string(),
            format!("{}", s.age),
            s.sex.to_string(),
            s.laterality.to_string(),
            s.layer.to_string(),
            s.quality_score.map_or(String::new(), |q| format!("{q}")),
        ];
        rec.extend(s.grid.iter().map(|v| format!("{v}")));
        wtr.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Mean thickness per zone. Entry k is the arithmetic mean of the grid
/// cells assigned to zone k+1.
pub fn aggregate_zones(sample: &EyeSample, zones: &ZoneMap) -> [f64; N_ZONES] {
    let mut sums = [0.0f64; N_ZONES];
    let mut counts = [0usize; N_ZONES];
    for (i, v) in sample.grid.iter().enumerate() {
        let z = usize::from(zones.zone_of(i)) - 1;
        sums[z] += v;
        counts[z] += 1;
    }
    let mut means = [0.0f64; N_ZONES];
    for z in 0..N_ZONES {
        means[z] = sums[z] / counts[z] as f64;
    }
    means
}

/// Apply an eye-selection strategy. Subjects keep all their samples across
/// layers consistently: the rand pick is made once per subject, not per
/// layer.
pub fn select_eyes(samples: &[EyeSample], strategy: EyeStrategy) -> Result<Vec<EyeSample>> {
    let kept: Vec<EyeSample> = match strategy {
        EyeStrategy::LR => samples.to_vec(),
        EyeStrategy::L => samples
            .iter()
            .filter(|s| s.laterality == Laterality::L)
            .cloned()
            .collect(),
        EyeStrategy::R => samples
            .iter()
            .filter(|s| s.laterality == Laterality::R)
            .cloned()
            .collect(),
        EyeStrategy::Rand { seed } => {
            // Group subjects in first-appearance order; decide a laterality
            // per subject, then filter.
            let mut order: Vec<&str> = Vec::new();
            let mut eyes: BTreeMap<&str, HashSet<Laterality>> = BTreeMap::new();
            for s in samples {
                if !eyes.contains_key(s.subject_id.as_str()) {
                    order.push(s.subject_id.as_str());
                }
                eyes.entry(s.subject_id.as_str()).or_default().insert(s.laterality);
            }
            let mut choice: BTreeMap<&str, Laterality> = BTreeMap::new();
            for id in order {
                let available = &eyes[id];
                let lat = if available.len() == 1 {
                    *available.iter().next().unwrap()
                } else {
                    // Random selection only for subjects with both eyes;
                    // per-subject stream keeps the pick independent of
                    // dataset ordering.
                    let mut rng = rng_for(seed, &format!("rand-eye/{id}"));
                    if rng.random::<bool>() {
                        Laterality::L
                    } else {
                        Laterality::R
                    }
                };
                choice.insert(id, lat);
            }
            samples
                .iter()
                .filter(|s| choice[s.subject_id.as_str()] == s.laterality)
                .cloned()
                .collect()
        }
    };
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "eye strategy {strategy} selected no samples"
        )));
    }
    Ok(kept)
}

/// Materialize the design matrix for one layer's samples.
pub fn build_feature_matrix(
    samples: &[EyeSample],
    feature_set: FeatureSet,
    zones: &ZoneMap,
) -> Result<FeatureMatrix> {
    if samples.is_empty() {
        return Err(Error::Config("no samples to build a feature matrix from".into()));
    }
    let layer = samples[0].layer;
    if let Some(bad) = samples.iter().find(|s| s.layer != layer) {
        return Err(Error::Integrity(format!(
            "mixed layers in one feature matrix: found {} and {layer}",
            bad.layer
        )));
    }
    let feature_names: Vec<String> = match feature_set {
        FeatureSet::Zones => (1..=N_ZONES).map(|z| format!("Z{z}")).collect(),
        FeatureSet::Grid => (0..GRID_CELLS).map(cell_name_from_index).collect(),
    };
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let row: Vec<f64> = match feature_set {
            FeatureSet::Zones => aggregate_zones(s, zones).to_vec(),
            FeatureSet::Grid => s.grid.clone(),
        };
        rows.push(row);
    }
    let fm = FeatureMatrix {
        feature_names,
        x: Matrix::from_rows(rows)?,
        labels: samples.iter().map(|s| s.group.label()).collect(),
        subject_ids: samples.iter().map(|s| s.subject_id.clone()).collect(),
        lateralities: samples.iter().map(|s| s.laterality).collect(),
    };
    fm.validate()?;
    Ok(fm)
}

/// Rebuild the 8x8 grid from a grid-feature row (inverse of the row-major
/// flatten used by [`build_feature_matrix`]).
pub fn unflatten_grid(row: &[f64]) -> Result<[[f64; GRID_SIDE]; GRID_SIDE]> {
    if row.len() != GRID_CELLS {
        return Err(Error::Integrity(format!(
            "expected {GRID_CELLS} grid features, got {}",
            row.len()
        )));
    }
    let mut grid = [[0.0; GRID_SIDE]; GRID_SIDE];
    for (i, v) in row.iter().enumerate() {
        grid[i / GRID_SIDE][i % GRID_SIDE] = *v;
    }
    Ok(grid)
}
