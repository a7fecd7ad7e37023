//! Synthetic cohort generator calibrated to published zone-level
//! thickness statistics, for desk-scale end-to-end runs without patient
//! data.
//!
//! Per subject and layer, a latent zone vector is drawn from the group's
//! zone Gaussians; each eye blends the subject latent with an eye-specific
//! draw so that two eyes of one subject correlate by `eye_correlation`
//! while the marginal eye-level distribution keeps the configured mean and
//! sd. Cell noise of `cell_sd_fraction * zone sd` is added around the
//! eye's zone value and clamped at zero. Zones are generated independently
//! (no published covariances to calibrate against).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{EyeSample, Group, Laterality, Layer, Sex, ZoneMap, N_ZONES};
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneStat {
    /// Micrometers.
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub n_subjects: usize,
    pub n_left_eyes: usize,
    pub n_right_eyes: usize,
    pub age_mean: f64,
    pub age_sd: f64,
    pub male_fraction: f64,
    /// Z1..Z6 for the ganglion cell layer.
    pub gcl: [ZoneStat; N_ZONES],
    /// Z1..Z6 for the retinal nerve fiber layer.
    pub rnfl: [ZoneStat; N_ZONES],
}

impl GroupSpec {
    fn zone_stats(&self, layer: Layer) -> &[ZoneStat; N_ZONES] {
        match layer {
            Layer::GCL => &self.gcl,
            Layer::RNFL => &self.rnfl,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::Config(format!("{name}: subject count must be >= 1")));
        }
        if self.n_left_eyes > self.n_subjects || self.n_right_eyes > self.n_subjects {
            return Err(Error::Config(format!(
                "{name}: eye counts cannot exceed the subject count"
            )));
        }
        if self.n_left_eyes + self.n_right_eyes < self.n_subjects {
            return Err(Error::Config(format!(
                "{name}: every subject needs at least one eye"
            )));
        }
        if !(0.0..=1.0).contains(&self.male_fraction) {
            return Err(Error::Config(format!("{name}: male fraction out of [0,1]")));
        }
        for (layer, stats) in [("GCL", &self.gcl), ("RNFL", &self.rnfl)] {
            for (z, s) in stats.iter().enumerate() {
                if s.sd <= 0.0 || !s.mean.is_finite() {
                    return Err(Error::Config(format!(
                        "{name}: bad {layer} Z{} statistics",
                        z + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub hc: GroupSpec,
    pub ms: GroupSpec,
    /// Correlation between the two eyes of one subject, in [0, 1].
    pub eye_correlation: f64,
    /// Within-zone cell noise as a fraction of the zone sd.
    pub cell_sd_fraction: f64,
    pub seed: u64,
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        self.hc.validate("HC")?;
        self.ms.validate("MS")?;
        if !(0.0..=1.0).contains(&self.eye_correlation) {
            return Err(Error::Config("eye correlation out of [0,1]".into()));
        }
        if self.cell_sd_fraction < 0.0 {
            return Err(Error::Config("cell sd fraction must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cohort spec with the published zone statistics and subject/eye counts:
/// 111 HC subjects (109 L / 107 R eyes) and 59 MS subjects (50 L / 50 R).
/// Eye correlation 0.8 and cell sd fraction 0.5 are generator knobs, not
/// published values.
pub fn default_paper_spec() -> CohortSpec {
    let zs = |pairs: [(f64, f64); N_ZONES]| pairs.map(|(mean, sd)| ZoneStat { mean, sd });
    CohortSpec {
        hc: GroupSpec {
            n_subjects: 111,
            n_left_eyes: 109,
            n_right_eyes: 107,
            age_mean: 44.74,
            age_sd: 11.09,
            male_fraction: 25.0 / 111.0,
            gcl: zs([
                (41.78, 2.89),
                (49.22, 3.68),
                (28.52, 2.36),
                (27.23, 2.46),
                (28.46, 2.35),
                (28.39, 2.62),
            ]),
            rnfl: zs([
                (31.87, 4.26),
                (28.32, 2.99),
                (63.94, 10.25),
                (80.37, 12.93),
                (30.46, 4.38),
                (22.39, 2.73),
            ]),
        },
        ms: GroupSpec {
            n_subjects: 59,
            n_left_eyes: 50,
            n_right_eyes: 50,
            age_mean: 41.94,
            age_sd: 13.85,
            male_fraction: 10.0 / 59.0,
            gcl: zs([
                (36.70, 6.62),
                (43.50, 7.71),
                (27.56, 3.40),
                (25.42, 2.55),
                (26.38, 2.87),
                (27.13, 3.43),
            ]),
            rnfl: zs([
                (30.12, 5.69),
                (26.66, 4.17),
                (60.58, 12.09),
                (72.40, 13.40),
                (28.63, 4.88),
                (22.91, 5.66),
            ]),
        },
        eye_correlation: 0.8,
        cell_sd_fraction: 0.5,
        seed: 0,
    }
}

/// Generate the cohort: one `EyeSample` per (subject, eye, layer).
pub fn generate_cohort(spec: &CohortSpec, zones: &ZoneMap) -> Result<Vec<EyeSample>> {
    spec.validate()?;
    let mut samples = Vec::new();
    for (group, gspec) in [(Group::HC, &spec.hc), (Group::MS, &spec.ms)] {
        // Deterministic laterality layout: subjects with both eyes first,
        // then left-only, then right-only.
        let both = gspec.n_left_eyes + gspec.n_right_eyes - gspec.n_subjects;
        let left_only = gspec.n_left_eyes - both;
        for idx in 0..gspec.n_subjects {
            let lateralities: &[Laterality] = if idx < both {
                &[Laterality::L, Laterality::R]
            } else if idx < both + left_only {
                &[Laterality::L]
            } else {
                &[Laterality::R]
            };
            let subject_id = format!("{group}{:04}", idx + 1);
            let mut rng = rng_for(spec.seed, &format!("cohort/{group}/{idx}"));
            let age = (gspec.age_mean + gspec.age_sd * standard_normal(&mut rng)).max(0.0);
            let sex = if rng.random::<f64>() < gspec.male_fraction { Sex::M } else { Sex::F };
            for layer in Layer::all() {
                let stats = gspec.zone_stats(layer);
                let latent: Vec<f64> = (0..N_ZONES).map(|_| standard_normal(&mut rng)).collect();
                for &laterality in lateralities {
                    let rho = spec.eye_correlation;
                    let eye_zone: Vec<f64> = (0..N_ZONES)
                        .map(|z| {
                            let eye_component = standard_normal(&mut rng);
                            stats[z].mean
                                + stats[z].sd
                                    * (rho.sqrt() * latent[z]
                                        + (1.0 - rho).sqrt() * eye_component)
                        })
                        .collect();
                    let mut grid = Vec::with_capacity(crate::data::GRID_CELLS);
                    for cell in 0..crate::data::GRID_CELLS {
                        let z = usize::from(zones.zone_of(cell)) - 1;
                        let noise = spec.cell_sd_fraction * stats[z].sd * standard_normal(&mut rng);
                        grid.push((eye_zone[z] + noise).max(0.0));
                    }
                    let sample = EyeSample {
                        subject_id: subject_id.clone(),
                        group,
                        age,
                        sex,
                        laterality,
                        layer,
                        grid,
                        quality_score: Some(30.0),
                    };
                    sample.validate()?;
                    samples.push(sample);
                }
            }
        }
    }
    Ok(samples)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}
