//! Subject-level stratified k-fold plans.
//!
//! All eyes of one subject land on the same side of every fold, and folds
//! are stratified by group so small cohorts never produce single-class
//! test sets. The k test sets partition the subjects.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::{EyeSample, Group};
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone)]
pub struct FoldAssignment {
    pub fold: usize,
    pub train_subjects: BTreeSet<String>,
    pub test_subjects: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldAssignment>,
}

/// Stratified subject-level partition into k folds. Subjects of each class
/// are shuffled and dealt round-robin with a cursor that continues across
/// classes, which keeps the test-set sizes as equal as possible.
pub fn subject_kfold(samples: &[EyeSample], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config("k-fold needs k >= 2".into()));
    }
    let mut groups: BTreeMap<&str, Group> = BTreeMap::new();
    for s in samples {
        match groups.get(s.subject_id.as_str()) {
            Some(g) if *g != s.group => {
                return Err(Error::Integrity(format!(
                    "subject {} appears in both groups",
                    s.subject_id
                )))
            }
            Some(_) => {}
            None => {
                groups.insert(s.subject_id.as_str(), s.group);
            }
        }
    }
    let mut by_class: BTreeMap<Group, Vec<&str>> = BTreeMap::from([
        (Group::HC, Vec::new()),
        (Group::MS, Vec::new()),
    ]);
    for (id, g) in &groups {
        by_class.get_mut(g).unwrap().push(id);
    }
    for (g, ids) in &by_class {
        if !ids.is_empty() && ids.len() < k {
            return Err(Error::Config(format!(
                "k = {k} exceeds the {} subjects in class {g}",
                ids.len()
            )));
        }
    }
    if groups.is_empty() {
        return Err(Error::Config("no subjects to split".into()));
    }

    let mut rng = rng_for(seed, "subject-kfold");
    let mut test_sets: Vec<BTreeSet<String>> = vec![BTreeSet::new(); k];
    let mut cursor = 0usize;
    for ids in by_class.values() {
        let mut shuffled: Vec<&str> = ids.clone();
        shuffled.shuffle(&mut rng);
        for id in shuffled {
            test_sets[cursor % k].insert(id.to_string());
            cursor += 1;
        }
    }

    let all: BTreeSet<String> = groups.keys().map(|s| s.to_string()).collect();
    let folds = test_sets
        .into_iter()
        .enumerate()
        .map(|(fold, test_subjects)| FoldAssignment {
            fold,
            train_subjects: all.difference(&test_subjects).cloned().collect(),
            test_subjects,
        })
        .collect();
    Ok(FoldPlan { k, seed, folds })
}

impl FoldPlan {
    /// Hard no-leakage checks: per-fold train/test disjointness and the
    /// test sets forming a partition of the subjects.
    pub fn leakage_scan(&self) -> Result<()> {
        let mut seen_in_test: BTreeSet<&str> = BTreeSet::new();
        for f in &self.folds {
            if let Some(shared) = f.train_subjects.intersection(&f.test_subjects).next() {
                return Err(Error::Integrity(format!(
                    "fold {}: subject {shared} appears in both train and test",
                    f.fold
                )));
            }
            for id in &f.test_subjects {
                if !seen_in_test.insert(id) {
                    return Err(Error::Integrity(format!(
                        "subject {id} appears in the test sets of two folds"
                    )));
                }
            }
        }
        for f in &self.folds {
            for id in &f.train_subjects {
                if !seen_in_test.contains(id.as_str()) {
                    return Err(Error::Integrity(format!(
                        "subject {id} never reaches a test set"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["fold", "subject_id", "split"])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for f in &self.folds {
            for id in &f.train_subjects {
                wtr.write_record([&f.fold.to_string(), id, "train"])
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            }
            for id in &f.test_subjects {
                wtr.write_record([&f.fold.to_string(), id, "test"])
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path, k: usize, seed: u64) -> Result<FoldPlan> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::Parse(format!("cannot open fold plan: {e}")))?;
        let mut folds: Vec<FoldAssignment> = (0..k)
            .map(|fold| FoldAssignment {
                fold,
                train_subjects: BTreeSet::new(),
                test_subjects: BTreeSet::new(),
            })
            .collect();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(format!("fold plan: {e}")))?;
            let fold: usize = rec
                .get(0)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse("fold plan: bad fold index".into()))?;
            if fold >= k {
                return Err(Error::Parse(format!("fold plan: fold {fold} out of range")));
            }
            let id = rec.get(1).unwrap_or("").to_string();
            match rec.get(2) {
                Some("train") => folds[fold].train_subjects.insert(id),
                Some("test") => folds[fold].test_subjects.insert(id),
                other => {
                    return Err(Error::Parse(format!(
                        "fold plan: bad split tag {other:?}"
                    )))
                }
            };
        }
        Ok(FoldPlan { k, seed, folds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Laterality, Layer, Sex};

    fn subject(id: &str, group: Group, lats: &[Laterality]) -> Vec<EyeSample> {
        lats.iter()
            .map(|lat| EyeSample {
                subject_id: id.to_string(),
                group,
                age: 40.0,
                sex: Sex::F,
                laterality: *lat,
                layer: Layer::GCL,
                grid: vec![30.0; 64],
                quality_score: None,
            })
            .collect()
    }

    fn cohort(n_hc: usize, n_ms: usize) -> Vec<EyeSample> {
        let mut samples = Vec::new();
        for i in 0..n_hc {
            samples.extend(subject(&format!("h{i}"), Group::HC, &[Laterality::L, Laterality::R]));
        }
        for i in 0..n_ms {
            samples.extend(subject(&format!("m{i}"), Group::MS, &[Laterality::L, Laterality::R]));
        }
        samples
    }

    #[test]
    fn ten_subjects_ten_folds_single_test_subject() {
        let mut samples = Vec::new();
        for i in 0..10 {
            samples.extend(subject(&format!("s{i}"), Group::HC, &[Laterality::L]));
        }
        let plan = subject_kfold(&samples, 10, 1).unwrap();
        for f in &plan.folds {
            assert_eq!(f.test_subjects.len(), 1);
            assert_eq!(f.train_subjects.len(), 9);
        }
        plan.leakage_scan().unwrap();
    }

    #[test]
    fn study_size_cohort_gets_equal_folds() {
        // 111 + 59 = 170 subjects, k = 10: every test fold holds exactly 17.
        let samples = cohort(111, 59);
        let plan = subject_kfold(&samples, 10, 7).unwrap();
        for f in &plan.folds {
            assert_eq!(f.test_subjects.len(), 17, "fold {}", f.fold);
            let ms = f.test_subjects.iter().filter(|s| s.starts_with('m')).count();
            assert!((5..=6).contains(&ms), "fold {} has {ms} MS subjects", f.fold);
        }
        plan.leakage_scan().unwrap();
    }

    #[test]
    fn k_too_large_for_a_class() {
        let samples = cohort(12, 4);
        assert!(matches!(subject_kfold(&samples, 10, 0), Err(Error::Config(_))));
    }

    #[test]
    fn plans_are_seed_deterministic() {
        let samples = cohort(20, 10);
        let a = subject_kfold(&samples, 5, 3).unwrap();
        let b = subject_kfold(&samples, 5, 3).unwrap();
        for (fa, fb) in a.folds.iter().zip(&b.folds) {
            assert_eq!(fa.test_subjects, fb.test_subjects);
        }
        let c = subject_kfold(&samples, 5, 4).unwrap();
        assert!(a.folds.iter().zip(&c.folds).any(|(x, y)| x.test_subjects != y.test_subjects));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let samples = cohort(8, 4);
        let plan = subject_kfold(&samples, 4, 9).unwrap();
        let path = dir.path().join("folds.csv");
        plan.save_csv(&path).unwrap();
        let loaded = FoldPlan::load_csv(&path, 4, 9).unwrap();
        for (a, b) in plan.folds.iter().zip(&loaded.folds) {
            assert_eq!(a.train_subjects, b.train_subjects);
            assert_eq!(a.test_subjects, b.test_subjects);
        }
    }
}
