//! Classifiers and the blunder prediction tasks.

mod logistic;
mod tree;

pub use logistic::{LogisticModel, LogisticProblem, Scaler};
pub use tree::{Node, TreeModel, TreeParams};

use std::collections::{BTreeMap, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMask, FeatureRecord, FEATURE_NAMES};

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("no {0} rows to balance")]
    EmptyClass(&'static str),
    #[error("model file: {0}")]
    Model(String),
}

/// Feature rows with blunder labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<[f64; NUM_FEATURES]>,
    pub labels: Vec<bool>,
}

impl Dataset {
    pub fn push(&mut self, row: [f64; NUM_FEATURES], label: bool) {
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a FeatureRecord>) -> Dataset {
        let mut ds = Dataset::default();
        for r in records {
            ds.push(r.vector().to_array(), r.instance.is_blunder);
        }
        ds
    }

    fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Keeps every row of the smaller class and a uniform sample of equal
    /// size from the larger one. Rows keep their original order.
    pub fn balance(&self, seed: u64) -> Result<Dataset, LearnError> {
        let pos: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i]).collect();
        let neg: Vec<usize> = (0..self.len()).filter(|&i| !self.labels[i]).collect();
        if pos.is_empty() {
            return Err(LearnError::EmptyClass("blunder"));
        }
        if neg.is_empty() {
            return Err(LearnError::EmptyClass("non-blunder"));
        }
        let (small, large) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep: Vec<usize> = rand::seq::index::sample(&mut rng, large.len(), small.len())
            .into_iter()
            .map(|j| large[j])
            .collect();
        keep.extend(small);
        keep.sort_unstable();
        Ok(self.select(&keep))
    }

    /// Stratified random split; `test_fraction` of each class goes to the
    /// second set.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for class in [true, false] {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            idx.shuffle(&mut rng);
            let n_test = (idx.len() as f64 * test_fraction).round() as usize;
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        (self.select(&train), self.select(&test))
    }
}

/// Accuracy of the best classifier on a balanced sample, for a feature
/// taking values with probabilities `pi` and blunder rates `p`: given as
/// (pi, p) pairs.
pub fn bayes_accuracy(groups: &[(f64, f64)]) -> f64 {
    let p1: f64 = groups.iter().map(|(pi, p)| pi * p).sum();
    let p0: f64 = groups.iter().map(|(pi, p)| pi * (1.0 - p)).sum();
    0.5 * groups.iter().map(|(pi, p)| pi * (p / p1).max((1.0 - p) / p0)).sum::<f64>()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskConfig {
    pub seed: u64,
    pub tree: TreeParams,
    pub test_fraction: f64,
    /// Task 1 keeps positions seen at least this often.
    pub min_position_count: usize,
    /// Task 2 skips (b, n) pairs with fewer balanced rows.
    pub task2_min_rows: usize,
    /// Task 3 uses positions with at least this many blunders.
    pub task3_min_blunders: usize,
}

impl Default for TaskConfig {
    fn default() -> TaskConfig {
        TaskConfig {
            seed: 0,
            tree: TreeParams::default(),
            test_fraction: 0.2,
            min_position_count: 20,
            task2_min_rows: 200,
            task3_min_blunders: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskAccuracy {
    pub mask: String,
    pub accuracy: f64,
    pub test_rows: usize,
}

fn evaluate(ds: &Dataset, masks: &[FeatureMask], cfg: &TaskConfig) -> Result<Vec<MaskAccuracy>, LearnError> {
    let balanced = ds.balance(cfg.seed)?;
    let (train, test) = balanced.split(cfg.test_fraction, cfg.seed.wrapping_add(1));
    Ok(masks
        .iter()
        .map(|&m| MaskAccuracy {
            mask: m.label().to_string(),
            accuracy: TreeModel::train(&train, &m.columns(), cfg.tree).accuracy(&test),
            test_rows: test.len(),
        })
        .collect())
}

/// Records from positions seen at least `min` times.
pub fn frequent(records: &[FeatureRecord], min: usize) -> Vec<&FeatureRecord> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.instance.canonical_fen.as_str()).or_default() += 1;
    }
    records.iter().filter(|r| counts[r.instance.canonical_fen.as_str()] >= min).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task1Report {
    pub rows: usize,
    pub results: Vec<MaskAccuracy>,
}

/// Balanced blunder classification over frequent positions, one tree per
/// feature mask.
pub fn task1(records: &[FeatureRecord], masks: &[FeatureMask], cfg: &TaskConfig) -> Result<Task1Report, LearnError> {
    let kept = frequent(records, cfg.min_position_count);
    let ds = Dataset::from_records(kept);
    Ok(Task1Report {
        rows: ds.len(),
        results: evaluate(&ds, masks, cfg)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task2Row {
    pub n: u32,
    pub b: u32,
    pub balanced_rows: usize,
    pub results: Vec<MaskAccuracy>,
    /// Logistic weight of b(T1) in a D2-only model, standardized units.
    pub b_t1_weight: f64,
    pub b_t1_direction: i8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task2Report {
    pub pairs: Vec<Task2Row>,
    /// (n, b, balanced rows) of pairs below the row minimum.
    pub skipped: Vec<(u32, u32, usize)>,
}

const B_T1: usize = 6;

/// Per (b, n) classification with the depth-1 counts held fixed.
pub fn task2(records: &[FeatureRecord], cfg: &TaskConfig) -> Result<Task2Report, LearnError> {
    let mut groups: BTreeMap<(u32, u32), Vec<&FeatureRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.instance.n, r.instance.b)).or_default().push(r);
    }
    let mut report = Task2Report { pairs: Vec::new(), skipped: Vec::new() };
    for ((n, b), group) in groups {
        let ds = Dataset::from_records(group);
        let pos = ds.positives();
        let balanced_rows = 2 * pos.min(ds.len() - pos);
        if balanced_rows < cfg.task2_min_rows {
            report.skipped.push((n, b, balanced_rows));
            continue;
        }
        let results = evaluate(&ds, &FeatureMask::TASK2, cfg)?;
        let balanced = ds.balance(cfg.seed)?;
        let lr = LogisticModel::train(&balanced, &FeatureMask::D2.columns(), 1e-3, 2000, 1e-6);
        let w = lr.weight_of(B_T1).unwrap_or(0.0);
        report.pairs.push(Task2Row {
            n,
            b,
            balanced_rows,
            results,
            b_t1_weight: w,
            b_t1_direction: if w > 0.0 {
                1
            } else if w < 0.0 {
                -1
            } else {
                0
            },
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task3Row {
    pub canonical_fen: String,
    pub blunders: usize,
    pub results: Vec<MaskAccuracy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task3Report {
    pub positions: Vec<Task3Row>,
    pub diagnostic: Option<String>,
}

/// Skill and time features alone, one fixed position at a time.
pub fn task3(records: &[FeatureRecord], cfg: &TaskConfig) -> Result<Task3Report, LearnError> {
    let mut groups: BTreeMap<&str, Vec<&FeatureRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.instance.canonical_fen.as_str()).or_default().push(r);
    }
    let mut positions = Vec::new();
    for (key, group) in groups {
        let ds = Dataset::from_records(group);
        let blunders = ds.positives();
        if blunders < cfg.task3_min_blunders || blunders == ds.len() {
            continue;
        }
        positions.push(Task3Row {
            canonical_fen: key.to_string(),
            blunders,
            results: evaluate(&ds, &FeatureMask::TASK3, cfg)?,
        });
    }
    let diagnostic = positions.is_empty().then(|| {
        format!("no position has {} or more blunders", cfg.task3_min_blunders)
    });
    Ok(Task3Report { positions, diagnostic })
}

pub const MODEL_FORMAT: &str = "blunder-tree";
pub const MODEL_VERSION: u32 = 1;

/// A trained tree with the mask it was trained on, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub mask: FeatureMask,
    pub tree: TreeModel,
}

impl ModelFile {
    pub fn new(mask: FeatureMask, tree: TreeModel) -> ModelFile {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            mask,
            tree,
        }
    }

    pub fn from_json(text: &str) -> Result<ModelFile, LearnError> {
        let m: ModelFile = serde_json::from_str(text).map_err(|e| LearnError::Model(e.to_string()))?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(LearnError::Model(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }

    pub fn predict_proba(&self, r: &FeatureRecord) -> f64 {
        self.tree.predict_proba(&r.vector().to_array())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(pos: usize, neg: usize) -> Dataset {
        let mut d = Dataset::default();
        for i in 0..pos + neg {
            let mut r = [0.0; NUM_FEATURES];
            r[0] = i as f64;
            d.push(r, i < pos);
        }
        d
    }

    #[test]
    fn balance_downsamples_the_majority() {
        let d = ds(100, 900);
        let b = d.balance(7).unwrap();
        assert_eq!((b.len(), b.positives()), (200, 100));
        assert_eq!(b, d.balance(7).unwrap());
        assert_ne!(b, d.balance(8).unwrap());
        let even = ds(50, 50);
        assert_eq!(even.balance(1).unwrap(), even);
        assert_eq!(ds(0, 5).balance(1), Err(LearnError::EmptyClass("blunder")));
    }

    #[test]
    fn split_is_stratified() {
        let d = ds(100, 100);
        let (train, test) = d.split(0.2, 3);
        assert_eq!((train.len(), test.len()), (160, 40));
        assert_eq!((train.positives(), test.positives()), (80, 20));
    }

    #[test]
    fn bayes_accuracy_limits() {
        assert_eq!(bayes_accuracy(&[(1.0, 0.3)]), 0.5);
        // Perfectly separating feature.
        assert_eq!(bayes_accuracy(&[(0.5, 1.0), (0.5, 0.0)]), 1.0);
    }

    #[test]
    fn model_file_version_is_checked() {
        let m = ModelFile::new(FeatureMask::Beta, TreeModel::train(&ds(60, 60), &[0], TreeParams::default()));
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(ModelFile::from_json(&text).unwrap(), m);
        let bad = text.replace("\"version\":1", "\"version\":2");
        assert!(ModelFile::from_json(&bad).is_err());
    }
}
