//! Accuracy metrics, grouped stratified k-fold splits, point-cloud
//! augmentation and the cross-validation driver.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::PointCloud;
use crate::num::{derive_seed, Real};
use crate::projection::rotate_z;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{truth} truth labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} is not one of the {k} classes")]
    LabelOutOfRange { label: u32, k: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("kappa is undefined when chance agreement is 1")]
    UndefinedKappa,
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("class {label} has {groups} groups, fewer than k = {k}")]
    TooFewGroups { label: u32, groups: usize, k: usize },
    #[error("group {0} mixes labels")]
    MixedGroup(usize),
    #[error("invalid augmentation: {0}")]
    InvalidAugment(&'static str),
    #[error("augmentation removed every point")]
    AllPointsRemoved,
    #[error("cannot augment an empty cloud")]
    EmptyCloud,
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
}

/// K×K counts, row = truth, column = prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self { k, counts: vec![0; k * k] }
    }

    /// # Panics
    /// If `counts.len() != k * k`.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), k * k, "confusion matrix size mismatch");
        Self { k, counts }
    }

    /// Labels in `1..=k`.
    pub fn from_pairs(truth: &[u32], pred: &[u32], k: usize) -> Result<Self, EvalError> {
        let classes: Vec<u32> = (1..=k as u32).collect();
        Self::from_labels(truth, pred, &classes)
    }

    /// Labels drawn from `classes` (sorted ascending); class `classes[i]` is row/column `i`.
    pub fn from_labels(truth: &[u32], pred: &[u32], classes: &[u32]) -> Result<Self, EvalError> {
        if truth.len() != pred.len() {
            return Err(EvalError::LengthMismatch { truth: truth.len(), pred: pred.len() });
        }
        let k = classes.len();
        let index = |l: u32| classes.binary_search(&l).map_err(|_| EvalError::LabelOutOfRange { label: l, k });
        let mut cm = Self::new(k);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.counts[index(t)? * k + index(p)?] += 1;
        }
        Ok(cm)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i * self.k..(i + 1) * self.k].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }

    /// `Σ x_ii / N`.
    pub fn overall_accuracy(&self) -> Result<f64, EvalError> {
        let n = self.total();
        if n == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        let diag: u64 = (0..self.k).map(|i| self.get(i, i)).sum();
        Ok(diag as f64 / n as f64)
    }

    /// One-vs-rest F1 per class; 0 for a class with no true or predicted samples.
    pub fn f1_per_class(&self) -> Vec<f64> {
        (0..self.k)
            .map(|c| {
                let tp = self.get(c, c) as f64;
                let fp = self.col_sum(c) as f64 - tp;
                let fn_ = self.row_sum(c) as f64 - tp;
                if tp == 0.0 {
                    // covers TP = FP = FN = 0 and the zero-precision/recall cases
                    return 0.0;
                }
                let precision = tp / (tp + fp);
                let recall = tp / (tp + fn_);
                2.0 * recall * precision / (recall + precision)
            })
            .collect()
    }

    /// `(p_o − p_c) / (1 − p_c)` with `p_c = Σ x_i+ x_+i / N²`.
    pub fn cohens_kappa(&self) -> Result<f64, EvalError> {
        let n = self.total();
        if n == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        let n2 = (n as f64) * (n as f64);
        let po = self.overall_accuracy()?;
        // integer sum keeps p_c exact for realistic N
        let chance: u128 = (0..self.k).map(|i| self.row_sum(i) as u128 * self.col_sum(i) as u128).sum();
        if chance == (n as u128) * (n as u128) {
            return Err(EvalError::UndefinedKappa);
        }
        let pc = chance as f64 / n2;
        Ok((po - pc) / (1.0 - pc))
    }
}

/// Confusion matrix over labels `1..=k`.
pub fn confusion_matrix(truth: &[u32], pred: &[u32], k: usize) -> Result<ConfusionMatrix, EvalError> {
    ConfusionMatrix::from_pairs(truth, pred, k)
}

/// Splits samples into `k` folds of whole groups, stratified by label.
///
/// Within each label (ascending) the groups are shuffled and dealt round-robin;
/// the dealing position carries over from one label to the next so fold sizes
/// stay balanced too. Each fold lists sample indices ascending.
pub fn kfold_split(labels: &[u32], groups: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    if labels.len() != groups.len() {
        return Err(EvalError::LengthMismatch { truth: labels.len(), pred: groups.len() });
    }
    let mut members: BTreeMap<usize, (u32, Vec<usize>)> = BTreeMap::new();
    for (i, (&l, &g)) in labels.iter().zip(groups).enumerate() {
        let entry = members.entry(g).or_insert((l, Vec::new()));
        if entry.0 != l {
            return Err(EvalError::MixedGroup(g));
        }
        entry.1.push(i);
    }
    let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (&g, (l, _)) in &members {
        by_label.entry(*l).or_default().push(g);
    }
    for (&label, gs) in &by_label {
        if gs.len() < k {
            return Err(EvalError::TooFewGroups { label, groups: gs.len(), k });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for gs in by_label.values_mut() {
        gs.shuffle(&mut rng);
        for (j, g) in gs.iter().enumerate() {
            folds[(offset + j) % k].extend_from_slice(&members[g].1);
        }
        offset += gs.len();
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Indices in `0..n` not in `subset`, ascending.
pub fn complement(n: usize, subset: &[usize]) -> Vec<usize> {
    let mut hit = vec![false; n];
    for &i in subset {
        hit[i] = true;
    }
    (0..n).filter(|&i| !hit[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Rotate about the vertical axis through the xy centroid by a uniform angle.
    pub rotation: bool,
    /// Probability of dropping each point.
    pub removal_fraction: f64,
    /// Standard deviation (m) of the Gaussian jitter added to x, y and z.
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation: true,
            removal_fraction: 0.1,
            jitter_sigma: 0.02,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// No-op augmentation.
    pub fn identity() -> Self {
        Self { rotation: false, removal_fraction: 0.0, jitter_sigma: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..1.0).contains(&self.removal_fraction) {
            return Err(EvalError::InvalidAugment("removal_fraction must be in [0, 1)"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(EvalError::InvalidAugment("jitter_sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Rotation, then random removal, then Gaussian jitter; channels untouched.
/// If every point is removed, retries once with a derived seed.
pub fn augment<T: Real>(cloud: &PointCloud<T>, config: &AugmentConfig) -> Result<PointCloud<T>, EvalError> {
    config.validate()?;
    if cloud.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    for seed in [config.seed, derive_seed(config.seed, 0)] {
        let out = augment_once(cloud, config, seed);
        if !out.is_empty() {
            return Ok(out);
        }
    }
    Err(EvalError::AllPointsRemoved)
}

fn augment_once<T: Real>(cloud: &PointCloud<T>, config: &AugmentConfig, seed: u64) -> PointCloud<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = if config.rotation {
        let degrees: f64 = rng.random_range(0.0..360.0);
        rotate_z(cloud, T::of(degrees))
    } else {
        cloud.clone()
    };
    if config.removal_fraction > 0.0 {
        out.retain(|_| rng.random::<f64>() >= config.removal_fraction);
    }
    if config.jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, config.jitter_sigma).expect("sigma validated");
        out.map_points(|p| {
            p.x += T::of(normal.sample(&mut rng));
            p.y += T::of(normal.sample(&mut rng));
            p.z += T::of(normal.sample(&mut rng));
        });
    }
    out
}

/// One fold handed to a [`FoldExperiment`].
#[derive(Debug, Clone, Copy)]
pub struct Fold<'a> {
    pub index: usize,
    /// Training sample indices, ascending.
    pub train: &'a [usize],
    /// Held-out sample indices, ascending.
    pub test: &'a [usize],
    /// Seed for this fold's randomness (augmentation, model fitting).
    pub seed: u64,
}

/// Fits on a fold's training side and predicts its held-out side.
pub trait FoldExperiment: Sync {
    type Error: std::fmt::Display;

    /// Predicted labels for `fold.test`, in the same order.
    fn run_fold(&self, fold: &Fold<'_>) -> Result<Vec<u32>, Self::Error>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub confusion: ConfusionMatrix,
    pub oa: f64,
    pub kappa: f64,
    pub f1: Vec<f64>,
}

impl FoldMetrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self, EvalError> {
        Ok(Self {
            oa: confusion.overall_accuracy()?,
            kappa: confusion.cohens_kappa()?,
            f1: confusion.f1_per_class(),
            confusion,
        })
    }
}

/// Per-fold metrics plus their average.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalReport {
    pub classes: Vec<u32>,
    pub folds: Vec<FoldMetrics>,
    pub mean_oa: f64,
    pub mean_kappa: f64,
    pub mean_f1: Vec<f64>,
}

impl CrossvalReport {
    /// `iteration,oa,kappa,f1_<class>…` with one row per fold and a final
    /// `average` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,oa,kappa");
        for c in &self.classes {
            write!(s, ",f1_level{c}").unwrap();
        }
        s.push('\n');
        let mut row = |name: &str, oa: f64, kappa: f64, f1: &[f64]| {
            write!(s, "{name},{oa:.6},{kappa:.6}").unwrap();
            for v in f1 {
                write!(s, ",{v:.6}").unwrap();
            }
            s.push('\n');
        };
        for (i, f) in self.folds.iter().enumerate() {
            row(&(i + 1).to_string(), f.oa, f.kappa, &f.f1);
        }
        row("average", self.mean_oa, self.mean_kappa, &self.mean_f1);
        s
    }
}

/// Runs `experiment` on each of `k` grouped stratified folds in parallel and
/// scores the held-out predictions. Fold `i` gets seed `derive_seed(seed, i)`.
pub fn crossval_run<E: FoldExperiment>(
    labels: &[u32],
    groups: &[usize],
    k: usize,
    seed: u64,
    experiment: &E,
) -> Result<CrossvalReport, EvalError> {
    let folds = kfold_split(labels, groups, k, seed)?;
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let folds: Vec<FoldMetrics> = folds
        .par_iter()
        .enumerate()
        .map(|(index, test)| {
            let train = complement(labels.len(), test);
            let fold = Fold { index, train: &train, test, seed: derive_seed(seed, index as u64) };
            let pred = experiment
                .run_fold(&fold)
                .map_err(|e| EvalError::Fold { fold: index, message: e.to_string() })?;
            let truth: Vec<u32> = test.iter().map(|&i| labels[i]).collect();
            FoldMetrics::from_confusion(ConfusionMatrix::from_labels(&truth, &pred, &classes)?)
        })
        .collect::<Result<_, _>>()?;

    let n = folds.len() as f64;
    let mean = |f: &dyn Fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
    let mean_f1 = (0..classes.len()).map(|c| mean(&|m| m.f1[c])).collect();
    Ok(CrossvalReport {
        mean_oa: mean(&|m| m.oa),
        mean_kappa: mean(&|m| m.kappa),
        mean_f1,
        classes,
        folds,
    })
}
