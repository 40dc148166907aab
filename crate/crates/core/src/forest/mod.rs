//! Random forest of CART trees with Gini impurity and class weighting.
//!
//! Every tree draws its own bootstrap sample and feature subsets from a seed
//! derived from `(random_state, tree index)`, so a forest is a pure function of
//! its data and config regardless of how many threads fit it.

mod io;
mod tree;

pub use io::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use tree::{fit_tree, DecisionTree, Node};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::evalkit::{self, ConfusionMatrix};
use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("no training samples")]
    Empty,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{samples} samples but {labels} labels")]
    LabelCount { samples: usize, labels: usize },
    #[error("training data holds a single class")]
    SingleClass,
    #[error("class {0} has no samples")]
    ZeroCountClass(usize),
    #[error("unknown class label {0}")]
    UnknownClass(u32),
    #[error("invalid forest config: {0}")]
    InvalidConfig(&'static str),
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error(transparent)]
    Eval(#[from] evalkit::EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassWeight {
    Uniform,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`.
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, dim: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (dim as f64).sqrt().ceil() as usize,
            MaxFeatures::All => dim,
            MaxFeatures::Fixed(m) => m,
        };
        m.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub random_state: u64,
    pub class_weight: ClassWeight,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    /// Draw a bootstrap sample per tree; off only to test single trees.
    pub bootstrap: bool,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_estimators: 800,
            max_depth: 64,
            random_state: 42,
            class_weight: ClassWeight::Balanced,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

impl RfConfig {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_estimators == 0 {
            return Err(ForestError::InvalidConfig("n_estimators must be at least 1"));
        }
        if self.max_depth == 0 {
            return Err(ForestError::InvalidConfig("max_depth must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidConfig("min_samples_leaf must be at least 1"));
        }
        if self.max_features == MaxFeatures::Fixed(0) {
            return Err(ForestError::InvalidConfig("max_features must be at least 1"));
        }
        Ok(())
    }
}

/// Dense row-major sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    /// # Panics
    /// If `data.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix size mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, ForestError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(ForestError::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix with the given rows, in order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self { rows: rows.len(), cols: self.cols, data }
    }

    /// Column-major copy (one contiguous slice per feature).
    pub(crate) fn columns(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }
}

/// `w_c = N / (K · n_c)`.
pub fn balanced_class_weights(counts: &[usize]) -> Result<Vec<f64>, ForestError> {
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(ForestError::ZeroCountClass(c));
    }
    let n: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(counts.iter().map(|&c| n as f64 / (k * c as f64)).collect())
}

/// Per-tree seed, see [`crate::num::derive_seed`].
pub fn tree_seed(random_state: u64, tree: usize) -> u64 {
    crate::num::derive_seed(random_state, tree as u64)
}

/// Bootstrap multiplicities (N draws with replacement) for one tree.
pub fn bootstrap_counts(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel<T> {
    pub config: RfConfig,
    /// Class labels, ascending; probabilities follow this order.
    pub classes: Vec<u32>,
    pub dim: usize,
    pub trees: Vec<DecisionTree<T>>,
}

/// Maps labels onto indices into the sorted distinct label list.
pub(crate) fn encode_labels(labels: &[u32]) -> (Vec<u32>, Vec<usize>) {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, y)
}

pub(crate) fn class_weights(config: &RfConfig, y: &[usize], k: usize) -> Result<Vec<f64>, ForestError> {
    match config.class_weight {
        ClassWeight::Uniform => Ok(vec![1.0; k]),
        ClassWeight::Balanced => {
            let mut counts = vec![0usize; k];
            for &c in y {
                counts[c] += 1;
            }
            balanced_class_weights(&counts)
        }
    }
}

pub fn fit_forest<T: Real>(x: &Matrix<T>, labels: &[u32], config: &RfConfig) -> Result<ForestModel<T>, ForestError> {
    config.validate()?;
    if x.rows() == 0 {
        return Err(ForestError::Empty);
    }
    if labels.len() != x.rows() {
        return Err(ForestError::LabelCount { samples: x.rows(), labels: labels.len() });
    }
    let (classes, y) = encode_labels(labels);
    if classes.len() < 2 {
        return Err(ForestError::SingleClass);
    }
    let cw = class_weights(config, &y, classes.len())?;
    let columns = x.columns();
    let keys = tree::sort_keys(&columns);
    let data = tree::TrainingData {
        columns: &columns,
        keys: &keys,
        n: x.rows(),
        dim: x.cols(),
        y: &y,
        k: classes.len(),
        class_weight: &cw,
    };
    let trees = (0..config.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(config.random_state, i));
            let counts = if config.bootstrap {
                bootstrap_counts(x.rows(), &mut rng)
            } else {
                vec![1; x.rows()]
            };
            tree::grow(&data, &counts, config, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        config: *config,
        classes,
        dim: x.cols(),
        trees,
    })
}

impl<T: Real> ForestModel<T> {
    /// Class probabilities (mean of leaf distributions) for one sample.
    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>, ForestError> {
        if x.len() != self.dim {
            return Err(ForestError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut p = vec![T::zero(); self.classes.len()];
        for t in &self.trees {
            for (a, &b) in p.iter_mut().zip(t.leaf(x)) {
                *a += b;
            }
        }
        let n = T::of_usize(self.trees.len());
        p.iter_mut().for_each(|v| *v /= n);
        Ok(p)
    }

    /// Most probable class (ties → lower class index) and the probabilities.
    pub fn predict(&self, x: &[T]) -> Result<(u32, Vec<T>), ForestError> {
        let p = self.predict_proba(x)?;
        Ok((self.classes[argmax(&p)], p))
    }

    /// Predicted labels for every row, in parallel.
    pub fn predict_all(&self, x: &Matrix<T>) -> Result<Vec<u32>, ForestError> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict(x.row(i)).map(|(c, _)| c))
            .collect()
    }

    /// Mean decrease in weighted Gini impurity per feature: each tree's
    /// decreases are normalized to sum 1, averaged over trees, then
    /// renormalized. All zeros when no tree ever splits.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.dim];
        for t in &self.trees {
            let mut per = vec![0.0; self.dim];
            for node in &t.nodes {
                if let Node::Split { feature, decrease, .. } = node {
                    per[*feature] += decrease.f64();
                }
            }
            let s: f64 = per.iter().sum();
            if s > 0.0 {
                total.iter_mut().zip(&per).for_each(|(a, b)| *a += b / s);
            }
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|v| *v /= s);
        }
        total
    }
}

pub(crate) fn argmax<T: Real>(p: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Importance summed per named block, sorted descending (ties by name).
/// `blocks` gives each block's name and its length, in feature order.
pub fn block_importance(importance: &[f64], blocks: &[(String, usize)]) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (name, len) in blocks {
        let end = (start + len).min(importance.len());
        out.push((name.clone(), importance[start..end].iter().sum::<f64>()));
        start = end;
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// One grid cell's cross-validated score.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub config: RfConfig,
    pub fold_oa: Vec<f64>,
    pub mean_oa: f64,
}

/// Scores every config by k-fold mean OA and returns the best (first on ties)
/// together with the full table. `groups` keeps related samples (e.g. the
/// views of one tree) in one fold; `None` puts every sample in its own group.
pub fn grid_search<T: Real>(
    x: &Matrix<T>,
    labels: &[u32],
    groups: Option<&[usize]>,
    grid: &[RfConfig],
    k: usize,
    seed: u64,
) -> Result<(RfConfig, Vec<GridRow>), ForestError> {
    if grid.is_empty() {
        return Err(ForestError::EmptyGrid);
    }
    let own: Vec<usize>;
    let groups = match groups {
        Some(g) => g,
        None => {
            own = (0..labels.len()).collect();
            &own
        }
    };
    let folds = evalkit::kfold_split(labels, groups, k, seed)?;
    let mut table = Vec::with_capacity(grid.len());
    for config in grid {
        let mut fold_oa = Vec::with_capacity(k);
        for test in &folds {
            let train = evalkit::complement(labels.len(), test);
            let ytrain: Vec<u32> = train.iter().map(|&i| labels[i]).collect();
            let model = fit_forest(&x.select(&train), &ytrain, config)?;
            let pred = model.predict_all(&x.select(test))?;
            let truth: Vec<u32> = test.iter().map(|&i| labels[i]).collect();
            let classes = model.classes.clone();
            let cm = ConfusionMatrix::from_labels(&truth, &pred, &classes)?;
            fold_oa.push(cm.overall_accuracy()?);
        }
        let mean_oa = fold_oa.iter().sum::<f64>() / k as f64;
        table.push(GridRow { config: *config, fold_oa, mean_oa });
    }
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_oa > table[best].mean_oa {
            best = i;
        }
    }
    Ok((table[best].config, table))
}
