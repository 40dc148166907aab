//! CART decision trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{encode_labels, ForestError, Matrix, RfConfig};
use crate::num::Real;

/// A tree node. Nodes are stored in preorder: a split's left child is the
/// next node, its right child sits at `right`.
#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: T,
        right: usize,
        /// Weighted Gini decrease of this split (parent minus children).
        decrease: T,
    },
    Leaf {
        /// Weight-normalized class distribution.
        dist: Vec<T>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> DecisionTree<T> {
    /// Class distribution of the leaf that `x` falls into.
    pub fn leaf(&self, x: &[T]) -> &[T] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { dist } => return dist,
                Node::Split { feature, threshold, right, .. } => {
                    i = if x[*feature] <= *threshold { i + 1 } else { *right };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> (usize, usize) {
            // returns (depth below i, index after i's subtree)
            match &nodes[i] {
                Node::Leaf { .. } => (0, i + 1),
                Node::Split { right, .. } => {
                    let (dl, _) = walk(nodes, i + 1);
                    let (dr, end) = walk(nodes, *right);
                    (1 + dl.max(dr), end)
                }
            }
        }
        walk(&self.nodes, 0).0
    }
}

/// Integer key whose unsigned order is the numeric order of `v`, with
/// −0 and +0 mapped to the same key. Sorting keys is much cheaper than
/// sorting floats through a comparator.
#[inline]
pub(crate) fn sort_key<T: Real>(v: T) -> u64 {
    let bits = (v.f64() + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | 1 << 63
    }
}

pub(crate) fn sort_keys<T: Real>(columns: &[T]) -> Vec<u64> {
    columns.iter().map(|&v| sort_key(v)).collect()
}

pub(crate) struct TrainingData<'a, T> {
    /// Column-major features: feature `f` occupies `columns[f*n..(f+1)*n]`.
    pub columns: &'a [T],
    /// [`sort_key`] of every entry of `columns`.
    pub keys: &'a [u64],
    pub n: usize,
    pub dim: usize,
    /// Class index per sample.
    pub y: &'a [usize],
    pub k: usize,
    pub class_weight: &'a [f64],
}

/// Grows one tree on the samples with nonzero multiplicity in `counts`; each
/// sample weighs `count × class_weight[class]`.
pub(crate) fn grow<T: Real>(
    data: &TrainingData<'_, T>,
    counts: &[u32],
    config: &RfConfig,
    rng: &mut ChaCha8Rng,
) -> DecisionTree<T> {
    let weights: Vec<f64> = counts
        .iter()
        .zip(data.y)
        .map(|(&c, &y)| c as f64 * data.class_weight[y])
        .collect();
    grow_weighted(data, &weights, config, rng)
}

fn grow_weighted<T: Real>(
    data: &TrainingData<'_, T>,
    weights: &[f64],
    config: &RfConfig,
    rng: &mut ChaCha8Rng,
) -> DecisionTree<T> {
    let mut idx: Vec<u32> = (0..data.n as u32).filter(|&i| weights[i as usize] > 0.0).collect();
    let mut b = Builder {
        data,
        weights,
        config,
        mtry: config.max_features.resolve(data.dim),
        rng,
        nodes: Vec::new(),
        feats: (0..data.dim).collect(),
        buf: Vec::with_capacity(idx.len()),
    };
    b.node(&mut idx, 0);
    DecisionTree { nodes: b.nodes }
}

/// Fits a single tree with explicit per-sample weights; `seed` drives the
/// feature subsampling.
pub fn fit_tree<T: Real>(
    x: &Matrix<T>,
    labels: &[u32],
    weights: &[f64],
    config: &RfConfig,
    seed: u64,
) -> Result<DecisionTree<T>, ForestError> {
    config.validate()?;
    if x.rows() == 0 {
        return Err(ForestError::Empty);
    }
    if labels.len() != x.rows() || weights.len() != x.rows() {
        return Err(ForestError::LabelCount { samples: x.rows(), labels: labels.len().min(weights.len()) });
    }
    let (classes, y) = encode_labels(labels);
    let columns = x.columns();
    let keys = sort_keys(&columns);
    let unit = vec![1.0; classes.len()];
    let data = TrainingData {
        columns: &columns,
        keys: &keys,
        n: x.rows(),
        dim: x.cols(),
        y: &y,
        k: classes.len(),
        class_weight: &unit,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(grow_weighted(&data, weights, config, &mut rng))
}

struct Builder<'a, 'r, T> {
    data: &'a TrainingData<'a, T>,
    weights: &'a [f64],
    config: &'a RfConfig,
    mtry: usize,
    rng: &'r mut ChaCha8Rng,
    nodes: Vec<Node<T>>,
    feats: Vec<usize>,
    buf: Vec<(u64, u32)>,
}

struct Best<T> {
    score: f64,
    feature: usize,
    threshold: T,
}

/// `W − Σ w_c² / W`: Gini impurity scaled by the node weight.
#[inline]
fn weighted_gini(w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    total - w.iter().map(|v| v * v).sum::<f64>() / total
}

impl<T: Real> Builder<'_, '_, T> {
    fn node(&mut self, idx: &mut [u32], depth: usize) {
        let k = self.data.k;
        let mut w = vec![0.0; k];
        for &i in idx.iter() {
            w[self.data.y[i as usize]] += self.weights[i as usize];
        }
        let pure = w.iter().filter(|&&v| v > 0.0).count() <= 1;
        let stop = depth >= self.config.max_depth || pure || idx.len() < 2 * self.config.min_samples_leaf;
        let best = if stop { None } else { self.best_split(idx) };
        let Some(best) = best else {
            let total: f64 = w.iter().sum();
            self.nodes.push(Node::Leaf {
                dist: w.iter().map(|&v| T::of(v / total)).collect(),
            });
            return;
        };

        let col = &self.data.columns[best.feature * self.data.n..(best.feature + 1) * self.data.n];
        let mut split = 0;
        for j in 0..idx.len() {
            if col[idx[j] as usize] <= best.threshold {
                idx.swap(split, j);
                split += 1;
            }
        }
        let me = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            right: 0,
            decrease: T::of(weighted_gini(&w) - best.score),
        });
        let (left, right) = idx.split_at_mut(split);
        self.node(left, depth + 1);
        let right_at = self.nodes.len();
        if let Node::Split { right, .. } = &mut self.nodes[me] {
            *right = right_at;
        }
        self.node(right, depth + 1);
    }

    /// Lowest weighted-Gini split over up to `mtry` non-constant features drawn
    /// without replacement; ties prefer the lower feature index, then the lower
    /// threshold.
    fn best_split(&mut self, idx: &[u32]) -> Option<Best<T>> {
        let (n, dim, k) = (self.data.n, self.data.dim, self.data.k);
        let min_leaf = self.config.min_samples_leaf;
        let mut best: Option<Best<T>> = None;
        let mut visited = 0;
        let mut left = vec![0.0; k];
        let mut total = vec![0.0; k];
        for &i in idx {
            total[self.data.y[i as usize]] += self.weights[i as usize];
        }
        for draw in 0..dim {
            let j = self.rng.random_range(draw..dim);
            self.feats.swap(draw, j);
            let f = self.feats[draw];
            let col = &self.data.columns[f * n..(f + 1) * n];
            let keys = &self.data.keys[f * n..(f + 1) * n];
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (keys[i as usize], i)));
            // constant columns are common deep in a tree (sparse histogram
            // bins); reject them before paying for the sort
            let first = self.buf[0].0;
            if self.buf.iter().all(|&(v, _)| v == first) {
                continue;
            }
            // (value, index) order; indices are distinct, so unstable is exact
            self.buf.sort_unstable();
            visited += 1;

            left.iter_mut().for_each(|v| *v = 0.0);
            let m = self.buf.len();
            for p in 0..m - 1 {
                let i = self.buf[p].1 as usize;
                left[self.data.y[i]] += self.weights[i];
                if self.buf[p].0 == self.buf[p + 1].0 || p + 1 < min_leaf || m - p - 1 < min_leaf {
                    continue;
                }
                let (mut wl, mut sl, mut wr, mut sr) = (0.0, 0.0, 0.0, 0.0);
                for c in 0..k {
                    let (a, b) = (left[c], total[c] - left[c]);
                    wl += a;
                    sl += a * a;
                    wr += b;
                    sr += b * b;
                }
                let score = (wl - sl / wl) + (wr - sr / wr);
                let better = match &best {
                    None => true,
                    Some(b) => score < b.score || (score == b.score && f < b.feature),
                };
                if better {
                    let (v, next) = (col[i], col[self.buf[p + 1].1 as usize]);
                    let mut threshold = v + (next - v) * T::of(0.5);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Best { score, feature: f, threshold });
                }
            }
            if visited == self.mtry {
                break;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::MaxFeatures;

    fn cfg() -> RfConfig {
        RfConfig { bootstrap: false, n_estimators: 1, ..RfConfig::default() }
    }

    #[test]
    fn single_class_gives_leaf() {
        let x = Matrix::new(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let t = fit_tree(&x, &[4, 4, 4], &[1.0; 3], &cfg(), 0).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { dist: vec![1.0] }]);
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn two_points_split_at_midpoint() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]);
        let t = fit_tree(&x, &[1, 2], &[1.0; 2], &cfg(), 0).unwrap();
        assert_eq!(
            t.nodes,
            vec![
                Node::Split { feature: 0, threshold: 0.5, right: 2, decrease: 1.0 },
                Node::Leaf { dist: vec![1.0, 0.0] },
                Node::Leaf { dist: vec![0.0, 1.0] },
            ]
        );
        assert_eq!(t.leaf(&[0.5]), &[1.0, 0.0]);
        assert_eq!(t.leaf(&[0.50001]), &[0.0, 1.0]);
    }

    #[test]
    fn same_seed_same_tree() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let v = i as f64;
            data.extend([v.sin(), (v * 0.7).cos(), (v * 1.3).sin(), v % 7.0]);
            y.push((i % 3) as u32);
        }
        let x = Matrix::new(60, 4, data);
        let c = RfConfig { max_features: MaxFeatures::Fixed(2), ..cfg() };
        let a = fit_tree(&x, &y, &[1.0; 60], &c, 9).unwrap();
        let b = fit_tree(&x, &y, &[1.0; 60], &c, 9).unwrap();
        assert_eq!(a, b);
        // fully grown on distinct points: every training sample lands in a pure leaf
        for i in 0..60 {
            let d = a.leaf(x.row(i));
            assert_eq!(d[y[i] as usize], 1.0);
        }
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        let x = Matrix::new(8, 1, (0..8).map(|v| v as f64).collect());
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let stump = fit_tree(&x, &y, &[1.0; 8], &RfConfig { max_depth: 1, ..cfg() }, 0).unwrap();
        assert_eq!(stump.depth(), 1);
        assert_eq!(stump.nodes.len(), 3);
        let big_leaves = fit_tree(&x, &y, &[1.0; 8], &RfConfig { min_samples_leaf: 3, ..cfg() }, 0).unwrap();
        // count training samples per leaf node
        let mut per_leaf = std::collections::HashMap::new();
        for v in 0..8 {
            let leaf = big_leaves.leaf(&[v as f64]) as *const [f64];
            *per_leaf.entry(leaf).or_insert(0) += 1;
        }
        assert!(per_leaf.len() >= 2);
        assert!(per_leaf.values().all(|&c| c >= 3), "{per_leaf:?}");
    }

    #[test]
    fn weights_shift_leaf_distribution() {
        // identical features: no split possible, leaf holds weighted class shares
        let x = Matrix::new(3, 1, vec![1.0; 3]);
        let t = fit_tree(&x, &[1, 2, 2], &[2.0, 1.0, 1.0], &cfg(), 0).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { dist: vec![0.5, 0.5] }]);
        assert!(fit_tree(&Matrix::<f64>::new(0, 1, vec![]), &[], &[], &cfg(), 0).is_err());
    }
}
