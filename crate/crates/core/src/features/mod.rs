//! Handcrafted image features for side-view images.
//!
//! The global vector concatenates Haralick texture (13), an HSV histogram
//! (`B³`, 512 for `B = 8`) and compressed Hu moments (7). HOG and Harris
//! blocks are appended only for the feature-importance experiment.

pub mod color;
pub mod glcm;
pub mod gradient;
pub mod hu;
pub mod pca;

pub use color::hsv_histogram;
pub use glcm::{glcm, haralick_features, Glcm, HARALICK_NAMES};
pub use gradient::{harris_summary, hog_descriptor};
pub use hu::{hu_invariants, hu_moments};
pub use pca::{pca_2d, symmetric_eigen, Pca2, SymmetricEigen};

use thiserror::Error;

use crate::num::Real;
use crate::projection::ViewImage;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("image has zero total intensity")]
    ZeroMass,
    #[error("image is smaller than the co-occurrence offset")]
    ImageTooSmall,
    #[error("data has zero variance")]
    ZeroVariance,
    #[error("invalid feature parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("feature blocks out of order or mis-sized: {0}")]
    BlockLayout(String),
}

/// Single-channel image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    /// # Panics
    /// If `data.len() != width * height`.
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "gray image size mismatch");
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.width.max(1))
    }
}

/// Mean of the three channels.
pub fn to_gray<T: Real>(img: &ViewImage<T>) -> GrayImage<T> {
    let three = T::of(3.0);
    GrayImage::new(
        img.width,
        img.height,
        img.pixels.iter().map(|&[a, b, c]| (a + b + c) / three).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureOptions {
    pub glcm_levels: usize,
    pub hsv_bins: usize,
    /// Append HOG and Harris blocks (importance experiment only).
    pub extended: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            glcm_levels: 16,
            hsv_bins: 8,
            extended: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Haralick,
    Hsv,
    Hu,
    Hog,
    Harris,
}

impl Block {
    /// Fixed concatenation order.
    pub const ORDER: [Block; 5] = [Block::Haralick, Block::Hsv, Block::Hu, Block::Hog, Block::Harris];

    pub fn prefix(self) -> &'static str {
        match self {
            Block::Haralick => "haralick",
            Block::Hsv => "hsv",
            Block::Hu => "hu",
            Block::Hog => "hog",
            Block::Harris => "harris",
        }
    }

    /// Block length for the given options and image size; `None` when the
    /// block is not part of the vector.
    pub fn len(self, opts: &FeatureOptions, width: usize, height: usize) -> Option<usize> {
        match self {
            Block::Haralick => Some(13),
            Block::Hsv => Some(opts.hsv_bins.pow(3)),
            Block::Hu => Some(7),
            Block::Hog => opts.extended.then(|| gradient::hog_len(width, height)),
            Block::Harris => opts.extended.then_some(3),
        }
    }

    /// Column names of this block's entries.
    pub fn names(self, len: usize) -> Vec<String> {
        match self {
            Block::Haralick => HARALICK_NAMES.iter().map(|n| format!("haralick_{n}")).collect(),
            Block::Hsv => (0..len).map(|i| format!("hsv_{i:03}")).collect(),
            Block::Hu => (1..=len).map(|i| format!("hu_{i}")).collect(),
            Block::Hog => (0..len).map(|i| format!("hog_{i:04}")).collect(),
            Block::Harris => ["harris_count", "harris_mean", "harris_max"].map(String::from).to_vec(),
        }
    }
}

/// Concatenated feature blocks in the fixed order of [`Block::ORDER`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    blocks: Vec<(Block, usize)>,
    values: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    /// Assembles blocks, rejecting any out-of-order or repeated block,
    /// non-finite value, or a block whose length differs from `expected`.
    pub fn from_blocks(
        blocks: Vec<(Block, Vec<T>)>,
        expected: impl Fn(Block) -> Option<usize>,
    ) -> Result<Self, FeatureError> {
        let mut layout = Vec::new();
        let mut values = Vec::new();
        let mut cursor = 0;
        for (block, v) in blocks {
            let pos = Block::ORDER
                .iter()
                .position(|&b| b == block)
                .expect("block listed in ORDER");
            if pos < cursor {
                return Err(FeatureError::BlockLayout(format!("{} out of order", block.prefix())));
            }
            cursor = pos + 1;
            if expected(block) != Some(v.len()) {
                return Err(FeatureError::BlockLayout(format!(
                    "{} has {} values, expected {:?}",
                    block.prefix(),
                    v.len(),
                    expected(block)
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(FeatureError::BlockLayout(format!("{} has non-finite values", block.prefix())));
            }
            layout.push((block, v.len()));
            values.extend(v);
        }
        Ok(Self { blocks: layout, values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, which: Block) -> Option<&[T]> {
        let mut start = 0;
        for &(b, len) in &self.blocks {
            if b == which {
                return Some(&self.values[start..start + len]);
            }
            start += len;
        }
        None
    }

    pub fn names(&self) -> Vec<String> {
        self.blocks.iter().flat_map(|&(b, len)| b.names(len)).collect()
    }
}

/// Column names of the global vector for images of the given size.
pub fn feature_names(opts: &FeatureOptions, width: usize, height: usize) -> Vec<String> {
    Block::ORDER
        .iter()
        .filter_map(|&b| b.len(opts, width, height).map(|len| b.names(len)))
        .flatten()
        .collect()
}

/// Global feature vector of one view image.
pub fn global_feature_vector<T: Real>(img: &ViewImage<T>, opts: &FeatureOptions) -> Result<FeatureVector<T>, FeatureError> {
    let gray = to_gray(img);
    let mut blocks = vec![
        (Block::Haralick, haralick_features(&gray, opts.glcm_levels)?.to_vec()),
        (Block::Hsv, hsv_histogram(img, opts.hsv_bins)?),
        (Block::Hu, hu_moments(&gray)?.to_vec()),
    ];
    if opts.extended {
        blocks.push((Block::Hog, hog_descriptor(&gray)));
        blocks.push((Block::Harris, harris_summary(&gray).to_vec()));
    }
    FeatureVector::from_blocks(blocks, |b| b.len(opts, img.width, img.height))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_view(seed: u64) -> ViewImage<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = ViewImage::blank(129, 132, 0);
        for r in 40..120 {
            for c in 50..80 {
                img.pixels[r * 129 + c] = [rng.random(), rng.random(), rng.random()];
            }
        }
        img
    }

    #[test]
    fn gray_examples() {
        let img = ViewImage::<f64> { width: 3, height: 1, azimuth: 0, pixels: vec![[0.3; 3], [1.0, 0.0, 0.0], [0.0; 3]] };
        let g = to_gray(&img);
        assert!((g.data[0] - 0.3).abs() < 1e-15);
        assert_eq!(g.data[1], 1.0 / 3.0);
        assert_eq!(g.data[2], 0.0);
    }

    #[test]
    fn global_vector_layout() {
        let img = random_view(1);
        let opts = FeatureOptions::default();
        let v = global_feature_vector(&img, &opts).unwrap();
        assert_eq!(v.len(), 13 + 512 + 7);
        assert_eq!(v.len(), 532);
        assert_eq!(v.names(), feature_names(&opts, 129, 132));
        assert_eq!(v.names()[1], "haralick_contrast");
        assert_eq!(v.names()[13 + 12], "hsv_012");
        assert_eq!(v.names()[13 + 512 + 2], "hu_3");
        assert_eq!(v, global_feature_vector(&img, &opts).unwrap());
        assert_eq!(v.block(Block::Hu).unwrap().len(), 7);
        assert!(v.block(Block::Hog).is_none());

        let ext = FeatureOptions { extended: true, ..opts };
        let e = global_feature_vector(&img, &ext).unwrap();
        assert_eq!(e.len(), 532 + 8100 + 3);
        assert_eq!(&e.values()[..532], v.values());
    }

    #[test]
    fn block_order_is_enforced() {
        let opts = FeatureOptions::default();
        let len = |b: Block| b.len(&opts, 129, 132);
        let bad = FeatureVector::<f64>::from_blocks(vec![(Block::Hu, vec![0.0; 7]), (Block::Haralick, vec![0.0; 13])], len);
        assert!(matches!(bad, Err(FeatureError::BlockLayout(_))));
        let short = FeatureVector::<f64>::from_blocks(vec![(Block::Haralick, vec![0.0; 12])], len);
        assert!(matches!(short, Err(FeatureError::BlockLayout(_))));
        let nan = FeatureVector::<f64>::from_blocks(vec![(Block::Hu, vec![f64::NAN; 7])], len);
        assert!(matches!(nan, Err(FeatureError::BlockLayout(_))));
    }

    #[test]
    fn blank_view_is_an_error() {
        let img = ViewImage::<f64>::blank(129, 132, 0);
        assert_eq!(global_feature_vector(&img, &FeatureOptions::default()), Err(FeatureError::ZeroMass));
    }
}
