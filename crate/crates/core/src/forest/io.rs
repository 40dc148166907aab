//! Versioned little-endian binary model format.
//!
//! ```text
//! magic "TDRF" | version u32
//! config: n_estimators u64, max_depth u64, random_state u64, class_weight u8,
//!         max_features tag u8 + value u64, min_samples_leaf u64, bootstrap u8
//! dim u64 | class count u32 | class labels u32 × K
//! tree count u64, then per tree: node count u64 and nodes in preorder:
//!   0x01 feature u32, threshold f64, decrease f64   (split)
//!   0x00 K × f64                                    (leaf distribution)
//! ```

use super::{ClassWeight, DecisionTree, ForestError, ForestModel, MaxFeatures, Node, RfConfig};
use crate::num::Real;

pub const MODEL_MAGIC: &[u8; 4] = b"TDRF";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model<T: Real>(model: &ForestModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let c = &model.config;
    for v in [c.n_estimators as u64, c.max_depth as u64, c.random_state] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(match c.class_weight {
        ClassWeight::Uniform => 0,
        ClassWeight::Balanced => 1,
    });
    let (tag, value) = match c.max_features {
        MaxFeatures::Sqrt => (0u8, 0u64),
        MaxFeatures::All => (1, 0),
        MaxFeatures::Fixed(m) => (2, m as u64),
    };
    out.push(tag);
    out.extend_from_slice(&value.to_le_bytes());
    out.extend_from_slice(&(c.min_samples_leaf as u64).to_le_bytes());
    out.push(c.bootstrap as u8);

    out.extend_from_slice(&(model.dim as u64).to_le_bytes());
    out.extend_from_slice(&(model.classes.len() as u32).to_le_bytes());
    for &cl in &model.classes {
        out.extend_from_slice(&cl.to_le_bytes());
    }
    out.extend_from_slice(&(model.trees.len() as u64).to_le_bytes());
    for t in &model.trees {
        out.extend_from_slice(&(t.nodes.len() as u64).to_le_bytes());
        for n in &t.nodes {
            match n {
                Node::Split { feature, threshold, decrease, .. } => {
                    out.push(1);
                    out.extend_from_slice(&(*feature as u32).to_le_bytes());
                    out.extend_from_slice(&threshold.f64().to_le_bytes());
                    out.extend_from_slice(&decrease.f64().to_le_bytes());
                }
                Node::Leaf { dist } => {
                    out.push(0);
                    for p in dist {
                        out.extend_from_slice(&p.f64().to_le_bytes());
                    }
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ForestError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ForestError::ModelFormat(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ForestError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, ForestError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ForestError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, ForestError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize, ForestError> {
        usize::try_from(self.u64()?).map_err(|_| ForestError::ModelFormat("count overflows usize".into()))
    }
}

fn bad(msg: impl Into<String>) -> ForestError {
    ForestError::ModelFormat(msg.into())
}

pub fn read_model<T: Real>(bytes: &[u8]) -> Result<ForestModel<T>, ForestError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n_estimators = r.usize()?;
    let max_depth = r.usize()?;
    let random_state = r.u64()?;
    let class_weight = match r.u8()? {
        0 => ClassWeight::Uniform,
        1 => ClassWeight::Balanced,
        t => return Err(bad(format!("unknown class weight tag {t}"))),
    };
    let (tag, value) = (r.u8()?, r.usize()?);
    let max_features = match tag {
        0 => MaxFeatures::Sqrt,
        1 => MaxFeatures::All,
        2 => MaxFeatures::Fixed(value),
        t => return Err(bad(format!("unknown max_features tag {t}"))),
    };
    let min_samples_leaf = r.usize()?;
    let bootstrap = match r.u8()? {
        0 => false,
        1 => true,
        t => return Err(bad(format!("bad bootstrap flag {t}"))),
    };
    let config = RfConfig {
        n_estimators,
        max_depth,
        random_state,
        class_weight,
        max_features,
        min_samples_leaf,
        bootstrap,
    };
    let dim = r.usize()?;
    let k = r.u32()? as usize;
    let classes = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let n_trees = r.usize()?;
    if n_trees != n_estimators {
        return Err(bad(format!("{n_trees} trees but n_estimators = {n_estimators}")));
    }
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for t in 0..n_trees {
        let count = r.usize()?;
        let mut nodes = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            nodes.push(match r.u8()? {
                1 => {
                    let feature = r.u32()? as usize;
                    if feature >= dim {
                        return Err(bad(format!("tree {t}: feature {feature} ≥ dim {dim}")));
                    }
                    Node::Split {
                        feature,
                        threshold: T::of(r.f64()?),
                        right: 0,
                        decrease: T::of(r.f64()?),
                    }
                }
                0 => Node::Leaf {
                    dist: (0..k).map(|_| r.f64().map(T::of)).collect::<Result<_, _>>()?,
                },
                tag => return Err(bad(format!("tree {t}: unknown node tag {tag}"))),
            });
        }
        link(&mut nodes).map_err(|m| bad(format!("tree {t}: {m}")))?;
        trees.push(DecisionTree { nodes });
    }
    if r.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(ForestModel { config, classes, dim, trees })
}

/// Fills in right-child indices of a preorder node list, iteratively.
fn link<T>(nodes: &mut [Node<T>]) -> Result<(), &'static str> {
    // splits still waiting for their right child
    let mut pending: Vec<usize> = Vec::new();
    let mut expecting = 1usize;
    for i in 0..nodes.len() {
        if expecting == 0 {
            return Err("nodes after a complete tree");
        }
        expecting -= 1;
        match nodes[i] {
            Node::Split { .. } => {
                pending.push(i);
                expecting += 2;
            }
            Node::Leaf { .. } => {
                // the leaf closes left subtrees; the next node is the right
                // child of the most recent split whose left subtree just ended
                if i + 1 < nodes.len() {
                    if let Some(p) = pending.pop() {
                        if let Node::Split { right, .. } = &mut nodes[p] {
                            *right = i + 1;
                        }
                    }
                }
            }
        }
    }
    if expecting != 0 {
        return Err("incomplete tree");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, Matrix};

    fn model() -> ForestModel<f64> {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sin(), (i % 5) as f64, i as f64 * 0.1]).collect();
        let y: Vec<u32> = (0..40).map(|i| 1 + (i % 3) as u32).collect();
        fit_forest(&Matrix::from_rows(&rows).unwrap(), &y, &RfConfig { n_estimators: 7, ..RfConfig::default() }).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let bytes = write_model(&m);
        assert_eq!(&bytes[..4], b"TDRF");
        let back: ForestModel<f64> = read_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_model(&back), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = write_model(&model());
        assert!(read_model::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(read_model::<f64>(&magic).is_err());
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(read_model::<f64>(&version).is_err());
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(read_model::<f64>(&trailing).is_err());
    }
}
