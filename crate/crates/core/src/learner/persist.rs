//! Model files.
//!
//! Linear models are stored as JSON. Forests use a compact little-endian
//! binary layout: the magic bytes, a format version, a JSON header holding
//! the feature names and parameters, then each tree as a node count
//! followed by its nodes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::forest::{ForestModel, ForestParams};
use super::tree::{Tree, TreeNode};
use super::{LearnError, Model, Result};

pub const FOREST_MAGIC: &[u8; 6] = b"QOERF\0";
pub const FOREST_FORMAT_VERSION: u32 = 1;

const TAG_LEAF: u8 = 0;
const TAG_SPLIT: u8 = 1;

#[derive(Serialize, Deserialize)]
struct ForestHeader {
    feature_names: Vec<String>,
    params: ForestParams,
    n_trees: usize,
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let bytes = match model {
        Model::Linear(_) => serde_json::to_vec_pretty(model).map_err(|e| LearnError::Format(e.to_string()))?,
        Model::Forest(f) => encode_forest(f)?,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(FOREST_MAGIC) {
        return decode_forest(&bytes).map(Model::Forest);
    }
    serde_json::from_slice(&bytes).map_err(|e| LearnError::Format(e.to_string()))
}

fn encode_forest(f: &ForestModel) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&ForestHeader {
        feature_names: f.feature_names.clone(),
        params: f.params,
        n_trees: f.trees.len(),
    })
    .map_err(|e| LearnError::Format(e.to_string()))?;

    let mut out = Vec::new();
    out.write_all(FOREST_MAGIC)?;
    out.write_all(&FOREST_FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    for tree in &f.trees {
        out.write_all(&(tree.nodes.len() as u32).to_le_bytes())?;
        for node in &tree.nodes {
            match node {
                TreeNode::Leaf { value, n } => {
                    out.push(TAG_LEAF);
                    out.write_all(&value.to_le_bytes())?;
                    out.write_all(&n.to_le_bytes())?;
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(TAG_SPLIT);
                    out.write_all(&feature.to_le_bytes())?;
                    out.write_all(&threshold.to_le_bytes())?;
                    out.write_all(&left.to_le_bytes())?;
                    out.write_all(&right.to_le_bytes())?;
                }
            }
        }
    }
    Ok(out)
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| LearnError::Format("truncated forest file".into()))?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

fn decode_forest(bytes: &[u8]) -> Result<ForestModel> {
    let mut c = Cursor(&bytes[FOREST_MAGIC.len()..]);
    let version = c.u32()?;
    if version != FOREST_FORMAT_VERSION {
        return Err(LearnError::Format(format!("unsupported forest format version {version}")));
    }
    let header_len = c.u32()? as usize;
    if c.0.len() < header_len {
        return Err(LearnError::Format("truncated forest header".into()));
    }
    let header: ForestHeader =
        serde_json::from_slice(&c.0[..header_len]).map_err(|e| LearnError::Format(e.to_string()))?;
    c.0 = &c.0[header_len..];
    let n_features = header.feature_names.len() as u32;

    let mut trees = Vec::with_capacity(header.n_trees);
    for t in 0..header.n_trees {
        let count = c.u32()?;
        if count == 0 {
            return Err(LearnError::Format(format!("tree {t} has no nodes")));
        }
        let mut nodes = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let node = match c.u8()? {
                TAG_LEAF => TreeNode::Leaf {
                    value: c.f64()?,
                    n: c.u32()?,
                },
                TAG_SPLIT => {
                    let node = TreeNode::Split {
                        feature: c.u32()?,
                        threshold: c.f64()?,
                        left: c.u32()?,
                        right: c.u32()?,
                    };
                    if let TreeNode::Split { feature, left, right, .. } = node {
                        if feature >= n_features || left >= count || right >= count {
                            return Err(LearnError::Format(format!("tree {t} has a dangling split")));
                        }
                    }
                    node
                }
                tag => return Err(LearnError::Format(format!("unknown node tag {tag}"))),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    if !c.0.is_empty() {
        return Err(LearnError::Format("trailing bytes after last tree".into()));
    }
    Ok(ForestModel {
        feature_names: header.feature_names,
        params: header.params,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LinearModel;

    fn small_forest() -> ForestModel {
        ForestModel {
            feature_names: vec!["a".into(), "b".into()],
            params: ForestParams::default(),
            trees: vec![
                Tree {
                    nodes: vec![
                        TreeNode::Split { feature: 1, threshold: 0.5, left: 1, right: 2 },
                        TreeNode::Leaf { value: 1.5, n: 3 },
                        TreeNode::Leaf { value: 4.25, n: 2 },
                    ],
                },
                Tree::leaf(3.0, 5),
            ],
        }
    }

    #[test]
    fn forest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rf.bin");
        let model = Model::Forest(small_forest());
        save_model(&path, &model).unwrap();
        assert!(std::fs::read(&path).unwrap().starts_with(FOREST_MAGIC));
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn linear_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lin.json");
        let model = Model::Linear(LinearModel {
            feature_names: vec!["x".into()],
            coefficients: vec![0.1 + 0.2],
            intercept: -1e-17,
        });
        save_model(&path, &model).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = encode_forest(&small_forest()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rf.bin");
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(LearnError::Format(_))));
    }
}
