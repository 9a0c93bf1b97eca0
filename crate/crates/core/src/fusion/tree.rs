use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::ScaleHierarchy;
use crate::numerics::{glorot_uniform, DenseMat, Rng};

/// Three-level tree: fine-scale leaves, coarse-scale branches, one root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTree {
    pub root_feat: Vec<f64>,
    pub branch_feats: DenseMat,
    pub leaf_feats: DenseMat,
    /// Branch id of every leaf.
    pub leaf_parent: Vec<usize>,
}

impl LevelTree {
    pub fn new(branch_feats: DenseMat, leaf_feats: DenseMat, leaf_parent: Vec<usize>) -> Result<Self> {
        if branch_feats.cols() != leaf_feats.cols() {
            return Err(Error::dim("branch and leaf features differ in width"));
        }
        if leaf_parent.len() != leaf_feats.rows() {
            return Err(Error::dim("one parent per leaf required"));
        }
        let mut has_child = vec![false; branch_feats.rows()];
        for &p in &leaf_parent {
            *has_child
                .get_mut(p)
                .ok_or_else(|| Error::invalid(format!("leaf parent {p} is not a branch")))? = true;
        }
        if has_child.contains(&false) {
            return Err(Error::invalid("every branch needs at least one leaf"));
        }
        Ok(Self {
            root_feat: vec![0.0; branch_feats.cols()],
            branch_feats,
            leaf_feats,
            leaf_parent,
        })
    }

    pub fn dim(&self) -> usize {
        self.leaf_feats.cols()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_feats.rows()
    }

    pub fn n_branches(&self) -> usize {
        self.branch_feats.rows()
    }

    /// Leaves of branch `b` in ascending id order.
    pub fn children(&self, b: usize) -> Vec<usize> {
        (0..self.n_leaves()).filter(|&l| self.leaf_parent[l] == b).collect()
    }

    pub fn set_root(&mut self, y1: Vec<f64>) -> Result<()> {
        if y1.len() != self.dim() {
            return Err(Error::dim(format!("root input has {} entries, tree dim is {}", y1.len(), self.dim())));
        }
        self.root_feat = y1;
        Ok(())
    }
}

/// Leaves from scale 0, branches from scale 1, parents from the merge
/// record. The root feature starts at zero.
pub fn build_tree(h: &ScaleHierarchy, embeddings: &[DenseMat]) -> Result<LevelTree> {
    if h.k() != 2 {
        return Err(Error::Config(format!(
            "tree fusion needs exactly 2 scales (fine and coarse), hierarchy has {}",
            h.k()
        )));
    }
    if embeddings.len() != 2 {
        return Err(Error::dim(format!("expected embeddings for 2 scales, got {}", embeddings.len())));
    }
    for (k, e) in embeddings.iter().enumerate() {
        if e.rows() != h.scales[k].n() {
            return Err(Error::dim(format!(
                "scale {k} embeddings have {} rows for {} nodes",
                e.rows(),
                h.scales[k].n()
            )));
        }
    }
    LevelTree::new(embeddings[1].clone(), embeddings[0].clone(), h.record.parent_maps[0].clone())
}

/// `Y₁ = W_a ā + W_b b̄`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w_a: DenseMat,
    pub w_b: DenseMat,
}

impl FusionWeights {
    pub fn new(w_a: DenseMat, w_b: DenseMat) -> Result<Self> {
        if w_a.shape() != w_b.shape() {
            return Err(Error::dim("W_a and W_b differ in shape"));
        }
        if !w_a.is_finite() || !w_b.is_finite() {
            return Err(Error::NonFinite("fusion weights".into()));
        }
        Ok(Self { w_a, w_b })
    }

    /// Square maps of width `dim`.
    pub fn glorot(dim: usize, rng: &mut Rng) -> Self {
        Self {
            w_a: glorot_uniform(dim, dim, rng),
            w_b: glorot_uniform(dim, dim, rng),
        }
    }
}

pub fn root_fusion(tree: &LevelTree, w: &FusionWeights) -> Result<Vec<f64>> {
    if tree.n_branches() == 0 || tree.n_leaves() == 0 {
        return Err(Error::invalid("root fusion needs nonempty branch and leaf levels"));
    }
    if w.w_a.cols() != tree.dim() {
        return Err(Error::dim(format!(
            "fusion weights take {} features, tree has {}",
            w.w_a.cols(),
            tree.dim()
        )));
    }
    let a = w.w_a.matvec(&tree.branch_feats.column_means())?;
    let b = w.w_b.matvec(&tree.leaf_feats.column_means())?;
    Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect())
}
