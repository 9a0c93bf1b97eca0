use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMat, SparseAdj};
use crate::superpixel::SuperpixelMap;

/// Superpixel graph at one scale.
///
/// `adj` is the raw binary adjacency: weight 1 between regions that share a
/// boundary, no self-loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpGraph {
    pub feats: DenseMat,
    pub centroids: DenseMat,
    pub sizes: Vec<usize>,
    pub adj: SparseAdj,
    pub scale_id: usize,
}

impl SpGraph {
    pub fn new(feats: DenseMat, centroids: DenseMat, sizes: Vec<usize>, adj: SparseAdj, scale_id: usize) -> Result<Self> {
        let n = feats.rows();
        if centroids.rows() != n || centroids.cols() != 2 || sizes.len() != n || adj.n() != n {
            return Err(Error::dim(format!(
                "graph parts disagree: {n} feature rows, {}x{} centroids, {} sizes, adjacency over {}",
                centroids.rows(),
                centroids.cols(),
                sizes.len(),
                adj.n()
            )));
        }
        if adj.has_self_loops() {
            return Err(Error::invalid("raw adjacency must not contain self-loops"));
        }
        if !feats.is_finite() || !centroids.is_finite() {
            return Err(Error::NonFinite("graph features".into()));
        }
        Ok(Self {
            feats,
            centroids,
            sizes,
            adj,
            scale_id,
        })
    }

    pub fn n(&self) -> usize {
        self.feats.rows()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.upper_edges().count()
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::dim("permutation length"));
        }
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        Self::new(
            self.feats.select_rows(&inv),
            self.centroids.select_rows(&inv),
            inv.iter().map(|&i| self.sizes[i]).collect(),
            self.adj.permute(perm)?,
            self.scale_id,
        )
    }
}

/// Region adjacency graph: `A_ij = 1` iff some pixel of region `i` is
/// 4-adjacent to a pixel of region `j`.
pub fn build_rag(sp: &SuperpixelMap) -> Result<SpGraph> {
    let (w, h) = (sp.width, sp.height);
    let mut pairs = BTreeSet::new();
    for p in 0..w * h {
        let (i, j) = (p / w, p % w);
        let a = sp.labels[p];
        if j + 1 < w && sp.labels[p + 1] != a {
            pairs.insert(ordered(a, sp.labels[p + 1]));
        }
        if i + 1 < h && sp.labels[p + w] != a {
            pairs.insert(ordered(a, sp.labels[p + w]));
        }
    }
    let edges: Vec<_> = pairs.into_iter().map(|(a, b)| (a, b, 1.0)).collect();
    SpGraph::new(
        sp.centers_u.clone(),
        sp.centers_r.clone(),
        sp.sizes.clone(),
        SparseAdj::from_undirected(sp.n_superpixels, &edges)?,
        0,
    )
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Dissimilarity weights `‖u_i − u_j‖₁` on the graph's edges.
pub fn edge_weights(g: &SpGraph) -> Result<SparseAdj> {
    g.adj.map_weights(|i, j, _| l1(g.feats.row(i), g.feats.row(j)))
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
