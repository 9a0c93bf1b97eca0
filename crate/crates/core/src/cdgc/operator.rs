use rayon::prelude::*;

use super::partition::{PartitionMap, Subset};
use crate::error::{Error, Result};
use crate::hierarchy::SpGraph;
use crate::numerics::{normalize_adjacency, DenseMat, SparseAdj};

/// Normalization of a neighbor's coefficient inside its subset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SubsetNorm {
    /// `c_ij = Â_ij`: the subsets split the normalized adjacency exactly.
    #[default]
    Adjacency,
    /// `c_ij = Â_ij / |subset of j within R_i|`.
    Cardinality,
}

/// Directed sparse matrix in compressed rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// `entries` must be sorted by `(row, col)`.
    fn from_sorted(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut offsets = vec![0; n + 1];
        for &(i, _, _) in entries {
            offsets[i + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            n,
            offsets,
            cols: entries.iter().map(|e| e.1).collect(),
            vals: entries.iter().map(|e| e.2).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|e| e.1).sum()).collect()
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut m = DenseMat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `C · H`, row-parallel with neighbors summed in column order.
    pub fn mul(&self, h: &DenseMat) -> DenseMat {
        let d = h.cols();
        let mut out = DenseMat::zeros(self.n, d);
        if d == 0 {
            return out;
        }
        out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(|(i, o)| {
            for (j, c) in self.row(i) {
                for (a, &v) in o.iter_mut().zip(h.row(j)) {
                    *a += c * v;
                }
            }
        });
        out
    }

    /// `Cᵀ · G`.
    pub fn t_mul(&self, g: &DenseMat) -> DenseMat {
        let mut out = DenseMat::zeros(self.n, g.cols());
        for i in 0..self.n {
            for (j, c) in self.row(i) {
                for (a, &v) in out.row_mut(j).iter_mut().zip(g.row(i)) {
                    *a += c * v;
                }
            }
        }
        out
    }
}

/// Per-subset coefficient matrices `C_d0, C_d1, C_d2` of one graph and
/// their row sums `c̄_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    subsets: [Csr; 3],
    row_sums: [Vec<f64>; 3],
    norm: SubsetNorm,
}

impl Propagation {
    /// Normalizes the raw adjacency of `g` and splits it by `pmap`.
    pub fn new(g: &SpGraph, pmap: &PartitionMap, norm: SubsetNorm) -> Result<Self> {
        Self::from_normalized(&normalize_adjacency(&g.adj)?, pmap, norm)
    }

    pub fn from_normalized(a_hat: &SparseAdj, pmap: &PartitionMap, norm: SubsetNorm) -> Result<Self> {
        let n = a_hat.n();
        if pmap.n() != n {
            return Err(Error::dim(format!(
                "partition covers {} nodes, adjacency {}",
                pmap.n(),
                n
            )));
        }
        let card = pmap.cardinalities();
        let mut parts: [Vec<(usize, usize, f64)>; 3] = Default::default();
        for &(i, j, w) in a_hat.entries() {
            let s = pmap
                .label(i, j)
                .ok_or_else(|| Error::invalid(format!("pair ({i},{j}) missing from partition")))?;
            let c = match norm {
                SubsetNorm::Adjacency => w,
                SubsetNorm::Cardinality => w / card[i][s.index()] as f64,
            };
            parts[s.index()].push((i, j, c));
        }
        let subsets = parts.map(|p| Csr::from_sorted(n, &p));
        let row_sums = [subsets[0].row_sums(), subsets[1].row_sums(), subsets[2].row_sums()];
        Ok(Self {
            subsets,
            row_sums,
            norm,
        })
    }

    pub fn n(&self) -> usize {
        self.subsets[0].n()
    }

    pub fn norm(&self) -> SubsetNorm {
        self.norm
    }

    pub fn subset(&self, s: Subset) -> &Csr {
        &self.subsets[s.index()]
    }

    pub fn subset_row_sums(&self, s: Subset) -> &[f64] {
        &self.row_sums[s.index()]
    }

    /// Dense `Σ_k C_k`.
    pub fn combined_dense(&self) -> DenseMat {
        let mut m = self.subsets[0].to_dense();
        for c in &self.subsets[1..] {
            m = m.add(&c.to_dense()).expect("same shape");
        }
        m
    }
}
