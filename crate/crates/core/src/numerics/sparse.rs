use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dense::DenseMat;
use crate::error::{Error, Result};

/// Symmetric sparse adjacency stored as a sorted coordinate list.
///
/// Entries are sorted by `(row, col)` and unique. Symmetry is checked on
/// construction, so `(i, j, w)` present implies `(j, i, w)` present with the
/// bitwise-same weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseAdj {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseAdj {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    /// Builds from an entry list that must already be symmetric.
    pub fn from_entries(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, w) in &entries {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("entry ({i},{j}) out of range for n={n}")));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("weight of ({i},{j})")));
            }
            if w < 0.0 {
                return Err(Error::invalid(format!("negative weight {w} at ({i},{j})")));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));
        if entries.windows(2).any(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(Error::invalid("duplicate adjacency entry"));
        }
        let adj = Self { n, entries };
        for &(i, j, w) in &adj.entries {
            match adj.get(j, i) {
                Some(v) if v.to_bits() == w.to_bits() => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "adjacency not symmetric at ({i},{j})"
                    )))
                }
            }
        }
        Ok(adj)
    }

    /// Builds from undirected edges, mirroring each one. Repeated edges keep
    /// the first weight seen.
    pub fn from_undirected(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(i, j, w) in edges {
            map.entry((i, j)).or_insert(w);
            map.entry((j, i)).or_insert(w);
        }
        Self::from_entries(n, map.into_iter().map(|((i, j), w)| (i, j, w)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Undirected off-diagonal edges `(i, j, w)` with `i < j`.
    pub fn upper_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().copied().filter(|&(i, j, _)| i < j)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .ok()
            .map(|k| self.entries[k].2)
    }

    /// Compressed row offsets into `entries`: row `i` spans
    /// `offsets[i]..offsets[i+1]`.
    pub fn row_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0usize; self.n + 1];
        for &(i, _, _) in &self.entries {
            offsets[i + 1] += 1;
        }
        for i in 0..self.n {
            offsets[i + 1] += offsets[i];
        }
        offsets
    }

    /// Neighbor lists `(j, w)` per row, in column order.
    pub fn rows(&self) -> Vec<&[(usize, usize, f64)]> {
        let off = self.row_offsets();
        (0..self.n).map(|i| &self.entries[off[i]..off[i + 1]]).collect()
    }

    pub fn degree_counts(&self) -> Vec<usize> {
        let off = self.row_offsets();
        (0..self.n).map(|i| off[i + 1] - off[i]).collect()
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut m = DenseMat::zeros(self.n, self.n);
        for &(i, j, w) in &self.entries {
            m[(i, j)] = w;
        }
        m
    }

    pub fn has_self_loops(&self) -> bool {
        self.entries.iter().any(|&(i, j, _)| i == j)
    }

    /// Same sparsity pattern with every weight replaced by `f(i, j, w)`.
    /// `f` must be symmetric in `(i, j)`.
    pub fn map_weights(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<Self> {
        Self::from_entries(
            self.n,
            self.entries.iter().map(|&(i, j, w)| (i, j, f(i, j, w))).collect(),
        )
    }

    /// Permutes node ids: node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::dim("permutation length"));
        }
        Self::from_entries(
            self.n,
            self.entries
                .iter()
                .map(|&(i, j, w)| (perm[i], perm[j], w))
                .collect(),
        )
    }

    /// Number of connected components, counting isolated nodes.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let rows = self.rows();
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &(_, j, _) in rows[v] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }
}

/// `D̂^{-1/2} (A + I) D̂^{-1/2}`, the symmetric normalization with self-loops.
///
/// An existing diagonal entry has 1 added to it.
pub fn normalize_adjacency(a: &SparseAdj) -> Result<SparseAdj> {
    if let Some(&(i, j, w)) = a.entries.iter().find(|e| e.2 < 0.0) {
        return Err(Error::invalid(format!("negative weight {w} at ({i},{j})")));
    }
    let mut with_loops: BTreeMap<(usize, usize), f64> =
        a.entries.iter().map(|&(i, j, w)| ((i, j), w)).collect();
    for i in 0..a.n {
        *with_loops.entry((i, i)).or_insert(0.0) += 1.0;
    }
    let mut degree = vec![0.0; a.n];
    for (&(i, _), &w) in &with_loops {
        degree[i] += w;
    }
    // the product is formed in (min, max) order so mirrored entries match bitwise
    let entries = with_loops
        .into_iter()
        .map(|((i, j), w)| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            (i, j, w / (degree[lo] * degree[hi]).sqrt())
        })
        .collect();
    Ok(SparseAdj { n: a.n, entries })
}

/// `Σ_j A_ij` for each row.
pub fn row_sums(a: &SparseAdj) -> Vec<f64> {
    let mut sums = vec![0.0; a.n];
    for &(i, _, w) in &a.entries {
        sums[i] += w;
    }
    sums
}

/// Sparse-dense product `A · H`.
///
/// Rows are computed independently and each row sums its neighbors in
/// column order, so the result does not depend on the thread count.
pub fn spmm(a: &SparseAdj, h: &DenseMat) -> Result<DenseMat> {
    if a.n != h.rows() {
        return Err(Error::dim(format!(
            "spmm: adjacency over {} nodes, matrix has {} rows",
            a.n,
            h.rows()
        )));
    }
    let cols = h.cols();
    let offsets = a.row_offsets();
    let mut out = DenseMat::zeros(a.n, cols);
    if cols == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, out_row)| {
            for &(_, j, w) in &a.entries[offsets[i]..offsets[i + 1]] {
                for (o, &v) in out_row.iter_mut().zip(h.row(j)) {
                    *o += w * v;
                }
            }
        });
    Ok(out)
}
