use std::collections::BTreeMap;

use super::boruvka::ScaleHierarchy;
use crate::error::{Error, Result};
use crate::superpixel::{SoftAssociation, SuperpixelMap};

/// Sparse pixel-to-node soft assignment: each pixel row lists
/// `(node, probability)` pairs in ascending node order and sums to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeAssociation {
    width: usize,
    height: usize,
    n_nodes: usize,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl NodeAssociation {
    fn from_rows(width: usize, height: usize, n_nodes: usize, rows: impl Iterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut offsets = vec![0];
        let mut entries = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            // merge repeated nodes, summing in candidate order
            let start = *offsets.last().unwrap();
            for (node, p) in row {
                if entries.len() > start && entries.last().is_some_and(|e: &(usize, f64)| e.0 == node) {
                    entries.last_mut().unwrap().1 += p;
                } else {
                    entries.push((node, p));
                }
            }
            offsets.push(entries.len());
        }
        Self {
            width,
            height,
            n_nodes,
            offsets,
            entries,
        }
    }

    /// Nodes are the grid superpixels of `q`.
    pub fn from_soft(q: &SoftAssociation) -> Self {
        Self::from_rows(
            q.width(),
            q.height(),
            q.n_superpixels(),
            (0..q.n_pixels()).map(|p| q.entries(p).filter(|e| e.1 != 0.0).collect()),
        )
    }

    /// One-hot rows from a hard labeling.
    pub fn from_labels(width: usize, height: usize, labels: &[usize], n_nodes: usize) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::dim("labels do not cover the raster"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_nodes) {
            return Err(Error::invalid(format!("label {l} out of range for {n_nodes} nodes")));
        }
        Ok(Self::from_rows(width, height, n_nodes, labels.iter().map(|&l| vec![(l, 1.0)])))
    }

    /// Carries the grid-cell association `q` over to the regions of `map`
    /// (the connected, compacted labeling derived from `q`).
    ///
    /// Each grid cell sends its mass to the region that holds most of its
    /// argmax pixels (lowest region id on ties). Mass of cells that won no
    /// pixel goes to the pixel's own region. Regions that end up with no
    /// mass at all get one-hot rows for their pixels.
    pub fn for_regions(q: &SoftAssociation, map: &SuperpixelMap) -> Result<Self> {
        if map.width != q.width() || map.height != q.height() {
            return Err(Error::dim("superpixel map does not match association"));
        }
        let argmax = q.hard_labels();
        let mut votes: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); q.n_superpixels()];
        for (p, &cell) in argmax.iter().enumerate() {
            *votes[cell].entry(map.labels[p]).or_default() += 1;
        }
        let cell_to_region: Vec<Option<usize>> = votes
            .iter()
            .map(|v| {
                v.iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(&region, _)| region)
            })
            .collect();
        let soft_row = |p: usize| -> Vec<(usize, f64)> {
            q.entries(p)
                .filter(|e| e.1 != 0.0)
                .map(|(cell, v)| (cell_to_region[cell].unwrap_or(map.labels[p]), v))
                .collect()
        };
        let mut mass = vec![0.0; map.n_superpixels];
        for p in 0..q.n_pixels() {
            for (r, v) in soft_row(p) {
                mass[r] += v;
            }
        }
        Ok(Self::from_rows(
            q.width(),
            q.height(),
            map.n_superpixels,
            (0..q.n_pixels()).map(|p| {
                let own = map.labels[p];
                if mass[own] > 0.0 {
                    soft_row(p)
                } else {
                    vec![(own, 1.0)]
                }
            }),
        ))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn row(&self, p: usize) -> &[(usize, f64)] {
        &self.entries[self.offsets[p]..self.offsets[p + 1]]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_pixels()).map(|p| self.row(p).iter().map(|e| e.1).sum()).collect()
    }

    /// Column mass `Σ_p q_p(node)`.
    pub fn column_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.n_nodes];
        for &(node, v) in &self.entries {
            mass[node] += v;
        }
        mass
    }

    /// Sums the probabilities of nodes that share a parent.
    pub fn coarsen(&self, parent: &[usize], n_parents: usize) -> Result<Self> {
        if parent.len() != self.n_nodes {
            return Err(Error::dim(format!(
                "parent map covers {} nodes, association has {}",
                parent.len(),
                self.n_nodes
            )));
        }
        if let Some(&p) = parent.iter().find(|&&p| p >= n_parents) {
            return Err(Error::invalid(format!("parent id {p} out of range")));
        }
        Ok(Self::from_rows(
            self.width,
            self.height,
            n_parents,
            (0..self.n_pixels()).map(|p| self.row(p).iter().map(|&(node, v)| (parent[node], v)).collect()),
        ))
    }
}

/// Projects a finest-scale association onto scale `k` of the hierarchy.
/// Scale 0 is the identity.
pub fn coarsen_association(assoc: &NodeAssociation, hierarchy: &ScaleHierarchy, k: usize) -> Result<NodeAssociation> {
    if k >= hierarchy.k() {
        return Err(Error::invalid(format!(
            "scale {k} out of range (hierarchy has {})",
            hierarchy.k()
        )));
    }
    if assoc.n_nodes() != hierarchy.scales[0].n() {
        return Err(Error::dim("association nodes do not match the finest scale"));
    }
    let map = hierarchy.fine_to_scale(k)?;
    assoc.coarsen(&map, hierarchy.scales[k].n())
}
