use serde::{Deserialize, Serialize};

use crate::hierarchy::SpGraph;

/// Radii closer than this count as equal.
pub const RADIUS_TOL: f64 = 1e-9;

/// Neighbor subset relative to the gravity center: `D0` same distance
/// (and the node itself), `D1` closer (centripetal), `D2` farther
/// (centrifugal).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    D0,
    D1,
    D2,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::D0, Subset::D1, Subset::D2];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Subset label for neighbor radius `r_j` seen from a node at radius `r_i`.
pub fn classify(r_i: f64, r_j: f64) -> Subset {
    if (r_j - r_i).abs() <= RADIUS_TOL {
        Subset::D0
    } else if r_j < r_i {
        Subset::D1
    } else {
        Subset::D2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionMap {
    pub gravity: [f64; 2],
    pub radii: Vec<f64>,
    /// `(i, j, subset)` for every directed neighbor pair and every self
    /// pair, sorted by `(i, j)`.
    pairs: Vec<(usize, usize, Subset)>,
}

impl PartitionMap {
    pub fn n(&self) -> usize {
        self.radii.len()
    }

    pub fn pairs(&self) -> &[(usize, usize, Subset)] {
        &self.pairs
    }

    pub fn label(&self, i: usize, j: usize) -> Option<Subset> {
        self.pairs
            .binary_search_by(|p| (p.0, p.1).cmp(&(i, j)))
            .ok()
            .map(|k| self.pairs[k].2)
    }

    /// `|{j ∈ R_i : η_i(j) = s}|` for each node and subset, `R_i` including `i`.
    pub fn cardinalities(&self) -> Vec<[usize; 3]> {
        let mut card = vec![[0usize; 3]; self.n()];
        for &(i, _, s) in &self.pairs {
            card[i][s.index()] += 1;
        }
        card
    }
}

/// Splits each node's neighborhood by centroid distance to the mean centroid.
pub fn partition(g: &SpGraph) -> PartitionMap {
    let n = g.n();
    let mut gravity = [0.0; 2];
    for i in 0..n {
        gravity[0] += g.centroids[(i, 0)];
        gravity[1] += g.centroids[(i, 1)];
    }
    if n > 0 {
        gravity[0] /= n as f64;
        gravity[1] /= n as f64;
    }
    let radii: Vec<f64> = (0..n)
        .map(|i| (g.centroids[(i, 0)] - gravity[0]).hypot(g.centroids[(i, 1)] - gravity[1]))
        .collect();
    let mut pairs: Vec<(usize, usize, Subset)> = g
        .adj
        .entries()
        .iter()
        .map(|&(i, j, _)| (i, j, classify(radii[i], radii[j])))
        .chain((0..n).map(|i| (i, i, Subset::D0)))
        .collect();
    pairs.sort_by_key(|p| (p.0, p.1));
    PartitionMap { gravity, radii, pairs }
}
