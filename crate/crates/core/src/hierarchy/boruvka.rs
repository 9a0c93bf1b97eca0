use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::graph::{edge_weights, SpGraph};
use crate::error::{Error, Result};
use crate::numerics::{DenseMat, SparseAdj};

/// One accepted MST edge. `a < b` are finest-scale node ids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub step: usize,
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Strict edge order: weight, then `min(i,j)`, then `max(i,j)`.
pub fn edge_order(x: (usize, usize, f64), y: (usize, usize, f64)) -> Ordering {
    x.2.total_cmp(&y.2)
        .then(x.0.min(x.1).cmp(&y.0.min(y.1)))
        .then(x.0.max(x.1).cmp(&y.0.max(y.1)))
}

#[derive(Clone, Debug)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Minimum spanning forest by Boruvka rounds, returned in acceptance order.
///
/// Each round picks every component's lightest outgoing edge under
/// [`edge_order`], then applies the picked edges one at a time in that same
/// order, so each intermediate forest size is realized by a prefix of the
/// returned list.
pub fn boruvka_order(n: usize, edges: &[(usize, usize, f64)]) -> Vec<MergeStep> {
    let mut dsu = Dsu::new(n);
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    loop {
        let mut best: Vec<Option<usize>> = vec![None; n];
        for (idx, &(i, j, _)) in edges.iter().enumerate() {
            let (ri, rj) = (dsu.find(i), dsu.find(j));
            if ri == rj {
                continue;
            }
            for r in [ri, rj] {
                let better = match best[r] {
                    None => true,
                    Some(cur) => edge_order(edges[idx], edges[cur]) == Ordering::Less,
                };
                if better {
                    best[r] = Some(idx);
                }
            }
        }
        let mut picked: Vec<usize> = best.into_iter().flatten().collect::<BTreeSet<_>>().into_iter().collect();
        if picked.is_empty() {
            break;
        }
        picked.sort_by(|&x, &y| edge_order(edges[x], edges[y]));
        for idx in picked {
            let (i, j, w) = edges[idx];
            if dsu.union(i, j) {
                steps.push(MergeStep {
                    step: steps.len(),
                    a: i.min(j),
                    b: i.max(j),
                    weight: w,
                });
            }
        }
    }
    steps
}

/// Merge history: accepted edges and, per coarsening, the map from the
/// previous scale's node ids to the new scale's ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub steps: Vec<MergeStep>,
    pub parent_maps: Vec<Vec<usize>>,
}

/// Graphs from fine to coarse. `scales[0]` is the input graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleHierarchy {
    pub scales: Vec<SpGraph>,
    pub record: MergeRecord,
}

impl ScaleHierarchy {
    /// Number of scales, counting the finest.
    pub fn k(&self) -> usize {
        self.scales.len()
    }

    /// Node id at scale `k` of every finest-scale node.
    pub fn fine_to_scale(&self, k: usize) -> Result<Vec<usize>> {
        if k >= self.k() {
            return Err(Error::invalid(format!("scale {k} out of range (have {})", self.k())));
        }
        let mut map: Vec<usize> = (0..self.scales[0].n()).collect();
        for parents in &self.record.parent_maps[..k] {
            map.iter_mut().for_each(|m| *m = parents[*m]);
        }
        Ok(map)
    }
}

/// Boruvka coarsening with frozen finest-scale L1 weights, snapshotting a
/// graph each time the tree count reaches a target.
pub fn boruvka_merge(g: &SpGraph, targets: &[usize]) -> Result<ScaleHierarchy> {
    let n = g.n();
    validate_targets(n, targets)?;
    let weighted = edge_weights(g)?;
    let edges: Vec<_> = weighted.upper_edges().collect();
    let order = boruvka_order(n, &edges);

    let mut scales = vec![g.clone()];
    let mut parent_maps = Vec::new();
    let Some(&last) = targets.last() else {
        return Ok(ScaleHierarchy {
            scales,
            record: MergeRecord {
                steps: Vec::new(),
                parent_maps,
            },
        });
    };
    if order.len() < n - last {
        return Err(Error::Disconnected {
            components: n - order.len(),
            target: last,
        });
    }

    let mut dsu = Dsu::new(n);
    let mut applied = 0;
    let mut prev_assign: Vec<usize> = (0..n).collect();
    for (k, &target) in targets.iter().enumerate() {
        while n - applied > target {
            let s = order[applied];
            dsu.union(s.a, s.b);
            applied += 1;
        }
        let assign = group_ids(&mut dsu, n);
        let coarse = coarse_graph(g, &assign, k + 1)?;
        let mut parents = vec![0; scales[k].n()];
        for fine in 0..n {
            parents[prev_assign[fine]] = assign[fine];
        }
        parent_maps.push(parents);
        scales.push(coarse);
        prev_assign = assign;
    }
    Ok(ScaleHierarchy {
        scales,
        record: MergeRecord {
            steps: order[..applied].to_vec(),
            parent_maps,
        },
    })
}

fn validate_targets(n: usize, targets: &[usize]) -> Result<()> {
    for (k, &t) in targets.iter().enumerate() {
        if t == 0 || t >= n {
            return Err(Error::invalid(format!(
                "target {t} must be in 1..{n} (graph has {n} nodes)"
            )));
        }
        if k > 0 && t >= targets[k - 1] {
            return Err(Error::invalid(format!(
                "targets must be strictly decreasing, got {targets:?}"
            )));
        }
    }
    Ok(())
}

/// Dense group ids ordered by each group's smallest member.
fn group_ids(dsu: &mut Dsu, n: usize) -> Vec<usize> {
    let mut id_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|v| {
            let r = dsu.find(v);
            if id_of_root[r] == usize::MAX {
                id_of_root[r] = next;
                next += 1;
            }
            id_of_root[r]
        })
        .collect()
}

/// Coarse graph from a grouping of finest nodes: size-weighted means of
/// features and centroids, union of adjacencies without self-pairs.
fn coarse_graph(fine: &SpGraph, assign: &[usize], scale_id: usize) -> Result<SpGraph> {
    let m = assign.iter().max().map_or(0, |v| v + 1);
    let d = fine.feats.cols();
    let mut feats = DenseMat::zeros(m, d);
    let mut centroids = DenseMat::zeros(m, 2);
    let mut sizes = vec![0usize; m];
    for (v, &c) in assign.iter().enumerate() {
        let w = fine.sizes[v] as f64;
        sizes[c] += fine.sizes[v];
        for (a, &x) in feats.row_mut(c).iter_mut().zip(fine.feats.row(v)) {
            *a += w * x;
        }
        for (a, &x) in centroids.row_mut(c).iter_mut().zip(fine.centroids.row(v)) {
            *a += w * x;
        }
    }
    for (c, &size) in sizes.iter().enumerate().take(m) {
        let inv = 1.0 / size as f64;
        feats.row_mut(c).iter_mut().for_each(|x| *x *= inv);
        centroids.row_mut(c).iter_mut().for_each(|x| *x *= inv);
    }
    let edges: Vec<_> = fine
        .adj
        .upper_edges()
        .filter(|&(i, j, _)| assign[i] != assign[j])
        .map(|(i, j, _)| (assign[i].min(assign[j]), assign[i].max(assign[j]), 1.0))
        .collect();
    SpGraph::new(feats, centroids, sizes, SparseAdj::from_undirected(m, &edges)?, scale_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)], feats: Vec<f64>) -> SpGraph {
        let e: Vec<_> = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        SpGraph::new(
            DenseMat::from_vec(n, 1, feats).unwrap(),
            DenseMat::zeros(n, 2),
            vec![1; n],
            SparseAdj::from_undirected(n, &e).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn path_merges_lightest_first() {
        // weights |0-1| = 1, |1-3| = 2
        let g = graph(3, &[(0, 1), (1, 2)], vec![0.0, 1.0, 3.0]);
        let h = boruvka_merge(&g, &[2]).unwrap();
        assert_eq!(h.record.steps.len(), 1);
        assert_eq!((h.record.steps[0].a, h.record.steps[0].b), (0, 1));
        assert_eq!(h.record.parent_maps[0], vec![0, 0, 1]);
        assert_eq!(h.scales[1].n(), 2);
        assert_eq!(h.scales[1].feats.as_slice(), &[0.5, 3.0]);
    }

    #[test]
    fn triangle_mst_weight() {
        // weights: (0,1)=1, (1,2)=2, (0,2)=3
        let g = graph(3, &[(0, 1), (1, 2), (0, 2)], vec![0.0, 1.0, 3.0]);
        let h = boruvka_merge(&g, &[1]).unwrap();
        let total: f64 = h.record.steps.iter().map(|s| s.weight).sum();
        assert_eq!(total, 3.0);
        assert_eq!(h.scales[1].n(), 1);
        assert_eq!(h.scales[1].n_edges(), 0);
    }

    #[test]
    fn one_merge_for_n_minus_one() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)], vec![0.0, 5.0, 1.0, 7.0]);
        let h = boruvka_merge(&g, &[3]).unwrap();
        assert_eq!(h.record.steps.len(), 1);
        assert_eq!(h.k(), 2);
    }

    #[test]
    fn empty_targets_keep_finest() {
        let g = graph(2, &[(0, 1)], vec![0.0, 1.0]);
        let h = boruvka_merge(&g, &[]).unwrap();
        assert_eq!(h.k(), 1);
        assert!(h.record.steps.is_empty());
    }

    #[test]
    fn target_validation() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)], vec![0.0; 4]);
        assert!(boruvka_merge(&g, &[2, 3]).is_err());
        assert!(boruvka_merge(&g, &[4]).is_err());
        assert!(boruvka_merge(&g, &[0]).is_err());
        assert!(boruvka_merge(&g, &[2, 2]).is_err());
    }

    #[test]
    fn disconnected_reports_components() {
        let g = graph(4, &[(0, 1), (2, 3)], vec![0.0; 4]);
        assert!(boruvka_merge(&g, &[2]).is_ok());
        match boruvka_merge(&g, &[1]) {
            Err(Error::Disconnected { components, target }) => assert_eq!((components, target), (2, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ties_break_on_ids() {
        let g = graph(3, &[(0, 1), (1, 2), (0, 2)], vec![0.0; 3]);
        let h = boruvka_merge(&g, &[1]).unwrap();
        let pairs: Vec<_> = h.record.steps.iter().map(|s| (s.a, s.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2)]);
    }
}
