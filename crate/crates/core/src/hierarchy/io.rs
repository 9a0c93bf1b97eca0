use serde::{Deserialize, Serialize};

use super::boruvka::{MergeStep, ScaleHierarchy};
use super::graph::edge_weights;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: usize,
    pub feat: Vec<f64>,
    pub centroid: [f64; 2],
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleJson {
    pub scale: usize,
    pub n: usize,
    pub nodes: Vec<NodeJson>,
    /// `[i, j, w]` with `i < j` and `w` the L1 feature distance at this scale.
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyJson {
    pub scales: Vec<ScaleJson>,
    pub steps: Vec<MergeStep>,
    pub parent_maps: Vec<Vec<usize>>,
}

impl HierarchyJson {
    pub fn from_hierarchy(h: &ScaleHierarchy) -> Result<Self> {
        let scales = h
            .scales
            .iter()
            .enumerate()
            .map(|(k, g)| {
                Ok(ScaleJson {
                    scale: k,
                    n: g.n(),
                    nodes: (0..g.n())
                        .map(|i| NodeJson {
                            id: i,
                            feat: g.feats.row(i).to_vec(),
                            centroid: [g.centroids[(i, 0)], g.centroids[(i, 1)]],
                            size: g.sizes[i],
                        })
                        .collect(),
                    edges: edge_weights(g)?.upper_edges().collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scales,
            steps: h.record.steps.clone(),
            parent_maps: h.record.parent_maps.clone(),
        })
    }

    /// Structural checks: ids dense, edges in range and ordered, parent maps
    /// total and onto.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for s in &self.scales {
            if s.nodes.len() != s.n || s.nodes.iter().enumerate().any(|(i, n)| n.id != i) {
                return Err(format!("scale {}: node ids not dense", s.scale));
            }
            if s.edges.iter().any(|&(i, j, w)| i >= j || j >= s.n || w.is_nan() || w < 0.0) {
                return Err(format!("scale {}: bad edge", s.scale));
            }
        }
        if self.parent_maps.len() + 1 != self.scales.len() {
            return Err("parent map count must be scales - 1".into());
        }
        for (k, pm) in self.parent_maps.iter().enumerate() {
            let (from, to) = (self.scales[k].n, self.scales[k + 1].n);
            if pm.len() != from || pm.iter().any(|&p| p >= to) {
                return Err(format!("parent map {k} not total"));
            }
            let mut hit = vec![false; to];
            pm.iter().for_each(|&p| hit[p] = true);
            if hit.contains(&false) {
                return Err(format!("parent map {k} not onto"));
            }
        }
        Ok(())
    }
}
