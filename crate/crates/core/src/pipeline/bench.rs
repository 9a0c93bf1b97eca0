use std::fmt::Write as _;
use std::time::Instant;

use super::config::{GridSize, PipelineConfig};
use super::stages::{cluster_config, features};
use crate::error::Result;
use crate::hierarchy::{boruvka_merge, build_rag};
use crate::imageio::Image;
use crate::superpixel::{enforce_connectivity, init_grid, SuperpixelMap, CANDIDATES};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub stage: String,
    pub nodes: usize,
    pub edges: usize,
    pub millis: f64,
    /// Estimated bytes held by the stage's main data structures.
    pub bytes: usize,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn graph_bytes(nodes: usize, edges: usize, dim: usize) -> usize {
    nodes * (dim + 2) * 8 + nodes * 8 + edges * 2 * 24
}

/// Primitive counts and timings: raw pixels, then per grid the initial
/// cells and the clustered regions, then the coarsened scales of the first
/// grid.
pub fn bench(img: &Image, cfg: &PipelineConfig, grids: &[GridSize]) -> Result<Vec<BenchRow>> {
    let (w, h) = (img.width(), img.height());
    let mut rows = Vec::new();
    let t = Instant::now();
    let fm0 = features(img, cfg)?;
    rows.push(BenchRow {
        stage: "pixels".into(),
        nodes: w * h,
        edges: (w - 1) * h + w * (h - 1),
        millis: ms(t),
        bytes: fm0.as_slice().len() * 8,
    });
    let mut first_map: Option<SuperpixelMap> = None;
    for &grid in grids {
        let gcfg = PipelineConfig { grid, ..cfg.clone() };
        let fm = features(img, &gcfg)?;
        let ccfg = cluster_config(&gcfg);
        ccfg.validate(&fm)?;
        let t = Instant::now();
        let (q, _) = init_grid(&fm, &ccfg)?;
        let init_ms = ms(t);
        let grid_map = SuperpixelMap::from_labels(&fm, &q.hard_labels())?;
        let grid_graph = build_rag(&grid_map)?;
        rows.push(BenchRow {
            stage: format!("grid:{grid}"),
            nodes: grid.w * grid.h,
            edges: grid_graph.n_edges(),
            millis: init_ms,
            bytes: fm.n_pixels() * CANDIDATES * 8 + graph_bytes(grid.w * grid.h, 0, fm.appearance_dim()),
        });
        let t = Instant::now();
        let out = crate::superpixel::cluster(&fm, &ccfg)?;
        let map = enforce_connectivity(&out.map, &fm)?;
        let g = build_rag(&map)?;
        rows.push(BenchRow {
            stage: format!("cluster:{grid}"),
            nodes: g.n(),
            edges: g.n_edges(),
            millis: ms(t),
            bytes: graph_bytes(g.n(), g.n_edges(), fm.appearance_dim()),
        });
        if first_map.is_none() {
            first_map = Some(map);
        }
    }
    if let Some(map) = first_map {
        let g = build_rag(&map)?;
        if cfg.targets.first().is_some_and(|&t| t < g.n()) {
            let t = Instant::now();
            let hier = boruvka_merge(&g, &cfg.targets)?;
            let elapsed = ms(t);
            for (k, s) in hier.scales.iter().enumerate().skip(1) {
                rows.push(BenchRow {
                    stage: format!("scale:{k}"),
                    nodes: s.n(),
                    edges: s.n_edges(),
                    millis: elapsed,
                    bytes: graph_bytes(s.n(), s.n_edges(), s.feats.cols()),
                });
            }
        }
    }
    Ok(rows)
}

pub const BENCH_HEADER: &str = "stage,nodes,edges,millis,bytes";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{BENCH_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.3},{}", r.stage, r.nodes, r.edges, r.millis, r.bytes);
    }
    out
}
