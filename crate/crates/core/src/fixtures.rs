//! Deterministic synthetic inputs shared by the verifier, the benchmarks
//! and the test suites.

use crate::fusion::LevelTree;
use crate::hierarchy::SpGraph;
use crate::imageio::{Image, PixelFeatureMap};
use crate::numerics::{random_matrix, DenseMat, Rng, SparseAdj};
use crate::superpixel::{SoftAssociation, CANDIDATES};

/// Black where the pixel center lies left of the vertical midline, white
/// elsewhere.
pub fn two_tone(width: usize, height: usize) -> Image {
    Image::from_fn_rgb(width, height, |_, j| {
        if 2 * j + 1 < width {
            [0, 0, 0]
        } else {
            [255, 255, 255]
        }
    })
}

/// Smooth background with a few flat disks and boxes, scaled to the image.
pub fn scene(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = Rng::new(seed);
    let shapes: Vec<(f64, f64, f64, bool, [u8; 3])> = (0..6)
        .map(|_| {
            let color = [rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8];
            (rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.08, 0.2), rng.below(2) == 0, color)
        })
        .collect();
    Image::from_fn_rgb(width, height, |i, j| {
        let (y, x) = ((i as f64 + 0.5) / height as f64, (j as f64 + 0.5) / width as f64);
        let mut px = [(40.0 + 150.0 * x) as u8, (60.0 + 120.0 * y) as u8, 110];
        for &(cy, cx, r, disk, color) in &shapes {
            let inside = if disk {
                (y - cy).hypot(x - cx) < r
            } else {
                (y - cy).abs() < r && (x - cx).abs() < r * 1.5
            };
            if inside {
                px = color;
            }
        }
        px
    })
}

pub fn random_image(width: usize, height: usize, rng: &mut Rng) -> Image {
    let data = (0..width * height * 3).map(|_| rng.below(256) as u8).collect();
    Image::new(width, height, 3, data).expect("sized buffer")
}

/// Random appearance in `[0, 1)` with the given positional scale.
pub fn random_features(width: usize, height: usize, dim: usize, pos_scale: f64, rng: &mut Rng) -> PixelFeatureMap {
    let app: Vec<f64> = (0..width * height * dim).map(|_| rng.next_f64()).collect();
    PixelFeatureMap::from_appearance(width, height, dim, &app, pos_scale).expect("sized buffer")
}

/// Random strictly positive probabilities on in-grid candidates.
pub fn random_association(width: usize, height: usize, grid_w: usize, grid_h: usize, rng: &mut Rng) -> SoftAssociation {
    let base = SoftAssociation::hard_grid(width, height, grid_w, grid_h).expect("valid grid");
    let probs = (0..width * height)
        .map(|p| {
            let mut row = [0.0; CANDIDATES];
            for (k, v) in row.iter_mut().enumerate() {
                if base.candidate(p, k).is_some() {
                    *v = rng.uniform(0.05, 1.0);
                }
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect();
    SoftAssociation::from_probs(width, height, grid_w, grid_h, probs).expect("normalized rows")
}

/// Random spanning tree plus about `extra` more edges, each with an
/// arbitrary positive weight.
pub fn random_connected_edges(n: usize, extra: usize, rng: &mut Rng) -> Vec<(usize, usize, f64)> {
    let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (rng.below(i), i, 0.0)).collect();
    for _ in 0..extra {
        let (a, b) = (rng.below(n), rng.below(n));
        if a != b {
            edges.push((a.min(b), a.max(b), 0.0));
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    edges.dedup_by_key(|e| (e.0, e.1));
    edges
}

/// Connected graph with random features of width `dim` and centroids in
/// a 100×100 box. Node sizes are in `1..=4`.
pub fn random_graph(n: usize, dim: usize, rng: &mut Rng) -> SpGraph {
    let edges = random_connected_edges(n, n, rng);
    let binary: Vec<_> = edges.iter().map(|&(a, b, _)| (a, b, 1.0)).collect();
    SpGraph::new(
        random_matrix(n, dim, -1.0, 1.0, rng),
        random_matrix(n, 2, 0.0, 100.0, rng),
        (0..n).map(|_| 1 + rng.below(4)).collect(),
        SparseAdj::from_undirected(n, &binary).expect("valid edges"),
        0,
    )
    .expect("consistent parts")
}

/// Tree with `branches` branches, each owning at least one of `leaves`
/// leaves, random features and a random root input.
pub fn random_tree(leaves: usize, branches: usize, dim: usize, rng: &mut Rng) -> LevelTree {
    assert!(branches >= 1 && leaves >= branches);
    let mut parent: Vec<usize> = (0..leaves).map(|l| if l < branches { l } else { rng.below(branches) }).collect();
    rng.shuffle(&mut parent);
    let mut t = LevelTree::new(
        random_matrix(branches, dim, -1.0, 1.0, rng),
        random_matrix(leaves, dim, -1.0, 1.0, rng),
        parent,
    )
    .expect("every branch has a leaf");
    let root: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
    t.set_root(root).expect("matching width");
    t
}

/// Rows all equal to `row`.
pub fn constant_rows(n: usize, row: &[f64]) -> DenseMat {
    DenseMat::from_fn(n, row.len(), |_, j| row[j])
}
