use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{FeatureKind, PipelineConfig};
use crate::cdgc::{embeddings_csv, stack_forward, MdgcnStack, StackConfig};
use crate::error::{Error, Result};
use crate::fusion::{build_tree, root_fusion, tree_lstm_up, FusionJson, FusionWeights, LevelTree, TreeLstmCell, TreeStates};
use crate::hierarchy::{boruvka_merge, build_rag, HierarchyJson, NodeAssociation, ScaleHierarchy};
use crate::imageio::{
    default_pos_scale, encode_label_pgm16, filter_bank_features, load_ppm, render_labels, to_lab, Image, Kernel,
    PixelFeatureMap,
};
use crate::numerics::{DenseMat, Rng};
use crate::superpixel::{cluster, enforce_connectivity, ClusterConfig, ClusterOutput, LossRecord, SuperpixelMap};

/// Compactness weight inside the default positional scale.
pub const COMPACTNESS_M: f64 = 10.0;

pub fn load_input(cfg: &PipelineConfig) -> Result<Image> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input image given".into()))?;
    load_ppm(path)
}

pub fn pos_scale_for(cfg: &PipelineConfig, width: usize, height: usize) -> f64 {
    cfg.pos_scale
        .unwrap_or_else(|| default_pos_scale(width, height, cfg.grid.w * cfg.grid.h, COMPACTNESS_M))
}

pub fn features(img: &Image, cfg: &PipelineConfig) -> Result<PixelFeatureMap> {
    let img = img.to_rgb();
    let s = pos_scale_for(cfg, img.width(), img.height());
    match cfg.features {
        FeatureKind::Lab => to_lab(&img, s),
        FeatureKind::Filterbank => filter_bank_features(&img, &[Kernel::sobel_x(), Kernel::sobel_y()], s),
    }
}

pub struct Segmentation {
    pub clustering: ClusterOutput,
    /// Connected, compacted regions; the finest graph's nodes.
    pub map: SuperpixelMap,
}

pub fn cluster_config(cfg: &PipelineConfig) -> ClusterConfig {
    ClusterConfig {
        temperature: cfg.temperature,
        lambda_compact: cfg.lambda_compact,
        ..ClusterConfig::new(cfg.grid.w, cfg.grid.h, cfg.iterations)
    }
}

pub fn segment(fm: &PixelFeatureMap, cfg: &PipelineConfig) -> Result<Segmentation> {
    let clustering = cluster(fm, &cluster_config(cfg))?;
    let map = enforce_connectivity(&clustering.map, fm)?;
    Ok(Segmentation { clustering, map })
}

pub struct HierarchyStage {
    pub hierarchy: ScaleHierarchy,
    /// Pixel association with the finest regions.
    pub assoc: NodeAssociation,
}

pub fn hierarchy(seg: &Segmentation, cfg: &PipelineConfig) -> Result<HierarchyStage> {
    let g = build_rag(&seg.map)?;
    if let Some(&first) = cfg.targets.first() {
        if first >= g.n() {
            return Err(Error::Config(format!(
                "target {first} is not below the {} regions found at the finest scale",
                g.n()
            )));
        }
    }
    let hierarchy = boruvka_merge(&g, &cfg.targets)?;
    let assoc = NodeAssociation::for_regions(&seg.clustering.association, &seg.map)?;
    Ok(HierarchyStage { hierarchy, assoc })
}

pub fn stack_config(cfg: &PipelineConfig) -> StackConfig {
    StackConfig {
        gamma: cfg.gamma,
        alpha: cfg.alpha,
        hidden: cfg.hidden,
        tied: cfg.tied,
        norm: cfg.subset_norm,
        seed: cfg.seed,
    }
}

pub struct Embedding {
    pub stack: MdgcnStack,
    pub per_scale: Vec<DenseMat>,
}

pub fn embed(fm: &PixelFeatureMap, h: &HierarchyStage, cfg: &PipelineConfig) -> Result<Embedding> {
    let stack = MdgcnStack::init(h.hierarchy.k(), fm.appearance_dim(), stack_config(cfg))?;
    let per_scale = stack_forward(&h.hierarchy, fm, &h.assoc, &stack)?;
    Ok(Embedding { stack, per_scale })
}

pub struct Fusion {
    pub tree: LevelTree,
    pub weights: FusionWeights,
    pub cell: TreeLstmCell,
    pub states: TreeStates,
}

/// Seed offset separating the fusion parameters from the layer stack.
const FUSION_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn fuse(h: &HierarchyStage, emb: &Embedding, cfg: &PipelineConfig) -> Result<Fusion> {
    let mut tree = build_tree(&h.hierarchy, &emb.per_scale)?;
    let mut rng = Rng::new(cfg.seed ^ FUSION_STREAM);
    let weights = FusionWeights::glorot(tree.dim(), &mut rng);
    let cell = TreeLstmCell::glorot(tree.dim(), cfg.hidden, &mut rng);
    tree.set_root(root_fusion(&tree, &weights)?)?;
    let states = tree_lstm_up(&tree, &cell)?;
    Ok(Fusion {
        tree,
        weights,
        cell,
        states,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub width: usize,
    pub height: usize,
    pub grid: [usize; 2],
    pub iterations: usize,
    pub pos_scale: f64,
    pub features: FeatureKind,
    pub n_superpixels: usize,
    pub sizes: Vec<usize>,
    pub centers_u: Vec<Vec<f64>>,
    pub centers_r: Vec<Vec<f64>>,
}

pub const LOSSES_HEADER: &str = "iter,loss_rec,loss_compact,loss_total";

pub fn losses_csv(trace: &[LossRecord]) -> String {
    let mut out = format!("{LOSSES_HEADER}\n");
    for r in trace {
        let _ = writeln!(out, "{},{:?},{:?},{:?}", r.iteration, r.reconstruction, r.compactness, r.total);
    }
    out
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_segment(dir: &Path, fm: &PixelFeatureMap, seg: &Segmentation, cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(dir)?;
    let m = &seg.map;
    write(dir, "labels.pgm", &encode_label_pgm16(m.width, m.height, &m.labels)?)?;
    let sidecar = SegmentJson {
        width: m.width,
        height: m.height,
        grid: [cfg.grid.w, cfg.grid.h],
        iterations: cfg.iterations,
        pos_scale: fm.pos_scale(),
        features: cfg.features,
        n_superpixels: m.n_superpixels,
        sizes: m.sizes.clone(),
        centers_u: m.centers_u.iter_rows().map(<[f64]>::to_vec).collect(),
        centers_r: m.centers_r.iter_rows().map(<[f64]>::to_vec).collect(),
    };
    write(dir, "segment.json", serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
    write(dir, "losses.csv", losses_csv(&seg.clustering.trace).as_bytes())
}

pub fn write_hierarchy(dir: &Path, seg: &Segmentation, h: &HierarchyStage, cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(dir)?;
    let json = HierarchyJson::from_hierarchy(&h.hierarchy)?;
    write(dir, "hierarchy.json", serde_json::to_string_pretty(&json)?.as_bytes())?;
    for k in 0..h.hierarchy.k() {
        let to_scale = h.hierarchy.fine_to_scale(k)?;
        let labels: Vec<usize> = seg.map.labels.iter().map(|&l| to_scale[l]).collect();
        let img = render_labels(&labels, seg.map.width, seg.map.height, cfg.seed)?;
        write(dir, &format!("scale_{k}.ppm"), &img.encode())?;
    }
    Ok(())
}

pub fn write_embedding(dir: &Path, emb: &Embedding) -> Result<()> {
    ensure_dir(dir)?;
    write(dir, "embeddings.csv", embeddings_csv(&emb.per_scale).as_bytes())?;
    write(dir, "weights.bin", &emb.stack.to_blob())
}

pub fn write_fusion(dir: &Path, f: &Fusion) -> Result<()> {
    ensure_dir(dir)?;
    let json = FusionJson::new(&f.tree, &f.states);
    write(dir, "fusion.json", serde_json::to_string_pretty(&json)?.as_bytes())
}

/// Checks every known artifact present in `dir` against its layout and
/// against the other artifacts. Returns the names of the files checked.
pub fn validate_outputs(dir: &Path) -> Result<Vec<String>> {
    let read = |name: &str| -> Result<Option<Vec<u8>>> {
        let path = dir.join(name);
        match std::fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    };
    let bad = |name: &str, msg: String| Error::Format(format!("{name}: {msg}"));
    let mut checked = Vec::new();

    let mut regions = None;
    if let Some(bytes) = read("segment.json")? {
        let s: SegmentJson = serde_json::from_slice(&bytes)?;
        if s.sizes.len() != s.n_superpixels || s.sizes.iter().sum::<usize>() != s.width * s.height {
            return Err(bad("segment.json", "sizes do not cover the image".into()));
        }
        if s.centers_u.len() != s.n_superpixels || s.centers_r.iter().any(|r| r.len() != 2) {
            return Err(bad("segment.json", "center tables malformed".into()));
        }
        regions = Some((s.width, s.height, s.n_superpixels));
        checked.push("segment.json".into());
    }
    if let Some(bytes) = read("labels.pgm")? {
        let (w, h, labels) = crate::imageio::decode_label_pgm16(&bytes)?;
        if let Some((sw, sh, n)) = regions {
            if (w, h) != (sw, sh) || labels.iter().any(|&l| l >= n) {
                return Err(bad("labels.pgm", "disagrees with segment.json".into()));
            }
        }
        checked.push("labels.pgm".into());
    }
    if let Some(bytes) = read("losses.csv")? {
        let text = String::from_utf8(bytes).map_err(|_| bad("losses.csv", "not UTF-8".into()))?;
        let mut lines = text.lines();
        if lines.next() != Some(LOSSES_HEADER) {
            return Err(bad("losses.csv", "unexpected header".into()));
        }
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 || cols[0] != i.to_string() || cols[1..].iter().any(|c| c.parse::<f64>().is_err()) {
                return Err(bad("losses.csv", format!("row {i} malformed")));
            }
        }
        checked.push("losses.csv".into());
    }
    let mut scale_sizes = None;
    if let Some(bytes) = read("hierarchy.json")? {
        let h: HierarchyJson = serde_json::from_slice(&bytes)?;
        h.validate().map_err(|m| bad("hierarchy.json", m))?;
        if let Some((_, _, n)) = regions {
            if h.scales.first().map(|s| s.n) != Some(n) {
                return Err(bad("hierarchy.json", "finest scale disagrees with segment.json".into()));
            }
        }
        scale_sizes = Some(h.scales.iter().map(|s| s.n).collect::<Vec<_>>());
        checked.push("hierarchy.json".into());
    }
    let mut embed_dim = None;
    if let Some(bytes) = read("embeddings.csv")? {
        let text = String::from_utf8(bytes).map_err(|_| bad("embeddings.csv", "not UTF-8".into()))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        if header.len() < 2 || header[..2] != ["node", "scale"] {
            return Err(bad("embeddings.csv", "unexpected header".into()));
        }
        let mut counts: Vec<usize> = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() || cols[2..].iter().any(|c| c.parse::<f64>().is_err()) {
                return Err(bad("embeddings.csv", "row width or value malformed".into()));
            }
            let (node, scale): (usize, usize) = match (cols[0].parse(), cols[1].parse()) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return Err(bad("embeddings.csv", "bad node or scale id".into())),
            };
            if scale >= counts.len() {
                counts.resize(scale + 1, 0);
            }
            if node != counts[scale] {
                return Err(bad("embeddings.csv", "node ids not dense".into()));
            }
            counts[scale] += 1;
        }
        if let Some(sizes) = &scale_sizes {
            if &counts != sizes {
                return Err(bad("embeddings.csv", "row counts disagree with hierarchy.json".into()));
            }
        }
        embed_dim = Some(header.len() - 2);
        checked.push("embeddings.csv".into());
    }
    if let Some(bytes) = read("weights.bin")? {
        MdgcnStack::from_blob(&bytes)?;
        checked.push("weights.bin".into());
    }
    if let Some(bytes) = read("fusion.json")? {
        let f: FusionJson = serde_json::from_slice(&bytes)?;
        let hd = f.root.len();
        if f.branches.iter().chain(&f.leaves).any(|v| v.len() != hd) || f.leaf_parent.len() != f.leaves.len() {
            return Err(bad("fusion.json", "inconsistent widths".into()));
        }
        if f.leaf_parent.iter().any(|&p| p >= f.branches.len()) {
            return Err(bad("fusion.json", "leaf parent out of range".into()));
        }
        if let (Some(d), false) = (embed_dim, f.root_input.is_empty()) {
            if f.root_input.len() != d {
                return Err(bad("fusion.json", "root input width disagrees with embeddings".into()));
            }
        }
        if let Some(sizes) = &scale_sizes {
            if sizes.len() == 2 && (f.leaves.len(), f.branches.len()) != (sizes[0], sizes[1]) {
                return Err(bad("fusion.json", "level sizes disagree with hierarchy.json".into()));
            }
        }
        checked.push("fusion.json".into());
    }
    Ok(checked)
}
