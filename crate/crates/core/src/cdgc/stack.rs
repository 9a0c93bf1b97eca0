use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer::{forward, Activation, CdgcLayer, SubsetWeights};
use super::operator::{Propagation, SubsetNorm};
use super::partition::partition;
use super::project::project_pixels_to_nodes;
use crate::error::{Error, Result};
use crate::hierarchy::{coarsen_association, NodeAssociation, ScaleHierarchy};
use crate::imageio::PixelFeatureMap;
use crate::numerics::{DenseMat, Rng};

/// Settings shared by every layer of a stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub gamma: usize,
    pub alpha: f64,
    pub hidden: usize,
    pub tied: bool,
    pub norm: SubsetNorm,
    pub seed: u64,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            gamma: 2,
            alpha: 0.4,
            hidden: 64,
            tied: true,
            norm: SubsetNorm::Adjacency,
            seed: 0,
        }
    }
}

/// One layer stack per scale. Layers use a rectifier except the last one
/// of each scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdgcnStack {
    pub config: StackConfig,
    pub scales: Vec<Vec<CdgcLayer>>,
}

#[derive(Serialize, Deserialize)]
struct BlobHeader {
    dims: Vec<usize>,
    alpha: f64,
    gamma: usize,
    seed: u64,
    scales: usize,
    tied: bool,
    norm: SubsetNorm,
}

impl MdgcnStack {
    /// Random init for `n_scales` scales taking `d_in` features to
    /// `config.hidden`. Each scale draws from its own fork of the seed.
    pub fn init(n_scales: usize, d_in: usize, config: StackConfig) -> Result<Self> {
        if config.gamma == 0 {
            return Err(Error::Config("gamma must be at least 1".into()));
        }
        if config.hidden == 0 {
            return Err(Error::Config("hidden dim must be positive".into()));
        }
        let dims = layer_dims(d_in, &config);
        let mut rng = Rng::new(config.seed);
        let scales = (0..n_scales)
            .map(|_| {
                let mut r = rng.fork();
                (0..config.gamma)
                    .map(|l| {
                        CdgcLayer::glorot(dims[l], dims[l + 1], config.tied, config.alpha, activation_for(l, config.gamma), &mut r)
                            .map(|layer| layer.with_norm(config.norm))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let stack = Self { config, scales };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, layers) in self.scales.iter().enumerate() {
            if layers.is_empty() {
                return Err(Error::Config(format!("scale {k} has no layers")));
            }
            for (l, pair) in layers.windows(2).enumerate() {
                if pair[0].dims().1 != pair[1].dims().0 {
                    return Err(Error::dim(format!(
                        "scale {k}: layer {} outputs {} features but layer {} takes {}",
                        l,
                        pair[0].dims().1,
                        l + 1,
                        pair[1].dims().0
                    )));
                }
            }
            for (l, layer) in layers.iter().enumerate() {
                layer
                    .validate()
                    .map_err(|e| Error::Config(format!("scale {k}, layer {l}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Flat weight blob: one JSON header line, then every weight entry as
    /// little-endian f64 in scale, layer, block, row-major order.
    pub fn to_blob(&self) -> Vec<u8> {
        let d_in = self.scales.first().map_or(0, |l| l[0].dims().0);
        let header = BlobHeader {
            dims: layer_dims(d_in, &self.config),
            alpha: self.config.alpha,
            gamma: self.config.gamma,
            seed: self.config.seed,
            scales: self.scales.len(),
            tied: self.config.tied,
            norm: self.config.norm,
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for layer in self.scales.iter().flatten() {
            for w in layer.weights.blocks() {
                for v in w.as_slice() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("weight blob has no header line".into()))?;
        let h: BlobHeader = serde_json::from_slice(&bytes[..nl])?;
        if h.dims.len() != h.gamma + 1 {
            return Err(Error::Format("header dims do not match gamma".into()));
        }
        let hidden = *h.dims.last().unwrap();
        let config = StackConfig {
            gamma: h.gamma,
            alpha: h.alpha,
            hidden,
            tied: h.tied,
            norm: h.norm,
            seed: h.seed,
        };
        let mut values = bytes[nl + 1..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        if !bytes[nl + 1..].len().is_multiple_of(8) {
            return Err(Error::Format("weight payload is not a whole number of f64".into()));
        }
        let mut take = |r: usize, c: usize| -> Result<DenseMat> {
            let data: Vec<f64> = values.by_ref().take(r * c).collect();
            if data.len() != r * c {
                return Err(Error::Format("weight payload truncated".into()));
            }
            DenseMat::from_vec(r, c, data)
        };
        let mut scales = Vec::with_capacity(h.scales);
        for _ in 0..h.scales {
            let mut layers = Vec::with_capacity(h.gamma);
            for l in 0..h.gamma {
                let (r, c) = (h.dims[l], h.dims[l + 1]);
                let weights = if h.tied {
                    SubsetWeights::Tied(take(r, c)?)
                } else {
                    SubsetWeights::Untied([take(r, c)?, take(r, c)?, take(r, c)?])
                };
                layers.push(CdgcLayer::new(weights, h.alpha, activation_for(l, h.gamma))?.with_norm(h.norm));
            }
            scales.push(layers);
        }
        if values.next().is_some() {
            return Err(Error::Format("trailing data after weights".into()));
        }
        let stack = Self { config, scales };
        stack.validate()?;
        Ok(stack)
    }
}

fn layer_dims(d_in: usize, cfg: &StackConfig) -> Vec<usize> {
    std::iter::once(d_in).chain(std::iter::repeat_n(cfg.hidden, cfg.gamma)).collect()
}

fn activation_for(layer: usize, gamma: usize) -> Activation {
    if layer + 1 < gamma {
        Activation::Rectifier
    } else {
        Activation::None
    }
}

/// Embeds every scale: project pixel appearance onto the scale's nodes,
/// then run that scale's layers over its normalized adjacency.
pub fn stack_forward(h: &ScaleHierarchy, fm: &PixelFeatureMap, assoc: &NodeAssociation, stack: &MdgcnStack) -> Result<Vec<DenseMat>> {
    if stack.scales.len() != h.k() {
        return Err(Error::dim(format!(
            "stack has {} scales, hierarchy {}",
            stack.scales.len(),
            h.k()
        )));
    }
    stack.validate()?;
    (0..h.k())
        .into_par_iter()
        .map(|k| {
            let g = &h.scales[k];
            let a = coarsen_association(assoc, h, k)?;
            let mut x = project_pixels_to_nodes(fm, &a)?;
            let pmap = partition(g);
            let prop = Propagation::new(g, &pmap, stack.config.norm)?;
            for (l, layer) in stack.scales[k].iter().enumerate() {
                x = forward(&prop, layer, &x).map_err(|e| match e {
                    Error::Dimension(m) => Error::Dimension(format!("scale {k}, layer {l}: {m}")),
                    other => other,
                })?;
            }
            Ok(x)
        })
        .collect()
}

/// CSV with header `node,scale,v0,...`; values use the shortest exact
/// decimal form.
pub fn embeddings_csv(per_scale: &[DenseMat]) -> String {
    let d = per_scale.iter().map(|m| m.cols()).max().unwrap_or(0);
    let mut out = String::from("node,scale");
    for c in 0..d {
        let _ = write!(out, ",v{c}");
    }
    out.push('\n');
    for (k, m) in per_scale.iter().enumerate() {
        for (i, row) in m.iter_rows().enumerate() {
            let _ = write!(out, "{i},{k}");
            for v in row {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_round_trip() {
        for tied in [true, false] {
            let cfg = StackConfig {
                hidden: 4,
                tied,
                seed: 9,
                ..Default::default()
            };
            let s = MdgcnStack::init(2, 3, cfg).unwrap();
            let back = MdgcnStack::from_blob(&s.to_blob()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn blob_rejects_truncation() {
        let s = MdgcnStack::init(1, 2, StackConfig { hidden: 2, ..Default::default() }).unwrap();
        let b = s.to_blob();
        assert!(MdgcnStack::from_blob(&b[..b.len() - 8]).is_err());
        assert!(MdgcnStack::from_blob(b"no header").is_err());
    }

    #[test]
    fn activations_by_depth() {
        let s = MdgcnStack::init(1, 2, StackConfig { hidden: 2, gamma: 3, ..Default::default() }).unwrap();
        let acts: Vec<_> = s.scales[0].iter().map(|l| l.activation).collect();
        assert_eq!(acts, [Activation::Rectifier, Activation::Rectifier, Activation::None]);
    }

    #[test]
    fn zero_gamma_is_config_error() {
        let cfg = StackConfig { gamma: 0, ..Default::default() };
        assert!(matches!(MdgcnStack::init(1, 2, cfg), Err(Error::Config(_))));
    }

    #[test]
    fn csv_layout() {
        let m = DenseMat::from_rows(&[vec![0.5, -1.0]]).unwrap();
        assert_eq!(embeddings_csv(&[m]), "node,scale,v0,v1\n0,0,0.5,-1.0\n");
    }
}
