use serde::{Deserialize, Serialize};

use super::assoc::SoftAssociation;
use super::centers::{compute_centers, Centers};
use super::loss::{compactness_loss, reconstruction_loss};
use super::map::SuperpixelMap;
use super::update::update_association;
use crate::error::{Error, Result};
use crate::imageio::PixelFeatureMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub grid_w: usize,
    pub grid_h: usize,
    pub iterations: usize,
    /// Softmax temperature of the association update, in feature units.
    pub temperature: f64,
    /// Weight of the compactness loss in the reported total.
    pub lambda_compact: f64,
    /// Overrides the feature map's positional scale when set.
    #[serde(default)]
    pub pos_scale: Option<f64>,
}

impl ClusterConfig {
    pub fn new(grid_w: usize, grid_h: usize, iterations: usize) -> Self {
        Self {
            grid_w,
            grid_h,
            iterations,
            temperature: 1.0,
            lambda_compact: 0.1,
            pos_scale: None,
        }
    }

    pub fn validate(&self, fm: &PixelFeatureMap) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.grid_w == 0 || self.grid_h == 0 {
            return Err(Error::invalid("grid dimensions must be at least 1"));
        }
        if self.grid_w > fm.width() || self.grid_h > fm.height() {
            return Err(Error::invalid(format!(
                "grid {}x{} larger than image {}x{}",
                self.grid_w,
                self.grid_h,
                fm.width(),
                fm.height()
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!("temperature {}", self.temperature)));
        }
        if !(self.lambda_compact >= 0.0 && self.lambda_compact.is_finite()) {
            return Err(Error::invalid(format!("lambda_compact {}", self.lambda_compact)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub reconstruction: f64,
    pub compactness: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct ClusterOutput {
    pub association: SoftAssociation,
    pub centers: Centers,
    pub map: SuperpixelMap,
    pub trace: Vec<LossRecord>,
}

/// Grid initialization: hard association on each pixel's home cell and the
/// centers it induces.
pub fn init_grid(fm: &PixelFeatureMap, cfg: &ClusterConfig) -> Result<(SoftAssociation, Centers)> {
    cfg.validate(fm)?;
    let q = SoftAssociation::hard_grid(fm.width(), fm.height(), cfg.grid_w, cfg.grid_h)?;
    let centers = compute_centers(fm, &q)?;
    Ok((q, centers))
}

/// Alternates center computation and association updates.
///
/// Each round computes centers from the current association, records the
/// losses, then updates the association. Superpixels that lose all mass
/// before the last round are reseeded; after the last update, hard labels
/// are taken by argmax and empty superpixels are dropped by compaction.
pub fn cluster(fm: &PixelFeatureMap, cfg: &ClusterConfig) -> Result<ClusterOutput> {
    let rescaled;
    let fm = match cfg.pos_scale {
        Some(s) if s != fm.pos_scale() => {
            rescaled = fm.with_pos_scale(s)?;
            &rescaled
        }
        _ => fm,
    };
    let (mut q, _) = init_grid(fm, cfg)?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let mut centers = compute_centers(fm, &q)?;
        if t + 1 < cfg.iterations {
            reseed_empty(fm, &q, &mut centers);
        }
        let rec = reconstruction_loss(fm, &q, &centers)?;
        let compact = compactness_loss(fm, &q, &centers)?;
        trace.push(LossRecord {
            iteration: t,
            reconstruction: rec,
            compactness: compact,
            total: rec + cfg.lambda_compact * compact,
        });
        log::debug!("iteration {t}: rec {rec:.6} compact {compact:.6}");
        q = update_association(fm, &centers, &q, cfg.temperature)?;
    }
    let centers = compute_centers(fm, &q)?;
    let map = SuperpixelMap::from_labels(fm, &q.hard_labels())?;
    Ok(ClusterOutput {
        association: q,
        centers,
        map,
        trace,
    })
}

/// Moves each empty center onto the pixel of the largest superpixel that is
/// farthest from that superpixel's center.
fn reseed_empty(fm: &PixelFeatureMap, q: &SoftAssociation, centers: &mut Centers) {
    let empty = centers.empty_ids();
    if empty.is_empty() {
        return;
    }
    let labels = q.hard_labels();
    for s in empty {
        let Some(largest) = (0..centers.len())
            .filter(|&t| centers.mass[t] > 0.0)
            .max_by(|&a, &b| centers.mass[a].total_cmp(&centers.mass[b]).then(b.cmp(&a)))
        else {
            return;
        };
        let c = centers.full(largest);
        let far = (0..fm.n_pixels())
            .filter(|&p| labels[p] == largest)
            .map(|p| {
                let d: f64 = fm.pixel(p).iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                (p, d)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((p, _)) = far {
            centers.reseed(s, fm.pixel(p));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMat;

    #[test]
    fn grid_partition_sizes() {
        let fm = PixelFeatureMap::from_appearance(5, 4, 1, &[0.0; 20], 1.0).unwrap();
        let (q, c) = init_grid(&fm, &ClusterConfig::new(2, 2, 1)).unwrap();
        assert_eq!(c.mass, vec![6.0, 4.0, 6.0, 4.0]);
        // columns 0..3 | 3..5
        assert_eq!(q.home_cell(2), 0);
        assert_eq!(q.home_cell(3), 1);
    }

    #[test]
    fn single_pixel_grid() {
        let fm = PixelFeatureMap::from_appearance(1, 1, 1, &[4.0], 1.0).unwrap();
        let out = cluster(&fm, &ClusterConfig::new(1, 1, 2)).unwrap();
        assert_eq!(out.map.n_superpixels, 1);
        assert_eq!(out.map.labels, vec![0]);
        assert_eq!(out.trace.len(), 2);
    }

    #[test]
    fn config_validation() {
        let fm = PixelFeatureMap::from_appearance(2, 2, 1, &[0.0; 4], 1.0).unwrap();
        assert!(init_grid(&fm, &ClusterConfig::new(3, 1, 1)).is_err());
        assert!(init_grid(&fm, &ClusterConfig::new(1, 1, 0)).is_err());
        let mut cfg = ClusterConfig::new(1, 1, 1);
        cfg.temperature = -1.0;
        assert!(cluster(&fm, &cfg).is_err());
    }

    #[test]
    fn reseed_uses_farthest_pixel_of_largest() {
        let app = [0.0, 0.0, 0.0, 9.0];
        let fm = PixelFeatureMap::from_appearance(4, 1, 1, &app, 0.0).unwrap();
        let mut centers = Centers {
            u: DenseMat::from_vec(2, 1, vec![0.0, 3.0]).unwrap(),
            r: DenseMat::zeros(2, 2),
            mass: vec![0.0, 4.0],
            active: vec![false, true],
        };
        // every pixel's argmax is cell 1 once cell 0 has no mass
        let mut probs = vec![[0.0; 9]; 4];
        probs[0][5] = 1.0;
        probs[1][5] = 1.0;
        probs[2][4] = 1.0;
        probs[3][4] = 1.0;
        let q = SoftAssociation::from_probs(4, 1, 2, 1, probs).unwrap();
        reseed_empty(&fm, &q, &mut centers);
        assert!(centers.active[0]);
        assert_eq!(centers.u.row(0), &[9.0]);
    }
}
