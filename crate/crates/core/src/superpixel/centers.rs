use super::assoc::SoftAssociation;
use crate::error::Result;
use crate::imageio::PixelFeatureMap;
use crate::numerics::DenseMat;

/// Superpixel centers: appearance `u_s` (N × D), location `r_s` (N × 2),
/// and the soft mass `Σ_p q_p(s)` behind each one.
#[derive(Clone, Debug, PartialEq)]
pub struct Centers {
    pub u: DenseMat,
    pub r: DenseMat,
    pub mass: Vec<f64>,
    /// Centers that may take part in the next association update. A center
    /// with zero mass is inactive unless it has been reseeded.
    pub active: Vec<bool>,
}

impl Centers {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Ids of superpixels that received no mass.
    pub fn empty_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&s| self.mass[s] == 0.0).collect()
    }

    /// Full `(u_s, r_s)` vector of width D+2.
    pub fn full(&self, s: usize) -> Vec<f64> {
        let mut v = self.u.row(s).to_vec();
        v.extend_from_slice(self.r.row(s));
        v
    }

    /// Sets center `s` to a full D+2 feature vector and marks it active.
    pub fn reseed(&mut self, s: usize, full: &[f64]) {
        let d = self.u.cols();
        self.u.row_mut(s).copy_from_slice(&full[..d]);
        self.r.row_mut(s).copy_from_slice(&full[d..]);
        self.active[s] = true;
    }
}

/// Weighted means `u_s = Σ x·q / Σ q`, `r_s = Σ y·q / Σ q`, accumulated
/// per superpixel in row-major pixel order.
///
/// Superpixels with zero total mass keep zero vectors and are reported
/// through [`Centers::empty_ids`].
pub fn compute_centers(fm: &PixelFeatureMap, q: &SoftAssociation) -> Result<Centers> {
    q.check_against(fm)?;
    let n = q.n_superpixels();
    let dim = fm.dim();
    let mut acc = vec![0.0; n * dim];
    let mut mass = vec![0.0; n];
    for p in 0..fm.n_pixels() {
        let feat = fm.pixel(p);
        for (s, w) in q.entries(p) {
            if w == 0.0 {
                continue;
            }
            mass[s] += w;
            for (a, &f) in acc[s * dim..(s + 1) * dim].iter_mut().zip(feat) {
                *a += w * f;
            }
        }
    }
    Ok(split_centers(acc, mass, dim))
}

/// Matrix route `Q̂ᵀ δ` with `Q̂` the column-normalized association.
///
/// Each column is normalized before it is applied, so the arithmetic differs
/// from [`compute_centers`] even though the two agree mathematically.
pub fn compute_centers_matrix(fm: &PixelFeatureMap, q: &SoftAssociation) -> Result<Centers> {
    q.check_against(fm)?;
    let n = q.n_superpixels();
    let dim = fm.dim();
    // sparse columns of Q: (pixel, q) per superpixel
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for p in 0..fm.n_pixels() {
        for (s, w) in q.entries(p) {
            if w != 0.0 {
                columns[s].push((p, w));
            }
        }
    }
    let mut out = vec![0.0; n * dim];
    let mut mass = vec![0.0; n];
    for (s, col) in columns.iter().enumerate() {
        let col_sum: f64 = col.iter().map(|&(_, w)| w).sum();
        mass[s] = col_sum;
        if col_sum == 0.0 {
            continue;
        }
        let row = &mut out[s * dim..(s + 1) * dim];
        for &(p, w) in col {
            let q_hat = w / col_sum;
            for (o, &f) in row.iter_mut().zip(fm.pixel(p)) {
                *o += q_hat * f;
            }
        }
    }
    let mut centers = split_centers(out, vec![1.0; n], dim);
    centers.active = mass.iter().map(|&m| m > 0.0).collect();
    centers.mass = mass;
    Ok(centers)
}

fn split_centers(acc: Vec<f64>, mass: Vec<f64>, dim: usize) -> Centers {
    let n = mass.len();
    let d = dim - 2;
    let mut u = DenseMat::zeros(n, d);
    let mut r = DenseMat::zeros(n, 2);
    for s in 0..n {
        if mass[s] == 0.0 {
            continue;
        }
        let row = &acc[s * dim..(s + 1) * dim];
        for (dst, &v) in u.row_mut(s).iter_mut().zip(&row[..d]) {
            *dst = v / mass[s];
        }
        for (dst, &v) in r.row_mut(s).iter_mut().zip(&row[d..]) {
            *dst = v / mass[s];
        }
    }
    let active = mass.iter().map(|&m| m > 0.0).collect();
    Centers { u, r, mass, active }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::PixelFeatureMap;

    fn constant_fm(w: usize, h: usize, v: [f64; 3]) -> PixelFeatureMap {
        let app: Vec<f64> = (0..w * h).flat_map(|_| v).collect();
        PixelFeatureMap::from_appearance(w, h, 3, &app, 1.0).unwrap()
    }

    #[test]
    fn constant_image_centers() {
        let fm = constant_fm(6, 4, [10.0, -3.0, 2.5]);
        let q = SoftAssociation::hard_grid(6, 4, 3, 2).unwrap();
        let c = compute_centers(&fm, &q).unwrap();
        for s in 0..6 {
            assert_eq!(c.u.row(s), &[10.0, -3.0, 2.5]);
        }
    }

    #[test]
    fn quadrant_centroids() {
        let fm = constant_fm(4, 4, [0.0; 3]);
        let q = SoftAssociation::hard_grid(4, 4, 2, 2).unwrap();
        let c = compute_centers(&fm, &q).unwrap();
        assert_eq!(c.r.row(0), &[0.5, 0.5]);
        assert_eq!(c.r.row(1), &[0.5, 2.5]);
        assert_eq!(c.r.row(2), &[2.5, 0.5]);
        assert_eq!(c.r.row(3), &[2.5, 2.5]);
        assert_eq!(c.mass, vec![4.0; 4]);
    }

    #[test]
    fn split_pixel_mass_cancels() {
        // one pixel of a 2x1 image split evenly; the other pixel stays hard
        let app = vec![7.0, 8.0, 9.0, 7.0, 8.0, 9.0];
        let fm = PixelFeatureMap::from_appearance(2, 1, 3, &app, 0.0).unwrap();
        let mut half = [0.0; 9];
        half[4] = 0.5;
        half[5] = 0.5;
        let mut left = [0.0; 9];
        left[3] = 0.5;
        left[4] = 0.5;
        let q = SoftAssociation::from_probs(2, 1, 2, 1, vec![half, left]).unwrap();
        let c = compute_centers(&fm, &q).unwrap();
        assert_eq!(c.full(0), vec![7.0, 8.0, 9.0, 0.0, 0.0]);
        assert_eq!(c.full(1), vec![7.0, 8.0, 9.0, 0.0, 0.0]);
    }
}
