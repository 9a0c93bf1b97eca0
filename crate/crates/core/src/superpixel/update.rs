use rayon::prelude::*;

use super::assoc::{SoftAssociation, CANDIDATES};
use super::centers::Centers;
use crate::error::{Error, Result};
use crate::imageio::PixelFeatureMap;

/// Reassigns each pixel over its 9 candidates with
/// `softmax(−‖δ_p − (u_s, r_s)‖² / temperature)`.
///
/// Off-grid and inactive candidates get probability 0. If every candidate of
/// a pixel is inactive the pixel falls back to its home cell.
pub fn update_association(
    fm: &PixelFeatureMap,
    centers: &Centers,
    q: &SoftAssociation,
    temperature: f64,
) -> Result<SoftAssociation> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    q.check_against(fm)?;
    if centers.len() != q.n_superpixels() {
        return Err(Error::dim(format!(
            "{} centers for {} superpixels",
            centers.len(),
            q.n_superpixels()
        )));
    }
    let full: Vec<Vec<f64>> = (0..centers.len()).map(|s| centers.full(s)).collect();
    let mut next = q.clone();
    next.probs_mut()
        .par_iter_mut()
        .enumerate()
        .for_each(|(p, row)| *row = pixel_probs(fm.pixel(p), q, p, &full, &centers.active, temperature));
    Ok(next)
}

fn pixel_probs(
    feat: &[f64],
    q: &SoftAssociation,
    p: usize,
    centers: &[Vec<f64>],
    active: &[bool],
    temperature: f64,
) -> [f64; CANDIDATES] {
    let mut logits = [f64::NEG_INFINITY; CANDIDATES];
    for (k, logit) in logits.iter_mut().enumerate() {
        if let Some(s) = q.candidate(p, k) {
            if active[s] {
                let d2: f64 = feat
                    .iter()
                    .zip(&centers[s])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                *logit = -d2 / temperature;
            }
        }
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; CANDIDATES];
    if max == f64::NEG_INFINITY {
        out[CANDIDATES / 2] = 1.0;
        return out;
    }
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(&logits) {
        if l > f64::NEG_INFINITY {
            *o = (l - max).exp();
            sum += *o;
        }
    }
    out.iter_mut().for_each(|o| *o /= sum);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMat;

    fn centers_from(full: &[Vec<f64>]) -> Centers {
        let d = full[0].len() - 2;
        Centers {
            u: DenseMat::from_rows(&full.iter().map(|v| v[..d].to_vec()).collect::<Vec<_>>()).unwrap(),
            r: DenseMat::from_rows(&full.iter().map(|v| v[d..].to_vec()).collect::<Vec<_>>()).unwrap(),
            mass: vec![1.0; full.len()],
            active: vec![true; full.len()],
        }
    }

    #[test]
    fn two_candidates_softmax() {
        // pixel 0 of a 2x1 image (positions scaled to 0): only cells 0 and 1 exist
        let fm = PixelFeatureMap::from_appearance(2, 1, 1, &[0.0, 0.0], 0.0).unwrap();
        let q = SoftAssociation::hard_grid(2, 1, 2, 1).unwrap();
        let c = centers_from(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        let next = update_association(&fm, &c, &q, 1.0).unwrap();
        let row = next.probs(0);
        let e = (-1f64).exp();
        assert!((row[4] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((row[5] - e / (1.0 + e)).abs() < 1e-15);
        assert!((row[4] - 0.7311).abs() < 1e-4 && (row[5] - 0.2689).abs() < 1e-4);
        assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 7);
    }

    #[test]
    fn equidistant_is_uniform() {
        // center pixel of a 3x3 image with a 3x3 grid sees all 9 cells;
        // all centers placed at the same distance in appearance space
        let fm = PixelFeatureMap::from_appearance(3, 3, 1, &[0.0; 9], 0.0).unwrap();
        let q = SoftAssociation::hard_grid(3, 3, 3, 3).unwrap();
        let c = centers_from(&vec![vec![2.0, 0.0, 0.0]; 9]);
        let next = update_association(&fm, &c, &q, 1.0).unwrap();
        for &v in next.probs(4) {
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn saturates_on_distant_candidates() {
        let fm = PixelFeatureMap::from_appearance(2, 1, 1, &[0.0, 0.0], 0.0).unwrap();
        let q = SoftAssociation::hard_grid(2, 1, 2, 1).unwrap();
        let c = centers_from(&[vec![0.0, 0.0, 0.0], vec![1e3, 0.0, 0.0]]);
        let next = update_association(&fm, &c, &q, 1.0).unwrap();
        assert!(next.probs(0)[4] > 1.0 - 1e-6);
    }

    #[test]
    fn rejects_bad_temperature() {
        let fm = PixelFeatureMap::from_appearance(1, 1, 1, &[0.0], 0.0).unwrap();
        let q = SoftAssociation::hard_grid(1, 1, 1, 1).unwrap();
        let c = centers_from(&[vec![0.0, 0.0, 0.0]]);
        assert!(update_association(&fm, &c, &q, 0.0).is_err());
        assert!(update_association(&fm, &c, &q, f64::NAN).is_err());
    }
}
