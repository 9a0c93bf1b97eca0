use super::assoc::SoftAssociation;
use super::centers::Centers;
use crate::error::{Error, Result};
use crate::imageio::PixelFeatureMap;

fn check(fm: &PixelFeatureMap, q: &SoftAssociation, centers: &Centers) -> Result<()> {
    q.check_against(fm)?;
    if centers.len() != q.n_superpixels() || centers.u.cols() + 2 != fm.dim() {
        return Err(Error::dim("centers do not match association/features"));
    }
    Ok(())
}

/// Mean over pixels of `‖û_p − x_p‖²`, where `û_p` mixes the candidate
/// appearance centers with the row-normalized association.
///
/// Only the appearance dims are reconstructed; spatial spread is measured
/// by [`compactness_loss`].
pub fn reconstruction_loss(fm: &PixelFeatureMap, q: &SoftAssociation, centers: &Centers) -> Result<f64> {
    check(fm, q, centers)?;
    let d = centers.u.cols();
    let mut total = 0.0;
    let mut recon = vec![0.0; d];
    for p in 0..fm.n_pixels() {
        recon.iter_mut().for_each(|v| *v = 0.0);
        let row = q.row_normalized(p);
        for (k, w) in row.iter().enumerate() {
            let Some(s) = q.candidate(p, k) else { continue };
            if *w == 0.0 {
                continue;
            }
            for (v, &c) in recon.iter_mut().zip(centers.u.row(s)) {
                *v += w * c;
            }
        }
        total += recon
            .iter()
            .zip(fm.appearance(p))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / fm.n_pixels() as f64)
}

/// `Σ_p Σ_{s ∈ M_p} ‖r_s − y_p‖₂ / (H·W·9)` over in-grid candidates with a
/// center (superpixels with no mass and no reseed have no location).
pub fn compactness_loss(fm: &PixelFeatureMap, q: &SoftAssociation, centers: &Centers) -> Result<f64> {
    check(fm, q, centers)?;
    let mut total = 0.0;
    for p in 0..fm.n_pixels() {
        let y = fm.position(p);
        for (s, _) in q.entries(p) {
            if !centers.active[s] {
                continue;
            }
            let r = centers.r.row(s);
            total += ((r[0] - y[0]).powi(2) + (r[1] - y[1]).powi(2)).sqrt();
        }
    }
    Ok(total / (fm.n_pixels() * super::CANDIDATES) as f64)
}
