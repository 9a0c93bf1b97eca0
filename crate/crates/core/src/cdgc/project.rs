use crate::error::{Error, Result};
use crate::hierarchy::NodeAssociation;
use crate::imageio::PixelFeatureMap;
use crate::numerics::DenseMat;

fn check(fm: &PixelFeatureMap, assoc: &NodeAssociation) -> Result<()> {
    if fm.width() != assoc.width() || fm.height() != assoc.height() {
        return Err(Error::dim(format!(
            "feature map {}x{} vs association {}x{}",
            fm.width(),
            fm.height(),
            assoc.width(),
            assoc.height()
        )));
    }
    Ok(())
}

/// Node appearance features `Q̂ᵀ x`: each node column of the association is
/// normalized to unit mass, then applied to the pixel appearances.
pub fn project_pixels_to_nodes(fm: &PixelFeatureMap, assoc: &NodeAssociation) -> Result<DenseMat> {
    check(fm, assoc)?;
    let mass = assoc.column_mass();
    if let Some(node) = mass.iter().position(|&m| m <= 0.0) {
        return Err(Error::invalid(format!("node {node} receives no association mass")));
    }
    let d = fm.appearance_dim();
    let mut out = DenseMat::zeros(assoc.n_nodes(), d);
    for p in 0..fm.n_pixels() {
        let x = fm.appearance(p);
        for &(node, q) in assoc.row(p) {
            let w = q / mass[node];
            for (o, &v) in out.row_mut(node).iter_mut().zip(x) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

/// Pixel-side smoothing `Q̃ Q̂ᵀ x`: every pixel takes the row-normalized
/// mix of its nodes' projected features.
pub fn smooth_pixels(fm: &PixelFeatureMap, assoc: &NodeAssociation) -> Result<DenseMat> {
    let nodes = project_pixels_to_nodes(fm, assoc)?;
    let mut out = DenseMat::zeros(fm.n_pixels(), nodes.cols());
    for p in 0..fm.n_pixels() {
        let row = assoc.row(p);
        let total: f64 = row.iter().map(|e| e.1).sum();
        for &(node, q) in row {
            for (o, &v) in out.row_mut(p).iter_mut().zip(nodes.row(node)) {
                *o += q / total * v;
            }
        }
    }
    Ok(out)
}
