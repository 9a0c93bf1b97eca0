use super::pnm::Image;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Paints each label a seeded pseudo-random color and halves the intensity
/// of pixels whose 4-neighborhood contains another label.
pub fn render_labels(labels: &[usize], width: usize, height: usize, seed: u64) -> Result<Image> {
    if labels.len() != width * height {
        return Err(Error::dim("label field does not cover the image"));
    }
    let n = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = Rng::new(seed);
    // keep colors away from black so darkened boundaries stay visible
    let palette: Vec<[u8; 3]> = (0..n)
        .map(|_| [0; 3].map(|_: u8| 64 + rng.below(192) as u8))
        .collect();
    let at = |i: usize, j: usize| labels[i * width + j];
    Ok(Image::from_fn_rgb(width, height, |i, j| {
        let l = at(i, j);
        let boundary = (i > 0 && at(i - 1, j) != l)
            || (i + 1 < height && at(i + 1, j) != l)
            || (j > 0 && at(i, j - 1) != l)
            || (j + 1 < width && at(i, j + 1) != l);
        let c = palette[l];
        if boundary {
            c.map(|v| v / 2)
        } else {
            c
        }
    }))
}
