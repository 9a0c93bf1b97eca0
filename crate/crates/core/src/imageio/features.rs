use serde::{Deserialize, Serialize};

use super::pnm::Image;
use crate::error::{Error, Result};

/// Per-pixel feature vectors: `dim − 2` appearance features followed by the
/// scaled position `(row · pos_scale, col · pos_scale)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelFeatureMap {
    width: usize,
    height: usize,
    dim: usize,
    pos_scale: f64,
    data: Vec<f64>,
}

impl PixelFeatureMap {
    /// Appends positional dims to appearance features given per pixel in
    /// row-major order.
    pub fn from_appearance(
        width: usize,
        height: usize,
        appearance_dim: usize,
        appearance: &[f64],
        pos_scale: f64,
    ) -> Result<Self> {
        if appearance_dim == 0 {
            return Err(Error::invalid("at least one appearance feature is required"));
        }
        if appearance.len() != width * height * appearance_dim {
            return Err(Error::dim("appearance length does not match raster"));
        }
        if !(pos_scale.is_finite() && pos_scale >= 0.0) {
            return Err(Error::invalid(format!("pos_scale {pos_scale}")));
        }
        if appearance.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pixel feature".into()));
        }
        let dim = appearance_dim + 2;
        let mut data = Vec::with_capacity(width * height * dim);
        for (p, feat) in appearance.chunks_exact(appearance_dim).enumerate() {
            data.extend_from_slice(feat);
            data.push((p / width) as f64 * pos_scale);
            data.push((p % width) as f64 * pos_scale);
        }
        Ok(Self {
            width,
            height,
            dim,
            pos_scale,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Full vector width, appearance plus 2 positional dims.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn appearance_dim(&self) -> usize {
        self.dim - 2
    }

    pub fn pos_scale(&self) -> f64 {
        self.pos_scale
    }

    /// Full feature vector of pixel index `p` (row-major).
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.dim..(p + 1) * self.dim]
    }

    pub fn appearance(&self, p: usize) -> &[f64] {
        &self.pixel(p)[..self.dim - 2]
    }

    pub fn position(&self, p: usize) -> &[f64] {
        &self.pixel(p)[self.dim - 2..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Same appearance with the positional dims rescaled.
    pub fn with_pos_scale(&self, pos_scale: f64) -> Result<Self> {
        let d = self.appearance_dim();
        let appearance: Vec<f64> = (0..self.n_pixels())
            .flat_map(|p| self.appearance(p).iter().copied())
            .collect();
        Self::from_appearance(self.width, self.height, d, &appearance, pos_scale)
    }
}

/// SLIC-style compactness scale `m / sqrt(H·W / N)`.
pub fn default_pos_scale(width: usize, height: usize, n_superpixels: usize, m: f64) -> f64 {
    let step = ((width * height) as f64 / n_superpixels.max(1) as f64).sqrt();
    m / step
}

const WHITE: [f64; 3] = [
    0.412_456_4 + 0.357_576_1 + 0.180_437_5,
    0.212_672_9 + 0.715_152_2 + 0.072_175_0,
    0.019_333_9 + 0.119_192_0 + 0.950_304_1,
];

fn srgb_to_linear(v: u8) -> f64 {
    let c = v as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) to CIELAB `[L*, a*, b*]`.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn lab_planes(img: &Image) -> Result<Vec<[f64; 3]>> {
    if img.channels() != 3 {
        return Err(Error::invalid(
            "CIELAB conversion needs an RGB image; use to_gray_features for grayscale",
        ));
    }
    Ok(img
        .data()
        .chunks_exact(3)
        .map(|p| srgb_to_lab([p[0], p[1], p[2]]))
        .collect())
}

/// CIELAB features (D = 3) with scaled positions appended.
pub fn to_lab(img: &Image, pos_scale: f64) -> Result<PixelFeatureMap> {
    let lab: Vec<f64> = lab_planes(img)?.into_iter().flatten().collect();
    PixelFeatureMap::from_appearance(img.width(), img.height(), 3, &lab, pos_scale)
}

/// Gray intensity on the L* scale (D = 1), for single-channel images.
pub fn to_gray_features(img: &Image, pos_scale: f64) -> Result<PixelFeatureMap> {
    if img.channels() != 1 {
        return Err(Error::invalid("to_gray_features needs a single-channel image"));
    }
    let l: Vec<f64> = img
        .data()
        .iter()
        .map(|&v| srgb_to_lab([v, v, v])[0])
        .collect();
    PixelFeatureMap::from_appearance(img.width(), img.height(), 1, &l, pos_scale)
}

/// Square odd-sized filter kernel, applied as a correlation.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) || weights.len() != size * size {
            return Err(Error::invalid("kernel must be odd-sized and square"));
        }
        Ok(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weight(&self, di: usize, dj: usize) -> f64 {
        self.weights[di * self.size + dj]
    }

    /// Horizontal-gradient Sobel, scaled by 1/8.
    pub fn sobel_x() -> Self {
        let w = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
        Self {
            size: 3,
            weights: w.iter().map(|v| v / 8.0).collect(),
        }
    }

    /// Vertical-gradient Sobel, scaled by 1/8.
    pub fn sobel_y() -> Self {
        let w = [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];
        Self {
            size: 3,
            weights: w.iter().map(|v| v / 8.0).collect(),
        }
    }
}

/// Reflects an out-of-range index back into `0..n` (edge sample repeated).
fn reflect(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = idx;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Correlates one plane with a kernel, reflecting at the borders.
pub fn filter_plane(plane: &[f64], width: usize, height: usize, k: &Kernel) -> Result<Vec<f64>> {
    if k.size() > width || k.size() > height {
        return Err(Error::invalid(format!(
            "{0}x{0} kernel larger than {width}x{height} image",
            k.size()
        )));
    }
    let r = (k.size() / 2) as isize;
    let k_sum: f64 = k.weights.iter().sum();
    let mut out = vec![0.0; width * height];
    for i in 0..height {
        for j in 0..width {
            // offsets from the center sample keep flat regions exactly flat
            let c = plane[i * width + j];
            let mut acc = 0.0;
            for di in -r..=r {
                let si = reflect(i as isize + di, height);
                for dj in -r..=r {
                    let sj = reflect(j as isize + dj, width);
                    acc += k.weight((di + r) as usize, (dj + r) as usize) * (plane[si * width + sj] - c);
                }
            }
            out[i * width + j] = acc + k_sum * c;
        }
    }
    Ok(out)
}

/// Lab channels plus one filter response on L* per kernel.
/// Gray images use their L* as all three Lab channels' stand-in (L*, 0, 0).
pub fn filter_bank_features(img: &Image, kernels: &[Kernel], pos_scale: f64) -> Result<PixelFeatureMap> {
    let lab = lab_planes(&img.to_rgb())?;
    let (w, h) = (img.width(), img.height());
    let l: Vec<f64> = lab.iter().map(|p| p[0]).collect();
    let responses = kernels
        .iter()
        .map(|k| filter_plane(&l, w, h, k))
        .collect::<Result<Vec<_>>>()?;
    let d = 3 + kernels.len();
    let mut appearance = Vec::with_capacity(w * h * d);
    for (p, px) in lab.iter().enumerate() {
        appearance.extend_from_slice(px);
        appearance.extend(responses.iter().map(|r| r[p]));
    }
    PixelFeatureMap::from_appearance(w, h, d, &appearance, pos_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn rgb(w: usize, h: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Image {
        Image::from_fn_rgb(w, h, f)
    }

    #[test]
    fn lab_reference_colors() {
        let white = srgb_to_lab([255, 255, 255]);
        assert!((white[0] - 100.0).abs() < 1e-6);
        assert!(white[1].abs() < 0.01 && white[2].abs() < 0.01);

        let black = srgb_to_lab([0, 0, 0]);
        assert!(black.iter().all(|v| v.abs() < 1e-6));

        let red = srgb_to_lab([255, 0, 0]);
        for (v, e) in red.iter().zip([53.24, 80.09, 67.20]) {
            assert!((v - e).abs() < 0.1, "{red:?}");
        }
    }

    #[test]
    fn lab_rejects_gray() {
        let img = Image::new(1, 1, 1, vec![5]).unwrap();
        assert!(to_lab(&img, 1.0).is_err());
        assert_eq!(to_gray_features(&img, 1.0).unwrap().dim(), 3);
    }

    #[test]
    fn positions_are_scaled() {
        let fm = to_lab(&rgb(3, 2, |_, _| [0, 0, 0]), 0.5).unwrap();
        assert_eq!(fm.dim(), 5);
        assert_eq!(fm.position(5), &[0.5, 1.0]);
        assert_eq!(fm.position(1), &[0.0, 0.5]);
    }

    #[test]
    fn lab_translation_invariant() {
        let mut rng = Rng::new(3);
        let base: Vec<[u8; 3]> = (0..36).map(|_| [rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8]).collect();
        let a = to_lab(&rgb(6, 6, |i, j| base[i * 6 + j]), 1.0).unwrap();
        let b = to_lab(&rgb(6, 6, |i, j| base[((i + 2) % 6) * 6 + (j + 1) % 6]), 1.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let src = ((i + 2) % 6) * 6 + (j + 1) % 6;
                assert_eq!(b.appearance(i * 6 + j), a.appearance(src));
            }
        }
    }

    #[test]
    fn constant_image_has_zero_gradients() {
        let fm = filter_bank_features(&rgb(5, 4, |_, _| [40, 90, 200]), &[Kernel::sobel_x(), Kernel::sobel_y()], 1.0).unwrap();
        assert_eq!(fm.appearance_dim(), 5);
        for p in 0..fm.n_pixels() {
            assert!(fm.appearance(p)[3].abs() < 1e-12 && fm.appearance(p)[4].abs() < 1e-12);
        }
    }

    #[test]
    fn step_edge_support() {
        // dark columns 0..4, bright 4..8
        let fm = filter_bank_features(&rgb(8, 5, |_, j| if j < 4 { [0; 3] } else { [255; 3] }), &[Kernel::sobel_x()], 1.0).unwrap();
        for p in 0..fm.n_pixels() {
            let j = p % 8;
            let g = fm.appearance(p)[3];
            if j == 3 || j == 4 {
                assert!(g > 1.0, "column {j}: {g}");
            } else {
                assert_eq!(g, 0.0, "column {j}");
            }
        }
    }

    #[test]
    fn matches_naive_correlation() {
        let mut rng = Rng::new(11);
        let plane: Vec<f64> = (0..9).map(|_| rng.uniform(0.0, 100.0)).collect();
        let k = Kernel::sobel_y();
        let got = filter_plane(&plane, 3, 3, &k).unwrap();
        // symmetric-reflection oracle
        let clamp = |v: isize| -> usize {
            match v {
                -1 => 0,
                3 => 2,
                v => v as usize,
            }
        };
        for i in 0..3isize {
            for j in 0..3isize {
                let mut acc = 0.0;
                for di in 0..3isize {
                    for dj in 0..3isize {
                        let si = clamp(i + di - 1);
                        let sj = clamp(j + dj - 1);
                        acc += k.weight(di as usize, dj as usize) * plane[si * 3 + sj];
                    }
                }
                assert!((acc - got[(i * 3 + j) as usize]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_larger_than_image() {
        let img = rgb(2, 2, |_, _| [0; 3]);
        assert!(filter_bank_features(&img, &[Kernel::sobel_x()], 1.0).is_err());
    }

    #[test]
    fn pos_scale_default() {
        // 16x16 image, 4 superpixels: step 8, m = 10
        assert!((default_pos_scale(16, 16, 4, 10.0) - 1.25).abs() < 1e-15);
    }
}
