use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::PixelFeatureMap;

/// Candidates per pixel: the 3×3 block of grid cells around its home cell.
pub const CANDIDATES: usize = 9;

/// Soft pixel–superpixel association restricted to 9 candidates per pixel.
///
/// Candidate `k` of a pixel in home cell `(cr, cc)` is cell
/// `(cr + k/3 − 1, cc + k%3 − 1)`. Candidates outside the grid hold exactly 0.
/// Candidate order is increasing in superpixel id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftAssociation {
    width: usize,
    height: usize,
    grid_w: usize,
    grid_h: usize,
    probs: Vec<[f64; CANDIDATES]>,
    cell_of: Vec<usize>,
}

impl SoftAssociation {
    /// Hard association: each pixel puts probability 1 on its home cell.
    pub fn hard_grid(width: usize, height: usize, grid_w: usize, grid_h: usize) -> Result<Self> {
        check_grid(width, height, grid_w, grid_h)?;
        let cell_of: Vec<usize> = (0..width * height)
            .map(|p| home_cell(p / width, p % width, width, height, grid_w, grid_h))
            .collect();
        let mut one_hot = [0.0; CANDIDATES];
        one_hot[CANDIDATES / 2] = 1.0;
        Ok(Self {
            width,
            height,
            grid_w,
            grid_h,
            probs: vec![one_hot; width * height],
            cell_of,
        })
    }

    /// Wraps externally produced probabilities. Rows must be nonnegative,
    /// sum to 1 within 1e-9, and be exactly 0 on out-of-grid candidates.
    pub fn from_probs(
        width: usize,
        height: usize,
        grid_w: usize,
        grid_h: usize,
        probs: Vec<[f64; CANDIDATES]>,
    ) -> Result<Self> {
        let mut q = Self::hard_grid(width, height, grid_w, grid_h)?;
        if probs.len() != width * height {
            return Err(Error::dim("one probability row per pixel required"));
        }
        q.probs = probs;
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        for p in 0..self.n_pixels() {
            let row = &self.probs[p];
            let mut sum = 0.0;
            for (k, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!("pixel {p}: probability {v}")));
                }
                if self.candidate(p, k).is_none() && v != 0.0 {
                    return Err(Error::invalid(format!(
                        "pixel {p}: out-of-grid candidate {k} carries {v}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("pixel {p}: probabilities sum to {sum}")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_w, self.grid_h)
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn n_superpixels(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn home_cell(&self, p: usize) -> usize {
        self.cell_of[p]
    }

    pub fn probs(&self, p: usize) -> &[f64; CANDIDATES] {
        &self.probs[p]
    }

    pub(crate) fn probs_mut(&mut self) -> &mut [[f64; CANDIDATES]] {
        &mut self.probs
    }

    /// Superpixel id of candidate `k` of pixel `p`, or `None` off the grid.
    pub fn candidate(&self, p: usize, k: usize) -> Option<usize> {
        let home = self.cell_of[p];
        let cr = (home / self.grid_w) as isize + (k / 3) as isize - 1;
        let cc = (home % self.grid_w) as isize + (k % 3) as isize - 1;
        if cr < 0 || cc < 0 || cr >= self.grid_h as isize || cc >= self.grid_w as isize {
            None
        } else {
            Some(cr as usize * self.grid_w + cc as usize)
        }
    }

    /// In-grid `(superpixel, probability)` pairs of pixel `p`, ascending id.
    pub fn entries(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..CANDIDATES).filter_map(move |k| self.candidate(p, k).map(|s| (s, self.probs[p][k])))
    }

    /// Highest-probability candidate; ties go to the lowest superpixel id.
    pub fn argmax(&self, p: usize) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for (s, v) in self.entries(p) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((s, v));
            }
        }
        best.expect("home cell is always a candidate").0
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.n_pixels()).map(|p| self.argmax(p)).collect()
    }

    /// Row-normalized view Q̃: each pixel's candidate weights divided by their
    /// sum. Identical to `probs` up to rounding when rows already sum to 1.
    pub fn row_normalized(&self, p: usize) -> [f64; CANDIDATES] {
        let sum: f64 = self.probs[p].iter().sum();
        self.probs[p].map(|v| if sum > 0.0 { v / sum } else { 0.0 })
    }

    /// Column sums `Σ_p q_p(s)` per superpixel.
    pub fn column_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.n_superpixels()];
        for p in 0..self.n_pixels() {
            for (s, v) in self.entries(p) {
                mass[s] += v;
            }
        }
        mass
    }

    pub fn check_against(&self, fm: &PixelFeatureMap) -> Result<()> {
        if fm.width() != self.width || fm.height() != self.height {
            return Err(Error::dim(format!(
                "association is {}x{}, features are {}x{}",
                self.width,
                self.height,
                fm.width(),
                fm.height()
            )));
        }
        Ok(())
    }
}

fn check_grid(width: usize, height: usize, grid_w: usize, grid_h: usize) -> Result<()> {
    if grid_w == 0 || grid_h == 0 {
        return Err(Error::invalid("grid dimensions must be at least 1"));
    }
    if grid_w > width || grid_h > height {
        return Err(Error::invalid(format!(
            "grid {grid_w}x{grid_h} larger than image {width}x{height}"
        )));
    }
    Ok(())
}

/// Enclosing grid rectangle of pixel `(i, j)`: `floor(i·grid_h/H)`,
/// `floor(j·grid_w/W)`.
pub fn home_cell(i: usize, j: usize, width: usize, height: usize, grid_w: usize, grid_h: usize) -> usize {
    let cr = i * grid_h / height;
    let cc = j * grid_w / width;
    cr * grid_w + cc
}
