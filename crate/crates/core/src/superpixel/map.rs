use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::PixelFeatureMap;
use crate::numerics::DenseMat;

/// Hard superpixel labeling with per-region centers.
///
/// Labels are compact (`0..n_superpixels`), every region is nonempty, and
/// centers are the plain means of the region's pixel features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperpixelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
    pub n_superpixels: usize,
    pub centers_u: DenseMat,
    pub centers_r: DenseMat,
    pub sizes: Vec<usize>,
}

impl SuperpixelMap {
    /// Compacts an arbitrary labeling (ascending order of the original ids is
    /// kept) and computes region means.
    pub fn from_labels(fm: &PixelFeatureMap, labels: &[usize]) -> Result<Self> {
        if labels.len() != fm.n_pixels() {
            return Err(Error::dim("labels do not cover the feature map"));
        }
        let remap: BTreeMap<usize, usize> = {
            let mut ids: Vec<usize> = labels.to_vec();
            ids.sort_unstable();
            ids.dedup();
            ids.into_iter().enumerate().map(|(new, old)| (old, new)).collect()
        };
        let labels: Vec<usize> = labels.iter().map(|l| remap[l]).collect();
        let n = remap.len();
        let d = fm.appearance_dim();
        let mut sizes = vec![0usize; n];
        let mut u = DenseMat::zeros(n, d);
        let mut r = DenseMat::zeros(n, 2);
        for (p, &l) in labels.iter().enumerate() {
            sizes[l] += 1;
            for (a, &v) in u.row_mut(l).iter_mut().zip(fm.appearance(p)) {
                *a += v;
            }
            for (a, &v) in r.row_mut(l).iter_mut().zip(fm.position(p)) {
                *a += v;
            }
        }
        for (l, &size) in sizes.iter().enumerate() {
            let inv = 1.0 / size as f64;
            u.row_mut(l).iter_mut().for_each(|v| *v *= inv);
            r.row_mut(l).iter_mut().for_each(|v| *v *= inv);
        }
        Ok(Self {
            width: fm.width(),
            height: fm.height(),
            labels,
            n_superpixels: n,
            centers_u: u,
            centers_r: r,
            sizes,
        })
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Number of 4-connected components of the label raster.
    pub fn component_count(&self) -> usize {
        label_components(&self.labels, self.width, self.height).1
    }
}

/// 4-connected components of a label raster, numbered in scan order of
/// their first pixel. Returns the component id per pixel and the count.
pub fn label_components(labels: &[usize], width: usize, height: usize) -> (Vec<usize>, usize) {
    const UNSEEN: usize = usize::MAX;
    let mut comp = vec![UNSEEN; labels.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if comp[start] != UNSEEN {
            continue;
        }
        let l = labels[start];
        comp[start] = count;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (i, j) = (p / width, p % width);
            let mut visit = |q: usize| {
                if comp[q] == UNSEEN && labels[q] == l {
                    comp[q] = count;
                    stack.push(q);
                }
            };
            if i > 0 {
                visit(p - width);
            }
            if i + 1 < height {
                visit(p + width);
            }
            if j > 0 {
                visit(p - 1);
            }
            if j + 1 < width {
                visit(p + 1);
            }
        }
        count += 1;
    }
    (comp, count)
}
