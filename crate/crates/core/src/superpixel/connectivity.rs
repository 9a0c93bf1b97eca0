use std::collections::BTreeSet;

use super::map::{label_components, SuperpixelMap};
use crate::error::{Error, Result};
use crate::imageio::PixelFeatureMap;

/// Splits every label into its 4-connected pieces and absorbs pieces smaller
/// than a quarter of the mean region size into their largest neighbor.
///
/// The largest piece of each label keeps that label's position in the id
/// order; surviving split-off pieces get new ids after all original ones.
/// Centers and sizes are recomputed from `fm`.
pub fn enforce_connectivity(sp: &SuperpixelMap, fm: &PixelFeatureMap) -> Result<SuperpixelMap> {
    if sp.labels.len() != fm.n_pixels() || sp.width != fm.width() {
        return Err(Error::dim("superpixel map does not match feature map"));
    }
    let (w, h) = (sp.width, sp.height);
    let (comp, n_comp) = label_components(&sp.labels, w, h);

    let mut comp_label = vec![0usize; n_comp];
    let mut comp_size = vec![0usize; n_comp];
    for (p, &c) in comp.iter().enumerate() {
        comp_label[c] = sp.labels[p];
        comp_size[c] += 1;
    }
    let n_labels = {
        let set: BTreeSet<usize> = sp.labels.iter().copied().collect();
        set.len()
    };
    let threshold = (w * h) as f64 / n_labels as f64 / 4.0;

    // primary piece per label: the largest, earliest on ties
    let mut primary: std::collections::BTreeMap<usize, usize> = Default::default();
    for c in 0..n_comp {
        let e = primary.entry(comp_label[c]).or_insert(c);
        if comp_size[c] > comp_size[*e] {
            *e = c;
        }
    }

    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_comp];
    for p in 0..w * h {
        let (i, j) = (p / w, p % w);
        if j + 1 < w && comp[p] != comp[p + 1] {
            neighbors[comp[p]].insert(comp[p + 1]);
            neighbors[comp[p + 1]].insert(comp[p]);
        }
        if i + 1 < h && comp[p] != comp[p + w] {
            neighbors[comp[p]].insert(comp[p + w]);
            neighbors[comp[p + w]].insert(comp[p]);
        }
    }

    let mut dsu = Dsu::new(comp_size.clone());
    for c in 0..n_comp {
        let root = dsu.find(c);
        if (dsu.size[root] as f64) >= threshold {
            continue;
        }
        let roots: Vec<usize> = neighbors[root].iter().map(|&nb| dsu.find(nb)).collect();
        let target = roots
            .into_iter()
            .filter(|&r| r != root)
            .max_by(|&a, &b| dsu.size[a].cmp(&dsu.size[b]).then(b.cmp(&a)));
        let Some(target) = target else { continue };
        let moved = std::mem::take(&mut neighbors[root]);
        let merged = dsu.union_into(root, target);
        let other = if merged == root { target } else { root };
        let mut set = std::mem::take(&mut neighbors[merged]);
        set.extend(moved);
        set.extend(std::mem::take(&mut neighbors[other]));
        neighbors[merged] = set;
    }

    // each surviving group is named after its largest original piece
    let mut largest_piece = vec![usize::MAX; n_comp];
    for c in 0..n_comp {
        let root = dsu.find(c);
        let cur = largest_piece[root];
        if cur == usize::MAX || comp_size[c] > comp_size[cur] {
            largest_piece[root] = c;
        }
    }
    let fresh_base = sp.labels.iter().max().map_or(0, |m| m + 1);
    let mut key = vec![0usize; n_comp];
    for c in 0..n_comp {
        if dsu.find(c) != c {
            continue;
        }
        let piece = largest_piece[c];
        let label = comp_label[piece];
        key[c] = if primary[&label] == piece {
            label
        } else {
            // first pixel order of pieces equals component id order
            fresh_base + piece
        };
    }
    let labels: Vec<usize> = comp.iter().map(|&c| key[dsu.find(c)]).collect();
    SuperpixelMap::from_labels(fm, &labels)
}

struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    fn new(size: Vec<usize>) -> Self {
        Self {
            parent: (0..size.len()).collect(),
            size,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges `a` into `b`'s set; returns the new root.
    fn union_into(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
        self.size[rb] += self.size[ra];
        rb
    }
}
