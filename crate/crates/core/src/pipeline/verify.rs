use std::time::Instant;

use crate::cdgc::{
    difference_term, forward, forward_cached, layer_gradients, matrix_pre_signed, nodewise_pre, partition, Activation,
    CdgcLayer, Propagation, SubsetNorm,
};
use crate::fixtures;
use crate::fusion::{cell_gradcheck, root_fusion, tree_lstm_up, FusionWeights, LevelTree, TreeLstmCell};
use crate::hierarchy::{boruvka_merge, boruvka_order, edge_order, SpGraph};
use crate::imageio::{filter_bank_features, to_lab, Image, Kernel};
use crate::numerics::{
    finite_diff_grad, finite_diff_scalar, normalize_adjacency, random_matrix, row_sums, sigmoid, spmm, DenseMat, Rng,
    SparseAdj,
};
use crate::superpixel::{
    cluster, compute_centers, compute_centers_matrix, enforce_connectivity, label_components, ClusterConfig,
};

/// Switches that deliberately break one code path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Flip the sign of the α term in the matrix form.
    pub alpha_sign: bool,
}

type Check = fn(&Faults) -> std::result::Result<(), String>;

pub struct Suite {
    pub name: &'static str,
    check: Check,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: f64,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<T>(r: crate::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn suites() -> Vec<Suite> {
    vec![
        Suite { name: "normalized adjacency symmetric", check: normalized_symmetric },
        Suite { name: "spmm matches dense product", check: spmm_dense },
        Suite { name: "spmm of constant rows", check: spmm_constant },
        Suite { name: "rng streams reproducible", check: rng_streams },
        Suite { name: "ppm round trip", check: ppm_round_trip },
        Suite { name: "lab translation invariance", check: lab_translation },
        Suite { name: "filter bank zero on constant image", check: filter_constant },
        Suite { name: "association rows sum to one", check: association_rows },
        Suite { name: "center duality", check: center_duality },
        Suite { name: "cluster determinism", check: cluster_determinism },
        Suite { name: "two-tone reconstruction non-increasing", check: two_tone_monotone },
        Suite { name: "connectivity and coverage", check: connectivity },
        Suite { name: "mst matches kruskal", check: kruskal_equivalence },
        Suite { name: "merge accounting and parent composition", check: merge_accounting },
        Suite { name: "coarse features are size-weighted means", check: coarse_means },
        Suite { name: "scale adjacency well-formed", check: scale_adjacency },
        Suite { name: "node-wise and matrix forms agree", check: nodewise_matrix },
        Suite { name: "alpha continuity", check: alpha_continuity },
        Suite { name: "constant-feature annihilation", check: constant_annihilation },
        Suite { name: "permutation equivariance", check: permutation_equivariance },
        Suite { name: "layer gradient check", check: layer_gradcheck },
        Suite { name: "child-sum invariance", check: child_sum_invariance },
        Suite { name: "gate ranges", check: gate_ranges },
        Suite { name: "root fusion linearity", check: root_fusion_linear },
        Suite { name: "path tree equals sequential lstm", check: path_tree_lstm },
        Suite { name: "cell gradient check", check: cell_gradchecks },
    ]
}

pub fn run_suites(faults: &Faults, filter: Option<&str>) -> Vec<SuiteResult> {
    suites()
        .into_iter()
        .filter(|s| filter.is_none_or(|f| s.name.contains(f)))
        .map(|s| {
            let t = Instant::now();
            let r = std::panic::catch_unwind(|| (s.check)(faults)).unwrap_or_else(|_| Err("panicked".into()));
            SuiteResult {
                name: s.name,
                passed: r.is_ok(),
                detail: r.err().unwrap_or_default(),
                millis: t.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect()
}

pub fn report(results: &[SuiteResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{:<width$}  {}  {:>9.1} ms{}\n",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.millis,
            if r.detail.is_empty() { String::new() } else { format!("  {}", r.detail) }
        ));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    out.push_str(&format!("{} suites, {} failed\n", results.len(), failed));
    out
}

fn rel(a: &DenseMat, b: &DenseMat) -> f64 {
    a.max_rel_diff(b, 1e-300)
}

/// Deviation relative to the larger of the two matrices' magnitudes.
fn normwise(a: &DenseMat, b: &DenseMat) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    a.sub(b).map(|m| m.max_abs() / scale).unwrap_or(f64::INFINITY)
}

fn normalized_symmetric(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(1);
    for _ in 0..50 {
        let n = 2 + rng.below(31);
        let edges: Vec<_> = fixtures::random_connected_edges(n, n, &mut rng)
            .into_iter()
            .map(|(a, b, _)| (a, b, rng.uniform(0.1, 3.0)))
            .collect();
        let a = e2s(normalize_adjacency(&e2s(SparseAdj::from_undirected(n, &edges))?))?;
        for &(i, j, w) in a.entries() {
            ensure(a.get(j, i).map(f64::to_bits) == Some(w.to_bits()), || format!("({i},{j}) not mirrored"))?;
        }
    }
    Ok(())
}

fn spmm_dense(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(2);
    for _ in 0..50 {
        let n = 1 + rng.below(32);
        let g = fixtures::random_graph(n, 1, &mut rng);
        let a = e2s(normalize_adjacency(&g.adj))?;
        let h = random_matrix(n, 1 + rng.below(6), -1.0, 1.0, &mut rng);
        let fast = e2s(spmm(&a, &h))?;
        let dense = e2s(a.to_dense().matmul(&h))?;
        ensure(normwise(&fast, &dense) <= 1e-12, || format!("n={n}: {:e}", normwise(&fast, &dense)))?;
    }
    Ok(())
}

fn spmm_constant(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(3);
    for _ in 0..50 {
        let n = 1 + rng.below(32);
        let a = e2s(normalize_adjacency(&fixtures::random_graph(n, 1, &mut rng).adj))?;
        let h0: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let out = e2s(spmm(&a, &fixtures::constant_rows(n, &h0)))?;
        let rs = row_sums(&a);
        for i in 0..n {
            for (k, &v) in h0.iter().enumerate() {
                ensure((out[(i, k)] - rs[i] * v).abs() <= 1e-12, || format!("row {i}"))?;
            }
        }
    }
    Ok(())
}

fn rng_streams(_: &Faults) -> std::result::Result<(), String> {
    let (mut a, mut b) = (Rng::new(42), Rng::new(42));
    for k in 0..1_000_000 {
        ensure(a.next_u64() == b.next_u64(), || format!("draw {k} differs"))?;
    }
    Ok(())
}

fn ppm_round_trip(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(4);
    for _ in 0..20 {
        let (w, h) = (1 + rng.below(20), 1 + rng.below(20));
        let img = fixtures::random_image(w, h, &mut rng);
        let back = e2s(Image::decode(&img.encode()))?;
        ensure(back == img, || format!("{w}x{h} image changed"))?;
    }
    Ok(())
}

fn lab_translation(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(5);
    let img = fixtures::random_image(12, 9, &mut rng);
    let (dy, dx) = (2, 3);
    let shifted = Image::from_fn_rgb(12, 9, |i, j| {
        let p = img.pixel((i + 9 - dy) % 9, (j + 12 - dx) % 12);
        [p[0], p[1], p[2]]
    });
    let (a, b) = (e2s(to_lab(&img, 1.0))?, e2s(to_lab(&shifted, 1.0))?);
    for i in 0..9 {
        for j in 0..12 {
            let pre = ((i + 9 - dy) % 9) * 12 + (j + 12 - dx) % 12;
            ensure(b.appearance(i * 12 + j) == a.appearance(pre), || format!("pixel ({i},{j})"))?;
        }
    }
    Ok(())
}

fn filter_constant(_: &Faults) -> std::result::Result<(), String> {
    let img = Image::from_fn_rgb(7, 5, |_, _| [90, 140, 30]);
    let fm = e2s(filter_bank_features(&img, &[Kernel::sobel_x(), Kernel::sobel_y()], 1.0))?;
    for p in 0..fm.n_pixels() {
        ensure(fm.appearance(p)[3..].iter().all(|&v| v == 0.0), || format!("pixel {p}"))?;
    }
    Ok(())
}

fn association_rows(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(6);
    for _ in 0..50 {
        let fm = fixtures::random_features(16, 16, 3, 1.0, &mut rng);
        let (gw, gh) = (1 + rng.below(6), 1 + rng.below(6));
        let out = e2s(cluster(&fm, &ClusterConfig::new(gw, gh, 2)))?;
        let q = &out.association;
        for p in 0..q.n_pixels() {
            let s: f64 = q.probs(p).iter().sum();
            ensure((s - 1.0).abs() <= 1e-9, || format!("pixel {p} sums to {s}"))?;
            for k in 0..9 {
                if q.candidate(p, k).is_none() {
                    ensure(q.probs(p)[k] == 0.0, || format!("pixel {p} candidate {k} off-grid but nonzero"))?;
                }
            }
        }
    }
    Ok(())
}

fn center_duality(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(7);
    for _ in 0..20 {
        let fm = fixtures::random_features(12, 10, 3, 0.5, &mut rng);
        let q = fixtures::random_association(12, 10, 4, 3, &mut rng);
        let (a, b) = (e2s(compute_centers(&fm, &q))?, e2s(compute_centers_matrix(&fm, &q))?);
        ensure(rel(&a.u, &b.u) <= 1e-12 && rel(&a.r, &b.r) <= 1e-12, || "centers differ".into())?;
    }
    Ok(())
}

fn cluster_determinism(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(8);
    let fm = fixtures::random_features(20, 14, 3, 0.7, &mut rng);
    let cfg = ClusterConfig::new(4, 3, 4);
    let (a, b) = (e2s(cluster(&fm, &cfg))?, e2s(cluster(&fm, &cfg))?);
    ensure(a.map.labels == b.map.labels, || "labels differ".into())?;
    let bits = |t: &[crate::superpixel::LossRecord]| -> Vec<u64> {
        t.iter().flat_map(|r| [r.reconstruction.to_bits(), r.compactness.to_bits()]).collect()
    };
    ensure(bits(&a.trace) == bits(&b.trace), || "loss trace differs".into())
}

fn two_tone_monotone(_: &Faults) -> std::result::Result<(), String> {
    let img = fixtures::two_tone(15, 6);
    let fm = e2s(to_lab(&img, 0.0))?;
    let out = e2s(cluster(&fm, &ClusterConfig::new(2, 1, 3)))?;
    let t = &out.trace;
    ensure(t.len() >= 2 && t[1].reconstruction <= t[0].reconstruction, || {
        format!("{} then {}", t[0].reconstruction, t[1].reconstruction)
    })
}

fn connectivity(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(9);
    for _ in 0..10 {
        let fm = fixtures::random_features(18, 15, 3, 0.3, &mut rng);
        let out = e2s(cluster(&fm, &ClusterConfig::new(4, 4, 3)))?;
        let m = e2s(enforce_connectivity(&out.map, &fm))?;
        ensure(m.sizes.iter().sum::<usize>() == 18 * 15, || "sizes do not cover the image".into())?;
        let (_, comps) = label_components(&m.labels, 18, 15);
        ensure(comps == m.n_superpixels, || format!("{comps} components for {} regions", m.n_superpixels))?;
    }
    Ok(())
}

/// Kruskal with the same strict edge order.
fn kruskal(n: usize, edges: &[(usize, usize, f64)]) -> Vec<(usize, usize)> {
    let mut sorted = edges.to_vec();
    sorted.sort_by(|a, b| edge_order(*a, *b));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut out = Vec::new();
    for (a, b, _) in sorted {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            out.push((a.min(b), a.max(b)));
        }
    }
    out.sort_unstable();
    out
}

fn kruskal_equivalence(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(10);
    for _ in 0..200 {
        let n = 1 + rng.below(64);
        let edges: Vec<_> = fixtures::random_connected_edges(n, 2 * n, &mut rng)
            .into_iter()
            .map(|(a, b, _)| (a, b, rng.below(8) as f64))
            .collect();
        let mut got: Vec<_> = boruvka_order(n, &edges).iter().map(|s| (s.a, s.b)).collect();
        got.sort_unstable();
        ensure(got == kruskal(n, &edges), || format!("edge sets differ on n={n}"))?;
    }
    Ok(())
}

fn merge_accounting(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(11);
    for _ in 0..50 {
        let n = 4 + rng.below(40);
        let g = fixtures::random_graph(n, 2, &mut rng);
        let t1 = 1 + rng.below(n - 1);
        let t2 = 1 + rng.below(t1.max(2) - 1);
        let targets: Vec<usize> = if t2 < t1 { vec![t1, t2] } else { vec![t1] };
        let h = e2s(boruvka_merge(&g, &targets))?;
        let last = *targets.last().unwrap();
        ensure(h.record.steps.len() == n - last, || format!("{} merges for {n} -> {last}", h.record.steps.len()))?;
        for (k, &t) in targets.iter().enumerate() {
            let mut ids = h.record.parent_maps[k].clone();
            ids.sort_unstable();
            ids.dedup();
            ensure(ids.len() == t, || format!("{} parents at target {t}", ids.len()))?;
        }
        let direct = e2s(h.fine_to_scale(targets.len()))?;
        let mut hop: Vec<usize> = (0..n).collect();
        for pm in &h.record.parent_maps {
            hop = hop.iter().map(|&v| pm[v]).collect();
        }
        ensure(direct == hop, || "parent maps do not compose".into())?;
    }
    Ok(())
}

fn coarse_means(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(12);
    for _ in 0..30 {
        let n = 3 + rng.below(30);
        let g = fixtures::random_graph(n, 3, &mut rng);
        let target = 1 + rng.below(n - 1);
        let h = e2s(boruvka_merge(&g, &[target]))?;
        let map = &h.record.parent_maps[0];
        for c in 0..target {
            let members: Vec<usize> = (0..n).filter(|&v| map[v] == c).collect();
            let total: f64 = members.iter().map(|&v| g.sizes[v] as f64).sum();
            for d in 0..3 {
                let want = members.iter().map(|&v| g.sizes[v] as f64 * g.feats[(v, d)]).sum::<f64>() / total;
                let got = h.scales[1].feats[(c, d)];
                ensure((got - want).abs() <= 1e-12 * want.abs().max(1.0), || format!("node {c} dim {d}"))?;
            }
        }
    }
    Ok(())
}

fn scale_adjacency(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(13);
    for _ in 0..30 {
        let n = 3 + rng.below(30);
        let g = fixtures::random_graph(n, 2, &mut rng);
        let t1 = 1 + rng.below(n - 1);
        let h = e2s(boruvka_merge(&g, &[t1]))?;
        for s in &h.scales {
            ensure(!s.adj.has_self_loops(), || "self-loop".into())?;
            ensure(s.adj.component_count() == 1, || "disconnected scale".into())?;
            e2s(SparseAdj::from_entries(s.n(), s.adj.entries().to_vec()))?;
        }
    }
    Ok(())
}

fn random_layer_case(rng: &mut Rng, tied: bool, alpha: f64) -> (SpGraph, Propagation, CdgcLayer, DenseMat) {
    let n = 1 + rng.below(32);
    let (d_in, d_out) = (1 + rng.below(8), 1 + rng.below(8));
    let g = fixtures::random_graph(n, 1, rng);
    let prop = Propagation::new(&g, &partition(&g), SubsetNorm::Adjacency).expect("valid graph");
    let layer = CdgcLayer::glorot(d_in, d_out, tied, alpha, Activation::None, rng).expect("valid layer");
    let h = random_matrix(n, d_in, -1.0, 1.0, rng);
    (g, prop, layer, h)
}

fn nodewise_matrix(f: &Faults) -> std::result::Result<(), String> {
    let sign = if f.alpha_sign { -1.0 } else { 1.0 };
    let mut rng = Rng::new(14);
    for _ in 0..100 {
        for alpha in [0.0, 0.3, 0.4, 1.0] {
            let (_, prop, layer, h) = random_layer_case(&mut rng, true, alpha);
            let a = e2s(nodewise_pre(&prop, &layer, &h))?;
            let b = e2s(matrix_pre_signed(&prop, &layer, &h, sign))?;
            let d = normwise(&a, &b);
            ensure(d <= 1e-12, || format!("alpha {alpha}: deviation {d:e}"))?;
        }
    }
    Ok(())
}

fn alpha_continuity(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(15);
    for _ in 0..50 {
        let tied = rng.below(2) == 0;
        let (_, prop, layer, h) = random_layer_case(&mut rng, tied, 0.0);
        let at = |a: f64| forward(&prop, &CdgcLayer { alpha: a, ..layer.clone() }, &h);
        let (z0, z1, zh) = (e2s(at(0.0))?, e2s(at(1.0))?, e2s(at(0.5))?);
        let mid = e2s(z0.add(&z1))?.scale(0.5);
        ensure(normwise(&zh, &mid) <= 1e-12, || "output not affine in alpha".into())?;
    }
    Ok(())
}

fn constant_annihilation(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(16);
    for _ in 0..50 {
        let tied = rng.below(2) == 0;
        let (_, prop, layer, h) = random_layer_case(&mut rng, tied, 0.4);
        let h0: Vec<f64> = h.row(0).to_vec();
        let hc = fixtures::constant_rows(h.rows(), &h0);
        let diff = e2s(difference_term(&prop, &layer, &hc))?;
        ensure(diff.max_abs() <= 1e-12, || format!("difference term {:e}", diff.max_abs()))?;
    }
    Ok(())
}

fn permutation_equivariance(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(17);
    for _ in 0..50 {
        let (g, prop, layer, h) = random_layer_case(&mut rng, true, 0.4);
        let n = g.n();
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let gp = e2s(g.permute(&perm))?;
        let propp = e2s(Propagation::new(&gp, &partition(&gp), SubsetNorm::Adjacency))?;
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let out = e2s(forward(&prop, &layer, &h))?;
        let outp = e2s(forward(&propp, &layer, &h.select_rows(&inv)))?;
        ensure(normwise(&out.select_rows(&inv), &outp) <= 1e-12, || "outputs not permuted".into())?;
    }
    Ok(())
}

fn layer_gradcheck(_: &Faults) -> std::result::Result<(), String> {
    for seed in 0..20u64 {
        let mut rng = Rng::new(100 + seed);
        let n = 2 + rng.below(5);
        let (d_in, d_out) = (1 + rng.below(4), 1 + rng.below(4));
        let g = fixtures::random_graph(n, 1, &mut rng);
        let prop = e2s(Propagation::new(&g, &partition(&g), SubsetNorm::Adjacency))?;
        let act = if seed % 2 == 0 { Activation::None } else { Activation::Rectifier };
        let layer = e2s(CdgcLayer::glorot(d_in, d_out, seed % 4 < 2, 0.4, act, &mut rng))?;
        let h = random_matrix(n, d_in, -1.0, 1.0, &mut rng);
        let up = random_matrix(n, d_out, -1.0, 1.0, &mut rng);
        let (_, cache) = e2s(forward_cached(&prop, &layer, &h))?;
        if cache.pre_activation().as_slice().iter().any(|z| z.abs() < 1e-4) && act == Activation::Rectifier {
            continue;
        }
        let grads = e2s(layer_gradients(&prop, &layer, &cache, &up))?;
        let loss = |l: &CdgcLayer| forward(&prop, l, &h).and_then(|o| o.frobenius_dot(&up)).unwrap_or(f64::NAN);
        for b in 0..grads.w.len() {
            let num = e2s(finite_diff_grad(
                |w| {
                    let mut l = layer.clone();
                    *l.weights.blocks_mut()[b] = w.clone();
                    loss(&l)
                },
                layer.weights.blocks()[b],
                1e-5,
            ))?;
            let err = grads.w[b].max_rel_diff(&num, crate::fusion::GRAD_FLOOR);
            ensure(err <= 1e-5, || format!("seed {seed} weight block {b}: {err:e}"))?;
        }
        let num_a = e2s(finite_diff_scalar(|a| loss(&CdgcLayer { alpha: a, ..layer.clone() }), layer.alpha, 1e-5))?;
        let err = (grads.alpha - num_a).abs() / grads.alpha.abs().max(num_a.abs()).max(crate::fusion::GRAD_FLOOR);
        ensure(err <= 1e-5, || format!("seed {seed} alpha: {err:e}"))?;
    }
    Ok(())
}

fn random_cell(input: usize, hidden: usize, rng: &mut Rng) -> TreeLstmCell {
    let mut c = TreeLstmCell::glorot(input, hidden, rng);
    for b in c.b.iter_mut() {
        b.iter_mut().for_each(|v| *v = rng.uniform(-0.5, 0.5));
    }
    c
}

fn child_sum_invariance(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(18);
    for _ in 0..30 {
        let t = fixtures::random_tree(3 + rng.below(6), 1 + rng.below(3), 3, &mut rng);
        let cell = random_cell(3, 4, &mut rng);
        let base = e2s(tree_lstm_up(&t, &cell))?;
        // relabel leaves: a permutation of children ids under every branch
        let mut perm: Vec<usize> = (0..t.n_leaves()).collect();
        rng.shuffle(&mut perm);
        let mut inv = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let t2 = e2s(LevelTree::new(
            t.branch_feats.clone(),
            t.leaf_feats.select_rows(&inv),
            inv.iter().map(|&i| t.leaf_parent[i]).collect(),
        ))?;
        let mut t2 = t2;
        e2s(t2.set_root(t.root_feat.clone()))?;
        let other = e2s(tree_lstm_up(&t2, &cell))?;
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
        ensure(close(&base.root.h, &other.root.h), || "root changed".into())?;
        for b in 0..t.n_branches() {
            ensure(close(&base.branches[b].h, &other.branches[b].h), || format!("branch {b} changed"))?;
        }
    }
    Ok(())
}

fn gate_ranges(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(19);
    for _ in 0..30 {
        let t = fixtures::random_tree(2 + rng.below(6), 1 + rng.below(2), 4, &mut rng);
        let cell = random_cell(4, 5, &mut rng);
        let s = e2s(tree_lstm_up(&t, &cell))?;
        for n in s.leaves.iter().chain(&s.branches).chain(std::iter::once(&s.root)) {
            ensure(n.i.iter().chain(&n.o).chain(n.f.iter().flatten()).all(|&v| v > 0.0 && v < 1.0), || {
                "sigmoid gate outside (0,1)".into()
            })?;
            ensure(n.u.iter().all(|&v| v > -1.0 && v < 1.0), || "update outside (-1,1)".into())?;
        }
    }
    Ok(())
}

fn root_fusion_linear(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(20);
    for _ in 0..30 {
        let t = fixtures::random_tree(4, 2, 3, &mut rng);
        let w = FusionWeights::glorot(3, &mut rng);
        let lambda = rng.uniform(-3.0, 3.0);
        let scaled = e2s(LevelTree::new(t.branch_feats.scale(lambda), t.leaf_feats.scale(lambda), t.leaf_parent.clone()))?;
        let (y, ys) = (e2s(root_fusion(&t, &w))?, e2s(root_fusion(&scaled, &w))?);
        ensure(y.iter().zip(&ys).all(|(a, b)| (lambda * a - b).abs() <= 1e-12), || "not linear".into())?;
    }
    Ok(())
}

/// Plain LSTM step with explicit previous state.
fn lstm_step(cell: &TreeLstmCell, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let gate = |g: usize, f: fn(f64) -> f64| -> Vec<f64> {
        let wx = cell.w[g].matvec(x).unwrap();
        let uh = cell.u[g].matvec(h).unwrap();
        (0..h.len()).map(|k| f(wx[k] + uh[k] + cell.b[g][k])).collect()
    };
    let (i, fg, o, u) = (gate(0, sigmoid), gate(1, sigmoid), gate(2, sigmoid), gate(3, f64::tanh));
    let c2: Vec<f64> = (0..h.len()).map(|k| fg[k] * c[k] + i[k] * u[k]).collect();
    let h2 = (0..h.len()).map(|k| o[k] * c2[k].tanh()).collect();
    (h2, c2)
}

fn path_tree_lstm(_: &Faults) -> std::result::Result<(), String> {
    let mut rng = Rng::new(21);
    for _ in 0..30 {
        let t = fixtures::random_tree(1, 1, 3, &mut rng);
        let cell = random_cell(3, 4, &mut rng);
        let s = e2s(tree_lstm_up(&t, &cell))?;
        let zero = vec![0.0; 4];
        let (h1, c1) = lstm_step(&cell, t.leaf_feats.row(0), &zero, &zero);
        let (h2, c2) = lstm_step(&cell, t.branch_feats.row(0), &h1, &c1);
        let (h3, _) = lstm_step(&cell, &t.root_feat, &h2, &c2);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
        ensure(close(&s.leaves[0].h, &h1) && close(&s.branches[0].h, &h2) && close(&s.root.h, &h3), || {
            "diverges from sequential lstm".into()
        })?;
    }
    Ok(())
}

fn cell_gradchecks(_: &Faults) -> std::result::Result<(), String> {
    for seed in 0..20u64 {
        let mut rng = Rng::new(200 + seed);
        let t = fixtures::random_tree(2 + rng.below(3), 1 + rng.below(2), 3, &mut rng);
        let cell = random_cell(3, 1 + rng.below(5), &mut rng);
        let r = e2s(cell_gradcheck(&cell, &t, 1e-5))?;
        ensure(r.passed(), || format!("seed {seed}: {}", r.failing().join(", ")))?;
    }
    Ok(())
}
