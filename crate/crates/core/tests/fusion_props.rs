mod common;

use common::inverse;
use proptest::prelude::*;
use supergraph::fixtures::random_tree;
use supergraph::fusion::{cell_gradcheck, root_fusion, tree_lstm_up, FusionWeights, LevelTree, TreeLstmCell};
use supergraph::numerics::Rng;

fn cell(input: usize, hidden: usize, rng: &mut Rng) -> TreeLstmCell {
    let mut c = TreeLstmCell::glorot(input, hidden, rng);
    for b in c.b.iter_mut() {
        b.iter_mut().for_each(|v| *v = rng.uniform(-0.5, 0.5));
    }
    c
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..4).prop_flat_map(|b| (b..b + 6, Just(b)))
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn children_order_does_not_matter((leaves, branches) in shape(), dim in 1usize..5, hidden in 1usize..6,
                                      seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let t = random_tree(leaves, branches, dim, &mut rng);
        let c = cell(dim, hidden, &mut rng);
        let base = tree_lstm_up(&t, &c).unwrap();
        let mut perm: Vec<usize> = (0..leaves).collect();
        rng.shuffle(&mut perm);
        let inv = inverse(&perm);
        let mut t2 = LevelTree::new(
            t.branch_feats.clone(),
            t.leaf_feats.select_rows(&inv),
            inv.iter().map(|&i| t.leaf_parent[i]).collect(),
        ).unwrap();
        t2.set_root(t.root_feat.clone()).unwrap();
        let other = tree_lstm_up(&t2, &c).unwrap();
        prop_assert!(close(&base.root.h, &other.root.h, 1e-12));
        prop_assert!(close(&base.root.c, &other.root.c, 1e-12));
        for b in 0..branches {
            prop_assert!(close(&base.branches[b].h, &other.branches[b].h, 1e-12));
        }
    }

    #[test]
    fn gates_stay_in_range((leaves, branches) in shape(), dim in 1usize..5, hidden in 1usize..6, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let t = random_tree(leaves, branches, dim, &mut rng);
        let s = tree_lstm_up(&t, &cell(dim, hidden, &mut rng)).unwrap();
        for n in s.leaves.iter().chain(&s.branches).chain(std::iter::once(&s.root)) {
            prop_assert!(n.i.iter().chain(&n.o).chain(n.f.iter().flatten()).all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!(n.u.iter().chain(&n.h).all(|&v| (-1.0..=1.0).contains(&v)));
        }
        prop_assert_eq!(s.leaves.len(), leaves);
        prop_assert_eq!(s.root.f.len(), branches);
    }

    #[test]
    fn root_fusion_is_linear((leaves, branches) in shape(), dim in 1usize..5, lambda in -4.0f64..4.0, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let t = random_tree(leaves, branches, dim, &mut rng);
        let u = random_tree(leaves, branches, dim, &mut rng);
        let w = FusionWeights::glorot(dim, &mut rng);
        let mixed = LevelTree::new(
            t.branch_feats.scale(lambda).add(&u.branch_feats).unwrap(),
            t.leaf_feats.scale(lambda).add(&u.leaf_feats).unwrap(),
            t.leaf_parent.clone(),
        ).unwrap();
        let (yt, yu, ym) = (root_fusion(&t, &w).unwrap(), root_fusion(&u, &w).unwrap(), root_fusion(&mixed, &w).unwrap());
        let want: Vec<f64> = yt.iter().zip(&yu).map(|(a, b)| lambda * a + b).collect();
        prop_assert!(close(&ym, &want, 1e-12));
    }

    #[test]
    fn zero_cell_keeps_zero_state((leaves, branches) in shape(), dim in 1usize..5, hidden in 1usize..6, seed in any::<u64>()) {
        let t = random_tree(leaves, branches, dim, &mut Rng::new(seed));
        let s = tree_lstm_up(&t, &TreeLstmCell::zeros(dim, hidden)).unwrap();
        prop_assert!(s.root.h.iter().all(|&v| v == 0.0));
        prop_assert!(s.root.i.iter().all(|&v| v == 0.5));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cell_gradients_match_finite_differences((leaves, branches) in shape(), dim in 1usize..4,
                                               hidden in 1usize..4, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let t = random_tree(leaves, branches, dim, &mut rng);
        let r = cell_gradcheck(&cell(dim, hidden, &mut rng), &t, 1e-5).unwrap();
        prop_assert!(r.passed(), "{}", r);
    }
}
