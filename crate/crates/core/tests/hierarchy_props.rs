mod common;

use common::kruskal;
use proptest::prelude::*;
use supergraph::fixtures::{random_connected_edges, random_graph};
use supergraph::hierarchy::{boruvka_merge, boruvka_order, HierarchyJson};
use supergraph::numerics::{Rng, SparseAdj};

fn weighted(n: usize, extra: usize, levels: usize, seed: u64) -> Vec<(usize, usize, f64)> {
    let mut rng = Rng::new(seed);
    random_connected_edges(n, extra, &mut rng)
        .into_iter()
        .map(|(a, b, _)| (a, b, rng.below(levels) as f64))
        .collect()
}

fn targets(n: usize, picks: &[usize]) -> Vec<usize> {
    let mut t: Vec<usize> = picks.iter().map(|&p| 1 + p % (n - 1)).collect();
    t.sort_unstable_by(|a, b| b.cmp(a));
    t.dedup();
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn boruvka_equals_kruskal(n in 1usize..64, extra in 0usize..128, levels in 1usize..10, seed in any::<u64>()) {
        let edges = weighted(n, extra, levels, seed);
        let steps = boruvka_order(n, &edges);
        let mut got: Vec<_> = steps.iter().map(|s| (s.a.min(s.b), s.a.max(s.b))).collect();
        got.sort_unstable();
        let (want, total) = kruskal(n, &edges);
        prop_assert_eq!(got, want);
        prop_assert_eq!(steps.iter().map(|s| s.weight).sum::<f64>(), total);
        prop_assert_eq!(steps.len(), n - 1);
    }

    #[test]
    fn merge_order_ignores_edge_listing_order(n in 2usize..40, seed in any::<u64>()) {
        let mut edges = weighted(n, n, 3, seed);
        let a = boruvka_order(n, &edges);
        Rng::new(seed ^ 7).shuffle(&mut edges);
        let flipped: Vec<_> = edges.iter().map(|&(i, j, w)| (j, i, w)).collect();
        prop_assert_eq!(&a, &boruvka_order(n, &flipped));
    }

    #[test]
    fn hierarchy_accounting(n in 2usize..50, picks in prop::collection::vec(any::<usize>(), 1..4), seed in any::<u64>()) {
        let g = random_graph(n, 2, &mut Rng::new(seed));
        let t = targets(n, &picks);
        let h = boruvka_merge(&g, &t).unwrap();
        prop_assert_eq!(h.k(), t.len() + 1);
        prop_assert_eq!(h.record.steps.len(), n - t[t.len() - 1]);
        let mut sizes_prev = g.sizes.iter().sum::<usize>();
        for (k, &l) in t.iter().enumerate() {
            let s = &h.scales[k + 1];
            prop_assert_eq!(s.n(), l);
            prop_assert_eq!(s.sizes.iter().sum::<usize>(), sizes_prev);
            sizes_prev = s.sizes.iter().sum();
            prop_assert!(!s.adj.has_self_loops());
            prop_assert_eq!(s.adj.component_count(), 1);
            prop_assert!(SparseAdj::from_entries(l, s.adj.entries().to_vec()).is_ok());
        }
        let direct = h.fine_to_scale(t.len()).unwrap();
        let mut hop: Vec<usize> = (0..n).collect();
        for pm in &h.record.parent_maps {
            hop = hop.iter().map(|&v| pm[v]).collect();
        }
        prop_assert_eq!(direct, hop);
    }

    #[test]
    fn coarse_ids_follow_smallest_member(n in 2usize..40, pick in any::<usize>(), seed in any::<u64>()) {
        let g = random_graph(n, 1, &mut Rng::new(seed));
        let h = boruvka_merge(&g, &targets(n, &[pick])).unwrap();
        let map = &h.record.parent_maps[0];
        let mut first = vec![usize::MAX; h.scales[1].n()];
        for (v, &p) in map.iter().enumerate() {
            first[p] = first[p].min(v);
        }
        prop_assert!(first.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn coarse_features_are_size_weighted_means(n in 2usize..40, pick in any::<usize>(), seed in any::<u64>()) {
        let g = random_graph(n, 3, &mut Rng::new(seed));
        let h = boruvka_merge(&g, &targets(n, &[pick])).unwrap();
        let map = &h.record.parent_maps[0];
        for c in 0..h.scales[1].n() {
            let members: Vec<usize> = (0..n).filter(|&v| map[v] == c).collect();
            let mass: f64 = members.iter().map(|&v| g.sizes[v] as f64).sum();
            for d in 0..3 {
                let want = members.iter().map(|&v| g.sizes[v] as f64 * g.feats[(v, d)]).sum::<f64>() / mass;
                prop_assert!((h.scales[1].feats[(c, d)] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn json_export_validates(n in 2usize..30, picks in prop::collection::vec(any::<usize>(), 1..3), seed in any::<u64>()) {
        let g = random_graph(n, 2, &mut Rng::new(seed));
        let h = boruvka_merge(&g, &targets(n, &picks)).unwrap();
        let json = HierarchyJson::from_hierarchy(&h).unwrap();
        prop_assert!(json.validate().is_ok());
        let text = serde_json::to_string(&json).unwrap();
        let back: HierarchyJson = serde_json::from_str(&text).unwrap();
        prop_assert!(back.validate().is_ok());
    }
}
