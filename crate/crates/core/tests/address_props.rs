use gasket::address::*;
use proptest::prelude::*;

fn pair(max_n: usize) -> impl Strategy<Value = PairIndex> {
    (1..=max_n).prop_flat_map(|n| (Just(n), 1..=(1usize << n))).prop_map(|(n, k)| PairIndex::new(n, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn index_round_trip(idx in 0..vertex_count(8)) {
        let v = VertexId::from_index(idx);
        prop_assert_eq!(v.index(), idx);
        prop_assert_eq!(level_of_index(idx), v.level());
        let shown = v.to_string();
        prop_assert_eq!(shown.parse::<VertexId>().unwrap(), v);
    }

    #[test]
    fn raw_addresses_share_one_vertex(idx in 3..vertex_count(7)) {
        let v = VertexId::from_index(idx);
        let raws = v.raw_addresses();
        prop_assert_eq!(raws.len(), 2);
        for (w, c) in raws {
            prop_assert_eq!(VertexId::new(w, c).unwrap().index(), idx);
        }
    }

    #[test]
    fn deeper_address_resolves_to_same_vertex(idx in 0..vertex_count(5), reps in 1usize..4) {
        // F_w q_i = F_w F_i^r q_i.
        let v = VertexId::from_index(idx);
        let (w, c) = v.raw_addresses().remove(0);
        let mut deeper = w.clone();
        for _ in 0..reps {
            deeper.push(c);
        }
        prop_assert_eq!(VertexId::new(deeper, c).unwrap().index(), idx);
    }

    #[test]
    fn cell_index_round_trip(level in 0usize..8, seed in any::<u64>()) {
        let idx = (seed as usize) % pow3(level);
        let w = Word::from_cell_index(level, idx);
        prop_assert_eq!(w.len(), level);
        prop_assert_eq!(w.cell_index(), idx);
    }

    #[test]
    fn prefix_law(p in pair(7), q in pair(7)) {
        prop_assert_eq!(pair_geq(p, q), word_of(q).is_prefix_of(&word_of(p)));
    }

    #[test]
    fn pair_add_is_word_concatenation(p in pair(4), q in pair(4), r in pair(4)) {
        let pq = pair_add(p, q);
        prop_assert_eq!(word_of(pq), word_of(p).concat(&word_of(q)));
        prop_assert_eq!(pair_add(pq, r), pair_add(p, pair_add(q, r)));
        prop_assert!(pair_geq(pq, p));
    }

    #[test]
    fn dyadic_vertex_round_trip(n in 0usize..10, seed in any::<u64>()) {
        let k = (seed as usize) % ((1usize << n) + 1);
        let p = DyadicPoint::new(n, k).unwrap();
        let v = vertex_of_dyadic(p);
        prop_assert_eq!(dyadic_of_vertex(&v), Some(p));
        prop_assert_eq!(v.level(), p.level());
    }

    #[test]
    fn neighbor_relation_is_symmetric(m in 1usize..6, seed in any::<u64>()) {
        let idx = (seed as usize) % vertex_count(m);
        let nb = neighbors(idx, m);
        prop_assert_eq!(nb.len(), if idx < 3 { 2 } else { 4 });
        for y in nb {
            prop_assert!(neighbors(y, m).contains(&idx));
        }
    }

    #[test]
    fn permutation_preserves_level(idx in 0..vertex_count(6), perm in Just(vec![0u8, 1, 2]).prop_shuffle()) {
        let p = [perm[0], perm[1], perm[2]];
        let j = permute_vertex(idx, p);
        prop_assert_eq!(level_of_index(j), level_of_index(idx));
        let mut inv = [0u8; 3];
        for (i, &t) in p.iter().enumerate() {
            inv[t as usize] = i as u8;
        }
        prop_assert_eq!(permute_vertex(j, inv), idx);
    }
}

#[test]
fn bottom_grid_is_the_dyadic_grid() {
    for m in 0..=6 {
        let mut ks: Vec<(usize, usize)> = enumerate_vertices(m, VertexSet::All)
            .unwrap()
            .iter()
            .filter_map(dyadic_of_vertex)
            .map(|p| {
                let i = p.index_at(m).unwrap();
                (m, i)
            })
            .collect();
        ks.sort();
        let want: Vec<(usize, usize)> = (0..=1usize << m).map(|k| (m, k)).collect();
        assert_eq!(ks, want, "level {m}");
    }
}
