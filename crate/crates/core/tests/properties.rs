use proptest::prelude::*;

use scclab::fenwick::WeightTree;
use scclab::graph::{pair_configuration, DegreeSequence};
use scclab::limit::lattice::{hermite_normal_form, main_lattice};
use scclab::mdm::{kernel, Mdm};
use scclab::metric::{canonical_code, dg_distance, ExtDistance, SizeCap};
use scclab::numerics::compensated_sum;
use scclab::scc::digraph_sccs;
use scclab::stats::ks_statistic;

fn small_matrix() -> impl Strategy<Value = [[i64; 2]; 2]> {
    prop::array::uniform2(prop::array::uniform2(-20i64..=20))
        .prop_filter("nonsingular", |a| a[0][0] * a[1][1] != a[0][1] * a[1][0])
}

fn multigraph() -> impl Strategy<Value = (usize, Vec<(u32, u32, u8)>)> {
    (1usize..=5).prop_flat_map(|v| {
        let e = (0..v as u32, 0..v as u32, 0u8..=16);
        (Just(v), prop::collection::vec(e, 1..=6))
    })
}

fn build(v: usize, edges: &[(u32, u32, u8)]) -> Mdm {
    let mut m = Mdm::new(v);
    for &(t, h, l) in edges {
        m.add_edge(t, h, l as f64 / 4.0);
    }
    m
}

proptest! {
    #[test]
    fn hnf_spans_the_same_lattice(a in small_matrix()) {
        let h = hermite_normal_form(a).unwrap();
        let (p, r, q) = (h.p(), h.r(), h.q());
        prop_assert!(p > 0 && q > 0 && (0..q).contains(&r));
        let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).unsigned_abs();
        prop_assert_eq!(h.det, det);
        // columns of the input lie in the lattice; equal index means equal lattices
        prop_assert!(h.contains(a[0][0], a[1][0]));
        prop_assert!(h.contains(a[0][1], a[1][1]));
        // reducing a reduced basis is a fixed point
        prop_assert_eq!(hermite_normal_form(h.generator).unwrap(), h);
    }

    #[test]
    fn lattice_membership_is_closed_under_integer_combinations(
        a in small_matrix(), x in -30i64..=30, y in -30i64..=30
    ) {
        let h = hermite_normal_form(a).unwrap();
        let px = x * a[0][0] + y * a[0][1];
        let py = x * a[1][0] + y * a[1][1];
        prop_assert!(h.contains(px, py));
        prop_assert!(h.contains(px + h.p(), py + h.r()));
        prop_assert!(!h.contains(px + 1, py) || h.p() == 1);
    }

    #[test]
    fn main_lattice_contains_all_differences(pts in prop::collection::vec((-8i64..=8, -8i64..=8), 3..8)) {
        if let Ok(l) = main_lattice(&pts) {
            for &(x, y) in &pts {
                for &(u, v) in &pts {
                    prop_assert!(l.contains(x - u, y - v));
                }
            }
        }
    }

    #[test]
    fn pairing_keeps_degrees(degs in prop::collection::vec((0u32..4, 0u32..4), 1..30), seed in any::<u64>()) {
        let mut d_minus: Vec<u32> = degs.iter().map(|d| d.0).collect();
        let d_plus: Vec<u32> = degs.iter().map(|d| d.1).collect();
        // balance the totals on the first vertex
        let (si, so): (u32, u32) = (d_minus.iter().sum(), d_plus.iter().sum());
        if so >= si {
            d_minus[0] += so - si;
        } else {
            return Ok(());
        }
        let seq = DegreeSequence::new(d_minus.clone(), d_plus.clone()).unwrap();
        let g = pair_configuration(&seq, seed).unwrap();
        prop_assert_eq!(g.in_degrees(), d_minus);
        prop_assert_eq!(g.out_degrees(), d_plus);
        let (part, _) = digraph_sccs(&g);
        prop_assert_eq!(part.members().iter().map(|c| c.len()).sum::<usize>(), g.n);
    }

    #[test]
    fn weighted_find_matches_prefix_sums(w in prop::collection::vec(0u32..10, 1..50), frac in 0.0f64..1.0) {
        let t = WeightTree::new(&w);
        let total: u64 = w.iter().map(|&x| x as u64).sum();
        prop_assert_eq!(t.total(), total);
        if total > 0 {
            let target = ((frac * total as f64) as u64).min(total - 1);
            let i = t.find(target);
            let before: u64 = w[..i].iter().map(|&x| x as u64).sum();
            prop_assert!(before <= target && target < before + w[i] as u64);
        }
    }

    #[test]
    fn canonical_code_ignores_labels_and_edge_order((v, edges) in multigraph(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<u32> = (0..v as u32).collect();
        perm.shuffle(&mut rng);
        let mut moved: Vec<(u32, u32, u8)> = edges.iter().map(|&(t, h, l)| (perm[t as usize], perm[h as usize], l)).collect();
        moved.shuffle(&mut rng);
        let (a, b) = (build(v, &edges), build(v, &moved));
        let cap = SizeCap::default();
        prop_assert_eq!(canonical_code(&a, cap).unwrap(), canonical_code(&b, cap).unwrap());
        prop_assert_eq!(dg_distance(&a, &b), ExtDistance::Finite(0.0));
    }

    #[test]
    fn kernel_has_no_smoothable_vertices((v, edges) in multigraph()) {
        let m = build(v, &edges);
        let k = kernel(&m);
        let (din, dout) = k.degrees();
        for w in 0..k.vertex_count() {
            let one_one = din[w] == 1 && dout[w] == 1;
            let self_loop = k.edges.iter().any(|e| e.tail as usize == w && e.head as usize == w);
            prop_assert!(!one_one || self_loop);
        }
        prop_assert!((k.total_length() - m.total_length()).abs() < 1e-12);
    }

    #[test]
    fn ks_is_a_bounded_symmetric_distance(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40)
    ) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn compensated_sum_is_exact_on_integers(xs in prop::collection::vec(-1_000_000i64..1_000_000, 0..200)) {
        let exact: i64 = xs.iter().sum();
        prop_assert_eq!(compensated_sum(xs.iter().map(|&x| x as f64)), exact as f64);
    }
}
