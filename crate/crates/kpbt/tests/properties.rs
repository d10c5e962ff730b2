//! Property tests for the structural invariants.

use kpbt::examples::{build_random_stable, scalar_cascade};
use kpbt::quadgrid::{build_grid, trapezoid_widths, MultiIndexMap};
use kpbt::transfer::{conj_tuple, eval_hk};
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// encode/decode of the multi-index maps is a bijection.
    #[test]
    fn index_maps_round_trip(gammas in prop::collection::vec(1usize..=3, 1..=3)) {
        let gammas: Vec<usize> = gammas.into_iter().map(|g| 2 * g).collect();
        // magnitude-disjoint ranges so no node count can collide
        let grid = build_grid(&gammas, (0.5, 0.9), (1.3, 4.1)).unwrap();
        let maps = MultiIndexMap::new(&grid);
        for j in 0..gammas.len() {
            for h in 0..maps.row_len(j) {
                prop_assert_eq!(maps.encode_row(j, &maps.decode_row(j, h)), h);
            }
            for l in 0..maps.col_len(j) {
                prop_assert_eq!(maps.encode_col(j, &maps.decode_col(j, l)), l);
            }
        }
    }

    /// Conjugating the tuple conjugates the transfer value.
    #[test]
    fn transfer_conjugate_symmetry(w1 in -10.0f64..10.0, w2 in -10.0f64..10.0) {
        let sys = scalar_cascade();
        let t = [Complex64::new(0.0, w1), Complex64::new(0.0, w2)];
        let a = eval_hk(&sys, &conj_tuple(&t)).unwrap();
        let b = eval_hk(&sys, &t).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-12));
    }

    /// Trapezoid widths tile the node span.
    #[test]
    fn trapezoid_widths_cover_span(raw in prop::collection::vec(0.01f64..10.0, 2..=12)) {
        let mut nodes = raw;
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        prop_assume!(nodes.len() >= 2);
        let w = trapezoid_widths(&nodes).unwrap();
        let sum: f64 = w.iter().sum();
        let span = nodes.last().unwrap() - nodes.first().unwrap();
        prop_assert!((sum - span).abs() <= 1e-12 * span.max(1.0));
    }

    /// Grid node sets are closed under negation with pair-equal weights.
    #[test]
    fn grid_mirror_symmetry(half in 1usize..=6, lo in 0.01f64..0.1, span in 1.0f64..100.0) {
        let gamma = 2 * half;
        let grid = build_grid(&[gamma], (lo, lo * span), (2.0 * lo, 2.0 * lo * span)).unwrap();
        let level = grid.level(0);
        for i in 0..half {
            prop_assert_eq!(level.lambda()[i], -level.lambda()[i + half]);
            prop_assert_eq!(level.mu()[i], -level.mu()[i + half]);
            prop_assert_eq!(level.rho()[i], level.rho()[i + half]);
            prop_assert_eq!(level.phi()[i], level.phi()[i + half]);
        }
    }

    /// Block assembly followed by extraction is the identity on matrix data.
    #[test]
    fn block_round_trip(seed in 0u64..500, k in 1usize..=3) {
        let dims: Vec<usize> = (0..k).map(|j| 2 + (seed as usize + j) % 3).collect();
        let sys = build_random_stable(k, &dims, seed).unwrap();
        let back = sys.assemble_block().extract_blocks().unwrap();
        for j in 0..k {
            prop_assert_eq!(back.a(j), sys.a(j));
        }
        for j in 0..k.saturating_sub(1) {
            prop_assert_eq!(back.coupling(j), sys.coupling(j));
        }
        prop_assert_eq!(back.b1(), sys.b1());
        prop_assert_eq!(back.ck(), sys.ck());
    }
}
