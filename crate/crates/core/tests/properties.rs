mod common;

use std::collections::BTreeSet;

use common::*;
use herdnet::graph::{input_connected, is_directed_tree, parse_system, SignedEdge, StructuredSystem};
use herdnet::layered::{build_layered, build_layered_depth, walk_sign_sets};
use herdnet::numeric::{
    certify, controllability_matrix, controllability_matrix_depth, herdable_numeric, iterative_herdable_set,
    realize_with, Scheme, TOL,
};
use herdnet::sign::{layer_column_consistency, qsign_add, qsign_mul, sscm, sscm_depth, QSign};
use herdnet::{decide, SearchOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn system(seed: u64) -> StructuredSystem {
    let mut r = rng(seed);
    if r.random_bool(0.2) {
        random_two_driver(&mut r, 5)
    } else {
        random_system(&mut r, 6, 0.3, 0.1)
    }
}

fn magnitudes(r: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| r.random_range(0.1..10.0)).collect()
}

/// Integer characteristic polynomial coefficients `c_0..c_{n-1}` (monic) of an
/// integer-valued matrix, by Faddeev-LeVerrier.
fn char_poly(a: &nalgebra::DMatrix<f64>) -> Vec<i128> {
    let n = a.nrows();
    let a: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] as i128).collect()).collect();
    let mul = |x: &Vec<Vec<i128>>, y: &Vec<Vec<i128>>| -> Vec<Vec<i128>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|t| x[i][t] * y[t][j]).sum()).collect()).collect()
    };
    let mut coef = vec![0i128; n + 1];
    coef[n] = 1;
    let mut mk = vec![vec![0i128; n]; n];
    for k in 1..=n {
        let mut next = mul(&a, &mk);
        for (d, row) in next.iter_mut().enumerate() {
            row[d] += coef[n - k + 1];
        }
        mk = next;
        let am = mul(&a, &mk);
        let tr: i128 = (0..n).map(|d| am[d][d]).sum();
        coef[n - k] = -tr / k as i128;
    }
    coef.truncate(n);
    coef
}

const Q: [QSign; 4] = [QSign::Zero, QSign::Plus, QSign::Minus, QSign::Indet];

#[test]
fn semiring_laws_exhaustive() {
    for a in Q {
        assert_eq!(qsign_add(a, QSign::Zero), a);
        assert_eq!(qsign_mul(a, QSign::Plus), a);
        assert_eq!(qsign_mul(a, QSign::Zero), QSign::Zero);
        for b in Q {
            assert_eq!(qsign_add(a, b), qsign_add(b, a));
            assert_eq!(qsign_mul(a, b), qsign_mul(b, a));
            for c in Q {
                assert_eq!(qsign_add(qsign_add(a, b), c), qsign_add(a, qsign_add(b, c)));
                assert_eq!(qsign_mul(qsign_mul(a, b), c), qsign_mul(a, qsign_mul(b, c)));
                assert_eq!(qsign_mul(a, qsign_add(b, c)), qsign_add(qsign_mul(a, b), qsign_mul(a, c)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn edge_list_round_trip(seed in any::<u64>()) {
        let sys = system(seed);
        prop_assert_eq!(parse_system(&sys.to_edge_list()).unwrap(), sys);
    }

    #[test]
    fn walk_signs_match_enumeration(seed in any::<u64>()) {
        let sys = system(seed);
        let brute = enumerate_walk_signs(&sys, sys.n);
        let w = walk_sign_sets(&sys);
        let s = sscm(&sys);
        for node in 1..=sys.n {
            for k in 0..sys.n {
                for d in 1..=sys.input_count() {
                    let want = brute.get(&(node, k, d)).copied().unwrap_or_default();
                    prop_assert_eq!(w.get(node, k, d), want);
                    prop_assert_eq!(s.get(node, s.col_index(k, d)), QSign::from(want));
                }
            }
        }
    }

    #[test]
    fn layers_agree_with_columns(seed in any::<u64>()) {
        let sys = system(seed);
        prop_assert!(layer_column_consistency(&build_layered(&sys), &sscm(&sys)));
    }

    #[test]
    fn realizations_lie_in_sign_pattern(seed in any::<u64>()) {
        let sys = system(seed);
        let mut r = rng(seed ^ 0x5eed);
        let (e, i) = (magnitudes(&mut r, sys.edges.len()), magnitudes(&mut r, sys.inputs.len()));
        let c = controllability_matrix(&realize_with(&sys, &e, &i));
        let brute = walk_sum_matrix(&sys, &e, &i);
        let s = sscm(&sys);
        for row in 0..sys.n {
            for col in 0..c.ncols() {
                prop_assert!(s.get(row + 1, col).admits(c[(row, col)]));
                let scale = brute.column(col).amax().max(1.0);
                prop_assert!((c[(row, col)] - brute[(row, col)]).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn trees_have_no_indeterminate_entries(seed in any::<u64>()) {
        let sys = random_tree(&mut rng(seed), 10);
        prop_assert!(is_directed_tree(&sys));
        let s = sscm(&sys);
        for row in 1..=sys.n {
            prop_assert!(s.row(row).iter().all(|&q| q != QSign::Indet));
        }
    }

    #[test]
    fn sign_matrix_prefix_stable(seed in any::<u64>()) {
        let sys = system(seed);
        let short = sscm_depth(&sys, sys.n);
        let long = sscm_depth(&sys, sys.n + 2);
        for row in 1..=sys.n {
            prop_assert_eq!(short.row(row), &long.row(row)[..short.cols]);
        }
        let g = build_layered_depth(&sys, sys.n + 2);
        prop_assert!(layer_column_consistency(&g, &long));
    }

    #[test]
    fn adding_edges_keeps_connectivity(seed in any::<u64>(), a in any::<usize>(), b in any::<usize>(), neg in any::<bool>()) {
        let sys = system(seed);
        let (src, dst) = (a % sys.n + 1, b % sys.n + 1);
        if sys.edge(src, dst).is_some() {
            return Ok(());
        }
        let mut edges = sys.edges.clone();
        edges.push(SignedEdge::new(src, dst, if neg { M } else { P }));
        let bigger = StructuredSystem::new(sys.n, sys.mode, sys.inputs.clone(), edges).unwrap();
        let (_, before) = input_connected(&sys);
        let (_, after) = input_connected(&bigger);
        let before: BTreeSet<usize> = before.into_iter().collect();
        prop_assert!(after.iter().all(|v| before.contains(v)));
    }

    #[test]
    fn next_block_follows_characteristic_polynomial(seed in any::<u64>()) {
        let sys = system(seed);
        let mut r = rng(seed ^ 0xcafe);
        let e: Vec<f64> = (0..sys.edges.len()).map(|_| r.random_range(1..=3) as f64).collect();
        let i: Vec<f64> = (0..sys.inputs.len()).map(|_| r.random_range(1..=3) as f64).collect();
        let re = realize_with(&sys, &e, &i);
        let n = sys.n;
        let m = sys.input_count();
        let coef = char_poly(&re.a);
        let c = controllability_matrix_depth(&re, n + 1);
        for row in 0..n {
            for l in 0..m {
                let combo: i128 = (0..n).map(|k| coef[k] * c[(row, k * m + l)] as i128).sum();
                prop_assert_eq!(c[(row, n * m + l)] as i128, -combo);
            }
        }
    }

    #[test]
    fn gordan_exclusive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rows = r.random_range(1..=8);
        let cols = r.random_range(1..=8);
        let c = random_matrix(&mut r, rows, cols, 0.4);
        let res = herdable_numeric(&c).unwrap();
        prop_assert!(res.verify(&c, TOL));
    }

    #[test]
    fn iterative_set_is_herdable(seed in any::<u64>()) {
        let sys = system(seed);
        let mut r = rng(seed ^ 0xbeef);
        let (e, i) = (magnitudes(&mut r, sys.edges.len()), magnitudes(&mut r, sys.inputs.len()));
        let c = controllability_matrix(&realize_with(&sys, &e, &i));
        let h = iterative_herdable_set(&c);
        prop_assert!(h.iter().all(|&v| (1..=sys.n).contains(&v)));
        if h.len() == sys.n {
            prop_assert!(herdable_numeric(&c).unwrap().is_feasible());
        }
        // A row with no nonzero entry can never join.
        for row in 0..sys.n {
            if c.row(row).iter().all(|&x| x == 0.0) {
                prop_assert!(!h.contains(&(row + 1)));
            }
        }
    }

    #[test]
    fn certificates_are_consistent(seed in any::<u64>()) {
        let sys = system(seed);
        let v = decide(&sys, &SearchOptions::default()).unwrap();
        if !v.is_herdable() {
            let w = v.witness().unwrap();
            prop_assert!(!w.reasons.is_empty());
            return Ok(());
        }
        let s = sscm(&sys);
        let mut covered = BTreeSet::new();
        for cert in v.certificates() {
            prop_assert_eq!(cert.sigma.0.len(), sys.n);
            for (&node, &layer) in &cert.matched_at {
                prop_assert!(covered.insert(node));
                let q = s.get(node, s.col_index(layer - 1, cert.driver));
                prop_assert!(q.admits(cert.matched_sign(layer).as_f64()), "node {} layer {}", node, layer);
            }
            for e in &cert.kept_edges {
                prop_assert!(e.layer >= 1);
                if e.src != 0 {
                    prop_assert!(sys.edge(e.src, e.dst).is_some());
                }
            }
            for &(a, b) in &cert.weighted_edges {
                prop_assert!(sys.edge(a, b).is_some());
            }
        }
        prop_assert_eq!(covered.len(), sys.n);
        let b = certify(&sys, v.certificates(), Scheme::default()).unwrap();
        prop_assert!(b.delta.image.iter().all(|&x| x >= 1.0 - TOL));
    }

    #[test]
    fn tree_shortcut_agrees_with_search(seed in any::<u64>()) {
        let sys = random_tree(&mut rng(seed), 7);
        let fast = decide(&sys, &SearchOptions::default()).unwrap();
        let slow = decide(&sys, &SearchOptions { fast_paths: false, ..SearchOptions::default() }).unwrap();
        prop_assert_eq!(fast.is_herdable(), slow.is_herdable());
    }

    #[test]
    fn positive_graphs_are_herdable(seed in any::<u64>()) {
        let sys = random_positive_connected(&mut rng(seed), 6);
        let v = decide(&sys, &SearchOptions::default()).unwrap();
        prop_assert!(v.is_herdable());
        prop_assert!(v.certificates()[0].sigma.0.iter().all(|&s| s == P));
    }
}
