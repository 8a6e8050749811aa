#![allow(dead_code)]

use std::collections::BTreeMap;

use herdnet::graph::{reachable, InputAttachment, InputMode, Sign, SignedEdge, StructuredSystem};
use herdnet::layered::SignSet;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

pub use Sign::{Minus as M, Plus as P};

pub fn leader1(n: usize, e: &[(usize, usize, Sign)]) -> StructuredSystem {
    StructuredSystem::leader_one(n, e).unwrap()
}

pub fn two_path() -> StructuredSystem {
    leader1(6, &[(1, 2, P), (2, 3, P), (2, 4, P), (3, 5, M), (4, 5, P), (4, 6, M)])
}

pub fn stub() -> StructuredSystem {
    leader1(3, &[(1, 2, P)])
}

pub fn g2() -> StructuredSystem {
    leader1(5, &[(1, 2, P), (2, 3, P), (2, 4, P), (2, 5, M), (3, 5, P), (4, 5, M)])
}

pub fn g3() -> StructuredSystem {
    leader1(5, &[(1, 2, P), (1, 3, P), (2, 3, P), (3, 2, M), (2, 4, M), (2, 5, P), (3, 4, P), (3, 5, M)])
}

pub fn g4() -> StructuredSystem {
    leader1(7, &[(1, 2, P), (2, 3, M), (2, 4, M), (3, 5, P), (3, 7, P), (4, 6, P), (5, 4, M), (6, 5, P)])
}

pub fn g5() -> StructuredSystem {
    leader1(6, &[(1, 2, M), (1, 3, M), (2, 4, M), (2, 5, P), (2, 6, M), (3, 6, P)])
}

pub fn g6() -> StructuredSystem {
    leader1(6, &[(1, 2, M), (1, 3, M), (2, 4, M), (2, 5, P), (2, 6, M), (3, 6, P), (5, 2, M)])
}

pub fn g7() -> StructuredSystem {
    leader1(5, &[(1, 2, P), (1, 3, P), (2, 3, P), (3, 2, M), (2, 4, M), (3, 5, M)])
}

pub fn g8() -> StructuredSystem {
    leader1(6, &[(1, 2, P), (1, 3, M), (2, 4, P), (2, 5, P), (3, 4, M), (3, 6, P), (5, 3, M)])
}

pub const S_C2: &[&[&str]] = &[
    &["+", "0", "0", "0", "0"],
    &["0", "+", "0", "0", "0"],
    &["0", "0", "+", "0", "0"],
    &["0", "0", "+", "0", "0"],
    &["0", "0", "-", "+/-", "0"],
];

pub const S_C3: &[&[&str]] = &[
    &["+", "0", "0", "0", "0"],
    &["0", "+", "-", "-", "+"],
    &["0", "+", "+", "-", "-"],
    &["0", "0", "+/-", "+", "+/-"],
    &["0", "0", "+/-", "-", "+/-"],
];

pub const S_C5: &[&[&str]] = &[
    &["+", "0", "0", "0", "0", "0"],
    &["0", "-", "0", "0", "0", "0"],
    &["0", "-", "0", "0", "0", "0"],
    &["0", "0", "+", "0", "0", "0"],
    &["0", "0", "-", "0", "0", "0"],
    &["0", "0", "+/-", "0", "0", "0"],
];

pub const S_C6: &[&[&str]] = &[
    &["+", "0", "0", "0", "0", "0"],
    &["0", "-", "0", "+", "0", "-"],
    &["0", "-", "0", "0", "0", "0"],
    &["0", "0", "+", "0", "-", "0"],
    &["0", "0", "-", "0", "+", "0"],
    &["0", "0", "+/-", "0", "-", "0"],
];

fn sign<R: Rng>(rng: &mut R) -> Sign {
    if rng.random_bool(0.5) {
        P
    } else {
        M
    }
}

/// Leader 1 (+), `2..=nmax` nodes, each ordered pair an edge with probability `p`
/// (`ploop` for self-loops).
pub fn random_system<R: Rng>(rng: &mut R, nmax: usize, p: f64, ploop: f64) -> StructuredSystem {
    let n = rng.random_range(2..=nmax);
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            let pr = if i == j { ploop } else { p };
            if rng.random_bool(pr) {
                edges.push(SignedEdge::new(i, j, sign(rng)));
            }
        }
    }
    StructuredSystem::new(n, InputMode::SingleInput, vec![InputAttachment::new(1, P)], edges).unwrap()
}

pub fn random_connected<R: Rng>(rng: &mut R, nmax: usize, p: f64, ploop: f64) -> StructuredSystem {
    loop {
        let s = random_system(rng, nmax, p, ploop);
        if reachable(&s).len() == s.n {
            return s;
        }
    }
}

/// Random recursive tree rooted at the leader (node 1) with random signs.
pub fn random_tree<R: Rng>(rng: &mut R, nmax: usize) -> StructuredSystem {
    let n = rng.random_range(2..=nmax);
    let mut labels: Vec<usize> = (2..=n).collect();
    labels.shuffle(rng);
    let mut order = vec![1];
    order.extend(labels);
    let edges = (1..n)
        .map(|k| {
            let parent = order[rng.random_range(0..k)];
            SignedEdge::new(parent, order[k], sign(rng))
        })
        .collect();
    StructuredSystem::new(n, InputMode::SingleInput, vec![InputAttachment::new(1, P)], edges).unwrap()
}

pub fn random_positive_connected<R: Rng>(rng: &mut R, nmax: usize) -> StructuredSystem {
    loop {
        let n = rng.random_range(1..=nmax);
        let mut edges = Vec::new();
        for i in 1..=n {
            for j in 1..=n {
                if rng.random_bool(if i == j { 0.1 } else { 0.3 }) {
                    edges.push(SignedEdge::new(i, j, P));
                }
            }
        }
        let s = StructuredSystem::new(n, InputMode::SingleInput, vec![InputAttachment::new(1, P)], edges).unwrap();
        if reachable(&s).len() == n {
            return s;
        }
    }
}

/// Two independent drivers at distinct nodes with random signs.
pub fn random_two_driver<R: Rng>(rng: &mut R, nmax: usize) -> StructuredSystem {
    let n = rng.random_range(2..=nmax);
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            if rng.random_bool(if i == j { 0.1 } else { 0.3 }) {
                edges.push(SignedEdge::new(i, j, sign(rng)));
            }
        }
    }
    let mut nodes: Vec<usize> = (1..=n).collect();
    nodes.shuffle(rng);
    let inputs = vec![InputAttachment::new(nodes[0], sign(rng)), InputAttachment::new(nodes[1], sign(rng))];
    StructuredSystem::new(n, InputMode::MultiDriver, inputs, edges).unwrap()
}

pub fn random_two_driver_connected<R: Rng>(rng: &mut R, nmax: usize) -> StructuredSystem {
    loop {
        let s = random_two_driver(rng, nmax);
        if reachable(&s).len() == s.n {
            return s;
        }
    }
}

/// `rows x cols` matrix with entries `±U[0.1, 10]`, each zero with probability `zero_p`.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, zero_p: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        if rng.random_bool(zero_p) {
            0.0
        } else {
            let v = rng.random_range(0.1..10.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        }
    })
}

/// Brute-force walk enumeration: sign sets of all walks of each length from
/// each driver. Key `(node, k, driver)`.
pub fn enumerate_walk_signs(sys: &StructuredSystem, depth: usize) -> BTreeMap<(usize, usize, usize), SignSet> {
    let mut out: BTreeMap<(usize, usize, usize), SignSet> = BTreeMap::new();
    fn walk(
        sys: &StructuredSystem,
        node: usize,
        k: usize,
        sign: Sign,
        depth: usize,
        driver: usize,
        out: &mut BTreeMap<(usize, usize, usize), SignSet>,
    ) {
        out.entry((node, k, driver)).or_default().insert(sign);
        if k + 1 >= depth {
            return;
        }
        for e in sys.edges.iter().filter(|e| e.src == node) {
            walk(sys, e.dst, k + 1, sign * e.sign, depth, driver, out);
        }
    }
    for l in 0..sys.input_count() {
        for inp in sys.signal_inputs(l) {
            walk(sys, inp.node, 0, inp.sign, depth, l + 1, &mut out);
        }
    }
    out
}

/// Controllability matrix by summing walk products directly.
pub fn walk_sum_matrix(sys: &StructuredSystem, edge_mag: &[f64], input_mag: &[f64]) -> DMatrix<f64> {
    let n = sys.n;
    let m = sys.input_count();
    let mut c = DMatrix::zeros(n, n * m);
    fn walk(
        sys: &StructuredSystem,
        mags: &[f64],
        node: usize,
        k: usize,
        val: f64,
        col: &mut dyn FnMut(usize, usize, f64),
    ) {
        col(node, k, val);
        if k + 1 >= sys.n {
            return;
        }
        for (e, w) in sys.edges.iter().zip(mags).filter(|(e, _)| e.src == node) {
            walk(sys, mags, e.dst, k + 1, val * e.sign.as_f64() * w, col);
        }
    }
    for (idx, inp) in sys.inputs.iter().enumerate() {
        let l = if m == 1 { 0 } else { idx };
        let mut add = |node: usize, k: usize, v: f64| c[(node - 1, k * m + l)] += v;
        walk(sys, edge_mag, inp.node, 0, inp.sign.as_f64() * input_mag[idx], &mut add);
    }
    c
}
