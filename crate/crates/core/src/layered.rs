//! Signed layered graph `G_s`, walk-sign summaries and dilation analyses.
//!
//! Layer 0 holds a virtual root per input signal, layer 1 the input-attached
//! nodes, and layer `k + 1` every node reachable by a walk of length `k`.
//! Occurrences are stored once per `(node, layer)` with all incoming signed
//! edges; the number of distinct walks is kept as a multiplicity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{Sign, StructuredSystem};

/// Subset of `{Plus, Minus}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignSet {
    pub plus: bool,
    pub minus: bool,
}

impl SignSet {
    pub const EMPTY: SignSet = SignSet { plus: false, minus: false };

    pub fn single(s: Sign) -> SignSet {
        match s {
            Sign::Plus => SignSet { plus: true, minus: false },
            Sign::Minus => SignSet { plus: false, minus: true },
        }
    }

    pub fn is_empty(self) -> bool {
        !self.plus && !self.minus
    }

    pub fn is_mixed(self) -> bool {
        self.plus && self.minus
    }

    pub fn contains(self, s: Sign) -> bool {
        match s {
            Sign::Plus => self.plus,
            Sign::Minus => self.minus,
        }
    }

    pub fn insert(&mut self, s: Sign) {
        match s {
            Sign::Plus => self.plus = true,
            Sign::Minus => self.minus = true,
        }
    }

    pub fn union(self, o: SignSet) -> SignSet {
        SignSet { plus: self.plus || o.plus, minus: self.minus || o.minus }
    }

    /// Multiplies every element by `s`.
    pub fn times(self, s: Sign) -> SignSet {
        match s {
            Sign::Plus => self,
            Sign::Minus => SignSet { plus: self.minus, minus: self.plus },
        }
    }

    /// The unique element, if the set is a singleton.
    pub fn only(self) -> Option<Sign> {
        match (self.plus, self.minus) {
            (true, false) => Some(Sign::Plus),
            (false, true) => Some(Sign::Minus),
            _ => None,
        }
    }
}

/// Node occurrence at a layer. `in_edges` lists `(source node, edge sign)`
/// from the previous layer; source `0` is the virtual input root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub node: usize,
    pub layer: usize,
    pub in_edges: Vec<(usize, Sign)>,
    /// Number of distinct walks reaching this occurrence (saturating).
    pub walks: u128,
}

/// Layers `1..=depth` reached from one input signal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverLayers {
    /// 1-based signal index.
    pub driver: usize,
    /// `layers[k - 1]` holds the occurrences of layer `k`, sorted by node.
    pub layers: Vec<Vec<Occurrence>>,
}

impl DriverLayers {
    pub fn occurrence(&self, node: usize, layer: usize) -> Option<&Occurrence> {
        let l = self.layers.get(layer.checked_sub(1)?)?;
        l.binary_search_by_key(&node, |o| o.node).ok().map(|i| &l[i])
    }

    pub fn occurs(&self, node: usize, layer: usize) -> bool {
        self.occurrence(node, layer).is_some()
    }

    pub fn nodes_at(&self, layer: usize) -> Vec<usize> {
        self.layers
            .get(layer.wrapping_sub(1))
            .map(|l| l.iter().map(|o| o.node).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedLayeredGraph {
    pub depth: usize,
    pub per_driver: Vec<DriverLayers>,
}

/// `G_s` truncated at `n` layers.
pub fn build_layered(sys: &StructuredSystem) -> SignedLayeredGraph {
    build_layered_depth(sys, sys.n)
}

pub fn build_layered_depth(sys: &StructuredSystem, depth: usize) -> SignedLayeredGraph {
    let per_driver = (0..sys.input_count())
        .map(|l| {
            let mut layers: Vec<Vec<Occurrence>> = Vec::with_capacity(depth);
            let mut first: Vec<Occurrence> = sys
                .signal_inputs(l)
                .into_iter()
                .map(|inp| Occurrence {
                    node: inp.node,
                    layer: 1,
                    in_edges: vec![(0, inp.sign)],
                    walks: 1,
                })
                .collect();
            first.sort_by_key(|o| o.node);
            if depth >= 1 {
                layers.push(first);
            }
            for layer in 2..=depth {
                let prev = &layers[layer - 2];
                let mut next: BTreeMap<usize, Occurrence> = BTreeMap::new();
                for occ in prev {
                    for e in sys.out_edges(occ.node) {
                        let o = next.entry(e.dst).or_insert_with(|| Occurrence {
                            node: e.dst,
                            layer,
                            in_edges: Vec::new(),
                            walks: 0,
                        });
                        o.in_edges.push((occ.node, e.sign));
                        o.walks = o.walks.saturating_add(occ.walks);
                    }
                }
                layers.push(next.into_values().collect());
            }
            DriverLayers { driver: l + 1, layers }
        })
        .collect();
    SignedLayeredGraph { depth, per_driver }
}

/// Sign sets of walk products from each input signal: entry `(node, k, driver)`
/// is the set of signs over all walks of length `k`, the input sign included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkSignSummary {
    pub n: usize,
    pub depth: usize,
    pub drivers: usize,
    sets: Vec<SignSet>,
}

impl WalkSignSummary {
    fn idx(&self, node: usize, k: usize, driver: usize) -> usize {
        ((driver - 1) * self.depth + k) * (self.n + 1) + node
    }

    /// `driver` is 1-based; `k` is the walk length.
    pub fn get(&self, node: usize, k: usize, driver: usize) -> SignSet {
        if node == 0 || node > self.n || k >= self.depth || driver == 0 || driver > self.drivers {
            return SignSet::EMPTY;
        }
        self.sets[self.idx(node, k, driver)]
    }
}

pub fn walk_sign_sets(sys: &StructuredSystem) -> WalkSignSummary {
    walk_sign_sets_depth(sys, sys.n)
}

pub fn walk_sign_sets_depth(sys: &StructuredSystem, depth: usize) -> WalkSignSummary {
    let drivers = sys.input_count();
    let mut w = WalkSignSummary {
        n: sys.n,
        depth,
        drivers,
        sets: vec![SignSet::EMPTY; drivers * depth * (sys.n + 1)],
    };
    for l in 1..=drivers {
        if depth == 0 {
            break;
        }
        for inp in sys.signal_inputs(l - 1) {
            let i = w.idx(inp.node, 0, l);
            w.sets[i].insert(inp.sign);
        }
        for k in 1..depth {
            for e in &sys.edges {
                let from = w.sets[w.idx(e.src, k - 1, l)];
                let i = w.idx(e.dst, k, l);
                w.sets[i] = w.sets[i].union(from.times(e.sign));
            }
        }
    }
    w
}

/// Layers `k` whose outgoing edges into layer `k + 1` carry both signs.
/// Layer 0 is the input root, so mixed input signs report `0`. Edges leaving
/// the last layer are truncated and not considered.
pub fn detect_layer_dilations(gs: &SignedLayeredGraph) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for d in &gs.per_driver {
        for (idx, layer) in d.layers.iter().enumerate() {
            let mut signs = SignSet::EMPTY;
            for o in layer {
                for &(_, s) in &o.in_edges {
                    signs.insert(s);
                }
            }
            if signs.is_mixed() {
                out.insert(idx);
            }
        }
    }
    out
}

/// Out-neighbourhood of a node split by edge sign.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSets {
    pub all: BTreeSet<usize>,
    pub plus: BTreeSet<usize>,
    pub minus: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilationReport {
    /// A follower set `S` with fewer in-neighbours than members, if one exists.
    /// Informational only.
    pub classic_dilation: Option<Vec<usize>>,
    pub signed_dilation_nodes: BTreeSet<usize>,
    pub delta_sets: BTreeMap<usize, DeltaSets>,
    pub layer_dilations: BTreeSet<usize>,
}

pub fn delta_sets(sys: &StructuredSystem, i: usize) -> DeltaSets {
    let mut d = DeltaSets::default();
    for e in sys.out_edges(i) {
        d.all.insert(e.dst);
        match e.sign {
            Sign::Plus => d.plus.insert(e.dst),
            Sign::Minus => d.minus.insert(e.dst),
        };
    }
    d
}

/// Nodes with out-edges of both signs.
pub fn signed_dilation_nodes(sys: &StructuredSystem) -> BTreeSet<usize> {
    (1..=sys.n)
        .filter(|&i| {
            let d = delta_sets(sys, i);
            !d.plus.is_empty() && !d.minus.is_empty()
        })
        .collect()
}

pub fn signed_dilation_sets(sys: &StructuredSystem) -> DilationReport {
    DilationReport {
        classic_dilation: classic_dilation(sys),
        signed_dilation_nodes: signed_dilation_nodes(sys),
        delta_sets: (1..=sys.n).map(|i| (i, delta_sets(sys, i))).collect(),
        layer_dilations: detect_layer_dilations(&build_layered(sys)),
    }
}

/// Finds a set `S` of state nodes with `|T(S)| < |S|`, where `T(S)` are the
/// state or input vertices with an edge into `S`. Uses a maximum bipartite
/// matching and returns the Hall violator grown from an unmatched node.
pub fn classic_dilation(sys: &StructuredSystem) -> Option<Vec<usize>> {
    let n = sys.n;
    let m = sys.input_count();
    // Left vertices: 1..=n states, n+1..=n+m inputs. Right vertices: 1..=n states.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for e in &sys.edges {
        preds[e.dst].push(e.src);
    }
    for l in 0..m {
        for inp in sys.signal_inputs(l) {
            preds[inp.node].push(n + 1 + l);
        }
    }
    let mut left_match = vec![0usize; n + m + 1];
    let mut right_match = vec![0usize; n + 1];

    fn augment(
        r: usize,
        preds: &[Vec<usize>],
        seen: &mut [bool],
        left_match: &mut [usize],
        right_match: &mut [usize],
    ) -> bool {
        for &p in &preds[r] {
            if seen[p] {
                continue;
            }
            seen[p] = true;
            if left_match[p] == 0 || augment(left_match[p], preds, seen, left_match, right_match) {
                left_match[p] = r;
                right_match[r] = p;
                return true;
            }
        }
        false
    }

    for r in 1..=n {
        let mut seen = vec![false; n + m + 1];
        augment(r, &preds, &mut seen, &mut left_match, &mut right_match);
    }
    let free = (1..=n).find(|&r| right_match[r] == 0)?;
    // Alternating search from the free right vertex.
    let mut s = BTreeSet::from([free]);
    let mut seen_left = BTreeSet::new();
    let mut stack = vec![free];
    while let Some(r) = stack.pop() {
        for &p in &preds[r] {
            if seen_left.insert(p) {
                let r2 = left_match[p];
                if r2 != 0 && s.insert(r2) {
                    stack.push(r2);
                }
            }
        }
    }
    Some(s.into_iter().collect())
}

/// Members of `Δ_i` whose occurrence at `layer + 1` is entered only from node `i`.
pub fn delta_entries_through(
    sys: &StructuredSystem,
    d: &DriverLayers,
    i: usize,
    layer: usize,
) -> BTreeSet<usize> {
    if !d.occurs(i, layer) {
        return BTreeSet::new();
    }
    delta_sets(sys, i)
        .all
        .into_iter()
        .filter(|&j| {
            d.occurrence(j, layer + 1)
                .is_some_and(|o| o.in_edges.iter().all(|&(src, _)| src == i))
        })
        .collect()
}

fn edge_glyph(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "+",
        Sign::Minus => "\u{2212}",
    }
}

/// DOT rendering with one cluster per layer. `highlight` lists
/// `(driver, src, dst, layer)` edges drawn bold.
pub fn to_dot_with(gs: &SignedLayeredGraph, highlight: &BTreeSet<(usize, usize, usize, usize)>) -> String {
    let multi = gs.per_driver.len() > 1;
    let id = |d: usize, node: usize, layer: usize| {
        let base = if node == 0 { "u".to_string() } else { format!("v{node}") };
        if multi {
            format!("\"d{d}:{base}@L{layer}\"")
        } else {
            format!("\"{base}@L{layer}\"")
        }
    };
    let mut s = String::from("digraph Gs {\n  rankdir=TB;\n  node [shape=circle];\n");
    for d in &gs.per_driver {
        let dn = d.driver;
        let prefix = if multi { format!("d{dn}_") } else { String::new() };
        let _ = writeln!(s, "  subgraph cluster_{prefix}L0 {{\n    label=\"L0\";");
        let _ = writeln!(s, "    {} [label=\"u\", shape=point];\n  }}", id(dn, 0, 0));
        for (idx, layer) in d.layers.iter().enumerate() {
            let k = idx + 1;
            let _ = writeln!(s, "  subgraph cluster_{prefix}L{k} {{\n    label=\"L{k}\";");
            for o in layer {
                let _ = writeln!(s, "    {} [label=\"v{}@L{k}\"];", id(dn, o.node, k), o.node);
            }
            s.push_str("  }\n");
        }
        for (idx, layer) in d.layers.iter().enumerate() {
            let k = idx + 1;
            for o in layer {
                let mut ins = o.in_edges.clone();
                ins.sort();
                for (src, sign) in ins {
                    let bold = if highlight.contains(&(dn, src, o.node, k)) { ", penwidth=3" } else { "" };
                    let _ = writeln!(
                        s,
                        "  {} -> {} [label=\"{}\"{bold}];",
                        id(dn, src, k - 1),
                        id(dn, o.node, k),
                        edge_glyph(sign)
                    );
                }
            }
        }
    }
    s.push_str("}\n");
    s
}

pub fn to_dot(gs: &SignedLayeredGraph) -> String {
    to_dot_with(gs, &BTreeSet::new())
}
