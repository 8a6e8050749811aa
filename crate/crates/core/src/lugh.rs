//! Search for spanning LUG^H certificates.
//!
//! A certificate picks, for every node `j`, a designated column of the
//! controllability matrix (a layer of one driver's `G_s`) and a sign per
//! designated column. It is accepted only after an asymptotic check on a
//! two-level realization: edges in `weighted_edges` get magnitude `t`, all
//! others magnitude 1, and for `t -> inf` every entry of the controllability
//! matrix is dominated by its walks with the most weighted edges. With
//! designated columns scaled as `t^e_c` and the rest set to zero, node `j` is
//! positive in the limit iff its designated term outgrows every wrong-signed
//! term in its row. These are strict difference constraints on `e`, decided
//! with Bellman-Ford. An accepted certificate therefore always has a
//! realization with `C delta > 0`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{input_connected, is_directed_tree, InputMode, Sign, StructuredSystem};
use crate::layered::{
    build_layered, detect_layer_dilations, signed_dilation_nodes, walk_sign_sets, DriverLayers,
};

/// Default limit on `n` for the exponential search.
pub const DEFAULT_MAX_N: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// Only `+` edges leave the node in matching walks.
    #[serde(rename = "P")]
    UseP,
    /// Only `-` edges leave the node in matching walks.
    #[serde(rename = "N")]
    UseN,
    /// No matching edge leaves the node.
    #[serde(rename = "U")]
    Unused,
    /// Matching edges of both signs leave the node, at layers of opposite walk sign.
    #[serde(rename = "B")]
    Both,
}

/// Matching edge `src -> dst` entering `layer`; `src == 0` is the input root.
/// Serialized as `[src, dst, layer]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct KeptEdge {
    pub src: usize,
    pub dst: usize,
    pub layer: usize,
}

impl Serialize for KeptEdge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.src, self.dst, self.layer).serialize(s)
    }
}

impl Serialize for SignVec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.iter().map(|g| g.glyph()).collect::<Vec<_>>().serialize(s)
    }
}

/// Per-layer signs `sigma_1..sigma_depth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVec(pub Vec<Sign>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LughCertificate {
    /// 1-based driver; always 1 in single-input mode.
    pub driver: usize,
    /// `sigma[p - 1]` governs edges entering layer `p`; the matched sign at
    /// layer `p` is the product `sigma_1 ... sigma_p`.
    pub sigma: SignVec,
    pub sides: BTreeMap<usize, Side>,
    /// Node to designated (earliest used) layer.
    pub matched_at: BTreeMap<usize, usize>,
    pub kept_edges: Vec<KeptEdge>,
    /// Edges carrying the large magnitude in the witnessing realization.
    pub weighted_edges: Vec<(usize, usize)>,
}

impl LughCertificate {
    /// Product `sigma_1 ... sigma_p`.
    pub fn matched_sign(&self, layer: usize) -> Sign {
        self.sigma.0[..layer].iter().fold(Sign::Plus, |acc, &s| acc * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reason {
    TreeLayerDilation,
    UnresolvableSignedDilation,
    Inaccessible,
    SearchExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub unmatched: Vec<usize>,
    pub reasons: Vec<Reason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome")]
pub enum Verdict {
    #[serde(rename = "SSHerdable")]
    Herdable {
        /// One certificate per driver; together they cover every node.
        certificates: Vec<LughCertificate>,
        /// Further solutions, when all certificates were requested.
        #[serde(skip_serializing_if = "Vec::is_empty")]
        alternatives: Vec<Vec<LughCertificate>>,
    },
    #[serde(rename = "NotSSHerdable")]
    NotHerdable(Witness),
}

impl Verdict {
    pub fn is_herdable(&self) -> bool {
        matches!(self, Verdict::Herdable { .. })
    }

    pub fn certificates(&self) -> &[LughCertificate] {
        match self {
            Verdict::Herdable { certificates, .. } => certificates,
            Verdict::NotHerdable(_) => &[],
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::NotHerdable(w) => Some(w),
            Verdict::Herdable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("n = {n} exceeds the search limit {max}; raise it explicitly to proceed")]
    TooLarge { n: usize, max: usize },
    #[error("operation requires {0:?} mode")]
    WrongMode(InputMode),
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Collect every certificate with a minimal weighted-edge set.
    pub all_certs: bool,
    /// Number of layers; defaults to `n`.
    pub depth: Option<usize>,
    pub max_n: usize,
    /// Use the inaccessibility and tree shortcuts.
    pub fast_paths: bool,
    /// Upper bound on weighted-edge sets tried.
    pub subset_cap: usize,
    /// Upper bound on backtracking steps per weighted-edge set.
    pub step_budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            all_certs: false,
            depth: None,
            max_n: DEFAULT_MAX_N,
            fast_paths: true,
            subset_cap: 1 << 16,
            step_budget: 1 << 18,
        }
    }
}

/// Forward sweep over `G_s`: an occurrence at layer `p` is match-reachable iff
/// it has an incoming edge of sign `sigma_p` from a match-reachable occurrence
/// whose source respects `sides`. Returns each node's earliest such layer.
pub fn matched_set(
    gs: &DriverLayers,
    sigma: &[Sign],
    sides: &BTreeMap<usize, Side>,
) -> BTreeMap<usize, usize> {
    let allowed = |src: usize, s: Sign| match sides.get(&src) {
        None => true,
        Some(Side::UseP) => s == Sign::Plus,
        Some(Side::UseN) => s == Sign::Minus,
        Some(Side::Unused) => false,
        Some(Side::Both) => true,
    };
    let mut out = BTreeMap::new();
    let mut live: BTreeSet<usize> = BTreeSet::new();
    for (idx, layer) in gs.layers.iter().enumerate().take(sigma.len()) {
        let p = idx + 1;
        let want = sigma[idx];
        let next: BTreeSet<usize> = layer
            .iter()
            .filter(|o| {
                o.in_edges.iter().any(|&(src, s)| {
                    s == want && if p == 1 { src == 0 } else { live.contains(&src) && allowed(src, s) }
                })
            })
            .map(|o| o.node)
            .collect();
        for &v in &next {
            out.entry(v).or_insert(p);
        }
        live = next;
    }
    out
}

/// Decides SS herdability for a single-input system.
pub fn find_lugh(sys: &StructuredSystem, opts: &SearchOptions) -> Result<Verdict, SearchError> {
    if sys.mode != InputMode::SingleInput {
        return Err(SearchError::WrongMode(InputMode::SingleInput));
    }
    search(sys, opts)
}

/// Decides SS herdability with independent drivers: one certificate per driver,
/// jointly covering every node.
pub fn find_lugh_multi_driver(sys: &StructuredSystem, opts: &SearchOptions) -> Result<Verdict, SearchError> {
    if sys.mode != InputMode::MultiDriver {
        return Err(SearchError::WrongMode(InputMode::MultiDriver));
    }
    search(sys, opts)
}

/// Dispatches on the input mode.
pub fn decide(sys: &StructuredSystem, opts: &SearchOptions) -> Result<Verdict, SearchError> {
    search(sys, opts)
}

fn search(sys: &StructuredSystem, opts: &SearchOptions) -> Result<Verdict, SearchError> {
    if sys.n > opts.max_n {
        return Err(SearchError::TooLarge { n: sys.n, max: opts.max_n });
    }
    let depth = opts.depth.unwrap_or(sys.n);
    let (connected, unreachable) = input_connected(sys);
    if opts.fast_paths {
        if !connected {
            return Ok(not_herdable(unreachable, Reason::Inaccessible));
        }
        if let Some(w) = tree_shortcut(sys) {
            return Ok(Verdict::NotHerdable(w));
        }
    }

    let m = sys.input_count();
    let ncols = depth * m;
    let nedges = sys.edges.len();
    let mut best_unmatched: Option<Vec<usize>> = None;
    let mut exhausted = false;
    let mut found: Vec<Vec<LughCertificate>> = Vec::new();
    let mut tried = 0usize;

    'sizes: for size in 0..=nedges {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            tried += 1;
            if tried > opts.subset_cap {
                exhausted = true;
                break 'sizes;
            }
            let mut weighted = vec![false; nedges];
            for &e in &combo {
                weighted[e] = true;
            }
            match WalkCounts::new(sys, depth, &weighted) {
                None => exhausted = true,
                Some(walks) => {
                    let rows = walks.leading_rows();
                    let mut dom = Dominance::new(&rows, ncols, opts.step_budget);
                    match dom.solve() {
                        Some((designated, pi)) => {
                            let certs = build_certificates(sys, &walks, &weighted, &designated, &pi);
                            if !found.contains(&certs) {
                                found.push(certs);
                            }
                            if !opts.all_certs {
                                break 'sizes;
                            }
                        }
                        None => {
                            exhausted |= dom.out_of_budget;
                            let unmatched = dom.unmatched();
                            if best_unmatched.as_ref().is_none_or(|b| unmatched.len() < b.len()) {
                                best_unmatched = Some(unmatched);
                            }
                        }
                    }
                }
            }
            if !next_combo(&mut combo, nedges) {
                break;
            }
        }
        if !found.is_empty() {
            break;
        }
    }

    if !found.is_empty() {
        let certificates = found.remove(0);
        return Ok(Verdict::Herdable { certificates, alternatives: found });
    }
    let mut reasons = Vec::new();
    if !connected {
        reasons.push(Reason::Inaccessible);
    }
    if is_directed_tree(sys) && !detect_layer_dilations(&build_layered(sys)).is_empty() {
        reasons.push(Reason::TreeLayerDilation);
    }
    if !signed_dilation_nodes(sys).is_empty() {
        reasons.push(Reason::UnresolvableSignedDilation);
    }
    if exhausted || reasons.is_empty() {
        reasons.push(Reason::SearchExhausted);
    }
    let mut unmatched = best_unmatched.unwrap_or_default();
    if !connected {
        unmatched = unreachable;
    }
    if unmatched.is_empty() {
        unmatched = (1..=sys.n).collect();
    }
    Ok(Verdict::NotHerdable(Witness { unmatched, reasons }))
}

fn not_herdable(unmatched: Vec<usize>, r: Reason) -> Verdict {
    Verdict::NotHerdable(Witness { unmatched, reasons: vec![r] })
}

/// A directed tree with a layer dilation cannot be herded: the layer after the
/// first dilation holds nodes whose unique walks have opposite signs.
fn tree_shortcut(sys: &StructuredSystem) -> Option<Witness> {
    if !is_directed_tree(sys) {
        return None;
    }
    let gs = build_layered(sys);
    let first = *detect_layer_dilations(&gs).iter().next()?;
    let w = walk_sign_sets(sys);
    let d = &gs.per_driver[0];
    let nodes = d.nodes_at(first + 1);
    let reference = w.get(nodes[0], first, 1).only()?;
    let unmatched = nodes.into_iter().filter(|&v| w.get(v, first, 1).only() != Some(reference)).collect();
    Some(Witness { unmatched, reasons: vec![Reason::TreeLayerDilation] })
}

fn next_combo(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Signed walk counts split by the number of weighted edges on the walk.
struct WalkCounts {
    n: usize,
    m: usize,
    depth: usize,
    /// Index `((l * depth + k) * (n + 1) + j) * depth + a`.
    counts: Vec<i128>,
}

impl WalkCounts {
    fn new(sys: &StructuredSystem, depth: usize, weighted: &[bool]) -> Option<Self> {
        let n = sys.n;
        let m = sys.input_count();
        let mut w = WalkCounts { n, m, depth, counts: vec![0; m * depth * (n + 1) * depth.max(1)] };
        for l in 0..m {
            if depth == 0 {
                break;
            }
            for inp in sys.signal_inputs(l) {
                let i = w.idx(l, 0, inp.node, 0);
                w.counts[i] += i128::from(inp.sign.as_i8());
            }
            for k in 1..depth {
                for (e_idx, e) in sys.edges.iter().enumerate() {
                    let h = usize::from(weighted[e_idx]);
                    let s = i128::from(e.sign.as_i8());
                    for a in 0..depth - h {
                        let c = w.counts[w.idx(l, k - 1, e.src, a)];
                        if c != 0 {
                            let t = w.idx(l, k, e.dst, a + h);
                            w.counts[t] = w.counts[t].checked_add(s * c)?;
                        }
                    }
                }
            }
        }
        Some(w)
    }

    fn idx(&self, l: usize, k: usize, j: usize, a: usize) -> usize {
        ((l * self.depth + k) * (self.n + 1) + j) * self.depth + a
    }

    fn count(&self, l: usize, k: usize, j: usize, a: usize) -> i128 {
        self.counts[self.idx(l, k, j, a)]
    }

    /// Leading `(sign, exponent)` of entry `(j, k)` for driver `l`.
    fn leading(&self, l: usize, k: usize, j: usize) -> Option<(Sign, usize)> {
        (0..self.depth).rev().find_map(|a| {
            let c = self.count(l, k, j, a);
            (c != 0).then_some((if c > 0 { Sign::Plus } else { Sign::Minus }, a))
        })
    }

    /// Per node (index `j - 1`), the nonzero leading entries as `(column, sign, exponent)`.
    fn leading_rows(&self) -> Vec<Vec<(usize, Sign, i64)>> {
        (1..=self.n)
            .map(|j| {
                let mut r = Vec::new();
                for k in 0..self.depth {
                    for l in 0..self.m {
                        if let Some((s, a)) = self.leading(l, k, j) {
                            r.push((k * self.m + l, s, a as i64));
                        }
                    }
                }
                r
            })
            .collect()
    }
}

/// Backtracking over designated columns with difference constraints.
struct Dominance<'a> {
    rows: &'a [Vec<(usize, Sign, i64)>],
    order: Vec<usize>,
    ncols: usize,
    scale: i64,
    pi: Vec<Option<Sign>>,
    chosen: Vec<Option<(usize, i64)>>,
    cons: Vec<(usize, usize, i64)>,
    steps: usize,
    budget: usize,
    out_of_budget: bool,
    best_depth: usize,
}

impl<'a> Dominance<'a> {
    fn new(rows: &'a [Vec<(usize, Sign, i64)>], ncols: usize, budget: usize) -> Self {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by_key(|&j| (rows[j].len(), j));
        Dominance {
            rows,
            order,
            ncols,
            scale: rows.len() as i64 + 2,
            pi: vec![None; ncols],
            chosen: vec![None; rows.len()],
            cons: Vec::new(),
            steps: 0,
            budget,
            out_of_budget: false,
            best_depth: 0,
        }
    }

    /// Designated column per row and column signs.
    fn solve(&mut self) -> Option<(Vec<usize>, Vec<Option<Sign>>)> {
        if self.rec(0) {
            Some((self.chosen.iter().map(|c| c.expect("all rows assigned").0).collect(), self.pi.clone()))
        } else {
            None
        }
    }

    /// Rows left unassigned at the deepest point reached.
    fn unmatched(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.order[self.best_depth..].iter().map(|j| j + 1).collect();
        v.sort_unstable();
        v
    }

    fn consistent(&self) -> bool {
        let mut d = vec![0i64; self.ncols];
        for _ in 0..=self.ncols {
            let mut changed = false;
            for &(u, v, w) in &self.cons {
                if d[u] + w < d[v] {
                    d[v] = d[u] + w;
                    changed = true;
                }
            }
            if !changed {
                return true;
            }
        }
        false
    }

    fn rec(&mut self, idx: usize) -> bool {
        self.best_depth = self.best_depth.max(idx);
        if idx == self.order.len() {
            return true;
        }
        let j = self.order[idx];
        for &(c, s, a) in &self.rows[j] {
            if self.pi[c].is_some_and(|p| p != s) {
                continue;
            }
            self.steps += 1;
            if self.steps > self.budget {
                self.out_of_budget = true;
                return false;
            }
            let fresh = self.pi[c].is_none();
            self.pi[c] = Some(s);
            self.chosen[j] = Some((c, a));
            let mark = self.cons.len();
            for &(c2, s2, a2) in &self.rows[j] {
                if self.pi[c2].is_some_and(|p| p != s2) {
                    self.cons.push((c, c2, (a - a2) * self.scale - 1));
                }
            }
            if fresh {
                for (j2, ch) in self.chosen.iter().enumerate() {
                    let Some((c1, a1)) = *ch else { continue };
                    if j2 == j {
                        continue;
                    }
                    if let Some(&(_, s2, a2)) = self.rows[j2].iter().find(|e| e.0 == c) {
                        if s2 != s {
                            self.cons.push((c1, c, (a1 - a2) * self.scale - 1));
                        }
                    }
                }
            }
            if self.consistent() && self.rec(idx + 1) {
                return true;
            }
            self.cons.truncate(mark);
            self.chosen[j] = None;
            if fresh {
                self.pi[c] = None;
            }
            if self.out_of_budget {
                return false;
            }
        }
        false
    }
}

fn build_certificates(
    sys: &StructuredSystem,
    walks: &WalkCounts,
    weighted: &[bool],
    designated: &[usize],
    pi: &[Option<Sign>],
) -> Vec<LughCertificate> {
    let m = walks.m;
    let depth = walks.depth;
    let dil = signed_dilation_nodes(sys);
    let weighted_edges: Vec<(usize, usize)> =
        sys.edges.iter().zip(weighted).filter(|(_, &w)| w).map(|(e, _)| (e.src, e.dst)).collect();
    (0..m)
        .map(|l| {
            // Undesignated layers keep the previous walk sign.
            let mut walk_sign = Vec::with_capacity(depth);
            let mut prev = Sign::Plus;
            for k in 0..depth {
                let s = pi[k * m + l].unwrap_or(prev);
                walk_sign.push(s);
                prev = s;
            }
            let sigma: Vec<Sign> = (0..depth)
                .map(|k| if k == 0 { walk_sign[0] } else { walk_sign[k] * walk_sign[k - 1] })
                .collect();

            let mut matched_at = BTreeMap::new();
            let mut kept = Vec::new();
            for (j0, &c) in designated.iter().enumerate() {
                if c % m != l {
                    continue;
                }
                let j = j0 + 1;
                let k = c / m;
                matched_at.insert(j, k + 1);
                if k == 0 {
                    kept.push(KeptEdge { src: 0, dst: j, layer: 1 });
                    continue;
                }
                let (_, a) = walks.leading(l, k, j).expect("designated entries are nonzero");
                let want = walk_sign[k];
                let mut pick: Option<(bool, usize)> = None;
                for (e_idx, e) in sys.edges.iter().enumerate().filter(|(_, e)| e.dst == j) {
                    let h = usize::from(weighted[e_idx]);
                    if a < h {
                        continue;
                    }
                    let cnt = walks.count(l, k - 1, e.src, a - h);
                    if cnt == 0 || Sign::from_i8(cnt.signum() as i8) * e.sign != want {
                        continue;
                    }
                    let dominant = walks.leading(l, k - 1, e.src).is_some_and(|(_, a2)| a2 == a - h);
                    if pick.is_none_or(|(d, _)| dominant && !d) {
                        pick = Some((dominant, e.src));
                    }
                }
                if let Some((_, src)) = pick {
                    kept.push(KeptEdge { src, dst: j, layer: k + 1 });
                }
            }
            kept.sort();
            let sides = dil
                .iter()
                .map(|&i| {
                    let mut plus = false;
                    let mut minus = false;
                    for e in kept.iter().filter(|e| e.src == i) {
                        match sys.edge(i, e.dst).map(|x| x.sign) {
                            Some(Sign::Plus) => plus = true,
                            Some(Sign::Minus) => minus = true,
                            None => {}
                        }
                    }
                    let side = match (plus, minus) {
                        (true, true) => Side::Both,
                        (true, false) => Side::UseP,
                        (false, true) => Side::UseN,
                        (false, false) => Side::Unused,
                    };
                    (i, side)
                })
                .collect();
            LughCertificate {
                driver: l + 1,
                sigma: SignVec(sigma),
                sides,
                matched_at,
                kept_edges: kept,
                weighted_edges: weighted_edges.clone(),
            }
        })
        .collect()
}
