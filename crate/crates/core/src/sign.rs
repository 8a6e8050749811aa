//! Qualitative sign semiring and the sign-structured controllability matrix.

use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{Sign, StructuredSystem};
use crate::layered::{SignSet, SignedLayeredGraph};

/// Element of `{0, +, -, +/-}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QSign {
    Zero,
    Plus,
    Minus,
    Indet,
}

impl QSign {
    pub const ALL: [QSign; 4] = [QSign::Zero, QSign::Plus, QSign::Minus, QSign::Indet];

    pub fn glyph(self) -> &'static str {
        match self {
            QSign::Zero => "0",
            QSign::Plus => "+",
            QSign::Minus => "-",
            QSign::Indet => "+/-",
        }
    }

    pub fn from_glyph(s: &str) -> Option<QSign> {
        match s {
            "0" => Some(QSign::Zero),
            "+" => Some(QSign::Plus),
            "-" => Some(QSign::Minus),
            "+/-" | "±" => Some(QSign::Indet),
            _ => None,
        }
    }

    pub fn is_zero(self) -> bool {
        self == QSign::Zero
    }

    /// Whether a real number of sign `x` is allowed by this entry.
    pub fn admits(self, x: f64) -> bool {
        match self {
            QSign::Zero => x == 0.0,
            QSign::Plus => x > 0.0,
            QSign::Minus => x < 0.0,
            QSign::Indet => true,
        }
    }
}

impl From<Sign> for QSign {
    fn from(s: Sign) -> QSign {
        match s {
            Sign::Plus => QSign::Plus,
            Sign::Minus => QSign::Minus,
        }
    }
}

impl From<SignSet> for QSign {
    fn from(s: SignSet) -> QSign {
        match (s.plus, s.minus) {
            (false, false) => QSign::Zero,
            (true, false) => QSign::Plus,
            (false, true) => QSign::Minus,
            (true, true) => QSign::Indet,
        }
    }
}

pub fn qsign_add(a: QSign, b: QSign) -> QSign {
    use QSign::*;
    match (a, b) {
        (Zero, x) | (x, Zero) => x,
        (Plus, Plus) => Plus,
        (Minus, Minus) => Minus,
        _ => Indet,
    }
}

pub fn qsign_mul(a: QSign, b: QSign) -> QSign {
    use QSign::*;
    match (a, b) {
        (Zero, _) | (_, Zero) => Zero,
        (Indet, _) | (_, Indet) => Indet,
        (Plus, x) | (x, Plus) => x,
        (Minus, Minus) => Plus,
    }
}

impl Add for QSign {
    type Output = QSign;
    fn add(self, rhs: QSign) -> QSign {
        qsign_add(self, rhs)
    }
}

impl Mul for QSign {
    type Output = QSign;
    fn mul(self, rhs: QSign) -> QSign {
        qsign_mul(self, rhs)
    }
}

impl fmt::Display for QSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.glyph())
    }
}

impl Serialize for QSign {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.glyph())
    }
}

impl<'de> Deserialize<'de> for QSign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        QSign::from_glyph(&s).ok_or_else(|| serde::de::Error::custom(format!("bad sign glyph {s:?}")))
    }
}

/// Matrix over [`QSign`]. Column `c` (0-based) is block `k = c / m`, driver `c % m + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    pub rows: usize,
    pub m: usize,
    pub cols: usize,
    entries: Vec<QSign>,
}

impl SignMatrix {
    pub fn zeros(rows: usize, cols: usize, m: usize) -> Self {
        SignMatrix { rows, m, cols, entries: vec![QSign::Zero; rows * cols] }
    }

    /// Builds from rows of glyphs; `m` is the block width.
    pub fn from_glyphs(rows: &[&[&str]], m: usize) -> Option<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut s = SignMatrix::zeros(rows.len(), cols, m);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return None;
            }
            for (c, g) in r.iter().enumerate() {
                s.set(i + 1, c, QSign::from_glyph(g)?);
            }
        }
        Some(s)
    }

    /// `row` is a 1-based node, `col` a 0-based column.
    pub fn get(&self, row: usize, col: usize) -> QSign {
        self.entries[(row - 1) * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: QSign) {
        self.entries[(row - 1) * self.cols + col] = v;
    }

    /// Column index of block `k` (walk length) for 1-based `driver`.
    pub fn col_index(&self, k: usize, driver: usize) -> usize {
        k * self.m + (driver - 1)
    }

    pub fn row(&self, row: usize) -> &[QSign] {
        &self.entries[(row - 1) * self.cols..row * self.cols]
    }

    pub fn to_glyph_grid(&self) -> Vec<Vec<&'static str>> {
        (1..=self.rows).map(|r| self.row(r).iter().map(|q| q.glyph()).collect()).collect()
    }

    /// Aligned text rendering, one row per line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in 1..=self.rows {
            let cells: Vec<String> = self.row(r).iter().map(|q| format!("{q:>3}")).collect();
            s.push_str(&format!("{r:>3} | {}\n", cells.join(" ")));
        }
        s
    }
}

impl Serialize for SignMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_glyph_grid().serialize(s)
    }
}

/// Sign-structured controllability matrix, `n` blocks of `m` columns.
pub fn sscm(sys: &StructuredSystem) -> SignMatrix {
    sscm_depth(sys, sys.n)
}

/// Same as [`sscm`] with `depth` column blocks, computed as
/// `S(A)^k S(B_l)` over the sign semiring.
pub fn sscm_depth(sys: &StructuredSystem, depth: usize) -> SignMatrix {
    let n = sys.n;
    let m = sys.input_count();
    let mut out = SignMatrix::zeros(n, depth * m, m);
    for l in 1..=m {
        let mut v = vec![QSign::Zero; n + 1];
        for inp in sys.signal_inputs(l - 1) {
            v[inp.node] = v[inp.node] + QSign::from(inp.sign);
        }
        for k in 0..depth {
            let c = out.col_index(k, l);
            for (node, q) in v.iter().enumerate().skip(1) {
                out.set(node, c, *q);
            }
            let mut next = vec![QSign::Zero; n + 1];
            for e in &sys.edges {
                next[e.dst] = next[e.dst] + QSign::from(e.sign) * v[e.src];
            }
            v = next;
        }
    }
    out
}

/// True iff every nonzero entry `(i, k, l)` corresponds to an occurrence of
/// `i` at layer `k + 1` of driver `l`'s layered graph, and vice versa.
pub fn layer_column_consistency(gs: &SignedLayeredGraph, s: &SignMatrix) -> bool {
    if s.m != gs.per_driver.len() || s.cols != gs.depth * s.m {
        return false;
    }
    gs.per_driver.iter().all(|d| {
        (0..gs.depth).all(|k| {
            (1..=s.rows).all(|i| !s.get(i, s.col_index(k, d.driver)).is_zero() == d.occurs(i, k + 1))
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("node {0} out of range")]
pub struct NodeOutOfRange(pub usize);

/// Whether row `j` has a nonzero entry.
pub fn herdable_follower(s: &SignMatrix, j: usize) -> Result<bool, NodeOutOfRange> {
    if j == 0 || j > s.rows {
        return Err(NodeOutOfRange(j));
    }
    Ok(s.row(j).iter().any(|q| !q.is_zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Sign::{Minus as M, Plus as P};
    use crate::layered::build_layered;

    #[test]
    fn tables() {
        assert_eq!(QSign::Plus + QSign::Plus, QSign::Plus);
        assert_eq!(QSign::Plus + QSign::Minus, QSign::Indet);
        assert_eq!(QSign::Zero + QSign::Minus, QSign::Minus);
        assert_eq!(QSign::Minus * QSign::Minus, QSign::Plus);
        assert_eq!(QSign::Indet * QSign::Plus, QSign::Indet);
        assert_eq!(QSign::Zero * QSign::Indet, QSign::Zero);
    }

    #[test]
    fn g2_row5() {
        let sys =
            StructuredSystem::leader_one(5, &[(1, 2, P), (2, 3, P), (2, 4, P), (2, 5, M), (3, 5, P), (4, 5, M)])
                .unwrap();
        let s = sscm(&sys);
        let row: Vec<_> = s.row(5).iter().map(|q| q.glyph()).collect();
        assert_eq!(row, ["0", "0", "-", "+/-", "0"]);
        assert!(herdable_follower(&s, 5).unwrap());
        assert!(herdable_follower(&s, 1).unwrap());
        assert!(herdable_follower(&s, 6).is_err());
    }

    #[test]
    fn consistency_detects_mutation() {
        let sys =
            StructuredSystem::leader_one(6, &[(1, 2, P), (2, 3, P), (2, 4, P), (3, 5, M), (4, 5, P), (4, 6, M)])
                .unwrap();
        let gs = build_layered(&sys);
        let mut s = sscm(&sys);
        assert!(layer_column_consistency(&gs, &s));
        s.set(5, 3, QSign::Zero);
        assert!(!layer_column_consistency(&gs, &s));
    }

    #[test]
    fn inaccessible_row() {
        let sys = StructuredSystem::leader_one(3, &[(1, 2, P)]).unwrap();
        assert!(!herdable_follower(&sscm(&sys), 3).unwrap());
    }

    #[test]
    fn json_glyphs() {
        let sys = StructuredSystem::leader_one(2, &[(1, 2, M)]).unwrap();
        let j = serde_json::to_string(&sscm(&sys)).unwrap();
        assert_eq!(j, r#"[["+","0"],["0","-"]]"#);
    }
}
