//! Signed digraphs with leader or driver input attachments.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sign of an edge or input attachment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_i8(v: i8) -> Sign {
        if v < 0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_i8())
    }

    pub fn glyph(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.glyph())
    }
}

/// Directed edge `src -> dst`; `weight` is a magnitude, the sign is separate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedEdge {
    pub src: usize,
    pub dst: usize,
    pub sign: Sign,
    pub weight: Option<f64>,
}

impl SignedEdge {
    pub fn new(src: usize, dst: usize, sign: Sign) -> Self {
        SignedEdge { src, dst, sign, weight: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputAttachment {
    pub node: usize,
    pub sign: Sign,
    pub strength: Option<f64>,
}

impl InputAttachment {
    pub fn new(node: usize, sign: Sign) -> Self {
        InputAttachment { node, sign, strength: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputMode {
    /// All attachments share one signal; `B` has a single column.
    SingleInput,
    /// Every attachment owns its own signal; `B` has one column per attachment.
    MultiDriver,
}

/// The structural pair `(A, B)` as a signed digraph. Nodes are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredSystem {
    pub n: usize,
    pub edges: Vec<SignedEdge>,
    pub mode: InputMode,
    pub inputs: Vec<InputAttachment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Diagnostic {
    #[error("system has no nodes")]
    NoNodes,
    #[error("system has no input attachments")]
    NoInputs,
    #[error("node index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("node {node} has more than one input attachment")]
    DuplicateInput { node: usize },
    #[error("edge {src} -> {dst} has a non-positive or non-finite weight")]
    BadWeight { src: usize, dst: usize },
    #[error("input at node {node} has a non-positive or non-finite strength")]
    BadStrength { node: usize },
}

fn positive(v: Option<f64>) -> bool {
    v.is_none_or(|w| w.is_finite() && w > 0.0)
}

/// One diagnostic per violated invariant; empty when the system is well formed.
pub fn validate(sys: &StructuredSystem) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if sys.n == 0 {
        out.push(Diagnostic::NoNodes);
    }
    if sys.inputs.is_empty() {
        out.push(Diagnostic::NoInputs);
    }
    let in_range = |i: usize| (1..=sys.n).contains(&i);
    let mut seen_inputs = BTreeSet::new();
    for inp in &sys.inputs {
        if !in_range(inp.node) {
            out.push(Diagnostic::IndexOutOfRange { index: inp.node, n: sys.n });
        }
        if !seen_inputs.insert(inp.node) {
            out.push(Diagnostic::DuplicateInput { node: inp.node });
        }
        if !positive(inp.strength) {
            out.push(Diagnostic::BadStrength { node: inp.node });
        }
    }
    let mut seen_edges = BTreeSet::new();
    for e in &sys.edges {
        for idx in [e.src, e.dst] {
            if !in_range(idx) {
                out.push(Diagnostic::IndexOutOfRange { index: idx, n: sys.n });
            }
        }
        if !seen_edges.insert((e.src, e.dst)) {
            out.push(Diagnostic::DuplicateEdge { src: e.src, dst: e.dst });
        }
        if !positive(e.weight) {
            out.push(Diagnostic::BadWeight { src: e.src, dst: e.dst });
        }
    }
    out
}

impl StructuredSystem {
    /// Builds a system and rejects it if [`validate`] reports anything.
    /// Edges are stored sorted by `(src, dst)`.
    pub fn new(
        n: usize,
        mode: InputMode,
        inputs: Vec<InputAttachment>,
        mut edges: Vec<SignedEdge>,
    ) -> Result<Self, Vec<Diagnostic>> {
        edges.sort_by_key(|e| (e.src, e.dst));
        let sys = StructuredSystem { n, edges, mode, inputs };
        let diags = validate(&sys);
        if diags.is_empty() {
            Ok(sys)
        } else {
            Err(diags)
        }
    }

    /// Single leader at node 1 with a positive input and the given `(src, dst, sign)` triples.
    pub fn leader_one(n: usize, edges: &[(usize, usize, Sign)]) -> Result<Self, Vec<Diagnostic>> {
        let edges = edges.iter().map(|&(s, d, g)| SignedEdge::new(s, d, g)).collect();
        Self::new(n, InputMode::SingleInput, vec![InputAttachment::new(1, Sign::Plus)], edges)
    }

    /// Number of input signals: 1 in single-input mode, one per driver otherwise.
    pub fn input_count(&self) -> usize {
        match self.mode {
            InputMode::SingleInput => 1,
            InputMode::MultiDriver => self.inputs.len(),
        }
    }

    /// Inputs feeding signal `l` (0-based).
    pub fn signal_inputs(&self, l: usize) -> Vec<&InputAttachment> {
        match self.mode {
            InputMode::SingleInput => self.inputs.iter().collect(),
            InputMode::MultiDriver => self.inputs.get(l).into_iter().collect(),
        }
    }

    pub fn edge(&self, src: usize, dst: usize) -> Option<&SignedEdge> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    pub fn out_edges(&self, src: usize) -> impl Iterator<Item = &SignedEdge> {
        self.edges.iter().filter(move |e| e.src == src)
    }

    pub fn in_edges(&self, dst: usize) -> impl Iterator<Item = &SignedEdge> {
        self.edges.iter().filter(move |e| e.dst == dst)
    }

    /// Renders the system in the edge-list format accepted by [`parse_system`].
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        let kw = match self.mode {
            InputMode::SingleInput => "leader",
            InputMode::MultiDriver => "driver",
        };
        for inp in &self.inputs {
            s.push_str(&format!("{kw} {} {}", inp.node, inp.sign));
            if let Some(w) = inp.strength {
                s.push_str(&format!(" {w:?}"));
            }
            s.push('\n');
        }
        for e in &self.edges {
            s.push_str(&format!("edge {} {} {}", e.src, e.dst, e.sign));
            if let Some(w) = e.weight {
                s.push_str(&format!(" {w:?}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Nodes reachable by a directed walk from an input-attached node.
pub fn reachable(sys: &StructuredSystem) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = sys.inputs.iter().map(|i| i.node).collect();
    let mut stack: Vec<usize> = seen.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for e in sys.out_edges(v) {
            if seen.insert(e.dst) {
                stack.push(e.dst);
            }
        }
    }
    seen
}

/// `(true, [])` when every node is reachable from an input; otherwise the unreachable nodes.
pub fn input_connected(sys: &StructuredSystem) -> (bool, Vec<usize>) {
    let seen = reachable(sys);
    let missing: Vec<usize> = (1..=sys.n).filter(|v| !seen.contains(v)).collect();
    (missing.is_empty(), missing)
}

/// True when the system is a directed tree rooted at its single input node:
/// one input, every other node has exactly one in-edge, and everything is reachable.
pub fn is_directed_tree(sys: &StructuredSystem) -> bool {
    if sys.inputs.len() != 1 || sys.edges.len() + 1 != sys.n {
        return false;
    }
    let root = sys.inputs[0].node;
    let mut indeg = vec![0usize; sys.n + 1];
    for e in &sys.edges {
        indeg[e.dst] += 1;
    }
    indeg[root] == 0 && (1..=sys.n).all(|v| v == root || indeg[v] == 1) && input_connected(sys).0
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("missing `n` declaration")]
    MissingN,
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("no leader or driver declared")]
    NoInputs,
    #[error("leader and driver lines cannot be mixed")]
    MixedInputs,
    #[error("{0}")]
    Invalid(Diagnostic),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], column: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: s + 1 });
    }
    out
}

/// Parses the line-oriented edge-list format:
///
/// ```text
/// n <int>
/// leader <node> [+|-] [strength]
/// driver <node> [+|-] [strength]
/// edge <src> <dst> <+|-> [weight]
/// ```
///
/// `#` starts a comment. Errors carry 1-based line and column.
pub fn parse_system(text: &str) -> Result<StructuredSystem, ParseError> {
    let mut n: Option<usize> = None;
    let mut mode: Option<InputMode> = None;
    let mut inputs = Vec::new();
    let mut edges: Vec<SignedEdge> = Vec::new();
    let mut input_pos = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("");
        let toks = tokenize(line);
        let Some(head) = toks.first() else { continue };
        let err = |column: usize, kind: ParseErrorKind| ParseError { line: line_no, column, kind };
        let syntax = |t: &Token<'_>, msg: &str| err(t.column, ParseErrorKind::Syntax(msg.to_string()));
        let end_col = line.trim_end().len() + 1;
        let want = |i: usize, what: &str| -> Result<&Token<'_>, ParseError> {
            toks.get(i)
                .ok_or_else(|| err(end_col, ParseErrorKind::Syntax(format!("expected {what}"))))
        };
        let int = |t: &Token<'_>| -> Result<usize, ParseError> {
            t.text.parse::<usize>().map_err(|_| syntax(t, "expected a non-negative integer"))
        };
        let sign = |t: &Token<'_>| -> Result<Sign, ParseError> {
            match t.text {
                "+" => Ok(Sign::Plus),
                "-" | "\u{2212}" => Ok(Sign::Minus),
                _ => Err(syntax(t, "expected `+` or `-`")),
            }
        };
        let magnitude = |t: &Token<'_>| -> Result<f64, ParseError> {
            match t.text.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
                _ => Err(syntax(t, "expected a positive decimal")),
            }
        };
        let node = |t: &Token<'_>| -> Result<usize, ParseError> {
            let v = int(t)?;
            match n {
                None => Err(err(t.column, ParseErrorKind::MissingN)),
                Some(n) if v == 0 || v > n => Err(err(t.column, ParseErrorKind::IndexOutOfRange(v))),
                Some(_) => Ok(v),
            }
        };

        let max_toks = match head.text {
            "n" => {
                if n.is_some() {
                    return Err(syntax(head, "duplicate `n` declaration"));
                }
                let v = int(want(1, "node count")?)?;
                if v == 0 {
                    return Err(syntax(&toks[1], "node count must be positive"));
                }
                n = Some(v);
                2
            }
            "leader" | "driver" => {
                let m = if head.text == "leader" { InputMode::SingleInput } else { InputMode::MultiDriver };
                if mode.is_some_and(|x| x != m) {
                    return Err(err(head.column, ParseErrorKind::MixedInputs));
                }
                mode = Some(m);
                let v = node(want(1, "node index")?)?;
                let mut s = Sign::Plus;
                let mut strength = None;
                let mut i = 2;
                if let Some(t) = toks.get(i) {
                    if let Ok(g) = sign(t) {
                        s = g;
                        i += 1;
                    }
                }
                if let Some(t) = toks.get(i) {
                    strength = Some(magnitude(t)?);
                    i += 1;
                }
                input_pos.push((v, line_no, toks[1].column));
                inputs.push(InputAttachment { node: v, sign: s, strength });
                i
            }
            "edge" => {
                let src = node(want(1, "source node")?)?;
                let dst = node(want(2, "target node")?)?;
                let s = sign(want(3, "edge sign")?)?;
                let weight = match toks.get(4) {
                    Some(t) => Some(magnitude(t)?),
                    None => None,
                };
                if edges.iter().any(|e| e.src == src && e.dst == dst) {
                    return Err(err(head.column, ParseErrorKind::DuplicateEdge(src, dst)));
                }
                edges.push(SignedEdge { src, dst, sign: s, weight });
                5
            }
            _ => return Err(syntax(head, "unknown directive")),
        };
        if let Some(t) = toks.get(max_toks) {
            return Err(syntax(t, "unexpected trailing token"));
        }
    }

    let n = n.ok_or(ParseError { line: last_line.max(1), column: 1, kind: ParseErrorKind::MissingN })?;
    let Some(mode) = mode else {
        return Err(ParseError { line: last_line.max(1), column: 1, kind: ParseErrorKind::NoInputs });
    };
    StructuredSystem::new(n, mode, inputs, edges).map_err(|diags| {
        let d = diags[0].clone();
        let (line, column) = match &d {
            Diagnostic::DuplicateInput { node } => input_pos
                .iter()
                .filter(|(v, _, _)| v == node)
                .nth(1)
                .map_or((1, 1), |&(_, l, c)| (l, c)),
            _ => (last_line.max(1), 1),
        };
        ParseError { line, column, kind: ParseErrorKind::Invalid(d) }
    })
}

impl std::str::FromStr for StructuredSystem {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse_system(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let sys = parse_system("n 3\nleader 1 +\nedge 1 2 +\nedge 1 3 -\n").unwrap();
        assert_eq!(sys.n, 3);
        assert_eq!(sys.edges.len(), 2);
        assert_eq!(sys.inputs.len(), 1);
        assert_eq!(sys.mode, InputMode::SingleInput);
    }

    #[test]
    fn missing_input_rejected() {
        let e = parse_system("n 2\nedge 1 2 +\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NoInputs);
    }

    #[test]
    fn mixed_modes_rejected() {
        let e = parse_system("n 2\nleader 1\ndriver 2\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MixedInputs);
        assert_eq!((e.line, e.column), (3, 1));
    }

    #[test]
    fn syntax_error_position() {
        let e = parse_system("n 3\nleader 1\nedge 1 2 x\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 10));
        let e = parse_system("n 3\nleader 1\nedge 1 4 +\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::IndexOutOfRange(4));
        assert_eq!((e.line, e.column), (3, 8));
    }

    #[test]
    fn duplicate_edge_rejected() {
        let e = parse_system("n 2\nleader 1\nedge 1 2 +\nedge 1 2 -\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateEdge(1, 2));
        assert_eq!(e.line, 4);
    }

    #[test]
    fn duplicate_input_rejected() {
        let e = parse_system("n 2\nleader 1\nleader 1 -\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Invalid(Diagnostic::DuplicateInput { node: 1 }));
        assert_eq!((e.line, e.column), (3, 8));
    }

    #[test]
    fn comments_defaults_and_strengths() {
        let sys = parse_system("# header\nn 2 # two nodes\nleader 1 2.5\nedge 1 2 - 0.25\n").unwrap();
        assert_eq!(sys.inputs[0].sign, Sign::Plus);
        assert_eq!(sys.inputs[0].strength, Some(2.5));
        assert_eq!(sys.edges[0].weight, Some(0.25));
    }

    #[test]
    fn validate_flags_each_violation() {
        let mut sys = StructuredSystem::leader_one(6, &[(1, 2, Sign::Plus)]).unwrap();
        assert!(validate(&sys).is_empty());
        sys.edges.push(SignedEdge::new(1, 7, Sign::Plus));
        assert_eq!(validate(&sys), vec![Diagnostic::IndexOutOfRange { index: 7, n: 6 }]);
        sys.edges.pop();
        sys.edges.push(SignedEdge::new(1, 2, Sign::Minus));
        assert_eq!(validate(&sys), vec![Diagnostic::DuplicateEdge { src: 1, dst: 2 }]);
    }

    #[test]
    fn connectivity() {
        let sys = StructuredSystem::leader_one(3, &[(1, 2, Sign::Plus)]).unwrap();
        assert_eq!(input_connected(&sys), (false, vec![3]));
        let one = StructuredSystem::leader_one(1, &[]).unwrap();
        assert_eq!(input_connected(&one), (true, vec![]));
    }

    #[test]
    fn sign_algebra() {
        assert_eq!(-(-Sign::Plus), Sign::Plus);
        assert_eq!(Sign::Minus * Sign::Minus, Sign::Plus);
        assert_eq!(Sign::Minus * Sign::Plus, Sign::Minus);
    }
}
