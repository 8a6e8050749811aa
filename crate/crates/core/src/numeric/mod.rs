//! Numeric realizations, controllability matrices and the Gordan feasibility test.

pub mod simplex;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::StructuredSystem;
use crate::lugh::LughCertificate;
use simplex::{phase_one, PhaseOne};

/// Feasibility tolerance.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("scheme must satisfy 0 < lo < d < hi (got d={d}, hi={hi}, lo={lo})")]
    BadScheme { d: f64, hi: f64, lo: f64 },
    #[error("certificate does not belong to this system: {0}")]
    CertificateMismatch(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("ill-conditioned problem: result failed verification")]
    Conditioning,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("no preimage in the certificate's sign orthant")]
    FallbackInfeasible,
}

/// Magnitudes `hi` for weighted edges and `lo` for the rest; `d` separates them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scheme {
    pub d: f64,
    pub hi: f64,
    pub lo: f64,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme { d: 1.0, hi: 10.0, lo: 0.1 }
    }
}

/// Largest `hi` tried when escalating.
pub const MAX_HI: f64 = 1e6;

impl Scheme {
    pub fn check(&self) -> Result<(), NumericError> {
        let ok = [self.d, self.hi, self.lo].iter().all(|v| v.is_finite()) && 0.0 < self.lo && self.lo < self.d && self.d < self.hi;
        if ok {
            Ok(())
        } else {
            Err(NumericError::BadScheme { d: self.d, hi: self.hi, lo: self.lo })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl Serialize for Realization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct R {
            a: Vec<Vec<f64>>,
            b: Vec<Vec<f64>>,
        }
        R { a: rows_of(&self.a), b: rows_of(&self.b) }.serialize(s)
    }
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Realization with explicit magnitudes: `edge_mag[e]` per edge of `sys.edges`
/// and `input_mag[i]` per attachment.
pub fn realize_with(sys: &StructuredSystem, edge_mag: &[f64], input_mag: &[f64]) -> Realization {
    let n = sys.n;
    let m = sys.input_count();
    let mut a = DMatrix::zeros(n, n);
    for (e, &w) in sys.edges.iter().zip(edge_mag) {
        a[(e.dst - 1, e.src - 1)] = e.sign.as_f64() * w;
    }
    let mut b = DMatrix::zeros(n, m);
    for (i, (inp, &w)) in sys.inputs.iter().zip(input_mag).enumerate() {
        let col = if m == 1 { 0 } else { i };
        b[(inp.node - 1, col)] = inp.sign.as_f64() * w;
    }
    Realization { a, b }
}

/// Without a certificate, declared weights (or 1) are used. With one, its
/// weighted edges get `hi` and every other edge `lo`.
pub fn realize(
    sys: &StructuredSystem,
    cert: Option<&LughCertificate>,
    scheme: Scheme,
) -> Result<Realization, NumericError> {
    scheme.check()?;
    let inputs: Vec<f64> = sys.inputs.iter().map(|i| i.strength.unwrap_or(1.0)).collect();
    let edges: Vec<f64> = match cert {
        None => sys.edges.iter().map(|e| e.weight.unwrap_or(1.0)).collect(),
        Some(c) => {
            for &(s, d) in &c.weighted_edges {
                if sys.edge(s, d).is_none() {
                    return Err(NumericError::CertificateMismatch(format!("no edge {s} -> {d}")));
                }
            }
            if c.driver == 0 || c.driver > sys.input_count() {
                return Err(NumericError::CertificateMismatch(format!("no driver {}", c.driver)));
            }
            if let Some(&j) = c.matched_at.keys().find(|&&j| j == 0 || j > sys.n) {
                return Err(NumericError::CertificateMismatch(format!("node {j} out of range")));
            }
            sys.edges
                .iter()
                .map(|e| if c.weighted_edges.contains(&(e.src, e.dst)) { scheme.hi } else { scheme.lo })
                .collect()
        }
    };
    Ok(realize_with(sys, &edges, &inputs))
}

/// `[B | AB | ... | A^(n-1) B]`; block `k` holds one column per driver.
pub fn controllability_matrix(r: &Realization) -> DMatrix<f64> {
    controllability_matrix_depth(r, r.a.nrows())
}

pub fn controllability_matrix_depth(r: &Realization, depth: usize) -> DMatrix<f64> {
    let n = r.a.nrows();
    let m = r.b.ncols();
    let mut c = DMatrix::zeros(n, depth * m);
    let mut block = r.b.clone();
    for k in 0..depth {
        c.columns_mut(k * m, m).copy_from(&block);
        block = &r.a * block;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum HerdabilityResult {
    /// `C x = v` with every `v_i >= 1`.
    Feasible { x: Vec<f64>, v: Vec<f64> },
    /// `y >= 0`, `sum(y) = 1`, `C' y = 0`.
    Infeasible { y: Vec<f64> },
}

impl HerdabilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, HerdabilityResult::Feasible { .. })
    }

    /// Checks the certificate against `c` at tolerance `tol`.
    pub fn verify(&self, c: &DMatrix<f64>, tol: f64) -> bool {
        match self {
            HerdabilityResult::Feasible { x, .. } => {
                let v = c * DMatrix::from_column_slice(x.len(), 1, x);
                v.iter().all(|&vi| vi >= 1.0 - tol) && robustly_positive(c, x)
            }
            HerdabilityResult::Infeasible { y } => {
                let sum: f64 = y.iter().sum();
                y.iter().all(|&v| v >= 0.0)
                    && (sum - 1.0).abs() <= tol
                    && dual_residual(c, y) <= tol
            }
        }
    }
}

/// Whether every entry of `C x` exceeds [`TOL`] times the magnitude sum
/// `sum_j |C_ij x_j|` of its terms, so that its sign survives rounding.
pub fn robustly_positive(c: &DMatrix<f64>, x: &[f64]) -> bool {
    (0..c.nrows()).all(|i| {
        let (mut v, mut mag) = (0.0, 0.0);
        for (j, &xj) in x.iter().enumerate() {
            v += c[(i, j)] * xj;
            mag += (c[(i, j)] * xj).abs();
        }
        v > TOL * mag
    })
}

/// `max_c |(C'y)_c| / max(1, max_i |C_ic|)`.
pub fn dual_residual(c: &DMatrix<f64>, y: &[f64]) -> f64 {
    (0..c.ncols())
        .map(|j| {
            let col = c.column(j);
            let dot: f64 = col.iter().zip(y).map(|(a, b)| a * b).sum();
            dot.abs() / col.amax().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Gordan alternative: either some `x` has `C x >= 1`, or some `y >= 0` with
/// `sum(y) = 1` has `C' y = 0`. Rows and columns are equilibrated before the
/// simplex and both outcomes are verified on the original matrix.
pub fn herdable_numeric(c: &DMatrix<f64>) -> Result<HerdabilityResult, NumericError> {
    let n = c.nrows();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(NumericError::NonFinite);
    }
    if n == 0 {
        return Ok(HerdabilityResult::Feasible { x: vec![0.0; c.ncols()], v: vec![] });
    }
    if let Some(i) = (0..n).find(|&i| c.row(i).iter().all(|&v| v == 0.0)) {
        let mut y = vec![0.0; n];
        y[i] = 1.0;
        return Ok(HerdabilityResult::Infeasible { y });
    }
    let col_scale: Vec<f64> = (0..c.ncols()).map(|j| c.column(j).amax()).map(|m| if m > 0.0 { 1.0 / m } else { 0.0 }).collect();
    let mut s = c.clone();
    for (j, &f) in col_scale.iter().enumerate() {
        s.column_mut(j).scale_mut(f);
    }
    let row_scale: Vec<f64> = (0..n).map(|i| 1.0 / s.row(i).amax()).collect();
    for (i, &f) in row_scale.iter().enumerate() {
        s.row_mut(i).scale_mut(f);
    }
    let free = vec![true; c.ncols()];
    match phase_one(&s, &vec![1.0; n], &free, TOL)? {
        PhaseOne::Feasible(xs) => {
            let x: Vec<f64> = xs.iter().zip(&col_scale).map(|(a, b)| a * b).collect();
            finish_primal(c, x)
        }
        PhaseOne::Infeasible(ys) => {
            let y: Vec<f64> = ys.iter().zip(&row_scale).map(|(a, b)| a * b).collect();
            let sum: f64 = y.iter().sum();
            if sum <= 0.0 {
                return Err(NumericError::Conditioning);
            }
            let y: Vec<f64> = y.iter().map(|v| v / sum).collect();
            if dual_residual(c, &y) > TOL {
                return Err(NumericError::Conditioning);
            }
            Ok(HerdabilityResult::Infeasible { y })
        }
    }
}

fn finish_primal(c: &DMatrix<f64>, x: Vec<f64>) -> Result<HerdabilityResult, NumericError> {
    let v = c * DMatrix::from_column_slice(x.len(), 1, &x);
    let min = v.min();
    if !(min > 0.0) || !robustly_positive(c, &x) {
        return Err(NumericError::Conditioning);
    }
    let x: Vec<f64> = x.iter().map(|a| a / min).collect();
    let v = c * DMatrix::from_column_slice(x.len(), 1, &x);
    Ok(HerdabilityResult::Feasible { x, v: v.iter().copied().collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Construction {
    Layered,
    ZeroPadded,
    LpFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaVector {
    pub delta: Vec<f64>,
    pub construction: Construction,
    /// `C delta`, scaled so that its minimum is 1.
    pub image: Vec<f64>,
}

/// Designated `(row, column, sign)` triples of a certificate set; one
/// certificate per driver.
fn designations(certs: &[LughCertificate], ncols: usize) -> Vec<(usize, usize, f64)> {
    let m = certs.len();
    let mut out = Vec::new();
    for c in certs {
        for (&j, &layer) in &c.matched_at {
            let col = (layer - 1) * m + (c.driver - 1);
            if col < ncols {
                out.push((j - 1, col, c.matched_sign(layer).as_f64()));
            }
        }
    }
    out
}

/// Builds `delta` with signs from the certificates: designated entries start
/// at magnitude 1, undesignated ones at 0, and each violated row doubles its
/// designated entry for up to 64 sweeps. Falls back to the feasibility
/// procedure restricted to the certificate's sign orthant.
pub fn delta_construct(c: &DMatrix<f64>, certs: &[LughCertificate]) -> Result<DeltaVector, NumericError> {
    let ncols = c.ncols();
    let n = c.nrows();
    let m = certs.len().max(1);
    let des = designations(certs, ncols);
    let mut delta = vec![0.0; ncols];
    for &(_, col, s) in &des {
        delta[col] = s;
    }
    let depth = ncols / m;
    let max_layer = certs.iter().flat_map(|c| c.matched_at.values()).copied().max().unwrap_or(0);
    let construction = if max_layer < depth { Construction::ZeroPadded } else { Construction::Layered };

    let image = |d: &[f64]| c * DMatrix::from_column_slice(d.len(), 1, d);
    for _ in 0..64 {
        let v = image(&delta);
        let bad: BTreeSet<usize> =
            des.iter().filter(|&&(j, _, _)| !(v[j] > 0.0)).map(|&(_, col, _)| col).collect();
        let uncovered = (0..n).any(|i| !(v[i] > 0.0) && !des.iter().any(|d| d.0 == i));
        if bad.is_empty() && !uncovered && robustly_positive(c, &delta) {
            let min = v.min();
            let delta: Vec<f64> = delta.iter().map(|d| d / min).collect();
            let img = image(&delta).iter().copied().collect();
            return Ok(DeltaVector { delta, construction, image: img });
        }
        if uncovered {
            break;
        }
        for col in bad {
            delta[col] *= 2.0;
        }
    }

    let cols: Vec<usize> = {
        let set: BTreeSet<usize> = des.iter().map(|d| d.1).collect();
        set.into_iter().collect()
    };
    let signs: Vec<f64> = cols.iter().map(|&col| des.iter().find(|d| d.1 == col).map_or(1.0, |d| d.2)).collect();
    let mut sub = DMatrix::zeros(n, cols.len());
    for (t, (&col, &s)) in cols.iter().zip(&signs).enumerate() {
        sub.set_column(t, &(c.column(col) * s));
    }
    let col_scale: Vec<f64> = (0..sub.ncols()).map(|j| sub.column(j).amax()).map(|v| if v > 0.0 { 1.0 / v } else { 0.0 }).collect();
    for (j, &f) in col_scale.iter().enumerate() {
        sub.column_mut(j).scale_mut(f);
    }
    let row_scale: Vec<f64> = (0..n).map(|i| sub.row(i).amax()).map(|v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect();
    for (i, &f) in row_scale.iter().enumerate() {
        sub.row_mut(i).scale_mut(f);
    }
    match phase_one(&sub, &vec![1.0; n], &vec![false; cols.len()], TOL)? {
        PhaseOne::Infeasible(_) => Err(NumericError::FallbackInfeasible),
        PhaseOne::Feasible(z) => {
            let mut delta = vec![0.0; ncols];
            for (t, &col) in cols.iter().enumerate() {
                delta[col] = signs[t] * z[t] * col_scale[t];
            }
            let v = image(&delta);
            let min = v.min();
            if !(min > 0.0) || !robustly_positive(c, &delta) {
                return Err(NumericError::Conditioning);
            }
            let delta: Vec<f64> = delta.iter().map(|d| d / min).collect();
            let img = image(&delta).iter().copied().collect();
            Ok(DeltaVector { delta, construction: Construction::LpFallback, image: img })
        }
    }
}

/// Output of [`certify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifiedRealization {
    pub scheme: Scheme,
    pub realization: Realization,
    pub delta: DeltaVector,
    pub feasibility: HerdabilityResult,
    #[serde(skip)]
    pub c: DMatrix<f64>,
}

/// Realizes the certificates and constructs `delta`, raising `hi` tenfold up
/// to [`MAX_HI`] while no preimage exists in the certificate's sign orthant.
pub fn certify(
    sys: &StructuredSystem,
    certs: &[LughCertificate],
    scheme: Scheme,
) -> Result<CertifiedRealization, NumericError> {
    let mut scheme = scheme;
    let depth = certs.first().map_or(sys.n, |c| c.sigma.0.len());
    loop {
        let r = realize(sys, certs.first(), scheme)?;
        let c = controllability_matrix_depth(&r, depth);
        match delta_construct(&c, certs) {
            Ok(delta) => {
                // `delta` is itself a primal certificate, so a solver failure
                // here falls back to it and a dual answer is a contradiction.
                let feasibility = match herdable_numeric(&c) {
                    Ok(HerdabilityResult::Infeasible { .. }) => {
                        return Err(NumericError::CertificateMismatch("dual certificate contradicts delta".into()))
                    }
                    Ok(f) => f,
                    Err(_) => HerdabilityResult::Feasible { x: delta.delta.clone(), v: delta.image.clone() },
                };
                return Ok(CertifiedRealization { scheme, realization: r, delta, feasibility, c });
            }
            Err(NumericError::FallbackInfeasible | NumericError::Conditioning) if scheme.hi * 10.0 <= MAX_HI => {
                scheme.hi *= 10.0;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Rows herdable by repeated use of columns whose other nonzero rows are
/// already herdable. Returns 1-based nodes.
pub fn iterative_herdable_set(c: &DMatrix<f64>) -> BTreeSet<usize> {
    let scale = c.amax();
    let nz = |v: f64| v.abs() > 1e-12 * scale;
    let supports: Vec<Vec<usize>> =
        (0..c.ncols()).map(|j| (0..c.nrows()).filter(|&i| nz(c[(i, j)])).collect()).collect();
    let mut h = BTreeSet::new();
    loop {
        let mut grew = false;
        for s in &supports {
            let outside: Vec<usize> = s.iter().copied().filter(|i| !h.contains(&(i + 1))).collect();
            if outside.len() == 1 {
                h.insert(outside[0] + 1);
                grew = true;
            }
        }
        if !grew {
            return h;
        }
    }
}

/// Whether the `rows` subvector (1-based nodes) of column `q` is a scalar
/// multiple of that of column `p`, at relative tolerance [`TOL`].
pub fn dilation_subvector_check(c: &DMatrix<f64>, rows: &BTreeSet<usize>, p: usize, q: usize) -> bool {
    let u: Vec<f64> = rows.iter().map(|&i| c[(i - 1, p)]).collect();
    let v: Vec<f64> = rows.iter().map(|&i| c[(i - 1, q)]).collect();
    let nu = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let nv = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bound = TOL * nu * nv;
    (0..u.len()).all(|a| (a + 1..u.len()).all(|b| (u[a] * v[b] - u[b] * v[a]).abs() <= bound))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum OracleVerdict {
    /// `sample` is `None` for a two-level candidate, otherwise the sample index.
    EmpiricallyHerdable { sample: Option<usize>, x: Vec<f64> },
    NoWitnessFound { samples: usize, numeric_failures: usize },
}

impl OracleVerdict {
    pub fn is_herdable(&self) -> bool {
        matches!(self, OracleVerdict::EmpiricallyHerdable { .. })
    }
}

/// Empirical search for a herdable realization: first two-level candidates
/// with at most one heavy edge, then `samples` realizations with magnitudes
/// drawn log-uniformly from `[1e-3, 1e3]`. Deterministic given `seed`.
pub fn oracle_ss_herdable(sys: &StructuredSystem, samples: usize, seed: u64) -> OracleVerdict {
    let ne = sys.edges.len();
    let ni = sys.inputs.len();
    let mut failures = 0;
    let mut try_mags = |e: &[f64], i: &[f64]| -> Option<Vec<f64>> {
        let c = controllability_matrix(&realize_with(sys, e, i));
        match herdable_numeric(&c) {
            Ok(HerdabilityResult::Feasible { x, .. }) => Some(x),
            Ok(_) => None,
            Err(_) => {
                failures += 1;
                None
            }
        }
    };
    let ones = vec![1.0; ni];
    for heavy in std::iter::once(None).chain((0..ne).map(Some)) {
        let e: Vec<f64> = (0..ne).map(|t| if Some(t) == heavy { 1e3 } else { 1.0 }).collect();
        if let Some(x) = try_mags(&e, &ones) {
            return OracleVerdict::EmpiricallyHerdable { sample: None, x };
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (1e-3f64.ln(), 1e3f64.ln());
    for s in 0..samples {
        let e: Vec<f64> = (0..ne).map(|_| rng.random_range(lo..hi).exp()).collect();
        let i: Vec<f64> = (0..ni).map(|_| rng.random_range(lo..hi).exp()).collect();
        if let Some(x) = try_mags(&e, &i) {
            return OracleVerdict::EmpiricallyHerdable { sample: Some(s), x };
        }
    }
    OracleVerdict::NoWitnessFound { samples, numeric_failures: failures }
}
