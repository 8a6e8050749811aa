//! Dense phase-1 simplex for `A x >= b`, `b >= 0`, with Bland's rule.
//!
//! The program `min 1'a  s.t.  A x - s + a = b,  s, a >= 0` starts from the
//! artificial basis. At the optimum the simplex multipliers `y` satisfy
//! `A'y = 0` on free columns, `A'y <= 0` on nonnegative ones, `0 <= y <= 1`,
//! and `b'y` equals the optimal value, so they certify infeasibility.

use nalgebra::DMatrix;

use super::NumericError;

/// Entries below this are never used as pivots.
pub const PIVOT_TOL: f64 = 1e-12;
const COST_TOL: f64 = 1e-11;
const MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    Feasible(Vec<f64>),
    /// Multipliers with `b'y > 0`; not normalized.
    Infeasible(Vec<f64>),
}

/// Solves the phase-1 problem. `free[j]` marks variable `j` as unrestricted,
/// otherwise it is constrained to be nonnegative.
pub fn phase_one(a: &DMatrix<f64>, b: &[f64], free: &[bool], tol: f64) -> Result<PhaseOne, NumericError> {
    let rows = a.nrows();
    let nvar = a.ncols();
    assert_eq!(b.len(), rows);
    assert_eq!(free.len(), nvar);
    if b.iter().any(|&v| v < 0.0 || !v.is_finite()) || a.iter().any(|v| !v.is_finite()) {
        return Err(NumericError::NonFinite);
    }

    // Structural columns: x+ for every variable, x- for free ones.
    let mut cols: Vec<(usize, f64)> = Vec::new();
    for j in 0..nvar {
        cols.push((j, 1.0));
        if free[j] {
            cols.push((j, -1.0));
        }
    }
    let ns = cols.len();
    let surplus0 = ns;
    let art0 = ns + rows;
    let width = art0 + rows;
    let rhs = width;

    let mut t = vec![vec![0.0; width + 1]; rows];
    for i in 0..rows {
        for (c, &(j, s)) in cols.iter().enumerate() {
            t[i][c] = s * a[(i, j)];
        }
        t[i][surplus0 + i] = -1.0;
        t[i][art0 + i] = 1.0;
        t[i][rhs] = b[i];
    }
    let mut basis: Vec<usize> = (0..rows).map(|i| art0 + i).collect();
    // Reduced costs and objective value; cost is 1 on artificials.
    let mut rc = vec![0.0; width + 1];
    for i in 0..rows {
        for c in 0..=width {
            rc[c] -= t[i][c];
        }
    }
    for i in 0..rows {
        rc[art0 + i] += 1.0;
    }

    let mut iter = 0;
    loop {
        iter += 1;
        if iter > MAX_ITER {
            return Err(NumericError::IterationLimit);
        }
        // A negative reduced cost with no usable pivot is rounding noise on a
        // ray the bounded objective cannot follow; such columns are skipped.
        let Some(enter) = (0..width).find(|&c| rc[c] < -COST_TOL && t.iter().any(|row| row[c] > PIVOT_TOL))
        else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let piv = t[i][enter];
            if piv <= PIVOT_TOL {
                continue;
            }
            let ratio = t[i][rhs] / piv;
            leave = match leave {
                None => Some((i, ratio)),
                Some((li, lr)) => {
                    let tie = (ratio - lr).abs() <= 1e-12 * lr.abs().max(1.0);
                    if ratio < lr && !tie || tie && basis[i] < basis[li] {
                        Some((i, ratio))
                    } else {
                        Some((li, lr))
                    }
                }
            };
        }
        let (r, _) = leave.expect("entering column has a positive pivot");
        let piv = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        let prow = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if f != 0.0 {
                    for (x, p) in row.iter_mut().zip(&prow) {
                        *x -= f * p;
                    }
                }
            }
        }
        let f = rc[enter];
        for (x, p) in rc.iter_mut().zip(&prow) {
            *x -= f * p;
        }
        basis[r] = enter;
    }

    let objective = -rc[rhs];
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if objective <= tol * scale {
        let mut x = vec![0.0; nvar];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < ns {
                let (j, s) = cols[bv];
                x[j] += s * t[i][rhs];
            }
        }
        Ok(PhaseOne::Feasible(x))
    } else {
        let y = (0..rows).map(|i| (1.0 - rc[art0 + i]).clamp(0.0, 1.0)).collect();
        Ok(PhaseOne::Infeasible(y))
    }
}
