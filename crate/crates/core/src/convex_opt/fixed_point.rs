use super::lp::{solve_lp_within, Cmp, LinearProgram, LpError, Sense};
use super::Tolerances;
use crate::sequence_form::StandardPolytope;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixedPointError {
    #[error("fixed-point program failed: {0}")]
    Lp(#[from] LpError),
    #[error("best point leaves max(‖Ax − x‖∞, flow residual) = {residual:e}")]
    NotFixed { residual: f64 },
    #[error("matrix is {rows}x{cols}, polytope dimension {dim}")]
    Shape { rows: usize, cols: usize, dim: usize },
}

/// Finds x ∈ Q with A x = x by minimizing `‖A x − x‖∞` over Q.
pub fn fixed_point(a: &DMatrix<f64>, q: &StandardPolytope, tol: &Tolerances) -> Result<DVector<f64>, FixedPointError> {
    let (lp, _) = residual_program(a, q)?;
    // Simplex vertices can miss the equalities by ~1e-9; accept those and
    // repair x onto Q before checking.
    let sol = solve_lp_within(&lp, tol.audit)?;
    finish(a, q, tol, &sol.x)
}

fn residual_program(a: &DMatrix<f64>, q: &StandardPolytope) -> Result<(LinearProgram, usize), FixedPointError> {
    let d = q.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(FixedPointError::Shape {
            rows: a.nrows(),
            cols: a.ncols(),
            dim: d,
        });
    }
    let mut lp = LinearProgram::new(Sense::Minimize);
    for _ in 0..d {
        lp.add_var(0.0, 0.0, q.gamma);
    }
    let s = lp.add_var(1.0, 0.0, f64::INFINITY);
    for r in 0..q.num_rows() {
        let terms = (0..d).map(|c| (c, q.matrix[(r, c)])).filter(|t| t.1 != 0.0).collect();
        lp.add_row(terms, Cmp::Eq, q.rhs[r]);
    }
    for r in 0..d {
        let mut terms: Vec<(usize, f64)> = (0..d)
            .map(|c| (c, a[(r, c)] - if r == c { 1.0 } else { 0.0 }))
            .filter(|t| t.1 != 0.0)
            .collect();
        if terms.is_empty() {
            continue;
        }
        let mut neg: Vec<(usize, f64)> = terms.iter().map(|&(c, v)| (c, -v)).collect();
        terms.push((s, -1.0));
        neg.push((s, -1.0));
        lp.add_row(terms, Cmp::Le, 0.0);
        lp.add_row(neg, Cmp::Le, 0.0);
    }
    Ok((lp, s))
}

fn finish(a: &DMatrix<f64>, q: &StandardPolytope, tol: &Tolerances, sol: &[f64]) -> Result<DVector<f64>, FixedPointError> {
    let d = q.dim();
    let ok = |x: &DVector<f64>| (a * x - x).amax() <= tol.fixed_point && q.residual(x) <= tol.feasibility;
    let mut x = repair(q, DVector::from_column_slice(&sol[..d]), tol.feasibility * 1e-3);
    for _ in 0..5 {
        if ok(&x) {
            return Ok(x);
        }
        match refine(a, q, &x) {
            Some(y) => x = repair(q, y, tol.feasibility * 1e-3),
            None => break,
        }
    }
    if ok(&x) {
        return Ok(x);
    }
    Err(FixedPointError::NotFixed { residual: violation(a, q, &x) })
}

fn violation(a: &DMatrix<f64>, q: &StandardPolytope, x: &DVector<f64>) -> f64 {
    (a * x - x).amax().max(q.residual(x))
}

/// One least-squares solve of `(A − I) x = 0, M x = p` restricted to the
/// support of `x`, kept only if it stays in the box and lowers the violation.
fn refine(a: &DMatrix<f64>, q: &StandardPolytope, x: &DVector<f64>) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 1e-12).collect();
    if support.is_empty() {
        return None;
    }
    let d = x.len();
    let rows = d + q.num_rows();
    let mut k = DMatrix::zeros(rows, support.len());
    let mut rhs = DVector::zeros(rows);
    for (c, &i) in support.iter().enumerate() {
        for r in 0..d {
            k[(r, c)] = a[(r, i)] - if r == i { 1.0 } else { 0.0 };
        }
        for r in 0..q.num_rows() {
            k[(d + r, c)] = q.matrix[(r, i)];
        }
    }
    for r in 0..q.num_rows() {
        rhs[d + r] = q.rhs[r];
    }
    let x_s = DVector::from_iterator(support.len(), support.iter().map(|&i| x[i]));
    let correction = k.clone().svd(true, true).solve(&(&rhs - &k * &x_s), 1e-12).ok()?;
    let mut y = x.clone();
    for (c, &i) in support.iter().enumerate() {
        y[i] = (x[i] + correction[c]).clamp(0.0, q.gamma);
    }
    (violation(a, q, &y) < violation(a, q, x)).then_some(y)
}

/// Alternating projections onto `{x : M x = p}` and the box `[0, γ]^d`.
fn repair(q: &StandardPolytope, mut x: DVector<f64>, tol: f64) -> DVector<f64> {
    x.apply(|v| *v = v.clamp(0.0, q.gamma));
    if q.num_rows() == 0 || q.residual(&x) <= tol {
        return x;
    }
    let gram = &q.matrix * q.matrix.transpose();
    let Ok(pinv) = gram.pseudo_inverse(1e-12) else {
        return x;
    };
    for _ in 0..50 {
        let r = &q.matrix * &x - &q.rhs;
        x -= q.matrix.transpose() * (&pinv * r);
        x.apply(|v| *v = v.clamp(0.0, q.gamma));
        if q.residual(&x) <= tol {
            break;
        }
    }
    x
}
