use super::lp::{solve_lp, Cmp, LinearProgram, LpError, Sense};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SupportedConeT, ZeroConeT,
};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// `{y : E y = e, lo ≤ y ≤ hi}` with sparse rows; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBoxSet {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub y: DVector<f64>,
    /// Certified upper bound on `‖y − y*‖²`, y* the exact projection.
    pub error_bound: f64,
    /// Largest violation of the constraints by `y`.
    pub residual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("projection accuracy {achieved:e} worse than requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },
    #[error("projection solver failed: {0}")]
    Solver(String),
}

impl AffineBoxSet {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn apply_rows(&self, y: &DVector<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(i, a)| a * y[i]).sum())
            .collect()
    }

    pub fn residual(&self, y: &DVector<f64>) -> f64 {
        let eq = self
            .apply_rows(y)
            .iter()
            .zip(&self.rhs)
            .fold(0.0f64, |m, (v, e)| m.max((v - e).abs()));
        let bd = (0..self.dim()).fold(0.0f64, |m, i| m.max(self.lo[i] - y[i]).max(y[i] - self.hi[i]));
        eq.max(bd)
    }

    fn transpose_apply(&self, lambda: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (r, &l) in self.rows.iter().zip(lambda) {
            for &(i, a) in r {
                out[i] += a * l;
            }
        }
        out
    }

    fn to_lp(&self, sense: Sense, objective: &DVector<f64>) -> LinearProgram {
        let mut lp = LinearProgram::new(sense);
        for i in 0..self.dim() {
            lp.add_var(objective[i], self.lo[i], self.hi[i]);
        }
        for (r, &e) in self.rows.iter().zip(&self.rhs) {
            lp.add_row(r.clone(), Cmp::Eq, e);
        }
        lp
    }
}

/// Accuracy at which a polished candidate is taken without trying others.
const POLISH_EXACT: f64 = 1e-13;

/// Duality-gap certificate: for feasible y and equality multipliers λ the
/// bound-multipliers are read off the stationarity residual, and twice the
/// resulting gap bounds `‖y − y*‖²` by strong convexity.
pub fn projection_accuracy(set: &AffineBoxSet, q: &DVector<f64>, y: &DVector<f64>, lambda: &[f64]) -> f64 {
    let et = set.transpose_apply(lambda);
    let mut gap = 0.0;
    for i in 0..set.dim() {
        let r = q[i] - y[i] - et[i];
        let nu = if set.lo[i].is_finite() { (-r).max(0.0) } else { 0.0 };
        let om = if set.hi[i].is_finite() { r.max(0.0) } else { 0.0 };
        let rest = r + nu - om;
        gap += 0.5 * rest * rest;
        if nu > 0.0 {
            gap += nu * (y[i] - set.lo[i]).abs();
        }
        if om > 0.0 {
            gap += om * (set.hi[i] - y[i]).abs();
        }
    }
    let ey = set.apply_rows(y);
    for (k, &l) in lambda.iter().enumerate() {
        gap += (l * (set.rhs[k] - ey[k])).abs();
    }
    2.0 * gap
}

/// Euclidean projection of `q` onto the set with certified accuracy `eps`
/// on the squared distance to the exact projection.
///
/// An interior-point solve locates the active bounds; the equality-
/// constrained problem on the remaining coordinates is then solved exactly,
/// which usually yields the projection to machine precision.
pub fn project(set: &AffineBoxSet, q: &DVector<f64>, eps: f64) -> Result<Projection, ProjectionError> {
    let (y0, z_eq) = interior_point(set, q)?;
    let mut best: Option<Projection> = None;
    let consider = |best: &mut Option<Projection>, y: DVector<f64>, lambda: &[f64]| {
        let residual = set.residual(&y);
        let error_bound = projection_accuracy(set, q, &y, lambda);
        let cand = Projection {
            y,
            error_bound,
            residual,
        };
        let score = |p: &Projection| p.error_bound.max(p.residual);
        if best.as_ref().is_none_or(|b| score(&cand) < score(b)) {
            *best = Some(cand);
        }
        best.as_ref().map_or(f64::INFINITY, score)
    };
    for delta in [1e-7, 1e-9, 1e-5, 1e-11] {
        if let Some((y, lambda)) = polish(set, q, &y0, delta) {
            if consider(&mut best, y, &lambda) <= POLISH_EXACT {
                break;
            }
        }
    }
    if best.as_ref().is_none_or(|b| b.error_bound.max(b.residual) > POLISH_EXACT) {
        let mut clipped = y0.clone();
        for i in 0..set.dim() {
            clipped[i] = clipped[i].clamp(set.lo[i], set.hi[i]);
        }
        consider(&mut best, clipped, &z_eq);
    }
    let best = best.expect("at least one candidate");
    if best.error_bound > eps || best.residual > eps.sqrt().max(1e-9) {
        return Err(ProjectionError::Accuracy {
            achieved: best.error_bound.max(best.residual),
            requested: eps,
        });
    }
    Ok(best)
}

fn interior_point(set: &AffineBoxSet, q: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>), ProjectionError> {
    let n = set.dim();
    let m = set.rows.len();
    let p = CscMatrix::new_from_triplets(n, n, (0..n).collect(), (0..n).collect(), vec![1.0; n]);
    let lin: Vec<f64> = q.iter().map(|v| -v).collect();
    let (mut ri, mut ci, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    for (k, r) in set.rows.iter().enumerate() {
        for &(i, a) in r {
            ri.push(k);
            ci.push(i);
            vv.push(a);
        }
        b.push(set.rhs[k]);
    }
    let mut row = m;
    for i in 0..n {
        if set.hi[i].is_finite() {
            ri.push(row);
            ci.push(i);
            vv.push(1.0);
            b.push(set.hi[i]);
            row += 1;
        }
        if set.lo[i].is_finite() {
            ri.push(row);
            ci.push(i);
            vv.push(-1.0);
            b.push(-set.lo[i]);
            row += 1;
        }
    }
    let a = CscMatrix::new_from_triplets(row, n, ri, ci, vv);
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if m > 0 {
        cones.push(ZeroConeT(m));
    }
    if row > m {
        cones.push(NonnegativeConeT(row - m));
    }
    let settings = DefaultSettings {
        verbose: false,
        max_iter: 200,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &lin, &a, &b, &cones, settings)
        .map_err(|e| ProjectionError::Solver(format!("{e:?}")))?;
    solver.solve();
    let x = &solver.solution.x;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ProjectionError::Solver(format!("{:?}", solver.solution.status)));
    }
    Ok((DVector::from_column_slice(x), solver.solution.z[..m].to_vec()))
}

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Lower,
    Upper,
    Free,
}

/// Fixes coordinates within `delta` of a bound, solves the remaining
/// equality-constrained least-distance problem exactly, then repairs the
/// active set until bounds and multiplier signs agree.
fn polish(set: &AffineBoxSet, q: &DVector<f64>, y0: &DVector<f64>, delta: f64) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = set.dim();
    let mut status: Vec<Status> = (0..n)
        .map(|i| {
            if y0[i] - set.lo[i] <= delta {
                Status::Lower
            } else if set.hi[i] - y0[i] <= delta {
                Status::Upper
            } else {
                Status::Free
            }
        })
        .collect();
    let mut last = None;
    for _ in 0..4 * n + 10 {
        let (y, lambda, raw) = solve_on_free(set, q, &status)?;
        let mut changed = false;
        for i in 0..n {
            if status[i] != Status::Free {
                continue;
            }
            if raw[i] < set.lo[i] - 1e-13 {
                status[i] = Status::Lower;
                changed = true;
            } else if raw[i] > set.hi[i] + 1e-13 {
                status[i] = Status::Upper;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        let et = set.transpose_apply(lambda.as_slice());
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            let r = q[i] - y[i] - et[i];
            let wrong = match status[i] {
                Status::Lower => r,
                Status::Upper => -r,
                Status::Free => 0.0,
            };
            if wrong > 1e-14 && worst.is_none_or(|w| wrong > w.1) {
                worst = Some((i, wrong));
            }
        }
        last = Some((y, lambda.iter().cloned().collect()));
        match worst {
            Some((i, _)) => status[i] = Status::Free,
            None => break,
        }
    }
    last
}

fn solve_on_free(
    set: &AffineBoxSet,
    q: &DVector<f64>,
    status: &[Status],
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = set.dim();
    let m = set.rows.len();
    let mut y = DVector::zeros(n);
    let mut free = Vec::new();
    let mut col = vec![usize::MAX; n];
    for i in 0..n {
        match status[i] {
            Status::Lower => y[i] = set.lo[i],
            Status::Upper => y[i] = set.hi[i],
            Status::Free => {
                col[i] = free.len();
                free.push(i);
            }
        }
    }
    let mut ef = DMatrix::zeros(m, free.len());
    let mut rhs = DVector::zeros(m);
    for (k, r) in set.rows.iter().enumerate() {
        let mut fixed = 0.0;
        for &(i, a) in r {
            if col[i] == usize::MAX {
                fixed += a * y[i];
            } else {
                ef[(k, col[i])] += a;
            }
        }
        rhs[k] = set.rhs[k] - fixed;
    }
    let qf = DVector::from_iterator(free.len(), free.iter().map(|&i| q[i]));
    let lambda = if m > 0 {
        let gram = &ef * ef.transpose();
        let target = &ef * &qf - &rhs;
        let svd = gram.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max().max(1.0);
        svd.solve(&target, tol).ok()?
    } else {
        DVector::zeros(0)
    };
    let yf = &qf - ef.transpose() * &lambda;
    let mut raw = y.clone();
    for (c, &i) in free.iter().enumerate() {
        raw[i] = yf[c];
        y[i] = yf[c].clamp(set.lo[i], set.hi[i]);
    }
    Some((y, lambda, raw))
}

/// Variational-inequality gap `max_{z ∈ S} ⟨q − y, z − y⟩`, an upper bound on
/// `‖y − y*‖²` for feasible y.
pub fn vi_gap(set: &AffineBoxSet, q: &DVector<f64>, y: &DVector<f64>) -> Result<f64, LpError> {
    let dir = q - y;
    let sol = solve_lp(&set.to_lp(Sense::Maximize, &dir))?;
    Ok(sol.objective - dir.dot(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(n: usize) -> AffineBoxSet {
        AffineBoxSet {
            rows: vec![(0..n).map(|i| (i, 1.0)).collect()],
            rhs: vec![1.0],
            lo: vec![0.0; n],
            hi: vec![1.0; n],
        }
    }

    /// Sort-based closed form for the probability simplex.
    fn simplex_oracle(q: &[f64]) -> Vec<f64> {
        let mut u = q.to_vec();
        u.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut css = 0.0;
        let mut theta = 0.0;
        for (k, &v) in u.iter().enumerate() {
            css += v;
            let t = (css - 1.0) / (k + 1) as f64;
            if v - t > 0.0 {
                theta = t;
            }
        }
        q.iter().map(|v| (v - theta).max(0.0)).collect()
    }

    #[test]
    fn two_simplex_closed_form() {
        let q = DVector::from_vec(vec![0.8, 0.6]);
        let p = project(&simplex(2), &q, 1e-12).unwrap();
        assert!((p.y[0] - 0.6).abs() < 1e-12 && (p.y[1] - 0.4).abs() < 1e-12);
        assert!(p.error_bound < 1e-20);
    }

    #[test]
    fn feasible_query_is_fixed() {
        let q = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let p = project(&simplex(3), &q, 1e-12).unwrap();
        assert!((p.y - q).amax() < 1e-9);
    }

    #[test]
    fn normal_cone_offset_returns_base_point() {
        // y = e1 is a vertex; its normal cone contains (1, -1, -1) + t(1,1,1).
        let base = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let q = &base + DVector::from_vec(vec![0.5, -0.7, -0.2]);
        let p = project(&simplex(3), &q, 1e-12).unwrap();
        assert!((p.y - base).amax() < 1e-9);
    }

    #[test]
    fn random_simplex_queries_match_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let q: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = project(&simplex(5), &DVector::from_vec(q.clone()), 1e-12).unwrap();
            let o = simplex_oracle(&q);
            for i in 0..5 {
                assert!((p.y[i] - o[i]).abs() < 1e-9);
            }
            let vi = vi_gap(&simplex(5), &DVector::from_vec(q), &p.y).unwrap();
            assert!(vi < 1e-9);
        }
    }

    #[test]
    fn unbounded_above_coordinates() {
        // {y ≥ 0, y1 - y2 = 1}
        let set = AffineBoxSet {
            rows: vec![vec![(0, 1.0), (1, -1.0)]],
            rhs: vec![1.0],
            lo: vec![0.0, 0.0],
            hi: vec![f64::INFINITY, f64::INFINITY],
        };
        let q = DVector::from_vec(vec![3.0, 0.0]);
        let p = project(&set, &q, 1e-12).unwrap();
        assert!((p.y[0] - 2.0).abs() < 1e-9 && (p.y[1] - 1.0).abs() < 1e-9);
    }
}
