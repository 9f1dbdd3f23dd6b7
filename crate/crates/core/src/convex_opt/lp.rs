use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT, ZeroConeT,
};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use std::panic::{catch_unwind, set_hook, take_hook, AssertUnwindSafe};
use std::sync::Once;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// Linear program over bounded or free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("solution violates constraints by {residual:e}")]
    Inaccurate { residual: f64 },
    #[error("solver failed: {0}")]
    Solver(String),
}

/// Feasibility slack granted to simplex outputs, relative to row scale.
const LP_FEAS_TOL: f64 = 1e-9;

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            objective: Vec::new(),
            bounds: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, objective: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(objective);
        self.bounds.push((lo, hi));
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(LpRow { terms, cmp, rhs });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest scaled violation of any row or bound.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for r in &self.rows {
            let lhs: f64 = r.terms.iter().map(|&(i, a)| a * x[i]).sum();
            let scale = 1.0 + r.terms.iter().fold(r.rhs.abs(), |m, t| m.max(t.1.abs()));
            let v = match r.cmp {
                Cmp::Eq => (lhs - r.rhs).abs(),
                Cmp::Le => lhs - r.rhs,
                Cmp::Ge => r.rhs - lhs,
            };
            worst = worst.max(v / scale);
        }
        worst
    }

    /// CPLEX-style LP text for cross-checking with external solvers.
    pub fn to_lp_text(&self, names: &[String]) -> String {
        let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("v{i}"));
        let expr = |terms: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut s = String::new();
            for (i, a) in terms {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 { "-" } else { "+" };
                write!(s, " {sign} {} {}", a.abs(), name(i)).unwrap();
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Minimize => "Minimize\n",
            Sense::Maximize => "Maximize\n",
        });
        writeln!(out, " obj:{}", expr(&mut self.objective.iter().cloned().enumerate())).unwrap();
        out.push_str("Subject To\n");
        for (k, r) in self.rows.iter().enumerate() {
            let op = match r.cmp {
                Cmp::Eq => "=",
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
            };
            writeln!(out, " c{k}:{} {op} {}", expr(&mut r.terms.iter().cloned()), r.rhs).unwrap();
        }
        out.push_str("Bounds\n");
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) if lo == hi => writeln!(out, " {} = {lo}", name(i)).unwrap(),
                (true, true) => writeln!(out, " {lo} <= {} <= {hi}", name(i)).unwrap(),
                (true, false) => writeln!(out, " {} >= {lo}", name(i)).unwrap(),
                (false, true) => writeln!(out, " -inf <= {} <= {hi}", name(i)).unwrap(),
                (false, false) => writeln!(out, " {} free", name(i)).unwrap(),
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Solves the program with a bounded-variable simplex method and checks the
/// returned vertex against every constraint.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_within(lp, LP_FEAS_TOL)
}

/// [`solve_lp`] accepting scaled constraint violations up to `tol`.
pub fn solve_lp_within(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    let dir = match lp.sense {
        Sense::Minimize => OptimizationDirection::Minimize,
        Sense::Maximize => OptimizationDirection::Maximize,
    };
    let mut p = Problem::new(dir);
    let vars: Vec<_> = lp
        .objective
        .iter()
        .zip(&lp.bounds)
        .map(|(&c, &b)| p.add_var(c, b))
        .collect();
    for r in &lp.rows {
        let terms: Vec<_> = r.terms.iter().filter(|t| t.1 != 0.0).map(|&(i, a)| (vars[i], a)).collect();
        if terms.is_empty() {
            let ok = match r.cmp {
                Cmp::Eq => r.rhs.abs() <= LP_FEAS_TOL,
                Cmp::Le => r.rhs >= -LP_FEAS_TOL,
                Cmp::Ge => r.rhs <= LP_FEAS_TOL,
            };
            if !ok {
                return Err(LpError::Infeasible);
            }
            continue;
        }
        let op = match r.cmp {
            Cmp::Eq => ComparisonOp::Eq,
            Cmp::Le => ComparisonOp::Le,
            Cmp::Ge => ComparisonOp::Ge,
        };
        p.add_constraint(terms, op, r.rhs);
    }
    // minilp panics on singular bases; the interior-point solver takes over.
    quiet_minilp_panics();
    let x: Vec<f64> = match catch_unwind(AssertUnwindSafe(|| p.solve())) {
        Ok(Ok(sol)) => vars.iter().map(|&v| *sol.var_value(v)).collect(),
        Ok(Err(minilp::Error::Infeasible)) => return Err(LpError::Infeasible),
        Ok(Err(minilp::Error::Unbounded)) => return Err(LpError::Unbounded),
        Err(_) => solve_interior(lp)?,
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LpError::Unbounded);
    }
    let residual = lp.max_violation(&x);
    if residual > tol {
        return Err(LpError::Inaccurate { residual });
    }
    Ok(LpSolution {
        objective: lp.objective_value(&x),
        x,
    })
}

fn quiet_minilp_panics() {
    static HOOK: Once = Once::new();
    HOOK.call_once(|| {
        let previous = take_hook();
        set_hook(Box::new(move |info| {
            if !info.location().is_some_and(|l| l.file().contains("minilp")) {
                previous(info);
            }
        }));
    });
}

fn solve_interior(lp: &LinearProgram) -> Result<Vec<f64>, LpError> {
    let n = lp.num_vars();
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let c: Vec<f64> = lp.objective.iter().map(|v| sign * v).collect();
    let (mut ri, mut ci, mut vv, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut push = |rows: &mut usize, terms: &mut dyn Iterator<Item = (usize, f64)>, rhs: f64| {
        for (i, a) in terms {
            ri.push(*rows);
            ci.push(i);
            vv.push(a);
        }
        b.push(rhs);
        *rows += 1;
    };
    let mut rows = 0;
    for r in lp.rows.iter().filter(|r| r.cmp == Cmp::Eq) {
        push(&mut rows, &mut r.terms.iter().copied(), r.rhs);
    }
    let eq = rows;
    for r in lp.rows.iter().filter(|r| r.cmp != Cmp::Eq) {
        let f = if r.cmp == Cmp::Le { 1.0 } else { -1.0 };
        push(&mut rows, &mut r.terms.iter().map(|&(i, a)| (i, f * a)), f * r.rhs);
    }
    for (i, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if hi.is_finite() {
            push(&mut rows, &mut std::iter::once((i, 1.0)), hi);
        }
        if lo.is_finite() {
            push(&mut rows, &mut std::iter::once((i, -1.0)), -lo);
        }
    }
    let a = CscMatrix::new_from_triplets(rows, n, ri, ci, vv);
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if eq > 0 {
        cones.push(ZeroConeT(eq));
    }
    if rows > eq {
        cones.push(NonnegativeConeT(rows - eq));
    }
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&CscMatrix::zeros((n, n)), &c, &a, &b, &cones, settings)
        .map_err(|e| LpError::Solver(format!("{e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(solver.solution.x.clone()),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Err(LpError::Infeasible),
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Err(LpError::Unbounded),
        other => Err(LpError::Solver(format!("{other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_equality() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0)], Cmp::Eq, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interior_fallback_agrees_with_simplex() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(3.0, 0.0, 4.0);
        let y = lp.add_var(2.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Cmp::Le, 5.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Cmp::Ge, -1.0);
        lp.add_row(vec![(x, 1.0), (y, 2.0)], Cmp::Eq, 6.0);
        let exact = solve_lp(&lp).unwrap();
        let inner = solve_interior(&lp).unwrap();
        assert!(lp.max_violation(&inner) < 1e-8);
        assert!((lp.objective_value(&inner) - exact.objective).abs() < 1e-7);

        lp.add_row(vec![(x, 1.0)], Cmp::Ge, 5.0);
        assert_eq!(solve_interior(&lp), Err(LpError::Infeasible));
    }

    #[test]
    fn infeasible_verdict() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0)], Cmp::Eq, -1.0);
        assert_eq!(solve_lp(&lp), Err(LpError::Infeasible));
    }

    #[test]
    fn unbounded_verdict() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(x, 1.0)], Cmp::Ge, 1.0);
        assert_eq!(solve_lp(&lp), Err(LpError::Unbounded));
    }

    #[test]
    fn lp_text_lists_everything() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(2.0, 0.0, 1.0);
        let y = lp.add_var(-1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![(x, 1.0), (y, -3.0)], Cmp::Le, 4.0);
        let t = lp.to_lp_text(&["x".into(), "y".into()]);
        assert!(t.contains(" obj: + 2 x - 1 y"));
        assert!(t.contains(" c0: + 1 x - 3 y <= 4"));
        assert!(t.contains(" y free"));
    }
}
