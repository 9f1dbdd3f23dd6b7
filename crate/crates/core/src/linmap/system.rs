use super::LinMapError;
use crate::convex_opt::{AffineBoxSet, Cmp, LinearProgram, Sense};
use crate::sequence_form::{sequence_form_polytope, SequenceIndex, StandardPolytope};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `P·A_(ja) = b_j` for terminal ja.
    TerminalColumn,
    /// `A_(σ) = 0` for non-terminal σ.
    NonTerminalZero,
    /// `Σ_{j ∈ C_∅} b_j = p`.
    Root,
    /// `Σ_{j' ∈ C_ja} b_j' = b_j` for non-terminal ja.
    Propagation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemRow {
    pub kind: ConstraintKind,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Explicit constraint system for M(Q → P).
///
/// Variables are the entries `A[r, σ]` (index `σ·d + r`) followed by the
/// auxiliary vectors `b_j` (index `d·|Σ| + j·k + r`). Entries of A carry the
/// bounds `[0, γ]`; the b variables are free.
#[derive(Debug, Clone)]
pub struct LinMapSystem {
    pub source: SequenceIndex,
    pub target: StandardPolytope,
    pub rows: Vec<SystemRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub ok: bool,
    /// Largest violation over all constraints and bounds.
    pub residual: f64,
    pub violations: Vec<String>,
    /// The b_j read off bottom-up.
    pub b: Vec<DVector<f64>>,
}

/// M with the b variables eliminated: the unknowns are the entries of the
/// terminal columns only, and the non-terminal columns are implicitly zero.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub set: AffineBoxSet,
    /// Terminal sequences, in the order their columns appear in the unknowns.
    pub columns: Vec<usize>,
    pub d: usize,
    pub num_sequences: usize,
}

impl ReducedSystem {
    pub fn to_matrix(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.d, self.num_sequences);
        for (t, &s) in self.columns.iter().enumerate() {
            for r in 0..self.d {
                a[(r, s)] = y[t * self.d + r];
            }
        }
        a
    }

    /// Terminal-column entries of `a`; other columns are dropped.
    pub fn from_matrix(&self, a: &DMatrix<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.columns.len() * self.d);
        for (t, &s) in self.columns.iter().enumerate() {
            for r in 0..self.d {
                y[t * self.d + r] = a[(r, s)];
            }
        }
        y
    }
}

type Expr = Vec<BTreeMap<usize, f64>>;

fn add_into(acc: &mut Expr, other: &Expr, sign: f64) {
    for (row, o) in acc.iter_mut().zip(other) {
        for (&i, &v) in o {
            *row.entry(i).or_insert(0.0) += sign * v;
        }
    }
}

fn expr_terms(row: &BTreeMap<usize, f64>) -> Vec<(usize, f64)> {
    row.iter().filter(|e| e.1.abs() > 1e-15).map(|(&i, &v)| (i, v)).collect()
}

impl LinMapSystem {
    /// Output dimension d.
    pub fn d(&self) -> usize {
        self.target.dim()
    }

    /// Number of target equality rows k.
    pub fn k(&self) -> usize {
        self.target.num_rows()
    }

    pub fn num_sequences(&self) -> usize {
        self.source.num_sequences()
    }

    pub fn num_vars(&self) -> usize {
        self.d() * self.num_sequences() + self.k() * self.source.num_infosets()
    }

    pub fn var_a(&self, r: usize, seq: usize) -> usize {
        seq * self.d() + r
    }

    pub fn var_b(&self, j: usize, r: usize) -> usize {
        self.d() * self.num_sequences() + j * self.k() + r
    }

    pub fn variable_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_vars());
        for s in 0..self.num_sequences() {
            for r in 0..self.d() {
                names.push(format!("A[{r},{s}]"));
            }
        }
        for j in 0..self.source.num_infosets() {
            for r in 0..self.k() {
                names.push(format!("b[{j},{r}]"));
            }
        }
        names
    }

    /// LP over the explicit system with objective `⟨C, A⟩` (C is d×|Σ|).
    pub fn to_lp(&self, objective: &DMatrix<f64>, sense: Sense) -> LinearProgram {
        let mut lp = LinearProgram::new(sense);
        for s in 0..self.num_sequences() {
            for r in 0..self.d() {
                lp.add_var(objective[(r, s)], 0.0, self.target.gamma);
            }
        }
        for _ in 0..self.k() * self.source.num_infosets() {
            lp.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY);
        }
        for row in &self.rows {
            lp.add_row(row.terms.clone(), Cmp::Eq, row.rhs);
        }
        lp
    }

    pub fn matrix_from_solution(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.d(), self.num_sequences(), |r, s| x[self.var_a(r, s)])
    }

    /// LP-format text of the feasibility system with a zero objective.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "\\ M(Q->P): |Sigma| = {}, d = {}, k = {}, gamma = {}, {} variables, {} rows",
            self.num_sequences(),
            self.d(),
            self.k(),
            self.target.gamma,
            self.num_vars(),
            self.rows.len()
        )
        .unwrap();
        for (s, l) in self.source.seq_labels().iter().enumerate() {
            writeln!(out, "\\ sequence {s}: {l}").unwrap();
        }
        let zero = DMatrix::zeros(self.d(), self.num_sequences());
        out.push_str(&self.to_lp(&zero, Sense::Minimize).to_lp_text(&self.variable_names()));
        out
    }

    fn check_shape(&self, a: &DMatrix<f64>) -> Result<(), LinMapError> {
        if a.nrows() != self.d() || a.ncols() != self.num_sequences() {
            return Err(LinMapError::Shape {
                rows: a.nrows(),
                cols: a.ncols(),
                expected_rows: self.d(),
                expected_cols: self.num_sequences(),
            });
        }
        Ok(())
    }

    /// Eliminates the b variables: each b_j is expressed through the
    /// terminal columns below j's first action, the remaining actions must
    /// agree with it, and the children of ∅ must close at p.
    pub fn reduced(&self) -> ReducedSystem {
        let idx = &self.source;
        let (d, k) = (self.d(), self.k());
        let columns = idx.terminal_sequences();
        let mut pos = vec![usize::MAX; idx.num_sequences()];
        for (t, &s) in columns.iter().enumerate() {
            pos[s] = t;
        }
        let p = &self.target.matrix;
        let column_expr = |s: usize| -> Expr {
            (0..k)
                .map(|r| {
                    (0..d)
                        .filter(|&c| p[(r, c)] != 0.0)
                        .map(|c| (pos[s] * d + c, p[(r, c)]))
                        .collect()
                })
                .collect()
        };
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let nj = idx.num_infosets();
        let mut b: Vec<Expr> = vec![Vec::new(); nj];
        for j in (0..nj).rev() {
            let mut exprs = Vec::new();
            for s in idx.actions(j) {
                let e = if idx.is_terminal(s) {
                    column_expr(s)
                } else {
                    let mut acc: Expr = vec![BTreeMap::new(); k];
                    for &c in idx.children(s) {
                        add_into(&mut acc, &b[c], 1.0);
                    }
                    acc
                };
                exprs.push(e);
            }
            let first = exprs.swap_remove(0);
            for mut e in exprs {
                add_into(&mut e, &first, -1.0);
                for row in &e {
                    let terms = expr_terms(row);
                    if !terms.is_empty() {
                        rows.push(terms);
                        rhs.push(0.0);
                    }
                }
            }
            b[j] = first;
        }
        let root: Expr = if nj == 0 {
            column_expr(0)
        } else {
            let mut acc = vec![BTreeMap::new(); k];
            for &c in idx.children(0) {
                add_into(&mut acc, &b[c], 1.0);
            }
            acc
        };
        for (r, row) in root.iter().enumerate() {
            rows.push(expr_terms(row));
            rhs.push(self.target.rhs[r]);
        }
        let n = columns.len() * d;
        ReducedSystem {
            set: AffineBoxSet {
                rows,
                rhs,
                lo: vec![0.0; n],
                hi: vec![self.target.gamma; n],
            },
            columns,
            d,
            num_sequences: idx.num_sequences(),
        }
    }
}

/// Compiles constraints (2)–(6) for M(Q → P).
///
/// A source with no infosets has the single sequence ∅, which is then
/// terminal; its column is constrained by `P·A_(∅) = p`.
pub fn compile_linmap_system(source: &SequenceIndex, target: &StandardPolytope) -> LinMapSystem {
    let mut sys = LinMapSystem {
        source: source.clone(),
        target: target.clone(),
        rows: Vec::new(),
    };
    let (d, k) = (sys.d(), sys.k());
    let p = &target.matrix;
    let p_times_column = |sys: &LinMapSystem, s: usize, r: usize| -> Vec<(usize, f64)> {
        (0..d)
            .filter(|&c| p[(r, c)] != 0.0)
            .map(|c| (sys.var_a(c, s), p[(r, c)]))
            .collect()
    };
    let mut rows = Vec::new();
    for j in 0..source.num_infosets() {
        for s in source.actions(j) {
            if source.is_terminal(s) {
                for r in 0..k {
                    let mut terms = p_times_column(&sys, s, r);
                    terms.push((sys.var_b(j, r), -1.0));
                    rows.push(SystemRow {
                        kind: ConstraintKind::TerminalColumn,
                        terms,
                        rhs: 0.0,
                    });
                }
            } else {
                for r in 0..k {
                    let mut terms: Vec<(usize, f64)> =
                        source.children(s).iter().map(|&c| (sys.var_b(c, r), 1.0)).collect();
                    terms.push((sys.var_b(j, r), -1.0));
                    rows.push(SystemRow {
                        kind: ConstraintKind::Propagation,
                        terms,
                        rhs: 0.0,
                    });
                }
            }
        }
    }
    for s in 0..source.num_sequences() {
        if !source.is_terminal(s) {
            for r in 0..d {
                rows.push(SystemRow {
                    kind: ConstraintKind::NonTerminalZero,
                    terms: vec![(sys.var_a(r, s), 1.0)],
                    rhs: 0.0,
                });
            }
        }
    }
    for r in 0..k {
        let terms = if source.num_infosets() == 0 {
            p_times_column(&sys, 0, r)
        } else {
            source.children(0).iter().map(|&c| (sys.var_b(c, r), 1.0)).collect()
        };
        rows.push(SystemRow {
            kind: ConstraintKind::Root,
            terms,
            rhs: target.rhs[r],
        });
    }
    sys.rows = rows;
    sys
}

/// M(Q → Q) with γ = 1.
pub fn compile_self_map_system(index: &SequenceIndex) -> LinMapSystem {
    compile_linmap_system(index, &sequence_form_polytope(index))
}

const MAX_REPORTED: usize = 20;

/// Decides membership in M by reading b_j off the terminal columns bottom-up.
pub fn check_membership(a: &DMatrix<f64>, system: &LinMapSystem, tol: f64) -> Result<MembershipReport, LinMapError> {
    system.check_shape(a)?;
    let idx = &system.source;
    let target = &system.target;
    let mut residual: f64 = 0.0;
    let mut violations = Vec::new();
    let mut note = |what: String, v: f64, residual: &mut f64| {
        *residual = residual.max(v);
        if v > tol && violations.len() < MAX_REPORTED {
            violations.push(format!("{what}: {v:e}"));
        }
    };
    for s in 0..idx.num_sequences() {
        for r in 0..system.d() {
            let v = a[(r, s)];
            let out = if idx.is_terminal(s) {
                (-v).max(v - target.gamma).max(0.0)
            } else {
                v.abs()
            };
            if out > 0.0 {
                let kind = if idx.is_terminal(s) { "bound" } else { "non-terminal column" };
                note(format!("{kind} A[{r},{}]", idx.seq_label(s)), out, &mut residual);
            }
        }
    }
    let column = |s: usize| -> DVector<f64> { &target.matrix * a.column(s) };
    let nj = idx.num_infosets();
    let mut b = vec![DVector::zeros(system.k()); nj];
    for j in (0..nj).rev() {
        let mut first: Option<DVector<f64>> = None;
        for s in idx.actions(j) {
            let v = if idx.is_terminal(s) {
                column(s)
            } else {
                idx.children(s).iter().fold(DVector::zeros(system.k()), |acc, &c| acc + &b[c])
            };
            match &first {
                None => first = Some(v),
                Some(f) => {
                    let gap = (&v - f).amax();
                    note(
                        format!("b disagreement at {} between actions", idx.seq_label(s)),
                        gap,
                        &mut residual,
                    );
                }
            }
        }
        b[j] = first.unwrap_or_else(|| DVector::zeros(system.k()));
    }
    let root = if nj == 0 {
        column(0)
    } else {
        idx.children(0).iter().fold(DVector::zeros(system.k()), |acc, &c| acc + &b[c])
    };
    note("root closure".to_string(), (root - &target.rhs).amax(), &mut residual);
    Ok(MembershipReport {
        ok: residual <= tol,
        residual,
        violations,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_opt::{project, solve_lp};
    use crate::efg_model::build_decision_process_game;
    use crate::sequence_form::{derive_sequence_index, enumerate_reduced_plans};
    use rand::{Rng, SeedableRng};

    fn fig() -> SequenceIndex {
        derive_sequence_index(&build_decision_process_game(), 0)
    }

    fn simplex_index(n: usize) -> SequenceIndex {
        let actions = (1..=n).map(|a| a.to_string()).collect();
        SequenceIndex::from_infosets(0, &[("s".to_string(), actions, 0)])
    }

    #[test]
    fn decision_process_variable_count() {
        let sys = compile_self_map_system(&fig());
        assert_eq!(sys.num_vars(), 10 * 10 + 5 * 4);
        assert_eq!(sys.variable_names().len(), sys.num_vars());
    }

    #[test]
    fn base_case_columns_lie_in_target() {
        let idx = simplex_index(3);
        let sys = compile_self_map_system(&idx);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let c = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let sol = solve_lp(&sys.to_lp(&c, Sense::Minimize)).unwrap();
            let a = sys.matrix_from_solution(&sol.x);
            assert!(a.column(0).amax() < 1e-12);
            for s in 1..4 {
                let col = a.column(s).into_owned();
                assert!(sys.target.residual(&col) < 1e-9);
            }
        }
    }

    #[test]
    fn random_members_map_plans_into_q() {
        let idx = fig();
        let sys = compile_self_map_system(&idx);
        let plans = enumerate_reduced_plans(&idx, 100).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = DMatrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
            let sol = solve_lp(&sys.to_lp(&c, Sense::Maximize)).unwrap();
            let a = sys.matrix_from_solution(&sol.x);
            assert!(check_membership(&a, &sys, 1e-7).unwrap().ok);
            assert!(a.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
            for p in &plans {
                assert!(sys.target.residual(&(&a * p.to_vector())) < 1e-7);
            }
        }
    }

    #[test]
    fn zero_and_identity_are_rejected() {
        let idx = fig();
        let sys = compile_self_map_system(&idx);
        let zero = DMatrix::zeros(10, 10);
        let r = check_membership(&zero, &sys, 1e-9).unwrap();
        assert!(!r.ok && r.violations.iter().any(|v| v.contains("root")));
        let id = DMatrix::identity(10, 10);
        let r = check_membership(&id, &sys, 1e-9).unwrap();
        assert!(!r.ok && r.violations.iter().any(|v| v.contains("non-terminal")));
    }

    #[test]
    fn shape_is_checked() {
        let sys = compile_self_map_system(&fig());
        assert!(matches!(
            check_membership(&DMatrix::zeros(3, 3), &sys, 1e-9),
            Err(LinMapError::Shape { .. })
        ));
    }

    #[test]
    fn reduced_projection_lands_in_m() {
        let idx = fig();
        let sys = compile_self_map_system(&idx);
        let red = sys.reduced();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let q = DMatrix::from_fn(10, 10, |_, _| rng.gen_range(-0.5..1.5));
            let p = project(&red.set, &red.from_matrix(&q), 1e-12).unwrap();
            let a = red.to_matrix(&p.y);
            assert!(check_membership(&a, &sys, 1e-8).unwrap().ok);
        }
    }

    #[test]
    fn dump_mentions_every_row() {
        let sys = compile_self_map_system(&simplex_index(2));
        let text = sys.dump();
        assert!(text.contains("Subject To"));
        assert!(text.matches(" c").count() >= sys.rows.len());
        assert!(text.contains("b[0,0] free"));
    }

    #[test]
    fn single_sequence_source() {
        let idx = SequenceIndex::from_infosets(0, &[]);
        let sys = compile_self_map_system(&idx);
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(check_membership(&one, &sys, 1e-12).unwrap().ok);
        let red = sys.reduced();
        let p = project(&red.set, &DVector::from_element(1, 0.3), 1e-12).unwrap();
        assert!((p.y[0] - 1.0).abs() < 1e-12);
    }
}
