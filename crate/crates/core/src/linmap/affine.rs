use crate::sequence_form::StandardPolytope;
use nalgebra::{DMatrix, DVector};

/// Matrix of the affine map `x ↦ F x + c` on Q: since `x[∅] = 1` on Q the
/// offset is folded into the ∅ column.
pub fn affine_lift(f: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let mut a = f.clone();
    let mut col = a.column_mut(0);
    col += c;
    a
}

/// `{y ∈ R^n : C y ≤ c}`, assumed to lie in `[−γ, γ]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityPolytope {
    pub c_mat: DMatrix<f64>,
    pub c_vec: DVector<f64>,
    pub gamma: f64,
}

/// Standard-form image of an inequality polytope: shifted variables
/// `ỹ = y + γ1` and scaled slacks `s = (c − C y) / (κ n)`, κ the largest
/// absolute entry of C and c.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackLift {
    pub n: usize,
    pub m: usize,
    pub scale: f64,
    pub shift: f64,
    pub polytope: StandardPolytope,
}

impl InequalityPolytope {
    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        (&self.c_mat * y - &self.c_vec).iter().all(|&v| v <= tol)
    }

    /// Rows `[C | κn I] (ỹ, s) = c + γ C 1` with `(ỹ, s) ≥ 0`. The slacks are
    /// at most `1/n + γ`, so the box bound is `max(2γ, γ + 1/n)`.
    pub fn slack_lift(&self) -> SlackLift {
        let (m, n) = self.c_mat.shape();
        let kappa = self.c_mat.amax().max(self.c_vec.amax());
        let kappa = if kappa > 0.0 { kappa } else { 1.0 };
        let scale = kappa * n as f64;
        let mut mat = DMatrix::zeros(m, n + m);
        mat.view_mut((0, 0), (m, n)).copy_from(&self.c_mat);
        for i in 0..m {
            mat[(i, n + i)] = scale;
        }
        let rhs = &self.c_vec + &self.c_mat * DVector::from_element(n, self.gamma);
        let bound = (2.0 * self.gamma).max(self.gamma + 1.0 / n as f64);
        let labels = (0..n)
            .map(|i| format!("y{i}"))
            .chain((0..m).map(|i| format!("s{i}")))
            .collect();
        SlackLift {
            n,
            m,
            scale,
            shift: self.gamma,
            polytope: StandardPolytope::new(mat, rhs, bound, labels),
        }
    }
}

impl SlackLift {
    pub fn lift_point(&self, y: &DVector<f64>, c_mat: &DMatrix<f64>, c_vec: &DVector<f64>) -> DVector<f64> {
        let s = (c_vec - c_mat * y) / self.scale;
        let shifted = y.add_scalar(self.shift);
        DVector::from_iterator(self.n + self.m, shifted.iter().chain(s.iter()).cloned())
    }

    /// Matrix over the lifted coordinates realizing `x ↦ (g(x) + γ1, s(g(x)))`
    /// for the affine map `g(x) = F x + c` into the inequality polytope.
    pub fn lift_affine(&self, ineq: &InequalityPolytope, f: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
        let g = affine_lift(f, c);
        let cols = g.ncols();
        let top = affine_lift(&g, &DVector::from_element(self.n, self.shift));
        let mut offset = DMatrix::zeros(self.m, cols);
        offset.set_column(0, &ineq.c_vec);
        let slack = (offset - &ineq.c_mat * &g) / self.scale;
        let mut out = DMatrix::zeros(self.n + self.m, cols);
        out.view_mut((0, 0), (self.n, cols)).copy_from(&top);
        out.view_mut((self.n, 0), (self.m, cols)).copy_from(&slack);
        out
    }

    /// Drops the slack rows and undoes the shift in the ∅ column.
    pub fn to_affine(&self, lifted: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = lifted.rows(0, self.n).into_owned();
        let mut col = a.column_mut(0);
        col.add_scalar_mut(-self.shift);
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::build_decision_process_game;
    use crate::linmap::{canonicalize, check_membership, compile_linmap_system, DeviationMatrix};
    use crate::sequence_form::{derive_sequence_index, enumerate_reduced_plans};
    use rand::{Rng, SeedableRng};

    fn triangle() -> InequalityPolytope {
        // y1 ≥ −1, y2 ≥ −1, y1 + y2 ≤ 1
        InequalityPolytope {
            c_mat: DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
            c_vec: DVector::from_vec(vec![1.0, 1.0, 1.0]),
            gamma: 2.0,
        }
    }

    #[test]
    fn lifted_points_satisfy_standard_form() {
        let t = triangle();
        let lift = t.slack_lift();
        for y in [[-1.0, -1.0], [-1.0, 2.0], [2.0, -1.0], [0.0, 0.0]] {
            let y = DVector::from_vec(y.to_vec());
            let z = lift.lift_point(&y, &t.c_mat, &t.c_vec);
            assert!(lift.polytope.contains(&z, 1e-12));
        }
    }

    #[test]
    fn affine_maps_into_inequality_polytope() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let t = triangle();
        let lift = t.slack_lift();
        let sys = compile_linmap_system(&idx, &lift.polytope);
        let plans = enumerate_reduced_plans(&idx, 100).unwrap();
        let (a1, a2) = (idx.find_seq("A", "1").unwrap(), idx.find_seq("A", "2").unwrap());
        let verts = [[-1.0, -1.0], [-1.0, 2.0], [2.0, -1.0]];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            // g(x) = v x[A.1] + w x[A.2] with v, w in the triangle, written
            // with a random offset and a term vanishing on Q.
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                let l: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
                let s: f64 = l.iter().sum();
                DVector::from_fn(2, |i, _| (0..3).map(|k| l[k] / s * verts[k][i]).sum())
            };
            let (v, w) = (pick(&mut rng), pick(&mut rng));
            let c = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let u = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let mut f = DMatrix::zeros(2, idx.num_sequences());
            f.set_column(a1, &(&v - &u));
            f.set_column(a2, &(&w - &u));
            f.set_column(0, &(&u - &c));
            let raw = lift.lift_affine(&t, &f, &c);
            let m = canonicalize(&DeviationMatrix::external(raw), &sys).unwrap();
            assert!(check_membership(&m.matrix, &sys, 1e-7).unwrap().ok);
            let a = lift.to_affine(&m.matrix);
            for p in &plans {
                let x = p.to_vector();
                let g = &f * &x + &c;
                assert!((&a * &x - &g).amax() < 1e-9);
                assert!(t.contains(&g, 1e-9));
            }
        }
    }
}
