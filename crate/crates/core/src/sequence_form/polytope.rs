use super::{SeqFormError, SequenceIndex};
use nalgebra::{DMatrix, DVector};

/// `{x : P x = p, x ≥ 0}` together with a bound γ such that the set lies
/// in `[0, γ]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardPolytope {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub gamma: f64,
    pub labels: Vec<String>,
}

impl StandardPolytope {
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>, gamma: f64, labels: Vec<String>) -> Self {
        assert_eq!(matrix.nrows(), rhs.len());
        assert_eq!(matrix.ncols(), labels.len());
        assert!(gamma > 0.0);
        StandardPolytope {
            matrix,
            rhs,
            gamma,
            labels,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest violation of `Px = p`, `x ≥ 0` and `x ≤ γ`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        let eq = (&self.matrix * x - &self.rhs).amax();
        let bounds = x
            .iter()
            .map(|&v| (-v).max(v - self.gamma))
            .fold(0.0, f64::max);
        eq.max(bounds)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && self.residual(x) <= tol
    }

    pub fn check(&self, x: &DVector<f64>, tol: f64) -> Result<(), SeqFormError> {
        if x.len() != self.dim() {
            return Err(SeqFormError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let residual = self.residual(x);
        if residual > tol {
            return Err(SeqFormError::Infeasible { residual });
        }
        Ok(())
    }

    /// Human-readable equations, one per row.
    pub fn equations(&self) -> Vec<String> {
        (0..self.num_rows())
            .map(|r| {
                let mut lhs = String::new();
                for c in 0..self.dim() {
                    let v = self.matrix[(r, c)];
                    if v == 0.0 {
                        continue;
                    }
                    let sign = match (lhs.is_empty(), v < 0.0) {
                        (true, true) => "-",
                        (true, false) => "",
                        (false, true) => " - ",
                        (false, false) => " + ",
                    };
                    let mag = if v.abs() == 1.0 { String::new() } else { format!("{} ", v.abs()) };
                    lhs.push_str(&format!("{sign}{mag}x[{}]", self.labels[c]));
                }
                format!("{lhs} = {}", self.rhs[r])
            })
            .collect()
    }
}

/// Q: `x[∅] = 1` and `Σ_a x[ja] = x[p_j]` for every infoset j.
pub fn sequence_form_polytope(index: &SequenceIndex) -> StandardPolytope {
    let d = index.num_sequences();
    let k = index.num_infosets() + 1;
    let mut m = DMatrix::zeros(k, d);
    let mut rhs = DVector::zeros(k);
    m[(0, 0)] = 1.0;
    rhs[0] = 1.0;
    for j in 0..index.num_infosets() {
        for s in index.actions(j) {
            m[(j + 1, s)] = 1.0;
        }
        m[(j + 1, index.parent(j))] = -1.0;
    }
    StandardPolytope::new(m, rhs, 1.0, index.seq_labels().to_vec())
}

/// Q_j over the sequences at or below j: `Σ_a x[ja] = 1` plus flow
/// conservation at every infoset strictly below j. Returns the polytope and
/// the global sequence id of each of its coordinates.
pub fn subtree_polytope(index: &SequenceIndex, j: usize) -> Result<(StandardPolytope, Vec<usize>), SeqFormError> {
    if j >= index.num_infosets() {
        return Err(SeqFormError::UnknownInfoset(j));
    }
    let seqs: Vec<usize> = index.subtree(j).collect();
    let offset = seqs[0];
    let infosets: Vec<usize> = (j..index.num_infosets())
        .filter(|&i| index.infoset(i).first_seq >= offset && index.infoset(i).first_seq < offset + seqs.len())
        .collect();
    let mut m = DMatrix::zeros(infosets.len(), seqs.len());
    let mut rhs = DVector::zeros(infosets.len());
    for (r, &i) in infosets.iter().enumerate() {
        for s in index.actions(i) {
            m[(r, s - offset)] = 1.0;
        }
        if i == j {
            rhs[r] = 1.0;
        } else {
            m[(r, index.parent(i) - offset)] = -1.0;
        }
    }
    let labels = seqs.iter().map(|&s| index.seq_label(s).to_string()).collect();
    Ok((StandardPolytope::new(m, rhs, 1.0, labels), seqs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::build_decision_process_game;
    use crate::sequence_form::derive_sequence_index;

    #[test]
    fn decision_process_equations() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let q = sequence_form_polytope(&idx);
        assert_eq!(
            q.equations(),
            vec![
                "x[∅] = 1",
                "-x[∅] + x[A.1] + x[A.2] = 0",
                "-x[A.1] + x[B.3] + x[B.4] = 0",
                "-x[A.1] + x[C.5] + x[C.6] = 0",
                "-x[A.2] + x[D.7] + x[D.8] + x[D.9] = 0",
            ]
        );
    }

    #[test]
    fn subtree_at_d_is_simplex() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let d = idx.infoset_by_label("D").unwrap();
        let (p, seqs) = subtree_polytope(&idx, d).unwrap();
        assert_eq!(seqs, vec![7, 8, 9]);
        assert_eq!(p.matrix, DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
        assert_eq!(p.rhs[0], 1.0);
    }

    #[test]
    fn subtree_at_root_drops_empty_sequence() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let q = sequence_form_polytope(&idx);
        let (p, seqs) = subtree_polytope(&idx, 0).unwrap();
        assert_eq!(seqs, (1..10).collect::<Vec<_>>());
        // Substituting x[∅] = 1 into Q: the remaining rows coincide.
        let sub = q.matrix.view((1, 1), (4, 9)).into_owned();
        assert_eq!(p.matrix, sub);
        let mut rhs = DVector::zeros(4);
        rhs[0] = 1.0;
        assert_eq!(p.rhs, rhs);
        assert!(subtree_polytope(&idx, 9).is_err());
    }
}
