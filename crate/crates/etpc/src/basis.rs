//! The family of scalar functions behind the parameterized control law,
//! and the block matrix mapping a coefficient vector to an input vector.

use crate::error::{EtpcError, Result};
use crate::linalg::{Mat, Vector};

/// How the p+1 scalar functions are defined.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    /// `{1, tau, tau^2, ..., tau^p}`, evaluated by iterative multiplication.
    Monomial,
    /// Tabulated values: `table[j][t]` is phi_j(t) for t in [0, n_max].
    Tabulated(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    p: usize,
    kind: BasisKind,
}

impl BasisSet {
    pub fn monomial(p: usize) -> Self {
        BasisSet {
            p,
            kind: BasisKind::Monomial,
        }
    }

    /// Tabulated basis; every row of the table must have the same length.
    pub fn tabulated(table: Vec<Vec<f64>>) -> Result<Self> {
        if table.is_empty() {
            return Err(EtpcError::InvalidParameter {
                context: "tabulated basis needs at least one function".into(),
            });
        }
        let len = table[0].len();
        if len == 0 || table.iter().any(|row| row.len() != len) {
            return Err(EtpcError::InvalidParameter {
                context: "tabulated basis rows must be nonempty and equal-length".into(),
            });
        }
        Ok(BasisSet {
            p: table.len() - 1,
            kind: BasisKind::Tabulated(table),
        })
    }

    /// Degree parameter: the basis has p+1 functions.
    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.p + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// `[phi_0(tau), ..., phi_p(tau)]`. Evaluation beyond the horizon N is
    /// permitted: the control law stays defined when an inter-event interval
    /// exceeds N.
    ///
    /// Panics for a tabulated basis if `tau` is beyond the table.
    pub fn eval_phi(&self, tau: usize) -> Vector {
        match &self.kind {
            BasisKind::Monomial => {
                let mut v = Vector::zeros(self.p + 1);
                let mut pow = 1.0;
                for j in 0..=self.p {
                    v[j] = pow;
                    pow *= tau as f64;
                }
                v
            }
            BasisKind::Tabulated(table) => {
                assert!(
                    tau < table[0].len(),
                    "tabulated basis evaluated at tau = {tau} beyond table length {}",
                    table[0].len()
                );
                Vector::from_iterator(self.p + 1, table.iter().map(|row| row[tau]))
            }
        }
    }

    /// Block-diagonal `m x m(p+1)` matrix with m copies of phi'(tau), one
    /// per input channel.
    pub fn block_p(&self, tau: usize, m: usize) -> Mat {
        let phi = self.eval_phi(tau);
        let w = self.p + 1;
        let mut out = Mat::zeros(m, m * w);
        for i in 0..m {
            for j in 0..w {
                out[(i, i * w + j)] = phi[j];
            }
        }
        out
    }

    /// True iff the (N+1) x (p+1) evaluation matrix has full column rank,
    /// i.e. the functions are linearly independent on [0, N].
    pub fn check_independence(&self, n: usize) -> bool {
        if self.p + 1 > n + 1 {
            return false;
        }
        if let BasisKind::Tabulated(table) = &self.kind {
            if n >= table[0].len() {
                return false;
            }
        }
        let eval = Mat::from_fn(n + 1, self.p + 1, |t, j| self.eval_phi(t)[j]);
        let sv = eval.singular_values();
        let tol = 1e-10 * sv[0].max(1.0);
        sv.iter().filter(|s| **s > tol).count() == self.p + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_eval() {
        let b = BasisSet::monomial(2);
        assert_eq!(b.eval_phi(0).as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(b.eval_phi(3).as_slice(), &[1.0, 3.0, 9.0]);
        let b = BasisSet::monomial(3);
        assert_eq!(b.eval_phi(2).as_slice(), &[1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn block_structure() {
        let b = BasisSet::monomial(1);
        let p = b.block_p(0, 2);
        assert_eq!(p, Mat::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]));

        let b = BasisSet::monomial(0);
        assert_eq!(b.block_p(7, 1), Mat::from_row_slice(1, 1, &[1.0]));

        let b = BasisSet::monomial(2);
        assert_eq!(b.block_p(2, 1), Mat::from_row_slice(1, 3, &[1.0, 2.0, 4.0]));
    }

    #[test]
    fn independence() {
        assert!(BasisSet::monomial(3).check_independence(25));
        assert!(!BasisSet::monomial(2).check_independence(1));
        let dup = BasisSet::tabulated(vec![vec![1.0; 10], vec![1.0; 10]]).unwrap();
        assert!(!dup.check_independence(5));
    }

    #[test]
    fn monomial_vandermonde_rank() {
        for p in 0..6 {
            for n in p..10 {
                assert!(BasisSet::monomial(p).check_independence(n), "p={p} n={n}");
            }
        }
    }

    #[test]
    fn block_p_reshapes_to_per_channel_inner_products() {
        let b = BasisSet::monomial(2);
        let m = 3;
        let a = Vector::from_iterator(m * 3, (0..9).map(|i| 0.3 * i as f64 - 1.0));
        let u = b.block_p(4, m) * &a;
        let phi = b.eval_phi(4);
        for i in 0..m {
            let ai = a.rows(i * 3, 3);
            assert_relative_eq!(u[i], phi.dot(&ai.into_owned()), epsilon = 1e-14);
        }
    }
}
