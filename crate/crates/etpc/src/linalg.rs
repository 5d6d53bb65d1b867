//! Dense real matrix substrate: powers, symmetric eigen-extremes, spectral
//! norm, definiteness tests and the discrete Lyapunov solve used to build
//! the Lyapunov certificate.

use nalgebra::{DMatrix, DVector};

use crate::error::{EtpcError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Margin used when testing eigenvalues against the unit circle.
pub const STABILITY_MARGIN: f64 = 1e-12;

/// Extreme eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigExtremes {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// A^tau by repeated squaring; A^0 is the identity.
pub fn mat_pow(a: &Mat, tau: usize) -> Result<Mat> {
    if !a.is_square() {
        return Err(EtpcError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut result = Mat::identity(n, n);
    let mut base = a.clone();
    let mut e = tau;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    Ok(result)
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values()[0]
}

fn max_asymmetry(p: &Mat) -> f64 {
    let mut asym: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in (i + 1)..p.ncols() {
            asym = asym.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    asym
}

/// Extreme eigenvalues of a symmetric matrix. Rejects inputs whose
/// asymmetry exceeds `1e-10 * max(1, ||P||_max)`.
pub fn sym_eig_extremes(p: &Mat) -> Result<SymEigExtremes> {
    if !p.is_square() {
        return Err(EtpcError::NotSquare {
            rows: p.nrows(),
            cols: p.ncols(),
        });
    }
    let scale = p.amax().max(1.0);
    let asym = max_asymmetry(p);
    if asym > 1e-10 * scale {
        return Err(EtpcError::NotSymmetric { asym });
    }
    let eig = p.clone().symmetric_eigen();
    let lambda_min = eig.eigenvalues.min();
    let lambda_max = eig.eigenvalues.max();
    Ok(SymEigExtremes {
        lambda_min,
        lambda_max,
    })
}

/// True iff the spectral radius of `a` is below `1 - STABILITY_MARGIN`.
pub fn is_schur_stable(a: &Mat) -> bool {
    spectral_radius(a) < 1.0 - STABILITY_MARGIN
}

pub fn spectral_radius(a: &Mat) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// True iff `q` is symmetric positive definite.
pub fn is_spd(q: &Mat) -> bool {
    matches!(sym_eig_extremes(q), Ok(e) if e.lambda_min > 0.0)
}

/// Solve the discrete Lyapunov equation `Acl' P Acl - P = -Q` for P,
/// via Kronecker vectorization: `(I - Acl' (x) Acl') vec(P) = vec(Q)`.
///
/// `Acl` must be Schur stable and `Q` symmetric positive definite; the
/// returned P is then symmetric positive definite.
pub fn solve_discrete_lyapunov(acl: &Mat, q: &Mat) -> Result<Mat> {
    if !acl.is_square() {
        return Err(EtpcError::NotSquare {
            rows: acl.nrows(),
            cols: acl.ncols(),
        });
    }
    let rho = spectral_radius(acl);
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(EtpcError::NotSchurStable { rho });
    }
    let ex = sym_eig_extremes(q)?;
    if ex.lambda_min <= 0.0 {
        return Err(EtpcError::NotPositiveDefinite {
            lambda_min: ex.lambda_min,
        });
    }
    if acl.nrows() != q.nrows() {
        return Err(EtpcError::DimensionMismatch {
            context: format!("Lyapunov: Acl is {0}x{0}, Q is {1}x{1}", acl.nrows(), q.nrows()),
        });
    }
    let n = acl.nrows();
    let at = acl.transpose();
    // vec(Acl' P Acl) = (Acl' (x) Acl') vec(P) in column-major vec order.
    let kron = at.kronecker(&at);
    let system = Mat::identity(n * n, n * n) - kron;
    let rhs = Vector::from_column_slice(q.as_slice());
    let vec_p = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| EtpcError::SingularSystem {
            context: "Lyapunov Kronecker system".into(),
        })?;
    let p = Mat::from_column_slice(n, n, vec_p.as_slice());
    // Symmetrize away roundoff.
    Ok((&p + p.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn example1_a() -> Mat {
        Mat::from_row_slice(3, 3, &[0.7, -0.1, -0.1, 0.0, 0.8, -0.4, 0.0, 0.0, 1.2])
    }

    #[test]
    fn mat_pow_identity_and_scalar() {
        let i3 = Mat::identity(3, 3);
        assert_eq!(mat_pow(&i3, 5).unwrap(), i3);
        let s = Mat::from_row_slice(1, 1, &[2.0]);
        assert_eq!(mat_pow(&s, 3).unwrap()[(0, 0)], 8.0);
        assert_eq!(mat_pow(&s, 0).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn mat_pow_matches_repeated_multiplication() {
        let a = example1_a();
        let naive = &a * &a;
        let fast = mat_pow(&a, 2).unwrap();
        assert_relative_eq!(fast, naive, epsilon = 1e-12);
    }

    #[test]
    fn mat_pow_rejects_non_square() {
        let a = Mat::zeros(2, 3);
        assert!(matches!(mat_pow(&a, 1), Err(EtpcError::NotSquare { .. })));
    }

    #[test]
    fn spectral_norm_trivial_cases() {
        assert_relative_eq!(spectral_norm(&Mat::identity(3, 3)), 1.0, epsilon = 1e-12);
        let d = Mat::from_diagonal(&Vector::from_column_slice(&[0.7, 0.8, 1.2]));
        assert_relative_eq!(spectral_norm(&d), 1.2, epsilon = 1e-12);
    }

    /// Power iteration on A'A, independent of the SVD path.
    pub(crate) fn spectral_norm_power_iteration(a: &Mat) -> f64 {
        let ata = a.transpose() * a;
        let mut v = Vector::from_element(a.ncols(), 1.0).normalize();
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let w = &ata * &v;
            let next = w.norm();
            v = w / next;
            if (next - lambda).abs() <= 1e-12 * next.max(1.0) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let a = example1_a();
        let oracle = spectral_norm_power_iteration(&a);
        assert_relative_eq!(spectral_norm(&a), oracle, epsilon = 1e-10);
    }

    #[test]
    fn sym_eig_extremes_diagonal() {
        let e = sym_eig_extremes(&Mat::identity(2, 2)).unwrap();
        assert_eq!((e.lambda_min, e.lambda_max), (1.0, 1.0));
        let d = Mat::from_diagonal(&Vector::from_column_slice(&[2.0, 5.0]));
        let e = sym_eig_extremes(&d).unwrap();
        assert_eq!((e.lambda_min, e.lambda_max), (2.0, 5.0));
    }

    #[test]
    fn sym_eig_extremes_rejects_asymmetric() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            sym_eig_extremes(&a),
            Err(EtpcError::NotSymmetric { .. })
        ));
    }

    /// Roots of the characteristic polynomial of a 3x3 symmetric matrix by
    /// bisection on det(P - lambda I); oracle for the eigensolver.
    fn charpoly_extremes_3x3(p: &Mat) -> (f64, f64) {
        let det = |l: f64| {
            let m = p - Mat::identity(3, 3) * l;
            m.determinant()
        };
        let bound = spectral_norm(p) + 1.0;
        let mut roots = Vec::new();
        let samples = 400_000;
        let mut prev_l = -bound;
        let mut prev_v = det(prev_l);
        for i in 1..=samples {
            let l = -bound + 2.0 * bound * (i as f64) / (samples as f64);
            let v = det(l);
            if prev_v == 0.0 {
                roots.push(prev_l);
            } else if prev_v * v < 0.0 {
                let (mut lo, mut hi) = (prev_l, l);
                let (mut flo, _) = (prev_v, v);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = det(mid);
                    if flo * fm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_l = l;
            prev_v = v;
        }
        (roots[0], *roots.last().unwrap())
    }

    #[test]
    fn example1_lyapunov_matrix_eig_extremes_match_charpoly_roots() {
        let p = example1_solved_p();
        let e = sym_eig_extremes(&p).unwrap();
        let (lo, hi) = charpoly_extremes_3x3(&p);
        assert_relative_eq!(e.lambda_min, lo, epsilon = 1e-9);
        assert_relative_eq!(e.lambda_max, hi, epsilon = 1e-9);
    }

    pub(crate) fn example1_solved_p() -> Mat {
        let a = example1_a();
        let b = Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let k = Mat::from_row_slice(1, 3, &[0.0, 0.0, -0.3]);
        let acl = &a + &b * &k;
        solve_discrete_lyapunov(&acl, &(Mat::identity(3, 3) * 0.01)).unwrap()
    }

    #[test]
    fn lyapunov_trivial_cases() {
        let q = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let p = solve_discrete_lyapunov(&Mat::zeros(2, 2), &q).unwrap();
        assert_relative_eq!(p, q, epsilon = 1e-14);

        let p = solve_discrete_lyapunov(
            &Mat::from_row_slice(1, 1, &[0.5]),
            &Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        assert_relative_eq!(p[(0, 0)], 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_matches_series_summation() {
        let p = example1_solved_p();
        // Oracle: P = sum_k (Acl')^k Q Acl^k, truncated at machine precision.
        let a = example1_a();
        let b = Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let k = Mat::from_row_slice(1, 3, &[0.0, 0.0, -0.3]);
        let acl = &a + &b * &k;
        let q = Mat::identity(3, 3) * 0.01;
        let mut sum = q.clone();
        let mut term = q.clone();
        for _ in 0..2000 {
            term = acl.transpose() * term * &acl;
            sum += &term;
            if term.amax() < 1e-18 {
                break;
            }
        }
        assert_relative_eq!(p, sum, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let q = Mat::identity(3, 3);
        assert!(matches!(
            solve_discrete_lyapunov(&example1_a(), &q),
            Err(EtpcError::NotSchurStable { .. })
        ));
    }

    #[test]
    fn schur_stability_cases() {
        assert!(is_schur_stable(&Mat::zeros(2, 2)));
        assert!(!is_schur_stable(&Mat::identity(2, 2)));
        assert!(!is_schur_stable(&example1_a()));
    }
}
