//! Constructive feasibility certificate for the per-event QCQP.
//!
//! The candidate coefficient map C with `P(0) C = K` is verified against
//! the decrease inequality `(F + G C)' P (F + G C) - alpha^tau P < 0` by a
//! symmetric eigenvalue check, per tau. A general semidefinite solve over
//! an unknown C is out of scope; the constructive candidate is all the
//! pipeline needs.

use crate::basis::{BasisKind, BasisSet};
use crate::error::{EtpcError, Result};
use crate::horizon::HorizonData;
use crate::linalg::{sym_eig_extremes, Mat};

/// Strictness margin on the eigenvalue check; strict feasibility of the
/// certificate point is required as the barrier start.
pub const LMI_MARGIN: f64 = 1e-12;

/// A verified feasibility certificate for events.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub c: Mat,
    pub k: Mat,
    pub p: Mat,
    pub q: Mat,
    pub alpha: f64,
    pub m_max: usize,
}

/// Check that the basis has a constant nonzero phi_0 and phi_j(0) = 0 for
/// j >= 1, the pattern under which `P(0) C = K` has the closed-form
/// solution used here.
fn check_zero_pattern(basis: &BasisSet) -> Result<f64> {
    let phi0 = basis.eval_phi(0);
    if phi0[0] == 0.0 || phi0.iter().skip(1).any(|v| *v != 0.0) {
        return Err(EtpcError::BasisZeroPattern);
    }
    if let BasisKind::Tabulated(table) = basis.kind() {
        if table[0].iter().any(|v| *v != table[0][0]) {
            return Err(EtpcError::BasisZeroPattern);
        }
    }
    Ok(phi0[0])
}

/// Build C with `P(0) C = K` exactly: the rows for each channel's phi_0
/// coefficient carry `K / phi_0(0)`, all other rows are zero.
pub fn construct_c(k: &Mat, basis: &BasisSet) -> Result<Mat> {
    let phi0 = check_zero_pattern(basis)?;
    let m = k.nrows();
    let n = k.ncols();
    let w = basis.len();
    let mut c = Mat::zeros(m * w, n);
    for i in 0..m {
        for j in 0..n {
            c[(i * w, j)] = k[(i, j)] / phi0;
        }
    }
    Ok(c)
}

/// True iff `(F(tau) + G(tau) C)' P (F(tau) + G(tau) C) - alpha^tau P` is
/// negative definite with margin `LMI_MARGIN`.
pub fn lmi_holds(c: &Mat, h: &HorizonData, p: &Mat, alpha: f64, tau: usize) -> bool {
    debug_assert!(tau >= 1);
    let closed = &h.f[tau] + &h.g[tau] * c;
    let mut s = closed.transpose() * p * closed - p * alpha.powi(tau as i32);
    s = (&s + s.transpose()) * 0.5;
    match sym_eig_extremes(&s) {
        Ok(e) => e.lambda_max < -LMI_MARGIN,
        Err(_) => false,
    }
}

/// Largest M <= N such that the decrease inequality holds for all
/// tau in [1, M]; 0 if it already fails at tau = 1.
pub fn max_feasible_m(c: &Mat, h: &HorizonData, p: &Mat, alpha: f64, n: usize) -> usize {
    let mut m = 0;
    for tau in 1..=n.min(h.n) {
        if lmi_holds(c, h, p, alpha, tau) {
            m = tau;
        } else {
            break;
        }
    }
    m
}

/// Lower end of the decrease-rate interval `[1 - lambda_min(Q)/lambda_max(P), 1)`
/// for which the Lyapunov-equation certificate is guaranteed at M = 1.
pub fn alpha_floor(p: &Mat, q: &Mat) -> Result<f64> {
    let ep = sym_eig_extremes(p)?;
    let eq = sym_eig_extremes(q)?;
    if ep.lambda_min <= 0.0 {
        return Err(EtpcError::NotPositiveDefinite {
            lambda_min: ep.lambda_min,
        });
    }
    if eq.lambda_min <= 0.0 {
        return Err(EtpcError::NotPositiveDefinite {
            lambda_min: eq.lambda_min,
        });
    }
    Ok(1.0 - eq.lambda_min / ep.lambda_max)
}
