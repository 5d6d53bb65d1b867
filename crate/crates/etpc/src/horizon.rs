//! Precomputed nominal-rollout matrices F(tau) = A^tau and
//! G(tau) = sum_j A^(tau-1-j) B P(j), and assembly of the per-event QCQP.
//!
//! F and G depend only on (model, basis, N) and are computed once, then
//! reused for every event and every initial condition.

use crate::basis::BasisSet;
use crate::error::{EtpcError, Result};
use crate::linalg::{Mat, Vector};
use crate::plant::SystemModel;

#[derive(Debug, Clone)]
pub struct HorizonData {
    /// F(tau) for tau in [0, N].
    pub f: Vec<Mat>,
    /// G(tau) for tau in [0, N]; G(0) = 0 and G(tau+1) = A G(tau) + B P(tau).
    pub g: Vec<Mat>,
    /// P(tau) for tau in [0, N].
    pub pblocks: Vec<Mat>,
    pub n: usize,
}

/// Build the F/G/P tables for tau in [0, N]. The basis must be linearly
/// independent on [0, N].
pub fn compute_horizon(model: &SystemModel, basis: &BasisSet, n: usize) -> Result<HorizonData> {
    if n < 1 {
        return Err(EtpcError::InvalidParameter {
            context: "horizon N must be at least 1".into(),
        });
    }
    if !basis.check_independence(n) {
        return Err(EtpcError::BasisNotIndependent { n });
    }
    let dim = model.state_dim();
    let m = model.input_dim();
    let mut f = Vec::with_capacity(n + 1);
    let mut g = Vec::with_capacity(n + 1);
    let mut pblocks = Vec::with_capacity(n + 1);
    f.push(Mat::identity(dim, dim));
    g.push(Mat::zeros(dim, m * basis.len()));
    pblocks.push(basis.block_p(0, m));
    for tau in 0..n {
        f.push(&model.a * &f[tau]);
        g.push(&model.a * &g[tau] + &model.b * &pblocks[tau]);
        pblocks.push(basis.block_p(tau + 1, m));
    }
    Ok(HorizonData { f, g, pblocks, n })
}

/// One quadratic form `a' Q a + 2 lin' a + c`.
#[derive(Debug, Clone)]
pub struct QuadForm {
    pub q: Mat,
    pub lin: Vector,
    pub c: f64,
}

impl QuadForm {
    pub fn eval(&self, a: &Vector) -> f64 {
        (a.transpose() * &self.q * a)[(0, 0)] + 2.0 * self.lin.dot(a) + self.c
    }

    pub fn gradient(&self, a: &Vector) -> Vector {
        &self.q * a * 2.0 + &self.lin * 2.0
    }
}

/// The per-event convex QCQP: minimize the cost form subject to
/// `constraints[i].eval(a) <= 0` (the decrease constraints for
/// tau = 1, ..., M).
///
/// The tau = 0 constraint is identically zero (F(0) = I, G(0) = 0) and is
/// omitted; see `assemble_qcqp`.
#[derive(Debug, Clone)]
pub struct QcqpProblem {
    pub cost: QuadForm,
    pub constraints: Vec<QuadForm>,
}

impl QcqpProblem {
    pub fn dim(&self) -> usize {
        self.cost.q.nrows()
    }

    pub fn eval_cost(&self, a: &Vector) -> f64 {
        self.cost.eval(a)
    }

    /// H_tau(a) for the tau-th decrease constraint, tau in [1, M].
    pub fn eval_constraint(&self, tau: usize, a: &Vector) -> f64 {
        self.constraints[tau - 1].eval(a)
    }

    pub fn max_constraint_violation(&self, a: &Vector) -> f64 {
        self.constraints
            .iter()
            .map(|h| h.eval(a))
            .fold(0.0, f64::max)
    }
}

/// Assemble the QCQP data for state `x_k` at an event:
///
/// cost `J(a) = a' Q0 a + 2 q0' a + c0` with
///   `Q0 = sum_tau (G'PG + P'RP)`, `q0 = sum_tau G'PF x_k`,
///   `c0 = x_k' (sum_tau F'PF) x_k`,
/// and one constraint
///   `H_tau(a) = a' G'PG a + 2 x_k' F'PG a + x_k' (F'PF - alpha^tau P) x_k`
/// per tau in [1, M].
///
/// The paper's strict `H_tau < 0` over [0, M] is unsatisfiable at tau = 0,
/// where H_0 is identically zero; the source constraint holds there with
/// equality, so constraints are kept non-strict and tau = 0 is dropped.
pub fn assemble_qcqp(
    h: &HorizonData,
    x_k: &Vector,
    p_lyap: &Mat,
    r: &Mat,
    alpha: f64,
    m_steps: usize,
) -> Result<QcqpProblem> {
    if m_steps > h.n {
        return Err(EtpcError::ConstraintHorizonTooLong {
            m: m_steps,
            n: h.n,
        });
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(EtpcError::InvalidParameter {
            context: format!("alpha = {alpha} must lie in (0, 1)"),
        });
    }
    let dim = h.g[0].ncols();
    let mut q0 = Mat::zeros(dim, dim);
    let mut lin = Vector::zeros(dim);
    let mut c0 = 0.0;
    for tau in 0..=h.n {
        let g = &h.g[tau];
        let f = &h.f[tau];
        let pb = &h.pblocks[tau];
        q0 += g.transpose() * p_lyap * g + pb.transpose() * r * pb;
        lin += g.transpose() * p_lyap * (f * x_k);
        c0 += (x_k.transpose() * f.transpose() * p_lyap * f * x_k)[(0, 0)];
    }
    q0 = (&q0 + q0.transpose()) * 0.5;
    let mut constraints = Vec::with_capacity(m_steps);
    let mut alpha_tau = 1.0;
    for tau in 1..=m_steps {
        alpha_tau *= alpha;
        let g = &h.g[tau];
        let f = &h.f[tau];
        let mut qc = g.transpose() * p_lyap * g;
        qc = (&qc + qc.transpose()) * 0.5;
        let lin_c = g.transpose() * p_lyap.transpose() * (f * x_k);
        let cc = (x_k.transpose() * (f.transpose() * p_lyap * f - p_lyap * alpha_tau) * x_k)
            [(0, 0)];
        constraints.push(QuadForm {
            q: qc,
            lin: lin_c,
            c: cc,
        });
    }
    Ok(QcqpProblem {
        cost: QuadForm { q: q0, lin, c: c0 },
        constraints,
    })
}
