//! The three event-triggered controllers behind a single event-policy
//! interface: the CLF-constrained parameterized controller, the emulation
//! baseline, and the zero-order-hold baseline.
//!
//! Zero-order hold is the p = 0 special case of the parameterized
//! machinery: the constant-basis QCQP in u is structurally the same
//! problem, so it shares the solver instead of having its own code path.

use crate::basis::BasisSet;
use crate::error::{EtpcError, Result};
use crate::feasibility::construct_c;
use crate::horizon::{assemble_qcqp, compute_horizon, HorizonData};
use crate::linalg::{is_schur_stable, mat_pow, Mat, Vector};
use crate::plant::SystemModel;
use crate::qcqp::{solve, SolveReport};

/// Which controller computes coefficients at events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Clf,
    Emulation,
    Zoh,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Clf => "clf",
            ControllerKind::Emulation => "emulation",
            ControllerKind::Zoh => "zoh",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = EtpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clf" => Ok(ControllerKind::Clf),
            "emulation" => Ok(ControllerKind::Emulation),
            "zoh" => Ok(ControllerKind::Zoh),
            other => Err(EtpcError::InvalidParameter {
                context: format!("unknown controller kind {other:?}"),
            }),
        }
    }
}

/// Per-trajectory controller state, refreshed only at events.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub t_k: usize,
    pub a_k: Vector,
    pub v_k: f64,
    pub solve_report: Option<SolveReport>,
}

/// The input the plan of `state` applies at time `t >= t_k`. Defined for
/// arbitrarily large `t - t_k`; inter-event intervals may exceed N.
pub fn control_input(state: &ControllerState, basis: &BasisSet, m: usize, t: usize) -> Vector {
    debug_assert!(t >= state.t_k);
    basis.block_p(t - state.t_k, m) * &state.a_k
}

/// An event policy maps the state at an event to a fresh coefficient plan.
pub trait EventPolicy: Sync {
    fn kind(&self) -> ControllerKind;
    fn basis(&self) -> &BasisSet;
    fn input_dim(&self) -> usize;
    fn on_event(&self, x_k: &Vector, t_k: usize) -> ControllerState;
}

/// The CLF-constrained parameterized controller (also used, with a p = 0
/// basis, for the zero-order-hold baseline).
pub struct ClfController {
    kind: ControllerKind,
    basis: BasisSet,
    horizon: HorizonData,
    c: Mat,
    p: Mat,
    r: Mat,
    alpha: f64,
    m_steps: usize,
    input_dim: usize,
}

impl ClfController {
    pub fn new(
        model: &SystemModel,
        basis: BasisSet,
        n: usize,
        m_steps: usize,
        k_gain: &Mat,
        p: Mat,
        r: Mat,
        alpha: f64,
    ) -> Result<Self> {
        let horizon = compute_horizon(model, &basis, n)?;
        if m_steps > n {
            return Err(EtpcError::ConstraintHorizonTooLong { m: m_steps, n });
        }
        let c = construct_c(k_gain, &basis)?;
        Ok(ClfController {
            kind: ControllerKind::Clf,
            basis,
            horizon,
            c,
            p,
            r,
            alpha,
            m_steps,
            input_dim: model.input_dim(),
        })
    }

    /// The zero-order-hold baseline: the same event problem with the
    /// constant basis, so the decision variable is u itself.
    pub fn zoh(
        model: &SystemModel,
        n: usize,
        m_steps: usize,
        k_gain: &Mat,
        p: Mat,
        r: Mat,
        alpha: f64,
    ) -> Result<Self> {
        let mut ctl = ClfController::new(
            model,
            BasisSet::monomial(0),
            n,
            m_steps,
            k_gain,
            p,
            r,
            alpha,
        )?;
        ctl.kind = ControllerKind::Zoh;
        Ok(ctl)
    }

    pub fn certificate_point(&self, x_k: &Vector) -> Vector {
        &self.c * x_k
    }

    pub fn horizon_data(&self) -> &HorizonData {
        &self.horizon
    }
}

impl EventPolicy for ClfController {
    fn kind(&self) -> ControllerKind {
        self.kind
    }

    fn basis(&self) -> &BasisSet {
        &self.basis
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn on_event(&self, x_k: &Vector, t_k: usize) -> ControllerState {
        let v_k = (x_k.transpose() * &self.p * x_k)[(0, 0)];
        if x_k.iter().all(|v| *v == 0.0) {
            // Feasible and optimal for a positive definite Hessian.
            return ControllerState {
                t_k,
                a_k: Vector::zeros(self.c.nrows()),
                v_k,
                solve_report: None,
            };
        }
        let problem = assemble_qcqp(&self.horizon, x_k, &self.p, &self.r, self.alpha, self.m_steps)
            .expect("event QCQP assembly cannot fail after construction-time checks");
        let a0 = self.certificate_point(x_k);
        let report = solve(&problem, &a0);
        ControllerState {
            t_k,
            a_k: report.a_star.clone(),
            v_k,
            solve_report: Some(report),
        }
    }
}

/// The emulation baseline: least-squares fit of the parameterized input to
/// the ideal feedback `K x_hat(t)` along the undisturbed closed-loop
/// rollout, with the hard constraint `P(0) a = K x(t_k)`. Solved in closed
/// form through the KKT linear system.
pub struct EmulationController {
    basis: BasisSet,
    /// Stacked targets: row block tau is `K (A + BK)^tau`.
    target_stack: Mat,
    /// Stacked `P(tau)` for tau in [0, N].
    phi_stack: Mat,
    /// The (dim + m) x (dim + m) KKT matrix of the equality-constrained
    /// least squares.
    kkt: Mat,
    k_gain: Mat,
    p: Mat,
    input_dim: usize,
}

impl EmulationController {
    pub fn new(
        model: &SystemModel,
        basis: BasisSet,
        n: usize,
        k_gain: &Mat,
        p: Mat,
    ) -> Result<Self> {
        let acl = &model.a + &model.b * k_gain;
        if !is_schur_stable(&acl) {
            return Err(EtpcError::NotSchurStable {
                rho: crate::linalg::spectral_radius(&acl),
            });
        }
        if !basis.check_independence(n) {
            return Err(EtpcError::BasisNotIndependent { n });
        }
        let m = model.input_dim();
        let dim = m * basis.len();
        let mut phi_stack = Mat::zeros((n + 1) * m, dim);
        let mut target_stack = Mat::zeros((n + 1) * m, model.state_dim());
        for tau in 0..=n {
            phi_stack
                .rows_mut(tau * m, m)
                .copy_from(&basis.block_p(tau, m));
            target_stack
                .rows_mut(tau * m, m)
                .copy_from(&(k_gain * mat_pow(&acl, tau)?));
        }
        let e = basis.block_p(0, m);
        let mut kkt = Mat::zeros(dim + m, dim + m);
        kkt.view_mut((0, 0), (dim, dim))
            .copy_from(&(phi_stack.transpose() * &phi_stack * 2.0));
        kkt.view_mut((0, dim), (dim, m)).copy_from(&e.transpose());
        kkt.view_mut((dim, 0), (m, dim)).copy_from(&e);
        Ok(EmulationController {
            basis,
            target_stack,
            phi_stack,
            kkt,
            k_gain: k_gain.clone(),
            p,
            input_dim: m,
        })
    }
}

impl EventPolicy for EmulationController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Emulation
    }

    fn basis(&self) -> &BasisSet {
        &self.basis
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn on_event(&self, x_k: &Vector, t_k: usize) -> ControllerState {
        let v_k = (x_k.transpose() * &self.p * x_k)[(0, 0)];
        let dim = self.phi_stack.ncols();
        let m = self.input_dim;
        let y = &self.target_stack * x_k;
        let mut rhs = Vector::zeros(dim + m);
        rhs.rows_mut(0, dim)
            .copy_from(&(self.phi_stack.transpose() * &y * 2.0));
        rhs.rows_mut(dim, m).copy_from(&(&self.k_gain * x_k));
        let sol = self
            .kkt
            .clone()
            .lu()
            .solve(&rhs)
            .expect("emulation KKT system is nonsingular under basis independence");
        ControllerState {
            t_k,
            a_k: sol.rows(0, dim).into_owned(),
            v_k,
            solve_report: None,
        }
    }
}
