//! Log-barrier interior-point solver for the per-event convex QCQP.
//!
//! The caller supplies a strictly feasible start (the certificate point
//! `a0 = C x(t_k)`), so no phase-1 problem is needed. The barrier parameter
//! runs from 1 down to 1e-9 in factors of 10, with damped Newton inner
//! iterations. A 1e-12 ridge keeps the Newton system well posed when the
//! Hessian is only positive semidefinite; the reported objective is exact.

use crate::error::{EtpcError, Result};
use crate::horizon::QcqpProblem;
use crate::linalg::{Mat, Vector};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const STRICT_FEASIBILITY_MARGIN: f64 = -1e-12;
pub const KKT_TOL: f64 = 1e-7;

const BARRIER_START: f64 = 1.0;
const BARRIER_END: f64 = 1e-9;
const BARRIER_FACTOR: f64 = 0.1;
const NEWTON_DECREMENT_TOL: f64 = 1e-10;
const RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// The solve made no certified progress; the returned point is the
    /// (feasible) starting point.
    FeasibleFallback,
    /// The supplied start violated strict feasibility.
    InfeasibleInput,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub a_star: Vector,
    pub objective: f64,
    pub iterations: usize,
    pub max_constraint_violation: f64,
    pub kkt_residual: f64,
    pub status: SolveStatus,
}

/// Norm of the stationarity residual plus the complementary-slackness
/// magnitude, for a candidate point and nonnegative multipliers.
pub fn kkt_residual(problem: &QcqpProblem, a: &Vector, multipliers: &Vector) -> Result<f64> {
    if multipliers.len() != problem.constraints.len() {
        return Err(EtpcError::DimensionMismatch {
            context: format!(
                "{} multipliers for {} constraints",
                multipliers.len(),
                problem.constraints.len()
            ),
        });
    }
    if multipliers.iter().any(|l| *l < 0.0) {
        return Err(EtpcError::InvalidParameter {
            context: "multipliers must be nonnegative".into(),
        });
    }
    let mut stationarity = problem.cost.gradient(a);
    let mut comp_slack = 0.0;
    for (form, lambda) in problem.constraints.iter().zip(multipliers.iter()) {
        stationarity += form.gradient(a) * *lambda;
        comp_slack += (lambda * form.eval(a)).abs();
    }
    Ok(stationarity.norm() + comp_slack)
}

/// The same problem over `b = diag(scale) a`: values of the cost and
/// constraints are preserved pointwise.
fn scale_problem(problem: &QcqpProblem, scale: &Vector) -> QcqpProblem {
    let scale_form = |form: &crate::horizon::QuadForm| crate::horizon::QuadForm {
        q: Mat::from_fn(form.q.nrows(), form.q.ncols(), |i, j| {
            form.q[(i, j)] / (scale[i] * scale[j])
        }),
        lin: form.lin.component_div(scale),
        c: form.c,
    };
    QcqpProblem {
        cost: scale_form(&problem.cost),
        constraints: problem.constraints.iter().map(scale_form).collect(),
    }
}

fn barrier_value(problem: &QcqpProblem, a: &Vector, mu: f64) -> Option<f64> {
    let mut v = problem.eval_cost(a);
    for form in &problem.constraints {
        let h = form.eval(a);
        if h >= 0.0 {
            return None;
        }
        v -= mu * (-h).ln();
    }
    Some(v)
}

/// Minimize `J(a)` subject to `H_tau(a) <= 0` from a strictly feasible
/// start. With a ridge-regularized Newton system the returned point is a
/// deterministic function of the problem data.
pub fn solve(problem: &QcqpProblem, a0: &Vector) -> SolveReport {
    let start_worst = problem
        .constraints
        .iter()
        .map(|f| f.eval(a0))
        .fold(f64::NEG_INFINITY, f64::max);
    if !problem.constraints.is_empty() && start_worst >= STRICT_FEASIBILITY_MARGIN {
        return SolveReport {
            a_star: a0.clone(),
            objective: problem.eval_cost(a0),
            iterations: 0,
            max_constraint_violation: start_worst.max(0.0),
            kkt_residual: f64::INFINITY,
            status: SolveStatus::InfeasibleInput,
        };
    }

    // Jacobi equilibration: monomial bases make the cost diagonal span
    // many orders of magnitude, so minimize over b = S a with
    // S = diag(sqrt(Q0_ii)). The optimum is unchanged; the Newton systems
    // become well conditioned.
    let dim = problem.dim();
    let scale = Vector::from_fn(dim, |i, _| problem.cost.q[(i, i)].abs().max(1e-30).sqrt());
    let scaled = scale_problem(problem, &scale);
    let mut b = a0.component_mul(&scale);
    let mut iterations = 0;
    let mut mu = BARRIER_START;
    while mu >= BARRIER_END {
        newton_minimize(&scaled, &mut b, mu, &mut iterations);
        if problem.constraints.is_empty() {
            break;
        }
        mu *= BARRIER_FACTOR;
    }
    let a = b.component_div(&scale);

    // Never return a point worse than the supplied fallback.
    let (a_star, status_hint) = if problem.eval_cost(&a) <= problem.eval_cost(a0) {
        (a, None)
    } else {
        (a0.clone(), Some(SolveStatus::FeasibleFallback))
    };
    let violation = problem.max_constraint_violation(&a_star);
    let barrier_multipliers = Vector::from_iterator(
        problem.constraints.len(),
        problem.constraints.iter().map(|f| {
            let h = f.eval(&a_star);
            if h < 0.0 {
                BARRIER_END / (-h)
            } else {
                0.0
            }
        }),
    );
    let ls_multipliers = recovered_multipliers(problem, &a_star);
    let kkt = [barrier_multipliers, ls_multipliers]
        .iter()
        .map(|m| kkt_residual(problem, &a_star, m).unwrap_or(f64::INFINITY))
        .fold(f64::INFINITY, f64::min);
    let status = match status_hint {
        Some(s) => s,
        None if violation <= FEASIBILITY_TOL && kkt <= KKT_TOL => SolveStatus::Optimal,
        None => SolveStatus::FeasibleFallback,
    };
    SolveReport {
        objective: problem.eval_cost(&a_star),
        a_star,
        iterations,
        max_constraint_violation: violation,
        kkt_residual: kkt,
        status,
    }
}

/// Nonnegative least-squares fit of the stationarity condition
/// `grad J + sum lambda_tau grad H_tau = 0`, by active-set elimination:
/// solve over the current support, drop the most negative multiplier,
/// repeat. Deterministic and exact for the small constraint counts here.
fn recovered_multipliers(problem: &QcqpProblem, a: &Vector) -> Vector {
    use crate::linalg::Mat;
    let k = problem.constraints.len();
    let grad = problem.cost.gradient(a);
    let cols: Vec<Vector> = problem.constraints.iter().map(|f| f.gradient(a)).collect();
    let mut support: Vec<usize> = (0..k).collect();
    while !support.is_empty() {
        let g = Mat::from_columns(&support.iter().map(|i| cols[*i].clone()).collect::<Vec<_>>());
        let sol = g.svd(true, true).solve(&(-&grad), 1e-12);
        let lam = match sol {
            Ok(l) => l,
            Err(_) => break,
        };
        let (worst_pos, worst_val) = lam
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
        if worst_val >= 0.0 {
            let mut full = Vector::zeros(k);
            for (slot, idx) in support.iter().enumerate() {
                full[*idx] = lam[slot];
            }
            return full;
        }
        support.remove(worst_pos);
    }
    Vector::zeros(k)
}

/// Damped Newton on `J(a) - mu * sum ln(-H_tau(a))`, in place.
fn newton_minimize(problem: &QcqpProblem, a: &mut Vector, mu: f64, iterations: &mut usize) {
    let dim = problem.dim();
    for _ in 0..200 {
        *iterations += 1;
        let mut grad = problem.cost.gradient(a);
        let mut hess = &problem.cost.q * 2.0;
        for form in &problem.constraints {
            let h = form.eval(a);
            let g = form.gradient(a);
            let inv = 1.0 / (-h);
            grad += &g * (mu * inv);
            hess += &g * g.transpose() * (mu * inv * inv) + &form.q * (2.0 * mu * inv);
        }
        for i in 0..dim {
            hess[(i, i)] += RIDGE;
        }
        let step = match hess.clone().cholesky() {
            Some(chol) => chol.solve(&(-&grad)),
            None => match hess.lu().solve(&(-&grad)) {
                Some(s) => s,
                None => return,
            },
        };
        let decrement = -grad.dot(&step);
        if decrement * 0.5 <= NEWTON_DECREMENT_TOL {
            return;
        }
        // Backtrack into the domain, then Armijo.
        let f0 = match barrier_value(problem, a, mu) {
            Some(v) => v,
            None => return,
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-14 {
            let trial = &*a + &step * t;
            if let Some(f_trial) = barrier_value(problem, &trial, mu) {
                if f_trial <= f0 - 1e-4 * t * decrement {
                    *a = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return;
        }
    }
}
