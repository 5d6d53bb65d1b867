//! The event trigger: the worst-case one-step predictor of V, the
//! threshold, the triggering decision, and the bound on sigma that
//! guarantees a minimum inter-event time of M steps.

use crate::error::{EtpcError, Result};
use crate::linalg::{mat_pow, spectral_norm, sym_eig_extremes, Mat, Vector};
use crate::plant::SystemModel;

/// Trigger parameters together with the Lyapunov matrix they refer to.
///
/// `epsilon = D / sigma`; the threshold compares against `epsilon^2`, which
/// is stored directly.
#[derive(Debug, Clone)]
pub struct TriggerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub sigma_bar: f64,
    pub eps_sq: f64,
    pub m: usize,
    pub p: Mat,
    pub lambda_max_p: f64,
    pub d: f64,
}

impl TriggerConfig {
    pub fn new(
        alpha: f64,
        beta: f64,
        sigma: f64,
        m: usize,
        p: Mat,
        d: f64,
        model: &SystemModel,
    ) -> Result<Self> {
        if !(0.0 < alpha && alpha < beta && beta < 1.0) {
            return Err(EtpcError::InvalidParameter {
                context: format!("need 0 < alpha < beta < 1, got alpha = {alpha}, beta = {beta}"),
            });
        }
        if sigma <= 0.0 {
            return Err(EtpcError::InvalidParameter {
                context: format!("sigma = {sigma} must be positive"),
            });
        }
        let lambda_max_p = sym_eig_extremes(&p)?.lambda_max;
        let sb = sigma_bar(model, &p, alpha, beta, m)?;
        let eps = d / sigma;
        Ok(TriggerConfig {
            alpha,
            beta,
            sigma,
            sigma_bar: sb,
            eps_sq: eps * eps,
            m,
            p,
            lambda_max_p,
            d,
        })
    }

    /// Whether the inter-event-time and ultimate-bound guarantees apply.
    pub fn certified(&self) -> bool {
        self.sigma <= self.sigma_bar
    }
}

/// Worst-case bound on V(x(t+1)) over all disturbances with norm at most D,
/// given the state and the input the stale plan would apply.
pub fn predictor(x: &Vector, u: &Vector, model: &SystemModel, p: &Mat, lambda_max_p: f64) -> f64 {
    let z = &model.a * x + &model.b * u;
    let d = model.d_bound;
    (z.transpose() * p * &z)[(0, 0)] + lambda_max_p * (d * d + 2.0 * d * z.norm())
}

/// `max(eps^2, beta^(t - t_k + 1) V(x(t_k)))`.
pub fn threshold(t: usize, t_k: usize, v_k: f64, cfg: &TriggerConfig) -> f64 {
    debug_assert!(t >= t_k);
    cfg.eps_sq.max(cfg.beta.powi((t - t_k + 1) as i32) * v_k)
}

/// The triggering decision at time t > t_k: true iff the predicted
/// worst-case V for the next step exceeds the threshold.
pub fn should_trigger(
    x_t: &Vector,
    t: usize,
    t_k: usize,
    v_k: f64,
    u_planned: &Vector,
    cfg: &TriggerConfig,
    model: &SystemModel,
) -> bool {
    debug_assert!(t > t_k);
    predictor(x_t, u_planned, model, &cfg.p, cfg.lambda_max_p) > threshold(t, t_k, v_k, cfg)
}

/// `Abar(tau) = || sum_{j=0}^{tau-1} A^j ||` for tau in [0, m], with
/// `Abar(0) = 0`.
pub fn abar_table(a: &Mat, m: usize) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut values = vec![0.0];
    let mut sum = Mat::zeros(n, n);
    for tau in 1..=m {
        sum += mat_pow(a, tau - 1)?;
        values.push(spectral_norm(&sum));
    }
    Ok(values)
}

/// The largest sigma for which the trigger provably waits at least M steps
/// between events:
///
/// `min over tau in [1, M] of
///  ( -sqrt(alpha^tau / lmin) + sqrt(alpha^tau / lmin + (beta^tau - alpha^tau) / lmax) )
///  / ( 1 + ||A|| Abar(tau - 1) )`.
///
/// The matrix norm is the induced 2-norm, matching the euclidean vector
/// norm used throughout.
pub fn sigma_bar(model: &SystemModel, p: &Mat, alpha: f64, beta: f64, m: usize) -> Result<f64> {
    if !(0.0 < alpha && alpha < beta && beta < 1.0) {
        return Err(EtpcError::InvalidParameter {
            context: format!(
                "sigma_bar needs 0 < alpha < beta < 1, got alpha = {alpha}, beta = {beta}"
            ),
        });
    }
    if m < 1 {
        return Err(EtpcError::InvalidParameter {
            context: "sigma_bar needs M >= 1".into(),
        });
    }
    let ex = sym_eig_extremes(p)?;
    if ex.lambda_min <= 0.0 {
        return Err(EtpcError::NotPositiveDefinite {
            lambda_min: ex.lambda_min,
        });
    }
    let norm_a = spectral_norm(&model.a);
    let abar = abar_table(&model.a, m.saturating_sub(1))?;
    let mut best = f64::INFINITY;
    for tau in 1..=m {
        let at = alpha.powi(tau as i32);
        let bt = beta.powi(tau as i32);
        let base = at / ex.lambda_min;
        let numerator = -base.sqrt() + (base + (bt - at) / ex.lambda_max).sqrt();
        let denominator = 1.0 + norm_a * abar[tau - 1];
        best = best.min(numerator / denominator);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::solve_discrete_lyapunov;
    use crate::plant::{example1_disturbance, DisturbanceSource};
    use approx::assert_relative_eq;

    fn example1_model() -> SystemModel {
        let a = Mat::from_row_slice(3, 3, &[0.7, -0.1, -0.1, 0.0, 0.8, -0.4, 0.0, 0.0, 1.2]);
        let b = Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        SystemModel::new(a, b, 0.01, example1_disturbance()).unwrap()
    }

    fn example1_p() -> Mat {
        let model = example1_model();
        let k = Mat::from_row_slice(1, 3, &[0.0, 0.0, -0.3]);
        let acl = &model.a + &model.b * &k;
        solve_discrete_lyapunov(&acl, &(Mat::identity(3, 3) * 0.01)).unwrap()
    }

    #[test]
    fn predictor_without_disturbance_is_lyapunov_of_next_state() {
        let mut model = example1_model();
        model.d_bound = 0.0;
        model.disturbance = DisturbanceSource::Zero { dim: 3 };
        let p = example1_p();
        let lmax = sym_eig_extremes(&p).unwrap().lambda_max;
        let x = Vector::from_column_slice(&[1.0, -2.0, 0.5]);
        let u = Vector::from_column_slice(&[0.3]);
        let z = &model.a * &x + &model.b * &u;
        let expect = (z.transpose() * &p * &z)[(0, 0)];
        assert_relative_eq!(predictor(&x, &u, &model, &p, lmax), expect, epsilon = 1e-14);
    }

    #[test]
    fn predictor_at_origin_is_worst_case_disturbance_term() {
        let model = example1_model();
        let p = example1_p();
        let lmax = sym_eig_extremes(&p).unwrap().lambda_max;
        let v = predictor(&Vector::zeros(3), &Vector::zeros(1), &model, &p, lmax);
        assert_relative_eq!(v, lmax * 0.01 * 0.01, epsilon = 1e-14);
    }

    fn example1_trigger() -> TriggerConfig {
        TriggerConfig::new(0.952, 0.99, 0.01, 2, example1_p(), 0.01, &example1_model()).unwrap()
    }

    #[test]
    fn threshold_branches() {
        let cfg = example1_trigger();
        assert_eq!(threshold(10, 3, 0.0, &cfg), cfg.eps_sq);
        // beta branch dominates: max(1, 0.99^2 * 100)
        assert_relative_eq!(threshold(4, 3, 100.0, &cfg), 0.99f64.powi(2) * 100.0);
        // V_k at the bound: beta branch never exceeds eps^2
        for t in 3..60 {
            assert_eq!(threshold(t, 3, cfg.eps_sq, &cfg), cfg.eps_sq);
        }
    }

    #[test]
    fn no_trigger_inside_epsilon_ball_when_predictor_small() {
        let cfg = example1_trigger();
        let model = example1_model();
        // Tiny state and input keep the predictor below eps^2 = 1.
        let x = Vector::from_column_slice(&[0.01, 0.01, 0.01]);
        let u = Vector::zeros(1);
        assert!(!should_trigger(&x, 5, 0, 0.5, &u, &cfg, &model));
    }

    #[test]
    fn abar_table_values() {
        let model = example1_model();
        let abar = abar_table(&model.a, 3).unwrap();
        assert_eq!(abar[0], 0.0);
        assert_relative_eq!(abar[1], spectral_norm(&Mat::identity(3, 3)), epsilon = 1e-12);
        let s = Mat::identity(3, 3) + &model.a;
        assert_relative_eq!(abar[2], spectral_norm(&s), epsilon = 1e-12);
    }

    #[test]
    fn sigma_bar_identity_p_single_step() {
        // P = I, M = 1: Abar(0) = 0, lmin = lmax = 1, so
        // sigma_bar = sqrt(beta) - sqrt(alpha).
        let model = example1_model();
        let p = Mat::identity(3, 3);
        let (alpha, beta) = (0.5, 0.8);
        let sb = sigma_bar(&model, &p, alpha, beta, 1).unwrap();
        assert_relative_eq!(sb, beta.sqrt() - alpha.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sigma_bar_degenerate_rate_rejected() {
        let model = example1_model();
        let p = example1_p();
        assert!(sigma_bar(&model, &p, 0.9, 0.9, 2).is_err());
    }

    #[test]
    fn example1_sigma_choice_is_certified() {
        // Direct formula evaluation with independently computed extremes
        // confirms the configured sigma = 0.01 is below the bound.
        let cfg = example1_trigger();
        assert!(cfg.sigma_bar >= 0.01);
        assert!(cfg.certified());
        assert_relative_eq!(cfg.eps_sq, 1.0, epsilon = 1e-14);
    }
}
