//! Closed-loop rollout of plant + controller + trigger, inter-event-time
//! statistics, ultimate-bound reporting and batch experiments over sampled
//! initial conditions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::controllers::{control_input, ControllerState, EventPolicy};
use crate::error::{EtpcError, Result};
use crate::linalg::Vector;
use crate::plant::SystemModel;
use crate::trigger::{predictor, threshold, TriggerConfig};

/// When to stop a rollout.
#[derive(Debug, Clone, Copy)]
pub enum StopRule {
    /// Run exactly this many steps.
    Steps(usize),
    /// Run until this many inter-event intervals have completed (with a
    /// generous step cap so a silent trigger cannot loop forever).
    Events(usize),
}

/// Closed-loop record of one rollout.
///
/// `states`, `lyapunov` and `inputs` have T+1 entries (the final input is
/// the one the plan would apply at T). `predictor_applied[t]` is the
/// worst-case bound on V(x(t+1)) under the input actually applied at t.
/// `predictor_stale[t]` / `threshold[t]` (for t >= 1) are the quantities
/// the trigger compared at time t, evaluated before any event at t.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub lyapunov: Vec<f64>,
    pub disturbances: Vec<Vector>,
    pub events: Vec<usize>,
    pub predictor_applied: Vec<f64>,
    pub predictor_stale: Vec<f64>,
    pub threshold: Vec<f64>,
    /// V(x(t_k)) per event, in event order.
    pub event_lyapunov: Vec<f64>,
    /// Whether the trigger guarantees were certified for this run
    /// (sigma <= sigma_bar at configuration time).
    pub certified: bool,
}

impl SimTrace {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn inter_event_times(&self) -> Vec<usize> {
        self.events.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Inter-event statistics over the first E intervals of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IetStats {
    pub aiet: f64,
    pub miet: usize,
    pub event_count: usize,
}

/// Roll out the closed loop from `x0`. An event always occurs at t = 0.
///
/// At each integer t > t_k the trigger compares the predicted worst-case
/// next-step V under the stale plan against the threshold; on a trigger the
/// event happens at t and the input applied at t already comes from the
/// fresh plan.
pub fn run_closed_loop(
    model: &SystemModel,
    policy: &dyn EventPolicy,
    cfg: &TriggerConfig,
    x0: &Vector,
    stop: StopRule,
) -> Result<SimTrace> {
    if x0.len() != model.state_dim() {
        return Err(EtpcError::DimensionMismatch {
            context: format!(
                "x0 has {} entries, state dimension is {}",
                x0.len(),
                model.state_dim()
            ),
        });
    }
    let m = policy.input_dim();
    let basis = policy.basis();
    let (max_steps, target_events) = match stop {
        StopRule::Steps(t) => (t, usize::MAX),
        StopRule::Events(e) => (1000 * (e + 1) + 10_000, e),
    };

    let mut state: ControllerState = policy.on_event(x0, 0);
    let mut x = x0.clone();
    let mut trace = SimTrace {
        states: vec![x.clone()],
        inputs: Vec::new(),
        lyapunov: vec![state.v_k],
        disturbances: Vec::new(),
        events: vec![0],
        predictor_applied: Vec::new(),
        predictor_stale: Vec::new(),
        threshold: Vec::new(),
        event_lyapunov: vec![state.v_k],
        certified: cfg.certified(),
    };

    for t in 0..max_steps {
        let u = control_input(&state, basis, m, t);
        trace
            .predictor_applied
            .push(predictor(&x, &u, model, &cfg.p, cfg.lambda_max_p));
        let d = model.disturbance.disturbance_at(t);
        let x_next = &model.a * &x + &model.b * &u + &d;
        trace.inputs.push(u);
        trace.disturbances.push(d);
        x = x_next;
        let v = (x.transpose() * &cfg.p * &x)[(0, 0)];
        trace.states.push(x.clone());
        trace.lyapunov.push(v);

        let now = t + 1;
        let u_stale = control_input(&state, basis, m, now);
        let vbar = predictor(&x, &u_stale, model, &cfg.p, cfg.lambda_max_p);
        let thr = threshold(now, state.t_k, state.v_k, cfg);
        trace.predictor_stale.push(vbar);
        trace.threshold.push(thr);
        if vbar > thr {
            state = policy.on_event(&x, now);
            trace.events.push(now);
            trace.event_lyapunov.push(state.v_k);
            if trace.events.len() > target_events {
                break;
            }
        }
    }
    // Input the plan in force would apply at the final recorded time.
    let final_t = trace.states.len() - 1;
    trace
        .inputs
        .push(control_input(&state, basis, m, final_t));
    Ok(trace)
}

/// Mean and minimum of the first E inter-event intervals.
pub fn iet_stats(trace: &SimTrace, e: usize) -> Result<IetStats> {
    let intervals = trace.inter_event_times();
    if intervals.len() < e || e == 0 {
        return Err(EtpcError::InsufficientEvents {
            have: intervals.len(),
            need: e,
        });
    }
    let first = &intervals[..e];
    let aiet = first.iter().sum::<usize>() as f64 / e as f64;
    let miet = *first.iter().min().expect("e > 0");
    Ok(IetStats {
        aiet,
        miet,
        event_count: trace.events.len(),
    })
}

/// Ultimate-bound report. Entry is anchored at events: the guarantee is
/// that once V is at most eps^2 *at an event*, it stays there. A mere
/// between-events dip carries no such promise (the plan computed at a
/// high-V event may legitimately overshoot before the next event).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuubReport {
    /// First event time with V(x(t_k)) <= eps^2, if any.
    pub first_entry: Option<usize>,
    /// Number of later times with V above eps^2 + 1e-9.
    pub violations_after_entry: usize,
}

pub const GUUB_TOL: f64 = 1e-9;

pub fn guub_report(trace: &SimTrace, eps_sq: f64) -> GuubReport {
    let entry = trace
        .events
        .iter()
        .zip(trace.event_lyapunov.iter())
        .find(|(_, v)| **v <= eps_sq)
        .map(|(t, _)| *t);
    let violations = match entry {
        None => 0,
        Some(t0) => trace.lyapunov[t0..]
            .iter()
            .filter(|v| **v > eps_sq + GUUB_TOL)
            .count(),
    };
    GuubReport {
        first_entry: entry,
        violations_after_entry: violations,
    }
}

/// Check every testable guarantee on a trace; returns a description of
/// each violation found (empty means all hold). Intended for certified
/// CLF/ZOH runs; the emulation baseline carries no decrease constraint,
/// so only the one-step predictor soundness applies to it.
pub fn verify_guarantees(trace: &SimTrace, cfg: &TriggerConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let tol = GUUB_TOL;

    // One-step predictor soundness along the realized trajectory.
    for t in 0..trace.predictor_applied.len() {
        if trace.lyapunov[t + 1] > trace.predictor_applied[t] + tol {
            bad.push(format!(
                "predictor bound violated at t = {t}: V = {} > bound = {}",
                trace.lyapunov[t + 1],
                trace.predictor_applied[t]
            ));
        }
    }

    // Minimum inter-event time.
    for (k, iet) in trace.inter_event_times().iter().enumerate() {
        if *iet < cfg.m {
            bad.push(format!("inter-event interval {k} is {iet} < M = {}", cfg.m));
        }
    }

    // Predictor decay between events (both regimes).
    for (k, (&t_k, &v_k)) in trace
        .events
        .iter()
        .zip(trace.event_lyapunov.iter())
        .enumerate()
    {
        let next_event = trace.events.get(k + 1).copied().unwrap_or(usize::MAX);
        for tau in 1..=cfg.m {
            let step = t_k + tau - 1;
            if step >= trace.predictor_applied.len() || t_k + tau > next_event {
                break;
            }
            let vbar = trace.predictor_applied[step];
            let bound = if v_k >= cfg.eps_sq {
                cfg.beta.powi(tau as i32) * v_k
            } else {
                cfg.eps_sq
            };
            if vbar > bound + tol {
                bad.push(format!(
                    "predictor decay violated at event {k} (t_k = {t_k}), tau = {tau}: {vbar} > {bound}"
                ));
            }
        }
    }

    // Ultimate bound persistence from event entry.
    let report = guub_report(trace, cfg.eps_sq);
    if report.violations_after_entry > 0 {
        bad.push(format!(
            "{} ultimate-bound violations after entry at t = {:?}",
            report.violations_after_entry, report.first_entry
        ));
    }

    // Event-to-event contraction while above the bound.
    for k in 0..trace.events.len().saturating_sub(1) {
        let v_k = trace.event_lyapunov[k];
        let v_next = trace.event_lyapunov[k + 1];
        if v_k > cfg.eps_sq {
            let bound = (cfg.beta.powi(cfg.m as i32) * v_k).max(cfg.eps_sq);
            if v_next > bound + tol {
                bad.push(format!(
                    "event decrease violated at event {k}: {v_next} > {bound}"
                ));
            }
        }
    }

    bad
}

/// `count` points uniformly distributed on the sphere of the given radius,
/// via normalized standard normals.
pub fn sample_sphere(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 0.0 {
                return v * (radius / norm);
            }
        })
        .collect()
}

/// Per-initial-condition statistics for one controller over a batch. Rows
/// keep the sampling order (which is seed-determined), so results are
/// reproducible regardless of scheduling.
pub fn batch_run(
    model: &SystemModel,
    policy: &dyn EventPolicy,
    cfg: &TriggerConfig,
    initial_conditions: &[Vector],
    events: usize,
) -> Result<Vec<(SimTrace, IetStats)>> {
    initial_conditions
        .par_iter()
        .map(|x0| {
            let trace = run_closed_loop(model, policy, cfg, x0, StopRule::Events(events))?;
            let stats = iet_stats(&trace, events)?;
            Ok((trace, stats))
        })
        .collect()
}

/// Mean of AIET and min of MIET across per-condition statistics.
pub fn aggregate(stats: &[IetStats]) -> (f64, usize) {
    let mean_aiet = stats.iter().map(|s| s.aiet).sum::<f64>() / stats.len() as f64;
    let min_miet = stats.iter().map(|s| s.miet).min().unwrap_or(0);
    (mean_aiet, min_miet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSet;
    use crate::controllers::ClfController;
    use crate::linalg::{solve_discrete_lyapunov, Mat};
    use crate::plant::{example1_disturbance, DisturbanceSource, SystemModel};
    use approx::assert_relative_eq;

    fn example1_setup() -> (SystemModel, ClfController, TriggerConfig) {
        let a = Mat::from_row_slice(3, 3, &[0.7, -0.1, -0.1, 0.0, 0.8, -0.4, 0.0, 0.0, 1.2]);
        let b = Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let model = SystemModel::new(a, b, 0.01, example1_disturbance()).unwrap();
        let k = Mat::from_row_slice(1, 3, &[0.0, 0.0, -0.3]);
        let acl = &model.a + &model.b * &k;
        let p = solve_discrete_lyapunov(&acl, &(Mat::identity(3, 3) * 0.01)).unwrap();
        let ctl = ClfController::new(
            &model,
            BasisSet::monomial(3),
            25,
            2,
            &k,
            p.clone(),
            Mat::identity(1, 1),
            0.952,
        )
        .unwrap();
        let cfg = TriggerConfig::new(0.952, 0.99, 0.01, 2, p, 0.01, &model).unwrap();
        (model, ctl, cfg)
    }

    #[test]
    fn undisturbed_origin_stays_at_origin() {
        let (model, ctl, cfg) = example1_setup();
        let mut model = model;
        model.d_bound = 0.0;
        model.disturbance = DisturbanceSource::Zero { dim: 3 };
        let trace =
            run_closed_loop(&model, &ctl, &cfg, &Vector::zeros(3), StopRule::Steps(50)).unwrap();
        assert!(trace.states.iter().all(|x| x.norm() == 0.0));
        assert_eq!(trace.events, vec![0]);
    }

    #[test]
    fn example1_converges_to_ultimate_bound() {
        let (model, ctl, cfg) = example1_setup();
        let x0 = Vector::from_column_slice(&[2.0, 5.0, 6.0]);
        let trace = run_closed_loop(&model, &ctl, &cfg, &x0, StopRule::Steps(500)).unwrap();
        assert!(trace.certified);
        let report = guub_report(&trace, cfg.eps_sq);
        assert!(report.first_entry.is_some());
        assert_eq!(report.violations_after_entry, 0);
        for iet in trace.inter_event_times() {
            assert!(iet >= 2);
        }
        assert!(verify_guarantees(&trace, &cfg).is_empty());
    }

    #[test]
    fn iet_stats_small_cases() {
        let mut trace = SimTrace {
            states: vec![],
            inputs: vec![],
            lyapunov: vec![],
            disturbances: vec![],
            events: vec![0, 2, 4, 6],
            predictor_applied: vec![],
            predictor_stale: vec![],
            threshold: vec![],
            event_lyapunov: vec![],
            certified: true,
        };
        let s = iet_stats(&trace, 3).unwrap();
        assert_eq!((s.aiet, s.miet), (2.0, 2));

        trace.events = vec![0, 3, 5];
        let s = iet_stats(&trace, 2).unwrap();
        assert_eq!((s.aiet, s.miet), (2.5, 2));

        assert!(iet_stats(&trace, 5).is_err());
    }

    #[test]
    fn guub_report_cases() {
        let below = SimTrace {
            states: vec![],
            inputs: vec![],
            lyapunov: vec![0.5, 0.4, 0.3],
            disturbances: vec![],
            events: vec![0],
            predictor_applied: vec![],
            predictor_stale: vec![],
            threshold: vec![],
            event_lyapunov: vec![0.5],
            certified: true,
        };
        assert_eq!(
            guub_report(&below, 1.0),
            GuubReport {
                first_entry: Some(0),
                violations_after_entry: 0
            }
        );

        let adversarial = SimTrace {
            lyapunov: vec![0.5, 0.4, 2.0, 0.3],
            ..below.clone()
        };
        let r = guub_report(&adversarial, 1.0);
        assert_eq!(r.violations_after_entry, 1);
    }

    #[test]
    fn sphere_sampling_radius_and_determinism() {
        let pts = sample_sphere(3, 2.5, 50, 9);
        for p in &pts {
            assert_relative_eq!(p.norm(), 2.5, epsilon = 1e-12);
        }
        assert_eq!(pts, sample_sphere(3, 2.5, 50, 9));
        assert_ne!(pts[0], sample_sphere(3, 2.5, 1, 10)[0]);
    }

    #[test]
    fn batch_is_deterministic() {
        let (model, ctl, cfg) = example1_setup();
        let x0s = sample_sphere(3, 8.0, 3, 1);
        let run1 = batch_run(&model, &ctl, &cfg, &x0s, 5).unwrap();
        let run2 = batch_run(&model, &ctl, &cfg, &x0s, 5).unwrap();
        for (a, b) in run1.iter().zip(run2.iter()) {
            assert_eq!(a.1, b.1);
            assert_eq!(a.0.lyapunov, b.0.lyapunov);
        }
    }

    #[test]
    fn event_lyapunov_sequence_contracts_above_bound() {
        let (model, ctl, cfg) = example1_setup();
        let x0 = Vector::from_column_slice(&[2.0, 5.0, 6.0]);
        let trace = run_closed_loop(&model, &ctl, &cfg, &x0, StopRule::Events(8)).unwrap();
        let bound = cfg.beta.powi(cfg.m as i32);
        for w in trace.event_lyapunov.windows(2) {
            if w[0] > cfg.eps_sq {
                assert!(w[1] <= (bound * w[0]).max(cfg.eps_sq) + GUUB_TOL);
            }
        }
    }
}
