//! Config-driven front end: closed-loop simulation, batch experiments over
//! sampled initial conditions, and a feasibility audit of the certificate.
//!
//! Exit status is 0 only when every requested run completes and every
//! certified invariant holds on the produced traces.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etpc::config::example1_toml;
use etpc::report::{fmt_f64, per_condition_csv, summary_csv, trace_csv, SummaryRow};
use etpc::sim::{
    aggregate, batch_run, guub_report, run_closed_loop, sample_sphere,
    verify_guarantees, StopRule,
};
use etpc::{ControllerKind, Experiment, ExperimentConfig, SimTrace};

#[derive(Parser)]
#[command(name = "etpc", version, about = "Event-triggered parameterized control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed loop from the configured initial state and write a
    /// per-step trace CSV per controller.
    Simulate(RunArgs),
    /// Run all controllers over sampled initial conditions and write the
    /// aggregated summary table.
    Batch(RunArgs),
    /// Audit the certificate: Lyapunov solution, alpha floor, sigma bound
    /// and the maximum feasible constraint horizon.
    Feasibility(ConfigArgs),
    /// Run the bundled Example-1 recipe: feasibility audit plus a 500-step
    /// simulation of all three controllers.
    ReproduceExample1(OverrideArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct OverrideArgs {
    /// Output directory for CSV files (overrides the config; the
    /// ETPC_OUT_DIR environment variable sits between the two).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Sampling seed override for batch runs.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker thread count (ETPC_THREADS also honored; flag wins).
    #[arg(long)]
    threads: Option<usize>,

    /// Comma-separated controller list (clf, emulation, zoh), overriding
    /// the config.
    #[arg(long, value_delimiter = ',')]
    controllers: Option<Vec<String>>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    overrides: OverrideArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => load(&args.config.config, &args.overrides)
            .and_then(|exp| cmd_simulate(&exp, &args.overrides, None)),
        Command::Batch(args) => load(&args.config.config, &args.overrides)
            .and_then(|exp| cmd_batch(&exp, &args.overrides)),
        Command::Feasibility(args) => {
            load_config_text(
                std::fs::read_to_string(&args.config)
                    .map_err(|e| format!("{}: {e}", args.config.display())),
            )
            .and_then(|exp| cmd_feasibility(&exp))
        }
        Command::ReproduceExample1(overrides) => {
            load_bundled(&overrides).and_then(|exp| {
                cmd_feasibility(&exp)?;
                cmd_simulate(&exp, &overrides, Some(500))
            })
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn init_threads(overrides: &OverrideArgs) -> Result<(), String> {
    let threads = overrides.threads.or_else(|| {
        std::env::var("ETPC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if t == 0 {
            return Err("threads: must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    Ok(())
}

fn load(path: &Path, overrides: &OverrideArgs) -> Result<Experiment, String> {
    init_threads(overrides)?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_config_text(Ok(text))
}

fn load_bundled(overrides: &OverrideArgs) -> Result<Experiment, String> {
    init_threads(overrides)?;
    load_config_text(Ok(example1_toml().to_string()))
}

fn load_config_text(text: Result<String, String>) -> Result<Experiment, String> {
    let cfg = ExperimentConfig::from_toml_str(&text?).map_err(|e| e.to_string())?;
    Experiment::from_config(cfg).map_err(|e| e.to_string())
}

fn resolve_out_dir(exp: &Experiment, overrides: &OverrideArgs) -> Result<PathBuf, String> {
    let dir = overrides
        .out_dir
        .clone()
        .or_else(|| std::env::var("ETPC_OUT_DIR").ok().map(PathBuf::from))
        .or_else(|| exp.config.run.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(dir)
}

fn resolve_controllers(
    exp: &Experiment,
    overrides: &OverrideArgs,
) -> Result<Vec<ControllerKind>, String> {
    let names: Vec<String> = overrides
        .controllers
        .clone()
        .unwrap_or_else(|| exp.config.run.controllers.clone());
    names
        .iter()
        .map(|s| s.parse().map_err(|e: etpc::EtpcError| e.to_string()))
        .collect()
}

fn print_preconditions(exp: &Experiment) -> bool {
    let mut all = true;
    println!("preconditions:");
    for check in exp.precondition_report() {
        let mark = if check.pass { "pass" } else { "FAIL" };
        println!("  [{mark}] {} ({})", check.name, check.detail);
        all &= check.pass;
    }
    all
}

/// Guarantee audit for one trace. The emulation baseline carries no
/// Lyapunov-decrease constraint, so only the one-step predictor soundness
/// is checked for it.
fn trace_violations(exp: &Experiment, kind: ControllerKind, trace: &SimTrace) -> Vec<String> {
    match kind {
        ControllerKind::Emulation => (0..trace.predictor_applied.len())
            .filter(|&t| trace.lyapunov[t + 1] > trace.predictor_applied[t] + 1e-9)
            .map(|t| format!("predictor bound violated at t = {t}"))
            .collect(),
        _ => verify_guarantees(trace, &exp.trigger),
    }
}

fn cmd_simulate(
    exp: &Experiment,
    overrides: &OverrideArgs,
    force_steps: Option<usize>,
) -> Result<(), String> {
    let out_dir = resolve_out_dir(exp, overrides)?;
    let controllers = resolve_controllers(exp, overrides)?;
    let x0 = exp.x0().map_err(|e| e.to_string())?;
    let steps = force_steps
        .or(exp.config.run.steps)
        .ok_or("run.steps: missing")?;

    let ok = print_preconditions(exp);
    if exp.degenerate_bound() {
        println!("ultimate bound: degenerate (D = 0); trigger uses the decay branch only and V converges toward 0");
    } else {
        println!("ultimate bound: eps^2 = {}", fmt_f64(exp.trigger.eps_sq));
    }

    let mut clean = ok;
    for kind in controllers {
        let policy = exp
            .build_policy(kind, exp.config.horizon.n, exp.basis.degree())
            .map_err(|e| e.to_string())?;
        let trace = run_closed_loop(
            &exp.model,
            policy.as_ref(),
            &exp.trigger,
            &x0,
            StopRule::Steps(steps),
        )
        .map_err(|e| e.to_string())?;

        let path = out_dir.join(format!("trace_{}.csv", kind.name()));
        std::fs::write(&path, trace_csv(&trace)).map_err(|e| format!("{}: {e}", path.display()))?;

        let intervals = trace.inter_event_times();
        let guub = guub_report(&trace, exp.trigger.eps_sq);
        println!("controller {}:", kind.name());
        println!("  steps {steps}, events {}", trace.events.len());
        if !intervals.is_empty() {
            let aiet = intervals.iter().sum::<usize>() as f64 / intervals.len() as f64;
            let miet = *intervals.iter().min().expect("nonempty");
            println!("  aiet {} miet {miet}", fmt_f64(aiet));
        }
        match guub.first_entry {
            Some(t) => println!(
                "  ultimate-bound entry at t = {t}, violations after entry {}",
                guub.violations_after_entry
            ),
            None => println!("  ultimate bound not reached within the run"),
        }
        println!("  trace written to {}", path.display());

        let violations = trace_violations(exp, kind, &trace);
        for v in &violations {
            eprintln!("  violation: {v}");
        }
        clean &= violations.is_empty();
    }
    if clean {
        Ok(())
    } else {
        Err("certified invariants violated (see diagnostics above)".into())
    }
}

fn cmd_batch(exp: &Experiment, overrides: &OverrideArgs) -> Result<(), String> {
    let out_dir = resolve_out_dir(exp, overrides)?;
    let controllers = resolve_controllers(exp, overrides)?;
    let sampling = exp
        .config
        .run
        .sampling
        .as_ref()
        .ok_or("run.sampling: missing")?;
    if sampling.count == 0 {
        return Err("run.sampling.count: empty sample".into());
    }
    let seed = overrides.seed.unwrap_or(sampling.seed);
    let x0s = sample_sphere(exp.model.state_dim(), sampling.radius, sampling.count, seed);

    let n_values = sampling
        .n_values
        .clone()
        .unwrap_or_else(|| vec![exp.config.horizon.n]);
    let p_values = sampling
        .p_values
        .clone()
        .unwrap_or_else(|| vec![exp.basis.degree()]);

    let ok = print_preconditions(exp);
    let mut clean = ok;
    let mut rows = Vec::new();
    for &n in &n_values {
        for &p in &p_values {
            for &kind in &controllers {
                let policy = exp.build_policy(kind, n, p).map_err(|e| e.to_string())?;
                let results = batch_run(
                    &exp.model,
                    policy.as_ref(),
                    &exp.trigger,
                    &x0s,
                    sampling.events,
                )
                .map_err(|e| e.to_string())?;
                for (trace, _) in &results {
                    let violations = trace_violations(exp, kind, trace);
                    for v in &violations {
                        eprintln!("violation ({} n={n} p={p}): {v}", kind.name());
                    }
                    clean &= violations.is_empty();
                }
                let stats: Vec<_> = results.iter().map(|(_, s)| *s).collect();
                let (mean_aiet, min_miet) = aggregate(&stats);
                rows.push(SummaryRow {
                    controller: kind,
                    n,
                    p,
                    mean_aiet,
                    min_miet,
                    conditions: sampling.count,
                    events_per_condition: sampling.events,
                });
                let per_path =
                    out_dir.join(format!("per_condition_{}_n{n}_p{p}.csv", kind.name()));
                std::fs::write(&per_path, per_condition_csv(&stats))
                    .map_err(|e| format!("{}: {e}", per_path.display()))?;
                println!(
                    "{} n={n} p={p}: mean aiet {} min miet {min_miet}",
                    kind.name(),
                    fmt_f64(mean_aiet)
                );
            }
        }
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary_csv(&rows))
        .map_err(|e| format!("{}: {e}", summary_path.display()))?;
    println!("summary written to {}", summary_path.display());
    if clean {
        Ok(())
    } else {
        Err("certified invariants violated (see diagnostics above)".into())
    }
}

fn cmd_feasibility(exp: &Experiment) -> Result<(), String> {
    let p = &exp.p;
    println!("lyapunov solution P:");
    for i in 0..p.nrows() {
        let row: Vec<String> = (0..p.ncols()).map(|j| fmt_f64(p[(i, j)])).collect();
        println!("  [{}]", row.join(", "));
    }
    println!("alpha floor: {}", fmt_f64(exp.alpha_floor));
    if exp.config.trigger.alpha < exp.alpha_floor {
        println!(
            "warning: alpha = {} is below the floor; the M = 1 feasibility guarantee does not apply",
            exp.config.trigger.alpha
        );
    }
    println!("sigma_bar: {}", fmt_f64(exp.trigger.sigma_bar));
    println!("max feasible M: {}", exp.certificate.m_max);
    let ok = print_preconditions(exp);
    if ok {
        Ok(())
    } else {
        Err("preconditions failed (see report above)".into())
    }
}
