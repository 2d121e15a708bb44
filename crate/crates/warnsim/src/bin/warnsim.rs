//! Thin CLI over the library: single episodes, batch sweeps, the belief
//! convergence demo and the ordering report.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use warnsim::config::EngineConfig;
use warnsim::harness::{
    compare_report, demo_csv, estimate_demo, read_summary_csv, run_sweep, SweepSpec,
};
use warnsim::sim::{build_scenario, episode, trace_csv, Method, ScenarioKind};

#[derive(Parser)]
#[command(name = "warnsim", about = "Driver warning planning and simulation")]
struct Cli {
    /// Engine configuration file (JSON); defaults are built in.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its full trace.
    Simulate {
        #[arg(long, default_value = "front-hard-brake")]
        scenario: ScenarioKind,
        #[arg(long, default_value_t = 13.5)]
        d_gap: f64,
        #[arg(long, default_value = "est-state-mdp")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the trace CSV.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the batch protocol over scenarios, gaps and methods.
    Sweep {
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip per-episode trace files.
        #[arg(long)]
        no_traces: bool,
        /// Print the ordering report after the sweep.
        #[arg(long)]
        report: bool,
    },
    /// Scripted belief-convergence demo; writes a belief trace CSV.
    EstimateDemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check method orderings in a sweep summary; exits nonzero on violation.
    Report {
        #[arg(long)]
        summary: PathBuf,
        /// Episodes per cell used for standard errors.
        #[arg(long, default_value_t = 200)]
        runs: usize,
    },
}

fn load_config(path: &Option<PathBuf>) -> EngineConfig {
    match path {
        Some(p) => EngineConfig::load(p).unwrap_or_else(|e| {
            eprintln!("config error: {e}");
            std::process::exit(2);
        }),
        None => EngineConfig::default(),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let cfg = load_config(&cli.config);

    match cli.command {
        Command::Simulate {
            scenario,
            d_gap,
            method,
            seed,
            out,
        } => {
            let script = build_scenario(scenario, d_gap, &cfg).expect("scenario");
            let result = episode(&script, method, seed, &cfg).expect("episode");
            std::fs::create_dir_all(&out).expect("output dir");
            let path = out.join(format!("{scenario}_{d_gap:.1}_{method}_seed{seed}.csv"));
            std::fs::write(&path, trace_csv(&result, &cfg)).expect("write trace");
            println!(
                "{scenario} d_gap {d_gap:.1} {method} seed {seed}: reward {:.2}, collision {}, warnings {:?}",
                result.total_traj_reward, result.collision, result.warning_counts
            );
            println!("trace: {}", path.display());
            ExitCode::SUCCESS
        }
        Command::Sweep {
            runs,
            seed,
            out,
            no_traces,
            report,
        } => {
            let mut spec = SweepSpec::standard(out.clone(), runs, seed);
            spec.write_traces = !no_traces;
            let summaries = run_sweep(&spec, &cfg).expect("sweep");
            for s in &summaries {
                println!(
                    "{}: mean {:.2} std {:.2} counts [{:.2} {:.2} {:.2} {:.2}] collisions {:.2}",
                    s.key(),
                    s.mean_reward,
                    s.std_reward,
                    s.mean_counts[0],
                    s.mean_counts[1],
                    s.mean_counts[2],
                    s.mean_counts[3],
                    s.collision_rate
                );
            }
            println!("summary: {}", out.join("summary.csv").display());
            if report {
                let r = compare_report(&summaries);
                for line in &r.lines {
                    println!("{line}");
                }
                if !r.is_clean() {
                    return ExitCode::FAILURE;
                }
            }
            ExitCode::SUCCESS
        }
        Command::EstimateDemo { seed, out } => {
            let trace = estimate_demo(&cfg, seed);
            std::fs::create_dir_all(&out).expect("output dir");
            let path = out.join(format!("belief_trace_seed{seed}.csv"));
            std::fs::write(&path, demo_csv(&trace)).expect("write trace");
            match trace.convergence_time {
                Some(t) => println!(
                    "switch at {:.1} s, belief above 0.9 on safe at {:.1} s",
                    trace.switch_time, t
                ),
                None => println!("belief did not converge within the episode"),
            }
            println!("trace: {}", path.display());
            ExitCode::SUCCESS
        }
        Command::Report { summary, runs } => {
            let summaries = read_summary_csv(&summary, runs).expect("summary csv");
            let r = compare_report(&summaries);
            for line in &r.lines {
                println!("{line}");
            }
            if r.is_clean() {
                println!("orderings satisfied");
                ExitCode::SUCCESS
            } else {
                println!("{} violation(s)", r.violations.len());
                ExitCode::FAILURE
            }
        }
    }
}
