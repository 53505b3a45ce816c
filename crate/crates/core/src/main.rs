//! Command-line harness: run experiments, sweep horizons, estimate
//! geometric constants, evaluate the fixed-policy oracle, and reproduce
//! the OLS inconsistency demonstration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stratlab::config::parse_config;
use stratlab::env::sample_context;
use stratlab::error::Error;
use stratlab::eval::{
    c1_lower_bound, c2_lower_bound, estimate_c1, estimate_c2, fit_scaling_exponent,
    ols_inconsistency_demo, stackelberg_oracle, GridResolution,
};
use stratlab::harness::{
    resolve_model, run_experiment, run_sweep, sweep_plot_svg, sweep_summary_csv, to_csv,
};

#[derive(Parser)]
#[command(name = "stratlab", about = "Online classification of strategic agents", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write checkpoint CSV artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for per-seed parallelism (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Also write a per-round trace file.
        #[arg(long)]
        trace: bool,
    },
    /// Run the config across a list of horizons and summarize scaling.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Horizon list, e.g. T=4096,8192,16384.
        #[arg(long)]
        vary: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo estimates of the ball constants with closed-form bounds.
    Constants {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brute-force best fixed policy value on one seeded context stream.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Number of slope directions (64 intercepts per slope).
        #[arg(long, default_value_t = 720)]
        grid: usize,
    },
    /// Clean-only vs all-data OLS estimation error on gamed streams.
    DemoInconsistency {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                Error::ScaleGuard(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(cli: Cli) -> stratlab::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            trace,
        } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Argument(e.to_string()))?;
            }
            let cfg = parse_config(&config)?;
            let artifacts = run_experiment(&cfg, trace)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("results.csv"), to_csv(&cfg, &artifacts))?;
            if trace {
                let mut t = String::from(
                    "seed,t,action,optimal_action,clean,inst_regret,observed_reward\n",
                );
                for (i, logs) in artifacts.traces.iter().enumerate() {
                    let seed = cfg.base_seed + i as u64;
                    for l in logs {
                        t.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            seed,
                            l.t,
                            l.action,
                            l.optimal_action,
                            l.clean,
                            l.inst_regret,
                            l.observed_reward.map(|r| r.to_string()).unwrap_or_default()
                        ));
                    }
                }
                std::fs::write(out.join("trace.csv"), t)?;
            }
            println!("wrote {}", out.join("results.csv").display());
            Ok(())
        }
        Command::Sweep { config, vary, out } => {
            let cfg = parse_config(&config)?;
            let horizons = parse_vary(&vary)?;
            let (runs, points) = run_sweep(&cfg, &horizons, false)?;
            std::fs::create_dir_all(&out)?;
            let mut all = String::new();
            for (i, (c, a)) in runs.iter().enumerate() {
                let csv = to_csv(c, a);
                if i == 0 {
                    all.push_str(&csv);
                } else {
                    all.push_str(csv.splitn(2, '\n').nth(1).unwrap_or(""));
                }
            }
            std::fs::write(out.join("results.csv"), all)?;
            std::fs::write(out.join("summary.csv"), sweep_summary_csv(&points))?;
            std::fs::write(out.join("plot.svg"), sweep_plot_svg(&points))?;
            let pts: Vec<(f64, f64)> = points
                .iter()
                .map(|p| {
                    let m = p.regrets.iter().sum::<f64>() / p.regrets.len().max(1) as f64;
                    (p.horizon as f64, m)
                })
                .collect();
            match fit_scaling_exponent(&pts) {
                Ok(s) => println!("log-log slope of mean regret vs T: {s:.4}"),
                Err(e) => println!("slope fit unavailable: {e}"),
            }
            println!("wrote {}", out.join("summary.csv").display());
            Ok(())
        }
        Command::Constants {
            d,
            delta,
            samples,
            out,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let (c1, c1_se) = estimate_c1(d, delta, samples, &mut rng)?;
            let (c2, c2_se) = estimate_c2(d, delta, samples, &mut rng)?;
            let report = format!(
                "d,delta,c1_mc,c1_stderr,c1_lower_bound,c2_mc,c2_stderr,c2_lower_bound,samples\n\
                 {d},{delta},{c1},{c1_se},{},{c2},{c2_se},{},{samples}\n",
                c1_lower_bound(d, delta),
                c2_lower_bound(d, delta),
            );
            std::fs::write(&out, &report)?;
            print!("{report}");
            Ok(())
        }
        Command::Oracle { config, grid } => {
            let cfg = parse_config(&config)?;
            let model = resolve_model(&cfg)?;
            let source = cfg.context_source()?;
            let mut env_rng = ChaCha8Rng::seed_from_u64(cfg.base_seed);
            let contexts: Vec<Vec<f64>> = (1..=cfg.horizon)
                .map(|t| sample_context(&source, t, &mut env_rng))
                .collect::<stratlab::Result<_>>()?;
            let behavior = stratlab::agent::AgentBehavior::lazy(cfg.delta);
            let value = stackelberg_oracle(
                &model,
                &behavior,
                &contexts,
                GridResolution {
                    slopes: grid,
                    intercepts: 64,
                },
            )?;
            println!("best fixed-policy cumulative expected reward: {value}");
            Ok(())
        }
        Command::DemoInconsistency { config } => {
            let cfg = parse_config(&config)?;
            let model = resolve_model(&cfg)?;
            let mut clean_errs = Vec::new();
            let mut all_errs = Vec::new();
            for i in 0..cfg.seeds {
                let seed = cfg.base_seed + i as u64;
                let (ec, ea) = ols_inconsistency_demo(&model, cfg.delta, cfg.horizon, seed)?;
                println!("seed {seed}: clean-only err {ec:.6}, all-data err {ea:.6}");
                clean_errs.push(ec);
                all_errs.push(ea);
            }
            println!(
                "median clean-only err {:.6}, median all-data err {:.6}",
                median(&mut clean_errs),
                median(&mut all_errs)
            );
            Ok(())
        }
    }
}

fn parse_vary(vary: &str) -> stratlab::Result<Vec<usize>> {
    let rest = vary
        .strip_prefix("T=")
        .ok_or_else(|| Error::Config(format!("--vary must look like T=4096,8192; got '{vary}'")))?;
    let list: Result<Vec<usize>, _> = rest.split(',').map(|s| s.trim().parse()).collect();
    list.map_err(|e| Error::Config(format!("bad --vary horizon list: {e}")))
}

fn median(vals: &mut [f64]) -> f64 {
    vals.sort_by(|a, b| a.total_cmp(b));
    let n = vals.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}
