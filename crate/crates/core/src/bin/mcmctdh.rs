use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mcmctdh::config::{parse_config, PropagatorKind};
use mcmctdh::run::run;
use mcmctdh::Error;

#[derive(Parser)]
#[command(version, about = "Quantum-jump trajectory ensembles for dissipative coupled oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropagatorArg {
    Exact,
    Mctdh,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble described by a JSON configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long, value_enum)]
        propagator: Option<PropagatorArg>,
        /// Also solve the master equation and write `oracle.csv`.
        #[arg(long)]
        oracle: bool,
        /// Convergence sweep, e.g. `n_T=50,100,200`.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn parse_sweep(s: &str) -> Result<Vec<usize>, Error> {
    let list = s
        .strip_prefix("n_T=")
        .ok_or_else(|| Error::Config(format!("--sweep expects `n_T=a,b,c`, got `{s}`")))?;
    list.split(',')
        .map(|v| match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("--sweep: `{v}` is not a positive integer"))),
        })
        .collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let Command::Run { config, out, seed, trajectories, propagator, oracle, sweep, workers } = cli.command;
    let result = (|| {
        let mut cfg = parse_config(&config)?;
        if let Some(o) = out {
            cfg.output_dir = o;
        }
        if let Some(s) = seed {
            cfg.master_seed = s;
        }
        if let Some(n) = trajectories {
            if n == 0 {
                return Err(Error::Config("--trajectories must be positive".into()));
            }
            cfg.n_trajectories = n;
        }
        if let Some(p) = propagator {
            cfg.propagator = match p {
                PropagatorArg::Exact => PropagatorKind::Exact,
                PropagatorArg::Mctdh => PropagatorKind::Mctdh,
            };
        }
        if oracle {
            cfg.oracle = true;
        }
        if let Some(s) = sweep {
            cfg.sweep = Some(parse_sweep(&s)?);
        }
        if workers == Some(0) {
            return Err(Error::Config("--workers must be positive".into()));
        }
        if workers.is_some() {
            cfg.workers = workers;
        }
        run(&cfg)
    })();
    match result {
        Ok(outcome) => {
            println!(
                "{} trajectories, {} jumps, wrote {}",
                outcome.ensemble.n_trajectories,
                outcome.ensemble.jump_count(),
                outcome.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
