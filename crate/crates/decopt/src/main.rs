//! Thin CLI over the library: run experiments, sweeps, bound reports,
//! verification suites, and graph generation from one config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use decopt::config::ExperimentConfig;
use decopt::runner::{self, RunnerError};
use decopt::verify;

#[derive(Parser)]
#[command(name = "decopt", about = "Decentralized non-convex optimization lab")]
struct Cli {
    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the problem seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configured experiment and write CSV records
    Run,
    /// Expand the config's [sweep] section and run every combination
    Sweep,
    /// Report lower/upper bound formulas (add --measure to also run)
    Bounds {
        /// Also execute the run and report measured work
        #[arg(long)]
        measure: bool,
    },
    /// Run a verification suite
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Emit the configured graph in edge-list text form
    GenGraph,
}

#[derive(Copy, Clone, ValueEnum)]
enum Suite {
    Graph,
    Instance,
    Chebyshev,
    Trajectory,
    ZeroChain,
    All,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, RunnerError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        RunnerError::Config(decopt::config::ConfigError::Parse(
            "--config PATH is required for this subcommand".into(),
        ))
    })?;
    let mut cfg = ExperimentConfig::from_file(&path.display().to_string())?;
    if let Some(seed) = cli.seed {
        cfg.problem.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode, RunnerError> {
    match &cli.cmd {
        Cmd::Run => {
            let cfg = load_config(cli)?;
            let art = runner::cmd_run(&cfg, &out_dir(cli, &cfg))?;
            println!("wrote {}", art.csv_path.display());
            println!("wrote {}", art.echo_path.display());
            if !art.completed {
                println!("note: target not reached within the round budget (incomplete)");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep => {
            let cfg = load_config(cli)?;
            let art = runner::cmd_sweep(&cfg, &out_dir(cli, &cfg), cli.threads)?;
            println!("wrote {}", art.csv_path.display());
            println!("wrote {}", art.summary_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bounds { measure } => {
            let cfg = load_config(cli)?;
            let report = runner::cmd_bounds(&cfg, *measure)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("json"));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { suite } => {
            let reports = match suite {
                Suite::Graph => vec![verify::graph_suite()],
                Suite::Instance => vec![verify::instance_suite()],
                Suite::Chebyshev => vec![verify::chebyshev_suite()],
                Suite::Trajectory => vec![verify::trajectory_suite()],
                Suite::ZeroChain => vec![verify::zero_chain_suite()],
                Suite::All => verify::all_suites(),
            };
            let mut ok = true;
            for rep in &reports {
                print!("{}", rep.render());
                ok &= rep.passed();
            }
            if ok {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Cmd::GenGraph => {
            let cfg = load_config(cli)?;
            let text = runner::gen_graph(&cfg)?;
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).ok();
                    let path = dir.join("graph.txt");
                    std::fs::write(&path, text).map_err(|e| RunnerError::Io {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
