//! Command-line front end for the multilevel estimator: configuration,
//! experiment drivers and CSV/JSON artifacts.

pub mod allocate;
pub mod config;
pub mod convergence;
pub mod output;
pub mod reference;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use hpmlmc::engine::RunStatus;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hpmlmc", version, about = "hp-multilevel Monte Carlo experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `engine.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adaptive estimate of the mean field.
    Run,
    /// Pilot samples and fitted bias, variance and work rates.
    Convergence,
    /// Sample numbers for a table of level variances and costs.
    Allocate {
        /// CSV with columns level,sigma2,w and optionally m_tot.
        #[arg(long)]
        sigma: PathBuf,
    },
    /// Quadrature reference of the mean field.
    Reference {
        /// Overrides `reference.nodes_per_dim`.
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn load(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.engine.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> anyhow::Result<i32> {
    let cfg = load(cli)?;
    let dir = cfg.output.directory.clone();
    match &cli.command {
        Command::Run => {
            let status = run::execute(&cfg, &dir)?;
            println!("{status:?}; artifacts in {}", dir.display());
            Ok(match status {
                RunStatus::Certified => EXIT_OK,
                RunStatus::BiasUncertified => EXIT_UNCERTIFIED,
            })
        }
        Command::Convergence => {
            let r = convergence::execute(&cfg, &dir)?;
            println!(
                "kappa1 = {:.4}, kappa2 = {:.4}, gamma1 = {:.4}, kappa2*q0~ = {:.4}, regime {:?}",
                r.kappa1, r.kappa2, r.gamma1, r.kappa2_q0_tilde, r.regime
            );
            Ok(EXIT_OK)
        }
        Command::Allocate { sigma } => {
            let a = allocate::execute(&cfg, sigma, &dir)?;
            print!("{}", allocate::render(&a));
            Ok(EXIT_OK)
        }
        Command::Reference { nodes } => {
            let r = reference::execute(&cfg, nodes.unwrap_or(cfg.reference.nodes_per_dim), &dir)?;
            let s = &r.summary;
            print!("level {} norm {:.12e}", s.level, s.norm);
            match s.norm_change {
                Some(d) => println!(" (change {d:.3e} from {} nodes)", s.coarser_nodes_per_dim.unwrap_or(0)),
                None => println!(),
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args`, runs the command on a pool of `--workers` threads and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return EXIT_ERROR;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
