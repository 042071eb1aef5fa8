//! Command-line front end of the `welander` library.
//!
//! Every subcommand resolves an [`ExperimentConfig`] (defaults, then the
//! `--config` file, then flags), runs one library operation and writes CSV
//! files whose header echoes the resolved configuration.

pub mod commands;
pub mod config;
pub mod figures;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{config_from_header, ConfigError, ExperimentConfig};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "WELANDER_OUT";

#[derive(Debug, Parser)]
#[command(name = "welander", version, about = "Smooth and piecewise-smooth Welander model experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [env: WELANDER_OUT, default: .]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub abs_tol: Option<f64>,
    /// Scan worker threads (0: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa2: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Integrate the model and write the trajectory and zone-crossing events.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        t_end: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "y0")]
        x0: Option<f64>,
        #[arg(long, allow_hyphen_values = true, requires = "x0")]
        y0: Option<f64>,
    },
    /// Print the switching-zone boundaries.
    Zones,
    /// Continue equilibria in mu at fixed eta.
    Equilibria {
        #[arg(long, allow_hyphen_values = true)]
        mu_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        mu_max: Option<f64>,
    },
    /// Compute the periodic orbit (collocation, or the return map at epsilon = 0).
    Orbit {
        /// Rotate the orbit onto a zone boundary: L+ or L-.
        #[arg(long, allow_hyphen_values = true)]
        anchor: Option<String>,
    },
    /// Two-parameter curves H, S and the tangency curves.
    Curves {
        /// Skip the tangency curves.
        #[arg(long)]
        no_tangency: bool,
    },
    /// Classify the attractor on a (mu, eta) grid.
    Scan {
        #[arg(long, allow_hyphen_values = true)]
        mu_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        mu_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eta_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eta_max: Option<f64>,
        #[arg(long)]
        n_mu: Option<usize>,
        #[arg(long)]
        n_eta: Option<usize>,
    },
    /// Integrate with mu following a linear ramp.
    Drift {
        #[arg(long, allow_hyphen_values = true)]
        mu_start: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        mu_end: Option<f64>,
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Regenerate the data behind one of the figures 2 to 9.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(2..=9))]
        n: u8,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Zones => "zones",
            Command::Equilibria { .. } => "equilibria",
            Command::Orbit { .. } => "orbit",
            Command::Curves { .. } => "curves",
            Command::Scan { .. } => "scan",
            Command::Drift { .. } => "drift",
            Command::Figure { .. } => "figure",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] welander::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Resolve the configuration: defaults, then the file, then flags.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let g = &cli.global;
    let mut c = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    c.command = cli.command.name().to_owned();
    set(&mut c.model.mu, g.mu);
    set(&mut c.model.eta, g.eta);
    set(&mut c.model.epsilon, g.epsilon);
    set(&mut c.model.kappa1, g.kappa1);
    set(&mut c.model.kappa2, g.kappa2);
    set(&mut c.numerics.rel_tol, g.rel_tol);
    set(&mut c.numerics.abs_tol, g.abs_tol);
    set(&mut c.numerics.workers, g.workers);
    match &cli.command {
        Command::Simulate { t_end, x0, y0 } => {
            set(&mut c.simulate.t_end, *t_end);
            if x0.is_some() {
                c.simulate.x0 = *x0;
                c.simulate.y0 = *y0;
            }
        }
        Command::Equilibria { mu_min, mu_max } => {
            set(&mut c.equilibria.mu_min, *mu_min);
            set(&mut c.equilibria.mu_max, *mu_max);
        }
        Command::Orbit { anchor } => {
            if let Some(a) = anchor {
                c.orbit.anchor = a.clone();
            }
        }
        Command::Curves { no_tangency } => {
            if *no_tangency {
                c.curves.tangency = false;
            }
        }
        Command::Scan {
            mu_min,
            mu_max,
            eta_min,
            eta_max,
            n_mu,
            n_eta,
        } => {
            set(&mut c.scan.mu_min, *mu_min);
            set(&mut c.scan.mu_max, *mu_max);
            set(&mut c.scan.eta_min, *eta_min);
            set(&mut c.scan.eta_max, *eta_max);
            set(&mut c.scan.n_mu, *n_mu);
            set(&mut c.scan.n_eta, *n_eta);
        }
        Command::Drift { mu_start, mu_end, rate } => {
            set(&mut c.drift.mu_start, *mu_start);
            set(&mut c.drift.mu_end, *mu_end);
            set(&mut c.drift.rate, *rate);
        }
        Command::Zones | Command::Figure { .. } => {}
    }
    c.validate()?;
    Ok(c)
}

/// Output directory: `--out`, then the environment, then the working
/// directory.
pub fn out_dir(cli: &Cli) -> PathBuf {
    cli.global
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Parse `argv` and run; returns the process exit code. Diagnostics go to
/// standard error, summaries to standard output.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("welander: error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let out = out_dir(cli);
    std::fs::create_dir_all(&out)?;
    let ctx = commands::Context { cfg, out };
    match &cli.command {
        Command::Simulate { .. } => commands::simulate(&ctx),
        Command::Zones => commands::zones(&ctx),
        Command::Equilibria { .. } => commands::equilibria(&ctx),
        Command::Orbit { .. } => commands::orbit(&ctx),
        Command::Curves { .. } => commands::curves(&ctx),
        Command::Scan { .. } => commands::scan(&ctx),
        Command::Drift { .. } => commands::drift(&ctx),
        Command::Figure { n } => figures::figure(&ctx, *n),
    }
}
