//! `bandmeso` command-line driver.
//!
//! Exit codes: 0 success, 1 numerical or acceptance failure, 2 usage or
//! configuration error.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Command, Format, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

/// Maps library errors: bad inputs are usage errors, the rest numerical.
pub fn lib_err(context: &str) -> impl Fn(bandmeso::Error) -> CliError + '_ {
    move |e| {
        use bandmeso::Error as E;
        let msg = if context.is_empty() { e.to_string() } else { format!("{context} {e}") };
        match e {
            E::Validation(_) | E::Geometry(_) | E::Domain(_) | E::Regime(_) | E::DegenerateCovariance(_) | E::Samples(_) => {
                CliError::Usage(msg)
            }
            _ => CliError::Numerical(msg),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bandmeso", version, about = "Mesoscopic eigenvalue statistics of random band matrices")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML or JSON config; an output artifact re-runs from its echoed config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shipped preset (see `bandmeso presets`).
    #[arg(long, global = true, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the BANDMESO_WORKERS environment variable.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    n_samples: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Profile constants as JSON.
    Profile,
    /// Draw samples and report their spectra.
    Sample {
        #[arg(long)]
        index: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        /// Write the first sample to a binary dump and read it back.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Monte Carlo estimates of smoothed linear statistics.
    Estimate,
    /// Theory prediction of Theta.
    Predict {
        #[arg(long)]
        regime: Option<String>,
    },
    /// Run a verification suite.
    Verify { suite: Option<String> },
    /// Grid sweep with Monte Carlo and theory columns.
    Sweep,
    /// List shipped presets.
    Presets,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => config::load_config(path)?,
        (None, Some(name)) => config::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    let command = match &cli.command {
        Cmd::Profile => Command::Profile,
        Cmd::Sample { .. } => Command::Sample,
        Cmd::Estimate => Command::Estimate,
        Cmd::Predict { .. } => Command::Predict,
        Cmd::Verify { .. } => Command::Verify,
        Cmd::Sweep => Command::Sweep,
        Cmd::Presets => unreachable!(),
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Usage(format!("config is for `{c:?}`, not `{command:?}`").to_lowercase()));
        }
    }
    cfg.command = Some(command);
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(n) = cli.n_samples {
        cfg.n_samples = n;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(f) = cli.format {
        cfg.format = Some(f);
    }
    match &cli.command {
        Cmd::Sample { index, count, dump } => {
            if let Some(i) = index {
                cfg.sample.index = *i;
            }
            if let Some(c) = count {
                cfg.sample.count = *c;
            }
            if let Some(d) = dump {
                cfg.sample.dump = Some(d.clone());
            }
        }
        Cmd::Predict { regime: Some(r) } => cfg.predict.regime = r.clone(),
        Cmd::Verify { suite: Some(s) } => cfg.verify.suite = Some(s.clone()),
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Cmd::Presets = cli.command {
        for (name, _) in config::PRESETS {
            println!("{name}");
        }
        return Ok(());
    }
    let cfg = resolve(cli)?;
    match cfg.command.expect("resolved") {
        Command::Profile => commands::run_profile(&cfg),
        Command::Sample => commands::run_sample(&cfg),
        Command::Estimate => commands::run_estimate(&cfg),
        Command::Predict => commands::run_predict(&cfg),
        Command::Verify => verify::run_verify(&cfg),
        Command::Sweep => commands::run_sweep(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Numerical(_) => 1,
            })
        }
    }
}
