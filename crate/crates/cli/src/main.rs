//! `decaylaw`: decay curves, deviations from exponential decay, effective
//! Hamiltonians, late-time tails and closed-form/quadrature comparisons.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or config,
//! 3 quadrature did not converge at some point, 4 `compare` disagreement.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use commands::{Status, UsageError};
use config::{Auto, Command, ConfigError, Format, GridSpacing, Method, Model, RunConfig};
use decaylaw::DecayError;

/// Directory for outputs when `--output` is not given; stdout otherwise.
const OUTPUT_DIR_VAR: &str = "DECAYLAW_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "decaylaw", version, about = "Survival amplitudes of unstable states")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Survival amplitude and probability against the exponential law.
    Curve(Flags),
    /// ζ = a/a_c and f = |ζ|² - 1, with oscillation and envelope summaries.
    Deviation(Flags),
    /// Effective Hamiltonian h = i a'/a.
    Hamiltonian(Flags),
    /// Power-law fit of the late-time survival probability.
    Tail(Flags),
    /// Closed form against direct quadrature of the density.
    Compare(Flags),
    /// Samples of the spectral density.
    Spectrum(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// `key = value` file applied before the flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long = "s-r", value_name = "S_R")]
    s_r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    spacing: Option<GridSpacing>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Use N = 1 instead of the normalizing constant (negative control).
    #[arg(long)]
    unnormalized: bool,
    /// Fit window `lo:hi` for `tail`.
    #[arg(long, value_parser = config::parse_window)]
    window: Option<(f64, f64)>,
    #[arg(long, allow_hyphen_values = true)]
    e_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    e_max: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_panels: Option<usize>,
    /// Energy above which the quadrature switches to tail extrapolation.
    #[arg(long)]
    tail_cutoff: Option<f64>,
    /// Threshold energy of the general model.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Fractional threshold exponent of the general model.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    angular_momentum: Option<u32>,
    /// Pole energy of the general model (default: threshold + s_r).
    #[arg(long, allow_hyphen_values = true)]
    pole_re: Option<f64>,
    /// Pole imaginary part, -Γ/2 (default -0.5).
    #[arg(long, allow_hyphen_values = true)]
    pole_im: Option<f64>,
    /// Exponential form-factor scale of the general model.
    #[arg(long)]
    form_cutoff: Option<f64>,
    /// CSV with `x` and `p` columns, used by `tail` instead of a model.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    #[arg(long, short, value_name = "PATH")]
    output: Option<PathBuf>,
}

impl Flags {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v.into();
                }
            )*};
        }
        take!(model, s_r, x_max, spacing, format, method, window, e_min, abs_tol, rel_tol, max_panels);
        take!(threshold, alpha, angular_momentum, pole_im);
        if let Some(v) = self.x_min {
            cfg.x_min = Auto::Set(v);
        }
        if let Some(v) = self.points {
            cfg.points = Auto::Set(v);
        }
        if let Some(v) = self.e_max {
            cfg.e_max = Auto::Set(v);
        }
        if let Some(v) = self.tail_cutoff {
            cfg.tail_cutoff = Auto::Set(v);
        }
        if let Some(v) = self.pole_re {
            cfg.pole_re = Auto::Set(v);
        }
        if self.form_cutoff.is_some() {
            cfg.form_cutoff = self.form_cutoff;
        }
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if self.unnormalized {
            cfg.unnormalized = true;
        }
    }
}

/// Defaults, then the config file, then the flags.
fn effective_config(command: Command, flags: &Flags) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::defaults(command);
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))
            .map_err(|e| UsageError(format!("{e:#}")))?;
        cfg.apply_text(&text).map_err(|e| ConfigFileError {
            path: path.clone(),
            inner: e,
        })?;
    }
    flags.apply(&mut cfg);
    Ok(cfg)
}

#[derive(Debug)]
struct ConfigFileError {
    path: PathBuf,
    inner: ConfigError,
}

impl std::fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.inner)
    }
}

impl std::error::Error for ConfigFileError {}

fn destination(cfg: &RunConfig, command: Command) -> Option<PathBuf> {
    if let Some(path) = &cfg.output {
        return Some(path.clone());
    }
    let dir = std::env::var_os(OUTPUT_DIR_VAR).filter(|d| !d.is_empty())?;
    let extension = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    Some(PathBuf::from(dir).join(format!("{}.{extension}", command.name())))
}

fn execute(command: Command, flags: &Flags) -> anyhow::Result<Status> {
    let cfg = effective_config(command, flags)?;
    if flags.print_config {
        write_stdout(&cfg.to_text())?;
        return Ok(Status::Ok);
    }
    let run = commands::run(&cfg, command)?;
    let entries = cfg.entries();
    let meta = output::Meta {
        command: command.name(),
        config: &entries,
    };
    let text = match cfg.format {
        Format::Csv => output::to_csv(&run.table, &meta),
        Format::Json => output::to_json(&run.table, &meta),
    };
    match destination(&cfg, command) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("cannot create {}", parent.display()))?;
            }
            std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => write_stdout(&text)?,
    }
    for warning in &run.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(run.status)
}

/// Writes to stdout; a reader that went away early is not an error.
fn write_stdout(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn exit_code_for(error: &anyhow::Error) -> u8 {
    if error.is::<UsageError>() || error.is::<ConfigFileError>() {
        return 2;
    }
    match error.downcast_ref::<DecayError>() {
        Some(DecayError::InvalidGrid(_) | DecayError::InvalidParameter(_)) => 2,
        Some(DecayError::ConvergenceFailure { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Curve(f) => (Command::Curve, f),
        Sub::Deviation(f) => (Command::Deviation, f),
        Sub::Hamiltonian(f) => (Command::Hamiltonian, f),
        Sub::Tail(f) => (Command::Tail, f),
        Sub::Compare(f) => (Command::Compare, f),
        Sub::Spectrum(f) => (Command::Spectrum, f),
    };
    match execute(command, flags) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("error: quadrature did not converge at every point; see the `converged` column");
            ExitCode::from(3)
        }
        Ok(Status::Disagreement) => {
            eprintln!("error: closed form and quadrature disagree beyond {}", commands::COMPARE_TOLERANCE);
            ExitCode::from(4)
        }
        Err(e) => {
            let code = exit_code_for(&e);
            if code == 2 {
                eprintln!("error: invalid input: {e:#}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}
