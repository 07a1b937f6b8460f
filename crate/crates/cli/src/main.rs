use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lambdamix::ErrorClass;

mod commands;
mod manifest;
mod output;

#[derive(Parser, Debug)]
#[command(name = "lambdamix", version, about = "Double-lambda four-wave mixing simulations")]
struct Cli {
    /// Worker threads for sweeps and ray averaging (0 = all cores).
    #[arg(long, global = true, env = "LAMBDAMIX_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Log progress at info level.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration file, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Dotted-path override, e.g. --set profile.delta_s_um=54 (repeatable).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Od,
    Ds,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Continuous-wave propagation: z-resolved fields and end-of-medium summary.
    Steady(Common),
    /// Pulse propagation: input/output traces and energy metrics.
    Pulse(Common),
    /// Sweep optical density or control-beam separation.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
    },
    /// Fit free parameters to transmission data, or invert an EIT delay.
    Fit(FitArgs),
    /// Re-run the configuration recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, required_unless_present = "delay")]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
    /// CSV with dotted-path columns plus T_p and/or T_s.
    #[arg(long, required_unless_present = "delay")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Measured EIT delay in units of 1/Γ; selects the delay-inversion mode.
    #[arg(long, requires = "omega_c", conflicts_with_all = ["config", "data"])]
    pub delay: Option<f64>,
    #[arg(long)]
    pub omega_c: Option<f64>,
    #[arg(long, default_value_t = 1.25)]
    pub gamma31: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        log::warn!("could not size worker pool: {e}");
    }
    let result = match cli.command {
        Command::Steady(c) => commands::steady(&c),
        Command::Pulse(c) => commands::pulse(&c),
        Command::Sweep { common, axis } => commands::sweep(&common, axis),
        Command::Fit(f) => commands::fit(&f),
        Command::Rerun { manifest, out } => commands::rerun(&manifest, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: a solver did not report convergence");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Solver => 3,
                ErrorClass::Io => 4,
            })
        }
    }
}
