mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "fastgate", version, about = "Design and verify split-pulse fast phase gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form conditions of a scheme file.
    Evaluate {
        scheme: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize the delays of a scheme family.
    Optimize {
        #[command(flatten)]
        family: FamilyArgs,
        /// Pulse-pair multiplicity for symmetric families.
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize a family over several multiplicities and fit the gate-time scaling.
    Scaling {
        #[command(flatten)]
        family: FamilyArgs,
        /// Comma-separated multiplicities.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Phase-space trajectories of both motional modes.
    Trajectory {
        /// Scheme file; otherwise the family is optimized (or built from --delays).
        #[arg(long, conflicts_with = "family")]
        scheme: Option<PathBuf>,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = FrameArg::Lab)]
        frame: FrameArg,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate ln J over one or two free delays.
    Landscape {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// Base delays; the scanned entries are replaced by grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        at: Vec<f64>,
        /// `index:lo:hi:steps`, given once or twice.
        #[arg(long, required = true)]
        axis: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact simulation of a scheme with truncated motional modes.
    Oracle {
        scheme: PathBuf,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        /// Pulse-area error added to every π/2 rotation.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Also search for the worst-case coherent input state.
        #[arg(long)]
        worst_case: bool,
        /// Fit the quadratic area-error coefficient.
        #[arg(long)]
        perturbation: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep a systematic error and locate the tolerance threshold.
    Robustness {
        #[arg(value_enum)]
        kind: SweepArg,
        /// Scheme file (symmetric schemes also define the timing network).
        #[arg(long)]
        scheme: PathBuf,
        /// Network file for timing sweeps of non-symmetric schemes.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Laser pulses driven through the network.
        #[arg(long, default_value_t = 1)]
        pulses: usize,
        /// Sweep start: ps (timing), rad (area) or mrad (angle).
        #[arg(long, allow_negative_numbers = true)]
        low: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        high: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Error budget defining the threshold.
        #[arg(long, default_value_t = fastgate::robustness::DEFAULT_BUDGET)]
        budget: f64,
        #[arg(long, default_value = "transverse_accumulation")]
        model: String,
        /// Transverse Lamb-Dicke parameter; defaults to eta.
        #[arg(long)]
        eta_t: Option<f64>,
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Beam-splitter network tools.
    Optics {
        #[command(subcommand)]
        command: OpticsCommand,
    },
}

#[derive(Subcommand)]
enum OpticsCommand {
    /// Trace laser pulses through a network into an incident pulse train.
    Compile {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value_t = 1)]
        pulses: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Build the network realizing a scheme file.
    Design {
        scheme: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        overhead: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Check that a network reproduces a scheme within the laser's limits.
    Check {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value_t = 1)]
        pulses: usize,
        /// Timing and energy tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Trap parameter file (JSON with eta, nu and optional nbar).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Laser parameter file (JSON with rep_rate, max_area and optional pulse_duration).
    #[arg(long)]
    laser: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    nbar: Option<f64>,
    /// Laser repetition rate, Hz.
    #[arg(long)]
    rep_rate: Option<f64>,
    /// Maximum laser pulse area in units of π.
    #[arg(long)]
    max_area_pi: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Format of the table or summary printed to stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Clone)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,
    /// Family descriptor file, instead of --family.
    #[arg(long, conflicts_with = "family")]
    family_file: Option<PathBuf>,
    /// Pulse-pair weights `a,b,c` of a symmetric family.
    #[arg(long, value_delimiter = ',', default_value = "1,2,2")]
    abc: Vec<u32>,
    /// Mirror the symmetric scheme's kick directions.
    #[arg(long)]
    negate: bool,
    /// Delay loops of a split family.
    #[arg(long, default_value_t = 3)]
    loops: usize,
    /// Laser pulses of a split family.
    #[arg(long, default_value_t = 1)]
    laser_pulses: usize,
    /// Zero-delay grouping loops of an alternating family.
    #[arg(long, default_value_t = 1)]
    grouping: u32,
    /// Free delays of a free-times family.
    #[arg(long, default_value_t = 3)]
    dims: usize,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Independent seeded searches per optimization.
    #[arg(long, default_value_t = 64)]
    starts: usize,
    /// Objective evaluations per start.
    #[arg(long, default_value_t = 20_000)]
    max_evals: usize,
    #[arg(long)]
    population: Option<usize>,
    /// Search box `lo:hi` in trap periods, shared by every delay.
    #[arg(long, default_value = "0:1")]
    bounds: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyKind {
    Gzc,
    Symmetric,
    Direct,
    Alternating,
    FreeTimes,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrameArg {
    Lab,
    Rotating,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    Timing,
    Area,
    Angle,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { run::EXIT_PARSE } else { run::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(run::exit_code(&e) as u8)
        }
    }
}
