//! `selfshrink`: reproducible experiments on graphical self-shrinkers.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a module
//! reports an error, 2 for usage errors.

mod commands;
mod error;
mod report;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "selfshrink", version, about = "Numerical experiments on graphical self-shrinkers")]
pub struct Cli {
    /// Config file of `[section]` headers and `key = value` lines; flags
    /// take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory receiving summary.json and the command's data files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the JSON summary to stdout instead of the table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shoot a one-dimensional shrinker curve from (0, a) with slope b.
    Shoot(ShootArgs),
    /// Classify shooting data over a grid of (a, b).
    Scan(ScanArgs),
    /// Curvature and identity residuals of a height profile.
    Geometry(GeometryArgs),
    /// Solve the shrinker equation on a box with Dirichlet data.
    Solve(SolveArgs),
    /// Evolve the rescaled graphical flow between barrier spheres.
    Flow(FlowArgs),
    /// Weighted stability inequality for one cutoff.
    Stability(StabilityArgs),
    /// Volume and height growth on balls.
    Volume(VolumeArgs),
    /// Run the full acceptance suite.
    VerifyAll,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Shoot(_) => "shoot",
            Command::Scan(_) => "scan",
            Command::Geometry(_) => "geometry",
            Command::Solve(_) => "solve",
            Command::Flow(_) => "flow",
            Command::Stability(_) => "stability",
            Command::Volume(_) => "volume",
            Command::VerifyAll => "verify-all",
        }
    }
}

#[derive(Debug, Args)]
pub struct ShootArgs {
    /// Height at the origin.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Slope at the origin.
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Integrate over |x| <= xmax (default 8).
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Slope beyond which the graph counts as blown up.
    #[arg(long)]
    pub slope_cap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub a_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub b_values: Option<Vec<f64>>,
    #[arg(long)]
    pub xmax: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    /// Half width L of the box [-L, L]^n.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Odd number of nodes per axis.
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ProfileArgs {
    /// plane, sphere_cap, paraboloid, sinusoid or tabulated.
    #[arg(long)]
    pub profile: Option<String>,
    /// Plane slope vector, or the linear part of the sinusoid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub slope: Option<Vec<f64>>,
    /// Paraboloid coefficient c in c|x|^2.
    #[arg(long, allow_negative_numbers = true)]
    pub coefficient: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub wavenumber: Option<f64>,
    /// Grid CSV for the tabulated profile.
    #[arg(long)]
    pub input: Option<String>,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Nodes excluded next to each face.
    #[arg(long)]
    pub margin: Option<usize>,
    /// Bound on the interior sup of the shrinker residual.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Bound on the weighted norms of the identity residuals.
    #[arg(long)]
    pub identity_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Boundary data profile.
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Residual sup-norm at which Newton stops.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub margin: Option<usize>,
    #[arg(long)]
    pub identity_tol: Option<f64>,
    /// Cutoff radii R_j for the flatness certificate.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    /// Scale R > 1 of the rescaling.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Barrier factor, rho^2 > 2n + 1.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Box half width in units of rho R.
    #[arg(long)]
    pub box_factor: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Initial height profile.
    #[command(flatten)]
    pub profile: ProfileArgs,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// bump or radial.
    #[arg(long)]
    pub cutoff: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long)]
    pub inner: Option<f64>,
    #[arg(long)]
    pub outer: Option<f64>,
    /// Radius of the radial cutoff.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Radii R_j for the cutoff energies.
    #[arg(long, value_delimiter = ',')]
    pub energy_radii: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let name = cli.command.name();
    let settings = match &cli.config {
        Some(path) => Settings::load(path, name)?,
        None => Settings::empty(),
    };
    let outcome = commands::dispatch(cli.command, settings)?;
    if cli.json {
        print!("{}", outcome.to_json());
    } else {
        print!("{}", outcome.table());
    }
    if let Some((kind, message)) = &outcome.error {
        eprintln!("error ({kind}): {message}");
        if !cli.json {
            print!("{}", outcome.to_json());
        }
    }
    if let Some(dir) = &cli.out {
        outcome.write(dir)?;
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
