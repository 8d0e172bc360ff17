use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "exwkb", version, about = "Exact WKB solvers for 1D Schrodinger problems with rational potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format; `graph` defaults to svg, everything else to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads for energy sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Relative tolerance of the χ integrator.
    #[arg(long, global = true, env = "EXWKB_RTOL", default_value_t = 1e-10)]
    pub rtol: f64,

    /// Absolute tolerance of the χ integrator.
    #[arg(long, global = true, env = "EXWKB_ATOL", default_value_t = 1e-14)]
    pub atol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stokes graph at one energy.
    Graph(GraphArgs),
    /// Bound states in an energy window.
    Quantize(QuantizeArgs),
    /// Reflection and transmission amplitudes.
    Scatter(ScatterArgs),
    /// Resonance positions and widths.
    Resonance(ResonanceArgs),
    /// Radial Coulomb levels or partial-wave phase.
    Coulomb(CoulombArgs),
}

#[derive(Debug, Args)]
pub struct Problem {
    /// `double-hump`, `harmonic`, `coulomb:alpha=2,l=0`, or JSON
    /// `{"num": [..], "den": [..]}` with coefficients in ascending powers,
    /// each a number or an `[re, im]` pair.
    #[arg(long, default_value = "double-hump")]
    pub potential: String,

    #[arg(long)]
    pub hbar: f64,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[command(flatten)]
    pub problem: Problem,

    #[arg(long = "E", allow_hyphen_values = true)]
    pub energy: f64,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub problem: Problem,

    /// Energy window `lo,hi`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    pub window: (f64, f64),

    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,

    /// Compare with the Numerov oracle.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    #[command(flatten)]
    pub problem: Problem,

    /// One energy or a comma-separated sweep.
    #[arg(long = "E", allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub energies: Vec<f64>,

    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,

    /// Compare with the transmission oracle.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct ResonanceArgs {
    #[command(flatten)]
    pub problem: Problem,

    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    pub window: (f64, f64),

    #[arg(long, value_enum, default_value = "complex-root")]
    pub method: MethodArg,

    /// Compare with a Breit–Wigner fit of the oracle transmission.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct CoulombArgs {
    #[arg(long)]
    pub alpha: f64,

    #[arg(long, default_value_t = 0)]
    pub l: u32,

    #[arg(long)]
    pub hbar: f64,

    /// Number of levels, counted from the lowest.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,

    /// Positive energy: report the scattering phase instead of levels.
    #[arg(long = "E")]
    pub energy: Option<f64>,

    /// Compare with the analytic spectrum.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Jwkb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ComplexRoot,
    Perturbative,
    Jwkb,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("bad lower bound `{a}`: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("bad upper bound `{b}`: {e}"))?;
    if !(lo < hi) {
        return Err(format!("empty window [{lo}, {hi}]"));
    }
    Ok((lo, hi))
}
