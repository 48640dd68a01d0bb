mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use firobf::decoy::DsmKind;
use firobf::evaluation::{DEFAULT_CURVE_POINTS, DEFAULT_MAX_HD, DEFAULT_WRONG_KEYS};
use firobf::filter_design::{DESIGN_DENSITY, VERIFY_DENSITY};

/// Design, obfuscate, attack and evaluate key-locked FIR filters.
#[derive(Debug, Parser)]
#[command(name = "firobf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a filter by linear programming and quantize it.
    Design(DesignArgs),
    /// Hide a quantized filter's coefficients among decoys behind a keyed TMCM.
    Obfuscate(ObfuscateArgs),
    /// Recover constant sets from a netlist and try to resolve the coefficients.
    Attack(AttackArgs),
    /// Measure the filter response under the correct key and sampled wrong keys.
    Evaluate(EvaluateArgs),
    /// Run every benchmark filter through design, obfuscation and attack.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Serialize)]
struct DesignArgs {
    /// Filter specification (JSON).
    #[arg(long)]
    #[serde(skip)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    /// Grid points per band, per tap; verification uses ten times as many.
    #[arg(long, default_value_t = DESIGN_DENSITY)]
    grid_density: f64,
}

#[derive(Debug, Args, Serialize)]
struct ObfuscateArgs {
    /// Quantized filter written by `design`.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    #[serde(skip)]
    quant: Option<PathBuf>,
    /// Filter specification; the filter is designed first.
    #[arg(long)]
    #[serde(skip)]
    spec: Option<PathBuf>,
    /// Grid density used with `--spec`.
    #[arg(long, default_value_t = DESIGN_DENSITY)]
    grid_density: f64,
    /// Decoy selection method.
    #[arg(long, default_value = "hdrd")]
    dsm: DsmKind,
    /// Total key bits.
    #[arg(long)]
    p: usize,
    /// Filter input width in bits.
    #[arg(long, default_value_t = 32)]
    ibw: u32,
    /// Seed for decoy selection; placement uses the next seed.
    #[arg(long, default_value_t = 0)]
    seed_obfuscate: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AttackArgs {
    /// Gate netlist, as JSON or structural Verilog (by extension).
    #[arg(long)]
    #[serde(skip)]
    netlist: PathBuf,
    /// Seed for the random verification inputs.
    #[arg(long, default_value_t = 0)]
    seed_attack: u64,
    /// Hamming-distance threshold of the hub rule.
    #[arg(long, default_value_t = firobf::attack::classify::DEFAULT_TAU)]
    tau: u32,
    /// Decide bits with the SAT solver instead of enumeration.
    #[arg(long)]
    sat: bool,
    /// secret-assignment.json from `obfuscate`; enables the correctness count.
    #[arg(long)]
    #[serde(skip)]
    ground_truth: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    /// Filter specification the design must meet.
    #[arg(long)]
    #[serde(skip)]
    spec: PathBuf,
    /// filter.json from `obfuscate`.
    #[arg(long)]
    #[serde(skip)]
    filter: PathBuf,
    /// Correct key, as written to key.hex.
    #[arg(long)]
    #[serde(skip)]
    key: PathBuf,
    /// Simulate products through this gate netlist instead of the word model.
    #[arg(long)]
    #[serde(skip)]
    netlist: Option<PathBuf>,
    /// Number of wrong keys.
    #[arg(long, default_value_t = DEFAULT_WRONG_KEYS)]
    keys: usize,
    /// Largest Hamming distance of a wrong key from the correct one.
    #[arg(long, default_value_t = DEFAULT_MAX_HD)]
    max_hd: usize,
    #[arg(long, default_value_t = 0)]
    seed_eval: u64,
    /// Grid points per band, per tap, for the violation check.
    #[arg(long, default_value_t = VERIFY_DENSITY)]
    grid_density: f64,
    #[arg(long, default_value_t = DEFAULT_CURVE_POINTS)]
    curve_points: usize,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[arg(long, default_value_t = 32)]
    ibw: u32,
    #[arg(long, default_value_t = DESIGN_DENSITY)]
    grid_density: f64,
    #[arg(long, default_value_t = 0)]
    seed_obfuscate: u64,
    #[arg(long, default_value_t = 0)]
    seed_attack: u64,
    /// Also write bench.json here.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Design(a) => commands::design(a),
        Command::Obfuscate(a) => commands::obfuscate(a),
        Command::Attack(a) => commands::attack(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
