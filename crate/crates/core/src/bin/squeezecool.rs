use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use squeezecool::cli::{run_file, RunOptions};
use squeezecool::scenario::Product;

/// Sideband cooling of a squeezed mechanical resonator: steady states,
/// noise spectra, occupations and stability from scenario files.
#[derive(Parser)]
#[command(name = "squeezecool", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state displacement of every branch.
    Steady(Common),
    /// Phonon noise spectra S_n(ω).
    Spectrum(Common),
    /// Integrated occupations and effective temperatures.
    Occupation(Common),
    /// Mechanical quadrature error ellipses.
    Ellipse(Common),
    /// Drift-matrix stability report of every branch.
    Check(Common),
    /// Truncated master-equation cross-check.
    Oracle(Common),
    /// Every product listed under `outputs` in the scenario.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for the CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Steady-state branch index (default: lowest-|x_s| stable branch).
    #[arg(long)]
    branch: Option<usize>,
    /// Worker threads for sweep points (0 = all cores).
    #[arg(long, env = "SQUEEZECOOL_JOBS")]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, product) = match cli.command {
        Command::Steady(c) => (c, Some(Product::Steady)),
        Command::Spectrum(c) => (c, Some(Product::Spectrum)),
        Command::Occupation(c) => (c, Some(Product::Occupation)),
        Command::Ellipse(c) => (c, Some(Product::Ellipse)),
        Command::Check(c) => (c, Some(Product::Stability)),
        Command::Oracle(c) => (c, Some(Product::Oracle)),
        Command::Sweep(c) => (c, None),
    };
    let opts = RunOptions {
        out_dir: common.out,
        products: product.map(|p| vec![p]),
        branch: common.branch,
        jobs: common.jobs,
    };
    let report = run_file(&common.scenario, &opts);
    for m in &report.messages {
        eprintln!("{m}");
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    ExitCode::from(report.exit_code as u8)
}
