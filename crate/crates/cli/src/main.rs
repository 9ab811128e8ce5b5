use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use riga_cli::{run_experiment, CliError, ExperimentConfig, FileConfig, Overrides};

/// Solve IGA/rIGA Laplace eigenproblems on the unit hypercube and report
/// accuracy and cost across a sweep of degrees and partitioning levels.
#[derive(Debug, Parser)]
#[command(name = "riga", version)]
struct Args {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<u32>,
    /// Elements per direction.
    #[arg(long)]
    ne: Option<usize>,
    /// Degrees, e.g. `3`, `2..5` or `2,4`.
    #[arg(long)]
    degree: Option<String>,
    /// Partitioning levels, e.g. `0..3` or `all`.
    #[arg(long)]
    levels: Option<String>,
    /// Lowest eigenpairs to compute, or `all` for the IGA DOF count.
    #[arg(long)]
    nev: Option<String>,
    /// Compute all eigenpairs in `[A, B]`.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    interval: Option<Vec<f64>>,
    #[arg(long)]
    lanczos_m: Option<usize>,
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Emit only the symbolic FLOP sweep.
    #[arg(long)]
    no_solve: bool,
    /// Also write K and M in Matrix Market format.
    #[arg(long)]
    export_matrices: bool,
}

fn run(args: Args) -> Result<i32, CliError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        d: args.dim,
        ne: args.ne,
        degrees: args.degree,
        levels: args.levels,
        nev: args.nev,
        interval: args.interval.map(|v| [v[0], v[1]]),
        lanczos_m: args.lanczos_m,
        keep: args.keep,
        tol: args.tol,
        seed: args.seed,
        out: args.out,
        no_solve: args.no_solve,
        export_matrices: args.export_matrices,
    };
    let config = ExperimentConfig::resolve(file, flags)?;
    let bundle = run_experiment(&config)?;
    for f in &bundle.failures {
        eprintln!("p = {}, level = {}: {}", f.p, f.level, f.message);
    }
    println!("{}", bundle.manifest.display());
    Ok(bundle.exit_code())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
