use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hvi::run::EXIT_CONFIG;
use hvi::{execute, load_config, write_artifacts, RunConfig};

/// Solve −Δx − λ_k x ∈ ∂j(x), x = 0 on ∂Z, and certify two nontrivial solutions.
///
/// Exit codes: 0 two certified solutions, 1 configuration or IO error,
/// 2 hypotheses failed, 3 search incomplete, 4 certification failed.
#[derive(Parser, Debug)]
#[command(name = "hvi", version)]
struct Cli {
    /// Configuration file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Only build the basis and check the hypotheses on j.
    #[arg(long)]
    check_only: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    tol_inner: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tol_outer: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tol_residual: Option<f64>,
}

fn configure(cli: &Cli) -> Result<RunConfig, String> {
    let mut run = match &cli.config {
        Some(path) => load_config(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        run.solver.seed = seed;
    }
    if let Some(out) = &cli.out {
        run.out_dir = out.clone();
    }
    let s = &mut run.solver;
    for (slot, flag) in [
        (&mut s.tol_inner, cli.tol_inner),
        (&mut s.tol_outer, cli.tol_outer),
        (&mut s.tol_residual, cli.tol_residual),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    run.solver.validate().map_err(|e| e.to_string())?;
    Ok(run)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let run = match configure(&cli) {
        Ok(run) => run,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let outcome = execute(&run, cli.check_only);
    if let Err(e) = write_artifacts(&outcome, &run.out_dir) {
        eprintln!("error: cannot write to {}: {e}", run.out_dir.display());
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    match &outcome.error {
        None if cli.check_only => println!("hypotheses pass; report in {}", run.out_dir.display()),
        None => println!(
            "{} certified solutions; report in {}",
            outcome.solutions.len(),
            run.out_dir.display()
        ),
        Some(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(outcome.exit_code as u8)
}
