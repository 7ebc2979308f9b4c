use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ec_eigen::compare::{compare_runs, write_comparison_csv};
use ec_eigen::config::ExperimentConfig;
use ec_eigen::experiment::{exit_code_for, load_matrix, run_experiment, ORACLE_MAX_N};
use ec_eigen::HarnessError;
use ec_eigen_core::coding;
use ec_eigen_core::io;
use ec_eigen_core::linalg;
use ec_eigen_core::redundancy::compute_redundancy;

/// Erasure-coded symmetric eigensolver benchmark harness.
#[derive(Parser)]
#[command(name = "ec-eigen", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run(RunArgs),
    /// Build a coding matrix and redundancy blocks for a matrix file.
    Encode(EncodeArgs),
    /// Compare persisted runs into a CSV table.
    Compare(CompareArgs),
    /// Print reference eigenvalues from a dense eigensolve.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    /// Symmetric matrix in Matrix Market format.
    #[arg(long)]
    matrix: PathBuf,
    /// Fault capacity (coding columns).
    #[arg(long)]
    k: usize,
    /// Nonzeros per row, or "auto".
    #[arg(long, default_value = "auto")]
    p: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for E.mtx, E.json, R.mtx, S.mtx, T.mtx.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories containing results.json.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Print the N smallest eigenvalues.
    #[arg(long, conflicts_with = "largest")]
    smallest: Option<usize>,
    /// Print the N largest eigenvalues.
    #[arg(long)]
    largest: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<i32, HarnessError> {
    let cfg = ExperimentConfig::from_file(&args.config)?;
    let artifacts = run_experiment(&cfg, args.output.as_deref())?;
    let r = &artifacts.results;
    println!(
        "status: {} | iterations: {} | wall: {:.3}s",
        r.status, r.iterations, r.wall_time_secs
    );
    if !r.eigenvalues.is_empty() {
        let shown: Vec<String> = r.eigenvalues.iter().map(|v| format!("{v:.6}")).collect();
        println!("eigenvalues: [{}]", shown.join(", "));
    }
    if let Some(err) = &r.error {
        eprintln!("run ended early: {err}");
    }
    Ok(exit_code_for(&artifacts.result.status))
}

fn cmd_encode(args: EncodeArgs) -> Result<i32, HarnessError> {
    let (matrix, warning) = io::read_symmetric_matrix_market(&args.matrix)?;
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    let n = matrix.n();
    if args.k == 0 || args.k > n {
        return Err(HarnessError::Config(format!("k must be in 1..={n}")));
    }
    let p = if args.p == "auto" {
        coding::default_p(args.k)
    } else {
        args.p
            .parse::<usize>()
            .map_err(|_| HarnessError::Config(format!("bad p value {:?}", args.p)))?
    };
    let start = Instant::now();
    let e = coding::build_staggered_coding_matrix(n, args.k, p, args.seed)?;
    let blocks = compute_redundancy(&matrix, &e)?;
    let encode_secs = start.elapsed().as_secs_f64();
    io::write_coding_matrix(&args.out, &e)?;
    io::write_blocks(&args.out, &blocks)?;
    println!(
        "encoded {n}x{n} matrix: k={}, p={p}, nnz(E)={}, {encode_secs:.3}s -> {}",
        args.k,
        e.nnz(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_compare(args: CompareArgs) -> Result<i32, HarnessError> {
    let cmp = compare_runs(&args.inputs)?;
    write_comparison_csv(&args.out, &cmp)?;
    println!(
        "compared {} runs (reference: {}) -> {}",
        cmp.rows.len(),
        cmp.rows[cmp.baseline_index].scenario,
        args.out.display()
    );
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<i32, HarnessError> {
    let spec = ec_eigen::config::MatrixSpec::File { path: args.matrix.clone() };
    let loaded = load_matrix(&spec)?;
    let n = loaded.matrix.n();
    if n > ORACLE_MAX_N {
        return Err(HarnessError::Config(format!(
            "matrix of size {n} exceeds the dense-oracle limit {ORACLE_MAX_N}"
        )));
    }
    let (vals, _) = linalg::sym_eig(&loaded.matrix.to_dense());
    let count = args.smallest.or(args.largest).unwrap_or(5).min(n);
    if args.largest.is_some() {
        for v in vals.iter().rev().take(count) {
            println!("{v:.12e}");
        }
    } else {
        for v in vals.iter().take(count) {
            println!("{v:.12e}");
        }
    }
    Ok(0)
}
