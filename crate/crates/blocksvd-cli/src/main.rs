use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blocksvd::driver::{compare, run_baseline, run_decompose, RunConfig};
use blocksvd::error::Error;
use blocksvd::memory::MemoryBudget;
use blocksvd::partition::{choose_cut, ensure_portrait, partition_report, sort_by_norms};
use blocksvd::report;
use blocksvd::sparse::{parse_triplets, SparseTriplets};
use blocksvd::synth::gen_synthetic;

#[derive(Parser)]
#[command(
    name = "blocksvd",
    version,
    about = "Blockwise SVD of sparse matrices: sort, cut, annihilate, iterate, decompose"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blockwise decomposition of the dominant block
    Decompose(DecomposeArgs),
    /// Full economy SVD by the Gram route (the oracle)
    Baseline(BaselineArgs),
    /// Sort, cut and print the block statistics table
    Stats(StatsArgs),
    /// Compare the singular values of two result directories
    Compare(CompareArgs),
    /// Generate a synthetic Zipfian count matrix as triplet CSV
    GenSynthetic(GenArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Triplet CSV file (`row,col,value`, `#` comments, optional `%%dims`)
    #[arg(long)]
    input: PathBuf,
    /// Treat indices in the input as one-based
    #[arg(long)]
    one_based: bool,
    /// Cap on live dense storage, in bytes
    #[arg(long, default_value_t = 1 << 30)]
    budget_bytes: usize,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Squared-norm fraction the first column block must hold
    #[arg(long, default_value_t = 2.0 / 3.0)]
    fraction: f64,
    /// Convergence: nondiagonality/trace11 falls to this times its start
    #[arg(long, default_value_t = 1e-4)]
    ratio_tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Annihilation route (see `--route help` for names)
    #[arg(long, default_value = "gsvd")]
    route: String,
    /// Also run the complete blockwise decomposition for the full spectrum
    #[arg(long)]
    full: bool,
    #[arg(long, default_value = "blocksvd-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "blocksvd-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    fraction: f64,
    /// Also write partition.tsv into this directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Result directory A (its singular_values.txt is compared)
    dir_a: PathBuf,
    /// Result directory B (the reference)
    dir_b: PathBuf,
    /// How many leading values to compare
    #[arg(long)]
    rank: usize,
}

#[derive(Args)]
struct GenArgs {
    rows: usize,
    cols: usize,
    /// Fraction of nonzero cells
    #[arg(long, default_value_t = 0.005)]
    density: f64,
    /// Zipf exponent of the column popularity
    #[arg(long, default_value_t = 1.1)]
    zipf: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Convergence { .. } => ExitCode::from(2),
        Error::MemoryBudget { .. } => ExitCode::from(4),
        Error::Parse { .. }
        | Error::Io(_)
        | Error::Dimension(_)
        | Error::Usage(_)
        | Error::DegenerateCut { .. } => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

fn read_matrix(args: &InputArgs) -> Result<SparseTriplets, Error> {
    let text = fs::read_to_string(&args.input)?;
    parse_triplets(&text, args.one_based)
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Decompose(args) => {
            let matrix = read_matrix(&args.input)?;
            let cfg = RunConfig {
                one_based: args.input.one_based,
                fraction: args.fraction,
                ratio_tol: args.ratio_tol,
                max_iters: args.max_iters,
                budget: MemoryBudget::new(args.input.budget_bytes),
                full: args.full,
                route: args.route,
                ..RunConfig::default()
            };
            let result = run_decompose(&matrix, &cfg)?;
            result.write_to(&args.out_dir, &cfg)?;
            for notice in &result.notices {
                eprintln!("notice: {notice}");
            }
            println!(
                "decomposed {}x{} matrix: {} singular values, {} iterations, outputs in {}",
                matrix.n_rows(),
                matrix.n_cols(),
                result.singular_values.len(),
                result
                    .iteration_log
                    .records
                    .last()
                    .map_or(0, |r| r.iteration),
                args.out_dir.display()
            );
            if result.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("warning: trace iteration did not reach the requested ratio; partial result written");
                Ok(ExitCode::from(2))
            }
        }
        Command::Baseline(args) => {
            let matrix = read_matrix(&args.input)?;
            let cfg = RunConfig {
                one_based: args.input.one_based,
                budget: MemoryBudget::new(args.input.budget_bytes),
                ..RunConfig::default()
            };
            let result = run_baseline(&matrix, &cfg)?;
            result.write_to(&args.out_dir, &cfg)?;
            println!(
                "baseline economy SVD: {} singular values, outputs in {}",
                result.singular_values.len(),
                args.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats(args) => {
            let matrix = read_matrix(&args.input)?;
            let (portrait, transposed) = ensure_portrait(&matrix);
            let (row_p, col_p) = sort_by_norms(&portrait);
            let sorted = portrait.permute(&row_p, &col_p)?;
            let partition = choose_cut(&sorted, args.fraction)?;
            let report = partition_report(&sorted, &partition)?;
            if transposed {
                println!("# input transposed to portrait orientation");
            }
            print!("{}", report.to_tsv());
            if let Some(dir) = args.out_dir {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("partition.tsv"), report.to_tsv())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(args) => {
            let a = report::read_singular_values(&args.dir_a.join("singular_values.txt"))?;
            let b = report::read_singular_values(&args.dir_b.join("singular_values.txt"))?;
            let rep = compare(&a, &b, args.rank)?;
            print!("{}", rep.to_tsv());
            println!(
                "# max abs diff {} | max rel diff {}",
                report::fmt_g17(rep.max_abs()),
                report::fmt_g17(rep.max_rel())
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::GenSynthetic(args) => {
            let matrix = gen_synthetic(args.rows, args.cols, args.density, args.zipf, args.seed)?;
            let text = report::triplets_csv(&matrix);
            match args.out {
                Some(path) => {
                    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                        fs::create_dir_all(parent)?;
                    }
                    fs::write(&path, text)?;
                    println!(
                        "wrote {}x{} matrix with {} nonzeros to {}",
                        args.rows,
                        args.cols,
                        matrix.nnz(),
                        path.display()
                    );
                }
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
