//! The `gridflow` command line: solve power-flow cases, synthesize larger
//! cases by replication, and benchmark solver scaling.

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use gridflow_cli::bench::{run_bench, BENCH_CSV_HEADER};
use gridflow_cli::error::CliError;
use gridflow_cli::schema::{parse_case, write_case, CaseFile, CaseMeta, SynthRecord};
use gridflow_cli::solution_io::{
    solution_csv_single, solution_csv_three, solution_json_single, solution_json_three, RunInfo,
};
use gridflow_core::{
    replicate_feeder, replicate_transmission, solve_cim, solve_nr, CimOptions, NewtonOptions,
    SynthSpec,
};
use gridflow_sparse::{LinearSolverConfig, SolverKind};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Environment variable supplying the default `--threads` value.
const THREADS_ENV: &str = "GRIDFLOW_THREADS";

#[derive(Parser)]
#[command(
    name = "gridflow",
    version,
    about = "Steady-state power flow for transmission and distribution networks",
    propagate_version = true
)]
struct Cli {
    /// Report failures as one-line JSON on stderr.
    #[arg(long, global = true)]
    error_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a case and write the solution to stdout.
    Solve(SolveArgs),
    /// Grow a larger case from a base case by seeded replication.
    Synth(SynthArgs),
    /// Time repeated solves across thread counts; CSV on stdout.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    /// Sparse LU factorization at every Newton step.
    Direct,
    /// Preconditioned BiCGSTAB at every Newton step.
    Krylov,
}

impl SolverChoice {
    fn name(self) -> &'static str {
        match self {
            SolverChoice::Direct => "direct",
            SolverChoice::Krylov => "krylov",
        }
    }

    fn linear_config(self) -> LinearSolverConfig {
        LinearSolverConfig {
            kind: match self {
                SolverChoice::Direct => SolverKind::Direct,
                SolverChoice::Krylov => SolverKind::Krylov,
            },
            ..LinearSolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    /// Case file (JSON).
    #[arg(long)]
    case: PathBuf,
    /// Linear solver used inside Newton iterations.
    #[arg(long, value_enum, default_value_t = SolverChoice::Direct)]
    solver: SolverChoice,
    /// Solver worker threads (default: $GRIDFLOW_THREADS, else 1).
    #[arg(long)]
    threads: Option<usize>,
    /// Convergence tolerance in per-unit.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Newton iteration cap (default: 30 single-phase, 50 three-phase).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output format written to stdout.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    out: OutputFormat,
}

#[derive(Args)]
#[command(group(
    ArgGroup::new("mode").required(true).args(["blocks", "replicas"])
))]
struct SynthArgs {
    /// Base case file (JSON).
    #[arg(long)]
    base: PathBuf,
    /// Transmission cases: replicate into this many linked blocks.
    #[arg(long)]
    blocks: Option<usize>,
    /// Feeder cases: replicate this many times behind the shared source.
    #[arg(long)]
    replicas: Option<usize>,
    /// Inter-block branches per adjacent block pair (with --blocks).
    #[arg(long, default_value_t = 2)]
    links: usize,
    /// Seed for link sampling (with --blocks).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also link the last block back to the first (with --blocks).
    #[arg(long)]
    ring: bool,
    /// Output case file path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Case file (JSON).
    #[arg(long)]
    case: PathBuf,
    /// Linear solver to benchmark.
    #[arg(long, value_enum, default_value_t = SolverChoice::Krylov)]
    solver: SolverChoice,
    /// Comma-separated solver thread counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    threads: Vec<usize>,
    /// Fresh solves per thread count; medians are reported.
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    /// Output format written to stdout.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    out: OutputFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if cli.error_json {
                eprintln!("{}", err.to_json());
            } else {
                eprintln!("gridflow: {err}");
            }
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve(args) => cmd_solve(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn read_case(path: &Path) -> Result<CaseFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read case file {}: {e}", path.display())))?;
    parse_case(&text)
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let threads = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(raw) => raw.parse::<usize>().map_err(|_| {
                CliError::Input(format!(
                    "{THREADS_ENV} must be a positive integer, got \"{raw}\""
                ))
            })?,
            Err(_) => 1,
        },
    };
    if threads == 0 {
        return Err(CliError::Input("thread count must be at least 1".into()));
    }
    Ok(threads)
}

fn iteration_count(n: usize) -> String {
    if n == 1 {
        "1 iteration".to_string()
    } else {
        format!("{n} iterations")
    }
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    if !(args.tol.is_finite() && args.tol > 0.0) {
        return Err(CliError::Input(format!(
            "--tol must be positive, got {}",
            args.tol
        )));
    }
    let case = read_case(&args.case)?;
    let threads = resolve_threads(args.threads)?;
    let linear = args.solver.linear_config();
    let info = RunInfo {
        case_name: case.name(),
        solver: args.solver.name(),
        thread_count: threads,
    };
    match &case {
        CaseFile::SinglePhase { network, .. } => {
            let opts = NewtonOptions {
                tol_angle: args.tol,
                tol_vm: args.tol,
                max_iter: args.max_iter.unwrap_or(NewtonOptions::default().max_iter),
                linear,
                ..NewtonOptions::default()
            };
            let sol = solve_nr(network, &opts, threads).map_err(CliError::from_model)?;
            let text = match args.out {
                OutputFormat::Json => solution_json_single(&info, network, &sol)?,
                OutputFormat::Csv => solution_csv_single(network, &sol),
            };
            print!("{text}");
            if sol.converged {
                Ok(())
            } else {
                let (p, q) = *sol
                    .mismatch_history
                    .last()
                    .expect("history always has the initial entry");
                Err(CliError::NoConvergence(format!(
                    "did not converge after {} (mismatch P {:.3e}, Q {:.3e} p.u.); \
                     the solution above records the final state",
                    iteration_count(sol.iterations),
                    p,
                    q
                )))
            }
        }
        CaseFile::ThreePhase { network, .. } => {
            let opts = CimOptions {
                tol_v: args.tol,
                max_iter: args.max_iter.unwrap_or(CimOptions::default().max_iter),
                linear,
                ..CimOptions::default()
            };
            let sol = solve_cim(network, &opts, threads).map_err(CliError::from_model)?;
            let text = match args.out {
                OutputFormat::Json => solution_json_three(&info, network, &sol)?,
                OutputFormat::Csv => solution_csv_three(network, &sol)?,
            };
            print!("{text}");
            if sol.converged {
                Ok(())
            } else {
                let last = *sol
                    .mismatch_history
                    .last()
                    .expect("history always has the initial entry");
                Err(CliError::NoConvergence(format!(
                    "did not converge after {} (current mismatch {:.3e} p.u.); \
                     the solution above records the final state",
                    iteration_count(sol.iterations),
                    last
                )))
            }
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let base = read_case(&args.base)?;
    let (case, count) = match (&base, args.blocks, args.replicas) {
        (CaseFile::SinglePhase { meta, network }, Some(blocks), None) => {
            let spec = SynthSpec {
                count: blocks,
                links_per_adjacent_pair: args.links,
                seed: args.seed,
                ring: args.ring,
            };
            let grown = replicate_transmission(network, &spec).map_err(CliError::from_model)?;
            let synth = SynthRecord {
                base: meta.name.clone(),
                mode: "blocks".into(),
                count: blocks,
                links_per_adjacent_pair: Some(args.links),
                seed: Some(args.seed),
                ring: args.ring,
            };
            (
                CaseFile::SinglePhase {
                    meta: synth_meta(meta, blocks, synth),
                    network: grown,
                },
                blocks,
            )
        }
        (CaseFile::ThreePhase { meta, network }, None, Some(replicas)) => {
            let spec = SynthSpec::replicas(replicas);
            let grown = replicate_feeder(network, &spec).map_err(CliError::from_model)?;
            let synth = SynthRecord {
                base: meta.name.clone(),
                mode: "replicas".into(),
                count: replicas,
                links_per_adjacent_pair: None,
                seed: None,
                ring: false,
            };
            (
                CaseFile::ThreePhase {
                    meta: synth_meta(meta, replicas, synth),
                    network: grown,
                },
                replicas,
            )
        }
        (CaseFile::SinglePhase { .. }, None, Some(_)) => {
            return Err(CliError::Input(
                "--replicas applies to three_phase feeders; use --blocks for single_phase cases"
                    .into(),
            ))
        }
        (CaseFile::ThreePhase { .. }, Some(_), None) => {
            return Err(CliError::Input(
                "--blocks applies to single_phase cases; use --replicas for three_phase feeders"
                    .into(),
            ))
        }
        // clap's arg group guarantees exactly one of --blocks/--replicas.
        _ => unreachable!("argument group enforces one mode"),
    };
    let text = write_case(&case)?;
    std::fs::write(&args.out, text).map_err(|e| {
        CliError::Internal(format!("cannot write {}: {e}", args.out.display()))
    })?;
    eprintln!(
        "wrote {} ({}, {} buses, x{count} from {})",
        args.out.display(),
        case.kind_name(),
        case.n_buses(),
        base.name()
    );
    Ok(())
}

fn synth_meta(base: &CaseMeta, count: usize, synth: SynthRecord) -> CaseMeta {
    CaseMeta {
        name: format!("{}-x{count}", base.name),
        source: Some(format!("synthesized from case `{}`", base.name)),
        synth: Some(synth),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let case = read_case(&args.case)?;
    let records = run_bench(
        &case,
        args.solver.name(),
        &args.solver.linear_config(),
        &args.threads,
        args.repeat,
    )?;
    match args.out {
        OutputFormat::Csv => {
            println!("{BENCH_CSV_HEADER}");
            for record in &records {
                println!("{}", record.csv_row());
            }
        }
        OutputFormat::Json => {
            return Err(CliError::Input(
                "bench only writes csv; use --out csv".into(),
            ))
        }
    }
    Ok(())
}
