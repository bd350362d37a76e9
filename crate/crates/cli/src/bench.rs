//! Benchmark harness: repeated solves per thread count, reporting median
//! times with the linear-solve ("solving") component separated from
//! Jacobian assembly and mismatch evaluation ("other").

use crate::error::CliError;
use crate::schema::CaseFile;
use gridflow_core::{solve_cim, solve_nr, CimOptions, NewtonOptions};
use gridflow_sparse::LinearSolverConfig;
use std::time::Instant;

/// One benchmark result line: medians over `repeats` fresh solves.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub case: String,
    pub buses: usize,
    pub solver: String,
    pub threads: usize,
    pub repeats: usize,
    pub iterations: usize,
    pub converged: bool,
    pub solve_seconds: f64,
    pub other_seconds: f64,
    pub total_seconds: f64,
}

pub const BENCH_CSV_HEADER: &str =
    "case,buses,solver,threads,repeats,iterations,converged,solve_seconds,other_seconds,total_seconds";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            self.case,
            self.buses,
            self.solver,
            self.threads,
            self.repeats,
            self.iterations,
            self.converged,
            self.solve_seconds,
            self.other_seconds,
            self.total_seconds
        )
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("times are finite"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

struct Sample {
    iterations: usize,
    converged: bool,
    solve_s: f64,
    other_s: f64,
    total_s: f64,
}

fn one_solve(
    case: &CaseFile,
    linear: &LinearSolverConfig,
    threads: usize,
) -> Result<Sample, CliError> {
    match case {
        CaseFile::SinglePhase { network, .. } => {
            let opts = NewtonOptions {
                linear: *linear,
                ..NewtonOptions::default()
            };
            let started = Instant::now();
            let sol = solve_nr(network, &opts, threads).map_err(CliError::from_model)?;
            let total_s = started.elapsed().as_secs_f64();
            Ok(Sample {
                iterations: sol.iterations,
                converged: sol.converged,
                solve_s: sol.timings.linear_solve.as_secs_f64(),
                other_s: sol.timings.other().as_secs_f64(),
                total_s,
            })
        }
        CaseFile::ThreePhase { network, .. } => {
            let opts = CimOptions {
                linear: *linear,
                ..CimOptions::default()
            };
            let started = Instant::now();
            let sol = solve_cim(network, &opts, threads).map_err(CliError::from_model)?;
            let total_s = started.elapsed().as_secs_f64();
            Ok(Sample {
                iterations: sol.iterations,
                converged: sol.converged,
                solve_s: sol.timings.linear_solve.as_secs_f64(),
                other_s: sol.timings.other().as_secs_f64(),
                total_s,
            })
        }
    }
}

/// Runs `repeats` fresh solves for every thread count and reduces each
/// group to one record. Iteration counts and convergence flags must not
/// vary across repeats (they are deterministic for a fixed thread count);
/// a variation is reported as an internal error.
pub fn run_bench(
    case: &CaseFile,
    solver_name: &str,
    linear: &LinearSolverConfig,
    thread_counts: &[usize],
    repeats: usize,
) -> Result<Vec<BenchRecord>, CliError> {
    if repeats == 0 {
        return Err(CliError::Input("--repeat must be at least 1".into()));
    }
    if thread_counts.is_empty() {
        return Err(CliError::Input("--threads needs at least one count".into()));
    }
    let mut records = Vec::with_capacity(thread_counts.len());
    for &threads in thread_counts {
        if threads == 0 {
            return Err(CliError::Input("thread counts must be at least 1".into()));
        }
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            samples.push(one_solve(case, linear, threads)?);
        }
        let first = &samples[0];
        if samples
            .iter()
            .any(|s| s.iterations != first.iterations || s.converged != first.converged)
        {
            return Err(CliError::Internal(format!(
                "nondeterministic solve: iteration counts varied across repeats at {threads} threads"
            )));
        }
        records.push(BenchRecord {
            case: case.name().to_string(),
            buses: case.n_buses(),
            solver: solver_name.to_string(),
            threads,
            repeats,
            iterations: first.iterations,
            converged: first.converged,
            solve_seconds: median(samples.iter().map(|s| s.solve_s).collect()),
            other_seconds: median(samples.iter().map(|s| s.other_s).collect()),
            total_seconds: median(samples.iter().map(|s| s.total_s).collect()),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::CaseMeta;
    use gridflow_core::fixtures;

    #[test]
    fn medians_are_computed_over_sorted_samples() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![7.0]), 7.0);
    }

    #[test]
    fn bench_produces_one_deterministic_record_per_thread_count() {
        let case = CaseFile::SinglePhase {
            meta: CaseMeta::named("ieee30"),
            network: fixtures::ieee30(),
        };
        let records = run_bench(&case, "direct", &LinearSolverConfig::default(), &[1, 1], 3).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].iterations, records[1].iterations);
        assert!(records[0].converged);
        assert!(records[0].solve_seconds >= 0.0);
        assert!(records[0].total_seconds >= records[0].solve_seconds);
        let row = records[0].csv_row();
        assert!(row.starts_with("ieee30,30,direct,1,3,"));
        assert_eq!(row.split(',').count(), BENCH_CSV_HEADER.split(',').count());
    }

    #[test]
    fn zero_repeats_and_empty_thread_lists_are_rejected() {
        let case = CaseFile::SinglePhase {
            meta: CaseMeta::named("twobus"),
            network: fixtures::two_bus(),
        };
        assert!(run_bench(&case, "direct", &LinearSolverConfig::default(), &[1], 0).is_err());
        assert!(run_bench(&case, "direct", &LinearSolverConfig::default(), &[], 2).is_err());
    }
}
