//! Solution serialization: JSON with the full state, iteration history,
//! and timing split; CSV with one row per bus (or per phase-node),
//! magnitude in p.u. and angle in degrees.

use crate::error::CliError;
use crate::schema::{canonical_json, FORMAT_VERSION};
use gridflow_core::three::model::NodeMap;
use gridflow_core::{
    CimSolution, PowerFlowSolution, SinglePhaseNetwork, ThreePhaseNetwork, Timings,
};
use serde::Serialize;

/// Context every solution file records alongside the state.
pub struct RunInfo<'a> {
    pub case_name: &'a str,
    pub solver: &'a str,
    pub thread_count: usize,
}

#[derive(Serialize)]
struct TimingsRecord {
    jacobian_build_s: f64,
    linear_solve_s: f64,
    mismatch_eval_s: f64,
    total_s: f64,
}

impl TimingsRecord {
    fn from_timings(t: &Timings) -> Self {
        TimingsRecord {
            jacobian_build_s: t.jacobian_build.as_secs_f64(),
            linear_solve_s: t.linear_solve.as_secs_f64(),
            mismatch_eval_s: t.mismatch_eval.as_secs_f64(),
            total_s: t.total().as_secs_f64(),
        }
    }
}

#[derive(Serialize)]
struct SingleRow {
    id: u64,
    vm: f64,
    angle_rad: f64,
    angle_deg: f64,
}

#[derive(Serialize)]
struct SingleSolutionRecord<'a> {
    format_version: &'a str,
    kind: &'a str,
    case: &'a str,
    solver: &'a str,
    thread_count: usize,
    converged: bool,
    iterations: usize,
    /// One `[p, q]` ∞-norm pair per evaluated state (initial + each step).
    mismatch_history: Vec<[f64; 2]>,
    timings: TimingsRecord,
    buses: Vec<SingleRow>,
}

/// Full single-phase solution as canonical JSON.
pub fn solution_json_single(
    info: &RunInfo,
    net: &SinglePhaseNetwork,
    sol: &PowerFlowSolution,
) -> Result<String, CliError> {
    let buses = net
        .buses
        .iter()
        .enumerate()
        .map(|(i, bus)| SingleRow {
            id: bus.id,
            vm: sol.state.magnitude[i],
            angle_rad: sol.state.angle[i],
            angle_deg: sol.state.angle[i].to_degrees(),
        })
        .collect();
    canonical_json(&SingleSolutionRecord {
        format_version: FORMAT_VERSION,
        kind: "single_phase_solution",
        case: info.case_name,
        solver: info.solver,
        thread_count: info.thread_count,
        converged: sol.converged,
        iterations: sol.iterations,
        mismatch_history: sol.mismatch_history.iter().map(|&(p, q)| [p, q]).collect(),
        timings: TimingsRecord::from_timings(&sol.timings),
        buses,
    })
}

/// Single-phase CSV: `id,vm,angle_deg` with fixed formatting
/// (vm to 6 decimals, angle to 3).
pub fn solution_csv_single(net: &SinglePhaseNetwork, sol: &PowerFlowSolution) -> String {
    let mut out = String::from("id,vm,angle_deg\n");
    for (i, bus) in net.buses.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.6},{:.3}\n",
            bus.id,
            sol.state.magnitude[i],
            sol.state.angle[i].to_degrees()
        ));
    }
    out
}

#[derive(Serialize)]
struct ThreeRow {
    id: u64,
    phase: String,
    re: f64,
    im: f64,
    vm: f64,
    angle_deg: f64,
}

#[derive(Serialize)]
struct ThreeSolutionRecord<'a> {
    format_version: &'a str,
    kind: &'a str,
    case: &'a str,
    solver: &'a str,
    thread_count: usize,
    converged: bool,
    iterations: usize,
    direct_fallbacks: usize,
    /// Current-mismatch ∞-norm per evaluated state (initial + each step).
    mismatch_history: Vec<f64>,
    timings: TimingsRecord,
    buses: Vec<ThreeRow>,
}

fn three_rows(net: &ThreePhaseNetwork, map: &NodeMap, sol: &CimSolution) -> Vec<ThreeRow> {
    (0..map.n_nodes())
        .map(|node| {
            let (bus_pos, phase) = map.node_info(node);
            let v = sol.state.v[node];
            ThreeRow {
                id: net.buses[bus_pos].id,
                phase: phase.to_string(),
                re: v.re,
                im: v.im,
                vm: v.norm(),
                angle_deg: v.arg().to_degrees(),
            }
        })
        .collect()
}

/// Full three-phase solution as canonical JSON.
pub fn solution_json_three(
    info: &RunInfo,
    net: &ThreePhaseNetwork,
    sol: &CimSolution,
) -> Result<String, CliError> {
    let map = NodeMap::new(net).map_err(CliError::from_model)?;
    canonical_json(&ThreeSolutionRecord {
        format_version: FORMAT_VERSION,
        kind: "three_phase_solution",
        case: info.case_name,
        solver: info.solver,
        thread_count: info.thread_count,
        converged: sol.converged,
        iterations: sol.iterations,
        direct_fallbacks: sol.direct_fallbacks,
        mismatch_history: sol.mismatch_history.clone(),
        timings: TimingsRecord::from_timings(&sol.timings),
        buses: three_rows(net, &map, sol),
    })
}

/// Three-phase CSV: `id,phase,vm,angle_deg`, one row per phase-node.
pub fn solution_csv_three(
    net: &ThreePhaseNetwork,
    sol: &CimSolution,
) -> Result<String, CliError> {
    let map = NodeMap::new(net).map_err(CliError::from_model)?;
    let mut out = String::from("id,phase,vm,angle_deg\n");
    for row in three_rows(net, &map, sol) {
        out.push_str(&format!(
            "{},{},{:.6},{:.3}\n",
            row.id, row.phase, row.vm, row.angle_deg
        ));
    }
    Ok(out)
}
