//! Polar Newton-Raphson power flow for single-phase networks.
//!
//! The solver iterates: evaluate active/reactive power mismatches, assemble
//! the polar Jacobian, solve the correction system, and add the corrections
//! to the angles and magnitudes. Iteration stops when the largest angle and
//! magnitude corrections drop below their tolerances. The outer loop is
//! sequential; parallelism lives inside the linear solver.

use std::time::Instant;

use num_complex::Complex64;

use gridflow_sparse::{solve_linear, LinearSolverConfig, SparseMatrix};

use crate::error::ModelError;
use crate::single::model::{build_ybus, BusKind, SinglePhaseNetwork, VoltageState};
use crate::solution::Timings;

/// Stopping and solver options for [`solve_nr`].
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Largest allowed angle correction at convergence (radians).
    pub tol_angle: f64,
    /// Largest allowed magnitude correction at convergence (per-unit).
    pub tol_vm: f64,
    /// Iteration cap; exceeding it yields a non-converged result, not an
    /// error.
    pub max_iter: usize,
    /// Inner linear-solver configuration.
    pub linear: LinearSolverConfig,
    /// Start from the flat profile (PQ magnitudes 1.0, angles 0, slack/PV
    /// magnitudes at setpoints). Disabling it requires an explicit initial
    /// state via [`solve_nr_from`].
    pub flat_start: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol_angle: 1e-8,
            tol_vm: 1e-8,
            max_iter: 30,
            linear: LinearSolverConfig::default(),
            flat_start: true,
        }
    }
}

/// Power mismatches with their bus bookkeeping.
///
/// `dp` holds the active-power rows (every PV and PQ bus, position
/// ascending); `dq` the reactive rows (PQ buses only). `dp_bus[k]` /
/// `dq_bus[k]` give the bus position behind row `k`.
#[derive(Debug, Clone)]
pub struct MismatchVector {
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
    pub dp_bus: Vec<usize>,
    pub dq_bus: Vec<usize>,
}

impl MismatchVector {
    /// Infinity norms of the active and reactive parts.
    pub fn inf_norms(&self) -> (f64, f64) {
        let dp = self.dp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dq = self.dq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (dp, dq)
    }

    /// Largest mismatch overall.
    pub fn max_norm(&self) -> f64 {
        let (dp, dq) = self.inf_norms();
        dp.max(dq)
    }

    /// Rows stacked `[dp..., dq...]` as the Newton right-hand side.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dp.len() + self.dq.len());
        v.extend_from_slice(&self.dp);
        v.extend_from_slice(&self.dq);
        v
    }
}

/// Result of a Newton power-flow run.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub state: VoltageState,
    /// Completed Newton updates.
    pub iterations: usize,
    /// `(‖ΔP‖_∞, ‖ΔQ‖_∞)` at the start of each iteration, plus one final
    /// entry evaluated at the exit state; length `iterations + 1`.
    pub mismatch_history: Vec<(f64, f64)>,
    pub converged: bool,
    pub timings: Timings,
}

/// Bookkeeping between bus positions and unknown/equation indices.
///
/// Unknowns are ordered: all angle corrections first (non-slack buses,
/// position ascending), then all magnitude corrections (PQ buses,
/// position ascending). Equation rows mirror this: active-power rows
/// first, then reactive rows.
#[derive(Debug, Clone)]
pub struct EquationMap {
    /// Bus positions owning an angle unknown / active-power row.
    pub angle_buses: Vec<usize>,
    /// Bus positions owning a magnitude unknown / reactive-power row.
    pub vm_buses: Vec<usize>,
    angle_of: Vec<usize>,
    vm_of: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl EquationMap {
    pub fn new(net: &SinglePhaseNetwork) -> Self {
        let n = net.buses.len();
        let mut angle_buses = Vec::new();
        let mut vm_buses = Vec::new();
        let mut angle_of = vec![NONE; n];
        let mut vm_of = vec![NONE; n];
        for (pos, bus) in net.buses.iter().enumerate() {
            match bus.kind {
                BusKind::Slack => {}
                BusKind::Pv => {
                    angle_of[pos] = angle_buses.len();
                    angle_buses.push(pos);
                }
                BusKind::Pq => {
                    angle_of[pos] = angle_buses.len();
                    angle_buses.push(pos);
                    vm_of[pos] = vm_buses.len();
                    vm_buses.push(pos);
                }
            }
        }
        EquationMap {
            angle_buses,
            vm_buses,
            angle_of,
            vm_of,
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.angle_buses.len() + self.vm_buses.len()
    }

    /// Column/row of bus `pos`'s angle unknown, if any.
    pub fn angle_index(&self, pos: usize) -> Option<usize> {
        match self.angle_of[pos] {
            NONE => None,
            k => Some(k),
        }
    }

    /// Column/row of bus `pos`'s magnitude unknown (offset into the second
    /// block), if any.
    pub fn vm_index(&self, pos: usize) -> Option<usize> {
        match self.vm_of[pos] {
            NONE => None,
            k => Some(self.angle_buses.len() + k),
        }
    }
}

/// Net complex power injected at every bus for the given state:
/// `S_i = V_i · conj((Y V)_i)`; returns `(P, Q)` per bus.
pub fn calc_pq(
    ybus: &SparseMatrix<Complex64>,
    state: &VoltageState,
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let v = state.phasors();
    let iv = ybus.spmv(&v, 1)?;
    let mut p = Vec::with_capacity(v.len());
    let mut q = Vec::with_capacity(v.len());
    for (vi, ii) in v.iter().zip(iv.iter()) {
        let s = vi * ii.conj();
        p.push(s.re);
        q.push(s.im);
    }
    Ok((p, q))
}

/// Specified-minus-calculated power at every non-slack bus.
///
/// Active rows cover PV and PQ buses (`(p_gen − p_load) − P_calc`);
/// reactive rows cover PQ buses (`(−q_load) − Q_calc`).
pub fn power_mismatch(
    net: &SinglePhaseNetwork,
    ybus: &SparseMatrix<Complex64>,
    state: &VoltageState,
) -> Result<MismatchVector, ModelError> {
    let eqs = EquationMap::new(net);
    let (p_calc, q_calc) = calc_pq(ybus, state)?;
    let dp = eqs
        .angle_buses
        .iter()
        .map(|&pos| {
            let bus = &net.buses[pos];
            (bus.p_gen - bus.p_load) - p_calc[pos]
        })
        .collect();
    let dq = eqs
        .vm_buses
        .iter()
        .map(|&pos| {
            let bus = &net.buses[pos];
            (-bus.q_load) - q_calc[pos]
        })
        .collect();
    Ok(MismatchVector {
        dp,
        dq,
        dp_bus: eqs.angle_buses,
        dq_bus: eqs.vm_buses,
    })
}

/// Assembles the polar Newton Jacobian at `state`.
///
/// Block layout (rows × columns): active rows over `[∂P/∂δ | ∂P/∂|V|]`,
/// reactive rows over `[∂Q/∂δ | ∂Q/∂|V|]`, with slack buses contributing
/// nothing and PV buses contributing only their active row and angle
/// column.
pub fn build_jacobian(
    net: &SinglePhaseNetwork,
    ybus: &SparseMatrix<Complex64>,
    state: &VoltageState,
) -> Result<SparseMatrix<f64>, ModelError> {
    let eqs = EquationMap::new(net);
    build_jacobian_with(net, ybus, state, &eqs)
}

fn build_jacobian_with(
    net: &SinglePhaseNetwork,
    ybus: &SparseMatrix<Complex64>,
    state: &VoltageState,
    eqs: &EquationMap,
) -> Result<SparseMatrix<f64>, ModelError> {
    let n = net.buses.len();
    if state.len() != n {
        return Err(ModelError::StateSize {
            got: state.len(),
            want: n,
        });
    }
    let (p_calc, q_calc) = calc_pq(ybus, state)?;
    let dim = eqs.n_unknowns();
    // Roughly four real entries per admittance entry.
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * ybus.nnz());

    for i in 0..n {
        let dp_row = eqs.angle_index(i);
        let dq_row = eqs.vm_index(i);
        if dp_row.is_none() && dq_row.is_none() {
            continue;
        }
        let vi = state.magnitude[i];
        let (cols, vals) = ybus.row(i);
        for (&j, &y) in cols.iter().zip(vals.iter()) {
            let (g, b) = (y.re, y.im);
            let d_angle_col = eqs.angle_index(j);
            let d_vm_col = eqs.vm_index(j);
            if j == i {
                if let Some(r) = dp_row {
                    if let Some(c) = d_angle_col {
                        triplets.push((r, c, -q_calc[i] - b * vi * vi));
                    }
                    if let Some(c) = d_vm_col {
                        triplets.push((r, c, p_calc[i] / vi + g * vi));
                    }
                }
                if let Some(r) = dq_row {
                    if let Some(c) = d_angle_col {
                        triplets.push((r, c, p_calc[i] - g * vi * vi));
                    }
                    if let Some(c) = d_vm_col {
                        triplets.push((r, c, q_calc[i] / vi - b * vi));
                    }
                }
            } else {
                let vj = state.magnitude[j];
                let theta = state.angle[i] - state.angle[j];
                let (sin_t, cos_t) = theta.sin_cos();
                // In-phase and quadrature admittance projections.
                let gc_bs = g * cos_t + b * sin_t;
                let gs_bc = g * sin_t - b * cos_t;
                if let Some(r) = dp_row {
                    if let Some(c) = d_angle_col {
                        triplets.push((r, c, vi * vj * gs_bc));
                    }
                    if let Some(c) = d_vm_col {
                        triplets.push((r, c, vi * gc_bs));
                    }
                }
                if let Some(r) = dq_row {
                    if let Some(c) = d_angle_col {
                        triplets.push((r, c, -vi * vj * gc_bs));
                    }
                    if let Some(c) = d_vm_col {
                        triplets.push((r, c, vi * gs_bc));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(dim, dim, &triplets)?)
}

/// Runs Newton-Raphson from the flat start (or per `opts.flat_start`).
pub fn solve_nr(
    net: &SinglePhaseNetwork,
    opts: &NewtonOptions,
    thread_count: usize,
) -> Result<PowerFlowSolution, ModelError> {
    if !opts.flat_start {
        return Err(ModelError::InitialStateRequired);
    }
    solve_nr_from(net, &net.flat_start(), opts, thread_count)
}

/// Runs Newton-Raphson from an explicit initial state.
pub fn solve_nr_from(
    net: &SinglePhaseNetwork,
    initial: &VoltageState,
    opts: &NewtonOptions,
    thread_count: usize,
) -> Result<PowerFlowSolution, ModelError> {
    let n = net.buses.len();
    if initial.len() != n || initial.angle.len() != n {
        return Err(ModelError::StateSize {
            got: initial.len(),
            want: n,
        });
    }
    let ybus = build_ybus(net)?;
    let eqs = EquationMap::new(net);
    let mut state = initial.clone();
    let mut timings = Timings::default();
    let mut history = Vec::new();

    let t0 = Instant::now();
    let mut mismatch = power_mismatch(net, &ybus, &state)?;
    timings.mismatch_eval += t0.elapsed();
    history.push(mismatch.inf_norms());

    if eqs.n_unknowns() == 0 {
        return Ok(PowerFlowSolution {
            state,
            iterations: 0,
            mismatch_history: history,
            converged: true,
            timings,
        });
    }

    let n_angle = eqs.angle_buses.len();
    let mut converged = false;
    let mut iterations = 0;
    // A mismatch already far below the update tolerances cannot produce a
    // meaningful correction; stopping here skips a useless Jacobian build
    // and factorization. The primary criterion stays update-based below.
    let residual_floor = 0.01 * opts.tol_angle.max(opts.tol_vm);

    for it in 1..=opts.max_iter {
        if mismatch.max_norm() <= residual_floor {
            converged = true;
            break;
        }
        let t = Instant::now();
        let jac = build_jacobian_with(net, &ybus, &state, &eqs)?;
        timings.jacobian_build += t.elapsed();

        let rhs = mismatch.stacked();
        let t = Instant::now();
        let dx = solve_linear(&jac, &rhs, &opts.linear, thread_count)
            .map_err(|e| ModelError::from_linear(it, e))?;
        timings.linear_solve += t.elapsed();

        let mut max_da = 0.0f64;
        let mut max_dv = 0.0f64;
        for (k, &pos) in eqs.angle_buses.iter().enumerate() {
            state.angle[pos] += dx[k];
            max_da = max_da.max(dx[k].abs());
        }
        for (k, &pos) in eqs.vm_buses.iter().enumerate() {
            state.magnitude[pos] += dx[n_angle + k];
            max_dv = max_dv.max(dx[n_angle + k].abs());
        }

        let t = Instant::now();
        mismatch = power_mismatch(net, &ybus, &state)?;
        timings.mismatch_eval += t.elapsed();
        history.push(mismatch.inf_norms());

        iterations = it;
        if max_da <= opts.tol_angle && max_dv <= opts.tol_vm {
            converged = true;
            break;
        }
    }

    Ok(PowerFlowSolution {
        state,
        iterations,
        mismatch_history: history,
        converged,
        timings,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // index loops mirror the math in oracles
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::SplitMix64;
    use crate::single::model::{Branch, Bus};

    fn lossless_two_bus() -> SinglePhaseNetwork {
        SinglePhaseNetwork {
            base_mva: 100.0,
            buses: vec![Bus::slack(1, 1.0), Bus::pq(2, 1.0, 0.0)],
            branches: vec![Branch::new(1, 2, 0.0, 0.1, 0.0)],
        }
    }

    #[test]
    fn flat_start_on_a_lossless_line_carries_no_power() {
        let mut net = lossless_two_bus();
        net.buses[1].p_load = 0.0;
        let ybus = build_ybus(&net).unwrap();
        let (p, q) = calc_pq(&ybus, &net.flat_start()).unwrap();
        for i in 0..2 {
            assert!(p[i].abs() < 1e-14);
            assert!(q[i].abs() < 1e-14);
        }
    }

    #[test]
    fn a_lone_shunt_draws_pure_reactive_power() {
        let mut bus = Bus::slack(1, 1.0);
        bus.shunt_b = 0.5;
        let net = SinglePhaseNetwork {
            base_mva: 100.0,
            buses: vec![bus],
            branches: vec![],
        };
        let ybus = build_ybus(&net).unwrap();
        let (p, q) = calc_pq(&ybus, &net.flat_start()).unwrap();
        assert!(p[0].abs() < 1e-15);
        assert!((q[0] - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn flat_start_mismatch_on_the_two_bus_case() {
        let net = lossless_two_bus();
        let ybus = build_ybus(&net).unwrap();
        let m = power_mismatch(&net, &ybus, &net.flat_start()).unwrap();
        assert_eq!(m.dp.len(), 1);
        assert_eq!(m.dq.len(), 1);
        assert!((m.dp[0] - (-1.0)).abs() < 1e-14);
        assert!(m.dq[0].abs() < 1e-14);
    }

    #[test]
    fn two_bus_jacobian_matches_hand_values() {
        let net = lossless_two_bus();
        let ybus = build_ybus(&net).unwrap();
        let jac = build_jacobian(&net, &ybus, &net.flat_start()).unwrap();
        assert_eq!(jac.n_rows(), 2);
        // Angle column first, magnitude second; active row first.
        assert!((jac.get(0, 0) - 10.0).abs() < 1e-12);
        assert!((jac.get(1, 1) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn shunt_only_bus_has_a_zero_angle_row() {
        // Bus 2 couples to the rest only through its shunt; its active row
        // then has no angle sensitivity at all.
        let mut bus2 = Bus::pq(2, 0.0, 0.2);
        bus2.shunt_b = -0.4;
        let net = SinglePhaseNetwork {
            base_mva: 100.0,
            buses: vec![Bus::slack(1, 1.0), bus2],
            branches: vec![],
        };
        let ybus = build_ybus(&net).unwrap();
        let jac = build_jacobian(&net, &ybus, &net.flat_start()).unwrap();
        assert!(jac.get(0, 0).abs() < 1e-15);
    }

    /// Central finite differences of the mismatch, negated: the Jacobian is
    /// the derivative of calculated power, the mismatch of specified minus
    /// calculated.
    fn fd_jacobian(
        net: &SinglePhaseNetwork,
        ybus: &SparseMatrix<Complex64>,
        state: &VoltageState,
    ) -> Vec<Vec<f64>> {
        let eqs = EquationMap::new(net);
        let dim = eqs.n_unknowns();
        let n_angle = eqs.angle_buses.len();
        let h = 1e-6;
        let mut dense = vec![vec![0.0; dim]; dim];
        for col in 0..dim {
            let mut plus = state.clone();
            let mut minus = state.clone();
            if col < n_angle {
                plus.angle[eqs.angle_buses[col]] += h;
                minus.angle[eqs.angle_buses[col]] -= h;
            } else {
                plus.magnitude[eqs.vm_buses[col - n_angle]] += h;
                minus.magnitude[eqs.vm_buses[col - n_angle]] -= h;
            }
            let mp = power_mismatch(net, ybus, &plus).unwrap().stacked();
            let mm = power_mismatch(net, ybus, &minus).unwrap().stacked();
            for row in 0..dim {
                dense[row][col] = (mm[row] - mp[row]) / (2.0 * h);
            }
        }
        dense
    }

    fn random_feasible_state(net: &SinglePhaseNetwork, rng: &mut SplitMix64) -> VoltageState {
        let mut state = net.flat_start();
        for (pos, bus) in net.buses.iter().enumerate() {
            match bus.kind {
                BusKind::Slack => {}
                BusKind::Pv => {
                    state.angle[pos] = 0.3 * (rng.next_f64() - 0.5);
                }
                BusKind::Pq => {
                    state.angle[pos] = 0.3 * (rng.next_f64() - 0.5);
                    state.magnitude[pos] = 0.95 + 0.1 * rng.next_f64();
                }
            }
        }
        state
    }

    fn assert_jacobian_matches_fd(net: &SinglePhaseNetwork, states: usize, seed: u64) {
        let ybus = build_ybus(net).unwrap();
        let mut rng = SplitMix64::new(seed);
        for _ in 0..states {
            let state = random_feasible_state(net, &mut rng);
            let jac = build_jacobian(net, &ybus, &state).unwrap().to_dense();
            let fd = fd_jacobian(net, &ybus, &state);
            for (r, row) in jac.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    let tol = (1e-6 * v.abs()).max(1e-8);
                    assert!(
                        (v - fd[r][c]).abs() <= tol.max(1e-6 * fd[r][c].abs()),
                        "entry ({r},{c}): analytic {v}, finite difference {}",
                        fd[r][c]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_on_the_two_bus_case() {
        assert_jacobian_matches_fd(&lossless_two_bus(), 4, 11);
    }

    #[test]
    fn jacobian_matches_finite_differences_on_the_thirty_bus_case() {
        assert_jacobian_matches_fd(&fixtures::ieee30(), 3, 23);
    }

    #[test]
    fn zero_load_network_converges_immediately() {
        let mut net = lossless_two_bus();
        net.buses[1].p_load = 0.0;
        let sol = solve_nr(&net, &NewtonOptions::default(), 1).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 1);
        assert!((sol.state.magnitude[1] - 1.0).abs() < 1e-12);
        assert!(sol.state.angle[1].abs() < 1e-12);
    }

    #[test]
    fn two_bus_case_hits_the_closed_form() {
        // Power balance at bus 2 gives a^2 - a + b^2 = 0 and 10 b = -1 for
        // V2 = a + jb; the high-voltage root is the physical solution.
        let net = lossless_two_bus();
        let sol = solve_nr(&net, &NewtonOptions::default(), 1).unwrap();
        assert!(sol.converged);
        let b = -0.1;
        let a = 0.5 * (1.0 + (1.0f64 - 4.0 * b * b).sqrt());
        let vm = (a * a + b * b).sqrt();
        let angle = (b / a).atan();
        assert!((sol.state.magnitude[1] - vm).abs() < 1e-9, "vm {}", vm);
        assert!((sol.state.angle[1] - angle).abs() < 1e-9);
        // Injected power at the solution reproduces the load.
        let ybus = build_ybus(&net).unwrap();
        let (p, q) = calc_pq(&ybus, &sol.state).unwrap();
        assert!((p[1] + 1.0).abs() < 1e-9);
        assert!(q[1].abs() < 1e-9);
    }

    #[test]
    fn thirty_bus_case_converges_quickly_and_consistently() {
        let net = fixtures::ieee30();
        let sol = solve_nr(&net, &NewtonOptions::default(), 1).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 10, "took {} iterations", sol.iterations);
        let ybus = build_ybus(&net).unwrap();
        let m = power_mismatch(&net, &ybus, &sol.state).unwrap();
        assert!(m.max_norm() <= 1e-8, "residual {}", m.max_norm());
        // The final recorded mismatch equals the recomputed one.
        let last = sol.mismatch_history.last().unwrap();
        assert!((last.0.max(last.1) - m.max_norm()).abs() < 1e-15);
    }

    #[test]
    fn iteration_cap_yields_a_flagged_result_with_history() {
        let net = fixtures::ieee30();
        let opts = NewtonOptions {
            max_iter: 1,
            ..NewtonOptions::default()
        };
        let sol = solve_nr(&net, &opts, 1).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.mismatch_history.len(), 2);
    }

    #[test]
    fn disabled_flat_start_requires_an_explicit_state() {
        let net = lossless_two_bus();
        let opts = NewtonOptions {
            flat_start: false,
            ..NewtonOptions::default()
        };
        assert!(matches!(
            solve_nr(&net, &opts, 1),
            Err(ModelError::InitialStateRequired)
        ));
        let sol = solve_nr_from(&net, &net.flat_start(), &opts, 1).unwrap();
        assert!(sol.converged);
    }
}
