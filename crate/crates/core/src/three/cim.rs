//! Current-injection Newton solver for three-phase networks.
//!
//! The residual at each non-source phase-node is the complex current
//! mismatch `ΔI = I_specified − I_calculated`, split into real equations:
//! within each bus block the imaginary parts stack first, then the real
//! parts. The unknowns are the rectangular voltage corrections, real parts
//! first, then imaginary. The Jacobian is the admittance matrix rearranged
//! into 2×2 real blocks per admittance entry, with the load's
//! voltage-sensitivity ("adjusting") blocks subtracted on bus diagonals;
//! the update is `V ← V + ΔV` with `J·ΔV = ΔI`, which is exactly Newton's
//! method on `F(V) = I_calculated − I_specified`.

use std::time::Instant;

use num_complex::Complex64;

use gridflow_sparse::{solve_linear, LinearSolverConfig, SolverKind, SparseError, SparseMatrix};

use crate::error::ModelError;
use crate::solution::Timings;
use crate::three::model::{
    build_ybus3, Bus3, NodeMap, Phase, ThreePhaseNetwork, VoltageState3,
};

/// Voltage magnitudes below this are treated as divergence.
pub const VOLTAGE_FLOOR: f64 = 1e-6;

/// Stopping and solver options for [`solve_cim`].
#[derive(Debug, Clone)]
pub struct CimOptions {
    /// Largest allowed voltage-correction entry at convergence (per-unit).
    pub tol_v: f64,
    /// Iteration cap; exceeding it yields a non-converged result.
    pub max_iter: usize,
    /// Inner linear-solver configuration.
    pub linear: LinearSolverConfig,
    /// Retry an iteration with the direct solver when the iterative one
    /// reports non-convergence.
    pub fallback_to_direct: bool,
}

impl Default for CimOptions {
    fn default() -> Self {
        CimOptions {
            tol_v: 1e-8,
            max_iter: 50,
            linear: LinearSolverConfig::default(),
            fallback_to_direct: true,
        }
    }
}

/// Load sensitivity blocks of one bus: derivatives of the specified
/// current with respect to the bus's own voltage, per phase.
///
/// `a = ∂I_im/∂v_re`, `b = ∂I_im/∂v_im`, `c = ∂I_re/∂v_re`,
/// `d = ∂I_re/∂v_im`, each a 3×3 matrix indexed by phase offsets.
/// Wye loads couple no phases, so only the diagonals are populated; a bus
/// with zero load has all-zero blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustingBlocks {
    pub a: [[f64; 3]; 3],
    pub b: [[f64; 3]; 3],
    pub c: [[f64; 3]; 3],
    pub d: [[f64; 3]; 3],
}

impl AdjustingBlocks {
    pub const ZERO: AdjustingBlocks = AdjustingBlocks {
        a: [[0.0; 3]; 3],
        b: [[0.0; 3]; 3],
        c: [[0.0; 3]; 3],
        d: [[0.0; 3]; 3],
    };
}

/// Specified injection current at one bus phase for voltage `v`:
/// `conj(S_specified / v)` with `S_specified = −(P_load(|v|) + jQ_load(|v|))`
/// (no generation in this formulation; loads draw current).
pub fn specified_current(bus: &Bus3, phase: Phase, v: Complex64) -> Result<Complex64, ModelError> {
    let vm = v.norm();
    if vm < VOLTAGE_FLOOR {
        return Err(ModelError::NearZeroVoltage {
            id: bus.id,
            phase,
            vm,
        });
    }
    let (p_l, q_l) = bus.load(phase).power(vm);
    let s_specified = Complex64::new(-p_l, -q_l);
    Ok((s_specified / v).conj())
}

/// Currents flowing out of every phase-node for the given state: the
/// complex matrix-vector product of the admittance matrix with the node
/// voltages.
pub fn calculated_current(
    ybus3: &SparseMatrix<Complex64>,
    state: &VoltageState3,
) -> Result<Vec<Complex64>, ModelError> {
    Ok(ybus3.spmv(&state.v, 1)?)
}

/// Stacked current mismatch over all non-source phase-nodes.
///
/// Within each bus block of `m` present phases the imaginary mismatch
/// parts occupy the first `m` slots and the real parts the next `m`.
pub fn current_mismatch(
    net: &ThreePhaseNetwork,
    map: &NodeMap,
    ybus3: &SparseMatrix<Complex64>,
    state: &VoltageState3,
) -> Result<Vec<f64>, ModelError> {
    let calc = calculated_current(ybus3, state)?;
    let mut out = vec![0.0; map.n_eqs()];
    for (node, calc_node) in calc.iter().enumerate() {
        let (bus_pos, phase) = map.node_info(node);
        let Some(row_im) = map.row_im(node) else {
            continue;
        };
        let row_re = map.row_re(node).unwrap();
        let bus = &net.buses[bus_pos];
        let delta = specified_current(bus, phase, state.v[node])? - calc_node;
        out[row_im] = delta.im;
        out[row_re] = delta.re;
    }
    Ok(out)
}

/// Largest-magnitude entry of a stacked vector.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Analytic derivatives of the specified current of one bus with respect
/// to its own rectangular voltage components, per present phase.
/// `voltages` is indexed by phase offset; absent phases are ignored.
pub fn adjusting_blocks(
    bus: &Bus3,
    voltages: &[Complex64; 3],
) -> Result<AdjustingBlocks, ModelError> {
    let mut blocks = AdjustingBlocks::ZERO;
    for phase in bus.phases.iter() {
        let o = phase.offset();
        let v = voltages[o];
        let vm = v.norm();
        if vm < VOLTAGE_FLOOR {
            return Err(ModelError::NearZeroVoltage {
                id: bus.id,
                phase,
                vm,
            });
        }
        let load = bus.load(phase);
        if load.is_zero() {
            continue;
        }
        let (vr, vi) = (v.re, v.im);
        let u = vm * vm;
        let (p_l, q_l) = load.power(vm);
        let (dp_l, dq_l) = load.power_derivative(vm);
        // Specified power is minus the load; its vm-derivatives likewise.
        let (p, q) = (-p_l, -q_l);
        let (dp, dq) = (-dp_l, -dq_l);
        // I_im = (P·vi − Q·vr)/u, I_re = (P·vr + Q·vi)/u with
        // P = P(|v|), Q = Q(|v|), u = |v|².
        let i_im = (p * vi - q * vr) / u;
        let i_re = (p * vr + q * vi) / u;
        blocks.a[o][o] = (dp * vr / vm * vi - dq * vr / vm * vr - q) / u - 2.0 * vr * i_im / u;
        blocks.b[o][o] = (dp * vi / vm * vi + p - dq * vi / vm * vr) / u - 2.0 * vi * i_im / u;
        blocks.c[o][o] = (dp * vr / vm * vr + p + dq * vr / vm * vi) / u - 2.0 * vr * i_re / u;
        blocks.d[o][o] = (dp * vi / vm * vr + dq * vi / vm * vi + q) / u - 2.0 * vi * i_re / u;
    }
    Ok(blocks)
}

/// Assembles the real Newton Jacobian of the stacked current residual.
///
/// Every admittance entry `G + jB` coupling node `p` to node `q` lands as
/// the 2×2 real block `[[B, G], [G, −B]]` on (imaginary row, real row) ×
/// (real column, imaginary column); bus-diagonal entries additionally
/// subtract the load's adjusting blocks. Source-bus rows and columns are
/// omitted entirely.
pub fn build_cim_jacobian(
    net: &ThreePhaseNetwork,
    map: &NodeMap,
    ybus3: &SparseMatrix<Complex64>,
    state: &VoltageState3,
) -> Result<SparseMatrix<f64>, ModelError> {
    let n_eqs = map.n_eqs();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * ybus3.nnz());

    for p in 0..map.n_nodes() {
        let Some(row_im) = map.row_im(p) else {
            continue;
        };
        let row_re = map.row_re(p).unwrap();
        let (cols, vals) = ybus3.row(p);
        for (&q, &y) in cols.iter().zip(vals.iter()) {
            let Some(col_re) = map.col_re(q) else {
                continue;
            };
            let col_im = map.col_im(q).unwrap();
            let (g, b) = (y.re, y.im);
            triplets.push((row_im, col_re, b));
            triplets.push((row_im, col_im, g));
            triplets.push((row_re, col_re, g));
            triplets.push((row_re, col_im, -b));
        }
    }

    // Load sensitivities on bus diagonals.
    let mut voltages = [Complex64::new(0.0, 0.0); 3];
    for (bus_pos, bus) in net.buses.iter().enumerate() {
        if map.eq_start(bus_pos).is_none() {
            continue;
        }
        if bus.phases.iter().all(|p| bus.load(p).is_zero()) {
            continue;
        }
        for phase in bus.phases.iter() {
            let node = map.node(bus_pos, phase).unwrap();
            voltages[phase.offset()] = state.v[node];
        }
        let adj = adjusting_blocks(bus, &voltages)?;
        for phase in bus.phases.iter() {
            let o = phase.offset();
            let node = map.node(bus_pos, phase).unwrap();
            let row_im = map.row_im(node).unwrap();
            let row_re = map.row_re(node).unwrap();
            let col_re = map.col_re(node).unwrap();
            let col_im = map.col_im(node).unwrap();
            triplets.push((row_im, col_re, -adj.a[o][o]));
            triplets.push((row_im, col_im, -adj.b[o][o]));
            triplets.push((row_re, col_re, -adj.c[o][o]));
            triplets.push((row_re, col_im, -adj.d[o][o]));
        }
    }

    Ok(SparseMatrix::from_triplets(n_eqs, n_eqs, &triplets)?)
}

/// Result of a current-injection Newton run.
#[derive(Debug, Clone)]
pub struct CimSolution {
    pub state: VoltageState3,
    /// Completed Newton updates.
    pub iterations: usize,
    /// Stacked-mismatch ∞-norm at the start of each iteration plus one
    /// final entry at the exit state; length `iterations + 1`.
    pub mismatch_history: Vec<f64>,
    pub converged: bool,
    pub timings: Timings,
    /// Iterations the iterative inner solver gave up on and the direct
    /// solver finished instead.
    pub direct_fallbacks: usize,
}

/// Runs the current-injection Newton loop from the rotated flat start.
pub fn solve_cim(
    net: &ThreePhaseNetwork,
    opts: &CimOptions,
    thread_count: usize,
) -> Result<CimSolution, ModelError> {
    let map = NodeMap::new(net)?;
    let ybus = build_ybus3(net)?;
    let mut state = VoltageState3::flat(net, &map);
    let mut timings = Timings::default();
    let mut history = Vec::new();
    let mut direct_fallbacks = 0usize;

    let t = Instant::now();
    let mut mismatch = current_mismatch(net, &map, &ybus, &state)?;
    timings.mismatch_eval += t.elapsed();
    history.push(inf_norm(&mismatch));

    if map.n_eqs() == 0 {
        return Ok(CimSolution {
            state,
            iterations: 0,
            mismatch_history: history,
            converged: true,
            timings,
            direct_fallbacks,
        });
    }

    let mut converged = false;
    let mut iterations = 0;
    // A mismatch already far below the update tolerance cannot produce a
    // meaningful correction; stopping here skips a useless Jacobian build
    // and factorization. The primary criterion stays update-based below.
    let residual_floor = 0.01 * opts.tol_v;

    for it in 1..=opts.max_iter {
        if inf_norm(&mismatch) <= residual_floor {
            converged = true;
            break;
        }
        let t = Instant::now();
        let jac = build_cim_jacobian(net, &map, &ybus, &state)?;
        timings.jacobian_build += t.elapsed();

        let t = Instant::now();
        let dx = match solve_linear(&jac, &mismatch, &opts.linear, thread_count) {
            Ok(dx) => dx,
            Err(SparseError::NotConverged { .. } | SparseError::Breakdown { .. })
                if opts.fallback_to_direct && opts.linear.kind == SolverKind::Krylov =>
            {
                // The iterative solver stalled on this system; redo the
                // iteration with the factorizing path and record it.
                direct_fallbacks += 1;
                let direct = LinearSolverConfig {
                    kind: SolverKind::Direct,
                    ..opts.linear
                };
                solve_linear(&jac, &mismatch, &direct, thread_count)
                    .map_err(|e| ModelError::from_linear(it, e))?
            }
            Err(e) => return Err(ModelError::from_linear(it, e)),
        };
        timings.linear_solve += t.elapsed();

        let mut max_dv = 0.0f64;
        for (bus_pos, _) in net.buses.iter().enumerate() {
            let Some(eq) = map.eq_start(bus_pos) else {
                continue;
            };
            let phases = map.phases_at(bus_pos);
            let m = phases.len();
            for (slot, &phase) in phases.iter().enumerate() {
                let node = map.node(bus_pos, phase).unwrap();
                let d_re = dx[eq + slot];
                let d_im = dx[eq + m + slot];
                state.v[node] += Complex64::new(d_re, d_im);
                max_dv = max_dv.max(d_re.abs()).max(d_im.abs());
            }
        }

        let t = Instant::now();
        mismatch = current_mismatch(net, &map, &ybus, &state)?;
        timings.mismatch_eval += t.elapsed();
        history.push(inf_norm(&mismatch));

        iterations = it;
        if max_dv <= opts.tol_v {
            converged = true;
            break;
        }
    }

    Ok(CimSolution {
        state,
        iterations,
        mismatch_history: history,
        converged,
        timings,
        direct_fallbacks,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // index loops mirror the math in oracles
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::single::model::{Branch, Bus, SinglePhaseNetwork};
    use crate::single::newton::{solve_nr, NewtonOptions};
    use crate::three::model::{diagonal_block, PhaseSet, ZipLoad, PHASES, ZERO_BLOCK};
    use gridflow_sparse::Preconditioner;

    fn feeder(load: ZipLoad) -> ThreePhaseNetwork {
        ThreePhaseNetwork {
            buses: vec![
                Bus3::new(1, PhaseSet::ABC),
                Bus3::new(2, PhaseSet::ABC)
                    .with_load(Phase::A, load)
                    .with_load(Phase::B, load)
                    .with_load(Phase::C, load),
            ],
            branches: vec![Branch3::series(
                1,
                2,
                PhaseSet::ABC,
                diagonal_block(PhaseSet::ABC, Complex64::new(0.0, -10.0)),
            )],
            source_bus: 1,
            source_vm: 1.0,
        }
    }

    use crate::three::model::Branch3;

    #[test]
    fn specified_current_examples() {
        let bus = Bus3::new(2, PhaseSet::ABC).with_load(Phase::A, ZipLoad::constant_power(1.0, 0.0));
        let i = specified_current(&bus, Phase::A, Complex64::new(1.0, 0.0)).unwrap();
        assert!((i - Complex64::new(-1.0, 0.0)).norm() < 1e-15);

        // Zero load draws nothing.
        let i = specified_current(&bus, Phase::B, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(i, Complex64::new(0.0, 0.0));

        // Cross-check against direct complex arithmetic at a shifted voltage.
        let bus = Bus3::new(2, PhaseSet::ABC)
            .with_load(Phase::A, ZipLoad::constant_power(1.0, 0.5));
        let v = Complex64::from_polar(0.9, -0.1);
        let i = specified_current(&bus, Phase::A, v).unwrap();
        let want = (Complex64::new(-1.0, -0.5) / v).conj();
        assert!((i - want).norm() < 1e-15);

        // Collapsed voltage is a diagnosed error.
        let err = specified_current(&bus, Phase::A, Complex64::new(1e-9, 0.0));
        assert!(matches!(err, Err(ModelError::NearZeroVoltage { .. })));
    }

    #[test]
    fn calculated_current_is_the_admittance_product() {
        let net = feeder(ZipLoad::default());
        let ybus = build_ybus3(&net).unwrap();
        let map = NodeMap::new(&net).unwrap();
        let mut state = VoltageState3::flat(&net, &map);
        // Identity check: Y of this feeder maps equal end voltages to zero.
        let currents = calculated_current(&ybus, &state).unwrap();
        for c in &currents {
            assert!(c.norm() < 1e-12);
        }
        // Perturb one end and compare against a dense product.
        state.v[4] += Complex64::new(0.01, -0.02);
        let dense = ybus.to_dense();
        let currents = calculated_current(&ybus, &state).unwrap();
        for (r, want_row) in dense.iter().enumerate() {
            let want: Complex64 = want_row
                .iter()
                .zip(state.v.iter())
                .map(|(a, b)| a * b)
                .sum();
            assert!((currents[r] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn mismatch_stacks_imaginary_parts_first() {
        let net = feeder(ZipLoad::constant_power(1.0, 0.0));
        let ybus = build_ybus3(&net).unwrap();
        let map = NodeMap::new(&net).unwrap();
        let state = VoltageState3::flat(&net, &map);
        let m = current_mismatch(&net, &map, &ybus, &state).unwrap();
        assert_eq!(m.len(), 6);
        // At the flat start no current flows, so the mismatch is the
        // specified current alone: phase a draws -1 + j0 at angle 0.
        // Its imaginary part sits at offset 0, its real part at offset 3.
        assert!(m[0].abs() < 1e-12);
        assert!((m[3] - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn adjusting_blocks_match_finite_differences() {
        let h = 1e-6;
        let loads = [
            ZipLoad::constant_power(1.0, 0.0),
            // Constant-impedance only.
            ZipLoad {
                p_z: 0.8,
                q_z: 0.3,
                ..ZipLoad::default()
            },
            // Full ZIP mix.
            ZipLoad {
                p_p: 0.4,
                p_i: 0.3,
                p_z: 0.3,
                q_p: 0.1,
                q_i: 0.15,
                q_z: 0.05,
            },
        ];
        let states = [
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(0.95, -0.12),
            Complex64::from_polar(1.04, 2.0),
        ];
        for load in loads {
            let bus = Bus3::new(7, PhaseSet::ABC).with_load(Phase::B, load);
            for v in states {
                let mut voltages = [Complex64::new(1.0, 0.0); 3];
                voltages[Phase::B.offset()] = v;
                let adj = adjusting_blocks(&bus, &voltages).unwrap();
                let o = Phase::B.offset();
                let eval = |v: Complex64| specified_current(&bus, Phase::B, v).unwrap();
                let dr = (eval(v + Complex64::new(h, 0.0)) - eval(v - Complex64::new(h, 0.0)))
                    / (2.0 * h);
                let di = (eval(v + Complex64::new(0.0, h)) - eval(v - Complex64::new(0.0, h)))
                    / (2.0 * h);
                for (got, want) in [
                    (adj.a[o][o], dr.im),
                    (adj.b[o][o], di.im),
                    (adj.c[o][o], dr.re),
                    (adj.d[o][o], di.re),
                ] {
                    assert!(
                        (got - want).abs() <= (1e-6 * want.abs()).max(1e-8),
                        "analytic {got} vs finite difference {want} for load {load:?} at {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_load_makes_zero_adjusting_blocks() {
        let bus = Bus3::new(1, PhaseSet::ABC);
        let adj = adjusting_blocks(&bus, &[Complex64::new(1.0, 0.0); 3]).unwrap();
        assert_eq!(adj, AdjustingBlocks::ZERO);
    }

    #[test]
    fn zero_load_jacobian_is_the_rearranged_admittance_matrix() {
        // With no load the residual is linear: J times any stacked voltage
        // equals the stacked current from the admittance product.
        let mut net = feeder(ZipLoad::default());
        // Add coupling so the check exercises off-diagonal phase terms.
        net.branches[0].y_series[0][1] = Complex64::new(-0.5, 1.0);
        net.branches[0].y_series[1][0] = Complex64::new(-0.5, 1.0);
        let ybus = build_ybus3(&net).unwrap();
        let map = NodeMap::new(&net).unwrap();
        let mut state = VoltageState3::flat(&net, &map);
        let mut rng = SplitMix64::new(5);
        for v in state.v.iter_mut() {
            *v += Complex64::new(0.1 * (rng.next_f64() - 0.5), 0.1 * (rng.next_f64() - 0.5));
        }
        let jac = build_cim_jacobian(&net, &map, &ybus, &state).unwrap();

        // Stack the non-source voltages column-style, multiply, and compare
        // with the stacked currents. Because the source columns are
        // removed, zero the source voltages for the linear check.
        let mut masked = state.clone();
        for node in 0..map.n_nodes() {
            if map.row_im(node).is_none() {
                masked.v[node] = Complex64::new(0.0, 0.0);
            }
        }
        let currents = calculated_current(&ybus, &masked).unwrap();
        let mut stacked_v = vec![0.0; map.n_eqs()];
        let mut stacked_i = vec![0.0; map.n_eqs()];
        for node in 0..map.n_nodes() {
            let (Some(col_re), Some(col_im)) = (map.col_re(node), map.col_im(node)) else {
                continue;
            };
            stacked_v[col_re] = masked.v[node].re;
            stacked_v[col_im] = masked.v[node].im;
            stacked_i[map.row_im(node).unwrap()] = currents[node].im;
            stacked_i[map.row_re(node).unwrap()] = currents[node].re;
        }
        let got = jac.spmv(&stacked_v, 1).unwrap();
        for (g, w) in got.iter().zip(stacked_i.iter()) {
            assert!((g - w).abs() < 1e-12, "J·V gave {g}, direct product {w}");
        }
    }

    fn fd_cim_jacobian(
        net: &ThreePhaseNetwork,
        map: &NodeMap,
        ybus: &SparseMatrix<Complex64>,
        state: &VoltageState3,
    ) -> Vec<Vec<f64>> {
        let h = 1e-6;
        let dim = map.n_eqs();
        let mut dense = vec![vec![0.0; dim]; dim];
        for node in 0..map.n_nodes() {
            let (Some(col_re), Some(col_im)) = (map.col_re(node), map.col_im(node)) else {
                continue;
            };
            for (col, delta) in [(col_re, Complex64::new(h, 0.0)), (col_im, Complex64::new(0.0, h))]
            {
                let mut plus = state.clone();
                let mut minus = state.clone();
                plus.v[node] += delta;
                minus.v[node] -= delta;
                let mp = current_mismatch(net, map, ybus, &plus).unwrap();
                let mm = current_mismatch(net, map, ybus, &minus).unwrap();
                for row in 0..dim {
                    // The Jacobian differentiates calculated-minus-specified;
                    // the mismatch is its negation.
                    dense[row][col] = (mm[row] - mp[row]) / (2.0 * h);
                }
            }
        }
        dense
    }

    fn mixed_phase_network() -> ThreePhaseNetwork {
        let mut coupled = diagonal_block(PhaseSet::ABC, Complex64::new(3.0, -9.0));
        for s in 0..3 {
            for t in 0..3 {
                if s != t {
                    coupled[s][t] = Complex64::new(-0.8, 2.2);
                }
            }
        }
        let bc = PhaseSet::from_phases(&[Phase::B, Phase::C]);
        let mut bc_block = ZERO_BLOCK;
        bc_block[1][1] = Complex64::new(2.0, -6.0);
        bc_block[2][2] = Complex64::new(2.0, -5.5);
        bc_block[1][2] = Complex64::new(-0.4, 1.1);
        bc_block[2][1] = Complex64::new(-0.4, 1.1);
        ThreePhaseNetwork {
            buses: vec![
                Bus3::new(1, PhaseSet::ABC),
                Bus3::new(2, PhaseSet::ABC)
                    .with_load(
                        Phase::A,
                        ZipLoad {
                            p_p: 0.02,
                            p_i: 0.01,
                            p_z: 0.015,
                            q_p: 0.008,
                            q_i: 0.002,
                            q_z: 0.005,
                        },
                    )
                    .with_load(Phase::C, ZipLoad::constant_power(0.03, 0.01)),
                Bus3::new(3, bc).with_load(
                    Phase::B,
                    ZipLoad {
                        p_p: 0.01,
                        p_i: 0.02,
                        p_z: 0.0,
                        q_p: 0.004,
                        q_i: 0.0,
                        q_z: 0.006,
                    },
                ),
            ],
            branches: vec![
                Branch3::series(1, 2, PhaseSet::ABC, coupled),
                Branch3::series(2, 3, bc, bc_block),
            ],
            source_bus: 1,
            source_vm: 1.02,
        }
    }

    #[test]
    fn cim_jacobian_matches_finite_differences() {
        let net = mixed_phase_network();
        let ybus = build_ybus3(&net).unwrap();
        let map = NodeMap::new(&net).unwrap();
        let mut rng = SplitMix64::new(99);
        for _ in 0..3 {
            let mut state = VoltageState3::flat(&net, &map);
            for v in state.v.iter_mut() {
                *v += Complex64::new(
                    0.08 * (rng.next_f64() - 0.5),
                    0.08 * (rng.next_f64() - 0.5),
                );
            }
            let jac = build_cim_jacobian(&net, &map, &ybus, &state)
                .unwrap()
                .to_dense();
            let fd = fd_cim_jacobian(&net, &map, &ybus, &state);
            for r in 0..jac.len() {
                for c in 0..jac.len() {
                    let tol = (1e-6 * jac[r][c].abs()).max(1e-8);
                    assert!(
                        (jac[r][c] - fd[r][c]).abs() <= tol.max(1e-6 * fd[r][c].abs()),
                        "entry ({r},{c}): analytic {}, finite difference {}",
                        jac[r][c],
                        fd[r][c]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_block_placement_subtracts_the_adjusting_diagonal() {
        let net = feeder(ZipLoad::constant_power(1.0, 0.0));
        let ybus = build_ybus3(&net).unwrap();
        let map = NodeMap::new(&net).unwrap();
        let state = VoltageState3::flat(&net, &map);
        let jac = build_cim_jacobian(&net, &map, &ybus, &state).unwrap();
        let node_a = map.node(1, Phase::A).unwrap();
        let row = map.row_im(node_a).unwrap();
        let col = map.col_re(node_a).unwrap();
        let b_aa = ybus.get(node_a, node_a).im;
        let mut voltages = [Complex64::new(0.0, 0.0); 3];
        for p in PHASES {
            voltages[p.offset()] = state.v[map.node(1, p).unwrap()];
        }
        let adj = adjusting_blocks(&net.buses[1], &voltages).unwrap();
        let want = b_aa - adj.a[0][0];
        assert!((jac.get(row, col) - want).abs() < 1e-12);
    }

    #[test]
    fn zero_load_feeder_converges_immediately_to_the_source_profile() {
        let net = feeder(ZipLoad::default());
        let sol = solve_cim(&net, &CimOptions::default(), 1).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 1);
        let map = NodeMap::new(&net).unwrap();
        for node in 0..map.n_nodes() {
            let (_, phase) = map.node_info(node);
            let want = Complex64::from_polar(1.0, phase.nominal_angle());
            assert!((sol.state.v[node] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn balanced_feeder_reproduces_the_single_phase_answer_per_phase() {
        let net = feeder(ZipLoad::constant_power(1.0, 0.0));
        let sol = solve_cim(&net, &CimOptions::default(), 1).unwrap();
        assert!(sol.converged);

        let single = SinglePhaseNetwork {
            base_mva: 100.0,
            buses: vec![Bus::slack(1, 1.0), Bus::pq(2, 1.0, 0.0)],
            branches: vec![Branch::new(1, 2, 0.0, 0.1, 0.0)],
        };
        let nr = solve_nr(&single, &NewtonOptions::default(), 1).unwrap();
        assert!(nr.converged);
        let vm = nr.state.magnitude[1];
        let angle = nr.state.angle[1];

        let map = NodeMap::new(&net).unwrap();
        for phase in PHASES {
            let node = map.node(1, phase).unwrap();
            let v = sol.state.v[node];
            assert!(
                (v.norm() - vm).abs() < 1e-8,
                "phase {phase}: magnitude {} vs {}",
                v.norm(),
                vm
            );
            let rel = (v * Complex64::from_polar(1.0, -phase.nominal_angle())).arg();
            assert!((rel - angle).abs() < 1e-8);
        }
    }

    #[test]
    fn mismatch_residual_is_consistent_at_convergence() {
        let net = mixed_phase_network();
        let opts = CimOptions::default();
        let sol = solve_cim(&net, &opts, 1).unwrap();
        assert!(sol.converged);
        let last = *sol.mismatch_history.last().unwrap();
        assert!(last <= 100.0 * opts.tol_v, "final mismatch {last}");
    }

    #[test]
    fn impossible_load_is_a_divergence_error() {
        // A hundred per-unit constant power behind j0.1 has no solution;
        // the iteration collapses the voltage and must say so.
        let net = feeder(ZipLoad::constant_power(100.0, 50.0));
        let err = solve_cim(&net, &CimOptions::default(), 1);
        match err {
            Err(ModelError::NearZeroVoltage { .. }) => {}
            Ok(sol) => assert!(!sol.converged, "absurd load reported converged"),
            Err(other) => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn krylov_failure_falls_back_to_the_direct_solver() {
        let net = mixed_phase_network();
        let opts = CimOptions {
            linear: LinearSolverConfig {
                kind: SolverKind::Krylov,
                tol: 1e-12,
                // One inner iteration cannot converge, forcing fallback.
                max_iter: 1,
                preconditioner: Preconditioner::Jacobi,
                pivot_threshold: 1.0,
            },
            ..CimOptions::default()
        };
        let sol = solve_cim(&net, &opts, 1).unwrap();
        assert!(sol.converged);
        assert!(sol.direct_fallbacks >= 1);

        // And the fallback answer matches the pure-direct one.
        let direct = solve_cim(&net, &CimOptions::default(), 1).unwrap();
        for (a, b) in sol.state.v.iter().zip(direct.state.v.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn disabled_fallback_surfaces_the_inner_failure() {
        let net = mixed_phase_network();
        let opts = CimOptions {
            linear: LinearSolverConfig {
                kind: SolverKind::Krylov,
                tol: 1e-12,
                max_iter: 1,
                preconditioner: Preconditioner::Jacobi,
                pivot_threshold: 1.0,
            },
            fallback_to_direct: false,
            ..CimOptions::default()
        };
        assert!(matches!(
            solve_cim(&net, &opts, 1),
            Err(ModelError::Linear { .. })
        ));
    }
}
