//! Bundled study networks used by tests, benchmarks, and the command line
//! tools.
//!
//! * [`two_bus`] — smallest solvable transmission case, with a closed-form
//!   solution.
//! * [`ieee30`] — the public 30-bus, 41-branch meshed test system.
//! * [`feeder2`] — balanced two-bus feeder, the three-phase analog of
//!   [`two_bus`].
//! * [`lv906`] — a 906-bus radial low-voltage feeder built deterministically
//!   from a fixed seed.

use crate::rng::SplitMix64;
use crate::single::model::{Branch, Bus, SinglePhaseNetwork};
use crate::three::model::{
    diagonal_block, invert_block, Branch3, Bus3, Phase, PhaseBlock, PhaseSet, ThreePhaseNetwork,
    ZipLoad,
};
use num_complex::Complex64;

/// Slack at 1.0 p.u. feeding a 1.0 p.u. active load through a purely
/// reactive branch (x = 0.1). The exact solution is
/// `V₂ = (1 + √0.96)/2 − j0.1`.
pub fn two_bus() -> SinglePhaseNetwork {
    SinglePhaseNetwork {
        base_mva: 100.0,
        buses: vec![Bus::slack(1, 1.0), Bus::pq(2, 1.0, 0.0)],
        branches: vec![Branch::new(1, 2, 0.0, 0.1, 0.0)],
    }
}

/// The public 30-bus test system: 30 buses, 41 branches, 100 MVA base,
/// one slack (bus 1), five voltage-controlled buses, two fixed shunts.
/// The original data's off-nominal transformer taps are treated as
/// nominal, so solved voltages differ slightly from tap-aware tools.
pub fn ieee30() -> SinglePhaseNetwork {
    // (id, kind, p_load MW, q_load MVAr, p_gen MW, v_setpoint, shunt_b)
    const K_SLACK: u8 = 0;
    const K_PV: u8 = 1;
    const K_PQ: u8 = 2;
    const BUSES: [(u64, u8, f64, f64, f64, f64, f64); 30] = [
        (1, K_SLACK, 0.0, 0.0, 0.0, 1.06, 0.0),
        (2, K_PV, 21.7, 12.7, 40.0, 1.043, 0.0),
        (3, K_PQ, 2.4, 1.2, 0.0, 1.0, 0.0),
        (4, K_PQ, 7.6, 1.6, 0.0, 1.0, 0.0),
        (5, K_PV, 94.2, 19.0, 0.0, 1.01, 0.0),
        (6, K_PQ, 0.0, 0.0, 0.0, 1.0, 0.0),
        (7, K_PQ, 22.8, 10.9, 0.0, 1.0, 0.0),
        (8, K_PV, 30.0, 30.0, 0.0, 1.01, 0.0),
        (9, K_PQ, 0.0, 0.0, 0.0, 1.0, 0.0),
        (10, K_PQ, 5.8, 2.0, 0.0, 1.0, 0.19),
        (11, K_PV, 0.0, 0.0, 0.0, 1.082, 0.0),
        (12, K_PQ, 11.2, 7.5, 0.0, 1.0, 0.0),
        (13, K_PV, 0.0, 0.0, 0.0, 1.071, 0.0),
        (14, K_PQ, 6.2, 1.6, 0.0, 1.0, 0.0),
        (15, K_PQ, 8.2, 2.5, 0.0, 1.0, 0.0),
        (16, K_PQ, 3.5, 1.8, 0.0, 1.0, 0.0),
        (17, K_PQ, 9.0, 5.8, 0.0, 1.0, 0.0),
        (18, K_PQ, 3.2, 0.9, 0.0, 1.0, 0.0),
        (19, K_PQ, 9.5, 3.4, 0.0, 1.0, 0.0),
        (20, K_PQ, 2.2, 0.7, 0.0, 1.0, 0.0),
        (21, K_PQ, 17.5, 11.2, 0.0, 1.0, 0.0),
        (22, K_PQ, 0.0, 0.0, 0.0, 1.0, 0.0),
        (23, K_PQ, 3.2, 1.6, 0.0, 1.0, 0.0),
        (24, K_PQ, 8.7, 6.7, 0.0, 1.0, 0.043),
        (25, K_PQ, 0.0, 0.0, 0.0, 1.0, 0.0),
        (26, K_PQ, 3.5, 2.3, 0.0, 1.0, 0.0),
        (27, K_PQ, 0.0, 0.0, 0.0, 1.0, 0.0),
        (28, K_PQ, 0.0, 0.0, 0.0, 1.0, 0.0),
        (29, K_PQ, 2.4, 0.9, 0.0, 1.0, 0.0),
        (30, K_PQ, 10.6, 1.9, 0.0, 1.0, 0.0),
    ];
    // (from, to, r, x, total line charging b)
    const BRANCHES: [(u64, u64, f64, f64, f64); 41] = [
        (1, 2, 0.0192, 0.0575, 0.0528),
        (1, 3, 0.0452, 0.1652, 0.0408),
        (2, 4, 0.0570, 0.1737, 0.0368),
        (3, 4, 0.0132, 0.0379, 0.0084),
        (2, 5, 0.0472, 0.1983, 0.0418),
        (2, 6, 0.0581, 0.1763, 0.0374),
        (4, 6, 0.0119, 0.0414, 0.0090),
        (5, 7, 0.0460, 0.1160, 0.0204),
        (6, 7, 0.0267, 0.0820, 0.0170),
        (6, 8, 0.0120, 0.0420, 0.0090),
        (6, 9, 0.0, 0.2080, 0.0),
        (6, 10, 0.0, 0.5560, 0.0),
        (9, 11, 0.0, 0.2080, 0.0),
        (9, 10, 0.0, 0.1100, 0.0),
        (4, 12, 0.0, 0.2560, 0.0),
        (12, 13, 0.0, 0.1400, 0.0),
        (12, 14, 0.1231, 0.2559, 0.0),
        (12, 15, 0.0662, 0.1304, 0.0),
        (12, 16, 0.0945, 0.1987, 0.0),
        (14, 15, 0.2210, 0.1997, 0.0),
        (16, 17, 0.0524, 0.1923, 0.0),
        (15, 18, 0.1073, 0.2185, 0.0),
        (18, 19, 0.0639, 0.1292, 0.0),
        (19, 20, 0.0340, 0.0680, 0.0),
        (10, 20, 0.0936, 0.2090, 0.0),
        (10, 17, 0.0324, 0.0845, 0.0),
        (10, 21, 0.0348, 0.0749, 0.0),
        (10, 22, 0.0727, 0.1499, 0.0),
        (21, 22, 0.0116, 0.0236, 0.0),
        (15, 23, 0.1000, 0.2020, 0.0),
        (22, 24, 0.1150, 0.1790, 0.0),
        (23, 24, 0.1320, 0.2700, 0.0),
        (24, 25, 0.1885, 0.3292, 0.0),
        (25, 26, 0.2544, 0.3800, 0.0),
        (25, 27, 0.1093, 0.2087, 0.0),
        (28, 27, 0.0, 0.3960, 0.0),
        (27, 29, 0.2198, 0.4153, 0.0),
        (27, 30, 0.3202, 0.6027, 0.0),
        (29, 30, 0.2399, 0.4533, 0.0),
        (8, 28, 0.0636, 0.2000, 0.0428),
        (6, 28, 0.0169, 0.0599, 0.0130),
    ];

    let buses = BUSES
        .iter()
        .map(|&(id, kind, pd, qd, pg, vset, shunt_b)| {
            let mut bus = match kind {
                K_SLACK => Bus::slack(id, vset),
                K_PV => Bus::pv(id, pg / 100.0, vset),
                _ => Bus::pq(id, 0.0, 0.0),
            };
            bus.p_load = pd / 100.0;
            bus.q_load = qd / 100.0;
            bus.shunt_b = shunt_b;
            bus
        })
        .collect();
    let branches = BRANCHES
        .iter()
        .map(|&(u, v, r, x, b)| Branch::new(u, v, r, x, b))
        .collect();
    SinglePhaseNetwork {
        base_mva: 100.0,
        buses,
        branches,
    }
}

/// Balanced three-phase analog of [`two_bus`]: a source feeding one bus
/// over three decoupled x = 0.1 phases, each carrying a 1.0 p.u.
/// constant-power load. Per phase, the solution matches [`two_bus`]
/// rotated to that phase's reference angle.
pub fn feeder2() -> ThreePhaseNetwork {
    let y = diagonal_block(PhaseSet::ABC, Complex64::new(0.0, -10.0));
    let mut load_bus = Bus3::new(2, PhaseSet::ABC);
    for phase in [Phase::A, Phase::B, Phase::C] {
        load_bus = load_bus.with_load(phase, ZipLoad::constant_power(1.0, 0.0));
    }
    ThreePhaseNetwork {
        buses: vec![Bus3::new(1, PhaseSet::ABC), load_bus],
        branches: vec![Branch3::series(1, 2, PhaseSet::ABC, y)],
        source_bus: 1,
        source_vm: 1.0,
    }
}

/// Mutually coupled trunk impedance for a segment of `len` length units.
fn trunk_impedance(len: f64) -> PhaseBlock {
    let zs = Complex64::new(0.001, 0.002) * len;
    let zm = Complex64::new(0.00025, 0.0005) * len;
    let mut z = [[zm; 3]; 3];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = zs;
    }
    z
}

/// A 906-bus radial low-voltage feeder, generated deterministically:
///
/// * bus 1 — the three-phase source;
/// * bus 2 — the three-phase head of the feeder, behind a stiff
///   transformer branch;
/// * buses 3..=851 — three-phase trunk buses, each hung a few positions
///   behind its predecessor with mutually coupled series impedance;
/// * buses 852..=906 — 55 single-phase service drops on distinct trunk
///   buses, phases cycling a/b/c, each carrying a small mixed
///   constant-power / constant-current / constant-impedance load.
///
/// All structural and sizing choices flow from one fixed-seed
/// [`SplitMix64`] stream, so every call returns the identical network.
pub fn lv906() -> ThreePhaseNetwork {
    const TRUNK_LAST: u64 = 851;
    const DROPS: u64 = 55;
    let mut rng = SplitMix64::new(0x906);

    let mut buses = vec![Bus3::new(1, PhaseSet::ABC), Bus3::new(2, PhaseSet::ABC)];
    let mut branches = Vec::new();

    // Transformer: stiff, uncoupled.
    let y_transformer = diagonal_block(
        PhaseSet::ABC,
        Complex64::new(1.0, 0.0) / Complex64::new(0.001, 0.004),
    );
    branches.push(Branch3::series(1, 2, PhaseSet::ABC, y_transformer));

    // Trunk: each bus attaches up to 8 positions back, segment length 1–3.
    for id in 3..=TRUNK_LAST {
        let back = rng.next_below(8);
        let parent = (id - 1).saturating_sub(back).max(2);
        let len = (1 + rng.next_below(3)) as f64;
        let y = invert_block(&trunk_impedance(len), PhaseSet::ABC)
            .expect("trunk impedance blocks are invertible");
        branches.push(Branch3::series(parent, id, PhaseSet::ABC, y));
        buses.push(Bus3::new(id, PhaseSet::ABC));
    }

    // Service drops on distinct trunk buses (partial Fisher-Yates pick).
    let trunk_count = TRUNK_LAST - 1; // buses 2..=851
    let mut pool: Vec<u64> = (2..=TRUNK_LAST).collect();
    for k in 0..DROPS {
        let t = k as usize;
        let j = t + rng.next_below(trunk_count - k) as usize;
        pool.swap(t, j);
        let attach = pool[t];
        let id = 852 + k;
        let phase = match k % 3 {
            0 => Phase::A,
            1 => Phase::B,
            _ => Phase::C,
        };
        let len = (1 + rng.next_below(2)) as f64;
        let z = Complex64::new(0.004, 0.002) * len;
        let mut y = [[Complex64::new(0.0, 0.0); 3]; 3];
        y[phase.offset()][phase.offset()] = Complex64::new(1.0, 0.0) / z;
        branches.push(Branch3::series(attach, id, PhaseSet::single(phase), y));

        let s = (1 + rng.next_below(3)) as f64 * 0.001;
        let load = ZipLoad {
            p_p: 0.4 * s,
            p_i: 0.3 * s,
            p_z: 0.3 * s,
            q_p: 0.3 * 0.4 * s,
            q_i: 0.3 * 0.3 * s,
            q_z: 0.3 * 0.3 * s,
        };
        buses.push(Bus3::new(id, PhaseSet::single(phase)).with_load(phase, load));
    }

    ThreePhaseNetwork {
        buses,
        branches,
        source_bus: 1,
        source_vm: 1.0,
    }
}
