//! Deterministic network synthesis by replication.
//!
//! Transmission networks are replicated into `n` blocks with seeded random
//! inter-block links patterned on existing branches; distribution feeders
//! are replicated behind a shared substation bus with the substation
//! branch proportionally stiffened. Identical inputs produce byte-identical
//! outputs; all randomness flows through [`SplitMix64`].

use crate::error::ModelError;
use crate::rng::SplitMix64;
use crate::single::model::{Branch, BusKind, SinglePhaseNetwork};
use crate::single::newton::{calc_pq, solve_nr, NewtonOptions};
use crate::three::model::{PhaseBlock, ThreePhaseNetwork};

/// Replication parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSpec {
    /// Number of transmission blocks or feeder replica sets (≥ 1).
    pub count: usize,
    /// Inter-block branches per adjacent block pair (transmission only).
    pub links_per_adjacent_pair: usize,
    /// Seed for all sampling decisions.
    pub seed: u64,
    /// Also link the last block back to the first (transmission only).
    pub ring: bool,
}

impl SynthSpec {
    pub fn blocks(count: usize, seed: u64) -> Self {
        SynthSpec {
            count,
            links_per_adjacent_pair: 2,
            seed,
            ring: false,
        }
    }

    pub fn replicas(count: usize) -> Self {
        SynthSpec {
            count,
            links_per_adjacent_pair: 0,
            seed: 0,
            ring: false,
        }
    }
}

/// Requires bus ids to be exactly `1..=n` so block shifts stay collision
/// free.
fn check_contiguous_ids(ids: impl Iterator<Item = u64>, n: usize) -> Result<(), ModelError> {
    let mut seen = vec![false; n];
    for id in ids {
        let ok = id >= 1 && id <= n as u64 && !seen[(id - 1) as usize];
        if !ok {
            return Err(ModelError::BadSynthSpec {
                reason: format!("bus ids must be exactly 1..={n} (got duplicate or out-of-range {id})"),
            });
        }
        seen[(id - 1) as usize] = true;
    }
    Ok(())
}

/// Samples `k` distinct indices below `m` (partial Fisher-Yates over the
/// index list, driven by `rng`).
fn sample_distinct(rng: &mut SplitMix64, m: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    for t in 0..k {
        let j = t + rng.next_below((m - t) as u64) as usize;
        idx.swap(t, j);
    }
    idx.truncate(k);
    idx
}

/// Replicates a transmission network into `spec.count` blocks.
///
/// Block `k` holds the base buses with ids shifted by `k·n`. Block 0 keeps
/// the slack bus; every other block's slack image becomes a PV bus at the
/// same voltage setpoint whose active generation equals the base case's
/// solved slack injection, so each block is internally balanced and the
/// one remaining slack only covers link losses. Adjacent blocks `(k, k+1)`
/// are joined by `links_per_adjacent_pair` branches: sampled base branches
/// `(u, v)` become links from block `k`'s `v`-image to block `k+1`'s
/// `u`-image with the same impedance. With `ring`, the last block links
/// back to block 0 the same way.
pub fn replicate_transmission(
    base: &SinglePhaseNetwork,
    spec: &SynthSpec,
) -> Result<SinglePhaseNetwork, ModelError> {
    if spec.count < 1 {
        return Err(ModelError::BadSynthSpec {
            reason: "block count must be at least 1".into(),
        });
    }
    if spec.links_per_adjacent_pair > base.branches.len() {
        return Err(ModelError::BadSynthSpec {
            reason: format!(
                "cannot sample {} distinct link branches from {} base branches",
                spec.links_per_adjacent_pair,
                base.branches.len()
            ),
        });
    }
    if spec.count == 1 {
        return Ok(base.clone());
    }
    let n = base.buses.len();
    check_contiguous_ids(base.buses.iter().map(|b| b.id), n)?;
    let slack_pos = base.slack_position().ok_or(ModelError::BadSynthSpec {
        reason: "base network has no slack bus".into(),
    })?;

    // Solve the base case once to learn the slack's net injection; the
    // PV images reproduce it so power stays balanced block-locally.
    let base_solution = solve_nr(base, &NewtonOptions::default(), 1)?;
    if !base_solution.converged {
        return Err(ModelError::BadSynthSpec {
            reason: "base case power flow did not converge".into(),
        });
    }
    let ybus = crate::single::model::build_ybus(base)?;
    let (p_injected, _) = calc_pq(&ybus, &base_solution.state)?;
    let slack_gen = p_injected[slack_pos] + base.buses[slack_pos].p_load;

    let shift = n as u64;
    let mut buses = Vec::with_capacity(n * spec.count);
    let mut branches = Vec::with_capacity(base.branches.len() * spec.count);
    for k in 0..spec.count {
        let offset = shift * k as u64;
        for bus in &base.buses {
            let mut clone = bus.clone();
            clone.id += offset;
            if clone.kind == BusKind::Slack && k > 0 {
                clone.kind = BusKind::Pv;
                clone.p_gen = slack_gen;
            }
            buses.push(clone);
        }
        for branch in &base.branches {
            let mut clone = branch.clone();
            clone.from += offset;
            clone.to += offset;
            branches.push(clone);
        }
    }

    let mut rng = SplitMix64::new(spec.seed);
    let mut pairs: Vec<(usize, usize)> = (0..spec.count - 1).map(|k| (k, k + 1)).collect();
    if spec.ring {
        pairs.push((spec.count - 1, 0));
    }
    for (ka, kb) in pairs {
        for idx in sample_distinct(&mut rng, base.branches.len(), spec.links_per_adjacent_pair) {
            let b = &base.branches[idx];
            branches.push(Branch::new(
                b.to + shift * ka as u64,
                b.from + shift * kb as u64,
                b.r,
                b.x,
                b.b_charging,
            ));
        }
    }

    Ok(SinglePhaseNetwork {
        base_mva: base.base_mva,
        buses,
        branches,
    })
}

/// Replicates a radial feeder `spec.count` times behind its source bus.
///
/// Buses after the source (ids `2..=N`) are cloned per replica with ids
/// shifted by `r·(N−1)`; every clone set hangs off the shared source bus 1
/// through its own copy of the substation branch whose series impedance is
/// divided by the replica count (admittance multiplied), keeping the
/// aggregate source drop at base level. The base must be radial: one
/// connected tree.
pub fn replicate_feeder(
    base: &ThreePhaseNetwork,
    spec: &SynthSpec,
) -> Result<ThreePhaseNetwork, ModelError> {
    if spec.count < 1 {
        return Err(ModelError::BadSynthSpec {
            reason: "replica count must be at least 1".into(),
        });
    }
    let n = base.buses.len();
    check_contiguous_ids(base.buses.iter().map(|b| b.id), n)?;
    if base.source_bus != 1 {
        return Err(ModelError::BadSynthSpec {
            reason: format!("feeder replication expects source bus id 1, got {}", base.source_bus),
        });
    }
    check_radial(base)?;
    if spec.count == 1 {
        return Ok(base.clone());
    }

    let shift = (n - 1) as u64;
    let scale = spec.count as f64;
    let mut buses = Vec::with_capacity(1 + (n - 1) * spec.count);
    let source = base
        .buses
        .iter()
        .find(|b| b.id == 1)
        .expect("id check guarantees bus 1");
    buses.push(source.clone());
    for r in 0..spec.count {
        let offset = shift * r as u64;
        for bus in &base.buses {
            if bus.id == 1 {
                continue;
            }
            let mut clone = bus.clone();
            clone.id += offset;
            buses.push(clone);
        }
    }

    let mut branches = Vec::with_capacity(base.branches.len() * spec.count);
    for r in 0..spec.count {
        let offset = shift * r as u64;
        for branch in &base.branches {
            let mut clone = branch.clone();
            let touches_source = branch.from == 1 || branch.to == 1;
            if branch.from != 1 {
                clone.from += offset;
            }
            if branch.to != 1 {
                clone.to += offset;
            }
            if touches_source {
                clone.y_series = scale_block(&clone.y_series, scale);
            }
            branches.push(clone);
        }
    }

    Ok(ThreePhaseNetwork {
        buses,
        branches,
        source_bus: 1,
        source_vm: base.source_vm,
    })
}

fn scale_block(block: &PhaseBlock, factor: f64) -> PhaseBlock {
    let mut out = *block;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= factor;
        }
    }
    out
}

/// A radial feeder is one connected tree over its buses.
fn check_radial(net: &ThreePhaseNetwork) -> Result<(), ModelError> {
    let index = net.bus_index()?;
    let n = net.buses.len();
    if net.branches.len() != n.saturating_sub(1) {
        return Err(ModelError::NotRadial {
            reason: format!(
                "{} branches over {} buses (a tree needs {})",
                net.branches.len(),
                n,
                n.saturating_sub(1)
            ),
        });
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for branch in &net.branches {
        let i = *index
            .get(&branch.from)
            .ok_or(ModelError::UnknownBus { id: branch.from })?;
        let j = *index
            .get(&branch.to)
            .ok_or(ModelError::UnknownBus { id: branch.to })?;
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut visited = 1;
    while let Some(u) = stack.pop() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                visited += 1;
                stack.push(v);
            }
        }
    }
    if visited != n {
        return Err(ModelError::NotRadial {
            reason: "bus graph is not connected".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::single::model::{build_ybus, validate_network};
    use crate::three::cim::{solve_cim, CimOptions};
    use crate::three::model::{diagonal_block, Branch3, Bus3, PhaseSet};
    use num_complex::Complex64;

    #[test]
    fn one_block_is_a_no_op() {
        let base = fixtures::ieee30();
        let out = replicate_transmission(&base, &SynthSpec::blocks(1, 42)).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn two_blocks_double_the_network_plus_links() {
        let base = fixtures::ieee30();
        let spec = SynthSpec::blocks(2, 7);
        let out = replicate_transmission(&base, &spec).unwrap();
        assert_eq!(out.buses.len(), 60);
        assert_eq!(out.branches.len(), 2 * base.branches.len() + 2);
        let slacks = out
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        assert_eq!(slacks, 1);
        assert!(validate_network(&out).is_empty());
        // The second block's slack image turned PV at the same setpoint.
        let image = out.buses.iter().find(|b| b.id == 31).unwrap();
        assert_eq!(image.kind, BusKind::Pv);
        assert!((image.v_setpoint - 1.06).abs() < 1e-12);
        assert!(image.p_gen > 2.0, "slack image generates {}", image.p_gen);
    }

    #[test]
    fn links_mirror_existing_branches_between_adjacent_blocks() {
        let base = fixtures::ieee30();
        let out = replicate_transmission(&base, &SynthSpec::blocks(3, 11)).unwrap();
        let n = base.buses.len() as u64;
        let base_count = 3 * base.branches.len();
        for link in &out.branches[base_count..] {
            // from lives in block k, to in block k+1.
            let kf = (link.from - 1) / n;
            let kt = (link.to - 1) / n;
            assert_eq!(kt, kf + 1, "link {}→{} skips blocks", link.from, link.to);
            // The link copies some base branch's impedance, reversed ends.
            let u = link.to - kt * n;
            let v = link.from - kf * n;
            assert!(base
                .branches
                .iter()
                .any(|b| b.from == u && b.to == v && b.r == link.r && b.x == link.x));
        }
    }

    #[test]
    fn same_seed_reproduces_and_different_seeds_differ() {
        let base = fixtures::ieee30();
        let a = replicate_transmission(&base, &SynthSpec::blocks(4, 99)).unwrap();
        let b = replicate_transmission(&base, &SynthSpec::blocks(4, 99)).unwrap();
        assert_eq!(a, b);
        let c = replicate_transmission(&base, &SynthSpec::blocks(4, 100)).unwrap();
        assert_ne!(a.branches, c.branches);
    }

    #[test]
    fn oversized_link_request_is_rejected() {
        let base = fixtures::two_bus();
        let mut spec = SynthSpec::blocks(2, 1);
        spec.links_per_adjacent_pair = 5;
        assert!(matches!(
            replicate_transmission(&base, &spec),
            Err(ModelError::BadSynthSpec { .. })
        ));
    }

    #[test]
    fn replicated_cases_stay_solvable() {
        let base = fixtures::ieee30();
        for blocks in [1usize, 2, 4, 8] {
            let net = replicate_transmission(&base, &SynthSpec::blocks(blocks, 3)).unwrap();
            let sol = crate::single::newton::solve_nr(&net, &NewtonOptions::default(), 1).unwrap();
            assert!(sol.converged, "{blocks} blocks failed to converge");
            assert!(sol.iterations <= 10);
        }
    }

    #[test]
    fn ring_option_adds_a_closing_pair() {
        let base = fixtures::ieee30();
        let mut spec = SynthSpec::blocks(3, 5);
        spec.ring = true;
        let out = replicate_transmission(&base, &spec).unwrap();
        assert_eq!(out.branches.len(), 3 * base.branches.len() + 3 * 2);
        let n = base.buses.len() as u64;
        let closing = &out.branches[out.branches.len() - 2..];
        for link in closing {
            assert!((link.from - 1) / n == 2 && (link.to - 1) / n == 0);
        }
    }

    #[test]
    fn interior_block_keeps_the_base_admittance_away_from_links() {
        let base = fixtures::ieee30();
        let spec = SynthSpec::blocks(4, 21);
        let out = replicate_transmission(&base, &spec).unwrap();
        let n = base.buses.len();
        let y_base = build_ybus(&base).unwrap();
        let y_out = build_ybus(&out).unwrap();
        // Link endpoints touching block 2 (positions 2n..3n).
        let mut touched = vec![false; n];
        for link in &out.branches[4 * base.branches.len()..] {
            for id in [link.from, link.to] {
                let pos = (id - 1) as usize;
                if (2 * n..3 * n).contains(&pos) {
                    touched[pos - 2 * n] = true;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if touched[i] || touched[j] {
                    continue;
                }
                let a = y_base.get(i, j);
                let b = y_out.get(2 * n + i, 2 * n + j);
                assert!((a - b).norm() < 1e-15, "block entry ({i},{j}) drifted");
            }
        }
    }

    fn tiny_feeder() -> ThreePhaseNetwork {
        let y = diagonal_block(PhaseSet::ABC, Complex64::new(5.0, -15.0));
        ThreePhaseNetwork {
            buses: vec![
                Bus3::new(1, PhaseSet::ABC),
                Bus3::new(2, PhaseSet::ABC),
                Bus3::new(3, PhaseSet::ABC),
                Bus3::new(4, PhaseSet::ABC),
            ],
            branches: vec![
                Branch3::series(1, 2, PhaseSet::ABC, y),
                Branch3::series(2, 3, PhaseSet::ABC, y),
                Branch3::series(2, 4, PhaseSet::ABC, y),
            ],
            source_bus: 1,
            source_vm: 1.0,
        }
    }

    #[test]
    fn one_replica_is_a_no_op() {
        let base = tiny_feeder();
        let out = replicate_feeder(&base, &SynthSpec::replicas(1)).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn replicas_share_the_source_and_count_correctly() {
        let base = tiny_feeder();
        let out = replicate_feeder(&base, &SynthSpec::replicas(3)).unwrap();
        assert_eq!(out.buses.len(), 1 + 3 * 3);
        assert_eq!(out.branches.len(), 9);
        // Substation branches: one per replica, scaled by 3.
        let subs: Vec<_> = out.branches.iter().filter(|b| b.from == 1 || b.to == 1).collect();
        assert_eq!(subs.len(), 3);
        for b in subs {
            assert!(
                (b.y_series[0][0] - Complex64::new(15.0, -45.0)).norm() < 1e-12,
                "substation admittance not stiffened: {:?}",
                b.y_series[0][0]
            );
        }
        // Interior branches keep their impedance.
        let interior = out
            .branches
            .iter()
            .filter(|b| b.from != 1 && b.to != 1)
            .count();
        assert_eq!(interior, 6);
    }

    #[test]
    fn lv_feeder_replication_counts_match() {
        let base = fixtures::lv906();
        let out = replicate_feeder(&base, &SynthSpec::replicas(2)).unwrap();
        assert_eq!(out.buses.len(), 1811);
        assert_eq!(out.branches.len(), 2 * base.branches.len());
    }

    #[test]
    fn zero_load_replicated_feeder_solves_flat() {
        let base = tiny_feeder();
        let out = replicate_feeder(&base, &SynthSpec::replicas(2)).unwrap();
        let sol = solve_cim(&out, &CimOptions::default(), 1).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 1);
    }

    #[test]
    fn non_radial_base_is_rejected() {
        let mut base = tiny_feeder();
        base.branches.push(Branch3::series(
            3,
            4,
            PhaseSet::ABC,
            diagonal_block(PhaseSet::ABC, Complex64::new(5.0, -15.0)),
        ));
        assert!(matches!(
            replicate_feeder(&base, &SynthSpec::replicas(2)),
            Err(ModelError::NotRadial { .. })
        ));
    }

    #[test]
    fn replica_determinism_is_exact() {
        let base = fixtures::lv906();
        let a = replicate_feeder(&base, &SynthSpec::replicas(2)).unwrap();
        let b = replicate_feeder(&base, &SynthSpec::replicas(2)).unwrap();
        assert_eq!(a, b);
    }
}
