//! Single-phase (positive-sequence) network model and admittance-matrix
//! construction.
//!
//! All quantities are per-unit on the network's MVA base. Buses carry loads,
//! optional generation, and shunt admittance to ground; branches carry a
//! series impedance and total line-charging susceptance split half per end
//! (the standard pi model).

use std::collections::HashMap;

use num_complex::Complex64;

use gridflow_sparse::SparseMatrix;

use crate::error::{ModelError, ValidationIssue};

/// Role of a bus in the power-flow formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    /// Reference bus: fixed voltage magnitude and angle, absorbs the
    /// system power imbalance.
    Slack,
    /// Generator bus: fixed active injection and voltage magnitude.
    Pv,
    /// Load bus: fixed active and reactive injection.
    Pq,
}

/// One network node.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// Stable identifier used by branches and case files.
    pub id: u64,
    pub kind: BusKind,
    /// Active / reactive load drawn at the bus (per-unit).
    pub p_load: f64,
    pub q_load: f64,
    /// Active generation injected at the bus (per-unit; meaningful for
    /// PV and slack buses).
    pub p_gen: f64,
    /// Voltage magnitude setpoint (per-unit; binding for slack and PV).
    pub v_setpoint: f64,
    /// Shunt admittance to ground (per-unit): conductance and susceptance.
    pub shunt_g: f64,
    pub shunt_b: f64,
}

impl Bus {
    /// A PQ load bus with no generation, shunt, or setpoint.
    pub fn pq(id: u64, p_load: f64, q_load: f64) -> Self {
        Bus {
            id,
            kind: BusKind::Pq,
            p_load,
            q_load,
            p_gen: 0.0,
            v_setpoint: 1.0,
            shunt_g: 0.0,
            shunt_b: 0.0,
        }
    }

    /// A slack bus pinned at `v_setpoint`.
    pub fn slack(id: u64, v_setpoint: f64) -> Self {
        Bus {
            id,
            kind: BusKind::Slack,
            p_load: 0.0,
            q_load: 0.0,
            p_gen: 0.0,
            v_setpoint,
            shunt_g: 0.0,
            shunt_b: 0.0,
        }
    }

    /// A PV generator bus with active injection `p_gen` at magnitude
    /// `v_setpoint`.
    pub fn pv(id: u64, p_gen: f64, v_setpoint: f64) -> Self {
        Bus {
            id,
            kind: BusKind::Pv,
            p_load: 0.0,
            q_load: 0.0,
            p_gen,
            v_setpoint,
            shunt_g: 0.0,
            shunt_b: 0.0,
        }
    }
}

/// A line or transformer between two buses (pi model).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: u64,
    pub to: u64,
    /// Series resistance and reactance (per-unit). `r^2 + x^2` must be
    /// nonzero.
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance (per-unit), contributing `b/2` to
    /// each endpoint's shunt.
    pub b_charging: f64,
}

impl Branch {
    pub fn new(from: u64, to: u64, r: f64, x: f64, b_charging: f64) -> Self {
        Branch {
            from,
            to,
            r,
            x,
            b_charging,
        }
    }

    /// Series admittance `1 / (r + jx)`.
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x)
    }
}

/// A complete single-phase network.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePhaseNetwork {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

/// Per-bus voltage magnitudes (per-unit) and angles (radians), indexed by
/// bus position.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageState {
    pub magnitude: Vec<f64>,
    pub angle: Vec<f64>,
}

impl VoltageState {
    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }

    /// Complex phasor of bus `i`.
    pub fn phasor(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.magnitude[i], self.angle[i])
    }

    /// All phasors, in bus order.
    pub fn phasors(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.phasor(i)).collect()
    }
}

impl SinglePhaseNetwork {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Maps bus ids to positions, rejecting duplicates.
    pub fn bus_index(&self) -> Result<HashMap<u64, usize>, ModelError> {
        let mut map = HashMap::with_capacity(self.buses.len());
        for (pos, bus) in self.buses.iter().enumerate() {
            if map.insert(bus.id, pos).is_some() {
                return Err(ModelError::Invalid(vec![ValidationIssue::DuplicateBusId {
                    id: bus.id,
                }]));
            }
        }
        Ok(map)
    }

    /// Position of the slack bus.
    pub fn slack_position(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusKind::Slack)
    }

    /// Flat-start profile: PQ magnitudes 1.0, slack/PV magnitudes at their
    /// setpoints, all angles zero.
    pub fn flat_start(&self) -> VoltageState {
        let magnitude = self
            .buses
            .iter()
            .map(|b| match b.kind {
                BusKind::Pq => 1.0,
                BusKind::Slack | BusKind::Pv => b.v_setpoint,
            })
            .collect();
        VoltageState {
            magnitude,
            angle: vec![0.0; self.buses.len()],
        }
    }
}

/// Builds the bus admittance matrix.
///
/// Diagonal entries sum incident branch series admittances, half the
/// line-charging susceptance per incident end, and the bus shunt; each
/// off-diagonal entry is minus the series admittance of the connecting
/// branch (parallel branches sum). The result is numerically symmetric:
/// the (i, j) and (j, i) accumulations see the same addends in the same
/// order.
pub fn build_ybus(net: &SinglePhaseNetwork) -> Result<SparseMatrix<Complex64>, ModelError> {
    let index = net.bus_index()?;
    let n = net.buses.len();
    let mut triplets: Vec<(usize, usize, Complex64)> =
        Vec::with_capacity(4 * net.branches.len() + n);

    for (pos, bus) in net.buses.iter().enumerate() {
        let shunt = Complex64::new(bus.shunt_g, bus.shunt_b);
        triplets.push((pos, pos, shunt));
    }
    for (bidx, branch) in net.branches.iter().enumerate() {
        let i = *index
            .get(&branch.from)
            .ok_or(ModelError::UnknownBus { id: branch.from })?;
        let j = *index
            .get(&branch.to)
            .ok_or(ModelError::UnknownBus { id: branch.to })?;
        if branch.r == 0.0 && branch.x == 0.0 {
            return Err(ModelError::Invalid(vec![ValidationIssue::ZeroImpedance {
                branch: bidx,
            }]));
        }
        if i == j {
            return Err(ModelError::Invalid(vec![ValidationIssue::SelfLoop {
                branch: bidx,
                id: branch.from,
            }]));
        }
        let y = branch.series_admittance();
        let half_charge = Complex64::new(0.0, branch.b_charging / 2.0);
        triplets.push((i, i, y + half_charge));
        triplets.push((j, j, y + half_charge));
        triplets.push((i, j, -y));
        triplets.push((j, i, -y));
    }

    Ok(SparseMatrix::from_triplets(n, n, &triplets)?)
}

/// Checks structural network health; an empty report means valid.
///
/// Reported defects: slack-bus count other than one, duplicate bus ids,
/// branch endpoints referencing unknown buses, self-loops, zero series
/// impedance, non-positive slack/PV setpoints, non-finite numeric fields,
/// and a disconnected bus graph.
pub fn validate_network(net: &SinglePhaseNetwork) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();

    let slack_count = net
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Slack)
        .count();
    if slack_count != 1 {
        issues.push(ValidationIssue::SlackCount { found: slack_count });
    }

    let mut index: HashMap<u64, usize> = HashMap::with_capacity(net.buses.len());
    for (pos, bus) in net.buses.iter().enumerate() {
        if index.insert(bus.id, pos).is_some() {
            issues.push(ValidationIssue::DuplicateBusId { id: bus.id });
        }
        let fields = [
            bus.p_load,
            bus.q_load,
            bus.p_gen,
            bus.v_setpoint,
            bus.shunt_g,
            bus.shunt_b,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            issues.push(ValidationIssue::NonFiniteValue { id: bus.id });
        }
        if matches!(bus.kind, BusKind::Slack | BusKind::Pv) && bus.v_setpoint <= 0.0 {
            issues.push(ValidationIssue::BadSetpoint { id: bus.id });
        }
    }

    // Adjacency over bus positions for the connectivity check.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); net.buses.len()];
    for (bidx, branch) in net.branches.iter().enumerate() {
        let from = index.get(&branch.from).copied();
        let to = index.get(&branch.to).copied();
        if from.is_none() {
            issues.push(ValidationIssue::DanglingEndpoint {
                branch: bidx,
                id: branch.from,
            });
        }
        if to.is_none() {
            issues.push(ValidationIssue::DanglingEndpoint {
                branch: bidx,
                id: branch.to,
            });
        }
        if branch.r == 0.0 && branch.x == 0.0 {
            issues.push(ValidationIssue::ZeroImpedance { branch: bidx });
        }
        if !(branch.r.is_finite() && branch.x.is_finite() && branch.b_charging.is_finite()) {
            issues.push(ValidationIssue::NonFiniteValue { id: branch.from });
        }
        match (from, to) {
            (Some(i), Some(j)) if i == j => {
                issues.push(ValidationIssue::SelfLoop {
                    branch: bidx,
                    id: branch.from,
                });
            }
            (Some(i), Some(j)) => {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
            _ => {}
        }
    }

    if net.buses.len() > 1 {
        let components = count_components(&adjacency);
        if components != 1 {
            issues.push(ValidationIssue::Disconnected { components });
        }
    }

    issues
}

fn count_components(adjacency: &[Vec<usize>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    components
}
