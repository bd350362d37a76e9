//! Three-phase unbalanced distribution network model.
//!
//! Buses carry a subset of the phases {a, b, c}; branches couple their
//! endpoints through 3×3 complex admittance blocks (mutual terms included);
//! loads follow the ZIP model: constant-power, constant-current, and
//! constant-impedance parts summed as `P(vm) = P_P + P_I·vm + P_Z·vm²`.
//! One source bus (the substation) is held at a fixed voltage on all three
//! phases.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;

use gridflow_sparse::SparseMatrix;

use crate::error::{ModelError, ValidationIssue};

/// One of the three phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

pub const PHASES: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

impl Phase {
    /// Position within a full abc block: a → 0, b → 1, c → 2.
    pub fn offset(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }

    /// Nominal voltage angle (radians): a = 0, b = −2π/3, c = +2π/3.
    ///
    /// This is the universal distribution convention and initializes the
    /// flat start.
    pub fn nominal_angle(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * std::f64::consts::FRAC_PI_3,
            Phase::C => 2.0 * std::f64::consts::FRAC_PI_3,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::A => write!(f, "a"),
            Phase::B => write!(f, "b"),
            Phase::C => write!(f, "c"),
        }
    }
}

/// Subset of {a, b, c} as a 3-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const EMPTY: PhaseSet = PhaseSet(0);
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn single(phase: Phase) -> Self {
        PhaseSet(1 << phase.offset())
    }

    pub fn from_phases(phases: &[Phase]) -> Self {
        let mut mask = 0;
        for p in phases {
            mask |= 1 << p.offset();
        }
        PhaseSet(mask)
    }

    pub fn contains(self, phase: Phase) -> bool {
        self.0 & (1 << phase.offset()) != 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Present phases in (a, b, c) order.
    pub fn iter(self) -> impl Iterator<Item = Phase> {
        PHASES.into_iter().filter(move |p| self.contains(*p))
    }

    pub fn with(self, phase: Phase) -> Self {
        PhaseSet(self.0 | (1 << phase.offset()))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// ZIP load coefficients for one phase (per-unit at unit voltage).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZipLoad {
    pub p_p: f64,
    pub p_i: f64,
    pub p_z: f64,
    pub q_p: f64,
    pub q_i: f64,
    pub q_z: f64,
}

impl ZipLoad {
    pub fn constant_power(p: f64, q: f64) -> Self {
        ZipLoad {
            p_p: p,
            q_p: q,
            ..ZipLoad::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p_p == 0.0
            && self.p_i == 0.0
            && self.p_z == 0.0
            && self.q_p == 0.0
            && self.q_i == 0.0
            && self.q_z == 0.0
    }

    /// Load drawn at voltage magnitude `vm`:
    /// `P = P_P + P_I·vm + P_Z·vm²` and likewise for Q.
    pub fn power(&self, vm: f64) -> (f64, f64) {
        (
            self.p_p + self.p_i * vm + self.p_z * vm * vm,
            self.q_p + self.q_i * vm + self.q_z * vm * vm,
        )
    }

    /// Derivatives `(dP/dvm, dQ/dvm)`.
    pub fn power_derivative(&self, vm: f64) -> (f64, f64) {
        (self.p_i + 2.0 * self.p_z * vm, self.q_i + 2.0 * self.q_z * vm)
    }

    fn all(&self) -> [f64; 6] {
        [self.p_p, self.p_i, self.p_z, self.q_p, self.q_i, self.q_z]
    }
}

/// One three-phase bus: present phases and a ZIP load per phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus3 {
    pub id: u64,
    pub phases: PhaseSet,
    /// Indexed by [`Phase::offset`]; must be zero on absent phases.
    pub loads: [ZipLoad; 3],
}

impl Bus3 {
    pub fn new(id: u64, phases: PhaseSet) -> Self {
        Bus3 {
            id,
            phases,
            loads: [ZipLoad::default(); 3],
        }
    }

    pub fn with_load(mut self, phase: Phase, load: ZipLoad) -> Self {
        self.loads[phase.offset()] = load;
        self
    }

    pub fn load(&self, phase: Phase) -> &ZipLoad {
        &self.loads[phase.offset()]
    }
}

/// 3×3 complex block indexed by phase offsets.
pub type PhaseBlock = [[Complex64; 3]; 3];

pub const ZERO_BLOCK: PhaseBlock = {
    let z = Complex64::new(0.0, 0.0);
    [[z; 3]; 3]
};

/// Diagonal block with the same admittance on each listed phase.
pub fn diagonal_block(phases: PhaseSet, y: Complex64) -> PhaseBlock {
    let mut block = ZERO_BLOCK;
    for p in phases.iter() {
        block[p.offset()][p.offset()] = y;
    }
    block
}

/// Inverts a block restricted to `phases`: slots outside the set stay
/// zero; the sub-block over the set is inverted by Gauss-Jordan with
/// partial pivoting. Returns `None` when that sub-block is singular.
#[allow(clippy::needless_range_loop)] // rows of `a` are aliased pairwise
pub fn invert_block(block: &PhaseBlock, phases: PhaseSet) -> Option<PhaseBlock> {
    let live: Vec<usize> = phases.iter().map(|p| p.offset()).collect();
    let m = live.len();
    if m == 0 {
        return Some(ZERO_BLOCK);
    }
    // Augmented [A | I] over the live sub-block.
    let mut a = vec![vec![Complex64::new(0.0, 0.0); 2 * m]; m];
    let mut scale = 0.0f64;
    for (r, &i) in live.iter().enumerate() {
        for (c, &j) in live.iter().enumerate() {
            a[r][c] = block[i][j];
            scale = scale.max(block[i][j].norm());
        }
        a[r][m + r] = Complex64::new(1.0, 0.0);
    }
    let floor = 1e-12 * scale.max(1.0);
    for col in 0..m {
        let pivot_row = (col..m)
            .max_by(|&p, &q| {
                a[p][col]
                    .norm()
                    .partial_cmp(&a[q][col].norm())
                    .expect("norms are finite")
            })
            .expect("range is non-empty");
        if a[pivot_row][col].norm() < floor {
            return None;
        }
        a.swap(col, pivot_row);
        let pivot = a[col][col];
        for v in a[col].iter_mut() {
            *v /= pivot;
        }
        for row in 0..m {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor.norm() == 0.0 {
                continue;
            }
            for c in 0..2 * m {
                let sub = factor * a[col][c];
                a[row][c] -= sub;
            }
        }
    }
    let mut out = ZERO_BLOCK;
    for (r, &i) in live.iter().enumerate() {
        for (c, &j) in live.iter().enumerate() {
            out[i][j] = a[r][m + c];
        }
    }
    Some(out)
}

/// One three-phase branch: a series admittance block plus optional shunt
/// blocks at each end. Entries outside the branch's phase set must be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch3 {
    pub from: u64,
    pub to: u64,
    pub phases: PhaseSet,
    pub y_series: PhaseBlock,
    pub y_shunt_from: PhaseBlock,
    pub y_shunt_to: PhaseBlock,
}

impl Branch3 {
    pub fn series(from: u64, to: u64, phases: PhaseSet, y_series: PhaseBlock) -> Self {
        Branch3 {
            from,
            to,
            phases,
            y_series,
            y_shunt_from: ZERO_BLOCK,
            y_shunt_to: ZERO_BLOCK,
        }
    }
}

/// A complete three-phase network with one fixed-voltage source bus.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreePhaseNetwork {
    pub buses: Vec<Bus3>,
    pub branches: Vec<Branch3>,
    /// Id of the substation bus whose voltage is pinned.
    pub source_bus: u64,
    /// Pinned source voltage magnitude (per-unit) on every phase.
    pub source_vm: f64,
}

impl ThreePhaseNetwork {
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

    pub fn source_position(&self) -> Result<usize, ModelError> {
        self.buses
            .iter()
            .position(|b| b.id == self.source_bus)
            .ok_or(ModelError::UnknownBus {
                id: self.source_bus,
            })
    }
}

/// Diagnostic flat index of `(bus, phase)` in the all-phases-present
/// layout: `3·(i−1) + φ` with 1-based bus ids mapped through their list
/// position and φ(a) = 1, φ(b) = 2, φ(c) = 3.
///
/// Matrix storage instead uses the compact 0-based indexing of [`NodeMap`]
/// over *present* phases only; this form appears in diagnostics and
/// documentation.
pub fn phase_index(net: &ThreePhaseNetwork, bus_id: u64, phase: Phase) -> Result<u64, ModelError> {
    let index = net.bus_index()?;
    let pos = *index
        .get(&bus_id)
        .ok_or(ModelError::UnknownBus { id: bus_id })?;
    let bus = &net.buses[pos];
    if !bus.phases.contains(phase) {
        return Err(ModelError::AbsentPhase { id: bus_id, phase });
    }
    Ok(3 * (pos as u64) + phase.offset() as u64 + 1)
}

/// Compact indexing of present phase-nodes.
///
/// Nodes are numbered bus by bus (list order), phases in (a, b, c) order
/// within each bus. Equation indices cover non-source buses only, two per
/// node: within a bus block of `m` present phases, rows hold the imaginary
/// current mismatches first (`0..m`) then the real ones (`m..2m`), while
/// columns hold the real voltage corrections first, then the imaginary
/// ones.
#[derive(Debug, Clone)]
pub struct NodeMap {
    /// bus position → first compact node of the bus.
    bus_node_start: Vec<usize>,
    /// bus position → present phases, (a, b, c) order.
    bus_phases: Vec<Vec<Phase>>,
    /// compact node → (bus position, phase).
    node_info: Vec<(usize, Phase)>,
    /// bus position → first equation index of the bus block (non-source
    /// buses only).
    eq_start: Vec<Option<usize>>,
    n_eqs: usize,
    source_pos: usize,
}

impl NodeMap {
    pub fn new(net: &ThreePhaseNetwork) -> Result<Self, ModelError> {
        let source_pos = net.source_position()?;
        let mut bus_node_start = Vec::with_capacity(net.buses.len());
        let mut bus_phases = Vec::with_capacity(net.buses.len());
        let mut node_info = Vec::new();
        for (pos, bus) in net.buses.iter().enumerate() {
            bus_node_start.push(node_info.len());
            let phases: Vec<Phase> = bus.phases.iter().collect();
            for &p in &phases {
                node_info.push((pos, p));
            }
            bus_phases.push(phases);
        }
        let mut eq_start = vec![None; net.buses.len()];
        let mut n_eqs = 0;
        for (pos, phases) in bus_phases.iter().enumerate() {
            if pos == source_pos {
                continue;
            }
            eq_start[pos] = Some(n_eqs);
            n_eqs += 2 * phases.len();
        }
        Ok(NodeMap {
            bus_node_start,
            bus_phases,
            node_info,
            eq_start,
            n_eqs,
            source_pos,
        })
    }

    /// Total present phase-nodes (the Y-bus dimension).
    pub fn n_nodes(&self) -> usize {
        self.node_info.len()
    }

    /// Total equation rows (twice the non-source node count).
    pub fn n_eqs(&self) -> usize {
        self.n_eqs
    }

    pub fn source_position(&self) -> usize {
        self.source_pos
    }

    /// Compact node of `(bus position, phase)`.
    pub fn node(&self, bus_pos: usize, phase: Phase) -> Option<usize> {
        let local = self.bus_phases[bus_pos].iter().position(|&p| p == phase)?;
        Some(self.bus_node_start[bus_pos] + local)
    }

    /// `(bus position, phase)` behind a compact node.
    pub fn node_info(&self, node: usize) -> (usize, Phase) {
        self.node_info[node]
    }

    /// Present phases of a bus, (a, b, c) order.
    pub fn phases_at(&self, bus_pos: usize) -> &[Phase] {
        &self.bus_phases[bus_pos]
    }

    /// Offset of `phase` within its bus block.
    pub fn phase_slot(&self, bus_pos: usize, phase: Phase) -> Option<usize> {
        self.bus_phases[bus_pos].iter().position(|&p| p == phase)
    }

    /// First equation index of a non-source bus block.
    pub fn eq_start(&self, bus_pos: usize) -> Option<usize> {
        self.eq_start[bus_pos]
    }

    /// Row of the imaginary-current mismatch for a node, if it has one.
    pub fn row_im(&self, node: usize) -> Option<usize> {
        let (bus, phase) = self.node_info[node];
        let start = self.eq_start[bus]?;
        Some(start + self.phase_slot(bus, phase).unwrap())
    }

    /// Row of the real-current mismatch for a node, if it has one.
    pub fn row_re(&self, node: usize) -> Option<usize> {
        let (bus, phase) = self.node_info[node];
        let start = self.eq_start[bus]?;
        Some(start + self.bus_phases[bus].len() + self.phase_slot(bus, phase).unwrap())
    }

    /// Column of the real voltage correction for a node, if it has one.
    pub fn col_re(&self, node: usize) -> Option<usize> {
        self.row_im(node)
    }

    /// Column of the imaginary voltage correction for a node, if it has
    /// one.
    pub fn col_im(&self, node: usize) -> Option<usize> {
        self.row_re(node)
    }
}

/// Complex voltages per compact phase-node.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageState3 {
    pub v: Vec<Complex64>,
}

impl VoltageState3 {
    /// Flat start: every node at the source magnitude rotated to its
    /// phase's nominal angle.
    pub fn flat(net: &ThreePhaseNetwork, map: &NodeMap) -> Self {
        let v = (0..map.n_nodes())
            .map(|node| {
                let (_, phase) = map.node_info(node);
                Complex64::from_polar(net.source_vm, phase.nominal_angle())
            })
            .collect();
        VoltageState3 { v }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Builds the three-phase admittance matrix over compact phase-nodes.
///
/// Each branch contributes its series block to both diagonal blocks and
/// minus the series block to both off-diagonal blocks, restricted to the
/// branch's phase set; shunt blocks add to their end's diagonal. Parallel
/// branches sum. The accumulation order is mirrored for (i, j) and (j, i),
/// so symmetric inputs yield an exactly symmetric matrix.
pub fn build_ybus3(net: &ThreePhaseNetwork) -> Result<SparseMatrix<Complex64>, ModelError> {
    let index = net.bus_index()?;
    let map = NodeMap::new(net)?;
    let n = map.n_nodes();
    let mut triplets: Vec<(usize, usize, Complex64)> = Vec::new();

    for branch in &net.branches {
        let i = *index
            .get(&branch.from)
            .ok_or(ModelError::UnknownBus { id: branch.from })?;
        let j = *index
            .get(&branch.to)
            .ok_or(ModelError::UnknownBus { id: branch.to })?;
        for s in branch.phases.iter() {
            let ni_s = map
                .node(i, s)
                .ok_or(ModelError::AbsentPhase {
                    id: branch.from,
                    phase: s,
                })?;
            let nj_s = map
                .node(j, s)
                .ok_or(ModelError::AbsentPhase {
                    id: branch.to,
                    phase: s,
                })?;
            for t in branch.phases.iter() {
                let y = branch.y_series[s.offset()][t.offset()];
                let ni_t = map.node(i, t).unwrap();
                let nj_t = map.node(j, t).unwrap();
                if y != Complex64::new(0.0, 0.0) {
                    triplets.push((ni_s, ni_t, y));
                    triplets.push((nj_s, nj_t, y));
                    triplets.push((ni_s, nj_t, -y));
                    triplets.push((nj_s, ni_t, -y));
                }
                let ysh_f = branch.y_shunt_from[s.offset()][t.offset()];
                if ysh_f != Complex64::new(0.0, 0.0) {
                    triplets.push((ni_s, ni_t, ysh_f));
                }
                let ysh_t = branch.y_shunt_to[s.offset()][t.offset()];
                if ysh_t != Complex64::new(0.0, 0.0) {
                    triplets.push((nj_s, nj_t, ysh_t));
                }
            }
        }
    }

    Ok(SparseMatrix::from_triplets(n, n, &triplets)?)
}

/// Checks three-phase structural health; an empty report means valid.
pub fn validate_network3(net: &ThreePhaseNetwork) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::with_capacity(net.buses.len());
    for (pos, bus) in net.buses.iter().enumerate() {
        if index.insert(bus.id, pos).is_some() {
            issues.push(ValidationIssue::DuplicateBusId { id: bus.id });
        }
        if bus.phases.is_empty() {
            issues.push(ValidationIssue::EmptyPhaseSet { id: bus.id });
        }
        for p in PHASES {
            let load = bus.load(p);
            if load.all().iter().any(|v| !v.is_finite()) {
                issues.push(ValidationIssue::NonFiniteValue { id: bus.id });
            }
            if !bus.phases.contains(p) && !load.is_zero() {
                issues.push(ValidationIssue::LoadOnAbsentPhase { id: bus.id, phase: p });
            }
        }
    }

    match index.get(&net.source_bus) {
        None => issues.push(ValidationIssue::MissingSource { id: net.source_bus }),
        Some(&pos) => {
            if net.buses[pos].phases != PhaseSet::ABC {
                issues.push(ValidationIssue::SourceMissingPhases { id: net.source_bus });
            }
        }
    }
    if !(net.source_vm.is_finite() && net.source_vm > 0.0) {
        issues.push(ValidationIssue::BadSetpoint { id: net.source_bus });
    }

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
        for (which, endpoint) in [(from, branch.from), (to, branch.to)] {
            if let Some(pos) = which {
                if !branch.phases.is_subset_of(net.buses[pos].phases) {
                    let missing = branch
                        .phases
                        .iter()
                        .find(|&p| !net.buses[pos].phases.contains(p))
                        .unwrap();
                    issues.push(ValidationIssue::PhaseNotAtEndpoint {
                        branch: bidx,
                        phase: missing,
                        id: endpoint,
                    });
                }
            }
        }
        // Admittance confined to the declared phases.
        let mut outside = false;
        for s in PHASES {
            for t in PHASES {
                let inside = branch.phases.contains(s) && branch.phases.contains(t);
                let zero = Complex64::new(0.0, 0.0);
                let all_zero = branch.y_series[s.offset()][t.offset()] == zero
                    && branch.y_shunt_from[s.offset()][t.offset()] == zero
                    && branch.y_shunt_to[s.offset()][t.offset()] == zero;
                if !inside && !all_zero {
                    outside = true;
                }
            }
        }
        if outside {
            issues.push(ValidationIssue::AdmittanceOutsidePhases { branch: bidx });
        }
        if branch.phases.is_empty() || series_block_singular(branch) {
            issues.push(ValidationIssue::SingularSeriesBlock { branch: bidx });
        }
        if let (Some(i), Some(j)) = (from, to) {
            if i == j {
                issues.push(ValidationIssue::SelfLoop {
                    branch: bidx,
                    id: branch.from,
                });
            } else {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }

    if net.buses.len() > 1 {
        let mut seen = vec![false; net.buses.len()];
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
        if visited != net.buses.len() {
            issues.push(ValidationIssue::Disconnected {
                components: net.buses.len() - visited + 1,
            });
        }
    }

    issues
}

/// True when the series block, restricted to the branch's phases, is
/// numerically singular.
#[allow(clippy::needless_range_loop)] // rows of `a` are aliased pairwise
fn series_block_singular(branch: &Branch3) -> bool {
    let phases: Vec<Phase> = branch.phases.iter().collect();
    let m = phases.len();
    if m == 0 {
        return true;
    }
    let mut a = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    let mut scale = 0.0f64;
    for (r, &s) in phases.iter().enumerate() {
        for (c, &t) in phases.iter().enumerate() {
            a[r][c] = branch.y_series[s.offset()][t.offset()];
            scale = scale.max(a[r][c].norm());
        }
    }
    if scale == 0.0 {
        return true;
    }
    // Gaussian elimination with partial pivoting; a pivot collapsing far
    // below the block's scale marks singularity.
    for k in 0..m {
        let mut best = k;
        for r in (k + 1)..m {
            if a[r][k].norm() > a[best][k].norm() {
                best = r;
            }
        }
        if a[best][k].norm() <= 1e-12 * scale {
            return true;
        }
        a.swap(k, best);
        for r in (k + 1)..m {
            let f = a[r][k] / a[k][k];
            for c in k..m {
                let above = a[k][c];
                a[r][c] -= f * above;
            }
        }
    }
    false
}
