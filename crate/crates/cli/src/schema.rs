//! Versioned JSON case-file schema: strict parsing with JSON-path error
//! locations, and a canonical writer (sorted keys, shortest round-trip
//! floats) so equal cases always serialize to identical bytes.

use crate::error::CliError;
use gridflow_core::{
    validate_network, validate_network3, Branch, Branch3, Bus, Bus3, BusKind, Phase, PhaseBlock,
    PhaseSet, SinglePhaseNetwork, ThreePhaseNetwork, ValidationIssue, ZipLoad,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: &str = "1";
pub const KIND_SINGLE: &str = "single_phase";
pub const KIND_THREE: &str = "three_phase";

/// Provenance of a synthesized case, embedded in its metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRecord {
    /// Name of the case this one was grown from.
    pub base: String,
    /// `"blocks"` (transmission) or `"replicas"` (feeder).
    pub mode: String,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links_per_adjacent_pair: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ring: bool,
}

/// Case metadata carried alongside the network payload.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseMeta {
    pub name: String,
    pub source: Option<String>,
    pub synth: Option<SynthRecord>,
}

impl CaseMeta {
    pub fn named(name: &str) -> Self {
        CaseMeta {
            name: name.to_string(),
            source: None,
            synth: None,
        }
    }
}

/// A parsed case file: metadata plus one of the two network payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum CaseFile {
    SinglePhase {
        meta: CaseMeta,
        network: SinglePhaseNetwork,
    },
    ThreePhase {
        meta: CaseMeta,
        network: ThreePhaseNetwork,
    },
}

impl CaseFile {
    pub fn meta(&self) -> &CaseMeta {
        match self {
            CaseFile::SinglePhase { meta, .. } | CaseFile::ThreePhase { meta, .. } => meta,
        }
    }

    pub fn name(&self) -> &str {
        &self.meta().name
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CaseFile::SinglePhase { .. } => KIND_SINGLE,
            CaseFile::ThreePhase { .. } => KIND_THREE,
        }
    }

    pub fn n_buses(&self) -> usize {
        match self {
            CaseFile::SinglePhase { network, .. } => network.buses.len(),
            CaseFile::ThreePhase { network, .. } => network.buses.len(),
        }
    }
}

// ---------------------------------------------------------------------------
// On-disk records
// ---------------------------------------------------------------------------

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct HeaderProbe {
    #[serde(default)]
    format_version: Option<String>,
    #[serde(default)]
    kind: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BusKindRecord {
    Slack,
    Pv,
    Pq,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: u64,
    kind: BusKindRecord,
    #[serde(default, skip_serializing_if = "is_zero")]
    p_load: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    q_load: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    p_gen: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    v_setpoint: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    shunt_g: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    shunt_b: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchRecord {
    from: u64,
    to: u64,
    #[serde(default, skip_serializing_if = "is_zero")]
    r: f64,
    x: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    b_charging: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SingleCaseRecord {
    format_version: String,
    kind: String,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synth: Option<SynthRecord>,
    base_mva: f64,
    buses: Vec<BusRecord>,
    branches: Vec<BranchRecord>,
}

/// Complex number on disk: `[re, im]`.
type PairRecord = [f64; 2];
/// 3×3 admittance block on disk, row-major, slots ordered a, b, c.
type BlockRecord = [[PairRecord; 3]; 3];

fn block_is_zero(b: &BlockRecord) -> bool {
    b.iter().flatten().flatten().all(|v| *v == 0.0)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadRecord {
    phase: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    p_p: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    p_i: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    p_z: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    q_p: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    q_i: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    q_z: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bus3Record {
    id: u64,
    phases: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    loads: Vec<LoadRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Branch3Record {
    from: u64,
    to: u64,
    phases: String,
    y_series: BlockRecord,
    #[serde(default, skip_serializing_if = "block_is_zero")]
    y_shunt_from: BlockRecord,
    #[serde(default, skip_serializing_if = "block_is_zero")]
    y_shunt_to: BlockRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThreeCaseRecord {
    format_version: String,
    kind: String,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synth: Option<SynthRecord>,
    source_bus: u64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    source_vm: f64,
    buses: Vec<Bus3Record>,
    branches: Vec<Branch3Record>,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Deserializes with JSON-path context on every schema violation and
/// line/column on syntax errors; rejects trailing content.
fn strict_parse<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        if path == "." {
            CliError::Input(format!("case file rejected: {inner}"))
        } else {
            CliError::Input(format!("case file rejected at `{path}`: {inner}"))
        }
    })?;
    de.end()
        .map_err(|err| CliError::Input(format!("trailing content after the case object: {err}")))?;
    Ok(value)
}

fn parse_phase_letter(s: &str, path: &str) -> Result<Phase, CliError> {
    match s {
        "a" => Ok(Phase::A),
        "b" => Ok(Phase::B),
        "c" => Ok(Phase::C),
        other => Err(CliError::Input(format!(
            "case file rejected at `{path}`: phase must be one of \"a\", \"b\", \"c\", got \"{other}\""
        ))),
    }
}

fn parse_phase_set(s: &str, path: &str) -> Result<PhaseSet, CliError> {
    if s.is_empty() {
        return Err(CliError::Input(format!(
            "case file rejected at `{path}`: phases must list at least one of a, b, c"
        )));
    }
    let mut set = PhaseSet::EMPTY;
    for ch in s.chars() {
        let phase = parse_phase_letter(&ch.to_string(), path)?;
        if set.contains(phase) {
            return Err(CliError::Input(format!(
                "case file rejected at `{path}`: phase \"{ch}\" listed twice"
            )));
        }
        set = set.with(phase);
    }
    Ok(set)
}

/// Parses and fully validates a case file.
pub fn parse_case(text: &str) -> Result<CaseFile, CliError> {
    let probe: HeaderProbe = strict_parse(text)?;
    let version = probe
        .format_version
        .ok_or_else(|| CliError::Input("case file rejected: missing `format_version`".into()))?;
    if version != FORMAT_VERSION {
        return Err(CliError::Input(format!(
            "case file rejected at `format_version`: expected \"{FORMAT_VERSION}\", got \"{version}\""
        )));
    }
    let kind = probe
        .kind
        .ok_or_else(|| CliError::Input("case file rejected: missing `kind`".into()))?;
    match kind.as_str() {
        KIND_SINGLE => {
            let record: SingleCaseRecord = strict_parse(text)?;
            single_from_record(record)
        }
        KIND_THREE => {
            let record: ThreeCaseRecord = strict_parse(text)?;
            three_from_record(record)
        }
        other => Err(CliError::Input(format!(
            "case file rejected at `kind`: expected \"{KIND_SINGLE}\" or \"{KIND_THREE}\", got \"{other}\""
        ))),
    }
}

fn single_from_record(record: SingleCaseRecord) -> Result<CaseFile, CliError> {
    if !(record.base_mva.is_finite() && record.base_mva > 0.0) {
        return Err(CliError::Input(format!(
            "case file rejected at `base_mva`: must be positive, got {}",
            record.base_mva
        )));
    }
    let buses = record
        .buses
        .iter()
        .map(|b| Bus {
            id: b.id,
            kind: match b.kind {
                BusKindRecord::Slack => BusKind::Slack,
                BusKindRecord::Pv => BusKind::Pv,
                BusKindRecord::Pq => BusKind::Pq,
            },
            p_load: b.p_load,
            q_load: b.q_load,
            p_gen: b.p_gen,
            v_setpoint: b.v_setpoint,
            shunt_g: b.shunt_g,
            shunt_b: b.shunt_b,
        })
        .collect();
    let branches = record
        .branches
        .iter()
        .map(|b| Branch::new(b.from, b.to, b.r, b.x, b.b_charging))
        .collect();
    let network = SinglePhaseNetwork {
        base_mva: record.base_mva,
        buses,
        branches,
    };
    let issues = validate_network(&network);
    if !issues.is_empty() {
        return Err(CliError::Input(report_issues(&issues, |issue| {
            single_issue_path(&network, issue)
        })));
    }
    Ok(CaseFile::SinglePhase {
        meta: CaseMeta {
            name: record.name,
            source: record.source,
            synth: record.synth,
        },
        network,
    })
}

fn block_from_record(rec: &BlockRecord) -> PhaseBlock {
    let mut block = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (i, row) in rec.iter().enumerate() {
        for (j, pair) in row.iter().enumerate() {
            block[i][j] = Complex64::new(pair[0], pair[1]);
        }
    }
    block
}

fn three_from_record(record: ThreeCaseRecord) -> Result<CaseFile, CliError> {
    let mut buses = Vec::with_capacity(record.buses.len());
    for (i, b) in record.buses.iter().enumerate() {
        let phases = parse_phase_set(&b.phases, &format!("buses[{i}].phases"))?;
        let mut bus = Bus3::new(b.id, phases);
        for (j, load) in b.loads.iter().enumerate() {
            let path = format!("buses[{i}].loads[{j}].phase");
            let phase = parse_phase_letter(&load.phase, &path)?;
            if !bus.load(phase).is_zero() {
                return Err(CliError::Input(format!(
                    "case file rejected at `{path}`: phase \"{}\" listed twice",
                    load.phase
                )));
            }
            bus = bus.with_load(
                phase,
                ZipLoad {
                    p_p: load.p_p,
                    p_i: load.p_i,
                    p_z: load.p_z,
                    q_p: load.q_p,
                    q_i: load.q_i,
                    q_z: load.q_z,
                },
            );
        }
        buses.push(bus);
    }
    let mut branches = Vec::with_capacity(record.branches.len());
    for (i, b) in record.branches.iter().enumerate() {
        let phases = parse_phase_set(&b.phases, &format!("branches[{i}].phases"))?;
        branches.push(Branch3 {
            from: b.from,
            to: b.to,
            phases,
            y_series: block_from_record(&b.y_series),
            y_shunt_from: block_from_record(&b.y_shunt_from),
            y_shunt_to: block_from_record(&b.y_shunt_to),
        });
    }
    let network = ThreePhaseNetwork {
        buses,
        branches,
        source_bus: record.source_bus,
        source_vm: record.source_vm,
    };
    let issues = validate_network3(&network);
    if !issues.is_empty() {
        return Err(CliError::Input(report_issues(&issues, |issue| {
            three_issue_path(&network, issue)
        })));
    }
    Ok(CaseFile::ThreePhase {
        meta: CaseMeta {
            name: record.name,
            source: record.source,
            synth: record.synth,
        },
        network,
    })
}

/// Renders semantic validation failures, each prefixed with the JSON path
/// of the offending element.
fn report_issues(
    issues: &[ValidationIssue],
    path_of: impl Fn(&ValidationIssue) -> String,
) -> String {
    const SHOWN: usize = 10;
    let mut lines: Vec<String> = issues
        .iter()
        .take(SHOWN)
        .map(|issue| format!("  `{}`: {issue}", path_of(issue)))
        .collect();
    if issues.len() > SHOWN {
        lines.push(format!("  … and {} more", issues.len() - SHOWN));
    }
    format!(
        "case is not a valid network ({} issue{}):\n{}",
        issues.len(),
        if issues.len() == 1 { "" } else { "s" },
        lines.join("\n")
    )
}

fn single_issue_path(net: &SinglePhaseNetwork, issue: &ValidationIssue) -> String {
    let bus_path = |id: u64| match net.buses.iter().position(|b| b.id == id) {
        Some(i) => format!("buses[{i}]"),
        None => "buses".to_string(),
    };
    match issue {
        ValidationIssue::SlackCount { .. } | ValidationIssue::Disconnected { .. } => {
            "buses".to_string()
        }
        ValidationIssue::DuplicateBusId { id } => bus_path(*id),
        ValidationIssue::BadSetpoint { id } | ValidationIssue::NonFiniteValue { id } => {
            bus_path(*id)
        }
        ValidationIssue::DanglingEndpoint { branch, .. }
        | ValidationIssue::SelfLoop { branch, .. }
        | ValidationIssue::ZeroImpedance { branch } => format!("branches[{branch}]"),
        // Remaining variants only arise from three-phase validation.
        _ => String::new(),
    }
}

fn three_issue_path(net: &ThreePhaseNetwork, issue: &ValidationIssue) -> String {
    let bus_path = |id: u64| match net.buses.iter().position(|b| b.id == id) {
        Some(i) => format!("buses[{i}]"),
        None => "buses".to_string(),
    };
    match issue {
        ValidationIssue::Disconnected { .. } => "buses".to_string(),
        ValidationIssue::MissingSource { .. } => "source_bus".to_string(),
        ValidationIssue::DuplicateBusId { id }
        | ValidationIssue::EmptyPhaseSet { id }
        | ValidationIssue::NonFiniteValue { id }
        | ValidationIssue::LoadOnAbsentPhase { id, .. }
        | ValidationIssue::SourceMissingPhases { id } => bus_path(*id),
        // Three-phase setpoint problems can only be the source magnitude.
        ValidationIssue::BadSetpoint { .. } => "source_vm".to_string(),
        ValidationIssue::DanglingEndpoint { branch, .. }
        | ValidationIssue::SelfLoop { branch, .. }
        | ValidationIssue::ZeroImpedance { branch }
        | ValidationIssue::PhaseNotAtEndpoint { branch, .. }
        | ValidationIssue::AdmittanceOutsidePhases { branch }
        | ValidationIssue::SingularSeriesBlock { branch } => format!("branches[{branch}]"),
        ValidationIssue::SlackCount { .. } => "buses".to_string(),
    }
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

/// Serializes any value to canonical JSON: keys sorted at every level,
/// floats in shortest round-trip form, two-space indent, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let tree = serde_json::to_value(value)
        .map_err(|e| CliError::Internal(format!("cannot serialize: {e}")))?;
    let mut text = serde_json::to_string_pretty(&tree)?;
    text.push('\n');
    Ok(text)
}

fn block_to_record(block: &PhaseBlock) -> BlockRecord {
    let mut rec = [[[0.0; 2]; 3]; 3];
    for (i, row) in block.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            rec[i][j] = [v.re, v.im];
        }
    }
    rec
}

/// Writes a case in canonical form; `parse_case(write_case(c)) == c`.
pub fn write_case(case: &CaseFile) -> Result<String, CliError> {
    match case {
        CaseFile::SinglePhase { meta, network } => {
            let record = SingleCaseRecord {
                format_version: FORMAT_VERSION.to_string(),
                kind: KIND_SINGLE.to_string(),
                name: meta.name.clone(),
                source: meta.source.clone(),
                synth: meta.synth.clone(),
                base_mva: network.base_mva,
                buses: network
                    .buses
                    .iter()
                    .map(|b| BusRecord {
                        id: b.id,
                        kind: match b.kind {
                            BusKind::Slack => BusKindRecord::Slack,
                            BusKind::Pv => BusKindRecord::Pv,
                            BusKind::Pq => BusKindRecord::Pq,
                        },
                        p_load: b.p_load,
                        q_load: b.q_load,
                        p_gen: b.p_gen,
                        v_setpoint: b.v_setpoint,
                        shunt_g: b.shunt_g,
                        shunt_b: b.shunt_b,
                    })
                    .collect(),
                branches: network
                    .branches
                    .iter()
                    .map(|b| BranchRecord {
                        from: b.from,
                        to: b.to,
                        r: b.r,
                        x: b.x,
                        b_charging: b.b_charging,
                    })
                    .collect(),
            };
            canonical_json(&record)
        }
        CaseFile::ThreePhase { meta, network } => {
            let record = ThreeCaseRecord {
                format_version: FORMAT_VERSION.to_string(),
                kind: KIND_THREE.to_string(),
                name: meta.name.clone(),
                source: meta.source.clone(),
                synth: meta.synth.clone(),
                source_bus: network.source_bus,
                source_vm: network.source_vm,
                buses: network
                    .buses
                    .iter()
                    .map(|b| Bus3Record {
                        id: b.id,
                        phases: b.phases.to_string(),
                        loads: b
                            .phases
                            .iter()
                            .filter(|&p| !b.load(p).is_zero())
                            .map(|p| {
                                let load = b.load(p);
                                LoadRecord {
                                    phase: p.to_string(),
                                    p_p: load.p_p,
                                    p_i: load.p_i,
                                    p_z: load.p_z,
                                    q_p: load.q_p,
                                    q_i: load.q_i,
                                    q_z: load.q_z,
                                }
                            })
                            .collect(),
                    })
                    .collect(),
                branches: network
                    .branches
                    .iter()
                    .map(|b| Branch3Record {
                        from: b.from,
                        to: b.to,
                        phases: b.phases.to_string(),
                        y_series: block_to_record(&b.y_series),
                        y_shunt_from: block_to_record(&b.y_shunt_from),
                        y_shunt_to: block_to_record(&b.y_shunt_to),
                    })
                    .collect(),
            };
            canonical_json(&record)
        }
    }
}
