//! Radial three-phase network model.
//!
//! Buses and lines carry 1-based contiguous ids (`bus.id == index + 1`), which
//! keeps the JSON files readable and lets every lookup be an index.

mod admittance;
mod split;

pub use admittance::{
    build_admittance, build_branch_admittance, grounding_admittance, kron_reduce,
    sequence_to_phase, source_admittance, source_emf, AdmittanceMatrix, SOLID_GROUND_ADMITTANCE,
};
pub use split::split_line;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BusId = usize;
pub type LineId = usize;

/// Schema tag written into every network file.
pub const NETWORK_FORMAT: &str = "gridfault-net/1";

/// Zero-sequence reactance of a Petersen coil, either given or tuned to the
/// network's zero-sequence capacitance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoilReactance {
    Auto,
    Ohms(f64),
}

impl Serialize for CoilReactance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CoilReactance::Auto => s.serialize_str("auto"),
            CoilReactance::Ohms(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for CoilReactance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(CoilReactance::Ohms(x)),
            Raw::Text(t) if t == "auto" => Ok(CoilReactance::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a reactance in ohms or \"auto\", got {t:?}"
            ))),
        }
    }
}

/// Neutral treatment at a bus.
///
/// `Petersen.reactance` is the zero-sequence reactance of the grounding
/// path, so the shunt it adds is `1/(j X)` in the zero sequence. The optional
/// `resistance` is a parallel loss resistance in the same sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Grounding {
    #[default]
    None,
    Solid,
    Petersen {
        reactance: CoilReactance,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resistance: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    #[serde(default)]
    pub grounding: Grounding,
    #[serde(default)]
    pub is_slack: bool,
    /// Set on fictitious terminal buses added to split a cluster; names the
    /// real bus whose voltage meter feeds this bus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fictitious_of: Option<BusId>,
}

impl Bus {
    pub fn new(id: BusId) -> Self {
        Bus {
            id,
            grounding: Grounding::None,
            is_slack: false,
            fictitious_of: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LineStatus {
    #[default]
    Closed,
    NormallyOpen,
}

fn half() -> f64 {
    0.5
}

fn is_half(x: &f64) -> bool {
    *x == 0.5
}

/// A transposed three-phase line in pi form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: LineId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Positive (= negative) sequence series impedance, ohms.
    pub z1: Complex64,
    /// Zero sequence series impedance, ohms.
    pub z0: Complex64,
    /// Total positive-sequence charging susceptance, siemens.
    #[serde(default)]
    pub shunt_b1: f64,
    /// Total zero-sequence charging susceptance, siemens.
    #[serde(default)]
    pub shunt_b0: f64,
    #[serde(default)]
    pub status: LineStatus,
    /// Share of the charging placed at `from_bus`; the rest sits at `to_bus`.
    #[serde(default = "half", skip_serializing_if = "is_half")]
    pub charging_at_from: f64,
}

impl Line {
    pub fn new(id: LineId, from_bus: BusId, to_bus: BusId, z1: Complex64, z0: Complex64) -> Self {
        Line {
            id,
            from_bus,
            to_bus,
            z1,
            z0,
            shunt_b1: 0.0,
            shunt_b0: 0.0,
            status: LineStatus::Closed,
            charging_at_from: 0.5,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.status == LineStatus::Closed
    }

    pub fn other_end(&self, bus: BusId) -> Option<BusId> {
        if bus == self.from_bus {
            Some(self.to_bus)
        } else if bus == self.to_bus {
            Some(self.from_bus)
        } else {
            None
        }
    }
}

/// Per-unit bases. `v_base` is the nominal line-to-line voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Base {
    pub s_base: f64,
    pub v_base: f64,
    pub frequency: f64,
}

impl Base {
    pub fn phase_voltage(&self) -> f64 {
        self.v_base / 3f64.sqrt()
    }
}

impl Default for Base {
    fn default() -> Self {
        Base {
            s_base: 1e6,
            v_base: 10e3,
            frequency: 50.0,
        }
    }
}

/// Upstream grid seen from the slack bus: an ideal balanced source behind a
/// sequence impedance. `z0 = None` means the source offers no zero-sequence
/// path (delta winding on the network side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub z1: Complex64,
    #[serde(default)]
    pub z0: Option<Complex64>,
    /// Line-to-line rms voltage; defaults to `base.v_base`.
    #[serde(default)]
    pub voltage: Option<f64>,
    /// Angle of phase a, radians.
    #[serde(default)]
    pub angle: f64,
}

impl Default for Source {
    fn default() -> Self {
        Source {
            z1: Complex64::new(0.0, 1e-3),
            z0: None,
            voltage: None,
            angle: 0.0,
        }
    }
}

/// A 3x3 phase-domain shunt attached at a bus (fault elements).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultShunt {
    pub bus: BusId,
    pub admittance: [[Complex64; 3]; 3],
}

fn default_format() -> String {
    NETWORK_FORMAT.to_string()
}

/// A radial three-phase grid with its monitoring layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default)]
    pub base: Base,
    #[serde(default)]
    pub source: Source,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    /// Buses with a full PMU (voltages and injected currents).
    #[serde(default)]
    pub monitored: BTreeSet<BusId>,
    /// Buses with a voltage-only meter.
    #[serde(default)]
    pub voltage_only: BTreeSet<BusId>,
    /// Constant-current injections per bus and phase, amperes (loads negative).
    #[serde(default)]
    pub injections: BTreeMap<BusId, [Complex64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fault_shunts: Vec<FaultShunt>,
}

/// Adjacency over closed lines, indexed by bus index (`id - 1`).
#[derive(Debug, Clone)]
pub struct Topology {
    adj: Vec<Vec<(BusId, LineId)>>,
}

impl Topology {
    pub fn neighbors(&self, bus: BusId) -> &[(BusId, LineId)] {
        &self.adj[bus - 1]
    }

    pub fn degree(&self, bus: BusId) -> usize {
        self.adj[bus - 1].len()
    }

    pub fn n_buses(&self) -> usize {
        self.adj.len()
    }
}

impl NetworkModel {
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>) -> Self {
        NetworkModel {
            format: default_format(),
            base: Base::default(),
            source: Source::default(),
            buses,
            lines,
            monitored: BTreeSet::new(),
            voltage_only: BTreeSet::new(),
            injections: BTreeMap::new(),
            fault_shunts: Vec::new(),
        }
    }

    /// Plain chain `1 - 2 - ... - n` with identical lines; bus 1 is the
    /// solidly grounded slack.
    pub fn chain(n: usize, z1: Complex64, z0: Complex64) -> Self {
        let edges: Vec<_> = (1..n).map(|k| (k, k + 1)).collect();
        NetworkModel::from_edges(n, &edges, z1, z0)
    }

    /// Build a radial net from `(from, to)` pairs; bus 1 is the solidly
    /// grounded slack.
    pub fn from_edges(n: usize, edges: &[(BusId, BusId)], z1: Complex64, z0: Complex64) -> Self {
        let mut buses: Vec<Bus> = (1..=n).map(Bus::new).collect();
        buses[0].is_slack = true;
        buses[0].grounding = Grounding::Solid;
        let lines = edges
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| Line::new(i + 1, a, b, z1, z0))
            .collect();
        NetworkModel::new(buses, lines)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn bus(&self, id: BusId) -> Result<&Bus> {
        id.checked_sub(1)
            .and_then(|i| self.buses.get(i))
            .ok_or(Error::UnknownBus(id))
    }

    pub fn line(&self, id: LineId) -> Result<&Line> {
        id.checked_sub(1)
            .and_then(|i| self.lines.get(i))
            .ok_or(Error::UnknownLine(id))
    }

    pub fn closed_lines(&self) -> impl Iterator<Item = &Line> {
        self.lines.iter().filter(|l| l.is_closed())
    }

    pub fn topology(&self) -> Topology {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for l in self.closed_lines() {
            adj[l.from_bus - 1].push((l.to_bus, l.id));
            adj[l.to_bus - 1].push((l.from_bus, l.id));
        }
        Topology { adj }
    }

    /// Number of closed lines incident to `bus`.
    pub fn degree(&self, bus: BusId) -> Result<usize> {
        self.bus(bus)?;
        Ok(self
            .closed_lines()
            .filter(|l| l.from_bus == bus || l.to_bus == bus)
            .count())
    }

    /// Degree ignoring lines that end at fictitious buses.
    pub fn physical_degree(&self, bus: BusId) -> Result<usize> {
        self.bus(bus)?;
        Ok(self
            .closed_lines()
            .filter(|l| l.from_bus == bus || l.to_bus == bus)
            .filter(|l| !self.is_fictitious(l.from_bus) && !self.is_fictitious(l.to_bus))
            .count())
    }

    pub fn fork_buses(&self) -> BTreeSet<BusId> {
        let topo = self.topology();
        (1..=self.n_buses()).filter(|&b| topo.degree(b) > 2).collect()
    }

    pub fn is_fictitious(&self, bus: BusId) -> bool {
        self.buses
            .get(bus.wrapping_sub(1))
            .is_some_and(|b| b.fictitious_of.is_some())
    }

    /// Buses that exist physically (not fictitious split terminals).
    pub fn physical_buses(&self) -> impl Iterator<Item = BusId> + '_ {
        self.buses
            .iter()
            .filter(|b| b.fictitious_of.is_none())
            .map(|b| b.id)
    }

    /// The fictitious terminal hanging off `bus`, if any.
    pub fn fictitious_partner(&self, bus: BusId) -> Option<BusId> {
        self.buses
            .iter()
            .find(|b| b.fictitious_of == Some(bus))
            .map(|b| b.id)
    }

    pub fn slack_bus(&self) -> Option<BusId> {
        self.buses.iter().find(|b| b.is_slack).map(|b| b.id)
    }

    pub fn grounding_buses(&self) -> Vec<BusId> {
        self.buses
            .iter()
            .filter(|b| b.grounding != Grounding::None)
            .map(|b| b.id)
            .collect()
    }

    pub fn is_monitored(&self, bus: BusId) -> bool {
        self.monitored.contains(&bus)
    }

    /// True when every physical bus carries a full PMU.
    pub fn fully_monitored(&self) -> bool {
        self.voltage_only.is_empty() && self.physical_buses().all(|b| self.monitored.contains(&b))
    }

    pub fn injection(&self, bus: BusId) -> [Complex64; 3] {
        self.injections
            .get(&bus)
            .copied()
            .unwrap_or([Complex64::new(0.0, 0.0); 3])
    }

    /// Total zero-sequence charging susceptance of the closed lines.
    pub fn total_zero_sequence_susceptance(&self) -> f64 {
        self.closed_lines().map(|l| l.shunt_b0).sum()
    }

    /// True iff closed lines form a spanning tree.
    pub fn is_radial(&self) -> bool {
        self.check_radial().is_ok()
    }

    fn check_radial(&self) -> Result<()> {
        let n = self.n_buses();
        let m = self.closed_lines().count();
        if m + 1 != n {
            return Err(Error::Topology(format!(
                "{m} closed lines for {n} buses; a radial network needs {}",
                n.saturating_sub(1)
            )));
        }
        let topo = self.topology();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([1]);
        seen[0] = true;
        while let Some(b) = queue.pop_front() {
            for &(nb, _) in topo.neighbors(b) {
                if !seen[nb - 1] {
                    seen[nb - 1] = true;
                    queue.push_back(nb);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Topology(format!(
                "bus {} is not connected to bus 1 through closed lines",
                i + 1
            )));
        }
        Ok(())
    }

    /// Full structural validation.
    pub fn validate(&self) -> Result<()> {
        if self.format != NETWORK_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported network format {:?}, expected {NETWORK_FORMAT:?}",
                self.format
            )));
        }
        if self.buses.len() < 2 {
            return Err(Error::Topology("a network needs at least two buses".into()));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if b.id != i + 1 {
                return Err(Error::Parse(format!(
                    "bus ids must be 1..n in order; position {} holds id {}",
                    i + 1,
                    b.id
                )));
            }
            if let Some(of) = b.fictitious_of {
                self.bus(of)?;
                if self.is_fictitious(of) {
                    return Err(Error::Topology(format!(
                        "fictitious bus {} hangs off another fictitious bus {of}",
                        b.id
                    )));
                }
            }
            if let Grounding::Petersen {
                reactance: CoilReactance::Ohms(x),
                ..
            } = b.grounding
            {
                if !(x.is_finite() && x != 0.0) {
                    return Err(Error::Domain(format!("bus {}: coil reactance {x}", b.id)));
                }
            }
        }
        let slacks = self.buses.iter().filter(|b| b.is_slack).count();
        if slacks != 1 {
            return Err(Error::Topology(format!(
                "expected exactly one slack bus, found {slacks}"
            )));
        }
        for (i, l) in self.lines.iter().enumerate() {
            if l.id != i + 1 {
                return Err(Error::Parse(format!(
                    "line ids must be 1..m in order; position {} holds id {}",
                    i + 1,
                    l.id
                )));
            }
            self.bus(l.from_bus)?;
            self.bus(l.to_bus)?;
            if l.from_bus == l.to_bus {
                return Err(Error::Topology(format!("line {} is a self-loop", l.id)));
            }
            if !(l.z1.norm() > 0.0 && l.z0.norm() > 0.0) {
                return Err(Error::SingularLine(l.id));
            }
            if !(0.0..=1.0).contains(&l.charging_at_from) {
                return Err(Error::Domain(format!(
                    "line {}: charging share {} outside [0, 1]",
                    l.id, l.charging_at_from
                )));
            }
        }
        self.check_radial()?;
        for &b in self.monitored.iter().chain(&self.voltage_only) {
            self.bus(b)?;
        }
        if let Some(b) = self.monitored.intersection(&self.voltage_only).next() {
            return Err(Error::Domain(format!(
                "bus {b} is listed both as monitored and voltage-only"
            )));
        }
        for &b in self.injections.keys() {
            self.bus(b)?;
        }
        for f in &self.fault_shunts {
            self.bus(f.bus)?;
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let net: NetworkModel = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}
