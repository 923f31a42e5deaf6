use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{split_line, BusId, FaultShunt, LineId, NetworkModel};
use crate::phase::Phase;

type C = Complex64;

/// Fault type. Whether a single-phase fault is earthed or compensated
/// follows from the network's neutral treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    ThreePhaseGround,
    PhasePhase(Phase, Phase),
    SinglePhaseGround(Phase),
}

impl FaultKind {
    /// Phases carrying fault current.
    pub fn phases(self) -> Vec<Phase> {
        let mut v = match self {
            FaultKind::ThreePhaseGround => Phase::ALL.to_vec(),
            FaultKind::PhasePhase(a, b) => vec![a, b],
            FaultKind::SinglePhaseGround(a) => vec![a],
        };
        v.sort();
        v
    }

    fn validate(self) -> Result<()> {
        match self {
            FaultKind::PhasePhase(a, b) if a == b => {
                Err(Error::Domain(format!("phase-phase fault needs two phases, got {a}{b}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::ThreePhaseGround => f.write_str("3ph"),
            FaultKind::PhasePhase(a, b) => write!(f, "2ph/{a}{b}"),
            FaultKind::SinglePhaseGround(a) => write!(f, "1ph/{a}"),
        }
    }
}

impl FromStr for FaultKind {
    type Err = Error;

    /// `3ph`, `2ph` (phases a, b), `2ph/bc`, `1ph` (phase a), `1ph/b`.
    /// `1ph-e` and `1ph-c` are accepted for phase a: earthed versus
    /// compensated is a property of the network, not of the fault.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Parse(format!("unknown fault kind {s:?}"));
        let kind = match s.as_str() {
            "3ph" | "3ph-g" => FaultKind::ThreePhaseGround,
            "2ph" => FaultKind::PhasePhase(Phase::A, Phase::B),
            "1ph" | "1ph-e" | "1ph-c" => FaultKind::SinglePhaseGround(Phase::A),
            _ => {
                if let Some(rest) = s.strip_prefix("2ph/") {
                    let ph: Vec<Phase> = rest
                        .chars()
                        .map(|c| Phase::parse(&c.to_string()).ok_or_else(bad))
                        .collect::<Result<_>>()?;
                    match ph[..] {
                        [a, b] => FaultKind::PhasePhase(a, b),
                        _ => return Err(bad()),
                    }
                } else if let Some(rest) = s.strip_prefix("1ph/") {
                    FaultKind::SinglePhaseGround(Phase::parse(rest).ok_or_else(bad)?)
                } else {
                    return Err(bad());
                }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl Serialize for FaultKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FaultKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_impedance() -> C {
    C::new(1e-6, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub line: LineId,
    /// Position along the line from its `from_bus`, in (0, 1).
    pub fraction: f64,
    pub kind: FaultKind,
    /// Impedance of each fault element, ohms.
    #[serde(default = "default_impedance")]
    pub impedance: C,
}

impl FaultSpec {
    pub fn new(line: LineId, fraction: f64, kind: FaultKind) -> Self {
        FaultSpec {
            line,
            fraction,
            kind,
            impedance: default_impedance(),
        }
    }
}

/// Split the faulted line and attach the fault admittance at the new bus.
pub fn apply_fault(net: &NetworkModel, spec: &FaultSpec) -> Result<(NetworkModel, BusId)> {
    spec.kind.validate()?;
    if spec.impedance.norm() == 0.0 || !spec.impedance.norm().is_finite() {
        return Err(Error::Domain(format!("fault impedance {}", spec.impedance)));
    }
    let (mut out, bus) = split_line(net, spec.line, spec.fraction)?;
    let yf = spec.impedance.inv();
    let zero = C::new(0.0, 0.0);
    let mut adm = [[zero; 3]; 3];
    match spec.kind {
        FaultKind::ThreePhaseGround => {
            for (p, row) in adm.iter_mut().enumerate() {
                row[p] = yf;
            }
        }
        FaultKind::PhasePhase(a, b) => {
            let (a, b) = (a.index(), b.index());
            adm[a][a] = yf;
            adm[b][b] = yf;
            adm[a][b] = -yf;
            adm[b][a] = -yf;
        }
        FaultKind::SinglePhaseGround(a) => adm[a.index()][a.index()] = yf,
    }
    out.fault_shunts.push(FaultShunt {
        bus,
        admittance: adm,
    });
    Ok((out, bus))
}
