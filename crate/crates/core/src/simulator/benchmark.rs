//! Synthetic 84-bus, 10 kV urban cable network.
//!
//! Bus 1 is the MV side of the 63 MVA supply transformer and carries the
//! neutral grounding. Bus 2 is the busbar feeding five cable feeders; the
//! fifth feeder forks at bus 57 into two branches. A normally open tie joins
//! the ends of feeders 3 and 4.
//!
//! | feeder | buses    | from |
//! |--------|----------|------|
//! | 1      | 3..=14   | 2    |
//! | 2      | 15..=26  | 2    |
//! | 3      | 27..=38  | 2    |
//! | 4      | 39..=48  | 2    |
//! | 5      | 49..=56  | 2    |
//! | 5a     | 58..=71  | 57   |
//! | 5b     | 72..=84  | 57   |

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{BusId, CoilReactance, Grounding, Line, LineId, LineStatus, NetworkModel};
use crate::grid::{Base, Bus, Source};
use crate::placement::{place, Objective, Placement};

type C = Complex64;

/// Neutral treatment of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkGrounding {
    Earthed,
    Compensated,
}

/// Cable data per km: XLPE 185 mm2 aluminium.
const Z1_PER_KM: C = C::new(0.161, 0.117);
const Z0_PER_KM: C = C::new(0.61, 0.35);
const B_PER_KM: f64 = 1.29e-4;

/// Parallel loss resistance of the Petersen coil, ohms (zero sequence).
pub const COIL_LOSS_RESISTANCE: f64 = 400.0;

/// Line opened in the second topology (busbar to the head of feeder 4).
pub const SWITCHED_LINE: LineId = 38;
/// Normally open tie between the ends of feeders 3 and 4.
pub const TIE_LINE: LineId = 84;
/// Buses given a voltage-only meter to split their cluster.
pub const SPLIT_BUSES: [BusId; 8] = [8, 20, 32, 44, 52, 63, 69, 77];
/// Terminal of feeder 3, used as separation bus when the tie is closed.
pub const TIE_SEPARATION_BUS: BusId = 38;

/// (first bus, last bus, parent bus) of each chain.
const CHAINS: [(BusId, BusId, BusId); 7] = [
    (3, 14, 2),
    (15, 26, 2),
    (27, 38, 2),
    (39, 48, 2),
    (49, 57, 2),
    (58, 71, 57),
    (72, 84, 57),
];

pub fn build_benchmark() -> NetworkModel {
    build_benchmark_with(BenchmarkGrounding::Compensated)
}

pub fn build_benchmark_with(grounding: BenchmarkGrounding) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d76_7572_6261_6e00);
    let mut buses: Vec<Bus> = (1..=84).map(Bus::new).collect();
    buses[0].is_slack = true;
    buses[0].grounding = match grounding {
        BenchmarkGrounding::Earthed => Grounding::Solid,
        BenchmarkGrounding::Compensated => Grounding::Petersen {
            reactance: CoilReactance::Auto,
            resistance: Some(COIL_LOSS_RESISTANCE),
        },
    };

    let mut lines = Vec::with_capacity(84);
    let cable = |id: LineId, a: BusId, b: BusId, km: f64| {
        let mut l = Line::new(id, a, b, Z1_PER_KM * km, Z0_PER_KM * km);
        l.shunt_b1 = B_PER_KM * km;
        l.shunt_b0 = B_PER_KM * km;
        l
    };
    lines.push(cable(1, 1, 2, 0.1));
    for &(first, last, parent) in &CHAINS {
        let mut prev = parent;
        for b in first..=last {
            let km = rng.random_range(0.2..1.0);
            lines.push(cable(lines.len() + 1, prev, b, km));
            prev = b;
        }
    }
    let mut tie = cable(TIE_LINE, 38, 48, 0.6);
    tie.status = LineStatus::NormallyOpen;
    lines.push(tie);

    let mut net = NetworkModel::new(buses, lines);
    net.base = Base {
        s_base: 63e6,
        v_base: 10e3,
        frequency: 50.0,
    };
    net.source = Source {
        z1: C::new(0.005, 0.19),
        z0: None,
        voltage: Some(10.2e3),
        angle: 0.0,
    };

    // Loads ~7 A at 0.95 lagging on every feeder bus; PV at unity power
    // factor on two buses out of three.
    let shift = -2.0 * std::f64::consts::PI / 3.0;
    for b in 3..=84 {
        let load = C::from_polar(rng.random_range(5.0..9.0), -(0.95f64).acos());
        let pv = if b % 3 != 0 {
            C::new(rng.random_range(2.0..5.0), 0.0)
        } else {
            C::new(0.0, 0.0)
        };
        let per_phase = pv - load;
        net.injections.insert(
            b,
            std::array::from_fn(|p| per_phase * C::from_polar(1.0, shift * p as f64)),
        );
    }
    net
}

/// Open the busbar end of feeder 4 and close the tie to feeder 3.
pub fn second_topology(net: &NetworkModel) -> NetworkModel {
    let mut out = net.clone();
    out.lines[SWITCHED_LINE - 1].status = LineStatus::NormallyOpen;
    out.lines[TIE_LINE - 1].status = LineStatus::Closed;
    out
}

/// Placement with the eight splits, serving both switch states.
/// `placement.net` is the normal topology, `placement.topologies[0]` the
/// second one.
pub fn placed_benchmark(grounding: BenchmarkGrounding) -> Result<Placement> {
    let net = build_benchmark_with(grounding);
    let second = second_topology(&net);
    place(
        &net,
        Objective::MaxResolution,
        &Default::default(),
        &SPLIT_BUSES,
        &[second],
    )
}
