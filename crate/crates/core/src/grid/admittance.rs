use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{CoilReactance, Grounding, NetworkModel};
use crate::error::{Error, Result};

type C = Complex64;

/// Zero-sequence admittance used for a solidly grounded neutral, siemens.
pub const SOLID_GROUND_ADMITTANCE: f64 = 1e4;

/// Complex nodal admittance matrix of order 3n, indexed `3 * (bus - 1) + phase`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub y: DMatrix<C>,
}

impl AdmittanceMatrix {
    pub fn zeros(n_buses: usize) -> Self {
        AdmittanceMatrix {
            y: DMatrix::zeros(3 * n_buses, 3 * n_buses),
        }
    }

    pub fn n_buses(&self) -> usize {
        self.y.nrows() / 3
    }

    pub fn order(&self) -> usize {
        self.y.nrows()
    }

    /// The 3x3 block coupling `bus_i` and `bus_j` (1-based ids).
    pub fn block(&self, bus_i: usize, bus_j: usize) -> [[C; 3]; 3] {
        let (r, c) = (3 * (bus_i - 1), 3 * (bus_j - 1));
        std::array::from_fn(|p| std::array::from_fn(|q| self.y[(r + p, c + q)]))
    }

    pub fn add_block(&mut self, bus_i: usize, bus_j: usize, blk: &[[C; 3]; 3], sign: f64) {
        let (r, c) = (3 * (bus_i - 1), 3 * (bus_j - 1));
        for p in 0..3 {
            for q in 0..3 {
                self.y[(r + p, c + q)] += blk[p][q] * sign;
            }
        }
    }

    /// Largest entry modulus of `Y - Y^T`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.order();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.y[(i, j)] - self.y[(j, i)]).norm());
            }
        }
        worst
    }
}

/// Phase-domain block of a transposed element with sequence admittances
/// `y0` (zero) and `y1` (positive = negative): a circulant matrix with
/// diagonal `(y0 + 2 y1) / 3` and off-diagonal `(y0 - y1) / 3`.
pub fn sequence_to_phase(y0: C, y1: C) -> [[C; 3]; 3] {
    let s = (y0 + y1 * 2.0) / 3.0;
    let m = (y0 - y1) / 3.0;
    [[s, m, m], [m, s, m], [m, m, s]]
}

fn line_blocks(net: &NetworkModel, y: &mut AdmittanceMatrix) {
    let j = C::i();
    for l in net.closed_lines() {
        let series = sequence_to_phase(l.z0.inv(), l.z1.inv());
        y.add_block(l.from_bus, l.from_bus, &series, 1.0);
        y.add_block(l.to_bus, l.to_bus, &series, 1.0);
        y.add_block(l.from_bus, l.to_bus, &series, -1.0);
        y.add_block(l.to_bus, l.from_bus, &series, -1.0);
        if l.shunt_b0 != 0.0 || l.shunt_b1 != 0.0 {
            let f = l.charging_at_from;
            let at_from = sequence_to_phase(j * l.shunt_b0 * f, j * l.shunt_b1 * f);
            let at_to = sequence_to_phase(j * l.shunt_b0 * (1.0 - f), j * l.shunt_b1 * (1.0 - f));
            y.add_block(l.from_bus, l.from_bus, &at_from, 1.0);
            y.add_block(l.to_bus, l.to_bus, &at_to, 1.0);
        }
    }
}

/// Lines and their charging only. This is the matrix the estimator knows:
/// grounding and source currents show up as measured injections.
pub fn build_branch_admittance(net: &NetworkModel) -> Result<AdmittanceMatrix> {
    net.validate()?;
    let mut y = AdmittanceMatrix::zeros(net.n_buses());
    line_blocks(net, &mut y);
    Ok(y)
}

/// Zero-sequence admittance of a neutral treatment, or `None` when the bus
/// is ungrounded.
pub fn grounding_admittance(net: &NetworkModel, g: &Grounding) -> Result<Option<C>> {
    Ok(match *g {
        Grounding::None => None,
        Grounding::Solid => Some(C::new(SOLID_GROUND_ADMITTANCE, 0.0)),
        Grounding::Petersen {
            reactance,
            resistance,
        } => {
            let x = match reactance {
                CoilReactance::Ohms(x) => x,
                CoilReactance::Auto => {
                    let b0 = net.total_zero_sequence_susceptance();
                    if b0 <= 0.0 {
                        return Err(Error::Domain(
                            "automatic coil tuning needs line zero-sequence charging".into(),
                        ));
                    }
                    1.0 / b0
                }
            };
            let mut yg = (C::i() * x).inv();
            if let Some(r) = resistance {
                if r <= 0.0 {
                    return Err(Error::Domain(format!("coil loss resistance {r}")));
                }
                yg += 1.0 / r;
            }
            Some(yg)
        }
    })
}

/// Norton admittance of the upstream source at the slack bus.
pub fn source_admittance(net: &NetworkModel) -> [[C; 3]; 3] {
    let y0 = net.source.z0.map(|z| z.inv()).unwrap_or_default();
    sequence_to_phase(y0, net.source.z1.inv())
}

/// Open-circuit phase voltages of the source: positive sequence, phase a at
/// `source.angle`.
pub fn source_emf(net: &NetworkModel) -> [C; 3] {
    let vll = net.source.voltage.unwrap_or(net.base.v_base);
    let mag = vll / 3f64.sqrt();
    let shift = 2.0 * std::f64::consts::PI / 3.0;
    std::array::from_fn(|p| C::from_polar(mag, net.source.angle - shift * p as f64))
}

/// Full physical admittance: lines, grounding elements, the source's Norton
/// shunt at the slack bus and any fault shunts.
pub fn build_admittance(net: &NetworkModel) -> Result<AdmittanceMatrix> {
    let mut y = build_branch_admittance(net)?;
    for b in &net.buses {
        if let Some(yg) = grounding_admittance(net, &b.grounding)? {
            y.add_block(b.id, b.id, &sequence_to_phase(yg, C::new(0.0, 0.0)), 1.0);
        }
    }
    let slack = net
        .slack_bus()
        .ok_or_else(|| Error::Topology("no slack bus".into()))?;
    y.add_block(slack, slack, &source_admittance(net), 1.0);
    for f in &net.fault_shunts {
        y.add_block(f.bus, f.bus, &f.admittance, 1.0);
    }
    Ok(y)
}

/// Schur complement eliminating the given rows/columns.
pub fn kron_reduce(y: &DMatrix<C>, eliminate: &[usize]) -> Result<DMatrix<C>> {
    let n = y.nrows();
    let keep: Vec<usize> = (0..n).filter(|i| !eliminate.contains(i)).collect();
    let ykk = y.select_rows(&keep).select_columns(&keep);
    let yke = y.select_rows(&keep).select_columns(eliminate);
    let yek = y.select_rows(eliminate).select_columns(&keep);
    let yee = y.select_rows(eliminate).select_columns(eliminate);
    let solved = yee
        .lu()
        .solve(&yek)
        .ok_or_else(|| Error::Solve("eliminated block is singular".into()))?;
    Ok(ykk - yke * solved)
}
