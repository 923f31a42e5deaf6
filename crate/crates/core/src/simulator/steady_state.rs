use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{
    build_admittance, build_branch_admittance, source_admittance, source_emf, BusId, NetworkModel,
};

type C = Complex64;

/// Bus voltages and the currents each bus injects into the line network.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub v: Vec<[C; 3]>,
    pub i: Vec<[C; 3]>,
}

impl SteadyState {
    pub fn voltage(&self, bus: BusId) -> [C; 3] {
        self.v[bus - 1]
    }

    pub fn current(&self, bus: BusId) -> [C; 3] {
        self.i[bus - 1]
    }
}

fn to_blocks(x: &DVector<C>) -> Vec<[C; 3]> {
    (0..x.len() / 3)
        .map(|b| [x[3 * b], x[3 * b + 1], x[3 * b + 2]])
        .collect()
}

/// Solve `Y V = I` with the source as a Norton equivalent at the slack bus.
/// Returned currents are the line-network injections `Y_lines V`, i.e. what
/// a PMU at the bus would read.
pub fn solve_steady_state(net: &NetworkModel) -> Result<SteadyState> {
    let y = build_admittance(net)?;
    let n3 = y.order();
    let mut rhs = DVector::<C>::zeros(n3);
    for (&b, inj) in &net.injections {
        for p in 0..3 {
            rhs[3 * (b - 1) + p] += inj[p];
        }
    }
    let slack = net.slack_bus().expect("validated network has a slack bus");
    let ys = source_admittance(net);
    let e = source_emf(net);
    for p in 0..3 {
        for q in 0..3 {
            rhs[3 * (slack - 1) + p] += ys[p][q] * e[q];
        }
    }
    let v = y
        .y
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solve("nodal admittance matrix is singular".into()))?;
    let resid = (&y.y * &v - &rhs).norm();
    if !(resid <= 1e-8 * rhs.norm().max(1.0)) {
        return Err(Error::Solve(format!("nodal solve residual {resid:.3e}")));
    }
    let branch = build_branch_admittance(net)?;
    let i = &branch.y * &v;
    Ok(SteadyState {
        v: to_blocks(&v),
        i: to_blocks(&i),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unloaded_net_sits_at_source_voltage() {
        let net = NetworkModel::chain(4, C::new(0.2, 0.3), C::new(0.6, 0.9));
        let ss = solve_steady_state(&net).unwrap();
        let e = source_emf(&net);
        for b in 1..=4 {
            for p in 0..3 {
                assert!((ss.voltage(b)[p] - e[p]).norm() < 1e-9 * e[p].norm());
                assert!(ss.current(b)[p].norm() < 1e-9);
            }
        }
    }

    #[test]
    fn single_load_drop_is_ohmic() {
        let z = C::new(0.4, 0.8);
        let mut net = NetworkModel::chain(2, z, C::new(1.0, 2.0));
        let load = C::new(-20.0, 5.0);
        let a = C::from_polar(1.0, -2.0 * std::f64::consts::PI / 3.0);
        net.injections.insert(2, [load, load * a, load * a * a]);
        let ss = solve_steady_state(&net).unwrap();
        for p in 0..3 {
            let drop = ss.voltage(1)[p] - ss.voltage(2)[p];
            let flow = -ss.current(2)[p];
            assert!((drop - z * flow).norm() < 1e-9);
            assert!((ss.current(2)[p] - net.injections[&2][p]).norm() < 1e-9);
        }
    }
}
