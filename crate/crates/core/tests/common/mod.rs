#![allow(dead_code)]

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridfault::grid::{BusId, NetworkModel};

/// Random radial net: bus `k` hangs off a random earlier bus. Cable-like
/// impedances, small charging, balanced loads on every bus but the slack.
pub fn random_tree(seed: u64, n: usize) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(BusId, BusId)> = (2..=n).map(|k| (rng.random_range(1..k), k)).collect();
    let mut net = NetworkModel::from_edges(n, &edges, C::new(0.1, 0.1), C::new(0.3, 0.3));
    for l in &mut net.lines {
        l.z1 = C::new(rng.random_range(0.05..0.5), rng.random_range(0.05..0.4));
        l.z0 = l.z1 * rng.random_range(2.0..4.0);
        l.shunt_b1 = rng.random_range(1e-5..1e-4);
        l.shunt_b0 = 0.6 * l.shunt_b1;
    }
    for b in 2..=n {
        let load = C::from_polar(rng.random_range(1.0..10.0), -0.3);
        net.injections.insert(b, balanced(-load));
    }
    net
}

pub fn balanced(a: C) -> [C; 3] {
    let shift = -2.0 * std::f64::consts::PI / 3.0;
    std::array::from_fn(|p| a * C::from_polar(1.0, shift * p as f64))
}

/// Chain `1 - ... - n` with cable data, loads and the given meters.
pub fn chain(n: usize, monitored: &[BusId]) -> NetworkModel {
    let mut net = NetworkModel::chain(n, C::new(0.16, 0.12), C::new(0.6, 0.35));
    for l in &mut net.lines {
        l.shunt_b1 = 1e-4;
        l.shunt_b0 = 1e-4;
    }
    for b in 2..=n {
        net.injections.insert(b, balanced(C::from_polar(-8.0, -0.3)));
    }
    net.monitored = monitored.iter().copied().collect();
    net
}

/// Every other bus metered, terminals always.
pub fn alternating(n: usize) -> Vec<BusId> {
    (1..=n).filter(|b| b % 2 == 1 || *b == n).collect()
}
