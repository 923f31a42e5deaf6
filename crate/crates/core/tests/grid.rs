mod common;

use num_complex::Complex64 as C;
use proptest::prelude::*;

use gridfault::grid::{
    build_admittance, build_branch_admittance, kron_reduce, split_line, CoilReactance, Grounding,
    NetworkModel,
};

fn close(a: C, b: C, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

#[test]
fn unequal_sequences_couple_phases() {
    let (z1, z0) = (C::new(1.0, 2.0), C::new(3.0, 5.0));
    let net = NetworkModel::chain(2, z1, z0);
    let blk = build_branch_admittance(&net).unwrap().block(1, 1);
    let (y1, y0) = (z1.inv(), z0.inv());
    for p in 0..3 {
        for q in 0..3 {
            let want = if p == q { (y0 + 2.0 * y1) / 3.0 } else { (y0 - y1) / 3.0 };
            assert!(close(blk[p][q], want, 1e-12), "({p},{q}) {} vs {want}", blk[p][q]);
        }
    }
}

#[test]
fn coil_adds_uniform_block() {
    let x = 250.0;
    let mut net = NetworkModel::chain(2, C::new(0.2, 0.3), C::new(0.5, 0.9));
    net.buses[1].grounding = Grounding::Petersen {
        reactance: CoilReactance::Ohms(x),
        resistance: None,
    };
    let with = build_admittance(&net).unwrap().block(2, 2);
    net.buses[1].grounding = Grounding::None;
    let without = build_admittance(&net).unwrap().block(2, 2);
    let want = (C::new(0.0, 3.0 * x)).inv();
    for p in 0..3 {
        for q in 0..3 {
            assert!(close(with[p][q] - without[p][q], want, 1e-12));
        }
    }
}

#[test]
fn split_halves_the_line() {
    let net = NetworkModel::chain(2, C::new(2.0, 2.0), C::new(6.0, 6.0));
    let (s, mid) = split_line(&net, 1, 0.5).unwrap();
    assert_eq!(mid, 3);
    assert_eq!(s.n_lines(), 2);
    for l in &s.lines {
        assert!(l.from_bus == mid || l.to_bus == mid);
        assert!(close(l.z1, C::new(1.0, 1.0), 1e-15));
    }
}

#[test]
fn split_rejects_endpoints() {
    let net = NetworkModel::chain(3, C::new(1.0, 1.0), C::new(3.0, 3.0));
    for p in [0.0, 1.0, -0.2, f64::NAN] {
        assert!(split_line(&net, 1, p).is_err(), "p = {p}");
    }
}

#[test]
fn degrees_and_forks() {
    let chain = NetworkModel::chain(3, C::new(1.0, 1.0), C::new(3.0, 3.0));
    let d: Vec<usize> = (1..=3).map(|b| chain.degree(b).unwrap()).collect();
    assert_eq!(d, [1, 2, 1]);
    assert!(chain.fork_buses().is_empty());

    let star = NetworkModel::from_edges(4, &[(1, 2), (1, 3), (1, 4)], C::new(1.0, 1.0), C::new(3.0, 3.0));
    assert_eq!(star.fork_buses().into_iter().collect::<Vec<_>>(), [1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_then_reduce_restores_y(seed in any::<u64>(), n in 3usize..16, pick in 0usize..100, p in 0.01f64..0.99) {
        let net = common::random_tree(seed, n);
        let line = 1 + pick % net.n_lines();
        let y = build_admittance(&net).unwrap().y;
        let (s, mid) = split_line(&net, line, p).unwrap();
        let ys = build_admittance(&s).unwrap().y;
        let k = 3 * (mid - 1);
        let red = kron_reduce(&ys, &[k, k + 1, k + 2]).unwrap();
        prop_assert!((red - &y).norm() <= 1e-10 * y.norm());
    }

    #[test]
    fn admittance_is_symmetric(seed in any::<u64>(), n in 2usize..20) {
        let y = build_admittance(&common::random_tree(seed, n)).unwrap();
        prop_assert!(y.asymmetry() <= 1e-12 * y.y.norm());
    }
}
