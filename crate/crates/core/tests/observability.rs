mod common;

use proptest::prelude::*;

use gridfault::estimator::{build_measurement_model, Covariance, MeasurementLayout, ModelTag, PSEUDO_VARIANCE};
use gridfault::grid::{build_branch_admittance, split_line, NetworkModel};
use gridfault::observability::{
    check_lemma1, check_theorem1, compute_ufc, compute_ufc2, Condition, UfcType, ufc_type,
};

fn full_rank(h: &nalgebra::DMatrix<f64>) -> bool {
    if h.nrows() < h.ncols() {
        return false;
    }
    let s = h.singular_values();
    s.iter().filter(|&&v| v > 1e-8 * s.max()).count() == h.ncols()
}

fn base_rank_full(net: &NetworkModel) -> bool {
    let layout = MeasurementLayout::from_network(net, PSEUDO_VARIANCE).unwrap();
    let y = build_branch_admittance(net).unwrap();
    let m = build_measurement_model(&y, &layout, Covariance::identity(layout.dim()), ModelTag::Base, None).unwrap();
    full_rank(&m.h)
}

fn extensions_full_rank(net: &NetworkModel) -> bool {
    let layout = MeasurementLayout::from_network(net, PSEUDO_VARIANCE).unwrap();
    if layout.dim() == 0 {
        return false;
    }
    net.closed_lines().all(|l| {
        let (s, vb) = split_line(net, l.id, 0.5).unwrap();
        let y = build_branch_admittance(&s).unwrap();
        let cov = Covariance::identity(layout.dim());
        let m = build_measurement_model(&y, &layout, cov, ModelTag::Virtual { line: l.id }, Some(vb)).unwrap();
        full_rank(&m.h)
    })
}

#[test]
fn alternating_chain_passes() {
    let net = common::chain(3, &[1, 3]);
    assert!(check_lemma1(&net).observable_base);
    assert!(check_theorem1(&net).observable_extended);
    let all = common::chain(5, &[1, 2, 3, 4, 5]);
    assert!(check_lemma1(&all).observable_base);
    assert!(check_theorem1(&all).observable_extended);
}

#[test]
fn two_unmetered_neighbours_fail_extension_only() {
    let net = common::chain(4, &[1, 4]);
    assert!(check_lemma1(&net).observable_base);
    assert!(base_rank_full(&net));
    let thm = check_theorem1(&net);
    assert!(!thm.observable_extended);
    assert!(!extensions_full_rank(&net));
    assert!(thm
        .violations
        .iter()
        .any(|v| v.condition == Condition::AdjacentNonMonitored && v.buses == [2, 3]));
}

#[test]
fn fork_with_two_unmetered_neighbours_fails_lemma() {
    let mut net = NetworkModel::from_edges(
        4,
        &[(1, 2), (2, 3), (2, 4)],
        num_complex::Complex64::new(0.2, 0.1),
        num_complex::Complex64::new(0.6, 0.3),
    );
    net.monitored = [1, 2].into_iter().collect();
    assert!(!check_lemma1(&net).observable_base);
    assert!(!check_theorem1(&net).observable_extended);
}

#[test]
fn unmetered_terminal_fails() {
    let net = common::chain(3, &[1, 2]);
    let thm = check_theorem1(&net);
    assert!(!thm.observable_extended);
    assert!(thm
        .violations
        .iter()
        .any(|v| v.condition == Condition::TerminalNotMonitored && v.buses == [3]));
    let err = thm.require_extended().unwrap_err().to_string();
    assert!(err.contains("terminal bus 3"), "{err}");
}

#[test]
fn definition_one_clusters() {
    let pair = common::chain(2, &[1, 2]);
    let ufc = compute_ufc(&pair).unwrap();
    assert_eq!(ufc.clusters, [vec![1]]);
    assert_eq!(ufc_type(&pair, &ufc.clusters[0]), UfcType::SingleMonitoredPair);

    let mnm = common::chain(3, &[1, 3]);
    let ufc = compute_ufc(&mnm).unwrap();
    assert_eq!(ufc.clusters, [vec![1, 2]]);
    assert_eq!(ufc_type(&mnm, &ufc.clusters[0]), UfcType::MultiTerminal);
}

#[test]
fn clusters_split_only_at_unmetered_forks() {
    let chain = common::chain(7, &common::alternating(7));
    assert_eq!(compute_ufc2(&chain).unwrap().r(), 1);

    // fork 2 with three branches, fork left unmetered
    let mut net = NetworkModel::from_edges(
        7,
        &[(1, 2), (2, 3), (3, 4), (2, 5), (5, 6), (6, 7)],
        num_complex::Complex64::new(0.2, 0.1),
        num_complex::Complex64::new(0.6, 0.3),
    );
    net.monitored = [1, 3, 4, 5, 7].into_iter().collect();
    let part = compute_ufc2(&net).unwrap();
    assert_eq!(part.r(), 3);
    assert_eq!(part.separators.iter().copied().collect::<Vec<_>>(), [2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn check_matches_numeric_rank(seed in any::<u64>(), mask in any::<u16>()) {
        let mut net = common::random_tree(seed, 12);
        net.monitored = (1..=12).filter(|b| mask >> (b - 1) & 1 == 1).collect();
        prop_assert_eq!(check_theorem1(&net).observable_extended, extensions_full_rank(&net));
    }

    #[test]
    fn observable_nets_partition_all_lines(seed in any::<u64>(), n in 4usize..30) {
        let mut net = common::random_tree(seed, n);
        // every bus metered except non-terminal buses whose neighbours are
        let topo = net.topology();
        let mut monitored: Vec<bool> = vec![true; n];
        for b in 1..=n {
            if topo.degree(b) > 1 && topo.neighbors(b).iter().all(|&(nb, _)| monitored[nb - 1]) && (seed >> (b % 60)) & 1 == 1 {
                monitored[b - 1] = false;
            }
        }
        net.monitored = (1..=n).filter(|b| monitored[b - 1]).collect();
        prop_assume!(check_theorem1(&net).observable_extended);
        for part in [compute_ufc(&net).unwrap(), compute_ufc2(&net).unwrap()] {
            let mut lines: Vec<usize> = part.clusters.concat();
            lines.sort_unstable();
            prop_assert_eq!(lines, (1..n).collect::<Vec<_>>());
        }
        prop_assert!(compute_ufc2(&net).unwrap().r() <= compute_ufc(&net).unwrap().r());
    }
}
