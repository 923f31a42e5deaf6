//! Observability conditions and fault-cluster partitions.
//!
//! Everything here is pure graph work on the closed-line topology. "Monitored"
//! means a full PMU; voltage-only buses count as non-monitored. Lines ending
//! at fictitious terminal buses take part in degrees but never in clusters.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BusId, LineId, NetworkModel, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// A bus of degree > 1 has two or more non-monitored neighbours.
    SharedNeighbors,
    /// A non-monitored terminal bus has no monitored neighbour.
    IsolatedTerminal,
    /// Two adjacent buses are both non-monitored.
    AdjacentNonMonitored,
    /// A terminal bus is not monitored.
    TerminalNotMonitored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub buses: Vec<BusId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    /// The grid without virtual buses can be estimated.
    pub observable_base: bool,
    /// Every single-virtual-bus extension can be estimated.
    pub observable_extended: bool,
    pub violations: Vec<Violation>,
    /// Fork pairs separated by a single non-monitored bus, where the
    /// per-bus reading of the cluster border rule is a judgement call.
    pub nested_forks: Vec<(BusId, BusId)>,
}

impl ObservabilityReport {
    /// Turn a failed extended check into an error naming the first violation.
    pub fn require_extended(&self) -> Result<()> {
        if self.observable_extended {
            return Ok(());
        }
        let v = self
            .violations
            .iter()
            .find(|v| {
                matches!(
                    v.condition,
                    Condition::AdjacentNonMonitored | Condition::TerminalNotMonitored
                )
            })
            .expect("failed check records a violation");
        let detail = match v.condition {
            Condition::AdjacentNonMonitored => format!(
                "adjacent buses {} and {} are both non-monitored",
                v.buses[0], v.buses[1]
            ),
            _ => format!("terminal bus {} is not monitored", v.buses[0]),
        };
        Err(Error::Observability {
            tag: "placement".into(),
            detail,
        })
    }
}

fn lemma1_violations(net: &NetworkModel, topo: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    for b in 1..=net.n_buses() {
        let nbrs = topo.neighbors(b);
        let non_mon: Vec<BusId> = nbrs
            .iter()
            .map(|&(nb, _)| nb)
            .filter(|nb| !net.is_monitored(*nb))
            .collect();
        if nbrs.len() > 1 && non_mon.len() > 1 {
            let mut buses = vec![b];
            buses.extend(&non_mon);
            out.push(Violation {
                condition: Condition::SharedNeighbors,
                buses,
            });
        }
        if nbrs.len() == 1 && !net.is_monitored(b) && non_mon.len() == 1 {
            out.push(Violation {
                condition: Condition::IsolatedTerminal,
                buses: vec![b, nbrs[0].0],
            });
        }
    }
    out
}

fn theorem1_violations(net: &NetworkModel, topo: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    for l in net.closed_lines() {
        if !net.is_monitored(l.from_bus) && !net.is_monitored(l.to_bus) {
            let (a, b) = (l.from_bus.min(l.to_bus), l.from_bus.max(l.to_bus));
            out.push(Violation {
                condition: Condition::AdjacentNonMonitored,
                buses: vec![a, b],
            });
        }
    }
    for b in 1..=net.n_buses() {
        if topo.degree(b) == 1 && !net.is_monitored(b) {
            out.push(Violation {
                condition: Condition::TerminalNotMonitored,
                buses: vec![b],
            });
        }
    }
    out
}

/// Sufficient condition for estimating the grid without virtual buses.
pub fn check_lemma1(net: &NetworkModel) -> ObservabilityReport {
    let topo = net.topology();
    let violations = lemma1_violations(net, &topo);
    ObservabilityReport {
        observable_base: violations.is_empty(),
        observable_extended: false,
        violations,
        nested_forks: Vec::new(),
    }
}

/// Necessary and sufficient condition for every virtual-bus extension.
pub fn check_theorem1(net: &NetworkModel) -> ObservabilityReport {
    let topo = net.topology();
    let lemma = lemma1_violations(net, &topo);
    let thm = theorem1_violations(net, &topo);
    let observable_extended = thm.is_empty();
    let mut violations = lemma.clone();
    violations.extend(thm);
    ObservabilityReport {
        observable_base: lemma.is_empty() || observable_extended,
        observable_extended,
        violations,
        nested_forks: nested_forks(net, &topo),
    }
}

fn nested_forks(net: &NetworkModel, topo: &Topology) -> Vec<(BusId, BusId)> {
    let mut out = BTreeSet::new();
    for b in 1..=net.n_buses() {
        if net.is_monitored(b) || topo.degree(b) != 2 {
            continue;
        }
        let ends: Vec<BusId> = topo.neighbors(b).iter().map(|&(nb, _)| nb).collect();
        if ends.iter().all(|&e| topo.degree(e) > 2) {
            out.insert((ends[0].min(ends[1]), ends[0].max(ends[1])));
        }
    }
    out.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    /// Definition-1 clusters.
    Ufc,
    /// Clusters separated only by non-monitored forks and split buses.
    Ufc2,
    /// One cluster per line (every bus monitored).
    Lines,
}

/// Disjoint line clusters covering the closed real lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterPartition {
    pub kind: PartitionKind,
    /// Cluster `l` (1-based) is `clusters[l - 1]`; each sorted, ordered by
    /// smallest line id.
    pub clusters: Vec<Vec<LineId>>,
    pub separators: BTreeSet<BusId>,
}

impl ClusterPartition {
    pub fn r(&self) -> usize {
        self.clusters.len()
    }

    /// 1-based cluster id holding `line`.
    pub fn cluster_of(&self, line: LineId) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.binary_search(&line).is_ok())
            .map(|i| i + 1)
    }

    /// Lowest line id of cluster `l`.
    pub fn representative(&self, l: usize) -> LineId {
        self.clusters[l - 1][0]
    }

    fn from_groups(kind: PartitionKind, groups: Vec<Vec<LineId>>, separators: BTreeSet<BusId>) -> Self {
        let mut clusters: Vec<Vec<LineId>> = groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        clusters.sort_by_key(|c| c[0]);
        ClusterPartition {
            kind,
            clusters,
            separators,
        }
    }
}

/// Every closed real line in its own cluster.
pub fn per_line_partition(net: &NetworkModel) -> ClusterPartition {
    let groups = real_lines(net).map(|l| vec![l]).collect();
    ClusterPartition::from_groups(PartitionKind::Lines, groups, BTreeSet::new())
}

fn real_lines(net: &NetworkModel) -> impl Iterator<Item = LineId> + '_ {
    net.closed_lines()
        .filter(|l| !net.is_fictitious(l.from_bus) && !net.is_fictitious(l.to_bus))
        .map(|l| l.id)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn groups_of(net: &NetworkModel, uf: &mut UnionFind) -> Vec<Vec<LineId>> {
    let mut groups: BTreeMap<usize, Vec<LineId>> = BTreeMap::new();
    for l in real_lines(net) {
        groups.entry(uf.find(l - 1)).or_default().push(l);
    }
    groups.into_values().collect()
}

fn require_theorem1(net: &NetworkModel) -> Result<()> {
    net.validate()?;
    check_theorem1(net).require_extended()
}

/// Definition-1 clusters.
///
/// Lines between two monitored buses stay alone. A monitored bus whose lines
/// all lead to non-monitored buses pulls those lines together; a
/// non-monitored bus of degree 2 joins its two lines when both are eligible.
/// Non-monitored forks are borders.
pub fn compute_ufc(net: &NetworkModel) -> Result<ClusterPartition> {
    require_theorem1(net)?;
    let topo = net.topology();
    let mm_at: Vec<bool> = (1..=net.n_buses())
        .map(|b| {
            net.is_monitored(b)
                && topo
                    .neighbors(b)
                    .iter()
                    .any(|&(nb, _)| net.is_monitored(nb))
        })
        .collect();
    let eligible = |l: LineId| -> bool {
        let line = &net.lines[l - 1];
        let (a, b) = (line.from_bus, line.to_bus);
        match (net.is_monitored(a), net.is_monitored(b)) {
            (true, false) => !mm_at[a - 1],
            (false, true) => !mm_at[b - 1],
            _ => false,
        }
    };
    let mut uf = UnionFind::new(net.n_lines());
    let mut separators = BTreeSet::new();
    for b in 1..=net.n_buses() {
        let lines: Vec<LineId> = topo
            .neighbors(b)
            .iter()
            .map(|&(_, l)| l)
            .filter(|&l| eligible(l))
            .collect();
        if net.is_monitored(b) {
            for w in lines.windows(2) {
                uf.union(w[0] - 1, w[1] - 1);
            }
        } else if topo.degree(b) == 2 && lines.len() == 2 {
            uf.union(lines[0] - 1, lines[1] - 1);
        } else if topo.degree(b) > 2 {
            separators.insert(b);
        }
    }
    Ok(ClusterPartition::from_groups(
        PartitionKind::Ufc,
        groups_of(net, &mut uf),
        separators,
    ))
}

/// Clusters as connected pieces of the line graph cut at non-monitored buses
/// of degree > 2 (fictitious stubs count towards the degree).
pub fn compute_ufc2(net: &NetworkModel) -> Result<ClusterPartition> {
    require_theorem1(net)?;
    let topo = net.topology();
    let mut uf = UnionFind::new(net.n_lines());
    let mut separators = BTreeSet::new();
    for b in 1..=net.n_buses() {
        if net.is_fictitious(b) {
            continue;
        }
        if !net.is_monitored(b) && topo.degree(b) > 2 {
            separators.insert(b);
            continue;
        }
        let lines: Vec<LineId> = topo
            .neighbors(b)
            .iter()
            .filter(|&&(nb, _)| !net.is_fictitious(nb))
            .map(|&(_, l)| l)
            .collect();
        for w in lines.windows(2) {
            uf.union(w[0] - 1, w[1] - 1);
        }
    }
    Ok(ClusterPartition::from_groups(
        PartitionKind::Ufc2,
        groups_of(net, &mut uf),
        separators,
    ))
}

/// Resolution from the degree formula: one, plus `degree - 1` for every
/// non-monitored real fork, plus one per split bus.
pub fn cluster_count(net: &NetworkModel) -> usize {
    let mut r = 1;
    for b in net.physical_buses() {
        if net.is_monitored(b) {
            continue;
        }
        let rho = net.physical_degree(b).unwrap_or(0);
        if rho > 2 {
            r += rho - 1;
        } else if rho == 2 && net.fictitious_partner(b).is_some() {
            r += 1;
        }
    }
    r
}

/// The four shapes a Definition-1 cluster can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UfcType {
    SingleMonitoredPair,
    SingleMixed,
    MultiTerminal,
    MultiNonTerminal,
}

pub fn ufc_type(net: &NetworkModel, cluster: &[LineId]) -> UfcType {
    let topo = net.topology();
    if let [l] = cluster {
        let line = &net.lines[l - 1];
        return if net.is_monitored(line.from_bus) && net.is_monitored(line.to_bus) {
            UfcType::SingleMonitoredPair
        } else {
            UfcType::SingleMixed
        };
    }
    let terminal = cluster.iter().any(|&l| {
        let line = &net.lines[l - 1];
        topo.degree(line.from_bus) == 1 || topo.degree(line.to_bus) == 1
    });
    if terminal {
        UfcType::MultiTerminal
    } else {
        UfcType::MultiNonTerminal
    }
}

/// Split every line between two monitored buses at its midpoint. Returns the
/// extended network and, per original line id, the inserted bus.
pub fn fault_extended_grid(net: &NetworkModel) -> Result<(NetworkModel, BTreeMap<LineId, BusId>)> {
    let mut out = net.clone();
    let mut mids = BTreeMap::new();
    let mm: Vec<LineId> = real_lines(net)
        .filter(|&l| {
            let line = &net.lines[l - 1];
            net.is_monitored(line.from_bus) && net.is_monitored(line.to_bus)
        })
        .collect();
    for l in mm {
        let (next, mid) = crate::grid::split_line(&out, l, 0.5)?;
        out = next;
        mids.insert(l, mid);
    }
    Ok((out, mids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn net(n: usize, edges: &[(usize, usize)], monitored: &[usize]) -> NetworkModel {
        let mut net = NetworkModel::from_edges(n, edges, C::new(0.1, 0.2), C::new(0.3, 0.5));
        net.monitored = monitored.iter().copied().collect();
        net
    }

    fn chain(n: usize, monitored: &[usize]) -> NetworkModel {
        let edges: Vec<_> = (1..n).map(|k| (k, k + 1)).collect();
        net(n, &edges, monitored)
    }

    #[test]
    fn lemma1_cases() {
        assert!(check_lemma1(&chain(3, &[1, 3])).observable_base);
        assert!(check_lemma1(&chain(3, &[1, 2, 3])).observable_base);
        assert!(check_lemma1(&chain(4, &[1, 4])).observable_base);
        let r = check_lemma1(&chain(5, &[1, 5]));
        assert!(!r.observable_base);
        assert_eq!(r.violations[0].condition, Condition::SharedNeighbors);
        assert_eq!(r.violations[0].buses, vec![3, 2, 4]);
    }

    #[test]
    fn theorem1_cases() {
        assert!(check_theorem1(&chain(3, &[1, 3])).observable_extended);
        let r = check_theorem1(&chain(3, &[1, 2]));
        assert!(!r.observable_extended);
        assert!(r
            .violations
            .iter()
            .any(|v| v.condition == Condition::TerminalNotMonitored && v.buses == vec![3]));
        let r = check_theorem1(&chain(4, &[1, 4]));
        assert!(r
            .violations
            .iter()
            .any(|v| v.condition == Condition::AdjacentNonMonitored && v.buses == vec![2, 3]));
    }

    #[test]
    fn ufc_of_small_chains() {
        let p = compute_ufc(&chain(2, &[1, 2])).unwrap();
        assert_eq!(p.clusters, vec![vec![1]]);
        let p = compute_ufc(&chain(3, &[1, 3])).unwrap();
        assert_eq!(p.clusters, vec![vec![1, 2]]);
        // bus 3 is monitored, so lines 1 and 2 cannot share a cluster
        let p = compute_ufc(&chain(5, &[1, 3, 4, 5])).unwrap();
        assert_eq!(p.clusters, vec![vec![1], vec![2], vec![3], vec![4]]);
        let p = compute_ufc(&chain(5, &[1, 2, 4, 5])).unwrap();
        assert_eq!(p.clusters, vec![vec![1], vec![2], vec![3], vec![4]]);
    }

    #[test]
    fn fork_splits_ufc2() {
        // non-monitored fork 2 with three monitored leaves
        let n = net(4, &[(1, 2), (2, 3), (2, 4)], &[1, 3, 4]);
        let p = compute_ufc2(&n).unwrap();
        assert_eq!(p.r(), 3);
        assert_eq!(cluster_count(&n), 3);
        assert_eq!(p.separators, BTreeSet::from([2]));
    }

    #[test]
    fn ufc2_merges_across_monitored_buses() {
        let n = chain(5, &[1, 3, 4, 5]);
        let p = compute_ufc2(&n).unwrap();
        assert_eq!(p.clusters, vec![vec![1, 2, 3, 4]]);
        assert_eq!(cluster_count(&n), 1);
    }

    #[test]
    fn unobservable_input_is_rejected() {
        assert!(matches!(
            compute_ufc2(&chain(4, &[1, 4])),
            Err(Error::Observability { .. })
        ));
    }

    #[test]
    fn types_of_fork_example() {
        // 1M-2N-3M-4N(fork)-5M, 4-6M-7M
        let n = net(7, &[(1, 2), (2, 3), (3, 4), (4, 5), (4, 6), (6, 7)], &[1, 3, 5, 6, 7]);
        let p = compute_ufc(&n).unwrap();
        let types: Vec<_> = p.clusters.iter().map(|c| ufc_type(&n, c)).collect();
        assert_eq!(p.clusters, vec![vec![1, 2, 3], vec![4], vec![5], vec![6]]);
        assert_eq!(
            types,
            vec![
                UfcType::MultiTerminal,
                UfcType::SingleMixed,
                UfcType::SingleMixed,
                UfcType::SingleMonitoredPair
            ]
        );
    }
}
