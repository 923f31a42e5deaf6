//! Optimal PMU placement, cluster splitting and the resolution bounds.

mod solver;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Bus, BusId, Line, LineId, NetworkModel};
use crate::observability::check_theorem1;

pub use solver::min_weight_cover;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Fewest PMUs.
    MinCount,
    /// Fewest PMUs among placements leaving the most forks unmonitored.
    MaxResolution,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::MinCount => "min_count",
            Objective::MaxResolution => "max_resolution",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_count" => Ok(Objective::MinCount),
            "max_resolution" => Ok(Objective::MaxResolution),
            _ => Err(Error::Parse(format!("unknown objective {s:?}"))),
        }
    }
}

/// Binary placement problem: `min c^T g` with `A g >= f`, fixed entries and
/// pairwise cover constraints. Buses are those of `net`, which already carries
/// the fictitious stubs of any requested splits.
#[derive(Debug, Clone)]
pub struct OpaProblem {
    pub net: NetworkModel,
    pub objective: Objective,
    /// Bus degree, the right-hand side `f`.
    pub degree: Vec<usize>,
    pub cost: Vec<u64>,
    pub fixed: BTreeMap<BusId, bool>,
    pub pairs: Vec<(BusId, BusId)>,
    /// Buses given a voltage-only meter to split a cluster.
    pub splits: Vec<BusId>,
    /// Monitored switch ends used as separation buses while their switch is
    /// closed: (bus, switch line).
    pub separations: Vec<(BusId, LineId)>,
    /// Forks that lose their third line in some topology.
    pub degraded_forks: BTreeSet<BusId>,
    /// Alternative switch states, without stubs.
    pub topologies: Vec<NetworkModel>,
    /// Number of physical buses.
    pub n_physical: usize,
}

impl OpaProblem {
    /// `A_ii = degree`, `A_ik = 1` for neighbours.
    pub fn a_matrix(&self) -> Vec<Vec<u32>> {
        let n = self.net.n_buses();
        let mut a = vec![vec![0u32; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = self.degree[i] as u32;
        }
        for l in self.net.closed_lines() {
            a[l.from_bus - 1][l.to_bus - 1] = 1;
            a[l.to_bus - 1][l.from_bus - 1] = 1;
        }
        a
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .net
            .closed_lines()
            .map(|l| (l.from_bus - 1, l.to_bus - 1))
            .collect();
        e.extend(self.pairs.iter().map(|&(a, b)| (a - 1, b - 1)));
        e
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementSolution {
    /// Per physical bus, 1 when it carries a PMU.
    pub gamma: Vec<u8>,
    pub voltage_only: Vec<BusId>,
    pub d_star: usize,
    pub r_star: usize,
    pub d_bar: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    pub delta_r: usize,
}

impl PlacementSolution {
    pub fn monitored(&self) -> BTreeSet<BusId> {
        (1..=self.gamma.len())
            .filter(|&b| self.gamma[b - 1] == 1)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bounds {
    pub d_bar: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    pub r_star: usize,
    pub delta_r: usize,
}

/// Counts for the upper bound on the PMU number and the resulting
/// resolution, from the physical topology of `net`.
pub fn theorem3_bounds(
    net: &NetworkModel,
    gamma: &[u8],
    objective: Objective,
    d3: usize,
) -> Result<Bounds> {
    let n = net.physical_buses().count();
    if gamma.len() != n {
        return Err(Error::Domain(format!(
            "placement has {} entries for {n} buses",
            gamma.len()
        )));
    }
    let (mut d1, mut non_mon, mut delta_r, mut r) = (0, 0, 0, 1);
    for b in net.physical_buses() {
        let rho = net.physical_degree(b)?;
        if rho <= 2 {
            continue;
        }
        d1 += rho - 2;
        if gamma[b - 1] == 1 {
            delta_r += rho - 1;
        } else {
            non_mon += 1;
            r += rho - 1;
        }
    }
    let d2 = match objective {
        Objective::MaxResolution => non_mon,
        Objective::MinCount => 0,
    };
    Ok(Bounds {
        d_bar: n / 2 + 1 + d1 + d2 + d3,
        d1,
        d2,
        d3,
        r_star: r + d3,
        delta_r,
    })
}

/// Attach a fictitious terminal bus to `kappa` through a 1 ohm line, monitor
/// it and give `kappa` a voltage-only meter instead of a PMU.
pub fn add_split_bus(net: &NetworkModel, kappa: BusId) -> Result<NetworkModel> {
    let bus = net.bus(kappa)?;
    if bus.fictitious_of.is_some() || net.fictitious_partner(kappa).is_some() {
        return Err(Error::Domain(format!("bus {kappa} is already split")));
    }
    if net.physical_degree(kappa)? < 2 {
        return Err(Error::Domain(format!("cannot split at terminal bus {kappa}")));
    }
    let mut out = net.clone();
    let stub = out.n_buses() + 1;
    let mut b = Bus::new(stub);
    b.fictitious_of = Some(kappa);
    out.buses.push(b);
    let one = Complex64::new(1.0, 0.0);
    let id = out.n_lines() + 1;
    out.lines.push(Line::new(id, kappa, stub, one, one));
    out.monitored.remove(&kappa);
    out.monitored.insert(stub);
    out.voltage_only.insert(kappa);
    Ok(out)
}

fn physical_only(net: &NetworkModel, what: &str) -> Result<()> {
    if net.buses.iter().any(|b| b.fictitious_of.is_some()) {
        return Err(Error::Domain(format!("{what} already contains fictitious buses")));
    }
    Ok(())
}

fn pin(fixed: &mut BTreeMap<BusId, bool>, bus: BusId, value: bool, why: &str) -> Result<()> {
    match fixed.insert(bus, value) {
        Some(prev) if prev != value => Err(Error::ConstraintConflict(format!(
            "bus {bus} must be {} ({why}) but is pinned {}",
            u8::from(value),
            u8::from(prev)
        ))),
        _ => Ok(()),
    }
}

/// Assemble the placement problem for `net` (physical buses only).
///
/// `pins` fix buses to monitored (`true`) or not; `splits` are buses that get
/// a voltage-only meter and a fictitious terminal; `reconfig` lists the other
/// switch states the placement must serve.
pub fn build_opa(
    net: &NetworkModel,
    objective: Objective,
    pins: &BTreeMap<BusId, bool>,
    splits: &[BusId],
    reconfig: &[NetworkModel],
) -> Result<OpaProblem> {
    net.validate()?;
    physical_only(net, "network")?;
    let n_physical = net.n_buses();
    for t in reconfig {
        t.validate()?;
        physical_only(t, "reconfiguration")?;
        if t.n_buses() != n_physical || t.n_lines() != net.n_lines() {
            return Err(Error::Topology(
                "reconfigurations must share buses and lines with the network".into(),
            ));
        }
    }

    let mut fixed = BTreeMap::new();
    for (&b, &v) in pins {
        net.bus(b)?;
        pin(&mut fixed, b, v, "user pin")?;
    }

    // forks requested as splits only need their neighbouring forks cheap
    let mut fork_splits = BTreeSet::new();
    let mut ext = net.clone();
    let mut stub_splits = Vec::new();
    for &k in splits {
        if net.physical_degree(k)? > 2 {
            pin(&mut fixed, k, false, "split")?;
            fork_splits.insert(k);
        } else {
            ext = add_split_bus(&ext, k)?;
            pin(&mut fixed, k, false, "split")?;
            stub_splits.push(k);
        }
    }

    let topo = ext.topology();
    let degree: Vec<usize> = (1..=ext.n_buses()).map(|b| topo.degree(b)).collect();
    for b in 1..=ext.n_buses() {
        if degree[b - 1] == 1 {
            pin(&mut fixed, b, true, "terminal")?;
        }
    }

    let mut pairs = Vec::new();
    let mut switches = Vec::new();
    let mut degraded_forks = BTreeSet::new();
    for t in reconfig {
        for (l, lt) in net.lines.iter().zip(&t.lines) {
            if (l.from_bus, l.to_bus) != (lt.from_bus, lt.to_bus) {
                return Err(Error::Topology(format!("line {} differs in its ends", l.id)));
            }
            if l.status != lt.status && !switches.contains(&l.id) {
                switches.push(l.id);
                pairs.push((l.from_bus, l.to_bus));
            }
        }
        let tt = t.topology();
        for b in 1..=n_physical {
            if tt.degree(b) == 1 {
                pin(&mut fixed, b, true, "terminal after switching")?;
            }
            if net.physical_degree(b)? == 3 && tt.degree(b) == 2 {
                degraded_forks.insert(b);
            }
        }
    }

    let mut separations = Vec::new();
    for &s in &switches {
        let l = &net.lines[s - 1];
        if fixed.get(&l.from_bus) == Some(&true) && fixed.get(&l.to_bus) == Some(&true) {
            let alpha = l.from_bus.min(l.to_bus);
            let beta = l.from_bus.max(l.to_bus);
            let kappa = topo
                .neighbors(alpha)
                .iter()
                .map(|&(nb, _)| nb)
                .filter(|&nb| nb != beta && !ext.is_fictitious(nb))
                .min()
                .ok_or_else(|| {
                    Error::ConstraintConflict(format!(
                        "switch end {alpha} has no other neighbour to monitor"
                    ))
                })?;
            pin(&mut fixed, kappa, true, "separation at a switch")?;
            separations.push((alpha, s));
        }
    }

    let n = n_physical as u64;
    let cost: Vec<u64> = (1..=ext.n_buses())
        .map(|b| {
            let rho = if ext.is_fictitious(b) { 1 } else { net.physical_degree(b).unwrap_or(0) };
            let cheap = fork_splits
                .iter()
                .any(|&k| net.topology().neighbors(k).iter().any(|&(nb, _)| nb == b));
            match objective {
                Objective::MaxResolution if rho > 2 && !cheap => n * rho as u64,
                _ => 1,
            }
        })
        .collect();

    Ok(OpaProblem {
        net: ext,
        objective,
        degree,
        cost,
        fixed,
        pairs,
        splits: stub_splits,
        separations,
        degraded_forks,
        topologies: reconfig.to_vec(),
        n_physical,
    })
}

/// Solve exactly. Among optimal placements under `MaxResolution` the one
/// losing the fewest clusters to monitored forks is returned.
pub fn solve_opa(problem: &OpaProblem) -> Result<PlacementSolution> {
    let net = &problem.net;
    let n = net.n_buses();
    // secondary key: clusters lost at monitored forks
    let lost: Vec<u64> = (1..=n)
        .map(|b| {
            if b > problem.n_physical || problem.objective == Objective::MinCount {
                return 0;
            }
            net.physical_degree(b).map_or(0, |r| r.saturating_sub(1) as u64 * u64::from(r > 2))
        })
        .collect();
    let scale = 1 + lost.iter().sum::<u64>();
    let weight: Vec<u64> = (0..n).map(|i| problem.cost[i] * scale + lost[i]).collect();
    let fixed: Vec<Option<bool>> = (1..=n).map(|b| problem.fixed.get(&b).copied()).collect();
    let cover = min_weight_cover(n, &problem.edges(), &weight, &fixed)?;

    let gamma: Vec<u8> = (1..=problem.n_physical).map(|b| u8::from(cover[b - 1])).collect();
    for (i, row) in problem.a_matrix().iter().enumerate() {
        let lhs: u32 = row
            .iter()
            .enumerate()
            .map(|(k, a)| a * u32::from(cover[k]))
            .sum();
        if lhs < problem.degree[i] as u32 {
            return Err(Error::Infeasible(format!("cover constraint fails at bus {}", i + 1)));
        }
    }

    let degraded: Vec<BusId> = problem
        .degraded_forks
        .iter()
        .copied()
        .filter(|&b| gamma[b - 1] == 0)
        .collect();
    let d3 = problem.splits.len() + degraded.len();
    let bounds = theorem3_bounds(&problem.net, &gamma, problem.objective, d3)?;
    let mut voltage_only: Vec<BusId> = problem.splits.clone();
    voltage_only.extend(degraded);
    voltage_only.sort_unstable();
    let d_star = gamma.iter().map(|&g| g as usize).sum();
    Ok(PlacementSolution {
        gamma,
        voltage_only,
        d_star,
        r_star: bounds.r_star,
        d_bar: bounds.d_bar,
        d1: bounds.d1,
        d2: bounds.d2,
        d3: bounds.d3,
        delta_r: bounds.delta_r,
    })
}

/// The metered network for one switch state: PMUs from the solution, split
/// stubs for the requested splits, separation buses at closed switches and
/// degraded forks.
pub fn placed_network(
    problem: &OpaProblem,
    solution: &PlacementSolution,
    switch_state: &NetworkModel,
) -> Result<NetworkModel> {
    let mut net = switch_state.clone();
    physical_only(&net, "switch state")?;
    net.monitored = solution.monitored();
    net.voltage_only.clear();
    for &k in &problem.splits {
        net = add_split_bus(&net, k)?;
    }
    let topo = net.topology();
    for &(alpha, line) in &problem.separations {
        if net.lines[line - 1].is_closed() && topo.degree(alpha) == 2 {
            net = add_split_bus(&net, alpha)?;
        }
    }
    for &b in &problem.degraded_forks {
        if solution.gamma[b - 1] == 0 {
            if topo.degree(b) == 2 {
                net = add_split_bus(&net, b)?;
            } else {
                net.voltage_only.insert(b);
            }
        }
    }
    net.validate()?;
    check_theorem1(&net).require_extended()?;
    Ok(net)
}

#[derive(Debug, Clone)]
pub struct Placement {
    pub problem: OpaProblem,
    pub solution: PlacementSolution,
    /// Metered network in the base switch state.
    pub net: NetworkModel,
    /// Metered networks for each reconfiguration, in request order.
    pub topologies: Vec<NetworkModel>,
}

/// Build, solve and apply a placement, checking observability in every
/// switch state.
pub fn place(
    net: &NetworkModel,
    objective: Objective,
    pins: &BTreeMap<BusId, bool>,
    splits: &[BusId],
    reconfig: &[NetworkModel],
) -> Result<Placement> {
    let problem = build_opa(net, objective, pins, splits, reconfig)?;
    let solution = solve_opa(&problem)?;
    let placed = placed_network(&problem, &solution, net)?;
    let topologies = reconfig
        .iter()
        .map(|t| placed_network(&problem, &solution, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Placement {
        problem,
        solution,
        net: placed,
        topologies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observability::{cluster_count, compute_ufc2};
    use Complex64 as C;

    fn tree(n: usize, edges: &[(usize, usize)]) -> NetworkModel {
        NetworkModel::from_edges(n, edges, C::new(0.1, 0.1), C::new(0.3, 0.3))
    }

    fn chain(n: usize) -> NetworkModel {
        let e: Vec<_> = (1..n).map(|k| (k, k + 1)).collect();
        tree(n, &e)
    }

    fn solve(net: &NetworkModel, obj: Objective) -> PlacementSolution {
        let p = build_opa(net, obj, &BTreeMap::new(), &[], &[]).unwrap();
        solve_opa(&p).unwrap()
    }

    #[test]
    fn a_matrix_of_three_bus_chain() {
        let p = build_opa(&chain(3), Objective::MinCount, &BTreeMap::new(), &[], &[]).unwrap();
        assert_eq!(p.a_matrix(), vec![vec![1, 1, 0], vec![1, 2, 1], vec![0, 1, 1]]);
        assert_eq!(p.degree, vec![1, 2, 1]);
    }

    #[test]
    fn fork_cost() {
        let net = tree(7, &[(1, 2), (2, 3), (2, 4), (2, 5), (2, 6), (2, 7)]);
        let p = build_opa(&net, Objective::MaxResolution, &BTreeMap::new(), &[], &[]).unwrap();
        assert_eq!(p.cost[1], 6 * 7);
        assert_eq!(p.cost[0], 1);
    }

    #[test]
    fn chain_alternates() {
        let s = solve(&chain(5), Objective::MinCount);
        assert_eq!(s.gamma, vec![1, 0, 1, 0, 1]);
        assert_eq!(s.d_star, 3);
        assert_eq!((s.d_bar, s.r_star), (3, 1));
    }

    #[test]
    fn star_keeps_centre_free() {
        let net = tree(4, &[(1, 2), (2, 3), (2, 4)]);
        let s = solve(&net, Objective::MaxResolution);
        assert_eq!(s.gamma, vec![1, 0, 1, 1]);
        assert_eq!(s.r_star, 3);
    }

    #[test]
    fn adjacent_forks_leave_higher_degree_free() {
        // fork 2 (degree 3) next to fork 3 (degree 4)
        let net = tree(
            9,
            &[(1, 2), (2, 4), (4, 5), (2, 3), (3, 6), (3, 7), (7, 8), (3, 9)],
        );
        let s = solve(&net, Objective::MaxResolution);
        assert_eq!(s.gamma[2], 0);
        assert_eq!(s.gamma[1], 1);
    }

    #[test]
    fn split_adds_cluster() {
        let net = chain(5);
        let p = build_opa(&net, Objective::MinCount, &BTreeMap::new(), &[3], &[]).unwrap();
        let s = solve_opa(&p).unwrap();
        assert_eq!(s.voltage_only, vec![3]);
        assert_eq!((s.d3, s.r_star), (1, 2));
        let placed = placed_network(&p, &s, &net).unwrap();
        assert_eq!(cluster_count(&placed), 2);
        assert_eq!(compute_ufc2(&placed).unwrap().r(), 2);
        assert!(add_split_bus(&net, 5).is_err());
    }

    #[test]
    fn conflicting_pins() {
        let pins = BTreeMap::from([(1, false)]);
        let err = build_opa(&chain(3), Objective::MinCount, &pins, &[], &[]).unwrap_err();
        assert!(matches!(err, Error::ConstraintConflict(_)));
    }

    #[test]
    fn switch_adds_pair() {
        let mut net = tree(5, &[(1, 2), (2, 3), (3, 4), (2, 5), (4, 5)]);
        net.lines[4].status = crate::grid::LineStatus::NormallyOpen;
        let mut t2 = net.clone();
        t2.lines[4].status = crate::grid::LineStatus::Closed;
        t2.lines[2].status = crate::grid::LineStatus::NormallyOpen;
        let p = build_opa(&net, Objective::MinCount, &BTreeMap::new(), &[], &[t2.clone()]).unwrap();
        assert!(p.pairs.contains(&(4, 5)));
        assert!(p.pairs.contains(&(3, 4)));
        let s = solve_opa(&p).unwrap();
        placed_network(&p, &s, &t2).unwrap();
    }
}
