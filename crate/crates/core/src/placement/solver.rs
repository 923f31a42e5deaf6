//! Exact minimum-weight vertex cover for the placement problem.
//!
//! Fixed zeros force their neighbours to one, then the free part splits into
//! connected components. Tree components are solved by dynamic programming;
//! the rest by branch and bound on the highest-degree vertex (lowest index on
//! ties), bounded by fixed cost plus a greedy edge packing.

use crate::error::{Error, Result};

struct Graph {
    adj: Vec<Vec<usize>>,
    weight: Vec<u64>,
}

type Assign = Vec<Option<bool>>;

/// Minimum total weight of a vertex set touching every edge, honouring the
/// fixed entries. Vertices are 0-based.
pub fn min_weight_cover(
    n: usize,
    edges: &[(usize, usize)],
    weight: &[u64],
    fixed: &[Option<bool>],
) -> Result<Vec<bool>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::Domain(format!("edge ({a}, {b}) outside {n} vertices")));
        }
        if a == b {
            return Err(Error::Domain(format!("self-loop at vertex {a}")));
        }
        if !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    let g = Graph {
        adj,
        weight: weight.to_vec(),
    };
    let mut assign: Assign = fixed.to_vec();
    let seeds: Vec<usize> = (0..n).filter(|&v| assign[v] == Some(false)).collect();
    for v in seeds {
        if !g.propagate(&mut assign, v) {
            return Err(Error::Infeasible(format!(
                "vertex {} is pinned unmonitored next to another pinned one",
                v + 1
            )));
        }
    }
    let free: Vec<usize> = (0..n).filter(|&v| assign[v].is_none()).collect();
    for comp in g.components(&assign, &free) {
        let (_, sol) = g.solve(&assign, &comp);
        for (v, x) in sol {
            assign[v] = Some(x);
        }
    }
    Ok(assign.into_iter().map(|x| x.unwrap_or(false)).collect())
}

impl Graph {
    /// Set `v` and push the consequences of zeros. False on a contradiction.
    fn propagate(&self, assign: &mut Assign, v: usize) -> bool {
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if assign[u] != Some(false) {
                continue;
            }
            for &w in &self.adj[u] {
                match assign[w] {
                    Some(false) => return false,
                    Some(true) => {}
                    None => assign[w] = Some(true),
                }
            }
        }
        true
    }

    fn free_neighbors<'a>(&'a self, assign: &'a Assign, v: usize) -> impl Iterator<Item = usize> + 'a {
        self.adj[v].iter().copied().filter(move |&w| assign[w].is_none())
    }

    /// Connected components of the free vertices in `verts`.
    fn components(&self, assign: &Assign, verts: &[usize]) -> Vec<Vec<usize>> {
        let mut seen = vec![false; assign.len()];
        let mut out = Vec::new();
        for &s in verts {
            if seen[s] || assign[s].is_some() {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                for w in self.free_neighbors(assign, u) {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn edge_count(&self, assign: &Assign, comp: &[usize]) -> usize {
        comp.iter().map(|&v| self.free_neighbors(assign, v).count()).sum::<usize>() / 2
    }

    /// Exact optimum of one free component.
    fn solve(&self, assign: &Assign, comp: &[usize]) -> (u64, Vec<(usize, bool)>) {
        if comp.len() == 1 {
            return (0, vec![(comp[0], false)]);
        }
        if self.edge_count(assign, comp) + 1 == comp.len() {
            return self.tree_dp(assign, comp);
        }
        let mut best: Option<(u64, Vec<(usize, bool)>)> = None;
        self.branch(assign, comp, &mut best);
        best.expect("a cover always exists with every free vertex set")
    }

    fn tree_dp(&self, assign: &Assign, comp: &[usize]) -> (u64, Vec<(usize, bool)>) {
        let root = comp[0];
        let mut order = vec![root];
        let mut parent = vec![usize::MAX; assign.len()];
        parent[root] = root;
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            for w in self.free_neighbors(assign, u) {
                if parent[w] == usize::MAX {
                    parent[w] = u;
                    order.push(w);
                }
            }
            i += 1;
        }
        // cost with the vertex out / in the cover
        let mut out_cost = vec![0u64; assign.len()];
        let mut in_cost = vec![0u64; assign.len()];
        for &u in order.iter().rev() {
            in_cost[u] += self.weight[u];
            if u != root {
                let p = parent[u];
                out_cost[p] += in_cost[u];
                in_cost[p] += in_cost[u].min(out_cost[u]);
            }
        }
        let mut take = vec![false; assign.len()];
        take[root] = in_cost[root] < out_cost[root];
        for &u in &order[1..] {
            let p = parent[u];
            take[u] = !take[p] || in_cost[u] < out_cost[u];
        }
        let cost = in_cost[root].min(out_cost[root]);
        (cost, order.iter().map(|&u| (u, take[u])).collect())
    }

    /// Greedy packing of disjoint free edges: each needs its own vertex.
    fn packing_bound(&self, assign: &Assign, comp: &[usize]) -> u64 {
        let mut used = vec![false; assign.len()];
        let mut lb = 0;
        for &u in comp {
            if used[u] {
                continue;
            }
            if let Some(w) = self.free_neighbors(assign, u).find(|&w| !used[w]) {
                used[u] = true;
                used[w] = true;
                lb += self.weight[u].min(self.weight[w]);
            }
        }
        lb
    }

    fn branch(
        &self,
        assign: &Assign,
        comp: &[usize],
        best: &mut Option<(u64, Vec<(usize, bool)>)>,
    ) {
        let v = *comp
            .iter()
            .max_by_key(|&&v| (self.free_neighbors(assign, v).count(), std::cmp::Reverse(v)))
            .expect("non-empty component");
        for value in [false, true] {
            let mut a = assign.clone();
            a[v] = Some(value);
            if !self.propagate(&mut a, v) {
                continue;
            }
            let fixed_cost: u64 = comp
                .iter()
                .filter(|&&u| a[u] == Some(true))
                .map(|&u| self.weight[u])
                .sum();
            let rest: Vec<usize> = comp.iter().copied().filter(|&u| a[u].is_none()).collect();
            let parts = self.components(&a, &rest);
            let lb: u64 = parts.iter().map(|c| self.packing_bound(&a, c)).sum();
            if matches!(best, Some((b, _)) if fixed_cost + lb >= *b) {
                continue;
            }
            let mut total = fixed_cost;
            let mut sol: Vec<(usize, bool)> = comp
                .iter()
                .filter_map(|&u| a[u].map(|x| (u, x)))
                .collect();
            for part in &parts {
                let (c, s) = self.solve(&a, part);
                total += c;
                sol.extend(s);
            }
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((total, sol));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(n: usize, edges: &[(usize, usize)], w: &[u64], fixed: &[Option<bool>]) -> Option<u64> {
        (0u32..1 << n)
            .filter(|m| {
                (0..n).all(|v| fixed[v].is_none_or(|x| x == (m >> v & 1 == 1)))
                    && edges.iter().all(|&(a, b)| m >> a & 1 == 1 || m >> b & 1 == 1)
            })
            .map(|m| (0..n).filter(|v| m >> v & 1 == 1).map(|v| w[v]).sum())
            .min()
    }

    fn cost(sol: &[bool], w: &[u64]) -> u64 {
        sol.iter().zip(w).filter(|(s, _)| **s).map(|(_, w)| w).sum()
    }

    #[test]
    fn triangle_plus_tail() {
        let edges = [(0, 1), (1, 2), (2, 0), (2, 3)];
        let w = [1, 1, 1, 1];
        let sol = min_weight_cover(4, &edges, &w, &[None; 4]).unwrap();
        assert_eq!(cost(&sol, &w), 2);
    }

    #[test]
    fn conflicting_zeros() {
        let r = min_weight_cover(2, &[(0, 1)], &[1, 1], &[Some(false), Some(false)]);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    proptest! {
        #[test]
        fn matches_enumeration(
            n in 2usize..11,
            extra in proptest::collection::vec((0usize..11, 0usize..11), 0..4),
            w in proptest::collection::vec(1u64..5, 11),
            pins in proptest::collection::vec(0u8..6, 11),
            parents in proptest::collection::vec(0usize..100, 11),
        ) {
            let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (parents[v] % v, v)).collect();
            edges.extend(extra.into_iter().filter(|&(a, b)| a < n && b < n && a != b));
            let fixed: Vec<Option<bool>> = (0..n)
                .map(|v| match pins[v] { 0 => Some(true), 1 => Some(false), _ => None })
                .collect();
            let want = brute(n, &edges, &w[..n], &fixed);
            match min_weight_cover(n, &edges, &w[..n], &fixed) {
                Ok(sol) => {
                    prop_assert!(edges.iter().all(|&(a, b)| sol[a] || sol[b]));
                    prop_assert_eq!(Some(cost(&sol, &w[..n])), want);
                }
                Err(_) => prop_assert_eq!(want, None),
            }
        }
    }
}
