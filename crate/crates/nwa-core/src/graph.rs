//! Graph algorithms over exact rational weights: strongly connected
//! components, minimum-mean cycles (Karp), and Bellman–Ford shortest paths
//! with negative-cycle detection.
//!
//! These are hand-rolled rather than taken from a graph crate because the
//! deciders need exact `BigRational` arithmetic end to end; the common
//! shortest-path implementations are float-based.

use crate::value::{rat_int, Rat};
use num::{BigInt, Integer, One, ToPrimitive, Zero};
use std::collections::VecDeque;

/// A directed graph over nodes `0..n` with rational edge weights.
#[derive(Debug, Clone)]
pub struct WeightedDigraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, Rat)>,
}

impl WeightedDigraph {
    pub fn new(n: usize) -> Self {
        WeightedDigraph { n, edges: Vec::new() }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: Rat) {
        debug_assert!(from < self.n && to < self.n);
        self.edges.push((from, to, weight));
    }

    fn adjacency(&self) -> Vec<Vec<(usize, &Rat)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (u, v, w) in &self.edges {
            adj[*u].push((*v, w));
        }
        adj
    }
}

/// Strongly connected components in reverse topological order (Tarjan,
/// iterative). Every node appears in exactly one component.
pub fn sccs(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (u, v) in edges {
        adj[*u].push(*v);
    }
    let mut index = vec![usize::MAX; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0usize;

    // Explicit DFS stack of (node, next-child index) to avoid recursion.
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        let mut dfs: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&mut (v, ref mut child)) = dfs.last_mut() {
            if *child == 0 {
                index[v] = counter;
                lowlink[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    dfs.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                if lowlink[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
                dfs.pop();
                if let Some(&mut (parent, _)) = dfs.last_mut() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
            }
        }
    }
    components
}

/// Nodes reachable from the sources along the edges.
pub fn reachable(n: usize, edges: &[(usize, usize)], sources: &[usize]) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for (u, v) in edges {
        adj[*u].push(*v);
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Minimum cycle mean of the graph together with a witnessing cycle (as a
/// node sequence `c₀ c₁ … c₀`-implied, returned without the closing repeat).
/// Returns `None` when the graph is acyclic.
///
/// Karp's recurrence computes the mean; the cycle is then extracted exactly:
/// with every edge weight shifted by −μ* the minimum cycle mean is zero, so
/// shortest-path potentials exist, and any cycle of reduced weight zero —
/// found by walking zero-reduced-weight edges — has mean exactly μ*.
pub fn min_mean_cycle(g: &WeightedDigraph) -> Option<(Rat, Vec<usize>)> {
    let n = g.n;
    if n == 0 || g.edges.is_empty() {
        return None;
    }
    let adj = g.adjacency();
    // d[k][v] = minimum weight of a k-edge walk ending in v, from any start.
    let mut d: Vec<Vec<Option<Rat>>> = vec![vec![None; n]; n + 1];
    for v in 0..n {
        d[0][v] = Some(Rat::zero());
    }
    for k in 1..=n {
        for u in 0..n {
            if let Some(du) = d[k - 1][u].clone() {
                for (v, w) in &adj[u] {
                    let cand = &du + *w;
                    match &d[k][*v] {
                        Some(cur) if *cur <= cand => {}
                        _ => d[k][*v] = Some(cand),
                    }
                }
            }
        }
    }
    // μ* = min over v with d[n][v] finite of max over k of (d[n][v]−d[k][v])/(n−k).
    let mut mu: Option<Rat> = None;
    for v in 0..n {
        let Some(dn) = &d[n][v] else { continue };
        let mut best_k: Option<Rat> = None;
        for k in 0..n {
            let Some(dk) = &d[k][v] else { continue };
            let val = (dn - dk) / rat_int((n - k) as i64);
            if best_k.as_ref().map_or(true, |b| val > *b) {
                best_k = Some(val);
            }
        }
        if let Some(b) = best_k {
            if mu.as_ref().map_or(true, |m| b < *m) {
                mu = Some(b);
            }
        }
    }
    let mu = mu?;

    // Shift weights by −μ*: the minimum cycle mean becomes 0, so Bellman-Ford
    // from a virtual supersource terminates with valid potentials.
    let mut pot: Vec<Rat> = vec![Rat::zero(); n];
    for _ in 0..n {
        let mut changed = false;
        for (u, v, w) in &g.edges {
            let cand = &pot[*u] + w - &mu;
            if cand < pot[*v] {
                pot[*v] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // Tight edges have reduced weight 0; a minimum-mean cycle lies entirely
    // within them. Find any cycle among tight edges.
    let tight: Vec<(usize, usize)> = g
        .edges
        .iter()
        .filter(|(u, v, w)| &pot[*u] + w - &mu == pot[*v])
        .map(|(u, v, _)| (*u, *v))
        .collect();
    let cycle = find_cycle(n, &tight).expect("a tight cycle must exist at the minimum mean");
    Some((mu, cycle))
}

/// Scale the weights (w − λ) to integers small enough that every n-edge
/// walk sum fits in i128, or `None` when that is not possible.
fn scaled_offsets(g: &WeightedDigraph, lambda: &Rat) -> Option<Vec<i128>> {
    let mut l = lambda.denom().clone();
    for (_, _, w) in &g.edges {
        l = l.lcm(w.denom());
    }
    let l = Rat::new(l, BigInt::one());
    let mut out = Vec::with_capacity(g.edges.len());
    let mut max_abs: i128 = 0;
    for (_, _, w) in &g.edges {
        let s = (w - lambda) * &l;
        debug_assert!(s.is_integer());
        let v = s.numer().to_i128()?;
        out.push(v);
        max_abs = max_abs.max(v.checked_abs()?);
    }
    // Walk sums stay within (n+1)·max; leave generous headroom.
    if max_abs > i128::MAX / (g.n as i128 + 2) {
        return None;
    }
    Some(out)
}

/// A cycle whose mean weight is ≤ λ (or < λ when `strict`), together with
/// its exact mean, if one exists. Decision-only counterpart of
/// [`min_mean_cycle`]: linear memory and Bellman–Ford time, so it scales to
/// graphs where Karp's full table does not. The returned cycle need not
/// have the minimal mean.
pub fn cycle_mean_at_most(
    g: &WeightedDigraph,
    lambda: &Rat,
    strict: bool,
) -> Option<(Rat, Vec<usize>)> {
    let n = g.n;
    if n == 0 || g.edges.is_empty() {
        return None;
    }
    let Some(w) = scaled_offsets(g, lambda) else {
        // Overflow: fall back to the exact minimum-mean computation.
        let (mean, cycle) = min_mean_cycle(g)?;
        let ok = if strict { mean < *lambda } else { mean <= *lambda };
        return ok.then_some((mean, cycle));
    };
    // Bellman–Ford from a virtual source connected to every node: a
    // relaxation in round n proves a negative cycle (mean < λ).
    let mut dist = vec![0i128; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last_touched: Option<usize> = None;
    let mut converged = false;
    for round in 0..=n {
        let mut changed = false;
        for (i, (u, v, _)) in g.edges.iter().enumerate() {
            let cand = dist[*u] + w[i];
            if cand < dist[*v] {
                dist[*v] = cand;
                pred[*v] = Some(i);
                changed = true;
                if round == n {
                    last_touched = Some(*v);
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if let Some(mut x) = last_touched {
        // Walk n predecessor steps to land on the cycle, then collect it.
        for _ in 0..n {
            x = g.edges[pred[x].unwrap()].0;
        }
        let mut nodes = Vec::new();
        let mut sum = Rat::zero();
        let mut cur = x;
        loop {
            let e = pred[cur].unwrap();
            nodes.push(cur);
            sum += &g.edges[e].2;
            cur = g.edges[e].0;
            if cur == x {
                break;
            }
        }
        nodes.reverse();
        let mean = sum / rat_int(nodes.len() as i64);
        debug_assert!(mean < *lambda);
        return Some((mean, nodes));
    }
    debug_assert!(converged);
    if strict {
        // No negative cycle: no mean is < λ.
        return None;
    }
    // Converged potentials: cycles of mean exactly λ consist of tight
    // edges (dist[u] + w = dist[v]).
    let tight: Vec<(usize, usize)> = g
        .edges
        .iter()
        .enumerate()
        .filter(|(i, (u, v, _))| dist[*u] + w[*i] == dist[*v])
        .map(|(_, (u, v, _))| (*u, *v))
        .collect();
    let cycle = find_cycle(n, &tight)?;
    Some((lambda.clone(), cycle))
}

/// Any directed cycle in the graph, as a node sequence without the closing
/// repeat, or `None` if acyclic.
pub fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (u, v) in edges {
        adj[*u].push(*v);
    }
    // Colors: 0 unvisited, 1 on current DFS path, 2 done.
    let mut color = vec![0u8; n];
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        let mut path: Vec<usize> = Vec::new();
        let mut dfs: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&mut (v, ref mut child)) = dfs.last_mut() {
            if *child == 0 {
                color[v] = 1;
                path.push(v);
            }
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                match color[w] {
                    0 => dfs.push((w, 0)),
                    1 => {
                        let pos = path.iter().position(|&x| x == w).unwrap();
                        return Some(path[pos..].to_vec());
                    }
                    _ => {}
                }
            } else {
                color[v] = 2;
                path.pop();
                dfs.pop();
            }
        }
    }
    None
}

/// Result of a Bellman–Ford run from a set of sources.
pub struct ShortestPaths {
    /// Shortest distance per node; `None` when unreachable. When a negative
    /// cycle is reachable, distances to nodes the cycle reaches are not
    /// meaningful and `negative_cycle` is set instead.
    pub dist: Vec<Option<Rat>>,
    /// Predecessor edge index into the graph's edge list, for path
    /// reconstruction.
    pub pred: Vec<Option<usize>>,
    /// A reachable negative cycle (node sequence without the closing
    /// repeat), if one exists.
    pub negative_cycle: Option<Vec<usize>>,
}

/// Bellman–Ford shortest paths from `sources` with exact weights and
/// reachable-negative-cycle detection.
pub fn bellman_ford(g: &WeightedDigraph, sources: &[usize]) -> ShortestPaths {
    let n = g.n;
    let mut dist: Vec<Option<Rat>> = vec![None; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    for &s in sources {
        dist[s] = Some(Rat::zero());
    }
    for _ in 0..n {
        let mut changed = false;
        for (i, (u, v, w)) in g.edges.iter().enumerate() {
            if let Some(du) = dist[*u].clone() {
                let cand = du + w;
                if dist[*v].as_ref().map_or(true, |dv| cand < *dv) {
                    dist[*v] = Some(cand);
                    pred[*v] = Some(i);
                    changed = true;
                }
            }
        }
        if !changed {
            return ShortestPaths { dist, pred, negative_cycle: None };
        }
    }
    // An edge still relaxing after n rounds witnesses a reachable negative
    // cycle; walk predecessors n times to land inside it, then peel it off.
    for (i, (u, v, w)) in g.edges.iter().enumerate() {
        if let Some(du) = dist[*u].clone() {
            if dist[*v].as_ref().map_or(true, |dv| du + w < *dv) {
                pred[*v] = Some(i);
                let mut x = *v;
                for _ in 0..n {
                    x = g.edges[pred[x].unwrap()].0;
                }
                let mut cycle = vec![x];
                let mut y = g.edges[pred[x].unwrap()].0;
                while y != x {
                    cycle.push(y);
                    y = g.edges[pred[y].unwrap()].0;
                }
                cycle.reverse();
                return ShortestPaths { dist, pred, negative_cycle: Some(cycle) };
            }
        }
    }
    ShortestPaths { dist, pred, negative_cycle: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::rat;

    #[test]
    fn scc_two_cycle_is_one_component() {
        let comps = sccs(2, &[(0, 1), (1, 0)]);
        assert_eq!(comps, vec![vec![0, 1]]);
    }

    #[test]
    fn scc_chain_is_singletons() {
        let comps = sccs(3, &[(0, 1), (1, 2)]);
        assert_eq!(comps.len(), 3);
        for c in comps {
            assert_eq!(c.len(), 1);
        }
    }

    #[test]
    fn scc_partition_properties_random() {
        // Pairwise-reachability closure cross-check on a fixed 6-node graph.
        let edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 3), (4, 5), (5, 5)];
        let comps = sccs(6, &edges);
        let mut seen = vec![0usize; 6];
        for c in &comps {
            for &v in c {
                seen[v] += 1;
            }
        }
        assert!(seen.iter().all(|&k| k == 1));
        // Within a component every node reaches every other.
        for c in &comps {
            for &u in c {
                let r = reachable(6, &edges, &[u]);
                for &v in c {
                    assert!(r[v]);
                }
            }
        }
        assert_eq!(comps.iter().filter(|c| c.len() > 1).count(), 2);
    }

    #[test]
    fn min_mean_single_loop() {
        let mut g = WeightedDigraph::new(1);
        g.add_edge(0, 0, rat(3, 1));
        let (mu, cycle) = min_mean_cycle(&g).unwrap();
        assert_eq!(mu, rat(3, 1));
        assert_eq!(cycle, vec![0]);
    }

    #[test]
    fn min_mean_two_loops_shared_hub() {
        // Loop 0-1 of mean 1 and loop 0-2 of mean 3.
        let mut g = WeightedDigraph::new(3);
        g.add_edge(0, 1, rat(1, 1));
        g.add_edge(1, 0, rat(1, 1));
        g.add_edge(0, 2, rat(3, 1));
        g.add_edge(2, 0, rat(3, 1));
        let (mu, cycle) = min_mean_cycle(&g).unwrap();
        assert_eq!(mu, rat(1, 1));
        assert!(cycle.contains(&1));
    }

    #[test]
    fn min_mean_acyclic_is_none() {
        let mut g = WeightedDigraph::new(2);
        g.add_edge(0, 1, rat(5, 1));
        assert!(min_mean_cycle(&g).is_none());
    }

    #[test]
    fn min_mean_fractional() {
        // Cycle 0→1→2→0 with weights 1, 0, 0: mean 1/3.
        let mut g = WeightedDigraph::new(3);
        g.add_edge(0, 1, rat(1, 1));
        g.add_edge(1, 2, rat(0, 1));
        g.add_edge(2, 0, rat(0, 1));
        let (mu, cycle) = min_mean_cycle(&g).unwrap();
        assert_eq!(mu, rat(1, 3));
        assert_eq!(cycle.len(), 3);
    }

    #[test]
    fn bellman_ford_shortest_and_negative_cycle() {
        let mut g = WeightedDigraph::new(3);
        g.add_edge(0, 1, rat(2, 1));
        g.add_edge(1, 2, rat(-1, 1));
        let sp = bellman_ford(&g, &[0]);
        assert_eq!(sp.dist[2], Some(rat(1, 1)));
        assert!(sp.negative_cycle.is_none());

        let mut g = WeightedDigraph::new(2);
        g.add_edge(0, 1, rat(1, 1));
        g.add_edge(1, 0, rat(-2, 1));
        let sp = bellman_ford(&g, &[0]);
        let cycle = sp.negative_cycle.unwrap();
        assert_eq!(cycle.len(), 2);
    }

    #[test]
    fn bellman_ford_unreachable_negative_cycle_ignored() {
        let mut g = WeightedDigraph::new(3);
        g.add_edge(1, 2, rat(-1, 1));
        g.add_edge(2, 1, rat(-1, 1));
        let sp = bellman_ford(&g, &[0]);
        assert!(sp.negative_cycle.is_none());
        assert_eq!(sp.dist[0], Some(rat(0, 1)));
    }
}
