//! Exact discrete optimal transport for small bags of words.
//!
//! Masses are integers, so successive shortest augmenting paths terminate
//! with an optimal integral flow. Costs may be any non-negative reals.

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    rev: usize,
    cap: u64,
    cost: f64,
}

struct Network {
    adj: Vec<Vec<Edge>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Network { adj: vec![Vec::new(); n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u64, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge { to, rev: rev_from, cap, cost });
        self.adj[to].push(Edge { to: from, rev: rev_to, cap: 0, cost: -cost });
    }
}

/// Minimum total cost of moving `supply` onto `demand` (equal totals), with
/// unit cost `cost(i, j)`. Returns the cost and the flow matrix.
///
/// Panics if the totals differ.
pub fn min_cost_transport<F>(supply: &[u64], demand: &[u64], cost: F) -> (f64, Vec<Vec<u64>>)
where
    F: Fn(usize, usize) -> f64,
{
    let total: u64 = supply.iter().sum();
    assert_eq!(total, demand.iter().sum::<u64>(), "supply and demand totals differ");
    let (m, n) = (supply.len(), demand.len());
    let source = m + n;
    let sink = m + n + 1;
    let mut net = Network::new(m + n + 2);
    for (i, &s) in supply.iter().enumerate() {
        net.add_edge(source, i, s, 0.0);
    }
    for (j, &d) in demand.iter().enumerate() {
        net.add_edge(m + j, sink, d, 0.0);
    }
    for i in 0..m {
        for j in 0..n {
            net.add_edge(i, m + j, total, cost(i, j));
        }
    }

    let nodes = m + n + 2;
    let mut sent = 0u64;
    while sent < total {
        // Bellman-Ford: residual graph may hold negative-cost reverse edges.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut relaxed = false;
            for u in 0..nodes {
                if !dist[u].is_finite() {
                    continue;
                }
                for (k, e) in net.adj[u].iter().enumerate() {
                    if e.cap > 0 {
                        let nd = dist[u] + e.cost;
                        if nd < dist[e.to] - 1e-12 {
                            dist[e.to] = nd;
                            prev[e.to] = Some((u, k));
                            relaxed = true;
                        }
                    }
                }
            }
            if !relaxed {
                break;
            }
        }
        assert!(dist[sink].is_finite(), "no augmenting path with flow remaining");
        let mut push = total - sent;
        let mut v = sink;
        while let Some((u, k)) = prev[v] {
            push = push.min(net.adj[u][k].cap);
            v = u;
        }
        let mut v = sink;
        while let Some((u, k)) = prev[v] {
            let rev = net.adj[u][k].rev;
            net.adj[u][k].cap -= push;
            net.adj[v][rev].cap += push;
            v = u;
        }
        sent += push;
    }

    let mut flow = vec![vec![0u64; n]; m];
    let mut total_cost = 0.0;
    for (i, row) in flow.iter_mut().enumerate() {
        for e in &net.adj[i] {
            if e.to >= m && e.to < m + n {
                // flow on i→j equals the capacity of its reverse edge
                let f = net.adj[e.to][e.rev].cap;
                row[e.to - m] = f;
                total_cost += f as f64 * e.cost;
            }
        }
    }
    (total_cost, flow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_assignment() {
        // cheapest is the anti-diagonal
        let c = [[4.0, 1.0], [2.0, 5.0]];
        let (cost, flow) = min_cost_transport(&[1, 1], &[1, 1], |i, j| c[i][j]);
        assert_eq!(cost, 3.0);
        assert_eq!(flow, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn split_mass() {
        // one source of 3 units, demands 1 and 2
        let (cost, flow) = min_cost_transport(&[3], &[1, 2], |_, j| [1.0, 2.0][j]);
        assert_eq!(cost, 5.0);
        assert_eq!(flow, vec![vec![1, 2]]);
    }

    #[test]
    fn needs_rerouting() {
        // greedy on the cheapest edge first is suboptimal here
        let c = [[1.0, 2.0], [2.0, 100.0]];
        let (cost, _) = min_cost_transport(&[1, 1], &[1, 1], |i, j| c[i][j]);
        assert_eq!(cost, 4.0);
    }
}
