//! Brute-force optimal transport on small discrete samples.

/// All nondecreasing sequences of `len` values below `bound`.
pub fn multisets(len: usize, bound: u64) -> Vec<Vec<u64>> {
    fn rec(len: usize, lo: u64, bound: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in lo..bound {
            cur.push(v);
            rec(len, v, bound, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, 0, bound, &mut Vec::new(), &mut out);
    out
}

/// Optimal uniform-weight transport between equal-size samples.
///
/// Extreme points of the doubly stochastic polytope are permutations, so
/// the linear program's optimum is the cheapest assignment. Found by
/// dynamic programming over subsets of `y`.
pub fn assignment_cost(x: &[u64], y: &[u64]) -> f64 {
    let m = x.len();
    assert_eq!(m, y.len());
    let mut best = vec![u64::MAX; 1 << m];
    best[0] = 0;
    for mask in 0usize..(1 << m) {
        if best[mask] == u64::MAX {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == m {
            continue;
        }
        for j in 0..m {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let c = best[mask] + x[i].abs_diff(y[j]);
                if c < best[next] {
                    best[next] = c;
                }
            }
        }
    }
    best[(1 << m) - 1] as f64 / m as f64
}

/// Transport linear program with masses `1/m` and `1/n`, solved exactly
/// as an integer min-cost flow (each source supplies `n` units, each sink
/// takes `m`) by successive shortest paths.
pub fn transport_lp_cost(x: &[u64], y: &[u64]) -> f64 {
    let (m, n) = (x.len(), y.len());
    let nodes = m + n + 2;
    let (src, sink) = (m + n, m + n + 1);
    // edge: (to, capacity, cost, reverse index)
    let mut graph: Vec<Vec<(usize, i64, i64, usize)>> = vec![Vec::new(); nodes];
    let add = |g: &mut Vec<Vec<(usize, i64, i64, usize)>>, a: usize, b: usize, cap: i64, cost: i64| {
        let (ra, rb) = (g[b].len(), g[a].len());
        g[a].push((b, cap, cost, ra));
        g[b].push((a, 0, -cost, rb));
    };
    for i in 0..m {
        add(&mut graph, src, i, n as i64, 0);
        for j in 0..n {
            add(&mut graph, i, m + j, i64::MAX / 4, x[i].abs_diff(y[j]) as i64);
        }
    }
    for j in 0..n {
        add(&mut graph, m + j, sink, m as i64, 0);
    }
    let mut remaining = (m * n) as i64;
    let mut total: i64 = 0;
    while remaining > 0 {
        let mut dist = vec![i64::MAX; nodes];
        let mut prev = vec![(usize::MAX, usize::MAX); nodes];
        dist[src] = 0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u] == i64::MAX {
                    continue;
                }
                for (k, &(v, cap, cost, _)) in graph[u].iter().enumerate() {
                    if cap > 0 && dist[u] + cost < dist[v] {
                        dist[v] = dist[u] + cost;
                        prev[v] = (u, k);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        assert!(dist[sink] < i64::MAX, "flow infeasible");
        let mut push = remaining;
        let mut v = sink;
        while v != src {
            let (u, k) = prev[v];
            push = push.min(graph[u][k].1);
            v = u;
        }
        let mut v = sink;
        while v != src {
            let (u, k) = prev[v];
            let r = graph[u][k].3;
            graph[u][k].1 -= push;
            graph[v][r].1 += push;
            v = u;
        }
        total += push * dist[sink];
        remaining -= push;
    }
    total as f64 / (m * n) as f64
}
