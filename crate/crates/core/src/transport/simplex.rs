//! Transportation simplex on the bipartite network: northwest-corner start,
//! node potentials from the spanning tree, block pricing, and a switch to
//! Bland's rule after a run of degenerate pivots.

use std::collections::VecDeque;

use crate::error::{Result, SwarmError};

pub(crate) struct TransportSolution {
    pub flows: Vec<(usize, usize, f64)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

const DEGENERATE_RUN: usize = 50;

struct Tree {
    m: usize,
    n: usize,
    flow: Vec<f64>,
    basic: Vec<bool>,
    /// Adjacency on nodes `0..m` (rows) and `m..m+n` (columns).
    adj: Vec<Vec<usize>>,
}

impl Tree {
    fn insert(&mut self, i: usize, j: usize) {
        self.basic[i * self.n + j] = true;
        self.adj[i].push(self.m + j);
        self.adj[self.m + j].push(i);
    }

    fn remove(&mut self, i: usize, j: usize) {
        self.basic[i * self.n + j] = false;
        self.adj[i].retain(|&k| k != self.m + j);
        self.adj[self.m + j].retain(|&k| k != i);
    }

    fn cell(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.m {
            (a, b - self.m)
        } else {
            (b, a - self.m)
        }
    }

    fn potentials(&self, cost: &[f64], u: &mut [f64], v: &mut [f64]) {
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        u[0] = 0.0;
        while let Some(a) = queue.pop_front() {
            for &b in &self.adj[a] {
                if seen[b] {
                    continue;
                }
                seen[b] = true;
                let (i, j) = self.cell(a, b);
                if b >= self.m {
                    v[j] = cost[i * self.n + j] - u[i];
                } else {
                    u[i] = cost[i * self.n + j] - v[j];
                }
                queue.push_back(b);
            }
        }
    }

    /// Tree path from `from` to `to` as a node list.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![usize::MAX; self.m + self.n];
        parent[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(a) = queue.pop_front() {
            if a == to {
                break;
            }
            for &b in &self.adj[a] {
                if parent[b] == usize::MAX {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut nodes = vec![to];
        let mut k = to;
        while k != from {
            k = parent[k];
            nodes.push(k);
        }
        nodes.reverse();
        nodes
    }
}

fn northwest_corner(supply: &[f64], demand: &[f64], tree: &mut Tree) {
    let (m, n) = (supply.len(), demand.len());
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]);
        tree.flow[i * n + j] = x;
        tree.insert(i, j);
        a[i] -= x;
        b[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i < m - 1 && (a[i] <= b[j] || j == n - 1) {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// `cost` is row-major `m x n`; `supply` and `demand` must have equal sums.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    let mut tree = Tree { m, n, flow: vec![0.0; m * n], basic: vec![false; m * n], adj: vec![Vec::new(); m + n] };
    northwest_corner(supply, demand, &mut tree);

    let scale = cost.iter().fold(1.0f64, |s, c| s.max(c.abs()));
    let tol = 1e-12 * scale;
    let block = ((m * n) as f64).sqrt().ceil().max(16.0) as usize;
    let max_iterations = 100 * (m + n) * (m + n) + 1000;

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut cursor = 0;
    let mut degenerate_run = 0;
    let mut iterations = 0;

    loop {
        tree.potentials(cost, &mut u, &mut v);
        let reduced = |k: usize| cost[k] - u[k / n] - v[k % n];
        let entering = if degenerate_run >= DEGENERATE_RUN {
            (0..m * n).find(|&k| !tree.basic[k] && reduced(k) < -tol)
        } else {
            let mut best: Option<(usize, f64)> = None;
            let mut scanned = 0;
            while scanned < m * n {
                let end = (scanned + block).min(m * n);
                for s in scanned..end {
                    let k = (cursor + s) % (m * n);
                    if tree.basic[k] {
                        continue;
                    }
                    let rc = reduced(k);
                    if rc < -tol && best.is_none_or(|(_, b)| rc < b) {
                        best = Some((k, rc));
                    }
                }
                scanned = end;
                if best.is_some() {
                    break;
                }
            }
            if let Some((k, _)) = best {
                cursor = (k + 1) % (m * n);
            }
            best.map(|(k, _)| k)
        };
        let Some(k) = entering else { break };
        iterations += 1;
        if iterations > max_iterations {
            return Err(SwarmError::SolverFailed(format!("network simplex exceeded {max_iterations} pivots")));
        }

        let (ei, ej) = (k / n, k % n);
        // Cycle: entering cell (+), then tree edges from column ej back to row ei alternating -, +, ...
        let nodes = tree.path(m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (e, pair) in nodes.windows(2).enumerate() {
            if e % 2 == 0 {
                let (i, j) = tree.cell(pair[0], pair[1]);
                let idx = i * n + j;
                let x = tree.flow[idx];
                if x < theta || (x == theta && idx < leaving) {
                    theta = x;
                    leaving = idx;
                }
            }
        }
        for (e, pair) in nodes.windows(2).enumerate() {
            let (i, j) = tree.cell(pair[0], pair[1]);
            let idx = i * n + j;
            if e % 2 == 0 {
                tree.flow[idx] = if idx == leaving { 0.0 } else { tree.flow[idx] - theta };
            } else {
                tree.flow[idx] += theta;
            }
        }
        tree.flow[k] = theta;
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
        tree.remove(leaving / n, leaving % n);
        tree.insert(ei, ej);
    }

    let flows = (0..m * n)
        .filter(|&k| tree.basic[k] && tree.flow[k] > 0.0)
        .map(|k| (k / n, k % n, tree.flow[k]))
        .collect();
    Ok(TransportSolution { flows, u, v, iterations })
}
