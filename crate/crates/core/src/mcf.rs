//! Min-cost flow by successive shortest paths with Johnson potentials.
//!
//! Supplies and capacities are real numbers. Each augmentation saturates a
//! source, a sink, or an arc, so the number of rounds is bounded by the
//! number of arcs plus terminals. Negative arc costs are allowed as long as
//! the network has no negative cycle; the initial potentials come from a
//! label-correcting Bellman–Ford pass.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};

/// Residual capacities at or below this are treated as zero.
pub(crate) const CAP_EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    residual: f64,
    cost: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Network {
    adj: Vec<Vec<usize>>,
    arcs: Vec<Arc>,
}

#[derive(Clone, Copy, PartialEq)]
struct Label(f64, usize);

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node index
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Network {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], arcs: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u → v` and its residual twin; returns the forward arc id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: f64, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to: v, residual: cap, cost });
        self.arcs.push(Arc { to: u, residual: 0.0, cost: -cost });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Flow currently carried by forward arc `id`.
    pub fn flow(&self, id: usize) -> f64 {
        self.arcs[id ^ 1].residual
    }

    /// Ships `amount` from `source` to `sink` at minimum cost. Returns the
    /// amount that could not be routed (zero up to rounding when feasible).
    pub fn min_cost_flow(&mut self, source: usize, sink: usize, amount: f64) -> Result<f64> {
        let n = self.node_count();
        let mut potential = self.initial_potentials(source)?;
        let mut remaining = amount;
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut rounds = 0usize;
        let round_cap = 4 * self.arcs.len() + 4 * n + 16;

        while remaining > CAP_EPS {
            rounds += 1;
            if rounds > round_cap {
                return Err(Error::Internal("min-cost flow did not terminate".into()));
            }
            dist.fill(f64::INFINITY);
            parent.fill(usize::MAX);
            dist[source] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(Label(0.0, source));
            while let Some(Label(d, u)) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.residual <= CAP_EPS {
                        continue;
                    }
                    let reduced = (arc.cost + potential[u] - potential[arc.to]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[arc.to] {
                        dist[arc.to] = nd;
                        parent[arc.to] = a;
                        heap.push(Label(nd, arc.to));
                    }
                }
            }
            if !dist[sink].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut push = remaining;
            let mut v = sink;
            while v != source {
                let a = parent[v];
                push = push.min(self.arcs[a].residual);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let a = parent[v];
                self.arcs[a].residual -= push;
                self.arcs[a ^ 1].residual += push;
                if self.arcs[a].residual <= CAP_EPS {
                    self.arcs[a].residual = 0.0;
                }
                v = self.arcs[a ^ 1].to;
            }
            remaining -= push;
        }
        Ok(remaining.max(0.0))
    }

    /// Shortest-path labels over the residual graph from a virtual root
    /// attached to every node at cost zero. Fails on a negative cycle.
    pub fn residual_potentials(&self) -> Result<Vec<f64>> {
        self.bellman_ford(None)
    }

    fn initial_potentials(&self, source: usize) -> Result<Vec<f64>> {
        let mut p = self.bellman_ford(Some(source))?;
        for v in p.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
        Ok(p)
    }

    fn bellman_ford(&self, source: Option<usize>) -> Result<Vec<f64>> {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut queue = VecDeque::new();
        let mut queued = vec![false; n];
        let mut relaxations = vec![0usize; n];
        match source {
            Some(s) => {
                dist[s] = 0.0;
                queue.push_back(s);
                queued[s] = true;
            }
            None => {
                for v in 0..n {
                    dist[v] = 0.0;
                    queue.push_back(v);
                    queued[v] = true;
                }
            }
        }
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.residual <= CAP_EPS {
                    continue;
                }
                let nd = dist[u] + arc.cost;
                // slack absorbs rounding on zero-cost residual cycles
                if nd < dist[arc.to] - 1e-13 * (1.0 + nd.abs()) {
                    dist[arc.to] = nd;
                    relaxations[arc.to] += 1;
                    if relaxations[arc.to] > n + 1 {
                        return Err(Error::Internal("negative cycle in residual network".into()));
                    }
                    if !queued[arc.to] {
                        queued[arc.to] = true;
                        queue.push_back(arc.to);
                    }
                }
            }
        }
        Ok(dist)
    }
}
