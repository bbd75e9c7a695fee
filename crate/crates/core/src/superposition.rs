//! Decompositions of transport measures into curves.
//!
//! [`superpose`] writes any transport measure as a mixture of curve
//! embeddings by stripping paths. [`decompose_ode`] does the same for the
//! lift of a density path to the graph of a vector field, so every curve
//! follows the field. On periodic time, [`cycle_decompose`] splits a
//! [`ClosedMeasure`] into integer-period cycles with uniform phase and
//! [`holonomic_approximate`] concatenates those cycles into one periodic
//! curve whose measure is close in `d₁`.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{ensure, Error, NonRepresentable, Result};
use crate::metric::{kr_distance, DiscreteMeasure, MetricSpace};
use crate::transport::{
    find_edge_with_velocity, Action, Curve, TimeExpandedGraph, TransportMeasure, VectorField, CONSERVATION_TOL,
};
use crate::lagrangian::Lagrangian;

/// Residual masses at or below this are treated as empty edges.
const EMPTY: f64 = 1e-15;
/// Largest stray residual that stripping may discard as rounding.
const STRAY: f64 = 1e-12;
/// Slice residual at which stripping stops.
const STOP: f64 = 1e-12;
/// Largest number of cycles whose visiting orders are all tried.
const MAX_PERMUTED: usize = 5;

/// Tolerance on the discrete continuity equation in [`decompose_ode`].
pub const ODE_CONTINUITY_TOL: f64 = 1e-10;

/// Weighted curves whose embeddings add up to a transport measure.
#[derive(Debug, Clone)]
pub struct CurveDecomposition {
    graph: Arc<TimeExpandedGraph>,
    items: Vec<(Curve, f64)>,
}

impl CurveDecomposition {
    pub fn new(graph: Arc<TimeExpandedGraph>, items: Vec<(Curve, f64)>) -> Result<Self> {
        for (c, w) in &items {
            ensure!(c.graph().same_as(&graph), Config, "decomposition curve lives on another graph");
            ensure!(w.is_finite() && *w > 0.0, Validation, "curve weight {w} is not positive");
        }
        Ok(Self { graph, items })
    }

    pub fn graph(&self) -> &Arc<TimeExpandedGraph> {
        &self.graph
    }

    pub fn items(&self) -> &[(Curve, f64)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.items.iter().map(|(_, w)| w).sum()
    }

    /// `Σ weight · γ̄` as edge masses.
    pub fn reconstruct(&self) -> Result<TransportMeasure> {
        let g = &self.graph;
        let w = g.grid().slice_weight();
        let mut mass = vec![vec![0.0; g.edge_count()]; g.steps()];
        for (c, weight) in &self.items {
            for (k, slice) in mass.iter_mut().enumerate() {
                slice[c.edge(k)] += weight * w;
            }
        }
        TransportMeasure::unchecked(g.clone(), mass)
    }

    /// Largest edge-wise difference between the reconstruction and `eta`.
    pub fn residual(&self, eta: &TransportMeasure) -> Result<f64> {
        Ok(self.reconstruct()?.max_difference(eta))
    }

    /// `(ev_{t_k})♯ν`, the distribution of the curves' positions at `t_k`.
    pub fn marginal(&self, k: usize) -> Result<DiscreteMeasure> {
        ensure!(k <= self.graph.steps(), Validation, "time index {k} out of range");
        let mut w = vec![0.0; self.graph.node_count()];
        for (c, weight) in &self.items {
            w[c.nodes()[k]] += weight;
        }
        DiscreteMeasure::normalized(self.graph.space().clone(), w)
    }

    /// `Σ weight · action(curve)`.
    pub fn action(&self, l: &Lagrangian) -> Result<f64> {
        self.items.iter().map(|(c, w)| Ok(w * c.action(l)?)).sum()
    }
}

/// Removes weighted paths from `mass` until no full path with positive
/// bottleneck remains. Each path is the max-bottleneck path, ties going to
/// the smaller node index at every layer.
fn strip_paths(graph: &Arc<TimeExpandedGraph>, mut mass: Vec<Vec<f64>>) -> Result<(Vec<(Curve, f64)>, f64)> {
    let (n, nodes) = (graph.steps(), graph.node_count());
    let scale = n as f64;
    let mut items = Vec::new();
    let slice_residual = |mass: &[Vec<f64>]| mass.iter().map(|s| s.iter().sum::<f64>()).fold(0.0, f64::max);
    while slice_residual(&mass) >= STOP {
        let mut best = vec![vec![f64::NEG_INFINITY; nodes]; n + 1];
        let mut pred = vec![vec![usize::MAX; nodes]; n + 1];
        best[0].fill(f64::INFINITY);
        for k in 0..n {
            for j in 0..nodes {
                for &e in graph.in_edges(j) {
                    let r = mass[k][e];
                    if r <= EMPTY {
                        continue;
                    }
                    let i = graph.edge(e).0;
                    let b = best[k][i].min(r);
                    if b <= EMPTY {
                        continue;
                    }
                    if b > best[k + 1][j] || (b == best[k + 1][j] && i < graph.edge(pred[k + 1][j]).0) {
                        best[k + 1][j] = b;
                        pred[k + 1][j] = e;
                    }
                }
            }
        }
        let mut end = 0;
        for j in 1..nodes {
            if best[n][j] > best[n][end] {
                end = j;
            }
        }
        let bottleneck = best[n][end];
        if bottleneck <= EMPTY {
            break;
        }
        let mut path = vec![end; n + 1];
        for k in (0..n).rev() {
            let e = pred[k + 1][path[k + 1]];
            mass[k][e] -= bottleneck;
            path[k] = graph.edge(e).0;
        }
        items.push((Curve::new(graph.clone(), path)?, bottleneck * scale));
    }
    Ok((items, slice_residual(&mass)))
}

/// Writes `eta` as `Σ weight · γ̄` over at most as many curves as it has
/// mass-carrying edges. Every curve runs through edges of `eta`.
pub fn superpose(eta: &TransportMeasure) -> Result<CurveDecomposition> {
    eta.validate()?;
    let graph = eta.graph().clone();
    let (items, left) = strip_paths(&graph, eta.masses().to_vec())?;
    ensure!(left < 1e-10, Internal, "path stripping stalled with slice mass {left} left");
    CurveDecomposition::new(graph, items)
}

/// Decomposes a density path `μ_0, …, μ_n` transported by `V` into curves
/// solving `x_{k+1} = x_k + Δt · V(t_k, x_k)`.
///
/// `V` must point along a graph edge at every node charged by `μ_k`; the
/// nodes where it does not are returned as a [`NonRepresentable`]
/// certificate. The pushforward of `μ_k` along `V` must be `μ_{k+1}`.
pub fn decompose_ode(v: &VectorField, mu_path: &[DiscreteMeasure]) -> Result<CurveDecomposition> {
    let graph = v.graph().clone();
    let (n, nodes) = (graph.steps(), graph.node_count());
    ensure!(mu_path.len() == n + 1, Validation, "density path has {} slices for {} steps", mu_path.len(), n);
    for mu in mu_path {
        ensure!(mu.space().same_as(graph.space()), Config, "density lives on another space");
    }
    let mut targets = vec![vec![None; nodes]; n];
    let mut certificate = NonRepresentable::default();
    for k in 0..n {
        for i in mu_path[k].support() {
            match v.get(k, i).and_then(|vel| find_edge_with_velocity(&graph, i, vel)) {
                Some(e) => targets[k][i] = Some(e),
                None => certificate.off_grid.push((k, i)),
            }
        }
    }
    if !certificate.is_empty() {
        return Err(Error::NonRepresentable(certificate));
    }
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut pushed = vec![0.0; nodes];
        for i in mu_path[k].support() {
            let e = targets[k][i].expect("checked above");
            pushed[graph.edge(e).1] += mu_path[k].weight(i);
        }
        for (j, p) in pushed.iter().enumerate() {
            worst = worst.max((p - mu_path[k + 1].weight(j)).abs());
        }
    }
    ensure!(
        worst <= ODE_CONTINUITY_TOL,
        Validation,
        "the density path violates the continuity equation by {worst}"
    );
    let w = graph.grid().slice_weight();
    let mut mass = vec![vec![0.0; graph.edge_count()]; n];
    for k in 0..n {
        for i in mu_path[k].support() {
            mass[k][targets[k][i].expect("checked above")] += mu_path[k].weight(i) * w;
        }
    }
    let (items, left) = strip_paths(&graph, mass)?;
    ensure!(left < 1e-9, Internal, "path stripping stalled with slice mass {left} left");
    CurveDecomposition::new(graph, items)
}

/// A transport measure on periodic time: conservation also holds from the
/// last step back to the first, so `μ_{t_0} = μ_{t_n}`.
#[derive(Debug, Clone)]
pub struct ClosedMeasure {
    eta: TransportMeasure,
}

impl ClosedMeasure {
    pub fn new(eta: TransportMeasure) -> Result<Self> {
        eta.validate()?;
        let defect = cyclic_defect(&eta);
        ensure!(defect <= CONSERVATION_TOL, Validation, "conservation from t_n back to t_0 fails by {defect}");
        Ok(Self { eta })
    }

    pub fn measure(&self) -> &TransportMeasure {
        &self.eta
    }

    pub fn graph(&self) -> &Arc<TimeExpandedGraph> {
        self.eta.graph()
    }
}

fn cyclic_defect(eta: &TransportMeasure) -> f64 {
    let n = eta.graph().steps();
    (0..eta.graph().node_count())
        .map(|i| (eta.incoming(n - 1, i) - eta.outgoing(0, i)).abs())
        .fold(0.0, f64::max)
}

/// A closed node loop of length `period · n`, read cyclically: the step
/// after the last node returns to the first one.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub nodes: Vec<usize>,
    pub period: usize,
    pub weight: f64,
}

/// Weighted integer-period cycles, each spread uniformly over its phases.
#[derive(Debug, Clone)]
pub struct SolenoidalDecomposition {
    graph: Arc<TimeExpandedGraph>,
    cycles: Vec<Cycle>,
}

impl SolenoidalDecomposition {
    pub fn new(graph: Arc<TimeExpandedGraph>, cycles: Vec<Cycle>) -> Result<Self> {
        let n = graph.steps();
        for c in &cycles {
            ensure!(c.period > 0 && c.nodes.len() == c.period * n, Validation, "cycle length {} is not {} · {n}", c.nodes.len(), c.period);
            ensure!(c.weight.is_finite() && c.weight > 0.0, Validation, "cycle weight {} is not positive", c.weight);
            for s in 0..c.nodes.len() {
                let (i, j) = (c.nodes[s], c.nodes[(s + 1) % c.nodes.len()]);
                ensure!(graph.edge_id(i, j).is_some(), Validation, "({i}, {j}) is not an edge");
            }
        }
        Ok(Self { graph, cycles })
    }

    pub fn graph(&self) -> &Arc<TimeExpandedGraph> {
        &self.graph
    }

    pub fn cycles(&self) -> &[Cycle] {
        &self.cycles
    }

    pub fn total_weight(&self) -> f64 {
        self.cycles.iter().map(|c| c.weight).sum()
    }

    /// Mass of every cycle spread over its phases: each traversal of edge
    /// `e` at step `k` carries `weight / (period · n)`.
    pub fn reconstruct(&self) -> Result<TransportMeasure> {
        let g = &self.graph;
        let n = g.steps();
        let mut mass = vec![vec![0.0; g.edge_count()]; n];
        for c in &self.cycles {
            let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
            for s in 0..c.nodes.len() {
                let e = g.edge_id(c.nodes[s], c.nodes[(s + 1) % c.nodes.len()]).expect("validated");
                *counts.entry((s % n, e)).or_default() += 1;
            }
            let unit = c.weight / (c.period * n) as f64;
            let mut keys: Vec<_> = counts.into_iter().collect();
            keys.sort_unstable();
            for ((k, e), count) in keys {
                mass[k][e] += unit * count as f64;
            }
        }
        TransportMeasure::unchecked(g.clone(), mass)
    }

    /// The decomposition with every cycle started one full grid later
    /// (the time shift by one unit of periodic time).
    pub fn shifted(&self) -> Self {
        let n = self.graph.steps();
        let cycles = self
            .cycles
            .iter()
            .map(|c| {
                let mut nodes = c.nodes.clone();
                let len = nodes.len();
                nodes.rotate_left(n % len);
                Cycle { nodes, ..c.clone() }
            })
            .collect();
        Self { graph: self.graph.clone(), cycles }
    }
}

/// Splits a closed measure into cycles of the periodic state graph.
///
/// Repeatedly walks from the first layer along the heaviest remaining edge
/// until a state repeats, then removes the loop's bottleneck mass.
pub fn cycle_decompose(eta: &ClosedMeasure) -> Result<SolenoidalDecomposition> {
    let graph = eta.graph().clone();
    let n = graph.steps();
    let mut mass = eta.measure().masses().to_vec();
    let mut cycles = Vec::new();
    loop {
        let Some(start) = (0..graph.node_count())
            .find(|&i| graph.out_edges(i).iter().any(|&e| mass[0][e] > EMPTY))
        else {
            break;
        };
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut walk = vec![start];
        let mut layer = 0;
        seen.insert((0, start), 0);
        let closed_at = loop {
            let here = *walk.last().expect("nonempty");
            let next = graph
                .out_edges(here)
                .iter()
                .copied()
                .filter(|&e| mass[layer][e] > EMPTY)
                .fold(None, |acc: Option<usize>, e| match acc {
                    Some(b) if mass[layer][b] >= mass[layer][e] => Some(b),
                    _ => Some(e),
                });
            let Some(e) = next else {
                // mass arrived here without leaving: rounding residue
                let prev_layer = (layer + n - 1) % n;
                let prev = walk[walk.len() - 2];
                let stray = graph.edge_id(prev, here).expect("walked edge");
                ensure!(mass[prev_layer][stray] <= STRAY, Internal, "mass {} stuck at node {here}", mass[prev_layer][stray]);
                mass[prev_layer][stray] = 0.0;
                break None;
            };
            let j = graph.edge(e).1;
            layer = (layer + 1) % n;
            if let Some(&p) = seen.get(&(layer, j)) {
                break Some(p);
            }
            seen.insert((layer, j), walk.len());
            walk.push(j);
        };
        let Some(p) = closed_at else { continue };
        let mut nodes = walk.split_off(p);
        let offset = (n - p % n) % n;
        nodes.rotate_left(offset);
        let len = nodes.len();
        let edges: Vec<(usize, usize)> = (0..len)
            .map(|s| (s % n, graph.edge_id(nodes[s], nodes[(s + 1) % len]).expect("walked edge")))
            .collect();
        let b = edges.iter().map(|&(k, e)| mass[k][e]).fold(f64::INFINITY, f64::min);
        for &(k, e) in &edges {
            mass[k][e] -= b;
        }
        cycles.push(Cycle { period: len / n, weight: b * len as f64, nodes });
    }
    let left: f64 = mass.iter().flatten().sum();
    ensure!(left <= 1e-10, Internal, "acyclic residual mass {left} left after cycle stripping");
    SolenoidalDecomposition::new(graph, cycles)
}

/// A closed node loop of length `period · n`, read like [`Cycle`].
#[derive(Debug, Clone)]
pub struct PeriodicCurve {
    graph: Arc<TimeExpandedGraph>,
    nodes: Vec<usize>,
}

impl PeriodicCurve {
    pub fn new(graph: Arc<TimeExpandedGraph>, nodes: Vec<usize>) -> Result<Self> {
        let n = graph.steps();
        ensure!(!nodes.is_empty() && nodes.len().is_multiple_of(n), Validation, "periodic curve length {} is not a multiple of {n}", nodes.len());
        for s in 0..nodes.len() {
            let (i, j) = (nodes[s], nodes[(s + 1) % nodes.len()]);
            ensure!(graph.edge_id(i, j).is_some(), Validation, "({i}, {j}) is not an edge");
        }
        Ok(Self { graph, nodes })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn period(&self) -> usize {
        self.nodes.len() / self.graph.steps()
    }

    /// `γ̃`: the time average over one period, folded onto the grid.
    pub fn closed_measure(&self) -> Result<ClosedMeasure> {
        let d = SolenoidalDecomposition::new(
            self.graph.clone(),
            vec![Cycle { nodes: self.nodes.clone(), period: self.period(), weight: 1.0 }],
        )?;
        ClosedMeasure::new(d.reconstruct()?)
    }
}

/// Output of [`holonomic_approximate`].
#[derive(Debug, Clone)]
pub struct HolonomicApproximation {
    pub curve: PeriodicCurve,
    pub period: usize,
    /// `d₁(γ̃, η)` on `I × TM`.
    pub kr_error: f64,
    /// `diam · (bridge fraction + ½ Σ |time fraction − weight|)`, an upper
    /// bound on `kr_error`.
    pub bound: f64,
    /// The common denominator used, at most `q`.
    pub denominator: usize,
    /// Traversals of each cycle of `cycles`.
    pub counts: Vec<usize>,
    pub bridge_steps: usize,
    pub cycles: SolenoidalDecomposition,
}

/// Hamilton apportionment of `q` seats to nonnegative shares.
fn apportion(shares: &[f64], q: usize) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    let quotas: Vec<f64> = shares.iter().map(|s| s / total * q as f64).collect();
    let mut seats: Vec<usize> = quotas.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let given: usize = seats.iter().sum();
    for &m in order.iter().take(q.saturating_sub(given)) {
        seats[m] += 1;
    }
    seats
}

/// Shortest walk in the periodic state graph from `(layer, from)` to any
/// state in `goal`. Returns the visited nodes after the start.
fn bridge(graph: &TimeExpandedGraph, layer: usize, from: usize, goal: &dyn Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let n = graph.steps();
    let nodes = graph.node_count();
    if goal(layer, from) {
        return Some(Vec::new());
    }
    let id = |k: usize, i: usize| k * nodes + i;
    let mut pred = vec![usize::MAX; n * nodes];
    let mut queue = VecDeque::from([(layer, from)]);
    pred[id(layer, from)] = id(layer, from);
    while let Some((k, i)) = queue.pop_front() {
        for &e in graph.out_edges(i) {
            let (k2, j) = ((k + 1) % n, graph.edge(e).1);
            if pred[id(k2, j)] != usize::MAX {
                continue;
            }
            pred[id(k2, j)] = id(k, i);
            if goal(k2, j) {
                let mut path = vec![j];
                let mut at = id(k, i);
                while at != id(layer, from) {
                    path.push(at % nodes);
                    at = pred[at];
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back((k2, j));
        }
    }
    None
}

struct Concatenation {
    nodes: Vec<usize>,
    counts: Vec<usize>,
    bridge_steps: usize,
}

/// Runs through the cycles listed in `order`, `counts[m]` times each,
/// joined by shortest bridges, and returns to the starting state.
fn concatenate(graph: &TimeExpandedGraph, cycles: &[Cycle], counts: Vec<usize>, order: &[usize]) -> Result<Concatenation> {
    let n = graph.steps();
    let start = cycles[order[0]].nodes[0];
    let mut nodes = vec![start];
    let mut bridge_steps = 0;
    let disconnected = || Error::Infeasible("the support of the closed measure is not connected".into());
    for &m in order {
        let c = &cycles[m];
        let len = c.nodes.len();
        let here = *nodes.last().expect("nonempty");
        let layer = (nodes.len() - 1) % n;
        let on_cycle = |k: usize, i: usize| (0..c.period).any(|p| c.nodes[k + p * n] == i);
        let b = bridge(graph, layer, here, &on_cycle).ok_or_else(disconnected)?;
        bridge_steps += b.len();
        nodes.extend(b);
        let layer = (nodes.len() - 1) % n;
        let here = *nodes.last().expect("nonempty");
        let entry = (0..c.period).map(|p| layer + p * n).find(|&s| c.nodes[s] == here).expect("bridge ends on the cycle");
        for s in 1..=counts[m] * len {
            nodes.push(c.nodes[(entry + s) % len]);
        }
    }
    let here = *nodes.last().expect("nonempty");
    let layer = (nodes.len() - 1) % n;
    let back = bridge(graph, layer, here, &|k, i| k == 0 && i == start).ok_or_else(disconnected)?;
    bridge_steps += back.len();
    nodes.extend(back);
    // the final node is the start state again; the loop closes implicitly
    nodes.pop();
    Ok(Concatenation { nodes, counts, bridge_steps })
}

/// Atoms `(t_k, x_i, v_e)` of two edge-mass arrays with the product metric
/// `|k − k'|/n + d(x, x') + ‖v − v'‖`, and `d₁` between them.
fn kr_on_tangent_bundle(a: &TransportMeasure, b: &TransportMeasure) -> Result<(f64, f64)> {
    let g = a.graph();
    let n = g.steps();
    let mut atoms = Vec::new();
    for k in 0..n {
        for e in 0..g.edge_count() {
            if a.mass(k, e) > 0.0 || b.mass(k, e) > 0.0 {
                atoms.push((k, e));
            }
        }
    }
    let space = g.space();
    let points: Vec<Vec<f64>> = atoms
        .iter()
        .map(|&(k, e)| {
            let mut p = vec![g.time(k)];
            p.extend_from_slice(space.point(g.edge(e).0));
            p.extend_from_slice(g.velocity(e));
            p
        })
        .collect();
    let dist: Vec<Vec<f64>> = atoms
        .iter()
        .map(|&(k, e)| {
            atoms
                .iter()
                .map(|&(k2, e2)| {
                    if (k, e) == (k2, e2) {
                        return 0.0;
                    }
                    let dv: f64 = g.velocity(e).iter().zip(g.velocity(e2)).map(|(x, y)| (x - y) * (x - y)).sum();
                    k.abs_diff(k2) as f64 / n as f64 + space.dist(g.edge(e).0, g.edge(e2).0) + dv.sqrt()
                })
                .collect()
        })
        .collect();
    let diam = dist.iter().flatten().copied().fold(0.0, f64::max);
    let product = Arc::new(MetricSpace::with_distances(points, dist)?);
    let mu = DiscreteMeasure::normalized(product.clone(), atoms.iter().map(|&(k, e)| a.mass(k, e)).collect())?;
    let nu = DiscreteMeasure::normalized(product, atoms.iter().map(|&(k, e)| b.mass(k, e)).collect())?;
    Ok((kr_distance(&mu, &nu)?.0, diam))
}

/// A single periodic curve whose measure approximates `eta`.
///
/// Each common denominator `Q ≤ q` gives traversal counts by apportioning
/// `Q` over the cycle weights divided by their periods; the cycles are
/// joined by shortest bridges, in every visiting order when there are few of
/// them. The candidate with the smallest `d₁` error is returned, so the error
/// never grows with `q`.
pub fn holonomic_approximate(eta: &ClosedMeasure, q: usize) -> Result<HolonomicApproximation> {
    ensure!(q > 0, Validation, "q must be positive");
    let decomposition = cycle_decompose(eta)?;
    let graph = eta.graph().clone();
    let n = graph.steps();
    let cycles = decomposition.cycles();
    ensure!(!cycles.is_empty(), Internal, "a closed measure has at least one cycle");
    let shares: Vec<f64> = cycles.iter().map(|c| c.weight / c.period as f64).collect();
    let mut best: Option<HolonomicApproximation> = None;
    let mut candidates = Vec::new();
    for denominator in 1..=q {
        let counts = if cycles.len() == 1 { vec![1] } else { apportion(&shares, denominator) };
        let used: Vec<usize> = (0..cycles.len()).filter(|&m| counts[m] > 0).collect();
        for order in orders(&used) {
            candidates.push((denominator, concatenate(&graph, cycles, counts.clone(), &order)?));
        }
        if cycles.len() == 1 {
            break;
        }
    }
    for (denominator, cat) in candidates {
        let curve = PeriodicCurve::new(graph.clone(), cat.nodes)?;
        let (kr_error, diam) = kr_on_tangent_bundle(curve.closed_measure()?.measure(), eta.measure())?;
        let steps = curve.nodes().len() as f64;
        let cycle_steps: f64 = cycles.iter().zip(&cat.counts).map(|(c, &r)| (r * c.nodes.len()) as f64).sum();
        let rounding: f64 = cycles
            .iter()
            .zip(&cat.counts)
            .map(|(c, &r)| ((r * c.nodes.len()) as f64 / cycle_steps - c.weight).abs())
            .sum();
        let bound = diam * (cat.bridge_steps as f64 / steps + 0.5 * rounding);
        let period = curve.nodes().len() / n;
        let candidate = HolonomicApproximation {
            curve,
            period,
            kr_error,
            bound,
            denominator,
            counts: cat.counts,
            bridge_steps: cat.bridge_steps,
            cycles: decomposition.clone(),
        };
        if best.as_ref().is_none_or(|b| candidate.kr_error < b.kr_error) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("q ≥ 1"))
}

/// Visiting orders tried for the cycles in `used`: every permutation up to
/// [`MAX_PERMUTED`] cycles, otherwise the given order only.
fn orders(used: &[usize]) -> Vec<Vec<usize>> {
    if used.len() > MAX_PERMUTED {
        return vec![used.to_vec()];
    }
    let mut out = Vec::new();
    let mut current = used.to_vec();
    permute(&mut current, 0, &mut out);
    out
}

fn permute(items: &mut Vec<usize>, from: usize, out: &mut Vec<Vec<usize>>) {
    if from + 1 >= items.len() {
        out.push(items.clone());
        return;
    }
    for i in from..items.len() {
        items.swap(from, i);
        permute(items, from + 1, out);
        items.swap(from, i);
    }
}
