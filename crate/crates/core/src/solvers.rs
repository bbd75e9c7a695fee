//! Action minimization on a time-expanded graph.
//!
//! * [`tonelli_dp`] minimizes the action over curves with fixed endpoints by
//!   dynamic programming on the value function.
//! * [`dyn_ot`] minimizes over transport measures with prescribed initial
//!   and final marginals, as a min-cost flow.
//! * [`certify_duality`] solves the free-endpoint problem twice, over curves
//!   (dynamic programming) and over all transport measures (a linear program
//!   on the flow polytope), and reports both minima. Their equality is the
//!   finite form of the statement that transport measures are the closed
//!   convex hull of curves.
//!
//! All actions are normalized in time: an edge at step `k` costs
//! `L(t_k, x_i, v_ij)/n`. Edges where `L = +∞` are removed.

use std::sync::Arc;

use crate::error::{ensure, Error, Result};
use crate::lp;
use crate::mcf::Network;
use crate::metric::{DiscreteMeasure, MetricSpace};
use crate::transport::{Action, Curve, EdgeSet, TimeExpandedGraph, TransportMeasure};
use crate::young::TimeGrid;

pub use crate::lagrangian::Lagrangian;

/// `u(t_k, x_i)`: least action of a curve from the start set to `x_i` at `t_k`.
/// `+∞` marks unreachable states.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    values: Vec<Vec<f64>>,
}

impl ValueFunction {
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k][i]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Largest violation of
    /// `u(t_{k+1}, x_j) = min_{(i,j)} u(t_k, x_i) + L(t_k, x_i, v_ij)/n`.
    pub fn recursion_defect(&self, graph: &TimeExpandedGraph, l: &Lagrangian) -> Result<f64> {
        let costs = EdgeCosts::new(graph, l)?;
        let mut worst: f64 = 0.0;
        for k in 0..graph.steps() {
            for j in 0..graph.node_count() {
                let best = graph
                    .in_edges(j)
                    .iter()
                    .map(|&e| self.values[k][graph.edge(e).0] + costs.get(k, e))
                    .fold(f64::INFINITY, f64::min);
                let have = self.values[k + 1][j];
                if best.is_finite() || have.is_finite() {
                    worst = worst.max((best - have).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// `L/n` on every `(k, e)`.
struct EdgeCosts {
    costs: Vec<Vec<f64>>,
}

impl EdgeCosts {
    fn new(graph: &TimeExpandedGraph, l: &Lagrangian) -> Result<Self> {
        let w = graph.grid().slice_weight();
        let costs = (0..graph.steps())
            .map(|k| (0..graph.edge_count()).map(|e| Ok(graph.edge_cost(l, k, e)? * w)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { costs })
    }

    fn get(&self, k: usize, e: usize) -> f64 {
        self.costs[k][e]
    }
}

struct DpSolution {
    forward: Vec<Vec<f64>>,
    optimum: f64,
    nodes: Vec<usize>,
}

/// Forward value function from `start` (or from every node), backward
/// cost-to-go into `end` (or into every node), and the lexicographically
/// first curve whose action is within rounding of the optimum.
fn dynamic_program(graph: &TimeExpandedGraph, costs: &EdgeCosts, start: Option<usize>, end: Option<usize>) -> Result<DpSolution> {
    let (n, nodes) = (graph.steps(), graph.node_count());
    let mut forward = vec![vec![f64::INFINITY; nodes]; n + 1];
    match start {
        Some(s) => forward[0][s] = 0.0,
        None => forward[0].fill(0.0),
    }
    for k in 0..n {
        for j in 0..nodes {
            forward[k + 1][j] = graph
                .in_edges(j)
                .iter()
                .map(|&e| forward[k][graph.edge(e).0] + costs.get(k, e))
                .fold(f64::INFINITY, f64::min);
        }
    }
    let mut backward = vec![vec![f64::INFINITY; nodes]; n + 1];
    match end {
        Some(f) => backward[n][f] = 0.0,
        None => backward[n].fill(0.0),
    }
    for k in (0..n).rev() {
        for i in 0..nodes {
            backward[k][i] = graph
                .out_edges(i)
                .iter()
                .map(|&e| costs.get(k, e) + backward[k + 1][graph.edge(e).1])
                .fold(f64::INFINITY, f64::min);
        }
    }
    let optimum = match end {
        Some(f) => forward[n][f],
        None => forward[n].iter().copied().fold(f64::INFINITY, f64::min),
    };
    ensure!(optimum.is_finite(), Infeasible, "no finite-action curve connects the endpoints in {n} steps");

    let tol = 1e-12 * (1.0 + optimum.abs());
    let first = match start {
        Some(s) => s,
        None => (0..nodes)
            .find(|&i| backward[0][i] <= optimum + tol)
            .ok_or_else(|| Error::Internal("no optimal starting node".into()))?,
    };
    let mut path = vec![first];
    let mut acc = 0.0;
    for k in 0..n {
        let i = path[k];
        let e = graph
            .out_edges(i)
            .iter()
            .copied()
            .find(|&e| acc + costs.get(k, e) + backward[k + 1][graph.edge(e).1] <= optimum + tol)
            .ok_or_else(|| Error::Internal(format!("backtracking lost the optimum at step {k}")))?;
        acc += costs.get(k, e);
        path.push(graph.edge(e).1);
    }
    Ok(DpSolution { forward, optimum, nodes: path })
}

/// Minimizer of [`tonelli_dp`].
#[derive(Debug, Clone)]
pub struct TonelliSolution {
    pub curve: Curve,
    pub action: f64,
    pub value: ValueFunction,
}

/// Least-action curve from `from` at `t_0` to `to` at `t_n`.
///
/// Ties are broken towards the lexicographically smallest node sequence.
pub fn tonelli_dp(l: &Lagrangian, from: usize, to: usize, graph: &Arc<TimeExpandedGraph>) -> Result<TonelliSolution> {
    let nodes = graph.node_count();
    ensure!(from < nodes && to < nodes, Validation, "endpoints ({from}, {to}) outside a {nodes}-node graph");
    let costs = EdgeCosts::new(graph, l)?;
    let dp = dynamic_program(graph, &costs, Some(from), Some(to))?;
    Ok(TonelliSolution {
        curve: Curve::new(graph.clone(), dp.nodes)?,
        action: dp.optimum,
        value: ValueFunction { values: dp.forward },
    })
}

/// Minimizer of [`dyn_ot`].
#[derive(Debug, Clone)]
pub struct DynOtSolution {
    pub eta: TransportMeasure,
    pub action: f64,
}

/// Least-action transport measure from `mu_i` at `t_0` to `mu_f` at `t_n`.
pub fn dyn_ot(
    l: &Lagrangian,
    mu_i: &DiscreteMeasure,
    mu_f: &DiscreteMeasure,
    graph: &Arc<TimeExpandedGraph>,
) -> Result<DynOtSolution> {
    let space = graph.space();
    ensure!(
        mu_i.space().same_as(space) && mu_f.space().same_as(space),
        Config,
        "boundary measures live on another space"
    );
    let costs = EdgeCosts::new(graph, l)?;
    let (n, nodes) = (graph.steps(), graph.node_count());
    let layer = |k: usize, i: usize| k * nodes + i;
    let mut net = Network::new((n + 1) * nodes + 2);
    let (source, sink) = ((n + 1) * nodes, (n + 1) * nodes + 1);
    let mut arcs = vec![vec![None; graph.edge_count()]; n];
    for k in 0..n {
        for e in 0..graph.edge_count() {
            let c = costs.get(k, e);
            if c.is_finite() {
                let (i, j) = graph.edge(e);
                arcs[k][e] = Some(net.add_arc(layer(k, i), layer(k + 1, j), f64::INFINITY, c));
            }
        }
    }
    for i in mu_i.support() {
        net.add_arc(source, layer(0, i), mu_i.weight(i), 0.0);
    }
    for j in mu_f.support() {
        net.add_arc(layer(n, j), sink, mu_f.weight(j), 0.0);
    }
    let left = net.min_cost_flow(source, sink, 1.0)?;
    ensure!(left <= 1e-12, Infeasible, "{left} of the initial mass cannot reach the final measure in {n} steps");
    let w = graph.grid().slice_weight();
    let mass = arcs
        .iter()
        .map(|row| row.iter().map(|a| a.map_or(0.0, |id| net.flow(id) * w)).collect())
        .collect();
    let eta = TransportMeasure::new(graph.clone(), mass)?;
    let action = eta.action(l)?;
    Ok(DynOtSolution { eta, action })
}

/// Output of [`certify_duality`].
#[derive(Debug, Clone)]
pub struct DualityCertificate {
    /// Least action over curves with free endpoints.
    pub dp_min: f64,
    /// Least action over transport measures with free boundary marginals.
    pub lp_min: f64,
    pub curve: Curve,
    pub eta: TransportMeasure,
}

impl DualityCertificate {
    pub fn gap(&self) -> f64 {
        (self.dp_min - self.lp_min).abs()
    }
}

/// Minimizes `∫ f` over curves and over transport measures.
///
/// The curve minimum comes from dynamic programming. The measure minimum
/// comes from a simplex solve over edge masses subject to slice mass `1/n`
/// and conservation, with no knowledge of paths.
pub fn certify_duality(f: &Lagrangian, graph: &Arc<TimeExpandedGraph>) -> Result<DualityCertificate> {
    let costs = EdgeCosts::new(graph, f)?;
    let dp = dynamic_program(graph, &costs, None, None)?;
    let curve = Curve::new(graph.clone(), dp.nodes)?;

    let (n, nodes) = (graph.steps(), graph.node_count());
    let mut vars = Vec::new();
    for k in 0..n {
        for e in 0..graph.edge_count() {
            if costs.get(k, e).is_finite() {
                vars.push((k, e));
            }
        }
    }
    let col = |k: usize, e: usize| vars.binary_search(&(k, e)).ok();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut first = vec![0.0; vars.len()];
    for e in 0..graph.edge_count() {
        if let Some(c) = col(0, e) {
            first[c] = 1.0;
        }
    }
    rows.push(first);
    rhs.push(graph.grid().slice_weight());
    for k in 0..n.saturating_sub(1) {
        for i in 0..nodes {
            let mut row = vec![0.0; vars.len()];
            for &e in graph.in_edges(i) {
                if let Some(c) = col(k, e) {
                    row[c] += 1.0;
                }
            }
            for &e in graph.out_edges(i) {
                if let Some(c) = col(k + 1, e) {
                    row[c] -= 1.0;
                }
            }
            rows.push(row);
            rhs.push(0.0);
        }
    }
    // objective in units of action: mass · L
    let scale = n as f64;
    let objective: Vec<f64> = vars.iter().map(|&(k, e)| costs.get(k, e) * scale).collect();
    let solution = lp::minimize(&rows, &rhs, &objective)?
        .ok_or_else(|| Error::Infeasible("the flow polytope is empty".into()))?;
    let mut mass = vec![vec![0.0; graph.edge_count()]; n];
    for (&(k, e), &x) in vars.iter().zip(&solution.x) {
        mass[k][e] = x;
    }
    let eta = TransportMeasure::new(graph.clone(), mass)?;
    Ok(DualityCertificate { dp_min: dp.optimum, lp_min: solution.value, curve, eta })
}

/// One row of [`refinement_study`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow {
    pub n: usize,
    /// Lattice spacing `1/n²`.
    pub h: f64,
    pub action: f64,
    /// `|x_f − x_i|² / (2(b − a))` for the lattice endpoints used.
    pub exact: f64,
    pub error: f64,
}

/// Quadratic action `‖v‖²/2` between `0` and the lattice point nearest
/// `target` on `I = [0, 1]`, with `n` steps and spacing `1/n²` so that the
/// velocity alphabet refines with the time step. Speeds up to one are
/// allowed.
pub fn refinement_study(target: f64, ns: &[usize]) -> Result<Vec<RefinementRow>> {
    ensure!((0.0..=1.0).contains(&target), Validation, "target {target} outside [0, 1]");
    let l = Lagrangian::quadratic(1.0);
    ns.iter()
        .map(|&n| {
            ensure!(n > 0, Validation, "refinement needs positive step counts");
            let cells = n * n;
            let h = 1.0 / cells as f64;
            let space = Arc::new(MetricSpace::line(cells + 1, 0.0, h)?);
            let grid = TimeGrid::unit(n)?;
            let graph = Arc::new(TimeExpandedGraph::new(space.clone(), grid, EdgeSet::Radius(grid.dt()))?);
            let to = (target * cells as f64).round() as usize;
            let sol = tonelli_dp(&l, 0, to, &graph)?;
            let d = space.dist(0, to);
            let exact = d * d / (2.0 * (grid.b - grid.a));
            Ok(RefinementRow { n, h, action: sol.action, exact, error: (sol.action - exact).abs() })
        })
        .collect()
}

/// Least-squares slope of `log error` against `log n`, negated.
pub fn empirical_order(rows: &[RefinementRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| ((r.n as f64).ln(), r.error.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    -num / den
}
