//! Transport measures as flows on a time-expanded graph.
//!
//! A [`TimeExpandedGraph`] has one copy of the spatial points per grid time
//! and an arc `(t_k, x_i) → (t_{k+1}, x_j)` for every allowed pair `(i, j)`.
//! Traversing that arc means moving with velocity `v_ij = (x_j − x_i)/Δt`, so
//! the atom `(t_k, x_i, v_ij)` of `I × TM` is identified with the arc.
//!
//! A [`TransportMeasure`] puts mass `m_k(i, j) ≥ 0` on the arcs so that
//!
//! * each step carries `1/n` (the time marginal is normalized Lebesgue), and
//! * what enters a node at time `t_k` leaves it at time `t_k` (Kirchhoff).
//!
//! The second condition is the discrete continuity equation: for every
//! function `g` on grid nodes the telescoped sum in [`continuity_residual`]
//! vanishes, with boundary terms given by the first and last marginals.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{ensure, Error, NonRepresentable, Result};
use crate::lagrangian::Lagrangian;
use crate::metric::{norm, DiscreteMeasure, MetricSpace};
use crate::young::TimeGrid;

/// Absolute tolerance for Kirchhoff conservation and slice mass.
pub const CONSERVATION_TOL: f64 = 1e-12;
/// Tolerance on the barycenter of a generalized-curve fiber.
pub const BARYCENTER_TOL: f64 = 1e-10;

/// Which spatial pairs may be connected in one time step.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeSet {
    /// Every ordered pair.
    Full,
    /// Pairs at distance at most `r` (always including self-loops).
    Radius(f64),
    /// An explicit list; self-loops are added.
    List(Vec<(usize, usize)>),
}

/// Spatial points × time grid × allowed displacements.
#[derive(Debug, Clone)]
pub struct TimeExpandedGraph {
    space: Arc<MetricSpace>,
    grid: TimeGrid,
    edge_set: EdgeSet,
    edges: Vec<(usize, usize)>,
    velocities: Vec<Vec<f64>>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    index: HashMap<(usize, usize), usize>,
}

impl TimeExpandedGraph {
    pub fn new(space: Arc<MetricSpace>, grid: TimeGrid, edge_set: EdgeSet) -> Result<Self> {
        grid.validate()?;
        let n = space.len();
        let mut pairs: Vec<(usize, usize)> = match &edge_set {
            EdgeSet::Full => (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
            EdgeSet::Radius(r) => {
                ensure!(*r >= 0.0, Validation, "edge radius {r} is negative");
                (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| space.dist(i, j) <= r + 1e-12)
                    .collect()
            }
            EdgeSet::List(list) => {
                for &(i, j) in list {
                    ensure!(i < n && j < n, Validation, "edge ({i}, {j}) references a missing point");
                }
                list.clone()
            }
        };
        pairs.extend((0..n).map(|i| (i, i)));
        pairs.sort_unstable();
        pairs.dedup();

        let dt = grid.dt();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut index = HashMap::with_capacity(pairs.len());
        let mut velocities = Vec::with_capacity(pairs.len());
        for (e, &(i, j)) in pairs.iter().enumerate() {
            out_edges[i].push(e);
            in_edges[j].push(e);
            index.insert((i, j), e);
            velocities.push(space.displacement(i, j).into_iter().map(|d| d / dt).collect());
        }
        Ok(Self { space, grid, edge_set, edges: pairs, velocities, out_edges, in_edges, index })
    }

    pub fn full(space: Arc<MetricSpace>, grid: TimeGrid) -> Result<Self> {
        Self::new(space, grid, EdgeSet::Full)
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn edge_set(&self) -> &EdgeSet {
        &self.edge_set
    }

    pub fn node_count(&self) -> usize {
        self.space.len()
    }

    pub fn steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(i, j)).copied()
    }

    pub fn velocity(&self, e: usize) -> &[f64] {
        &self.velocities[e]
    }

    /// Outgoing edge ids of node `i`, sorted by target.
    pub fn out_edges(&self, i: usize) -> &[usize] {
        &self.out_edges[i]
    }

    /// Incoming edge ids of node `j`, sorted by source.
    pub fn in_edges(&self, j: usize) -> &[usize] {
        &self.in_edges[j]
    }

    /// `L(t_k, x_i, v_ij)` for edge `e`.
    pub fn edge_cost(&self, l: &Lagrangian, k: usize, e: usize) -> Result<f64> {
        let (i, j) = self.edges[e];
        l.edge_value(k, i, j, self.time(k), self.space.point(i), &self.velocities[e])
    }

    pub(crate) fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other)
            || (self.space.same_as(&other.space) && self.grid == other.grid && self.edges == other.edges)
    }
}

/// Edge masses `m_k(e)` on a [`TimeExpandedGraph`].
#[derive(Debug, Clone)]
pub struct TransportMeasure {
    graph: Arc<TimeExpandedGraph>,
    mass: Vec<Vec<f64>>,
}

impl TransportMeasure {
    /// Validated constructor; `mass[k][e]` for every step and edge id.
    pub fn new(graph: Arc<TimeExpandedGraph>, mass: Vec<Vec<f64>>) -> Result<Self> {
        let eta = Self::unchecked(graph, mass)?;
        eta.validate()?;
        Ok(eta)
    }

    /// Builds edge masses without checking slice mass or conservation; only
    /// the shape and sign are checked. Useful for residual diagnostics on
    /// perturbed flows. Most operations call [`TransportMeasure::validate`].
    pub fn unchecked(graph: Arc<TimeExpandedGraph>, mass: Vec<Vec<f64>>) -> Result<Self> {
        ensure!(mass.len() == graph.steps(), Validation, "{} mass slices for {} steps", mass.len(), graph.steps());
        for (k, slice) in mass.iter().enumerate() {
            ensure!(slice.len() == graph.edge_count(), Validation, "slice {k} has {} entries for {} edges", slice.len(), graph.edge_count());
            for (e, m) in slice.iter().enumerate() {
                ensure!(m.is_finite() && *m >= 0.0, Validation, "mass {m} on step {k} edge {:?}", graph.edge(e));
            }
        }
        Ok(Self { graph, mass })
    }

    /// From sparse `(k, i, j, m)` triplets; repeated entries add up.
    pub fn from_triplets(graph: Arc<TimeExpandedGraph>, triplets: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut mass = vec![vec![0.0; graph.edge_count()]; graph.steps()];
        for &(k, i, j, m) in triplets {
            ensure!(k < graph.steps(), Validation, "step {k} out of range");
            let e = graph.edge_id(i, j).ok_or_else(|| Error::Validation(format!("({i}, {j}) is not an edge")))?;
            mass[k][e] += m;
        }
        Self::new(graph, mass)
    }

    pub fn validate(&self) -> Result<()> {
        let target = self.graph.grid.slice_weight();
        for (k, slice) in self.mass.iter().enumerate() {
            let total: f64 = slice.iter().sum();
            ensure!(
                (total - target).abs() <= CONSERVATION_TOL,
                Validation,
                "step {k} carries {total}, expected {target}"
            );
        }
        let defect = self.conservation_defect();
        ensure!(defect <= CONSERVATION_TOL, Validation, "Kirchhoff conservation fails by {defect}");
        Ok(())
    }

    /// `max_{k, i} |Σ_in m_k − Σ_out m_{k+1}|` over interior times.
    pub fn conservation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.mass.len().saturating_sub(1) {
            for i in 0..self.graph.node_count() {
                worst = worst.max((self.incoming(k, i) - self.outgoing(k + 1, i)).abs());
            }
        }
        worst
    }

    pub fn graph(&self) -> &Arc<TimeExpandedGraph> {
        &self.graph
    }

    pub fn masses(&self) -> &[Vec<f64>] {
        &self.mass
    }

    pub fn mass(&self, k: usize, e: usize) -> f64 {
        self.mass[k][e]
    }

    pub fn mass_between(&self, k: usize, i: usize, j: usize) -> f64 {
        self.graph.edge_id(i, j).map_or(0.0, |e| self.mass[k][e])
    }

    /// Mass leaving node `i` at step `k`.
    pub fn outgoing(&self, k: usize, i: usize) -> f64 {
        self.graph.out_edges(i).iter().map(|&e| self.mass[k][e]).sum()
    }

    /// Mass arriving at node `j` at the end of step `k`.
    pub fn incoming(&self, k: usize, j: usize) -> f64 {
        self.graph.in_edges(j).iter().map(|&e| self.mass[k][e]).sum()
    }

    /// `μ_{t_k}` read from outgoing mass (`k < n`).
    pub fn outgoing_marginal(&self, k: usize) -> Vec<f64> {
        let n = self.graph.steps() as f64;
        (0..self.graph.node_count()).map(|i| n * self.outgoing(k, i)).collect()
    }

    /// `μ_{t_k}` read from incoming mass (`k ≥ 1`).
    pub fn incoming_marginal(&self, k: usize) -> Vec<f64> {
        let n = self.graph.steps() as f64;
        (0..self.graph.node_count()).map(|j| n * self.incoming(k - 1, j)).collect()
    }

    /// Number of `(k, e)` carrying positive mass.
    pub fn support_size(&self) -> usize {
        self.mass.iter().flatten().filter(|m| **m > 0.0).count()
    }

    /// `s·self + (1 − s)·other` on the same graph.
    pub fn mix(&self, s: f64, other: &Self) -> Result<Self> {
        ensure!(self.graph.same_as(&other.graph), Config, "flows live on different graphs");
        ensure!((0.0..=1.0).contains(&s), Validation, "mixing weight {s} outside [0, 1]");
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| s * x + (1.0 - s) * y).collect())
            .collect();
        Self::new(self.graph.clone(), mass)
    }

    /// Largest absolute edge-wise difference.
    pub fn max_difference(&self, other: &Self) -> f64 {
        self.mass
            .iter()
            .flatten()
            .zip(other.mass.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Sparse `(k, i, j, m)` triplets of the positive entries.
    pub fn triplets(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, slice) in self.mass.iter().enumerate() {
            for (e, &m) in slice.iter().enumerate() {
                if m > 0.0 {
                    let (i, j) = self.graph.edge(e);
                    out.push((k, i, j, m));
                }
            }
        }
        out
    }
}

/// Values `g(t_k, x_i)` on all grid nodes, `k = 0..=n`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    values: Vec<Vec<f64>>,
}

impl TestFunction {
    pub fn new(graph: &TimeExpandedGraph, values: Vec<Vec<f64>>) -> Result<Self> {
        ensure!(values.len() == graph.steps() + 1, Validation, "test function needs {} time rows", graph.steps() + 1);
        for row in &values {
            ensure!(row.len() == graph.node_count(), Validation, "test function row has {} entries", row.len());
            ensure!(row.iter().all(|v| v.is_finite()), Validation, "test function must be finite");
        }
        Ok(Self { values })
    }

    pub fn from_fn(graph: &TimeExpandedGraph, g: impl Fn(f64, &[f64]) -> f64) -> Result<Self> {
        let values = (0..=graph.steps())
            .map(|k| (0..graph.node_count()).map(|i| g(graph.time(k), graph.space().point(i))).collect())
            .collect();
        Self::new(graph, values)
    }

    /// The indicator of the single grid node `(k, i)`.
    pub fn indicator(graph: &TimeExpandedGraph, k: usize, i: usize) -> Result<Self> {
        let mut values = vec![vec![0.0; graph.node_count()]; graph.steps() + 1];
        values[k][i] = 1.0;
        Self::new(graph, values)
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k][i]
    }
}

/// Residual of the discrete continuity identity with the boundary terms
/// taken from `eta`'s own first and last marginals.
pub fn continuity_residual(eta: &TransportMeasure, g: &TestFunction) -> Result<f64> {
    let n = eta.graph.steps();
    let first = eta.outgoing_marginal(0);
    let last = eta.incoming_marginal(n);
    residual(eta, g, &first, &last)
}

/// Residual of
/// `Σ_k Σ_{ij} n m_k(i,j) (g(t_{k+1}, x_j) − g(t_k, x_i)) = ∫ g_b dμ_b − ∫ g_a dμ_a`.
///
/// Zero for every `g` exactly when `eta` conserves mass and has boundary
/// marginals `mu_a`, `mu_b`.
pub fn continuity_residual_between(
    eta: &TransportMeasure,
    g: &TestFunction,
    mu_a: &DiscreteMeasure,
    mu_b: &DiscreteMeasure,
) -> Result<f64> {
    let space = eta.graph.space();
    ensure!(mu_a.space().same_as(space) && mu_b.space().same_as(space), Config, "boundary measures live on another space");
    residual(eta, g, mu_a.weights(), mu_b.weights())
}

fn residual(eta: &TransportMeasure, g: &TestFunction, mu_a: &[f64], mu_b: &[f64]) -> Result<f64> {
    let graph = &eta.graph;
    let n = graph.steps();
    ensure!(
        g.values.len() == n + 1 && g.values[0].len() == graph.node_count(),
        Config,
        "test function does not match the time grid"
    );
    let scale = n as f64;
    let mut lhs = 0.0;
    for (k, slice) in eta.mass.iter().enumerate() {
        for (e, &m) in slice.iter().enumerate() {
            if m != 0.0 {
                let (i, j) = graph.edge(e);
                lhs += scale * m * (g.values[k + 1][j] - g.values[k][i]);
            }
        }
    }
    let boundary: f64 = (0..graph.node_count()).map(|i| g.values[n][i] * mu_b[i] - g.values[0][i] * mu_a[i]).sum();
    Ok(lhs - boundary)
}

/// `μ_{t_0}, …, μ_{t_n}`: outgoing mass at `t_k` for `k < n`, incoming mass at `t_n`.
pub fn marginal_path(eta: &TransportMeasure) -> Result<Vec<DiscreteMeasure>> {
    let n = eta.graph.steps();
    let space = eta.graph.space().clone();
    let mut path = Vec::with_capacity(n + 1);
    for k in 0..n {
        path.push(DiscreteMeasure::new(space.clone(), eta.outgoing_marginal(k))?);
    }
    path.push(DiscreteMeasure::new(space, eta.incoming_marginal(n))?);
    Ok(path)
}

/// A path `i_0, …, i_n` through the graph, one node per grid time.
#[derive(Debug, Clone)]
pub struct Curve {
    graph: Arc<TimeExpandedGraph>,
    nodes: Vec<usize>,
}

impl Curve {
    pub fn new(graph: Arc<TimeExpandedGraph>, nodes: Vec<usize>) -> Result<Self> {
        ensure!(nodes.len() == graph.steps() + 1, Validation, "curve has {} nodes, expected {}", nodes.len(), graph.steps() + 1);
        for w in nodes.windows(2) {
            ensure!(graph.edge_id(w[0], w[1]).is_some(), Validation, "({}, {}) is not an edge", w[0], w[1]);
        }
        Ok(Self { graph, nodes })
    }

    /// The curve resting at `node`.
    pub fn constant(graph: Arc<TimeExpandedGraph>, node: usize) -> Result<Self> {
        let n = graph.steps();
        Self::new(graph, vec![node; n + 1])
    }

    pub fn graph(&self) -> &Arc<TimeExpandedGraph> {
        &self.graph
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edge(&self, k: usize) -> usize {
        self.graph.edge_id(self.nodes[k], self.nodes[k + 1]).expect("validated on construction")
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        self.graph.velocity(self.edge(k))
    }

    /// CSV rows `t, x_1..x_d, v_1..v_d`; the final row repeats the last velocity.
    pub fn to_csv(&self) -> String {
        let d = self.graph.space().dim();
        let mut out = String::from("t");
        for c in 1..=d {
            out.push_str(&format!(",x{c}"));
        }
        for c in 1..=d {
            out.push_str(&format!(",v{c}"));
        }
        out.push('\n');
        let n = self.graph.steps();
        for k in 0..=n {
            let x = self.graph.space().point(self.nodes[k]);
            let v = self.velocity(k.min(n - 1));
            let fields: Vec<String> = std::iter::once(self.graph.time(k))
                .chain(x.iter().copied())
                .chain(v.iter().copied())
                .map(|f| format!("{f}"))
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// `γ̄ = dt ⊗ δ_{γ(t)} ⊗ δ_{γ̇(t)}`: mass `1/n` on each edge of the path.
pub fn curve_embed(gamma: &Curve) -> Result<TransportMeasure> {
    let graph = gamma.graph.clone();
    let w = graph.grid().slice_weight();
    let mut mass = vec![vec![0.0; graph.edge_count()]; graph.steps()];
    for (k, slice) in mass.iter_mut().enumerate() {
        slice[gamma.edge(k)] = w;
    }
    TransportMeasure::new(graph, mass)
}

/// A path with a probability distribution of velocities at every step whose
/// barycenter is the path's own velocity.
#[derive(Debug, Clone)]
pub struct GeneralizedCurve {
    path: Curve,
    fibers: Vec<Vec<(Vec<f64>, f64)>>,
}

impl GeneralizedCurve {
    pub fn new(path: Curve, fibers: Vec<Vec<(Vec<f64>, f64)>>) -> Result<Self> {
        let n = path.graph.steps();
        let d = path.graph.space().dim();
        ensure!(fibers.len() == n, Validation, "{} velocity fibers for {n} steps", fibers.len());
        for (k, fiber) in fibers.iter().enumerate() {
            ensure!(!fiber.is_empty(), Validation, "fiber {k} is empty");
            let mut total = 0.0;
            let mut bary = vec![0.0; d];
            for (v, w) in fiber {
                ensure!(v.len() == d, Validation, "velocity of dimension {} in fiber {k}", v.len());
                ensure!(*w >= 0.0 && w.is_finite(), Validation, "fiber {k} has weight {w}");
                total += w;
                for (b, c) in bary.iter_mut().zip(v) {
                    *b += w * c;
                }
            }
            ensure!((total - 1.0).abs() <= 1e-12, Validation, "fiber {k} has total weight {total}");
            let gap = bary.iter().zip(path.velocity(k)).map(|(b, v)| (b - v).abs()).fold(0.0, f64::max);
            ensure!(gap <= BARYCENTER_TOL, Validation, "fiber {k} barycenter is off the path velocity by {gap}");
        }
        Ok(Self { path, fibers })
    }

    /// The Dirac fibers `δ_{γ̇(t)}`.
    pub fn from_curve(path: Curve) -> Self {
        let fibers = (0..path.graph.steps()).map(|k| vec![(path.velocity(k).to_vec(), 1.0)]).collect();
        Self { path, fibers }
    }

    pub fn path(&self) -> &Curve {
        &self.path
    }

    pub fn fibers(&self) -> &[Vec<(Vec<f64>, f64)>] {
        &self.fibers
    }
}

/// Mean outgoing velocity `V(t_k, x_i)` where there is mass, `None` elsewhere.
#[derive(Debug, Clone)]
pub struct VectorField {
    graph: Arc<TimeExpandedGraph>,
    values: Vec<Vec<Option<Vec<f64>>>>,
}

impl VectorField {
    pub fn new(graph: Arc<TimeExpandedGraph>, values: Vec<Vec<Option<Vec<f64>>>>) -> Result<Self> {
        ensure!(values.len() == graph.steps(), Validation, "vector field has {} steps", values.len());
        let d = graph.space().dim();
        for (k, row) in values.iter().enumerate() {
            ensure!(row.len() == graph.node_count(), Validation, "vector field row {k} has {} nodes", row.len());
            for v in row.iter().flatten() {
                ensure!(v.len() == d && v.iter().all(|c| c.is_finite()), Validation, "invalid velocity {v:?} at step {k}");
            }
        }
        Ok(Self { graph, values })
    }

    /// A field defined everywhere by a closure `V(t, x)`.
    pub fn from_fn(graph: Arc<TimeExpandedGraph>, v: impl Fn(f64, &[f64]) -> Vec<f64>) -> Result<Self> {
        let values = (0..graph.steps())
            .map(|k| (0..graph.node_count()).map(|i| Some(v(graph.time(k), graph.space().point(i)))).collect())
            .collect();
        Self::new(graph, values)
    }

    pub fn graph(&self) -> &Arc<TimeExpandedGraph> {
        &self.graph
    }

    pub fn get(&self, k: usize, i: usize) -> Option<&[f64]> {
        self.values[k][i].as_deref()
    }

    /// Edge out of `i` whose velocity is `V(t_k, x_i)`, if any.
    pub fn target_edge(&self, k: usize, i: usize) -> Option<usize> {
        let v = self.get(k, i)?;
        find_edge_with_velocity(&self.graph, i, v)
    }
}

pub(crate) fn find_edge_with_velocity(graph: &TimeExpandedGraph, i: usize, v: &[f64]) -> Option<usize> {
    let tol = 1e-9 * norm(v).max(1.0);
    graph
        .out_edges(i)
        .iter()
        .copied()
        .find(|&e| graph.velocity(e).iter().zip(v).all(|(a, b)| (a - b).abs() <= tol))
}

/// Output of [`barycentric_project`].
#[derive(Debug, Clone)]
pub struct BarycentricProjection {
    pub field: VectorField,
    /// `Ṽ♯μ` when every mean velocity lands on a neighbour and the pushed
    /// mass still satisfies conservation; otherwise the offending nodes.
    pub projected: std::result::Result<TransportMeasure, NonRepresentable>,
}

/// Replaces each velocity fiber `η_{t,x}` by its mean.
pub fn barycentric_project(eta: &TransportMeasure) -> Result<BarycentricProjection> {
    eta.validate()?;
    let graph = eta.graph.clone();
    let (n, nodes, d) = (graph.steps(), graph.node_count(), graph.space().dim());
    let mut values = vec![vec![None; nodes]; n];
    let mut pushed = vec![vec![0.0; graph.edge_count()]; n];
    let mut certificate = NonRepresentable::default();
    for k in 0..n {
        for i in 0..nodes {
            let out = eta.outgoing(k, i);
            if out <= 0.0 {
                continue;
            }
            let mut mean = vec![0.0; d];
            for &e in graph.out_edges(i) {
                let m = eta.mass[k][e];
                for (c, v) in mean.iter_mut().zip(graph.velocity(e)) {
                    *c += m * v;
                }
            }
            mean.iter_mut().for_each(|c| *c /= out);
            match find_edge_with_velocity(&graph, i, &mean) {
                Some(e) => pushed[k][e] = out,
                None => certificate.off_grid.push((k, i)),
            }
            values[k][i] = Some(mean);
        }
    }
    let field = VectorField::new(graph.clone(), values)?;
    if certificate.off_grid.is_empty() {
        for k in 0..n.saturating_sub(1) {
            for j in 0..nodes {
                let arriving: f64 = graph.in_edges(j).iter().map(|&e| pushed[k][e]).sum();
                if (arriving - eta.outgoing(k + 1, j)).abs() > CONSERVATION_TOL {
                    certificate.unbalanced.push((k + 1, j));
                }
            }
        }
    }
    let projected = if certificate.is_empty() {
        Ok(TransportMeasure::new(graph, pushed)?)
    } else {
        Err(certificate)
    };
    Ok(BarycentricProjection { field, projected })
}

/// Something with an action `∫ L`.
pub trait Action {
    fn action(&self, l: &Lagrangian) -> Result<f64>;
}

/// `∫ L dη`, normalized in time.
pub fn action(measure: &impl Action, l: &Lagrangian) -> Result<f64> {
    measure.action(l)
}

impl Action for TransportMeasure {
    fn action(&self, l: &Lagrangian) -> Result<f64> {
        let mut total = 0.0;
        for (k, slice) in self.mass.iter().enumerate() {
            for (e, &m) in slice.iter().enumerate() {
                if m > 0.0 {
                    total += m * self.graph.edge_cost(l, k, e)?;
                }
            }
        }
        Ok(total)
    }
}

impl Action for Curve {
    fn action(&self, l: &Lagrangian) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.graph.steps() {
            total += self.graph.edge_cost(l, k, self.edge(k))?;
        }
        Ok(total * self.graph.grid().slice_weight())
    }
}

impl Action for GeneralizedCurve {
    fn action(&self, l: &Lagrangian) -> Result<f64> {
        let graph = &self.path.graph;
        let mut total = 0.0;
        for (k, fiber) in self.fibers.iter().enumerate() {
            let x = graph.space().point(self.path.nodes[k]);
            for (v, w) in fiber {
                if *w > 0.0 {
                    total += w * l.value(graph.time(k), x, v)?;
                }
            }
        }
        Ok(total * graph.grid().slice_weight())
    }
}

/// `(∫ L dγ̄, ∫ L dΓ)` for a generalized curve `Γ` above `γ`. For a
/// fiberwise convex `L` the second is at least the first.
pub fn jensen_reduce(gamma: &GeneralizedCurve, l: &Lagrangian) -> Result<(f64, f64)> {
    ensure!(
        l.is_fiberwise_convex(),
        Contract,
        "Jensen reduction needs a fiberwise convex Lagrangian ({} is not flagged convex)",
        l.label()
    );
    let graph = &gamma.path.graph;
    let mut curve_action = 0.0;
    for k in 0..graph.steps() {
        let x = graph.space().point(gamma.path.nodes[k]);
        curve_action += l.value(graph.time(k), x, gamma.path.velocity(k))?;
    }
    curve_action *= graph.grid().slice_weight();
    Ok((curve_action, gamma.action(l)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(points: usize, steps: usize) -> Arc<TimeExpandedGraph> {
        let space = Arc::new(MetricSpace::line(points, 0.0, 1.0).unwrap());
        Arc::new(TimeExpandedGraph::full(space, TimeGrid::unit(steps).unwrap()).unwrap())
    }

    #[test]
    fn graph_always_has_self_loops() {
        let space = Arc::new(MetricSpace::line(3, 0.0, 1.0).unwrap());
        let g = TimeExpandedGraph::new(space, TimeGrid::unit(2).unwrap(), EdgeSet::List(vec![(0, 1)])).unwrap();
        assert_eq!(g.edges(), &[(0, 0), (0, 1), (1, 1), (2, 2)]);
        assert_eq!(g.velocity(g.edge_id(0, 1).unwrap()), &[2.0]);
        assert!((0..3).all(|i| !g.out_edges(i).is_empty() && !g.in_edges(i).is_empty()));
    }

    #[test]
    fn radius_edges() {
        let space = Arc::new(MetricSpace::line(4, 0.0, 1.0).unwrap());
        let g = TimeExpandedGraph::new(space, TimeGrid::unit(1).unwrap(), EdgeSet::Radius(1.0)).unwrap();
        assert_eq!(g.edge_count(), 4 + 2 * 3);
    }

    #[test]
    fn constant_curve_embeds_on_self_loop() {
        let g = line_graph(3, 4);
        let c = Curve::constant(g.clone(), 1).unwrap();
        let eta = curve_embed(&c).unwrap();
        let e = g.edge_id(1, 1).unwrap();
        assert!((0..4).all(|k| eta.mass(k, e) == 0.25));
        assert_eq!(g.velocity(e), &[0.0]);
    }

    #[test]
    fn straight_two_step_path() {
        let g = line_graph(3, 2);
        let c = Curve::new(g.clone(), vec![0, 1, 2]).unwrap();
        let eta = curve_embed(&c).unwrap();
        assert_eq!(eta.mass_between(0, 0, 1), 0.5);
        assert_eq!(eta.mass_between(1, 1, 2), 0.5);
        let path = marginal_path(&eta).unwrap();
        for (k, mu) in path.iter().enumerate() {
            assert_eq!(mu.weight(k), 1.0);
        }
    }

    #[test]
    fn curve_rejects_missing_edges() {
        let space = Arc::new(MetricSpace::line(3, 0.0, 1.0).unwrap());
        let g = Arc::new(TimeExpandedGraph::new(space, TimeGrid::unit(1).unwrap(), EdgeSet::Radius(1.0)).unwrap());
        assert!(matches!(Curve::new(g, vec![0, 2]), Err(Error::Validation(_))));
    }

    #[test]
    fn split_flow_has_half_half_interior_marginal() {
        let g = line_graph(3, 2);
        let eta = TransportMeasure::from_triplets(
            g,
            &[(0, 1, 0, 0.25), (0, 1, 2, 0.25), (1, 0, 0, 0.25), (1, 2, 2, 0.25)],
        )
        .unwrap();
        let path = marginal_path(&eta).unwrap();
        assert_eq!(path[0].weights(), &[0.0, 1.0, 0.0]);
        assert_eq!(path[1].weights(), &[0.5, 0.0, 0.5]);
        assert_eq!(path[2].weights(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn validation_catches_kirchhoff_and_slice_mass() {
        let g = line_graph(2, 2);
        assert!(TransportMeasure::from_triplets(g.clone(), &[(0, 0, 0, 0.5), (1, 1, 1, 0.5)]).is_err());
        assert!(TransportMeasure::from_triplets(g, &[(0, 0, 0, 0.5)]).is_err());
    }

    #[test]
    fn constant_and_time_test_functions_have_zero_residual() {
        let g = line_graph(3, 2);
        let eta = TransportMeasure::from_triplets(
            g.clone(),
            &[(0, 1, 0, 0.25), (0, 1, 2, 0.25), (1, 0, 1, 0.25), (1, 2, 2, 0.25)],
        )
        .unwrap();
        let one = TestFunction::from_fn(&g, |_, _| 1.0).unwrap();
        assert_eq!(continuity_residual(&eta, &one).unwrap(), 0.0);
        let t = TestFunction::from_fn(&g, |t, _| t).unwrap();
        assert!(continuity_residual(&eta, &t).unwrap().abs() < 1e-15);
    }

    #[test]
    fn symmetric_split_projects_to_rest() {
        let g = line_graph(3, 1);
        let eta = TransportMeasure::from_triplets(g.clone(), &[(0, 1, 0, 0.5), (0, 1, 2, 0.5)]).unwrap();
        let p = barycentric_project(&eta).unwrap();
        assert_eq!(p.field.get(0, 1).unwrap(), &[0.0]);
        let projected = p.projected.unwrap();
        assert_eq!(projected.mass_between(0, 1, 1), 1.0);
    }

    #[test]
    fn deterministic_flow_projects_to_itself() {
        let g = line_graph(3, 2);
        let eta = curve_embed(&Curve::new(g, vec![0, 1, 1]).unwrap()).unwrap();
        let p = barycentric_project(&eta).unwrap();
        assert_eq!(p.field.get(0, 0).unwrap(), &[2.0]);
        assert_eq!(p.projected.unwrap().max_difference(&eta), 0.0);
    }

    #[test]
    fn off_grid_barycenter_yields_certificate() {
        let g = line_graph(3, 1);
        let eta = TransportMeasure::from_triplets(g, &[(0, 0, 0, 0.5), (0, 0, 1, 0.5)]).unwrap();
        let p = barycentric_project(&eta).unwrap();
        assert_eq!(p.projected.unwrap_err().off_grid, vec![(0, 0)]);
    }

    #[test]
    fn split_before_interior_time_is_unbalanced() {
        let g = line_graph(3, 2);
        let eta = TransportMeasure::from_triplets(
            g,
            &[(0, 1, 0, 0.25), (0, 1, 2, 0.25), (1, 0, 0, 0.25), (1, 2, 2, 0.25)],
        )
        .unwrap();
        let cert = barycentric_project(&eta).unwrap().projected.unwrap_err();
        assert!(cert.off_grid.is_empty());
        assert_eq!(cert.unbalanced, vec![(1, 0), (1, 1), (1, 2)]);
    }

    #[test]
    fn jensen_variance_gap() {
        let g = line_graph(3, 1);
        let path = Curve::constant(g, 1).unwrap();
        let gamma = GeneralizedCurve::new(path.clone(), vec![vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)]]).unwrap();
        let l = Lagrangian::from_fn(|_, _, v| v[0] * v[0]).convex(true);
        let (curve, generalized) = jensen_reduce(&gamma, &l).unwrap();
        assert_eq!(curve, 0.0);
        assert_eq!(generalized, 1.0);
        let dirac = GeneralizedCurve::from_curve(path);
        let (c, g) = jensen_reduce(&dirac, &l).unwrap();
        assert_eq!(c, g);
    }

    #[test]
    fn jensen_needs_convex_flag() {
        let g = line_graph(2, 1);
        let gamma = GeneralizedCurve::from_curve(Curve::constant(g, 0).unwrap());
        let l = Lagrangian::from_fn(|_, _, v| v[0] * v[0]);
        assert!(matches!(jensen_reduce(&gamma, &l), Err(Error::Contract(_))));
    }

    #[test]
    fn generalized_curve_barycenter_must_match() {
        let g = line_graph(3, 1);
        let path = Curve::constant(g, 1).unwrap();
        assert!(GeneralizedCurve::new(path, vec![vec![(vec![1.0], 0.5), (vec![0.0], 0.5)]]).is_err());
    }

    #[test]
    fn actions_of_constants_and_straight_curve() {
        let g = line_graph(5, 4);
        let c = Curve::new(g.clone(), vec![0, 1, 2, 3, 4]).unwrap();
        let eta = curve_embed(&c).unwrap();
        assert_eq!(action(&eta, &Lagrangian::constant(0.0)).unwrap(), 0.0);
        assert!((action(&eta, &Lagrangian::constant(1.0)).unwrap() - 1.0).abs() < 1e-15);
        // speed 4 on each step: ½·16
        assert!((action(&c, &Lagrangian::quadratic(1.0)).unwrap() - 8.0).abs() < 1e-12);
        assert!((action(&eta, &Lagrangian::quadratic(1.0)).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_cost_on_support_gives_infinite_action() {
        let g = line_graph(2, 1);
        let eta = curve_embed(&Curve::new(g, vec![0, 1]).unwrap()).unwrap();
        let l = Lagrangian::from_fn(|_, _, v| if v[0] != 0.0 { f64::INFINITY } else { 0.0 });
        assert_eq!(action(&eta, &l).unwrap(), f64::INFINITY);
    }
}
