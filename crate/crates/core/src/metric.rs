//! Finite metric spaces, discrete probability measures and the
//! Kantorovich–Rubinstein distance.
//!
//! On a finite space every probability measure has a finite first moment
//! and every family of measures is tight, so `d₁` is simply the value of a
//! transportation problem. [`kr_distance`] solves it as a min-cost flow on the
//! bipartite support graph; [`kr_dual`] extracts a 1-Lipschitz potential from
//! the optimal residual network so that the two values can be compared.

use std::sync::Arc;

use crate::error::{ensure, Error, Result};
use crate::mcf::Network;

/// Tolerance on the total mass of a [`DiscreteMeasure`].
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Tolerance on coupling marginals.
pub const MARGINAL_TOL: f64 = 1e-10;
/// Slack allowed in the 1-Lipschitz condition.
pub const LIPSCHITZ_TOL: f64 = 1e-10;

/// A finite set of points in `ℝ^d` with a distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    points: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    torus: Option<Vec<f64>>,
}

impl MetricSpace {
    /// Euclidean distances between `points`.
    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(points, None)
    }

    /// Points on the flat torus `ℝ^d / (periods·ℤ^d)`; the distance is that of
    /// the shortest representative of each displacement.
    pub fn torus(points: Vec<Vec<f64>>, periods: Vec<f64>) -> Result<Self> {
        ensure!(
            periods.iter().all(|p| p.is_finite() && *p > 0.0),
            Validation,
            "torus periods must be positive, got {periods:?}"
        );
        Self::build(points, Some(periods))
    }

    /// Evenly spaced points `start, start + h, …` on a line.
    pub fn line(count: usize, start: f64, step: f64) -> Result<Self> {
        Self::euclidean((0..count).map(|i| vec![start + step * i as f64]).collect())
    }

    /// An explicit distance matrix. The metric axioms are checked.
    pub fn with_distances(points: Vec<Vec<f64>>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        ensure!(dist.len() == n, Validation, "distance matrix has {} rows for {n} points", dist.len());
        for (i, row) in dist.iter().enumerate() {
            ensure!(row.len() == n, Validation, "distance row {i} has length {}", row.len());
            ensure!(row[i] == 0.0, Validation, "dist[{i}][{i}] = {} is not zero", row[i]);
            for j in 0..n {
                let d = row[j];
                ensure!(d.is_finite() && d >= 0.0, Validation, "dist[{i}][{j}] = {d}");
                ensure!((d - dist[j][i]).abs() <= 1e-12, Validation, "distance matrix is not symmetric at ({i}, {j})");
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    ensure!(
                        dist[i][k] <= dist[i][j] + dist[j][k] + 1e-12,
                        Validation,
                        "triangle inequality fails for ({i}, {j}, {k})"
                    );
                }
            }
        }
        let space = Self { points, dist, torus: None };
        space.check_points()?;
        Ok(space)
    }

    fn build(points: Vec<Vec<f64>>, torus: Option<Vec<f64>>) -> Result<Self> {
        let mut space = Self { points, dist: Vec::new(), torus };
        space.check_points()?;
        let n = space.points.len();
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = norm(&space.displacement(i, j));
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        space.dist = dist;
        Ok(space)
    }

    fn check_points(&self) -> Result<()> {
        ensure!(!self.points.is_empty(), Validation, "metric space has no points");
        let d = self.points[0].len();
        for (i, p) in self.points.iter().enumerate() {
            ensure!(p.len() == d, Validation, "point {i} has dimension {} (expected {d})", p.len());
            ensure!(p.iter().all(|c| c.is_finite()), Validation, "point {i} has a non-finite coordinate");
        }
        if let Some(periods) = &self.torus {
            ensure!(periods.len() == d, Validation, "torus has {} periods for dimension {d}", periods.len());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn torus_periods(&self) -> Option<&[f64]> {
        self.torus.as_deref()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.dist
    }

    /// `x_j − x_i`, reduced to the shortest representative on a torus.
    pub fn displacement(&self, i: usize, j: usize) -> Vec<f64> {
        let (a, b) = (&self.points[i], &self.points[j]);
        let mut d: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
        if let Some(periods) = &self.torus {
            for (c, p) in d.iter_mut().zip(periods) {
                *c -= p * (*c / p).round();
            }
        }
        d
    }

    /// Same space, either by identity or by value.
    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().flatten().copied().fold(0.0, f64::max)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A probability measure supported on the points of a [`MetricSpace`].
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    space: Arc<MetricSpace>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(space: Arc<MetricSpace>, weights: Vec<f64>) -> Result<Self> {
        ensure!(
            weights.len() == space.len(),
            Validation,
            "{} weights for {} points",
            weights.len(),
            space.len()
        );
        for (i, w) in weights.iter().enumerate() {
            ensure!(w.is_finite() && *w >= 0.0, Validation, "weight {i} = {w} is not a nonnegative real");
        }
        let total: f64 = weights.iter().sum();
        ensure!(
            (total - 1.0).abs() <= NORMALIZATION_TOL,
            Validation,
            "weights sum to {total}, not 1"
        );
        Ok(Self { space, weights })
    }

    /// Rescales nonnegative masses to total one.
    pub fn normalized(space: Arc<MetricSpace>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        ensure!(total > 0.0 && total.is_finite(), Validation, "total mass {total} cannot be normalized");
        Self::new(space, masses.into_iter().map(|m| m / total).collect())
    }

    pub fn dirac(space: Arc<MetricSpace>, at: usize) -> Result<Self> {
        ensure!(at < space.len(), Validation, "dirac at {at} outside a {}-point space", space.len());
        let mut w = vec![0.0; space.len()];
        w[at] = 1.0;
        Self::new(space, w)
    }

    pub fn uniform(space: Arc<MetricSpace>) -> Self {
        let n = space.len();
        Self { weights: vec![1.0 / n as f64; n], space }
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn first_moment(&self, origin: usize) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * self.space.dist(origin, i)).sum()
    }
}

/// A transport plan between two measures on the same space.
#[derive(Debug, Clone)]
pub struct Coupling {
    mass: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn new(mu: &DiscreteMeasure, nu: &DiscreteMeasure, mass: Vec<Vec<f64>>) -> Result<Self> {
        same_space(mu, nu)?;
        let n = mu.space.len();
        ensure!(mass.len() == n && mass.iter().all(|r| r.len() == n), Validation, "coupling must be {n}×{n}");
        for i in 0..n {
            let row: f64 = mass[i].iter().sum();
            ensure!((row - mu.weights[i]).abs() <= MARGINAL_TOL, Validation, "row {i} sums to {row}, expected {}", mu.weights[i]);
            let col: f64 = mass.iter().map(|r| r[i]).sum();
            ensure!((col - nu.weights[i]).abs() <= MARGINAL_TOL, Validation, "column {i} sums to {col}, expected {}", nu.weights[i]);
            ensure!(mass[i].iter().all(|m| *m >= 0.0), Validation, "negative mass in row {i}");
        }
        Ok(Self { mass })
    }

    /// Mass moved from point `i` to point `j`.
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.mass[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.mass
    }

    pub fn cost(&self, space: &MetricSpace) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.mass.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                total += m * space.dist(i, j);
            }
        }
        total
    }
}

/// A real function on the points of a space, 1-Lipschitz for its metric.
#[derive(Debug, Clone)]
pub struct LipschitzPotential {
    values: Vec<f64>,
}

impl LipschitzPotential {
    pub fn new(space: &MetricSpace, values: Vec<f64>) -> Result<Self> {
        ensure!(values.len() == space.len(), Validation, "{} values for {} points", values.len(), space.len());
        let excess = lipschitz_excess(space, &values);
        ensure!(excess <= LIPSCHITZ_TOL, Validation, "potential violates the 1-Lipschitz bound by {excess}");
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// `max_{i,j} |f_i − f_j| − d(i, j)`, clamped below at zero.
pub fn lipschitz_excess(space: &MetricSpace, values: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..values.len() {
        for j in 0..values.len() {
            worst = worst.max((values[i] - values[j]).abs() - space.dist(i, j));
        }
    }
    worst
}

fn same_space(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.space.same_as(&nu.space) {
        Ok(())
    } else {
        Err(Error::Config("measures live on different metric spaces".into()))
    }
}

/// Optimal transportation network for `d₁(μ, ν)`: one node per support point
/// of each measure, complete bipartite arcs.
struct KrNetwork {
    net: Network,
    src_atoms: Vec<usize>,
    dst_atoms: Vec<usize>,
    /// arc id of (source atom a, sink atom b), row-major
    arcs: Vec<usize>,
}

fn solve_kr(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<KrNetwork> {
    same_space(mu, nu)?;
    let space = &mu.space;
    let src_atoms = mu.support();
    let dst_atoms = nu.support();
    let (p, q) = (src_atoms.len(), dst_atoms.len());
    let mut net = Network::new(p + q + 2);
    let (source, sink) = (p + q, p + q + 1);
    let mut arcs = Vec::with_capacity(p * q);
    for &x in &src_atoms {
        for (b, &y) in dst_atoms.iter().enumerate() {
            let a = arcs.len() / q;
            arcs.push(net.add_arc(a, p + b, f64::INFINITY, space.dist(x, y)));
        }
    }
    for (a, &x) in src_atoms.iter().enumerate() {
        net.add_arc(source, a, mu.weights[x], 0.0);
    }
    for (b, &y) in dst_atoms.iter().enumerate() {
        net.add_arc(p + b, sink, nu.weights[y], 0.0);
    }
    let left = net.min_cost_flow(source, sink, 1.0)?;
    ensure!(left <= 1e-12, Internal, "transportation problem left {left} unrouted");
    Ok(KrNetwork { net, src_atoms, dst_atoms, arcs })
}

/// `d₁(μ, ν)` together with an optimal coupling.
pub fn kr_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, Coupling)> {
    let kr = solve_kr(mu, nu)?;
    let n = mu.space.len();
    let mut mass = vec![vec![0.0; n]; n];
    let q = kr.dst_atoms.len();
    for (a, &x) in kr.src_atoms.iter().enumerate() {
        for (b, &y) in kr.dst_atoms.iter().enumerate() {
            mass[x][y] += kr.net.flow(kr.arcs[a * q + b]);
        }
    }
    let plan = Coupling::new(mu, nu, mass)?;
    Ok((plan.cost(&mu.space), plan))
}

/// Dual form of `d₁`: `max Σ f·(μ − ν)` over 1-Lipschitz `f`.
///
/// The potential is read off the optimal residual network (shortest-path
/// labels give a feasible dual pair `φ(x) + ψ(y) ≤ d(x, y)`), then replaced by
/// the c-transform `f(z) = min_y d(z, y) − ψ(y)`, which is 1-Lipschitz on the
/// whole space and at least as good as the pair.
pub fn kr_dual(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, LipschitzPotential)> {
    let kr = solve_kr(mu, nu)?;
    let space = &mu.space;
    let labels = kr.net.residual_potentials()?;
    let p = kr.src_atoms.len();
    let psi: Vec<f64> = (0..kr.dst_atoms.len()).map(|b| labels[p + b]).collect();
    let values: Vec<f64> = (0..space.len())
        .map(|z| {
            kr.dst_atoms
                .iter()
                .zip(&psi)
                .map(|(&y, s)| space.dist(z, y) - s)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // Shift so the potential vanishes on the last target atom; `μ − ν` has
    // zero total mass so the value is unaffected.
    let anchor = values[*kr.dst_atoms.last().expect("a probability measure has support")];
    let values: Vec<f64> = values.into_iter().map(|v| v - anchor).collect();
    let value = values
        .iter()
        .enumerate()
        .map(|(i, f)| f * (mu.weights[i] - nu.weights[i]))
        .sum();
    Ok((value, LipschitzPotential::new(space, values)?))
}

/// `∫ f dμ` for a function given on points. Non-finite values on the
/// support are an error.
pub fn integrate(f: impl Fn(&[f64]) -> f64, mu: &DiscreteMeasure) -> Result<f64> {
    let mut total = 0.0;
    for (i, &w) in mu.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let v = f(mu.space.point(i));
        ensure!(v.is_finite(), Evaluation, "integrand is {v} at point {i}");
        total += w * v;
    }
    Ok(total)
}
