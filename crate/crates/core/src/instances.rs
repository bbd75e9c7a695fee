//! Seeded random instances for experiments and tests.
//!
//! Every generator draws from a caller-supplied RNG, so a seed fixes the
//! whole instance. [`rng`] builds the ChaCha generator used throughout.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lagrangian::Lagrangian;
use crate::metric::{DiscreteMeasure, MetricSpace};
use crate::superposition::{ClosedMeasure, Cycle, SolenoidalDecomposition};
use crate::transport::{Curve, EdgeSet, GeneralizedCurve, TimeExpandedGraph, TransportMeasure, VectorField};
use crate::young::TimeGrid;

/// The generator behind every seeded instance.
pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` points uniform in `[0, 1]^dim`.
pub fn space(rng: &mut impl Rng, count: usize, dim: usize) -> Result<Arc<MetricSpace>> {
    let points = (0..count).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
    Ok(Arc::new(MetricSpace::euclidean(points)?))
}

/// Positive weights on `atoms` distinct random points, zero elsewhere.
pub fn measure(rng: &mut impl Rng, space: &Arc<MetricSpace>, atoms: usize) -> Result<DiscreteMeasure> {
    let mut idx: Vec<usize> = (0..space.len()).collect();
    idx.shuffle(rng);
    let mut w = vec![0.0; space.len()];
    for &i in idx.iter().take(atoms.clamp(1, space.len())) {
        w[i] = rng.gen_range(0.05..1.0);
    }
    DiscreteMeasure::normalized(space.clone(), w)
}

/// Points `0, 1, …` on a line with all pairs allowed, over `[0, 1]`.
pub fn line_graph(nodes: usize, steps: usize) -> Result<Arc<TimeExpandedGraph>> {
    let space = Arc::new(MetricSpace::line(nodes, 0.0, 1.0)?);
    Ok(Arc::new(TimeExpandedGraph::full(space, TimeGrid::unit(steps)?)?))
}

/// Random points in the unit square; edges within `radius` (all pairs when
/// `radius` is `None`).
pub fn graph(rng: &mut impl Rng, nodes: usize, steps: usize, radius: Option<f64>) -> Result<Arc<TimeExpandedGraph>> {
    let space = space(rng, nodes, 2)?;
    let edges = radius.map_or(EdgeSet::Full, EdgeSet::Radius);
    Ok(Arc::new(TimeExpandedGraph::new(space, TimeGrid::unit(steps)?, edges)?))
}

/// A random walk through the graph starting anywhere.
pub fn curve(rng: &mut impl Rng, graph: &Arc<TimeExpandedGraph>) -> Result<Curve> {
    let mut nodes = vec![rng.gen_range(0..graph.node_count())];
    for _ in 0..graph.steps() {
        let out = graph.out_edges(*nodes.last().expect("nonempty"));
        nodes.push(graph.edge(out[rng.gen_range(0..out.len())]).1);
    }
    Curve::new(graph.clone(), nodes)
}

/// A mixture of `curves` random walks with random weights.
pub fn flow(rng: &mut impl Rng, graph: &Arc<TimeExpandedGraph>, curves: usize) -> Result<TransportMeasure> {
    let weights: Vec<f64> = (0..curves.max(1)).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let w = graph.grid().slice_weight();
    let mut mass = vec![vec![0.0; graph.edge_count()]; graph.steps()];
    for weight in weights {
        let c = curve(rng, graph)?;
        for (k, slice) in mass.iter_mut().enumerate() {
            slice[c.edge(k)] += weight / total * w;
        }
    }
    TransportMeasure::new(graph.clone(), mass)
}

/// A closed random walk of length `period · n`.
pub fn cycle(rng: &mut impl Rng, graph: &Arc<TimeExpandedGraph>, period: usize) -> Vec<usize> {
    let len = period * graph.steps();
    loop {
        let mut nodes = vec![rng.gen_range(0..graph.node_count())];
        while nodes.len() < len {
            let out = graph.out_edges(*nodes.last().expect("nonempty"));
            nodes.push(graph.edge(out[rng.gen_range(0..out.len())]).1);
        }
        if graph.edge_id(*nodes.last().expect("nonempty"), nodes[0]).is_some() {
            return nodes;
        }
    }
}

/// A mixture of `cycles` random cycles with periods in `1..=max_period`.
pub fn circulation(
    rng: &mut impl Rng,
    graph: &Arc<TimeExpandedGraph>,
    cycles: usize,
    max_period: usize,
) -> Result<ClosedMeasure> {
    let weights: Vec<f64> = (0..cycles.max(1)).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let cycles = weights
        .into_iter()
        .map(|w| {
            let period = rng.gen_range(1..=max_period.max(1));
            Cycle { nodes: cycle(rng, graph, period), period, weight: w / total }
        })
        .collect();
    ClosedMeasure::new(SolenoidalDecomposition::new(graph.clone(), cycles)?.reconstruct()?)
}

/// Tabulated costs uniform in `range` on every step and edge.
pub fn table_lagrangian(rng: &mut impl Rng, graph: &TimeExpandedGraph, range: std::ops::Range<f64>) -> Lagrangian {
    let mut entries = HashMap::new();
    for k in 0..graph.steps() {
        for &(i, j) in graph.edges() {
            entries.insert((k, i, j), rng.gen_range(range.clone()));
        }
    }
    Lagrangian::table(entries, f64::INFINITY)
}

/// `a‖v‖² + max_m (α_m·v + β_m) + c(t, x)`: strictly convex in `v`.
pub fn convex_lagrangian(rng: &mut impl Rng, dim: usize) -> Lagrangian {
    let a = rng.gen_range(0.1..2.0);
    let pieces: Vec<(Vec<f64>, f64)> = (0..3)
        .map(|_| ((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(-1.0..1.0)))
        .collect();
    let (ct, cx) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    Lagrangian::from_fn(move |t, x, v| {
        let quad: f64 = v.iter().map(|c| c * c).sum::<f64>() * a;
        let pl = pieces
            .iter()
            .map(|(al, b)| al.iter().zip(v).map(|(p, q)| p * q).sum::<f64>() + b)
            .fold(f64::NEG_INFINITY, f64::max);
        quad + pl + ct * t + cx * x.iter().sum::<f64>()
    })
    .convex(true)
    .labelled("random convex")
}

/// A generalized curve above a random path. With `dirac` the fibers are the
/// path velocities; otherwise each fiber has two to four distinct atoms
/// spread around the path velocity.
pub fn generalized_curve(rng: &mut impl Rng, graph: &Arc<TimeExpandedGraph>, dirac: bool) -> Result<GeneralizedCurve> {
    let path = curve(rng, graph)?;
    if dirac {
        return Ok(GeneralizedCurve::from_curve(path));
    }
    let d = graph.space().dim();
    let fibers = (0..graph.steps())
        .map(|k| {
            let target = path.velocity(k).to_vec();
            let atoms = rng.gen_range(2..=4);
            let w: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            let mut vs: Vec<Vec<f64>> = (0..atoms).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let mut mean = vec![0.0; d];
            for (v, wi) in vs.iter().zip(&w) {
                for (m, c) in mean.iter_mut().zip(v) {
                    *m += wi / total * c;
                }
            }
            for v in vs.iter_mut() {
                for ((c, m), t) in v.iter_mut().zip(&mean).zip(&target) {
                    *c += t - m;
                }
            }
            vs.into_iter().zip(w.into_iter().map(|x| x / total)).collect()
        })
        .collect();
    GeneralizedCurve::new(path, fibers)
}

/// A field pointing along a random out-edge at every `(k, i)`, with a random
/// initial density pushed forward along it.
pub fn ode(rng: &mut impl Rng, graph: &Arc<TimeExpandedGraph>, atoms: usize) -> Result<(VectorField, Vec<DiscreteMeasure>)> {
    let (n, nodes) = (graph.steps(), graph.node_count());
    let mut values = vec![vec![None; nodes]; n];
    let mut targets = vec![vec![0; nodes]; n];
    for k in 0..n {
        for i in 0..nodes {
            let out = graph.out_edges(i);
            let e = out[rng.gen_range(0..out.len())];
            values[k][i] = Some(graph.velocity(e).to_vec());
            targets[k][i] = graph.edge(e).1;
        }
    }
    let mut path = vec![measure(rng, graph.space(), atoms)?];
    for k in 0..n {
        let mut next = vec![0.0; nodes];
        for (i, w) in path[k].weights().iter().enumerate() {
            next[targets[k][i]] += w;
        }
        path.push(DiscreteMeasure::normalized(graph.space().clone(), next)?);
    }
    Ok((VectorField::new(graph.clone(), values)?, path))
}
