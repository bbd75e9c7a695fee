//! JSON file formats.
//!
//! | file          | shape |
//! |---------------|-------|
//! | measure       | `{"points": [[x…]…], "weights": […], "torus": [p…]?}` |
//! | young measure | `{"grid": {"a", "b", "n"}, "slices": [measure…]}` |
//! | graph         | `{"points", "torus"?, "grid", "edges": "full" \| {"radius": r} \| [[i, j]…]}` |
//! | flow          | `{"graph", "mass": [{"k", "i", "j", "m"}…]}` |
//! | decomposition | `{"curves": [{"nodes": […], "weight": w}…]}` |
//! | cycles        | `{"cycles": [{"nodes": […], "weight": w, "period": T}…]}` |
//! | problem       | `{"lagrangian": {"kind": …}, "graph", "boundary"?}` |
//!
//! Costs that may be infinite are written as numbers or as the string
//! `"inf"`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::expr::Expr;
use crate::lagrangian::Lagrangian;
use crate::metric::{DiscreteMeasure, MetricSpace};
use crate::superposition::{CurveDecomposition, Cycle, SolenoidalDecomposition};
use crate::transport::{Curve, EdgeSet, TimeExpandedGraph, TransportMeasure, VectorField};
use crate::young::{self, TimeGrid, YoungMeasure};

/// Parses any of the file types in this module.
pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))
}

fn build_space(points: &[Vec<f64>], torus: &Option<Vec<f64>>) -> Result<MetricSpace> {
    match torus {
        Some(p) => MetricSpace::torus(points.to_vec(), p.clone()),
        None => MetricSpace::euclidean(points.to_vec()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus: Option<Vec<f64>>,
}

impl MeasureFile {
    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        let space = mu.space();
        Self {
            points: space.points().to_vec(),
            weights: mu.weights().to_vec(),
            torus: space.torus_periods().map(<[f64]>::to_vec),
        }
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(Arc::new(build_space(&self.points, &self.torus)?), self.weights.clone())
    }
}

/// Puts two measures on the union of their supports' point sets.
pub fn common_space(mu: &MeasureFile, nu: &MeasureFile) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    ensure!(mu.torus == nu.torus, Config, "measures live on different tori");
    ensure!(mu.points.len() == mu.weights.len(), Validation, "{} weights for {} points", mu.weights.len(), mu.points.len());
    ensure!(nu.points.len() == nu.weights.len(), Validation, "{} weights for {} points", nu.weights.len(), nu.points.len());
    let mut points = mu.points.clone();
    let mut index = Vec::with_capacity(nu.points.len());
    for p in &nu.points {
        match points.iter().position(|q| q == p) {
            Some(i) => index.push(i),
            None => {
                points.push(p.clone());
                index.push(points.len() - 1);
            }
        }
    }
    let space = Arc::new(build_space(&points, &mu.torus)?);
    let mut a = mu.weights.clone();
    a.resize(points.len(), 0.0);
    let mut b = vec![0.0; points.len()];
    for (w, &i) in nu.weights.iter().zip(&index) {
        b[i] += w;
    }
    Ok((DiscreteMeasure::new(space.clone(), a)?, DiscreteMeasure::new(space, b)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungFile {
    pub grid: TimeGrid,
    pub slices: Vec<MeasureFile>,
}

impl YoungFile {
    /// All slices must share one point set.
    pub fn to_young(&self) -> Result<YoungMeasure> {
        self.grid.validate()?;
        let first = self.slices.first().ok_or_else(|| Error::Validation("Young measure has no slices".into()))?;
        let space = Arc::new(build_space(&first.points, &first.torus)?);
        let slices = self
            .slices
            .iter()
            .map(|s| {
                ensure!(s.points == first.points && s.torus == first.torus, Config, "Young slices use different point sets");
                DiscreteMeasure::new(space.clone(), s.weights.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        young::product(self.grid, slices)
    }

    pub fn from_young(eta: &YoungMeasure) -> Self {
        Self { grid: *eta.grid(), slices: eta.slices().iter().map(MeasureFile::from_measure).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgesFile {
    Named(String),
    Radius { radius: f64 },
    List(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus: Option<Vec<f64>>,
    pub grid: TimeGrid,
    pub edges: EdgesFile,
}

impl GraphFile {
    pub fn build(&self) -> Result<Arc<TimeExpandedGraph>> {
        let space = Arc::new(build_space(&self.points, &self.torus)?);
        let edges = match &self.edges {
            EdgesFile::Named(name) if name == "full" => EdgeSet::Full,
            EdgesFile::Named(name) => return Err(Error::Parse(format!("unknown edge set {name:?}"))),
            EdgesFile::Radius { radius } => EdgeSet::Radius(*radius),
            EdgesFile::List(pairs) => EdgeSet::List(pairs.iter().map(|&[i, j]| (i, j)).collect()),
        };
        self.grid.validate()?;
        Ok(Arc::new(TimeExpandedGraph::new(space, self.grid, edges)?))
    }

    pub fn from_graph(graph: &TimeExpandedGraph) -> Self {
        let space = graph.space();
        let edges = match graph.edge_set() {
            EdgeSet::Full => EdgesFile::Named("full".into()),
            EdgeSet::Radius(r) => EdgesFile::Radius { radius: *r },
            EdgeSet::List(pairs) => EdgesFile::List(pairs.iter().map(|&(i, j)| [i, j]).collect()),
        };
        Self {
            points: space.points().to_vec(),
            torus: space.torus_periods().map(<[f64]>::to_vec),
            grid: *graph.grid(),
            edges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEntry {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowFile {
    pub graph: GraphFile,
    pub mass: Vec<MassEntry>,
}

impl FlowFile {
    pub fn from_measure(eta: &TransportMeasure) -> Self {
        Self {
            graph: GraphFile::from_graph(eta.graph()),
            mass: eta.triplets().into_iter().map(|(k, i, j, m)| MassEntry { k, i, j, m }).collect(),
        }
    }

    pub fn to_measure(&self) -> Result<TransportMeasure> {
        let graph = self.graph.build()?;
        let t: Vec<_> = self.mass.iter().map(|e| (e.k, e.i, e.j, e.m)).collect();
        TransportMeasure::from_triplets(graph, &t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub nodes: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub curves: Vec<CurveEntry>,
}

impl DecompositionFile {
    pub fn from_decomposition(d: &CurveDecomposition) -> Self {
        Self {
            curves: d.items().iter().map(|(c, w)| CurveEntry { nodes: c.nodes().to_vec(), weight: *w }).collect(),
        }
    }

    pub fn to_decomposition(&self, graph: &Arc<TimeExpandedGraph>) -> Result<CurveDecomposition> {
        let items = self
            .curves
            .iter()
            .map(|c| Ok((Curve::new(graph.clone(), c.nodes.clone())?, c.weight)))
            .collect::<Result<Vec<_>>>()?;
        CurveDecomposition::new(graph.clone(), items)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleEntry {
    pub nodes: Vec<usize>,
    pub weight: f64,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclesFile {
    pub cycles: Vec<CycleEntry>,
}

impl CyclesFile {
    pub fn from_decomposition(d: &SolenoidalDecomposition) -> Self {
        Self {
            cycles: d
                .cycles()
                .iter()
                .map(|c| CycleEntry { nodes: c.nodes.clone(), weight: c.weight, period: c.period })
                .collect(),
        }
    }

    pub fn to_decomposition(&self, graph: &Arc<TimeExpandedGraph>) -> Result<SolenoidalDecomposition> {
        let cycles =
            self.cycles.iter().map(|c| Cycle { nodes: c.nodes.clone(), period: c.period, weight: c.weight }).collect();
        SolenoidalDecomposition::new(graph.clone(), cycles)
    }
}

/// A real number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cost {
    Number(f64),
    Word(String),
}

impl Cost {
    pub fn value(&self) -> Result<f64> {
        match self {
            Cost::Number(v) => Ok(*v),
            Cost::Word(w) if matches!(w.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Cost::Word(w) => Err(Error::Parse(format!("cost {w:?} is neither a number nor \"inf\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub value: Cost,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LagrangianSpec {
    /// `scale · ‖v‖²/2`.
    Quadratic {
        #[serde(default = "one")]
        scale: f64,
    },
    Constant { value: Cost },
    Table {
        entries: Vec<TableEntry>,
        #[serde(default)]
        default: Option<Cost>,
    },
    Expr {
        expr: String,
        #[serde(default)]
        convex: bool,
        #[serde(default)]
        superlinear: Option<f64>,
    },
}

impl LagrangianSpec {
    /// `dim` is the dimension of the space the Lagrangian will be evaluated on.
    pub fn build(&self, dim: usize) -> Result<Lagrangian> {
        Ok(match self {
            LagrangianSpec::Quadratic { scale } => Lagrangian::quadratic(*scale),
            LagrangianSpec::Constant { value } => Lagrangian::constant(value.value()?),
            LagrangianSpec::Table { entries, default } => {
                let mut map = HashMap::new();
                for e in entries {
                    map.insert((e.k, e.i, e.j), e.value.value()?);
                }
                let default = default.as_ref().map(Cost::value).transpose()?.unwrap_or(f64::INFINITY);
                Lagrangian::table(map, default)
            }
            LagrangianSpec::Expr { expr, convex, superlinear } => {
                let e = Expr::parse(expr)?;
                ensure!(e.dimension_needed() <= dim, Config, "expression {expr:?} uses coordinates beyond dimension {dim}");
                let mut l = Lagrangian::from_fn(move |t, x, v| e.eval_unchecked(t, x, v)).convex(*convex).labelled(expr.clone());
                if let Some(c) = superlinear {
                    l = l.superlinear(*c);
                }
                l
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Boundary {
    /// Endpoints of a curve.
    Nodes { from: usize, to: usize },
    /// Initial and final weights on the graph's points.
    Measures {
        initial: Vec<f64>,
        #[serde(rename = "final")]
        terminal: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub lagrangian: LagrangianSpec,
    pub graph: GraphFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

/// Vector field and density path for [`decompose_ode`](crate::superposition::decompose_ode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeFile {
    pub graph: GraphFile,
    /// `field[k][i]`: velocity at `(t_k, x_i)` or `null`.
    pub field: Vec<Vec<Option<Vec<f64>>>>,
    /// `path[k]`: weights of `μ_{t_k}`, `k = 0..=n`.
    pub path: Vec<Vec<f64>>,
}

impl OdeFile {
    pub fn build(&self) -> Result<(VectorField, Vec<DiscreteMeasure>)> {
        let graph = self.graph.build()?;
        let path = self
            .path
            .iter()
            .map(|w| DiscreteMeasure::new(graph.space().clone(), w.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok((VectorField::new(graph, self.field.clone())?, path))
    }
}

/// Two measures for a distance computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub mu: MeasureFile,
    pub nu: MeasureFile,
}
