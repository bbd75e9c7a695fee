//! Seeded random instances, built as the same file structs that `--input`
//! would provide.

use rand::Rng;
use transport_measures::error::Result;
use transport_measures::instances::{self, InstanceRng};
use transport_measures::io::{
    Boundary, Cost, FlowFile, GraphFile, LagrangianSpec, MeasureFile, OdeFile, PairFile, ProblemFile, TableEntry,
};

pub fn pair(rng: &mut InstanceRng) -> Result<PairFile> {
    let space = instances::space(rng, 12, 2)?;
    let mu = instances::measure(rng, &space, 5)?;
    let nu = instances::measure(rng, &space, 5)?;
    Ok(PairFile { mu: MeasureFile::from_measure(&mu), nu: MeasureFile::from_measure(&nu) })
}

pub fn tonelli(rng: &mut InstanceRng) -> Result<ProblemFile> {
    let graph = instances::graph(rng, 6, 4, None)?;
    let (from, to) = (rng.gen_range(0..6), rng.gen_range(0..6));
    Ok(ProblemFile {
        lagrangian: LagrangianSpec::Quadratic { scale: 1.0 },
        graph: GraphFile::from_graph(&graph),
        boundary: Some(Boundary::Nodes { from, to }),
    })
}

pub fn dynot(rng: &mut InstanceRng) -> Result<ProblemFile> {
    let graph = instances::graph(rng, 6, 4, None)?;
    let mu = instances::measure(rng, graph.space(), 3)?;
    let nu = instances::measure(rng, graph.space(), 3)?;
    Ok(ProblemFile {
        lagrangian: LagrangianSpec::Quadratic { scale: 1.0 },
        graph: GraphFile::from_graph(&graph),
        boundary: Some(Boundary::Measures { initial: mu.weights().to_vec(), terminal: nu.weights().to_vec() }),
    })
}

/// 5 nodes, 3 steps, edge costs uniform in `[-1, 1)`.
pub fn certify(rng: &mut InstanceRng) -> Result<ProblemFile> {
    let graph = instances::graph(rng, 5, 3, None)?;
    let mut entries = Vec::new();
    for k in 0..graph.steps() {
        for &(i, j) in graph.edges() {
            entries.push(TableEntry { k, i, j, value: Cost::Number(rng.gen_range(-1.0..1.0)) });
        }
    }
    Ok(ProblemFile {
        lagrangian: LagrangianSpec::Table { entries, default: None },
        graph: GraphFile::from_graph(&graph),
        boundary: None,
    })
}

pub fn flow(rng: &mut InstanceRng) -> Result<FlowFile> {
    let graph = instances::graph(rng, 6, 5, None)?;
    Ok(FlowFile::from_measure(&instances::flow(rng, &graph, 4)?))
}

pub fn ode(rng: &mut InstanceRng) -> Result<OdeFile> {
    let graph = instances::graph(rng, 6, 4, Some(0.7))?;
    let (v, path) = instances::ode(rng, &graph, 4)?;
    let field = (0..graph.steps())
        .map(|k| (0..graph.node_count()).map(|i| v.get(k, i).map(<[f64]>::to_vec)).collect())
        .collect();
    Ok(OdeFile {
        graph: GraphFile::from_graph(&graph),
        field,
        path: path.iter().map(|mu| mu.weights().to_vec()).collect(),
    })
}

pub fn circulation(rng: &mut InstanceRng) -> Result<FlowFile> {
    let graph = instances::graph(rng, 5, 3, None)?;
    Ok(FlowFile::from_measure(instances::circulation(rng, &graph, 3, 3)?.measure()))
}
