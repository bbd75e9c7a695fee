//! Experiment driver behind the `tm` binary.
//!
//! [`run`] reads a problem file (or draws one from the seed), calls the
//! matching solver and writes `report.json` plus the structured outputs into
//! the output directory. Every command also writes the instance it solved as
//! `instance.json`, so a seeded run can be replayed with `--input`.

pub mod generate;
pub mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use transport_measures::error::Error;
use transport_measures::io::{
    self, common_space, Boundary, CyclesFile, DecompositionFile, FlowFile, OdeFile, PairFile, ProblemFile,
};
use transport_measures::metric::{kr_distance, kr_dual, DiscreteMeasure};
use transport_measures::solvers::{certify_duality, dyn_ot, empirical_order, refinement_study, tonelli_dp};
use transport_measures::superposition::{
    cycle_decompose, decompose_ode, holonomic_approximate, superpose, ClosedMeasure, CurveDecomposition,
};
use transport_measures::transport::{marginal_path, Curve, TransportMeasure};

use report::{cell, number};

/// Endpoint used by the `--refine` sweep: a straight move from 0 to this
/// point on `[0, 1]`.
pub const REFINE_TARGET: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Kantorovich–Rubinstein distance and dual potential of two measures.
    Kr,
    /// Minimal-action curve between two nodes.
    Tonelli,
    /// Minimal-action flow between two measures.
    Dynot,
    /// Path DP versus flow LP on a free-endpoint problem.
    Certify,
    /// Split a flow into weighted curves.
    Superpose,
    /// Trajectories of a discrete ODE carrying a density path.
    Ode,
    /// Split a closed flow into periodic cycles.
    Cycles,
    /// Approximate a closed flow by one periodic curve, for each `q`.
    Holonomic,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("unit variant");
        f.write_str(name.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Problem file; a seeded random instance is used when absent.
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Threshold behind the pass/fail flags in the report.
    pub tol: f64,
    /// Denominator caps for `holonomic`.
    pub q: Vec<usize>,
    /// Step counts for the `tonelli` refinement sweep.
    pub refine: Vec<usize>,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(command: Command, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            command,
            input: None,
            output_dir: output_dir.into(),
            seed: 0,
            tol: 1e-8,
            q: vec![2, 4, 8, 16],
            refine: Vec::new(),
            threads: None,
        }
    }

    /// The part of the configuration that determines the results. Paths and
    /// thread counts are left out so that moving files around keeps the hash.
    fn fingerprint(&self, instance: &Value) -> Value {
        json!({
            "command": self.command,
            "instance": instance,
            "q": self.q,
            "refine": self.refine,
            "seed": self.seed,
            "tol": self.tol,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for unreadable input, 3 for infeasible problems, 4 for inputs that
    /// parse but violate an invariant, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Usage(_) | CliError::Core(Error::Parse(_)) => 2,
            CliError::Core(Error::Infeasible(_)) => 3,
            CliError::Core(
                Error::Config(_)
                | Error::Validation(_)
                | Error::Evaluation(_)
                | Error::Contract(_)
                | Error::NonRepresentable(_),
            ) => 4,
            CliError::Core(Error::Internal(_)) | CliError::Write { .. } => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(Error::Parse(_)) | CliError::Read { .. } => "parse",
            CliError::Usage(_) => "usage",
            CliError::Core(Error::Config(_)) => "config",
            CliError::Core(Error::Validation(_)) => "validation",
            CliError::Core(Error::Evaluation(_)) => "evaluation",
            CliError::Core(Error::Contract(_)) => "contract",
            CliError::Core(Error::Infeasible(_)) => "infeasible",
            CliError::Core(Error::NonRepresentable(_)) => "non_representable",
            CliError::Core(Error::Internal(_)) => "internal",
            CliError::Write { .. } => "io",
        }
    }

    /// Machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        let mut error = json!({
            "exit_code": self.exit_code(),
            "kind": self.kind(),
            "message": self.to_string(),
        });
        if let CliError::Core(Error::NonRepresentable(cert)) = self {
            error["off_grid"] = json!(cert.off_grid);
            error["unbalanced"] = json!(cert.unbalanced);
        }
        serde_json::to_string(&json!({ "error": error })).expect("JSON values always serialize")
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// What a command produced before it is written out.
#[derive(Default)]
struct Artifacts {
    results: BTreeMap<String, Value>,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    fn set(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(value).expect("results serialize"));
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.insert(name.into(), contents);
    }
}

/// Paths written by a successful [`run`] and the report that was saved.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report_path: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: Value,
}

/// Runs one experiment and writes its artifacts.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<Outcome> {
    let (instance, out) = match config.command {
        Command::Kr => solve(config, generate::pair, kr)?,
        Command::Tonelli => solve(config, generate::tonelli, tonelli)?,
        Command::Dynot => solve(config, generate::dynot, dynot)?,
        Command::Certify => solve(config, generate::certify, certify)?,
        Command::Superpose => solve(config, generate::flow, superpose_flow)?,
        Command::Ode => solve(config, generate::ode, ode)?,
        Command::Cycles => solve(config, generate::circulation, cycles)?,
        Command::Holonomic => solve(config, generate::circulation, holonomic)?,
    };
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.clone(), source })?;

    let mut files = Vec::new();
    let mut names: Vec<&str> = vec!["instance.json"];
    // full precision, so that `--input instance.json` reproduces the run
    let text = serde_json::to_string_pretty(&instance).map_err(|e| Error::Internal(e.to_string()))? + "\n";
    report::write_atomic(dir, "instance.json", &text)?;
    files.push(dir.join("instance.json"));
    for (name, contents) in &out.files {
        report::write_atomic(dir, name, contents)?;
        files.push(dir.join(name));
        names.push(name);
    }
    names.sort_unstable();

    let report = json!({
        "command": config.command,
        "outputs": names,
        "provenance": {
            "config_hash": report::hash(&config.fingerprint(&instance)),
            "input": if config.input.is_some() { "file" } else { "seed" },
            "seed": config.seed,
            "versions": {
                "tm-cli": env!("CARGO_PKG_VERSION"),
                "transport-measures": transport_measures::VERSION,
            },
        },
        "results": out.results,
    });
    let report = report::canonical(report);
    report::write_atomic(dir, "report.json", &report::render(report.clone()))?;
    Ok(Outcome { report_path: dir.join("report.json"), files, report })
}

/// Loads or generates the instance, then hands it to `body`.
fn solve<T, G, B>(config: &ExperimentConfig, generate: G, body: B) -> Result<(Value, Artifacts)>
where
    T: Serialize + DeserializeOwned,
    G: FnOnce(&mut transport_measures::instances::InstanceRng) -> transport_measures::error::Result<T>,
    B: FnOnce(&T, &ExperimentConfig) -> Result<Artifacts>,
{
    let instance: T = match &config.input {
        Some(path) => io::from_json(&read(path)?)?,
        None => generate(&mut transport_measures::instances::rng(config.seed))?,
    };
    let value = serde_json::to_value(&instance).map_err(|e| Error::Internal(e.to_string()))?;
    Ok((value, body(&instance, config)?))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn flow_json(eta: &TransportMeasure) -> Result<String> {
    Ok(io::to_json(&FlowFile::from_measure(eta))? + "\n")
}

fn decomposition_json(d: &CurveDecomposition) -> Result<String> {
    Ok(io::to_json(&DecompositionFile::from_decomposition(d))? + "\n")
}

fn curve_csv(curve: &Curve) -> String {
    curve.to_csv()
}

/// Largest KR distance between the decomposition's marginals and `path`.
fn marginal_gap(d: &CurveDecomposition, path: &[DiscreteMeasure]) -> Result<f64> {
    let gaps = (0..path.len())
        .into_par_iter()
        .map(|k| Ok(kr_distance(&d.marginal(k)?, &path[k])?.0))
        .collect::<transport_measures::error::Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

fn problem_parts(
    p: &ProblemFile,
) -> Result<(std::sync::Arc<transport_measures::transport::TimeExpandedGraph>, transport_measures::lagrangian::Lagrangian)>
{
    let graph = p.graph.build()?;
    let l = p.lagrangian.build(graph.space().dim())?;
    Ok((graph, l))
}

fn kr(pair: &PairFile, config: &ExperimentConfig) -> Result<Artifacts> {
    let (mu, nu) = common_space(&pair.mu, &pair.nu)?;
    let (primal, plan) = kr_distance(&mu, &nu)?;
    let (dual, potential) = kr_dual(&mu, &nu)?;
    let mut out = Artifacts::default();
    out.set("distance", primal);
    out.set("dual", dual);
    out.set("duality_gap", (primal - dual).abs());
    out.set("certified", (primal - dual).abs() <= config.tol);
    out.set("points", mu.space().len());

    let mut csv = String::from("i,j,mass\n");
    for (i, row) in plan.matrix().iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m > 0.0 {
                csv.push_str(&format!("{i},{j},{}\n", cell(m)));
            }
        }
    }
    out.file("coupling.csv", csv);
    let mut csv = String::from("i,potential\n");
    for (i, f) in potential.values().iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", cell(*f)));
    }
    out.file("potential.csv", csv);
    Ok(out)
}

fn tonelli(p: &ProblemFile, config: &ExperimentConfig) -> Result<Artifacts> {
    let (graph, l) = problem_parts(p)?;
    let Some(Boundary::Nodes { from, to }) = p.boundary else {
        return Err(Error::Config("tonelli needs a boundary of the form {\"from\": i, \"to\": j}".into()).into());
    };
    let sol = tonelli_dp(&l, from, to, &graph)?;
    let mut out = Artifacts::default();
    out.set("action", sol.action);
    out.set("nodes", sol.curve.nodes());
    out.set("recursion_defect", sol.value.recursion_defect(&graph, &l)?);
    out.file("curve.csv", curve_csv(&sol.curve));

    if !config.refine.is_empty() {
        let rows = refinement_study(REFINE_TARGET, &config.refine)?;
        let mut csv = String::from("n,h,action,exact,error\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{},{}\n", r.n, cell(r.h), cell(r.action), cell(r.exact), cell(r.error)));
        }
        out.file("refinement.csv", csv);
        let monotone = rows.windows(2).all(|w| w[1].error <= w[0].error);
        out.set(
            "refinement",
            json!({
                "monotone": monotone,
                "order": number(empirical_order(&rows)),
                "rows": rows.iter().map(|r| json!({"n": r.n, "action": r.action, "exact": r.exact, "error": r.error})).collect::<Vec<_>>(),
                "target": REFINE_TARGET,
            }),
        );
    }
    Ok(out)
}

fn dynot(p: &ProblemFile, _: &ExperimentConfig) -> Result<Artifacts> {
    let (graph, l) = problem_parts(p)?;
    let Some(Boundary::Measures { initial, terminal }) = &p.boundary else {
        return Err(Error::Config("dynot needs a boundary of the form {\"initial\": [...], \"final\": [...]}".into()).into());
    };
    let mu = DiscreteMeasure::new(graph.space().clone(), initial.clone())?;
    let nu = DiscreteMeasure::new(graph.space().clone(), terminal.clone())?;
    let sol = dyn_ot(&l, &mu, &nu, &graph)?;
    let path = marginal_path(&sol.eta)?;
    let mut out = Artifacts::default();
    out.set("action", sol.action);
    out.set("initial_error", kr_distance(&path[0], &mu)?.0);
    out.set("final_error", kr_distance(&path[graph.steps()], &nu)?.0);
    out.set("support", sol.eta.support_size());
    out.file("flow.json", flow_json(&sol.eta)?);
    let mut csv = String::from("k,i,weight\n");
    for (k, m) in path.iter().enumerate() {
        for i in m.support() {
            csv.push_str(&format!("{k},{i},{}\n", cell(m.weight(i))));
        }
    }
    out.file("marginals.csv", csv);
    Ok(out)
}

fn certify(p: &ProblemFile, config: &ExperimentConfig) -> Result<Artifacts> {
    let (graph, l) = problem_parts(p)?;
    let cert = certify_duality(&l, &graph)?;
    let mut out = Artifacts::default();
    out.set("dp_min", cert.dp_min);
    out.set("lp_min", cert.lp_min);
    out.set("gap", cert.gap());
    out.set("certified", cert.gap() <= config.tol);
    out.set("nodes", cert.curve.nodes());
    out.file("curve.csv", curve_csv(&cert.curve));
    out.file("flow.json", flow_json(&cert.eta)?);
    Ok(out)
}

fn superpose_flow(flow: &FlowFile, config: &ExperimentConfig) -> Result<Artifacts> {
    let eta = flow.to_measure()?;
    let d = superpose(&eta)?;
    let residual = d.residual(&eta)?;
    let gap = marginal_gap(&d, &marginal_path(&eta)?)?;
    let mut out = Artifacts::default();
    out.set("curves", d.len());
    out.set("support", eta.support_size());
    out.set("total_weight", d.total_weight());
    out.set("residual", residual);
    out.set("marginal_kr", gap);
    out.set("certified", residual <= config.tol && gap <= config.tol);
    out.file("decomposition.json", decomposition_json(&d)?);
    Ok(out)
}

fn ode(file: &OdeFile, config: &ExperimentConfig) -> Result<Artifacts> {
    let (v, path) = file.build()?;
    let d = decompose_ode(&v, &path)?;
    let gap = marginal_gap(&d, &path)?;
    let mut out = Artifacts::default();
    out.set("curves", d.len());
    out.set("total_weight", d.total_weight());
    out.set("marginal_kr", gap);
    out.set("certified", gap <= config.tol);
    out.file("decomposition.json", decomposition_json(&d)?);
    Ok(out)
}

fn cycles(flow: &FlowFile, config: &ExperimentConfig) -> Result<Artifacts> {
    let eta = ClosedMeasure::new(flow.to_measure()?)?;
    let d = cycle_decompose(&eta)?;
    let rebuilt = d.reconstruct()?;
    let residual = rebuilt.max_difference(eta.measure());
    let shift = d.shifted().reconstruct()?.max_difference(&rebuilt);
    let mut out = Artifacts::default();
    out.set("cycles", d.cycles().len());
    out.set("periods", d.cycles().iter().map(|c| c.period).collect::<Vec<_>>());
    out.set("total_weight", d.total_weight());
    out.set("residual", residual);
    out.set("shift_residual", shift);
    out.set("certified", residual <= config.tol && shift == 0.0);
    out.file("cycles.json", io::to_json(&CyclesFile::from_decomposition(&d))? + "\n");
    Ok(out)
}

fn holonomic(flow: &FlowFile, config: &ExperimentConfig) -> Result<Artifacts> {
    if config.q.is_empty() || config.q.contains(&0) {
        return Err(CliError::Usage("--q needs positive integers".into()));
    }
    let eta = ClosedMeasure::new(flow.to_measure()?)?;
    let rows = config
        .q
        .par_iter()
        .map(|&q| holonomic_approximate(&eta, q))
        .collect::<transport_measures::error::Result<Vec<_>>>()?;
    let mut csv = String::from("q,denominator,period,bridge_steps,kr_error,bound\n");
    for (q, h) in config.q.iter().zip(&rows) {
        csv.push_str(&format!(
            "{q},{},{},{},{},{}\n",
            h.denominator,
            h.period,
            h.bridge_steps,
            cell(h.kr_error),
            cell(h.bound)
        ));
    }
    let monotone = rows.windows(2).zip(config.q.windows(2)).all(|(h, q)| q[1] < q[0] || h[1].kr_error <= h[0].kr_error);
    let last = rows.last().expect("q is not empty");
    let mut out = Artifacts::default();
    out.set("kr_metric", "|dk|/n + d(x, y) + |v - w|");
    out.set("monotone", monotone);
    out.set(
        "rows",
        config
            .q
            .iter()
            .zip(&rows)
            .map(|(q, h)| {
                json!({
                    "bound": h.bound,
                    "counts": h.counts,
                    "denominator": h.denominator,
                    "kr_error": h.kr_error,
                    "period": h.period,
                    "q": q,
                })
            })
            .collect::<Vec<_>>(),
    );
    out.file("holonomic.csv", csv);
    out.file(
        "periodic_curve.json",
        io::to_json(&json!({"nodes": last.curve.nodes(), "period": last.period}))? + "\n",
    );
    Ok(out)
}
