//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::Instant;

use rand::Rng;
use tm_cli::{run, Command, ExperimentConfig};
use transport_measures::instances;
use transport_measures::lagrangian::Lagrangian;
use transport_measures::metric::{kr_distance, kr_dual, DiscreteMeasure};
use transport_measures::solvers::{certify_duality, dyn_ot, empirical_order, refinement_study, tonelli_dp};
use transport_measures::superposition::{cycle_decompose, decompose_ode, holonomic_approximate, superpose};
use transport_measures::transport::{
    continuity_residual_between, jensen_reduce, marginal_path, TestFunction, TimeExpandedGraph, TransportMeasure,
};

type Check = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn edge_cost_oracle<'a>(g: &'a TimeExpandedGraph, l: &'a Lagrangian) -> impl Fn(usize, usize, usize) -> f64 + 'a {
    move |k, i, j| match g.edge_id(i, j) {
        Some(e) => g.edge_cost(l, k, e).unwrap() / g.steps() as f64,
        None => f64::INFINITY,
    }
}

fn kr_duality() -> Check {
    let mut worst_gap: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = instances::rng(seed);
        let dim = rng.gen_range(1..=3);
        let space = instances::space(&mut rng, 20, dim).map_err(|e| e.to_string())?;
        let atoms = rng.gen_range(1..=20);
        let mu = instances::measure(&mut rng, &space, atoms).unwrap();
        let nu = instances::measure(&mut rng, &space, atoms).unwrap();
        let (p, _) = kr_distance(&mu, &nu).unwrap();
        let (d, _) = kr_dual(&mu, &nu).unwrap();
        worst_gap = worst_gap.max((p - d).abs());
        check!((p - d).abs() <= 1e-9, "seed {seed}: primal {p} dual {d}");

        let small = instances::space(&mut rng, 5, dim).unwrap();
        let atoms = rng.gen_range(1..=5);
        let mu = instances::measure(&mut rng, &small, atoms).unwrap();
        let nu = instances::measure(&mut rng, &small, atoms).unwrap();
        let (p, _) = kr_distance(&mu, &nu).unwrap();
        let oracle = oracles::transportation_brute_force(small.distances(), mu.weights(), nu.weights());
        worst_oracle = worst_oracle.max((p - oracle).abs());
        check!((p - oracle).abs() <= 1e-10, "seed {seed}: primal {p} oracle {oracle}");
    }
    Ok(format!("max |primal-dual| {worst_gap:.1e}, max |primal-oracle| {worst_oracle:.1e}"))
}

fn kr_metric_axioms() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = instances::rng(10_000 + seed);
        let points = rng.gen_range(2..=15);
        let space = instances::space(&mut rng, points, 2).unwrap();
        let m: Vec<DiscreteMeasure> = (0..3)
            .map(|_| {
                let atoms = rng.gen_range(1..=points);
                instances::measure(&mut rng, &space, atoms).unwrap()
            })
            .collect();
        let d = |a: usize, b: usize| kr_distance(&m[a], &m[b]).unwrap().0;
        let asym = (d(0, 1) - d(1, 0)).abs();
        let excess = d(0, 2) - d(0, 1) - d(1, 2);
        worst = worst.max(asym).max(excess);
        check!(asym <= 1e-8, "seed {seed}: asymmetry {asym}");
        check!(excess <= 1e-8, "seed {seed}: triangle excess {excess}");
    }
    Ok(format!("worst violation {worst:.1e}"))
}

fn continuity_identity() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = instances::rng(20_000 + seed);
        let g = instances::graph(&mut rng, 6, 5, Some(0.7)).unwrap();
        let eta = instances::flow(&mut rng, &g, 4).unwrap();
        let path = marginal_path(&eta).unwrap();
        for _ in 0..50 {
            let values =
                (0..=g.steps()).map(|_| (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let f = TestFunction::new(&g, values).unwrap();
            let r = continuity_residual_between(&eta, &f, &path[0], &path[g.steps()]).unwrap().abs();
            worst = worst.max(r);
            check!(r <= 1e-12, "seed {seed}: residual {r}");
        }
    }
    let mut perturbations = 0;
    for seed in 0..3 {
        let mut rng = instances::rng(21_000 + seed);
        let g = instances::graph(&mut rng, 5, 4, None).unwrap();
        let eta = instances::flow(&mut rng, &g, 3).unwrap();
        let path = marginal_path(&eta).unwrap();
        let basis: Vec<TestFunction> = (0..=g.steps())
            .flat_map(|t| (0..g.node_count()).map(move |i| (t, i)))
            .map(|(t, i)| TestFunction::indicator(&g, t, i).unwrap())
            .collect();
        for k in 0..g.steps() {
            for e in 0..g.edge_count() {
                for sign in [1.0, -1.0] {
                    let mut mass = eta.masses().to_vec();
                    if mass[k][e] + sign * 1e-6 < 0.0 {
                        continue;
                    }
                    mass[k][e] += sign * 1e-6;
                    let bad = TransportMeasure::unchecked(g.clone(), mass).unwrap();
                    let detected = basis
                        .iter()
                        .map(|f| continuity_residual_between(&bad, f, &path[0], &path[g.steps()]).unwrap().abs())
                        .fold(0.0, f64::max);
                    check!(detected >= 1e-7, "seed {seed}: step {k} edge {e} sign {sign}: {detected}");
                    perturbations += 1;
                }
            }
        }
    }
    Ok(format!("max residual {worst:.1e}, {perturbations} perturbations detected"))
}

fn young_superposition() -> Check {
    let (mut gap, mut recon, mut marg): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..100 {
        let mut rng = instances::rng(30_000 + seed);
        let nodes = rng.gen_range(2..=8);
        let steps = rng.gen_range(1..=6);
        let radius = if rng.gen_bool(0.5) { None } else { Some(0.7) };
        let g = instances::graph(&mut rng, nodes, steps, radius).unwrap();
        let l = instances::table_lagrangian(&mut rng, &g, -1.0..1.0);
        let cert = certify_duality(&l, &g).map_err(|e| format!("seed {seed}: {e}"))?;
        gap = gap.max(cert.gap());
        check!(cert.gap() <= 1e-8, "seed {seed}: dp {} lp {}", cert.dp_min, cert.lp_min);

        let curves = rng.gen_range(1..=6);
        let eta = instances::flow(&mut rng, &g, curves).unwrap();
        for flow in [&eta, &cert.eta] {
            let d = superpose(flow).map_err(|e| format!("seed {seed}: {e}"))?;
            let r = d.residual(flow).unwrap();
            recon = recon.max(r);
            check!(r <= 1e-10, "seed {seed}: reconstruction residual {r}");
            for (k, mu) in marginal_path(flow).unwrap().iter().enumerate() {
                let m = kr_distance(&d.marginal(k).unwrap(), mu).unwrap().0;
                marg = marg.max(m);
                check!(m <= 1e-9, "seed {seed} step {k}: marginal distance {m}");
            }
        }
    }
    Ok(format!("max gap {gap:.1e}, max residual {recon:.1e}, max marginal distance {marg:.1e}"))
}

fn tonelli() -> Check {
    let mut solved = 0;
    for seed in 0..80 {
        let mut rng = instances::rng(40_000 + seed);
        let nodes = rng.gen_range(2..=6);
        let steps = rng.gen_range(1..=5);
        let radius = if rng.gen_bool(0.5) { None } else { Some(0.6) };
        let g = instances::graph(&mut rng, nodes, steps, radius).unwrap();
        let l = if seed % 2 == 0 {
            let mut entries = std::collections::HashMap::new();
            for k in 0..steps {
                for &(i, j) in g.edges() {
                    entries.insert((k, i, j), rng.gen_range(0..3) as f64);
                }
            }
            Lagrangian::table(entries, f64::INFINITY)
        } else {
            instances::convex_lagrangian(&mut rng, 2)
        };
        let (from, to) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
        let cost = edge_cost_oracle(&g, &l);
        let allowed = |i, j| g.edge_id(i, j).is_some();
        let exact = oracles::brute_force_min_path(nodes, steps, &allowed, &cost, Some(from), Some(to), 0.0);
        match (tonelli_dp(&l, from, to, &g), exact) {
            (Ok(sol), Some((value, _))) => {
                let tol = 1e-12 * (1.0 + value.abs());
                check!((sol.action - value).abs() <= tol, "seed {seed}: {} vs {value}", sol.action);
                let (_, first) =
                    oracles::brute_force_min_path(nodes, steps, &allowed, &cost, Some(from), Some(to), tol).unwrap();
                check!(sol.curve.nodes() == &first[..], "seed {seed}: {:?} vs {first:?}", sol.curve.nodes());
                solved += 1;
            }
            (Err(_), None) => {}
            (got, want) => return Err(format!("seed {seed}: solver {got:?} vs oracle {want:?}")),
        }
    }
    let rows = refinement_study(1.0 / 3.0, &[4, 8, 16, 32]).map_err(|e| e.to_string())?;
    check!(rows.windows(2).all(|w| w[1].error < w[0].error), "refinement errors not monotone: {rows:?}");
    let order = empirical_order(&rows);
    check!(order >= 0.8, "empirical order {order}");
    Ok(format!("{solved} instances matched, refinement order {order:.2}"))
}

fn jensen() -> Check {
    let (mut min_gap, mut max_dirac): (f64, f64) = (f64::INFINITY, 0.0);
    for seed in 0..100 {
        let mut rng = instances::rng(50_000 + seed);
        let g = instances::graph(&mut rng, 4, 3, None).unwrap();
        let l = instances::convex_lagrangian(&mut rng, 2);
        let spread = instances::generalized_curve(&mut rng, &g, false).unwrap();
        let (c, gen) = jensen_reduce(&spread, &l).unwrap();
        check!(gen >= c - 1e-10, "seed {seed}: generalized {gen} below curve {c}");
        check!(gen - c > 1e-10, "seed {seed}: spread fibers give equality");
        min_gap = min_gap.min(gen - c);
        let dirac = instances::generalized_curve(&mut rng, &g, true).unwrap();
        let (c, gen) = jensen_reduce(&dirac, &l).unwrap();
        max_dirac = max_dirac.max((gen - c).abs());
        check!((gen - c).abs() <= 1e-10, "seed {seed}: dirac fibers gap {}", gen - c);
    }
    Ok(format!("min spread gap {min_gap:.2e}, max dirac gap {max_dirac:.1e}"))
}

fn ode_superposition() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = instances::rng(60_000 + seed);
        let g = instances::graph(&mut rng, 6, 4, Some(0.7)).unwrap();
        let (v, path) = instances::ode(&mut rng, &g, 4).unwrap();
        let d = decompose_ode(&v, &path).map_err(|e| format!("seed {seed}: {e}"))?;
        for (c, _) in d.items() {
            for k in 0..g.steps() {
                check!(Some(c.edge(k)) == v.target_edge(k, c.nodes()[k]), "seed {seed}: curve leaves the field");
            }
        }
        let rebuilt = d.reconstruct().unwrap();
        for k in 0..g.steps() {
            for i in 0..g.node_count() {
                let e = v.target_edge(k, i).unwrap();
                let lift = path[k].weight(i) / g.steps() as f64;
                let diff = (rebuilt.mass(k, e) - lift).abs();
                worst = worst.max(diff);
                check!(diff <= 1e-10, "seed {seed}: lift mismatch {diff} at ({k}, {i})");
            }
        }
    }
    Ok(format!("max lift mismatch {worst:.1e}"))
}

fn solenoidal() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..50 {
        let mut rng = instances::rng(70_000 + seed);
        let g = instances::graph(&mut rng, 5, 3, None).unwrap();
        let cycles = rng.gen_range(1..=5);
        let eta = instances::circulation(&mut rng, &g, cycles, 3).unwrap();
        let d = cycle_decompose(&eta).map_err(|e| format!("seed {seed}: {e}"))?;
        let r = d.reconstruct().unwrap();
        let diff = r.max_difference(eta.measure());
        worst = worst.max(diff);
        check!(diff <= 1e-10, "seed {seed}: reconstruction {diff}");
        for c in d.cycles() {
            check!(c.nodes.len() == c.period * g.steps(), "seed {seed}: cycle length {} period {}", c.nodes.len(), c.period);
        }
        let shifted = d.shifted().reconstruct().unwrap();
        check!(shifted.masses() == r.masses(), "seed {seed}: shift changes the reconstruction");
        count += d.cycles().len();
    }
    Ok(format!("{count} cycles, max reconstruction {worst:.1e}"))
}

fn holonomic() -> Check {
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let mut rng = instances::rng(80_000 + seed);
        let g = instances::graph(&mut rng, 5, 3, None).unwrap();
        let eta = instances::circulation(&mut rng, &g, 3, 3).unwrap();
        let errors: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&q| holonomic_approximate(&eta, q).map(|h| h.kr_error))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("seed {seed}: {e}"))?;
        check!(errors.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: errors {errors:?}");
        check!(errors[3] <= errors[0] / 4.0, "seed {seed}: errors {errors:?}");
        ratios.push(if errors[3] == 0.0 { f64::INFINITY } else { errors[0] / errors[3] });
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("min kr_error(2)/kr_error(16) = {min:.2}"))
}

fn dirac_boundaries() -> Check {
    let mut worst: f64 = 0.0;
    let mut feasible = 0;
    for seed in 0..50 {
        let mut rng = instances::rng(90_000 + seed);
        let g = instances::graph(&mut rng, 6, 4, if seed % 2 == 0 { None } else { Some(0.7) }).unwrap();
        let l = instances::convex_lagrangian(&mut rng, 2);
        let (x, y) = (rng.gen_range(0..6), rng.gen_range(0..6));
        let dx = DiscreteMeasure::dirac(g.space().clone(), x).unwrap();
        let dy = DiscreteMeasure::dirac(g.space().clone(), y).unwrap();
        match (dyn_ot(&l, &dx, &dy, &g), tonelli_dp(&l, x, y, &g)) {
            (Ok(a), Ok(b)) => {
                worst = worst.max((a.action - b.action).abs());
                check!((a.action - b.action).abs() <= 1e-9, "seed {seed}: {} vs {}", a.action, b.action);
                feasible += 1;
            }
            (Err(_), Err(_)) => {}
            (a, b) => return Err(format!("seed {seed}: {a:?} vs {b:?}")),
        }
    }
    Ok(format!("{feasible} feasible pairs, max difference {worst:.1e}"))
}

fn cli_reproducibility() -> Check {
    let commands =
        [Command::Kr, Command::Tonelli, Command::Dynot, Command::Certify, Command::Superpose, Command::Ode, Command::Cycles, Command::Holonomic];
    for command in commands {
        let mut reports = Vec::new();
        for threads in [1, 4] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut config = ExperimentConfig::new(command, dir.path());
            config.seed = 17;
            config.refine = vec![4, 8];
            config.threads = Some(threads);
            let out = run(&config).map_err(|e| format!("{command}: {e}"))?;
            reports.push(std::fs::read(out.report_path).map_err(|e| e.to_string())?);
        }
        check!(reports[0] == reports[1], "{command}: reports differ");
    }
    Ok(format!("{} commands byte-identical", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("KR duality and transportation oracle", kr_duality),
        ("KR metric axioms", kr_metric_axioms),
        ("discrete continuity identity", continuity_identity),
        ("superposition of flows into curves", young_superposition),
        ("Tonelli DP and refinement", tonelli),
        ("Jensen reduction", jensen),
        ("ODE superposition", ode_superposition),
        ("solenoidal decomposition", solenoidal),
        ("holonomic approximation", holonomic),
        ("Dirac-boundary consistency", dirac_boundaries),
        ("CLI reproducibility", cli_reproducibility),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
