use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use transport_measures::error::Error;
use transport_measures::instances;
use transport_measures::lagrangian::Lagrangian;
use transport_measures::metric::{DiscreteMeasure, MetricSpace};
use transport_measures::transport::{
    action, barycentric_project, continuity_residual, continuity_residual_between, curve_embed, jensen_reduce,
    marginal_path, Action, Curve, GeneralizedCurve, TestFunction, TimeExpandedGraph, TransportMeasure,
};
use transport_measures::young::TimeGrid;

fn random_test_function(rng: &mut impl Rng, g: &TimeExpandedGraph) -> TestFunction {
    let values = (0..=g.steps()).map(|_| (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    TestFunction::new(g, values).unwrap()
}

#[test]
fn residual_vanishes_for_constant_and_time() {
    let mut rng = instances::rng(5);
    let g = instances::graph(&mut rng, 5, 4, None).unwrap();
    let eta = instances::flow(&mut rng, &g, 3).unwrap();
    for f in [TestFunction::from_fn(&g, |_, _| 2.5).unwrap(), TestFunction::from_fn(&g, |t, _| t).unwrap()] {
        assert!(continuity_residual(&eta, &f).unwrap().abs() < 1e-12);
    }
}

#[test]
fn residual_vanishes_for_random_test_functions() {
    for seed in 0..20 {
        let mut rng = instances::rng(seed);
        let g = instances::graph(&mut rng, 6, 5, Some(0.7)).unwrap();
        let eta = instances::flow(&mut rng, &g, 4).unwrap();
        let path = marginal_path(&eta).unwrap();
        for _ in 0..50 {
            let f = random_test_function(&mut rng, &g);
            let r = continuity_residual_between(&eta, &f, &path[0], &path[g.steps()]).unwrap();
            assert!(r.abs() <= 1e-12, "seed {seed}: {r}");
        }
    }
}

#[test]
fn perturbed_edge_is_detected_by_an_indicator() {
    let mut rng = instances::rng(11);
    let g = instances::graph(&mut rng, 5, 4, None).unwrap();
    let eta = instances::flow(&mut rng, &g, 3).unwrap();
    let path = marginal_path(&eta).unwrap();
    for k in 0..g.steps() {
        for e in [0, g.edge_count() / 2, g.edge_count() - 1] {
            for sign in [1.0, -1.0] {
                let mut mass = eta.masses().to_vec();
                mass[k][e] = (mass[k][e] + sign * 1e-6).max(0.0);
                if mass[k][e] == eta.mass(k, e) {
                    continue;
                }
                let bad = TransportMeasure::unchecked(g.clone(), mass).unwrap();
                let worst = (0..=g.steps())
                    .flat_map(|t| (0..g.node_count()).map(move |i| (t, i)))
                    .map(|(t, i)| {
                        let f = TestFunction::indicator(&g, t, i).unwrap();
                        continuity_residual_between(&bad, &f, &path[0], &path[g.steps()]).unwrap().abs()
                    })
                    .fold(0.0, f64::max);
                assert!(worst >= 1e-7, "step {k} edge {e}: {worst}");
            }
        }
    }
}

#[test]
fn embedded_curve_has_dirac_marginals() {
    let mut rng = instances::rng(2);
    let g = instances::graph(&mut rng, 5, 4, None).unwrap();
    let c = instances::curve(&mut rng, &g).unwrap();
    let eta = curve_embed(&c).unwrap();
    for (k, mu) in marginal_path(&eta).unwrap().iter().enumerate() {
        assert_eq!(mu.weight(c.nodes()[k]), 1.0);
    }
}

#[test]
fn half_split_marginal() {
    let space = Arc::new(MetricSpace::line(3, 0.0, 1.0).unwrap());
    let g = Arc::new(TimeExpandedGraph::full(space, TimeGrid::unit(2).unwrap()).unwrap());
    let eta = TransportMeasure::from_triplets(g, &[(0, 1, 0, 0.25), (0, 1, 2, 0.25), (1, 0, 0, 0.25), (1, 2, 2, 0.25)])
        .unwrap();
    let path = marginal_path(&eta).unwrap();
    assert_eq!(path[1].weights(), &[0.5, 0.0, 0.5]);
}

#[test]
fn outgoing_and_incoming_marginals_agree_inside() {
    for seed in 0..10 {
        let mut rng = instances::rng(seed);
        let g = instances::graph(&mut rng, 6, 5, None).unwrap();
        let eta = instances::flow(&mut rng, &g, 5).unwrap();
        for k in 1..g.steps() {
            let out = eta.outgoing_marginal(k);
            let inc = eta.incoming_marginal(k);
            for (a, b) in out.iter().zip(&inc) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn straight_path_embedding_and_action() {
    let space = Arc::new(MetricSpace::line(3, 0.0, 1.0).unwrap());
    let g = Arc::new(TimeExpandedGraph::full(space, TimeGrid::unit(2).unwrap()).unwrap());
    let c = Curve::new(g.clone(), vec![0, 1, 2]).unwrap();
    let eta = curve_embed(&c).unwrap();
    assert_eq!(eta.mass_between(0, 0, 1), 0.5);
    assert_eq!(eta.mass_between(1, 1, 2), 0.5);
    // speed 2 throughout: ½·4
    assert_eq!(action(&eta, &Lagrangian::quadratic(1.0)).unwrap(), 2.0);
    assert_eq!(action(&c, &Lagrangian::quadratic(1.0)).unwrap(), 2.0);
    assert_eq!(action(&eta, &Lagrangian::constant(0.0)).unwrap(), 0.0);
    assert_eq!(action(&eta, &Lagrangian::constant(1.0)).unwrap(), 1.0);
    assert!(Curve::new(g, vec![0, 1]).is_err());
}

#[test]
fn symmetric_split_projects_to_rest() {
    let space = Arc::new(MetricSpace::line(3, 0.0, 1.0).unwrap());
    let g = Arc::new(TimeExpandedGraph::full(space, TimeGrid::unit(1).unwrap()).unwrap());
    let eta = TransportMeasure::from_triplets(g, &[(0, 1, 0, 0.5), (0, 1, 2, 0.5)]).unwrap();
    let p = barycentric_project(&eta).unwrap();
    assert_eq!(p.field.get(0, 1), Some(&[0.0][..]));
    let projected = p.projected.unwrap();
    assert_eq!(projected.mass_between(0, 1, 1), 1.0);
    let l = Lagrangian::quadratic(1.0);
    assert!(action(&projected, &l).unwrap() <= action(&eta, &l).unwrap());
}

#[test]
fn deterministic_flow_projects_to_itself() {
    let mut rng = instances::rng(9);
    let g = instances::graph(&mut rng, 5, 3, None).unwrap();
    let eta = curve_embed(&instances::curve(&mut rng, &g).unwrap()).unwrap();
    let p = barycentric_project(&eta).unwrap();
    assert_eq!(p.projected.unwrap().masses(), eta.masses());
}

#[test]
fn jensen_examples() {
    let space = Arc::new(MetricSpace::line(2, 0.0, 1.0).unwrap());
    let g = Arc::new(TimeExpandedGraph::full(space, TimeGrid::unit(1).unwrap()).unwrap());
    let rest = Curve::constant(g, 0).unwrap();
    let l = Lagrangian::from_fn(|_, _, v| v[0] * v[0]).convex(true);
    let split = GeneralizedCurve::new(rest.clone(), vec![vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)]]).unwrap();
    assert_eq!(jensen_reduce(&split, &l).unwrap(), (0.0, 1.0));
    assert_eq!(jensen_reduce(&GeneralizedCurve::from_curve(rest.clone()), &l).unwrap(), (0.0, 0.0));
    let unflagged = Lagrangian::from_fn(|_, _, v| v[0] * v[0]);
    assert!(matches!(jensen_reduce(&split, &unflagged), Err(Error::Contract(_))));
    assert!(GeneralizedCurve::new(rest, vec![vec![(vec![1.0], 1.0)]]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn action_is_affine(seed in any::<u64>(), s in 0.0f64..=1.0) {
        let mut rng = instances::rng(seed);
        let g = instances::graph(&mut rng, 5, 3, None).unwrap();
        let a = instances::flow(&mut rng, &g, 3).unwrap();
        let b = instances::flow(&mut rng, &g, 3).unwrap();
        let l = instances::convex_lagrangian(&mut rng, 2);
        let mixed = action(&a.mix(s, &b).unwrap(), &l).unwrap();
        let split = s * action(&a, &l).unwrap() + (1.0 - s) * action(&b, &l).unwrap();
        prop_assert!((mixed - split).abs() <= 1e-12 * (1.0 + split.abs()));
    }

    #[test]
    fn jensen_inequality(seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let g = instances::graph(&mut rng, 4, 3, None).unwrap();
        let l = instances::convex_lagrangian(&mut rng, 2);
        let gamma = instances::generalized_curve(&mut rng, &g, false).unwrap();
        let (c, gen) = jensen_reduce(&gamma, &l).unwrap();
        prop_assert!(gen >= c - 1e-10);
    }

    #[test]
    fn projection_never_increases_convex_action(seed in any::<u64>()) {
        // mass splits symmetrically around a lattice velocity, so the mean
        // stays on the grid
        let mut rng = instances::rng(seed);
        let space = Arc::new(MetricSpace::line(7, 0.0, 1.0).unwrap());
        let g = Arc::new(TimeExpandedGraph::full(space, TimeGrid::unit(1).unwrap()).unwrap());
        let centre = rng.gen_range(1..6usize);
        let arm = rng.gen_range(1..=centre.min(6 - centre));
        let from = rng.gen_range(0..7usize);
        let (w, rest) = (rng.gen_range(0.1..0.45), rng.gen_range(0.0..0.2));
        let eta = TransportMeasure::from_triplets(
            g.clone(),
            &[(0, from, centre - arm, w), (0, from, centre + arm, w), (0, from, centre, 1.0 - 2.0 * w - rest), (0, from, centre, rest)],
        ).unwrap();
        let l = instances::convex_lagrangian(&mut rng, 1);
        let p = barycentric_project(&eta).unwrap();
        let projected = p.projected.unwrap();
        prop_assert!(projected.action(&l).unwrap() <= eta.action(&l).unwrap() + 1e-12);
    }

    #[test]
    fn marginal_path_of_embedding_is_exact(seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let g = instances::graph(&mut rng, 6, 4, Some(0.8)).unwrap();
        let c = instances::curve(&mut rng, &g).unwrap();
        let path = marginal_path(&curve_embed(&c).unwrap()).unwrap();
        for (k, mu) in path.iter().enumerate() {
            let dirac = DiscreteMeasure::dirac(g.space().clone(), c.nodes()[k]).unwrap();
            prop_assert_eq!(mu.weights(), dirac.weights());
        }
    }
}
