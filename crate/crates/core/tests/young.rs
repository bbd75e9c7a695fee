use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use transport_measures::error::Error;
use transport_measures::instances;
use transport_measures::metric::{kr_distance, DiscreteMeasure, MetricSpace};
use transport_measures::young::{disintegrate, integrate_young, product, Integrand, TimeGrid, YoungMeasure};

fn random_young(seed: u64, points: usize, steps: usize) -> YoungMeasure {
    let mut rng = instances::rng(seed);
    let space = instances::space(&mut rng, points, 2).unwrap();
    let slices = (0..steps).map(|_| instances::measure(&mut rng, &space, points).unwrap()).collect();
    product(TimeGrid::new(0.0, 2.0, steps).unwrap(), slices).unwrap()
}

#[test]
fn constant_slices_integrate_to_one() {
    let space = Arc::new(MetricSpace::line(2, 0.0, 1.0).unwrap());
    let p = DiscreteMeasure::dirac(space, 1).unwrap();
    let eta = product(TimeGrid::unit(3).unwrap(), vec![p.clone(), p.clone(), p]).unwrap();
    assert!((integrate_young(&Integrand::caratheodory(|_, _| 1.0), &eta).unwrap() - 1.0).abs() < 1e-15);
    assert!((eta.total_mass() - 1.0).abs() < 1e-15);
}

#[test]
fn indicator_of_second_slice_has_half_mass() {
    let space = Arc::new(MetricSpace::line(2, 0.0, 1.0).unwrap());
    let p = DiscreteMeasure::dirac(space.clone(), 0).unwrap();
    let q = DiscreteMeasure::dirac(space, 1).unwrap();
    let eta = product(TimeGrid::unit(2).unwrap(), vec![p, q]).unwrap();
    let f = Integrand::caratheodory(|t, _| if t >= 0.5 { 1.0 } else { 0.0 });
    assert_eq!(integrate_young(&f, &eta).unwrap(), 0.5);
}

#[test]
fn integration_matches_double_sum() {
    for seed in 0..20 {
        let eta = random_young(seed, 5, 4);
        let f = |t: f64, p: &[f64]| (t + 1.0) * p[0] - p[1] * p[1];
        let mut sum = 0.0;
        for (k, s) in eta.slices().iter().enumerate() {
            for i in 0..s.space().len() {
                sum += s.weight(i) * f(eta.grid().time(k), s.space().point(i)) / 4.0;
            }
        }
        let got = integrate_young(&Integrand::caratheodory(f), &eta).unwrap();
        assert!((got - sum).abs() < 1e-14, "seed {seed}");
    }
}

#[test]
fn linear_growth_integrand_by_hand() {
    // fiber points (x, v): (0, 1) and (0, -3), weights 1/4, 3/4 on one step
    let space = Arc::new(MetricSpace::euclidean(vec![vec![0.0, 1.0], vec![0.0, -3.0]]).unwrap());
    let mu = DiscreteMeasure::new(space, vec![0.25, 0.75]).unwrap();
    let eta = product(TimeGrid::unit(1).unwrap(), vec![mu]).unwrap();
    let f = Integrand::caratheodory(|_, p| 1.0 + p[1].abs()).with_growth_bound(1.0).with_velocity_offset(1);
    assert_eq!(integrate_young(&f, &eta).unwrap(), 0.25 * 2.0 + 0.75 * 4.0);
    let g = Integrand::caratheodory(|_, p| 5.0 + p[1].abs()).with_growth_bound(1.0).with_velocity_offset(1);
    assert!(matches!(integrate_young(&g, &eta), Err(Error::Validation(_))));
}

#[test]
fn normal_integrand_infinite_off_support() {
    let space = Arc::new(MetricSpace::line(3, 0.0, 1.0).unwrap());
    let mu = DiscreteMeasure::new(space, vec![0.5, 0.5, 0.0]).unwrap();
    let eta = product(TimeGrid::unit(2).unwrap(), vec![mu.clone(), mu]).unwrap();
    let f = Integrand::normal(|_, p| if p[0] > 1.5 { f64::INFINITY } else { p[0] });
    assert_eq!(integrate_young(&f, &eta).unwrap(), 0.5);
    let on = Integrand::normal(|_, _| f64::INFINITY);
    assert_eq!(integrate_young(&on, &eta).unwrap(), f64::INFINITY);
    let bad = Integrand::caratheodory(|_, _| f64::INFINITY);
    assert!(matches!(integrate_young(&bad, &eta), Err(Error::Evaluation(_))));
    let neg = Integrand::normal(|_, _| f64::NEG_INFINITY);
    assert!(matches!(integrate_young(&neg, &eta), Err(Error::Evaluation(_))));
}

#[test]
fn slice_count_is_checked() {
    let space = Arc::new(MetricSpace::line(2, 0.0, 1.0).unwrap());
    let p = DiscreteMeasure::dirac(space, 0).unwrap();
    assert!(matches!(product(TimeGrid::unit(2).unwrap(), vec![p]), Err(Error::Validation(_))));
}

#[test]
fn uniform_and_single_step_disintegration() {
    let space = Arc::new(MetricSpace::line(4, 0.0, 1.0).unwrap());
    let u = DiscreteMeasure::uniform(space);
    let eta = product(TimeGrid::unit(1).unwrap(), vec![u.clone()]).unwrap();
    let slices = disintegrate(&eta);
    assert_eq!(slices.len(), 1);
    assert_eq!(slices[0].weights(), u.weights());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_is_exact(seed in any::<u64>(), steps in 1usize..6) {
        let eta = random_young(seed, 6, steps);
        let again = product(*eta.grid(), disintegrate(&eta)).unwrap();
        for (a, b) in eta.slices().iter().zip(again.slices()) {
            prop_assert_eq!(a.weights(), b.weights());
        }
    }

    #[test]
    fn integration_is_kr_continuous(seed in any::<u64>(), steps in 1usize..5, lip in 0.1f64..3.0) {
        let mut rng = instances::rng(seed);
        let space = instances::space(&mut rng, 6, 2).unwrap();
        let a: Vec<_> = (0..steps).map(|_| instances::measure(&mut rng, &space, 4).unwrap()).collect();
        let b: Vec<_> = (0..steps).map(|_| instances::measure(&mut rng, &space, 4).unwrap()).collect();
        let phase = rng.gen_range(0.0..6.0);
        // gradient norm at most lip/√2 in the fiber
        let f = Integrand::caratheodory(move |t, p| lip * ((p[0] + t + phase).sin() * 0.5 + 0.5 * (p[1] - t).abs()));
        let grid = TimeGrid::unit(steps).unwrap();
        let bound: f64 = a.iter().zip(&b).map(|(x, y)| kr_distance(x, y).unwrap().0).sum::<f64>() / steps as f64;
        let ea = product(grid, a).unwrap();
        let eb = product(grid, b).unwrap();
        let gap = (integrate_young(&f, &ea).unwrap() - integrate_young(&f, &eb).unwrap()).abs();
        prop_assert!(gap <= lip * bound + 1e-8);
    }

    #[test]
    fn integration_is_monotone(seed in any::<u64>(), shift in 0.0f64..2.0) {
        let eta = random_young(seed, 5, 3);
        let f = Integrand::normal(|t, p| p[0] * t - p[1]);
        let g = Integrand::normal(move |t, p| p[0] * t - p[1] + shift + p[0] * p[0]);
        prop_assert!(integrate_young(&f, &eta).unwrap() <= integrate_young(&g, &eta).unwrap());
    }
}
