use std::sync::Arc;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use paclab::concepts::{ConceptClass, TiePolicy};
use paclab::datagen::{draw_training_set, hard_instance, HardInstanceSpec, SourceDistribution};
use paclab::estimation::mc_loss;
use paclab::learners::{bagging_train, draw_bootstrap_plan};
use paclab::model::{margin_loss_exact, FiniteDistribution, Hypothesis, MarginThreshold, Point};
use paclab::rng::{derive_rng, seeded};

/// Upper-tail p-value of Pearson's statistic for `observed` against `expected` frequencies.
fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn bootstrap_indices_are_uniform() {
    let m = 12;
    let plan = draw_bootstrap_plan(m, 50, 2000, &mut seeded(31)).unwrap();
    let mut counts = vec![0u64; m];
    for v in plan.vectors() {
        for &i in v.entries() {
            counts[i] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let expected = vec![total as f64 / m as f64; m];
    let p = chi_square_p(&counts, &expected);
    assert!(p > 1e-3, "p = {p}, counts {counts:?}");
}

#[test]
fn bootstrap_positions_are_independent_of_each_other() {
    // pairs (first, second) entry of each vector should be uniform on [m]^2
    let m = 5;
    let plan = draw_bootstrap_plan(m, 2, 20_000, &mut seeded(77)).unwrap();
    let mut counts = vec![0u64; m * m];
    for v in plan.vectors() {
        counts[v.entries()[0] * m + v.entries()[1]] += 1;
    }
    let expected = vec![20_000.0 / (m * m) as f64; m * m];
    assert!(chi_square_p(&counts, &expected) > 1e-3);
}

#[test]
fn hard_instance_frequencies() {
    let inst = hard_instance(&HardInstanceSpec { k: 10, decay: 0.8, heavy_mass: 0.4 }).unwrap();
    let src = SourceDistribution::finite(Arc::clone(&inst.distribution)).unwrap();
    let n = 50_000;
    let s = draw_training_set(&src, &inst.target, n, &mut seeded(5)).unwrap();
    let mut counts = vec![0u64; 11];
    for e in s.examples() {
        counts[e.point.coordinate() as usize] += 1;
    }
    let expected: Vec<f64> = inst.distribution.mass().iter().map(|w| w * n as f64).collect();
    assert!(chi_square_p(&counts, &expected) > 1e-3);
}

#[test]
fn mc_loss_coverage_on_finite_fixture() {
    let support: Vec<Point> = (0..20).map(|i| Point::Scalar(i as f64 / 20.0 + 0.025)).collect();
    let mass: Vec<f64> = (1..=20).map(|i| i as f64 / 210.0).collect();
    let fd = Arc::new(FiniteDistribution::new(support, mass).unwrap());
    let src = SourceDistribution::finite(Arc::clone(&fd)).unwrap();
    let target = Hypothesis::Threshold { theta: 0.5 };
    let class = ConceptClass::threshold(TiePolicy::FirstConsistent);
    let s = draw_training_set(&src, &target, 15, &mut seeded(3)).unwrap();
    let plan = draw_bootstrap_plan(15, 8, 25, &mut seeded(4)).unwrap();
    let f = bagging_train(&s, &plan, &class).unwrap();
    let truth = margin_loss_exact(&f, &fd, &target, MarginThreshold::ZERO);
    assert!(truth > 0.0, "fixture should have nonzero loss");
    let covered = (0..200u64)
        .filter(|&r| {
            mc_loss(&f, &src, &target, 2000, 0.95, &mut derive_rng(99, "coverage", &[r])).unwrap().covers(truth)
        })
        .count();
    assert!(covered >= 186, "covered {covered} of 200");
}
