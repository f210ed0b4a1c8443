use paclab::concepts::{ConceptClass, TiePolicy};
use paclab::datagen::{draw_training_set, SourceDistribution};
use paclab::exact::{enumerate_gs, EnumerationBudget, IndexVectors};
use paclab::learners::{bagging_train, hanneke_train, BootstrapPlan, IndexVector};
use paclab::model::{Classifier, Hypothesis};
use paclab::rng::seeded;

#[test]
fn bagging_over_every_vector_is_gs() {
    let class = ConceptClass::intervals(2, TiePolicy::Midpoint).unwrap();
    let target = Hypothesis::IntervalUnion { intervals: vec![(0.2, 0.4), (0.7, 0.8)] };
    let s = draw_training_set(&SourceDistribution::UniformUnit, &target, 5, &mut seeded(12)).unwrap();
    let n = 4;
    let vectors = IndexVectors::new(5, n).map(|v| IndexVector::new(5, v).unwrap()).collect();
    let full = bagging_train(&s, &BootstrapPlan::new(vectors).unwrap(), &class).unwrap();
    assert_eq!(full, enumerate_gs(&s, n, &class, EnumerationBudget::default()).unwrap());
}

#[test]
fn hanneke_voter_fits_its_sample() {
    // every training point sits in two thirds of the sub-samples
    let class = ConceptClass::threshold(TiePolicy::FirstConsistent);
    let target = Hypothesis::Threshold { theta: 0.3 };
    for seed in 0..10 {
        let s = draw_training_set(&SourceDistribution::UniformUnit, &target, 64, &mut seeded(seed)).unwrap();
        let f = hanneke_train(&s, &class).unwrap();
        assert_eq!(f.len(), 27);
        assert!(s.examples().iter().all(|e| !f.errs_on(&e.point, e.label)));
    }
}
