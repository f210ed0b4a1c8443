//! Small deterministic problems shared by the verification suites, the CLI
//! defaults and the tests.

use num_rational::Ratio;

use crate::buckets::BucketParams;
use crate::concepts::{ConceptClass, TiePolicy};
use crate::model::{FiniteDistribution, Hypothesis, Point, TrainingSet};

/// A threshold-class problem with a finite evaluation distribution.
#[derive(Debug, Clone)]
pub struct ThresholdFixture {
    pub sample: TrainingSet,
    pub dist: FiniteDistribution,
    pub concept: Hypothesis,
    pub class: ConceptClass,
}

fn threshold_fixture(sample_points: &[f64], support: &[f64]) -> ThresholdFixture {
    let concept = Hypothesis::Threshold { theta: 0.5 };
    let points: Vec<Point> = sample_points.iter().map(|&v| Point::Scalar(v)).collect();
    ThresholdFixture {
        sample: TrainingSet::labeled_by(&points, &concept).expect("non-empty fixture"),
        dist: FiniteDistribution::uniform(support.iter().map(|&v| Point::Scalar(v)).collect())
            .expect("valid fixture support"),
        concept,
        class: ConceptClass::threshold(TiePolicy::Midpoint),
    }
}

/// Five training points around the boundary at 0.5 and an eight-point support.
pub fn loss_transfer_fixture() -> ThresholdFixture {
    threshold_fixture(&[0.15, 0.3, 0.48, 0.55, 0.9], &[0.05, 0.15, 0.3, 0.42, 0.48, 0.55, 0.7, 0.9])
}

/// `m` evenly spread training points `(i + 1/2)/m` and the support `{0, 0.1, ..., 1}`.
pub fn bucket_training_fixture(m: usize) -> ThresholdFixture {
    let sample: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let support: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    threshold_fixture(&sample, &support)
}

/// A bucket family small enough to check exhaustively.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyBucketFixture {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub params: BucketParams,
}

fn tiny(m: usize, n: usize, branching: usize, low: (u64, u64), high: (u64, u64)) -> TinyBucketFixture {
    TinyBucketFixture {
        name: format!("m{m}-n{n}-C{branching}"),
        m,
        n,
        params: BucketParams {
            branching,
            low_frac: Ratio::new(low.0, low.1),
            high_frac: Ratio::new(high.0, high.1),
            ..BucketParams::default()
        },
    }
}

/// Fixtures with the distinct-count window widened so that buckets exist at
/// desk scale. `m4-n3-C2` and `m5-n3-C2` use lists of length 2, exercising
/// one level of recursion.
pub fn tiny_bucket_fixtures() -> Vec<TinyBucketFixture> {
    vec![
        tiny(3, 2, 2, (1, 3), (2, 3)),
        tiny(4, 2, 2, (1, 4), (3, 4)),
        tiny(4, 3, 3, (1, 4), (3, 4)),
        tiny(4, 3, 2, (1, 2), (3, 4)),
        tiny(5, 3, 2, (2, 5), (4, 5)),
    ]
}
