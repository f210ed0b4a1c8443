//! Samples, hypotheses, voting classifiers and exact margin losses.
//!
//! Margins are computed from integer vote sums, so `f(x)c(x)` is always the
//! correctly rounded value of the rational `(2k - t) / t`. Losses follow the
//! `f(x)c(x) <= gamma` convention: a tied vote counts as an error at `gamma = 0`.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for [`FiniteDistribution`] masses.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> i64 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }

    pub fn from_sign(sign: i64) -> Label {
        if sign > 0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Negative => write!(f, "-1"),
            Label::Positive => write!(f, "+1"),
        }
    }
}

/// A domain element: a finite real, or an atom of a finite domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Scalar(f64),
    Atom(usize),
}

impl Point {
    pub fn scalar(value: f64) -> Result<Point> {
        if value.is_finite() {
            Ok(Point::Scalar(value))
        } else {
            Err(Error::InvalidArgument(format!("scalar point must be finite, got {value}")))
        }
    }

    /// Position on the real line; atoms sit at their index.
    pub fn coordinate(&self) -> f64 {
        match *self {
            Point::Scalar(v) => v,
            Point::Atom(a) => a as f64,
        }
    }

    fn key(&self) -> (u8, u64) {
        match *self {
            Point::Scalar(v) => (0, v.to_bits()),
            Point::Atom(a) => (1, a as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub point: Point,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(point: Point, label: Label) -> Self {
        Self { point, label }
    }
}

/// An ordered sample; position `i` is the index that bootstrap vectors refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    examples: Vec<LabeledExample>,
}

impl TrainingSet {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::InvalidArgument("training set must contain at least one example".into()));
        }
        Ok(Self { examples })
    }

    /// Labels every point with `concept`.
    pub fn labeled_by(points: &[Point], concept: &Hypothesis) -> Result<Self> {
        Self::new(points.iter().map(|&p| LabeledExample::new(p, concept.predict(&p))).collect())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn get(&self, index: usize) -> &LabeledExample {
        &self.examples[index]
    }

    /// The multiset `S(I)`: examples selected by index, duplicates kept.
    pub fn select(&self, indices: &[usize]) -> Vec<LabeledExample> {
        indices.iter().map(|&i| self.examples[i]).collect()
    }

    /// The first `len` examples.
    pub fn prefix(&self, len: usize) -> Result<TrainingSet> {
        if len == 0 || len > self.len() {
            return Err(Error::InvalidArgument(format!("prefix length {len} outside 1..={}", self.len())));
        }
        TrainingSet::new(self.examples[..len].to_vec())
    }

    pub fn is_realized_by(&self, concept: &Hypothesis) -> bool {
        self.examples.iter().all(|e| concept.predict(&e.point) == e.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisKind {
    Threshold,
    IntervalUnion,
    FiniteMember,
    Constant,
}

/// A deterministic `{-1, +1}` predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Hypothesis {
    Constant(Label),
    /// `+1` iff `x >= theta`; `theta = -inf` is all-positive, `+inf` all-negative.
    Threshold { theta: f64 },
    /// `+1` inside any of the closed intervals.
    IntervalUnion { intervals: Vec<(f64, f64)> },
    /// Member `index` of a finite class over atoms `0..labels.len()`.
    FiniteMember { index: usize, labels: Arc<[Label]> },
}

impl Hypothesis {
    pub fn kind(&self) -> HypothesisKind {
        match self {
            Hypothesis::Constant(_) => HypothesisKind::Constant,
            Hypothesis::Threshold { .. } => HypothesisKind::Threshold,
            Hypothesis::IntervalUnion { .. } => HypothesisKind::IntervalUnion,
            Hypothesis::FiniteMember { .. } => HypothesisKind::FiniteMember,
        }
    }

    /// # Panics
    ///
    /// A finite-class member is only defined on atoms of its domain.
    pub fn predict(&self, x: &Point) -> Label {
        match self {
            Hypothesis::Constant(label) => *label,
            Hypothesis::Threshold { theta } => {
                if x.coordinate() >= *theta {
                    Label::Positive
                } else {
                    Label::Negative
                }
            }
            Hypothesis::IntervalUnion { intervals } => {
                let v = x.coordinate();
                if intervals.iter().any(|&(lo, hi)| lo <= v && v <= hi) {
                    Label::Positive
                } else {
                    Label::Negative
                }
            }
            Hypothesis::FiniteMember { labels, .. } => match *x {
                Point::Atom(a) if a < labels.len() => labels[a],
                _ => panic!("finite-class member evaluated outside its atom domain at {x:?}"),
            },
        }
    }

    pub fn is_consistent_with(&self, data: &[LabeledExample]) -> bool {
        data.iter().all(|e| self.predict(&e.point) == e.label)
    }
}

/// Anything that casts `±1` votes: integer vote sum and voter count at a point.
pub trait Classifier: Sync {
    fn vote(&self, x: &Point) -> (i64, u64);

    fn margin(&self, x: &Point, y: Label) -> f64 {
        let (sum, count) = self.vote(x);
        (sum * y.sign()) as f64 / count as f64
    }

    /// Margin `<= 0`; ties are errors.
    fn errs_on(&self, x: &Point, y: Label) -> bool {
        self.vote(x).0 * y.sign() <= 0
    }
}

impl Classifier for Hypothesis {
    fn vote(&self, x: &Point) -> (i64, u64) {
        (self.predict(x).sign(), 1)
    }
}

/// Uniform average `f(x) = (1/t) sum_i h_i(x)` of its members.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingClassifier {
    members: Vec<Hypothesis>,
    // Sorted thresholds when every member is a threshold ray; one binary search
    // then counts the positive votes.
    sorted_thresholds: Option<Vec<f64>>,
}

impl VotingClassifier {
    pub fn new(members: Vec<Hypothesis>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("voting classifier needs at least one member".into()));
        }
        let sorted_thresholds = members
            .iter()
            .map(|h| match h {
                Hypothesis::Threshold { theta } => Some(*theta),
                _ => None,
            })
            .collect::<Option<Vec<f64>>>()
            .map(|mut thetas| {
                thetas.sort_by(f64::total_cmp);
                thetas
            });
        Ok(Self { members, sorted_thresholds })
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `f(x)` itself.
    pub fn value(&self, x: &Point) -> f64 {
        let (sum, count) = self.vote(x);
        sum as f64 / count as f64
    }
}

impl Classifier for VotingClassifier {
    fn vote(&self, x: &Point) -> (i64, u64) {
        let t = self.members.len() as i64;
        let positives = match &self.sorted_thresholds {
            Some(thetas) => {
                let v = x.coordinate();
                thetas.partition_point(|&theta| theta <= v) as i64
            }
            None => self.members.iter().filter(|h| h.predict(x) == Label::Positive).count() as i64,
        };
        (2 * positives - t, t as u64)
    }
}

/// `f(x) * y`.
pub fn margin(f: &VotingClassifier, x: &Point, y: Label) -> f64 {
    f.margin(x, y)
}

/// Majority vote; an exact tie predicts `-1`.
pub fn predict(f: &VotingClassifier, x: &Point) -> Label {
    Label::from_sign(f.vote(x).0)
}

/// Distribution with finite support and normalized masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFiniteDistribution")]
pub struct FiniteDistribution {
    support: Vec<Point>,
    mass: Vec<f64>,
}

#[derive(Deserialize)]
struct RawFiniteDistribution {
    support: Vec<Point>,
    mass: Vec<f64>,
}

impl TryFrom<RawFiniteDistribution> for FiniteDistribution {
    type Error = Error;

    fn try_from(raw: RawFiniteDistribution) -> Result<Self> {
        FiniteDistribution::new(raw.support, raw.mass)
    }
}

impl FiniteDistribution {
    pub fn new(support: Vec<Point>, mass: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != mass.len() {
            return Err(Error::InvalidArgument(format!(
                "support has {} points but {} masses were given",
                support.len(),
                mass.len()
            )));
        }
        if let Some(bad) = mass.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidArgument(format!("mass {bad} is not a non-negative real")));
        }
        if let Some(p) = support.iter().find(|p| matches!(p, Point::Scalar(v) if !v.is_finite())) {
            return Err(Error::InvalidArgument(format!("support point {p:?} is not finite")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!("masses sum to {total}, not 1")));
        }
        let mut seen = HashSet::with_capacity(support.len());
        if let Some(dup) = support.iter().find(|p| !seen.insert(p.key())) {
            return Err(Error::InvalidArgument(format!("support point {dup:?} listed twice")));
        }
        Ok(Self { support, mass })
    }

    pub fn uniform(support: Vec<Point>) -> Result<Self> {
        let len = support.len();
        if len == 0 {
            return Self::new(support, Vec::new());
        }
        let w = 1.0 / len as f64;
        let mut mass = vec![w; len];
        // 1/len summed len times can drift by a few ulps; the last entry absorbs it.
        mass[len - 1] = 1.0 - mass[..len - 1].iter().sum::<f64>();
        Self::new(support, mass)
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> + '_ {
        self.support.iter().zip(self.mass.iter().copied())
    }

    /// `Pr_{x~D}[h(x) != target(x)]`.
    pub fn disagreement(&self, h: &Hypothesis, target: &Hypothesis) -> f64 {
        self.iter().filter(|(x, _)| h.predict(x) != target.predict(x)).fold(0.0, |acc, (_, w)| acc + w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MarginThreshold(f64);

impl MarginThreshold {
    pub const ZERO: MarginThreshold = MarginThreshold(0.0);

    pub fn new(gamma: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&gamma) {
            Ok(Self(gamma))
        } else {
            Err(Error::InvalidArgument(format!("margin threshold {gamma} outside [0, 1]")))
        }
    }

    pub fn gamma(self) -> f64 {
        self.0
    }
}

/// `L^gamma_D(f) = Pr_{x~D}[f(x)c(x) <= gamma]`, summed exactly over the support.
pub fn margin_loss_exact<C: Classifier + ?Sized>(
    f: &C,
    dist: &FiniteDistribution,
    concept: &Hypothesis,
    gamma: MarginThreshold,
) -> f64 {
    dist.iter()
        .filter(|(x, _)| f.margin(x, concept.predict(x)) <= gamma.gamma())
        // fold from +0.0: an empty f64 sum is -0.0
        .fold(0.0, |acc, (_, w)| acc + w)
}
