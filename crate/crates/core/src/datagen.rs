//! Source distributions, realizable sample generation and the hard instance
//! used to separate adversarial ERM from bagging.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::concepts::{ConceptClass, FiniteClass, TiePolicy};
use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, Hypothesis, Label, LabeledExample, Point, TrainingSet};

#[derive(Debug, Clone)]
pub enum SourceDistribution {
    Finite { dist: Arc<FiniteDistribution>, sampler: WeightedIndex<f64> },
    /// Scalars uniform on `[0, 1)`.
    UniformUnit,
}

impl SourceDistribution {
    pub fn finite(dist: Arc<FiniteDistribution>) -> Result<Self> {
        let sampler = WeightedIndex::new(dist.mass().iter().copied())
            .map_err(|e| Error::InvalidArgument(format!("cannot sample from distribution: {e}")))?;
        Ok(SourceDistribution::Finite { dist, sampler })
    }

    pub fn as_finite(&self) -> Option<&Arc<FiniteDistribution>> {
        match self {
            SourceDistribution::Finite { dist, .. } => Some(dist),
            SourceDistribution::UniformUnit => None,
        }
    }

    /// Support index for finite distributions, `None` for continuous ones.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        match self {
            SourceDistribution::Finite { sampler, .. } => Some(sampler.sample(rng)),
            SourceDistribution::UniformUnit => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            SourceDistribution::Finite { dist, sampler } => dist.support()[sampler.sample(rng)],
            SourceDistribution::UniformUnit => Point::Scalar(rng.random::<f64>()),
        }
    }
}

/// `m` i.i.d. points from `dist`, labeled by `concept`.
pub fn draw_training_set<R: Rng + ?Sized>(
    dist: &SourceDistribution,
    concept: &Hypothesis,
    m: usize,
    rng: &mut R,
) -> Result<TrainingSet> {
    if m == 0 {
        return Err(Error::InvalidArgument("training set size must be at least 1".into()));
    }
    let examples = (0..m)
        .map(|_| {
            let p = dist.sample(rng);
            LabeledExample::new(p, concept.predict(&p))
        })
        .collect();
    TrainingSet::new(examples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardInstanceSpec {
    /// Number of light atoms.
    pub k: usize,
    /// Geometric ratio between consecutive light masses.
    pub decay: f64,
    /// Mass of the anchor atom 0.
    pub heavy_mass: f64,
}

impl HardInstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("hard instance needs at least one light atom".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidArgument(format!("decay {} outside (0, 1)", self.decay)));
        }
        if !(self.heavy_mass > 0.0 && self.heavy_mass < 1.0) {
            return Err(Error::InvalidArgument(format!("heavy_mass {} outside (0, 1)", self.heavy_mass)));
        }
        Ok(())
    }

    /// Masses of atoms `0..=k`.
    pub fn masses(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.k).map(|i| self.decay.powi(i as i32)).collect();
        let total: f64 = raw.iter().sum();
        let light = 1.0 - self.heavy_mass;
        let mut mass = Vec::with_capacity(self.k + 1);
        mass.push(self.heavy_mass);
        mass.extend(raw.iter().map(|w| light * w / total));
        mass
    }
}

#[derive(Debug, Clone)]
pub struct HardInstance {
    pub class: ConceptClass,
    pub distribution: Arc<FiniteDistribution>,
    pub target: Hypothesis,
}

impl HardInstance {
    /// The same class with adversarial tie-breaking against this instance.
    pub fn adversarial_class(&self) -> ConceptClass {
        self.class.clone().with_tie_policy(TiePolicy::Adversarial {
            hidden: self.target.clone(),
            dist: Arc::clone(&self.distribution),
        })
    }
}

/// Atoms `0..=k`; the class is all-negative plus one singleton per light atom,
/// the target is all-negative. Tie policy defaults to first-consistent.
pub fn hard_instance(spec: &HardInstanceSpec) -> Result<HardInstance> {
    spec.validate()?;
    let domain = spec.k + 1;
    let mut members = vec![vec![Label::Negative; domain]];
    for i in 1..=spec.k {
        let mut m = vec![Label::Negative; domain];
        m[i] = Label::Positive;
        members.push(m);
    }
    let finite = FiniteClass::new(domain, members)?.with_declared_vc_dim(1);
    let mut mass = spec.masses();
    let head: f64 = mass[..spec.k].iter().sum();
    mass[spec.k] = 1.0 - head;
    let distribution = Arc::new(FiniteDistribution::new((0..domain).map(Point::Atom).collect(), mass)?);
    let target = finite.member(0);
    let class = ConceptClass::finite(finite, TiePolicy::FirstConsistent)?;
    Ok(HardInstance { class, distribution, target })
}
