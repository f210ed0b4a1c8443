//! Concept classes with exact ERM oracles.
//!
//! ERM may return any consistent member; [`TiePolicy`] pins down which one so
//! that runs are deterministic, and the adversarial policy makes the choice
//! deliberately bad for diagnostics.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, Hypothesis, Label, LabeledExample, Point};

/// Largest atom domain for exhaustive shattering search.
pub const SHATTER_DOMAIN_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum TiePolicy {
    /// Tightest consistent member (smallest threshold, tight intervals, first in class order).
    FirstConsistent,
    /// Decision boundaries halfway between opposing labels.
    Midpoint,
    /// Diagnostic only: the consistent member with the largest true error
    /// against `hidden` under `dist`.
    Adversarial { hidden: Hypothesis, dist: Arc<FiniteDistribution> },
}

/// A finite class over atoms `0..domain_size`, members listed in class order.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteClass {
    domain_size: usize,
    members: Vec<Arc<[Label]>>,
    declared_vc_dim: Option<usize>,
}

impl FiniteClass {
    pub fn new(domain_size: usize, members: Vec<Vec<Label>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("finite class needs at least one member".into()));
        }
        if let Some(bad) = members.iter().find(|m| m.len() != domain_size) {
            return Err(Error::InvalidArgument(format!(
                "member labels {} atoms, domain has {domain_size}",
                bad.len()
            )));
        }
        Ok(Self { domain_size, members: members.into_iter().map(Arc::from).collect(), declared_vc_dim: None })
    }

    /// Records a closed-form VC dimension for domains too large to search.
    pub fn with_declared_vc_dim(mut self, vc_dim: usize) -> Self {
        self.declared_vc_dim = Some(vc_dim);
        self
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, index: usize) -> Hypothesis {
        Hypothesis::FiniteMember { index, labels: Arc::clone(&self.members[index]) }
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = Hypothesis> + '_ {
        (0..self.members.len()).map(|i| self.member(i))
    }

    /// Per-atom labels forced by `data`; `NotRealizable` on a contradiction.
    fn constraints(&self, data: &[LabeledExample]) -> Result<Vec<(usize, Label)>> {
        let mut forced: Vec<Option<Label>> = vec![None; self.domain_size];
        let mut order = Vec::new();
        for e in data {
            let atom = match e.point {
                Point::Atom(a) if a < self.domain_size => a,
                p => {
                    return Err(Error::InvalidArgument(format!("point {p:?} is outside the atom domain")));
                }
            };
            match forced[atom] {
                None => {
                    forced[atom] = Some(e.label);
                    order.push(atom);
                }
                Some(l) if l != e.label => return Err(Error::NotRealizable),
                Some(_) => {}
            }
        }
        Ok(order.into_iter().map(|a| (a, forced[a].unwrap())).collect())
    }

    fn consistent_indices(&self, data: &[LabeledExample]) -> Result<Vec<usize>> {
        let constraints = self.constraints(data)?;
        Ok((0..self.members.len())
            .filter(|&i| constraints.iter().all(|&(a, l)| self.members[i][a] == l))
            .collect())
    }

    /// All and only the members consistent with `data`, in class order.
    pub fn consistent_set(&self, data: &[LabeledExample]) -> Vec<Hypothesis> {
        match self.consistent_indices(data) {
            Ok(indices) => indices.into_iter().map(|i| self.member(i)).collect(),
            Err(_) => Vec::new(),
        }
    }

    /// Exhaustive VC dimension via shattering search.
    pub fn shattering_vc_dim(&self) -> Result<usize> {
        if self.domain_size > SHATTER_DOMAIN_CAP {
            return Err(Error::DomainTooLarge { size: self.domain_size, cap: SHATTER_DOMAIN_CAP });
        }
        let patterns: Vec<u32> = {
            let set: HashSet<u32> = self
                .members
                .iter()
                .map(|m| {
                    m.iter()
                        .enumerate()
                        .filter(|(_, l)| **l == Label::Positive)
                        .fold(0u32, |acc, (a, _)| acc | (1 << a))
                })
                .collect();
            set.into_iter().collect()
        };
        let mut best = 0;
        let domain_mask_count = 1u32 << self.domain_size;
        for size in 1..=self.domain_size {
            if (1usize << size) > patterns.len() {
                break;
            }
            let shattered = (0..domain_mask_count).filter(|s| s.count_ones() as usize == size).any(|subset| {
                let traces: HashSet<u32> = patterns.iter().map(|p| p & subset).collect();
                traces.len() == 1 << size
            });
            if !shattered {
                break;
            }
            best = size;
        }
        Ok(best)
    }

    fn erm(&self, data: &[LabeledExample], policy: &TiePolicy) -> Result<Hypothesis> {
        let consistent = self.consistent_indices(data)?;
        let chosen = match policy {
            TiePolicy::FirstConsistent | TiePolicy::Midpoint => consistent.first().copied(),
            TiePolicy::Adversarial { hidden, dist } => {
                let mut best: Option<(usize, f64)> = None;
                for &i in &consistent {
                    let err = dist.disagreement(&self.member(i), hidden);
                    if best.is_none_or(|(_, e)| err > e) {
                        best = Some((i, err));
                    }
                }
                best.map(|(i, _)| i)
            }
        };
        chosen.map(|i| self.member(i)).ok_or(Error::NotRealizable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassKind {
    /// `h_theta(x) = +1` iff `x >= theta`.
    ThresholdRay,
    /// Unions of at most `k` closed intervals.
    IntervalUnion { k: usize },
    FiniteExplicit(FiniteClass),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptClass {
    kind: ClassKind,
    vc_dim: usize,
    tie_policy: TiePolicy,
}

impl ConceptClass {
    pub fn threshold(tie_policy: TiePolicy) -> Self {
        Self { kind: ClassKind::ThresholdRay, vc_dim: 1, tie_policy }
    }

    pub fn intervals(k: usize, tie_policy: TiePolicy) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("union of intervals needs k >= 1".into()));
        }
        Ok(Self { kind: ClassKind::IntervalUnion { k }, vc_dim: 2 * k, tie_policy })
    }

    /// VC dimension is searched exhaustively when the domain is small enough,
    /// and otherwise taken from [`FiniteClass::with_declared_vc_dim`].
    pub fn finite(class: FiniteClass, tie_policy: TiePolicy) -> Result<Self> {
        let vc_dim = match class.declared_vc_dim {
            Some(d) => d,
            None => class.shattering_vc_dim()?,
        };
        if vc_dim == 0 {
            return Err(Error::InvalidArgument("class must have VC dimension at least 1".into()));
        }
        let max = (class.len() as f64).log2().floor() as usize;
        if vc_dim > max {
            return Err(Error::InvalidArgument(format!(
                "declared VC dimension {vc_dim} exceeds log2 of the class size ({max})"
            )));
        }
        Ok(Self { kind: ClassKind::FiniteExplicit(class), vc_dim, tie_policy })
    }

    pub fn with_tie_policy(mut self, tie_policy: TiePolicy) -> Self {
        self.tie_policy = tie_policy;
        self
    }

    pub fn kind(&self) -> &ClassKind {
        &self.kind
    }

    pub fn tie_policy(&self) -> &TiePolicy {
        &self.tie_policy
    }

    pub fn declared_vc_dim(&self) -> usize {
        self.vc_dim
    }

    pub fn as_finite(&self) -> Option<&FiniteClass> {
        match &self.kind {
            ClassKind::FiniteExplicit(c) => Some(c),
            _ => None,
        }
    }
}

/// Some member of `class` consistent with every example of `data`.
pub fn erm(class: &ConceptClass, data: &[LabeledExample]) -> Result<Hypothesis> {
    match &class.kind {
        ClassKind::ThresholdRay => threshold_erm(data, &class.tie_policy),
        ClassKind::IntervalUnion { k } => interval_erm(*k, data, &class.tie_policy),
        ClassKind::FiniteExplicit(c) => c.erm(data, &class.tie_policy),
    }
}

/// VC dimension: closed form for the parametric classes, shattering search for
/// small finite classes, the declared value for large ones.
pub fn vc_dim_of(class: &ConceptClass) -> Result<usize> {
    match &class.kind {
        ClassKind::ThresholdRay => Ok(1),
        ClassKind::IntervalUnion { k } => Ok(2 * k),
        ClassKind::FiniteExplicit(c) => match c.shattering_vc_dim() {
            Ok(d) => Ok(d),
            Err(e @ Error::DomainTooLarge { .. }) => c.declared_vc_dim.ok_or(e),
            Err(e) => Err(e),
        },
    }
}

fn threshold_erm(data: &[LabeledExample], policy: &TiePolicy) -> Result<Hypothesis> {
    // A consistent theta lies in (max_negative, min_positive].
    let mut max_neg = f64::NEG_INFINITY;
    let mut min_pos = f64::INFINITY;
    for e in data {
        let v = e.point.coordinate();
        match e.label {
            Label::Negative => max_neg = max_neg.max(v),
            Label::Positive => min_pos = min_pos.min(v),
        }
    }
    let any_neg = data.iter().any(|e| e.label == Label::Negative);
    let any_pos = data.iter().any(|e| e.label == Label::Positive);
    if any_neg && any_pos && max_neg >= min_pos {
        return Err(Error::NotRealizable);
    }
    let theta = match policy {
        _ if data.is_empty() => f64::NEG_INFINITY,
        TiePolicy::FirstConsistent => min_pos,
        TiePolicy::Midpoint => match (any_neg, any_pos) {
            (true, true) => {
                let mid = max_neg + (min_pos - max_neg) / 2.0;
                // Adjacent floats: the midpoint can round onto the negative side.
                if mid > max_neg { mid } else { min_pos }
            }
            (false, true) => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        },
        TiePolicy::Adversarial { hidden, dist } => {
            let mut candidates: Vec<f64> = dist
                .support()
                .iter()
                .map(Point::coordinate)
                .filter(|&s| s > max_neg && s <= min_pos)
                .collect();
            candidates.push(min_pos);
            if !any_neg {
                candidates.push(f64::NEG_INFINITY);
            }
            candidates.sort_by(f64::total_cmp);
            candidates.dedup();
            let mut best: Option<(f64, f64)> = None;
            for theta in candidates {
                let err = dist.disagreement(&Hypothesis::Threshold { theta }, hidden);
                if best.is_none_or(|(_, e)| err > e) {
                    best = Some((theta, err));
                }
            }
            best.map(|(t, _)| t).unwrap_or(min_pos)
        }
    };
    Ok(Hypothesis::Threshold { theta })
}

fn interval_erm(k: usize, data: &[LabeledExample], policy: &TiePolicy) -> Result<Hypothesis> {
    if matches!(policy, TiePolicy::Adversarial { .. }) {
        return Err(Error::Unsupported("adversarial tie-breaking is not implemented for interval unions".into()));
    }
    let mut sorted: Vec<(f64, Label)> = data.iter().map(|e| (e.point.coordinate(), e.label)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    sorted.dedup();
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::NotRealizable);
    }
    // Maximal runs of positives in sorted order, as (first, last) positions.
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for (i, &(_, label)) in sorted.iter().enumerate() {
        if label != Label::Positive {
            continue;
        }
        match blocks.last_mut() {
            Some((_, last)) if *last + 1 == i => *last = i,
            _ => blocks.push((i, i)),
        }
    }
    if blocks.len() > k {
        return Err(Error::NotRealizable);
    }
    let intervals = blocks
        .into_iter()
        .map(|(first, last)| match policy {
            TiePolicy::Midpoint => {
                let lo = if first > 0 {
                    sorted[first - 1].0 + (sorted[first].0 - sorted[first - 1].0) / 2.0
                } else {
                    f64::NEG_INFINITY
                };
                let hi = if last + 1 < sorted.len() {
                    sorted[last].0 + (sorted[last + 1].0 - sorted[last].0) / 2.0
                } else {
                    f64::INFINITY
                };
                // Keep the neighbouring negatives strictly outside.
                let lo = if first > 0 && lo <= sorted[first - 1].0 { sorted[first].0 } else { lo };
                let hi = if last + 1 < sorted.len() && hi >= sorted[last + 1].0 { sorted[last].0 } else { hi };
                (lo, hi)
            }
            _ => (sorted[first].0, sorted[last].0),
        })
        .collect();
    Ok(Hypothesis::IntervalUnion { intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainingSet;
    use proptest::prelude::*;

    fn ex(v: f64, sign: i64) -> LabeledExample {
        LabeledExample::new(Point::Scalar(v), Label::from_sign(sign))
    }

    fn atom(a: usize, sign: i64) -> LabeledExample {
        LabeledExample::new(Point::Atom(a), Label::from_sign(sign))
    }

    /// {all-negative} plus one singleton per atom 1..=k over atoms 0..=k.
    fn singletons(k: usize) -> FiniteClass {
        let mut members = vec![vec![Label::Negative; k + 1]];
        for i in 1..=k {
            let mut m = vec![Label::Negative; k + 1];
            m[i] = Label::Positive;
            members.push(m);
        }
        FiniteClass::new(k + 1, members).unwrap()
    }

    #[test]
    fn threshold_midpoint() {
        let class = ConceptClass::threshold(TiePolicy::Midpoint);
        let h = erm(&class, &[ex(0.2, -1), ex(0.7, 1)]).unwrap();
        let Hypothesis::Threshold { theta } = h else { panic!("not a threshold: {h:?}") };
        assert!((theta - 0.45).abs() < 1e-12);
        assert_eq!(h.predict(&Point::Scalar(0.5)), Label::Positive);
    }

    #[test]
    fn threshold_empty_is_all_positive() {
        for policy in [TiePolicy::Midpoint, TiePolicy::FirstConsistent] {
            let h = erm(&ConceptClass::threshold(policy), &[]).unwrap();
            assert_eq!(h, Hypothesis::Threshold { theta: f64::NEG_INFINITY });
            assert_eq!(h.predict(&Point::Scalar(-1e300)), Label::Positive);
        }
    }

    #[test]
    fn threshold_one_sided_and_conflicts() {
        let class = ConceptClass::threshold(TiePolicy::Midpoint);
        let only_neg = erm(&class, &[ex(0.3, -1)]).unwrap();
        assert_eq!(only_neg.predict(&Point::Scalar(1e9)), Label::Negative);
        let only_pos = erm(&class, &[ex(0.3, 1)]).unwrap();
        assert_eq!(only_pos.predict(&Point::Scalar(-1e9)), Label::Positive);
        assert_eq!(erm(&class, &[ex(0.5, 1), ex(0.5, -1)]), Err(Error::NotRealizable));
        assert_eq!(erm(&class, &[ex(0.4, 1), ex(0.6, -1)]), Err(Error::NotRealizable));
        let first = ConceptClass::threshold(TiePolicy::FirstConsistent);
        assert_eq!(erm(&first, &[ex(0.2, -1), ex(0.7, 1)]).unwrap(), Hypothesis::Threshold { theta: 0.7 });
    }

    #[test]
    fn threshold_midpoint_between_adjacent_floats() {
        let a = 0.3f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let h = erm(&ConceptClass::threshold(TiePolicy::Midpoint), &[ex(a, -1), ex(b, 1)]).unwrap();
        assert!(h.is_consistent_with(&[ex(a, -1), ex(b, 1)]));
    }

    #[test]
    fn one_interval_tight() {
        let class = ConceptClass::intervals(1, TiePolicy::FirstConsistent).unwrap();
        let data = [ex(0.1, -1), ex(0.4, 1), ex(0.6, 1), ex(0.9, -1)];
        let h = erm(&class, &data).unwrap();
        assert_eq!(h, Hypothesis::IntervalUnion { intervals: vec![(0.4, 0.6)] });
        assert_eq!(h.predict(&Point::Scalar(0.5)), Label::Positive);
        assert_eq!(h.predict(&Point::Scalar(0.95)), Label::Negative);
        let mid = erm(&class.with_tie_policy(TiePolicy::Midpoint), &data).unwrap();
        assert_eq!(mid, Hypothesis::IntervalUnion { intervals: vec![(0.25, 0.75)] });
    }

    #[test]
    fn intervals_reject_too_many_blocks() {
        let class = ConceptClass::intervals(1, TiePolicy::FirstConsistent).unwrap();
        assert_eq!(erm(&class, &[ex(0.1, 1), ex(0.5, -1), ex(0.9, 1)]), Err(Error::NotRealizable));
        let two = ConceptClass::intervals(2, TiePolicy::FirstConsistent).unwrap();
        assert!(erm(&two, &[ex(0.1, 1), ex(0.5, -1), ex(0.9, 1)]).is_ok());
        assert_eq!(erm(&two, &[]).unwrap(), Hypothesis::IntervalUnion { intervals: vec![] });
        assert!(matches!(
            erm(&two, &[ex(0.3, 1), ex(0.3, -1)]),
            Err(Error::NotRealizable)
        ));
    }

    #[test]
    fn declared_vc_dims() {
        assert_eq!(vc_dim_of(&ConceptClass::threshold(TiePolicy::Midpoint)), Ok(1));
        assert_eq!(vc_dim_of(&ConceptClass::intervals(2, TiePolicy::Midpoint).unwrap()), Ok(4));
    }

    /// Independent realizability oracle for k-interval labelings of sorted
    /// collinear points: count maximal runs of `+1`.
    fn realizable_by_intervals(labels: &[Label], k: usize) -> bool {
        let runs = labels
            .iter()
            .enumerate()
            .filter(|&(i, l)| *l == Label::Positive && (i == 0 || labels[i - 1] == Label::Negative))
            .count();
        runs <= k
    }

    fn shatters_collinear(k: usize, n: usize) -> bool {
        let class = ConceptClass::intervals(k, TiePolicy::FirstConsistent).unwrap();
        (0..1u32 << n).all(|mask| {
            let labels: Vec<Label> =
                (0..n).map(|i| if mask >> i & 1 == 1 { Label::Positive } else { Label::Negative }).collect();
            let data: Vec<LabeledExample> =
                labels.iter().enumerate().map(|(i, &l)| LabeledExample::new(Point::Scalar(i as f64), l)).collect();
            let via_erm = erm(&class, &data).is_ok();
            assert_eq!(via_erm, realizable_by_intervals(&labels, k));
            via_erm
        })
    }

    #[test]
    fn two_intervals_shatter_four_not_five() {
        assert!(shatters_collinear(2, 4));
        assert!(!shatters_collinear(2, 5));
        assert!(shatters_collinear(1, 2));
        assert!(!shatters_collinear(1, 3));
    }

    #[test]
    fn finite_shattering() {
        let constants = FiniteClass::new(2, vec![vec![Label::Negative; 2], vec![Label::Positive; 2]]).unwrap();
        assert_eq!(constants.shattering_vc_dim(), Ok(1));
        let class = ConceptClass::finite(constants, TiePolicy::FirstConsistent).unwrap();
        assert_eq!(vc_dim_of(&class), Ok(1));
        // all 2^3 labelings of three atoms
        let full = FiniteClass::new(
            3,
            (0..8u32)
                .map(|m| (0..3).map(|i| if m >> i & 1 == 1 { Label::Positive } else { Label::Negative }).collect())
                .collect(),
        )
        .unwrap();
        assert_eq!(full.shattering_vc_dim(), Ok(3));
        assert_eq!(singletons(5).shattering_vc_dim(), Ok(1));
        let big = singletons(30);
        assert_eq!(big.shattering_vc_dim(), Err(Error::DomainTooLarge { size: 31, cap: 20 }));
        let declared = ConceptClass::finite(big.with_declared_vc_dim(1), TiePolicy::FirstConsistent).unwrap();
        assert_eq!(vc_dim_of(&declared), Ok(1));
        let single = FiniteClass::new(2, vec![vec![Label::Negative; 2]]).unwrap();
        assert!(ConceptClass::finite(single, TiePolicy::FirstConsistent).is_err());
    }

    #[test]
    fn consistent_sets() {
        let class = singletons(4);
        assert_eq!(class.consistent_set(&[]).len(), class.len());
        // member #3 is the singleton on atom 3; every member differs on some atom in 1..=4
        let data: Vec<LabeledExample> = (1..=4).map(|a| atom(a, if a == 3 { 1 } else { -1 })).collect();
        assert_eq!(class.consistent_set(&data), vec![class.member(3)]);
        // target all-negative, atoms 0..=1 of a k=2 class seen, atom 2 unseen
        let small = singletons(2);
        let seen = [atom(0, -1), atom(1, -1), atom(1, -1)];
        assert_eq!(small.consistent_set(&seen), vec![small.member(0), small.member(2)]);
        assert!(small.consistent_set(&[atom(1, 1), atom(1, -1)]).is_empty());
    }

    #[test]
    fn adversarial_finite_picks_heaviest_unseen() {
        let class = singletons(3);
        let dist = Arc::new(
            FiniteDistribution::new((0..4).map(Point::Atom).collect(), vec![0.4, 0.3, 0.2, 0.1]).unwrap(),
        );
        let hidden = class.member(0);
        let policy = TiePolicy::Adversarial { hidden: hidden.clone(), dist };
        let cc = ConceptClass::finite(class.clone(), policy).unwrap();
        let h = erm(&cc, &[atom(0, -1), atom(1, -1)]).unwrap();
        assert_eq!(h, class.member(2));
        let first = erm(&cc.with_tie_policy(TiePolicy::FirstConsistent), &[atom(0, -1), atom(1, -1)]).unwrap();
        assert_eq!(first, hidden);
    }

    #[test]
    fn adversarial_threshold_stays_consistent() {
        let support: Vec<Point> = (0..10).map(|i| Point::Scalar(i as f64 / 10.0)).collect();
        let dist = Arc::new(FiniteDistribution::uniform(support).unwrap());
        let hidden = Hypothesis::Threshold { theta: 0.35 };
        let class = ConceptClass::threshold(TiePolicy::Adversarial { hidden, dist });
        let data = [ex(0.1, -1), ex(0.8, 1)];
        let h = erm(&class, &data).unwrap();
        assert!(h.is_consistent_with(&data));
        // theta = 0.8 mislabels 0.4 through 0.7; nothing consistent does worse
        assert_eq!(h, Hypothesis::Threshold { theta: 0.8 });
        assert!(matches!(
            erm(&ConceptClass::intervals(1, class.tie_policy().clone()).unwrap(), &data),
            Err(Error::Unsupported(_))
        ));
    }

    fn any_policy_for_threshold() -> impl Strategy<Value = TiePolicy> {
        prop_oneof![Just(TiePolicy::FirstConsistent), Just(TiePolicy::Midpoint)]
    }

    proptest! {
        #[test]
        fn threshold_erm_consistent_and_deterministic(
            theta in 0.0f64..1.0,
            xs in prop::collection::vec(0.0f64..1.0, 0..40),
            policy in any_policy_for_threshold(),
        ) {
            let target = Hypothesis::Threshold { theta };
            let data: Vec<LabeledExample> =
                xs.iter().map(|&v| LabeledExample::new(Point::Scalar(v), target.predict(&Point::Scalar(v)))).collect();
            let class = ConceptClass::threshold(policy);
            let h = erm(&class, &data).unwrap();
            prop_assert!(h.is_consistent_with(&data));
            prop_assert_eq!(h, erm(&class, &data).unwrap());
        }

        #[test]
        fn interval_erm_consistent(
            k in 1usize..4,
            cuts in prop::collection::vec(0.0f64..1.0, 2..8),
            xs in prop::collection::vec(0.0f64..1.0, 0..40),
            midpoint in any::<bool>(),
        ) {
            let mut cuts = cuts;
            cuts.sort_by(f64::total_cmp);
            let intervals: Vec<(f64, f64)> = cuts.chunks_exact(2).take(k).map(|c| (c[0], c[1])).collect();
            let target = Hypothesis::IntervalUnion { intervals };
            let data: Vec<LabeledExample> =
                xs.iter().map(|&v| LabeledExample::new(Point::Scalar(v), target.predict(&Point::Scalar(v)))).collect();
            let policy = if midpoint { TiePolicy::Midpoint } else { TiePolicy::FirstConsistent };
            let class = ConceptClass::intervals(k, policy).unwrap();
            let h = erm(&class, &data).unwrap();
            prop_assert!(h.is_consistent_with(&data));
        }

        #[test]
        fn adversarial_never_beats_first_consistent(
            k in 1usize..8,
            draws in prop::collection::vec(0usize..8, 0..12),
            weights in prop::collection::vec(0.05f64..1.0, 9),
        ) {
            let class = singletons(k);
            let w = &weights[..=k];
            let total: f64 = w.iter().sum();
            let mut mass: Vec<f64> = w.iter().map(|v| v / total).collect();
            let head: f64 = mass[..k].iter().sum();
            mass[k] = 1.0 - head;
            let dist = Arc::new(FiniteDistribution::new((0..=k).map(Point::Atom).collect(), mass).unwrap());
            let target = class.member(0);
            let points: Vec<Point> = draws.iter().map(|&a| Point::Atom(a % (k + 1))).collect();
            let data = if points.is_empty() {
                Vec::new()
            } else {
                TrainingSet::labeled_by(&points, &target).unwrap().examples().to_vec()
            };
            let adversarial = ConceptClass::finite(
                class.clone(),
                TiePolicy::Adversarial { hidden: target.clone(), dist: Arc::clone(&dist) },
            ).unwrap();
            let first = adversarial.clone().with_tie_policy(TiePolicy::FirstConsistent);
            let ha = erm(&adversarial, &data).unwrap();
            let hf = erm(&first, &data).unwrap();
            prop_assert!(ha.is_consistent_with(&data));
            prop_assert!(dist.disagreement(&ha, &target) >= dist.disagreement(&hf, &target));
        }
    }
}
