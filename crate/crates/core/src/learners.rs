//! Plain ERM, bagging with bootstrap plans, and Hanneke's Sub-Sample learner.
//!
//! Index vectors are 0-based: entry `i` selects `S.examples()[i]`.

use rand::Rng;
use serde::Serialize;

use crate::concepts::{erm, ConceptClass};
use crate::error::{Error, Result};
use crate::model::{TrainingSet, VotingClassifier};
use crate::parallel::Execution;

/// `I = (i_1, ..., i_n)` with entries in `0..m`, repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexVector {
    m: usize,
    entries: Vec<usize>,
}

impl IndexVector {
    pub fn new(m: usize, entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("index vector must have at least one entry".into()));
        }
        if let Some(&bad) = entries.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidArgument(format!("index {bad} out of range for m = {m}")));
        }
        Ok(Self { m, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `B = (I_1, ..., I_t)`, all over the same `(m, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapPlan {
    m: usize,
    n: usize,
    vectors: Vec<IndexVector>,
}

impl BootstrapPlan {
    pub fn new(vectors: Vec<IndexVector>) -> Result<Self> {
        let first = vectors.first().ok_or_else(|| Error::InvalidArgument("plan needs t >= 1 vectors".into()))?;
        let (m, n) = (first.m, first.len());
        if vectors.iter().any(|v| v.m != m || v.len() != n) {
            return Err(Error::InvalidArgument("all plan vectors must share (m, n)".into()));
        }
        Ok(Self { m, n, vectors })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[IndexVector] {
        &self.vectors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaggingParams {
    pub n: usize,
    pub t: usize,
    pub delta: f64,
}

impl BaggingParams {
    /// Whether `0.02m <= n <= m` and `t >= ceil(18 ln(2m/delta))`.
    pub fn default_regime(&self, m: usize) -> bool {
        // 0.02m <= n  <=>  2m <= 100n, kept in integers
        2 * m <= 100 * self.n && self.n <= m && self.t >= default_t(m, self.delta)
    }
}

/// `ceil(18 ln(2m / delta))` voters.
pub fn default_t(m: usize, delta: f64) -> usize {
    (18.0 * (2.0 * m as f64 / delta).ln()).ceil() as usize
}

/// `t` vectors of `n` i.i.d. uniform indices in `0..m`, drawn vector by vector.
pub fn draw_bootstrap_plan<R: Rng + ?Sized>(m: usize, n: usize, t: usize, rng: &mut R) -> Result<BootstrapPlan> {
    if m == 0 || n == 0 || t == 0 {
        return Err(Error::InvalidArgument(format!("m, n, t must be positive (got {m}, {n}, {t})")));
    }
    let vectors = (0..t)
        .map(|_| IndexVector { m, entries: (0..n).map(|_| rng.random_range(0..m)).collect() })
        .collect();
    BootstrapPlan::new(vectors)
}

/// ERM on the whole sample.
pub fn erm_train(s: &TrainingSet, class: &ConceptClass) -> Result<VotingClassifier> {
    VotingClassifier::new(vec![erm(class, s.examples())?])
}

/// `f_{S,B}`: one ERM member per bootstrap vector, in plan order.
pub fn bagging_train(s: &TrainingSet, plan: &BootstrapPlan, class: &ConceptClass) -> Result<VotingClassifier> {
    bagging_train_with(s, plan, class, Execution::default())
}

pub fn bagging_train_with(
    s: &TrainingSet,
    plan: &BootstrapPlan,
    class: &ConceptClass,
    exec: Execution,
) -> Result<VotingClassifier> {
    if plan.m != s.len() {
        return Err(Error::InvalidArgument(format!("plan indexes m = {} but |S| = {}", plan.m, s.len())));
    }
    let members = exec.try_map_range(plan.t(), |i| erm(class, &s.select(plan.vectors[i].entries())))?;
    VotingClassifier::new(members)
}

pub fn is_power_of_four(x: usize) -> bool {
    x.is_power_of_two() && x.trailing_zeros().is_multiple_of(2)
}

/// Largest power of 4 not exceeding `m` (`m >= 1`).
pub fn floor_power_of_four(m: usize) -> usize {
    assert!(m >= 1, "floor_power_of_four of 0");
    let exp = (usize::BITS - 1 - m.leading_zeros()) & !1;
    1 << exp
}

/// Sub-Sample(U, V): recursive quarter splits; `U` must have power-of-4 size
/// and be disjoint from `V`. Each returned sub-sample is sorted.
pub fn hanneke_subsample(u: &[usize], v: &[usize]) -> Result<Vec<Vec<usize>>> {
    if !is_power_of_four(u.len()) {
        return Err(Error::InvalidSize(u.len()));
    }
    let mut u_sorted = u.to_vec();
    u_sorted.sort_unstable();
    if u_sorted.windows(2).any(|w| w[0] == w[1]) || v.iter().any(|x| u_sorted.binary_search(x).is_ok()) {
        return Err(Error::PreconditionViolated("U must be a set disjoint from V".into()));
    }
    let mut out = Vec::new();
    subsample_rec(&u_sorted, v.to_vec(), &mut out);
    Ok(out)
}

fn subsample_rec(u: &[usize], v: Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if u.len() < 4 {
        let mut set: Vec<usize> = u.iter().copied().chain(v).collect();
        set.sort_unstable();
        out.push(set);
        return;
    }
    let q = u.len() / 4;
    let groups: Vec<&[usize]> = u.chunks_exact(q).collect();
    for i in 1..=3 {
        let mut next_v = v.clone();
        for (j, g) in groups.iter().enumerate().skip(1) {
            if j != i {
                next_v.extend_from_slice(g);
            }
        }
        subsample_rec(groups[0], next_v, out);
    }
}

/// Majority vote of ERM over the Sub-Sample(S, {}) collection; `|S|` must be a power of 4.
pub fn hanneke_train(s: &TrainingSet, class: &ConceptClass) -> Result<VotingClassifier> {
    hanneke_train_with(s, class, Execution::default())
}

pub fn hanneke_train_with(s: &TrainingSet, class: &ConceptClass, exec: Execution) -> Result<VotingClassifier> {
    let all: Vec<usize> = (0..s.len()).collect();
    let subsamples = hanneke_subsample(&all, &[])?;
    let members = exec.try_map_range(subsamples.len(), |i| erm(class, &s.select(&subsamples[i])))?;
    VotingClassifier::new(members)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsampleStructureReport {
    pub m: usize,
    pub subsamples: usize,
    pub subsample_size: usize,
    pub nodes_checked: usize,
    /// At the root, how many sub-samples exclude each of U_1, U_2, U_3.
    pub root_exclusions: [usize; 3],
    pub failures: Vec<String>,
}

impl SubsampleStructureReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks Sub-Sample(0..m, {}) against its recursion tree: at every node each
/// sub-sample produced below it contains all of exactly two of U_1, U_2, U_3
/// and none of the third, and all sub-samples share one size.
pub fn hanneke_structure_check(m: usize) -> Result<SubsampleStructureReport> {
    let all: Vec<usize> = (0..m).collect();
    let subsamples = hanneke_subsample(&all, &[])?;
    let mut report = SubsampleStructureReport {
        m,
        subsamples: subsamples.len(),
        subsample_size: subsamples.first().map_or(0, Vec::len),
        nodes_checked: 0,
        root_exclusions: [0; 3],
        failures: Vec::new(),
    };
    if subsamples.iter().any(|s| s.len() != report.subsample_size) {
        report.failures.push("sub-samples differ in size".into());
    }
    // Node at depth k owns a contiguous block of 3^(levels-k) output sub-samples.
    let mut cursor = 0;
    check_node(&all, &subsamples, &mut cursor, 0, &mut report);
    if cursor != subsamples.len() {
        report.failures.push(format!("tree accounts for {cursor} of {} sub-samples", subsamples.len()));
    }
    Ok(report)
}

fn check_node(
    u: &[usize],
    subsamples: &[Vec<usize>],
    cursor: &mut usize,
    depth: usize,
    report: &mut SubsampleStructureReport,
) {
    if u.len() < 4 {
        *cursor += 1;
        return;
    }
    report.nodes_checked += 1;
    let q = u.len() / 4;
    let groups: Vec<&[usize]> = u.chunks_exact(q).collect();
    let start = *cursor;
    for _ in 1..=3 {
        check_node(groups[0], subsamples, cursor, depth + 1, report);
    }
    let block = &subsamples[start..*cursor];
    let per_child = block.len() / 3;
    for (pos, s) in block.iter().enumerate() {
        let contains = |g: &[usize]| g.iter().filter(|x| s.binary_search(x).is_ok()).count();
        let counts: Vec<usize> = groups[1..].iter().map(|g| contains(g)).collect();
        let full = counts.iter().filter(|&&c| c == q).count();
        let empty: Vec<usize> = (0..3).filter(|&g| counts[g] == 0).collect();
        if full != 2 || empty.len() != 1 {
            report.failures.push(format!(
                "node |U|={} depth {depth}: sub-sample {} holds {counts:?} of groups U_1..U_3",
                u.len(),
                start + pos
            ));
            continue;
        }
        let expected_excluded = pos / per_child.max(1);
        if empty[0] != expected_excluded {
            report.failures.push(format!(
                "node |U|={} depth {depth}: child {} excludes U_{} instead of U_{}",
                u.len(),
                expected_excluded + 1,
                empty[0] + 1,
                expected_excluded + 1
            ));
        }
        if depth == 0 {
            report.root_exclusions[empty[0]] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::TiePolicy;
    use crate::model::{Hypothesis, Label, LabeledExample, Point};
    use crate::rng::seeded;

    fn threshold_set(xs: &[f64]) -> TrainingSet {
        let c = Hypothesis::Threshold { theta: 0.5 };
        TrainingSet::labeled_by(&xs.iter().map(|&v| Point::Scalar(v)).collect::<Vec<_>>(), &c).unwrap()
    }

    #[test]
    fn default_t_values() {
        assert_eq!(default_t(100, 0.1), 137);
        assert_eq!(default_t(1, 1.0 - 1e-12), 13);
        for m in [1, 10, 1000] {
            for d in [0.5, 0.1, 0.01] {
                assert!(default_t(m, d / 2.0) >= default_t(m, d));
            }
        }
    }

    #[test]
    fn default_regime_flag() {
        let t = default_t(100, 0.05);
        assert!(BaggingParams { n: 2, t, delta: 0.05 }.default_regime(100));
        assert!(!BaggingParams { n: 1, t, delta: 0.05 }.default_regime(100));
        assert!(!BaggingParams { n: 101, t, delta: 0.05 }.default_regime(100));
        assert!(!BaggingParams { n: 50, t: t - 1, delta: 0.05 }.default_regime(100));
    }

    #[test]
    fn plan_m1_and_determinism() {
        let plan = draw_bootstrap_plan(1, 4, 3, &mut seeded(0)).unwrap();
        assert!(plan.vectors().iter().all(|v| v.entries().iter().all(|&i| i == 0)));
        let a = draw_bootstrap_plan(10, 5, 7, &mut seeded(11)).unwrap();
        let b = draw_bootstrap_plan(10, 5, 7, &mut seeded(11)).unwrap();
        assert_eq!(a, b);
        assert!(draw_bootstrap_plan(0, 1, 1, &mut seeded(0)).is_err());
    }

    #[test]
    fn plan_index_frequencies() {
        let plan = draw_bootstrap_plan(10, 100, 1000, &mut seeded(5)).unwrap();
        let mut counts = [0usize; 10];
        for v in plan.vectors() {
            for &i in v.entries() {
                counts[i] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.1).abs() <= 0.01);
        }
    }

    #[test]
    fn bagging_single_and_identical_members() {
        let s = threshold_set(&[0.1, 0.3, 0.6, 0.9]);
        let class = ConceptClass::threshold(TiePolicy::Midpoint);
        let v = IndexVector::new(4, vec![0, 2, 2]).unwrap();
        let single = bagging_train(&s, &BootstrapPlan::new(vec![v.clone()]).unwrap(), &class).unwrap();
        assert_eq!(single.members(), &[erm(&class, &s.select(&[0, 2, 2])).unwrap()]);
        let same = bagging_train(&s, &BootstrapPlan::new(vec![v; 5]).unwrap(), &class).unwrap();
        assert!(same.members().windows(2).all(|w| w[0] == w[1]));
        for x in [0.0, 0.2, 0.5, 0.7, 1.0] {
            let m = crate::model::margin(&same, &Point::Scalar(x), Label::Positive);
            assert!(m == 1.0 || m == -1.0);
        }
    }

    #[test]
    fn bagging_direct_expansion() {
        let s = threshold_set(&[0.2, 0.8]);
        let class = ConceptClass::threshold(TiePolicy::Midpoint);
        let plan = BootstrapPlan::new(vec![
            IndexVector::new(2, vec![0]).unwrap(),
            IndexVector::new(2, vec![1]).unwrap(),
        ])
        .unwrap();
        let f = bagging_train(&s, &plan, &class).unwrap();
        assert_eq!(f.members()[0], erm(&class, &s.examples()[..1]).unwrap());
        assert_eq!(f.members()[1], erm(&class, &s.examples()[1..]).unwrap());
        let wrong_m = BootstrapPlan::new(vec![IndexVector::new(3, vec![2]).unwrap()]).unwrap();
        assert!(bagging_train(&s, &wrong_m, &class).is_err());
    }

    #[test]
    fn bagging_sequential_equals_parallel() {
        let s = draw_set(64);
        let class = ConceptClass::threshold(TiePolicy::Midpoint);
        let plan = draw_bootstrap_plan(64, 32, 101, &mut seeded(8)).unwrap();
        let a = bagging_train_with(&s, &plan, &class, Execution::Sequential).unwrap();
        let b = bagging_train_with(&s, &plan, &class, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    fn draw_set(m: usize) -> TrainingSet {
        crate::datagen::draw_training_set(
            &crate::datagen::SourceDistribution::UniformUnit,
            &Hypothesis::Threshold { theta: 0.5 },
            m,
            &mut seeded(m as u64),
        )
        .unwrap()
    }

    #[test]
    fn subsample_base_case() {
        assert_eq!(hanneke_subsample(&[3], &[7, 9]).unwrap(), vec![vec![3, 7, 9]]);
    }

    #[test]
    fn subsample_one_level() {
        assert_eq!(
            hanneke_subsample(&[1, 2, 3, 4], &[]).unwrap(),
            vec![vec![1, 3, 4], vec![1, 2, 4], vec![1, 2, 3]]
        );
    }

    #[test]
    fn subsample_sizes() {
        let all: Vec<usize> = (0..256).collect();
        let subs = hanneke_subsample(&all, &[]).unwrap();
        assert_eq!(subs.len(), 81);
        assert!(subs.iter().all(|s| s.len() == 128 + 32 + 8 + 2 + 1));
        assert_eq!(hanneke_subsample(&(0..16).collect::<Vec<_>>(), &[]).unwrap().len(), 9);
    }

    #[test]
    fn subsample_rejects_bad_input() {
        assert_eq!(hanneke_subsample(&[0, 1, 2], &[]), Err(Error::InvalidSize(3)));
        assert_eq!(hanneke_subsample(&[], &[]), Err(Error::InvalidSize(0)));
        assert!(matches!(hanneke_subsample(&[0], &[0]), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn structure_checks_pass() {
        for m in [1, 4, 16, 64, 256] {
            let r = hanneke_structure_check(m).unwrap();
            assert!(r.passed(), "{:?}", r.failures);
            if m > 1 {
                let per = r.subsamples / 3;
                assert_eq!(r.root_exclusions, [per, per, per]);
            }
        }
    }

    #[test]
    fn hanneke_member_counts() {
        let class = ConceptClass::threshold(TiePolicy::Midpoint);
        assert_eq!(hanneke_train(&draw_set(4), &class).unwrap().len(), 3);
        assert_eq!(hanneke_train(&draw_set(16), &class).unwrap().len(), 9);
        let one = draw_set(1);
        let f = hanneke_train(&one, &class).unwrap();
        assert_eq!(f.members(), &[erm(&class, one.examples()).unwrap()]);
        assert_eq!(hanneke_train(&draw_set(8), &class), Err(Error::InvalidSize(8)));
    }

    #[test]
    fn power_of_four_helpers() {
        assert!(is_power_of_four(1) && is_power_of_four(4) && is_power_of_four(1024));
        assert!(!is_power_of_four(0) && !is_power_of_four(2) && !is_power_of_four(8));
        assert_eq!(floor_power_of_four(1), 1);
        assert_eq!(floor_power_of_four(3), 1);
        assert_eq!(floor_power_of_four(100), 64);
        assert_eq!(floor_power_of_four(256), 256);
        assert_eq!(floor_power_of_four(1000), 256);
    }

    #[test]
    fn duplicates_reach_erm() {
        let s = TrainingSet::new(vec![LabeledExample::new(Point::Scalar(0.7), Label::Positive)]).unwrap();
        let class = ConceptClass::threshold(TiePolicy::Midpoint);
        let plan = BootstrapPlan::new(vec![IndexVector::new(1, vec![0, 0, 0]).unwrap()]).unwrap();
        assert!(bagging_train(&s, &plan, &class).is_ok());
    }
}
