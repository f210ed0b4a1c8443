//! The recursive bucket construction and its representative pair `(F, P)`.
//!
//! A bucket is either the leftover bucket `C_0` (vectors whose distinct count
//! falls outside `[ceil(low m), floor(high m)]`) or the output of
//! [`build_bucket`] for a distinct-count target `d` and an ordered list `L` of
//! `C^j` distinct indices. Buckets are kept as predicate trees; vectors are
//! only materialized under an [`EnumerationBudget`]. All masses are exact
//! rationals.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::concepts::{erm, ConceptClass};
use crate::error::{Error, Result};
use crate::exact::{distinct_count_pmf, EnumerationBudget, IndexVectors};
use crate::model::{FiniteDistribution, Hypothesis, TrainingSet, VotingClassifier};
use crate::parallel::Execution;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketParams {
    /// Branching factor `C` of the list recursion.
    pub branching: usize,
    pub low_frac: Ratio<u64>,
    pub high_frac: Ratio<u64>,
    /// Lower end of the bootstrap-size regime `n_low_frac * m <= n <= m`.
    pub n_low_frac: Ratio<u64>,
}

impl Default for BucketParams {
    fn default() -> Self {
        Self {
            branching: 20,
            low_frac: Ratio::new(1, 100),
            high_frac: Ratio::new(9, 10),
            n_low_frac: Ratio::new(2, 100),
        }
    }
}

fn ceil_mul(frac: Ratio<u64>, m: usize) -> usize {
    let num = u128::from(*frac.numer()) * m as u128;
    let den = u128::from(*frac.denom());
    num.div_ceil(den) as usize
}

fn floor_mul(frac: Ratio<u64>, m: usize) -> usize {
    (u128::from(*frac.numer()) * m as u128 / u128::from(*frac.denom())) as usize
}

impl BucketParams {
    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 {
            return Err(Error::InvalidArgument(format!("branching factor {} must be at least 2", self.branching)));
        }
        let zero = Ratio::new(0, 1);
        let one = Ratio::new(1, 1);
        if !(zero < self.low_frac && self.low_frac < self.high_frac && self.high_frac < one) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < low_frac < high_frac < 1 (got {}, {})",
                self.low_frac, self.high_frac
            )));
        }
        Ok(())
    }

    /// `(ceil(low m), floor(high m))`.
    pub fn distinct_window(&self, m: usize) -> (usize, usize) {
        (ceil_mul(self.low_frac, m).max(1), floor_mul(self.high_frac, m))
    }

    /// `(C^j, j)` for the largest `C^j <= low m`; `(1, 0)` when `low m < 1`.
    pub fn list_shape(&self, m: usize) -> (usize, u32) {
        let cap = floor_mul(self.low_frac, m).max(1);
        let (mut len, mut level) = (1usize, 0u32);
        while let Some(next) = len.checked_mul(self.branching) {
            if next > cap {
                break;
            }
            len = next;
            level += 1;
        }
        (len, level)
    }

    /// `n_low_frac m <= n <= m`.
    pub fn n_in_regime(&self, m: usize, n: usize) -> bool {
        let lhs = u128::from(*self.n_low_frac.numer()) * m as u128;
        lhs <= u128::from(*self.n_low_frac.denom()) * n as u128 && n <= m
    }
}

/// `L`: `C^j` distinct indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexList {
    entries: Vec<usize>,
    branching: usize,
    level: u32,
}

impl IndexList {
    pub fn new(entries: Vec<usize>, branching: usize) -> Result<Self> {
        if branching < 2 {
            return Err(Error::InvalidArgument(format!("branching factor {branching} must be at least 2")));
        }
        let mut len = 1usize;
        let mut level = 0;
        while len < entries.len() {
            len = len.saturating_mul(branching);
            level += 1;
        }
        if entries.is_empty() || len != entries.len() {
            return Err(Error::InvalidList { len: entries.len(), branching });
        }
        let mut sorted = entries.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("index list entries must be distinct".into()));
        }
        Ok(Self { entries, branching, level })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One call of the recursion. `required` and `forbidden` are the `U` and `V`
/// in effect at the node; at a leaf `required` already includes `i_1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BucketNode {
    Leaf { list: Vec<usize>, required: Vec<usize>, forbidden: Vec<usize> },
    Union {
        list: Vec<usize>,
        required: Vec<usize>,
        forbidden: Vec<usize>,
        groups: Vec<Vec<usize>>,
        children: Vec<BucketNode>,
    },
}

impl BucketNode {
    fn build(list: &[usize], branching: usize, required: Vec<usize>, forbidden: Vec<usize>) -> BucketNode {
        if list.len() == 1 {
            let mut req = required;
            req.push(list[0]);
            req.sort_unstable();
            req.dedup();
            return BucketNode::Leaf { list: list.to_vec(), required: req, forbidden };
        }
        let groups: Vec<Vec<usize>> = list.chunks_exact(list.len() / branching).map(<[usize]>::to_vec).collect();
        let children = (1..branching)
            .map(|i| {
                let mut u = required.clone();
                for (g, group) in groups.iter().enumerate().skip(1) {
                    if g != i {
                        u.extend_from_slice(group);
                    }
                }
                u.sort_unstable();
                let mut v = forbidden.clone();
                v.extend_from_slice(&groups[i]);
                v.sort_unstable();
                BucketNode::build(&groups[0], branching, u, v)
            })
            .collect();
        BucketNode::Union { list: list.to_vec(), required, forbidden, groups, children }
    }

    pub fn leaves(&self) -> Vec<&BucketNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a BucketNode>) {
        match self {
            BucketNode::Leaf { .. } => out.push(self),
            BucketNode::Union { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    fn sets(&self) -> (&[usize], &[usize]) {
        match self {
            BucketNode::Leaf { required, forbidden, .. } | BucketNode::Union { required, forbidden, .. } => {
                (required, forbidden)
            }
        }
    }

    fn leaf_matches(&self, distinct: &[usize]) -> bool {
        let (required, forbidden) = self.sets();
        required.iter().all(|i| distinct.binary_search(i).is_ok())
            && forbidden.iter().all(|i| distinct.binary_search(i).is_err())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bucket {
    /// `C_0`: distinct count outside `[lo, hi]`.
    Leftover { m: usize, n: usize, lo: usize, hi: usize },
    Built { m: usize, n: usize, distinct_target: usize, list: IndexList, root: BucketNode },
    Explicit { m: usize, n: usize, vectors: Vec<Vec<usize>> },
}

fn distinct_sorted(v: &[usize]) -> Vec<usize> {
    let mut d = v.to_vec();
    d.sort_unstable();
    d.dedup();
    d
}

impl Bucket {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Bucket::Leftover { m, n, .. } | Bucket::Built { m, n, .. } | Bucket::Explicit { m, n, .. } => (*m, *n),
        }
    }

    pub fn contains(&self, v: &[usize]) -> bool {
        let (m, n) = self.shape();
        if v.len() != n || v.iter().any(|&i| i >= m) {
            return false;
        }
        match self {
            Bucket::Leftover { lo, hi, .. } => {
                let d = distinct_sorted(v).len();
                d < *lo || d > *hi
            }
            Bucket::Built { distinct_target, root, .. } => {
                let d = distinct_sorted(v);
                d.len() == *distinct_target && root.leaves().iter().any(|leaf| leaf.leaf_matches(&d))
            }
            Bucket::Explicit { vectors, .. } => vectors.iter().any(|u| u == v),
        }
    }

    /// Members in lexicographic order.
    pub fn members(&self, budget: EnumerationBudget) -> Result<Vec<Vec<usize>>> {
        let (m, n) = self.shape();
        if let Bucket::Explicit { vectors, .. } = self {
            let mut out = vectors.clone();
            out.sort();
            out.dedup();
            return Ok(out);
        }
        budget.admit(m, n)?;
        Ok(IndexVectors::new(m, n).filter(|v| self.contains(v)).collect())
    }

    /// A member built directly from a leaf predicate, without enumeration.
    pub fn witness(&self) -> Option<Vec<usize>> {
        match self {
            Bucket::Built { m, n, distinct_target, root, .. } => root.leaves().into_iter().find_map(|leaf| {
                let (required, forbidden) = leaf.sets();
                let d = *distinct_target;
                if d > *n || required.len() > d {
                    return None;
                }
                let mut support = required.to_vec();
                support.extend(
                    (0..*m)
                        .filter(|i| required.binary_search(i).is_err() && forbidden.binary_search(i).is_err())
                        .take(d - required.len()),
                );
                if support.len() != d {
                    return None;
                }
                support.sort_unstable();
                let mut v = support.clone();
                v.resize(*n, support[0]);
                Some(v)
            }),
            _ => self.members(EnumerationBudget::default()).ok()?.into_iter().next(),
        }
    }
}

/// BuildBucket_d(L, U, V) over `[m]^n`.
pub fn build_bucket(
    m: usize,
    n: usize,
    distinct_target: usize,
    list: &IndexList,
    required: &[usize],
    forbidden: &[usize],
) -> Result<Bucket> {
    let mut u = required.to_vec();
    u.sort_unstable();
    u.dedup();
    let mut v = forbidden.to_vec();
    v.sort_unstable();
    v.dedup();
    if u.iter().any(|i| v.binary_search(i).is_ok()) {
        return Err(Error::PreconditionViolated("required and forbidden sets intersect".into()));
    }
    if list.entries.iter().chain(&u).chain(&v).any(|&i| i >= m) {
        return Err(Error::InvalidArgument(format!("index out of range for m = {m}")));
    }
    let root = BucketNode::build(&list.entries, list.branching, u, v);
    Ok(Bucket::Built { m, n, distinct_target, list: list.clone(), root })
}

/// All ordered lists of `len` distinct indices from `0..m`, lexicographic.
pub fn ordered_lists(m: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, len: usize, prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(m, len, prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    if len <= m {
        rec(m, len, &mut Vec::with_capacity(len), &mut vec![false; m], &mut out);
    }
    out
}

fn falling_factorial(m: usize, len: usize) -> BigUint {
    (0..len).fold(BigUint::one(), |acc, i| acc * BigUint::from(m.saturating_sub(i)))
}

/// The representative pair: `C_0` plus one bucket per (target, list), with
/// bucket masses `Pr[|D| = d] / N_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketFamily {
    m: usize,
    n: usize,
    params: BucketParams,
    window: (usize, usize),
    list_len: usize,
    level: u32,
    lists_per_target: BigUint,
    c0_mass: BigRational,
    target_mass: BTreeMap<usize, BigRational>,
}

impl BucketFamily {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &BucketParams {
        &self.params
    }

    /// `(ceil(low m), floor(high m))`.
    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    pub fn list_len(&self) -> usize {
        self.list_len
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// `N_d = m (m-1) ... (m - l + 1)`.
    pub fn lists_per_target(&self) -> &BigUint {
        &self.lists_per_target
    }

    pub fn targets(&self) -> impl Iterator<Item = usize> + '_ {
        self.target_mass.keys().copied()
    }

    pub fn c0_mass(&self) -> &BigRational {
        &self.c0_mass
    }

    /// `Pr[|D| = d]`, the total mass spread over the target's buckets.
    pub fn target_mass(&self, d: usize) -> BigRational {
        self.target_mass.get(&d).cloned().unwrap_or_else(BigRational::zero)
    }

    /// `P(C_{d,L}) = Pr[|D| = d] / N_d`.
    pub fn bucket_mass(&self, d: usize) -> BigRational {
        self.target_mass(d) / BigRational::from(BigInt::from(self.lists_per_target.clone()))
    }

    pub fn total_mass(&self) -> BigRational {
        self.target_mass.values().fold(self.c0_mass.clone(), |acc, w| acc + w)
    }

    /// Number of buckets including `C_0`.
    pub fn bucket_count(&self) -> BigUint {
        BigUint::from(self.target_mass.len()) * &self.lists_per_target + BigUint::one()
    }

    pub fn c0(&self) -> Bucket {
        Bucket::Leftover { m: self.m, n: self.n, lo: self.window.0, hi: self.window.1 }
    }

    pub fn bucket(&self, distinct_target: usize, list: &[usize]) -> Result<Bucket> {
        if list.len() != self.list_len {
            return Err(Error::InvalidArgument(format!("list length {} but family uses {}", list.len(), self.list_len)));
        }
        let list = IndexList::new(list.to_vec(), self.params.branching)?;
        build_bucket(self.m, self.n, distinct_target, &list, &[], &[])
    }

    /// Every `(d, L, bucket)` in target then list order. Tiny scale only.
    pub fn built_buckets(&self, budget: EnumerationBudget) -> Result<Vec<(usize, Vec<usize>, Bucket)>> {
        let per_target = u128::try_from(&self.lists_per_target).unwrap_or(u128::MAX);
        budget.admit_count(per_target.saturating_mul(self.target_mass.len() as u128))?;
        let lists = ordered_lists(self.m, self.list_len);
        let mut out = Vec::new();
        for d in self.targets() {
            for list in &lists {
                out.push((d, list.clone(), self.bucket(d, list)?));
            }
        }
        Ok(out)
    }

    /// Replaces the mass of `C_0` (negative controls).
    pub fn with_c0_mass(mut self, mass: BigRational) -> Self {
        self.c0_mass = mass;
        self
    }

    /// Replaces `Pr[|D| = d]` for one target (negative controls).
    pub fn with_target_mass(mut self, d: usize, mass: BigRational) -> Self {
        self.target_mass.insert(d, mass);
        self
    }
}

pub fn assemble_family(m: usize, n: usize, params: &BucketParams) -> Result<BucketFamily> {
    params.validate()?;
    let pmf = distinct_count_pmf(m, n)?;
    let window = params.distinct_window(m);
    let (list_len, level) = params.list_shape(m);
    let target_mass: BTreeMap<usize, BigRational> = (window.0..=window.1).map(|d| (d, pmf.prob(d))).collect();
    let c0_mass = BigRational::one() - pmf.mass_between(window.0, window.1);
    Ok(BucketFamily {
        m,
        n,
        params: params.clone(),
        window,
        list_len,
        level,
        lists_per_target: falling_factorial(m, list_len),
        c0_mass,
        target_mass,
    })
}

/// `P(0) = Pr[|D(I)| < ceil(low m)] + Pr[|D(I)| > floor(high m)]`.
pub fn p0_mass(m: usize, n: usize, params: &BucketParams) -> Result<BigRational> {
    params.validate()?;
    let pmf = distinct_count_pmf(m, n)?;
    let (lo, hi) = params.distinct_window(m);
    Ok(BigRational::one() - pmf.mass_between(lo, hi))
}

pub fn one_sixth() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(6))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UniformityCounterexample {
    pub vector: Vec<usize>,
    /// Two-stage probability of `vector`, as `p/q`.
    pub probability: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UniformityReport {
    pub uniform: bool,
    pub vectors: usize,
    pub buckets: usize,
    pub empty_buckets_with_mass: usize,
    pub counterexample: Option<UniformityCounterexample>,
}

/// Precomputed membership of every vector of `[m]^n` in every bucket.
struct Membership {
    vectors: Vec<Vec<usize>>,
    c0: Vec<usize>,
    /// (target, list, member ranks)
    built: Vec<(usize, Vec<usize>, Vec<usize>)>,
}

fn membership(family: &BucketFamily, budget: EnumerationBudget) -> Result<Membership> {
    let total = budget.admit(family.m, family.n)?;
    let buckets = family.built_buckets(budget)?;
    budget.admit_count((buckets.len() as u128 + 1) * total as u128)?;
    let vectors: Vec<Vec<usize>> = IndexVectors::new(family.m, family.n).collect();
    let c0 = family.c0();
    let c0_members = (0..total).filter(|&r| c0.contains(&vectors[r])).collect();
    let built = Execution::default().map_range(buckets.len(), |b| {
        let (d, list, bucket) = &buckets[b];
        (*d, list.clone(), (0..total).filter(|&r| bucket.contains(&vectors[r])).collect())
    });
    Ok(Membership { vectors, c0: c0_members, built })
}

/// Draw a bucket from `P`, then a uniform member: checks that every vector of
/// `[m]^n` comes out with probability exactly `1/m^n`.
pub fn check_two_stage_uniform(family: &BucketFamily, budget: EnumerationBudget) -> Result<UniformityReport> {
    let mem = membership(family, budget)?;
    let total = mem.vectors.len();
    let mut acc = vec![BigRational::zero(); total];
    let mut empty_with_mass = 0;
    let mut spread = |members: &[usize], mass: &BigRational| {
        if mass.is_zero() {
            return;
        }
        if members.is_empty() {
            empty_with_mass += 1;
            return;
        }
        let share = mass / BigRational::from(BigInt::from(members.len()));
        for &r in members {
            acc[r] += &share;
        }
    };
    spread(&mem.c0, family.c0_mass());
    for (d, _, members) in &mem.built {
        spread(members, &family.bucket_mass(*d));
    }
    let expected = BigRational::new(BigInt::one(), BigInt::from(total));
    let counterexample = acc.iter().position(|p| *p != expected).map(|r| UniformityCounterexample {
        vector: mem.vectors[r].clone(),
        probability: acc[r].to_string(),
        expected: expected.to_string(),
    });
    Ok(UniformityReport {
        uniform: counterexample.is_none() && empty_with_mass == 0,
        vectors: total,
        buckets: mem.built.len() + 1,
        empty_buckets_with_mass: empty_with_mass,
        counterexample,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetSymmetry {
    pub distinct_target: usize,
    /// Distinct values of "number of buckets containing I" over I with |D(I)| = d.
    pub containment_counts: Vec<usize>,
    /// Distinct bucket sizes among the target's buckets.
    pub bucket_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub targets: Vec<TargetSymmetry>,
}

/// For each target: every vector with that distinct count lies in equally many
/// buckets, and the buckets have equal size.
pub fn check_bucket_symmetry(family: &BucketFamily, budget: EnumerationBudget) -> Result<SymmetryReport> {
    let mem = membership(family, budget)?;
    let mut targets = Vec::new();
    for d in family.targets() {
        let mut containing: HashMap<usize, usize> = mem
            .vectors
            .iter()
            .enumerate()
            .filter(|(_, v)| distinct_sorted(v).len() == d)
            .map(|(r, _)| (r, 0))
            .collect();
        let mut sizes = Vec::new();
        for (_, _, members) in mem.built.iter().filter(|(t, _, _)| *t == d) {
            sizes.push(members.len());
            for r in members {
                *containing.get_mut(r).expect("bucket member has the bucket's distinct count") += 1;
            }
        }
        let mut counts: Vec<usize> = containing.into_values().collect();
        counts.sort_unstable();
        counts.dedup();
        sizes.sort_unstable();
        sizes.dedup();
        targets.push(TargetSymmetry { distinct_target: d, containment_counts: counts, bucket_sizes: sizes });
    }
    let symmetric = targets.iter().all(|t| t.containment_counts.len() <= 1 && t.bucket_sizes.len() <= 1);
    Ok(SymmetryReport { symmetric, targets })
}

/// `g_{S(C)}`: one ERM member per vector of the bucket, lexicographic order.
pub fn bucket_voter(
    s: &TrainingSet,
    bucket: &Bucket,
    class: &ConceptClass,
    budget: EnumerationBudget,
) -> Result<VotingClassifier> {
    let (m, _) = bucket.shape();
    if m != s.len() {
        return Err(Error::InvalidArgument(format!("bucket indexes m = {m} but |S| = {}", s.len())));
    }
    let members = bucket.members(budget)?;
    if members.is_empty() {
        return Err(Error::EmptyBucket);
    }
    let hyps = Execution::default().try_map_range(members.len(), |i| erm(class, &s.select(&members[i])))?;
    VotingClassifier::new(hyps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginTransferPoint {
    pub support_index: usize,
    pub coordinate: f64,
    /// Exact `g_S(x)c(x)`.
    pub gs_margin: String,
    /// Exact `Pr_{C~P}[g_{S(C)}(x)c(x) <= 5/6 and C != C_0]`.
    pub transfer_mass: String,
    pub transfer_mass_value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginTransferReport {
    pub c0_mass: String,
    pub support_points: usize,
    pub checked: Vec<MarginTransferPoint>,
    pub violations: usize,
}

/// For every support point with `g_S(x)c(x) <= 1/3`, sums the `P`-mass of the
/// non-`C_0` buckets with `g_{S(C)}(x)c(x) <= 5/6` and checks it is at least 1/12.
pub fn margin_transfer_check(
    s: &TrainingSet,
    family: &BucketFamily,
    dist: &FiniteDistribution,
    concept: &Hypothesis,
    class: &ConceptClass,
    budget: EnumerationBudget,
) -> Result<MarginTransferReport> {
    if s.len() != family.m {
        return Err(Error::InvalidArgument(format!("family indexes m = {} but |S| = {}", family.m, s.len())));
    }
    if *family.c0_mass() > one_sixth() {
        return Err(Error::PreconditionViolated(format!("P(0) = {} exceeds 1/6", family.c0_mass())));
    }
    let mem = membership(family, budget)?;
    let total = mem.vectors.len();
    let hyps = Execution::default().try_map_range(total, |r| erm(class, &s.select(&mem.vectors[r])))?;
    let masses: Vec<BigRational> = mem.built.iter().map(|(d, _, _)| family.bucket_mass(*d)).collect();
    let twelfth = BigRational::new(BigInt::one(), BigInt::from(12));
    let mut checked = Vec::new();
    for (idx, x) in dist.support().iter().enumerate() {
        let y = concept.predict(x);
        let correct: Vec<bool> = hyps.iter().map(|h| h.predict(x) == y).collect();
        let c = correct.iter().filter(|&&b| b).count() as i64;
        let n_all = total as i64;
        // g_S(x)c(x) = (2c - N)/N <= 1/3
        if 3 * (2 * c - n_all) > n_all {
            continue;
        }
        let mut mass = BigRational::zero();
        for ((_, _, members), w) in mem.built.iter().zip(&masses) {
            if members.is_empty() || w.is_zero() {
                continue;
            }
            let size = members.len() as i64;
            let cb = members.iter().filter(|&&r| correct[r]).count() as i64;
            // (2cb - |C|)/|C| <= 5/6
            if 6 * (2 * cb - size) <= 5 * size {
                mass += w;
            }
        }
        let holds = mass >= twelfth;
        checked.push(MarginTransferPoint {
            support_index: idx,
            coordinate: x.coordinate(),
            gs_margin: BigRational::new(BigInt::from(2 * c - n_all), BigInt::from(n_all)).to_string(),
            transfer_mass_value: ratio_to_f64(&mass),
            transfer_mass: mass.to_string(),
            holds,
        });
    }
    let violations = checked.iter().filter(|p| !p.holds).count();
    Ok(MarginTransferReport {
        c0_mass: family.c0_mass().to_string(),
        support_points: dist.len(),
        checked,
        violations,
    })
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructuralReport {
    pub branching: usize,
    pub level: u32,
    pub list_len: usize,
    pub nodes: usize,
    pub leaves: usize,
    pub expected_leaves: usize,
    pub failures: Vec<String>,
}

impl StructuralReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Walks the recursion tree of BuildBucket(L, {}, {}) and checks its shape.
pub fn structural_checks(list: &IndexList) -> StructuralReport {
    let root = BucketNode::build(&list.entries, list.branching, Vec::new(), Vec::new());
    let mut report = StructuralReport {
        branching: list.branching,
        level: list.level,
        list_len: list.len(),
        nodes: 0,
        leaves: 0,
        expected_leaves: (list.branching - 1).pow(list.level),
        failures: Vec::new(),
    };
    let mut sorted_list = list.entries.clone();
    sorted_list.sort_unstable();
    walk(&root, &sorted_list, &mut report);
    if report.leaves != report.expected_leaves {
        report.failures.push(format!("{} leaves, expected {}", report.leaves, report.expected_leaves));
    }
    report
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_err())
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

fn walk(node: &BucketNode, full_list: &[usize], report: &mut StructuralReport) {
    report.nodes += 1;
    let (u, v) = node.sets();
    if !disjoint(u, v) {
        report.failures.push(format!("U and V intersect at a node with U = {u:?}"));
    }
    match node {
        BucketNode::Leaf { .. } => {
            report.leaves += 1;
            let mut union: Vec<usize> = u.iter().chain(v).copied().collect();
            union.sort_unstable();
            if union != full_list {
                report.failures.push(format!("leaf U ∪ V = {union:?} differs from L"));
            }
        }
        BucketNode::Union { groups, children, .. } => {
            let per_child: Vec<usize> = children.iter().map(|c| c.leaves().len()).collect();
            if per_child.windows(2).any(|w| w[0] != w[1]) {
                report.failures.push(format!("children hold unequal leaf counts {per_child:?}"));
            }
            for (ci, child) in children.iter().enumerate() {
                let excluded = ci + 1;
                for leaf in child.leaves() {
                    let (lu, lv) = leaf.sets();
                    for (g, group) in groups.iter().enumerate().skip(1) {
                        let mut sorted = group.clone();
                        sorted.sort_unstable();
                        let ok = if g == excluded { subset(&sorted, lv) } else { subset(&sorted, lu) };
                        if !ok {
                            report.failures.push(format!("group L_{g} split across U/V at a leaf under child {excluded}"));
                        }
                    }
                }
                walk(child, full_list, report);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::enumerate_gs;
    use crate::fixtures;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn tiny_params(branching: usize, low: (u64, u64), high: (u64, u64)) -> BucketParams {
        BucketParams {
            branching,
            low_frac: Ratio::new(low.0, low.1),
            high_frac: Ratio::new(high.0, high.1),
            ..BucketParams::default()
        }
    }

    #[test]
    fn params_window_and_shape() {
        let p = BucketParams::default();
        assert_eq!(p.distinct_window(100), (1, 90));
        assert_eq!(p.distinct_window(300), (3, 270));
        assert_eq!(p.distinct_window(1000), (10, 900));
        assert_eq!(p.list_shape(100), (1, 0));
        assert_eq!(p.list_shape(2000), (20, 1));
        assert_eq!(p.list_shape(40_000), (400, 2));
        assert_eq!(p.list_shape(50), (1, 0));
        assert!(p.n_in_regime(100, 2) && !p.n_in_regime(100, 1) && !p.n_in_regime(100, 101));
        assert!(tiny_params(1, (1, 3), (2, 3)).validate().is_err());
        assert!(tiny_params(2, (2, 3), (1, 3)).validate().is_err());
    }

    #[test]
    fn index_list_validation() {
        assert!(IndexList::new(vec![0, 1, 2], 2).is_err());
        assert_eq!(IndexList::new(vec![], 2), Err(Error::InvalidList { len: 0, branching: 2 }));
        assert!(IndexList::new(vec![1, 1], 2).is_err());
        assert_eq!(IndexList::new((0..9).collect(), 3).unwrap().level(), 2);
        assert_eq!(IndexList::new(vec![4], 20).unwrap().level(), 0);
    }

    #[test]
    fn leaf_bucket_on_three_indices() {
        let list = IndexList::new(vec![0], 2).unwrap();
        let b = build_bucket(3, 2, 2, &list, &[], &[]).unwrap();
        let members = b.members(EnumerationBudget::default()).unwrap();
        assert_eq!(members, vec![vec![0, 1], vec![0, 2], vec![1, 0], vec![2, 0]]);
    }

    #[test]
    fn twenty_way_bucket_structure() {
        let list = IndexList::new((0..20).collect(), 20).unwrap();
        let b = build_bucket(2000, 200, 100, &list, &[], &[]).unwrap();
        let Bucket::Built { root, .. } = &b else { unreachable!() };
        let leaves = root.leaves();
        assert_eq!(leaves.len(), 19);
        for (i, leaf) in leaves.iter().enumerate() {
            let (u, v) = leaf.sets();
            assert_eq!(u.len(), 19);
            assert!(u.contains(&0));
            assert_eq!(v, &[i + 1]);
        }
        assert!(b.witness().is_some_and(|w| b.contains(&w)));
    }

    #[test]
    fn small_target_gives_empty_bucket() {
        let list = IndexList::new((0..4).collect(), 2).unwrap();
        // leaves require one index, so a target of 0 distinct values is unreachable
        let b = build_bucket(6, 3, 0, &list, &[], &[]).unwrap();
        assert!(b.members(EnumerationBudget::default()).unwrap().is_empty());
        assert!(b.witness().is_none());
        assert!(build_bucket(6, 3, 2, &list, &[1], &[1]).is_err());
    }

    #[test]
    fn family_masses() {
        let f = assemble_family(100, 2, &BucketParams::default()).unwrap();
        assert_eq!(*f.c0_mass(), BigRational::zero());
        assert_eq!(f.list_len(), 1);
        assert_eq!(f.lists_per_target(), &BigUint::from(100u32));
        assert_eq!(f.total_mass(), BigRational::one());
        assert_eq!(f.bucket_mass(2), f.target_mass(2) / q(100, 1));
        let big = assemble_family(100, 100, &BucketParams::default()).unwrap();
        assert!(*big.c0_mass() <= one_sixth());
        assert_eq!(*big.c0_mass(), p0_mass(100, 100, &BucketParams::default()).unwrap());
    }

    #[test]
    fn p0_examples() {
        let p = BucketParams::default();
        assert_eq!(p0_mass(100, 2, &p).unwrap(), BigRational::zero());
        assert!(p0_mass(100, 100, &p).unwrap() <= one_sixth());
        assert!(p0_mass(200, 4, &p).unwrap() <= one_sixth());
    }

    #[test]
    fn p0_matches_enumeration_at_tiny_scale() {
        // independent route: classify every vector of [m]^n directly
        for fx in fixtures::tiny_bucket_fixtures() {
            let (lo, hi) = fx.params.distinct_window(fx.m);
            let total = IndexVectors::new(fx.m, fx.n).count() as i64;
            let outside = IndexVectors::new(fx.m, fx.n)
                .filter(|v| {
                    let d = distinct_sorted(v).len();
                    d < lo || d > hi
                })
                .count() as i64;
            assert_eq!(p0_mass(fx.m, fx.n, &fx.params).unwrap(), q(outside, total), "{}", fx.name);
        }
    }

    #[test]
    fn tiny_families_are_uniform_and_symmetric() {
        for fx in fixtures::tiny_bucket_fixtures() {
            let fam = assemble_family(fx.m, fx.n, &fx.params).unwrap();
            let r = check_two_stage_uniform(&fam, EnumerationBudget::default()).unwrap();
            assert!(r.uniform, "{}: {:?}", fx.name, r);
            let s = check_bucket_symmetry(&fam, EnumerationBudget::default()).unwrap();
            assert!(s.symmetric, "{}: {:?}", fx.name, s);
        }
    }

    #[test]
    fn m3_uniformity_gives_one_ninth() {
        let fam = assemble_family(3, 2, &tiny_params(2, (1, 3), (2, 3))).unwrap();
        let r = check_two_stage_uniform(&fam, EnumerationBudget::default()).unwrap();
        assert!(r.uniform);
        assert_eq!(r.vectors, 9);
    }

    #[test]
    fn corrupted_mass_is_caught() {
        let fam = assemble_family(3, 2, &tiny_params(2, (1, 3), (2, 3))).unwrap();
        let bad = fam.with_target_mass(2, q(1, 2));
        let r = check_two_stage_uniform(&bad, EnumerationBudget::default()).unwrap();
        assert!(!r.uniform);
        let ce = r.counterexample.unwrap();
        assert_eq!(distinct_sorted(&ce.vector).len(), 2);
        assert_ne!(ce.probability, ce.expected);
    }

    #[test]
    fn single_vector_space_is_uniform() {
        let fam = assemble_family(1, 3, &tiny_params(2, (1, 3), (2, 3))).unwrap();
        let r = check_two_stage_uniform(&fam, EnumerationBudget::default()).unwrap();
        assert!(r.uniform);
        assert_eq!(r.vectors, 1);
    }

    #[test]
    fn uniformity_respects_budget() {
        let fam = assemble_family(6, 6, &tiny_params(2, (1, 3), (2, 3))).unwrap();
        assert!(matches!(
            check_two_stage_uniform(&fam, EnumerationBudget::new(1000)),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn nonempty_in_window_at_tiny_scale() {
        for fx in fixtures::tiny_bucket_fixtures() {
            let fam = assemble_family(fx.m, fx.n, &fx.params).unwrap();
            for (d, list, b) in fam.built_buckets(EnumerationBudget::default()).unwrap() {
                if d <= fx.n {
                    let members = b.members(EnumerationBudget::default()).unwrap();
                    assert!(!members.is_empty(), "{} d={d} L={list:?}", fx.name);
                    assert!(b.witness().is_some_and(|w| b.contains(&w)));
                }
            }
        }
    }

    #[test]
    fn nonempty_at_default_scale_by_witness() {
        let p = BucketParams::default();
        for (m, n) in [(2000, 2000), (2000, 40), (40_000, 1000)] {
            let fam = assemble_family(m, n, &p).unwrap();
            let list: Vec<usize> = (0..fam.list_len()).rev().collect();
            let (lo, hi) = fam.window();
            for d in (lo..=hi.min(n)).step_by(37).chain([lo, hi.min(n)]) {
                let b = fam.bucket(d, &list).unwrap();
                let w = b.witness().unwrap_or_else(|| panic!("no witness at m={m} d={d}"));
                assert!(b.contains(&w));
            }
        }
    }

    #[test]
    fn bucket_voters() {
        let fx = fixtures::bucket_training_fixture(3);
        let budget = EnumerationBudget::default();
        let one = Bucket::Explicit { m: 3, n: 2, vectors: vec![vec![2, 0]] };
        let v = bucket_voter(&fx.sample, &one, &fx.class, budget).unwrap();
        assert_eq!(v.members(), &[erm(&fx.class, &fx.sample.select(&[2, 0])).unwrap()]);
        let everything = Bucket::Leftover { m: 3, n: 2, lo: 10, hi: 9 };
        let g = bucket_voter(&fx.sample, &everything, &fx.class, budget).unwrap();
        assert_eq!(g, enumerate_gs(&fx.sample, 2, &fx.class, budget).unwrap());
        let leaf = build_bucket(3, 2, 2, &IndexList::new(vec![0], 2).unwrap(), &[], &[]).unwrap();
        let lv = bucket_voter(&fx.sample, &leaf, &fx.class, budget).unwrap();
        assert_eq!(lv.len(), 4);
        assert_eq!(lv.members()[0], erm(&fx.class, &fx.sample.select(&[0, 1])).unwrap());
        let empty = Bucket::Explicit { m: 3, n: 2, vectors: vec![] };
        assert_eq!(bucket_voter(&fx.sample, &empty, &fx.class, budget), Err(Error::EmptyBucket));
    }

    #[test]
    fn margin_transfer_on_tiny_fixtures() {
        let mut checked = 0;
        for fx in fixtures::tiny_bucket_fixtures() {
            let fam = assemble_family(fx.m, fx.n, &fx.params).unwrap();
            if *fam.c0_mass() > one_sixth() {
                continue;
            }
            let tf = fixtures::bucket_training_fixture(fx.m);
            let r = margin_transfer_check(&tf.sample, &fam, &tf.dist, &tf.concept, &tf.class, EnumerationBudget::default())
                .unwrap();
            checked += r.checked.len();
            assert_eq!(r.violations, 0, "{}: {:?}", fx.name, r);
        }
        assert!(checked > 0, "no fixture has a support point with g_S margin <= 1/3");
    }

    #[test]
    fn margin_transfer_rejects_heavy_c0() {
        let fx = &fixtures::tiny_bucket_fixtures()[0];
        let fam = assemble_family(fx.m, fx.n, &fx.params).unwrap().with_c0_mass(q(1, 5));
        let tf = fixtures::bucket_training_fixture(fx.m);
        assert!(matches!(
            margin_transfer_check(&tf.sample, &fam, &tf.dist, &tf.concept, &tf.class, EnumerationBudget::default()),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn structure_reports() {
        let r1 = structural_checks(&IndexList::new((0..20).collect(), 20).unwrap());
        assert!(r1.passed(), "{:?}", r1.failures);
        assert_eq!(r1.leaves, 19);
        let r2 = structural_checks(&IndexList::new((0..400).collect(), 20).unwrap());
        assert!(r2.passed(), "{:?}", r2.failures);
        assert_eq!(r2.leaves, 361);
        let r0 = structural_checks(&IndexList::new(vec![7], 20).unwrap());
        assert!(r0.passed());
        assert_eq!(r0.leaves, 1);
        let r3 = structural_checks(&IndexList::new((0..27).rev().collect(), 3).unwrap());
        assert!(r3.passed(), "{:?}", r3.failures);
        assert_eq!(r3.leaves, 8);
    }

    #[test]
    fn leaf_sets_at_level_zero() {
        let list = IndexList::new(vec![7], 20).unwrap();
        let root = BucketNode::build(list.entries(), 20, Vec::new(), Vec::new());
        assert_eq!(root, BucketNode::Leaf { list: vec![7], required: vec![7], forbidden: vec![] });
    }
}
