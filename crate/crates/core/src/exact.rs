//! Exact reconstruction of the all-bootstraps voter and of distinct-count
//! distributions for index vectors drawn uniformly from `[m]^n`.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::concepts::{erm, ConceptClass};
use crate::error::{Error, Result};
use crate::learners::{bagging_train_with, draw_bootstrap_plan};
use crate::model::{margin_loss_exact, FiniteDistribution, Hypothesis, MarginThreshold, TrainingSet, VotingClassifier};
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnumerationBudget {
    pub max_vectors: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self { max_vectors: 1_000_000 }
    }
}

impl EnumerationBudget {
    pub fn new(max_vectors: u64) -> Self {
        Self { max_vectors }
    }

    /// `m^n` if it fits the budget.
    pub fn admit(&self, m: usize, n: usize) -> Result<usize> {
        let required = vector_count(m, n).unwrap_or(u128::MAX);
        self.admit_count(required)
    }

    pub fn admit_count(&self, required: u128) -> Result<usize> {
        if required > u128::from(self.max_vectors) {
            Err(Error::BudgetExceeded { required, budget: self.max_vectors })
        } else {
            Ok(required as usize)
        }
    }
}

/// `m^n`, or `None` on overflow.
pub fn vector_count(m: usize, n: usize) -> Option<u128> {
    (m as u128).checked_pow(u32::try_from(n).ok()?)
}

/// The vector of lexicographic rank `rank` in `[m]^n` (first entry most significant).
pub fn decode_vector(mut rank: usize, m: usize, n: usize) -> Vec<usize> {
    let mut v = vec![0; n];
    for slot in v.iter_mut().rev() {
        *slot = rank % m;
        rank /= m;
    }
    v
}

/// All of `[m]^n` in lexicographic order.
#[derive(Debug, Clone)]
pub struct IndexVectors {
    m: usize,
    current: Option<Vec<usize>>,
}

impl IndexVectors {
    pub fn new(m: usize, n: usize) -> Self {
        let current = (m > 0 && n > 0).then(|| vec![0; n]);
        Self { m, current }
    }
}

impl Iterator for IndexVectors {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut pos = cur.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < self.m {
                break;
            }
            cur[pos] = 0;
        }
        Some(out)
    }
}

/// `|D(I)|`, the number of distinct entries.
pub fn distinct_count(v: &[usize]) -> usize {
    let mut sorted = v.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

/// `g_S`: one ERM member per `I` in `[m]^n`, lexicographic order.
pub fn enumerate_gs(
    s: &TrainingSet,
    n: usize,
    class: &ConceptClass,
    budget: EnumerationBudget,
) -> Result<VotingClassifier> {
    enumerate_gs_with(s, n, class, budget, Execution::default())
}

pub fn enumerate_gs_with(
    s: &TrainingSet,
    n: usize,
    class: &ConceptClass,
    budget: EnumerationBudget,
    exec: Execution,
) -> Result<VotingClassifier> {
    let m = s.len();
    if n == 0 {
        return Err(Error::InvalidArgument("bootstrap size n must be at least 1".into()));
    }
    let total = budget.admit(m, n)?;
    let members = exec.try_map_range(total, |rank| erm(class, &s.select(&decode_vector(rank, m, n))))?;
    VotingClassifier::new(members)
}

/// Stirling numbers of the second kind `S2(n, k)` for `k = 0..=n`.
pub fn stirling2_row(n: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for i in 1..=n {
        let mut next = vec![BigUint::zero(); i + 1];
        for k in 1..=i {
            let mut v = if k < i { &row[k] * BigUint::from(k) } else { BigUint::zero() };
            v += &row[k - 1];
            next[k] = v;
        }
        row = next;
    }
    row
}

/// `S2(n, k)` via `S2(n, k) = k S2(n-1, k) + S2(n-1, k-1)`.
pub fn stirling2(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    stirling2_row(n).swap_remove(k)
}

/// Exact law of `|D(I)|` for `I` uniform in `[m]^n`, kept as vector counts
/// over the common denominator `m^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistinctCountPmf {
    m: usize,
    n: usize,
    /// Entry `k - 1` counts the vectors with `|D(I)| = k`, `k = 1..=min(m, n)`.
    counts: Vec<BigUint>,
    total: BigUint,
}

impl DistinctCountPmf {
    fn from_counts(m: usize, n: usize, counts: Vec<BigUint>) -> Self {
        Self { m, n, counts, total: BigUint::from(m).pow(n as u32) }
    }

    fn ratio(&self, numerator: BigUint) -> BigRational {
        BigRational::new(numerator.into(), self.total.clone().into())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `Pr[|D(I)| = k]`; zero outside `1..=min(m, n)`.
    pub fn prob(&self, k: usize) -> BigRational {
        match k.checked_sub(1).and_then(|i| self.counts.get(i)) {
            Some(c) => self.ratio(c.clone()),
            None => BigRational::zero(),
        }
    }

    /// Number of vectors in `[m]^n` with exactly `k` distinct entries.
    pub fn count(&self, k: usize) -> BigUint {
        k.checked_sub(1).and_then(|i| self.counts.get(i)).cloned().unwrap_or_default()
    }

    pub fn max_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> BigRational {
        self.ratio(self.counts.iter().sum())
    }

    /// `Pr[lo <= |D(I)| <= hi]`.
    pub fn mass_between(&self, lo: usize, hi: usize) -> BigRational {
        let hi = hi.min(self.max_count());
        let lo = lo.max(1);
        if lo > hi {
            return BigRational::zero();
        }
        self.ratio(self.counts[lo - 1..hi].iter().sum())
    }

    pub fn probabilities(&self) -> impl Iterator<Item = (usize, BigRational)> + '_ {
        (1..=self.max_count()).map(|k| (k, self.prob(k)))
    }
}

/// `Pr[|D| = k] = C(m, k) S2(n, k) k! / m^n`, with `C(m, k) k!` as a falling factorial.
pub fn distinct_count_pmf(m: usize, n: usize) -> Result<DistinctCountPmf> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("m and n must be positive (got {m}, {n})")));
    }
    let row = stirling2_row(n);
    let kmax = m.min(n);
    let mut falling = BigUint::one();
    let mut counts = Vec::with_capacity(kmax);
    for (k, s2) in row.iter().enumerate().take(kmax + 1).skip(1) {
        falling *= BigUint::from(m - k + 1);
        counts.push(&falling * s2);
    }
    Ok(DistinctCountPmf::from_counts(m, n, counts))
}

/// Independent oracle for [`distinct_count_pmf`]: count every vector of `[m]^n`.
pub fn distinct_count_pmf_bruteforce(m: usize, n: usize, budget: EnumerationBudget) -> Result<DistinctCountPmf> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("m and n must be positive (got {m}, {n})")));
    }
    budget.admit(m, n)?;
    let mut counts = vec![0u64; m.min(n)];
    // In-place odometer over [m]^n; `occ` holds each index's multiplicity so the
    // distinct count changes by at most one per digit update.
    let mut v = vec![0usize; n];
    let mut occ = vec![0usize; m];
    occ[0] = n;
    let mut distinct = 1;
    loop {
        counts[distinct - 1] += 1;
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(DistinctCountPmf::from_counts(m, n, counts.into_iter().map(BigUint::from).collect()));
            }
            pos -= 1;
            let old = v[pos];
            let new = if old + 1 == m { 0 } else { old + 1 };
            occ[old] -= 1;
            if occ[old] == 0 {
                distinct -= 1;
            }
            if occ[new] == 0 {
                distinct += 1;
            }
            occ[new] += 1;
            v[pos] = new;
            if new != 0 {
                break;
            }
        }
    }
}

/// Smallest `t` for which the margin-to-loss transfer is claimed: `ceil(18 ln(m/delta))`.
pub fn margin_transfer_min_t(m: usize, delta: f64) -> usize {
    (18.0 * (m as f64 / delta).ln()).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossTransferReport {
    pub m: usize,
    pub n: usize,
    pub t: usize,
    pub t_min: usize,
    pub trials: usize,
    pub delta: f64,
    /// Exact `L^{1/3}_D(g_S)`.
    pub gs_loss_one_third: f64,
    pub violations: usize,
    pub violation_rate: f64,
    /// `delta + 2 sqrt(delta (1 - delta) / trials)`.
    pub allowed_rate: f64,
    pub pass: bool,
}

/// Draws `trials` bootstrap plans and counts how often
/// `L_D(f_{S,B}) > L^{1/3}_D(g_S) + 1/m`.
#[allow(clippy::too_many_arguments)]
pub fn verify_margin_to_loss<R: Rng + ?Sized>(
    s: &TrainingSet,
    n: usize,
    t: usize,
    delta: f64,
    trials: usize,
    dist: &FiniteDistribution,
    concept: &Hypothesis,
    class: &ConceptClass,
    rng: &mut R,
    budget: EnumerationBudget,
) -> Result<LossTransferReport> {
    let m = s.len();
    if !(delta > 0.0 && delta < 1.0) || trials == 0 {
        return Err(Error::InvalidArgument(format!("need delta in (0, 1) and trials >= 1 (got {delta}, {trials})")));
    }
    let t_min = margin_transfer_min_t(m, delta);
    if t < t_min {
        return Err(Error::PreconditionViolated(format!("t = {t} is below ceil(18 ln(m/delta)) = {t_min}")));
    }
    let gs = enumerate_gs(s, n, class, budget)?;
    let gs_loss = margin_loss_exact(&gs, dist, concept, MarginThreshold::new(1.0 / 3.0)?);
    let bound = gs_loss + 1.0 / m as f64;
    let plans = (0..trials).map(|_| draw_bootstrap_plan(m, n, t, rng)).collect::<Result<Vec<_>>>()?;
    let violations = Execution::default().try_map_range(trials, |i| {
        let f = bagging_train_with(s, &plans[i], class, Execution::Sequential)?;
        let loss = margin_loss_exact(&f, dist, concept, MarginThreshold::ZERO);
        // tolerance absorbs float summation order, not the bound
        Ok::<bool, Error>(loss > bound + 1e-12)
    })?;
    let violations = violations.into_iter().filter(|&v| v).count();
    let violation_rate = violations as f64 / trials as f64;
    let allowed_rate = delta + 2.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok(LossTransferReport {
        m,
        n,
        t,
        t_min,
        trials,
        delta,
        gs_loss_one_third: gs_loss,
        violations,
        violation_rate,
        allowed_rate,
        pass: violation_rate <= allowed_rate,
    })
}
