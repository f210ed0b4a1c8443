//! Monte Carlo loss estimates, margin histograms, log-log slope fits and the
//! realizable VC bound.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::SourceDistribution;
use crate::error::{Error, Result};
use crate::model::{Classifier, Hypothesis, Label, Point, VotingClassifier};
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossEstimate {
    pub point_estimate: f64,
    pub ci_halfwidth: f64,
    pub n_samples: usize,
    pub confidence: f64,
}

impl LossEstimate {
    pub fn covers(&self, value: f64) -> bool {
        (self.point_estimate - value).abs() <= self.ci_halfwidth
    }
}

/// Two-sided Hoeffding half-width `sqrt(ln(2/(1-confidence)) / (2n))`.
pub fn hoeffding_halfwidth(n_samples: usize, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * n_samples as f64)).sqrt()
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence {confidence} outside (0, 1)")))
    }
}

/// Labeled evaluation points, drawn once and shared by every classifier scored
/// at the same cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    points: Vec<(Point, Label)>,
}

impl EvalSet {
    pub fn draw<R: Rng + ?Sized>(
        dist: &SourceDistribution,
        concept: &Hypothesis,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
        }
        let points = (0..n_samples)
            .map(|_| {
                let x = dist.sample(rng);
                (x, concept.predict(&x))
            })
            .collect();
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(Point, Label)] {
        &self.points
    }

    pub fn error_count<C: Classifier + ?Sized>(&self, h: &C, exec: Execution) -> u64 {
        const CHUNK: usize = 4096;
        let chunks = self.points.len().div_ceil(CHUNK);
        exec.sum_range(chunks, |c| {
            let end = ((c + 1) * CHUNK).min(self.points.len());
            self.points[c * CHUNK..end].iter().filter(|(x, y)| h.errs_on(x, *y)).count() as u64
        })
    }

    pub fn loss<C: Classifier + ?Sized>(&self, h: &C, confidence: f64, exec: Execution) -> Result<LossEstimate> {
        check_confidence(confidence)?;
        let n = self.points.len();
        Ok(LossEstimate {
            point_estimate: self.error_count(h, exec) as f64 / n as f64,
            ci_halfwidth: hoeffding_halfwidth(n, confidence),
            n_samples: n,
            confidence,
        })
    }
}

/// Fraction of `n_samples` fresh draws on which `h` errs (ties count as errors).
pub fn mc_loss<C: Classifier + ?Sized, R: Rng + ?Sized>(
    h: &C,
    dist: &SourceDistribution,
    concept: &Hypothesis,
    n_samples: usize,
    confidence: f64,
    rng: &mut R,
) -> Result<LossEstimate> {
    check_confidence(confidence)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let errors = match dist.as_finite() {
        // score each atom once, then only sample indices
        Some(finite) => {
            let wrong: Vec<bool> =
                finite.support().iter().map(|x| h.errs_on(x, concept.predict(x))).collect();
            (0..n_samples).filter(|_| wrong[dist.sample_index(rng).expect("finite distribution")]).count()
        }
        None => (0..n_samples)
            .filter(|_| {
                let x = dist.sample(rng);
                h.errs_on(&x, concept.predict(&x))
            })
            .count(),
    };
    Ok(LossEstimate {
        point_estimate: errors as f64 / n_samples as f64,
        ci_halfwidth: hoeffding_halfwidth(n_samples, confidence),
        n_samples,
        confidence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginHistogram {
    pub voters: u64,
    pub n_samples: usize,
    /// Equal-width bins over `[-1, 1]`; the last bin is closed.
    pub bins: Vec<u64>,
    /// Exact counts keyed by the signed vote sum `y * sum_i h_i(x)`.
    pub lattice: BTreeMap<i64, u64>,
}

impl MarginHistogram {
    /// Empirical `Pr[f(x)c(x) <= gamma]`.
    pub fn cumulative(&self, gamma: f64) -> f64 {
        let t = self.voters as f64;
        let below: u64 = self.lattice.iter().filter(|(s, _)| **s as f64 / t <= gamma).map(|(_, c)| c).sum();
        below as f64 / self.n_samples as f64
    }

    /// Distinct margin values observed, ascending.
    pub fn support(&self) -> Vec<f64> {
        self.lattice.keys().map(|&s| s as f64 / self.voters as f64).collect()
    }
}

pub fn margin_histogram<R: Rng + ?Sized>(
    f: &VotingClassifier,
    dist: &SourceDistribution,
    concept: &Hypothesis,
    n_samples: usize,
    bins: usize,
    rng: &mut R,
) -> Result<MarginHistogram> {
    if bins == 0 || n_samples == 0 {
        return Err(Error::InvalidArgument("bins and n_samples must be at least 1".into()));
    }
    let t = f.len() as u64;
    let mut lattice = BTreeMap::new();
    for _ in 0..n_samples {
        let x = dist.sample(rng);
        let (sum, _) = f.vote(&x);
        *lattice.entry(sum * concept.predict(&x).sign()).or_insert(0) += 1;
    }
    let mut counts = vec![0u64; bins];
    for (&s, &c) in &lattice {
        let margin = s as f64 / t as f64;
        let b = (((margin + 1.0) / 2.0) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += c;
    }
    Ok(MarginHistogram { voters: t, n_samples, bins: counts, lattice })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `ln(loss)` against `ln(m)`.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    if let Some((m, _)) = points.iter().find(|(_, l)| *l <= 0.0) {
        return Err(Error::DegenerateInput(format!("zero loss at m = {m}")));
    }
    if points.iter().any(|(m, l)| !(m.is_finite() && *m > 0.0 && l.is_finite())) {
        return Err(Error::DegenerateInput("slope fit needs finite positive m and loss".into()));
    }
    let xs: Vec<f64> = points.iter().map(|(m, _)| m.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, l)| l.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("all m values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot <= f64::EPSILON * n { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit { slope, intercept, r2, points: points.len() })
}

/// `(2/m)(d lg(2em/d) + lg(2/delta))`.
pub fn blumer_bound(m: f64, vc_dim: usize, delta: f64) -> Result<f64> {
    if m.is_nan() || m < 1.0 || vc_dim == 0 || !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need m >= 1, vc_dim >= 1, delta in (0, 1) (got {m}, {vc_dim}, {delta})"
        )));
    }
    let d = vc_dim as f64;
    Ok((2.0 / m) * (d * (2.0 * std::f64::consts::E * m / d).log2() + (2.0 / delta).log2()))
}

/// `10^9 (d + ln(1/delta))`.
pub fn reference_sample_size(vc_dim: usize, delta: f64) -> f64 {
    1e9 * (vc_dim as f64 + (1.0 / delta).ln())
}
