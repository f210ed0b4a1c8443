//! Config-driven runners behind the `sweep`, `exact` and `buckets` commands.
//!
//! Every random stream is derived from `(master_seed, purpose, indices)`, so a
//! cell's result does not depend on scheduling. Within one `(m, repetition)`
//! cell all arms see the same training draw and are scored on the same
//! evaluation points.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::buckets::{
    assemble_family, check_bucket_symmetry, check_two_stage_uniform, margin_transfer_check, one_sixth, p0_mass,
    ratio_to_f64, structural_checks, BucketParams, IndexList,
};
use crate::concepts::{ConceptClass, TiePolicy};
use crate::datagen::{draw_training_set, hard_instance, HardInstanceSpec, SourceDistribution};
use crate::error::{Error, Result};
use crate::estimation::{hoeffding_halfwidth, slope_fit, EvalSet, SlopeFit};
use crate::exact::{
    distinct_count_pmf, distinct_count_pmf_bruteforce, enumerate_gs_with, margin_transfer_min_t, vector_count,
    verify_margin_to_loss, EnumerationBudget, LossTransferReport,
};
use crate::fixtures;
use crate::learners::{
    bagging_train_with, default_t, draw_bootstrap_plan, erm_train, floor_power_of_four, hanneke_subsample,
    hanneke_train_with, BaggingParams,
};
use crate::model::{margin_loss_exact, FiniteDistribution, Hypothesis, MarginThreshold, Point, TrainingSet};
use crate::parallel::Execution;
use crate::rng::derive_rng;

pub const CSV_HEADER: &str = "arm,m,n,t,mean_loss,ci_halfwidth,repetitions,eval_samples,seed";
pub const MANIFEST_VERSION: u32 = 1;

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Erm,
    Bagging,
    Hanneke,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Erm => "erm",
            Arm::Bagging => "bagging",
            Arm::Hanneke => "hanneke",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NRule {
    pub fraction: f64,
}

impl Default for NRule {
    fn default() -> Self {
        Self { fraction: 0.5 }
    }
}

impl NRule {
    /// `ceil(fraction * m)`, clamped to `1..=m`.
    pub fn n_for(&self, m: usize) -> usize {
        ((self.fraction * m as f64).ceil() as usize).clamp(1, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TRule {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassSpec {
    #[default]
    Threshold,
    Intervals {
        k: usize,
    },
    HardInstance {
        k: usize,
        decay: f64,
        heavy_mass: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicySpec {
    FirstConsistent,
    #[default]
    Midpoint,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// `U[0, 1)`.
    #[default]
    Uniform,
    /// Scalar support; `mass` defaults to uniform.
    Finite {
        support: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Threshold(f64),
    Intervals(Vec<(f64, f64)>),
}

/// Class, sampling distribution and target assembled from a config.
#[derive(Debug, Clone)]
pub struct Problem {
    pub class: ConceptClass,
    pub source: SourceDistribution,
    pub target: Hypothesis,
}

fn build_problem(
    class: &ClassSpec,
    tie: TiePolicySpec,
    distribution: &DistributionSpec,
    target: Option<&TargetSpec>,
    explicit_distribution: bool,
) -> Result<Problem> {
    if let ClassSpec::HardInstance { k, decay, heavy_mass } = *class {
        if explicit_distribution || target.is_some() {
            return Err(config_err("class", "hard_instance fixes its own distribution and target"));
        }
        let inst = hard_instance(&HardInstanceSpec { k, decay, heavy_mass }).map_err(|e| config_err("class", e))?;
        let class = match tie {
            TiePolicySpec::Adversarial => inst.adversarial_class(),
            TiePolicySpec::FirstConsistent => inst.class.clone(),
            TiePolicySpec::Midpoint => {
                return Err(config_err("tie_policy", "midpoint applies to scalar classes only"));
            }
        };
        let source = SourceDistribution::finite(Arc::clone(&inst.distribution))?;
        return Ok(Problem { class, source, target: inst.target });
    }
    let finite = match distribution {
        DistributionSpec::Uniform => None,
        DistributionSpec::Finite { support, mass } => {
            let points = support
                .iter()
                .map(|&v| Point::scalar(v))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| config_err("distribution.support", e))?;
            let fd = match mass {
                None => FiniteDistribution::uniform(points),
                Some(mass) => FiniteDistribution::new(points, mass.clone()),
            }
            .map_err(|e| config_err("distribution", e))?;
            Some(Arc::new(fd))
        }
    };
    let target = match (class, target) {
        (_, None) => Hypothesis::Threshold { theta: 0.5 },
        (_, Some(TargetSpec::Threshold(theta))) => {
            if theta.is_nan() {
                return Err(config_err("target.threshold", "must be a number"));
            }
            Hypothesis::Threshold { theta: *theta }
        }
        (ClassSpec::Threshold, Some(TargetSpec::Intervals(_))) => {
            return Err(config_err("target", "interval target is not in the threshold class"));
        }
        (ClassSpec::Intervals { k }, Some(TargetSpec::Intervals(iv))) => {
            if iv.len() > *k || iv.iter().any(|(a, b)| a.is_nan() || b.is_nan() || a > b) {
                return Err(config_err("target.intervals", format!("need at most {k} intervals with lo <= hi")));
            }
            Hypothesis::IntervalUnion { intervals: iv.clone() }
        }
        (ClassSpec::HardInstance { .. }, _) => unreachable!("handled above"),
    };
    let policy = match tie {
        TiePolicySpec::FirstConsistent => TiePolicy::FirstConsistent,
        TiePolicySpec::Midpoint => TiePolicy::Midpoint,
        TiePolicySpec::Adversarial => match &finite {
            Some(dist) => TiePolicy::Adversarial { hidden: target.clone(), dist: Arc::clone(dist) },
            None => return Err(config_err("tie_policy", "adversarial needs a finite distribution")),
        },
    };
    let class = match class {
        ClassSpec::Threshold => ConceptClass::threshold(policy),
        ClassSpec::Intervals { k } => ConceptClass::intervals(*k, policy).map_err(|e| config_err("class.k", e))?,
        ClassSpec::HardInstance { .. } => unreachable!("handled above"),
    };
    let source = match finite {
        Some(dist) => SourceDistribution::finite(dist)?,
        None => SourceDistribution::UniformUnit,
    };
    Ok(Problem { class, source, target })
}

fn default_delta() -> f64 {
    0.05
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub m_grid: Vec<usize>,
    #[serde(default)]
    pub n_rule: NRule,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub t_rule: TRule,
    pub arms: Vec<Arm>,
    #[serde(default)]
    pub class: ClassSpec,
    #[serde(default)]
    pub tie_policy: TiePolicySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    pub eval_samples: usize,
    pub repetitions: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 20240101,
            m_grid: vec![64, 128, 256, 512],
            n_rule: NRule::default(),
            delta: default_delta(),
            t_rule: TRule::Auto,
            arms: vec![Arm::Erm, Arm::Bagging, Arm::Hanneke],
            class: ClassSpec::Threshold,
            tie_policy: TiePolicySpec::Midpoint,
            distribution: None,
            target: None,
            eval_samples: 10_000,
            repetitions: 20,
            confidence: default_confidence(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config, or the `config` member of a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = parse_json(text)?;
        let cfg: Self = if value.get("manifest_version").is_some() {
            let inner = value.get("config").ok_or_else(|| config_err("config", "manifest has no config"))?;
            serde_json::from_value(inner.clone()).map_err(|e| Error::Config(format!("manifest config: {e}")))?
        } else {
            parse_json(text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_grid.is_empty() {
            return Err(config_err("m_grid", "must not be empty"));
        }
        if self.m_grid[0] == 0 {
            return Err(config_err("m_grid", "sizes must be at least 1"));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("m_grid", "must be strictly ascending"));
        }
        if !(0.02..=1.0).contains(&self.n_rule.fraction) {
            return Err(config_err("n_rule.fraction", format!("{} outside [0.02, 1]", self.n_rule.fraction)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("delta", format!("{} outside (0, 1)", self.delta)));
        }
        if self.t_rule == TRule::Fixed(0) {
            return Err(config_err("t_rule.fixed", "must be at least 1"));
        }
        if self.arms.is_empty() {
            return Err(config_err("arms", "must name at least one arm"));
        }
        let mut arms = self.arms.clone();
        arms.sort();
        if arms.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("arms", "arms must be distinct"));
        }
        if self.arms.contains(&Arm::Hanneke) && self.m_grid[0] < 4 {
            return Err(config_err("m_grid", "hanneke arm needs m >= 4"));
        }
        if self.eval_samples == 0 {
            return Err(config_err("eval_samples", "must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(config_err("repetitions", "must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(config_err("confidence", format!("{} outside (0, 1)", self.confidence)));
        }
        self.problem().map(|_| ())
    }

    pub fn problem(&self) -> Result<Problem> {
        build_problem(
            &self.class,
            self.tie_policy,
            self.distribution.as_ref().unwrap_or(&DistributionSpec::Uniform),
            self.target.as_ref(),
            self.distribution.is_some(),
        )
    }

    pub fn t_for(&self, m: usize) -> usize {
        match self.t_rule {
            TRule::Auto => default_t(m, self.delta),
            TRule::Fixed(t) => t,
        }
    }
}

/// Shape of one arm at one requested `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPlan {
    pub arm: Arm,
    pub m_requested: usize,
    pub m_used: usize,
    pub n: usize,
    pub t: usize,
    /// Whether bagging's `(n, t)` meet `0.02m <= n <= m` and `t >= ceil(18 ln(2m/delta))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default_regime: Option<bool>,
}

fn arm_plans(cfg: &ExperimentConfig) -> Result<Vec<ArmPlan>> {
    let mut hanneke_shape: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut plans = Vec::new();
    for &m in &cfg.m_grid {
        for &arm in &cfg.arms {
            plans.push(match arm {
                Arm::Erm => ArmPlan { arm, m_requested: m, m_used: m, n: m, t: 1, default_regime: None },
                Arm::Bagging => {
                    let (n, t) = (cfg.n_rule.n_for(m), cfg.t_for(m));
                    let regime = BaggingParams { n, t, delta: cfg.delta }.default_regime(m);
                    ArmPlan { arm, m_requested: m, m_used: m, n, t, default_regime: Some(regime) }
                }
                Arm::Hanneke => {
                    let used = floor_power_of_four(m);
                    let (n, t) = match hanneke_shape.get(&used) {
                        Some(&shape) => shape,
                        None => {
                            let all: Vec<usize> = (0..used).collect();
                            let subs = hanneke_subsample(&all, &[])?;
                            let shape = (subs[0].len(), subs.len());
                            hanneke_shape.insert(used, shape);
                            shape
                        }
                    };
                    ArmPlan { arm, m_requested: m, m_used: used, n, t, default_regime: None }
                }
            });
        }
    }
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub arm: Arm,
    pub m: usize,
    pub n: usize,
    pub t: usize,
    pub mean_loss: f64,
    pub ci_halfwidth: f64,
    pub repetitions: usize,
    pub eval_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<SlopeFit>,
    /// Sizes whose mean loss was zero (below `1/(repetitions * eval_samples)`), left out of the fit.
    pub zero_loss_m: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub config: ExperimentConfig,
    pub plans: Vec<ArmPlan>,
    pub rows: Vec<SweepRow>,
    pub slope_fits: BTreeMap<Arm, SlopeSummary>,
    pub wall_clock_seconds: f64,
}

impl SweepOutcome {
    pub fn csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.arm.name(),
                r.m,
                r.n,
                r.t,
                r.mean_loss,
                r.ci_halfwidth,
                r.repetitions,
                r.eval_samples,
                r.seed
            );
        }
        out
    }

    pub fn manifest(&self, threads: usize) -> RunManifest {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config.clone(),
            arms: self.plans.clone(),
            rows: self.rows.clone(),
            slope_fits: self.slope_fits.iter().map(|(a, s)| (a.name().to_string(), s.clone())).collect(),
            seed_derivation: seed_derivation(),
            threads,
            wall_clock_seconds: self.wall_clock_seconds,
        }
    }

    pub fn row(&self, arm: Arm, m: usize) -> Option<&SweepRow> {
        self.rows.iter().zip(&self.plans).find(|(_, p)| p.arm == arm && p.m_requested == m).map(|(r, _)| r)
    }
}

fn seed_derivation() -> BTreeMap<String, String> {
    [
        ("train-set", "ChaCha8(SHA-256(master_seed, \"train-set\", [m, rep]))"),
        ("bootstrap", "ChaCha8(SHA-256(master_seed, \"bootstrap\", [m, rep]))"),
        ("eval", "ChaCha8(SHA-256(master_seed, \"eval\", [m, rep])), shared by all arms"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub arms: Vec<ArmPlan>,
    pub rows: Vec<SweepRow>,
    pub slope_fits: BTreeMap<String, SlopeSummary>,
    pub seed_derivation: BTreeMap<String, String>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
}

/// Errors of every arm on one `(m, repetition)` cell, in `cfg.arms` order.
fn run_cell(
    cfg: &ExperimentConfig,
    problem: &Problem,
    plans: &[ArmPlan],
    m: usize,
    rep: usize,
    exec: Execution,
) -> Result<Vec<u64>> {
    let key = [m as u64, rep as u64];
    let s = draw_training_set(&problem.source, &problem.target, m, &mut derive_rng(cfg.master_seed, "train-set", &key))?;
    let eval = EvalSet::draw(
        &problem.source,
        &problem.target,
        cfg.eval_samples,
        &mut derive_rng(cfg.master_seed, "eval", &key),
    )?;
    plans
        .iter()
        .map(|p| {
            let f = match p.arm {
                Arm::Erm => erm_train(&s, &problem.class)?,
                Arm::Bagging => {
                    let plan =
                        draw_bootstrap_plan(m, p.n, p.t, &mut derive_rng(cfg.master_seed, "bootstrap", &key))?;
                    bagging_train_with(&s, &plan, &problem.class, exec)?
                }
                Arm::Hanneke => hanneke_train_with(&s.prefix(p.m_used)?, &problem.class, exec)?,
            };
            Ok(eval.error_count(&f, exec))
        })
        .collect()
}

pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let problem = cfg.problem()?;
    let plans = arm_plans(cfg)?;
    let per_m = cfg.arms.len();
    let reps = cfg.repetitions;
    let cells = cfg.m_grid.len() * reps;
    let counts = exec.try_map_range(cells, |c| {
        let (mi, rep) = (c / reps, c % reps);
        run_cell(cfg, &problem, &plans[mi * per_m..(mi + 1) * per_m], cfg.m_grid[mi], rep, exec)
    })?;
    let mut totals = vec![0u64; plans.len()];
    for (c, errs) in counts.iter().enumerate() {
        let mi = c / reps;
        for (a, e) in errs.iter().enumerate() {
            totals[mi * per_m + a] += e;
        }
    }
    let denom = (reps * cfg.eval_samples) as f64;
    // Eval points are independent given the training draws, so the pooled
    // fraction concentrates around the mean true loss of the trained classifiers.
    let ci = hoeffding_halfwidth(reps * cfg.eval_samples, cfg.confidence);
    let mut indexed: Vec<(ArmPlan, SweepRow)> = plans
        .iter()
        .zip(&totals)
        .map(|(p, &errs)| {
            let row = SweepRow {
                arm: p.arm,
                m: p.m_used,
                n: p.n,
                t: p.t,
                mean_loss: errs as f64 / denom,
                ci_halfwidth: ci,
                repetitions: reps,
                eval_samples: cfg.eval_samples,
                seed: cfg.master_seed,
            };
            (p.clone(), row)
        })
        .collect();
    indexed.sort_by_key(|(p, _)| (p.arm, p.m_requested));
    let (plans, rows): (Vec<ArmPlan>, Vec<SweepRow>) = indexed.into_iter().unzip();
    let mut slope_fits = BTreeMap::new();
    for &arm in &cfg.arms {
        let mut pts = Vec::new();
        let mut zero = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for r in rows.iter().filter(|r| r.arm == arm) {
            // hanneke can map two requested sizes onto one m_used
            if !seen.insert(r.m) {
                continue;
            }
            if r.mean_loss > 0.0 {
                pts.push((r.m as f64, r.mean_loss));
            } else {
                zero.push(r.m);
            }
        }
        let summary = match slope_fit(&pts) {
            Ok(fit) => SlopeSummary { fit: Some(fit), zero_loss_m: zero, error: None },
            Err(e) => SlopeSummary { fit: None, zero_loss_m: zero, error: Some(e.to_string()) },
        };
        slope_fits.insert(arm, summary);
    }
    Ok(SweepOutcome {
        config: cfg.clone(),
        plans,
        rows,
        slope_fits,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

mod frac {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Ratio<u64>, D::Error> {
        let text = String::deserialize(d)?;
        text.trim().parse::<Ratio<u64>>().map_err(|_| serde::de::Error::custom(format!("`{text}` is not p/q")))
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Ratio<u64>], s: S) -> std::result::Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(ToString::to_string))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Ratio<u64>>, D::Error> {
            Vec::<String>::deserialize(d)?
                .into_iter()
                .map(|t| t.trim().parse().map_err(|_| serde::de::Error::custom(format!("`{t}` is not p/q"))))
                .collect()
        }
    }
}

fn default_exact_sample() -> Option<Vec<f64>> {
    Some(vec![0.15, 0.3, 0.48, 0.55, 0.9])
}

fn default_exact_distribution() -> DistributionSpec {
    DistributionSpec::Finite { support: vec![0.05, 0.15, 0.3, 0.42, 0.48, 0.55, 0.7, 0.9], mass: None }
}

fn default_exact_n() -> usize {
    3
}

fn default_exact_delta() -> f64 {
    0.1
}

fn default_trials() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    #[serde(default)]
    pub master_seed: u64,
    /// Training points; when absent `m` points are drawn from the distribution.
    #[serde(default = "default_exact_sample")]
    pub sample: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_exact_n")]
    pub n: usize,
    #[serde(default)]
    pub class: ClassSpec,
    #[serde(default)]
    pub tie_policy: TiePolicySpec,
    #[serde(default = "default_exact_distribution")]
    pub distribution: DistributionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default = "default_exact_delta")]
    pub delta: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Bagging size for the loss check; defaults to `ceil(18 ln(m/delta))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        parse_json("{}").expect("defaults parse")
    }
}

impl ExactConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(config_err("n", "must be at least 1"));
        }
        match (&self.sample, self.m) {
            (Some(s), _) if s.is_empty() => return Err(config_err("sample", "must not be empty")),
            (Some(_), Some(_)) => return Err(config_err("m", "give either `sample` or `m`, not both")),
            (None, None) | (None, Some(0)) => return Err(config_err("m", "needed (>= 1) when `sample` is null")),
            _ => {}
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("delta", format!("{} outside (0, 1)", self.delta)));
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        if matches!(self.class, ClassSpec::HardInstance { .. }) && self.sample.is_some() {
            return Err(config_err("sample", "hard_instance draws its own sample; set `sample` to null and give `m`"));
        }
        let p = self.problem()?;
        if p.source.as_finite().is_none() {
            return Err(config_err("distribution", "exact losses need a finite distribution"));
        }
        Ok(())
    }

    fn problem(&self) -> Result<Problem> {
        let hard = matches!(self.class, ClassSpec::HardInstance { .. });
        build_problem(&self.class, self.tie_policy, &self.distribution, self.target.as_ref(), !hard)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaLoss {
    pub gamma: String,
    pub gamma_value: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfCheck {
    pub m: usize,
    pub n: usize,
    pub exact_match: bool,
    /// `(k, Pr[|D| = k])` with the probability as `p/q`.
    pub pmf: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactReport {
    pub m: usize,
    pub n: usize,
    pub enumerated_members: usize,
    pub budget: u64,
    pub training_points: Vec<f64>,
    pub margin_losses: Vec<GammaLoss>,
    pub loss_transfer: LossTransferReport,
    pub pmf_check: PmfCheck,
    pub pass: bool,
}

pub fn run_exact(cfg: &ExactConfig, budget: EnumerationBudget, exec: Execution) -> Result<ExactReport> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let dist = problem.source.as_finite().expect("validated finite").clone();
    let s = match &cfg.sample {
        Some(points) => {
            let pts = points.iter().map(|&v| Point::scalar(v)).collect::<Result<Vec<_>>>()?;
            TrainingSet::labeled_by(&pts, &problem.target)?
        }
        None => {
            let m = cfg.m.expect("validated");
            draw_training_set(&problem.source, &problem.target, m, &mut derive_rng(cfg.master_seed, "exact-train", &[m as u64]))?
        }
    };
    let (m, n) = (s.len(), cfg.n);
    let gs = enumerate_gs_with(&s, n, &problem.class, budget, exec)?;
    let margin_losses = [("0", 0.0), ("1/3", 1.0 / 3.0)]
        .into_iter()
        .map(|(label, g)| {
            Ok(GammaLoss {
                gamma: label.to_string(),
                gamma_value: g,
                loss: margin_loss_exact(&gs, &dist, &problem.target, MarginThreshold::new(g)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let t = cfg.t.unwrap_or_else(|| margin_transfer_min_t(m, cfg.delta));
    let loss_transfer = verify_margin_to_loss(
        &s,
        n,
        t,
        cfg.delta,
        cfg.trials,
        &dist,
        &problem.target,
        &problem.class,
        &mut derive_rng(cfg.master_seed, "loss-transfer", &[m as u64, n as u64]),
        budget,
    )?;
    let pmf = distinct_count_pmf(m, n)?;
    let brute = distinct_count_pmf_bruteforce(m, n, budget)?;
    let pmf_check = PmfCheck {
        m,
        n,
        exact_match: pmf == brute,
        pmf: pmf.probabilities().map(|(k, p)| (k, p.to_string())).collect(),
    };
    let pass = pmf_check.exact_match && loss_transfer.pass;
    Ok(ExactReport {
        m,
        n,
        enumerated_members: gs.len(),
        budget: budget.max_vectors,
        training_points: s.examples().iter().map(|e| e.point.coordinate()).collect(),
        margin_losses,
        loss_transfer,
        pmf_check,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TinySpec {
    pub m: usize,
    pub n: usize,
    pub branching: usize,
    #[serde(with = "frac")]
    pub low_frac: Ratio<u64>,
    #[serde(with = "frac")]
    pub high_frac: Ratio<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub branching: usize,
    pub level: u32,
}

fn default_tiny() -> Vec<TinySpec> {
    fixtures::tiny_bucket_fixtures()
        .into_iter()
        .map(|f| TinySpec {
            m: f.m,
            n: f.n,
            branching: f.params.branching,
            low_frac: f.params.low_frac,
            high_frac: f.params.high_frac,
        })
        .collect()
}

fn default_structure() -> Vec<StructureSpec> {
    vec![
        StructureSpec { branching: 20, level: 0 },
        StructureSpec { branching: 20, level: 1 },
        StructureSpec { branching: 20, level: 2 },
        StructureSpec { branching: 2, level: 4 },
        StructureSpec { branching: 3, level: 3 },
    ]
}

fn default_p0_m() -> Vec<usize> {
    vec![100, 128, 200, 500, 1000]
}

fn default_p0_n() -> Vec<Ratio<u64>> {
    vec![Ratio::new(1, 50), Ratio::new(1, 2), Ratio::new(1, 1)]
}

fn default_branching() -> usize {
    BucketParams::default().branching
}

fn default_low() -> Ratio<u64> {
    BucketParams::default().low_frac
}

fn default_high() -> Ratio<u64> {
    BucketParams::default().high_frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucketsConfig {
    #[serde(default = "default_branching")]
    pub branching: usize,
    #[serde(default = "default_low", with = "frac")]
    pub low_frac: Ratio<u64>,
    #[serde(default = "default_high", with = "frac")]
    pub high_frac: Ratio<u64>,
    #[serde(default = "default_p0_m")]
    pub p0_m: Vec<usize>,
    /// `n = ceil(fraction * m)` for each fraction.
    #[serde(default = "default_p0_n", with = "frac::vec")]
    pub p0_n_fractions: Vec<Ratio<u64>>,
    #[serde(default = "default_tiny")]
    pub tiny: Vec<TinySpec>,
    #[serde(default = "default_structure")]
    pub structure: Vec<StructureSpec>,
}

impl Default for BucketsConfig {
    fn default() -> Self {
        parse_json("{}").expect("defaults parse")
    }
}

impl BucketsConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> BucketParams {
        BucketParams {
            branching: self.branching,
            low_frac: self.low_frac,
            high_frac: self.high_frac,
            ..BucketParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate().map_err(|e| config_err("branching/low_frac/high_frac", e))?;
        if self.p0_m.contains(&0) {
            return Err(config_err("p0_m", "sizes must be at least 1"));
        }
        if self.p0_n_fractions.iter().any(|f| *f.numer() == 0 || f > &Ratio::new(1, 1)) {
            return Err(config_err("p0_n_fractions", "fractions must lie in (0, 1]"));
        }
        for (i, t) in self.tiny.iter().enumerate() {
            let p = BucketParams { branching: t.branching, low_frac: t.low_frac, high_frac: t.high_frac, ..BucketParams::default() };
            p.validate().map_err(|e| config_err(&format!("tiny[{i}]"), e))?;
            if t.m == 0 || t.n == 0 {
                return Err(config_err(&format!("tiny[{i}]"), "m and n must be at least 1"));
            }
        }
        for (i, s) in self.structure.iter().enumerate() {
            let len = (s.branching as u128).checked_pow(s.level);
            if s.branching < 2 || len.is_none_or(|l| l > 1 << 20) {
                return Err(config_err(&format!("structure[{i}]"), "need branching >= 2 and branching^level <= 2^20"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P0Entry {
    pub m: usize,
    pub n: usize,
    pub p0: String,
    pub p0_value: f64,
    pub at_most_one_sixth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TinyEntry {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub branching: usize,
    pub buckets: usize,
    pub two_stage_uniform: bool,
    pub symmetric: bool,
    pub c0_mass: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_transfer_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_transfer_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_transfer_skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureEntry {
    pub branching: usize,
    pub level: u32,
    pub list_len: usize,
    pub leaves: usize,
    pub expected_leaves: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketsReport {
    pub branching: usize,
    pub low_frac: String,
    pub high_frac: String,
    pub p0: Vec<P0Entry>,
    pub tiny: Vec<TinyEntry>,
    pub structure: Vec<StructureEntry>,
    pub pass: bool,
}

pub fn run_buckets(cfg: &BucketsConfig, budget: EnumerationBudget, exec: Execution) -> Result<BucketsReport> {
    cfg.validate()?;
    let params = cfg.params();
    let grid: Vec<(usize, usize)> = cfg
        .p0_m
        .iter()
        .flat_map(|&m| {
            let mut ns: Vec<usize> = cfg
                .p0_n_fractions
                .iter()
                .map(|f| ((u128::from(*f.numer()) * m as u128).div_ceil(u128::from(*f.denom()))) as usize)
                .collect();
            ns.sort_unstable();
            ns.dedup();
            ns.into_iter().map(move |n| (m, n))
        })
        .collect();
    let p0 = exec.try_map_range(grid.len(), |i| {
        let (m, n) = grid[i];
        let p = p0_mass(m, n, &params)?;
        Ok::<_, Error>(P0Entry { m, n, p0_value: ratio_to_f64(&p), at_most_one_sixth: p <= one_sixth(), p0: p.to_string() })
    })?;
    let mut tiny = Vec::new();
    for t in &cfg.tiny {
        let tp = BucketParams { branching: t.branching, low_frac: t.low_frac, high_frac: t.high_frac, ..BucketParams::default() };
        let fam = assemble_family(t.m, t.n, &tp)?;
        let uni = check_two_stage_uniform(&fam, budget)?;
        let sym = check_bucket_symmetry(&fam, budget)?;
        let fx = fixtures::bucket_training_fixture(t.m);
        let (points, violations, skipped) = if *fam.c0_mass() > one_sixth() {
            (None, None, Some(format!("P(0) = {} exceeds 1/6", fam.c0_mass())))
        } else {
            let r = margin_transfer_check(&fx.sample, &fam, &fx.dist, &fx.concept, &fx.class, budget)?;
            (Some(r.checked.len()), Some(r.violations), None)
        };
        tiny.push(TinyEntry {
            name: format!("m{}-n{}-C{}", t.m, t.n, t.branching),
            m: t.m,
            n: t.n,
            branching: t.branching,
            buckets: uni.buckets,
            two_stage_uniform: uni.uniform,
            symmetric: sym.symmetric,
            c0_mass: fam.c0_mass().to_string(),
            margin_transfer_points: points,
            margin_transfer_violations: violations,
            margin_transfer_skipped: skipped,
        });
    }
    let structure = cfg
        .structure
        .iter()
        .map(|s| {
            let len = s.branching.pow(s.level);
            let r = structural_checks(&IndexList::new((0..len).collect(), s.branching)?);
            Ok(StructureEntry {
                branching: s.branching,
                level: s.level,
                list_len: len,
                leaves: r.leaves,
                expected_leaves: r.expected_leaves,
                passed: r.passed(),
                failures: r.failures,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = p0.iter().all(|e| e.at_most_one_sixth)
        && tiny.iter().all(|t| t.two_stage_uniform && t.symmetric && t.margin_transfer_violations.unwrap_or(0) == 0)
        && structure.iter().all(|s| s.passed);
    Ok(BucketsReport {
        branching: params.branching,
        low_frac: params.low_frac.to_string(),
        high_frac: params.high_frac.to_string(),
        p0,
        tiny,
        structure,
        pass,
    })
}

/// `m^n` for error messages, saturating.
pub fn vector_count_display(m: usize, n: usize) -> String {
    vector_count(m, n).map_or_else(|| format!("{m}^{n}"), |c| c.to_string())
}
