use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{l1_bound, BoundSpec, BoundVariant, Branch};
use crate::cv::{CvScheme, SchemeKind};
use crate::data::{Criterion, Dataset, Task};
use crate::error::{config, Result};
use crate::learners::Learner;
use crate::subagging::{strict_majority, subag_fit, Aggregation, EstimateVariant};

use super::{replicate_rng, SyntheticDistribution};

/// Which deviation `R - estimate` a coverage run records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationKind {
    #[default]
    Out,
    In,
    /// `R - R_out / 2`.
    HalfOut,
    Maj,
}

impl std::str::FromStr for DeviationKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| crate::Error::Config(format!("unknown estimator `{s}`")))
    }
}

/// Bound parameters other than `n` and `p`, which come from the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub variant: BoundVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vc: Option<u32>,
    /// Defaults to the fold count of a k-fold scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Defaults to the strict majority of the number of training vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl BoundParams {
    pub fn new(variant: BoundVariant) -> Self {
        BoundParams { variant, vc: None, k: None, lambda: None, delta: None, alpha: None, l: None, b: None, c: None }
    }

    pub fn with_vc(mut self, vc: u32) -> Self {
        self.vc = Some(vc);
        self
    }

    pub fn spec(&self, scheme: &CvScheme, vectors: usize) -> BoundSpec {
        let k = self.k.or(match scheme.kind {
            SchemeKind::Kfold { k } => Some(k),
            SchemeKind::Loo => Some(scheme.n),
            _ => None,
        });
        BoundSpec {
            variant: self.variant,
            n: scheme.n,
            p: Some(scheme.test_fraction()),
            vc: self.vc,
            k,
            lambda: self.lambda,
            delta: self.delta,
            alpha: self.alpha,
            l: self.l.or(Some(strict_majority(vectors))),
            b: self.b,
            c: self.c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    pub distribution: SyntheticDistribution,
    pub learner: Learner,
    pub scheme: SchemeKind,
    pub n: usize,
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_ghost")]
    pub ghost: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimator: DeviationKind,
    pub bound: BoundParams,
    /// Defaults to zero-one for classification and clipped-squared for regression.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Criterion>,
}

fn default_replicates() -> usize {
    1000
}

fn default_ghost() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub eps: f64,
    pub empirical_freq: f64,
    pub bound_value: f64,
    pub bound_branch: Branch,
    /// `bound_value - empirical_freq`.
    pub margin: f64,
    /// `3 sqrt(freq (1 - freq) / R)`.
    pub slack: f64,
    /// `empirical_freq <= bound_value + slack`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: CoverageConfig,
    pub replicates: usize,
    pub ghost: usize,
    pub seed: u64,
    /// The scheme's vectors were sampled, so the run is informative only.
    pub approximate_scheme: bool,
    pub mean_deviation: f64,
    /// Upper bound `1 / (2 sqrt(m))` on the ghost-sample standard error.
    pub ghost_se: f64,
    pub rows: Vec<CoverageRow>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl CoverageReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

struct Replicate {
    true_risk: f64,
    out: f64,
    estimate: f64,
}

struct Plan<'a> {
    dist: &'a SyntheticDistribution,
    learner: &'a Learner,
    scheme: CvScheme,
    aggregation: Aggregation,
    criterion: Criterion,
    ghost: usize,
    seed: u64,
    kind: DeviationKind,
}

impl Plan<'_> {
    #[allow(clippy::too_many_arguments)]
    fn new<'a>(
        dist: &'a SyntheticDistribution,
        learner: &'a Learner,
        scheme: &SchemeKind,
        n: usize,
        ghost: usize,
        seed: u64,
        kind: DeviationKind,
        criterion: Option<Criterion>,
    ) -> Result<Plan<'a>> {
        dist.validate()?;
        let scheme = scheme.over(n)?;
        if kind == DeviationKind::Maj && !scheme.is_exact() {
            return config("the majority estimate needs an exact scheme");
        }
        let aggregation = match dist.task() {
            Task::Classification { .. } => Aggregation::Majority,
            Task::Regression => Aggregation::Average,
        };
        Ok(Plan {
            dist,
            learner,
            scheme,
            aggregation,
            criterion: criterion.unwrap_or_else(|| dist.default_criterion()),
            ghost,
            seed,
            kind,
        })
    }

    /// Replicate `r` draws its learning set and then its ghost sample from its own stream.
    fn run(&self, r: usize) -> Result<Replicate> {
        let mut rng = replicate_rng(self.seed, r);
        let data: Dataset = self.dist.generate_with(self.scheme.n, &mut rng)?;
        let ghost = self.dist.generate_with(self.ghost, &mut rng)?;
        let ens = subag_fit(self.learner, &data, &self.scheme, self.aggregation)?;
        let true_risk = ens.true_risk(&ghost, &self.criterion)?;
        let out = ens.estimate(&data, EstimateVariant::Out, &self.criterion)?.value;
        let estimate = match self.kind {
            DeviationKind::Out => out,
            DeviationKind::HalfOut => out / 2.0,
            DeviationKind::In => ens.estimate(&data, EstimateVariant::In, &self.criterion)?.value,
            DeviationKind::Maj => ens.estimate(&data, EstimateVariant::Maj, &self.criterion)?.value,
        };
        Ok(Replicate { true_risk, out, estimate })
    }

    fn run_all(&self, replicates: usize) -> Result<Vec<Replicate>> {
        (0..replicates).into_par_iter().map(|r| self.run(r)).collect()
    }
}

/// Empirical `Pr(R - estimate >= eps)` over fresh replicates, against a bound.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageReport> {
    let start = Instant::now();
    if cfg.replicates < 100 {
        return config("coverage needs at least 100 replicates");
    }
    if cfg.ghost < 1000 {
        return config("coverage needs a ghost sample of at least 1000");
    }
    if cfg.eps_grid.is_empty() || cfg.eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return config("eps grid must be nonempty, finite and nonnegative");
    }
    let plan = Plan::new(
        &cfg.distribution,
        &cfg.learner,
        &cfg.scheme,
        cfg.n,
        cfg.ghost,
        cfg.seed,
        cfg.estimator,
        cfg.criterion,
    )?;
    let vectors = crate::cv::enumerate_vectors(&plan.scheme)?;
    let spec = cfg.bound.spec(&plan.scheme, vectors.total as usize);
    let mut grid = cfg.eps_grid.clone();
    grid.sort_by(f64::total_cmp);
    let bounds = grid.iter().map(|&e| spec.evaluate(e)).collect::<Result<Vec<_>>>()?;

    let reps = plan.run_all(cfg.replicates)?;
    let devs: Vec<f64> = reps.iter().map(|r| r.true_risk - r.estimate).collect();
    let rf = cfg.replicates as f64;
    let rows = grid
        .iter()
        .zip(bounds)
        .map(|(&eps, b)| {
            let hits = devs.iter().filter(|&&d| d >= eps).count();
            let freq = hits as f64 / rf;
            let slack = 3.0 * (freq * (1.0 - freq) / rf).sqrt();
            CoverageRow {
                eps,
                empirical_freq: freq,
                bound_value: b.value,
                bound_branch: b.branch,
                margin: b.value - freq,
                slack,
                holds: freq <= b.value + slack,
            }
        })
        .collect();
    Ok(CoverageReport {
        config: cfg.clone(),
        replicates: cfg.replicates,
        ghost: cfg.ghost,
        seed: cfg.seed,
        approximate_scheme: !vectors.exact,
        mean_deviation: devs.iter().sum::<f64>() / rf,
        ghost_se: 0.5 / (cfg.ghost as f64).sqrt(),
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L1Config {
    pub distribution: SyntheticDistribution,
    pub learner: Learner,
    pub scheme: SchemeKind,
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_ghost")]
    pub ghost: usize,
    #[serde(default)]
    pub seed: u64,
    /// Also report the ERM form of the bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vc: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Criterion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Report {
    pub config: L1Config,
    /// Mean of `R - R_out` over replicates.
    pub mean: f64,
    /// Standard error of `mean`.
    pub se: f64,
    pub bound: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub erm_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holds_erm: Option<bool>,
    pub approximate_scheme: bool,
}

/// Mean deviation `R - R_out` with its standard error, against the expectation bound.
pub fn l1_experiment(cfg: &L1Config) -> Result<L1Report> {
    if cfg.replicates < 2 {
        return config("need at least 2 replicates");
    }
    if cfg.ghost == 0 {
        return config("ghost sample must be nonempty");
    }
    let plan = Plan::new(
        &cfg.distribution,
        &cfg.learner,
        &cfg.scheme,
        cfg.n,
        cfg.ghost,
        cfg.seed,
        DeviationKind::Out,
        cfg.criterion,
    )?;
    let devs: Vec<f64> = plan.run_all(cfg.replicates)?.iter().map(|r| r.true_risk - r.out).collect();
    let rf = devs.len() as f64;
    let mean = devs.iter().sum::<f64>() / rf;
    let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (rf - 1.0);
    let se = (var / rf).sqrt();
    let p = plan.scheme.test_fraction();
    let bound = l1_bound(cfg.n, p, None)?;
    let erm_bound = cfg.vc.map(|vc| l1_bound(cfg.n, p, Some(vc))).transpose()?;
    let upper = mean + 3.0 * se;
    Ok(L1Report {
        config: cfg.clone(),
        mean,
        se,
        bound,
        holds: upper <= bound,
        erm_bound,
        holds_erm: erm_bound.map(|b| upper <= b),
        approximate_scheme: !plan.scheme.is_exact(),
    })
}
