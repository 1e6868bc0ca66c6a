//! Synthetic tasks with known risk, Monte Carlo coverage experiments and the
//! exhaustive majority-vote oracle.

mod coverage;
mod majority;

pub use coverage::{
    coverage_experiment, l1_experiment, BoundParams, CoverageConfig, CoverageReport, CoverageRow, DeviationKind,
    L1Config, L1Report,
};
pub use majority::{majority_inequality_oracle, Inequality, MistakeMatrix, OracleVerdict, MAX_ORACLE_M, MAX_ORACLE_N};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::data::{Criterion, Dataset, Label, LossFunction, Sample, Task};
use crate::error::{config, domain, Result};

/// One-dimensional tasks with `X ~ U(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SyntheticDistribution {
    /// Every label is `label`.
    Constant {
        #[serde(default = "one")]
        label: u32,
    },
    /// Label 2 above `theta`, 1 below, each flipped with probability `flip`.
    ThresholdNoise { theta: f64, flip: f64 },
    /// Label 2 on `(lo, hi]`, 1 elsewhere, each flipped with probability `flip`.
    IntervalNoise { lo: f64, hi: f64, flip: f64 },
    /// `Y = slope X + intercept + sigma Z` with standard normal `Z`.
    GaussianRegression { slope: f64, intercept: f64, sigma: f64 },
}

fn one() -> u32 {
    1
}

impl SyntheticDistribution {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                config(format!("{name} must lie in [0, 1], got {v}"))
            }
        };
        match *self {
            SyntheticDistribution::Constant { label } => {
                if label == 0 {
                    return config("class labels start at 1");
                }
            }
            SyntheticDistribution::ThresholdNoise { theta, flip } => {
                unit("theta", theta)?;
                unit("flip", flip)?;
            }
            SyntheticDistribution::IntervalNoise { lo, hi, flip } => {
                unit("lo", lo)?;
                unit("hi", hi)?;
                unit("flip", flip)?;
                if lo > hi {
                    return config("interval needs lo <= hi");
                }
            }
            SyntheticDistribution::GaussianRegression { slope, intercept, sigma } => {
                if !(slope.is_finite() && intercept.is_finite() && sigma > 0.0 && sigma.is_finite()) {
                    return config("regression parameters must be finite with sigma > 0");
                }
            }
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        match *self {
            SyntheticDistribution::Constant { label } => Task::Classification { classes: label.max(2) },
            SyntheticDistribution::GaussianRegression { .. } => Task::Regression,
            _ => Task::Classification { classes: 2 },
        }
    }

    /// Zero-one for classification, clipped-squared for regression.
    pub fn default_criterion(&self) -> Criterion {
        match self.task() {
            Task::Regression => Criterion::Loss(LossFunction::ClippedSquared),
            Task::Classification { .. } => Criterion::ZERO_ONE,
        }
    }

    /// Optimal risk under `criterion` where a closed form is known.
    pub fn bayes_risk(&self, criterion: &Criterion) -> Option<f64> {
        let loss = match criterion {
            Criterion::Loss(l) => *l,
            Criterion::Surrogate(_) => return None,
        };
        match (*self, loss) {
            (SyntheticDistribution::Constant { .. }, LossFunction::ZeroOne) => Some(0.0),
            (SyntheticDistribution::ThresholdNoise { flip, .. }, LossFunction::ZeroOne)
            | (SyntheticDistribution::IntervalNoise { flip, .. }, LossFunction::ZeroOne) => Some(flip.min(1.0 - flip)),
            (SyntheticDistribution::GaussianRegression { sigma, .. }, loss) if !loss.is_classification() => {
                let z = Normal::standard();
                let c = 1.0 / sigma;
                let tail = 2.0 * (1.0 - z.cdf(c));
                Some(match loss {
                    LossFunction::ClippedSquared => {
                        sigma * sigma * ((2.0 * z.cdf(c) - 1.0) - 2.0 * c * z.pdf(c)) + tail
                    }
                    _ => 2.0 * sigma * (z.pdf(0.0) - z.pdf(c)) + tail,
                })
            }
            _ => None,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Sample {
        let x: f64 = rng.random();
        let flipped = |clean: bool, flip: f64, rng: &mut R| -> Label {
            let noisy = clean != (rng.random::<f64>() < flip);
            Label::Class(if noisy { 2 } else { 1 })
        };
        let y = match *self {
            SyntheticDistribution::Constant { label } => Label::Class(label),
            SyntheticDistribution::ThresholdNoise { theta, flip } => flipped(x > theta, flip, rng),
            SyntheticDistribution::IntervalNoise { lo, hi, flip } => flipped(lo < x && x <= hi, flip, rng),
            SyntheticDistribution::GaussianRegression { slope, intercept, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                Label::Value(slope * x + intercept + sigma * z)
            }
        };
        Sample::new(vec![x], y)
    }

    /// `n` i.i.d. draws from `rng`.
    pub fn generate_with<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        if n == 0 {
            return domain("n must be positive");
        }
        let samples = (0..n).map(|_| self.sample(rng)).collect();
        Dataset::new(samples, self.task())
    }
}

/// `n` i.i.d. draws, a pure function of `seed`.
pub fn generate(dist: &SyntheticDistribution, n: usize, seed: u64) -> Result<Dataset> {
    dist.generate_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Generator for replicate `r`: the master seed on its own stream.
pub(crate) fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64 + 1);
    rng
}
