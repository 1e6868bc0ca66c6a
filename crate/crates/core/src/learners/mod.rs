//! Order-invariant base learners and VC utilities.
//!
//! Every learner sorts its training subsample canonically before fitting, so
//! the fitted predictor depends only on the multiset of samples.

mod erm;
mod knn;
mod shatter;

use serde::{Deserialize, Serialize};

use crate::data::{binary_sign, Criterion, Dataset, Label, Sample, Task};
use crate::error::{config, domain, Error, Result};
use crate::serde_ext::extended_f64;

pub use shatter::{shatter_coefficient, vc_lower_bound, vc_lower_bound_in, MAX_SHATTER_POINTS};

/// Finite-VC hypothesis classes searched by ERM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HypothesisClass {
    /// `x[feature] > t` predicts class 2.
    HalfLine {
        #[serde(default)]
        feature: usize,
    },
    /// A threshold on one feature with either orientation.
    Stump {
        #[serde(default)]
        feature: usize,
    },
    /// `lo < x[feature] <= hi` predicts class 2.
    Interval {
        #[serde(default)]
        feature: usize,
    },
    /// A regular grid with `bins` cells per dimension over `[lo, hi]`.
    Histogram {
        bins: usize,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl HypothesisClass {
    /// The declared VC dimension for inputs of dimension `dim`.
    pub fn declared_vc(&self, dim: usize) -> Result<u32> {
        match self {
            HypothesisClass::HalfLine { .. } => Ok(1),
            HypothesisClass::Stump { .. } | HypothesisClass::Interval { .. } => Ok(2),
            HypothesisClass::Histogram { bins, .. } => (*bins as u32)
                .checked_pow(dim as u32)
                .ok_or_else(|| Error::Domain("histogram cell count overflows".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let HypothesisClass::Histogram { bins, lo, hi } = self {
            if *bins == 0 {
                return config("histogram needs at least one bin");
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return config("histogram range must be finite with lo < hi");
            }
        }
        Ok(())
    }

    fn feature(&self) -> Option<usize> {
        match self {
            HypothesisClass::HalfLine { feature }
            | HypothesisClass::Stump { feature }
            | HypothesisClass::Interval { feature } => Some(*feature),
            HypothesisClass::Histogram { .. } => None,
        }
    }
}

/// A base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LearnerSpec", into = "LearnerSpec")]
pub enum Learner {
    Erm { class: HypothesisClass, objective: Criterion },
    Knn { k: usize },
}

/// Flat JSON representation of a learner.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub learner: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Criterion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl TryFrom<LearnerSpec> for Learner {
    type Error = Error;

    fn try_from(s: LearnerSpec) -> Result<Self> {
        let only = |allowed: &[&str]| -> Result<()> {
            let present = [
                ("class", s.class.is_some()),
                ("objective", s.objective.is_some()),
                ("feature", s.feature.is_some()),
                ("bins", s.bins.is_some()),
                ("lo", s.lo.is_some()),
                ("hi", s.hi.is_some()),
                ("k", s.k.is_some()),
            ];
            for (name, set) in present {
                if set && !allowed.contains(&name) {
                    return config(format!("`{name}` is not valid for learner `{}`", s.learner));
                }
            }
            Ok(())
        };
        match s.learner.as_str() {
            "erm" => {
                let Some(class) = s.class.as_deref() else {
                    return config("erm learner needs a `class`");
                };
                let objective = s.objective.unwrap_or(Criterion::ZERO_ONE);
                let feature = s.feature.unwrap_or(0);
                let class = match class {
                    "half-line" | "stump" | "interval" => {
                        only(&["class", "objective", "feature"])?;
                        match class {
                            "half-line" => HypothesisClass::HalfLine { feature },
                            "stump" => HypothesisClass::Stump { feature },
                            _ => HypothesisClass::Interval { feature },
                        }
                    }
                    "histogram" => {
                        only(&["class", "objective", "bins", "lo", "hi"])?;
                        let Some(bins) = s.bins else {
                            return config("histogram needs `bins`");
                        };
                        HypothesisClass::Histogram { bins, lo: s.lo.unwrap_or(0.0), hi: s.hi.unwrap_or(1.0) }
                    }
                    other => return config(format!("unknown hypothesis class `{other}`")),
                };
                class.validate()?;
                Ok(Learner::Erm { class, objective })
            }
            "knn" => {
                only(&["k"])?;
                match s.k {
                    Some(k) if k >= 1 => Ok(Learner::Knn { k }),
                    _ => config("knn needs a positive `k`"),
                }
            }
            other => config(format!("unknown learner `{other}`")),
        }
    }
}

impl From<Learner> for LearnerSpec {
    fn from(l: Learner) -> Self {
        match l {
            Learner::Knn { k } => LearnerSpec { learner: "knn".into(), k: Some(k), ..Default::default() },
            Learner::Erm { class, objective } => {
                let mut spec = LearnerSpec { learner: "erm".into(), objective: Some(objective), ..Default::default() };
                match class {
                    HypothesisClass::HalfLine { feature } => {
                        spec.class = Some("half-line".into());
                        spec.feature = Some(feature);
                    }
                    HypothesisClass::Stump { feature } => {
                        spec.class = Some("stump".into());
                        spec.feature = Some(feature);
                    }
                    HypothesisClass::Interval { feature } => {
                        spec.class = Some("interval".into());
                        spec.feature = Some(feature);
                    }
                    HypothesisClass::Histogram { bins, lo, hi } => {
                        spec.class = Some("histogram".into());
                        spec.bins = Some(bins);
                        spec.lo = Some(lo);
                        spec.hi = Some(hi);
                    }
                }
                spec
            }
        }
    }
}

impl Learner {
    pub fn fit(&self, data: &Dataset) -> Result<Predictor> {
        self.fit_samples(data.samples().iter().collect(), data.task(), data.dim())
    }

    /// Fits on the samples whose mask bit is set.
    pub fn fit_masked(&self, data: &Dataset, mask: &[bool]) -> Result<Predictor> {
        if mask.len() != data.len() {
            return domain("mask length differs from the dataset size");
        }
        self.fit_samples(data.select(mask), data.task(), data.dim())
    }

    /// Fits on an arbitrary collection of samples.
    pub fn fit_samples(&self, mut samples: Vec<&Sample>, task: Task, dim: usize) -> Result<Predictor> {
        if samples.is_empty() {
            return domain("cannot fit on an empty dataset");
        }
        samples.sort_by(|a, b| a.canonical_cmp(b));
        match self {
            Learner::Erm { class, objective } => {
                class.validate()?;
                if let Some(f) = class.feature() {
                    if f >= dim {
                        return domain(format!("feature {f} out of range for dimension {dim}"));
                    }
                }
                erm::fit(class, objective, &samples, task, dim)
            }
            Learner::Knn { k } => knn::fit(*k, &samples, task),
        }
    }

    /// Declared VC dimension of an ERM learner.
    pub fn declared_vc(&self, dim: usize) -> Option<u32> {
        match self {
            Learner::Erm { class, .. } => class.declared_vc(dim).ok(),
            Learner::Knn { .. } => None,
        }
    }
}

/// ERM over `class` with the given objective.
pub fn erm_fit(class: &HypothesisClass, objective: &Criterion, data: &Dataset) -> Result<Predictor> {
    Learner::Erm { class: class.clone(), objective: *objective }.fit(data)
}

/// k-nearest-neighbor rule.
pub fn knn_fit(k: usize, data: &Dataset) -> Result<Predictor> {
    Learner::Knn { k }.fit(data)
}

/// A fitted predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Predictor {
    /// `left` when `x[feature] <= threshold`, else `right`.
    Stump {
        feature: usize,
        #[serde(with = "extended_f64")]
        threshold: f64,
        left: Label,
        right: Label,
    },
    /// `inside` when `lo < x[feature] <= hi`, else `outside`.
    Interval {
        feature: usize,
        #[serde(with = "extended_f64")]
        lo: f64,
        #[serde(with = "extended_f64")]
        hi: f64,
        inside: Label,
        outside: Label,
    },
    Histogram {
        bins: usize,
        lo: f64,
        hi: f64,
        dim: usize,
        cells: Vec<Label>,
    },
    Knn {
        k: usize,
        task: Task,
        points: Vec<Sample>,
    },
}

impl Predictor {
    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            Predictor::Stump { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    *left
                } else {
                    *right
                }
            }
            Predictor::Interval { feature, lo, hi, inside, outside } => {
                let v = x[*feature];
                if *lo < v && v <= *hi {
                    *inside
                } else {
                    *outside
                }
            }
            Predictor::Histogram { bins, lo, hi, cells, .. } => cells[cell_index(x, *bins, *lo, *hi)],
            Predictor::Knn { k, task, points } => knn::predict(*k, *task, points, x),
        }
    }

    /// Real-valued output: the regression value, or the `±1` score of a binary label.
    pub fn predict_real(&self, x: &[f64]) -> Result<f64> {
        match self.predict(x) {
            Label::Value(v) => Ok(v),
            y => binary_sign(y),
        }
    }
}

/// Cell of `x` in a regular grid; coordinates outside `[lo, hi]` fall in the edge cells.
pub(crate) fn cell_index(x: &[f64], bins: usize, lo: f64, hi: f64) -> usize {
    let width = hi - lo;
    let mut idx = 0;
    let mut stride = 1;
    for &v in x {
        let b = ((v - lo) / width * bins as f64).floor();
        let b = if b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
        idx += b * stride;
        stride *= bins;
    }
    idx
}
