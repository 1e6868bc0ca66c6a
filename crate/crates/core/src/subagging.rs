//! Subagged ensembles and their cross-validated risk estimates.
//!
//! Member weights are kept as integer counts over a common total, so the
//! out-of-sample and in-sample estimates under zero-one loss are ratios of
//! integers rounded once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{enumerate_vectors, CvScheme, SchemeKind, TrainingVector};
use crate::data::{class_of_score, Criterion, Dataset, Label, Task};
use crate::error::{config, domain, refused, Result};
use crate::learners::{Learner, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Weighted mean of real member outputs.
    Average,
    /// Weighted plurality vote, smallest label on ties.
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub mask: TrainingVector,
    /// Multiplicity; the weight is `count / total`.
    pub count: u64,
    pub predictor: Predictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubaggedEnsemble {
    pub learner: Learner,
    pub scheme: SchemeKind,
    pub aggregation: Aggregation,
    pub task: Task,
    pub total: u64,
    pub exact: bool,
    pub members: Vec<Member>,
}

/// Fits one member per training vector of the scheme.
pub fn subag_fit(
    learner: &Learner,
    data: &Dataset,
    scheme: &CvScheme,
    aggregation: Aggregation,
) -> Result<SubaggedEnsemble> {
    if scheme.n != data.len() {
        return config(format!("scheme is over n = {} but the dataset has {} samples", scheme.n, data.len()));
    }
    match (aggregation, data.task()) {
        (Aggregation::Majority, Task::Regression) => return config("majority aggregation needs a classification task"),
        (Aggregation::Average, Task::Classification { classes }) if classes != 2 => {
            return config("average aggregation of classifiers needs binary labels")
        }
        _ => {}
    }
    let set = enumerate_vectors(scheme)?;
    if set.is_empty() {
        return domain("the scheme produced no training vectors");
    }
    let members = set
        .entries
        .par_iter()
        .map(|(mask, count)| {
            Ok(Member { predictor: learner.fit_masked(data, mask.bits())?, mask: mask.clone(), count: *count })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubaggedEnsemble {
        learner: learner.clone(),
        scheme: scheme.kind.clone(),
        aggregation,
        task: data.task(),
        total: set.total,
        exact: set.exact,
        members,
    })
}

impl SubaggedEnsemble {
    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.count as f64 / self.total as f64).collect()
    }

    fn n(&self) -> usize {
        self.members[0].mask.len()
    }

    /// `sum_j w_j phi_j(x)` over real member outputs.
    pub fn predict_average(&self, x: &[f64]) -> Result<f64> {
        if self.aggregation != Aggregation::Average {
            return config("ensemble does not use average aggregation");
        }
        self.average_output(x)
    }

    fn average_output(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for m in &self.members {
            acc += m.count as f64 * m.predictor.predict_real(x)?;
        }
        Ok(acc / self.total as f64)
    }

    /// Weighted plurality label.
    pub fn predict_majority(&self, x: &[f64]) -> Result<Label> {
        if self.aggregation != Aggregation::Majority {
            return config("ensemble does not use majority aggregation");
        }
        let Task::Classification { classes } = self.task else {
            return config("majority vote needs class labels");
        };
        let mut votes = vec![0u64; classes as usize];
        for m in &self.members {
            let c = m.predictor.predict(x).class().expect("class label");
            votes[c as usize - 1] += m.count;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        Ok(Label::Class(best as u32 + 1))
    }

    /// Aggregated prediction as a label.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        match (self.aggregation, self.task) {
            (Aggregation::Majority, _) => self.predict_majority(x),
            (Aggregation::Average, Task::Regression) => Ok(Label::Value(self.average_output(x)?)),
            (Aggregation::Average, Task::Classification { .. }) => Ok(class_of_score(self.average_output(x)?)),
        }
    }

    /// Loss of the aggregated prediction at one sample.
    fn aggregate_loss(&self, criterion: &Criterion, x: &[f64], y: Label) -> Result<f64> {
        match self.aggregation {
            Aggregation::Majority => criterion.evaluate(y, self.predict_majority(x)?),
            Aggregation::Average => criterion.evaluate_real(y, self.average_output(x)?),
        }
    }

    /// Cross-validated estimate from the members, which must have been fitted on `data`.
    pub fn estimate(&self, data: &Dataset, variant: EstimateVariant, criterion: &Criterion) -> Result<CvEstimate> {
        if data.len() != self.n() {
            return domain("dataset size differs from the ensemble's masks");
        }
        if variant == EstimateVariant::Maj && !self.exact {
            return refused("the majority estimate needs an exact vector set");
        }
        let on_test = variant != EstimateVariant::In;
        // per member: total loss over the evaluation subsample
        let sums = self
            .members
            .par_iter()
            .map(|m| {
                let mut s = 0.0;
                for (sample, &train) in data.samples().iter().zip(m.mask.bits()) {
                    if train != on_test {
                        s += criterion.evaluate(sample.y, m.predictor.predict(&sample.x))?;
                    }
                }
                Ok(s)
            })
            .collect::<Result<Vec<f64>>>()?;
        let size = if on_test { self.members[0].mask.test_size() } else { self.members[0].mask.train_size() } as f64;
        let per_member_errors: Vec<f64> = sums.iter().map(|s| s / size).collect();
        let (value, l) = match variant {
            EstimateVariant::Out | EstimateVariant::In => {
                let weighted: f64 = self.members.iter().zip(&sums).map(|(m, s)| m.count as f64 * s).sum();
                (weighted / (size * self.total as f64), None)
            }
            EstimateVariant::Maj => {
                let mut expanded: Vec<f64> = self
                    .members
                    .iter()
                    .zip(&sums)
                    .flat_map(|(m, &s)| std::iter::repeat_n(s, m.count as usize))
                    .collect();
                expanded.sort_by(f64::total_cmp);
                let l = strict_majority(expanded.len());
                let best: f64 = expanded[..l].iter().sum();
                (best / (l as f64 * size), Some(l))
            }
        };
        Ok(CvEstimate { variant, value, exact: self.exact, l, per_member_errors })
    }

    /// Ghost-sample estimate of the risk of the aggregated predictor.
    pub fn true_risk(&self, ghost: &Dataset, criterion: &Criterion) -> Result<f64> {
        true_risk(self, ghost, criterion)
    }

    /// Weighted mean of the members' own ghost-sample risks.
    pub fn member_risk(&self, ghost: &Dataset, criterion: &Criterion) -> Result<f64> {
        let mut acc = 0.0;
        for m in &self.members {
            let mut s = 0.0;
            for sample in ghost.samples() {
                s += criterion.evaluate(sample.y, m.predictor.predict(&sample.x))?;
            }
            acc += m.count as f64 * s;
        }
        Ok(acc / (ghost.len() as f64 * self.total as f64))
    }
}

/// `floor(N / 2) + 1`.
pub fn strict_majority(n: usize) -> usize {
    n / 2 + 1
}

/// Mean of the `l` smallest errors with `l` the strict majority of `errors.len()`.
pub fn majority_of_errors(errors: &[f64]) -> Result<(usize, f64)> {
    if errors.is_empty() {
        return domain("no member errors");
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let l = strict_majority(sorted.len());
    Ok((l, sorted[..l].iter().sum::<f64>() / l as f64))
}

pub fn true_risk(e: &SubaggedEnsemble, ghost: &Dataset, criterion: &Criterion) -> Result<f64> {
    if ghost.is_empty() {
        return domain("empty ghost sample");
    }
    let mut s = 0.0;
    for sample in ghost.samples() {
        s += e.aggregate_loss(criterion, &sample.x, sample.y)?;
    }
    Ok(s / ghost.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateVariant {
    Out,
    In,
    Maj,
}

impl std::str::FromStr for EstimateVariant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "out" => Ok(EstimateVariant::Out),
            "in" => Ok(EstimateVariant::In),
            "maj" => Ok(EstimateVariant::Maj),
            _ => config(format!("unknown estimate variant `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEstimate {
    pub variant: EstimateVariant,
    pub value: f64,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub per_member_errors: Vec<f64>,
}

fn fit_and_estimate(
    learner: &Learner,
    data: &Dataset,
    scheme: &CvScheme,
    criterion: &Criterion,
    variant: EstimateVariant,
) -> Result<CvEstimate> {
    if variant == EstimateVariant::Maj && !scheme.is_exact() {
        return refused("the majority estimate needs an exact vector set");
    }
    let aggregation = if data.task().is_classification() { Aggregation::Majority } else { Aggregation::Average };
    subag_fit(learner, data, scheme, aggregation)?.estimate(data, variant, criterion)
}

pub fn r_hat_cv_out(learner: &Learner, data: &Dataset, scheme: &CvScheme, criterion: &Criterion) -> Result<CvEstimate> {
    fit_and_estimate(learner, data, scheme, criterion, EstimateVariant::Out)
}

pub fn r_hat_cv_in(learner: &Learner, data: &Dataset, scheme: &CvScheme, criterion: &Criterion) -> Result<CvEstimate> {
    fit_and_estimate(learner, data, scheme, criterion, EstimateVariant::In)
}

pub fn r_hat_cv_maj(learner: &Learner, data: &Dataset, scheme: &CvScheme, criterion: &Criterion) -> Result<CvEstimate> {
    fit_and_estimate(learner, data, scheme, criterion, EstimateVariant::Maj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::SchemeKind;
    use crate::data::{LossFunction, Sample};
    use crate::learners::HypothesisClass;

    fn stump() -> Learner {
        Learner::Erm { class: HypothesisClass::Stump { feature: 0 }, objective: Criterion::ZERO_ONE }
    }

    fn constant_member(v: f64, count: u64, n: usize, i: usize) -> Member {
        Member {
            mask: TrainingVector::with_test_indices(n, [i]).unwrap(),
            count,
            predictor: Predictor::Stump {
                feature: 0,
                threshold: f64::INFINITY,
                left: Label::Value(v),
                right: Label::Value(v),
            },
        }
    }

    fn averaging(members: Vec<Member>) -> SubaggedEnsemble {
        SubaggedEnsemble {
            learner: stump(),
            scheme: SchemeKind::Loo,
            aggregation: Aggregation::Average,
            task: Task::Regression,
            total: members.iter().map(|m| m.count).sum(),
            exact: true,
            members,
        }
    }

    #[test]
    fn member_counts_follow_the_scheme() {
        let d = Dataset::from_1d_classes(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]).unwrap();
        let e = subag_fit(&stump(), &d, &CvScheme::kfold(4, 2).unwrap(), Aggregation::Majority).unwrap();
        assert_eq!(e.weights(), vec![0.5, 0.5]);
        let d3 = Dataset::from_1d_classes(&[1.0, 2.0, 3.0], &[1, 1, 2]).unwrap();
        let e = subag_fit(&stump(), &d3, &CvScheme::loo(3).unwrap(), Aggregation::Majority).unwrap();
        assert_eq!(e.members.len(), 3);
        let h = CvScheme::new(SchemeKind::Holdout { p: 0.5 }, 4).unwrap();
        let e = subag_fit(&stump(), &d, &h, Aggregation::Majority).unwrap();
        assert_eq!(e.weights(), vec![1.0]);
        assert!(subag_fit(&stump(), &d3, &CvScheme::kfold(4, 2).unwrap(), Aggregation::Majority).is_err());
    }

    #[test]
    fn average_examples() {
        let e = averaging(vec![constant_member(0.5, 1, 2, 0), constant_member(0.5, 1, 2, 1)]);
        assert_eq!(e.predict_average(&[0.0]).unwrap(), 0.5);
        let e = averaging(vec![constant_member(0.0, 1, 2, 0), constant_member(1.0, 1, 2, 1)]);
        assert_eq!(e.predict_average(&[0.0]).unwrap(), 0.5);
        let e = averaging(vec![constant_member(0.0, 1, 2, 0), constant_member(1.0, 3, 2, 1)]);
        assert_eq!(e.predict_average(&[0.0]).unwrap(), 0.75);
        assert!(e.predict_majority(&[0.0]).is_err());
    }

    #[test]
    fn average_is_linear_in_member_outputs() {
        let outs = [0.1, 0.7, 0.4];
        let base = averaging(outs.iter().enumerate().map(|(i, &v)| constant_member(v, 1, 3, i)).collect());
        let scaled = averaging(outs.iter().enumerate().map(|(i, &v)| constant_member(3.0 * v, 1, 3, i)).collect());
        let a = base.predict_average(&[0.0]).unwrap();
        let b = scaled.predict_average(&[0.0]).unwrap();
        assert!((3.0 * a - b).abs() < 1e-15);
    }

    fn voters(labels: &[u32]) -> SubaggedEnsemble {
        let n = labels.len().max(2);
        SubaggedEnsemble {
            learner: stump(),
            scheme: SchemeKind::Loo,
            aggregation: Aggregation::Majority,
            task: Task::Classification { classes: 2 },
            total: labels.len() as u64,
            exact: true,
            members: labels
                .iter()
                .enumerate()
                .map(|(i, &c)| Member {
                    mask: TrainingVector::with_test_indices(n, [i]).unwrap(),
                    count: 1,
                    predictor: Predictor::Stump {
                        feature: 0,
                        threshold: f64::INFINITY,
                        left: Label::Class(c),
                        right: Label::Class(c),
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn majority_examples() {
        assert_eq!(voters(&[1, 1, 2]).predict_majority(&[0.0]).unwrap(), Label::Class(1));
        assert_eq!(voters(&[1, 2]).predict_majority(&[0.0]).unwrap(), Label::Class(1));
        assert_eq!(voters(&[2]).predict_majority(&[0.0]).unwrap(), Label::Class(2));
        assert_eq!(voters(&[2, 1, 2]).predict_majority(&[0.0]).unwrap(), Label::Class(2));
        assert!(voters(&[1]).predict_average(&[0.0]).is_err());
    }

    #[test]
    fn majority_of_errors_examples() {
        let (l, v) = majority_of_errors(&[0.9, 0.1, 0.2]).unwrap();
        assert_eq!(l, 2);
        assert!((v - 0.15).abs() < 1e-15);
        assert_eq!(majority_of_errors(&[0.3; 4]).unwrap(), (3, 0.3));
        assert_eq!(majority_of_errors(&[0.4]).unwrap(), (1, 0.4));
        assert_eq!(strict_majority(4), 3);
    }

    #[test]
    fn one_nn_two_fold_estimates() {
        let d = Dataset::from_1d_classes(&[0.0, 1.0, 0.1, 1.1], &[1, 2, 1, 2]).unwrap();
        let knn = Learner::Knn { k: 1 };
        let s = CvScheme::kfold(4, 2).unwrap();
        let c = Criterion::ZERO_ONE;
        assert_eq!(r_hat_cv_out(&knn, &d, &s, &c).unwrap().value, 0.0);
        assert_eq!(r_hat_cv_in(&knn, &d, &s, &c).unwrap().value, 0.0);
        let adversarial = Dataset::from_1d_classes(&[0.0, 1.0, 0.1, 1.1], &[1, 2, 2, 1]).unwrap();
        let est = r_hat_cv_out(&knn, &adversarial, &s, &c).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.per_member_errors, vec![1.0, 1.0]);
    }

    #[test]
    fn constant_labels_give_zero() {
        let d = Dataset::from_1d_classes(&[0.3, 0.1, 0.2], &[2, 2, 2]).unwrap();
        let est = r_hat_cv_out(&stump(), &d, &CvScheme::loo(3).unwrap(), &Criterion::ZERO_ONE).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.exact);
    }

    #[test]
    fn majority_estimate_refuses_sampled_sets() {
        let d = Dataset::from_1d_classes(&[0.1, 0.2, 0.3, 0.4, 0.5], &[1, 1, 2, 2, 2]).unwrap();
        let mc = CvScheme::new(SchemeKind::Mc { p: 0.2, draws: 10, seed: 1 }, 5).unwrap();
        assert!(r_hat_cv_maj(&stump(), &d, &mc, &Criterion::ZERO_ONE).is_err());
        let out = r_hat_cv_out(&stump(), &d, &mc, &Criterion::ZERO_ONE).unwrap();
        assert!(!out.exact);
        let maj = r_hat_cv_maj(&stump(), &d, &CvScheme::loo(5).unwrap(), &Criterion::ZERO_ONE).unwrap();
        assert_eq!(maj.l, Some(3));
    }

    #[test]
    fn true_risk_extremes() {
        let d = Dataset::from_1d_classes(&[0.0, 1.0, 2.0, 3.0], &[1, 1, 2, 2]).unwrap();
        let e = subag_fit(&stump(), &d, &CvScheme::loo(4).unwrap(), Aggregation::Majority).unwrap();
        let ghost = Dataset::from_1d_classes(&[-1.0, 4.0], &[1, 2]).unwrap();
        assert_eq!(e.true_risk(&ghost, &Criterion::ZERO_ONE).unwrap(), 0.0);
        let flipped = Dataset::from_1d_classes(&[-1.0, 4.0], &[2, 1]).unwrap();
        assert_eq!(e.true_risk(&flipped, &Criterion::ZERO_ONE).unwrap(), 1.0);
        assert_eq!(e.member_risk(&flipped, &Criterion::ZERO_ONE).unwrap(), 1.0);
    }

    #[test]
    fn regression_ensemble_round_trips_json() {
        let d =
            Dataset::regression((0..6).map(|i| Sample::new(vec![i as f64], Label::Value(i as f64 / 10.0))).collect())
                .unwrap();
        let l = Learner::Erm {
            class: HypothesisClass::Stump { feature: 0 },
            objective: Criterion::Loss(LossFunction::ClippedSquared),
        };
        let e = subag_fit(&l, &d, &CvScheme::kfold(6, 3).unwrap(), Aggregation::Average).unwrap();
        let json = serde_json::to_string(&e).unwrap();
        let back: SubaggedEnsemble = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
        assert!(subag_fit(&l, &d, &CvScheme::kfold(6, 3).unwrap(), Aggregation::Majority).is_err());
    }
}
