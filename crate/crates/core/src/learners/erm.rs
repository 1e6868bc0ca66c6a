//! Exhaustive ERM over canonical candidate grids.
//!
//! Thresholds are `-inf`, the midpoints between consecutive distinct feature
//! values, and `+inf`. Candidates are scanned in lexicographic parameter order
//! and only a strictly better objective replaces the incumbent.

use crate::data::{Criterion, Label, LossFunction, Sample, Task};
use crate::error::{domain, Result};

use super::{cell_index, HypothesisClass, Predictor};

const MAX_CELLS: usize = 1 << 20;

pub(super) fn fit(
    class: &HypothesisClass,
    objective: &Criterion,
    samples: &[&Sample],
    task: Task,
    dim: usize,
) -> Result<Predictor> {
    match task {
        Task::Classification { classes } => {
            if !objective.is_classification() {
                return domain(format!("objective {objective} needs a regression task"));
            }
            let cost = CostTable::new(objective, classes)?;
            match class {
                HypothesisClass::Histogram { bins, lo, hi } => histogram_classify(*bins, *lo, *hi, dim, &cost, samples),
                _ => {
                    if classes != 2 {
                        return domain("threshold classes need binary labels {1, 2}");
                    }
                    threshold_classify(class, &cost, samples)
                }
            }
        }
        Task::Regression => {
            let stat = LeafStat::for_objective(objective)?;
            match class {
                HypothesisClass::Histogram { bins, lo, hi } => histogram_regress(*bins, *lo, *hi, dim, stat, samples),
                _ => threshold_regress(class, stat, samples),
            }
        }
    }
}

/// Objective value of predicting class `b` for true class `a`.
struct CostTable {
    classes: u32,
    cost: Vec<f64>,
}

impl CostTable {
    fn new(objective: &Criterion, classes: u32) -> Result<Self> {
        let mut cost = Vec::with_capacity((classes * classes) as usize);
        for a in 1..=classes {
            for b in 1..=classes {
                cost.push(objective.evaluate(Label::Class(a), Label::Class(b))?);
            }
        }
        Ok(CostTable { classes, cost })
    }

    fn get(&self, truth: u32, pred: u32) -> f64 {
        self.cost[((truth - 1) * self.classes + (pred - 1)) as usize]
    }

    /// Total cost of predicting `pred` for a group with the given label counts.
    fn total(&self, counts: &[u64], pred: u32) -> f64 {
        counts.iter().enumerate().map(|(y, &c)| c as f64 * self.get(y as u32 + 1, pred)).sum()
    }

    /// Cheapest label for a group, smallest label on ties.
    fn best(&self, counts: &[u64]) -> u32 {
        let mut best = (1, self.total(counts, 1));
        for label in 2..=self.classes {
            let v = self.total(counts, label);
            if v < best.1 {
                best = (label, v);
            }
        }
        best.0
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let d = b - a;
    let m = if d.is_finite() { a + d / 2.0 } else { a / 2.0 + b / 2.0 };
    if m >= b {
        a
    } else {
        m
    }
}

/// Thresholds between groups: `t[j]` puts the first `j` groups on the left.
fn thresholds(values: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(values.len() + 1);
    t.push(f64::NEG_INFINITY);
    for w in values.windows(2) {
        t.push(midpoint(w[0], w[1]));
    }
    t.push(f64::INFINITY);
    t
}

fn feature_of(class: &HypothesisClass) -> usize {
    class.feature().expect("threshold class")
}

fn threshold_classify(class: &HypothesisClass, cost: &CostTable, samples: &[&Sample]) -> Result<Predictor> {
    let f = feature_of(class);
    let mut pts: Vec<(f64, usize)> =
        samples.iter().map(|s| (s.x[f], s.y.class().expect("class label") as usize - 1)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut values: Vec<f64> = Vec::new();
    let mut prefix: Vec<[u64; 2]> = vec![[0, 0]];
    for (v, y) in pts {
        if values.last() != Some(&v) {
            values.push(v);
            let last = *prefix.last().unwrap();
            prefix.push(last);
        }
        prefix.last_mut().unwrap()[y] += 1;
    }
    let t = thresholds(&values);
    let total = *prefix.last().unwrap();
    let sub = |a: [u64; 2], b: [u64; 2]| [a[0] - b[0], a[1] - b[1]];
    let split_cost = |inside: [u64; 2], label_in: u32, label_out: u32| {
        cost.total(&inside, label_in) + cost.total(&sub(total, inside), label_out)
    };

    match class {
        HypothesisClass::HalfLine { .. } | HypothesisClass::Stump { .. } => {
            let orientations: &[(u32, u32)] =
                if matches!(class, HypothesisClass::HalfLine { .. }) { &[(1, 2)] } else { &[(1, 2), (2, 1)] };
            let mut best: Option<(f64, usize, u32, u32)> = None;
            for (j, left) in prefix.iter().enumerate() {
                for &(a, b) in orientations {
                    let obj = split_cost(*left, a, b);
                    if best.is_none_or(|(o, ..)| obj < o) {
                        best = Some((obj, j, a, b));
                    }
                }
            }
            let (_, j, a, b) = best.expect("at least one candidate");
            Ok(Predictor::Stump { feature: f, threshold: t[j], left: Label::Class(a), right: Label::Class(b) })
        }
        HypothesisClass::Interval { .. } => {
            // the empty interval (-inf, -inf] comes first in parameter order
            let mut best = (split_cost([0, 0], 2, 1), f64::NEG_INFINITY, f64::NEG_INFINITY);
            for i in 0..t.len() {
                for j in i + 1..t.len() {
                    let obj = split_cost(sub(prefix[j], prefix[i]), 2, 1);
                    if obj < best.0 {
                        best = (obj, t[i], t[j]);
                    }
                }
            }
            Ok(Predictor::Interval {
                feature: f,
                lo: best.1,
                hi: best.2,
                inside: Label::Class(2),
                outside: Label::Class(1),
            })
        }
        HypothesisClass::Histogram { .. } => unreachable!(),
    }
}

#[derive(Debug, Clone, Copy)]
enum LeafStat {
    Mean(LossFunction),
    LowerMedian(LossFunction),
}

impl LeafStat {
    fn for_objective(objective: &Criterion) -> Result<Self> {
        match objective {
            Criterion::Loss(l @ LossFunction::ClippedSquared) => Ok(LeafStat::Mean(*l)),
            Criterion::Loss(l @ LossFunction::ClippedAbsolute) => Ok(LeafStat::LowerMedian(*l)),
            other => domain(format!("objective {other} needs a classification task")),
        }
    }

    fn loss(self) -> LossFunction {
        match self {
            LeafStat::Mean(l) | LeafStat::LowerMedian(l) => l,
        }
    }

    /// Leaf value of a target group; `0` for an empty group.
    fn value(self, targets: &[f64]) -> f64 {
        if targets.is_empty() {
            return 0.0;
        }
        match self {
            LeafStat::Mean(_) => {
                let mut sorted = targets.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted.iter().sum::<f64>() / sorted.len() as f64
            }
            LeafStat::LowerMedian(_) => {
                let mut sorted = targets.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted[(sorted.len() - 1) / 2]
            }
        }
    }

    /// Leaf value and total loss of a group, summed in a canonical order.
    fn fit_group(self, targets: &[f64]) -> (f64, f64) {
        let c = self.value(targets);
        let mut losses: Vec<f64> =
            targets.iter().map(|&y| self.loss().evaluate(Label::Value(y), Label::Value(c)).expect("finite")).collect();
        losses.sort_by(f64::total_cmp);
        (c, losses.iter().sum())
    }
}

fn threshold_regress(class: &HypothesisClass, stat: LeafStat, samples: &[&Sample]) -> Result<Predictor> {
    let f = feature_of(class);
    let mut pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.x[f], s.y.value().expect("regression target"))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // starts[j] is the index of the first point of group j
    let mut values: Vec<f64> = Vec::new();
    let mut starts: Vec<usize> = Vec::new();
    for (i, &(v, _)) in pts.iter().enumerate() {
        if values.last() != Some(&v) {
            values.push(v);
            starts.push(i);
        }
    }
    starts.push(pts.len());
    let targets: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let t = thresholds(&values);

    match class {
        HypothesisClass::HalfLine { .. } | HypothesisClass::Stump { .. } => {
            let mut best: Option<(f64, usize, f64, f64)> = None;
            for (j, &s) in starts.iter().enumerate() {
                let (a, la) = stat.fit_group(&targets[..s]);
                let (b, lb) = stat.fit_group(&targets[s..]);
                let obj = la + lb;
                if best.is_none_or(|(o, ..)| obj < o) {
                    best = Some((obj, j, a, b));
                }
            }
            let (_, j, a, b) = best.expect("at least one candidate");
            Ok(Predictor::Stump { feature: f, threshold: t[j], left: Label::Value(a), right: Label::Value(b) })
        }
        HypothesisClass::Interval { .. } => {
            let (out, lo_all) = stat.fit_group(&targets);
            let mut best = (lo_all, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, out);
            for i in 0..t.len() {
                for j in i + 1..t.len() {
                    let (a, b) = (starts[i], starts[j]);
                    let (inside, li) = stat.fit_group(&targets[a..b]);
                    let rest: Vec<f64> = targets[..a].iter().chain(&targets[b..]).copied().collect();
                    let (outside, lo) = stat.fit_group(&rest);
                    let obj = li + lo;
                    if obj < best.0 {
                        best = (obj, t[i], t[j], inside, outside);
                    }
                }
            }
            Ok(Predictor::Interval {
                feature: f,
                lo: best.1,
                hi: best.2,
                inside: Label::Value(best.3),
                outside: Label::Value(best.4),
            })
        }
        HypothesisClass::Histogram { .. } => unreachable!(),
    }
}

fn cell_count(bins: usize, dim: usize) -> Result<usize> {
    match bins.checked_pow(dim as u32) {
        Some(c) if c <= MAX_CELLS => Ok(c),
        _ => domain(format!("histogram with {bins}^{dim} cells is too large")),
    }
}

fn histogram_classify(
    bins: usize,
    lo: f64,
    hi: f64,
    dim: usize,
    cost: &CostTable,
    samples: &[&Sample],
) -> Result<Predictor> {
    let cells = cell_count(bins, dim)?;
    let m = cost.classes as usize;
    let mut counts = vec![0u64; cells * m];
    for s in samples {
        let c = cell_index(&s.x, bins, lo, hi);
        counts[c * m + s.y.class().expect("class label") as usize - 1] += 1;
    }
    let labels = counts.chunks(m).map(|group| Label::Class(cost.best(group))).collect();
    Ok(Predictor::Histogram { bins, lo, hi, dim, cells: labels })
}

fn histogram_regress(
    bins: usize,
    lo: f64,
    hi: f64,
    dim: usize,
    stat: LeafStat,
    samples: &[&Sample],
) -> Result<Predictor> {
    let cells = cell_count(bins, dim)?;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); cells];
    for s in samples {
        groups[cell_index(&s.x, bins, lo, hi)].push(s.y.value().expect("regression target"));
    }
    let labels = groups.iter().map(|g| Label::Value(stat.value(g))).collect();
    Ok(Predictor::Histogram { bins, lo, hi, dim, cells: labels })
}
