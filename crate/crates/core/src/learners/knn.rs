use crate::data::{Label, Sample, Task};
use crate::error::{domain, Result};

use super::Predictor;

pub(super) fn fit(k: usize, samples: &[&Sample], task: Task) -> Result<Predictor> {
    if k == 0 {
        return domain("k must be positive");
    }
    if k > samples.len() {
        return domain(format!("k = {k} exceeds the {} training points", samples.len()));
    }
    Ok(Predictor::Knn { k, task, points: samples.iter().map(|&s| s.clone()).collect() })
}

/// `points` are stored in canonical order, so index ties are order-invariant.
pub(super) fn predict(k: usize, task: Task, points: &[Sample], x: &[f64]) -> Label {
    let mut dist: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = p.x.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d, i)
        })
        .collect();
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_rank);
        dist.truncate(k);
    }
    dist.sort_by(by_rank);
    match task {
        Task::Classification { classes } => {
            let mut votes = vec![0usize; classes as usize];
            for &(_, i) in &dist {
                votes[points[i].y.class().expect("class label") as usize - 1] += 1;
            }
            let mut best = 0;
            for (c, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = c;
                }
            }
            Label::Class(best as u32 + 1)
        }
        Task::Regression => {
            let sum: f64 = dist.iter().map(|&(_, i)| points[i].y.value().expect("regression target")).sum();
            Label::Value(sum / k as f64)
        }
    }
}
