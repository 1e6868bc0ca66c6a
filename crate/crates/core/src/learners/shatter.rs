use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, refused, Result};

use super::{cell_index, HypothesisClass};

/// Largest point set accepted by [`shatter_coefficient`].
pub const MAX_SHATTER_POINTS: usize = 20;

const MAX_VC_SEARCH: usize = 12;
const RANDOM_CONFIGS: usize = 32;

/// Number of distinct subsets of `points` labelled class 2 by some member of the class.
pub fn shatter_coefficient(class: &HypothesisClass, points: &[Vec<f64>]) -> Result<u64> {
    class.validate()?;
    if points.len() > MAX_SHATTER_POINTS {
        return refused(format!("{} points exceed the shatter cap of {MAX_SHATTER_POINTS}", points.len()));
    }
    let Some(first) = points.first() else {
        return Ok(1);
    };
    let dim = first.len();
    if points.iter().any(|p| p.len() != dim) {
        return domain("points have different dimensions");
    }
    Ok(dichotomies(class, points, dim)?.len() as u64)
}

fn dichotomies(class: &HypothesisClass, points: &[Vec<f64>], dim: usize) -> Result<HashSet<u32>> {
    let mut sets = HashSet::new();
    match class {
        HypothesisClass::Histogram { bins, lo, hi } => {
            let cells: Vec<usize> = points.iter().map(|p| cell_index(p, *bins, *lo, *hi)).collect();
            let mut occupied = cells.clone();
            occupied.sort_unstable();
            occupied.dedup();
            for assign in 0u32..1 << occupied.len() {
                let mut set = 0u32;
                for (i, c) in cells.iter().enumerate() {
                    let slot = occupied.binary_search(c).expect("occupied cell");
                    if assign >> slot & 1 == 1 {
                        set |= 1 << i;
                    }
                }
                sets.insert(set);
            }
        }
        _ => {
            let f = class.feature().expect("threshold class");
            if f >= dim {
                return domain(format!("feature {f} out of range for dimension {dim}"));
            }
            let v: Vec<f64> = points.iter().map(|p| p[f]).collect();
            let mut t: Vec<f64> = v.clone();
            t.sort_by(f64::total_cmp);
            t.dedup();
            // one threshold below all points, then one at each distinct value
            let mut cuts = vec![f64::NEG_INFINITY];
            cuts.extend(t);
            let above =
                |c: f64| -> u32 { v.iter().enumerate().filter(|(_, &x)| x > c).fold(0, |s, (i, _)| s | 1 << i) };
            let all = (1u32 << v.len()) - 1;
            match class {
                HypothesisClass::HalfLine { .. } => {
                    sets.extend(cuts.iter().map(|&c| above(c)));
                }
                HypothesisClass::Stump { .. } => {
                    for &c in &cuts {
                        let s = above(c);
                        sets.insert(s);
                        sets.insert(all & !s);
                    }
                }
                HypothesisClass::Interval { .. } => {
                    sets.insert(0);
                    for (i, &a) in cuts.iter().enumerate() {
                        for &b in &cuts[i + 1..] {
                            sets.insert(above(a) & !above(b));
                        }
                    }
                }
                HypothesisClass::Histogram { .. } => unreachable!(),
            }
        }
    }
    Ok(sets)
}

/// Largest `k <= max_n` for which a searched configuration of `k` points in
/// one dimension is shattered.
pub fn vc_lower_bound(class: &HypothesisClass, max_n: usize) -> Result<u32> {
    vc_lower_bound_in(class, 1, max_n)
}

/// [`vc_lower_bound`] for points of dimension `dim`.
pub fn vc_lower_bound_in(class: &HypothesisClass, dim: usize, max_n: usize) -> Result<u32> {
    class.validate()?;
    if max_n > MAX_VC_SEARCH {
        return refused(format!("max_n = {max_n} exceeds {MAX_VC_SEARCH}"));
    }
    let dim = match class.feature() {
        Some(f) => dim.max(f + 1),
        None => dim.max(1),
    };
    let mut best = 0;
    for k in 1..=max_n {
        let mut shattered = false;
        for config in configurations(class, dim, k) {
            if shatter_coefficient(class, &config)? == 1 << k {
                shattered = true;
                break;
            }
        }
        if !shattered {
            break;
        }
        best = k as u32;
    }
    Ok(best)
}

fn configurations(class: &HypothesisClass, dim: usize, k: usize) -> Vec<Vec<Vec<f64>>> {
    let mut configs = Vec::new();
    let (lo, hi) = match class {
        HypothesisClass::Histogram { bins, lo, hi } => {
            // cell centres, one point per cell while cells remain
            let w = (hi - lo) / *bins as f64;
            let cells = bins.saturating_pow(dim as u32);
            let centre = |mut c: usize| -> Vec<f64> {
                (0..dim)
                    .map(|_| {
                        let b = c % bins;
                        c /= bins;
                        lo + (b as f64 + 0.5) * w
                    })
                    .collect()
            };
            configs.push((0..k).map(|i| centre(i % cells)).collect());
            (*lo, *hi)
        }
        _ => {
            let f = class.feature().expect("threshold class");
            configs.push(
                (0..k)
                    .map(|i| {
                        let mut p = vec![0.0; dim];
                        p[f] = i as f64;
                        p
                    })
                    .collect(),
            );
            (0.0, 1.0)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + k as u64);
    for _ in 0..RANDOM_CONFIGS {
        configs.push((0..k).map(|_| (0..dim).map(|_| rng.random_range(lo..hi)).collect()).collect());
    }
    configs
}
