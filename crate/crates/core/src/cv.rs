//! Training-vector distributions for cross-validation schemes.
//!
//! `p` is always the test fraction: a training vector has `n(1 - p)` ones and
//! its complement, the test vector, has `np` ones.

use std::collections::BTreeMap;

use num_integer::Integer;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, refused, Result};

/// Default cap on the number of exactly enumerated leave-v-out vectors.
pub const DEFAULT_MAX_ENUM: u64 = 100_000;

/// A binary mask selecting the training subsample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct TrainingVector {
    mask: Vec<bool>,
}

impl TrainingVector {
    /// Requires at least one training and one test index.
    pub fn new(mask: Vec<bool>) -> Result<Self> {
        let ones = mask.iter().filter(|&&b| b).count();
        if ones == 0 || ones == mask.len() {
            return domain("a training vector needs at least one 1 and one 0");
        }
        Ok(TrainingVector { mask })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return domain("mask entries must be 0 or 1");
        }
        Self::new(bits.iter().map(|&b| b == 1).collect())
    }

    /// Training mask with the given test indices removed.
    pub fn with_test_indices(n: usize, test: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![true; n];
        for i in test {
            if i >= n {
                return domain(format!("test index {i} out of range for n = {n}"));
            }
            mask[i] = false;
        }
        Self::new(mask)
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.mask
    }

    pub fn train_size(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn test_size(&self) -> usize {
        self.len() - self.train_size()
    }

    /// The test vector `1 - v`.
    pub fn complement(&self) -> TrainingVector {
        TrainingVector { mask: self.mask.iter().map(|&b| !b).collect() }
    }
}

impl TryFrom<Vec<u8>> for TrainingVector {
    type Error = crate::Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::from_bits(&bits)
    }
}

impl From<TrainingVector> for Vec<u8> {
    fn from(v: TrainingVector) -> Self {
        v.mask.iter().map(|&b| b as u8).collect()
    }
}

/// The test vector of a training vector.
pub fn test_vector(v: &TrainingVector) -> TrainingVector {
    v.complement()
}

/// A cross-validation procedure, independent of the dataset size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase", deny_unknown_fields)]
pub enum SchemeKind {
    /// Contiguous equal folds.
    Kfold {
        k: usize,
    },
    Loo,
    /// Leave-v-out, enumerated when `C(n, v) <= max_enum`, otherwise sampled.
    Lpo {
        v: usize,
        #[serde(default = "default_max_enum")]
        max_enum: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        draws: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    /// The first `n(1 - p)` indices train, the rest test.
    Holdout {
        p: f64,
    },
    /// Seeded uniform draws of test sets of size `np`.
    Mc {
        p: f64,
        draws: usize,
        seed: u64,
    },
}

fn default_max_enum() -> u64 {
    DEFAULT_MAX_ENUM
}

impl SchemeKind {
    /// Binds the scheme to a dataset size, checking its invariants.
    pub fn over(&self, n: usize) -> Result<CvScheme> {
        CvScheme::new(self.clone(), n)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Kfold { .. } => "kfold",
            SchemeKind::Loo => "loo",
            SchemeKind::Lpo { .. } => "lpo",
            SchemeKind::Holdout { .. } => "holdout",
            SchemeKind::Mc { .. } => "mc",
        }
    }
}

/// A scheme bound to a dataset size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScheme {
    pub kind: SchemeKind,
    pub n: usize,
}

impl CvScheme {
    pub fn new(kind: SchemeKind, n: usize) -> Result<Self> {
        if n < 2 {
            return config("cross-validation needs n >= 2");
        }
        match &kind {
            SchemeKind::Kfold { k } => {
                if *k < 2 || *k > n {
                    return config(format!("k-fold needs 2 <= k <= n, got k = {k}, n = {n}"));
                }
                if !n.is_multiple_of(*k) {
                    return config(format!("k = {k} does not divide n = {n}"));
                }
            }
            SchemeKind::Loo => {}
            SchemeKind::Lpo { v, max_enum, draws, .. } => {
                if *v < 1 || *v >= n {
                    return config(format!("leave-v-out needs 1 <= v <= n - 1, got v = {v}"));
                }
                let feasible = binomial_capped(n as u64, *v as u64, *max_enum).is_some();
                match draws {
                    Some(0) => return config("draws must be positive"),
                    None if !feasible => {
                        return config(format!(
                            "C({n}, {v}) exceeds the enumeration cap {max_enum} and no draws were given"
                        ))
                    }
                    _ => {}
                }
            }
            SchemeKind::Holdout { p } => {
                test_size_of(*p, n)?;
            }
            SchemeKind::Mc { p, draws, .. } => {
                test_size_of(*p, n)?;
                if *draws == 0 {
                    return config("draws must be positive");
                }
            }
        }
        Ok(CvScheme { kind, n })
    }

    pub fn kfold(n: usize, k: usize) -> Result<Self> {
        Self::new(SchemeKind::Kfold { k }, n)
    }

    pub fn loo(n: usize) -> Result<Self> {
        Self::new(SchemeKind::Loo, n)
    }

    /// Leave-v-out with the default cap; sampled with `draws` beyond it.
    pub fn lpo(n: usize, v: usize, draws: Option<usize>, seed: u64) -> Result<Self> {
        Self::new(SchemeKind::Lpo { v, max_enum: DEFAULT_MAX_ENUM, draws, seed }, n)
    }

    /// Number of test indices of every vector.
    pub fn test_size(&self) -> usize {
        match &self.kind {
            SchemeKind::Kfold { k } => self.n / k,
            SchemeKind::Loo => 1,
            SchemeKind::Lpo { v, .. } => *v,
            SchemeKind::Holdout { p } | SchemeKind::Mc { p, .. } => {
                test_size_of(*p, self.n).expect("validated at construction")
            }
        }
    }

    pub fn train_size(&self) -> usize {
        self.n - self.test_size()
    }

    /// The test fraction `p`.
    pub fn test_fraction(&self) -> f64 {
        self.test_size() as f64 / self.n as f64
    }

    /// Whether the scheme's vector set is its full support.
    pub fn is_exact(&self) -> bool {
        match &self.kind {
            SchemeKind::Kfold { .. } | SchemeKind::Loo | SchemeKind::Holdout { .. } => true,
            SchemeKind::Lpo { v, max_enum, .. } => binomial_capped(self.n as u64, *v as u64, *max_enum).is_some(),
            SchemeKind::Mc { .. } => false,
        }
    }

    /// Whether inclusion probabilities are equal across indices.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self.kind, SchemeKind::Holdout { .. })
    }
}

fn test_size_of(p: f64, n: usize) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) {
        return config(format!("test fraction must lie in (0, 1), got {p}"));
    }
    let np = p * n as f64;
    let r = np.round();
    if (np - r).abs() > 1e-9 * n.max(1) as f64 {
        return config(format!("n p = {np} is not an integer"));
    }
    let t = r as usize;
    if t == 0 || t >= n {
        return config(format!("test size {t} must lie in 1..n for n = {n}"));
    }
    Ok(t)
}

/// `C(n, k)` if it does not exceed `cap`.
pub fn binomial_capped(n: u64, k: u64, cap: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Training vectors with integer multiplicities, sorted by mask.
///
/// The probability of entry `j` is `count_j / total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedVectorSet {
    pub entries: Vec<(TrainingVector, u64)>,
    pub total: u64,
    pub exact: bool,
}

impl WeightedVectorSet {
    fn from_counts(counts: BTreeMap<TrainingVector, u64>, exact: bool) -> Self {
        let total = counts.values().sum();
        WeightedVectorSet { entries: counts.into_iter().collect(), total, exact }
    }

    fn uniform(vectors: Vec<TrainingVector>) -> Self {
        let counts = vectors.into_iter().map(|v| (v, 1)).collect();
        Self::from_counts(counts, true)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n(&self) -> usize {
        self.entries.first().map_or(0, |(v, _)| v.len())
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.entries[j].1 as f64 / self.total as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.weight(j)).collect()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &TrainingVector> {
        self.entries.iter().map(|(v, _)| v)
    }

    /// `Pr(V_i = 1)` for each index; only defined for exact sets.
    pub fn inclusion_probabilities(&self) -> Result<Vec<f64>> {
        if !self.exact {
            return refused("inclusion probabilities of a sampled vector set are undecidable");
        }
        let mut acc = vec![0u64; self.n()];
        for (v, c) in &self.entries {
            for (a, &b) in acc.iter_mut().zip(v.bits()) {
                if b {
                    *a += c;
                }
            }
        }
        Ok(acc.into_iter().map(|a| a as f64 / self.total as f64).collect())
    }

    /// Whether all inclusion probabilities agree to `1e-12`.
    pub fn is_symmetric(&self) -> Result<bool> {
        let probs = self.inclusion_probabilities()?;
        let first = probs[0];
        Ok(probs.iter().all(|q| (q - first).abs() <= 1e-12))
    }
}

pub fn inclusion_probabilities(set: &WeightedVectorSet) -> Result<Vec<f64>> {
    set.inclusion_probabilities()
}

/// Enumerates (or samples) the vector set of a scheme.
pub fn enumerate_vectors(scheme: &CvScheme) -> Result<WeightedVectorSet> {
    let n = scheme.n;
    match &scheme.kind {
        SchemeKind::Kfold { k } => {
            let size = n / k;
            let folds = (0..*k)
                .map(|f| TrainingVector::with_test_indices(n, f * size..(f + 1) * size))
                .collect::<Result<Vec<_>>>()?;
            Ok(WeightedVectorSet::uniform(folds))
        }
        SchemeKind::Loo => {
            let vs = (0..n).map(|i| TrainingVector::with_test_indices(n, [i])).collect::<Result<Vec<_>>>()?;
            Ok(WeightedVectorSet::uniform(vs))
        }
        SchemeKind::Lpo { v, max_enum, draws, seed } => {
            if binomial_capped(n as u64, *v as u64, *max_enum).is_some() {
                let mut vs = Vec::new();
                for_each_combination(n, *v, |test| {
                    vs.push(TrainingVector::with_test_indices(n, test.iter().copied()));
                });
                Ok(WeightedVectorSet::uniform(vs.into_iter().collect::<Result<_>>()?))
            } else {
                let draws = draws
                    .ok_or_else(|| crate::Error::Config("enumeration cap exceeded without a sampling budget".into()))?;
                sample_vectors(n, *v, draws, *seed)
            }
        }
        SchemeKind::Holdout { .. } => {
            let t = scheme.test_size();
            let v = TrainingVector::with_test_indices(n, n - t..n)?;
            Ok(WeightedVectorSet::uniform(vec![v]))
        }
        SchemeKind::Mc { draws, seed, .. } => sample_vectors(n, scheme.test_size(), *draws, *seed),
    }
}

fn sample_vectors(n: usize, test_size: usize, draws: usize, seed: u64) -> Result<WeightedVectorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..draws {
        let test = index::sample(&mut rng, n, test_size);
        *counts.entry(TrainingVector::with_test_indices(n, test.iter())?).or_insert(0) += 1;
    }
    Ok(WeightedVectorSet::from_counts(counts, false))
}

/// Calls `f` on every increasing `k`-subset of `0..n`.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// L1 distance between the empirical measures of two masks over the same points.
///
/// Computed as the exact rational `sum_i |u_i S_v - v_i S_u| / (S_u S_v)`,
/// rounded once.
pub fn total_variation(u: &[bool], v: &[bool]) -> Result<f64> {
    if u.len() != v.len() {
        return domain("masks have different lengths");
    }
    let su = u.iter().filter(|&&b| b).count() as u128;
    let sv = v.iter().filter(|&&b| b).count() as u128;
    if su == 0 || sv == 0 {
        return domain("total variation needs masks with nonzero sums");
    }
    let num: u128 = u.iter().zip(v).map(|(&a, &b)| (a as u128 * sv).abs_diff(b as u128 * su)).sum();
    let den = su * sv;
    let g = num.gcd(&den).max(1);
    Ok((num / g) as f64 / (den / g) as f64)
}
