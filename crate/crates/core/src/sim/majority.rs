use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, refused, Result};
use crate::subagging::strict_majority;

pub const MAX_ORACLE_M: usize = 4;
pub const MAX_ORACLE_N: usize = 5;

/// Binary mistakes of `members` predictors on `rows` ghost points, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MistakeMatrix {
    pub rows: usize,
    pub members: usize,
    pub entries: Vec<bool>,
}

impl MistakeMatrix {
    pub fn new(rows: usize, members: usize, entries: Vec<bool>) -> Result<Self> {
        if rows == 0 || members == 0 || entries.len() != rows * members {
            return domain("mistake matrix needs rows * members entries with both positive");
        }
        Ok(MistakeMatrix { rows, members, entries })
    }

    /// Bit `i * members + j` of `bits` is entry `(i, j)`.
    pub fn from_bits(rows: usize, members: usize, bits: u32) -> Self {
        let entries = (0..rows * members).map(|b| bits >> b & 1 == 1).collect();
        MistakeMatrix { rows, members, entries }
    }

    fn row(&self, i: usize) -> &[bool] {
        &self.entries[i * self.members..(i + 1) * self.members]
    }

    pub fn total(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    /// Rows where a strict majority did not classify correctly.
    pub fn kappa(&self) -> usize {
        let ok = (self.members - 1) / 2;
        (0..self.rows).filter(|&i| self.row(i).iter().filter(|&&e| e).count() > ok).count()
    }

    pub fn l(&self) -> usize {
        strict_majority(self.members)
    }

    /// Mistakes of the `l` best columns.
    pub fn best_l_sum(&self) -> usize {
        let mut cols: Vec<usize> =
            (0..self.members).map(|j| (0..self.rows).filter(|&i| self.entries[i * self.members + j]).count()).collect();
        cols.sort_unstable();
        cols[..self.l()].iter().sum()
    }

    /// Mean entry.
    pub fn e_a(&self) -> f64 {
        self.total() as f64 / (self.rows * self.members) as f64
    }

    /// Error of the strict-majority vote.
    pub fn e_b(&self) -> f64 {
        self.kappa() as f64 / self.rows as f64
    }

    /// Mean error of the `l` best members.
    pub fn e_g(&self) -> f64 {
        self.best_l_sum() as f64 / (self.l() * self.rows) as f64
    }

    /// The first inequality that fails, checked in exact integer arithmetic.
    pub fn violated(&self) -> Option<Inequality> {
        let (m, n) = (self.rows as i64, self.members as i64);
        let kappa = self.kappa() as i64;
        let total = self.total() as i64;
        let l = self.l() as i64;
        let s_l = self.best_l_sum() as i64;
        let half = (n + 1) / 2;
        if kappa * half > total {
            return Some(Inequality::MistakeCount);
        }
        // kappa / m <= (N / half) * total / (m N), cross-multiplied
        if kappa * half * m * n > n * total * m {
            return Some(Inequality::AverageRatio);
        }
        if kappa > s_l {
            return Some(Inequality::BestL);
        }
        if kappa < m * (1 - l) + s_l {
            return Some(Inequality::BinaryLower);
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    /// `kappa floor((N+1)/2) <= sum of entries`.
    MistakeCount,
    /// `e_B <= (N / floor((N+1)/2)) e_a`.
    AverageRatio,
    /// `e_B <= l e_G`.
    BestL,
    /// `e_B >= 1 - l (1 - e_G)`.
    BinaryLower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub max_m: usize,
    pub max_n: usize,
    pub matrices_checked: u64,
    pub counterexample: Option<(MistakeMatrix, Inequality)>,
}

impl OracleVerdict {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Checks every binary matrix with `1 <= rows <= max_m` and `1 <= members <= max_n`.
pub fn majority_inequality_oracle(max_m: usize, max_n: usize) -> Result<OracleVerdict> {
    if max_m > MAX_ORACLE_M || max_n > MAX_ORACLE_N {
        return refused(format!("enumeration is capped at m <= {MAX_ORACLE_M}, N <= {MAX_ORACLE_N}"));
    }
    let mut checked = 0u64;
    for m in 1..=max_m {
        for n in 1..=max_n {
            let count = 1u32 << (m * n);
            let bad = (0..count)
                .into_par_iter()
                .find_first(|&bits| MistakeMatrix::from_bits(m, n, bits).violated().is_some());
            if let Some(bits) = bad {
                let mat = MistakeMatrix::from_bits(m, n, bits);
                let which = mat.violated().expect("violated");
                return Ok(OracleVerdict {
                    max_m,
                    max_n,
                    matrices_checked: checked + bits as u64 + 1,
                    counterexample: Some((mat, which)),
                });
            }
            checked += count as u64;
        }
    }
    Ok(OracleVerdict { max_m, max_n, matrices_checked: checked, counterexample: None })
}
