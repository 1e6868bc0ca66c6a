//! Choosing the test fraction by minimizing the out-of-sample estimate plus
//! the deviation that the bound pair guarantees at a target accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{log_vc_factor, BoundValue, Branch};
use crate::cv::{CvScheme, SchemeKind, DEFAULT_MAX_ENUM};
use crate::data::{Criterion, Dataset};
use crate::error::{config, domain, Result};
use crate::learners::Learner;
use crate::subagging::r_hat_cv_out;

/// Which `(B, V)` pair defines `delta_{n,k}` and its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundPair {
    /// `B = (2n(1-p) + 1)^(4 vc / (1-p)) exp(-n eps^2 / 9)`.
    #[default]
    Erm,
    /// `B = (2np + 1)^(4 vc / p) exp(-n eps^2)`.
    Sym,
}

impl std::str::FromStr for BoundPair {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erm" => Ok(BoundPair::Erm),
            "sym" | "symmetric" => Ok(BoundPair::Sym),
            _ => config(format!("unknown bound pair `{s}`")),
        }
    }
}

/// Both branches written as `exp(-a eps^2)` and `exp(l - b eps^2)`.
#[derive(Debug, Clone, Copy)]
struct Pair {
    a: f64,
    l: f64,
    b: f64,
    /// `b > a`, decided on `p` so that `p = 1/18` is not subject to rounding.
    crosses: bool,
}

impl Pair {
    fn new(pair: BoundPair, n: usize, p: f64, vc: u32) -> Result<Pair> {
        if n == 0 {
            return domain("n must be positive");
        }
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("p must lie in (0, 1), got {p}"));
        }
        if vc == 0 {
            return domain("vc must be at least 1");
        }
        let (nf, vc) = (n as f64, vc as f64);
        Ok(match pair {
            BoundPair::Erm => {
                Pair { a: 2.0 * nf * p, l: log_vc_factor(nf, 1.0 - p, vc), b: nf / 9.0, crosses: p < 1.0 / 18.0 }
            }
            BoundPair::Sym => Pair { a: 2.0 * nf * p, l: log_vc_factor(nf, p, vc), b: nf, crosses: p < 0.5 },
        })
    }

    /// Deviation where the two branches cross; beyond it `B` is smaller.
    fn eps_n(&self) -> f64 {
        if self.crosses {
            (self.l / (self.b - self.a)).sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// `ln(1/delta)` at the crossover, i.e. `a eps_n^2`.
    fn log_inv_delta_n(&self) -> f64 {
        if self.crosses {
            self.a * self.l / (self.b - self.a)
        } else {
            f64::INFINITY
        }
    }

    /// `ln(1 / min(B, V))` at `eps`.
    fn log_inv_bound(&self, eps: f64) -> f64 {
        (self.a * eps * eps).max(self.b * eps * eps - self.l)
    }

    /// Inverse of `min(B, V)` given `ln(1/delta)`; `true` when the `B` branch is inverted.
    fn inverse(&self, log_inv: f64) -> (f64, bool) {
        if log_inv <= self.log_inv_delta_n() {
            ((log_inv / self.a).sqrt(), false)
        } else {
            (((self.l + log_inv) / self.b).sqrt(), true)
        }
    }
}

/// `eps_n`: the ERM-pair crossover deviation, `+inf` for `p >= 1/18`.
pub fn epsilon_threshold(n: usize, p: f64, vc: u32) -> Result<f64> {
    Ok(Pair::new(BoundPair::Erm, n, p, vc)?.eps_n())
}

/// `(2n(1-p) + 1)^(-4 p vc / ((1-p)(1/9 - 2p)))` for `p < 1/18`, else 0.
///
/// This is the closed form usually quoted for the branch point. The inverse
/// [`f_inverse`] switches at [`delta_crossover`] instead, which is the exact
/// value `exp(-2np eps_n^2)` and equals the square of this one.
pub fn delta_threshold(n: usize, p: f64, vc: u32) -> Result<f64> {
    Pair::new(BoundPair::Erm, n, p, vc)?;
    if p >= 1.0 / 18.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let e = 4.0 * p * vc as f64 / (q * (1.0 / 9.0 - 2.0 * p));
    Ok((-e * (2.0 * n as f64 * q).ln_1p()).exp())
}

/// `exp(-2np eps_n^2)`: the value of both branches at `eps_n`; 0 for `p >= 1/18`.
pub fn delta_crossover(n: usize, p: f64, vc: u32) -> Result<f64> {
    Ok((-Pair::new(BoundPair::Erm, n, p, vc)?.log_inv_delta_n()).exp())
}

/// Deviation at which the ERM bound pair reaches `delta`.
pub fn f_inverse(n: usize, p: f64, delta: f64, vc: u32) -> Result<f64> {
    f_inverse_pair(BoundPair::Erm, n, p, delta, vc).map(|(v, _)| v)
}

/// [`f_inverse`] for either pair, also reporting the inverted branch.
pub fn f_inverse_pair(pair: BoundPair, n: usize, p: f64, delta: f64, vc: u32) -> Result<(f64, Branch)> {
    if !(delta > 0.0 && delta <= 1.0) {
        return domain(format!("delta must lie in (0, 1], got {delta}"));
    }
    Ok(invert(Pair::new(pair, n, p, vc)?, -delta.ln(), pair))
}

fn invert(pair: Pair, log_inv: f64, kind: BoundPair) -> (f64, Branch) {
    let (v, on_b) = pair.inverse(log_inv);
    let branch = match (on_b, kind) {
        (false, _) => Branch::Hoeffding,
        (true, BoundPair::Erm) => Branch::ErmTrain,
        (true, BoundPair::Sym) => Branch::VcTest,
    };
    (v, branch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub pair: BoundPair,
    pub criterion: Criterion,
    /// Rows with `C(n, k)` above this are sampled.
    pub max_enum: u64,
    /// Sampled vectors per row.
    pub draws: usize,
    pub seed: u64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            pair: BoundPair::Erm,
            criterion: Criterion::ZERO_ONE,
            max_enum: DEFAULT_MAX_ENUM,
            draws: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub k: usize,
    pub p: f64,
    pub r_hat_out: f64,
    pub exact: bool,
    /// `ln delta_{n,k}`; kept because `delta_{n,k}` underflows for large `n eta^2`.
    pub log_delta_nk: f64,
    pub delta_nk: f64,
    pub f_value: f64,
    pub f_branch: Branch,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTable {
    pub eta: f64,
    pub vc: u32,
    pub pair: BoundPair,
    pub rows: Vec<SplitRow>,
    pub k_star: usize,
    pub p_star: f64,
}

/// The leave-`k`-out scheme used for row `k`.
pub fn row_scheme(n: usize, k: usize, options: &SelectOptions) -> Result<CvScheme> {
    CvScheme::new(
        SchemeKind::Lpo {
            v: k,
            max_enum: options.max_enum,
            draws: Some(options.draws),
            seed: options.seed.wrapping_add(k as u64),
        },
        n,
    )
}

/// `delta_{n,k}` and `f(n, k/n, delta_{n,k})` for row `k`, from logs.
pub fn row_bound(pair: BoundPair, n: usize, k: usize, eta: f64, vc: u32) -> Result<(f64, f64, Branch)> {
    let pr = Pair::new(pair, n, k as f64 / n as f64, vc)?;
    let log_inv = pr.log_inv_bound(eta);
    let (f, branch) = invert(pr, log_inv, pair);
    Ok((-log_inv, f, branch))
}

/// Evaluates every test size `k` in `1..n` and picks the smallest objective.
pub fn select_split(
    learner: &Learner,
    data: &Dataset,
    eta: f64,
    vc: u32,
    options: &SelectOptions,
) -> Result<SplitTable> {
    let n = data.len();
    if n < 3 {
        return domain("split selection needs at least 3 samples");
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return domain(format!("eta must be positive, got {eta}"));
    }
    if vc == 0 {
        return domain("vc must be at least 1");
    }
    if options.draws == 0 {
        return config("draws must be positive");
    }
    let rows = (1..n)
        .into_par_iter()
        .map(|k| {
            let scheme = row_scheme(n, k, options)?;
            let est = r_hat_cv_out(learner, data, &scheme, &options.criterion)?;
            let (log_delta_nk, f_value, f_branch) = row_bound(options.pair, n, k, eta, vc)?;
            Ok(SplitRow {
                k,
                p: k as f64 / n as f64,
                r_hat_out: est.value,
                exact: est.exact,
                log_delta_nk,
                delta_nk: log_delta_nk.exp(),
                f_value,
                f_branch,
                objective: est.value + f_value,
            })
        })
        .collect::<Result<Vec<SplitRow>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.objective < rows[best].objective {
            best = i;
        }
    }
    Ok(SplitTable { eta, vc, pair: options.pair, k_star: rows[best].k, p_star: rows[best].p, rows })
}

/// Rate envelope `(n+1)^(8 vc) exp(-2n (eta - 2 sqrt(2 vc ln n / n))^2) / (1 - exp(-2 eta^2))`.
///
/// A large-sample rate, not a finite-sample bound. Returns 1 when the shifted
/// deviation is not positive.
pub fn selection_envelope(n: usize, eta: f64, vc: u32) -> Result<BoundValue> {
    if n < 2 {
        return domain("n must be at least 2");
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return domain(format!("eta must be positive, got {eta}"));
    }
    if vc == 0 {
        return domain("vc must be at least 1");
    }
    let (nf, v) = (n as f64, vc as f64);
    let shifted = eta - 2.0 * 2f64.sqrt() * v.sqrt() * (nf.ln() / nf).sqrt();
    let log_value = if shifted <= 0.0 {
        0.0
    } else {
        8.0 * v * nf.ln_1p() - 2.0 * nf * shifted * shifted - (-(-2.0 * eta * eta).exp_m1()).ln()
    };
    Ok(BoundValue::min_of(&[(Branch::Envelope, log_value)]))
}
