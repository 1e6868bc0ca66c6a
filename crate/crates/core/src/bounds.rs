//! Concentration and expectation bounds, evaluated in the natural-log domain.
//!
//! Every probability bound is a minimum over branches. The minimum is taken
//! on unclamped logs and only then exponentiated and clamped to `[0, 1]`, so
//! the reported branch is the one attaining the minimum even when the bound is
//! vacuous.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Which term of a bound attained the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `exp(-2 n p eps^2)`.
    Hoeffding,
    /// `(2np + 1)^(4 vc / p) exp(-n eps^2)`.
    VcTest,
    /// `(2n(1-p) + 1)^(4 vc / (1-p)) exp(-n eps^2)`.
    VcTrain,
    /// `(2n(1-p) + 1)^(4 vc / (1-p)) exp(-n eps^2 / 9)`.
    ErmTrain,
    /// `(2n/k + 1)^(4 k vc) exp(-n eps^2)`.
    KfoldVc,
    /// `2^k exp(-n eps^2 / (64 (sqrt(vc ln(2(2n/k + 1))) + 2)))`.
    KfoldChaining,
    StrongStability,
    WeakStability,
    KutinStrong,
    KutinWeak,
    HalfOut,
    Majority,
    BinaryHalf,
    BinaryMajority,
    /// `(2n(1-p) + 1)^(4 vc / (1-p)) exp(-4 n (1-p) eps^2)`.
    ErmHalfVc,
    /// The split-selection rate envelope.
    Envelope,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    /// `min(1, exp(log_value))`.
    pub value: f64,
    /// Unclamped natural log of the minimum; may be `-inf`.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub log_value: f64,
    pub branch: Branch,
    /// Set when a requested branch was unavailable and dropped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged: bool,
}

impl BoundValue {
    /// Minimum over log-domain terms, first term on ties.
    pub fn min_of(terms: &[(Branch, f64)]) -> BoundValue {
        let mut best = terms[0];
        for &t in &terms[1..] {
            if t.1 < best.1 {
                best = t;
            }
        }
        BoundValue { value: best.1.min(0.0).exp(), log_value: best.1, branch: best.0, flagged: false }
    }

    fn single(branch: Branch, log_value: f64) -> BoundValue {
        Self::min_of(&[(branch, log_value)])
    }
}

/// `ln(sum exp(x_i))`, exact for `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return domain("n must be positive");
    }
    Ok(n as f64)
}

fn check_p(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        domain(format!("p must lie in (0, 1), got {p}"))
    }
}

fn check_eps(eps: f64) -> Result<f64> {
    if eps >= 0.0 {
        Ok(eps)
    } else {
        domain(format!("eps must be nonnegative, got {eps}"))
    }
}

fn check_vc(vc: u32) -> Result<f64> {
    if vc >= 1 {
        Ok(vc as f64)
    } else {
        domain("vc must be at least 1")
    }
}

fn check_prob(name: &str, d: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&d) {
        Ok(d)
    } else {
        domain(format!("{name} must lie in [0, 1], got {d}"))
    }
}

fn check_positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        domain(format!("{name} must be positive and finite, got {v}"))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        domain(format!("{name} must be nonnegative and finite, got {v}"))
    }
}

/// `-c eps^2`, with `0 * inf` taken as `0` and no negative zero.
fn quad(c: f64, eps: f64) -> f64 {
    if c == 0.0 || eps == 0.0 {
        0.0
    } else {
        -c * eps * eps
    }
}

pub(crate) fn log_hoeffding(n: f64, p: f64, eps: f64) -> f64 {
    quad(2.0 * n * p, eps)
}

/// `(4 vc / q) ln(2 n q + 1)`: the log of the shatter factor for a subsample fraction `q`.
pub(crate) fn log_vc_factor(n: f64, q: f64, vc: f64) -> f64 {
    4.0 * vc / q * (2.0 * n * q).ln_1p()
}

pub fn v_sym(n: usize, p: f64, eps: f64) -> Result<BoundValue> {
    let (n, p, eps) = (check_n(n)?, check_p(p)?, check_eps(eps)?);
    Ok(BoundValue::single(Branch::Hoeffding, log_hoeffding(n, p, eps)))
}

pub fn b_sym_out(n: usize, p: f64, eps: f64, vc: u32) -> Result<BoundValue> {
    let (n, p, eps, vc) = (check_n(n)?, check_p(p)?, check_eps(eps)?, check_vc(vc)?);
    Ok(BoundValue::single(Branch::VcTest, log_vc_factor(n, p, vc) + quad(n, eps)))
}

pub fn b_sym_in(n: usize, p: f64, eps: f64, vc: u32) -> Result<BoundValue> {
    let (n, p, eps, vc) = (check_n(n)?, check_p(p)?, check_eps(eps)?, check_vc(vc)?);
    Ok(BoundValue::single(Branch::VcTrain, log_vc_factor(n, 1.0 - p, vc) + quad(n, eps)))
}

/// `min(B_sym, V_sym)` for the out-of-sample estimate.
pub fn sym_out(n: usize, p: f64, eps: f64, vc: u32) -> Result<BoundValue> {
    let v = v_sym(n, p, eps)?;
    let b = b_sym_out(n, p, eps, vc)?;
    Ok(BoundValue::min_of(&[(v.branch, v.log_value), (b.branch, b.log_value)]))
}

/// `min(B_sym, V_sym)` for the in-sample estimate.
pub fn sym_in(n: usize, p: f64, eps: f64, vc: u32) -> Result<BoundValue> {
    let v = v_sym(n, p, eps)?;
    let b = b_sym_in(n, p, eps, vc)?;
    Ok(BoundValue::min_of(&[(v.branch, v.log_value), (b.branch, b.log_value)]))
}

pub fn bound_erm(n: usize, p: f64, eps: f64, vc: u32) -> Result<BoundValue> {
    let (n, p, eps, vc) = (check_n(n)?, check_p(p)?, check_eps(eps)?, check_vc(vc)?);
    Ok(BoundValue::min_of(&[
        (Branch::Hoeffding, log_hoeffding(n, p, eps)),
        (Branch::VcTest, log_vc_factor(n, p, vc) + quad(n, eps)),
        (Branch::ErmTrain, log_vc_factor(n, 1.0 - p, vc) + quad(n / 9.0, eps)),
    ]))
}

/// k-fold bound; the Hoeffding term is evaluated exactly as [`v_sym`] at `p = 1/k`.
pub fn bound_kfold(n: usize, k: usize, eps: f64, vc: u32) -> Result<BoundValue> {
    let (nf, eps, vc) = (check_n(n)?, check_eps(eps)?, check_vc(vc)?);
    if k < 2 || !n.is_multiple_of(k) {
        return domain(format!("k = {k} must be at least 2 and divide n = {n}"));
    }
    let kf = k as f64;
    let fold = (n / k) as f64;
    let p = 1.0 / kf;
    let chaining =
        kf * std::f64::consts::LN_2 + quad(nf / (64.0 * ((vc * (2.0 * (2.0 * fold + 1.0)).ln()).sqrt() + 2.0)), eps);
    Ok(BoundValue::min_of(&[
        (Branch::KfoldVc, 4.0 * kf * vc * (2.0 * fold).ln_1p() + quad(nf, eps)),
        (Branch::Hoeffding, log_hoeffding(nf, p, eps)),
        (Branch::KfoldChaining, chaining),
    ]))
}

/// Bound on the expected deviation of the out-of-sample estimate.
///
/// `sqrt(1 / (np))`, or with `erm_vc` also `6 sqrt(vc (ln(n(1-p)) + 2) / (n(1-p)))`.
pub fn l1_bound(n: usize, p: f64, erm_vc: Option<u32>) -> Result<f64> {
    let (nf, p) = (check_n(n)?, check_p(p)?);
    let generic = (1.0 / (nf * p)).sqrt();
    match erm_vc {
        None => Ok(generic),
        Some(vc) => {
            let vc = check_vc(vc)?;
            let m = nf * (1.0 - p);
            Ok(generic.min(6.0 * (vc * (m.ln() + 2.0) / m).sqrt()))
        }
    }
}

/// `sqrt((ln c + 2) / kappa)` for a tail `Pr(X >= t) <= c exp(-kappa t^2)`.
pub fn expectation_from_tail(c: f64, kappa: f64) -> Result<f64> {
    if !(c >= 1.0 && c.is_finite()) {
        return domain("c must be at least 1");
    }
    let kappa = check_positive("kappa", kappa)?;
    Ok(((c.ln() + 2.0) / kappa).sqrt())
}

/// Strong-stability bound.
///
/// Without `alpha` this is `2(exp(-eps^2 / (8 (16 lambda)^2 n p^2)) + n delta / (8 lambda p))`;
/// with `alpha` it is `2(exp(-eps^2 / (8 n (8 lambda n p + alpha)^2)) + n delta / alpha)`.
/// Both are paired with the Hoeffding branch. For `lambda = 0` only the
/// Hoeffding branch is returned, flagged.
pub fn stability_strong_bound(
    n: usize,
    p: f64,
    eps: f64,
    lambda: f64,
    delta: f64,
    alpha: Option<f64>,
) -> Result<BoundValue> {
    let (nf, p, eps) = (check_n(n)?, check_p(p)?, check_eps(eps)?);
    let lambda = check_nonneg("lambda", lambda)?;
    let delta = check_prob("delta", delta)?;
    let alpha = alpha.map(|a| check_positive("alpha", a)).transpose()?;
    let hoeffding = (Branch::Hoeffding, log_hoeffding(nf, p, eps));
    if lambda == 0.0 {
        let mut v = BoundValue::min_of(&[hoeffding]);
        v.flagged = true;
        return Ok(v);
    }
    let (scale, coef) = match alpha {
        None => (8.0 * (16.0 * lambda).powi(2) * nf * p * p, nf / (8.0 * lambda * p)),
        Some(a) => (8.0 * nf * (8.0 * lambda * nf * p + a).powi(2), nf / a),
    };
    let ln2 = std::f64::consts::LN_2;
    let stab = log_sum_exp(&[ln2 + quad(1.0 / scale, eps), ln2 + coef.ln() + delta.ln()]);
    Ok(BoundValue::min_of(&[hoeffding, (Branch::StrongStability, stab)]))
}

/// Log of the weak-stability expression at `eps`, as printed:
/// `2(exp(-n eps^2 / (10 D^2)) + (n sqrt(delta) / (9 lambda p)) exp(eps n / (4 D^2))) + n sqrt(delta)`
/// with `D = 9 lambda n p`.
pub fn weak_stability_log_raw(n: usize, p: f64, eps: f64, lambda: f64, delta: f64) -> Result<f64> {
    let (nf, p, eps) = (check_n(n)?, check_p(p)?, check_eps(eps)?);
    let lambda = check_positive("lambda", lambda)?;
    let delta = check_prob("delta", delta)?;
    Ok(weak_log(nf, p, lambda, delta)(eps))
}

fn weak_log(n: f64, p: f64, lambda: f64, delta: f64) -> impl Fn(f64) -> f64 {
    let d2 = (9.0 * lambda * n * p).powi(2);
    let ln2 = std::f64::consts::LN_2;
    let root = delta.sqrt();
    let ln_c = (n * root / (9.0 * lambda * p)).ln();
    let ln_tail = (n * root).ln();
    move |eps| log_sum_exp(&[ln2 + quad(n / (10.0 * d2), eps), ln2 + ln_c + eps * n / (4.0 * d2), ln_tail])
}

/// Weak-stability bound paired with the Hoeffding branch.
///
/// The printed expression grows in `eps` once its `delta` terms dominate, so
/// it is replaced by its running infimum over `[0, eps]`, which is still a
/// valid bound on a tail probability. For `lambda = 0` only the Hoeffding
/// branch is returned, flagged.
pub fn stability_weak_bound(n: usize, p: f64, eps: f64, lambda: f64, delta: f64) -> Result<BoundValue> {
    let (nf, p, eps) = (check_n(n)?, check_p(p)?, check_eps(eps)?);
    let lambda = check_nonneg("lambda", lambda)?;
    let delta = check_prob("delta", delta)?;
    let hoeffding = (Branch::Hoeffding, log_hoeffding(nf, p, eps));
    if lambda == 0.0 {
        let mut v = BoundValue::min_of(&[hoeffding]);
        v.flagged = true;
        return Ok(v);
    }
    let weak = running_min(weak_log(nf, p, lambda, delta), eps);
    Ok(BoundValue::min_of(&[hoeffding, (Branch::WeakStability, weak)]))
}

/// Strong difference-bounded tail `2(exp(-tau^2 / (8 n (c + b alpha)^2)) + n delta / alpha)`.
pub fn kutin_strong_tail(n: usize, b: f64, c: f64, delta: f64, alpha: f64, tau: f64) -> Result<BoundValue> {
    let nf = check_n(n)?;
    let (b, c) = (check_nonneg("b", b)?, check_nonneg("c", c)?);
    if b < c || b == 0.0 {
        return domain("need b >= c >= 0 with b > 0");
    }
    let delta = check_prob("delta", delta)?;
    let alpha = check_positive("alpha", alpha)?;
    let tau = check_eps(tau)?;
    let ln2 = std::f64::consts::LN_2;
    let scale = 8.0 * nf * (c + b * alpha).powi(2);
    let v = log_sum_exp(&[ln2 + quad(1.0 / scale, tau), ln2 + (nf / alpha).ln() + delta.ln()]);
    Ok(BoundValue::single(Branch::KutinStrong, v))
}

/// Log of the weak difference-bounded tail expression at `eps`, as printed.
pub fn kutin_weak_log_raw(n: usize, b: f64, c: f64, delta: f64, eps: f64) -> Result<f64> {
    let (nf, eps) = (check_n(n)?, check_eps(eps)?);
    let (b, c) = kutin_weak_params(b, c)?;
    let delta = check_prob("delta", delta)?;
    Ok(kutin_weak_log(nf, b, c, delta)(eps))
}

fn kutin_weak_params(b: f64, c: f64) -> Result<(f64, f64)> {
    let c = check_positive("c", c)?;
    let b = check_positive("b", b)?;
    if b < c {
        return domain("need b >= c > 0");
    }
    Ok((b, c))
}

fn kutin_weak_log(n: f64, b: f64, c: f64, delta: f64) -> impl Fn(f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let root = delta.sqrt();
    let ln_mid = (2.0 * n * b * root / c).ln();
    let ln_tail = (2.0 * n * root).ln();
    move |eps| {
        let shrink = 1.0 + 2.0 * eps / (15.0 * n * c);
        let first =
            if eps == f64::INFINITY { f64::NEG_INFINITY } else { -eps * eps / (10.0 * n * c * c * shrink * shrink) };
        log_sum_exp(&[ln2 + first, ln_mid + eps * b / (4.0 * n * c * c), ln_tail])
    }
}

/// Weak difference-bounded tail, replaced by its running infimum over `[0, eps]`.
pub fn kutin_weak_tail(n: usize, b: f64, c: f64, delta: f64, eps: f64) -> Result<BoundValue> {
    let (nf, eps) = (check_n(n)?, check_eps(eps)?);
    let (b, c) = kutin_weak_params(b, c)?;
    let delta = check_prob("delta", delta)?;
    Ok(BoundValue::single(Branch::KutinWeak, running_min(kutin_weak_log(nf, b, c, delta), eps)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ClassifierVariant {
    /// `exp(-8 n p eps^2 / 9)` for `R - R_out / 2`.
    HalfOut,
    /// `l exp(-2 n p eps^2 / 9)`.
    Maj { l: usize },
    /// `exp(-2 n p eps^2 / 9)`.
    BinaryHalf,
    /// `l exp(-2 n p eps^2)`.
    BinaryMaj { l: usize },
    /// `min(exp(-8 n p eps^2 / 9), (2n(1-p) + 1)^(4 vc / (1-p)) exp(-4 n (1-p) eps^2))`.
    ErmHalf { vc: u32 },
}

pub fn classifier_bounds(n: usize, p: f64, eps: f64, variant: ClassifierVariant) -> Result<BoundValue> {
    let (nf, p, eps) = (check_n(n)?, check_p(p)?, check_eps(eps)?);
    let np = nf * p;
    let ln_l = |l: usize| -> Result<f64> {
        if l >= 1 {
            Ok((l as f64).ln())
        } else {
            domain("l must be at least 1")
        }
    };
    let half = (Branch::HalfOut, quad(8.0 * np / 9.0, eps));
    Ok(match variant {
        ClassifierVariant::HalfOut => BoundValue::min_of(&[half]),
        ClassifierVariant::Maj { l } => BoundValue::single(Branch::Majority, ln_l(l)? + quad(2.0 * np / 9.0, eps)),
        ClassifierVariant::BinaryHalf => BoundValue::single(Branch::BinaryHalf, quad(2.0 * np / 9.0, eps)),
        ClassifierVariant::BinaryMaj { l } => {
            BoundValue::single(Branch::BinaryMajority, ln_l(l)? + quad(2.0 * np, eps))
        }
        ClassifierVariant::ErmHalf { vc } => {
            let vc = check_vc(vc)?;
            let q = 1.0 - p;
            BoundValue::min_of(&[half, (Branch::ErmHalfVc, log_vc_factor(nf, q, vc) + quad(4.0 * nf * q, eps))])
        }
    })
}

/// Geometric grid used by [`running_min`]: `2^(i/64 - 40)`.
const GRID_STEPS_PER_OCTAVE: i32 = 64;
const GRID_LOW_OCTAVE: i32 = -40;
const GRID_HIGH_OCTAVE: i32 = 40;

fn grid_point(i: i32) -> f64 {
    (i as f64 / GRID_STEPS_PER_OCTAVE as f64 + GRID_LOW_OCTAVE as f64).exp2()
}

/// Infimum of `g` over `[0, eps]`.
///
/// Scans a fixed geometric grid and refines each grid-local minimum by
/// golden-section search over its full bracket. Brackets never depend on
/// `eps`; when `eps` lies left of a bracket's argmin, `g(eps)` is floored at
/// that bracket's minimum so the result stays nonincreasing in `eps`.
fn running_min(g: impl Fn(f64) -> f64, eps: f64) -> f64 {
    let g0 = g(0.0);
    let mut best = g0;
    let top = GRID_STEPS_PER_OCTAVE * (GRID_HIGH_OCTAVE - GRID_LOW_OCTAVE);
    let mut pts: Vec<(f64, f64)> = vec![(0.0, g0)];
    for i in 0..=top {
        let t = grid_point(i);
        pts.push((t, g(t)));
        if t > eps {
            // one point past eps completes the last bracket; a second decides whether it is a minimum
            if let Some(next) = (i < top).then(|| grid_point(i + 1)) {
                pts.push((next, g(next)));
            }
            break;
        }
    }
    let mut at_eps = g(eps);
    for i in 1..pts.len().saturating_sub(1) {
        let (lo, here, hi) = (pts[i - 1], pts[i], pts[i + 1]);
        if here.0 <= eps {
            best = best.min(here.1);
        }
        if lo.0 > eps || here.1 > lo.1 || here.1 > hi.1 {
            continue;
        }
        let (x, m) = golden_min(&g, lo.0, hi.0);
        if x <= eps {
            best = best.min(m);
        } else if eps >= lo.0 {
            at_eps = at_eps.max(m);
        }
    }
    best.min(at_eps)
}

/// `(argmin, min)` of `g` on `[a, b]` over the evaluated points.
fn golden_min(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    let mut best = if gc <= gd { (c, gc) } else { (d, gd) };
    for _ in 0..80 {
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
            if gc < best.1 {
                best = (c, gc);
            }
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
            if gd < best.1 {
                best = (d, gd);
            }
        }
        if b - a <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
    }
    best
}

/// Names accepted by [`BoundSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    Vsym,
    BsymOut,
    BsymIn,
    SymOut,
    SymIn,
    Erm,
    Kfold,
    StabilityStrong,
    StabilityWeak,
    KutinStrong,
    KutinWeak,
    HalfOut,
    Maj,
    BinaryHalf,
    BinaryMaj,
    ErmHalf,
}

impl BoundVariant {
    pub const ALL: [BoundVariant; 16] = [
        BoundVariant::Vsym,
        BoundVariant::BsymOut,
        BoundVariant::BsymIn,
        BoundVariant::SymOut,
        BoundVariant::SymIn,
        BoundVariant::Erm,
        BoundVariant::Kfold,
        BoundVariant::StabilityStrong,
        BoundVariant::StabilityWeak,
        BoundVariant::KutinStrong,
        BoundVariant::KutinWeak,
        BoundVariant::HalfOut,
        BoundVariant::Maj,
        BoundVariant::BinaryHalf,
        BoundVariant::BinaryMaj,
        BoundVariant::ErmHalf,
    ];
}

impl fmt::Display for BoundVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

impl std::str::FromStr for BoundVariant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| crate::Error::Config(format!("unknown bound variant `{s}`")))
    }
}

/// A bound with all its parameters except `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub variant: BoundVariant,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vc: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl BoundSpec {
    pub fn new(variant: BoundVariant, n: usize) -> Self {
        BoundSpec {
            variant,
            n,
            p: None,
            vc: None,
            k: None,
            lambda: None,
            delta: None,
            alpha: None,
            l: None,
            b: None,
            c: None,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_vc(mut self, vc: u32) -> Self {
        self.vc = Some(vc);
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_l(mut self, l: usize) -> Self {
        self.l = Some(l);
        self
    }

    pub fn with_stability(mut self, lambda: f64, delta: f64) -> Self {
        self.lambda = Some(lambda);
        self.delta = Some(delta);
        self
    }

    fn need<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| crate::Error::Config(format!("bound `{}` needs `{name}`", self.variant)))
    }

    /// Evaluates the bound at deviation `eps`.
    pub fn evaluate(&self, eps: f64) -> Result<BoundValue> {
        let n = self.n;
        let p = || self.need(self.p, "p");
        let vc = || self.need(self.vc, "vc");
        let l = || self.need(self.l, "l");
        match self.variant {
            BoundVariant::Vsym => v_sym(n, p()?, eps),
            BoundVariant::BsymOut => b_sym_out(n, p()?, eps, vc()?),
            BoundVariant::BsymIn => b_sym_in(n, p()?, eps, vc()?),
            BoundVariant::SymOut => sym_out(n, p()?, eps, vc()?),
            BoundVariant::SymIn => sym_in(n, p()?, eps, vc()?),
            BoundVariant::Erm => bound_erm(n, p()?, eps, vc()?),
            BoundVariant::Kfold => bound_kfold(n, self.need(self.k, "k")?, eps, vc()?),
            BoundVariant::StabilityStrong => stability_strong_bound(
                n,
                p()?,
                eps,
                self.need(self.lambda, "lambda")?,
                self.need(self.delta, "delta")?,
                self.alpha,
            ),
            BoundVariant::StabilityWeak => {
                stability_weak_bound(n, p()?, eps, self.need(self.lambda, "lambda")?, self.need(self.delta, "delta")?)
            }
            BoundVariant::KutinStrong => kutin_strong_tail(
                n,
                self.need(self.b, "b")?,
                self.need(self.c, "c")?,
                self.need(self.delta, "delta")?,
                self.need(self.alpha, "alpha")?,
                eps,
            ),
            BoundVariant::KutinWeak => kutin_weak_tail(
                n,
                self.need(self.b, "b")?,
                self.need(self.c, "c")?,
                self.need(self.delta, "delta")?,
                eps,
            ),
            BoundVariant::HalfOut => classifier_bounds(n, p()?, eps, ClassifierVariant::HalfOut),
            BoundVariant::Maj => classifier_bounds(n, p()?, eps, ClassifierVariant::Maj { l: l()? }),
            BoundVariant::BinaryHalf => classifier_bounds(n, p()?, eps, ClassifierVariant::BinaryHalf),
            BoundVariant::BinaryMaj => classifier_bounds(n, p()?, eps, ClassifierVariant::BinaryMaj { l: l()? }),
            BoundVariant::ErmHalf => classifier_bounds(n, p()?, eps, ClassifierVariant::ErmHalf { vc: vc()? }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn v_sym_examples() {
        assert_eq!(v_sym(100, 0.1, 0.0).unwrap().value, 1.0);
        assert!(close(v_sym(100, 0.1, 0.1).unwrap().value, (-0.2f64).exp(), 1e-14));
        assert_eq!(v_sym(100, 0.1, f64::INFINITY).unwrap().value, 0.0);
        assert!(v_sym(100, 1.0, 0.1).is_err());
        assert!(v_sym(100, 0.5, -0.1).is_err());
        assert!(v_sym(100, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn b_sym_examples() {
        assert_eq!(b_sym_out(1000, 0.5, 0.0, 1).unwrap().value, 1.0);
        let b = b_sym_out(1000, 0.5, 0.3, 1).unwrap();
        assert!(close(b.log_value, 8.0 * 1001f64.ln() - 90.0, 1e-14));
        assert!((b.log_value + 34.73).abs() < 0.01);
        assert_eq!(b_sym_in(1000, 0.5, 0.0, 1).unwrap().value, 1.0);
        assert_eq!(b_sym_in(1000, 0.5, 0.3, 1).unwrap(), BoundValue { branch: Branch::VcTrain, ..b });
        for p in [0.25, 0.125, 0.5] {
            let a = b_sym_out(200, p, 0.4, 2).unwrap().log_value;
            let c = b_sym_in(200, 1.0 - p, 0.4, 2).unwrap().log_value;
            assert_eq!(a, c);
        }
        for p in [0.1, 0.3, 0.7] {
            let a = b_sym_out(200, p, 0.4, 2).unwrap().log_value;
            let c = b_sym_in(200, 1.0 - p, 0.4, 2).unwrap().log_value;
            assert!(close(a, c, 1e-13), "{a} {c}");
        }
    }

    #[test]
    fn erm_examples() {
        assert_eq!(bound_erm(2000, 0.05, 0.0, 1).unwrap().value, 1.0);
        assert_eq!(bound_erm(2000, 0.05, 0.01, 1).unwrap().branch, Branch::Hoeffding);
        let b = bound_erm(2000, 0.05, 0.25, 1).unwrap();
        assert_eq!(b.branch, Branch::Hoeffding);
        assert!(close(b.log_value, -12.5, 1e-14));
        let b = bound_erm(100_000, 0.05, 0.1, 1).unwrap();
        assert_eq!(b.branch, Branch::VcTest);
        let b = bound_erm(100_000, 0.01, 0.1, 1).unwrap();
        assert_eq!(b.branch, Branch::ErmTrain);
    }

    #[test]
    fn kfold_examples() {
        assert_eq!(bound_kfold(100, 10, 0.0, 1).unwrap().value, 1.0);
        let b = bound_kfold(100, 10, 0.2, 1).unwrap();
        assert_eq!(b.branch, Branch::Hoeffding);
        assert!(close(b.value, (-0.8f64).exp(), 1e-14));
        for n in [10, 49, 60] {
            let b = bound_kfold(n, n, 0.3, 1).unwrap();
            let h = log_hoeffding(n as f64, 1.0 / n as f64, 0.3);
            assert!(close(h, -2.0 * 0.09, 1e-14));
            assert!(b.log_value <= h);
        }
        assert!(bound_kfold(100, 7, 0.2, 1).is_err());
        for (n, k, eps) in [(60, 5, 0.3), (100, 4, 0.05), (120, 12, 0.9)] {
            let h = bound_kfold(n, k, eps, 1).unwrap();
            let v = v_sym(n, 1.0 / k as f64, eps).unwrap();
            if h.branch == Branch::Hoeffding {
                assert_eq!(h.log_value, v.log_value);
            } else {
                assert!(h.log_value <= v.log_value);
            }
        }
    }

    #[test]
    fn l1_examples() {
        assert!(close(l1_bound(100, 0.25, None).unwrap(), 0.2, 1e-15));
        let v = l1_bound(10_000, 0.5, Some(1)).unwrap();
        assert!(close(v, (1.0f64 / 5000.0).sqrt(), 1e-15));
        let second = 6.0 * ((5000f64.ln() + 2.0) / 5000.0).sqrt();
        assert!(second > v);
        assert!(close(l1_bound(400, 1.0 - 1e-12, None).unwrap(), 0.05, 1e-9));
        let m = 999.0f64;
        assert!(close(l1_bound(1000, 0.001, Some(1)).unwrap(), 6.0 * ((m.ln() + 2.0) / m).sqrt(), 1e-15));
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(expectation_from_tail(1.0, 2.0).unwrap(), 1.0);
        assert!(close(expectation_from_tail(std::f64::consts::E, 3.0).unwrap(), 1.0, 1e-15));
        assert!(close(expectation_from_tail(10.0, 100.0).unwrap(), 0.20742, 1e-4));
        assert!(expectation_from_tail(0.5, 1.0).is_err());
        assert!(expectation_from_tail(2.0, 0.0).is_err());
    }

    #[test]
    fn strong_stability_examples() {
        let (n, p, lambda) = (500usize, 0.1, 0.0005);
        let eps = 0.2;
        let b = stability_strong_bound(n, p, eps, lambda, 0.0, None).unwrap();
        let expect = 2f64.ln() - eps * eps / (8.0 * (16.0 * lambda).powi(2) * n as f64 * p * p);
        assert_eq!(b.branch, Branch::StrongStability);
        assert!(close(b.log_value, expect, 1e-14));
        assert_eq!(stability_strong_bound(n, p, 0.0, lambda, 0.0, None).unwrap().value, 1.0);
        let b = stability_strong_bound(500, 0.1, 0.2, 0.01, 1e-6, None).unwrap();
        let hoeff: f64 = -2.0 * 50.0 * 0.04;
        let stab = log_sum_exp(&[
            2f64.ln() - 0.04 / (8.0 * 0.16f64.powi(2) * 500.0 * 0.01),
            2f64.ln() + (500.0 / 0.008f64).ln() + 1e-6f64.ln(),
        ]);
        assert!(close(b.log_value, hoeff.min(stab), 1e-14));
        let z = stability_strong_bound(500, 0.1, 0.2, 0.0, 0.0, None).unwrap();
        assert!(z.flagged);
        assert_eq!(z.branch, Branch::Hoeffding);
        let general = stability_strong_bound(500, 0.1, 0.2, 0.01, 0.0, Some(1.0)).unwrap();
        let scale = 8.0 * 500.0 * (8.0 * 0.01 * 50.0 + 1.0f64).powi(2);
        assert!(close(general.log_value, hoeff.min(2f64.ln() - 0.04 / scale), 1e-14));
    }

    #[test]
    fn weak_stability_reduces_without_delta() {
        let (n, p, lambda) = (1000usize, 0.2, 1e-5);
        for eps in [0.01, 0.05, 0.1, 0.3] {
            let b = stability_weak_bound(n, p, eps, lambda, 0.0).unwrap();
            let d = 9.0 * lambda * n as f64 * p;
            let w = 2f64.ln() - n as f64 * eps * eps / (10.0 * d * d);
            let h = -2.0 * n as f64 * p * eps * eps;
            assert!(close(b.log_value, w.min(h), 1e-13), "{eps}");
        }
        assert_eq!(stability_weak_bound(n, p, 0.0, lambda, 0.1).unwrap().value, 1.0);
    }

    #[test]
    fn weak_stability_envelope_is_below_raw() {
        let (n, p, lambda, delta) = (1000usize, 0.2, 1e-4, 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..400 {
            let eps = i as f64 * 0.01;
            let env = stability_weak_bound(n, p, eps, lambda, delta).unwrap();
            let raw = weak_stability_log_raw(n, p, eps, lambda, delta).unwrap();
            let h = -2.0 * n as f64 * p * eps * eps;
            assert!(env.log_value <= raw.min(h) + 1e-15);
            assert!(env.log_value <= prev);
            prev = env.log_value;
        }
    }

    #[test]
    fn kutin_examples() {
        let t = kutin_strong_tail(100, 1e-3, 1e-3, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(t.value, 1.0);
        assert!(close(t.log_value, 2f64.ln(), 1e-15));
        let t = kutin_strong_tail(100, 1e-3, 1e-3, 0.0, 1.0, 0.1).unwrap();
        let expect = 2.0 * (-0.01 / (8.0 * 100.0 * 0.002f64.powi(2))).exp();
        assert!(close(t.value, expect, 1e-14));
        assert!(kutin_strong_tail(100, 0.0, 0.0, 0.0, 1.0, 0.1).is_err());
        assert!(kutin_strong_tail(100, 1e-3, 2e-3, 0.0, 1.0, 0.1).is_err());

        let w = kutin_weak_tail(100, 0.02, 0.01, 0.0, 5.0).unwrap();
        let s = 1.0 + 10.0 / (15.0 * 100.0 * 0.01);
        let first = 2f64.ln() - 25.0 / (10.0 * 100.0 * 1e-4 * s * s);
        assert!(close(w.log_value, first, 1e-13));
        assert_eq!(kutin_weak_tail(100, 0.02, 0.01, 1e-3, 0.0).unwrap().value, 1.0);
        assert!(kutin_weak_tail(100, 0.02, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn classifier_examples() {
        let v = classifier_bounds(100, 0.1, 0.0, ClassifierVariant::HalfOut).unwrap();
        assert_eq!(v.value, 1.0);
        let v = classifier_bounds(100, 0.1, 0.3, ClassifierVariant::Maj { l: 3 }).unwrap();
        assert!(close(v.log_value, 3f64.ln() - 0.2, 1e-14));
        assert_eq!(v.value, 1.0);
        let v = classifier_bounds(100, 0.1, 0.3, ClassifierVariant::BinaryMaj { l: 2 }).unwrap();
        assert!(close(v.log_value, 2f64.ln() - 1.8, 1e-14));
        assert!(classifier_bounds(100, 0.1, 0.3, ClassifierVariant::Maj { l: 0 }).is_err());
    }

    #[test]
    fn erm_half_crossover_by_bisection() {
        let (n, p, vc) = (10_000usize, 0.1, 1);
        let diff = |eps: f64| {
            let q = 1.0 - p;
            let vcb = log_vc_factor(n as f64, q, vc as f64) - 4.0 * n as f64 * q * eps * eps;
            let half = -8.0 * n as f64 * p * eps * eps / 9.0;
            vcb - half
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        assert!(diff(lo) > 0.0 && diff(hi) < 0.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if diff(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let before = classifier_bounds(n, p, lo * 0.999, ClassifierVariant::ErmHalf { vc }).unwrap();
        let after = classifier_bounds(n, p, hi * 1.001, ClassifierVariant::ErmHalf { vc }).unwrap();
        assert_eq!(before.branch, Branch::HalfOut);
        assert_eq!(after.branch, Branch::ErmHalfVc);
    }

    #[test]
    fn running_min_matches_monotone_functions() {
        let g = |e: f64| -e * e;
        assert_eq!(running_min(g, 0.7), g(0.7));
        let bump = |e: f64| (e - 0.3) * (e - 0.3);
        assert!(running_min(bump, 0.2) == bump(0.2));
        assert!(running_min(bump, 1.0).abs() < 1e-15);
        assert!(running_min(bump, 0.3000001).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!(close(log_sum_exp(&[0.0, 0.0]), 2f64.ln(), 1e-15));
        assert!(close(log_sum_exp(&[-1000.0, -1000.0]), -1000.0 + 2f64.ln(), 1e-15));
    }

    #[test]
    fn spec_json_and_dispatch() {
        let s: BoundSpec = serde_json::from_str(r#"{"variant":"vsym","n":100,"p":0.1}"#).unwrap();
        assert!(close(s.evaluate(0.1).unwrap().value, (-0.2f64).exp(), 1e-14));
        assert!(serde_json::from_str::<BoundSpec>(r#"{"variant":"vsym","n":1,"q":1}"#).is_err());
        assert!(BoundSpec::new(BoundVariant::Erm, 100).with_p(0.1).evaluate(0.1).is_err());
        for v in BoundVariant::ALL {
            assert_eq!(v.to_string().parse::<BoundVariant>().unwrap(), v);
        }
        assert_eq!(Branch::ErmHalfVc.to_string(), "erm-half-vc");
    }
}
