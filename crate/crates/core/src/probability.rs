//! Exact binomial computations for the measures of `E^u` and their pairwise
//! intersections, plus the closed-form brackets they are compared against.
//!
//! The binomial pmf uses Loader's saddle-point expansion (Stirling error
//! terms plus the deviance `bd0`), which keeps full relative accuracy for
//! `n` in the millions where `lgamma` differences lose several digits.

use std::f64::consts::{E, PI, SQRT_2};

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::construction::{LevelProfile, DEFAULT_LEVEL_RANGE};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `S ~ B(n, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinomialSpec {
    pub n: u64,
    pub p: f64,
}

impl BinomialSpec {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one trial"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("must lie in (0, 1), got {p}")));
        }
        Ok(Self { n, p })
    }

    pub fn mean(&self) -> f64 {
        self.n as f64 * self.p
    }

    pub fn sd(&self) -> f64 {
        (self.n as f64 * self.p * (1.0 - self.p)).sqrt()
    }
}

/// `ln Gamma(n + 1) - (n + 1/2) ln n + n - ln sqrt(2 pi)` for integer `n >= 1`.
fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15 {
        let fact: u64 = (1..=n).product();
        let nf = n as f64;
        return (fact as f64).ln() - (nf + 0.5) * nf.ln() + nf - 0.5 * LN_2PI;
    }
    let nf = n as f64;
    let nn = nf * nf;
    if n > 500 {
        (S0 - S1 / nn) / nf
    } else if n > 80 {
        (S0 - (S1 - S2 / nn) / nn) / nf
    } else if n > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / nf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
    }
}

/// Deviance term `x ln(x / np) + np - x`, accurate when `x ≈ np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln P(S = k)`; `-inf` outside `0..=n`.
pub fn log_binom_pmf(spec: &BinomialSpec, k: i64) -> f64 {
    let n = spec.n;
    if k < 0 || k as u64 > n {
        return f64::NEG_INFINITY;
    }
    let k = k as u64;
    let p = spec.p;
    let q = 1.0 - p;
    let nf = n as f64;
    if k == 0 {
        return if p < 0.1 { -bd0(nf, nf * q) - nf * p } else { nf * q.ln() };
    }
    if k == n {
        return if q < 0.1 { -bd0(nf, nf * p) - nf * q } else { nf * p.ln() };
    }
    let kf = k as f64;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = LN_2PI + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln sum exp(terms)` with a pairwise reduction of the shifted exponentials.
fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    fn pairwise(xs: &[f64], max: f64) -> f64 {
        if xs.len() <= 16 {
            xs.iter().map(|&l| (l - max).exp()).sum()
        } else {
            let (a, b) = xs.split_at(xs.len() / 2);
            pairwise(a, max) + pairwise(b, max)
        }
    }
    max + pairwise(terms, max).ln()
}

/// Log pmf terms beyond this distance below the largest one underflow to 0.
const NEGLIGIBLE_LOG_GAP: f64 = 760.0;

/// `ln P(lo < S <= hi)`; `-inf` for an empty integer range.
///
/// The pmf is log-concave, so terms are generated outward from the point of
/// the range nearest the mode and each walk stops once its terms are
/// negligible against the running maximum.
pub fn log_binom_range_prob(spec: &BinomialSpec, lo: f64, hi: f64) -> f64 {
    let n = spec.n as i64;
    let first = if lo < 0.0 { 0 } else { (lo.floor() as i64 + 1).max(0) };
    let last = if hi >= n as f64 { n } else { hi.floor() as i64 };
    if hi.is_nan() || lo.is_nan() || last < first {
        return f64::NEG_INFINITY;
    }
    let mode = (((spec.n + 1) as f64) * spec.p).floor() as i64;
    let start = mode.clamp(first, last);
    let mut terms = vec![log_binom_pmf(spec, start)];
    let mut max = terms[0];
    let mut k = start - 1;
    while k >= first {
        let l = log_binom_pmf(spec, k);
        if l < max - NEGLIGIBLE_LOG_GAP {
            break;
        }
        max = max.max(l);
        terms.push(l);
        k -= 1;
    }
    let mut k = start + 1;
    while k <= last {
        let l = log_binom_pmf(spec, k);
        if l < max - NEGLIGIBLE_LOG_GAP {
            break;
        }
        max = max.max(l);
        terms.push(l);
        k += 1;
    }
    log_sum_exp(&terms)
}

/// `P(lo < S <= hi)`.
pub fn binom_range_prob(spec: &BinomialSpec, lo: f64, hi: f64) -> f64 {
    log_binom_range_prob(spec, lo, hi).exp()
}

/// Upper standard normal tail `P(Z > x)`.
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `P(a < Z < b)` for standard normal `Z`, evaluated on whichever side keeps
/// both tails small.
pub fn normal_tail(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return 0.0;
    }
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(b) - upper_tail(-a)
    }
}

/// `( e^{-t^2/2} / (2 e^2 t sqrt(2 pi)),  e^{-t^2/2} / (t sqrt(pi)) )`
pub fn claim1_bracket(t: f64) -> (f64, f64) {
    let g = (-0.5 * t * t).exp();
    (g / (2.0 * E * E * t * (2.0 * PI).sqrt()), g / (t * PI.sqrt()))
}

/// `( P(-t - 1/t < Z <= -t) / 2,  sqrt(2) P(-t - 1/t < Z <= -t) )`
pub fn clt_bracket(t: f64) -> (f64, f64) {
    let p = normal_tail(-t - 1.0 / t, -t);
    (0.5 * p, SQRT_2 * p)
}

/// `t^{-1/3} e^{-2 t^{2/3} / 9}`
pub fn claim2_factor(t: f64) -> f64 {
    t.powf(-1.0 / 3.0) * (-2.0 * t.powf(2.0 / 3.0) / 9.0).exp()
}

/// `t^{1/3} e^{-t^2/2} / (20 e^2 sqrt(2 pi))`
pub fn claim3_floor(t: f64) -> f64 {
    t.cbrt() * (-0.5 * t * t).exp() / (20.0 * E * E * (2.0 * PI).sqrt())
}

/// `t^{1/3} / (40 e^2 sqrt(2 pi))`
pub fn theorem_constant(t: f64) -> f64 {
    t.cbrt() / (40.0 * E * E * (2.0 * PI).sqrt())
}

/// Exact `|E^u|`, the probability that `B(d, u)` lands in `(k_lo, r0]`.
pub fn eu_measure(profile: &LevelProfile) -> Result<f64> {
    let spec = BinomialSpec::new(profile.d as u64, profile.u)?;
    Ok(binom_range_prob(&spec, profile.k_lo, profile.r0))
}

fn check_level_pair(u: f64, v: f64) -> Result<()> {
    if !(0.0 < v && v < u && u < 1.0) {
        return Err(Error::invalid("levels", format!("need 0 < v < u < 1, got u = {u}, v = {v}")));
    }
    Ok(())
}

/// Exact value of the upper bound
/// `sum_k C(d,k) u^k (1-u)^(d-k) P(B(k, v/u) <= v d - t sigma_v sqrt(d))`
/// on `|E^u ∩ E^v|`, `k` ranging over the band of `E^u`.
pub fn pairwise_intersection_bound(d: usize, u: f64, v: f64, t: f64) -> Result<f64> {
    check_level_pair(u, v)?;
    let pu = LevelProfile::new(u, t, d)?;
    let pv = LevelProfile::new(v, t, d)?;
    let outer = BinomialSpec::new(d as u64, u)?;
    let ratio = v / u;
    let first = if pu.k_lo < 0.0 { 0 } else { pu.k_lo.floor() as i64 + 1 };
    let last = pu.r0.floor() as i64;
    let mut terms = Vec::new();
    for k in first.max(0)..=last {
        let weight = log_binom_pmf(&outer, k);
        let tail = if k == 0 {
            if pv.r0 >= 0.0 { 0.0 } else { f64::NEG_INFINITY }
        } else {
            log_binom_range_prob(&BinomialSpec::new(k as u64, ratio)?, -1.0, pv.r0)
        };
        terms.push(weight + tail);
    }
    Ok(log_sum_exp(&terms).exp())
}

/// Standardized distance `(E_lo - v d + t sigma_v sqrt(d)) / sd_hi` between the
/// mean of `B(k, v/u)` and the threshold `v d - t sigma_v sqrt(d)`, using the
/// worst-case mean `v d - (t + 1/t) v sqrt(d) sqrt(1/u - 1)` and the
/// sd bound `sqrt(v d (1 - v/u))`. It does not depend on `d`.
pub fn claim2_standardized_threshold(u: f64, v: f64, t: f64) -> Result<f64> {
    check_level_pair(u, v)?;
    let sigma_v = (v * (1.0 - v)).sqrt();
    let shift = (t + 1.0 / t) * v * (1.0 / u - 1.0).sqrt();
    Ok((t * sigma_v - shift) / (v * (1.0 - v / u)).sqrt())
}

/// `2 t^{1/3} / 3`, the standardized distance required by the tail estimate.
pub fn claim2_standardized_target(t: f64) -> f64 {
    2.0 * t.cbrt() / 3.0
}

/// Levels `a + j t^{-4/3}` for `j = 0..=M`, `M` the largest index staying `<= b`.
pub fn u_grid(t: f64, range: (f64, f64)) -> Result<Vec<f64>> {
    let (a, b) = range;
    if !(t > 1.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must exceed 1, got {t}")));
    }
    if !(0.0 < a && a <= b && b < 1.0) {
        return Err(Error::EmptyGrid { t, a, b });
    }
    let step = t.powf(-4.0 / 3.0);
    let m = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=m).map(|j| a + j as f64 * step).collect())
}

/// Inclusion-exclusion lower bound on the measure of the union of `E^u` over the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnionBound {
    pub d: usize,
    pub t: f64,
    pub levels: Vec<f64>,
    pub level_measures: Vec<f64>,
    pub exact_sum: f64,
    pub pairwise_total: f64,
    pub lower: f64,
    pub closed_form_floor: f64,
}

pub fn union_lower_bound(d: usize, t: f64, range: (f64, f64)) -> Result<UnionBound> {
    let levels = u_grid(t, range)?;
    let level_measures = levels
        .iter()
        .map(|&u| eu_measure(&LevelProfile::new(u, t, d)?))
        .collect::<Result<Vec<_>>>()?;
    let exact_sum: f64 = level_measures.iter().sum();
    let mut pairwise_total = 0.0;
    for (j, &u) in levels.iter().enumerate() {
        for &v in &levels[..j] {
            pairwise_total += pairwise_intersection_bound(d, u, v, t)?;
        }
    }
    Ok(UnionBound {
        d,
        t,
        lower: (exact_sum - pairwise_total).clamp(0.0, 1.0),
        levels,
        level_measures,
        exact_sum,
        pairwise_total,
        closed_form_floor: claim3_floor(t),
    })
}

/// Union bound over the default level range `[1/8, 1/4]`.
pub fn union_lower_bound_default(d: usize, t: f64) -> Result<UnionBound> {
    union_lower_bound(d, t, DEFAULT_LEVEL_RANGE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimId {
    /// Closed-form bracket on `|E^u|`.
    Claim1,
    /// Normal-approximation bracket on `|E^u|`.
    Claim1Clt,
    Claim2,
    Claim3,
}

impl ClaimId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClaimId::Claim1 => "claim1",
            ClaimId::Claim1Clt => "claim1_clt",
            ClaimId::Claim2 => "claim2",
            ClaimId::Claim3 => "claim3",
        }
    }
}

/// One finite-`d` check of a quantitative claim.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimReport {
    pub claim_id: ClaimId,
    pub t: f64,
    pub d: usize,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub exact_value: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub holds: bool,
}

pub const CLAIM_CSV_HEADER: [&str; 9] = [
    "claim_id",
    "t",
    "d",
    "u",
    "v",
    "exact_value",
    "bracket_lo",
    "bracket_hi",
    "holds",
];

/// `lo < |E^u| < hi` with the closed-form bracket.
pub fn claim1_report(u: f64, t: f64, d: usize) -> Result<ClaimReport> {
    let exact = eu_measure(&LevelProfile::new(u, t, d)?)?;
    let (lo, hi) = claim1_bracket(t);
    Ok(ClaimReport {
        claim_id: ClaimId::Claim1,
        t,
        d,
        u: Some(u),
        v: None,
        exact_value: exact,
        bracket_lo: lo,
        bracket_hi: hi,
        holds: lo < exact && exact < hi,
    })
}

/// `|E^u|` inside `[1/2, sqrt 2] P(-t - 1/t < Z <= -t)`.
pub fn claim1_clt_report(u: f64, t: f64, d: usize) -> Result<ClaimReport> {
    let exact = eu_measure(&LevelProfile::new(u, t, d)?)?;
    let (lo, hi) = clt_bracket(t);
    Ok(ClaimReport {
        claim_id: ClaimId::Claim1Clt,
        t,
        d,
        u: Some(u),
        v: None,
        exact_value: exact,
        bracket_lo: lo,
        bracket_hi: hi,
        holds: lo < exact && exact < hi,
    })
}

/// Pairwise bound against `claim2_factor(t) |E^u|`.
pub fn claim2_report(u: f64, v: f64, t: f64, d: usize) -> Result<ClaimReport> {
    let bound = pairwise_intersection_bound(d, u, v, t)?;
    let eu = eu_measure(&LevelProfile::new(u, t, d)?)?;
    let hi = claim2_factor(t) * eu;
    Ok(ClaimReport {
        claim_id: ClaimId::Claim2,
        t,
        d,
        u: Some(u),
        v: Some(v),
        exact_value: bound,
        bracket_lo: 0.0,
        bracket_hi: hi,
        holds: bound <= hi,
    })
}

/// Union lower bound against the closed-form floor.
pub fn claim3_report(t: f64, d: usize, range: (f64, f64)) -> Result<ClaimReport> {
    let ub = union_lower_bound(d, t, range)?;
    Ok(ClaimReport {
        claim_id: ClaimId::Claim3,
        t,
        d,
        u: None,
        v: None,
        exact_value: ub.lower,
        bracket_lo: ub.closed_form_floor,
        bracket_hi: 1.0,
        holds: ub.lower >= ub.closed_form_floor,
    })
}

/// `start, 2 start, 4 start, ...` up to and including `end`.
pub fn doubling_schedule(start: usize, end: usize) -> Vec<usize> {
    std::iter::successors(Some(start.max(1)), |&d| d.checked_mul(2))
        .take_while(|&d| d <= end)
        .collect()
}

/// Smallest `d` from which every later report on the schedule holds.
pub fn empirical_threshold(reports: &[ClaimReport]) -> Option<usize> {
    let mut sorted: Vec<&ClaimReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.d);
    let mut threshold = None;
    for r in sorted.iter().rev() {
        if !r.holds {
            break;
        }
        threshold = Some(r.d);
    }
    threshold
}
