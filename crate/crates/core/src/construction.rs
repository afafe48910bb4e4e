//! Geometry of the lattice construction on the unit cell `[0, 1]^d`.
//!
//! A coordinate is *off center at level u* when it lies in
//! `[0, u/2) U (1 - u/2, 1]`. Points whose off-center count falls in a band
//! a little more than `t` standard deviations below `u d` form the set
//! `E^u`; on it the lattice maximal function is bounded below by the
//! explicit ratio [`f_lower`] at integer radii `s - u/2`.
//!
//! Long products are always evaluated as sums of logarithms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probability;

/// Default level range for the `u` grid.
pub const DEFAULT_LEVEL_RANGE: (f64, f64) = (0.125, 0.25);

/// Parameters `(u, t, d)` and the quantities derived from them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelProfile {
    pub u: f64,
    pub t: f64,
    pub d: usize,
    /// `sqrt(u (1 - u))`
    pub sigma: f64,
    /// Upper end of the off-center band, `u d - t sigma sqrt(d)` (inclusive).
    pub r0: f64,
    /// Lower end of the band, `u d - (t + 1/t) sigma sqrt(d)` (exclusive).
    pub k_lo: f64,
    /// Real maximizer of `s -> f_lower(u, d, r0, s)`.
    pub s0: f64,
}

impl LevelProfile {
    pub fn new(u: f64, t: f64, d: usize) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::invalid("u", format!("level must lie in (0, 1), got {u}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", format!("must be positive and finite, got {t}")));
        }
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        let sigma = (u * (1.0 - u)).sqrt();
        let root_d = (d as f64).sqrt();
        let r0 = u * d as f64 - t * sigma * root_d;
        let k_lo = u * d as f64 - (t + 1.0 / t) * sigma * root_d;
        let mut profile = Self {
            u,
            t,
            d,
            sigma,
            r0,
            k_lo,
            s0: f64::NAN,
        };
        profile.s0 = optimal_s0(&profile)?;
        Ok(profile)
    }

    /// Whether an off-center count `k` lies in the band `(k_lo, r0]`.
    pub fn admits(&self, k: usize) -> bool {
        let k = k as f64;
        self.k_lo < k && k <= self.r0
    }

    /// Largest admissible off-center count, if the band contains an integer.
    pub fn max_admissible(&self) -> Option<usize> {
        if self.r0 < 0.0 {
            return None;
        }
        let k = self.r0.floor() as usize;
        self.admits(k).then_some(k)
    }

    /// `max(3, ceil(2 s0))`
    pub fn default_s_cap(&self) -> u64 {
        (2.0 * self.s0).ceil().max(3.0) as u64
    }
}

/// Off-center index set at level `u`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoordinateClassification {
    /// Zero-based axis indices.
    pub off_center: Vec<usize>,
    pub k: usize,
}

/// Half-open off-center test: `x_j in [0, u/2) U (1 - u/2, 1]`.
pub fn is_off_center(xj: f64, u: f64) -> bool {
    xj < 0.5 * u || xj > 1.0 - 0.5 * u
}

fn check_unit_cell(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(axis) => Err(Error::CoordinateOutOfRange { axis, value: x[axis] }),
        None => Ok(()),
    }
}

pub fn classify(x: &[f64], u: f64) -> Result<CoordinateClassification> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", format!("level must lie in (0, 1), got {u}")));
    }
    check_unit_cell(x)?;
    let off_center: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, &xj)| is_off_center(xj, u))
        .map(|(j, _)| j)
        .collect();
    let k = off_center.len();
    Ok(CoordinateClassification { off_center, k })
}

/// Off-center count only; skips building the index set.
pub(crate) fn off_center_count(x: &[f64], u: f64) -> usize {
    x.iter().filter(|&&xj| is_off_center(xj, u)).count()
}

/// Membership of `x` in `E^u`.
pub fn in_eu(x: &[f64], profile: &LevelProfile) -> Result<bool> {
    if x.len() != profile.d {
        return Err(Error::DimensionMismatch {
            expected: profile.d,
            got: x.len(),
        });
    }
    Ok(profile.admits(classify(x, profile.u)?.k))
}

fn check_f_args(u: f64, d: usize, r: usize, s: u64) -> Result<()> {
    if s == 0 {
        return Err(Error::invalid("s", "must be at least 1"));
    }
    if r > d {
        return Err(Error::invalid("r", format!("off-center count {r} exceeds dimension {d}")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", format!("level must lie in (0, 1), got {u}")));
    }
    Ok(())
}

/// `ln f_lower(u, d, r, s)`.
pub fn log_f_lower(u: f64, d: usize, r: usize, s: u64) -> Result<f64> {
    check_f_args(u, d, r, s)?;
    let two_s = 2.0 * s as f64;
    Ok(r as f64 * (-1.0 / two_s).ln_1p() - d as f64 * (-u / two_s).ln_1p())
}

/// `(1 - 1/(2s))^r / (1 - u/(2s))^d`: the lattice mass ratio of the cube of
/// radius `s - u/2` around a point of the unit cell with `r` off-center
/// coordinates.
pub fn f_lower(u: f64, d: usize, r: usize, s: u64) -> Result<f64> {
    log_f_lower(u, d, r, s).map(f64::exp)
}

/// `u (d - r0) / (2 (u d - r0))`.
pub fn optimal_s0(profile: &LevelProfile) -> Result<f64> {
    let ud = profile.u * profile.d as f64;
    let gap = ud - profile.r0;
    if !(gap > 0.0) {
        return Err(Error::invalid("profile", "u d - r0 must be positive"));
    }
    Ok(profile.u * (profile.d as f64 - profile.r0) / (2.0 * gap))
}

/// `sigma sqrt(d) / (2t) + u/2`, algebraically equal to [`optimal_s0`].
pub fn s0_closed_form(profile: &LevelProfile) -> f64 {
    profile.sigma * (profile.d as f64).sqrt() / (2.0 * profile.t) + 0.5 * profile.u
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Claim4Bound {
    pub value: f64,
    pub log_value: f64,
    pub best_s: u64,
    pub off_center: usize,
}

/// Best integer radius parameter `s in [1, s_cap]` for a given off-center count.
pub fn claim4_bound_for_count(u: f64, d: usize, r: usize, s_cap: u64) -> Result<Claim4Bound> {
    if s_cap == 0 {
        return Err(Error::invalid("s_cap", "must be at least 1"));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for s in 1..=s_cap {
        let lf = log_f_lower(u, d, r, s)?;
        if lf > best.0 {
            best = (lf, s);
        }
    }
    Ok(Claim4Bound {
        value: best.0.exp(),
        log_value: best.0,
        best_s: best.1,
        off_center: r,
    })
}

/// Lower bound on the lattice maximal function at `x` from cubes of radius
/// `s - u/2`, maximized over integer `s <= s_cap`.
pub fn claim4_bound(x: &[f64], profile: &LevelProfile, s_cap: u64) -> Result<Claim4Bound> {
    if x.len() != profile.d {
        return Err(Error::DimensionMismatch {
            expected: profile.d,
            got: x.len(),
        });
    }
    let r = classify(x, profile.u)?.k;
    claim4_bound_for_count(profile.u, profile.d, r, s_cap)
}

/// Lebesgue measure of `A_{u,K}` with `|K| = k`: `u^k (1 - u)^(d - k)`.
pub fn cell_measure(u: f64, d: usize, k: usize) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", format!("level must lie in (0, 1), got {u}")));
    }
    if k > d {
        return Err(Error::invalid("k", format!("{k} exceeds dimension {d}")));
    }
    Ok((k as f64 * u.ln() + (d - k) as f64 * (-u).ln_1p()).exp())
}

/// Lebesgue measure of `A_{u,K} ∩ A_{v,M}` for nested `M ⊂ K`, `|M| = m`,
/// `|K| = k`: `v^m (u - v)^(k - m) (1 - u)^(d - k)`.
pub fn intersection_measure(u: f64, v: f64, d: usize, k: usize, m: usize) -> Result<f64> {
    if !(0.0 < v && v < u && u < 1.0) {
        return Err(Error::invalid("levels", format!("need 0 < v < u < 1, got u = {u}, v = {v}")));
    }
    if !(m <= k && k <= d) {
        return Err(Error::invalid("counts", format!("need m <= k <= d, got m = {m}, k = {k}, d = {d}")));
    }
    let log = m as f64 * v.ln() + (k - m) as f64 * (u - v).ln() + (d - k) as f64 * (-u).ln_1p();
    Ok(log.exp())
}

/// `(R / (R + 2 sqrt(d) + 1))^d`, the fraction of lattice mass of the
/// certificate window that sits under `[0, R]^d`.
pub fn window_correction(d: usize, side: u64) -> Result<f64> {
    window_factor(d, side, 2.0 * (d as f64).sqrt() + 1.0)
}

/// Window factor when certifying cubes reach at most `reach` outside
/// `[0, R]^d`: `(R / (R + 2 floor(reach) + 1))^d`.
pub fn window_correction_for_reach(d: usize, side: u64, reach: f64) -> Result<f64> {
    if !(reach >= 0.0 && reach.is_finite()) {
        return Err(Error::invalid("reach", format!("must be finite and nonnegative, got {reach}")));
    }
    window_factor(d, side, 2.0 * crate::measures::snap(reach).floor() + 1.0)
}

fn window_factor(d: usize, side: u64, pad: f64) -> Result<f64> {
    if side == 0 {
        return Err(Error::invalid("R", "window side must be at least 1"));
    }
    let side = side as f64;
    Ok((d as f64 * (side / (side + pad)).ln()).exp())
}

/// `((1 + 2^(1/d)) / 2)^d`
pub fn ms_bound(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    let d = d as f64;
    Ok((d * (0.5 * (1.0 + 2f64.powf(1.0 / d))).ln()).exp())
}

/// Where a certificate factor came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactBinomial,
    MonteCarlo,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FactorProvenance {
    pub alpha: Provenance,
    pub superlevel: Provenance,
    pub window: Provenance,
}

/// How the per-cell bound is transferred to a finite measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WindowSpec {
    /// `R -> infinity`, factor 1.
    Asymptotic,
    /// [`window_correction`] with the given side `R`.
    Side(u64),
    /// [`window_correction_for_reach`].
    Reach { side: u64, reach: f64 },
}

/// A lower bound on `c_d` with its factorization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub d: usize,
    pub alpha: f64,
    pub superlevel_lower: f64,
    pub window_factor: f64,
    pub window_side: Option<u64>,
    pub window_reach: Option<f64>,
    pub asymptotic: bool,
    pub mass_per_cell: f64,
    pub bound: f64,
    pub provenance: FactorProvenance,
}

pub fn assemble_certificate(
    d: usize,
    alpha: f64,
    superlevel_lower: f64,
    window: WindowSpec,
    provenance: FactorProvenance,
) -> Result<BoundCertificate> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", format!("must be finite and nonnegative, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&superlevel_lower) {
        return Err(Error::invalid(
            "superlevel_lower",
            format!("must lie in [0, 1], got {superlevel_lower}"),
        ));
    }
    let (window_factor, window_side, window_reach) = match window {
        WindowSpec::Asymptotic => (1.0, None, None),
        WindowSpec::Side(side) => (window_correction(d, side)?, Some(side), None),
        WindowSpec::Reach { side, reach } => (window_correction_for_reach(d, side, reach)?, Some(side), Some(reach)),
    };
    Ok(BoundCertificate {
        d,
        alpha,
        superlevel_lower,
        window_factor,
        window_side,
        window_reach,
        asymptotic: matches!(window, WindowSpec::Asymptotic),
        mass_per_cell: 1.0,
        bound: alpha * superlevel_lower * window_factor,
        provenance,
    })
}

/// The asymptotic certificate: threshold `e^(t^2/2) / 2` times the
/// closed-form union floor, as `R -> infinity`.
pub fn theorem_certificate(t: f64) -> Result<BoundCertificate> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("must be positive, got {t}")));
    }
    assemble_certificate(
        0,
        0.5 * (0.5 * t * t).exp(),
        probability::claim3_floor(t),
        WindowSpec::Asymptotic,
        FactorProvenance {
            alpha: Provenance::ClosedForm,
            superlevel: Provenance::ClosedForm,
            window: Provenance::ClosedForm,
        },
    )
}

/// Finite-`d` certificate built from exact quantities only.
///
/// For every level on the grid the worst admissible point of `E^u` has
/// `floor(r0)` off-center coordinates, and [`f_lower`] decreases in the
/// off-center count, so the threshold is the minimum over levels of the best
/// integer-radius bound at that count. The superlevel measure is the exact
/// inclusion-exclusion lower bound on the union of the `E^u`.
pub fn finite_certificate(d: usize, t: f64, range: (f64, f64), window: Option<u64>) -> Result<BoundCertificate> {
    let union = probability::union_lower_bound(d, t, range)?;
    let mut alpha = f64::INFINITY;
    let mut reach: f64 = 0.0;
    for &u in &union.levels {
        let profile = LevelProfile::new(u, t, d)?;
        let Some(k) = profile.max_admissible() else {
            continue;
        };
        let b = claim4_bound_for_count(u, d, k, profile.default_s_cap())?;
        alpha = alpha.min(b.value);
        reach = reach.max(b.best_s as f64 - 0.5 * u);
    }
    let (alpha, lower) = if alpha.is_finite() { (alpha, union.lower) } else { (0.0, 0.0) };
    let window = match window {
        None => WindowSpec::Asymptotic,
        Some(side) => WindowSpec::Reach { side, reach },
    };
    assemble_certificate(
        d,
        alpha,
        lower,
        window,
        FactorProvenance {
            alpha: Provenance::ClosedForm,
            superlevel: Provenance::ExactBinomial,
            window: Provenance::ClosedForm,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_fields() {
        let p = LevelProfile::new(0.125, 2.0, 100).unwrap();
        assert!((p.sigma - 0.330_718_913_883).abs() < 1e-11);
        // 12.5 - 2.5 * 3.3072 and 12.5 - 2 * 3.3072
        assert!((p.k_lo - 4.2320).abs() < 1e-3);
        assert!((p.r0 - 5.8856).abs() < 1e-3);
        assert!(p.k_lo < p.r0);
        assert!(p.admits(5)); // floor(r0) with r0 non-integer
        assert!(!p.admits(4));
        assert!(!p.admits(6));
        assert!(!p.admits(8));
        assert_eq!(p.max_admissible(), Some(5));
        assert!(LevelProfile::new(0.0, 2.0, 10).is_err());
        assert!(LevelProfile::new(0.2, -1.0, 10).is_err());
    }

    #[test]
    fn classify_examples() {
        let c = classify(&[0.5; 7], 0.2).unwrap();
        assert_eq!(c.k, 0);
        let c = classify(&[0.05, 0.95, 0.5, 0.2], 0.25).unwrap();
        assert_eq!(c.off_center, vec![0, 1]);
        assert_eq!(c.k, 2);
        // boundaries: [0, u/2) is open at u/2, (1 - u/2, 1] open at 1 - u/2
        assert_eq!(classify(&[0.125, 0.875], 0.25).unwrap().k, 0);
        assert_eq!(classify(&[0.0, 1.0], 0.25).unwrap().k, 2);
        assert!(matches!(
            classify(&[0.5, 1.5], 0.25),
            Err(Error::CoordinateOutOfRange { axis: 1, .. })
        ));
    }

    #[test]
    fn in_eu_examples() {
        let p = LevelProfile::new(0.125, 2.0, 100).unwrap();
        let mut x = vec![0.5; 100];
        assert!(!in_eu(&x, &p).unwrap());
        for xj in x.iter_mut().take(5) {
            *xj = 0.01;
        }
        assert!(in_eu(&x, &p).unwrap());
        for xj in x.iter_mut().take(8) {
            *xj = 0.99;
        }
        assert!(!in_eu(&x, &p).unwrap());
    }

    #[test]
    fn f_lower_examples() {
        let v = f_lower(0.25, 4, 1, 1).unwrap();
        let direct = 2f64.powi(3) * 1.0 / 1.75f64.powi(4);
        assert!((v - direct).abs() < 1e-14);
        assert!((v - 0.85298).abs() < 1e-5);
        assert!(f_lower(0.25, 10, 0, 3).unwrap() > 1.0);
        let far = f_lower(0.2, 10, 4, 1_000_000_000).unwrap();
        assert!((far - 1.0).abs() < 1e-8);
        assert!(f_lower(0.25, 4, 1, 0).is_err());
    }

    #[test]
    fn s0_dual_formulas_agree() {
        for &(u, d, t) in &[(0.25, 10_000, 2.0), (0.125, 900, 3.0), (0.2, 37, 1.5), (0.125, 1_000_000, 7.0)] {
            let p = LevelProfile::new(u, t, d).unwrap();
            let closed = s0_closed_form(&p);
            assert!(((p.s0 - closed) / closed).abs() < 1e-9, "{u} {d} {t}");
        }
        let p = LevelProfile::new(0.25, 2.0, 10_000).unwrap();
        assert!((p.s0 - 10.950_317_547).abs() < 1e-8);
        let p = LevelProfile::new(0.125, 3.0, 900).unwrap();
        assert!((p.s0 - 1.7161).abs() < 1e-3);
        let p = LevelProfile::new(0.125, 1e9, 900).unwrap();
        assert!((p.s0 - 0.0625).abs() < 1e-6);
    }

    #[test]
    fn f_lower_is_unimodal_in_s() {
        for &(u, d, t) in &[(0.25, 10_000, 2.0), (0.125, 2_000, 2.0), (0.125, 100_000, 3.0)] {
            let p = LevelProfile::new(u, t, d).unwrap();
            let r = p.max_admissible().unwrap();
            let vals: Vec<f64> = (1..=4 * p.s0.ceil() as u64 + 4)
                .map(|s| log_f_lower(u, d, r, s).unwrap())
                .collect();
            let peak = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert!(vals[..=peak].windows(2).all(|w| w[1] >= w[0]));
            assert!(vals[peak..].windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn claim4_best_s_near_s0() {
        let p = LevelProfile::new(0.25, 2.0, 10_000).unwrap();
        let r = p.r0.floor() as usize;
        let b = claim4_bound_for_count(p.u, p.d, r, (2.0 * p.s0).ceil() as u64).unwrap();
        assert!((b.best_s as f64 - p.s0.round()).abs() <= 1.0);
    }

    #[test]
    fn claim4_all_off_center_is_just_the_formula() {
        let b = claim4_bound_for_count(0.25, 20, 20, 10).unwrap();
        let direct = (1..=10).map(|s| f_lower(0.25, 20, 20, s).unwrap()).fold(0.0, f64::max);
        assert!((b.value - direct).abs() < 1e-14);
    }

    #[test]
    fn intersection_measure_examples() {
        let v = intersection_measure(0.25, 0.125, 3, 1, 0).unwrap();
        assert!((v - 0.0703125).abs() < 1e-15);
        let v = intersection_measure(0.25, 0.125, 5, 2, 2).unwrap();
        assert!((v - 0.125f64.powi(2) * 0.75f64.powi(3)).abs() < 1e-15);
        assert!((cell_measure(0.25, 5, 2).unwrap() - 0.0625 * 0.75f64.powi(3)).abs() < 1e-15);
        assert!(intersection_measure(0.125, 0.25, 3, 1, 0).is_err());
        assert!(intersection_measure(0.25, 0.125, 3, 1, 2).is_err());
    }

    #[test]
    fn window_correction_examples() {
        assert!((window_correction(1, 1_000_000_000).unwrap() - 1.0).abs() < 1e-8);
        assert!((window_correction(10, 1000).unwrap() - 0.9296).abs() < 1e-4);
        assert!((window_correction(10, 50).unwrap() - 0.255).abs() < 1e-3);
        assert!(window_correction(3, 0).is_err());
        // integer reach never pads more than the real margin
        for d in 1..50 {
            let a = window_correction(d, 100).unwrap();
            let b = window_correction_for_reach(d, 100, (d as f64).sqrt()).unwrap();
            assert!(b >= a);
        }
    }

    #[test]
    fn ms_bound_examples() {
        assert!((ms_bound(1).unwrap() - 1.5).abs() < 1e-15);
        let two = (0.5 * (1.0 + 2f64.sqrt())).powi(2);
        assert!((ms_bound(2).unwrap() - two).abs() < 1e-14);
        assert!((ms_bound(2).unwrap() - 1.45711).abs() < 1e-5);
        let mut prev = f64::INFINITY;
        for d in 1..200 {
            let v = ms_bound(d).unwrap();
            assert!(v < 2.0 && v > 2f64.sqrt() && v < prev);
            prev = v;
        }
        // ln2/2 + (ln2)^2/(8d) + O(1/d^2)
        let d = 100_000;
        let series = (std::f64::consts::LN_2 / 2.0 + std::f64::consts::LN_2.powi(2) / (8.0 * d as f64)).exp();
        assert!((ms_bound(d).unwrap() - series).abs() < 1e-9);
    }

    #[test]
    fn certificate_assembly() {
        let prov = FactorProvenance {
            alpha: Provenance::ClosedForm,
            superlevel: Provenance::MonteCarlo,
            window: Provenance::ClosedForm,
        };
        let c = assemble_certificate(3, 2.0, 0.0, WindowSpec::Asymptotic, prov).unwrap();
        assert_eq!(c.bound, 0.0);
        let c = assemble_certificate(10, 1.5, 0.9, WindowSpec::Side(1000), prov).unwrap();
        assert!(c.bound <= c.alpha * c.superlevel_lower);
        assert!((c.window_factor - window_correction(10, 1000).unwrap()).abs() < 1e-15);
        assert!(assemble_certificate(3, -1.0, 0.5, WindowSpec::Asymptotic, prov).is_err());
        let json = serde_json::to_value(&c).unwrap();
        assert_eq!(json["provenance"]["superlevel"], "monte-carlo");
    }

    #[test]
    fn theorem_certificate_matches_constant() {
        for t in [2.0, 10.0, 30.0] {
            let c = theorem_certificate(t).unwrap();
            let k = probability::theorem_constant(t);
            assert!(((c.bound - k) / k).abs() < 1e-12);
        }
        assert!((theorem_certificate(10.0).unwrap().bound - 2.908e-3).abs() < 1e-6);
    }

    #[test]
    fn finite_certificate_is_sound() {
        let c = finite_certificate(2_000, 2.0, DEFAULT_LEVEL_RANGE, Some(100_000)).unwrap();
        assert!(c.alpha > 1.0);
        assert!(c.superlevel_lower > 0.0);
        assert!(c.bound <= c.alpha * c.superlevel_lower);
        assert_eq!(c.provenance.superlevel, Provenance::ExactBinomial);
    }
}
