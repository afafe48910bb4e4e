//! Exact evaluation of the centered cube maximal function of a discrete measure.
//!
//! For a fixed center the mass of `Q(x, r)` is a right-continuous step
//! function of `r` that only jumps at the `l_inf` distances from `x` to the
//! support, while `(2r)^-d` strictly decreases. The supremum over
//! `r in (0, r_max]` is therefore a maximum over those candidate radii.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::measures::{axis_count, Cube, DeltaMeasure, DiscreteMeasure, LatticeWindow, Measure, SNAP_TOLERANCE};

/// Two candidate radii closer than this are merged into one.
pub const RADIUS_DEDUP_TOLERANCE: f64 = SNAP_TOLERANCE;

/// Log-ratio improvement required to replace the current maximizer, so the
/// smallest maximizing radius wins ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Value of `M nu(x)` and the radius attaining it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    /// `+inf` when a support point sits at `x`.
    #[serde(serialize_with = "serialize_extended_f64")]
    pub value: f64,
    pub best_radius: Option<f64>,
    /// True when some support lies beyond `r_max`, so only `r <= r_max` was searched.
    pub truncated: bool,
}

impl EvalResult {
    fn infinite(truncated: bool) -> Self {
        Self {
            value: f64::INFINITY,
            best_radius: None,
            truncated,
        }
    }

    fn empty(truncated: bool) -> Self {
        Self {
            value: 0.0,
            best_radius: None,
            truncated,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }
}

pub(crate) fn serialize_extended_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("nan")
    }
}

/// Default truncation radius for lattice evaluation: `ceil(sqrt(d)) + 1`.
pub fn default_r_max(d: usize) -> f64 {
    (d as f64).sqrt().ceil() + 1.0
}

fn check_r_max(r_max: f64) -> Result<()> {
    if !(r_max > 0.0) || r_max.is_nan() {
        return Err(Error::invalid("r_max", format!("must be positive, got {r_max}")));
    }
    Ok(())
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Sorts ascending and merges runs closer than the tolerance, keeping the
/// largest value of each run.
fn dedup_radii(mut radii: Vec<f64>) -> Vec<f64> {
    radii.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(radii.len());
    let mut run_start = f64::NEG_INFINITY;
    for r in radii {
        if r - run_start <= RADIUS_DEDUP_TOLERANCE {
            *out.last_mut().unwrap() = r;
        } else {
            run_start = r;
            out.push(r);
        }
    }
    out
}

fn lattice_axis_range(xj: f64, r_max: f64, lo: Option<i64>, hi: Option<i64>) -> std::ops::RangeInclusive<i64> {
    let mut first = (xj - r_max).ceil() as i64;
    let mut last = (xj + r_max).floor() as i64;
    if let Some(lo) = lo {
        first = first.max(lo);
    }
    if let Some(hi) = hi {
        last = last.min(hi);
    }
    first..=last
}

/// Distinct positive support distances `<= r_max`, ascending.
pub fn candidate_radii(measure: &Measure, x: &[f64], r_max: f64) -> Result<Vec<f64>> {
    check_r_max(r_max)?;
    measure.check_dimension(x.len())?;
    let raw: Vec<f64> = match measure {
        Measure::Deltas(m) => m
            .points()
            .iter()
            .map(|p| linf(&p.x, x))
            .filter(|&r| r > 0.0 && r <= r_max)
            .collect(),
        Measure::Lattice(w) => {
            let (lo, hi) = w.axis_bounds();
            x.iter()
                .flat_map(|&xj| lattice_axis_range(xj, r_max, lo, hi).map(move |n| (xj - n as f64).abs()))
                .filter(|&r| r > 0.0 && r <= r_max)
                .collect()
        }
    };
    Ok(dedup_radii(raw))
}

/// `ln(count) - d ln(2r)`, or `None` when the count is zero.
fn log_ratio(count: f64, r: f64, d: usize) -> Option<f64> {
    (count > 0.0).then(|| count.ln() - d as f64 * (2.0 * r).ln())
}

fn exact_ratio(count: f64, r: f64, d: usize) -> f64 {
    let v = count / (2.0 * r).powi(d as i32);
    if v.is_finite() && v > 0.0 {
        v
    } else {
        log_ratio(count, r, d).map_or(0.0, f64::exp)
    }
}

/// Exact `sup_{0 < r <= r_max} nu(Q(x, r)) / (2r)^d` for a finite delta measure.
pub fn eval_max(measure: &DeltaMeasure, x: &[f64], r_max: f64) -> Result<EvalResult> {
    check_r_max(r_max)?;
    measure.check_dimension(x.len())?;
    let d = x.len();

    let mut dist: Vec<(f64, f64)> = measure.points().iter().map(|p| (linf(&p.x, x), p.w)).collect();
    let truncated = dist.iter().any(|&(r, _)| r > r_max);
    if dist.iter().any(|&(r, _)| r == 0.0) {
        return Ok(EvalResult::infinite(truncated));
    }
    dist.retain(|&(r, _)| r <= r_max);
    dist.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<(f64, f64, f64)> = None; // (log ratio, radius, count)
    let mut cumulative = 0.0;
    let mut i = 0;
    while i < dist.len() {
        let run_start = dist[i].0;
        let mut radius = run_start;
        while i < dist.len() && dist[i].0 - run_start <= RADIUS_DEDUP_TOLERANCE {
            cumulative += dist[i].1;
            radius = dist[i].0;
            i += 1;
        }
        if let Some(lr) = log_ratio(cumulative, radius, d) {
            if best.map_or(true, |(b, _, _)| lr > b + TIE_TOLERANCE) {
                best = Some((lr, radius, cumulative));
            }
        }
    }

    Ok(match best {
        None => EvalResult::empty(truncated),
        Some((_, radius, count)) => EvalResult {
            value: exact_ratio(count, radius, d),
            best_radius: Some(radius),
            truncated,
        },
    })
}

/// Same contract as [`eval_max`] for a lattice window, using the separable
/// per-axis counts instead of materializing lattice points.
///
/// Per-axis distance events are merged in ascending order while the product
/// of counts is maintained in log form, so the sweep costs `O(C log C + d)`
/// for `C` candidate radii.
pub fn eval_max_lattice(x: &[f64], window: &LatticeWindow, r_max: f64) -> Result<EvalResult> {
    check_r_max(r_max)?;
    window.check_dimension(x.len())?;
    let d = x.len();
    let (lo, hi) = window.axis_bounds();

    let truncated = match (lo, hi) {
        (Some(lo), Some(hi)) => x
            .iter()
            .any(|&xj| (xj - lo as f64).abs().max((xj - hi as f64).abs()) > r_max),
        _ => true,
    };

    let in_window = |n: f64| lo.map_or(true, |lo| n >= lo as f64) && hi.map_or(true, |hi| n <= hi as f64);
    if x.iter().all(|&xj| xj == xj.round() && in_window(xj)) {
        return Ok(EvalResult::infinite(truncated));
    }

    let mut counts = vec![0u64; d];
    let mut events: Vec<(f64, usize)> = Vec::new();
    for (j, &xj) in x.iter().enumerate() {
        for n in lattice_axis_range(xj, r_max, lo, hi) {
            let r = (xj - n as f64).abs();
            if r == 0.0 {
                counts[j] += 1;
            } else {
                events.push((r, j));
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut zero_axes = counts.iter().filter(|&&c| c == 0).count();
    let mut log_count: f64 = counts.iter().filter(|&&c| c > 0).map(|&c| (c as f64).ln()).sum();
    let mut best: Option<(f64, f64)> = None; // (log ratio, radius)
    let mut i = 0;
    while i < events.len() {
        let run_start = events[i].0;
        let mut radius = run_start;
        while i < events.len() && events[i].0 - run_start <= RADIUS_DEDUP_TOLERANCE {
            let (r, j) = events[i];
            let c = counts[j];
            if c == 0 {
                zero_axes -= 1;
            } else {
                log_count -= (c as f64).ln();
            }
            counts[j] = c + 1;
            log_count += ((c + 1) as f64).ln();
            radius = r;
            i += 1;
        }
        if zero_axes == 0 {
            let lr = log_count - d as f64 * (2.0 * radius).ln();
            if best.map_or(true, |(b, _)| lr > b + TIE_TOLERANCE) {
                best = Some((lr, radius));
            }
        }
    }

    Ok(match best {
        None => EvalResult::empty(truncated),
        Some((lr, radius)) => {
            let mut value = 1.0;
            for &xj in x {
                value *= axis_count(xj, radius, lo, hi) as f64 / (2.0 * radius);
            }
            if !(value.is_finite() && value > 0.0) {
                value = lr.exp();
            }
            EvalResult {
                value,
                best_radius: Some(radius),
                truncated,
            }
        }
    })
}

/// Dispatches to [`eval_max`] or [`eval_max_lattice`].
pub fn eval_max_measure(measure: &Measure, x: &[f64], r_max: f64) -> Result<EvalResult> {
    match measure {
        Measure::Deltas(m) => eval_max(m, x, r_max),
        Measure::Lattice(w) => eval_max_lattice(x, w, r_max),
    }
}

/// Brute-force cross-check: the largest ratio over a uniform radius grid of
/// `steps` points in `(0, r_max]` together with every support distance,
/// found by direct enumeration. Only meant for tests.
pub fn eval_max_dense_oracle(measure: &Measure, x: &[f64], r_max: f64, steps: usize) -> Result<f64> {
    check_r_max(r_max)?;
    if steps < 1000 {
        return Err(Error::invalid("steps", format!("need at least 1000, got {steps}")));
    }
    measure.check_dimension(x.len())?;
    let d = x.len();

    let mut radii: Vec<f64> = (1..=steps).map(|k| r_max * k as f64 / steps as f64).collect();
    match measure {
        Measure::Deltas(m) => {
            for p in m.points() {
                let r = linf(&p.x, x);
                if r == 0.0 {
                    return Ok(f64::INFINITY);
                }
                radii.push(r);
            }
        }
        Measure::Lattice(w) => {
            let (lo, hi) = w.axis_bounds();
            let lo = lo.unwrap_or(i64::MIN) as f64;
            let hi = hi.unwrap_or(i64::MAX) as f64;
            for &xj in x {
                let mut n = (xj - r_max).floor() - 1.0;
                while n <= xj + r_max + 1.0 {
                    if n >= lo && n <= hi {
                        radii.push((xj - n).abs());
                    }
                    n += 1.0;
                }
            }
        }
    }

    let mut best: f64 = 0.0;
    for r in radii.into_iter().filter(|&r| r > 0.0 && r <= r_max) {
        let count = measure.count_in_cube(&Cube::new(x.to_vec(), r)?)?;
        best = best.max(count / (2.0 * r).powi(d as i32));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deltas(d: usize, pts: &[&[f64]]) -> DeltaMeasure {
        DeltaMeasure::unit(d, pts.iter().map(|p| p.to_vec())).unwrap()
    }

    #[test]
    fn candidate_radii_examples() {
        let single = Measure::Deltas(deltas(1, &[&[0.0]]));
        assert_eq!(candidate_radii(&single, &[0.25], 10.0).unwrap(), vec![0.25]);

        let lattice = Measure::Lattice(LatticeWindow::infinite(1).unwrap());
        let r = candidate_radii(&lattice, &[0.3], 1.5).unwrap();
        let expected = [0.3, 0.7, 1.3];
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }

        let pair = Measure::Deltas(deltas(1, &[&[0.0], &[1.0]]));
        assert_eq!(candidate_radii(&pair, &[0.5], 3.0).unwrap(), vec![0.5]);
        assert!(candidate_radii(&pair, &[5.0], 1.0).unwrap().is_empty());
    }

    #[test]
    fn eval_max_examples() {
        let single = deltas(1, &[&[0.0]]);
        let res = eval_max(&single, &[0.25], 10.0).unwrap();
        assert_eq!(res.value, 2.0);
        assert_eq!(res.best_radius, Some(0.25));
        assert!(!res.truncated);

        let pair = deltas(1, &[&[0.0], &[1.0]]);
        let res = eval_max(&pair, &[0.5], 10.0).unwrap();
        assert_eq!(res.value, 2.0);
        assert_eq!(res.best_radius, Some(0.5));

        let origin = deltas(2, &[&[0.0, 0.0]]);
        let res = eval_max(&origin, &[0.5, 0.25], 10.0).unwrap();
        assert_eq!(res.value, 1.0);
        assert_eq!(res.best_radius, Some(0.5));
    }

    #[test]
    fn eval_max_sentinels() {
        let single = deltas(2, &[&[1.0, 2.0]]);
        let res = eval_max(&single, &[1.0, 2.0], 1.0).unwrap();
        assert!(res.is_infinite());
        let res = eval_max(&single, &[5.0, 5.0], 1.0).unwrap();
        assert_eq!(res.value, 0.0);
        assert_eq!(res.best_radius, None);
        assert!(res.truncated);
    }

    #[test]
    fn eval_max_lattice_examples() {
        let w = LatticeWindow::infinite(1).unwrap();
        let res = eval_max_lattice(&[0.5], &w, 3.0).unwrap();
        assert_eq!(res.value, 2.0);
        assert_eq!(res.best_radius, Some(0.5));
        assert!(res.truncated);

        let w2 = LatticeWindow::infinite(2).unwrap();
        let res = eval_max_lattice(&[0.5, 0.5], &w2, 3.0).unwrap();
        assert!(res.value >= 4.0);

        let res = eval_max_lattice(&[0.45, 0.55, 0.5], &LatticeWindow::infinite(3).unwrap(), 0.3).unwrap();
        assert_eq!(res.value, 0.0);

        let res = eval_max_lattice(&[0.25], &w, 3.0).unwrap();
        assert_eq!(res.value, 2.0);
        assert_eq!(res.best_radius, Some(0.25));

        assert!(eval_max_lattice(&[3.0, -1.0], &w2, 1.0).unwrap().is_infinite());
        let bounded = LatticeWindow::bounded(2, 0, 2).unwrap();
        assert!(!eval_max_lattice(&[3.0, 1.0], &bounded, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn lattice_translation_invariance() {
        let w = LatticeWindow::infinite(3).unwrap();
        let x = [0.13, 0.77, 0.42];
        let base = eval_max_lattice(&x, &w, 3.0).unwrap();
        let shifted = [x[0] + 5.0, x[1] - 3.0, x[2] + 11.0];
        let moved = eval_max_lattice(&shifted, &w, 3.0).unwrap();
        assert!((base.value - moved.value).abs() <= 1e-12 * base.value);
    }

    #[test]
    fn oracle_rejects_coarse_grids() {
        let m = Measure::Deltas(deltas(1, &[&[0.0]]));
        assert!(eval_max_dense_oracle(&m, &[0.25], 1.0, 10).is_err());
        let v = eval_max_dense_oracle(&m, &[0.25], 1.0, 1000).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        let pair = Measure::Deltas(deltas(1, &[&[0.0], &[1.0]]));
        let v = eval_max_dense_oracle(&pair, &[0.5], 2.0, 1000).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dedup_keeps_largest_of_run() {
        let r = dedup_radii(vec![0.5, 0.5 + 1e-14, 0.25, 1.0]);
        assert_eq!(r, vec![0.25, 0.5 + 1e-14, 1.0]);
    }

    #[test]
    fn infinite_value_serializes_as_string() {
        let r = EvalResult::infinite(true);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains(r#""value":"inf""#));
    }
}
