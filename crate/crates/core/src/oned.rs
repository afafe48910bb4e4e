//! One-dimensional weak-type functional for finite unit-mass configurations.
//!
//! For sorted positions `p_1 < ... < p_n` and a threshold `lambda`, a center
//! `x` satisfies `M nu(x) >= lambda` iff some run `p_i..p_j` of
//! `m = j - i + 1` deltas fits in a cube of radius `r <= m / (2 lambda)`
//! around `x`, that is iff `x in [p_j - m/(2 lambda), p_i + m/(2 lambda)]`.
//! The superlevel set is the union of these `n (n + 1) / 2` closed intervals.
//!
//! Writing `h = 1/(2 lambda)`, the union length is piecewise linear in `h`,
//! `L = a + b h` on each piece, and the functional `lambda L / n` has
//! derivative `-a / (2 n h^2)` there. Its local maxima sit at the kinks where
//! `a` turns from negative to positive, which [`best_lambda`] locates by
//! bisection on the sign of `a`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::stream_rng;

/// Intervals closer than this are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// `(11 + sqrt 61) / 12`, the best weak-type constant in one dimension.
pub fn c1_exact() -> f64 {
    (11.0 + 61f64.sqrt()) / 12.0
}

/// `37/24`, a previously published lower bound for the one-dimensional constant.
pub const C1_REFERENCE_LOWER: f64 = 37.0 / 24.0;

/// Unit deltas at strictly increasing positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct OneDConfig {
    positions: Vec<f64>,
    pub provenance: String,
}

#[derive(Deserialize)]
struct RawConfig {
    positions: Vec<f64>,
    #[serde(default)]
    provenance: String,
}

impl TryFrom<RawConfig> for OneDConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        OneDConfig::new(raw.positions, raw.provenance)
    }
}

impl OneDConfig {
    pub fn new(positions: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("positions", "need at least one delta"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("positions", "must be finite"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("positions", "must be strictly increasing"));
        }
        Ok(Self {
            positions,
            provenance: provenance.into(),
        })
    }

    /// `0, 1, ..., n - 1`.
    pub fn equally_spaced(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i as f64).collect(), format!("equally spaced, n = {n}"))
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Sorted, pairwise disjoint closed intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalUnion {
    pub intervals: Vec<(f64, f64)>,
    pub total_length: f64,
}

impl IntervalUnion {
    pub fn from_intervals(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|(a, b)| a <= b);
        raw.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            match intervals.last_mut() {
                Some(last) if a <= last.1 + MERGE_TOLERANCE => last.1 = last.1.max(b),
                _ => intervals.push((a, b)),
            }
        }
        let total_length = intervals.iter().map(|(a, b)| b - a).sum();
        Self {
            intervals,
            total_length,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Length of the part inside `[lo, hi]`.
    pub fn length_within(&self, lo: f64, hi: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| (b.min(hi) - a.max(lo)).max(0.0))
            .sum()
    }
}

/// One interval `[p_j - m h, p_i + m h]` with the positions that define its ends.
#[derive(Clone, Copy)]
struct RunInterval {
    left: f64,
    right: f64,
    left_anchor: f64,
    right_anchor: f64,
}

fn run_intervals(positions: &[f64], h: f64, out: &mut Vec<RunInterval>) {
    out.clear();
    for (i, &pi) in positions.iter().enumerate() {
        for (offset, &pj) in positions[i..].iter().enumerate() {
            let reach = (offset + 1) as f64 * h;
            let left = pj - reach;
            let right = pi + reach;
            if left <= right {
                out.push(RunInterval {
                    left,
                    right,
                    left_anchor: pj,
                    right_anchor: pi,
                });
            }
        }
    }
}

/// Union length and its constant part `a` in `L = a + b h`.
fn union_structure(positions: &[f64], h: f64, scratch: &mut Vec<RunInterval>) -> (f64, f64) {
    run_intervals(positions, h, scratch);
    scratch.sort_by(|x, y| x.left.total_cmp(&y.left));
    let mut length = 0.0;
    let mut constant = 0.0;
    let mut iter = scratch.iter();
    let Some(first) = iter.next() else {
        return (0.0, 0.0);
    };
    let mut cur = *first;
    for iv in iter {
        if iv.left <= cur.right + MERGE_TOLERANCE {
            if iv.right > cur.right {
                cur.right = iv.right;
                cur.right_anchor = iv.right_anchor;
            }
        } else {
            length += cur.right - cur.left;
            constant += cur.right_anchor - cur.left_anchor;
            cur = *iv;
        }
    }
    length += cur.right - cur.left;
    constant += cur.right_anchor - cur.left_anchor;
    (length, constant)
}

/// `{x : M nu(x) >= lambda}`.
pub fn superlevel_1d(config: &OneDConfig, lambda: f64) -> Result<IntervalUnion> {
    check_lambda(lambda)?;
    let mut raw = Vec::new();
    run_intervals(config.positions(), 0.5 / lambda, &mut raw);
    Ok(IntervalUnion::from_intervals(raw.iter().map(|iv| (iv.left, iv.right)).collect()))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be positive and finite, got {lambda}")));
    }
    Ok(())
}

/// `lambda |{M nu >= lambda}| / n`, a lower bound for the one-dimensional constant.
pub fn functional_1d(config: &OneDConfig, lambda: f64) -> Result<f64> {
    Ok(lambda * superlevel_1d(config, lambda)?.total_length / config.len() as f64)
}

/// Functional value as a function of `h = 1/(2 lambda)`, with the sign
/// information needed for bisection.
struct Evaluator<'a> {
    positions: &'a [f64],
    scratch: Vec<RunInterval>,
}

impl<'a> Evaluator<'a> {
    fn new(positions: &'a [f64]) -> Self {
        Self {
            positions,
            scratch: Vec::with_capacity(positions.len() * (positions.len() + 1) / 2),
        }
    }

    /// `(functional value, constant part a)` at `h`.
    fn at(&mut self, h: f64) -> (f64, f64) {
        let (length, constant) = union_structure(self.positions, h, &mut self.scratch);
        (length / (2.0 * h * self.positions.len() as f64), constant)
    }
}

/// Default number of bisection steps spent on the most promising brackets.
pub const DEFAULT_REFINEMENT_BUDGET: usize = 160;
const STEPS_PER_BRACKET: usize = 40;

/// Threshold maximizing [`functional_1d`], found by scanning the run
/// emptiness breakpoints `(p_j - p_i)/m` plus a geometric grid and then
/// bisecting the brackets that contain a local maximum. Any returned value is
/// a valid lower bound, whether or not it is the global maximum.
pub fn best_lambda(config: &OneDConfig, refinement_budget: usize) -> Result<(f64, f64)> {
    if refinement_budget == 0 {
        return Err(Error::invalid("refinement_budget", "must be at least 1"));
    }
    let p = config.positions();
    let n = p.len();
    if n == 1 {
        return Ok((1.0, 1.0));
    }

    let mut hs = Vec::with_capacity(n * n / 2 + 40);
    for i in 0..n {
        for j in i + 1..n {
            hs.push((p[j] - p[i]) / (j - i + 1) as f64);
        }
    }
    let lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = hs.iter().copied().fold(0.0, f64::max);
    hs.extend(crate::estimation::geometric_grid(0.25 * lo, 4.0 * hi, 32));
    hs.sort_by(f64::total_cmp);
    hs.dedup();

    let mut eval = Evaluator::new(p);
    let scan: Vec<(f64, f64, f64)> = hs
        .iter()
        .map(|&h| {
            let (g, a) = eval.at(h);
            (h, g, a)
        })
        .collect();
    let mut best = scan
        .iter()
        .map(|&(h, g, _)| (h, g))
        .fold((hs[0], f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });

    let mut brackets: Vec<(f64, f64, f64)> = scan
        .windows(2)
        .filter(|w| w[0].2 < 0.0 && w[1].2 > 0.0)
        .map(|w| (w[0].0, w[1].0, w[0].1.max(w[1].1)))
        .collect();
    brackets.sort_by(|a, b| b.2.total_cmp(&a.2));

    let mut budget = refinement_budget;
    for (mut left, mut right, _) in brackets {
        if budget == 0 {
            break;
        }
        let steps = STEPS_PER_BRACKET.min(budget);
        budget -= steps;
        for _ in 0..steps {
            let mid = 0.5 * (left + right);
            let (g, a) = eval.at(mid);
            if g > best.1 {
                best = (mid, g);
            }
            if a < 0.0 {
                left = mid;
            } else {
                right = mid;
            }
        }
        for h in [left, right] {
            let (g, _) = eval.at(h);
            if g > best.1 {
                best = (h, g);
            }
        }
    }

    let lambda = 0.5 / best.0;
    Ok((lambda, functional_1d(config, lambda)?))
}

/// Coordinate-descent settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerOptions {
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub workers: usize,
    /// Non-improving iterations before the step halves.
    pub patience: usize,
    pub refinement_budget: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            iterations: 400,
            restarts: 20,
            seed: 0,
            workers: 1,
            patience: 50,
            refinement_budget: DEFAULT_REFINEMENT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub value: f64,
    pub step: f64,
}

pub const TRACE_CSV_HEADER: [&str; 3] = ["iteration", "value", "step"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub config: OneDConfig,
    pub lambda: f64,
    pub value: f64,
    pub best_restart: usize,
    pub restart_values: Vec<f64>,
    /// Best-so-far trace of the winning restart.
    pub trace: Vec<TraceRow>,
}

struct RestartOutcome {
    positions: Vec<f64>,
    lambda: f64,
    value: f64,
    trace: Vec<TraceRow>,
}

fn objective(positions: &[f64], budget: usize) -> (f64, f64) {
    match OneDConfig::new(positions.to_vec(), "") {
        Ok(cfg) => best_lambda(&cfg, budget).unwrap_or((1.0, f64::NEG_INFINITY)),
        Err(_) => (1.0, f64::NEG_INFINITY),
    }
}

fn run_restart(n: usize, restart: usize, opts: &OptimizerOptions) -> RestartOutcome {
    let mut rng = stream_rng(opts.seed, restart as u64);
    let mut positions: Vec<f64> = (0..n).map(|i| i as f64).collect();
    if restart > 0 {
        for p in positions.iter_mut() {
            *p += rng.gen_range(-0.35..0.35);
        }
        positions.sort_by(f64::total_cmp);
    }
    let span = positions[n - 1] - positions[0];
    let mut step = span / n as f64;
    let (mut lambda, mut value) = objective(&positions, opts.refinement_budget);
    let mut trace = vec![TraceRow {
        iteration: 0,
        value,
        step,
    }];
    let mut stale = 0;
    for iteration in 1..=opts.iterations {
        let i = rng.gen_range(0..n);
        let mut improved = false;
        for dir in [1.0, -1.0] {
            let mut trial = positions.clone();
            trial[i] += dir * step;
            trial.sort_by(f64::total_cmp);
            if trial.windows(2).any(|w| w[1] - w[0] < 1e-9) {
                continue;
            }
            let (l, v) = objective(&trial, opts.refinement_budget);
            if v > value + 1e-12 {
                positions = trial;
                value = v;
                lambda = l;
                improved = true;
                break;
            }
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= opts.patience {
                step *= 0.5;
                stale = 0;
            }
        }
        trace.push(TraceRow { iteration, value, step });
    }
    RestartOutcome {
        positions,
        lambda,
        value,
        trace,
    }
}

/// Multi-start coordinate descent over delta positions. Restart 0 starts
/// from the equally spaced configuration, the others from jittered copies of
/// it; restart `r` draws from RNG stream `r`. Ties between restarts go to the
/// lowest index, so the result does not depend on `workers`.
pub fn optimize_positions(n: usize, opts: &OptimizerOptions) -> Result<OptimizeResult> {
    if n < 2 {
        return Err(Error::invalid("n", "need at least two deltas"));
    }
    if opts.restarts == 0 || opts.workers == 0 || opts.patience == 0 {
        return Err(Error::invalid("options", "restarts, workers and patience must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let outcomes: Vec<RestartOutcome> =
        pool.install(|| (0..opts.restarts).into_par_iter().map(|r| run_restart(n, r, opts)).collect());

    let best_restart = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (i, o)| if o.value > outcomes[best].value { i } else { best });
    let restart_values = outcomes.iter().map(|o| o.value).collect();
    let winner = outcomes.into_iter().nth(best_restart).expect("at least one restart");
    let config = OneDConfig::new(
        winner.positions,
        format!(
            "coordinate descent: n = {n}, iterations = {}, restarts = {}, seed = {}, restart = {best_restart}",
            opts.iterations, opts.restarts, opts.seed
        ),
    )?;
    let value = functional_1d(&config, winner.lambda)?;
    Ok(OptimizeResult {
        config,
        lambda: winner.lambda,
        value,
        best_restart,
        restart_values,
        trace: winner.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: &[f64]) -> OneDConfig {
        OneDConfig::new(p.to_vec(), "test").unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(OneDConfig::new(vec![], "").is_err());
        assert!(OneDConfig::new(vec![0.0, 0.0], "").is_err());
        assert!(OneDConfig::new(vec![1.0, 0.0], "").is_err());
        let c: OneDConfig = serde_json::from_str(r#"{"positions": [0, 1.5]}"#).unwrap();
        assert_eq!(c.positions(), &[0.0, 1.5]);
        assert!(serde_json::from_str::<OneDConfig>(r#"{"positions": [2, 1]}"#).is_err());
    }

    #[test]
    fn superlevel_examples() {
        let s = superlevel_1d(&cfg(&[0.0]), 2.0).unwrap();
        assert_eq!(s.intervals, vec![(-0.25, 0.25)]);
        assert_eq!(s.total_length, 0.5);

        let s = superlevel_1d(&cfg(&[0.0, 1.0]), 1.0).unwrap();
        assert_eq!(s.intervals, vec![(-0.5, 1.5)]);
        assert_eq!(s.total_length, 2.0);

        let s = superlevel_1d(&cfg(&[0.0, 1.0]), 1e9).unwrap();
        assert!(s.total_length < 1e-8);
    }

    #[test]
    fn functional_examples() {
        for lambda in [0.1, 1.0, 10.0] {
            assert!((functional_1d(&cfg(&[3.0]), lambda).unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(functional_1d(&cfg(&[0.0, 1.0]), 1.0).unwrap(), 1.0);
        assert!(functional_1d(&cfg(&[0.0]), 0.0).is_err());
    }

    #[test]
    fn union_normalization() {
        let u = IntervalUnion::from_intervals(vec![(2.0, 3.0), (0.0, 1.0), (1.0 + 1e-13, 1.5), (5.0, 4.0)]);
        assert_eq!(u.intervals, vec![(0.0, 1.5), (2.0, 3.0)]);
        assert!((u.total_length - 2.5).abs() < 1e-15);
        assert!((u.length_within(1.0, 2.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn structure_constant_matches_length_slope() {
        let c = cfg(&[0.0, 0.7, 1.9, 2.2, 4.0]);
        let mut scratch = Vec::new();
        for h in [0.05, 0.31, 0.77, 1.3, 2.9] {
            let (l1, a1) = union_structure(c.positions(), h, &mut scratch);
            let eps = 1e-7;
            let (l2, a2) = union_structure(c.positions(), h + eps, &mut scratch);
            if a1 == a2 {
                let slope = (l2 - l1) / eps;
                // L = a + b h with integer b
                let b = slope.round();
                assert!((l1 - (a1 + b * h)).abs() < 1e-9, "h = {h}");
            }
        }
    }

    #[test]
    fn best_lambda_examples() {
        let (_, v) = best_lambda(&cfg(&[0.0]), 10).unwrap();
        assert_eq!(v, 1.0);
        let lattice = OneDConfig::equally_spaced(50).unwrap();
        let (lambda, v) = best_lambda(&lattice, DEFAULT_REFINEMENT_BUDGET).unwrap();
        assert!(v >= 1.4, "{v}");
        assert!(v <= c1_exact() + 1e-9);
        // fine grid oracle never beats the refined maximum
        let grid_best = (1..=4000)
            .map(|i| functional_1d(&lattice, 0.5 + i as f64 * 0.0005).unwrap())
            .fold(0.0, f64::max);
        assert!(v >= grid_best - 1e-9, "{v} vs {grid_best} at {lambda}");
    }

    #[test]
    fn translation_and_scaling() {
        let base = cfg(&[0.0, 0.9, 1.7, 3.1]);
        let shifted = cfg(&[10.0, 10.9, 11.7, 13.1]);
        let scaled = cfg(&[0.0, 1.8, 3.4, 6.2]);
        for lambda in [0.4, 0.9, 1.6] {
            let a = functional_1d(&base, lambda).unwrap();
            assert!((a - functional_1d(&shifted, lambda).unwrap()).abs() < 1e-12);
            assert!((a - functional_1d(&scaled, lambda / 2.0).unwrap()).abs() < 1e-12);
        }
        let (_, a) = best_lambda(&base, 200).unwrap();
        let (_, b) = best_lambda(&scaled, 200).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn optimizer_small() {
        let opts = OptimizerOptions {
            iterations: 60,
            restarts: 3,
            seed: 5,
            ..Default::default()
        };
        let res = optimize_positions(2, &opts).unwrap();
        assert!(res.value >= 1.0);
        assert!(res.value <= c1_exact() + 1e-9);
        assert!(res.trace.windows(2).all(|w| w[1].value >= w[0].value));
        assert!(optimize_positions(1, &opts).is_err());
    }
}
