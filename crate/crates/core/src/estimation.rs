//! Monte Carlo estimates over the unit cell `[0, 1]^d`.
//!
//! Samples are split into fixed blocks of [`BLOCK_SIZE`]; block `j` draws its
//! coordinates from ChaCha stream `j` of the run seed. Which worker runs a
//! block never changes the numbers it produces, and per-block results are
//! concatenated in block order, so every estimate is bit-identical for any
//! worker count.
//!
//! By integer-translation invariance of the unbounded lattice, the measure of
//! a superlevel set inside one unit cell is the per-cell density of that set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::construction::{self, off_center_count, LevelProfile};
use crate::error::{Error, Result};
use crate::maxfun::{default_r_max, eval_max_lattice};
use crate::measures::LatticeWindow;

/// Samples per RNG stream.
pub const BLOCK_SIZE: usize = 1024;

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Lattice truncation radius; `None` means `ceil(sqrt(d)) + 1`.
    pub r_max: Option<f64>,
    pub alpha_grid: Vec<f64>,
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            r_max: None,
            alpha_grid: default_alpha_grid(2.0),
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = Some(r_max);
        self
    }

    pub fn with_alpha_grid(mut self, alpha_grid: Vec<f64>) -> Self {
        self.alpha_grid = alpha_grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("samples", "need at least one sample"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "need at least one worker"));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::invalid("alpha_grid", "must not be empty"));
        }
        if self.alpha_grid[0] <= 0.0 || self.alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("alpha_grid", "must be positive and strictly increasing"));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("r_max", format!("must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn r_max_for(&self, d: usize) -> f64 {
        self.r_max.unwrap_or_else(|| default_r_max(d))
    }
}

/// 64 geometric thresholds from 0.5 to `e^(t^2/2)`.
pub fn default_alpha_grid(t: f64) -> Vec<f64> {
    geometric_grid(0.5, (0.5 * t * t).exp(), 64)
}

pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// SplitMix64 finalizer applied to `seed ^ tag`, for per-dimension seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for block `stream` of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Evaluates `f` on `samples` uniform points of `[0, 1)^d`, in sample order.
pub fn map_samples<T, F>(d: usize, config: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T> + Sync,
{
    config.validate()?;
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    let blocks = config.samples.div_ceil(BLOCK_SIZE);
    let run_block = |block: usize| -> Result<Vec<T>> {
        let mut rng = stream_rng(config.seed, block as u64);
        let len = BLOCK_SIZE.min(config.samples - block * BLOCK_SIZE);
        let mut x = vec![0.0; d];
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            for c in x.iter_mut() {
                *c = rng.gen::<f64>();
            }
            out.push(f(&x)?);
        }
        Ok(out)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let per_block: Vec<Result<Vec<T>>> = pool.install(|| (0..blocks).into_par_iter().map(run_block).collect());
    let mut out = Vec::with_capacity(config.samples);
    for block in per_block {
        out.extend(block?);
    }
    Ok(out)
}

/// Frequency of a membership event with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    pub alpha: Option<f64>,
}

impl McEstimate {
    fn from_count(hits: usize, samples: usize, alpha: Option<f64>) -> Self {
        let p_hat = hits as f64 / samples as f64;
        Self {
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
            samples,
            alpha,
        }
    }

    /// `|p_hat - p| / std_err`; infinite when the estimate is degenerate but wrong.
    pub fn z_score(&self, p: f64) -> f64 {
        let diff = (self.p_hat - p).abs();
        if diff == 0.0 {
            0.0
        } else if self.std_err == 0.0 {
            f64::INFINITY
        } else {
            diff / self.std_err
        }
    }
}

/// 99% interval for a binomial proportion: normal approximation, or Wilson
/// when fewer than 10 hits or misses were observed.
pub fn proportion_interval(p_hat: f64, samples: usize) -> (f64, f64) {
    let n = samples as f64;
    let z = Z_99;
    if (p_hat * n).min((1.0 - p_hat) * n) < 10.0 {
        let denom = 1.0 + z * z / n;
        let center = (p_hat + z * z / (2.0 * n)) / denom;
        let half = z / denom * (p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)).sqrt();
        ((center - half).max(0.0), (center + half).min(1.0))
    } else {
        let half = z * (p_hat * (1.0 - p_hat) / n).sqrt();
        ((p_hat - half).max(0.0), (p_hat + half).min(1.0))
    }
}

/// Generic membership frequency over uniform samples of the unit cell.
pub fn estimate_frequency<F>(d: usize, config: &McConfig, event: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let hits = map_samples(d, config, |x| Ok(event(x)))?.into_iter().filter(|&b| b).count();
    Ok(McEstimate::from_count(hits, config.samples, None))
}

/// `M_d mu^d(x)` (truncated at the configured `r_max`) for every sample.
pub fn lattice_values(d: usize, config: &McConfig) -> Result<Vec<f64>> {
    let window = LatticeWindow::infinite(d)?;
    let r_max = config.r_max_for(d);
    map_samples(d, config, |x| Ok(eval_max_lattice(x, &window, r_max)?.value))
}

/// Fraction of the unit cell where the truncated lattice maximal function is `>= alpha`.
pub fn estimate_superlevel(d: usize, alpha: f64, config: &McConfig) -> Result<McEstimate> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    let values = lattice_values(d, config)?;
    let hits = values.iter().filter(|&&v| v >= alpha).count();
    Ok(McEstimate::from_count(hits, config.samples, Some(alpha)))
}

/// Frequency of `E^u` membership.
pub fn estimate_eu(d: usize, u: f64, t: f64, config: &McConfig) -> Result<McEstimate> {
    let profile = LevelProfile::new(u, t, d)?;
    estimate_frequency(d, config, |x| profile.admits(off_center_count(x, u)))
}

/// Frequency of `A_{u,K} ∩ A_{v,M}` with `K = {0..k}` and `M = {0..m}`.
pub fn estimate_nested_cells(d: usize, u: f64, v: f64, k: usize, m: usize, config: &McConfig) -> Result<McEstimate> {
    construction::intersection_measure(u, v, d, k, m)?;
    estimate_frequency(d, config, |x| {
        x.iter().enumerate().all(|(j, &xj)| {
            construction::is_off_center(xj, u) == (j < k) && construction::is_off_center(xj, v) == (j < m)
        })
    })
}

/// Best empirical weak-type ratio `alpha * p_hat(alpha)` in one dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestBound {
    pub d: usize,
    pub alpha: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r_max: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    pub seed: u64,
    pub ms_bound: f64,
    /// True when the winning threshold is a sample value rather than a grid point.
    pub alpha_from_samples: bool,
    /// Set when every estimated superlevel fraction was zero.
    pub all_zero: bool,
    pub certified: Option<CertifiedForm>,
}

/// `alpha * p_hat * window factor` for a finite window of side `R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifiedForm {
    pub side: u64,
    pub window_factor: f64,
    pub value: f64,
}

pub const SWEEP_CSV_HEADER: [&str; 11] = [
    "d", "alpha", "p_hat", "std_err", "value", "ci_lo", "ci_hi", "r_max", "N", "seed", "ms_bound",
];

/// Sample values are only used as thresholds when at least this many
/// samples reach them; rarer thresholds are too noisy to maximize over.
pub const MIN_SAMPLE_THRESHOLD_HITS: usize = 100;

/// Maximizes `alpha * p_hat(alpha)` over the configured grid and over
/// observed sample values reached by at least [`MIN_SAMPLE_THRESHOLD_HITS`]
/// samples. Between consecutive sample values the empirical ratio increases
/// in `alpha`, so sample values are where its supremum is attained.
pub fn best_bound(d: usize, config: &McConfig, window_side: Option<u64>) -> Result<BestBound> {
    let mut values = lattice_values(d, config)?;
    values.sort_by(|a, b| b.total_cmp(a));
    let n = values.len();
    // number of samples with value >= alpha
    let hits = |alpha: f64| values.partition_point(|&v| v >= alpha);

    let mut best = (0.0, config.alpha_grid[0], 0usize, false);
    for &alpha in &config.alpha_grid {
        let h = hits(alpha);
        let value = alpha * h as f64 / n as f64;
        if value > best.0 {
            best = (value, alpha, h, false);
        }
    }
    for (i, &alpha) in values.iter().enumerate() {
        if i + 1 < MIN_SAMPLE_THRESHOLD_HITS.min(n) {
            continue;
        }
        if !alpha.is_finite() || (i + 1 < n && values[i + 1] == alpha) {
            continue;
        }
        let value = alpha * (i + 1) as f64 / n as f64;
        if value > best.0 {
            best = (value, alpha, i + 1, true);
        }
    }

    let (value, alpha, h, alpha_from_samples) = best;
    let est = McEstimate::from_count(h, n, Some(alpha));
    let (p_lo, p_hi) = proportion_interval(est.p_hat, n);
    let r_max = config.r_max_for(d);
    let certified = window_side
        .map(|side| -> Result<CertifiedForm> {
            let window_factor = construction::window_correction_for_reach(d, side, r_max)?;
            Ok(CertifiedForm {
                side,
                window_factor,
                value: value * window_factor,
            })
        })
        .transpose()?;
    Ok(BestBound {
        d,
        alpha,
        p_hat: est.p_hat,
        std_err: alpha * est.std_err,
        value,
        ci_lo: alpha * p_lo,
        ci_hi: alpha * p_hi,
        r_max,
        samples: n,
        seed: config.seed,
        ms_bound: construction::ms_bound(d)?,
        alpha_from_samples,
        all_zero: h == 0,
        certified,
    })
}

/// One [`best_bound`] row per dimension, each with seed `derive_seed(seed, d)`.
pub fn sweep_dimensions(d_list: &[usize], config: &McConfig, window_side: Option<u64>) -> Result<Vec<BestBound>> {
    if d_list.is_empty() {
        return Err(Error::invalid("d_list", "must not be empty"));
    }
    d_list
        .iter()
        .map(|&d| {
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, d as u64);
            best_bound(d, &cfg, window_side)
        })
        .collect()
}
