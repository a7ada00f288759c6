//! Monte-Carlo count of real zeros for one-variable sums, independent of
//! the Kac-Rice machinery.
//!
//! Two counters are provided. `sample_zero_count` scans a grid on a finite
//! interval and bisects each sign change. `isolate_zeros` is exact on all
//! of ℝ: after dividing by the lowest exponential, the derivative is again
//! an exponential sum with one term fewer, whose zeros cut the line into
//! monotone pieces holding at most one zero each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::ExpSum;

/// Samples drawn from one counter-based substream.
const CHUNK: usize = 1024;

/// How sampled sums are reduced to zero counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroCounter {
    /// Exact root isolation on ℝ.
    Isolation,
    /// Sign changes on a scan grid over the doubled interval.
    Scan,
}

/// Monte-Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub interval: (f64, f64),
    pub scan_points: usize,
    pub refine_tol: f64,
    pub counter: ZeroCounter,
}

impl McConfig {
    /// Defaults for `e`: interval `center ± 12/σ` with `σ` the smallest
    /// exponent gap, and `64·#A` scan points per unit length.
    pub fn for_sum(e: &ExpSum, n_samples: usize, seed: u64) -> Result<Self> {
        require_univariate(e)?;
        let gap = e.support().min_axis_gap().unwrap_or(1.0);
        let c = e.center()[0];
        let interval = (c - 12.0 / gap, c + 12.0 / gap);
        Ok(McConfig {
            n_samples,
            seed,
            interval,
            scan_points: default_scan_points(e, interval),
            refine_tol: 1e-12,
            counter: ZeroCounter::Isolation,
        })
    }

    /// Replaces the interval and rescales the scan density accordingly.
    pub fn with_interval(mut self, e: &ExpSum, lo: f64, hi: f64) -> Self {
        self.interval = (lo, hi);
        self.scan_points = default_scan_points(e, (lo, hi));
        self
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.interval;
        if self.n_samples == 0 {
            return Err(Error::Input("n_samples must be at least 1".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Input(format!(
                "interval ({lo}, {hi}) must be finite with lo < hi"
            )));
        }
        if self.scan_points < 16 {
            return Err(Error::Input("scan_points must be at least 16".into()));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::Input("refine_tol must be positive".into()));
        }
        Ok(())
    }
}

fn default_scan_points(e: &ExpSum, (lo, hi): (f64, f64)) -> usize {
    ((64 * e.len()) as f64 * (hi - lo)).ceil().max(16.0) as usize
}

fn require_univariate(e: &ExpSum) -> Result<()> {
    if e.dim() != 1 {
        return Err(Error::UnsupportedDimension(e.dim()));
    }
    Ok(())
}

/// A realized sum `Σ c_k e^{a_k x}` with exponents sorted ascending and
/// nonzero coefficients stored as `(sign, ln|c|)`.
#[derive(Debug, Clone)]
struct Realized {
    a: Vec<f64>,
    sign: Vec<f64>,
    logc: Vec<f64>,
}

impl Realized {
    fn new(exps: &[f64], coeffs: &[f64]) -> Self {
        let mut terms: Vec<(f64, f64)> = exps
            .iter()
            .zip(coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(a, c)| (*a, *c))
            .collect();
        terms.sort_by(|x, y| x.0.total_cmp(&y.0));
        Realized {
            a: terms.iter().map(|t| t.0).collect(),
            sign: terms.iter().map(|t| t.1.signum()).collect(),
            logc: terms.iter().map(|t| t.1.abs().ln()).collect(),
        }
    }

    /// `f(x)·e^{-M(x)}` with `M` the largest exponent of a term; same sign
    /// as `f(x)` and never overflows.
    fn normalized(&self, x: f64) -> f64 {
        let m = self
            .a
            .iter()
            .zip(&self.logc)
            .map(|(a, l)| a * x + l)
            .fold(f64::NEG_INFINITY, f64::max);
        self.a
            .iter()
            .zip(&self.logc)
            .zip(&self.sign)
            .map(|((a, l), s)| s * (a * x + l - m).exp())
            .sum()
    }

    /// `(e^{-a_0 x} f)'·e^{a_0 x}` as a sum over the remaining terms.
    fn derivative(&self) -> Realized {
        let a0 = self.a[0];
        Realized {
            a: self.a[1..].to_vec(),
            sign: self.sign[1..].to_vec(),
            logc: self.a[1..]
                .iter()
                .zip(&self.logc[1..])
                .map(|(a, l)| l + (a - a0).ln())
                .collect(),
        }
    }
}

fn bisect(f: &Realized, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f.normalized(lo);
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f.normalized(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Moves from `start` in direction `dir` until the sign reaches its limit.
fn bracket_end(f: &Realized, start: f64, dir: f64, limit_sign: f64) -> f64 {
    let mut step = 1.0;
    let mut x = start + dir * step;
    for _ in 0..1100 {
        if f.normalized(x) * limit_sign > 0.0 {
            return x;
        }
        step *= 2.0;
        x = start + dir * step;
        if !x.is_finite() {
            break;
        }
    }
    x
}

fn isolate(f: &Realized, tol: f64) -> Vec<f64> {
    if f.a.len() <= 1 {
        return Vec::new();
    }
    let crit = isolate(&f.derivative(), tol);
    let first = f.sign[0];
    let last = *f.sign.last().expect("non-empty");
    let anchor_lo = crit.first().copied().unwrap_or(0.0);
    let anchor_hi = crit.last().copied().unwrap_or(0.0);
    let mut knots = vec![bracket_end(f, anchor_lo, -1.0, first)];
    knots.extend(crit.iter().copied());
    knots.push(bracket_end(f, anchor_hi, 1.0, last));
    let mut roots: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (l, r) = (w[0], w[1]);
        let (fl, fr) = (f.normalized(l), f.normalized(r));
        let root = if fl == 0.0 {
            Some(l)
        } else if fr == 0.0 {
            Some(r)
        } else if (fl > 0.0) != (fr > 0.0) {
            Some(bisect(f, l, r, tol))
        } else {
            None
        };
        if let Some(x) = root {
            if roots
                .last()
                .is_none_or(|p| (x - p).abs() > tol * (1.0 + x.abs()))
            {
                roots.push(x);
            }
        }
    }
    roots
}

/// All real zeros of `Σ c_k e^{a_k x}` in increasing order.
pub fn isolate_zeros(exps: &[f64], coeffs: &[f64], tol: f64) -> Vec<f64> {
    isolate(&Realized::new(exps, coeffs), tol)
}

/// Zeros of the realized sum `Σ ξ_a α_a e^{a x}` on the configured interval,
/// from sign changes on the scan grid refined by bisection. A grid value
/// that is exactly zero is nudged by `refine_tol`.
pub fn sample_zero_count(e: &ExpSum, xi: &[f64], cfg: &McConfig) -> Result<usize> {
    require_univariate(e)?;
    cfg.validate()?;
    if xi.len() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            got: xi.len(),
        });
    }
    Ok(scan_roots(
        &realize(e, xi),
        cfg.interval,
        cfg.scan_points,
        cfg.refine_tol,
    )
    .len())
}

fn realize(e: &ExpSum, xi: &[f64]) -> Realized {
    let exps: Vec<f64> = e.support().points().map(|p| p[0]).collect();
    let c: Vec<f64> = xi.iter().zip(e.coeffs()).map(|(x, a)| x * a).collect();
    Realized::new(&exps, &c)
}

fn scan_roots(f: &Realized, (lo, hi): (f64, f64), n: usize, tol: f64) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let value = |x: f64| {
        let v = f.normalized(x);
        if v == 0.0 {
            f.normalized(x + tol * (1.0 + x.abs()))
        } else {
            v
        }
    };
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_x = lo;
    let mut prev = value(lo);
    for i in 1..n {
        let x = lo + i as f64 * h;
        let v = value(x);
        if (prev > 0.0) != (v > 0.0) && prev != 0.0 && v != 0.0 {
            let r = bisect(f, prev_x, x, tol);
            if roots
                .last()
                .is_none_or(|p| (r - p).abs() > tol * (1.0 + r.abs()))
            {
                roots.push(r);
            }
        }
        prev_x = x;
        prev = v;
    }
    roots
}

/// Sample mean of the zero count with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub interval: (f64, f64),
    /// Mean number of zeros per draw lying outside the configured interval
    /// (isolation) or between it and its doubling (scan).
    pub tail_mean: f64,
    /// Tail mass below a tenth of the standard error.
    pub tail_ok: bool,
    pub max_count: usize,
}

/// Estimates the expected number of real zeros from `n_samples` iid
/// standard-normal coefficient draws. Draws come from ChaCha8 substreams,
/// one per chunk of 1024 samples, so results do not depend on the worker
/// count.
pub fn estimate_esol(e: &ExpSum, cfg: &McConfig) -> Result<McEstimate> {
    require_univariate(e)?;
    cfg.validate()?;
    let (lo, hi) = cfg.interval;
    let half = 0.5 * (hi - lo);
    let wide = (lo - half, hi + half);
    let chunks = cfg.n_samples.div_ceil(CHUNK);
    let k = e.len();
    let partial: Vec<(f64, f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chunk as u64);
            let n = CHUNK.min(cfg.n_samples - chunk * CHUNK);
            let mut xi = vec![0.0; k];
            let (mut s, mut s2, mut tail, mut max) = (0.0, 0.0, 0.0, 0usize);
            for _ in 0..n {
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let f = realize(e, &xi);
                let (count, outside) = match cfg.counter {
                    ZeroCounter::Isolation => {
                        let r = isolate(&f, cfg.refine_tol);
                        let out = r.iter().filter(|x| **x < lo || **x > hi).count();
                        (r.len(), out)
                    }
                    ZeroCounter::Scan => {
                        let r = scan_roots(&f, wide, 2 * cfg.scan_points, cfg.refine_tol);
                        let out = r.iter().filter(|x| **x < lo || **x > hi).count();
                        (r.len(), out)
                    }
                };
                s += count as f64;
                s2 += (count * count) as f64;
                tail += outside as f64;
                max = max.max(count);
            }
            (s, s2, tail, max)
        })
        .collect();
    let n = cfg.n_samples as f64;
    let s: f64 = partial.iter().map(|p| p.0).sum();
    let s2: f64 = partial.iter().map(|p| p.1).sum();
    let tail: f64 = partial.iter().map(|p| p.2).sum();
    let max_count = partial.iter().map(|p| p.3).max().unwrap_or(0);
    let mean = s / n;
    let var = if cfg.n_samples > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let stderr = (var / n).sqrt();
    let tail_mean = tail / n;
    Ok(McEstimate {
        mean,
        stderr,
        samples: cfg.n_samples,
        interval: cfg.interval,
        tail_mean,
        tail_ok: tail_mean <= stderr / 10.0,
        max_count,
    })
}
