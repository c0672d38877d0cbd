//! Monte Carlo machinery: deterministic parallel sampling, exponential-moment
//! estimates, goodness-of-fit statistics and convergence sweeps.
//!
//! Work is cut into fixed-size chunks. Chunk `i` draws from stream
//! `seed.child(i)` and results are concatenated in chunk order, so output is
//! identical for any worker count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::continuum::{simulate_diffusion_endpoint, DiffusionMethod, DiffusionSpec};
use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::processes::{initial_length, sample_chain};
use crate::rng::{SimRng, StreamSeed};
use crate::triangulation::area_from_lengths;

pub const DEFAULT_CHUNK: usize = 1024;
pub const DEFAULT_K_SIGMA: f64 = 4.0;

/// Streaming mean and variance (Welford); merges follow Chan et al.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Welford::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// How a Monte Carlo run is split and scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: StreamSeed,
    pub workers: usize,
    pub chunk: usize,
}

impl McConfig {
    pub fn new(seed: StreamSeed, workers: usize) -> Self {
        Self {
            seed,
            workers: workers.max(1),
            chunk: DEFAULT_CHUNK,
        }
    }

    pub fn with_seed(&self, seed: StreamSeed) -> Self {
        Self { seed, ..*self }
    }

    /// Draw `n` values; chunk `i` owns stream `seed.child(i)`.
    pub fn collect<T, F>(&self, n: usize, sampler: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut SimRng) -> T + Sync,
    {
        let chunk = self.chunk.max(1);
        let chunks = n.div_ceil(chunk);
        let run = |c: usize| -> Vec<T> {
            let mut rng = self.seed.child(c as u64).rng();
            let len = chunk.min(n - c * chunk);
            (0..len).map(|_| sampler(&mut rng)).collect()
        };
        let parts: Vec<Vec<T>> = if self.workers <= 1 {
            (0..chunks).map(run).collect()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .expect("thread pool")
                .install(|| (0..chunks).into_par_iter().map(run).collect())
        };
        parts.into_iter().flatten().collect()
    }
}

/// Monte Carlo estimate of `E exp(-param X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub parameter: f64,
    pub target: Option<f64>,
}

impl LaplaceEstimate {
    pub fn with_target(self, target: f64) -> Self {
        Self {
            target: Some(target),
            ..self
        }
    }
}

/// Sample mean of `exp(-param x)` over `samples`, with its standard error.
pub fn exponential_moment(samples: &[f64], param: f64) -> Result<LaplaceEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let acc: Welford = samples.iter().map(|x| (-param * x).exp()).collect();
    Ok(LaplaceEstimate {
        value: acc.mean(),
        stderr: acc.stderr(),
        n: acc.count(),
        parameter: param,
        target: None,
    })
}

/// A scalar path functional to feed the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    /// Degenerate sampler returning `value`.
    Constant { value: f64 },
    /// `k^(t)_tau` of the conditioned chain started from `max(1, round(nu t l))`.
    ChainLength { t: u64, l: f64, tau: f64 },
    /// `alpha^(t)_tau` of the same chain.
    ChainArea { t: u64, l: f64, tau: f64 },
    /// `L_tau` of the limiting diffusion.
    DiffusionLength {
        spec: DiffusionSpec,
        tau: f64,
        method: DiffusionMethod,
    },
}

impl Functional {
    /// The same functional at another chain scale `t`.
    pub fn at_scale(&self, t: u64) -> Self {
        match *self {
            Functional::ChainLength { l, tau, .. } => Functional::ChainLength { t, l, tau },
            Functional::ChainArea { l, tau, .. } => Functional::ChainArea { t, l, tau },
            other => other,
        }
    }

    pub fn sample(&self, d: &OffspringDistribution, rng: &mut SimRng) -> f64 {
        match *self {
            Functional::Constant { value } => value,
            Functional::ChainLength { t, l, tau } => {
                let steps = (t as f64 * tau).floor() as usize;
                let raw = sample_chain(d, initial_length(d, t, l), steps, rng);
                *raw.last().unwrap() as f64 / (d.nu() * t as f64)
            }
            Functional::ChainArea { t, l, tau } => {
                let steps = (t as f64 * tau).floor() as usize;
                let raw = sample_chain(d, initial_length(d, t, l), steps, rng);
                area_from_lengths(&raw) as f64 / (d.nu() * (t as f64).powi(2))
            }
            Functional::DiffusionLength { spec, tau, method } => {
                simulate_diffusion_endpoint(&spec, tau, method, rng)
                    .expect("functional parameters validated")
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Functional::ChainLength { t, l, tau } | Functional::ChainArea { t, l, tau } => {
                if t == 0 || !(tau >= 0.0) || !(l >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "chain functional needs t >= 1, tau >= 0, l >= 0 (t={t}, tau={tau}, l={l})"
                    )));
                }
            }
            Functional::DiffusionLength { spec, tau, method } => {
                spec.validate()?;
                method.validate()?;
                if !(tau >= 0.0) {
                    return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau}")));
                }
            }
            Functional::Constant { .. } => {}
        }
        Ok(())
    }
}

/// Estimate `E exp(-param F)` from `n` draws of the functional.
pub fn estimate_exponential_moment(
    d: &OffspringDistribution,
    functional: &Functional,
    param: f64,
    n: usize,
    mc: &McConfig,
) -> Result<LaplaceEstimate> {
    functional.validate()?;
    let samples = mc.collect(n, |rng| functional.sample(d, rng));
    exponential_moment(&samples, param)
}

/// Result of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided KS distance between the empirical law of `samples` and a
/// continuous `cdf`, with the asymptotic p-value.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    let p_value = kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic);
    Ok(KsResult {
        statistic,
        p_value,
        n: xs.len(),
    })
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Theta-function form, fast for small arguments.
        let y = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let s: f64 = (1..=6)
            .map(|k| ((2 * k - 1) as f64).powi(2) * y)
            .map(f64::exp)
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * x * x).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Pearson chi-square test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .expect("positive dof")
        .sf(statistic)
}

/// Goodness of fit of `counts` to cell probabilities `probs`; adjacent cells
/// are pooled left to right until each expected count reaches `min_expected`.
pub fn chi_square_gof(counts: &[u64], probs: &[f64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += p * n as f64;
        if exp >= min_expected {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    let statistic = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    }
}

/// Two-sample homogeneity test on binned counts; adjacent bins are pooled until
/// each holds at least `min_count` observations in total.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_count: f64) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ca += x as f64;
        cb += y as f64;
        if ca + cb >= min_count {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    let k1 = (nb as f64 / na as f64).sqrt();
    let k2 = (na as f64 / nb as f64).sqrt();
    let statistic = cells
        .iter()
        .map(|(x, y)| (k1 * x - k2 * y).powi(2) / (x + y))
        .sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    }
}

/// Total variation distance between two (sub-)probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|i| (p.get(i).unwrap_or(&0.0) - q.get(i).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// One estimate-versus-target comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub target: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Comparison {
    /// Pass iff `|estimate - target| <= max(abs_tol, k_sigma * stderr)`.
    pub fn new(
        label: impl Into<String>,
        estimate: f64,
        stderr: Option<f64>,
        target: f64,
        abs_tol: f64,
        k_sigma: f64,
    ) -> Self {
        let tolerance = abs_tol.max(k_sigma * stderr.unwrap_or(0.0));
        let deviation = (estimate - target).abs();
        Self {
            label: label.into(),
            estimate,
            stderr,
            target,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }

    /// Pass iff `|estimate - target| <= tolerance`.
    pub fn within(
        label: impl Into<String>,
        estimate: f64,
        stderr: Option<f64>,
        target: f64,
        tolerance: f64,
    ) -> Self {
        let deviation = (estimate - target).abs();
        Self {
            label: label.into(),
            estimate,
            stderr,
            target,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }

    /// Deterministic check: pass iff `|estimate - target| <= tol`.
    pub fn exact(label: impl Into<String>, estimate: f64, target: f64, tol: f64) -> Self {
        Self::new(label, estimate, None, target, tol, 0.0)
    }

    /// Upper bound check: pass iff `estimate <= bound`.
    pub fn at_most(label: impl Into<String>, estimate: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            estimate,
            stderr: None,
            target: bound,
            deviation: estimate,
            tolerance: bound,
            pass: estimate <= bound,
        }
    }

    /// Lower bound check: pass iff `estimate >= bound`.
    pub fn at_least(label: impl Into<String>, estimate: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            estimate,
            stderr: None,
            target: bound,
            deviation: estimate,
            tolerance: bound,
            pass: estimate >= bound,
        }
    }

    /// A boolean property reported as 1 (holds) or 0.
    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self {
            label: label.into(),
            estimate: v,
            stderr: None,
            target: 1.0,
            deviation: 1.0 - v,
            tolerance: 0.0,
            pass: ok,
        }
    }
}

/// One row of a sweep over the chain scale `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: u64,
    pub estimate: LaplaceEstimate,
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub functional: Functional,
    pub parameter: f64,
    pub target: Option<f64>,
    pub k_sigma: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn t_values(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// False iff some row has a failing comparison.
    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.comparison.as_ref().is_none_or(|c| c.pass))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6}",
            "t", "estimate", "stderr", "target", "deviation", "tolerance", "pass"
        );
        for r in &self.rows {
            let e = &r.estimate;
            match &r.comparison {
                Some(c) => {
                    let _ = writeln!(
                        out,
                        "{:>8} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>6}",
                        r.t, e.value, e.stderr, c.target, c.deviation, c.tolerance, c.pass
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{:>8} {:>12.6} {:>12.6} {:>12} {:>12} {:>12} {:>6}",
                        r.t, e.value, e.stderr, "-", "-", "-", "-"
                    );
                }
            }
        }
        out
    }
}

/// Default finite-`t` allowance for the unquantified `O(1/t)` bias.
pub fn default_abs_tol(t: u64) -> f64 {
    1.5 / t as f64
}

/// Estimate `E exp(-param F_t)` for every `t` in `t_list`, comparing against
/// `target` when one is given. Each `t` draws from its own child stream.
#[allow(clippy::too_many_arguments)]
pub fn convergence_sweep(
    d: &OffspringDistribution,
    t_list: &[u64],
    functional: &Functional,
    param: f64,
    target: Option<f64>,
    n_per_t: usize,
    mc: &McConfig,
    k_sigma: f64,
) -> Result<SweepReport> {
    if t_list.is_empty() {
        return Err(Error::InvalidArgument("empty t list".into()));
    }
    let rows = t_list
        .iter()
        .map(|&t| {
            let f = functional.at_scale(t);
            let est = estimate_exponential_moment(d, &f, param, n_per_t, &mc.with_seed(mc.seed.child(t)))?;
            let comparison = target.map(|target| {
                Comparison::new(
                    format!("t={t}"),
                    est.value,
                    Some(est.stderr),
                    target,
                    default_abs_tol(t),
                    k_sigma,
                )
            });
            Ok(SweepRow {
                t,
                estimate: LaplaceEstimate { target, ..est },
                comparison,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        functional: *functional,
        parameter: param,
        target,
        k_sigma,
        rows,
    })
}
