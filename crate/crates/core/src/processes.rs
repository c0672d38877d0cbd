//! Boundary-length chain of the conditioned tree and its rescaled paths.
//!
//! Given `m` vertices in a generation, one of them is on the spine. The next
//! generation is the sum of `m - 1` ordinary offspring draws and one draw with
//! generating function `s f'(s)`, which is the size-biased law.

use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::triangulation::area_from_lengths;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Length,
    Area,
}

impl PathKind {
    fn name(self) -> &'static str {
        match self {
            PathKind::Length => "length",
            PathKind::Area => "area",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Values of a rescaled process at times `j / t`, `j = 0, 1, ...`.
///
/// Chain-derived paths keep the raw generation sizes so the area functional
/// can be formed from exact integer sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessPath {
    pub kind: PathKind,
    pub t_scale: u64,
    pub nu: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub raw: Option<Vec<u64>>,
}

impl ProcessPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Left-constant interpolation: the value at step `floor(t tau)`, or at the
    /// last grid time `<= tau` for continuum paths (`t_scale == 0`).
    pub fn at(&self, tau: f64) -> f64 {
        let j = if self.t_scale == 0 {
            self.times.partition_point(|&s| s <= tau).saturating_sub(1)
        } else {
            (tau * self.t_scale as f64).floor().max(0.0) as usize
        };
        self.values[j.min(self.values.len() - 1)]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    /// CSV dump with header `j,tau,k_raw,k_scaled,alpha_scaled`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let raw = self.raw.as_ref().ok_or(Error::KindMismatch {
            expected: "chain",
            found: "continuum",
        })?;
        let area = area_path_from_length(self)?;
        let io = |e: std::io::Error| Error::InvalidArgument(format!("write failed: {e}"));
        writeln!(out, "j,tau,k_raw,k_scaled,alpha_scaled").map_err(io)?;
        for j in 0..self.len() {
            writeln!(
                out,
                "{j},{},{},{},{}",
                self.times[j], raw[j], self.values[j], area.values[j]
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// One step of the conditioned generation-size chain from `m >= 1`.
pub fn chain_step<R: Rng + ?Sized>(d: &OffspringDistribution, m: u64, rng: &mut R) -> u64 {
    assert!(m >= 1, "the conditioned chain never leaves {{1, 2, ...}}");
    d.sample_sum(m - 1, rng) + d.sample_size_biased(rng)
}

/// `chain_step` with the ordinary draws summed one individual at a time.
pub fn chain_step_direct<R: Rng + ?Sized>(d: &OffspringDistribution, m: u64, rng: &mut R) -> u64 {
    assert!(m >= 1, "the conditioned chain never leaves {{1, 2, ...}}");
    d.sample_sum_direct(m - 1, rng) + d.sample_size_biased(rng)
}

/// Initial boundary `max(1, round(nu t l))`.
pub fn initial_length(d: &OffspringDistribution, t: u64, l: f64) -> u64 {
    ((d.nu() * t as f64 * l).round() as u64).max(1)
}

/// Raw chain values `k_0, ..., k_n` for `n = floor(t tau_max)` steps.
pub fn sample_chain<R: Rng + ?Sized>(
    d: &OffspringDistribution,
    m0: u64,
    steps: usize,
    rng: &mut R,
) -> Vec<u64> {
    let mut k = Vec::with_capacity(steps + 1);
    let mut m = m0;
    k.push(m);
    for _ in 0..steps {
        m = chain_step(d, m, rng);
        k.push(m);
    }
    k
}

/// Rescaled length path `k_{[t tau]} / (nu t)` on `[0, tau_max]`.
pub fn sample_length_path<R: Rng + ?Sized>(
    d: &OffspringDistribution,
    t: u64,
    l: f64,
    tau_max: f64,
    rng: &mut R,
) -> Result<ProcessPath> {
    if t == 0 {
        return Err(Error::InvalidArgument("time scale t must be >= 1".into()));
    }
    if !(tau_max > 0.0) || !(l >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need tau_max > 0 and l >= 0, got tau_max = {tau_max}, l = {l}"
        )));
    }
    let steps = (t as f64 * tau_max).floor() as usize;
    let raw = sample_chain(d, initial_length(d, t, l), steps, rng);
    let scale = d.nu() * t as f64;
    Ok(ProcessPath {
        kind: PathKind::Length,
        t_scale: t,
        nu: d.nu(),
        times: (0..=steps).map(|j| j as f64 / t as f64).collect(),
        values: raw.iter().map(|&k| k as f64 / scale).collect(),
        raw: Some(raw),
    })
}

/// Rescaled area path `alpha_j / (nu t^2)` with
/// `alpha_j = k_0 + 2(k_1 + ... + k_{j-1}) + k_j` and `alpha_0 = 0`.
pub fn area_path_from_length(path: &ProcessPath) -> Result<ProcessPath> {
    if path.kind != PathKind::Length {
        return Err(Error::KindMismatch {
            expected: "length",
            found: path.kind.name(),
        });
    }
    let raw = path.raw.as_ref().ok_or(Error::KindMismatch {
        expected: "chain",
        found: "continuum",
    })?;
    let scale = path.nu * (path.t_scale as f64).powi(2);
    let mut values = Vec::with_capacity(raw.len());
    values.push(0.0);
    // Running sum of k_0 + 2(k_1 + ... + k_{j-1}).
    let mut inner = 0u64;
    for j in 1..raw.len() {
        inner += if j == 1 { raw[0] } else { 2 * raw[j - 1] };
        values.push((inner + raw[j]) as f64 / scale);
    }
    Ok(ProcessPath {
        kind: PathKind::Area,
        t_scale: path.t_scale,
        nu: path.nu,
        times: path.times.clone(),
        values,
        raw: None,
    })
}

/// `k_t / (nu t)` and `alpha_t / (nu t^2)` at `tau = 1` for one chain run.
pub fn sample_length_and_area<R: Rng + ?Sized>(
    d: &OffspringDistribution,
    t: u64,
    l: f64,
    rng: &mut R,
) -> (f64, f64) {
    let raw = sample_chain(d, initial_length(d, t, l), t as usize, rng);
    let tf = t as f64;
    (
        *raw.last().unwrap() as f64 / (d.nu() * tf),
        area_from_lengths(&raw) as f64 / (d.nu() * tf * tf),
    )
}

/// A smooth test function with its first two derivatives.
pub trait TestFunction {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;
}

/// `sum_i coeffs[i] x^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl TestFunction for Polynomial {
    fn value(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * x + (i * (i - 1)) as f64 * c)
    }
}

/// Limiting generator `A g(x) = 2 nu g'(x) + nu x g''(x)` of the chain on the
/// `1/t` grid.
pub fn generator_limit(d: &OffspringDistribution, g: &impl TestFunction, x: f64) -> f64 {
    d.nu() * (2.0 * g.derivative(x) + x * g.second_derivative(x))
}

/// Monte Carlo estimate of `t (E g(k'/t) - g(x))` with `k'` one chain step
/// from `m = round(t x)`, and its standard error.
///
/// The linear part `g'(x) (k' - m) / t` has known mean `2 nu / t` and is
/// subtracted from every sample as a control variate.
pub fn generator_probe<R: Rng + ?Sized>(
    d: &OffspringDistribution,
    g: &impl TestFunction,
    x: f64,
    t: u64,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let m = (t as f64 * x).round() as u64;
    if m == 0 {
        return Err(Error::InvalidArgument(format!(
            "round(t x) must be >= 1, got t = {t}, x = {x}"
        )));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let tf = t as f64;
    let x = m as f64 / tf;
    let (g0, g1) = (g.value(x), g.derivative(x));
    let mut acc = crate::harness::Welford::default();
    for _ in 0..n_samples {
        let y = chain_step(d, m, rng) as f64 / tf;
        acc.push(tf * (g.value(y) - g0 - g1 * (y - x)));
    }
    Ok((acc.mean() + 2.0 * d.nu() * g1, acc.stderr()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::chi_square_two_sample;
    use crate::rng::rng_from_seed;
    use crate::trees::sample_conditioned;

    fn geo() -> OffspringDistribution {
        OffspringDistribution::geometric()
    }

    #[test]
    fn chain_from_one_is_size_biased() {
        let mut rng = rng_from_seed(31);
        let n = 200_000;
        let ones = (0..n).filter(|_| chain_step(&geo(), 1, &mut rng) == 1).count();
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - 0.25).abs() < 4.0 * se);
    }

    #[test]
    fn chain_from_two() {
        let mut rng = rng_from_seed(32);
        let n = 400_000;
        let ones = (0..n).filter(|_| chain_step(&geo(), 2, &mut rng) == 1).count();
        let p = 0.125;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn chain_mean_drift() {
        let binary = OffspringDistribution::from_pmf(&[0.5, 0.0, 0.5]).unwrap();
        for d in [geo(), binary] {
            for m in [1u64, 3, 40] {
                let mut rng = rng_from_seed(33 + m);
                let n = 100_000;
                let mut acc = crate::harness::Welford::default();
                for _ in 0..n {
                    let k = chain_step(&d, m, &mut rng);
                    assert!(k >= 1);
                    acc.push(k as f64);
                }
                let want = m as f64 + 2.0 * d.nu();
                // From m = 1 the binary chain is deterministic.
                assert!((acc.mean() - want).abs() <= 4.0 * acc.stderr() + 1e-12, "{d} m={m}");
            }
        }
    }

    #[test]
    fn fast_path_matches_direct_sum() {
        let d = geo();
        let n = 100_000;
        let bins = 40;
        let hist = |direct: bool, seed| {
            let mut rng = rng_from_seed(seed);
            let mut h = vec![0u64; bins + 1];
            for _ in 0..n {
                let k = if direct {
                    chain_step_direct(&d, 5, &mut rng)
                } else {
                    chain_step(&d, 5, &mut rng)
                } as usize;
                h[k.min(bins)] += 1;
            }
            h
        };
        let test = chi_square_two_sample(&hist(false, 34), &hist(true, 35), 5.0);
        assert!(test.p_value > 1e-3, "{test:?}");
    }

    #[test]
    fn chain_agrees_with_tree_sampler() {
        let d = geo();
        let n = 100_000;
        let mut rng = rng_from_seed(36);
        let mut tree = vec![0u64; 12];
        let mut chain = vec![0u64; 12];
        for _ in 0..n {
            let z = *sample_conditioned(&d, 3, 1, &mut rng).generation_sizes().0.last().unwrap();
            tree[(z as usize).min(11)] += 1;
            let k = *sample_chain(&d, 1, 3, &mut rng).last().unwrap();
            chain[(k as usize).min(11)] += 1;
        }
        let test = chi_square_two_sample(&tree, &chain, 5.0);
        assert!(test.p_value > 1e-3, "{test:?}");
    }

    #[test]
    fn length_path_start() {
        let mut rng = rng_from_seed(37);
        let p = sample_length_path(&geo(), 100, 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(p.values[0], 1.0);
        assert_eq!(p.len(), 101);
        assert_eq!(p.times[100], 1.0);
        let p = sample_length_path(&geo(), 100, 0.0, 0.5, &mut rng).unwrap();
        assert_eq!(p.raw.as_ref().unwrap()[0], 1);
        assert_eq!(p.values[0], 0.01);
        assert!(p.values.iter().all(|&v| v > 0.0));
        assert!(p.times.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_length_path(&geo(), 0, 0.0, 1.0, &mut rng).is_err());
        assert!(sample_length_path(&geo(), 10, 0.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn length_path_mean_drift() {
        // E k_j = m0 + 2 nu j exactly.
        let d = geo();
        let t = 50;
        let mut rng = rng_from_seed(38);
        let mut acc = crate::harness::Welford::default();
        for _ in 0..40_000 {
            acc.push(sample_length_path(&d, t, 1.0, 1.0, &mut rng).unwrap().last());
        }
        assert!((acc.mean() - 3.0).abs() < 4.0 * acc.stderr(), "{}", acc.mean());
    }

    #[test]
    fn area_path() {
        let path = ProcessPath {
            kind: PathKind::Length,
            t_scale: 1,
            nu: 1.0,
            times: vec![0.0, 1.0, 2.0],
            values: vec![2.0, 3.0, 1.0],
            raw: Some(vec![2, 3, 1]),
        };
        let area = area_path_from_length(&path).unwrap();
        assert_eq!(area.values, vec![0.0, 5.0, 9.0]);
        assert!(matches!(
            area_path_from_length(&area),
            Err(Error::KindMismatch { .. })
        ));

        let mut rng = rng_from_seed(39);
        for _ in 0..100 {
            let p = sample_length_path(&geo(), 30, 0.5, 2.0, &mut rng).unwrap();
            let a = area_path_from_length(&p).unwrap();
            assert!(a.values.windows(2).all(|w| w[0] <= w[1]));
            let (k, alpha) = {
                let raw = p.raw.as_ref().unwrap();
                (raw[30], area_from_lengths(&raw[..=30]))
            };
            assert_eq!(a.at(1.0), alpha as f64 / 900.0);
            assert_eq!(p.at(1.0), k as f64 / 30.0);
        }
    }

    #[test]
    fn csv_dump() {
        let mut rng = rng_from_seed(40);
        let p = sample_length_path(&geo(), 4, 0.0, 0.5, &mut rng).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("j,tau,k_raw,k_scaled,alpha_scaled"));
        assert_eq!(lines.next(), Some("0,0,1,0.25,0"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn polynomial_derivatives() {
        let g = Polynomial(vec![1.0, -2.0, 0.0, 3.0]);
        assert_eq!(g.value(2.0), 1.0 - 4.0 + 24.0);
        assert_eq!(g.derivative(2.0), -2.0 + 9.0 * 4.0);
        assert_eq!(g.second_derivative(2.0), 18.0 * 2.0);
    }

    #[test]
    fn generator_probe_exact_cases() {
        let d = geo();
        let mut rng = rng_from_seed(41);
        let (c, se) = generator_probe(&d, &Polynomial(vec![5.0]), 1.0, 100, 100, &mut rng).unwrap();
        assert_eq!((c, se), (0.0, 0.0));
        let (lin, se) =
            generator_probe(&d, &Polynomial(vec![0.0, 1.0]), 1.0, 100, 100, &mut rng).unwrap();
        assert_eq!((lin, se), (2.0, 0.0));
        assert!(generator_probe(&d, &Polynomial(vec![0.0, 1.0]), 0.001, 100, 10, &mut rng).is_err());
    }

    #[test]
    fn generator_probe_quadratic() {
        // For g = x^2 at x = 1 the probe has exact mean 6 + 6/t (one-step
        // mean m + 2 and variance 2(m - 1) + 4 for the geometric law).
        let d = geo();
        let g = Polynomial(vec![0.0, 0.0, 1.0]);
        assert_eq!(generator_limit(&d, &g, 1.0), 6.0);
        for t in [10u64, 100, 1000] {
            let mut rng = rng_from_seed(42 + t);
            let (est, se) = generator_probe(&d, &g, 1.0, t, 100_000, &mut rng).unwrap();
            let exact = 6.0 + 6.0 / t as f64;
            assert!((est - exact).abs() < 4.0 * se, "t={t}: {est} vs {exact}");
        }
    }
}
