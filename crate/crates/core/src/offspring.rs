//! Critical offspring laws.
//!
//! An [`OffspringDistribution`] is either the closed-form geometric law
//! `p(n) = 2^-(n+1)` of the uniform infinite causal triangulation, or a finite
//! table. Both carry the factorial moments `nu = f''(1)/2` and
//! `mu = f'''(1)/2` of the generating function `f`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;
const CRITICALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Geometric,
    Table {
        pmf: Vec<f64>,
        cdf: Vec<f64>,
        size_biased_cdf: Vec<f64>,
    },
}

/// A critical offspring distribution with finite third factorial moment.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    law: Law,
    mean: f64,
    nu: f64,
    mu: f64,
}

impl OffspringDistribution {
    /// The geometric law `p(n) = 2^-(n+1)`; `nu = 1`, `mu = 3`.
    pub fn geometric() -> Self {
        Self {
            law: Law::Geometric,
            mean: 1.0,
            nu: 1.0,
            mu: 3.0,
        }
    }

    /// Build a law from a finite table `pmf[n] = p(n)`.
    ///
    /// Entries are renormalised to unit mass before the criticality check.
    pub fn from_pmf(pmf: &[f64]) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidDistribution("empty table".into()));
        }
        if let Some(bad) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "probabilities must be finite and non-negative, got {bad}"
            )));
        }
        let total: f64 = pmf.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("table has zero mass".into()));
        }
        let mut pmf: Vec<f64> = pmf.iter().map(|p| p / total).collect();
        while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
            pmf.pop();
        }

        let mean: f64 = pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        if (mean - 1.0).abs() > CRITICALITY_TOL {
            return Err(Error::NotCritical { mean });
        }
        if pmf.get(1).is_some_and(|p1| *p1 >= 1.0 - MASS_TOL) {
            return Err(Error::DegenerateOffspring);
        }

        let factorial = |k: usize| -> f64 {
            pmf.iter()
                .enumerate()
                .map(|(n, p)| {
                    let falling: f64 = (0..k).map(|j| n as f64 - j as f64).product();
                    falling * p
                })
                .sum()
        };
        let nu = factorial(2) / 2.0;
        let mu = factorial(3) / 2.0;

        let cdf = cumulative(pmf.iter().copied());
        let size_biased_cdf =
            cumulative(pmf.iter().enumerate().map(|(n, p)| n as f64 * p / mean));

        Ok(Self {
            law: Law::Table {
                pmf,
                cdf,
                size_biased_cdf,
            },
            mean,
            nu,
            mu,
        })
    }

    /// Build a law from `(n, p(n))` pairs.
    pub fn from_pairs(pairs: &BTreeMap<usize, f64>) -> Result<Self> {
        let len = pairs.keys().next_back().map_or(0, |n| n + 1);
        let mut pmf = vec![0.0; len];
        for (&n, &p) in pairs {
            pmf[n] = p;
        }
        Self::from_pmf(&pmf)
    }

    /// Parse the text format: one `n p(n)` pair per line, `#` starts a comment.
    pub fn parse_pmf_text(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(n), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `n p(n)`, got {line:?}"),
                });
            };
            let n: usize = n.parse().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad index {n:?}: {e}"),
            })?;
            let p: f64 = p.parse().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad probability {p:?}: {e}"),
            })?;
            if pairs.insert(n, p).is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate entry for n = {n}"),
                });
            }
        }
        Self::from_pairs(&pairs)
    }

    pub fn load_pmf_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::parse_pmf_text(&text)
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self.law, Law::Geometric)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `f''(1) / 2`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `f'''(1) / 2`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Largest `n` with `p(n) > 0`, or `None` for the unbounded geometric law.
    pub fn max_offspring(&self) -> Option<usize> {
        match &self.law {
            Law::Geometric => None,
            Law::Table { pmf, .. } => Some(pmf.len() - 1),
        }
    }

    pub fn pmf(&self, n: usize) -> f64 {
        match &self.law {
            Law::Geometric => 0.5f64.powi(n as i32 + 1),
            Law::Table { pmf, .. } => pmf.get(n).copied().unwrap_or(0.0),
        }
    }

    /// Size-biased law `p*(n) = n p(n) / mean`.
    pub fn size_biased_pmf(&self, n: usize) -> f64 {
        n as f64 * self.pmf(n) / self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.law {
            Law::Geometric => sample_geometric_half(rng),
            Law::Table { cdf, .. } => invert_cdf(cdf, rng),
        }
    }

    /// Draw from the size-biased law; never returns 0.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.law {
            // n 2^-(n+1) is 1 + NB(2, 1/2).
            Law::Geometric => 1 + sample_geometric_half(rng) + sample_geometric_half(rng),
            Law::Table {
                size_biased_cdf, ..
            } => invert_cdf(size_biased_cdf, rng).max(1),
        }
    }

    /// Sum of `count` i.i.d. offspring draws.
    ///
    /// For the geometric law the sum is negative binomial `NB(count, 1/2)` and
    /// is drawn in O(1) as a Gamma–Poisson mixture.
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        match &self.law {
            Law::Geometric => sample_negative_binomial_half(count, rng),
            Law::Table { .. } => self.sample_sum_direct(count, rng),
        }
    }

    /// Sum of `count` offspring draws, one individual at a time.
    pub fn sample_sum_direct<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        (0..count).map(|_| self.sample(rng)).sum()
    }

    /// `f(s) = sum_n p(n) s^n`.
    pub fn gf_eval(&self, s: f64) -> f64 {
        match &self.law {
            Law::Geometric => 1.0 / (2.0 - s),
            Law::Table { pmf, .. } => pmf.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// `t`-fold composition `f_t(s)`; `f_0(s) = s`.
    pub fn gf_iterate(&self, s: f64, t: u32) -> f64 {
        match &self.law {
            // f_t(s) = (t - (t-1)s) / (t + 1 - t s)
            Law::Geometric => {
                let t = f64::from(t);
                (t - (t - 1.0) * s) / (t + 1.0 - t * s)
            }
            Law::Table { .. } => (0..t).fold(s, |acc, _| self.gf_eval(acc)),
        }
    }

    /// Short label for report headers.
    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.law {
            Law::Geometric => write!(f, "geometric"),
            Law::Table { pmf, .. } => {
                write!(f, "table[")?;
                for (n, p) in pmf.iter().enumerate() {
                    if n > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "]")
            }
        }
    }
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Pin the last entry so inversion never runs off the table.
    if let Some(last) = cdf.last_mut() {
        *last = f64::INFINITY;
    }
    cdf
}

fn invert_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u) as u64
}

/// Geometric on {0, 1, ...} with P(X >= n) = 2^-n, read off the trailing
/// zero count of uniform random words.
pub(crate) fn sample_geometric_half<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    let mut total = 0u64;
    loop {
        let word: u64 = rng.random();
        if word != 0 {
            return total + u64::from(word.trailing_zeros());
        }
        total += 64;
    }
}

/// `NB(count, 1/2)`: number of failures before `count` successes.
pub(crate) fn sample_negative_binomial_half<R: Rng + ?Sized>(count: u64, rng: &mut R) -> u64 {
    if count == 0 {
        return 0;
    }
    let rate = Gamma::new(count as f64, 1.0)
        .expect("positive shape")
        .sample(rng);
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}
