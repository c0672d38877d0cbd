//! Numbered verification suite.
//!
//! Each criterion draws from its own child stream of the run seed, so a
//! criterion's result does not depend on which others run alongside it, and
//! reports contain no timings or worker counts. Identical seeds give
//! byte-identical JSON.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::continuum::{
    a1_series_sample, green, laplace_area_origin, laplace_length_area, levy_khintchine_laplace,
    levy_mean, simulate_diffusion_endpoint, solve_feynman_kac, DiffusionMethod, DiffusionSpec,
    PdeGrid,
};
use crate::error::{Error, Result};
use crate::harness::{chi_square_gof, ks_statistic, Comparison, McConfig, Welford, DEFAULT_K_SIGMA};
use crate::offspring::OffspringDistribution;
use crate::processes::{generator_probe, sample_length_and_area, Polynomial};
use crate::quad;
use crate::rng::StreamSeed;
use crate::trees::{conditioned_prob, for_each_tree, gw_prob, sample_conditioned, FamilyForest};
use crate::triangulation::{ct_to_tree, tree_to_ct};
use crate::TOOL_VERSION;

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "tree/triangulation bijection"),
    (2, "conditioned sampler exactness"),
    (3, "length law at t = 100"),
    (4, "area law at t = 100"),
    (5, "gamma limit of k_t / t"),
    (6, "exact diffusion sampler"),
    (7, "Feynman-Kac PDE"),
    (8, "propagator identities"),
    (9, "spine chain moments and generator"),
    (10, "series and Levy representations of the area"),
    (11, "worker-count invariance"),
];

/// Which criteria to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite(pub Vec<u8>);

impl Suite {
    pub fn all() -> Self {
        Suite(CRITERIA.iter().map(|&(id, _)| id).collect())
    }
}

impl FromStr for Suite {
    type Err = Error;

    /// `all`, or a comma-separated list of criterion numbers.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Suite::all());
        }
        let mut ids = Vec::new();
        for part in s.split(',') {
            let id: u8 = part
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("unknown suite entry '{part}'")))?;
            if !CRITERIA.iter().any(|&(c, _)| c == id) {
                return Err(Error::InvalidArgument(format!("no criterion {id}")));
            }
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids.sort_unstable();
        Ok(Suite(ids))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Comparison>,
}

impl CriterionReport {
    fn new(id: u8, checks: Vec<Comparison>) -> Self {
        let name = CRITERIA
            .iter()
            .find(|&&(c, _)| c == id)
            .map(|&(_, n)| n)
            .unwrap_or("?");
        Self {
            id,
            name: name.to_string(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub tool_version: String,
    pub seed: u64,
    pub pass: bool,
    pub criteria: Vec<CriterionReport>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            let _ = writeln!(
                out,
                "[{}] criterion {:>2}: {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.id,
                c.name
            );
            for k in &c.checks {
                let _ = writeln!(
                    out,
                    "         {:<4} {:<48} est {:>12.6e} target {:>12.6e} dev {:>10.3e} tol {:>10.3e}",
                    if k.pass { "ok" } else { "FAIL" },
                    k.label,
                    k.estimate,
                    k.target,
                    k.deviation,
                    k.tolerance
                );
            }
        }
        let _ = writeln!(out, "overall: {}", if self.pass { "PASS" } else { "FAIL" });
        out
    }
}

/// Run the selected criteria with `workers` threads.
pub fn run_verify(suite: &Suite, seed: u64, workers: usize) -> Result<VerifyReport> {
    let root = StreamSeed::new(seed);
    let mut criteria = Vec::with_capacity(suite.0.len());
    let needs_chain = suite.0.iter().any(|&id| id == 3 || id == 4);
    let chain = if needs_chain {
        Some(chain_endpoints(&McConfig::new(root.child(3), workers)))
    } else {
        None
    };
    for &id in &suite.0 {
        let mc = McConfig::new(root.child(u64::from(id)), workers);
        let checks = match id {
            1 => bijection(),
            2 => conditioned_sampler(&mc),
            3 => length_law(chain.as_ref().unwrap()),
            4 => area_law(chain.as_ref().unwrap()),
            5 => gamma_limit(&mc)?,
            6 => diffusion_sampler(&mc)?,
            7 => pde()?,
            8 => propagator()?,
            9 => spine_chain(&mc)?,
            10 => area_representations(&mc)?,
            11 => worker_invariance(seed)?,
            _ => return Err(Error::InvalidArgument(format!("no criterion {id}"))),
        };
        criteria.push(CriterionReport::new(id, checks));
    }
    Ok(VerifyReport {
        tool_version: TOOL_VERSION.to_string(),
        seed,
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    })
}

fn all_generations_occupied(tree: &FamilyForest) -> bool {
    tree.generation_sizes().0.iter().all(|&z| z > 0)
}

fn bijection() -> Vec<Comparison> {
    let d = OffspringDistribution::geometric();
    let (mut count, mut forward, mut backward, mut restriction) = (0u64, true, true, true);
    for h in 1..=3 {
        for_each_tree(&d, h, 3, |tree, _| {
            if !all_generations_occupied(tree) {
                return;
            }
            count += 1;
            let Ok(ct) = tree_to_ct(tree) else {
                forward = false;
                return;
            };
            match ct_to_tree(&ct) {
                Ok(back) => {
                    forward &= back == *tree;
                    backward &= tree_to_ct(&back).as_ref() == Ok(&ct);
                }
                Err(_) => forward = false,
            }
            for g in 0..h {
                let lhs = tree.restrict(g + 1).and_then(|t| tree_to_ct(&t));
                let rhs = ct.truncate(g);
                restriction &= matches!((lhs, rhs), (Ok(a), Ok(b)) if a == b);
            }
        });
    }
    vec![
        Comparison::exact("trees with height <= 3, c_v <= 3", count as f64, count as f64, 0.0),
        Comparison::holds("ct_to_tree(tree_to_ct(t)) = t", forward),
        Comparison::holds("tree_to_ct(ct_to_tree(c)) = c", backward),
        Comparison::holds("restriction commutes with the encoding", restriction),
    ]
}

const SAMPLER_N: usize = 100_000;
const SAMPLER_C_MAX: u32 = 4;
const SPINE_MIN_EXPECTED: f64 = 5.0;

fn conditioned_sampler(mc: &McConfig) -> Vec<Comparison> {
    let d = OffspringDistribution::geometric();
    let h = 2;
    let samples = mc.collect(SAMPLER_N, |rng| {
        let f = sample_conditioned(&d, h, 1, rng);
        let v = f.spine().unwrap()[h];
        (f.without_spine(), v)
    });
    let mut tree_counts: HashMap<&FamilyForest, u64> = HashMap::new();
    let mut cell_counts: HashMap<(&FamilyForest, usize), u64> = HashMap::new();
    for (f, v) in &samples {
        if f.children().iter().flatten().all(|&c| c <= SAMPLER_C_MAX) {
            *tree_counts.entry(f).or_default() += 1;
            *cell_counts.entry((f, *v)).or_default() += 1;
        }
    }
    let n = SAMPLER_N as f64;
    let (mut tv, mut max_z, mut cells) = (0.0, 0.0f64, 0u64);
    let (mut observed, mut probs) = (Vec::new(), Vec::new());
    for_each_tree(&d, h, SAMPLER_C_MAX, |tree, _| {
        let z_h = *tree.generation_sizes().0.last().unwrap() as usize;
        if z_h == 0 {
            return;
        }
        let count = tree_counts.get(tree).copied().unwrap_or(0);
        let q = conditioned_prob(&d, tree);
        tv += (count as f64 / n - q).abs();
        observed.push(count);
        probs.push(q);
        // Each (tree, spine end) cell has probability P(r_h G = tree).
        let p = gw_prob(&d, tree);
        if n * p < SPINE_MIN_EXPECTED {
            return;
        }
        let se = (n * p * (1.0 - p)).sqrt();
        for v in 0..z_h {
            let c = cell_counts.get(&(tree, v)).copied().unwrap_or(0);
            max_z = max_z.max((c as f64 - n * p).abs() / se);
            cells += 1;
        }
    });
    // Everything outside the enumerated set forms one extra cell.
    observed.push(SAMPLER_N as u64 - observed.iter().sum::<u64>());
    probs.push(1.0 - probs.iter().sum::<f64>());
    let gof = chi_square_gof(&observed, &probs, 5.0);
    vec![
        Comparison::at_most("total variation over trees with c_v <= 4", 0.5 * tv, 0.01),
        Comparison::at_least("chi-square p-value of tree frequencies", gof.p_value, 1e-3),
        Comparison::at_most(
            &format!("max |z| over {cells} spine cells with expected count >= 5"),
            max_z,
            DEFAULT_K_SIGMA,
        ),
    ]
}

const CHAIN_T: u64 = 100;
const CHAIN_N: usize = 50_000;
const LAW_ABS_TOL: f64 = 0.015;

/// `(k_t / t, alpha_t / t^2)` at `t = 100` from `l = 0`.
fn chain_endpoints(mc: &McConfig) -> Vec<(f64, f64)> {
    let d = OffspringDistribution::geometric();
    mc.collect(CHAIN_N, |rng| sample_length_and_area(&d, CHAIN_T, 0.0, rng))
}

fn laplace_check(label: String, xs: impl Iterator<Item = f64>, param: f64, target: f64) -> Comparison {
    let acc: Welford = xs.map(|x| (-param * x).exp()).collect();
    Comparison::new(label, acc.mean(), Some(acc.stderr()), target, LAW_ABS_TOL, DEFAULT_K_SIGMA)
}

fn length_law(samples: &[(f64, f64)]) -> Vec<Comparison> {
    [0.5, 1.0, 2.0]
        .iter()
        .map(|&xi: &f64| {
            laplace_check(
                format!("E exp(-{xi} k_t/t)"),
                samples.iter().map(|s| s.0),
                xi,
                1.0 / (1.0 + xi).powi(2),
            )
        })
        .collect()
}

fn area_law(samples: &[(f64, f64)]) -> Vec<Comparison> {
    [0.5, 1.0]
        .iter()
        .map(|&lambda| {
            laplace_check(
                format!("E exp(-{lambda} alpha_t/t^2)"),
                samples.iter().map(|s| s.1),
                lambda,
                laplace_area_origin(lambda),
            )
        })
        .collect()
}

fn gamma_limit(mc: &McConfig) -> Result<Vec<Comparison>> {
    let d = OffspringDistribution::geometric();
    let xs = mc.collect(10_000, |rng| sample_length_and_area(&d, 200, 0.0, rng).0);
    let ks = ks_statistic(&xs, |x| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (1.0 + x) * (-x).exp()
        }
    })?;
    Ok(vec![Comparison::at_most(
        "KS distance of k_t/t (t = 200) to Gamma(2)",
        ks.statistic,
        0.02,
    )])
}

fn diffusion_sampler(mc: &McConfig) -> Result<Vec<Comparison>> {
    let n = 100_000;
    let from_one = DiffusionSpec::conditioned(1.0);
    let xs = mc.with_seed(mc.seed.child(0)).collect(n, |rng| {
        simulate_diffusion_endpoint(&from_one, 1.0, DiffusionMethod::Exact, rng).unwrap()
    });
    let lap: Welford = xs.iter().map(|l| (-l).exp()).collect();
    let target = laplace_length_area(1.0, 0.0, 1.0, 1.0)?;

    let from_zero = DiffusionSpec::conditioned(0.0);
    let ys = mc.with_seed(mc.seed.child(1)).collect(n, |rng| {
        simulate_diffusion_endpoint(&from_zero, 1.0, DiffusionMethod::Exact, rng).unwrap()
    });
    let acc: Welford = ys.iter().copied().collect();
    let m4 = ys.iter().map(|y| (y - acc.mean()).powi(4)).sum::<f64>() / n as f64;
    let var_se = ((m4 - acc.variance().powi(2)) / n as f64).sqrt();
    Ok(vec![
        Comparison::new("E exp(-L_1) from l0 = 1", lap.mean(), Some(lap.stderr()), target, 0.0, DEFAULT_K_SIGMA),
        Comparison::new("E L_1 from l0 = 0", acc.mean(), Some(acc.stderr()), 2.0, 0.0, DEFAULT_K_SIGMA),
        Comparison::new("Var L_1 from l0 = 0", acc.variance(), Some(var_se), 2.0, 0.0, DEFAULT_K_SIGMA),
    ])
}

fn pde() -> Result<Vec<Comparison>> {
    let (xi, lambda) = (1.0, 0.5);
    let field = solve_feynman_kac(xi, lambda, &PdeGrid::default(), 1.0)?;
    [0.0, 1.0, 2.0]
        .iter()
        .map(|&l| {
            let exact = laplace_length_area(xi, lambda, l, 1.0)?;
            Ok(Comparison::exact(
                format!("phi(l = {l}, tau = 1), relative tolerance 1e-3"),
                field.final_value(l),
                exact,
                1e-3 * exact,
            ))
        })
        .collect()
}

fn propagator() -> Result<Vec<Comparison>> {
    let tol = 1e-4;
    let quad_tol = 1e-12;
    let g0 = |l1: f64, l2: f64, tau: f64| green(l1, l2, tau, 0.0).unwrap_or(0.0);
    let mass = quad::integrate_to_infinity(|l2| g0(1.0, l2, 1.0), 0.0, quad_tol);
    let ck = quad::integrate_to_infinity(|l| g0(1.0, l, 0.5) * g0(l, 2.0, 0.5), 0.0, quad_tol);
    let mut checks = vec![
        Comparison::exact("normalisation of the lambda = 0 propagator", mass, 1.0, tol),
        Comparison::exact("Chapman-Kolmogorov at (1, 2, 0.5, 0.5)", ck, green(1.0, 2.0, 1.0, 0.0)?, tol),
    ];
    for &lambda in &[0.0, 0.5] {
        for &xi in &[0.5, 1.0, 2.0] {
            let lhs = quad::integrate_to_infinity(
                |l2| (-xi * l2).exp() * green(1.0, l2, 1.0, lambda).unwrap_or(0.0),
                0.0,
                quad_tol,
            );
            checks.push(Comparison::exact(
                format!("transform at xi = {xi}, lambda = {lambda}"),
                lhs,
                laplace_length_area(xi, lambda, 1.0, 1.0)?,
                tol,
            ));
        }
    }
    Ok(checks)
}

fn spine_chain(mc: &McConfig) -> Result<Vec<Comparison>> {
    let d = OffspringDistribution::geometric();
    let draws = mc
        .with_seed(mc.seed.child(0))
        .collect(1_000_000, |rng| d.sample_size_biased(rng) as f64);
    let first: Welford = draws.iter().copied().collect();
    let second: Welford = draws.iter().map(|x| x * x).collect();
    let (nu, mu) = (d.nu(), d.mu());
    let mut checks = vec![
        Comparison::new("E xi_0", first.mean(), Some(first.stderr()), 1.0 + 2.0 * nu, 0.0, DEFAULT_K_SIGMA),
        Comparison::new(
            "E xi_0^2",
            second.mean(),
            Some(second.stderr()),
            1.0 + 6.0 * nu + 2.0 * mu,
            0.0,
            DEFAULT_K_SIGMA,
        ),
    ];

    let g = Polynomial(vec![0.0, 0.0, 1.0]);
    let limit = 6.0;
    let mut previous: Option<(f64, f64, f64)> = None;
    for (i, &t) in [100u64, 1_000, 10_000].iter().enumerate() {
        let probes = mc.with_seed(mc.seed.child(1 + i as u64)).collect(20, |rng| {
            generator_probe(&d, &g, 1.0, t, 5_000, rng).unwrap()
        });
        // Twenty independent batches of 5000: combine means and errors.
        let mean = probes.iter().map(|p| p.0).sum::<f64>() / probes.len() as f64;
        let se = (probes.iter().map(|p| p.1 * p.1).sum::<f64>()).sqrt() / probes.len() as f64;
        // One-step moments give the exact finite-t mean 6 + 6/t.
        checks.push(Comparison::new(
            format!("generator probe at t = {t} vs 6 + 6/t"),
            mean,
            Some(se),
            limit + 6.0 / t as f64,
            0.0,
            DEFAULT_K_SIGMA,
        ));
        let dev = (mean - limit).abs();
        if let Some((_, prev_dev, prev_se)) = previous {
            checks.push(Comparison::at_most(
                format!("|probe - 6| at t = {t} within noise of the previous t"),
                dev - prev_dev,
                DEFAULT_K_SIGMA * (se * se + prev_se * prev_se).sqrt(),
            ));
        }
        previous = Some((mean, dev, se));
    }
    let (mean, _, se) = previous.unwrap();
    checks.push(Comparison::new(
        "generator probe at t = 10000 vs the limit 6",
        mean,
        Some(se),
        limit,
        0.01,
        DEFAULT_K_SIGMA,
    ));
    Ok(checks)
}

fn area_representations(mc: &McConfig) -> Result<Vec<Comparison>> {
    let terms = 1_000;
    let xs = mc.collect(100_000, |rng| a1_series_sample(terms, rng));
    let acc: Welford = xs.iter().copied().collect();
    let mut checks = vec![Comparison::within(
        "E A_1 from the series, 1000 terms",
        acc.mean(),
        Some(acc.stderr()),
        2.0,
        DEFAULT_K_SIGMA * acc.stderr() + 1e-3,
    )];
    checks.push(Comparison::exact("mean from the Levy density", levy_mean(), 2.0, 1e-4));
    for &lambda in &[0.5, 1.0] {
        checks.push(Comparison::exact(
            format!("Levy-Khintchine transform at lambda = {lambda}"),
            levy_khintchine_laplace(lambda)?,
            laplace_area_origin(lambda),
            1e-4,
        ));
    }
    Ok(checks)
}

/// Re-run the stochastic criteria 3, 4 and 6 with one and three workers.
fn worker_invariance(seed: u64) -> Result<Vec<Comparison>> {
    let suite = Suite(vec![3, 4, 6]);
    let one = run_verify(&suite, seed, 1)?.to_json();
    let three = run_verify(&suite, seed, 3)?.to_json();
    Ok(vec![Comparison::holds("reports identical for 1 and 3 workers", one == three)])
}
