//! One function per subcommand. Each resolves its settings, runs, writes the
//! artifact and reports whether every comparison passed.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uict_core::continuum::{green as propagator, laplace_length_area, simulate_diffusion, solve_feynman_kac};
use uict_core::harness::{
    convergence_sweep, default_abs_tol, estimate_exponential_moment, Functional, McConfig, DEFAULT_K_SIGMA,
};
use uict_core::processes::{area_path_from_length, sample_length_path};
use uict_core::trees::{sample_conditioned, sample_gw};
use uict_core::triangulation::tree_to_ct;
use uict_core::verify::{run_verify, Suite};
use uict_core::{
    Comparison, DiffusionMethod, DiffusionSpec, FamilyForest, OffspringDistribution, PdeGrid, Scheme, StreamSeed,
};

use crate::config::Layer;
use crate::output::{Format, Header, Sink};
use crate::{
    CliError, EstimateArgs, GreenArgs, IoArgs, PdeArgs, SampleCtArgs, SamplePathArgs, SampleTreeArgs, SweepArgs,
    VerifyArgs,
};

type Outcome = Result<bool, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Process {
    Chain,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FunctionalKind {
    Length,
    Area,
    Diffusion,
}

/// Parse a flag value with the same rules as the config file.
fn choice<T: DeserializeOwned>(key: &str, raw: Option<String>) -> Result<Option<T>, CliError> {
    raw.map(|s| {
        serde_json::from_value(Value::String(s.clone()))
            .map_err(|_| CliError::Usage(format!("invalid value {s:?} for --{key}")))
    })
    .transpose()
}

fn offspring(layer: &mut Layer, flag: Option<String>) -> Result<OffspringDistribution, CliError> {
    let spec = layer.get("offspring", flag, "geometric".to_owned())?;
    if spec == "geometric" {
        Ok(OffspringDistribution::geometric())
    } else {
        Ok(OffspringDistribution::load_pmf_file(Path::new(&spec))?)
    }
}

/// Explicit seed, else a fresh random one that is announced on stderr.
fn seed(layer: &mut Layer, flag: Option<u64>) -> Result<u64, CliError> {
    Ok(match layer.unrecorded("seed", flag)? {
        Some(s) => s,
        None => {
            let s = rand::random();
            eprintln!("uict: seed {s}");
            s
        }
    })
}

fn format(layer: &mut Layer, io: &IoArgs, default: Format, allowed: &[Format]) -> Result<Format, CliError> {
    let f = layer.get("format", io.format, default)?;
    if !allowed.contains(&f) {
        return Err(CliError::Usage(format!("--format {} is not available here", f.name())));
    }
    Ok(f)
}

fn sink(layer: &mut Layer, io: &IoArgs) -> Result<Sink, CliError> {
    Ok(Sink(layer.unrecorded("out", io.out.clone())?))
}

fn mc(layer: &mut Layer, seed: u64, flag: Option<usize>) -> Result<McConfig, CliError> {
    let workers = layer.unrecorded("workers", flag)?.unwrap_or(1);
    Ok(McConfig::new(StreamSeed::new(seed), workers))
}

fn positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{name} must be >= 1")));
    }
    Ok(())
}

fn forest_json(f: &FamilyForest) -> Value {
    json!({
        "roots": f.roots(),
        "generation_sizes": f.generation_sizes().sizes(),
        "children": f.children(),
        "spine": f.spine(),
    })
}

pub fn sample_tree(a: SampleTreeArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let d = offspring(&mut layer, a.offspring)?;
    let h = layer.get("h", a.h, 3usize)?;
    let unconditioned = layer.get("unconditioned", a.unconditioned.then_some(true), false)?;
    let m0 = if unconditioned {
        layer.forbid("m0", a.m0.is_some(), "to unconditioned (single-root) samples")?;
        1
    } else {
        layer.get("m0", a.m0, 1usize)?
    };
    let n = layer.get("n", a.n, 1usize)?;
    let fmt = format(&mut layer, &a.io, Format::Text, &[Format::Text, Format::Json])?;
    let seed = seed(&mut layer, a.seed)?;
    let mc = mc(&mut layer, seed, a.workers)?;
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("sample-tree", Some(seed), layer.finish()?);
    positive("m0", m0)?;
    positive("n", n)?;

    let trees = mc.collect(n, |rng| {
        if unconditioned {
            sample_gw(&d, h, rng)
        } else {
            sample_conditioned(&d, h, m0, rng)
        }
    });
    let text = match fmt {
        Format::Json => header.wrap_json(json!({ "trees": trees.iter().map(forest_json).collect::<Vec<_>>() })),
        _ => {
            let mut s = header.comment_lines();
            for (i, t) in trees.iter().enumerate() {
                let _ = writeln!(s, "# tree {i}");
                s.push_str(&t.to_text());
            }
            s
        }
    };
    sink.emit(&text)?;
    Ok(true)
}

pub fn sample_ct(a: SampleCtArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let d = offspring(&mut layer, a.offspring)?;
    let h = layer.get("h", a.h, 3usize)?;
    let n = layer.get("n", a.n, 1usize)?;
    let fmt = format(&mut layer, &a.io, Format::Json, &[Format::Json, Format::Csv])?;
    let seed = seed(&mut layer, a.seed)?;
    let mc = mc(&mut layer, seed, a.workers)?;
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("sample-ct", Some(seed), layer.finish()?);
    positive("n", n)?;

    // A triangulation with h slices above slice 0 encodes a tree of height h + 1.
    let cts = mc
        .collect(n, |rng| tree_to_ct(&sample_conditioned(&d, h + 1, 1, rng)))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let text = match fmt {
        Format::Csv => {
            let mut s = header.comment_lines();
            s.push_str("sample,slice,length,degrees\n");
            for (i, ct) in cts.iter().enumerate() {
                for (g, k) in ct.slices.iter().enumerate() {
                    let degrees = ct.degrees.get(g).map_or(String::new(), |seq| {
                        seq.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
                    });
                    let _ = writeln!(s, "{i},{g},{k},{degrees}");
                }
            }
            s
        }
        _ => {
            let items = cts
                .iter()
                .map(|ct| {
                    let triangles = ct.area(ct.height())?;
                    Ok(json!({ "triangulation": ct, "triangles": triangles }))
                })
                .collect::<Result<Vec<_>, uict_core::Error>>()?;
            header.wrap_json(json!({ "samples": items }))
        }
    };
    sink.emit(&text)?;
    Ok(true)
}

pub fn sample_path(a: SamplePathArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let process = layer.get("process", choice("process", a.process)?, Process::Chain)?;
    let d = match process {
        Process::Chain => Some(offspring(&mut layer, a.offspring)?),
        Process::Diffusion => {
            layer.forbid("offspring", a.offspring.is_some(), "to the diffusion")?;
            None
        }
    };
    let t = layer.get("t", a.t, 100u64)?;
    let l = layer.get("l", a.l, 0.0f64)?;
    let tau_max = layer.get("tau-max", a.tau_max, 1.0f64)?;
    let fmt = format(&mut layer, &a.io, Format::Csv, &[Format::Csv, Format::Json])?;
    let seed = seed(&mut layer, a.seed)?;
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("sample-path", Some(seed), layer.finish()?);
    if t == 0 {
        return Err(CliError::Usage("--t must be >= 1".into()));
    }
    if !(tau_max >= 0.0) {
        return Err(CliError::Usage("--tau-max must be >= 0".into()));
    }

    let mut rng = StreamSeed::new(seed).rng();
    let text = match d {
        Some(d) => {
            let path = sample_length_path(&d, t, l, tau_max, &mut rng)?;
            match fmt {
                Format::Json => {
                    let area = area_path_from_length(&path)?;
                    header.wrap_json(json!({ "length": path, "area": area }))
                }
                _ => {
                    let mut buf = header.comment_lines().into_bytes();
                    path.write_csv(&mut buf)?;
                    String::from_utf8(buf).expect("csv is ascii")
                }
            }
        }
        None => {
            let steps = (t as f64 * tau_max).floor() as u64;
            let grid: Vec<f64> = (0..=steps).map(|j| j as f64 / t as f64).collect();
            let path = simulate_diffusion(&DiffusionSpec::conditioned(l), &grid, DiffusionMethod::Exact, &mut rng)?;
            match fmt {
                Format::Json => header.wrap_json(json!({ "length": path })),
                _ => {
                    let mut s = header.comment_lines();
                    s.push_str("j,tau,l\n");
                    for (j, (tau, v)) in path.times.iter().zip(&path.values).enumerate() {
                        let _ = writeln!(s, "{j},{tau},{v}");
                    }
                    s
                }
            }
        }
    };
    sink.emit(&text)?;
    Ok(true)
}

/// The sampled functional, its Laplace parameter and the closed-form target.
struct Setup {
    functional: Functional,
    param: f64,
    target: f64,
}

fn setup(
    layer: &mut Layer,
    kind: FunctionalKind,
    l: f64,
    tau: f64,
    xi: Option<f64>,
    lambda: Option<f64>,
    t: u64,
) -> Result<Setup, CliError> {
    match kind {
        FunctionalKind::Length | FunctionalKind::Diffusion => {
            layer.forbid("lambda", lambda.is_some(), "to length functionals")?;
            let xi = layer.get("xi", xi, 1.0f64)?;
            let functional = if kind == FunctionalKind::Length {
                Functional::ChainLength { t, l, tau }
            } else {
                Functional::DiffusionLength {
                    spec: DiffusionSpec::conditioned(l),
                    tau,
                    method: DiffusionMethod::Exact,
                }
            };
            Ok(Setup {
                functional,
                param: xi,
                target: laplace_length_area(xi, 0.0, l, tau)?,
            })
        }
        FunctionalKind::Area => {
            layer.forbid("xi", xi.is_some(), "to the area functional")?;
            let lambda = layer.get("lambda", lambda, 0.5f64)?;
            // E exp(-lambda alpha_tau) is the transform with killing rate 2 lambda L.
            Ok(Setup {
                functional: Functional::ChainArea { t, l, tau },
                param: lambda,
                target: laplace_length_area(0.0, lambda, l, tau)?,
            })
        }
    }
}

pub fn estimate(a: EstimateArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let kind = layer.get("functional", choice("functional", a.functional)?, FunctionalKind::Length)?;
    let (d, t) = if kind == FunctionalKind::Diffusion {
        layer.forbid("offspring", a.offspring.is_some(), "to the diffusion")?;
        layer.forbid("t", a.t.is_some(), "to the diffusion")?;
        (OffspringDistribution::geometric(), 0)
    } else {
        (offspring(&mut layer, a.offspring)?, layer.get("t", a.t, 100u64)?)
    };
    let l = layer.get("l", a.l, 0.0f64)?;
    let tau = layer.get("tau", a.tau, 1.0f64)?;
    let s = setup(&mut layer, kind, l, tau, a.xi, a.lambda, t)?;
    let n = layer.get("n", a.n, 10_000usize)?;
    let k_sigma = layer.get("k-sigma", a.k_sigma, DEFAULT_K_SIGMA)?;
    let fmt = format(&mut layer, &a.io, Format::Text, &[Format::Text, Format::Json, Format::Csv])?;
    let seed = seed(&mut layer, a.seed)?;
    let mc = mc(&mut layer, seed, a.workers)?;
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("estimate", Some(seed), layer.finish()?);

    let est = estimate_exponential_moment(&d, &s.functional, s.param, n, &mc)?.with_target(s.target);
    // The diffusion is sampled exactly, so only the statistical error is allowed.
    let abs_tol = if t == 0 { 0.0 } else { default_abs_tol(t) };
    let cmp = Comparison::new("closed form", est.value, Some(est.stderr), s.target, abs_tol, k_sigma);
    let text = match fmt {
        Format::Json => header.wrap_json(json!({ "functional": s.functional, "estimate": est, "comparison": cmp })),
        Format::Csv => {
            let mut s = header.comment_lines();
            s.push_str("parameter,n,estimate,stderr,target,deviation,tolerance,pass\n");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                est.parameter, est.n, est.value, est.stderr, cmp.target, cmp.deviation, cmp.tolerance, cmp.pass
            );
            s
        }
        Format::Text => {
            let mut s = header.comment_lines();
            let _ = writeln!(
                s,
                "{:>12} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>6}",
                "parameter", "n", "estimate", "stderr", "target", "deviation", "tolerance", "pass"
            );
            let _ = writeln!(
                s,
                "{:>12} {:>10} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>6}",
                est.parameter, est.n, est.value, est.stderr, cmp.target, cmp.deviation, cmp.tolerance, cmp.pass
            );
            s
        }
    };
    sink.emit(&text)?;
    Ok(cmp.pass)
}

pub fn verify(a: VerifyArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let suite_text = layer.get("suite", a.suite, "all".to_owned())?;
    let suite: Suite = suite_text.parse()?;
    let fmt = format(&mut layer, &a.io, Format::Text, &[Format::Text, Format::Json])?;
    let seed = seed(&mut layer, a.seed)?;
    let workers = layer.unrecorded("workers", a.workers)?.unwrap_or(1);
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("verify", Some(seed), layer.finish()?);

    let report = run_verify(&suite, seed, workers)?;
    let text = match fmt {
        Format::Json => header.wrap_json(json!({ "report": report })),
        _ => header.comment_lines() + &report.to_text(),
    };
    sink.emit(&text)?;
    Ok(report.pass)
}

pub fn green(a: GreenArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let l1 = layer.require("l1", a.l1)?;
    let l2 = layer.require("l2", a.l2)?;
    let tau = layer.get("tau", a.tau, 1.0f64)?;
    let lambda = layer.get("lambda", a.lambda, 0.0f64)?;
    let fmt = format(&mut layer, &a.io, Format::Text, &[Format::Text, Format::Json, Format::Csv])?;
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("green", None, layer.finish()?);

    let value = propagator(l1, l2, tau, lambda)?;
    if !value.is_finite() {
        return Err(CliError::Failure(anyhow::anyhow!("propagator evaluated to {value}")));
    }
    let text = match fmt {
        Format::Json => header.wrap_json(json!({ "value": value })),
        Format::Csv => header.comment_lines() + &format!("l1,l2,tau,lambda,phi\n{l1},{l2},{tau},{lambda},{value}\n"),
        Format::Text => header.comment_lines() + &format!("{value}\n"),
    };
    sink.emit(&text)?;
    Ok(true)
}

pub fn pde(a: PdeArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let xi = layer.get("xi", a.xi, 1.0f64)?;
    let lambda = layer.get("lambda", a.lambda, 0.5f64)?;
    let tau_max = layer.get("tau-max", a.tau_max, 1.0f64)?;
    let default = PdeGrid::default();
    let grid = PdeGrid {
        l_max: layer.get("l-max", a.l_max, default.l_max)?,
        n_l: layer.get("n-l", a.n_l, default.n_l)?,
        n_tau: layer.get("n-tau", a.n_tau, default.n_tau)?,
        scheme: layer.get("scheme", choice::<Scheme>("scheme", a.scheme)?, default.scheme)?,
    };
    let fmt = format(&mut layer, &a.io, Format::Csv, &[Format::Csv, Format::Json, Format::Text])?;
    let stride = if fmt == Format::Csv {
        layer.get("stride", a.stride, 100usize)?
    } else {
        layer.forbid("stride", a.stride.is_some(), "outside CSV output")?;
        1
    };
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("pde", None, layer.finish()?);

    let field = solve_feynman_kac(xi, lambda, &grid, tau_max)?;
    if field.phi.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Failure(anyhow::anyhow!("solution is not finite")));
    }
    let probes = [0.0, 1.0, 2.0]
        .into_iter()
        .filter(|&l| l <= grid.l_max)
        .map(|l| {
            let pde = field.final_value(l);
            let exact = laplace_length_area(xi, lambda, l, tau_max)?;
            Ok((l, pde, exact, (pde - exact).abs() / exact))
        })
        .collect::<Result<Vec<_>, uict_core::Error>>()?;
    let text = match fmt {
        Format::Csv => {
            let mut buf = header.comment_lines().into_bytes();
            field.write_csv(&mut buf, stride)?;
            String::from_utf8(buf).expect("csv is ascii")
        }
        Format::Json => {
            let rows: Vec<_> = probes
                .iter()
                .map(|&(l, pde, exact, rel)| json!({ "l": l, "pde": pde, "closed_form": exact, "relative_error": rel }))
                .collect();
            header.wrap_json(json!({ "tau": tau_max, "probes": rows }))
        }
        Format::Text => {
            let mut s = header.comment_lines();
            let _ = writeln!(s, "{:>8} {:>16} {:>16} {:>12}", "l", "pde", "closed_form", "rel_error");
            for (l, pde, exact, rel) in probes {
                let _ = writeln!(s, "{l:>8} {pde:>16.10} {exact:>16.10} {rel:>12.3e}");
            }
            s
        }
    };
    sink.emit(&text)?;
    Ok(true)
}

pub fn sweep(a: SweepArgs) -> Outcome {
    let mut layer = Layer::load(a.io.config.as_deref())?;
    let kind = layer.get("functional", choice("functional", a.functional)?, FunctionalKind::Length)?;
    if kind == FunctionalKind::Diffusion {
        return Err(CliError::Usage("sweep runs over the chain scale; use length or area".into()));
    }
    let d = offspring(&mut layer, a.offspring)?;
    let t_list = layer.get("t-list", a.t_list, vec![25u64, 50, 100, 200])?;
    let l = layer.get("l", a.l, 0.0f64)?;
    let tau = layer.get("tau", a.tau, 1.0f64)?;
    let first_t = t_list.first().copied().unwrap_or(1);
    let s = setup(&mut layer, kind, l, tau, a.xi, a.lambda, first_t)?;
    let n = layer.get("n", a.n, 10_000usize)?;
    let k_sigma = layer.get("k-sigma", a.k_sigma, DEFAULT_K_SIGMA)?;
    let no_target = layer.get("no-target", a.no_target.then_some(true), false)?;
    let fmt = format(&mut layer, &a.io, Format::Text, &[Format::Text, Format::Json, Format::Csv])?;
    let seed = seed(&mut layer, a.seed)?;
    let mc = mc(&mut layer, seed, a.workers)?;
    let sink = sink(&mut layer, &a.io)?;
    let header = Header::new("sweep", Some(seed), layer.finish()?);

    let target = (!no_target).then_some(s.target);
    let report = convergence_sweep(&d, &t_list, &s.functional, s.param, target, n, &mc, k_sigma)?;
    let text = match fmt {
        Format::Json => header.wrap_json(json!({ "sweep": report })),
        Format::Csv => {
            let mut out = header.comment_lines();
            out.push_str("t,estimate,stderr,target,deviation,tolerance,pass\n");
            for r in &report.rows {
                let e = &r.estimate;
                match &r.comparison {
                    Some(c) => {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            r.t, e.value, e.stderr, c.target, c.deviation, c.tolerance, c.pass
                        );
                    }
                    None => {
                        let _ = writeln!(out, "{},{},{},,,,", r.t, e.value, e.stderr);
                    }
                }
            }
            out
        }
        Format::Text => header.comment_lines() + &report.to_text(),
    };
    sink.emit(&text)?;
    Ok(report.passed())
}
