//! The limiting length diffusion `dL = drift dτ + sqrt(2 L) dB`.
//!
//! `2L` is a squared Bessel process of dimension 4 (drift 2) or 0 (drift 0),
//! so its transition from `l` over `dτ` is exactly
//! `dτ · Gamma(shape + N, 1)` with `N ~ Poisson(l / dτ)` and `shape` 2 or 0.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::closed_form::laplace_length_area;
use crate::error::{Error, Result};
use crate::processes::{PathKind, ProcessPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftMode {
    /// Drift 2: the boundary length of the conditioned triangulation.
    Conditioned,
    /// Drift 0: the unconditioned (Feller) process, absorbed at 0.
    Unconditioned,
}

impl DriftMode {
    fn drift(self) -> f64 {
        match self {
            DriftMode::Conditioned => 2.0,
            DriftMode::Unconditioned => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub l0: f64,
    pub drift_mode: DriftMode,
    /// Area coupling; the killing rate is `2 lambda L`.
    pub lambda: f64,
    /// Boundary Laplace variable.
    pub xi: f64,
}

impl DiffusionSpec {
    pub fn conditioned(l0: f64) -> Self {
        Self {
            l0,
            drift_mode: DriftMode::Conditioned,
            lambda: 0.0,
            xi: 0.0,
        }
    }

    pub fn unconditioned(l0: f64) -> Self {
        Self {
            drift_mode: DriftMode::Unconditioned,
            ..Self::conditioned(l0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l0", self.l0), ("lambda", self.lambda), ("xi", self.xi)] {
            if !(v >= 0.0) || v.is_infinite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `E[exp(-xi L_tau - 2 lambda ∫ L)]` in closed form (conditioned mode only).
    pub fn closed_form(&self, tau: f64) -> Option<f64> {
        match self.drift_mode {
            DriftMode::Conditioned => laplace_length_area(self.xi, self.lambda, self.l0, tau).ok(),
            DriftMode::Unconditioned => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum DiffusionMethod {
    /// Exact transition sampling.
    Exact,
    /// Euler–Maruyama with step `dt` and full truncation at 0.
    Euler { dt: f64 },
}

impl DiffusionMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiffusionMethod::Euler { dt } if !(dt > 0.0) => Err(Error::InvalidArgument(format!(
                "Euler step must be > 0, got {dt}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Draw `L_{tau + dtau}` given `L_tau = l`.
pub fn exact_transition<R: Rng + ?Sized>(l: f64, dtau: f64, mode: DriftMode, rng: &mut R) -> f64 {
    if dtau <= 0.0 {
        return l;
    }
    let jumps = if l > 0.0 {
        Poisson::new(l / dtau).expect("positive rate").sample(rng)
    } else {
        0.0
    };
    let shape = jumps + mode.drift();
    if shape == 0.0 {
        return 0.0;
    }
    dtau * Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
}

fn euler_advance<R: Rng + ?Sized>(
    mut l: f64,
    span: f64,
    dt: f64,
    drift: f64,
    rng: &mut R,
) -> f64 {
    if span <= 0.0 {
        return l;
    }
    let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let sqrt_h = h.sqrt();
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(rng);
        l += drift * h + (2.0 * l.max(0.0)).sqrt() * sqrt_h * z;
    }
    l
}

/// `L` on `tau_grid` (increasing, starting at 0).
pub fn simulate_diffusion<R: Rng + ?Sized>(
    spec: &DiffusionSpec,
    tau_grid: &[f64],
    method: DiffusionMethod,
    rng: &mut R,
) -> Result<ProcessPath> {
    spec.validate()?;
    method.validate()?;
    if tau_grid.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    let drift = spec.drift_mode.drift();
    let mut values = Vec::with_capacity(tau_grid.len());
    // Euler keeps its unclamped state between grid points.
    let mut state = spec.l0;
    values.push(state);
    for w in tau_grid.windows(2) {
        let span = w[1] - w[0];
        state = match method {
            DiffusionMethod::Exact => exact_transition(state, span, spec.drift_mode, rng),
            DiffusionMethod::Euler { dt } => euler_advance(state, span, dt, drift, rng),
        };
        values.push(state.max(0.0));
    }
    Ok(ProcessPath {
        kind: PathKind::Length,
        t_scale: 0,
        nu: 1.0,
        times: tau_grid.to_vec(),
        values,
        raw: None,
    })
}

/// `L_tau` alone.
pub fn simulate_diffusion_endpoint<R: Rng + ?Sized>(
    spec: &DiffusionSpec,
    tau: f64,
    method: DiffusionMethod,
    rng: &mut R,
) -> Result<f64> {
    spec.validate()?;
    method.validate()?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau}")));
    }
    Ok(match method {
        DiffusionMethod::Exact => exact_transition(spec.l0, tau, spec.drift_mode, rng),
        DiffusionMethod::Euler { dt } => {
            euler_advance(spec.l0, tau, dt, spec.drift_mode.drift(), rng).max(0.0)
        }
    })
}
