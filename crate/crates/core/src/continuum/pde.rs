//! Finite-difference solver for the backward equation
//! `∂τ φ = 2 ∂l φ + l ∂²l φ - 2 lambda l φ`, `φ(l, 0) = e^{-xi l}`.
//!
//! Space uses centred differences in the interior. The cell Péclet number
//! `2h / l` is at most 2 for every interior node, so no upwinding is needed.
//! At `l = 0` the equation reduces to `∂τ φ = 2 ∂l φ`, discretised with the
//! second-order one-sided difference; no boundary condition is imposed there.
//! The far boundary `l_max` is Dirichlet with the closed-form value.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::closed_form::laplace_length_area;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Explicit,
    Implicit,
    CrankNicolson,
}

impl Scheme {
    /// Weight of the new time level.
    fn theta(self) -> f64 {
        match self {
            Scheme::Explicit => 0.0,
            Scheme::Implicit => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    pub l_max: f64,
    /// Number of space intervals; nodes are `l_i = i l_max / n_l`.
    pub n_l: usize,
    /// Number of time steps.
    pub n_tau: usize,
    pub scheme: Scheme,
}

impl Default for PdeGrid {
    fn default() -> Self {
        Self {
            l_max: 30.0,
            n_l: 3000,
            n_tau: 1000,
            scheme: Scheme::CrankNicolson,
        }
    }
}

impl PdeGrid {
    pub fn h(&self) -> f64 {
        self.l_max / self.n_l as f64
    }

    fn check(&self, tau_max: f64, lambda: f64) -> Result<()> {
        if !(self.l_max > 0.0) || self.n_l < 2 || self.n_tau == 0 {
            return Err(Error::UnstableGrid(format!(
                "need l_max > 0, n_l >= 2, n_tau >= 1 (got {}, {}, {})",
                self.l_max, self.n_l, self.n_tau
            )));
        }
        if self.scheme == Scheme::Explicit {
            let h = self.h();
            let dt = tau_max / self.n_tau as f64;
            let rate = (2.0 * self.l_max / (h * h) + 2.0 * lambda * self.l_max).max(3.0 / h);
            if dt * rate > 1.0 {
                return Err(Error::UnstableGrid(format!(
                    "explicit step {dt} exceeds stability limit {}",
                    1.0 / rate
                )));
            }
        }
        Ok(())
    }
}

/// Solution values `phi[j][i]` at `(l[i], tau[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeField {
    pub l: Vec<f64>,
    pub tau: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

impl PdeField {
    /// Linear interpolation in `l` at time level `j`.
    pub fn value_at(&self, l: f64, j: usize) -> f64 {
        let h = self.l[1] - self.l[0];
        let x = (l / h).clamp(0.0, (self.l.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.l.len() - 2);
        let w = x - i as f64;
        (1.0 - w) * self.phi[j][i] + w * self.phi[j][i + 1]
    }

    /// Value at the final time.
    pub fn final_value(&self, l: f64) -> f64 {
        self.value_at(l, self.tau.len() - 1)
    }

    /// CSV `l,tau,phi`, keeping every `stride`-th time level plus the last.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> Result<()> {
        let io = |e: std::io::Error| Error::InvalidArgument(format!("write failed: {e}"));
        let stride = stride.max(1);
        let last = self.tau.len() - 1;
        writeln!(out, "l,tau,phi").map_err(io)?;
        for (j, row) in self.phi.iter().enumerate() {
            if j % stride != 0 && j != last {
                continue;
            }
            for (l, v) in self.l.iter().zip(row) {
                writeln!(out, "{l},{},{v}", self.tau[j]).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Tridiagonal solve; `a` is the sub-diagonal (`a[0]` unused), `c` the
/// super-diagonal (last entry unused).
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Solve to `tau_max`, storing every time level.
pub fn solve_feynman_kac(xi: f64, lambda: f64, grid: &PdeGrid, tau_max: f64) -> Result<PdeField> {
    for (name, v) in [("xi", xi), ("lambda", lambda)] {
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
        }
    }
    if !(tau_max > 0.0) {
        return Err(Error::InvalidArgument(format!("tau_max must be > 0, got {tau_max}")));
    }
    grid.check(tau_max, lambda)?;

    let n = grid.n_l;
    let h = grid.h();
    let dt = tau_max / grid.n_tau as f64;
    let theta = grid.scheme.theta();
    let l: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let tau: Vec<f64> = (0..=grid.n_tau).map(|j| j as f64 * dt).collect();

    // Operator rows for interior nodes: lower, diagonal, upper.
    let lower: Vec<f64> = l.iter().map(|&x| x / (h * h) - 1.0 / h).collect();
    let diag: Vec<f64> = l.iter().map(|&x| -2.0 * x / (h * h) - 2.0 * lambda * x).collect();
    let upper: Vec<f64> = l.iter().map(|&x| x / (h * h) + 1.0 / h).collect();
    let apply = |phi: &[f64], out: &mut [f64]| {
        out[0] = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / h;
        for i in 1..n {
            out[i] = lower[i] * phi[i - 1] + diag[i] * phi[i] + upper[i] * phi[i + 1];
        }
    };

    // Left-hand matrix I - theta dt A on nodes 0..n-1, with the extra entry of
    // row 0 in column 2 removed by subtracting a multiple of row 1.
    let k = theta * dt;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    for i in 1..n {
        a[i] = -k * lower[i];
        b[i] = 1.0 - k * diag[i];
        c[i] = -k * upper[i];
    }
    let (mut r00, mut r01, r02) = (1.0 + 3.0 * k / h, -4.0 * k / h, k / h);
    let elim = if theta > 0.0 { r02 / c[1] } else { 0.0 };
    r00 -= elim * a[1];
    r01 -= elim * b[1];
    b[0] = r00;
    c[0] = r01;

    let boundary = |t: f64| laplace_length_area(xi, lambda, grid.l_max, t);
    let mut phi: Vec<Vec<f64>> = Vec::with_capacity(grid.n_tau + 1);
    phi.push(l.iter().map(|&x| (-xi * x).exp()).collect());
    let mut op = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for j in 0..grid.n_tau {
        let cur = &phi[j];
        apply(cur, &mut op);
        for i in 0..n {
            rhs[i] = cur[i] + (1.0 - theta) * dt * op[i];
        }
        let next_edge = boundary(tau[j + 1])?;
        if theta > 0.0 {
            rhs[n - 1] += k * upper[n - 1] * next_edge;
            rhs[0] -= elim * rhs[1];
            thomas(&a, &b, &c, &mut rhs);
        }
        let mut next = rhs.clone();
        next.push(next_edge);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnstableGrid(format!("non-finite value at step {}", j + 1)));
        }
        phi.push(next);
    }
    Ok(PdeField { l, tau, phi })
}

/// `(-2 ∂l - l ∂²l + 2 lambda l) g` on the grid `l_i = l0 + i h`.
///
/// Interior nodes use centred differences, the end nodes second-order
/// one-sided ones, so quadratics are reproduced exactly everywhere.
pub fn hamiltonian_apply(values: &[f64], h: f64, l0: f64, lambda: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 grid points, got {n}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("grid spacing must be > 0, got {h}")));
    }
    let g = values;
    Ok((0..n)
        .map(|i| {
            let (d1, d2) = if i == 0 {
                (
                    (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h),
                    (g[0] - 2.0 * g[1] + g[2]) / (h * h),
                )
            } else if i == n - 1 {
                (
                    (3.0 * g[i] - 4.0 * g[i - 1] + g[i - 2]) / (2.0 * h),
                    (g[i] - 2.0 * g[i - 1] + g[i - 2]) / (h * h),
                )
            } else {
                (
                    (g[i + 1] - g[i - 1]) / (2.0 * h),
                    (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h),
                )
            };
            let l = l0 + i as f64 * h;
            -2.0 * d1 - l * d2 + 2.0 * lambda * l * g[i]
        })
        .collect())
}
