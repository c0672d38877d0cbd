//! Closed-form laws of the length/area diffusion.
//!
//! With `a = sqrt(2 lambda)` and `T = tanh(a tau) / a`, the joint transform is
//!
//! ```text
//! phi(l, tau) = exp(-l xi_bar) / (cosh^2(a tau) (1 + xi T)^2),
//! xi_bar      = (xi + a^2 T) / (1 + xi T).
//! ```
//!
//! This form has no removable singularities at `lambda = 0` or `xi^2 = 2 lambda`.

use rand::Rng;

use super::bessel::bessel_i1_scaled;
use crate::error::{Error, Result};
use crate::quad;

const SMALL: f64 = 1e-4;

/// `tanh(a tau) / a`, continuous at `a = 0`.
fn scaled_tanh(a: f64, tau: f64) -> f64 {
    let x = a * tau;
    if x < SMALL {
        let x2 = x * x;
        tau * (1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0)
    } else {
        x.tanh() / a
    }
}

/// `x / sinh(x)`.
fn x_over_sinh(x: f64) -> f64 {
    if x < SMALL {
        1.0 - x * x / 6.0
    } else if x > 700.0 {
        2.0 * x * (-x).exp()
    } else {
        x / x.sinh()
    }
}

/// `x coth(x)`.
fn x_coth(x: f64) -> f64 {
    if x < SMALL {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

fn check_non_negative(values: &[(&str, f64)]) -> Result<()> {
    for &(name, v) in values {
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(())
}

/// Effective boundary variable after time `tau`: `phi = C e^{-l xi_bar}`.
pub fn xi_bar(xi: f64, lambda: f64, tau: f64) -> f64 {
    let a = (2.0 * lambda).sqrt();
    let t = scaled_tanh(a, tau);
    (xi + a * a * t) / (1.0 + xi * t)
}

/// `E[exp(-xi L_tau - 2 lambda ∫_0^tau L_u du) | L_0 = l]` for the conditioned
/// length diffusion.
pub fn laplace_length_area(xi: f64, lambda: f64, l: f64, tau: f64) -> Result<f64> {
    check_non_negative(&[("xi", xi), ("lambda", lambda), ("l", l), ("tau", tau)])?;
    let a = (2.0 * lambda).sqrt();
    let t = scaled_tanh(a, tau);
    let denom = 1.0 + xi * t;
    let bar = (xi + a * a * t) / denom;
    let c = (a * tau).cosh();
    Ok((-l * bar).exp() / (c * c * denom * denom))
}

/// `E[exp(-lambda A_1) | L_0 = 0] = 1 / cosh^2(sqrt(2 lambda))`.
pub fn laplace_area_origin(lambda: f64) -> f64 {
    let c = (2.0 * lambda).sqrt().cosh();
    1.0 / (c * c)
}

/// Propagator of the length diffusion killed at rate `2 lambda L`: the density
/// in `l2` of `L_tau` started from `l1`, weighted by the area functional.
pub fn green(l1: f64, l2: f64, tau: f64, lambda: f64) -> Result<f64> {
    check_non_negative(&[("l1", l1), ("l2", l2), ("lambda", lambda)])?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be > 0, got {tau}")));
    }
    if l1 == 0.0 {
        return Err(Error::ZeroInitialLength);
    }
    let x = (2.0 * lambda).sqrt() * tau;
    // a / sinh(a tau) and a coth(a tau), both finite as a -> 0.
    let csch = x_over_sinh(x) / tau;
    let coth = x_coth(x) / tau;
    let z = 2.0 * (l1 * l2).sqrt() * csch;
    Ok((l2 / l1).sqrt() * csch * (z - (l1 + l2) * coth).exp() * bessel_i1_scaled(z))
}

/// `A_1 ≈ (2/π²) Σ_{n ≤ n_terms} G_n / (n - 1/2)^2` with `G_n` i.i.d. Gamma(2, 1).
pub fn a1_series_sample<R: Rng + ?Sized>(n_terms: usize, rng: &mut R) -> f64 {
    let sum: f64 = (1..=n_terms)
        .map(|n| {
            let (u1, u2) = (1.0 - rng.random::<f64>(), 1.0 - rng.random::<f64>());
            let g = -(u1 * u2).ln();
            let k = n as f64 - 0.5;
            g / (k * k)
        })
        .sum();
    2.0 / (std::f64::consts::PI * std::f64::consts::PI) * sum
}

/// Expected value of the truncated series.
pub fn a1_series_mean(n_terms: usize) -> f64 {
    let s: f64 = (1..=n_terms)
        .map(|n| (n as f64 - 0.5).powi(-2))
        .sum();
    4.0 / (std::f64::consts::PI * std::f64::consts::PI) * s
}

/// Lévy density of `A_1`: `(2/x) Σ_{n≥1} exp(-π² (n - 1/2)² x / 2)`.
///
/// For `x < 1` the sum is evaluated through its theta-function dual
/// `sqrt(1/(2πx)) (1 + 2 Σ_{k≥1} (-1)^k e^{-2k²/x})`, which converges in a few
/// terms where the direct sum needs thousands. Summation stops once the tail
/// bound falls below `1e-14` relative or after `n_terms` terms.
pub fn levy_density(x: f64, n_terms: usize) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument(format!("x must be > 0, got {x}")));
    }
    let n_terms = n_terms.max(1);
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let sum = if x < 1.0 {
        let mut s = 1.0;
        for k in 1..=n_terms {
            let term = 2.0 * (-2.0 * (k * k) as f64 / x).exp();
            s += if k % 2 == 1 { -term } else { term };
            if term < 1e-14 {
                break;
            }
        }
        s / (2.0 * std::f64::consts::PI * x).sqrt()
    } else {
        let c = 0.5 * pi2 * x;
        let mut s = 0.0;
        for n in 1..=n_terms {
            let k = n as f64 - 0.5;
            s += (-c * k * k).exp();
            // Remaining terms shrink at least geometrically with this ratio.
            let next = (-c * (k + 1.0) * (k + 1.0)).exp();
            let ratio = (-2.0 * c * (k + 1.5)).exp();
            if next / (1.0 - ratio) < 1e-14 * s {
                break;
            }
        }
        s
    };
    Ok(2.0 / x * sum)
}

const LEVY_TERMS: usize = 10_000;
// exp(-π² u⁴ / 8) is negligible beyond u² = 36.
const LEVY_U_MAX: f64 = 6.0;

/// `∫_0^∞ x ρ(x) dx`, the mean of `A_1`, by quadrature.
pub fn levy_mean() -> f64 {
    quad::integrate(
        |u| {
            let x = u * u;
            x * levy_density(x, LEVY_TERMS).unwrap() * 2.0 * u
        },
        0.0,
        LEVY_U_MAX,
        1e-13,
    )
}

/// `exp(-∫_0^∞ (1 - e^{-lambda x}) ρ(x) dx)`, which should reproduce
/// `laplace_area_origin(lambda)`.
pub fn levy_khintchine_laplace(lambda: f64) -> Result<f64> {
    check_non_negative(&[("lambda", lambda)])?;
    let exponent = quad::integrate(
        |u| {
            let x = u * u;
            -(-lambda * x).exp_m1() * levy_density(x, LEVY_TERMS).unwrap() * 2.0 * u
        },
        0.0,
        LEVY_U_MAX,
        1e-13,
    );
    Ok((-exponent).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    /// Transform written with hyperbolic cotangents, valid away from the
    /// removable singularities.
    fn hyperbolic_form(xi: f64, lambda: f64, l: f64, tau: f64) -> f64 {
        let a = (2.0 * lambda).sqrt();
        let (s, c) = ((a * tau).sinh(), (a * tau).cosh());
        let coth = c / s;
        let bar = a * coth - a * a / (s * s * (xi + a * coth));
        (bar * bar - a * a) / (xi * xi - a * a) * (-l * bar).exp()
    }

    fn lambda_zero(xi: f64, l: f64, tau: f64) -> f64 {
        (-l * xi / (1.0 + xi * tau)).exp() / (1.0 + xi * tau).powi(2)
    }

    #[test]
    fn transform_examples() {
        assert!((laplace_length_area(1.0, 0.0, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        let v = laplace_length_area(0.0, 0.5, 0.0, 1.0).unwrap();
        assert!((v - 0.419_974_341_614_026).abs() < 1e-12);
        let v = laplace_length_area(1.0, 0.7, 2.0, 0.0).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!(laplace_length_area(-1.0, 0.0, 0.0, 1.0).is_err());
        assert!(laplace_length_area(1.0, 0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn agrees_with_hyperbolic_form() {
        for xi in [0.3f64, 1.0, 2.5] {
            for lambda in [0.1f64, 0.5, 2.0] {
                if (xi * xi - 2.0 * lambda).abs() < 1e-9 {
                    // Removable singularity of the hyperbolic form.
                    continue;
                }
                for &l in &[0.0, 0.7, 3.0] {
                    for &tau in &[0.2, 1.0, 2.0] {
                        let v = laplace_length_area(xi, lambda, l, tau).unwrap();
                        let w = hyperbolic_form(xi, lambda, l, tau);
                        assert!(((v - w) / w).abs() < 1e-10, "{xi} {lambda} {l} {tau}");
                    }
                }
            }
        }
    }

    #[test]
    fn continuous_at_lambda_zero() {
        for &xi in &[0.5, 1.0, 2.0] {
            for &l in &[0.0, 1.0] {
                for &tau in &[0.5, 1.0, 2.0] {
                    let v = laplace_length_area(xi, 1e-8, l, tau).unwrap();
                    assert!((v - lambda_zero(xi, l, tau)).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn continuous_across_resonance() {
        // xi^2 = 2 lambda is a removable singularity of the hyperbolic form.
        let (lambda, l, tau) = (0.5, 1.0, 1.0);
        let at = laplace_length_area(1.0, lambda, l, tau).unwrap();
        for eps in [1e-3, 1e-5] {
            let lo = hyperbolic_form(1.0 - eps, lambda, l, tau);
            let hi = hyperbolic_form(1.0 + eps, lambda, l, tau);
            assert!((at - 0.5 * (lo + hi)).abs() < 10.0 * eps);
        }
        // At resonance xi_bar stays at xi.
        assert!((xi_bar(1.0, 0.5, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn xi_bar_limits() {
        assert!((xi_bar(1.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((xi_bar(1.0, 1e-12, 1.0) - 0.5).abs() < 1e-10);
        let a = 2.0f64.sqrt();
        assert!((xi_bar(0.3, 1.0, 40.0) - a).abs() < 1e-12);
        // xi = 0: a tanh(a tau).
        assert!((xi_bar(0.0, 1.0, 0.8) - a * (a * 0.8).tanh()).abs() < 1e-14);
        assert_eq!(xi_bar(1.3, 0.4, 0.0), 1.3);
    }

    #[test]
    fn strictly_decreasing_in_each_argument() {
        let grid = [0.0, 0.25, 0.5, 1.0, 2.0];
        for &a in &grid {
            for &b in &grid {
                for w in grid.windows(2) {
                    let f = |xi, lambda, l| laplace_length_area(xi, lambda, l, 1.0).unwrap();
                    assert!(f(w[1], a, b) < f(w[0], a, b));
                    assert!(f(a, w[1], b) < f(a, w[0], b));
                    if a > 0.0 || b > 0.0 {
                        // With xi = lambda = 0 the transform is identically 1.
                        assert!(f(a, b, w[1]) < f(a, b, w[0]));
                    }
                }
            }
        }
    }

    #[test]
    fn area_origin_values() {
        assert_eq!(laplace_area_origin(0.0), 1.0);
        assert!((laplace_area_origin(0.5) - 0.419_974_341_614_026).abs() < 1e-12);
        assert!((laplace_area_origin(1.0) - 0.210_771_093_966_130_5).abs() < 1e-12);
        let v = laplace_length_area(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((v - laplace_area_origin(1.0)).abs() < 1e-15);
    }

    fn green_zero(l1: f64, l2: f64, tau: f64) -> f64 {
        // Unscaled Bessel via its ascending series.
        let z = 2.0 * (l1 * l2).sqrt() / tau;
        let q = 0.25 * z * z;
        let (mut term, mut i1) = (0.5 * z, 0.5 * z);
        for k in 1..200 {
            term *= q / (k * (k + 1)) as f64;
            i1 += term;
        }
        l2 / (tau * (l1 * l2).sqrt()) * (-(l1 + l2) / tau).exp() * i1
    }

    #[test]
    fn green_zero_lambda_form() {
        for &(l1, l2, tau) in &[(1.0, 2.0, 1.0), (0.3, 0.1, 0.5), (4.0, 3.0, 2.0)] {
            let v = green(l1, l2, tau, 0.0).unwrap();
            let w = green_zero(l1, l2, tau);
            assert!(((v - w) / w).abs() < 1e-12);
            // lambda -> 0 limit is continuous.
            assert!((green(l1, l2, tau, 1e-12).unwrap() - v).abs() < 1e-9);
        }
        assert_eq!(green(1.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(green(0.0, 1.0, 1.0, 0.0), Err(Error::ZeroInitialLength));
        assert!(green(1.0, 1.0, 0.0, 0.0).is_err());
        // Concentrates as tau -> 0.
        let peaks: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&tau| green(1.0, 1.0, tau, 0.0).unwrap())
            .collect();
        assert!(peaks.windows(2).all(|w| w[1] > 2.0 * w[0]));
        assert!(green(1.0, 1.0, 1e-8, 0.0).unwrap().is_finite());
    }

    #[test]
    fn green_normalisation_and_transform() {
        let mass = quad::integrate_to_infinity(|l2| green(1.0, l2, 1.0, 0.0).unwrap(), 0.0, 1e-12);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        for &lambda in &[0.0, 0.5] {
            for &xi in &[0.0, 1.0, 2.0] {
                let lhs = quad::integrate_to_infinity(
                    |l2| (-xi * l2).exp() * green(1.0, l2, 1.0, lambda).unwrap(),
                    0.0,
                    1e-12,
                );
                let rhs = laplace_length_area(xi, lambda, 1.0, 1.0).unwrap();
                assert!((lhs - rhs).abs() < 1e-6, "{lambda} {xi}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        let (l1, l2) = (1.0, 2.0);
        for &lambda in &[0.0, 0.5] {
            let lhs = quad::integrate_to_infinity(
                |l| green(l1, l, 0.5, lambda).unwrap() * green(l, l2, 0.5, lambda).unwrap_or(0.0),
                0.0,
                1e-12,
            );
            let rhs = green(l1, l2, 1.0, lambda).unwrap();
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn series_sample_moments() {
        assert!((a1_series_mean(1) - 16.0 / (std::f64::consts::PI.powi(2))).abs() < 1e-14);
        assert!((a1_series_mean(1000) - 2.0).abs() < 1e-3);
        let mut rng = rng_from_seed(17);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| a1_series_sample(1, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // Var = (8/π²)² · 2.
        let se = (2.0f64).sqrt() * 8.0 / std::f64::consts::PI.powi(2) / (n as f64).sqrt();
        assert!((mean - a1_series_mean(1)).abs() < 4.0 * se);
    }

    #[test]
    fn series_reproduces_area_transform() {
        // Laplace transform of the truncated series is a finite product.
        let lambda = 1.0f64;
        let product: f64 = (1..=100_000)
            .map(|n| {
                let k = n as f64 - 0.5;
                (1.0 + 2.0 * lambda / (std::f64::consts::PI.powi(2) * k * k)).powi(-2)
            })
            .product();
        assert!((product - laplace_area_origin(lambda)).abs() < 1e-5);
    }

    #[test]
    fn levy_density_forms_agree() {
        for &x in &[0.5, 0.9, 1.0, 1.2, 3.0] {
            let pi2 = std::f64::consts::PI.powi(2);
            let direct: f64 = (1..2000)
                .map(|n| (-pi2 * (n as f64 - 0.5).powi(2) * x / 2.0).exp())
                .sum::<f64>()
                * 2.0
                / x;
            let v = levy_density(x, 10_000).unwrap();
            assert!(((v - direct) / direct).abs() < 1e-12, "x = {x}");
        }
        let x = 20.0;
        let single = 2.0 / x * (-std::f64::consts::PI.powi(2) * x / 8.0).exp();
        assert!(((levy_density(x, 10).unwrap() - single) / single).abs() < 1e-12);
        assert!(levy_density(0.0, 10).is_err());
        assert!(levy_density(-1.0, 10).is_err());
    }

    #[test]
    fn levy_integrals() {
        assert!((levy_mean() - 2.0).abs() < 1e-4);
        for &lambda in &[0.5, 1.0] {
            let v = levy_khintchine_laplace(lambda).unwrap();
            assert!((v - laplace_area_origin(lambda)).abs() < 1e-4);
        }
    }
}
