//! The continuum limit: the length diffusion, closed-form transforms, the
//! propagator, the series and Lévy representations of the area at unit time,
//! and a Feynman–Kac solver for the backward equation.

mod bessel;
mod closed_form;
mod diffusion;
mod pde;

pub use bessel::bessel_i1_scaled;
pub use closed_form::{
    a1_series_mean, a1_series_sample, green, laplace_area_origin, laplace_length_area,
    levy_density, levy_khintchine_laplace, levy_mean, xi_bar,
};
pub use diffusion::{
    exact_transition, simulate_diffusion, simulate_diffusion_endpoint, DiffusionMethod,
    DiffusionSpec, DriftMode,
};
pub use pde::{hamiltonian_apply, solve_feynman_kac, PdeField, PdeGrid, Scheme};
