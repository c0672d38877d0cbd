//! Simulation and verification toolkit for uniform infinite causal
//! triangulations (UICT).
//!
//! The crate is organised bottom-up:
//!
//! * [`offspring`]: critical offspring laws, their size-biased companions and
//!   generating functions.
//! * [`trees`]: Ulam–Harris family forests, Galton–Watson sampling and the
//!   spine sampler for trees conditioned on non-extinction.
//! * [`triangulation`]: causal triangulations, the tree bijection and the
//!   area / Gibbs observables.
//! * [`processes`]: the conditioned generation-size chain and the rescaled
//!   length and area paths.
//! * [`continuum`]: the limiting diffusion, closed-form Laplace transforms,
//!   the propagator and a Feynman–Kac PDE solver.
//! * [`harness`]: deterministic parallel Monte Carlo estimation and
//!   goodness-of-fit statistics.
//! * [`verify`]: the numbered verification suite run by `uict verify`.

pub mod continuum;
pub mod error;
pub mod harness;
pub mod offspring;
pub mod processes;
pub mod quad;
pub mod rng;
pub mod trees;
pub mod triangulation;
pub mod verify;

pub use continuum::{DiffusionMethod, DiffusionSpec, DriftMode, PdeField, PdeGrid, Scheme};
pub use error::{Error, Result};
pub use harness::{Comparison, LaplaceEstimate, SweepReport};
pub use offspring::OffspringDistribution;
pub use processes::{PathKind, ProcessPath};
pub use rng::{SimRng, StreamSeed};
pub use trees::{Address, FamilyForest, GenerationProfile};
pub use triangulation::CausalTriangulation;

/// Version string stamped into every emitted report.
pub const TOOL_VERSION: &str = concat!("uict ", env!("CARGO_PKG_VERSION"));
