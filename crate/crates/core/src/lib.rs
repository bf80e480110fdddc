//! Particle-level laboratory for eps-scaled kinetic swarming models and their
//! speed-constrained limit on `R^d x rS`.
//!
//! * [`eps_dynamics`]: splitting integrator with exact relaxation substeps.
//! * [`sphere`]: limit dynamics with tangential projection, plus spherical calculus checks.
//! * [`relaxation`]: roots of `lambda_eps`, the closed-form free flow, trapping bounds.
//! * [`transport`]: exact Wasserstein-1 distances and the convergence harness.

pub mod ensemble;
pub mod eps_dynamics;
pub mod error;
pub mod init;
pub mod io;
pub mod kernels;
pub mod noise;
pub mod relaxation;
pub mod sphere;
pub mod transport;

pub use ensemble::{
    moments, project_measure, support_in_band, Ensemble, ModelParams, MomentReport, Particle, PhaseEnsemble,
    SphereEnsemble, Vec3,
};
pub use error::{Result, SwarmError};
pub use kernels::{KernelChoice, KernelSpec};
pub use transport::{w1, w1_exact, W1Report};
