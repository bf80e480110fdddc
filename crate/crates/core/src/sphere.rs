//! Limit dynamics on `R^d x rS` and the spherical-calculus toolkit used to
//! check the Laplace-Beltrami identities numerically.
//!
//! The integrator works in Cartesian `omega` and never touches angles:
//!
//! ```text
//! x     <- x + omega dt
//! omega <- r normalize(omega + P(omega) (a dt [+ sqrt 2 dW]))
//! ```
//!
//! with `P(omega) = I - omega omega^T / r^2`.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::ensemble::{moments, Ensemble, ModelParams, MomentReport, Particle, SphereEnsemble, Vec3};
use crate::error::{Result, SwarmError};
use crate::kernels::{acceleration_of, KernelSpec};
use crate::noise::{CounterNoise, NoiseSource, ZeroNoise};

/// Half-width of the excluded band `|sin theta| >= 1 - POLE_BAND` around the poles.
pub const POLE_BAND: f64 = 1e-10;

/// Default finite-difference step, relative to `r`.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRunConfig {
    /// Only `alpha` and `beta` (through `r`) matter here.
    pub params: ModelParams,
    pub spec: KernelSpec,
    pub dt: f64,
    pub horizon: f64,
    pub snapshot_stride: usize,
    pub diffusion: bool,
    pub rng_seed: u64,
}

impl SphereRunConfig {
    pub fn new(params: ModelParams, spec: KernelSpec, dt: f64, horizon: f64) -> Self {
        Self { params, spec, dt, horizon, snapshot_stride: 1, diffusion: false, rng_seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SwarmError::BadConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(SwarmError::BadConfig(format!("horizon {} shorter than dt {}", self.horizon, self.dt)));
        }
        if self.snapshot_stride == 0 {
            return Err(SwarmError::BadConfig("snapshot stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Per-particle tangent vectors `xi_i` with `omega_i . xi_i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    pub vectors: Vec<Vec3>,
}

/// `(I - omega omega^T / |omega|^2) a`.
pub fn tangential_projection(a: &Vec3, omega: &Vec3) -> Vec3 {
    a - omega * (omega.dot(a) / omega.norm_squared())
}

/// Tangential part of the mean-field acceleration at every particle.
pub fn tangent_field(ens: &SphereEnsemble, spec: &KernelSpec) -> TangentField {
    let field = acceleration_of(ens.particles(), spec);
    let vectors = ens.particles().iter().zip(&field.accel).map(|(p, a)| tangential_projection(a, &p.v)).collect();
    TangentField { vectors }
}

/// One step with an explicit noise source. Returns the new snapshot and
/// `sup |a_i|`.
pub fn advance_limit<N: NoiseSource + ?Sized>(
    ens: &SphereEnsemble,
    cfg: &SphereRunConfig,
    step_index: u64,
    noise: &N,
) -> (SphereEnsemble, f64) {
    let dt = cfg.dt;
    let r = ens.r();
    let dim = ens.dim();
    let field = acceleration_of(ens.particles(), &cfg.spec);
    let amp = (2.0 * dt).sqrt();
    let particles = ens
        .particles()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let push = field.accel[i] * dt + noise.gaussian(i, step_index, 0, dim) * amp;
            let moved = p.v + tangential_projection(&push, &p.v);
            Particle { x: p.x + p.v * dt, v: moved * (r / moved.norm()), w: p.w }
        })
        .collect();
    let time = (step_index + 1) as f64 * dt;
    (ens.evolved(particles, time), field.sup_norm)
}

pub fn step_limit(ens: &SphereEnsemble, cfg: &SphereRunConfig) -> SphereEnsemble {
    let index = (ens.time() / cfg.dt).round() as u64;
    advance_limit(ens, cfg, index, &ZeroNoise).0
}

/// Project-then-renormalize Euler-Maruyama step whose generator is
/// `Delta_omega` plus the projected drift.
pub fn step_limit_diffusive<N: NoiseSource + ?Sized>(
    ens: &SphereEnsemble,
    cfg: &SphereRunConfig,
    step_index: u64,
    noise: &N,
) -> SphereEnsemble {
    advance_limit(ens, cfg, step_index, noise).0
}

#[derive(Debug, Clone)]
pub struct SphereTrajectory {
    pub config: SphereRunConfig,
    pub snapshots: Vec<SphereEnsemble>,
    pub moments: Vec<MomentReport>,
    pub field_sup: f64,
}

pub fn integrate_limit(
    f_in: &SphereEnsemble,
    cfg: &SphereRunConfig,
    mut observe: impl FnMut(usize, &SphereEnsemble),
) -> Result<(SphereEnsemble, f64)> {
    cfg.validate()?;
    let counter = CounterNoise::new(cfg.rng_seed);
    let noise: &dyn NoiseSource = if cfg.diffusion { &counter } else { &ZeroNoise };
    let mut current = f_in.evolved(f_in.particles().to_vec(), 0.0);
    let mut field_sup: f64 = 0.0;
    observe(0, &current);
    for k in 0..cfg.n_steps() {
        let (next, a) = advance_limit(&current, cfg, k as u64, noise);
        field_sup = field_sup.max(a);
        current = next;
        observe(k + 1, &current);
    }
    Ok((current, field_sup))
}

pub fn simulate_limit(f_in: &SphereEnsemble, cfg: &SphereRunConfig) -> Result<SphereTrajectory> {
    let n = cfg.n_steps();
    let mut snapshots = Vec::new();
    let (_, field_sup) = integrate_limit(f_in, cfg, |k, ens| {
        if k % cfg.snapshot_stride == 0 || k == n {
            snapshots.push(ens.clone());
        }
    })?;
    let moments = snapshots.iter().map(moments).collect();
    Ok(SphereTrajectory { config: cfg.clone(), snapshots, moments, field_sup })
}

// ---------------------------------------------------------------------------
// Spherical calculus in R^3.

/// Angles of `omega = r (cos t cos p, cos t sin p, sin t)`, with
/// `theta in [-pi/2, pi/2]` and `phi in [0, 2 pi)`.
pub fn spherical_coords_3d(omega: &Vec3, r: f64) -> (f64, f64) {
    let theta = (omega.z / r).clamp(-1.0, 1.0).asin();
    let mut phi = omega.y.atan2(omega.x);
    if phi < 0.0 {
        phi += TAU;
    }
    if phi >= TAU {
        phi -= TAU;
    }
    (theta, phi)
}

pub fn from_spherical_3d(theta: f64, phi: f64, r: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(ct * cp, ct * sp, st) * r
}

fn check_pole(theta: f64) -> Result<()> {
    let s = theta.sin();
    if s.abs() >= 1.0 - POLE_BAND {
        return Err(SwarmError::PoleSingularity { sin_theta: s });
    }
    Ok(())
}

/// Tangent basis `(e_theta, e_phi)` with `|e_theta| = 1`, `|e_phi| = cos theta`.
pub fn tangent_frame_3d(theta: f64, phi: f64) -> Result<(Vec3, Vec3)> {
    check_pole(theta)?;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Ok((Vec3::new(-st * cp, -st * sp, ct), Vec3::new(-ct * sp, ct * cp, 0.0)))
}

/// Central-difference Laplacian of the degree-zero homogeneous extension
/// `Phi(v) = phi(r v/|v|)` evaluated at an arbitrary `v != 0`.
pub fn extension_laplacian<F: Fn(&Vec3) -> f64>(phi: F, v: &Vec3, r: f64, dim: usize, step: f64) -> Result<f64> {
    if v.norm() == 0.0 {
        return Err(SwarmError::ZeroVelocity);
    }
    let ext = |u: Vec3| phi(&(u * (r / u.norm())));
    let centre = ext(*v);
    let mut lap = 0.0;
    for k in 0..dim {
        let e = Vec3::ith(k, step);
        lap += ext(v + e) - 2.0 * centre + ext(v - e);
    }
    Ok(lap / (step * step))
}

/// `Delta_omega phi(omega)` as the ambient Laplacian of the homogeneous
/// extension at `v = omega`, step `FD_STEP * r`.
pub fn laplace_beltrami_via_extension<F: Fn(&Vec3) -> f64>(phi: F, omega: &Vec3, r: f64, dim: usize) -> Result<f64> {
    extension_laplacian(phi, omega, r, dim, FD_STEP * r)
}

/// Closed-form Laplacian of `v -> phi(r v/|v|)` for an ambient `C^2`
/// function `phi`:
///
/// ```text
/// (r/|v|)^2 (I - v v^T/|v|^2) : D^2 phi(p) - (d - 1) (r/|v|) v . grad phi(p) / |v|^2,   p = r v/|v|
/// ```
///
/// with the derivatives of `phi` at `p` taken by central differences.
pub fn zero_hom_laplacian_formula<F: Fn(&Vec3) -> f64>(phi: F, v: &Vec3, r: f64, dim: usize) -> Result<f64> {
    let speed = v.norm();
    if speed == 0.0 {
        return Err(SwarmError::ZeroVelocity);
    }
    let h = FD_STEP * r;
    let p = v * (r / speed);
    let f0 = phi(&p);
    let mut grad = Vec3::zeros();
    let mut hess = nalgebra::Matrix3::<f64>::zeros();
    for i in 0..dim {
        let ei = Vec3::ith(i, h);
        let (fp, fm) = (phi(&(p + ei)), phi(&(p - ei)));
        grad[i] = (fp - fm) / (2.0 * h);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let ej = Vec3::ith(j, h);
            let mixed = (phi(&(p + ei + ej)) - phi(&(p + ei - ej)) - phi(&(p - ei + ej)) + phi(&(p - ei - ej))) / (4.0 * h * h);
            hess[(i, j)] = mixed;
            hess[(j, i)] = mixed;
        }
    }
    let n = v / speed;
    let mut tangential = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let proj = if i == j { 1.0 } else { 0.0 } - n[i] * n[j];
            tangential += proj * hess[(i, j)];
        }
    }
    let ratio = r / speed;
    Ok(ratio * ratio * tangential - (dim as f64 - 1.0) * ratio * v.dot(&grad) / (speed * speed))
}

/// `(1/r^2) { (1/cos t) d_t (cos t d_t F) + (1/cos^2 t) d_pp F }` by
/// conservative central differences.
pub fn spherical_laplacian_3d<F: Fn(f64, f64) -> f64>(f: F, theta: f64, phi: f64, r: f64) -> Result<f64> {
    check_pole(theta)?;
    let h = FD_STEP;
    let f0 = f(theta, phi);
    let flux_up = (theta + 0.5 * h).cos() * (f(theta + h, phi) - f0) / h;
    let flux_dn = (theta - 0.5 * h).cos() * (f0 - f(theta - h, phi)) / h;
    let polar = (flux_up - flux_dn) / (h * theta.cos());
    let azimuthal = (f(theta, phi + h) - 2.0 * f0 + f(theta, phi - h)) / (h * h * theta.cos().powi(2));
    Ok((polar + azimuthal) / (r * r))
}

/// `(1/r) { (1/cos t) d_t (xi_t cos t) + d_p xi_p }` for a tangent field
/// `xi = xi_t e_theta + xi_p e_phi`.
pub fn spherical_divergence_3d<A, B>(xi_theta: A, xi_phi: B, theta: f64, phi: f64, r: f64) -> Result<f64>
where
    A: Fn(f64, f64) -> f64,
    B: Fn(f64, f64) -> f64,
{
    check_pole(theta)?;
    let h = FD_STEP;
    let polar = ((theta + h).cos() * xi_theta(theta + h, phi) - (theta - h).cos() * xi_theta(theta - h, phi))
        / (2.0 * h * theta.cos());
    let azimuthal = (xi_phi(theta, phi + h) - xi_phi(theta, phi - h)) / (2.0 * h);
    Ok((polar + azimuthal) / r)
}
