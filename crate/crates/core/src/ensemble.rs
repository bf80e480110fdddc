//! Weighted particle ensembles standing in for phase-space probability
//! measures, together with the sphere projection and moment diagnostics.
//!
//! Vectors are stored as `Vector3<f64>` for both supported dimensions; in
//! dimension 2 the third component is identically zero and every operation in
//! this crate preserves that.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwarmError};

pub type Vec3 = Vector3<f64>;

/// Weights must sum to one within this absolute tolerance.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Relative tolerance on `| |omega| - r |` for sphere ensembles.
pub const SPHERE_RADIUS_TOLERANCE: f64 = 1e-12;

/// Propulsion `alpha`, friction `beta` and the scale `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    eps: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, eps: f64) -> Result<Self> {
        for (name, value) in [("alpha", alpha), ("beta", beta), ("eps", eps)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SwarmError::BadParams(format!("{name} must be positive and finite, got {value}")));
            }
        }
        Ok(Self { alpha, beta, eps })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Equilibrium speed `sqrt(alpha / beta)`.
    pub fn r(&self) -> f64 {
        (self.alpha / self.beta).sqrt()
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, eps)
    }
}

/// One weighted atom `(x, v, w)`. In a [`SphereEnsemble`] the velocity is the
/// direction-carrying `omega` with `|omega| = r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: Vec3,
    pub v: Vec3,
    pub w: f64,
}

impl Particle {
    pub fn new(x: Vec3, v: Vec3, w: f64) -> Self {
        Self { x, v, w }
    }

    pub fn speed(&self) -> f64 {
        self.v.norm()
    }
}

/// Read access shared by phase and sphere ensembles.
pub trait Ensemble {
    fn dim(&self) -> usize;
    fn time(&self) -> f64;
    fn particles(&self) -> &[Particle];

    fn len(&self) -> usize {
        self.particles().len()
    }

    fn is_empty(&self) -> bool {
        self.particles().is_empty()
    }
}

fn validate_particles(dim: usize, particles: &[Particle]) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(SwarmError::BadEnsemble(format!("dimension must be 2 or 3, got {dim}")));
    }
    if particles.is_empty() {
        return Err(SwarmError::BadEnsemble("ensemble has no particles".into()));
    }
    let mut mass = 0.0;
    for (i, p) in particles.iter().enumerate() {
        if !(p.w.is_finite() && p.w >= 0.0) {
            return Err(SwarmError::BadEnsemble(format!("particle {i} has invalid weight {}", p.w)));
        }
        if p.x.iter().chain(p.v.iter()).any(|c| !c.is_finite()) {
            return Err(SwarmError::BadEnsemble(format!("particle {i} has a non-finite coordinate")));
        }
        if dim == 2 && (p.x.z != 0.0 || p.v.z != 0.0) {
            return Err(SwarmError::BadEnsemble(format!("particle {i} has a third component in dimension 2")));
        }
        mass += p.w;
    }
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(SwarmError::BadEnsemble(format!("weights sum to {mass}, expected 1")));
    }
    Ok(())
}

/// Discrete stand-in for a kinetic density on `R^d x R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEnsemble {
    dim: usize,
    particles: Vec<Particle>,
    time: f64,
}

impl PhaseEnsemble {
    pub fn new(dim: usize, particles: Vec<Particle>, time: f64) -> Result<Self> {
        validate_particles(dim, &particles)?;
        Ok(Self { dim, particles, time })
    }

    /// Equal weights `1/N` on the given `(x, v)` pairs.
    pub fn uniform(dim: usize, states: impl IntoIterator<Item = (Vec3, Vec3)>) -> Result<Self> {
        let states: Vec<_> = states.into_iter().collect();
        let w = 1.0 / states.len().max(1) as f64;
        let particles = states.into_iter().map(|(x, v)| Particle::new(x, v, w)).collect();
        Self::new(dim, particles, 0.0)
    }

    /// Successor snapshot produced by the integrators; weights are carried
    /// over untouched so no revalidation is needed.
    pub(crate) fn evolved(&self, particles: Vec<Particle>, time: f64) -> Self {
        debug_assert_eq!(particles.len(), self.particles.len());
        Self { dim: self.dim, particles, time }
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }
}

impl Ensemble for PhaseEnsemble {
    fn dim(&self) -> usize {
        self.dim
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn particles(&self) -> &[Particle] {
        &self.particles
    }
}

/// Discrete stand-in for a measure supported on `R^d x rS`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereEnsemble {
    dim: usize,
    r: f64,
    particles: Vec<Particle>,
    time: f64,
}

impl SphereEnsemble {
    pub fn new(dim: usize, r: f64, particles: Vec<Particle>, time: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(SwarmError::BadEnsemble(format!("sphere radius must be positive, got {r}")));
        }
        validate_particles(dim, &particles)?;
        for (i, p) in particles.iter().enumerate() {
            if (p.speed() - r).abs() > SPHERE_RADIUS_TOLERANCE * r {
                return Err(SwarmError::BadEnsemble(format!(
                    "particle {i} has speed {} off the sphere of radius {r}",
                    p.speed()
                )));
            }
        }
        Ok(Self { dim, r, particles, time })
    }

    pub(crate) fn evolved(&self, particles: Vec<Particle>, time: f64) -> Self {
        debug_assert_eq!(particles.len(), self.particles.len());
        Self { dim: self.dim, r: self.r, particles, time }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// The same atoms viewed as a general phase-space ensemble.
    pub fn to_phase(&self) -> PhaseEnsemble {
        PhaseEnsemble { dim: self.dim, particles: self.particles.clone(), time: self.time }
    }
}

impl Ensemble for SphereEnsemble {
    fn dim(&self) -> usize {
        self.dim
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn particles(&self) -> &[Particle] {
        &self.particles
    }
}

/// Sends every atom `(x, v, w)` to `(x, r v/|v|, w)`.
///
/// Atoms at `v = 0` are rejected: the limit theory only covers data whose
/// velocity support stays away from the origin.
pub fn project_measure<E: Ensemble>(ens: &E, r: f64) -> Result<SphereEnsemble> {
    let mut particles = Vec::with_capacity(ens.len());
    for (index, p) in ens.particles().iter().enumerate() {
        let speed = p.speed();
        if speed == 0.0 {
            return Err(SwarmError::ZeroVelocityParticle { index });
        }
        particles.push(Particle::new(p.x, p.v * (r / speed), p.w));
    }
    SphereEnsemble::new(ens.dim(), r, particles, ens.time())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mass: f64,
    pub momentum: Vec3,
    pub kinetic_energy: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pos_radius_max: f64,
}

pub fn moments<E: Ensemble + ?Sized>(ens: &E) -> MomentReport {
    let mut report = MomentReport {
        mass: 0.0,
        momentum: Vec3::zeros(),
        kinetic_energy: 0.0,
        speed_min: f64::INFINITY,
        speed_max: 0.0,
        pos_radius_max: 0.0,
    };
    for p in ens.particles() {
        let speed = p.speed();
        report.mass += p.w;
        report.momentum += p.v * p.w;
        report.kinetic_energy += p.w * p.v.norm_squared();
        report.speed_min = report.speed_min.min(speed);
        report.speed_max = report.speed_max.max(speed);
        report.pos_radius_max = report.pos_radius_max.max(p.x.norm());
    }
    if ens.is_empty() {
        report.speed_min = 0.0;
    }
    report
}

/// True iff every particle speed lies in `[lo, hi]`.
pub fn support_in_band<E: Ensemble + ?Sized>(ens: &E, lo: f64, hi: f64) -> Result<bool> {
    if !(lo <= hi) {
        return Err(SwarmError::BadBand(format!("lower edge {lo} exceeds upper edge {hi}")));
    }
    Ok(ens.particles().iter().all(|p| {
        let s = p.speed();
        s >= lo && s <= hi
    }))
}
