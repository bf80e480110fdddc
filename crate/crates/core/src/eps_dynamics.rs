//! Particle integrator for the eps-scaled kinetic system
//!
//! ```text
//! dX/dt = V,   dV/dt = a(X, V) + (1/eps) (alpha - beta |V|^2) V  [+ sqrt 2 dW]
//! ```
//!
//! The stiff relaxation is advanced with the exact free flow at rescaled
//! time `dt / eps`, so `dt` never has to resolve `eps`. The Strang step is
//! `R(dt/2) K(dt/2) D(dt) K(dt/2) R(dt/2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{moments, Ensemble, ModelParams, MomentReport, Particle, PhaseEnsemble, Vec3};
use crate::error::{Result, SwarmError};
use crate::kernels::{alignment_field, potential_field, total_energy, AlignWeight, KernelSpec};
use crate::noise::{CounterNoise, NoiseSource, ZeroNoise};
use crate::relaxation::free_flow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Strang,
    Lie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRunConfig {
    pub params: ModelParams,
    pub spec: KernelSpec,
    pub dt: f64,
    pub horizon: f64,
    pub snapshot_stride: usize,
    pub diffusion: bool,
    pub rng_seed: u64,
    pub scheme: Scheme,
}

impl EpsRunConfig {
    pub fn new(params: ModelParams, spec: KernelSpec, dt: f64, horizon: f64) -> Self {
        Self { params, spec, dt, horizon, snapshot_stride: 1, diffusion: false, rng_seed: 0, scheme: Scheme::Strang }
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

/// Acceleration at fixed positions. The potential part and the pairwise
/// alignment weights are computed once and reused when the alignment part is
/// re-evaluated at trial velocities.
struct FrozenPositions<'a> {
    spec: &'a KernelSpec,
    positions: Vec<Vec3>,
    potential: Vec<Vec3>,
    /// Row-major `w_j h(x_i - x_j)` and its row sums, for spatially varying weights.
    pairs: Option<(Vec<f64>, Vec<f64>)>,
}

/// Above this many particles the weight matrix is not cached.
const PAIR_CACHE_LIMIT: usize = 4096;

impl<'a> FrozenPositions<'a> {
    fn new(particles: &[Particle], spec: &'a KernelSpec) -> Self {
        let n = particles.len();
        let pairs = match spec.weight {
            AlignWeight::CuckerSmale { .. } if n <= PAIR_CACHE_LIMIT && !spec.weight.is_zero() => {
                let mut m = vec![0.0; n * n];
                let sums = m
                    .par_chunks_mut(n)
                    .zip(particles.par_iter())
                    .map(|(row, pi)| {
                        for (c, pj) in row.iter_mut().zip(particles) {
                            *c = pj.w * spec.weight.value(&(pi.x - pj.x));
                        }
                        row.iter().sum()
                    })
                    .collect();
                Some((m, sums))
            }
            _ => None,
        };
        Self { spec, positions: particles.iter().map(|p| p.x).collect(), potential: potential_field(particles, &spec.potential), pairs }
    }

    /// Reuses `cache` when it was built at the same positions.
    fn reuse(cache: &mut Option<Self>, particles: &[Particle], spec: &'a KernelSpec) {
        let same = cache
            .as_ref()
            .is_some_and(|c| c.positions.len() == particles.len() && c.positions.iter().zip(particles).all(|(x, p)| *x == p.x));
        if !same {
            *cache = Some(Self::new(particles, spec));
        }
    }

    fn field(&self, particles: &[Particle]) -> Vec<Vec3> {
        let mut a = match &self.pairs {
            Some((m, sums)) => {
                let n = particles.len();
                m.par_chunks(n)
                    .zip(particles.par_iter().zip(sums.par_iter()))
                    .map(|(row, (pi, s))| {
                        let mut acc = Vec3::zeros();
                        for (c, pj) in row.iter().zip(particles) {
                            acc += pj.v * *c;
                        }
                        acc - pi.v * *s
                    })
                    .collect()
            }
            None => alignment_field(particles, &self.spec.weight),
        };
        for (ai, pi) in a.iter_mut().zip(&self.potential) {
            *ai += pi;
        }
        a
    }
}

fn sup(field: &[Vec3]) -> f64 {
    field.iter().map(|a| a.norm()).fold(0.0, f64::max)
}

fn relax(particles: &[Particle], tau: f64, params: &ModelParams) -> Result<Vec<Particle>> {
    particles
        .par_iter()
        .map(|p| Ok(Particle { v: free_flow(&p.v, tau, params)?, ..*p }))
        .collect()
}

fn drift(particles: &[Particle], dt: f64) -> Vec<Particle> {
    particles.par_iter().map(|p| Particle { x: p.x + p.v * dt, ..*p }).collect()
}

fn check_nonzero(particles: &[Particle]) -> Result<()> {
    match particles.iter().position(|p| p.v == Vec3::zeros()) {
        Some(index) => Err(SwarmError::ZeroVelocityParticle { index }),
        None => Ok(()),
    }
}

/// Heun half-kick `v <- v + h (a(v) + a(v*))/2 + xi` with `v* = v + h a(v) + xi`,
/// `xi = sqrt(2h) N(0, I)` (zero for deterministic runs). Returns the new
/// particles and `sup |a|` at the start of the kick.
fn kick<'a, N: NoiseSource + ?Sized>(
    cache: &mut Option<FrozenPositions<'a>>,
    particles: &[Particle],
    spec: &'a KernelSpec,
    h: f64,
    dim: usize,
    noise: &N,
    step: u64,
    slot: u32,
) -> (Vec<Particle>, f64) {
    FrozenPositions::reuse(cache, particles, spec);
    let frozen = cache.as_ref().expect("cache filled");
    let a0 = frozen.field(particles);
    let amp = (2.0 * h).sqrt();
    let xi: Vec<Vec3> = (0..particles.len()).into_par_iter().map(|i| noise.gaussian(i, step, slot, dim) * amp).collect();
    let trial: Vec<Particle> = particles
        .par_iter()
        .zip(a0.par_iter().zip(xi.par_iter()))
        .map(|(p, (a, x))| Particle { v: p.v + a * h + x, ..*p })
        .collect();
    let a1 = frozen.field(&trial);
    let out = particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| Particle { v: p.v + (a0[i] + a1[i]) * (0.5 * h) + xi[i], ..*p })
        .collect();
    (out, sup(&a0))
}

/// Explicit Euler kick used by the Lie scheme.
fn euler_kick<N: NoiseSource + ?Sized>(
    particles: &[Particle],
    spec: &KernelSpec,
    h: f64,
    dim: usize,
    noise: &N,
    step: u64,
) -> (Vec<Particle>, f64) {
    let a = FrozenPositions::new(particles, spec).field(particles);
    let amp = (2.0 * h).sqrt();
    let out = particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| Particle { v: p.v + a[i] * h + noise.gaussian(i, step, 0, dim) * amp, ..*p })
        .collect();
    (out, sup(&a))
}

/// One step with an explicit noise source; returns the new snapshot and the
/// largest `|a_i|` seen by the kicks.
pub fn advance<N: NoiseSource + ?Sized>(
    ens: &PhaseEnsemble,
    cfg: &EpsRunConfig,
    step_index: u64,
    noise: &N,
) -> Result<(PhaseEnsemble, f64)> {
    advance_cached(ens, cfg, step_index, noise, &mut None)
}

fn advance_cached<'a, N: NoiseSource + ?Sized>(
    ens: &PhaseEnsemble,
    cfg: &'a EpsRunConfig,
    step_index: u64,
    noise: &N,
    cache: &mut Option<FrozenPositions<'a>>,
) -> Result<(PhaseEnsemble, f64)> {
    let dt = cfg.dt;
    let eps = cfg.params.eps();
    let dim = ens.dim();
    let spec = &cfg.spec;
    let (particles, a_sup) = match cfg.scheme {
        Scheme::Strang => {
            let half = 0.5 * dt;
            let p = relax(ens.particles(), half / eps, &cfg.params)?;
            let (p, s0) = kick(cache, &p, spec, half, dim, noise, step_index, 0);
            check_nonzero(&p)?;
            let p = drift(&p, dt);
            let (p, s1) = kick(cache, &p, spec, half, dim, noise, step_index, 1);
            check_nonzero(&p)?;
            (relax(&p, half / eps, &cfg.params)?, s0.max(s1))
        }
        Scheme::Lie => {
            let p = drift(ens.particles(), dt);
            let (p, s) = euler_kick(&p, spec, dt, dim, noise, step_index);
            check_nonzero(&p)?;
            (relax(&p, dt / eps, &cfg.params)?, s)
        }
    };
    let time = (step_index + 1) as f64 * dt;
    Ok((ens.evolved(particles, time), a_sup))
}

/// Deterministic step.
pub fn step(ens: &PhaseEnsemble, cfg: &EpsRunConfig) -> Result<PhaseEnsemble> {
    let index = (ens.time() / cfg.dt).round() as u64;
    advance(ens, cfg, index, &ZeroNoise).map(|(e, _)| e)
}

/// Stochastic step: each half-kick adds `sqrt 2 * N(0, (dt/2) I)`, so the
/// velocity generator gains `Delta_v`.
pub fn step_diffusive<N: NoiseSource + ?Sized>(
    ens: &PhaseEnsemble,
    cfg: &EpsRunConfig,
    step_index: u64,
    noise: &N,
) -> Result<PhaseEnsemble> {
    advance(ens, cfg, step_index, noise).map(|(e, _)| e)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: EpsRunConfig,
    pub snapshots: Vec<PhaseEnsemble>,
    pub moments: Vec<MomentReport>,
    pub energy: Vec<f64>,
    /// Largest `|a_i|` over all kicks of the run.
    pub field_sup: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }
}

/// Runs `cfg.n_steps()` steps, calling `observe(step, snapshot)` for the
/// initial datum (step 0) and after every step. Returns the final snapshot
/// and the measured field sup.
pub fn integrate(
    f_in: &PhaseEnsemble,
    cfg: &EpsRunConfig,
    mut observe: impl FnMut(usize, &PhaseEnsemble),
) -> Result<(PhaseEnsemble, f64)> {
    cfg.validate()?;
    check_nonzero(f_in.particles())?;
    let counter = CounterNoise::new(cfg.rng_seed);
    let noise: &dyn NoiseSource = if cfg.diffusion { &counter } else { &ZeroNoise };
    let mut current = f_in.clone().with_time(0.0);
    let mut field_sup: f64 = 0.0;
    let mut cache = None;
    observe(0, &current);
    for k in 0..cfg.n_steps() {
        let (next, a) = advance_cached(&current, cfg, k as u64, noise, &mut cache)?;
        field_sup = field_sup.max(a);
        current = next;
        observe(k + 1, &current);
    }
    Ok((current, field_sup))
}

/// Push-forward of `f_in` along the discrete characteristics, recorded every
/// `snapshot_stride` steps and at the horizon.
pub fn simulate(f_in: &PhaseEnsemble, cfg: &EpsRunConfig) -> Result<Trajectory> {
    let n = cfg.n_steps();
    let mut snapshots = Vec::new();
    let (_, field_sup) = integrate(f_in, cfg, |k, ens| {
        if k % cfg.snapshot_stride == 0 || k == n {
            snapshots.push(ens.clone());
        }
    })?;
    let moments = snapshots.iter().map(moments).collect();
    let energy = snapshots.iter().map(|s| total_energy(s, &cfg.spec.potential)).collect();
    Ok(Trajectory { config: cfg.clone(), snapshots, moments, energy, field_sup })
}
