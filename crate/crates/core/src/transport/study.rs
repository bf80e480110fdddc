//! Experiment harness: `W1` between eps-runs and the limit run, and the
//! empirical time-Lipschitz constant of a trajectory.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::w1;
use crate::ensemble::{project_measure, Ensemble, ModelParams, PhaseEnsemble, SphereEnsemble};
use crate::eps_dynamics::{integrate, EpsRunConfig, Scheme};
use crate::error::{Result, SwarmError};
use crate::kernels::KernelSpec;
use crate::relaxation::trapping_band;
use crate::sphere::{integrate_limit, SphereRunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// `eps` is replaced by each entry of the sweep.
    pub params: ModelParams,
    pub spec: KernelSpec,
    pub dt: f64,
    pub scheme: Scheme,
    pub diffusion: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub t: f64,
    pub w1: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    /// Grouped by `t`; within a group `eps` strictly decreases.
    pub rows: Vec<ConvergenceRow>,
    pub n: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl ConvergenceTable {
    /// `W1` values at time `t`, in sweep order.
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        self.rows.iter().filter(|r| r.t == t).map(|r| r.w1).collect()
    }
}

fn step_indices(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    t_grid
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if !(t >= 0.0) || (k * dt - t).abs() > 1e-9 * t.max(1.0) {
                return Err(SwarmError::BadConfig(format!("t = {t} is not a nonnegative multiple of dt = {dt}")));
            }
            Ok(k as usize)
        })
        .collect()
}

fn pick<T: Clone>(indices: &[usize], k: usize, ens: &T, store: &mut [Option<T>]) {
    for (slot, &idx) in store.iter_mut().zip(indices) {
        if idx == k {
            *slot = Some(ens.clone());
        }
    }
}

/// For each `eps` and `t`, `W1(f_eps(t), f(t))` where the eps-run starts from
/// `f_in` and the limit run from its projection onto `r S`.
pub fn convergence_study(
    f_in: &PhaseEnsemble,
    eps_list: &[f64],
    t_grid: &[f64],
    cfg: &StudyConfig,
) -> Result<ConvergenceTable> {
    if eps_list.is_empty() || t_grid.is_empty() {
        return Err(SwarmError::BadConfig("empty eps list or time grid".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(SwarmError::BadConfig("eps list must be strictly decreasing".into()));
    }
    let indices = step_indices(t_grid, cfg.dt)?;
    let last = *indices.iter().max().unwrap();
    let horizon = last.max(1) as f64 * cfg.dt;

    let limit_cfg = SphereRunConfig {
        snapshot_stride: 1,
        diffusion: cfg.diffusion,
        rng_seed: cfg.seed,
        ..SphereRunConfig::new(cfg.params, cfg.spec, cfg.dt, horizon)
    };
    let mut limit: Vec<Option<SphereEnsemble>> = vec![None; indices.len()];
    integrate_limit(&project_measure(f_in, cfg.params.r())?, &limit_cfg, |k, e| pick(&indices, k, e, &mut limit))?;
    let limit: Vec<SphereEnsemble> = limit.into_iter().map(|s| s.expect("limit snapshot recorded")).collect();

    let per_eps = eps_list
        .par_iter()
        .map(|&eps| {
            let clock = Instant::now();
            let eps_cfg = EpsRunConfig {
                scheme: cfg.scheme,
                diffusion: cfg.diffusion,
                rng_seed: cfg.seed,
                ..EpsRunConfig::new(cfg.params.with_eps(eps)?, cfg.spec, cfg.dt, horizon)
            };
            let mut snaps: Vec<Option<PhaseEnsemble>> = vec![None; indices.len()];
            integrate(f_in, &eps_cfg, |k, e| pick(&indices, k, e, &mut snaps))?;
            let w1s = snaps
                .iter()
                .zip(&limit)
                .map(|(s, l)| w1(s.as_ref().expect("eps snapshot recorded"), l, cfg.seed).map(|r| r.value))
                .collect::<Result<Vec<_>>>()?;
            Ok((w1s, clock.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(eps_list.len() * t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        for (ei, &eps) in eps_list.iter().enumerate() {
            rows.push(ConvergenceRow { eps, t, w1: per_eps[ei].0[ti], runtime_ms: per_eps[ei].1 });
        }
    }
    Ok(ConvergenceTable { rows, n: f_in.len(), seed: cfg.seed, config_hash: String::new() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquicontinuityReport {
    pub max_ratio: f64,
    /// `(t, s, W1, W1 / |t - s|)` per requested pair.
    pub ratios: Vec<(f64, f64, f64, f64)>,
}

fn find<E: Ensemble>(snapshots: &[E], t: f64) -> Result<&E> {
    snapshots
        .iter()
        .find(|s| (s.time() - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or(SwarmError::MissingSnapshot(t))
}

/// Largest `W1(f(t), f(s)) / |t - s|` over the requested pairs.
pub fn equicontinuity_probe<E: Ensemble>(snapshots: &[E], t_pairs: &[(f64, f64)]) -> Result<EquicontinuityReport> {
    let mut ratios = Vec::with_capacity(t_pairs.len());
    for &(t, s) in t_pairs {
        if t == s {
            return Err(SwarmError::BadConfig(format!("pair ({t}, {s}) has no time separation")));
        }
        let value = w1(find(snapshots, t)?, find(snapshots, s)?, 0)?.value;
        ratios.push((t, s, value, value / (t - s).abs()));
    }
    let max_ratio = ratios.iter().map(|r| r.3).fold(0.0, f64::max);
    Ok(EquicontinuityReport { max_ratio, ratios })
}

/// `A + beta (r + R0) R0 max((rho3 - r)/eps, (r - rho2)/eps) + R0` with the
/// band roots taken at forcing `A`.
pub fn equicontinuity_constant(forcing_sup: f64, big_r0: f64, params: &ModelParams) -> Result<f64> {
    let (eps, r) = (params.eps(), params.r());
    let (lo, hi) = trapping_band(eps, forcing_sup, params)?;
    let spread = ((hi - r) / eps).max((r - lo) / eps);
    Ok(forcing_sup.abs() + params.beta() * (r + big_r0) * big_r0 * spread + big_r0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Vec3;
    use crate::kernels::{AlignWeight, Potential};
    use crate::sphere::simulate_limit;

    fn ring(n: usize, r: f64) -> PhaseEnsemble {
        let states = (0..n).map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            (Vec3::new((3.0 * a).cos(), (2.0 * a).sin(), 0.0), Vec3::new((a + 0.3).cos(), (a + 0.3).sin(), 0.0) * r)
        });
        PhaseEnsemble::uniform(2, states.collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn well_prepared_start_is_exact() {
        let cfg = StudyConfig {
            params: ModelParams::new(1.0, 1.0, 1.0).unwrap(),
            spec: KernelSpec::new(Potential::Zero, AlignWeight::Constant { k: 1.0 }),
            dt: 0.01,
            scheme: Scheme::Strang,
            diffusion: false,
            seed: 0,
        };
        let table = convergence_study(&ring(16, 1.0), &[0.1, 0.05], &[0.0, 0.2], &cfg).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(table.at_time(0.0).iter().all(|&w| w < 1e-15));
        assert!(table.at_time(0.2).iter().all(|&w| w >= 0.0));
        assert!(convergence_study(&ring(4, 1.0), &[0.05, 0.1], &[0.0], &cfg).is_err());
        assert!(convergence_study(&ring(4, 1.0), &[0.1], &[0.015], &cfg).is_err());
    }

    #[test]
    fn free_transport_ratio_is_speed() {
        let f = project_measure(&ring(12, 1.0), 1.5).unwrap();
        let cfg = SphereRunConfig { snapshot_stride: 10, ..SphereRunConfig::new(ModelParams::new(2.25, 1.0, 1.0).unwrap(), KernelSpec::free(), 0.01, 0.5) };
        let traj = simulate_limit(&f, &cfg).unwrap();
        let report = equicontinuity_probe(&traj.snapshots, &[(0.0, 0.1), (0.1, 0.4), (0.2, 0.3)]).unwrap();
        assert!(report.max_ratio <= 1.5 + 1e-9);
        assert!(matches!(equicontinuity_probe(&traj.snapshots, &[(0.0, 0.05)]), Err(SwarmError::MissingSnapshot(t)) if t == 0.05));
        let same = equicontinuity_probe(&[f.clone(), f.evolved(f.particles().to_vec(), 1.0)], &[(0.0, 1.0)]).unwrap();
        assert_eq!(same.max_ratio, 0.0);
    }

    #[test]
    fn constant_reduces_to_speed_without_forcing() {
        let p = ModelParams::new(1.0, 1.0, 0.01).unwrap();
        assert_eq!(equicontinuity_constant(0.0, 1.5, &p).unwrap(), 1.5);
        let c = equicontinuity_constant(1.0, 1.5, &p).unwrap();
        // Band half-width about eps/2 gives roughly A + 2.5 * 1.5 * 0.5 + R0.
        assert!((c - (1.0 + 1.875 + 1.5)).abs() < 0.05);
    }
}
