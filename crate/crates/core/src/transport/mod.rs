//! Exact Wasserstein-1 distance between weighted empirical measures on
//! phase space, with the Euclidean norm on the concatenated `(x, v)` state.

mod assignment;
mod simplex;
mod study;

pub use study::{
    convergence_study, equicontinuity_constant, equicontinuity_probe, ConvergenceRow, ConvergenceTable,
    EquicontinuityReport, StudyConfig,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Result, SwarmError};

/// Largest combined atom count accepted by [`w1_exact`].
pub const EXACT_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Assignment,
    Lp,
    /// Mean of exact assignments between i.i.d. subsamples.
    Subsampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct W1Report {
    pub value: f64,
    /// `(i, j, mass)` entries of the transport plan.
    pub plan: Vec<(usize, usize, f64)>,
    pub solver: Solver,
    pub iterations: usize,
    /// Duality gap plus the worst reduced-cost violation.
    pub residual: f64,
    /// Standard error, only for subsampled estimates.
    pub std_error: Option<f64>,
}

/// Weighted atoms in `R^{2d}`.
#[derive(Debug, Clone)]
struct Atoms {
    points: Vec<[f64; 6]>,
    weights: Vec<f64>,
    width: usize,
}

impl Atoms {
    fn of<E: Ensemble + ?Sized>(ens: &E) -> Self {
        let d = ens.dim();
        let points = ens
            .particles()
            .iter()
            .map(|p| {
                let mut q = [0.0; 6];
                for k in 0..d {
                    q[k] = p.x[k];
                    q[d + k] = p.v[k];
                }
                q
            })
            .collect();
        Self { points, weights: ens.particles().iter().map(|p| p.w).collect(), width: 2 * d }
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| (x - w).abs() <= 4.0 * f64::EPSILON * w)
    }
}

fn distance(p: &[f64; 6], q: &[f64; 6], width: usize) -> f64 {
    p[..width].iter().zip(&q[..width]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn cost_matrix(mu: &Atoms, nu: &Atoms) -> Vec<f64> {
    let n = nu.len();
    let mut cost = vec![0.0; mu.len() * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, c) in row.iter_mut().enumerate() {
            *c = distance(&mu.points[i], &nu.points[j], mu.width);
        }
    });
    cost
}

fn solve_atoms(mu: &Atoms, nu: &Atoms) -> Result<W1Report> {
    let cost = cost_matrix(mu, nu);
    let (m, n) = (mu.len(), nu.len());
    if m == n && mu.is_uniform() && nu.is_uniform() {
        let a = assignment::solve(&cost, n);
        let mass = 1.0 / n as f64;
        let plan: Vec<_> = a.col_of.iter().enumerate().map(|(i, &j)| (i, j, mass)).collect();
        let primal: f64 = plan.iter().map(|&(i, j, _)| cost[i * n + j]).sum();
        let dual: f64 = a.u.iter().sum::<f64>() + a.v.iter().sum::<f64>();
        let violation = dual_violation(&cost, &a.u, &a.v, n);
        return Ok(W1Report {
            value: primal * mass,
            plan,
            solver: Solver::Assignment,
            iterations: a.iterations,
            residual: ((primal - dual).abs() + violation) * mass,
            std_error: None,
        });
    }
    let sol = simplex::solve(&mu.weights, &nu.weights, &cost)?;
    let value: f64 = sol.flows.iter().map(|&(i, j, x)| x * cost[i * n + j]).sum();
    let dual: f64 = mu.weights.iter().zip(&sol.u).map(|(a, u)| a * u).sum::<f64>()
        + nu.weights.iter().zip(&sol.v).map(|(b, v)| b * v).sum::<f64>();
    let violation = dual_violation(&cost, &sol.u, &sol.v, n);
    Ok(W1Report {
        value,
        plan: sol.flows,
        solver: Solver::Lp,
        iterations: sol.iterations,
        residual: (value - dual).abs() + violation,
        std_error: None,
    })
}

fn dual_violation(cost: &[f64], u: &[f64], v: &[f64], n: usize) -> f64 {
    cost.par_chunks(n)
        .enumerate()
        .map(|(i, row)| row.iter().zip(v).map(|(c, vj)| (u[i] + vj - c).max(0.0)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

fn check_dims<A: Ensemble + ?Sized, B: Ensemble + ?Sized>(mu: &A, nu: &B) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(SwarmError::DimensionMismatch { left: mu.dim(), right: nu.dim() });
    }
    Ok(())
}

/// Exact `W1(mu, nu)`: min-cost assignment for equal-size uniform ensembles,
/// network simplex otherwise.
pub fn w1_exact<A: Ensemble + ?Sized, B: Ensemble + ?Sized>(mu: &A, nu: &B) -> Result<W1Report> {
    check_dims(mu, nu)?;
    let total = mu.len() + nu.len();
    if total > EXACT_LIMIT {
        return Err(SwarmError::TooLarge { total, limit: EXACT_LIMIT });
    }
    solve_atoms(&Atoms::of(mu), &Atoms::of(nu))
}

fn resample(atoms: &Atoms, k: usize, rng: &mut ChaCha8Rng) -> Atoms {
    let mut cdf = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for w in &atoms.weights {
        acc += w;
        cdf.push(acc);
    }
    let points = (0..k)
        .map(|_| {
            let t = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= t).min(atoms.len() - 1);
            atoms.points[idx]
        })
        .collect();
    Atoms { points, weights: vec![1.0 / k as f64; k], width: atoms.width }
}

/// Estimate of `W1` from `replicates` pairs of i.i.d. `sample_size`-atom
/// subsamples. Biased upward at small sample sizes; the reported standard
/// error covers sampling noise only.
pub fn w1_subsampled<A: Ensemble + ?Sized, B: Ensemble + ?Sized>(
    mu: &A,
    nu: &B,
    sample_size: usize,
    replicates: usize,
    seed: u64,
) -> Result<W1Report> {
    check_dims(mu, nu)?;
    if sample_size == 0 || 2 * sample_size > EXACT_LIMIT || replicates < 2 {
        return Err(SwarmError::BadConfig(format!(
            "subsampling needs 1 <= sample size <= {} and at least 2 replicates",
            EXACT_LIMIT / 2
        )));
    }
    let (a, b) = (Atoms::of(mu), Atoms::of(nu));
    let base = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = base.clone();
            rng.set_stream(k as u64);
            let (sa, sb) = (resample(&a, sample_size, &mut rng), resample(&b, sample_size, &mut rng));
            solve_atoms(&sa, &sb).map(|r| (r.value, r.iterations))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.0).sum::<f64>() / n;
    let var = values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(W1Report {
        value: mean,
        plan: Vec::new(),
        solver: Solver::Subsampled,
        iterations: values.iter().map(|v| v.1).sum(),
        residual: 0.0,
        std_error: Some((var / n).sqrt()),
    })
}

/// Exact when the atom budget allows, otherwise a flagged subsampled estimate.
pub fn w1<A: Ensemble + ?Sized, B: Ensemble + ?Sized>(mu: &A, nu: &B, seed: u64) -> Result<W1Report> {
    match w1_exact(mu, nu) {
        Err(SwarmError::TooLarge { .. }) => w1_subsampled(mu, nu, EXACT_LIMIT / 2, 16, seed),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Particle, PhaseEnsemble, Vec3};

    fn cloud(n: usize, shift: f64, salt: u64) -> PhaseEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(salt);
        let states: Vec<_> = (0..n)
            .map(|_| {
                let x = Vec3::new(rng.random::<f64>() + shift, rng.random(), 0.0);
                let v = Vec3::new(rng.random(), rng.random::<f64>() - 0.5, 0.0);
                (x, v)
            })
            .collect();
        PhaseEnsemble::uniform(2, states).unwrap()
    }

    #[test]
    fn single_pair() {
        let a = PhaseEnsemble::uniform(2, [(Vec3::zeros(), Vec3::zeros())]).unwrap();
        let b = PhaseEnsemble::uniform(2, [(Vec3::new(3.0, 4.0, 0.0), Vec3::zeros())]).unwrap();
        let r = w1_exact(&a, &b).unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!(r.plan, vec![(0, 0, 1.0)]);
    }

    #[test]
    fn identical_is_zero_and_translation_is_shift() {
        let a = cloud(40, 0.0, 1);
        assert_eq!(w1_exact(&a, &a).unwrap().value, 0.0);
        let u = Vec3::new(0.3, -0.4, 0.0);
        let moved: Vec<_> = a.particles().iter().map(|p| Particle::new(p.x + u, p.v, p.w)).collect();
        let b = PhaseEnsemble::new(2, moved, 0.0).unwrap();
        assert!((w1_exact(&a, &b).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lp_matches_assignment_on_uniform_data() {
        let (a, b) = (cloud(30, 0.0, 2), cloud(30, 0.2, 3));
        let (pa, pb) = (Atoms::of(&a), Atoms::of(&b));
        let exact = w1_exact(&a, &b).unwrap();
        assert_eq!(exact.solver, Solver::Assignment);
        let cost = cost_matrix(&pa, &pb);
        let lp = simplex::solve(&pa.weights, &pb.weights, &cost).unwrap();
        let value: f64 = lp.flows.iter().map(|&(i, j, x)| x * cost[i * 30 + j]).sum();
        assert!((value - exact.value).abs() < 1e-12);
    }

    #[test]
    fn weighted_lp_equals_assignment_on_expanded_atoms() {
        // Weights k/12 expanded into k copies of each atom.
        let counts_a = [3usize, 1, 5, 3];
        let counts_b = [2usize, 2, 2, 4, 2];
        let a_small = cloud(4, 0.0, 5);
        let b_small = cloud(5, 0.5, 6);
        let reweigh = |e: &PhaseEnsemble, counts: &[usize]| {
            let ps = e.particles().iter().zip(counts).map(|(p, &c)| Particle::new(p.x, p.v, c as f64 / 12.0)).collect();
            PhaseEnsemble::new(2, ps, 0.0).unwrap()
        };
        let expand = |e: &PhaseEnsemble, counts: &[usize]| {
            let states = e.particles().iter().zip(counts).flat_map(|(p, &c)| std::iter::repeat_n((p.x, p.v), c));
            PhaseEnsemble::uniform(2, states.collect::<Vec<_>>()).unwrap()
        };
        let lp = w1_exact(&reweigh(&a_small, &counts_a), &reweigh(&b_small, &counts_b)).unwrap();
        let asg = w1_exact(&expand(&a_small, &counts_a), &expand(&b_small, &counts_b)).unwrap();
        assert_eq!(lp.solver, Solver::Lp);
        assert_eq!(asg.solver, Solver::Assignment);
        assert!((lp.value - asg.value).abs() < 1e-12, "{} vs {}", lp.value, asg.value);
        assert!(lp.residual < 1e-12);
    }

    #[test]
    fn plan_invariants() {
        let (a, b) = (cloud(25, 0.0, 8), cloud(25, 1.0, 9));
        let r = w1_exact(&a, &b).unwrap();
        let mut rows = [0.0; 25];
        let mut cols = [0.0; 25];
        let mut value = 0.0;
        let (pa, pb) = (Atoms::of(&a), Atoms::of(&b));
        for &(i, j, x) in &r.plan {
            rows[i] += x;
            cols[j] += x;
            value += x * distance(&pa.points[i], &pb.points[j], 4);
        }
        assert!(rows.iter().chain(&cols).all(|m| (m - 0.04).abs() < 1e-12));
        assert!((value - r.value).abs() < 1e-12);
        assert!(r.residual < 1e-12);
        // No 2-swap improves the assignment.
        for (i1, j1, _) in &r.plan {
            for (i2, j2, _) in &r.plan {
                let d = |i: usize, j: usize| distance(&pa.points[i], &pb.points[j], 4);
                assert!(d(*i1, *j2) + d(*i2, *j1) >= d(*i1, *j1) + d(*i2, *j2) - 1e-12);
            }
        }
    }

    #[test]
    fn errors() {
        let a = cloud(3, 0.0, 1);
        let b = PhaseEnsemble::uniform(3, [(Vec3::zeros(), Vec3::zeros())]).unwrap();
        assert!(matches!(w1_exact(&a, &b), Err(SwarmError::DimensionMismatch { .. })));
        let big = cloud(1100, 0.0, 2);
        assert!(matches!(w1_exact(&big, &big), Err(SwarmError::TooLarge { total: 2200, limit: 2048 })));
    }

    #[test]
    fn subsampled_estimate_is_flagged_and_reproducible() {
        let (a, b) = (cloud(300, 0.0, 11), cloud(300, 0.7, 12));
        let exact = w1_exact(&a, &b).unwrap().value;
        let est = w1_subsampled(&a, &b, 200, 8, 5).unwrap();
        assert_eq!(est.solver, Solver::Subsampled);
        assert_eq!(est, w1_subsampled(&a, &b, 200, 8, 5).unwrap());
        let se = est.std_error.unwrap();
        assert!(se > 0.0);
        assert!(est.value > exact - 6.0 * se && est.value < exact + 0.2);
    }
}
