//! Seeded initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall, UnitCircle, UnitDisc, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::ensemble::{PhaseEnsemble, Vec3};
use crate::error::{Result, SwarmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitDistribution {
    UniformAnnulus,
    OnSphere,
    TwoClusters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub n: usize,
    pub dim: usize,
    /// Positions lie in the ball of radius `l0`.
    pub l0: f64,
    pub r0: f64,
    pub big_r0: f64,
    pub distribution: InitDistribution,
    pub seed: u64,
}

fn direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec3 {
    if dim == 2 {
        let [a, b]: [f64; 2] = UnitCircle.sample(rng);
        Vec3::new(a, b, 0.0)
    } else {
        Vec3::from(UnitSphere.sample(rng))
    }
}

fn position(dim: usize, l0: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    if dim == 2 {
        let [a, b]: [f64; 2] = UnitDisc.sample(rng);
        Vec3::new(a, b, 0.0) * l0
    } else {
        Vec3::from(UnitBall.sample(rng)) * l0
    }
}

/// Uniform weights 1/n. `UniformAnnulus` draws speeds uniformly in volume
/// over `[r0, big_r0]`; the other layouts put every speed at `r`.
pub fn generate(spec: &InitSpec, r: f64) -> Result<PhaseEnsemble> {
    if spec.n == 0 {
        return Err(SwarmError::BadConfig("n must be positive".into()));
    }
    if !(spec.l0 >= 0.0) {
        return Err(SwarmError::BadConfig("L0 must be nonnegative".into()));
    }
    if spec.distribution == InitDistribution::UniformAnnulus && !(0.0 < spec.r0 && spec.r0 < r && r < spec.big_r0) {
        return Err(SwarmError::BadConfig(format!(
            "annulus needs 0 < r0 < r < R0, got r0 = {}, r = {r}, R0 = {}",
            spec.r0, spec.big_r0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim as i32;
    let states: Vec<(Vec3, Vec3)> = (0..spec.n)
        .map(|k| match spec.distribution {
            InitDistribution::UniformAnnulus => {
                let (lo, hi) = (spec.r0.powi(d), spec.big_r0.powi(d));
                let speed = (lo + rng.random::<f64>() * (hi - lo)).powf(1.0 / d as f64);
                (position(spec.dim, spec.l0, &mut rng), direction(spec.dim, &mut rng) * speed)
            }
            InitDistribution::OnSphere => (position(spec.dim, spec.l0, &mut rng), direction(spec.dim, &mut rng) * r),
            InitDistribution::TwoClusters => {
                let side = if k % 2 == 0 { 1.0 } else { -1.0 };
                let centre = Vec3::new(0.5 * side * spec.l0, 0.0, 0.0);
                let heading = Vec3::new(0.0, side, 0.0);
                let x = centre + position(spec.dim, 0.25 * spec.l0, &mut rng);
                let v = (heading + direction(spec.dim, &mut rng) * 0.3).normalize() * r;
                (x, v)
            }
        })
        .collect();
    PhaseEnsemble::uniform(spec.dim, states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Ensemble;

    fn spec(distribution: InitDistribution, dim: usize) -> InitSpec {
        InitSpec { n: 500, dim, l0: 2.0, r0: 0.5, big_r0: 1.5, distribution, seed: 9 }
    }

    #[test]
    fn supports_respect_bounds() {
        for dim in [2, 3] {
            let ann = generate(&spec(InitDistribution::UniformAnnulus, dim), 1.0).unwrap();
            assert!(ann.particles().iter().all(|p| p.x.norm() <= 2.0 && (0.5..=1.5).contains(&p.speed())));
            let sph = generate(&spec(InitDistribution::OnSphere, dim), 1.0).unwrap();
            assert!(sph.particles().iter().all(|p| (p.speed() - 1.0).abs() < 1e-14));
            let two = generate(&spec(InitDistribution::TwoClusters, dim), 1.0).unwrap();
            assert!(two.particles().iter().all(|p| (p.speed() - 1.0).abs() < 1e-14 && p.x.norm() <= 1.5 + 1e-12));
            assert_eq!(ann.dim(), dim);
        }
    }

    #[test]
    fn seeded_and_validated() {
        let s = spec(InitDistribution::UniformAnnulus, 2);
        assert_eq!(generate(&s, 1.0).unwrap(), generate(&s, 1.0).unwrap());
        assert_ne!(generate(&s, 1.0).unwrap(), generate(&InitSpec { seed: 10, ..s }, 1.0).unwrap());
        assert!(generate(&InitSpec { r0: 1.2, ..s }, 1.0).is_err());
    }
}
