//! Interaction potential `U`, alignment weight `h`, and the mean-field
//! acceleration
//!
//! ```text
//! a_i = -sum_j w_j grad U(x_i - x_j) + sum_j w_j h(x_i - x_j) (v_j - v_i)
//! ```
//!
//! Both builtin families are radial, so `h` is even and `grad U(0) = 0`; the
//! `j = i` term is kept in the sums and contributes nothing.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, Particle, Vec3};
use crate::error::{Result, SwarmError};

/// A builtin kernel selected by name with named numeric parameters, as it
/// appears in the `kernels` section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelChoice {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl KernelChoice {
    pub fn new(name: &str, params: &[(&str, f64)]) -> Self {
        Self { name: name.into(), params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }
}

fn bad(name: &str, reason: impl Into<String>) -> SwarmError {
    SwarmError::BadKernelParams { name: name.into(), reason: reason.into() }
}

fn take_params<const N: usize>(choice: &KernelChoice, keys: [&str; N], defaults: [Option<f64>; N]) -> Result<[f64; N]> {
    if let Some(extra) = choice.params.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(bad(&choice.name, format!("unknown parameter `{extra}`")));
    }
    let mut out = [0.0; N];
    for (slot, (key, default)) in out.iter_mut().zip(keys.iter().zip(defaults)) {
        *slot = match (choice.params.get(*key), default) {
            (Some(v), _) => *v,
            (None, Some(d)) => d,
            (None, None) => return Err(bad(&choice.name, format!("missing parameter `{key}`"))),
        };
        if !slot.is_finite() {
            return Err(bad(&choice.name, format!("parameter `{key}` is not finite")));
        }
    }
    Ok(out)
}

/// `U(x) = -c_a exp(-|x|^2/l_a^2) + c_r exp(-|x|^2/l_r^2)` or `U = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Zero,
    GaussianAttractionRepulsion { c_a: f64, l_a: f64, c_r: f64, l_r: f64 },
}

/// One signed Gaussian term `c exp(-|x|^2/l^2)`.
#[derive(Clone, Copy)]
struct Gaussian {
    c: f64,
    l: f64,
}

impl Gaussian {
    fn value(self, x: &Vec3) -> f64 {
        self.c * (-x.norm_squared() / (self.l * self.l)).exp()
    }

    fn gradient(self, x: &Vec3) -> Vec3 {
        let l2 = self.l * self.l;
        x * (-2.0 * self.c / l2 * (-x.norm_squared() / l2).exp())
    }

    fn hessian(self, x: &Vec3) -> Matrix3<f64> {
        let l2 = self.l * self.l;
        let g = -2.0 * self.c / l2 * (-x.norm_squared() / l2).exp();
        (Matrix3::identity() - x * x.transpose() * (2.0 / l2)) * g
    }

    // Tangential Hessian eigenvalue U'/rho peaks at the origin with 2|c|/l^2 and
    // dominates the radial one (4 e^{-3/2} |c|/l^2 at rho^2 = 3 l^2/2).
    fn hessian_sup(self) -> f64 {
        2.0 * self.c.abs() / (self.l * self.l)
    }

    // |U'| = 2|c| rho/l^2 exp(-rho^2/l^2), maximal at rho = l/sqrt 2.
    fn gradient_sup(self) -> f64 {
        std::f64::consts::SQRT_2 * self.c.abs() * (-0.5f64).exp() / self.l
    }
}

impl Potential {
    pub fn builtin(choice: &KernelChoice) -> Result<Self> {
        match choice.name.as_str() {
            "zero_potential" => {
                take_params(choice, [], [])?;
                Ok(Potential::Zero)
            }
            "gaussian_attraction_repulsion" => {
                let [c_a, l_a, c_r, l_r] =
                    take_params(choice, ["c_a", "l_a", "c_r", "l_r"], [None, None, Some(0.0), Some(1.0)])?;
                if l_a <= 0.0 || l_r <= 0.0 {
                    return Err(bad(&choice.name, "length scales must be positive"));
                }
                if c_a < 0.0 || c_r < 0.0 {
                    return Err(bad(&choice.name, "strengths must be nonnegative"));
                }
                Ok(Potential::GaussianAttractionRepulsion { c_a, l_a, c_r, l_r })
            }
            other => Err(bad(other, "not a builtin potential")),
        }
    }

    fn terms(&self) -> [Gaussian; 2] {
        match *self {
            Potential::Zero => [Gaussian { c: 0.0, l: 1.0 }; 2],
            Potential::GaussianAttractionRepulsion { c_a, l_a, c_r, l_r } => {
                [Gaussian { c: -c_a, l: l_a }, Gaussian { c: c_r, l: l_r }]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms().iter().all(|g| g.c == 0.0)
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        self.terms().iter().map(|g| g.value(x)).sum()
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        self.terms().iter().map(|g| g.gradient(x)).sum()
    }

    pub fn hessian(&self, x: &Vec3) -> Matrix3<f64> {
        self.terms().iter().map(|g| g.hessian(x)).sum()
    }
}

/// Alignment weight `h`: constant `k`, or Cucker-Smale `k / (1 + |x|^2)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlignWeight {
    Constant { k: f64 },
    CuckerSmale { k: f64, gamma: f64 },
}

impl AlignWeight {
    pub fn builtin(choice: &KernelChoice) -> Result<Self> {
        match choice.name.as_str() {
            "constant_weight" => {
                let [k] = take_params(choice, ["k"], [Some(1.0)])?;
                if k < 0.0 {
                    return Err(bad(&choice.name, "weight must be nonnegative"));
                }
                Ok(AlignWeight::Constant { k })
            }
            "cucker_smale_weight" => {
                let [k, gamma] = take_params(choice, ["k", "gamma"], [Some(1.0), Some(1.0)])?;
                if k < 0.0 {
                    return Err(bad(&choice.name, "weight must be nonnegative"));
                }
                if gamma <= 0.0 {
                    return Err(bad(&choice.name, "decay exponent gamma must be positive"));
                }
                Ok(AlignWeight::CuckerSmale { k, gamma })
            }
            other => Err(bad(other, "not a builtin alignment weight")),
        }
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        match *self {
            AlignWeight::Constant { k } => k,
            AlignWeight::CuckerSmale { k, gamma } => {
                let base = 1.0 + x.norm_squared();
                if gamma == 1.0 {
                    k / base
                } else {
                    k * base.powf(-gamma)
                }
            }
        }
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        match *self {
            AlignWeight::Constant { .. } => Vec3::zeros(),
            AlignWeight::CuckerSmale { k, gamma } => {
                x * (-2.0 * gamma * k * (1.0 + x.norm_squared()).powf(-gamma - 1.0))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, AlignWeight::Constant { k } | AlignWeight::CuckerSmale { k, .. } if k == 0.0)
    }
}

/// Certified sup-norm constants of the kernel pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelBounds {
    /// `||D^2 U||_inf` (operator norm).
    pub hess_u: f64,
    pub grad_u: f64,
    pub sup_u: f64,
    pub sup_h: f64,
    pub grad_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub potential: Potential,
    pub weight: AlignWeight,
    pub bounds: KernelBounds,
}

impl KernelSpec {
    /// Bounds for the two-term potential add the per-term suprema, which is
    /// exact whenever one of the strengths vanishes.
    pub fn new(potential: Potential, weight: AlignWeight) -> Self {
        let terms = potential.terms();
        let (sup_h, grad_h) = match weight {
            AlignWeight::Constant { k } => (k, 0.0),
            AlignWeight::CuckerSmale { k, gamma } => {
                let rho2 = 1.0 / (2.0 * gamma + 1.0);
                (k, 2.0 * gamma * k * rho2.sqrt() * (1.0 + rho2).powf(-gamma - 1.0))
            }
        };
        let bounds = KernelBounds {
            hess_u: terms.iter().map(|g| g.hessian_sup()).sum(),
            grad_u: terms.iter().map(|g| g.gradient_sup()).sum(),
            sup_u: terms.iter().map(|g| g.c.abs()).sum(),
            sup_h,
            grad_h,
        };
        Self { potential, weight, bounds }
    }

    pub fn from_builtins(potential: &KernelChoice, weight: &KernelChoice) -> Result<Self> {
        Ok(Self::new(Potential::builtin(potential)?, AlignWeight::builtin(weight)?))
    }

    /// `U = 0`, `h = 0`: free particles.
    pub fn free() -> Self {
        Self::new(Potential::Zero, AlignWeight::Constant { k: 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub accel: Vec<Vec3>,
    pub sup_norm: f64,
}

impl FieldSample {
    pub fn from_vectors(accel: Vec<Vec3>) -> Self {
        let sup_norm = accel.iter().map(|a| a.norm()).fold(0.0, f64::max);
        Self { accel, sup_norm }
    }
}

/// `-sum_j w_j grad U(x_i - x_j)` for every particle.
pub fn potential_field(particles: &[Particle], potential: &Potential) -> Vec<Vec3> {
    if potential.is_zero() {
        return vec![Vec3::zeros(); particles.len()];
    }
    particles
        .par_iter()
        .map(|pi| {
            let mut acc = Vec3::zeros();
            for pj in particles {
                acc -= potential.gradient(&(pi.x - pj.x)) * pj.w;
            }
            acc
        })
        .collect()
}

/// `sum_j w_j h(x_i - x_j) (v_j - v_i)` for every particle.
pub fn alignment_field(particles: &[Particle], weight: &AlignWeight) -> Vec<Vec3> {
    match *weight {
        _ if weight.is_zero() => vec![Vec3::zeros(); particles.len()],
        AlignWeight::Constant { k } => {
            // h constant: sum_j w_j (v_j - v_i) = mean - v_i (total weight one).
            let mut mass = 0.0;
            let mut mean = Vec3::zeros();
            for p in particles {
                mass += p.w;
                mean += p.v * p.w;
            }
            particles.iter().map(|p| (mean - p.v * mass) * k).collect()
        }
        AlignWeight::CuckerSmale { .. } => particles
            .par_iter()
            .map(|pi| {
                let mut acc = Vec3::zeros();
                for pj in particles {
                    acc += (pj.v - pi.v) * (pj.w * weight.value(&(pi.x - pj.x)));
                }
                acc
            })
            .collect(),
    }
}

pub fn acceleration_of(particles: &[Particle], spec: &KernelSpec) -> FieldSample {
    let mut accel = potential_field(particles, &spec.potential);
    for (a, b) in accel.iter_mut().zip(alignment_field(particles, &spec.weight)) {
        *a += b;
    }
    FieldSample::from_vectors(accel)
}

pub fn acceleration<E: Ensemble + ?Sized>(ens: &E, spec: &KernelSpec) -> FieldSample {
    acceleration_of(ens.particles(), spec)
}

/// `||grad U|| + ||h|| * max_ij |v_i - v_j|`, an a priori bound on `sup |a_i|`.
pub fn sup_norm_bound<E: Ensemble + ?Sized>(ens: &E, spec: &KernelSpec) -> f64 {
    let ps = ens.particles();
    let mut diam: f64 = 0.0;
    for p in ps {
        for q in ps {
            diam = diam.max((p.v - q.v).norm());
        }
    }
    spec.bounds.grad_u + spec.bounds.sup_h * diam
}

/// Lipschitz constant of `f -> a_f` in W1 for measures whose velocities lie
/// in the ball of radius `speed_radius`:
/// `||D^2 U|| + sqrt(||h||^2 + 4 R^2 ||grad h||^2)`.
pub fn field_gap_bound(bounds: &KernelBounds, speed_radius: f64) -> f64 {
    let r = speed_radius;
    bounds.hess_u + (bounds.sup_h.powi(2) + 4.0 * r * r * bounds.grad_h.powi(2)).sqrt()
}

/// Total energy `sum_i w_i |v_i|^2/2 + 1/2 sum_ij w_i w_j U(x_i - x_j)`.
pub fn total_energy<E: Ensemble + ?Sized>(ens: &E, potential: &Potential) -> f64 {
    let ps = ens.particles();
    let kinetic: f64 = ps.iter().map(|p| 0.5 * p.w * p.v.norm_squared()).sum();
    if potential.is_zero() {
        return kinetic;
    }
    let interaction: f64 = ps
        .par_iter()
        .map(|pi| ps.iter().map(|pj| pi.w * pj.w * potential.value(&(pi.x - pj.x))).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    kinetic + 0.5 * interaction
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::PhaseEnsemble;

    fn v2(a: f64, b: f64) -> Vec3 {
        Vec3::new(a, b, 0.0)
    }

    fn gaussian(c_a: f64, l_a: f64, c_r: f64, l_r: f64) -> Potential {
        Potential::builtin(&KernelChoice::new(
            "gaussian_attraction_repulsion",
            &[("c_a", c_a), ("l_a", l_a), ("c_r", c_r), ("l_r", l_r)],
        ))
        .unwrap()
    }

    #[test]
    fn zero_potential_has_zero_bounds() {
        let spec = KernelSpec::new(Potential::builtin(&KernelChoice::new("zero_potential", &[])).unwrap(), AlignWeight::Constant { k: 1.0 });
        assert_eq!(spec.potential.value(&v2(0.3, 0.1)), 0.0);
        assert_eq!((spec.bounds.hess_u, spec.bounds.grad_u, spec.bounds.sup_u), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cucker_smale_peak_at_origin() {
        let w = AlignWeight::builtin(&KernelChoice::new("cucker_smale_weight", &[("k", 1.0), ("gamma", 1.0)])).unwrap();
        let spec = KernelSpec::new(Potential::Zero, w);
        assert_eq!(w.value(&Vec3::zeros()), 1.0);
        assert_eq!(spec.bounds.sup_h, 1.0);
        assert_eq!(w.value(&v2(1.0, 2.0)), w.value(&v2(-1.0, -2.0)));
    }

    #[test]
    fn bad_kernel_params_rejected() {
        let cases = [
            KernelChoice::new("gaussian_attraction_repulsion", &[("c_a", 1.0), ("l_a", 0.0)]),
            KernelChoice::new("gaussian_attraction_repulsion", &[("c_a", 1.0), ("l_a", 1.0), ("l_r", -2.0)]),
            KernelChoice::new("gaussian_attraction_repulsion", &[("c_a", 1.0), ("l_a", 1.0), ("bogus", 1.0)]),
            KernelChoice::new("gaussian_attraction_repulsion", &[("l_a", 1.0)]),
            KernelChoice::new("morse", &[]),
        ];
        for c in &cases {
            assert!(matches!(Potential::builtin(c), Err(SwarmError::BadKernelParams { .. })), "{c:?}");
        }
        let weights = [
            KernelChoice::new("cucker_smale_weight", &[("gamma", 0.0)]),
            KernelChoice::new("cucker_smale_weight", &[("k", -1.0)]),
            KernelChoice::new("constant_weight", &[("k", -0.5)]),
        ];
        for c in &weights {
            assert!(matches!(AlignWeight::builtin(c), Err(SwarmError::BadKernelParams { .. })), "{c:?}");
        }
    }

    /// Dense radial scan of both Hessian eigenvalues and |U'| against the
    /// closed-form critical-point values.
    #[test]
    fn gaussian_bounds_match_grid_maximization() {
        for (c_a, l_a) in [(1.0, 1.0), (2.5, 0.7)] {
            let u = gaussian(c_a, l_a, 0.0, 1.0);
            let spec = KernelSpec::new(u, AlignWeight::Constant { k: 0.0 });
            let (mut hess, mut grad) = (0.0f64, 0.0f64);
            for k in 0..=200_000 {
                let rho = 6.0 * l_a * k as f64 / 200_000.0;
                let x = v2(rho, 0.0);
                let h = u.hessian(&x);
                hess = hess.max(h[(0, 0)].abs()).max(h[(1, 1)].abs());
                grad = grad.max(u.gradient(&x).norm());
            }
            assert!((hess - spec.bounds.hess_u).abs() < 1e-12 * spec.bounds.hess_u);
            assert!((grad - spec.bounds.grad_u).abs() < 1e-8 * spec.bounds.grad_u);
            assert!((spec.bounds.hess_u - 2.0 * c_a / (l_a * l_a)).abs() < 1e-15);
            // radial eigenvalue critical point rho^2 = 3 l^2 / 2 stays below the bound
            let rc = v2(l_a * 1.5f64.sqrt(), 0.0);
            assert!(u.hessian(&rc)[(0, 0)].abs() < spec.bounds.hess_u);
        }
    }

    #[test]
    fn cucker_smale_gradient_bound_matches_scan() {
        for gamma in [0.5, 1.0, 2.0] {
            let w = AlignWeight::CuckerSmale { k: 1.5, gamma };
            let spec = KernelSpec::new(Potential::Zero, w);
            let scan = (0..=100_000).map(|k| w.gradient(&v2(5.0 * k as f64 / 100_000.0, 0.0)).norm()).fold(0.0, f64::max);
            assert!((scan - spec.bounds.grad_h).abs() < 1e-8 * spec.bounds.grad_h, "gamma {gamma}");
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let u = gaussian(1.0, 1.3, 0.6, 0.5);
        let w = AlignWeight::CuckerSmale { k: 1.0, gamma: 0.8 };
        let x = Vec3::new(0.4, -0.7, 0.2);
        for step in [1e-3, 5e-4] {
            let mut fd_u = Vec3::zeros();
            let mut fd_h = Vec3::zeros();
            for k in 0..3 {
                let e = Vec3::ith(k, step);
                fd_u[k] = (u.value(&(x + e)) - u.value(&(x - e))) / (2.0 * step);
                fd_h[k] = (w.value(&(x + e)) - w.value(&(x - e))) / (2.0 * step);
            }
            assert!((fd_u - u.gradient(&x)).norm() < 5.0 * step * step);
            assert!((fd_h - w.gradient(&x)).norm() < 5.0 * step * step);
        }
    }

    #[test]
    fn two_body_alignment() {
        let ens = PhaseEnsemble::uniform(2, [(Vec3::zeros(), v2(1.0, 0.0)), (Vec3::zeros(), v2(-1.0, 0.0))]).unwrap();
        for weight in [AlignWeight::Constant { k: 1.0 }, AlignWeight::CuckerSmale { k: 1.0, gamma: 1.0 }] {
            let field = acceleration(&ens, &KernelSpec::new(Potential::Zero, weight));
            assert_eq!(field.accel[0], v2(-1.0, 0.0));
            assert_eq!(field.accel[1], v2(1.0, 0.0));
            assert_eq!(field.sup_norm, 1.0);
        }
    }

    #[test]
    fn consensus_gives_zero_alignment() {
        let states = (0..10).map(|k| (v2(k as f64, (k * k) as f64 * 0.1), v2(0.3, -0.2)));
        let ens = PhaseEnsemble::uniform(2, states).unwrap();
        let field = acceleration(&ens, &KernelSpec::new(Potential::Zero, AlignWeight::CuckerSmale { k: 2.0, gamma: 0.5 }));
        assert!(field.accel.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn field_gap_constant() {
        let zero = KernelBounds { hess_u: 0.0, grad_u: 0.0, sup_u: 0.0, sup_h: 0.0, grad_h: 0.0 };
        assert_eq!(field_gap_bound(&zero, 3.0), 0.0);
        let b = KernelBounds { hess_u: 2.0, grad_u: 0.0, sup_u: 0.0, sup_h: 1.0, grad_h: 0.5 };
        assert!((field_gap_bound(&b, 1.0) - (2.0 + 2f64.sqrt())).abs() < 1e-15);
    }
}
