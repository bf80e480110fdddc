//! Analysis of the stiff self-propulsion/friction term `(alpha - beta|v|^2) v`.
//!
//! The free flow `dV/ds = (alpha - beta|V|^2) V` has the closed form
//!
//! ```text
//! V(s; v) = r e^{alpha s} / sqrt(|v|^2 (e^{2 alpha s} - 1) + r^2) * v,   s > S(v)
//! S(v)    = ln(1 - r^2/|v|^2) / (2 alpha)   for |v| > r,   -inf otherwise
//! ```
//!
//! and the speed-band structure under a bounded forcing of size `|A|` is
//! governed by the roots of `lambda(rho) = eps A + (alpha - beta rho^2) rho`.

use crate::ensemble::{ModelParams, Vec3};
use crate::error::{Result, SwarmError};

const MAX_BISECTIONS: usize = 200;

/// Relative guard on the flow radicand before declaring blow-up.
const BLOWUP_GUARD: f64 = 1e-12;

pub fn lambda_eps(rho: f64, eps: f64, forcing: f64, params: &ModelParams) -> f64 {
    eps * forcing + (params.alpha() - params.beta() * rho * rho) * rho
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTriple {
    /// Small root in `(0, r/sqrt 3)`; forcing < 0 only.
    pub rho1: Option<f64>,
    /// Sub-equilibrium root in `(r/sqrt 3, r)`; forcing < 0 only.
    pub rho2: Option<f64>,
    /// Super-equilibrium root above `r`; forcing > 0 only.
    pub rho3: Option<f64>,
    pub forcing: f64,
    pub eps: f64,
    /// False when `forcing < 0` and `eps >= 2 alpha r / (|forcing| 3 sqrt 3)`,
    /// in which case `lambda` has no positive zero.
    pub valid: bool,
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    debug_assert!(f_lo * f_hi <= 0.0, "bracket [{lo}, {hi}] does not change sign");
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if f_lo.abs() <= f_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Largest `eps` for which a negative forcing of size `|forcing|` still
/// leaves two positive roots.
pub fn eps_threshold(forcing: f64, params: &ModelParams) -> f64 {
    2.0 * params.alpha() * params.r() / (forcing.abs() * 3.0 * 3f64.sqrt())
}

/// Positive roots of `lambda` by bisection on the sign-change brackets
/// `[0, r/sqrt 3]`, `[r/sqrt 3, r]` (negative forcing) or `[r, inf)` (positive
/// forcing). Zero forcing returns the exact roots `{0, r}`.
pub fn solve_roots(eps: f64, forcing: f64, params: &ModelParams) -> RootTriple {
    let r = params.r();
    let lam = |rho: f64| lambda_eps(rho, eps, forcing, params);
    let mut out = RootTriple { rho1: None, rho2: None, rho3: None, forcing, eps, valid: true };
    if forcing == 0.0 {
        out.rho1 = Some(0.0);
        out.rho2 = Some(r);
        out.rho3 = Some(r);
    } else if forcing < 0.0 {
        if eps >= eps_threshold(forcing, params) {
            out.valid = false;
            return out;
        }
        let peak = r / 3f64.sqrt();
        out.rho1 = Some(bisect(lam, 0.0, peak));
        out.rho2 = Some(bisect(lam, peak, r));
    } else {
        let mut hi = 2.0 * r;
        while lam(hi) > 0.0 {
            hi *= 2.0;
        }
        out.rho3 = Some(bisect(lam, r, hi));
    }
    out
}

/// Limits of `rho1/eps`, `(r - rho2)/eps` and `(rho3 - r)/eps` as `eps -> 0`.
pub fn root_asymptotics(forcing: f64, params: &ModelParams) -> (f64, f64, f64) {
    let a = forcing.abs() / params.alpha();
    (a, 0.5 * a, 0.5 * a)
}

/// The trapping band `[rho2(-A), rho3(A)]` for forcing magnitude `A >= 0`.
pub fn trapping_band(eps: f64, forcing_sup: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let a = forcing_sup.abs();
    if a == 0.0 {
        return Ok((params.r(), params.r()));
    }
    let lower = solve_roots(eps, -a, params);
    match (lower.rho2, solve_roots(eps, a, params).rho3) {
        (Some(lo), Some(hi)) if lower.valid => Ok((lo, hi)),
        _ => Err(SwarmError::BadBand(format!(
            "eps = {eps} is above the threshold {} for forcing {a}",
            eps_threshold(a, params)
        ))),
    }
}

pub fn blowup_time(v: &Vec3, params: &ModelParams) -> f64 {
    let speed2 = v.norm_squared();
    let r2 = params.r().powi(2);
    if speed2 <= r2 {
        f64::NEG_INFINITY
    } else {
        (-r2 / speed2).ln_1p() / (2.0 * params.alpha())
    }
}

fn flow_factor(speed2: f64, s: f64, params: &ModelParams) -> Result<f64> {
    let alpha = params.alpha();
    let r = params.r();
    let r2 = r * r;
    if speed2 == 0.0 {
        return Ok(1.0);
    }
    if s >= 0.0 {
        // Divide through by e^{2 alpha s} so nothing overflows for large s.
        let decay = (-2.0 * alpha * s).exp();
        let radicand = speed2 * -(-2.0 * alpha * s).exp_m1() + r2 * decay;
        Ok(r / radicand.sqrt())
    } else {
        let radicand = r2 + speed2 * (2.0 * alpha * s).exp_m1();
        if radicand <= BLOWUP_GUARD * r2 {
            return Err(SwarmError::FlowBlowup { s, blowup: blowup_time(&Vec3::new(speed2.sqrt(), 0.0, 0.0), params) });
        }
        Ok(r * (alpha * s).exp() / radicand.sqrt())
    }
}

/// Closed-form solution of `dV/ds = (alpha - beta|V|^2) V`, `V(0) = v`.
pub fn free_flow(v: &Vec3, s: f64, params: &ModelParams) -> Result<Vec3> {
    Ok(v * flow_factor(v.norm_squared(), s, params)?)
}

/// Position along the free flow issued from `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub origin: Vec3,
    pub v: Vec3,
    pub s: f64,
    pub blowup_time: f64,
}

impl FlowState {
    pub fn start(origin: Vec3, params: &ModelParams) -> Self {
        Self { origin, v: origin, s: 0.0, blowup_time: blowup_time(&origin, params) }
    }

    pub fn advance(&self, ds: f64, params: &ModelParams) -> Result<Self> {
        let s = self.s + ds;
        if s <= self.blowup_time {
            return Err(SwarmError::FlowBlowup { s, blowup: self.blowup_time });
        }
        Ok(Self { v: free_flow(&self.origin, s, params)?, s, ..*self })
    }
}

/// Worst-case times for a speed starting in `[r0, R0]` to enter
/// `[rho2(-A) - eps, rho3(A) + eps]`:
/// `(eps/(2 beta r0^2)) ln((r - r0)/eps)` from below and
/// `(eps/(2 beta r^2)) ln((R0 - r)/eps)` from above.
pub fn trapping_time_bounds(r0: f64, big_r0: f64, eps: f64, params: &ModelParams) -> Result<(f64, f64)> {
    let r = params.r();
    let beta = params.beta();
    if !(0.0 < r0 && r0 < r && r < big_r0) {
        return Err(SwarmError::BadBand(format!("need 0 < r0 < r < R0, got r0 = {r0}, r = {r}, R0 = {big_r0}")));
    }
    if !(eps > 0.0 && eps < r - r0 && eps < big_r0 - r) {
        return Err(SwarmError::BadBand(format!("eps = {eps} too large for the band [{r0}, {big_r0}] around r = {r}")));
    }
    let t1 = eps / (2.0 * beta * r0 * r0) * ((r - r0) / eps).ln();
    let t2 = eps / (2.0 * beta * r * r) * ((big_r0 - r) / eps).ln();
    Ok((t1, t2))
}

/// Antiderivative of `1 / ((alpha - beta rho^2) rho)`.
fn crossing_primitive(rho: f64, params: &ModelParams) -> f64 {
    (rho.ln() - 0.5 * (params.alpha() - params.beta() * rho * rho).abs().ln()) / params.alpha()
}

/// Flow time needed for the speed to move from `from` to `to`:
/// `int_from^to d rho / ((alpha - beta rho^2) rho)`. Both speeds must lie
/// strictly on the same side of `r`.
pub fn crossing_time(from: f64, to: f64, params: &ModelParams) -> f64 {
    crossing_primitive(to, params) - crossing_primitive(from, params)
}

/// Support radii `0 < r1 < r2 < r < r3 < r4` of a test function `psi`
/// vanishing outside `{r1 <= |v| <= r2} U {r3 <= |v| <= r4}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusSupport {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
}

impl AnnulusSupport {
    pub fn new(r1: f64, r2: f64, r3: f64, r4: f64, params: &ModelParams) -> Result<Self> {
        let r = params.r();
        if !(0.0 < r1 && r1 < r2 && r2 < r && r < r3 && r3 < r4 && r4.is_finite()) {
            return Err(SwarmError::UnsupportedPsi(format!(
                "need 0 < r1 < r2 < r < r3 < r4, got {r1}, {r2}, r = {r}, {r3}, {r4}"
            )));
        }
        Ok(Self { r1, r2, r3, r4 })
    }

    /// `[T(r1 -> r2) + T(r4 -> r3)] * ||psi||`, the sup bound on the adjoint
    /// potential.
    pub fn sup_bound(&self, psi_sup: f64, params: &ModelParams) -> f64 {
        (crossing_time(self.r1, self.r2, params) + crossing_time(self.r4, self.r3, params)) * psi_sup
    }
}

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Bounded solution `phi` of `-(alpha - beta|v|^2) v . grad phi = psi` with
/// `phi(0) = 0`, obtained by integrating `psi` along the free flow over the
/// finite window where the flow crosses the support of `psi`.
pub fn adjoint_potential<F>(psi: F, support: &AnnulusSupport, v: &Vec3, params: &ModelParams, tol: f64) -> Result<f64>
where
    F: Fn(&Vec3) -> f64,
{
    let AnnulusSupport { r1, r2, r3, r4 } = *support;
    let speed = v.norm();
    if speed <= r1 {
        return Ok(0.0);
    }
    let dir = v / speed;
    let psi = &psi;
    let along = |u: Vec3| move |tau: f64| free_flow(&u, tau, params).map(|w| psi(&w)).unwrap_or(0.0);

    // Inside the sphere psi only sees the flow on its way up from r1, and
    // phi is constant along rays on [r2, r].
    let inner = |u_speed: f64| {
        let window = crossing_time(r1, u_speed, params);
        -adaptive_simpson(along(dir * u_speed), -window, 0.0, tol)
    };
    let r = params.r();
    if speed < r {
        return Ok(inner(speed.min(r2)));
    }
    let base = inner(r2);
    if speed <= r3 {
        return Ok(base);
    }
    let u_speed = speed.min(r4);
    let window = crossing_time(u_speed, r3, params);
    Ok(base + adaptive_simpson(along(dir * u_speed), 0.0, window, tol))
}
