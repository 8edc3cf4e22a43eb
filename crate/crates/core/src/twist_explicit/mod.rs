//! Closed-form rotationally symmetric twists `u = ρ(r) e_r(θ + ψ(r))` of an annulus
//! for the unpenalized energy, and the checks they are expected to pass.
//!
//! The inner annulus `a ≤ r ≤ k` (the hedgehog region) is mapped onto the circle of
//! radius `a`; outside it `ρ` increases to `b`.

pub mod fields;
pub mod perturb;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::algebra2d::{winding_index, Mat2, PlanarCurve, Vec2};
use crate::error::{Error, Result};
use crate::numerics::{find_root, integrate_1d, Bracket};

pub use fields::{jacobian_boundary_identity, PolyBump, RadialBump, SmoothBump, TestField, TwistFrameField, ZeroField};
pub use perturb::{
    minimality_battery, perturbation_study, perturbation_test, BatteryKind, BatteryReport, PerturbationGrid,
    PerturbationOutcome, PerturbationStudy,
};

/// Annulus `a < |x| < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub a: f64,
    pub b: f64,
}

impl AnnulusSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("annulus needs 0 < a < b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        // tolerate round-off at the ends
        let slack = 1e-12 * self.b;
        if r < self.a - slack || r > self.b + slack || !r.is_finite() {
            return Err(Error::OutsideDomain { x: r, y: 0.0, domain: "closed annulus [a, b] (radius)" });
        }
        Ok(())
    }
}

/// Parameters of the explicit twist with winding number `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitTwistParams {
    pub n: u32,
    pub omega: f64,
    /// Outer radius of the hedgehog region.
    pub k: f64,
    /// Constant of the first integral `r²ρ̇² + ω²/ρ² − ρ² = c`.
    pub c: f64,
}

impl ExplicitTwistParams {
    /// Parameters for a given `k`, with `ω` chosen so that `ρ(b) = b`.
    pub fn from_k(spec: &AnnulusSpec, n: u32, k: f64) -> Result<Self> {
        let omega = omega_from_k(spec, k)?;
        let a2 = spec.a * spec.a;
        Ok(Self { n, omega, k, c: -a2 + omega * omega / a2 })
    }

    fn coef_a(&self, spec: &AnnulusSpec) -> f64 {
        let a2 = spec.a * spec.a;
        a2 + self.omega * self.omega / a2
    }
}

/// `ω(k)` from the outer boundary condition `ρ(b) = b`.
pub fn omega_from_k(spec: &AnnulusSpec, k: f64) -> Result<f64> {
    let (a, b) = (spec.a, spec.b);
    if !(k > a && k < b) {
        return Err(Error::ParameterOutOfRange(format!("k = {k} must lie in ({a}, {b})")));
    }
    let omega2 = omega2_formula(a, b, k);
    if !(omega2 > 0.0) || !omega2.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("omega^2 = {omega2} at k = {k}")));
    }
    Ok(omega2.sqrt())
}

/// The raw expression for `ω²`, valid for any `k ≠ b` (including `k = a`).
pub fn omega2_formula(a: f64, b: f64, k: f64) -> f64 {
    let (a2, b2, k2) = (a * a, b * b, k * k);
    let s = b2 + k2;
    (4.0 * b2 * b2 * k2 * a2 - a2 * a2 * s * s) / ((b2 - k2) * (b2 - k2))
}

pub fn rho_eval(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> Result<f64> {
    spec.check_radius(r)?;
    Ok(rho_unchecked(p, spec, r))
}

// ρ² = a² + (A/4)(x − 1)²/x with x = r²/k², which avoids cancelling the large
// terms of the expanded form when ω is large.
fn rho_unchecked(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> f64 {
    if r <= p.k {
        return spec.a;
    }
    let x = r * r / (p.k * p.k);
    (spec.a * spec.a + 0.25 * p.coef_a(spec) * (x - 1.0) * (x - 1.0) / x).sqrt()
}

/// `ρ̇(r)`: zero on the plateau, `A(r/k² − k²/r³)/(4ρ)` beyond it.
pub fn rhodot_eval(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> Result<f64> {
    spec.check_radius(r)?;
    Ok(rhodot_unchecked(p, spec, r))
}

fn rhodot_unchecked(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> f64 {
    if r <= p.k {
        return 0.0;
    }
    let k2 = p.k * p.k;
    p.coef_a(spec) * (r / k2 - k2 / (r * r * r)) / (4.0 * rho_unchecked(p, spec, r))
}

pub fn psi_eval(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> Result<f64> {
    spec.check_radius(r)?;
    Ok(psi_unchecked(p, spec, r))
}

fn psi_unchecked(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> f64 {
    let a2 = spec.a * spec.a;
    if r <= p.k {
        return p.omega / a2 * (r / spec.a).ln();
    }
    p.omega / a2 * (p.k / spec.a).ln() + outer_twist(p, spec, r)
}

// arctan(U(r)) − arctan(a²/ω), U = (A r²/k² + B)/(2ω), as a single atan2.
fn outer_twist(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> f64 {
    let a2 = spec.a * spec.a;
    let x = r * r / (p.k * p.k);
    let v = a2 / p.omega;
    let diff = p.coef_a(spec) * (x - 1.0) / (2.0 * p.omega);
    let u = v + diff;
    diff.atan2(1.0 + u * v)
}

/// `ψ̇ = ω/(rρ²)`.
pub fn psidot_eval(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> Result<f64> {
    spec.check_radius(r)?;
    let rho = rho_unchecked(p, spec, r);
    Ok(p.omega / (r * rho * rho))
}

// Derivative of the closed form for ψ itself, independent of ψ̇ = ω/(rρ²).
fn psi_derivative_closed_form(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64) -> f64 {
    let a2 = spec.a * spec.a;
    if r <= p.k {
        return p.omega / (a2 * r);
    }
    let k2 = p.k * p.k;
    let big_a = p.coef_a(spec);
    let big_b = a2 - p.omega * p.omega / a2;
    let u = (big_a * r * r / k2 + big_b) / (2.0 * p.omega);
    let du = big_a * r / (k2 * p.omega);
    du / (1.0 + u * u)
}

/// `ψ(b)` as a function of `k` alone.
pub fn psi_b_of_k(spec: &AnnulusSpec, k: f64) -> Result<f64> {
    let p = ExplicitTwistParams::from_k(spec, 0, k)?;
    Ok(psi_unchecked(&p, spec, spec.b))
}

/// Sample points used to bracket `k`: 64 points between `a + 1e−6(b−a)` and
/// `b − 1e−6(b−a)`, log-spaced in the distance to the pole at `k = b`.
pub fn k_scan(spec: &AnnulusSpec) -> Vec<f64> {
    let w = spec.b - spec.a;
    let (far, near) = ((1.0 - 1e-6) * w, 1e-6 * w);
    (0..64)
        .map(|i| {
            let t = i as f64 / 63.0;
            spec.b - far * (near / far).powf(t)
        })
        .collect()
}

/// Finds the unique `k ∈ (a, b)` with `ψ(b; k) = 2πN`.
pub fn solve_winding_params(spec: &AnnulusSpec, n: u32) -> Result<ExplicitTwistParams> {
    if n == 0 {
        return Err(Error::InvalidArgument("the explicit twist needs N >= 1".into()));
    }
    let target = 2.0 * PI * n as f64;
    let g = |k: f64| psi_b_of_k(spec, k).map_or(f64::NAN, |v| v - target);
    let samples: Vec<(f64, f64)> = k_scan(spec).into_iter().map(|k| (k, g(k))).collect();
    let window = samples
        .windows(2)
        .find(|w| w[0].1.is_finite() && w[1].1.is_finite() && w[0].1 <= 0.0 && w[1].1 >= 0.0)
        .ok_or_else(|| Error::BracketingFailure {
            reason: format!("psi(b; k) - 2 pi N has no sign change for N = {n}"),
            samples: samples.clone(),
        })?;
    let br = Bracket::new(g, window[0].0, window[1].0)?;
    let k = find_root(g, br, 0.0)?;
    ExplicitTwistParams::from_k(spec, n, k)
}

/// Sampled profile `(r, ρ, ρ̇, ψ, ψ̇)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    pub rhodot: Vec<f64>,
    pub psi: Vec<f64>,
    pub psidot: Vec<f64>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `ρ` non-decreasing along the grid.
    pub fn rho_monotone(&self) -> bool {
        self.rho.windows(2).all(|w| w[1] >= w[0])
    }
}

/// `m` equispaced points on `[a, b]`, with `k` inserted.
pub fn radial_grid(spec: &AnnulusSpec, m: usize, k: Option<f64>) -> Vec<f64> {
    let mut g: Vec<f64> = (0..m).map(|i| spec.a + (spec.b - spec.a) * i as f64 / (m - 1) as f64).collect();
    *g.last_mut().unwrap() = spec.b;
    if let Some(k) = k {
        let pos = g.partition_point(|&r| r < k);
        if g.get(pos) != Some(&k) {
            g.insert(pos, k);
        }
    }
    g
}

pub fn profile(p: &ExplicitTwistParams, spec: &AnnulusSpec, grid: &[f64]) -> Result<RadialProfile> {
    let mut out = RadialProfile { r: vec![], rho: vec![], rhodot: vec![], psi: vec![], psidot: vec![] };
    for &r in grid {
        out.r.push(r);
        out.rho.push(rho_eval(p, spec, r)?);
        out.rhodot.push(rhodot_eval(p, spec, r)?);
        out.psi.push(psi_eval(p, spec, r)?);
        out.psidot.push(psidot_eval(p, spec, r)?);
    }
    Ok(out)
}

/// Value, gradient and Jacobian of the twist at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub u: Vec2,
    pub grad: Mat2,
    pub det: f64,
}

pub fn field_eval(p: &ExplicitTwistParams, spec: &AnnulusSpec, x: Vec2) -> Result<FieldValue> {
    let r = x.norm();
    if spec.check_radius(r).is_err() {
        return Err(Error::OutsideDomain { x: x.x, y: x.y, domain: "closed annulus a <= |x| <= b" });
    }
    Ok(field_eval_polar(p, spec, r.clamp(spec.a, spec.b), x.y.atan2(x.x)))
}

/// As [`field_eval`], at polar coordinates `(r, θ)` with `a ≤ r ≤ b` assumed.
pub fn field_eval_polar(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64, theta: f64) -> FieldValue {
    let rho = rho_unchecked(p, spec, r);
    let rhodot = rhodot_unchecked(p, spec, r);
    let psidot = p.omega / (r * rho * rho);
    let phase = theta + psi_unchecked(p, spec, r);
    let (er_t, et_t) = (Vec2::e_r(phase), Vec2::e_theta(phase));
    let (er, et) = (Vec2::e_r(theta), Vec2::e_theta(theta));
    let grad = (rhodot * er_t + rho * psidot * et_t).outer(er) + ((rho / r) * et_t).outer(et);
    FieldValue { u: rho * er_t, grad, det: rho * rhodot / r }
}

/// Maxima over `grid` of `|r²(ρ̇² + ρ²ψ̇² − ρ²/r²) − c|` and `|rρ²ψ̇ − ω|`, with
/// `ρ̇` and `ψ̇` obtained by differentiating the closed forms.
pub fn em_residuals(p: &ExplicitTwistParams, spec: &AnnulusSpec, grid: &[f64]) -> Result<(f64, f64)> {
    let mut worst = (0.0f64, 0.0f64);
    for &r in grid {
        spec.check_radius(r)?;
        let rho = rho_unchecked(p, spec, r);
        let rhodot = rhodot_unchecked(p, spec, r);
        let psidot = psi_derivative_closed_form(p, spec, r);
        let first = r * r * (rhodot * rhodot + rho * rho * psidot * psidot - rho * rho / (r * r)) - p.c;
        let second = r * rho * rho * psidot - p.omega;
        // relative to the size of the constants involved
        worst.0 = worst.0.max(first.abs() / p.c.abs().max(1.0));
        worst.1 = worst.1.max(second.abs() / p.omega.max(1.0));
    }
    Ok(worst)
}

/// Maximum over `grid` of `|r²ρ̇² + ω²/ρ² − ρ² − c|`, scaled like [`em_residuals`].
pub fn first_integral_residual(p: &ExplicitTwistParams, spec: &AnnulusSpec, grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &r in grid {
        let rho = rho_eval(p, spec, r)?;
        let rhodot = rhodot_unchecked(p, spec, r);
        let res = r * r * rhodot * rhodot + p.omega * p.omega / (rho * rho) - rho * rho - p.c;
        worst = worst.max(res.abs() / p.c.abs().max(1.0));
    }
    Ok(worst)
}

/// `2π ∫ r (ρ̇² + ρ²ψ̇² + ρ²/r²) dr` for a general radial map, split at `split`.
pub fn radial_dirichlet_energy(
    rho: impl Fn(f64) -> f64,
    rhodot: impl Fn(f64) -> f64,
    psidot: impl Fn(f64) -> f64,
    spec: &AnnulusSpec,
    split: Option<f64>,
    tol: f64,
) -> Result<f64> {
    let integrand = |r: f64| {
        let (p, pd, sd) = (rho(r), rhodot(r), psidot(r));
        r * (pd * pd + p * p * sd * sd + p * p / (r * r))
    };
    let mut knots = vec![spec.a];
    if let Some(s) = split.filter(|&s| s > spec.a && s < spec.b) {
        knots.push(s);
    }
    knots.push(spec.b);
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += integrate_1d(&integrand, w[0], w[1], tol / (knots.len() - 1) as f64)?;
    }
    Ok(2.0 * PI * total)
}

/// Dirichlet energy `D(u) = ∫|∇u|²` of the explicit twist.
pub fn dirichlet_energy(p: &ExplicitTwistParams, spec: &AnnulusSpec, tol: f64) -> Result<f64> {
    radial_dirichlet_energy(
        |r| rho_unchecked(p, spec, r),
        |r| rhodot_unchecked(p, spec, r),
        |r| {
            let rho = rho_unchecked(p, spec, r);
            p.omega / (r * rho * rho)
        },
        spec,
        Some(p.k),
        tol,
    )
}

/// Rotation `ψ(b) − ψ(k)` performed outside the hedgehog region, and whether it
/// is below a quarter turn.
pub fn quarter_twist_check(p: &ExplicitTwistParams, spec: &AnnulusSpec) -> (f64, bool) {
    let v = psi_unchecked(p, spec, spec.b) - psi_unchecked(p, spec, p.k);
    (v, v > 0.0 && v < FRAC_PI_2)
}

/// Radius `r*` with `1/r* = 1/k + a²/(a² + ω²)`.
pub fn r_star(p: &ExplicitTwistParams, spec: &AnnulusSpec) -> f64 {
    let a2 = spec.a * spec.a;
    1.0 / (1.0 / p.k + a2 / (a2 + p.omega * p.omega))
}

/// The closed-form Laplacian inside the hedgehog region, `−(a/r²)(ω²/a² + 1) ẽ_r`,
/// and zero outside it.
pub fn laplacian_closed_form(p: &ExplicitTwistParams, spec: &AnnulusSpec, r: f64, theta: f64) -> Vec2 {
    if r > p.k {
        return Vec2::ZERO;
    }
    let a = spec.a;
    let phase = theta + psi_unchecked(p, spec, r);
    (-(a / (r * r)) * (p.omega * p.omega / (a * a) + 1.0)) * Vec2::e_r(phase)
}

/// Largest deviation of the five-point Laplacian of `u` (spacing `h`) from
/// [`laplacian_closed_form`] over `points`. All stencil points must lie in the
/// annulus and on the same side of `r = k` as the centre.
pub fn laplacian_residual(p: &ExplicitTwistParams, spec: &AnnulusSpec, points: &[Vec2], h: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in points {
        let r = x.norm();
        for dx in [Vec2::new(h, 0.0), Vec2::new(-h, 0.0), Vec2::new(0.0, h), Vec2::new(0.0, -h)] {
            let rr = (x + dx).norm();
            if rr < spec.a || rr > spec.b || (rr <= p.k) != (r <= p.k) {
                return Err(Error::InvalidArgument(format!(
                    "stencil at ({}, {}) with h = {h} leaves its smooth region",
                    x.x, x.y
                )));
            }
        }
        let u = |y: Vec2| field_eval(p, spec, y).map(|f| f.u);
        let lap = (1.0 / (h * h))
            * (u(x + Vec2::new(h, 0.0))?
                + u(x - Vec2::new(h, 0.0))?
                + u(x + Vec2::new(0.0, h))?
                + u(x - Vec2::new(0.0, h))?
                - 4.0 * u(x)?);
        let exact = laplacian_closed_form(p, spec, r, x.y.atan2(x.x));
        worst = worst.max((lap - exact).norm());
    }
    Ok(worst)
}

/// [`laplacian_residual`] restricted to points strictly inside the hedgehog region.
pub fn hedgehog_laplacian_check(p: &ExplicitTwistParams, spec: &AnnulusSpec, points: &[Vec2], h: f64) -> Result<f64> {
    if let Some(x) = points.iter().find(|x| !(x.norm() > spec.a && x.norm() < p.k)) {
        return Err(Error::OutsideDomain { x: x.x, y: x.y, domain: "interior of the hedgehog region" });
    }
    laplacian_residual(p, spec, points, h)
}

/// Winding number of `r ↦ u(r, θ)/|u(r, θ)|` for a radial map `u`, sampled at
/// `samples` radii.
pub fn winding_of_ray(u: impl Fn(f64) -> Vec2, spec: &AnnulusSpec, samples: usize) -> Result<i64> {
    let pts: Vec<Vec2> = (0..samples)
        .map(|i| {
            let r =
                if i + 1 == samples { spec.b } else { spec.a + (spec.b - spec.a) * i as f64 / (samples - 1) as f64 };
            let v = u(r);
            (1.0 / v.norm()) * v
        })
        .collect();
    winding_index(&PlanarCurve::new(pts)?)
}

/// Winding number of the ray at angle `theta` under the explicit twist; equals `N`.
pub fn winding_verify(p: &ExplicitTwistParams, spec: &AnnulusSpec, theta: f64) -> Result<i64> {
    // about 64 samples per turn, concentrated where ψ varies
    let samples = 256 + 512 * p.n as usize;
    winding_of_ray(|r| field_eval_polar(p, spec, r, theta).u, spec, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::bisect;

    fn unit() -> AnnulusSpec {
        AnnulusSpec::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn omega_examples() {
        let s = unit();
        let w = omega_from_k(&s, 1.5).unwrap();
        assert!((w * w - (144.0 - 39.0625) / 3.0625).abs() < 1e-12);
        assert!((omega2_formula(1.0, 2.0, 1.0) - 39.0 / 9.0).abs() < 1e-14);
        let mut last = 0.0;
        for k in [1.9, 1.99, 1.999, 1.9999] {
            let w = omega_from_k(&s, k).unwrap();
            assert!(w > last);
            last = w;
        }
        assert!(last > 1e3);
        assert!(omega_from_k(&s, 2.0).is_err());
        assert!(omega_from_k(&s, 0.9).is_err());
    }

    #[test]
    fn plateau_and_continuity_at_k() {
        let s = unit();
        let p = ExplicitTwistParams::from_k(&s, 1, 1.4).unwrap();
        assert_eq!(rho_eval(&p, &s, 1.2).unwrap(), 1.0);
        // expanded second branch at r = k reduces to a
        let a2 = 1.0;
        let big_a = a2 + p.omega * p.omega / a2;
        let big_b = a2 - p.omega * p.omega / a2;
        let expanded = 0.5 * (big_a * 2.0 + 2.0 * big_b).sqrt();
        assert!((expanded - 1.0).abs() < 1e-12);
        let kp = p.k * (1.0 + 1e-12);
        assert!((rho_eval(&p, &s, kp).unwrap() - 1.0).abs() < 1e-10);
        assert!(rhodot_eval(&p, &s, kp).unwrap().abs() < 1e-8);
        let left = psi_eval(&p, &s, p.k).unwrap();
        assert!((left - p.omega * (p.k).ln()).abs() < 1e-14);
        assert!((psi_eval(&p, &s, kp).unwrap() - left).abs() < 1e-9);
        assert_eq!(psi_eval(&p, &s, 1.0).unwrap(), 0.0);
        assert!(rho_eval(&p, &s, 2.5).is_err());
    }

    #[test]
    fn rhodot_matches_difference_quotient() {
        let s = unit();
        let p = ExplicitTwistParams::from_k(&s, 1, 1.5).unwrap();
        for r in [1.6, 1.75, 1.9] {
            let e = 1e-6;
            let fd = (rho_eval(&p, &s, r + e).unwrap() - rho_eval(&p, &s, r - e).unwrap()) / (2.0 * e);
            assert!((fd - rhodot_eval(&p, &s, r).unwrap()).abs() < 1e-7);
            let fd = (psi_eval(&p, &s, r + e).unwrap() - psi_eval(&p, &s, r - e).unwrap()) / (2.0 * e);
            assert!((fd - psidot_eval(&p, &s, r).unwrap()).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn solves_n1_against_bisection() {
        let s = unit();
        let p = solve_winding_params(&s, 1).unwrap();
        let g = |k: f64| psi_b_of_k(&s, k).unwrap() - 2.0 * PI;
        let oracle = bisect(g, Bracket::new(g, 1.0 + 1e-9, 2.0 - 1e-9).unwrap(), 1e-15);
        assert!((p.k - oracle).abs() < 1e-10);
        assert!((psi_eval(&p, &s, 2.0).unwrap() - 2.0 * PI).abs() < 1e-10);
        assert!((rho_eval(&p, &s, 2.0).unwrap() - 2.0).abs() < 1e-10);
        assert!((p.c - (-1.0 + p.omega * p.omega)).abs() < 1e-12 * p.c.abs());
        let p2 = solve_winding_params(&s, 2).unwrap();
        assert!(p2.k > p.k);
        assert!(solve_winding_params(&s, 0).is_err());
    }

    #[test]
    fn parameters_are_scale_covariant() {
        let p1 = solve_winding_params(&unit(), 1).unwrap();
        let p2 = solve_winding_params(&AnnulusSpec::new(2.0, 4.0).unwrap(), 1).unwrap();
        assert!((p2.k / 2.0 - p1.k).abs() < 1e-10);
        assert!((p2.omega / 4.0 - p1.omega).abs() < 1e-8 * p1.omega);
    }

    #[test]
    fn field_jacobian_structure() {
        let s = unit();
        let p = solve_winding_params(&s, 1).unwrap();
        let f = field_eval(&p, &s, Vec2::new(0.0, 1.0)).unwrap();
        assert!((f.u.norm() - 1.0).abs() < 1e-14);
        assert_eq!(f.det, 0.0);
        let mid = 0.5 * (1.0 + p.k);
        let f = field_eval(&p, &s, Vec2::new(mid * 0.6, mid * 0.8)).unwrap();
        assert_eq!(f.det, 0.0);
        assert!(f.grad.det().abs() < 1e-12);
        let r = 0.5 * (p.k + 2.0);
        let f = field_eval(&p, &s, Vec2::new(r, 0.0)).unwrap();
        assert!(f.det > 0.0);
        assert!((f.grad.det() - f.det).abs() < 1e-10 * f.det.max(1.0));
        assert!(field_eval(&p, &s, Vec2::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = unit();
        let p = solve_winding_params(&s, 1).unwrap();
        for (r, th) in [(1.3, 0.4), (0.5 * (p.k + 2.0), 2.0)] {
            let x = r * Vec2::e_r(th);
            let g = field_eval(&p, &s, x).unwrap().grad;
            let e = 1e-6;
            let ux = 1.0 / (2.0 * e)
                * (field_eval(&p, &s, x + Vec2::new(e, 0.0)).unwrap().u
                    - field_eval(&p, &s, x - Vec2::new(e, 0.0)).unwrap().u);
            let uy = 1.0 / (2.0 * e)
                * (field_eval(&p, &s, x + Vec2::new(0.0, e)).unwrap().u
                    - field_eval(&p, &s, x - Vec2::new(0.0, e)).unwrap().u);
            let fd = Mat2::from_cols(ux, uy);
            assert!((fd - g).frob(&(fd - g)).sqrt() < 1e-6 * g.norm_sq().sqrt());
        }
    }

    #[test]
    fn em_residuals_and_detector() {
        let s = unit();
        let p = solve_winding_params(&s, 1).unwrap();
        let grid = radial_grid(&s, 10_000, Some(p.k));
        let (e1, e2) = em_residuals(&p, &s, &grid).unwrap();
        assert!(e1 < 1e-8 && e2 < 1e-8, "{e1:e} {e2:e}");
        let mut bad = p;
        bad.omega *= 1.01;
        let (b1, _) = em_residuals(&bad, &s, &grid).unwrap();
        assert!(b1 > 1e-3);
        assert!(first_integral_residual(&p, &s, &grid).unwrap() < 1e-8);
    }

    #[test]
    fn energies() {
        let s = unit();
        let id = radial_dirichlet_energy(|r| r, |_| 1.0, |_| 0.0, &s, None, 1e-12).unwrap();
        assert!((id - 2.0 * PI * 3.0).abs() < 1e-10);
        let mut last = id;
        for n in 1..=3 {
            let p = solve_winding_params(&s, n).unwrap();
            let e = dirichlet_energy(&p, &s, 1e-10).unwrap();
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn quarter_twist_and_r_star() {
        let s = unit();
        for n in [1, 5] {
            let p = solve_winding_params(&s, n).unwrap();
            let (v, ok) = quarter_twist_check(&p, &s);
            assert!(ok, "N={n}: {v}");
            assert!((v - outer_twist(&p, &s, 2.0)).abs() < 1e-12);
            let rs = r_star(&p, &s);
            assert!(rs < p.k);
            let a2 = 1.0;
            assert!(((1.0 + p.omega * p.omega / a2) * (1.0 / p.k - 1.0 / rs) + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hedgehog_laplacian_converges() {
        let s = unit();
        let p = solve_winding_params(&s, 1).unwrap();
        let rmid = 0.5 * (1.0 + p.k);
        let pts: Vec<Vec2> = (0..8).map(|i| rmid * Vec2::e_r(0.7 * i as f64)).collect();
        let h = 0.2 * (p.k - 1.0);
        let e1 = hedgehog_laplacian_check(&p, &s, &pts, h).unwrap();
        let e2 = hedgehog_laplacian_check(&p, &s, &pts, h / 2.0).unwrap();
        assert!(e2 < e1 / 3.0, "{e1:e} {e2:e}");
        let outer: Vec<Vec2> = (0..8).map(|i| (0.5 * (p.k + 2.0)) * Vec2::e_r(0.7 * i as f64)).collect();
        let h = 0.1 * (2.0 - p.k);
        // harmonic outside the hedgehog region: the residual is pure O(h²) truncation
        let o1 = laplacian_residual(&p, &s, &outer, h).unwrap();
        let o2 = laplacian_residual(&p, &s, &outer, h / 2.0).unwrap();
        assert!(o2 < o1 / 3.5 && o2 < 1e-3, "{o1:e} {o2:e}");
    }

    #[test]
    fn winding_numbers() {
        let s = unit();
        for n in [1, 3] {
            let p = solve_winding_params(&s, n).unwrap();
            for th in [0.0, 1.0, 4.0] {
                assert_eq!(winding_verify(&p, &s, th).unwrap(), n as i64);
            }
        }
        assert_eq!(winding_of_ray(|r| r * Vec2::e_r(0.3), &s, 64).unwrap(), 0);
    }

    #[test]
    fn psi_b_increases_in_k() {
        let s = unit();
        let ks: Vec<f64> = (1..=100).map(|i| 1.0 + i as f64 / 101.0).collect();
        let v: Vec<f64> = ks.iter().map(|&k| psi_b_of_k(&s, k).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }
}
