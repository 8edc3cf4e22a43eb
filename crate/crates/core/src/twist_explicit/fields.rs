//! Smooth compactly supported vector fields on the annulus, given in polar form.

use std::f64::consts::PI;

use rand::Rng;

use super::{psi_unchecked, rho_unchecked, AnnulusSpec, ExplicitTwistParams};
use crate::algebra2d::{apply_j, polar_gradient, Mat2, Vec2};
use crate::error::Result;
use crate::numerics::integrate_1d;

/// A planar vector field `φ(r, θ)` with its polar partial derivatives.
pub trait TestField: Sync {
    /// `(φ, φ_r, φ_θ)` at `(r, θ)`.
    fn jet(&self, r: f64, theta: f64) -> (Vec2, Vec2, Vec2);

    fn value(&self, r: f64, theta: f64) -> Vec2 {
        self.jet(r, theta).0
    }

    fn gradient(&self, r: f64, theta: f64) -> Mat2 {
        let (_, pr, pt) = self.jet(r, theta);
        polar_gradient(pr, pt, r, theta).expect("test fields are evaluated at r > 0")
    }
}

impl<T: TestField + ?Sized> TestField for &T {
    fn jet(&self, r: f64, theta: f64) -> (Vec2, Vec2, Vec2) {
        (**self).jet(r, theta)
    }
}

/// `s φ`.
pub struct Scaled<'a> {
    pub field: &'a dyn TestField,
    pub s: f64,
}

impl TestField for Scaled<'_> {
    fn jet(&self, r: f64, theta: f64) -> (Vec2, Vec2, Vec2) {
        let (p, pr, pt) = self.field.jet(r, theta);
        (self.s * p, self.s * pr, self.s * pt)
    }
}

pub struct ZeroField;

impl TestField for ZeroField {
    fn jet(&self, _: f64, _: f64) -> (Vec2, Vec2, Vec2) {
        (Vec2::ZERO, Vec2::ZERO, Vec2::ZERO)
    }
}

// C∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
fn step(t: f64) -> (f64, f64) {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let df = |t: f64| if t > 0.0 { (-1.0 / t).exp() / (t * t) } else { 0.0 };
    let (p, q) = (f(t), f(1.0 - t));
    let s = p + q;
    (p / s, (df(t) * q + p * df(1.0 - t)) / (s * s))
}

/// Radial profile rising smoothly from 0 at `lo` to 1 at `peak` and falling back to
/// 0 at `hi`; strictly increasing on `(lo, peak)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothBump {
    pub lo: f64,
    pub peak: f64,
    pub hi: f64,
}

impl SmoothBump {
    pub fn new(lo: f64, peak: f64, hi: f64) -> Self {
        assert!(lo < peak && peak < hi, "bump needs lo < peak < hi");
        Self { lo, peak, hi }
    }

    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r <= self.lo || r >= self.hi {
            return (0.0, 0.0);
        }
        let (w1, w2) = (self.peak - self.lo, self.hi - self.peak);
        let (up, dup) = step((r - self.lo) / w1);
        let (dn, ddn) = step((r - self.peak) / w2);
        (up * (1.0 - dn), dup / w1 * (1.0 - dn) - up * ddn / w2)
    }
}

/// `φ = g(r) e_r(θ)`.
pub struct RadialBump {
    pub g: SmoothBump,
    pub amplitude: f64,
}

impl TestField for RadialBump {
    fn jet(&self, r: f64, theta: f64) -> (Vec2, Vec2, Vec2) {
        let (g, dg) = self.g.eval(r);
        let (g, dg) = (self.amplitude * g, self.amplitude * dg);
        let (er, et) = (Vec2::e_r(theta), Vec2::e_theta(theta));
        (g * er, dg * er, g * et)
    }
}

/// Cubic vector polynomial in `(x, y)` times a radial cutoff.
pub struct PolyBump {
    pub cutoff: SmoothBump,
    /// Coefficients of `1, x, y, x², xy, y², x³, x²y, xy², y³` per component.
    pub coeffs: [[f64; 10]; 2],
}

impl PolyBump {
    pub fn random(rng: &mut impl Rng, spec: &AnnulusSpec) -> Self {
        let w = spec.b - spec.a;
        let lo = spec.a + w * rng.gen_range(0.02..0.3);
        let hi = spec.b - w * rng.gen_range(0.02..0.3);
        let peak = lo + (hi - lo) * rng.gen_range(0.3..0.7);
        let mut coeffs = [[0.0; 10]; 2];
        for c in coeffs.iter_mut().flatten() {
            *c = rng.gen_range(-1.0..1.0);
        }
        Self { cutoff: SmoothBump::new(lo, peak, hi), coeffs }
    }

    fn poly(&self, x: f64, y: f64) -> (Vec2, Vec2, Vec2) {
        let m = [1.0, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y, y * y * y];
        let mx = [0.0, 1.0, 0.0, 2.0 * x, y, 0.0, 3.0 * x * x, 2.0 * x * y, y * y, 0.0];
        let my = [0.0, 0.0, 1.0, 0.0, x, 2.0 * y, 0.0, x * x, 2.0 * x * y, 3.0 * y * y];
        let dot = |c: &[f64; 10], b: &[f64; 10]| c.iter().zip(b).map(|(c, b)| c * b).sum::<f64>();
        let [c0, c1] = &self.coeffs;
        (
            Vec2::new(dot(c0, &m), dot(c1, &m)),
            Vec2::new(dot(c0, &mx), dot(c1, &mx)),
            Vec2::new(dot(c0, &my), dot(c1, &my)),
        )
    }
}

impl TestField for PolyBump {
    fn jet(&self, r: f64, theta: f64) -> (Vec2, Vec2, Vec2) {
        let (c, dc) = self.cutoff.eval(r);
        let (er, et) = (Vec2::e_r(theta), Vec2::e_theta(theta));
        let x = r * er;
        let (p, px, py) = self.poly(x.x, x.y);
        // ∂_r P = ∇P e_r, ∂_θ P = r ∇P e_θ, with ∇P = [px py]
        let p_r = er.x * px + er.y * py;
        let p_t = r * (et.x * px + et.y * py);
        (c * p, dc * p + c * p_r, c * p_t)
    }
}

/// Trigonometric polynomial `Σ_m (α_m cos mθ + β_m sin mθ)`, `m ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trig {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Trig {
    pub fn random(rng: &mut impl Rng, modes: usize, amp: f64) -> Self {
        Self {
            cos: (0..modes).map(|_| rng.gen_range(-amp..amp)).collect(),
            sin: (0..modes).map(|_| rng.gen_range(-amp..amp)).collect(),
        }
    }

    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let mut v = (0.0, 0.0);
        for (m, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (m + 1) as f64;
            let (s, c) = (k * theta).sin_cos();
            v.0 += a * c + b * s;
            v.1 += k * (b * c - a * s);
        }
        v
    }
}

/// Perturbation written in the frame of the twisted image,
///
/// `φ = G(r) [ẽ_r + Q(θ) ẽ_θ] + B(r) V(θ)`,  `ẽ = e(θ + ψ(r))`.
///
/// Inside the hedgehog region the linearized Jacobian is `(a/r)(g_r − ψ̇ g_θ)` for
/// `φ = g ẽ_r + q ẽ_θ`, so a non-decreasing `G` keeps it non-negative there; `B`
/// must be supported outside the region.
pub struct TwistFrameField {
    pub params: ExplicitTwistParams,
    pub spec: AnnulusSpec,
    pub g: SmoothBump,
    pub g_amp: f64,
    pub q: Trig,
    pub b: Option<SmoothBump>,
    pub b_amp: f64,
    pub v: [Trig; 2],
}

impl TestField for TwistFrameField {
    fn jet(&self, r: f64, theta: f64) -> (Vec2, Vec2, Vec2) {
        let (p, s) = (&self.params, &self.spec);
        let rho = rho_unchecked(p, s, r);
        let psidot = p.omega / (r * rho * rho);
        let phase = theta + psi_unchecked(p, s, r);
        let (er, et) = (Vec2::e_r(phase), Vec2::e_theta(phase));
        let (g, dg) = self.g.eval(r);
        let (g, dg) = (self.g_amp * g, self.g_amp * dg);
        let (q, dq) = self.q.eval(theta);
        let frame = er + q * et;
        let mut phi = g * frame;
        let mut phi_r = dg * frame + (g * psidot) * (et - q * er);
        let mut phi_t = g * ((1.0 + dq) * et - q * er);
        if let Some(bump) = &self.b {
            let (bv, dbv) = bump.eval(r);
            let (bv, dbv) = (self.b_amp * bv, self.b_amp * dbv);
            let (v1, dv1) = self.v[0].eval(theta);
            let (v2, dv2) = self.v[1].eval(theta);
            let (v, dv) = (Vec2::new(v1, v2), Vec2::new(dv1, dv2));
            phi += bv * v;
            phi_r += dbv * v;
            phi_t += bv * dv;
        }
        (phi, phi_r, phi_t)
    }
}

const BOUNDARY_THETA_NODES: usize = 256;

// Periodic trapezoid rule on [0, 2π).
fn periodic_mean(f: impl Fn(f64) -> f64, nodes: usize) -> f64 {
    let h = 2.0 * PI / nodes as f64;
    (0..nodes).map(|j| f(j as f64 * h)).sum::<f64>() * h
}

/// Both sides of `∫_{A(a,R)} det∇φ dx = ½ ∫_{S_R} Jφ · φ_τ dS`.
pub fn jacobian_boundary_identity(phi: &dyn TestField, spec: &AnnulusSpec, big_r: f64, tol: f64) -> Result<(f64, f64)> {
    let lhs =
        integrate_1d(|r| r * periodic_mean(|t| phi.gradient(r, t).det(), BOUNDARY_THETA_NODES), spec.a, big_r, tol)?;
    // dS = R dθ and φ_τ = φ_θ / R
    let rhs = 0.5
        * periodic_mean(
            |t| {
                let (p, _, pt) = phi.jet(big_r, t);
                apply_j(p).dot(pt)
            },
            BOUNDARY_THETA_NODES,
        );
    Ok((lhs, rhs))
}
