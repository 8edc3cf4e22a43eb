//! 2x2 matrix kernel, polar frames and the winding number of sampled planar curves.
//!
//! `J` denotes the rotation by a quarter turn, `cof A = Jᵀ A J`, and the
//! Frobenius product is `X · Y = tr(Xᵀ Y)`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit radial vector `(cos θ, sin θ)`.
    pub fn e_r(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, s)
    }

    /// Unit angular vector `(-sin θ, cos θ)`.
    pub fn e_theta(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(-s, c)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Scalar cross product `x₁y₂ − y₁x₂`, equal to `J self · other`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Tensor product `self ⊗ other`, the matrix with entries `self_i other_j`.
    pub fn outer(self, other: Vec2) -> Mat2 {
        Mat2::new(self.x * other.x, self.x * other.y, self.y * other.x, self.y * other.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

/// Quarter-turn rotation `J v = (−v₂, v₁)`.
pub fn apply_j(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Real 2x2 matrix, entries stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2(pub [f64; 4]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([1.0, 0.0, 0.0, 1.0]);
    pub const J: Mat2 = Mat2([0.0, -1.0, 1.0, 0.0]);
    pub const ZERO: Mat2 = Mat2([0.0; 4]);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self([a11, a12, a21, a22])
    }

    pub fn from_rows(r1: Vec2, r2: Vec2) -> Self {
        Self::new(r1.x, r1.y, r2.x, r2.y)
    }

    pub fn from_cols(c1: Vec2, c2: Vec2) -> Self {
        Self::new(c1.x, c2.x, c1.y, c2.y)
    }

    /// Counter-clockwise rotation by `alpha`.
    pub fn rotation(alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[2 * i + j]
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d] = self.0;
        a * d - b * c
    }

    /// Cofactor matrix, `Jᵀ A J`.
    pub fn cof(&self) -> Mat2 {
        let [a, b, c, d] = self.0;
        Mat2::new(d, -c, -b, a)
    }

    pub fn transpose(&self) -> Mat2 {
        let [a, b, c, d] = self.0;
        Mat2::new(a, c, b, d)
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3]
    }

    /// Frobenius inner product `tr(Aᵀ B)`.
    pub fn frob(&self, other: &Mat2) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(x, y)| x * y).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.frob(self)
    }

    pub fn matmul(&self, o: &Mat2) -> Mat2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        Mat2::new(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        let [a, b, c, d] = self.0;
        Vec2::new(a * v.x + b * v.y, c * v.x + d * v.y)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2(self.0.map(|x| s * x))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut out = self.0;
        for (x, y) in out.iter_mut().zip(o.0) {
            *x += y;
        }
        Mat2(out)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

pub fn det2(a: &Mat2) -> f64 {
    a.det()
}

pub fn cof2(a: &Mat2) -> Mat2 {
    a.cof()
}

/// Cartesian gradient from polar partial derivatives:
/// `∇φ = φ,r ⊗ e_r(θ) + (1/r) φ,θ ⊗ e_θ(θ)`.
pub fn polar_gradient(phi_r: Vec2, phi_theta: Vec2, r: f64, theta: f64) -> Result<Mat2> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("polar gradient needs r > 0, got {r}")));
    }
    Ok(phi_r.outer(Vec2::e_r(theta)) + ((1.0 / r) * phi_theta).outer(Vec2::e_theta(theta)))
}

/// Closed planar curve given by ordered samples; the last sample repeats the first.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    points: Vec<Vec2>,
}

impl PlanarCurve {
    /// Relative closure tolerance (scaled by the curve diameter, or 1 for tiny curves).
    pub const CLOSURE_TOL: f64 = 1e-8;

    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a closed curve needs at least two samples".into()));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidArgument("curve samples must be finite".into()));
        }
        let curve = Self { points };
        let gap = (curve.points[0] - *curve.points.last().unwrap()).norm();
        if gap > Self::CLOSURE_TOL * curve.diameter().max(1.0) {
            return Err(Error::InvalidArgument(format!("curve is not closed: endpoint gap {gap:e}")));
        }
        Ok(curve)
    }

    /// Closes the sample list by repeating the first point.
    pub fn from_open(mut points: Vec<Vec2>) -> Result<Self> {
        if let Some(&first) = points.first() {
            points.push(first);
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    /// Largest distance between any sample and the first sample, doubled.
    /// A cheap upper bound on the true diameter, used only for scaling tolerances.
    pub fn diameter(&self) -> f64 {
        let p0 = self.points[0];
        2.0 * self.points.iter().map(|&p| (p - p0).norm()).fold(0.0, f64::max)
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    /// Same closed curve started at sample `shift`.
    pub fn reindexed(&self, shift: usize) -> Self {
        let open = &self.points[..self.points.len() - 1];
        let m = open.len();
        let mut points: Vec<Vec2> = (0..m).map(|i| open[(i + shift) % m]).collect();
        points.push(points[0]);
        Self { points }
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Self {
        Self { points: self.points.iter().map(|&p| f(p)).collect() }
    }
}

/// Unrounded winding sum of a closed sampled curve around the origin.
///
/// Each chord of the piecewise-linear curve contributes `(x y' − x' y)` times the
/// trapezoidal average of `1/(x² + y²)` at its endpoints. A zero-length curve
/// winds zero times.
pub fn winding_sum(c: &PlanarCurve) -> Result<f64> {
    let pts = c.points();
    let diameter = c.diameter();
    let eps = 1e-9 * diameter;
    let closest = pts.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    if closest <= eps || closest == 0.0 {
        return Err(Error::UndefinedWinding { distance: closest });
    }
    if diameter == 0.0 {
        return Ok(0.0);
    }
    let total: f64 = pts
        .windows(2)
        .map(|w| {
            let (p, q) = (w[0], w[1]);
            p.cross(q) * 0.5 * (1.0 / p.norm_sq() + 1.0 / q.norm_sq())
        })
        .sum();
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Winding sum with the integer-proximity guard applied; the result is within
/// 0.1 of an integer or an under-sampling error is returned.
pub fn winding_number(c: &PlanarCurve) -> Result<f64> {
    let w = winding_sum(c)?;
    if (w - w.round()).abs() >= 0.1 {
        return Err(Error::UnderSampledCurve { value: w });
    }
    Ok(w)
}

/// Rounded winding number.
pub fn winding_index(c: &PlanarCurve) -> Result<i64> {
    winding_number(c).map(|w| w.round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn circle(samples: usize, turns: f64, radius: f64) -> PlanarCurve {
        let pts: Vec<Vec2> = (0..=samples)
            .map(|i| {
                let t = turns * 2.0 * PI * i as f64 / samples as f64;
                radius * Vec2::e_r(t)
            })
            .collect();
        PlanarCurve::new(pts).unwrap()
    }

    #[test]
    fn determinants() {
        assert_eq!(det2(&Mat2::IDENTITY), 1.0);
        assert_eq!(det2(&Mat2::J), 1.0);
        assert_eq!(det2(&Mat2::new(2.0, 1.0, 1.0, 1.0)), 1.0);
    }

    #[test]
    fn cofactors() {
        assert_eq!(cof2(&Mat2::IDENTITY), Mat2::IDENTITY);
        // Jᵀ J J = J
        let jt_j_j = Mat2::J.transpose().matmul(&Mat2::J).matmul(&Mat2::J);
        assert_eq!(jt_j_j, Mat2::J);
        assert_eq!(cof2(&Mat2::J), Mat2::J);
        assert_eq!(cof2(&Mat2::new(2.0, 0.0, 0.0, 3.0)), Mat2::new(3.0, 0.0, 0.0, 2.0));
    }

    #[test]
    fn quarter_turn() {
        assert_eq!(apply_j(Vec2::new(1.0, 0.0)), Vec2::new(0.0, 1.0));
        assert_eq!(apply_j(Vec2::new(0.0, 1.0)), Vec2::new(-1.0, 0.0));
        let v = Vec2::new(3.0, 4.0);
        assert_eq!(apply_j(apply_j(v)), -v);
        assert_eq!(Mat2::J.apply(v), apply_j(v));
    }

    #[test]
    fn polar_gradient_of_identity_and_rotation() {
        let (r, th) = (1.7, 0.4);
        let g = polar_gradient(Vec2::e_r(th), r * Vec2::e_theta(th), r, th).unwrap();
        for (x, y) in g.0.iter().zip(Mat2::IDENTITY.0) {
            assert!((x - y).abs() < 1e-15);
        }
        // u(x) = R_α x: u_r = e_r(θ+α), u_θ = r e_θ(θ+α)
        let alpha = 0.9;
        let g = polar_gradient(Vec2::e_r(th + alpha), r * Vec2::e_theta(th + alpha), r, th).unwrap();
        let rot = Mat2::rotation(alpha);
        for (x, y) in g.0.iter().zip(rot.0) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((g.det() - 1.0).abs() < 1e-15);
        assert!(polar_gradient(Vec2::ZERO, Vec2::ZERO, 0.0, 0.0).is_err());
        assert!(polar_gradient(Vec2::ZERO, Vec2::ZERO, -1.0, 0.0).is_err());
    }

    #[test]
    fn twist_gradient_pattern_determinant() {
        // ρ̇ ẽ_r⊗e_r + ρψ̇ ẽ_θ⊗e_r + (ρ/r) ẽ_θ⊗e_θ has determinant ρρ̇/r.
        let (r, th, psi, rho, rhod, psid) = (1.3, 0.7, 2.1, 1.1, 0.8, 3.0);
        let (er, et) = (Vec2::e_r(th), Vec2::e_theta(th));
        let (ter, tet) = (Vec2::e_r(th + psi), Vec2::e_theta(th + psi));
        let f = (rhod * ter).outer(er) + (rho * psid * tet).outer(er) + ((rho / r) * tet).outer(et);
        assert!((f.det() - rho * rhod / r).abs() < 1e-14);
    }

    #[test]
    fn winding_examples() {
        let one = winding_number(&circle(256, 1.0, 1.0)).unwrap();
        assert!((one - 1.0).abs() < 1e-3, "{one}");
        let two = winding_number(&circle(512, 2.0, 1.0)).unwrap();
        assert!((two - 2.0).abs() < 1e-3, "{two}");
        let constant = PlanarCurve::new(vec![Vec2::new(2.0, 1.0); 8]).unwrap();
        assert_eq!(winding_number(&constant).unwrap(), 0.0);
    }

    #[test]
    fn winding_errors() {
        let through_origin =
            PlanarCurve::from_open(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        assert!(matches!(winding_number(&through_origin), Err(Error::UndefinedWinding { .. })));
        let coarse = circle(3, 1.0, 1.0);
        assert!(matches!(winding_number(&coarse), Err(Error::UnderSampledCurve { .. })));
        assert!(PlanarCurve::new(vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).is_err());
    }

    #[test]
    fn winding_off_center_loop_is_zero() {
        let pts: Vec<Vec2> = (0..=200).map(|i| Vec2::new(5.0, 0.0) + Vec2::e_r(2.0 * PI * i as f64 / 200.0)).collect();
        let w = winding_number(&PlanarCurve::new(pts).unwrap()).unwrap();
        assert!(w.abs() < 1e-3);
    }

    fn mat() -> impl Strategy<Value = Mat2> {
        prop::array::uniform4(-10.0f64..10.0).prop_map(Mat2)
    }

    proptest! {
        #[test]
        fn det_cof_consistency(a in mat()) {
            let det = a.det();
            prop_assert!((det - 0.5 * a.frob(&a.cof())).abs() <= 1e-12 * (1.0 + a.norm_sq()));
            prop_assert_eq!(a.cof().cof(), a);
            let lhs = a.cof().transpose().matmul(&a);
            let rhs = Mat2::IDENTITY.scale(det);
            for (x, y) in lhs.0.iter().zip(rhs.0) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + a.norm_sq()));
            }
            let jt_a_j = Mat2::J.transpose().matmul(&a).matmul(&Mat2::J);
            prop_assert_eq!(jt_a_j, a.cof());
        }

        #[test]
        fn hadamard(a in mat()) {
            prop_assert!(2.0 * a.det().abs() <= a.norm_sq() * (1.0 + 1e-15));
        }

        #[test]
        fn j_skew(ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0) {
            let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
            prop_assert!((a.dot(apply_j(b)) + apply_j(a).dot(b)).abs() < 1e-12);
        }

        #[test]
        fn polar_det_identity(v in prop::array::uniform4(-3.0f64..3.0), r in 0.1f64..5.0, th in 0.0f64..6.3) {
            let phi_r = Vec2::new(v[0], v[1]);
            let phi_th = Vec2::new(v[2], v[3]);
            let g = polar_gradient(phi_r, phi_th, r, th).unwrap();
            let expected = apply_j(phi_r).dot((1.0 / r) * phi_th);
            prop_assert!((g.det() - expected).abs() < 1e-12 * (1.0 + g.norm_sq()));
        }

        #[test]
        fn winding_invariances(
            alpha in 0.0f64..6.3,
            shift in 0usize..300,
            wobble in 0.0f64..0.4,
            turns in 1u32..3,
        ) {
            let m = 300;
            let pts: Vec<Vec2> = (0..=m).map(|i| {
                let t = 2.0 * PI * (i % m) as f64 / m as f64;
                let rad = 1.0 + wobble * (3.0 * t).cos();
                rad * Vec2::e_r(turns as f64 * t)
            }).collect();
            let c = PlanarCurve::new(pts).unwrap();
            let w = winding_sum(&c).unwrap();
            let rot = Mat2::rotation(alpha);
            let wr = winding_sum(&c.map(|p| rot.apply(p))).unwrap();
            let ws = winding_sum(&c.reindexed(shift)).unwrap();
            let wrev = winding_sum(&c.reversed()).unwrap();
            prop_assert!((w - wr).abs() < 1e-12);
            prop_assert!((w - ws).abs() < 1e-12);
            prop_assert!((w + wrev).abs() < 1e-12);
            prop_assert_eq!(winding_index(&c).unwrap(), turns as i64);
        }
    }
}
