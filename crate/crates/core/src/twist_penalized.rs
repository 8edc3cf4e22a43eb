//! Symmetric twists for the penalized energy `∫ ½|∇u|² + h₀(det ∇u)`, found by
//! shooting on the Euler–Lagrange system
//!
//! `[rρ̇ + ρh₀′(d)]′ = ρ/r + rρψ̇² + ρ̇h₀′(d)`,  `rρ²ψ̇ = ω`,  `d = ρρ̇/r`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    fd_jacobian, integrate_1d, newton_solve, ode_solve, NewtonOptions, OdeOptions, OdeState, Trajectory,
};
use crate::penalty::PenaltyFunction;
use crate::twist_explicit::{radial_grid, solve_winding_params, AnnulusSpec, RadialProfile};

/// Shots whose Jacobian falls to this level are abandoned.
pub const D_MIN: f64 = 1e-10;

/// `ρ̈` from the Euler–Lagrange equation solved for the second derivative.
pub fn el_rhs(r: f64, rho: f64, rhodot: f64, omega: f64, h: &PenaltyFunction) -> Result<f64> {
    let d = rho * rhodot / r;
    if !(d > D_MIN) || !(rho > 0.0) {
        return Err(Error::InadmissibleState { r, d });
    }
    let h2 = h.d2h(d);
    let num = (rho + omega * omega / (rho * rho * rho)) / r - rhodot + (rho / r) * (d - rhodot * rhodot) * h2;
    let den = r + rho * rho / r * h2;
    Ok(num / den)
}

/// Shooting controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootOptions {
    /// Required `max(|ρ(b) − b|, |ψ(b) − 2πN|)`.
    pub tol: f64,
    pub ode_tol: f64,
    /// Points of the output grid.
    pub grid_points: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { tol: 1e-10, ode_tol: 1e-12, grid_points: 1001 }
    }
}

#[derive(Debug, Clone)]
pub struct PenalizedSolution {
    pub spec: AnnulusSpec,
    pub n: u32,
    pub omega: f64,
    /// The shooting parameter `ρ̇(a)`.
    pub rhodot_a: f64,
    pub profile: RadialProfile,
    /// `d = ρρ̇/r` on the profile grid.
    pub d: Vec<f64>,
    /// `z = ½(ρ̇² + ρ²ψ̇² + ρ²/r²) + f(d)` on the profile grid.
    pub z: Vec<f64>,
    /// `(ρ(b) − b, ψ(b) − 2πN)`.
    pub residuals: (f64, f64),
    pub newton_iterations: usize,
    pub trajectory: Trajectory<3>,
}

impl PenalizedSolution {
    pub fn rhodot_b(&self) -> f64 {
        *self.profile.rhodot.last().unwrap()
    }

    pub fn min_d(&self) -> f64 {
        self.d.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn integrate(
    spec: &AnnulusSpec,
    rhodot_a: f64,
    omega: f64,
    h: &PenaltyFunction,
    ode_tol: f64,
) -> Result<Trajectory<3>> {
    ode_solve(OdeState { r: spec.a, y: [spec.a, rhodot_a, 0.0] }, spec.b, &OdeOptions::with_tol(ode_tol), |r, y| {
        let acc = el_rhs(r, y[0], y[1], omega, h)?;
        Ok([y[1], acc, omega / (r * y[0] * y[0])])
    })
}

fn shot_residual(spec: &AnnulusSpec, target: f64, x: &[f64], h: &PenaltyFunction, ode_tol: f64) -> Result<Vec<f64>> {
    let t = integrate(spec, x[0], x[1], h, ode_tol)?;
    let y = t.end().y;
    Ok(vec![y[0] - spec.b, y[2] - target])
}

/// Two-parameter shooting on `(ρ̇(a), ω)` for `ρ(b) = b`, `ψ(b) = 2πN`.
pub fn shoot(spec: &AnnulusSpec, n: u32, h: &PenaltyFunction, opts: &ShootOptions) -> Result<PenalizedSolution> {
    let target = 2.0 * PI * n as f64;
    let omega0 = if n == 0 { 0.0 } else { solve_winding_params(spec, n)?.omega };
    let mut starts = vec![(1.0, omega0)];
    for s in [0.25, 0.5, 1.0, 2.0] {
        for w in [0.5, 1.0, 2.0] {
            if (s, w) != (1.0, 1.0) {
                starts.push((s, w * omega0));
            }
        }
    }
    let newton = NewtonOptions { tol: opts.tol, max_iter: 60, max_backtracks: 30 };
    let mut landscape = Vec::new();
    for (s0, w0) in starts {
        let res = newton_solve(
            |x| shot_residual(spec, target, x, h, opts.ode_tol),
            |x, fx| fd_jacobian(|y| shot_residual(spec, target, y, h, opts.ode_tol), x, fx, 1e-7),
            &[s0, w0],
            &newton,
        );
        match res {
            Ok(sol) => return assemble(spec, n, h, sol.x[0], sol.x[1], sol.iterations, opts),
            Err(e) => {
                let last = match &e {
                    Error::NonlinearSolveFailure { history, .. } => history.last().copied().unwrap_or(f64::NAN),
                    _ => f64::NAN,
                };
                landscape.push((s0, w0, last));
            }
        }
    }
    Err(Error::ShootingFailure { reason: format!("no start converged for N = {n}"), landscape })
}

fn assemble(
    spec: &AnnulusSpec,
    n: u32,
    h: &PenaltyFunction,
    rhodot_a: f64,
    omega: f64,
    iterations: usize,
    opts: &ShootOptions,
) -> Result<PenalizedSolution> {
    let trajectory = integrate(spec, rhodot_a, omega, h, opts.ode_tol)?;
    let grid = radial_grid(spec, opts.grid_points, None);
    let mut profile = RadialProfile { r: vec![], rho: vec![], rhodot: vec![], psi: vec![], psidot: vec![] };
    let (mut d, mut z) = (vec![], vec![]);
    for &r in &grid {
        let y = trajectory.eval(r);
        let psidot = omega / (r * y[0] * y[0]);
        profile.r.push(r);
        profile.rho.push(y[0]);
        profile.rhodot.push(y[1]);
        profile.psi.push(y[2]);
        profile.psidot.push(psidot);
        d.push(y[0] * y[1] / r);
        z.push(z_value(r, y[0], y[1], omega, h));
    }
    let end = trajectory.end().y;
    Ok(PenalizedSolution {
        spec: *spec,
        n,
        omega,
        rhodot_a,
        residuals: (end[0] - spec.b, end[2] - 2.0 * PI * n as f64),
        profile,
        d,
        z,
        newton_iterations: iterations,
        trajectory,
    })
}

fn z_value(r: f64, rho: f64, rhodot: f64, omega: f64, h: &PenaltyFunction) -> f64 {
    let psidot = omega / (r * rho * rho);
    0.5 * (rhodot * rhodot + rho * rho * psidot * psidot + rho * rho / (r * r)) + h.f(rho * rhodot / r)
}

/// `ż = −(1/r)[(ρ̇ − ρ/r)² + ω²/(r²ρ²)]`.
pub fn zdot_closed_form(r: f64, rho: f64, rhodot: f64, omega: f64) -> f64 {
    let t = rhodot - rho / r;
    -(t * t + omega * omega / (r * r * rho * rho)) / r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityReport {
    /// Smallest forward difference of `d` on the grid.
    pub min_delta_d: f64,
    /// Largest forward difference of `z` on the grid.
    pub max_delta_z: f64,
    /// Largest `|ż_fd − ż| / max(|ż|, 1)` with `ż_fd` a fourth-order central
    /// difference of `z` along the dense output.
    pub zdot_mismatch: f64,
    pub strict: bool,
}

pub fn monotonicity_monitor(sol: &PenalizedSolution, h: &PenaltyFunction) -> MonotonicityReport {
    let min_delta_d = sol.d.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let max_delta_z = sol.z.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = (sol.spec.a, sol.spec.b);
    let e = 1e-3 * (b - a);
    let z_at = |r: f64| {
        let y = sol.trajectory.eval(r);
        z_value(r, y[0], y[1], sol.omega, h)
    };
    let mut zdot_mismatch = 0.0f64;
    for &r in sol.profile.r.iter().filter(|&&r| r - 2.0 * e >= a && r + 2.0 * e <= b) {
        let fd = (z_at(r - 2.0 * e) - 8.0 * z_at(r - e) + 8.0 * z_at(r + e) - z_at(r + 2.0 * e)) / (12.0 * e);
        let y = sol.trajectory.eval(r);
        let exact = zdot_closed_form(r, y[0], y[1], sol.omega);
        zdot_mismatch = zdot_mismatch.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    MonotonicityReport { min_delta_d, max_delta_z, zdot_mismatch, strict: min_delta_d > 0.0 && max_delta_z < 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    pub ratio_at_a: f64,
    pub ratio_at_b: f64,
    pub min_ratio: f64,
    pub max_interior_ratio: f64,
    pub interior_local_maxima: usize,
    /// Sign changes of `(ρ/r)″` along the grid.
    pub inflections: usize,
    pub pass: bool,
}

/// Checks on `ρ/r`: equal to 1 at both ends, within `[a/b, 1)` inside, no interior
/// local maximum, at most one sign change of its second derivative.
pub fn max_principle_monitor(sol: &PenalizedSolution, h: &PenaltyFunction) -> Result<MaxPrincipleReport> {
    let p = &sol.profile;
    let q: Vec<f64> = p.r.iter().zip(&p.rho).map(|(r, rho)| rho / r).collect();
    let m = q.len();
    let interior = &q[1..m - 1];
    let interior_local_maxima = (1..m - 1).filter(|&i| q[i] > q[i - 1] && q[i] > q[i + 1]).count();
    let mut second = Vec::with_capacity(m);
    for i in 0..m {
        let (r, rho, rd) = (p.r[i], p.rho[i], p.rhodot[i]);
        let rdd = el_rhs(r, rho, rd, sol.omega, h)?;
        second.push(rdd / r - 2.0 * rd / (r * r) + 2.0 * rho / (r * r * r));
    }
    let signs: Vec<f64> = second.iter().filter(|v| v.abs() > 1e-12).map(|v| v.signum()).collect();
    let inflections = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let min_ratio = interior.iter().copied().fold(f64::INFINITY, f64::min);
    let max_interior_ratio = interior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (ra, rb) = (q[0], q[m - 1]);
    let lower = sol.spec.a / sol.spec.b;
    let pass = (ra - 1.0).abs() < 1e-8
        && (rb - 1.0).abs() < 1e-8
        && min_ratio >= lower
        && max_interior_ratio < 1.0
        && interior_local_maxima == 0
        && inflections <= 1;
    Ok(MaxPrincipleReport {
        ratio_at_a: ra,
        ratio_at_b: rb,
        min_ratio,
        max_interior_ratio,
        interior_local_maxima,
        inflections,
        pass,
    })
}

/// Largest `|rρ²ψ̇ − ω|` with `ψ̇` from central differences of the integrated `ψ`,
/// and largest mismatch in the flux form of the radial equation (both on the grid).
pub fn conservation_residuals(sol: &PenalizedSolution, h: &PenaltyFunction) -> (f64, f64) {
    let (a, b) = (sol.spec.a, sol.spec.b);
    let e = 1e-3 * (b - a);
    let y = |r: f64| sol.trajectory.eval(r);
    let flux = |r: f64| {
        let s = y(r);
        r * s[1] + s[0] * h.dh(s[0] * s[1] / r)
    };
    let (mut ang, mut fl) = (0.0f64, 0.0f64);
    for &r in sol.profile.r.iter().filter(|&&r| r - 2.0 * e >= a && r + 2.0 * e <= b) {
        let s = y(r);
        let c4 =
            |f: &dyn Fn(f64) -> f64| (f(r - 2.0 * e) - 8.0 * f(r - e) + 8.0 * f(r + e) - f(r + 2.0 * e)) / (12.0 * e);
        let psidot = c4(&|t| y(t)[2]);
        ang = ang.max((r * s[0] * s[0] * psidot - sol.omega).abs() / sol.omega.max(1.0));
        let lhs = c4(&flux);
        let pd = sol.omega / (r * s[0] * s[0]);
        let rhs = s[0] / r + r * s[0] * pd * pd + s[1] * h.dh(s[0] * s[1] / r);
        fl = fl.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    (ang, fl)
}

/// `I₀ = 2π ∫ r [½(ρ̇² + ρ²ψ̇² + ρ²/r²) + h₀(d)] dr` along the dense output.
pub fn energy_i0(sol: &PenalizedSolution, h: &PenaltyFunction, tol: f64) -> Result<f64> {
    let f = |r: f64| {
        let y = sol.trajectory.eval(r);
        let pd = sol.omega / (r * y[0] * y[0]);
        r * (0.5 * (y[1] * y[1] + y[0] * y[0] * pd * pd + y[0] * y[0] / (r * r)) + h.h(y[0] * y[1] / r))
    };
    Ok(2.0 * PI * integrate_1d(f, sol.spec.a, sol.spec.b, tol)?)
}

/// Sup-norm change in `(ρ, ρ̇, ψ)` between solves at `ode_tol` and `ode_tol / 2`.
pub fn tolerance_stability(spec: &AnnulusSpec, n: u32, h: &PenaltyFunction, opts: &ShootOptions) -> Result<f64> {
    let s1 = shoot(spec, n, h, opts)?;
    let s2 = shoot(spec, n, h, &ShootOptions { ode_tol: 0.5 * opts.ode_tol, ..*opts })?;
    let p = (&s1.profile, &s2.profile);
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(diff(&p.0.rho, &p.1.rho).max(diff(&p.0.rhodot, &p.1.rhodot)).max(diff(&p.0.psi, &p.1.psi)))
}
