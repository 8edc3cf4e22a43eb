//! Shear maps with the penalty `h₀(det ∇u_σ)`: clamped sides `x₁ = ±1`, traction-free
//! top and bottom.
//!
//! The discrete energy is assembled edge by edge. Each vertical edge carries
//! `½p₂² + p₂ + h₀(1 + p₂)` and each horizontal edge `½p₁²`, with `p` the edge difference
//! quotient. Horizontal edges on the free rows get zero weight and their neighbours 3/2, so
//! that stationarity at a free node is exactly `L₂ = 0` on its vertical edge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra2d::{Mat2, Vec2};
use crate::error::{Error, Result};
use crate::numerics::{solve_spd, CgOptions, CsrMatrix};
use crate::penalty::PenaltyFunction;
use crate::shear_grid::{ShearGrid, ShearGridField};

pub const MIN_RESOLUTION: usize = 16;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Clamped sides `∂Q± = {(±1, t)}` with data `σ₁`; top and bottom are free.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedBcSpec {
    /// `σ₁(±1, x₂)`, zero unless set.
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl MixedBcSpec {
    pub fn zero(grid: ShearGrid) -> Self {
        Self { left: vec![0.0; grid.side()], right: vec![0.0; grid.side()] }
    }

    /// Writes the clamped data into the first and last columns.
    pub fn apply(&self, sigma: &mut ShearGridField) {
        let last = sigma.grid.last();
        for j in 0..sigma.grid.side() {
            sigma.set(0, j, self.left[j]);
            sigma.set(last, j, self.right[j]);
        }
    }
}

/// `L(p) = (p₁, 1 + p₂ + h₀′(1 + p₂))`.
pub fn flux_l(p: Vec2, h: &PenaltyFunction) -> Result<Vec2> {
    let d = 1.0 + p.y;
    if d <= 0.0 {
        return Err(Error::InfeasibleGradient { value: d });
    }
    Ok(Vec2::new(p.x, d + h.dh(d)))
}

/// `DL(p) = diag(1, 1 + h₀″(1 + p₂))`.
pub fn flux_jacobian(p: Vec2, h: &PenaltyFunction) -> Result<Mat2> {
    let d = 1.0 + p.y;
    if d <= 0.0 {
        return Err(Error::InfeasibleGradient { value: d });
    }
    Ok(Mat2::new(1.0, 0.0, 0.0, 1.0 + h.d2h(d)))
}

/// `λ = min(1, 1 + inf h₀″)` with `ξᵀ DL(p) ξ ≥ λ|ξ|²` on feasible `p`.
pub fn ellipticity_floor(h: &PenaltyFunction) -> f64 {
    1f64.min(1.0 + h.inf_d2h())
}

/// Vertical edge weight for column `i`.
fn w_vertical(g: &ShearGrid, i: usize) -> f64 {
    let h2 = g.h() * g.h();
    if i == 0 || i == g.last() {
        0.5 * h2
    } else {
        h2
    }
}

/// Horizontal edge weight for row `j`.
fn w_horizontal(g: &ShearGrid, j: usize) -> f64 {
    let h2 = g.h() * g.h();
    if j == 0 || j == g.last() {
        0.0
    } else if j == 1 || j == g.last() - 1 {
        1.5 * h2
    } else {
        h2
    }
}

fn vertical_density(p: f64, h: &PenaltyFunction) -> f64 {
    0.5 * p * p + p + h.h(1.0 + p)
}

/// Discrete `I_s(σ) = ∫_Q ½|∇u_σ|² + h₀(det ∇u_σ)` with `|∇u_σ|² = 2 + |∇σ|² + 2∂₂σ`;
/// `+∞` when some `1 + D₂σ ≤ 0`.
pub fn energy_is(sigma: &ShearGridField, h: &PenaltyFunction) -> f64 {
    let g = sigma.grid;
    let inv_h = g.n() as f64;
    let mut acc = 4.0;
    for j in 0..g.side() {
        for i in 0..g.side() {
            let v = sigma.get(i, j);
            if j < g.last() {
                let p = (sigma.get(i, j + 1) - v) * inv_h;
                if 1.0 + p <= 0.0 {
                    return f64::INFINITY;
                }
                acc += w_vertical(&g, i) * vertical_density(p, h);
            }
            if i < g.last() {
                let p = (sigma.get(i + 1, j) - v) * inv_h;
                acc += w_horizontal(&g, j) * 0.5 * p * p;
            }
        }
    }
    acc
}

/// Gradient of [`energy_is`] with respect to every nodal value.
pub fn energy_gradient(sigma: &ShearGridField, h: &PenaltyFunction) -> Result<Vec<f64>> {
    let g = sigma.grid;
    let inv_h = g.n() as f64;
    let mut grad = vec![0.0; g.len()];
    for j in 0..g.side() {
        for i in 0..g.side() {
            let a = g.idx(i, j);
            if j < g.last() {
                let b = g.idx(i, j + 1);
                let p = (sigma.values[b] - sigma.values[a]) * inv_h;
                let l2 = flux_l(Vec2::new(0.0, p), h)?.y;
                let c = w_vertical(&g, i) * l2 * inv_h;
                grad[b] += c;
                grad[a] -= c;
            }
            if i < g.last() {
                let b = g.idx(i + 1, j);
                let p = (sigma.values[b] - sigma.values[a]) * inv_h;
                let c = w_horizontal(&g, j) * p * inv_h;
                grad[b] += c;
                grad[a] -= c;
            }
        }
    }
    Ok(grad)
}

/// Unknowns are the nodes off the clamped columns.
struct FreeNodes {
    grid: ShearGrid,
}

impl FreeNodes {
    fn count(&self) -> usize {
        (self.grid.last() - 1) * self.grid.side()
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        (i > 0 && i < self.grid.last()).then(|| j * (self.grid.last() - 1) + (i - 1))
    }

    /// Residual scaled to the strong form: `/h²` on interior rows, `/h` on free rows.
    fn scaled_residual(&self, grad: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.n() as f64;
        let mut out = Vec::with_capacity(self.count());
        for j in 0..g.side() {
            let s = if j == 0 || j == g.last() { n } else { n * n };
            for i in 1..g.last() {
                out.push(grad[g.idx(i, j)] * s);
            }
        }
        out
    }

    fn hessian(&self, sigma: &ShearGridField, h: &PenaltyFunction) -> CsrMatrix {
        let g = self.grid;
        let inv_h = g.n() as f64;
        let mut trip = Vec::with_capacity(5 * self.count());
        let mut edge = |a: (usize, usize), b: (usize, usize), c: f64| {
            let ka = self.index(a.0, a.1);
            let kb = self.index(b.0, b.1);
            if let Some(ka) = ka {
                trip.push((ka, ka, c));
            }
            if let Some(kb) = kb {
                trip.push((kb, kb, c));
            }
            if let (Some(ka), Some(kb)) = (ka, kb) {
                trip.push((ka, kb, -c));
                trip.push((kb, ka, -c));
            }
        };
        for j in 0..g.side() {
            for i in 0..g.side() {
                if j < g.last() {
                    let p = (sigma.get(i, j + 1) - sigma.get(i, j)) * inv_h;
                    let c = w_vertical(&g, i) * (1.0 + h.d2h(1.0 + p)) * inv_h * inv_h;
                    edge((i, j), (i, j + 1), c);
                }
                if i < g.last() {
                    let c = w_horizontal(&g, j) * inv_h * inv_h;
                    if c > 0.0 {
                        edge((i, j), (i + 1, j), c);
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.count(), trip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonShearOptions {
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub cg_tol: f64,
}

impl Default for NewtonShearOptions {
    fn default() -> Self {
        Self { max_iter: 60, max_backtracks: 60, cg_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearShearSolution {
    pub sigma: ShearGridField,
    pub penalty: PenaltyFunction,
    pub newton_iterations: usize,
    /// Sup norm of the scaled residual.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    /// Nodal `1 + D₂σ`.
    pub jacobian: Vec<f64>,
    /// `min 1 + D₂σ`, the reported `c`.
    pub floor: f64,
}

impl NonlinearShearSolution {
    pub fn grid(&self) -> ShearGrid {
        self.sigma.grid
    }

    pub fn energy(&self) -> f64 {
        energy_is(&self.sigma, &self.penalty)
    }

    /// `L(∇σ)` at node `(i, j)` from `D₁` (forward, backward on the last column) and `D₂`.
    pub fn flux_at(&self, i: usize, j: usize) -> Result<Vec2> {
        let s = &self.sigma;
        let last = s.grid.last();
        let n = s.grid.n() as f64;
        let d1 = if i == last { s.get(i, j) - s.get(i - 1, j) } else { s.get(i + 1, j) - s.get(i, j) } * n;
        flux_l(Vec2::new(d1, s.d2(i, j)), &self.penalty)
    }

    /// `max |1 + D₂σ + h₀′(1 + D₂σ)|` over free-edge nodes with `|x₁| ≤ margin`.
    pub fn natural_bc_residual(&self, margin: f64) -> Result<f64> {
        let g = self.grid();
        let mut worst: f64 = 0.0;
        for j in [0, g.last()] {
            for i in 1..g.last() {
                if g.coord(i).abs() <= margin {
                    worst = worst.max(self.flux_at(i, j)?.y.abs());
                }
            }
        }
        Ok(worst)
    }

    /// `1 + D₂σ` at the midpoints `(0, ±1)` of the free edges.
    pub fn mid_edge_jacobian(&self) -> (f64, f64) {
        let g = self.grid();
        let i = g.i_zero();
        (1.0 + self.sigma.d2(i, 0), 1.0 + self.sigma.d2(i, g.last()))
    }

    /// Discrete `∫ L(∇σ)·∇η`.
    pub fn weak_form_residual(&self, eta: &ShearGridField) -> Result<f64> {
        let grad = energy_gradient(&self.sigma, &self.penalty)?;
        Ok(grad.iter().zip(&eta.values).map(|(g, e)| g * e).sum())
    }
}

fn validate_init(init: &ShearGridField) -> Result<()> {
    if init.grid.n() < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution n = {} is below the minimum {MIN_RESOLUTION}",
            init.grid.n()
        )));
    }
    let m = init.min_jacobian();
    if m <= 0.0 {
        return Err(Error::InfeasibleGradient { value: m });
    }
    Ok(())
}

/// Damped Newton on the discrete Euler–Lagrange system from `σ ≡ 0`.
pub fn solve_mixed_bvp(n: usize, h: &PenaltyFunction, tol: f64) -> Result<NonlinearShearSolution> {
    let g = ShearGrid::new(n.max(2))?;
    solve_mixed_bvp_from(ShearGridField::zeros(g), h, tol, &NewtonShearOptions::default())
}

/// Damped Newton from `init`; the clamped columns of `init` are overwritten with zero.
///
/// Steps keep `min(1 + D₂σ) ≥ max(1e−6, ½ current floor)` and satisfy Armijo on the energy.
pub fn solve_mixed_bvp_from(
    mut init: ShearGridField,
    h: &PenaltyFunction,
    tol: f64,
    opts: &NewtonShearOptions,
) -> Result<NonlinearShearSolution> {
    MixedBcSpec::zero(init.grid).apply(&mut init);
    validate_init(&init)?;
    let g = init.grid;
    let free = FreeNodes { grid: g };
    let inv_h = g.n() as f64;
    let mut sigma = init;
    let mut energy = energy_is(&sigma, h);
    let mut residual_history = Vec::new();
    let mut energy_history = vec![energy];
    let fail = |reason: String, history: &[f64]| Error::NonlinearSolveFailure { reason, history: history.to_vec() };
    for iter in 0..=opts.max_iter {
        let grad = energy_gradient(&sigma, h)?;
        let res = free.scaled_residual(&grad).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        residual_history.push(res);
        if res <= tol {
            let jacobian = sigma.jacobian();
            let floor = jacobian.iter().copied().fold(f64::INFINITY, f64::min);
            return Ok(NonlinearShearSolution {
                sigma,
                penalty: *h,
                newton_iterations: iter,
                residual: res,
                residual_history,
                energy_history,
                jacobian,
                floor,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let hess = free.hessian(&sigma, h);
        let rhs: Vec<f64> =
            (0..g.side()).flat_map(|j| (1..g.last()).map(move |i| (i, j))).map(|(i, j)| -grad[g.idx(i, j)]).collect();
        let cg =
            solve_spd(&hess, &rhs, None, &CgOptions { tol: opts.cg_tol, max_iter: 100 * free.count(), jacobi: true })?;
        let mut step = ShearGridField::zeros(g);
        for j in 0..g.side() {
            for i in 1..g.last() {
                step.set(i, j, cg.x[free.index(i, j).unwrap()]);
            }
        }
        let floor = sigma.min_jacobian();
        let target = (0.5 * floor).max(1e-6);
        let mut alpha: f64 = 1.0;
        for j in 0..g.last() {
            for i in 0..g.side() {
                let d = 1.0 + (sigma.get(i, j + 1) - sigma.get(i, j)) * inv_h;
                let dd = (step.get(i, j + 1) - step.get(i, j)) * inv_h;
                if dd < 0.0 {
                    alpha = alpha.min((d - target) / -dd);
                }
            }
        }
        let slope: f64 = rhs.iter().zip(&cg.x).map(|(r, x)| -r * x).sum();
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = sigma.axpy(alpha, &step);
            let e = energy_is(&trial, h);
            let armijo = e <= energy + 1e-4 * alpha * slope;
            let flat = e.is_finite() && (e - energy).abs() <= 1e-12 * energy.abs();
            let decreases = flat
                && energy_gradient(&trial, h)
                    .is_ok_and(|gt| free.scaled_residual(&gt).iter().fold(0.0f64, |m, r| m.max(r.abs())) < res);
            if armijo || decreases {
                accepted = Some((trial, e));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, e)) = accepted else {
            return Err(fail(format!("line search stalled at iteration {iter}"), &residual_history));
        };
        sigma = trial;
        energy = e;
        energy_history.push(e);
    }
    Err(fail(format!("no convergence in {} iterations", opts.max_iter), &residual_history))
}

/// Limits of `L₂(∇σ)` approaching the corner `(1, 1)` along the two edges.
#[derive(Debug, Clone, Serialize)]
pub struct CornerMismatch {
    /// `(distance to corner, L₂)` along the top edge.
    pub top_samples: Vec<(f64, f64)>,
    /// `(distance to corner, L₂)` along the clamped side.
    pub side_samples: Vec<(f64, f64)>,
    pub top_limit: f64,
    pub side_limit: f64,
    pub gap: f64,
    /// `D₂σ` at the sample nearest the corner on each edge.
    pub top_d2_limit: f64,
    pub side_d2_limit: f64,
}

pub fn corner_mismatch(sol: &NonlinearShearSolution) -> Result<CornerMismatch> {
    let g = sol.grid();
    let last = g.last();
    let depth = (g.n() / 4).max(1);
    let mut top_samples = Vec::with_capacity(depth);
    let mut side_samples = Vec::with_capacity(depth);
    for m in 1..=depth {
        let dist = m as f64 * g.h();
        top_samples.push((dist, sol.flux_at(last - m, last)?.y));
        side_samples.push((dist, sol.flux_at(last, last - m)?.y));
    }
    let top_limit = top_samples[0].1;
    let side_limit = side_samples[0].1;
    Ok(CornerMismatch {
        top_limit,
        side_limit,
        gap: (side_limit - top_limit).abs(),
        top_d2_limit: sol.sigma.d2(last - 1, last),
        side_d2_limit: sol.sigma.d2(last, last - 1),
        top_samples,
        side_samples,
    })
}

/// Starting fields: zero, a random smooth field and a scaled bump, each vanishing on the
/// clamped sides and comfortably feasible.
pub fn default_inits(grid: ShearGrid, seed: u64) -> Vec<ShearGridField> {
    use std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (rng.gen_range(1..=3) as f64, rng.gen_range(0..=2) as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..PI))
        })
        .collect();
    let smooth = ShearGridField::from_fn(grid, |x1, x2| {
        0.03 * modes
            .iter()
            .map(|&(k, m, a, ph)| a * (0.5 * k * PI * (x1 + 1.0)).sin() * (0.5 * m * PI * x2 + ph).cos())
            .sum::<f64>()
    });
    let bump = ShearGridField::from_fn(grid, |x1, x2| 0.2 * (1.0 - x1 * x1) * (1.0 - 0.5 * x2 * x2));
    vec![ShearGridField::zeros(grid), smooth, bump]
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub energies: Vec<f64>,
    pub iterations: Vec<usize>,
    pub max_pairwise_distance: f64,
    pub max_energy_gap: f64,
    /// `(init index, diagnostic)` for starts that did not converge.
    pub failures: Vec<(usize, String)>,
}

pub fn uniqueness_check(
    inits: &[ShearGridField],
    h: &PenaltyFunction,
    tol: f64,
) -> (UniquenessReport, Vec<NonlinearShearSolution>) {
    let results: Vec<Result<NonlinearShearSolution>> = std::thread::scope(|s| {
        let handles: Vec<_> = inits
            .iter()
            .map(|init| s.spawn(move || solve_mixed_bvp_from(init.clone(), h, tol, &NewtonShearOptions::default())))
            .collect();
        handles.into_iter().map(|t| t.join().expect("solver thread panicked")).collect()
    });
    let mut sols = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => sols.push(s),
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    let energies: Vec<f64> = sols.iter().map(|s| s.energy()).collect();
    let mut dist: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for a in 0..sols.len() {
        for b in a + 1..sols.len() {
            dist = dist.max(sols[a].sigma.sup_distance(&sols[b].sigma));
            gap = gap.max((energies[a] - energies[b]).abs());
        }
    }
    let report = UniquenessReport {
        iterations: sols.iter().map(|s| s.newton_iterations).collect(),
        energies,
        max_pairwise_distance: dist,
        max_energy_gap: gap,
        failures,
    };
    (report, sols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_values() {
        let h = PenaltyFunction::default_penalty();
        let l = flux_l(Vec2::ZERO, &h).unwrap();
        assert_eq!((l.x, l.y), (0.0, 0.5));
        let d = h.natural_bc_root();
        assert!(flux_l(Vec2::new(0.3, d - 1.0), &h).unwrap().y.abs() < 1e-12);
        assert!(matches!(flux_l(Vec2::new(0.0, -1.0), &h), Err(Error::InfeasibleGradient { .. })));
        assert_eq!(ellipticity_floor(&h), 1.0);
    }

    #[test]
    fn energy_of_zero_field() {
        for h in [PenaltyFunction::default_penalty(), PenaltyFunction::negative_control()] {
            let g = ShearGrid::new(16).unwrap();
            let e = energy_is(&ShearGridField::zeros(g), &h);
            assert!((e - 4.0 * (1.0 + h.h(1.0))).abs() < 1e-12);
            let bad = ShearGridField::from_fn(g, |_, x2| -2.0 * x2);
            assert_eq!(energy_is(&bad, &h), f64::INFINITY);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let h = PenaltyFunction::default_penalty();
        let g = ShearGrid::new(16).unwrap();
        let s = &default_inits(g, 3)[1];
        let grad = energy_gradient(s, &h).unwrap();
        for (i, j) in [(3, 0), (5, 7), (16, 32), (31, 20)] {
            let k = g.idx(i, j);
            let e = 1e-6;
            let mut p = s.clone();
            p.values[k] += e;
            let mut m = s.clone();
            m.values[k] -= e;
            let fd = (energy_is(&p, &h) - energy_is(&m, &h)) / (2.0 * e);
            assert!((fd - grad[k]).abs() < 1e-7, "({i},{j}) {fd} {}", grad[k]);
        }
    }

    #[test]
    fn solves_small_grid() {
        let h = PenaltyFunction::default_penalty();
        let sol = solve_mixed_bvp(16, &h, 1e-9).unwrap();
        assert!(sol.residual <= 1e-9);
        assert!(sol.floor > 0.0);
        assert!(sol.energy_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let d = h.natural_bc_root();
        let (lo, hi) = sol.mid_edge_jacobian();
        assert!((lo - d).abs() < 1e-8 && (hi - d).abs() < 1e-8);
    }
}
