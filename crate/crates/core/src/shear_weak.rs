//! Shear maps under the weak constraint `det ∇u_σ ≥ 0`: the harmonic/pinched minimizer
//! and the checks around it.
//!
//! Boundary data `σ₀` vanish on `M`, equal `−2x₁x₂` on `N` and `−x₂` on `P`. Every
//! admissible field equals `−x₂` on `P`, and the minimizer is the harmonic extension of
//! `σ₀` into `Ω = (−1, 1/2) × (−1, 1)` glued to that strip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{solve_spd, CgOptions, CsrMatrix};
use crate::shear_grid::{Region, ShearGrid, ShearGridField};

pub const MIN_RESOLUTION: usize = 16;
pub const DEFAULT_HARMONIC_TOL: f64 = 1e-13;
/// Threshold for "the trace integral vanishes" in [`dichotomy_check`].
pub const DICHOTOMY_EPS: f64 = 1e-6;

fn check_resolution(n: usize) -> Result<ShearGrid> {
    if n < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!("resolution n = {n} is below the minimum {MIN_RESOLUTION}")));
    }
    ShearGrid::new(n)
}

/// Boundary data `σ₀` extended to all of `Q̄`.
pub fn sigma0_eval(x1: f64, x2: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x1) || !(-1.0..=1.0).contains(&x2) {
        return Err(Error::OutsideDomain { x: x1, y: x2, domain: "closed square [-1,1]^2" });
    }
    Ok(sigma0_unchecked(Region::of(x1), x1, x2))
}

fn sigma0_unchecked(region: Region, x1: f64, x2: f64) -> f64 {
    match region {
        Region::M => 0.0,
        Region::N => -2.0 * x1 * x2,
        Region::P => -x2,
    }
}

/// `det ∇u_{σ₀}`: 1 on `M`, `1 − 2x₁` on `N`, 0 on `P`.
pub fn det_sigma0(x1: f64, _x2: f64) -> f64 {
    match Region::of(x1) {
        Region::M => 1.0,
        Region::N => 1.0 - 2.0 * x1,
        Region::P => 0.0,
    }
}

fn sigma0_node(g: &ShearGrid, i: usize, j: usize) -> f64 {
    let (x1, x2) = g.point(i, j);
    sigma0_unchecked(g.region(i), x1, x2)
}

/// `σ₀` sampled at every node of `Q`.
pub fn sigma0_field(n: usize) -> Result<ShearGridField> {
    let g = ShearGrid::new(n)?;
    let mut f = ShearGridField::zeros(g);
    for j in 0..g.side() {
        for i in 0..g.side() {
            f.set(i, j, sigma0_node(&g, i, j));
        }
    }
    Ok(f)
}

/// Lower and upper envelopes `σ₀(x₁,−1) − 1 − x₂ ≤ σ ≤ σ₀(x₁,1) + 1 − x₂`.
pub fn envelope(x1: f64, x2: f64) -> (f64, f64) {
    let r = Region::of(x1);
    (sigma0_unchecked(r, x1, -1.0) - 1.0 - x2, sigma0_unchecked(r, x1, 1.0) + 1.0 - x2)
}

/// Harmonic comparison bounds on `Ω̄`: `max(z₂, z₂ + 2x₁) ≤ Σ ≤ min(z₁, z₁ − 2x₁)` with
/// `z₁ = 1 − x₂`, `z₂ = −1 − x₂`.
pub fn comparison_bounds(x1: f64, x2: f64) -> (f64, f64) {
    let z1 = 1.0 - x2;
    let z2 = -1.0 - x2;
    (z2.max(z2 + 2.0 * x1), z1.min(z1 - 2.0 * x1))
}

/// Discrete harmonic extension of `σ₀` into `Ω`.
#[derive(Debug, Clone, Serialize)]
pub struct HarmonicSolution {
    /// `Σ` on columns `0..=i_K`; the remaining columns hold `σ₀`.
    pub sigma: ShearGridField,
    pub cg_iterations: usize,
    pub relative_residual: f64,
}

impl HarmonicSolution {
    pub fn grid(&self) -> ShearGrid {
        self.sigma.grid
    }

    /// `max |Σ_ij − mean of its four neighbours|` over interior nodes of `Ω`.
    pub fn mean_value_residual(&self) -> f64 {
        let g = self.grid();
        let s = &self.sigma;
        let mut worst: f64 = 0.0;
        for j in 1..g.last() {
            for i in 1..g.i_k() {
                let mean = 0.25 * (s.get(i - 1, j) + s.get(i + 1, j) + s.get(i, j - 1) + s.get(i, j + 1));
                worst = worst.max((s.get(i, j) - mean).abs());
            }
        }
        worst
    }

    /// Extremes over the interior of `Ω` and over `∂Ω`: `(interior min, interior max, boundary min, boundary max)`.
    pub fn extremes(&self) -> (f64, f64, f64, f64) {
        let g = self.grid();
        let mut e = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..g.side() {
            for i in 0..=g.i_k() {
                let v = self.sigma.get(i, j);
                if i == 0 || j == 0 || i == g.i_k() || j == g.last() {
                    e.2 = e.2.min(v);
                    e.3 = e.3.max(v);
                } else {
                    e.0 = e.0.min(v);
                    e.1 = e.1.max(v);
                }
            }
        }
        e
    }

    pub fn max_principle_holds(&self) -> bool {
        let (imin, imax, bmin, bmax) = self.extremes();
        imin >= bmin && imax <= bmax
    }

    /// Largest violation of [`comparison_bounds`] over `Ω̄` (≤ 0 when the bounds hold).
    pub fn comparison_violation(&self) -> f64 {
        let g = self.grid();
        let mut worst = f64::NEG_INFINITY;
        for j in 0..g.side() {
            for i in 0..=g.i_k() {
                let (x1, x2) = g.point(i, j);
                let (lo, hi) = comparison_bounds(x1, x2);
                let v = self.sigma.get(i, j);
                worst = worst.max(lo - v).max(v - hi);
            }
        }
        worst
    }
}

/// Solves the 5-point Laplace problem on `Ω` with Dirichlet data `σ₀` (`−x₂` on `K`).
pub fn harmonic_solve(n: usize, tol: f64) -> Result<HarmonicSolution> {
    let g = check_resolution(n)?;
    let ik = g.i_k();
    let cols = ik - 1;
    let rows = g.last() - 1;
    let unknown = |i: usize, j: usize| (j - 1) * cols + (i - 1);
    let mut sigma = sigma0_field(n)?;
    let mut triplets = Vec::with_capacity(5 * cols * rows);
    let mut rhs = vec![0.0; cols * rows];
    for j in 1..=rows {
        for i in 1..=cols {
            let k = unknown(i, j);
            triplets.push((k, k, 4.0));
            for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if ni == 0 || ni == ik || nj == 0 || nj == g.last() {
                    rhs[k] += sigma0_node(&g, ni, nj);
                } else {
                    triplets.push((k, unknown(ni, nj), -1.0));
                }
            }
        }
    }
    let a = CsrMatrix::from_triplets(cols * rows, triplets);
    let opts = CgOptions { tol, max_iter: 50 * (cols + rows) * 10, jacobi: true };
    let sol = solve_spd(&a, &rhs, None, &opts)?;
    for j in 1..=rows {
        for i in 1..=cols {
            sigma.set(i, j, sol.x[unknown(i, j)]);
        }
    }
    Ok(HarmonicSolution { sigma, cg_iterations: sol.iterations, relative_residual: sol.relative_residual })
}

/// Glues `Σ` on `Ω̄` to `−x₂` on `P`.
pub fn compose_minimizer(harmonic: &HarmonicSolution) -> ShearGridField {
    let mut s = harmonic.sigma.clone();
    let g = s.grid;
    for j in 0..g.side() {
        for i in g.i_k()..g.side() {
            s.set(i, j, -g.coord(j));
        }
    }
    s
}

/// Nodal `1 + D₂σ`.
pub fn constraint_field(sigma: &ShearGridField) -> Vec<f64> {
    sigma.jacobian()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintSummary {
    /// Minimum of `1 + D₂σ` over interior nodes of `Ω`.
    pub min_interior_omega: f64,
    /// Minimum over all of `Q`.
    pub min_all: f64,
    /// `max |1 + D₂σ|` over columns in `P`.
    pub max_abs_on_p: f64,
}

pub fn constraint_summary(sigma: &ShearGridField) -> ConstraintSummary {
    let g = sigma.grid;
    let jac = constraint_field(sigma);
    let mut s = ConstraintSummary { min_interior_omega: f64::INFINITY, min_all: f64::INFINITY, max_abs_on_p: 0.0 };
    for j in 0..g.side() {
        for i in 0..g.side() {
            let d = jac[g.idx(i, j)];
            s.min_all = s.min_all.min(d);
            if i > 0 && i < g.i_k() && j > 0 && j < g.last() {
                s.min_interior_omega = s.min_interior_omega.min(d);
            }
            if i >= g.i_k() {
                s.max_abs_on_p = s.max_abs_on_p.max(d.abs());
            }
        }
    }
    s
}

/// Largest violation of the envelope over every node (≤ 0 when it holds).
pub fn envelope_violation(sigma: &ShearGridField) -> f64 {
    let g = sigma.grid;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..g.side() {
        for i in 0..g.side() {
            let (x1, x2) = g.point(i, j);
            let (lo, hi) = envelope(x1, x2);
            let v = sigma.get(i, j);
            worst = worst.max(lo - v).max(v - hi);
        }
    }
    worst
}

/// Traces of `D₁σ` on both sides of `K`.
#[derive(Debug, Clone, Serialize)]
pub struct JumpAcrossK {
    pub x2: Vec<f64>,
    /// One-sided second-order `D₁Σ(1/2⁻, x₂)`.
    pub left: Vec<f64>,
    /// One-sided second-order `D₁σ(1/2⁺, x₂)` inside `P`.
    pub right: Vec<f64>,
    pub max_left: f64,
    pub max_right: f64,
    pub discontinuous: bool,
}

/// Interior nodes of `K` only; the corner values are boundary data.
pub fn jump_across_k(sigma: &ShearGridField) -> JumpAcrossK {
    let g = sigma.grid;
    let ik = g.i_k();
    let mut out = JumpAcrossK {
        x2: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        max_left: 0.0,
        max_right: 0.0,
        discontinuous: false,
    };
    for j in 1..g.last() {
        let l = sigma.d1_left(ik, j);
        let r = sigma.d1_right(ik, j);
        out.x2.push(g.coord(j));
        out.left.push(l);
        out.right.push(r);
        out.max_left = out.max_left.max(l.abs());
        out.max_right = out.max_right.max(r.abs());
    }
    out.discontinuous = out.left.iter().zip(&out.right).any(|(l, r)| (l - r).abs() > 1e-6);
    out
}

fn for_each_edge(g: &ShearGrid, mut f: impl FnMut(usize, usize, bool, f64)) {
    let last = g.last();
    for j in 0..g.side() {
        for i in 0..g.side() {
            let a = g.idx(i, j);
            if i < last {
                let w = if j == 0 || j == last { 0.5 } else { 1.0 };
                f(a, g.idx(i + 1, j), false, w);
            }
            if j < last {
                let w = if i == 0 || i == last { 0.5 } else { 1.0 };
                f(a, g.idx(i, j + 1), true, w);
            }
        }
    }
}

/// Discrete `∫_Q ∇σ·∇η`.
pub fn dirichlet_inner(sigma: &ShearGridField, eta: &ShearGridField) -> f64 {
    let mut acc = 0.0;
    for_each_edge(&sigma.grid, |a, b, _, w| {
        acc += w * (sigma.values[b] - sigma.values[a]) * (eta.values[b] - eta.values[a]);
    });
    acc
}

/// Discrete `∫_Q |∇σ|²`.
pub fn dirichlet_energy(sigma: &ShearGridField) -> f64 {
    dirichlet_inner(sigma, sigma)
}

/// Discrete `I_w(σ) = ∫_Q |∇u_σ|² = ∫_Q 2 + |∇σ|² + 2∂₂σ`.
pub fn weak_energy(sigma: &ShearGridField) -> f64 {
    let h = sigma.grid.h();
    let mut acc = 8.0;
    for_each_edge(&sigma.grid, |a, b, vertical, w| {
        let d = sigma.values[b] - sigma.values[a];
        acc += w * d * d;
        if vertical {
            acc += 2.0 * w * h * d;
        }
    });
    acc
}

/// Discrete `∫ ∇σ·∇η`, which is `≥ 0` for every admissible variation when `σ` minimizes.
pub fn variational_inequality_residual(sigma: &ShearGridField, eta: &ShearGridField) -> f64 {
    dirichlet_inner(sigma, eta)
}

/// Boundary values equal `σ₀` and `1 + D₂σ ≥ −tol` everywhere.
pub fn is_admissible(sigma: &ShearGridField, tol: f64) -> bool {
    let g = sigma.grid;
    for j in 0..g.side() {
        for i in 0..g.side() {
            if g.on_boundary(i, j) && sigma.get(i, j) != sigma0_node(&g, i, j) {
                return false;
            }
        }
    }
    sigma.min_jacobian() >= -tol
}

/// Euclidean projection of `v` onto nondecreasing sequences bounded by `[lo, hi]`.
pub fn isotonic_clamped(v: &mut [f64], lo: f64, hi: f64) {
    let mut means: Vec<f64> = Vec::with_capacity(v.len());
    let mut sizes: Vec<usize> = Vec::with_capacity(v.len());
    for &x in v.iter() {
        means.push(x);
        sizes.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, s2) = (means.pop().unwrap(), sizes.pop().unwrap());
            let (m1, s1) = (means.pop().unwrap(), sizes.pop().unwrap());
            let s = s1 + s2;
            means.push((m1 * s1 as f64 + m2 * s2 as f64) / s as f64);
            sizes.push(s);
        }
    }
    let mut k = 0;
    for (m, s) in means.into_iter().zip(sizes) {
        for x in &mut v[k..k + s] {
            *x = m.clamp(lo, hi);
        }
        k += s;
    }
}

/// Projects the interior nodes of `σ` onto `{1 + D₂σ ≥ 0}` with the boundary values held.
///
/// Along each column `τ = σ + x₂` must be nondecreasing, so the projection is an isotonic
/// regression between the two fixed end values.
pub fn project_admissible(sigma: &mut ShearGridField) {
    let g = sigma.grid;
    let last = g.last();
    let mut col = vec![0.0; last - 1];
    for i in 1..last {
        for (k, c) in col.iter_mut().enumerate() {
            *c = sigma.get(i, k + 1) + g.coord(k + 1);
        }
        let lo = sigma.get(i, 0) + g.coord(0);
        let hi = sigma.get(i, last) + g.coord(last);
        isotonic_clamped(&mut col, lo, hi);
        for (k, c) in col.iter().enumerate() {
            sigma.set(i, k + 1, c - g.coord(k + 1));
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSolution {
    pub sigma: ShearGridField,
    pub iterations: usize,
    pub energy: f64,
    /// `|I_w(σ_k) − I_w(σ_{k−1})|` at the last step.
    pub last_energy_change: f64,
    pub converged: bool,
}

/// Accelerated projected gradient on the discrete Dirichlet energy from `σ₀`.
///
/// Stops once one step changes the energy by less than `energy_tol` and no node by more
/// than `energy_tol.sqrt()`; otherwise returns the last iterate with `converged = false`.
pub fn oracle_minimize(n: usize, max_iters: usize, energy_tol: f64) -> Result<OracleSolution> {
    let g = check_resolution(n)?;
    let last = g.last();
    let step = 1.0 / 16.0;
    let mut x = sigma0_field(n)?;
    let mut x_prev: ShearGridField;
    let mut y = x.clone();
    let mut grad = vec![0.0; g.len()];
    let mut t: f64 = 1.0;
    let mut energy = dirichlet_energy(&x);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        for j in 1..last {
            for i in 1..last {
                let k = g.idx(i, j);
                let v = &y.values;
                grad[k] = 2.0 * (4.0 * v[k] - v[k - 1] - v[k + 1] - v[k - g.side()] - v[k + g.side()]);
            }
        }
        let mut next = y.clone();
        for j in 1..last {
            for i in 1..last {
                let k = g.idx(i, j);
                next.values[k] -= step * grad[k];
            }
        }
        project_admissible(&mut next);
        let e_next = dirichlet_energy(&next);
        let restart =
            next.values.iter().zip(&y.values).zip(&x.values).map(|((xn, yv), xv)| (yv - xn) * (xn - xv)).sum::<f64>()
                > 0.0;
        let moved = next.sup_distance(&x);
        change = (e_next - energy).abs();
        x_prev = std::mem::replace(&mut x, next);
        energy = e_next;
        if change < energy_tol && moved < energy_tol.sqrt() {
            converged = true;
            break;
        }
        if restart {
            t = 1.0;
            y = x.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            t = t_next;
            y = x.axpy(beta, &x.axpy(-1.0, &x_prev));
        }
    }
    let energy = weak_energy(&x);
    Ok(OracleSolution { sigma: x, iterations, energy, last_energy_change: change, converged })
}

/// The two alternatives, at most one of which can hold for an admissible minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct Dichotomy {
    /// `min over interior Ω of 1 + D₂σ > 0`.
    pub ess_inf_positive: bool,
    /// Every `|∫ φ D₁σ(1/2⁻, x₂) dx₂| < eps` over the test battery.
    pub trace_integral_zero: bool,
    pub min_interior: f64,
    pub trace_integrals: Vec<f64>,
}

impl Dichotomy {
    pub fn consistent(&self) -> bool {
        !(self.ess_inf_positive && self.trace_integral_zero)
    }
}

/// `sin²` bump on `(c − w, c + w)`.
fn bump(t: f64, c: f64, w: f64) -> f64 {
    let s = (t - c) / w;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * std::f64::consts::PI * (s + 1.0)).sin().powi(2)
    }
}

pub fn dichotomy_check(sigma: &ShearGridField, eps: f64) -> Dichotomy {
    let g = sigma.grid;
    let ik = g.i_k();
    let h = g.h();
    let min_interior = constraint_summary(sigma).min_interior_omega;
    let battery = [(-0.6, 0.3), (-0.2, 0.5), (0.0, 0.9), (0.3, 0.4), (0.7, 0.25), (-0.5, 0.45)];
    let trace_integrals: Vec<f64> = battery
        .iter()
        .map(|&(c, w)| (1..g.last()).map(|j| h * bump(g.coord(j), c, w) * sigma.d1_left(ik, j)).sum())
        .collect();
    Dichotomy {
        ess_inf_positive: min_interior > 0.0,
        trace_integral_zero: trace_integrals.iter().all(|v| v.abs() < eps),
        min_interior,
        trace_integrals,
    }
}

/// Random perturbation families for the variational inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VariationKind {
    /// `P_A(σ + ξ) − σ` for nodal noise `ξ` on all interior nodes of `Q`.
    Projected,
    /// Smooth bumps supported in `x₁ < 0.4`, away from `K` and `P`.
    AwayFromK,
}

/// Draws an admissible `η` for the given minimizer candidate.
pub fn random_variation(sigma: &ShearGridField, kind: VariationKind, rng: &mut ChaCha8Rng) -> ShearGridField {
    let g = sigma.grid;
    let last = g.last();
    match kind {
        VariationKind::Projected => {
            let amp = 10f64.powf(rng.gen_range(-3.0..0.0));
            let mut moved = sigma.clone();
            for j in 1..last {
                for i in 1..last {
                    let k = g.idx(i, j);
                    moved.values[k] += amp * rng.gen_range(-1.0..1.0);
                }
            }
            project_admissible(&mut moved);
            moved.axpy(-1.0, sigma)
        }
        VariationKind::AwayFromK => {
            let count = rng.gen_range(1..=3);
            let mut specs = Vec::with_capacity(count);
            for _ in 0..count {
                let w1 = rng.gen_range(0.1..0.5);
                let c1 = rng.gen_range(-1.0 + w1..0.4 - w1);
                let w2 = rng.gen_range(0.1..0.9);
                let c2 = rng.gen_range(-1.0 + w2..1.0 - w2);
                specs.push((c1, w1, c2, w2, rng.gen_range(-1.0..1.0)));
            }
            let mut eta = ShearGridField::from_fn(g, |x1, x2| {
                specs.iter().map(|&(c1, w1, c2, w2, a)| a * bump(x1, c1, w1) * bump(x2, c2, w2)).sum()
            });
            for _ in 0..60 {
                if sigma.axpy(1.0, &eta).min_jacobian() >= 0.0 {
                    break;
                }
                eta.values.iter_mut().for_each(|v| *v *= 0.5);
            }
            eta
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalBattery {
    pub seed: u64,
    pub kind: VariationKind,
    pub residuals: Vec<f64>,
    pub min_residual: f64,
    pub max_abs_residual: f64,
    pub all_admissible: bool,
}

pub fn variational_battery(sigma: &ShearGridField, kind: VariationKind, count: usize, seed: u64) -> VariationalBattery {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals = Vec::with_capacity(count);
    let mut all_admissible = true;
    for _ in 0..count {
        let eta = random_variation(sigma, kind, &mut rng);
        all_admissible &= is_admissible(&sigma.axpy(1.0, &eta), 1e-12);
        residuals.push(variational_inequality_residual(sigma, &eta));
    }
    VariationalBattery {
        seed,
        kind,
        min_residual: residuals.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs_residual: residuals.iter().map(|r| r.abs()).fold(0.0, f64::max),
        residuals,
        all_admissible,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub resolutions: Vec<usize>,
    pub energies: Vec<f64>,
    pub max_left_trace: Vec<f64>,
    /// `|I(n_k) − I(n_{k+1})|`.
    pub differences: Vec<f64>,
    /// `log₂` of successive difference ratios.
    pub observed_rates: Vec<f64>,
}

impl RefinementStudy {
    /// Tolerance `10 |I(n) − I(2n)|` for the coarsest pair.
    pub fn eps_grid(&self) -> f64 {
        10.0 * self.differences.first().copied().unwrap_or(0.0)
    }
}

/// Composed-field energy and trace across `resolutions`, solved concurrently.
pub fn refinement_study(resolutions: &[usize], tol: f64) -> Result<RefinementStudy> {
    let solved: Vec<Result<(f64, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = resolutions
            .iter()
            .map(|&n| {
                s.spawn(move || {
                    let sigma = compose_minimizer(&harmonic_solve(n, tol)?);
                    Ok((weak_energy(&sigma), jump_across_k(&sigma).max_left))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("refinement worker panicked")).collect()
    });
    let mut energies = Vec::new();
    let mut max_left_trace = Vec::new();
    for r in solved {
        let (e, t) = r?;
        energies.push(e);
        max_left_trace.push(t);
    }
    let differences: Vec<f64> = energies.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let observed_rates = differences.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
    Ok(RefinementStudy { resolutions: resolutions.to_vec(), energies, max_left_trace, differences, observed_rates })
}
