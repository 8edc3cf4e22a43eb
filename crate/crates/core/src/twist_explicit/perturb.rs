//! Energy comparisons `I(u + φ) − I(u)` for admissible perturbations of the explicit twist.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fields::{Scaled, SmoothBump, TestField, Trig, TwistFrameField};
use super::{field_eval_polar, r_star, AnnulusSpec, ExplicitTwistParams};
use crate::algebra2d::Mat2;

/// Tolerance on `det∇(u + φ)` at quadrature nodes.
pub const GRID_DET_TOL: f64 = 1e-10;
pub const MAX_HALVINGS: usize = 40;

/// Tensor midpoint grid in `(r, θ)` with `n_r` cells on each of `[a, k]` and `[k, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationGrid {
    pub n_r: usize,
    pub n_theta: usize,
}

impl PerturbationGrid {
    pub fn refined(&self) -> Self {
        Self { n_r: 2 * self.n_r, n_theta: 2 * self.n_theta }
    }
}

impl Default for PerturbationGrid {
    fn default() -> Self {
        Self { n_r: 48, n_theta: 96 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationOutcome {
    pub admissible: bool,
    pub min_det: f64,
    /// `I(u + φ) − I(u) = ∫ ∇u·∇φ + ½|∇φ|²`.
    pub delta_i: f64,
    /// `∫_H |∇φ|² + 2(1 + ω²/a²)(1/k − 1/r) det∇φ`.
    pub h_integral: f64,
}

// Per-node data, computed once so that the perturbation can be rescaled cheaply.
struct Nodes {
    grad_u: Vec<Mat2>,
    grad_phi: Vec<Mat2>,
    /// Integrals of ∇u·∇φ and |∇φ|² over A, and of the two parts of the H integrand.
    lin: f64,
    quad: f64,
    h_quad: f64,
    h_det: f64,
    abs_sum: f64,
}

impl Nodes {
    fn build(p: &ExplicitTwistParams, spec: &AnnulusSpec, phi: &dyn TestField, grid: PerturbationGrid) -> Self {
        let a2 = spec.a * spec.a;
        let weight_h = 2.0 * (1.0 + p.omega * p.omega / a2);
        let dt = 2.0 * PI / grid.n_theta as f64;
        let mut out =
            Nodes { grad_u: vec![], grad_phi: vec![], lin: 0.0, quad: 0.0, h_quad: 0.0, h_det: 0.0, abs_sum: 0.0 };
        for (lo, hi, in_h) in [(spec.a, p.k, true), (p.k, spec.b, false)] {
            let dr = (hi - lo) / grid.n_r as f64;
            for i in 0..grid.n_r {
                let r = lo + (i as f64 + 0.5) * dr;
                let w = r * dr * dt;
                for j in 0..grid.n_theta {
                    let t = (j as f64 + 0.5) * dt;
                    let gu = field_eval_polar(p, spec, r, t).grad;
                    let gp = phi.gradient(r, t);
                    let (l, q) = (gu.frob(&gp), gp.norm_sq());
                    out.lin += w * l;
                    out.quad += w * q;
                    out.abs_sum += w * (l.abs() + q);
                    if in_h {
                        out.h_quad += w * q;
                        out.h_det += w * weight_h * (1.0 / p.k - 1.0 / r) * gp.det();
                    }
                    out.grad_u.push(gu);
                    out.grad_phi.push(gp);
                }
            }
        }
        out
    }

    fn outcome(&self, s: f64) -> PerturbationOutcome {
        let min_det = self
            .grad_u
            .iter()
            .zip(&self.grad_phi)
            .map(|(gu, gp)| (*gu + gp.scale(s)).det())
            .fold(f64::INFINITY, f64::min);
        PerturbationOutcome {
            admissible: min_det >= -GRID_DET_TOL,
            min_det,
            delta_i: s * self.lin + 0.5 * s * s * self.quad,
            h_integral: s * s * (self.h_quad + self.h_det),
        }
    }
}

/// Energy change and hedgehog-region integral for `u + φ` on one grid.
pub fn perturbation_test(
    p: &ExplicitTwistParams,
    spec: &AnnulusSpec,
    phi: &dyn TestField,
    grid: PerturbationGrid,
) -> PerturbationOutcome {
    Nodes::build(p, spec, phi, grid).outcome(1.0)
}

/// Outcomes on a grid and its refinement, with the measured tolerance
/// `ε_grid = 10 |ΔI(n) − ΔI(2n)|` (never below a round-off floor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationStudy {
    pub scale: f64,
    pub coarse: PerturbationOutcome,
    pub fine: PerturbationOutcome,
    pub eps_grid: f64,
    pub eps_h: f64,
}

impl PerturbationStudy {
    pub fn admissible(&self) -> bool {
        self.coarse.admissible && self.fine.admissible
    }

    /// If `φ` is admissible and the hedgehog integral is non-negative then the
    /// energy does not decrease (up to `ε_grid`).
    pub fn contract_holds(&self) -> bool {
        let f = &self.fine;
        !self.admissible() || f.h_integral < -self.eps_h || f.delta_i >= -self.eps_grid
    }
}

struct Study {
    coarse: Nodes,
    fine: Nodes,
}

impl Study {
    fn at(&self, s: f64) -> PerturbationStudy {
        let (c, f) = (self.coarse.outcome(s), self.fine.outcome(s));
        let roundoff = 100.0 * f64::EPSILON * s.max(s * s) * self.fine.abs_sum;
        PerturbationStudy {
            scale: s,
            coarse: c,
            fine: f,
            eps_grid: (10.0 * (c.delta_i - f.delta_i).abs()).max(roundoff),
            eps_h: (10.0 * (c.h_integral - f.h_integral).abs()).max(roundoff),
        }
    }
}

/// [`perturbation_test`] on `grid` and on its refinement.
pub fn perturbation_study(
    p: &ExplicitTwistParams,
    spec: &AnnulusSpec,
    phi: &dyn TestField,
    grid: PerturbationGrid,
) -> PerturbationStudy {
    let st = Study { coarse: Nodes::build(p, spec, phi, grid), fine: Nodes::build(p, spec, phi, grid.refined()) };
    st.at(1.0)
}

/// Which family of perturbations a battery draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryKind {
    /// Supported in `A(r*, b)`.
    OuterSupport,
    /// Supported anywhere in the annulus, linearized Jacobian non-negative on the
    /// hedgehog region.
    Cone,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub kind: BatteryKind,
    pub seed: u64,
    pub grid: PerturbationGrid,
    pub studies: Vec<PerturbationStudy>,
    /// Samples still inadmissible after the maximal number of halvings.
    pub discarded: usize,
    /// Smallest `ΔI + ε_grid` over the admissible samples.
    pub worst_margin: f64,
    pub max_eps_grid: f64,
    /// `OuterSupport` only: smallest `H_integral + ε_h`.
    pub worst_h_margin: f64,
}

impl BatteryReport {
    pub fn all_pass(&self) -> bool {
        self.worst_margin >= 0.0 && self.worst_h_margin >= 0.0 && self.studies.iter().all(|s| s.contract_holds())
    }
}

fn random_field(
    rng: &mut ChaCha8Rng,
    p: &ExplicitTwistParams,
    spec: &AnnulusSpec,
    kind: BatteryKind,
) -> TwistFrameField {
    let (a, b, k) = (spec.a, spec.b, p.k);
    let lo = match kind {
        BatteryKind::OuterSupport => {
            let rs = r_star(p, spec);
            if rng.gen_bool(0.8) {
                rs + (k - rs) * rng.gen_range(0.0..0.95)
            } else {
                k + (b - k) * rng.gen_range(0.0..0.4)
            }
        }
        BatteryKind::Cone => a + (k - a) * rng.gen_range(0.0..0.9),
    };
    let base = lo.max(k);
    let peak = base + (b - base) * rng.gen_range(0.15..0.6);
    let hi = peak + (b - peak) * rng.gen_range(0.3..0.95);
    let b_part = rng.gen_bool(0.6).then(|| {
        let b_lo = base + (peak - base) * rng.gen_range(0.0..0.5);
        let b_hi = hi;
        SmoothBump::new(b_lo, 0.5 * (b_lo + b_hi), b_hi)
    });
    TwistFrameField {
        params: *p,
        spec: *spec,
        g: SmoothBump::new(lo, peak, hi),
        g_amp: a * rng.gen_range(0.05..0.5),
        q: Trig::random(rng, 3, 0.5),
        b: b_part,
        b_amp: a * rng.gen_range(0.05..0.5),
        v: [Trig::random(rng, 2, 0.7), Trig::random(rng, 2, 0.7)],
    }
}

/// Draws `count` random perturbations of the given kind, halves each until it is
/// admissible on both grids, and records the energy comparison.
pub fn minimality_battery(
    p: &ExplicitTwistParams,
    spec: &AnnulusSpec,
    kind: BatteryKind,
    count: usize,
    seed: u64,
    grid: PerturbationGrid,
) -> BatteryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut studies = Vec::with_capacity(count);
    let mut discarded = 0;
    for _ in 0..count {
        let field = random_field(&mut rng, p, spec, kind);
        let st =
            Study { coarse: Nodes::build(p, spec, &field, grid), fine: Nodes::build(p, spec, &field, grid.refined()) };
        let mut s = 1.0;
        let found = (0..=MAX_HALVINGS).find_map(|_| {
            let out = st.at(s);
            if out.admissible() {
                return Some(out);
            }
            s *= 0.5;
            None
        });
        match found {
            Some(out) => studies.push(out),
            None => discarded += 1,
        }
    }
    let worst_margin = studies.iter().map(|s| s.fine.delta_i + s.eps_grid).fold(f64::INFINITY, f64::min);
    let worst_h_margin = match kind {
        BatteryKind::OuterSupport => studies.iter().map(|s| s.fine.h_integral + s.eps_h).fold(f64::INFINITY, f64::min),
        BatteryKind::Cone => f64::INFINITY,
    };
    let max_eps_grid = studies.iter().map(|s| s.eps_grid).fold(0.0, f64::max);
    BatteryReport { kind, seed, grid, studies, discarded, worst_margin, max_eps_grid, worst_h_margin }
}

/// `s φ` as a field, for callers that want to evaluate a rescaled perturbation.
pub fn scaled(field: &dyn TestField, s: f64) -> Scaled<'_> {
    Scaled { field, s }
}

#[cfg(test)]
mod tests {
    use super::super::{solve_winding_params, ZeroField};
    use super::*;

    #[test]
    fn zero_perturbation() {
        let s = AnnulusSpec::new(1.0, 2.0).unwrap();
        let p = solve_winding_params(&s, 1).unwrap();
        let out = perturbation_test(&p, &s, &ZeroField, PerturbationGrid { n_r: 8, n_theta: 16 });
        assert!(out.admissible);
        assert_eq!(out.delta_i, 0.0);
        assert_eq!(out.h_integral, 0.0);
    }

    #[test]
    fn small_batteries_pass() {
        let s = AnnulusSpec::new(1.0, 2.0).unwrap();
        let p = solve_winding_params(&s, 1).unwrap();
        let grid = PerturbationGrid { n_r: 24, n_theta: 48 };
        for kind in [BatteryKind::OuterSupport, BatteryKind::Cone] {
            let rep = minimality_battery(&p, &s, kind, 6, 11, grid);
            assert_eq!(rep.discarded, 0);
            assert!(rep.all_pass(), "{kind:?}: {rep:?}");
        }
    }

    #[test]
    fn unconstrained_direction_is_inadmissible() {
        // −ẽ_r on the plateau pulls the hedgehog region inside the circle S_a.
        let s = AnnulusSpec::new(1.0, 2.0).unwrap();
        let p = solve_winding_params(&s, 1).unwrap();
        let field = TwistFrameField {
            params: p,
            spec: s,
            g: SmoothBump::new(1.0 + 0.1 * (p.k - 1.0), p.k + 0.3 * (2.0 - p.k), 1.99),
            g_amp: -0.2,
            q: Trig { cos: vec![], sin: vec![] },
            b: None,
            b_amp: 0.0,
            v: [Trig { cos: vec![], sin: vec![] }, Trig { cos: vec![], sin: vec![] }],
        };
        let out = perturbation_test(&p, &s, &scaled(&field, 1e-6), PerturbationGrid { n_r: 16, n_theta: 16 });
        assert!(!out.admissible);
    }
}
