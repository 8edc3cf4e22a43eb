//! Default experiments: each solves one problem, runs its checks and returns a report
//! together with the CSV/SVG artifacts.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra2d::{winding_index, Mat2, PlanarCurve, Vec2};
use crate::error::{Error, Result};
use crate::output::{annulus_svg, square_svg, CsvTable, SvgStyle};
use crate::penalty::{PenaltyFunction, PenaltyKind};
use crate::report::{Comparison::*, InvariantReport};
use crate::shear_grid::{ShearGrid, ShearGridField};
use crate::shear_strong::{
    corner_mismatch, default_inits, ellipticity_floor, energy_is, flux_jacobian, solve_mixed_bvp, uniqueness_check,
    NonlinearShearSolution,
};
use crate::shear_weak::{
    compose_minimizer, constraint_summary, dichotomy_check, envelope_violation, harmonic_solve, is_admissible,
    jump_across_k, oracle_minimize, project_admissible, sigma0_field, variational_battery, weak_energy, VariationKind,
    DEFAULT_HARMONIC_TOL, DICHOTOMY_EPS,
};
use crate::twist_explicit::{
    em_residuals, field_eval_polar, first_integral_residual, jacobian_boundary_identity, minimality_battery, profile, psi_eval,
    quarter_twist_check, r_star, radial_grid, rho_eval, solve_winding_params, winding_verify, AnnulusSpec, BatteryKind,
    PerturbationGrid, PolyBump,
};
use crate::twist_penalized::{
    conservation_residuals, max_principle_monitor, monotonicity_monitor, shoot, tolerance_stability, ShootOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TwistExplicit,
    TwistPenalized,
    ShearWeak,
    ShearStrong,
    Kernel,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::TwistExplicit => "twist-explicit",
            Self::TwistPenalized => "twist-penalized",
            Self::ShearWeak => "shear-weak",
            Self::ShearStrong => "shear-strong",
            Self::Kernel => "kernel",
        }
    }
}

/// Parameters shared by the experiments; each uses the fields that apply to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub a: f64,
    pub b: f64,
    /// Winding number `N`.
    pub winding: u32,
    /// Grid resolution (nodes per unit length) for the shear problems.
    pub n: usize,
    pub penalty: PenaltyKind,
    /// Solver tolerance; `None` picks the experiment default.
    pub tol: Option<f64>,
    pub seed: u64,
    /// Perturbations per minimality battery.
    pub battery: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { a: 1.0, b: 2.0, winding: 1, n: 64, penalty: PenaltyKind::Default, tol: None, seed: 42, battery: 100 }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match kind {
            ExperimentKind::TwistExplicit | ExperimentKind::TwistPenalized => {
                if !(self.a > 0.0 && self.a < self.b && self.b.is_finite()) {
                    return bad(format!("need 0 < a < b, got a = {}, b = {}", self.a, self.b));
                }
                if kind == ExperimentKind::TwistExplicit && self.winding == 0 {
                    return bad("the explicit twist needs N >= 1".into());
                }
            }
            ExperimentKind::ShearWeak | ExperimentKind::ShearStrong => {
                if self.n < 16 || !self.n.is_multiple_of(2) {
                    return bad(format!("grid resolution must be even and >= 16, got {}", self.n));
                }
            }
            ExperimentKind::Kernel => {}
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("tolerance must lie in (0, 1), got {t}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// File name including extension.
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: InvariantReport,
    pub artifacts: Vec<Artifact>,
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate(kind)?;
    match kind {
        ExperimentKind::TwistExplicit => twist_explicit(cfg),
        ExperimentKind::TwistPenalized => twist_penalized(cfg),
        ExperimentKind::ShearWeak => shear_weak(cfg),
        ExperimentKind::ShearStrong => shear_strong(cfg),
        ExperimentKind::Kernel => Ok(kernel(cfg)),
    }
}

fn new_report(kind: ExperimentKind, cfg: &ExperimentConfig) -> InvariantReport {
    let config = serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null);
    InvariantReport::new(kind.name(), cfg.seed, config)
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact { name: name.to_string(), contents }
}

fn twist_explicit(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = AnnulusSpec::new(cfg.a, cfg.b)?;
    let n = cfg.winding;
    let p = solve_winding_params(&spec, n)?;
    let mut rep = new_report(ExperimentKind::TwistExplicit, cfg);
    rep.table("params", p);
    rep.table("r_star", r_star(&p, &spec));

    let (a, b) = (spec.a, spec.b);
    rep.check("rho_b", "outer boundary condition rho(b) = b", (rho_eval(&p, &spec, b)? - b).abs(), Lt, 1e-10);
    let target = 2.0 * PI * n as f64;
    rep.check("psi_b", "winding condition psi(b) = 2 pi N", (psi_eval(&p, &spec, b)? - target).abs(), Lt, 1e-10);
    let grid = radial_grid(&spec, 10_000, Some(p.k));
    let (em1, em2) = em_residuals(&p, &spec, &grid)?;
    rep.check("em_radial", "energy-momentum equation, radial first integral", em1, Lt, 1e-8);
    rep.check("em_angular", "energy-momentum equation, angular momentum r rho^2 psi' = omega", em2, Lt, 1e-8);
    rep.check(
        "first_integral_constant",
        "first integral constant c = -a^2 + omega^2/a^2",
        first_integral_residual(&p, &spec, &grid)?,
        Lt,
        1e-12,
    );

    let (twist, _) = quarter_twist_check(&p, &spec);
    rep.check("quarter_twist", "rotation outside the hedgehog region is under a quarter turn", twist, Lt, FRAC_PI_2);
    rep.check("outer_twist_positive", "rotation outside the hedgehog region is positive", twist, Gt, 0.0);

    let thetas: Vec<f64> = (0..8).map(|q| 2.0 * PI * q as f64 / 8.0 + 0.1).collect();
    let mut det_inner: f64 = 0.0;
    let mut det_outer_min = f64::INFINITY;
    for i in 0..=400 {
        let t = i as f64 / 400.0;
        let r_in = a + (p.k - a) * t;
        let r_out = p.k + (b - p.k) * (0.0025 + 0.995 * t);
        for &th in &thetas {
            det_inner = det_inner.max(field_eval_polar(&p, &spec, r_in, th).det.abs());
            det_outer_min = det_outer_min.min(field_eval_polar(&p, &spec, r_out, th).det);
        }
    }
    rep.check("det_hedgehog_zero", "Jacobian vanishes identically on the hedgehog annulus", det_inner, Le, 0.0);
    rep.check("det_outer_positive", "Jacobian positive on the outer annulus", det_outer_min, Gt, 0.0);
    let windings: Vec<i64> = thetas.iter().map(|&th| winding_verify(&p, &spec, th)).collect::<Result<_>>()?;
    rep.flag("winding", "rays wind N times around the origin", windings.iter().all(|&w| w == n as i64));
    rep.table("windings", &windings);
    let rs = r_star(&p, &spec);
    rep.flag("r_star_inside", "a < r* < k", rs > a && rs < p.k);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut boundary_gap: f64 = 0.0;
    for _ in 0..5 {
        let field = PolyBump::random(&mut rng, &spec);
        for _ in 0..5 {
            let big_r = a + (b - a) * rng.gen_range(0.05..0.95);
            let (l, r) = jacobian_boundary_identity(&field, &spec, big_r, 1e-10)?;
            boundary_gap = boundary_gap.max((l - r).abs());
        }
    }
    rep.check("jacobian_boundary_identity", "integral of det grad phi equals its boundary form", boundary_gap, Lt, 1e-6);

    let mut battery_rows = Vec::new();
    for (kind, claim, anchor, seed) in [
        (
            BatteryKind::OuterSupport,
            "minimality_outer",
            "energy does not decrease for perturbations in A(r*, b)",
            cfg.seed,
        ),
        (BatteryKind::Cone, "minimality_cone", "energy does not decrease for cone perturbations", cfg.seed + 1),
    ] {
        let br = minimality_battery(&p, &spec, kind, cfg.battery, seed, PerturbationGrid::default());
        rep.flag(claim, anchor, br.all_pass() && br.studies.len() == cfg.battery);
        rep.check(&format!("{claim}_margin"), "smallest energy change plus eps_grid", br.worst_margin, Ge, 0.0);
        battery_rows.push(serde_json::json!({
            "kind": kind,
            "seed": seed,
            "accepted": br.studies.len(),
            "discarded": br.discarded,
            "worst_margin": br.worst_margin,
            "max_eps_grid": br.max_eps_grid,
        }));
    }
    rep.table("batteries", battery_rows);

    let prof = profile(&p, &spec, &radial_grid(&spec, 1001, Some(p.k)))?;
    let mut csv = CsvTable::new(&["r", "rho", "rhodot", "psi", "psidot"]);
    for i in 0..prof.len() {
        csv.push(&[prof.r[i], prof.rho[i], prof.rhodot[i], prof.psi[i], prof.psidot[i]]);
    }
    let svg = annulus_svg(|r, th| field_eval_polar(&p, &spec, r, th).u, a, b, &SvgStyle::default());
    Ok(ExperimentOutput {
        report: rep,
        artifacts: vec![artifact("profile.csv", csv.render()), artifact("deformed.svg", svg)],
    })
}

fn twist_penalized(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let spec = AnnulusSpec::new(cfg.a, cfg.b)?;
    let h = PenaltyFunction::from_kind(cfg.penalty);
    let opts = ShootOptions { tol: cfg.tol.unwrap_or(ShootOptions::default().tol), ..ShootOptions::default() };
    let sol = shoot(&spec, cfg.winding, &h, &opts)?;
    let mut rep = new_report(ExperimentKind::TwistPenalized, cfg);
    rep.table("omega", sol.omega);
    rep.table("rhodot_a", sol.rhodot_a);
    rep.table("newton_iterations", sol.newton_iterations);
    rep.check("rho_b", "outer boundary condition rho(b) = b", sol.residuals.0.abs(), Lt, 1e-8);
    rep.check("psi_b", "winding condition psi(b) = 2 pi N", sol.residuals.1.abs(), Lt, 1e-8);
    rep.check("jacobian_positive", "d = rho rho'/r stays positive", sol.min_d(), Gt, 0.0);
    let mono = monotonicity_monitor(&sol, &h);
    rep.table("monotonicity", mono);
    rep.check("d_increasing", "d strictly increasing", mono.min_delta_d, Gt, 0.0);
    rep.check("z_decreasing", "z strictly decreasing", mono.max_delta_z, Lt, 0.0);
    rep.check("zdot_closed_form", "z' matches its closed form", mono.zdot_mismatch, Lt, 1e-6);
    rep.check("rhodot_a_positive", "rho'(a) > 0", sol.rhodot_a, Gt, 0.0);
    let mp = max_principle_monitor(&sol, &h)?;
    rep.table("max_principle", mp);
    rep.flag("ratio_max_principle", "rho/r equals one at the ends, stays below one inside", mp.pass);
    let (ang, flux) = conservation_residuals(&sol, &h);
    rep.check("angular_momentum", "r rho^2 psi' = omega along the solution", ang, Lt, 1e-6);
    rep.check("radial_flux_form", "radial equation in divergence form", flux, Lt, 1e-6);
    rep.check(
        "tolerance_stability",
        "solution stable under halving the integrator tolerance",
        tolerance_stability(&spec, cfg.winding, &h, &opts)?,
        Lt,
        1e-6,
    );

    let mut csv = CsvTable::new(&["r", "rho", "rhodot", "psi", "d", "z"]);
    let pr = &sol.profile;
    for i in 0..pr.len() {
        csv.push(&[pr.r[i], pr.rho[i], pr.rhodot[i], pr.psi[i], sol.d[i], sol.z[i]]);
    }
    let svg = annulus_svg(
        |r, th| {
            let y = sol.trajectory.eval(r);
            y[0] * Vec2::e_r(th + y[2])
        },
        spec.a,
        spec.b,
        &SvgStyle::default(),
    );
    Ok(ExperimentOutput {
        report: rep,
        artifacts: vec![artifact("profile.csv", csv.render()), artifact("deformed.svg", svg)],
    })
}

/// Random admissible field for the weak problem: projected noise around `σ₀`.
fn random_admissible(n: usize, rng: &mut ChaCha8Rng) -> Result<ShearGridField> {
    let mut s = sigma0_field(n)?;
    let g = s.grid;
    let amp = rng.gen_range(0.01..0.5);
    for j in 1..g.last() {
        for i in 1..g.last() {
            let k = g.idx(i, j);
            s.values[k] += amp * rng.gen_range(-1.0..1.0);
        }
    }
    project_admissible(&mut s);
    Ok(s)
}

fn shear_weak(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = cfg.n;
    let tol = cfg.tol.unwrap_or(DEFAULT_HARMONIC_TOL);
    let mut rep = new_report(ExperimentKind::ShearWeak, cfg);
    let harm = harmonic_solve(n, tol)?;
    let sigma = compose_minimizer(&harm);
    let harm_f = harmonic_solve(2 * n, tol)?;
    let sigma_f = compose_minimizer(&harm_f);
    let h = 1.0 / n as f64;

    rep.check("mean_value_residual", "discrete Laplace equation on Omega", harm.mean_value_residual(), Lt, 1e-9);
    rep.flag(
        "max_principle",
        "harmonic part attains its extremes on the boundary of Omega",
        harm.max_principle_holds(),
    );
    rep.check(
        "comparison_bounds",
        "harmonic comparison bounds max(z2, z2 + 2x1) <= Sigma <= min(z1, z1 - 2x1)",
        harm.comparison_violation(),
        Le,
        1e-12,
    );
    rep.flag("admissible", "composed field has the boundary data and det >= 0", is_admissible(&sigma, 1e-12));
    rep.check(
        "envelope",
        "envelope sigma0(x1,-1) - 1 - x2 <= sigma <= sigma0(x1,1) + 1 - x2",
        envelope_violation(&sigma),
        Le,
        1e-12,
    );
    let cs = constraint_summary(&sigma);
    let cs_f = constraint_summary(&sigma_f);
    rep.table("constraint", serde_json::json!({ "n": cs, "2n": cs_f }));
    rep.check("det_positive_omega", "det grad u > 0 inside Omega", cs.min_interior_omega, Gt, 0.0);
    rep.check("det_positive_omega_refined", "det grad u > 0 inside Omega (2n)", cs_f.min_interior_omega, Gt, 0.0);
    rep.check("det_zero_on_p", "det grad u = 0 on the pinched strip", cs.max_abs_on_p, Le, 1e-12);

    let e_n = weak_energy(&sigma);
    let e_f = weak_energy(&sigma_f);
    let eps_grid = 10.0 * (e_n - e_f).abs();
    let mut refinement = serde_json::json!({ "n": [n, 2 * n], "energy": [e_n, e_f], "eps_grid": eps_grid });
    if n / 2 >= 16 && (n / 2).is_multiple_of(2) {
        let e_c = weak_energy(&compose_minimizer(&harmonic_solve(n / 2, tol)?));
        let rate = ((e_c - e_n).abs() / (e_n - e_f).abs()).log2();
        refinement = serde_json::json!({
            "n": [n / 2, n, 2 * n],
            "energy": [e_c, e_n, e_f],
            "eps_grid": eps_grid,
            "observed_rate": rate,
        });
        rep.check("refinement_rate", "composed energy is Cauchy under refinement", rate, Gt, 0.0);
    }
    rep.table("refinement", refinement);

    let vi = variational_battery(&sigma, VariationKind::Projected, 50, cfg.seed);
    let vi_k = variational_battery(&sigma, VariationKind::AwayFromK, 50, cfg.seed + 1);
    rep.flag(
        "variations_admissible",
        "random variations keep sigma + eta admissible",
        vi.all_admissible && vi_k.all_admissible,
    );
    rep.check(
        "variational_inequality",
        "integral of grad sigma . grad eta >= -eps_grid",
        vi.min_residual + eps_grid,
        Ge,
        0.0,
    );
    rep.check(
        "variational_equality",
        "equality for eta supported away from K and P",
        vi_k.max_abs_residual,
        Lt,
        eps_grid,
    );
    rep.table(
        "variational",
        serde_json::json!({
            "projected_min": vi.min_residual,
            "projected_max_abs": vi.max_abs_residual,
            "away_max_abs": vi_k.max_abs_residual,
        }),
    );

    let oracle = oracle_minimize(n, 200_000, 1e-13)?;
    rep.flag("oracle_converged", "projected-gradient oracle reached energy stagnation", oracle.converged);
    let dist = oracle.sigma.sup_distance(&sigma);
    rep.check("oracle_sup_distance", "oracle minimizer matches the composed field", dist, Lt, h);
    rep.check("oracle_energy", "oracle energy matches the composed energy", (oracle.energy - e_n).abs(), Lt, h);
    let g = sigma.grid;
    let mut p_dev: f64 = 0.0;
    for j in 0..g.side() {
        for i in g.i_k()..g.side() {
            p_dev = p_dev.max((oracle.sigma.get(i, j) + g.coord(j)).abs());
        }
    }
    rep.check("oracle_pinched", "oracle equals -x2 on the pinched strip", p_dev, Lt, h);
    rep.table(
        "oracle",
        serde_json::json!({ "iterations": oracle.iterations, "energy": oracle.energy, "sup_distance": dist }),
    );

    let jump = jump_across_k(&sigma);
    let jump_f = jump_across_k(&sigma_f);
    rep.check("trace_left", "one-sided x1-derivative of Sigma on K is nonzero", jump.max_left, Gt, 0.01);
    rep.check("trace_left_refined", "left trace persists under refinement", jump_f.max_left, Ge, 0.5 * jump.max_left);
    rep.check("trace_right", "x1-derivative vanishes on the pinched side", jump.max_right, Le, 1e-12);
    rep.flag("gradient_discontinuous", "grad sigma jumps across K", jump.discontinuous && jump_f.discontinuous);
    rep.table("max_left_trace", serde_json::json!({ "n": jump.max_left, "2n": jump_f.max_left }));

    let dich = dichotomy_check(&sigma, DICHOTOMY_EPS);
    rep.flag("dichotomy_i", "alternative (i): det bounded below inside Omega", dich.ess_inf_positive);
    rep.flag("dichotomy_ii_excluded", "alternative (ii): trace integrals do not all vanish", !dich.trace_integral_zero);
    let flat = ShearGridField::from_fn(g, |_, x2| -x2);
    let dich_flat = dichotomy_check(&flat, DICHOTOMY_EPS);
    rep.flag(
        "dichotomy_detector",
        "detector on sigma = -x2: (ii) holds, (i) fails",
        dich_flat.trace_integral_zero && !dich_flat.ess_inf_positive && dich_flat.consistent(),
    );
    rep.table("trace_integrals", &dich.trace_integrals);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 2);
    let (mut convex_violation, mut min_strict_gap, mut linearity): (f64, f64, f64) =
        (f64::NEG_INFINITY, f64::INFINITY, 0.0);
    for _ in 0..10 {
        let s1 = random_admissible(n, &mut rng)?;
        let s2 = random_admissible(n, &mut rng)?;
        let lam = rng.gen_range(0.05..0.95);
        let mix = s1.lerp(&s2, lam);
        let bound = lam * weak_energy(&s1) + (1.0 - lam) * weak_energy(&s2);
        let e_mix = weak_energy(&mix);
        convex_violation = convex_violation.max(e_mix - bound);
        min_strict_gap = min_strict_gap.min(bound - e_mix);
        let (d1, d2, dm) = (s1.jacobian(), s2.jacobian(), mix.jacobian());
        for k in 0..dm.len() {
            linearity = linearity.max((dm[k] - (lam * d1[k] + (1.0 - lam) * d2[k])).abs());
        }
    }
    rep.check("energy_convex", "reduced energy convex along admissible segments", convex_violation, Le, 1e-12);
    rep.check("energy_strictly_convex", "strict inequality for distinct fields", min_strict_gap, Gt, 0.0);
    rep.check("det_linear", "det of a convex combination is the combination of dets", linearity, Le, 1e-9);

    let mut field_csv = CsvTable::new(&["x1", "x2", "sigma", "det", "region"]);
    let jac = sigma.jacobian();
    for j in 0..g.side() {
        for i in 0..g.side() {
            let (x1, x2) = g.point(i, j);
            field_csv.push_cells(vec![
                x1.to_string(),
                x2.to_string(),
                sigma.get(i, j).to_string(),
                jac[g.idx(i, j)].to_string(),
                g.region(i).label().to_string(),
            ]);
        }
    }
    let mut jump_csv = CsvTable::new(&["x2", "left_trace", "right_trace"]);
    for k in 0..jump.x2.len() {
        jump_csv.push(&[jump.x2[k], jump.left[k], jump.right[k]]);
    }
    Ok(ExperimentOutput {
        report: rep,
        artifacts: vec![
            artifact("field.csv", field_csv.render()),
            artifact("jump.csv", jump_csv.render()),
            artifact("deformed.svg", square_svg(&sigma, &SvgStyle::default())),
        ],
    })
}

fn strong_corner_checks(
    rep: &mut InvariantReport,
    sol: &NonlinearShearSolution,
    sol_f: &NonlinearShearSolution,
    h: &PenaltyFunction,
    prefix: &str,
) -> Result<()> {
    let c = corner_mismatch(sol)?;
    let c_f = corner_mismatch(sol_f)?;
    let expected = 1.0 + h.dh(1.0);
    if expected.abs() > 0.05 {
        rep.check(
            &format!("{prefix}corner_gap"),
            "L2 jumps at the corner by about 1 + h0'(1)",
            (c.gap - expected.abs()).abs(),
            Le,
            0.2 * expected.abs(),
        );
        rep.check(
            &format!("{prefix}corner_gap_persists"),
            "corner gap persists under refinement",
            c_f.gap,
            Ge,
            0.5 * c.gap,
        );
    } else {
        rep.check(&format!("{prefix}corner_gap_absent"), "no corner gap when 1 + h0'(1) = 0", c.gap, Lt, 0.05);
        rep.check(
            &format!("{prefix}corner_gap_absent_refined"),
            "no corner gap when 1 + h0'(1) = 0 (2n)",
            c_f.gap,
            Lt,
            0.05,
        );
    }
    rep.table(
        &format!("{prefix}corner_table"),
        serde_json::json!([
            { "n": sol.grid().n(), "top": c.top_limit, "side": c.side_limit, "gap": c.gap, "top_d2": c.top_d2_limit },
            { "n": sol_f.grid().n(), "top": c_f.top_limit, "side": c_f.side_limit, "gap": c_f.gap, "top_d2": c_f.top_d2_limit },
        ]),
    );
    Ok(())
}

fn random_strong_field(g: ShearGrid, rng: &mut ChaCha8Rng, interior_only: bool) -> ShearGridField {
    let modes: Vec<(f64, f64, f64)> =
        (0..3).map(|_| (rng.gen_range(1..=4) as f64, rng.gen_range(1..=4) as f64, rng.gen_range(-1.0..1.0))).collect();
    let amp = rng.gen_range(0.01..0.1);
    ShearGridField::from_fn(g, |x1, x2| {
        let y = if interior_only { 0.5 * (x2 + 1.0) } else { 0.25 * (x2 + 1.0) + 0.25 };
        amp * modes.iter().map(|&(k, m, c)| c * (0.5 * k * PI * (x1 + 1.0)).sin() * (m * PI * y).sin()).sum::<f64>()
    })
}

fn shear_strong(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = cfg.n;
    let tol = cfg.tol.unwrap_or(crate::shear_strong::DEFAULT_TOL);
    let h = PenaltyFunction::from_kind(cfg.penalty);
    let g = ShearGrid::new(n)?;
    let mut rep = new_report(ExperimentKind::ShearStrong, cfg);

    let (uniq, sols) = uniqueness_check(&default_inits(g, cfg.seed), &h, tol);
    rep.check("all_starts_converge", "Newton converges from every start", uniq.failures.len() as f64, Le, 0.0);
    if sols.is_empty() {
        rep.fail_with(format!("no start converged: {:?}", uniq.failures));
        return Ok(ExperimentOutput { report: rep, artifacts: Vec::new() });
    }
    rep.check(
        "unique_minimizer",
        "solutions from distinct starts coincide",
        uniq.max_pairwise_distance,
        Lt,
        10.0 * tol,
    );
    rep.check("unique_energy", "energies from distinct starts coincide", uniq.max_energy_gap, Lt, 10.0 * tol);
    rep.table("uniqueness", &uniq);
    let sol = &sols[0];
    rep.check("residual", "discrete Euler-Lagrange residual", sol.residual, Le, tol);
    rep.check(
        "natural_bc",
        "traction-free condition on the free edges away from corners",
        sol.natural_bc_residual(0.75)?,
        Lt,
        10.0 * tol,
    );
    let d_star = h.natural_bc_root();
    let (lo, hi) = sol.mid_edge_jacobian();
    rep.check(
        "mid_edge_det",
        "free-edge Jacobian equals the root of d + h0'(d)",
        (lo - d_star).abs().max((hi - d_star).abs()),
        Lt,
        1e-6,
    );
    let side = sol.flux_at(g.last(), g.n())?.y;
    rep.check("clamped_flux", "L2 = 1 + h0'(1) on the clamped sides", (side - (1.0 + h.dh(1.0))).abs(), Lt, 1e-12);
    rep.check("constraint_floor", "min det grad u >= c > 0", sol.floor, Gt, 0.0);
    rep.table("floor", serde_json::json!({ "c": sol.floor, "d_star": d_star }));
    let e_star = sol.energy();
    let e_zero = energy_is(&ShearGridField::zeros(g), &h);
    if (1.0 + h.dh(1.0)).abs() > 0.0 {
        rep.check("energy_below_identity", "minimizer beats sigma = 0", e_star - e_zero, Lt, 0.0);
    } else {
        rep.check("energy_below_identity", "sigma = 0 is optimal when 1 + h0'(1) = 0", e_star - e_zero, Le, 0.0);
    }
    let rise = sol.energy_history.windows(2).map(|w| (w[1] - w[0]) / w[0].abs()).fold(f64::NEG_INFINITY, f64::max);
    rep.check("energy_monotone", "energy non-increasing along Newton iterates", rise.max(0.0), Le, 1e-12);
    rep.table("energy", serde_json::json!({ "minimizer": e_star, "identity": e_zero, "history": &sol.energy_history }));

    let sol_f = solve_mixed_bvp(2 * n, &h, tol)?;
    strong_corner_checks(&mut rep, sol, &sol_f, &h, "")?;
    if cfg.penalty == PenaltyKind::Default {
        let neg = PenaltyFunction::negative_control();
        let s = solve_mixed_bvp(n, &neg, tol)?;
        let s_f = solve_mixed_bvp(2 * n, &neg, tol)?;
        strong_corner_checks(&mut rep, &s, &s_f, &neg, "negcontrol_")?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed + 3);
    let mut orth: f64 = 0.0;
    for _ in 0..10 {
        let eta = random_strong_field(g, &mut rng, true);
        let scale: f64 = eta.values.iter().map(|v| v.abs()).sum::<f64>() * g.h() * g.h();
        orth = orth.max(sol.weak_form_residual(&eta)?.abs() / scale.max(1e-300));
    }
    rep.check("weak_form_orthogonal", "integral of L(grad sigma) . grad eta vanishes", orth, Lt, 10.0 * tol);
    let (mut strict_gap, mut minimality): (f64, f64) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..10 {
        let sa = random_strong_field(g, &mut rng, false);
        let sb = random_strong_field(g, &mut rng, false);
        let mid = sa.lerp(&sb, 0.5);
        let e_mid = energy_is(&mid, &h);
        strict_gap = strict_gap.min(0.5 * (energy_is(&sa, &h) + energy_is(&sb, &h)) - e_mid);
        minimality = minimality.min(e_mid - e_star);
    }
    rep.check("strongly_convex", "midpoint energy strictly below the average", strict_gap, Gt, 0.0);
    rep.check("midpoint_not_below_minimizer", "no feasible midpoint beats the minimizer", minimality, Ge, 0.0);
    let lam = ellipticity_floor(&h);
    let mut ell = f64::INFINITY;
    for _ in 0..1000 {
        let p = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-0.99..3.0));
        let xi = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let dl = flux_jacobian(p, &h)?;
        ell = ell.min(xi.dot(dl.apply(xi)) - lam * xi.norm_sq());
    }
    rep.check("ellipticity", "xi . DL(p) xi >= lambda |xi|^2", ell, Ge, 0.0);

    let mut csv = CsvTable::new(&["x1", "x2", "sigma", "det", "L1", "L2"]);
    for j in 0..g.side() {
        for i in 0..g.side() {
            let (x1, x2) = g.point(i, j);
            let l = sol.flux_at(i, j)?;
            csv.push(&[x1, x2, sol.sigma.get(i, j), sol.jacobian[g.idx(i, j)], l.x, l.y]);
        }
    }
    let c = corner_mismatch(sol)?;
    let mut corner_csv = CsvTable::new(&["distance", "top_L2", "side_L2"]);
    for (t, s) in c.top_samples.iter().zip(&c.side_samples) {
        corner_csv.push(&[t.0, t.1, s.1]);
    }
    Ok(ExperimentOutput {
        report: rep,
        artifacts: vec![
            artifact("field.csv", csv.render()),
            artifact("corner.csv", corner_csv.render()),
            artifact("deformed.svg", square_svg(&sol.sigma, &SvgStyle::default())),
        ],
    })
}

/// Randomized identities for the 2x2 kernel and the winding number.
fn kernel(cfg: &ExperimentConfig) -> ExperimentOutput {
    const CASES: usize = 10_000;
    let mut rep = new_report(ExperimentKind::Kernel, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mat = |rng: &mut ChaCha8Rng| {
        let s = 10f64.powf(rng.gen_range(-3.0..3.0));
        Mat2::new(
            s * rng.gen_range(-1.0..1.0),
            s * rng.gen_range(-1.0..1.0),
            s * rng.gen_range(-1.0..1.0),
            s * rng.gen_range(-1.0..1.0),
        )
    };
    let (mut hadamard, mut half_norm, mut adj, mut det_cof, mut cof_mul, mut det_mul, mut cof_j) =
        (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..CASES {
        let a = mat(&mut rng);
        let b = mat(&mut rng);
        let n2 = a.norm_sq();
        let c1 = Vec2::new(a.get(0, 0), a.get(1, 0)).norm();
        let c2 = Vec2::new(a.get(0, 1), a.get(1, 1)).norm();
        hadamard = hadamard.max((a.det().abs() - c1 * c2) / n2);
        half_norm = half_norm.max((a.det().abs() - 0.5 * n2) / n2);
        let m = a.matmul(&a.cof().transpose()) - Mat2::IDENTITY.scale(a.det());
        adj = adj.max(m.norm_sq().sqrt() / n2);
        det_cof = det_cof.max((a.cof().det() - a.det()).abs() / n2);
        let ab = a.matmul(&b);
        let scale = n2 * b.norm_sq();
        cof_mul = cof_mul.max((ab.cof() - a.cof().matmul(&b.cof())).norm_sq().sqrt() / scale.sqrt());
        det_mul = det_mul.max((ab.det() - a.det() * b.det()).abs() / scale);
        cof_j = cof_j.max((a.cof() - Mat2::J.transpose().matmul(&a).matmul(&Mat2::J)).norm_sq().sqrt() / n2.sqrt());
    }
    rep.check("hadamard", "|det A| <= |a1| |a2|", hadamard, Le, 1e-15);
    rep.check("det_half_norm", "|det A| <= |A|^2 / 2", half_norm, Le, 1e-15);
    rep.check("cof_adjugate", "A cof(A)^T = det(A) 1", adj, Lt, 1e-14);
    rep.check("det_cof", "det cof A = det A", det_cof, Lt, 1e-14);
    rep.check("cof_product", "cof(AB) = cof(A) cof(B)", cof_mul, Lt, 1e-14);
    rep.check("det_product", "det(AB) = det(A) det(B)", det_mul, Lt, 1e-14);
    rep.check("cof_rotation", "cof A = J^T A J", cof_j, Lt, 1e-14);

    let mut bad = [0usize; 5];
    for _ in 0..CASES {
        let k: i64 = rng.gen_range(-4..=4);
        let m = 64 + 32 * k.unsigned_abs() as usize;
        let wob = rng.gen_range(0.0..0.6);
        let freq = rng.gen_range(1..6) as f64;
        let ph = rng.gen_range(0.0..2.0 * PI);
        let pts: Vec<Vec2> = (0..m)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / m as f64;
                (1.0 + wob * (freq * t + ph).sin()) * Vec2::e_r(k as f64 * t + 0.3 * (t + ph).sin())
            })
            .collect();
        let Ok(c) = PlanarCurve::from_open(pts) else {
            bad[0] += 1;
            continue;
        };
        let w = winding_index(&c);
        if w.as_ref().ok() != Some(&k) {
            bad[0] += 1;
        }
        if winding_index(&c.reversed()).ok() != Some(-k) {
            bad[1] += 1;
        }
        if winding_index(&c.reindexed(rng.gen_range(0..m))).ok() != Some(k) {
            bad[2] += 1;
        }
        let (s, rot) = (10f64.powf(rng.gen_range(-3.0..3.0)), Mat2::rotation(rng.gen_range(0.0..2.0 * PI)));
        if winding_index(&c.map(|p| s * rot.apply(p))).ok() != Some(k) {
            bad[3] += 1;
        }
        // moved far from the origin, every curve has winding zero
        if winding_index(&c.map(|p| p + Vec2::new(5.0, 0.0))).ok() != Some(0) {
            bad[4] += 1;
        }
    }
    for (claim, anchor, v) in [
        ("winding_value", "winding of a k-fold loop is k", bad[0]),
        ("winding_reversal", "reversing orientation negates the winding", bad[1]),
        ("winding_reparametrization", "winding independent of the start point", bad[2]),
        ("winding_similarity", "winding invariant under rotation and scaling", bad[3]),
        ("winding_exterior", "winding vanishes about an exterior point", bad[4]),
    ] {
        rep.check(claim, anchor, v as f64, Le, 0.0);
    }
    rep.table("cases", CASES);
    ExperimentOutput { report: rep, artifacts: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig { a: 2.0, b: 1.0, ..ExperimentConfig::default() };
        assert!(c.validate(ExperimentKind::TwistExplicit).is_err());
        c = ExperimentConfig { n: 15, ..ExperimentConfig::default() };
        assert!(c.validate(ExperimentKind::ShearWeak).is_err());
        c = ExperimentConfig { winding: 0, ..ExperimentConfig::default() };
        assert!(c.validate(ExperimentKind::TwistExplicit).is_err());
        assert!(c.validate(ExperimentKind::TwistPenalized).is_ok());
    }

    #[test]
    fn kernel_report_passes() {
        let out = run(ExperimentKind::Kernel, &ExperimentConfig::default()).unwrap();
        assert!(out.report.pass, "{}", out.report.to_json());
    }
}
