use crate::error::{Error, Result};

/// Default absolute tolerance for [`integrate_1d`] callers that have no better choice.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature with Richardson error control.
///
/// The interval is bisected until `|S₂ − S₁| ≤ 15 tol` on each piece, the local
/// tolerance being halved at every level; the returned value carries the
/// Richardson correction `(S₂ − S₁)/15`.
pub fn integrate_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
    let whole = simpson(lo, hi, fa, fm, fb);
    let mut failed = false;
    let mut err_est = 0.0;
    let value = refine(&f, lo, hi, fa, fm, fb, whole, tol, MAX_DEPTH, &mut failed, &mut err_est);
    if failed || !value.is_finite() {
        return Err(Error::QuadratureFailure { estimate: value, error: err_est });
    }
    Ok(value)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut bool,
    err_est: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 || (m - a) <= f64::EPSILON * a.abs().max(1.0) {
        if delta.abs() > 15.0 * tol {
            *failed = true;
        }
        *err_est += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, failed, err_est)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, failed, err_est)
}

/// Composite midpoint nodes and weights on `[lo, hi]` with `cells` cells.
pub fn midpoint_rule(lo: f64, hi: f64, cells: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (hi - lo) / cells as f64;
    (0..cells).map(move |i| (lo + (i as f64 + 0.5) * h, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let v = integrate_1d(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        let v = integrate_1d(|r| 1.0 / r, 1.0, 2.0, 1e-12).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-11);
        // ∫ r (ρ²/r²) dr with ρ ≡ a on [a, b] is a² ln(b/a)
        let a = 1.0;
        let v = integrate_1d(|r| r * (a * a / (r * r)), 1.0, 2.0, 1e-12).unwrap();
        assert!((v - a * a * 2f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn exact_on_cubics() {
        let f = |x: f64| 3.0 * x * x * x - 2.0 * x * x + x - 7.0;
        let antideriv = |x: f64| 0.75 * x.powi(4) - 2.0 / 3.0 * x.powi(3) + 0.5 * x * x - 7.0 * x;
        let v = integrate_1d(f, -1.5, 2.5, 1e-10).unwrap();
        assert!((v - (antideriv(2.5) - antideriv(-1.5))).abs() < 1e-12);
    }

    #[test]
    fn reports_failure_on_singularity() {
        let res = integrate_1d(|x: f64| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0, 1e-14);
        assert!(matches!(res, Err(Error::QuadratureFailure { .. })));
        assert!(integrate_1d(|x| x, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn midpoint_weights_sum_to_length() {
        let s: f64 = midpoint_rule(1.0, 3.0, 17).map(|(_, w)| w).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
