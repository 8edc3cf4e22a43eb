use crate::error::{Error, Result};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// Interval `[lo, hi]` on which the target function changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and checks for a sign change.
    pub fn new(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("bracket needs lo < hi, got [{lo}, {hi}]")));
        }
        let (f_lo, f_hi) = (f(lo), f(hi));
        if !(f_lo * f_hi <= 0.0) {
            return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
        }
        Ok(Self { lo, hi, f_lo, f_hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Brent's method: inverse quadratic interpolation and secant steps safeguarded
/// by bisection. Terminates when the bracket is narrower than `tol` or `f` vanishes.
///
/// `f` must be the function the bracket was built with.
pub fn find_root(f: impl Fn(f64) -> f64, bracket: Bracket, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::RootNotConverged { iterations: MAX_ITER })
}

/// Plain bisection; slow but independent of [`find_root`], kept for cross-checks.
pub fn bisect(f: impl Fn(f64) -> f64, bracket: Bracket, tol: f64) -> f64 {
    let (mut lo, mut hi, mut f_lo) = (bracket.lo, bracket.hi, bracket.f_lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn classic_roots() {
        let f = |x: f64| x * x - 2.0;
        let r = find_root(f, Bracket::new(f, 1.0, 2.0).unwrap(), 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let r = find_root(f64::cos, Bracket::new(f64::cos, 1.0, 2.0).unwrap(), 1e-14).unwrap();
        assert!((r - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_root_matches_bisection() {
        let f = |d: f64| 4.0 * d * d * d - 2.0 * d * d - 1.0;
        let br = Bracket::new(f, 0.5, 1.0).unwrap();
        let oracle = bisect(f, br, 1e-15);
        let r = find_root(f, br, 1e-14).unwrap();
        assert!((r - oracle).abs() < 1e-12);
        assert!((r - 0.848).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_brackets() {
        assert!(matches!(Bracket::new(|x| x * x + 1.0, -1.0, 1.0), Err(Error::NoSignChange { .. })));
        assert!(Bracket::new(|x| x, 1.0, 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn root_stays_in_bracket(shift in -0.99f64..0.99, k in 1.0f64..30.0) {
            let f = move |x: f64| (k * (x - shift)).atan() + 0.1 * (x - shift).powi(3);
            let br = Bracket::new(f, -1.0, 1.0).unwrap();
            let r = find_root(f, br, 1e-13).unwrap();
            proptest::prop_assert!(r >= -1.0 && r <= 1.0);
            proptest::prop_assert!((r - shift).abs() < 1e-10);
        }
    }
}
