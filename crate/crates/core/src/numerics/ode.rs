//! Dormand–Prince 5(4) integrator with continuous (dense) output.

use crate::error::{Error, Result};

pub const DEFAULT_ODE_RTOL: f64 = 1e-10;

/// Independent variable together with the state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState<const D: usize> {
    pub r: f64,
    pub y: [f64; D],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size; `None` leaves it to the controller.
    pub max_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: DEFAULT_ODE_RTOL, atol: DEFAULT_ODE_RTOL, max_steps: 1_000_000, max_step: None }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Shampine's midpoint weights: y(r + h/2) ≈ y + (h/2) Σ BM_i k_i.
const BM1: f64 = 6025192743.0 / 30085553152.0;
const BM3: f64 = 51252292925.0 / 65400821598.0;
const BM4: f64 = -2691868925.0 / 45128329728.0;
const BM5: f64 = 187940372067.0 / 1594534317056.0;
const BM6: f64 = -1776094331.0 / 19743644256.0;
const BM7: f64 = 11237099.0 / 235043384.0;

/// One accepted step with the coefficients of its interpolating polynomial.
#[derive(Debug, Clone, Copy)]
struct DenseStep<const D: usize> {
    r0: f64,
    h: f64,
    rcont: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    fn eval(&self, r: f64) -> [f64; D] {
        let s = ((r - self.r0) / self.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let [c1, c2, c3, c4, c5] = &self.rcont;
        std::array::from_fn(|i| c1[i] + s * (c2[i] + s1 * (c3[i] + s * (c4[i] + s1 * c5[i]))))
    }
}

/// Accepted steps of an integration, queryable anywhere in `[start, end]`.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    steps: Vec<DenseStep<D>>,
    start: OdeState<D>,
    end: OdeState<D>,
    rhs_evals: usize,
}

impl<const D: usize> Trajectory<D> {
    pub fn start(&self) -> OdeState<D> {
        self.start
    }

    pub fn end(&self) -> OdeState<D> {
        self.end
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn rhs_evals(&self) -> usize {
        self.rhs_evals
    }

    /// Dense-output state at `r`, clamped to the integration interval.
    pub fn eval(&self, r: f64) -> [f64; D] {
        if self.steps.is_empty() {
            return self.start.y;
        }
        if r >= self.end.r {
            return self.end.y;
        }
        if r <= self.start.r {
            return self.start.y;
        }
        let idx = self.steps.partition_point(|s| s.r0 + s.h <= r);
        self.steps[idx.min(self.steps.len() - 1)].eval(r)
    }

    /// States on a caller-chosen grid.
    pub fn sample(&self, grid: &[f64]) -> Vec<OdeState<D>> {
        grid.iter().map(|&r| OdeState { r, y: self.eval(r) }).collect()
    }
}

fn combo<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// Integrates `y' = f(r, y)` from `s0` to `r_end` (which must not lie before `s0.r`).
///
/// A failure of `f` inside a trial step is treated like a rejected step; if the
/// step shrinks to underflow, the evaluator's error is returned.
pub fn ode_solve<const D: usize, F>(s0: OdeState<D>, r_end: f64, opts: &OdeOptions, mut f: F) -> Result<Trajectory<D>>
where
    F: FnMut(f64, &[f64; D]) -> Result<[f64; D]>,
{
    if !(r_end >= s0.r) {
        return Err(Error::InvalidArgument(format!("integration end {r_end} precedes start {}", s0.r)));
    }
    let mut traj = Trajectory { steps: Vec::new(), start: s0, end: s0, rhs_evals: 0 };
    if r_end == s0.r {
        return Ok(traj);
    }
    let span = r_end - s0.r;
    let h_max = opts.max_step.unwrap_or(span).min(span);
    let scale = |y0: &[f64; D], y1: &[f64; D], i: usize| opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());

    let (mut r, mut y) = (s0.r, s0.y);
    let mut k1 = f(r, &y)?;
    traj.rhs_evals += 1;

    // Initial step from the Hairer–Wanner heuristic.
    let mut h = {
        let d0 = rms::<D>(|i| y[i] / scale(&y, &y, i));
        let d1 = rms::<D>(|i| k1[i] / scale(&y, &y, i));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(h_max);
        let y1 = combo(&y, h0, &[(1.0, &k1)]);
        let h1 = match f(r + h0, &y1) {
            Ok(k) => {
                traj.rhs_evals += 1;
                let d2 = rms::<D>(|i| (k[i] - k1[i]) / scale(&y, &y, i)) / h0;
                let dm = d1.max(d2);
                if dm <= 1e-15 {
                    (h0 * 1e-3).max(1e-6 * span)
                } else {
                    (0.01 / dm).powf(0.2)
                }
            }
            Err(_) => h0,
        };
        (100.0 * h0).min(h1).min(h_max)
    };

    let mut pending_err: Option<Error> = None;
    for _ in 0..opts.max_steps {
        if r >= r_end {
            break;
        }
        let h_min = 1e-14 * r.abs().max(1.0);
        if h < h_min {
            return Err(pending_err.take().unwrap_or(Error::StepUnderflow { r, h, last_state: y.to_vec() }));
        }
        let last = r + h >= r_end || (r_end - (r + h)) < h_min;
        if last {
            h = r_end - r;
        }
        let trial = (|| -> Result<_> {
            let k2 = f(r + C2 * h, &combo(&y, h, &[(A21, &k1)]))?;
            let k3 = f(r + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(r + C4 * h, &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(r + C5 * h, &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = f(r + h, &combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y_new = combo(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(r + h, &y_new)?;
            Ok((k2, k3, k4, k5, k6, k7, y_new))
        })();
        let (_k2, k3, k4, k5, k6, k7, y_new) = match trial {
            Ok(t) => {
                traj.rhs_evals += 7;
                t
            }
            Err(e) => {
                pending_err = Some(e);
                h *= 0.25;
                continue;
            }
        };
        let err = rms::<D>(|i| {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            e / scale(&y, &y_new, i)
        });
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            let rc2: [f64; D] = std::array::from_fn(|i| y_new[i] - y[i]);
            let rc3: [f64; D] = std::array::from_fn(|i| h * k1[i] - rc2[i]);
            let rc4: [f64; D] = std::array::from_fn(|i| rc2[i] - h * k7[i] - rc3[i]);
            // quartic through both end values, both end slopes and the midpoint value
            let rc5: [f64; D] = std::array::from_fn(|i| {
                let mid = 0.5 * h * (BM1 * k1[i] + BM3 * k3[i] + BM4 * k4[i] + BM5 * k5[i] + BM6 * k6[i] + BM7 * k7[i]);
                16.0 * mid - 8.0 * rc2[i] - 4.0 * rc3[i] - 2.0 * rc4[i]
            });
            traj.steps.push(DenseStep { r0: r, h, rcont: [y, rc2, rc3, rc4, rc5] });
            r = if last { r_end } else { r + h };
            y = y_new;
            k1 = k7;
            pending_err = None;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    if r < r_end {
        return Err(Error::StepUnderflow { r, h, last_state: y.to_vec() });
    }
    traj.end = OdeState { r, y };
    Ok(traj)
}

fn rms<const D: usize>(f: impl Fn(usize) -> f64) -> f64 {
    ((0..D).map(|i| f(i).powi(2)).sum::<f64>() / D as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn exp_error(tol: f64) -> f64 {
        let t = ode_solve(OdeState { r: 0.0, y: [1.0] }, 1.0, &OdeOptions::with_tol(tol), |_, y| Ok([y[0]])).unwrap();
        (t.end().y[0] - E).abs()
    }

    #[test]
    fn exponential_growth() {
        assert!(exp_error(1e-10) < 1e-8);
    }

    #[test]
    fn riccati_decay() {
        let t =
            ode_solve(OdeState { r: 0.0, y: [1.0] }, 1.0, &OdeOptions::default(), |_, y| Ok([-y[0] * y[0]])).unwrap();
        assert!((t.end().y[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn oscillator_energy_drift() {
        let t_end = 20.0 * PI;
        let t = ode_solve(OdeState { r: 0.0, y: [1.0, 0.0] }, t_end, &OdeOptions::with_tol(1e-12), |_, y| {
            Ok([y[1], -y[0]])
        })
        .unwrap();
        let grid: Vec<f64> = (0..=1000).map(|i| t_end * i as f64 / 1000.0).collect();
        let drift =
            t.sample(&grid).iter().map(|s| (0.5 * (s.y[0] * s.y[0] + s.y[1] * s.y[1]) - 0.5).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "drift {drift:e}");
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let t = ode_solve(OdeState { r: 0.0, y: [1.0, 0.0] }, 3.0, &OdeOptions::with_tol(1e-11), |r, _| {
            Ok([r.cos(), 2.0 * r])
        })
        .unwrap();
        for i in 0..=300 {
            let r = 3.0 * i as f64 / 300.0;
            let y = t.eval(r);
            assert!((y[0] - (1.0 + r.sin())).abs() < 1e-9);
            assert!((y[1] - r * r).abs() < 1e-9, "r={r} {:e} steps {}", y[1] - r * r, t.accepted_steps());
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        for tol in [1e-5, 1e-6, 1e-7] {
            let coarse = exp_error(tol);
            let fine = exp_error(tol / 100.0);
            assert!(fine * 10.0 <= coarse || fine < 1e-14, "tol {tol}: {coarse:e} -> {fine:e}");
        }
    }

    #[test]
    fn blow_up_reports_underflow() {
        // y' = y², y(0) = 1 blows up at r = 1.
        let res = ode_solve(OdeState { r: 0.0, y: [1.0] }, 2.0, &OdeOptions::default(), |_, y| Ok([y[0] * y[0]]));
        assert!(matches!(res, Err(Error::StepUnderflow { .. })), "{res:?}");
    }

    #[test]
    fn evaluator_failure_propagates() {
        let res = ode_solve(OdeState { r: 0.0, y: [1.0] }, 2.0, &OdeOptions::default(), |r, y| {
            if r > 1.0 {
                Err(Error::InadmissibleState { r, d: 0.0 })
            } else {
                Ok([y[0]])
            }
        });
        assert!(matches!(res, Err(Error::InadmissibleState { .. })), "{res:?}");
    }
}
