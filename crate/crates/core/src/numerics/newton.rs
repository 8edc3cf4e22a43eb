//! Damped Newton iteration for small dense systems.

use super::linear::solve_dense;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop once `‖F(x)‖∞ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// `‖F‖∞` after each iteration, starting from the initial guess.
    pub history: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Solves `F(x) = 0` by Newton's method with backtracking on `½‖F‖²`.
///
/// `f` may fail (for instance outside an admissible set); a failed trial point
/// is treated like an increase in the merit function and the step is halved.
pub fn newton_solve(
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut jac: impl FnMut(&[f64], &[f64]) -> Result<Vec<Vec<f64>>>,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution> {
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    if fx.len() != x.len() {
        return Err(Error::InvalidArgument(format!("residual has {} components for {} unknowns", fx.len(), x.len())));
    }
    let mut history = vec![inf_norm(&fx)];
    for it in 0..opts.max_iter {
        let res = *history.last().unwrap();
        if res <= opts.tol {
            return Ok(NewtonSolution { x, residual: res, iterations: it, history });
        }
        let j = jac(&x, &fx)?;
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let dx = solve_dense(j, rhs).map_err(|_| Error::NonlinearSolveFailure {
            reason: "singular Jacobian".into(),
            history: history.clone(),
        })?;
        let merit = sq_norm(&fx);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(x, d)| x + lambda * d).collect();
            if let Ok(ft) = f(&trial) {
                let m = sq_norm(&ft);
                if m.is_finite() && m <= (1.0 - 1e-4 * lambda) * merit {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, ft)) => {
                x = xt;
                fx = ft;
                history.push(inf_norm(&fx));
            }
            None => return Err(Error::NonlinearSolveFailure { reason: "line search failed".into(), history }),
        }
    }
    let res = *history.last().unwrap();
    if res <= opts.tol {
        return Ok(NewtonSolution { x, residual: res, iterations: opts.max_iter, history });
    }
    Err(Error::NonlinearSolveFailure { reason: format!("no convergence in {} iterations", opts.max_iter), history })
}

/// Forward-difference Jacobian of `f` at `x`, given `fx = f(x)`.
pub fn fd_jacobian(
    mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    fx: &[f64],
    rel_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    let mut j = vec![vec![0.0; n]; fx.len()];
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = rel_step * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let fp = f(&xp)?;
        xp[k] = x[k];
        for (row, (a, b)) in j.iter_mut().zip(fp.iter().zip(fx)) {
            row[k] = (a - b) / h;
        }
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_square_root() {
        let sol = newton_solve(
            |x| Ok(vec![x[0] * x[0] - 4.0]),
            |x, _| Ok(vec![vec![2.0 * x[0]]]),
            &[5.0],
            &NewtonOptions { tol: 1e-14, ..Default::default() },
        )
        .unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-14);
        // quadratic convergence: e_{k+1} ≈ e_k² / 4
        let e: Vec<f64> = sol.history.iter().map(|r| r / 4.0).collect();
        let tail = &e[e.len() - 3..e.len() - 1];
        assert!(tail[1] <= 2.0 * tail[0] * tail[0] + 1e-15);
    }

    #[test]
    fn circle_and_line() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]]);
        let mut g = f;
        let sol =
            newton_solve(f, |x, fx| fd_jacobian(&mut g, x, fx, 1e-7), &[2.0, 0.3], &NewtonOptions::default()).unwrap();
        let s = 0.5f64.sqrt();
        assert!((sol.x[0] - s).abs() < 1e-9 && (sol.x[1] - s).abs() < 1e-9);
    }

    #[test]
    fn inadmissible_trials_are_backtracked() {
        // ln x = 0 from x = 3: the full step lands at negative x.
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                Err(Error::InadmissibleState { r: 0.0, d: x[0] })
            } else {
                Ok(vec![x[0].ln()])
            }
        };
        let sol = newton_solve(f, |x, _| Ok(vec![vec![1.0 / x[0]]]), &[3.0], &NewtonOptions::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn singular_jacobian_is_an_error() {
        let res = newton_solve(
            |x| Ok(vec![x[0] * x[0] + 1.0]),
            |x, _| Ok(vec![vec![2.0 * x[0]]]),
            &[0.0],
            &NewtonOptions::default(),
        );
        assert!(matches!(res, Err(Error::NonlinearSolveFailure { .. })));
    }
}
