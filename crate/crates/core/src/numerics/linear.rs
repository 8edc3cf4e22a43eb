//! Sparse symmetric operators and the (Jacobi-preconditioned) conjugate gradient method.

use crate::error::{Error, Result};

pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Square linear operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Diagonal of `A`, used as a Jacobi preconditioner when available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(j, v)| {
                let vt = self.row(j).find(|&(k, _)| k == i).map_or(0.0, |(_, w)| w);
                (v - vt).abs() <= tol * (1.0 + v.abs())
            })
        })
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..self.n).map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Target relative residual `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_CG_TOL, max_iter: 20_000, jacobi: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    /// Recursively updated residual norms, one per iteration (starting with ‖r₀‖).
    pub residual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from `x0` (or zero).
pub fn solve_spd(a: &impl LinearOperator, b: &[f64], x0: Option<&[f64]>, opts: &CgOptions) -> Result<CgSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has length {}, operator has dimension {n}",
            b.len()
        )));
    }
    let b_norm = dot(b, b).sqrt();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if b_norm == 0.0 {
        return Ok(CgSolution { x: vec![0.0; n], iterations: 0, relative_residual: 0.0, residual_history: vec![0.0] });
    }
    let inv_diag: Option<Vec<f64>> = if opts.jacobi {
        a.diagonal().filter(|d| d.iter().all(|&v| v > 0.0)).map(|d| d.iter().map(|v| 1.0 / v).collect())
    } else {
        None
    };
    let precond = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(inv) => z.iter_mut().zip(r).zip(inv).for_each(|((z, r), d)| *z = r * d),
        None => z.copy_from_slice(r),
    };

    let mut ax = vec![0.0; n];
    a.apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![dot(&r, &r).sqrt()];
    let mut ap = vec![0.0; n];

    for it in 0..opts.max_iter {
        let res = *history.last().unwrap() / b_norm;
        if res <= opts.tol {
            return Ok(finish(a, b, x, it, history, b_norm));
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolveFailure { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        history.push(dot(&r, &r).sqrt());
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = *history.last().unwrap() / b_norm;
    if res <= opts.tol {
        return Ok(finish(a, b, x, opts.max_iter, history, b_norm));
    }
    Err(Error::LinearSolveFailure { iterations: opts.max_iter, residual: res })
}

fn finish(
    a: &impl LinearOperator,
    b: &[f64],
    x: Vec<f64>,
    iterations: usize,
    residual_history: Vec<f64>,
    b_norm: f64,
) -> CgSolution {
    let mut ax = vec![0.0; b.len()];
    a.apply(&x, &mut ax);
    let true_res = b.iter().zip(&ax).map(|(b, ax)| (b - ax).powi(2)).sum::<f64>().sqrt();
    CgSolution { x, iterations, relative_residual: true_res / b_norm, residual_history }
}

/// Small dense solve by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        if a[piv][k].abs() < 1e-300 {
            return Err(Error::LinearSolveFailure { iterations: 0, residual: f64::INFINITY });
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_1d(n: usize, h: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / (h * h)));
            if i > 0 {
                t.push((i, i - 1, -1.0 / (h * h)));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0 / (h * h)));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        let sol = solve_spd(&CsrMatrix::identity(3), &b, None, &CgOptions::default()).unwrap();
        assert_eq!(sol.x, b);
    }

    #[test]
    fn dirichlet_laplacian_gives_parabola() {
        // -u'' = 1 on (0,1), u(0)=u(1)=0: u = x(1-x)/2, reproduced exactly by the 3-point stencil.
        let n = 63;
        let h = 1.0 / (n + 1) as f64;
        let a = laplacian_1d(n, h);
        let b = vec![1.0; n];
        let sol = solve_spd(&a, &b, None, &CgOptions { tol: 1e-13, ..Default::default() }).unwrap();
        for (i, &xi) in sol.x.iter().enumerate() {
            let x = (i + 1) as f64 * h;
            assert!((xi - 0.5 * x * (1.0 - x)).abs() < 1e-11);
        }
        assert!(a.is_symmetric(1e-14));
    }

    #[test]
    fn random_spd_tridiagonal_residual_and_energy_error_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let mut t = Vec::new();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..n {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { off[i].abs() } else { 0.0 };
            t.push((i, i, left + right + rng.gen_range(0.01..1.0)));
            if i + 1 < n {
                t.push((i, i + 1, off[i]));
                t.push((i + 1, i, off[i]));
            }
        }
        let a = CsrMatrix::from_triplets(n, t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tol = 1e-10;
        let exact = solve_spd(&a, &b, None, &CgOptions { tol: 1e-15, max_iter: 10_000, jacobi: false }).unwrap();
        let sol = solve_spd(&a, &b, None, &CgOptions { tol, jacobi: false, ..Default::default() }).unwrap();
        assert!(sol.relative_residual <= 10.0 * tol);

        // Energy-norm error of unpreconditioned CG is non-increasing in the iteration count.
        let mut last = (0usize, f64::INFINITY);
        for k in 1..=12 {
            let s = solve_spd(&a, &b, None, &CgOptions { tol: 10f64.powi(-k), jacobi: false, ..Default::default() })
                .unwrap();
            let e: Vec<f64> = s.x.iter().zip(&exact.x).map(|(x, y)| x - y).collect();
            let mut ae = vec![0.0; n];
            a.apply(&e, &mut ae);
            let err = dot(&e, &ae).sqrt();
            assert!(s.iterations >= last.0);
            assert!(err <= last.1 * (1.0 + 1e-9) + 1e-14, "k={k}: {err:e} > {:e}", last.1);
            last = (s.iterations, err);
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = laplacian_1d(500, 1.0);
        let b = vec![1.0; 500];
        let res = solve_spd(&a, &b, None, &CgOptions { tol: 1e-14, max_iter: 5, jacobi: false });
        assert!(matches!(res, Err(Error::LinearSolveFailure { iterations: 5, .. })));
    }

    #[test]
    fn dense_solve() {
        let x = solve_dense(vec![vec![0.0, 2.0], vec![3.0, 1.0]], vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(solve_dense(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_err());
    }
}
