//! Symmetric tridiagonal kernels: SPD Cholesky solves, Sturm-sequence
//! bisection for the lowest eigenvalues, and inverse iteration for the
//! eigenvectors. Everything is deterministic.

use crate::error::{DegwaveError, Result};

/// Cholesky factor of an SPD symmetric tridiagonal matrix, reusable for
/// repeated solves with the same matrix.
#[derive(Debug, Clone)]
pub struct TridiagCholesky {
    ldiag: Vec<f64>,
    lsub: Vec<f64>,
}

impl TridiagCholesky {
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        debug_assert_eq!(off.len() + 1, n);
        let mut ldiag = vec![0.0; n];
        let mut lsub = vec![0.0; n.saturating_sub(1)];
        let mut d = diag[0];
        for i in 0..n {
            if d <= 0.0 || !d.is_finite() {
                return Err(DegwaveError::SolverFailure(format!(
                    "Cholesky breakdown at row {i}: pivot {d}"
                )));
            }
            ldiag[i] = d.sqrt();
            if i + 1 < n {
                lsub[i] = off[i] / ldiag[i];
                d = diag[i + 1] - lsub[i] * lsub[i];
            }
        }
        Ok(Self { ldiag, lsub })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.ldiag.len();
        debug_assert_eq!(rhs.len(), n);
        let mut y = vec![0.0; n];
        y[0] = rhs[0] / self.ldiag[0];
        for i in 1..n {
            y[i] = (rhs[i] - self.lsub[i - 1] * y[i - 1]) / self.ldiag[i];
        }
        let mut x = y;
        x[n - 1] /= self.ldiag[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.lsub[i] * x[i + 1]) / self.ldiag[i];
        }
        x
    }
}

/// Symmetric tridiagonal matrix-vector product.
pub fn tridiag_matvec(diag: &[f64], off: &[f64], x: &[f64], out: &mut [f64]) {
    let n = diag.len();
    for i in 0..n {
        let mut s = diag[i] * x[i];
        if i > 0 {
            s += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += off[i] * x[i + 1];
        }
        out[i] = s;
    }
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below sigma,
/// by the classical LDL^T sign count.
fn sturm_count(diag: &[f64], off: &[f64], sigma: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut q = diag[0] - sigma;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        if q == 0.0 {
            q = 1e-300;
        }
        q = diag[i] - sigma - off[i - 1] * off[i - 1] / q;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin_bounds(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The k smallest eigenvalues, found by bisection on the Sturm count.
/// Relative accuracy is driven down to rounding level.
pub fn lowest_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    if k > n {
        return Err(DegwaveError::EigenRange { k, n });
    }
    let (glo, ghi) = gershgorin_bounds(diag, off);
    let scale = glo.abs().max(ghi.abs()).max(1e-300);
    let mut out = Vec::with_capacity(k);
    for i in 1..=k {
        let mut lo = glo;
        let mut hi = ghi;
        // find the smallest x with count(x) >= i
        for _ in 0..120 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(diag, off, mid) >= i {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * scale {
                break;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

/// Tridiagonal LU solve with partial pivoting; tolerates nearly singular
/// shifted matrices, as needed by inverse iteration.
fn solve_shifted(diag: &[f64], off: &[f64], sigma: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d: Vec<f64> = diag.iter().map(|v| v - sigma).collect();
    let mut du: Vec<f64> = off.to_vec();
    let mut dl: Vec<f64> = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n.saturating_sub(1)];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = 1e-300;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            dl[i] = fact;
        } else {
            swapped[i] = true;
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i < n - 2 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            dl[i] = fact;
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = 1e-300;
    }
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if swapped[i] {
            let temp = b[i];
            b[i] = b[i + 1];
            b[i + 1] = temp - dl[i] * b[i];
        } else {
            b[i + 1] -= dl[i] * b[i];
        }
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    b
}

/// Eigenvector for a converged eigenvalue by inverse iteration, orthogonalized
/// against previously found vectors.
pub fn inverse_iteration(
    diag: &[f64],
    off: &[f64],
    lambda: f64,
    previous: &[Vec<f64>],
) -> Vec<f64> {
    let n = diag.len();
    let (glo, ghi) = gershgorin_bounds(diag, off);
    let shift = lambda + 1e-12 * (ghi - glo).max(1.0);
    // deterministic start vector
    let mut v: Vec<f64> = (0..n).map(|i| (0.7 * (i as f64 + 1.0)).sin() + 0.5).collect();
    normalize(&mut v);
    for _ in 0..5 {
        let mut w = solve_shifted(diag, off, shift, &v);
        for p in previous {
            let c = dot(&w, p);
            for (wi, pi) in w.iter_mut().zip(p) {
                *wi -= c * pi;
            }
        }
        normalize(&mut w);
        v = w;
    }
    // fix the sign for reproducibility: first entry of largest magnitude positive
    let idx = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    if v[idx] < 0.0 {
        for vi in v.iter_mut() {
            *vi = -*vi;
        }
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> (Vec<f64>, Vec<f64>) {
        // 1D Dirichlet Laplacian scaled by 1/h^2, n interior points
        let h = 1.0 / (n + 1) as f64;
        (vec![2.0 / (h * h); n], vec![-1.0 / (h * h); n - 1])
    }

    #[test]
    fn cholesky_solves() {
        let (d, e) = laplacian(50);
        let chol = TridiagCholesky::new(&d, &e).unwrap();
        let rhs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
        let x = chol.solve(&rhs);
        let mut back = vec![0.0; 50];
        tridiag_matvec(&d, &e, &x, &mut back);
        for (a, b) in back.iter().zip(&rhs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(TridiagCholesky::new(&[1.0, -1.0], &[0.0]).is_err());
    }

    #[test]
    fn laplacian_eigenvalues() {
        let n = 200;
        let (d, e) = laplacian(n);
        let h = 1.0 / (n + 1) as f64;
        let lams = lowest_eigenvalues(&d, &e, 3).unwrap();
        for (k, lam) in lams.iter().enumerate() {
            // exact discrete eigenvalue 4/h^2 sin^2(k pi h / 2)
            let exact = 4.0 / (h * h) * ((k + 1) as f64 * PI * h / 2.0).sin().powi(2);
            assert_abs_diff_eq!(lam / exact, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvectors() {
        let n = 120;
        let (d, e) = laplacian(n);
        let lams = lowest_eigenvalues(&d, &e, 3).unwrap();
        let mut found: Vec<Vec<f64>> = Vec::new();
        for lam in &lams {
            let v = inverse_iteration(&d, &e, *lam, &found);
            let mut av = vec![0.0; n];
            tridiag_matvec(&d, &e, &v, &mut av);
            let resid: f64 = av
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lam * b) * (a - lam * b))
                .sum::<f64>()
                .sqrt();
            assert!(resid / lam < 1e-9, "residual {resid}");
            found.push(v);
        }
        // mutual orthogonality
        assert!(dot(&found[0], &found[1]).abs() < 1e-10);
        assert!(dot(&found[0], &found[2]).abs() < 1e-10);
    }
}
