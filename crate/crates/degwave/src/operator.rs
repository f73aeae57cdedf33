//! Flux-form assembly of the degenerate/singular elliptic operator
//! A u = (x^alpha u_x)_x + mu x^{alpha-2} u with regime-dependent boundary
//! conditions, its spectrum, and the weighted norms built on it.
//!
//! The stiffness stored here is T = M (-A) restricted to the active nodes,
//! so that u^T T u is the discrete weighted energy seminorm and the
//! generalized eigenproblem T phi = lambda M phi is symmetric.

use crate::error::{DegwaveError, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::params::{Parameters, Regime};
use crate::tridiag::{inverse_iteration, lowest_eigenvalues, tridiag_matvec};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    params: Parameters,
    grid: Arc<GridSpec>,
    first_active: usize,
    stiff_diag: Vec<f64>,
    stiff_off: Vec<f64>,
    mass: Vec<f64>,
    regularization: Option<u64>,
}

/// Exact integral of the (possibly regularized) potential weight over [a, b].
fn potential_integral(alpha: f64, reg: Option<u64>, a: f64, b: f64) -> f64 {
    match reg {
        None => {
            // integral of x^{alpha-2}; alpha != 1 so the exponent never hits -1
            let p = alpha - 1.0;
            (b.powf(p) - a.powf(p)) / p
        }
        Some(n) => {
            let shift = 1.0 / n as f64;
            let p = alpha - 1.0;
            ((b + shift).powf(p) - (a + shift).powf(p)) / p
        }
    }
}

pub fn assemble(
    p: Parameters,
    grid: Arc<GridSpec>,
    regularization: Option<u64>,
) -> Result<DiscreteOperator> {
    let n = grid.n();
    let h = grid.h();
    let first_active = match p.regime() {
        Regime::WeaklyDegenerate => 1,
        Regime::StronglyDegenerate => 0,
    };
    let n_active = n - first_active;
    let mut diag = vec![0.0; n_active];
    let mut off = vec![0.0; n_active - 1];
    let mut mass = vec![0.0; n_active];
    for (row, j) in (first_active..n).enumerate() {
        let right = grid.face(j).powf(p.alpha());
        let left = if j == 0 { 0.0 } else { grid.face(j - 1).powf(p.alpha()) };
        let cell_lo = if j == 0 { 0.0 } else { grid.face(j - 1) };
        let cell_hi = grid.face(j);
        mass[row] = cell_hi - cell_lo;
        let pot = potential_integral(p.alpha(), regularization, cell_lo, cell_hi);
        diag[row] = (left + right) / h - p.mu() * pot;
        if row + 1 < n_active {
            off[row] = -right / h;
        }
    }
    Ok(DiscreteOperator {
        params: p,
        grid,
        first_active,
        stiff_diag: diag,
        stiff_off: off,
        mass,
        regularization,
    })
}

impl DiscreteOperator {
    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn regularization(&self) -> Option<u64> {
        self.regularization
    }

    pub fn first_active(&self) -> usize {
        self.first_active
    }

    pub fn n_active(&self) -> usize {
        self.stiff_diag.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> (&[f64], &[f64]) {
        (&self.stiff_diag, &self.stiff_off)
    }

    /// Node values on the active range, dropping eliminated boundary nodes.
    pub fn restrict(&self, u: &GridFunction) -> Result<Vec<f64>> {
        if u.len() != self.grid.n() + 1 {
            return Err(DegwaveError::ShapeMismatch { expected: self.grid.n() + 1, got: u.len() });
        }
        Ok(u.values[self.first_active..self.grid.n()].to_vec())
    }

    /// Active values back onto the full grid, zeros at eliminated nodes.
    pub fn embed(&self, active: &[f64]) -> GridFunction {
        let mut g = GridFunction::zeros(self.grid.clone());
        g.values[self.first_active..self.grid.n()].copy_from_slice(active);
        g
    }

    /// Mass-weighted inner product of two full grid functions.
    pub fn mass_inner(&self, a: &GridFunction, b: &GridFunction) -> f64 {
        let n = self.grid.n();
        let mut s = 0.0;
        for (row, j) in (self.first_active..n).enumerate() {
            s += self.mass[row] * a.values[j] * b.values[j];
        }
        s
    }

    pub fn mass_norm_sq(&self, a: &GridFunction) -> f64 {
        self.mass_inner(a, a)
    }
}

/// A u as a grid function; boundary rows follow the regime.
pub fn apply(op: &DiscreteOperator, u: &GridFunction) -> Result<GridFunction> {
    let active = op.restrict(u)?;
    let mut t = vec![0.0; active.len()];
    tridiag_matvec(&op.stiff_diag, &op.stiff_off, &active, &mut t);
    let a: Vec<f64> = t.iter().zip(&op.mass).map(|(ti, mi)| -ti / mi).collect();
    Ok(op.embed(&a))
}

/// u^T T u: the discrete weighted seminorm, equal to <-A u, u>_M.
pub fn h1mu_norm_sq(u: &GridFunction, op: &DiscreteOperator) -> Result<f64> {
    let active = op.restrict(u)?;
    let mut t = vec![0.0; active.len()];
    tridiag_matvec(&op.stiff_diag, &op.stiff_off, &active, &mut t);
    Ok(active.iter().zip(&t).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Mass-orthonormal eigenfunctions on the full grid.
    pub modes: Vec<GridFunction>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Lowest k eigenpairs of T phi = lambda M phi via symmetric reduction of the
/// tridiagonal pencil, bisection, and inverse iteration.
pub fn eigen(op: &DiscreteOperator, k: usize) -> Result<EigenDecomposition> {
    let n = op.n_active();
    if k == 0 || k > n {
        return Err(DegwaveError::EigenRange { k, n });
    }
    let sqrt_m: Vec<f64> = op.mass.iter().map(|m| m.sqrt()).collect();
    let b_diag: Vec<f64> = op
        .stiff_diag
        .iter()
        .zip(&op.mass)
        .map(|(d, m)| d / m)
        .collect();
    let b_off: Vec<f64> = op
        .stiff_off
        .iter()
        .enumerate()
        .map(|(i, e)| e / (sqrt_m[i] * sqrt_m[i + 1]))
        .collect();
    let eigenvalues = lowest_eigenvalues(&b_diag, &b_off, k)?;
    let mut psi_all: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut modes = Vec::with_capacity(k);
    for lam in &eigenvalues {
        let psi = inverse_iteration(&b_diag, &b_off, *lam, &psi_all);
        let phi: Vec<f64> = psi.iter().zip(&sqrt_m).map(|(p, s)| p / s).collect();
        modes.push(op.embed(&phi));
        psi_all.push(psi);
    }
    Ok(EigenDecomposition { eigenvalues, modes })
}

/// Truncated dual norm: sum over the first k modes of <f, phi_j>_M^2 / lambda_j.
pub fn dual_norm_sq(
    f: &GridFunction,
    op: &DiscreteOperator,
    eig: &EigenDecomposition,
    k: usize,
) -> Result<f64> {
    if k > eig.len() {
        return Err(DegwaveError::EigenRange { k, n: eig.len() });
    }
    let mut s = 0.0;
    for j in 0..k {
        let c = op.mass_inner(f, &eig.modes[j]);
        s += c * c / eig.eigenvalues[j];
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn op(alpha: f64, mu: f64, n: usize) -> DiscreteOperator {
        let grid = build_grid(n).unwrap();
        assemble(Parameters::new(alpha, mu).unwrap(), grid, None).unwrap()
    }

    #[test]
    fn laplacian_stencil_when_alpha_zero() {
        let o = op(0.0, 0.0, 4);
        let h2 = 16.0;
        for d in &o.stiff_diag {
            assert_abs_diff_eq!(*d, 2.0 * h2 * 0.25, epsilon = 1e-12);
        }
        for e in &o.stiff_off {
            assert_abs_diff_eq!(*e, -h2 * 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn dirichlet_spectrum() {
        let o = op(0.0, 0.0, 1000);
        let eig = eigen(&o, 3).unwrap();
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((lam / exact - 1.0).abs() < 5e-3, "mode {k}: {lam} vs {exact}");
        }
        assert!((eig.eigenvalues[0] / (PI * PI) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mass_orthonormality() {
        let o = op(1.5, 0.0625, 300);
        let eig = eigen(&o, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ip = o.mass_inner(&eig.modes[i], &eig.modes[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn apply_matches_analytic_eigenfunction() {
        let o = op(0.0, 0.0, 1000);
        let u = GridFunction::from_fn(o.grid().clone(), |x| (PI * x).sin());
        let au = apply(&o, &u).unwrap();
        for j in 2..998 {
            let x = o.grid().node(j);
            assert_abs_diff_eq!(au.values[j], -PI * PI * (PI * x).sin(), epsilon = 1e-2);
        }
        let z = GridFunction::zeros(o.grid().clone());
        assert!(apply(&o, &z).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn symmetry_probe() {
        let o = op(1.5, 0.0625, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let u = GridFunction::from_fn(o.grid().clone(), |_| rng.gen_range(-1.0..1.0));
            let v = GridFunction::from_fn(o.grid().clone(), |_| rng.gen_range(-1.0..1.0));
            let au = apply(&o, &u).unwrap();
            let av = apply(&o, &v).unwrap();
            let left = o.mass_inner(&au, &v);
            let right = o.mass_inner(&u, &av);
            assert!((left - right).abs() <= 1e-12 * (left.abs() + right.abs() + 1.0));
        }
    }

    #[test]
    fn spectral_positivity_and_mu_monotonicity() {
        for alpha in [0.0, 0.5, 1.25, 1.75] {
            let crit = crate::params::mu_critical(alpha).unwrap();
            let mut prev = f64::NEG_INFINITY;
            let mut lam_at: Vec<f64> = Vec::new();
            for mu in [-1.0, 0.0, crit] {
                let o = op(alpha, mu, 500);
                let eig = eigen(&o, 1).unwrap();
                assert!(eig.eigenvalues[0] > 0.0, "alpha={alpha} mu={mu}");
                lam_at.push(eig.eigenvalues[0]);
            }
            // lambda_1 decreases as mu increases
            for lam in lam_at {
                assert!(prev == f64::NEG_INFINITY || lam <= prev + 1e-10);
                prev = lam;
            }
        }
    }

    #[test]
    fn critical_potential_lowers_spectrum() {
        let free = eigen(&op(0.0, 0.0, 500), 1).unwrap().eigenvalues[0];
        let crit = eigen(&op(0.0, 0.25, 500), 1).unwrap().eigenvalues[0];
        assert!(crit < free);
        assert!(crit > 0.0);
    }

    #[test]
    fn regularized_operator_converges() {
        let grid = build_grid(1000).unwrap();
        let p = Parameters::critical(0.5).unwrap();
        let unreg = eigen(&assemble(p, grid.clone(), None).unwrap(), 1).unwrap().eigenvalues[0];
        let mut gaps = Vec::new();
        for n in [100u64, 1000, 10000] {
            let reg = eigen(&assemble(p, grid.clone(), Some(n)).unwrap(), 1).unwrap().eigenvalues[0];
            gaps.push((reg - unreg).abs() / unreg);
        }
        assert!(gaps[0] >= gaps[1] && gaps[1] >= gaps[2], "gaps {gaps:?}");
        assert!(gaps[2] <= 0.01, "relative gap {} at n = 1e4", gaps[2]);
    }

    #[test]
    fn h1mu_norm_matches_hardy_functional() {
        let o = op(0.0, 0.25, 1000);
        let u = GridFunction::from_fn(o.grid().clone(), |x| x * (1.0 - x));
        let ns = h1mu_norm_sq(&u, &o).unwrap();
        assert_abs_diff_eq!(ns, 0.25, epsilon = 2e-3);
        let hf = crate::hardy::hardy_functional(&u, o.params()).unwrap();
        assert_abs_diff_eq!(ns, hf, epsilon = 1e-3);
    }

    #[test]
    fn eigen_identities_for_norms() {
        let o = op(0.5, 0.0, 400);
        let eig = eigen(&o, 3).unwrap();
        let phi1 = &eig.modes[0];
        let lam1 = eig.eigenvalues[0];
        assert_abs_diff_eq!(h1mu_norm_sq(phi1, &o).unwrap(), lam1, epsilon = 1e-8 * lam1);
        assert_abs_diff_eq!(
            dual_norm_sq(phi1, &o, &eig, 3).unwrap(),
            1.0 / lam1,
            epsilon = 1e-10
        );
        let z = GridFunction::zeros(o.grid().clone());
        assert_eq!(dual_norm_sq(&z, &o, &eig, 3).unwrap(), 0.0);
    }

    #[test]
    fn dual_norm_of_sine_mode() {
        let o = op(0.0, 0.0, 1000);
        let eig = eigen(&o, 2).unwrap();
        let f = GridFunction::from_fn(o.grid().clone(), |x| (PI * x).sin());
        // <f, phi_1>_M^2 / lambda_1 with phi_1 ~ sqrt(2) sin(pi x): (1/2)/pi^2
        let got = dual_norm_sq(&f, &o, &eig, 2).unwrap();
        assert_abs_diff_eq!(got, 0.5 / (PI * PI), epsilon = 1e-4);
    }

    #[test]
    fn norm_equivalence_sandwich_discrete() {
        let grid = build_grid(600).unwrap();
        for (alpha, mu) in [(0.0, 0.125), (0.5, -0.3), (1.5, 0.03)] {
            let p = Parameters::new(alpha, mu).unwrap();
            let (c1, c2) = crate::hardy::equivalence_constants(&p).unwrap();
            let o = assemble(p, grid.clone(), None).unwrap();
            let o0 = assemble(Parameters::new(alpha, 0.0).unwrap(), grid.clone(), None).unwrap();
            let u = GridFunction::from_fn(grid.clone(), |x| x * (1.0 - x) * (0.3 + x));
            let w = h1mu_norm_sq(&u, &o).unwrap();
            let base = h1mu_norm_sq(&u, &o0).unwrap();
            assert!(c1 * base <= w + 1e-10 && w <= c2 * base + 1e-10);
        }
    }
}
