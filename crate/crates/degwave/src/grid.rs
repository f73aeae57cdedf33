//! Node-centered grids on [0,1] and quadrature that stays accurate against
//! power weights x^beta, including the integrable-singular range beta in (-2, 0).

use crate::error::{DegwaveError, Result};
use std::sync::Arc;

/// Uniform node-centered grid on [0,1]: nodes x_j = j/N, faces at midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n: usize,
    h: f64,
}

impl GridSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// x_j for j = 0..=N. Endpoints are exact.
    pub fn node(&self, j: usize) -> f64 {
        debug_assert!(j <= self.n);
        if j == self.n {
            1.0
        } else {
            j as f64 * self.h
        }
    }

    /// x_{j+1/2} for j = 0..N-1. All faces are strictly interior.
    pub fn face(&self, j: usize) -> f64 {
        debug_assert!(j < self.n);
        (j as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|j| self.node(j))
    }

    pub fn faces(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.face(j))
    }
}

pub fn build_grid(n: usize) -> Result<Arc<GridSpec>> {
    if n < 4 {
        return Err(DegwaveError::Config(format!("cell count N = {n} is below the minimum of 4")));
    }
    Ok(Arc::new(GridSpec { n, h: 1.0 / n as f64 }))
}

/// Values of a spatial function at the grid nodes 0..=N.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<GridSpec>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() + 1 {
            return Err(DegwaveError::ShapeMismatch { expected: grid.n() + 1, got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<GridSpec>) -> Self {
        let len = grid.n() + 1;
        Self { grid, values: vec![0.0; len] }
    }

    pub fn from_fn(grid: Arc<GridSpec>, f: impl FnMut(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Pointwise product, used for mixed integrands like u * u_t.
    pub fn pointwise_mul(&self, other: &GridFunction) -> GridFunction {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        GridFunction { grid: self.grid.clone(), values }
    }

    pub fn pointwise_sq(&self) -> GridFunction {
        self.pointwise_mul(self)
    }
}

/// Exact moment of the weight: integral of x^beta over [a, b], 0 <= a < b.
/// Requires beta > -1 when a = 0.
fn weight_moment(beta: f64, a: f64, b: f64) -> f64 {
    let p = beta + 1.0;
    if p.abs() < 1e-14 {
        (b / a).ln()
    } else if a == 0.0 {
        b.powf(p) / p
    } else {
        (b.powf(p) - a.powf(p)) / p
    }
}

/// Integral of x^beta * g(x) over (0,1) with g reconstructed piecewise-linearly
/// from node values and the weight integrated by exact per-cell moments.
///
/// For beta <= -1 the integrand is only integrable when g vanishes at 0; in that
/// case the first cell is modeled as g(x) = g(h) (x/h)^2, which matches the
/// quadratic vanishing of squares of admissible profiles. Elsewhere the rule is
/// exact for piecewise-linear g.
pub fn weighted_integral(g: &GridFunction, beta: f64) -> Result<f64> {
    let grid = &g.grid;
    let h = grid.h();
    let v = &g.values;
    if beta <= -1.0 && v[0] != 0.0 {
        return Err(DegwaveError::SingularIntegrand { beta });
    }
    if beta <= -3.0 {
        return Err(DegwaveError::SingularIntegrand { beta });
    }
    let mut total = 0.0;
    // first cell
    if beta <= -1.0 {
        // g(0) = 0 and g vanishes at least quadratically: model g = g_1 (x/h)^2
        total += v[1] / (h * h) * weight_moment(beta + 2.0, 0.0, h);
    } else {
        let slope = (v[1] - v[0]) / h;
        let m0 = weight_moment(beta, 0.0, h);
        let m1 = weight_moment(beta + 1.0, 0.0, h);
        total += v[0] * m0 + slope * m1;
    }
    for j in 1..grid.n() {
        let a = grid.node(j);
        let b = grid.node(j + 1);
        let m0 = weight_moment(beta, a, b);
        let m1 = weight_moment(beta + 1.0, a, b);
        let slope = (v[j + 1] - v[j]) / h;
        total += v[j] * m0 + slope * (m1 - a * m0);
    }
    Ok(total)
}

/// Integral of x^beta * d(x)^2 over (0,1), with d piecewise constant per cell
/// (the reconstructed derivative of a piecewise-linear function). Exact in d.
pub fn weighted_face_square_integral(grid: &GridSpec, faces: &[f64], beta: f64) -> f64 {
    debug_assert_eq!(faces.len(), grid.n());
    let mut total = 0.0;
    for (j, d) in faces.iter().enumerate() {
        let m0 = weight_moment(beta, grid.node(j), grid.node(j + 1));
        total += d * d * m0;
    }
    total
}

/// (g_{j+1} - g_j)/h at each face; second-order accurate at face centers.
pub fn face_derivative(g: &GridFunction) -> Vec<f64> {
    let h = g.grid.h();
    g.values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

/// Face derivatives averaged back to nodes, one-sided at the ends.
/// Used for mixed volume integrands like x u_x u_t.
pub fn node_derivative(g: &GridFunction) -> GridFunction {
    let d = face_derivative(g);
    let n = g.grid.n();
    let mut values = vec![0.0; n + 1];
    values[0] = d[0];
    values[n] = d[n - 1];
    for j in 1..n {
        values[j] = 0.5 * (d[j - 1] + d[j]);
    }
    GridFunction { grid: g.grid.clone(), values }
}

/// Derivative at x = 1 of the quadratic through the last three nodes.
pub fn boundary_trace_derivative(g: &GridFunction) -> Result<f64> {
    let n = g.grid.n();
    if n < 4 {
        return Err(DegwaveError::GridTooCoarse(n));
    }
    let h = g.grid.h();
    Ok((g.values[n - 2] - 4.0 * g.values[n - 1] + 3.0 * g.values[n]) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn build_grid_layout() {
        let g = build_grid(4).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let faces: Vec<f64> = g.faces().collect();
        assert_eq!(faces, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(g.faces().all(|x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn build_grid_spacing() {
        let g = build_grid(1000).unwrap();
        assert_eq!(g.h(), 0.001);
    }

    #[test]
    fn build_grid_rejects_small_n() {
        assert!(build_grid(3).is_err());
    }

    #[test]
    fn weighted_integral_exact_moments() {
        let grid = build_grid(50).unwrap();
        let one = GridFunction::from_fn(grid.clone(), |_| 1.0);
        assert_abs_diff_eq!(weighted_integral(&one, 1.0).unwrap(), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(weighted_integral(&one, -0.5).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_integral_inverse_square() {
        // integrand x^{-2} * x^2 (1-x)^2 = (1-x)^2, closed form 1/3
        let exact = 1.0 / 3.0;
        let mut prev_err = f64::INFINITY;
        for n in [250, 500, 1000] {
            let grid = build_grid(n).unwrap();
            let g = GridFunction::from_fn(grid, |x| (x * (1.0 - x)).powi(2));
            let err = (weighted_integral(&g, -2.0).unwrap() - exact).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-3);
    }

    #[test]
    fn weighted_integral_rejects_singular() {
        let grid = build_grid(10).unwrap();
        let one = GridFunction::from_fn(grid, |_| 1.0);
        assert!(matches!(
            weighted_integral(&one, -1.5),
            Err(DegwaveError::SingularIntegrand { .. })
        ));
    }

    #[test]
    fn weighted_integral_second_order_for_smooth() {
        // refinement ratio on sin(pi x), beta = 0.5
        let exact_of = |n: usize| {
            let grid = build_grid(n).unwrap();
            let g = GridFunction::from_fn(grid, |x| (PI * x).sin());
            weighted_integral(&g, 0.5).unwrap()
        };
        let fine = exact_of(4000);
        let e1 = (exact_of(100) - fine).abs();
        let e2 = (exact_of(200) - fine).abs();
        assert!(e1 / e2 > 3.5, "ratio {} not near 4", e1 / e2);
    }

    #[test]
    fn face_derivative_values() {
        let grid = build_grid(4).unwrap();
        let lin = GridFunction::from_fn(grid.clone(), |x| x);
        assert!(face_derivative(&lin).iter().all(|d| (d - 1.0).abs() < 1e-14));
        let quad = GridFunction::from_fn(grid.clone(), |x| x * x);
        let d = face_derivative(&quad);
        for (j, dj) in d.iter().enumerate() {
            assert_abs_diff_eq!(*dj, 2.0 * grid.face(j), epsilon = 1e-14);
        }
        let c = GridFunction::from_fn(grid, |_| 3.7);
        assert!(face_derivative(&c).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn boundary_trace_affine_exact() {
        let grid = build_grid(8).unwrap();
        let g = GridFunction::from_fn(grid, |x| 1.0 - x);
        assert_abs_diff_eq!(boundary_trace_derivative(&g).unwrap(), -1.0, epsilon = 1e-13);
    }

    #[test]
    fn boundary_trace_sine() {
        let grid = build_grid(1000).unwrap();
        let g = GridFunction::from_fn(grid, |x| (PI * x).sin());
        // analytic: pi cos(pi) = -pi
        assert_abs_diff_eq!(boundary_trace_derivative(&g).unwrap(), -PI, epsilon = 1e-4);
    }

    #[test]
    fn boundary_trace_vanishing_quadratic() {
        let grid = build_grid(64).unwrap();
        let g = GridFunction::from_fn(grid, |x| (1.0 - x) * (1.0 - x));
        assert_abs_diff_eq!(boundary_trace_derivative(&g).unwrap(), 0.0, epsilon = 1e-12);
    }

    proptest! {
        // exact for piecewise-linear data and admissible beta
        #[test]
        fn quadrature_exact_for_linear(a in -2.0f64..2.0, b in -2.0f64..2.0,
                                       beta in -0.9f64..3.0, n in 4usize..64) {
            let grid = build_grid(n).unwrap();
            let g = GridFunction::from_fn(grid, |x| a + b * x);
            let got = weighted_integral(&g, beta).unwrap();
            let exact = a / (beta + 1.0) + b / (beta + 2.0);
            prop_assert!((got - exact).abs() < 1e-11 * (1.0 + exact.abs()));
        }
    }
}
