//! Analytic test profiles standing in for compactly supported smooth functions.
//! Every member vanishes at x = 1; all generated members also vanish at x = 0,
//! so the same family serves both boundary regimes.

use crate::grid::{GridFunction, GridSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum Profile {
    /// x^p (1-x)^q with p, q >= 1
    PolyBump { p: f64, q: f64 },
    /// sin(k pi x)
    Sine { k: usize },
    /// x^{(1-alpha)/2 + eps} (1-x): probes the Hardy-critical exponent
    NearBoundary { alpha: f64, eps: f64 },
    /// Catmull-Rom spline through seeded random interior knot values,
    /// clamped to zero at both endpoints.
    RandomSpline { knots: Vec<f64> },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::PolyBump { p, q } => x.powf(*p) * (1.0 - x).powf(*q),
            Profile::Sine { k } => (*k as f64 * std::f64::consts::PI * x).sin(),
            Profile::NearBoundary { alpha, eps } => {
                // clamped below so the profile stays bounded when alpha > 1
                let gamma = ((1.0 - alpha) / 2.0 + eps).max(0.05);
                x.powf(gamma) * (1.0 - x)
            }
            Profile::RandomSpline { knots } => spline_eval(knots, x),
        }
    }

    pub fn sample(&self, grid: Arc<GridSpec>) -> GridFunction {
        GridFunction::from_fn(grid, |x| self.eval(x))
    }
}

/// Catmull-Rom evaluation of knot values at equispaced points 0..=m, with
/// zero endpoint values and reflected ghost tangents.
fn spline_eval(knots: &[f64], x: f64) -> f64 {
    let m = knots.len() - 1;
    let s = (x * m as f64).clamp(0.0, m as f64 - 1e-12);
    let i = s.floor() as usize;
    let t = s - i as f64;
    let k = |j: isize| -> f64 {
        if j < 0 {
            -knots[(-j) as usize] // odd reflection keeps the endpoint pinned
        } else if j as usize > m {
            -knots[2 * m - j as usize]
        } else {
            knots[j as usize]
        }
    };
    let (p0, p1) = (k(i as isize), k(i as isize + 1));
    let m0 = 0.5 * (p1 - k(i as isize - 1));
    let m1 = 0.5 * (k(i as isize + 2) - p0);
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * p1
        + (t3 - t2) * m1
}

/// Deterministic library of test profiles for a given alpha.
pub struct TestFunctionFamily {
    pub members: Vec<Profile>,
}

impl TestFunctionFamily {
    /// `n_random` seeded random splines on top of the fixed analytic profiles.
    pub fn new(alpha: f64, n_random: usize, seed: u64) -> Self {
        let mut members = Vec::new();
        for (p, q) in [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0), (3.0, 1.5)] {
            members.push(Profile::PolyBump { p, q });
        }
        for k in 1..=5 {
            members.push(Profile::Sine { k });
        }
        for eps in [0.35, 0.5, 0.75] {
            members.push(Profile::NearBoundary { alpha, eps });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n_random {
            let m = rng.gen_range(6..14);
            let mut knots = vec![0.0; m + 1];
            for k in knots.iter_mut().take(m).skip(1) {
                *k = rng.gen_range(-1.0..1.0);
            }
            members.push(Profile::RandomSpline { knots });
        }
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn members_vanish_at_endpoints() {
        let fam = TestFunctionFamily::new(0.5, 30, 7);
        assert!(fam.len() >= 40);
        let grid = build_grid(64).unwrap();
        for p in &fam.members {
            let g = p.sample(grid.clone());
            assert_eq!(g.values[0], 0.0, "{p:?} at x=0");
            assert!(g.values[64].abs() < 1e-12, "{p:?} at x=1");
        }
    }

    #[test]
    fn family_is_deterministic() {
        let a = TestFunctionFamily::new(0.5, 10, 42);
        let b = TestFunctionFamily::new(0.5, 10, 42);
        let grid = build_grid(32).unwrap();
        for (pa, pb) in a.members.iter().zip(&b.members) {
            assert_eq!(pa.sample(grid.clone()).values, pb.sample(grid.clone()).values);
        }
    }

    #[test]
    fn spline_is_continuous() {
        let fam = TestFunctionFamily::new(0.0, 5, 3);
        let sp = fam.members.last().unwrap();
        let mut prev = sp.eval(0.0);
        for i in 1..=1000 {
            let v = sp.eval(i as f64 / 1000.0);
            assert!((v - prev).abs() < 0.05, "jump at {i}");
            prev = v;
        }
    }
}
