//! HUM boundary control synthesis: backward adjoint solves, the transposition
//! (boundary-controlled) forward solve, the Gramian bilinear form on filtered
//! final data, and conjugate-gradient solution of the control problem.
//!
//! The forward controlled solver is the exact algebraic adjoint of the
//! backward trace map ("discretize then transpose"), so the duality identity
//! holds at rounding level independent of the grid, and the Gramian seen by
//! CG is symmetric positive semidefinite by construction.

use crate::dynamics::{Stepper, TraceSeries, WaveState};
use crate::error::{DegwaveError, Result};
use crate::grid::GridFunction;
use crate::operator::{eigen, DiscreteOperator, EigenDecomposition};
use crate::params::Parameters;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct FinalData {
    /// Position component at t = T, in the weighted energy space.
    pub w0: GridFunction,
    /// Velocity component at t = T, in L^2.
    pub w1: GridFunction,
}

/// Boundary control acting as the Dirichlet value at x = 1, sampled on the
/// solver time grid (steps + 1 node values).
#[derive(Debug, Clone)]
pub struct ControlSignal {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl ControlSignal {
    pub fn zeros(dt: f64, steps: usize) -> Self {
        Self { dt, samples: vec![0.0; steps + 1] }
    }

    /// Trapezoidal L^2(0,T) norm squared.
    pub fn l2_norm_sq(&self) -> f64 {
        TraceSeries { dt: self.dt, samples: self.samples.clone() }.l2_norm_sq()
    }
}

#[derive(Debug, Clone)]
pub struct HUMResult {
    pub control: ControlSignal,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// Final-to-initial energy of the controlled trajectory in L^2 x H^{-1,mu}.
    pub final_state_energy_ratio: f64,
    /// Same ratio restricted to the filtered subspace the control targets.
    pub filtered_final_ratio: f64,
    /// Smallest observed Rayleigh quotient Gramian(d,d) / E(d) during CG.
    pub gramian_min_eig_estimate: f64,
    /// Fraction of the initial-data energy outside the filtered subspace.
    pub unfiltered_fraction: f64,
}

fn steps_for(t_final: f64, dt: f64) -> Result<usize> {
    if t_final <= 0.0 || dt <= 0.0 {
        return Err(DegwaveError::Parameter(format!(
            "need T > 0 and dt > 0, got T = {t_final}, dt = {dt}"
        )));
    }
    Ok((t_final / dt).round().max(1.0) as usize)
}

/// Weighted one-sided boundary derivative entering the adjoint pairing:
/// the flux through the last face, -x_{N-1/2}^alpha u_{N-1} / h.
fn control_trace_sample(op: &DiscreteOperator, u_active: &[f64]) -> f64 {
    let grid = op.grid();
    let n = grid.n();
    let face_weight = grid.face(n - 1).powf(op.params().alpha());
    -face_weight * u_active[u_active.len() - 1] / grid.h()
}

/// Midpoint-averaged time pairing matching the discrete duality identity.
pub fn time_pairing(dt: f64, f: &[f64], g: &[f64]) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    let mut s = 0.0;
    for m in 0..f.len() - 1 {
        s += 0.25 * dt * (f[m] + f[m + 1]) * (g[m] + g[m + 1]);
    }
    s
}

struct BackwardSolution {
    /// w(0) on active nodes.
    w_at_0: Vec<f64>,
    /// w_t(0) on active nodes.
    wt_at_0: Vec<f64>,
    /// Adjoint-exact boundary trace, indexed by forward time t_m.
    control_trace: Vec<f64>,
    /// Second-order stencil trace on the same time grid, for reporting.
    stencil_trace: Vec<f64>,
}

/// Solve the backward system via time reversal: w(t) = u(T - t) where u
/// evolves forward from (w0, -w1).
fn backward_solve_active(
    w0: &[f64],
    w1: &[f64],
    steps: usize,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<BackwardSolution> {
    let mut u = w0.to_vec();
    let mut v: Vec<f64> = w1.iter().map(|x| -x).collect();
    let mut stepper = Stepper::new(op, dt)?;
    let mut ct = vec![0.0; steps + 1];
    let mut st = vec![0.0; steps + 1];
    // u at forward index j corresponds to w at time index steps - j
    ct[steps] = control_trace_sample(op, &u);
    st[steps] = crate::grid::boundary_trace_derivative(&op.embed(&u))?;
    for j in 1..=steps {
        stepper.step_active(&mut u, &mut v, 0.0);
        ct[steps - j] = control_trace_sample(op, &u);
        st[steps - j] = crate::grid::boundary_trace_derivative(&op.embed(&u))?;
    }
    let wt_at_0 = v.iter().map(|x| -x).collect();
    Ok(BackwardSolution { w_at_0: u, wt_at_0, control_trace: ct, stencil_trace: st })
}

/// Boundary trace w_x(., 1) of the backward system, on the forward time grid.
pub fn backward_trace(
    final_data: &FinalData,
    t_final: f64,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<TraceSeries> {
    let steps = steps_for(t_final, dt)?;
    let dt = t_final / steps as f64;
    let w0 = op.restrict(&final_data.w0)?;
    let w1 = op.restrict(&final_data.w1)?;
    let sol = backward_solve_active(&w0, &w1, steps, dt, op)?;
    Ok(TraceSeries { dt, samples: sol.stencil_trace })
}

/// The adjoint-exact trace used as the control channel.
pub fn backward_control_trace(
    final_data: &FinalData,
    t_final: f64,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<ControlSignal> {
    let steps = steps_for(t_final, dt)?;
    let dt = t_final / steps as f64;
    let w0 = op.restrict(&final_data.w0)?;
    let w1 = op.restrict(&final_data.w1)?;
    let sol = backward_solve_active(&w0, &w1, steps, dt, op)?;
    Ok(ControlSignal { dt, samples: sol.control_trace })
}

fn forward_controlled_active(
    y0: &[f64],
    y1: &[f64],
    f: &[f64],
    steps: usize,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = op.grid();
    let n = grid.n();
    let face_weight = grid.face(n - 1).powf(op.params().alpha());
    let mut u = y0.to_vec();
    let mut v = y1.to_vec();
    let mut stepper = Stepper::new(op, dt)?;
    for m in 0..steps {
        // Dirichlet lift: the boundary value feeds the flux of the last row
        let fbar = 0.5 * (f[m] + f[m + 1]);
        let source = face_weight * fbar / grid.h();
        stepper.step_active(&mut u, &mut v, source);
    }
    Ok((u, v))
}

/// Transposition solution of the boundary-controlled problem at t = T.
pub fn forward_controlled(
    y0: &GridFunction,
    y1: &GridFunction,
    f: &ControlSignal,
    t_final: f64,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<WaveState> {
    let steps = steps_for(t_final, dt)?;
    let dt = t_final / steps as f64;
    if f.samples.len() != steps + 1 {
        return Err(DegwaveError::ControlGridMismatch {
            expected: steps + 1,
            got: f.samples.len(),
        });
    }
    let y0a = op.restrict(y0)?;
    let y1a = op.restrict(y1)?;
    let (u, v) = forward_controlled_active(&y0a, &y1a, &f.samples, steps, dt, op)?;
    Ok(WaveState { u: op.embed(&u), v: op.embed(&v), t: t_final })
}

/// Relative residual of the duality identity with zero initial data:
/// <y_t(T), w0>_M - <y(T), w1>_M + (f, w_x(., 1))_dt = 0.
pub fn duality_check(
    f: &ControlSignal,
    final_data: &FinalData,
    t_final: f64,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<f64> {
    let steps = steps_for(t_final, dt)?;
    let dt = t_final / steps as f64;
    if f.samples.len() != steps + 1 {
        return Err(DegwaveError::ControlGridMismatch {
            expected: steps + 1,
            got: f.samples.len(),
        });
    }
    let w0 = op.restrict(&final_data.w0)?;
    let w1 = op.restrict(&final_data.w1)?;
    let zero = vec![0.0; w0.len()];
    let (yu, yv) = forward_controlled_active(&zero, &zero, &f.samples, steps, dt, op)?;
    let sol = backward_solve_active(&w0, &w1, steps, dt, op)?;
    let mass = op.mass();
    let pair = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(mass).map(|((x, y), m)| m * x * y).sum()
    };
    let lhs = pair(&yv, &w0) - pair(&yu, &w1);
    let boundary = time_pairing(dt, &f.samples, &sol.control_trace);
    let scale = lhs.abs() + boundary.abs() + 1e-300;
    Ok((lhs + boundary).abs() / scale)
}

/// Coefficients of final data in the filtered eigenbasis:
/// z = (a_1..a_K | b_1..b_K) represents (sum a_k phi_k, sum b_k phi_k).
struct FilteredBasis<'a> {
    op: &'a DiscreteOperator,
    eig: &'a EigenDecomposition,
    modes_active: Vec<Vec<f64>>,
}

impl<'a> FilteredBasis<'a> {
    fn new(op: &'a DiscreteOperator, eig: &'a EigenDecomposition) -> Result<Self> {
        let modes_active = eig
            .modes
            .iter()
            .map(|m| op.restrict(m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { op, eig, modes_active })
    }

    fn k(&self) -> usize {
        self.modes_active.len()
    }

    fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.modes_active[0].len();
        let mut out = vec![0.0; n];
        for (c, phi) in coeffs.iter().zip(&self.modes_active) {
            for i in 0..n {
                out[i] += c * phi[i];
            }
        }
        out
    }

    fn project(&self, active: &[f64]) -> Vec<f64> {
        let mass = self.op.mass();
        self.modes_active
            .iter()
            .map(|phi| {
                phi.iter()
                    .zip(active)
                    .zip(mass)
                    .map(|((p, a), m)| m * p * a)
                    .sum()
            })
            .collect()
    }

    /// Energy of final data given by coefficients: (sum lam a^2 + sum b^2)/2.
    fn energy(&self, z: &[f64]) -> f64 {
        let k = self.k();
        let mut e = 0.0;
        for j in 0..k {
            e += self.eig.eigenvalues[j] * z[j] * z[j] + z[k + j] * z[k + j];
        }
        0.5 * e
    }
}

/// Gramian action in filtered coordinates: backward solve, reuse the trace as
/// the control, forward solve from rest, then read the dual pairing
/// coefficients (-<y_t(T), phi_k>_M, +<y(T), phi_k>_M).
fn gramian_mv(
    basis: &FilteredBasis,
    z: &[f64],
    steps: usize,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let op = basis.op;
    let k = basis.k();
    let w0 = basis.synthesize(&z[..k]);
    let w1 = basis.synthesize(&z[k..]);
    let sol = backward_solve_active(&w0, &w1, steps, dt, op)?;
    let zero = vec![0.0; w0.len()];
    let (yu, yv) = forward_controlled_active(&zero, &zero, &sol.control_trace, steps, dt, op)?;
    let pa: Vec<f64> = basis.project(&yv).iter().map(|c| -c).collect();
    let pb = basis.project(&yu);
    let mut out = pa;
    out.extend_from_slice(&pb);
    Ok((out, sol.control_trace))
}

/// Gramian applied to grid final data, returned as dual-pairing final data on
/// the filtered subspace, plus the fraction of input energy it ignores.
pub fn gramian_apply(
    final_data: &FinalData,
    t_final: f64,
    dt: f64,
    op: &DiscreteOperator,
    eig: &EigenDecomposition,
) -> Result<(FinalData, f64)> {
    let steps = steps_for(t_final, dt)?;
    let dt = t_final / steps as f64;
    let basis = FilteredBasis::new(op, eig)?;
    let k = basis.k();
    let w0 = op.restrict(&final_data.w0)?;
    let w1 = op.restrict(&final_data.w1)?;
    let mut z = basis.project(&w0);
    z.extend(basis.project(&w1));
    // unfiltered energy fraction of the input
    let full = 0.5
        * (crate::operator::h1mu_norm_sq(&final_data.w0, op)?
            + op.mass_norm_sq(&final_data.w1));
    let filtered = basis.energy(&z);
    let unfiltered_fraction = if full > 0.0 { ((full - filtered) / full).max(0.0) } else { 0.0 };
    let (out, _) = gramian_mv(&basis, &z, steps, dt)?;
    Ok((
        FinalData {
            w0: op.embed(&basis.synthesize(&out[..k])),
            w1: op.embed(&basis.synthesize(&out[k..])),
        },
        unfiltered_fraction,
    ))
}

/// Right-hand side functional in filtered coordinates, one backward basis
/// solve per coefficient: l(V) = <y1, v(0)>_M - <y0, v_t(0)>_M.
fn hum_rhs(
    basis: &FilteredBasis,
    y0: &[f64],
    y1: &[f64],
    steps: usize,
    dt: f64,
) -> Result<Vec<f64>> {
    let op = basis.op;
    let mass = op.mass();
    let k = basis.k();
    let pair = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(mass).map(|((x, y), m)| m * x * y).sum()
    };
    let mut ell = vec![0.0; 2 * k];
    let zero = vec![0.0; y0.len()];
    for j in 0..2 * k {
        let (w0, w1) = if j < k {
            (&basis.modes_active[j], &zero)
        } else {
            (&zero, &basis.modes_active[j - k])
        };
        let sol = backward_solve_active(w0, w1, steps, dt, op)?;
        ell[j] = pair(y1, &sol.w_at_0) - pair(y0, &sol.wt_at_0);
    }
    Ok(ell)
}

/// Null control by HUM: preconditioned CG on the filtered Gramian.
pub fn hum_solve(
    y0: &GridFunction,
    y1: &GridFunction,
    t_final: f64,
    dt: f64,
    k_filter: usize,
    cg_tol: f64,
    max_iterations: usize,
    op: &DiscreteOperator,
) -> Result<HUMResult> {
    let n = op.grid().n();
    if k_filter == 0 || 10 * k_filter > n {
        return Err(DegwaveError::Parameter(format!(
            "filter order {k_filter} outside 1..=N/10 with N = {n}"
        )));
    }
    let steps = steps_for(t_final, dt)?;
    let dt = t_final / steps as f64;
    let eig = eigen(op, k_filter)?;
    let basis = FilteredBasis::new(op, &eig)?;
    let k = basis.k();
    let y0a = op.restrict(y0)?;
    let y1a = op.restrict(y1)?;

    let e0_full = 0.5 * (op.mass_norm_sq(y0) + crate::operator::dual_norm_sq(y1, op, &eig, k)?);
    let a0 = basis.project(&y0a);
    let b1 = basis.project(&y1a);
    let e0_filtered: f64 = 0.5
        * (a0.iter().map(|c| c * c).sum::<f64>()
            + b1.iter()
                .zip(&eig.eigenvalues)
                .map(|(c, lam)| c * c / lam)
                .sum::<f64>());
    let unfiltered_fraction =
        if e0_full > 0.0 { ((e0_full - e0_filtered) / e0_full).max(0.0) } else { 0.0 };

    let ell = hum_rhs(&basis, &y0a, &y1a, steps, dt)?;
    let ell_norm = ell.iter().map(|x| x * x).sum::<f64>().sqrt();

    // preconditioner: energy metric, diag(1/lambda_k) on the position block
    let precond = |r: &[f64]| -> Vec<f64> {
        let mut s = r.to_vec();
        for j in 0..k {
            s[j] /= eig.eigenvalues[j];
        }
        s
    };

    let mut z = vec![0.0; 2 * k];
    let mut min_quotient = f64::INFINITY;
    let mut iterations = 0;
    let mut residual = 0.0;
    if ell_norm > 0.0 {
        let mut r = ell.clone();
        let mut d = precond(&r);
        let mut delta: f64 = r.iter().zip(&d).map(|(a, b)| a * b).sum();
        for it in 1..=max_iterations {
            iterations = it;
            let (q, _) = gramian_mv(&basis, &d, steps, dt)?;
            let curv: f64 = d.iter().zip(&q).map(|(a, b)| a * b).sum();
            let ed = basis.energy(&d);
            if ed > 0.0 {
                min_quotient = min_quotient.min(curv / ed);
            }
            if curv <= 0.0 {
                return Err(DegwaveError::BelowThreshold(format!(
                    "Gramian not coercive at T = {t_final}: curvature {curv:.3e} \
                     after {it} iterations"
                )));
            }
            let alpha = delta / curv;
            for i in 0..2 * k {
                z[i] += alpha * d[i];
                r[i] -= alpha * q[i];
            }
            residual = r.iter().map(|x| x * x).sum::<f64>().sqrt() / ell_norm;
            if residual <= cg_tol {
                break;
            }
            let s = precond(&r);
            let delta_new: f64 = r.iter().zip(&s).map(|(a, b)| a * b).sum();
            let beta = delta_new / delta;
            delta = delta_new;
            for i in 0..2 * k {
                d[i] = s[i] + beta * d[i];
            }
        }
    }

    // extract the control from the minimizing final data
    let w0 = basis.synthesize(&z[..k]);
    let w1 = basis.synthesize(&z[k..]);
    let sol = backward_solve_active(&w0, &w1, steps, dt, op)?;
    let control = ControlSignal { dt, samples: sol.control_trace.clone() };

    // independent verification solve
    let (yu, yv) = forward_controlled_active(&y0a, &y1a, &control.samples, steps, dt, op)?;
    let yf = op.embed(&yu);
    let vf = op.embed(&yv);
    let at = basis.project(&yu);
    let bt = basis.project(&yv);
    let et_filtered: f64 = 0.5
        * (at.iter().map(|c| c * c).sum::<f64>()
            + bt.iter()
                .zip(&eig.eigenvalues)
                .map(|(c, lam)| c * c / lam)
                .sum::<f64>());
    let et_full = 0.5 * (op.mass_norm_sq(&yf) + crate::operator::dual_norm_sq(&vf, op, &eig, k)?);
    let (ratio, filtered_ratio) = if e0_full > 0.0 {
        (et_full / e0_full, et_filtered / e0_filtered.max(1e-300))
    } else {
        (0.0, 0.0)
    };
    Ok(HUMResult {
        control,
        cg_iterations: iterations,
        cg_residual: residual,
        final_state_energy_ratio: ratio,
        filtered_final_ratio: filtered_ratio,
        gramian_min_eig_estimate: if min_quotient.is_finite() { min_quotient } else { 0.0 },
        unfiltered_fraction,
    })
}

/// Seeded random data supported on the filtered subspace, with mildly
/// decaying mode amplitudes.
pub fn random_filtered_data(
    op: &DiscreteOperator,
    eig: &EigenDecomposition,
    seed: u64,
) -> Result<(GridFunction, GridFunction)> {
    let basis = FilteredBasis::new(op, eig)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = basis.k();
    let a: Vec<f64> = (0..k)
        .map(|j| rng.gen_range(-1.0..1.0) / (j as f64 + 1.0))
        .collect();
    let b: Vec<f64> = (0..k)
        .map(|j| rng.gen_range(-1.0..1.0) / (j as f64 + 1.0))
        .collect();
    Ok((op.embed(&basis.synthesize(&a)), op.embed(&basis.synthesize(&b))))
}

#[derive(Debug, Clone)]
pub struct ObservabilityRow {
    pub t_final: f64,
    pub bound: f64,
    pub min_quotient: f64,
    pub satisfied: bool,
    /// Direct-inequality constant for the same horizon (2T+4 or 2T+4C'_a).
    pub direct_bound: f64,
    pub max_quotient: f64,
    pub direct_satisfied: bool,
}

/// For each horizon, the minimal trace quotient over the first eigenmodes and
/// seeded random filtered data, against the explicit bound (2-alpha)T - 4.
pub fn observability_constant_sweep(
    p: &Parameters,
    horizons: &[f64],
    k_filter: usize,
    n: usize,
    mode_count: usize,
    seed: u64,
) -> Result<Vec<ObservabilityRow>> {
    let grid = crate::grid::build_grid(n)?;
    let op = crate::operator::assemble(*p, grid, None)?;
    let eig = eigen(&op, k_filter.max(mode_count))?;
    let basis = FilteredBasis::new(&op, &eig)?;
    let mut rows = Vec::with_capacity(horizons.len());
    for &t_final in horizons {
        let dt = op.grid().h();
        let steps = steps_for(t_final, dt)?;
        let dt = t_final / steps as f64;
        let mut min_q = f64::INFINITY;
        let mut max_q = f64::NEG_INFINITY;
        let mut data: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let zero = vec![0.0; op.n_active()];
        for j in 0..mode_count.min(basis.k()) {
            data.push((basis.modes_active[j].clone(), zero.clone()));
        }
        for s in 0..5u64 {
            let (u0, u1) = random_filtered_data(&op, &eig, seed.wrapping_add(s))?;
            data.push((op.restrict(&u0)?, op.restrict(&u1)?));
        }
        for (u0, u1) in &data {
            let q = trace_quotient(u0, u1, steps, dt, &op)?;
            min_q = min_q.min(q);
            max_q = max_q.max(q);
        }
        let bound = (2.0 - p.alpha()) * t_final - 4.0;
        let direct_bound = crate::dynamics::direct_inequality_constant(p, t_final);
        rows.push(ObservabilityRow {
            t_final,
            bound,
            min_quotient: min_q,
            satisfied: min_q >= bound * 0.95,
            direct_bound,
            max_quotient: max_q,
            direct_satisfied: max_q <= direct_bound,
        });
    }
    Ok(rows)
}

/// Trace energy over initial energy for one homogeneous evolution, without
/// storing the trajectory.
fn trace_quotient(
    u0: &[f64],
    u1: &[f64],
    steps: usize,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<f64> {
    let e0 = {
        let u = op.embed(u0);
        let v = op.embed(u1);
        0.5 * (op.mass_norm_sq(&v) + crate::operator::h1mu_norm_sq(&u, op)?)
    };
    if e0 <= 0.0 {
        return Err(DegwaveError::ZeroEnergy);
    }
    let mut u = u0.to_vec();
    let mut v = u1.to_vec();
    let mut stepper = Stepper::new(op, dt)?;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(crate::grid::boundary_trace_derivative(&op.embed(&u))?);
    for _ in 0..steps {
        stepper.step_active(&mut u, &mut v, 0.0);
        samples.push(crate::grid::boundary_trace_derivative(&op.embed(&u))?);
    }
    Ok(TraceSeries { dt, samples }.l2_norm_sq() / e0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::operator::assemble;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn op(alpha: f64, mu: f64, n: usize) -> DiscreteOperator {
        let grid = build_grid(n).unwrap();
        assemble(Parameters::new(alpha, mu).unwrap(), grid, None).unwrap()
    }

    fn random_signal(dt: f64, steps: usize, seed: u64) -> ControlSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ControlSignal {
            dt,
            samples: (0..=steps).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn duality_residual_at_machine_precision() {
        for (alpha, mu) in [(0.0, 0.0), (0.5, 0.0625), (1.5, 0.0625)] {
            let o = op(alpha, mu, 200);
            let dt = 3.0 / 600.0;
            let f = random_signal(dt, 600, 1);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let grid = o.grid().clone();
            let mut w0 = GridFunction::from_fn(grid.clone(), |x| {
                rng.gen_range(-1.0..1.0) * x * (1.0 - x)
            });
            w0 = o.embed(&o.restrict(&w0).unwrap());
            let w1 = o.embed(&o.restrict(&GridFunction::from_fn(grid, |x| {
                rng.gen_range(-1.0..1.0) * (1.0 - x)
            })).unwrap());
            let resid = duality_check(&f, &FinalData { w0, w1 }, 3.0, dt, &o).unwrap();
            assert!(resid <= 1e-10, "alpha = {alpha}: residual {resid}");
        }
    }

    #[test]
    fn zero_control_zero_data() {
        let o = op(0.5, 0.0, 100);
        let z = GridFunction::zeros(o.grid().clone());
        let f = ControlSignal::zeros(0.01, 100);
        let st = forward_controlled(&z, &z, &f, 1.0, 0.01, &o).unwrap();
        assert!(st.u.values.iter().all(|x| *x == 0.0));
        let tr = backward_trace(&FinalData { w0: z.clone(), w1: z }, 1.0, 0.01, &o).unwrap();
        assert!(tr.samples.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn free_evolution_when_control_vanishes() {
        let o = op(0.0, 0.0, 200);
        let eig = eigen(&o, 1).unwrap();
        let z = GridFunction::zeros(o.grid().clone());
        let dt = 1.0 / 200.0;
        let f = ControlSignal::zeros(dt, 400);
        let st = forward_controlled(&eig.modes[0], &z, &f, 2.0, dt, &o).unwrap();
        let e = crate::dynamics::energy(&st, &o).unwrap();
        assert_abs_diff_eq!(e, eig.eigenvalues[0] / 2.0, epsilon = 1e-9 * eig.eigenvalues[0]);
    }

    #[test]
    fn backward_trace_eigenmode_norm() {
        // final data (phi_1, 0): w(t) = cos(sqrt(lam)(T - t)) phi_1,
        // trace L2 norm^2 over a full period = phi_1'(1)^2 * T/2
        let o = op(0.0, 0.0, 500);
        let eig = eigen(&o, 1).unwrap();
        let z = GridFunction::zeros(o.grid().clone());
        let tr = backward_trace(
            &FinalData { w0: eig.modes[0].clone(), w1: z },
            2.0,
            1.0 / 500.0,
            &o,
        )
        .unwrap();
        // phi_1 ~ sqrt(2) sin(pi x), phi_1'(1)^2 = 2 pi^2
        assert!((tr.l2_norm_sq() / (2.0 * PI * PI) - 1.0).abs() < 0.02);
    }

    #[test]
    fn gramian_symmetry_and_quadratic_form() {
        let o = op(0.5, 0.0625, 150);
        let eig = eigen(&o, 6).unwrap();
        let basis = FilteredBasis::new(&o, &eig).unwrap();
        let dt = 2.5 / 375.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let zw: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let zv: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (gw, trace_w) = gramian_mv(&basis, &zw, 375, dt).unwrap();
        let (gv, trace_v) = gramian_mv(&basis, &zv, 375, dt).unwrap();
        let wv: f64 = gw.iter().zip(&zv).map(|(a, b)| a * b).sum();
        let vw: f64 = gv.iter().zip(&zw).map(|(a, b)| a * b).sum();
        let scale = wv.abs().max(vw.abs()).max(1e-300);
        assert!((wv - vw).abs() / scale <= 1e-9, "asymmetry {}", (wv - vw).abs() / scale);
        // quadratic form equals the time pairing of the trace with itself
        let ww: f64 = gw.iter().zip(&zw).map(|(a, b)| a * b).sum();
        let qn = time_pairing(dt, &trace_w, &trace_w);
        assert!((ww - qn).abs() / qn <= 1e-9, "ww {ww} vs {qn}");
        let cross = time_pairing(dt, &trace_w, &trace_v);
        assert!((wv - cross).abs() / scale <= 1e-9);
    }

    #[test]
    fn hum_controls_sine_mode() {
        let o = op(0.0, 0.0, 200);
        let y0 = GridFunction::from_fn(o.grid().clone(), |x| (PI * x).sin());
        let z = GridFunction::zeros(o.grid().clone());
        let r = hum_solve(&y0, &z, 4.0, 1.0 / 200.0, 10, 1e-8, 200, &o).unwrap();
        assert!(r.final_state_energy_ratio <= 1e-4, "ratio {}", r.final_state_energy_ratio);
        assert!(r.cg_iterations <= 200);
        assert!(r.gramian_min_eig_estimate > 0.0);
    }

    #[test]
    fn hum_zero_data_yields_zero_control() {
        let o = op(0.0, 0.0, 100);
        let z = GridFunction::zeros(o.grid().clone());
        let r = hum_solve(&z, &z, 3.0, 0.01, 5, 1e-8, 100, &o).unwrap();
        assert_eq!(r.cg_iterations, 0);
        assert!(r.control.l2_norm_sq() == 0.0);
        assert_eq!(r.final_state_energy_ratio, 0.0);
    }

    #[test]
    fn observability_sweep_alpha_zero() {
        let p = Parameters::new(0.0, 0.0).unwrap();
        let rows = observability_constant_sweep(&p, &[2.0, 3.0, 4.0], 20, 200, 5, 0).unwrap();
        assert_abs_diff_eq!(rows[0].bound, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[2].bound, 4.0, epsilon = 1e-12);
        for row in &rows {
            assert!(row.satisfied, "T = {}: {} vs {}", row.t_final, row.min_quotient, row.bound);
        }
    }

    #[test]
    fn control_linearity() {
        let o = op(0.0, 0.0, 150);
        let g = o.grid().clone();
        let y0a = GridFunction::from_fn(g.clone(), |x| (PI * x).sin());
        let y0b = GridFunction::from_fn(g.clone(), |x| (2.0 * PI * x).sin());
        let z = GridFunction::zeros(g.clone());
        let dt = 1.0 / 150.0;
        let fa = hum_solve(&y0a, &z, 4.0, dt, 8, 1e-10, 300, &o).unwrap().control;
        let fb = hum_solve(&y0b, &z, 4.0, dt, 8, 1e-10, 300, &o).unwrap().control;
        let combo = GridFunction::from_fn(g, |x| {
            2.0 * (PI * x).sin() - 0.5 * (2.0 * PI * x).sin()
        });
        let fc = hum_solve(&combo, &z, 4.0, dt, 8, 1e-10, 300, &o).unwrap().control;
        let norm: f64 = fc.l2_norm_sq().sqrt().max(1e-300);
        let diff: f64 = fc
            .samples
            .iter()
            .zip(fa.samples.iter().zip(&fb.samples))
            .map(|(c, (a, b))| (c - (2.0 * a - 0.5 * b)).powi(2))
            .sum::<f64>()
            .sqrt()
            * dt.sqrt();
        assert!(diff / norm <= 1e-6, "linearity gap {}", diff / norm);
    }
}
