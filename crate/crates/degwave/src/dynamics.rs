//! Time integration of the homogeneous/adjoint wave system, energy
//! accounting, boundary-trace recording, and the multiplier identities and
//! trace inequalities evaluated on simulated trajectories.
//!
//! The stepper is implicit midpoint: unconditionally stable, time-reversible,
//! and exactly conservative for the discrete quadratic energy
//! E = (v' M v + u' T u) / 2, which turns energy constancy into a testable
//! invariant instead of an approximation.

use crate::error::{DegwaveError, Result};
use crate::grid::{
    boundary_trace_derivative, face_derivative, node_derivative, weighted_face_square_integral,
    weighted_integral, GridFunction,
};
use crate::hardy::InequalityReport;
use crate::operator::{h1mu_norm_sq, DiscreteOperator};
use crate::params::{Parameters, Regime};
use crate::tridiag::{tridiag_matvec, TridiagCholesky};

#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: GridFunction,
    pub v: GridFunction,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct TraceSeries {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl TraceSeries {
    /// Trapezoidal integral of the squared samples over [0, T].
    pub fn l2_norm_sq(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let mut s = 0.5 * (self.samples[0].powi(2) + self.samples[n - 1].powi(2));
        for x in &self.samples[1..n - 1] {
            s += x * x;
        }
        s * self.dt
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<WaveState>,
    pub trace: TraceSeries,
    pub energies: Vec<f64>,
}

impl Trajectory {
    pub fn initial(&self) -> &WaveState {
        &self.states[0]
    }

    pub fn last(&self) -> &WaveState {
        self.states.last().unwrap()
    }

    fn require_full(&self) -> Result<()> {
        if self.states.len() != self.trace.samples.len() {
            return Err(DegwaveError::MissingStates);
        }
        Ok(())
    }
}

/// Implicit-midpoint stepper with the midpoint matrix M + dt^2/4 T factored
/// once. `dt` may be negative for backward-in-time stepping.
pub struct Stepper<'a> {
    op: &'a DiscreteOperator,
    dt: f64,
    factor: TridiagCholesky,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(op: &'a DiscreteOperator, dt: f64) -> Result<Self> {
        let (t_diag, t_off) = op.stiffness();
        let q = dt * dt / 4.0;
        let diag: Vec<f64> = t_diag
            .iter()
            .zip(op.mass())
            .map(|(t, m)| m + q * t)
            .collect();
        let off: Vec<f64> = t_off.iter().map(|t| q * t).collect();
        let factor = TridiagCholesky::new(&diag, &off)?;
        Ok(Self { op, dt, factor, scratch: vec![0.0; t_diag.len()] })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step on active-node vectors. `source` is the boundary flux datum
    /// averaged over the step, entering the last active row.
    pub fn step_active(&mut self, u: &mut Vec<f64>, v: &mut Vec<f64>, source: f64) {
        let (t_diag, t_off) = self.op.stiffness();
        let mass = self.op.mass();
        let dt = self.dt;
        let q = dt * dt / 4.0;
        let n = u.len();
        tridiag_matvec(t_diag, t_off, u, &mut self.scratch);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = mass[i] * u[i] - q * self.scratch[i] + dt * mass[i] * v[i];
        }
        rhs[n - 1] += 0.5 * dt * dt * source;
        let u_new = self.factor.solve(&rhs);
        for i in 0..n {
            v[i] = 2.0 / dt * (u_new[i] - u[i]) - v[i];
        }
        *u = u_new;
    }
}

/// One implicit-midpoint step of the homogeneous system.
pub fn step(state: &WaveState, op: &DiscreteOperator, dt: f64) -> Result<WaveState> {
    let mut stepper = Stepper::new(op, dt)?;
    let mut u = op.restrict(&state.u)?;
    let mut v = op.restrict(&state.v)?;
    stepper.step_active(&mut u, &mut v, 0.0);
    Ok(WaveState { u: op.embed(&u), v: op.embed(&v), t: state.t + dt })
}

/// Discrete generalized energy (kinetic + weighted seminorm) / 2.
pub fn energy(state: &WaveState, op: &DiscreteOperator) -> Result<f64> {
    let kin = op.mass_norm_sq(&state.v);
    let pot = h1mu_norm_sq(&state.u, op)?;
    Ok(0.5 * (kin + pot))
}

/// Homogeneous evolution over [0, T] with trace and energy recorded at every
/// step and all states stored. The step count rounds T/dt to land exactly on T.
pub fn simulate(
    u0: &GridFunction,
    u1: &GridFunction,
    t_final: f64,
    dt: f64,
    op: &DiscreteOperator,
) -> Result<Trajectory> {
    if t_final <= 0.0 || dt <= 0.0 {
        return Err(DegwaveError::Parameter(format!(
            "need T > 0 and dt > 0, got T = {t_final}, dt = {dt}"
        )));
    }
    let steps = (t_final / dt).round().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let mut stepper = Stepper::new(op, dt)?;
    let mut u = op.restrict(u0)?;
    let mut v = op.restrict(u1)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    let record =
        |u: &[f64], v: &[f64], t: f64, op: &DiscreteOperator| -> Result<(WaveState, f64, f64)> {
            let st = WaveState { u: op.embed(u), v: op.embed(v), t };
            let tr = boundary_trace_derivative(&st.u)?;
            let e = energy(&st, op)?;
            Ok((st, tr, e))
        };
    let (st, tr, e) = record(&u, &v, 0.0, op)?;
    states.push(st);
    samples.push(tr);
    energies.push(e);
    for m in 1..=steps {
        stepper.step_active(&mut u, &mut v, 0.0);
        let (st, tr, e) = record(&u, &v, m as f64 * dt, op)?;
        states.push(st);
        samples.push(tr);
        energies.push(e);
    }
    Ok(Trajectory { dt, states, trace: TraceSeries { dt, samples }, energies })
}

/// Space integral of u_t^2 + (1-alpha)(x^alpha u_x^2 - mu x^{alpha-2} u^2).
fn multiplier_density(state: &WaveState, p: &Parameters) -> Result<f64> {
    let kinetic = weighted_integral(&state.v.pointwise_sq(), 0.0)?;
    let grad =
        weighted_face_square_integral(&state.u.grid, &face_derivative(&state.u), p.alpha());
    let pot = if p.mu() == 0.0 {
        0.0
    } else {
        p.mu() * weighted_integral(&state.u.pointwise_sq(), p.alpha() - 2.0)?
    };
    Ok(kinetic + (1.0 - p.alpha()) * (grad - pot))
}

/// Space integral of x u_x u_t, with face derivatives averaged to nodes.
fn bracket_x_ux_ut(state: &WaveState) -> Result<f64> {
    let du = node_derivative(&state.u);
    weighted_integral(&du.pointwise_mul(&state.v), 1.0)
}

fn trapezoid(dt: f64, terms: &[f64]) -> f64 {
    let n = terms.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.5 * (terms[0] + terms[n - 1]);
    for x in &terms[1..n - 1] {
        s += x;
    }
    s * dt
}

/// Residual of the boundary-trace multiplier identity: the trace integral
/// equals the space-time multiplier integral plus twice the bracket of
/// x u_x u_t between the endpoints.
pub fn multiplier_identity_residual(traj: &Trajectory, op: &DiscreteOperator) -> Result<f64> {
    traj.require_full()?;
    let p = op.params();
    let lhs = traj.trace.l2_norm_sq();
    let densities: Vec<f64> = traj
        .states
        .iter()
        .map(|s| multiplier_density(s, p))
        .collect::<Result<_>>()?;
    let volume = trapezoid(traj.dt, &densities);
    let b0 = bracket_x_ux_ut(traj.initial())?;
    let b1 = bracket_x_ux_ut(traj.last())?;
    Ok((lhs - volume - 2.0 * (b1 - b0)).abs())
}

/// Space integral of x^alpha u_x^2 - mu x^{alpha-2} u^2 - u_t^2.
fn equipartition_density(state: &WaveState, p: &Parameters) -> Result<f64> {
    let kinetic = weighted_integral(&state.v.pointwise_sq(), 0.0)?;
    let grad =
        weighted_face_square_integral(&state.u.grid, &face_derivative(&state.u), p.alpha());
    let pot = if p.mu() == 0.0 {
        0.0
    } else {
        p.mu() * weighted_integral(&state.u.pointwise_sq(), p.alpha() - 2.0)?
    };
    Ok(grad - pot - kinetic)
}

/// Residual of the equipartition identity: the space-time integral of
/// x^alpha u_x^2 - mu x^{alpha-2} u^2 - u_t^2 plus the bracket of u u_t
/// between the endpoints vanishes.
pub fn lemega_identity_residual(traj: &Trajectory, op: &DiscreteOperator) -> Result<f64> {
    traj.require_full()?;
    let p = op.params();
    let densities: Vec<f64> = traj
        .states
        .iter()
        .map(|s| equipartition_density(s, p))
        .collect::<Result<_>>()?;
    let volume = trapezoid(traj.dt, &densities);
    let bracket = |s: &WaveState| weighted_integral(&s.u.pointwise_mul(&s.v), 0.0);
    let b0 = bracket(traj.initial())?;
    let b1 = bracket(traj.last())?;
    Ok((volume + b1 - b0).abs())
}

/// Regime constant for the direct (hidden-regularity) inequality at horizon T.
pub fn direct_inequality_constant(p: &Parameters, t_final: f64) -> f64 {
    match p.regime() {
        Regime::WeaklyDegenerate => 2.0 * t_final + 4.0,
        Regime::StronglyDegenerate => {
            let cp = crate::hardy::x2_bound_constant(p.alpha()).expect("validated alpha");
            2.0 * t_final + 4.0 * cp
        }
    }
}

/// Trace energy bounded above by the explicit constant times the initial
/// energy; holds without tolerance at moderate resolution.
pub fn direct_inequality_report(traj: &Trajectory, p: &Parameters) -> Result<InequalityReport> {
    let t_final = traj.dt * (traj.trace.samples.len() - 1) as f64;
    let c = direct_inequality_constant(p, t_final);
    let lhs = traj.trace.l2_norm_sq();
    let rhs = c * traj.energies[0];
    Ok(InequalityReport::evaluate(lhs, rhs, c, 0.0))
}

/// Trace energy bounded below by ((2-alpha)T - 4) times the initial energy;
/// stated for filtered data, certified with a 5% tolerance on the constant.
pub fn observability_report(
    traj: &Trajectory,
    p: &Parameters,
    t_final: f64,
) -> Result<InequalityReport> {
    let e0 = traj.energies[0];
    if e0 <= 0.0 {
        return Err(DegwaveError::ZeroEnergy);
    }
    let c = (2.0 - p.alpha()) * t_final - 4.0;
    let lhs = c * e0;
    let rhs = traj.trace.l2_norm_sq();
    Ok(InequalityReport::evaluate(lhs, rhs, c, 0.05 * lhs.max(0.0)))
}

/// Observed trace quotient: trace energy / initial energy.
pub fn observed_quotient(traj: &Trajectory) -> Result<f64> {
    let e0 = traj.energies[0];
    if e0 <= 0.0 {
        return Err(DegwaveError::ZeroEnergy);
    }
    Ok(traj.trace.l2_norm_sq() / e0)
}

#[derive(Debug, Clone)]
pub struct DecayProfile {
    pub nodes: Vec<f64>,
    /// x_j^{alpha-1} u_j^2 at the nodes nearest x = 0.
    pub values: Vec<f64>,
    pub monotone_toward_zero: bool,
}

/// Weighted pointwise decay x^{alpha-1} u^2 -> 0 near the degenerate end.
pub fn trace_decay_check(state: &WaveState, alpha: f64) -> DecayProfile {
    let grid = &state.u.grid;
    let count = 10.min(grid.n() - 1);
    let mut nodes = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for j in 1..=count {
        let x = grid.node(j);
        nodes.push(x);
        values.push(x.powf(alpha - 1.0) * state.u.values[j] * state.u.values[j]);
    }
    let scale = values.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let monotone = values.windows(2).all(|w| w[1] >= w[0] - 1e-9 * scale);
    DecayProfile { nodes, values, monotone_toward_zero: monotone }
}
