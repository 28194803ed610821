//! Backward Euler in time with a Newton solve per step.
//!
//! Each step finds `Y` with
//!
//! ```text
//! R(Y) = M (Y - Y_prev) + k [ ν A Y - γ M Y + δ c(Y) + μ B Y ] = 0
//! ```
//!
//! where `c(Y)_i = (Y³, φ_i)` and `B` is the feedback coupling. The
//! residual is measured in this time-step-scaled form, whose roundoff floor
//! does not grow as `k` shrinks. Newton starts from `Y_prev` and solves each
//! linear system directly.

use std::sync::Arc;

use crate::assembly::{cubic_jacobian, cubic_term, feedback_operator, mass_matrix, stiffness_matrix, FeedbackOperator, TridiagonalMatrix};
use crate::diagnostics::{self, RunMetadata, Trajectory};
use crate::interpolants::{apply, InterpolantSpec};
use crate::linalg::{BandMatrix, LowRankSystem};
use crate::mesh::{FemFunction, MeshPartition};
use crate::model::{BoundaryCondition, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    /// Time step `k`.
    pub k: f64,
    /// Final time `T`.
    pub t_final: f64,
    pub newton_abs_tol: f64,
    pub newton_max_iters: usize,
    pub snapshot_times: Vec<f64>,
}

impl StepperConfig {
    pub const DEFAULT_TOL: f64 = 1e-12;
    pub const DEFAULT_MAX_ITERS: usize = 25;

    pub fn new(k: f64, t_final: f64) -> Result<Self> {
        let c = StepperConfig {
            k,
            t_final,
            newton_abs_tol: Self::DEFAULT_TOL,
            newton_max_iters: Self::DEFAULT_MAX_ITERS,
            snapshot_times: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    /// `M` uniform steps on `[0, T]`.
    pub fn from_steps(t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("need at least one time step".into()));
        }
        Self::new(t_final / steps as f64, t_final)
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter("time step k must be > 0".into()));
        }
        if !(self.t_final >= self.k * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter("final time must be at least one time step".into()));
        }
        if !(self.newton_abs_tol > 0.0) || self.newton_max_iters == 0 {
            return Err(Error::InvalidParameter("Newton tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps `M = ceil(T / k)`, treating `T / k` within 1e-9 of an
    /// integer as that integer.
    pub fn steps(&self) -> usize {
        let r = self.t_final / self.k;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewtonReport {
    /// Number of linear solves performed.
    pub iterations: usize,
    /// Residual norm before the first and after every iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl NewtonReport {
    /// Local convergence exponents `log(r_{i+1}/r_i) / log(r_i/r_{i-1})`
    /// over residual triples that all lie above `floor`.
    pub fn convergence_exponents(&self, floor: f64) -> Vec<f64> {
        self.residuals
            .windows(3)
            .filter(|w| w.iter().all(|&r| r > floor))
            .map(|w| (w[2] / w[1]).ln() / (w[1] / w[0]).ln())
            .collect()
    }
}

/// Sufficient step-size condition for solvability of one step:
/// `k (γ + μ c_p² h² / 2) < 1`.
pub fn step_size_guard(params: &ModelParams, h: f64, k: f64) -> bool {
    k * (params.gamma + params.mu * params.c_p * params.c_p * h * h / 2.0) < 1.0
}

/// Assembled operators for one `(mesh, bc, interpolant)` triple.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<MeshPartition>,
    pub bc: BoundaryCondition,
    pub spec: InterpolantSpec,
    pub mass: TridiagonalMatrix,
    pub stiffness: TridiagonalMatrix,
    /// `None` when the run is uncontrolled.
    pub feedback: Option<FeedbackOperator>,
}

impl Discretization {
    pub fn new(mesh: Arc<MeshPartition>, bc: BoundaryCondition, spec: InterpolantSpec, params: &ModelParams) -> Result<Self> {
        let feedback = if params.mu > 0.0 { Some(feedback_operator(&spec, &mesh, bc)?) } else { None };
        Ok(Discretization {
            mass: mass_matrix(&mesh, bc),
            stiffness: stiffness_matrix(&mesh, bc),
            mesh,
            bc,
            spec,
            feedback,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    /// `R(Y)` for the step from `y_prev` with step `k`.
    pub fn residual(&self, params: &ModelParams, k: f64, y: &FemFunction, y_prev: &FemFunction) -> Vec<f64> {
        let c = y.coeffs();
        let diff: Vec<f64> = c.iter().zip(y_prev.coeffs()).map(|(a, b)| a - b).collect();
        let mut r = self.mass.mul_vec(&diff);
        let my = self.mass.mul_vec(c);
        let ay = self.stiffness.mul_vec(c);
        for i in 0..r.len() {
            r[i] += k * (params.nu * ay[i] - params.gamma * my[i]);
        }
        if params.delta != 0.0 {
            for (ri, ci) in r.iter_mut().zip(cubic_term(y)) {
                *ri += k * params.delta * ci;
            }
        }
        if let Some(b) = &self.feedback {
            for (ri, bi) in r.iter_mut().zip(b.mul_vec(c)) {
                *ri += k * params.mu * bi;
            }
        }
        r
    }

    fn solve_newton_system(&self, params: &ModelParams, k: f64, y: &FemFunction, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut tri = self.mass.clone();
        for v in tri.diag.iter_mut().chain(tri.sub.iter_mut()).chain(tri.sup.iter_mut()) {
            *v *= 1.0 - k * params.gamma;
        }
        tri.axpy(k * params.nu, &self.stiffness);
        if params.delta != 0.0 {
            tri.axpy(k * params.delta, &cubic_jacobian(y));
        }
        match &self.feedback {
            None => tri.solve(rhs),
            Some(FeedbackOperator::Banded(b)) => {
                let bw = b.bandwidth().max(1);
                if bw == 1 {
                    let mut t = tri;
                    for i in 0..t.dim() {
                        for &(j, v) in b.row(i) {
                            t.add(i, j, k * params.mu * v);
                        }
                    }
                    t.solve(rhs)
                } else {
                    let mut band = BandMatrix::zeros(self.dim(), bw, bw);
                    band.add_tridiagonal(1.0, &tri);
                    band.add_sparse(k * params.mu, b);
                    Ok(band.factor()?.solve(rhs))
                }
            }
            Some(FeedbackOperator::LowRank { vectors, .. }) => {
                let mut band = BandMatrix::zeros(self.dim(), 1, 1);
                band.add_tridiagonal(1.0, &tri);
                let left = vectors.iter().map(|b| b.iter().map(|v| k * params.mu * v).collect()).collect();
                LowRankSystem { band, left, right: vectors.clone() }.solve(rhs)
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One backward Euler step from `y_prev`.
pub fn backward_euler_step(
    y_prev: &FemFunction,
    params: &ModelParams,
    disc: &Discretization,
    config: &StepperConfig,
) -> Result<(FemFunction, NewtonReport)> {
    let k = config.k;
    let mut y = y_prev.clone();
    let mut r = disc.residual(params, k, &y, y_prev);
    let mut report = NewtonReport { residuals: vec![norm2(&r)], ..Default::default() };
    // At least one update: with an absolute tolerance, a small enough state
    // would otherwise be accepted unchanged.
    while report.iterations == 0 || *report.residuals.last().unwrap() > config.newton_abs_tol {
        if report.iterations == config.newton_max_iters {
            return Err(Error::NewtonFailed {
                iterations: report.iterations,
                residual: *report.residuals.last().unwrap(),
                residuals: report.residuals,
            });
        }
        let step = disc.solve_newton_system(params, k, &y, &r)?;
        for (c, d) in y.coeffs_mut().iter_mut().zip(&step) {
            *c -= d;
        }
        report.iterations += 1;
        r = disc.residual(params, k, &y, y_prev);
        let rn = norm2(&r);
        if !rn.is_finite() {
            return Err(Error::NewtonFailed { iterations: report.iterations, residual: rn, residuals: report.residuals });
        }
        report.residuals.push(rn);
    }
    report.converged = true;
    Ok((y, report))
}

/// Stateful time stepper, for callers that need every intermediate state.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    disc: Discretization,
    config: StepperConfig,
    state: FemFunction,
    step: usize,
}

impl Stepper {
    pub fn new(
        y0h: FemFunction,
        params: ModelParams,
        spec: InterpolantSpec,
        config: StepperConfig,
    ) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let disc = Discretization::new(y0h.mesh().clone(), y0h.bc(), spec, &params)?;
        let h = disc.spec.observation_h(y0h.bc()).min(1.0);
        if !step_size_guard(&params, h, config.k) {
            log::warn!("k = {} violates k(γ + μ c_p² h²/2) < 1; solvability of each step is not guaranteed", config.k);
        }
        Ok(Stepper { params, disc, config, state: y0h, step: 0 })
    }

    pub fn state(&self) -> &FemFunction {
        &self.state
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.k
    }

    pub fn total_steps(&self) -> usize {
        self.config.steps()
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_steps()
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn advance(&mut self) -> Result<NewtonReport> {
        let (next, report) = backward_euler_step(&self.state, &self.params, &self.disc, &self.config).map_err(|e| {
            Error::StepFailed { step: self.step + 1, time: (self.step + 1) as f64 * self.config.k, source: Box::new(e) }
        })?;
        self.state = next;
        self.step += 1;
        Ok(report)
    }
}

/// Runs the fully discrete scheme from `Y⁰ = y0h` to `T`, recording norms
/// of the state and of the observed control at every step.
pub fn simulate(
    y0h: &FemFunction,
    params: &ModelParams,
    spec: &InterpolantSpec,
    config: &StepperConfig,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(y0h.clone(), *params, spec.clone(), config.clone())?;
    let bc = y0h.bc();
    let metadata = RunMetadata {
        params: *params,
        bc,
        spec: spec.clone(),
        config: config.clone(),
        h: y0h.mesh().h(),
    };
    let mut traj = Trajectory::new(metadata);
    let mut pending: Vec<f64> = config.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    let mut pending = pending.into_iter().peekable();

    let record = |traj: &mut Trajectory, s: &Stepper, iters: usize, pending: &mut std::iter::Peekable<std::vec::IntoIter<f64>>| -> Result<()> {
        let d = s.discretization();
        let y = s.state();
        let t = s.time();
        let control = apply(&d.spec, y, bc)?.l2_norm();
        traj.push(
            t,
            d.mass.quad_form(y.coeffs()).max(0.0).sqrt(),
            d.stiffness.quad_form(y.coeffs()).max(0.0).sqrt(),
            diagnostics::l4_norm(y),
            diagnostics::linf_norm(y),
            control,
            iters,
        );
        while let Some(&ts) = pending.peek() {
            if t + 0.5 * s.config().k >= ts {
                traj.snapshots.push((t, y.clone()));
                pending.next();
            } else {
                break;
            }
        }
        Ok(())
    };

    record(&mut traj, &stepper, 0, &mut pending)?;
    while !stepper.is_done() {
        let report = stepper.advance()?;
        record(&mut traj, &stepper, report.iterations, &mut pending)?;
    }
    traj.final_state = Some(stepper.state().clone());
    Ok(traj)
}
