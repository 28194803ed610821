//! Norms of P1 functions, trajectories and decay checks.

use crate::assembly::{mass_matrix, stiffness_matrix};
use crate::interpolants::InterpolantSpec;
use crate::mesh::FemFunction;
use crate::model::{BoundaryCondition, ModelParams};
use crate::quadrature::GAUSS3;
use crate::stepper::StepperConfig;
use crate::{Error, Result};

/// `‖f‖_{L²}` from the mass matrix (exact for P1).
pub fn l2_norm(f: &FemFunction) -> f64 {
    mass_matrix(f.mesh(), f.bc()).quad_form(f.coeffs()).max(0.0).sqrt()
}

/// `‖f_x‖_{L²}` from the stiffness matrix.
pub fn h1_seminorm(f: &FemFunction) -> f64 {
    stiffness_matrix(f.mesh(), f.bc()).quad_form(f.coeffs()).max(0.0).sqrt()
}

/// `(‖f‖² + ‖f_x‖²)^{1/2}`.
pub fn h1_norm(f: &FemFunction) -> f64 {
    l2_norm(f).hypot(h1_seminorm(f))
}

/// `‖f‖_{L⁴}`, with 3-point Gauss per element (exact for the quartic
/// integrand).
pub fn l4_norm(f: &FemFunction) -> f64 {
    let mesh = f.mesh();
    let mut s = 0.0;
    for e in 0..mesh.elements() {
        let (yl, yr) = (f.node_value(e), f.node_value(e + 1));
        let h = mesh.element_lengths()[e];
        for (t, w) in GAUSS3.mapped(0.0, 1.0) {
            let v = yl + (yr - yl) * t;
            s += w * h * (v * v) * (v * v);
        }
    }
    s.sqrt().sqrt()
}

/// Largest absolute nodal value, which is the sup norm of a P1 function.
pub fn linf_norm(f: &FemFunction) -> f64 {
    f.nodal_values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Everything needed to rerun a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub params: ModelParams,
    pub bc: BoundaryCondition,
    pub spec: InterpolantSpec,
    pub config: StepperConfig,
    /// Mesh width.
    pub h: f64,
}

/// Per-step series of a simulation. Entry 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1_semi: Vec<f64>,
    pub l4: Vec<f64>,
    pub linf: Vec<f64>,
    /// `‖I_h(Y^n)‖_{L²}`, without the gain `μ`.
    pub control_l2: Vec<f64>,
    /// Newton iterations used to reach each state (0 for the initial one).
    pub newton_iters: Vec<usize>,
    pub snapshots: Vec<(f64, FemFunction)>,
    pub metadata: RunMetadata,
    pub final_state: Option<FemFunction>,
}

impl Trajectory {
    pub fn new(metadata: RunMetadata) -> Self {
        Trajectory {
            times: Vec::new(),
            l2: Vec::new(),
            h1_semi: Vec::new(),
            l4: Vec::new(),
            linf: Vec::new(),
            control_l2: Vec::new(),
            newton_iters: Vec::new(),
            snapshots: Vec::new(),
            metadata,
            final_state: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, t: f64, l2: f64, h1_semi: f64, l4: f64, linf: f64, control: f64, iters: usize) {
        self.times.push(t);
        self.l2.push(l2);
        self.h1_semi.push(h1_semi);
        self.l4.push(l4);
        self.linf.push(linf);
        self.control_l2.push(control);
        self.newton_iters.push(iters);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Full `H¹` norm per step.
    pub fn h1(&self) -> Vec<f64> {
        self.l2.iter().zip(&self.h1_semi).map(|(a, b)| a.hypot(*b)).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Default fit window `[0.2 T, T]`.
    pub fn default_fit_window(&self) -> (f64, f64) {
        let t = self.final_time();
        (0.2 * t, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Fitted rate `α` in `‖Y^n‖ ≈ C e^{-α t_n}`.
    pub alpha_est: f64,
    pub fit_window: (f64, f64),
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares line through `(t, ln v)`; returns (slope, intercept, rms).
pub fn log_linear_fit(times: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), actual: values.len() });
    }
    if times.len() < 2 {
        return Err(Error::InvalidParameter("decay fit needs at least two points".into()));
    }
    if let Some(&v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositive { what: "norm in fit window", value: v });
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("decay fit window has a single time".into()));
    }
    let slope = sxy / sxx;
    let icept = lm - slope * tm;
    let rms = (times.iter().zip(&logs).map(|(t, l)| (l - icept - slope * t).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, icept, rms))
}

/// Fits the exponential decay rate of `‖Y^n‖_{L²}` over `window`.
pub fn decay_rate_fit(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let (a, b) = window;
    let eps = 1e-12 * traj.final_time().max(1.0);
    let (t, v): (Vec<f64>, Vec<f64>) =
        traj.times.iter().zip(&traj.l2).filter(|(t, _)| **t >= a - eps && **t <= b + eps).map(|(t, v)| (*t, *v)).unzip();
    let (slope, _, residual) = log_linear_fit(&t, &v)?;
    Ok(DecayFit { alpha_est: -slope, fit_window: window, residual, points: t.len() })
}

/// Step condition of the discrete decay lemma: `e^{αk} < 1 + k β₃ / 2`
/// with `β₃ = μ - 2ν - 2γ`.
pub fn decay_step_condition(params: &ModelParams, alpha: f64, k: f64) -> bool {
    (alpha * k).exp() < 1.0 + k * params.energy_margin() / 2.0
}

/// Step condition of the error estimate: `e^{αk} < 1 + k β₂ / 2` with
/// `β₂ = μ - 3ν - 2γ`.
pub fn error_step_condition(params: &ModelParams, alpha: f64, k: f64) -> bool {
    (alpha * k).exp() < 1.0 + k * params.error_margin() / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayViolation {
    pub step: usize,
    pub time: f64,
    /// `‖Y^n‖²`.
    pub lhs: f64,
    /// `e^{-2αt_n} ‖Y⁰‖²`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCheckReport {
    pub alpha: f64,
    /// Whether the stabilization conditions and the step condition hold,
    /// i.e. whether the bound is actually guaranteed.
    pub hypotheses_hold: bool,
    /// Per step: bound satisfied.
    pub per_step: Vec<bool>,
    pub violations: usize,
    pub first_violation: Option<DecayViolation>,
}

impl DecayCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `‖Y^n‖² ≤ e^{-2αt_n} ‖Y⁰‖²` at every recorded step.
pub fn verify_discrete_decay(traj: &Trajectory, params: &ModelParams, h: f64, alpha: f64) -> DecayCheckReport {
    let k = traj.metadata.config.k;
    let cond = crate::model::check_stabilization_conditions(params, h);
    let hypotheses_hold = cond.holds() && alpha > 0.0 && 2.0 * alpha <= params.energy_margin() && decay_step_condition(params, alpha, k);
    let y0 = traj.l2.first().copied().unwrap_or(0.0);
    let mut per_step = Vec::with_capacity(traj.len());
    let mut first_violation = None;
    for (n, (&t, &v)) in traj.times.iter().zip(&traj.l2).enumerate() {
        let lhs = v * v;
        let rhs = (-2.0 * alpha * t).exp() * y0 * y0;
        let ok = lhs <= rhs * (1.0 + 1e-12);
        if !ok && first_violation.is_none() {
            first_violation = Some(DecayViolation { step: n, time: t, lhs, rhs });
        }
        per_step.push(ok);
    }
    let violations = per_step.iter().filter(|ok| !**ok).count();
    DecayCheckReport { alpha, hypotheses_hold, per_step, violations, first_violation }
}

/// `e^{-αt_n} ‖Y⁰‖`, the guaranteed envelope on the norm itself.
pub fn decay_bound_series(traj: &Trajectory, alpha: f64) -> Vec<f64> {
    let y0 = traj.l2.first().copied().unwrap_or(0.0);
    traj.times.iter().map(|t| (-alpha * t).exp() * y0).collect()
}

/// `(t_n, ‖I_h(Y^n)‖_{L²})` pairs.
pub fn control_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.times.iter().copied().zip(traj.control_l2.iter().copied()).collect()
}
