//! PDE coefficients, boundary conditions and the closed-form analysis that
//! does not need a discretization: stabilization conditions, constant
//! steady states and linearized growth rates around zero.

use std::f64::consts::PI;
use std::fmt;

use crate::{Error, Result};

/// Coefficients of `y_t - ν y_xx - γ y + δ y³ = -μ I_h(y)` together with the
/// interpolation constant `c_p` of the observation operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub nu: f64,
    pub gamma: f64,
    pub delta: f64,
    pub mu: f64,
    pub c_p: f64,
}

impl ModelParams {
    /// Validated constructor. `γ = 0` and `δ = 0` are accepted so that
    /// linear and pure-diffusion problems can be expressed.
    pub fn new(nu: f64, gamma: f64, delta: f64, mu: f64, c_p: f64) -> Result<Self> {
        let p = ModelParams { nu, gamma, delta, mu, c_p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(msg.to_string()))
            }
        };
        check(self.nu.is_finite() && self.nu > 0.0, "nu must be > 0")?;
        check(self.gamma.is_finite() && self.gamma >= 0.0, "gamma must be >= 0")?;
        check(self.delta.is_finite() && self.delta >= 0.0, "delta must be >= 0")?;
        check(self.mu.is_finite() && self.mu >= 0.0, "mu must be >= 0")?;
        check(self.c_p.is_finite() && self.c_p > 0.0, "c_p must be > 0")
    }

    pub fn with_mu(self, mu: f64) -> Self {
        ModelParams { mu, ..self }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        ModelParams { gamma, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        ModelParams { delta, ..self }
    }

    pub fn with_nu(self, nu: f64) -> Self {
        ModelParams { nu, ..self }
    }

    /// `μ - 2ν - 2γ`, the margin by which the feedback dominates the
    /// linear instability in the energy estimate of the discrete scheme.
    pub fn energy_margin(&self) -> f64 {
        self.mu - 2.0 * self.nu - 2.0 * self.gamma
    }

    /// `μ - 3ν - 2γ`, the margin used by the error estimate.
    pub fn error_margin(&self) -> f64 {
        self.mu - 3.0 * self.nu - 2.0 * self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// `y(0) = 0`, `y_x(1) = 0`
    Mixed,
    /// `y(0) = y(1) = 0`
    Dirichlet,
    /// `y_x(0) = y_x(1) = 0`
    Neumann,
}

impl BoundaryCondition {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryCondition::Mixed => "mixed",
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }

    /// Index of the first mode of the Laplacian eigenbasis.
    pub fn first_mode(self) -> usize {
        match self {
            BoundaryCondition::Dirichlet => 1,
            BoundaryCondition::Mixed | BoundaryCondition::Neumann => 0,
        }
    }

    /// Eigenvalue `λ_n` of `-d²/dx²` on (0, 1).
    pub fn laplacian_eigenvalue(self, n: usize) -> Result<f64> {
        match self {
            BoundaryCondition::Mixed => {
                let w = (2 * n + 1) as f64 * PI / 2.0;
                Ok(w * w)
            }
            BoundaryCondition::Dirichlet if n == 0 => Err(Error::InvalidMode { index: n, bc: self.name() }),
            BoundaryCondition::Dirichlet | BoundaryCondition::Neumann => {
                let w = n as f64 * PI;
                Ok(w * w)
            }
        }
    }

    /// L²-normalized eigenfunction for mode `n`.
    pub fn eigenfunction(self, n: usize, x: f64) -> Result<f64> {
        let s2 = std::f64::consts::SQRT_2;
        match self {
            BoundaryCondition::Mixed => Ok(s2 * ((2 * n + 1) as f64 * PI * x / 2.0).sin()),
            BoundaryCondition::Dirichlet if n == 0 => Err(Error::InvalidMode { index: n, bc: self.name() }),
            BoundaryCondition::Dirichlet => Ok(s2 * (n as f64 * PI * x).sin()),
            BoundaryCondition::Neumann if n == 0 => Ok(1.0),
            BoundaryCondition::Neumann => Ok(s2 * (n as f64 * PI * x).cos()),
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mixed" => Ok(BoundaryCondition::Mixed),
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "neumann" => Ok(BoundaryCondition::Neumann),
            other => Err(Error::InvalidParameter(format!("unknown boundary condition '{other}'"))),
        }
    }
}

/// Outcome of the two stabilization inequalities
/// `ν ≥ μ c_p² h² / 2` and `μ ≥ 2(γ + ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// Observation scale the check was evaluated with.
    pub h: f64,
    pub nu_lower_ok: bool,
    pub mu_lower_ok: bool,
    /// Largest admissible decay rate `(μ - 2γ - 2ν) / 2`, clamped at 0.
    pub alpha_max: f64,
    /// `2ν - μ c_p² h²`
    pub beta: f64,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.nu_lower_ok && self.mu_lower_ok
    }
}

/// Evaluates the stabilization conditions at observation scale `h`.
///
/// Failed conditions are reported, never raised: uncontrolled runs are a
/// legitimate use of the solver.
pub fn check_stabilization_conditions(params: &ModelParams, h: f64) -> ConditionReport {
    let damping = params.mu * params.c_p * params.c_p * h * h;
    let alpha_max = (0.5 * (params.mu - 2.0 * params.gamma - 2.0 * params.nu)).max(0.0);
    ConditionReport {
        h,
        nu_lower_ok: params.nu >= damping / 2.0,
        mu_lower_ok: params.mu >= 2.0 * (params.gamma + params.nu),
        alpha_max,
        beta: 2.0 * params.nu - damping,
    }
}

/// Decay rate to use when none is requested explicitly.
pub fn default_decay_rate(params: &ModelParams, h: f64) -> f64 {
    check_stabilization_conditions(params, h).alpha_max
}

/// Growth rate `-ν λ_n + γ` of mode `n` of the linearization around zero.
pub fn linearized_mode_rate(params: &ModelParams, bc: BoundaryCondition, n: usize) -> Result<f64> {
    Ok(-params.nu * bc.laplacian_eigenvalue(n)? + params.gamma)
}

/// Number of modes of the uncontrolled linearization that do not decay.
pub fn unstable_mode_count(params: &ModelParams, bc: BoundaryCondition) -> usize {
    // eigenvalues grow without bound, so the unstable set is a prefix
    (bc.first_mode()..)
        .take_while(|&n| params.nu * bc.laplacian_eigenvalue(n).unwrap_or(f64::INFINITY) < params.gamma)
        .count()
}

/// Spatially constant roots of `γ y = δ y³`.
pub fn steady_states(params: &ModelParams) -> Vec<f64> {
    if params.delta <= 0.0 {
        return vec![0.0];
    }
    let r = (params.gamma / params.delta).sqrt();
    if r == 0.0 {
        vec![0.0]
    } else {
        vec![0.0, r, -r]
    }
}
