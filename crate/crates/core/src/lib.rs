//! Finite-element simulation of the Chafee-Infante equation
//!
//! ```text
//! y_t - ν y_xx - γ y + δ y³ = -μ I_h(y)   on (0, 1)
//! ```
//!
//! stabilized around `y = 0` by a finite-parameter feedback law. Space is
//! discretized with continuous piecewise-linear (P1) elements, time with
//! backward Euler, and every step is solved with Newton's method.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: coefficients, boundary conditions, stabilization conditions
//!   and the linearized mode analysis around zero.
//! * [`mesh`]: the 1D partition, the P1 space and the L² projection.
//! * [`assembly`]: mass, stiffness, cubic term, its Jacobian and the
//!   feedback coupling matrix.
//! * [`interpolants`]: the observation operators (nodal values, finite
//!   volumes, Fourier modes).
//! * [`stepper`]: the backward Euler / Newton time stepper.
//! * [`diagnostics`]: norms, decay fits and the discrete decay check.
//! * [`convergence`]: reference solutions, refinement studies and an
//!   independent finite-difference solver.
//! * [`config`] and [`export`]: experiment configuration and file formats
//!   shared by the command line runner and the browser demo.
//!
//! ```
//! use std::sync::Arc;
//! use chafee_infante::mesh::{project_initial, uniform_partition};
//! use chafee_infante::{simulate, BoundaryCondition, InterpolantKind, InterpolantSpec, ModelParams, StepperConfig};
//!
//! let mesh = Arc::new(uniform_partition(100)?);
//! let bc = BoundaryCondition::Mixed;
//! let params = ModelParams::new(0.1, 9.0, 9.0, 20.0, 1.0)?;
//! let spec = InterpolantSpec::on_mesh(InterpolantKind::FiniteVolumes, &mesh)?;
//! let y0 = project_initial(&|x| x * (1.0 - x), &mesh, bc)?;
//! let traj = simulate(&y0, &params, &spec, &StepperConfig::new(0.005, 5.0)?)?;
//! assert!(*traj.l2.last().unwrap() < 1e-8);
//! # Ok::<(), chafee_infante::Error>(())
//! ```

pub mod assembly;
pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod interpolants;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod quadrature;
pub mod stepper;

pub use error::{Error, Result};
pub use interpolants::{InterpolantKind, InterpolantSpec, SampleRule};
pub use mesh::{FemFunction, MeshPartition};
pub use model::{BoundaryCondition, ModelParams};
pub use stepper::{simulate, StepperConfig};
