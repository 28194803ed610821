//! Refinement studies against fine reference solutions, observed orders,
//! and an independent finite-difference solver used as a cross-check.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::mass_matrix;
use crate::interpolants::{apply, InterpolantKind, InterpolantSpec, Observation};
use crate::linalg::TridiagonalMatrix;
use crate::mesh::{project_initial, uniform_partition, FemFunction, MeshPartition};
use crate::model::{BoundaryCondition, ModelParams};
use crate::stepper::{simulate, StepperConfig};
use crate::{Error, Result};

/// Shared initial datum.
pub type InitialData = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How the observation operator is laid out on a given mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum Observer {
    /// One observation interval per mesh element.
    PerElement(InterpolantKind),
    /// A fixed observation partition (or Fourier count), independent of
    /// the mesh.
    Fixed(InterpolantSpec),
}

impl Observer {
    pub fn spec_for(&self, mesh: &MeshPartition) -> Result<InterpolantSpec> {
        match self {
            Observer::PerElement(kind) => InterpolantSpec::on_mesh(*kind, mesh),
            Observer::Fixed(spec) => Ok(spec.clone()),
        }
    }
}

/// Everything a refinement study holds fixed.
#[derive(Clone)]
pub struct StudySetup {
    pub params: ModelParams,
    pub bc: BoundaryCondition,
    pub observer: Observer,
    pub y0: InitialData,
    pub t_final: f64,
}

impl fmt::Debug for StudySetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StudySetup")
            .field("params", &self.params)
            .field("bc", &self.bc)
            .field("observer", &self.observer)
            .field("t_final", &self.t_final)
            .finish_non_exhaustive()
    }
}

impl StudySetup {
    /// Runs `(N, M)` and returns the final state together with the
    /// observation spec used.
    pub fn run(&self, n: usize, m: usize) -> Result<(FemFunction, InterpolantSpec)> {
        let mesh = Arc::new(uniform_partition(n)?);
        let spec = self.observer.spec_for(&mesh)?;
        let y0h = project_initial(&*self.y0, &mesh, self.bc)?;
        let cfg = StepperConfig::from_steps(self.t_final, m)?;
        let traj = simulate(&y0h, &self.params, &spec, &cfg)?;
        Ok((traj.final_state.expect("simulate stores the final state"), spec))
    }
}

/// Fine-grid solution at the final time, with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub state: FemFunction,
    pub n_ref: usize,
    pub m_ref: usize,
    pub t_final: f64,
    pub params: ModelParams,
}

impl ReferenceSolution {
    pub fn h_ref(&self) -> f64 {
        1.0 / self.n_ref as f64
    }
}

pub fn compute_reference(setup: &StudySetup, n_ref: usize, m_ref: usize) -> Result<ReferenceSolution> {
    let (state, _) = setup.run(n_ref, m_ref)?;
    Ok(ReferenceSolution { state, n_ref, m_ref, t_final: setup.t_final, params: setup.params })
}

/// Evaluates `coarse` on the nodes of `fine`, which must contain every
/// coarse node.
pub fn prolongate(coarse: &FemFunction, fine: &Arc<MeshPartition>) -> Result<FemFunction> {
    for &x in coarse.mesh().nodes() {
        if fine.node_index(x, 1e-12).is_none() {
            return Err(Error::NonNestedMeshes(format!("coarse node {x} is not a reference node")));
        }
    }
    let bc = coarse.bc();
    Ok(FemFunction::from_nodal(fine.clone(), bc, |x| coarse.eval(x).unwrap_or(0.0)))
}

/// `(‖ref - coarse‖_{L²}, max over reference nodes)`.
pub fn grid_error(coarse: &FemFunction, reference: &FemFunction) -> Result<(f64, f64)> {
    let fine = reference.mesh();
    let p = prolongate(coarse, fine)?;
    let d = reference.difference(&p)?;
    let l2 = mass_matrix(fine, d.bc()).quad_form(d.coeffs()).max(0.0).sqrt();
    let linf = d.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((l2, linf))
}

/// `log(e_coarse / e_fine) / log(ratio)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, ratio: f64) -> Result<f64> {
    if !(e_coarse > 0.0) {
        return Err(Error::NonPositive { what: "coarse error", value: e_coarse });
    }
    if !(e_fine > 0.0) {
        return Err(Error::NonPositive { what: "fine error", value: e_fine });
    }
    if !(ratio > 1.0) {
        return Err(Error::InvalidParameter(format!("refinement ratio must exceed 1, got {ratio}")));
    }
    Ok((e_coarse / e_fine).ln() / ratio.ln())
}

/// `(L², L∞)` distance of two observations of the same kind.
pub fn observation_difference(a: &Observation, b: &Observation) -> Result<(f64, f64)> {
    match (a, b) {
        (Observation::Constant(p), Observation::Constant(q)) => {
            if p.breakpoints() != q.breakpoints() {
                return Err(Error::IncompatiblePartition("observations use different partitions".into()));
            }
            let mut l2 = 0.0;
            let mut linf = 0.0f64;
            for (i, w) in p.breakpoints().windows(2).enumerate() {
                let d = p.values()[i] - q.values()[i];
                l2 += d * d * (w[1] - w[0]);
                linf = linf.max(d.abs());
            }
            Ok((l2.sqrt(), linf))
        }
        (Observation::Modes(p), Observation::Modes(q)) => {
            if p.coefficients().len() != q.coefficients().len() || p.bc() != q.bc() {
                return Err(Error::IncompatiblePartition("observations use different mode sets".into()));
            }
            let d: Vec<f64> = p.coefficients().iter().zip(q.coefficients()).map(|(x, y)| x - y).collect();
            let l2 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let samples = 4096;
            let linf = (0..=samples)
                .map(|s| {
                    let x = s as f64 / samples as f64;
                    d.iter().enumerate().map(|(m, c)| c * p.mode(m, x)).sum::<f64>().abs()
                })
                .fold(0.0, f64::max);
            Ok((l2, linf))
        }
        _ => Err(Error::IncompatiblePartition("observations of different kinds".into())),
    }
}

/// Exact zeros leave the order undefined (NaN) instead of failing.
fn order_or_nan(e_coarse: f64, e_fine: f64, ratio: f64) -> Result<f64> {
    if e_coarse == 0.0 || e_fine == 0.0 {
        Ok(f64::NAN)
    } else {
        observed_order(e_coarse, e_fine, ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    Space,
    Time,
    Control,
}

impl fmt::Display for StudyAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyAxis::Space => "space",
            StudyAxis::Time => "time",
            StudyAxis::Control => "control",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rung {
    /// `"1/N"` on spatial ladders, `"M"` on temporal ones.
    pub label: String,
    /// `h` or `M`.
    pub resolution: f64,
    pub error_l2: f64,
    pub error_linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub axis: StudyAxis,
    pub ladder: Vec<Rung>,
    /// Order between consecutive rungs; NaN where an error is exactly zero.
    pub orders_l2: Vec<f64>,
    pub orders_linf: Vec<f64>,
}

impl ConvergenceReport {
    fn from_rungs(axis: StudyAxis, ladder: Vec<Rung>) -> Result<Self> {
        let mut orders_l2 = Vec::new();
        let mut orders_linf = Vec::new();
        for w in ladder.windows(2) {
            let ratio = if w[1].resolution > w[0].resolution { w[1].resolution / w[0].resolution } else { w[0].resolution / w[1].resolution };
            orders_l2.push(order_or_nan(w[0].error_l2, w[1].error_l2, ratio)?);
            orders_linf.push(order_or_nan(w[0].error_linf, w[1].error_linf, ratio)?);
        }
        Ok(ConvergenceReport { axis, ladder, orders_l2, orders_linf })
    }

    pub fn mean_last_two_l2(&self) -> Option<f64> {
        mean_last_two(&self.orders_l2)
    }

    pub fn mean_last_two_linf(&self) -> Option<f64> {
        mean_last_two(&self.orders_linf)
    }
}

pub fn mean_last_two(orders: &[f64]) -> Option<f64> {
    match orders {
        [.., a, b] => Some(0.5 * (a + b)),
        _ => None,
    }
}

fn check_ladder_nested(ladder: &[usize], n_ref: usize) -> Result<()> {
    for &n in ladder {
        if n >= n_ref || !n_ref.is_multiple_of(n) {
            return Err(Error::NonNestedMeshes(format!("N = {n} does not divide reference N = {n_ref}")));
        }
    }
    Ok(())
}

/// State errors at the final time for every `N` in `n_ladder` at fixed
/// `m_fixed` steps, against `reference`.
pub fn spatial_study(setup: &StudySetup, n_ladder: &[usize], m_fixed: usize, reference: &ReferenceSolution) -> Result<ConvergenceReport> {
    check_ladder_nested(n_ladder, reference.n_ref)?;
    let rungs = n_ladder
        .par_iter()
        .map(|&n| {
            let (y, _) = setup.run(n, m_fixed)?;
            let (l2, linf) = grid_error(&y, &reference.state)?;
            Ok(Rung { label: format!("1/{n}"), resolution: 1.0 / n as f64, error_l2: l2, error_linf: linf })
        })
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::from_rungs(StudyAxis::Space, rungs)
}

/// State errors at the final time for every `M` in `m_ladder` at fixed
/// `n_fixed`, against a reference on the same mesh.
pub fn temporal_study(setup: &StudySetup, m_ladder: &[usize], n_fixed: usize, reference: &ReferenceSolution) -> Result<ConvergenceReport> {
    if reference.n_ref != n_fixed {
        return Err(Error::InvalidParameter("temporal reference must share the study mesh".into()));
    }
    if let Some(&m) = m_ladder.iter().find(|&&m| m > reference.m_ref) {
        return Err(Error::InvalidParameter(format!("ladder M = {m} exceeds reference M = {}", reference.m_ref)));
    }
    let rungs = m_ladder
        .par_iter()
        .map(|&m| {
            let (y, _) = setup.run(n_fixed, m)?;
            let (l2, linf) = grid_error(&y, &reference.state)?;
            Ok(Rung { label: m.to_string(), resolution: m as f64, error_l2: l2, error_linf: linf })
        })
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::from_rungs(StudyAxis::Time, rungs)
}

/// Ladder direction of a control study.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlLadder {
    /// Vary `N` at fixed `M`.
    Space { n_ladder: Vec<usize>, m_fixed: usize },
    /// Vary `M` at fixed `N`.
    Time { m_ladder: Vec<usize>, n_fixed: usize },
}

/// Errors `I_h(y_ref) - I_h(Y^M)` of the control input, with `I_h` the
/// observation operator of each rung.
pub fn control_study(setup: &StudySetup, ladder: &ControlLadder, reference: &ReferenceSolution) -> Result<ConvergenceReport> {
    let runs: Vec<(usize, usize, String, f64)> = match ladder {
        ControlLadder::Space { n_ladder, m_fixed } => {
            check_ladder_nested(n_ladder, reference.n_ref)?;
            n_ladder.iter().map(|&n| (n, *m_fixed, format!("1/{n}"), 1.0 / n as f64)).collect()
        }
        ControlLadder::Time { m_ladder, n_fixed } => {
            if reference.n_ref != *n_fixed {
                return Err(Error::InvalidParameter("temporal reference must share the study mesh".into()));
            }
            m_ladder.iter().map(|&m| (*n_fixed, m, m.to_string(), m as f64)).collect()
        }
    };
    let bc = setup.bc;
    let rungs = runs
        .par_iter()
        .map(|(n, m, label, res)| {
            let (y, spec) = setup.run(*n, *m)?;
            let ours = apply(&spec, &y, bc)?;
            let theirs = apply(&spec, &reference.state, bc)?;
            let (l2, linf) = observation_difference(&theirs, &ours)?;
            Ok(Rung { label: label.clone(), resolution: *res, error_l2: l2, error_linf: linf })
        })
        .collect::<Result<Vec<_>>>()?;
    ConvergenceReport::from_rungs(StudyAxis::Control, rungs)
}

/// Centered finite differences in space with backward Euler / Newton in
/// time. Neumann ends use a mirrored ghost node. The feedback at node `i`
/// is the average of the element-midpoint samples on either side,
/// `(y_{i-1} + 2 y_i + y_{i+1}) / 4`. Returns the `N + 1` nodal values at
/// `T`.
pub fn fd_oracle(
    params: &ModelParams,
    bc: BoundaryCondition,
    y0: &dyn Fn(f64) -> f64,
    n: usize,
    steps: usize,
    t_final: f64,
) -> Result<Vec<f64>> {
    params.validate()?;
    if n < 2 || steps == 0 {
        return Err(Error::InvalidParameter("finite-difference oracle needs N ≥ 2 and at least one step".into()));
    }
    let h = 1.0 / n as f64;
    let k = t_final / steps as f64;
    let (lo, hi) = match bc {
        BoundaryCondition::Mixed => (1, n),
        BoundaryCondition::Dirichlet => (1, n - 1),
        BoundaryCondition::Neumann => (0, n),
    };
    let dim = hi - lo + 1;
    // constant part of the Jacobian and of the linear operator, in unknowns
    let mut lin = TridiagonalMatrix::zeros(dim);
    let nu = params.nu / (h * h);
    let q = params.mu / 4.0;
    for r in 0..dim {
        let i = lo + r;
        let (wl, wr) = match bc {
            BoundaryCondition::Neumann if i == 0 => (0.0, 2.0),
            BoundaryCondition::Neumann | BoundaryCondition::Mixed if i == n => (2.0, 0.0),
            _ => (1.0, 1.0),
        };
        lin.add(r, r, 2.0 * nu - params.gamma + 2.0 * q);
        if r > 0 {
            lin.add(r, r - 1, wl * (q - nu));
        }
        if r + 1 < dim {
            lin.add(r, r + 1, wr * (q - nu));
        }
    }
    let mut y: Vec<f64> = (lo..=hi).map(|i| y0(i as f64 * h)).collect();
    let tol = 1e-12;
    for step in 0..steps {
        let prev = y.clone();
        let residual = |y: &[f64]| -> Vec<f64> {
            let ly = lin.mul_vec(y);
            (0..dim).map(|r| (y[r] - prev[r]) + k * (ly[r] + params.delta * y[r].powi(3))).collect()
        };
        let norm = |r: &[f64]| (h * r.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let mut r = residual(&y);
        let mut res = vec![norm(&r)];
        let mut it = 0;
        while *res.last().unwrap() > tol {
            if it == 25 {
                return Err(Error::StepFailed {
                    step: step + 1,
                    time: (step + 1) as f64 * k,
                    source: Box::new(Error::NewtonFailed { iterations: it, residual: *res.last().unwrap(), residuals: res }),
                });
            }
            let mut jac = TridiagonalMatrix::zeros(dim);
            jac.axpy(k, &lin);
            for (rr, yr) in y.iter().enumerate() {
                jac.add(rr, rr, 1.0 + 3.0 * k * params.delta * yr * yr);
            }
            let d = jac.solve(&r)?;
            for (a, b) in y.iter_mut().zip(&d) {
                *a -= b;
            }
            it += 1;
            r = residual(&y);
            res.push(norm(&r));
        }
    }
    let mut out = vec![0.0; n + 1];
    out[lo..=hi].copy_from_slice(&y);
    Ok(out)
}

/// Parameter matrices of the standard refinement studies.
pub mod tables {
    use super::*;
    use crate::interpolants::SampleRule;

    pub const SPACE_LADDER: [usize; 6] = [10, 20, 40, 80, 160, 320];
    pub const SPACE_M: usize = 1050;
    pub const SPACE_N_REF: usize = 1280;
    pub const TIME_LADDER: [usize; 6] = [100, 200, 400, 800, 1600, 3200];
    pub const TIME_N: usize = 200;
    pub const TIME_M_REF: usize = 16 * 3200;

    /// `ν = 0.1`, `γ = δ`, `μ = 20`, `y0 = x(1 - x)`, mixed boundary,
    /// nodal observation at element midpoints, `T = 1`.
    pub fn example51(gamma: f64) -> StudySetup {
        StudySetup {
            params: ModelParams { nu: 0.1, gamma, delta: gamma, mu: 20.0, c_p: 1.0 },
            bc: BoundaryCondition::Mixed,
            observer: Observer::PerElement(InterpolantKind::NodalValues { rule: SampleRule::Midpoint }),
            y0: Arc::new(|x| x * (1.0 - x)),
            t_final: 1.0,
        }
    }

    /// State orders in space.
    pub fn table1() -> Result<ConvergenceReport> {
        let setup = example51(9.0);
        let r = compute_reference(&setup, SPACE_N_REF, SPACE_M)?;
        spatial_study(&setup, &SPACE_LADDER, SPACE_M, &r)
    }

    /// State orders in time for one `γ` column.
    pub fn table2(gamma: f64) -> Result<ConvergenceReport> {
        let setup = example51(gamma);
        let r = compute_reference(&setup, TIME_N, TIME_M_REF)?;
        temporal_study(&setup, &TIME_LADDER, TIME_N, &r)
    }

    /// Control-input orders in space and in time.
    pub fn table4() -> Result<(ConvergenceReport, ConvergenceReport)> {
        let setup = example51(9.0);
        let rs = compute_reference(&setup, SPACE_N_REF, SPACE_M)?;
        let space = control_study(&setup, &ControlLadder::Space { n_ladder: SPACE_LADDER.to_vec(), m_fixed: SPACE_M }, &rs)?;
        let rt = compute_reference(&setup, TIME_N, TIME_M_REF)?;
        let time = control_study(&setup, &ControlLadder::Time { m_ladder: TIME_LADDER.to_vec(), n_fixed: TIME_N }, &rt)?;
        Ok((space, time))
    }
}
