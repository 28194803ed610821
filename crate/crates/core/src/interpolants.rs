//! Finite-parameter observation operators `I_h`.
//!
//! Three families are supported:
//!
//! * nodal values: `I_h φ = Σ φ(x_n*) χ_{J_n}` with `x_n*` chosen inside
//!   each observation interval `J_n` by a [`SampleRule`],
//! * finite volumes: `I_h φ = Σ (mean of φ over J_n) χ_{J_n}`,
//! * Fourier modes: orthogonal projection onto the first eigenfunctions of
//!   the Laplacian for the active boundary condition.
//!
//! All three are linear, which is what lets the feedback term be assembled
//! once as a matrix acting on the coefficient vector.

use std::fmt;
use std::sync::Arc;

use crate::mesh::{integrate, integrate_weighted, Field, MeshPartition};
use crate::model::BoundaryCondition;
use crate::quadrature::{composite, GAUSS5};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SampleRule {
    Left,
    #[default]
    Midpoint,
    Right,
}

impl SampleRule {
    pub fn point(self, a: f64, b: f64) -> f64 {
        match self {
            SampleRule::Left => a,
            SampleRule::Midpoint => 0.5 * (a + b),
            SampleRule::Right => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpolantKind {
    NodalValues { rule: SampleRule },
    FiniteVolumes,
    FourierModes { count: usize },
}

impl InterpolantKind {
    pub fn name(&self) -> &'static str {
        match self {
            InterpolantKind::NodalValues { .. } => "nodal",
            InterpolantKind::FiniteVolumes => "volumes",
            InterpolantKind::FourierModes { .. } => "fourier",
        }
    }
}

impl fmt::Display for InterpolantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An observation operator together with its observation intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantSpec {
    kind: InterpolantKind,
    // breakpoints 0 = p_0 < ... < p_n = 1; empty for Fourier modes
    partition: Vec<f64>,
}

impl InterpolantSpec {
    pub fn new(kind: InterpolantKind, partition: Vec<f64>) -> Result<Self> {
        match kind {
            InterpolantKind::FourierModes { .. } => Ok(InterpolantSpec { kind, partition: Vec::new() }),
            _ => {
                validate_partition(&partition)?;
                Ok(InterpolantSpec { kind, partition })
            }
        }
    }

    pub fn nodal_values(rule: SampleRule, partition: Vec<f64>) -> Result<Self> {
        Self::new(InterpolantKind::NodalValues { rule }, partition)
    }

    pub fn finite_volumes(partition: Vec<f64>) -> Result<Self> {
        Self::new(InterpolantKind::FiniteVolumes, partition)
    }

    /// `count = 0` is the empty projection (no controllers).
    pub fn fourier_modes(count: usize) -> Self {
        InterpolantSpec { kind: InterpolantKind::FourierModes { count }, partition: Vec::new() }
    }

    /// Uses the element partition of `mesh` as the observation partition.
    pub fn on_mesh(kind: InterpolantKind, mesh: &MeshPartition) -> Result<Self> {
        Self::new(kind, mesh.nodes().to_vec())
    }

    pub fn kind(&self) -> InterpolantKind {
        self.kind
    }

    /// Observation breakpoints (empty for Fourier modes).
    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.partition.windows(2).map(|w| (w[0], w[1]))
    }

    /// Number of scalar controllers: observation intervals, or modes.
    pub fn controller_count(&self) -> usize {
        match self.kind {
            InterpolantKind::FourierModes { count } => count,
            _ => self.partition.len() - 1,
        }
    }

    /// Observation scale entering `‖φ - I_h φ‖ ≤ c_p h ‖φ‖₁`.
    ///
    /// For piecewise-constant kinds this is the widest interval. For a
    /// Fourier projection onto `m` modes the bound holds with
    /// `h = λ_m^{-1/2}`, `λ_m` the first excluded eigenvalue.
    pub fn observation_h(&self, bc: BoundaryCondition) -> f64 {
        match self.kind {
            InterpolantKind::FourierModes { count } => {
                let lambda = bc.laplacian_eigenvalue(bc.first_mode() + count).unwrap_or(f64::INFINITY);
                if lambda > 0.0 {
                    lambda.sqrt().recip()
                } else {
                    f64::INFINITY
                }
            }
            _ => self.intervals().map(|(a, b)| b - a).fold(0.0, f64::max),
        }
    }

    fn require(&self, want: &'static str) -> Result<()> {
        if self.kind.name() == want {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("expected a {want} interpolant, got {}", self.kind)))
        }
    }
}

fn validate_partition(p: &[f64]) -> Result<()> {
    if p.len() < 2 || p[0] != 0.0 || *p.last().unwrap() != 1.0 {
        return Err(Error::InvalidParameter("observation intervals must tile [0, 1]".into()));
    }
    if p.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("observation breakpoints must increase".into()));
    }
    Ok(())
}

/// Breakpoints of `n` equal observation intervals.
pub fn uniform_breakpoints(n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    if let Some(last) = p.last_mut() {
        *last = 1.0;
    }
    p
}

/// Piecewise-constant function on a partition of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_partition(&breakpoints)?;
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::DimensionMismatch { expected: breakpoints.len() - 1, actual: values.len() });
        }
        Ok(PiecewiseConstantFn { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| v * v * (w[1] - w[0]))
            .sum::<f64>()
            .sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integral(&self) -> f64 {
        self.breakpoints.windows(2).zip(&self.values).map(|(w, v)| v * (w[1] - w[0])).sum()
    }
}

impl Field for PiecewiseConstantFn {
    fn value(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&p| p <= x);
        self.values[idx.saturating_sub(1).min(self.values.len() - 1)]
    }

    fn breakpoints(&self) -> Option<&[f64]> {
        Some(&self.breakpoints)
    }
}

/// `Σ_m c_m e_m` in the orthonormal Laplacian eigenbasis of `bc`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierProjection {
    bc: BoundaryCondition,
    coefficients: Vec<f64>,
}

impl FourierProjection {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Exact by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn mode(&self, m: usize, x: f64) -> f64 {
        self.bc.eigenfunction(self.bc.first_mode() + m, x).unwrap_or(0.0)
    }
}

impl Field for FourierProjection {
    fn value(&self, x: f64) -> f64 {
        self.coefficients.iter().enumerate().map(|(m, c)| c * self.mode(m, x)).sum()
    }
}

/// Output of an observation operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Constant(PiecewiseConstantFn),
    Modes(FourierProjection),
}

impl Observation {
    pub fn l2_norm(&self) -> f64 {
        match self {
            Observation::Constant(p) => p.l2_norm(),
            Observation::Modes(f) => f.l2_norm(),
        }
    }

    /// Controller values: interval values or modal coefficients.
    pub fn parameters(&self) -> &[f64] {
        match self {
            Observation::Constant(p) => p.values(),
            Observation::Modes(f) => f.coefficients(),
        }
    }
}

impl Field for Observation {
    fn value(&self, x: f64) -> f64 {
        match self {
            Observation::Constant(p) => p.value(x),
            Observation::Modes(f) => f.value(x),
        }
    }

    fn breakpoints(&self) -> Option<&[f64]> {
        match self {
            Observation::Constant(p) => Some(p.breakpoints()),
            Observation::Modes(_) => None,
        }
    }
}

/// Nodal-values interpolant of `f`.
pub fn apply_nodal(spec: &InterpolantSpec, f: &(impl Field + ?Sized)) -> Result<PiecewiseConstantFn> {
    spec.require("nodal")?;
    let InterpolantKind::NodalValues { rule } = spec.kind else { unreachable!() };
    let values = spec.intervals().map(|(a, b)| f.value(rule.point(a, b))).collect();
    PiecewiseConstantFn::new(spec.partition.clone(), values)
}

/// Finite-volume interpolant (interval means) of `f`.
pub fn apply_volumes(spec: &InterpolantSpec, f: &(impl Field + ?Sized)) -> Result<PiecewiseConstantFn> {
    spec.require("volumes")?;
    let values = spec.intervals().map(|(a, b)| integrate(f, a, b) / (b - a)).collect();
    PiecewiseConstantFn::new(spec.partition.clone(), values)
}

/// Projection of `f` onto the first `count` eigenfunctions for `bc`.
pub fn apply_fourier(spec: &InterpolantSpec, f: &(impl Field + ?Sized), bc: BoundaryCondition) -> Result<FourierProjection> {
    spec.require("fourier")?;
    let InterpolantKind::FourierModes { count } = spec.kind else { unreachable!() };
    let first = bc.first_mode();
    let coefficients = (0..count)
        .map(|m| integrate_weighted(f, 0.0, 1.0, |x| bc.eigenfunction(first + m, x).unwrap_or(0.0)))
        .collect();
    Ok(FourierProjection { bc, coefficients })
}

/// Dispatches on the spec's kind.
pub fn apply(spec: &InterpolantSpec, f: &(impl Field + ?Sized), bc: BoundaryCondition) -> Result<Observation> {
    Ok(match spec.kind {
        InterpolantKind::NodalValues { .. } => Observation::Constant(apply_nodal(spec, f)?),
        InterpolantKind::FiniteVolumes => Observation::Constant(apply_volumes(spec, f)?),
        InterpolantKind::FourierModes { .. } => Observation::Modes(apply_fourier(spec, f, bc)?),
    })
}

/// A smooth function with its derivative, for checking `‖φ - I_h φ‖ ≤ c_p h ‖φ‖₁`.
#[derive(Clone)]
pub struct SampleFunction {
    pub name: String,
    pub value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SampleFunction {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SampleFunction { name: name.into(), value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    /// `‖φ‖₁² = ‖φ‖² + ‖φ_x‖²`
    pub fn h1_norm(&self) -> f64 {
        let v = &self.value;
        let d = &self.derivative;
        composite(&GAUSS5, 0.0, 1.0, 2048, |x| v(x).powi(2) + d(x).powi(2)).sqrt()
    }
}

impl fmt::Debug for SampleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampleFunction").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationBoundReport {
    pub h: f64,
    /// `‖φ - I_h φ‖ / (h ‖φ‖₁)` per sample, 0 when `‖φ‖₁ = 0`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

impl InterpolationBoundReport {
    pub fn holds_with(&self, c_p: f64) -> bool {
        self.max_ratio <= c_p
    }
}

/// L² distance between `φ` and `I_h φ` by dense quadrature split at the
/// observation breakpoints.
pub fn interpolation_error(spec: &InterpolantSpec, phi: &SampleFunction, bc: BoundaryCondition) -> Result<f64> {
    let v = phi.value.clone();
    let f = move |x: f64| v(x);
    let obs = apply(spec, &f, bc)?;
    let sq = |x: f64| (f(x) - obs.value(x)).powi(2);
    let total = match spec.kind {
        InterpolantKind::FourierModes { .. } => composite(&GAUSS5, 0.0, 1.0, 2048, sq),
        _ => spec
            .intervals()
            .map(|(a, b)| {
                let pieces = ((b - a) * 2048.0).ceil().max(8.0) as usize;
                composite(&GAUSS5, a, b, pieces, sq)
            })
            .sum(),
    };
    Ok(total.sqrt())
}

/// Largest observed interpolation constant over `samples`.
pub fn verify_interpolation_bound(
    spec: &InterpolantSpec,
    samples: &[SampleFunction],
    h: f64,
    bc: BoundaryCondition,
) -> Result<InterpolationBoundReport> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no sample functions".into()));
    }
    let mut ratios = Vec::with_capacity(samples.len());
    for phi in samples {
        let err = interpolation_error(spec, phi, bc)?;
        let norm = phi.h1_norm();
        ratios.push(if norm > 0.0 { err / (h * norm) } else { 0.0 });
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(InterpolationBoundReport { h, ratios, max_ratio })
}

/// `∫_a^b φ_i dx` for every free hat function with support meeting `[a, b]`.
pub(crate) fn hat_integrals(mesh: &MeshPartition, bc: BoundaryCondition, a: f64, b: f64) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut push = |node: usize, v: f64| {
        if let Some(i) = mesh.free_index(bc, node) {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => out.push((i, v)),
            }
        }
    };
    let first = mesh.locate(a);
    for e in first..mesh.elements() {
        let (xl, xr) = mesh.element(e);
        if xl >= b {
            break;
        }
        let lo = xl.max(a);
        let hi = xr.min(b);
        if hi <= lo {
            continue;
        }
        // exact integrals of the two local linear shape functions over [lo, hi]
        let len = xr - xl;
        let tl = (lo - xl) / len;
        let th = (hi - xl) / len;
        let right = 0.5 * (th * th - tl * tl) * len;
        let left = (hi - lo) - right;
        push(e, left);
        push(e + 1, right);
    }
    out
}

/// Values of the free hat functions at `x`.
pub(crate) fn hat_values(mesh: &MeshPartition, bc: BoundaryCondition, x: f64) -> Vec<(usize, f64)> {
    let e = mesh.locate(x);
    let (xl, xr) = mesh.element(e);
    let t = (x - xl) / (xr - xl);
    [(e, 1.0 - t), (e + 1, t)]
        .into_iter()
        .filter(|&(_, v)| v != 0.0)
        .filter_map(|(node, v)| mesh.free_index(bc, node).map(|i| (i, v)))
        .collect()
}
