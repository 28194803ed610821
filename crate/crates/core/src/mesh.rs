//! One-dimensional partitions of `[0, 1]` and the continuous piecewise-linear
//! finite-element space over them.
//!
//! Degrees of freedom are the nodal values at the *free* nodes, i.e. the
//! nodes not pinned to zero by a Dirichlet-type condition:
//!
//! ```text
//! Mixed      nodes 1..=N
//! Dirichlet  nodes 1..N
//! Neumann    nodes 0..=N
//! ```
//!
//! Free nodes always form a contiguous range, so a free index `i` maps to
//! node `i + offset`.

use std::sync::Arc;

use crate::assembly::mass_matrix;
use crate::model::BoundaryCondition;
use crate::quadrature::{composite, GAUSS3, GAUSS5};
use crate::{Error, Result};

/// Strictly increasing nodes `0 = x_0 < x_1 < ... < x_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPartition {
    nodes: Vec<f64>,
    element_lengths: Vec<f64>,
    h: f64,
}

impl MeshPartition {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::MeshTooCoarse(nodes.len().saturating_sub(1)));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::InvalidMesh("first node must be 0 and last node 1".into()));
        }
        let element_lengths: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if element_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidMesh("nodes must be strictly increasing".into()));
        }
        let h = element_lengths.iter().cloned().fold(0.0, f64::max);
        Ok(MeshPartition { nodes, element_lengths, h })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_lengths(&self) -> &[f64] {
        &self.element_lengths
    }

    /// Largest element length.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of elements `N`.
    pub fn elements(&self) -> usize {
        self.element_lengths.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Element containing `x`; points on a shared node go to the element
    /// on their right, except `x = 1`.
    pub fn locate(&self, x: f64) -> usize {
        let idx = self.nodes.partition_point(|&n| n <= x);
        idx.saturating_sub(1).min(self.elements() - 1)
    }

    /// Index of the node equal to `x` up to `tol`, if any.
    pub fn node_index(&self, x: f64, tol: f64) -> Option<usize> {
        let e = self.locate(x);
        [e, e + 1].into_iter().find(|&j| (self.nodes[j] - x).abs() <= tol)
    }

    pub fn dof_offset(bc: BoundaryCondition) -> usize {
        match bc {
            BoundaryCondition::Neumann => 0,
            BoundaryCondition::Mixed | BoundaryCondition::Dirichlet => 1,
        }
    }

    pub fn free_count(&self, bc: BoundaryCondition) -> usize {
        match bc {
            BoundaryCondition::Mixed => self.elements(),
            BoundaryCondition::Dirichlet => self.elements() - 1,
            BoundaryCondition::Neumann => self.elements() + 1,
        }
    }

    /// Free index of node `j`, or `None` for a constrained node.
    pub fn free_index(&self, bc: BoundaryCondition, node: usize) -> Option<usize> {
        let off = Self::dof_offset(bc);
        (node >= off && node - off < self.free_count(bc)).then(|| node - off)
    }
}

/// Uniform partition `x_j = j / N`.
pub fn uniform_partition(n: usize) -> Result<MeshPartition> {
    if n < 2 {
        return Err(Error::MeshTooCoarse(n));
    }
    let mut nodes: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    nodes[n] = 1.0;
    MeshPartition::from_nodes(nodes)
}

/// Anything that can be sampled on `[0, 1]` and integrated.
///
/// Implementors with kinks (piecewise polynomials) report their breakpoints
/// so integrals can be split exactly there.
pub trait Field {
    fn value(&self, x: f64) -> f64;

    fn breakpoints(&self) -> Option<&[f64]> {
        None
    }
}

impl<F: Fn(f64) -> f64> Field for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// `∫_a^b f dx`. Piecewise fields are split at their breakpoints and each
/// piece integrated with 5-point Gauss (exact for P1 times a quartic);
/// smooth fields use a composite 5-point rule.
pub fn integrate(f: &(impl Field + ?Sized), a: f64, b: f64) -> f64 {
    integrate_weighted(f, a, b, |_| 1.0)
}

/// `∫_a^b f w dx` for a smooth weight `w` of low degree.
pub fn integrate_weighted(f: &(impl Field + ?Sized), a: f64, b: f64, w: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    match f.breakpoints() {
        Some(bps) => {
            let mut total = 0.0;
            let mut lo = a;
            let start = bps.partition_point(|&p| p <= a);
            for &p in bps[start..].iter().take_while(|&&p| p < b) {
                total += GAUSS5.integrate(lo, p, |x| f.value(x) * w(x));
                lo = p;
            }
            total + GAUSS5.integrate(lo, b, |x| f.value(x) * w(x))
        }
        None => {
            let pieces = ((b - a) * 256.0).ceil().max(1.0) as usize;
            composite(&GAUSS5, a, b, pieces, |x| f.value(x) * w(x))
        }
    }
}

/// A member of the P1 space on `mesh` honoring `bc`.
#[derive(Debug, Clone, PartialEq)]
pub struct FemFunction {
    mesh: Arc<MeshPartition>,
    bc: BoundaryCondition,
    coeffs: Vec<f64>,
}

impl FemFunction {
    pub fn new(mesh: Arc<MeshPartition>, bc: BoundaryCondition, coeffs: Vec<f64>) -> Result<Self> {
        let expected = mesh.free_count(bc);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: coeffs.len() });
        }
        Ok(FemFunction { mesh, bc, coeffs })
    }

    pub fn zero(mesh: Arc<MeshPartition>, bc: BoundaryCondition) -> Self {
        let n = mesh.free_count(bc);
        FemFunction { mesh, bc, coeffs: vec![0.0; n] }
    }

    /// Nodal interpolant of `f`; constrained nodes are set to zero.
    pub fn from_nodal(mesh: Arc<MeshPartition>, bc: BoundaryCondition, f: impl Fn(f64) -> f64) -> Self {
        let off = MeshPartition::dof_offset(bc);
        let coeffs = (0..mesh.free_count(bc)).map(|i| f(mesh.nodes()[i + off])).collect();
        FemFunction { mesh, bc, coeffs }
    }

    /// Hat function of node `node` (zero if the node is constrained).
    pub fn hat(mesh: Arc<MeshPartition>, bc: BoundaryCondition, node: usize) -> Self {
        let mut f = Self::zero(mesh, bc);
        if let Some(i) = f.mesh.free_index(bc, node) {
            f.coeffs[i] = 1.0;
        }
        f
    }

    pub fn mesh(&self) -> &Arc<MeshPartition> {
        &self.mesh
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.mesh.clone(), self.bc, coeffs)
    }

    /// Value at node `j`, including constrained zeros.
    pub fn node_value(&self, node: usize) -> f64 {
        self.mesh.free_index(self.bc, node).map_or(0.0, |i| self.coeffs[i])
    }

    /// Values at all `N + 1` nodes.
    pub fn nodal_values(&self) -> Vec<f64> {
        (0..self.mesh.node_count()).map(|j| self.node_value(j)).collect()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.value_unchecked(x))
    }

    fn value_unchecked(&self, x: f64) -> f64 {
        let e = self.mesh.locate(x);
        let (a, b) = self.mesh.element(e);
        let t = (x - a) / (b - a);
        (1.0 - t) * self.node_value(e) + t * self.node_value(e + 1)
    }

    pub fn scaled(&self, s: f64) -> Self {
        FemFunction { mesh: self.mesh.clone(), bc: self.bc, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// `self - other` on the same mesh.
    pub fn difference(&self, other: &FemFunction) -> Result<Self> {
        if self.coeffs.len() != other.coeffs.len() || self.bc != other.bc {
            return Err(Error::DimensionMismatch { expected: self.coeffs.len(), actual: other.coeffs.len() });
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(FemFunction { mesh: self.mesh.clone(), bc: self.bc, coeffs })
    }
}

impl Field for FemFunction {
    fn value(&self, x: f64) -> f64 {
        self.value_unchecked(x.clamp(0.0, 1.0))
    }

    fn breakpoints(&self) -> Option<&[f64]> {
        Some(self.mesh.nodes())
    }
}

/// Largest violation of the homogeneous Dirichlet data of `bc` by `y0`.
pub fn compatibility_defect(y0: &dyn Fn(f64) -> f64, bc: BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::Mixed => y0(0.0).abs(),
        BoundaryCondition::Dirichlet => y0(0.0).abs().max(y0(1.0).abs()),
        BoundaryCondition::Neumann => 0.0,
    }
}

/// Tolerance above which [`project_initial`] warns about incompatible data.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// L² projection of `y0` onto the P1 space: solves `M c = (y0, φ_i)` with
/// the load integrated by 3-point Gauss per element.
pub fn project_initial(y0: &dyn Fn(f64) -> f64, mesh: &Arc<MeshPartition>, bc: BoundaryCondition) -> Result<FemFunction> {
    let defect = compatibility_defect(y0, bc);
    if defect > COMPATIBILITY_TOL {
        log::warn!("initial data violates the {bc} boundary values by {defect:e}; projecting anyway");
    }
    let load = load_vector(y0, mesh, bc);
    let coeffs = mass_matrix(mesh, bc).solve(&load)?;
    FemFunction::new(mesh.clone(), bc, coeffs)
}

/// `(f, φ_i)` for every free node.
pub fn load_vector(f: &dyn Fn(f64) -> f64, mesh: &MeshPartition, bc: BoundaryCondition) -> Vec<f64> {
    let mut load = vec![0.0; mesh.free_count(bc)];
    for e in 0..mesh.elements() {
        let (a, b) = mesh.element(e);
        let mut left = 0.0;
        let mut right = 0.0;
        for (x, w) in GAUSS3.mapped(a, b) {
            let t = (x - a) / (b - a);
            let fx = f(x);
            left += w * fx * (1.0 - t);
            right += w * fx * t;
        }
        if let Some(i) = mesh.free_index(bc, e) {
            load[i] += left;
        }
        if let Some(i) = mesh.free_index(bc, e + 1) {
            load[i] += right;
        }
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mesh(n: usize) -> Arc<MeshPartition> {
        Arc::new(uniform_partition(n).unwrap())
    }

    #[test]
    fn uniform_partitions() {
        let m = uniform_partition(10).unwrap();
        assert_eq!(m.node_count(), 11);
        assert_relative_eq!(m.h(), 0.1, epsilon = 1e-15);
        let m = uniform_partition(1280).unwrap();
        assert_relative_eq!(m.h(), 1.0 / 1280.0, epsilon = 1e-15);
        assert_eq!(uniform_partition(2).unwrap().nodes(), &[0.0, 0.5, 1.0]);
        assert!(matches!(uniform_partition(1), Err(Error::MeshTooCoarse(1))));
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(MeshPartition::from_nodes(vec![0.0, 0.6, 0.5, 1.0]).is_err());
        assert!(MeshPartition::from_nodes(vec![0.1, 0.5, 1.0]).is_err());
        let m = MeshPartition::from_nodes(vec![0.0, 0.1, 0.5, 1.0]).unwrap();
        assert_relative_eq!(m.h(), 0.5);
    }

    #[test]
    fn free_dofs() {
        let m = mesh(4);
        assert_eq!(m.free_count(BoundaryCondition::Mixed), 4);
        assert_eq!(m.free_count(BoundaryCondition::Dirichlet), 3);
        assert_eq!(m.free_count(BoundaryCondition::Neumann), 5);
        assert_eq!(m.free_index(BoundaryCondition::Mixed, 0), None);
        assert_eq!(m.free_index(BoundaryCondition::Mixed, 4), Some(3));
        assert_eq!(m.free_index(BoundaryCondition::Dirichlet, 4), None);
    }

    #[test]
    fn eval_cases() {
        let f = FemFunction::zero(mesh(5), BoundaryCondition::Mixed);
        assert_eq!(f.eval(0.37).unwrap(), 0.0);

        let f = FemFunction::new(mesh(2), BoundaryCondition::Mixed, vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(f.eval(0.25).unwrap(), 0.5);
        assert!(matches!(f.eval(1.5), Err(Error::OutOfDomain(_))));

        let m = mesh(8);
        let hat = FemFunction::hat(m.clone(), BoundaryCondition::Neumann, 3);
        assert_eq!(hat.eval(m.nodes()[3]).unwrap(), 1.0);
        assert_eq!(hat.eval(m.nodes()[2]).unwrap(), 0.0);
        assert_eq!(hat.eval(m.nodes()[4]).unwrap(), 0.0);
    }

    #[test]
    fn projection_of_zero_and_hat() {
        let m = mesh(10);
        let p = project_initial(&|_| 0.0, &m, BoundaryCondition::Mixed).unwrap();
        assert!(p.coeffs().iter().all(|&c| c == 0.0));

        let hat = FemFunction::hat(m.clone(), BoundaryCondition::Mixed, 4);
        let p = project_initial(&|x| hat.value(x), &m, BoundaryCondition::Mixed).unwrap();
        for (i, c) in p.coeffs().iter().enumerate() {
            let expected = if i == 3 { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-12, "coeff {i} = {c}");
        }
    }

    /// Oracle: minimize ∫(y0 - Σ c_i φ_i)² with dense midpoint sampling,
    /// solving the normal equations with a dense solver.
    #[test]
    fn projection_matches_least_squares() {
        let m = mesh(10);
        let bc = BoundaryCondition::Mixed;
        let y0 = |x: f64| x * (1.0 - x);
        let n = m.free_count(bc);
        let samples = 200_000;
        let dx = 1.0 / samples as f64;
        let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        let hats: Vec<FemFunction> = (1..=10).map(|j| FemFunction::hat(m.clone(), bc, j)).collect();
        for s in 0..samples {
            let x = (s as f64 + 0.5) * dx;
            let e = m.locate(x);
            // only two hats are nonzero at x
            for a in [e, e + 1].into_iter().filter_map(|j| m.free_index(bc, j)) {
                let pa = hats[a].value(x);
                rhs[a] += pa * y0(x) * dx;
                for b in [e, e + 1].into_iter().filter_map(|j| m.free_index(bc, j)) {
                    gram[(a, b)] += pa * hats[b].value(x) * dx;
                }
            }
        }
        let oracle = gram.lu().solve(&rhs).unwrap();
        let p = project_initial(&y0, &m, bc).unwrap();
        for i in 0..n {
            assert!((p.coeffs()[i] - oracle[i]).abs() < 1e-8, "{i}: {} vs {}", p.coeffs()[i], oracle[i]);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let m = mesh(16);
        for bc in [BoundaryCondition::Mixed, BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let f = FemFunction::from_nodal(m.clone(), bc, |x| (3.0 * x).sin() + x * x);
            let p = project_initial(&|x| f.value(x), &m, bc).unwrap();
            for (a, b) in p.coeffs().iter().zip(f.coeffs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_error_is_second_order() {
        let y0 = |x: f64| (std::f64::consts::PI * x / 2.0).sin();
        let errs: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| {
                let m = mesh(n);
                let p = project_initial(&y0, &m, BoundaryCondition::Mixed).unwrap();
                composite(&GAUSS5, 0.0, 1.0, 4096, |x| (y0(x) - p.value(x)).powi(2)).sqrt()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.95, "{errs:?}");
        }
    }

    #[test]
    fn integrate_splits_at_kinks() {
        let m = mesh(3);
        let hat = FemFunction::hat(m.clone(), BoundaryCondition::Neumann, 1);
        assert_relative_eq!(integrate(&hat, 0.0, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(integrate(&hat, 0.1, 0.2), 0.5 * 0.1 * (0.3 + 0.6), epsilon = 1e-15);
        assert_relative_eq!(integrate(&|x: f64| x * x, 0.0, 1.0), 1.0 / 3.0, epsilon = 1e-15);
    }
}
