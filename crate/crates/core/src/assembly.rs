//! Galerkin matrices and nonlinear terms over the free degrees of freedom.
//!
//! Coefficients (`ν`, `γ`, `δ`, `μ`) are never baked in: the stepper scales
//! and combines these objects, so one assembly serves a parameter sweep.

use std::collections::BTreeMap;

use crate::interpolants::{hat_integrals, hat_values, InterpolantKind, InterpolantSpec};
use crate::mesh::{FemFunction, MeshPartition};
use crate::model::BoundaryCondition;
use crate::quadrature::{GAUSS3, GAUSS5};
use crate::{Error, Result};

pub use crate::linalg::{SparseMatrix, TridiagonalMatrix};

fn restrict(full: TridiagonalMatrix, mesh: &MeshPartition, bc: BoundaryCondition) -> TridiagonalMatrix {
    let off = MeshPartition::dof_offset(bc);
    let n = mesh.free_count(bc);
    TridiagonalMatrix {
        diag: full.diag[off..off + n].to_vec(),
        sub: full.sub[off..off + n - 1].to_vec(),
        sup: full.sup[off..off + n - 1].to_vec(),
    }
}

fn assemble_elementwise(mesh: &MeshPartition, bc: BoundaryCondition, local: impl Fn(f64) -> [[f64; 2]; 2]) -> TridiagonalMatrix {
    let mut full = TridiagonalMatrix::zeros(mesh.node_count());
    for (e, &h) in mesh.element_lengths().iter().enumerate() {
        let k = local(h);
        full.diag[e] += k[0][0];
        full.diag[e + 1] += k[1][1];
        full.sup[e] += k[0][1];
        full.sub[e] += k[1][0];
    }
    restrict(full, mesh, bc)
}

/// `M_ij = ∫ φ_i φ_j`
pub fn mass_matrix(mesh: &MeshPartition, bc: BoundaryCondition) -> TridiagonalMatrix {
    assemble_elementwise(mesh, bc, |h| [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]])
}

/// `A_ij = ∫ φ_i' φ_j'`
pub fn stiffness_matrix(mesh: &MeshPartition, bc: BoundaryCondition) -> TridiagonalMatrix {
    assemble_elementwise(mesh, bc, |h| [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]])
}

/// Local endpoint values of `y` on element `e`.
fn local_values(y: &FemFunction, e: usize) -> (f64, f64) {
    (y.node_value(e), y.node_value(e + 1))
}

fn scatter(out: &mut [f64], mesh: &MeshPartition, bc: BoundaryCondition, node: usize, v: f64) {
    if let Some(i) = mesh.free_index(bc, node) {
        out[i] += v;
    }
}

/// `(y³, φ_i)` for every free node, by 3-point Gauss per element (exact).
pub fn cubic_term(y: &FemFunction) -> Vec<f64> {
    let mesh = y.mesh();
    let bc = y.bc();
    let mut out = vec![0.0; mesh.free_count(bc)];
    for e in 0..mesh.elements() {
        let (yl, yr) = local_values(y, e);
        if yl == 0.0 && yr == 0.0 {
            continue;
        }
        let h = mesh.element_lengths()[e];
        let (mut left, mut right) = (0.0, 0.0);
        for (t, w) in GAUSS3.mapped(0.0, 1.0) {
            let v = yl + (yr - yl) * t;
            let c = w * h * v * v * v;
            left += c * (1.0 - t);
            right += c * t;
        }
        scatter(&mut out, mesh, bc, e, left);
        scatter(&mut out, mesh, bc, e + 1, right);
    }
    out
}

/// `J_ij = 3 (y² φ_j, φ_i)`, the derivative of [`cubic_term`].
pub fn cubic_jacobian(y: &FemFunction) -> TridiagonalMatrix {
    let mesh = y.mesh();
    let bc = y.bc();
    let mut full = TridiagonalMatrix::zeros(mesh.node_count());
    for e in 0..mesh.elements() {
        let (yl, yr) = local_values(y, e);
        if yl == 0.0 && yr == 0.0 {
            continue;
        }
        let h = mesh.element_lengths()[e];
        let (mut ll, mut lr, mut rr) = (0.0, 0.0, 0.0);
        for (t, w) in GAUSS3.mapped(0.0, 1.0) {
            let v = yl + (yr - yl) * t;
            let c = 3.0 * w * h * v * v;
            ll += c * (1.0 - t) * (1.0 - t);
            lr += c * (1.0 - t) * t;
            rr += c * t * t;
        }
        full.diag[e] += ll;
        full.diag[e + 1] += rr;
        full.sup[e] += lr;
        full.sub[e] += lr;
    }
    restrict(full, mesh, bc)
}

/// The feedback coupling `B_ij = (I_h φ_j, φ_i)` in the form best suited
/// to solving with it.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackOperator {
    /// Piecewise-constant observation on intervals aligned with the mesh:
    /// a banded sparse matrix.
    Banded(SparseMatrix),
    /// Fourier projection: `B = Σ_m b_m b_mᵀ` with `b_m,i = (e_m, φ_i)`.
    LowRank { dim: usize, vectors: Vec<Vec<f64>> },
}

impl FeedbackOperator {
    pub fn dim(&self) -> usize {
        match self {
            FeedbackOperator::Banded(m) => m.dim(),
            FeedbackOperator::LowRank { dim, .. } => *dim,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeedbackOperator::Banded(m) => m.mul_vec(x),
            FeedbackOperator::LowRank { dim, vectors } => {
                let mut y = vec![0.0; *dim];
                for b in vectors {
                    let s: f64 = b.iter().zip(x).map(|(p, q)| p * q).sum();
                    for (yi, bi) in y.iter_mut().zip(b) {
                        *yi += s * bi;
                    }
                }
                y
            }
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        match self {
            FeedbackOperator::Banded(m) => m.clone(),
            FeedbackOperator::LowRank { dim, vectors } => {
                let mut entries = BTreeMap::new();
                for b in vectors {
                    for (i, bi) in b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                        for (j, bj) in b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                            *entries.entry((i, j)).or_insert(0.0) += bi * bj;
                        }
                    }
                }
                SparseMatrix::from_map(*dim, &entries)
            }
        }
    }
}

fn check_alignment(spec: &InterpolantSpec, mesh: &MeshPartition) -> Result<()> {
    let tol = 1e-12;
    for &p in spec.partition() {
        if mesh.node_index(p, tol).is_none() {
            return Err(Error::IncompatiblePartition(format!("observation breakpoint {p} is not a mesh node")));
        }
    }
    Ok(())
}

/// Assembles the feedback operator for `spec` on `(mesh, bc)`.
///
/// Piecewise-constant observation partitions must be made of mesh nodes.
pub fn feedback_operator(spec: &InterpolantSpec, mesh: &MeshPartition, bc: BoundaryCondition) -> Result<FeedbackOperator> {
    let dim = mesh.free_count(bc);
    match spec.kind() {
        InterpolantKind::FourierModes { count } => {
            let first = bc.first_mode();
            let vectors = (0..count)
                .map(|m| {
                    let mut b = vec![0.0; dim];
                    for e in 0..mesh.elements() {
                        let (xl, xr) = mesh.element(e);
                        let (mut left, mut right) = (0.0, 0.0);
                        for (x, w) in GAUSS5.mapped(xl, xr) {
                            let t = (x - xl) / (xr - xl);
                            let em = bc.eigenfunction(first + m, x).unwrap_or(0.0);
                            left += w * em * (1.0 - t);
                            right += w * em * t;
                        }
                        scatter(&mut b, mesh, bc, e, left);
                        scatter(&mut b, mesh, bc, e + 1, right);
                    }
                    b
                })
                .collect();
            Ok(FeedbackOperator::LowRank { dim, vectors })
        }
        kind => {
            check_alignment(spec, mesh)?;
            let mut entries = BTreeMap::new();
            for (a, b) in spec.intervals() {
                let tests = hat_integrals(mesh, bc, a, b);
                let weights = match kind {
                    InterpolantKind::NodalValues { rule } => hat_values(mesh, bc, rule.point(a, b)),
                    _ => tests.iter().map(|&(j, v)| (j, v / (b - a))).collect(),
                };
                for &(i, ti) in &tests {
                    for &(j, wj) in &weights {
                        *entries.entry((i, j)).or_insert(0.0) += ti * wj;
                    }
                }
            }
            Ok(FeedbackOperator::Banded(SparseMatrix::from_map(dim, &entries)))
        }
    }
}

/// `B_ij = (I_h φ_j, φ_i)` as an explicit sparse matrix.
pub fn feedback_matrix(spec: &InterpolantSpec, mesh: &MeshPartition, bc: BoundaryCondition) -> Result<SparseMatrix> {
    Ok(feedback_operator(spec, mesh, bc)?.to_sparse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolants::{apply, uniform_breakpoints, SampleRule};
    use crate::mesh::{uniform_partition, Field};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn mesh(n: usize) -> Arc<MeshPartition> {
        Arc::new(uniform_partition(n).unwrap())
    }

    fn random_fn(m: &Arc<MeshPartition>, bc: BoundaryCondition, rng: &mut ChaCha8Rng) -> FemFunction {
        let c = (0..m.free_count(bc)).map(|_| rng.gen_range(-1.5..1.5)).collect();
        FemFunction::new(m.clone(), bc, c).unwrap()
    }

    /// Composite Simpson on `[0, 1]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let w = |k: usize| if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        (0..=n).map(|k| w(k) * f(k as f64 * h)).sum::<f64>() * h / 3.0
    }

    fn midpoint(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        (0..n).map(|k| f((k as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn mass_entries() {
        let m = mass_matrix(&uniform_partition(4).unwrap(), BoundaryCondition::Mixed);
        assert_relative_eq!(m.diag[1], 2.0 / 12.0, epsilon = 1e-15);
        assert_relative_eq!(m.sub[1], 1.0 / 24.0, epsilon = 1e-15);
        assert_relative_eq!(*m.diag.last().unwrap(), 1.0 / 12.0, epsilon = 1e-15);
        assert!(m.is_symmetric());

        let full = mass_matrix(&uniform_partition(7).unwrap(), BoundaryCondition::Neumann);
        let ones = vec![1.0; full.dim()];
        let total: f64 = full.mul_vec(&ones).iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn mass_spd() {
        for bc in [BoundaryCondition::Mixed, BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let m = mass_matrix(&uniform_partition(8).unwrap(), bc).to_dense();
            let eig = m.symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "{bc}: {}", eig.min());
        }
    }

    #[test]
    fn stiffness_entries_and_kernel() {
        let a = stiffness_matrix(&uniform_partition(4).unwrap(), BoundaryCondition::Mixed);
        assert_relative_eq!(a.diag[1], 8.0, epsilon = 1e-12);
        assert_relative_eq!(a.sup[1], -4.0, epsilon = 1e-12);
        assert_relative_eq!(*a.diag.last().unwrap(), 4.0, epsilon = 1e-12);

        let an = stiffness_matrix(&uniform_partition(9).unwrap(), BoundaryCondition::Neumann);
        assert!(an.mul_vec(&vec![1.0; an.dim()]).iter().all(|v| v.abs() < 1e-12));

        let m8 = uniform_partition(8).unwrap();
        for bc in [BoundaryCondition::Mixed, BoundaryCondition::Dirichlet] {
            let eig = stiffness_matrix(&m8, bc).to_dense().symmetric_eigenvalues();
            assert!(eig.min() > 0.0);
        }
        let eig = stiffness_matrix(&m8, BoundaryCondition::Neumann).to_dense().symmetric_eigenvalues();
        let mut sorted: Vec<f64> = eig.iter().cloned().collect();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[0].abs() < 1e-12 && sorted[1] > 1e-3);
    }

    #[test]
    fn cubic_term_cases() {
        let m = mesh(6);
        let z = FemFunction::zero(m.clone(), BoundaryCondition::Neumann);
        assert!(cubic_term(&z).iter().all(|&v| v == 0.0));

        let c = 1.3;
        let f = FemFunction::from_nodal(m.clone(), BoundaryCondition::Neumann, |_| c);
        let mass = mass_matrix(&m, BoundaryCondition::Neumann);
        let hat_integrals = mass.mul_vec(&vec![1.0; mass.dim()]);
        for (v, w) in cubic_term(&f).iter().zip(&hat_integrals) {
            assert_relative_eq!(*v, c * c * c * w, epsilon = 1e-14);
        }
    }

    /// Oracle: 10⁵-panel Simpson rule of `hat³ φ_i`.
    #[test]
    fn cubic_term_of_hat() {
        let m = mesh(4);
        let bc = BoundaryCondition::Mixed;
        let hat = FemFunction::hat(m.clone(), bc, 2);
        let got = cubic_term(&hat);
        for node in 1..=4 {
            let phi = FemFunction::hat(m.clone(), bc, node);
            let oracle = simpson(|x| hat.value(x).powi(3) * phi.value(x), 100_000);
            assert!((got[node - 1] - oracle).abs() < 1e-10, "node {node}: {} vs {oracle}", got[node - 1]);
        }
        assert_relative_eq!(got[1], 2.0 * 0.25 / 5.0, epsilon = 1e-14);
    }

    #[test]
    fn cubic_scaling() {
        let m = mesh(10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_fn(&m, BoundaryCondition::Mixed, &mut rng);
        for (a, b) in cubic_term(&y.scaled(2.0)).iter().zip(cubic_term(&y)) {
            assert!((a - 8.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = mesh(16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bc in [BoundaryCondition::Mixed, BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
            for _ in 0..20 {
                let y = random_fn(&m, bc, &mut rng);
                let jac = cubic_jacobian(&y);
                assert!(jac.is_symmetric());
                let eps = 1e-6;
                for j in 0..y.coeffs().len() {
                    let mut plus = y.clone();
                    plus.coeffs_mut()[j] += eps;
                    let mut minus = y.clone();
                    minus.coeffs_mut()[j] -= eps;
                    let fp = cubic_term(&plus);
                    let fm = cubic_term(&minus);
                    for i in 0..y.coeffs().len() {
                        let fd = (fp[i] - fm[i]) / (2.0 * eps);
                        let an = jac.get(i, j);
                        let scale = an.abs().max(1e-3);
                        assert!((fd - an).abs() / scale < 1e-6, "({i},{j}) {fd} vs {an}");
                    }
                }
            }
        }
        let z = FemFunction::zero(m, BoundaryCondition::Mixed);
        assert!(cubic_jacobian(&z).diag.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn assembly_is_deterministic() {
        let m = mesh(33);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = random_fn(&m, BoundaryCondition::Mixed, &mut rng);
        assert_eq!(cubic_term(&y), cubic_term(&y));
        assert_eq!(cubic_jacobian(&y), cubic_jacobian(&y));
        let spec = InterpolantSpec::finite_volumes(uniform_breakpoints(11)).unwrap();
        assert_eq!(
            feedback_matrix(&spec, &m, BoundaryCondition::Mixed).unwrap(),
            feedback_matrix(&spec, &m, BoundaryCondition::Mixed).unwrap()
        );
    }

    #[test]
    fn feedback_reproduces_constants() {
        let m = mesh(8);
        let bc = BoundaryCondition::Neumann;
        let spec = InterpolantSpec::on_mesh(InterpolantKind::NodalValues { rule: SampleRule::Midpoint }, &m).unwrap();
        let b = feedback_matrix(&spec, &m, bc).unwrap();
        let c = 0.75;
        let mass = mass_matrix(&m, bc);
        let ints = mass.mul_vec(&vec![1.0; mass.dim()]);
        for (v, w) in b.mul_vec(&vec![c; b.dim()]).iter().zip(&ints) {
            assert_relative_eq!(*v, c * w, epsilon = 1e-14);
        }
    }

    /// Oracle: dense midpoint sum of `(I_h y_h, φ_i)` with the interpolant
    /// applied independently through the interpolants module. Sample cells
    /// align with every breakpoint, so jumps cost no accuracy.
    #[test]
    fn feedback_identity_against_dense_sampling() {
        let m = mesh(8);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let specs = vec![
            InterpolantSpec::on_mesh(InterpolantKind::NodalValues { rule: SampleRule::Midpoint }, &m).unwrap(),
            InterpolantSpec::nodal_values(SampleRule::Left, uniform_breakpoints(4)).unwrap(),
            InterpolantSpec::nodal_values(SampleRule::Right, uniform_breakpoints(2)).unwrap(),
            InterpolantSpec::finite_volumes(uniform_breakpoints(4)).unwrap(),
            InterpolantSpec::on_mesh(InterpolantKind::FiniteVolumes, &m).unwrap(),
            InterpolantSpec::fourier_modes(3),
        ];
        for bc in [BoundaryCondition::Mixed, BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
            for spec in &specs {
                let y = random_fn(&m, bc, &mut rng);
                let obs = apply(spec, &y, bc).unwrap();
                let got = feedback_operator(spec, &m, bc).unwrap().mul_vec(y.coeffs());
                for node in 0..m.node_count() {
                    let Some(i) = m.free_index(bc, node) else { continue };
                    let phi = FemFunction::hat(m.clone(), bc, node);
                    let oracle = midpoint(|x| obs.value(x) * phi.value(x), 200_000);
                    assert!((got[i] - oracle).abs() < 1e-9, "{:?} {bc} node {node}: {} vs {oracle}", spec.kind(), got[i]);
                }
            }
        }
    }

    #[test]
    fn empty_fourier_is_zero() {
        let m = mesh(8);
        let b = feedback_matrix(&InterpolantSpec::fourier_modes(0), &m, BoundaryCondition::Mixed).unwrap();
        assert_eq!(b.nnz(), 0);
    }

    #[test]
    fn misaligned_partition_rejected() {
        let m = mesh(10);
        let spec = InterpolantSpec::finite_volumes(uniform_breakpoints(3)).unwrap();
        assert!(matches!(
            feedback_matrix(&spec, &m, BoundaryCondition::Mixed),
            Err(Error::IncompatiblePartition(_))
        ));
    }
}
