//! Small structured linear algebra: tridiagonal and banded matrices with
//! direct (unpivoted) LU, a row-indexed sparse matrix, and a banded system
//! with a dense low-rank correction solved through the Woodbury identity.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tridiagonal matrix stored by diagonals. `sub[i]` is entry `(i+1, i)`,
/// `sup[i]` is entry `(i, i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn zeros(n: usize) -> Self {
        TridiagonalMatrix { sub: vec![0.0; n.saturating_sub(1)], diag: vec![0.0; n], sup: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.sub[j]
        } else if j == i + 1 {
            self.sup[i]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(i, j)`; `|i - j| <= 1`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.diag[i] += v;
        } else if i == j + 1 {
            self.sub[j] += v;
        } else if j == i + 1 {
            self.sup[i] += v;
        } else {
            panic!("entry ({i}, {j}) outside the tridiagonal band");
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `self + s * other`
    pub fn axpy(&mut self, s: f64, other: &TridiagonalMatrix) {
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += s * b;
        }
        for (a, b) in self.sub.iter_mut().zip(&other.sub) {
            *a += s * b;
        }
        for (a, b) in self.sup.iter_mut().zip(&other.sup) {
            *a += s * b;
        }
    }

    /// Thomas algorithm.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: rhs.len() });
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if piv == 0.0 {
            return Err(Error::SingularMatrix(0));
        }
        if n > 1 {
            c[0] = self.sup[0] / piv;
        }
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.sub[i - 1] * c[i - 1];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::SingularMatrix(i));
            }
            if i + 1 < n {
                c[i] = self.sup[i] / piv;
            }
            d[i] = (rhs[i] - self.sub[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }
}

/// Row-indexed sparse matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        SparseMatrix { n, rows: vec![Vec::new(); n] }
    }

    /// Builds from accumulated entries; duplicates are summed.
    pub fn from_map(n: usize, entries: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut rows = vec![Vec::new(); n];
        for (&(i, j), &v) in entries {
            if v != 0.0 {
                rows[i].push((j, v));
            }
        }
        SparseMatrix { n, rows }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+ku
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    pub fn add_tridiagonal(&mut self, s: f64, t: &TridiagonalMatrix) {
        for i in 0..self.n {
            self.add(i, i, s * t.diag[i]);
            if i + 1 < self.n {
                self.add(i + 1, i, s * t.sub[i]);
                self.add(i, i + 1, s * t.sup[i]);
            }
        }
    }

    pub fn add_sparse(&mut self, s: f64, m: &SparseMatrix) {
        for i in 0..self.n {
            for &(j, v) in m.row(i) {
                self.add(i, j, s * v);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU without pivoting; the fill stays inside the band.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        for k in 0..n {
            let piv = self.get(k, k);
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::SingularMatrix(k));
            }
            let rmax = (k + self.kl).min(n - 1);
            let cmax = (k + self.ku).min(n - 1);
            for i in k + 1..=rmax {
                let s = self.slot(i, k).unwrap();
                let l = self.data[s] / piv;
                self.data[s] = l;
                if l != 0.0 {
                    for j in k + 1..=cmax {
                        let u = self.get(k, j);
                        let t = self.slot(i, j).unwrap();
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { band: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    band: BandMatrix,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = &self.band;
        let n = b.n;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b.kl);
            let s: f64 = (lo..i).map(|j| b.get(i, j) * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + b.ku).min(n - 1);
            let s: f64 = (i + 1..=hi).map(|j| b.get(i, j) * x[j]).sum();
            x[i] = (x[i] - s) / b.get(i, i);
        }
        x
    }
}

/// `band + Σ_r left_r right_rᵀ` with a handful of dense rank-one terms.
#[derive(Debug, Clone)]
pub struct LowRankSystem {
    pub band: BandMatrix,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl LowRankSystem {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.band.mul_vec(x);
        for (u, v) in self.left.iter().zip(&self.right) {
            let s = dot(v, x);
            for (yi, ui) in y.iter_mut().zip(u) {
                *yi += s * ui;
            }
        }
        y
    }

    /// Woodbury: `(B + U Vᵀ)⁻¹ r = z - Z (I + Vᵀ Z)⁻¹ Vᵀ z` with
    /// `z = B⁻¹ r` and `Z = B⁻¹ U`.
    pub fn solve(self, rhs: &[f64]) -> Result<Vec<f64>> {
        let LowRankSystem { band, left, right } = self;
        let lu = band.factor()?;
        let z = lu.solve(rhs);
        if left.is_empty() {
            return Ok(z);
        }
        let r = left.len();
        let zs: Vec<Vec<f64>> = left.iter().map(|u| lu.solve(u)).collect();
        let cap = DMatrix::from_fn(r, r, |a, b| f64::from(u8::from(a == b)) + dot(&right[a], &zs[b]));
        let vz = DVector::from_iterator(r, right.iter().map(|v| dot(v, &z)));
        let w = cap.lu().solve(&vz).ok_or(Error::SingularMatrix(0))?;
        let mut x = z;
        for (b, zb) in zs.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(zb) {
                *xi -= w[b] * zi;
            }
        }
        Ok(x)
    }
}
