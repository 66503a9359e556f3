//! Small dense symmetric matrices and a cyclic Jacobi eigensolver.

use crate::error::{Error, Result};

/// Dense symmetric matrix stored row-major. Constructors symmetrize their input.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = *d;
        }
        m
    }

    /// Builds from `f(i, j)` and symmetrizes as (A + Aᵀ)/2.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = f(i, j);
            }
        }
        Self::symmetrize_raw(dim, data)
    }

    /// Row-major input of length dim², symmetrized.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Ok(Self::symmetrize_raw(dim, data.to_vec()))
    }

    /// Accepts row-major input only if it is symmetric to `tol` (relative to its size).
    pub fn try_from_row_major(dim: usize, data: &[f64], tol: f64) -> Result<Self> {
        let m = Self::from_row_major(dim, data)?;
        let scale = 1.0 + data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut asym = 0.0f64;
        for i in 0..dim {
            for j in 0..i {
                asym = asym.max((data[i * dim + j] - data[j * dim + i]).abs());
            }
        }
        if asym > tol * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(m)
    }

    fn symmetrize_raw(dim: usize, mut data: Vec<f64>) -> Self {
        for i in 0..dim {
            for j in 0..i {
                let s = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = s;
                data[j * dim + i] = s;
            }
        }
        Self { dim, data }
    }

    /// Outer product v vᵀ.
    pub fn outer(v: &[f64]) -> Self {
        let dim = v.len();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = v[i] * v[j];
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets entries (i,j) and (j,i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn neg(&self) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| -v).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "vector length differs from matrix dimension");
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    /// tr(A B) for two symmetric matrices.
    pub fn trace_product(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// S M Sᵀ for a row-major `rows × dim` matrix S, symmetrized.
    pub fn congruence(&self, s: &[f64], rows: usize) -> Self {
        let d = self.dim;
        assert_eq!(s.len(), rows * d, "congruence factor has wrong shape");
        // T = S M  (rows × d)
        let mut t = vec![0.0; rows * d];
        for r in 0..rows {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += s[r * d + k] * self.data[k * d + j];
                }
                t[r * d + j] = acc;
            }
        }
        Self::from_fn(rows, |a, b| (0..d).map(|k| t[a * d + k] * s[b * d + k]).sum())
    }
}

/// Eigen-decomposition with ascending eigenvalues. `eigenvectors[k]` pairs with `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl Spectrum {
    /// Q diag(e) Qᵀ, when eigenvectors are present.
    pub fn reconstruct(&self) -> Option<SymmetricMatrix> {
        let q = self.eigenvectors.as_ref()?;
        let d = self.eigenvalues.len();
        Some(SymmetricMatrix::from_fn(d, |i, j| (0..d).map(|k| q[k][i] * self.eigenvalues[k] * q[k][j]).sum()))
    }
}

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 50;

/// Cyclic Jacobi rotations. Returns eigenvalues in the order the diagonal ends up in,
/// together with the accumulated rotation (columns are eigenvectors) if requested.
///
/// Every operation is odd in the input, so the eigenvalues of −M are the exact
/// negatives of those of M in the same order.
fn jacobi(m: &SymmetricMatrix, want_vectors: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    let d = m.dim;
    let mut a = m.data.clone();
    let mut v = if want_vectors {
        let mut id = vec![0.0; d * d];
        for i in 0..d {
            id[i * d + i] = 1.0;
        }
        Some(id)
    } else {
        None
    };
    let norm = m.frobenius_norm();
    if d > 1 && norm > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    off += a[p * d + q] * a[p * d + q];
                }
            }
            if (2.0 * off).sqrt() <= JACOBI_TOL * norm {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[p * d + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k * d + p];
                        let akq = a[k * d + q];
                        a[k * d + p] = c * akp - s * akq;
                        a[k * d + q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p * d + k];
                        let aqk = a[q * d + k];
                        a[p * d + k] = c * apk - s * aqk;
                        a[q * d + k] = s * apk + c * aqk;
                    }
                    if let Some(v) = v.as_mut() {
                        for k in 0..d {
                            let vkp = v[k * d + p];
                            let vkq = v[k * d + q];
                            v[k * d + p] = c * vkp - s * vkq;
                            v[k * d + q] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

/// Eigenvalues in solver order (not sorted). Used where summation order must be
/// independent of sorting, e.g. the exact duality of the Pucci operators.
pub(crate) fn eigenvalues_unsorted(m: &SymmetricMatrix) -> Vec<f64> {
    jacobi(m, false).0
}

/// Full spectral decomposition, eigenvalues ascending.
pub fn eigen_sym(m: &SymmetricMatrix) -> Spectrum {
    let d = m.dim;
    let (vals, vecs) = jacobi(m, true);
    let vecs = vecs.expect("vectors requested");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    Spectrum {
        eigenvalues: order.iter().map(|&k| vals[k]).collect(),
        eigenvectors: Some(order.iter().map(|&k| (0..d).map(|i| vecs[i * d + k]).collect()).collect()),
    }
}

/// Eigen-decomposition of raw row-major input, rejecting asymmetric matrices.
pub fn eigen_sym_checked(dim: usize, data: &[f64]) -> Result<Spectrum> {
    Ok(eigen_sym(&SymmetricMatrix::try_from_row_major(dim, data, 1e-12)?))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let s = eigen_sym(&SymmetricMatrix::identity(4));
        assert!(s.eigenvalues.iter().all(|e| (*e - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_sorted() {
        let s = eigen_sym(&SymmetricMatrix::diagonal(&[3.0, -1.0]));
        assert_eq!(s.eigenvalues, vec![-1.0, 3.0]);
    }

    #[test]
    fn reconstruction_4x4() {
        let m = SymmetricMatrix::from_fn(4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.3);
        let s = eigen_sym(&m);
        let r = s.reconstruct().unwrap();
        assert!(r.sub(&m).max_abs() < 1e-10);
        let q = s.eigenvectors.unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot(&q[a], &q[b]) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(matches!(eigen_sym_checked(2, &[1.0, 2.0, 0.0, 1.0]), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn negation_is_exact() {
        let m = SymmetricMatrix::from_fn(5, |i, j| ((i + 2 * j) as f64).sin());
        let a = eigenvalues_unsorted(&m);
        let b = eigenvalues_unsorted(&m.neg());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn congruence_matches_manual_product() {
        let m = SymmetricMatrix::from_fn(3, |i, j| (i + j) as f64);
        let s = [1.0, 0.0, 2.0, 0.0, 1.0, -4.0];
        let c = m.congruence(&s, 2);
        // row0 = (1,0,2), row1 = (0,1,-4); M = [[0,1,2],[1,2,3],[2,3,4]]
        // M row0ᵀ = (4,7,10); M row1ᵀ = (-7,-10,-13)
        assert_eq!(c.get(0, 0), 4.0 + 20.0);
        assert_eq!(c.get(0, 1), 7.0 - 40.0);
        assert_eq!(c.get(1, 1), -10.0 + 52.0);
    }
}
