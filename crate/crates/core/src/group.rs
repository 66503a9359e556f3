//! Heisenberg group algebra: group law, dilations, gauge norm, horizontal frame and
//! intrinsic derivatives.
//!
//! Coordinates are ξ = (x, y, t) with x, y ∈ ℝⁿ and t ∈ ℝ, stored as a flat vector of
//! length 2n+1. Horizontal field indices are 0-based: `0..n` are the X fields along x,
//! `n..2n` the fields along y.

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Gauge values below this are treated as the singular origin.
pub const GAUGE_SINGULAR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    n: usize,
    coords: Vec<f64>,
}

impl GroupPoint {
    pub fn new(n: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("group index n must be positive".into()));
        }
        if coords.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch(format!(
                "n = {n} needs {} coordinates, got {}",
                2 * n + 1,
                coords.len()
            )));
        }
        Ok(Self { n, coords })
    }

    /// Convenience constructor for n = 1.
    pub fn h1(x: f64, y: f64, t: f64) -> Self {
        Self { n: 1, coords: vec![x, y, t] }
    }

    pub fn origin(n: usize) -> Self {
        Self { n, coords: vec![0.0; 2 * n + 1] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Homogeneous dimension Q = 2n + 2.
    pub fn q(&self) -> usize {
        2 * self.n + 2
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.coords[..2 * self.n]
    }

    pub fn t(&self) -> f64 {
        self.coords[2 * self.n]
    }

    /// Group inverse, which is coordinate negation.
    pub fn inverse(&self) -> Self {
        Self { n: self.n, coords: self.coords.iter().map(|c| -c).collect() }
    }

    /// self ∘ other.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        group_compose(self, other)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!("points live in H^{} and H^{}", self.n, other.n)));
        }
        Ok(())
    }
}

/// η∘ξ: horizontal parts add, t = ξ_t + η_t + 2Σ(ξ_i η_{i+n} − ξ_{i+n} η_i).
pub fn group_compose(eta: &GroupPoint, xi: &GroupPoint) -> Result<GroupPoint> {
    eta.check_same(xi)?;
    let n = xi.n;
    let (a, b) = (&eta.coords, &xi.coords);
    let mut out = Vec::with_capacity(2 * n + 1);
    for i in 0..2 * n {
        out.push(a[i] + b[i]);
    }
    let mut t = b[2 * n] + a[2 * n];
    for i in 0..n {
        t += 2.0 * (b[i] * a[i + n] - b[i + n] * a[i]);
    }
    out.push(t);
    Ok(GroupPoint { n, coords: out })
}

/// Anisotropic dilation δ_s(x, y, t) = (s x, s y, s² t).
pub fn dilate(s: f64, xi: &GroupPoint) -> Result<GroupPoint> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {s}")));
    }
    let n = xi.n;
    let mut c = xi.coords.clone();
    for v in &mut c[..2 * n] {
        *v *= s;
    }
    c[2 * n] *= s * s;
    Ok(GroupPoint { n, coords: c })
}

/// Squared Euclidean norm of the horizontal part.
pub(crate) fn horizontal_sq(c: &[f64], n: usize) -> f64 {
    c[..2 * n].iter().map(|v| v * v).sum()
}

/// Gauge norm on a raw coordinate slice of length 2n+1.
#[inline]
pub(crate) fn gauge_raw(c: &[f64], n: usize) -> f64 {
    let r2 = horizontal_sq(c, n);
    let t = c[2 * n];
    (r2 * r2 + t * t).sqrt().sqrt()
}

/// ρ(ξ) = (|ξ_H|⁴ + t²)^{1/4}.
pub fn gauge_norm(xi: &GroupPoint) -> f64 {
    gauge_raw(&xi.coords, xi.n)
}

/// d_H(ξ, η) = ρ(η⁻¹∘ξ).
pub fn h_distance(xi: &GroupPoint, eta: &GroupPoint) -> Result<f64> {
    Ok(gauge_norm(&group_compose(&eta.inverse(), xi)?))
}

/// d_H for n = 1 on plain arrays, used in grid loops.
#[inline]
pub(crate) fn h_distance_h1(p: [f64; 3], eta: [f64; 3]) -> f64 {
    let x = p[0] - eta[0];
    let y = p[1] - eta[1];
    let t = p[2] - eta[2] + 2.0 * (p[0] * (-eta[1]) - p[1] * (-eta[0]));
    let r2 = x * x + y * y;
    (r2 * r2 + t * t).sqrt().sqrt()
}

/// The 2n × (2n+1) matrix whose rows are the horizontal fields X_i.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalFrame {
    n: usize,
    rows: Vec<f64>,
}

impl HorizontalFrame {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major storage, 2n rows of length 2n+1.
    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * (2 * self.n + 1) + j]
    }

    /// σ v for a vector of length 2n+1.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let w = 2 * self.n + 1;
        assert_eq!(v.len(), w, "vector length must be 2n+1");
        (0..2 * self.n).map(|i| (0..w).map(|j| self.rows[i * w + j] * v[j]).sum()).collect()
    }

    /// σ σᵀ.
    pub fn gram(&self) -> SymmetricMatrix {
        let w = 2 * self.n + 1;
        SymmetricMatrix::from_fn(2 * self.n, |a, b| (0..w).map(|k| self.rows[a * w + k] * self.rows[b * w + k]).sum())
    }
}

/// σ(ξ) = [I_n 0 2y; 0 I_n −2x].
pub fn sigma_matrix(xi: &GroupPoint) -> HorizontalFrame {
    let n = xi.n;
    let w = 2 * n + 1;
    let mut rows = vec![0.0; 2 * n * w];
    for i in 0..n {
        rows[i * w + i] = 1.0;
        rows[i * w + 2 * n] = 2.0 * xi.coords[i + n];
        rows[(i + n) * w + i + n] = 1.0;
        rows[(i + n) * w + 2 * n] = -2.0 * xi.coords[i];
    }
    HorizontalFrame { n, rows }
}

/// Value, Euclidean gradient and Euclidean Hessian of a function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderData {
    pub value: f64,
    pub euclid_gradient: Vec<f64>,
    pub euclid_hessian: SymmetricMatrix,
}

impl SecondOrderData {
    pub fn constant(n: usize, value: f64) -> Self {
        Self { value, euclid_gradient: vec![0.0; 2 * n + 1], euclid_hessian: SymmetricMatrix::zeros(2 * n + 1) }
    }

    pub fn neg(&self) -> Self {
        Self {
            value: -self.value,
            euclid_gradient: self.euclid_gradient.iter().map(|g| -g).collect(),
            euclid_hessian: self.euclid_hessian.neg(),
        }
    }

    /// Affine combination a·self + b.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            value: a * self.value + b,
            euclid_gradient: self.euclid_gradient.iter().map(|g| a * g).collect(),
            euclid_hessian: self.euclid_hessian.scale(a),
        }
    }
}

/// ∇_H u = σ(ξ)∇u.
pub fn horizontal_gradient(d: &SecondOrderData, xi: &GroupPoint) -> Vec<f64> {
    sigma_matrix(xi).apply(&d.euclid_gradient)
}

/// D²_H u = σ(ξ) D²u σ(ξ)ᵀ.
pub fn heisenberg_hessian(d: &SecondOrderData, xi: &GroupPoint) -> SymmetricMatrix {
    let s = sigma_matrix(xi);
    d.euclid_hessian.congruence(s.as_slice(), 2 * xi.n)
}

fn require_regular(xi: &GroupPoint) -> Result<f64> {
    let rho = gauge_norm(xi);
    if rho < GAUGE_SINGULAR {
        return Err(Error::Singular(format!("gauge norm {rho:e} at the origin")));
    }
    Ok(rho)
}

/// Closed-form ∇_H ρ: X_iρ = ξ_i|∇_Hρ|²/ρ + ξ_{i+n} t/ρ³, X_{n+i}ρ = ξ_{n+i}|∇_Hρ|²/ρ − ξ_i t/ρ³.
pub fn gauge_gradient(xi: &GroupPoint) -> Result<Vec<f64>> {
    let rho = require_regular(xi)?;
    let n = xi.n;
    let c = &xi.coords;
    let t = c[2 * n];
    let r2 = horizontal_sq(c, n);
    let g2 = r2 / (rho * rho);
    let rho3 = rho * rho * rho;
    let mut g = vec![0.0; 2 * n];
    for i in 0..n {
        g[i] = c[i] * g2 / rho + c[i + n] * t / rho3;
        g[i + n] = c[i + n] * g2 / rho - c[i] * t / rho3;
    }
    Ok(g)
}

/// The coupling matrix [[B, C], [−C, B]] with b_ij = x_i x_j + y_i y_j, c_ij = x_i y_j − x_j y_i.
pub fn coupling_matrix(xi: &GroupPoint) -> SymmetricMatrix {
    let n = xi.n;
    let c = &xi.coords;
    let (x, y) = (&c[..n], &c[n..2 * n]);
    let mut m = SymmetricMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let b = x[i] * x[j] + y[i] * y[j];
            let cc = x[i] * y[j] - x[j] * y[i];
            m.set(i, j, b);
            m.set(i + n, j + n, b);
            // (n+j, i) receives c_ij = −c_ji, which is the lower-left block −C.
            m.set(i, n + j, cc);
        }
    }
    m
}

/// Closed-form D²_H ρ = −(3/ρ)∇ρ⊗∇ρ + (|∇ρ|²/ρ)I + (2/ρ³)[[B,C],[−C,B]].
pub fn gauge_hessian(xi: &GroupPoint) -> Result<SymmetricMatrix> {
    let rho = require_regular(xi)?;
    let g = gauge_gradient(xi)?;
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let k = coupling_matrix(xi);
    let d = 2 * xi.n;
    let rho3 = rho * rho * rho;
    Ok(SymmetricMatrix::from_fn(d, |i, j| {
        let id = if i == j { g2 / rho } else { 0.0 };
        -3.0 / rho * g[i] * g[j] + id + 2.0 / rho3 * k.get(i, j)
    }))
}

/// Exact time-h flow of the horizontal field X_i (0-based index), equal to ξ∘(h e_i).
pub fn flow_step(xi: &GroupPoint, i: usize, h: f64) -> Result<GroupPoint> {
    let n = xi.n;
    if i >= 2 * n {
        return Err(Error::InvalidArgument(format!("field index {i} out of range 0..{}", 2 * n)));
    }
    let mut c = xi.coords.clone();
    if i < n {
        c[2 * n] += 2.0 * h * c[i + n];
    } else {
        c[2 * n] -= 2.0 * h * c[i - n];
    }
    c[i] += h;
    Ok(GroupPoint { n, coords: c })
}

/// Horizontal gradient and Hessian of an arbitrary function by central differences along
/// exact flows. The mixed entries average both composition orders, which cancels the
/// commutator [X_i, X_j] and leaves an O(h²) error.
pub fn flow_fd_derivatives(
    f: &dyn Fn(&GroupPoint) -> f64,
    xi: &GroupPoint,
    h: f64,
) -> Result<(Vec<f64>, SymmetricMatrix)> {
    let d = 2 * xi.n;
    let f0 = f(xi);
    let mut grad = vec![0.0; d];
    let mut hess = SymmetricMatrix::zeros(d);
    for (i, g) in grad.iter_mut().enumerate() {
        let fp = f(&flow_step(xi, i, h)?);
        let fm = f(&flow_step(xi, i, -h)?);
        *g = (fp - fm) / (2.0 * h);
        hess.set(i, i, (fp - 2.0 * f0 + fm) / (h * h));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut acc = 0.0;
            for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let a = flow_step(&flow_step(xi, i, si * h)?, j, sj * h)?;
                let b = flow_step(&flow_step(xi, j, sj * h)?, i, si * h)?;
                acc += w * (f(&a) + f(&b));
            }
            hess.set(i, j, acc / (8.0 * h * h));
        }
    }
    Ok((grad, hess))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn compose_examples() {
        let eta = GroupPoint::h1(1.0, 0.0, 0.0);
        let xi = GroupPoint::h1(0.0, 1.0, 0.0);
        assert_eq!(group_compose(&eta, &xi).unwrap().coords(), &[1.0, 1.0, -2.0]);
        let z = GroupPoint::origin(1);
        assert_eq!(group_compose(&eta, &z).unwrap(), eta);
        let p = GroupPoint::h1(0.3, -1.2, 2.5);
        assert_eq!(group_compose(&p, &p.inverse()).unwrap(), GroupPoint::origin(1));
    }

    #[test]
    fn compose_rejects_mixed_dimensions() {
        let a = GroupPoint::origin(1);
        let b = GroupPoint::origin(2);
        assert!(matches!(group_compose(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn dilation_examples() {
        let v = GroupPoint::h1(0.0, 0.0, 1.0);
        assert_eq!(dilate(2.0, &v).unwrap().coords(), &[0.0, 0.0, 4.0]);
        assert_eq!(dilate(1.0, &v).unwrap(), v);
        assert!(dilate(0.0, &v).is_err());
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(gauge_norm(&GroupPoint::h1(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(gauge_norm(&GroupPoint::h1(0.0, 0.0, 1.0)), 1.0);
        assert!(close(gauge_norm(&GroupPoint::h1(1.0, 1.0, 1.0)), 5f64.powf(0.25), 1e-15));
        let d = h_distance(&GroupPoint::h1(1.0, 0.0, 0.0), &GroupPoint::h1(0.0, 1.0, 0.0)).unwrap();
        assert!(close(d, 8f64.powf(0.25), 1e-15));
        let a = [0.3, -0.7, 0.2];
        let b = [-1.1, 0.4, 0.9];
        let gp = |c: [f64; 3]| GroupPoint::h1(c[0], c[1], c[2]);
        assert!(close(h_distance_h1(a, b), h_distance(&gp(a), &gp(b)).unwrap(), 1e-15));
    }

    #[test]
    fn sigma_examples() {
        let s = sigma_matrix(&GroupPoint::h1(0.0, 1.0, 0.0));
        assert_eq!(s.as_slice(), &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0]);
        let g = sigma_matrix(&GroupPoint::h1(1.0, 1.0, 5.0)).gram();
        assert_eq!(g.trace(), 10.0);
    }

    #[test]
    fn horizontal_gradient_of_t() {
        let xi = GroupPoint::new(2, vec![0.5, -1.0, 2.0, 0.25, 3.0]).unwrap();
        let d = SecondOrderData {
            value: 3.0,
            euclid_gradient: vec![0.0, 0.0, 0.0, 0.0, 1.0],
            euclid_hessian: SymmetricMatrix::zeros(5),
        };
        assert_eq!(horizontal_gradient(&d, &xi), vec![4.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn gauge_gradient_examples() {
        let g = gauge_gradient(&GroupPoint::h1(1.0, 0.0, 0.0)).unwrap();
        assert!(close(g[0] * g[0] + g[1] * g[1], 1.0, 1e-15));
        let g = gauge_gradient(&GroupPoint::h1(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(g[0] * g[0] + g[1] * g[1], 0.0);
        assert!(matches!(gauge_gradient(&GroupPoint::origin(1)), Err(Error::Singular(_))));
        assert!(gauge_hessian(&GroupPoint::origin(2)).is_err());
    }

    #[test]
    fn flow_step_examples() {
        let p = GroupPoint::h1(0.0, 1.0, 0.0);
        assert_eq!(flow_step(&p, 0, 0.5).unwrap().coords(), &[0.5, 1.0, 1.0]);
        assert_eq!(flow_step(&p, 1, 0.0).unwrap(), p);
        assert!(flow_step(&p, 2, 0.1).is_err());
    }

    #[test]
    fn flow_step_is_right_translation() {
        let p = GroupPoint::new(2, vec![0.3, -0.2, 1.1, 0.7, -0.4]).unwrap();
        for i in 0..4 {
            let mut e = vec![0.0; 5];
            e[i] = 0.37;
            let right = group_compose(&p, &GroupPoint::new(2, e).unwrap()).unwrap();
            let f = flow_step(&p, i, 0.37).unwrap();
            for (a, b) in right.coords().iter().zip(f.coords()) {
                assert!(close(*a, *b, 1e-15));
            }
        }
    }

    #[test]
    fn coupling_identity() {
        let xi = GroupPoint::new(3, vec![0.3, -0.5, 1.2, 0.8, 0.1, -0.9, 0.45]).unwrap();
        let k = coupling_matrix(&xi);
        let g = gauge_gradient(&xi).unwrap();
        let rho = gauge_norm(&xi);
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let kg = k.mul_vec(&g);
        for i in 0..6 {
            assert!(close(kg[i], g2 * rho * rho * g[i], 1e-12));
        }
        // C block is antisymmetric
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(k.get(i, 3 + j) + k.get(j, 3 + i), 0.0, 1e-15));
            }
        }
    }

    #[test]
    fn quadratic_hessian() {
        let xi = GroupPoint::h1(0.4, -0.3, 0.8);
        let d = SecondOrderData {
            value: 0.0,
            euclid_gradient: vec![0.8, -0.6, 0.0],
            euclid_hessian: SymmetricMatrix::diagonal(&[2.0, 2.0, 0.0]),
        };
        let h = heisenberg_hessian(&d, &xi);
        let want = SymmetricMatrix::identity(2).scale(2.0);
        assert!(h.sub(&want).max_abs() < 1e-15);
    }
}
