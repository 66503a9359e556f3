//! Pucci extremal operators and their composition with the Heisenberg Hessian.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::group::{heisenberg_hessian, sigma_matrix, GroupPoint, SecondOrderData};
use crate::linalg::{eigen_sym, eigenvalues_unsorted, SymmetricMatrix};
use crate::sampling::rng_from_seed;

/// Ellipticity constants 0 < λ ≤ Λ.
///
/// When built from integers the exact ratio is kept so that the logarithmic branch of
/// the fundamental solutions can be detected without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipticity {
    lambda: f64,
    big_lambda: f64,
    exact: Option<(u64, u64)>,
}

impl Ellipticity {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() || !big_lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ellipticity constants must be positive and finite, got ({lambda}, {big_lambda})"
            )));
        }
        if lambda > big_lambda {
            return Err(Error::InvalidArgument(format!(
                "requires lambda <= Lambda, got lambda = {lambda}, Lambda = {big_lambda}"
            )));
        }
        Ok(Self { lambda, big_lambda, exact: None })
    }

    /// Integer constants; keeps the exact ratio.
    pub fn from_integers(lambda: u64, big_lambda: u64) -> Result<Self> {
        let mut e = Self::new(lambda as f64, big_lambda as f64)?;
        e.exact = Some((lambda, big_lambda));
        Ok(e)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    pub fn exact(&self) -> Option<(u64, u64)> {
        self.exact
    }

    pub fn is_isotropic(&self) -> bool {
        self.lambda == self.big_lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PucciSign {
    Plus,
    Minus,
}

/// Relative, so that the operator stays positively homogeneous at every scale.
fn zero_threshold(norm: f64) -> f64 {
    1e-12 * norm
}

/// Shared kernel: sums of positive and negative eigenvalues in a fixed order.
fn split_sums(eigs: &[f64], norm: f64) -> (f64, f64) {
    let thr = zero_threshold(norm);
    let mut pos = 0.0;
    let mut neg = 0.0;
    for &e in eigs {
        if e > thr {
            pos += e;
        } else if e < -thr {
            neg += e;
        }
    }
    (pos, neg)
}

fn combine(pos: f64, neg: f64, e: &Ellipticity, sign: PucciSign) -> f64 {
    match sign {
        PucciSign::Minus => -e.big_lambda * pos + -e.lambda * neg,
        PucciSign::Plus => -e.big_lambda * neg + -e.lambda * pos,
    }
}

/// M⁻(M) = −Λ Σ_{e>0} e − λ Σ_{e<0} e.
pub fn pucci_minus(m: &SymmetricMatrix, e: &Ellipticity) -> f64 {
    pucci(m, e, PucciSign::Minus)
}

/// M⁺(M) = −Λ Σ_{e<0} e − λ Σ_{e>0} e.
pub fn pucci_plus(m: &SymmetricMatrix, e: &Ellipticity) -> f64 {
    pucci(m, e, PucciSign::Plus)
}

pub fn pucci(m: &SymmetricMatrix, e: &Ellipticity, sign: PucciSign) -> f64 {
    if e.is_isotropic() {
        return -e.lambda * m.trace();
    }
    let (pos, neg) = split_sums(&eigenvalues_unsorted(m), m.frobenius_norm());
    combine(pos, neg, e, sign)
}

/// Pucci operator of the 2×2 matrix [[a, b], [b, d]] via the closed-form spectrum.
#[inline]
pub fn pucci_2x2(a: f64, b: f64, d: f64, e: &Ellipticity, sign: PucciSign) -> f64 {
    if e.is_isotropic() {
        return -e.lambda * (a + d);
    }
    let mean = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b);
    let norm = (a * a + 2.0 * b * b + d * d).sqrt();
    let (pos, neg) = split_sums(&[mean - rad, mean + rad], norm);
    combine(pos, neg, e, sign)
}

/// M̃^±(ξ, D²u) = P^±(σ D²u σᵀ).
pub fn pucci_heisenberg(d: &SecondOrderData, xi: &GroupPoint, e: &Ellipticity, sign: PucciSign) -> f64 {
    pucci(&heisenberg_hessian(d, xi), e, sign)
}

pub type OperatorCallback = Arc<dyn Fn(&GroupPoint, &SymmetricMatrix) -> f64 + Send + Sync>;

/// A second-order operator F(ξ, X) acting on horizontal Hessians X.
#[derive(Clone)]
pub enum OperatorKind {
    PucciMinus,
    PucciPlus,
    /// F(X) = −tr(A X).
    LinearTrace(SymmetricMatrix),
    Callback(OperatorCallback),
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PucciMinus => write!(f, "PucciMinus"),
            Self::PucciPlus => write!(f, "PucciPlus"),
            Self::LinearTrace(a) => write!(f, "LinearTrace({:?})", a.as_slice()),
            Self::Callback(_) => write!(f, "Callback"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub ellipticity: Ellipticity,
}

impl OperatorSpec {
    pub fn pucci_minus(e: Ellipticity) -> Self {
        Self { kind: OperatorKind::PucciMinus, ellipticity: e }
    }

    pub fn pucci_plus(e: Ellipticity) -> Self {
        Self { kind: OperatorKind::PucciPlus, ellipticity: e }
    }

    /// −tr(A ·); A must have its spectrum in [λ, Λ].
    pub fn linear_trace(a: SymmetricMatrix, e: Ellipticity) -> Result<Self> {
        let spec = eigen_sym(&a).eigenvalues;
        let tol = 1e-12 * (1.0 + e.big_lambda);
        if spec.first().copied().unwrap_or(e.lambda) < e.lambda - tol
            || spec.last().copied().unwrap_or(e.big_lambda) > e.big_lambda + tol
        {
            return Err(Error::InvalidArgument(format!(
                "coefficient spectrum {spec:?} is not inside [{}, {}]",
                e.lambda, e.big_lambda
            )));
        }
        Ok(Self { kind: OperatorKind::LinearTrace(a), ellipticity: e })
    }

    pub fn callback(f: OperatorCallback, e: Ellipticity) -> Self {
        Self { kind: OperatorKind::Callback(f), ellipticity: e }
    }

    pub fn evaluate(&self, xi: &GroupPoint, x: &SymmetricMatrix) -> f64 {
        match &self.kind {
            OperatorKind::PucciMinus => pucci_minus(x, &self.ellipticity),
            OperatorKind::PucciPlus => pucci_plus(x, &self.ellipticity),
            OperatorKind::LinearTrace(a) => -a.trace_product(x),
            OperatorKind::Callback(f) => f(xi, x),
        }
    }

    /// Fast path for n = 1 horizontal Hessians [[a, b], [b, d]].
    #[inline]
    pub fn evaluate_2x2(&self, xi: [f64; 3], a: f64, b: f64, d: f64) -> f64 {
        match &self.kind {
            OperatorKind::PucciMinus => pucci_2x2(a, b, d, &self.ellipticity, PucciSign::Minus),
            OperatorKind::PucciPlus => pucci_2x2(a, b, d, &self.ellipticity, PucciSign::Plus),
            OperatorKind::LinearTrace(m) => -(m.get(0, 0) * a + 2.0 * m.get(0, 1) * b + m.get(1, 1) * d),
            OperatorKind::Callback(f) => {
                let mut x = SymmetricMatrix::zeros(2);
                x.set(0, 0, a);
                x.set(0, 1, b);
                x.set(1, 1, d);
                f(&GroupPoint::h1(xi[0], xi[1], xi[2]), &x)
            }
        }
    }
}

/// Outcome of sampling the structural conditions on F.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticityReport {
    pub samples: usize,
    /// Largest violation of λ tr(σPσᵀ) ≤ F(σMσᵀ) − F(σ(M+P)σᵀ) ≤ Λ tr(σPσᵀ), relative to 1 + ‖M‖ + tr P.
    pub worst_violation: f64,
    /// Largest |F(ξ, 0)|.
    pub worst_zero_value: f64,
    pub passed: bool,
}

/// Samples random ξ, M ∈ S_{2n+1} and P ⪰ 0 and checks degenerate ellipticity and F(ξ, 0) = 0.
pub fn check_degenerate_ellipticity(f: &OperatorSpec, n: usize, samples: usize, seed: u64) -> EllipticityReport {
    let e = f.ellipticity;
    let dim = 2 * n + 1;
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    let mut worst_zero = 0.0f64;
    for s in 0..samples {
        let xi =
            GroupPoint::new(n, (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).expect("dimension is consistent");
        let m = random_symmetric(&mut rng, dim);
        // P = B Bᵀ with a random rank, so degenerate directions are exercised too.
        let rank = 1 + s % dim;
        let b: Vec<f64> = (0..dim * rank).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = SymmetricMatrix::from_fn(dim, |i, j| (0..rank).map(|k| b[i * rank + k] * b[j * rank + k]).sum());
        let sigma = sigma_matrix(&xi);
        let x = m.congruence(sigma.as_slice(), 2 * n);
        let y = m.add(&p).congruence(sigma.as_slice(), 2 * n);
        let tr = p.congruence(sigma.as_slice(), 2 * n).trace();
        let diff = f.evaluate(&xi, &x) - f.evaluate(&xi, &y);
        let scale = 1.0 + x.frobenius_norm() + tr;
        let v = (e.lambda() * tr - diff).max(diff - e.big_lambda() * tr).max(0.0) / scale;
        worst = worst.max(v);
        worst_zero = worst_zero.max(f.evaluate(&xi, &SymmetricMatrix::zeros(2 * n)).abs());
    }
    EllipticityReport {
        samples,
        worst_violation: worst,
        worst_zero_value: worst_zero,
        passed: worst <= 1e-10 && worst_zero <= 1e-12,
    }
}

pub(crate) fn random_symmetric<R: Rng>(rng: &mut R, dim: usize) -> SymmetricMatrix {
    let raw: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SymmetricMatrix::from_row_major(dim, &raw).expect("square input")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e12() -> Ellipticity {
        Ellipticity::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn examples() {
        let m = SymmetricMatrix::diagonal(&[1.0, -1.0]);
        assert_eq!(pucci_minus(&m, &e12()), -1.0);
        assert_eq!(pucci_plus(&m, &e12()), 1.0);
        assert_eq!(pucci_plus(&m, &e12()), -pucci_minus(&m.neg(), &e12()));
        assert_eq!(pucci_minus(&SymmetricMatrix::zeros(3), &e12()), 0.0);
        let iso = Ellipticity::new(1.0, 1.0).unwrap();
        let m = SymmetricMatrix::from_fn(3, |i, j| (i * 3 + j) as f64 * 0.1);
        assert_eq!(pucci_minus(&m, &iso), -m.trace());
    }

    #[test]
    fn rejects_bad_constants() {
        let err = Ellipticity::new(2.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("requires lambda <= Lambda"));
        assert!(Ellipticity::new(0.0, 1.0).is_err());
    }

    #[test]
    fn fast_path_matches_general() {
        let e = Ellipticity::new(0.5, 3.0).unwrap();
        for (a, b, d) in [(1.0, 0.3, -2.0), (0.0, 1.0, 0.0), (-1.0, 0.2, -0.5), (2.0, -0.1, 1.0)] {
            let mut m = SymmetricMatrix::zeros(2);
            m.set(0, 0, a);
            m.set(0, 1, b);
            m.set(1, 1, d);
            for s in [PucciSign::Plus, PucciSign::Minus] {
                assert!((pucci_2x2(a, b, d, &e, s) - pucci(&m, &e, s)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn ellipticity_checks() {
        let e = e12();
        assert!(check_degenerate_ellipticity(&OperatorSpec::pucci_minus(e), 1, 300, 1).passed);
        assert!(check_degenerate_ellipticity(&OperatorSpec::pucci_plus(e), 2, 300, 2).passed);
        let a = SymmetricMatrix::identity(2).scale(1.5);
        let lin = OperatorSpec::linear_trace(a, e).unwrap();
        assert!(check_degenerate_ellipticity(&lin, 1, 300, 3).passed);
        let bad = OperatorSpec::callback(Arc::new(|_, x: &SymmetricMatrix| -4.0 * x.trace()), e);
        let r = check_degenerate_ellipticity(&bad, 1, 100, 4);
        assert!(!r.passed && r.worst_violation > 0.0);
    }

    #[test]
    fn linear_trace_spectrum_enforced() {
        assert!(OperatorSpec::linear_trace(SymmetricMatrix::identity(2).scale(3.0), e12()).is_err());
    }
}
