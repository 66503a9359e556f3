//! Gauge-radial functions u = φ(ρ): closed-form horizontal Hessian, its spectrum and
//! eigenbasis, and the Pucci operators evaluated on them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{
    coupling_matrix, gauge_gradient, gauge_hessian, gauge_norm, group_compose, GroupPoint, SecondOrderData,
    GAUGE_SINGULAR,
};
use crate::linalg::{dot, norm, Spectrum, SymmetricMatrix};
use crate::pucci::{Ellipticity, PucciSign};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotonicityTag {
    ConcaveIncreasing,
    ConvexDecreasing,
    None,
}

impl MonotonicityTag {
    fn negated(self) -> Self {
        match self {
            Self::ConcaveIncreasing => Self::ConvexDecreasing,
            Self::ConvexDecreasing => Self::ConcaveIncreasing,
            Self::None => Self::None,
        }
    }
}

/// A profile φ with evaluators for φ, φ′ and φ″.
#[derive(Clone)]
pub struct RadialProfile {
    value: ScalarFn,
    d1: ScalarFn,
    d2: ScalarFn,
    tag: MonotonicityTag,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile").field("tag", &self.tag).finish_non_exhaustive()
    }
}

impl RadialProfile {
    pub fn new(value: ScalarFn, d1: ScalarFn, d2: ScalarFn, tag: MonotonicityTag) -> Self {
        Self { value, d1, d2, tag }
    }

    pub fn from_fns(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tag: MonotonicityTag,
    ) -> Self {
        Self::new(Arc::new(value), Arc::new(d1), Arc::new(d2), tag)
    }

    /// c·ρ^p + offset.
    pub fn power(c: f64, p: f64, offset: f64, tag: MonotonicityTag) -> Self {
        Self::from_fns(
            move |r| c * r.powf(p) + offset,
            move |r| c * p * r.powf(p - 1.0),
            move |r| c * p * (p - 1.0) * r.powf(p - 2.0),
            tag,
        )
    }

    /// c·log ρ + offset.
    pub fn log(c: f64, offset: f64, tag: MonotonicityTag) -> Self {
        Self::from_fns(move |r| c * r.ln() + offset, move |r| c / r, move |r| -c / (r * r), tag)
    }

    /// Σ a_k ρ^k for k = 0..=3.
    pub fn cubic(a: [f64; 4], tag: MonotonicityTag) -> Self {
        Self::from_fns(
            move |r| a[0] + r * (a[1] + r * (a[2] + r * a[3])),
            move |r| a[1] + r * (2.0 * a[2] + 3.0 * r * a[3]),
            move |r| 2.0 * a[2] + 6.0 * r * a[3],
            tag,
        )
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fns(move |_| c, |_| 0.0, |_| 0.0, MonotonicityTag::None)
    }

    /// −φ, with the tag mirrored.
    pub fn negated(&self) -> Self {
        let (v, d1, d2) = (self.value.clone(), self.d1.clone(), self.d2.clone());
        Self::from_fns(move |r| -v(r), move |r| -d1(r), move |r| -d2(r), self.tag.negated())
    }

    /// a·φ + b. A negative `a` mirrors the tag.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let (v, d1, d2) = (self.value.clone(), self.d1.clone(), self.d2.clone());
        let tag = if a >= 0.0 { self.tag } else { self.tag.negated() };
        Self::from_fns(move |r| a * v(r) + b, move |r| a * d1(r), move |r| a * d2(r), tag)
    }

    pub fn with_tag(mut self, tag: MonotonicityTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn tag(&self) -> MonotonicityTag {
        self.tag
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }

    pub fn d1(&self, r: f64) -> f64 {
        (self.d1)(r)
    }

    pub fn d2(&self, r: f64) -> f64 {
        (self.d2)(r)
    }

    /// Checks the tag's sign conditions on 64 points of [lo, hi].
    pub fn verify_tag(&self, lo: f64, hi: f64) -> Result<()> {
        for k in 0..64 {
            let r = lo + (hi - lo) * k as f64 / 63.0;
            self.check_tag_at(r)?;
        }
        Ok(())
    }

    fn check_tag_at(&self, r: f64) -> Result<()> {
        let (a, b) = (self.d1(r), self.d2(r));
        let tol = 1e-12 * (1.0 + a.abs() + b.abs());
        let ok = match self.tag {
            MonotonicityTag::ConcaveIncreasing => a >= -tol && b <= tol,
            MonotonicityTag::ConvexDecreasing => a <= tol && b >= -tol,
            MonotonicityTag::None => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "profile tagged {:?} has phi' = {a:e}, phi'' = {b:e} at rho = {r}",
                self.tag
            )))
        }
    }
}

/// D²_H φ(ρ) = φ′ D²_Hρ + φ″ ∇_Hρ ⊗ ∇_Hρ.
pub fn radial_hessian(p: &RadialProfile, xi: &GroupPoint) -> Result<SymmetricMatrix> {
    let rho = gauge_norm(xi);
    let g = gauge_gradient(xi)?;
    let h = gauge_hessian(xi)?;
    Ok(h.scale(p.d1(rho)).add(&SymmetricMatrix::outer(&g).scale(p.d2(rho))))
}

/// Closed-form spectrum {|∇ρ|²φ″, 3|∇ρ|²φ′/ρ, |∇ρ|²φ′/ρ (×(2n−2))}, ascending; all zero
/// on the vertical axis.
pub fn radial_spectrum(p: &RadialProfile, xi: &GroupPoint) -> Result<Spectrum> {
    let rho = gauge_norm(xi);
    let g = gauge_gradient(xi)?;
    let g2 = dot(&g, &g);
    let n = xi.n();
    let mut eig = vec![0.0; 2 * n];
    if g2 > 0.0 {
        let f1 = p.d1(rho);
        eig[0] = g2 * p.d2(rho);
        eig[1] = 3.0 * g2 * f1 / rho;
        for e in eig.iter_mut().skip(2) {
            *e = g2 * f1 / rho;
        }
    }
    eig.sort_by(f64::total_cmp);
    Ok(Spectrum { eigenvalues: eig, eigenvectors: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// η for the index pair (2k−1, 2k), k = 1..⌊n/2⌋ (1-based).
    Eta(usize),
    /// η̂, the companion of η(k).
    EtaHat(usize),
    /// Odd n: the normalized vector on the pair (n−1, n).
    OddPair,
    /// Odd n: its companion.
    OddPairHat,
    /// (η̃, 0) with η̃ orthogonal to both x and y.
    Tangential,
    /// Orthogonal completion when the families above are rank deficient.
    Completion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenVector {
    pub vector: Vec<f64>,
    /// Eigenvalue predicted by the closed form for the test profile.
    pub eigenvalue: f64,
    /// ‖H q − e q‖ for unit q.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelVector {
    pub family: KernelFamily,
    pub eigen: EigenVector,
    /// ‖[[B,C],[−C,B]] q‖ for unit q.
    pub coupling_residual: f64,
}

/// Eigenbasis of D²_H φ(ρ) at a point, checked against a generic test profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialBasis {
    pub w: EigenVector,
    pub v: EigenVector,
    /// Every family member the construction produced, before orthogonalization.
    pub candidates: Vec<KernelVector>,
    /// Orthonormal basis of the remaining (2n−2)-dimensional eigenspace.
    pub kernel: Vec<Vec<f64>>,
    /// Whether `kernel` was spanned by the families alone.
    pub spanned_by_families: bool,
    pub max_residual: f64,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|a| a / n).collect()
}

fn eigen_residual(h: &SymmetricMatrix, q: &[f64], e: f64) -> f64 {
    let hq = h.mul_vec(q);
    norm(&hq.iter().zip(q).map(|(a, b)| a - e * b).collect::<Vec<_>>())
}

/// Builds w = ∇_Hρ/|∇_Hρ|, v = (X_{n+1}ρ, …, X_{2n}ρ, −X_1ρ, …, −X_nρ) and the kernel families,
/// and verifies each against the Hessian of the test profile φ(ρ) = ρ^{5/2} + ρ.
pub fn radial_eigenvectors(xi: &GroupPoint) -> Result<RadialBasis> {
    let n = xi.n();
    let rho = gauge_norm(xi);
    let g = gauge_gradient(xi)?;
    let g2 = dot(&g, &g);
    if g2.sqrt() <= 1e-12 * rho.max(GAUGE_SINGULAR) {
        return Err(Error::Singular("horizontal gradient of the gauge vanishes".into()));
    }
    let test = RadialProfile::from_fns(
        |r| r.powf(2.5) + r,
        |r| 2.5 * r.powf(1.5) + 1.0,
        |r| 3.75 * r.sqrt(),
        MonotonicityTag::None,
    );
    let h = radial_hessian(&test, xi)?;
    let (f1, f2) = (test.d1(rho), test.d2(rho));
    let kernel_eig = g2 * f1 / rho;
    let k = coupling_matrix(xi);

    let w = unit(&g);
    let mut v = vec![0.0; 2 * n];
    for i in 0..n {
        v[i] = g[n + i];
        v[n + i] = -g[i];
    }
    let v = unit(&v);
    let w_e = EigenVector { residual: eigen_residual(&h, &w, g2 * f2), vector: w, eigenvalue: g2 * f2 };
    let v_e =
        EigenVector { residual: eigen_residual(&h, &v, 3.0 * kernel_eig), vector: v, eigenvalue: 3.0 * kernel_eig };

    let c = xi.coords();
    let (x, y) = (&c[..n], &c[n..2 * n]);
    let b = |i: usize, j: usize| x[i] * x[j] + y[i] * y[j];
    let cc = |i: usize, j: usize| x[i] * y[j] - x[j] * y[i];
    // η on the 0-based pair (i, j): entries at j, n+i, n+j; η̂ moves them to i, j, n+j.
    let eta = |i: usize, j: usize| {
        let mut e = vec![0.0; 2 * n];
        e[j] = cc(j, i);
        e[n + i] = -b(j, j);
        e[n + j] = b(i, j);
        e
    };
    let hat = |e: &[f64], i: usize, j: usize| {
        let mut out = vec![0.0; 2 * n];
        out[i] = e[n + i];
        out[j] = e[n + j];
        out[n + j] = -e[j];
        out
    };
    let mut raw: Vec<(KernelFamily, Vec<f64>)> = Vec::new();
    for kk in 1..=n / 2 {
        let (i, j) = (2 * kk - 2, 2 * kk - 1);
        let e = eta(i, j);
        raw.push((KernelFamily::EtaHat(kk), hat(&e, i, j)));
        raw.push((KernelFamily::Eta(kk), e));
    }
    if n % 2 == 1 && n >= 3 {
        let (i, j) = (n - 2, n - 1);
        let bnn = b(j, j);
        if bnn.abs() > 1e-14 {
            let e: Vec<f64> = eta(i, j).iter().map(|a| -a / bnn).collect();
            raw.push((KernelFamily::OddPairHat, hat(&e, i, j)));
            raw.push((KernelFamily::OddPair, e));
        }
    }
    // Tangential vectors: orthonormal complement of span{x, y} inside ℝⁿ.
    let mut span: Vec<Vec<f64>> = Vec::new();
    for s in [x.to_vec(), y.to_vec()] {
        if let Some(q) = orthonormalize(&span, &s, 1e-10) {
            span.push(q);
        }
    }
    let mut tangential = 0;
    for a in 0..n {
        if tangential + span.len() >= n {
            break;
        }
        let mut e = vec![0.0; n];
        e[a] = 1.0;
        if let Some(q) = orthonormalize(&span, &e, 1e-8) {
            span.push(q.clone());
            let mut full = q;
            full.resize(2 * n, 0.0);
            raw.push((KernelFamily::Tangential, full));
            tangential += 1;
        }
    }

    let mut max_res = w_e.residual.max(v_e.residual);
    let mut candidates = Vec::new();
    for (family, vec) in raw {
        if norm(&vec) <= 1e-14 {
            continue;
        }
        let q = unit(&vec);
        let kq = k.mul_vec(&q);
        let residual = eigen_residual(&h, &q, kernel_eig);
        max_res = max_res.max(residual);
        candidates.push(KernelVector {
            family,
            coupling_residual: norm(&kq),
            eigen: EigenVector { vector: q, eigenvalue: kernel_eig, residual },
        });
    }

    let mut basis: Vec<Vec<f64>> = vec![w_e.vector.clone(), v_e.vector.clone()];
    for cand in &candidates {
        if basis.len() == 2 * n {
            break;
        }
        if let Some(q) = orthonormalize(&basis, &cand.eigen.vector, 1e-8) {
            basis.push(q);
        }
    }
    let spanned_by_families = basis.len() == 2 * n;
    for a in 0..2 * n {
        if basis.len() == 2 * n {
            break;
        }
        let mut e = vec![0.0; 2 * n];
        e[a] = 1.0;
        if let Some(q) = orthonormalize(&basis, &e, 1e-8) {
            max_res = max_res.max(eigen_residual(&h, &q, kernel_eig));
            basis.push(q);
        }
    }
    Ok(RadialBasis {
        w: w_e,
        v: v_e,
        candidates,
        kernel: basis.split_off(2),
        spanned_by_families,
        max_residual: max_res,
    })
}

fn orthonormalize(basis: &[Vec<f64>], v: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &r);
            for (a, b) in r.iter_mut().zip(q) {
                *a -= c * b;
            }
        }
    }
    let nr = norm(&r);
    if nr <= tol * norm(v).max(1e-300) {
        None
    } else {
        Some(r.iter().map(|a| a / nr).collect())
    }
}

/// Pucci operator of φ(ρ) via the closed-form spectrum; the tag decides which eigenvalue
/// groups are positive and which negative.
pub fn pucci_radial(p: &RadialProfile, xi: &GroupPoint, e: &Ellipticity, sign: PucciSign) -> Result<f64> {
    let rho = gauge_norm(xi);
    let g = gauge_gradient(xi)?;
    let g2 = dot(&g, &g);
    p.check_tag_at(rho)?;
    let n = xi.n() as f64;
    let (l, big) = (e.lambda(), e.big_lambda());
    let first = (2.0 * n + 1.0) * p.d1(rho) / rho;
    let second = p.d2(rho);
    let val = match (p.tag(), sign) {
        (MonotonicityTag::ConcaveIncreasing, PucciSign::Plus) => -l * first - big * second,
        (MonotonicityTag::ConcaveIncreasing, PucciSign::Minus) => -big * first - l * second,
        (MonotonicityTag::ConvexDecreasing, PucciSign::Plus) => -l * second - big * first,
        (MonotonicityTag::ConvexDecreasing, PucciSign::Minus) => -big * second - l * first,
        (MonotonicityTag::None, _) => {
            return Err(Error::Precondition(
                "profile has no monotonicity tag; extremal eigenvalue grouping is ambiguous".into(),
            ))
        }
    };
    Ok(g2 * val)
}

/// Euclidean value, gradient and Hessian of ξ ↦ φ(ρ(pole⁻¹∘ξ)), by the chain rule through
/// the Euclidean derivatives of ρ⁴ = |ζ_H|⁴ + ζ_t².
pub fn radial_second_order(p: &RadialProfile, pole: &GroupPoint, xi: &GroupPoint) -> Result<SecondOrderData> {
    let n = xi.n();
    let dim = 2 * n + 1;
    let z = group_compose(&pole.inverse(), xi)?;
    let zc = z.coords();
    let rho = gauge_norm(&z);
    if rho < GAUGE_SINGULAR {
        return Err(Error::Singular("evaluation at the pole".into()));
    }
    let r2: f64 = zc[..2 * n].iter().map(|a| a * a).sum();
    let s = rho.powi(4);
    let mut ds = vec![0.0; dim];
    for i in 0..2 * n {
        ds[i] = 4.0 * r2 * zc[i];
    }
    ds[2 * n] = 2.0 * zc[2 * n];
    let a = 0.25 * s.powf(-0.75);
    let bcoef = 3.0 / 16.0 * s.powf(-1.75);
    let grad_rho: Vec<f64> = ds.iter().map(|d| a * d).collect();
    let hess_rho = SymmetricMatrix::from_fn(dim, |i, j| {
        let d2s = if i < 2 * n && j < 2 * n {
            8.0 * zc[i] * zc[j] + if i == j { 4.0 * r2 } else { 0.0 }
        } else if i == 2 * n && j == 2 * n {
            2.0
        } else {
            0.0
        };
        a * d2s - bcoef * ds[i] * ds[j]
    });
    let (f1, f2) = (p.d1(rho), p.d2(rho));
    let grad_z: Vec<f64> = grad_rho.iter().map(|g| f1 * g).collect();
    let hess_z = hess_rho.scale(f1).add(&SymmetricMatrix::outer(&grad_rho).scale(f2));
    // ζ = pole⁻¹∘ξ is affine in ξ with Jacobian [[I, 0], [aᵀ, 1]].
    let pc = pole.coords();
    let mut jac = vec![0.0; dim * dim];
    for i in 0..dim {
        jac[i * dim + i] = 1.0;
    }
    for i in 0..n {
        jac[2 * n * dim + i] = -2.0 * pc[i + n];
        jac[2 * n * dim + i + n] = 2.0 * pc[i];
    }
    let mut jt = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            jt[i * dim + j] = jac[j * dim + i];
        }
    }
    let grad: Vec<f64> = (0..dim).map(|i| (0..dim).map(|k| jt[i * dim + k] * grad_z[k]).sum()).collect();
    Ok(SecondOrderData { value: p.value(rho), euclid_gradient: grad, euclid_hessian: hess_z.congruence(&jt, dim) })
}
