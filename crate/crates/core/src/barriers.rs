//! Explicit barrier families: exterior-ball barriers and their envelopes, exponential
//! barriers on gauge annuli, the global supersolution, local barriers at
//! non-characteristic points, gluing, and the characteristic ratio test.

use std::fmt;
use std::sync::Arc;

use crate::domain::{is_characteristic, DomainSpec, ExteriorBall, LevelSet};
use crate::error::{Error, Result};
use crate::fundamental::exponents;
use crate::group::{
    gauge_gradient, gauge_norm, group_compose, h_distance, h_distance_h1, heisenberg_hessian, horizontal_gradient,
    sigma_matrix, GroupPoint, SecondOrderData,
};
use crate::linalg::{eigen_sym, norm, SymmetricMatrix};
use crate::pucci::{pucci, Ellipticity, PucciSign};
use crate::radial::{radial_second_order, MonotonicityTag, RadialProfile};
use crate::sampling::euclidean_sphere;

/// Doubling budget for "large enough" constants.
pub const DOUBLING_BUDGET: usize = 60;

/// How the first-order bound is weighted in space.
#[derive(Clone)]
pub enum Weight {
    /// |H| ≤ K|p| + M.
    None,
    /// |H| ≤ K w|p| + M w² with w = |∇_Hρ(η₀⁻¹∘ξ)|.
    GaugeGradientAt(GroupPoint),
    /// |H| ≤ K w|p| + M w² with w = |∇_HΦ(ξ)|.
    LevelSetGradient(Arc<dyn LevelSet>),
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "None"),
            Self::GaugeGradientAt(p) => write!(f, "GaugeGradientAt({:?})", p.coords()),
            Self::LevelSetGradient(_) => write!(f, "LevelSetGradient"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FirstOrderBound {
    pub k: f64,
    pub m: f64,
    pub weight: Weight,
}

impl FirstOrderBound {
    pub fn new(k: f64, m: f64, weight: Weight) -> Result<Self> {
        if !(k >= 0.0 && m >= 0.0 && k.is_finite() && m.is_finite()) {
            return Err(Error::InvalidArgument(format!("K and M must be finite and nonnegative, got ({k}, {m})")));
        }
        Ok(Self { k, m, weight })
    }

    pub fn zero() -> Self {
        Self { k: 0.0, m: 0.0, weight: Weight::None }
    }

    /// w(ξ); `None` at the singular pole of a gauge weight.
    pub fn weight_at(&self, xi: &GroupPoint) -> Option<f64> {
        match &self.weight {
            Weight::None => Some(1.0),
            Weight::GaugeGradientAt(eta) => {
                let z = group_compose(&eta.inverse(), xi).ok()?;
                gauge_gradient(&z).ok().map(|g| norm(&g))
            }
            Weight::LevelSetGradient(ls) => {
                let d = ls.second_order(xi);
                Some(norm(&horizontal_gradient(&d, xi)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    ExteriorBall,
    AnnulusOuter,
    AnnulusInner,
    GlobalSuper,
    LocalNoncharacteristic,
    Glued,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BarrierParams {
    ExteriorBall { xi0: GroupPoint, eta0: GroupPoint, r0: f64, psi0: f64, eps: f64, k: f64, beta: f64 },
    AnnulusOuter { eta0: GroupPoint, r2: f64, alpha: f64, beta: f64, c: f64 },
    AnnulusInner { eta0: GroupPoint, r1: f64, r2: f64, alpha: f64, beta: f64, alpha_bound: f64 },
    GlobalSuper { k: f64, mu: f64, beta_const: f64, doublings: usize },
    LocalNoncharacteristic { xi0: GroupPoint, mu: f64, alpha_q: f64, radius: f64 },
    Glued { xi0: GroupPoint, psi0: f64, eps: f64, tau: f64, radius: f64 },
}

#[derive(Clone)]
enum Repr {
    Radial { profile: RadialProfile, pole: GroupPoint },
    Global { k: f64, mu: f64, beta_const: f64 },
    Local { level: Arc<dyn LevelSet>, xi0: GroupPoint, mu: f64, alpha_q: f64 },
    Glued { lift: f64, tau: f64, w: Box<BarrierFunction>, w1: Box<BarrierFunction>, xi0: GroupPoint, radius: f64 },
}

/// An upper barrier b, or the lower barrier −b.
#[derive(Clone)]
pub struct BarrierFunction {
    pub kind: BarrierKind,
    pub side: Side,
    pub params: BarrierParams,
    repr: Repr,
}

impl fmt::Debug for BarrierFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierFunction")
            .field("kind", &self.kind)
            .field("side", &self.side)
            .field("params", &self.params)
            .finish()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl BarrierFunction {
    fn sign(&self) -> f64 {
        match self.side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }

    /// The mirrored barrier −b.
    pub fn negated(&self) -> Self {
        let mut b = self.clone();
        b.side = match self.side {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        };
        b
    }

    fn upper_value(&self, xi: &GroupPoint) -> f64 {
        match &self.repr {
            Repr::Radial { profile, pole } => {
                let r = gauge_norm(&group_compose(&pole.inverse(), xi).expect("same group"));
                profile.value(r)
            }
            Repr::Global { k, mu, beta_const } => {
                let s: f64 = xi.coords().iter().map(|a| a * a).sum();
                k * (beta_const - (mu * s / 2.0).exp())
            }
            Repr::Local { level, xi0, mu, alpha_q } => {
                let s = level.value(xi) + 0.5 * alpha_q * sq_dist(xi.coords(), xi0.coords());
                1.0 - (-mu * s).exp()
            }
            Repr::Glued { lift, tau, w, w1, xi0, radius } => {
                let outer = w1.upper_value(xi);
                if sq_dist(xi.coords(), xi0.coords()) <= radius * radius {
                    outer.min(lift + tau * w.upper_value(xi))
                } else {
                    outer
                }
            }
        }
    }

    pub fn value(&self, xi: &GroupPoint) -> f64 {
        self.sign() * self.upper_value(xi)
    }

    /// Fast value for n = 1.
    pub fn value_h1(&self, p: [f64; 3]) -> f64 {
        match &self.repr {
            Repr::Radial { profile, pole } => {
                let c = pole.coords();
                self.sign() * profile.value(h_distance_h1(p, [c[0], c[1], c[2]]))
            }
            _ => self.value(&GroupPoint::h1(p[0], p[1], p[2])),
        }
    }

    fn upper_second_order(&self, xi: &GroupPoint) -> Result<SecondOrderData> {
        match &self.repr {
            Repr::Radial { profile, pole } => radial_second_order(profile, pole, xi),
            Repr::Global { k, mu, beta_const } => {
                let c = xi.coords();
                let s: f64 = c.iter().map(|a| a * a).sum();
                let e = (mu * s / 2.0).exp();
                let dim = c.len();
                Ok(SecondOrderData {
                    value: k * (beta_const - e),
                    euclid_gradient: c.iter().map(|a| -k * mu * e * a).collect(),
                    euclid_hessian: SymmetricMatrix::from_fn(dim, |i, j| {
                        -k * mu * e * (mu * c[i] * c[j] + if i == j { 1.0 } else { 0.0 })
                    }),
                })
            }
            Repr::Local { level, xi0, mu, alpha_q } => {
                let d = level.second_order(xi);
                let c = xi.coords();
                let c0 = xi0.coords();
                let grad: Vec<f64> =
                    d.euclid_gradient.iter().enumerate().map(|(i, g)| g + alpha_q * (c[i] - c0[i])).collect();
                let s = d.value + 0.5 * alpha_q * sq_dist(c, c0);
                let e = (-mu * s).exp();
                let dim = c.len();
                let hess = SymmetricMatrix::from_fn(dim, |i, j| {
                    let hs = d.euclid_hessian.get(i, j) + if i == j { *alpha_q } else { 0.0 };
                    mu * e * (hs - mu * grad[i] * grad[j])
                });
                Ok(SecondOrderData {
                    value: 1.0 - e,
                    euclid_gradient: grad.iter().map(|g| mu * e * g).collect(),
                    euclid_hessian: hess,
                })
            }
            Repr::Glued { lift, tau, w, w1, xi0, radius } => {
                let outer = w1.upper_second_order(xi)?;
                if sq_dist(xi.coords(), xi0.coords()) <= radius * radius {
                    let inner = w.upper_second_order(xi)?.affine(*tau, *lift);
                    if inner.value < outer.value {
                        return Ok(inner);
                    }
                }
                Ok(outer)
            }
        }
    }

    /// Value and Euclidean derivatives of the active smooth piece.
    pub fn second_order(&self, xi: &GroupPoint) -> Result<SecondOrderData> {
        let d = self.upper_second_order(xi)?;
        Ok(match self.side {
            Side::Upper => d,
            Side::Lower => d.neg(),
        })
    }
}

fn radial_barrier(
    kind: BarrierKind,
    params: BarrierParams,
    pole: GroupPoint,
    profile: RadialProfile,
) -> BarrierFunction {
    BarrierFunction { kind, side: Side::Upper, params, repr: Repr::Radial { profile, pole } }
}

/// f̄(ξ) = ψ(ξ₀) + ε + k(r₀^{2−β} − d_H(ξ, η₀)^{2−β}).
pub fn exterior_ball_barrier(
    ball: &ExteriorBall,
    psi0: f64,
    eps: f64,
    k: f64,
    e: &Ellipticity,
    domain: Option<&DomainSpec>,
) -> Result<BarrierFunction> {
    if !(eps > 0.0) || !(k >= 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!("need eps > 0 and finite k >= 0, got ({eps}, {k})")));
    }
    let d = h_distance(&ball.xi0, &ball.eta0)?;
    if (d - ball.r0).abs() > 1e-9 * (1.0 + ball.r0) {
        return Err(Error::Barrier(format!("d_H(xi0, eta0) = {d} differs from r0 = {}", ball.r0)));
    }
    if let Some(dom) = domain {
        if dom.contains(&ball.eta0) {
            return Err(Error::Barrier("exterior ball center lies inside the domain".into()));
        }
        let pen = crate::domain::ball_penetration(dom, ball, &crate::sampling::SphereSampling::new(21, 48))?;
        if pen > 1e-9 * (1.0 + ball.r0) {
            return Err(Error::Barrier(format!("ball intersects the domain (penetration {pen:e})")));
        }
    }
    let beta = exponents(e, ball.xi0.n()).beta;
    let p = 2.0 - beta;
    let offset = psi0 + eps + k * ball.r0.powf(p);
    let profile = RadialProfile::power(-k, p, offset, MonotonicityTag::ConcaveIncreasing);
    Ok(radial_barrier(
        BarrierKind::ExteriorBall,
        BarrierParams::ExteriorBall { xi0: ball.xi0.clone(), eta0: ball.eta0.clone(), r0: ball.r0, psi0, eps, k, beta },
        ball.eta0.clone(),
        profile,
    ))
}

/// v(ξ) = r₀^{2−β} − d_H(ξ, η₀)^{2−β}, the unit exterior-ball profile.
pub fn exterior_ball_profile(ball: &ExteriorBall, beta: f64, xi: &GroupPoint) -> Result<f64> {
    let p = 2.0 - beta;
    Ok(ball.r0.powf(p) - h_distance(xi, &ball.eta0)?.powf(p))
}

/// Smallest k with k·v ≥ 2 sup|ψ| at boundary samples outside the δ collar around ξ₀.
pub fn barrier_gain(ball: &ExteriorBall, beta: f64, boundary: &[GroupPoint], psi_sup: f64, delta: f64) -> Result<f64> {
    let mut vmin = f64::INFINITY;
    for p in boundary {
        if h_distance(p, &ball.xi0)? >= delta {
            vmin = vmin.min(exterior_ball_profile(ball, beta, p)?);
        }
    }
    if vmin == f64::INFINITY || psi_sup == 0.0 {
        return Ok(0.0);
    }
    if !(vmin > 0.0) {
        return Err(Error::Barrier(format!(
            "exterior-ball profile is {vmin:e} at a boundary sample outside the collar"
        )));
    }
    Ok(2.0 * psi_sup / vmin)
}

/// Largest observed |ψ(a) − ψ(b)| / d_H(a, b) over sample pairs.
pub fn estimate_lipschitz(points: &[GroupPoint], values: &[f64]) -> Result<f64> {
    let mut l = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = h_distance(&points[i], &points[j])?;
            if d > 1e-12 {
                l = l.max((values[i] - values[j]).abs() / d);
            }
        }
    }
    Ok(l)
}

/// δ_ε = ε / (2L) for a d_H-Lipschitz datum (infinite when ψ is constant).
pub fn collar_radius(eps: f64, lipschitz: f64) -> f64 {
    if lipschitz > 0.0 {
        eps / (2.0 * lipschitz)
    } else {
        f64::INFINITY
    }
}

/// Pointwise inf (upper) or sup (lower) of a barrier family.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub members: Vec<BarrierFunction>,
    pub side: Side,
}

pub fn envelope(barriers: Vec<BarrierFunction>, side: Side) -> Result<Envelope> {
    if barriers.is_empty() {
        return Err(Error::InvalidArgument("envelope of an empty family".into()));
    }
    Ok(Envelope { members: barriers, side })
}

impl Envelope {
    pub fn value(&self, xi: &GroupPoint) -> f64 {
        let it = self.members.iter().map(|b| b.value(xi));
        match self.side {
            Side::Upper => it.fold(f64::INFINITY, f64::min),
            Side::Lower => it.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn value_h1(&self, p: [f64; 3]) -> f64 {
        let it = self.members.iter().map(|b| b.value_h1(p));
        match self.side {
            Side::Upper => it.fold(f64::INFINITY, f64::min),
            Side::Lower => it.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Constants of the outer exponential barrier: α = K²/(2λ²Q) (α = 1 when K = 0),
/// C = inf_{ρ≥0}(λQ + λαρ² − Kρ) = λQ − K²/(4λα), β = M/(αC) (β = 1 when M = 0).
pub fn annulus_outer_constants(fb: &FirstOrderBound, e: &Ellipticity, n: usize) -> (f64, f64, f64) {
    let l = e.lambda();
    let q = (2 * n + 2) as f64;
    let alpha = if fb.k > 0.0 { fb.k * fb.k / (2.0 * l * l * q) } else { 1.0 };
    let c = l * q - fb.k * fb.k / (4.0 * l * alpha);
    let beta = if fb.m > 0.0 { fb.m / (alpha * c) } else { 1.0 };
    (alpha, beta, c)
}

/// u̅₂(ξ) = β(e^{αR₂²/2} − e^{αρ²/2}), ρ = ρ(η₀⁻¹∘ξ), with explicit constants.
pub fn annulus_outer_from_constants(eta0: GroupPoint, r2: f64, alpha: f64, beta: f64) -> Result<BarrierFunction> {
    if !(r2 > 0.0) {
        return Err(Error::InvalidArgument(format!("R2 must be positive, got {r2}")));
    }
    let top = (alpha * r2 * r2 / 2.0).exp();
    let profile = RadialProfile::from_fns(
        move |r| beta * (top - (alpha * r * r / 2.0).exp()),
        move |r| -beta * alpha * r * (alpha * r * r / 2.0).exp(),
        move |r| -beta * alpha * (1.0 + alpha * r * r) * (alpha * r * r / 2.0).exp(),
        MonotonicityTag::None,
    );
    let c = f64::NAN;
    Ok(radial_barrier(
        BarrierKind::AnnulusOuter,
        BarrierParams::AnnulusOuter { eta0: eta0.clone(), r2, alpha, beta, c },
        eta0,
        profile,
    ))
}

pub fn annulus_outer_barrier(
    eta0: GroupPoint,
    r2: f64,
    fb: &FirstOrderBound,
    e: &Ellipticity,
) -> Result<BarrierFunction> {
    let (alpha, beta, c) = annulus_outer_constants(fb, e, eta0.n());
    let mut b = annulus_outer_from_constants(eta0, r2, alpha, beta)?;
    if let BarrierParams::AnnulusOuter { c: slot, .. } = &mut b.params {
        *slot = c;
    }
    Ok(b)
}

/// The bound α ≥ R₂²((KR₂ + Λ(2n+1) + MR₂⁴)/λ − 3).
pub fn annulus_inner_alpha_bound(r2: f64, fb: &FirstOrderBound, e: &Ellipticity, n: usize) -> f64 {
    let nn = (2 * n + 1) as f64;
    r2 * r2 * ((fb.k * r2 + e.big_lambda() * nn + fb.m * r2.powi(4)) / e.lambda() - 3.0)
}

/// u̅₁(ξ) = β(e^{α/(2R₁²)} − e^{α/(2ρ²)}) with explicit constants.
pub fn annulus_inner_from_constants(
    eta0: GroupPoint,
    r1: f64,
    r2: f64,
    alpha: f64,
    beta: f64,
) -> Result<BarrierFunction> {
    if !(r1 > 0.0) || r1 > r2 {
        return Err(Error::InvalidArgument(format!("need 0 < R1 <= R2, got ({r1}, {r2})")));
    }
    let base = (alpha / (2.0 * r1 * r1)).exp();
    let profile = RadialProfile::from_fns(
        move |r| beta * (base - (alpha / (2.0 * r * r)).exp()),
        move |r| beta * alpha / r.powi(3) * (alpha / (2.0 * r * r)).exp(),
        move |r| -beta * alpha / r.powi(4) * (3.0 + alpha / (r * r)) * (alpha / (2.0 * r * r)).exp(),
        MonotonicityTag::ConcaveIncreasing,
    );
    Ok(radial_barrier(
        BarrierKind::AnnulusInner,
        BarrierParams::AnnulusInner { eta0: eta0.clone(), r1, r2, alpha, beta, alpha_bound: f64::NAN },
        eta0,
        profile,
    ))
}

/// u̅₁ with α the bound above (α = 1 when the bound is not positive) and β = 1/α.
pub fn annulus_inner_barrier(
    eta0: GroupPoint,
    r1: f64,
    r2: f64,
    fb: &FirstOrderBound,
    e: &Ellipticity,
) -> Result<BarrierFunction> {
    let bound = annulus_inner_alpha_bound(r2, fb, e, eta0.n());
    let alpha = if bound > 0.0 { bound } else { 1.0 };
    let mut b = annulus_inner_from_constants(eta0, r1, r2, alpha, 1.0 / alpha)?;
    if let BarrierParams::AnnulusInner { alpha_bound, .. } = &mut b.params {
        *alpha_bound = bound;
    }
    Ok(b)
}

/// Residual summary of a barrier against its inequality on a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSummary {
    pub min: f64,
    /// min over samples of residual / local scale.
    pub min_relative: f64,
    pub argmin: Option<GroupPoint>,
    /// Largest local scale (|eigenvalues| and first-order terms).
    pub scale: f64,
    pub evaluated: usize,
    /// Samples skipped at poles.
    pub skipped: usize,
}

/// Upper: M̃⁻(D²b) − K w|∇_H b| − M w². Lower: −(M̃⁺(D²b) + K w|∇_H b| + M w²).
/// Both are ≥ 0 for a valid barrier.
pub fn pointwise_residual(
    b: &BarrierFunction,
    e: &Ellipticity,
    fb: &FirstOrderBound,
    xi: &GroupPoint,
) -> Result<(f64, f64)> {
    let d = b.second_order(xi)?;
    let w = fb.weight_at(xi).ok_or_else(|| Error::Singular("weight undefined at the pole".into()))?;
    let h = heisenberg_hessian(&d, xi);
    let g = norm(&horizontal_gradient(&d, xi));
    let first = fb.k * w * g + fb.m * w * w;
    let scale = eigen_sym(&h).eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())) + first;
    let r = match b.side {
        Side::Upper => pucci(&h, e, PucciSign::Minus) - first,
        Side::Lower => -(pucci(&h, e, PucciSign::Plus) + first),
    };
    Ok((r, scale))
}

pub fn supersolution_residual(
    b: &BarrierFunction,
    e: &Ellipticity,
    fb: &FirstOrderBound,
    region: &[GroupPoint],
) -> ResidualSummary {
    let mut out = ResidualSummary {
        min: f64::INFINITY,
        min_relative: f64::INFINITY,
        argmin: None,
        scale: 0.0,
        evaluated: 0,
        skipped: 0,
    };
    for xi in region {
        match pointwise_residual(b, e, fb, xi) {
            Ok((r, s)) => {
                out.evaluated += 1;
                out.scale = out.scale.max(s);
                if r < out.min {
                    out.min = r;
                    out.argmin = Some(xi.clone());
                }
                let rel = if s > 0.0 {
                    r / s
                } else if r >= 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                };
                out.min_relative = out.min_relative.min(rel);
            }
            Err(_) => out.skipped += 1,
        }
    }
    out
}

/// Uniform lattice with `per_axis` points per axis in the box `lo..hi`.
pub fn box_lattice(n: usize, lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<GroupPoint> {
    let dim = 2 * n + 1;
    let total = per_axis.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut c = vec![0.0; dim];
            for k in 0..dim {
                let i = idx % per_axis;
                idx /= per_axis;
                c[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1).max(1) as f64;
            }
            GroupPoint::new(n, c).expect("lattice point")
        })
        .collect()
}

/// w₁ = k(β − exp(μ|ξ|²/2)). μ is doubled until the residual of M̃⁻ − K w|∇_H·| − M w² is
/// nonnegative on a lattice over the box. β is checked (or chosen, when `None`) against
/// sup over the boundary data of |ψ| + exp(μ|ξ|²/2) for the final μ.
#[allow(clippy::too_many_arguments)]
pub fn global_supersolution(
    k: f64,
    mu: f64,
    beta_const: Option<f64>,
    boundary: &[(GroupPoint, f64)],
    e: &Ellipticity,
    fb: &FirstOrderBound,
    lo: &[f64],
    hi: &[f64],
) -> Result<BarrierFunction> {
    if lo.iter().chain(hi).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("bounding box must be finite".into()));
    }
    if !(k >= 1.0) || !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("need k >= 1 and mu > 0, got ({k}, {mu})")));
    }
    let n = (lo.len() - 1) / 2;
    let per_axis = if n == 1 { 13 } else { 5 };
    let grid = box_lattice(n, lo, hi, per_axis);
    let mut mu = mu;
    for doublings in 0..=DOUBLING_BUDGET {
        let trial = BarrierFunction {
            kind: BarrierKind::GlobalSuper,
            side: Side::Upper,
            params: BarrierParams::GlobalSuper { k, mu, beta_const: 0.0, doublings },
            repr: Repr::Global { k, mu, beta_const: 0.0 },
        };
        let r = supersolution_residual(&trial, e, fb, &grid);
        if r.min >= 0.0 {
            let need = boundary
                .iter()
                .map(|(p, v)| v.abs() + (mu * p.coords().iter().map(|a| a * a).sum::<f64>() / 2.0).exp())
                .fold(0.0f64, f64::max);
            let beta_const = match beta_const {
                Some(b) if b < need => {
                    return Err(Error::Precondition(format!(
                        "beta_const = {b} is below sup(|psi| + exp(mu|xi|^2/2)) = {need} for mu = {mu}"
                    )))
                }
                Some(b) => b,
                None => need,
            };
            return Ok(BarrierFunction {
                kind: BarrierKind::GlobalSuper,
                side: Side::Upper,
                params: BarrierParams::GlobalSuper { k, mu, beta_const, doublings },
                repr: Repr::Global { k, mu, beta_const },
            });
        }
        mu *= 2.0;
    }
    Err(Error::Budget(format!("no admissible mu after {DOUBLING_BUDGET} doublings")))
}

/// W(ξ) = 1 − exp(−μ(Φ(ξ) + α|ξ − ξ₀|²/2)) at a non-characteristic boundary point.
///
/// μ is doubled until the residual of M̃⁻ − K|∇_H·| − M at ξ₀ is at least (μ²/4)λ|∇_HΦ(ξ₀)|²,
/// then the radius R is halved until the residual is nonnegative on samples of B(ξ₀, R) ∩ Ω.
pub fn noncharacteristic_local_barrier(
    domain: &DomainSpec,
    xi0: &GroupPoint,
    mu: f64,
    alpha_q: f64,
    e: &Ellipticity,
    fb: &FirstOrderBound,
) -> Result<BarrierFunction> {
    if !(mu > 0.0) || !(alpha_q >= 0.0) {
        return Err(Error::InvalidArgument(format!("need mu > 0 and alpha >= 0, got ({mu}, {alpha_q})")));
    }
    let d = domain.level_set.second_order(xi0);
    let gh = norm(&sigma_matrix(xi0).apply(&d.euclid_gradient));
    if is_characteristic(domain, xi0, 1e-10 * norm(&d.euclid_gradient).max(1.0))? {
        return Err(Error::Precondition(
            "point is characteristic; use the annulus barrier at its exterior ball".into(),
        ));
    }
    let build = |mu: f64, radius: f64| BarrierFunction {
        kind: BarrierKind::LocalNoncharacteristic,
        side: Side::Upper,
        params: BarrierParams::LocalNoncharacteristic { xi0: xi0.clone(), mu, alpha_q, radius },
        repr: Repr::Local { level: domain.level_set.clone(), xi0: xi0.clone(), mu, alpha_q },
    };
    let local = FirstOrderBound { k: fb.k, m: fb.m, weight: Weight::None };
    let mut mu = mu;
    let mut found = false;
    for _ in 0..=DOUBLING_BUDGET {
        let (r, _) = pointwise_residual(&build(mu, 0.0), e, &local, xi0)?;
        if r >= 0.25 * mu * mu * e.lambda() * gh * gh {
            found = true;
            break;
        }
        mu *= 2.0;
    }
    if !found {
        return Err(Error::Budget(format!("no admissible mu after {DOUBLING_BUDGET} doublings")));
    }
    let extent = domain.lo.iter().zip(&domain.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let mut radius = 0.5 * extent;
    for _ in 0..=DOUBLING_BUDGET {
        let b = build(mu, radius);
        let pts: Vec<GroupPoint> =
            euclidean_sphere(xi0, radius, 400, 0xba77, true).into_iter().filter(|p| domain.value(p) > 0.0).collect();
        let r = supersolution_residual(&b, e, &local, &pts);
        if r.min >= 0.0 {
            return Ok(b);
        }
        radius *= 0.5;
    }
    Err(Error::Budget("no neighborhood with nonnegative residual found".into()))
}

/// w(ξ) = min{ψ(ξ₀) + ε + τW(ξ), w₁(ξ)} in the Euclidean ball B(ξ₀, R), w₁ outside.
/// τ is doubled until ψ(ξ₀) + ε + τW ≥ w₁ on samples of the sphere |ξ − ξ₀| = R inside Ω̄,
/// and ψ(ξ₀) + ε + τW ≥ ψ at the given boundary data inside the ball.
#[allow(clippy::too_many_arguments)]
pub fn glue_barrier(
    w: &BarrierFunction,
    w1: &BarrierFunction,
    psi0: f64,
    eps: f64,
    tau: f64,
    radius: f64,
    xi0: &GroupPoint,
    domain: &DomainSpec,
    boundary: &[(GroupPoint, f64)],
) -> Result<BarrierFunction> {
    if !(radius > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("need R > 0 and tau > 0, got ({radius}, {tau})")));
    }
    let seam: Vec<GroupPoint> =
        euclidean_sphere(xi0, radius, 1000, 0x5ea3, false).into_iter().filter(|p| domain.value(p) >= 0.0).collect();
    let lift = psi0 + eps;
    let mut tau = tau;
    for _ in 0..=DOUBLING_BUDGET {
        let worst = seam
            .iter()
            .map(|p| lift + tau * w.value(p) - w1.value(p))
            .chain(
                boundary
                    .iter()
                    .filter(|(p, _)| sq_dist(p.coords(), xi0.coords()) <= radius * radius)
                    .map(|(p, v)| lift + tau * w.value(p) - v),
            )
            .fold(f64::INFINITY, f64::min);
        if worst >= 0.0 {
            return Ok(BarrierFunction {
                kind: BarrierKind::Glued,
                side: Side::Upper,
                params: BarrierParams::Glued { xi0: xi0.clone(), psi0, eps, tau, radius },
                repr: Repr::Glued {
                    lift,
                    tau,
                    w: Box::new(w.clone()),
                    w1: Box::new(w1.clone()),
                    xi0: xi0.clone(),
                    radius,
                },
            });
        }
        tau *= 2.0;
    }
    Err(Error::Budget(format!("seam mismatch persists after {DOUBLING_BUDGET} doublings of tau")))
}

/// Approach to a characteristic point.
#[derive(Debug, Clone)]
pub enum ApproachPath {
    /// ξ₀ + s·d for the given parameters s; d defaults to the normalized sum of the interior
    /// normal and a horizontal coordinate direction.
    Segment {
        direction: Option<Vec<f64>>,
        params: Vec<f64>,
    },
    Points(Vec<GroupPoint>),
}

impl ApproachPath {
    /// s ∈ {s_max·2^{-k} : k = 0..levels}.
    pub fn dyadic(s_max: f64, levels: usize) -> Self {
        Self::Segment { direction: None, params: (0..levels).map(|k| s_max * 0.5f64.powi(k as i32)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioProfile {
    pub params: Vec<f64>,
    pub points: Vec<GroupPoint>,
    pub ratios: Vec<f64>,
    pub sup: f64,
    /// The ratio at the point closest to ξ₀.
    pub limit_estimate: f64,
    /// |last − second to last|.
    pub convergence: f64,
    pub unbounded: bool,
}

/// |∇_HΦ(ξ)| / |∇_Hρ(η₀⁻¹∘ξ)| along an approach to the characteristic point ξ₀.
pub fn characteristic_ratio(
    domain: &DomainSpec,
    xi0: &GroupPoint,
    eta0: &GroupPoint,
    path: &ApproachPath,
) -> Result<RatioProfile> {
    let d0 = domain.level_set.second_order(xi0);
    let gnorm = norm(&d0.euclid_gradient);
    if !is_characteristic(domain, xi0, 1e-10 * gnorm.max(1.0))? {
        return Err(Error::Precondition("point is not characteristic".into()));
    }
    let (params, points): (Vec<f64>, Vec<GroupPoint>) = match path {
        ApproachPath::Points(p) => ((0..p.len()).map(|i| i as f64).collect(), p.clone()),
        ApproachPath::Segment { direction, params } => {
            let dim = xi0.coords().len();
            let dir = match direction {
                Some(d) if d.len() == dim => d.clone(),
                Some(_) => return Err(Error::DimensionMismatch("approach direction length".into())),
                None => {
                    let nu: Vec<f64> = d0.euclid_gradient.iter().map(|g| g / gnorm).collect();
                    let axis = if nu[0].abs() < 0.9 { 0 } else { 1 };
                    let mut d = nu;
                    d[axis] += 1.0;
                    d
                }
            };
            let dn = norm(&dir);
            let pts = params
                .iter()
                .map(|s| {
                    let c = xi0.coords().iter().zip(&dir).map(|(a, b)| a + s * b / dn).collect();
                    GroupPoint::new(xi0.n(), c)
                })
                .collect::<Result<Vec<_>>>()?;
            (params.clone(), pts)
        }
    };
    let mut ratios = Vec::with_capacity(points.len());
    let mut unbounded = false;
    for p in &points {
        let d = domain.level_set.second_order(p);
        if !(d.value >= -1e-12 * gnorm.max(1.0)) {
            return Err(Error::Precondition(format!("approach path leaves the closed domain at {:?}", p.coords())));
        }
        let num = norm(&horizontal_gradient(&d, p));
        let z = group_compose(&eta0.inverse(), p)?;
        let den = gauge_gradient(&z).map(|g| norm(&g)).unwrap_or(0.0);
        if den < 1e-14 {
            if num > 1e-12 {
                unbounded = true;
                ratios.push(f64::INFINITY);
            } else {
                ratios.push(f64::NAN);
            }
            continue;
        }
        ratios.push(num / den);
    }
    let finite: Vec<(usize, f64)> = ratios.iter().copied().enumerate().filter(|(_, r)| r.is_finite()).collect();
    let sup = ratios.iter().copied().filter(|r| !r.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    // The point nearest ξ₀ (Euclidean) gives the limit estimate.
    let order: Vec<(usize, f64)> = {
        let mut v: Vec<(usize, f64)> =
            finite.iter().map(|&(i, _)| (i, sq_dist(points[i].coords(), xi0.coords()))).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    };
    let limit_estimate = order.first().map(|&(i, _)| ratios[i]).unwrap_or(f64::NAN);
    let convergence = if order.len() >= 2 { (ratios[order[0].0] - ratios[order[1].0]).abs() } else { f64::NAN };
    Ok(RatioProfile { params, points, ratios, sup, limit_estimate, convergence, unbounded })
}
