//! Domains Ω = {Φ > 0} given by a level-set function, with a registry of exterior gauge balls.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{dilate, gauge_norm, group_compose, h_distance, sigma_matrix, GroupPoint, SecondOrderData};
use crate::linalg::{dot, norm, SymmetricMatrix};
use crate::sampling::{gauge_sphere, SphereSampling};

/// A C² defining function Φ with Euclidean derivatives.
pub trait LevelSet: Send + Sync {
    fn second_order(&self, xi: &GroupPoint) -> SecondOrderData;

    fn value(&self, xi: &GroupPoint) -> f64 {
        self.second_order(xi).value
    }

    /// Fast value for n = 1 grid loops.
    fn value_h1(&self, p: [f64; 3]) -> f64 {
        self.value(&GroupPoint::h1(p[0], p[1], p[2]))
    }
}

/// Euclidean derivatives of ξ ↦ ρ⁴(c⁻¹∘ξ) = |ζ_H|⁴ + ζ_t², a polynomial.
pub fn gauge4_second_order(center: &GroupPoint, xi: &GroupPoint) -> SecondOrderData {
    let n = xi.n();
    let dim = 2 * n + 1;
    let z = group_compose(&center.inverse(), xi).expect("same group");
    let zc = z.coords();
    let r2: f64 = zc[..2 * n].iter().map(|a| a * a).sum();
    let mut gz = vec![0.0; dim];
    for i in 0..2 * n {
        gz[i] = 4.0 * r2 * zc[i];
    }
    gz[2 * n] = 2.0 * zc[2 * n];
    let hz = SymmetricMatrix::from_fn(dim, |i, j| {
        if i < 2 * n && j < 2 * n {
            8.0 * zc[i] * zc[j] + if i == j { 4.0 * r2 } else { 0.0 }
        } else if i == 2 * n && j == 2 * n {
            2.0
        } else {
            0.0
        }
    });
    // ζ_t = ξ_t − c_t − 2Σ ξ_i c_{i+n} + 2Σ ξ_{i+n} c_i; the Jacobian only adds a last row.
    let c = center.coords();
    let mut a = vec![0.0; dim];
    for i in 0..n {
        a[i] = -2.0 * c[i + n];
        a[i + n] = 2.0 * c[i];
    }
    let mut grad = gz.clone();
    for i in 0..2 * n {
        grad[i] += a[i] * gz[2 * n];
    }
    // Jᵀ H J with J = I + e_t aᵀ: H + a (H e_t)ᵀ + (H e_t) aᵀ + a aᵀ H_tt.
    let htt = hz.get(2 * n, 2 * n);
    let hess = SymmetricMatrix::from_fn(dim, |i, j| {
        let ai = if i < 2 * n { a[i] } else { 0.0 };
        let aj = if j < 2 * n { a[j] } else { 0.0 };
        hz.get(i, j) + ai * hz.get(2 * n, j) + aj * hz.get(i, 2 * n) + ai * aj * htt
    });
    SecondOrderData { value: r2 * r2 + zc[2 * n] * zc[2 * n], euclid_gradient: grad, euclid_hessian: hess }
}

/// Φ = R⁴ − ρ⁴(c⁻¹∘ξ).
#[derive(Debug, Clone)]
pub struct GaugeBallLevel {
    pub center: GroupPoint,
    pub radius: f64,
}

impl LevelSet for GaugeBallLevel {
    fn second_order(&self, xi: &GroupPoint) -> SecondOrderData {
        gauge4_second_order(&self.center, xi).affine(-1.0, self.radius.powi(4))
    }

    fn value_h1(&self, p: [f64; 3]) -> f64 {
        self.radius.powi(4) - gauge4_h1(&self.center, p)
    }
}

/// Φ = (ρ⁴ − R₁⁴)(R₂⁴ − ρ⁴) with ρ measured from the center.
#[derive(Debug, Clone)]
pub struct GaugeAnnulusLevel {
    pub center: GroupPoint,
    pub inner: f64,
    pub outer: f64,
}

impl LevelSet for GaugeAnnulusLevel {
    fn second_order(&self, xi: &GroupPoint) -> SecondOrderData {
        let s = gauge4_second_order(&self.center, xi);
        let (a, b) = (self.inner.powi(4), self.outer.powi(4));
        let f1 = a + b - 2.0 * s.value;
        SecondOrderData {
            value: (s.value - a) * (b - s.value),
            euclid_gradient: s.euclid_gradient.iter().map(|g| f1 * g).collect(),
            euclid_hessian: s.euclid_hessian.scale(f1).add(&SymmetricMatrix::outer(&s.euclid_gradient).scale(-2.0)),
        }
    }

    fn value_h1(&self, p: [f64; 3]) -> f64 {
        let s = gauge4_h1(&self.center, p);
        (s - self.inner.powi(4)) * (self.outer.powi(4) - s)
    }
}

fn gauge4_h1(center: &GroupPoint, p: [f64; 3]) -> f64 {
    let c = center.coords();
    let x = p[0] - c[0];
    let y = p[1] - c[1];
    let t = p[2] - c[2] - 2.0 * (p[0] * c[1] - p[1] * c[0]);
    let r2 = x * x + y * y;
    r2 * r2 + t * t
}

/// Φ = t − h(ξ_H) with h(ξ_H) = t₀(1 − √(1 − |ξ_H|⁴/t₀²)), t₀ < 0: the region above the
/// upper sheet of the gauge sphere of radius √|t₀| centered at (0, t₀). The origin is a
/// characteristic boundary point. Defined for |ξ_H|⁴ < t₀².
#[derive(Debug, Clone)]
pub struct CapLevel {
    pub t0: f64,
    pub n: usize,
}

impl LevelSet for CapLevel {
    fn second_order(&self, xi: &GroupPoint) -> SecondOrderData {
        let n = self.n;
        let dim = 2 * n + 1;
        let c = xi.coords();
        let t0 = self.t0;
        let r2: f64 = c[..2 * n].iter().map(|a| a * a).sum();
        let q = 1.0 - r2 * r2 / (t0 * t0);
        if !(q > 0.0) {
            return SecondOrderData {
                value: f64::NAN,
                euclid_gradient: vec![f64::NAN; dim],
                euclid_hessian: SymmetricMatrix::from_fn(dim, |_, _| f64::NAN),
            };
        }
        let sq = q.sqrt();
        let h = t0 * (1.0 - sq);
        // h = t0 − t0 √q, q = 1 − r⁴/t0²; ∂h/∂ξ_i = 2 r² ξ_i / (t0 √q).
        let k = 2.0 / (t0 * sq);
        let mut grad = vec![0.0; dim];
        for i in 0..2 * n {
            grad[i] = -k * r2 * c[i];
        }
        grad[2 * n] = 1.0;
        // ∂²h/∂ξ_i∂ξ_j = k (2 ξ_i ξ_j + r² δ_ij) + 4 r⁴ ξ_i ξ_j / (t0³ q^{3/2})
        let tail = 4.0 * r2 * r2 / (t0 * t0 * t0 * q * sq);
        let hess = SymmetricMatrix::from_fn(dim, |i, j| {
            if i == 2 * n || j == 2 * n {
                return 0.0;
            }
            let d = if i == j { r2 } else { 0.0 };
            -(k * (2.0 * c[i] * c[j] + d) + tail * c[i] * c[j])
        });
        SecondOrderData { value: c[2 * n] - h, euclid_gradient: grad, euclid_hessian: hess }
    }
}

/// Φ = ξ₁: the half-space {ξ₁ > 0}. No boundary point is characteristic.
#[derive(Debug, Clone)]
pub struct HalfSpaceLevel {
    pub n: usize,
}

impl LevelSet for HalfSpaceLevel {
    fn second_order(&self, xi: &GroupPoint) -> SecondOrderData {
        let dim = 2 * self.n + 1;
        let mut g = vec![0.0; dim];
        g[0] = 1.0;
        SecondOrderData { value: xi.coords()[0], euclid_gradient: g, euclid_hessian: SymmetricMatrix::zeros(dim) }
    }
}

/// A level set from closures (value, gradient, Hessian).
pub struct ClosureLevel {
    pub f: Box<dyn Fn(&GroupPoint) -> SecondOrderData + Send + Sync>,
}

impl LevelSet for ClosureLevel {
    fn second_order(&self, xi: &GroupPoint) -> SecondOrderData {
        (self.f)(xi)
    }
}

/// Gauge ball B_{r₀}(η₀) touching ∂Ω from outside at ξ₀.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorBall {
    pub xi0: GroupPoint,
    pub eta0: GroupPoint,
    pub r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    GaugeBall,
    GaugeAnnulus,
    LevelSetGeneral,
}

#[derive(Clone)]
pub struct DomainSpec {
    pub n: usize,
    pub level_set: Arc<dyn LevelSet>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub exterior_balls: Vec<ExteriorBall>,
    pub kind: DomainKind,
    /// Center and radii for gauge balls (inner = 0) and annuli.
    pub gauge: Option<(GroupPoint, f64, f64)>,
}

impl fmt::Debug for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainSpec")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("exterior_balls", &self.exterior_balls.len())
            .finish()
    }
}

fn gauge_bbox(center: &GroupPoint, r: f64) -> (Vec<f64>, Vec<f64>) {
    let n = center.n();
    let c = center.coords();
    let ch = norm(&c[..2 * n]);
    let mut lo: Vec<f64> = c[..2 * n].iter().map(|v| v - r).collect();
    let mut hi: Vec<f64> = c[..2 * n].iter().map(|v| v + r).collect();
    lo.push(c[2 * n] - r * r - 2.0 * r * ch);
    hi.push(c[2 * n] + r * r + 2.0 * r * ch);
    (lo, hi)
}

fn vertical(n: usize, t: f64) -> GroupPoint {
    let mut c = vec![0.0; 2 * n + 1];
    c[2 * n] = t;
    GroupPoint::new(n, c).expect("valid dimension")
}

impl DomainSpec {
    /// Open gauge ball of radius R, with exterior balls of radius R/2 at both poles.
    pub fn gauge_ball(center: GroupPoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
        }
        let n = center.n();
        let (lo, hi) = gauge_bbox(&center, radius);
        let r = radius / 2.0;
        let mut balls = Vec::new();
        for s in [-1.0, 1.0] {
            balls.push(ExteriorBall {
                xi0: group_compose(&center, &vertical(n, s * radius * radius))?,
                eta0: group_compose(&center, &vertical(n, s * (radius * radius + r * r)))?,
                r0: r,
            });
        }
        Ok(Self {
            n,
            level_set: Arc::new(GaugeBallLevel { center: center.clone(), radius }),
            lo,
            hi,
            exterior_balls: balls,
            kind: DomainKind::GaugeBall,
            gauge: Some((center, 0.0, radius)),
        })
    }

    /// Gauge annulus R₁ < ρ < R₂ with exterior balls at the four poles.
    pub fn gauge_annulus(center: GroupPoint, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::InvalidArgument(format!("need 0 < R1 < R2, got ({inner}, {outer})")));
        }
        let n = center.n();
        let (lo, hi) = gauge_bbox(&center, outer);
        let (ro, ri) = (outer / 2.0, inner / 2.0);
        let mut balls = Vec::new();
        for s in [-1.0, 1.0] {
            balls.push(ExteriorBall {
                xi0: group_compose(&center, &vertical(n, s * outer * outer))?,
                eta0: group_compose(&center, &vertical(n, s * (outer * outer + ro * ro)))?,
                r0: ro,
            });
            balls.push(ExteriorBall {
                xi0: group_compose(&center, &vertical(n, s * inner * inner))?,
                eta0: group_compose(&center, &vertical(n, s * (inner * inner - ri * ri)))?,
                r0: ri,
            });
        }
        Ok(Self {
            n,
            level_set: Arc::new(GaugeAnnulusLevel { center: center.clone(), inner, outer }),
            lo,
            hi,
            exterior_balls: balls,
            kind: DomainKind::GaugeAnnulus,
            gauge: Some((center, inner, outer)),
        })
    }

    /// General level-set domain inside the box `lo..hi`.
    pub fn level_set(
        n: usize,
        level_set: Arc<dyn LevelSet>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        exterior_balls: Vec<ExteriorBall>,
    ) -> Result<Self> {
        if lo.len() != 2 * n + 1 || hi.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch("bounding box needs 2n+1 ranges".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidArgument("bounding box must be finite and nonempty".into()));
        }
        Ok(Self { n, level_set, lo, hi, exterior_balls, kind: DomainKind::LevelSetGeneral, gauge: None })
    }

    /// The region above the upper sheet of the gauge sphere of radius √|t₀| about (0, t₀),
    /// restricted to |ξ_H| ≤ half of its horizontal extent, with the tangent ball registered
    /// at the characteristic point 0.
    pub fn characteristic_cap(n: usize, t0: f64) -> Result<Self> {
        if !(t0 < 0.0) {
            return Err(Error::InvalidArgument(format!("need t0 < 0, got {t0}")));
        }
        let a = 0.5 * t0.abs().sqrt();
        let mut lo = vec![-a; 2 * n];
        let mut hi = vec![a; 2 * n];
        lo.push(-t0.abs());
        hi.push(t0.abs());
        let ball = ExteriorBall { xi0: GroupPoint::origin(n), eta0: vertical(n, t0), r0: t0.abs().sqrt() };
        Self::level_set(n, Arc::new(CapLevel { t0, n }), lo, hi, vec![ball])
    }

    pub fn value(&self, xi: &GroupPoint) -> f64 {
        self.level_set.value(xi)
    }

    pub fn contains(&self, xi: &GroupPoint) -> bool {
        self.value(xi) > 0.0
    }

    /// Newton projection onto Φ = 0 along ∇Φ; approximates the closest boundary point.
    pub fn project_to_boundary(&self, xi: &GroupPoint) -> Result<GroupPoint> {
        let mut q = xi.clone();
        for _ in 0..60 {
            let d = self.level_set.second_order(&q);
            let g2 = dot(&d.euclid_gradient, &d.euclid_gradient);
            if !d.value.is_finite() || g2 == 0.0 || !g2.is_finite() {
                return Err(Error::Precondition("level set is degenerate near the point".into()));
            }
            if d.value.abs() <= 1e-13 * g2.sqrt().max(1.0) {
                return Ok(q);
            }
            let step = d.value / g2;
            let c: Vec<f64> = q.coords().iter().zip(&d.euclid_gradient).map(|(a, g)| a - step * g).collect();
            q = GroupPoint::new(self.n, c)?;
        }
        let v = self.value(&q);
        if v.abs() <= 1e-9 {
            Ok(q)
        } else {
            Err(Error::Precondition(format!("projection onto the boundary did not converge (|Phi| = {v:e})")))
        }
    }

    /// Quasi-uniform points on ∂Ω. Gauge domains use sphere lattices; general level sets
    /// (n = 1) project sign changes of Φ on a lattice with the given spacing.
    pub fn boundary_samples(&self, spacing: f64) -> Result<Vec<GroupPoint>> {
        if let Some((center, inner, outer)) = &self.gauge {
            let mut pts = Vec::new();
            for r in [*inner, *outer] {
                if r > 0.0 {
                    let lat = ((std::f64::consts::PI * r / spacing).ceil() as usize).max(3);
                    let lon = ((2.0 * std::f64::consts::PI * r / spacing).ceil() as usize).max(4);
                    pts.extend(gauge_sphere(center, r, &SphereSampling::new(lat, lon))?);
                }
            }
            return Ok(pts);
        }
        if self.n != 1 {
            return Err(Error::Precondition("lattice boundary sampling is implemented for n = 1".into()));
        }
        let dims: Vec<usize> = (0..3).map(|k| ((self.hi[k] - self.lo[k]) / spacing).ceil() as usize + 1).collect();
        let coord = |k: usize, i: usize| self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (dims[k] - 1) as f64;
        let mut pts = Vec::new();
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let p = [coord(0, i), coord(1, j), coord(2, k)];
                    let v = self.level_set.value_h1(p);
                    for axis in 0..3 {
                        let idx = [i, j, k][axis];
                        if idx + 1 >= dims[axis] {
                            continue;
                        }
                        let mut q = p;
                        q[axis] = coord(axis, idx + 1);
                        let w = self.level_set.value_h1(q);
                        if v.is_finite() && w.is_finite() && (v > 0.0) != (w > 0.0) {
                            let s = v / (v - w);
                            let mut m = p;
                            m[axis] = p[axis] + s * (q[axis] - p[axis]);
                            if let Ok(b) = self.project_to_boundary(&GroupPoint::h1(m[0], m[1], m[2])) {
                                pts.push(b);
                            }
                        }
                    }
                }
            }
        }
        Ok(pts)
    }
}

/// True iff |σ(ξ₀)∇Φ(ξ₀)| ≤ tol, for ξ₀ on ∂Ω.
pub fn is_characteristic(domain: &DomainSpec, xi0: &GroupPoint, tol: f64) -> Result<bool> {
    let d = domain.level_set.second_order(xi0);
    let g = norm(&d.euclid_gradient);
    if !(g > 0.0) {
        return Err(Error::Precondition("vanishing Euclidean gradient of the defining function".into()));
    }
    if d.value.abs() > 1e-8 * g.max(1.0) {
        return Err(Error::Precondition(format!("point is not on the boundary (Phi = {:e})", d.value)));
    }
    Ok(norm(&sigma_matrix(xi0).apply(&d.euclid_gradient)) <= tol)
}

/// The gauge ball of radius r tangent to ∂Ω at ξ₀ from outside, from the first-order
/// condition that ∇ρ⁴(η₀⁻¹∘·) be a negative multiple of ∇Φ at ξ₀.
///
/// In left-translated coordinates the touching point is δ_r(ω) with ω on the unit sphere;
/// with g = ∇_HΦ(ξ₀), g_t = ∂_tΦ(ξ₀) the condition reads 4r(aI + ω_t J)ω_H = c g,
/// 2ω_t = c g_t, a = |ω_H|², a² + ω_t² = 1, J(x, y) = (y, −x), c > 0.
pub fn tangent_exterior_ball(domain: &DomainSpec, xi0: &GroupPoint, r: f64) -> Result<ExteriorBall> {
    let d = domain.level_set.second_order(xi0);
    tangent_ball_from_gradient(xi0, &d.euclid_gradient, r)
}

/// Exterior ball of radius r touching at ξ₀ the surface whose inward Euclidean normal is
/// `euclid_gradient`.
pub fn tangent_ball_from_gradient(xi0: &GroupPoint, euclid_gradient: &[f64], r: f64) -> Result<ExteriorBall> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r}")));
    }
    let n = xi0.n();
    let g = sigma_matrix(xi0).apply(euclid_gradient);
    let gt = euclid_gradient[2 * n];
    let g_norm = norm(&g);
    if g_norm == 0.0 && gt == 0.0 {
        return Err(Error::Precondition("vanishing gradient of the defining function".into()));
    }
    let qa = g_norm.powi(4) / (256.0 * r.powi(4));
    let qb = gt * gt / 4.0;
    let c2 = 2.0 / (qb + (qb * qb + 4.0 * qa).sqrt());
    let c = c2.sqrt();
    let a = c2 * g_norm * g_norm / (16.0 * r * r);
    let wt = c * gt / 2.0;
    let u: Vec<f64> = g.iter().map(|v| c * v / (4.0 * r)).collect();
    let mut omega = vec![0.0; 2 * n + 1];
    for i in 0..n {
        // (aI − ω_t J)u with J u = (u_y, −u_x)
        omega[i] = a * u[i] - wt * u[i + n];
        omega[i + n] = a * u[i + n] + wt * u[i];
    }
    omega[2 * n] = wt;
    let minus_omega = GroupPoint::new(n, omega.iter().map(|v| -v).collect())?;
    let eta0 = group_compose(xi0, &dilate(r, &minus_omega)?)?;
    Ok(ExteriorBall { xi0: xi0.clone(), eta0, r0: r })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallAudit {
    pub index: usize,
    /// max over sphere samples of Φ/|∇Φ|, an estimate of how far the ball enters Ω.
    pub penetration: f64,
    pub center_inside: bool,
    /// |d_H(ξ₀, η₀) − r₀|.
    pub radius_mismatch: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub balls: Vec<BallAudit>,
    /// Boundary samples detected as characteristic (within the cell tolerance).
    pub characteristic_nodes: Vec<GroupPoint>,
    /// Characteristic samples with no registered ball within two cells.
    pub uncovered: Vec<GroupPoint>,
    pub passed: bool,
}

/// Penetration of a ball's sphere into Ω, estimated from samples.
pub fn ball_penetration(domain: &DomainSpec, ball: &ExteriorBall, sampling: &SphereSampling) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for p in gauge_sphere(&ball.eta0, ball.r0, sampling)? {
        let d = domain.level_set.second_order(&p);
        if !d.value.is_finite() {
            continue;
        }
        let g = norm(&d.euclid_gradient).max(1e-300);
        worst = worst.max(d.value / g);
    }
    Ok(worst)
}

/// Checks every registered exterior ball against Ω with tolerance one grid cell, and that
/// each characteristic boundary sample has a registered ball nearby.
pub fn exterior_ball_audit(domain: &DomainSpec, cell: f64) -> Result<AuditReport> {
    let sampling = SphereSampling::new(41, 96);
    let mut balls = Vec::new();
    for (index, b) in domain.exterior_balls.iter().enumerate() {
        let penetration = ball_penetration(domain, b, &sampling)?;
        let center_inside = domain.value(&b.eta0) > 0.0;
        let radius_mismatch = (h_distance(&b.xi0, &b.eta0)? - b.r0).abs();
        let passed = penetration <= cell && !center_inside && radius_mismatch <= 1e-9 * (1.0 + b.r0);
        balls.push(BallAudit { index, penetration, center_inside, radius_mismatch, passed });
    }
    let mut characteristic_nodes = Vec::new();
    let mut uncovered = Vec::new();
    for p in domain.boundary_samples(cell)? {
        let d = domain.level_set.second_order(&p);
        let g = norm(&d.euclid_gradient);
        if !(g > 0.0) {
            continue;
        }
        let gh = norm(&sigma_matrix(&p).apply(&d.euclid_gradient));
        if gh <= 2.0 * cell * g {
            let covered = domain.exterior_balls.iter().any(|b| {
                let e: Vec<f64> = b.xi0.coords().iter().zip(p.coords()).map(|(a, c)| a - c).collect();
                norm(&e) <= 2.0 * cell + 2.0 * cell.sqrt() * cell
            });
            if !covered {
                uncovered.push(p.clone());
            }
            characteristic_nodes.push(p);
        }
    }
    let passed = balls.iter().all(|b| b.passed) && uncovered.is_empty();
    Ok(AuditReport { balls, characteristic_nodes, uncovered, passed })
}

/// Distance helper used by barrier builders: d_H(ξ, η) as a plain function of coordinates.
pub fn gauge_from(eta: &GroupPoint, xi: &GroupPoint) -> f64 {
    gauge_norm(&group_compose(&eta.inverse(), xi).expect("same group"))
}
