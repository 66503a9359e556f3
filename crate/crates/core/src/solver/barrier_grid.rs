//! Lower and upper barriers sampled on the solver lattice.

use crate::barriers::{
    annulus_inner_barrier, annulus_outer_barrier, collar_radius, envelope, global_supersolution, glue_barrier,
    noncharacteristic_local_barrier, Envelope, FirstOrderBound, Side, Weight,
};
use crate::domain::{tangent_ball_from_gradient, tangent_exterior_ball, DomainKind, DomainSpec, ExteriorBall};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fundamental::exponents;
use crate::group::{gauge_gradient, group_compose, h_distance, h_distance_h1, GroupPoint};
use crate::linalg::norm;
use crate::pucci::Ellipticity;
use crate::sampling::{euclidean_sphere, gauge_sphere, SphereSampling};

use super::grid::{Grid, NodeKind};

/// How the Perron sandwich u̲ ≤ u ≤ ū is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BarrierStrategy {
    /// Exterior balls without a first-order term; annulus barriers for zero data on gauge
    /// domains with one; glued barriers otherwise.
    #[default]
    Auto,
    /// Envelopes of exterior-ball barriers over boundary anchors and an ε-set, plus the
    /// constants sup ψ and inf ψ. Requires H = 0.
    ExteriorBalls,
    /// min{u̅₁, u̅₂} and its negative, for zero data on gauge balls and annuli.
    Annulus,
    /// Local barriers glued to the global supersolution at every anchor.
    Glued,
}

/// Number of boundary anchors aimed for by the exterior-ball and glued envelopes.
const ANCHORS: usize = 192;
const GLUED_ANCHORS: usize = 48;
const EPS_LEVELS: usize = 8;
const GLUED_EPS_LEVELS: usize = 3;
const CALIBRATION_SAMPLES: usize = 4096;

pub(crate) struct Anchor {
    pub ball: ExteriorBall,
    pub psi: f64,
}

/// Box that cuts the domain; the solver works on Ω ∩ box.
pub(crate) type Bounds = ([f64; 3], [f64; 3]);

/// Boundary sample of Ω ∩ box; `face` holds the inward normal of a box face.
pub(crate) struct Sample {
    pub point: GroupPoint,
    pub face: Option<[f64; 3]>,
}

fn in_box(bx: &Bounds, c: &[f64]) -> bool {
    (0..3).all(|a| c[a] >= bx.0[a] - 1e-9 && c[a] <= bx.1[a] + 1e-9)
}

/// Signed distance to the box faces, positive inside.
fn box_depth(bx: &Bounds, c: &[f64]) -> f64 {
    (0..3).map(|a| (c[a] - bx.0[a]).min(bx.1[a] - c[a])).fold(f64::INFINITY, f64::min)
}

fn samples_at(domain: &DomainSpec, bx: &Bounds, spacing: f64) -> Result<Vec<Sample>> {
    let mut out: Vec<Sample> = domain
        .boundary_samples(spacing)?
        .into_iter()
        .filter(|p| in_box(bx, p.coords()))
        .map(|point| Sample { point, face: None })
        .collect();
    if domain.n != 1 {
        return Ok(out);
    }
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let steps = |k: usize| ((bx.1[k] - bx.0[k]) / spacing).ceil().max(1.0) as usize;
        let (nu, nv) = (steps(u), steps(v));
        for (side, normal) in [(bx.0[axis], 1.0), (bx.1[axis], -1.0)] {
            for i in 0..=nu {
                for j in 0..=nv {
                    let mut c = [0.0; 3];
                    c[axis] = side;
                    c[u] = bx.0[u] + (bx.1[u] - bx.0[u]) * i as f64 / nu as f64;
                    c[v] = bx.0[v] + (bx.1[v] - bx.0[v]) * j as f64 / nv as f64;
                    if domain.level_set.value_h1(c) > 1e-9 {
                        let mut g = [0.0; 3];
                        g[axis] = normal;
                        out.push(Sample { point: GroupPoint::h1(c[0], c[1], c[2]), face: Some(g) });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// True when some face of the box passes through Ω.
pub(crate) fn box_cuts(domain: &DomainSpec, bx: &Bounds) -> Result<bool> {
    let extent = (0..3).map(|a| bx.1[a] - bx.0[a]).fold(f64::INFINITY, f64::min);
    Ok(samples_at(domain, bx, extent / 16.0)?.iter().any(|s| s.face.is_some()))
}

/// Boundary samples of Ω ∩ box, aiming at about `target` points.
pub(crate) fn boundary_points(domain: &DomainSpec, bx: &Bounds, target: usize) -> Result<Vec<Sample>> {
    let extent = domain.lo.iter().zip(&domain.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let mut spacing = 0.25 * extent;
    let mut pts = samples_at(domain, bx, spacing)?;
    for _ in 0..4 {
        if pts.is_empty() {
            spacing *= 0.5;
        } else {
            let ratio = pts.len() as f64 / target as f64;
            if (0.7..1.5).contains(&ratio) {
                break;
            }
            // surface samples scale like spacing⁻²
            spacing *= ratio.sqrt();
        }
        pts = samples_at(domain, bx, spacing)?;
    }
    if pts.is_empty() {
        return Err(Error::Barrier("no boundary samples found".into()));
    }
    if pts.len() > 4 * target {
        let stride = pts.len().div_ceil(target);
        pts = pts.into_iter().step_by(stride).collect();
    }
    Ok(pts)
}

/// How far the sampled sphere of the ball enters Ω ∩ box.
fn penetration(domain: &DomainSpec, bx: &Bounds, ball: &ExteriorBall, sampling: &SphereSampling) -> f64 {
    let Ok(sphere) = gauge_sphere(&ball.eta0, ball.r0, sampling) else { return f64::INFINITY };
    let mut worst = f64::NEG_INFINITY;
    for p in sphere {
        let d = domain.level_set.second_order(&p);
        if !d.value.is_finite() {
            continue;
        }
        let inside = d.value / norm(&d.euclid_gradient).max(1e-300);
        worst = worst.max(inside.min(box_depth(bx, p.coords())));
    }
    worst
}

/// Exterior ball at ξ₀: the tangent construction along the supplied inward normal (the
/// level-set gradient when none is given), with the radius halved until the sampled sphere
/// stays outside Ω ∩ box.
fn exterior_ball_at(
    domain: &DomainSpec,
    bx: &Bounds,
    xi0: &GroupPoint,
    face: Option<[f64; 3]>,
    r_init: f64,
) -> Option<ExteriorBall> {
    let sampling = SphereSampling::new(13, 24);
    let mut r = r_init;
    for _ in 0..10 {
        let ball = match face {
            Some(g) => tangent_ball_from_gradient(xi0, &g, r),
            None => tangent_exterior_ball(domain, xi0, r),
        };
        if let Ok(ball) = ball {
            let c = ball.eta0.coords();
            let ok_center = !domain.contains(&ball.eta0) || !in_box(bx, c);
            if ok_center && penetration(domain, bx, &ball, &sampling) <= 1e-9 * (1.0 + r) {
                return Some(ball);
            }
        }
        r *= 0.5;
    }
    None
}

fn initial_radius(domain: &DomainSpec, xi0: &GroupPoint) -> f64 {
    match &domain.gauge {
        Some((c, inner, outer)) => {
            let rho = crate::domain::gauge_from(c, xi0);
            if *inner > 0.0 && (rho - inner).abs() < (rho - outer).abs() {
                0.5 * inner
            } else {
                0.5 * outer
            }
        }
        None => 0.25 * domain.lo.iter().zip(&domain.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min),
    }
}

pub(crate) fn anchors(
    domain: &DomainSpec,
    bx: &Bounds,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    target: usize,
) -> Result<Vec<Anchor>> {
    let val = |p: &GroupPoint| {
        let c = p.coords();
        psi([c[0], c[1], c[2]])
    };
    let mut out: Vec<Anchor> = domain
        .exterior_balls
        .iter()
        .filter(|b| in_box(bx, b.xi0.coords()))
        .map(|b| Anchor { psi: val(&b.xi0), ball: b.clone() })
        .collect();
    for s in boundary_points(domain, bx, target)? {
        let p = &s.point;
        if domain.exterior_balls.iter().any(|b| h_distance(&b.xi0, p).map(|d| d < 1e-9).unwrap_or(false)) {
            continue;
        }
        if let Some(ball) = exterior_ball_at(domain, bx, p, s.face, initial_radius(domain, p)) {
            out.push(Anchor { psi: val(p), ball });
        }
    }
    if out.is_empty() {
        return Err(Error::Barrier("no boundary point admits an exterior ball".into()));
    }
    Ok(out)
}

/// Per-anchor data of the exterior-ball family: value ψ(ξ₀) + ε + k(r₀^p − d^p), p = 2 − β.
pub(crate) struct BallMember {
    eta: [f64; 3],
    r0p: f64,
    psi: f64,
    gains: Vec<f64>,
}

pub(crate) enum BarrierPlan {
    Balls { members: Vec<BallMember>, eps: Vec<f64>, p: f64, psi_max: f64, psi_min: f64 },
    Functions { upper: Envelope, lower: Envelope },
}

impl std::fmt::Debug for BarrierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Balls { members, eps, .. } => write!(f, "Balls({} anchors, {} eps)", members.len(), eps.len()),
            Self::Functions { upper, lower } => {
                write!(f, "Functions({} upper, {} lower)", upper.members.len(), lower.members.len())
            }
        }
    }
}

fn eps_set(osc: f64, levels: usize) -> Vec<f64> {
    let e0 = if osc > 0.0 { 0.5 * osc } else { 1.0 };
    (0..levels).map(|j| e0 * 0.25f64.powi(j as i32)).collect()
}

pub(crate) fn exterior_ball_plan(
    domain: &DomainSpec,
    bx: &Bounds,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    e: &Ellipticity,
    exec: Execution,
) -> Result<BarrierPlan> {
    let anchors = anchors(domain, bx, psi, ANCHORS)?;
    // gains and the Lipschitz bound are calibrated on a dense sample: the tangent balls can
    // touch to fourth order at characteristic points, where sparse samples miss small v
    let mut dense: Vec<GroupPoint> =
        boundary_points(domain, bx, CALIBRATION_SAMPLES)?.into_iter().map(|s| s.point).collect();
    dense.extend(anchors.iter().map(|a| a.ball.xi0.clone()));
    let vals: Vec<f64> = dense.iter().map(|p| psi([p.coords()[0], p.coords()[1], p.coords()[2]])).collect();
    let psi_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let psi_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let psi_sup = psi_max.abs().max(psi_min.abs());
    let lip = lipschitz(&dense, &vals, exec);
    let eps = eps_set(psi_max - psi_min, EPS_LEVELS);
    let beta = exponents(e, domain.n).beta;
    let p = 2.0 - beta;
    let gains: Vec<Option<Vec<f64>>> = exec.map(anchors.len(), |i| {
        let ball = &anchors[i].ball;
        let r0p = ball.r0.powf(p);
        let c = ball.eta0.coords();
        let (eta, xi0) = ([c[0], c[1], c[2]], ball.xi0.coords());
        let xi0 = [xi0[0], xi0[1], xi0[2]];
        let dv: Vec<(f64, f64)> = dense
            .iter()
            .map(|q| {
                let q = [q.coords()[0], q.coords()[1], q.coords()[2]];
                (h_distance_h1(q, xi0), r0p - h_distance_h1(q, eta).powf(p))
            })
            .collect();
        eps.iter()
            .map(|&ep| {
                let delta = collar_radius(ep, lip);
                let vmin = dv.iter().filter(|(d, _)| *d >= delta).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
                if vmin == f64::INFINITY || psi_sup == 0.0 {
                    Some(0.0)
                } else {
                    // anchors whose ball grazes other boundary samples give no usable gain
                    (vmin > 0.0).then(|| 2.0 * psi_sup / vmin)
                }
            })
            .collect()
    });
    let members: Vec<BallMember> = anchors
        .iter()
        .zip(gains)
        .filter_map(|(a, g)| {
            let c = a.ball.eta0.coords();
            Some(BallMember { eta: [c[0], c[1], c[2]], r0p: a.ball.r0.powf(p), psi: a.psi, gains: g? })
        })
        .collect();
    if members.is_empty() {
        return Err(Error::Barrier("no anchor admits a finite barrier gain".into()));
    }
    Ok(BarrierPlan::Balls { members, eps, p, psi_max, psi_min })
}

/// Largest |ψ(a) − ψ(b)| / d_H(a, b) over sample pairs.
fn lipschitz(points: &[GroupPoint], values: &[f64], exec: Execution) -> f64 {
    let flat: Vec<[f64; 3]> = points.iter().map(|q| [q.coords()[0], q.coords()[1], q.coords()[2]]).collect();
    exec.max(flat.len(), |i| {
        let mut l = 0.0f64;
        for j in i + 1..flat.len() {
            let d = h_distance_h1(flat[i], flat[j]);
            if d > 1e-12 {
                l = l.max((values[i] - values[j]).abs() / d);
            }
        }
        l
    })
    .max(0.0)
}

pub(crate) fn annulus_plan(
    domain: &DomainSpec,
    bx: &Bounds,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    e: &Ellipticity,
    fb: &FirstOrderBound,
) -> Result<BarrierPlan> {
    let Some((center, inner, outer)) = domain.gauge.clone() else {
        return Err(Error::Barrier("annulus barriers need a gauge ball or annulus".into()));
    };
    if box_cuts(domain, bx)? {
        return Err(Error::Barrier("annulus barriers need a grid box containing the domain".into()));
    }
    let pts = boundary_points(domain, bx, 64)?;
    let sup = pts
        .iter()
        .map(|s| psi([s.point.coords()[0], s.point.coords()[1], s.point.coords()[2]]).abs())
        .fold(0.0, f64::max);
    if sup > 1e-12 {
        return Err(Error::Barrier(format!("annulus barriers need zero boundary data, found |psi| = {sup:e}")));
    }
    let mut members = vec![annulus_outer_barrier(center.clone(), outer, fb, e)?];
    if domain.kind == DomainKind::GaugeAnnulus {
        members.push(annulus_inner_barrier(center, inner, outer, fb, e)?);
    }
    let lower = members.iter().map(|b| b.negated()).collect();
    Ok(BarrierPlan::Functions { upper: envelope(members, Side::Upper)?, lower: envelope(lower, Side::Lower)? })
}

/// sup over samples of w(ξ)/|∇_Hρ(η₀⁻¹∘ξ)|, the constant that converts the bound's weight
/// into the gauge weight of the annulus barrier at η₀.
fn weight_ratio(domain: &DomainSpec, fb: &FirstOrderBound, eta0: &GroupPoint) -> f64 {
    let center = GroupPoint::new(domain.n, domain.lo.iter().zip(&domain.hi).map(|(a, b)| 0.5 * (a + b)).collect())
        .expect("box center");
    let half = domain.lo.iter().zip(&domain.hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max);
    let mut sup = 0.0f64;
    for p in euclidean_sphere(&center, half * 3f64.sqrt(), 800, 0xc0de, true) {
        if !domain.contains(&p) {
            continue;
        }
        let Some(w) = fb.weight_at(&p) else { continue };
        let Ok(z) = group_compose(&eta0.inverse(), &p) else { continue };
        let Ok(g) = gauge_gradient(&z) else { continue };
        let d = norm(&g);
        if d > 1e-300 {
            sup = sup.max(w / d);
        }
    }
    sup
}

fn glued_side(
    domain: &DomainSpec,
    anchors: &[Anchor],
    sign: f64,
    e: &Ellipticity,
    fb: &FirstOrderBound,
) -> Result<Envelope> {
    let boundary: Vec<(GroupPoint, f64)> = anchors.iter().map(|a| (a.ball.xi0.clone(), sign * a.psi)).collect();
    let w1 = global_supersolution(1.0, 1.0, None, &boundary, e, fb, &domain.lo, &domain.hi)?;
    let vals: Vec<f64> = boundary.iter().map(|b| b.1).collect();
    let osc =
        vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) - vals.iter().copied().fold(f64::INFINITY, f64::min);
    let eps = eps_set(osc, GLUED_EPS_LEVELS);
    let extent = domain.lo.iter().zip(&domain.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let diam = domain.lo.iter().zip(&domain.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let mut members = vec![w1.clone()];
    for (a, (xi0, psi0)) in anchors.iter().zip(&boundary) {
        let (w, radius) = match noncharacteristic_local_barrier(domain, xi0, 1.0, 1.0, e, fb) {
            Ok(w) => {
                let crate::barriers::BarrierParams::LocalNoncharacteristic { radius, .. } = w.params else {
                    unreachable!()
                };
                (w, radius)
            }
            Err(_) => {
                let c = weight_ratio(domain, fb, &a.ball.eta0);
                if !c.is_finite() {
                    return Err(Error::Barrier("weight ratio is unbounded at a characteristic anchor".into()));
                }
                let scaled =
                    FirstOrderBound::new(fb.k * c, fb.m * c * c, Weight::GaugeGradientAt(a.ball.eta0.clone()))?;
                let r2 = a.ball.r0 + 2.0 * diam.max(1.0);
                (annulus_inner_barrier(a.ball.eta0.clone(), a.ball.r0, r2, &scaled, e)?, 0.5 * extent)
            }
        };
        for &ep in &eps {
            members.push(glue_barrier(&w, &w1, *psi0, ep, 1.0, radius, xi0, domain, &boundary)?);
        }
    }
    envelope(members, Side::Upper)
}

pub(crate) fn glued_plan(
    domain: &DomainSpec,
    bx: &Bounds,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    e: &Ellipticity,
    fb: &FirstOrderBound,
) -> Result<BarrierPlan> {
    if box_cuts(domain, bx)? {
        return Err(Error::Barrier("glued barriers need a grid box containing the domain".into()));
    }
    let anchors = anchors(domain, bx, psi, GLUED_ANCHORS)?;
    let upper = glued_side(domain, &anchors, 1.0, e, fb)?;
    let mirrored = glued_side(domain, &anchors, -1.0, e, fb)?;
    let lower = envelope(mirrored.members.iter().map(|b| b.negated()).collect(), Side::Lower)?;
    Ok(BarrierPlan::Functions { upper, lower })
}

impl BarrierPlan {
    /// (lower, upper) at interior nodes; ∓∞ elsewhere.
    pub(crate) fn evaluate(&self, grid: &Grid, mask: &[NodeKind], exec: Execution) -> (Vec<f64>, Vec<f64>) {
        let mut pairs = vec![[f64::NEG_INFINITY, f64::INFINITY]; grid.len()];
        exec.for_each_chunk_mut(&mut pairs, grid.dims[2], |c, chunk| {
            let base = c * grid.dims[2];
            for (k, slot) in chunk.iter_mut().enumerate() {
                if mask[base + k] != NodeKind::Interior {
                    continue;
                }
                let x = grid.point(base + k);
                *slot = self.pair(x);
            }
        });
        pairs.into_iter().map(|[a, b]| (a, b)).unzip()
    }

    fn pair(&self, x: [f64; 3]) -> [f64; 2] {
        match self {
            Self::Balls { members, eps, p, psi_max, psi_min } => {
                let (mut lo, mut up) = (*psi_min, *psi_max);
                for m in members {
                    let d = h_distance_h1(x, m.eta);
                    if d <= 0.0 {
                        continue;
                    }
                    let v = m.r0p - d.powf(*p);
                    for (ep, k) in eps.iter().zip(&m.gains) {
                        up = up.min(m.psi + ep + k * v);
                        lo = lo.max(m.psi - ep - k * v);
                    }
                }
                [lo, up]
            }
            Self::Functions { upper, lower } => [lower.value_h1(x), upper.value_h1(x)],
        }
    }
}
