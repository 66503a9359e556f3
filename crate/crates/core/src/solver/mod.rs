//! Grid solver for F(ξ, D²_H u) + H(ξ, ∇_H u) = 0 on domains in H¹ with Dirichlet data,
//! by clamped pseudo-time relaxation between a lower and an upper barrier.

pub mod barrier_grid;
pub mod grid;
pub mod stencil;

pub use barrier_grid::BarrierStrategy;
pub use grid::{interpolate, resample, Grid, GridFunction, NodeKind};
pub use stencil::{discrete_heisenberg_hessian, operator_residual, DiscreteDerivatives, Hamiltonian, Stencil};

pub use crate::domain::{exterior_ball_audit, AuditReport};

use crate::barriers::FirstOrderBound;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::group::{dilate, gauge_norm, group_compose, GroupPoint};
use crate::pucci::OperatorSpec;

use barrier_grid::{BarrierPlan, Bounds};

/// Where band nodes take their values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// ψ at the projection of the node onto ∂Ω (dilation for gauge domains, Newton along ∇Φ
    /// otherwise), so only the trace of ψ is used. Constant extension, first order.
    Trace,
    /// Linear extrapolation 2ψ(p) − u(m) through the projection p from the mirror point m,
    /// refreshed every iteration. Uses only the trace of ψ; second order in the band.
    #[default]
    Extrapolated,
    /// ψ evaluated at the node itself, for data given on a neighborhood of ∂Ω.
    Ambient,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Horizontal spacing.
    pub h: f64,
    /// Vertical spacing; defaults to h.
    pub ht: Option<f64>,
    /// Relaxation step; defaults to 0.125 h² / (Λ + K h / 2).
    pub tau: Option<f64>,
    /// Stop when the sup of the projected residual is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Only 1 is supported.
    pub stencil_half_width: usize,
    pub hamiltonian: Option<Hamiltonian>,
    pub barriers: BarrierStrategy,
    pub boundary: BoundaryMode,
    /// Number of nested lattices (spacings h·2^{levels−1}, …, h) used for the initial guess.
    pub levels: usize,
    /// Nesterov extrapolation with gradient restarts.
    pub momentum: bool,
    /// Box holding the interior nodes; defaults to the domain's box.
    pub bounding_box: Option<([f64; 3], [f64; 3])>,
    pub execution: Execution,
}

impl SolveConfig {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            ht: None,
            tau: None,
            tolerance: 1e-5,
            max_iterations: 50_000,
            stencil_half_width: 1,
            hamiltonian: None,
            barriers: BarrierStrategy::Auto,
            boundary: BoundaryMode::Extrapolated,
            levels: 3,
            momentum: true,
            bounding_box: None,
            execution: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!("h must be positive, got {}", self.h)));
        }
        if let Some(ht) = self.ht {
            if !(ht > 0.0) || !ht.is_finite() {
                return Err(Error::InvalidArgument(format!("h_t must be positive, got {ht}")));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.stencil_half_width != 1 {
            return Err(Error::InvalidArgument(format!(
                "only stencil half-width 1 is implemented, got {}",
                self.stencil_half_width
            )));
        }
        if self.levels == 0 {
            return Err(Error::InvalidArgument("need at least one level".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub h: f64,
    pub ht: f64,
    pub interior_nodes: usize,
    pub band_nodes: usize,
    pub iterations: usize,
    pub projected_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Iterations on the finest lattice.
    pub iterations: usize,
    /// sup over interior nodes of |F + H|, recomputed from the returned grid function.
    pub final_residual: f64,
    /// Same, ignoring nodes held by an active barrier in the direction the residual pushes.
    pub projected_residual: f64,
    /// Interior nodes where the sampled lower barrier exceeds the upper one.
    pub barrier_violations: usize,
    /// max |u − ψ| over interior nodes next to the boundary, ψ taken at the projection.
    pub boundary_sup_error: f64,
    /// max of ū − ψ and ψ − u̲ over the same nodes.
    pub barrier_modulus: f64,
    /// Largest max(u̲ − u, u − ū) seen over all iterates and levels.
    pub max_sandwich_violation: f64,
    pub tau: f64,
    pub tau_halvings: usize,
    pub converged: bool,
    /// Interior nodes sitting on a barrier at the end.
    pub clamped_nodes: usize,
    pub strategy: BarrierStrategy,
    pub levels: Vec<LevelReport>,
}

/// Solution together with the sampled barriers on the finest lattice.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub solution: GridFunction,
    pub lower: GridFunction,
    pub upper: GridFunction,
    pub report: SolveReport,
}

/// A band node whose value is (1 + θ)ψ(p) − θ Σ w·u(corner).
struct Ghost {
    node: usize,
    psi: f64,
    theta: f64,
    corners: Vec<(usize, f64)>,
}

struct Level {
    ghosts: Vec<Ghost>,
    grid: Grid,
    stencil: Stencil,
    mask: Vec<NodeKind>,
    interior: Vec<usize>,
    values: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    bounds: Bounds,
}

fn solve_bounds(domain: &DomainSpec, cfg: &SolveConfig) -> Bounds {
    cfg.bounding_box.unwrap_or(([domain.lo[0], domain.lo[1], domain.lo[2]], [domain.hi[0], domain.hi[1], domain.hi[2]]))
}

fn level_grid(domain: &DomainSpec, cfg: &SolveConfig, h: f64, ht: f64) -> Result<(Grid, [f64; 3], [f64; 3])> {
    let (lo, hi) = solve_bounds(domain, cfg);
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let reach = lo[0].abs().max(hi[0].abs()).max(lo[1].abs()).max(hi[1].abs()) + h;
    let half = [
        0.5 * (hi[0] - lo[0]) + 1.5 * h,
        0.5 * (hi[1] - lo[1]) + 1.5 * h,
        0.5 * (hi[2] - lo[2]) + 2.0 * reach * h + 3.5 * ht,
    ];
    Ok((Grid::centered(center, half, h, ht)?, lo, hi))
}

type InwardPath<'a> = Box<dyn Fn(f64) -> Option<[f64; 3]> + 'a>;

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn straight_path(from: [f64; 3], proj: [f64; 3]) -> (f64, InwardPath<'static>) {
    let d = dist3(from, proj);
    if d < 1e-14 {
        return (0.0, Box::new(|_| None));
    }
    let n = [(proj[0] - from[0]) / d, (proj[1] - from[1]) / d, (proj[2] - from[2]) / d];
    (d, Box::new(move |s| Some([proj[0] + s * n[0], proj[1] + s * n[1], proj[2] + s * n[2]])))
}

/// Projection of b onto ∂Ω itself: along the dilation ray for gauge domains, Newton along ∇Φ
/// otherwise.
fn surface_path(domain: &DomainSpec, b: [f64; 3]) -> Option<([f64; 3], f64, InwardPath<'_>)> {
    if let Some((c, inner, outer)) = &domain.gauge {
        let z = group_compose(&c.inverse(), &GroupPoint::h1(b[0], b[1], b[2])).ok()?;
        let rho = gauge_norm(&z);
        let (target, dir) =
            if *inner > 0.0 && (rho - inner).abs() < (rho - outer).abs() { (*inner, 1.0) } else { (*outer, -1.0) };
        if rho < 1e-12 {
            // every ray leaves the center; take the one along x
            let v = group_compose(c, &GroupPoint::h1(target, 0.0, 0.0)).ok()?.coords().to_vec();
            return Some(([v[0], v[1], v[2]], target, Box::new(|_| None)));
        }
        let at = move |r: f64| -> Option<[f64; 3]> {
            if r <= 0.0 {
                return None;
            }
            let q = group_compose(c, &dilate(r / rho, &z).ok()?).ok()?;
            let v = q.coords();
            Some([v[0], v[1], v[2]])
        };
        let proj = at(target)?;
        return Some((proj, (rho - target).abs(), Box::new(move |s| at(target + dir * s))));
    }
    let q = domain.project_to_boundary(&GroupPoint::h1(b[0], b[1], b[2])).ok()?;
    let v = q.coords();
    let proj = [v[0], v[1], v[2]];
    let (d, path) = straight_path(b, proj);
    Some((proj, d, path))
}

/// Nearest point of a box face that lies inside the level set: the clamp of b when b is
/// outside the box, the closest face point otherwise.
fn face_point(domain: &DomainSpec, bx: &Bounds, b: [f64; 3]) -> Option<[f64; 3]> {
    let (lo, hi) = bx;
    let outside = (0..3).any(|a| b[a] < lo[a] || b[a] > hi[a]);
    let q = if outside {
        [b[0].clamp(lo[0], hi[0]), b[1].clamp(lo[1], hi[1]), b[2].clamp(lo[2], hi[2])]
    } else {
        let (mut best, mut q) = (f64::INFINITY, b);
        for a in 0..3 {
            for face in [lo[a], hi[a]] {
                if (b[a] - face).abs() < best {
                    best = (b[a] - face).abs();
                    q = b;
                    q[a] = face;
                }
            }
        }
        q
    };
    (domain.level_set.value_h1(q) > 0.0).then_some(q)
}

/// Projection p of a band node onto the boundary of Ω ∩ box, its distance d to p, and the
/// inward path s ↦ point at distance s past p (along the dilation ray for gauge domains,
/// the Euclidean normal otherwise). Surface projections landing outside the box are
/// discarded in favour of the box face.
fn inward_path<'a>(domain: &'a DomainSpec, bx: &Bounds, b: [f64; 3]) -> Option<([f64; 3], f64, InwardPath<'a>)> {
    let slack = 1e-9;
    let surface =
        surface_path(domain, b).filter(|(p, _, _)| (0..3).all(|a| p[a] >= bx.0[a] - slack && p[a] <= bx.1[a] + slack));
    let face = face_point(domain, bx, b).map(|q| {
        let (d, path) = straight_path(b, q);
        (q, d, path)
    });
    match (surface, face) {
        (Some(s), Some(f)) => Some(if f.1 < s.1 { f } else { s }),
        (Some(s), None) => Some(s),
        (None, Some(f)) => Some(f),
        (None, None) => surface_path(domain, b),
    }
}

/// Trilinear weights at m when all eight corners are interior.
fn interior_trilinear(grid: &Grid, mask: &[NodeKind], m: [f64; 3]) -> Option<Vec<(usize, f64)>> {
    let steps = [grid.h, grid.h, grid.ht];
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let s = (m[a] - grid.lo[a]) / steps[a];
        if s < 0.0 || s > (grid.dims[a] - 1) as f64 {
            return None;
        }
        let b = (s.floor() as usize).min(grid.dims[a] - 2);
        base[a] = b;
        frac[a] = s - b as f64;
    }
    let mut out = Vec::with_capacity(8);
    for c in 0..8 {
        let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
        let idx = grid.idx(base[0] + o[0], base[1] + o[1], base[2] + o[2]);
        if mask[idx] != NodeKind::Interior {
            return None;
        }
        let w: f64 = (0..3).map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
        out.push((idx, w));
    }
    Some(out)
}

/// Extrapolation (1 + θ)ψ(p) − θ u(m) with m at distance s ≥ d inside and θ = d/s. The first
/// s whose interpolation cell is fully interior is used, so band values never feed each other.
fn ghost_for(
    domain: &DomainSpec,
    bx: &Bounds,
    grid: &Grid,
    mask: &[NodeKind],
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    node: usize,
) -> Option<Ghost> {
    let (proj, d, path) = inward_path(domain, bx, grid.point(node))?;
    let psi_p = psi(proj);
    if d < 1e-14 {
        return Some(Ghost { node, psi: psi_p, theta: 0.0, corners: Vec::new() });
    }
    for k in 0..8 {
        let s = d + k as f64 * grid.h;
        let Some(m) = path(s) else { continue };
        if domain.level_set.value_h1(m) <= 0.0 || (0..3).any(|a| m[a] < bx.0[a] || m[a] > bx.1[a]) {
            continue;
        }
        if let Some(corners) = interior_trilinear(grid, mask, m) {
            return Some(Ghost { node, psi: psi_p, theta: d / s, corners });
        }
    }
    None
}

fn boundary_value(
    domain: &DomainSpec,
    bx: &Bounds,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    mode: BoundaryMode,
    p: [f64; 3],
) -> f64 {
    if mode == BoundaryMode::Ambient {
        return psi(p);
    }
    match inward_path(domain, bx, p) {
        Some((proj, _, _)) => psi(proj),
        None => psi(p),
    }
}

fn setup_level(
    domain: &DomainSpec,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    plan: &BarrierPlan,
    cfg: &SolveConfig,
    h: f64,
    ht: f64,
) -> Result<Level> {
    let (grid, lo, hi) = level_grid(domain, cfg, h, ht)?;
    let exec = cfg.execution;
    let inside = exec.map(grid.len(), |idx| {
        let p = grid.point(idx);
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]) && domain.level_set.value_h1(p) > 0.0
    });
    let (stencil, mask) = Stencil::with_mask(grid, &inside)?;
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| mask[i] == NodeKind::Interior).collect();
    if interior.is_empty() {
        return Err(Error::InvalidArgument(format!("no interior nodes at h = {h}")));
    }
    let (lower, upper) = plan.evaluate(&grid, &mask, exec);
    let values = exec.map(grid.len(), |idx| match mask[idx] {
        NodeKind::Band => boundary_value(domain, &(lo, hi), psi, cfg.boundary, grid.point(idx)),
        NodeKind::Interior => {
            let (a, b) = (lower[idx], upper[idx]);
            match (a.is_finite(), b.is_finite()) {
                (true, true) => 0.5 * (a + b),
                (true, false) => a,
                (false, true) => b,
                _ => 0.0,
            }
        }
        NodeKind::Exterior => 0.0,
    });
    let ghosts = if cfg.boundary == BoundaryMode::Extrapolated {
        let band: Vec<usize> = (0..grid.len()).filter(|&i| mask[i] == NodeKind::Band).collect();
        exec.map(band.len(), |q| ghost_for(domain, &(lo, hi), &grid, &mask, psi, band[q]))
            .into_iter()
            .flatten()
            .collect()
    } else {
        Vec::new()
    };
    let mut level = Level { ghosts, grid, stencil, mask, interior, values, lower, upper, bounds: (lo, hi) };
    let mut v = std::mem::take(&mut level.values);
    refresh_ghosts(&level.ghosts, &mut v);
    level.values = v;
    Ok(level)
}

/// Jacobi update of the extrapolated band values from the current iterate.
fn refresh_ghosts(ghosts: &[Ghost], u: &mut [f64]) {
    if ghosts.is_empty() {
        return;
    }
    let fresh: Vec<f64> = ghosts
        .iter()
        .map(|g| (1.0 + g.theta) * g.psi - g.theta * g.corners.iter().map(|&(c, w)| w * u[c]).sum::<f64>())
        .collect();
    for (g, v) in ghosts.iter().zip(fresh) {
        u[g.node] = v;
    }
}

#[inline]
fn clamp(v: f64, lo: f64, up: f64) -> f64 {
    lo.max(v.min(up))
}

/// The residual component that a relaxation step could still reduce.
#[inline]
fn projected(r: f64, u: f64, lo: f64, up: f64) -> f64 {
    if (r > 0.0 && u <= lo) || (r < 0.0 && u >= up) {
        0.0
    } else {
        r.abs()
    }
}

struct RelaxOutcome {
    iterations: usize,
    projected: f64,
    converged: bool,
    tau: f64,
    halvings: usize,
    sandwich: f64,
}

const MAX_HALVINGS: usize = 30;
const REDUCE_CHUNK: usize = 4096;

fn relax(level: &mut Level, op: &OperatorSpec, cfg: &SolveConfig, tau0: f64) -> Result<RelaxOutcome> {
    let exec = cfg.execution;
    let ham = cfg.hamiltonian.as_ref();
    let n = level.grid.len();
    let ids = &level.interior;
    let (lower, upper, mask) = (&level.lower, &level.upper, &level.mask);
    let mut u = std::mem::take(&mut level.values);
    let mut u_prev = u.clone();
    let mut y = u.clone();
    let mut u_new = u.clone();
    let mut r = vec![0.0; n];
    let mut tau = tau0;
    let mut halvings = 0;
    let mut mom = 1usize;
    let mut best = f64::INFINITY;
    let mut since_reset = 0usize;
    let mut sandwich = f64::NEG_INFINITY;
    let mut outcome = None;
    for it in 0..cfg.max_iterations {
        let coef = if cfg.momentum { (mom as f64 - 1.0) / (mom as f64 + 2.0) } else { 0.0 };
        exec.for_each_mut(&mut y, |i, v| {
            *v = if mask[i] == NodeKind::Interior {
                clamp(u[i] + coef * (u[i] - u_prev[i]), lower[i], upper[i])
            } else {
                u[i]
            };
        });
        refresh_ghosts(&level.ghosts, &mut y);
        level.stencil.sweep(&y, mask, op, ham, &mut r, exec);
        exec.for_each_mut(&mut u_new, |i, v| {
            *v = if mask[i] == NodeKind::Interior { clamp(y[i] - tau * r[i], lower[i], upper[i]) } else { u[i] };
        });
        refresh_ghosts(&level.ghosts, &mut u_new);
        // One fused pass: projected residual at y, restart test and sandwich check.
        let chunks = exec.map(ids.len().div_ceil(REDUCE_CHUNK), |c| {
            let mut acc = (0.0f64, 0.0f64, f64::NEG_INFINITY);
            for &i in &ids[c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(ids.len())] {
                let p = projected(r[i], y[i], lower[i], upper[i]);
                acc.0 = if p.is_nan() || acc.0.is_nan() { f64::NAN } else { acc.0.max(p) };
                acc.1 += r[i] * (u_new[i] - u[i]);
                acc.2 = acc.2.max((lower[i] - u_new[i]).max(u_new[i] - upper[i]));
            }
            acc
        });
        let (proxy, ascent, worst) = chunks.iter().fold((0.0f64, 0.0f64, f64::NEG_INFINITY), |a, c| {
            (if a.0.is_nan() || c.0.is_nan() { f64::NAN } else { a.0.max(c.0) }, a.1 + c.1, a.2.max(c.2))
        });
        sandwich = sandwich.max(worst);
        std::mem::swap(&mut u_prev, &mut u);
        std::mem::swap(&mut u, &mut u_new);
        mom = if ascent > 0.0 { 1 } else { mom + 1 };
        since_reset += 1;

        if !proxy.is_finite() || (since_reset > 50 && proxy > 100.0 * best) {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::Divergence(format!(
                    "residual keeps growing after {MAX_HALVINGS} step halvings (last {proxy:e})"
                )));
            }
            tau *= 0.5;
            for &i in ids.iter() {
                if !u[i].is_finite() {
                    u[i] = clamp(0.0, lower[i], upper[i]);
                }
            }
            u_prev.copy_from_slice(&u);
            mom = 1;
            best = f64::INFINITY;
            since_reset = 0;
            continue;
        }
        best = best.min(proxy);
        if proxy <= cfg.tolerance {
            level.stencil.sweep(&u, mask, op, ham, &mut r, exec);
            let exact = exec.max(ids.len(), |q| {
                let i = ids[q];
                projected(r[i], u[i], lower[i], upper[i])
            });
            if exact <= cfg.tolerance {
                outcome = Some((it + 1, exact, true));
                break;
            }
        }
    }
    let (iterations, proj, converged) = match outcome {
        Some(o) => o,
        None => {
            level.stencil.sweep(&u, mask, op, ham, &mut r, exec);
            let exact = exec.max(ids.len(), |q| {
                let i = ids[q];
                projected(r[i], u[i], lower[i], upper[i])
            });
            (cfg.max_iterations, exact, false)
        }
    };
    level.values = u;
    Ok(RelaxOutcome { iterations, projected: proj, converged, tau, halvings, sandwich })
}

fn resolve_strategy(
    domain: &DomainSpec,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    cfg: &SolveConfig,
) -> Result<BarrierStrategy> {
    let bound = cfg.hamiltonian.as_ref().map(|h| h.bound.clone()).unwrap_or_else(FirstOrderBound::zero);
    let first_order = cfg.hamiltonian.is_some();
    Ok(match cfg.barriers {
        BarrierStrategy::Auto => {
            if !first_order {
                BarrierStrategy::ExteriorBalls
            } else if domain.gauge.is_some() && {
                let pts = barrier_grid::boundary_points(domain, &solve_bounds(domain, cfg), 64)?;
                pts.iter().all(|s| psi([s.point.coords()[0], s.point.coords()[1], s.point.coords()[2]]) == 0.0)
            } {
                BarrierStrategy::Annulus
            } else {
                BarrierStrategy::Glued
            }
        }
        BarrierStrategy::ExteriorBalls if first_order && (bound.k > 0.0 || bound.m > 0.0) => {
            return Err(Error::Barrier("exterior-ball barriers need H = 0".into()));
        }
        s => s,
    })
}

/// Clamped relaxation u ← clamp(u − τ(F + H)(u), u̲, ū) with band nodes pinned to ψ, on
/// nested lattices. Returns the solution, the sampled barriers and the report.
pub fn perron_solve_detailed(
    domain: &DomainSpec,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    op: &OperatorSpec,
    cfg: &SolveConfig,
) -> Result<SolveOutput> {
    cfg.validate()?;
    if domain.n != 1 {
        return Err(Error::Precondition(format!("grid solves are implemented for n = 1, got n = {}", domain.n)));
    }
    let e = op.ellipticity;
    let bound = cfg.hamiltonian.as_ref().map(|h| h.bound.clone()).unwrap_or_else(FirstOrderBound::zero);
    let strategy = resolve_strategy(domain, psi, cfg)?;
    let bx = solve_bounds(domain, cfg);
    let plan = match strategy {
        BarrierStrategy::ExteriorBalls => barrier_grid::exterior_ball_plan(domain, &bx, psi, &e, cfg.execution)?,
        BarrierStrategy::Annulus => barrier_grid::annulus_plan(domain, &bx, psi, &e, &bound)?,
        BarrierStrategy::Glued => barrier_grid::glued_plan(domain, &bx, psi, &e, &bound)?,
        BarrierStrategy::Auto => unreachable!("resolved above"),
    };
    let ht_ratio = cfg.ht.map(|ht| ht / cfg.h).unwrap_or(1.0);
    let extent = domain.lo.iter().zip(&domain.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let mut spacings: Vec<f64> =
        (0..cfg.levels).rev().map(|l| cfg.h * 2f64.powi(l as i32)).filter(|&h| h <= extent / 8.0).collect();
    if spacings.last() != Some(&cfg.h) {
        spacings = vec![cfg.h];
    }
    let mut reports = Vec::new();
    let mut prev: Option<GridFunction> = None;
    let mut sandwich = f64::NEG_INFINITY;
    let mut halvings = 0;
    let mut last: Option<(Level, RelaxOutcome)> = None;
    for &h in &spacings {
        let ht = h * ht_ratio;
        let mut level = setup_level(domain, psi, &plan, cfg, h, ht)?;
        if let Some(coarse) = &prev {
            let (lo, up) = (&level.lower, &level.upper);
            let grid = level.grid;
            let guess = cfg.execution.map(grid.len(), |i| {
                if level.mask[i] == NodeKind::Interior {
                    interpolate(coarse, grid.point(i)).map(|v| clamp(v, lo[i], up[i]))
                } else {
                    None
                }
            });
            for (v, g) in level.values.iter_mut().zip(guess) {
                if let Some(g) = g {
                    *v = g;
                }
            }
            refresh_ghosts(&level.ghosts, &mut level.values);
        }
        let tau0 = cfg.tau.unwrap_or(0.125 * h * h / (e.big_lambda() + 0.5 * bound.k * h));
        let out = relax(&mut level, op, cfg, tau0)?;
        sandwich = sandwich.max(out.sandwich);
        halvings += out.halvings;
        reports.push(LevelReport {
            h,
            ht,
            interior_nodes: level.interior.len(),
            band_nodes: level.mask.iter().filter(|&&m| m == NodeKind::Band).count(),
            iterations: out.iterations,
            projected_residual: out.projected,
            converged: out.converged,
        });
        let mut values = level.values.clone();
        for (v, m) in values.iter_mut().zip(&level.mask) {
            if *m == NodeKind::Exterior {
                *v = f64::NAN;
            }
        }
        prev = Some(GridFunction { grid: level.grid, values, mask: level.mask.clone() });
        last = Some((level, out));
    }
    let (level, out) = last.expect("at least one level");
    let solution = prev.expect("at least one level");
    let exec = cfg.execution;
    let ham = cfg.hamiltonian.as_ref();
    let ids = &level.interior;
    let mut r = vec![0.0; level.grid.len()];
    level.stencil.sweep(&solution.values, &level.mask, op, ham, &mut r, exec);
    let final_residual = exec.max(ids.len(), |q| r[ids[q]].abs());
    let projected_residual = exec.max(ids.len(), |q| {
        let i = ids[q];
        projected(r[i], solution.values[i], level.lower[i], level.upper[i])
    });
    let scale = 1e-12
        * (1.0 + level.upper.iter().chain(&level.lower).filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs())));
    let barrier_violations = ids.iter().filter(|&&i| level.lower[i] > level.upper[i] + scale).count();
    let clamped_nodes =
        ids.iter().filter(|&&i| solution.values[i] <= level.lower[i] || solution.values[i] >= level.upper[i]).count();

    let g = level.grid;
    let near: Vec<usize> = ids
        .iter()
        .copied()
        .filter(|&i| {
            let (a, b, c) = g.unravel(i);
            let nb = [
                (a.wrapping_sub(1), b, c),
                (a + 1, b, c),
                (a, b.wrapping_sub(1), c),
                (a, b + 1, c),
                (a, b, c.wrapping_sub(1)),
                (a, b, c + 1),
            ];
            nb.iter().any(|&(x, y, z)| {
                x >= g.dims[0] || y >= g.dims[1] || z >= g.dims[2] || level.mask[g.idx(x, y, z)] != NodeKind::Interior
            })
        })
        .collect();
    let stats = exec.map(near.len(), |q| {
        let i = near[q];
        let bv = boundary_value(domain, &level.bounds, psi, BoundaryMode::Trace, g.point(i));
        let u = solution.values[i];
        ((u - bv).abs(), (level.upper[i] - bv).max(bv - level.lower[i]))
    });
    let boundary_sup_error = stats.iter().fold(0.0f64, |a, s| a.max(s.0));
    let barrier_modulus = stats.iter().fold(0.0f64, |a, s| a.max(s.1));

    let as_grid = |v: &[f64]| GridFunction {
        grid: g,
        values: v
            .iter()
            .zip(&level.mask)
            .zip(&solution.values)
            .map(|((b, m), s)| match m {
                NodeKind::Interior => *b,
                NodeKind::Band => *s,
                NodeKind::Exterior => f64::NAN,
            })
            .collect(),
        mask: level.mask.clone(),
    };
    let lower = as_grid(&level.lower);
    let upper = as_grid(&level.upper);
    let report = SolveReport {
        iterations: out.iterations,
        final_residual,
        projected_residual,
        barrier_violations,
        boundary_sup_error,
        barrier_modulus,
        max_sandwich_violation: sandwich,
        tau: out.tau,
        tau_halvings: halvings,
        converged: out.converged,
        clamped_nodes,
        strategy,
        levels: reports,
    };
    Ok(SolveOutput { solution, lower, upper, report })
}

pub fn perron_solve(
    domain: &DomainSpec,
    psi: &(dyn Fn([f64; 3]) -> f64 + Sync),
    op: &OperatorSpec,
    cfg: &SolveConfig,
) -> Result<(GridFunction, SolveReport)> {
    let out = perron_solve_detailed(domain, psi, op, cfg)?;
    Ok((out.solution, out.report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// max over interior nodes of u_sub − u_super.
    pub max_difference: f64,
    pub argmax: Option<[usize; 3]>,
    /// max of F + H over interior nodes for u_sub (≤ residual tolerance for a subsolution).
    pub sub_residual_max: f64,
    /// min of F + H over interior nodes for u_super (≥ −residual tolerance).
    pub super_residual_min: f64,
    /// max over band nodes of u_sub − u_super.
    pub boundary_gap: f64,
    pub passed: bool,
}

/// Discrete comparison: checks the residual signs and the boundary ordering, then reports
/// max(u_sub − u_super) over the interior; passes when it is at most `tol`.
pub fn comparison_check(
    u_sub: &GridFunction,
    u_super: &GridFunction,
    op: &OperatorSpec,
    ham: Option<&Hamiltonian>,
    residual_tol: f64,
    tol: f64,
    exec: Execution,
) -> Result<ComparisonReport> {
    if u_sub.grid != u_super.grid || u_sub.mask != u_super.mask {
        return Err(Error::DimensionMismatch("grid functions live on different lattices or masks".into()));
    }
    let rs = operator_residual(u_sub, op, ham, exec)?;
    let rp = operator_residual(u_super, op, ham, exec)?;
    let mut report = ComparisonReport {
        max_difference: f64::NEG_INFINITY,
        argmax: None,
        sub_residual_max: f64::NEG_INFINITY,
        super_residual_min: f64::INFINITY,
        boundary_gap: f64::NEG_INFINITY,
        passed: false,
    };
    for idx in 0..u_sub.grid.len() {
        let d = u_sub.values[idx] - u_super.values[idx];
        match u_sub.mask[idx] {
            NodeKind::Interior => {
                report.sub_residual_max = report.sub_residual_max.max(rs.values[idx]);
                report.super_residual_min = report.super_residual_min.min(rp.values[idx]);
                if d > report.max_difference {
                    report.max_difference = d;
                    let (i, j, k) = u_sub.grid.unravel(idx);
                    report.argmax = Some([i, j, k]);
                }
            }
            NodeKind::Band => report.boundary_gap = report.boundary_gap.max(d),
            NodeKind::Exterior => {}
        }
    }
    if report.sub_residual_max > residual_tol {
        return Err(Error::Precondition(format!(
            "u_sub is not a discrete subsolution (max residual {:e})",
            report.sub_residual_max
        )));
    }
    if report.super_residual_min < -residual_tol {
        return Err(Error::Precondition(format!(
            "u_super is not a discrete supersolution (min residual {:e})",
            report.super_residual_min
        )));
    }
    if report.boundary_gap > tol {
        return Err(Error::Precondition(format!(
            "u_sub exceeds u_super on the boundary band by {:e}",
            report.boundary_gap
        )));
    }
    report.passed = report.max_difference <= tol;
    Ok(report)
}
