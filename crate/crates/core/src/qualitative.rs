//! Numerical checks of the Hadamard three-sphere inequalities, the Liouville property and
//! the weak Harnack inequality, all driven by ball-extremum profiles m(r) = min_{ρ ≤ r} u.

use std::io::{self, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fundamental::{verify_residual, Exponents, Family, FundamentalSolution};
use crate::group::{flow_fd_derivatives, gauge_norm, group_compose, GroupPoint};
use crate::pucci::{pucci, Ellipticity, PucciSign};
use crate::sampling::{gauge_sphere, point_in_gauge_shell, rng_from_seed, SphereSampling};
use crate::solver::{GridFunction, NodeKind};

/// A scalar field on Hⁿ evaluated at group points.
pub type Field<'a> = &'a (dyn Fn(&GroupPoint) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Grid,
    Callable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    /// m(r) = min over the closed ball.
    Min,
    /// M(r) = max over the closed ball.
    Max,
}

/// Ball-extremum profile over increasing radii.
#[derive(Debug, Clone, PartialEq)]
pub struct MinProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub source: ProfileSource,
    pub extremum: Extremum,
}

impl MinProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>, source: ProfileSource, extremum: Extremum) -> Result<Self> {
        check_radii(&radii)?;
        if radii.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} radii but {} values", radii.len(), values.len())));
        }
        Ok(Self { radii, values, source, extremum })
    }

    /// The same profile for −u: values negated, extremum swapped.
    pub fn negated(&self) -> Self {
        Self {
            radii: self.radii.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            source: self.source,
            extremum: match self.extremum {
                Extremum::Min => Extremum::Max,
                Extremum::Max => Extremum::Min,
            },
        }
    }

    /// True when m is nonincreasing (Min) or M nondecreasing (Max).
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| match self.extremum {
            Extremum::Min => w[1] <= w[0],
            Extremum::Max => w[1] >= w[0],
        })
    }

    fn index_of(&self, r: f64) -> Result<usize> {
        let tol = 1e-12 * self.radii.last().copied().unwrap_or(1.0);
        self.radii
            .iter()
            .position(|&s| (s - r).abs() <= tol)
            .ok_or_else(|| Error::InvalidArgument(format!("radius {r} is not one of the profile radii")))
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("profile needs at least one radius".into()));
    }
    if !radii.iter().all(|r| r.is_finite() && *r > 0.0) || !radii.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("radii must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// How a callable is sampled on a gauge ball: the center, `layers` gauge spheres in each
/// gap between consecutive radii (the outer one being the radius itself), each sphere a
/// dilated copy of the unit-sphere lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallSampling {
    pub sphere: SphereSampling,
    pub layers: usize,
}

impl BallSampling {
    pub fn new(sphere: SphereSampling, layers: usize) -> Self {
        Self { sphere, layers: layers.max(1) }
    }

    /// Halves both the angular and the radial spacing.
    pub fn refined(&self) -> Self {
        Self { sphere: self.sphere.refined(), layers: 2 * self.layers }
    }
}

impl Default for BallSampling {
    fn default() -> Self {
        Self::new(SphereSampling::default(), 4)
    }
}

fn callable_profile(
    u: Field,
    radii: &[f64],
    center: &GroupPoint,
    s: &BallSampling,
    ext: Extremum,
    exec: Execution,
) -> Result<MinProfile> {
    check_radii(radii)?;
    let pick = |a: f64, b: f64| match ext {
        Extremum::Min => a.min(b),
        Extremum::Max => a.max(b),
    };
    let checked = |v: f64, p: &GroupPoint| -> Result<f64> {
        if v.is_nan() {
            return Err(Error::Precondition(format!("u is undefined at {:?}; the ball exits its region", p.coords())));
        }
        Ok(v)
    };
    let mut acc = checked(u(center), center)?;
    let mut values = Vec::with_capacity(radii.len());
    let mut prev = 0.0;
    for &r in radii {
        for j in 1..=s.layers {
            let rr = prev + (r - prev) * j as f64 / s.layers as f64;
            let pts = gauge_sphere(center, rr, &s.sphere)?;
            let vals = exec.map(pts.len(), |k| u(&pts[k]));
            for (v, p) in vals.into_iter().zip(&pts) {
                acc = pick(acc, checked(v, p)?);
            }
        }
        values.push(acc);
        prev = r;
    }
    MinProfile::new(radii.to_vec(), values, ProfileSource::Callable, ext)
}

/// m(r) = min_{d_H(ξ, center) ≤ r} u(ξ) over a quasi-uniform ball sample.
pub fn min_on_ball_profile(
    u: Field,
    radii: &[f64],
    center: &GroupPoint,
    sampling: &BallSampling,
    exec: Execution,
) -> Result<MinProfile> {
    callable_profile(u, radii, center, sampling, Extremum::Min, exec)
}

/// M(r) = max_{d_H(ξ, center) ≤ r} u(ξ).
pub fn max_on_ball_profile(
    u: Field,
    radii: &[f64],
    center: &GroupPoint,
    sampling: &BallSampling,
    exec: Execution,
) -> Result<MinProfile> {
    callable_profile(u, radii, center, sampling, Extremum::Max, exec)
}

fn grid_profile(
    u: &GridFunction,
    radii: &[f64],
    center: [f64; 3],
    ext: Extremum,
    exec: Execution,
) -> Result<MinProfile> {
    check_radii(radii)?;
    let c = GroupPoint::h1(center[0], center[1], center[2]);
    let (lo, hi) = (u.grid.lo, u.grid.hi());
    let r_max = *radii.last().expect("checked non-empty");
    for p in gauge_sphere(&c, r_max, &SphereSampling::new(15, 32))? {
        let v = p.coords();
        if (0..3).any(|a| v[a] < lo[a] - 1e-12 || v[a] > hi[a] + 1e-12) {
            return Err(Error::Precondition(format!("gauge ball of radius {r_max} exits the grid box")));
        }
    }
    let ci = c.inverse();
    let mut nodes: Vec<(f64, f64)> = exec
        .map(u.grid.len(), |idx| {
            let v = u.values[idx];
            if u.mask[idx] == NodeKind::Exterior || !v.is_finite() {
                return None;
            }
            let p = u.grid.point(idx);
            let d = gauge_norm(&group_compose(&ci, &GroupPoint::h1(p[0], p[1], p[2])).ok()?);
            (d <= r_max * (1.0 + 1e-12)).then_some((d, v))
        })
        .into_iter()
        .flatten()
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut values = Vec::with_capacity(radii.len());
    let mut acc: Option<f64> = None;
    let mut it = nodes.iter().peekable();
    for &r in radii {
        while let Some(&&(d, v)) = it.peek() {
            if d > r * (1.0 + 1e-12) {
                break;
            }
            acc = Some(match (acc, ext) {
                (None, _) => v,
                (Some(a), Extremum::Min) => a.min(v),
                (Some(a), Extremum::Max) => a.max(v),
            });
            it.next();
        }
        values.push(acc.ok_or_else(|| Error::Precondition(format!("no data node within radius {r}")))?);
    }
    MinProfile::new(radii.to_vec(), values, ProfileSource::Grid, ext)
}

/// Exact minimum over the non-exterior nodes of `u` inside each gauge ball. Nodes outside
/// the domain mask are ignored; the largest ball must fit in the grid box.
pub fn grid_min_profile(u: &GridFunction, radii: &[f64], center: [f64; 3], exec: Execution) -> Result<MinProfile> {
    grid_profile(u, radii, center, Extremum::Min, exec)
}

pub fn grid_max_profile(u: &GridFunction, radii: &[f64], center: [f64; 3], exec: Execution) -> Result<MinProfile> {
    grid_profile(u, radii, center, Extremum::Max, exec)
}

/// Which inequality is checked. For a Min profile: `MinusSuper` is M̃⁻u ≥ 0 with G built
/// on α, `PlusSuper` is M̃⁺u ≥ 0 with G built on β. Through M(r) of a subsolution the same
/// cases cover M̃⁺u ≤ 0 and M̃⁻u ≤ 0 respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HadamardCase {
    MinusSuper,
    PlusSuper,
}

fn check_exponents(ex: &Exponents, case: HadamardCase) -> Result<()> {
    let q1 = (ex.q as f64) - 1.0;
    let product = (ex.alpha - 1.0) * (ex.beta - 1.0);
    if !(ex.alpha >= 1.0) || ex.alpha > ex.beta || (product - q1 * q1).abs() > 1e-9 * q1 * q1 {
        return Err(Error::InvalidArgument(format!(
            "exponents alpha = {}, beta = {} do not come from one ellipticity pair with Q = {}",
            ex.alpha, ex.beta, ex.q
        )));
    }
    if case == HadamardCase::PlusSuper && ex.beta == 2.0 {
        return Err(Error::InvalidArgument("beta = 2 leaves G degenerate".into()));
    }
    Ok(())
}

/// G(r) relative to r₁: log(r/r₁) on the logarithmic branch, otherwise r^{2−γ} − r₁^{2−γ}
/// with γ = α or β.
pub fn hadamard_g(ex: &Exponents, case: HadamardCase, r1: f64, r: f64) -> f64 {
    match case {
        HadamardCase::MinusSuper if ex.log_branch => (r / r1).ln(),
        HadamardCase::MinusSuper => r.powf(2.0 - ex.alpha) - r1.powf(2.0 - ex.alpha),
        HadamardCase::PlusSuper => r.powf(2.0 - ex.beta) - r1.powf(2.0 - ex.beta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadamardRow {
    pub r: f64,
    pub m: f64,
    pub g: f64,
    pub interpolant: f64,
    /// m − interpolant for a Min profile, interpolant − M for a Max profile; ≥ 0 when the
    /// three-sphere inequality holds.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HadamardReport {
    pub case: HadamardCase,
    pub extremum: Extremum,
    pub r1: f64,
    pub r_outer: f64,
    pub rows: Vec<HadamardRow>,
    pub min_slack: f64,
    /// Largest amount by which an interior sample falls below the chord of its neighbours in
    /// the (G, m) plane (above it for Max profiles). Concavity means ≤ 0; −∞ with < 3 rows.
    pub concavity_defect: f64,
}

impl HadamardReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack >= -tol
    }

    /// CSV with columns r, m, G, interpolant, slack.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "r,m,G,interpolant,slack")?;
        for row in &self.rows {
            writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", row.r, row.m, row.g, row.interpolant, row.slack)?;
        }
        Ok(())
    }
}

/// Checks m(r) ≥ (G(r)/G(R)) m(R) + (1 − G(r)/G(R)) m(r₁) at every profile radius in
/// [r₁, R]; both r₁ and R must be profile radii.
pub fn hadamard_check(
    p: &MinProfile,
    ex: &Exponents,
    case: HadamardCase,
    r1: f64,
    r_outer: f64,
) -> Result<HadamardReport> {
    if p.extremum != Extremum::Min {
        return Err(Error::InvalidArgument("hadamard_check needs a Min profile; use dual_max_check".into()));
    }
    check_exponents(ex, case)?;
    if !(r1 > 0.0 && r1 < r_outer) {
        return Err(Error::InvalidArgument(format!("need 0 < r1 < R, got r1 = {r1}, R = {r_outer}")));
    }
    let (i1, i_r) = (p.index_of(r1)?, p.index_of(r_outer)?);
    let (m1, m_r) = (p.values[i1], p.values[i_r]);
    let g_r = hadamard_g(ex, case, r1, r_outer);
    let rows: Vec<HadamardRow> = (i1..=i_r)
        .map(|k| {
            let r = p.radii[k];
            let g = if k == i1 { 0.0 } else { hadamard_g(ex, case, r1, r) };
            let s = g / g_r;
            let interpolant = s * m_r + (1.0 - s) * m1;
            HadamardRow { r, m: p.values[k], g, interpolant, slack: p.values[k] - interpolant }
        })
        .collect();
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let concavity_defect = rows
        .windows(3)
        .map(|w| {
            let s = (w[1].g - w[0].g) / (w[2].g - w[0].g);
            (1.0 - s) * w[0].m + s * w[2].m - w[1].m
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HadamardReport { case, extremum: Extremum::Min, r1, r_outer, rows, min_slack, concavity_defect })
}

/// The mirrored inequality M(r) ≤ (G(r)/G(R)) M(R) + (1 − G(r)/G(R)) M(r₁) for a Max
/// profile, computed as `hadamard_check` on the profile of −u.
pub fn dual_max_check(
    p: &MinProfile,
    ex: &Exponents,
    case: HadamardCase,
    r1: f64,
    r_outer: f64,
) -> Result<HadamardReport> {
    if p.extremum != Extremum::Max {
        return Err(Error::InvalidArgument("dual_max_check needs a Max profile".into()));
    }
    let mut rep = hadamard_check(&p.negated(), ex, case, r1, r_outer)?;
    for row in &mut rep.rows {
        row.m = -row.m;
        row.interpolant = -row.interpolant;
    }
    rep.extremum = Extremum::Max;
    Ok(rep)
}

/// u = min{R^{2−β}, ρ^{2−β}}: positive, bounded, non-constant and a supersolution of M̃⁺ ≥ 0
/// on all of Hⁿ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiouvilleWitness {
    pub radius: f64,
    pub exponents: Exponents,
}

impl LiouvilleWitness {
    pub fn value(&self, xi: &GroupPoint) -> f64 {
        let p = 2.0 - self.exponents.beta;
        let rho = gauge_norm(xi);
        if rho <= self.radius {
            self.radius.powf(p)
        } else {
            rho.powf(p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessCheck {
    pub samples: usize,
    pub seed: u64,
    /// Flow step of the discrete Hessian across the seam ρ = R.
    pub h: f64,
}

impl Default for WitnessCheck {
    fn default() -> Self {
        Self { samples: 500, seed: 0x11, h: 1.0 / 32.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub min_value: f64,
    pub max_value: f64,
    /// max |M̃⁺| / scale of the classical Hessian of ρ^{2−β} on ρ > R.
    pub outer_relative_residual: f64,
    /// max |M̃⁺| of the (zero) Hessian of the constant piece.
    pub inner_residual: f64,
    /// min of M̃⁺ applied to the flow-difference Hessian at points within h of the seam.
    pub seam_min_residual: f64,
    pub seam_allowance: f64,
    pub positive: bool,
    pub non_constant: bool,
}

impl WitnessReport {
    pub fn passed(&self, residual_tol: f64) -> bool {
        self.positive
            && self.non_constant
            && self.outer_relative_residual <= residual_tol
            && self.inner_residual <= residual_tol
            && self.seam_min_residual >= -self.seam_allowance
    }
}

/// Builds the witness for (λ, Λ) on Hⁿ and verifies it: positivity and non-constancy on
/// random points in ρ ∈ (0, 4R), classical residuals on both smooth pieces, and the
/// discrete residual across the seam against the allowance 10h.
pub fn liouville_witness(
    radius: f64,
    e: &Ellipticity,
    n: usize,
    check: &WitnessCheck,
) -> Result<(LiouvilleWitness, WitnessReport)> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("witness radius must be positive, got {radius}")));
    }
    let exps = crate::fundamental::exponents(e, n);
    let w = LiouvilleWitness { radius, exponents: exps };
    let mut rng = rng_from_seed(check.seed);
    let spread: Vec<GroupPoint> =
        (0..check.samples).map(|_| point_in_gauge_shell(&mut rng, n, 1e-3 * radius, 4.0 * radius)).collect();
    let outer: Vec<GroupPoint> =
        (0..check.samples).map(|_| point_in_gauge_shell(&mut rng, n, 1.01 * radius, 4.0 * radius)).collect();
    let seam: Vec<GroupPoint> =
        (0..check.samples).map(|_| point_in_gauge_shell(&mut rng, n, radius - check.h, radius + check.h)).collect();
    let vals: Vec<f64> = spread.iter().map(|p| w.value(p)).collect();
    let min_value = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max_value = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let phi2 = FundamentalSolution::canonical(Family::Phi2, e, n);
    let outer_relative_residual = verify_residual(&phi2, e, &outer)?.max_relative;
    let inner_residual = pucci(&crate::linalg::SymmetricMatrix::zeros(2 * n), e, PucciSign::Plus).abs();
    let f = |p: &GroupPoint| w.value(p);
    let mut seam_min_residual = f64::INFINITY;
    for p in &seam {
        let (_, hess) = flow_fd_derivatives(&f, p, check.h)?;
        seam_min_residual = seam_min_residual.min(pucci(&hess, e, PucciSign::Plus));
    }
    let report = WitnessReport {
        min_value,
        max_value,
        outer_relative_residual,
        inner_residual,
        seam_min_residual,
        seam_allowance: 10.0 * check.h,
        positive: min_value > 0.0,
        non_constant: max_value - min_value > 1e-12 * max_value.abs(),
    };
    Ok((w, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatnessReport {
    /// α ≤ 2: flatness is then a necessary consequence of the Liouville property.
    pub conclusive: bool,
    pub bounded_below: bool,
    /// Why the hypotheses fail, when they visibly do.
    pub precondition: Option<String>,
    pub profile: Option<MinProfile>,
    /// m(first radius) − m(last radius) ≥ 0.
    pub spread: f64,
    /// Limit R → ∞ of the Hadamard interpolant at each radius, with r₁ the first radius and
    /// m(∞) estimated by the last sample.
    pub extrapolated_bound: Vec<f64>,
    pub flat: bool,
}

/// Samples m(r) of a supposed M̃⁻ supersolution over growing radii and reports whether it
/// stays constant within `tol`·max(1, |m|). A flat profile is necessary, not sufficient,
/// for constancy; with α > 2 the run is diagnostic only.
pub fn liouville_flatness_probe(
    u: Field,
    ex: &Exponents,
    radii: &[f64],
    center: &GroupPoint,
    sampling: &BallSampling,
    tol: f64,
    exec: Execution,
) -> Result<FlatnessReport> {
    check_exponents(ex, HadamardCase::MinusSuper)?;
    let conclusive = ex.alpha <= 2.0;
    let profile = match min_on_ball_profile(u, radii, center, sampling, exec) {
        Ok(p) => p,
        Err(Error::Precondition(msg)) => {
            return Ok(FlatnessReport {
                conclusive,
                bounded_below: false,
                precondition: Some(msg),
                profile: None,
                spread: f64::NAN,
                extrapolated_bound: Vec::new(),
                flat: false,
            })
        }
        Err(e) => return Err(e),
    };
    let bounded_below = profile.values.iter().all(|v| v.is_finite());
    let first = profile.values[0];
    let last = *profile.values.last().expect("non-empty");
    let spread = first - last;
    let r1 = radii[0];
    let extrapolated_bound = radii
        .iter()
        .map(|&r| {
            if conclusive {
                first
            } else {
                let g_inf = -r1.powf(2.0 - ex.alpha);
                let s = hadamard_g(ex, HadamardCase::MinusSuper, r1, r) / g_inf;
                s * last + (1.0 - s) * first
            }
        })
        .collect();
    let flat = bounded_below && spread.abs() <= tol * first.abs().max(1.0);
    Ok(FlatnessReport {
        conclusive,
        bounded_below,
        precondition: (!bounded_below).then(|| "u is not bounded below on the sampled balls".to_string()),
        profile: Some(profile),
        spread,
        extrapolated_bound,
        flat,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackReport {
    pub radii: Vec<f64>,
    /// m(r)·r^{β−2}.
    pub products: Vec<f64>,
    pub violations: usize,
    /// Largest decrease between consecutive products relative to their magnitude.
    pub max_relative_drop: f64,
}

/// m(r_k)·r_k^{β−2} must be nondecreasing; a drop larger than `tol` relative to the
/// product counts as a violation.
pub fn harnack_monotonicity(p: &MinProfile, beta: f64, tol: f64) -> Result<HarnackReport> {
    if p.extremum != Extremum::Min {
        return Err(Error::InvalidArgument("harnack_monotonicity needs a Min profile".into()));
    }
    if p.values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Precondition("profile of a nonnegative supersolution expected".into()));
    }
    let products: Vec<f64> = p.radii.iter().zip(&p.values).map(|(r, m)| m * r.powf(beta - 2.0)).collect();
    let mut violations = 0;
    let mut max_relative_drop = 0.0f64;
    for w in products.windows(2) {
        let drop = (w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE);
        max_relative_drop = max_relative_drop.max(drop);
        if drop > tol {
            violations += 1;
        }
    }
    Ok(HarnackReport { radii: p.radii.clone(), products, violations, max_relative_drop })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureConfig {
    pub samples: usize,
    pub seed: u64,
    /// Allowed spread of u on a gauge sphere relative to 1 + |mean|.
    pub radial_tol: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self { samples: 400_000, seed: 0x5eed, radial_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureRow {
    pub t: f64,
    /// Estimated Lebesgue measure of B_{R/2} ∩ {u > t}.
    pub measure: f64,
    /// R^Q (u(R)/t)^{Q/(β−2)}.
    pub reference: f64,
    pub ratio: f64,
    /// Neither empty nor the whole half-ball.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub rows: Vec<MeasureRow>,
    pub ball_measure: f64,
    /// sup of measure / reference over the t values: an empirical weak-Harnack constant.
    pub empirical_constant: f64,
    /// Least-squares slope of log measure against log t over resolved rows.
    pub slope: Option<f64>,
    /// Q/(2 − β), the slope for u = ρ^{2−β}.
    pub expected_slope: f64,
    pub slope_deviation: Option<f64>,
}

/// Monte-Carlo estimate of the superlevel measures in B_{R/2} for a radial u ≥ 0 centered
/// at the origin, compared with R^Q (u(R)/t)^{Q/(β−2)}.
pub fn harnack_measure_estimate(
    u: Field,
    n: usize,
    r_big: f64,
    t_values: &[f64],
    ex: &Exponents,
    cfg: &MeasureConfig,
    exec: Execution,
) -> Result<MeasureReport> {
    if !(r_big > 0.0) || t_values.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("need R > 0 and positive levels t".into()));
    }
    let origin = GroupPoint::origin(n);
    let ring = SphereSampling::new(9, 16);
    for s in [0.25, 0.5, 1.0, 1.5] {
        let pts = gauge_sphere(&origin, s * r_big, &ring)?;
        let vals = exec.map(pts.len(), |k| u(&pts[k]));
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        if !(hi - lo <= cfg.radial_tol * (1.0 + mean.abs())) {
            return Err(Error::Precondition(format!(
                "u is not radial: spread {:e} on the gauge sphere of radius {}",
                hi - lo,
                s * r_big
            )));
        }
        if lo < 0.0 {
            return Err(Error::Precondition("u must be nonnegative".into()));
        }
    }
    let u_r = u(&gauge_sphere(&origin, r_big, &SphereSampling::new(1, 1))?[0]);
    let half = 0.5 * r_big;
    let dim = 2 * n + 1;
    let mut lo = vec![-half; dim];
    let mut hi = vec![half; dim];
    lo[dim - 1] = -half * half;
    hi[dim - 1] = half * half;
    let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let mut rng = rng_from_seed(cfg.seed);
    let coords: Vec<Vec<f64>> =
        (0..cfg.samples).map(|_| (0..dim).map(|k| rng.gen_range(lo[k]..hi[k])).collect()).collect();
    let vals: Vec<Option<f64>> = exec.map(coords.len(), |k| {
        let p = GroupPoint::new(n, coords[k].clone()).expect("box has 2n+1 coordinates");
        (gauge_norm(&p) < half).then(|| u(&p))
    });
    let inside: Vec<f64> = vals.into_iter().flatten().collect();
    let cell = box_volume / cfg.samples as f64;
    let ball_measure = inside.len() as f64 * cell;
    let q = ex.q as f64;
    let rows: Vec<MeasureRow> = t_values
        .iter()
        .map(|&t| {
            let count = inside.iter().filter(|&&v| v > t).count();
            let measure = count as f64 * cell;
            let reference = r_big.powf(q) * (u_r / t).powf(q / (ex.beta - 2.0));
            MeasureRow {
                t,
                measure,
                reference,
                ratio: measure / reference,
                resolved: count > 0 && count < inside.len(),
            }
        })
        .collect();
    let empirical_constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let fit: Vec<(f64, f64)> = rows.iter().filter(|r| r.resolved).map(|r| (r.t.ln(), r.measure.ln())).collect();
    let slope = (fit.len() >= 2).then(|| {
        let k = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / k;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let expected_slope = q / (2.0 - ex.beta);
    Ok(MeasureReport {
        rows,
        ball_measure,
        empirical_constant,
        slope,
        expected_slope,
        slope_deviation: slope.map(|s| (s / expected_slope - 1.0).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fundamental::exponents;

    fn unit() -> Ellipticity {
        Ellipticity::new(1.0, 1.0).unwrap()
    }

    fn coarse() -> BallSampling {
        BallSampling::new(SphereSampling::new(9, 16), 2)
    }

    #[test]
    fn gauge_norm_profile_is_center_value() {
        let radii = [0.25, 0.5, 1.0];
        let p =
            min_on_ball_profile(&gauge_norm, &radii, &GroupPoint::origin(1), &coarse(), Execution::Sequential).unwrap();
        assert_eq!(p.values, vec![0.0; 3]);
    }

    #[test]
    fn constant_profile_has_zero_slack() {
        let ex = exponents(&Ellipticity::new(1.0, 2.0).unwrap(), 1);
        let radii = [0.2, 0.4, 0.6, 0.8];
        let p = min_on_ball_profile(&|_| 3.0, &radii, &GroupPoint::origin(1), &coarse(), Execution::Parallel).unwrap();
        for case in [HadamardCase::MinusSuper, HadamardCase::PlusSuper] {
            let rep = hadamard_check(&p, &ex, case, 0.2, 0.8).unwrap();
            assert!(rep.rows.iter().all(|r| r.slack.abs() < 1e-15));
        }
    }

    #[test]
    fn nan_means_ball_exits_region() {
        let u = |p: &GroupPoint| if gauge_norm(p) > 0.5 { f64::NAN } else { 1.0 };
        let err = min_on_ball_profile(&u, &[0.3, 0.6], &GroupPoint::origin(1), &coarse(), Execution::Sequential);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn mismatched_exponents_rejected() {
        let mut ex = exponents(&unit(), 1);
        ex.beta = 5.0;
        let p = MinProfile::new(vec![0.5, 1.0], vec![1.0, 1.0], ProfileSource::Callable, Extremum::Min).unwrap();
        assert!(hadamard_check(&p, &ex, HadamardCase::PlusSuper, 0.5, 1.0).is_err());
    }

    #[test]
    fn radii_must_be_profile_points() {
        let ex = exponents(&unit(), 1);
        let p = MinProfile::new(vec![0.5, 1.0], vec![1.0, 1.0], ProfileSource::Callable, Extremum::Min).unwrap();
        assert!(hadamard_check(&p, &ex, HadamardCase::PlusSuper, 0.6, 1.0).is_err());
    }

    #[test]
    fn witness_values() {
        let (w, rep) = liouville_witness(1.0, &unit(), 1, &WitnessCheck::default()).unwrap();
        assert_eq!(w.value(&GroupPoint::origin(1)), 1.0);
        let xi = GroupPoint::h1(1.2, 0.3, -0.5);
        assert!((w.value(&xi) - gauge_norm(&xi).powi(-2)).abs() < 1e-15);
        assert!(rep.positive && rep.non_constant);
        assert_eq!(rep.inner_residual, 0.0);
    }

    #[test]
    fn constant_harnack_products_increase() {
        let p = MinProfile::new(vec![0.2, 0.4, 0.8], vec![2.0; 3], ProfileSource::Callable, Extremum::Min).unwrap();
        let rep = harnack_monotonicity(&p, 4.0, 0.0).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.products.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn measure_vanishes_above_max() {
        let ex = exponents(&unit(), 1);
        let cfg = MeasureConfig { samples: 20_000, ..Default::default() };
        let rep = harnack_measure_estimate(&|_| 1.0, 1, 1.0, &[2.0, 0.5], &ex, &cfg, Execution::Parallel).unwrap();
        assert_eq!(rep.rows[0].measure, 0.0);
        assert_eq!(rep.rows[0].ratio, 0.0);
        assert_eq!(rep.rows[1].measure, rep.ball_measure);
    }

    #[test]
    fn non_radial_input_rejected() {
        let ex = exponents(&unit(), 1);
        let cfg = MeasureConfig { samples: 1000, ..Default::default() };
        let u = |p: &GroupPoint| 1.0 + p.coords()[0].abs();
        assert!(matches!(
            harnack_measure_estimate(&u, 1, 1.0, &[0.5], &ex, &cfg, Execution::Sequential),
            Err(Error::Precondition(_))
        ));
    }
}
