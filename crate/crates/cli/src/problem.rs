//! Assembles library objects from a [`Config`], validating each field before any command runs.

use std::result::Result;
use std::sync::Arc;

use heisenberg_pucci::solver::{BarrierStrategy, Hamiltonian};
use heisenberg_pucci::*;

use crate::config::Config;
use crate::error::{CliError, Context};

pub fn group_index(cfg: &Config) -> Result<usize, CliError> {
    let n: usize = cfg.get("problem.n")?;
    if n == 0 {
        return Err(CliError::Config("key `problem.n` must be at least 1".into()));
    }
    Ok(n)
}

/// λ and Λ; integer inputs keep their exact ratio so that α = 2 is detected exactly.
pub fn ellipticity(cfg: &Config) -> Result<Ellipticity, CliError> {
    let l: f64 = cfg.get("problem.ellipticity.lambda")?;
    let big: f64 = cfg.get("problem.ellipticity.Lambda")?;
    if !(l > 0.0 && l.is_finite() && big.is_finite()) {
        return Err(CliError::Config(format!("ellipticity.lambda must be positive and finite, got {l}")));
    }
    if l > big {
        return Err(CliError::Config(format!("requires lambda ≤ Lambda, got lambda = {l}, Lambda = {big}")));
    }
    let integral = |v: f64| v.fract() == 0.0 && v <= u32::MAX as f64;
    if integral(l) && integral(big) {
        Ellipticity::from_integers(l as u64, big as u64).context("ellipticity")
    } else {
        Ellipticity::new(l, big).context("ellipticity")
    }
}

pub fn sign(cfg: &Config) -> Result<PucciSign, CliError> {
    Ok(match cfg.choice("problem.operator", &["plus", "minus"])? {
        "plus" => PucciSign::Plus,
        _ => PucciSign::Minus,
    })
}

pub fn operator(cfg: &Config, e: Ellipticity) -> Result<OperatorSpec, CliError> {
    Ok(match sign(cfg)? {
        PucciSign::Plus => OperatorSpec::pucci_plus(e),
        PucciSign::Minus => OperatorSpec::pucci_minus(e),
    })
}

pub fn first_order(cfg: &Config) -> Result<FirstOrderBound, CliError> {
    FirstOrderBound::new(cfg.get("problem.K")?, cfg.get("problem.M")?, Weight::None).context("first-order bound")
}

pub fn point(n: usize, v: [f64; 3], key: &str) -> Result<GroupPoint, CliError> {
    if n != 1 {
        return Err(CliError::Config(format!("key `{key}` gives a point of H¹ but problem.n = {n}")));
    }
    Ok(GroupPoint::h1(v[0], v[1], v[2]))
}

pub fn domain(cfg: &Config, n: usize) -> Result<DomainSpec, CliError> {
    let c = || point(n, cfg.triple("problem.domain.center")?, "problem.domain.center");
    match cfg.choice("problem.domain", &["annulus", "ball", "cap"])? {
        "annulus" => {
            DomainSpec::gauge_annulus(c()?, cfg.get("problem.domain.inner")?, cfg.get("problem.domain.outer")?)
                .context("annulus")
        }
        "ball" => DomainSpec::gauge_ball(c()?, cfg.get("problem.domain.radius")?).context("ball"),
        _ => DomainSpec::characteristic_cap(n, cfg.get("problem.domain.t0")?).context("cap"),
    }
}

pub fn family(cfg: &Config) -> Result<Family, CliError> {
    Ok(match cfg.choice("problem.psi.family", &["phi1", "phi2", "psi1", "psi2"])? {
        "phi1" => Family::Phi1,
        "phi2" => Family::Phi2,
        "psi1" => Family::Psi1,
        _ => Family::Psi2,
    })
}

/// Boundary data, also used as the profiled function of the analytic checks.
#[derive(Debug, Clone)]
pub enum Data {
    Radial(FundamentalSolution),
    Constant(f64),
    Affine([f64; 4]),
}

impl Data {
    pub fn from_config(cfg: &Config, e: &Ellipticity, n: usize) -> Result<Self, CliError> {
        Ok(match cfg.choice("problem.psi", &["fundamental", "constant", "affine"])? {
            "fundamental" => {
                let pole = point(n, cfg.triple("problem.psi.pole")?, "problem.psi.pole")?;
                Data::Radial(
                    FundamentalSolution::new(
                        family(cfg)?,
                        cfg.get("problem.psi.c1")?,
                        cfg.get("problem.psi.c2")?,
                        pole,
                        exponents(e, n),
                    )
                    .context("radial data")?,
                )
            }
            "constant" => Data::Constant(cfg.get("problem.psi.constant")?),
            _ => {
                let v = cfg.list("problem.psi.affine")?;
                Data::Affine(v.as_slice().try_into().map_err(|_| {
                    CliError::Config(format!("key `problem.psi.affine` needs four values, got {}", v.len()))
                })?)
            }
        })
    }

    /// +∞ at the pole of radial data, so that minima ignore it.
    pub fn at(&self, p: &GroupPoint) -> f64 {
        match self {
            Data::Radial(fs) => fs.value(p).unwrap_or(f64::INFINITY),
            Data::Constant(c) => *c,
            Data::Affine(a) => {
                let v = p.coords();
                a[0] + a[1] * v[0] + a[2] * v[1] + a[3] * v[v.len() - 1]
            }
        }
    }

    pub fn at3(&self, p: [f64; 3]) -> f64 {
        self.at(&GroupPoint::h1(p[0], p[1], p[2]))
    }

    /// True when the data solves the configured equation away from its pole, so that the
    /// solver output can be compared with it.
    pub fn is_exact_for(&self, sign: PucciSign, hamiltonian_free: bool) -> bool {
        match self {
            Data::Radial(fs) => fs.family.sign() == sign && hamiltonian_free,
            Data::Constant(_) => true,
            Data::Affine(_) => hamiltonian_free,
        }
    }
}

pub fn solve_config(cfg: &Config) -> Result<SolveConfig, CliError> {
    let h: f64 = cfg.get("grid.h")?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(CliError::Config(format!("key `grid.h` must be positive, got {h}")));
    }
    let mut sc = SolveConfig::new(h);
    sc.ht = cfg.get_opt("grid.ht")?;
    sc.levels = cfg.get("grid.levels")?;
    sc.tolerance = cfg.get("grid.tolerance")?;
    sc.max_iterations = cfg.get("grid.max_iterations")?;
    sc.momentum = cfg.get("grid.momentum")?;
    sc.barriers = match cfg.choice("grid.barriers", &["auto", "exterior_balls", "annulus", "glued"])? {
        "auto" => BarrierStrategy::Auto,
        "exterior_balls" => BarrierStrategy::ExteriorBalls,
        "annulus" => BarrierStrategy::Annulus,
        _ => BarrierStrategy::Glued,
    };
    sc.boundary = match cfg.choice("grid.boundary", &["extrapolated", "trace", "neighborhood"])? {
        "extrapolated" => BoundaryMode::Extrapolated,
        "trace" => BoundaryMode::Trace,
        _ => BoundaryMode::Ambient,
    };
    sc.execution = execution(cfg)?;
    sc.bounding_box = match (cfg.triple_opt("grid.box.lo")?, cfg.triple_opt("grid.box.hi")?) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(CliError::Config("grid.box.lo and grid.box.hi must be given together".into())),
    };
    if !(sc.tolerance > 0.0) || sc.levels == 0 {
        return Err(CliError::Config("grid.tolerance must be positive and grid.levels at least 1".into()));
    }
    let fb = first_order(cfg)?;
    if fb.k > 0.0 || fb.m > 0.0 {
        let (k, m) = (fb.k, fb.m);
        sc.hamiltonian = Some(Hamiltonian { f: Arc::new(move |_, p: [f64; 2]| k * p[0].hypot(p[1]) - m), bound: fb });
    }
    Ok(sc)
}

pub fn execution(cfg: &Config) -> Result<Execution, CliError> {
    Ok(match cfg.choice("grid.execution", &["parallel", "sequential"])? {
        "parallel" => Execution::Parallel,
        _ => Execution::Sequential,
    })
}

pub fn radii(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let r = cfg.list("problem.radii")?;
    if r.len() < 2 || r.windows(2).any(|w| !(w[0] < w[1])) || !(r[0] > 0.0) {
        return Err(CliError::Config("key `problem.radii` must be at least two increasing positive radii".into()));
    }
    Ok(r)
}
