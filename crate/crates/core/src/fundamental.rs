//! Nonlinear dimensions α, β and the explicit radial solutions Φ₁, Φ₂ (of M̃⁺ = 0) and
//! Ψ₁ = −Φ₂, Ψ₂ = −Φ₁ (of M̃⁻ = 0) away from their pole.

use crate::error::{Error, Result};
use crate::group::{gauge_norm, group_compose, heisenberg_hessian, GroupPoint, SecondOrderData, GAUGE_SINGULAR};
use crate::linalg::eigen_sym;
use crate::pucci::{pucci, Ellipticity, PucciSign};
use crate::radial::{radial_second_order, MonotonicityTag, RadialProfile};

/// |α − 2| below this selects the logarithmic branch when no exact ratio is known.
pub const LOG_BRANCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub alpha: f64,
    pub beta: f64,
    pub q: usize,
    /// α = 2, decided exactly for integer ellipticity constants.
    pub log_branch: bool,
}

/// α = λ(Q−1)/Λ + 1 and β = Λ(Q−1)/λ + 1 with Q = 2n + 2.
pub fn exponents(e: &Ellipticity, n: usize) -> Exponents {
    let q = 2 * n + 2;
    let qm1 = (q - 1) as f64;
    let alpha = e.lambda() * qm1 / e.big_lambda() + 1.0;
    let beta = e.big_lambda() * qm1 / e.lambda() + 1.0;
    let log_branch = match e.exact() {
        Some((l, big)) => l * (q as u64 - 1) == big,
        None => (alpha - 2.0).abs() <= LOG_BRANCH_TOL,
    };
    Exponents { alpha: if log_branch { 2.0 } else { alpha }, beta, q, log_branch }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Phi1,
    Phi2,
    Psi1,
    Psi2,
}

impl Family {
    /// The operator the family solves: M̃⁺ for Φ, M̃⁻ for Ψ.
    pub fn sign(self) -> PucciSign {
        match self {
            Family::Phi1 | Family::Phi2 => PucciSign::Plus,
            Family::Psi1 | Family::Psi2 => PucciSign::Minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSolution {
    pub family: Family,
    pub c1: f64,
    pub c2: f64,
    pub pole: GroupPoint,
    pub exponents: Exponents,
}

impl FundamentalSolution {
    pub fn new(family: Family, c1: f64, c2: f64, pole: GroupPoint, exponents: Exponents) -> Result<Self> {
        if !(c1 >= 0.0) || !c1.is_finite() || !c2.is_finite() {
            return Err(Error::InvalidArgument(format!("need C1 >= 0 and finite constants, got ({c1}, {c2})")));
        }
        if exponents.q != pole.q() {
            return Err(Error::DimensionMismatch(format!(
                "exponents for Q = {} but pole has Q = {}",
                exponents.q,
                pole.q()
            )));
        }
        Ok(Self { family, c1, c2, pole, exponents })
    }

    /// C1 = 1, C2 = 0, pole at the origin.
    pub fn canonical(family: Family, e: &Ellipticity, n: usize) -> Self {
        Self::new(family, 1.0, 0.0, GroupPoint::origin(n), exponents(e, n)).expect("canonical constants are valid")
    }

    pub fn with_pole(mut self, pole: GroupPoint) -> Result<Self> {
        if pole.n() != self.pole.n() {
            return Err(Error::DimensionMismatch("pole lives in a different group".into()));
        }
        self.pole = pole;
        Ok(self)
    }

    /// The profile φ(r) of r = ρ(pole⁻¹∘ξ).
    pub fn profile(&self) -> RadialProfile {
        let (c1, c2) = (self.c1, self.c2);
        let ex = self.exponents;
        let phi1 = if ex.log_branch {
            RadialProfile::log(c1, c2, MonotonicityTag::ConcaveIncreasing)
        } else if ex.alpha < 2.0 {
            RadialProfile::power(c1, 2.0 - ex.alpha, c2, MonotonicityTag::ConcaveIncreasing)
        } else {
            RadialProfile::power(-c1, 2.0 - ex.alpha, c2, MonotonicityTag::ConcaveIncreasing)
        };
        let phi2 = RadialProfile::power(c1, 2.0 - ex.beta, c2, MonotonicityTag::ConvexDecreasing);
        match self.family {
            Family::Phi1 => phi1,
            Family::Phi2 => phi2,
            Family::Psi1 => phi2.negated(),
            Family::Psi2 => phi1.negated(),
        }
    }

    /// r = ρ(pole⁻¹∘ξ), rejecting the pole itself.
    pub fn radius(&self, xi: &GroupPoint) -> Result<f64> {
        let r = gauge_norm(&group_compose(&self.pole.inverse(), xi)?);
        if r < GAUGE_SINGULAR {
            return Err(Error::Singular("evaluation at the pole".into()));
        }
        Ok(r)
    }

    /// (φ, φ′, φ″) at r = ρ(pole⁻¹∘ξ).
    pub fn eval(&self, xi: &GroupPoint) -> Result<(f64, f64, f64)> {
        let r = self.radius(xi)?;
        let p = self.profile();
        Ok((p.value(r), p.d1(r), p.d2(r)))
    }

    pub fn value(&self, xi: &GroupPoint) -> Result<f64> {
        Ok(self.eval(xi)?.0)
    }

    pub fn second_order(&self, xi: &GroupPoint) -> Result<SecondOrderData> {
        radial_second_order(&self.profile(), &self.pole, xi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max_abs: f64,
    /// max |residual| / scale, scale being the largest |eigenvalue| of the horizontal Hessian.
    pub max_relative: f64,
    pub samples: usize,
}

/// Evaluates the matching Pucci operator (M̃⁺ for Φ, M̃⁻ for Ψ) through the generic
/// Euclidean-derivative path at every sample.
pub fn verify_residual(fs: &FundamentalSolution, e: &Ellipticity, samples: &[GroupPoint]) -> Result<ResidualReport> {
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for xi in samples {
        let d = fs.second_order(xi)?;
        let h = heisenberg_hessian(&d, xi);
        let res = pucci(&h, e, fs.family.sign());
        let scale = eigen_sym(&h).eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        max_abs = max_abs.max(res.abs());
        if res != 0.0 {
            max_rel = max_rel.max(res.abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    Ok(ResidualReport { max_abs, max_relative: max_rel, samples: samples.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_examples() {
        let ex = exponents(&Ellipticity::new(1.0, 1.0).unwrap(), 1);
        assert_eq!((ex.alpha, ex.beta, ex.q), (4.0, 4.0, 4));
        let ex = exponents(&Ellipticity::from_integers(1, 3).unwrap(), 1);
        assert_eq!((ex.alpha, ex.beta), (2.0, 10.0));
        assert!(ex.log_branch);
        let ex = exponents(&Ellipticity::new(1.0, 3.0).unwrap(), 1);
        assert!(ex.log_branch);
        let ex = exponents(&Ellipticity::new(1.0, 2.0).unwrap(), 2);
        assert_eq!((ex.q, ex.alpha, ex.beta), (6, 3.5, 11.0));
    }

    #[test]
    fn folland_solution() {
        let e = Ellipticity::new(1.0, 1.0).unwrap();
        let fs = FundamentalSolution::canonical(Family::Phi2, &e, 1);
        let xi = GroupPoint::h1(0.4, -0.3, 0.9);
        let rho = gauge_norm(&xi);
        assert!((fs.value(&xi).unwrap() - rho.powi(-2)).abs() < 1e-14);
        assert!(fs.value(&GroupPoint::origin(1)).is_err());
    }

    #[test]
    fn log_branch_value_at_unit_radius() {
        let e = Ellipticity::from_integers(1, 3).unwrap();
        let fs = FundamentalSolution::new(Family::Phi1, 2.0, 0.75, GroupPoint::origin(1), exponents(&e, 1)).unwrap();
        assert_eq!(fs.value(&GroupPoint::h1(1.0, 0.0, 0.0)).unwrap(), 0.75);
    }

    #[test]
    fn pole_translation() {
        let e = Ellipticity::new(1.0, 2.0).unwrap();
        let pole = GroupPoint::h1(0.2, -0.5, 0.3);
        let xi = GroupPoint::h1(1.0, 0.7, -0.2);
        let a = FundamentalSolution::canonical(Family::Phi1, &e, 1).with_pole(pole.clone()).unwrap();
        let b = FundamentalSolution::canonical(Family::Phi1, &e, 1);
        let moved = group_compose(&pole.inverse(), &xi).unwrap();
        assert_eq!(a.value(&xi).unwrap(), b.value(&moved).unwrap());
    }

    #[test]
    fn constant_member_has_zero_residual() {
        let e = Ellipticity::new(1.0, 2.0).unwrap();
        let fs = FundamentalSolution::new(Family::Phi2, 0.0, 3.0, GroupPoint::origin(1), exponents(&e, 1)).unwrap();
        let r = verify_residual(&fs, &e, &[GroupPoint::h1(0.5, 0.1, 0.2)]).unwrap();
        assert_eq!(r.max_abs, 0.0);
    }
}
