//! Seeded randomness and gauge-sphere sampling.
//!
//! All randomness flows through SplitMix64 (Steele, Lea and Flood, 2014): the state
//! advances by 0x9E3779B97F4A7C15 and each output is the state passed through the
//! mixer `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//! z ^ (z >> 31)`. Uniform reals use the top 53 bits of one output scaled by 2⁻⁵³.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::Result;
use crate::group::{dilate, group_compose, GroupPoint};

pub type SeededRng = SplitMix64;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    SplitMix64::seed_from_u64(seed)
}

/// Uniform point in the axis-aligned box `lo..hi` (per coordinate).
pub fn uniform_point<R: Rng>(rng: &mut R, n: usize, lo: &[f64], hi: &[f64]) -> GroupPoint {
    let c = (0..2 * n + 1).map(|k| rng.gen_range(lo[k]..hi[k])).collect();
    GroupPoint::new(n, c).expect("box has 2n+1 coordinates")
}

/// Uniform point with gauge norm in [rho_min, rho_max], with a uniformly drawn direction
/// on the unit gauge sphere.
pub fn point_in_gauge_shell<R: Rng>(rng: &mut R, n: usize, rho_min: f64, rho_max: f64) -> GroupPoint {
    let phi = rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
    let dir = random_unit_vector(rng, 2 * n);
    let r = rng.gen_range(rho_min..rho_max);
    let base = sphere_point(n, phi, &dir);
    dilate(r, &base).expect("positive radius")
}

pub(crate) fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// Seeded points on the Euclidean sphere |ξ − c| = r, or uniformly in the ball when `solid`.
pub fn euclidean_sphere(center: &GroupPoint, r: f64, count: usize, seed: u64, solid: bool) -> Vec<GroupPoint> {
    let dim = center.coords().len();
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let u = random_unit_vector(&mut rng, dim);
            let s = if solid { r * rng.gen::<f64>().powf(1.0 / dim as f64) } else { r };
            let c = center.coords().iter().zip(&u).map(|(a, b)| a + s * b).collect();
            GroupPoint::new(center.n(), c).expect("same dimension")
        })
        .collect()
}

/// The point of the unit gauge sphere at latitude φ ∈ [−π/2, π/2] in horizontal direction `dir`:
/// |ξ_H| = √cos φ, t = sin φ.
fn sphere_point(n: usize, phi: f64, dir: &[f64]) -> GroupPoint {
    let rad = phi.cos().max(0.0).sqrt();
    let mut c: Vec<f64> = dir.iter().map(|d| d * rad).collect();
    c.push(phi.sin());
    GroupPoint::new(n, c).expect("direction has length 2n")
}

/// Lattice resolution of a gauge-sphere sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereSampling {
    /// Interior latitude rings (the two poles are always added).
    pub latitudes: usize,
    /// Points per ring. For n > 1 these are seeded pseudo-random directions.
    pub longitudes: usize,
    pub seed: u64,
}

impl SphereSampling {
    pub fn new(latitudes: usize, longitudes: usize) -> Self {
        Self { latitudes, longitudes, seed: 0x5eed }
    }

    /// Doubles the lattice resolution, halving the spacing.
    pub fn refined(&self) -> Self {
        Self { latitudes: 2 * self.latitudes + 1, longitudes: 2 * self.longitudes, seed: self.seed }
    }

    pub fn count(&self) -> usize {
        self.latitudes * self.longitudes + 2
    }
}

impl Default for SphereSampling {
    fn default() -> Self {
        Self::new(31, 64)
    }
}

/// Quasi-uniform lattice on the unit gauge sphere ρ = 1, poles included.
pub fn unit_gauge_sphere(n: usize, s: &SphereSampling) -> Vec<GroupPoint> {
    let mut pts = Vec::with_capacity(s.count());
    let dirs: Vec<Vec<f64>> = if n == 1 {
        (0..s.longitudes)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / s.longitudes as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        let mut rng = rng_from_seed(s.seed);
        (0..s.longitudes).map(|_| random_unit_vector(&mut rng, 2 * n)).collect()
    };
    let zero = vec![0.0; 2 * n];
    pts.push(sphere_point(n, -std::f64::consts::FRAC_PI_2, &zero));
    for j in 1..=s.latitudes {
        let phi = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * j as f64 / (s.latitudes + 1) as f64;
        for d in &dirs {
            pts.push(sphere_point(n, phi, d));
        }
    }
    pts.push(sphere_point(n, std::f64::consts::FRAC_PI_2, &zero));
    pts
}

/// The gauge sphere of radius r about `center`: center ∘ δ_r(ω) for ω on the unit sphere.
pub fn gauge_sphere(center: &GroupPoint, r: f64, s: &SphereSampling) -> Result<Vec<GroupPoint>> {
    unit_gauge_sphere(center.n(), s).iter().map(|w| group_compose(center, &dilate(r, w)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{gauge_norm, h_distance};

    #[test]
    fn splitmix_reference_stream() {
        // First outputs of SplitMix64 seeded with 0, from the published reference implementation.
        let mut r = rng_from_seed(0);
        assert_eq!(r.gen::<u64>(), 0xE220A8397B1DCDAF);
        assert_eq!(r.gen::<u64>(), 0x6E789E6AA1B965F4);
    }

    #[test]
    fn sphere_points_have_unit_gauge() {
        for n in 1..=3 {
            for p in unit_gauge_sphere(n, &SphereSampling::new(7, 12)) {
                assert!((gauge_norm(&p) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn translated_sphere_distance() {
        let c = GroupPoint::h1(0.3, -0.2, 0.5);
        for p in gauge_sphere(&c, 0.7, &SphereSampling::new(5, 8)).unwrap() {
            assert!((h_distance(&p, &c).unwrap() - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn poles_included() {
        let pts = unit_gauge_sphere(1, &SphereSampling::new(3, 4));
        assert_eq!(pts.first().unwrap().coords(), &[0.0, 0.0, -1.0]);
        assert_eq!(pts.last().unwrap().coords(), &[0.0, 0.0, 1.0]);
    }
}
