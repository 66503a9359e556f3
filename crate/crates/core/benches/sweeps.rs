//! Parallel vs sequential arms of the data-parallel kernels. Build without default features
//! to time the sequential fallback on both arms.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use heisenberg_pucci::qualitative::BallSampling;
use heisenberg_pucci::sampling::SphereSampling;
use heisenberg_pucci::solver::operator_residual;
use heisenberg_pucci::*;

const ARMS: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn residual_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("operator_residual");
    let op = OperatorSpec::pucci_minus(Ellipticity::new(1.0, 2.0).unwrap());
    for k in [16usize, 32] {
        let h = 1.0 / k as f64;
        let dims = [2 * k + 1; 3];
        let grid = Grid::new([-1.0; 3], h, h, dims).unwrap();
        let f = GridFunction::sample(
            grid,
            |p| gauge_norm(&GroupPoint::h1(p[0], p[1], p[2] + 2.0)).powi(-2),
            |p| p[0].abs() < 0.6 && p[1].abs() < 0.6 && p[2].abs() < 0.5,
        );
        for (name, exec) in ARMS {
            g.bench_with_input(BenchmarkId::new(name, k), &f, |b, f| {
                b.iter(|| operator_residual(f, &op, None, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn annulus_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("perron_solve_annulus_h16");
    g.sample_size(10);
    let domain = DomainSpec::gauge_annulus(GroupPoint::origin(1), 0.5, 1.0).unwrap();
    let op = OperatorSpec::pucci_plus(Ellipticity::new(1.0, 1.0).unwrap());
    let psi = |p: [f64; 3]| gauge_norm(&GroupPoint::h1(p[0], p[1], p[2])).powi(-2);
    for (name, exec) in ARMS {
        let mut cfg = SolveConfig::new(1.0 / 16.0);
        cfg.levels = 1;
        cfg.bounding_box = Some(([-1.1; 3], [1.1; 3]));
        cfg.execution = exec;
        g.bench_function(name, |b| b.iter(|| perron_solve(&domain, &psi, &op, &cfg).unwrap()));
    }
    g.finish();
}

fn ball_profiles(c: &mut Criterion) {
    let mut g = c.benchmark_group("min_on_ball_profile");
    let e = Ellipticity::new(1.0, 2.0).unwrap();
    let fs = FundamentalSolution::canonical(Family::Psi2, &e, 1);
    let u = |p: &GroupPoint| fs.value(p).unwrap_or(f64::INFINITY);
    let radii: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let s = BallSampling::new(SphereSampling::new(31, 64), 4);
    for (name, exec) in ARMS {
        g.bench_function(name, |b| {
            b.iter(|| min_on_ball_profile(&u, &radii, &GroupPoint::origin(1), &s, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, residual_sweep, annulus_solve, ball_profiles);
criterion_main!(benches);
