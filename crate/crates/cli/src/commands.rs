use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::result::Result;

use heisenberg_pucci::barriers::BarrierParams;
use heisenberg_pucci::qualitative::{
    grid_min_profile, hadamard_check, harnack_measure_estimate, harnack_monotonicity, liouville_flatness_probe,
    liouville_witness, min_on_ball_profile, BallSampling, HadamardCase, MeasureConfig, MinProfile, WitnessCheck,
};
use heisenberg_pucci::radial::MonotonicityTag;
use heisenberg_pucci::sampling::{point_in_gauge_shell, rng_from_seed};
use heisenberg_pucci::solver::SolveOutput;
use heisenberg_pucci::*;
use rand::Rng;

use crate::config::Config;
use crate::error::{CliError, Context, EXIT_ASSERTION, EXIT_PASS};
use crate::problem::{self, Data};

pub struct Run {
    pub cfg: Config,
    pub seed: u64,
    pub out: PathBuf,
    pub quiet: bool,
    checks: Vec<(String, bool)>,
}

impl Run {
    pub fn new(cfg: Config, seed: u64, out: PathBuf, quiet: bool) -> Self {
        Self { cfg, seed, out, quiet, checks: Vec::new() }
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            self.say(format!("[pass] {name}: {detail}"));
        } else {
            eprintln!("[FAIL] {name}: {detail}");
        }
        self.checks.push((name.to_string(), pass));
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|source| CliError::Io { path: self.out.display().to_string(), source })?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        self.say(format!("wrote {}", path.display()));
        Ok(())
    }

    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().all(|c| c.1) {
            EXIT_PASS
        } else {
            EXIT_ASSERTION
        }
    }
}

fn e12(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn algebra_check(run: &mut Run) -> Result<(), CliError> {
    let n = problem::group_index(&run.cfg)?;
    let e = problem::ellipticity(&run.cfg)?;
    let samples: usize = run.cfg.get("problem.samples")?;
    let mut rng = rng_from_seed(run.seed);
    let (mut homog, mut invariance, mut duality, mut spectrum) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let xi = point_in_gauge_shell(&mut rng, n, 0.2, 5.0);
        let zeta = point_in_gauge_shell(&mut rng, n, 0.0, 3.0);
        let eta = point_in_gauge_shell(&mut rng, n, 0.0, 3.0);
        let s = rng.gen_range(1e-3..10.0);
        let rho = gauge_norm(&xi);
        homog = homog.max((gauge_norm(&dilate(s, &xi).context("dilation")?) - s * rho).abs() / (s * rho));
        let d0 = h_distance(&xi, &eta).context("distance")?;
        let d1 = h_distance(
            &group_compose(&zeta, &xi).context("composition")?,
            &group_compose(&zeta, &eta).context("composition")?,
        )
        .context("distance")?;
        invariance = invariance.max((d0 - d1).abs() / (1.0 + d0));
        let dim = 2 * n;
        let vals: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let m = SymmetricMatrix::from_fn(dim, |i, j| vals[i.min(j) * dim + i.max(j)]);
        duality = duality.max((pucci_plus(&m, &e) + pucci_minus(&m.neg(), &e)).abs());
        let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0)];
        let profile = RadialProfile::cubic(c, MonotonicityTag::None);
        let closed = radial_spectrum(&profile, &xi).context("radial spectrum")?.eigenvalues;
        let h = radial_hessian(&profile, &xi).context("radial Hessian")?;
        let mut dense = eigen_sym(&h).eigenvalues;
        dense.sort_by(f64::total_cmp);
        let scale = 1.0 + h.frobenius_norm();
        for (a, b) in closed.iter().zip(&dense) {
            spectrum = spectrum.max((a - b).abs() / scale);
        }
    }
    let mut ell = 0.0f64;
    for (k, op) in [OperatorSpec::pucci_plus(e), OperatorSpec::pucci_minus(e)].iter().enumerate() {
        ell = ell.max(check_degenerate_ellipticity(op, n, samples, run.seed.wrapping_add(k as u64)).worst_violation);
    }
    let rows = [
        ("gauge homogeneity", homog, 1e-12),
        ("left invariance of the distance", invariance, 1e-12),
        ("pucci duality", duality, 1e-12),
        ("degenerate ellipticity", ell, 1e-10),
        ("radial spectrum vs eigensolver", spectrum, 1e-10),
    ];
    let mut csv = String::from("check,value,tolerance,pass\n");
    for (name, v, tol) in rows {
        run.check(name, v <= tol, format!("{v:.3e} (tolerance {tol:.0e})"));
        writeln!(csv, "{name},{},{tol:e},{}", e12(v), v <= tol).unwrap();
    }
    run.write("algebra_check.csv", csv.as_bytes())
}

pub fn fundamental(run: &mut Run, check_residual: bool) -> Result<(), CliError> {
    let n = problem::group_index(&run.cfg)?;
    let e = problem::ellipticity(&run.cfg)?;
    let ex = exponents(&e, n);
    run.say(format!(
        "Q = {}, alpha = {}, beta = {}{}",
        ex.q,
        ex.alpha,
        ex.beta,
        if ex.log_branch { " (logarithmic branch)" } else { "" }
    ));
    if !check_residual {
        return run.write(
            "exponents.csv",
            format!("Q,alpha,beta,log_branch\n{},{},{},{}\n", ex.q, e12(ex.alpha), e12(ex.beta), ex.log_branch)
                .as_bytes(),
        );
    }
    let samples: usize = run.cfg.get("problem.samples")?;
    let tol: f64 = run.cfg.get("problem.tol.residual")?;
    let mut rng = rng_from_seed(run.seed);
    let pts: Vec<GroupPoint> = (0..samples).map(|_| point_in_gauge_shell(&mut rng, n, 0.1, 3.0)).collect();
    let mut csv = String::from("family,operator,max_abs,max_relative,samples,pass\n");
    let mut worst = 0.0f64;
    for fam in [Family::Phi1, Family::Phi2, Family::Psi1, Family::Psi2] {
        let fs = FundamentalSolution::canonical(fam, &e, n);
        let r = verify_residual(&fs, &e, &pts).context("residual check")?;
        let op = if fam.sign() == PucciSign::Plus { "plus" } else { "minus" };
        writeln!(
            csv,
            "{fam:?},{op},{},{},{},{}",
            e12(r.max_abs),
            e12(r.max_relative),
            r.samples,
            r.max_relative <= tol
        )
        .unwrap();
        run.check(&format!("{fam:?} residual"), r.max_relative <= tol, format!("max relative {:.3e}", r.max_relative));
        worst = worst.max(r.max_relative);
    }
    run.say(format!("max residual {worst:.3e}"));
    run.write("fundamental_residuals.csv", csv.as_bytes())
}

pub fn barrier_ratio(run: &mut Run, t0: f64, expect: Option<f64>) -> Result<(), CliError> {
    let n = problem::group_index(&run.cfg)?;
    let cap = DomainSpec::characteristic_cap(n, t0).context("characteristic cap")?;
    let params: Vec<f64> = (0..=12).map(|k| 0.1 * t0.abs() * 10f64.powf(-(k as f64) / 4.0)).collect();
    let eta = cap.exterior_balls[0].eta0.clone();
    let path = ApproachPath::Segment { direction: None, params };
    let r = characteristic_ratio(&cap, &GroupPoint::origin(n), &eta, &path).context("characteristic ratio")?;
    run.say(format!(
        "ratio limit estimate {:.6} (sup {:.6}, last step {:.2e})",
        r.limit_estimate, r.sup, r.convergence
    ));
    if let Some(target) = expect {
        let gap = (r.limit_estimate - target).abs();
        run.check("ratio limit", gap <= 1e-3, format!("{:.6} vs expected {target:.6}", r.limit_estimate));
    }
    let mut csv = String::from("s,point,ratio\n");
    for ((s, p), v) in r.params.iter().zip(&r.points).zip(&r.ratios) {
        let coords: Vec<String> = p.coords().iter().map(|c| e12(*c)).collect();
        writeln!(csv, "{},{},{}", e12(*s), coords.join(" "), e12(*v)).unwrap();
    }
    run.write("barrier_ratio.csv", csv.as_bytes())
}

pub fn barrier_annulus(run: &mut Run) -> Result<(), CliError> {
    let n = problem::group_index(&run.cfg)?;
    let e = problem::ellipticity(&run.cfg)?;
    let center = problem::point(n, run.cfg.triple("problem.domain.center")?, "problem.domain.center")?;
    let (r1, r2): (f64, f64) = (run.cfg.get("problem.domain.inner")?, run.cfg.get("problem.domain.outer")?);
    let samples: usize = run.cfg.get("problem.samples")?;
    let tol: f64 = run.cfg.get("problem.tol.residual")?;
    let base = problem::first_order(&run.cfg)?;
    let fb =
        FirstOrderBound::new(base.k, base.m, Weight::GaugeGradientAt(center.clone())).context("first-order bound")?;
    let mut rng = rng_from_seed(run.seed);
    let mut around = |lo: f64, hi: f64| -> Result<Vec<GroupPoint>, CliError> {
        (0..samples)
            .map(|_| group_compose(&center, &point_in_gauge_shell(&mut rng, n, lo, hi)).context("sampling"))
            .collect()
    };
    let outer = annulus_outer_barrier(center.clone(), r2, &fb, &e).context("outer barrier")?;
    let inner = annulus_inner_barrier(center.clone(), r1, r2, &fb, &e).context("inner barrier")?;
    let ro = supersolution_residual(&outer, &e, &fb, &around(0.01 * r2, r2)?);
    let ri = supersolution_residual(&inner, &e, &fb, &around(r1, r2)?);
    if let BarrierParams::AnnulusOuter { alpha, beta, .. } = outer.params {
        run.say(format!("outer barrier constants alpha = {alpha:.6e}, beta = {beta:.6e}"));
    }
    let mut csv = String::from("barrier,min,min_relative,evaluated,skipped,pass\n");
    for (name, r) in [("outer", ro), ("inner", ri)] {
        let pass = r.min_relative >= -tol;
        run.check(
            &format!("{name} barrier residual"),
            pass,
            format!("min {:.3e}, min/scale {:.3e}", r.min, r.min_relative),
        );
        writeln!(csv, "{name},{},{},{},{},{pass}", e12(r.min), e12(r.min_relative), r.evaluated, r.skipped).unwrap();
    }
    run.write("barrier_annulus.csv", csv.as_bytes())
}

/// Solves the configured Dirichlet problem and writes the grid dump and a report.
fn solve_inner(run: &mut Run) -> Result<(SolveOutput, Data), CliError> {
    let n = problem::group_index(&run.cfg)?;
    if n != 1 {
        return Err(CliError::Config(format!("the grid solver works on H¹; problem.n = {n}")));
    }
    let e = problem::ellipticity(&run.cfg)?;
    let sign = problem::sign(&run.cfg)?;
    let op = problem::operator(&run.cfg, e)?;
    let domain = problem::domain(&run.cfg, n)?;
    let data = Data::from_config(&run.cfg, &e, n)?;
    let sc = problem::solve_config(&run.cfg)?;
    let free = sc.hamiltonian.is_none();
    let psi = |p: [f64; 3]| data.at3(p);
    let out = perron_solve_detailed(&domain, &psi, &op, &sc).context("solve")?;
    let r = &out.report;
    if !r.converged {
        return Err(CliError::Numerical(format!(
            "relaxation stopped after {} iterations with projected residual {:.3e} above {:.1e}",
            r.iterations, r.projected_residual, sc.tolerance
        )));
    }
    run.say(format!(
        "converged in {} iterations (strategy {:?}, tau {:.3e}), residual {:.3e}, projected {:.3e}, {} clamped nodes",
        r.iterations, r.strategy, r.tau, r.final_residual, r.projected_residual, r.clamped_nodes
    ));
    let mut rows: Vec<(String, String)> = vec![
        ("iterations".into(), r.iterations.to_string()),
        ("final_residual".into(), e12(r.final_residual)),
        ("projected_residual".into(), e12(r.projected_residual)),
        ("barrier_violations".into(), r.barrier_violations.to_string()),
        ("boundary_sup_error".into(), e12(r.boundary_sup_error)),
        ("barrier_modulus".into(), e12(r.barrier_modulus)),
        ("max_sandwich_violation".into(), e12(r.max_sandwich_violation)),
        ("clamped_nodes".into(), r.clamped_nodes.to_string()),
        ("tau".into(), e12(r.tau)),
        ("strategy".into(), format!("{:?}", r.strategy)),
    ];
    run.check("barriers ordered", r.barrier_violations == 0, format!("{} violations", r.barrier_violations));
    run.check("sandwich", r.max_sandwich_violation <= 0.0, format!("max violation {:.3e}", r.max_sandwich_violation));
    if data.is_exact_for(sign, free) {
        let err = out.solution.sup_error(psi);
        rows.push(("sup_error".into(), e12(err)));
        match run.cfg.get_opt::<f64>("problem.tol.sup_error")? {
            Some(b) => run.check("sup error", err <= b, format!("{err:.4e} (budget {b:.4e})")),
            None => run.say(format!("sup error against the data {err:.4e}")),
        }
    }
    if let Some(b) = run.cfg.get_opt::<usize>("problem.budget.iterations")? {
        run.check("iterations", r.iterations <= b, format!("{} (budget {b})", r.iterations));
    }
    let mut csv = String::from("key,value\n");
    for (k, v) in rows {
        writeln!(csv, "{k},{v}").unwrap();
    }
    run.write("solve_report.csv", csv.as_bytes())?;
    if run.cfg.get::<bool>("out.grid")? {
        let mut buf = Vec::new();
        out.solution.write_dump(&mut buf).map_err(|source| CliError::Io { path: "solution.grid".into(), source })?;
        run.write("solution.grid", &buf)?;
    }
    Ok((out, data))
}

pub fn solve(run: &mut Run) -> Result<(), CliError> {
    solve_inner(run).map(|_| ())
}

/// Min profile of the configured data (analytic) or of the solver output (solve).
fn profile(run: &mut Run) -> Result<(MinProfile, Exponents, Option<Data>), CliError> {
    let n = problem::group_index(&run.cfg)?;
    let e = problem::ellipticity(&run.cfg)?;
    let ex = exponents(&e, n);
    let radii = problem::radii(&run.cfg)?;
    let center = run.cfg.triple("problem.center")?;
    let exec = problem::execution(&run.cfg)?;
    match run.cfg.choice("problem.source", &["analytic", "solve"])? {
        "analytic" => {
            let data = Data::from_config(&run.cfg, &e, n)?;
            let c = problem::point(n, center, "problem.center")?;
            let u = |p: &GroupPoint| data.at(p);
            let p = min_on_ball_profile(&u, &radii, &c, &BallSampling::default(), exec).context("ball profile")?;
            Ok((p, ex, Some(data)))
        }
        _ => {
            let (out, _) = solve_inner(run)?;
            let p = grid_min_profile(&out.solution, &radii, center, exec).context("grid profile")?;
            Ok((p, ex, None))
        }
    }
}

pub fn hadamard(run: &mut Run) -> Result<(), CliError> {
    let (p, ex, _) = profile(run)?;
    let case = match run.cfg.choice("problem.hadamard.case", &["minus_super", "plus_super"])? {
        "minus_super" => HadamardCase::MinusSuper,
        _ => HadamardCase::PlusSuper,
    };
    let tol: f64 = run.cfg.get("problem.tol.hadamard")?;
    let (r1, r_outer) = (p.radii[0], *p.radii.last().unwrap());
    let rep = hadamard_check(&p, &ex, case, r1, r_outer).context("three-sphere check")?;
    run.check("three-sphere inequality", rep.holds(tol), format!("min slack {:.3e}", rep.min_slack));
    run.say(format!("concavity defect in G {:.3e}", rep.concavity_defect));
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).map_err(|source| CliError::Io { path: "hadamard.csv".into(), source })?;
    run.write("hadamard.csv", &buf)
}

pub fn harnack(run: &mut Run) -> Result<(), CliError> {
    let (p, ex, data) = profile(run)?;
    let tol: f64 = run.cfg.get("problem.tol.harnack")?;
    let rep = harnack_monotonicity(&p, ex.beta, tol).context("Harnack monotonicity")?;
    run.check(
        "m(r) r^(beta-2) nondecreasing",
        rep.violations == 0,
        format!("{} violations, largest relative drop {:.3e}", rep.violations, rep.max_relative_drop),
    );
    let mut csv = String::from("r,m,product\n");
    for ((r, m), q) in rep.radii.iter().zip(&p.values).zip(&rep.products) {
        writeln!(csv, "{},{},{}", e12(*r), e12(*m), e12(*q)).unwrap();
    }
    run.write("harnack.csv", csv.as_bytes())?;
    // the superlevel measure needs a radial function centered at the profile center
    let Some(Data::Radial(fs)) = data else { return Ok(()) };
    if fs.pole.coords() != run.cfg.triple("problem.center")?.as_slice() {
        return Ok(());
    }
    let n = fs.pole.n();
    let cfg =
        MeasureConfig { samples: run.cfg.get("problem.harnack.samples")?, seed: run.seed, ..MeasureConfig::default() };
    let levels = run.cfg.list("problem.harnack.levels")?;
    let u = |q: &GroupPoint| fs.value(q).unwrap_or(f64::INFINITY);
    let m = harnack_measure_estimate(
        &u,
        n,
        run.cfg.get("problem.harnack.R")?,
        &levels,
        &ex,
        &cfg,
        problem::execution(&run.cfg)?,
    )
    .context("superlevel measure")?;
    let slope_tol: f64 = run.cfg.get("problem.tol.slope")?;
    match (m.slope, m.slope_deviation) {
        (Some(s), Some(d)) => run.check(
            "superlevel slope",
            d <= slope_tol,
            format!("{s:.4} vs {:.4} (deviation {:.2}%)", m.expected_slope, 100.0 * d),
        ),
        _ => run.check("superlevel slope", false, "fewer than two resolved levels".into()),
    }
    let mut csv = String::from("t,measure,reference,ratio,resolved\n");
    for r in &m.rows {
        writeln!(csv, "{},{},{},{},{}", e12(r.t), e12(r.measure), e12(r.reference), e12(r.ratio), r.resolved).unwrap();
    }
    run.write("harnack_measure.csv", csv.as_bytes())
}

pub fn liouville(run: &mut Run) -> Result<(), CliError> {
    let n = problem::group_index(&run.cfg)?;
    let e = problem::ellipticity(&run.cfg)?;
    let ex = exponents(&e, n);
    let tol: f64 = run.cfg.get("problem.tol.residual")?;
    let radius: f64 = run.cfg.get("problem.liouville.radius")?;
    let check = WitnessCheck { seed: run.seed, ..WitnessCheck::default() };
    let (w, rep) = liouville_witness(radius, &e, n, &check).context("Liouville witness")?;
    run.check(
        "witness is a positive non-constant supersolution",
        rep.passed(tol),
        format!(
            "values in [{:.4}, {:.4}], outer residual/scale {:.2e}, inner residual {:.2e}, seam min {:.3e} (allowance -{:.3})",
            rep.min_value, rep.max_value, rep.outer_relative_residual, rep.inner_residual, rep.seam_min_residual, rep.seam_allowance
        ),
    );
    let radii: Vec<f64> = (0..6).map(|k| 0.5 * 2f64.powi(k)).collect();
    let c = GroupPoint::origin(n);
    let s = BallSampling::default();
    let exec = problem::execution(&run.cfg)?;
    let constant = liouville_flatness_probe(&|_| 1.0, &ex, &radii, &c, &s, 1e-12, exec).context("flatness probe")?;
    let wf = |p: &GroupPoint| w.value(p);
    let witness = liouville_flatness_probe(&wf, &ex, &radii, &c, &s, 1e-12, exec).context("flatness probe")?;
    run.check("constants are flat", constant.flat, format!("spread {:.3e}", constant.spread));
    run.say(format!(
        "witness flat = {} (spread {:.4}); alpha = {} so the probe is {}",
        witness.flat,
        witness.spread,
        ex.alpha,
        if witness.conclusive { "conclusive" } else { "diagnostic only" }
    ));
    let mut csv = String::from("r,witness_min,extrapolated_bound\n");
    if let Some(p) = &witness.profile {
        for (i, (r, m)) in p.radii.iter().zip(&p.values).enumerate() {
            let b = witness.extrapolated_bound.get(i).copied().unwrap_or(f64::NAN);
            writeln!(csv, "{},{},{}", e12(*r), e12(*m), e12(b)).unwrap();
        }
    }
    run.write("liouville.csv", csv.as_bytes())
}
