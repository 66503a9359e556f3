use heisenberg_pucci::*;

fn main() -> Result<()> {
    let e = Ellipticity::new(1.0, 2.0)?;
    let ex = exponents(&e, 1);
    println!("alpha = {}, beta = {}", ex.alpha, ex.beta);

    let annulus = DomainSpec::gauge_annulus(GroupPoint::origin(1), 0.5, 1.0)?;
    let psi = |p: [f64; 3]| gauge_norm(&GroupPoint::h1(p[0], p[1], p[2])).powi(-2);
    let mut cfg = SolveConfig::new(1.0 / 16.0);
    cfg.bounding_box = Some(([-1.1; 3], [1.1; 3]));
    let op = OperatorSpec::pucci_plus(Ellipticity::new(1.0, 1.0)?);
    let out = perron_solve_detailed(&annulus, &psi, &op, &cfg)?;
    println!("{} iterations, sup error {:.4}", out.report.iterations, out.solution.sup_error(psi));
    Ok(())
}
