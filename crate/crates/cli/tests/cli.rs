use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hpucci");

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn hpucci(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn with_ellipticity<'a>(args: &[&'a str], lambda: &'a str, big: &'a str) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(["--set", lambda, "--set", big]);
    v
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const L1: &str = "problem.ellipticity.lambda=1";
const BIG1: &str = "problem.ellipticity.Lambda=1";
const BIG2: &str = "problem.ellipticity.Lambda=2";

#[test]
fn missing_ellipticity_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&["algebra-check"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.ellipticity.lambda"), "{}", stderr(&o));
}

#[test]
fn inverted_ellipticity_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&with_ellipticity(&["fundamental"], "problem.ellipticity.lambda=3", BIG2), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda ≤ Lambda"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&["fundamental", "--set", "problem.bogus=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.bogus"));
    let o = hpucci(&["fundamental", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "problem.ellipticity.lambda = 1\nproblem.ellipticity.Lambda\n").unwrap();
    let o = hpucci(&["fundamental", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.conf:2"), "{}", stderr(&o));
}

#[test]
fn keys_lists_every_section() {
    let o = Command::new(BIN).arg("keys").output().unwrap();
    assert!(o.status.success());
    let s = stdout(&o);
    for k in ["seed", "problem.ellipticity.Lambda", "grid.h", "out.dir"] {
        assert!(s.contains(k), "{k}");
    }
}

#[test]
fn fundamental_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&with_ellipticity(&["fundamental", "--check-residual"], L1, BIG2), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("max residual"));
    let csv = std::fs::read_to_string(dir.path().join("fundamental_residuals.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let o = hpucci(&with_ellipticity(&["fundamental"], L1, BIG2), dir.path());
    assert!(o.status.success());
    assert!(dir.path().join("exponents.csv").exists());
}

#[test]
fn barrier_ratio_and_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&with_ellipticity(&["barrier", "ratio", "--t0", "-1"], L1, BIG1), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("2.0000"), "{}", stdout(&o));
    assert!(dir.path().join("barrier_ratio.csv").exists());
    let o =
        hpucci(&with_ellipticity(&["barrier", "ratio", "--t0", "-1", "--expect", "1.414214"], L1, BIG1), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn barrier_annulus_with_first_order_term() {
    let dir = tempfile::tempdir().unwrap();
    let args = with_ellipticity(&["barrier", "annulus", "--set", "problem.K=1", "--set", "problem.M=1"], L1, BIG2);
    let o = hpucci(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(dir.path().join("barrier_annulus.csv").exists());
}

#[test]
fn algebra_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&with_ellipticity(&["algebra-check", "--seed", "11"], L1, BIG2), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(dir.path().join("algebra_check.csv").exists());
}

#[test]
fn golden_solve_is_within_budget_and_reproducible() {
    let conf = workspace().join("configs/annulus.conf");
    let conf = conf.to_str().unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = hpucci(&["solve", "--config", conf], a.path());
    assert_eq!(oa.status.code(), Some(0), "{}{}", stdout(&oa), stderr(&oa));
    assert!(stdout(&oa).contains("[pass] sup error"));
    let ob = hpucci(&["--config", conf, "solve", "--quiet"], b.path());
    assert_eq!(ob.status.code(), Some(0));
    assert!(stdout(&ob).is_empty());
    for f in ["solve_report.csv", "solution.grid"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn cap_config_reproduces_affine_data() {
    let conf = workspace().join("configs/cap.conf");
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&["solve", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn exceeded_budget_fails() {
    let conf = workspace().join("configs/annulus.conf");
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&["solve", "--config", conf.to_str().unwrap(), "--set", "problem.tol.sup_error=1e-4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sup error"), "{}", stderr(&o));
}

#[test]
fn set_before_and_after_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&["--set", L1, "fundamental", "--set", BIG2], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // the later value wins
    let o = hpucci(&["--set", "problem.ellipticity.lambda=5", "fundamental", "--set", L1, "--set", BIG2], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn hadamard_tight_cases() {
    let dir = tempfile::tempdir().unwrap();
    let psi2 = ["hadamard", "--set", "problem.psi.family=psi2", "--set", "problem.operator=minus"];
    let o = hpucci(&with_ellipticity(&psi2, L1, BIG2), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(dir.path().join("hadamard.csv").exists());
    let phi2 = ["hadamard", "--set", "problem.psi.family=phi2", "--set", "problem.hadamard.case=plus_super"];
    let o = hpucci(&with_ellipticity(&phi2, L1, BIG2), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    // Φ₂ is an M̃⁻ subsolution, so the M̃⁻ three-sphere inequality must fail for it
    let o = hpucci(&with_ellipticity(&["hadamard", "--set", "problem.psi.family=phi2"], L1, BIG2), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn harnack_profile_and_measure() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["harnack", "--set", "problem.psi.family=phi2", "--set", "problem.harnack.samples=100000"];
    let o = hpucci(&with_ellipticity(&args, L1, "problem.ellipticity.Lambda=3"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(dir.path().join("harnack.csv").exists());
    assert!(dir.path().join("harnack_measure.csv").exists());
}

#[test]
fn liouville_witness_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let o = hpucci(&with_ellipticity(&["liouville"], L1, BIG1), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("witness flat = false"));
    let csv = std::fs::read_to_string(dir.path().join("liouville.csv")).unwrap();
    assert!(csv.starts_with("r,witness_min,extrapolated_bound"));
}
