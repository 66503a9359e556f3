//! Flat `key = value` configuration. Every accepted key is listed in [`KEYS`] together with
//! its default (or none when required) and a one-line description; `hpucci keys` prints it.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::CliError;

pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const KEYS: &[Key] = &[
    key("seed", Some("1"), "seed of the SplitMix64 stream behind every random sample"),
    key("problem.n", Some("1"), "group index n of Hⁿ (the solver needs n = 1)"),
    key("problem.ellipticity.lambda", None, "smaller ellipticity constant λ > 0"),
    key("problem.ellipticity.Lambda", None, "larger ellipticity constant Λ ≥ λ"),
    key("problem.operator", Some("plus"), "plus (M̃⁺) or minus (M̃⁻)"),
    key("problem.K", Some("0"), "first-order bound: H(ξ, p) = K|p| − M"),
    key("problem.M", Some("0"), "first-order bound: H(ξ, p) = K|p| − M"),
    key("problem.domain", Some("annulus"), "annulus, ball or cap"),
    key("problem.domain.center", Some("0,0,0"), "center of the gauge ball or annulus"),
    key("problem.domain.inner", Some("0.5"), "inner gauge radius of the annulus"),
    key("problem.domain.outer", Some("1"), "outer gauge radius of the annulus"),
    key("problem.domain.radius", Some("1"), "gauge radius of the ball"),
    key("problem.domain.t0", Some("-1"), "vertical offset t₀ < 0 of the characteristic cap"),
    key("problem.psi", Some("fundamental"), "boundary data: fundamental, constant or affine"),
    key("problem.psi.family", Some("phi2"), "phi1, phi2, psi1 or psi2"),
    key("problem.psi.pole", Some("0,0,0"), "pole of the radial data"),
    key("problem.psi.c1", Some("1"), "multiplier C₁ ≥ 0 of the radial data"),
    key("problem.psi.c2", Some("0"), "additive constant C₂ of the radial data"),
    key("problem.psi.constant", Some("0"), "value of constant data"),
    key("problem.psi.affine", Some("0,0,0,0"), "a,b,c,d for data a + b x + c y + d t"),
    key("problem.samples", Some("200"), "random sample count for residual and algebra checks"),
    key("problem.source", Some("analytic"), "profile source: analytic (the data itself) or solve"),
    key("problem.center", Some("0,0,0"), "center of the ball profiles"),
    key("problem.radii", Some("0.2,0.4,0.6,0.8,1.0,1.2,1.4,1.6"), "increasing profile radii"),
    key("problem.hadamard.case", Some("minus_super"), "minus_super or plus_super"),
    key("problem.harnack.R", Some("2"), "radius R of the superlevel-measure ball"),
    key("problem.harnack.levels", Some("1.5,2,3,5,8,12"), "superlevel values t"),
    key("problem.harnack.samples", Some("400000"), "Monte-Carlo samples for the measure"),
    key("problem.liouville.radius", Some("1"), "cut radius R of the witness min{R^{2−β}, ρ^{2−β}}"),
    key("problem.tol.residual", Some("1e-9"), "relative residual tolerance"),
    key("problem.tol.hadamard", Some("1e-8"), "allowed negative slack in the three-sphere check"),
    key("problem.tol.harnack", Some("1e-12"), "relative drop allowed in m(r)·r^{β−2}"),
    key("problem.tol.slope", Some("0.1"), "relative tolerance on the superlevel slope"),
    key("problem.tol.sup_error", None, "optional bound on the sup error against exact data"),
    key("problem.budget.iterations", None, "optional bound on solver iterations"),
    key("grid.h", Some("0.0625"), "horizontal spacing"),
    key("grid.ht", None, "vertical spacing (defaults to grid.h)"),
    key("grid.levels", Some("1"), "nested lattices used for the initial guess"),
    key("grid.box.lo", None, "lower corner x,y,t of the grid box (defaults to the domain's)"),
    key("grid.box.hi", None, "upper corner x,y,t of the grid box"),
    key("grid.tolerance", Some("1e-5"), "projected-residual stopping tolerance"),
    key("grid.max_iterations", Some("50000"), "iteration cap per lattice"),
    key("grid.barriers", Some("auto"), "auto, exterior_balls, annulus or glued"),
    key("grid.boundary", Some("extrapolated"), "extrapolated, trace or neighborhood"),
    key("grid.momentum", Some("true"), "accelerated relaxation"),
    key("grid.execution", Some("parallel"), "parallel or sequential"),
    key("out.dir", Some("out"), "directory receiving CSV files and grid dumps"),
    key("out.grid", Some("true"), "write the solution grid dump"),
];

fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("{origin}:{}", i + 1);
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("{at}: expected key = value, got `{line}`")));
            };
            let k = k.trim();
            if cfg.values.contains_key(k) {
                return Err(CliError::Config(format!("{at}: key `{k}` given twice")));
            }
            cfg.insert(k, v.trim()).map_err(|e| CliError::Config(format!("{at}: {e}")))?;
        }
        Ok(cfg)
    }

    /// `--set key=value`; overrides earlier values.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let Some((k, v)) = assignment.split_once('=') else {
            return Err(CliError::Config(format!("--set expects key=value, got `{assignment}`")));
        };
        self.insert(k.trim(), v.trim()).map_err(|e| CliError::Config(format!("--set: {e}")))
    }

    fn insert(&mut self, k: &str, v: &str) -> Result<(), String> {
        if lookup(k).is_none() {
            return Err(format!("unknown key `{k}` (run `hpucci keys` for the list)"));
        }
        self.values.insert(k.to_string(), v.to_string());
        Ok(())
    }

    fn raw(&self, k: &str) -> Option<&str> {
        let spec = lookup(k).unwrap_or_else(|| panic!("key `{k}` missing from the key table"));
        self.values.get(k).map(String::as_str).or(spec.default)
    }

    pub fn get<T: FromStr>(&self, k: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.get_opt(k)?.ok_or_else(|| CliError::Config(format!("missing required key `{k}`")))
    }

    pub fn get_opt<T: FromStr>(&self, k: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(k)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("key `{k}`: cannot parse `{v}`: {e}"))))
            .transpose()
    }

    pub fn list(&self, k: &str) -> Result<Vec<f64>, CliError> {
        let v = self.raw(k).ok_or_else(|| CliError::Config(format!("missing required key `{k}`")))?;
        v.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("key `{k}`: cannot parse `{s}`: {e}")))
            })
            .collect()
    }

    pub fn triple(&self, k: &str) -> Result<[f64; 3], CliError> {
        let v = self.list(k)?;
        v.as_slice().try_into().map_err(|_| CliError::Config(format!("key `{k}` needs three values, got {}", v.len())))
    }

    pub fn triple_opt(&self, k: &str) -> Result<Option<[f64; 3]>, CliError> {
        if self.raw(k).is_none() {
            return Ok(None);
        }
        self.triple(k).map(Some)
    }

    /// One of `choices`, case-sensitive.
    pub fn choice(&self, k: &str, choices: &[&'static str]) -> Result<&'static str, CliError> {
        let v: String = self.get(k)?;
        choices
            .iter()
            .find(|c| **c == v)
            .copied()
            .ok_or_else(|| CliError::Config(format!("key `{k}`: `{v}` is not one of {}", choices.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_defaults_and_overrides() {
        let mut c = Config::parse("# c\nproblem.n = 2 # trailing\n\ngrid.h=0.125\n", "t").unwrap();
        assert_eq!(c.get::<usize>("problem.n").unwrap(), 2);
        assert_eq!(c.get::<f64>("grid.h").unwrap(), 0.125);
        assert_eq!(c.get::<f64>("problem.K").unwrap(), 0.0);
        c.set("grid.h=0.5").unwrap();
        assert_eq!(c.get::<f64>("grid.h").unwrap(), 0.5);
        assert_eq!(c.triple("problem.center").unwrap(), [0.0; 3]);
        assert!(c.get_opt::<f64>("grid.ht").unwrap().is_none());
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = Config::parse("problem.n = 1\nproblem.bogus = 3\n", "f.conf").unwrap_err().to_string();
        assert!(e.contains("f.conf:2") && e.contains("problem.bogus"), "{e}");
        let e = Config::parse("problem.n\n", "f.conf").unwrap_err().to_string();
        assert!(e.contains("f.conf:1"), "{e}");
        let e = Config::parse("grid.h = 1\ngrid.h = 2\n", "f.conf").unwrap_err().to_string();
        assert!(e.contains("twice"), "{e}");
        let c = Config::parse("grid.h = x\n", "f.conf").unwrap();
        assert!(c.get::<f64>("grid.h").unwrap_err().to_string().contains("grid.h"));
        let e = Config::default().get::<f64>("problem.ellipticity.lambda").unwrap_err().to_string();
        assert!(e.contains("ellipticity.lambda"));
    }

    #[test]
    fn every_key_is_unique() {
        for (i, k) in KEYS.iter().enumerate() {
            assert!(KEYS[i + 1..].iter().all(|o| o.name != k.name), "{}", k.name);
        }
    }
}
