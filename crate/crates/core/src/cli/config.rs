//! Flat `key = value` run configuration and the field/domain descriptors it uses.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::envelope::EnvelopeOptions;
use crate::error::{Error, Result};
use crate::estimates::LevelOptions;
use crate::grid::{Domain, Grid2D, Point, ScalarField};
use crate::operators::AnalyticFunction;
use crate::params::{Exponent, PExponent};
use crate::solver::SolveOptions;

/// `(key, default, help)` for every configurable field, in echo order.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "domain",
        "ball",
        "ball[:cx,cy,R] | annulus[:cx,cy,r,R] | rectangle[:x0,y0,x1,y1]",
    ),
    ("h", "0.03125", "lattice spacing"),
    ("p", "inf", "exponent, a real > 2 or inf"),
    ("ps", "3,5,9,17,33,inf", "exponent list for sweep"),
    ("k", "auto", "stencil radius in lattice units, or auto"),
    ("f", "const:1", "right-hand side descriptor"),
    ("g", "const:0", "boundary data descriptor"),
    ("relaxation", "1", "fraction of the monotone local step, in (0, 1]"),
    ("tol", "1e-8", "sup-norm residual tolerance"),
    ("max_iters", "1000000", "iteration cap"),
    ("policy_refresh", "16", "sweeps between direction re-optimizations"),
    ("n_slopes", "auto", "slopes per axis in the envelope grid, or auto"),
    ("slope_bound", "auto", "envelope slope box half-width, or auto"),
    ("tau", "auto", "contact tolerance, or auto"),
    ("n_r", "200", "level cells in the level-set integral"),
    ("band", "auto", "level band half-width, or auto"),
    ("x", "0,0", "point for the interior Hölder check (nearest inside node)"),
    ("eps", "0.4,0.2,0.1,0.05,0.025", "epsilon list for counterexample"),
    ("m", "10000", "radial quadrature nodes for counterexample"),
    ("out", "abplab-out", "output directory"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Abp,
    Holder,
    Sweep,
    Counterexample,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::Abp,
        Command::Holder,
        Command::Sweep,
        Command::Counterexample,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Abp => "abp",
            Command::Holder => "holder",
            Command::Sweep => "sweep",
            Command::Counterexample => "counterexample",
            Command::Selftest => "selftest",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Closed-form kinds usable both as data and, through `op:`, as manufactured operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Cusp { a: f64, b: f64, height: f64, center: Point },
    Cone { center: Point },
    Counterexample { eps: f64 },
    Smoothed { eps: f64, delta: f64 },
    Cap { eps: f64 },
    Quadratic { q: [[f64; 2]; 2], b: [f64; 2], c: f64 },
}

impl Kind {
    /// The cusp takes its Hölder defect from `pe`.
    pub fn function(&self, pe: &PExponent) -> AnalyticFunction {
        match *self {
            Kind::Cusp { a, b, height, center } => AnalyticFunction::cusp(a, b, height, center, pe),
            Kind::Cone { center } => AnalyticFunction::cone(center),
            Kind::Counterexample { eps } => AnalyticFunction::CounterexampleCusp { eps },
            Kind::Smoothed { eps, delta } => AnalyticFunction::SmoothedCusp { eps, delta },
            Kind::Cap { eps } => AnalyticFunction::Cap { eps },
            Kind::Quadratic { q, b, c } => AnalyticFunction::Quadratic { q, b, c },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    /// `amp (1 - (rho/width)^2)^2` inside the disc of radius `width`, zero outside.
    Bump {
        amp: f64,
        width: f64,
        center: Point,
    },
    Analytic(Kind),
    /// `-Delta_p^N` of the kind, evaluated exactly.
    Operator(Kind),
}

impl FieldSpec {
    /// Values at every classified node.
    pub fn sample(&self, grid: &Arc<Grid2D>, pe: &PExponent) -> Result<ScalarField> {
        match *self {
            FieldSpec::Constant(c) => Ok(ScalarField::constant(grid, c)),
            FieldSpec::Bump { amp, width, center } => Ok(ScalarField::from_fn(grid, |x| {
                let s = (x[0] - center[0]).hypot(x[1] - center[1]) / width;
                if s < 1.0 {
                    amp * (1.0 - s * s).powi(2)
                } else {
                    0.0
                }
            })),
            FieldSpec::Analytic(kind) => {
                let func = kind.function(pe);
                Ok(ScalarField::from_fn(grid, |x| func.value(x)))
            }
            FieldSpec::Operator(kind) => {
                let func = kind.function(pe);
                let mut values = vec![f64::NAN; grid.len()];
                for k in grid.classified() {
                    let x = grid.coords(k);
                    values[k] = match func.exact_operators(x, pe) {
                        Some(ops) => -ops.p_lap_norm,
                        None if grid.class(k) == crate::grid::NodeClass::Boundary => 0.0,
                        None => {
                            return Err(Error::Config(format!(
                                "operator is undefined at the inside node {x:?} (critical point)"
                            )))
                        }
                    };
                }
                ScalarField::from_values(grid, values)
            }
        }
    }
}

fn real(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: cannot parse {s:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{what}: {s:?} is not finite")));
    }
    Ok(v)
}

fn positive(s: &str, what: &str) -> Result<f64> {
    let v = real(s, what)?;
    if v <= 0.0 {
        return Err(Error::Config(format!("{what}: must be positive, got {v}")));
    }
    Ok(v)
}

fn reals(s: &str, what: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| real(t, what)).collect()
}

fn count(s: &str, what: &str) -> Result<usize> {
    let v: usize = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: cannot parse {s:?} as a non-negative integer")))?;
    Ok(v)
}

fn auto<T>(s: &str, parse: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if s.trim() == "auto" {
        Ok(None)
    } else {
        parse(s).map(Some)
    }
}

fn point(s: &str, what: &str) -> Result<Point> {
    match reals(s, what)?[..] {
        [a, b] => Ok([a, b]),
        _ => Err(Error::Config(format!("{what}: expected two coordinates, got {s:?}"))),
    }
}

/// Splits `name:a,b,...` and parses the arguments, checking their count against `allowed`.
fn split_args<'a>(s: &'a str, what: &str, allowed: &[usize]) -> Result<(&'a str, Vec<f64>)> {
    let (name, rest) = match s.split_once(':') {
        Some((n, r)) => (n.trim(), Some(r)),
        None => (s.trim(), None),
    };
    let args = match rest {
        Some(r) => reals(r, what)?,
        None => Vec::new(),
    };
    if !allowed.contains(&args.len()) {
        return Err(Error::Config(format!(
            "{what}: {name} takes {allowed:?} arguments, got {}",
            args.len()
        )));
    }
    Ok((name, args))
}

pub fn parse_domain(s: &str) -> Result<Domain> {
    let name = s.split(':').next().unwrap_or("").trim();
    match name {
        "ball" => {
            let (_, a) = split_args(s, "domain", &[0, 3])?;
            Ok(match a[..] {
                [cx, cy, r] => Domain::ball([cx, cy], r),
                _ => Domain::ball([0.0, 0.0], 1.0),
            })
        }
        "annulus" => {
            let (_, a) = split_args(s, "domain", &[0, 4])?;
            Ok(match a[..] {
                [cx, cy, r, big] => Domain::annulus([cx, cy], r, big),
                _ => Domain::annulus([0.0, 0.0], 0.5, 1.0),
            })
        }
        "rectangle" => {
            let (_, a) = split_args(s, "domain", &[0, 4])?;
            Ok(match a[..] {
                [x0, y0, x1, y1] => Domain::rectangle([x0, y0], [x1, y1]),
                _ => Domain::rectangle([0.0, 0.0], [1.0, 1.0]),
            })
        }
        _ => Err(Error::Config(format!("domain: unknown kind {name:?}"))),
    }
}

fn parse_kind(s: &str, what: &str) -> Result<Option<Kind>> {
    let name = s.split(':').next().unwrap_or("").trim();
    let kind = match name {
        "cusp" => {
            let (_, a) = split_args(s, what, &[2, 3, 5])?;
            let height = a.get(2).copied().unwrap_or(0.0);
            let center = if a.len() == 5 { [a[3], a[4]] } else { [0.0, 0.0] };
            Kind::Cusp {
                a: a[0],
                b: a[1],
                height,
                center,
            }
        }
        "cone" => {
            let (_, a) = split_args(s, what, &[0, 2])?;
            Kind::Cone {
                center: if a.len() == 2 { [a[0], a[1]] } else { [0.0, 0.0] },
            }
        }
        "counterexample" => {
            let (_, a) = split_args(s, what, &[1])?;
            if !(a[0] > 0.0 && a[0] < 1.0) {
                return Err(Error::Config(format!("{what}: counterexample needs eps in (0, 1)")));
            }
            Kind::Counterexample { eps: a[0] }
        }
        "smoothed" => {
            let (_, a) = split_args(s, what, &[2])?;
            if !(a[0] > 0.0 && a[0] < 1.0 && a[1] > 0.0) {
                return Err(Error::Config(format!(
                    "{what}: smoothed needs eps in (0, 1) and delta > 0"
                )));
            }
            Kind::Smoothed { eps: a[0], delta: a[1] }
        }
        "cap" => {
            let (_, a) = split_args(s, what, &[1])?;
            if a[0] <= 0.0 {
                return Err(Error::Config(format!("{what}: cap needs eps > 0")));
            }
            Kind::Cap { eps: a[0] }
        }
        "quadratic" => {
            let (_, a) = split_args(s, what, &[6])?;
            Kind::Quadratic {
                q: [[a[0], a[1]], [a[1], a[2]]],
                b: [a[3], a[4]],
                c: a[5],
            }
        }
        _ => return Ok(None),
    };
    Ok(Some(kind))
}

pub fn parse_field(s: &str, what: &str) -> Result<FieldSpec> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("op:") {
        return parse_kind(inner, what)?
            .map(FieldSpec::Operator)
            .ok_or_else(|| Error::Config(format!("{what}: op: needs an analytic kind, got {inner:?}")));
    }
    if let Some(kind) = parse_kind(s, what)? {
        return Ok(FieldSpec::Analytic(kind));
    }
    let name = s.split(':').next().unwrap_or("");
    match name {
        "const" => {
            let (_, a) = split_args(s, what, &[1])?;
            Ok(FieldSpec::Constant(a[0]))
        }
        "bump" => {
            let (_, a) = split_args(s, what, &[2, 4])?;
            if a[1] <= 0.0 {
                return Err(Error::Config(format!("{what}: bump width must be positive")));
            }
            let center = if a.len() == 4 { [a[2], a[3]] } else { [0.0, 0.0] };
            Ok(FieldSpec::Bump {
                amp: a[0],
                width: a[1],
                center,
            })
        }
        _ => Err(Error::Config(format!("{what}: unknown descriptor {s:?}"))),
    }
}

fn exponents(s: &str) -> Result<Vec<Exponent>> {
    s.split(',').map(|t| t.parse::<Exponent>()).collect()
}

/// A fully resolved run: typed values plus the raw strings they came from.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub domain: Domain,
    pub h: f64,
    pub p: Exponent,
    pub ps: Vec<Exponent>,
    pub f: FieldSpec,
    pub g: FieldSpec,
    pub solve: SolveOptions,
    pub envelope: EnvelopeOptions,
    pub level: LevelOptions,
    pub x: Point,
    pub eps: Vec<f64>,
    pub m: usize,
    pub out: PathBuf,
    raw: BTreeMap<&'static str, String>,
}

impl RunConfig {
    /// Defaults, overlaid with `file` entries, overlaid with `flags`.
    pub fn resolve(
        command: Command,
        file: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut raw: BTreeMap<&'static str, String> = KEYS.iter().map(|&(k, d, _)| (k, d.to_string())).collect();
        for layer in [file, flags] {
            for (key, value) in layer {
                if key == "command" {
                    if value != command.name() {
                        return Err(Error::Config(format!(
                            "config is for command {value:?}, running {:?}",
                            command.name()
                        )));
                    }
                    continue;
                }
                let slot = KEYS
                    .iter()
                    .find(|(k, _, _)| *k == key)
                    .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?
                    .0;
                raw.insert(slot, value.clone());
            }
        }
        Self::from_raw(command, raw)
    }

    fn from_raw(command: Command, raw: BTreeMap<&'static str, String>) -> Result<Self> {
        let get = |k: &str| raw[k].as_str();
        let solve = SolveOptions {
            relaxation: real(get("relaxation"), "relaxation")?,
            tol: positive(get("tol"), "tol")?,
            max_iters: count(get("max_iters"), "max_iters")?,
            k: auto(get("k"), |s| count(s, "k"))?,
            policy_refresh: count(get("policy_refresh"), "policy_refresh")?,
        };
        solve.validate().map_err(|e| Error::Config(e.to_string()))?;
        let envelope = EnvelopeOptions {
            n_slopes: auto(get("n_slopes"), |s| count(s, "n_slopes"))?,
            slope_bound: auto(get("slope_bound"), |s| positive(s, "slope_bound"))?,
            tau: auto(get("tau"), |s| real(s, "tau"))?,
        };
        if envelope.tau.is_some_and(|t| t < 0.0) {
            return Err(Error::Config("tau must be non-negative".into()));
        }
        let level = LevelOptions {
            n_r: count(get("n_r"), "n_r")?,
            band: auto(get("band"), |s| real(s, "band"))?,
        };
        if level.n_r == 0 {
            return Err(Error::Config("n_r must be at least 1".into()));
        }
        let p: Exponent = get("p").parse()?;
        PExponent::new(2, p)?;
        let ps = exponents(get("ps"))?;
        for &q in &ps {
            PExponent::new(2, q)?;
        }
        let eps = reals(get("eps"), "eps")?;
        let out = get("out").trim();
        if out.is_empty() {
            return Err(Error::Config("out must not be empty".into()));
        }
        Ok(Self {
            command,
            domain: parse_domain(get("domain"))?,
            h: positive(get("h"), "h")?,
            p,
            ps,
            f: parse_field(get("f"), "f")?,
            g: parse_field(get("g"), "g")?,
            solve,
            envelope,
            level,
            x: point(get("x"), "x")?,
            eps,
            m: count(get("m"), "m")?,
            out: PathBuf::from(out),
            raw,
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.raw.get(key).map(String::as_str)
    }

    /// TOML text that [`parse_config_text`] reads back into the same configuration.
    pub fn echo(&self) -> String {
        let mut s = format!("command = {}\n", toml::Value::String(self.command.name().into()));
        for &(k, _, _) in KEYS {
            s.push_str(&format!("{k} = {}\n", toml::Value::String(self.raw[k].clone())));
        }
        s
    }
}

/// Parses a flat key/value config. Scalars become their textual form,
/// arrays of scalars are joined with commas; nested tables are rejected.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("malformed config: {}", e.message())))?;
    let mut out = BTreeMap::new();
    for (key, value) in table {
        let s = match &value {
            toml::Value::Array(items) => items
                .iter()
                .map(|v| scalar(&key, v))
                .collect::<Result<Vec<_>>>()?
                .join(","),
            v => scalar(&key, v)?,
        };
        out.insert(key, s);
    }
    Ok(out)
}

fn scalar(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(x) => Ok(if x.is_infinite() && *x > 0.0 {
            "inf".into()
        } else {
            x.to_string()
        }),
        _ => Err(Error::Config(format!("{key}: expected a string or number"))),
    }
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn resolve(pairs: &[(&str, &str)]) -> Result<RunConfig> {
        let flags = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        RunConfig::resolve(Command::Solve, &BTreeMap::new(), &flags)
    }

    #[test]
    fn defaults_resolve() {
        let c = resolve(&[]).unwrap();
        assert_eq!(c.h, 0.03125);
        assert!(c.p.is_infinite());
        assert_eq!(c.ps.len(), 6);
        assert_eq!(c.f, FieldSpec::Constant(1.0));
        assert_eq!(c.solve.k, None);
        assert_eq!(c.eps, vec![0.4, 0.2, 0.1, 0.05, 0.025]);
    }

    #[test]
    fn strict_parsing() {
        assert!(resolve(&[("h", "abc")]).is_err());
        assert!(resolve(&[("h", "-1")]).is_err());
        assert!(resolve(&[("p", "2")]).is_err());
        assert!(resolve(&[("k", "0")]).is_err());
        assert!(resolve(&[("bogus", "1")]).is_err());
        assert!(resolve(&[("f", "const")]).is_err());
        assert!(resolve(&[("f", "const:1,2")]).is_err());
        assert!(resolve(&[("f", "op:const:1")]).is_err());
        assert!(resolve(&[("domain", "ball:1")]).is_err());
        assert!(resolve(&[("x", "1")]).is_err());
        assert!(resolve(&[("relaxation", "1.5")]).is_err());
    }

    #[test]
    fn descriptors() {
        assert_eq!(
            parse_field("cone", "g").unwrap(),
            FieldSpec::Analytic(Kind::Cone { center: [0.0, 0.0] })
        );
        assert_eq!(
            parse_field("cusp:3,1", "g").unwrap(),
            FieldSpec::Analytic(Kind::Cusp {
                a: 3.0,
                b: 1.0,
                height: 0.0,
                center: [0.0, 0.0]
            })
        );
        assert_eq!(
            parse_field("op:cap:0.2", "f").unwrap(),
            FieldSpec::Operator(Kind::Cap { eps: 0.2 })
        );
        assert!(matches!(parse_domain("annulus").unwrap(), Domain::Annulus { .. }));
        assert!(parse_domain("torus").is_err());
    }

    #[test]
    fn manufactured_cusp_operator_is_constant() {
        let g = Arc::new(build_grid(Domain::annulus([0.0, 0.0], 0.5, 1.0), 0.125).unwrap());
        let pe = PExponent::finite(2, 3.0).unwrap();
        let f = parse_field("op:cusp:3,1", "f").unwrap().sample(&g, &pe).unwrap();
        for k in g.classified() {
            assert!((f.get(k) - 1.0 / pe.c_p()).abs() < 1e-12);
        }
        let ball = Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), 0.125).unwrap());
        assert!(parse_field("op:cusp:3,1", "f").unwrap().sample(&ball, &pe).is_err());
    }

    #[test]
    fn bump_is_nonnegative_and_compact() {
        let g = Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), 0.0625).unwrap());
        let pe = PExponent::infinite(2).unwrap();
        let f = parse_field("bump:2,0.5", "f").unwrap().sample(&g, &pe).unwrap();
        assert_eq!(f.get(g.nearest_inside([0.0, 0.0])), 2.0);
        assert!(g.classified().all(|k| f.get(k) >= 0.0));
        assert_eq!(f.get(g.nearest_inside([0.75, 0.0])), 0.0);
    }

    #[test]
    fn echo_round_trips() {
        let c = resolve(&[("p", "5"), ("f", "bump:1,0.5"), ("h", "0.0625")]).unwrap();
        let back = parse_config_text(&c.echo()).unwrap();
        let again = RunConfig::resolve(Command::Solve, &back, &BTreeMap::new()).unwrap();
        assert_eq!(again.echo(), c.echo());
        assert!(RunConfig::resolve(Command::Abp, &back, &BTreeMap::new()).is_err());
    }

    #[test]
    fn file_values_and_arrays() {
        let m = parse_config_text("h = 0.05\nps = [3, 5.5, inf]\nf = \"const:2\"\n").unwrap();
        assert_eq!(m["h"], "0.05");
        assert_eq!(m["ps"], "3,5.5,inf");
        let c = RunConfig::resolve(Command::Sweep, &m, &BTreeMap::new()).unwrap();
        assert_eq!(
            c.ps,
            vec![Exponent::Finite(3.0), Exponent::Finite(5.5), Exponent::Infinite]
        );
        assert!(parse_config_text("[table]\nh = 1\n").is_err());
        assert!(parse_config_text("h = = 1").is_err());
        assert!(parse_config_text("flag = true").is_err());
    }
}
