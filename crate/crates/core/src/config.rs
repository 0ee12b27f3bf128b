//! INI-style run configuration.
//!
//! ```text
//! [geometry]
//! a = 1
//! b = 2.5
//! lambda = 0.1
//!
//! [profile]
//! kind = sine
//! ```
//!
//! Lines starting with `#` or `;` are comments. Every key belongs to a
//! section, appears at most once and must be known.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{geometric_grid, Knob, SweepOptions};
use crate::profiles::{make_profile, Profile, ProfileKind};
use crate::solver::{Backend, SolverConfig, DEFAULT_POINTS_PER_WIDTH};
use crate::theory::Geometry;

const KNOWN: &[(&str, &[&str])] = &[
    ("geometry", &["a", "b", "lambda", "lambdas"]),
    ("profile", &["kind", "amplitude", "table"]),
    (
        "solver",
        &[
            "L",
            "nx",
            "h",
            "nmodes",
            "eig_tol",
            "max_iter",
            "backend",
            "adapt_L",
            "k",
            "max_unknowns",
        ],
    ),
    ("sweep", &["upper_bound", "discretization_check"]),
    ("converge", &["knob", "levels"]),
    ("scan", &["Ls"]),
    ("output", &["path", "format", "dump_matrices"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Lambdas {
    Unset,
    Single(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub amplitude: f64,
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergeSpec {
    pub knob: Knob,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
    pub dump_matrices: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub lambdas: Lambdas,
    pub profile: ProfileSpec,
    pub solver: SolverConfig,
    pub sweep: SweepOptions,
    pub converge: ConvergeSpec,
    pub scan: Vec<f64>,
    pub output: OutputSpec,
}

impl RunConfig {
    /// Geometry at the single configured λ (0 when none is given).
    pub fn geometry(&self) -> Result<Geometry> {
        let lambda = match &self.lambdas {
            Lambdas::Single(l) => *l,
            Lambdas::Unset => 0.0,
            Lambdas::List(_) => {
                return Err(Error::Config {
                    line: 0,
                    reason: "`geometry.lambdas` given where a single `geometry.lambda` is needed".into(),
                })
            }
        };
        Geometry::new(self.a, self.b, lambda)
    }

    /// λ list for a sweep: the configured list, the single λ, or a geometric
    /// grid of 5 points on `[0.02, 0.1]`.
    pub fn sweep_lambdas(&self) -> Vec<f64> {
        match &self.lambdas {
            Lambdas::List(ls) => ls.clone(),
            Lambdas::Single(l) => vec![*l],
            Lambdas::Unset => geometric_grid(0.02, 0.1, 5),
        }
    }

    /// Build the profile; does not check non-degeneracy at any λ.
    pub fn build_profile(&self) -> Result<Profile> {
        match self.profile.kind {
            ProfileKind::Tabulated => {
                let path = self.profile.table.as_ref().ok_or_else(|| Error::Config {
                    line: 0,
                    reason: "`profile.table` is required for kind = tabulated".into(),
                })?;
                let p = Profile::from_table_file(path, self.profile.amplitude)?;
                if (p.b() - self.b).abs() > 1e-9 * self.b {
                    return Err(Error::Config {
                        line: 0,
                        reason: format!("`geometry.b` = {} but the table spans [-{}, {}]", self.b, p.b(), p.b()),
                    });
                }
                Ok(p)
            }
            kind => make_profile(kind, self.b, self.profile.amplitude),
        }
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Entries {
    map: BTreeMap<(String, String), Entry>,
}

impl Entries {
    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.map.remove(&(section.to_string(), key.to_string()))
    }

    fn parse<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<(T, usize)>>
    where
        T::Err: fmt::Display,
    {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(|v| Some((v, e.line)))
                .map_err(|err| bad(e.line, section, key, err)),
        }
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<(Vec<f64>, usize)>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => {
                let values = e
                    .value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|err| bad(e.line, section, key, err))?;
                if values.is_empty() {
                    return Err(bad(e.line, section, key, "empty list"));
                }
                Ok(Some((values, e.line)))
            }
        }
    }
}

fn bad(line: usize, section: &str, key: &str, reason: impl fmt::Display) -> Error {
    Error::Config {
        line,
        reason: format!("`{section}.{key}`: {reason}"),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("expected a boolean, got `{other}`")),
    }
}

fn lex(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                line,
                reason: format!("malformed section header `{s}`"),
            })?;
            let name = name.trim();
            if !KNOWN.iter().any(|(sec, _)| *sec == name) {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown section `[{name}]`"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| Error::Config {
            line,
            reason: format!("expected `key = value`, got `{s}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.as_deref().ok_or_else(|| Error::Config {
            line,
            reason: format!("key `{key}` appears before any section"),
        })?;
        let known = KNOWN
            .iter()
            .find(|(name, _)| *name == sec)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !known.contains(&key) {
            return Err(Error::Config {
                line,
                reason: format!("unknown key `{sec}.{key}`"),
            });
        }
        if value.is_empty() {
            return Err(bad(line, sec, key, "missing value"));
        }
        let slot = (sec.to_string(), key.to_string());
        if let Some(prev) = map.get(&slot) {
            let prev: &Entry = prev;
            return Err(bad(
                line,
                sec,
                key,
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
        map.insert(
            slot,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(Entries { map })
}

fn positive(v: Option<(f64, usize)>, section: &str, key: &str) -> Result<Option<f64>> {
    match v {
        Some((x, line)) if !(x.is_finite() && x > 0.0) => {
            Err(bad(line, section, key, format!("must be positive, got {x}")))
        }
        other => Ok(other.map(|(x, _)| x)),
    }
}

/// Parse and validate a configuration; relative paths stay as written.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut e = lex(text)?;

    let a = positive(e.parse("geometry", "a")?, "geometry", "a")?.ok_or_else(|| Error::Config {
        line: 0,
        reason: "`geometry.a` is required".into(),
    })?;
    let b = positive(e.parse("geometry", "b")?, "geometry", "b")?.ok_or_else(|| Error::Config {
        line: 0,
        reason: "`geometry.b` is required".into(),
    })?;
    let single: Option<(f64, usize)> = e.parse("geometry", "lambda")?;
    let list = e.list("geometry", "lambdas")?;
    let lambdas = match (single, list) {
        (Some(_), Some((_, line))) => {
            return Err(Error::Config {
                line,
                reason: "`geometry.lambda` and `geometry.lambdas` are mutually exclusive".into(),
            })
        }
        (Some((l, line)), None) if !l.is_finite() => return Err(bad(line, "geometry", "lambda", "must be finite")),
        (Some((l, _)), None) => Lambdas::Single(l),
        (None, Some((ls, line))) => {
            if ls.iter().any(|l| !l.is_finite() || *l == 0.0) {
                return Err(bad(line, "geometry", "lambdas", "values must be finite and nonzero"));
            }
            Lambdas::List(ls)
        }
        (None, None) => Lambdas::Unset,
    };

    let kind = match e.parse::<ProfileKind>("profile", "kind")? {
        Some((k, _)) => k,
        None => {
            return Err(Error::Config {
                line: 0,
                reason: "`profile.kind` is required".into(),
            })
        }
    };
    let amplitude = match e.parse::<f64>("profile", "amplitude")? {
        Some((x, line)) if !(x.is_finite() && x != 0.0) => {
            return Err(bad(line, "profile", "amplitude", "must be finite and nonzero"))
        }
        Some((x, _)) => x,
        None => 1.0,
    };
    let table = e.take("profile", "table").map(|t| PathBuf::from(t.value));

    let placeholder = Geometry { a, b, lambda: 0.0 };
    let mut solver = SolverConfig::defaults_for(&placeholder);
    if let Some((l, line)) = e.parse::<f64>("solver", "L")? {
        if !(l.is_finite() && l > b) {
            return Err(bad(line, "solver", "L", format!("must exceed b = {b}, got {l}")));
        }
        solver.l = l;
    }
    let nx: Option<(usize, usize)> = e.parse("solver", "nx")?;
    let h = e.parse::<f64>("solver", "h")?;
    solver.nx = match (nx, h) {
        (Some(_), Some((_, line))) => {
            return Err(Error::Config {
                line,
                reason: "`solver.nx` and `solver.h` are mutually exclusive".into(),
            })
        }
        (Some((n, line)), None) if n < 16 => return Err(bad(line, "solver", "nx", "need at least 16 intervals")),
        (Some((n, _)), None) => n,
        (None, Some((h, line))) if !(h.is_finite() && h > 0.0) => {
            return Err(bad(line, "solver", "h", "must be positive"))
        }
        (None, Some((h, _))) => (2.0 * solver.l / h).ceil() as usize,
        (None, None) => (2.0 * solver.l * DEFAULT_POINTS_PER_WIDTH / a).ceil() as usize,
    };
    if let Some((n, line)) = e.parse::<usize>("solver", "nmodes")? {
        if n < 2 {
            return Err(bad(line, "solver", "nmodes", "need at least 2 modes"));
        }
        solver.n_modes = n;
    }
    if let Some(tol) = positive(e.parse("solver", "eig_tol")?, "solver", "eig_tol")? {
        solver.eig_tol = tol;
    }
    if let Some((n, line)) = e.parse::<usize>("solver", "max_iter")? {
        if n == 0 {
            return Err(bad(line, "solver", "max_iter", "must be positive"));
        }
        solver.max_iter = n;
    }
    if let Some((backend, _)) = e.parse::<Backend>("solver", "backend")? {
        solver.backend = backend;
    }
    if let Some(entry) = e.take("solver", "adapt_L") {
        solver.adapt_l = parse_bool(&entry.value).map_err(|r| bad(entry.line, "solver", "adapt_L", r))?;
    }
    if let Some((k, line)) = e.parse::<usize>("solver", "k")? {
        if k == 0 {
            return Err(bad(line, "solver", "k", "need at least one eigenvalue"));
        }
        solver.k = k;
    }
    if let Some((cap, _)) = e.parse::<usize>("solver", "max_unknowns")? {
        solver.max_unknowns = cap;
    }

    let mut sweep = SweepOptions::default();
    if let Some(entry) = e.take("sweep", "upper_bound") {
        sweep.upper_bound = parse_bool(&entry.value).map_err(|r| bad(entry.line, "sweep", "upper_bound", r))?;
    }
    if let Some(entry) = e.take("sweep", "discretization_check") {
        sweep.discretization_check =
            parse_bool(&entry.value).map_err(|r| bad(entry.line, "sweep", "discretization_check", r))?;
    }

    let mut converge = ConvergeSpec {
        knob: Knob::H,
        levels: 3,
    };
    if let Some(entry) = e.take("converge", "knob") {
        converge.knob = entry
            .value
            .parse()
            .map_err(|_| bad(entry.line, "converge", "knob", "expected h, L or N"))?;
    }
    if let Some((n, line)) = e.parse::<usize>("converge", "levels")? {
        if n < 3 {
            return Err(bad(line, "converge", "levels", "need at least 3 levels"));
        }
        converge.levels = n;
    }

    let scan = match e.list("scan", "Ls")? {
        Some((ls, line)) => {
            if ls.iter().any(|l| !(l.is_finite() && *l > b)) {
                return Err(bad(line, "scan", "Ls", format!("every L must exceed b = {b}")));
            }
            ls
        }
        None => vec![10.0 * a, 20.0 * a, 40.0 * a],
    };

    let output = OutputSpec {
        path: e.take("output", "path").map(|x| PathBuf::from(x.value)),
        format: e.parse::<Format>("output", "format")?.map(|(f, _)| f),
        dump_matrices: e.take("output", "dump_matrices").map(|x| PathBuf::from(x.value)),
    };

    debug_assert!(e.map.is_empty(), "every known key is consumed");
    Ok(RunConfig {
        a,
        b,
        lambdas,
        profile: ProfileSpec { kind, amplitude, table },
        solver,
        sweep,
        converge,
        scan,
        output,
    })
}

/// Read and parse a config file; relative paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(q) = p.as_mut() {
            if q.is_relative() {
                *q = base.join(&*q);
            }
        }
    };
    resolve(&mut cfg.profile.table);
    resolve(&mut cfg.output.path);
    resolve(&mut cfg.output.dump_matrices);
    Ok(cfg)
}
