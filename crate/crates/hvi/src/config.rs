//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments run to the end of the line
//! domain.kind = interval
//! domain.length = 3.141592653589793
//! solver.k = 2
//! potential.family = example
//! potential.mu = 1.5
//! ```
//!
//! Unknown keys, repeated keys and keys that do not apply to the chosen
//! domain kind or potential family are errors. Everything else falls back to
//! [`SolverConfig::default`], except `solver.m`, which defaults to `solver.k`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hvi_core::{DomainSpec, PotentialSpec, QuadratureChoice, SolverConfig};

/// Solver settings plus where the artifacts go.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverConfig::default(),
            out_dir: PathBuf::from("hvi-out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn key(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "domain.kind",
    "domain.length",
    "domain.lx",
    "domain.ly",
    "domain.points",
    "solver.k",
    "solver.m",
    "solver.n_trunc",
    "solver.seed",
    "solver.max_inner_iter",
    "solver.max_outer_iter",
    "solver.override_hypotheses",
    "potential.family",
    "potential.mu",
    "potential.slope_neg",
    "potential.slope_pos",
    "potential.xi",
    "potential.c",
    "potential.epsilon",
    "potential.breakpoints",
    "potential.pieces",
    "quadrature.rule",
    "quadrature.nodes",
    "tol.inner",
    "tol.outer",
    "tol.residual",
    "tol.grouping",
    "tol.kink",
    "tol.branch",
    "threshold.nontrivial",
    "threshold.distinct",
    "search.multistarts",
    "search.start_radius",
    "search.n_grad",
    "search.floor",
    "search.path_segments",
    "search.path_refinements",
    "linking.delta_max",
    "linking.samples",
    "diagnostics.continuity_samples",
    "output.dir",
];

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.0.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn parsed<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::at(line, key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parsed(key, "a number")
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parsed(key, "a non-negative integer")
    }

    fn set_float(&mut self, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.float(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn set_count(&mut self, key: &str, slot: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = self.count(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn float_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((line, v)) = self.take(key) else {
            return Ok(None);
        };
        parse_list(&v).map(Some).ok_or_else(|| {
            ConfigError::at(line, key, format!("expected comma-separated numbers, got `{v}`"))
        })
    }

    fn first_unused(&self) -> Option<(&String, &Entry)> {
        self.0.iter().filter(|(_, e)| !e.used).min_by_key(|(_, e)| e.line)
    }
}

fn parse_list(v: &str) -> Option<Vec<f64>> {
    if v.trim().is_empty() {
        return Some(Vec::new());
    }
    v.split(',').map(|s| s.trim().parse().ok()).collect()
}

fn lex(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: None,
                message: format!("expected `key = value`, got `{body}`"),
            });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::at(line, key, "unknown key"));
        }
        if let Some(prev) = map.get(key) {
            let prev: &Entry = prev;
            return Err(ConfigError::at(line, key, format!("repeats the key set on line {}", prev.line)));
        }
        map.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
                used: false,
            },
        );
    }
    Ok(Entries(map))
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut e = lex(text)?;
    let mut cfg = SolverConfig::default();

    let kind = e.take("domain.kind").map(|(l, v)| (l, v.to_ascii_lowercase()));
    cfg.domain = match kind.as_ref().map(|(l, v)| (*l, v.as_str())) {
        None | Some((_, "interval")) => DomainSpec::Interval {
            length: e.float("domain.length")?.unwrap_or(std::f64::consts::PI),
        },
        Some((_, "rectangle")) => DomainSpec::Rectangle {
            lx: e.float("domain.lx")?.unwrap_or(std::f64::consts::PI),
            ly: e.float("domain.ly")?.unwrap_or(std::f64::consts::PI),
        },
        Some((line, "grid1d")) => DomainSpec::Grid1d {
            length: e.float("domain.length")?.unwrap_or(std::f64::consts::PI),
            points: e
                .count("domain.points")?
                .ok_or_else(|| ConfigError::at(line, "domain.points", "required for grid1d"))?,
        },
        Some((line, other)) => {
            return Err(ConfigError::at(
                line,
                "domain.kind",
                format!("expected interval, rectangle or grid1d, got `{other}`"),
            ))
        }
    };

    e.set_count("solver.k", &mut cfg.k)?;
    cfg.m = e.count("solver.m")?.unwrap_or(cfg.k);
    e.set_count("solver.n_trunc", &mut cfg.n_trunc)?;
    if let Some(seed) = e.parsed("solver.seed", "an unsigned integer")? {
        cfg.seed = seed;
    }
    e.set_count("solver.max_inner_iter", &mut cfg.max_inner_iter)?;
    e.set_count("solver.max_outer_iter", &mut cfg.max_outer_iter)?;
    if let Some(flag) = e.parsed("solver.override_hypotheses", "true or false")? {
        cfg.override_hypotheses = flag;
    }

    cfg.potential = parse_potential(&mut e)?;

    let rule = e.take("quadrature.rule").map(|(l, v)| (l, v.to_ascii_lowercase()));
    let nodes = e.count("quadrature.nodes")?;
    cfg.quadrature = match rule.as_ref().map(|(l, v)| (*l, v.as_str())) {
        None | Some((_, "auto")) if nodes.is_none() => QuadratureChoice::Auto,
        Some((_, "collocation")) if nodes.is_none() => QuadratureChoice::Collocation,
        None | Some((_, "gauss")) => QuadratureChoice::Gauss { nodes_per_dim: nodes },
        Some((line, "auto" | "collocation")) => {
            return Err(ConfigError::at(line, "quadrature.nodes", "only applies to the gauss rule"))
        }
        Some((line, other)) => {
            return Err(ConfigError::at(
                line,
                "quadrature.rule",
                format!("expected auto, collocation or gauss, got `{other}`"),
            ))
        }
    };

    e.set_float("tol.inner", &mut cfg.tol_inner)?;
    e.set_float("tol.outer", &mut cfg.tol_outer)?;
    e.set_float("tol.residual", &mut cfg.tol_residual)?;
    if let Some(t) = e.float("tol.grouping")? {
        cfg.grouping_tol = Some(t);
    }
    e.set_float("tol.kink", &mut cfg.kink_tol)?;
    e.set_float("tol.branch", &mut cfg.branch_tol)?;
    e.set_float("threshold.nontrivial", &mut cfg.nontrivial_threshold)?;
    e.set_float("threshold.distinct", &mut cfg.distinct_threshold)?;
    e.set_count("search.multistarts", &mut cfg.multistarts)?;
    e.set_float("search.start_radius", &mut cfg.start_radius)?;
    e.set_count("search.n_grad", &mut cfg.n_grad)?;
    e.set_float("search.floor", &mut cfg.psi_floor)?;
    e.set_count("search.path_segments", &mut cfg.path_segments)?;
    e.set_count("search.path_refinements", &mut cfg.path_refinements)?;
    e.set_float("linking.delta_max", &mut cfg.linking_delta_max)?;
    e.set_count("linking.samples", &mut cfg.linking_samples)?;
    e.set_count("diagnostics.continuity_samples", &mut cfg.continuity_samples)?;

    let out_dir = e.take("output.dir").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| RunConfig::default().out_dir);

    if let Some((key, entry)) = e.first_unused() {
        return Err(ConfigError::at(entry.line, key, "does not apply to the selected domain kind or potential family"));
    }
    let run = RunConfig { solver: cfg, out_dir };
    validate(&run, &e)?;
    Ok(run)
}

fn parse_potential(e: &mut Entries) -> Result<PotentialSpec, ConfigError> {
    let family = e.take("potential.family").map(|(l, v)| (l, v.to_ascii_lowercase()));
    let line = family.as_ref().map(|(l, _)| *l).unwrap_or(0);
    let required = |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError::at(line, key, "required for this potential family"));
    Ok(match family.as_ref().map(|(_, v)| v.as_str()) {
        None | Some("example") => PotentialSpec::Example {
            mu: e.float("potential.mu")?.unwrap_or(1.5),
            slope_neg: e.float("potential.slope_neg")?.unwrap_or(0.5),
            slope_pos: e.float("potential.slope_pos")?.unwrap_or(0.5),
        },
        Some("max") => PotentialSpec::Max {
            xi: required(e.float("potential.xi")?, "potential.xi")?,
            c: required(e.float("potential.c")?, "potential.c")?,
        },
        Some("quadratic") => PotentialSpec::Quadratic {
            epsilon: required(e.float("potential.epsilon")?, "potential.epsilon")?,
        },
        Some("zero") => PotentialSpec::Zero,
        Some("custom") => {
            let breakpoints = e
                .float_list("potential.breakpoints")?
                .ok_or_else(|| ConfigError::at(line, "potential.breakpoints", "required for the custom family"))?;
            let (pline, text) = e
                .take("potential.pieces")
                .ok_or_else(|| ConfigError::at(line, "potential.pieces", "required for the custom family"))?;
            let pieces = text
                .split('|')
                .map(|p| p.split_whitespace().map(|c| c.parse().ok()).collect::<Option<Vec<f64>>>())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    ConfigError::at(pline, "potential.pieces", "expected `c0 c1 c2 | c0 c1 | ...` (ascending coefficients)")
                })?;
            PotentialSpec::Custom { breakpoints, pieces }
        }
        Some(other) => {
            return Err(ConfigError::at(
                line,
                "potential.family",
                format!("expected example, max, quadratic, zero or custom, got `{other}`"),
            ))
        }
    })
}

fn validate(run: &RunConfig, e: &Entries) -> Result<(), ConfigError> {
    run.solver.validate().map_err(|err| {
        let name = match err.root() {
            hvi_core::HviError::InvalidParameter { name, .. } => Some(*name),
            _ => None,
        };
        let line = name.and_then(|n| e.0.get(n)).map(|entry| entry.line);
        ConfigError {
            line,
            key: name.map(str::to_string),
            message: err.to_string(),
        }
    })?;
    run.solver
        .potential
        .build()
        .map_err(|err| ConfigError::key("potential", err.to_string()))?;
    Ok(())
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|err| ConfigError {
        line: None,
        key: None,
        message: format!("cannot read {}: {err}", path.display()),
    })?;
    parse_config(&text)
}

fn list(values: &[f64], sep: &str) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(sep)
}

/// The configuration as `key = value` lines that [`parse_config`] reads back
/// to an equal value. Floats use the shortest exact representation.
pub fn echo(run: &RunConfig) -> Vec<(&'static str, String)> {
    let c = &run.solver;
    let mut out: Vec<(&'static str, String)> = Vec::new();
    let mut put = |k: &'static str, v: String| out.push((k, v));
    put("domain.kind", c.domain.kind_name().to_string());
    match c.domain {
        DomainSpec::Interval { length } => put("domain.length", format!("{length:?}")),
        DomainSpec::Rectangle { lx, ly } => {
            put("domain.lx", format!("{lx:?}"));
            put("domain.ly", format!("{ly:?}"));
        }
        DomainSpec::Grid1d { length, points } => {
            put("domain.length", format!("{length:?}"));
            put("domain.points", points.to_string());
        }
    }
    put("solver.k", c.k.to_string());
    put("solver.m", c.m.to_string());
    put("solver.n_trunc", c.n_trunc.to_string());
    put("solver.seed", c.seed.to_string());
    put("solver.max_inner_iter", c.max_inner_iter.to_string());
    put("solver.max_outer_iter", c.max_outer_iter.to_string());
    put("solver.override_hypotheses", c.override_hypotheses.to_string());
    put("potential.family", c.potential.family_name().to_string());
    match &c.potential {
        PotentialSpec::Example { mu, slope_neg, slope_pos } => {
            put("potential.mu", format!("{mu:?}"));
            put("potential.slope_neg", format!("{slope_neg:?}"));
            put("potential.slope_pos", format!("{slope_pos:?}"));
        }
        PotentialSpec::Max { xi, c } => {
            put("potential.xi", format!("{xi:?}"));
            put("potential.c", format!("{c:?}"));
        }
        PotentialSpec::Quadratic { epsilon } => put("potential.epsilon", format!("{epsilon:?}")),
        PotentialSpec::Zero => {}
        PotentialSpec::Custom { breakpoints, pieces } => {
            put("potential.breakpoints", list(breakpoints, ", "));
            put(
                "potential.pieces",
                pieces.iter().map(|p| list(p, " ")).collect::<Vec<_>>().join(" | "),
            );
        }
    }
    match c.quadrature {
        QuadratureChoice::Auto => put("quadrature.rule", "auto".into()),
        QuadratureChoice::Collocation => put("quadrature.rule", "collocation".into()),
        QuadratureChoice::Gauss { nodes_per_dim } => {
            put("quadrature.rule", "gauss".into());
            if let Some(n) = nodes_per_dim {
                put("quadrature.nodes", n.to_string());
            }
        }
    }
    put("tol.inner", format!("{:?}", c.tol_inner));
    put("tol.outer", format!("{:?}", c.tol_outer));
    put("tol.residual", format!("{:?}", c.tol_residual));
    if let Some(t) = c.grouping_tol {
        put("tol.grouping", format!("{t:?}"));
    }
    put("tol.kink", format!("{:?}", c.kink_tol));
    put("tol.branch", format!("{:?}", c.branch_tol));
    put("threshold.nontrivial", format!("{:?}", c.nontrivial_threshold));
    put("threshold.distinct", format!("{:?}", c.distinct_threshold));
    put("search.multistarts", c.multistarts.to_string());
    put("search.start_radius", format!("{:?}", c.start_radius));
    put("search.n_grad", c.n_grad.to_string());
    put("search.floor", format!("{:?}", c.psi_floor));
    put("search.path_segments", c.path_segments.to_string());
    put("search.path_refinements", c.path_refinements.to_string());
    put("linking.delta_max", format!("{:?}", c.linking_delta_max));
    put("linking.samples", c.linking_samples.to_string());
    put("diagnostics.continuity_samples", c.continuity_samples.to_string());
    put("output.dir", run.out_dir.display().to_string());
    out
}

pub fn echo_text(run: &RunConfig) -> String {
    let mut s = String::new();
    for (k, v) in echo(run) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let run = parse_config("# header\n\nsolver.k = 2 # trailing\n").unwrap();
        assert_eq!(run.solver.k, 2);
    }

    #[test]
    fn missing_equals_is_reported_with_line() {
        let err = parse_config("solver.k = 2\nsolver.m 2\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }
}
