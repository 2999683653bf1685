//! Structured text reports and CSV tables.
//!
//! A report is a sequence of `[section]` headers, each followed by
//! `key = value` lines in a fixed order. Floats are printed with 17
//! significant digits so equal runs give byte-identical files.

use std::fmt::{Display, Write as _};

use hvi_core::multiplicity::{LinkingReport, MinimizeReport, SecondPointReport, Solution};
use hvi_core::potential::HypothesisReport;
use hvi_core::spectral::{evaluate, Point};
use hvi_core::{DomainSpec, EnergyContext, ResidualReport};

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn section(&mut self, name: &str) {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        let _ = writeln!(self.text, "[{name}]");
    }

    pub fn put(&mut self, key: &str, value: impl Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.put(key, num(value));
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn hypotheses(&mut self, h: &HypothesisReport) {
        self.section("hypotheses");
        self.put("k", h.k);
        self.put("m", h.m);
        let names = ["lambda_m_minus_1", "lambda_m", "lambda_k", "lambda_k_plus_1"];
        for (n, v) in names.iter().zip(h.eigenvalues) {
            self.num(n, v);
        }
        self.put("all_pass", h.all_pass());
        for c in &h.checks {
            let key = c.id.label();
            self.put(&format!("{key}.verdict"), c.verdict.name());
            for (name, v) in &c.constants {
                self.num(&format!("{key}.{name}"), *v);
            }
            for (name, v) in &c.witness {
                self.num(&format!("{key}.witness.{name}"), *v);
            }
            if !c.note.is_empty() {
                self.put(&format!("{key}.note"), &c.note);
            }
        }
    }

    pub fn linking(&mut self, l: &LinkingReport) {
        self.section("local_linking");
        self.num("delta", l.delta);
        self.put("y_vacuous", l.y_vacuous);
        self.num("y_min_psi", l.y_min);
        self.num("v_max_psi", l.v_max);
        self.put("samples_per_side", l.samples_per_side);
        self.num("slack", l.slack);
    }

    pub fn minimization(&mut self, m: &MinimizeReport) {
        self.section("minimize_psi");
        self.put("starts", m.starts);
        self.put("converged_starts", m.converged_starts);
        self.put("distinct_minima", m.minima.len());
        self.put("evaluations", m.evaluations);
        self.num("lowest_psi", m.lowest_psi);
        self.num("best_psi", m.best.psi_value);
        self.num("best_reduced_residual", m.best.reduced_residual);
        for (i, p) in m.minima.iter().enumerate() {
            self.num(&format!("minimum.{}.psi", i + 1), p.psi_value);
        }
    }

    pub fn second_point(&mut self, s: &SecondPointReport) {
        self.section("second_point");
        self.put("branch", s.branch.name());
        self.put("origin", s.point.origin.name());
        self.put("kind", s.point.kind.name());
        if let Some(v) = s.path_max {
            self.num("path_max_psi", v);
        }
        if let Some(d) = s.path_degenerate {
            self.put("path_degenerate", d);
        }
        for (i, (origin, outcome)) in s.attempts.iter().enumerate() {
            self.put(&format!("attempt.{}", i + 1), format!("{origin}: {outcome}"));
        }
    }

    pub fn residual(&mut self, prefix: &str, r: &ResidualReport) {
        self.num(&format!("{prefix}.max_violation"), r.max_violation);
        self.num(&format!("{prefix}.max_relative_violation"), r.max_relative_violation);
        self.num(&format!("{prefix}.violating_fraction"), r.violating_fraction);
        self.num(&format!("{prefix}.tol"), r.tol);
        self.put(&format!("{prefix}.n_nodes"), r.n_nodes);
        self.put(&format!("{prefix}.kink_nodes"), r.kink_nodes);
        self.put(&format!("{prefix}.passes"), r.passes());
    }

    pub fn solution(&mut self, index: usize, s: &Solution, hbar0: usize) {
        self.section(&format!("solution.{index}"));
        self.put("kind", s.point.kind.name());
        self.put("origin", s.point.origin.name());
        self.num("psi", s.point.psi_value);
        self.num("reduced_residual", s.point.reduced_residual);
        self.num("h1_norm", s.h1_norm);
        self.num("full_min_norm_subgradient", s.full_subgradient);
        self.num("inner_residual", s.inner_residual);
        self.num("strong_convexity_margin", s.strong_convexity_margin);
        self.residual("residual", &s.residual);
        let u: Vec<String> = s.x.coeffs()[..hbar0].iter().map(|c| num(*c)).collect();
        self.put("low_mode_coefficients", u.join(", "));
    }
}

/// Uniform plot grid: 512 nodes on an interval, 128 × 128 on a rectangle,
/// boundary included.
pub fn plot_grid(domain: &DomainSpec) -> Vec<Point> {
    let line = |len: f64, n: usize| (0..n).map(move |i| len * i as f64 / (n - 1) as f64);
    match *domain {
        DomainSpec::Interval { length } | DomainSpec::Grid1d { length, .. } => {
            line(length, 512).map(|z| [z, 0.0]).collect()
        }
        DomainSpec::Rectangle { lx, ly } => line(ly, 128)
            .flat_map(|y| line(lx, 128).map(move |x| [x, y]))
            .collect(),
    }
}

/// Columns z, x(z), r(z) = −Δx − λ_k x, and the Clarke interval of ∂j at x(z).
pub fn solution_csv(ctx: &EnergyContext, s: &Solution) -> String {
    let grid = plot_grid(ctx.basis().domain());
    let values = evaluate(ctx.basis(), &s.x, &grid);
    let residual = ctx.residual_values(&s.x, &grid);
    let two_d = matches!(ctx.basis().domain(), DomainSpec::Rectangle { .. });
    let mut out = String::from(if two_d {
        "z1,z2,x,r,dj_lower,dj_upper\n"
    } else {
        "z,x,r,dj_lower,dj_upper\n"
    });
    for ((z, x), r) in grid.iter().zip(&values).zip(&residual) {
        let iv = ctx.potential().clarke_interval_within(*x, ctx.kink_tol());
        if two_d {
            let _ = write!(out, "{},{},", num(z[0]), num(z[1]));
        } else {
            let _ = write!(out, "{},", num(z[0]));
        }
        let _ = writeln!(out, "{},{},{},{}", num(*x), num(*r), num(iv.lo), num(iv.hi));
    }
    out
}

pub fn psi_summary_csv(solutions: &[Solution]) -> String {
    let mut out = String::from("solution,kind,origin,psi,reduced_residual,h1_norm,max_violation\n");
    for (i, s) in solutions.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i + 1,
            s.point.kind.name(),
            s.point.origin.name(),
            num(s.point.psi_value),
            num(s.point.reduced_residual),
            num(s.h1_norm),
            num(s.residual.max_violation)
        );
    }
    out
}

/// The lines of one `[section]` of a report, without the header.
pub fn section<'a>(report: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let header = format!("[{name}]");
    let mut lines = report.lines().skip_while(|l| *l != header);
    lines.next()?;
    Some(lines.take_while(|l| !l.is_empty() && !l.starts_with('[')).collect())
}

/// The value of `key` in `[section]`.
pub fn lookup<'a>(report: &'a str, section_name: &str, key: &str) -> Option<&'a str> {
    section(report, section_name)?
        .into_iter()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_read_back() {
        let mut r = Report::new();
        r.section("a");
        r.put("x", 1);
        r.section("b");
        r.num("y", 0.5);
        let text = r.into_string();
        assert_eq!(lookup(&text, "a", "x"), Some("1"));
        assert_eq!(lookup(&text, "b", "y"), Some("5.0000000000000000e-1"));
        assert_eq!(lookup(&text, "a", "y"), None);
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = num(std::f64::consts::PI);
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
        assert_eq!(s.split('e').next().unwrap().replace('.', "").len(), 17);
    }

    #[test]
    fn plot_grid_sizes() {
        assert_eq!(plot_grid(&DomainSpec::Interval { length: 1.0 }).len(), 512);
        assert_eq!(plot_grid(&DomainSpec::Rectangle { lx: 1.0, ly: 2.0 }).len(), 128 * 128);
    }
}
