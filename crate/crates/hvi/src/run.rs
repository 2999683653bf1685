//! One invocation of the pipeline: stages in order, a report that records
//! everything reached before a failure, and the artifacts to write.

use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use hvi_core::multiplicity::Solution;
use hvi_core::{HviError, Pipeline, Stage};

use crate::config::{echo, RunConfig};
use crate::report::{psi_summary_csv, solution_csv, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_HYPOTHESES: i32 = 2;
pub const EXIT_SEARCH: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: String,
    /// Wall-clock time per completed stage. Kept out of the report so that
    /// reports of identical runs are byte-identical.
    pub timings: Vec<(&'static str, Duration)>,
    /// (file name, contents) of the tables to write next to the report.
    pub tables: Vec<(String, String)>,
    pub solutions: Vec<Solution>,
    pub error: Option<HviError>,
}

impl RunOutcome {
    pub fn timings_text(&self) -> String {
        let mut s = String::new();
        for (name, t) in &self.timings {
            s.push_str(&format!("{name} = {:.6}\n", t.as_secs_f64()));
        }
        s
    }
}

pub fn exit_code_for(err: &HviError) -> i32 {
    match err.stage() {
        None | Some(Stage::Basis | Stage::Decomposition) => EXIT_CONFIG,
        Some(Stage::Hypotheses) => EXIT_HYPOTHESES,
        Some(Stage::Context | Stage::Linking | Stage::Minimization | Stage::SecondPoint) => EXIT_SEARCH,
        Some(Stage::Certification) => EXIT_CERTIFICATION,
    }
}

struct Clock {
    timings: Vec<(&'static str, Duration)>,
}

impl Clock {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push((stage, t.elapsed()));
        out
    }
}

/// Runs the stages and builds the report. Nothing is written to disk.
/// With `check_only` the run stops after the hypothesis checker.
pub fn execute(run: &RunConfig, check_only: bool) -> RunOutcome {
    let mut clock = Clock { timings: Vec::new() };
    let mut body = Report::new();
    let mut tables = Vec::new();
    let mut solutions = Vec::new();
    let result = stages(run, check_only, &mut clock, &mut body, &mut tables, &mut solutions);

    let mut report = Report::new();
    report.section("run");
    let exit_code = match &result {
        Ok(()) => EXIT_OK,
        Err(e) => exit_code_for(e),
    };
    report.put("status", if exit_code == EXIT_OK { "success" } else { "failure" });
    report.put("exit_code", exit_code);
    report.put("check_only", check_only);
    if let Err(e) = &result {
        report.put("failed_stage", e.stage().map_or("configuration", Stage::name));
        report.put("error", e);
    }
    report.section("config");
    for (k, v) in echo(run) {
        report.put(k, v);
    }
    let mut text = report.into_string();
    let body = body.into_string();
    if !body.is_empty() {
        text.push('\n');
        text.push_str(&body);
    }
    RunOutcome {
        exit_code,
        report: text,
        timings: clock.timings,
        tables,
        solutions,
        error: result.err(),
    }
}

fn stages(
    run: &RunConfig,
    check_only: bool,
    clock: &mut Clock,
    r: &mut Report,
    tables: &mut Vec<(String, String)>,
    solutions: &mut Vec<Solution>,
) -> Result<(), HviError> {
    let pipeline = clock.time("basis", || Pipeline::new(run.solver.clone()))?;
    r.section("potential");
    r.put("family", run.solver.potential.family_name());
    r.put("description", pipeline.potential.describe());
    r.section("basis");
    r.put("domain", pipeline.basis.domain().kind_name());
    r.put("modes", pipeline.basis.len());
    r.put("distinct_groups", pipeline.basis.groups().len());
    r.put("dim_hbar0", pipeline.split.dim_hbar0());
    r.put("dim_y", pipeline.split.y.len());
    r.put("dim_v", pipeline.split.v.len());
    r.put("dim_hhat", pipeline.split.dim_hhat());
    let lambdas: Vec<String> = (1..=run.solver.k + 1)
        .filter_map(|g| pipeline.basis.distinct_eigenvalue(g))
        .map(crate::report::num)
        .collect();
    r.put("distinct_eigenvalues", lambdas.join(", "));

    let hypotheses = clock.time("hypotheses", || pipeline.hypotheses())?;
    r.hypotheses(&hypotheses);
    let gate = pipeline.gate(&hypotheses);
    r.put("overridden", !hypotheses.all_pass() && gate.is_ok());
    gate?;
    if check_only {
        return Ok(());
    }

    let ctx = clock.time("context", || pipeline.context())?;
    r.section("context");
    r.put("quadrature_nodes", ctx.quadrature().len());
    r.num("slope_constant", ctx.slope_constant());
    r.num("required_margin", ctx.required_margin());

    let linking = clock.time("local_linking", || pipeline.linking(&ctx))?;
    r.linking(&linking);
    let minimization = clock.time("minimize_psi", || pipeline.minimize(&ctx))?;
    r.minimization(&minimization);
    let second = clock.time("second_point_search", || pipeline.second_point(&ctx, &minimization, &linking))?;
    r.second_point(&second);

    let points = [minimization.best.clone(), second.point.clone()];
    let (certified, distances) = clock.time("certification", || pipeline.certify(&ctx, &points))?;
    let hbar0 = pipeline.split.dim_hbar0();
    for (i, s) in certified.iter().enumerate() {
        r.solution(i + 1, s, hbar0);
    }
    r.section("distances");
    for (i, j, d) in &distances {
        r.num(&format!("h1.{i}.{j}"), *d);
    }
    let diagnostics = clock.time("diagnostics", || pipeline.diagnostics(&ctx, &certified))
        .map_err(|e| e.at(Stage::Certification))?;
    r.section("diagnostics");
    r.num("required_margin", diagnostics.required_margin);
    r.num("audited_margin", diagnostics.audited_margin);
    r.num("continuity_ratio", diagnostics.continuity_ratio);
    r.num("slope_constant", diagnostics.slope_constant);
    r.put("dim_hbar0", diagnostics.dim_hbar0);
    r.put("dim_hhat", diagnostics.dim_hhat);
    r.put("quadrature_nodes", diagnostics.n_nodes);

    for (i, s) in certified.iter().enumerate() {
        tables.push((format!("solution_{}.csv", i + 1), solution_csv(&ctx, s)));
    }
    tables.push(("psi_summary.csv".into(), psi_summary_csv(&certified)));
    *solutions = certified;
    Ok(())
}

/// Writes report.txt, timings.txt and the tables into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.txt"), &outcome.report)?;
    std::fs::write(dir.join("timings.txt"), outcome.timings_text())?;
    for (name, contents) in &outcome.tables {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}
