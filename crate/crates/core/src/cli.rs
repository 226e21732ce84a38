//! Command dispatch for the `charflow` binary.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a flow
//! diverges, 2 for unreadable or invalid input.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::charfield::is_first_integral;
use crate::flow::{Method, OrbitError};
use crate::gradsys::{certify_stationarity, CertifyOptions, GradsysError, DEFAULT_FD_STEP};
use crate::lie::{check_closure, Coefficients};
use crate::problem::{GeneratorSource, Problem};
use crate::report::{csv, problem_hash, CheckRecord, Report};
use crate::stationary::{check_compatibility, check_level, check_transversality};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

pub const DEFAULT_ORBIT_GRID: usize = 11;

#[derive(Debug, Parser)]
#[command(name = "charflow", version, about = "Characteristic-field orbits and stationarity certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Problem file (TOML).
    pub file: PathBuf,
    /// Points per axis of the λ- or parameter grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the CSV table here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// First-integral and closure checks of the generators.
    Check(Common),
    /// Orbit table over the λ-grid.
    Orbit(Common),
    /// Full stationarity certificate.
    Certify(Common),
    /// Compatibility, level and transversality of the Cauchy data.
    Cauchy(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Orbit(_) => "orbit",
            Command::Certify(_) => "certify",
            Command::Cauchy(_) => "cauchy",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Check(c) | Command::Orbit(c) | Command::Certify(c) | Command::Cauchy(c) => c,
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn input_error(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

struct Artifacts {
    report: Report,
    table: Option<String>,
}

pub fn run(cli: &Cli) -> Outcome {
    let common = cli.command.common();
    let bytes = match std::fs::read(&common.file) {
        Ok(b) => b,
        Err(e) => return Outcome::input_error(format!("cannot read {}: {e}", common.file.display())),
    };
    let Ok(text) = std::str::from_utf8(&bytes) else {
        return Outcome::input_error(format!("{} is not UTF-8", common.file.display()));
    };
    let problem = match Problem::from_toml(text) {
        Ok(p) => p,
        Err(e) => return Outcome::input_error(format!("{}: {e}", common.file.display())),
    };
    let hash = problem_hash(&bytes);
    let result = match &cli.command {
        Command::Check(_) => cmd_check(&problem, hash),
        Command::Orbit(c) => cmd_orbit(&problem, hash, c.grid),
        Command::Certify(c) => cmd_certify(&problem, hash, c.grid),
        Command::Cauchy(c) => cmd_cauchy(&problem, hash, c.grid),
    };
    let artifacts = match result {
        Ok(a) => a,
        Err(message) => return Outcome::input_error(message),
    };
    emit(cli.command.name(), common, artifacts)
}

fn emit(command: &str, common: &Common, artifacts: Artifacts) -> Outcome {
    let Artifacts { report, table } = artifacts;
    let mut stdout = String::new();
    let mut stderr = String::new();
    let json = report.to_json();

    let write = |path: &Path, content: &str| {
        std::fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
    };
    // orbit prints its table by default, every other command its report
    let table_on_stdout = command == "orbit" && common.csv.is_none();
    match &common.json {
        Some(path) => {
            if let Err(e) = write(path, &json) {
                return Outcome::input_error(e);
            }
        }
        None if !table_on_stdout => stdout.push_str(&json),
        None => {}
    }
    if let Some(table) = table {
        match &common.csv {
            Some(path) => {
                if let Err(e) = write(path, &table) {
                    return Outcome::input_error(e);
                }
            }
            None if table_on_stdout => stdout.push_str(&table),
            None => {}
        }
    }

    for c in &report.checks {
        stderr.push_str(&format!(
            "{} {:<28} {:.3e} (tol {:.1e})\n",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.max_residual,
            c.tolerance
        ));
    }
    for n in &report.notes {
        stderr.push_str(&format!("note: {n}\n"));
    }
    stderr.push_str(&format!("{command}: {}\n", if report.pass { "PASS" } else { "FAIL" }));
    Outcome {
        code: if report.pass { EXIT_PASS } else { EXIT_FAIL },
        stdout,
        stderr,
    }
}

fn environment(p: &Problem, extra: Value) -> Value {
    let integrator = match p.integrator.method {
        Method::Rk4 { step } => json!({"method": "rk4", "step": step}),
        Method::Rk45 { abs_tol, rel_tol } => json!({"method": "rk45", "abs_tol": abs_tol, "rel_tol": rel_tol}),
    };
    let mut env = json!({
        "charflow_version": env!("CARGO_PKG_VERSION"),
        "n": p.ctx.n(),
        "kind": p.ctx.kind().as_str(),
        "generators": p.generators.len(),
        "integrator": integrator,
        "max_steps_per_unit": p.integrator.max_steps_per_unit,
        "horizon": p.integrator.horizon,
        "box": p.radii,
        "rho": p.rho,
        "sample_points": p.sampling.points,
        "seed": p.sampling.seed,
        "closure_mode": p.sampling.closure_mode.to_string(),
    });
    if let Some(name) = &p.name {
        env["problem_name"] = json!(name);
    }
    if let (Value::Object(map), Value::Object(more)) = (&mut env, extra) {
        map.extend(more);
    }
    env
}

/// First-integral and closure checks shared by `check` and `certify`.
fn generator_checks(p: &Problem, report: &mut Report) -> Result<(), String> {
    let grid = p.sample_grid();
    let z0 = p.base_field();
    let tol = p.tolerances;
    for (i, h) in p.generators.iter().enumerate() {
        let r = is_first_integral(h, &z0, &grid, tol.first_integral).map_err(|e| e.to_string())?;
        report.push(CheckRecord::upper(format!("first_integral[{}]", i + 1), r.max_residual, tol.first_integral));
        if !r.pass {
            report.note(format!(
                "generator {} ({}) is not a first integral of the H0 field; worst point {:?}",
                i + 1,
                h.source(),
                r.worst_point
            ));
        }
    }
    let fields = p.generator_fields();
    let closure = check_closure(&fields, p.sampling.closure_mode, &grid, tol.closure).map_err(|e| e.to_string())?;
    report.push(CheckRecord::upper("closure", closure.max_residual, tol.closure));
    if closure.degenerate_span() {
        report.note(format!(
            "generator matrix is rank deficient at {} of {} sample points",
            closure.rank_deficient_points, closure.samples
        ));
    }
    let pairs: Vec<Value> = closure
        .pairs
        .iter()
        .map(|pc| {
            let alpha = match &pc.coefficients {
                Coefficients::Constant(c) => json!(c),
                Coefficients::Pointwise(_) => Value::Null,
            };
            json!({"i": pc.i + 1, "j": pc.j + 1, "alpha": alpha, "max_residual": pc.max_residual})
        })
        .collect();
    report.set_summary("structure_constants", pairs);
    report.set_summary("rank_deficient_points", closure.rank_deficient_points);
    if let GeneratorSource::BaseFields(fields) = &p.source {
        let lifted: Vec<Vec<String>> = fields.iter().map(|f| f.to_strings()).collect();
        report.set_summary("base_fields", lifted);
    }
    Ok(())
}

fn cmd_check(p: &Problem, hash: String) -> Result<Artifacts, String> {
    let mut report = Report::new("check", hash, environment(p, json!({})));
    generator_checks(p, &mut report)?;
    Ok(Artifacts { report, table: None })
}

fn orbit_grid_size(grid: Option<usize>) -> Result<usize, String> {
    let k = grid.unwrap_or(DEFAULT_ORBIT_GRID);
    if k < 3 || k.is_multiple_of(2) {
        return Err(format!("--grid must be odd and at least 3, got {k}"));
    }
    Ok(k)
}

fn cmd_orbit(p: &Problem, hash: String, grid: Option<usize>) -> Result<Artifacts, String> {
    let k = orbit_grid_size(grid)?;
    let mut report = Report::new("orbit", hash, environment(p, json!({"points_per_axis": k})));
    let orbit = p.orbit().map_err(|e| e.to_string())?;
    let rows = orbit.grid(k).map_err(|e| e.to_string())?;
    let level = p.h0.value_at(&p.z0).map_err(|e| e.to_string())?;
    let m = orbit.rank();

    let mut header: Vec<String> = (1..=m).map(|i| format!("t{i}")).collect();
    header.extend(p.ctx.var_names());
    header.push("H0".into());
    header.push("drift".into());

    let mut table = Vec::with_capacity(rows.len());
    let mut max_drift = 0.0f64;
    let mut diverged = 0usize;
    for row in &rows {
        match &row.point {
            Ok(z) => {
                let h = p.h0.value_at(z).map_err(|e| e.to_string())?;
                let drift = h - level;
                max_drift = max_drift.max(drift.abs());
                let mut line = row.lambda.clone();
                line.extend_from_slice(z.coords());
                line.push(h);
                line.push(drift);
                table.push(line);
            }
            Err(e) => {
                diverged += 1;
                report.note(format!("λ = {:?}: {e}", row.lambda));
            }
        }
    }
    report.push(CheckRecord::upper("drift", max_drift, p.tolerances.stationarity));
    report.set_summary("rows", rows.len());
    report.set_summary("diverged", diverged);
    report.set_summary("max_drift", max_drift);
    if diverged > 0 {
        report.fail(format!("{diverged} of {} orbit points diverged and are omitted from the table", rows.len()));
    }
    Ok(Artifacts {
        report,
        table: Some(csv(&header, &table)),
    })
}

fn cmd_certify(p: &Problem, hash: String, grid: Option<usize>) -> Result<Artifacts, String> {
    let k = orbit_grid_size(grid)?;
    let tol = p.tolerances;
    let opts = CertifyOptions {
        points_per_axis: k,
        tolerance: tol.stationarity,
        rank_threshold: tol.rank,
        fd_step: DEFAULT_FD_STEP,
    };
    let mut report = Report::new(
        "certify",
        hash,
        environment(p, json!({"points_per_axis": k, "fd_step": opts.fd_step})),
    );
    generator_checks(p, &mut report)?;
    let orbit = p.orbit().map_err(|e| e.to_string())?;
    let cert = match certify_stationarity(&orbit, &p.h0, &opts) {
        Ok(c) => c,
        Err(e @ (GradsysError::RankDeficient { .. } | GradsysError::Orbit(OrbitError::Flow { .. }))) => {
            report.fail(e.to_string());
            return Ok(Artifacts { report, table: None });
        }
        Err(e) => return Err(e.to_string()),
    };
    report.push(CheckRecord::upper("directional_derivative", cert.max_directional, tol.stationarity));
    report.push(CheckRecord::upper("gradient_norm_ratio", cert.max_gradient_ratio, 1.0));
    report.push(CheckRecord::upper("drift", cert.max_drift, tol.stationarity));
    report.push(CheckRecord::lower("sigma_min_a", cert.min_sigma_a, tol.rank));
    if let Some(e) = cert.identity_error {
        report.push(CheckRecord::upper("a_at_origin", e, tol.stationarity));
    }
    report.push(CheckRecord::upper("coherence_defect", cert.max_coherent_defect, tol.defect));

    report.set_summary("points", cert.points);
    report.set_summary("max_directional", cert.max_directional);
    report.set_summary("max_gradient_norm", cert.max_gradient_norm);
    report.set_summary("max_drift", cert.max_drift);
    report.set_summary("min_sigma_a", cert.min_sigma_a);
    report.set_summary("max_cond_a", cert.max_cond_a);
    report.set_summary("max_defect", cert.max_defect);
    let failing: Vec<Value> = cert
        .failures()
        .map(|r| json!({"lambda": r.lambda, "failed": r.failures}))
        .collect();
    report.set_summary("failing_points", failing);
    if !cert.pass {
        report.note(format!("certificate fails at {} of {} grid points", cert.failures().count(), cert.points));
    }

    let m = orbit.rank();
    let mut header: Vec<String> = (1..=m).map(|i| format!("t{i}")).collect();
    header.extend(
        [
            "drift",
            "directional",
            "gradient_norm",
            "gradient_bound",
            "sigma_min_a",
            "cond_a",
            "max_defect",
        ]
        .map(String::from),
    );
    let rows: Vec<Vec<f64>> = cert
        .rows
        .iter()
        .map(|r| {
            let mut line = r.lambda.clone();
            line.extend([
                r.drift,
                r.directional,
                r.gradient_norm,
                r.gradient_bound,
                r.sigma_min_a,
                r.cond_a,
                r.max_defect,
            ]);
            line
        })
        .collect();
    Ok(Artifacts {
        report,
        table: Some(csv(&header, &rows)),
    })
}

fn cmd_cauchy(p: &Problem, hash: String, grid: Option<usize>) -> Result<Artifacts, String> {
    let Some(section) = &p.cauchy else {
        return Err("problem has no [cauchy] section".into());
    };
    let k = grid.unwrap_or(section.points_per_axis);
    if k < 2 {
        return Err(format!("--grid must be at least 2, got {k}"));
    }
    let tol = p.tolerances;
    let mut report = Report::new("cauchy", hash, environment(p, json!({"points_per_axis": k})));
    let data = &section.data;
    let lambdas = data.grid(k).map_err(|e| e.to_string())?;
    let compat = check_compatibility(data, &lambdas, tol.cauchy).map_err(|e| e.to_string())?;
    let level = check_level(data, &p.h0, &p.z0, &lambdas, tol.cauchy).map_err(|e| e.to_string())?;
    let trans = check_transversality(data, &p.h0, &lambdas, tol.transversality).map_err(|e| e.to_string())?;
    report.push(CheckRecord::upper("compatibility", compat.max_residual, tol.cauchy));
    report.push(CheckRecord::upper("level", level.max_residual, tol.cauchy));
    report.push(CheckRecord::lower("transversality_sigma_min", trans.min_sigma, tol.transversality));
    report.set_summary("samples", lambdas.len());
    report.set_summary("min_abs_det", trans.min_abs_det);
    report.set_summary("min_sigma", trans.min_sigma);
    report.set_summary(
        "worst",
        json!({"compatibility": compat.worst, "level": level.worst, "transversality": trans.worst}),
    );
    Ok(Artifacts { report, table: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_parsing() {
        let cli = Cli::try_parse_from(["charflow", "certify", "p.toml", "--grid", "5", "--json", "out.json"]).unwrap();
        match &cli.command {
            Command::Certify(c) => {
                assert_eq!(c.grid, Some(5));
                assert_eq!(c.json.as_deref(), Some(Path::new("out.json")));
                assert!(c.csv.is_none());
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["charflow", "plot", "p.toml"]).is_err());
        assert!(Cli::try_parse_from(["charflow", "check"]).is_err());
    }

    #[test]
    fn missing_file_is_an_input_error() {
        let cli = Cli::try_parse_from(["charflow", "check", "/nonexistent/problem.toml"]).unwrap();
        let out = run(&cli);
        assert_eq!(out.code, EXIT_INPUT);
        assert!(out.stderr.contains("cannot read"));
    }

    #[test]
    fn grid_validation() {
        assert!(orbit_grid_size(Some(4)).is_err());
        assert!(orbit_grid_size(Some(1)).is_err());
        assert_eq!(orbit_grid_size(None), Ok(11));
    }
}
