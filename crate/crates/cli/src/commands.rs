use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use beltrami_core::coefficients::{
    builtin_catalog, eval_coefficients, resolve_spec, CoefficientSpec, SpecFile, CATALOG,
};
use beltrami_core::conditions::{
    audit_points, audit_theorem1, disk_integral, divergence_integral, w_samples, ConditionReport, DivergenceReport,
    DivergenceVerdict, MajorantRole, MajorantSpec,
};
use beltrami_core::dilatation::{
    jacobian_field, map_dilatation, map_dilatation_field, maximal_dilatation, tangential_dilatation,
};
use beltrami_core::linear::{solve_linear, LinearProblem};
use beltrami_core::quasilinear::{solve_quasilinear, LadderReport, LadderStatus};
use beltrami_core::solution::{IterationTrace, Normalization};
use beltrami_core::verify::{
    continuity_modulus_fit, injectivity_check, inverse_dilatation_audit, jacobian_stats, residual, ResidualNorms,
    VerificationReport,
};
use beltrami_core::{Error, Result, ScalarField, Solution, SolverConfig};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Command, Format, RunConfig, SolveMode};
use crate::exit;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_ppm(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    field.write_ppm(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Prints the report as JSON, or a CSV file's contents, depending on `--format`.
fn emit<T: Serialize>(cfg: &RunConfig, report: &T, csv_path: &Path) -> Result<()> {
    match cfg.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report)?),
        Format::Csv => print!("{}", fs::read_to_string(csv_path)?),
    }
    Ok(())
}

fn spec_of(cfg: &RunConfig) -> Result<CoefficientSpec> {
    let name = cfg.spec.as_deref().ok_or_else(|| Error::ParamOutOfRange("no spec given".into()))?;
    resolve_spec(name, &cfg.params)
}

/// Runs the configured command, returning the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32> {
    match cfg.command.unwrap_or(Command::Catalog) {
        Command::Catalog => cmd_catalog(cfg),
        Command::Analyze => cmd_analyze(cfg).map(|(_, code)| code),
        Command::Solve => cmd_solve(cfg).map(|(_, code)| code),
        Command::Verify => cmd_verify(cfg).map(|(_, code)| code),
        Command::Example => cmd_example(cfg).map(|(_, code)| code),
    }
}

#[derive(Debug, Serialize)]
struct CatalogRow {
    name: &'static str,
    description: &'static str,
}

pub fn cmd_catalog(cfg: &RunConfig) -> Result<i32> {
    let rows: Vec<CatalogRow> = CATALOG.iter().map(|&(name, description)| CatalogRow { name, description }).collect();
    match cfg.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &rows {
                w.serialize(r).map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    Ok(exit::OK)
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub q: String,
    pub q1: String,
    pub conditions: ConditionReport,
}

#[derive(Debug, Serialize)]
struct BoundRow<'a> {
    kind: &'a str,
    samples: usize,
    violations: usize,
    worst_z_re: Option<f64>,
    worst_z_im: Option<f64>,
    worst_w_re: Option<f64>,
    worst_w_im: Option<f64>,
    worst_theta: Option<f64>,
    worst_value: Option<f64>,
    worst_bound: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DivergenceRow {
    z0_re: f64,
    z0_im: f64,
    majorant: &'static str,
    eps: f64,
    integral: f64,
}

/// Sampled supremum of `K` as a constant majorant.
fn sup_dilatation(spec: &CoefficientSpec, cfg: &RunConfig) -> Result<f64> {
    let ws = w_samples(&cfg.audit);
    let mut sup: f64 = 1.0;
    for z in audit_points(spec, &cfg.audit) {
        if spec.is_singular_point(z) {
            continue;
        }
        for &w in &ws {
            let (mu, nu) = eval_coefficients(spec, z, w)?;
            sup = sup.max(maximal_dilatation(mu, nu));
        }
    }
    Ok(sup)
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<(AnalyzeReport, i32)> {
    let spec = spec_of(cfg)?;
    let q_text = match &cfg.majorants.q {
        Some(q) => q.clone(),
        None => format!("{:?}", sup_dilatation(&spec, cfg)?),
    };
    let q1_text = cfg.majorants.q1.clone().unwrap_or_else(|| q_text.clone());
    let q = MajorantSpec::parse(&q_text, MajorantRole::Q)?;
    let q1 = MajorantSpec::parse(&q1_text, MajorantRole::Q1)?;
    let family: Vec<(Complex64, MajorantSpec)> = cfg.probes().into_iter().map(|z0| (z0, q1.clone())).collect();
    let conditions = audit_theorem1(&spec, &q, &family, &cfg.audit)?;
    let report = AnalyzeReport { q: q_text, q1: q1_text, conditions };

    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("analyze.json"), &report)?;
    let checks = std::iter::once(&report.conditions.maximal_bound)
        .chain(report.conditions.probes.iter().map(|p| &p.tangential_bound));
    let bound_rows: Vec<BoundRow> = checks
        .map(|c| BoundRow {
            kind: &c.kind,
            samples: c.samples,
            violations: c.violations,
            worst_z_re: c.worst.map(|w| w.z.re),
            worst_z_im: c.worst.map(|w| w.z.im),
            worst_w_re: c.worst.map(|w| w.w.re),
            worst_w_im: c.worst.map(|w| w.w.im),
            worst_theta: c.worst.map(|w| w.theta),
            worst_value: c.worst.map(|w| w.value),
            worst_bound: c.worst.map(|w| w.bound),
        })
        .collect();
    let bounds_csv = cfg.out.join("analyze_bounds.csv");
    write_csv(&bounds_csv, &bound_rows)?;
    let mut div_rows = Vec::new();
    for p in &report.conditions.probes {
        for (majorant, d) in [("Q1", &p.q1_divergence), ("Q", &p.q_divergence)] {
            for (&eps, &integral) in d.eps.iter().zip(&d.integrals) {
                div_rows.push(DivergenceRow { z0_re: p.z0.re, z0_im: p.z0.im, majorant, eps, integral });
            }
        }
    }
    write_csv(&cfg.out.join("analyze_divergence.csv"), &div_rows)?;
    emit(cfg, &report, &bounds_csv)?;

    let code = match report.conditions.check_bounds() {
        Ok(()) => exit::OK,
        Err(e @ Error::BoundViolation { .. }) => {
            eprintln!("{e}");
            exit::BOUND_VIOLATION
        }
        Err(e) => return Err(e),
    };
    Ok((report, code))
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub label: String,
    pub mode: SolveMode,
    pub status: LadderStatus,
    pub rung: u32,
    pub residual: f64,
    pub residual_tol: f64,
    pub trace: IterationTrace,
    pub contraction_estimate: Option<f64>,
    pub normalization: Normalization,
    pub ladder: Option<LadderReport>,
}

#[derive(Debug, Serialize)]
struct RungRow {
    n: u32,
    outer_steps: usize,
    outer_converged: bool,
    inner_steps: usize,
    k_bound: f64,
    max_effective_coefficient: f64,
    residual_rung: f64,
    residual: f64,
    d_max: Option<f64>,
}

/// Coefficients of a `w`-independent spec as grid fields; declared singular points get 0.
fn linear_problem(spec: &CoefficientSpec, solver: &SolverConfig) -> Result<LinearProblem> {
    if !spec.is_w_independent() {
        return Err(Error::ParamOutOfRange(format!(
            "spec `{}` depends on w; linear mode needs w-independent coefficients",
            spec.label
        )));
    }
    LinearProblem::sample(solver.grid, solver.half_width, |z| {
        if spec.is_singular_point(z) {
            Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)))
        } else {
            spec.eval_raw(z, Complex64::new(0.0, 0.0))
        }
    })
}

/// Solves `spec` under `cfg.mode` without writing anything.
pub fn solve_spec(spec: &CoefficientSpec, cfg: &RunConfig, solver: &SolverConfig) -> Result<(Solution, SolveReport)> {
    let mode = match cfg.mode {
        SolveMode::Auto if spec.is_w_independent() => SolveMode::Linear,
        SolveMode::Auto => SolveMode::Quasilinear,
        m => m,
    };
    let (sol, ladder) = match mode {
        SolveMode::Linear => (solve_linear(&linear_problem(spec, solver)?, solver)?, None),
        _ => {
            let (sol, report) = solve_quasilinear(spec, solver)?;
            (sol, Some(report))
        }
    };
    let status = ladder.as_ref().map_or(LadderStatus::Converged, |l| l.status);
    let report = SolveReport {
        label: spec.label.clone(),
        mode,
        status,
        rung: sol.rung,
        residual: sol.residual,
        residual_tol: solver.residual_tol,
        contraction_estimate: sol.trace.contraction_estimate(1),
        trace: sol.trace.clone(),
        normalization: sol.normalization,
        ladder,
    };
    Ok((sol, report))
}

fn write_solution_files(dir: &Path, sol: &Solution, spec: &CoefficientSpec) -> Result<()> {
    fs::create_dir_all(dir)?;
    sol.save_archive(&dir.join("archive"), Some(&SpecFile::from(spec).to_toml()))?;
    write_ppm(&dir.join("jacobian.ppm"), &jacobian_field(&sol.fz, &sol.fzbar)?)?;
    write_ppm(&dir.join("dilatation.ppm"), &map_dilatation_field(&sol.fz, &sol.fzbar)?)?;
    Ok(())
}

fn flagged(report: &SolveReport) -> bool {
    report.status == LadderStatus::LadderExhausted || !(report.residual <= report.residual_tol)
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(SolveReport, i32)> {
    let spec = spec_of(cfg)?;
    let (sol, report) = solve_spec(&spec, cfg, &cfg.solver)?;
    write_solution_files(&cfg.out, &sol, &spec)?;
    write_json(&cfg.out.join("solve.json"), &report)?;
    let rows: Vec<RungRow> = report
        .ladder
        .iter()
        .flat_map(|l| &l.rungs)
        .map(|r| RungRow {
            n: r.n,
            outer_steps: r.outer_steps,
            outer_converged: r.outer_converged,
            inner_steps: r.inner_steps,
            k_bound: r.k_bound,
            max_effective_coefficient: r.max_effective_coefficient,
            residual_rung: r.residual_rung,
            residual: r.residual,
            d_max: r.distances.iter().copied().reduce(f64::max),
        })
        .collect();
    let ladder_csv = cfg.out.join("ladder.csv");
    write_csv(&ladder_csv, &rows)?;
    emit(cfg, &report, &ladder_csv)?;
    let code = if flagged(&report) { exit::FLAGGED } else { exit::OK };
    Ok((report, code))
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub label: Option<String>,
    pub checks: VerificationReport,
    pub residual_ok: Option<bool>,
    pub jacobian_ok: bool,
    /// Reasons for skipped optional checks.
    pub notes: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
struct ScaleRow {
    distance: f64,
    pairs: usize,
    c: f64,
}

/// `∫ K_{μ_f}` over the support disk, trapezoid on the solution grid.
fn dilatation_l1(sol: &Solution) -> f64 {
    let h = sol.f.spacing();
    (0..sol.f.data().len())
        .filter(|&i| sol.f.point_at(i).norm() <= sol.support_radius)
        .map(|i| map_dilatation(sol.fz.data()[i], sol.fzbar.data()[i]))
        .filter(|k| k.is_finite())
        .sum::<f64>()
        * h
        * h
}

/// All checks on one solution; `spec` enables the residual.
pub fn verify_solution(sol: &Solution, spec: Option<&CoefficientSpec>, cfg: &RunConfig) -> Result<VerifyReport> {
    let mut notes = Vec::new();
    let residual: Option<ResidualNorms> = spec.map(|s| residual(sol, s).1);
    let jacobian = jacobian_stats(sol);
    let injectivity = injectivity_check(sol);

    let majorant = cfg.majorants.q1.as_ref().or(cfg.majorants.q.as_ref());
    let inverse = if injectivity.pass {
        let (q, probes) = match majorant {
            Some(text) => (MajorantSpec::parse(text, MajorantRole::Q1)?, cfg.probes()),
            None => (MajorantSpec::parse("0", MajorantRole::Q1)?, Vec::new()),
        };
        match inverse_dilatation_audit(sol, cfg.verify.p, &q, &probes, cfg.verify.image_grid, None) {
            Ok(r) => Some(r),
            Err(e @ (Error::OutOfImage(_) | Error::NotInvertible(_))) => {
                notes.push(format!("inverse audit skipped: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        notes.push("inverse audit skipped: map is not injective on the grid".into());
        None
    };

    let q_l1 = match &cfg.majorants.q {
        Some(text) => {
            let q = MajorantSpec::parse(text, MajorantRole::Q)?;
            disk_integral(&q, Complex64::new(0.0, 0.0), sol.support_radius, cfg.audit.circle_nodes)?
        }
        None => dilatation_l1(sol),
    };
    let continuity = match continuity_modulus_fit(sol, q_l1, cfg.verify.margin, None) {
        Ok(c) => Some(c),
        Err(e @ (Error::EmptyCompact(_) | Error::ParamOutOfRange(_))) => {
            notes.push(format!("continuity fit skipped: {e}"));
            None
        }
        Err(e) => return Err(e),
    };

    let residual_ok = residual.as_ref().map(|r| r.l2_rel <= cfg.solver.residual_tol);
    let jacobian_ok = jacobian.fraction_nonpositive <= 0.01;
    let pass = residual_ok.unwrap_or(true) && jacobian_ok && injectivity.pass;
    Ok(VerifyReport {
        label: spec.map(|s| s.label.clone()),
        checks: VerificationReport { residual, jacobian, injectivity, inverse, continuity },
        residual_ok,
        jacobian_ok,
        notes,
        pass,
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<(VerifyReport, i32)> {
    let (sol, stored) = Solution::load_archive(&cfg.archive_dir())?;
    let spec = match (&cfg.spec, stored) {
        (Some(_), _) => Some(spec_of(cfg)?),
        (None, Some(text)) => Some(SpecFile::parse(&text)?.into_spec()?),
        (None, None) => None,
    };
    let report = verify_solution(&sol, spec.as_ref(), cfg)?;
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("verify.json"), &report)?;
    if let Some(s) = &spec {
        let field = residual(&sol, s).0;
        write_ppm(&cfg.out.join("residual.ppm"), &ScalarField::from_field(&field, |_, v| v.norm()))?;
    }
    let rows: Vec<ScaleRow> = report
        .checks
        .continuity
        .iter()
        .flat_map(|c| &c.scales)
        .map(|s| ScaleRow { distance: s.distance, pairs: s.pairs, c: s.c })
        .collect();
    let continuity_csv = cfg.out.join("continuity.csv");
    write_csv(&continuity_csv, &rows)?;
    emit(cfg, &report, &continuity_csv)?;
    Ok((report.clone(), if report.pass { exit::OK } else { exit::FLAGGED }))
}

// ---------------------------------------------------------------- example

#[derive(Debug, Clone, Serialize)]
pub struct DiskIntegral {
    pub value: f64,
    pub exact: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentialSample {
    pub variant: String,
    pub r: f64,
    pub arg_z: f64,
    pub w_modulus: f64,
    pub theta: f64,
    pub mu: Complex64,
    pub k_tangential: f64,
    pub k_maximal: f64,
    /// `K^T > 1` at this sample.
    pub exceeds_one: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    /// `∫_𝔻 (1/r) dm`.
    pub disk_integral: DiskIntegral,
    /// `I(ε)` for `Q = 1/r` about the origin.
    pub q_divergence: DivergenceReport,
    /// The same integral for `Q¹ ≡ 1`.
    pub q1_divergence: DivergenceReport,
    pub tangential_samples: Vec<TangentialSample>,
    pub solve: SolveReport,
    pub verify: VerifyReport,
}

fn tangential_samples() -> Result<Vec<TangentialSample>> {
    let mut out = Vec::new();
    for variant in ["paper-example-sec4", "paper-example-sec4-phase2"] {
        let spec = builtin_catalog(variant, &[])?;
        for r in [0.1, 0.3, 0.6] {
            for arg_z in [0.0, 0.5 * PI, PI] {
                for w_modulus in [0.0, 0.2, 0.8] {
                    let z = Complex64::from_polar(r, arg_z);
                    let w = Complex64::new(w_modulus, 0.0);
                    let (mu, nu) = eval_coefficients(&spec, z, w)?;
                    let theta = 0.0;
                    let k_tangential = tangential_dilatation(mu, nu, z, Complex64::new(0.0, 0.0), theta)?;
                    out.push(TangentialSample {
                        variant: variant.to_string(),
                        r,
                        arg_z,
                        w_modulus,
                        theta,
                        mu,
                        k_tangential,
                        k_maximal: maximal_dilatation(mu, nu),
                        exceeds_one: k_tangential > 1.0,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// The worked example: majorant integrals, tangential samples, then a solve and its checks.
pub fn example_report(cfg: &RunConfig) -> Result<(ExampleReport, Solution, CoefficientSpec)> {
    let origin = Complex64::new(0.0, 0.0);
    let inv_r = MajorantSpec::parse("1/r", MajorantRole::Q)?;
    let one = MajorantSpec::parse("1", MajorantRole::Q1)?;
    let value = disk_integral(&inv_r, origin, 1.0, cfg.audit.circle_nodes)?;
    let exact = 2.0 * PI;
    let disk_integral = DiskIntegral { value, exact, relative_error: (value - exact).abs() / exact };
    let q_divergence =
        divergence_integral(&inv_r, origin, cfg.audit.delta, &cfg.audit.divergence_ladder, cfg.audit.circle_nodes)?;
    let q1_divergence =
        divergence_integral(&one, origin, cfg.audit.delta, &cfg.audit.divergence_ladder, cfg.audit.circle_nodes)?;
    let tangential_samples = tangential_samples()?;

    let spec = builtin_catalog("paper-example-sec4", &[])?;
    let solver = SolverConfig { grid: cfg.example.grid, ..cfg.solver.clone() };
    let (sol, solve) = solve_spec(&spec, cfg, &solver)?;
    let verify = verify_solution(&sol, Some(&spec), cfg)?;
    let report = ExampleReport { disk_integral, q_divergence, q1_divergence, tangential_samples, solve, verify };
    Ok((report, sol, spec))
}

fn verdict_name(v: DivergenceVerdict) -> &'static str {
    match v {
        DivergenceVerdict::Convergent => "CONVERGENT",
        DivergenceVerdict::Divergent => "DIVERGENT",
        DivergenceVerdict::Inconclusive => "INCONCLUSIVE",
    }
}

pub fn cmd_example(cfg: &RunConfig) -> Result<(ExampleReport, i32)> {
    let (report, sol, spec) = example_report(cfg)?;
    write_solution_files(&cfg.out, &sol, &spec)?;
    write_json(&cfg.out.join("example.json"), &report)?;
    let samples_csv = cfg.out.join("tangential_samples.csv");
    let rows: Vec<_> = report
        .tangential_samples
        .iter()
        .map(|s| (s.variant.as_str(), s.r, s.arg_z, s.w_modulus, s.theta, s.k_tangential, s.k_maximal, s.exceeds_one))
        .collect();
    {
        let mut w = csv::Writer::from_path(&samples_csv).map_err(csv_error)?;
        w.write_record(["variant", "r", "arg_z", "w_modulus", "theta", "k_tangential", "k_maximal", "exceeds_one"])
            .map_err(csv_error)?;
        for row in &rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    match cfg.format {
        Format::Csv => print!("{}", fs::read_to_string(&samples_csv)?),
        Format::Json => {
            let d = &report.disk_integral;
            println!(
                "disk integral of 1/r: {:.6} (2 pi = {:.6}, relative error {:.2e})",
                d.value, d.exact, d.relative_error
            );
            let q = &report.q_divergence;
            println!(
                "I(eps) for Q = 1/r: {} at eps = {:e}, limit {:?}, {}",
                q.integrals.last().copied().unwrap_or(f64::NAN),
                q.eps.last().copied().unwrap_or(f64::NAN),
                q.limit,
                verdict_name(q.verdict)
            );
            println!("I(eps) for Q1 = 1: {}", verdict_name(report.q1_divergence.verdict));
            for s in &report.tangential_samples {
                println!(
                    "K^T {:<26} r = {:.1} arg = {:.4} |w| = {:.1}: {:.9} (K = {:.6}){}",
                    s.variant,
                    s.r,
                    s.arg_z,
                    s.w_modulus,
                    s.k_tangential,
                    s.k_maximal,
                    if s.exceeds_one { "  exceeds 1" } else { "" }
                );
            }
            let v = &report.verify;
            println!(
                "solve: {:?} at rung {}, residual {:.3e}, jacobian > 0 on {:.4} of samples, injective {}",
                report.solve.status,
                report.solve.rung,
                report.solve.residual,
                1.0 - v.checks.jacobian.fraction_nonpositive,
                v.checks.injectivity.pass
            );
        }
    }
    let code = if flagged(&report.solve) { exit::FLAGGED } else { exit::OK };
    Ok((report, code))
}
