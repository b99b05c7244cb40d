//! Truncation ladder with an outer freeze-`w` iteration for
//! `f_z̄ = μ(z, f) f_z + ν(z, f) conj(f_z)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{eval_coefficients, truncate_spec, CoefficientSpec, TruncationMode, TruncationPredicate};
use crate::config::SolverConfig;
use crate::dilatation::{conjugation_ratio, effective_single_coefficient};
use crate::error::{Error, Result};
use crate::expr;
use crate::grid::GridField;
use crate::linear::{solve_linear, solve_linear_from, LinearProblem};
use crate::solution::Solution;
use crate::verify;

/// Consecutive outer updates without a new minimum before the damping is halved.
const HALVE_AFTER: usize = 3;
/// Consecutive increasing outer updates treated as divergence.
const DIVERGE_AFTER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderStatus {
    Converged,
    LadderExhausted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RungSummary {
    pub n: u32,
    pub outer_steps: usize,
    pub outer_converged: bool,
    /// Sup-norm outer updates on the largest compact.
    pub outer_updates: Vec<f64>,
    pub final_damping: f64,
    pub inner_steps: usize,
    pub k_bound: f64,
    /// Largest `|μ + (conj f_z / f_z) ν|` seen at any outer step.
    pub max_effective_coefficient: f64,
    /// Residual against the truncated coefficients of this rung.
    pub residual_rung: f64,
    /// Residual against the untruncated coefficients.
    pub residual: f64,
    /// `d_j(n)` for each compact margin; empty on the first rung.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderReport {
    pub rungs: Vec<RungSummary>,
    pub margins: Vec<f64>,
    pub final_rung: u32,
    pub status: LadderStatus,
}

impl LadderReport {
    /// `d_j` for margin index `j` along the ladder, from the second rung on.
    pub fn distances_for(&self, j: usize) -> Vec<f64> {
        self.rungs.iter().filter_map(|r| r.distances.get(j).copied()).collect()
    }
}

/// Nodes at least `margin` from the box boundary and, when given, from the circle `|z| = support_radius`.
pub fn in_compact(z: Complex64, half_width: f64, margin: f64, support_radius: Option<f64>) -> bool {
    let box_dist = half_width - z.re.abs().max(z.im.abs());
    box_dist >= margin && support_radius.map_or(true, |r| (z.norm() - r).abs() >= margin)
}

fn compact_sup(f: &GridField, g: &GridField, margin: f64, support_radius: Option<f64>) -> Result<f64> {
    f.assert_same_geometry(g)?;
    if margin >= f.half_width() {
        return Err(Error::EmptyCompact(margin));
    }
    let mut best: Option<f64> = None;
    for (idx, (a, b)) in f.data().iter().zip(g.data()).enumerate() {
        if in_compact(f.point_at(idx), f.half_width(), margin, support_radius) {
            best = Some(best.unwrap_or(0.0).max((a - b).norm()));
        }
    }
    best.ok_or(Error::EmptyCompact(margin))
}

/// `max |f − g|` over nodes at distance at least `margin` from the box boundary.
pub fn compact_sup_distance(f: &GridField, g: &GridField, margin: f64) -> Result<f64> {
    compact_sup(f, g, margin, None)
}

/// As [`compact_sup_distance`], additionally excluding a `margin` band around the support circle.
pub fn compact_sup_distance_off_support(f: &GridField, g: &GridField, margin: f64, support_radius: f64) -> Result<f64> {
    compact_sup(f, g, margin, Some(support_radius))
}

/// Truncation mode for the ladder: by `Q` when a majorant is configured, else by `K`.
pub fn ladder_mode(cfg: &SolverConfig) -> Result<TruncationMode> {
    match &cfg.truncation_majorant {
        Some(q) => Ok(TruncationMode::ByQ(expr::parse(q)?)),
        None => Ok(TruncationMode::ByK),
    }
}

/// Samples the rung-`n` truncated coefficients at `(z, f(z))`.
pub fn frozen_coefficient_fields(
    spec: &CoefficientSpec,
    f: &GridField,
    rung: u32,
    mode: &TruncationMode,
) -> Result<(GridField, GridField)> {
    let truncated = truncate_spec(spec, TruncationPredicate { mode: mode.clone(), threshold: rung })?;
    let pairs: Vec<(Complex64, Complex64)> = {
        use rayon::prelude::*;
        (0..f.data().len())
            .into_par_iter()
            .map(|idx| eval_coefficients(&truncated, f.point_at(idx), f.data()[idx]))
            .collect::<Result<_>>()?
    };
    let mu = GridField::from_data(f.n(), f.half_width(), pairs.iter().map(|p| p.0).collect())?;
    let nu = GridField::from_data(f.n(), f.half_width(), pairs.iter().map(|p| p.1).collect())?;
    Ok((mu, nu))
}

fn identity(cfg: &SolverConfig) -> Result<GridField> {
    GridField::from_fn(cfg.grid, cfg.half_width, |z| z)
}

fn max_effective(mu: &GridField, nu: &GridField, fz: &GridField) -> f64 {
    mu.data()
        .iter()
        .zip(nu.data())
        .zip(fz.data())
        .map(|((&m, &v), &d)| effective_single_coefficient(m, v, conjugation_ratio(d)).norm())
        .fold(0.0, f64::max)
}

fn blend(a: &GridField, b: &GridField, lambda: f64) -> Result<GridField> {
    a.zip_map(b, |x, y| x * (1.0 - lambda) + y * lambda)
}

/// Outer freeze-`w` iteration at one rung, starting from the map `start`.
fn solve_rung(
    spec: &CoefficientSpec,
    cfg: &SolverConfig,
    mode: &TruncationMode,
    rung: u32,
    start: &GridField,
) -> Result<(Solution, RungSummary)> {
    let margin = *cfg.compact_margins.last().expect("validated margins");
    let mut f = start.clone();
    let mut current: Option<Solution> = None;
    let mut fields: Option<(GridField, GridField)> = None;
    let mut lambda = cfg.damping;
    let mut updates: Vec<f64> = Vec::new();
    let mut increases = 0;
    let mut stalled = 0;
    let mut best = f64::INFINITY;
    let mut converged = false;
    let mut inner_steps = 0;
    let mut k_bound: f64 = 0.0;
    let mut max_eff: f64 = 0.0;

    for step in 0..cfg.max_outer {
        let (mu, nu) = frozen_coefficient_fields(spec, &f, rung, mode)?;
        if let (Some((pm, pn)), Some(_)) = (&fields, &current) {
            if *pm == mu && *pn == nu {
                updates.push(0.0);
                converged = true;
                break;
            }
        }
        let prob = LinearProblem::new(mu, nu)?;
        k_bound = k_bound.max(prob.k_bound);
        let solved = match (&current, step) {
            (Some(prev), s) if s > 0 => {
                let omega = prev.fzbar.scale(Complex64::new(1.0 / prev.normalization.scale, 0.0));
                solve_linear_from(&prob, cfg, omega)?
            }
            _ => solve_linear(&prob, cfg)?,
        };
        inner_steps += solved.trace.steps;
        max_eff = max_eff.max(max_effective(&prob.mu, &prob.nu, &solved.fz));
        let next = if lambda == 1.0 || current.is_none() {
            solved
        } else {
            let prev = current.as_ref().expect("checked above");
            let mut mixed = solved.clone();
            mixed.f = blend(&prev.f, &solved.f, lambda)?;
            mixed.fz = blend(&prev.fz, &solved.fz, lambda)?;
            mixed.fzbar = blend(&prev.fzbar, &solved.fzbar, lambda)?;
            mixed.normalize()?
        };
        let update = compact_sup_distance(&next.f, &f, margin)?;
        if let Some(&last) = updates.last() {
            increases = if update > last { increases + 1 } else { 0 };
            stalled = if update >= best { stalled + 1 } else { 0 };
        }
        best = best.min(update);
        updates.push(update);
        f = next.f.clone();
        fields = Some((prob.mu, prob.nu));
        current = Some(next);
        if update < cfg.outer_tol {
            converged = true;
            break;
        }
        if increases >= DIVERGE_AFTER {
            return Err(Error::OuterDivergence { rung, steps: updates.len() });
        }
        if stalled >= HALVE_AFTER {
            lambda *= 0.5;
            stalled = 0;
        }
    }

    let mut sol = current.expect("at least one outer step");
    sol.rung = rung;
    let truncated = truncate_spec(spec, TruncationPredicate { mode: mode.clone(), threshold: rung })?;
    let residual_rung = verify::residual(&sol, &truncated).1.l2_rel;
    let residual = verify::residual(&sol, spec).1.l2_rel;
    sol.residual = residual;
    let summary = RungSummary {
        n: rung,
        outer_steps: updates.len(),
        outer_converged: converged,
        outer_updates: updates,
        final_damping: lambda,
        inner_steps,
        k_bound,
        max_effective_coefficient: max_eff,
        residual_rung,
        residual,
        distances: Vec::new(),
    };
    Ok((sol, summary))
}

/// Runs the ladder, warm-starting each rung from the previous rung's map.
pub fn solve_quasilinear(spec: &CoefficientSpec, cfg: &SolverConfig) -> Result<(Solution, LadderReport)> {
    cfg.validate()?;
    let mode = ladder_mode(cfg)?;
    let mut start = identity(cfg)?;
    let mut rungs: Vec<RungSummary> = Vec::new();
    let mut last: Option<Solution> = None;
    let mut status = LadderStatus::LadderExhausted;
    for &n in &cfg.ladder {
        let (sol, mut summary) = solve_rung(spec, cfg, &mode, n, &start)?;
        if let Some(prev) = &last {
            summary.distances = cfg
                .compact_margins
                .iter()
                .map(|&m| compact_sup_distance_off_support(&sol.f, &prev.f, m, spec.support_radius))
                .collect::<Result<_>>()?;
        }
        let settled = !summary.distances.is_empty() && summary.distances.iter().all(|&d| d < cfg.ladder_tol);
        start = sol.f.clone();
        last = Some(sol);
        rungs.push(summary);
        if settled {
            status = LadderStatus::Converged;
            break;
        }
    }
    let sol = last.expect("validated ladder is nonempty");
    let report = LadderReport { final_rung: sol.rung, rungs, margins: cfg.compact_margins.clone(), status };
    Ok((sol, report))
}
