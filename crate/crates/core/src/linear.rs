//! Fixed-point solver for `f_z̄ = μ f_z + ν conj(f_z)` with compactly supported coefficients.
//!
//! The unknown is `ω = f_z̄` with `f = z + Tω`, so `f_z = 1 + Sω` and the
//! equation becomes `ω = μ(1 + Sω) + ν conj(1 + Sω)`.

use num_complex::Complex64;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::solution::{IterationTrace, Normalization, Solution};
use crate::transforms::{beurling_transform, cauchy_transform};

#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub mu: GridField,
    pub nu: GridField,
    /// `max (|μ| + |ν|)` over the grid.
    pub k_bound: f64,
    pub support_radius: f64,
}

impl LinearProblem {
    pub fn new(mu: GridField, nu: GridField) -> Result<Self> {
        mu.assert_same_geometry(&nu)?;
        let k_bound = mu.data().iter().zip(nu.data()).map(|(a, b)| a.norm() + b.norm()).fold(0.0, f64::max);
        if k_bound >= 1.0 {
            return Err(Error::NotContractive(k_bound));
        }
        let support_radius = mu.support_radius().max(nu.support_radius());
        if 2.0 * support_radius > mu.half_width() * (1.0 + 1e-12) {
            return Err(Error::SupportTooLarge { radius: support_radius, half_width: mu.half_width() });
        }
        Ok(Self { mu, nu, k_bound, support_radius })
    }

    /// Samples `(μ(z), ν(z))` from `coeffs` on an `n × n` grid over `[-L, L]²`.
    pub fn sample<F>(n: usize, half_width: f64, coeffs: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Result<(Complex64, Complex64)> + Sync,
    {
        let mu = GridField::try_from_fn(n, half_width, |z| coeffs(z).map(|p| p.0))?;
        let nu = GridField::try_from_fn(n, half_width, |z| coeffs(z).map(|p| p.1))?;
        Self::new(mu, nu)
    }

    fn apply(&self, fz: &GridField) -> GridField {
        let mu = self.mu.data();
        let nu = self.nu.data();
        let data = fz.data().iter().enumerate().map(|(i, &d)| mu[i] * d + nu[i] * d.conj()).collect();
        GridField::from_data(fz.n(), fz.half_width(), data).expect("finite coefficients and derivatives")
    }

    /// Relative L² residual of `fzbar = μ fz + ν conj(fz)` over the support disk.
    pub fn residual(&self, fz: &GridField, fzbar: &GridField) -> Result<f64> {
        let r = self.support_radius;
        let diff = fzbar.sub(&self.apply(fz))?;
        let inside = |z: Complex64| z.norm() <= r;
        let den = fz.l2_norm_where(inside);
        let num = diff.l2_norm_where(inside);
        Ok(if num == 0.0 { 0.0 } else { num / den })
    }
}

/// One Picard step `ω ↦ μ(1 + Sω) + ν conj(1 + Sω)`.
pub fn picard_step(omega: &GridField, prob: &LinearProblem) -> Result<GridField> {
    let s = beurling_transform(omega)?;
    Ok(prob.apply(&s.map(|v| v + 1.0)))
}

fn relative(update: f64, size: f64) -> f64 {
    if update == 0.0 {
        0.0
    } else {
        update / size
    }
}

pub fn solve_linear(prob: &LinearProblem, cfg: &SolverConfig) -> Result<Solution> {
    let zero = GridField::zeros(prob.mu.n(), prob.mu.half_width())?;
    solve_linear_from(prob, cfg, zero)
}

/// Same as [`solve_linear`] but iterating from `omega` instead of 0.
pub fn solve_linear_from(prob: &LinearProblem, cfg: &SolverConfig, mut omega: GridField) -> Result<Solution> {
    if prob.k_bound >= 1.0 {
        return Err(Error::NotContractive(prob.k_bound));
    }
    prob.mu.assert_same_geometry(&omega)?;
    let mut trace = IterationTrace::default();
    let mut last = f64::INFINITY;
    while trace.steps < cfg.max_inner {
        let next = picard_step(&omega, prob)?;
        let update = next.sub(&omega)?.l2_norm();
        trace.record(update);
        last = relative(update, next.l2_norm());
        omega = next;
        if last < cfg.inner_tol {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        return Err(Error::MaxIterations { steps: trace.steps, last_update: last });
    }
    assemble(prob, omega, trace)
}

fn assemble(prob: &LinearProblem, omega: GridField, trace: IterationTrace) -> Result<Solution> {
    let t = cauchy_transform(&omega)?;
    let s = beurling_transform(&omega)?;
    let f = t.map_with_point(|z, v| z + v);
    let fz = s.map(|v| v + 1.0);
    let residual = prob.residual(&fz, &omega)?;
    let raw = Solution {
        f,
        fz,
        fzbar: omega,
        rung: 0,
        trace,
        normalization: Normalization::identity(),
        residual,
        support_radius: prob.support_radius,
    };
    raw.normalize()
}

/// Checks the residual contract of a finished solve.
pub fn check_residual(sol: &Solution, tol: f64) -> Result<()> {
    if sol.residual <= tol {
        Ok(())
    } else {
        Err(Error::ResidualAboveTolerance { residual: sol.residual, tol })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(k: f64, on_nu: bool, n: usize) -> LinearProblem {
        LinearProblem::sample(n, 4.0, |z| {
            let v = if z.norm() <= 1.0 { Complex64::new(k, 0.0) } else { Complex64::new(0.0, 0.0) };
            Ok(if on_nu { (Complex64::new(0.0, 0.0), v) } else { (v, Complex64::new(0.0, 0.0)) })
        })
        .unwrap()
    }

    #[test]
    fn zero_coefficients_give_identity() {
        let prob = disk(0.0, false, 32);
        let sol = solve_linear(&prob, &SolverConfig::default()).unwrap();
        assert_eq!(sol.trace.steps, 1);
        assert_eq!(sol.residual, 0.0);
        let id = GridField::from_fn(32, 4.0, |z| z).unwrap();
        assert!(sol.f.sub(&id).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn first_iterate_is_mu() {
        let prob = disk(0.5, false, 32);
        let zero = GridField::zeros(32, 4.0).unwrap();
        let step = picard_step(&zero, &prob).unwrap();
        assert!(step.sub(&prob.mu).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn rejects_non_contractive() {
        let err =
            LinearProblem::sample(32, 4.0, |_| Ok((Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.4)))).unwrap_err();
        assert!(matches!(err, Error::NotContractive(_)));
    }

    #[test]
    fn rejects_large_support() {
        let err = LinearProblem::sample(32, 2.0, |z| {
            Ok((
                if z.norm() <= 1.5 { Complex64::new(0.3, 0.0) } else { Complex64::new(0.0, 0.0) },
                Complex64::new(0.0, 0.0),
            ))
        })
        .unwrap_err();
        assert!(matches!(err, Error::SupportTooLarge { .. }));
    }

    #[test]
    fn max_iterations_reported() {
        let prob = disk(0.5, false, 32);
        let cfg = SolverConfig { max_inner: 2, inner_tol: 1e-300, ..SolverConfig::default() };
        assert!(matches!(solve_linear(&prob, &cfg), Err(Error::MaxIterations { steps: 2, .. })));
    }

    #[test]
    fn normalized_solution_pins_points_and_is_conformal_outside() {
        let sol = solve_linear(&disk(0.5, false, 64), &SolverConfig::default()).unwrap();
        assert!(sol.f.interpolate(Complex64::new(0.0, 0.0)).norm() < 1e-12);
        assert!((sol.f.interpolate(Complex64::new(1.0, 0.0)).norm() - 1.0).abs() < 1e-12);
        let max_fz = sol.fz.sup_norm();
        for (idx, v) in sol.fzbar.data().iter().enumerate() {
            if sol.f.point_at(idx).norm() > 1.0 {
                assert!(v.norm() <= 1e-6 * max_fz);
            }
        }
        assert!(sol.residual <= 1e-3);
        check_residual(&sol, 1e-3).unwrap();
    }
}
