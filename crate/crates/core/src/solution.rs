//! Solution records, normalization and on-disk archives.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::transforms::{derivatives_with, DerivativeMode};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Absolute L² norm of each update `ω_{k+1} − ω_k`.
    pub updates: Vec<f64>,
    /// `updates[k] / updates[k − 1]`, from the second step on.
    pub ratios: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
}

impl IterationTrace {
    pub(crate) fn record(&mut self, update: f64) {
        if let Some(&prev) = self.updates.last() {
            let ratio = if prev > 0.0 { update / prev } else { 0.0 };
            self.ratios.push(ratio);
        }
        self.updates.push(update);
        self.steps += 1;
    }

    /// Median of the recorded ratios after the first `skip`, ignoring steps whose
    /// update has already hit round-off.
    pub fn contraction_estimate(&self, skip: usize) -> Option<f64> {
        let floor = self.updates.first().copied().unwrap_or(0.0) * 1e-12;
        let mut r: Vec<f64> = self
            .ratios
            .iter()
            .enumerate()
            .skip(skip)
            .filter(|(i, _)| self.updates[*i + 1] > floor)
            .map(|(_, &v)| v)
            .collect();
        if r.is_empty() {
            return None;
        }
        r.sort_by(|a, b| a.total_cmp(b));
        Some(r[r.len() / 2])
    }
}

/// `f_normalized = scale · (f_raw − translation)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub translation: Complex64,
    pub scale: f64,
    /// `arg f(1)` after normalization; the rotation that would make `f(1) = 1`.
    pub arg_f1: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Self { translation: Complex64::new(0.0, 0.0), scale: 1.0, arg_f1: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub f: GridField,
    pub fz: GridField,
    pub fzbar: GridField,
    pub rung: u32,
    pub trace: IterationTrace,
    pub normalization: Normalization,
    /// Relative L² residual of the equation over the coefficient support.
    pub residual: f64,
    pub support_radius: f64,
}

/// Normalization parameters for `f` sampled on its grid: `t = f(0)`, `s = 1/|f(1) − t|`.
pub fn normalization_of(f: &GridField) -> Result<Normalization> {
    let t = f.interpolate(Complex64::new(0.0, 0.0));
    let d = f.interpolate(Complex64::new(1.0, 0.0)) - t;
    if d.norm() < 1e-12 {
        return Err(Error::DegenerateNormalization(d.norm()));
    }
    Ok(Normalization { translation: t, scale: 1.0 / d.norm(), arg_f1: d.arg() })
}

impl Solution {
    /// Wraps an arbitrary map; derivatives are computed numerically and no
    /// normalization is applied.
    pub fn from_map(f: GridField, mode: DerivativeMode, support_radius: f64) -> Solution {
        let d = derivatives_with(&f, mode);
        Solution {
            f,
            fz: d.fz,
            fzbar: d.fzbar,
            rung: 0,
            trace: IterationTrace::default(),
            normalization: Normalization::identity(),
            residual: f64::NAN,
            support_radius,
        }
    }

    /// Applies `f ← s(f − f(0))`, `s = 1/|f(1) − f(0)|`, composing with any earlier normalization.
    pub fn normalize(mut self) -> Result<Solution> {
        let nrm = normalization_of(&self.f)?;
        let s = Complex64::new(nrm.scale, 0.0);
        self.f = self.f.map(|v| (v - nrm.translation) * s);
        self.fz = self.fz.scale(s);
        self.fzbar = self.fzbar.scale(s);
        let prev = self.normalization;
        self.normalization = Normalization {
            translation: prev.translation + nrm.translation / prev.scale,
            scale: prev.scale * nrm.scale,
            arg_f1: nrm.arg_f1,
        };
        Ok(self)
    }

    /// The map before normalization, `f/s + t`.
    pub fn principal(&self) -> GridField {
        let Normalization { translation, scale, .. } = self.normalization;
        self.f.map(|v| v / scale + translation)
    }

    pub fn jacobian_positive_fraction<M>(&self, mask: M) -> f64
    where
        M: Fn(Complex64) -> bool,
    {
        let mut total = 0usize;
        let mut positive = 0usize;
        for (idx, (a, b)) in self.fz.data().iter().zip(self.fzbar.data()).enumerate() {
            if mask(self.f.point_at(idx)) {
                total += 1;
                if a.norm_sqr() - b.norm_sqr() > 0.0 {
                    positive += 1;
                }
            }
        }
        if total == 0 {
            1.0
        } else {
            positive as f64 / total as f64
        }
    }

    /// Writes `f.bin`, `fz.bin`, `fzbar.bin` and `meta.json` into `dir`.
    pub fn save_archive(&self, dir: &Path, spec_toml: Option<&str>) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.f.save(&dir.join("f.bin"))?;
        self.fz.save(&dir.join("fz.bin"))?;
        self.fzbar.save(&dir.join("fzbar.bin"))?;
        let meta = ArchiveMeta {
            rung: self.rung,
            trace: self.trace.clone(),
            normalization: self.normalization,
            residual: if self.residual.is_finite() { Some(self.residual) } else { None },
            support_radius: self.support_radius,
            spec: spec_toml.map(str::to_string),
        };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads an archive, returning the solution and the stored spec text if any.
    pub fn load_archive(dir: &Path) -> Result<(Solution, Option<String>)> {
        let meta: ArchiveMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let f = GridField::load(&dir.join("f.bin"))?;
        let fz = GridField::load(&dir.join("fz.bin"))?;
        let fzbar = GridField::load(&dir.join("fzbar.bin"))?;
        f.assert_same_geometry(&fz)?;
        f.assert_same_geometry(&fzbar)?;
        let sol = Solution {
            f,
            fz,
            fzbar,
            rung: meta.rung,
            trace: meta.trace,
            normalization: meta.normalization,
            residual: meta.residual.unwrap_or(f64::NAN),
            support_radius: meta.support_radius,
        };
        Ok((sol, meta.spec))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchiveMeta {
    rung: u32,
    trace: IterationTrace,
    normalization: Normalization,
    residual: Option<f64>,
    support_radius: f64,
    spec: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(n: usize) -> GridField {
        GridField::from_fn(n, 2.0, |z| 3.0 * z + 0.5 * z.conj() + Complex64::new(1.0, -2.0)).unwrap()
    }

    #[test]
    fn normalization_pins_zero_and_one() {
        let sol = Solution::from_map(affine(32), DerivativeMode::Spectral, 1.0).normalize().unwrap();
        assert!(sol.f.interpolate(Complex64::new(0.0, 0.0)).norm() < 1e-12);
        assert!((sol.f.interpolate(Complex64::new(1.0, 0.0)).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_idempotent() {
        let once = Solution::from_map(affine(32), DerivativeMode::Spectral, 1.0).normalize().unwrap();
        let twice = once.clone().normalize().unwrap();
        let diff = once.f.sub(&twice.f).unwrap().sup_norm();
        assert!(diff < 1e-14, "{diff}");
        assert!((once.normalization.scale - twice.normalization.scale).abs() < 1e-14);
    }

    #[test]
    fn principal_undoes_normalization() {
        let raw = affine(32);
        let sol = Solution::from_map(raw.clone(), DerivativeMode::Spectral, 1.0).normalize().unwrap();
        assert!(sol.principal().sub(&raw).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn degenerate_normalization() {
        let c = GridField::from_fn(16, 2.0, |_| Complex64::new(1.0, 1.0)).unwrap();
        let err = Solution::from_map(c, DerivativeMode::Spectral, 1.0).normalize().unwrap_err();
        assert!(matches!(err, Error::DegenerateNormalization(_)));
    }

    #[test]
    fn trace_ratios_start_at_step_two() {
        let mut t = IterationTrace::default();
        t.record(1.0);
        assert!(t.ratios.is_empty());
        t.record(0.5);
        t.record(0.25);
        assert_eq!(t.ratios, vec![0.5, 0.5]);
        assert_eq!(t.contraction_estimate(0), Some(0.5));
    }

    #[test]
    fn archive_round_trip() {
        let dir = std::env::temp_dir().join(format!("beltrami-archive-{}", std::process::id()));
        let sol = Solution::from_map(affine(16), DerivativeMode::Spectral, 1.0).normalize().unwrap();
        sol.save_archive(&dir, Some("mu = \"0\"")).unwrap();
        let (back, spec) = Solution::load_archive(&dir).unwrap();
        assert_eq!(back.f, sol.f);
        assert_eq!(back.normalization, sol.normalization);
        assert_eq!(spec.as_deref(), Some("mu = \"0\""));
        fs::remove_dir_all(&dir).unwrap();
    }
}
