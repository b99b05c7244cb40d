//! Discrete Cauchy and Beurling transforms and complex derivatives.
//!
//! With frequency `ζ = ξ₁ + iξ₂` the operators are Fourier multipliers:
//! `∂̄ ↔ iζ/2`, `∂ ↔ i·conj(ζ)/2`, `T ↔ −2i/ζ`, `S ↔ conj(ζ)/ζ`, all zero at
//! `ζ = 0`. A periodic multiplier cannot represent the `M/z` tail that the
//! whole-plane transform of a field with mass `M = ∫ω` carries, so the mass is
//! first moved onto a fixed radial bump whose transforms are known in closed
//! form; only the zero-mass remainder goes through the FFT.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::GridField;

const BUMP_POWER: i32 = 8;

struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// ζ at each node of the frequency grid, same row-major layout as the data.
    zeta: Vec<Complex64>,
}

impl Spectral {
    fn get(n: usize, half_width: f64) -> Arc<Spectral> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<Spectral>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard.entry((n, half_width.to_bits())).or_insert_with(|| Arc::new(Spectral::new(n, half_width))).clone()
    }

    fn new(n: usize, half_width: f64) -> Spectral {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let freq = |m: usize| {
            let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
            PI * signed / half_width
        };
        let zeta = (0..n * n).map(|idx| Complex64::new(freq(idx % n), freq(idx / n))).collect();
        Spectral { n, forward, inverse, zeta }
    }

    fn transform_rows(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let scratch_len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(self.n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            for k in (j + 1)..n {
                data.swap(j * n + k, k * n + j);
            }
        }
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        self.transform_rows(data, inverse);
        self.transpose(data);
        self.transform_rows(data, inverse);
        self.transpose(data);
        if inverse {
            let scale = 1.0 / (self.n * self.n) as f64;
            data.par_iter_mut().for_each(|v| *v *= scale);
        }
    }

    /// Applies `multiplier(ζ)` to a periodic field.
    fn apply<M>(&self, data: &[Complex64], multiplier: M) -> Vec<Complex64>
    where
        M: Fn(Complex64) -> Complex64 + Sync,
    {
        let mut buf = data.to_vec();
        self.fft2(&mut buf, false);
        buf.par_iter_mut()
            .zip(self.zeta.par_iter())
            .for_each(|(v, &z)| *v *= if z.norm_sqr() == 0.0 { Complex64::new(0.0, 0.0) } else { multiplier(z) });
        self.fft2(&mut buf, true);
        buf
    }
}

fn cauchy_multiplier(z: Complex64) -> Complex64 {
    Complex64::new(0.0, -2.0) / z
}

fn beurling_multiplier(z: Complex64) -> Complex64 {
    z.conj() / z
}

/// Unit-mass radial bump `c (1 − r²/ρ²)^p` on `r < ρ`, with closed-form transforms.
#[derive(Debug, Clone, Copy)]
struct MassBump {
    radius: f64,
}

impl MassBump {
    fn value(&self, z: Complex64) -> f64 {
        let u = z.norm_sqr() / (self.radius * self.radius);
        if u >= 1.0 {
            0.0
        } else {
            (BUMP_POWER + 1) as f64 / (PI * self.radius * self.radius) * (1.0 - u).powi(BUMP_POWER)
        }
    }

    /// `(1/π r²) ∫_{|ζ|<r} bump`, evaluated without cancellation near 0.
    fn enclosed_over_r2(&self, z: Complex64) -> f64 {
        let r2 = z.norm_sqr();
        let rho2 = self.radius * self.radius;
        let u = r2 / rho2;
        if u >= 1.0 {
            1.0 / (PI * r2)
        } else {
            let s: f64 = (0..=BUMP_POWER).map(|i| (1.0 - u).powi(i)).sum();
            s / (PI * rho2)
        }
    }

    fn cauchy(&self, z: Complex64) -> Complex64 {
        z.conj() * self.enclosed_over_r2(z)
    }

    fn beurling(&self, z: Complex64) -> Complex64 {
        let r2 = z.norm_sqr();
        if r2 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let phase = z.conj() / z;
        phase * (self.value(z) - self.enclosed_over_r2(z))
    }
}

fn check_support(omega: &GridField) -> Result<()> {
    let radius = omega.support_radius();
    // support diameter at most half the box side
    if 2.0 * radius > omega.half_width() * (1.0 + 1e-12) {
        return Err(Error::SupportTooLarge { radius, half_width: omega.half_width() });
    }
    Ok(())
}

/// Splits `ω = ω₀ + M·bump` with `ω₀` of exactly zero discrete mass.
fn split_mass(omega: &GridField) -> (Vec<Complex64>, Complex64, MassBump) {
    let bump = MassBump { radius: omega.half_width() / 2.0 };
    let h = omega.spacing();
    let samples: Vec<f64> = (0..omega.data().len()).map(|idx| bump.value(omega.point_at(idx))).collect();
    let bump_mass: f64 = samples.iter().sum::<f64>() * h * h;
    let mass = omega.integral();
    let weight = mass / bump_mass;
    let remainder = omega.data().iter().zip(&samples).map(|(&w, &b)| w - weight * b).collect();
    (remainder, weight, bump)
}

fn whole_plane<M, C>(omega: &GridField, multiplier: M, closed_form: C) -> Result<GridField>
where
    M: Fn(Complex64) -> Complex64 + Sync,
    C: Fn(&MassBump, Complex64) -> Complex64 + Sync,
{
    check_support(omega)?;
    let spectral = Spectral::get(omega.n(), omega.half_width());
    let (remainder, weight, bump) = split_mass(omega);
    let periodic = spectral.apply(&remainder, multiplier);
    let template = GridField::zeros(omega.n(), omega.half_width())?;
    let data = periodic
        .into_par_iter()
        .enumerate()
        .map(|(idx, v)| v + weight * closed_form(&bump, template.point_at(idx)))
        .collect();
    GridField::from_data(omega.n(), omega.half_width(), data)
}

/// Cauchy transform `Tω(z) = (1/π) ∫ ω(ζ)/(z − ζ) dm(ζ)`, so `∂̄Tω = ω`.
pub fn cauchy_transform(omega: &GridField) -> Result<GridField> {
    whole_plane(omega, cauchy_multiplier, MassBump::cauchy)
}

/// Beurling transform `Sω = ∂Tω`.
pub fn beurling_transform(omega: &GridField) -> Result<GridField> {
    whole_plane(omega, beurling_multiplier, MassBump::beurling)
}

/// Purely periodic multiplier versions, without the mass split. These are the
/// operators for which `∂̄T = id` and `‖S·‖ = ‖·‖` hold exactly on zero-mean data.
pub fn periodic_cauchy(omega: &GridField) -> GridField {
    periodic(omega, cauchy_multiplier)
}

pub fn periodic_beurling(omega: &GridField) -> GridField {
    periodic(omega, beurling_multiplier)
}

fn periodic<M>(f: &GridField, multiplier: M) -> GridField
where
    M: Fn(Complex64) -> Complex64 + Sync,
{
    let spectral = Spectral::get(f.n(), f.half_width());
    let data = spectral.apply(f.data(), multiplier);
    GridField::from_data(f.n(), f.half_width(), data).expect("multiplier output is finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// Spectral differentiation after removing the affine trend `a·x + b·y`.
    #[default]
    Spectral,
    /// Second-order centered differences, one-sided at the box edge.
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct DerivativePair {
    pub fz: GridField,
    pub fzbar: GridField,
}

pub fn derivatives(f: &GridField) -> DerivativePair {
    derivatives_with(f, DerivativeMode::default())
}

pub fn derivatives_with(f: &GridField, mode: DerivativeMode) -> DerivativePair {
    match mode {
        DerivativeMode::Spectral => spectral_derivatives(f),
        DerivativeMode::FiniteDifference => finite_difference_derivatives(f),
    }
}

/// Mean edge-to-edge slopes `(∂ₓf, ∂ᵧf)` of the field.
fn affine_trend(f: &GridField) -> (Complex64, Complex64) {
    let n = f.n();
    let span = (n - 1) as f64 * f.spacing();
    let mut sx = Complex64::new(0.0, 0.0);
    let mut sy = Complex64::new(0.0, 0.0);
    for i in 0..n {
        sx += f.get(i, n - 1) - f.get(i, 0);
        sy += f.get(n - 1, i) - f.get(0, i);
    }
    (sx / (n as f64 * span), sy / (n as f64 * span))
}

fn spectral_derivatives(f: &GridField) -> DerivativePair {
    let (ax, ay) = affine_trend(f);
    let detrended = f.map_with_point(|z, v| v - ax * z.re - ay * z.im);
    let i = Complex64::i();
    let dz = periodic(&detrended, |z| i * z.conj() / 2.0);
    let dzbar = periodic(&detrended, |z| i * z / 2.0);
    // ∂ = (∂ₓ − i∂ᵧ)/2, ∂̄ = (∂ₓ + i∂ᵧ)/2 applied to the trend
    let trend_z = (ax - i * ay) / 2.0;
    let trend_zbar = (ax + i * ay) / 2.0;
    DerivativePair { fz: dz.map(|v| v + trend_z), fzbar: dzbar.map(|v| v + trend_zbar) }
}

fn finite_difference_derivatives(f: &GridField) -> DerivativePair {
    let n = f.n();
    let h = f.spacing();
    let i = Complex64::i();
    let pairs: Vec<(Complex64, Complex64)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (j, k) = (idx / n, idx % n);
            let fx = if k == 0 {
                (-3.0 * f.get(j, 0) + 4.0 * f.get(j, 1) - f.get(j, 2)) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * f.get(j, n - 1) - 4.0 * f.get(j, n - 2) + f.get(j, n - 3)) / (2.0 * h)
            } else {
                (f.get(j, k + 1) - f.get(j, k - 1)) / (2.0 * h)
            };
            let fy = if j == 0 {
                (-3.0 * f.get(0, k) + 4.0 * f.get(1, k) - f.get(2, k)) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * f.get(n - 1, k) - 4.0 * f.get(n - 2, k) + f.get(n - 3, k)) / (2.0 * h)
            } else {
                (f.get(j + 1, k) - f.get(j - 1, k)) / (2.0 * h)
            };
            ((fx - i * fy) / 2.0, (fx + i * fy) / 2.0)
        })
        .collect();
    let fz = GridField::from_data(n, f.half_width(), pairs.iter().map(|p| p.0).collect())
        .expect("finite differences of finite data");
    let fzbar = GridField::from_data(n, f.half_width(), pairs.iter().map(|p| p.1).collect())
        .expect("finite differences of finite data");
    DerivativePair { fz, fzbar }
}
