//! Complex samples on a uniform square grid.
//!
//! Sample `(j, k)` (row `j`, column `k`) sits at
//! `z = (-L + k h) + i (-L + j h)` with `h = 2L / n`. The grid is treated as
//! one period of a doubly periodic field by the spectral operators.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BLGF";

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: usize,
    half_width: f64,
    data: Vec<Complex64>,
}

fn check_geometry(n: usize, half_width: f64) -> Result<()> {
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("n = {n} must be a power of two >= 16")));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
    }
    Ok(())
}

impl GridField {
    pub fn zeros(n: usize, half_width: f64) -> Result<Self> {
        check_geometry(n, half_width)?;
        Ok(Self { n, half_width, data: vec![Complex64::new(0.0, 0.0); n * n] })
    }

    pub fn from_data(n: usize, half_width: f64, data: Vec<Complex64>) -> Result<Self> {
        check_geometry(n, half_width)?;
        if data.len() != n * n {
            return Err(Error::InvalidGrid(format!("expected {} samples, got {}", n * n, data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { n, half_width, data })
    }

    /// Samples `f(z)` at every node.
    pub fn from_fn<F>(n: usize, half_width: f64, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        Self::try_from_fn(n, half_width, |z| Ok(f(z)))
    }

    pub fn try_from_fn<F>(n: usize, half_width: f64, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        check_geometry(n, half_width)?;
        let h = 2.0 * half_width / n as f64;
        let data = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (j, k) = (idx / n, idx % n);
                f(Complex64::new(-half_width + k as f64 * h, -half_width + j as f64 * h))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_data(n, half_width, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn point(&self, j: usize, k: usize) -> Complex64 {
        let h = self.spacing();
        Complex64::new(-self.half_width + k as f64 * h, -self.half_width + j as f64 * h)
    }

    pub fn point_at(&self, idx: usize) -> Complex64 {
        self.point(idx / self.n, idx % self.n)
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.data[j * self.n + k]
    }

    pub fn same_geometry(&self, other: &GridField) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }

    pub(crate) fn assert_same_geometry(&self, other: &GridField) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!(
                "geometry mismatch: (n {}, L {}) vs (n {}, L {})",
                self.n, self.half_width, other.n, other.half_width
            )))
        }
    }

    /// Pointwise map that also sees the node coordinate.
    pub fn map_with_point<F>(&self, f: F) -> GridField
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        let data = self.data.par_iter().enumerate().map(|(idx, &v)| f(self.point_at(idx), v)).collect();
        GridField { n: self.n, half_width: self.half_width, data }
    }

    pub fn map<F>(&self, f: F) -> GridField
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        self.map_with_point(|_, v| f(v))
    }

    pub fn zip_map<F>(&self, other: &GridField, f: F) -> Result<GridField>
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        self.assert_same_geometry(other)?;
        let data = self.data.par_iter().zip(other.data.par_iter()).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridField { n: self.n, half_width: self.half_width, data })
    }

    pub fn scale(&self, c: Complex64) -> GridField {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Discrete L² norm, `sqrt(h² Σ |v|²)`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.spacing();
        (self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h).sqrt()
    }

    /// L² norm restricted to nodes accepted by `mask`.
    pub fn l2_norm_where<F>(&self, mask: F) -> f64
    where
        F: Fn(Complex64) -> bool,
    {
        let h = self.spacing();
        let s: f64 =
            self.data.iter().enumerate().filter(|(idx, _)| mask(self.point_at(*idx))).map(|(_, v)| v.norm_sqr()).sum();
        (s * h * h).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `h² Σ v`, the discrete integral over the box.
    pub fn integral(&self) -> Complex64 {
        let h = self.spacing();
        self.data.iter().sum::<Complex64>() * (h * h)
    }

    /// Largest `|z|` over nodes with a nonzero sample, or 0 for the zero field.
    pub fn support_radius(&self) -> f64 {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(idx, _)| self.point_at(idx).norm())
            .fold(0.0, f64::max)
    }

    /// Bilinear interpolation; points outside the box are clamped to the edge cells.
    pub fn interpolate(&self, z: Complex64) -> Complex64 {
        let h = self.spacing();
        let last = (self.n - 1) as f64;
        let u = ((z.re + self.half_width) / h).clamp(0.0, last);
        let v = ((z.im + self.half_width) / h).clamp(0.0, last);
        let k0 = (u.floor() as usize).min(self.n - 2);
        let j0 = (v.floor() as usize).min(self.n - 2);
        let (a, b) = (u - k0 as f64, v - j0 as f64);
        self.get(j0, k0) * ((1.0 - a) * (1.0 - b))
            + self.get(j0, k0 + 1) * (a * (1.0 - b))
            + self.get(j0 + 1, k0) * ((1.0 - a) * b)
            + self.get(j0 + 1, k0 + 1) * (a * b)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.half_width.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(Error::Format("missing BLGF magic".into()));
        }
        let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let half_width = f64::from_le_bytes(header[8..16].try_into().unwrap());
        check_geometry(n, half_width)?;
        let mut buf = vec![0u8; n * n * 16];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Self::from_data(n, half_width, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }

    /// CSV with header `x,y,re,im`, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,re,im")?;
        for (idx, v) in self.data.iter().enumerate() {
            let z = self.point_at(idx);
            writeln!(w, "{},{},{},{}", z.re, z.im, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Real samples on the same node layout as [`GridField`]; may hold `±∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub n: usize,
    pub half_width: f64,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn from_pairs<F>(a: &GridField, b: &GridField, f: F) -> ScalarField
    where
        F: Fn(Complex64, Complex64) -> f64 + Sync,
    {
        let values = a.data.par_iter().zip(b.data.par_iter()).map(|(&x, &y)| f(x, y)).collect();
        ScalarField { n: a.n, half_width: a.half_width, values }
    }

    pub fn from_field<F>(a: &GridField, f: F) -> ScalarField
    where
        F: Fn(Complex64, Complex64) -> f64 + Sync,
    {
        let values = a.data.par_iter().enumerate().map(|(idx, &v)| f(a.point_at(idx), v)).collect();
        ScalarField { n: a.n, half_width: a.half_width, values }
    }

    pub fn point_at(&self, idx: usize) -> Complex64 {
        let h = 2.0 * self.half_width / self.n as f64;
        Complex64::new(-self.half_width + (idx % self.n) as f64 * h, -self.half_width + (idx / self.n) as f64 * h)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for (idx, v) in self.values.iter().enumerate() {
            let z = self.point_at(idx);
            writeln!(w, "{},{},{}", z.re, z.im, v)?;
        }
        Ok(())
    }

    /// Binary PPM heatmap, row 0 at the bottom. Finite values are scaled
    /// linearly between their min and max; non-finite values are drawn white.
    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        let finite = self.values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        write!(w, "P6\n{} {}\n255\n", self.n, self.n)?;
        let mut row = Vec::with_capacity(self.n * 3);
        for j in (0..self.n).rev() {
            row.clear();
            for k in 0..self.n {
                let v = self.values[j * self.n + k];
                let rgb = if v.is_finite() { ramp((v - lo) / span) } else { [255, 255, 255] };
                row.extend_from_slice(&rgb);
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

/// Blue to yellow through red, `t` in `[0, 1]`.
fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * (2.0 * t).min(1.0)) as u8;
    let g = (255.0 * (2.0 * t - 1.0).max(0.0)) as u8;
    let b = (255.0 * (1.0 - 2.0 * t).max(0.0)) as u8;
    [r, g, b]
}
