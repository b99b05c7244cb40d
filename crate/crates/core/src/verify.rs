//! Post-hoc checks of computed maps: equation residual, Jacobian sign,
//! injectivity, inverse-map dilatation integrals and a continuity-modulus fit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSpec;
use crate::grid::GridField;
use crate::solution::Solution;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub l2_rel: f64,
    pub sup: f64,
    /// Support nodes skipped as declared singular points or where the formula is undefined.
    pub excluded: usize,
}

/// `(μ, ν)` at `(z, w)` after truncations, or `None` where the formula cannot be evaluated.
pub(crate) fn coefficients_at(spec: &CoefficientSpec, z: Complex64, w: Complex64) -> Option<(Complex64, Complex64)> {
    let (mu, nu) = spec.eval_raw(z, w).ok()?;
    if spec.truncations.iter().all(|p| p.holds(z, w, mu, nu)) {
        Some((mu, nu))
    } else {
        Some((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)))
    }
}

/// Pointwise `f_z̄ − μ(z,f) f_z − ν(z,f) conj(f_z)` and its norms over the support disk.
pub fn residual(sol: &Solution, spec: &CoefficientSpec) -> (GridField, ResidualNorms) {
    let f = &sol.f;
    let h2 = f.spacing() * f.spacing();
    let mut data = Vec::with_capacity(f.data().len());
    let (mut num, mut den, mut sup) = (0.0, 0.0, 0.0f64);
    let mut excluded = 0;
    for idx in 0..f.data().len() {
        let z = f.point_at(idx);
        let (fz, fzbar) = (sol.fz.data()[idx], sol.fzbar.data()[idx]);
        let inside = z.norm() <= spec.support_radius;
        let coeffs = if spec.is_singular_point(z) { None } else { coefficients_at(spec, z, f.data()[idx]) };
        match coeffs {
            Some((mu, nu)) => {
                let r = fzbar - mu * fz - nu * fz.conj();
                if inside {
                    num += r.norm_sqr() * h2;
                    den += fz.norm_sqr() * h2;
                    sup = sup.max(r.norm());
                }
                data.push(r);
            }
            None => {
                if inside {
                    excluded += 1;
                }
                data.push(Complex64::new(0.0, 0.0));
            }
        }
    }
    let l2_rel = if num == 0.0 { 0.0 } else { (num / den).sqrt() };
    let field = GridField::from_data(f.n(), f.half_width(), data).expect("finite residual samples");
    (field, ResidualNorms { l2_rel, sup, excluded })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobianStats {
    pub min: f64,
    pub fraction_nonpositive: f64,
    pub samples: usize,
}

/// `J = |f_z|² − |f_z̄|²` over the support disk, or the whole grid when the support is empty.
pub fn jacobian_stats(sol: &Solution) -> JacobianStats {
    let r = sol.support_radius;
    let mut min = f64::INFINITY;
    let mut bad = 0usize;
    let mut samples = 0usize;
    for (idx, (a, b)) in sol.fz.data().iter().zip(sol.fzbar.data()).enumerate() {
        if r > 0.0 && sol.f.point_at(idx).norm() > r {
            continue;
        }
        let j = a.norm_sqr() - b.norm_sqr();
        min = min.min(j);
        samples += 1;
        if j <= 0.0 {
            bad += 1;
        }
    }
    let fraction_nonpositive = if samples == 0 { 0.0 } else { bad as f64 / samples as f64 };
    JacobianStats { min, fraction_nonpositive, samples }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub triangles: usize,
    pub orientation_flips: usize,
    /// Grid cells containing at least one flipped triangle.
    pub folded_cell_count: usize,
    /// Pairs of vertex-disjoint image triangles whose interiors intersect.
    pub overlapping_pairs: usize,
    pub pass: bool,
}

/// Image triangles of the grid, two per cell, with their domain vertex indices.
struct Mesh {
    n: usize,
    vertices: Vec<Complex64>,
    triangles: Vec<[usize; 3]>,
}

impl Mesh {
    fn of(f: &GridField) -> Mesh {
        let n = f.n();
        let mut triangles = Vec::with_capacity(2 * (n - 1) * (n - 1));
        for j in 0..n - 1 {
            for k in 0..n - 1 {
                let a = j * n + k;
                let b = a + 1;
                let c = a + n + 1;
                let d = a + n;
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Mesh { n, vertices: f.data().to_vec(), triangles }
    }

    fn corners(&self, t: usize) -> [Complex64; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        let (u, v) = (b - a, c - a);
        0.5 * (u.re * v.im - u.im * v.re)
    }
}

/// Uniform bins over the bounding box of a set of triangles.
struct BinIndex {
    origin: Complex64,
    cell: f64,
    cols: usize,
    rows: usize,
    bins: Vec<Vec<usize>>,
}

impl BinIndex {
    fn build(mesh: &Mesh, per_axis: usize) -> BinIndex {
        let (mut lo, mut hi) =
            (Complex64::new(f64::INFINITY, f64::INFINITY), Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for v in &mesh.vertices {
            lo = Complex64::new(lo.re.min(v.re), lo.im.min(v.im));
            hi = Complex64::new(hi.re.max(v.re), hi.im.max(v.im));
        }
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-300);
        let cell = span / per_axis as f64;
        let cols = ((hi.re - lo.re) / cell).floor() as usize + 1;
        let rows = ((hi.im - lo.im) / cell).floor() as usize + 1;
        let mut index = BinIndex { origin: lo, cell, cols, rows, bins: vec![Vec::new(); cols * rows] };
        for t in 0..mesh.triangles.len() {
            let c = mesh.corners(t);
            let (k0, j0) =
                index.bin_of(Complex64::new(c[0].re.min(c[1].re).min(c[2].re), c[0].im.min(c[1].im).min(c[2].im)));
            let (k1, j1) =
                index.bin_of(Complex64::new(c[0].re.max(c[1].re).max(c[2].re), c[0].im.max(c[1].im).max(c[2].im)));
            for j in j0..=j1 {
                for k in k0..=k1 {
                    index.bins[j * cols + k].push(t);
                }
            }
        }
        index
    }

    fn bin_of(&self, z: Complex64) -> (usize, usize) {
        let k = (((z.re - self.origin.re) / self.cell).floor().max(0.0) as usize).min(self.cols - 1);
        let j = (((z.im - self.origin.im) / self.cell).floor().max(0.0) as usize).min(self.rows - 1);
        (k, j)
    }

    fn candidates(&self, z: Complex64) -> Option<&[usize]> {
        let (k, j) = ((z.re - self.origin.re) / self.cell, (z.im - self.origin.im) / self.cell);
        if k < 0.0 || j < 0.0 || k >= self.cols as f64 || j >= self.rows as f64 {
            return None;
        }
        Some(&self.bins[j as usize * self.cols + k as usize])
    }
}

/// Separating-axis test for two triangles; touching within `tol` does not count.
fn triangles_overlap(a: &[Complex64; 3], b: &[Complex64; 3], tol: f64) -> bool {
    for tri in [a, b] {
        for i in 0..3 {
            let e = tri[(i + 1) % 3] - tri[i];
            let axis = Complex64::new(-e.im, e.re);
            let len = axis.norm();
            if len == 0.0 {
                continue;
            }
            let proj = |p: &Complex64| (p.re * axis.re + p.im * axis.im) / len;
            let (amin, amax) =
                a.iter().map(proj).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            let (bmin, bmax) =
                b.iter().map(proj).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if amax <= bmin + tol || bmax <= amin + tol {
                return false;
            }
        }
    }
    true
}

/// Orientation flips and overlaps of the piecewise-linear image of the grid.
pub fn injectivity_check(sol: &Solution) -> InjectivityReport {
    let mesh = Mesh::of(&sol.f);
    let flipped: Vec<bool> = (0..mesh.triangles.len()).map(|t| mesh.signed_area(t) <= 0.0).collect();
    let orientation_flips = flipped.iter().filter(|&&b| b).count();
    let folded_cell_count = flipped.chunks(2).filter(|c| c[0] || c[1]).count();
    let index = BinIndex::build(&mesh, mesh.n);
    let mean_edge = {
        let total: f64 = mesh.triangles.iter().map(|t| (mesh.vertices[t[1]] - mesh.vertices[t[0]]).norm()).sum();
        total / mesh.triangles.len() as f64
    };
    let tol = 1e-9 * mean_edge;
    let mut pairs = std::collections::BTreeSet::new();
    for bin in &index.bins {
        for (i, &s) in bin.iter().enumerate() {
            for &t in &bin[i + 1..] {
                let (ts, tt) = (mesh.triangles[s], mesh.triangles[t]);
                if ts.iter().any(|v| tt.contains(v)) {
                    continue;
                }
                let key = (s.min(t), s.max(t));
                if !pairs.contains(&key) && triangles_overlap(&mesh.corners(s), &mesh.corners(t), tol) {
                    pairs.insert(key);
                }
            }
        }
    }
    let overlapping_pairs = pairs.len();
    InjectivityReport {
        triangles: mesh.triangles.len(),
        orientation_flips,
        folded_cell_count,
        overlapping_pairs,
        pass: orientation_flips == 0 && overlapping_pairs == 0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeViolations {
    pub w0: Complex64,
    pub samples: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseReport {
    pub p: f64,
    /// The image grid covers `[-a, a − h]²` with `a` this half-width.
    pub window_half_width: f64,
    pub window_area: f64,
    /// Trapezoidal `∫ K_{I,p}(w, g) dm(w)` over the window.
    pub ki_integral: f64,
    /// Trapezoidal `∫ K_{μ_g}(w) dm(w)` over the window.
    pub kmu_integral: f64,
    pub ki_min: f64,
    pub ki_max: f64,
    pub kt_violations: Vec<ProbeViolations>,
}

/// Barycentric coordinates of `w` in triangle `c`.
fn barycentric(c: &[Complex64; 3], w: Complex64) -> Option<[f64; 3]> {
    let (u, v, d) = (c[1] - c[0], c[2] - c[0], w - c[0]);
    let det = u.re * v.im - u.im * v.re;
    if det == 0.0 {
        return None;
    }
    let b1 = (d.re * v.im - d.im * v.re) / det;
    let b2 = (u.re * d.im - u.im * d.re) / det;
    Some([1.0 - b1 - b2, b1, b2])
}

fn locate(mesh: &Mesh, index: &BinIndex, domain: &GridField, w: Complex64) -> Option<Complex64> {
    const EDGE: f64 = -1e-10;
    for &t in index.candidates(w)? {
        if let Some(b) = barycentric(&mesh.corners(t), w) {
            if b.iter().all(|&x| x >= EDGE) {
                let [i, j, k] = mesh.triangles[t];
                return Some(domain.point_at(i) * b[0] + domain.point_at(j) * b[1] + domain.point_at(k) * b[2]);
            }
        }
    }
    None
}

/// Largest `a` such that `[-a, a]²` sits inside the image of the box boundary, shrunk by 20%.
fn default_window(f: &GridField) -> f64 {
    let n = f.n();
    let boundary = (0..n).flat_map(|i| [f.get(0, i), f.get(n - 1, i), f.get(i, 0), f.get(i, n - 1)]);
    0.8 * boundary.map(|v| v.re.abs().max(v.im.abs())).fold(f64::INFINITY, f64::min)
}

fn trapezoid_weight(j: usize, k: usize, m: usize, h: f64) -> f64 {
    let edge = |i: usize| if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
    edge(j) * edge(k) * h * h
}

/// Inverse map on an `m × m` image grid by point location, its dilatation
/// integrals and tangential-bound violation counts about each probe.
pub fn inverse_dilatation_audit(
    sol: &Solution,
    p: f64,
    q: &crate::conditions::MajorantSpec,
    probes: &[Complex64],
    image_grid: usize,
    window_half_width: Option<f64>,
) -> crate::Result<InverseReport> {
    use crate::dilatation::{inner_dilatation_p, map_dilatation, tangential_dilatation};
    use crate::error::Error;
    use crate::transforms::{derivatives_with, DerivativeMode};

    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::ParamOutOfRange(format!("inverse audit needs 1 < p <= 2, got {p}")));
    }
    let inj = injectivity_check(sol);
    if !inj.pass {
        return Err(Error::NotInvertible(format!(
            "{} orientation flips, {} overlapping triangle pairs",
            inj.orientation_flips, inj.overlapping_pairs
        )));
    }
    let mesh = Mesh::of(&sol.f);
    let index = BinIndex::build(&mesh, mesh.n);
    let domain = &sol.f;
    for &w0 in probes {
        if locate(&mesh, &index, domain, w0).is_none() {
            return Err(Error::OutOfImage(w0));
        }
    }
    let a = window_half_width.unwrap_or_else(|| default_window(&sol.f));
    let g = GridField::try_from_fn(image_grid, a, |w| locate(&mesh, &index, domain, w).ok_or(Error::OutOfImage(w)))?;
    let d = derivatives_with(&g, DerivativeMode::FiniteDifference);
    let m = image_grid;
    let h = g.spacing();
    let (mut ki_integral, mut kmu_integral) = (0.0, 0.0);
    let (mut ki_min, mut ki_max) = (f64::INFINITY, 0.0f64);
    let mut mu_g = Vec::with_capacity(m * m);
    for idx in 0..m * m {
        let (gw, gwbar) = (d.fz.data()[idx], d.fzbar.data()[idx]);
        let ki = inner_dilatation_p(gw, gwbar, p);
        let weight = trapezoid_weight(idx / m, idx % m, m, h);
        ki_integral += ki * weight;
        kmu_integral += map_dilatation(gw, gwbar) * weight;
        ki_min = ki_min.min(ki);
        ki_max = ki_max.max(ki);
        mu_g.push(if gw.norm_sqr() == 0.0 { Complex64::new(f64::INFINITY, 0.0) } else { gwbar / gw });
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut kt_violations = Vec::new();
    for &w0 in probes {
        let (mut samples, mut violations) = (0, 0);
        for (idx, &mu) in mu_g.iter().enumerate() {
            let w = g.point_at(idx);
            let Ok(bound) = q.eval(w) else { continue };
            let Ok(kt) = tangential_dilatation(mu, zero, w, w0, 0.0) else { continue };
            samples += 1;
            if kt > bound + 1e-9 {
                violations += 1;
            }
        }
        kt_violations.push(ProbeViolations { w0, samples, violations });
    }
    Ok(InverseReport {
        p,
        window_half_width: a,
        window_area: ((m - 1) as f64 * h).powi(2),
        ki_integral,
        kmu_integral,
        ki_min,
        ki_max,
        kt_violations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleFit {
    pub distance: f64,
    pub pairs: usize,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub compact_radius: f64,
    pub r0: f64,
    pub q_l1_norm: f64,
    /// Smallest `C` with `|f(x) − f(y)| ≤ C ‖Q‖₁^{1/2} / log^{1/2}(1 + r₀/(2|x − y|))` on all sampled pairs.
    pub c: f64,
    pub scales: Vec<ScaleFit>,
}

/// Pairs sampled per dyadic scale.
const PAIRS_PER_SCALE: usize = 400;
const CONTINUITY_SEED: u64 = 0x5EED_B17;

/// Fits the log-modulus bound on `K = {|z| ≤ R − margin}`, `R` the solution's
/// support radius, with `r₀ = margin` unless given.
pub fn continuity_modulus_fit(
    sol: &Solution,
    q_l1_norm: f64,
    margin: f64,
    r0: Option<f64>,
) -> crate::Result<ContinuityReport> {
    use rand::{Rng, SeedableRng};

    if !(q_l1_norm > 0.0) {
        return Err(crate::Error::ParamOutOfRange(format!("Q L1 norm {q_l1_norm} must be positive")));
    }
    let radius = sol.support_radius - margin;
    if !(radius > 0.0 && margin > 0.0) {
        return Err(crate::Error::EmptyCompact(margin));
    }
    let f = &sol.f;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(CONTINUITY_SEED);
    let r0 = r0.unwrap_or(margin);
    let point_in_k = |rng: &mut rand_chacha::ChaCha8Rng| loop {
        let z = Complex64::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius));
        if z.norm() <= radius {
            return z;
        }
    };
    let mut scales = Vec::new();
    let mut d = f.spacing();
    while d <= 2.0 * radius {
        let factor = (1.0 + r0 / (2.0 * d)).ln().sqrt() / q_l1_norm.sqrt();
        let mut c: f64 = 0.0;
        let mut pairs = 0;
        let mut attempts = 0;
        while pairs < PAIRS_PER_SCALE && attempts < 50 * PAIRS_PER_SCALE {
            attempts += 1;
            let x = point_in_k(&mut rng);
            let y = x + Complex64::from_polar(d, rng.gen_range(0.0..std::f64::consts::TAU));
            if y.norm() > radius {
                continue;
            }
            pairs += 1;
            c = c.max((f.interpolate(x) - f.interpolate(y)).norm() * factor);
        }
        if pairs > 0 {
            scales.push(ScaleFit { distance: d, pairs, c });
        }
        d *= 2.0;
    }
    if scales.is_empty() {
        return Err(crate::Error::EmptyCompact(margin));
    }
    let c = scales.iter().map(|s| s.c).fold(0.0, f64::max);
    Ok(ContinuityReport { compact_radius: radius, r0, q_l1_norm, c, scales })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub residual: Option<ResidualNorms>,
    pub jacobian: JacobianStats,
    pub injectivity: InjectivityReport,
    pub inverse: Option<InverseReport>,
    pub continuity: Option<ContinuityReport>,
}
