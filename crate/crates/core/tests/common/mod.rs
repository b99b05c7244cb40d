//! Test-only oracles, independent of the library's numerical paths.
#![allow(dead_code)]

use num_complex::Complex64;
use std::f64::consts::PI;

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK_WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kron += s * GK_WK[i];
        if i % 2 == 1 {
            gauss += s * GK_WG[i / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive Gauss–Kronrod quadrature of a complex integrand.
pub fn integrate<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64) -> Complex64 {
    fn rec<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Complex64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth > 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol / 2.0, depth + 1) + rec(f, m, b, tol / 2.0, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// `(1/π) ∫_𝔻 dm(ζ) / (z − ζ)` by polar coordinates centred at `z`.
pub fn cauchy_of_disk(z: Complex64) -> Complex64 {
    let r = z.norm();
    let chord = |phi: f64| -> f64 {
        // ray z + ρ e^{iφ}, ρ ≥ 0, intersected with the unit disk
        let d = Complex64::from_polar(1.0, phi);
        let b = (z * d.conj()).re;
        let c = r * r - 1.0;
        let disc = b * b - c;
        if disc <= 0.0 {
            return 0.0;
        }
        let s = disc.sqrt();
        let (lo, hi) = ((-b - s).max(0.0), (-b + s).max(0.0));
        hi - lo
    };
    let integrand = |phi: f64| -Complex64::from_polar(1.0, -phi) * chord(phi);
    if r < 1.0 {
        integrate(&integrand, 0.0, 2.0 * PI, 1e-12) / PI
    } else {
        // split at the tangent directions so the square-root edges sit at panel ends
        let centre = (-z).arg();
        let half = (1.0 / r).asin();
        integrate(&integrand, centre - half, centre + half, 1e-12) / PI
    }
}

/// `∂` of the disk Cauchy oracle by centred differences.
pub fn beurling_of_disk(z: Complex64) -> Complex64 {
    let h = 1e-4;
    let fx = (cauchy_of_disk(z + h) - cauchy_of_disk(z - h)) / (2.0 * h);
    let fy = (cauchy_of_disk(z + Complex64::new(0.0, h)) - cauchy_of_disk(z - Complex64::new(0.0, h))) / (2.0 * h);
    (fx - Complex64::i() * fy) / 2.0
}

/// Twenty probe points, ten inside and ten outside the unit circle, at least
/// 0.2 away from it.
pub fn disk_probes() -> Vec<Complex64> {
    let mut out = Vec::new();
    for i in 0..10 {
        let t = i as f64 * 0.7 + 0.3;
        out.push(Complex64::from_polar(0.1 + 0.06 * i as f64, t));
        out.push(Complex64::from_polar(1.25 + 0.05 * i as f64, t + 0.4));
    }
    out
}
