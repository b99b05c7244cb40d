//! Dilatation functionals of coefficient pairs and of maps.
//!
//! Degenerate points are encoded with `f64::INFINITY` rather than errors so
//! that grid fields stay total.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridField, ScalarField};

/// Maximal dilatation `(1 + |μ| + |ν|) / (1 − |μ| − |ν|)`, `+∞` once `|μ| + |ν| ≥ 1`.
pub fn maximal_dilatation(mu: Complex64, nu: Complex64) -> f64 {
    let s = mu.norm() + nu.norm();
    if s >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 + s) / (1.0 - s)
    }
}

/// Tangential dilatation with respect to the centre `z0` and phase `theta`.
pub fn tangential_dilatation(mu: Complex64, nu: Complex64, z: Complex64, z0: Complex64, theta: f64) -> Result<f64> {
    let d = z - z0;
    if d.norm_sqr() == 0.0 {
        return Err(Error::DegenerateBase);
    }
    let c = mu + nu * Complex64::from_polar(1.0, theta);
    let c2 = c.norm_sqr();
    if c2 >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let numerator = (Complex64::new(1.0, 0.0) - d.conj() / d * c).norm_sqr();
    Ok(numerator / (1.0 - c2))
}

/// `J = |f_z|² − |f_z̄|²`.
pub fn jacobian(fz: Complex64, fzbar: Complex64) -> f64 {
    fz.norm_sqr() - fzbar.norm_sqr()
}

/// `(|f_z| + |f_z̄|) / ||f_z| − |f_z̄||`; 1 where both derivatives vanish and
/// `+∞` where only the Jacobian does.
pub fn map_dilatation(fz: Complex64, fzbar: Complex64) -> f64 {
    let (a, b) = (fz.norm(), fzbar.norm());
    if a + b == 0.0 {
        return 1.0;
    }
    let gap = (a - b).abs();
    if gap == 0.0 {
        f64::INFINITY
    } else {
        (a + b) / gap
    }
}

/// Inner dilatation of order `p`, `|J| / ||f_z| − |f_z̄||^p`, with the same
/// degenerate conventions as [`map_dilatation`]. At `p = 2` it coincides with
/// the map dilatation.
pub fn inner_dilatation_p(fz: Complex64, fzbar: Complex64, p: f64) -> f64 {
    assert!(p >= 1.0, "inner dilatation needs p >= 1, got {p}");
    let (a, b) = (fz.norm(), fzbar.norm());
    if a + b == 0.0 {
        return 1.0;
    }
    let gap = (a - b).abs();
    if gap == 0.0 {
        return f64::INFINITY;
    }
    if p == 2.0 {
        // |a² − b²| / (a − b)² reduces exactly to (a + b) / |a − b|
        return (a + b) / gap;
    }
    (a * a - b * b).abs() / gap.powf(p)
}

/// Single Beltrami coefficient `μ + ratio·ν` seen by a solution whose
/// unimodular factor `conj(f_z)/f_z` is `ratio`.
pub fn effective_single_coefficient(mu: Complex64, nu: Complex64, ratio: Complex64) -> Complex64 {
    mu + ratio * nu
}

/// `conj(f_z)/f_z`, or 0 where `f_z` vanishes.
pub fn conjugation_ratio(fz: Complex64) -> Complex64 {
    if fz.norm_sqr() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        fz.conj() / fz
    }
}

pub fn maximal_dilatation_field(mu: &GridField, nu: &GridField) -> Result<ScalarField> {
    mu.assert_same_geometry(nu)?;
    Ok(ScalarField::from_pairs(mu, nu, maximal_dilatation))
}

pub fn map_dilatation_field(fz: &GridField, fzbar: &GridField) -> Result<ScalarField> {
    fz.assert_same_geometry(fzbar)?;
    Ok(ScalarField::from_pairs(fz, fzbar, map_dilatation))
}

pub fn jacobian_field(fz: &GridField, fzbar: &GridField) -> Result<ScalarField> {
    fz.assert_same_geometry(fzbar)?;
    Ok(ScalarField::from_pairs(fz, fzbar, jacobian))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn maximal_examples() {
        assert_eq!(maximal_dilatation(c(0.0, 0.0), c(0.0, 0.0)), 1.0);
        assert!((maximal_dilatation(c(0.6, 0.0), c(0.0, 0.0)) - 4.0).abs() < 1e-15);
        assert!((maximal_dilatation(c(0.3, 0.0), c(0.3, 0.0)) - 4.0).abs() < 1e-15);
        assert_eq!(maximal_dilatation(c(0.5, 0.0), c(0.0, 0.5)), f64::INFINITY);
    }

    #[test]
    fn tangential_examples() {
        let z = c(0.3, 0.0);
        assert_eq!(tangential_dilatation(c(0.0, 0.0), c(0.0, 0.0), z, c(0.0, 0.0), 1.0).unwrap(), 1.0);
        assert!(matches!(tangential_dilatation(c(0.1, 0.0), c(0.0, 0.0), z, z, 0.0), Err(Error::DegenerateBase)));
        // phase-2 coefficient at r = 0.3, |w| = 0.2, centre 0: value r + |w|
        for &arg in &[0.0, 0.7, 2.0, 4.5] {
            let z = Complex64::from_polar(0.3, arg);
            let s = 0.3 + 0.2;
            let mu = Complex64::from_polar((1.0 - s) / (1.0 + s), 2.0 * arg);
            let kt = tangential_dilatation(mu, c(0.0, 0.0), z, c(0.0, 0.0), 0.0).unwrap();
            assert!((kt - 0.5).abs() < 1e-12, "{kt}");
        }
    }

    #[test]
    fn tangential_below_maximal_sweep() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let a: f64 = rng.gen_range(0.0..0.999);
            let split: f64 = rng.gen();
            let mu = Complex64::from_polar(a * split, rng.gen_range(0.0..6.3));
            let nu = Complex64::from_polar(a * (1.0 - split), rng.gen_range(0.0..6.3));
            let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let z0 = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let k = maximal_dilatation(mu, nu);
            for t in 0..64 {
                let theta = t as f64 * std::f64::consts::TAU / 64.0;
                let kt = tangential_dilatation(mu, nu, z, z0, theta).unwrap();
                assert!(kt <= k * (1.0 + 1e-12), "{kt} > {k}");
            }
        }
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(jacobian(c(1.0, 0.0), c(0.0, 0.0)), 1.0);
        assert_eq!(jacobian(c(1.0, 0.0), c(0.5, 0.0)), 0.75);
        assert_eq!(jacobian(c(0.5, 0.0), c(0.5, 0.0)), 0.0);
        let (a, b) = (c(0.3, -1.2), c(0.7, 0.1));
        assert_eq!(jacobian(a, b), -jacobian(b, a));
    }

    #[test]
    fn map_and_inner_examples() {
        assert_eq!(map_dilatation(c(0.0, 0.0), c(0.0, 0.0)), 1.0);
        assert_eq!(map_dilatation(c(2.0, 0.0), c(1.0, 0.0)), 3.0);
        assert_eq!(map_dilatation(c(1.0, 0.0), c(1.0, 0.0)), f64::INFINITY);
        assert_eq!(inner_dilatation_p(c(2.0, 0.0), c(1.0, 0.0), 2.0), 3.0);
        assert_eq!(inner_dilatation_p(c(2.0, 0.0), c(1.0, 0.0), 1.5), 3.0);
        for p in [1.0, 1.3, 2.0, 3.7] {
            assert_eq!(inner_dilatation_p(c(1.0, 0.0), c(0.0, 0.0), p), 1.0);
        }
        assert_eq!(inner_dilatation_p(c(0.0, 0.0), c(0.0, 0.0), 1.5), 1.0);
        assert_eq!(inner_dilatation_p(c(0.0, 1.0), c(1.0, 0.0), 1.5), f64::INFINITY);
    }

    #[test]
    fn affine_map_dilatation() {
        for k in [0.0, 0.1, 0.5, 0.9] {
            // f = z + k conj(z) has f_z = 1, f_z̄ = k
            assert!((map_dilatation(c(1.0, 0.0), c(k, 0.0)) - (1.0 + k) / (1.0 - k)).abs() < 1e-14);
        }
    }

    #[test]
    fn inner_two_equals_map_dilatation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let fz = Complex64::from_polar(rng.gen_range(0.01..3.0), rng.gen_range(0.0..6.3));
            let fzbar = Complex64::from_polar(rng.gen_range(0.0..3.0), rng.gen_range(0.0..6.3));
            assert_eq!(inner_dilatation_p(fz, fzbar, 2.0), map_dilatation(fz, fzbar));
        }
    }

    #[test]
    fn effective_coefficient() {
        let mu = c(0.2, 0.1);
        assert_eq!(effective_single_coefficient(mu, c(0.0, 0.0), c(0.3, 0.9)), mu);
        let e =
            effective_single_coefficient(c(0.2, 0.0), c(0.3, 0.0), Complex64::from_polar(1.0, std::f64::consts::PI));
        assert!((e - c(-0.1, 0.0)).norm() < 1e-15);
        let e = effective_single_coefficient(c(0.2, 0.0), c(0.3, 0.0), c(1.0, 0.0));
        assert!(e.norm() <= 0.5 + 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let mu = Complex64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..6.3));
            let nu = Complex64::from_polar(rng.gen_range(0.0..0.49), rng.gen_range(0.0..6.3));
            let ratio = Complex64::from_polar(1.0, rng.gen_range(0.0..6.3));
            let e = effective_single_coefficient(mu, nu, ratio);
            assert!(maximal_dilatation(e, c(0.0, 0.0)) <= maximal_dilatation(mu, nu) * (1.0 + 1e-12));
        }
    }
}
