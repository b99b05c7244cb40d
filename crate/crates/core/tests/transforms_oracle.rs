mod common;

use beltrami_core::transforms::*;
use beltrami_core::GridField;
use num_complex::Complex64;
use proptest::prelude::*;

fn unit_disk(n: usize, l: f64) -> GridField {
    GridField::from_fn(n, l, |z| if z.norm() <= 1.0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
        .unwrap()
}

/// Smooth field with zero integral: the difference of two Gaussians of equal mass.
fn zero_mass_bump(n: usize, l: f64) -> GridField {
    let g = |z: Complex64, c: Complex64, s: f64| (-(z - c).norm_sqr() / (s * s)).exp() / (s * s);
    compact(
        GridField::from_fn(n, l, |z| {
            Complex64::new(g(z, Complex64::new(0.3, 0.1), 0.25) - g(z, Complex64::new(-0.2, -0.3), 0.3), 0.0)
                * Complex64::new(1.0, 0.5)
        })
        .unwrap(),
    )
}

/// Zeroes samples outside `|z| ≤ 1.9`, where the test fields are below round-off.
fn compact(f: GridField) -> GridField {
    f.map_with_point(|z, v| if z.norm() <= 1.9 { v } else { Complex64::new(0.0, 0.0) })
}

fn probe_errors(n: usize, l: f64) -> (f64, f64) {
    let probes = common::disk_probes();
    let chi = unit_disk(n, l);
    let t = cauchy_transform(&chi).unwrap();
    let s = beurling_transform(&chi).unwrap();
    let mut et: f64 = 0.0;
    let mut es: f64 = 0.0;
    for &z in &probes {
        et = et.max((t.interpolate(z) - common::cauchy_of_disk(z)).norm());
        es = es.max((s.interpolate(z) - common::beurling_of_disk(z)).norm());
    }
    (et, es)
}

#[test]
fn oracle_matches_closed_forms() {
    for z in common::disk_probes() {
        let (t, s) = if z.norm() < 1.0 { (z.conj(), Complex64::new(0.0, 0.0)) } else { (1.0 / z, -1.0 / (z * z)) };
        assert!((common::cauchy_of_disk(z) - t).norm() < 1e-10);
        assert!((common::beurling_of_disk(z) - s).norm() < 1e-6);
    }
}

#[test]
fn disk_transforms_converge_under_refinement() {
    let errs: Vec<(f64, f64)> = [128, 256, 512].iter().map(|&n| probe_errors(n, 2.0)).collect();
    for w in errs.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{errs:?}");
    }
    for &(et, es) in &errs {
        assert!(et <= 5e-2 && es <= 5e-2, "{errs:?}");
    }
}

#[test]
fn dbar_inverts_cauchy_on_smooth_fields() {
    let omega = zero_mass_bump(256, 4.0);
    let t = cauchy_transform(&omega).unwrap();
    let back = derivatives(&t).fzbar;
    let rel = back.sub(&omega).unwrap().l2_norm() / omega.l2_norm();
    assert!(rel < 1e-6, "{rel:e}");
}

#[test]
fn beurling_is_derivative_of_cauchy() {
    let omega = zero_mass_bump(256, 4.0);
    let t = cauchy_transform(&omega).unwrap();
    let s = beurling_transform(&omega).unwrap();
    let rel = derivatives(&t).fz.sub(&s).unwrap().l2_norm() / s.l2_norm();
    assert!(rel < 1e-6, "{rel:e}");
}

#[test]
fn support_too_large_is_rejected() {
    let wide =
        GridField::from_fn(
            64,
            2.0,
            |z| if z.norm() <= 1.5 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) },
        )
        .unwrap();
    assert!(cauchy_transform(&wide).is_err());
    assert!(beurling_transform(&wide).is_err());
}

#[test]
fn finite_difference_derivatives_of_polynomial() {
    let f = GridField::from_fn(128, 2.0, |z| z * z + 0.5 * z.conj()).unwrap();
    let d = derivatives_with(&f, DerivativeMode::FiniteDifference);
    for (idx, (a, b)) in d.fz.data().iter().zip(d.fzbar.data()).enumerate() {
        let z = f.point_at(idx);
        assert!((a - 2.0 * z).norm() < 1e-10);
        assert!((b - 0.5).norm() < 1e-10);
    }
}

fn random_zero_mean(values: Vec<(f64, f64)>) -> GridField {
    let mut data: Vec<Complex64> = values.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
    let mean = data.iter().sum::<Complex64>() / data.len() as f64;
    data.iter_mut().for_each(|v| *v -= mean);
    GridField::from_data(16, 1.0, data).unwrap()
}

proptest! {
    #[test]
    fn beurling_is_an_isometry(values in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 256)) {
        let omega = random_zero_mean(values);
        prop_assume!(omega.l2_norm() > 1e-6);
        let s = periodic_beurling(&omega);
        prop_assert!((s.l2_norm() / omega.l2_norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn periodic_transforms_are_linear(
        a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 256),
        b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 256),
        c in -2.0f64..2.0,
    ) {
        let (fa, fb) = (random_zero_mean(a), random_zero_mean(b));
        let combo = fa.add(&fb.scale(Complex64::new(c, 0.0))).unwrap();
        let lhs = periodic_cauchy(&combo);
        let rhs = periodic_cauchy(&fa).add(&periodic_cauchy(&fb).scale(Complex64::new(c, 0.0))).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn dbar_inverts_cauchy_on_random_bumps(
        centers in proptest::collection::vec((-0.8f64..0.8, -0.8f64..0.8, 0.15f64..0.4, -1.0f64..1.0), 2..5),
    ) {
        let field = compact(GridField::from_fn(128, 4.0, |z| {
            centers.iter().map(|&(x, y, s, a)| {
                Complex64::new(a, 0.5 * a) * (-(z - Complex64::new(x, y)).norm_sqr() / (s * s)).exp()
            }).sum()
        }).unwrap());
        let mass = field.integral();
        let g = compact(GridField::from_fn(128, 4.0, |z| Complex64::new((-z.norm_sqr() / 0.09).exp(), 0.0)).unwrap());
        let omega = field.sub(&g.scale(mass / g.integral())).unwrap();
        prop_assume!(omega.l2_norm() > 1e-3);
        let back = derivatives(&cauchy_transform(&omega).unwrap()).fzbar;
        prop_assert!(back.sub(&omega).unwrap().l2_norm() / omega.l2_norm() < 1e-6);
    }
}
