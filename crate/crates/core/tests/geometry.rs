use std::f64::consts::PI;

use nalgebra::Matrix4;
use proptest::prelude::*;

use kerrlab::geometry::{
    bl_inverse_metric, bl_metric, delta, horizon_radii, identity_defect, kerr_star_jacobian, kerr_star_metric,
    tortoise_coordinate, BoyerLindquistPoint, KerrStarPoint, MuProfile, PHI, R, T, THETA,
};
use kerrlab::BlackHoleParams;

fn params(a: f64) -> BlackHoleParams {
    BlackHoleParams::new(1.0, a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn inverse_signature_and_symmetry(a in 0.0f64..=0.3, x in 0.0f64..1.0, theta in 1e-3f64..(PI - 1e-3)) {
        let p = params(a);
        let (_, rp) = horizon_radii(&p).unwrap();
        let r = rp + 1e-3 + (50.0 - rp) * x * x;
        let pt = BoyerLindquistPoint::at(r, theta);
        let g = bl_metric(&pt, &p).unwrap();
        let h = bl_inverse_metric(&pt, &p).unwrap();
        prop_assert!(identity_defect(&g, &h) < 1e-10);
        prop_assert_eq!(g.negative_eigenvalues(), 1);
        for i in 0..4 {
            for j in 0..4 {
                prop_assert_eq!(g.get(i, j), g.get(j, i));
                prop_assert_eq!(h.get(i, j), h.get(j, i));
            }
        }
    }

    #[test]
    fn kerr_star_inverse_through_the_chart(a in 0.0f64..=0.3, x in 0.0f64..1.0, theta in 1e-3f64..(PI - 1e-3)) {
        let p = params(a);
        let profile = MuProfile::new(&p).unwrap();
        let (_, rp) = horizon_radii(&p).unwrap();
        let r = rp + 1e-3 + (50.0 - rp) * x * x;
        let star = kerr_star_metric(&KerrStarPoint { v: 0.0, r, phi: 0.0, theta }, &profile).unwrap();
        let h = bl_inverse_metric(&BoyerLindquistPoint::at(r, theta), &p).unwrap().matrix();
        let j_inv = kerr_star_jacobian(r, &profile).try_inverse().unwrap();
        let h_star = j_inv * h * j_inv.transpose();
        prop_assert!((star.matrix() * h_star - Matrix4::identity()).abs().max() < 1e-10);
        prop_assert_eq!(star.negative_eigenvalues(), 1);
    }

    #[test]
    fn horizons_are_roots(a in 0.0f64..=0.3) {
        let p = params(a);
        let (rm, rp) = horizon_radii(&p).unwrap();
        prop_assert!(delta(rm, &p).abs() <= 1e-13);
        prop_assert!(delta(rp, &p).abs() <= 1e-13);
        prop_assert!(rm <= rp);
    }
}

#[test]
fn tortoise_matches_schwarzschild_closed_form() {
    let p = params(0.0);
    let closed = |r: f64| r + 2.0 * (r / 2.0 - 1.0).ln();
    let origin = closed(3.0);
    let mut r = 2.1;
    while r <= 50.0 {
        let got = tortoise_coordinate(r, &p).unwrap();
        assert!((got - (closed(r) - origin)).abs() < 1e-10, "r = {r}");
        r += 0.05;
    }
}

// Chart map (v~, r, phi+, theta) -> (t, r, phi, theta):
// t = v~ + mu(r) - r*(r), phi = phi+ - a \int dr / Delta.
fn chart_offsets(r: f64, profile: &MuProfile, p: &BlackHoleParams) -> (f64, f64) {
    let (rm, rp) = horizon_radii(p).unwrap();
    let a = p.spin();
    let t_shift = profile.value(r).unwrap() - tortoise_coordinate(r, p).unwrap();
    let phi_shift = if a == 0.0 { 0.0 } else { -a / (rp - rm) * ((r - rp) / (r - rm)).ln() };
    (t_shift, phi_shift)
}

fn fd_jacobian(r: f64, profile: &MuProfile, p: &BlackHoleParams) -> Matrix4<f64> {
    let h = 1e-5 * r;
    let (tp, pp) = chart_offsets(r + h, profile, p);
    let (tm, pm) = chart_offsets(r - h, profile, p);
    let mut j = Matrix4::identity();
    j[(T, R)] = (tp - tm) / (2.0 * h);
    j[(PHI, R)] = (pp - pm) / (2.0 * h);
    j
}

#[test]
fn kerr_star_metric_is_the_pullback() {
    for a in [0.0, 0.1, 0.3] {
        let p = params(a);
        let profile = MuProfile::new(&p).unwrap();
        for &r in &[2.3, 2.4, 2.6, 3.5, 8.0] {
            for &theta in &[0.4, 1.2, 2.5] {
                let g = bl_metric(&BoyerLindquistPoint::at(r, theta), &p).unwrap().matrix();
                let star = kerr_star_metric(&KerrStarPoint { v: 0.0, r, phi: 0.0, theta }, &profile).unwrap().matrix();
                let j_fd = fd_jacobian(r, &profile, &p);
                let j_lib = kerr_star_jacobian(r, &profile);
                let scale = g.abs().max();
                let pulled_fd = j_fd.transpose() * g * j_fd;
                let pulled_lib = j_lib.transpose() * g * j_lib;
                assert!((pulled_fd - star).abs().max() < 1e-7 * scale, "a={a} r={r} theta={theta}");
                assert!((pulled_lib - star).abs().max() < 1e-12 * scale, "a={a} r={r} theta={theta}");
            }
        }
    }
}

#[test]
fn kerr_star_regular_across_the_horizon() {
    let p = params(0.2);
    let profile = MuProfile::new(&p).unwrap();
    let (_, rp) = horizon_radii(&p).unwrap();
    for k in -10..=10 {
        let r = rp + 0.01 * k as f64;
        let g = kerr_star_metric(&KerrStarPoint { v: 0.0, r, phi: 0.0, theta: 1.0 }, &profile).unwrap();
        assert!(g.matrix().iter().all(|x| x.is_finite()));
        assert_eq!(g.negative_eigenvalues(), 1, "r = {r}");
        assert!(g.get(THETA, THETA) > 0.0);
    }
}

#[test]
fn boyer_lindquist_rejects_horizon_and_axis() {
    let p = params(0.1);
    let (_, rp) = horizon_radii(&p).unwrap();
    assert!(bl_metric(&BoyerLindquistPoint::at(rp, 1.0), &p).is_err());
    assert!(bl_metric(&BoyerLindquistPoint::at(4.0, 0.0), &p).is_err());
}
