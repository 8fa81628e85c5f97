use proptest::prelude::*;

use kerrlab::geodesics::{
    equatorial_launch, geodesic_flow, r_a_eval, rct_margin, shoot_trapped_ratio, trapped_radius, trapping_residuals,
    FlowWindow, PhasePoint, TrappingThresholds,
};
use kerrlab::BlackHoleParams;

fn params(a: f64) -> BlackHoleParams {
    BlackHoleParams::new(1.0, a).unwrap()
}

fn inclined_start(p: &BlackHoleParams) -> PhasePoint {
    PhasePoint { t: 0.0, r: 5.0, phi: 0.0, theta: 1.1, tau: 1.0, xi: 0.3, azimuthal: 2.5, polar: 0.0 }
        .with_null_polar(p)
        .unwrap()
}

fn relative_symbol_drift(step: f64) -> (f64, f64, f64) {
    let p = params(0.2);
    let start = inclined_start(&p);
    let window = FlowWindow { horizon_margin: 0.05, r_max: 1e4 };
    let trace = geodesic_flow(&start, &p, 100.0, step, window).unwrap();
    assert!(trace.exit.is_none(), "{:?}", trace.exit);
    let d = trace.diagnostics;
    let scale = start.covector_norm2();
    (d.max_symbol_drift / scale, d.max_tau_drift, d.max_phi_drift)
}

#[test]
fn constants_of_motion_and_fourth_order() {
    let (coarse, tau, phi) = relative_symbol_drift(0.02);
    let (fine, _, _) = relative_symbol_drift(0.01);
    assert!(coarse < 1e-10, "{coarse:e}");
    assert_eq!((tau, phi), (0.0, 0.0));
    let ratio = coarse / fine;
    assert!((10.0..=24.0).contains(&ratio), "halving ratio {ratio}");
}

// The a^2 rate holds only at Phi = 0; the term linear in a*Phi in R_a shifts
// the root by O(a |Phi / tau|) otherwise.
#[test]
fn trapped_radius_is_continuous_in_spin() {
    let (mut quadratic, mut linear): (f64, f64) = (0.0, 0.0);
    for i in 1..=30 {
        let a = 0.01 * i as f64;
        let p = params(a);
        quadratic = quadratic.max((trapped_radius(1.0, 0.0, &p).unwrap() - 3.0).abs() / (a * a));
        for q in [-4.0, -2.0, -0.5, 0.5, 2.0, 4.0] {
            let ra = trapped_radius(1.0, q, &p).unwrap();
            linear = linear.max((ra - 3.0).abs() / a);
        }
    }
    println!("Phi = 0: max |r_a - 3M| / a^2 = {quadratic:.4}; |Phi| <= 4|tau|: max |r_a - 3M| / a = {linear:.4}");
    assert!(quadratic < 2.0, "{quadratic}");
    assert!(linear < 5.0, "{linear}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn newton_residual_is_small(a in 0.0f64..=0.3, tau in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0], u in -1.0f64..=1.0) {
        let p = params(a);
        let big_phi = 4.0 * tau.abs() * u;
        let ra = trapped_radius(tau, big_phi, &p).unwrap();
        prop_assert!((2.5..=3.5).contains(&ra));
        prop_assert!(r_a_eval(ra, tau, big_phi, &p).abs() <= 1e-12 * tau * tau);
    }

    #[test]
    fn trapped_radius_is_homogeneous(a in 0.0f64..=0.3, q in -4.0f64..=4.0, s in 0.01f64..100.0) {
        let p = params(a);
        let base = trapped_radius(1.0, q, &p).unwrap();
        let scaled = trapped_radius(s, s * q, &p).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-12);
    }
}

#[test]
fn shooting_finds_the_trapped_orbit() {
    let p = params(0.1);
    for q in [-3.0, 0.0, 3.0] {
        let r0 = trapped_radius(1.0, q, &p).unwrap();
        let found = shoot_trapped_ratio(r0, 1.0, (q - 0.5, q + 0.5), &p, 20.0, 0.1).unwrap();
        assert!((found - q).abs() < 1e-5, "q = {q}, found {found}");
        assert!(found.abs() <= 4.0);

        let start = equatorial_launch(r0, 1.0, found, &p).unwrap();
        let trace = geodesic_flow(&start, &p, 5.0, 0.01, FlowWindow::default()).unwrap();
        let res = trapping_residuals(&trace, &p);
        assert!(res.is_trapped(&p, &TrappingThresholds::default()), "{res:?}");
        for (_, s) in &trace.samples {
            assert!(rct_margin(s.r, s.theta, &p) >= 0.0);
            assert!(s.azimuthal.abs() <= 4.0 * s.tau.abs());
        }
    }
}
