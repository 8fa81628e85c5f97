use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;

use kerrlab::angular::spheroidal_mode;
use kerrlab::grid::RadialGrid;
use kerrlab::norms::{
    classify_strichartz_pair, le_norm, lew_dual_norm, lew_energy_constant, spacetime_pairing, SpacetimeField,
    StrichartzClass,
};
use kerrlab::BlackHoleParams;

type Q = Ratio<i64>;

// Exponents given by reciprocals; a zero reciprocal stands for infinity.
fn oracle(rho: Q, ip: Q, iq: Q) -> StrichartzClass {
    let half = Q::new(1, 2);
    if ip >= half || ip < Q::from(0) || iq > Q::from(1) || iq < Q::from(0) {
        return StrichartzClass::Invalid;
    }
    if ip + iq * 3 != Q::new(3, 2) - rho {
        return StrichartzClass::Invalid;
    }
    match (ip + iq).cmp(&half) {
        std::cmp::Ordering::Greater => StrichartzClass::Invalid,
        std::cmp::Ordering::Equal => StrichartzClass::Sharp,
        std::cmp::Ordering::Less => StrichartzClass::Nonsharp,
    }
}

fn to_exponent(recip: Q) -> f64 {
    if recip == Q::from(0) {
        f64::INFINITY
    } else {
        *recip.denom() as f64 / *recip.numer() as f64
    }
}

fn ratio(max_den: i64, max_num: i64) -> impl Strategy<Value = Q> {
    (1..=max_den, 0..=max_num).prop_map(|(d, n)| Q::new(n, d))
}

fn triple() -> impl Strategy<Value = (Q, Q, Q)> {
    (ratio(12, 7), ratio(12, 13), 0u8..4, ratio(24, 5), any::<bool>()).prop_map(|(ip, iq, mode, shift, neg)| {
        let ip = ip.min(Q::new(7, 12));
        let iq = match mode {
            // Lands on the sharp line when admissible.
            0 => (Q::new(1, 2) - ip).max(Q::from(0)),
            _ => iq,
        };
        let mut rho = Q::new(3, 2) - ip - iq * 3;
        if mode == 3 {
            rho += if neg { -shift } else { shift };
        }
        (rho, ip, iq)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn classification_matches_rational_oracle((rho, ip, iq) in triple()) {
        let want = oracle(rho, ip, iq);
        let rho_f = *rho.numer() as f64 / *rho.denom() as f64;
        let got = classify_strichartz_pair(rho_f, to_exponent(ip), to_exponent(iq));
        prop_assert_eq!(got, want, "rho = {}, 1/p = {}, 1/q = {}", rho, ip, iq);
    }
}

fn bump_field(times: RadialGrid, grid: RadialGrid, bumps: &[(f64, f64, f64, f64)]) -> SpacetimeField {
    let bumps = bumps.to_vec();
    SpacetimeField::from_fn(times, grid, spheroidal_mode(0, 0, 0.0).unwrap(), move |t, r| {
        bumps.iter().fold(Complex64::new(0.0, 0.0), |acc, &(c, w, amp, freq)| {
            let y = (r - c) / w;
            acc + Complex64::from_polar(amp * (-y * y).exp(), freq * t)
        })
    })
}

fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((2.5f64..60.0, 0.3f64..6.0, -2.0f64..2.0, -3.0f64..3.0), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pairing_is_bounded_by_dual_norms(f in bumps(), u in bumps()) {
        let times = RadialGrid::new(0.0, 2.0, 17).unwrap();
        let grid = RadialGrid::new(2.2, 64.0, 1237).unwrap();
        let p = BlackHoleParams::new(1.0, 0.1).unwrap();
        let (ff, uu) = (bump_field(times, grid, &f), bump_field(times, grid, &u));
        let pairing = spacetime_pairing(&ff, &uu).unwrap().norm();
        let bound = lew_dual_norm(&ff, &p).value * le_norm(&uu, &p).value;
        prop_assert!(pairing <= bound * (1.0 + 1e-12) + 1e-300, "{pairing} > {bound}");
    }

    #[test]
    fn local_energy_constant_is_scale_free(u in bumps(), s in 0.1f64..10.0) {
        let times = RadialGrid::new(0.0, 2.0, 17).unwrap();
        let grid = RadialGrid::new(2.2, 64.0, 1237).unwrap();
        let p = BlackHoleParams::new(1.0, 0.1).unwrap();
        let scaled: Vec<_> = u.iter().map(|&(c, w, a, f)| (c, w, a * s, f)).collect();
        let c1 = lew_energy_constant(&bump_field(times, grid, &u), &p);
        let c2 = lew_energy_constant(&bump_field(times, grid, &scaled), &p);
        prop_assert!(c1.is_finite() && c1 >= 0.0);
        prop_assert!((c1 - c2).abs() <= 1e-9 * c1.max(1e-300));
    }
}

#[test]
fn local_energy_sanity_constant() {
    let times = RadialGrid::new(0.0, 4.0, 17).unwrap();
    let grid = RadialGrid::new(2.2, 64.0, 1237).unwrap();
    let p = BlackHoleParams::new(1.0, 0.1).unwrap();
    let mut worst: f64 = 0.0;
    for (c, w) in [(3.0, 0.5), (6.0, 1.0), (12.0, 2.0), (30.0, 4.0), (50.0, 3.0)] {
        let field = bump_field(times, grid, &[(c, w, 1.0, 1.0)]);
        worst = worst.max(lew_energy_constant(&field, &p));
    }
    println!("lew_norm <= C sup E^(1/2) T^(1/2) with C = {worst:.4}");
    assert!(worst.is_finite() && worst > 0.0 && worst < 10.0, "{worst}");
}
