use proptest::prelude::*;

use coalsim_core::bell::{bell_number, lah, partial_bell, stirling2};
use coalsim_core::limits::{c_limit, gen_fun, spectrum_limits};
use coalsim_core::rates::{build_rate_table, BetaParams, GammaMoments, MomentKind, Model};
use coalsim_core::specfun::{ln_gamma, rising};
use coalsim_core::verify;

#[test]
fn full_deterministic_suite_passes() {
    for r in verify::deterministic_suite(false) {
        assert!(r.passed, "{}: {}", r.name, r.detail);
    }
}

#[test]
fn bell_numbers_sum_stirling_rows() {
    for i in 1..=15 {
        let row: u128 = (1..=i).map(|l| stirling2(i, l)).sum();
        assert_eq!(row, bell_number(i));
    }
    assert_eq!(bell_number(10), 115_975);
    assert_eq!(lah(4, 2), 36);
}

proptest! {
    #[test]
    fn partial_bell_at_unit_weights_is_stirling(i in 1usize..12, l in 1usize..12) {
        prop_assume!(l <= i);
        let w = vec![1.0; i];
        let v = partial_bell(i, l, &w).unwrap();
        prop_assert!((v - stirling2(i, l) as f64).abs() <= 1e-9 * v.max(1.0));
    }

    #[test]
    fn partial_bell_at_factorials_is_lah(i in 1usize..12, l in 1usize..12) {
        prop_assume!(l <= i);
        let w: Vec<f64> = (1..=i).map(|j| ln_gamma(j as f64 + 1.0).exp()).collect();
        let v = partial_bell(i, l, &w).unwrap();
        prop_assert!((v / lah(i, l) as f64 - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn rising_splits(x in 0.05f64..20.0, j in 0u64..40, k in 0u64..40) {
        let whole = rising(x, j + k).to_f64().ln();
        let split = rising(x, j).to_f64().ln() + rising(x + j as f64, k).to_f64().ln();
        prop_assert!((whole - split).abs() <= 1e-10 * whole.abs().max(1.0));
    }

    #[test]
    fn rates_are_consistent(a in 0.05f64..3.5, b in 0.1f64..3.0) {
        let table = build_rate_table(&Model::beta(a, b).unwrap(), 60).unwrap();
        prop_assert!(verify::consistency_error(&table).unwrap() <= 1e-10);
    }

    #[test]
    fn falling_second_moment_is_exact(a in 0.05f64..3.5, b in 0.1f64..3.0, n in 2u64..500) {
        prop_assume!((a - 1.0).abs() > 0.05 && (a - 2.0).abs() > 0.05);
        let g = GammaMoments::closed_form(&BetaParams::new(a, b).unwrap(), n).unwrap();
        prop_assert_eq!(g.get(2, MomentKind::Falling), (n * (n - 1)) as f64);
    }

    #[test]
    fn spectrum_is_positive_and_below_c(a in 0.05f64..0.95, b in 0.1f64..3.0, t in 0.0f64..5.0) {
        let m = Model::beta(a, b).unwrap();
        let cs = spectrum_limits(&m, 40, t).unwrap();
        prop_assert!(cs.iter().all(|&v| v >= 0.0));
        prop_assert!(cs.iter().sum::<f64>() <= c_limit(&m, t).unwrap() * (1.0 + 1e-12));
        let series: f64 = cs.iter().enumerate().map(|(i, v)| v * 0.3f64.powi(i as i32 + 1)).sum();
        prop_assert!((gen_fun(&m, t, 0.3).unwrap() - series).abs() <= 1e-12);
    }
}
