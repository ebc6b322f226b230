//! Pre-registered statistical checks of the simulator: one run each at the
//! default seed, significance 0.01.

use coalsim_core::rates::{build_rate_table, Model};
use coalsim_core::sim::SeedPolicy;
use coalsim_core::verify::{self, DEFAULT_STAT_SEED};

#[test]
fn statistical_suite_passes_at_default_seed() {
    for r in verify::statistical_suite(false, SeedPolicy::new(DEFAULT_STAT_SEED)) {
        assert!(r.passed, "{}: {}", r.name, r.detail);
    }
}

#[test]
fn restriction_holds_for_a_stays_infinite_model() {
    let model = Model::beta(1.5, 1.0).unwrap();
    let out = verify::restriction_chi_square(&model, 5, 3, 0.5, 20_000, SeedPolicy::new(DEFAULT_STAT_SEED).derive(1)).unwrap();
    assert!(out.passes(), "p = {}", out.p_value);
}

#[test]
fn kingman_holding_time() {
    let table = build_rate_table(&Model::Kingman, 50).unwrap();
    // rate m(m-1)/2
    assert!((table.row_total(50).unwrap() - 1225.0).abs() < 1e-9);
    let z = verify::holding_time_z(&table, 50, 20_000, SeedPolicy::new(DEFAULT_STAT_SEED).derive(2)).unwrap();
    assert!(z.abs() < 4.0, "z = {z}");
}
