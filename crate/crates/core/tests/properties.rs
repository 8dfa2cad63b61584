mod common;

use proptest::prelude::*;

use common::*;

proptest! {
    #[test]
    fn pythagorean_identity((d, r) in dims(40), scale in -6i32..6, seed in any::<u64>()) {
        pythagorean(d, r, scale, seed)?;
    }

    #[test]
    fn subspace_distance_properties(
        (d, ra) in dims(16),
        rb_frac in 0.0f64..1.0,
        tilt in prop_oneof![Just(1.0), 1e-6f64..1.0],
        seed in any::<u64>(),
    ) {
        let rb = 1 + ((d - 1) as f64 * rb_frac) as usize;
        subspace_distance_oracle(d, ra, rb, tilt, seed)?;
    }

    #[test]
    fn median_agrees_with_sorting(values in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        median_matches_sort(&values)?;
    }

    #[test]
    fn median_with_ties(values in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 0.5, 2.0]), 1..50)) {
        median_matches_sort(&values)?;
    }

    #[test]
    fn spectrum_tables_are_sorted(
        d in 1usize..12,
        b in 1usize..20,
        batches in 1usize..6,
        rank in 1usize..12,
        seed in any::<u64>(),
    ) {
        spectrum_rows_monotone(d, b, batches, rank, seed)?;
    }

    #[test]
    fn generator_outlier_count(n in 1usize..400, permille in 0usize..=500, seed in any::<u64>()) {
        mask_count(n, permille, seed)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn classic_consensus_is_a_recount(n in 10usize..60, r in 1usize..4, outliers in 0usize..30, seed in any::<u64>()) {
        consensus_recount(n, r, outliers, seed)?;
    }
}

#[test]
fn sweep_bytes_do_not_depend_on_threads() {
    let spec = determinism_spec();
    let one = sweep_bytes(&spec, 1);
    let four = sweep_bytes(&spec, 4);
    assert_eq!(one, four);
    let text = String::from_utf8(one).unwrap();
    assert_eq!(text.lines().count(), 1 + spec.record_count());
}
