use causa::parallel::refute_placebo_parallel;
use causa::synth;
use causa_core::estimators::{EstimatorKind, StratumWeighting};
use causa_core::refutation::{refute_placebo, PlaceboMode};

#[test]
fn parallel_matches_serial_bit_for_bit() {
    let ds = synth::confounded(300, 5.0, 9);
    let kinds = [
        EstimatorKind::DiffInMeans,
        EstimatorKind::CovariateAdjustment { covariates: vec!["x".into()] },
        EstimatorKind::PsmStratified { covariates: vec!["x".into()], n_strata: 5, weighting: StratumWeighting::default() },
    ];
    for kind in &kinds {
        for mode in [PlaceboMode::Permute, PlaceboMode::Bernoulli] {
            let a = refute_placebo(&ds, kind, 40, 17, mode).unwrap();
            let b = refute_placebo_parallel(&ds, kind, 40, 17, mode).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn parallel_rejects_single_permutation() {
    let ds = synth::randomized(50, 1.0, 1.0, 1);
    assert!(refute_placebo_parallel(&ds, &EstimatorKind::DiffInMeans, 1, 0, PlaceboMode::Permute).is_err());
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
    #[test]
    fn parallel_equals_serial_for_any_seed(seed in proptest::prelude::any::<u64>(), b in 2usize..30) {
        let ds = synth::randomized(60, 2.0, 1.0, seed);
        let a = refute_placebo(&ds, &EstimatorKind::DiffInMeans, b, seed, PlaceboMode::Permute).unwrap();
        let p = refute_placebo_parallel(&ds, &EstimatorKind::DiffInMeans, b, seed, PlaceboMode::Permute).unwrap();
        proptest::prop_assert_eq!(a, p);
    }
}
