use nalgebra::DMatrix;
use proptest::prelude::*;
use sigclust::engine::{empirical_p_value, gaussian_p_value, mean_sd, ObservedMode, SpectrumUsed};
use sigclust::spectrum::NullSpectrum;
use sigclust::{
    estimate_noise, estimation_spectrum, hard_threshold, run_test, simulate_null_cis,
    simulate_null_cis_combined, theoretical_ci, DataMatrix, Method, SigClustError, TestConfig,
};

fn heavy_tailed(d: usize, n: usize) -> DataMatrix {
    // Mostly small values with a few large ones: the MAD sees only the bulk,
    // the variance sees the tails.
    DataMatrix::new(DMatrix::from_fn(d, n, |i, j| {
        let k = (j * 7 + i * 3) % n;
        match k % 10 {
            0 => 25.0 + i as f64,
            5 => -25.0 - j as f64 * 0.1,
            r => (r as f64 - 5.0) * 0.1,
        }
    }))
    .unwrap()
}

fn two_blobs(d: usize, n: usize, gap: f64) -> DataMatrix {
    DataMatrix::new(DMatrix::from_fn(d, n, |i, j| {
        let jitter = (((i * 31 + j * 17) % 13) as f64 - 6.0) * 0.05;
        if j < n / 2 {
            jitter
        } else {
            gap + jitter
        }
    }))
    .unwrap()
}

#[test]
fn null_mean_tracks_theoretical_index() {
    let mut lambda = vec![1.0; 1000];
    lambda[0] = 100.0;
    let spec = NullSpectrum::truth(lambda.clone()).unwrap();
    let config = TestConfig::new(Method::Sample).with_n_sim(100).with_seed(3);
    let cis = simulate_null_cis(&spec, 100, &config).unwrap();
    let (mean, _) = mean_sd(&cis);
    let tci = theoretical_ci(&lambda).unwrap();
    assert!((mean - tci).abs() < 0.03, "mean {mean} vs tci {tci}");
}

#[test]
fn empirical_p_floor_when_observed_is_smallest() {
    let x = two_blobs(3, 20, 50.0);
    let config = TestConfig::new(Method::Hard).with_n_sim(999).with_seed(1);
    let r = run_test(&x, &config).unwrap();
    assert_eq!(r.p_empirical, 1.0 / 1000.0);
    assert!(r.null_cis.iter().all(|&c| c > r.ci_observed));
}

#[test]
fn gaussian_p_at_the_mean_is_half() {
    assert_eq!(gaussian_p_value(0.7, 0.7, 0.1), 0.5);
    assert_eq!(empirical_p_value(0.0, &[0.5; 9]), 0.1);
    assert_eq!(empirical_p_value(1.0, &[0.5; 9]), 1.0);
}

#[test]
fn sample_and_hard_agree_when_nothing_is_floored() {
    let x = heavy_tailed(2, 40);
    let base = estimation_spectrum(&x);
    let noise = estimate_noise(&x).unwrap();
    assert!(base.eigenvalues.iter().all(|&l| l >= noise.sigma_n_sq));
    assert_eq!(hard_threshold(&base, &noise).eigenvalues, base.eigenvalues);

    let sample = run_test(
        &x,
        &TestConfig::new(Method::Sample).with_n_sim(100).with_seed(9),
    )
    .unwrap();
    let hard = run_test(
        &x,
        &TestConfig::new(Method::Hard).with_n_sim(100).with_seed(9),
    )
    .unwrap();
    assert_eq!(sample.null_cis, hard.null_cis);
    assert_eq!(sample.p_empirical, hard.p_empirical);
}

#[test]
fn combined_is_min_of_single_arm_reruns() {
    let x = DataMatrix::new(DMatrix::from_fn(60, 15, |i, j| {
        ((i * 13 + j * 7) % 11) as f64 - 5.0 + if i == 0 { j as f64 } else { 0.0 }
    }))
    .unwrap();
    let config = TestConfig::new(Method::Combined)
        .with_n_sim(120)
        .with_seed(44);
    let r = run_test(&x, &config).unwrap();
    let SpectrumUsed::Combined { hard, soft } = &r.spectrum_used else {
        panic!("combined run must report both spectra");
    };
    let h = simulate_null_cis(hard, 15, &config).unwrap();
    let s = simulate_null_cis(soft, 15, &config).unwrap();
    for k in 0..120 {
        assert_eq!(r.null_cis[k], h[k].min(s[k]), "replication {k}");
    }
    let again = simulate_null_cis_combined(hard, soft, 15, &config).unwrap();
    assert_eq!(again, r.null_cis);
}

#[test]
fn combined_rejects_mismatched_spectra() {
    let a = NullSpectrum::truth(vec![1.0; 3]).unwrap();
    let b = NullSpectrum::truth(vec![1.0; 4]).unwrap();
    let config = TestConfig::new(Method::Combined).with_n_sim(100);
    assert!(matches!(
        simulate_null_cis_combined(&a, &b, 5, &config),
        Err(SigClustError::InvalidSpectra(_))
    ));
}

#[test]
fn known_labels_mode() {
    let x = two_blobs(4, 12, 8.0);
    let labels: Vec<u8> = (0..12).map(|j| if j < 6 { 1 } else { 2 }).collect();
    let config = TestConfig::new(Method::Soft)
        .with_n_sim(100)
        .with_labels(labels);
    let r = run_test(&x, &config).unwrap();
    assert_eq!(r.observed_mode, ObservedMode::KnownLabels);
    assert_eq!(r.observed_cluster_sizes, (6, 6));

    let bad = TestConfig::new(Method::Soft)
        .with_n_sim(100)
        .with_labels(vec![1, 2]);
    assert!(matches!(
        run_test(&x, &bad),
        Err(SigClustError::InvalidLabels(_))
    ));
}

#[test]
fn true_method_requires_matching_dimension() {
    let x = two_blobs(4, 12, 8.0);
    let config = TestConfig::new(Method::TrueSpectrum(vec![1.0; 3])).with_n_sim(100);
    assert!(matches!(
        run_test(&x, &config),
        Err(SigClustError::InvalidSpectra(_))
    ));
}

#[test]
fn degenerate_inputs_propagate() {
    let x = DataMatrix::new(DMatrix::from_element(3, 6, 1.0)).unwrap();
    let config = TestConfig::new(Method::Hard).with_n_sim(100);
    assert!(matches!(
        run_test(&x, &config),
        Err(SigClustError::DegenerateData(_))
    ));
}

#[test]
fn report_is_independent_of_worker_count() {
    let x = heavy_tailed(30, 12);
    let base = TestConfig::new(Method::Combined)
        .with_n_sim(150)
        .with_seed(5);
    let mut one = run_test(&x, &base.clone().with_workers(1)).unwrap();
    let mut many = run_test(&x, &base.with_workers(8)).unwrap();
    one.timing_seconds = 0.0;
    many.timing_seconds = 0.0;
    assert_eq!(one, many);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn p_values_stay_in_range(seed in any::<u64>(), gap in 0.0f64..3.0) {
        let x = two_blobs(5, 10, gap);
        let r = run_test(&x, &TestConfig::new(Method::Sample).with_n_sim(100).with_seed(seed)).unwrap();
        prop_assert!(r.p_empirical >= 1.0 / 101.0 && r.p_empirical <= 1.0);
        prop_assert!(r.p_gaussian >= 0.0 && r.p_gaussian <= 1.0);
        prop_assert!(r.null_cis.iter().all(|c| (0.0..=1.0).contains(c)));
        let count = r.null_cis.iter().filter(|&&c| c <= r.ci_observed).count();
        prop_assert_eq!(r.p_empirical, (1 + count) as f64 / 101.0);
    }
}
