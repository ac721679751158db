use sigclust::simharness::{
    generate_scenario_sample, power_curve, run_grid, MethodKind, ScenarioSpec, SignalMode,
};

fn row_variance(row: &[f64]) -> f64 {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn pure_noise_has_unit_variance() {
    let spec = ScenarioSpec::null(500, 200, 1.0, 0).with_seed(1);
    let s = generate_scenario_sample(&spec, 0).unwrap();
    let all = s.data.values().as_slice().to_vec();
    let v = row_variance(&all);
    assert!((0.97..=1.03).contains(&v), "{v}");
}

#[test]
fn first_coordinate_signal_is_bimodal() {
    let spec = ScenarioSpec::null(20, 400, 1.0, 0)
        .with_signal(SignalMode::FirstCoordinate, 20.0)
        .with_seed(2);
    let s = generate_scenario_sample(&spec, 3).unwrap();
    let first = s.data.row(0);
    for (x, &c) in first.iter().zip(&s.components) {
        let center = if c == 2 { 20.0 } else { 0.0 };
        assert!((x - center).abs() < 6.0);
    }
    let shifted = s.components.iter().filter(|&&c| c == 2).count();
    assert!((150..=250).contains(&shifted), "{shifted}");
    for i in 1..20 {
        let v = row_variance(&s.data.row(i));
        assert!((0.8..=1.2).contains(&v), "row {i}: {v}");
    }
}

#[test]
fn spikes_scale_leading_rows() {
    let spec = ScenarioSpec::null(10, 2000, 50.0, 2).with_seed(4);
    let s = generate_scenario_sample(&spec, 0).unwrap();
    for i in 0..2 {
        let v = row_variance(&s.data.row(i));
        assert!((45.0..=55.0).contains(&v), "{v}");
    }
}

#[test]
fn samples_are_reproducible_and_reps_differ() {
    let spec = ScenarioSpec::null(30, 10, 5.0, 1).with_seed(8);
    let a = generate_scenario_sample(&spec, 2).unwrap();
    let b = generate_scenario_sample(&spec, 2).unwrap();
    let c = generate_scenario_sample(&spec, 3).unwrap();
    assert_eq!(a.data, b.data);
    assert_ne!(a.data, c.data);
}

#[test]
fn grid_is_deterministic_and_well_formed() {
    let spec = ScenarioSpec::null(40, 12, 10.0, 1)
        .with_reps(4, 100)
        .with_seed(6)
        .with_methods(&[MethodKind::True, MethodKind::Soft, MethodKind::Combined]);
    let a = run_grid(std::slice::from_ref(&spec)).unwrap();
    let b = run_grid(&[spec]).unwrap();
    assert_eq!(a, b);
    for c in &a.scenarios[0].cells {
        assert!(c.p5_count <= c.p10_count && c.p10_count <= c.reps);
        assert_eq!(c.rep_pvalues.len(), c.reps);
    }
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn sample_method_is_conservative_under_identity() {
    let spec = ScenarioSpec::null(200, 50, 1.0, 1)
        .with_reps(50, 100)
        .with_seed(21)
        .with_methods(&[MethodKind::Sample]);
    let grid = run_grid(&[spec]).unwrap();
    let cell = &grid.scenarios[0].cells[0];
    assert_eq!(cell.reps, 50);
    assert!(cell.p5_count <= 5, "{cell:?}");
}

#[test]
fn rep_failures_become_warnings() {
    // Soft on a pure-noise scenario routinely hits the flat fallback; it must
    // never abort the grid.
    let spec = ScenarioSpec::null(50, 10, 1.0, 0)
        .with_reps(3, 100)
        .with_methods(&[MethodKind::Soft]);
    let grid = run_grid(&[spec]).unwrap();
    assert_eq!(grid.scenarios[0].cells[0].reps, 3);
}

#[test]
fn combined_beats_sample_at_moderate_signal() {
    let base = ScenarioSpec::null(1000, 100, 100.0, 1)
        .with_signal(SignalMode::AllCoordinates, 0.0)
        .with_reps(20, 100)
        .with_seed(31)
        .with_methods(&[MethodKind::Sample, MethodKind::Combined]);
    let curve = power_curve(&base, &[0.4]).unwrap();
    let combined = curve
        .point(0.4, MethodKind::Combined)
        .unwrap()
        .rejection_rate;
    let sample = curve.point(0.4, MethodKind::Sample).unwrap().rejection_rate;
    assert!(combined > sample, "combined {combined} vs sample {sample}");
    let ecdf = curve.ecdf_csv();
    assert_eq!(ecdf.lines().count(), 1 + 2 * 20);
}
