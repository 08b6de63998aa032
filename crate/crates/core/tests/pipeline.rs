use std::fs::File;

use triphoton::design::measured_tritter;
use triphoton::distinguishability::{
    delay_limits, hom_curve, threefold_curve, visibility_three, DelayReference,
};
use triphoton::fitting::{
    fit_gaussian, visibility_uncertainty, FitMode, FitOptions, VisibilityConvention,
};
use triphoton::formats::{
    read_scan, read_singles_csv, read_visibility_csv, sidecar_path, write_scan, write_singles_csv,
    write_visibility_csv, ScanMetadata,
};
use triphoton::random::{poisson, substream};
use triphoton::tomography::{
    gauge_invariant_phases, monte_carlo, poisson_records, poisson_singles, predict_visibilities,
    q_vis, reconstruct, synthetic_records, synthetic_singles, wrap_angle, DEFAULT_PAIR_LEVEL,
    DEFAULT_SINGLES_LEVEL,
};
use triphoton::PhotonConfiguration;

fn noisy_dataset(
    seed: u64,
    factor: f64,
) -> (
    triphoton::tomography::SinglesCounts,
    Vec<triphoton::tomography::VisibilityRecord>,
) {
    let m = measured_tritter();
    let mut rng = substream(seed, 0);
    let singles = poisson_singles(
        &synthetic_singles(&m, factor * DEFAULT_SINGLES_LEVEL).unwrap(),
        &mut rng,
    )
    .unwrap();
    let records = poisson_records(
        &synthetic_records(&m, factor * DEFAULT_PAIR_LEVEL).unwrap(),
        &mut rng,
    )
    .unwrap();
    (singles, records)
}

#[test]
fn noisy_reconstruction_stays_close_to_the_source() {
    let m = measured_tritter();
    let (singles, records) = noisy_dataset(4, 1.0);
    let rec = reconstruct(&singles, &records).unwrap();
    let predicted = predict_visibilities(&rec.matrix).unwrap();
    let q = q_vis(&records, &predicted).unwrap();
    assert!(q < 0.05, "Q_vis {q}");

    let (src, got) = (
        gauge_invariant_phases(&m),
        gauge_invariant_phases(&rec.matrix),
    );
    let dev = |sign: f64| {
        src.values()
            .iter()
            .zip(got.values())
            .map(|(a, b)| wrap_angle(a - sign * b).abs())
            .fold(0.0, f64::max)
    };
    assert!(dev(1.0).min(dev(-1.0)) < 0.2);
    for l in 0..3 {
        for i in 0..3 {
            // the source columns are not normalized; the reconstruction is
            let col = m.column_norm(i);
            assert!((m.get(l, i).norm() / col - rec.matrix.get(l, i).norm()).abs() < 0.03);
        }
    }
}

#[test]
fn monte_carlo_is_deterministic_and_shrinks_with_counts() {
    let (singles, records) = noisy_dataset(9, 1.0);
    let a = monte_carlo(&singles, &records, 100, 21).unwrap();
    let b = monte_carlo(&singles, &records, 100, 21).unwrap();
    assert_eq!(a.amplitude_sigma, b.amplitude_sigma);
    assert_eq!(a.phase_sigma, b.phase_sigma);
    assert_eq!(a.failed_resamples, 0);

    let (singles4, records4) = noisy_dataset(9, 16.0);
    let c = monte_carlo(&singles4, &records4, 100, 21).unwrap();
    let ratio = a.phase_sigma.mean() / c.phase_sigma.mean();
    assert!((3.0..5.0).contains(&ratio), "phase sigma ratio {ratio}");
}

#[test]
fn seven_point_threefold_peak() {
    // seven delays and a few hundred counts per point, as in a four-fold scan
    let m = measured_tritter();
    let delays = [-4.5, -3.0, -1.5, 0.0, 1.5, 3.0, 4.5];
    let curve = threefold_curve(&m, [0, 1, 2], [0, 1, 2], 0, &delays, 1.5).unwrap();
    let all = PhotonConfiguration::new([0, 1, 2]).unwrap();
    let (c_inf, c0) = delay_limits(&m, &all, &all, DelayReference::DelayedInput(0)).unwrap();
    let truth = visibility_three(c_inf, c0).unwrap();

    let scale = 300.0 / c_inf;
    let mut rng = substream(12, 0);
    let counts: Vec<f64> = curve
        .values()
        .iter()
        .map(|&c| poisson(scale * c, &mut rng))
        .collect();
    let scan = curve.with_values(&counts).unwrap();
    let fit = fit_gaussian(&scan, FitMode::Peak).unwrap();
    assert!(fit.visibility < 0.0);
    let opts = FitOptions::with_mode(FitMode::Peak);
    let (_, sigma) = visibility_uncertainty(
        &scan,
        &opts,
        VisibilityConvention::ZeroDelayNormalized,
        200,
        5,
    )
    .unwrap();
    let v3 = fit.zero_delay_visibility();
    assert!(v3 < 0.0);
    assert!(
        (v3 - truth).abs() < 3.0 * sigma,
        "V3 {v3} truth {truth} sigma {sigma}"
    );
    assert!(sigma > 0.01 && sigma < 0.3, "sigma {sigma}");
}

#[test]
fn bootstrap_sigma_halves_with_four_times_the_counts() {
    let m = measured_tritter();
    let delays: Vec<f64> = (0..=24).map(|k| -6.0 + 0.5 * k as f64).collect();
    let curve = hom_curve(&m, (0, 1), (0, 2), &delays, 1.5).unwrap();
    let opts = FitOptions::with_mode(FitMode::Dip);
    let sigma_at = |level: f64| {
        let scale = level / curve.values()[0];
        let expected: Vec<f64> = curve.values().iter().map(|c| (scale * c).round()).collect();
        let scan = curve.with_values(&expected).unwrap();
        visibility_uncertainty(
            &scan,
            &opts,
            VisibilityConvention::BaselineNormalized,
            400,
            8,
        )
        .unwrap()
        .1
    };
    let ratio = sigma_at(2500.0) / sigma_at(10000.0);
    assert!((1.5..2.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn files_round_trip_into_the_same_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let (singles, records) = noisy_dataset(2, 1.0);
    let sp = dir.path().join("singles.csv");
    let vp = dir.path().join("visibilities.csv");
    write_singles_csv(File::create(&sp).unwrap(), &singles).unwrap();
    write_visibility_csv(File::create(&vp).unwrap(), &records).unwrap();
    let singles2 = read_singles_csv(File::open(&sp).unwrap()).unwrap();
    let records2 = read_visibility_csv(File::open(&vp).unwrap()).unwrap();
    let a = reconstruct(&singles, &records).unwrap();
    let b = reconstruct(&singles2, &records2).unwrap();
    assert!(a.matrix.max_abs_diff(&b.matrix) < 1e-12);

    let curve = hom_curve(
        &measured_tritter(),
        (0, 2),
        (1, 2),
        &[-3.0, -1.0, 0.0, 1.0, 3.0],
        1.5,
    )
    .unwrap();
    let meta = ScanMetadata {
        inputs: vec![1, 3],
        outputs: vec![2, 3],
        sigma_ps: 1.5,
        integration_time_s: 60.0,
        delayed_input: None,
        counts_level: None,
        seed: None,
    };
    let cp = dir.path().join("scan.csv");
    write_scan(&cp, &curve, &meta).unwrap();
    assert!(sidecar_path(&cp).exists());
    let (back, meta2) = read_scan(&cp).unwrap();
    assert_eq!(meta2.as_ref(), Some(&meta));
    assert_eq!(back.delays(), curve.delays());
    for (x, y) in back.values().iter().zip(curve.values()) {
        assert!((x - y).abs() <= 1e-15 * y.abs());
    }
}
