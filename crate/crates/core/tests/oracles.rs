//! Implementation-vs-oracle checks for every numerical stage.

mod common;

use common::*;
use ndarray::Array2;
use sysrisk_core::cars::{cars, cars_with_mode, CarsMode};
use sysrisk_core::ingest::{PanelData, SeriesKind};
use sysrisk_core::returns::compute_returns;
use sysrisk_core::signal::{autocorrelation, cross_correlation};
use sysrisk_core::spectra::{
    correlation, correlation_at, eigen_symmetric, normalized_top_sum, rolling_spectra,
    CorrelationMatrix,
};
use sysrisk_core::ReturnOperator;

#[test]
fn log_returns_match_two_loop_oracle() {
    let mut rng = TestRng::new(11);
    let levels = Array2::from_shape_fn((12, 3), |_| 50.0 + 100.0 * rng.uniform());
    let ids = vec!["a".into(), "b".into(), "c".into()];
    let panel = PanelData::new(
        ids,
        months_from(start(), 12),
        levels.clone(),
        SeriesKind::Price,
    )
    .unwrap();
    let r = compute_returns(&panel, ReturnOperator::LogReturn).unwrap();

    let mut logs = Array2::zeros((12, 3));
    for t in 0..12 {
        for i in 0..3 {
            logs[[t, i]] = levels[[t, i]].ln();
        }
    }
    for t in 1..12 {
        for i in 0..3 {
            let expected = logs[[t, i]] - logs[[t - 1, i]];
            assert!((r.values()[[t - 1, i]] - expected).abs() < 1e-14);
        }
    }
}

#[test]
fn correlation_matches_double_loop() {
    let mut rng = TestRng::new(3);
    let r = random_returns(&mut rng, 12, 3);
    let c = correlation(&r, r.timestamps()[11], 12).unwrap();
    let oracle = naive_correlation(r.values(), 0, 11);
    for i in 0..3 {
        assert_eq!(c.entries()[[i, i]], 1.0);
        for j in 0..3 {
            assert!((c.entries()[[i, j]] - oracle[[i, j]]).abs() < 1e-12);
        }
    }
}

#[test]
fn eigenvalues_match_sturm_oracle_8x8() {
    let mut rng = TestRng::new(8);
    for _ in 0..20 {
        let m = random_correlation(&mut rng, 8);
        let c = CorrelationMatrix::from_entries(m.clone(), start(), 36).unwrap();
        let s = eigen_symmetric(&c).unwrap();
        let oracle = oracle_eigenvalues(&m);
        for (a, b) in s.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }
}

#[test]
fn rolling_matches_per_window_recomputation() {
    let mut rng = TestRng::new(20);
    let r = random_returns(&mut rng, 60, 20);
    let series = rolling_spectra(&r, 24, 4, 1).unwrap();
    assert_eq!(series.values.len(), 60 - 24 + 1);
    for (w, (&month, &value)) in series.timestamps.iter().zip(&series.values).enumerate() {
        assert!(value > 4.0 / 20.0 && value <= 1.0 + 1e-12, "{value}");
        let end = w + 23;
        assert_eq!(month, r.timestamps()[end]);
        let oracle = oracle_eigenvalues(&naive_correlation(r.values(), end + 1 - 24, end));
        let expected: f64 = oracle[..4].iter().sum::<f64>() / 20.0;
        assert!(
            (value - expected).abs() < 1e-9,
            "window {w}: {value} vs {expected}"
        );

        let direct = eigen_symmetric(&correlation_at(&r, end, 24).unwrap()).unwrap();
        assert_eq!(normalized_top_sum(&direct, 4).unwrap(), value);
    }
}

#[test]
fn cars_matches_nested_sum() {
    let mut rng = TestRng::new(50);
    let d: Vec<f64> = (0..50).map(|_| 0.1 * rng.normal()).collect();
    let fast = cars(&d, 12).unwrap();
    let slow = nested_cars(&d, 12);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn impulse_case_matches_oracle_and_closed_form() {
    let d = 0.37;
    let input = [0.0, d, 0.0, 0.0];
    let oracle = nested_cars(&input, 3);
    let expected = [0.0, 11.0 * d / 6.0, 5.0 * d / 6.0, d / 3.0];
    let fast = cars(&input, 3).unwrap();
    for k in 0..4 {
        assert!((oracle[k] - expected[k]).abs() < 1e-15);
        assert!((fast[k] - expected[k]).abs() < 1e-15);
    }
}

#[test]
fn flat_mode_matches_single_window_sum() {
    let mut rng = TestRng::new(51);
    let d: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
    let flat = cars_with_mode(&d, 6, CarsMode::Flat).unwrap();
    for t in 0..d.len() {
        let first = (t + 1).saturating_sub(6);
        let expected: f64 = d[first..=t].iter().filter(|v| **v > 0.0).sum::<f64>() / 6.0;
        assert!((flat[t] - expected).abs() < 1e-14);
    }
}

#[test]
fn cross_correlation_matches_naive_per_lag() {
    // CARS of two independent random walks' increments.
    let mut rng = TestRng::new(200);
    let walk = |rng: &mut TestRng| -> Vec<f64> {
        let steps: Vec<f64> = (0..200).map(|_| 0.01 * rng.normal()).collect();
        cars(&steps, 12).unwrap()
    };
    let a = walk(&mut rng);
    let b = walk(&mut rng);
    let cc = cross_correlation(&a, &b, 24).unwrap();
    for (&lag, &v) in cc.lags.iter().zip(&cc.values) {
        assert!((v - naive_lagged_pearson(&a, &b, lag)).abs() < 1e-12);
    }
    assert!(cc.values.iter().map(|v| v.abs()).fold(0.0, f64::max) < 0.5);

    let ac = autocorrelation(&a, 24).unwrap();
    for (&lag, &v) in ac.lags.iter().zip(&ac.values).skip(1) {
        assert!((v - naive_lagged_pearson(&a, &a, lag)).abs() < 1e-12);
    }
}
