use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use magicdyn::magic::haar_sre2;
use magicdyn::propagate::make_time_grid;
use magicdyn::theory::{
    collapse_factor, crossover_scan, delta_m2_asymptote_fit, fit_power_law_decay, fit_power_law_saturation,
    CrossoverCell,
};

#[test]
fn noisy_saturation_recovers_parameters() {
    let grid = make_time_grid(10.0, 1e4, 10).unwrap();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let (m, c, beta) = (10.0, 7.5, 0.35);
    let mut within = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = grid.times.iter().map(|t| m - c * t.powf(-beta) + noise.sample(&mut rng)).collect();
        let fit = fit_power_law_saturation(&grid.times, &y, (10.0, 1e4)).unwrap();
        assert!(fit.beta_stderr > 0.0 && fit.m_sat_stderr > 0.0);
        if (fit.beta - beta).abs() < 3.0 * fit.beta_stderr && (fit.m_sat - m).abs() < 3.0 * fit.m_sat_stderr {
            within += 1;
        }
    }
    assert!(within >= 18, "{within}/20 fits within 3 stderr");
}

#[test]
fn saturation_fit_edge_cases() {
    let grid = make_time_grid(10.0, 1e3, 5).unwrap();
    let flat = vec![3.0; grid.len()];
    let fit = fit_power_law_saturation(&grid.times, &flat, (10.0, 1e3)).unwrap();
    assert!(fit.degenerate && fit.beta.is_nan() && fit.m_sat == 3.0);
    // too few points in the window
    assert!(fit_power_law_saturation(&grid.times, &flat, (10.0, 20.0)).is_err());
    let mut bad = flat.clone();
    bad[2] = f64::NAN;
    assert!(fit_power_law_saturation(&grid.times, &bad, (10.0, 1e3)).is_err());
}

#[test]
fn decay_and_asymptote_fits_are_exact_on_clean_data() {
    let t: Vec<f64> = (0..12).map(|i| 10f64.powf(i as f64 / 4.0)).collect();
    let w: Vec<f64> = t.iter().map(|t| 0.3 * t.powf(-0.005)).collect();
    let d = fit_power_law_decay(&t, &w).unwrap();
    assert!((d.lambda - 0.005).abs() < 1e-12 && (d.amplitude - 0.3).abs() < 1e-12);

    let sizes = [6, 8, 10, 12];
    let deltas: Vec<f64> = sizes.iter().map(|l| 1.7 * (-std::f64::consts::LN_2 * *l as f64).exp()).collect();
    let a = delta_m2_asymptote_fit(&sizes, &deltas).unwrap();
    assert!((a.lambda - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(delta_m2_asymptote_fit(&sizes, &[0.1, -0.1, 0.1, 0.1]).is_err());
}

#[test]
fn collapse_recovers_a_known_scale() {
    let reference: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 0.05, 6.0 * (1.0 - (-(i as f64) * 0.1).exp()))).collect();
    let target: Vec<(f64, f64)> = reference.iter().map(|(s, m)| (*s, 1.2 * m)).collect();
    let r = collapse_factor(&reference, &target).unwrap();
    assert!((r.f - 1.2).abs() < 1e-9 && r.deviation < 1e-9);
    let self_collapse = collapse_factor(&reference, &reference).unwrap();
    assert!((self_collapse.f - 1.0).abs() < 1e-12);
}

#[test]
fn crossover_table_reports_trends_and_gaps() {
    let times = vec![1.0, 10.0, 100.0];
    let cell = |l: usize, w: f64, m: f64| CrossoverCell {
        n_sites: l,
        disorder: w,
        times: times.clone(),
        m2: vec![0.0, 0.0, m],
    };
    let cells = vec![
        cell(8, 1.0, haar_sre2(8) - 0.02),
        cell(10, 1.0, haar_sre2(10) - 0.01),
        cell(8, 8.0, haar_sre2(8) - 2.0),
        cell(10, 8.0, haar_sre2(10) - 3.0),
        CrossoverCell {
            n_sites: 12,
            disorder: 8.0,
            times: vec![1.0, 10.0],
            m2: vec![0.0, 0.0],
        },
    ];
    let table = crossover_scan(&cells, 100.0);
    assert_eq!(table.rows.len(), 4);
    assert_eq!(table.missing.len(), 1);
    let slope = |w: f64| table.slopes.iter().find(|s| s.disorder == w).unwrap().slope;
    assert!(slope(1.0) < 0.0 && slope(8.0) > 0.0);
}
