use magicdyn::harness::{
    load_record, parse_record, render_record, run_ensemble, run_realization, save_record, GridSpec, InitialStateSpec,
    ModelSpec, RunConfig, StateFamily,
};
use magicdyn::models::{LBitParams, TfimParams};
use magicdyn::propagate::{Observables, SreMethod};

fn small_tfim(n: usize) -> RunConfig {
    let mut c = RunConfig::new(
        ModelSpec::Tfim(TfimParams::new(6, 4.0)),
        InitialStateSpec::new(StateFamily::XRandom),
    );
    c.grid = GridSpec {
        t_min: 0.5,
        t_max: 50.0,
        per_decade: 3,
    };
    c.observables = Observables::parse("m2,s,wz").unwrap();
    c.n_realizations = n;
    c.base_seed = 31;
    c
}

#[test]
fn worker_count_does_not_change_the_record() {
    let mut c = small_tfim(9);
    c.threads = Some(1);
    let a = render_record(&run_ensemble(&c).unwrap()).unwrap();
    c.threads = Some(3);
    let b = render_record(&run_ensemble(&c).unwrap()).unwrap();
    c.threads = None;
    let d = render_record(&run_ensemble(&c).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, d);
}

#[test]
fn aggregation_matches_hand_computation() {
    let c = small_tfim(7);
    let rec = run_ensemble(&c).unwrap();
    let grid = c.grid.build().unwrap();
    let runs: Vec<Vec<f64>> = (0..7)
        .map(|i| run_realization(&c, &grid, i).unwrap().series.m2.unwrap())
        .collect();
    let m2 = rec.m2.unwrap();
    for k in 0..grid.len() {
        let xs: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        let mean = xs.iter().sum::<f64>() / 7.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 6.0;
        assert!((m2.mean[k] - mean).abs() < 1e-12);
        assert!((m2.sem[k] - (var / 7.0).sqrt()).abs() < 1e-12);
    }
    assert_eq!(rec.n_succeeded, 7);
    assert!(rec.flags.is_empty());
}

#[test]
fn sem_shrinks_like_inverse_root_n() {
    let mut c = small_tfim(16);
    c.observables = Observables::parse("m2").unwrap();
    let small = run_ensemble(&c).unwrap().m2.unwrap();
    c.n_realizations = 256;
    let large = run_ensemble(&c).unwrap().m2.unwrap();
    let ratio: f64 = small.sem.iter().zip(&large.sem).map(|(a, b)| a / b).sum::<f64>() / small.sem.len() as f64;
    assert!((2.5..6.0).contains(&ratio), "sem ratio {ratio}, expected about 4");
}

#[test]
fn single_realization_is_flagged() {
    let rec = run_ensemble(&small_tfim(1)).unwrap();
    assert!(rec.m2.unwrap().sem.iter().all(|s| *s == 0.0));
    assert!(rec.flags.iter().any(|f| f.starts_with("single-realization")));
}

#[test]
fn chunks_merge_into_the_full_ensemble() {
    let full = run_ensemble(&small_tfim(10)).unwrap();
    let mut a = small_tfim(4);
    let mut b = small_tfim(6);
    b.first_realization = 4;
    a.out = Some("a.csv".into());
    let (ra, rb) = (run_ensemble(&a).unwrap(), run_ensemble(&b).unwrap());
    assert_eq!(ra.config_hash, rb.config_hash);
    let merged = ra.merge(&rb).unwrap();
    assert_eq!(merged.n_succeeded, 10);
    for (x, y) in merged.m2.unwrap().mean.iter().zip(&full.m2.as_ref().unwrap().mean) {
        assert!((x - y).abs() < 1e-12);
    }
    for (x, y) in merged.entropy.unwrap().sem.iter().zip(&full.entropy.unwrap().sem) {
        assert!((x - y).abs() < 1e-12);
    }
    // overlapping ranges and different physics are refused
    assert!(ra.merge(&ra).is_err());
    let mut other = small_tfim(4);
    other.base_seed = 32;
    other.first_realization = 4;
    assert!(ra.merge(&run_ensemble(&other).unwrap()).is_err());
}

#[test]
fn records_survive_disk_round_trip() {
    let rec = run_ensemble(&small_tfim(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    save_record(&rec, &path).unwrap();
    let back = load_record(&path).unwrap();
    assert_eq!(back, rec);
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = text.lines().take(4).collect::<Vec<_>>().join("\n");
    assert!(parse_record(&cut).unwrap_err().to_string().contains("truncated"));
}

#[test]
fn mid_spectrum_selection_is_recorded() {
    let mut c = small_tfim(3);
    c.state = InitialStateSpec {
        mid_spectrum: Some(20),
        ..InitialStateSpec::new(StateFamily::ZRandom)
    };
    let rec = run_ensemble(&c).unwrap();
    assert_eq!(rec.mid_spectrum.len(), 3);
    assert!(rec.mid_spectrum.iter().all(|m| m.candidate_index < 20));
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut c = small_tfim(3);
    c.sre = SreMethod::Product;
    assert!(run_ensemble(&c).is_err());
    let mut c = small_tfim(3);
    c.n_realizations = 0;
    assert!(run_ensemble(&c).is_err());
    let mut c = RunConfig::new(
        ModelSpec::Lbit(LBitParams::new(14, 1.0, 1)),
        InitialStateSpec::new(StateFamily::XPlus),
    );
    c.sre = SreMethod::Exact;
    assert!(c.validate().is_err());
    c.sre = SreMethod::Product;
    assert!(c.validate().is_ok());
}
