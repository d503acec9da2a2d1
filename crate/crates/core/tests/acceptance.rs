//! End-to-end acceptance suite. Runs every criterion at full scale and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fail.
//! Positional arguments select criteria by id substring (e.g. `c04`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magicdyn::harness::{run_ensemble, EnsembleRecord, GridSpec, InitialStateSpec, ModelSpec, RunConfig, StateFamily};
use magicdyn::magic::{haar_sre2, pauli_spectrum_exact, sre2, sre2_sampled};
use magicdyn::models::{
    energy_bounds, sample_tfim, tfim_apply, tfim_dense, FieldDistribution, LBitParams, TfimOperator, TfimParams,
};
use magicdyn::propagate::{chebyshev_step, make_time_grid, Observables, SreMethod, DEFAULT_TOL};
use magicdyn::state::{make_product_state, named_angles, Basis, Bloch, BlochAngles, NamedState, StateVector};
use magicdyn::theory::{
    anderson_equator_plateau, anderson_sre, collapse_factor, crossover_scan, delta_m2_asymptote_fit,
    fit_power_law_decay, fit_power_law_saturation, magic_gain, QuadratureSpec,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn lbit(l: usize, xi: f64, max_order: usize, w: f64) -> ModelSpec {
    let mut p = LBitParams::new(l, xi, max_order);
    p.fields = FieldDistribution::Uniform { half_width: w };
    ModelSpec::Lbit(p)
}

fn config(model: ModelSpec, family: StateFamily, grid: (f64, f64, usize), obs: &str, n: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(model, InitialStateSpec::new(family));
    c.grid = GridSpec {
        t_min: grid.0,
        t_max: grid.1,
        per_decade: grid.2,
    };
    c.observables = Observables::parse(obs).unwrap();
    c.n_realizations = n;
    c.base_seed = seed;
    c.sre = SreMethod::Exact;
    c
}

fn ensemble(c: &RunConfig) -> EnsembleRecord {
    let r = run_ensemble(c).expect("ensemble runs");
    assert!(r.failures.is_empty(), "realization failures: {:?}", r.failures);
    r
}

// Clifford gates on raw amplitudes; site q is bit q.
fn hadamard(psi: &mut [Complex64], q: usize) {
    let b = 1 << q;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for n in 0..psi.len() {
        if n & b == 0 {
            let (a0, a1) = (psi[n], psi[n | b]);
            psi[n] = (a0 + a1) * s;
            psi[n | b] = (a0 - a1) * s;
        }
    }
}

fn phase_s(psi: &mut [Complex64], q: usize) {
    for (n, a) in psi.iter_mut().enumerate() {
        if n >> q & 1 == 1 {
            *a *= Complex64::i();
        }
    }
}

fn cnot(psi: &mut [Complex64], c: usize, t: usize) {
    for n in 0..psi.len() {
        if n >> c & 1 == 1 && n >> t & 1 == 0 {
            psi.swap(n, n | 1 << t);
        }
    }
}

fn random_stabilizer(l: usize, r: &mut ChaCha8Rng) -> StateVector {
    let sites = (0..l)
        .map(|_| [Basis::Z, Basis::X, Basis::Y][r.gen_range(0..3)].random_site(r))
        .collect();
    let mut amps = make_product_state(l, &BlochAngles::new(sites).unwrap())
        .unwrap()
        .into_amplitudes();
    for _ in 0..4 * l {
        match r.gen_range(0..3) {
            0 => hadamard(&mut amps, r.gen_range(0..l)),
            1 => phase_s(&mut amps, r.gen_range(0..l)),
            _ if l > 1 => {
                let c = r.gen_range(0..l);
                let t = (c + r.gen_range(1..l)) % l;
                cnot(&mut amps, c, t);
            }
            _ => {}
        }
    }
    StateVector::new(l, amps).unwrap()
}

fn ghz(l: usize) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << l];
    amps[0] = Complex64::new(1.0, 0.0);
    amps[(1 << l) - 1] = Complex64::new(1.0, 0.0);
    StateVector::from_unnormalized(l, amps).unwrap()
}

fn c01_stabilizer() -> Outcome {
    let mut r = rng(101);
    let mut states: Vec<StateVector> = (0..50)
        .map(|_| {
            let l = r.gen_range(1..=10);
            random_stabilizer(l, &mut r)
        })
        .collect();
    states.push(ghz(2)); // Bell pair
    states.extend((3..=10).map(ghz));
    let mut worst_m2: f64 = 0.0;
    let mut worst_purity: f64 = 0.0;
    for s in &states {
        worst_m2 = worst_m2.max(sre2(s).unwrap());
        let d = s.dim() as f64;
        let sum = pauli_spectrum_exact(s).unwrap().purity_sum();
        worst_purity = worst_purity.max((sum / d - 1.0).abs());
    }
    outcome(
        worst_m2 <= 1e-9 && worst_purity <= 1e-6,
        format!(
            "{} states, max M2 = {worst_m2:.2e} (<= 1e-9), max |sum/2^L - 1| = {worst_purity:.2e} (<= 1e-6)",
            states.len()
        ),
    )
}

fn c02_t_state() -> Outcome {
    let mut worst: f64 = 0.0;
    for l in 1..=8 {
        let s = make_product_state(l, &BlochAngles::uniform(l, Bloch::t_state())).unwrap();
        worst = worst.max((sre2(&s).unwrap() - l as f64 * (4.0f64 / 3.0).log2()).abs());
    }
    outcome(worst <= 1e-8, format!("max |M2 - L log2(4/3)| = {worst:.2e} over L = 1..8 (<= 1e-8)"))
}

fn c03_haar() -> Outcome {
    let mut r = rng(103);
    let values: Vec<f64> = (0..50)
        .map(|_| sre2(&StateVector::haar_random(8, &mut r).unwrap()).unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / 50.0;
    let target = haar_sre2(8);
    outcome(
        (mean - target).abs() <= 0.05,
        format!("mean M2 = {mean:.5} vs {target:.5} (|diff| <= 0.05)"),
    )
}

fn c04_anderson() -> Outcome {
    let l = 10;
    let c = config(lbit(l, 1.0, 1, 1.0), StateFamily::XPlus, (0.1, 1e4, 10), "m2", 500, 104);
    let rec = ensemble(&c);
    let m2 = rec.m2.unwrap();
    let angles = BlochAngles::uniform(l, Bloch::plus());
    let mut worst: f64 = 0.0;
    let mut worst_t = 0.0;
    for (t, m) in rec.times.iter().zip(&m2.mean) {
        if *t <= 100.0 {
            let oracle = anderson_sre(&angles, 1.0, *t, QuadratureSpec::default()).unwrap();
            let rel = (m - oracle).abs() / oracle;
            if rel > worst {
                worst = rel;
                worst_t = *t;
            }
        }
    }
    let late: Vec<f64> = rec
        .times
        .iter()
        .zip(&m2.mean)
        .filter(|(t, _)| **t >= 1e3)
        .map(|(_, m)| m / l as f64)
        .collect();
    let plateau = late.iter().sum::<f64>() / late.len() as f64;
    outcome(
        worst <= 0.02 && (plateau - 0.2).abs() <= 0.005,
        format!(
            "max rel. deviation {worst:.4} at t = {worst_t:.3} (<= 0.02); plateau/site {plateau:.5} \
             (0.2000 +- 0.005; quadrature {:.6}, log2(8/7) = {:.6})",
            anderson_equator_plateau(),
            (8.0f64 / 7.0).log2()
        ),
    )
}

fn c05_gain() -> Outcome {
    let n = 32;
    let gain = |theta: f64, phi: f64| {
        magic_gain(&BlochAngles::new(vec![Bloch::new(theta, phi).unwrap()]).unwrap(), 1.0).unwrap()
    };
    let mut grid_max = f64::NEG_INFINITY;
    let mut ring_min = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let (theta, phi) = (i as f64 * PI / n as f64, 2.0 * PI * j as f64 / n as f64);
            let g = gain(theta, phi);
            grid_max = grid_max.max(g);
            if i == n / 2 {
                ring_min = ring_min.min(g);
            }
        }
    }
    let plus = gain(FRAC_PI_2, 0.0);
    let t = gain(FRAC_PI_2, FRAC_PI_4);
    outcome(
        plus >= grid_max - 1e-9 && t <= ring_min + 1e-9,
        format!("gain(+) = {plus:.6}, grid max {grid_max:.6}; gain(T) = {t:.6}, ring min {ring_min:.6}"),
    )
}

fn c06_propagator() -> Outcome {
    let l = 8;
    let real = sample_tfim(&TfimParams::new(l, 5.0), 106).unwrap();
    let op = TfimOperator::new(&real).unwrap();
    let bounds = energy_bounds(&real).unwrap();
    let mut r = rng(106);
    let psi0 = make_product_state(l, &named_angles(NamedState::BlochRandom, l, &mut r).unwrap()).unwrap();
    let eig = SymmetricEigen::new(tfim_dense(&real).unwrap());
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let c0 = v.adjoint() * DVector::from_column_slice(psi0.amplitudes());
    let mut worst_overlap: f64 = 1.0;
    for _ in 0..10 {
        let t = r.gen_range(0.0..100.0);
        let cheb = chebyshev_step(&op, &bounds, &psi0, t, DEFAULT_TOL).unwrap();
        let phased = DVector::from_iterator(
            c0.len(),
            c0.iter().zip(eig.eigenvalues.iter()).map(|(a, e)| a * Complex64::from_polar(1.0, -e * t)),
        );
        let exact = StateVector::new(l, (&v * phased).as_slice().to_vec()).unwrap();
        worst_overlap = worst_overlap.min(cheb.fidelity(&exact).unwrap());
    }

    let energy = |s: &StateVector| {
        let h = tfim_apply(&real, s).unwrap();
        s.amplitudes().iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
    };
    let psi_z = make_product_state(l, &named_angles(NamedState::ZRandom, l, &mut r).unwrap()).unwrap();
    let e0 = energy(&psi_z);
    let grid = make_time_grid(0.1, 2e4, 10).unwrap();
    let mut psi = psi_z;
    let mut t_now = 0.0;
    let mut drift: f64 = 0.0;
    for &t in &grid.times {
        psi = chebyshev_step(&op, &bounds, &psi, t - t_now, DEFAULT_TOL).unwrap();
        t_now = t;
        drift = drift.max((energy(&psi) - e0).abs() / e0.abs());
    }
    outcome(
        worst_overlap >= 1.0 - 1e-8 && drift <= 1e-8,
        format!(
            "min overlap {worst_overlap:.12} (>= 1 - 1e-8); max |dE|/|E0| = {drift:.2e} with E0 = {e0:.4} (<= 1e-8)"
        ),
    )
}

fn c07_sampling() -> Outcome {
    let l = 10;
    let real = sample_tfim(&TfimParams::new(l, 3.0), 107).unwrap();
    let op = TfimOperator::new(&real).unwrap();
    let bounds = energy_bounds(&real).unwrap();
    let mut r = rng(107);
    let times = [1.0, 3.0, 10.0, 30.0, 100.0];
    let mut good = 0;
    let mut lines = Vec::new();
    for family in [NamedState::ZRandom, NamedState::XRandom, NamedState::BlochRandom] {
        let psi0 = make_product_state(l, &named_angles(family, l, &mut r).unwrap()).unwrap();
        for &t in &times {
            let psi = chebyshev_step(&op, &bounds, &psi0, t, DEFAULT_TOL).unwrap();
            let exact = sre2(&psi).unwrap();
            let est = sre2_sampled(&psi, 15000, &mut r).unwrap();
            let diff = (est.estimate - exact).abs();
            let ok = diff < 3.0 * est.stderr && diff < 0.05;
            good += usize::from(ok);
            lines.push(format!("{}@{t}:{:+.3}/{:.3}", family.as_str(), est.estimate - exact, est.stderr));
        }
    }
    outcome(good >= 14, format!("{good}/15 cases within 3 stderr and 0.05 bits [{}]", lines.join(" ")))
}

fn c08_saturation() -> Outcome {
    let l = 12;
    let c = config(lbit(l, 0.5, 3, 1.0), StateFamily::XPlus, (10.0, 1e4, 10), "m2", 200, 108);
    let rec = ensemble(&c);
    let fit = fit_power_law_saturation(&rec.times, &rec.m2.unwrap().mean, (10.0, 1e4)).unwrap();
    let haar = haar_sre2(l);
    let beta0 = 0.5 * LN_2;
    let m_ok = (fit.m_sat / haar - 1.0).abs() <= 0.05;
    let b_ok = (fit.beta / beta0 - 1.0).abs() <= 0.30;
    outcome(
        m_ok && b_ok,
        format!(
            "M_sat = {:.4} +- {:.4} vs {haar:.5} (5%: {}); beta = {:.4} +- {:.4} vs {beta0:.5} (30%: {}); c = {:.4}",
            fit.m_sat,
            fit.m_sat_stderr,
            if m_ok { "ok" } else { "out" },
            fit.beta,
            fit.beta_stderr,
            if b_ok { "ok" } else { "out" },
            fit.c
        ),
    )
}

fn c09_residual() -> Outcome {
    let sizes = [6, 8, 10, 12];
    let mut deltas = Vec::new();
    for &l in &sizes {
        let c = config(lbit(l, 0.5, 3, 1.0), StateFamily::XPlus, (1e8, 1e10, 2), "m2", 200, 109);
        let rec = ensemble(&c);
        let m = rec.m2.unwrap().mean;
        let late = m.iter().sum::<f64>() / m.len() as f64;
        deltas.push(haar_sre2(l) - late);
    }
    let detail = sizes
        .iter()
        .zip(&deltas)
        .map(|(l, d)| format!("L={l}: {d:.5}"))
        .collect::<Vec<_>>()
        .join(", ");
    match delta_m2_asymptote_fit(&sizes, &deltas) {
        Ok(fit) => outcome(
            (fit.lambda / LN_2 - 1.0).abs() <= 0.25,
            format!(
                "lambda = {:.4} +- {:.4} vs ln 2 (25%); residuals {detail}",
                fit.lambda, fit.lambda_stderr
            ),
        ),
        Err(e) => outcome(false, format!("fit failed ({e}); residuals {detail}")),
    }
}

fn c10_wz() -> Outcome {
    let l = 10;
    let d = (1u64 << l) as f64;
    let model = ModelSpec::Tfim(TfimParams::new(l, 8.0));
    let grid = (0.1, 2e3, 5);
    let y = ensemble(&config(model.clone(), StateFamily::YRandom, grid, "wz", 300, 110));
    let wz_y = *y.wz.unwrap().mean.last().unwrap();
    let z = ensemble(&config(model, StateFamily::ZRandom, grid, "wz", 300, 110));
    let zm = z.wz.unwrap().mean;
    let (t, v): (Vec<f64>, Vec<f64>) = z
        .times
        .iter()
        .zip(&zm)
        .filter(|(t, _)| **t >= 10.0)
        .map(|(t, v)| (*t, *v))
        .unzip();
    let fit = fit_power_law_decay(&t, &v).unwrap();
    outcome(
        wz_y <= 2.0 / d && fit.lambda.abs() < 0.02,
        format!(
            "Y: W_Z(t={}) D = {:.4} (<= 2); Z: lambda = {:.4} +- {:.4} (|lambda| < 0.02)",
            grid.1,
            wz_y * d,
            fit.lambda,
            fit.lambda_stderr
        ),
    )
}

fn c11_crossover() -> Outcome {
    let t_eval = 1e3;
    let mut cells = Vec::new();
    for &w in &[1.0, 2.0, 5.0, 8.0] {
        for &l in &[8, 10, 12] {
            let c = config(
                ModelSpec::Tfim(TfimParams::new(l, w)),
                StateFamily::ZRandom,
                (1.0, t_eval, 1),
                "m2",
                200,
                111,
            );
            cells.push(ensemble(&c).crossover_cell().unwrap());
        }
    }
    let table = crossover_scan(&cells, t_eval);
    let mut trend_ok = table.missing.is_empty();
    let mut parts = Vec::new();
    for &w in &[1.0, 2.0, 5.0, 8.0] {
        let d: Vec<f64> = table.rows.iter().filter(|r| r.disorder == w).map(|r| r.delta_m2).collect();
        let ok = if w <= 2.0 {
            d.windows(2).all(|p| p[1] < p[0])
        } else {
            d.windows(2).all(|p| p[1] > p[0])
        };
        trend_ok &= ok;
        parts.push(format!(
            "W={w}: [{}]{}",
            d.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "),
            if ok { "" } else { " (wrong trend)" }
        ));
    }

    // exponent ordering of the saturation law at L = 12, W = 5
    let mut betas = Vec::new();
    for family in [StateFamily::YRandom, StateFamily::XRandom, StateFamily::BlochRandom, StateFamily::ZRandom] {
        let c = config(ModelSpec::Tfim(TfimParams::new(12, 5.0)), family, (10.0, 1e3, 5), "m2", 100, 211);
        let rec = ensemble(&c);
        let fit = fit_power_law_saturation(&rec.times, &rec.m2.unwrap().mean, (10.0, 1e3)).unwrap();
        betas.push((family.as_str(), fit.beta));
    }
    let order_ok = betas.windows(2).all(|p| p[0].1 > p[1].1);
    outcome(
        trend_ok && order_ok,
        format!(
            "dM2 over L=8,10,12: {}; beta order Y>X>R>Z {}: {}",
            parts.join("; "),
            if order_ok { "holds" } else { "violated" },
            betas.iter().map(|(n, b)| format!("{n}={b:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn m2_of_s(rec: &EnsembleRecord) -> Vec<(f64, f64)> {
    let s = &rec.entropy.as_ref().unwrap().mean;
    let m = &rec.m2.as_ref().unwrap().mean;
    s.iter().copied().zip(m.iter().copied()).collect()
}

fn c12_collapse() -> Outcome {
    let w = 8.0;
    let lbit_grid = (0.1, 1e4, 5);
    let tfim_grid = (0.1, 1e3, 5);
    let y_ref = ensemble(&config(lbit(10, 0.5, 3, w), StateFamily::YRandom, lbit_grid, "m2,s", 150, 112));
    let y_tfim = ensemble(&config(
        ModelSpec::Tfim(TfimParams::new(10, w)),
        StateFamily::YRandom,
        tfim_grid,
        "m2,s",
        150,
        112,
    ));
    let fy = collapse_factor(&m2_of_s(&y_ref), &m2_of_s(&y_tfim)).unwrap();

    let mut fr = Vec::new();
    for &l in &[10, 12] {
        let r_ref = ensemble(&config(lbit(l, 0.5, 3, w), StateFamily::BlochRandom, lbit_grid, "m2,s", 100, 212));
        let r_tfim = ensemble(&config(
            ModelSpec::Tfim(TfimParams::new(l, w)),
            StateFamily::BlochRandom,
            tfim_grid,
            "m2,s",
            100,
            212,
        ));
        fr.push(collapse_factor(&m2_of_s(&r_ref), &m2_of_s(&r_tfim)).unwrap().f);
    }
    let spread = (fr[0] - fr[1]).abs() / fr[0].min(fr[1]);
    outcome(
        (fy.f - 1.0).abs() <= 0.10 && spread < 0.10,
        format!(
            "Y: f = {:.4} (within 10% of 1), rms {:.3}; R: f(L=10) = {:.4}, f(L=12) = {:.4}, rel. diff {spread:.4} (< 0.10)",
            fy.f, fy.deviation, fr[0], fr[1]
        ),
    )
}

fn c13_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("magicdyn-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bin = env!("CARGO_BIN_EXE_magicdyn");
    let run = |threads: &str, name: &str| {
        let out = dir.join(name);
        let status = std::process::Command::new(bin)
            .args([
                "run", "--model", "tfim", "--L", "6", "--W", "3", "--state", "bloch-random", "--realizations", "12",
                "--seed", "13", "--tmax", "100", "--sre", "sampled", "--samples", "500", "--threads", threads, "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(&out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("1", "b.csv");
    let c = run("4", "c.csv");
    let same = a == b && a == c;
    let _ = std::fs::remove_dir_all(&dir);
    outcome(
        same,
        format!("12-realization run repeated and on 4 workers: {}", if same { "byte-identical" } else { "differs" }),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Outcome); 13] = [
        ("c01", "stabilizer zero and purity", c01_stabilizer),
        ("c02", "T-state additivity", c02_t_state),
        ("c03", "Haar baseline", c03_haar),
        ("c04", "Anderson analytical match", c04_anderson),
        ("c05", "gain landscape", c05_gain),
        ("c06", "propagator correctness", c06_propagator),
        ("c07", "sampled vs exact SRE", c07_sampling),
        ("c08", "MBL saturation law", c08_saturation),
        ("c09", "size scaling of the residual", c09_residual),
        ("c10", "W_Z diagnostics", c10_wz),
        ("c11", "crossover trend", c11_crossover),
        ("c12", "collapse", c12_collapse),
        ("c13", "determinism", c13_determinism),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!o.passed);
        println!(
            "{} {id} {name}: {} [{:.0} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
