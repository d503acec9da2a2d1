//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on usage errors, 2 on runtime failures.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::harness::{
    load_record, render_record, run_ensemble, save_record, EnsembleRecord, InitialStateSpec, ModelSpec, RunConfig,
    StateFamily,
};
use crate::magic::{haar_sre2, sre, sre2_sampled, RenyiIndex};
use crate::models::{FieldDistribution, LBitParams, TfimParams};
use crate::propagate::{make_time_grid, Observables, SreMethod};
use crate::state::{make_hamming_state, make_product_state, named_angles, StateVector};
use crate::theory::{anderson_sre, collapse_factor, crossover_scan, fit_power_law_decay, fit_power_law_saturation, QuadratureSpec};

#[derive(Parser, Debug)]
#[command(name = "magicdyn", version, about = "Magic (stabilizer Renyi entropy) dynamics in disordered spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a disorder ensemble and write the aggregated record.
    Run(RunArgs),
    /// Tabulate the analytical non-interacting SRE on a time grid.
    AndersonOracle(OracleArgs),
    /// Fit M_sat - c t^-beta to the M2 column of a record.
    Fit(FitArgs),
    /// Fit a t^-lambda decay to an observable of a record.
    FitDecay(FitDecayArgs),
    /// Rescale factor of target M2(S) curves against a reference.
    Collapse(CollapseArgs),
    /// Deviation from the Haar value across sizes and disorder strengths.
    Crossover(CrossoverArgs),
    /// Haar-average M2 for the given sizes.
    Haar(HaarArgs),
    /// Exact SRE of one initial state.
    SreExact(StateArgs),
    /// Sampled M2 of one initial state.
    SreSample(SampleArgs),
    /// Run the quick invariant suite.
    Validate,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Model: tfim or lbit.
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "L")]
    l: Option<usize>,
    /// TFIM disorder strength or l-bit field half width.
    #[arg(long = "W")]
    w: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    max_order: Option<usize>,
    /// TFIM transverse field.
    #[arg(long)]
    g: Option<f64>,
    /// Gaussian instead of uniform l-bit fields, with --W as the deviation.
    #[arg(long)]
    gaussian_fields: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Mid-spectrum candidates per realization (0 disables).
    #[arg(long)]
    mid_spectrum: Option<usize>,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    per_decade: Option<usize>,
    /// Comma list from m2, s, wz.
    #[arg(long)]
    observables: Option<String>,
    /// exact, product or sampled.
    #[arg(long)]
    sre: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    first_realization: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cut: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long = "L")]
    l: usize,
    #[arg(long = "W", default_value_t = 1.0)]
    w: f64,
    #[arg(long, default_value = "x-plus")]
    state: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    tmin: f64,
    #[arg(long, default_value_t = 2e4)]
    tmax: f64,
    #[arg(long, default_value_t = 10)]
    per_decade: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `lo:hi`; defaults to 10 up to the last grid time.
    #[arg(long)]
    window: Option<String>,
}

#[derive(Args, Debug)]
struct FitDecayArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// m2, s or wz.
    #[arg(long, default_value = "wz")]
    observable: String,
    #[arg(long)]
    window: Option<String>,
}

#[derive(Args, Debug)]
struct CollapseArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "target", required = true, num_args = 1..)]
    targets: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CrossoverArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long = "t", default_value_t = 2e4)]
    t_eval: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HaarArgs {
    #[arg(long = "L", required = true, num_args = 1..)]
    l: Vec<usize>,
}

#[derive(Args, Debug)]
struct StateArgs {
    #[arg(long = "L")]
    l: usize,
    #[arg(long, default_value = "t-product")]
    state: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Renyi index.
    #[arg(long, default_value_t = 2)]
    k: u32,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, default_value_t = 15000)]
    samples: usize,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::SizeBound { .. } | Error::DimensionMismatch { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and executes the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::AndersonOracle(a) => cmd_oracle(a),
        Command::Fit(a) => cmd_fit(a),
        Command::FitDecay(a) => cmd_fit_decay(a),
        Command::Collapse(a) => cmd_collapse(a),
        Command::Crossover(a) => cmd_crossover(a),
        Command::Haar(a) => cmd_haar(a),
        Command::SreExact(a) => cmd_sre_exact(a),
        Command::SreSample(a) => cmd_sre_sample(a),
        Command::Validate => cmd_validate(),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn apply_model_args(base: Option<ModelSpec>, m: &ModelArgs) -> std::result::Result<ModelSpec, Failure> {
    let kind = m.model.as_deref();
    let mut spec = match (base, kind) {
        (Some(spec), None) => spec,
        (Some(spec), Some(k)) if k == spec.name() => spec,
        (base, kind) => {
            let l = m
                .l
                .or(base.as_ref().map(|b| b.n_sites()))
                .ok_or_else(|| usage("--L is required"))?;
            let w = base.as_ref().map(|b| b.disorder()).unwrap_or(1.0);
            match kind.unwrap_or("tfim") {
                "tfim" => ModelSpec::Tfim(TfimParams::new(l, w)),
                "lbit" | "l-bit" => {
                    let mut p = LBitParams::new(l, 1.0, 3);
                    p.fields = FieldDistribution::Uniform { half_width: w };
                    ModelSpec::Lbit(p)
                }
                other => return Err(usage(format!("unknown model '{other}' (tfim or lbit)"))),
            }
        }
    };
    match &mut spec {
        ModelSpec::Tfim(p) => {
            if m.xi.is_some() || m.max_order.is_some() || m.gaussian_fields {
                return Err(usage("--xi, --max-order and --gaussian-fields apply to the lbit model"));
            }
            if let Some(l) = m.l {
                p.n_sites = l;
            }
            if let Some(w) = m.w {
                p.disorder = w;
            }
            if let Some(g) = m.g {
                p.transverse_field = g;
            }
        }
        ModelSpec::Lbit(p) => {
            if m.g.is_some() {
                return Err(usage("--g applies to the tfim model"));
            }
            if let Some(l) = m.l {
                p.n_sites = l;
            }
            if let Some(xi) = m.xi {
                p.xi = xi;
            }
            if let Some(k) = m.max_order {
                p.max_order = k;
            }
            let scale = m.w.unwrap_or_else(|| p.fields.scale());
            p.fields = if m.gaussian_fields || matches!(p.fields, FieldDistribution::Gaussian { .. }) && m.w.is_some() {
                FieldDistribution::Gaussian { std_dev: scale }
            } else {
                FieldDistribution::Uniform { half_width: scale }
            };
        }
    }
    Ok(spec)
}

fn parse_sre(name: &str, samples: Option<usize>) -> std::result::Result<SreMethod, Failure> {
    match name {
        "exact" => Ok(SreMethod::Exact),
        "product" => Ok(SreMethod::Product),
        "sampled" => Ok(SreMethod::Sampled {
            samples: samples.unwrap_or(15000),
        }),
        other => Err(usage(format!("unknown SRE method '{other}' (exact, product, sampled)"))),
    }
}

fn build_config(a: &RunArgs) -> std::result::Result<RunConfig, Failure> {
    let base = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str::<RunConfig>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let model = apply_model_args(base.as_ref().map(|c| c.model.clone()), &a.model)?;
    let mut cfg = match base {
        Some(mut c) => {
            c.model = model;
            c
        }
        None => RunConfig::new(model, InitialStateSpec::new(StateFamily::ZRandom)),
    };
    if let Some(s) = &a.state {
        cfg.state.family = StateFamily::parse(s)?;
    }
    if let Some(alpha) = a.alpha {
        cfg.state.alpha = alpha;
    }
    if a.mid_spectrum.is_some() {
        cfg.state.mid_spectrum = a.mid_spectrum;
    }
    if let Some(t) = a.tmin {
        cfg.grid.t_min = t;
    }
    if let Some(t) = a.tmax {
        cfg.grid.t_max = t;
    }
    if let Some(n) = a.per_decade {
        cfg.grid.per_decade = n;
    }
    if let Some(o) = &a.observables {
        cfg.observables = Observables::parse(o)?;
    }
    match (&a.sre, a.samples) {
        (Some(name), samples) => cfg.sre = parse_sre(name, samples)?,
        (None, Some(n)) => match &mut cfg.sre {
            SreMethod::Sampled { samples } => *samples = n,
            _ => return Err(usage("--samples needs --sre sampled")),
        },
        (None, None) => {}
    }
    if let Some(n) = a.realizations {
        cfg.n_realizations = n;
    }
    if let Some(n) = a.first_realization {
        cfg.first_realization = n;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if a.cut.is_some() {
        cfg.cut = a.cut;
    }
    if let Some(t) = a.tol {
        cfg.tol = t;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> CliResult {
    let cfg = build_config(&a)?;
    let started = Instant::now();
    let record = run_ensemble(&cfg)?;
    match &cfg.out {
        Some(path) => save_record(&record, path)?,
        None => print!("{}", render_record(&record)?),
    }
    eprintln!(
        "{} of {} realizations in {:.1} s",
        record.n_succeeded,
        record.n_requested,
        started.elapsed().as_secs_f64()
    );
    for f in &record.failures {
        eprintln!("realization {} (seed {}) failed: {}", f.realization, f.disorder_seed, f.message);
    }
    Ok(())
}

fn state_from_args(a: &StateArgs) -> std::result::Result<StateVector, Failure> {
    let family = StateFamily::parse(&a.state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    Ok(match family.named() {
        Some(named) => {
            let angles = named_angles(named, a.l, &mut rng)?;
            make_product_state(a.l, &angles)?
        }
        None => {
            use rand::Rng;
            crate::state::check_qubits(a.l)?;
            let center = rng.gen_range(0..1usize << a.l);
            make_hamming_state(a.l, a.alpha, center)?
        }
    })
}

fn cmd_oracle(a: OracleArgs) -> CliResult {
    let family = StateFamily::parse(&a.state)?;
    let named = family
        .named()
        .ok_or_else(|| usage("the analytical SRE needs a product-state family"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let angles = named_angles(named, a.l, &mut rng)?;
    let grid = make_time_grid(a.tmin, a.tmax, a.per_decade)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["L", "W", "state", "t", "M2"]).map_err(runtime)?;
    let spec = QuadratureSpec::default();
    for t in std::iter::once(0.0).chain(grid.times.iter().copied()) {
        let m2 = anderson_sre(&angles, a.w, t, spec)?;
        w.write_record([a.l.to_string(), a.w.to_string(), a.state.clone(), t.to_string(), m2.to_string()])
            .map_err(runtime)?;
    }
    emit(w, a.out.as_deref())
}

fn emit(w: csv::Writer<Vec<u8>>, out: Option<&Path>) -> CliResult {
    let bytes = w.into_inner().map_err(runtime)?;
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(runtime),
        None => std::io::stdout().write_all(&bytes).map_err(runtime),
    }
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), Failure> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("window '{s}' is not lo:hi")))?;
    let lo: f64 = lo.trim().parse().map_err(|_| usage(format!("bad window start '{lo}'")))?;
    let hi: f64 = hi.trim().parse().map_err(|_| usage(format!("bad window end '{hi}'")))?;
    if !(lo < hi) {
        return Err(usage(format!("window start {lo} must be below end {hi}")));
    }
    Ok((lo, hi))
}

fn load(path: &Path) -> std::result::Result<EnsembleRecord, Failure> {
    load_record(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

/// Appends one row to a CSV file, writing the header when the file is new.
fn append_row(path: &Path, header: &[&str], row: &[String]) -> CliResult {
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(runtime)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header).map_err(runtime)?;
    }
    w.write_record(row).map_err(runtime)?;
    w.flush().map_err(runtime)
}

fn sidecar(input: &Path, suffix: &str) -> PathBuf {
    let mut s = input.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn record_labels(r: &EnsembleRecord) -> Vec<String> {
    let m = &r.config.model;
    vec![
        m.name().to_string(),
        m.n_sites().to_string(),
        m.disorder().to_string(),
        m.xi().map(|x| x.to_string()).unwrap_or_default(),
        r.config.state.family.as_str().to_string(),
    ]
}

fn cmd_fit(a: FitArgs) -> CliResult {
    let record = load(&a.input)?;
    let m2 = record.m2.as_ref().ok_or_else(|| usage("record has no M2 column"))?;
    let t_max = *record.times.last().unwrap_or(&0.0);
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => (10.0, t_max),
    };
    let fit = fit_power_law_saturation(&record.times, &m2.mean, window)?;
    let header = [
        "source", "model", "L", "W", "xi", "state", "t_lo", "t_hi", "n_points", "M_sat", "M_sat_stderr", "c",
        "c_stderr", "beta", "beta_stderr", "residual_rms", "degenerate",
    ];
    let mut row = vec![a.input.display().to_string()];
    row.extend(record_labels(&record));
    row.extend([
        fit.window.0.to_string(),
        fit.window.1.to_string(),
        fit.n_points.to_string(),
        fit.m_sat.to_string(),
        fit.m_sat_stderr.to_string(),
        fit.c.to_string(),
        fit.c_stderr.to_string(),
        fit.beta.to_string(),
        fit.beta_stderr.to_string(),
        fit.residual_rms.to_string(),
        fit.degenerate.to_string(),
    ]);
    println!("{}", header.join(","));
    println!("{}", row.join(","));
    append_row(&sidecar(&a.input, ".fits.csv"), &header, &row)
}

fn cmd_fit_decay(a: FitDecayArgs) -> CliResult {
    let record = load(&a.input)?;
    let agg = match a.observable.as_str() {
        "m2" => record.m2.as_ref(),
        "s" => record.entropy.as_ref(),
        "wz" => record.wz.as_ref(),
        other => return Err(usage(format!("unknown observable '{other}'"))),
    }
    .ok_or_else(|| usage(format!("record has no {} column", a.observable)))?;
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let (t, v): (Vec<f64>, Vec<f64>) = record
        .times
        .iter()
        .zip(&agg.mean)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .unzip();
    let fit = fit_power_law_decay(&t, &v)?;
    let header = [
        "source", "model", "L", "W", "xi", "state", "observable", "n_points", "amplitude", "lambda", "lambda_stderr",
    ];
    let mut row = vec![a.input.display().to_string()];
    row.extend(record_labels(&record));
    row.extend([
        a.observable.clone(),
        fit.n_points.to_string(),
        fit.amplitude.to_string(),
        fit.lambda.to_string(),
        fit.lambda_stderr.to_string(),
    ]);
    println!("{}", header.join(","));
    println!("{}", row.join(","));
    append_row(&sidecar(&a.input, ".decay.csv"), &header, &row)
}

fn m2_of_s(record: &EnsembleRecord, path: &Path) -> std::result::Result<Vec<(f64, f64)>, Failure> {
    let (Some(m2), Some(s)) = (&record.m2, &record.entropy) else {
        return Err(usage(format!("{} lacks M2 or S columns", path.display())));
    };
    Ok(s.mean.iter().copied().zip(m2.mean.iter().copied()).collect())
}

fn cmd_collapse(a: CollapseArgs) -> CliResult {
    let reference = load(&a.reference)?;
    let rc = m2_of_s(&reference, &a.reference)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["target", "model", "L", "W", "xi", "state", "f", "deviation"])
        .map_err(runtime)?;
    for path in &a.targets {
        let target = load(path)?;
        let result = collapse_factor(&rc, &m2_of_s(&target, path)?)?;
        let mut row = vec![path.display().to_string()];
        row.extend(record_labels(&target));
        row.extend([result.f.to_string(), result.deviation.to_string()]);
        w.write_record(&row).map_err(runtime)?;
    }
    emit(w, a.out.as_deref())
}

fn cmd_crossover(a: CrossoverArgs) -> CliResult {
    let mut cells = Vec::new();
    let mut family = None;
    for path in &a.inputs {
        let r = load(path)?;
        let f = r.config.state.family;
        if family.is_some_and(|g| g != f) {
            return Err(usage("crossover inputs mix initial-state families"));
        }
        family = Some(f);
        cells.push(
            r.crossover_cell()
                .ok_or_else(|| usage(format!("{} has no M2 column", path.display())))?,
        );
    }
    let table = crossover_scan(&cells, a.t_eval);
    for m in &table.missing {
        eprintln!("missing: {m}");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "L", "W", "t", "M2", "delta_M2", "above_haar", "slope", "slope_stderr", "n_sizes"])
        .map_err(runtime)?;
    let t = a.t_eval.to_string();
    for r in &table.rows {
        w.write_record([
            "cell".to_string(),
            r.n_sites.to_string(),
            r.disorder.to_string(),
            t.clone(),
            r.m2.to_string(),
            r.delta_m2.to_string(),
            r.above_haar.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])
        .map_err(runtime)?;
    }
    for s in &table.slopes {
        w.write_record([
            "slope".to_string(),
            String::new(),
            s.disorder.to_string(),
            t.clone(),
            String::new(),
            String::new(),
            String::new(),
            s.slope.to_string(),
            s.slope_stderr.to_string(),
            s.n_sizes.to_string(),
        ])
        .map_err(runtime)?;
    }
    emit(w, a.out.as_deref())
}

fn cmd_haar(a: HaarArgs) -> CliResult {
    println!("L,M2_haar");
    for l in a.l {
        if l == 0 || l > 62 {
            return Err(usage(format!("L = {l} out of range")));
        }
        println!("{l},{}", haar_sre2(l));
    }
    Ok(())
}

fn cmd_sre_exact(a: StateArgs) -> CliResult {
    let state = state_from_args(&a)?;
    let value = sre(&state, RenyiIndex::new(a.k)?)?;
    println!("L,state,k,M");
    println!("{},{},{},{}", a.l, a.state, a.k, value);
    Ok(())
}

fn cmd_sre_sample(a: SampleArgs) -> CliResult {
    let state = state_from_args(&a.state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.state.seed ^ 0x5eed);
    let est = sre2_sampled(&state, a.samples, &mut rng)?;
    println!("L,state,samples,M2,stderr,degenerate");
    println!(
        "{},{},{},{},{},{}",
        a.state.l, a.state.state, est.n_samples, est.estimate, est.stderr, est.degenerate
    );
    Ok(())
}

fn cmd_validate() -> CliResult {
    let checks = crate::validate::run_all();
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
