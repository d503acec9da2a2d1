//! Disorder-ensemble orchestration: per-realization seeding, trajectory
//! generation, index-ordered aggregation and the on-disk record format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::magic::{MAX_EXACT_QUBITS, MAX_SAMPLING_QUBITS, MAX_WZ_QUBITS, MIN_SAMPLES};
use crate::models::{sample_lbit, sample_tfim, DisorderRealization, LBitParams, TfimParams};
use crate::propagate::{
    evolve_and_measure, make_time_grid, EvolveOptions, InitialState, Observables, SreMethod, TimeGrid,
    TimeSeries, DEFAULT_TOL,
};
use crate::state::{
    make_hamming_state, named_angles, select_mid_spectrum_with, NamedState, DEFAULT_MID_SPECTRUM_CANDIDATES,
};
use crate::theory::CrossoverCell;

pub const SCHEMA_VERSION: u32 = 1;
const HEADER_PREFIX: &str = "# magicdyn-record ";
const END_PREFIX: &str = "# end rows=";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    Tfim(TfimParams),
    Lbit(LBitParams),
}

impl ModelSpec {
    pub fn n_sites(&self) -> usize {
        match self {
            ModelSpec::Tfim(p) => p.n_sites,
            ModelSpec::Lbit(p) => p.n_sites,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Tfim(_) => "tfim",
            ModelSpec::Lbit(_) => "lbit",
        }
    }

    /// `W` column: the TFIM disorder or the ℓ-bit field scale.
    pub fn disorder(&self) -> f64 {
        match self {
            ModelSpec::Tfim(p) => p.disorder,
            ModelSpec::Lbit(p) => p.fields.scale(),
        }
    }

    pub fn xi(&self) -> Option<f64> {
        match self {
            ModelSpec::Tfim(_) => None,
            ModelSpec::Lbit(p) => Some(p.xi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Tfim(p) => p.validate(),
            ModelSpec::Lbit(p) => p.validate(),
        }
    }

    pub fn sample(&self, seed: u64) -> Result<DisorderRealization> {
        match self {
            ModelSpec::Tfim(p) => sample_tfim(p, seed),
            ModelSpec::Lbit(p) => sample_lbit(p, seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateFamily {
    ZRandom,
    XRandom,
    YRandom,
    XPlus,
    TProduct,
    BlochRandom,
    /// `e^{-alpha d(i, c)}` around a random basis state `c`.
    Hamming,
}

impl StateFamily {
    pub fn named(&self) -> Option<NamedState> {
        Some(match self {
            StateFamily::ZRandom => NamedState::ZRandom,
            StateFamily::XRandom => NamedState::XRandom,
            StateFamily::YRandom => NamedState::YRandom,
            StateFamily::XPlus => NamedState::XPlus,
            StateFamily::TProduct => NamedState::TProduct,
            StateFamily::BlochRandom => NamedState::BlochRandom,
            StateFamily::Hamming => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self.named() {
            Some(n) => n.as_str(),
            None => "hamming",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "hamming" {
            return Ok(StateFamily::Hamming);
        }
        Ok(match s.parse::<NamedState>()? {
            NamedState::ZRandom => StateFamily::ZRandom,
            NamedState::XRandom => StateFamily::XRandom,
            NamedState::YRandom => StateFamily::YRandom,
            NamedState::XPlus => StateFamily::XPlus,
            NamedState::TProduct => StateFamily::TProduct,
            NamedState::BlochRandom => StateFamily::BlochRandom,
        })
    }

    fn is_random_product(&self) -> bool {
        matches!(
            self,
            StateFamily::ZRandom | StateFamily::XRandom | StateFamily::YRandom | StateFamily::BlochRandom
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub family: StateFamily,
    /// Decay rate of the Hamming family.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Mid-spectrum candidates per realization; `None` picks the default
    /// (100 for random product families under TFIM, off otherwise), `0` disables.
    #[serde(default)]
    pub mid_spectrum: Option<usize>,
}

fn default_alpha() -> f64 {
    1.0
}

impl InitialStateSpec {
    pub fn new(family: StateFamily) -> Self {
        InitialStateSpec {
            family,
            alpha: default_alpha(),
            mid_spectrum: None,
        }
    }

    pub fn candidates(&self, model: &ModelSpec) -> usize {
        match self.mid_spectrum {
            Some(n) => n,
            None if matches!(model, ModelSpec::Tfim(_)) && self.family.is_random_product() => {
                DEFAULT_MID_SPECTRUM_CANDIDATES
            }
            None => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let g = TimeGrid::default();
        GridSpec {
            t_min: g.t_min,
            t_max: g.t_max,
            per_decade: g.per_decade,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        make_time_grid(self.t_min, self.t_max, self.per_decade)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub state: InitialStateSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub observables: Observables,
    #[serde(default = "default_sre")]
    pub sre: SreMethod,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Index of the first realization, so that chunks of one ensemble can
    /// run separately and be merged.
    #[serde(default)]
    pub first_realization: usize,
    /// Entanglement cut; half chain when absent.
    #[serde(default)]
    pub cut: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Execution settings below are read from config files but never
    /// written into records, so output bytes do not depend on them.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// Worker threads; never changes the output.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

fn default_sre() -> SreMethod {
    SreMethod::Exact
}
fn default_realizations() -> usize {
    1000
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl RunConfig {
    pub fn new(model: ModelSpec, state: InitialStateSpec) -> Self {
        RunConfig {
            model,
            state,
            grid: GridSpec::default(),
            observables: Observables::default(),
            sre: default_sre(),
            n_realizations: default_realizations(),
            base_seed: 0,
            first_realization: 0,
            cut: None,
            tol: default_tol(),
            out: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let l = self.model.n_sites();
        if self.n_realizations == 0 {
            return Err(Error::invalid("n_realizations must be >= 1"));
        }
        self.grid.build()?;
        if self.observables.m2 {
            match self.sre {
                SreMethod::Exact if l > MAX_EXACT_QUBITS => {
                    return Err(Error::SizeBound {
                        what: "exact SRE",
                        l,
                        max: MAX_EXACT_QUBITS,
                    })
                }
                SreMethod::Sampled { samples } => {
                    if samples < MIN_SAMPLES {
                        return Err(Error::invalid(format!("need at least {MIN_SAMPLES} samples")));
                    }
                    if l > MAX_SAMPLING_QUBITS {
                        return Err(Error::SizeBound {
                            what: "Pauli sampling",
                            l,
                            max: MAX_SAMPLING_QUBITS,
                        });
                    }
                }
                SreMethod::Product => {
                    let ok = matches!(&self.model, ModelSpec::Lbit(p) if p.max_order == 1);
                    if !ok {
                        return Err(Error::invalid("product SRE needs the non-interacting l-bit model"));
                    }
                    if self.state.family == StateFamily::Hamming {
                        return Err(Error::invalid("product SRE needs a product initial state"));
                    }
                }
                _ => {}
            }
        }
        if self.observables.wz && l > MAX_WZ_QUBITS {
            return Err(Error::SizeBound {
                what: "W_Z",
                l,
                max: MAX_WZ_QUBITS,
            });
        }
        if self.observables.entropy {
            crate::entangle::CutSpec::new(l, self.cut.unwrap_or(l / 2))?;
        }
        if self.state.family == StateFamily::Hamming && !(self.state.alpha >= 0.0 && self.state.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be finite and >= 0"));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(Error::invalid(format!("tolerance {} out of range", self.tol)));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be >= 1"));
        }
        Ok(())
    }

    /// SHA-256 over the physics-defining fields. Output path, thread count
    /// and the realization range are excluded so chunks share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        c.first_realization = 0;
        c.n_realizations = 1;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Independent random streams of one realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Disorder = 0x6469_736f_7264_6572,
    State = 0x7374_6174_6500_0000,
    Sampling = 0x7361_6d70_6c65_0000,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream` of realization `index`.
pub fn mix_seed(base_seed: u64, index: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ index) ^ stream as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidSpectrumMeta {
    pub realization: usize,
    pub candidate_index: usize,
    pub energy: f64,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub realization: usize,
    pub disorder_seed: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct RealizationOutput {
    pub series: TimeSeries,
    pub mid_spectrum: Option<MidSpectrumMeta>,
}

/// Builds the initial state of realization `index` from the state stream.
pub fn initial_state(
    config: &RunConfig,
    realization: &DisorderRealization,
    index: usize,
) -> Result<(InitialState, Option<MidSpectrumMeta>)> {
    let l = config.model.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.base_seed, index as u64, Stream::State));
    let Some(family) = config.state.family.named() else {
        let center = rng.gen_range(0..1usize << l);
        let state = make_hamming_state(l, config.state.alpha, center)?;
        return Ok((InitialState::general(state), None));
    };
    let candidates = config.state.candidates(&config.model);
    if candidates == 0 {
        let angles = named_angles(family, l, &mut rng)?;
        return Ok((InitialState::product(l, angles)?, None));
    }
    let choice = select_mid_spectrum_with(
        realization,
        candidates,
        |r| named_angles(family, l, r).expect("size checked"),
        &mut rng,
    )?;
    let meta = MidSpectrumMeta {
        realization: index,
        candidate_index: choice.candidate_index,
        energy: choice.energy,
        target: choice.target,
    };
    Ok((
        InitialState {
            state: choice.state,
            angles: Some(choice.angles),
        },
        Some(meta),
    ))
}

/// Runs realization `index` of `config` on its own streams.
pub fn run_realization(config: &RunConfig, grid: &TimeGrid, index: usize) -> Result<RealizationOutput> {
    let realization = config
        .model
        .sample(mix_seed(config.base_seed, index as u64, Stream::Disorder))?;
    let (initial, mid_spectrum) = initial_state(config, &realization, index)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.base_seed, index as u64, Stream::Sampling));
    let options = EvolveOptions {
        tol: config.tol,
        cut: config.cut,
    };
    let series = evolve_and_measure(
        &realization,
        &initial,
        grid,
        config.observables,
        config.sre,
        options,
        &mut rng,
    )?;
    for (name, values) in [("M2", &series.m2), ("S", &series.entropy), ("WZ", &series.wz)] {
        if let Some(v) = values {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("non-finite {name} value")));
            }
        }
    }
    Ok(RealizationOutput { series, mid_spectrum })
}

/// Per-time mean and standard error of the mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
}

impl Aggregate {
    /// Two-pass mean and `sqrt(var / n)` with the unbiased variance, summed
    /// in the order given. A single sample has `sem = 0`.
    pub fn from_samples(samples: &[&[f64]]) -> Aggregate {
        let n = samples.len();
        let width = samples.first().map_or(0, |s| s.len());
        let mut mean = vec![0.0; width];
        let mut sem = vec![0.0; width];
        if n == 0 {
            return Aggregate {
                mean: vec![f64::NAN; width],
                sem: vec![f64::NAN; width],
            };
        }
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        if n > 1 {
            for s in samples {
                for ((acc, v), m) in sem.iter_mut().zip(s.iter()).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
            let scale = 1.0 / ((n - 1) as f64 * n as f64);
            sem.iter_mut().for_each(|a| *a = (*a * scale).sqrt());
        }
        Aggregate { mean, sem }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub schema_version: u32,
    pub crate_version: String,
    pub config: RunConfig,
    pub config_hash: String,
    /// Half-open realization index ranges that contributed.
    pub ranges: Vec<(usize, usize)>,
    pub n_requested: usize,
    pub n_succeeded: usize,
    pub times: Vec<f64>,
    pub m2: Option<Aggregate>,
    pub entropy: Option<Aggregate>,
    pub wz: Option<Aggregate>,
    pub failures: Vec<Failure>,
    pub mid_spectrum: Vec<MidSpectrumMeta>,
    pub flags: Vec<String>,
}

fn aggregate_field(outputs: &[&RealizationOutput], pick: fn(&TimeSeries) -> Option<&Vec<f64>>) -> Option<Aggregate> {
    let rows: Vec<&[f64]> = outputs.iter().filter_map(|o| pick(&o.series).map(|v| v.as_slice())).collect();
    if rows.is_empty() {
        None
    } else {
        Some(Aggregate::from_samples(&rows))
    }
}

fn status_flags(n_requested: usize, n_succeeded: usize) -> Vec<String> {
    let mut flags = Vec::new();
    if n_succeeded == 1 {
        flags.push("single-realization: sem is zero".to_string());
    }
    if n_succeeded < n_requested {
        flags.push(format!(
            "incomplete: {} of {} realizations failed",
            n_requested - n_succeeded,
            n_requested
        ));
    }
    flags
}

/// Runs every realization of `config` and aggregates them in index order.
/// Realization failures are recorded, not fatal; only an invalid config or an
/// ensemble with no successful realization is an error.
pub fn run_ensemble(config: &RunConfig) -> Result<EnsembleRecord> {
    config.validate()?;
    let grid = config.grid.build()?;
    let start = config.first_realization;
    let indices: Vec<usize> = (start..start + config.n_realizations).collect();
    let work = |r: &usize| -> std::result::Result<RealizationOutput, Failure> {
        let out = run_realization(config, &grid, *r).map_err(|e| Failure {
            realization: *r,
            disorder_seed: mix_seed(config.base_seed, *r as u64, Stream::Disorder),
            message: e.to_string(),
        });
        log::debug!("realization {r} done");
        out
    };
    let results: Vec<_> = match config.threads {
        Some(1) => indices.iter().map(work).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| indices.par_iter().map(work).collect()),
        None => indices.par_iter().map(work).collect(),
    };

    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in &results {
        match r {
            Ok(o) => ok.push(o),
            Err(f) => {
                log::warn!("realization {} failed: {}", f.realization, f.message);
                failures.push(f.clone());
            }
        }
    }
    if ok.is_empty() {
        return Err(Error::Record(format!(
            "all {} realizations failed; first: {}",
            config.n_realizations, failures[0].message
        )));
    }
    let n_succeeded = ok.len();
    Ok(EnsembleRecord {
        schema_version: SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        config_hash: config.hash(),
        ranges: vec![(start, start + config.n_realizations)],
        n_requested: config.n_realizations,
        n_succeeded,
        times: grid.times.clone(),
        m2: aggregate_field(&ok, |s| s.m2.as_ref()),
        entropy: aggregate_field(&ok, |s| s.entropy.as_ref()),
        wz: aggregate_field(&ok, |s| s.wz.as_ref()),
        failures,
        mid_spectrum: ok.iter().filter_map(|o| o.mid_spectrum.clone()).collect(),
        flags: status_flags(config.n_realizations, n_succeeded),
    })
}

/// Combines per-time aggregates of two disjoint sample sets.
fn merge_aggregate(a: &Aggregate, na: usize, b: &Aggregate, nb: usize) -> Aggregate {
    let (na, nb) = (na as f64, nb as f64);
    let n = na + nb;
    let mut out = Aggregate {
        mean: Vec::with_capacity(a.mean.len()),
        sem: Vec::with_capacity(a.mean.len()),
    };
    for i in 0..a.mean.len() {
        let (ma, mb) = (a.mean[i], b.mean[i]);
        // sum of squared deviations recovered from sem^2 = ss / ((n - 1) n)
        let ssa = a.sem[i] * a.sem[i] * (na - 1.0) * na;
        let ssb = b.sem[i] * b.sem[i] * (nb - 1.0) * nb;
        let m = (na * ma + nb * mb) / n;
        let d = mb - ma;
        let ss = ssa + ssb + d * d * na * nb / n;
        out.mean.push(m);
        out.sem.push(if n > 1.0 { (ss / ((n - 1.0) * n)).sqrt() } else { 0.0 });
    }
    out
}

impl EnsembleRecord {
    /// Merges two chunks of the same ensemble. Hashes must match and the
    /// realization ranges must be disjoint.
    pub fn merge(&self, other: &EnsembleRecord) -> Result<EnsembleRecord> {
        if self.config_hash != other.config_hash {
            return Err(Error::Record(format!(
                "config hashes differ ({} vs {})",
                self.config_hash, other.config_hash
            )));
        }
        for (a0, a1) in &self.ranges {
            for (b0, b1) in &other.ranges {
                if a0 < b1 && b0 < a1 {
                    return Err(Error::Record(format!(
                        "realization ranges overlap: {a0}..{a1} and {b0}..{b1}"
                    )));
                }
            }
        }
        let merge = |a: &Option<Aggregate>, b: &Option<Aggregate>| match (a, b) {
            (Some(a), Some(b)) => Some(merge_aggregate(a, self.n_succeeded, b, other.n_succeeded)),
            _ => None,
        };
        let mut ranges: Vec<(usize, usize)> = self.ranges.iter().chain(&other.ranges).copied().collect();
        ranges.sort_unstable();
        let mut failures: Vec<Failure> = self.failures.iter().chain(&other.failures).cloned().collect();
        failures.sort_by_key(|f| f.realization);
        let mut mid: Vec<MidSpectrumMeta> = self.mid_spectrum.iter().chain(&other.mid_spectrum).cloned().collect();
        mid.sort_by_key(|m| m.realization);
        let n_requested = self.n_requested + other.n_requested;
        let n_succeeded = self.n_succeeded + other.n_succeeded;
        let mut config = self.config.clone();
        config.first_realization = ranges[0].0;
        config.n_realizations = n_requested;
        Ok(EnsembleRecord {
            schema_version: SCHEMA_VERSION,
            crate_version: self.crate_version.clone(),
            config,
            config_hash: self.config_hash.clone(),
            ranges,
            n_requested,
            n_succeeded,
            times: self.times.clone(),
            m2: merge(&self.m2, &other.m2),
            entropy: merge(&self.entropy, &other.entropy),
            wz: merge(&self.wz, &other.wz),
            failures,
            mid_spectrum: mid,
            flags: status_flags(n_requested, n_succeeded),
        })
    }

    pub fn crossover_cell(&self) -> Option<CrossoverCell> {
        Some(CrossoverCell {
            n_sites: self.config.model.n_sites(),
            disorder: self.config.model.disorder(),
            times: self.times.clone(),
            m2: self.m2.as_ref()?.mean.clone(),
        })
    }
}

/// Header block written as one JSON line; everything but the aggregates.
#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    crate_version: String,
    config: RunConfig,
    config_hash: String,
    ranges: Vec<(usize, usize)>,
    n_requested: usize,
    n_succeeded: usize,
    observables: [bool; 3],
    failures: Vec<Failure>,
    mid_spectrum: Vec<MidSpectrumMeta>,
    flags: Vec<String>,
}

pub const CSV_COLUMNS: [&str; 14] = [
    "model", "L", "W", "xi", "state", "sre_method", "n_real", "t", "M2_mean", "M2_sem", "S_mean", "S_sem",
    "WZ_mean", "WZ_sem",
];

/// Renders the record: a JSON header comment, CSV rows, and an end marker
/// that lets truncation be detected.
pub fn render_record(record: &EnsembleRecord) -> Result<String> {
    let header = Header {
        schema_version: record.schema_version,
        crate_version: record.crate_version.clone(),
        config: record.config.clone(),
        config_hash: record.config_hash.clone(),
        ranges: record.ranges.clone(),
        n_requested: record.n_requested,
        n_succeeded: record.n_succeeded,
        observables: [record.m2.is_some(), record.entropy.is_some(), record.wz.is_some()],
        failures: record.failures.clone(),
        mid_spectrum: record.mid_spectrum.clone(),
        flags: record.flags.clone(),
    };
    let mut out = String::new();
    out.push_str(HEADER_PREFIX);
    out.push_str(&serde_json::to_string(&header)?);
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    let model = &record.config.model;
    let xi = model.xi().map(|x| x.to_string()).unwrap_or_default();
    let cell = |a: &Option<Aggregate>, i: usize| match a {
        Some(a) => (a.mean[i].to_string(), a.sem[i].to_string()),
        None => (String::new(), String::new()),
    };
    for (i, t) in record.times.iter().enumerate() {
        let (m, ms) = cell(&record.m2, i);
        let (s, ss) = cell(&record.entropy, i);
        let (z, zs) = cell(&record.wz, i);
        w.write_record([
            model.name().to_string(),
            model.n_sites().to_string(),
            model.disorder().to_string(),
            xi.clone(),
            record.config.state.family.as_str().to_string(),
            record.config.sre.label().to_string(),
            record.n_succeeded.to_string(),
            t.to_string(),
            m,
            ms,
            s,
            ss,
            z,
            zs,
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::Record(e.to_string()))?;
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    let _ = writeln!(out, "{END_PREFIX}{}", record.times.len());
    Ok(out)
}

pub fn save_record(record: &EnsembleRecord, path: &Path) -> Result<()> {
    fs::write(path, render_record(record)?)?;
    Ok(())
}

pub fn parse_record(text: &str) -> Result<EnsembleRecord> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Record("empty record".into()))?;
    let json = first
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| Error::Record("missing record header".into()))?;
    let raw: serde_json::Value = serde_json::from_str(json)?;
    let version = raw.get("schema_version").and_then(|v| v.as_u64());
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(Error::Record(format!(
            "schema version {version:?} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    let header: Header = serde_json::from_value(raw)?;

    let mut body = String::new();
    let mut expected_rows = None;
    for line in lines {
        if let Some(n) = line.strip_prefix(END_PREFIX) {
            expected_rows = Some(
                n.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Record(format!("bad end marker '{line}'")))?,
            );
            break;
        }
        body.push_str(line);
        body.push('\n');
    }
    let expected_rows = expected_rows.ok_or_else(|| Error::Record("truncated record: end marker missing".into()))?;

    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if columns != CSV_COLUMNS {
        return Err(Error::Record(format!("unexpected columns {columns:?}")));
    }
    let [has_m2, has_s, has_wz] = header.observables;
    let empty = || Aggregate {
        mean: Vec::new(),
        sem: Vec::new(),
    };
    let (mut m2, mut entropy, mut wz) = (empty(), empty(), empty());
    let mut times = Vec::new();
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Record(format!("bad {what} value '{s}'")))
    };
    for row in reader.records() {
        let row = row?;
        if row.len() != CSV_COLUMNS.len() {
            return Err(Error::Record(format!("row has {} fields", row.len())));
        }
        times.push(num(&row[7], "t")?);
        for (present, agg, col) in [(has_m2, &mut m2, 8), (has_s, &mut entropy, 10), (has_wz, &mut wz, 12)] {
            if present {
                agg.mean.push(num(&row[col], CSV_COLUMNS[col])?);
                agg.sem.push(num(&row[col + 1], CSV_COLUMNS[col + 1])?);
            }
        }
    }
    if times.len() != expected_rows {
        return Err(Error::Record(format!(
            "expected {expected_rows} rows, found {}",
            times.len()
        )));
    }
    Ok(EnsembleRecord {
        schema_version: header.schema_version,
        crate_version: header.crate_version,
        config: header.config,
        config_hash: header.config_hash,
        ranges: header.ranges,
        n_requested: header.n_requested,
        n_succeeded: header.n_succeeded,
        times,
        m2: has_m2.then_some(m2),
        entropy: has_s.then_some(entropy),
        wz: has_wz.then_some(wz),
        failures: header.failures,
        mid_spectrum: header.mid_spectrum,
        flags: header.flags,
    })
}

pub fn load_record(path: &Path) -> Result<EnsembleRecord> {
    parse_record(&fs::read_to_string(path)?)
}
