//! Time evolution: Chebyshev expansion for the TFIM, exact phases for the
//! diagonal ℓ-bit model, and an evolve-and-measure loop over a time grid.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entangle::{entanglement_entropy, CutSpec};
use crate::error::{Error, Result};
use crate::magic::{sre2, sre2_product, sre2_sampled, w_z};
use crate::models::{energy_bounds, lbit_energy_table, EnergyBounds, HermitianOperator, TfimOperator};
use crate::models::{Couplings, DisorderRealization};
use crate::state::{Bloch, BlochAngles, StateVector};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Longest `a * dt` handled by one expansion; longer gaps are subdivided.
pub const MAX_SCALED_STEP: f64 = 1.0e3;
const RENORM_DRIFT: f64 = 1e-12;

/// `J_0(x) ..= J_n(x)` for `x >= 0` by Miller's backward recurrence,
/// normalized with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n_max: usize) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel argument must be finite and >= 0");
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = (n_max as f64).max(x).ceil() as usize + 40 + (6.0 * x.cbrt()).ceil() as usize;
    let start = start + (start & 1);
    let mut above = 0.0f64;
    let mut cur = 1e-300f64;
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * cur - above;
        above = cur;
        cur = below;
        // `cur` now holds the unnormalized J_{k-1}
        let idx = k - 1;
        if idx <= n_max {
            out[idx] = cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            above *= 1e-200;
            norm *= 1e-200;
            out.iter_mut().for_each(|v| *v *= 1e-200);
        }
    }
    norm += cur;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Number of terms kept for `J_k(x)` coefficients at tolerance `tol`, plus the sequence.
fn chebyshev_coefficients(x: f64, tol: f64) -> Vec<f64> {
    let mut n_max = (x + 20.0 + 10.0 * x.cbrt()).ceil() as usize;
    loop {
        let j = bessel_j_sequence(x, n_max);
        let mut run = 0;
        for (k, v) in j.iter().enumerate() {
            if (k as f64) > x && 2.0 * v.abs() < tol {
                run += 1;
                if run == 3 {
                    return j[..=k].to_vec();
                }
            } else {
                run = 0;
            }
        }
        n_max *= 2;
    }
}

/// `e^{-i H dt} |psi>` by Chebyshev expansion.
///
/// With `b` the spectral center and `a` the half width, `H~ = (H - b) / a` and
/// `e^{-iH dt} = e^{-i b dt} sum_k (2 - delta_k0) (-i)^k J_k(a dt) T_k(H~)`.
/// The series stops once three consecutive coefficients beyond `k > a dt`
/// fall below `tol`. Steps with `a dt > 1000` are split into equal pieces.
pub fn chebyshev_step<H: HermitianOperator>(
    op: &H,
    bounds: &EnergyBounds,
    state: &StateVector,
    dt: f64,
    tol: f64,
) -> Result<StateVector> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be finite and >= 0, got {dt}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: state.dim(),
        });
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let a = bounds.half_width().max(1e-12);
    let pieces = (a * dt / MAX_SCALED_STEP).ceil().max(1.0) as usize;
    let sub_dt = dt / pieces as f64;
    let coeffs = chebyshev_coefficients(a * sub_dt, tol);
    let mut psi = state.clone();
    for _ in 0..pieces {
        psi = chebyshev_once(op, bounds, &psi, sub_dt, &coeffs)?;
    }
    Ok(psi)
}

fn chebyshev_once<H: HermitianOperator>(
    op: &H,
    bounds: &EnergyBounds,
    state: &StateVector,
    dt: f64,
    bessel: &[f64],
) -> Result<StateVector> {
    let a = bounds.half_width().max(1e-12);
    let b = bounds.center();
    let dim = state.dim();
    let zero = Complex64::new(0.0, 0.0);

    let mut prev: Vec<Complex64> = state.amplitudes().to_vec();
    let mut result: Vec<Complex64> = prev.iter().map(|v| v * bessel[0]).collect();
    if bessel.len() > 1 {
        let mut cur = vec![zero; dim];
        op.chebyshev_recur(&prev, &mut cur, b, a);
        cur.iter_mut().for_each(|v| *v *= 0.5);
        // (-i)^k cycles through 1, -i, -1, i
        let phases = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        let c1 = phases[1] * (2.0 * bessel[1]);
        result.iter_mut().zip(&cur).for_each(|(r, v)| *r += c1 * v);
        for (k, jk) in bessel.iter().enumerate().skip(2) {
            op.chebyshev_recur(&cur, &mut prev, b, a);
            std::mem::swap(&mut prev, &mut cur);
            let ck = phases[k % 4] * (2.0 * jk);
            result.iter_mut().zip(&cur).for_each(|(r, v)| *r += ck * v);
            if k % 16 == 0 {
                let n: f64 = cur.iter().map(|v| v.norm_sqr()).sum();
                if !(n <= 4.0) {
                    return Err(Error::BoundsViolation(format!(
                        "|T_{k}(H~) psi|^2 = {n:.3e}; spectrum outside [{}, {}]",
                        bounds.min, bounds.max
                    )));
                }
            }
        }
    }
    let global = Complex64::from_polar(1.0, -b * dt);
    result.iter_mut().for_each(|v| *v *= global);
    let norm_sqr: f64 = result.iter().map(|v| v.norm_sqr()).sum();
    if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > 1e-6 {
        return Err(Error::BoundsViolation(format!("norm^2 after step is {norm_sqr:.3e}")));
    }
    let mut out = StateVector::from_unnormalized_unchecked(state.n_qubits(), result);
    let drift = (norm_sqr.sqrt() - 1.0).abs();
    if drift > RENORM_DRIFT {
        log::debug!("chebyshev step norm drift {drift:.3e}, renormalizing");
        out.normalize();
    }
    Ok(out)
}

/// `amplitudes[n] *= e^{-i E[n] t}`.
pub fn diagonal_evolve(energies: &[f64], state: &StateVector, t: f64) -> Result<StateVector> {
    if energies.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: energies.len(),
        });
    }
    let amps = state
        .amplitudes()
        .iter()
        .zip(energies)
        .map(|(a, e)| a * Complex64::from_polar(1.0, -e * t))
        .collect();
    Ok(StateVector::from_unnormalized_unchecked(state.n_qubits(), amps))
}

/// Strictly increasing sample times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    /// Zero for grids built from explicit times.
    pub per_decade: usize,
}

impl TimeGrid {
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("empty time grid"));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("times must be finite, non-negative and strictly increasing"));
        }
        Ok(TimeGrid {
            t_min: times[0],
            t_max: *times.last().unwrap(),
            per_decade: 0,
            times,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        make_time_grid(0.1, 2e4, 10).expect("valid default grid")
    }
}

/// Geometric grid with `per_decade` points per decade from `t_min`. Points
/// closer than half a step to `t_max` are dropped and `t_max` is appended.
pub fn make_time_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<TimeGrid> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || per_decade == 0 {
        return Err(Error::invalid(format!(
            "invalid grid range ({t_min}, {t_max}) with {per_decade} points per decade"
        )));
    }
    let cutoff = t_max / 10f64.powf(0.5 / per_decade as f64);
    let mut times = Vec::new();
    for j in 0.. {
        let t = t_min * 10f64.powf(j as f64 / per_decade as f64);
        if t >= cutoff {
            break;
        }
        times.push(t);
    }
    times.push(t_max);
    Ok(TimeGrid {
        times,
        t_min,
        t_max,
        per_decade,
    })
}

/// Which observables to record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observables {
    pub m2: bool,
    pub entropy: bool,
    pub wz: bool,
}

impl Observables {
    pub const ALL: Observables = Observables {
        m2: true,
        entropy: true,
        wz: true,
    };

    /// Parses a comma list such as `m2,s,wz`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut o = Observables {
            m2: false,
            entropy: false,
            wz: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.to_ascii_lowercase().as_str() {
                "m2" => o.m2 = true,
                "s" | "entropy" => o.entropy = true,
                "wz" => o.wz = true,
                other => return Err(Error::invalid(format!("unknown observable '{other}'"))),
            }
        }
        if !(o.m2 || o.entropy || o.wz) {
            return Err(Error::invalid("no observables requested"));
        }
        Ok(o)
    }
}

impl Default for Observables {
    fn default() -> Self {
        Observables::ALL
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SreMethod {
    Exact,
    /// Closed-form product-state value; only valid for non-interacting ℓ-bits.
    Product,
    Sampled { samples: usize },
}

impl SreMethod {
    pub fn label(&self) -> &'static str {
        match self {
            SreMethod::Exact => "exact",
            SreMethod::Product => "product",
            SreMethod::Sampled { .. } => "sampled",
        }
    }
}

/// Initial state plus its product-state angles when it has them.
#[derive(Clone, Debug)]
pub struct InitialState {
    pub state: StateVector,
    pub angles: Option<BlochAngles>,
}

impl InitialState {
    pub fn product(n_qubits: usize, angles: BlochAngles) -> Result<Self> {
        let state = crate::state::make_product_state(n_qubits, &angles)?;
        Ok(InitialState {
            state,
            angles: Some(angles),
        })
    }

    pub fn general(state: StateVector) -> Self {
        InitialState { state, angles: None }
    }
}

/// Observables of one trajectory on a grid. `m2` in bits, `entropy` in nats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub m2: Option<Vec<f64>>,
    pub entropy: Option<Vec<f64>>,
    pub wz: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub tol: f64,
    /// Half-chain cut by default.
    pub cut: Option<usize>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            tol: DEFAULT_TOL,
            cut: None,
        }
    }
}

enum Engine {
    Chebyshev { op: TfimOperator, bounds: EnergyBounds },
    Diagonal { energies: Vec<f64> },
}

/// Propagates `initial` through the grid and records the requested
/// observables at every grid time. `rng` feeds the sampled SRE only.
pub fn evolve_and_measure<R: Rng + ?Sized>(
    realization: &DisorderRealization,
    initial: &InitialState,
    grid: &TimeGrid,
    observables: Observables,
    method: SreMethod,
    options: EvolveOptions,
    rng: &mut R,
) -> Result<TimeSeries> {
    let l = realization.n_sites();
    if initial.state.n_qubits() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: initial.state.n_qubits(),
        });
    }
    let product_angles = match method {
        SreMethod::Product if observables.m2 => {
            if realization.is_interacting() {
                return Err(Error::invalid(
                    "product fast path requires non-interacting l-bit dynamics",
                ));
            }
            Some(initial.angles.as_ref().ok_or_else(|| {
                Error::invalid("product fast path requires a product initial state")
            })?)
        }
        _ => None,
    };
    let cut = if observables.entropy {
        Some(CutSpec::new(l, options.cut.unwrap_or(l / 2))?)
    } else {
        None
    };

    let engine = match &realization.couplings {
        Couplings::Tfim { .. } => Engine::Chebyshev {
            op: TfimOperator::new(realization)?,
            bounds: energy_bounds(realization)?,
        },
        Couplings::LBit { .. } => Engine::Diagonal {
            energies: lbit_energy_table(realization)?,
        },
    };

    let n = grid.len();
    let mut m2 = observables.m2.then(|| Vec::with_capacity(n));
    let mut entropy = observables.entropy.then(|| Vec::with_capacity(n));
    let mut wz = observables.wz.then(|| Vec::with_capacity(n));

    let mut current = initial.state.clone();
    let mut t_now = 0.0;
    for &t in &grid.times {
        let psi = match &engine {
            Engine::Chebyshev { op, bounds } => {
                current = chebyshev_step(op, bounds, &current, t - t_now, options.tol)?;
                t_now = t;
                &current
            }
            Engine::Diagonal { energies } => {
                current = diagonal_evolve(energies, &initial.state, t)?;
                &current
            }
        };
        if let Some(out) = m2.as_mut() {
            let value = match method {
                SreMethod::Exact => sre2(psi)?,
                SreMethod::Sampled { samples } => sre2_sampled(psi, samples, rng)?.estimate,
                SreMethod::Product => {
                    let angles = product_angles.expect("checked above");
                    sre2_product(&precessed_angles(angles, &realization.fields, t))
                }
            };
            out.push(value);
        }
        if let (Some(out), Some(cut)) = (entropy.as_mut(), cut) {
            out.push(entanglement_entropy(psi, cut)?);
        }
        if let Some(out) = wz.as_mut() {
            out.push(w_z(psi)?);
        }
    }
    Ok(TimeSeries {
        times: grid.times.clone(),
        m2,
        entropy,
        wz,
        seed: realization.seed,
    })
}

/// Single-spin precession under `sum_i h_i Z_i`: `phi_k -> phi_k + 2 h_k t`.
pub fn precessed_angles(angles: &BlochAngles, fields: &[f64], t: f64) -> Vec<Bloch> {
    angles
        .sites()
        .iter()
        .zip(fields)
        .map(|(s, h)| Bloch {
            theta: s.theta,
            phi: s.phi + 2.0 * h * t,
        })
        .collect()
}
