//! Stabilizer Rényi entropies, the Haar baseline and the Z-gate weight.
//!
//! All entropies are in bits. `a_P = <P>^2` throughout; `sum_P a_P = D` for
//! a pure state.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fwht::{fwht_complex, fwht_real};
use crate::pauli::PauliString;
use crate::state::{Bloch, StateVector};

/// Memory bound for exhaustive Pauli spectra (`4^L` complex intermediates).
pub const MAX_EXACT_QUBITS: usize = 13;
/// Bound for the Z-gate weight transform.
pub const MAX_WZ_QUBITS: usize = 26;
/// Bound for perfect Pauli sampling.
pub const MAX_SAMPLING_QUBITS: usize = 24;

/// `<P>` for every Pauli string, indexed by base-4 site digits
/// `digit_k = x_k + 2 z_k` (0 = I, 1 = X, 2 = Z, 3 = Y), site 0 least significant.
#[derive(Clone, Debug)]
pub struct PauliSpectrum {
    n_qubits: usize,
    values: Vec<f64>,
}

impl PauliSpectrum {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index_of(p: &PauliString) -> usize {
        let (x, z) = (p.x_mask(), p.z_mask());
        (0..p.n_qubits())
            .map(|k| ((((x >> k) & 1) | (((z >> k) & 1) << 1)) as usize) << (2 * k))
            .sum()
    }

    pub fn string_at(&self, index: usize) -> PauliString {
        let (mut x, mut z) = (0u64, 0u64);
        for k in 0..self.n_qubits {
            let digit = (index >> (2 * k)) & 3;
            x |= ((digit & 1) as u64) << k;
            z |= ((digit >> 1) as u64) << k;
        }
        PauliString::new(self.n_qubits, x, z).expect("index within 4^L")
    }

    pub fn get(&self, p: &PauliString) -> f64 {
        self.values[Self::index_of(p)]
    }

    /// `sum_P <P>^2`, equal to `2^L` for pure states.
    pub fn purity_sum(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

fn check_bound(n_qubits: usize, max: usize, what: &'static str) -> Result<()> {
    if n_qubits > max {
        return Err(Error::SizeBound { what, l: n_qubits, max });
    }
    Ok(())
}

/// Puts bit `k` of `n` at bit `2k`.
fn spread_bits(mut n: usize) -> usize {
    let mut out = 0;
    let mut k = 0;
    while n != 0 {
        out |= (n & 1) << (2 * k);
        n >>= 1;
        k += 1;
    }
    out
}

/// Exhaustive Pauli spectrum by per-site transforms of the density matrix.
///
/// The density matrix `rho[n, m] = psi[n] conj(psi[m])` is laid out with the
/// bits of `n` and `m` interleaved, so every site owns a base-4 digit
/// `a + 2b` (row bit `a`, column bit `b`). One pass per site maps the block
/// `(rho00, rho10, rho01, rho11)` to `(trI, trX, trZ, trY)`.
pub fn pauli_spectrum_exact(state: &StateVector) -> Result<PauliSpectrum> {
    let n_qubits = state.n_qubits();
    check_bound(n_qubits, MAX_EXACT_QUBITS, "exact Pauli spectra")?;
    let amps = state.amplitudes();
    let dim = amps.len();
    let spread: Vec<usize> = (0..dim).map(spread_bits).collect();

    let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (n, an) in amps.iter().enumerate() {
        let row = spread[n];
        for (m, am) in amps.iter().enumerate() {
            rho[row | (spread[m] << 1)] = an * am.conj();
        }
    }

    let i = Complex64::new(0.0, 1.0);
    for site in 0..n_qubits {
        let stride = 1usize << (2 * site);
        for block in rho.chunks_exact_mut(4 * stride) {
            for j in 0..stride {
                let r00 = block[j];
                let r10 = block[j + stride];
                let r01 = block[j + 2 * stride];
                let r11 = block[j + 3 * stride];
                block[j] = r00 + r11;
                block[j + stride] = r01 + r10;
                block[j + 2 * stride] = r00 - r11;
                block[j + 3 * stride] = i * (r01 - r10);
            }
        }
    }

    let values = rho
        .into_iter()
        .map(|v| {
            debug_assert!(v.im.abs() < 1e-9);
            v.re
        })
        .collect();
    Ok(PauliSpectrum { n_qubits, values })
}

/// Calls `visit(<P>^2)` once for each of the `4^L` Pauli strings.
///
/// For a fixed x-mask, `<P> = i^{|x&z|} V_x[z]` with `V_x` the Walsh transform
/// of `u[m] = conj(psi[m ^ x]) psi[m]`. Because `u[m ^ x] = conj(u[m])`, the
/// transform folds onto half the indices: with `p` the lowest set bit of `x`
/// and `m'` ranging over indices with bit `p` cleared, `|V_x[z]|^2` is
/// `4 A[z']^2` when `z.x` is even and `4 B[z']^2` otherwise, where `A` and `B`
/// are the transforms of `Re u` and `Im u` restricted to those indices. Each
/// reduced `z'` stands for exactly one string of each parity.
fn visit_squared_expectations<F: FnMut(f64)>(state: &StateVector, mut visit: F) {
    let amps = state.amplitudes();
    let dim = amps.len();

    let mut diag: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    fwht_real(&mut diag);
    for v in &diag {
        visit(v * v);
    }
    if dim == 1 {
        return;
    }

    let half = dim / 2;
    let mut folded = vec![Complex64::new(0.0, 0.0); half];
    for x in 1..dim {
        let pivot = x.trailing_zeros();
        let low = (1usize << pivot) - 1;
        for (mr, slot) in folded.iter_mut().enumerate() {
            let m = (mr & low) | ((mr & !low) << 1);
            *slot = amps[m ^ x].conj() * amps[m];
        }
        // Re and Im parts transform independently under the real butterflies.
        fwht_complex(&mut folded);
        for v in &folded {
            visit(4.0 * v.re * v.re);
            visit(4.0 * v.im * v.im);
        }
    }
}

/// Rényi index of a stabilizer entropy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenyiIndex(u32);

impl RenyiIndex {
    pub const SHANNON: RenyiIndex = RenyiIndex(1);
    pub const TWO: RenyiIndex = RenyiIndex(2);

    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("Renyi index must be 1 or an integer >= 2"));
        }
        Ok(RenyiIndex(k))
    }

    pub fn get(&self) -> u32 {
        self.0
    }
}

/// Exact stabilizer Rényi entropy `M_k` in bits.
///
/// `k = 1` is the limit: Shannon entropy of `a_P / D` minus `L`.
pub fn sre(state: &StateVector, k: RenyiIndex) -> Result<f64> {
    let n_qubits = state.n_qubits();
    check_bound(n_qubits, MAX_EXACT_QUBITS, "exact stabilizer entropy")?;
    let dim = state.dim() as f64;
    match k.0 {
        1 => {
            let mut h = 0.0;
            visit_squared_expectations(state, |a| {
                let p = a / dim;
                if p > 0.0 {
                    h -= p * p.log2();
                }
            });
            Ok(h - n_qubits as f64)
        }
        kk => {
            let mut acc = 0.0;
            visit_squared_expectations(state, |a| acc += a.powi(kk as i32));
            Ok((acc / dim).log2() / (1.0 - kk as f64))
        }
    }
}

/// `M_2`, the case used throughout the dynamics code.
pub fn sre2(state: &StateVector) -> Result<f64> {
    sre(state, RenyiIndex::TWO)
}

/// `M_k` from a precomputed spectrum.
pub fn sre_from_spectrum(spectrum: &PauliSpectrum, k: RenyiIndex) -> f64 {
    let dim = (1u64 << spectrum.n_qubits) as f64;
    let l = spectrum.n_qubits as f64;
    match k.0 {
        1 => {
            -spectrum
                .values
                .iter()
                .map(|v| v * v / dim)
                .filter(|p| *p > 0.0)
                .map(|p| p * p.log2())
                .sum::<f64>()
                - l
        }
        kk => {
            let s: f64 = spectrum.values.iter().map(|v| (v * v).powi(kk as i32)).sum();
            (s / dim).log2() / (1.0 - kk as f64)
        }
    }
}

/// Per-site contribution `sum_sigma tr(rho sigma)^4 = 1 + x^4 + y^4 + z^4`.
fn site_quartic_sum(bloch: [f64; 3]) -> f64 {
    1.0 + bloch.iter().map(|c| c.powi(4)).sum::<f64>()
}

/// `M_2` of a product state from per-site Bloch angles, O(L).
pub fn sre2_product(sites: &[Bloch]) -> f64 {
    -sites
        .iter()
        .map(|s| (site_quartic_sum(s.bloch_vector()) / 2.0).log2())
        .sum::<f64>()
}

/// Single-qubit density matrix `[[rho00, rho01], [rho10, rho11]]`.
pub type SiteDensity = [[Complex64; 2]; 2];

/// `M_2` of `⊗_k rho_k`. Each `rho_k` must be Hermitian, unit trace and PSD.
pub fn sre2_product_density(sites: &[SiteDensity]) -> Result<f64> {
    const TOL: f64 = 1e-10;
    let mut total = 0.0;
    for (k, rho) in sites.iter().enumerate() {
        let herm = (rho[0][1] - rho[1][0].conj()).norm() <= TOL
            && rho[0][0].im.abs() <= TOL
            && rho[1][1].im.abs() <= TOL;
        let trace = rho[0][0].re + rho[1][1].re;
        let det = rho[0][0].re * rho[1][1].re - rho[0][1].norm_sqr();
        if !herm || (trace - 1.0).abs() > TOL || det < -TOL || rho[0][0].re < -TOL || rho[1][1].re < -TOL {
            return Err(Error::invalid(format!("site {k} is not a valid density matrix")));
        }
        let x = 2.0 * rho[0][1].re;
        let y = -2.0 * rho[0][1].im;
        let z = rho[0][0].re - rho[1][1].re;
        total -= (site_quartic_sum([x, y, z]) / 2.0).log2();
    }
    Ok(total)
}

/// Average `M_2` of Haar-random states: `log2(2^L + 3) - 2`.
pub fn haar_sre2(n_qubits: usize) -> f64 {
    (2f64.powi(n_qubits as i32) + 3.0).log2() - 2.0
}

/// `M_2^Haar - M_2`.
pub fn delta_m2(m2: f64, n_qubits: usize) -> f64 {
    haar_sre2(n_qubits) - m2
}

/// Fraction of the Pauli distribution on I/Z-only strings.
///
/// `<Z^z> = sum_m |psi[m]|^2 (-1)^{z.m}` is the Walsh transform of the
/// probability vector, so the whole sum costs `O(L 2^L)`.
pub fn w_z(state: &StateVector) -> Result<f64> {
    check_bound(state.n_qubits(), MAX_WZ_QUBITS, "Z-gate weight")?;
    let mut probs = state.probabilities();
    fwht_real(&mut probs);
    Ok(probs.iter().map(|v| v * v).sum::<f64>() / state.dim() as f64)
}

/// Perfect sampler for `Xi_P = <P>^2 / D`.
///
/// Two conditional stages. The x-mask marginal is
/// `q(x) = sum_z Xi_{(x,z)} = sum_m p[m] p[m ^ x]`, the XOR autocorrelation of
/// the probability vector, obtained for all `x` with two Walsh transforms.
/// Given `x`, `Xi` restricted to that x-mask is `|V_x[z]|^2 / (D q(x))`.
pub struct PauliSampler<'a> {
    state: &'a StateVector,
    x_cdf: Vec<f64>,
    scratch: Vec<Complex64>,
    z_cdf: Vec<f64>,
}

impl<'a> PauliSampler<'a> {
    pub fn new(state: &'a StateVector) -> Result<Self> {
        check_bound(state.n_qubits(), MAX_SAMPLING_QUBITS, "Pauli sampling")?;
        let dim = state.dim();
        let mut q = state.probabilities();
        fwht_real(&mut q);
        q.iter_mut().for_each(|v| *v *= *v);
        fwht_real(&mut q);
        let mut acc = 0.0;
        let x_cdf = q
            .iter()
            .map(|v| {
                acc += (v / dim as f64).max(0.0);
                acc
            })
            .collect();
        Ok(PauliSampler {
            state,
            x_cdf,
            scratch: vec![Complex64::new(0.0, 0.0); dim],
            z_cdf: vec![0.0; dim],
        })
    }

    /// Draws one string and returns it with its squared expectation `<P>^2`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (PauliString, f64) {
        let x = draw_from_cdf(&self.x_cdf, rng);
        let amps = self.state.amplitudes();
        for (m, slot) in self.scratch.iter_mut().enumerate() {
            *slot = amps[m ^ x].conj() * amps[m];
        }
        fwht_complex(&mut self.scratch);
        let mut acc = 0.0;
        for (c, v) in self.z_cdf.iter_mut().zip(&self.scratch) {
            acc += v.norm_sqr();
            *c = acc;
        }
        let z = draw_from_cdf(&self.z_cdf, rng);
        let p = PauliString::new(self.state.n_qubits(), x as u64, z as u64).expect("masks within L");
        // |<P>| = 1 means P stabilizes the state; remove the rounding so
        // stabilizer states give exactly zero
        let v = self.scratch[z].norm_sqr();
        (p, if v > 1.0 - STABILIZER_SNAP { 1.0 } else { v })
    }
}

const STABILIZER_SNAP: f64 = 1e-12;

fn draw_from_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().expect("non-empty");
    let u = rng.gen::<f64>() * total;
    let idx = cdf.partition_point(|&c| c <= u);
    // skip zero-weight entries that share the cumulative value at the top end
    idx.min(cdf.len() - 1)
}

/// One draw from `Xi_P`.
pub fn sample_pauli<R: Rng + ?Sized>(state: &StateVector, rng: &mut R) -> Result<PauliString> {
    let mut sampler = PauliSampler::new(state)?;
    Ok(sampler.sample(rng).0)
}

/// Monte-Carlo `M_2` estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledEstimate {
    /// Bits.
    pub estimate: f64,
    /// Delete-1 jackknife standard error, bits.
    pub stderr: f64,
    pub n_samples: usize,
    /// All samples had the same `<P>^2`; the stderr carries no information.
    pub degenerate: bool,
}

pub const MIN_SAMPLES: usize = 100;

/// `-log2(mean_s <P_s>^2)` with `P_s ~ Xi`. The log of a sample mean is biased
/// by `O(1/N)`; the jackknife error does not correct for it.
pub fn sre2_sampled<R: Rng + ?Sized>(state: &StateVector, n_samples: usize, rng: &mut R) -> Result<SampledEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    let mut sampler = PauliSampler::new(state)?;
    let values: Vec<f64> = (0..n_samples).map(|_| sampler.sample(rng).1).collect();
    Ok(jackknife_neg_log2_mean(&values))
}

pub(crate) fn jackknife_neg_log2_mean(values: &[f64]) -> SampledEstimate {
    let n = values.len();
    let sum: f64 = values.iter().sum();
    let estimate = -(sum / n as f64).log2();
    let degenerate = values.iter().all(|v| *v == values[0]);
    if degenerate {
        return SampledEstimate {
            estimate,
            stderr: 0.0,
            n_samples: n,
            degenerate,
        };
    }
    let loo: Vec<f64> = values
        .iter()
        .map(|v| -((sum - v) / (n - 1) as f64).log2())
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|t| (t - mean_loo).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    SampledEstimate {
        estimate,
        stderr: var.sqrt(),
        n_samples: n,
        degenerate,
    }
}
