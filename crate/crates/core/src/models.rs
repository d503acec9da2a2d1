//! Disordered Hamiltonians: the transverse-field Ising chain (open
//! boundaries) and the phenomenological ℓ-bit model in the τ basis.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fwht::fwht_real;
use crate::state::{BlochAngles, StateVector};

/// Largest chain for which an ℓ-bit energy table is built.
pub const MAX_TABLE_SITES: usize = 26;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfimParams {
    pub n_sites: usize,
    /// Fields are uniform on `[-disorder, disorder]`.
    pub disorder: f64,
    pub transverse_field: f64,
    pub coupling_range: (f64, f64),
}

impl TfimParams {
    /// `g = 1`, `J in [0.8, 1.2]`.
    pub fn new(n_sites: usize, disorder: f64) -> Self {
        TfimParams {
            n_sites,
            disorder,
            transverse_field: 1.0,
            coupling_range: (0.8, 1.2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::state::check_qubits(self.n_sites)?;
        if !(self.disorder >= 0.0) || !self.disorder.is_finite() {
            return Err(Error::invalid(format!("disorder must be >= 0, got {}", self.disorder)));
        }
        let (lo, hi) = self.coupling_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("bad coupling range [{lo}, {hi}]")));
        }
        if !self.transverse_field.is_finite() {
            return Err(Error::invalid("transverse field must be finite"));
        }
        Ok(())
    }
}

/// On-site field distribution of the ℓ-bit model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldDistribution {
    Uniform { half_width: f64 },
    Gaussian { std_dev: f64 },
}

impl Default for FieldDistribution {
    fn default() -> Self {
        FieldDistribution::Uniform { half_width: 1.0 }
    }
}

impl FieldDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            FieldDistribution::Uniform { half_width } => half_width * (2.0 * rng.gen::<f64>() - 1.0),
            FieldDistribution::Gaussian { std_dev } => {
                std_dev * rng.sample::<f64, _>(rand_distr::StandardNormal)
            }
        }
    }

    /// Scale parameter reported as `W` for ℓ-bit runs.
    pub fn scale(&self) -> f64 {
        match *self {
            FieldDistribution::Uniform { half_width } => half_width,
            FieldDistribution::Gaussian { std_dev } => std_dev,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LBitParams {
    pub n_sites: usize,
    /// Localization length in sites.
    pub xi: f64,
    /// Highest interaction order, 1 to 3. Order 1 is the non-interacting case.
    pub max_order: usize,
    pub fields: FieldDistribution,
}

impl LBitParams {
    pub fn new(n_sites: usize, xi: f64, max_order: usize) -> Self {
        LBitParams {
            n_sites,
            xi,
            max_order,
            fields: FieldDistribution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::state::check_qubits(self.n_sites)?;
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(Error::invalid(format!("xi must be > 0, got {}", self.xi)));
        }
        if !(1..=3).contains(&self.max_order) {
            return Err(Error::invalid(format!("max_order must be 1..=3, got {}", self.max_order)));
        }
        let ok = match self.fields {
            FieldDistribution::Uniform { half_width } => half_width >= 0.0 && half_width.is_finite(),
            FieldDistribution::Gaussian { std_dev } => std_dev >= 0.0 && std_dev.is_finite(),
        };
        if !ok {
            return Err(Error::invalid("field distribution scale must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Multi-spin ℓ-bit coupling `J_S prod_{i in S} tau^z_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LBitTerm {
    pub sites: Vec<usize>,
    pub coupling: f64,
}

impl LBitTerm {
    pub fn mask(&self) -> usize {
        self.sites.iter().fold(0, |m, s| m | (1 << s))
    }

    /// Largest separation between the spins of the term.
    pub fn span(&self) -> usize {
        let lo = self.sites.iter().min().copied().unwrap_or(0);
        let hi = self.sites.iter().max().copied().unwrap_or(0);
        hi - lo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Couplings {
    Tfim {
        params: TfimParams,
        /// `J_{i,i+1}` for `i = 0..L-1`.
        bonds: Vec<f64>,
    },
    LBit {
        params: LBitParams,
        terms: Vec<LBitTerm>,
    },
}

/// One sampled disorder instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    /// On-site fields `h_i`.
    pub fields: Vec<f64>,
    pub couplings: Couplings,
}

impl DisorderRealization {
    pub fn n_sites(&self) -> usize {
        self.fields.len()
    }

    pub fn is_tfim(&self) -> bool {
        matches!(self.couplings, Couplings::Tfim { .. })
    }

    /// True unless this is an ℓ-bit realization without multi-spin terms.
    pub fn is_interacting(&self) -> bool {
        match &self.couplings {
            Couplings::Tfim { .. } => true,
            Couplings::LBit { terms, .. } => !terms.is_empty(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn sample_tfim(params: &TfimParams, seed: u64) -> Result<DisorderRealization> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = params.disorder;
    let fields = (0..params.n_sites)
        .map(|_| w * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();
    let (lo, hi) = params.coupling_range;
    let bonds = (0..params.n_sites.saturating_sub(1))
        .map(|_| lo + (hi - lo) * rng.gen::<f64>())
        .collect();
    Ok(DisorderRealization {
        seed,
        fields,
        couplings: Couplings::Tfim {
            params: params.clone(),
            bonds,
        },
    })
}

/// Fields first, then pairs `i < j` and triples `i < j < k` in lexicographic
/// order. Each coupling is Gaussian with zero mean and variance
/// `exp(-span / xi)`.
pub fn sample_lbit(params: &LBitParams, seed: u64) -> Result<DisorderRealization> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = params.n_sites;
    let fields = (0..l).map(|_| params.fields.sample(&mut rng)).collect();
    let mut terms = Vec::new();
    let mut draw = |sites: Vec<usize>, rng: &mut ChaCha8Rng| {
        let span = sites[sites.len() - 1] - sites[0];
        let sigma = (-(span as f64) / (2.0 * params.xi)).exp();
        let coupling = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
        terms.push(LBitTerm { sites, coupling });
    };
    if params.max_order >= 2 {
        for i in 0..l {
            for j in i + 1..l {
                draw(vec![i, j], &mut rng);
            }
        }
    }
    if params.max_order >= 3 {
        for i in 0..l {
            for j in i + 1..l {
                for k in j + 1..l {
                    draw(vec![i, j, k], &mut rng);
                }
            }
        }
    }
    Ok(DisorderRealization {
        seed,
        fields,
        couplings: Couplings::LBit {
            params: params.clone(),
            terms,
        },
    })
}

#[inline]
fn spin(n: usize, site: usize) -> f64 {
    if (n >> site) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal of the TFIM in the computational basis: `sum J Z Z + sum h Z`.
pub fn tfim_diagonal(realization: &DisorderRealization) -> Result<Vec<f64>> {
    let Couplings::Tfim { bonds, .. } = &realization.couplings else {
        return Err(Error::invalid("not a TFIM realization"));
    };
    let l = realization.n_sites();
    let h = &realization.fields;
    Ok((0..1usize << l)
        .map(|n| {
            let mut e = 0.0;
            for i in 0..l {
                e += h[i] * spin(n, i);
            }
            for (i, j) in bonds.iter().enumerate() {
                // adjacent spins agree iff the two bits are equal
                e += if ((n >> i) ^ (n >> (i + 1))) & 1 == 0 { *j } else { -*j };
            }
            e
        })
        .collect())
}

/// `E[n] = sum_i h_i s_i + sum_S J_S prod_{i in S} s_i`, via one Walsh
/// transform of the coefficient vector indexed by site masks.
pub fn lbit_energy_table(realization: &DisorderRealization) -> Result<Vec<f64>> {
    let Couplings::LBit { terms, .. } = &realization.couplings else {
        return Err(Error::invalid("not an l-bit realization"));
    };
    let l = realization.n_sites();
    if l > MAX_TABLE_SITES {
        return Err(Error::SizeBound {
            what: "l-bit energy tables",
            l,
            max: MAX_TABLE_SITES,
        });
    }
    let mut coeffs = vec![0.0; 1 << l];
    for (i, h) in realization.fields.iter().enumerate() {
        coeffs[1 << i] += h;
    }
    for t in terms {
        coeffs[t.mask()] += t.coupling;
    }
    fwht_real(&mut coeffs);
    Ok(coeffs)
}

/// Hermitian operator acting on complex state vectors.
pub trait HermitianOperator {
    fn dim(&self) -> usize;

    /// `out = H input`.
    fn apply(&self, input: &[Complex64], out: &mut [Complex64]);

    /// Chebyshev recurrence step `acc = 2 (H - shift) / scale * cur - acc`.
    fn chebyshev_recur(&self, cur: &[Complex64], acc: &mut [Complex64], shift: f64, scale: f64) {
        let mut tmp = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply(cur, &mut tmp);
        let f = 2.0 / scale;
        for ((a, t), c) in acc.iter_mut().zip(&tmp).zip(cur) {
            *a = (t - c * shift) * f - *a;
        }
    }
}

/// `sum_i v[n ^ 2^i]` for every `n`, accumulated block-wise so that the
/// inner loops run over contiguous slices.
fn flip_sums(v: &[Complex64], n_sites: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    // the lowest bits flip inside small fixed-size blocks
    let low = n_sites.min(3);
    let block = 1usize << low;
    for (o, x) in out.chunks_exact_mut(block).zip(v.chunks_exact(block)) {
        for (j, oj) in o.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..low {
                s += x[j ^ (1 << i)];
            }
            *oj = s;
        }
    }
    // higher bits three at a time; the inner slices are short enough that
    // the eight sub-blocks touched per chunk stay in L1
    const CHUNK: usize = 32;
    let mut i0 = low;
    while i0 < n_sites {
        let k = (n_sites - i0).min(3);
        let stride = 1usize << i0;
        let subs = 1usize << k;
        for (o, x) in out.chunks_exact_mut(stride * subs).zip(v.chunks_exact(stride * subs)) {
            for j0 in (0..stride).step_by(CHUNK) {
                let len = CHUNK.min(stride - j0);
                for sidx in 0..subs {
                    let dst = sidx * stride + j0;
                    for b in 0..k {
                        let src = (sidx ^ (1 << b)) * stride + j0;
                        o[dst..dst + len]
                            .iter_mut()
                            .zip(&x[src..src + len])
                            .for_each(|(a, v)| *a += v);
                    }
                }
            }
        }
        i0 += k;
    }
    out
}

/// Matrix-free TFIM: a diagonal table plus `g` times single bit flips.
#[derive(Clone, Debug)]
pub struct TfimOperator {
    n_sites: usize,
    diagonal: Vec<f64>,
    transverse_field: f64,
}

impl TfimOperator {
    pub fn new(realization: &DisorderRealization) -> Result<Self> {
        let Couplings::Tfim { params, .. } = &realization.couplings else {
            return Err(Error::invalid("not a TFIM realization"));
        };
        Ok(TfimOperator {
            n_sites: realization.n_sites(),
            diagonal: tfim_diagonal(realization)?,
            transverse_field: params.transverse_field,
        })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    fn apply_real(&self, input: &[f64], out: &mut [f64]) {
        let g = self.transverse_field;
        for (n, o) in out.iter_mut().enumerate() {
            let mut flips = 0.0;
            for i in 0..self.n_sites {
                flips += input[n ^ (1 << i)];
            }
            *o = self.diagonal[n] * input[n] + g * flips;
        }
    }
}

impl HermitianOperator for TfimOperator {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        let g = self.transverse_field;
        let flips = flip_sums(input, self.n_sites);
        for (((o, c), s), d) in out.iter_mut().zip(input).zip(&flips).zip(&self.diagonal) {
            *o = c * d + s * g;
        }
    }

    fn chebyshev_recur(&self, cur: &[Complex64], acc: &mut [Complex64], shift: f64, scale: f64) {
        let f = 2.0 / scale;
        let gf = self.transverse_field * f;
        let flips = flip_sums(cur, self.n_sites);
        for (((a, c), s), d) in acc.iter_mut().zip(cur).zip(&flips).zip(&self.diagonal) {
            *a = c * ((d - shift) * f) + s * gf - *a;
        }
    }
}

/// Diagonal operator with a precomputed energy table.
#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    pub energies: Vec<f64>,
}

impl HermitianOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        for ((o, i), e) in out.iter_mut().zip(input).zip(&self.energies) {
            *o = i * e;
        }
    }
}

/// `H|psi>` for a TFIM realization. The result is not normalized.
pub fn tfim_apply(realization: &DisorderRealization, state: &StateVector) -> Result<Vec<Complex64>> {
    if state.n_qubits() != realization.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: realization.n_sites(),
            got: state.n_qubits(),
        });
    }
    let op = TfimOperator::new(realization)?;
    let mut out = vec![Complex64::new(0.0, 0.0); state.dim()];
    op.apply(state.amplitudes(), &mut out);
    Ok(out)
}

/// Dense TFIM matrix, for validation at small `L`.
pub fn tfim_dense(realization: &DisorderRealization) -> Result<DMatrix<f64>> {
    let op = TfimOperator::new(realization)?;
    let dim = op.dim();
    let g = op.transverse_field;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = op.diagonal[n];
        for i in 0..op.n_sites {
            m[(n ^ (1 << i), n)] += g;
        }
    }
    Ok(m)
}

/// `<psi|H|psi>` for the product state with the given angles, in O(#terms).
pub fn product_state_energy(realization: &DisorderRealization, angles: &BlochAngles) -> Result<f64> {
    if angles.len() != realization.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: realization.n_sites(),
            got: angles.len(),
        });
    }
    let bloch: Vec<[f64; 3]> = angles.sites().iter().map(|s| s.bloch_vector()).collect();
    let h = &realization.fields;
    let mut e: f64 = h.iter().zip(&bloch).map(|(h, b)| h * b[2]).sum();
    match &realization.couplings {
        Couplings::Tfim { params, bonds } => {
            for (i, j) in bonds.iter().enumerate() {
                e += j * bloch[i][2] * bloch[i + 1][2];
            }
            e += params.transverse_field * bloch.iter().map(|b| b[0]).sum::<f64>();
        }
        Couplings::LBit { terms, .. } => {
            for t in terms {
                e += t.coupling * t.sites.iter().map(|&s| bloch[s][2]).product::<f64>();
            }
        }
    }
    Ok(e)
}

/// Interval containing the spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBounds {
    pub min: f64,
    pub max: f64,
    /// Set when the extremal estimates did not converge and the wide margin was used.
    pub widened: bool,
}

impl EnergyBounds {
    pub fn center(&self) -> f64 {
        0.5 * (self.max + self.min)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.max - self.min)
    }
}

const BOUND_MARGIN: f64 = 0.02;
const WIDE_MARGIN: f64 = 0.10;
const LANCZOS_STEPS: usize = 80;

/// Exact extremes of the ℓ-bit table; Lanczos estimates for the TFIM.
pub fn energy_bounds(realization: &DisorderRealization) -> Result<EnergyBounds> {
    match &realization.couplings {
        Couplings::LBit { .. } => {
            let table = lbit_energy_table(realization)?;
            let min = table.iter().copied().fold(f64::INFINITY, f64::min);
            let max = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(EnergyBounds {
                min,
                max,
                widened: false,
            })
        }
        Couplings::Tfim { .. } => {
            let op = TfimOperator::new(realization)?;
            Ok(lanczos_bounds(&op, realization.seed))
        }
    }
}

/// Extremal Ritz values from Lanczos with full reorthogonalization, each
/// pushed outward by its residual norm and a 2% margin of the width.
fn lanczos_bounds(op: &TfimOperator, seed: u64) -> EnergyBounds {
    let dim = op.dim();
    let steps = LANCZOS_STEPS.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a4c_205e_ed00_b0d5);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; dim];
    let mut last_beta = 0.0;
    for _ in 0..steps {
        op.apply_real(&v, &mut w);
        let a: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        alpha.push(a);
        basis.push(v.clone());
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        last_beta = bnorm;
        if basis.len() == steps || bnorm <= 1e-12 * a.abs().max(1.0) {
            break;
        }
        beta.push(bnorm);
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / bnorm);
    }

    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let residual = |i: usize| (last_beta * eig.eigenvectors[(m - 1, i)]).abs();
    let (rmin, rmax) = if m == dim { (0.0, 0.0) } else { (residual(imin), residual(imax)) };
    let lo = eig.eigenvalues[imin] - rmin;
    let hi = eig.eigenvalues[imax] + rmax;
    let width = (hi - lo).max(1e-12);
    let converged = rmin.max(rmax) <= 1e-6 * width;
    if !converged {
        log::warn!("Lanczos extremal estimates unconverged (residual {:.3e}); widening", rmin.max(rmax));
    }
    let margin = if converged { BOUND_MARGIN } else { WIDE_MARGIN } * width;
    EnergyBounds {
        min: lo - margin,
        max: hi + margin,
        widened: !converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_product_state, Bloch};
    use rand::SeedableRng;

    fn tfim_fixed(h: Vec<f64>, bonds: Vec<f64>, g: f64) -> DisorderRealization {
        let mut params = TfimParams::new(h.len(), 0.0);
        params.transverse_field = g;
        DisorderRealization {
            seed: 0,
            fields: h,
            couplings: Couplings::Tfim { params, bonds },
        }
    }

    fn lbit_fixed(h: Vec<f64>, terms: Vec<LBitTerm>) -> DisorderRealization {
        DisorderRealization {
            seed: 0,
            fields: h.clone(),
            couplings: Couplings::LBit {
                params: LBitParams::new(h.len(), 1.0, 3),
                terms,
            },
        }
    }

    #[test]
    fn tfim_sampling_ranges() {
        let r = sample_tfim(&TfimParams::new(6, 0.0), 3).unwrap();
        assert!(r.fields.iter().all(|h| *h == 0.0));
        for seed in 0..50 {
            let r = sample_tfim(&TfimParams::new(8, 5.0), seed).unwrap();
            let Couplings::Tfim { bonds, .. } = &r.couplings else { unreachable!() };
            assert_eq!(bonds.len(), 7);
            assert!(bonds.iter().all(|j| (0.8..=1.2).contains(j)));
            assert!(r.fields.iter().all(|h| h.abs() <= 5.0));
        }
        let a = sample_tfim(&TfimParams::new(8, 5.0), 77).unwrap();
        let b = sample_tfim(&TfimParams::new(8, 5.0), 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tfim_apply_small_cases() {
        let r = tfim_fixed(vec![0.0], vec![], 1.0);
        let out = tfim_apply(&r, &StateVector::basis(1, 0).unwrap()).unwrap();
        assert_eq!(out, vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let r = tfim_fixed(vec![0.0, 0.0], vec![1.0], 0.0);
        let out = tfim_apply(&r, &StateVector::basis(2, 0).unwrap()).unwrap();
        assert_eq!(out[0], Complex64::new(1.0, 0.0));
        assert!(out[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn tfim_matches_dense() {
        let r = sample_tfim(&TfimParams::new(6, 3.0), 12).unwrap();
        let dense = tfim_dense(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = StateVector::haar_random(6, &mut rng).unwrap();
        let fast = tfim_apply(&r, &psi).unwrap();
        for n in 0..64 {
            let direct: Complex64 = (0..64).map(|m| psi.amplitudes()[m] * dense[(n, m)]).sum();
            assert!((direct - fast[n]).norm() < 1e-12);
        }
        assert!((dense.clone() - dense.transpose()).abs().max() == 0.0);
    }

    #[test]
    fn lbit_anderson_has_no_terms() {
        let r = sample_lbit(&LBitParams::new(6, 1.0, 1), 4).unwrap();
        assert!(!r.is_interacting());
        let r = sample_lbit(&LBitParams::new(6, 1.0, 3), 4).unwrap();
        let Couplings::LBit { terms, .. } = &r.couplings else { unreachable!() };
        assert_eq!(terms.len(), 15 + 20);
        assert!(terms.iter().all(|t| t.coupling.is_finite()));
        let t = LBitTerm { sites: vec![1, 2, 5], coupling: 0.0 };
        assert_eq!(t.span(), 4);
    }

    #[test]
    fn lbit_pair_variance() {
        // variance of J_{0,4} at xi = 0.5 is e^{-8}
        let params = LBitParams::new(5, 0.5, 2);
        let n = 100_000;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let r = sample_lbit(&params, seed).unwrap();
            let Couplings::LBit { terms, .. } = &r.couplings else { unreachable!() };
            let t = terms.iter().find(|t| t.sites == vec![0, 4]).unwrap();
            sum_sq += t.coupling * t.coupling;
        }
        let var = sum_sq / n as f64;
        let expected = (-8.0f64).exp();
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn lbit_table_two_sites() {
        let (h1, h2, j) = (0.3, -0.7, 0.45);
        let r = lbit_fixed(vec![h1, h2], vec![LBitTerm { sites: vec![0, 1], coupling: j }]);
        let e = lbit_energy_table(&r).unwrap();
        assert!((e[0] - (h1 + h2 + j)).abs() < 1e-15);
        assert!((e[1] - (-h1 + h2 - j)).abs() < 1e-15);
        assert!((e[3] - (-h1 - h2 + j)).abs() < 1e-15);
    }

    #[test]
    fn lbit_table_matches_explicit_diagonal() {
        let r = sample_lbit(&LBitParams::new(3, 0.8, 3), 21).unwrap();
        let table = lbit_energy_table(&r).unwrap();
        let Couplings::LBit { terms, .. } = &r.couplings else { unreachable!() };
        // build diag(H) by summing Kronecker products of 2x2 diagonals
        for n in 0..8 {
            let mut e = 0.0;
            for i in 0..3 {
                e += r.fields[i] * if n >> i & 1 == 0 { 1.0 } else { -1.0 };
            }
            for t in terms {
                e += t.coupling * t.sites.iter().map(|&s| if n >> s & 1 == 0 { 1.0 } else { -1.0 }).product::<f64>();
            }
            assert!((table[n] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn lbit_zero_field_table_sums_to_zero_and_is_flip_symmetric() {
        let mut r = sample_lbit(&LBitParams::new(5, 1.0, 2), 2).unwrap();
        r.fields.iter_mut().for_each(|h| *h = 0.0);
        let table = lbit_energy_table(&r).unwrap();
        assert!(table.iter().sum::<f64>().abs() < 1e-12);
        for n in 0..32 {
            assert!((table[n] - table[n ^ 31]).abs() < 1e-14);
        }
    }

    #[test]
    fn lbit_bounds_exact() {
        let mut r = lbit_fixed(vec![0.0, 0.0], vec![]);
        // hand-made table (-1, 0, 0.5, 2) through fields and coupling
        // E = h1 s1 + h2 s2 + J s1 s2: solve for the four values
        let (e00, e01, e10, e11) = (-1.0, 0.0, 0.5, 2.0);
        let j = (e00 - e01 - e10 + e11) / 4.0;
        let h1 = (e00 - e01 + e10 - e11) / 4.0;
        let h2 = (e00 + e01 - e10 - e11) / 4.0;
        let c = (e00 + e01 + e10 + e11) / 4.0;
        assert_eq!(c, 0.375);
        r.fields = vec![h1, h2];
        if let Couplings::LBit { terms, .. } = &mut r.couplings {
            terms.push(LBitTerm { sites: vec![0, 1], coupling: j });
        }
        let b = energy_bounds(&r).unwrap();
        assert!((b.min - (e00 - c)).abs() < 1e-15 && (b.max - (e11 - c)).abs() < 1e-15);
    }

    fn dense_extremes(r: &DisorderRealization) -> (f64, f64) {
        let eig = SymmetricEigen::new(tfim_dense(r).unwrap());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    #[test]
    fn tfim_bounds_contain_dense_spectrum() {
        let r = tfim_fixed(vec![0.0, 0.0], vec![1.0], 1.0);
        let (lo, hi) = dense_extremes(&r);
        assert!((hi - 5f64.sqrt()).abs() < 1e-12 && (lo + 5f64.sqrt()).abs() < 1e-12);
        let b = energy_bounds(&r).unwrap();
        assert!(b.min <= lo && b.max >= hi);
        for (l, w, seed) in [(6, 1.0, 1), (8, 5.0, 2), (10, 3.0, 3)] {
            let r = sample_tfim(&TfimParams::new(l, w), seed).unwrap();
            let (lo, hi) = dense_extremes(&r);
            let b = energy_bounds(&r).unwrap();
            assert!(b.min <= lo && b.max >= hi, "L={l}: {b:?} vs ({lo}, {hi})");
            assert!(!b.widened);
            assert!(b.max - b.min < 1.1 * (hi - lo));
        }
    }

    #[test]
    fn reflected_bounds() {
        let r = sample_tfim(&TfimParams::new(8, 2.0), 9).unwrap();
        let mut neg = r.clone();
        neg.fields.iter_mut().for_each(|h| *h = -*h);
        if let Couplings::Tfim { params, bonds } = &mut neg.couplings {
            bonds.iter_mut().for_each(|j| *j = -*j);
            params.transverse_field = -params.transverse_field;
        }
        let a = energy_bounds(&r).unwrap();
        let b = energy_bounds(&neg).unwrap();
        assert!((a.min + b.max).abs() < 1e-8 && (a.max + b.min).abs() < 1e-8);
    }

    #[test]
    fn product_energy_matches_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let angles = crate::state::named_angles(crate::state::NamedState::BlochRandom, 5, &mut rng).unwrap();
        let psi = make_product_state(5, &angles).unwrap();
        let r = sample_tfim(&TfimParams::new(5, 2.0), 1).unwrap();
        let hpsi = tfim_apply(&r, &psi).unwrap();
        let direct: Complex64 = psi.amplitudes().iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
        assert!((direct.re - product_state_energy(&r, &angles).unwrap()).abs() < 1e-12);
        assert!(direct.im.abs() < 1e-12);

        let r = sample_lbit(&LBitParams::new(5, 1.0, 3), 1).unwrap();
        let table = lbit_energy_table(&r).unwrap();
        let direct: f64 = psi.probabilities().iter().zip(&table).map(|(p, e)| p * e).sum();
        assert!((direct - product_state_energy(&r, &angles).unwrap()).abs() < 1e-12);
        let _ = Bloch::plus();
    }

    #[test]
    fn hermiticity_on_random_pairs() {
        let r = sample_tfim(&TfimParams::new(7, 4.0), 31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let phi = StateVector::haar_random(7, &mut rng).unwrap();
            let psi = StateVector::haar_random(7, &mut rng).unwrap();
            let hpsi = tfim_apply(&r, &psi).unwrap();
            let hphi = tfim_apply(&r, &phi).unwrap();
            let a: Complex64 = phi.amplitudes().iter().zip(&hpsi).map(|(x, y)| x.conj() * y).sum();
            let b: Complex64 = psi.amplitudes().iter().zip(&hphi).map(|(x, y)| x.conj() * y).sum();
            assert!((a - b.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn realization_json_round_trip() {
        let r = sample_lbit(&LBitParams::new(4, 0.5, 3), 8).unwrap();
        let back = DisorderRealization::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(r, back);
    }
}
