//! Pure states of `L` qubits and their constructors.
//!
//! Basis convention: site `k` is bit `k` of the basis index (site 0 is the
//! least significant bit), with `|up> = |0>` and `|down> = |1>`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{energy_bounds, product_state_energy, DisorderRealization};

/// Largest register the dense state-vector code will allocate.
pub const MAX_QUBITS: usize = 30;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps `amplitudes`, which must have length `2^n_qubits` and unit norm.
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                got: amplitudes.len(),
            });
        }
        let state = StateVector { n_qubits, amplitudes };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("state norm^2 is {norm}, expected 1")));
        }
        Ok(state)
    }

    /// Normalizes `amplitudes` before wrapping them.
    pub fn from_unnormalized(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(n_qubits, amplitudes)
    }

    /// Wraps amplitudes produced by a norm-preserving kernel without re-checking.
    pub(crate) fn from_unnormalized_unchecked(n_qubits: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        StateVector { n_qubits, amplitudes }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        if index >= 1 << n_qubits {
            return Err(Error::invalid(format!(
                "basis index {index} out of range for L={n_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Haar-random state: normalized vector of iid complex Gaussians.
    pub fn haar_random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        use rand_distr::StandardNormal;
        check_qubits(n_qubits)?;
        let amplitudes = (0..1usize << n_qubits)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_unnormalized(n_qubits, amplitudes)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Mutable access for in-place kernels. Callers are responsible for
    /// keeping the norm at one.
    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub(crate) fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::invalid("need at least one qubit"));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::SizeBound {
            what: "state vectors",
            l: n_qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Single-site Bloch angles: `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bloch {
    pub theta: f64,
    pub phi: f64,
}

impl Bloch {
    /// `phi` is wrapped into `[0, 2pi)`; `theta` must lie in `[0, pi]`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
            return Err(Error::invalid(format!("invalid Bloch angles ({theta}, {phi})")));
        }
        Ok(Bloch {
            theta,
            phi: phi.rem_euclid(2.0 * PI),
        })
    }

    pub fn plus() -> Self {
        Bloch { theta: FRAC_PI_2, phi: 0.0 }
    }

    pub fn t_state() -> Self {
        Bloch { theta: FRAC_PI_2, phi: FRAC_PI_4 }
    }

    /// Amplitudes on `|0>` and `|1>`.
    pub fn amplitudes(&self) -> [Complex64; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        [Complex64::new(c, 0.0), Complex64::from_polar(s, self.phi)]
    }

    /// `(<X>, <Y>, <Z>)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let st = self.theta.sin();
        [st * self.phi.cos(), st * self.phi.sin(), self.theta.cos()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles(Vec<Bloch>);

impl BlochAngles {
    pub fn new(sites: Vec<Bloch>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("need at least one site"));
        }
        for b in &sites {
            Bloch::new(b.theta, b.phi)?;
        }
        Ok(BlochAngles(sites))
    }

    pub fn uniform(n_sites: usize, site: Bloch) -> Self {
        BlochAngles(vec![site; n_sites.max(1)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sites(&self) -> &[Bloch] {
        &self.0
    }
}

/// `⊗_k (cos(θ_k/2), e^{iφ_k} sin(θ_k/2))`.
pub fn make_product_state(n_qubits: usize, angles: &BlochAngles) -> Result<StateVector> {
    check_qubits(n_qubits)?;
    if angles.len() != n_qubits {
        return Err(Error::DimensionMismatch {
            expected: n_qubits,
            got: angles.len(),
        });
    }
    let mut amps = Vec::with_capacity(1 << n_qubits);
    amps.push(Complex64::new(1.0, 0.0));
    for site in angles.sites() {
        let [a0, a1] = site.amplitudes();
        let half = amps.len();
        amps.extend_from_within(..half);
        let (lo, hi) = amps.split_at_mut(half);
        lo.iter_mut().for_each(|a| *a *= a0);
        hi.iter_mut().for_each(|a| *a *= a1);
    }
    StateVector::new(n_qubits, amps)
}

/// Named families of initial product states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedState {
    /// Random computational basis state.
    ZRandom,
    /// Each site a random eigenstate of X.
    XRandom,
    /// Each site a random eigenstate of Y.
    YRandom,
    XPlus,
    TProduct,
    /// Each site uniform on the Bloch sphere.
    BlochRandom,
}

impl NamedState {
    pub const ALL: [NamedState; 6] = [
        NamedState::ZRandom,
        NamedState::XRandom,
        NamedState::YRandom,
        NamedState::XPlus,
        NamedState::TProduct,
        NamedState::BlochRandom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NamedState::ZRandom => "z-random",
            NamedState::XRandom => "x-random",
            NamedState::YRandom => "y-random",
            NamedState::XPlus => "x-plus",
            NamedState::TProduct => "t-product",
            NamedState::BlochRandom => "bloch-random",
        }
    }

    /// Families drawn from random eigenstates of a single Pauli basis.
    pub fn basis(&self) -> Option<Basis> {
        match self {
            NamedState::ZRandom => Some(Basis::Z),
            NamedState::XRandom => Some(Basis::X),
            NamedState::YRandom => Some(Basis::Y),
            _ => None,
        }
    }
}

impl fmt::Display for NamedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NamedState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NamedState::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown state family '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    /// Random single-site eigenstate of this basis.
    pub fn random_site<R: Rng + ?Sized>(&self, rng: &mut R) -> Bloch {
        let flip = rng.gen::<bool>();
        match self {
            Basis::Z => Bloch {
                theta: if flip { PI } else { 0.0 },
                phi: 0.0,
            },
            Basis::X => Bloch {
                theta: FRAC_PI_2,
                phi: if flip { PI } else { 0.0 },
            },
            Basis::Y => Bloch {
                theta: FRAC_PI_2,
                phi: if flip { 3.0 * FRAC_PI_2 } else { FRAC_PI_2 },
            },
        }
    }
}

/// Draws the per-site angles of a named product family.
pub fn named_angles<R: Rng + ?Sized>(family: NamedState, n_qubits: usize, rng: &mut R) -> Result<BlochAngles> {
    check_qubits(n_qubits)?;
    let sites = (0..n_qubits)
        .map(|_| match family {
            NamedState::ZRandom => Basis::Z.random_site(rng),
            NamedState::XRandom => Basis::X.random_site(rng),
            NamedState::YRandom => Basis::Y.random_site(rng),
            NamedState::XPlus => Bloch::plus(),
            NamedState::TProduct => Bloch::t_state(),
            NamedState::BlochRandom => {
                let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                Bloch {
                    theta: cos_theta.acos(),
                    phi,
                }
            }
        })
        .collect();
    Ok(BlochAngles(sites))
}

pub fn make_named_state<R: Rng + ?Sized>(family: NamedState, n_qubits: usize, rng: &mut R) -> Result<StateVector> {
    let angles = named_angles(family, n_qubits, rng)?;
    make_product_state(n_qubits, &angles)
}

/// Unnormalized amplitudes `e^{-alpha d(i, center)}` with `d` the Hamming distance.
pub fn hamming_amplitudes(n_qubits: usize, alpha: f64, center: usize) -> Result<Vec<f64>> {
    check_qubits(n_qubits)?;
    if center >= 1 << n_qubits {
        return Err(Error::invalid(format!(
            "center {center} out of range for L={n_qubits}"
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("decay rate must be finite and >= 0, got {alpha}")));
    }
    // one exponential per distance value
    let weights: Vec<f64> = (0..=n_qubits).map(|d| (-alpha * d as f64).exp()).collect();
    Ok((0..1usize << n_qubits)
        .map(|i| weights[(i ^ center).count_ones() as usize])
        .collect())
}

/// Hamming-localized superposition around basis state `center`.
pub fn make_hamming_state(n_qubits: usize, alpha: f64, center: usize) -> Result<StateVector> {
    let amps = hamming_amplitudes(n_qubits, alpha, center)?;
    let z: f64 = amps.iter().map(|a| a * a).sum();
    let norm = z.sqrt();
    StateVector::new(
        n_qubits,
        amps.into_iter().map(|a| Complex64::new(a / norm, 0.0)).collect(),
    )
}

/// Result of a mid-spectrum candidate search.
#[derive(Clone, Debug)]
pub struct MidSpectrumChoice {
    pub state: StateVector,
    pub angles: BlochAngles,
    pub energy: f64,
    /// `(E_min + E_max) / 2` of the estimated spectrum.
    pub target: f64,
    pub candidate_index: usize,
}

pub const DEFAULT_MID_SPECTRUM_CANDIDATES: usize = 100;

/// Among `n_candidates` random product states in `basis`, picks the one whose
/// energy is closest to the middle of the spectrum. Ties go to the lowest
/// candidate index.
pub fn select_mid_spectrum_state<R: Rng + ?Sized>(
    model: &DisorderRealization,
    basis: Basis,
    n_candidates: usize,
    rng: &mut R,
) -> Result<MidSpectrumChoice> {
    select_mid_spectrum_with(model, n_candidates, |r| {
        let sites = (0..model.n_sites()).map(|_| basis.random_site(r)).collect();
        BlochAngles(sites)
    }, rng)
}

/// Same search over an arbitrary product-state generator.
pub fn select_mid_spectrum_with<R, F>(
    model: &DisorderRealization,
    n_candidates: usize,
    mut draw: F,
    rng: &mut R,
) -> Result<MidSpectrumChoice>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> BlochAngles,
{
    if n_candidates == 0 {
        return Err(Error::invalid("need at least one candidate"));
    }
    let bounds = energy_bounds(model)?;
    let target = 0.5 * (bounds.min + bounds.max);
    let scale = (bounds.max - bounds.min).abs().max(1.0);
    let mut best: Option<(usize, BlochAngles, f64)> = None;
    for idx in 0..n_candidates {
        let angles = draw(rng);
        let energy = product_state_energy(model, &angles)?;
        let better = match &best {
            None => true,
            Some((_, _, e)) => (energy - target).abs() < (e - target).abs() - 1e-12 * scale,
        };
        if better {
            best = Some((idx, angles, energy));
        }
    }
    let (candidate_index, angles, energy) = best.expect("at least one candidate");
    let state = make_product_state(model.n_sites(), &angles)?;
    Ok(MidSpectrumChoice {
        state,
        angles,
        energy,
        target,
        candidate_index,
    })
}
