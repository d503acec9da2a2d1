//! Hermitian Pauli strings as a pair of bitmasks.
//!
//! Site `k` carries the letter decoded from bit `k` of `(x, z)`:
//! `(0,0) -> I`, `(1,0) -> X`, `(0,1) -> Z`, `(1,1) -> Y`.
//!
//! The operator is `P = i^{|x & z|} X^x Z^z` (Z applied first), so each Y
//! site contributes `i X Z = Y` and `P` is Hermitian. On basis states
//!
//! ```text
//! P |m> = i^{popcount(x & z)} (-1)^{popcount(z & m)} |m ^ x>
//! ```
//!
//! which gives `<psi|P|psi> = i^{popcount(x & z)} sum_m conj(psi[m ^ x]) psi[m] (-1)^{popcount(z & m)}`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Upper bound on `L` for exhaustive enumeration of the I/Z subgroup.
pub const MAX_ENUMERATION_QUBITS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn new(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 64 {
            return Err(Error::invalid(format!("unsupported qubit count {n_qubits}")));
        }
        let allowed = if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 };
        if (x | z) & !allowed != 0 {
            return Err(Error::invalid(format!(
                "masks x={x:#b}, z={z:#b} wider than L={n_qubits}"
            )));
        }
        Ok(PauliString { n_qubits, x, z })
    }

    pub fn identity(n_qubits: usize) -> Self {
        PauliString { n_qubits, x: 0, z: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Number of Y letters.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn letter(&self, site: usize) -> char {
        match ((self.x >> site) & 1, (self.z >> site) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (0, 1) => 'Z',
            _ => 'Y',
        }
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::invalid(format!(
                "Pauli string on {} qubits applied to a {}-qubit state",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.n_qubits {
            write!(f, "{}", self.letter(k))?;
        }
        Ok(())
    }
}

/// Parses letter strings with site 0 leftmost, e.g. `"XIZY"`.
impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut x, mut z) = (0u64, 0u64);
        let n = s.chars().count();
        for (k, c) in s.chars().enumerate() {
            match c.to_ascii_uppercase() {
                'I' => {}
                'X' => x |= 1 << k,
                'Z' => z |= 1 << k,
                'Y' => {
                    x |= 1 << k;
                    z |= 1 << k;
                }
                other => return Err(Error::invalid(format!("bad Pauli letter '{other}'"))),
            }
        }
        PauliString::new(n, x, z)
    }
}

/// `i^k` for `k mod 4`.
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[inline]
fn parity_sign(bits: u64) -> f64 {
    if bits.count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `<psi|P|psi>`, real for Hermitian `P`.
pub fn pauli_expectation(state: &StateVector, p: &PauliString) -> Result<f64> {
    p.check_state(state)?;
    let amps = state.amplitudes();
    let x = p.x as usize;
    let raw: Complex64 = amps
        .iter()
        .enumerate()
        .map(|(m, a)| amps[m ^ x].conj() * a * parity_sign(p.z & m as u64))
        .sum();
    let value = i_pow(p.y_count()) * raw;
    debug_assert!(value.im.abs() <= 1e-10, "non-real Pauli expectation {value}");
    Ok(value.re)
}

/// `P|psi>`: index XOR by the x-mask with a per-index sign from the z-mask.
pub fn apply_pauli(state: &StateVector, p: &PauliString) -> Result<StateVector> {
    p.check_state(state)?;
    let amps = state.amplitudes();
    let x = p.x as usize;
    let phase = i_pow(p.y_count());
    let out = (0..amps.len())
        .map(|n| {
            let m = n ^ x;
            phase * parity_sign(p.z & m as u64) * amps[m]
        })
        .collect();
    StateVector::new(state.n_qubits(), out)
}

/// All `2^L` strings made of I and Z only, in increasing z-mask order.
pub fn iz_subgroup(n_qubits: usize) -> Result<impl Iterator<Item = PauliString>> {
    if n_qubits == 0 || n_qubits > MAX_ENUMERATION_QUBITS {
        return Err(Error::SizeBound {
            what: "I/Z subgroup enumeration",
            l: n_qubits,
            max: MAX_ENUMERATION_QUBITS,
        });
    }
    Ok((0..1u64 << n_qubits).map(move |z| PauliString { n_qubits, x: 0, z }))
}

/// Every string on `L` sites; `4^L` items.
pub fn all_pauli_strings(n_qubits: usize) -> impl Iterator<Item = PauliString> {
    let d = 1u64 << n_qubits;
    (0..d).flat_map(move |x| (0..d).map(move |z| PauliString { n_qubits, x, z }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_product_state, Bloch, BlochAngles};

    fn bell() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::new(
            2,
            vec![
                Complex64::new(h, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(h, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn basic_expectations() {
        let zero = StateVector::basis(1, 0).unwrap();
        assert_eq!(pauli_expectation(&zero, &"Z".parse().unwrap()).unwrap(), 1.0);
        let pp = make_product_state(2, &BlochAngles::uniform(2, Bloch::plus())).unwrap();
        let xx: PauliString = "XX".parse().unwrap();
        assert!((pauli_expectation(&pp, &xx).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_yy_is_minus_one() {
        let yy: PauliString = "YY".parse().unwrap();
        assert!((pauli_expectation(&bell(), &yy).unwrap() + 1.0).abs() < 1e-14);
        let xx: PauliString = "XX".parse().unwrap();
        assert!((pauli_expectation(&bell(), &xx).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_site_y_matrix() {
        // Y|0> = i|1>
        let zero = StateVector::basis(1, 0).unwrap();
        let y = apply_pauli(&zero, &"Y".parse().unwrap()).unwrap();
        assert!((y.amplitudes()[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let one = StateVector::basis(1, 1).unwrap();
        let y = apply_pauli(&one, &"Y".parse().unwrap()).unwrap();
        assert!((y.amplitudes()[0] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn apply_x_flips() {
        let zero = StateVector::basis(1, 0).unwrap();
        let x = apply_pauli(&zero, &"X".parse().unwrap()).unwrap();
        assert_eq!(x, StateVector::basis(1, 1).unwrap());
        let id = apply_pauli(&bell(), &PauliString::identity(2)).unwrap();
        assert_eq!(id, bell());
    }

    #[test]
    fn render_site_zero_leftmost() {
        let p = PauliString::new(4, 0b0011, 0b1010).unwrap();
        assert_eq!(p.to_string(), "XYIZ");
        assert_eq!("XYIZ".parse::<PauliString>().unwrap(), p);
        assert_eq!(p.weight(), 3);
    }

    #[test]
    fn mask_too_wide() {
        assert!(PauliString::new(2, 0b100, 0).is_err());
        let p = PauliString::new(3, 1, 0).unwrap();
        assert!(pauli_expectation(&bell(), &p).is_err());
    }

    #[test]
    fn iz_subgroup_counts() {
        let one: Vec<String> = iz_subgroup(1).unwrap().map(|p| p.to_string()).collect();
        assert_eq!(one, ["I", "Z"]);
        assert!(iz_subgroup(2).unwrap().all(|p| p.x_mask() == 0));
        assert_eq!(iz_subgroup(10).unwrap().count(), 1024);
        assert!(iz_subgroup(31).is_err());
    }
}
