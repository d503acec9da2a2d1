//! Fast self-checks of the core invariants, run by the `validate` command.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::magic::{pauli_spectrum_exact, sre2, w_z};
use crate::models::{energy_bounds, sample_tfim, tfim_dense, TfimOperator, TfimParams};
use crate::propagate::{bessel_j_sequence, chebyshev_step, DEFAULT_TOL};
use crate::state::{make_product_state, named_angles, Bloch, BlochAngles, NamedState, StateVector};
use crate::theory::{anderson_sre, QuadratureSpec};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match body() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn ghz(n: usize) -> Result<StateVector> {
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    amps[0] = Complex64::new(1.0, 0.0);
    amps[(1 << n) - 1] = Complex64::new(1.0, 0.0);
    StateVector::from_unnormalized(n, amps)
}

pub fn run_all() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    vec![
        check("stabilizer states have zero M2", || {
            let mut worst: f64 = sre2(&ghz(6)?)?;
            for family in [NamedState::ZRandom, NamedState::XRandom, NamedState::YRandom] {
                let s = make_product_state(6, &named_angles(family, 6, &mut rng)?)?;
                worst = worst.max(sre2(&s)?.abs());
            }
            Ok((worst <= 1e-9, format!("max |M2| = {worst:.2e}")))
        }),
        check("T-state M2 is additive", || {
            let mut worst: f64 = 0.0;
            for l in 1..=6 {
                let s = make_product_state(l, &BlochAngles::uniform(l, Bloch::t_state()))?;
                worst = worst.max((sre2(&s)? - l as f64 * (4.0f64 / 3.0).log2()).abs());
            }
            Ok((worst <= 1e-8, format!("max error {worst:.2e}")))
        }),
        check("Pauli spectrum sums to 2^L", || {
            let s = StateVector::haar_random(6, &mut rng)?;
            let sum = pauli_spectrum_exact(&s)?.purity_sum();
            Ok(((sum / 64.0 - 1.0).abs() <= 1e-10, format!("sum = {sum}")))
        }),
        check("W_Z equals the summed squared probabilities", || {
            let s = StateVector::haar_random(7, &mut rng)?;
            let p2: f64 = s.probabilities().iter().map(|p| p * p).sum();
            let wz = w_z(&s)?;
            Ok(((wz - p2).abs() <= 1e-12, format!("W_Z = {wz}, sum p^2 = {p2}")))
        }),
        check("Bessel sum rule", || {
            let j = bessel_j_sequence(37.5, 120);
            let sum = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
            Ok(((sum - 1.0).abs() <= 1e-12, format!("J0 + 2 sum J2k = {sum}")))
        }),
        check("Chebyshev matches dense evolution", || {
            let r = sample_tfim(&TfimParams::new(6, 3.0), 5)?;
            let psi0 = make_product_state(6, &named_angles(NamedState::BlochRandom, 6, &mut rng)?)?;
            let t = 7.3;
            let op = TfimOperator::new(&r)?;
            let cheb = chebyshev_step(&op, &energy_bounds(&r)?, &psi0, t, DEFAULT_TOL)?;
            let eig = SymmetricEigen::new(tfim_dense(&r)?);
            let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            let c = v.adjoint() * DVector::from_column_slice(psi0.amplitudes());
            let phased = DVector::from_iterator(
                c.len(),
                c.iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(a, e)| a * Complex64::from_polar(1.0, -e * t)),
            );
            let exact = StateVector::new(6, (v * phased).as_slice().to_vec())?;
            let overlap = cheb.fidelity(&exact)?;
            Ok((overlap >= 1.0 - 1e-10, format!("|<exact|cheb>|^2 = {overlap}")))
        }),
        check("analytical SRE at t = 0 equals the exact value", || {
            let angles = named_angles(NamedState::BlochRandom, 5, &mut rng)?;
            let analytic = anderson_sre(&angles, 1.0, 0.0, QuadratureSpec::default())?;
            let exact = sre2(&make_product_state(5, &angles)?)?;
            Ok(((analytic - exact).abs() <= 1e-8, format!("{analytic} vs {exact}")))
        }),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
