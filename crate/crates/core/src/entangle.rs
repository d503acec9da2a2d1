//! Bipartite entanglement entropy (natural log) and the Page reference value.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Subsystem `A` is sites `0..position`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutSpec {
    position: usize,
}

impl CutSpec {
    pub fn new(n_sites: usize, position: usize) -> Result<Self> {
        if position == 0 || position >= n_sites {
            return Err(Error::invalid(format!(
                "cut {position} out of range 1..={} for L={n_sites}",
                n_sites.saturating_sub(1)
            )));
        }
        Ok(CutSpec { position })
    }

    pub fn half_chain(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, n_sites / 2)
    }

    pub fn position(&self) -> usize {
        self.position
    }
}

/// Von Neumann entropy of sites `0..cut`, in nats.
pub fn entanglement_entropy(state: &StateVector, cut: CutSpec) -> Result<f64> {
    let l = state.n_qubits();
    if cut.position >= l {
        return Err(Error::invalid(format!("cut {} out of range for L={l}", cut.position)));
    }
    let rows = 1usize << cut.position;
    let cols = 1usize << (l - cut.position);
    // column-major: element (a, b) sits at a + rows * b, the basis index
    let m = DMatrix::from_column_slice(rows, cols, state.amplitudes());
    let sv = m.singular_values();
    Ok(sv
        .iter()
        .map(|s| s * s)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// Leading-order Page value `(L/2) ln 2 - 1/2` for equal halves.
pub fn page_value(n_sites: usize) -> Result<f64> {
    if n_sites == 0 || n_sites % 2 != 0 {
        return Err(Error::invalid(format!("Page value needs even L, got {n_sites}")));
    }
    Ok(n_sites as f64 / 2.0 * std::f64::consts::LN_2 - 0.5)
}
