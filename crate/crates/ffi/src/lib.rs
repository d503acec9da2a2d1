//! C ABI over `magicdyn`.
//!
//! States and disorder realizations are opaque handles, released with the
//! matching `*_free`. Every fallible call returns an
//! [`MdStatus`]; on failure `md_last_error()` describes what went wrong on
//! the calling thread. Results are written through out-pointers, which are
//! left untouched on error.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use magicdyn::entangle::{entanglement_entropy, CutSpec};
use magicdyn::magic::{haar_sre2, sre, sre2_sampled, w_z, RenyiIndex};
use magicdyn::models::{
    energy_bounds, lbit_energy_table, sample_lbit, sample_tfim, DisorderRealization, FieldDistribution, LBitParams,
    TfimOperator, TfimParams,
};
use magicdyn::pauli::{pauli_expectation, PauliString};
use magicdyn::propagate::{chebyshev_step, diagonal_evolve};
use magicdyn::state::{make_named_state, make_product_state, Bloch, BlochAngles, NamedState, StateVector};
use magicdyn::theory::{anderson_sre, QuadratureSpec};
use magicdyn::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    SizeBound = 3,
    BoundsViolation = 4,
    Quadrature = 5,
    DegenerateFit = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Pure state on `L` qubits.
pub struct MdState(StateVector);

/// Sampled disorder instance of the TFIM or the ℓ-bit model.
pub struct MdRealization(DisorderRealization);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MdStatus {
    match e {
        Error::InvalidArgument(_) => MdStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => MdStatus::DimensionMismatch,
        Error::SizeBound { .. } => MdStatus::SizeBound,
        Error::BoundsViolation(_) => MdStatus::BoundsViolation,
        Error::Quadrature(_) => MdStatus::Quadrature,
        Error::DegenerateFit(_) => MdStatus::DegenerateFit,
        _ => MdStatus::Io,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MdStatus::Ok
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            MdStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic");
            MdStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn angles(n: usize, theta: *const f64, phi: *const f64) -> Result<BlochAngles, Fail> {
    let th = slice(theta, n, "theta")?;
    let ph = slice(phi, n, "phi")?;
    let sites = th
        .iter()
        .zip(ph)
        .map(|(t, p)| Bloch::new(*t, *p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BlochAngles::new(sites)?)
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn md_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Product state with site `k` at Bloch angles `(theta[k], phi[k])`.
///
/// # Safety
/// `theta` and `phi` must point to `n_qubits` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_state_product(
    n_qubits: usize,
    theta: *const f64,
    phi: *const f64,
    out_state: *mut *mut MdState,
) -> MdStatus {
    guard(|| {
        let o = out(out_state, "out_state")?;
        let a = angles(n_qubits, theta, phi)?;
        *o = boxed(MdState(make_product_state(n_qubits, &a)?));
        Ok(())
    })
}

/// Named initial state (`z-random`, `x-random`, `y-random`, `x-plus`,
/// `t-product`, `bloch-random`); random families draw from `seed`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_state_named(
    name: *const c_char,
    n_qubits: usize,
    seed: u64,
    out_state: *mut *mut MdState,
) -> MdStatus {
    guard(|| {
        let o = out(out_state, "out_state")?;
        let family: NamedState = text(name, "name")?.parse()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        *o = boxed(MdState(make_named_state(family, n_qubits, &mut rng)?));
        Ok(())
    })
}

/// State from `2^n_qubits` amplitudes given as separate real and imaginary
/// parts. The vector is normalized on input.
///
/// # Safety
/// `re` and `im` must point to `2^n_qubits` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_state_from_amplitudes(
    n_qubits: usize,
    re: *const f64,
    im: *const f64,
    out_state: *mut *mut MdState,
) -> MdStatus {
    guard(|| {
        let o = out(out_state, "out_state")?;
        if n_qubits == 0 || n_qubits >= usize::BITS as usize {
            return Err(Error::InvalidArgument(format!("unsupported qubit count {n_qubits}")).into());
        }
        let dim = 1usize << n_qubits;
        let re = slice(re, dim, "re")?;
        let im = slice(im, dim, "im")?;
        let amps = re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        *o = boxed(MdState(StateVector::from_unnormalized(n_qubits, amps)?));
        Ok(())
    })
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_state_n_qubits(state: *const MdState) -> usize {
    state.as_ref().map_or(0, |s| s.0.n_qubits())
}

/// Copies the amplitudes into `re` and `im`, each of length `len`, which
/// must equal `2^L`.
///
/// # Safety
/// `state` must be a live handle; `re` and `im` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn md_state_amplitudes(state: *const MdState, re: *mut f64, im: *mut f64, len: usize) -> MdStatus {
    guard(|| {
        let s = &get(state, "state")?.0;
        if len != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                got: len,
            }
            .into());
        }
        if re.is_null() || im.is_null() {
            return Err(Fail::Null("re/im"));
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        let im = std::slice::from_raw_parts_mut(im, len);
        for ((r, i), a) in re.iter_mut().zip(im.iter_mut()).zip(s.amplitudes()) {
            *r = a.re;
            *i = a.im;
        }
        Ok(())
    })
}

/// Releases a state; null is ignored.
///
/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_state_free(state: *mut MdState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Exact stabilizer Rényi entropy of index `k` (1 for the Shannon limit), in bits.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_sre(state: *const MdState, k: u32, out_value: *mut f64) -> MdStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        *o = sre(&get(state, "state")?.0, RenyiIndex::new(k)?)?;
        Ok(())
    })
}

/// Monte-Carlo estimate of `M_2` from `n_samples` Pauli strings with its
/// jackknife standard error.
///
/// # Safety
/// `state` must be a live handle; both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_sre2_sampled(
    state: *const MdState,
    n_samples: usize,
    seed: u64,
    out_estimate: *mut f64,
    out_stderr: *mut f64,
) -> MdStatus {
    guard(|| {
        let s = &get(state, "state")?.0;
        let (e, se) = (out(out_estimate, "out_estimate")?, out(out_stderr, "out_stderr")?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = sre2_sampled(s, n_samples, &mut rng)?;
        *e = r.estimate;
        *se = r.stderr;
        Ok(())
    })
}

/// Weight of the `{I, Z}` Pauli strings.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_w_z(state: *const MdState, out_value: *mut f64) -> MdStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        *o = w_z(&get(state, "state")?.0)?;
        Ok(())
    })
}

/// Von Neumann entropy, in nats, of sites `0..cut`. `cut = 0` selects the half chain.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_entanglement_entropy(state: *const MdState, cut: usize, out_value: *mut f64) -> MdStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        let s = &get(state, "state")?.0;
        let spec = if cut == 0 {
            CutSpec::half_chain(s.n_qubits())?
        } else {
            CutSpec::new(s.n_qubits(), cut)?
        };
        *o = entanglement_entropy(s, spec)?;
        Ok(())
    })
}

/// `<P>` for a Pauli string written as letters, site 0 first (e.g. `"XIZY"`).
///
/// # Safety
/// `state` must be a live handle; `pauli` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_pauli_expectation(
    state: *const MdState,
    pauli: *const c_char,
    out_value: *mut f64,
) -> MdStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        let p: PauliString = text(pauli, "pauli")?.parse()?;
        *o = pauli_expectation(&get(state, "state")?.0, &p)?;
        Ok(())
    })
}

/// Haar average of `M_2` on `n_qubits` qubits.
#[no_mangle]
pub extern "C" fn md_haar_sre2(n_qubits: usize) -> f64 {
    haar_sre2(n_qubits)
}

/// Disordered TFIM with on-site fields uniform in `[-w, w]`, unit transverse
/// field and default couplings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_realization_tfim(
    n_sites: usize,
    w: f64,
    seed: u64,
    out_real: *mut *mut MdRealization,
) -> MdStatus {
    guard(|| {
        let o = out(out_real, "out_real")?;
        *o = boxed(MdRealization(sample_tfim(&TfimParams::new(n_sites, w), seed)?));
        Ok(())
    })
}

/// ℓ-bit model with localization length `xi`, couplings up to `max_order`
/// spins and fields uniform in `[-w, w]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_realization_lbit(
    n_sites: usize,
    xi: f64,
    max_order: usize,
    w: f64,
    seed: u64,
    out_real: *mut *mut MdRealization,
) -> MdStatus {
    guard(|| {
        let o = out(out_real, "out_real")?;
        let mut p = LBitParams::new(n_sites, xi, max_order);
        p.fields = FieldDistribution::Uniform { half_width: w };
        *o = boxed(MdRealization(sample_lbit(&p, seed)?));
        Ok(())
    })
}

/// Number of sites, or 0 for a null handle.
///
/// # Safety
/// `real` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_realization_n_sites(real: *const MdRealization) -> usize {
    real.as_ref().map_or(0, |r| r.0.n_sites())
}

/// Copies the on-site fields into `fields`, of length `len == L`.
///
/// # Safety
/// `real` must be a live handle; `fields` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn md_realization_fields(real: *const MdRealization, fields: *mut f64, len: usize) -> MdStatus {
    guard(|| {
        let r = &get(real, "real")?.0;
        if len != r.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: r.n_sites(),
                got: len,
            }
            .into());
        }
        if fields.is_null() {
            return Err(Fail::Null("fields"));
        }
        std::slice::from_raw_parts_mut(fields, len).copy_from_slice(&r.fields);
        Ok(())
    })
}

/// Releases a realization; null is ignored.
///
/// # Safety
/// `real` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_realization_free(real: *mut MdRealization) {
    if !real.is_null() {
        drop(Box::from_raw(real));
    }
}

/// `e^{-iHt}|state>` as a new handle. The TFIM uses the Chebyshev
/// propagator with truncation tolerance `tol`; ℓ-bit dynamics is diagonal
/// and ignores `tol`.
///
/// # Safety
/// `real` and `state` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_evolve(
    real: *const MdRealization,
    state: *const MdState,
    t: f64,
    tol: f64,
    out_state: *mut *mut MdState,
) -> MdStatus {
    guard(|| {
        let o = out(out_state, "out_state")?;
        let r = &get(real, "real")?.0;
        let s = &get(state, "state")?.0;
        if s.n_qubits() != r.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: r.n_sites(),
                got: s.n_qubits(),
            }
            .into());
        }
        let next = if r.is_tfim() {
            let op = TfimOperator::new(r)?;
            chebyshev_step(&op, &energy_bounds(r)?, s, t, tol)?
        } else {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")).into());
            }
            diagonal_evolve(&lbit_energy_table(r)?, s, t)?
        };
        *o = boxed(MdState(next));
        Ok(())
    })
}

/// Disorder-averaged `M_2` of a product state under non-interacting
/// ℓ-bits with fields uniform in `[-w, w]`, by quadrature.
///
/// # Safety
/// `theta` and `phi` must point to `n_sites` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_anderson_sre(
    n_sites: usize,
    theta: *const f64,
    phi: *const f64,
    w: f64,
    t: f64,
    out_value: *mut f64,
) -> MdStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        *o = anderson_sre(&angles(n_sites, theta, phi)?, w, t, QuadratureSpec::default())?;
        Ok(())
    })
}
