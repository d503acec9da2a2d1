//! Analytical predictions and fits: the non-interacting (Anderson) SRE by
//! quadrature, the saturation law `M_sat - c t^{-beta}`, power-law decays,
//! curve collapse and the ergodic/localized crossover table.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magic::haar_sre2;
use crate::state::{Bloch, BlochAngles};

/// `sum_sigma tr(rho_k(t) sigma)^4 = (4 - sin^2(2 theta) - sin^4(theta) sin^2(delta)) / 2`
/// with `delta = 4 h t + 2 phi`.
pub fn anderson_site_factor(theta: f64, phi: f64, h: f64, t: f64) -> f64 {
    site_factor_at(theta, 4.0 * h * t + 2.0 * phi)
}

fn site_factor_at(theta: f64, delta: f64) -> f64 {
    let s2 = (2.0 * theta).sin();
    let s = theta.sin();
    let sd = delta.sin();
    0.5 * (4.0 - s2 * s2 - s.powi(4) * sd * sd)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-8,
            max_depth: 40,
        }
    }
}

// 15-point Kronrod rule with its embedded 7-point Gauss rule, on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration by recursive bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: QuadratureSpec) -> Result<f64> {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
        let (value, err) = gauss_kronrod(f, a, b);
        if err <= tol {
            return Ok(value);
        }
        if depth == 0 {
            return Err(Error::Quadrature(format!(
                "error estimate {err:.3e} above {tol:.3e} on [{a}, {b}] at maximum depth"
            )));
        }
        let m = 0.5 * (a + b);
        Ok(recurse(f, a, m, 0.5 * tol, depth - 1)? + recurse(f, m, b, 0.5 * tol, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    recurse(&f, a, b, spec.abs_tol, spec.max_depth)
}

/// Disorder-averaged `M_2` of one site: `-<log2(factor / 2)>` over `h`
/// uniform on `[-W, W]`.
///
/// The integrand depends on `h` only through `delta = 4 h t + 2 phi`, and is
/// `pi`-periodic in `delta`, so the average over the `delta` interval is
/// reduced to whole periods plus a remainder before integrating.
fn anderson_site_average(site: &Bloch, w: f64, t: f64, spec: QuadratureSpec) -> Result<f64> {
    let g = |delta: f64| -(site_factor_at(site.theta, delta) / 2.0).log2();
    let center = 2.0 * site.phi;
    let half = 4.0 * w * t;
    if half == 0.0 {
        return Ok(g(center));
    }
    let span = 2.0 * half;
    let periods = (span / PI).floor();
    let lo = center - half;
    let mut total = 0.0;
    if periods > 0.0 {
        total += periods * integrate(g, 0.0, PI, spec)?;
    }
    let rest_start = lo + periods * PI;
    total += integrate(g, rest_start, center + half, spec)?;
    Ok(total / span)
}

/// Analytical disorder-averaged `M_2(t)` (bits) of a product state evolving
/// under non-interacting ℓ-bits with fields uniform on `[-W, W]`.
pub fn anderson_sre(angles: &BlochAngles, w: f64, t: f64, spec: QuadratureSpec) -> Result<f64> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::invalid(format!("W must be > 0, got {w}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    angles
        .sites()
        .iter()
        .map(|s| anderson_site_average(s, w, t, spec))
        .sum()
}

/// `t -> infinity` per-site value for `theta = pi/2`: the mean of
/// `-log2(1 - sin^2(u)/4)` over a period, `-log2((7 + 4 sqrt 3) / 16)`.
pub fn anderson_equator_plateau() -> f64 {
    -((7.0 + 48f64.sqrt()) / 16.0).log2()
}

/// `M_2^sat - M_2(t = 0)` with the plateau averaged over eleven log-spaced
/// times in `[1e5, 1e6]`.
pub fn magic_gain(angles: &BlochAngles, w: f64) -> Result<f64> {
    let spec = QuadratureSpec::default();
    let initial = anderson_sre(angles, w, 0.0, spec)?;
    let n = 11;
    let mut plateau = 0.0;
    for i in 0..n {
        let t = 1e5 * 10f64.powf(i as f64 / (n - 1) as f64);
        plateau += anderson_sre(angles, w, t, spec)?;
    }
    Ok(plateau / n as f64 - initial)
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub residual_rms: f64,
}

pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::invalid("regression needs two or more paired points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let s2 = if n > 2 { rss / (nf - 2.0) } else { 0.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (s2 / sxx).sqrt(),
        intercept_stderr: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        residual_rms: (rss / nf).sqrt(),
    })
}

/// Fit of `M(t) = M_sat - c t^{-beta}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub m_sat: f64,
    pub c: f64,
    pub beta: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub m_sat_stderr: f64,
    pub c_stderr: f64,
    pub beta_stderr: f64,
    pub n_points: usize,
    /// Constant input: `beta` is undefined (NaN) and `c = 0`.
    pub degenerate: bool,
}

pub const BETA_RANGE: (f64, f64) = (0.01, 2.0);
const BETA_GRID: usize = 400;

/// Closed-form `(M_sat, c, rss)` at fixed `beta`.
fn saturation_inner(t: &[f64], y: &[f64], beta: f64) -> (f64, f64, f64) {
    let x: Vec<f64> = t.iter().map(|t| t.powf(-beta)).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let m_sat = my - slope * mx;
    let rss = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - m_sat - slope * a).powi(2))
        .sum();
    (m_sat, -slope, rss)
}

/// Least-squares saturation fit on points with `window.0 <= t <= window.1`:
/// a grid over `beta` in `[0.01, 2]`, refined by golden-section search, with
/// `(M_sat, c)` solved exactly at each `beta`.
pub fn fit_power_law_saturation(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<SaturationFit> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    if !(window.0 < window.1) {
        return Err(Error::invalid(format!("bad fit window {window:?}")));
    }
    let mut pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 8 {
        return Err(Error::invalid(format!(
            "need at least 8 points in the window, found {}",
            pts.len()
        )));
    }
    if pts.iter().any(|(t, v)| !v.is_finite() || !(*t > 0.0)) {
        return Err(Error::invalid("values must be finite and times positive"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let n = t.len();

    let mean = y.iter().sum::<f64>() / n as f64;
    if y.iter().all(|v| (v - mean).abs() <= 1e-14 * mean.abs().max(1.0)) {
        return Ok(SaturationFit {
            m_sat: mean,
            c: 0.0,
            beta: f64::NAN,
            window,
            residual_rms: 0.0,
            m_sat_stderr: 0.0,
            c_stderr: 0.0,
            beta_stderr: f64::NAN,
            n_points: n,
            degenerate: true,
        });
    }

    let (lo, hi) = BETA_RANGE;
    let step = (hi - lo) / BETA_GRID as f64;
    let rss_at = |b: f64| saturation_inner(&t, &y, b).2;
    let mut best = 0;
    let mut best_rss = f64::INFINITY;
    for i in 0..=BETA_GRID {
        let r = rss_at(lo + step * i as f64);
        if r < best_rss {
            best_rss = r;
            best = i;
        }
    }
    let mut a = (lo + step * best.saturating_sub(1) as f64).max(lo);
    let mut b = (lo + step * (best + 1) as f64).min(hi);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (rss_at(x1), rss_at(x2));
    for _ in 0..200 {
        if b - a < 1e-13 {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = rss_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = rss_at(x2);
        }
    }
    let mut beta = 0.5 * (a + b);
    if rss_at(lo + step * best as f64) < rss_at(beta) {
        beta = lo + step * best as f64;
    }
    let (m_sat, c, rss) = saturation_inner(&t, &y, beta);

    // covariance from the Jacobian of M_sat - c t^{-beta} at the optimum
    let mut jtj = Matrix3::<f64>::zeros();
    for ti in &t {
        let p = ti.powf(-beta);
        let row = [1.0, -p, c * p * ti.ln()];
        for r in 0..3 {
            for s in 0..3 {
                jtj[(r, s)] += row[r] * row[s];
            }
        }
    }
    let s2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let cov = jtj.try_inverse().map(|m| m * s2);
    let se = |i: usize| cov.map(|m| m[(i, i)].max(0.0).sqrt()).unwrap_or(f64::NAN);
    Ok(SaturationFit {
        m_sat,
        c,
        beta,
        window,
        residual_rms: (rss / n as f64).sqrt(),
        m_sat_stderr: se(0),
        c_stderr: se(1),
        beta_stderr: se(2),
        n_points: n,
        degenerate: false,
    })
}

/// `W(t) = amplitude * t^{-lambda}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub lambda: f64,
    pub lambda_stderr: f64,
    pub n_points: usize,
}

/// Linear regression of `ln W` on `ln t`.
pub fn fit_power_law_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 8 {
        return Err(Error::invalid("need at least 8 paired points"));
    }
    if values.iter().chain(times).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("power-law decay fit needs positive values and times"));
    }
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = linear_regression(&lx, &ly)?;
    Ok(DecayFit {
        amplitude: fit.intercept.exp(),
        lambda: -fit.slope,
        lambda_stderr: fit.slope_stderr,
        n_points: times.len(),
    })
}

/// Exponential size dependence `Delta M_2^inf(L) = prefactor * e^{-lambda L}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteFit {
    pub prefactor: f64,
    pub lambda: f64,
    pub lambda_stderr: f64,
}

pub fn delta_m2_asymptote_fit(sizes: &[usize], deltas: &[f64]) -> Result<AsymptoteFit> {
    if sizes.len() != deltas.len() || sizes.len() < 3 {
        return Err(Error::invalid("need at least 3 sizes"));
    }
    if deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::invalid("asymptotic deviations must be positive"));
    }
    let x: Vec<f64> = sizes.iter().map(|l| *l as f64).collect();
    let y: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let fit = linear_regression(&x, &y)?;
    Ok(AsymptoteFit {
        prefactor: fit.intercept.exp(),
        lambda: -fit.slope,
        lambda_stderr: fit.slope_stderr,
    })
}

/// Outcome of rescaling a target `M(S)` curve onto a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    /// Target values are divided by `f`.
    pub f: f64,
    pub s_grid: Vec<f64>,
    pub reference: Vec<f64>,
    pub target: Vec<f64>,
    /// RMS of `target / f - reference` on the grid.
    pub deviation: f64,
}

pub const COLLAPSE_GRID: usize = 64;

/// Sorts by `S` and keeps only points that strictly increase in `S`.
fn clean_curve(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = curve
        .iter()
        .copied()
        .filter(|(s, m)| s.is_finite() && m.is_finite())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().map_or(true, |q| p.0 > q.0) {
            out.push(p);
        }
    }
    out
}

fn interpolate(curve: &[(f64, f64)], s: f64) -> f64 {
    let idx = curve.partition_point(|p| p.0 <= s);
    if idx == 0 {
        return curve[0].1;
    }
    if idx >= curve.len() {
        return curve[curve.len() - 1].1;
    }
    let (s0, m0) = curve[idx - 1];
    let (s1, m1) = curve[idx];
    m0 + (m1 - m0) * (s - s0) / (s1 - s0)
}

/// Rescale factor `f = sum M_t^2 / sum M_t M_r` minimizing `sum (M_t / f - M_r)^2`
/// on a 64-point grid over the shared `S` range. Curves are `(S, M)` pairs.
pub fn collapse_factor(reference: &[(f64, f64)], target: &[(f64, f64)]) -> Result<CollapseResult> {
    let r = clean_curve(reference);
    let t = clean_curve(target);
    if r.len() < 2 || t.len() < 2 {
        return Err(Error::invalid("collapse needs at least two distinct S values per curve"));
    }
    let lo = r[0].0.max(t[0].0);
    let hi = r[r.len() - 1].0.min(t[t.len() - 1].0);
    if !(hi > lo) {
        return Err(Error::invalid(format!("curves do not overlap in S ({lo} >= {hi})")));
    }
    let s_grid: Vec<f64> = (0..COLLAPSE_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (COLLAPSE_GRID - 1) as f64)
        .collect();
    let mr: Vec<f64> = s_grid.iter().map(|s| interpolate(&r, *s)).collect();
    let mt: Vec<f64> = s_grid.iter().map(|s| interpolate(&t, *s)).collect();
    let num: f64 = mt.iter().map(|v| v * v).sum();
    let den: f64 = mt.iter().zip(&mr).map(|(a, b)| a * b).sum();
    if !(den.abs() > 0.0) {
        return Err(Error::DegenerateFit("target and reference are orthogonal".into()));
    }
    let f = num / den;
    let deviation = (mt
        .iter()
        .zip(&mr)
        .map(|(a, b)| (a / f - b).powi(2))
        .sum::<f64>()
        / COLLAPSE_GRID as f64)
        .sqrt();
    Ok(CollapseResult {
        f,
        s_grid,
        reference: mr,
        target: mt,
        deviation,
    })
}

/// Disorder-averaged `M_2(t)` of one `(L, W)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossoverCell {
    pub n_sites: usize,
    pub disorder: f64,
    pub times: Vec<f64>,
    pub m2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub n_sites: usize,
    pub disorder: f64,
    pub m2: f64,
    pub delta_m2: f64,
    /// `Delta M_2 < -1e-6`: the ensemble mean exceeds the Haar value.
    pub above_haar: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverSlope {
    pub disorder: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub n_sizes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossoverTable {
    pub t_eval: f64,
    pub rows: Vec<CrossoverRow>,
    pub slopes: Vec<CrossoverSlope>,
    /// Cells that lack `t_eval`, with the reason.
    pub missing: Vec<String>,
}

/// `Delta M_2 = M_2^Haar(L) - M_2(t_eval)` per cell and, per `W`, the
/// least-squares slope of `Delta M_2` against `L`. `t_eval` must be on each
/// cell's grid to relative precision `1e-9`; cells without it are reported.
pub fn crossover_scan(cells: &[CrossoverCell], t_eval: f64) -> CrossoverTable {
    let mut table = CrossoverTable {
        t_eval,
        ..Default::default()
    };
    let mut by_w: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
    for cell in cells {
        let hit = cell
            .times
            .iter()
            .position(|t| (t - t_eval).abs() <= 1e-9 * t_eval.abs().max(1e-300));
        let Some(i) = hit else {
            table.missing.push(format!(
                "L={} W={}: t={} not on grid",
                cell.n_sites, cell.disorder, t_eval
            ));
            continue;
        };
        let m2 = cell.m2[i];
        let delta = haar_sre2(cell.n_sites) - m2;
        table.rows.push(CrossoverRow {
            n_sites: cell.n_sites,
            disorder: cell.disorder,
            m2,
            delta_m2: delta,
            above_haar: delta < -1e-6,
        });
        by_w.entry(cell.disorder.to_bits()).or_default().push((cell.n_sites, delta));
    }
    table
        .rows
        .sort_by(|a, b| a.disorder.total_cmp(&b.disorder).then(a.n_sites.cmp(&b.n_sites)));
    let mut slopes: Vec<CrossoverSlope> = by_w
        .into_iter()
        .filter_map(|(bits, mut pts)| {
            pts.sort_by_key(|p| p.0);
            let x: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let fit = linear_regression(&x, &y).ok()?;
            Some(CrossoverSlope {
                disorder: f64::from_bits(bits),
                slope: fit.slope,
                slope_stderr: fit.slope_stderr,
                n_sizes: pts.len(),
            })
        })
        .collect();
    slopes.sort_by(|a, b| a.disorder.total_cmp(&b.disorder));
    table.slopes = slopes;
    table
}
