//! Composite convergence coefficients, iteration bounds and trace
//! diagnostics.
//!
//! The error recursion Δ_{t+1} ≤ ξ1 Δ_t + ξ2 Δ_t² is quadratic-dominated far
//! from the optimum and linear-dominated near it.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SchemeFamily;
use crate::trace::Trace;

/// Absolute constant for the S1 sampling term (C = 6K).
pub const C_ABS_S1: f64 = 6.0;
/// Absolute constant for the S2 sampling term (8K).
pub const C_ABS_S2: f64 = 8.0;
/// Smallest Δ used by the rate diagnostics by default.
pub const DEFAULT_DELTA_FLOOR: f64 = 1e-10;
/// Window width of [`phase_split`].
pub const PHASE_WINDOW: usize = 4;
pub const QUADRATIC_SLOPE: f64 = 1.6;
pub const LINEAR_SLOPE: f64 = 1.2;
/// Number of tail records used by [`local_rate`].
pub const RATE_TAIL: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub xi1: f64,
    pub xi2: f64,
    pub lambda_p: f64,
    pub lambda_r1: f64,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub c_abs: f64,
    pub scheme_kind: SchemeFamily,
    /// Concentration slack δ, when computed.
    pub delta: Option<f64>,
    /// False when K or M are surrogates (SVM) or infinite.
    pub covered: bool,
    /// The S2 logarithm was clamped below at 1.
    #[serde(default)]
    pub log_clamped: bool,
}

fn check_spectrum(lambda_p: f64, lambda_r1: f64, eta: f64) -> Result<()> {
    if !(lambda_r1 > 0.0) {
        return Err(Error::DegenerateSpectrum {
            lambda: lambda_r1,
            tol: 0.0,
        });
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {eta}")));
    }
    if !(lambda_p >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda_p must be non-negative, got {lambda_p}")));
    }
    Ok(())
}

/// ξ1 = 1 − η λ_p/λ_{r+1} + η c K/λ_{r+1} · √(log p/|S|), ξ2 = η M/(2 λ_{r+1}).
#[allow(clippy::too_many_arguments)]
pub fn coefficients_s1(
    lambda_p: f64,
    lambda_r1: f64,
    eta: f64,
    k: f64,
    m: f64,
    p: usize,
    sample_size: usize,
    c_abs: f64,
) -> Result<CoefficientReport> {
    check_spectrum(lambda_p, lambda_r1, eta)?;
    if sample_size == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let term = ((p as f64).ln().max(0.0) / sample_size as f64).sqrt();
    Ok(CoefficientReport {
        xi1: 1.0 - eta * lambda_p / lambda_r1 + eta * c_abs * k / lambda_r1 * term,
        xi2: eta * m / (2.0 * lambda_r1),
        lambda_p,
        lambda_r1,
        eta,
        k,
        m,
        c_abs,
        scheme_kind: SchemeFamily::S1,
        delta: None,
        covered: k.is_finite() && m.is_finite(),
        log_clamped: false,
    })
}

/// S2 coefficients: the sampling term becomes
/// √((p/|S|) · log(diam(C)² (M_n + M_S)² |S| / K²)).
///
/// A log argument in (1, e) is clamped to e and flagged; an argument ≤ 1 is
/// outside the regime of the bound.
#[allow(clippy::too_many_arguments)]
pub fn coefficients_s2(
    lambda_p: f64,
    lambda_r1: f64,
    eta: f64,
    k: f64,
    m_n: f64,
    m_s: f64,
    p: usize,
    sample_size: usize,
    diam: f64,
    c_abs: f64,
) -> Result<CoefficientReport> {
    check_spectrum(lambda_p, lambda_r1, eta)?;
    if !diam.is_finite() {
        return Err(Error::RequiresBoundedSet);
    }
    if !(diam > 0.0) || sample_size == 0 || !(k > 0.0) {
        return Err(Error::InvalidInput("S2 coefficients need diam(C), |S|, K > 0".into()));
    }
    let s = sample_size as f64;
    let arg = diam * diam * (m_n + m_s).powi(2) * s / (k * k);
    if !(arg > 1.0) {
        return Err(Error::OutOfRegime(format!("log argument {arg:e} is at most 1")));
    }
    let log_clamped = arg < std::f64::consts::E;
    let log = if log_clamped { 1.0 } else { arg.ln() };
    let term = (p as f64 / s * log).sqrt();
    Ok(CoefficientReport {
        xi1: 1.0 - eta * lambda_p / lambda_r1 + eta * c_abs * k / lambda_r1 * term,
        xi2: eta * m_n / (2.0 * lambda_r1),
        lambda_p,
        lambda_r1,
        eta,
        k,
        m: m_n,
        c_abs,
        scheme_kind: SchemeFamily::S2,
        delta: None,
        covered: k.is_finite() && m_n.is_finite() && m_s.is_finite(),
        log_clamped,
    })
}

/// Bound δ on |ξ1^t − ξ1*| for quadratic objectives under S1 with η = 1:
/// c1 K s / (k (k − c2 K s)), s = √(log p/|S|).
pub fn coefficient_drift_bound(k_lower: f64, k: f64, p: usize, sample_size: usize, c1: f64, c2: f64) -> Result<f64> {
    if !(k_lower > 0.0) || sample_size == 0 {
        return Err(Error::InvalidInput("drift bound needs k > 0 and |S| > 0".into()));
    }
    let s = k * ((p as f64).ln().max(0.0) / sample_size as f64).sqrt();
    let margin = k_lower - c2 * s;
    if !(margin > 0.0) {
        return Err(Error::SampleTooSmall { margin });
    }
    Ok(c1 * s / (k_lower * margin))
}

/// Largest Δ0 guaranteed to converge: (1 − ξ1* − δ)/(ξ2* + δ).
pub fn sufficient_start_radius(xi1_star: f64, xi2_star: f64, delta: f64) -> Result<f64> {
    if !(xi2_star >= 0.0 && delta >= 0.0) {
        return Err(Error::InvalidInput("need xi2 >= 0 and delta >= 0".into()));
    }
    let lead = xi1_star + delta;
    if !(lead < 1.0) {
        return Err(Error::NoGuarantee { value: lead });
    }
    let denom = xi2_star + delta;
    if denom == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - lead) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeBound {
    pub xi1: f64,
    pub xi2: f64,
    pub delta0: f64,
}

impl CompositeBound {
    pub fn new(xi1: f64, xi2: f64, delta0: f64) -> Self {
        Self { xi1, xi2, delta0 }
    }

    /// Worst case of the recursion: ξ1 Δ + ξ2 Δ².
    pub fn next(&self, delta: f64) -> f64 {
        self.xi1 * delta + self.xi2 * delta * delta
    }

    /// The open interval D over which T(δ) is minimized.
    pub fn domain(&self, eps: f64) -> Result<(f64, f64)> {
        let CompositeBound { xi1, xi2, delta0 } = *self;
        if !(xi1 > 0.0 && xi1 < 1.0) || !(xi2 >= 0.0 && xi2.is_finite()) {
            return Err(Error::NoBound(format!("need 0 < xi1 < 1 and finite xi2 >= 0, got {xi1}, {xi2}")));
        }
        if !(delta0 > 0.0) || !(eps > 0.0 && eps < delta0) {
            return Err(Error::NoBound(format!("need 0 < eps < delta0, got {eps}, {delta0}")));
        }
        if !(xi2 * delta0 < 1.0 - xi1) {
            return Err(Error::NoBound(format!(
                "delta0 = {delta0} is not below (1 - xi1)/xi2 = {}",
                (1.0 - xi1) / xi2
            )));
        }
        let lo = eps.max(xi1 * delta0 / (1.0 - xi2 * delta0));
        if !(lo < delta0) {
            return Err(Error::NoBound("the interval D is empty".into()));
        }
        Ok((lo, delta0))
    }

    /// T(δ) = log2(log(ξ1 + δξ2) / log((Δ0/δ)(ξ1 + δξ2))) + log(ε/δ)/log(ξ1 + ξ2δ).
    pub fn iterations_at(&self, delta: f64, eps: f64) -> f64 {
        let rate = self.xi1 + delta * self.xi2;
        let quad = (rate.ln() / (self.delta0 / delta * rate).ln()).log2();
        quad + (eps / delta).ln() / rate.ln()
    }
}

/// Minimizes T(δ) over D; returns (T(δ*), δ*).
///
/// A log-spaced scan brackets the minimum, golden-section search refines it
/// to relative tolerance 1e−6, and both endpoints (nudged inward by
/// 1e−12·|D|) are compared against the refined point.
pub fn iteration_bound(bound: &CompositeBound, eps: f64) -> Result<(f64, f64)> {
    let (lo, hi) = bound.domain(eps)?;
    let width = hi - lo;
    let a = lo + 1e-12 * width;
    let b = hi - 1e-12 * width;
    let t = |d: f64| {
        let v = bound.iterations_at(d, eps);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    const SCAN: usize = 64;
    let (la, lb) = (a.ln(), b.ln());
    let grid: Vec<f64> = (0..=SCAN)
        .map(|i| (la + (lb - la) * i as f64 / SCAN as f64).exp())
        .collect();
    let best_i = (0..=SCAN)
        .min_by(|&i, &j| t(grid[i]).total_cmp(&t(grid[j])))
        .unwrap_or(0);
    let mut x0 = grid[best_i.saturating_sub(1)];
    let mut x1 = grid[(best_i + 1).min(SCAN)];

    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = x1 - phi * (x1 - x0);
    let mut d = x0 + phi * (x1 - x0);
    let (mut fc, mut fd) = (t(c), t(d));
    while (x1 - x0) > 1e-6 * x1.abs().max(f64::MIN_POSITIVE) {
        if fc <= fd {
            x1 = d;
            d = c;
            fd = fc;
            c = x1 - phi * (x1 - x0);
            fc = t(c);
        } else {
            x0 = c;
            c = d;
            fc = fd;
            d = x0 + phi * (x1 - x0);
            fd = t(d);
        }
    }
    let mid = 0.5 * (x0 + x1);
    let (delta, value) = [a, b, mid, grid[best_i]]
        .into_iter()
        .map(|x| (x, t(x)))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("non-empty candidate list");
    if !value.is_finite() {
        return Err(Error::NoBound("T(delta) is not finite on D".into()));
    }
    Ok((value.max(0.0), delta))
}

/// Least-squares slope of log Δ_t against t over the last [`RATE_TAIL`]
/// entries with Δ_t > `floor`. Diagnostic estimate of log(linear rate).
pub fn local_rate(deltas: &[f64], floor: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > floor && d.is_finite())
        .map(|(t, d)| (t as f64, d.ln()))
        .collect();
    if pts.len() < RATE_TAIL {
        return Err(Error::InsufficientData(format!(
            "{} distances above {floor:e}, need {RATE_TAIL}",
            pts.len()
        )));
    }
    Ok(slope(&pts[pts.len() - RATE_TAIL..]))
}

/// [`local_rate`] on the distances recorded in a trace.
pub fn trace_local_rate(trace: &Trace, floor: f64) -> Result<f64> {
    local_rate(&trace.distances(), floor)
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSplit {
    /// Iterations covered by the quadratic phase.
    pub quad_phase: Option<Range<usize>>,
    pub lin_phase: Option<Range<usize>>,
    /// Slope of the earliest quadratic window.
    pub quad_slope: Option<f64>,
    /// Slope of the last linear window.
    pub lin_slope: Option<f64>,
    /// Slope of window k, which regresses log Δ_{t+1} on log Δ_t for
    /// t in k..k+4.
    pub window_slopes: Vec<f64>,
}

/// Splits a distance sequence into quadratic and linear phases.
///
/// Uses the leading run of distances above `floor`. Window k fits
/// log Δ_{t+1} = α + β log Δ_t over t = k..k+4. The quadratic phase is the
/// run of windows with β ≥ 1.6 starting at the earliest one; the linear
/// phase is the run of windows with β ≤ 1.2 ending at the last one.
pub fn phase_split(deltas: &[f64], floor: f64) -> Result<PhaseSplit> {
    let len = deltas
        .iter()
        .position(|d| !(*d > floor && d.is_finite()))
        .unwrap_or(deltas.len());
    if len < 8 {
        return Err(Error::InsufficientData(format!(
            "{len} leading distances above {floor:e}, need 8"
        )));
    }
    let logs: Vec<f64> = deltas[..len].iter().map(|d| d.ln()).collect();
    let pairs: Vec<(f64, f64)> = logs.windows(2).map(|w| (w[0], w[1])).collect();
    let window_slopes: Vec<f64> = pairs.windows(PHASE_WINDOW).map(slope).collect();

    let span = |first: usize, last: usize| first..last + PHASE_WINDOW + 1;
    let quad = window_slopes.iter().position(|&b| b >= QUADRATIC_SLOPE).map(|first| {
        let last = window_slopes[first..]
            .iter()
            .take_while(|&&b| b >= QUADRATIC_SLOPE)
            .count()
            + first
            - 1;
        (first, last)
    });
    let lin = window_slopes.iter().rposition(|&b| b <= LINEAR_SLOPE).map(|last| {
        let first = last + 1
            - window_slopes[..=last]
                .iter()
                .rev()
                .take_while(|&&b| b <= LINEAR_SLOPE)
                .count();
        (first, last)
    });
    if quad.is_none() && lin.is_none() {
        return Err(Error::PhasesUndetected);
    }
    Ok(PhaseSplit {
        quad_phase: quad.map(|(a, b)| span(a, b)),
        lin_phase: lin.map(|(a, b)| span(a, b)),
        quad_slope: quad.map(|(a, _)| window_slopes[a]),
        lin_slope: lin.map(|(_, b)| window_slopes[b]),
        window_slopes,
    })
}

/// [`phase_split`] on the distances recorded in a trace.
pub fn trace_phase_split(trace: &Trace, floor: f64) -> Result<PhaseSplit> {
    phase_split(&trace.distances(), floor)
}

/// Effective rank tr(H)/λ_1 from a spectrum.
pub fn effective_rank(eigenvalues: &[f64]) -> f64 {
    let top = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    eigenvalues.iter().sum::<f64>() / top
}

/// Sample size (K/λ_p)² log p.
pub fn suggested_sample_size(k: f64, lambda_p: f64, p: usize) -> f64 {
    (k / lambda_p).powi(2) * (p as f64).ln()
}
