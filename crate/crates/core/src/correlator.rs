//! Scattered-signal spectra, g²(τ) by quantum regression, the 16 ps
//! rebin + 14 GHz low-pass smoothing of g², and FFT peak extraction.

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64 as FftC;
use rustfft::FftPlanner;

use crate::detection::{displaced_operator, BackgroundModel};
use crate::fit::{self, SimplexOptions};
use crate::hilbert::{dressed_energy, Branch, DetuningSpec, DressedLevel, JcSystem, RateSet};
use crate::liouvillian::{devectorize, steady_state, vectorize, DensityMatrix, Propagator, SuperOperator};
use crate::{linalg, CMatrix, Error, Result, C64};

pub const DEFAULT_STEP_PS: f64 = 4.0;
pub const DEFAULT_SPAN_PS: f64 = 3000.0;
pub const SMOOTHING_BIN_PS: f64 = 16.0;
pub const SMOOTHING_CUTOFF_GHZ: f64 = 14.0;
pub const MIN_FFT_SAMPLES: usize = 256;
pub const DEFAULT_PROMINENCE: f64 = 0.1;
/// Default overall detection efficiency.
pub const DEFAULT_ETA_DET: f64 = 0.12;

/// Uniform delay grid starting at τ = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGrid {
    step_ps: f64,
    len: usize,
}

impl TauGrid {
    pub fn new(step_ps: f64, span_ps: f64) -> Result<Self> {
        if !(step_ps.is_finite() && step_ps > 0.0 && span_ps.is_finite() && span_ps >= step_ps) {
            return Err(Error::InvalidParameter(format!("tau grid step {step_ps} ps, span {span_ps} ps")));
        }
        Ok(Self { step_ps, len: (span_ps / step_ps).round() as usize + 1 })
    }

    pub fn step_ps(&self) -> f64 {
        self.step_ps
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn span_ps(&self) -> f64 {
        self.step_ps * (self.len - 1) as f64
    }
}

impl Default for TauGrid {
    fn default() -> Self {
        Self::new(DEFAULT_STEP_PS, DEFAULT_SPAN_PS).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    step_ps: f64,
    values: Vec<f64>,
}

impl CorrelationTrace {
    pub fn new(step_ps: f64, values: Vec<f64>) -> Result<Self> {
        if !(step_ps.is_finite() && step_ps > 0.0) {
            return Err(Error::InvalidParameter(format!("trace step {step_ps} ps")));
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite() || *v < -1e-9) {
            return Err(Error::InvalidParameter("g² trace must be non-empty, finite and non-negative".into()));
        }
        Ok(Self { step_ps, values })
    }

    pub fn step_ps(&self) -> f64 {
        self.step_ps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tau_ps(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.step_ps).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Even extension to negative delays in FFT order:
    /// `[y₀, y₁ … y_N, y_N … y₁]`.
    fn mirrored(&self) -> Vec<f64> {
        let y = &self.values;
        y.iter().copied().chain(y[1..].iter().rev().copied()).collect()
    }
}

/// κ⟨a†a⟩.
pub fn emission_rate(rho: &DensityMatrix, sys: &JcSystem) -> f64 {
    sys.rates().kappa() * rho.expect(sys.number()).re
}

/// g²(τ) = tr(c†c·e^{Dτ}[cρc†]) / ⟨c†c⟩² on a uniform grid, with one cached
/// step propagator.
pub fn g2_tau(d: &SuperOperator, rho: &DensityMatrix, c: &CMatrix, grid: TauGrid) -> Result<CorrelationTrace> {
    let dim = rho.dim();
    if d.dim() != dim || c.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: d.dim() });
    }
    let cd = linalg::dagger(c);
    let intensity = cd.dot(c);
    let norm = rho.expect(&intensity).re;
    if norm <= f64::MIN_POSITIVE.sqrt() {
        return Err(Error::ZeroDenominator("⟨c†c⟩ vanishes; the system is not driven".into()));
    }
    // tr(N X) = Σ_ij N_ji X_ij = vec(Nᵀ)·vec(X).
    let probe = vectorize(&intensity.t().to_owned());
    let prop = Propagator::new(d, grid.step_ps() * 1e-3)?;
    let mut v = vectorize(&c.dot(rho.matrix()).dot(&cd));
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        if k > 0 {
            v = prop.apply(&v);
        }
        let num: C64 = probe.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        values.push(num.re / (norm * norm));
    }
    CorrelationTrace::new(grid.step_ps(), values)
}

/// ⟨c†²c²⟩/⟨c†c⟩² straight from the steady state.
pub fn g2_zero(rho: &DensityMatrix, c: &CMatrix) -> Result<f64> {
    crate::detection::g2_zero_of(rho, c)
}

/// Smoothed g²(0) as applied to measured histograms: mirror the trace,
/// rebin to 16 ps with a boxcar centred on multiples of 16 ps, zero all
/// Fourier components above 14 GHz and read back τ = 0.
pub fn g2_zero_smoothed(trace: &CorrelationTrace) -> Result<f64> {
    let s = trace.step_ps();
    let ratio = SMOOTHING_BIN_PS / s;
    let r = ratio.round() as usize;
    if s > SMOOTHING_BIN_PS || (ratio - r as f64).abs() > 1e-9 || r == 0 {
        return Err(Error::GridTooCoarse(format!("step {s} ps must divide {SMOOTHING_BIN_PS} ps")));
    }
    let y = trace.values();
    let n = y.len() - 1;
    let sample = |j: i64| y[j.unsigned_abs() as usize];

    // Boxcar of total width 16 ps: r even → trapezoid over r+1 samples with
    // half-weight ends; r odd → r equal weights.
    let reach = r / 2;
    if n < reach + r {
        return Err(Error::GridTooCoarse("trace shorter than two smoothing bins".into()));
    }
    let m_max = (n - reach) / r;
    let bin = |m: i64| -> f64 {
        let centre = m * r as i64;
        if r.is_multiple_of(2) {
            let h = reach as i64;
            let mut acc = 0.5 * (sample(centre - h) + sample(centre + h));
            for j in (centre - h + 1)..(centre + h) {
                acc += sample(j);
            }
            acc / r as f64
        } else {
            let h = reach as i64;
            ((centre - h)..=(centre + h)).map(sample).sum::<f64>() / r as f64
        }
    };
    let len = 2 * m_max + 1;
    let mut buf: Vec<FftC> = (0..len)
        .map(|k| {
            let m = if k <= m_max { k as i64 } else { k as i64 - len as i64 };
            FftC::new(bin(m), 0.0)
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let df_ghz = 1.0 / (len as f64 * SMOOTHING_BIN_PS * 1e-3);
    for (k, z) in buf.iter_mut().enumerate() {
        let kk = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
        if (kk * df_ghz).abs() > SMOOTHING_CUTOFF_GHZ {
            *z = FftC::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    Ok(buf[0].re / len as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FftPeaks {
    /// Ordinary frequencies (GHz), ascending.
    pub frequencies_ghz: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub bin_ghz: f64,
    pub nyquist_ghz: f64,
}

impl FftPeaks {
    /// Frequency of the strongest peak.
    pub fn dominant(&self) -> Option<f64> {
        self.amplitudes.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| self.frequencies_ghz[i])
    }
}

/// Local maxima of |FFT{g² − mean}| on the mirrored trace, refined by
/// quadratic interpolation. Bins 0 and 1 are never reported.
pub fn fft_peaks(trace: &CorrelationTrace, prominence: f64) -> Result<FftPeaks> {
    if trace.len() < MIN_FFT_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "FFT peak search needs at least {MIN_FFT_SAMPLES} samples, got {}",
            trace.len()
        )));
    }
    let sym = trace.mirrored();
    let len = sym.len();
    let mean = sym.iter().sum::<f64>() / len as f64;
    let mut buf: Vec<FftC> = sym.iter().map(|v| FftC::new(v - mean, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    let mag: Vec<f64> = buf[..=half].iter().map(|z| z.norm()).collect();
    let dt_ns = trace.step_ps() * 1e-3;
    let bin = 1.0 / (len as f64 * dt_ns);

    let candidates: Vec<usize> = (2..half).filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1]).collect();
    let top = candidates.iter().map(|&k| mag[k]).fold(0.0, f64::max);
    let mut frequencies_ghz = Vec::new();
    let mut amplitudes = Vec::new();
    for k in candidates {
        if mag[k] < prominence * top || top == 0.0 {
            continue;
        }
        let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        frequencies_ghz.push((k as f64 + delta) * bin);
        amplitudes.push(b - 0.25 * (a - c) * delta);
    }
    Ok(FftPeaks { frequencies_ghz, amplitudes, bin_ghz: bin, nyquist_ghz: 0.5 / dt_ns })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub delta_c: f64,
    pub delta_l: f64,
    /// Detected rate η_det·κ·⟨c†c⟩ (counts/ns).
    pub signal: f64,
    /// Background-free ⟨a†a⟩.
    pub photons: f64,
    /// ⟨c†²c²⟩/⟨c†c⟩² at zero delay (NaN when undefined).
    pub g2_zero: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScan {
    pub points: Vec<ScanPoint>,
}

impl SpectrumScan {
    pub fn delta_l(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_l).collect()
    }

    pub fn signal(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.signal).collect()
    }

    /// Points sharing one Δ_C value, in grid order.
    pub fn slice_at(&self, delta_c: f64) -> SpectrumScan {
        SpectrumScan { points: self.points.iter().filter(|p| p.delta_c == delta_c).cloned().collect() }
    }
}

/// Steady-state scan over a Δ_C × Δ_L grid (Δ_C outer, Δ_L inner).
pub fn spectrum_scan(
    sys: &JcSystem,
    delta_l_grid: &[f64],
    delta_c_grid: &[f64],
    omega: f64,
    background: &BackgroundModel,
    eta_det: f64,
) -> Result<SpectrumScan> {
    if delta_l_grid.iter().chain(delta_c_grid).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("scan grid must be finite".into()));
    }
    if !(eta_det > 0.0 && eta_det <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta_det = {eta_det} must lie in (0, 1]")));
    }
    let c = displaced_operator(sys.a(), background)?;
    let cd = linalg::dagger(&c);
    let intensity = cd.dot(&c);
    let c2 = c.dot(&c);
    let pair = linalg::dagger(&c2).dot(&c2);
    let grid: Vec<(f64, f64)> =
        delta_c_grid.iter().flat_map(|&dc| delta_l_grid.iter().map(move |&dl| (dc, dl))).collect();
    let points = grid
        .par_iter()
        .map(|&(dc, dl)| {
            let d = sys.liouvillian(DetuningSpec::new(dc, dl)?, omega)?;
            let rho = steady_state(&d)?;
            let n_c = rho.expect(&intensity).re;
            Ok(ScanPoint {
                delta_c: dc,
                delta_l: dl,
                signal: eta_det * sys.rates().kappa() * n_c.max(0.0),
                photons: rho.expect(sys.number()).re,
                g2_zero: if n_c > 0.0 { rho.expect(&pair).re / (n_c * n_c) } else { f64::NAN },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumScan { points })
}

/// Background-free ⟨a†a⟩ with the laser on the lower first-rung polariton,
/// Δ_L = Ẽ₁⁻(Δ_C). Default |α|² for fixed-SBR backgrounds.
pub fn resonant_photon_number(sys: &JcSystem, delta_c: f64, omega: f64) -> Result<f64> {
    let lp1 = dressed_energy(DressedLevel::new(1, Branch::Minus)?, sys.rates(), delta_c);
    let d = sys.liouvillian(DetuningSpec::new(delta_c, lp1)?, omega)?;
    Ok(steady_state(&d)?.expect(sys.number()).re)
}

/// |⟨a⟩/Ω|² in the weak-drive (linear response) limit:
/// ⟨a⟩ = −iΩ / ((κ/2 + i(Δ_C−Δ_L)) + g²/(γ/2 − iΔ_L)).
pub fn weak_drive_response(rates: &RateSet, delta_c: f64, delta_l: f64) -> f64 {
    let cav = C64::new(rates.kappa() / 2.0, delta_c - delta_l);
    let emi = C64::new(rates.gamma() / 2.0, -delta_l);
    let denom = cav + rates.g() * rates.g() / emi;
    1.0 / denom.norm_sqr()
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub rates: RateSet,
    pub amplitude: f64,
    pub offset: f64,
    pub residual_norm: f64,
    /// Covariance proxy over (g, κ, γ, amplitude, offset).
    pub covariance: Array2<f64>,
    pub iterations: usize,
}

/// Least-squares fit of (g, κ, γ, amplitude, offset) to a Δ_L scan at fixed
/// Δ_C, using the weak-drive response. Amplitude and offset enter linearly
/// and are eliminated at each trial (variable projection).
pub fn fit_jc_spectrum(scan: &SpectrumScan, initial: &RateSet) -> Result<FitReport> {
    let pts = &scan.points;
    if pts.len() < 15 {
        return Err(Error::InvalidParameter(format!(
            "a five-parameter fit needs at least 15 points, got {}",
            pts.len()
        )));
    }
    let dl: Vec<f64> = pts.iter().map(|p| p.delta_l).collect();
    let dc: Vec<f64> = pts.iter().map(|p| p.delta_c).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.signal).collect();
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let yn: Vec<f64> = y.iter().map(|v| v / y_scale).collect();

    let shape = |lp: &[f64]| -> Option<(RateSet, Vec<f64>)> {
        let r = RateSet::new(lp[0].exp(), lp[1].exp(), lp[2].exp()).ok()?;
        let s: Vec<f64> = dl.iter().zip(&dc).map(|(&l, &c)| weak_drive_response(&r, c, l)).collect();
        Some((r, s))
    };
    // Linear least squares for (amplitude, offset) given the shape.
    let linear = |s: &[f64]| -> (f64, f64) {
        let m = s.len() as f64;
        let (sx, sy) = (s.iter().sum::<f64>(), yn.iter().sum::<f64>());
        let sxx = s.iter().map(|v| v * v).sum::<f64>();
        let sxy = s.iter().zip(&yn).map(|(a, b)| a * b).sum::<f64>();
        let det = m * sxx - sx * sx;
        if det.abs() <= 1e-300 {
            return (0.0, sy / m);
        }
        ((m * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    };
    let projected = |lp: &[f64]| -> Vec<f64> {
        match shape(lp) {
            Some((_, s)) => {
                let (a, b) = linear(&s);
                s.iter().zip(&yn).map(|(sv, yv)| a * sv + b - yv).collect()
            }
            None => vec![1e3; yn.len()],
        }
    };
    let cost = |lp: &[f64]| projected(lp).iter().map(|r| r * r).sum::<f64>();

    let x0 = [initial.g().ln(), initial.kappa().ln(), initial.gamma().ln()];
    let nm = fit::nelder_mead(cost, &x0, SimplexOptions { initial_step: 0.2, ..Default::default() });
    let lm = fit::levenberg_marquardt(projected, &nm.x, 200);
    let best = if lm.cost <= nm.cost { lm.x.clone() } else { nm.x.clone() };
    let best_cost = lm.cost.min(nm.cost);

    let (rates, s) = shape(&best).ok_or_else(|| Error::FitDidNotConverge {
        message: "rates left the valid domain".into(),
        best: best.clone(),
        best_cost,
    })?;
    let (amp, off) = linear(&s);
    let smax = s.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(amp * smax > 1e-6) {
        return Err(Error::FitDidNotConverge {
            message: "no resolvable resonance in the data".into(),
            best: best.iter().map(|v| v.exp()).collect(),
            best_cost,
        });
    }

    // Covariance over the natural parameters.
    let full = |p: &[f64]| -> Vec<f64> {
        match RateSet::new(p[0], p[1], p[2]) {
            Ok(r) => dl
                .iter()
                .zip(&dc)
                .zip(&yn)
                .map(|((&l, &c), &yv)| p[3] * weak_drive_response(&r, c, l) + p[4] - yv)
                .collect(),
            Err(_) => vec![1e3; yn.len()],
        }
    };
    let p = [rates.g(), rates.kappa(), rates.gamma(), amp, off];
    let jac = fit::jacobian(&full, &p);
    let Some((mut cov, rcond)) = fit::covariance(&jac, best_cost) else {
        return Err(Error::FitDidNotConverge {
            message: "parameters are not identifiable from the data".into(),
            best: p.to_vec(),
            best_cost,
        });
    };
    if rcond < 1e-14 {
        return Err(Error::FitDidNotConverge {
            message: format!("ill-conditioned curvature (rcond {rcond:.2e})"),
            best: p.to_vec(),
            best_cost,
        });
    }
    // Undo the data normalization for amplitude and offset.
    for i in 0..5 {
        for j in 0..5 {
            let si = if i >= 3 { y_scale } else { 1.0 };
            let sj = if j >= 3 { y_scale } else { 1.0 };
            cov[[i, j]] *= si * sj;
        }
    }
    Ok(FitReport {
        rates,
        amplitude: amp * y_scale,
        offset: off * y_scale,
        residual_norm: best_cost.sqrt() * y_scale,
        covariance: cov,
        iterations: nm.iterations + lm.iterations,
    })
}

/// Returns the interpolated location of the largest sample in `ys[range]`.
pub fn interpolated_argmax(xs: &[f64], ys: &[f64], range: std::ops::Range<usize>) -> Option<f64> {
    let k = range.clone().max_by(|&a, &b| ys[a].total_cmp(&ys[b]))?;
    if k == 0 || k + 1 >= ys.len() {
        return Some(xs[k]);
    }
    let (a, b, c) = (ys[k - 1], ys[k], ys[k + 1]);
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Some(xs[k] + delta.clamp(-1.0, 1.0) * (xs[k + 1] - xs[k - 1]) / 2.0)
}

/// Indices of strict local maxima of `ys`.
pub fn local_maxima(ys: &[f64]) -> Vec<usize> {
    (1..ys.len().saturating_sub(1)).filter(|&k| ys[k] > ys[k - 1] && ys[k] >= ys[k + 1]).collect()
}

/// Convenience: steady state and g²(τ) of the cavity output (optionally
/// with background) for one operating point.
pub fn g2_trace_for(
    sys: &JcSystem,
    det: DetuningSpec,
    omega: f64,
    background: &BackgroundModel,
    grid: TauGrid,
) -> Result<(DensityMatrix, CorrelationTrace)> {
    let d = sys.liouvillian(det, omega)?;
    let rho = steady_state(&d)?;
    let c = displaced_operator(sys.a(), background)?;
    let trace = g2_tau(&d, &rho, &c, grid)?;
    Ok((rho, trace))
}

/// State after propagating vec(X) for `t` (test/diagnostic helper).
pub fn evolve_operator(d: &SuperOperator, x: &CMatrix, t: f64) -> Result<CMatrix> {
    let p = Propagator::new(d, t)?;
    devectorize(&p.apply(&vectorize(x)), x.nrows())
}
