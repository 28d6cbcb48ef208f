//! Laser-background admixture and click-detector statistics.
//!
//! The detected mode is c = √η·a − i√(1−η)·b, with b in a coherent state
//! |α⟩ independent of the system. Normally ordered correlators of c are then
//! those of the displaced operator a_eff = √η·a − i√(1−η)·α·1, so the
//! background never needs its own Hilbert space.

use crate::hilbert::{FockBasis, RateSet};
use crate::liouvillian::DensityMatrix;
use crate::{linalg, CMatrix, Error, Result, C64};

/// Beam-splitter transmission used in power-proportional mode.
pub const POWER_MODE_ETA: f64 = 0.999;
/// Number of phase samples for phase-averaged statistics.
pub const PHASE_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundMode {
    Off,
    FixedSbr,
    PowerProportional { power: f64, eta2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundModel {
    eta: f64,
    alpha: C64,
    mode: BackgroundMode,
}

impl BackgroundModel {
    pub fn none() -> Self {
        Self { eta: 1.0, alpha: C64::new(0.0, 0.0), mode: BackgroundMode::Off }
    }

    /// Fixed signal-to-background ratio, η = 1 − 1/SBR, background amplitude
    /// |α|·e^{iφ}.
    pub fn fixed_sbr(sbr: f64, alpha_abs2: f64, phase: f64) -> Result<Self> {
        if !(sbr > 1.0) {
            return Err(Error::InvalidParameter(format!("SBR must exceed 1, got {sbr}")));
        }
        if sbr.is_infinite() {
            return Ok(Self::none());
        }
        Self::build(1.0 - 1.0 / sbr, alpha_abs2, phase, BackgroundMode::FixedSbr)
    }

    /// η = 0.999 and α = √(1000·P·η₂)·e^{iφ}.
    pub fn power_proportional(power: f64, eta2: f64, phase: f64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0 && eta2.is_finite() && eta2 >= 0.0) {
            return Err(Error::InvalidParameter("power and eta2 must be finite and >= 0".into()));
        }
        Self::build(POWER_MODE_ETA, 1000.0 * power * eta2, phase, BackgroundMode::PowerProportional { power, eta2 })
    }

    fn build(eta: f64, alpha_abs2: f64, phase: f64, mode: BackgroundMode) -> Result<Self> {
        if !(alpha_abs2.is_finite() && alpha_abs2 >= 0.0 && phase.is_finite()) {
            return Err(Error::InvalidParameter(format!("background |α|² = {alpha_abs2}, phase = {phase}")));
        }
        Ok(Self { eta, alpha: C64::from_polar(alpha_abs2.sqrt(), phase), mode })
    }

    /// Raw construction, used for limit checks (η ∈ [0, 1]).
    pub fn with_eta(eta: f64, alpha: C64) -> Result<Self> {
        if !((0.0..=1.0).contains(&eta) && alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("η = {eta}, α = {alpha}")));
        }
        Ok(Self { eta, alpha, mode: BackgroundMode::FixedSbr })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn mode(&self) -> BackgroundMode {
        self.mode
    }

    pub fn sbr(&self) -> f64 {
        1.0 / (1.0 - self.eta)
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        Self { alpha: C64::from_polar(self.alpha.norm(), phase), ..*self }
    }
}

/// a_eff = √η·a − i√(1−η)·α·1.
pub fn displaced_operator(a: &CMatrix, bg: &BackgroundModel) -> Result<CMatrix> {
    if !(bg.alpha.re.is_finite() && bg.alpha.im.is_finite()) {
        return Err(Error::InvalidParameter("background amplitude is not finite".into()));
    }
    let mut c = a.mapv(|z| z * bg.eta.sqrt());
    let shift = C64::new(0.0, -1.0) * (1.0 - bg.eta).sqrt() * bg.alpha;
    for i in 0..c.nrows() {
        c[[i, i]] += shift;
    }
    Ok(c)
}

/// (⟨c†c⟩, ⟨c†²c²⟩).
pub fn intensity_moments(rho: &DensityMatrix, c: &CMatrix) -> (f64, f64) {
    let cd = linalg::dagger(c);
    let n = rho.expect(&cd.dot(c)).re;
    let c2 = c.dot(c);
    let n2 = rho.expect(&linalg::dagger(&c2).dot(&c2)).re;
    (n, n2)
}

/// ⟨c†²c²⟩/⟨c†c⟩² for the detection operator c.
pub fn g2_zero_of(rho: &DensityMatrix, c: &CMatrix) -> Result<f64> {
    let (n, n2) = intensity_moments(rho, c);
    if n <= f64::MIN_POSITIVE.sqrt() {
        return Err(Error::ZeroDenominator("⟨c†c⟩ vanishes".into()));
    }
    Ok(n2 / (n * n))
}

/// Phase-averaged g²(0): moments averaged over a uniform phase grid for α,
/// then the ratio.
pub fn phase_averaged_g2_zero(rho: &DensityMatrix, a: &CMatrix, bg: &BackgroundModel) -> Result<f64> {
    let (mut n, mut n2) = (0.0, 0.0);
    for k in 0..PHASE_SAMPLES {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / PHASE_SAMPLES as f64;
        let c = displaced_operator(a, &bg.with_phase(phi))?;
        let (x, y) = intensity_moments(rho, &c);
        n += x;
        n2 += y;
    }
    let m = PHASE_SAMPLES as f64;
    let (n, n2) = (n / m, n2 / m);
    if n <= f64::MIN_POSITIVE.sqrt() {
        return Err(Error::ZeroDenominator("⟨c†c⟩ vanishes".into()));
    }
    Ok(n2 / (n * n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    t: f64,
    tau_det_ns: f64,
}

impl DetectorModel {
    /// T = κ·τ_det·η_det.
    pub fn new(kappa: f64, tau_det_ns: f64, eta_det: f64) -> Result<Self> {
        let mut d = Self::from_t(kappa * tau_det_ns * eta_det)?;
        d.tau_det_ns = tau_det_ns;
        Ok(d)
    }

    pub fn from_t(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!("click probability T = {t} must lie in (0, 1)")));
        }
        Ok(Self { t, tau_det_ns: f64::NAN })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn tau_det_ns(&self) -> f64 {
        self.tau_det_ns
    }
}

/// ⟨x^{a†a}⟩ from the photon-number populations.
fn number_generating(rho: &DensityMatrix, basis: &FockBasis, x: f64) -> f64 {
    rho.populations().iter().zip(basis.photon_numbers()).map(|(p, n)| p * x.powi(n as i32)).sum()
}

fn check_dim(rho: &DensityMatrix, basis: &FockBasis) -> Result<()> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), actual: rho.dim() });
    }
    Ok(())
}

/// Click probability of one detector behind a 50/50 splitter,
/// 1 − ⟨(1 − T/2)^{a†a}⟩.
pub fn npnr_click_probability(rho: &DensityMatrix, basis: &FockBasis, det: &DetectorModel) -> Result<f64> {
    check_dim(rho, basis)?;
    Ok(1.0 - number_generating(rho, basis, 1.0 - det.t / 2.0))
}

/// Both detectors click: 1 − 2⟨(1−T/2)^{a†a}⟩ + ⟨(1−T)^{a†a}⟩.
pub fn npnr_coincidence_probability(rho: &DensityMatrix, basis: &FockBasis, det: &DetectorModel) -> Result<f64> {
    check_dim(rho, basis)?;
    Ok(1.0 - 2.0 * number_generating(rho, basis, 1.0 - det.t / 2.0) + number_generating(rho, basis, 1.0 - det.t))
}

/// Closed form for a coherent state of mean n̄: 1 − e^{−T n̄/2}.
pub fn coherent_click_probability(nbar: f64, det: &DetectorModel) -> f64 {
    -(-det.t * nbar / 2.0).exp_m1()
}

/// Closed form for a coherent state: (1 − e^{−T n̄/2})².
pub fn coherent_coincidence_probability(nbar: f64, det: &DetectorModel) -> f64 {
    coherent_click_probability(nbar, det).powi(2)
}

/// Ω = √(P/P₀)·(κ+γ)/(2√2).
pub fn rabi_from_power(power: f64, p0: f64, rates: &RateSet) -> Result<f64> {
    if !(power.is_finite() && power >= 0.0 && p0.is_finite() && p0 > 0.0) {
        return Err(Error::InvalidParameter(format!("P = {power}, P0 = {p0}")));
    }
    Ok((power / p0).sqrt() * (rates.kappa() + rates.gamma()) / (2.0 * std::f64::consts::SQRT_2))
}
