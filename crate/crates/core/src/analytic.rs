//! Closed-form weak-drive results at the two-photon resonance of a
//! resonant cavity (Δ_C = 0), used as oracles for the full numerics.

use ndarray::{array, Array1, Array2};

use crate::hilbert::{Branch, RateSet};
use crate::{linalg, Error, Result, C64};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Drive strengths above g/10 are flagged as outside the perturbative regime.
pub const PERTURBATIVE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonSolution {
    pub omega: f64,
    /// Ω_eff = 2√2Ω²/g.
    pub omega_eff: f64,
    /// κ_eff = 3κ/2 + γ/2.
    pub kappa_eff: f64,
    /// ±5Ω²/(√2 g).
    pub light_shift: f64,
    /// B = √(g² − ((γ−κ)/4)²).
    pub b: f64,
    pub branch: Branch,
    /// Laser detuning Δ_L on the two-photon resonance, light shift included.
    pub laser_detuning: f64,
    pub warnings: Vec<String>,
}

pub fn effective_two_photon(rates: &RateSet, omega: f64, branch: Branch) -> Result<TwoPhotonSolution> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::InvalidParameter(format!("drive amplitude must be finite and >= 0, got {omega}")));
    }
    let (g, k, gm) = (rates.g(), rates.kappa(), rates.gamma());
    let b2 = g * g - ((gm - k) / 4.0).powi(2);
    if b2 <= 0.0 {
        return Err(Error::InvalidParameter(format!("g = {g} is below |γ−κ|/4; no oscillatory regime")));
    }
    let mut warnings = Vec::new();
    if omega > PERTURBATIVE_LIMIT * g {
        warnings.push(format!("drive Ω = {:.3}g exceeds the perturbative limit {PERTURBATIVE_LIMIT}g", omega / g));
    }
    let s = branch.sign();
    let light_shift = s * 5.0 * omega * omega / (SQRT2 * g);
    Ok(TwoPhotonSolution {
        omega,
        omega_eff: 2.0 * SQRT2 * omega * omega / g,
        kappa_eff: 1.5 * k + 0.5 * gm,
        light_shift,
        b: b2.sqrt(),
        branch,
        laser_detuning: s * SQRT2 * g / 2.0 + light_shift / 2.0,
        warnings,
    })
}

/// p_s = (3κ/4)(1 − 1/(1 + 8(Ω_eff/κ_eff)²)).
pub fn first_photon_rate(sol: &TwoPhotonSolution, rates: &RateSet) -> f64 {
    let x = sol.omega_eff / sol.kappa_eff;
    0.75 * rates.kappa() * (1.0 - 1.0 / (1.0 + 8.0 * x * x))
}

/// Normalized state after the first cavity emission from |2±⟩:
/// amplitudes on (|g,1⟩, |e,0⟩).
pub fn post_emission_state(branch: Branch) -> (f64, f64) {
    ((2.0f64 / 3.0).sqrt(), branch.sign() * (1.0f64 / 3.0).sqrt())
}

/// Generator of (n₀, n_x, n_y, n_z) after the first emission.
pub fn second_photon_generator(rates: &RateSet) -> Array2<f64> {
    let (g, k, gm) = (rates.g(), rates.kappa(), rates.gamma());
    let d = -(gm + k) / 2.0;
    let x = (gm - k) / 2.0;
    array![[d, 0.0, 0.0, x], [0.0, d, 0.0, 0.0], [0.0, 0.0, d, -2.0 * g], [x, 0.0, 2.0 * g, d],]
}

fn second_photon_initial(branch: Branch) -> Array1<f64> {
    array![0.5, branch.sign() * SQRT2 / 3.0, 0.0, 1.0 / 6.0]
}

/// Conditional emission rate p_i(t) after a first photon, by evolving
/// (n₀, n_x, n_y, n_z) and reading κ(n₀ + n_z).
pub fn second_photon_rate(rates: &RateSet, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    let m = second_photon_generator(rates).mapv(|x| C64::new(x * t, 0.0));
    let e = linalg::expm(&m)?;
    let v0 = second_photon_initial(Branch::Minus).mapv(|x| C64::new(x, 0.0));
    let v = e.dot(&v0);
    Ok(rates.kappa() * (v[0].re + v[3].re))
}

/// Closed form of p_i(t), written with explicit cos/sin terms.
pub fn second_photon_rate_closed(rates: &RateSet, t: f64) -> f64 {
    let (g, k, gm) = (rates.g(), rates.kappa(), rates.gamma());
    let b = (g * g - ((gm - k) / 4.0).powi(2)).sqrt();
    let env = (-t * (k + gm) / 2.0).exp();
    let osc = 12.0 * g * g
        + 4.0 * (4.0 * b * b - 3.0 * g * g) * (2.0 * b * t).cos()
        + 4.0 * b * (gm - k) * (2.0 * b * t).sin();
    k * env * osc / (24.0 * b * b)
}

/// φ in p_i(t) = κg e^{−t(κ+γ)/2}/(12B²)·(6g + √(4g²+2(γ−κ)²)·cos(2Bt+φ)).
pub fn second_photon_phase(rates: &RateSet) -> f64 {
    let (g, k, gm) = (rates.g(), rates.kappa(), rates.gamma());
    let b = (g * g - ((gm - k) / 4.0).powi(2)).sqrt();
    (-4.0 * b * (gm - k)).atan2(4.0 * (4.0 * b * b - 3.0 * g * g))
}

/// Phase-shifted cosine form of p_i(t).
pub fn second_photon_rate_phase_form(rates: &RateSet, t: f64) -> f64 {
    let (g, k, gm) = (rates.g(), rates.kappa(), rates.gamma());
    let b = (g * g - ((gm - k) / 4.0).powi(2)).sqrt();
    let amp = (4.0 * g * g + 2.0 * (gm - k).powi(2)).sqrt();
    k * g * (-t * (k + gm) / 2.0).exp() / (12.0 * b * b)
        * (6.0 * g + amp * (2.0 * b * t + second_photon_phase(rates)).cos())
}

/// g²(0) = 8/9 + g²(γ+3κ)²/(288Ω⁴).
pub fn analytic_g2_zero(rates: &RateSet, omega: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("drive amplitude must be > 0, got {omega}")));
    }
    let (g, k, gm) = (rates.g(), rates.kappa(), rates.gamma());
    Ok(8.0 / 9.0 + g * g * (gm + 3.0 * k).powi(2) / (288.0 * omega.powi(4)))
}
