//! Pump-probe "g²-spectroscopy": a four-level effective master equation for
//! two lasers addressing the first two rungs, with leading-order cavity
//! detuning corrections.
//!
//! Level order is always `[|0⟩, |1̃−⟩, |1̃+⟩, |2̃s⟩]` where `s` is `+` for the
//! lower-branch configuration and `−` for the upper one.

use ndarray::Array2;
use rayon::prelude::*;

use crate::fit::{self, SimplexOptions};
use crate::hilbert::{
    build_annihilation, build_sigma_minus, dressed_energy, dressed_transform, Branch, DressedLevel, FockBasis, RateSet,
};
use crate::liouvillian::{build_liouvillian, steady_state, DensityMatrix, LindbladOp};
use crate::{linalg, CMatrix, Error, Result, C64};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Default bound on Ω₁, Ω₂, |Δ₁|, |Δ₂|, |Δ_C| relative to g.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.2;
/// Integration window of the coincidence measurement. Kept as metadata; the
/// model itself works with steady-state rates.
pub const DETECTION_INTERVAL_PS: f64 = 155.0;

/// Which pair of first-rung transitions the lasers address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderConfig {
    /// Pump |0⟩→|1̃−⟩, probe |1̃−⟩→|2̃+⟩.
    Lower,
    /// Pump |0⟩→|1̃+⟩, probe |1̃+⟩→|2̃−⟩.
    Upper,
}

impl LadderConfig {
    fn second_rung(self) -> Branch {
        match self {
            Self::Lower => Branch::Plus,
            Self::Upper => Branch::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLaserScenario {
    pub omega1: f64,
    pub omega2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta_c: f64,
    pub config: LadderConfig,
}

impl TwoLaserScenario {
    pub fn with_delta2(mut self, delta2: f64) -> Self {
        self.delta2 = delta2;
        self
    }

    pub fn with_omega2(mut self, omega2: f64) -> Self {
        self.omega2 = omega2;
        self
    }

    /// Checks finiteness, Ω ≥ 0 and the small-parameter bound against g.
    pub fn validate(&self, rates: &RateSet, threshold: f64) -> Result<()> {
        let named = [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("delta_c", self.delta_c),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
            if v.abs() > threshold * rates.g() {
                return Err(Error::InvalidParameter(format!(
                    "|{name}| = {:.4}g exceeds the effective-model bound {threshold}g",
                    v.abs() / rates.g()
                )));
            }
        }
        if self.omega1 < 0.0 || self.omega2 < 0.0 {
            return Err(Error::InvalidParameter("Rabi amplitudes must be >= 0".into()));
        }
        Ok(())
    }
}

/// Time-independent 4×4 Hamiltonian plus eight single-jump Lindblad
/// operators, κ family first: `[(0−), (0+), (−2), (+2)]` for κ, then γ.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    pub h: CMatrix,
    pub lindblads: Vec<LindbladOp>,
}

impl EffectiveModel {
    pub fn kappa_family(&self) -> &[LindbladOp] {
        &self.lindblads[..4]
    }

    pub fn gamma_family(&self) -> &[LindbladOp] {
        &self.lindblads[4..]
    }

    /// Single-count rate Σ tr(L ρ L†) over the κ family.
    pub fn count_rate(&self, rho: &DensityMatrix) -> f64 {
        self.kappa_family()
            .iter()
            .map(|l| {
                let m = l.matrix();
                linalg::trace(&m.dot(rho.matrix()).dot(&linalg::dagger(m))).re
            })
            .sum()
    }

    /// Coincidence rate Σ_{α,β} tr(L_β L_α ρ L_α† L_β†) over the κ family.
    pub fn coincidence_rate(&self, rho: &DensityMatrix) -> f64 {
        let fam = self.kappa_family();
        let mut total = 0.0;
        for la in fam {
            let once = la.matrix().dot(rho.matrix()).dot(&linalg::dagger(la.matrix()));
            for lb in fam {
                total += linalg::trace(&lb.matrix().dot(&once).dot(&linalg::dagger(lb.matrix()))).re;
            }
        }
        total
    }
}

fn jump(i: usize, j: usize, amp: f64) -> LindbladOp {
    let mut m = Array2::zeros((4, 4));
    m[[i, j]] = C64::new(amp, 0.0);
    LindbladOp::from_matrix(m)
}

fn assemble(
    diag: [f64; 4],
    coupling: [(usize, usize, f64); 4],
    kappa: [f64; 4],
    gamma: [f64; 4],
    rates: &RateSet,
) -> EffectiveModel {
    let mut h = Array2::zeros((4, 4));
    for (i, d) in diag.into_iter().enumerate() {
        h[[i, i]] = C64::new(d, 0.0);
    }
    for (i, j, v) in coupling {
        h[[i, j]] = C64::new(v, 0.0);
        h[[j, i]] = C64::new(v, 0.0);
    }
    let pairs = [(0, 1), (0, 2), (1, 3), (2, 3)];
    let (sk, sg) = (rates.kappa().sqrt(), rates.gamma().sqrt());
    let mut lindblads: Vec<LindbladOp> = pairs.iter().zip(kappa).map(|(&(i, j), p)| jump(i, j, sk * p)).collect();
    lindblads.extend(pairs.iter().zip(gamma).map(|(&(i, j), p)| jump(i, j, sg * p)));
    EffectiveModel { h, lindblads }
}

/// Effective model with Δ_C corrections to leading order in Δ_C/g.
pub fn build_effective_model(s: &TwoLaserScenario, rates: &RateSet) -> Result<EffectiveModel> {
    s.validate(rates, DEFAULT_RATIO_THRESHOLD)?;
    let g = rates.g();
    let (o1, o2, d1, d2, dc) = (s.omega1, s.omega2, s.delta1, s.delta2, s.delta_c);
    let e1 = dc / (4.0 * SQRT2 * g);
    let e2 = dc / (8.0 * SQRT2 * g);
    let r = 1.0 / SQRT2;
    Ok(match s.config {
        LadderConfig::Lower => assemble(
            [0.0, dc / 2.0 - d1, -SQRT2 * g - d2 + dc / 2.0, -d1 - d2 + 1.5 * dc],
            [(0, 1, (r - e1) * o1), (0, 2, (r + e1) * o2), (1, 3, (r - 0.5 - e2) * o2), (2, 3, (r + 0.5 + e2) * o1)],
            [r - e1, r + e1, r - 0.5 - e2, r + 0.5 + e2],
            [-(r + e1), r - e1, 0.5 - (2.0 + SQRT2) * dc / (16.0 * g), 0.5 + (2.0 - SQRT2) * dc / (16.0 * g)],
            rates,
        ),
        LadderConfig::Upper => assemble(
            [0.0, SQRT2 * g - d2 + dc / 2.0, dc / 2.0 - d1, -d1 - d2 + 1.5 * dc],
            [(0, 1, (r - e1) * o2), (0, 2, (r + e1) * o1), (1, 3, (r + 0.5 - e2) * o1), (2, 3, (r - 0.5 + e2) * o2)],
            [r - e1, r + e1, r + 0.5 - e2, r - 0.5 + e2],
            [-(r + e1), r - e1, -(0.5 - (2.0 - SQRT2) * dc / (16.0 * g)), -(0.5 + (2.0 + SQRT2) * dc / (16.0 * g))],
            rates,
        ),
    })
}

/// Same construction with exact dressed energies and matrix elements of the
/// truncated Jaynes-Cummings Hamiltonian in place of the expansions. Used to
/// bound the error of the leading-order model.
pub fn build_effective_model_exact(s: &TwoLaserScenario, rates: &RateSet) -> Result<EffectiveModel> {
    s.validate(rates, DEFAULT_RATIO_THRESHOLD)?;
    let g = rates.g();
    let basis = FockBasis::new(2)?;
    let u = dressed_transform(&basis, rates, s.delta_c);
    let ud = linalg::dagger(&u);
    let a = ud.dot(&build_annihilation(&basis)).dot(&u);
    let sm = ud.dot(&build_sigma_minus(&basis)).dot(&u);
    let top = s.config.second_rung();
    // Dressed indices of [|0⟩, |1̃−⟩, |1̃+⟩, |2̃s⟩].
    let idx = [
        0,
        DressedLevel::new(1, Branch::Minus)?.index(),
        DressedLevel::new(1, Branch::Plus)?.index(),
        DressedLevel::new(2, top)?.index(),
    ];
    let el = |m: &CMatrix, i: usize, j: usize| m[[idx[i], idx[j]]].re;
    let energy =
        |n: usize, b: Branch| -> Result<f64> { Ok(dressed_energy(DressedLevel::new(n, b)?, rates, s.delta_c)) };
    let e1m = energy(1, Branch::Minus)?;
    let e1p = energy(1, Branch::Plus)?;
    let e2 = energy(2, top)?;
    let pairs = [(0, 1), (0, 2), (1, 3), (2, 3)];
    let kappa = pairs.map(|(i, j)| el(&a, i, j));
    let gamma = pairs.map(|(i, j)| el(&sm, i, j));
    // Laser frequencies are fixed by the undetuned ladder plus Δ₁, Δ₂.
    Ok(match s.config {
        LadderConfig::Lower => {
            let w1 = -g + s.delta1;
            let w2 = (1.0 + SQRT2) * g + s.delta2;
            assemble(
                [0.0, e1m - w1, e1p - w2, e2 - w1 - w2],
                [
                    (0, 1, kappa[0] * s.omega1),
                    (0, 2, kappa[1] * s.omega2),
                    (1, 3, kappa[2] * s.omega2),
                    (2, 3, kappa[3] * s.omega1),
                ],
                kappa,
                gamma,
                rates,
            )
        }
        LadderConfig::Upper => {
            let w1 = g + s.delta1;
            let w2 = -(1.0 + SQRT2) * g + s.delta2;
            assemble(
                [0.0, e1m - w2, e1p - w1, e2 - w1 - w2],
                [
                    (0, 1, kappa[0] * s.omega2),
                    (0, 2, kappa[1] * s.omega1),
                    (1, 3, kappa[2] * s.omega1),
                    (2, 3, kappa[3] * s.omega2),
                ],
                kappa,
                gamma,
                rates,
            )
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectroscopyPoint {
    pub delta2: f64,
    /// η_det·p_S (counts/ns).
    pub signal: f64,
    pub count_rate: f64,
    pub coincidence_rate: f64,
    pub g2_zero: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectroscopyScan {
    pub points: Vec<SpectroscopyPoint>,
}

impl SpectroscopyScan {
    /// Δ₂ of the largest g², refined by a parabola through its neighbours.
    pub fn g2_peak(&self) -> Option<f64> {
        let x: Vec<f64> = self.points.iter().map(|p| p.delta2).collect();
        let y: Vec<f64> = self.points.iter().map(|p| p.g2_zero).collect();
        crate::correlator::interpolated_argmax(&x, &y, 0..y.len())
    }

    /// Grid point with the largest g².
    pub fn g2_peak_on_grid(&self) -> Option<f64> {
        self.points.iter().max_by(|a, b| a.g2_zero.total_cmp(&b.g2_zero)).map(|p| p.delta2)
    }
}

/// Which model to evaluate at each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LeadingOrder,
    Exact,
}

pub fn evaluate(s: &TwoLaserScenario, rates: &RateSet, eta_det: f64, kind: ModelKind) -> Result<SpectroscopyPoint> {
    let model = match kind {
        ModelKind::LeadingOrder => build_effective_model(s, rates)?,
        ModelKind::Exact => build_effective_model_exact(s, rates)?,
    };
    let d = build_liouvillian(&model.h, &model.lindblads)?;
    let rho = steady_state(&d)?;
    let ps = model.count_rate(&rho);
    let pc = model.coincidence_rate(&rho);
    if ps <= 0.0 {
        return Err(Error::ZeroDenominator("no single counts; both drives are off".into()));
    }
    Ok(SpectroscopyPoint {
        delta2: s.delta2,
        signal: eta_det * ps,
        count_rate: ps,
        coincidence_rate: pc,
        g2_zero: pc / (ps * ps),
    })
}

/// Steady-state signal and g²(0) across a probe-detuning grid.
pub fn g2_spectroscopy_scan(
    s: &TwoLaserScenario,
    rates: &RateSet,
    delta2_grid: &[f64],
    eta_det: f64,
    kind: ModelKind,
) -> Result<SpectroscopyScan> {
    if !(eta_det > 0.0 && eta_det <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta_det = {eta_det} must lie in (0, 1]")));
    }
    if delta2_grid.is_empty() || delta2_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("Δ₂ grid must be non-empty and finite".into()));
    }
    let points = delta2_grid
        .par_iter()
        .map(|&d2| evaluate(&s.with_delta2(d2), rates, eta_det, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectroscopyScan { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFit {
    pub omega2: f64,
    pub eta_det: f64,
    pub residual_norm: f64,
    /// 1 − SS_res/SS_tot.
    pub r_squared: f64,
}

/// Least squares of η_det·p_S(Δ₂; Ω₂) against measured signal. η_det enters
/// linearly and is solved exactly for each trial Ω₂.
pub fn fit_probe_rabi(delta2: &[f64], signal: &[f64], s: &TwoLaserScenario, rates: &RateSet) -> Result<ProbeFit> {
    if delta2.len() != signal.len() {
        return Err(Error::DimensionMismatch { expected: delta2.len(), actual: signal.len() });
    }
    if delta2.len() < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 points, got {}", delta2.len())));
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let ss_tot: f64 = signal.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_all: f64 = signal.iter().map(|y| y * y).sum();
    if !(ss_tot > 1e-12 * ss_all) {
        return Err(Error::FitDidNotConverge {
            message: "signal has no Δ₂ dependence to fit".into(),
            best: vec![],
            best_cost: f64::NAN,
        });
    }
    let upper = DEFAULT_RATIO_THRESHOLD * rates.g();
    let rates_for = |omega2: f64| -> Option<Vec<f64>> {
        if !(omega2 > 0.0 && omega2 <= upper) {
            return None;
        }
        delta2
            .iter()
            .map(|&d2| {
                evaluate(&s.with_delta2(d2).with_omega2(omega2), rates, 1.0, ModelKind::LeadingOrder)
                    .ok()
                    .map(|p| p.count_rate)
            })
            .collect()
    };
    let eta_for = |ps: &[f64]| -> f64 {
        let num: f64 = ps.iter().zip(signal).map(|(p, y)| p * y).sum();
        let den: f64 = ps.iter().map(|p| p * p).sum();
        num / den
    };
    let residual = |x: &[f64]| -> Vec<f64> {
        match rates_for(x[0].exp()) {
            Some(ps) => {
                let eta = eta_for(&ps);
                ps.iter().zip(signal).map(|(p, y)| eta * p - y).collect()
            }
            None => vec![ss_all.sqrt(); signal.len()],
        }
    };
    let cost = |x: &[f64]| residual(x).iter().map(|r| r * r).sum::<f64>();

    // Coarse log-spaced bracket, then simplex and LM polish.
    let start = (1..=40)
        .map(|k| (upper * 1e-3f64.powf(1.0 - k as f64 / 40.0)).ln())
        .min_by(|a, b| cost(&[*a]).total_cmp(&cost(&[*b])))
        .expect("non-empty bracket");
    let nm = fit::nelder_mead(cost, &[start], SimplexOptions { initial_step: 0.05, ..Default::default() });
    let lm = fit::levenberg_marquardt(residual, &nm.x, 100);
    let best = if lm.cost <= nm.cost { lm } else { nm };
    let omega2 = best.x[0].exp();
    let Some(ps) = rates_for(omega2) else {
        return Err(Error::FitDidNotConverge {
            message: "Ω₂ left the effective-model range".into(),
            best: vec![omega2],
            best_cost: best.cost,
        });
    };
    let eta = eta_for(&ps);
    let r_squared = 1.0 - best.cost / ss_tot;
    if !(eta > 0.0) || r_squared < 0.9 {
        return Err(Error::FitDidNotConverge {
            message: format!("model does not describe the data (R² = {r_squared:.3})"),
            best: vec![omega2, eta],
            best_cost: best.cost,
        });
    }
    Ok(ProbeFit { omega2, eta_det: eta, residual_norm: best.cost.sqrt(), r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::ghz_to_rad_ns;

    fn rates() -> RateSet {
        RateSet::from_ratios(ghz_to_rad_ns(3.455), 5.3, 14.0).unwrap()
    }

    fn scenario(config: LadderConfig, dc: f64) -> TwoLaserScenario {
        let g = rates().g();
        TwoLaserScenario { omega1: g / 100.0, omega2: g / 50.0, delta1: 0.02 * g, delta2: 0.0, delta_c: dc, config }
    }

    fn re(m: &CMatrix, i: usize, j: usize) -> f64 {
        m[[i, j]].re
    }

    #[test]
    fn resonant_upper_hamiltonian_entries() {
        let r = rates();
        let g = r.g();
        let s = TwoLaserScenario {
            omega1: 0.01 * g,
            omega2: 0.03 * g,
            delta1: 0.02 * g,
            delta2: -0.05 * g,
            delta_c: 0.0,
            config: LadderConfig::Upper,
        };
        let m = build_effective_model(&s, &r).unwrap();
        let h = &m.h;
        let diag = [0.0, SQRT2 * g - s.delta2, -s.delta1, -s.delta1 - s.delta2];
        for (i, d) in diag.iter().enumerate() {
            assert!((re(h, i, i) - d).abs() < 1e-12 * g);
        }
        let expect = [
            (0, 1, s.omega2 / SQRT2),
            (0, 2, s.omega1 / SQRT2),
            (1, 3, (0.5 + 1.0 / SQRT2) * s.omega1),
            (2, 3, (1.0 / SQRT2 - 0.5) * s.omega2),
        ];
        for (i, j, v) in expect {
            assert!((re(h, i, j) - v).abs() < 1e-14 * g);
            assert_eq!(h[[i, j]], h[[j, i]]);
        }
        assert_eq!(linalg::hermiticity_error(h), 0.0);
    }

    #[test]
    fn resonant_lindblad_rates() {
        let r = rates();
        for config in [LadderConfig::Lower, LadderConfig::Upper] {
            let m = build_effective_model(&scenario(config, 0.0), &r).unwrap();
            let sq = |l: &LindbladOp| l.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>();
            let k: Vec<f64> = m.kappa_family().iter().map(sq).map(|v| v / r.kappa()).collect();
            let gm: Vec<f64> = m.gamma_family().iter().map(sq).map(|v| v / r.gamma()).collect();
            let mut big_small = [(0.5 + 1.0 / SQRT2).powi(2), (1.0 / SQRT2 - 0.5).powi(2)];
            if config == LadderConfig::Lower {
                big_small.reverse();
            }
            for (a, b) in k.iter().zip([0.5, 0.5, big_small[0], big_small[1]]) {
                assert!((a - b).abs() < 1e-14);
            }
            for (a, b) in gm.iter().zip([0.5, 0.5, 0.25, 0.25]) {
                assert!((a - b).abs() < 1e-14);
            }
            for l in &m.lindblads {
                assert_eq!(l.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);
            }
        }
    }

    #[test]
    fn weak_transition_is_three_percent() {
        let m = build_effective_model(&scenario(LadderConfig::Upper, 0.0), &rates()).unwrap();
        let k = m.kappa_family();
        let ratio = k[3].matrix()[[2, 3]].norm_sqr() / k[2].matrix()[[1, 3]].norm_sqr();
        let expect = ((SQRT2 - 1.0) / (SQRT2 + 1.0)).powi(2);
        assert!((ratio - expect).abs() < 1e-14);
        assert!((ratio - 0.0294).abs() < 1e-4);
    }

    #[test]
    fn leading_order_matches_exact_to_first_order() {
        let r = rates();
        let g = r.g();
        for config in [LadderConfig::Lower, LadderConfig::Upper] {
            for x in [1e-3, -2e-3, 4e-3] {
                let s = scenario(config, x * g);
                let lo = build_effective_model(&s, &r).unwrap();
                let ex = build_effective_model_exact(&s, &r).unwrap();
                for (a, b) in lo.lindblads.iter().zip(&ex.lindblads) {
                    let d = linalg::max_abs(&(a.matrix() - b.matrix()));
                    assert!(d < 0.05 * x * x * r.kappa().sqrt().max(r.gamma().sqrt()) + 1e-12, "{config:?} {x}: {d}");
                }
                for i in 0..4 {
                    for j in 0..4 {
                        let d = (lo.h[[i, j]] - ex.h[[i, j]]).norm();
                        assert!(d < 0.3 * x * x * g + 1e-12, "{config:?} H[{i},{j}] {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn validation_rejects_large_parameters() {
        let r = rates();
        let mut s = scenario(LadderConfig::Upper, 0.0);
        s.delta_c = 0.3 * r.g();
        assert!(build_effective_model(&s, &r).is_err());
        s.delta_c = 0.0;
        s.omega2 = -1.0;
        assert!(build_effective_model(&s, &r).is_err());
    }

    #[test]
    fn probe_off_gives_flat_g2() {
        let r = rates();
        let g = r.g();
        let s = scenario(LadderConfig::Upper, 0.05 * g).with_omega2(0.0);
        let grid: Vec<f64> = (0..41).map(|k| -0.1 * g + 0.005 * g * k as f64).collect();
        let scan = g2_spectroscopy_scan(&s, &r, &grid, 0.1, ModelKind::LeadingOrder).unwrap();
        let first = scan.points[0];
        for p in &scan.points {
            // Nothing reaches the second rung, so there are no coincidences.
            assert!(p.g2_zero.abs() < 1e-12);
            assert!((p.signal - first.signal).abs() < 1e-12 * first.signal);
        }
    }

    #[test]
    fn peak_law_over_scenarios() {
        // Pump close to its |0⟩→|1̃±⟩ resonance, as in the experiment. With the
        // pump far off resonance the probe-first path interferes and drags
        // the broad two-photon line by more than a step.
        let r = rates();
        let g = r.g();
        let step = ghz_to_rad_ns(0.02);
        for config in [LadderConfig::Upper, LadderConfig::Lower] {
            for (dc, offset) in
                [(0.0, 0.0), (0.1 * g, 0.005 * g), (-0.1 * g, -0.004 * g), (0.05 * g, 0.0), (-0.05 * g, 0.003 * g)]
            {
                let mut s = scenario(config, dc);
                s.omega1 = g / 200.0;
                s.omega2 = g / 50.0;
                s.delta1 = dc / 2.0 + offset;
                let target = 1.5 * dc - s.delta1;
                let grid: Vec<f64> = (-10..=10).map(|k| target + 0.37 * step + k as f64 * step).collect();
                let scan = g2_spectroscopy_scan(&s, &r, &grid, 0.1, ModelKind::LeadingOrder).unwrap();
                let peak = scan.g2_peak_on_grid().unwrap();
                assert!((peak - target).abs() <= step, "{config:?} Δ_C={dc}: {peak} vs {target}");
            }
        }
    }

    #[test]
    fn branch_symmetry() {
        let r = rates();
        let g = r.g();
        let up = TwoLaserScenario {
            omega1: 0.015 * g,
            omega2: 0.04 * g,
            delta1: 0.03 * g,
            delta2: 0.0,
            delta_c: 0.06 * g,
            config: LadderConfig::Upper,
        };
        let down = TwoLaserScenario { delta1: -up.delta1, delta_c: -up.delta_c, config: LadderConfig::Lower, ..up };
        let grid: Vec<f64> = (0..31).map(|k| -0.1 * g + k as f64 * 0.0067 * g).collect();
        let neg: Vec<f64> = grid.iter().map(|v| -v).collect();
        let a = g2_spectroscopy_scan(&up, &r, &grid, 0.1, ModelKind::LeadingOrder).unwrap();
        let b = g2_spectroscopy_scan(&down, &r, &neg, 0.1, ModelKind::LeadingOrder).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.count_rate - q.count_rate).abs() < 1e-10 * p.count_rate);
            assert!((p.g2_zero - q.g2_zero).abs() < 1e-9 * p.g2_zero);
        }
    }

    #[test]
    fn exact_and_leading_order_peaks_agree() {
        let r = rates();
        let (dc, d1) = (ghz_to_rad_ns(0.31), ghz_to_rad_ns(0.17));
        let s = TwoLaserScenario {
            omega1: ghz_to_rad_ns(0.05),
            omega2: ghz_to_rad_ns(0.45),
            delta1: d1,
            delta2: 0.0,
            delta_c: dc,
            config: LadderConfig::Upper,
        };
        let step = ghz_to_rad_ns(0.02);
        let grid: Vec<f64> = (0..36).map(|k| ghz_to_rad_ns(-0.05) + k as f64 * step).collect();
        let lo = g2_spectroscopy_scan(&s, &r, &grid, 0.1, ModelKind::LeadingOrder).unwrap();
        let ex = g2_spectroscopy_scan(&s, &r, &grid, 0.1, ModelKind::Exact).unwrap();
        let (a, b) = (lo.g2_peak_on_grid().unwrap(), ex.g2_peak_on_grid().unwrap());
        assert!((a - b).abs() <= step + 1e-12, "{a} vs {b}");
        // Signal rises toward the off-resonant |0⟩→|1̃−⟩ probe line.
        assert!(lo.points.windows(2).all(|w| w[1].signal > w[0].signal));
    }

    #[test]
    fn probe_fit_round_trip() {
        let r = rates();
        let truth = TwoLaserScenario {
            omega1: ghz_to_rad_ns(0.05),
            omega2: ghz_to_rad_ns(0.45),
            delta1: ghz_to_rad_ns(0.17),
            delta2: 0.0,
            delta_c: ghz_to_rad_ns(0.31),
            config: LadderConfig::Upper,
        };
        let grid: Vec<f64> = (0..21).map(|k| ghz_to_rad_ns(-0.4 + 0.05 * k as f64)).collect();
        let scan = g2_spectroscopy_scan(&truth, &r, &grid, 0.1, ModelKind::LeadingOrder).unwrap();
        let sig: Vec<f64> = scan.points.iter().map(|p| p.signal).collect();
        let fit = fit_probe_rabi(&grid, &sig, &truth.with_omega2(ghz_to_rad_ns(0.1)), &r).unwrap();
        assert!((fit.omega2 / truth.omega2 - 1.0).abs() < 0.01, "{fit:?}");
        assert!((fit.eta_det - 0.1).abs() < 1e-3);

        let flat = vec![0.3; grid.len()];
        assert!(fit_probe_rabi(&grid, &flat, &truth, &r).is_err());
        assert!(fit_probe_rabi(&grid[..5], &sig[..5], &truth, &r).is_err());
    }
}
