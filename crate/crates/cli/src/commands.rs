//! Each command is split into `plan` (all config resolution, no physics)
//! and `execute`. `validate` runs the planning half plus cheap adequacy
//! probes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use jcsim_core::analytic::{self, PERTURBATIVE_LIMIT};
use jcsim_core::correlator::{
    self, fft_peaks, g2_trace_for, g2_zero_smoothed, interpolated_argmax, local_maxima, resonant_photon_number,
    spectrum_scan, ScanPoint, SpectrumScan, TauGrid, DEFAULT_PROMINENCE,
};
use jcsim_core::detection::{
    npnr_click_probability, npnr_coincidence_probability, phase_averaged_g2_zero, BackgroundMode, BackgroundModel,
    DetectorModel,
};
use jcsim_core::hilbert::{
    dressed_energy, matrix_element_ratio, Branch, DetuningSpec, DressedLevel, JcSystem, RateSet,
};
use jcsim_core::liouvillian::{residual_norm, steady_state};
use jcsim_core::tmm::{self, LayerStack};
use jcsim_core::twolaser::{g2_spectroscopy_scan, ModelKind, TwoLaserScenario, DEFAULT_RATIO_THRESHOLD};
use jcsim_core::units::{ghz_to_rad_ns, ps_to_ns, rad_ns_to_ghz};
use jcsim_core::Error;

use crate::config::{self, BackgroundConfig, CavityConfig, DriveAmplitude, ScenarioConfig, Task};
use crate::output::{Artifacts, Cell, TableBuilder};
use crate::{CliError, Command};

/// Top-rung population above which the Fock cutoff is reported as too low.
pub const TRUNCATION_LIMIT: f64 = 1e-4;

/// Detected counts per ns → counts per s.
const PER_NS_TO_PER_S: f64 = 1e9;

#[derive(Debug, Clone, Copy)]
struct DrivePoint {
    power_nw: Option<f64>,
    omega: f64,
}

pub struct SpectrumPlan {
    sys: JcSystem,
    eta: f64,
    delta_l: Grid,
    delta_c: Grid,
    drives: Vec<DrivePoint>,
    background: BackgroundConfig,
    probe_delta_l: f64,
}

pub struct G2Plan {
    sys: JcSystem,
    delta_c: f64,
    delta_l: f64,
    drive: DrivePoint,
    background: BackgroundConfig,
    grid: TauGrid,
    sweep: Option<Grid>,
    detector: Option<DetectorModel>,
}

pub struct G2specPlan {
    rates: RateSet,
    scenario: TwoLaserScenario,
    delta2: Grid,
    eta: f64,
    kind: ModelKind,
}

pub struct OraclePlan {
    rates: RateSet,
    omega: f64,
    delta_c: f64,
    grid: TauGrid,
}

pub struct TmmPlan {
    stack: LayerStack,
    stack_path: PathBuf,
    wavelengths: Vec<f64>,
    cavity: Option<CavityConfig>,
}

pub struct FitPlan {
    data: SpectrumScan,
    initial: RateSet,
    data_path: PathBuf,
}

pub enum Plan {
    Spectrum(SpectrumPlan),
    G2(G2Plan),
    G2spec(G2specPlan),
    Oracle(OraclePlan),
    Tmm(TmmPlan),
    Fit(FitPlan),
}

fn task_of(command: Command) -> Option<Task> {
    Some(match command {
        Command::Spectrum => Task::Spectrum,
        Command::G2 => Task::G2,
        Command::G2spec => Task::G2spec,
        Command::Oracle => Task::Oracle,
        Command::Tmm => Task::Tmm,
        Command::Fit => Task::Fit,
        Command::Validate => return None,
    })
}

fn system(cfg: &ScenarioConfig) -> Result<JcSystem, CliError> {
    Ok(JcSystem::new(cfg.n_max()?, cfg.rates()?)?)
}

/// A frequency grid kept in both units, so CSVs echo the configured GHz
/// values exactly instead of a round trip through rad/ns.
#[derive(Debug, Clone)]
struct Grid {
    ghz: Vec<f64>,
    rad: Vec<f64>,
}

fn ghz_grid(grid: Option<&config::Grid>, field: &str, fallback: f64) -> Result<Grid, CliError> {
    let ghz = match grid {
        Some(g) => g.values(field)?,
        None => vec![fallback],
    };
    let rad = ghz.iter().map(|&v| ghz_to_rad_ns(v)).collect();
    Ok(Grid { ghz, rad })
}

/// Background model check with a placeholder |α|²; the real default needs a
/// steady state and is resolved at run time.
fn check_background(bg: &BackgroundConfig, power_nw: Option<f64>) -> Result<(), CliError> {
    bg.model(power_nw, || Ok(1.0)).map(|_| ())
}

fn resolve_background(
    bg: &BackgroundConfig,
    sys: &JcSystem,
    delta_c: f64,
    d: DrivePoint,
) -> Result<BackgroundModel, CliError> {
    bg.model(d.power_nw, || Ok(resonant_photon_number(sys, delta_c, d.omega)?))
}

fn tau_grid(cfg: &ScenarioConfig) -> Result<TauGrid, CliError> {
    match &cfg.tau {
        Some(t) => TauGrid::new(t.step_ps, t.span_ps).map_err(|e| CliError::config("tau", &e.to_string())),
        None => Ok(TauGrid::default()),
    }
}

pub fn plan(command: Command, cfg: &ScenarioConfig, config_path: &Path) -> Result<Plan, CliError> {
    match command {
        Command::Spectrum => plan_spectrum(cfg).map(Plan::Spectrum),
        Command::G2 => plan_g2(cfg).map(Plan::G2),
        Command::G2spec => plan_g2spec(cfg).map(Plan::G2spec),
        Command::Oracle => plan_oracle(cfg).map(Plan::Oracle),
        Command::Tmm => plan_tmm(cfg, config_path).map(Plan::Tmm),
        Command::Fit => plan_fit(cfg, config_path).map(Plan::Fit),
        Command::Validate => Err(CliError::Config("validate is not a simulation command".into())),
    }
    .and_then(|p| match (cfg.task, task_of(command)) {
        (Some(t), Some(c)) if t != c => {
            Err(CliError::config("task", &format!("config is meant for `{}`, not `{}`", t.name(), command.name())))
        }
        _ => Ok(p),
    })
}

fn plan_spectrum(cfg: &ScenarioConfig) -> Result<SpectrumPlan, CliError> {
    let sys = system(cfg)?;
    let drive = cfg.drive()?;
    let sweep = cfg.sweep.as_ref();
    let delta_l = ghz_grid(sweep.and_then(|s| s.delta_l_ghz.as_ref()), "sweep.delta_L_GHz", drive.delta_l_ghz)?;
    let delta_c = ghz_grid(sweep.and_then(|s| s.delta_c_ghz.as_ref()), "sweep.delta_C_GHz", drive.delta_c_ghz)?;
    let powers = sweep.and_then(|s| s.power_nw.as_ref()).map(|g| g.values("sweep.power_nW")).transpose()?;
    let drives = drive_points(drive, powers.as_deref(), sys.rates())?;
    for d in &drives {
        check_background(&cfg.background, d.power_nw)?;
    }
    Ok(SpectrumPlan {
        eta: cfg.detection.eta()?,
        delta_l,
        delta_c,
        drives,
        background: cfg.background.clone(),
        probe_delta_l: drive.delta_l(),
        sys,
    })
}

fn drive_points(
    drive: &config::DriveConfig,
    powers: Option<&[f64]>,
    rates: &RateSet,
) -> Result<Vec<DrivePoint>, CliError> {
    match (drive.amplitude(powers.is_some())?, powers) {
        (Some(a), None) => {
            let power_nw = match a {
                DriveAmplitude::Power { power_nw, .. } => Some(power_nw),
                DriveAmplitude::Rabi(_) => None,
            };
            Ok(vec![DrivePoint { power_nw, omega: a.omega(rates)? }])
        }
        (None, Some(ps)) => {
            let p0 = drive.p0_nw.expect("checked by amplitude()");
            ps.iter()
                .map(|&p| {
                    let a = DriveAmplitude::Power { power_nw: p, p0_nw: p0 };
                    Ok(DrivePoint { power_nw: Some(p), omega: a.omega(rates)? })
                })
                .collect()
        }
        (Some(_), Some(_)) => Err(CliError::config(
            "sweep.power_nW",
            "a power sweep takes P0_nW from the drive block and no fixed amplitude",
        )),
        (None, None) => unreachable!("amplitude() only returns None for power sweeps"),
    }
}

fn plan_g2(cfg: &ScenarioConfig) -> Result<G2Plan, CliError> {
    let sys = system(cfg)?;
    let drive_cfg = cfg.drive()?;
    let sweep = cfg.sweep.as_ref();
    if sweep.is_some_and(|s| s.delta_c_ghz.is_some() || s.power_nw.is_some()) {
        return Err(CliError::config("sweep", "g2 sweeps only delta_L_GHz"));
    }
    let drive = drive_points(drive_cfg, None, sys.rates())?[0];
    check_background(&cfg.background, drive.power_nw)?;
    let detector = match cfg.detection.tau_det_ps {
        Some(t) => Some(
            DetectorModel::new(sys.rates().kappa(), ps_to_ns(t), cfg.detection.eta()?)
                .map_err(|e| CliError::config("detection.tau_det_ps", &e.to_string()))?,
        ),
        None => None,
    };
    let sweep = match sweep.and_then(|s| s.delta_l_ghz.as_ref()) {
        Some(g) => Some(ghz_grid(Some(g), "sweep.delta_L_GHz", 0.0)?),
        None => None,
    };
    Ok(G2Plan {
        delta_c: drive_cfg.delta_c(),
        delta_l: drive_cfg.delta_l(),
        drive,
        background: cfg.background.clone(),
        grid: tau_grid(cfg)?,
        sweep,
        detector,
        sys,
    })
}

fn plan_g2spec(cfg: &ScenarioConfig) -> Result<G2specPlan, CliError> {
    let rates = cfg.rates()?;
    let tl = cfg.two_laser.as_ref().ok_or_else(|| CliError::config("two_laser", "block is required for g2spec"))?;
    let delta2 = ghz_grid(Some(&tl.delta2_ghz), "two_laser.delta2_GHz", 0.0)?;
    let scenario = tl.scenario();
    for &d2 in &delta2.rad {
        scenario
            .with_delta2(d2)
            .validate(&rates, DEFAULT_RATIO_THRESHOLD)
            .map_err(|e| CliError::config("two_laser", &format!("at delta2 = {:.4} GHz: {e}", rad_ns_to_ghz(d2))))?;
    }
    Ok(G2specPlan { rates, scenario, delta2, eta: cfg.detection.eta()?, kind: tl.model.kind() })
}

fn plan_oracle(cfg: &ScenarioConfig) -> Result<OraclePlan, CliError> {
    let rates = cfg.rates()?;
    let drive = cfg.drive()?;
    let omega = drive_points(drive, None, &rates)?[0].omega;
    if omega <= 0.0 {
        return Err(CliError::config("drive", "the closed forms need a nonzero drive"));
    }
    let grid = match &cfg.tau {
        Some(_) => tau_grid(cfg)?,
        // Four decay times of the second-photon envelope.
        None => TauGrid::new(4.0, 4.0e3 * 4.0 / (rates.kappa() + rates.gamma()))?,
    };
    Ok(OraclePlan { rates, omega, delta_c: drive.delta_c(), grid })
}

fn plan_tmm(cfg: &ScenarioConfig, config_path: &Path) -> Result<TmmPlan, CliError> {
    let t = cfg.tmm.as_ref().ok_or_else(|| CliError::config("tmm", "block is required for the tmm command"))?;
    let stack_path = config::resolve_path(config_path, &t.stack_path);
    let text = std::fs::read_to_string(&stack_path).map_err(|e| CliError::io(&stack_path, e))?;
    let stack = LayerStack::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", stack_path.display())))?;
    let wavelengths = t.wavelength_nm.values("tmm.wavelength_nm")?;
    if wavelengths.iter().any(|&w| w <= 0.0) || wavelengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config("tmm.wavelength_nm", "must be positive and strictly increasing"));
    }
    if let Some(c) = &t.cavity {
        if !(c.gap_nm > 0.0 && c.wavelength_nm > 0.0 && c.extra_loss_ppm >= 0.0) {
            return Err(CliError::config("tmm.cavity", "gap_nm and wavelength_nm must be > 0, extra_loss_ppm >= 0"));
        }
    }
    Ok(TmmPlan { stack, stack_path, wavelengths, cavity: t.cavity.clone() })
}

fn plan_fit(cfg: &ScenarioConfig, config_path: &Path) -> Result<FitPlan, CliError> {
    let f = cfg.fit.as_ref().ok_or_else(|| CliError::config("fit", "block is required for the fit command"))?;
    let initial = f.initial.rates("fit.initial")?;
    let data_path = config::resolve_path(config_path, &f.data_path);
    let data = read_spectrum_csv(&data_path)?;
    if data.points.len() < 15 {
        return Err(CliError::config("fit.data_path", "need at least 15 data rows"));
    }
    Ok(FitPlan { data, initial, data_path })
}

/// Reads `delta_L_GHz, delta_C_GHz, signal_cts_per_s` columns (others ignored).
pub fn read_spectrum_csv(path: &Path) -> Result<SpectrumScan, CliError> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col =
        |name: &str| headers.iter().position(|h| h.trim() == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (il, ic, is) = (col("delta_L_GHz")?, col("delta_C_GHz")?, col("signal_cts_per_s")?);
    let mut points = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("row {}: column {} is not a finite number", k + 2, headers[i].to_owned())))
        };
        points.push(ScanPoint {
            delta_c: ghz_to_rad_ns(num(ic)?),
            delta_l: ghz_to_rad_ns(num(il)?),
            signal: num(is)?,
            photons: f64::NAN,
            g2_zero: f64::NAN,
        });
    }
    Ok(SpectrumScan { points })
}

pub fn execute(plan: &Plan) -> Result<Artifacts, CliError> {
    match plan {
        Plan::Spectrum(p) => run_spectrum(p),
        Plan::G2(p) => run_g2(p),
        Plan::G2spec(p) => run_g2spec(p),
        Plan::Oracle(p) => run_oracle(p),
        Plan::Tmm(p) => run_tmm(p),
        Plan::Fit(p) => run_fit(p),
    }
}

fn record_rates(a: &mut Artifacts, rates: &RateSet) {
    a.resolve("g_rad_per_ns", rates.g());
    a.resolve("kappa_rad_per_ns", rates.kappa());
    a.resolve("gamma_rad_per_ns", rates.gamma());
    a.resolve("cooperativity", rates.cooperativity());
    a.resolve("beta", rates.beta());
}

fn record_background(a: &mut Artifacts, bg: &BackgroundModel) {
    let mode = match bg.mode() {
        BackgroundMode::Off => "off",
        BackgroundMode::FixedSbr => "fixed_sbr",
        BackgroundMode::PowerProportional { .. } => "power_proportional",
    };
    a.resolve(
        "background",
        json!({ "mode": mode, "eta": bg.eta(), "alpha_re": bg.alpha().re, "alpha_im": bg.alpha().im }),
    );
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationProbe {
    pub n_max: usize,
    pub top_rung_population: f64,
    pub delta_l_ghz: f64,
    pub delta_c_ghz: f64,
    pub omega_rabi_ghz: f64,
    pub steady_state_residual: f64,
    pub passed: bool,
}

/// Largest top-rung steady-state population over the operating points most
/// likely to climb the ladder: the configured Δ_L, the lower first-rung
/// polariton, the lower two-photon resonance and Δ_L = 0.
pub fn truncation_probe(sys: &JcSystem, delta_c: f64, delta_l: f64, omega: f64) -> Result<TruncationProbe, CliError> {
    let r = sys.rates();
    let e1 = dressed_energy(DressedLevel::new(1, Branch::Minus)?, r, delta_c);
    let e2 = dressed_energy(DressedLevel::new(2, Branch::Minus)?, r, delta_c) / 2.0;
    let basis = sys.basis();
    let n_max = basis.n_max();
    let mut worst: Option<TruncationProbe> = None;
    for dl in [delta_l, e1, e2, 0.0] {
        let d = sys.liouvillian(DetuningSpec::new(delta_c, dl)?, omega)?;
        let rho = steady_state(&d)?;
        let top: f64 =
            rho.populations().iter().enumerate().filter(|(i, _)| basis.rung(*i) == n_max).map(|(_, p)| p).sum();
        if worst.is_none_or(|w| top > w.top_rung_population) {
            worst = Some(TruncationProbe {
                n_max,
                top_rung_population: top,
                delta_l_ghz: rad_ns_to_ghz(dl),
                delta_c_ghz: rad_ns_to_ghz(delta_c),
                omega_rabi_ghz: rad_ns_to_ghz(omega),
                steady_state_residual: residual_norm(&d, rho.matrix()),
                passed: top <= TRUNCATION_LIMIT,
            });
        }
    }
    Ok(worst.expect("four probe points"))
}

fn truncation_warning(p: &TruncationProbe) -> Option<String> {
    (!p.passed).then(|| {
        format!(
            "n_max = {} looks too small: top-rung population {:.2e} at delta_L = {:.3} GHz, omega = {:.3} GHz (limit {TRUNCATION_LIMIT:.0e})",
            p.n_max, p.top_rung_population, p.delta_l_ghz, p.omega_rabi_ghz
        )
    })
}

fn strongest(drives: &[DrivePoint]) -> DrivePoint {
    *drives.iter().max_by(|a, b| a.omega.total_cmp(&b.omega)).expect("at least one drive point")
}

/// Grid value closest to zero.
fn central(values: &[f64]) -> f64 {
    *values.iter().min_by(|a, b| a.abs().total_cmp(&b.abs())).expect("non-empty grid")
}

fn run_spectrum(p: &SpectrumPlan) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    record_rates(&mut a, p.sys.rates());
    a.resolve("n_max", p.sys.basis().n_max());
    a.resolve("eta_det", p.eta);
    a.resolve("omega_rabi_rad_per_ns", p.drives.iter().map(|d| d.omega).collect::<Vec<_>>());

    let with_power = p.drives.iter().any(|d| d.power_nw.is_some());
    let mut header =
        vec!["delta_L_GHz", "delta_C_GHz", "signal_cts_per_s", "mean_photons", "g2_zero", "omega_rabi_GHz"];
    if with_power {
        header.push("power_nW");
    }
    let mut peak_header = vec!["omega_rabi_GHz", "delta_C_GHz", "delta_L_peak_GHz", "signal_cts_per_s"];
    if with_power {
        peak_header.push("power_nW");
    }
    let mut table = TableBuilder::new("spectrum.csv", &header);
    let mut peaks = TableBuilder::new("spectrum_peaks.csv", &peak_header);

    let xs = &p.delta_l.ghz;
    for d in &p.drives {
        for (&dc, &dc_ghz) in p.delta_c.rad.iter().zip(&p.delta_c.ghz) {
            let bg = resolve_background(&p.background, &p.sys, dc, *d)?;
            if d.omega == strongest(&p.drives).omega && dc == p.delta_c.rad[0] {
                record_background(&mut a, &bg);
            }
            let scan = spectrum_scan(&p.sys, &p.delta_l.rad, &[dc], d.omega, &bg, p.eta)?;
            let ys: Vec<f64> = scan.points.iter().map(|q| q.signal * PER_NS_TO_PER_S).collect();
            let mut tail = vec![Cell::from(rad_ns_to_ghz(d.omega))];
            if with_power {
                tail.push(d.power_nw.into());
            }
            for ((q, &y), &x) in scan.points.iter().zip(&ys).zip(xs) {
                let mut row = vec![x.into(), dc_ghz.into(), y.into(), q.photons.into(), q.g2_zero.into()];
                row.extend(&tail);
                table.row(&row);
            }
            for k in local_maxima(&ys) {
                let x = interpolated_argmax(xs, &ys, k - 1..k + 2).expect("non-empty range");
                let mut row = vec![rad_ns_to_ghz(d.omega).into(), dc_ghz.into(), x.into(), ys[k].into()];
                if with_power {
                    row.push(d.power_nw.into());
                }
                peaks.row(&row);
            }
        }
    }
    a.tables.push(table.finish());
    a.tables.push(peaks.finish());

    let probe = truncation_probe(&p.sys, central(&p.delta_c.rad), p.probe_delta_l, strongest(&p.drives).omega)?;
    a.warnings.extend(truncation_warning(&probe));
    a.diagnose("n_max_check", probe);
    Ok(a)
}

#[derive(Debug, Clone, Serialize)]
struct G2Summary {
    g2_zero: f64,
    g2_zero_smoothed: Option<f64>,
    fft_peaks_ghz: Vec<f64>,
}

fn g2_point(
    p: &G2Plan,
    delta_l: f64,
    bg: &BackgroundModel,
) -> Result<
    (G2Summary, correlator::CorrelationTrace, correlator::FftPeaks, jcsim_core::liouvillian::DensityMatrix),
    CliError,
> {
    let (rho, trace) = g2_trace_for(&p.sys, DetuningSpec::new(p.delta_c, delta_l)?, p.drive.omega, bg, p.grid)?;
    let smoothed = match g2_zero_smoothed(&trace) {
        Ok(v) => Some(v),
        Err(Error::GridTooCoarse(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let peaks = fft_peaks(&trace, DEFAULT_PROMINENCE)?;
    let summary = G2Summary {
        g2_zero: trace.values()[0],
        g2_zero_smoothed: smoothed,
        fft_peaks_ghz: peaks.frequencies_ghz.clone(),
    };
    Ok((summary, trace, peaks, rho))
}

fn run_g2(p: &G2Plan) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    let rates = p.sys.rates();
    record_rates(&mut a, rates);
    a.resolve("n_max", p.sys.basis().n_max());
    a.resolve("omega_rabi_rad_per_ns", p.drive.omega);
    a.resolve("delta_C_rad_per_ns", p.delta_c);
    a.resolve("delta_L_rad_per_ns", p.delta_l);
    a.resolve("tau_step_ps", p.grid.step_ps());
    a.resolve("tau_span_ps", p.grid.span_ps());

    let bg = resolve_background(&p.background, &p.sys, p.delta_c, p.drive)?;
    record_background(&mut a, &bg);
    let background_on = bg.mode() != BackgroundMode::Off;

    let (summary, trace, peaks, rho) = g2_point(p, p.delta_l, &bg)?;
    let mut t = TableBuilder::new("g2_tau.csv", &["tau_ps", "g2"]);
    for (tau, g) in trace.tau_ps().iter().zip(trace.values()) {
        t.row(&[(*tau).into(), (*g).into()]);
    }
    a.tables.push(t.finish());
    let mut f = TableBuilder::new("fft_peaks.csv", &["frequency_GHz", "amplitude"]);
    for (fr, am) in peaks.frequencies_ghz.iter().zip(&peaks.amplitudes) {
        f.row(&[(*fr).into(), (*am).into()]);
    }
    a.tables.push(f.finish());

    if summary.g2_zero_smoothed.is_none() {
        a.warnings.push("tau grid too coarse or short for the smoothed g2(0)".into());
    }
    a.result("g2_zero", summary.g2_zero);
    a.result("g2_zero_smoothed", summary.g2_zero_smoothed);
    a.result("fft_dominant_GHz", peaks.dominant());
    a.result("fft_bin_GHz", peaks.bin_ghz);
    a.result("vacuum_rabi_GHz", rad_ns_to_ghz((p.delta_c * p.delta_c + 4.0 * rates.g() * rates.g()).sqrt()));
    a.result("mean_photons", rho.expect(p.sys.number()).re);
    if background_on {
        a.result("g2_zero_phase_averaged", phase_averaged_g2_zero(&rho, p.sys.a(), &bg)?);
    }
    if let Some(det) = &p.detector {
        let ps = npnr_click_probability(&rho, p.sys.basis(), det)?;
        let pc = npnr_coincidence_probability(&rho, p.sys.basis(), det)?;
        a.result("click_probability", ps);
        a.result("coincidence_probability", pc);
        a.result("g2_zero_click_detectors", if ps > 0.0 { pc / (ps * ps) } else { f64::NAN });
    }

    if let Some(sweep) = &p.sweep {
        let rows = sweep
            .rad
            .par_iter()
            .zip(&sweep.ghz)
            .map(|(&dl, &dl_ghz)| {
                let (s, _, _, rho) = g2_point(p, dl, &bg)?;
                let avg = if background_on { Some(phase_averaged_g2_zero(&rho, p.sys.a(), &bg)?) } else { None };
                Ok((dl_ghz, s, avg))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut header = vec!["delta_L_GHz", "g2_zero", "g2_zero_smoothed", "peak1_GHz", "peak2_GHz", "peak3_GHz"];
        if background_on {
            header.push("g2_zero_phase_averaged");
        }
        let mut t = TableBuilder::new("g2_scan.csv", &header);
        for (dl, s, avg) in rows {
            let mut row = vec![dl.into(), s.g2_zero.into(), s.g2_zero_smoothed.into()];
            row.extend((0..3).map(|i| Cell::from(s.fft_peaks_ghz.get(i).copied())));
            if background_on {
                row.push(avg.into());
            }
            t.row(&row);
        }
        a.tables.push(t.finish());
    }

    let probe = truncation_probe(&p.sys, p.delta_c, p.delta_l, p.drive.omega)?;
    a.warnings.extend(truncation_warning(&probe));
    a.diagnose("n_max_check", probe);
    Ok(a)
}

fn run_g2spec(p: &G2specPlan) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    record_rates(&mut a, &p.rates);
    let s = &p.scenario;
    a.resolve(
        "two_laser_rad_per_ns",
        json!({ "omega1": s.omega1, "omega2": s.omega2, "delta1": s.delta1, "delta_c": s.delta_c }),
    );
    a.resolve("eta_det", p.eta);
    a.resolve("model", if p.kind == ModelKind::Exact { "exact" } else { "leading_order" });

    let scan = g2_spectroscopy_scan(s, &p.rates, &p.delta2.rad, p.eta, p.kind)?;
    let mut t = TableBuilder::new("g2spec.csv", &["delta2_GHz", "signal_cts_per_s", "g2_zero"]);
    for (q, &x) in scan.points.iter().zip(&p.delta2.ghz) {
        t.row(&[x.into(), (q.signal * PER_NS_TO_PER_S).into(), q.g2_zero.into()]);
    }
    a.tables.push(t.finish());
    a.result("g2_peak_delta2_GHz", scan.g2_peak().map(rad_ns_to_ghz));
    a.result("g2_peak_delta2_on_grid_GHz", scan.g2_peak_on_grid().map(rad_ns_to_ghz));
    a.result("two_photon_resonance_GHz", rad_ns_to_ghz(1.5 * s.delta_c - s.delta1));
    a.result("matrix_element_ratio", matrix_element_ratio());
    Ok(a)
}

fn run_oracle(p: &OraclePlan) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    let r = &p.rates;
    record_rates(&mut a, r);
    a.resolve("omega_rabi_rad_per_ns", p.omega);
    if p.delta_c != 0.0 {
        a.warnings.push("the closed forms assume a resonant cavity; delta_C_GHz is ignored".into());
    }
    let mut branches = serde_json::Map::new();
    let mut p_s = None;
    for (name, b) in [("lower", Branch::Minus), ("upper", Branch::Plus)] {
        let sol = analytic::effective_two_photon(r, p.omega, b)?;
        for w in &sol.warnings {
            if !a.warnings.contains(w) {
                a.warnings.push(w.clone());
            }
        }
        let rate = analytic::first_photon_rate(&sol, r);
        p_s.get_or_insert(rate);
        branches.insert(
            name.into(),
            json!({
                "laser_detuning_GHz": rad_ns_to_ghz(sol.laser_detuning),
                "light_shift_GHz": rad_ns_to_ghz(sol.light_shift),
                "omega_eff_rad_per_ns": sol.omega_eff,
                "kappa_eff_rad_per_ns": sol.kappa_eff,
                "first_photon_rate_per_ns": rate,
            }),
        );
    }
    let p_s = p_s.expect("two branches");
    a.result("branches", branches);
    a.result("g2_zero", analytic::analytic_g2_zero(r, p.omega)?);
    a.result("second_photon_rate_at_zero_per_ns", analytic::second_photon_rate_closed(r, 0.0));
    a.result("second_photon_phase_rad", analytic::second_photon_phase(r));
    a.result("cooperativity", r.cooperativity());
    a.result("beta", r.beta());
    a.result("matrix_element_ratio", matrix_element_ratio());

    let mut t = TableBuilder::new("oracle.csv", &["tau_ps", "second_photon_rate_per_ns", "g2"]);
    for tau in p.grid_tau_ps() {
        let pi = analytic::second_photon_rate_closed(r, ps_to_ns(tau));
        t.row(&[tau.into(), pi.into(), (pi / p_s).into()]);
    }
    a.tables.push(t.finish());
    Ok(a)
}

impl OraclePlan {
    fn grid_tau_ps(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| k as f64 * self.grid.step_ps()).collect()
    }
}

fn run_tmm(p: &TmmPlan) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    a.resolve("stack_path", p.stack_path.display().to_string());
    a.resolve("layers", p.stack.layers().len());
    a.resolve("incident_index", p.stack.incident());
    a.resolve("substrate_index", p.stack.substrate());

    let spec = tmm::stack_spectrum(&p.stack, &p.wavelengths)?;
    let mut t = TableBuilder::new("tmm.csv", &["wavelength_nm", "R", "T"]);
    for ((w, r), tr) in spec.wavelength_nm.iter().zip(&spec.reflectance).zip(&spec.transmittance) {
        t.row(&[(*w).into(), (*r).into(), (*tr).into()]);
    }
    a.tables.push(t.finish());
    a.result("max_reflectance", spec.reflectance.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    match tmm::stopband_center(&spec) {
        Ok(c) => {
            a.result("stopband_center_nm", c);
            a.result("reflectance_at_center", p.stack.response(c).0.norm_sqr());
        }
        Err(Error::NoStopband) => {
            a.result("stopband_center_nm", None::<f64>);
            a.warnings.push("no stopband inside the wavelength grid".into());
        }
        Err(e) => return Err(e.into()),
    }
    if let Some(c) = &p.cavity {
        let (_, trans) = p.stack.response(c.wavelength_nm);
        let depth = p.stack.penetration_depth_nm(c.wavelength_nm);
        let l_eff = c.gap_nm + 2.0 * depth;
        let loss = c.extra_loss_ppm * 1e-6;
        a.result(
            "cavity",
            json!({
                "mirror_transmission": trans,
                "penetration_depth_nm": depth,
                "effective_length_nm": l_eff,
                "finesse": tmm::finesse(trans, trans, loss)?,
                "q_factor": tmm::cavity_q_estimate(trans, trans, loss, l_eff, c.wavelength_nm)?,
            }),
        );
    }
    Ok(a)
}

fn run_fit(p: &FitPlan) -> Result<Artifacts, CliError> {
    let mut a = Artifacts::default();
    a.resolve("data_path", p.data_path.display().to_string());
    a.resolve("rows", p.data.points.len());
    a.resolve(
        "initial_rad_per_ns",
        json!({ "g": p.initial.g(), "kappa": p.initial.kappa(), "gamma": p.initial.gamma() }),
    );
    let fit = correlator::fit_jc_spectrum(&p.data, &p.initial)?;
    let r = &fit.rates;
    let mut t = TableBuilder::new("fit.csv", &["delta_L_GHz", "delta_C_GHz", "signal_cts_per_s", "model_cts_per_s"]);
    for q in &p.data.points {
        let m = fit.amplitude * correlator::weak_drive_response(r, q.delta_c, q.delta_l) + fit.offset;
        t.row(&[rad_ns_to_ghz(q.delta_l).into(), rad_ns_to_ghz(q.delta_c).into(), q.signal.into(), m.into()]);
    }
    a.tables.push(t.finish());
    let sd = |i: usize| rad_ns_to_ghz(fit.covariance[[i, i]].max(0.0).sqrt());
    a.result("g_GHz", rad_ns_to_ghz(r.g()));
    a.result("kappa_GHz", rad_ns_to_ghz(r.kappa()));
    a.result("gamma_GHz", rad_ns_to_ghz(r.gamma()));
    a.result("g_stderr_GHz", sd(0));
    a.result("kappa_stderr_GHz", sd(1));
    a.result("gamma_stderr_GHz", sd(2));
    a.result("amplitude", fit.amplitude);
    a.result("offset_cts_per_s", fit.offset);
    a.result("residual_norm", fit.residual_norm);
    a.result("cooperativity", r.cooperativity());
    a.result("beta", r.beta());
    a.result("iterations", fit.iterations);
    Ok(a)
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub config: String,
    pub tasks: Vec<&'static str>,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

/// Dry run. JSON syntax or schema errors are returned as `Err`; semantic
/// problems land in the report. The only physics run is the truncation
/// probe: a handful of steady states at the strongest drive.
pub fn validate(config_path: &Path) -> Result<ValidationReport, CliError> {
    let cfg = config::load(config_path)?;
    let tasks: Vec<Command> = match cfg.task {
        Some(t) => vec![command_of(t)],
        None => infer_tasks(&cfg),
    };
    let mut report = ValidationReport {
        config: config_path.display().to_string(),
        tasks: tasks.iter().map(|c| c.name()).collect(),
        errors: Vec::new(),
        warnings: Vec::new(),
    };
    if tasks.is_empty() {
        report.errors.push("no task given and no task-specific block found".into());
    }
    for cmd in tasks {
        match plan(cmd, &cfg, config_path).and_then(|p| adequacy_warnings(&p)) {
            Ok(w) => report.warnings.extend(w),
            Err(e) => report.errors.push(format!("{}: {e}", cmd.name())),
        }
    }
    Ok(report)
}

fn command_of(t: Task) -> Command {
    match t {
        Task::Spectrum => Command::Spectrum,
        Task::G2 => Command::G2,
        Task::G2spec => Command::G2spec,
        Task::Oracle => Command::Oracle,
        Task::Tmm => Command::Tmm,
        Task::Fit => Command::Fit,
    }
}

fn infer_tasks(cfg: &ScenarioConfig) -> Vec<Command> {
    let mut v = Vec::new();
    if cfg.two_laser.is_some() {
        v.push(Command::G2spec);
    }
    if cfg.tmm.is_some() {
        v.push(Command::Tmm);
    }
    if cfg.fit.is_some() {
        v.push(Command::Fit);
    }
    if cfg.drive.is_some() {
        v.push(if cfg.tau.is_some() { Command::G2 } else { Command::Spectrum });
    }
    v
}

fn adequacy_warnings(p: &Plan) -> Result<Vec<String>, CliError> {
    Ok(match p {
        Plan::Spectrum(s) => {
            let probe = truncation_probe(&s.sys, central(&s.delta_c.rad), s.probe_delta_l, strongest(&s.drives).omega)?;
            truncation_warning(&probe).into_iter().collect()
        }
        Plan::G2(s) => {
            let probe = truncation_probe(&s.sys, s.delta_c, s.delta_l, s.drive.omega)?;
            truncation_warning(&probe).into_iter().collect()
        }
        Plan::Oracle(o) if o.omega > PERTURBATIVE_LIMIT * o.rates.g() => vec![format!(
            "drive omega = {:.3}g is outside the perturbative regime (> {PERTURBATIVE_LIMIT}g) of the closed forms",
            o.omega / o.rates.g()
        )],
        Plan::Oracle(o) if o.delta_c != 0.0 => {
            vec!["the closed forms assume a resonant cavity; delta_C_GHz is ignored".into()]
        }
        _ => Vec::new(),
    })
}
