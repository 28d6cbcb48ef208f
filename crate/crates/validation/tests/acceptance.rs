//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Run with `cargo test -p jcsim-validation --test acceptance`.

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::path::Path;

use jcsim_cli::commands::read_spectrum_csv;
use jcsim_cli::config::{self, ScenarioConfig, Task};
use jcsim_core::analytic::{analytic_g2_zero, effective_two_photon, first_photon_rate, second_photon_rate_closed};
use jcsim_core::correlator::{
    fft_peaks, fit_jc_spectrum, g2_tau, g2_trace_for, g2_zero, g2_zero_smoothed, interpolated_argmax, local_maxima,
    resonant_photon_number, spectrum_scan, TauGrid, DEFAULT_PROMINENCE,
};
use jcsim_core::detection::{
    coherent_click_probability, coherent_coincidence_probability, displaced_operator, npnr_click_probability,
    npnr_coincidence_probability, rabi_from_power, BackgroundModel, DetectorModel,
};
use jcsim_core::hilbert::{
    dressed_energy, matrix_element_ratio, Branch, DetuningSpec, DressedLevel, JcSystem, RateSet,
};
use jcsim_core::linalg::{hermitian_eigenvalues, hermiticity_error, trace};
use jcsim_core::liouvillian::{
    build_liouvillian, devectorize, residual_norm, spectral_gap, steady_state, vectorize, DensityMatrix, Propagator,
    SuperOperator,
};
use jcsim_core::tmm::{stack_spectrum, stopband_center, LayerStack};
use jcsim_core::twolaser::{build_effective_model, g2_spectroscopy_scan};
use jcsim_core::units::{ghz_to_rad_ns, rad_ns_to_ghz};
use jcsim_core::{CVector, C64};
use jcsim_validation::{all_presets, preset, Criterion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Res<T> = Result<T, Box<dyn std::error::Error>>;
type Run = fn(&mut Criterion) -> Res<()>;

fn main() {
    let criteria: [(u32, &'static str, Run); 13] = [
        (1, "Liouvillian integrity", c1_integrity),
        (2, "steady state and uniqueness on presets", c2_steady_state),
        (3, "polariton spectrum", c3_polaritons),
        (4, "vacuum Rabi oscillation", c4_vacuum_rabi),
        (5, "blockade and bunching", c5_blockade),
        (6, "FFT peak trio", c6_fft_trio),
        (7, "weak-drive oracle equivalence", c7_oracle),
        (8, "two-laser g2 spectroscopy", c8_two_laser),
        (9, "detector POVM", c9_povm),
        (10, "power-dependence structure", c10_power),
        (11, "truncation convergence", c11_truncation),
        (12, "transfer matrices", c12_tmm),
        (13, "derived scalars", c13_scalars),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        let mut c = Criterion::new(id, title);
        if let Err(e) = run(&mut c) {
            c.error("evaluation", e);
        }
        println!("{}", c.line());
        for n in &c.notes {
            println!("      note: {n}");
        }
        std::io::stdout().flush().ok();
        if !c.passed() {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn reference_rates() -> Res<RateSet> {
    Ok(preset("blockade_sweep.json").0.rates()?)
}

fn configured_omega(cfg: &ScenarioConfig, rates: &RateSet) -> Res<f64> {
    let drive = cfg.drive()?;
    Ok(match drive.amplitude(true)? {
        Some(a) => a.omega(rates)?,
        None => {
            // Power sweep: the strongest point.
            let powers = cfg.sweep.as_ref().and_then(|s| s.power_nw.as_ref()).ok_or("power sweep without powers")?;
            let p = powers.values("sweep.power_nW")?.into_iter().fold(0.0, f64::max);
            rabi_from_power(p, drive.p0_nw.ok_or("P0_nW")?, rates)?
        }
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn lp1(rates: &RateSet, dc: f64) -> Res<f64> {
    Ok(dressed_energy(DressedLevel::new(1, Branch::Minus)?, rates, dc))
}

// ---------------------------------------------------------------------------

fn c1_integrity(c: &mut Criterion) -> Res<()> {
    let mut rng = StdRng::seed_from_u64(20_241_019);
    let (mut tr_err, mut herm_err, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..10 {
        let g = ghz_to_rad_ns(rng.gen_range(1.0..6.0));
        let rates = RateSet::from_ratios(g, rng.gen_range(2.0..20.0), rng.gen_range(2.0..30.0))?;
        let sys = JcSystem::new(8, rates)?;
        let det = DetuningSpec::new(rng.gen_range(-g..g), rng.gen_range(-1.5 * g..1.5 * g))?;
        let d = sys.liouvillian(det, rng.gen_range(0.02..0.5) * g)?;

        // Random pure state on the lowest rungs.
        let dim = sys.basis().dim();
        let mut psi = CVector::zeros(dim);
        for k in 0..5 {
            psi[k] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.mapv_inplace(|z| z / norm);
        let rho0 = DensityMatrix::from_pure(&psi)?;

        let step = Propagator::new(&d, 4.0 / rates.kappa())?;
        let mut v = vectorize(rho0.matrix());
        for _ in 0..5 {
            v = step.apply(&v);
            let rho = devectorize(&v, dim)?;
            tr_err = tr_err.max((trace(&rho) - C64::new(1.0, 0.0)).norm());
            herm_err = herm_err.max(hermiticity_error(&rho));
            let sym = (&rho + &jcsim_core::linalg::dagger(&rho)).mapv(|z| z * 0.5);
            min_eig = min_eig.min(hermitian_eigenvalues(&sym)?.into_iter().fold(f64::INFINITY, f64::min));
        }
    }
    c.below("trace error", tr_err, 1e-9);
    c.below("Hermiticity error", herm_err, 1e-9);
    c.check("positivity", min_eig >= -1e-7, format!("min eigenvalue {min_eig:.2e} >= -1e-7"));
    c.runtime_below(60.0);
    Ok(())
}

fn preset_operating_point(cfg: &ScenarioConfig) -> Res<Option<(JcSystem, DetuningSpec, f64)>> {
    match cfg.task {
        Some(Task::Spectrum) | Some(Task::G2) => {
            let rates = cfg.rates()?;
            let sys = JcSystem::new(cfg.n_max()?, rates)?;
            let drive = cfg.drive()?;
            let det = DetuningSpec::new(drive.delta_c(), drive.delta_l())?;
            Ok(Some((sys, det, configured_omega(cfg, &rates)?)))
        }
        _ => Ok(None),
    }
}

fn c2_steady_state(c: &mut Criterion) -> Res<()> {
    let (mut worst_res, mut worst_gap) = (0.0f64, f64::INFINITY);
    let mut covered = Vec::new();
    for (name, cfg) in all_presets() {
        let (ds, kappa): (Vec<SuperOperator>, f64) = if let Some((sys, det, omega)) = preset_operating_point(&cfg)? {
            // The configured point and the lower polariton.
            let mut ds = Vec::new();
            for dl in [det.delta_l, lp1(sys.rates(), det.delta_c)?] {
                ds.push(sys.liouvillian(DetuningSpec::new(det.delta_c, dl)?, omega)?);
            }
            (ds, sys.rates().kappa())
        } else if let (Some(Task::G2spec), Some(tl)) = (cfg.task, cfg.two_laser.as_ref()) {
            let rates = cfg.rates()?;
            let grid = tl.delta2_ghz.values("two_laser.delta2_GHz")?;
            let s = tl.scenario().with_delta2(ghz_to_rad_ns(grid[grid.len() / 2]));
            let m = build_effective_model(&s, &rates)?;
            (vec![build_liouvillian(&m.h, &m.lindblads)?], rates.kappa())
        } else {
            continue;
        };
        for d in &ds {
            worst_res = worst_res.max(residual_norm(d, steady_state(d)?.matrix()));
        }
        worst_gap = worst_gap.min(spectral_gap(&ds[0])?.gap / kappa);
        covered.push(name);
    }
    c.check("presets with a Liouvillian", covered.len() >= 8, format!("{}", covered.len()));
    c.below("worst residual", worst_res, 1e-10);
    c.above("smallest gap / kappa", worst_gap, 1e-6);
    Ok(())
}

fn c3_polaritons(c: &mut Criterion) -> Res<()> {
    let (cfg, _) = preset("avoided_crossing.json");
    let rates = cfg.rates()?;
    let g = rates.g();
    let omega = configured_omega(&cfg, &rates)?;
    let sweep = cfg.sweep.as_ref().ok_or("sweep")?;
    let dl_grid: Vec<f64> =
        sweep.delta_l_ghz.as_ref().ok_or("delta_L")?.values("delta_L")?.into_iter().map(ghz_to_rad_ns).collect();
    let step = dl_grid[1] - dl_grid[0];
    // Weak drive: a small basis is exact to far below the checked tolerances
    // (criterion 11 covers the truncation itself).
    let sys = JcSystem::new(3, rates)?;
    let none = BackgroundModel::none();

    let scan = spectrum_scan(&sys, &dl_grid, &[0.0], omega, &none, 1.0)?;
    let y = scan.signal();
    let mut peaks = local_maxima(&y);
    peaks.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    peaks.truncate(2);
    peaks.sort();
    if peaks.len() == 2 {
        let (lo, hi) = (dl_grid[peaks[0]], dl_grid[peaks[1]]);
        c.within("lower peak / g", lo / g, -1.0, step / g);
        c.within("upper peak / g", hi / g, 1.0, step / g);
    } else {
        c.check("two peaks at resonance", false, format!("{} maxima", peaks.len()));
    }

    // Branch positions across Δ_C on local fine grids.
    let mut worst = 0.0f64;
    for k in 0..13 {
        let dc = (-1.5 + 0.25 * k as f64) * g;
        for branch in [Branch::Minus, Branch::Plus] {
            let e = dressed_energy(DressedLevel::new(1, branch)?, &rates, dc);
            let xs: Vec<f64> = (0..=200).map(|i| e + (i as f64 - 100.0) * 0.002 * g).collect();
            let y = spectrum_scan(&sys, &xs, &[dc], omega, &none, 1.0)?.signal();
            let peak = interpolated_argmax(&xs, &y, 0..y.len()).ok_or("empty scan")?;
            worst = worst.max(rel(peak, e));
        }
    }
    c.check(
        "branches vs dressed energies",
        worst <= 0.01,
        format!("worst {:.3}% <= 1% over 13 detunings", 100.0 * worst),
    );
    Ok(())
}

fn c4_vacuum_rabi(c: &mut Criterion) -> Res<()> {
    let (cfg, _) = preset("vacuum_rabi.json");
    let rates = cfg.rates()?;
    let g = rates.g();
    let drive = cfg.drive()?;
    let (dc, dl) = (drive.delta_c(), drive.delta_l());
    c.within("delta_C / g", dc / g, 0.73, 1e-9);
    c.within("delta_L / g", dl / g, -0.13, 1e-9);
    let expected = rad_ns_to_ghz((dc * dc + 4.0 * g * g).sqrt());
    c.within_rel("expected period (ps)", 1e3 / expected, 220.0, 1e-9);

    let sys = JcSystem::new(cfg.n_max()?, rates)?;
    let tau = cfg.tau.as_ref().ok_or("tau")?;
    let omega = configured_omega(&cfg, &rates)?;
    let grid = TauGrid::new(tau.step_ps, tau.span_ps)?;
    let (_, trace) = g2_trace_for(&sys, DetuningSpec::new(dc, dl)?, omega, &BackgroundModel::none(), grid)?;
    let fft = fft_peaks(&trace, DEFAULT_PROMINENCE)?;
    c.within_rel("dominant FFT (GHz)", fft.dominant().ok_or("no FFT peak")?, expected, 0.02);
    c.above("g2(0)", trace.values()[0], 10.0);
    c.above("smoothed g2(0)", g2_zero_smoothed(&trace)?, 20.0);
    c.runtime_below(120.0);
    Ok(())
}

fn c5_blockade(c: &mut Criterion) -> Res<()> {
    let (cfg, _) = preset("blockade_sweep.json");
    let rates = cfg.rates()?;
    let g = rates.g();
    c.within("g/kappa", g / rates.kappa(), 5.3, 1e-9);
    c.within("g/gamma", g / rates.gamma(), 14.0, 1e-9);
    let sys = JcSystem::new(cfg.n_max()?, rates)?;
    let omega = configured_omega(&cfg, &rates)?;
    let tau = cfg.tau.as_ref().ok_or("tau")?;
    let grid = TauGrid::new(tau.step_ps, tau.span_ps)?;
    let none = BackgroundModel::none();
    let smoothed = |dl: f64| -> Res<f64> {
        let (_, t) = g2_trace_for(&sys, DetuningSpec::new(0.0, dl)?, omega, &none, grid)?;
        Ok(g2_zero_smoothed(&t)?)
    };
    c.below("smoothed g2(0) at -g", smoothed(-g)?, 1.0);
    c.above("smoothed g2(0) at -g/sqrt2", smoothed(-g / SQRT_2)?, 10.0);

    // SBR 85 curve.
    let (cfg, _) = preset("background_sbr85.json");
    let rates = cfg.rates()?;
    let sys = JcSystem::new(cfg.n_max()?, rates)?;
    let omega = configured_omega(&cfg, &rates)?;
    let grid_ghz = cfg.sweep.as_ref().and_then(|s| s.delta_l_ghz.as_ref()).ok_or("sweep")?.values("delta_L")?;
    let bg = cfg.background.model(None, || Ok(resonant_photon_number(&sys, 0.0, omega)?))?;
    c.within("SBR", bg.sbr(), 85.0, 1e-9);
    let c_bg = displaced_operator(sys.a(), &bg)?;
    let (mut clean, mut with_bg) = (Vec::new(), Vec::new());
    for &x in &grid_ghz {
        let rho = steady_state(&sys.liouvillian(DetuningSpec::new(0.0, ghz_to_rad_ns(x))?, omega)?)?;
        clean.push(g2_zero(&rho, sys.a())?);
        with_bg.push(g2_zero(&rho, &c_bg)?);
    }
    let k = (0..with_bg.len()).max_by(|&a, &b| with_bg[a].total_cmp(&with_bg[b])).ok_or("empty")?;
    let two_photon = effective_two_photon(&rates, omega, Branch::Minus)?.laser_detuning;
    let step = grid_ghz[1] - grid_ghz[0];
    c.within("SBR curve peak (GHz)", grid_ghz[k], rad_ns_to_ghz(two_photon), step);
    let falls = with_bg[k..].windows(2).all(|w| w[1] <= w[0]);
    c.check(
        "pull-down after the peak",
        falls && with_bg[with_bg.len() - 1] < 0.1 * with_bg[k],
        format!("monotone {falls}, tail {:.3} vs peak {:.2}", with_bg[with_bg.len() - 1], with_bg[k]),
    );
    c.below("background peak / clean peak", with_bg[k] / clean[k], 1.0);
    Ok(())
}

fn c6_fft_trio(c: &mut Criterion) -> Res<()> {
    let (cfg, _) = preset("blockade_sweep.json");
    let rates = cfg.rates()?;
    let g = rates.g();
    let sys = JcSystem::new(cfg.n_max()?, rates)?;
    let omega = configured_omega(&cfg, &rates)?;
    let tau = cfg.tau.as_ref().ok_or("tau")?;
    let grid = TauGrid::new(tau.step_ps, tau.span_ps)?;
    let dls = cfg.sweep.as_ref().and_then(|s| s.delta_l_ghz.as_ref()).ok_or("sweep")?.values("delta_L")?;
    c.within("sweep start / g", ghz_to_rad_ns(dls[0]) / g, -1.5, 1e-9);
    c.within("sweep stop / g", ghz_to_rad_ns(dls[dls.len() - 1]) / g, -0.3, 1e-9);

    // Each extracted peak must sit on one of the three lines. Not every line
    // carries weight at every detuning, so coverage is counted per family.
    let (mut worst, mut extracted, mut bin) = (0.0f64, 0, 0.0);
    let mut seen = [0usize; 3];
    for &x in &dls {
        let dl = ghz_to_rad_ns(x);
        let (_, trace) = g2_trace_for(&sys, DetuningSpec::new(0.0, dl)?, omega, &BackgroundModel::none(), grid)?;
        let p = fft_peaks(&trace, DEFAULT_PROMINENCE)?;
        bin = p.bin_ghz;
        let trio = [2.0 * g, (g - dl).abs(), (g + dl).abs()].map(rad_ns_to_ghz);
        for q in &p.frequencies_ghz {
            let miss = trio.iter().map(|f| (q - f).abs()).fold(f64::INFINITY, f64::min) / bin;
            worst = worst.max(miss);
            extracted += 1;
        }
        for (family, f) in trio.iter().enumerate() {
            if p.frequencies_ghz.iter().any(|q| (q - f).abs() <= 2.0 * bin) {
                seen[family] += 1;
            }
        }
    }
    c.check(
        "peaks on the trio",
        worst <= 2.0,
        format!("worst {worst:.2} bins over {extracted} peaks at {} detunings (bin {bin:.4} GHz)", dls.len()),
    );
    c.check(
        "every family observed",
        seen.iter().all(|&n| n >= 5),
        format!("2g / |g-dL| / |g+dL| found at {} / {} / {} detunings", seen[0], seen[1], seen[2]),
    );
    Ok(())
}

fn c7_oracle(c: &mut Criterion) -> Res<()> {
    let rates = reference_rates()?;
    let (g, kappa, gamma) = (rates.g(), rates.kappa(), rates.gamma());
    let sys = JcSystem::new(10, rates)?;
    let span_ps = 4.0 / (kappa + gamma) * 1e3;
    let grid = TauGrid::new(2.0, span_ps)?;

    let (mut worst_trace, mut worst_g2) = (0.0f64, 0.0f64);
    for div in [40.0, 30.0, 20.0] {
        let omega = g / div;
        let sol = effective_two_photon(&rates, omega, Branch::Minus)?;
        let d = sys.liouvillian(DetuningSpec::new(0.0, sol.laser_detuning)?, omega)?;
        let rho = steady_state(&d)?;
        worst_g2 = worst_g2.max(rel(g2_zero(&rho, sys.a())?, analytic_g2_zero(&rates, omega)?));
        if div != 30.0 {
            let trace = g2_tau(&d, &rho, sys.a(), grid)?;
            let ps = first_photon_rate(&sol, &rates);
            for (t_ps, v) in trace.tau_ps().iter().zip(trace.values()) {
                let oracle = second_photon_rate_closed(&rates, t_ps * 1e-3) / ps;
                worst_trace = worst_trace.max(rel(*v, oracle));
            }
        }
    }
    c.check(
        "g2(tau) vs p_i/p_s",
        worst_trace <= 0.05,
        format!("worst {:.3e} <= 5% for tau <= {span_ps:.0} ps", worst_trace),
    );
    c.check("g2(0) vs closed form", worst_g2 <= 0.10, format!("worst {:.3e} <= 10% for g/40..g/20", worst_g2));
    let p0 = second_photon_rate_closed(&rates, 0.0);
    c.check(
        "p_i(0) = 2kappa/3",
        (p0 - 2.0 * kappa / 3.0).abs() <= 1e-12 * kappa,
        format!("{p0:.12} vs {:.12}", 2.0 * kappa / 3.0),
    );
    c.runtime_below(120.0);
    if !c.passed() {
        c.note(
            "the closed forms keep only the resonant two-photon cascade; the full model also scatters single photons \
             off-resonantly through the first rung (order Omega^2 against Omega^4), which dominates the emission \
             rate and lowers g2(0) at these drive strengths",
        );
    }
    Ok(())
}

fn c8_two_laser(c: &mut Criterion) -> Res<()> {
    let (cfg, _) = preset("two_laser_g2spec.json");
    let rates = cfg.rates()?;
    let tl = cfg.two_laser.as_ref().ok_or("two_laser")?;
    for (name, v, want) in [
        ("delta_C", tl.delta_c_ghz, 0.31),
        ("delta_1", tl.delta1_ghz, 0.17),
        ("omega_1", tl.omega1_ghz, 0.05),
        ("omega_2", tl.omega2_ghz, 0.45),
        ("eta_det", cfg.detection.eta_det, 0.10),
    ] {
        c.within(name, v, want, 1e-12);
    }
    let grid_ghz = tl.delta2_ghz.values("delta2")?;
    let step = grid_ghz[1] - grid_ghz[0];
    let grid: Vec<f64> = grid_ghz.iter().copied().map(ghz_to_rad_ns).collect();
    let scan = g2_spectroscopy_scan(&tl.scenario(), &rates, &grid, cfg.detection.eta()?, tl.model.kind())?;
    let on_grid = rad_ns_to_ghz(scan.g2_peak_on_grid().ok_or("empty")?);
    let interpolated = rad_ns_to_ghz(scan.g2_peak().ok_or("empty")?);
    c.check(
        "g2 maximum (GHz)",
        (on_grid - 0.30).abs() <= step + 1e-12,
        format!("{on_grid:.4} vs 0.30 (tol one step, {step:.3}); interpolated {interpolated:.4}"),
    );
    c.within("matrix element ratio", matrix_element_ratio(), 0.029, 0.001);
    Ok(())
}

fn povm_error(rho: &DensityMatrix, sys: &JcSystem, det: &DetectorModel) -> Res<(f64, f64)> {
    let ps = npnr_click_probability(rho, sys.basis(), det)?;
    let pc = npnr_coincidence_probability(rho, sys.basis(), det)?;
    let g2 = g2_zero(rho, sys.a())?;
    Ok((g2, (pc / (ps * ps) - g2).abs() / g2))
}

fn c9_povm(c: &mut Criterion) -> Res<()> {
    let det = DetectorModel::from_t(1e-3)?;
    let rates = reference_rates()?;
    let sys = JcSystem::new(10, rates)?;
    let anti = steady_state(&sys.liouvillian(DetuningSpec::new(0.0, -rates.g())?, rates.g() / 40.0)?)?;
    let (g2, err) = povm_error(&anti, &sys, &det)?;
    c.check("antibunched", g2 < 1.0 && err < 0.01, format!("g2 {g2:.3}, error {:.3}% < 1%", 100.0 * err));

    let (cfg, _) = preset("vacuum_rabi.json");
    let rates = cfg.rates()?;
    let sys = JcSystem::new(cfg.n_max()?, rates)?;
    let drive = cfg.drive()?;
    let omega = configured_omega(&cfg, &rates)?;
    let bunched = steady_state(&sys.liouvillian(DetuningSpec::new(drive.delta_c(), drive.delta_l())?, omega)?)?;
    let (g2, err) = povm_error(&bunched, &sys, &det)?;
    c.check("bunched", g2 > 1.0 && err < 0.01, format!("g2 {g2:.2}, error {:.3}% < 1%", 100.0 * err));

    let exact = [1e-4, 0.1, 1.0, 10.0, 300.0].iter().all(|&n| {
        let p = coherent_click_probability(n, &det);
        coherent_coincidence_probability(n, &det) / (p * p) == 1.0
    });
    c.check("coherent closed form", exact, "ratio exactly 1");
    Ok(())
}

fn c10_power(c: &mut Criterion) -> Res<()> {
    let (cfg, _) = preset("power_ladder.json");
    let rates = cfg.rates()?;
    let g = rates.g();
    let p0 = cfg.drive()?.p0_nw.ok_or("P0_nW")?;
    c.within("P0 (nW)", p0, 214.0, 0.0);
    let sys = JcSystem::new(cfg.n_max()?, rates)?;

    // LP1 signal over three decades and one more.
    let mut photons = Vec::new();
    for f in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
        let omega = rabi_from_power(f * p0, p0, &rates)?;
        let rho = steady_state(&sys.liouvillian(DetuningSpec::new(0.0, -g)?, omega)?)?;
        photons.push(rho.expect(sys.number()).re);
    }
    let growth: Vec<f64> = photons.windows(2).map(|w| w[1] / w[0]).collect();
    // A lone two-level polariton saturates at 1/4 photon.
    let top = photons[photons.len() - 1];
    c.check(
        "LP1 monotone, non-saturating",
        growth.iter().all(|&r| r > 1.0) && top > 0.25,
        format!(
            "per-decade growth {}; <n> at 10 P0 {top:.3} > 0.25",
            growth.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    );

    // Shoulders: absent at the weakest power, present at intermediate power.
    let dl_grid_ghz = cfg.sweep.as_ref().and_then(|s| s.delta_l_ghz.as_ref()).ok_or("sweep")?.values("delta_L")?;
    let dl: Vec<f64> = dl_grid_ghz.iter().copied().map(ghz_to_rad_ns).collect();
    let maxima_at = |p: f64| -> Res<Vec<f64>> {
        let omega = rabi_from_power(p, p0, &rates)?;
        let y = spectrum_scan(&sys, &dl, &[0.0], omega, &BackgroundModel::none(), 1.0)?.signal();
        Ok(local_maxima(&y).into_iter().map(|k| dl[k] / g).collect())
    };
    let shoulders = |m: &[f64]| {
        let lo = m.iter().any(|x| (-0.8..=-0.65).contains(x));
        let hi = m.iter().any(|x| (0.65..=0.8).contains(x));
        lo && hi
    };
    let weak = maxima_at(0.214)?;
    c.check("weak drive: polaritons only", weak.len() == 2 && !shoulders(&weak), format!("maxima at {weak:.3?} g"));
    for p in [500.0, 650.0] {
        let m = maxima_at(p)?;
        c.check(&format!("shoulders at {p} nW"), shoulders(&m), format!("maxima at {m:.3?} g"));
    }

    // Centre feature at the strongest power.
    let (cfg, _) = preset("power_ladder_high.json");
    let sys = JcSystem::new(cfg.n_max()?, rates)?;
    let omega = configured_omega(&cfg, &rates)?;
    let xs: Vec<f64> = [-0.1, -0.05, 0.0, 0.05, 0.1].iter().map(|f| f * g).collect();
    let y = spectrum_scan(&sys, &xs, &[0.0], omega, &BackgroundModel::none(), 1.0)?.signal();
    let k = (0..5).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap_or(0);
    let x = interpolated_argmax(&xs, &y, 0..5).unwrap_or(f64::NAN);
    c.check(
        "peak near zero detuning",
        (1..4).contains(&k) && (x / g).abs() <= 0.05,
        format!("at {:.4} g, omega {:.2} g, n_max {}", x / g, omega / g, cfg.n_max()?),
    );
    Ok(())
}

fn c11_truncation(c: &mut Criterion) -> Res<()> {
    let mut worst = 0.0f64;
    let mut names = Vec::new();
    for (name, cfg) in all_presets() {
        let Some((_, det, omega)) = preset_operating_point(&cfg)? else { continue };
        let rates = cfg.rates()?;
        if omega > 0.1 * rates.g() * (1.0 + 1e-9) {
            continue;
        }
        let dc = det.delta_c;
        let two_photon = dressed_energy(DressedLevel::new(2, Branch::Minus)?, &rates, dc) / 2.0;
        let mut values = Vec::new();
        for n_max in [10, 15] {
            let sys = JcSystem::new(n_max, rates)?;
            let mut v = Vec::new();
            for dl in [det.delta_l, lp1(&rates, dc)?, two_photon] {
                let rho = steady_state(&sys.liouvillian(DetuningSpec::new(dc, dl)?, omega)?)?;
                v.push((rho.expect(sys.number()).re, g2_zero(&rho, sys.a())?));
            }
            values.push(v);
        }
        for (a, b) in values[0].iter().zip(&values[1]) {
            worst = worst.max(rel(a.0, b.0)).max(rel(a.1, b.1));
        }
        names.push(name.trim_end_matches(".json").to_owned());
    }
    c.check("weak-drive presets", names.len() >= 4, names.join(", "));
    c.below("worst relative change", worst, 0.01);
    Ok(())
}

fn load_stack(cfg: &ScenarioConfig, path: &Path) -> Res<(LayerStack, Vec<f64>)> {
    let t = cfg.tmm.as_ref().ok_or("tmm")?;
    let text = std::fs::read_to_string(config::resolve_path(path, &t.stack_path))?;
    Ok((LayerStack::parse(&text)?, t.wavelength_nm.values("wavelength_nm")?))
}

fn c12_tmm(c: &mut Criterion) -> Res<()> {
    let mut worst = 0.0f64;
    for (nh, nl, pairs, n0, ns) in [(3.49, 2.92, 10, 1.0, 3.49), (2.09, 1.46, 15, 1.0, 1.46), (3.49, 2.92, 4, 1.0, 1.0)]
    {
        let s = LayerStack::quarter_wave(nh, nl, pairs, 920.0, n0, ns)?;
        let r = s.response(920.0).0.norm_sqr();
        let y = (nh / nl).powi(2 * pairs as i32) * ns;
        worst = worst.max((r - ((n0 - y) / (n0 + y)).powi(2)).abs());
    }
    c.below("quarter-wave closed form", worst, 1e-6);

    let (cfg, path) = preset("tmm_gaas_dbr.json");
    let (stack, grid) = load_stack(&cfg, &path)?;
    let centre = stopband_center(&stack_spectrum(&stack, &grid)?)?;
    c.above("R at stopband centre", stack.response(centre).0.norm_sqr(), 0.9999);
    let (cfg, path) = preset("tmm_gaas_dbr_drift.json");
    let (drift, dgrid) = load_stack(&cfg, &path)?;
    c.below("drifted centre (nm)", stopband_center(&stack_spectrum(&drift, &dgrid)?)?, centre);

    let mut energy = 0.0f64;
    for name in ["tmm_gaas_dbr.json", "tmm_gaas_dbr_drift.json", "tmm_dielectric_cavity.json"] {
        let (cfg, path) = preset(name);
        let (stack, grid) = load_stack(&cfg, &path)?;
        let s = stack_spectrum(&stack, &grid)?;
        energy = energy.max(s.absorptance().iter().fold(0.0, |m, a| m.max(a.abs())));
    }
    c.below("|R+T-1|", energy, 1e-10);
    c.runtime_below(30.0);
    Ok(())
}

fn c13_scalars(c: &mut Criterion) -> Res<()> {
    let rates = reference_rates()?;
    let coop = rates.cooperativity();
    c.within("C = 2g^2/(kappa gamma)", coop, 2.0 * 5.3 * 14.0, 1e-9);
    c.check("C to two figures", (coop / 10.0).round() * 10.0 == 150.0, format!("{coop:.1} -> 150"));
    let beta = format!("{:.1}", 100.0 * rates.beta());
    c.check("beta", beta == "99.7", format!("{beta}%"));

    let (cfg, path) = preset("fit_weak_spectrum.json");
    let f = cfg.fit.as_ref().ok_or("fit")?;
    let data = read_spectrum_csv(&config::resolve_path(&path, &f.data_path))?;
    let fitted = fit_jc_spectrum(&data, &f.initial.rates("fit.initial")?)?.rates;
    let fc = fitted.cooperativity();
    c.check("fitted C to two figures", (fc / 10.0).round() * 10.0 == 150.0, format!("{fc:.1} -> 150"));
    Ok(())
}
