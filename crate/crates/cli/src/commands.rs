use anyhow::{bail, Context, Result};

use qfc_core::dispersion::{
    calibrate_offsets, optimal_poling_period, phase_matching_temperature, phase_mismatches, spurious_mismatches,
    TemperatureSearch,
};
use qfc_core::experiments::hom::{monte_carlo_visibility, MonteCarlo};
use qfc_core::experiments::{
    curve_peak, efficiency_curve, extract_visibility, fit_noise_linear, power_sweep, simulate_hom_scan,
};
use qfc_core::grid::channel_to_frequency;
use qfc_core::{
    calibrate, choose_pumps, Calibration, ConversionGeometry, DispersionModel, Error, OpticalFrequency, Poling,
    WdmChannel,
};

use crate::config::RunConfig;
use crate::output::{Artifacts, Body};

fn row(q: &str, v: impl ToString, unit: &str) -> (String, String, String) {
    (q.to_string(), v.to_string(), unit.to_string())
}

/// Dispersion model and geometry after optional run-time calibration.
struct Resolved {
    model: DispersionModel,
    geometry: ConversionGeometry,
    calibration: Calibration,
    calibrated_offsets: bool,
}

fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    cfg.validate()?;
    let calibration = calibrate(cfg.calibration)?;
    let mut model = cfg.dispersion_model()?;
    let mut geometry = cfg.geometry()?;
    let degenerate = geometry.signal == geometry.target;
    let calibrated_offsets = cfg.dispersion.calibrate && !degenerate;
    if calibrated_offsets {
        let fit = calibrate_offsets(&geometry, &model, calibration.delta_k, geometry.temperature_c)
            .context("calibrating dispersion offsets")?;
        model = model.with_offsets(fit.offsets);
        if cfg.geometry.poling_period_um.is_none() {
            geometry = geometry.with_poling(Poling::PeriodUm(fit.poling_period_um));
        }
    }
    if geometry.poling == Poling::Auto {
        if let Some(p) = optimal_poling_period(&geometry, &model)?.period_um() {
            geometry = geometry.with_poling(Poling::PeriodUm(p));
        }
    }
    Ok(Resolved {
        model,
        geometry,
        calibration,
        calibrated_offsets,
    })
}

fn carrier_rows(rows: &mut Vec<(String, String, String)>, name: &str, f: OpticalFrequency) {
    rows.push(row(&format!("{name}_frequency"), f.thz(), "THz"));
    rows.push(row(&format!("{name}_wavelength"), f.wavelength().nm(), "nm"));
}

pub fn phasematch(cfg: &RunConfig) -> Result<Artifacts> {
    let r = resolve(cfg)?;
    let g = r.geometry;
    let mm = phase_mismatches(&g, &r.model)?;
    let length = cfg.calibration.length_m;

    let mut rows = Vec::new();
    carrier_rows(&mut rows, "signal", g.signal);
    carrier_rows(&mut rows, "target", g.target);
    carrier_rows(&mut rows, "pump1", g.pump1);
    carrier_rows(&mut rows, "pump2", g.pump2);
    carrier_rows(&mut rows, "sfg", g.sfg_frequency());
    rows.push(row("temperature", g.temperature_c, "degC"));
    let period = match g.poling {
        Poling::PeriodUm(p) => Some(p),
        Poling::Auto => None,
    };
    rows.push(row(
        "poling_period",
        period.map_or("none".into(), |p| p.to_string()),
        "um",
    ));
    rows.push(row("dk_sfg", mm.dk_sfg, "rad/m"));
    rows.push(row("dk_dfg", mm.dk_dfg, "rad/m"));
    rows.push(row("K", mm.k_avg, "rad/m"));
    rows.push(row("delta_K", mm.delta_k, "rad/m"));
    rows.push(row("delta_K_L", mm.delta_k * length, "1"));
    rows.push(row("length", length, "m"));
    rows.push(row("offsets_calibrated", r.calibrated_offsets, "bool"));
    let off = r.model.offsets;
    for (name, v) in [
        ("offset_signal", off.signal),
        ("offset_target", off.target),
        ("offset_pump1", off.pump1),
        ("offset_pump2", off.pump2),
        ("offset_sfg", off.sfg),
    ] {
        rows.push(row(name, v, "1"));
    }
    let pm_temperature = match period {
        Some(p) => match phase_matching_temperature(&g, &r.model, p, TemperatureSearch::default()) {
            Ok(t) => t.to_string(),
            Err(Error::NoPhaseMatch { .. }) => "none".into(),
            Err(e) => return Err(e.into()),
        },
        None => "none".into(),
    };
    rows.push(row("phase_matching_temperature", &pm_temperature, "degC"));
    if g.signal != g.target {
        let sp = spurious_mismatches(&g, &r.model)?;
        rows.push(row("dk_signal_pump2", sp.signal_pump2, "rad/m"));
        rows.push(row("dk_target_pump1", sp.target_pump1, "rad/m"));
    }

    let summary = vec![
        format!("delta_K·L = {:.6}", mm.delta_k * length),
        format!("K = {:.6e} rad/m", mm.k_avg),
        format!(
            "poling period = {} um",
            period.map_or("none".to_string(), |p| format!("{p:.6}"))
        ),
        format!("phase-matching temperature = {pm_temperature} degC"),
    ];
    Ok(Artifacts {
        command: "phasematch",
        files: vec![("phasematch".into(), Body::Report(rows))],
        summary,
    })
}

pub fn efficiency(cfg: &RunConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let s = cfg.sweep;
    let cal = calibrate(cfg.calibration)?;
    let mut opts = s.options();
    if s.include_wrong_pump {
        let r = resolve(cfg)?;
        opts.spurious = Some(spurious_mismatches(&r.geometry, &r.model)?);
    }
    let curve = efficiency_curve(&cal, &power_sweep(s.min_w, s.max_w, s.points), &opts)?;
    let peak = curve_peak(&curve).expect("at least one point");
    let rows = curve.iter().map(|p| vec![p.total_power_w, p.eta]).collect();
    let summary = vec![
        format!(
            "delta_K·L = {:.6}, Q·L² at peak power = {:.6}",
            cal.delta_k_l(),
            cal.coupling_rate(cfg.calibration.p_total_at_peak_w) * cal.length_m().powi(2)
        ),
        format!("sweep peak: eta = {:.6} at {:.4} W", peak.eta, peak.total_power_w),
        format!(
            "eta at calibrated peak power {} W = {:.6}",
            cfg.calibration.p_total_at_peak_w,
            cal.efficiency(cfg.calibration.p_total_at_peak_w)
        ),
    ];
    Ok(Artifacts {
        command: "efficiency",
        files: vec![("efficiency".into(), Body::table(&["total_power_w", "eta"], rows))],
        summary,
    })
}

pub fn plan(cfg: &RunConfig) -> Result<Artifacts> {
    let r = resolve(cfg)?;
    let spectrum = cfg.noise_spectrum()?;
    let mut constraints = cfg.pump_search;
    if constraints.poling_period_um.is_none() {
        if let Poling::PeriodUm(p) = r.geometry.poling {
            constraints.poling_period_um = Some(p);
        }
    }
    let signal = WdmChannel(cfg.geometry.signal_channel);
    let target = WdmChannel(cfg.geometry.target_channel);
    channel_to_frequency(signal)?;
    channel_to_frequency(target)?;
    let plan = choose_pumps(signal, target, &spectrum, &r.model, &constraints, &r.calibration)?;
    let plan = match cfg.plan.requested_eta {
        Some(eta) => plan.with_powers(&r.calibration, Some(eta), &spectrum)?,
        None => plan,
    };

    let g = plan.geometry;
    let mut rows = Vec::new();
    carrier_rows(&mut rows, "signal", g.signal);
    carrier_rows(&mut rows, "target", g.target);
    carrier_rows(&mut rows, "pump1", g.pump1);
    carrier_rows(&mut rows, "pump2", g.pump2);
    rows.push(row("pump_separation", g.pump1.ghz() - g.pump2.ghz(), "GHz"));
    rows.push(row("p1", plan.p1_w, "W"));
    rows.push(row("p2", plan.p2_w, "W"));
    rows.push(row("total_power", plan.total_power_w(), "W"));
    rows.push(row("predicted_eta", plan.predicted_eta, "1"));
    rows.push(row("calibrated_eta_max", r.calibration.eta_max(), "1"));
    rows.push(row("predicted_noise_rate", plan.predicted_noise_rate, "counts/s"));
    rows.push(row("delta_K_L", plan.delta_k_l, "1"));
    rows.push(row("pair_eta_max", plan.eta_max, "1"));
    rows.push(row("cost", plan.score.cost, "1"));
    rows.push(row("photon_distance", plan.score.photon_distance_ghz, "GHz"));
    rows.push(row("candidates", plan.landscape.candidates, "1"));
    rows.push(row("min_pair_noise", plan.landscape.min_noise, "counts/s"));
    rows.push(row("max_pair_noise", plan.landscape.max_noise, "counts/s"));

    let summary = vec![
        format!(
            "pump 1 {:.4} nm, pump 2 {:.4} nm ({} GHz apart)",
            g.pump1.wavelength().nm(),
            g.pump2.wavelength().nm(),
            g.pump1.ghz() - g.pump2.ghz()
        ),
        format!(
            "total power {:.4} W, predicted eta {:.4}, noise {:.1} counts/s",
            plan.total_power_w(),
            plan.predicted_eta,
            plan.predicted_noise_rate
        ),
    ];
    Ok(Artifacts {
        command: "plan",
        files: vec![("plan".into(), Body::Report(rows))],
        summary,
    })
}

fn read_samples(cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
    let Some(path) = &cfg.noise.samples_file else {
        bail!("noise-fit needs noise.samples_file (two columns: total pump power W, counts/s)");
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        if cols.len() != 2 {
            bail!("{} line {}: expected two columns", path.display(), i + 1);
        }
        out.push((cols[0], cols[1]));
    }
    Ok(out)
}

pub fn noise_fit(cfg: &RunConfig) -> Result<Artifacts> {
    let samples = read_samples(cfg)?;
    let model = fit_noise_linear(&samples)?;
    let rows = vec![
        row("slope", model.slope, "counts/s/W"),
        row("intercept", model.intercept, "counts/s"),
        row("rms_residual", model.rms_residual, "counts/s"),
        row("samples", samples.len(), "1"),
        row("power_min", model.power_range_w.0, "W"),
        row("power_max", model.power_range_w.1, "W"),
    ];
    let residuals = samples
        .iter()
        .zip(&model.residuals)
        .map(|(&(p, c), &res)| vec![p, c, c - res, res])
        .collect();
    Ok(Artifacts {
        command: "noise-fit",
        files: vec![
            ("noise_fit".into(), Body::Report(rows)),
            (
                "noise_fit_residuals".into(),
                Body::table(
                    &["total_power_w", "counts_per_s", "fitted_per_s", "residual_per_s"],
                    residuals,
                ),
            ),
        ],
        summary: vec![format!(
            "noise = {:.4} counts/s/W · P + {:.4} counts/s (rms residual {:.4})",
            model.slope, model.intercept, model.rms_residual
        )],
    })
}

pub fn hom(cfg: &RunConfig) -> Result<Artifacts> {
    let hom_cfg = cfg.hom.to_config()?;
    let scan = simulate_hom_scan(&hom_cfg)?;
    let fit = extract_visibility(&scan.delays_ps, &scan.coincidences, scan.noise_floor)?;

    let mut rows = vec![
        row("interference_visibility", hom_cfg.interference_visibility(), "1"),
        row("visibility_raw", scan.visibility_raw, "1"),
        row("visibility_noise_subtracted", scan.visibility_noise_subtracted, "1"),
        row("noise_floor", scan.noise_floor, "counts/s"),
        row("c_far", scan.c_far, "counts/s"),
        row("c_dip", scan.c_dip, "counts/s"),
        row("sigma_tau", hom_cfg.sigma_ps(), "ps"),
    ];
    match fit.visibilities() {
        Some((raw, ns)) => {
            rows.push(row("fit_visibility_raw", raw, "1"));
            rows.push(row("fit_visibility_noise_subtracted", ns, "1"));
            rows.push(row(
                "fit_dip_fwhm",
                2.0 * 1.177_410_022_515_474_6 * fit.fit().sigma_ps,
                "ps",
            ));
        }
        None => rows.push(row("fit", "no dip", "")),
    }
    let mut summary = vec![format!(
        "V_raw = {:.6}, V_ns = {:.6} (model scan)",
        scan.visibility_raw, scan.visibility_noise_subtracted
    )];

    let table = scan
        .delays_ps
        .iter()
        .zip(&scan.coincidences)
        .map(|(&d, &c)| vec![d, c])
        .collect();
    let mut files = vec![(
        "hom_scan".to_string(),
        Body::table(&["delay_ps", "coincidences_per_s"], table),
    )];

    let mc_cfg = cfg.hom.monte_carlo;
    if mc_cfg.enabled {
        let mc = monte_carlo_visibility(
            &hom_cfg,
            &MonteCarlo {
                integration_s: mc_cfg.integration_s,
                first_seed: cfg.seed,
                trials: mc_cfg.trials,
            },
        )?;
        rows.push(row("mc_trials", mc_cfg.trials, "1"));
        rows.push(row("mc_first_seed", cfg.seed, "1"));
        rows.push(row("mc_mean_visibility_raw", mc.mean_raw, "1"));
        rows.push(row("mc_std_visibility_raw", mc.std_raw, "1"));
        rows.push(row(
            "mc_mean_visibility_noise_subtracted",
            mc.mean_noise_subtracted,
            "1",
        ));
        rows.push(row("mc_std_visibility_noise_subtracted", mc.std_noise_subtracted, "1"));
        summary.push(format!(
            "Monte Carlo over {} seeds from {}: V_raw = {:.4} ± {:.4}",
            mc_cfg.trials, cfg.seed, mc.mean_raw, mc.std_raw
        ));
        let trials = mc
            .trials
            .iter()
            .map(|t| {
                let (raw, ns) = t.visibilities.unwrap_or((f64::NAN, f64::NAN));
                vec![t.seed as f64, raw, ns]
            })
            .collect();
        files.push((
            "hom_monte_carlo".into(),
            Body::table(&["seed", "visibility_raw", "visibility_noise_subtracted"], trials),
        ));
    }
    files.insert(1, ("hom_summary".into(), Body::Report(rows)));
    Ok(Artifacts {
        command: "hom",
        files,
        summary,
    })
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<Artifacts> {
    match command {
        "phasematch" => phasematch(cfg),
        "efficiency" => efficiency(cfg),
        "plan" => plan(cfg),
        "noise-fit" => noise_fit(cfg),
        "hom" => hom(cfg),
        other => bail!("unknown command {other:?}"),
    }
}
