//! Calibration of the closed-form model and pump selection.
//!
//! Calibration inverts the resonance value `(1 − δK²L²/4π²)²` for `δK`
//! and places the `m = 0` resonance `L/4·√(δK² + 4Q) = π/2` at the target
//! total power, giving the coupling rate per watt of each (balanced) pump.
//!
//! Pump selection scans pump 1 over a band on a fixed grid, places pump 2
//! at `f_P1 − (f_t − f_s)` and scores each pair with
//!
//! ```text
//! cost = w_n·N̂ + w_d·D̂,   N = noise(f_P1) + noise(f_P2),   D = 1 − η_max(δK, L)
//! ```
//!
//! where `N̂`, `D̂` are min-max normalized over the candidate set. Equal costs
//! go to the pair whose nearest pump is farthest from the photons.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled_mode::{
    closed_form_efficiency, conversion_efficiency_with_tolerance, max_efficiency_admissible, resonant_coupling_rate,
    CouplingConfig, DEFAULT_BALANCE_TOLERANCE,
};
use crate::dispersion::{
    phase_matching_temperature, phase_mismatches, ConversionGeometry, DispersionModel, PhaseMismatchSet, Poling,
    TemperatureSearch,
};
use crate::error::{Error, Result};
use crate::experiments::NoiseSpectrum;
use crate::grid::{channel_to_frequency, shift_between, OpticalFrequency, WavelengthVacuum, WdmChannel};

const ROUND_TRIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub length_m: f64,
    /// Total pump power (both pumps) at the efficiency maximum, W.
    pub p_total_at_peak_w: f64,
    pub eta_theory_max: f64,
    /// Relative pump balance tolerance.
    #[serde(default = "default_balance_tolerance")]
    pub balance_tolerance: f64,
}

fn default_balance_tolerance() -> f64 {
    DEFAULT_BALANCE_TOLERANCE
}

impl CalibrationTargets {
    pub fn new(length_m: f64, p_total_at_peak_w: f64, eta_theory_max: f64) -> Self {
        Self {
            length_m,
            p_total_at_peak_w,
            eta_theory_max,
            balance_tolerance: DEFAULT_BALANCE_TOLERANCE,
        }
    }

    fn validate(&self) -> Result<()> {
        for (quantity, value) in [
            ("waveguide length", self.length_m),
            ("peak power", self.p_total_at_peak_w),
            ("balance tolerance", self.balance_tolerance),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositive { quantity, value });
            }
        }
        if !(self.eta_theory_max > 0.0 && self.eta_theory_max <= 1.0) {
            return Err(Error::Calibration(format!(
                "eta_theory_max = {} is outside (0, 1]",
                self.eta_theory_max
            )));
        }
        Ok(())
    }
}

/// Coupling model fitted to [`CalibrationTargets`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub targets: CalibrationTargets,
    /// Mismatch difference, rad/m (non-negative from the inversion).
    pub delta_k: f64,
    /// `Q` per watt of each pump, rad²/m²/W.
    pub q_per_watt: f64,
    /// Per-pump coupling constant with `Q = 2𝒳²P`, (rad/m)/√W.
    pub chi: f64,
}

pub fn calibrate(targets: CalibrationTargets) -> Result<Calibration> {
    targets.validate()?;
    let l = targets.length_m;
    let delta_k_l = TAU * (1.0 - targets.eta_theory_max.sqrt()).sqrt();
    let delta_k = delta_k_l / l;
    let q_peak = resonant_coupling_rate(delta_k, l, 0)
        .map_err(|e| Error::Calibration(format!("eta_theory_max inadmissible: {e}")))?;
    let q_per_watt = q_peak / (targets.p_total_at_peak_w / 2.0);
    let cal = Calibration {
        targets,
        delta_k,
        q_per_watt,
        chi: (q_per_watt / 2.0).sqrt(),
    };
    let back = conversion_efficiency_with_tolerance(
        &cal.coupling_config(targets.p_total_at_peak_w),
        &cal.mismatch(),
        targets.balance_tolerance,
    )?
    .eta;
    if (back - targets.eta_theory_max).abs() > ROUND_TRIP_TOLERANCE {
        return Err(Error::Calibration(format!(
            "round trip gives η = {back}, wanted {}",
            targets.eta_theory_max
        )));
    }
    Ok(cal)
}

impl Calibration {
    pub fn length_m(&self) -> f64 {
        self.targets.length_m
    }

    pub fn delta_k_l(&self) -> f64 {
        self.delta_k * self.targets.length_m
    }

    /// `Q` for a balanced total power.
    pub fn coupling_rate(&self, total_power_w: f64) -> f64 {
        self.q_per_watt * total_power_w / 2.0
    }

    pub fn coupling_config(&self, total_power_w: f64) -> CouplingConfig {
        CouplingConfig::balanced(self.chi, total_power_w, self.targets.length_m)
    }

    /// `K = 0` mismatch set carrying the calibrated `δK`.
    pub fn mismatch(&self) -> PhaseMismatchSet {
        PhaseMismatchSet::from_average_and_difference(0.0, self.delta_k)
    }

    /// Closed-form η at a balanced total power.
    pub fn efficiency(&self, total_power_w: f64) -> f64 {
        closed_form_efficiency(self.coupling_rate(total_power_w), self.delta_k, self.targets.length_m)
    }

    /// Resonance value on the smallest admissible branch.
    pub fn eta_max(&self) -> f64 {
        max_efficiency_admissible(self.delta_k, self.targets.length_m).eta
    }

    /// Same coupling per watt, different mismatch (e.g. another pump pair).
    pub fn with_delta_k(mut self, delta_k: f64) -> Self {
        self.delta_k = delta_k.abs();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpPowers {
    pub p1_w: f64,
    pub p2_w: f64,
    pub total_w: f64,
}

impl PumpPowers {
    fn balanced(total_w: f64) -> Self {
        Self {
            p1_w: total_w / 2.0,
            p2_w: total_w / 2.0,
            total_w,
        }
    }
}

/// Balanced powers on the first resonance, or the lower-power solution of
/// `η(P) = requested_eta` when a smaller efficiency is requested.
pub fn power_for_max_conversion(cal: &Calibration, requested_eta: Option<f64>) -> Result<PumpPowers> {
    let m = max_efficiency_admissible(cal.delta_k, cal.length_m());
    let q_res = resonant_coupling_rate(cal.delta_k, cal.length_m(), m.m)?;
    let p_res = 2.0 * q_res / cal.q_per_watt;
    let eta_max = m.eta;
    let Some(eta) = requested_eta else {
        return Ok(PumpPowers::balanced(p_res));
    };
    if !(eta >= 0.0) {
        return Err(Error::Input(format!("requested efficiency {eta} is negative")));
    }
    if eta > eta_max {
        return Err(Error::Infeasible {
            requested: eta,
            eta_max,
        });
    }
    if eta == 0.0 {
        return Ok(PumpPowers::balanced(0.0));
    }
    if eta == eta_max {
        return Ok(PumpPowers::balanced(p_res));
    }
    // η(P) rises monotonically from 0 to η_max on [0, P_res] for m = 0.
    let (mut lo, mut hi) = (0.0, p_res);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cal.efficiency(mid) < eta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * p_res {
            break;
        }
    }
    Ok(PumpPowers::balanced(0.5 * (lo + hi)))
}

/// Limits on the pump search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PumpConstraints {
    pub band_min_nm: f64,
    pub band_max_nm: f64,
    pub grid_ghz: f64,
    /// Minimum spacing between any pump and either photon, GHz.
    pub photon_guard_ghz: f64,
    pub weight_noise: f64,
    pub weight_mismatch: f64,
    /// Crystal temperature at which mismatches are evaluated, °C.
    pub temperature_c: f64,
    /// Poling period used for the temperature bound, µm.
    pub poling_period_um: Option<f64>,
    /// Optional allowed phase-matching temperature range, °C.
    pub temperature_range_c: Option<(f64, f64)>,
}

impl Default for PumpConstraints {
    fn default() -> Self {
        Self {
            band_min_nm: 1530.0,
            band_max_nm: 1565.0,
            grid_ghz: 1.0,
            photon_guard_ghz: 100.0,
            weight_noise: 1.0,
            weight_mismatch: 1.0,
            temperature_c: 122.5,
            poling_period_um: None,
            temperature_range_c: None,
        }
    }
}

impl PumpConstraints {
    fn validate(&self) -> Result<()> {
        if !(self.band_min_nm > 0.0 && self.band_max_nm >= self.band_min_nm) {
            return Err(Error::Planning(format!(
                "pump band {}..{} nm is empty",
                self.band_min_nm, self.band_max_nm
            )));
        }
        if !(self.grid_ghz.is_finite() && self.grid_ghz > 0.0) {
            return Err(Error::NonPositive {
                quantity: "pump grid step",
                value: self.grid_ghz,
            });
        }
        if !(self.weight_noise >= 0.0 && self.weight_mismatch >= 0.0) {
            return Err(Error::Planning("cost weights must be non-negative".into()));
        }
        if self.temperature_range_c.is_some() && self.poling_period_um.is_none() {
            return Err(Error::Planning(
                "a temperature bound needs the poling period to be set".into(),
            ));
        }
        Ok(())
    }
}

/// Raw cost terms of one candidate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub pump1: OpticalFrequency,
    pub pump2: OpticalFrequency,
    /// Sum of both pumps' spectrum values, counts/s.
    pub noise: f64,
    pub delta_k: f64,
    pub eta_max: f64,
    /// Smallest pump-photon spacing, GHz.
    pub photon_distance_ghz: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostLandscape {
    pub candidates: usize,
    pub min_noise: f64,
    pub max_noise: f64,
    pub min_eta_max: f64,
    pub max_eta_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionPlan {
    pub geometry: ConversionGeometry,
    pub p1_w: f64,
    pub p2_w: f64,
    pub predicted_eta: f64,
    /// counts/s from both pumps at the planned powers.
    pub predicted_noise_rate: f64,
    /// `δK·L` of the chosen pair from the dispersion model.
    #[serde(rename = "delta_K_L")]
    pub delta_k_l: f64,
    /// Resonance efficiency for that `δK`.
    pub eta_max: f64,
    pub score: CandidateScore,
    pub landscape: CostLandscape,
}

impl ConversionPlan {
    pub fn total_power_w(&self) -> f64 {
        self.p1_w + self.p2_w
    }

    /// Fills in powers and the predicted efficiency from the calibration.
    /// The calibrated `δK` takes precedence over the dispersion-model value
    /// of the chosen pair, which only enters the ranking.
    pub fn with_powers(mut self, cal: &Calibration, requested_eta: Option<f64>, noise: &NoiseSpectrum) -> Result<Self> {
        let powers = power_for_max_conversion(cal, requested_eta)?;
        self.p1_w = powers.p1_w;
        self.p2_w = powers.p2_w;
        self.predicted_eta = cal.efficiency(powers.total_w).clamp(0.0, 1.0);
        self.predicted_noise_rate =
            noise.at_power(self.geometry.pump1, powers.p1_w) + noise.at_power(self.geometry.pump2, powers.p2_w);
        Ok(self)
    }
}

fn candidate_pumps(
    signal: OpticalFrequency,
    target: OpticalFrequency,
    constraints: &PumpConstraints,
) -> Result<Vec<(OpticalFrequency, OpticalFrequency)>> {
    let band_lo = WavelengthVacuum::from_nm(constraints.band_max_nm)?.frequency().ghz();
    let band_hi = WavelengthVacuum::from_nm(constraints.band_min_nm)?.frequency().ghz();
    let shift = shift_between(target, signal).ghz();
    let step = constraints.grid_ghz;
    let first = (band_lo / step).ceil() as i64;
    let last = (band_hi / step).floor() as i64;
    let guard = constraints.photon_guard_ghz;
    let clear = |g: f64| (g - signal.ghz()).abs() >= guard && (g - target.ghz()).abs() >= guard;

    let mut out = Vec::new();
    for i in first..=last {
        let p1 = i as f64 * step;
        let p2 = p1 - shift;
        if p2 < band_lo || p2 > band_hi || !clear(p1) || !clear(p2) {
            continue;
        }
        out.push((OpticalFrequency::from_ghz(p1)?, OpticalFrequency::from_ghz(p2)?));
    }
    Ok(out)
}

/// Ranks every admissible pump pair for `signal → target` and returns the
/// cheapest, with the calibrated resonance powers filled in.
pub fn choose_pumps(
    signal: WdmChannel,
    target: WdmChannel,
    noise: &NoiseSpectrum,
    model: &DispersionModel,
    constraints: &PumpConstraints,
    cal: &Calibration,
) -> Result<ConversionPlan> {
    choose_pumps_between(
        channel_to_frequency(signal)?,
        channel_to_frequency(target)?,
        noise,
        model,
        constraints,
        cal,
    )
}

pub fn choose_pumps_between(
    signal: OpticalFrequency,
    target: OpticalFrequency,
    noise: &NoiseSpectrum,
    model: &DispersionModel,
    constraints: &PumpConstraints,
    cal: &Calibration,
) -> Result<ConversionPlan> {
    let scores = score_candidates(signal, target, noise, model, constraints, cal)?;
    let best = scores
        .iter()
        .copied()
        .min_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(b.photon_distance_ghz.total_cmp(&a.photon_distance_ghz))
                .then(a.pump1.ghz().total_cmp(&b.pump1.ghz()))
        })
        .expect("non-empty");

    let (min_noise, max_noise) = min_max(scores.iter().map(|s| s.noise));
    let (min_eta_max, max_eta_max) = min_max(scores.iter().map(|s| s.eta_max));
    let geometry = ConversionGeometry {
        signal,
        target,
        pump1: best.pump1,
        pump2: best.pump2,
        temperature_c: constraints.temperature_c,
        poling: constraints.poling_period_um.map_or(Poling::Auto, Poling::PeriodUm),
    };
    let plan = ConversionPlan {
        geometry,
        p1_w: 0.0,
        p2_w: 0.0,
        predicted_eta: 0.0,
        predicted_noise_rate: 0.0,
        delta_k_l: best.delta_k * cal.length_m(),
        eta_max: best.eta_max,
        score: best,
        landscape: CostLandscape {
            candidates: scores.len(),
            min_noise,
            max_noise,
            min_eta_max,
            max_eta_max,
        },
    };
    plan.with_powers(cal, None, noise)
}

/// All admissible candidates with raw and combined costs, in pump-1 order.
pub fn score_candidates(
    signal: OpticalFrequency,
    target: OpticalFrequency,
    noise: &NoiseSpectrum,
    model: &DispersionModel,
    constraints: &PumpConstraints,
    cal: &Calibration,
) -> Result<Vec<CandidateScore>> {
    constraints.validate()?;
    let pairs = candidate_pumps(signal, target, constraints)?;
    let l = cal.length_m();

    let evaluated: Vec<Option<CandidateScore>> = pairs
        .par_iter()
        .map(|&(pump1, pump2)| -> Result<Option<CandidateScore>> {
            let geom = ConversionGeometry {
                signal,
                target,
                pump1,
                pump2,
                temperature_c: constraints.temperature_c,
                poling: Poling::Auto,
            };
            if let (Some((lo, hi)), Some(period)) = (constraints.temperature_range_c, constraints.poling_period_um) {
                let search = TemperatureSearch {
                    low_c: lo,
                    high_c: hi,
                    ..TemperatureSearch::default()
                };
                match phase_matching_temperature(&geom, model, period, search) {
                    Ok(_) => {}
                    Err(Error::NoPhaseMatch { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            let delta_k = phase_mismatches(&geom, model)?.delta_k;
            let photon_distance_ghz = [pump1, pump2]
                .iter()
                .flat_map(|p| [signal, target].map(|x| (p.ghz() - x.ghz()).abs()))
                .fold(f64::INFINITY, f64::min);
            Ok(Some(CandidateScore {
                pump1,
                pump2,
                noise: noise.at(pump1) + noise.at(pump2),
                delta_k,
                eta_max: max_efficiency_admissible(delta_k, l).eta,
                photon_distance_ghz,
                cost: 0.0,
            }))
        })
        .collect::<Result<_>>()?;
    let mut scores: Vec<CandidateScore> = evaluated.into_iter().flatten().collect();
    if scores.is_empty() {
        return Err(Error::Planning(format!(
            "no pump pair satisfies the constraints ({} grid candidates before filtering)",
            pairs.len()
        )));
    }

    let (n_lo, n_hi) = min_max(scores.iter().map(|s| s.noise));
    let (d_lo, d_hi) = min_max(scores.iter().map(|s| 1.0 - s.eta_max));
    let norm = |x: f64, lo: f64, hi: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
    for s in &mut scores {
        s.cost = constraints.weight_noise * norm(s.noise, n_lo, n_hi)
            + constraints.weight_mismatch * norm(1.0 - s.eta_max, d_lo, d_hi);
    }
    Ok(scores)
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
