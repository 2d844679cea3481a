//! Refractive index, wavevectors and the cascaded SFG/DFG phase mismatches.
//!
//! The index model is a temperature-dependent Sellmeier equation loaded from
//! a TOML coefficient file. A bundled set for the extraordinary index of
//! congruent lithium niobate is available through
//! [`DispersionModel::congruent_lithium_niobate`]. Waveguide dispersion is
//! approximated by constant per-mode effective-index offsets added to the
//! bulk index.
//!
//! Mismatch conventions (all in rad/m):
//!
//! ```text
//! Δk_SFG = k(ω_s + ω_P1) − k_s − k_P1 − 2π/Λ
//! Δk_DFG = k(ω_s + ω_P1) − k_t − k_P2 − 2π/Λ
//! K      = (Δk_DFG + Δk_SFG) / 2
//! δK     = Δk_DFG − Δk_SFG = k_s + k_P1 − k_t − k_P2
//! ```
//!
//! `δK` is evaluated directly from the last form so that it does not depend
//! on the poling period at all.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{shift_between, OpticalFrequency, WavelengthVacuum};

const BUNDLED_LN: &str = include_str!("../data/lithium_niobate_congruent_e.toml");

/// Energy-conservation tolerance for geometry checks.
const ENERGY_TOLERANCE_GHZ: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub t_ref: f64,
    pub t_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityRange {
    pub min_um: f64,
    pub max_um: f64,
}

/// Which interacting field a wavevector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRole {
    Signal,
    Target,
    Pump1,
    Pump2,
    /// Intermediate sum-frequency mode, also used for the spurious
    /// wrong-pump sum frequencies.
    Sfg,
}

/// Additive effective-index corrections per mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexOffsets {
    pub signal: f64,
    pub target: f64,
    pub pump1: f64,
    pub pump2: f64,
    pub sfg: f64,
}

impl IndexOffsets {
    pub fn get(&self, role: ModeRole) -> f64 {
        match role {
            ModeRole::Signal => self.signal,
            ModeRole::Target => self.target,
            ModeRole::Pump1 => self.pump1,
            ModeRole::Pump2 => self.pump2,
            ModeRole::Sfg => self.sfg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub name: String,
    #[serde(default)]
    pub version: u32,
    pub coefficients: SellmeierCoefficients,
    pub validity: ValidityRange,
    #[serde(default)]
    pub offsets: IndexOffsets,
}

impl DispersionModel {
    pub fn congruent_lithium_niobate() -> Self {
        Self::from_toml_str(BUNDLED_LN).expect("bundled coefficient file is valid")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let model: Self = toml::from_str(s).map_err(|e| Error::Parse {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        model.check()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        let v = self.validity;
        if !(v.min_um > 0.0 && v.max_um > v.min_um) {
            return Err(Error::Input(format!(
                "validity range {}..{} µm is empty",
                v.min_um, v.max_um
            )));
        }
        Ok(())
    }

    pub fn with_offsets(mut self, offsets: IndexOffsets) -> Self {
        self.offsets = offsets;
        self
    }

    fn check_range(&self, lambda: WavelengthVacuum) -> Result<f64> {
        let um = lambda.um();
        if um < self.validity.min_um || um > self.validity.max_um {
            return Err(Error::WavelengthOutOfRange {
                nm: lambda.nm(),
                min_nm: self.validity.min_um * 1e3,
                max_nm: self.validity.max_um * 1e3,
            });
        }
        Ok(um)
    }

    /// `n²` and `∂(n²)/∂T` of the bulk material.
    fn index_squared(&self, um: f64, temperature_c: f64) -> (f64, f64) {
        let c = &self.coefficients;
        let f = (temperature_c - c.t_ref) * (temperature_c + c.t_shift);
        let df_dt = 2.0 * temperature_c + c.t_shift - c.t_ref;
        let l2 = um * um;

        let uv_pole = c.a3 + c.b3 * f;
        let uv_den = l2 - uv_pole * uv_pole;
        let uv_num = c.a2 + c.b2 * f;
        let ir_den = l2 - c.a5 * c.a5;
        let ir_num = c.a4 + c.b4 * f;

        let n2 = c.a1 + c.b1 * f + uv_num / uv_den + ir_num / ir_den - c.a6 * l2;
        let dn2_df = c.b1 + c.b2 / uv_den + uv_num * 2.0 * uv_pole * c.b3 / (uv_den * uv_den) + c.b4 / ir_den;
        (n2, dn2_df * df_dt)
    }

    /// Bulk index with no effective-index offset.
    pub fn bulk_index(&self, lambda: WavelengthVacuum, temperature_c: f64) -> Result<f64> {
        let um = self.check_range(lambda)?;
        Ok(self.index_squared(um, temperature_c).0.sqrt())
    }

    /// Effective index of `role` (bulk index plus that mode's offset).
    pub fn refractive_index(&self, lambda: WavelengthVacuum, temperature_c: f64, role: ModeRole) -> Result<f64> {
        Ok(self.bulk_index(lambda, temperature_c)? + self.offsets.get(role))
    }

    /// `∂n/∂T` in 1/°C. Offsets are temperature independent.
    pub fn index_temperature_slope(&self, lambda: WavelengthVacuum, temperature_c: f64) -> Result<f64> {
        let um = self.check_range(lambda)?;
        let (n2, dn2) = self.index_squared(um, temperature_c);
        Ok(dn2 / (2.0 * n2.sqrt()))
    }

    /// `k = 2π·n/λ` in rad/m.
    pub fn wavevector(&self, f: OpticalFrequency, temperature_c: f64, role: ModeRole) -> Result<f64> {
        let lambda = f.wavelength();
        Ok(TAU * self.refractive_index(lambda, temperature_c, role)? / lambda.meters())
    }

    /// `∂k/∂T` in rad/m/°C.
    pub fn wavevector_temperature_slope(&self, f: OpticalFrequency, temperature_c: f64) -> Result<f64> {
        let lambda = f.wavelength();
        Ok(TAU * self.index_temperature_slope(lambda, temperature_c)? / lambda.meters())
    }
}

/// Poling period setting of a geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Poling {
    /// No grating term; the returned set reports the period that would
    /// cancel `K`.
    Auto,
    /// Grating period in µm.
    PeriodUm(f64),
}

impl Poling {
    fn grating_wavevector(self) -> f64 {
        match self {
            Poling::Auto => 0.0,
            Poling::PeriodUm(um) => TAU / (um * 1e-6),
        }
    }
}

/// The four interacting carriers and the crystal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionGeometry {
    pub signal: OpticalFrequency,
    pub target: OpticalFrequency,
    pub pump1: OpticalFrequency,
    pub pump2: OpticalFrequency,
    pub temperature_c: f64,
    pub poling: Poling,
}

impl ConversionGeometry {
    /// Builds a geometry with pump 2 placed so that `f_P1 − f_P2 = f_t − f_s`.
    pub fn from_pump1(
        signal: OpticalFrequency,
        target: OpticalFrequency,
        pump1: OpticalFrequency,
        temperature_c: f64,
        poling: Poling,
    ) -> Result<Self> {
        let pump2 = pump1.offset(-shift_between(target, signal))?;
        let geom = Self {
            signal,
            target,
            pump1,
            pump2,
            temperature_c,
            poling,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn sfg_frequency(&self) -> OpticalFrequency {
        self.signal.sum(self.pump1)
    }

    /// Energy conservation across both stages.
    pub fn validate(&self) -> Result<()> {
        let via_signal = self.signal.ghz() + self.pump1.ghz();
        let via_target = self.target.ghz() + self.pump2.ghz();
        if (via_signal - via_target).abs() > ENERGY_TOLERANCE_GHZ {
            return Err(Error::Consistency(format!(
                "f_s + f_P1 = {via_signal} GHz but f_t + f_P2 = {via_target} GHz"
            )));
        }
        if let Poling::PeriodUm(um) = self.poling {
            if !(um.is_finite() && um != 0.0) {
                return Err(Error::Consistency(format!("poling period {um} µm")));
            }
        }
        Ok(())
    }

    pub fn with_temperature(mut self, temperature_c: f64) -> Self {
        self.temperature_c = temperature_c;
        self
    }

    pub fn with_poling(mut self, poling: Poling) -> Self {
        self.poling = poling;
        self
    }

    /// Exchanges the roles of (signal, pump 1) and (target, pump 2).
    pub fn mirrored(&self) -> Self {
        Self {
            signal: self.target,
            target: self.signal,
            pump1: self.pump2,
            pump2: self.pump1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMismatchSet {
    pub dk_sfg: f64,
    pub dk_dfg: f64,
    /// Average mismatch `K`.
    pub k_avg: f64,
    /// Mismatch difference `δK`.
    pub delta_k: f64,
    /// Applied period, or for [`Poling::Auto`] the period that cancels `K`.
    pub poling_period_um: Option<f64>,
}

impl PhaseMismatchSet {
    /// Set with given `K` and `δK`, mainly for driving the propagators directly.
    pub fn from_average_and_difference(k_avg: f64, delta_k: f64) -> Self {
        Self {
            dk_sfg: k_avg - delta_k / 2.0,
            dk_dfg: k_avg + delta_k / 2.0,
            k_avg,
            delta_k,
            poling_period_um: None,
        }
    }
}

struct Wavevectors {
    signal: f64,
    target: f64,
    pump1: f64,
    pump2: f64,
    sfg: f64,
}

fn wavevectors(geom: &ConversionGeometry, model: &DispersionModel) -> Result<Wavevectors> {
    let t = geom.temperature_c;
    Ok(Wavevectors {
        signal: model.wavevector(geom.signal, t, ModeRole::Signal)?,
        target: model.wavevector(geom.target, t, ModeRole::Target)?,
        pump1: model.wavevector(geom.pump1, t, ModeRole::Pump1)?,
        pump2: model.wavevector(geom.pump2, t, ModeRole::Pump2)?,
        sfg: model.wavevector(geom.sfg_frequency(), t, ModeRole::Sfg)?,
    })
}

pub fn phase_mismatches(geom: &ConversionGeometry, model: &DispersionModel) -> Result<PhaseMismatchSet> {
    geom.validate()?;
    let k = wavevectors(geom, model)?;
    let grating = geom.poling.grating_wavevector();

    let dk_sfg = k.sfg - k.signal - k.pump1 - grating;
    let dk_dfg = k.sfg - k.target - k.pump2 - grating;
    let k_avg = (dk_dfg + dk_sfg) / 2.0;
    let delta_k = (k.signal + k.pump1) - (k.target + k.pump2);

    let poling_period_um = match geom.poling {
        Poling::PeriodUm(um) => Some(um),
        Poling::Auto if k_avg != 0.0 => Some(TAU / k_avg * 1e6),
        Poling::Auto => None,
    };

    Ok(PhaseMismatchSet {
        dk_sfg,
        dk_dfg,
        k_avg,
        delta_k,
        poling_period_um,
    })
}

/// Mismatches of the wrong-pump sum processes, rad/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpuriousMismatches {
    /// `k(ω_s + ω_P2) − k_s − k_P2 − 2π/Λ`
    pub signal_pump2: f64,
    /// `k(ω_t + ω_P1) − k_t − k_P1 − 2π/Λ`
    pub target_pump1: f64,
}

/// Wrong-pump mismatches. Both spurious sum modes use the SFG-mode offset.
/// With [`Poling::Auto`] the grating is the one that cancels `K` of the
/// wanted process.
pub fn spurious_mismatches(geom: &ConversionGeometry, model: &DispersionModel) -> Result<SpuriousMismatches> {
    let wanted = phase_mismatches(geom, model)?;
    let grating = match geom.poling {
        Poling::PeriodUm(_) => geom.poling.grating_wavevector(),
        Poling::Auto => wanted.k_avg,
    };
    let k = wavevectors(geom, model)?;
    let t = geom.temperature_c;
    let k_sp1 = model.wavevector(geom.signal.sum(geom.pump2), t, ModeRole::Sfg)?;
    let k_sp2 = model.wavevector(geom.target.sum(geom.pump1), t, ModeRole::Sfg)?;
    Ok(SpuriousMismatches {
        signal_pump2: k_sp1 - k.signal - k.pump2 - grating,
        target_pump1: k_sp2 - k.target - k.pump1 - grating,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimalPoling {
    PeriodUm(f64),
    /// `K` already vanishes without a grating.
    NotNeeded,
}

impl OptimalPoling {
    pub fn period_um(self) -> Option<f64> {
        match self {
            OptimalPoling::PeriodUm(p) => Some(p),
            OptimalPoling::NotNeeded => None,
        }
    }
}

/// `Λ = 2π/K` evaluated on the unpoled geometry.
///
/// A negative period means the grating has to compensate a negative average
/// mismatch.
pub fn optimal_poling_period(geom: &ConversionGeometry, model: &DispersionModel) -> Result<OptimalPoling> {
    let mm = phase_mismatches(&geom.with_poling(Poling::Auto), model)?;
    Ok(match mm.poling_period_um {
        Some(p) => OptimalPoling::PeriodUm(p),
        None => OptimalPoling::NotNeeded,
    })
}

/// Analytic `dΛ/dT` of the optimal period, µm/°C.
pub fn poling_period_temperature_slope(geom: &ConversionGeometry, model: &DispersionModel) -> Result<f64> {
    let mm = phase_mismatches(&geom.with_poling(Poling::Auto), model)?;
    if mm.k_avg == 0.0 {
        return Err(Error::Consistency("K vanishes; no optimal period".into()));
    }
    let t = geom.temperature_c;
    let dk = |f: OpticalFrequency| model.wavevector_temperature_slope(f, t);
    let dk_sfg = dk(geom.sfg_frequency())?;
    let d_avg = dk_sfg - (dk(geom.signal)? + dk(geom.pump1)? + dk(geom.target)? + dk(geom.pump2)?) / 2.0;
    Ok(-TAU / (mm.k_avg * mm.k_avg) * d_avg * 1e6)
}

/// Temperature search settings for [`phase_matching_temperature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSearch {
    pub low_c: f64,
    pub high_c: f64,
    /// Required `|K|` at the returned temperature, rad/m.
    pub k_tolerance: f64,
    /// Bracket width below which the search may stop, °C.
    pub resolution_c: f64,
}

impl Default for TemperatureSearch {
    fn default() -> Self {
        Self {
            low_c: 20.0,
            high_c: 200.0,
            k_tolerance: 1e-3,
            resolution_c: 1e-3,
        }
    }
}

/// Temperature at which `K = 0` for a fixed poling period, by bisection.
///
/// The search continues past `resolution_c` until `|K|` is below
/// `k_tolerance`; a typical dK/dT of several hundred rad/m/°C makes the
/// 0.001 °C bracket alone too coarse for that.
pub fn phase_matching_temperature(
    geom: &ConversionGeometry,
    model: &DispersionModel,
    poling_period_um: f64,
    search: TemperatureSearch,
) -> Result<f64> {
    let base = geom.with_poling(Poling::PeriodUm(poling_period_um));
    let k_at = |t: f64| -> Result<f64> { Ok(phase_mismatches(&base.with_temperature(t), model)?.k_avg) };

    let (mut lo, mut hi) = (search.low_c, search.high_c);
    let mut k_lo = k_at(lo)?;
    let k_hi = k_at(hi)?;
    if k_lo == 0.0 {
        return Ok(lo);
    }
    if k_hi == 0.0 {
        return Ok(hi);
    }
    if k_lo.signum() == k_hi.signum() {
        return Err(Error::NoPhaseMatch {
            low_c: search.low_c,
            high_c: search.high_c,
        });
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let k_mid = k_at(mid)?;
        if k_mid == 0.0 || (hi - lo < search.resolution_c && k_mid.abs() < search.k_tolerance) {
            return Ok(mid);
        }
        if k_mid.signum() == k_lo.signum() {
            lo = mid;
            k_lo = k_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    let k_mid = k_at(mid)?;
    if k_mid.abs() < search.k_tolerance {
        Ok(mid)
    } else {
        Err(Error::NoPhaseMatch {
            low_c: search.low_c,
            high_c: search.high_c,
        })
    }
}

/// Offsets and period that reconcile the model with a measured operating
/// point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionCalibration {
    pub offsets: IndexOffsets,
    pub poling_period_um: f64,
    pub temperature_c: f64,
    pub delta_k: f64,
}

/// Fits the target-mode offset so `|δK|` equals `target_delta_k_magnitude`
/// (keeping the sign the bulk model predicts), then picks the period that
/// phase-matches the geometry at `temperature_c`.
///
/// `δK` is linear in the target offset (`∂δK/∂n_t = −2π/λ_t`), so one step
/// is exact.
pub fn calibrate_offsets(
    geom: &ConversionGeometry,
    model: &DispersionModel,
    target_delta_k_magnitude: f64,
    temperature_c: f64,
) -> Result<DispersionCalibration> {
    let geom = geom.with_temperature(temperature_c).with_poling(Poling::Auto);
    let bulk = phase_mismatches(&geom, model)?;
    let sign = if bulk.delta_k < 0.0 { -1.0 } else { 1.0 };
    let wanted = sign * target_delta_k_magnitude;

    let lambda_t = geom.target.wavelength().meters();
    let mut offsets = model.offsets;
    offsets.target -= (wanted - bulk.delta_k) * lambda_t / TAU;

    let calibrated = model.clone().with_offsets(offsets);
    let mm = phase_mismatches(&geom, &calibrated)?;
    let poling_period_um = mm
        .poling_period_um
        .ok_or_else(|| Error::Calibration("average mismatch vanishes".into()))?;

    Ok(DispersionCalibration {
        offsets,
        poling_period_um,
        temperature_c,
        delta_k: mm.delta_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{channel_to_frequency, WdmChannel};

    fn nm(x: f64) -> WavelengthVacuum {
        WavelengthVacuum::from_nm(x).unwrap()
    }

    fn ch(i: i32) -> OpticalFrequency {
        channel_to_frequency(WdmChannel(i)).unwrap()
    }

    pub(crate) fn reference_geometry() -> ConversionGeometry {
        ConversionGeometry::from_pump1(ch(48), ch(52), nm(1550.28).frequency(), 122.5, Poling::Auto).unwrap()
    }

    // Golden values: 30-digit evaluation of the published Sellmeier form.
    const N_1550_122_5: f64 = 2.142_131_764_069_563;
    const N_768_7_122_5: f64 = 2.184_541_092_358_017;

    #[test]
    fn bulk_index_golden_values() {
        let m = DispersionModel::congruent_lithium_niobate();
        let n = m.bulk_index(nm(1550.0), 122.5).unwrap();
        assert!((n - N_1550_122_5).abs() < 1e-13, "{n}");
        let n = m.bulk_index(nm(768.7), 122.5).unwrap();
        assert!((n - N_768_7_122_5).abs() < 1e-13, "{n}");
    }

    #[test]
    fn zero_offsets_equal_bulk() {
        let m = DispersionModel::congruent_lithium_niobate();
        for role in [ModeRole::Signal, ModeRole::Sfg, ModeRole::Pump2] {
            assert_eq!(
                m.refractive_index(nm(1300.0), 60.0, role).unwrap(),
                m.bulk_index(nm(1300.0), 60.0).unwrap()
            );
        }
        let shifted = m.clone().with_offsets(IndexOffsets {
            sfg: 0.01,
            ..IndexOffsets::default()
        });
        let a = shifted.refractive_index(nm(780.0), 60.0, ModeRole::Sfg).unwrap();
        let b = m.bulk_index(nm(780.0), 60.0).unwrap();
        assert!((a - b - 0.01).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_wavelengths_fail() {
        let m = DispersionModel::congruent_lithium_niobate();
        assert!(matches!(
            m.bulk_index(nm(350.0), 25.0),
            Err(Error::WavelengthOutOfRange { .. })
        ));
        assert!(m.bulk_index(nm(5200.0), 25.0).is_err());
    }

    #[test]
    fn index_exceeds_one_across_validity_range() {
        let m = DispersionModel::congruent_lithium_niobate();
        for t in [20.0, 122.5, 200.0] {
            for nm_ in (400..=5000).step_by(10) {
                let n = m.bulk_index(nm(f64::from(nm_)), t).unwrap();
                assert!(n > 1.0, "n({nm_} nm, {t}) = {n}");
            }
        }
    }

    #[test]
    fn temperature_slope_matches_finite_difference() {
        let m = DispersionModel::congruent_lithium_niobate();
        for (l, t) in [(1550.0, 122.5), (775.0, 40.0), (2400.0, 180.0)] {
            let h = 1e-3;
            let fd = (m.bulk_index(nm(l), t + h).unwrap() - m.bulk_index(nm(l), t - h).unwrap()) / (2.0 * h);
            let an = m.index_temperature_slope(nm(l), t).unwrap();
            assert!(((fd - an) / an).abs() < 1e-6, "{l} {t}: {fd} vs {an}");
        }
    }

    #[test]
    fn wavevector_from_definition() {
        let m = DispersionModel::congruent_lithium_niobate();
        let f = nm(1550.0).frequency();
        let k = m.wavevector(f, 122.5, ModeRole::Signal).unwrap();
        let expected = TAU * N_1550_122_5 / 1550e-9;
        assert!(((k - expected) / expected).abs() < 1e-13);

        // Hypothetical n = 2.138 gives 8.666e6 rad/m.
        assert!((TAU * 2.138 / 1550e-9 - 8.666e6).abs() < 1e3);

        // Doubling n (offset equal to n) doubles k.
        let doubled = m.clone().with_offsets(IndexOffsets {
            signal: N_1550_122_5,
            ..IndexOffsets::default()
        });
        let k2 = doubled.wavevector(f, 122.5, ModeRole::Signal).unwrap();
        assert!((k2 / k - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wavevector_increases_with_frequency_over_telecom_band() {
        let m = DispersionModel::congruent_lithium_niobate();
        let mut last = 0.0;
        for i in 0..=200 {
            let f = OpticalFrequency::from_thz(185.0 + 0.1 * f64::from(i)).unwrap();
            let k = m.wavevector(f, 122.5, ModeRole::Signal).unwrap();
            assert!(k > last);
            last = k;
        }
    }

    #[test]
    fn identities_hold_for_every_set() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry();
        for poling in [Poling::Auto, Poling::PeriodUm(18.3), Poling::PeriodUm(-7.0)] {
            let mm = phase_mismatches(&g.with_poling(poling), &m).unwrap();
            assert_eq!(mm.k_avg, (mm.dk_dfg + mm.dk_sfg) / 2.0);
            // Rounding is set by the ~1.8e7 rad/m wavevectors, not by δK.
            assert!((mm.delta_k - (mm.dk_dfg - mm.dk_sfg)).abs() < 1e-7);
        }
    }

    #[test]
    fn degenerate_geometry_has_zero_delta_k() {
        let m = DispersionModel::congruent_lithium_niobate();
        let f = ch(50);
        let g = ConversionGeometry::from_pump1(f, f, nm(1550.0).frequency(), 100.0, Poling::Auto).unwrap();
        assert_eq!(phase_mismatches(&g, &m).unwrap().delta_k, 0.0);
    }

    #[test]
    fn mirroring_negates_delta_k_and_keeps_k() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry().with_poling(Poling::PeriodUm(18.4));
        let a = phase_mismatches(&g, &m).unwrap();
        let b = phase_mismatches(&g.mirrored(), &m).unwrap();
        assert_eq!(a.delta_k, -b.delta_k);
        assert!((a.k_avg - b.k_avg).abs() < 1e-9 * a.dk_sfg.abs().max(1.0));
    }

    #[test]
    fn broken_energy_conservation_is_rejected() {
        let m = DispersionModel::congruent_lithium_niobate();
        let mut g = reference_geometry();
        g.pump2 = g.pump2.offset(crate::grid::FrequencyShift::from_ghz(1.0)).unwrap();
        assert!(matches!(phase_mismatches(&g, &m), Err(Error::Consistency(_))));
    }

    #[test]
    fn optimal_period_cancels_average_mismatch() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry();
        let p = optimal_poling_period(&g, &m).unwrap().period_um().unwrap();
        let mm = phase_mismatches(&g.with_poling(Poling::PeriodUm(p)), &m).unwrap();
        assert!((mm.k_avg * 0.038).abs() < 1e-9, "{}", mm.k_avg);
    }

    #[test]
    fn shg_period_matches_textbook_formula() {
        let m = DispersionModel::congruent_lithium_niobate();
        let f = ch(50);
        let g = ConversionGeometry {
            signal: f,
            target: f,
            pump1: f,
            pump2: f,
            temperature_c: 122.5,
            poling: Poling::Auto,
        };
        let p = optimal_poling_period(&g, &m).unwrap().period_um().unwrap();
        // Λ = λ / (2 (n_2ω − n_ω)), 30-digit oracle value.
        assert!((p - 18.284_288_935_397_33).abs() < 1e-8, "{p}");
    }

    #[test]
    fn period_slope_matches_finite_difference() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry();
        let h = 0.01;
        let at = |t: f64| {
            optimal_poling_period(&g.with_temperature(t), &m)
                .unwrap()
                .period_um()
                .unwrap()
        };
        let fd = (at(122.5 + h) - at(122.5 - h)) / (2.0 * h);
        let an = poling_period_temperature_slope(&g, &m).unwrap();
        assert!(((fd - an) / an).abs() < 0.01, "{fd} vs {an}");
    }

    #[test]
    fn temperature_round_trip() {
        let m = DispersionModel::congruent_lithium_niobate();
        for t0 in [45.0, 122.5, 170.0] {
            let g = reference_geometry().with_temperature(t0);
            let p = optimal_poling_period(&g, &m).unwrap().period_um().unwrap();
            let t = phase_matching_temperature(&g, &m, p, TemperatureSearch::default()).unwrap();
            assert!((t - t0).abs() < 0.01, "{t} vs {t0}");
            let k = phase_mismatches(&g.with_temperature(t).with_poling(Poling::PeriodUm(p)), &m)
                .unwrap()
                .k_avg;
            assert!(k.abs() < 1e-3);
        }
    }

    #[test]
    fn no_sign_change_is_reported() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry();
        let err = phase_matching_temperature(&g, &m, 5.0, TemperatureSearch::default());
        assert!(matches!(err, Err(Error::NoPhaseMatch { .. })));
    }

    #[test]
    fn period_perturbation_moves_temperature_monotonically() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry();
        let p = optimal_poling_period(&g, &m).unwrap().period_um().unwrap();
        let search = TemperatureSearch::default();
        let temps: Vec<f64> = [0.0, 0.0005, 0.001]
            .iter()
            .map(|r| phase_matching_temperature(&g, &m, p * (1.0 + r), search).unwrap())
            .collect();
        // Oracle: coarse scan for the sign change of K(T) at +0.1 %.
        let pp = p * 1.001;
        let k = |t: f64| {
            phase_mismatches(&g.with_temperature(t).with_poling(Poling::PeriodUm(pp)), &m)
                .unwrap()
                .k_avg
        };
        let crossing = (0..1800)
            .map(|i| 20.0 + 0.1 * f64::from(i))
            .find(|&t| k(t).signum() != k(t + 0.1).signum())
            .unwrap();
        assert!(temps[2] >= crossing && temps[2] <= crossing + 0.1);
        let increasing = temps[0] < temps[1] && temps[1] < temps[2];
        let decreasing = temps[0] > temps[1] && temps[1] > temps[2];
        assert!(increasing || decreasing, "{temps:?}");
    }

    #[test]
    fn calibration_hits_requested_delta_k() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry();
        let wanted = 1.452_316_316_472_742 / 0.038;
        let cal = calibrate_offsets(&g, &m, wanted, 122.5).unwrap();
        let model = m.with_offsets(cal.offsets);
        let mm = phase_mismatches(&g.with_poling(Poling::PeriodUm(cal.poling_period_um)), &model).unwrap();
        assert!((mm.delta_k.abs() - wanted).abs() < 1e-6);
        assert!(mm.delta_k < 0.0, "bulk sign is preserved");
        let t = phase_matching_temperature(&g, &model, cal.poling_period_um, TemperatureSearch::default()).unwrap();
        assert!((t - 122.5).abs() < 0.1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn delta_k_ignores_poling(period in prop_oneof![5.0f64..40.0, -40.0f64..-5.0]) {
                let m = DispersionModel::congruent_lithium_niobate();
                let g = reference_geometry();
                let free = phase_mismatches(&g, &m).unwrap();
                let poled = phase_mismatches(&g.with_poling(Poling::PeriodUm(period)), &m).unwrap();
                prop_assert_eq!(free.delta_k, poled.delta_k);
            }
        }
    }

    #[test]
    fn delta_k_grows_with_shift() {
        let m = DispersionModel::congruent_lithium_niobate();
        let centre = ch(50).ghz();
        let pump_mid = nm(1551.9).frequency().ghz();
        let mags: Vec<f64> = [0.0, 100.0, 200.0, 400.0]
            .iter()
            .map(|s| {
                let f = |g: f64| OpticalFrequency::from_ghz(g).unwrap();
                let g = ConversionGeometry {
                    signal: f(centre - s / 2.0),
                    target: f(centre + s / 2.0),
                    pump1: f(pump_mid + s / 2.0),
                    pump2: f(pump_mid - s / 2.0),
                    temperature_c: 122.5,
                    poling: Poling::Auto,
                };
                phase_mismatches(&g, &m).unwrap().delta_k.abs()
            })
            .collect();
        assert_eq!(mags[0], 0.0);
        assert!(mags.windows(2).all(|w| w[1] > w[0]), "{mags:?}");
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let m = DispersionModel::congruent_lithium_niobate();
        let g = reference_geometry();
        let a = phase_mismatches(&g, &m).unwrap();
        let b = phase_mismatches(&g, &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn user_coefficient_file_round_trip() {
        let m = DispersionModel::congruent_lithium_niobate();
        let text = toml::to_string(&m).unwrap();
        assert_eq!(DispersionModel::from_toml_str(&text).unwrap(), m);
        let missing = DispersionModel::load("/definitely/not/here.toml");
        assert!(matches!(missing, Err(Error::Io { .. })));
    }
    #[test]
    fn spurious_mismatches_of_degenerate_pumps_match_wanted_process() {
        // With f_P1 = f_P2 the wrong-pump processes coincide with the wanted ones.
        let m = DispersionModel::congruent_lithium_niobate();
        let g = ConversionGeometry::from_pump1(ch(48), ch(48), nm(1550.28).frequency(), 122.5, Poling::Auto).unwrap();
        let sp = spurious_mismatches(&g, &m).unwrap();
        let mm = phase_mismatches(&g, &m).unwrap();
        assert!((sp.signal_pump2 - (mm.dk_sfg - mm.k_avg)).abs() < 1e-6);
        assert!((sp.target_pump1 - (mm.dk_dfg - mm.k_avg)).abs() < 1e-6);
    }

    #[test]
    fn spurious_mismatches_are_large_for_reference_geometry() {
        let m = DispersionModel::congruent_lithium_niobate();
        let sp = spurious_mismatches(&reference_geometry(), &m).unwrap();
        assert!(sp.signal_pump2.abs() * 0.038 > 10.0, "{sp:?}");
        assert!(sp.target_pump1.abs() * 0.038 > 10.0, "{sp:?}");
    }
}
