//! Run configuration. Every physical quantity carries its unit in the key.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qfc_core::dispersion::IndexOffsets;
use qfc_core::experiments::hom::symmetric_delay_grid;
use qfc_core::experiments::{EfficiencyOptions, HomConfig, NoiseSpectrum, SpectrumAxis};
use qfc_core::grid::channel_to_frequency;
use qfc_core::{
    CalibrationTargets, ConversionGeometry, DispersionModel, Poling, PumpConstraints, WavelengthVacuum, WdmChannel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub dispersion: DispersionConfig,
    pub calibration: CalibrationTargets,
    pub sweep: SweepConfig,
    pub plan: PlanConfig,
    pub pump_search: PumpConstraints,
    pub noise: NoiseConfig,
    pub hom: HomSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            geometry: GeometryConfig::default(),
            dispersion: DispersionConfig::default(),
            calibration: CalibrationTargets::new(0.038, 1.2, 0.896),
            sweep: SweepConfig::default(),
            plan: PlanConfig::default(),
            pump_search: PumpConstraints::default(),
            noise: NoiseConfig::default(),
            hom: HomSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub signal_channel: i32,
    pub target_channel: i32,
    pub pump1_nm: f64,
    pub temperature_c: f64,
    /// Omitted: the period that phase-matches the geometry.
    pub poling_period_um: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            signal_channel: 48,
            target_channel: 52,
            pump1_nm: 1550.28,
            temperature_c: 122.5,
            poling_period_um: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionConfig {
    /// Sellmeier coefficient file; the bundled lithium niobate set if absent.
    pub coefficients_file: Option<PathBuf>,
    /// Fit the target-mode offset to the calibrated δK at run time
    /// (overrides `offsets.target`).
    pub calibrate: bool,
    pub offsets: IndexOffsets,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self {
            coefficients_file: None,
            calibrate: true,
            offsets: IndexOffsets::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub min_w: f64,
    pub max_w: f64,
    pub points: usize,
    pub include_loss: bool,
    pub loss_db_per_cm: f64,
    pub include_wrong_pump: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            min_w: 0.0,
            max_w: 2.0,
            points: 201,
            include_loss: false,
            loss_db_per_cm: 0.1,
            include_wrong_pump: false,
        }
    }
}

impl SweepConfig {
    pub fn options(&self) -> EfficiencyOptions {
        EfficiencyOptions {
            include_loss: self.include_loss,
            loss_db_per_cm: self.loss_db_per_cm,
            include_wrong_pump: self.include_wrong_pump,
            spurious: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub requested_eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Two-column pump-noise table; the shipped illustrative table if absent.
    pub spectrum_file: Option<PathBuf>,
    pub spectrum_axis: SpectrumAxis,
    pub spectrum_reference_power_w: f64,
    /// Two-column table of (total pump power W, counts/s) for `noise-fit`.
    pub samples_file: Option<PathBuf>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            spectrum_file: None,
            spectrum_axis: SpectrumAxis::Nm,
            spectrum_reference_power_w: qfc_core::experiments::noise::DEFAULT_REFERENCE_POWER_W,
            samples_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomSection {
    pub splitter_ratio: (f64, f64),
    pub spectral_overlap: f64,
    pub interference_visibility: Option<f64>,
    pub filter_fwhm_ghz: f64,
    pub signal_pair_rate_per_s: f64,
    /// Accidental floor in coincidences/s; `noise_ratio` takes precedence.
    pub noise_floor_per_s: f64,
    /// `N / C_far`, sets the floor relative to the pair rate.
    pub noise_ratio: Option<f64>,
    pub delay_half_span_ps: f64,
    pub delay_points: usize,
    pub monte_carlo: MonteCarloSection,
}

impl Default for HomSection {
    fn default() -> Self {
        Self {
            splitter_ratio: (0.493, 0.507),
            spectral_overlap: 0.96,
            interference_visibility: Some(0.845),
            filter_fwhm_ghz: 28.6,
            signal_pair_rate_per_s: 2.0,
            noise_floor_per_s: 0.0,
            noise_ratio: Some(0.4166),
            delay_half_span_ps: 100.0,
            delay_points: 41,
            monte_carlo: MonteCarloSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub enabled: bool,
    pub trials: usize,
    pub integration_s: f64,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            enabled: false,
            trials: 100,
            integration_s: 600.0,
        }
    }
}

impl HomSection {
    pub fn to_config(&self) -> Result<HomConfig> {
        let cfg = HomConfig {
            splitter_ratio: self.splitter_ratio,
            spectral_overlap: self.spectral_overlap,
            interference_visibility: self.interference_visibility,
            filter_fwhm_ghz: self.filter_fwhm_ghz,
            signal_pair_rate: self.signal_pair_rate_per_s,
            noise_floor: self.noise_floor_per_s,
            delay_grid_ps: symmetric_delay_grid(self.delay_half_span_ps, self.delay_points),
        };
        let cfg = match self.noise_ratio {
            Some(r) => cfg.with_noise_ratio(r)?,
            None => cfg,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn absolutize(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; relative file references are resolved against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path
            .parent()
            .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
            .unwrap_or(Path::new("."));
        let base = std::fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
        absolutize(&base, &mut cfg.dispersion.coefficients_file);
        absolutize(&base, &mut cfg.noise.spectrum_file);
        absolutize(&base, &mut cfg.noise.samples_file);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Unit and range checks that do not need file access.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.pump1_nm.is_finite() && g.pump1_nm > 0.0) {
            bail!("geometry.pump1_nm = {} must be a positive wavelength in nm", g.pump1_nm);
        }
        if !g.temperature_c.is_finite() || g.temperature_c <= -273.15 {
            bail!(
                "geometry.temperature_c = {} is not a valid temperature",
                g.temperature_c
            );
        }
        if let Some(p) = g.poling_period_um {
            if !(p.is_finite() && p != 0.0) {
                bail!("geometry.poling_period_um = {p} is invalid");
            }
        }
        let s = &self.sweep;
        if !(s.min_w >= 0.0 && s.max_w >= s.min_w && s.max_w.is_finite()) {
            bail!("sweep range {}..{} W is invalid", s.min_w, s.max_w);
        }
        if s.points == 0 {
            bail!("sweep.points must be at least 1");
        }
        if !(self.noise.spectrum_reference_power_w > 0.0) {
            bail!("noise.spectrum_reference_power_w must be positive");
        }
        Ok(())
    }

    pub fn dispersion_model(&self) -> Result<DispersionModel> {
        let model = match &self.dispersion.coefficients_file {
            Some(path) => DispersionModel::load(path)?,
            None => DispersionModel::congruent_lithium_niobate(),
        };
        Ok(model.with_offsets(self.dispersion.offsets))
    }

    pub fn geometry(&self) -> Result<ConversionGeometry> {
        let g = &self.geometry;
        let poling = g.poling_period_um.map_or(Poling::Auto, Poling::PeriodUm);
        Ok(ConversionGeometry::from_pump1(
            channel_to_frequency(WdmChannel(g.signal_channel))?,
            channel_to_frequency(WdmChannel(g.target_channel))?,
            WavelengthVacuum::from_nm(g.pump1_nm)?.frequency(),
            g.temperature_c,
            poling,
        )?)
    }

    pub fn noise_spectrum(&self) -> Result<NoiseSpectrum> {
        let spectrum = match &self.noise.spectrum_file {
            Some(path) => NoiseSpectrum::load(path, self.noise.spectrum_axis)?,
            None => NoiseSpectrum::illustrative(),
        };
        Ok(spectrum.with_reference_power(self.noise.spectrum_reference_power_w)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[geometry]\npump1 = 1550.0\n").is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::parse("seed = 7\n[sweep]\npoints = 11\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sweep.points, 11);
        assert_eq!(cfg.sweep.max_w, 2.0);
    }
}
