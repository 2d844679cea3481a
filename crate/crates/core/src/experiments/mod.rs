//! Desk-scale reproductions of the measured artifacts: efficiency versus
//! pump power, the pump-noise model and the HOM coincidence scan.

pub mod efficiency;
pub mod hom;
pub mod noise;

pub use efficiency::{
    alpha_from_db_per_cm, curve_peak, efficiency_curve, power_sweep, EfficiencyOptions, EfficiencyPoint,
};
pub use hom::{
    car, extract_visibility, monte_carlo_visibility, simulate_hom_scan, spectral_overlap, HomConfig, HomScan,
    MonteCarlo, VisibilityReport,
};
pub use noise::{fit_noise_linear, NoiseModel, NoiseSpectrum, SpectrumAxis};
