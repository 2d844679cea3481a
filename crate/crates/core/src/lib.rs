pub mod coupled_mode;
pub mod dispersion;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod ode;
pub mod planner;
pub mod propagator;

pub use coupled_mode::{
    conversion_efficiency, propagate_analytic, propagate_extended, propagate_numeric, CouplingConfig, EfficiencyResult,
    PropagationState, SpuriousCoupling,
};
pub use dispersion::{
    phase_mismatches, spurious_mismatches, ConversionGeometry, DispersionModel, PhaseMismatchSet, Poling,
};
pub use error::{Error, Result};
pub use experiments::{HomConfig, HomScan, NoiseModel, NoiseSpectrum};
pub use grid::{FrequencyShift, OpticalFrequency, WavelengthVacuum, WdmChannel};
pub use planner::{
    calibrate, choose_pumps, power_for_max_conversion, Calibration, CalibrationTargets, ConversionPlan, PumpConstraints,
};
