//! Conversion efficiency versus total pump power.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled_mode::{conversion_efficiency, CoupledModes, PropagationState, SpuriousCoupling};
use crate::dispersion::SpuriousMismatches;
use crate::error::{Error, Result};
use crate::planner::Calibration;

/// Power attenuation coefficient (1/m) for a loss in dB/cm.
pub fn alpha_from_db_per_cm(db_per_cm: f64) -> f64 {
    db_per_cm * 100.0 * std::f64::consts::LN_10 / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfficiencyOptions {
    pub include_loss: bool,
    pub loss_db_per_cm: f64,
    pub include_wrong_pump: bool,
    /// Required when `include_wrong_pump` is set.
    pub spurious: Option<SpuriousMismatches>,
}

impl Default for EfficiencyOptions {
    fn default() -> Self {
        Self {
            include_loss: false,
            loss_db_per_cm: 0.1,
            include_wrong_pump: false,
            spurious: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub total_power_w: f64,
    pub eta: f64,
}

/// `points` evenly spaced powers from `min_w` to `max_w` inclusive.
pub fn power_sweep(min_w: f64, max_w: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min_w],
        n => (0..n)
            .map(|i| min_w + (max_w - min_w) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Row with the largest η (first one on ties).
pub fn curve_peak(curve: &[EfficiencyPoint]) -> Option<EfficiencyPoint> {
    curve
        .iter()
        .copied()
        .reduce(|best, p| if p.eta > best.eta { p } else { best })
}

/// η at each balanced total power. With both flags off this is the closed
/// form; either flag switches to exact propagation of the three- or
/// five-mode system.
pub fn efficiency_curve(cal: &Calibration, powers: &[f64], opts: &EfficiencyOptions) -> Result<Vec<EfficiencyPoint>> {
    if let Some(&p) = powers.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Input(format!("pump power {p} W is invalid")));
    }
    let spurious = match (opts.include_wrong_pump, opts.spurious) {
        (true, None) => {
            return Err(Error::Input(
                "wrong-pump model requested without spurious mismatches".into(),
            ))
        }
        (true, sp) => sp,
        (false, _) => None,
    };
    let alpha = if opts.include_loss {
        alpha_from_db_per_cm(opts.loss_db_per_cm)
    } else {
        0.0
    };
    let mismatch = cal.mismatch();
    let length = cal.length_m();

    powers
        .par_iter()
        .map(|&total_power_w| {
            let mut cfg = cal.coupling_config(total_power_w);
            let eta = if !opts.include_loss && spurious.is_none() {
                conversion_efficiency(&cfg, &mismatch)?.eta
            } else {
                cfg.loss_alpha = alpha;
                let modes = match spurious {
                    Some(sp) => CoupledModes::five(
                        cfg,
                        mismatch,
                        SpuriousCoupling::matching(&cfg, sp.signal_pump2, sp.target_pump1),
                    ),
                    None => CoupledModes::three(cfg, mismatch),
                };
                modes
                    .propagate_analytic(&PropagationState::signal_photon(modes.modes()), length)?
                    .target_population()
            };
            Ok(EfficiencyPoint { total_power_w, eta })
        })
        .collect()
}
