//! Linear coupled-mode propagation of the cascaded SFG/DFG process.
//!
//! With classical undepleted pumps the signal, sum-frequency and target
//! annihilation operators obey a linear system, so single-photon conversion
//! probabilities are the squared moduli of c-number transfer amplitudes:
//!
//! ```text
//! d/dz (a_s, a_SFG, a_t)ᵀ = i·G·(a_s, a_SFG, a_t)ᵀ
//!
//!     ⎡ −δK/2    g₁*    0    ⎤
//! G = ⎢  g₁       K     g₂   ⎥ ,   gⱼ = 𝒳ⱼ·Eⱼ,  |Eⱼ|² = pump j power in W
//!     ⎣  0        g₂*   δK/2 ⎦
//! ```
//!
//! Uniform propagation loss adds `+iα/2` to every diagonal entry so that
//! each field decays as `exp(−αz/2)` (power as `exp(−αz)`).
//!
//! The five-mode extension adds the wrong-pump channels: the signal summing
//! with pump 2 and the target summing with pump 1.
//!
//! Two independent propagation paths are provided: an exact transfer matrix
//! from the eigendecomposition of `G` ([`propagate_analytic`]) and adaptive
//! Runge–Kutta integration ([`propagate_numeric`]). For balanced pumps and
//! `K = 0` the closed form
//!
//! ```text
//! η = 16Q² / (δK² + 4Q)² · sin⁴(L/4 · √(δK² + 4Q)),   Q = 2𝒳₁²|E₁|²
//! ```
//!
//! is available as [`conversion_efficiency`].

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::PhaseMismatchSet;
use crate::error::{Error, Result};
use crate::ode::{integrate_linear, Tolerance};
use crate::propagator::Propagator;

/// Default relative pump-balance tolerance for the closed form.
pub const DEFAULT_BALANCE_TOLERANCE: f64 = 0.002;

pub const SIGNAL: usize = 0;
pub const SFG: usize = 1;
pub const TARGET: usize = 2;
pub const SPURIOUS_SIGNAL_PUMP2: usize = 3;
pub const SPURIOUS_TARGET_PUMP1: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// 𝒳₁ in (rad/m)/√W.
    pub chi1: f64,
    /// 𝒳₂ in (rad/m)/√W.
    pub chi2: f64,
    /// Coupled pump 1 power, W.
    pub p1_w: f64,
    /// Coupled pump 2 power, W.
    pub p2_w: f64,
    #[serde(default)]
    pub pump1_phase_rad: f64,
    #[serde(default)]
    pub pump2_phase_rad: f64,
    pub length_m: f64,
    /// Power attenuation coefficient, 1/m.
    #[serde(default)]
    pub loss_alpha: f64,
}

impl CouplingConfig {
    /// Equal couplings and an even power split.
    pub fn balanced(chi: f64, total_power_w: f64, length_m: f64) -> Self {
        Self {
            chi1: chi,
            chi2: chi,
            p1_w: total_power_w / 2.0,
            p2_w: total_power_w / 2.0,
            pump1_phase_rad: 0.0,
            pump2_phase_rad: 0.0,
            length_m,
            loss_alpha: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("chi1", self.chi1),
            ("chi2", self.chi2),
            ("p1", self.p1_w),
            ("p2", self.p2_w),
            ("length", self.length_m),
            ("loss_alpha", self.loss_alpha),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn total_power_w(&self) -> f64 {
        self.p1_w + self.p2_w
    }

    /// `𝒳₁·E₁`.
    pub fn pump1_coupling(&self) -> Complex64 {
        Complex64::from_polar(self.chi1 * self.p1_w.sqrt(), self.pump1_phase_rad)
    }

    /// `𝒳₂·E₂`.
    pub fn pump2_coupling(&self) -> Complex64 {
        Complex64::from_polar(self.chi2 * self.p2_w.sqrt(), self.pump2_phase_rad)
    }

    /// `Q = 2𝒳₁²|E₁|²` in rad²/m².
    pub fn coupling_rate(&self) -> f64 {
        2.0 * self.chi1 * self.chi1 * self.p1_w
    }

    /// Relative mismatch of `𝒳₁²|E₁|²` and `𝒳₂²|E₂|²`.
    pub fn balance_mismatch(&self) -> f64 {
        let a = self.chi1 * self.chi1 * self.p1_w;
        let b = self.chi2 * self.chi2 * self.p2_w;
        let scale = a.max(b);
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    }

    pub fn is_balanced(&self, tolerance: f64) -> bool {
        self.balance_mismatch() <= tolerance
    }

    /// Both pump phases advanced by `phase`.
    pub fn with_global_phase(mut self, phase: f64) -> Self {
        self.pump1_phase_rad += phase;
        self.pump2_phase_rad += phase;
        self
    }
}

/// Modal amplitudes at position `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationState {
    pub z: f64,
    pub amplitudes: Vec<Complex64>,
}

impl PropagationState {
    /// One photon in the signal mode at `z = 0`.
    pub fn signal_photon(modes: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); modes];
        amplitudes[SIGNAL] = Complex64::new(1.0, 0.0);
        Self { z: 0.0, amplitudes }
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn target_population(&self) -> f64 {
        self.amplitudes[TARGET].norm_sqr()
    }

    fn to_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amplitudes)
    }
}

/// Wrong-pump channels of the five-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpuriousCoupling {
    /// Coupling of the signal to the `ω_s + ω_P2` mode, (rad/m)/√W.
    pub chi_signal_pump2: f64,
    /// Coupling of the target to the `ω_t + ω_P1` mode, (rad/m)/√W.
    pub chi_target_pump1: f64,
    /// Mismatch of the `s + P2` process, rad/m.
    pub dk_signal_pump2: f64,
    /// Mismatch of the `t + P1` process, rad/m.
    pub dk_target_pump1: f64,
}

impl SpuriousCoupling {
    /// Wrong-pump processes with the same coupling strengths as the wanted
    /// ones.
    pub fn matching(cfg: &CouplingConfig, dk_signal_pump2: f64, dk_target_pump1: f64) -> Self {
        Self {
            chi_signal_pump2: cfg.chi2,
            chi_target_pump1: cfg.chi1,
            dk_signal_pump2,
            dk_target_pump1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub eta: f64,
    /// Value of η on the resonance branch that is admissible for this δK·L.
    pub eta_max: f64,
    /// `L/4·√(δK² + 4Q)`; conversion peaks where this equals `π/2 + mπ`.
    pub resonance_length_condition: f64,
    pub eta_max_branch: u32,
}

/// Generator of the three-mode system.
pub fn build_generator(cfg: &CouplingConfig, mm: &PhaseMismatchSet) -> DMatrix<Complex64> {
    CoupledModes::three(*cfg, *mm).generator()
}

/// Generator of the five-mode system (order: s, SFG, t, s+P2, t+P1).
pub fn build_extended_generator(
    cfg: &CouplingConfig,
    mm: &PhaseMismatchSet,
    spurious: &SpuriousCoupling,
) -> DMatrix<Complex64> {
    CoupledModes::five(*cfg, *mm, *spurious).generator()
}

/// A coupled-mode system ready for propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledModes {
    pub config: CouplingConfig,
    pub mismatch: PhaseMismatchSet,
    pub spurious: Option<SpuriousCoupling>,
}

impl CoupledModes {
    pub fn three(config: CouplingConfig, mismatch: PhaseMismatchSet) -> Self {
        Self {
            config,
            mismatch,
            spurious: None,
        }
    }

    pub fn five(config: CouplingConfig, mismatch: PhaseMismatchSet, spurious: SpuriousCoupling) -> Self {
        Self {
            config,
            mismatch,
            spurious: Some(spurious),
        }
    }

    pub fn modes(&self) -> usize {
        if self.spurious.is_some() {
            5
        } else {
            3
        }
    }

    pub fn generator(&self) -> DMatrix<Complex64> {
        let cfg = &self.config;
        let n = self.modes();
        let half_delta = self.mismatch.delta_k / 2.0;
        let g1 = cfg.pump1_coupling();
        let g2 = cfg.pump2_coupling();
        let loss = Complex64::new(0.0, cfg.loss_alpha / 2.0);

        let mut g = DMatrix::<Complex64>::zeros(n, n);
        g[(SIGNAL, SIGNAL)] = Complex64::new(-half_delta, 0.0);
        g[(SFG, SFG)] = Complex64::new(self.mismatch.k_avg, 0.0);
        g[(TARGET, TARGET)] = Complex64::new(half_delta, 0.0);
        g[(SIGNAL, SFG)] = g1.conj();
        g[(SFG, SIGNAL)] = g1;
        g[(SFG, TARGET)] = g2;
        g[(TARGET, SFG)] = g2.conj();

        if let Some(sp) = &self.spurious {
            // Signal summing with the wrong pump (2), target with pump 1.
            let h1 = Complex64::from_polar(sp.chi_signal_pump2 * cfg.p2_w.sqrt(), cfg.pump2_phase_rad);
            let h2 = Complex64::from_polar(sp.chi_target_pump1 * cfg.p1_w.sqrt(), cfg.pump1_phase_rad);
            g[(SPURIOUS_SIGNAL_PUMP2, SPURIOUS_SIGNAL_PUMP2)] = Complex64::new(-half_delta + sp.dk_signal_pump2, 0.0);
            g[(SPURIOUS_TARGET_PUMP1, SPURIOUS_TARGET_PUMP1)] = Complex64::new(half_delta + sp.dk_target_pump1, 0.0);
            g[(SIGNAL, SPURIOUS_SIGNAL_PUMP2)] = h1.conj();
            g[(SPURIOUS_SIGNAL_PUMP2, SIGNAL)] = h1;
            g[(TARGET, SPURIOUS_TARGET_PUMP1)] = h2.conj();
            g[(SPURIOUS_TARGET_PUMP1, TARGET)] = h2;
        }

        for i in 0..n {
            g[(i, i)] += loss;
        }
        g
    }

    fn check(&self, input: &PropagationState, z: f64) -> Result<()> {
        self.config.validate()?;
        if input.amplitudes.len() != self.modes() {
            return Err(Error::Input(format!(
                "expected {} amplitudes, got {}",
                self.modes(),
                input.amplitudes.len()
            )));
        }
        let end = input.z + z;
        let slack = 1e-12 * self.config.length_m.max(f64::MIN_POSITIVE);
        if !(z >= 0.0 && end <= self.config.length_m + slack) {
            return Err(Error::Input(format!(
                "propagation to z = {end} m leaves the waveguide [0, {}] m",
                self.config.length_m
            )));
        }
        Ok(())
    }

    /// Advances `input` by `z` with the exact transfer matrix.
    pub fn propagate_analytic(&self, input: &PropagationState, z: f64) -> Result<PropagationState> {
        self.check(input, z)?;
        if z == 0.0 {
            return Ok(input.clone());
        }
        let u = Propagator::new(self.generator()).transfer(z);
        let out = u * input.to_vector();
        Ok(PropagationState {
            z: input.z + z,
            amplitudes: out.iter().copied().collect(),
        })
    }

    /// Advances `input` by `z` with adaptive Dormand–Prince integration.
    pub fn propagate_numeric(&self, input: &PropagationState, z: f64, tol: f64) -> Result<PropagationState> {
        self.check(input, z)?;
        if !(tol > 0.0) {
            return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
        }
        let m = self.generator() * Complex64::new(0.0, 1.0);
        let (y, _) = integrate_linear(&m, &input.to_vector(), 0.0, z, Tolerance::uniform(tol))?;
        Ok(PropagationState {
            z: input.z + z,
            amplitudes: y.iter().copied().collect(),
        })
    }

    /// States at `points` evenly spaced positions from 0 to L inclusive.
    pub fn trajectory(&self, input: &PropagationState, points: usize) -> Result<Vec<PropagationState>> {
        self.check(input, 0.0)?;
        let points = points.max(2);
        let propagator = Propagator::new(self.generator());
        let v = input.to_vector();
        Ok((0..points)
            .map(|i| {
                let z = self.config.length_m * i as f64 / (points - 1) as f64;
                let out = propagator.transfer(z) * &v;
                PropagationState {
                    z,
                    amplitudes: out.iter().copied().collect(),
                }
            })
            .collect())
    }
}

pub fn propagate_analytic(
    cfg: &CouplingConfig,
    mm: &PhaseMismatchSet,
    input: &PropagationState,
    z: f64,
) -> Result<PropagationState> {
    CoupledModes::three(*cfg, *mm).propagate_analytic(input, z)
}

pub fn propagate_numeric(
    cfg: &CouplingConfig,
    mm: &PhaseMismatchSet,
    input: &PropagationState,
    z: f64,
    tol: f64,
) -> Result<PropagationState> {
    CoupledModes::three(*cfg, *mm).propagate_numeric(input, z, tol)
}

pub fn propagate_extended(
    cfg: &CouplingConfig,
    mm: &PhaseMismatchSet,
    spurious: &SpuriousCoupling,
    input: &PropagationState,
    z: f64,
) -> Result<PropagationState> {
    CoupledModes::five(*cfg, *mm, *spurious).propagate_analytic(input, z)
}

/// Closed-form efficiency for coupling rate `q`, mismatch difference
/// `delta_k` and length `length_m`, lossless, `K = 0`, balanced pumps.
pub fn closed_form_efficiency(q: f64, delta_k: f64, length_m: f64) -> f64 {
    let s = delta_k * delta_k + 4.0 * q;
    if s == 0.0 {
        return 0.0;
    }
    let amplitude = 4.0 * q / s;
    let sine = (length_m / 4.0 * s.sqrt()).sin();
    amplitude * amplitude * sine.powi(4)
}

/// Peak efficiency on resonance branch `m`:
/// `(1 − δK²L² / (4π²(1+2m)²))²`.
pub fn max_efficiency_branch(delta_k: f64, length_m: f64, m: u32) -> Result<f64> {
    let delta_k_l = delta_k * length_m;
    let bound = TAU * f64::from(1 + 2 * m);
    if delta_k_l.abs() > bound {
        return Err(Error::OutOfRegime { delta_k_l, m });
    }
    let r = delta_k_l / bound;
    Ok((1.0 - r * r).powi(2))
}

/// Peak efficiency on the `m = 0` branch.
pub fn max_efficiency(delta_k: f64, length_m: f64) -> Result<f64> {
    max_efficiency_branch(delta_k, length_m, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxEfficiency {
    pub eta: f64,
    pub m: u32,
    /// Set when the `m = 0` branch was inadmissible.
    pub fallback: bool,
}

/// Peak efficiency on the smallest admissible branch.
pub fn max_efficiency_admissible(delta_k: f64, length_m: f64) -> MaxEfficiency {
    let ratio = (delta_k * length_m).abs() / TAU;
    let m = if ratio <= 1.0 {
        0
    } else {
        ((ratio - 1.0) / 2.0).ceil() as u32
    };
    let eta = max_efficiency_branch(delta_k, length_m, m).unwrap_or(0.0);
    MaxEfficiency {
        eta,
        m,
        fallback: m > 0,
    }
}

/// Closed-form efficiency with the default balance tolerance.
///
/// The average mismatch `K` is assumed compensated and is not read; use
/// [`propagate_analytic`] when it is not. Uniform loss enters as the exact
/// factor `exp(−αL)`.
pub fn conversion_efficiency(cfg: &CouplingConfig, mm: &PhaseMismatchSet) -> Result<EfficiencyResult> {
    conversion_efficiency_with_tolerance(cfg, mm, DEFAULT_BALANCE_TOLERANCE)
}

pub fn conversion_efficiency_with_tolerance(
    cfg: &CouplingConfig,
    mm: &PhaseMismatchSet,
    balance_tolerance: f64,
) -> Result<EfficiencyResult> {
    cfg.validate()?;
    let relative = cfg.balance_mismatch();
    if relative > balance_tolerance {
        return Err(Error::Unbalanced {
            relative,
            tolerance: balance_tolerance,
        });
    }
    let q = cfg.coupling_rate();
    let l = cfg.length_m;
    let transmission = (-cfg.loss_alpha * l).exp();
    let peak = max_efficiency_admissible(mm.delta_k, l);
    Ok(EfficiencyResult {
        eta: closed_form_efficiency(q, mm.delta_k, l) * transmission,
        eta_max: peak.eta * transmission,
        resonance_length_condition: l / 4.0 * (mm.delta_k * mm.delta_k + 4.0 * q).sqrt(),
        eta_max_branch: peak.m,
    })
}

/// Coupling rate that puts `L/4·√(δK² + 4Q)` on branch `m`.
pub fn resonant_coupling_rate(delta_k: f64, length_m: f64, m: u32) -> Result<f64> {
    let target = PI * f64::from(1 + 2 * m) * 2.0 / length_m;
    let q = (target * target - delta_k * delta_k) / 4.0;
    if q < 0.0 {
        return Err(Error::OutOfRegime {
            delta_k_l: delta_k * length_m,
            m,
        });
    }
    Ok(q)
}
