//! Hong-Ou-Mandel coincidence scans and visibility extraction.
//!
//! The coincidence rate against relative delay `τ` is modelled as
//!
//! ```text
//! C(τ) = N + C₀·[1 − V_int·exp(−τ²/(2σ_τ²))],   V_int = 2RT/(R² + T²)·M
//! ```
//!
//! with `R`, `T` the splitter's intensity fractions, `M` the spectral
//! overlap, `C₀` the pair rate away from the dip and `N` a constant
//! accidental floor.
//!
//! Dip width. Both photons pass filters with a Gaussian intensity
//! transmission of FWHM `Δf`, i.e. standard deviation
//! `σ_f = Δf / (2√(2 ln 2))` in frequency. The dip is the Fourier transform
//! of the joint intensity spectrum, `exp(−2π²σ_f²τ²)`, so
//!
//! ```text
//! σ_τ = 1/(2π σ_f) = √(2 ln 2) / (π Δf)
//! ```
//!
//! which is about 13.1 ps for a 28.6 GHz filter.
//!
//! Visibilities follow the far-from-dip convention: `V_raw = (C_far −
//! C_dip)/C_far` and `V_ns = (C_far − C_dip)/(C_far − N)`, so
//! `V_raw = V_ns·(1 − N/C_far)`.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{Dyn, Matrix, Owned, Vector, Vector4, U4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `√(2 ln 2)`, converts between FWHM-style widths and σ.
const SQRT_2LN2: f64 = 1.177_410_022_515_474_6;

/// Gaussian-dip σ_τ in ps for a filter FWHM in GHz.
pub fn dip_sigma_ps(filter_fwhm_ghz: f64) -> f64 {
    SQRT_2LN2 / (std::f64::consts::PI * filter_fwhm_ghz * 1e9) * 1e12
}

/// Interference visibility of the splitter and overlap budget; `r`, `t` are
/// intensity fractions.
pub fn interference_visibility(r: f64, t: f64, overlap: f64) -> f64 {
    if r == 0.0 && t == 0.0 {
        return 0.0;
    }
    2.0 * r * t / (r * r + t * t) * overlap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomConfig {
    /// Intensity splitting fractions, summing to one.
    pub splitter_ratio: (f64, f64),
    /// Spectral overlap `M` of the two photons.
    pub spectral_overlap: f64,
    /// Replaces the `2RT/(R²+T²)·M` budget when set.
    #[serde(default)]
    pub interference_visibility: Option<f64>,
    pub filter_fwhm_ghz: f64,
    /// Coincidences/s away from the dip, excluding the floor.
    pub signal_pair_rate: f64,
    /// Accidental coincidences/s.
    pub noise_floor: f64,
    pub delay_grid_ps: Vec<f64>,
}

impl HomConfig {
    pub fn validate(&self) -> Result<()> {
        let (r, t) = self.splitter_ratio;
        if !(r >= 0.0 && t >= 0.0 && (r + t - 1.0).abs() < 1e-9) {
            return Err(Error::Input(format!(
                "splitter fractions {r} + {t} must be ≥ 0 and sum to 1"
            )));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("spectral overlap", self.spectral_overlap)?;
        if let Some(v) = self.interference_visibility {
            unit("interference visibility", v)?;
        }
        if !(self.filter_fwhm_ghz.is_finite() && self.filter_fwhm_ghz > 0.0) {
            return Err(Error::NonPositive {
                quantity: "filter FWHM",
                value: self.filter_fwhm_ghz,
            });
        }
        for (name, v) in [
            ("signal pair rate", self.signal_pair_rate),
            ("noise floor", self.noise_floor),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input(format!("{name} = {v} must be ≥ 0")));
            }
        }
        if self.delay_grid_ps.is_empty() {
            return Err(Error::Input("delay grid is empty".into()));
        }
        if self.delay_grid_ps.iter().any(|d| !d.is_finite()) {
            return Err(Error::Input("delay grid has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn interference_visibility(&self) -> f64 {
        self.interference_visibility.unwrap_or_else(|| {
            interference_visibility(self.splitter_ratio.0, self.splitter_ratio.1, self.spectral_overlap)
        })
    }

    pub fn sigma_ps(&self) -> f64 {
        dip_sigma_ps(self.filter_fwhm_ghz)
    }

    /// Floor giving `N / (N + C₀) = ratio`.
    pub fn with_noise_ratio(mut self, ratio: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::Input(format!("noise ratio {ratio} outside [0, 1)")));
        }
        self.noise_floor = ratio * self.signal_pair_rate / (1.0 - ratio);
        Ok(self)
    }

    pub fn rate_at(&self, delay_ps: f64) -> f64 {
        let s = self.sigma_ps();
        let v = self.interference_visibility();
        self.noise_floor + self.signal_pair_rate * (1.0 - v * (-delay_ps * delay_ps / (2.0 * s * s)).exp())
    }
}

/// Evenly spaced delays from `-half_span_ps` to `half_span_ps`; an odd
/// `points` puts a sample at zero delay.
pub fn symmetric_delay_grid(half_span_ps: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|i| -half_span_ps + 2.0 * half_span_ps * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomScan {
    pub delays_ps: Vec<f64>,
    /// Coincidences/s at each delay.
    pub coincidences: Vec<f64>,
    pub visibility_raw: f64,
    pub visibility_noise_subtracted: f64,
    pub noise_floor: f64,
    pub c_far: f64,
    pub c_dip: f64,
}

/// Visibilities of a table using its farthest-delay point as `C_far` and its
/// minimum as `C_dip`.
pub fn scan_visibilities(delays_ps: &[f64], coincidences: &[f64], noise_floor: f64) -> (f64, f64, f64, f64) {
    let far = delays_ps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| coincidences[i])
        .unwrap_or(0.0);
    let dip = coincidences.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    (ratio(far - dip, far), ratio(far - dip, far - noise_floor), far, dip)
}

/// Noiseless model scan on the configured grid.
pub fn simulate_hom_scan(cfg: &HomConfig) -> Result<HomScan> {
    cfg.validate()?;
    let delays_ps = cfg.delay_grid_ps.clone();
    let coincidences: Vec<f64> = delays_ps.iter().map(|&d| cfg.rate_at(d)).collect();
    let (visibility_raw, visibility_noise_subtracted, c_far, c_dip) =
        scan_visibilities(&delays_ps, &coincidences, cfg.noise_floor);
    Ok(HomScan {
        delays_ps,
        coincidences,
        visibility_raw,
        visibility_noise_subtracted,
        noise_floor: cfg.noise_floor,
        c_far,
        c_dip,
    })
}

/// Replaces each rate by a Poisson draw over `integration_s` seconds,
/// returned again as a rate.
pub fn sample_counts(scan: &HomScan, integration_s: f64, seed: u64) -> Result<Vec<f64>> {
    if !(integration_s.is_finite() && integration_s > 0.0) {
        return Err(Error::NonPositive {
            quantity: "integration time",
            value: integration_s,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scan.coincidences
        .iter()
        .map(|&rate| {
            let mean = rate * integration_s;
            if mean <= 0.0 {
                return Ok(0.0);
            }
            let dist = Poisson::new(mean).map_err(|e| Error::Input(format!("Poisson mean {mean}: {e}")))?;
            Ok(dist.sample(&mut rng) / integration_s)
        })
        .collect()
}

/// Fitted Gaussian dip `C(τ) = B − A·exp(−(τ − τ₀)²/(2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    pub baseline: f64,
    pub depth: f64,
    pub center_ps: f64,
    pub sigma_ps: f64,
    /// One-standard-error uncertainties in the same order.
    pub baseline_err: f64,
    pub depth_err: f64,
    pub center_err_ps: f64,
    pub sigma_err_ps: f64,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VisibilityReport {
    Dip {
        visibility_raw: f64,
        visibility_noise_subtracted: f64,
        /// Full width at half depth, ps.
        dip_width_ps: f64,
        fit: DipFit,
    },
    /// Fitted depth below three standard errors.
    NoDip { fit: DipFit },
}

impl VisibilityReport {
    pub fn visibilities(&self) -> Option<(f64, f64)> {
        match *self {
            VisibilityReport::Dip {
                visibility_raw,
                visibility_noise_subtracted,
                ..
            } => Some((visibility_raw, visibility_noise_subtracted)),
            VisibilityReport::NoDip { .. } => None,
        }
    }

    pub fn fit(&self) -> &DipFit {
        match self {
            VisibilityReport::Dip { fit, .. } | VisibilityReport::NoDip { fit } => fit,
        }
    }
}

struct DipProblem<'a> {
    delays: &'a [f64],
    counts: &'a [f64],
    p: Vector4<f64>,
}

impl DipProblem<'_> {
    fn gauss(&self, d: f64) -> f64 {
        let s = self.p[3];
        (-(d - self.p[2]).powi(2) / (2.0 * s * s)).exp()
    }
}

impl LeastSquaresProblem<f64, Dyn, U4> for DipProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U4>;
    type ParameterStorage = Owned<f64, U4>;

    fn set_params(&mut self, x: &Vector4<f64>) {
        self.p = *x;
    }

    fn params(&self) -> Vector4<f64> {
        self.p
    }

    fn residuals(&self) -> Option<Vector<f64, Dyn, Self::ResidualStorage>> {
        let (b, a) = (self.p[0], self.p[1]);
        Some(Vector::<f64, Dyn, _>::from_iterator(
            self.delays.len(),
            self.delays
                .iter()
                .zip(self.counts)
                .map(|(&d, &c)| b - a * self.gauss(d) - c),
        ))
    }

    fn jacobian(&self) -> Option<Matrix<f64, Dyn, U4, Self::JacobianStorage>> {
        let (a, c, s) = (self.p[1], self.p[2], self.p[3]);
        if s == 0.0 {
            return None;
        }
        let mut j = Matrix::<f64, Dyn, U4, _>::zeros(self.delays.len());
        for (i, &d) in self.delays.iter().enumerate() {
            let g = self.gauss(d);
            let x = d - c;
            j[(i, 0)] = 1.0;
            j[(i, 1)] = -g;
            j[(i, 2)] = -a * g * x / (s * s);
            j[(i, 3)] = -a * g * x * x / (s * s * s);
        }
        Some(j)
    }
}

/// Least-squares Gaussian-dip fit and the two visibilities relative to the
/// fitted baseline.
pub fn extract_visibility(delays_ps: &[f64], counts: &[f64], noise_floor: f64) -> Result<VisibilityReport> {
    if delays_ps.len() != counts.len() {
        return Err(Error::Input(format!(
            "{} delays but {} count values",
            delays_ps.len(),
            counts.len()
        )));
    }
    if delays_ps.len() < 5 {
        return Err(Error::Input("a dip fit needs at least five points".into()));
    }
    if delays_ps.iter().chain(counts).any(|v| !v.is_finite()) {
        return Err(Error::Input("scan contains non-finite values".into()));
    }

    // Starting point: baseline from the outer quarter of delays, centre at
    // the minimum, width from the half-depth crossing.
    let mut order: Vec<usize> = (0..delays_ps.len()).collect();
    order.sort_by(|&a, &b| delays_ps[b].abs().total_cmp(&delays_ps[a].abs()));
    let outer = (delays_ps.len() / 4).max(2);
    let b0 = order[..outer].iter().map(|&i| counts[i]).sum::<f64>() / outer as f64;
    let i_min = (0..counts.len())
        .min_by(|&a, &b| counts[a].total_cmp(&counts[b]))
        .unwrap();
    let a0 = b0 - counts[i_min];
    let c0 = delays_ps[i_min];
    let half = b0 - a0 / 2.0;
    let span = delays_ps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - delays_ps.iter().copied().fold(f64::INFINITY, f64::min);
    let hw = delays_ps
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c <= half)
        .map(|(&d, _)| (d - c0).abs())
        .fold(0.0, f64::max);
    let s0 = if hw > 0.0 { hw / SQRT_2LN2 } else { span / 10.0 }.max(span * 1e-3);

    let problem = DipProblem {
        delays: delays_ps,
        counts,
        p: Vector4::new(b0, a0, c0, s0),
    };
    let (problem, _report) = LevenbergMarquardt::new()
        .with_tol(1e-15)
        .with_patience(400)
        .minimize(problem);
    let p = problem.p;
    let (baseline, depth, center_ps, sigma_ps) = (p[0], p[1], p[2], p[3].abs());

    let residuals = problem
        .residuals()
        .unwrap_or_else(|| Vector::<f64, Dyn, _>::zeros(counts.len()));
    let n = counts.len() as f64;
    let ssr = residuals.norm_squared();
    let rms_residual = (ssr / n).sqrt();
    let dof = (counts.len() as f64 - 4.0).max(1.0);
    let errs = problem
        .jacobian()
        .and_then(|j| (j.transpose() * &j).try_inverse())
        .map(|cov| cov.diagonal().map(|v| (v.max(0.0) * ssr / dof).sqrt()))
        .unwrap_or_else(|| Vector4::repeat(f64::INFINITY));

    let fit = DipFit {
        baseline,
        depth,
        center_ps,
        sigma_ps,
        baseline_err: errs[0],
        depth_err: errs[1],
        center_err_ps: errs[2],
        sigma_err_ps: errs[3],
        rms_residual,
    };

    let negligible = depth <= 1e-9 * baseline.abs().max(f64::MIN_POSITIVE) || depth < 3.0 * fit.depth_err;
    if negligible || !sigma_ps.is_finite() || sigma_ps == 0.0 {
        return Ok(VisibilityReport::NoDip { fit });
    }
    if !delays_ps.iter().any(|d| (d - center_ps).abs() > 3.0 * sigma_ps) {
        return Err(Error::Fit(format!(
            "no delay lies beyond 3σ = {:.3} ps of the dip; C_far is not constrained",
            3.0 * sigma_ps
        )));
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(VisibilityReport::Dip {
        visibility_raw: ratio(depth, baseline),
        visibility_noise_subtracted: ratio(depth, baseline - noise_floor),
        dip_width_ps: 2.0 * SQRT_2LN2 * sigma_ps,
        fit,
    })
}

/// Seeded Poisson repetitions of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub integration_s: f64,
    pub first_seed: u64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloTrial {
    pub seed: u64,
    /// `None` when the fit reported no dip.
    pub visibilities: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: Vec<MonteCarloTrial>,
    pub mean_raw: f64,
    pub std_raw: f64,
    pub mean_noise_subtracted: f64,
    pub std_noise_subtracted: f64,
}

pub fn monte_carlo_visibility(cfg: &HomConfig, mc: &MonteCarlo) -> Result<MonteCarloSummary> {
    let scan = simulate_hom_scan(cfg)?;
    let trials: Vec<MonteCarloTrial> = (0..mc.trials as u64)
        .into_par_iter()
        .map(|k| {
            let seed = mc.first_seed + k;
            let counts = sample_counts(&scan, mc.integration_s, seed)?;
            let report = extract_visibility(&scan.delays_ps, &counts, cfg.noise_floor)?;
            Ok(MonteCarloTrial {
                seed,
                visibilities: report.visibilities(),
            })
        })
        .collect::<Result<_>>()?;
    let stats = |f: fn((f64, f64)) -> f64| {
        let v: Vec<f64> = trials.iter().filter_map(|t| t.visibilities.map(f)).collect();
        if v.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64;
        (mean, var.sqrt())
    };
    let (mean_raw, std_raw) = stats(|v| v.0);
    let (mean_noise_subtracted, std_noise_subtracted) = stats(|v| v.1);
    Ok(MonteCarloSummary {
        trials,
        mean_raw,
        std_raw,
        mean_noise_subtracted,
        std_noise_subtracted,
    })
}

/// Coincidence-to-accidental ratio.
pub fn car(coincidences: f64, accidentals: f64) -> Result<f64> {
    if accidentals == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    if !(accidentals > 0.0 && coincidences >= 0.0) {
        return Err(Error::Input(format!(
            "rates must be non-negative, got {coincidences} and {accidentals}"
        )));
    }
    Ok(coincidences / accidentals)
}

/// Overlap `(∫√(T₁T₂))² / (∫T₁ · ∫T₂)` of two sampled intensity
/// transmission curves `(frequency, transmission)`, evaluated by the
/// trapezoid rule on the union of both grids with linear interpolation.
pub fn spectral_overlap(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    let prep = |c: &[(f64, f64)]| -> Result<Vec<(f64, f64)>> {
        if c.len() < 2 {
            return Err(Error::Input("a transmission curve needs two points".into()));
        }
        if c.iter().any(|p| !(p.0.is_finite() && p.1.is_finite() && p.1 >= 0.0)) {
            return Err(Error::Input("transmission must be finite and ≥ 0".into()));
        }
        let mut v = c.to_vec();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(v)
    };
    let (a, b) = (prep(a)?, prep(b)?);
    let interp = |c: &[(f64, f64)], x: f64| -> f64 {
        if x < c[0].0 || x > c[c.len() - 1].0 {
            return 0.0;
        }
        let i = c.partition_point(|p| p.0 <= x).clamp(1, c.len() - 1);
        let (x0, y0) = c[i - 1];
        let (x1, y1) = c[i];
        if x1 == x0 {
            y1
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    };
    let mut xs: Vec<f64> = a.iter().chain(&b).map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let trapz = |f: &dyn Fn(f64) -> f64| {
        xs.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (f(w[0]) + f(w[1])))
            .sum::<f64>()
    };
    let ia = trapz(&|x| interp(&a, x));
    let ib = trapz(&|x| interp(&b, x));
    if ia <= 0.0 || ib <= 0.0 {
        return Err(Error::Input("transmission curve integrates to zero".into()));
    }
    let cross = trapz(&|x| (interp(&a, x) * interp(&b, x)).sqrt());
    Ok((cross * cross / (ia * ib)).min(1.0))
}
