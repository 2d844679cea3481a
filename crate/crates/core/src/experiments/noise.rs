//! Pump-induced noise: a linear power model and a per-frequency spectrum.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OpticalFrequency, WavelengthVacuum};

const ILLUSTRATIVE_SPECTRUM: &str = include_str!("../../data/illustrative_noise_spectrum.txt");

/// Per-pump power at which spectrum values apply unless stated otherwise.
pub const DEFAULT_REFERENCE_POWER_W: f64 = 0.5;

/// Unit of the first column of a spectrum table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumAxis {
    Thz,
    Nm,
}

/// Noise counts per second induced by a single pump, as a function of the
/// pump frequency, at `reference_power_w` of that pump.
///
/// Lookups interpolate linearly in frequency and hold the end values
/// outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    /// (frequency in GHz, counts/s), sorted by frequency.
    points: Vec<(f64, f64)>,
    pub reference_power_w: f64,
}

impl NoiseSpectrum {
    pub fn from_points(points: Vec<(OpticalFrequency, f64)>) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().map(|(f, c)| (f.ghz(), c)).collect();
        if pts.is_empty() {
            return Err(Error::Input("noise spectrum has no points".into()));
        }
        if let Some(&(f, c)) = pts.iter().find(|(_, c)| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Input(format!("noise at {f} GHz is {c}; counts must be ≥ 0")));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Input(format!("duplicate spectrum frequency {} GHz", w[0].0)));
        }
        Ok(Self {
            points: pts,
            reference_power_w: DEFAULT_REFERENCE_POWER_W,
        })
    }

    /// The same value at every frequency.
    pub fn flat(counts: f64) -> Result<Self> {
        Self::from_points(vec![(OpticalFrequency::from_thz(193.0)?, counts)])
    }

    pub fn with_reference_power(mut self, watts: f64) -> Result<Self> {
        if !(watts.is_finite() && watts > 0.0) {
            return Err(Error::NonPositive {
                quantity: "reference power",
                value: watts,
            });
        }
        self.reference_power_w = watts;
        Ok(self)
    }

    /// Parses two whitespace- or comma-separated columns; `#` starts a
    /// comment.
    pub fn parse(text: &str, axis: SpectrumAxis) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let bad = || Error::Input(format!("line {}: expected two numbers, got {raw:?}", lineno + 1));
            if cols.len() != 2 {
                return Err(bad());
            }
            let x: f64 = cols[0].parse().map_err(|_| bad())?;
            let y: f64 = cols[1].parse().map_err(|_| bad())?;
            let f = match axis {
                SpectrumAxis::Thz => OpticalFrequency::from_thz(x)?,
                SpectrumAxis::Nm => WavelengthVacuum::from_nm(x)?.frequency(),
            };
            points.push((f, y));
        }
        Self::from_points(points)
    }

    pub fn load(path: impl AsRef<Path>, axis: SpectrumAxis) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, axis).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Shipped placeholder table. Its shape is made up for demonstration
    /// and is not a measurement.
    pub fn illustrative() -> Self {
        Self::parse(ILLUSTRATIVE_SPECTRUM, SpectrumAxis::Nm).expect("bundled spectrum parses")
    }

    pub fn points(&self) -> impl Iterator<Item = (OpticalFrequency, f64)> + '_ {
        self.points
            .iter()
            .map(|&(g, c)| (OpticalFrequency::from_ghz(g).expect("validated"), c))
    }

    /// Counts/s at `f` for one pump at the reference power.
    pub fn at(&self, f: OpticalFrequency) -> f64 {
        let x = f.ghz();
        let pts = &self.points;
        let i = pts.partition_point(|p| p.0 <= x);
        if i == 0 {
            return pts[0].1;
        }
        if i == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Noise from one pump at `power_w`, scaled linearly from the reference.
    pub fn at_power(&self, f: OpticalFrequency, power_w: f64) -> f64 {
        self.at(f) * power_w / self.reference_power_w
    }

    /// Two-column THz table, readable by [`NoiseSpectrum::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# frequency_thz counts_per_s (reference {} W)\n",
            self.reference_power_w
        );
        for &(g, c) in &self.points {
            let _ = writeln!(out, "{} {}", g / 1e3, c);
        }
        out
    }
}

/// Straight-line fit of noise counts against total pump power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// counts/s per W.
    pub slope: f64,
    /// counts/s.
    pub intercept: f64,
    /// Per-sample `measured − fitted`.
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    pub power_range_w: (f64, f64),
    pub spectrum: Option<NoiseSpectrum>,
}

impl NoiseModel {
    /// Predicted counts/s, clipped at zero.
    pub fn predict(&self, total_power_w: f64) -> f64 {
        (self.intercept + self.slope * total_power_w).max(0.0)
    }

    pub fn with_spectrum(mut self, spectrum: NoiseSpectrum) -> Self {
        self.spectrum = Some(spectrum);
        self
    }
}

/// Ordinary least squares over `(total power W, counts/s)` samples.
///
/// A negative fitted slope contradicts the model and is reported as a fit
/// error.
pub fn fit_noise_linear(samples: &[(f64, f64)]) -> Result<NoiseModel> {
    if let Some(s) = samples.iter().find(|(p, c)| !(p.is_finite() && c.is_finite())) {
        return Err(Error::Fit(format!("non-finite sample {s:?}")));
    }
    let n = samples.len() as f64;
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(p, _)| {
            (lo.min(p), hi.max(p))
        });
    if samples.len() < 2 || lo == hi {
        return Err(Error::Fit("need at least two distinct powers".into()));
    }
    let mean_p = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_c = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mean_p).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mean_p) * (s.1 - mean_c)).sum();
    let slope = sxy / sxx;
    let intercept = mean_c - slope * mean_p;
    if slope < -1e-12 * mean_c.abs().max(1.0) {
        return Err(Error::Fit(format!("fitted slope {slope} counts/s/W is negative")));
    }
    let slope = slope.max(0.0);
    let residuals: Vec<f64> = samples.iter().map(|&(p, c)| c - (intercept + slope * p)).collect();
    let rms_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok(NoiseModel {
        slope,
        intercept,
        residuals,
        rms_residual,
        power_range_w: (lo, hi),
        spectrum: None,
    })
}
