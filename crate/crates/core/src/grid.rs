//! Optical frequencies, vacuum wavelengths and the 100 GHz dense-WDM grid.
//!
//! Frequencies are stored in GHz so that grid arithmetic (anchor plus an
//! integer number of 100 GHz steps) is exact in `f64`. Wavelengths are an
//! ingest/display form and are converted through `c` on demand.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `c` expressed in nm·GHz, so that `λ[nm] = C_NM_GHZ / f[GHz]`.
const C_NM_GHZ: f64 = SPEED_OF_LIGHT;

/// An optical carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OpticalFrequency {
    ghz: f64,
}

impl OpticalFrequency {
    pub fn from_ghz(ghz: f64) -> Result<Self> {
        if ghz.is_finite() && ghz > 0.0 {
            Ok(Self { ghz })
        } else {
            Err(Error::NonPositive {
                quantity: "optical frequency",
                value: ghz,
            })
        }
    }

    pub fn from_thz(thz: f64) -> Result<Self> {
        Self::from_ghz(thz * 1e3)
    }

    pub fn ghz(self) -> f64 {
        self.ghz
    }

    pub fn thz(self) -> f64 {
        self.ghz / 1e3
    }

    pub fn hz(self) -> f64 {
        self.ghz * 1e9
    }

    /// Angular frequency in rad/s.
    pub fn angular(self) -> f64 {
        std::f64::consts::TAU * self.hz()
    }

    pub fn wavelength(self) -> WavelengthVacuum {
        WavelengthVacuum {
            nm: C_NM_GHZ / self.ghz,
        }
    }

    /// Frequency displaced by `shift`; fails if the result is not positive.
    pub fn offset(self, shift: FrequencyShift) -> Result<Self> {
        Self::from_ghz(self.ghz + shift.ghz)
    }

    /// Sum frequency of two carriers (energy conservation in SFG).
    pub fn sum(self, other: Self) -> Self {
        Self {
            ghz: self.ghz + other.ghz,
        }
    }
}

impl TryFrom<f64> for OpticalFrequency {
    type Error = Error;

    /// Serialized form is THz.
    fn try_from(thz: f64) -> Result<Self> {
        Self::from_thz(thz)
    }
}

impl From<OpticalFrequency> for f64 {
    fn from(f: OpticalFrequency) -> f64 {
        f.thz()
    }
}

impl fmt::Display for OpticalFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} THz ({:.3} nm)", self.thz(), self.wavelength().nm())
    }
}

/// A vacuum wavelength.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WavelengthVacuum {
    nm: f64,
}

impl WavelengthVacuum {
    pub fn from_nm(nm: f64) -> Result<Self> {
        if nm.is_finite() && nm > 0.0 {
            Ok(Self { nm })
        } else {
            Err(Error::NonPositive {
                quantity: "wavelength",
                value: nm,
            })
        }
    }

    pub fn from_um(um: f64) -> Result<Self> {
        Self::from_nm(um * 1e3)
    }

    pub fn nm(self) -> f64 {
        self.nm
    }

    pub fn um(self) -> f64 {
        self.nm * 1e-3
    }

    pub fn meters(self) -> f64 {
        self.nm * 1e-9
    }

    pub fn frequency(self) -> OpticalFrequency {
        OpticalFrequency {
            ghz: C_NM_GHZ / self.nm,
        }
    }
}

impl TryFrom<f64> for WavelengthVacuum {
    type Error = Error;

    fn try_from(nm: f64) -> Result<Self> {
        Self::from_nm(nm)
    }
}

impl From<WavelengthVacuum> for f64 {
    fn from(w: WavelengthVacuum) -> f64 {
        w.nm
    }
}

/// A signed frequency difference.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrequencyShift {
    ghz: f64,
}

impl FrequencyShift {
    pub fn from_ghz(ghz: f64) -> Self {
        Self { ghz }
    }

    pub fn ghz(self) -> f64 {
        self.ghz
    }

    pub fn abs(self) -> Self {
        Self { ghz: self.ghz.abs() }
    }
}

impl std::ops::Neg for FrequencyShift {
    type Output = Self;

    fn neg(self) -> Self {
        Self { ghz: -self.ghz }
    }
}

impl fmt::Display for FrequencyShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.3} GHz", self.ghz)
    }
}

/// Signed difference `a − b`.
pub fn shift_between(a: OpticalFrequency, b: OpticalFrequency) -> FrequencyShift {
    FrequencyShift { ghz: a.ghz - b.ghz }
}

/// `λ = c/f`.
pub fn frequency_to_wavelength(f: OpticalFrequency) -> WavelengthVacuum {
    f.wavelength()
}

/// Checks the cascaded-conversion constraint `f_t − f_s = f_P1 − f_P2` to within
/// `tolerance_ghz`.
pub fn conversion_shift_consistent(
    signal: OpticalFrequency,
    target: OpticalFrequency,
    pump1: OpticalFrequency,
    pump2: OpticalFrequency,
    tolerance_ghz: f64,
) -> bool {
    let photon = shift_between(target, signal).ghz();
    let pumps = shift_between(pump1, pump2).ghz();
    (photon - pumps).abs() <= tolerance_ghz
}

/// An ITU dense-WDM channel number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WdmChannel(pub i32);

impl WdmChannel {
    pub fn index(self) -> i32 {
        self.0
    }
}

impl fmt::Display for WdmChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ch{}", self.0)
    }
}

/// Fixed-spacing channel plan: `f(n) = anchor + n·spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItuGrid {
    pub anchor_ghz: f64,
    pub spacing_ghz: f64,
    pub first_channel: i32,
    pub last_channel: i32,
}

impl Default for ItuGrid {
    fn default() -> Self {
        Self {
            anchor_ghz: 190_000.0,
            spacing_ghz: 100.0,
            first_channel: 1,
            last_channel: 72,
        }
    }
}

impl ItuGrid {
    pub fn channel(&self, index: i32) -> Result<WdmChannel> {
        if (self.first_channel..=self.last_channel).contains(&index) {
            Ok(WdmChannel(index))
        } else {
            Err(Error::ChannelOutOfRange {
                index,
                first: self.first_channel,
                last: self.last_channel,
            })
        }
    }

    pub fn frequency(&self, ch: WdmChannel) -> Result<OpticalFrequency> {
        let ch = self.channel(ch.0)?;
        OpticalFrequency::from_ghz(self.anchor_ghz + self.spacing_ghz * f64::from(ch.0))
    }

    /// Inverse of [`ItuGrid::frequency`]. Frequencies further than 1 MHz from a
    /// grid line are rejected.
    pub fn channel_of(&self, f: OpticalFrequency) -> Result<WdmChannel> {
        let steps = (f.ghz() - self.anchor_ghz) / self.spacing_ghz;
        let nearest = steps.round();
        if (steps - nearest).abs() * self.spacing_ghz > 1e-3 {
            return Err(Error::OffGrid {
                ghz: f.ghz(),
                nearest: nearest as i32,
            });
        }
        self.channel(nearest as i32)
    }

    pub fn channels(&self) -> impl Iterator<Item = WdmChannel> {
        (self.first_channel..=self.last_channel).map(WdmChannel)
    }
}

/// Channel frequency on the default 190 THz + n·100 GHz grid (channels 1–72).
pub fn channel_to_frequency(ch: WdmChannel) -> Result<OpticalFrequency> {
    ItuGrid::default().frequency(ch)
}
