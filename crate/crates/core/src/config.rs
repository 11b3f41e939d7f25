//! On-disk experiment description. Field names carry their units.
//!
//! ```json
//! {
//!   "geometry": {
//!     "idler_aperture_diameter_mm": 10.2,
//!     "idler_displacement_mm": 0.5,
//!     "transverse_coherence_length_mm": 2.0,
//!     "pulse_duration_ps": 17.0,
//!     "coherence_time_ps": 0.11333,
//!     "signal_band_nm": { "central_nm": 635.0 },
//!     "idler_band_nm": { "central_nm": 805.0 }
//!   },
//!   "gain": 2.0,
//!   "signal": { "efficiency": 0.70, "sigma_e_electrons": 180.0 },
//!   "idler": { "efficiency": 0.77, "sigma_e_electrons": 180.0 }
//! }
//! ```
//!
//! Either `modes` (an explicit mode budget) or `geometry` must be given, and
//! either `mean_photons_per_mode` or `gain`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    gain_to_mean_photons, matched_signal_diameter, mode_partition, DetectionChannel,
    ExperimentConfig, ModePartition, OpticalGeometry, WavelengthBand, DEFAULT_BANDWIDTH_NM,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_photons_per_mode: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    pub signal: ChannelSpec,
    pub idler: ChannelSpec,
    #[serde(default)]
    pub background_signal_photons: f64,
    #[serde(default)]
    pub background_idler_photons: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSpec {
    pub matched_pairs: u64,
    #[serde(default)]
    pub unmatched_signal: u64,
    #[serde(default)]
    pub unmatched_idler: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    /// Defaults to the diameter matched to the idler aperture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_aperture_diameter_mm: Option<f64>,
    pub idler_aperture_diameter_mm: f64,
    #[serde(default)]
    pub idler_displacement_mm: f64,
    pub transverse_coherence_length_mm: f64,
    pub pulse_duration_ps: f64,
    pub coherence_time_ps: f64,
    pub signal_band_nm: BandSpec,
    pub idler_band_nm: BandSpec,
}

/// Either `min_nm`/`max_nm`, or `central_nm` with an optional `bandwidth_nm`
/// (13 nm when omitted).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_nm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub efficiency: f64,
    #[serde(default)]
    pub sigma_e_electrons: f64,
}

/// A config with the geometry it was derived from, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub geometry: Option<OpticalGeometry>,
}

impl BandSpec {
    fn resolve(&self, field: &str) -> Result<WavelengthBand> {
        match (self.min_nm, self.max_nm, self.central_nm) {
            (Some(min), Some(max), None) if self.bandwidth_nm.is_none() => {
                Ok(WavelengthBand::new(min, max))
            }
            (None, None, Some(central)) => Ok(WavelengthBand::centered(
                central,
                self.bandwidth_nm.unwrap_or(DEFAULT_BANDWIDTH_NM),
            )),
            _ => Err(Error::invalid(
                field,
                "give either min_nm and max_nm, or central_nm with optional bandwidth_nm",
            )),
        }
    }
}

impl GeometrySpec {
    pub fn resolve(&self) -> Result<OpticalGeometry> {
        let mut geometry = OpticalGeometry {
            signal_aperture_diameter: 1.0,
            idler_aperture_diameter: self.idler_aperture_diameter_mm,
            idler_displacement: self.idler_displacement_mm,
            transverse_coherence_length: self.transverse_coherence_length_mm,
            pulse_duration: self.pulse_duration_ps,
            coherence_time: self.coherence_time_ps,
            signal_band: self.signal_band_nm.resolve("geometry.signal_band_nm")?,
            idler_band: self.idler_band_nm.resolve("geometry.idler_band_nm")?,
        };
        geometry.signal_aperture_diameter = match self.signal_aperture_diameter_mm {
            Some(d) => d,
            None => matched_signal_diameter(self.idler_aperture_diameter_mm, &geometry)
                .map_err(|e| prefix("geometry", e))?,
        };
        geometry.validate().map_err(|e| prefix("geometry", e))?;
        Ok(geometry)
    }
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<Resolved> {
        let mean_photons = match (self.mean_photons_per_mode, self.gain) {
            (Some(n), None) => n,
            (None, Some(g)) => gain_to_mean_photons(g)?,
            _ => {
                return Err(Error::invalid(
                    "mean_photons_per_mode",
                    "give exactly one of mean_photons_per_mode or gain",
                ))
            }
        };
        let (partition, geometry) = match (&self.modes, &self.geometry) {
            (Some(m), None) => {
                let partition =
                    ModePartition::new(m.matched_pairs, m.unmatched_signal, m.unmatched_idler)
                        .map_err(|e| prefix("modes", e))?;
                (partition, None)
            }
            (None, Some(spec)) => {
                let geometry = spec.resolve()?;
                (mode_partition(&geometry)?, Some(geometry))
            }
            _ => {
                return Err(Error::invalid(
                    "modes",
                    "give exactly one of modes or geometry",
                ))
            }
        };
        let config = ExperimentConfig {
            partition,
            mean_photons_per_mode: mean_photons,
            signal: DetectionChannel::new(self.signal.efficiency, self.signal.sigma_e_electrons),
            idler: DetectionChannel::new(self.idler.efficiency, self.idler.sigma_e_electrons),
            background_signal: self.background_signal_photons,
            background_idler: self.background_idler_photons,
        };
        config.validate()?;
        Ok(Resolved { config, geometry })
    }
}

impl From<&OpticalGeometry> for GeometrySpec {
    fn from(g: &OpticalGeometry) -> Self {
        let band = |b: WavelengthBand| BandSpec {
            min_nm: Some(b.min_nm),
            max_nm: Some(b.max_nm),
            ..Default::default()
        };
        Self {
            signal_aperture_diameter_mm: Some(g.signal_aperture_diameter),
            idler_aperture_diameter_mm: g.idler_aperture_diameter,
            idler_displacement_mm: g.idler_displacement,
            transverse_coherence_length_mm: g.transverse_coherence_length,
            pulse_duration_ps: g.pulse_duration,
            coherence_time_ps: g.coherence_time,
            signal_band_nm: band(g.signal_band),
            idler_band_nm: band(g.idler_band),
        }
    }
}

fn prefix(scope: &str, err: Error) -> Error {
    match err {
        Error::Invalid { field, reason } => Error::Invalid {
            field: format!("{scope}.{field}"),
            reason,
        },
        other => other,
    }
}
