//! Domain types for a multimode twin-beam experiment: aperture geometry,
//! the matched/unmatched mode budget, detection channels and the
//! parametric gain law.
//!
//! Lengths are millimetres unless a field name says otherwise, times are
//! picoseconds and wavelengths nanometres.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandwidth selected by the apertures when only central wavelengths are known.
pub const DEFAULT_BANDWIDTH_NM: f64 = 13.0;

/// A closed wavelength interval selected in one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthBand {
    pub min_nm: f64,
    pub max_nm: f64,
}

impl WavelengthBand {
    pub fn new(min_nm: f64, max_nm: f64) -> Self {
        Self { min_nm, max_nm }
    }

    /// `central ± bandwidth / 2`.
    pub fn centered(central_nm: f64, bandwidth_nm: f64) -> Self {
        Self {
            min_nm: central_nm - 0.5 * bandwidth_nm,
            max_nm: central_nm + 0.5 * bandwidth_nm,
        }
    }
}

/// Aperture and coherence geometry of the two detection arms.
///
/// The idler aperture is described in its own plane; [`mode_partition`]
/// maps it into signal space before comparing the two disks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalGeometry {
    pub signal_aperture_diameter: f64,
    pub idler_aperture_diameter: f64,
    /// Lateral shift of the idler aperture away from the matched position.
    pub idler_displacement: f64,
    pub transverse_coherence_length: f64,
    pub pulse_duration: f64,
    pub coherence_time: f64,
    pub signal_band: WavelengthBand,
    pub idler_band: WavelengthBand,
}

impl OpticalGeometry {
    /// Geometry of the reference setup: 635/805 nm arms with 13 nm bandwidth,
    /// 2 mm coherence length, 17 ps pulses and 150 longitudinal modes. The
    /// idler aperture is 10.2 mm and the signal aperture is matched to it.
    pub fn reference() -> Self {
        let mut geometry = Self {
            signal_aperture_diameter: 10.0,
            idler_aperture_diameter: 10.2,
            idler_displacement: 0.0,
            transverse_coherence_length: 2.0,
            pulse_duration: 17.0,
            coherence_time: 17.0 / 150.0,
            signal_band: WavelengthBand::centered(635.0, DEFAULT_BANDWIDTH_NM),
            idler_band: WavelengthBand::centered(805.0, DEFAULT_BANDWIDTH_NM),
        };
        geometry.signal_aperture_diameter =
            geometry.idler_to_signal_space(geometry.idler_aperture_diameter);
        geometry
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("signal_aperture_diameter", self.signal_aperture_diameter),
            ("idler_aperture_diameter", self.idler_aperture_diameter),
            (
                "transverse_coherence_length",
                self.transverse_coherence_length,
            ),
            ("pulse_duration", self.pulse_duration),
            ("coherence_time", self.coherence_time),
            ("signal_band.min_nm", self.signal_band.min_nm),
            ("idler_band.min_nm", self.idler_band.min_nm),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    field,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if !(self.idler_displacement.is_finite() && self.idler_displacement >= 0.0) {
            return Err(Error::invalid(
                "idler_displacement",
                format!("must be finite and >= 0, got {}", self.idler_displacement),
            ));
        }
        for (field, band) in [
            ("signal_band", self.signal_band),
            ("idler_band", self.idler_band),
        ] {
            if !(band.max_nm.is_finite() && band.min_nm <= band.max_nm) {
                return Err(Error::invalid(
                    field,
                    format!("min_nm {} exceeds max_nm {}", band.min_nm, band.max_nm),
                ));
            }
        }
        if self.signal_band.max_nm >= self.idler_band.min_nm {
            return Err(Error::invalid(
                "signal_band",
                "signal wavelengths must lie strictly below idler wavelengths",
            ));
        }
        Ok(())
    }

    /// Maps a transverse length in the idler aperture plane onto the signal
    /// plane using the transverse phase-matching ratio `λ_s^min / λ_i^max`.
    pub fn idler_to_signal_space(&self, length: f64) -> f64 {
        length * self.signal_band.min_nm / self.idler_band.max_nm
    }
}

/// Mode budget: `matched_pairs` modes seen by both detectors plus
/// per-arm modes that have no partner in the other arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModePartition {
    pub matched_pairs: u64,
    pub unmatched_signal: u64,
    pub unmatched_idler: u64,
}

impl ModePartition {
    pub fn new(matched_pairs: u64, unmatched_signal: u64, unmatched_idler: u64) -> Result<Self> {
        let partition = Self {
            matched_pairs,
            unmatched_signal,
            unmatched_idler,
        };
        partition.validate()?;
        Ok(partition)
    }

    pub fn matched(matched_pairs: u64) -> Self {
        Self {
            matched_pairs,
            unmatched_signal: 0,
            unmatched_idler: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.matched_pairs + self.unmatched_signal.max(self.unmatched_idler) == 0 {
            return Err(Error::invalid("partition", "at least one mode is required"));
        }
        Ok(())
    }

    pub fn signal_modes(&self) -> u64 {
        self.matched_pairs + self.unmatched_signal
    }

    pub fn idler_modes(&self) -> u64 {
        self.matched_pairs + self.unmatched_idler
    }
}

/// Efficiency and additive readout noise of one detector arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChannel {
    pub efficiency: f64,
    /// RMS electronic noise in photoelectrons.
    pub electronic_noise_rms: f64,
}

impl DetectionChannel {
    pub fn new(efficiency: f64, electronic_noise_rms: f64) -> Self {
        Self {
            efficiency,
            electronic_noise_rms,
        }
    }

    pub fn ideal() -> Self {
        Self::new(1.0, 0.0)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid(
                format!("{name}.efficiency"),
                format!("must lie in [0, 1], got {}", self.efficiency),
            ));
        }
        if !(self.electronic_noise_rms.is_finite() && self.electronic_noise_rms >= 0.0) {
            return Err(Error::invalid(
                format!("{name}.electronic_noise_rms"),
                format!("must be finite and >= 0, got {}", self.electronic_noise_rms),
            ));
        }
        Ok(())
    }
}

/// Gain law `Γ = c·√P`, `𝒩 = sinh²Γ`, background `N₀ = b·P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainModel {
    pub gain_coefficient: f64,
    pub pump_power: f64,
    pub background_slope: f64,
}

impl GainModel {
    pub fn gain(&self) -> f64 {
        self.gain_coefficient * self.pump_power.sqrt()
    }

    pub fn mean_photons_per_mode(&self) -> f64 {
        let s = self.gain().sinh();
        s * s
    }

    pub fn background(&self) -> f64 {
        self.background_slope * self.pump_power
    }

    /// Mean photons per pulse in one arm for `modes` modes.
    pub fn output_photons(&self, modes: u64) -> f64 {
        modes as f64 * self.mean_photons_per_mode() + self.background()
    }
}

/// Everything needed to predict or simulate one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub partition: ModePartition,
    /// Mean photon number per mode, identical for every mode.
    pub mean_photons_per_mode: f64,
    pub signal: DetectionChannel,
    pub idler: DetectionChannel,
    /// Mean Poissonian background photons per pulse before detection.
    pub background_signal: f64,
    pub background_idler: f64,
}

impl ExperimentConfig {
    /// Lossless, noiseless, background-free config.
    pub fn ideal(partition: ModePartition, mean_photons_per_mode: f64) -> Self {
        Self {
            partition,
            mean_photons_per_mode,
            signal: DetectionChannel::ideal(),
            idler: DetectionChannel::ideal(),
            background_signal: 0.0,
            background_idler: 0.0,
        }
    }

    pub fn with_efficiencies(mut self, signal: f64, idler: f64) -> Self {
        self.signal.efficiency = signal;
        self.idler.efficiency = idler;
        self
    }

    pub fn with_electronic_noise(mut self, signal: f64, idler: f64) -> Self {
        self.signal.electronic_noise_rms = signal;
        self.idler.electronic_noise_rms = idler;
        self
    }

    pub fn with_backgrounds(mut self, signal: f64, idler: f64) -> Self {
        self.background_signal = signal;
        self.background_idler = idler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.partition.validate()?;
        if !(self.mean_photons_per_mode.is_finite() && self.mean_photons_per_mode >= 0.0) {
            return Err(Error::invalid(
                "mean_photons_per_mode",
                format!(
                    "must be finite and >= 0, got {}",
                    self.mean_photons_per_mode
                ),
            ));
        }
        self.signal.validate("signal")?;
        self.idler.validate("idler")?;
        for (field, value) in [
            ("background_signal", self.background_signal),
            ("background_idler", self.background_idler),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(
                    field,
                    format!("must be finite and >= 0, got {value}"),
                ));
            }
        }
        Ok(())
    }

    /// Mean detected photoelectrons per pulse in the signal arm.
    pub fn detected_signal_mean(&self) -> f64 {
        self.signal.efficiency
            * (self.partition.signal_modes() as f64 * self.mean_photons_per_mode
                + self.background_signal)
    }

    /// Mean detected photoelectrons per pulse in the idler arm.
    pub fn detected_idler_mean(&self) -> f64 {
        self.idler.efficiency
            * (self.partition.idler_modes() as f64 * self.mean_photons_per_mode
                + self.background_idler)
    }

    /// Same experiment with the arm labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            partition: ModePartition {
                matched_pairs: self.partition.matched_pairs,
                unmatched_signal: self.partition.unmatched_idler,
                unmatched_idler: self.partition.unmatched_signal,
            },
            mean_photons_per_mode: self.mean_photons_per_mode,
            signal: self.idler,
            idler: self.signal,
            background_signal: self.background_idler,
            background_idler: self.background_signal,
        }
    }
}

/// Transverse, longitudinal and total mode counts of the signal arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub transverse: u64,
    pub longitudinal: u64,
    pub total: u64,
}

/// Counts modes from the squared aperture/coherence-length ratio and the
/// pulse/coherence-time ratio. Each factor is rounded and clamped to at
/// least one mode.
pub fn mode_counts(geometry: &OpticalGeometry) -> Result<ModeCounts> {
    geometry.validate()?;
    let ratio = geometry.signal_aperture_diameter / geometry.transverse_coherence_length;
    let transverse = round_count(ratio * ratio).max(1);
    let longitudinal = round_count(geometry.pulse_duration / geometry.coherence_time).max(1);
    Ok(ModeCounts {
        transverse,
        longitudinal,
        total: transverse * longitudinal,
    })
}

/// Signal aperture diameter matched to `idler_diameter` by the transverse
/// phase-matching condition `D_i / D_s = λ_i^max / λ_s^min`.
pub fn matched_signal_diameter(idler_diameter: f64, geometry: &OpticalGeometry) -> Result<f64> {
    if !(idler_diameter.is_finite() && idler_diameter > 0.0) {
        return Err(Error::invalid(
            "idler_aperture_diameter",
            format!("must be finite and > 0, got {idler_diameter}"),
        ));
    }
    let bands_ok = geometry.signal_band.min_nm > 0.0 && geometry.idler_band.max_nm > 0.0;
    if !bands_ok {
        return Err(Error::invalid(
            "signal_band",
            "wavelengths must be positive",
        ));
    }
    Ok(geometry.idler_to_signal_space(idler_diameter))
}

/// Area shared by two disks of radii `r1`, `r2` whose centres are `distance` apart.
pub fn disk_overlap_area(r1: f64, r2: f64, distance: f64) -> f64 {
    let d = distance.abs();
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))
        .clamp(-1.0, 1.0)
        .acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))
        .clamp(-1.0, 1.0)
        .acos();
    let kite = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * kite.max(0.0).sqrt()
}

/// Splits the collected modes into matched pairs and per-arm unmatched modes.
///
/// The idler disk is mapped into signal space (diameter and displacement
/// both scaled by `λ_s^min / λ_i^max`) and overlapped with the signal disk.
/// Areas are converted to mode numbers with the density implied by
/// [`mode_counts`] for the signal aperture, so a matched, centred idler
/// aperture reproduces `mode_counts(..).total` with no unmatched modes.
pub fn mode_partition(geometry: &OpticalGeometry) -> Result<ModePartition> {
    let counts = mode_counts(geometry)?;
    let r_signal = 0.5 * geometry.signal_aperture_diameter;
    let r_idler = 0.5 * geometry.idler_to_signal_space(geometry.idler_aperture_diameter);
    let shift = geometry.idler_to_signal_space(geometry.idler_displacement);

    let area_signal = PI * r_signal * r_signal;
    let area_idler = PI * r_idler * r_idler;
    let overlap = disk_overlap_area(r_signal, r_idler, shift);
    let density = counts.total as f64 / area_signal;

    Ok(ModePartition {
        matched_pairs: round_count(density * overlap),
        unmatched_signal: round_count(density * (area_signal - overlap).max(0.0)),
        unmatched_idler: round_count(density * (area_idler - overlap).max(0.0)),
    })
}

/// Mean photons per mode `sinh²Γ` for parametric gain `Γ ≥ 0`.
pub fn gain_to_mean_photons(gain: f64) -> Result<f64> {
    if !(gain.is_finite() && gain >= 0.0) {
        return Err(Error::invalid(
            "gain",
            format!("must be finite and >= 0, got {gain}"),
        ));
    }
    let s = gain.sinh();
    Ok(s * s)
}

/// Inverse of [`gain_to_mean_photons`].
pub fn mean_photons_to_gain(mean_photons: f64) -> Result<f64> {
    if !(mean_photons.is_finite() && mean_photons >= 0.0) {
        return Err(Error::invalid(
            "mean_photons_per_mode",
            format!("must be finite and >= 0, got {mean_photons}"),
        ));
    }
    Ok(mean_photons.sqrt().asinh())
}

fn round_count(x: f64) -> u64 {
    x.round().max(0.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geometry_with(ds: f64, di: f64, shift: f64) -> OpticalGeometry {
        OpticalGeometry {
            signal_aperture_diameter: ds,
            idler_aperture_diameter: di,
            idler_displacement: shift,
            ..OpticalGeometry::reference()
        }
    }

    #[test]
    fn transverse_count_from_ten_mm_aperture() {
        let counts = mode_counts(&geometry_with(10.0, 12.0, 0.0)).unwrap();
        assert_eq!(counts.transverse, 25);
        assert_eq!(counts.longitudinal, 150);
        assert_eq!(counts.total, 3750);
    }

    #[test]
    fn aperture_equal_to_coherence_length_is_one_mode() {
        let mut g = geometry_with(2.0, 2.5, 0.0);
        g.pulse_duration = g.coherence_time;
        let counts = mode_counts(&g).unwrap();
        assert_eq!(
            (counts.transverse, counts.longitudinal, counts.total),
            (1, 1, 1)
        );
    }

    #[test]
    fn rejects_non_positive_coherence() {
        let mut g = OpticalGeometry::reference();
        g.transverse_coherence_length = 0.0;
        assert!(mode_counts(&g).is_err());
        let mut g = OpticalGeometry::reference();
        g.coherence_time = -1.0;
        assert!(mode_counts(&g).is_err());
    }

    #[test]
    fn rejects_degenerate_or_inverted_bands() {
        let mut g = OpticalGeometry::reference();
        g.idler_band = g.signal_band;
        assert!(g.validate().is_err());
        let mut g = OpticalGeometry::reference();
        g.signal_band = WavelengthBand::new(640.0, 630.0);
        assert!(g.validate().is_err());
    }

    #[test]
    fn matched_diameter_reference_case() {
        let g = OpticalGeometry::reference();
        assert_relative_eq!(g.signal_band.min_nm, 628.5);
        assert_relative_eq!(g.idler_band.max_nm, 811.5);
        let ds = matched_signal_diameter(10.2, &g).unwrap();
        assert_relative_eq!(ds, 10.2 * 628.5 / 811.5, max_relative = 1e-15);
        assert!((ds - 7.90).abs() < 0.005);
    }

    #[test]
    fn matched_diameter_unit_ratio() {
        let mut g = OpticalGeometry::reference();
        g.signal_band = WavelengthBand::new(700.0, 700.0);
        g.idler_band = WavelengthBand::new(700.0, 700.0);
        assert_eq!(matched_signal_diameter(6.0, &g).unwrap(), 6.0);
        assert!(matched_signal_diameter(0.0, &g).is_err());
    }

    #[test]
    fn centred_matched_apertures_have_no_unmatched_modes() {
        let g = OpticalGeometry::reference();
        let p = mode_partition(&g).unwrap();
        assert_eq!(p, ModePartition::matched(mode_counts(&g).unwrap().total));
    }

    #[test]
    fn disjoint_apertures_share_nothing() {
        let g = OpticalGeometry::reference();
        let shifted = OpticalGeometry {
            idler_displacement: 20.0,
            ..g
        };
        let p = mode_partition(&shifted).unwrap();
        assert_eq!(p.matched_pairs, 0);
        assert_eq!(p.unmatched_signal, mode_counts(&g).unwrap().total);
        assert!(p.unmatched_idler > 0);
    }

    #[test]
    fn five_percent_shift_leaves_a_small_unmatched_fraction() {
        let g = OpticalGeometry {
            idler_displacement: 0.5,
            ..OpticalGeometry::reference()
        };
        let p = mode_partition(&g).unwrap();
        assert_eq!(p.unmatched_signal, p.unmatched_idler);
        let fraction = p.unmatched_signal as f64 / p.signal_modes() as f64;
        // Small-shift limit of the lens area: 1 - A_ov/A ≈ 4d/(πD) = 2d/(πr).
        let r = 0.5 * g.signal_aperture_diameter;
        let d = g.idler_to_signal_space(0.5);
        assert!(
            (fraction - 2.0 * d / (PI * r)).abs() < 0.003,
            "fraction {fraction}"
        );
    }

    #[test]
    fn gain_law_values() {
        assert_eq!(gain_to_mean_photons(0.0).unwrap(), 0.0);
        let n2 = gain_to_mean_photons(2.0).unwrap();
        assert!((n2 - 13.15).abs() < 0.01);
        assert_eq!(n2.round(), 13.0);
        let n4 = gain_to_mean_photons(4.0).unwrap();
        assert!((n4 - 744.8).abs() < 0.1, "{n4}");
        assert!(gain_to_mean_photons(-0.1).is_err());
        assert_relative_eq!(mean_photons_to_gain(n4).unwrap(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn gain_model_components() {
        let model = GainModel {
            gain_coefficient: 0.5,
            pump_power: 16.0,
            background_slope: 3.0,
        };
        assert_relative_eq!(model.gain(), 2.0);
        assert_relative_eq!(model.background(), 48.0);
        assert_relative_eq!(model.output_photons(10), 10.0 * 2f64.sinh().powi(2) + 48.0);
    }

    #[test]
    fn partition_requires_a_mode() {
        assert!(ModePartition::new(0, 0, 0).is_err());
        assert!(ModePartition::new(0, 1, 0).is_ok());
    }

    #[test]
    fn config_validation_names_field() {
        let cfg =
            ExperimentConfig::ideal(ModePartition::matched(4), 1.0).with_efficiencies(1.2, 0.5);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("signal.efficiency"), "{err}");
    }

    proptest! {
        #[test]
        fn matched_round_trip_has_no_unmatched_modes(di in 1.0f64..20.0, lcoh in 0.3f64..4.0) {
            let mut g = OpticalGeometry::reference();
            g.transverse_coherence_length = lcoh;
            g.idler_aperture_diameter = di;
            g.signal_aperture_diameter = matched_signal_diameter(di, &g).unwrap();
            let p = mode_partition(&g).unwrap();
            prop_assert_eq!(p.unmatched_signal, 0);
            prop_assert_eq!(p.unmatched_idler, 0);
            prop_assert_eq!(p.matched_pairs, mode_counts(&g).unwrap().total);
        }

        #[test]
        fn partition_conserves_each_arm(ds in 1.0f64..15.0, di in 1.0f64..15.0, shift in 0.0f64..20.0) {
            let g = geometry_with(ds, di, shift);
            let p = mode_partition(&g).unwrap();
            let own_signal = mode_counts(&g).unwrap().total as i64;
            prop_assert!((p.signal_modes() as i64 - own_signal).abs() <= 1);
            let r_idler = 0.5 * g.idler_to_signal_space(di);
            let density = own_signal as f64 / (PI * 0.25 * ds * ds);
            let own_idler = (density * PI * r_idler * r_idler).round() as i64;
            prop_assert!((p.idler_modes() as i64 - own_idler).abs() <= 1);
        }

        #[test]
        fn gain_law_is_monotone(a in 0.0f64..6.0, b in 0.0f64..6.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(gain_to_mean_photons(lo).unwrap() <= gain_to_mean_photons(hi).unwrap());
        }

        #[test]
        fn overlap_is_bounded_and_symmetric(r1 in 0.1f64..5.0, r2 in 0.1f64..5.0, d in 0.0f64..12.0) {
            let a = disk_overlap_area(r1, r2, d);
            prop_assert!(a >= 0.0);
            prop_assert!(a <= PI * r1.min(r2).powi(2) * (1.0 + 1e-12));
            prop_assert!((a - disk_overlap_area(r2, r1, d)).abs() <= 1e-9 * (1.0 + a));
        }
    }
}
