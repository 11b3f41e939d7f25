//! Parameter sweeps that pair the analytic prediction with a Monte Carlo
//! estimate at every grid point.

use serde::{Deserialize, Serialize};

use crate::analytic::{nrf_predict, nrf_to_db};
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::estimator::{g2_estimates, nrf_estimate_with, BootstrapOptions, NoiseSubtraction};
use crate::model::{
    gain_to_mean_photons, matched_signal_diameter, mode_partition, ExperimentConfig,
    OpticalGeometry,
};
use crate::rng::{self, Domain};
use crate::sampler::simulate;

/// Which parameter a scenario sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Idler diameter (mm), signal aperture kept phase-matched to it.
    ApertureSweepBoth,
    /// Signal diameter (mm), idler aperture fixed.
    ApertureSweepSignal,
    /// Parametric gain Γ.
    GainSweep,
    /// Idler aperture displacement (mm).
    DisplacementSweep,
    /// Mean photons per mode 𝒩.
    NrfVsMeanPhotons,
}

impl ScenarioKind {
    pub fn needs_geometry(self) -> bool {
        matches!(
            self,
            ScenarioKind::ApertureSweepBoth
                | ScenarioKind::ApertureSweepSignal
                | ScenarioKind::DisplacementSweep
        )
    }

    /// Grid used when a scenario file gives none.
    pub fn default_grid(self, geometry: Option<&OpticalGeometry>) -> Vec<f64> {
        match self {
            ScenarioKind::ApertureSweepBoth => (2..=12).map(f64::from).collect(),
            ScenarioKind::ApertureSweepSignal => {
                let matched = geometry
                    .and_then(|g| matched_signal_diameter(g.idler_aperture_diameter, g).ok())
                    .unwrap_or(8.0);
                (5..=15).map(|i| matched * f64::from(i) / 10.0).collect()
            }
            ScenarioKind::GainSweep => (1..=8).map(|i| 0.5 * f64::from(i)).collect(),
            ScenarioKind::DisplacementSweep => (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            ScenarioKind::NrfVsMeanPhotons => vec![1.0, 50.0, 100.0, 200.0, 400.0, 700.0],
        }
    }
}

/// Gain law used by gain sweeps to add pump-dependent fluorescence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainCalibration {
    pub gain_coefficient: f64,
    /// Background photons per pump-power unit, per arm.
    pub background_slope: f64,
}

/// Scenario file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kind: ScenarioKind,
    pub base: ConfigFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default = "default_pulses")]
    pub pulses_per_point: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_model: Option<GainCalibration>,
}

fn default_pulses() -> usize {
    100_000
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub base: ExperimentConfig,
    pub geometry: Option<OpticalGeometry>,
    pub grid: Vec<f64>,
    pub pulses_per_point: usize,
    pub seed: u64,
    pub gain_model: Option<GainCalibration>,
}

impl ScenarioFile {
    pub fn resolve(&self) -> Result<ScenarioSpec> {
        let base = self.base.resolve().map_err(|e| match e {
            Error::Invalid { field, reason } => Error::Invalid {
                field: format!("base.{field}"),
                reason,
            },
            other => other,
        })?;
        if self.kind.needs_geometry() && base.geometry.is_none() {
            return Err(Error::invalid(
                "base.geometry",
                "this scenario kind sweeps aperture geometry",
            ));
        }
        let grid = match &self.grid {
            Some(grid) if grid.is_empty() => {
                return Err(Error::invalid("grid", "must not be empty"))
            }
            Some(grid) => grid.clone(),
            None => self.kind.default_grid(base.geometry.as_ref()),
        };
        if self.pulses_per_point < 2 {
            return Err(Error::invalid("pulses_per_point", "must be at least 2"));
        }
        if let Some(g) = self.gain_model {
            if !(g.gain_coefficient > 0.0 && g.background_slope >= 0.0) {
                return Err(Error::invalid(
                    "gain_model",
                    "needs gain_coefficient > 0 and background_slope >= 0",
                ));
            }
        }
        Ok(ScenarioSpec {
            kind: self.kind,
            base: base.config,
            geometry: base.geometry,
            grid,
            pulses_per_point: self.pulses_per_point,
            seed: self.seed,
            gain_model: self.gain_model,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub workers: usize,
    pub subtract_noise: bool,
    pub bootstrap_resamples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 0,
            subtract_noise: true,
            bootstrap_resamples: 1000,
        }
    }
}

/// One CSV row. Missing values serialize as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub grid_value: f64,
    pub nrf_analytic: Option<f64>,
    pub nrf_mc: Option<f64>,
    pub nrf_ci_lo: Option<f64>,
    pub nrf_ci_hi: Option<f64>,
    pub mean_n1: Option<f64>,
    pub mean_n2: Option<f64>,
    pub g11: Option<f64>,
    pub g22: Option<f64>,
    pub g12: Option<f64>,
    pub m: Option<u64>,
    pub k_s: Option<u64>,
    pub k_i: Option<u64>,
    pub error: String,
    pub nrf_mc_db: Option<f64>,
}

impl ScenarioRow {
    fn failed(grid_value: f64, err: &Error) -> Self {
        Self {
            grid_value,
            nrf_analytic: None,
            nrf_mc: None,
            nrf_ci_lo: None,
            nrf_ci_hi: None,
            mean_n1: None,
            mean_n2: None,
            g11: None,
            g22: None,
            g12: None,
            m: None,
            k_s: None,
            k_i: None,
            error: err.to_string(),
            nrf_mc_db: None,
        }
    }
}

/// Builds the experiment at one grid value.
pub fn point_config(spec: &ScenarioSpec, value: f64) -> Result<ExperimentConfig> {
    let mut config = spec.base;
    let with_geometry = |edit: &dyn Fn(&mut OpticalGeometry) -> Result<()>| -> Result<_> {
        let mut geometry = spec
            .geometry
            .ok_or_else(|| Error::invalid("base.geometry", "required by this scenario kind"))?;
        edit(&mut geometry)?;
        mode_partition(&geometry)
    };
    match spec.kind {
        ScenarioKind::ApertureSweepBoth => {
            config.partition = with_geometry(&|g| {
                g.idler_aperture_diameter = value;
                g.signal_aperture_diameter = matched_signal_diameter(value, g)?;
                Ok(())
            })?;
        }
        ScenarioKind::ApertureSweepSignal => {
            config.partition = with_geometry(&|g| {
                g.signal_aperture_diameter = value;
                Ok(())
            })?;
        }
        ScenarioKind::DisplacementSweep => {
            config.partition = with_geometry(&|g| {
                g.idler_displacement = value;
                Ok(())
            })?;
        }
        ScenarioKind::GainSweep => {
            config.mean_photons_per_mode = gain_to_mean_photons(value)?;
            if let Some(law) = spec.gain_model {
                let pump = (value / law.gain_coefficient).powi(2);
                config.background_signal = law.background_slope * pump;
                config.background_idler = law.background_slope * pump;
            }
        }
        ScenarioKind::NrfVsMeanPhotons => config.mean_photons_per_mode = value,
    }
    config.validate()?;
    Ok(config)
}

/// Runs every grid point in order. A failing point yields a row whose
/// `error` column explains why; the sweep continues.
pub fn run_scenario(spec: &ScenarioSpec, options: &RunOptions) -> Vec<ScenarioRow> {
    spec.grid
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            run_point(spec, options, i as u64, value)
                .unwrap_or_else(|e| ScenarioRow::failed(value, &e))
        })
        .collect()
}

fn run_point(
    spec: &ScenarioSpec,
    options: &RunOptions,
    index: u64,
    value: f64,
) -> Result<ScenarioRow> {
    let config = point_config(spec, value)?;
    let seed = rng::derive_seed(spec.seed, Domain::Scenario, index);
    let predicted = nrf_predict(&config)?;
    let samples = simulate(&config, spec.pulses_per_point, seed, options.workers)?;
    let subtraction = if options.subtract_noise {
        NoiseSubtraction::Configured
    } else {
        NoiseSubtraction::Off
    };
    let bootstrap = BootstrapOptions {
        resamples: options.bootstrap_resamples,
        seed,
        workers: options.workers,
        ..BootstrapOptions::default()
    };
    let estimate = nrf_estimate_with(&samples, subtraction, &bootstrap)?;
    let g = g2_estimates(&samples).ok();
    Ok(ScenarioRow {
        grid_value: value,
        nrf_analytic: Some(predicted.nrf),
        nrf_mc: Some(estimate.nrf),
        nrf_ci_lo: estimate.interval.map(|ci| ci.lo),
        nrf_ci_hi: estimate.interval.map(|ci| ci.hi),
        mean_n1: Some(estimate.mean_n1),
        mean_n2: Some(estimate.mean_n2),
        g11: g.map(|g| g.g11),
        g22: g.map(|g| g.g22),
        g12: g.map(|g| g.g12),
        m: Some(config.partition.matched_pairs),
        k_s: Some(config.partition.unmatched_signal),
        k_i: Some(config.partition.unmatched_idler),
        error: String::new(),
        nrf_mc_db: Some(nrf_to_db(estimate.nrf)),
    })
}
