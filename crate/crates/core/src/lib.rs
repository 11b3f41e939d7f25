//! Multimode twin-beam squeezing: a Monte Carlo simulator for per-pulse
//! signal/idler photocounts and the closed-form noise reduction factor
//! (NRF) it should reproduce.
//!
//! * [`model`]: aperture geometry, mode budget, channels, gain law.
//! * [`analytic`]: exact moments, NRF prediction and an enumeration oracle.
//! * [`sampler`]: seed-deterministic, chunk-parallel pulse generation.
//! * [`estimator`]: sample moments, `g⁽²⁾`, NRF with bootstrap intervals.
//! * [`gainfit`]: calibrating the gain coefficient from pump-power data.
//! * [`scenario`]: sweeps pairing prediction and simulation.

pub mod analytic;
pub mod config;
pub mod error;
pub mod estimator;
pub mod gainfit;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod scenario;

pub use analytic::{nrf_predict, CorrelationTriple, NrfReport};
pub use error::{Error, Result};
pub use model::{DetectionChannel, ExperimentConfig, ModePartition, OpticalGeometry};
pub use sampler::{simulate, PulseRecord, SampleSet};
