use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use twinbeam::analytic::{
    classicality_witness, nrf_to_db, predicted_moments, Classicality, CorrelationTriple,
};
use twinbeam::config::ConfigFile;
use twinbeam::estimator::{g2_estimates, nrf_estimate_with, BootstrapOptions, NoiseSubtraction};
use twinbeam::gainfit::{fit_gain_curve_weighted, FitWarning, PowerPoint, Weighting};
use twinbeam::model::{gain_to_mean_photons, mean_photons_to_gain};
use twinbeam::scenario::{run_scenario, RunOptions, ScenarioFile};
use twinbeam::{nrf_predict, simulate as run_simulation, ModePartition, NrfReport};

const DEFAULT_PULSES: usize = 100_000;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input; exit code 2.
    Config(String),
    /// Valid input that could not be evaluated, or an output failure; exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl From<twinbeam::Error> for CliError {
    fn from(err: twinbeam::Error) -> Self {
        match err {
            twinbeam::Error::Invalid { .. } => CliError::Config(err.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Copy)]
pub struct RunFlags {
    pub pulses: Option<usize>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub subtract_noise: bool,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            CliError::Config(format!("{}: {inner}", path.display()))
        } else {
            CliError::Config(format!("{}: field `{field}`: {inner}", path.display()))
        }
    })
}

fn open_output(out: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            CliError::Runtime(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Serialize)]
struct Modes {
    matched_pairs: u64,
    unmatched_signal: u64,
    unmatched_idler: u64,
}

impl From<ModePartition> for Modes {
    fn from(p: ModePartition) -> Self {
        Self {
            matched_pairs: p.matched_pairs,
            unmatched_signal: p.unmatched_signal,
            unmatched_idler: p.unmatched_idler,
        }
    }
}

#[derive(Serialize)]
struct Prediction {
    modes: Modes,
    mean_photons_per_mode: f64,
    gain: f64,
    nrf: f64,
    nrf_db: f64,
    report: NrfReport,
    correlations: Option<CorrelationTriple>,
    classicality: Option<Classicality>,
}

pub fn predict(config: &Path, out: Option<&Path>) -> CliResult {
    let resolved = read_json::<ConfigFile>(config)?.resolve()?;
    let cfg = resolved.config;
    let report = nrf_predict(&cfg)?;
    let correlations = predicted_moments(&cfg)?.correlations().ok();
    let prediction = Prediction {
        modes: cfg.partition.into(),
        mean_photons_per_mode: cfg.mean_photons_per_mode,
        gain: mean_photons_to_gain(cfg.mean_photons_per_mode)?,
        nrf: report.nrf,
        nrf_db: nrf_to_db(report.nrf),
        report,
        correlations,
        classicality: correlations.as_ref().map(classicality_witness),
    };
    write_json(&prediction, out)
}

#[derive(Serialize)]
struct SimulationSummary {
    n_pulses: usize,
    seed: u64,
    noise_subtracted: bool,
    nrf: f64,
    nrf_db: f64,
    nrf_predicted: f64,
    estimate: NrfReport,
    correlations: Option<CorrelationTriple>,
}

pub fn simulate(
    config: &Path,
    out: Option<&Path>,
    records: Option<&Path>,
    flags: RunFlags,
) -> CliResult {
    let cfg = read_json::<ConfigFile>(config)?.resolve()?.config;
    let n_pulses = flags.pulses.unwrap_or(DEFAULT_PULSES);
    let seed = flags.seed.unwrap_or(0);
    let predicted = nrf_predict(&cfg)?.nrf;
    let set = run_simulation(&cfg, n_pulses, seed, flags.workers)?;
    let subtraction = if flags.subtract_noise {
        NoiseSubtraction::Configured
    } else {
        NoiseSubtraction::Off
    };
    let options = BootstrapOptions {
        seed,
        workers: flags.workers,
        ..BootstrapOptions::default()
    };
    let estimate = nrf_estimate_with(&set, subtraction, &options)?;

    if let Some(path) = records {
        let file = File::create(path)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        for record in &set.records {
            w.serialize(record)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let summary = SimulationSummary {
        n_pulses,
        seed,
        noise_subtracted: flags.subtract_noise,
        nrf: estimate.nrf,
        nrf_db: nrf_to_db(estimate.nrf),
        nrf_predicted: predicted,
        estimate,
        correlations: g2_estimates(&set).ok(),
    };
    write_json(&summary, out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRow {
    power: f64,
    photons: f64,
    #[serde(default)]
    weight: Option<f64>,
}

#[derive(Serialize)]
struct FittedPoint {
    power: f64,
    photons: f64,
    gain: f64,
    mean_photons_per_mode: f64,
}

#[derive(Serialize)]
struct FitOutput {
    gain_coefficient: f64,
    residual_norm: f64,
    modes: u64,
    background_slope: f64,
    weighting: Weighting,
    warnings: Vec<FitWarning>,
    points: Vec<FittedPoint>,
}

fn read_points(path: &Path) -> CliResult<Vec<PowerPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for required in ["power", "photons"] {
        if !headers.iter().any(|h| h == required) {
            return Err(CliError::Config(format!(
                "{}: missing column `{required}`",
                path.display()
            )));
        }
    }
    let mut points = Vec::new();
    for row in reader.deserialize::<PointRow>() {
        let row = row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        points.push(PowerPoint {
            pump_power: row.power,
            mean_photons: row.photons,
            weight: row.weight,
        });
    }
    Ok(points)
}

pub fn fit(
    points: &Path,
    modes: u64,
    background_slope: f64,
    weighting: Weighting,
    out: Option<&Path>,
) -> CliResult {
    let data = read_points(points)?;
    let fit = fit_gain_curve_weighted(&data, modes, background_slope, weighting)?;
    let points = data
        .iter()
        .zip(&fit.gains)
        .map(|(p, &gain)| {
            Ok(FittedPoint {
                power: p.pump_power,
                photons: p.mean_photons,
                gain,
                mean_photons_per_mode: gain_to_mean_photons(gain)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let output = FitOutput {
        gain_coefficient: fit.gain_coefficient,
        residual_norm: fit.residual_norm,
        modes,
        background_slope,
        weighting,
        warnings: fit.warnings,
        points,
    };
    write_json(&output, out)
}

pub fn scenario(path: &Path, out: Option<&Path>, flags: RunFlags) -> CliResult {
    let mut spec = read_json::<ScenarioFile>(path)?.resolve()?;
    if let Some(pulses) = flags.pulses {
        if pulses < 2 {
            return Err(CliError::Config("`--pulses` must be at least 2".into()));
        }
        spec.pulses_per_point = pulses;
    }
    if let Some(seed) = flags.seed {
        spec.seed = seed;
    }
    let options = RunOptions {
        workers: flags.workers,
        subtract_noise: flags.subtract_noise,
        ..RunOptions::default()
    };
    let rows = run_scenario(&spec, &options);
    let mut w = csv::Writer::from_writer(open_output(out)?);
    for row in &rows {
        w.serialize(row)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}
