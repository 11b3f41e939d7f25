//! Browser bindings for the interactive page in `www/`.
//!
//! Each operation has a plain Rust form returning JSON (tested natively)
//! and a `#[wasm_bindgen]` wrapper that turns errors into JS exceptions.

use serde::Serialize;
use twinbeam::analytic::nrf_predict;
use twinbeam::estimator::{nrf_estimate_with, BootstrapOptions, NoiseSubtraction};
use twinbeam::model::{matched_signal_diameter, mode_partition, OpticalGeometry};
use twinbeam::{simulate, ExperimentConfig, ModePartition};
use wasm_bindgen::prelude::*;

/// Pulse-count ceiling that keeps one click under a second in the browser.
pub const MAX_PULSES: usize = 50_000;
const SCATTER_POINTS: usize = 1500;

#[derive(Debug, Serialize)]
struct AperturePoint {
    signal_mm: f64,
    nrf: f64,
    m: u64,
    k_s: u64,
    k_i: u64,
}

#[derive(Debug, Serialize)]
struct ApertureCurve {
    matched_mm: f64,
    points: Vec<AperturePoint>,
}

#[derive(Debug, Serialize)]
struct PhotonPoint {
    mean_photons: f64,
    nrf: f64,
    loss: f64,
    mismatch: f64,
    imbalance: f64,
}

#[derive(Debug, Serialize)]
struct PhotonCurve {
    m: u64,
    k_s: u64,
    k_i: u64,
    /// Asymptotic slope `k/(m + k)` from the unmatched modes alone.
    mismatch_slope: f64,
    points: Vec<PhotonPoint>,
}

#[derive(Debug, Serialize)]
struct Scatter {
    predicted: f64,
    nrf: f64,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    mean_n1: f64,
    mean_n2: f64,
    points: Vec<[f64; 2]>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn geometry(idler_diameter_mm: f64, displacement_mm: f64) -> Result<OpticalGeometry, String> {
    let mut g = OpticalGeometry {
        idler_aperture_diameter: idler_diameter_mm,
        idler_displacement: displacement_mm,
        ..OpticalGeometry::reference()
    };
    g.signal_aperture_diameter =
        matched_signal_diameter(idler_diameter_mm, &g).map_err(|e| e.to_string())?;
    g.validate().map_err(|e| e.to_string())?;
    Ok(g)
}

/// Closed-form NRF as the signal aperture is swept across the matched
/// diameter with the idler aperture held fixed.
pub fn aperture_curve_json(
    idler_diameter_mm: f64,
    displacement_mm: f64,
    mean_photons: f64,
    eta_signal: f64,
    eta_idler: f64,
) -> Result<String, String> {
    let base = geometry(idler_diameter_mm, displacement_mm)?;
    let matched = base.signal_aperture_diameter;
    let points = (0..=60)
        .map(|i| {
            let signal_mm = matched * (0.4 + 0.02 * f64::from(i));
            let g = OpticalGeometry {
                signal_aperture_diameter: signal_mm,
                ..base
            };
            let partition = mode_partition(&g).map_err(|e| e.to_string())?;
            let cfg = ExperimentConfig::ideal(partition, mean_photons)
                .with_efficiencies(eta_signal, eta_idler);
            let nrf = nrf_predict(&cfg).map_err(|e| e.to_string())?.nrf;
            Ok(AperturePoint {
                signal_mm,
                nrf,
                m: partition.matched_pairs,
                k_s: partition.unmatched_signal,
                k_i: partition.unmatched_idler,
            })
        })
        .collect::<Result<_, String>>()?;
    to_json(&ApertureCurve {
        matched_mm: matched,
        points,
    })
}

/// Closed-form NRF and its breakdown against mean photons per mode for the
/// reference apertures with the idler aperture shifted.
pub fn photon_curve_json(
    displacement_mm: f64,
    eta_signal: f64,
    eta_idler: f64,
    max_mean_photons: f64,
) -> Result<String, String> {
    if !(max_mean_photons.is_finite() && max_mean_photons > 0.0) {
        return Err("max_mean_photons must be positive".into());
    }
    let g = geometry(
        OpticalGeometry::reference().idler_aperture_diameter,
        displacement_mm,
    )?;
    let partition = mode_partition(&g).map_err(|e| e.to_string())?;
    let points = (1..=50)
        .map(|i| {
            let mean_photons = max_mean_photons * f64::from(i) / 50.0;
            let cfg = ExperimentConfig::ideal(partition, mean_photons)
                .with_efficiencies(eta_signal, eta_idler);
            let report = nrf_predict(&cfg).map_err(|e| e.to_string())?;
            let parts = report.contributions.ok_or("prediction has no breakdown")?;
            Ok(PhotonPoint {
                mean_photons,
                nrf: report.nrf,
                loss: parts.loss_term,
                mismatch: parts.mismatch_term,
                imbalance: parts.efficiency_imbalance_term,
            })
        })
        .collect::<Result<_, String>>()?;
    let k = 0.5 * (partition.unmatched_signal + partition.unmatched_idler) as f64;
    to_json(&PhotonCurve {
        m: partition.matched_pairs,
        k_s: partition.unmatched_signal,
        k_i: partition.unmatched_idler,
        mismatch_slope: k / (partition.matched_pairs as f64 + k),
        points,
    })
}

/// Monte Carlo run: a thinned scatter of `(n1, n2)` plus the NRF estimate
/// and its bootstrap interval.
pub fn simulate_scatter_json(
    matched: u32,
    unmatched: u32,
    mean_photons: f64,
    eta_signal: f64,
    eta_idler: f64,
    pulses: u32,
    seed: u32,
) -> Result<String, String> {
    let pulses = pulses as usize;
    if !(2..=MAX_PULSES).contains(&pulses) {
        return Err(format!("pulses must lie in 2..={MAX_PULSES}"));
    }
    let partition = ModePartition::new(matched.into(), unmatched.into(), unmatched.into())
        .map_err(|e| e.to_string())?;
    let cfg =
        ExperimentConfig::ideal(partition, mean_photons).with_efficiencies(eta_signal, eta_idler);
    let predicted = nrf_predict(&cfg).map_err(|e| e.to_string())?.nrf;
    let set = simulate(&cfg, pulses, seed.into(), 1).map_err(|e| e.to_string())?;
    let options = BootstrapOptions {
        seed: seed.into(),
        workers: 1,
        ..BootstrapOptions::default()
    };
    let report =
        nrf_estimate_with(&set, NoiseSubtraction::Off, &options).map_err(|e| e.to_string())?;
    let stride = pulses.div_ceil(SCATTER_POINTS);
    to_json(&Scatter {
        predicted,
        nrf: report.nrf,
        ci_lo: report.interval.map(|ci| ci.lo),
        ci_hi: report.interval.map(|ci| ci.hi),
        mean_n1: report.mean_n1,
        mean_n2: report.mean_n2,
        points: set
            .records
            .iter()
            .step_by(stride)
            .map(|r| [r.n1, r.n2])
            .collect(),
    })
}

#[wasm_bindgen]
pub fn aperture_curve(
    idler_diameter_mm: f64,
    displacement_mm: f64,
    mean_photons: f64,
    eta_signal: f64,
    eta_idler: f64,
) -> Result<String, JsError> {
    aperture_curve_json(
        idler_diameter_mm,
        displacement_mm,
        mean_photons,
        eta_signal,
        eta_idler,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn photon_curve(
    displacement_mm: f64,
    eta_signal: f64,
    eta_idler: f64,
    max_mean_photons: f64,
) -> Result<String, JsError> {
    photon_curve_json(displacement_mm, eta_signal, eta_idler, max_mean_photons)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_scatter(
    matched: u32,
    unmatched: u32,
    mean_photons: f64,
    eta_signal: f64,
    eta_idler: f64,
    pulses: u32,
    seed: u32,
) -> Result<String, JsError> {
    simulate_scatter_json(
        matched,
        unmatched,
        mean_photons,
        eta_signal,
        eta_idler,
        pulses,
        seed,
    )
    .map_err(|e| JsError::new(&e))
}
