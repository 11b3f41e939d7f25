//! Closed-form photon-number statistics for thinned twin beams.
//!
//! Every mode is thermal with mean `𝒩` (`Var = 𝒩² + 𝒩`). A matched pair puts
//! the same photon number into both arms, unmatched modes feed one arm
//! only, backgrounds are Poissonian, and each arm is binomially thinned by
//! its efficiency. Electronic noise is left to the estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ExperimentConfig;

/// Normalized second-order correlations of two beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTriple {
    pub g11: f64,
    pub g22: f64,
    pub g12: f64,
}

impl CorrelationTriple {
    pub fn new(g11: f64, g22: f64, g12: f64) -> Self {
        Self { g11, g22, g12 }
    }

    /// Two-mode squeezed vacuum with `n` photons per beam.
    pub fn squeezed_vacuum(n: f64) -> Self {
        Self::new(2.0, 2.0, 2.0 + 1.0 / n)
    }

    /// `g11 + g22 − 2 g12`, non-negative for classical light.
    pub fn cauchy_schwarz_gap(&self) -> f64 {
        self.g11 + self.g22 - 2.0 * self.g12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classicality {
    ClassicalCompatible,
    Nonclassical,
}

/// Additive pieces of a predicted NRF. They sum to [`NrfReport::nrf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NrfContributions {
    /// Partition noise of the thinning on matched pairs.
    pub loss_term: f64,
    /// Uncompensated fluctuations of unmatched modes.
    pub mismatch_term: f64,
    pub background_term: f64,
    /// Excess thermal noise from unequal efficiencies on matched pairs.
    pub efficiency_imbalance_term: f64,
}

impl NrfContributions {
    pub fn total(&self) -> f64 {
        self.loss_term + self.mismatch_term + self.background_term + self.efficiency_imbalance_term
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// NRF with the detected means it was normalised by.
///
/// Predictions carry `contributions`; Monte Carlo estimates carry a
/// bootstrap `interval` and `standard_error` instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NrfReport {
    pub nrf: f64,
    pub mean_n1: f64,
    pub mean_n2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contributions: Option<NrfContributions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<ConfidenceInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    /// Set when noise subtraction drove the variance negative.
    pub low_signal: bool,
}

impl NrfReport {
    /// `−10·log₁₀ NRF`: positive values are squeezing in dB.
    pub fn squeezing_db(&self) -> f64 {
        nrf_to_db(self.nrf)
    }
}

pub fn nrf_to_db(nrf: f64) -> f64 {
    -10.0 * nrf.log10()
}

/// First and second moments of the detected counts `(N₁, N₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonMoments {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
    pub var_diff: f64,
}

impl PhotonMoments {
    pub fn nrf(&self) -> Result<f64> {
        nrf_from_variance(self.var_diff, self.mean1, self.mean2)
    }

    /// Normally ordered correlations implied by these moments.
    pub fn correlations(&self) -> Result<CorrelationTriple> {
        if self.mean1 <= 0.0 || self.mean2 <= 0.0 {
            return Err(Error::Degenerate(
                "correlations need nonzero means in both arms".into(),
            ));
        }
        Ok(CorrelationTriple {
            g11: 1.0 + (self.var1 - self.mean1) / (self.mean1 * self.mean1),
            g22: 1.0 + (self.var2 - self.mean2) / (self.mean2 * self.mean2),
            g12: 1.0 + self.cov / (self.mean1 * self.mean2),
        })
    }
}

/// `Var(N₁ − N₂) = N²(g11 + g22 − 2 g12) + 2N` for two beams of mean `n`.
pub fn variance_difference(n: f64, g: &CorrelationTriple) -> f64 {
    n * n * g.cauchy_schwarz_gap() + 2.0 * n
}

/// `Var(N₁ − N₂) / (⟨N₁⟩ + ⟨N₂⟩)`, i.e. `Var / 2N` for equal means.
pub fn nrf_from_variance(variance: f64, mean_n1: f64, mean_n2: f64) -> Result<f64> {
    let total = mean_n1 + mean_n2;
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate(format!(
            "NRF undefined for total mean photon number {total}"
        )));
    }
    Ok(variance / total)
}

/// Excess NRF `k(𝒩 + 1)/(m + k)` from `k` unmatched modes per arm next to
/// `m` matched pairs.
pub fn delta_unmatched(matched: u64, unmatched: u64, mean_photons: f64) -> Result<f64> {
    let total = matched + unmatched;
    if total == 0 {
        return Err(Error::invalid("partition", "m + k must be at least 1"));
    }
    Ok(unmatched as f64 * (mean_photons + 1.0) / total as f64)
}

/// Cauchy–Schwarz test: nonclassical iff `g11 + g22 − 2 g12 < 0`.
pub fn classicality_witness(g: &CorrelationTriple) -> Classicality {
    if g.cauchy_schwarz_gap() < 0.0 {
        Classicality::Nonclassical
    } else {
        Classicality::ClassicalCompatible
    }
}

/// Correlations of `m` lossless matched pairs with `𝒩` photons per mode:
/// `g11 = g22 = 1 + 1/m`, `g12 = 1 + (𝒩 + 1)/(m𝒩)`.
pub fn matched_pair_correlations(matched: u64, mean_photons: f64) -> CorrelationTriple {
    let m = matched as f64;
    let auto = 1.0 + 1.0 / m;
    CorrelationTriple::new(auto, auto, 1.0 + (mean_photons + 1.0) / (m * mean_photons))
}

/// Exact detected moments for `config`.
pub fn predicted_moments(config: &ExperimentConfig) -> Result<PhotonMoments> {
    config.validate()?;
    let parts = Components::new(config);
    Ok(PhotonMoments {
        mean1: config.detected_signal_mean(),
        mean2: config.detected_idler_mean(),
        var1: parts.var1,
        var2: parts.var2,
        cov: parts.cov,
        var_diff: parts.var_diff(),
    })
}

/// Predicted NRF with its decomposition.
pub fn nrf_predict(config: &ExperimentConfig) -> Result<NrfReport> {
    config.validate()?;
    let mean_n1 = config.detected_signal_mean();
    let mean_n2 = config.detected_idler_mean();
    let parts = Components::new(config);
    let denom = mean_n1 + mean_n2;
    let nrf = nrf_from_variance(parts.var_diff(), mean_n1, mean_n2)?;
    Ok(NrfReport {
        nrf,
        mean_n1,
        mean_n2,
        contributions: Some(NrfContributions {
            loss_term: parts.loss / denom,
            mismatch_term: parts.mismatch / denom,
            background_term: parts.background / denom,
            efficiency_imbalance_term: parts.imbalance / denom,
        }),
        interval: None,
        standard_error: None,
        low_signal: false,
    })
}

/// Variance budget of the difference count, split by physical origin.
struct Components {
    loss: f64,
    imbalance: f64,
    mismatch: f64,
    background: f64,
    var1: f64,
    var2: f64,
    cov: f64,
}

impl Components {
    fn new(config: &ExperimentConfig) -> Self {
        let n = config.mean_photons_per_mode;
        let thermal_var = n * n + n;
        let (e1, e2) = (config.signal.efficiency, config.idler.efficiency);
        let p = config.partition;
        let m = p.matched_pairs as f64;
        let (ks, ki) = (p.unmatched_signal as f64, p.unmatched_idler as f64);

        // Thinned thermal mode: η²·Var(n) + η(1−η)·⟨n⟩.
        let mode1 = e1 * e1 * thermal_var + e1 * (1.0 - e1) * n;
        let mode2 = e2 * e2 * thermal_var + e2 * (1.0 - e2) * n;
        let bg1 = e1 * config.background_signal;
        let bg2 = e2 * config.background_idler;

        Self {
            loss: m * (e1 * (1.0 - e1) + e2 * (1.0 - e2)) * n,
            imbalance: m * (e1 - e2) * (e1 - e2) * thermal_var,
            mismatch: ks * mode1 + ki * mode2,
            background: bg1 + bg2,
            var1: (m + ks) * mode1 + bg1,
            var2: (m + ki) * mode2 + bg2,
            cov: m * e1 * e2 * thermal_var,
        }
    }

    fn var_diff(&self) -> f64 {
        self.loss + self.imbalance + self.mismatch + self.background
    }
}

/// Brute-force moments: sums the truncated joint photon-number distribution
/// of each mode type through explicitly enumerated binomial thinning, then
/// adds cumulants over independent modes.
///
/// Fails if the thermal or Poisson tail beyond `truncation` exceeds 1e-12.
pub fn enumerate_moments(config: &ExperimentConfig, truncation: usize) -> Result<PhotonMoments> {
    const MAX_TAIL: f64 = 1e-12;
    config.validate()?;
    let (e1, e2) = (config.signal.efficiency, config.idler.efficiency);
    let thin1 = binomial_table(truncation, e1);
    let thin2 = binomial_table(truncation, e2);

    let thermal = thermal_pmf(config.mean_photons_per_mode, truncation);
    check_tail(&thermal, truncation, MAX_TAIL)?;
    let bg1 = poisson_pmf(config.background_signal, truncation);
    check_tail(&bg1, truncation, MAX_TAIL)?;
    let bg2 = poisson_pmf(config.background_idler, truncation);
    check_tail(&bg2, truncation, MAX_TAIL)?;

    let pair = enumerate_mode(&thermal, Some(&thin1), Some(&thin2));
    let lone1 = enumerate_mode(&thermal, Some(&thin1), None);
    let lone2 = enumerate_mode(&thermal, None, Some(&thin2));
    let back1 = enumerate_mode(&bg1, Some(&thin1), None);
    let back2 = enumerate_mode(&bg2, None, Some(&thin2));

    let p = config.partition;
    let terms = [
        (p.matched_pairs as f64, pair),
        (p.unmatched_signal as f64, lone1),
        (p.unmatched_idler as f64, lone2),
        (1.0, back1),
        (1.0, back2),
    ];
    let mut total = PhotonMoments {
        mean1: 0.0,
        mean2: 0.0,
        var1: 0.0,
        var2: 0.0,
        cov: 0.0,
        var_diff: 0.0,
    };
    for (count, mode) in terms {
        total.mean1 += count * mode.mean1;
        total.mean2 += count * mode.mean2;
        total.var1 += count * mode.var1;
        total.var2 += count * mode.var2;
        total.cov += count * mode.cov;
        total.var_diff += count * mode.var_diff;
    }
    Ok(total)
}

/// Moments of one mode feeding arm 1, arm 2 or both with the same photon number.
fn enumerate_mode(
    pmf: &[f64],
    thin1: Option<&[Vec<f64>]>,
    thin2: Option<&[Vec<f64>]>,
) -> PhotonMoments {
    let (mut s1, mut s2, mut sq1, mut sq2, mut cross, mut d, mut dsq) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (n, &weight) in pmf.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let (a1, b1) = thin1.map_or((0.0, 0.0), |t| raw_moments(&t[n]));
        let (a2, b2) = thin2.map_or((0.0, 0.0), |t| raw_moments(&t[n]));
        s1 += weight * a1;
        s2 += weight * a2;
        sq1 += weight * b1;
        sq2 += weight * b2;
        // Given n the two thinnings are independent.
        cross += weight * a1 * a2;
        d += weight * (a1 - a2);
        dsq += weight * (b1 + b2 - 2.0 * a1 * a2);
    }
    PhotonMoments {
        mean1: s1,
        mean2: s2,
        var1: sq1 - s1 * s1,
        var2: sq2 - s2 * s2,
        cov: cross - s1 * s2,
        var_diff: dsq - d * d,
    }
}

/// `(Σ j·p_j, Σ j²·p_j)`.
fn raw_moments(row: &[f64]) -> (f64, f64) {
    row.iter().enumerate().fold((0.0, 0.0), |(a, b), (j, &p)| {
        let j = j as f64;
        (a + j * p, b + j * j * p)
    })
}

/// Rows `0..=max_n` of binomial pmfs built by the Pascal recursion.
fn binomial_table(max_n: usize, p: f64) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(max_n + 1);
    rows.push(vec![1.0]);
    for n in 1..=max_n {
        let prev: &Vec<f64> = &rows[n - 1];
        let mut row = vec![0.0; n + 1];
        for (j, &q) in prev.iter().enumerate() {
            row[j] += (1.0 - p) * q;
            row[j + 1] += p * q;
        }
        rows.push(row);
    }
    rows
}

fn thermal_pmf(mean: f64, max_n: usize) -> Vec<f64> {
    let ratio = mean / (1.0 + mean);
    let mut p = 1.0 / (1.0 + mean);
    (0..=max_n)
        .map(|_| {
            let out = p;
            p *= ratio;
            out
        })
        .collect()
}

fn poisson_pmf(mean: f64, max_n: usize) -> Vec<f64> {
    let mut p = (-mean).exp();
    (0..=max_n)
        .map(|n| {
            let out = p;
            p *= mean / (n + 1) as f64;
            out
        })
        .collect()
}

fn check_tail(pmf: &[f64], truncation: usize, max_tail: f64) -> Result<()> {
    let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
    if tail > max_tail {
        return Err(Error::Truncation { truncation, tail });
    }
    Ok(())
}
