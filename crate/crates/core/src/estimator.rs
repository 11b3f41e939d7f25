//! Sample statistics of pulse records: moments, normally ordered `g⁽²⁾`,
//! and the NRF with electronic-noise subtraction and a percentile
//! bootstrap interval.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{ConfidenceInterval, CorrelationTriple, NrfReport};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::sampler::{run_chunks, PulseRecord, SampleSet};

/// Records needed before a bootstrap interval is attempted.
pub const MIN_RECORDS_FOR_INTERVAL: usize = 100;

/// Unbiased (divisor `n − 1`) sample moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
    pub var_diff: f64,
}

pub fn moments(samples: &SampleSet) -> Result<MomentSummary> {
    moments_of(&samples.records)
}

pub fn moments_of(records: &[PulseRecord]) -> Result<MomentSummary> {
    if records.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 records, got {}",
            records.len()
        )));
    }
    let n = records.len() as f64;
    let mean1 = records.iter().map(|r| r.n1).sum::<f64>() / n;
    let mean2 = records.iter().map(|r| r.n2).sum::<f64>() / n;
    let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
    for r in records {
        let (a, b) = (r.n1 - mean1, r.n2 - mean2);
        s11 += a * a;
        s22 += b * b;
        s12 += a * b;
    }
    let (var1, var2, cov) = (s11 / (n - 1.0), s22 / (n - 1.0), s12 / (n - 1.0));
    Ok(MomentSummary {
        mean1,
        mean2,
        var1,
        var2,
        cov,
        var_diff: var1 + var2 - 2.0 * cov,
    })
}

/// `g11 = ⟨N₁² − N₁⟩/⟨N₁⟩²`, `g22` likewise, `g12 = ⟨N₁N₂⟩/(⟨N₁⟩⟨N₂⟩)`,
/// with plain sample averages.
pub fn g2_estimates(samples: &SampleSet) -> Result<CorrelationTriple> {
    let m = moments_of(&samples.records)?;
    let n = samples.records.len() as f64;
    if m.mean1 == 0.0 || m.mean2 == 0.0 {
        return Err(Error::Degenerate(
            "g2 needs nonzero means in both channels".into(),
        ));
    }
    // Back to divisor n so the averages are plain plug-in moments.
    let shrink = (n - 1.0) / n;
    Ok(CorrelationTriple {
        g11: 1.0 + (m.var1 * shrink - m.mean1) / (m.mean1 * m.mean1),
        g22: 1.0 + (m.var2 * shrink - m.mean2) / (m.mean2 * m.mean2),
        g12: 1.0 + m.cov * shrink / (m.mean1 * m.mean2),
    })
}

/// Electronic pedestal and noise measured on pulses with no light.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkCalibration {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    /// Variance of the dark difference signal, including any correlated noise.
    pub var_diff: f64,
}

impl DarkCalibration {
    pub fn sigma1(&self) -> f64 {
        self.var1.max(0.0).sqrt()
    }

    pub fn sigma2(&self) -> f64 {
        self.var2.max(0.0).sqrt()
    }
}

/// Estimates the electronic noise from a dark run.
pub fn estimate_dark_noise(dark: &SampleSet) -> Result<DarkCalibration> {
    let m = moments(dark)?;
    Ok(DarkCalibration {
        mean1: m.mean1,
        mean2: m.mean2,
        var1: m.var1,
        var2: m.var2,
        var_diff: m.var_diff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSubtraction {
    Off,
    /// Subtract `σ₁² + σ₂²` from the configuration that generated the data.
    Configured,
    /// Subtract pedestal and difference-noise variance measured on a dark run.
    Calibrated(DarkCalibration),
}

impl NoiseSubtraction {
    fn offsets(&self, samples: &SampleSet) -> (f64, f64, f64) {
        match self {
            NoiseSubtraction::Off => (0.0, 0.0, 0.0),
            NoiseSubtraction::Configured => {
                let (s1, s2) = (
                    samples.config.signal.electronic_noise_rms,
                    samples.config.idler.electronic_noise_rms,
                );
                (s1 * s1 + s2 * s2, 0.0, 0.0)
            }
            NoiseSubtraction::Calibrated(dark) => (dark.var_diff, dark.mean1, dark.mean2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            resamples: 1000,
            level: 0.95,
            seed: 0,
            workers: 0,
        }
    }
}

/// NRF with default bootstrap settings, seeded from the sample set.
pub fn nrf_estimate(samples: &SampleSet, subtract_noise: bool) -> Result<NrfReport> {
    let subtraction = if subtract_noise {
        NoiseSubtraction::Configured
    } else {
        NoiseSubtraction::Off
    };
    let options = BootstrapOptions {
        seed: samples.seed,
        ..BootstrapOptions::default()
    };
    nrf_estimate_with(samples, subtraction, &options)
}

/// `(Var(N₁ − N₂) − noise) / (⟨N₁⟩ + ⟨N₂⟩)`.
///
/// A negative numerator is kept and flagged as `low_signal`. The interval
/// is a percentile bootstrap over whole pulses, omitted below
/// [`MIN_RECORDS_FOR_INTERVAL`] records.
pub fn nrf_estimate_with(
    samples: &SampleSet,
    subtraction: NoiseSubtraction,
    options: &BootstrapOptions,
) -> Result<NrfReport> {
    let records = &samples.records;
    let summary = moments_of(records)?;
    let (noise_var, pedestal1, pedestal2) = subtraction.offsets(samples);
    let mean_n1 = summary.mean1 - pedestal1;
    let mean_n2 = summary.mean2 - pedestal2;
    let numerator = summary.var_diff - noise_var;
    let nrf = ratio(numerator, mean_n1 + mean_n2)?;

    let mut report = NrfReport {
        nrf,
        mean_n1,
        mean_n2,
        contributions: None,
        interval: None,
        standard_error: None,
        low_signal: numerator < 0.0,
    };
    if records.len() < MIN_RECORDS_FOR_INTERVAL || options.resamples < 2 {
        return Ok(report);
    }
    if !(options.level > 0.0 && options.level < 1.0) {
        return Err(Error::invalid(
            "level",
            format!("must lie in (0, 1), got {}", options.level),
        ));
    }

    // Shift by the full-sample means so resampled sums of squares stay well conditioned.
    let centred: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.n1 - r.n2 - (summary.mean1 - summary.mean2), r.n1 + r.n2))
        .collect();
    let pedestal = pedestal1 + pedestal2;
    let indices: Vec<u64> = (0..options.resamples as u64).collect();
    let mut replicates = run_chunks(&indices, options.workers, |&b| {
        let mut rng = rng::stream(options.seed, Domain::Bootstrap, b);
        let n = centred.len();
        let (mut sd, mut sdd, mut ssum) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (d, s) = centred[rng.random_range(0..n)];
            sd += d;
            sdd += d * d;
            ssum += s;
        }
        let nf = n as f64;
        let var_diff = (sdd - sd * sd / nf) / (nf - 1.0);
        (var_diff - noise_var) / (ssum / nf - pedestal)
    });
    replicates.sort_by(f64::total_cmp);

    let alpha = 0.5 * (1.0 - options.level);
    report.interval = Some(ConfidenceInterval {
        lo: quantile(&replicates, alpha),
        hi: quantile(&replicates, 1.0 - alpha),
        level: options.level,
    });
    let b = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / b;
    report.standard_error =
        Some((replicates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0)).sqrt());
    Ok(report)
}

fn ratio(numerator: f64, denominator: f64) -> Result<f64> {
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::Degenerate(format!(
            "NRF undefined for total mean {denominator}"
        )));
    }
    Ok(numerator / denominator)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExperimentConfig, ModePartition};
    use approx::assert_relative_eq;

    fn set_of(pairs: &[(f64, f64)]) -> SampleSet {
        SampleSet {
            records: pairs
                .iter()
                .map(|&(n1, n2)| PulseRecord { n1, n2 })
                .collect(),
            config: ExperimentConfig::ideal(ModePartition::matched(1), 1.0),
            seed: 0,
            n_pulses: pairs.len(),
        }
    }

    #[test]
    fn constant_twins_have_no_difference_variance() {
        let m = moments(&set_of(&[(3.0, 3.0), (7.0, 7.0), (1.0, 1.0)])).unwrap();
        assert_eq!(m.var_diff, 0.0);
    }

    #[test]
    fn hand_computed_pair() {
        let m = moments(&set_of(&[(0.0, 1.0), (1.0, 0.0)])).unwrap();
        assert_relative_eq!(m.var_diff, 2.0);
        assert_relative_eq!(m.var1, 0.5);
        assert_relative_eq!(m.cov, -0.5);
    }

    #[test]
    fn too_few_records() {
        assert!(moments(&set_of(&[(1.0, 1.0)])).is_err());
    }

    #[test]
    fn g2_rejects_dark_channel() {
        assert!(g2_estimates(&set_of(&[(0.0, 1.0), (0.0, 2.0)])).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.0);
        assert_relative_eq!(quantile(&xs, 0.1), 0.4);
    }

    #[test]
    fn ideal_twins_give_degenerate_zero_interval() {
        let cfg = ExperimentConfig::ideal(ModePartition::matched(20), 1.0);
        let set = crate::sampler::simulate(&cfg, 2000, 3, 0).unwrap();
        let report = nrf_estimate(&set, false).unwrap();
        assert_eq!(report.nrf, 0.0);
        let ci = report.interval.unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 0.0));
    }

    #[test]
    fn small_sets_skip_interval() {
        let report = nrf_estimate(&set_of(&[(0.0, 1.0), (1.0, 0.0), (2.0, 2.0)]), false).unwrap();
        assert!(report.interval.is_none());
    }

    #[test]
    fn negative_numerator_is_flagged_not_clamped() {
        let mut set = set_of(&[(10.0, 10.0), (11.0, 11.0), (12.0, 12.0)]);
        set.config = set.config.with_electronic_noise(3.0, 0.0);
        let report = nrf_estimate(&set, true).unwrap();
        assert!(report.low_signal);
        assert!(report.nrf < 0.0);
    }

    #[test]
    fn bootstrap_is_seed_deterministic_across_workers() {
        let cfg =
            ExperimentConfig::ideal(ModePartition::matched(10), 1.0).with_efficiencies(0.8, 0.8);
        let set = crate::sampler::simulate(&cfg, 3000, 1, 0).unwrap();
        let opts = |workers| BootstrapOptions {
            resamples: 300,
            seed: 5,
            workers,
            ..Default::default()
        };
        let a = nrf_estimate_with(&set, NoiseSubtraction::Off, &opts(1)).unwrap();
        let b = nrf_estimate_with(&set, NoiseSubtraction::Off, &opts(4)).unwrap();
        assert_eq!(a, b);
    }
}
