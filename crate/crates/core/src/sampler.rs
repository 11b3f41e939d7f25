//! Seed-deterministic Monte Carlo generation of per-pulse photocounts.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ExperimentConfig;
use crate::rng::{self, Domain};

/// Pulses per independently seeded chunk. Part of the reproducibility contract.
pub const CHUNK_SIZE: usize = 4096;

/// Sums over more thermal modes than this are drawn as one negative binomial.
const DIRECT_SUM_LIMIT: u64 = 32;

/// Detected photoelectrons in one pulse. Whole numbers unless electronic
/// noise was added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub n1: f64,
    pub n2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub records: Vec<PulseRecord>,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub n_pulses: usize,
}

/// Draws a thermal photon number `P(n) = 𝒩ⁿ/(1+𝒩)ⁿ⁺¹` by inverting the
/// geometric CDF with a single uniform.
pub fn sample_thermal<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // ln(𝒩/(1+𝒩)) without cancellation for large 𝒩.
    let ln_ratio = -(1.0 / mean).ln_1p();
    let u = 1.0 - rng.random::<f64>();
    (u.ln() / ln_ratio).floor() as u64
}

/// Total photon number of `modes` independent thermal modes of mean `mean`.
///
/// Small sums add geometric draws; larger ones use the equivalent
/// gamma–Poisson mixture so the cost per pulse does not grow with `modes`.
pub fn sample_thermal_sum<R: Rng + ?Sized>(modes: u64, mean: f64, rng: &mut R) -> u64 {
    if modes == 0 || mean <= 0.0 {
        return 0;
    }
    if modes <= DIRECT_SUM_LIMIT {
        return (0..modes).map(|_| sample_thermal(mean, rng)).sum();
    }
    let intensity = Gamma::new(modes as f64, mean)
        .expect("positive shape and scale")
        .sample(rng);
    sample_poisson(intensity, rng)
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as u64
}

/// Keeps each of `n` photons independently with probability `efficiency`.
fn thin<R: Rng + ?Sized>(n: u64, efficiency: f64, rng: &mut R) -> u64 {
    if n == 0 || efficiency >= 1.0 {
        return n;
    }
    if efficiency <= 0.0 {
        return 0;
    }
    Binomial::new(n, efficiency)
        .expect("efficiency in [0, 1]")
        .sample(rng)
}

/// Pre-noise detected counts for one pulse.
///
/// Arm totals are thinned in one draw; thinning a sum of independent counts
/// has the same law as summing per-mode thinnings.
pub fn sample_counts<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> (u64, u64) {
    let n = config.mean_photons_per_mode;
    let p = config.partition;
    let shared = sample_thermal_sum(p.matched_pairs, n, rng);
    let lone1 = sample_thermal_sum(p.unmatched_signal, n, rng);
    let lone2 = sample_thermal_sum(p.unmatched_idler, n, rng);
    let bg1 = sample_poisson(config.background_signal, rng);
    let bg2 = sample_poisson(config.background_idler, rng);
    (
        thin(shared + lone1 + bg1, config.signal.efficiency, rng),
        thin(shared + lone2 + bg2, config.idler.efficiency, rng),
    )
}

fn add_noise<R: Rng + ?Sized>(
    counts: (u64, u64),
    config: &ExperimentConfig,
    rng: &mut R,
) -> PulseRecord {
    let gaussian = |sigma: f64, rng: &mut R| {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        } else {
            0.0
        }
    };
    PulseRecord {
        n1: counts.0 as f64 + gaussian(config.signal.electronic_noise_rms, rng),
        n2: counts.1 as f64 + gaussian(config.idler.electronic_noise_rms, rng),
    }
}

/// One pulse, drawing photons and electronic noise from the same generator.
pub fn sample_pulse<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> PulseRecord {
    let counts = sample_counts(config, rng);
    add_noise(counts, config, rng)
}

fn simulate_chunk(
    config: &ExperimentConfig,
    seed: u64,
    chunk: usize,
    len: usize,
) -> Vec<PulseRecord> {
    let mut photons = rng::stream(seed, Domain::Photons, chunk as u64);
    let mut noise = rng::stream(seed, Domain::ElectronicNoise, chunk as u64);
    (0..len)
        .map(|_| {
            let counts = sample_counts(config, &mut photons);
            add_noise(counts, config, &mut noise)
        })
        .collect()
}

/// Generates `n_pulses` records.
///
/// Chunk `i` of [`CHUNK_SIZE`] pulses draws photons and electronic noise
/// from their own streams keyed by `(seed, i)`, so the output is identical
/// for any `workers` (0 means all available cores). Photon counts do not
/// depend on the configured electronic noise.
pub fn simulate(
    config: &ExperimentConfig,
    n_pulses: usize,
    seed: u64,
    workers: usize,
) -> Result<SampleSet> {
    config.validate()?;
    if n_pulses == 0 {
        return Err(Error::invalid("pulses", "at least one pulse is required"));
    }
    let chunks: Vec<(usize, usize)> = (0..n_pulses.div_ceil(CHUNK_SIZE))
        .map(|i| (i, CHUNK_SIZE.min(n_pulses - i * CHUNK_SIZE)))
        .collect();
    let parts = run_chunks(&chunks, workers, |&(i, len)| {
        simulate_chunk(config, seed, i, len)
    });
    Ok(SampleSet {
        records: parts.concat(),
        config: *config,
        seed,
        n_pulses,
    })
}

/// Maps `f` over `items` in order, in parallel when the `parallel` feature is on.
pub(crate) fn run_chunks<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers == 1 || items.len() == 1 {
            return items.iter().map(f).collect();
        }
        if workers == 0 {
            return items.par_iter().map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(f).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModePartition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn vacuum_is_always_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_thermal(0.0, &mut rng) == 0));
        let cfg = ExperimentConfig::ideal(ModePartition::new(5, 2, 3).unwrap(), 0.0);
        assert!((0..1000).all(|_| sample_pulse(&cfg, &mut rng) == PulseRecord { n1: 0.0, n2: 0.0 }));
    }

    #[test]
    fn thermal_moments_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_thermal(1.0, &mut rng) as f64)
            .collect();
        let (mean, var) = mean_var(&xs);
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
        assert!((var - 2.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn thermal_g2_is_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_thermal(13.15, &mut rng) as f64)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let fact2 = xs.iter().map(|x| x * (x - 1.0)).sum::<f64>() / n;
        let g2 = fact2 / (mean * mean);
        assert!((g2 - 2.0).abs() < 0.01, "g2 {g2}");
    }

    #[test]
    fn mixture_sum_matches_negative_binomial_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (modes, mean) = (500u64, 3.0);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| sample_thermal_sum(modes, mean, &mut rng) as f64)
            .collect();
        let (m, v) = mean_var(&xs);
        let want_var = modes as f64 * (mean * mean + mean);
        assert!(
            (m - 1500.0).abs() < 4.0 * (want_var / 2e5).sqrt(),
            "mean {m}"
        );
        assert!((v / want_var - 1.0).abs() < 0.02, "var {v} vs {want_var}");
    }

    #[test]
    fn perfect_twins_are_identical() {
        let cfg = ExperimentConfig::ideal(ModePartition::matched(40), 2.0);
        let set = simulate(&cfg, 10_000, 9, 0).unwrap();
        assert!(set.records.iter().all(|r| r.n1 == r.n2));
    }

    #[test]
    fn reference_scale_mean() {
        let cfg = ExperimentConfig::ideal(ModePartition::matched(3750), 13.0);
        let set = simulate(&cfg, 2000, 5, 0).unwrap();
        let mean = set.records.iter().map(|r| r.n1).sum::<f64>() / 2000.0;
        // sd of the mean: sqrt(m·(𝒩²+𝒩)/2000) ≈ 18.5
        assert!((mean - 48_750.0).abs() < 80.0, "{mean}");
    }

    #[test]
    fn determinism_across_workers() {
        let cfg = ExperimentConfig::ideal(ModePartition::new(10, 2, 1).unwrap(), 1.5)
            .with_efficiencies(0.8, 0.6)
            .with_electronic_noise(2.0, 1.0)
            .with_backgrounds(3.0, 0.5);
        let a = simulate(&cfg, 3 * CHUNK_SIZE + 17, 42, 1).unwrap();
        let b = simulate(&cfg, 3 * CHUNK_SIZE + 17, 42, 8).unwrap();
        let c = simulate(&cfg, 3 * CHUNK_SIZE + 17, 42, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.records.len(), a.n_pulses);
        let d = simulate(&cfg, 3 * CHUNK_SIZE + 17, 43, 1).unwrap();
        assert_ne!(a.records, d.records);
    }

    #[test]
    fn noise_does_not_perturb_photon_counts() {
        let quiet =
            ExperimentConfig::ideal(ModePartition::matched(10), 1.0).with_efficiencies(0.9, 0.8);
        let noisy = quiet.with_electronic_noise(5.0, 5.0);
        let a = simulate(&quiet, 5000, 11, 0).unwrap();
        let b = simulate(&noisy, 5000, 11, 0).unwrap();
        let max_dev = a
            .records
            .iter()
            .zip(&b.records)
            .map(|(x, y)| (x.n1 - y.n1).abs().max((x.n2 - y.n2).abs()))
            .fold(0.0, f64::max);
        assert!(max_dev > 0.0 && max_dev < 40.0);
    }

    #[test]
    fn rejects_zero_pulses() {
        let cfg = ExperimentConfig::ideal(ModePartition::matched(1), 1.0);
        assert!(simulate(&cfg, 0, 0, 1).is_err());
    }
}
