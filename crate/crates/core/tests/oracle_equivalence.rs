//! The closed-form moments against brute-force enumeration of the
//! per-mode joint photon-number distribution.

use approx::assert_relative_eq;
use proptest::prelude::*;
use twinbeam::analytic::{
    classicality_witness, delta_unmatched, enumerate_moments, nrf_predict, predicted_moments,
    Classicality,
};
use twinbeam::{ExperimentConfig, ModePartition};

const TRUNCATION: usize = 250;

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        0u64..=10,
        0u64..=4,
        0u64..=4,
        0.0f64..=3.0,
        0.0f64..=1.0,
        0.0f64..=1.0,
        0.0f64..3.0,
        0.0f64..3.0,
    )
        .prop_filter("needs a mode", |t| t.0 + t.1.max(t.2) > 0)
        .prop_map(|(m, ks, ki, n, e1, e2, b1, b2)| {
            ExperimentConfig::ideal(ModePartition::new(m, ks, ki).unwrap(), n)
                .with_efficiencies(e1, e2)
                .with_backgrounds(b1, b2)
        })
        .prop_filter("needs light", |c| {
            c.detected_signal_mean() + c.detected_idler_mean() > 1e-6
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prediction_matches_enumeration(cfg in config_strategy()) {
        let exact = predicted_moments(&cfg).unwrap();
        let brute = enumerate_moments(&cfg, TRUNCATION).unwrap();
        for (a, b) in [
            (exact.mean1, brute.mean1),
            (exact.mean2, brute.mean2),
            (exact.var1, brute.var1),
            (exact.var2, brute.var2),
            (exact.cov, brute.cov),
            (exact.var_diff, brute.var_diff),
        ] {
            prop_assert!(rel_err(a, b) < 1e-9 || (a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let nrf = nrf_predict(&cfg).unwrap().nrf;
        prop_assert!(rel_err(nrf, brute.nrf().unwrap()) < 1e-9 || nrf.abs() < 1e-12);
    }

    #[test]
    fn symmetric_under_label_exchange(cfg in config_strategy()) {
        let a = nrf_predict(&cfg).unwrap();
        let b = nrf_predict(&cfg.swapped()).unwrap();
        prop_assert!(rel_err(a.nrf, b.nrf) < 1e-12);
        prop_assert_eq!(a.mean_n1, b.mean_n2);
    }

    #[test]
    fn lossless_mismatch_adds_delta(m in 0u64..5000, k in 0u64..500, n in 0.01f64..1000.0) {
        prop_assume!(m + k > 0);
        let baseline = nrf_predict(&ExperimentConfig::ideal(ModePartition::matched(m.max(1)), n)).unwrap().nrf;
        prop_assert_eq!(baseline, 0.0);
        let cfg = ExperimentConfig::ideal(ModePartition::new(m, k, k).unwrap(), n);
        let nrf = nrf_predict(&cfg).unwrap().nrf;
        let delta = delta_unmatched(m, k, n).unwrap();
        prop_assert!((nrf - baseline - delta).abs() <= 1e-12 * (1.0 + delta));
    }

    #[test]
    fn independent_sources_are_classical(ks in 1u64..50, ki in 1u64..50, n in 0.01f64..50.0,
                                         e1 in 0.05f64..=1.0, e2 in 0.05f64..=1.0, b1 in 0.0f64..10.0, b2 in 0.0f64..10.0) {
        let cfg = ExperimentConfig::ideal(ModePartition::new(0, ks, ki).unwrap(), n)
            .with_efficiencies(e1, e2)
            .with_backgrounds(b1, b2);
        let g = predicted_moments(&cfg).unwrap().correlations().unwrap();
        prop_assert_eq!(classicality_witness(&g), Classicality::ClassicalCompatible);
    }

    #[test]
    fn contributions_always_sum(cfg in config_strategy()) {
        let r = nrf_predict(&cfg).unwrap();
        prop_assert!((r.contributions.unwrap().total() - r.nrf).abs() <= 1e-12 * (1.0 + r.nrf));
    }
}

#[test]
fn thermal_arms_reach_n_plus_one_for_any_k() {
    for k in [1u64, 10, 100, 1000] {
        let cfg = ExperimentConfig::ideal(ModePartition::new(0, k, k).unwrap(), 1.0);
        assert_relative_eq!(nrf_predict(&cfg).unwrap().nrf, 2.0, max_relative = 1e-12);
    }
}

#[test]
fn lossy_matched_pair_from_enumeration() {
    let cfg = ExperimentConfig::ideal(ModePartition::matched(1), 1.0).with_efficiencies(0.7, 0.7);
    assert_relative_eq!(
        enumerate_moments(&cfg, 120).unwrap().nrf().unwrap(),
        0.30,
        max_relative = 1e-10
    );
}
