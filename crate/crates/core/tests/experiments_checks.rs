use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rwsre::environment::{DisorderSpec, KernelKind};
use rwsre::experiments::{
    annealed_transience_check, classify, regime_scan, tau_mean_lower_bound, verify_key_relation,
    KeyRelationConfig, Outcome, Regime, ScanConfig, TauMeanConfig, TransienceConfig,
};
use rwsre::pinning::CriticalSearch;

#[test]
fn key_relation_random_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut passes = 0;
    let mut lines = Vec::new();
    for i in 0..20u64 {
        let disorder = match i % 3 {
            0 => DisorderSpec::gaussian(rng.random_range(0.5..1.5)).unwrap(),
            1 => DisorderSpec::Rademacher,
            _ => DisorderSpec::uniform_centered(rng.random_range(0.5..2.0)).unwrap(),
        };
        let kernel = if i % 2 == 0 {
            KernelKind::PowerLaw {
                alpha: rng.random_range(0.3..2.0),
                n_max: rng.random_range(2..=12),
            }
        } else {
            KernelKind::Geometric {
                q: rng.random_range(0.2..0.8),
                n_max: rng.random_range(2..=12),
            }
        };
        let beta = rng.random_range(0.0..1.5);
        // keep the annealed model delocalized so every positive drift gives a finite sum
        let h = -disorder.log_mgf(beta) - rng.random_range(0.2..1.5);
        let config = KeyRelationConfig {
            kernel,
            disorder,
            beta,
            h,
            f: rng.random_range(0.3..1.0),
            tau_replicas: 200,
            walk_replicas: 200,
            seed: 500 + i,
            ..KeyRelationConfig::default()
        };
        let report = verify_key_relation(&config).unwrap();
        lines.push(format!(
            "{i}: {:?} |d|={:.3e} tol={:.3e}",
            report.outcome, report.difference, report.tolerance
        ));
        assert_ne!(
            report.outcome,
            Outcome::Inconclusive,
            "{}",
            lines.last().unwrap()
        );
        assert!(report.lhs_truncation >= 0.0);
        if report.outcome == Outcome::Pass {
            passes += 1;
        }
    }
    assert!(passes >= 19, "{}", lines.join("\n"));
}

#[test]
fn key_relation_report_is_reproducible() {
    let config = KeyRelationConfig {
        tau_replicas: 50,
        walk_replicas: 50,
        ..KeyRelationConfig::default()
    };
    let a = verify_key_relation(&config).unwrap();
    let b = verify_key_relation(&config).unwrap();
    assert_eq!(a, b);
    let json = serde_json::to_value(&a).unwrap();
    assert_eq!(json["config"]["seed"], 1);
    assert_eq!(json["outcome"], "pass");
    let back: KeyRelationConfig = serde_json::from_value(json["config"].clone()).unwrap();
    assert_eq!(back, config);
}

#[test]
fn tau_mean_bound_holds_with_disorder() {
    for (beta, h) in [(0.0, -1e3), (1.0, -1.0), (0.5, 0.2), (2.0, -3.0)] {
        let report = tau_mean_lower_bound(&TauMeanConfig {
            beta,
            h,
            ..TauMeanConfig::default()
        })
        .unwrap();
        assert_eq!(report.outcome, Outcome::Pass, "{report:?}");
        assert!(report.n_terms >= 8);
    }
    let unit = tau_mean_lower_bound(&TauMeanConfig {
        kernel: KernelKind::Dirac { step: 1 },
        h: -2.0,
        ..TauMeanConfig::default()
    })
    .unwrap();
    assert_eq!(unit.mean_gap, 1.0);
    assert!(unit.partial_sum >= 1.0);
}

#[test]
fn escape_probability_matches_exact_without_disorder() {
    let report = annealed_transience_check(&TransienceConfig {
        beta: 0.0,
        h: -1.0,
        environments: 300,
        walk_replicas: 400,
        ..TransienceConfig::default()
    })
    .unwrap();
    for level in &report.levels {
        assert_eq!(level.absorbed_fraction, 1.0);
        assert!(level.within_3_sigma >= 0.98, "{level:?}");
        let rel = (level.mean_mc_visits - level.mean_exact_visits).abs() / level.mean_exact_visits;
        assert!(rel < 0.02, "{level:?}");
    }
    assert!(!report.unbounded_growth);
}

#[test]
fn disordered_walks_escape() {
    let report = annealed_transience_check(&TransienceConfig {
        walk_replicas: 20,
        ..TransienceConfig::default()
    })
    .unwrap();
    assert_eq!(report.levels.len(), 3);
    for level in &report.levels {
        assert_eq!(level.absorbed_fraction, 1.0, "{level:?}");
    }
}

#[test]
fn flat_walk_visits_keep_growing() {
    let report = annealed_transience_check(&TransienceConfig {
        beta: 0.0,
        h: 0.0,
        environments: 20,
        walk_replicas: 50,
        ..TransienceConfig::default()
    })
    .unwrap();
    assert!(report.unbounded_growth);
    for (level, want) in report.levels.iter().zip([8.0, 32.0, 128.0]) {
        approx::assert_relative_eq!(level.mean_exact_visits, want, max_relative = 1e-12);
    }
}

#[test]
fn scan_merges_pure_row_and_flags_ties() {
    let config = ScanConfig {
        beta_grid: vec![0.0, 1.0],
        h_grid: vec![-0.6, -0.5, -0.1, 0.2],
        search: CriticalSearch {
            n: 4000,
            replicas: 2,
            tol: 0.05,
            seed: 1,
            ..CriticalSearch::default()
        },
        n_terms: 1000,
        ..ScanConfig::default()
    };
    let report = regime_scan(&config).unwrap();
    assert_eq!(report.merged_betas, vec![0.0]);
    assert_eq!(report.points.len(), 8);
    for p in report.points.iter().filter(|p| p.beta == 0.0) {
        assert!(
            p.regime != Regime::Case1 && p.regime != Regime::Case2,
            "{p:?}"
        );
    }
    let tie = report
        .points
        .iter()
        .find(|p| p.beta == 1.0 && p.h == -0.5)
        .unwrap();
    assert_eq!(tie.regime, Regime::Boundary);
    assert_eq!(tie.consistent, None);
    let outside = report.points.iter().filter(|p| p.h > 0.0);
    assert!(outside
        .into_iter()
        .all(|p| p.regime == Regime::OutsideTheorem));
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.contains(",boundary,"));
}

#[test]
fn classification_never_forces_inside_bracket() {
    let bracket = (-0.4, -0.3);
    for h in [-0.4, -0.35, -0.3] {
        assert_eq!(classify(h, -0.5, bracket, 1e-12), Regime::Unresolved);
    }
    assert_eq!(classify(-0.2, -0.5, bracket, 1e-12), Regime::Case1);
}
