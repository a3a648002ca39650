use proptest::prelude::*;

use rwsre::environment::{DisorderSpec, KernelKind, RenewalKernel};
use rwsre::pinning::{
    annealed_critical_point, brute_force_partition, disorder_replicas, free_energy_estimate,
    grand_canonical, homogeneous_free_energy, localization_probe, quenched_critical_point_estimate,
    CriticalSearch, PartitionTable, Verdict, BRUTE_FORCE_MAX,
};
use rwsre::{Error, PartitionTable32};

fn small_kernel() -> impl Strategy<Value = KernelKind> {
    prop_oneof![
        (0.0f64..2.5, 1usize..=4).prop_map(|(alpha, n_max)| KernelKind::PowerLaw { alpha, n_max }),
        (0.05f64..0.95, 1usize..=4).prop_map(|(q, n_max)| KernelKind::Geometric { q, n_max }),
        (1usize..=4).prop_map(|step| KernelKind::Dirac { step }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_enumeration(
        kind in small_kernel(),
        omega in prop::collection::vec(-2.0f64..2.0, 12),
        beta in 0.0f64..2.0,
        h in -3.0f64..3.0,
    ) {
        let kernel = RenewalKernel::<f64>::new(kind).unwrap();
        let table = PartitionTable::compute(&omega, &kernel, beta, h, 12).unwrap();
        for n in 0..=12 {
            let (z, zc) = brute_force_partition(&omega, &kernel, beta, h, n).unwrap();
            let ez = table.log_z[n].exp();
            prop_assert!((ez - z).abs() <= 1e-10 * z, "Z_{}: {} vs {}", n, ez, z);
            let ezc = table.log_zc[n].exp();
            prop_assert!((ezc - zc).abs() <= 1e-10 * zc.max(f64::MIN_POSITIVE), "z^c_{}: {} vs {}", n, ezc, zc);
        }
    }

    #[test]
    fn homogeneous_root_residual(alpha in 0.1f64..2.0, n_max in 2usize..500, h in 1e-3f64..4.0) {
        let kernel = RenewalKernel::<f64>::power_law(alpha, n_max).unwrap();
        let sol = homogeneous_free_energy(&kernel, h);
        prop_assert!(sol.free_energy > 0.0 && sol.free_energy <= h);
        prop_assert!(sol.residual.abs() <= 1e-10);
        let direct: f64 = (1..=n_max).map(|n| kernel.weight(n) * (-sol.free_energy * n as f64).exp()).sum();
        prop_assert!((direct - (-h).exp()).abs() <= 1e-10);
    }

    #[test]
    fn larger_drift_shrinks_every_partial_sum(f in 0.0f64..2.0, df in 1e-3f64..1.0, seed in 0u64..1000) {
        let kernel = RenewalKernel::<f64>::power_law(0.8, 20).unwrap();
        let omega = disorder_replicas(&DisorderSpec::gaussian(1.0).unwrap(), 200, 1, seed).pop().unwrap();
        let table = PartitionTable::compute(&omega, &kernel, 1.0, -0.5, 200).unwrap();
        let a = grand_canonical(&table, f, 200);
        let b = grand_canonical(&table, f + df, 200);
        prop_assert_eq!(a.partial_sum(0), 1.0);
        for k in 1..=200 {
            prop_assert!(b.partial_sum(k) < a.partial_sum(k));
        }
    }
}

#[test]
fn brute_force_guard() {
    let kernel = RenewalKernel::<f64>::power_law(1.0, 3).unwrap();
    let omega = vec![0.0; 20];
    assert_eq!(
        brute_force_partition(&omega, &kernel, 1.0, 0.0, BRUTE_FORCE_MAX + 1),
        Err(Error::TooLarge {
            n: BRUTE_FORCE_MAX + 1,
            max: BRUTE_FORCE_MAX
        })
    );
    assert_eq!(
        brute_force_partition(&omega, &kernel, 1.0, 0.0, 0).unwrap(),
        (1.0, 1.0)
    );
}

#[test]
fn two_site_configurations() {
    let kernel = RenewalKernel::<f64>::power_law(1.0, 2).unwrap();
    let omega = [0.3, -1.1];
    let (beta, h) = (0.7, 0.2);
    let (z1, _) = brute_force_partition(&omega, &kernel, beta, h, 1).unwrap();
    let expect = kernel.weight(1) * (beta * omega[0] + h).exp() + kernel.tail(1);
    assert!((z1 - expect).abs() < 1e-15);
}

/// Averaging `Z_n` over disorder gives the homogeneous model at `h + lambda(beta)`.
#[test]
fn annealed_average_matches_shifted_homogeneous() {
    let kernel = RenewalKernel::<f64>::power_law(1.0, 8).unwrap();
    for spec in [
        DisorderSpec::Rademacher,
        DisorderSpec::uniform_centered(1.0).unwrap(),
    ] {
        let (beta, h, n) = (0.8, -0.6, 60);
        let zs: Vec<f64> = disorder_replicas(&spec, n, 4000, 21)
            .iter()
            .map(|w| {
                PartitionTable::compute(w, &kernel, beta, h, n)
                    .unwrap()
                    .log_z[n]
                    .exp()
            })
            .collect();
        let k = zs.len() as f64;
        let mean = zs.iter().sum::<f64>() / k;
        let se = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
        let target =
            PartitionTable::homogeneous(&kernel, h - annealed_critical_point(&spec, beta), n).log_z
                [n]
                .exp();
        assert!(
            (mean - target).abs() <= 3.0 * se,
            "{spec:?}: {mean} vs {target} (se {se})"
        );
    }
}

/// `sum_n Z_n = E[tau_1] sum_n z^c_n` at zero drift, for a summable series.
#[test]
fn free_over_pinned_is_mean_gap() {
    let kernel = RenewalKernel::<f64>::power_law(0.6, 100).unwrap();
    let omega = disorder_replicas(&DisorderSpec::gaussian(1.0).unwrap(), 4000, 1, 5)
        .pop()
        .unwrap();
    let n = 4000;
    let table = PartitionTable::compute(&omega, &kernel, 1.0, -1.5, n).unwrap();
    let free = grand_canonical(&table, 0.0, n);
    assert!(free.verdict.is_converged(), "{:?}", free.verdict);
    let pinned: f64 = table.log_zc.iter().map(|l| l.exp()).sum();
    let ratio = free.value() / pinned;
    let slack = free.tail_bound().unwrap() / pinned + 1e-12;
    assert!(
        (ratio - kernel.mean()).abs() <= slack + 1e-9,
        "{ratio} vs {}",
        kernel.mean()
    );
}

#[test]
fn zero_reward_free_partition_is_one() {
    let kernel = RenewalKernel::<f64>::power_law(0.6, 50).unwrap();
    let table = PartitionTable::homogeneous(&kernel, 0.0, 500);
    assert!(table.log_z.iter().all(|l| l.abs() < 1e-12));
}

#[test]
fn delocalized_pure_free_energy_is_small() {
    let kernel = RenewalKernel::<f64>::power_law(0.6, 100).unwrap();
    let zeros = vec![0.0; 20_000];
    for h in [-0.5, -0.1, 0.0] {
        let est = free_energy_estimate(&zeros, &kernel, 0.0, h, 20_000).unwrap();
        assert!(est.f_hat <= 1e-2, "h={h}: {est:?}");
    }
    for h in [0.05, 0.3, 1.0] {
        let est = free_energy_estimate(&zeros, &kernel, 0.0, h, 20_000).unwrap();
        let exact = homogeneous_free_energy(&kernel, h).free_energy;
        assert!(
            (est.f_hat - exact).abs() <= 1e-3,
            "h={h}: {} vs {exact}",
            est.f_hat
        );
    }
}

#[test]
fn quenched_below_annealed_and_monotone() {
    let kernel = RenewalKernel::<f64>::power_law(0.6, 100).unwrap();
    let spec = DisorderSpec::gaussian(1.0).unwrap();
    let beta = 1.0;
    let n = 20_000;
    let omega = disorder_replicas(&spec, n, 1, 3).pop().unwrap();
    let lambda = spec.log_mgf(beta);
    let mut last: Option<(f64, f64)> = None;
    for i in 0..=12 {
        let h = -1.0 + 0.125 * i as f64;
        let est = free_energy_estimate(&omega, &kernel, beta, h, n).unwrap();
        assert!(est.f_hat >= 0.0);
        let annealed = homogeneous_free_energy(&kernel, h + lambda).free_energy;
        assert!(
            est.f_hat <= annealed + 1e-2,
            "h={h}: {} > {annealed}",
            est.f_hat
        );
        if let Some((prev, spread)) = last {
            assert!(est.f_hat >= prev - spread.max(est.window_spread), "h={h}");
        }
        last = Some((est.f_hat, est.window_spread));
    }
}

#[test]
fn critical_point_respects_both_bounds() {
    let kernel = RenewalKernel::<f64>::power_law(0.6, 100).unwrap();
    let spec = DisorderSpec::Rademacher;
    let search = CriticalSearch {
        n: 10_000,
        replicas: 2,
        tol: 0.02,
        ..CriticalSearch::default()
    };
    for beta in [0.5, 1.0] {
        let est = quenched_critical_point_estimate(&spec, &kernel, beta, &search).unwrap();
        let annealed = annealed_critical_point(&spec, beta);
        assert!(est.h_hat < 0.0, "beta={beta}: {est:?}");
        assert!(
            est.h_hat >= annealed - search.tol,
            "beta={beta}: {} < {annealed}",
            est.h_hat
        );
        assert!(est.bracket.1 - est.bracket.0 <= search.tol);
        let lo = est.probes.iter().find(|p| p.h == est.bracket.0).unwrap();
        let hi = est.probes.iter().find(|p| p.h == est.bracket.1).unwrap();
        assert!(!lo.localized && hi.localized);
    }
}

#[test]
fn missing_bracket_is_reported() {
    let kernel = RenewalKernel::<f64>::power_law(0.6, 100).unwrap();
    let spec = DisorderSpec::gaussian(1.0).unwrap();
    let search = CriticalSearch {
        n: 2000,
        range: Some((0.5, 1.0)),
        ..CriticalSearch::default()
    };
    assert_eq!(
        quenched_critical_point_estimate(&spec, &kernel, 1.0, &search),
        Err(Error::NoBracket { lo: 0.5, hi: 1.0 })
    );
    let omegas = disorder_replicas(&spec, 2000, 2, 0);
    let probe = localization_probe(&omegas, &kernel, 1.0, 1.0, &search).unwrap();
    assert!(probe.localized && probe.threshold >= search.min_threshold);
}

#[test]
fn grand_canonical_verdicts() {
    let kernel = RenewalKernel::<f64>::geometric(0.5, 60).unwrap();
    let table = PartitionTable::homogeneous(&kernel, 2f64.ln(), 3000);
    let free_energy = 1.5f64.ln();
    let below = grand_canonical(&table, free_energy - 0.05, 3000);
    assert!(
        matches!(below.verdict, Verdict::Diverging { .. }),
        "{:?}",
        below.verdict
    );
    let above = grand_canonical(&table, free_energy + 0.05, 3000);
    assert!(above.verdict.is_converged(), "{:?}", above.verdict);
    assert!((above.without_origin_term() - (above.value() - 1.0)).abs() < 1e-12);
    let json = serde_json::to_value(&above).unwrap();
    assert_eq!(json["verdict"]["verdict"], "converged");
}

#[test]
fn table_csv_and_single_precision() {
    let kernel = RenewalKernel::<f64>::power_law(1.0, 4).unwrap();
    let omega = [0.5, -0.5, 1.0];
    let table = PartitionTable::compute(&omega, &kernel, 1.0, 0.1, 3).unwrap();
    let csv = table.to_csv();
    assert_eq!(csv.lines().next(), Some("n,log_zc,log_z"));
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0,0"));

    let k32 = RenewalKernel::<f32>::power_law(1.0, 4).unwrap();
    let w32: Vec<f32> = omega.iter().map(|&x| x as f32).collect();
    let t32: PartitionTable32 = PartitionTable::compute(&w32, &k32, 1.0, 0.1, 3).unwrap();
    for (a, b) in t32.log_z.iter().zip(&table.log_z) {
        assert!((*a as f64 - b).abs() < 1e-5);
    }
}
