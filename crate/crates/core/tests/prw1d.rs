use rayon::prelude::*;
use vlmc_core::cascades::SeriesPolicy;
use vlmc_core::prw1d::{
    classify, drift_report, persistence_tail, simulate_prw1, theta, walk_1d, DoubleCombModel, Verdict1D, DEFAULT_RUN_CAP,
    DOWN, UP,
};
use vlmc_core::stationary::stationarity_verdict;
use vlmc_core::{Fallback, StreamRng, TailKind};

fn lag1(xs: &[u64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<u64>() as f64 / n;
    let var: f64 = xs.iter().map(|&x| (x as f64 - m).powi(2)).sum();
    let cov: f64 = xs.windows(2).map(|w| (w[0] as f64 - m) * (w[1] as f64 - m)).sum();
    cov / var
}

#[test]
fn trace_invariants() {
    let m = DoubleCombModel::new(TailKind::Polynomial(1.5), TailKind::Geometric(0.6)).unwrap();
    for seed in 0..10 {
        let t = simulate_prw1(&m, 20_000, seed).unwrap();
        assert_eq!(t.positions[0], 0);
        for n in 1..t.positions.len() {
            assert_eq!((t.positions[n] - t.positions[n - 1]).abs(), 1);
            assert_eq!(t.is_breaking(n), t.letters[n - 1] != if n == 1 { DOWN } else { t.letters[n - 2] });
        }
        for (k, &mk) in t.skeleton.iter().enumerate() {
            assert_eq!(mk, t.positions[t.breaking[2 * k] as usize]);
            let runs: u64 = t.tau_d[..k].iter().chain(&t.tau_u[..k]).sum();
            assert_eq!(t.breaking[2 * k], runs);
        }
        assert!(t.tau_d.iter().chain(&t.tau_u).all(|&x| x >= 1));
    }
    let one = simulate_prw1(&m, 1, 3).unwrap();
    assert_eq!(one.positions.len(), 2);
    assert_eq!(one.positions[1].abs(), 1);
}

#[test]
fn run_lengths_follow_the_tail_and_are_uncorrelated() {
    let m = DoubleCombModel::new(TailKind::Geometric(0.5), TailKind::Polynomial(2.0)).unwrap();
    let t = simulate_prw1(&m, 1_000_000, 21).unwrap();
    let mean_u = t.tau_u.iter().sum::<u64>() as f64 / t.tau_u.len() as f64;
    assert!((mean_u / 2.0 - 1.0).abs() <= 0.02, "{mean_u}");
    for (dir, taus) in [(UP, &t.tau_u), (DOWN, &t.tau_d)] {
        let n = taus.len() as f64;
        assert!(n >= 1e5);
        for k in 1..=20 {
            let p = persistence_tail(&m, dir, k);
            let emp = taus.iter().filter(|&&x| x >= k).count() as f64 / n;
            assert!((emp - p).abs() <= 4.0 * (p * (1.0 - p) / n).sqrt() + 1e-12, "dir {dir:?}, n = {k}");
        }
    }
    let rho = lag1(&t.tau_u);
    assert!(rho.abs() < 4.0 / (t.tau_u.len() as f64).sqrt(), "ρ = {rho}");
    // the polynomial side is capped so the sample variance exists
    let capped: Vec<u64> = t.tau_d.iter().map(|&x| x.min(20)).collect();
    let rho = lag1(&capped);
    assert!(rho.abs() < 4.0 / (capped.len() as f64).sqrt(), "ρ = {rho}");
}

#[test]
fn transient_drift_matches_d_s() {
    let m = DoubleCombModel::new(TailKind::Geometric(0.5), TailKind::Geometric(0.8)).unwrap();
    let d_s = drift_report(&m, &SeriesPolicy::default()).unwrap().d_s.unwrap();
    assert!((d_s + 3.0 / 7.0).abs() < 1e-12);
    let n = 1_000_000u64;
    let xs: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut last = 0;
            walk_1d(&m, n, &mut StreamRng::new(seed, 0), DEFAULT_RUN_CAP, |_, _, s, _| last = s).unwrap();
            last as f64 / n as f64
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
    for x in &xs {
        assert!((x - d_s).abs() <= 5.0 * sd.max(1e-3), "{x}");
    }
    assert!((mean - d_s).abs() <= 5.0 * sd / 10.0);
}

#[test]
fn classifier_and_verdict_agree() {
    let p = SeriesPolicy::default();
    let kinds = [
        TailKind::Geometric(0.5),
        TailKind::Geometric(0.9),
        TailKind::Polynomial(0.5),
        TailKind::Polynomial(0.8),
        TailKind::Polynomial(2.0),
    ];
    for up in &kinds {
        for down in &kinds {
            let m = DoubleCombModel::new(up.clone(), down.clone()).unwrap();
            let c = classify(&m, &p).unwrap();
            let finite = theta(&m, UP).unwrap().is_finite() && theta(&m, DOWN).unwrap().is_finite();
            assert_eq!(stationarity_verdict(m.model(), &p).label() == "UniqueProbability", finite);
            assert!(!matches!(c.verdict, Verdict1D::Undecidable(_)), "{up:?}/{down:?}");
            if up == down {
                assert_eq!(c.verdict, Verdict1D::Recurrent, "{up:?}");
            }
        }
    }
    let frozen = TailKind::Table { entries: vec![0.5], fallback: Fallback::Geometric(1.0) };
    let m = DoubleCombModel::new(frozen, TailKind::Geometric(0.5)).unwrap();
    assert!(classify(&m, &p).is_err());
    assert!(theta(&m, UP).is_err());
}

#[test]
fn theta_examples() {
    let g = DoubleCombModel::new(TailKind::Geometric(0.5), TailKind::Polynomial(2.0)).unwrap();
    assert_eq!(theta(&g, UP).unwrap(), 2.0);
    assert!((theta(&g, DOWN).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
    let h = DoubleCombModel::new(TailKind::Polynomial(0.5), TailKind::Geometric(0.5)).unwrap();
    assert_eq!(theta(&h, UP).unwrap(), f64::INFINITY);
    for n in 1..30 {
        assert!((persistence_tail(&h, UP, n) - (n as f64).powf(-0.5)).abs() < 1e-14);
    }
}
