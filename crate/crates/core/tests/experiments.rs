use grouptest::experiments::*;
use grouptest::{Algorithm, Error};

fn comp_config(n: usize, k: usize, grid: Vec<usize>, trials: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(n, k, grid, trials);
    c.density = Density::Nu(1.0);
    c.decoders = vec![Algorithm::Comp];
    c.master_seed = seed;
    c
}

/// Pool-adjacent-violators fit of a non-decreasing sequence.
fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb));
        }
    }
    blocks.iter().flat_map(|&(v, n)| vec![v; n]).collect()
}

#[test]
fn zero_tests_fail_everything() {
    let mut c = ExperimentConfig::new(20, 2, vec![0], 5);
    c.decoders = Algorithm::ALL.to_vec();
    for r in run_trials(&c, 0).unwrap() {
        assert!(r.outcomes.iter().all(|o| !o.success), "{r:?}");
    }
}

#[test]
fn empty_defective_set_recovered_by_comp() {
    // all tests negative; COMP is right once every item has been tested
    let mut c = ExperimentConfig::new(15, 0, vec![2, 60], 10);
    c.density = Density::P(0.3);
    c.decoders = Algorithm::ALL.to_vec();
    let curve = sweep_tests(&c).unwrap();
    assert_eq!(curve.points[1].decoder(Algorithm::Comp).unwrap().estimate, 1.0);
    assert!(curve.points[0].decoder(Algorithm::Comp).unwrap().estimate < 1.0);
    for t in [2, 60] {
        for r in run_trials(&c, t).unwrap() {
            assert_eq!(r.positives, 0);
            assert!(r.outcome(Algorithm::Dd).unwrap().success);
            assert!(r.outcome(Algorithm::Sss).unwrap().success);
        }
    }
}

#[test]
fn dd_success_implies_comp_agreement_when_sizes_match() {
    let mut c = ExperimentConfig::new(200, 5, vec![30, 60, 90], 200);
    c.decoders = vec![Algorithm::Comp, Algorithm::Dd];
    for t in c.t_grid.clone() {
        for r in run_trials(&c, t).unwrap() {
            let dd = r.outcome(Algorithm::Dd).unwrap();
            if dd.success && r.comp_size == c.k {
                assert!(r.outcome(Algorithm::Comp).unwrap().success);
            }
        }
    }
}

#[test]
fn comp_curve_matches_exact_and_is_monotone() {
    let (n, k) = (120, 4);
    let grid: Vec<usize> = (2..=10).map(|i| 8 * i).collect();
    let c = comp_config(n, k, grid, 3000, 5);
    let p = c.p().unwrap();
    let curve = sweep_tests(&c).unwrap();
    let series = curve.series(Algorithm::Comp);
    for &(t, est) in &series {
        let exact = exact_comp_success(n as u64, k as u64, t as u64, p).unwrap();
        let se = binomial_se(exact, 3000);
        assert!((est - exact).abs() <= 3.0 * se + 1e-12, "T={t}: {est} vs {exact}");
    }
    let values: Vec<f64> = series.iter().map(|s| s.1).collect();
    let fit = isotonic(&values);
    let residual = values.iter().zip(&fit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(residual <= 3.0 * binomial_se(0.5, 3000), "residual {residual}");

    // crossing within one grid step of the exact curve's crossing
    let exact_series: Vec<(f64, f64)> = series
        .iter()
        .map(|&(t, _)| (t, exact_comp_success(n as u64, k as u64, t as u64, p).unwrap()))
        .collect();
    let mc = estimate_threshold(&curve, Algorithm::Comp, 0.5).unwrap();
    let ex = crossing(&exact_series, 0.5).unwrap();
    assert!((mc.tests - ex.tests).abs() <= 8.0, "{} vs {}", mc.tests, ex.tests);
}

#[test]
fn step_curve_threshold() {
    let step = [(10.0, 0.0), (20.0, 0.0), (30.0, 1.0), (40.0, 1.0)];
    assert_eq!(crossing(&step, 1.0).unwrap().tests, 30.0);
    let half = crossing(&step, 0.5).unwrap();
    assert_eq!((half.below.0, half.above.0), (20.0, 30.0));
    assert!(matches!(crossing(&[(1.0, 0.1), (2.0, 0.2)], 0.5), Err(Error::NoCrossing { .. })));
}

#[test]
fn sole_defective_frequency_matches_exact() {
    let (k, p, draws) = (6, 0.15, 20_000);
    for t in [10, 30, 60] {
        let f = sole_defective_frequency(k, t, p, draws, 9).unwrap() as f64 / draws as f64;
        let exact = exact_sole_defective_success(k as u64, t as u64, p).unwrap();
        assert!((f - exact).abs() <= 3.0 * binomial_se(exact, draws as u64) + 1e-12, "T={t}");
    }
}

#[test]
fn sss_bounded_by_sole_defective_and_union_counts() {
    let mut c = ExperimentConfig::new(24, 3, vec![8, 14, 20, 30], 400);
    c.density = Density::Nu(std::f64::consts::LN_2);
    c.decoders = Algorithm::ALL.to_vec();
    c.oracle_diagnostics = true;
    c.master_seed = 3;
    let curve = sweep_tests(&c).unwrap();
    for pt in &curve.points {
        let trials = pt.trials as f64;
        let sss = pt.decoder(Algorithm::Sss).unwrap();
        // every SSS success needs each defective alone in some test
        assert!(sss.successes <= pt.sole_defective);
        // |SSS| < k and |COMP| > k whenever neither has size k
        let sss_k = trials - pt.sss_size_lt_k as f64;
        let comp_k = trials - pt.comp_size_gt_k as f64;
        assert!(pt.sss_small_and_comp_large as f64 >= trials - sss_k - comp_k);
        // and then at least two size-k sets satisfy the outcomes
        let multiple = pt.multiple_size_k.expect("diagnostics requested");
        assert!(multiple >= pt.sss_small_and_comp_large);
        assert!(sss.estimate <= pt.sole_defective as f64 / trials + 1e-12);
    }
}

#[test]
fn config_errors_reported_together() {
    let mut c = ExperimentConfig::new(100_000, 10, vec![], 0);
    c.decoders = vec![Algorithm::Sss];
    c.delta = 2.0;
    let Err(Error::InvalidConfig(errs)) = c.validate() else { panic!() };
    assert_eq!(errs.len(), 4, "{errs:?}");
    assert!(matches!(sweep_tests(&c), Err(Error::InvalidConfig(_))));
}

#[test]
fn wilson_bound_for_always_failing_decoder() {
    // T = 0 leaves every decoder guessing
    let c = comp_config(50, 5, vec![0], 100, 1);
    let pt = estimate_success(&c, 0).unwrap();
    let d = pt.decoder(Algorithm::Comp).unwrap();
    assert_eq!(d.successes, 0);
    assert!(d.ci_high < 3.7 / 100.0);
    // in general the bound is z^2 / (trials + z^2), just under 3.85 / trials
    for trials in [100u64, 2000, 100_000] {
        let (_, hi) = wilson_interval(0, trials);
        assert!((hi - Z95 * Z95 / (trials as f64 + Z95 * Z95)).abs() < 1e-15);
    }
}
