//! End-to-end acceptance checks. Each criterion prints one `[PASS]` or
//! `[FAIL]` line; the last one reruns the rest and compares every number
//! bit for bit.

use std::io::Write;
use std::time::Instant;

use grouptest::decoders::{comp_decode, dd_decode, scomp_decode};
use grouptest::design::{generate_design, is_satisfying, run_tests, sample_defective_set};
use grouptest::experiments::{
    default_theta_grid, estimate_threshold, exact_comp_success, exact_sole_defective_success,
    figure1_data, sole_defective_frequency, sweep_tests, Density, ExperimentConfig,
};
use grouptest::oracle::{enumerate_satisfying, posterior_success_bound, run_oracle_checks, OracleCheckConfig};
use grouptest::rates::{capacity, nu_to_p, t_comp, t_star, t_typ, theta_star, INV_E_LN2};
use grouptest::rng::{derive_seed, generator, Stream};
use grouptest::Algorithm;
use rand::Rng;

const MASTER_SEED: u64 = 0x00C0_FFEE;

struct Verdict {
    pass: bool,
    detail: String,
    /// Every number the criterion computed, as raw bits.
    fingerprint: Vec<u64>,
}

impl Verdict {
    fn new(pass: bool, detail: String, numbers: &[f64]) -> Self {
        Self { pass, detail, fingerprint: numbers.iter().map(|x| x.to_bits()).collect() }
    }
}

fn three_sigma(estimate: f64, exact: f64, trials: u64) -> (bool, f64) {
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    let z = if se > 0.0 { (estimate - exact).abs() / se } else if estimate == exact { 0.0 } else { f64::INFINITY };
    (z <= 3.0, z)
}

fn capacity_regimes(_seed: u64) -> Verdict {
    let mut numbers = Vec::new();
    let mut worst_low: f64 = 0.0;
    let mut lows: Vec<f64> = (1..=6).map(|i| 0.05 * i as f64).collect();
    lows.push(1.0 / 3.0);
    for &t in &lows {
        let c = capacity(t).unwrap().value;
        numbers.push(c);
        worst_low = worst_low.max((c - 1.0).abs());
    }
    let mut worst_high: f64 = 0.0;
    for i in 36..=95 {
        let t = i as f64 / 100.0;
        let c = capacity(t).unwrap().value;
        numbers.push(c);
        worst_high = worst_high.max((c - INV_E_LN2 * (1.0 - t) / t).abs());
    }
    let ts = theta_star();
    numbers.push(ts);
    let pass = worst_low <= 1e-9 && worst_high <= 1e-9 && (ts - 0.359).abs() <= 1e-3;
    Verdict::new(
        pass,
        format!("capacity regimes: max error low {worst_low:.1e}, high {worst_high:.1e}; theta* = {ts:.6}"),
        &numbers,
    )
}

/// `ν e^{-ν}` and `h(e^{-ν})` tabulated on a uniform ν grid.
struct NuGrid {
    nu: Vec<f64>,
    /// `ν e^{-ν}`
    density: Vec<f64>,
    /// `h(e^{-ν})`
    entropy: Vec<f64>,
}

impl NuGrid {
    fn new(lo: f64, hi: f64, step: f64) -> Self {
        let count = ((hi - lo) / step).round() as usize + 1;
        let nu: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
        let density = nu.iter().map(|&v| v * (-v).exp()).collect();
        let entropy = nu.iter().map(|&v| h((-v).exp())).collect();
        Self { nu, density, entropy }
    }
}

fn h(x: f64) -> f64 {
    -(x * x.log2() + (1.0 - x) * (1.0 - x).log2())
}

/// Grid optimum of `outer` over ν of `inner(f1, f2)`, with the crossing of
/// `f1` and `f2` between adjacent grid points located by linear
/// interpolation and evaluated too.
fn grid_search(
    grid: &NuGrid,
    f1: impl Fn(usize) -> f64,
    f2: impl Fn(usize) -> f64,
    f1_at: impl Fn(f64) -> f64,
    f2_at: impl Fn(f64) -> f64,
    maximise: bool,
) -> f64 {
    let better = |a: f64, b: f64| if maximise { a > b } else { a < b };
    let combine = |a: f64, b: f64| if maximise { a.min(b) } else { a.max(b) };
    let mut best = if maximise { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut prev_gap = f1(0) - f2(0);
    for i in 0..grid.nu.len() {
        let (a, b) = (f1(i), f2(i));
        let v = combine(a, b);
        if better(v, best) {
            best = v;
        }
        let gap = a - b;
        if i > 0 && (gap < 0.0) != (prev_gap < 0.0) {
            let (x0, x1) = (grid.nu[i - 1], grid.nu[i]);
            let x = x0 + prev_gap / (prev_gap - gap) * (x1 - x0);
            let v = combine(f1_at(x), f2_at(x));
            if better(v, best) {
                best = v;
            }
        }
        prev_gap = gap;
    }
    best
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k) as f64 / i as f64).ln_1p()).sum()
}

fn max_min_oracle(_seed: u64) -> Verdict {
    let grid = NuGrid::new(0.3, 2.0, 1e-6);
    let mut numbers = Vec::new();

    let mut worst_c: f64 = 0.0;
    for i in 0..200 {
        let theta = (i as f64 + 0.5) / 200.0;
        let w = (1.0 - theta) / theta / std::f64::consts::LN_2;
        let oracle = grid_search(
            &grid,
            |j| grid.density[j] * w,
            |j| grid.entropy[j],
            |x| x * (-x).exp() * w,
            |x| h((-x).exp()),
            true,
        );
        let got = capacity(theta).unwrap().value;
        numbers.extend([oracle, got]);
        worst_c = worst_c.max((got - oracle).abs());
    }

    let mut worst_t: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let sizes = [50u64, 200, 1_000, 5_000, 20_000, 100_000, 500_000, 1_000_000];
    let mut pairs = 0;
    for &n in &sizes {
        for j in 0..25u64 {
            let k = 2 + (j * (n / 2 - 2)) / 24;
            pairs += 1;
            let a = k as f64 * (k as f64).ln();
            let b = ln_choose(n, k) / std::f64::consts::LN_2;
            let oracle = grid_search(
                &grid,
                |i| a / grid.density[i],
                |i| b / grid.entropy[i],
                |x| a / (x * (-x).exp()),
                |x| b / h((-x).exp()),
                false,
            );
            let got = t_star(n, k).unwrap().value;
            numbers.extend([oracle, got]);
            worst_t = worst_t.max((got - oracle).abs());
            worst_rel = worst_rel.max(((got - oracle) / oracle).abs());
        }
    }
    assert_eq!(pairs, 200);
    let pass = worst_c <= 1e-6 && worst_t <= 1e-6;
    Verdict::new(
        pass,
        format!(
            "nu-grid oracle: capacity max |diff| {worst_c:.2e} over 200 theta; \
             t_star max |diff| {worst_t:.2e} (relative {worst_rel:.1e}) over 200 (n,k)"
        ),
        &numbers,
    )
}

fn comp_exact_vs_simulation(seed: u64) -> Verdict {
    let (n, k) = (500usize, 10usize);
    let tc = t_comp(n as u64, k as u64).unwrap().value;
    let grid: Vec<usize> = (0..10).map(|i| (tc * (0.5 + i as f64 / 9.0)).round() as usize).collect();
    let mut cfg = ExperimentConfig::new(n, k, grid.clone(), 10_000);
    cfg.density = Density::Nu(1.0);
    cfg.decoders = vec![Algorithm::Comp];
    cfg.master_seed = seed;
    let p = cfg.p().unwrap();
    let curve = sweep_tests(&cfg).unwrap();

    let mut numbers = Vec::new();
    let mut worst_z: f64 = 0.0;
    let mut pass = true;
    for pt in &curve.points {
        let est = pt.decoder(Algorithm::Comp).unwrap().estimate;
        let exact = exact_comp_success(n as u64, k as u64, pt.tests as u64, p).unwrap();
        let (ok, z) = three_sigma(est, exact, pt.trials);
        pass &= ok;
        worst_z = worst_z.max(z);
        numbers.extend([est, exact]);
    }
    Verdict::new(
        pass,
        format!("COMP exact vs simulation (n=500, k=10, T={}..{}, 10^4 trials): max |z| = {worst_z:.2}", grid[0], grid[9]),
        &numbers,
    )
}

fn comp_threshold(seed: u64) -> Verdict {
    let (n, k) = (10_000usize, 100usize);
    let tc = t_comp(n as u64, k as u64).unwrap().value;
    let multipliers = [0.7, 0.9, 1.0, 1.1, 1.3];
    let grid: Vec<usize> = multipliers.iter().map(|m| (m * tc).round() as usize).collect();
    let mut cfg = ExperimentConfig::new(n, k, grid, 2000);
    cfg.density = Density::Nu(1.0);
    cfg.decoders = vec![Algorithm::Comp];
    cfg.master_seed = seed;
    let curve = sweep_tests(&cfg).unwrap();

    let series = curve.series(Algorithm::Comp);
    let mut numbers: Vec<f64> = series.iter().map(|&(_, s)| s).collect();
    let low = series[0].1;
    let (crossing, off) = match estimate_threshold(&curve, Algorithm::Comp, 0.5) {
        Ok(t) => (t.tests, (t.tests - tc).abs() / tc),
        Err(_) => (f64::NAN, f64::INFINITY),
    };
    numbers.push(crossing);
    let pass = off <= 0.15 && low <= 0.475;
    Verdict::new(
        pass,
        format!(
            "COMP threshold (n=10^4, k=100): 50% crossing at T = {crossing:.1} vs t_comp = {tc:.1} \
             ({:.1}% off); success at 0.7 t_comp = {low:.4}; at 1.3 t_comp = {:.4}",
            100.0 * off,
            series[4].1
        ),
        &numbers,
    )
}

fn sole_defective(seed: u64) -> Verdict {
    let (k, p, draws) = (10usize, 0.1, 100_000usize);
    let mut numbers = Vec::new();
    let mut pass = true;
    let mut worst_z: f64 = 0.0;
    for t in [50usize, 100, 200, 400] {
        let hits = sole_defective_frequency(k, t, p, draws, seed).unwrap();
        let freq = hits as f64 / draws as f64;
        let exact = exact_sole_defective_success(k as u64, t as u64, p).unwrap();
        let (ok, z) = three_sigma(freq, exact, draws as u64);
        pass &= ok;
        worst_z = worst_z.max(z);
        numbers.extend([freq, exact]);
    }
    Verdict::new(pass, format!("sole-defective exact vs 10^5 draws (k=10, p=0.1): max |z| = {worst_z:.2}"), &numbers)
}

fn oracle_suite(seed: u64) -> Verdict {
    let cfg = OracleCheckConfig { seed, ..OracleCheckConfig::default() };
    let report = run_oracle_checks(&cfg, comp_decode).unwrap();
    let mut numbers = vec![report.freq_both_fail, report.freq_sss_size_k, report.freq_comp_size_k];
    let mut parts = Vec::new();
    for t in &report.invariants {
        numbers.push(t.checked as f64);
        numbers.push(t.violations as f64);
        parts.push(format!("{}={}/{}", t.name, t.violations, t.checked));
    }
    Verdict::new(
        report.passed() && report.instances == 1000,
        format!("oracle suite over {} instances, violations: {}", report.instances, parts.join(" ")),
        &numbers,
    )
}

fn decoder_soundness(seed: u64) -> Verdict {
    let mut g = generator(derive_seed(seed, Stream::Auxiliary, &[7]));
    let mut violations = 0u64;
    let mut numbers = Vec::new();
    for i in 0..10_000u64 {
        let n = g.random_range(1..=1000usize);
        let k = g.random_range(0..=n.min(25));
        let p = if g.random_bool(0.5) {
            nu_to_p(g.random_range(0.3..3.0), k.max(1) as u64).unwrap()
        } else {
            g.random_range(0.005..0.5)
        };
        let tests = g.random_range(0..=200usize);
        let design = generate_design(n, tests, p, derive_seed(seed, Stream::Design, &[i])).unwrap();
        let truth = sample_defective_set(n, k, derive_seed(seed, Stream::Defectives, &[i])).unwrap();
        let y = run_tests(&design, &truth).unwrap();
        let comp = comp_decode(&design, &y).unwrap().estimate;
        let dd = dd_decode(&design, &y).unwrap().estimate;
        let scomp = scomp_decode(&design, &y).unwrap().estimate;
        let ok = truth.is_subset(&comp)
            && dd.is_subset(&truth)
            && dd.is_subset(&scomp)
            && dd.len() <= scomp.len()
            && is_satisfying(&design, &y, &scomp).unwrap();
        if !ok {
            violations += 1;
        }
        numbers.extend([comp.len() as f64, dd.len() as f64, scomp.len() as f64]);
    }
    Verdict::new(violations == 0, format!("decoder soundness over 10^4 instances (n <= 1000): {violations} violations"), &numbers)
}

fn figure_one(_seed: u64) -> Verdict {
    let rows = figure1_data(&default_theta_grid()).unwrap();
    let mut numbers = Vec::new();
    let mut ok = rows.len() == 99;
    for r in &rows {
        numbers.extend([r.theta, r.capacity, r.counting, r.dd, r.comp]);
        ok &= r.comp <= r.dd && r.dd <= r.capacity && r.capacity <= r.counting && r.counting == 1.0;
        if r.theta >= 0.5 {
            ok &= (r.dd - r.capacity).abs() <= 1e-12;
        }
        if r.theta <= 1.0 / 3.0 {
            ok &= r.capacity == 1.0;
        }
    }
    let half = rows.iter().find(|r| r.theta == 0.5).unwrap().capacity;
    ok &= format!("{half:.3}") == "0.531";
    Verdict::new(ok, format!("figure 1: 99 rows ordered, dd = capacity for theta >= 0.5, capacity(0.5) = {half:.3}"), &numbers)
}

fn typicality(seed: u64) -> Verdict {
    let (n, k) = (14usize, 3usize);
    let p = nu_to_p(3.0, k as u64).unwrap();
    let tt = t_typ(n as u64, k as u64, p).unwrap().value;
    let average = |tests: usize| {
        let mut total = 0.0;
        for i in 0..1000u64 {
            let path = [tests as u64, i];
            let design = generate_design(n, tests, p, derive_seed(seed, Stream::Design, &path)).unwrap();
            let truth = sample_defective_set(n, k, derive_seed(seed, Stream::Defectives, &path)).unwrap();
            let y = run_tests(&design, &truth).unwrap();
            let family = enumerate_satisfying(&design, &y, Some(k)).unwrap();
            total += posterior_success_bound(&family).unwrap();
        }
        total / 1000.0
    };
    let t_low = (0.6 * tt).ceil() as usize;
    let t_high = (2.0 * tt).ceil() as usize;
    let (low, high) = (average(t_low), average(t_high));
    Verdict::new(
        low < 0.9 && high > low,
        format!("typicality (n=14, k=3, nu=3, t_typ={tt:.2}): mean 1/d at T={t_low} is {low:.4}, at T={t_high} is {high:.4}"),
        &[tt, low, high],
    )
}

type Criterion = fn(u64) -> Verdict;

const CRITERIA: [Criterion; 9] = [
    capacity_regimes,
    max_min_oracle,
    comp_exact_vs_simulation,
    comp_threshold,
    sole_defective,
    oracle_suite,
    decoder_soundness,
    figure_one,
    typicality,
];

fn report(out: &mut impl Write, id: usize, pass: bool, detail: &str) {
    let tag = if pass { "[PASS]" } else { "[FAIL]" };
    writeln!(out, "{tag} criterion {id}: {detail}").unwrap();
}

#[test]
fn acceptance_criteria() {
    // written straight to stdout so the lines survive output capture
    let mut out = std::io::stdout();
    let mut first = Vec::new();
    for (i, c) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let v = c(MASTER_SEED);
        let secs = start.elapsed().as_secs_f64();
        report(&mut out, i + 1, v.pass, &format!("{} [{secs:.1}s]", v.detail));
        first.push(v);
    }

    let mut mismatched = Vec::new();
    for (i, c) in CRITERIA.iter().enumerate() {
        if c(MASTER_SEED).fingerprint != first[i].fingerprint {
            mismatched.push(i + 1);
        }
    }
    let numbers: usize = first.iter().map(|v| v.fingerprint.len()).sum();
    let deterministic = mismatched.is_empty();
    report(
        &mut out,
        10,
        deterministic,
        &format!("determinism: {numbers} numbers rerun, mismatched criteria {mismatched:?}"),
    );
    out.flush().unwrap();

    let failed: Vec<usize> = first
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.pass)
        .map(|(i, _)| i + 1)
        .chain((!deterministic).then_some(10))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
