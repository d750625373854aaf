//! Monte Carlo success curves, threshold estimates and the exact
//! finite-n formulas they are checked against.

mod exact;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exact::{
    exact_comp_success, exact_sole_defective_detailed, exact_sole_defective_success,
    SoleDefectiveProbability, SumMethod,
};
pub use stats::{binomial_se, wilson_interval, Z95};

use crate::decoders::{self, Algorithm, DecodeResult, Uniqueness, DEFAULT_SSS_BUDGET};
use crate::design::{generate_design, run_tests, sample_defective_set, DefectiveSet, TestDesign};
use crate::error::{domain, Error, Result};
use crate::oracle::{enumerate_satisfying_with_caps, EnumerationCaps};
use crate::rates::{self, nu_to_p, ProblemScale};
use crate::rng::{derive_seed, Stream};

/// Largest item count for which SSS may be part of a sweep.
pub const SSS_MAX_ITEMS: usize = 30;

/// Largest item count for which the per-trial satisfying-set count is taken.
pub const DIAGNOSTIC_MAX_ITEMS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    /// `p = 1 - exp(-nu / k)`.
    Nu(f64),
    P(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub density: Density,
    pub decoders: Vec<Algorithm>,
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    /// Target error probability for [`estimate_threshold`] levels.
    pub delta: f64,
    pub sss_budget: u64,
    pub threads: Option<usize>,
    /// Count size-k satisfying sets per trial (small n only).
    pub oracle_diagnostics: bool,
}

impl ExperimentConfig {
    pub fn new(n: usize, k: usize, t_grid: Vec<usize>, trials: usize) -> Self {
        Self {
            n,
            k,
            density: Density::Nu(std::f64::consts::LN_2),
            decoders: vec![Algorithm::Comp, Algorithm::Dd],
            t_grid,
            trials,
            master_seed: 0,
            delta: 0.5,
            sss_budget: DEFAULT_SSS_BUDGET,
            threads: None,
            oracle_diagnostics: false,
        }
    }

    /// Reports every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n == 0 {
            errs.push("n must be at least 1".to_string());
        }
        if self.k > self.n {
            errs.push(format!("k = {} exceeds n = {}", self.k, self.n));
        }
        if self.k == 0 && matches!(self.density, Density::Nu(_)) {
            errs.push("the nu parametrisation needs k >= 1; give p instead".to_string());
        }
        if self.trials == 0 {
            errs.push("trials must be at least 1".to_string());
        }
        if self.t_grid.is_empty() {
            errs.push("test grid is empty".to_string());
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            errs.push("test grid must be strictly increasing".to_string());
        }
        if self.decoders.is_empty() {
            errs.push("no decoders selected".to_string());
        }
        match self.density {
            Density::Nu(nu) if !(nu.is_finite() && nu > 0.0) => {
                errs.push(format!("nu = {nu} must be positive"));
            }
            Density::P(p) if !(p > 0.0 && p < 1.0) => {
                errs.push(format!("p = {p} outside (0, 1)"));
            }
            _ => {}
        }
        if self.decoders.contains(&Algorithm::Sss) && self.n > SSS_MAX_ITEMS {
            errs.push(format!(
                "SSS is exponential in n; n = {} exceeds the limit of {SSS_MAX_ITEMS}",
                self.n
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            errs.push(format!("delta = {} outside (0, 1)", self.delta));
        }
        if self.threads == Some(0) {
            errs.push("threads must be at least 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    pub fn p(&self) -> Result<f64> {
        match self.density {
            Density::Nu(nu) => nu_to_p(nu, self.k as u64),
            Density::P(p) => Ok(p),
        }
    }

    pub fn scale(&self) -> Result<ProblemScale> {
        ProblemScale::from_counts(self.n as u64, self.k as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Exact,
    /// SSS ran out of budget; the estimate is its incumbent.
    Truncated,
    /// SSS found a second minimum satisfying set.
    NotUnique,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderOutcome {
    pub algorithm: Algorithm,
    pub size: usize,
    pub correct: bool,
    /// Correct, unique and not truncated.
    pub success: bool,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub tests: usize,
    pub trial: usize,
    pub defective_seed: u64,
    pub design_seed: u64,
    pub positives: usize,
    pub comp_size: usize,
    pub sole_defective: bool,
    pub outcomes: Vec<DecoderOutcome>,
    pub size_k_satisfying: Option<usize>,
}

impl TrialRecord {
    pub fn outcome(&self, algorithm: Algorithm) -> Option<&DecoderOutcome> {
        self.outcomes.iter().find(|o| o.algorithm == algorithm)
    }
}

fn sss_outcome(design: &TestDesign, y: &crate::design::OutcomeVector, truth: &DefectiveSet, budget: u64) -> Result<DecoderOutcome> {
    let (estimate, status) = match decoders::sss_decode(design, y, budget) {
        Ok(DecodeResult { estimate, unique: Uniqueness::NotUnique, .. }) => (estimate, TrialStatus::NotUnique),
        Ok(r) => (r.estimate, TrialStatus::Exact),
        Err(Error::BudgetExceeded { incumbent, .. }) => {
            (incumbent.unwrap_or_else(DefectiveSet::empty), TrialStatus::Truncated)
        }
        Err(e) => return Err(e),
    };
    let correct = &estimate == truth;
    Ok(DecoderOutcome {
        algorithm: Algorithm::Sss,
        size: estimate.len(),
        correct,
        success: correct && status == TrialStatus::Exact,
        status,
    })
}

/// One trial at `tests` tests. The defective set and design come from
/// seeds derived from `(master_seed, tests, trial)` alone.
pub fn run_trial(config: &ExperimentConfig, tests: usize, trial: usize) -> Result<TrialRecord> {
    let p = config.p()?;
    let path = [tests as u64, trial as u64];
    let defective_seed = derive_seed(config.master_seed, Stream::Defectives, &path);
    let design_seed = derive_seed(config.master_seed, Stream::Design, &path);
    let truth = sample_defective_set(config.n, config.k, defective_seed)?;
    let design = generate_design(config.n, tests, p, design_seed)?;
    let y = run_tests(&design, &truth)?;

    let comp = decoders::comp_decode(&design, &y)?;
    let mut outcomes = Vec::with_capacity(config.decoders.len());
    for &alg in &config.decoders {
        let outcome = match alg {
            Algorithm::Sss => sss_outcome(&design, &y, &truth, config.sss_budget)?,
            _ => {
                let r = match alg {
                    Algorithm::Comp => comp.clone(),
                    Algorithm::Dd => decoders::dd_decode(&design, &y)?,
                    _ => decoders::scomp_decode(&design, &y)?,
                };
                let correct = r.estimate == truth;
                DecoderOutcome { algorithm: alg, size: r.size(), correct, success: correct, status: TrialStatus::Exact }
            }
        };
        outcomes.push(outcome);
    }

    let size_k_satisfying = if config.oracle_diagnostics && config.n <= DIAGNOSTIC_MAX_ITEMS {
        match enumerate_satisfying_with_caps(&design, &y, Some(config.k), EnumerationCaps::default()) {
            Ok(f) => Some(f.sets.len()),
            Err(Error::CapExceeded(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    Ok(TrialRecord {
        tests,
        trial,
        defective_seed,
        design_seed,
        positives: y.positives(),
        comp_size: comp.size(),
        sole_defective: decoders::sole_defective_indicator(&design, &truth)?,
        outcomes,
        size_k_satisfying,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderEstimate {
    pub algorithm: Algorithm,
    pub successes: u64,
    /// Trials counted in the estimate: truncated SSS runs are left out.
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub truncated: u64,
    /// Successes out of all trials if truncated runs whose incumbent is
    /// correct also count.
    pub lenient_successes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessPoint {
    pub tests: usize,
    pub trials: u64,
    pub decoders: Vec<DecoderEstimate>,
    pub comp_size_gt_k: u64,
    pub sss_size_lt_k: u64,
    pub sss_not_unique: u64,
    pub sss_truncated: u64,
    /// `|SSS| < k` and `|COMP| > k` together.
    pub sss_small_and_comp_large: u64,
    pub sole_defective: u64,
    /// Trials with at least two size-k satisfying sets, when counted.
    pub multiple_size_k: Option<u64>,
}

impl SuccessPoint {
    pub fn decoder(&self, algorithm: Algorithm) -> Option<&DecoderEstimate> {
        self.decoders.iter().find(|d| d.algorithm == algorithm)
    }

    pub fn from_records(config: &ExperimentConfig, tests: usize, records: &[TrialRecord]) -> Self {
        let trials = records.len() as u64;
        let k = config.k;
        let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;

        let decoders = config
            .decoders
            .iter()
            .map(|&alg| {
                let get = |r: &TrialRecord| r.outcome(alg).cloned().expect("decoder ran");
                let successes = count(&|r| get(r).success);
                let lenient = count(&|r| {
                    let o = get(r);
                    o.success || (o.status == TrialStatus::Truncated && o.correct)
                });
                let truncated = count(&|r| get(r).status == TrialStatus::Truncated);
                let counted = trials - truncated;
                let (ci_low, ci_high) = wilson_interval(successes, counted);
                DecoderEstimate {
                    algorithm: alg,
                    successes,
                    trials: counted,
                    estimate: if counted == 0 { 0.0 } else { successes as f64 / counted as f64 },
                    ci_low,
                    ci_high,
                    truncated,
                    lenient_successes: lenient,
                }
            })
            .collect();

        let sss = |r: &TrialRecord| r.outcome(Algorithm::Sss).cloned();
        let multiple_size_k = if records.iter().all(|r| r.size_k_satisfying.is_some()) && config.oracle_diagnostics {
            Some(count(&|r| r.size_k_satisfying.unwrap_or(0) >= 2))
        } else {
            None
        };
        SuccessPoint {
            tests,
            trials,
            decoders,
            comp_size_gt_k: count(&|r| r.comp_size > k),
            sss_size_lt_k: count(&|r| sss(r).is_some_and(|o| o.size < k)),
            sss_not_unique: count(&|r| sss(r).is_some_and(|o| o.status == TrialStatus::NotUnique)),
            sss_truncated: count(&|r| sss(r).is_some_and(|o| o.status == TrialStatus::Truncated)),
            sss_small_and_comp_large: count(&|r| r.comp_size > k && sss(r).is_some_and(|o| o.size < k)),
            sole_defective: count(&|r| r.sole_defective),
            multiple_size_k,
        }
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| domain(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// All trials at one grid point, in trial order.
pub fn run_trials(config: &ExperimentConfig, tests: usize) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    in_pool(config.threads, || {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, tests, i))
            .collect::<Result<Vec<_>>>()
    })?
}

pub fn estimate_success(config: &ExperimentConfig, tests: usize) -> Result<SuccessPoint> {
    let records = run_trials(config, tests)?;
    Ok(SuccessPoint::from_records(config, tests, &records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub master_seed: u64,
    pub points: Vec<SuccessPoint>,
}

impl SuccessCurve {
    /// `(T, estimate)` pairs for one decoder.
    pub fn series(&self, algorithm: Algorithm) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|pt| pt.decoder(algorithm).map(|d| (pt.tests as f64, d.estimate)))
            .collect()
    }
}

/// Success curve over the whole test grid. Results do not depend on the
/// thread count.
pub fn sweep_tests(config: &ExperimentConfig) -> Result<SuccessCurve> {
    Ok(sweep_tests_with_records(config)?.0)
}

/// As [`sweep_tests`], also returning every trial, ordered by grid point
/// then trial index.
pub fn sweep_tests_with_records(config: &ExperimentConfig) -> Result<(SuccessCurve, Vec<TrialRecord>)> {
    config.validate()?;
    let p = config.p()?;
    let pairs: Vec<(usize, usize)> = config
        .t_grid
        .iter()
        .flat_map(|&t| (0..config.trials).map(move |i| (t, i)))
        .collect();
    let records = in_pool(config.threads, || {
        pairs
            .par_iter()
            .map(|&(t, i)| run_trial(config, t, i))
            .collect::<Result<Vec<_>>>()
    })??;
    let points = records
        .chunks(config.trials)
        .zip(&config.t_grid)
        .map(|(chunk, &t)| SuccessPoint::from_records(config, t, chunk))
        .collect();
    let curve = SuccessCurve { n: config.n, k: config.k, p, master_seed: config.master_seed, points };
    Ok((curve, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub level: f64,
    /// Linear interpolation between the bracketing points.
    pub tests: f64,
    pub below: (f64, f64),
    pub above: (f64, f64),
}

/// First upward crossing of `level` in a series of `(T, success)` points.
pub fn crossing(points: &[(f64, f64)], level: f64) -> Result<ThresholdEstimate> {
    if let Some(&(t, s)) = points.first() {
        if s >= level {
            return Ok(ThresholdEstimate { level, tests: t, below: (t, s), above: (t, s) });
        }
    }
    for w in points.windows(2) {
        let ((t0, s0), (t1, s1)) = (w[0], w[1]);
        if s0 < level && s1 >= level {
            let tests = t0 + (level - s0) / (s1 - s0) * (t1 - t0);
            return Ok(ThresholdEstimate { level, tests, below: w[0], above: w[1] });
        }
    }
    Err(Error::NoCrossing { level })
}

/// Where `algorithm`'s success estimate first reaches `1 - delta`.
pub fn estimate_threshold(curve: &SuccessCurve, algorithm: Algorithm, delta: f64) -> Result<ThresholdEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("delta = {delta} outside (0, 1)")));
    }
    crossing(&curve.series(algorithm), 1.0 - delta)
}

/// Monte Carlo frequency of the sole-defective event with `n = k`, every item defective.
pub fn sole_defective_frequency(k: usize, tests: usize, p: f64, draws: usize, seed: u64) -> Result<u64> {
    let truth = DefectiveSet::from_items(0..k);
    let mut hits = 0;
    for i in 0..draws {
        let design = generate_design(k, tests, p, derive_seed(seed, Stream::Design, &[tests as u64, i as u64]))?;
        if decoders::sole_defective_indicator(&design, &truth)? {
            hits += 1;
        }
    }
    Ok(hits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub theta: f64,
    pub capacity: f64,
    pub counting: f64,
    pub dd: f64,
    pub comp: f64,
}

/// `0.01, 0.02, ..., 0.99`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Rate curves for every θ in `thetas`.
pub fn figure1_data(thetas: &[f64]) -> Result<Vec<Figure1Row>> {
    thetas
        .iter()
        .map(|&theta| {
            Ok(Figure1Row {
                theta,
                capacity: rates::capacity(theta)?.value,
                counting: rates::counting_bound(theta)?.value,
                dd: rates::dd_rate(theta)?.value,
                comp: rates::comp_max_rate(theta)?.value,
            })
        })
        .collect()
}
