//! Brute-force ground truth for small instances.
//!
//! Enumeration recomputes every candidate's outcome vector from the design
//! columns and shares no code with the decoders, so it can judge them.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::decoders::{self, DecodeResult, Uniqueness, DEFAULT_SSS_BUDGET};
use crate::design::{self, check_dims, DefectiveSet, OutcomeVector, TestDesign};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationCaps {
    /// Largest `n` for enumerating all `2^n` subsets.
    pub max_items_all: usize,
    /// Largest `n` for enumerating `k`-subsets.
    pub max_items_fixed: usize,
    /// Largest `C(n, k)` for enumerating `k`-subsets.
    pub max_subsets_fixed: u64,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        Self { max_items_all: 16, max_items_fixed: 30, max_subsets_fixed: 10_000_000 }
    }
}

/// All satisfying sets for a `(design, y)` pair, in colexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfyingFamily {
    pub sets: Vec<DefectiveSet>,
    pub size_filter: Option<usize>,
    /// Number of size-`k` members when `size_filter = Some(k)`.
    pub d: Option<usize>,
}

impl SatisfyingFamily {
    pub fn count_of_size(&self, k: usize) -> usize {
        self.sets.iter().filter(|s| s.len() == k).count()
    }

    pub fn min_size(&self) -> Option<usize> {
        self.sets.iter().map(DefectiveSet::len).min()
    }

    pub fn union(&self) -> DefectiveSet {
        DefectiveSet::from_items(self.sets.iter().flat_map(|s| s.items().iter().copied()))
    }

    pub fn largest(&self) -> Option<&DefectiveSet> {
        self.sets.iter().max_by_key(|s| s.len())
    }
}

fn column_masks(design: &TestDesign) -> Vec<BitVec> {
    let mut cols = vec![BitVec::zeros(design.tests()); design.items()];
    for t in 0..design.tests() {
        for (i, col) in cols.iter_mut().enumerate() {
            if design.contains(i, t) {
                col.set(t, true);
            }
        }
    }
    cols
}

fn outcome_of(cols: &[BitVec], mask: u64, tests: usize) -> BitVec {
    let mut out = BitVec::zeros(tests);
    let mut m = mask;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out.or_assign(&cols[i]);
        m &= m - 1;
    }
    out
}

fn set_of(mask: u64) -> DefectiveSet {
    DefectiveSet::from_items((0..64).filter(|i| mask >> i & 1 == 1))
}

fn binom_u64(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
        if c > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    c as u64
}

pub fn enumerate_satisfying(
    design: &TestDesign,
    y: &OutcomeVector,
    k: Option<usize>,
) -> Result<SatisfyingFamily> {
    enumerate_satisfying_with_caps(design, y, k, EnumerationCaps::default())
}

pub fn enumerate_satisfying_with_caps(
    design: &TestDesign,
    y: &OutcomeVector,
    k: Option<usize>,
    caps: EnumerationCaps,
) -> Result<SatisfyingFamily> {
    check_dims(design, y)?;
    let n = design.items();
    let cols = column_masks(design);
    let target = y.bits();
    let tests = design.tests();
    let mut sets = Vec::new();

    match k {
        None => {
            if n > caps.max_items_all || n >= 64 {
                return Err(Error::CapExceeded(format!(
                    "{n} items exceeds the all-subsets cap of {}",
                    caps.max_items_all
                )));
            }
            for mask in 0..(1u64 << n) {
                if outcome_of(&cols, mask, tests) == *target {
                    sets.push(set_of(mask));
                }
            }
        }
        Some(k) => {
            if k > n {
                return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
            }
            let count = binom_u64(n as u64, k as u64);
            if n > caps.max_items_fixed || n >= 64 || count > caps.max_subsets_fixed {
                return Err(Error::CapExceeded(format!(
                    "C({n}, {k}) = {count} exceeds the fixed-size caps"
                )));
            }
            if k == 0 {
                if !target.any() {
                    sets.push(DefectiveSet::empty());
                }
            } else {
                // Gosper's hack walks k-subsets in increasing mask order
                let limit = 1u64 << n;
                let mut mask = (1u64 << k) - 1;
                while mask < limit {
                    if outcome_of(&cols, mask, tests) == *target {
                        sets.push(set_of(mask));
                    }
                    let c = mask & mask.wrapping_neg();
                    let r = mask + c;
                    mask = (((r ^ mask) >> 2) / c) | r;
                }
            }
        }
    }

    let d = k.map(|_| sets.len());
    Ok(SatisfyingFamily { sets, size_filter: k, d })
}

/// `1/d(y)`: the best success probability any decoder can have given `y`,
/// when the posterior is uniform over the `d` size-`k` satisfying sets.
pub fn posterior_success_bound(family: &SatisfyingFamily) -> Result<f64> {
    let d = family.d.ok_or_else(|| {
        Error::Domain("posterior bound needs a family restricted to size k".into())
    })?;
    if d == 0 {
        return Err(Error::EmptyFamily);
    }
    Ok(1.0 / d as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub k: usize,
    pub sss_size: usize,
    pub comp_size: usize,
    /// `|SSS| < k` and `|COMP| > k`.
    pub premise: bool,
    pub size_k_satisfying: usize,
    /// Up to two size-`k` satisfying sets strictly between SSS and COMP.
    pub witnesses: Vec<DefectiveSet>,
    pub holds: bool,
}

/// Checks on one instance that a small SSS and a large COMP estimate force
/// at least two satisfying sets of size `k`.
pub fn verify_sandwich_argument(
    design: &TestDesign,
    y: &OutcomeVector,
    k: usize,
) -> Result<SandwichReport> {
    let family = enumerate_satisfying(design, y, Some(k))?;
    let comp = decoders::comp_decode(design, y)?;
    let sss = decoders::sss_decode(design, y, DEFAULT_SSS_BUDGET)?;
    let premise = sss.size() < k && comp.size() > k;
    let witnesses: Vec<DefectiveSet> = family
        .sets
        .iter()
        .filter(|l| sss.estimate.is_subset(l) && l.is_subset(&comp.estimate))
        .take(2)
        .cloned()
        .collect();
    let size_k = family.sets.len();
    Ok(SandwichReport {
        k,
        sss_size: sss.size(),
        comp_size: comp.size(),
        premise,
        size_k_satisfying: size_k,
        witnesses,
        holds: !premise || size_k >= 2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckConfig {
    pub instances: usize,
    pub max_items: usize,
    pub max_defectives: usize,
    pub probabilities: Vec<f64>,
    /// Intermediate sets sampled per instance for the sandwich check.
    pub intermediate_samples: usize,
    pub seed: u64,
}

impl Default for OracleCheckConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            max_items: 12,
            max_defectives: 3,
            probabilities: vec![0.1, 0.3, 0.5],
            intermediate_samples: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantTally {
    pub name: String,
    pub checked: u64,
    pub violations: u64,
    /// Index and seed of the first violating instance.
    pub first_counterexample: Option<(usize, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub invariants: Vec<InvariantTally>,
    pub instances: usize,
    /// Frequencies of `|SSS| < k and |COMP| > k`, `|SSS| = k`, `|COMP| = k`.
    pub freq_both_fail: f64,
    pub freq_sss_size_k: f64,
    pub freq_comp_size_k: f64,
}

impl OracleCheckReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|t| t.violations == 0)
            && self.freq_both_fail >= 1.0 - self.freq_sss_size_k - self.freq_comp_size_k - 1e-12
    }
}

/// A random oracle-scale instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub design: TestDesign,
    pub defectives: DefectiveSet,
    pub outcomes: OutcomeVector,
}

pub fn random_instance(cfg: &OracleCheckConfig, index: usize) -> Result<Instance> {
    let seed = rng::derive_seed(cfg.seed, Stream::Auxiliary, &[index as u64]);
    let mut g = rng::generator(seed);
    let n = g.random_range(2..=cfg.max_items.max(2));
    let k = g.random_range(1..=cfg.max_defectives.min(n).max(1));
    let p = cfg.probabilities[g.random_range(0..cfg.probabilities.len())];
    let tests = g.random_range(1..=2 * n);
    let design = design::generate_design(
        n,
        tests,
        p,
        rng::derive_seed(seed, Stream::Design, &[]),
    )?;
    let defectives =
        design::sample_defective_set(n, k, rng::derive_seed(seed, Stream::Defectives, &[]))?;
    let outcomes = design::run_tests(&design, &defectives)?;
    Ok(Instance { seed, design, defectives, outcomes })
}

/// Runs the brute-force invariant suite, with `comp` standing in for the
/// COMP decoder so that a faulty implementation can be checked.
pub fn run_oracle_checks<F>(cfg: &OracleCheckConfig, comp: F) -> Result<OracleCheckReport>
where
    F: Fn(&TestDesign, &OutcomeVector) -> Result<DecodeResult>,
{
    if cfg.max_items > EnumerationCaps::default().max_items_all {
        return Err(Error::CapExceeded(format!(
            "oracle checks enumerate all subsets; {} items is too many",
            cfg.max_items
        )));
    }
    if cfg.probabilities.is_empty() {
        return Err(Error::Domain("no design probabilities given".into()));
    }

    let names = [
        "comp_superset",
        "comp_is_largest_satisfying",
        "sss_size_is_minimum",
        "sss_uniqueness_flag",
        "sandwich_intermediate_satisfying",
        "sandwich_implication",
        "dd_subset_of_truth",
    ];
    let mut tallies: Vec<InvariantTally> = names
        .iter()
        .map(|n| InvariantTally { name: n.to_string(), ..Default::default() })
        .collect();
    let (mut both_fail, mut sss_k, mut comp_k) = (0u64, 0u64, 0u64);

    for index in 0..cfg.instances {
        let inst = random_instance(cfg, index)?;
        let (d, y, truth) = (&inst.design, &inst.outcomes, &inst.defectives);
        let k = truth.len();
        let family = enumerate_satisfying(d, y, None)?;
        let members: HashSet<&DefectiveSet> = family.sets.iter().collect();

        let comp = comp(d, y)?;
        let sss = decoders::sss_decode(d, y, DEFAULT_SSS_BUDGET)?;
        let dd = decoders::dd_decode(d, y)?;
        let min = family.min_size().expect("the true set always satisfies");
        let minimal = family.sets.iter().filter(|s| s.len() == min).count();

        let mut record = |slot: usize, ok: bool| {
            let t = &mut tallies[slot];
            t.checked += 1;
            if !ok {
                t.violations += 1;
                t.first_counterexample.get_or_insert((index, inst.seed));
            }
        };

        record(0, truth.is_subset(&comp.estimate));
        record(
            1,
            members.contains(&comp.estimate) && comp.estimate == family.union(),
        );
        record(2, sss.size() == min && members.contains(&sss.estimate));
        record(
            3,
            match sss.unique {
                Uniqueness::Unique => minimal == 1,
                Uniqueness::NotUnique => minimal >= 2,
                Uniqueness::Unknown => false,
            },
        );

        let mut g = rng::generator(rng::derive_seed(inst.seed, Stream::Auxiliary, &[1]));
        let extra: Vec<usize> = comp
            .estimate
            .items()
            .iter()
            .copied()
            .filter(|&i| !sss.estimate.contains(i))
            .collect();
        let mut sandwich_ok = sss.estimate.is_subset(&comp.estimate);
        for _ in 0..cfg.intermediate_samples {
            let l = DefectiveSet::from_items(
                sss.estimate
                    .items()
                    .iter()
                    .copied()
                    .chain(extra.iter().copied().filter(|_| g.random_bool(0.5))),
            );
            sandwich_ok &= members.contains(&l);
        }
        record(4, sandwich_ok);

        let premise = sss.size() < k && comp.size() > k;
        record(5, !premise || family.count_of_size(k) >= 2);
        record(6, dd.estimate.is_subset(truth));

        both_fail += u64::from(premise);
        sss_k += u64::from(sss.size() == k);
        comp_k += u64::from(comp.size() == k);
    }

    let total = cfg.instances.max(1) as f64;
    Ok(OracleCheckReport {
        invariants: tallies,
        instances: cfg.instances,
        freq_both_fail: both_fail as f64 / total,
        freq_sss_size_k: sss_k as f64 / total,
        freq_comp_size_k: comp_k as f64 / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::run_tests;

    #[test]
    fn family_contains_truth() {
        let d = design::generate_design(9, 6, 0.3, 5).unwrap();
        let k = DefectiveSet::from_items([2, 7]);
        let y = run_tests(&d, &k).unwrap();
        let all = enumerate_satisfying(&d, &y, None).unwrap();
        assert!(all.sets.contains(&k));
        let fixed = enumerate_satisfying(&d, &y, Some(2)).unwrap();
        assert!(fixed.sets.contains(&k));
        assert!(fixed.d.unwrap() >= 1);
        assert_eq!(fixed.d.unwrap(), all.count_of_size(2));
    }

    #[test]
    fn all_ones_design_symmetry() {
        let d = design::generate_design(6, 4, 1.0, 0).unwrap();
        let y = run_tests(&d, &DefectiveSet::from_items([3])).unwrap();
        let all = enumerate_satisfying(&d, &y, None).unwrap();
        assert_eq!(all.sets.len(), 63);
        let fixed = enumerate_satisfying(&d, &y, Some(3)).unwrap();
        assert_eq!(fixed.d, Some(20));
    }

    #[test]
    fn colex_order() {
        let d = design::generate_design(4, 2, 1.0, 0).unwrap();
        let y = OutcomeVector::from_bools(&[true, true]);
        let fixed = enumerate_satisfying(&d, &y, Some(2)).unwrap();
        let got: Vec<Vec<usize>> = fixed.sets.iter().map(|s| s.items().to_vec()).collect();
        assert_eq!(got, vec![vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 3], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn caps_are_enforced() {
        let d = design::generate_design(20, 3, 0.5, 0).unwrap();
        let y = run_tests(&d, &DefectiveSet::from_items([1])).unwrap();
        assert!(matches!(enumerate_satisfying(&d, &y, None), Err(Error::CapExceeded(_))));
        assert!(enumerate_satisfying(&d, &y, Some(2)).is_ok());
        let tight = EnumerationCaps { max_subsets_fixed: 100, ..Default::default() };
        assert!(enumerate_satisfying_with_caps(&d, &y, Some(2), tight).is_err());
    }

    #[test]
    fn posterior_bound_values() {
        let one = SatisfyingFamily { sets: vec![DefectiveSet::empty()], size_filter: Some(0), d: Some(1) };
        assert_eq!(posterior_success_bound(&one).unwrap(), 1.0);
        let two = SatisfyingFamily {
            sets: vec![DefectiveSet::from_items([0]), DefectiveSet::from_items([1])],
            size_filter: Some(1),
            d: Some(2),
        };
        assert_eq!(posterior_success_bound(&two).unwrap(), 0.5);
        let none = SatisfyingFamily { sets: vec![], size_filter: Some(1), d: Some(0) };
        assert_eq!(posterior_success_bound(&none), Err(Error::EmptyFamily));
        let open = SatisfyingFamily { sets: vec![], size_filter: None, d: None };
        assert!(posterior_success_bound(&open).is_err());
    }

    #[test]
    fn sandwich_twin_defectives() {
        // items 0 and 1 always co-occur; item 2 is untested
        let d = TestDesign::from_rows(4, [vec![0, 1], vec![0, 1, 3], vec![3]]).unwrap();
        let k = DefectiveSet::from_items([0, 1]);
        let y = run_tests(&d, &k).unwrap();
        let r = verify_sandwich_argument(&d, &y, 2).unwrap();
        assert!(r.premise);
        assert!(r.size_k_satisfying >= 2);
        assert_eq!(r.witnesses.len(), 2);
        assert!(r.holds);
    }

    #[test]
    fn sandwich_vacuous_when_unique() {
        let d = TestDesign::from_rows(3, [vec![0], vec![1], vec![2]]).unwrap();
        let k = DefectiveSet::from_items([0, 2]);
        let y = run_tests(&d, &k).unwrap();
        let r = verify_sandwich_argument(&d, &y, 2).unwrap();
        assert!(!r.premise);
        assert_eq!(r.size_k_satisfying, 1);
        assert!(r.holds);
    }

    #[test]
    fn decoder_success_bounded_by_posterior() {
        // For a fixed design, group every size-k truth by its outcome vector;
        // a deterministic decoder can be right for at most one truth per group.
        for seed in 0..20u64 {
            let n = 8;
            let d = design::generate_design(n, 5, 0.3, seed).unwrap();
            let k = 2;
            let mut groups: std::collections::HashMap<Vec<u64>, (usize, usize)> = Default::default();
            for a in 0..n {
                for b in (a + 1)..n {
                    let truth = DefectiveSet::from_items([a, b]);
                    let y = run_tests(&d, &truth).unwrap();
                    let family = enumerate_satisfying(&d, &y, Some(k)).unwrap();
                    let bound = posterior_success_bound(&family).unwrap();
                    let hit = decoders::scomp_decode(&d, &y).unwrap().estimate == truth;
                    let e = groups.entry(y.bits().words().to_vec()).or_insert((0, 0));
                    e.0 += 1;
                    e.1 += usize::from(hit);
                    assert!((bound - 1.0 / family.sets.len() as f64).abs() < 1e-15);
                }
            }
            for (members, hits) in groups.values() {
                assert!(*hits as f64 / *members as f64 <= 1.0 / *members as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn small_suite_passes() {
        let cfg = OracleCheckConfig { instances: 50, ..Default::default() };
        let report = run_oracle_checks(&cfg, decoders::comp_decode).unwrap();
        assert!(report.passed(), "{report:?}");
    }
}
