//! Detection algorithms for noiseless group testing.
//!
//! * COMP: every item never seen in a negative test is declared defective.
//!   This is the unique largest satisfying set.
//! * DD: among COMP's possible defectives, declare those that are the only
//!   possible defective in some positive test. Never a false positive.
//! * SCOMP: extend DD greedily until every positive test is explained.
//! * SSS: an exact smallest satisfying set, by branch and bound.

use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::design::{check_dims, DefectiveSet, OutcomeVector, TestDesign};
use crate::error::{Error, Result};

/// Default node budget for [`sss_decode`].
pub const DEFAULT_SSS_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "COMP")]
    Comp,
    #[serde(rename = "DD")]
    Dd,
    #[serde(rename = "SCOMP")]
    Scomp,
    #[serde(rename = "SSS")]
    Sss,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Comp, Self::Dd, Self::Scomp, Self::Sss];

    pub fn name(self) -> &'static str {
        match self {
            Self::Comp => "COMP",
            Self::Dd => "DD",
            Self::Scomp => "SCOMP",
            Self::Sss => "SSS",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "COMP" => Ok(Self::Comp),
            "DD" => Ok(Self::Dd),
            "SCOMP" => Ok(Self::Scomp),
            "SSS" => Ok(Self::Sss),
            other => Err(Error::Domain(format!("unknown decoder {other:?}"))),
        }
    }
}

/// Whether the returned estimate is the only one of its kind. Only SSS
/// reports anything other than `Unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Uniqueness {
    Unique,
    NotUnique,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub estimate: DefectiveSet,
    pub algorithm: Algorithm,
    pub unique: Uniqueness,
}

impl DecodeResult {
    fn new(estimate: DefectiveSet, algorithm: Algorithm) -> Self {
        Self { estimate, algorithm, unique: Uniqueness::Unknown }
    }

    pub fn size(&self) -> usize {
        self.estimate.len()
    }

    pub fn has_size(&self, k: usize) -> bool {
        self.estimate.len() == k
    }
}

/// Items that appear in no negative test, as a mask.
pub fn possible_defectives(design: &TestDesign, y: &OutcomeVector) -> Result<BitVec> {
    check_dims(design, y)?;
    let mut ruled_out = BitVec::zeros(design.items());
    for (t, row) in design.rows().iter().enumerate() {
        if !y.is_positive(t) {
            ruled_out.or_assign(row);
        }
    }
    Ok(ruled_out.not())
}

fn definite_defectives(design: &TestDesign, y: &OutcomeVector, possible: &BitVec) -> BitVec {
    let mut definite = BitVec::zeros(design.items());
    for (t, row) in design.rows().iter().enumerate() {
        if y.is_positive(t) {
            if let Some(i) = row.sole_common(possible) {
                definite.set(i, true);
            }
        }
    }
    definite
}

pub fn comp_decode(design: &TestDesign, y: &OutcomeVector) -> Result<DecodeResult> {
    let possible = possible_defectives(design, y)?;
    Ok(DecodeResult::new(DefectiveSet::from_mask(&possible), Algorithm::Comp))
}

pub fn dd_decode(design: &TestDesign, y: &OutcomeVector) -> Result<DecodeResult> {
    let possible = possible_defectives(design, y)?;
    let definite = definite_defectives(design, y, &possible);
    Ok(DecodeResult::new(DefectiveSet::from_mask(&definite), Algorithm::Dd))
}

pub fn scomp_decode(design: &TestDesign, y: &OutcomeVector) -> Result<DecodeResult> {
    let possible = possible_defectives(design, y)?;
    let chosen = scomp_mask(design, y, &possible)?;
    Ok(DecodeResult::new(DefectiveSet::from_mask(&chosen), Algorithm::Scomp))
}

fn scomp_mask(design: &TestDesign, y: &OutcomeVector, possible: &BitVec) -> Result<BitVec> {
    let mut chosen = definite_defectives(design, y, possible);
    let mut uncovered: Vec<usize> = (0..design.tests())
        .filter(|&t| y.is_positive(t) && !design.row(t).intersects(&chosen))
        .collect();

    while !uncovered.is_empty() {
        let mut counts = vec![0usize; design.items()];
        for &t in &uncovered {
            let row = design.row(t);
            for i in row.iter_ones().filter(|&i| possible.get(i)) {
                counts[i] += 1;
            }
        }
        // max_by_key keeps the last maximum; scan in reverse for lowest index
        let (best, &hits) = counts
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|&(_, c)| *c)
            .expect("designs have at least one item");
        if hits == 0 {
            return Err(Error::Inconsistent);
        }
        chosen.set(best, true);
        uncovered.retain(|&t| !design.row(t).get(best));
    }
    Ok(chosen)
}

/// True iff every defective is the only defective in at least one test.
/// When this fails, some `k-1` subset of `defectives` is also satisfying.
pub fn sole_defective_indicator(design: &TestDesign, defectives: &DefectiveSet) -> Result<bool> {
    defectives.check_range(design.items())?;
    let mask = defectives.to_mask(design.items())?;
    let mut certified = BitVec::zeros(design.items());
    for row in design.rows() {
        if let Some(i) = row.sole_common(&mask) {
            certified.set(i, true);
        }
    }
    Ok(certified == mask)
}

/// Smallest satisfying set by branch and bound, with a uniqueness check.
///
/// The search runs over set covers of the positive tests by COMP's possible
/// defectives, with DD's definite defectives forced in. It branches on the
/// uncovered test with the fewest remaining coverers, trying coverers in
/// increasing item order and excluding each from later siblings, so every
/// candidate set is visited at most once. The bound is the number of
/// uncovered tests with pairwise disjoint coverer sets.
///
/// Exceeding `budget` search nodes returns [`Error::BudgetExceeded`] with the
/// best satisfying set found so far.
pub fn sss_decode(design: &TestDesign, y: &OutcomeVector, budget: u64) -> Result<DecodeResult> {
    let possible = possible_defectives(design, y)?;
    let definite = definite_defectives(design, y, &possible);
    let upper = scomp_mask(design, y, &possible)?;

    let candidates: Vec<usize> = possible.iter_ones().filter(|&i| !definite.get(i)).collect();
    let open_tests: Vec<usize> = (0..design.tests())
        .filter(|&t| y.is_positive(t) && !design.row(t).intersects(&definite))
        .collect();

    // coverers[j]: candidate indices (into `candidates`) contained in open test j
    let coverers: Vec<BitVec> = open_tests
        .iter()
        .map(|&t| {
            let row = design.row(t);
            let mut m = BitVec::zeros(candidates.len());
            for (c, &item) in candidates.iter().enumerate() {
                if row.get(item) {
                    m.set(c, true);
                }
            }
            m
        })
        .collect();
    // covers[c]: open tests containing candidate c
    let mut covers = vec![BitVec::zeros(open_tests.len()); candidates.len()];
    for (j, m) in coverers.iter().enumerate() {
        for c in m.iter_ones() {
            covers[c].set(j, true);
        }
    }

    let mut search = CoverSearch {
        coverers: &coverers,
        covers: &covers,
        best_size: upper.count_ones() - definite.count_ones(),
        found: Vec::new(),
        nodes: 0,
        budget,
    };
    let mut chosen = Vec::new();
    let complete = search.run(
        &mut chosen,
        &BitVec::zeros(open_tests.len()),
        &BitVec::zeros(candidates.len()),
    );

    let to_set = |sol: &[usize]| {
        let mut mask = definite.clone();
        for &c in sol {
            mask.set(candidates[c], true);
        }
        DefectiveSet::from_mask(&mask)
    };

    if !complete {
        let incumbent = search.found.first().map(|s| to_set(s)).unwrap_or_else(|| DefectiveSet::from_mask(&upper));
        return Err(Error::BudgetExceeded { budget, incumbent: Some(incumbent) });
    }

    let first = search.found.first().expect("greedy cover bounds the optimum");
    Ok(DecodeResult {
        estimate: to_set(first),
        algorithm: Algorithm::Sss,
        unique: if search.found.len() >= 2 { Uniqueness::NotUnique } else { Uniqueness::Unique },
    })
}

struct CoverSearch<'a> {
    coverers: &'a [BitVec],
    covers: &'a [BitVec],
    /// Size of the smallest cover known to exist.
    best_size: usize,
    /// Up to two distinct covers of size `best_size`.
    found: Vec<Vec<usize>>,
    nodes: u64,
    budget: u64,
}

impl CoverSearch<'_> {
    fn limit(&self) -> Option<usize> {
        if self.found.len() >= 2 {
            self.best_size.checked_sub(1)
        } else {
            Some(self.best_size)
        }
    }

    /// Returns false if the node budget ran out.
    fn run(&mut self, chosen: &mut Vec<usize>, covered: &BitVec, excluded: &BitVec) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        let Some(limit) = self.limit() else {
            return true;
        };

        // uncovered tests with their still-available coverers
        let mut open: Vec<(usize, BitVec)> = Vec::new();
        for (j, m) in self.coverers.iter().enumerate() {
            if !covered.get(j) {
                let mut avail = m.clone();
                avail.and_not_assign(excluded);
                open.push((j, avail));
            }
        }

        if open.is_empty() {
            let size = chosen.len();
            if size < self.best_size {
                self.best_size = size;
                self.found.clear();
                self.found.push(chosen.clone());
            } else if size == self.best_size && self.found.len() < 2 {
                self.found.push(chosen.clone());
            }
            return true;
        }

        open.sort_by_key(|(j, avail)| (avail.count_ones(), *j));
        if open[0].1.count_ones() == 0 {
            return true;
        }

        let mut used = BitVec::zeros(excluded.len());
        let mut bound = 0;
        for (_, avail) in &open {
            if !avail.intersects(&used) {
                bound += 1;
                used.or_assign(avail);
            }
        }
        if chosen.len() + bound > limit {
            return true;
        }

        let mut excluded_here = excluded.clone();
        let branch: Vec<usize> = open[0].1.iter_ones().collect();
        for c in branch {
            if !self.limit().is_some_and(|l| chosen.len() < l) {
                break;
            }
            let mut next_covered = covered.clone();
            next_covered.or_assign(&self.covers[c]);
            chosen.push(c);
            let ok = self.run(chosen, &next_covered, &excluded_here);
            chosen.pop();
            if !ok {
                return false;
            }
            excluded_here.set(c, true);
        }
        true
    }
}
