//! Bernoulli test designs, defective sets and the noiseless outcome rule.
//!
//! Items are 0-indexed. A design is stored test-major: row `t` is an `n`-bit
//! vector whose bit `i` says whether item `i` is in test `t`.

use std::collections::BTreeSet;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{domain, Error, Result};
use crate::rng::{self, Generator};

/// Inclusion probabilities below this use geometric gap sampling.
const SPARSE_CUTOFF: f64 = 0.25;

pub const DESIGN_SCHEMA: &str = "grouptest.design/v1";
pub const OUTCOME_SCHEMA: &str = "grouptest.outcome/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignLimits {
    /// Maximum number of matrix cells (`n · T`) a generated design may hold.
    pub max_cells: u64,
}

impl Default for DesignLimits {
    fn default() -> Self {
        // 1 GiB of packed bits
        Self { max_cells: 1 << 33 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestDesign {
    n: usize,
    rows: Vec<BitVec>,
    p: Option<f64>,
    seed: Option<u64>,
}

impl TestDesign {
    /// Builds a design from per-test item lists. `p` and `seed` are unset.
    pub fn from_rows<I, R>(n: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = usize>,
    {
        let rows = rows
            .into_iter()
            .map(|r| BitVec::from_indices(n, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, rows, p: None, seed: None })
    }

    pub fn from_bit_rows(n: usize, rows: Vec<BitVec>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!("row of {} bits in a {n}-item design", bad.len())));
        }
        Ok(Self { n, rows, p: None, seed: None })
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn tests(&self) -> usize {
        self.rows.len()
    }

    /// The inclusion probability, for generated designs.
    pub fn p(&self) -> Option<f64> {
        self.p
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, t: usize) -> &BitVec {
        &self.rows[t]
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    #[inline]
    pub fn contains(&self, item: usize, test: usize) -> bool {
        self.rows[test].get(item)
    }

    /// Total number of ones in the matrix.
    pub fn weight(&self) -> usize {
        self.rows.iter().map(BitVec::count_ones).sum()
    }

    /// Column view: for each item, the set of tests containing it.
    pub fn columns(&self) -> Vec<BitVec> {
        let mut cols = vec![BitVec::zeros(self.tests()); self.n];
        for (t, row) in self.rows.iter().enumerate() {
            for i in row.iter_ones() {
                cols[i].set(t, true);
            }
        }
        cols
    }

    pub fn to_json_form(&self) -> DesignJson {
        DesignJson {
            schema: DESIGN_SCHEMA.to_string(),
            n: self.n,
            tests: self.tests(),
            p: self.p,
            seed: self.seed,
            rows: self.rows.iter().map(BitVec::to_hex).collect(),
        }
    }

    pub fn from_json_form(form: &DesignJson) -> Result<Self> {
        if form.schema != DESIGN_SCHEMA {
            return Err(domain(format!("unsupported design schema {:?}", form.schema)));
        }
        if form.rows.len() != form.tests {
            return Err(Error::Dimension(format!(
                "{} rows listed for {} tests",
                form.rows.len(),
                form.tests
            )));
        }
        let rows = form
            .rows
            .iter()
            .map(|r| BitVec::from_hex(form.n, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n: form.n, rows, p: form.p, seed: form.seed })
    }
}

/// Serialized design: `rows[t]` is the little-endian hex of test `t`'s item
/// bits (item `i` is bit `i % 8` of byte `i / 8`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignJson {
    pub schema: String,
    pub n: usize,
    pub tests: usize,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub rows: Vec<String>,
}

/// A sorted, duplicate-free set of item indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefectiveSet(Vec<usize>);

impl DefectiveSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Sorts and deduplicates.
    pub fn from_items(items: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = items.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn from_mask(mask: &BitVec) -> Self {
        Self(mask.iter_ones().collect())
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= n => Err(Error::IndexOutOfRange { item: max, n }),
            _ => Ok(()),
        }
    }

    pub fn to_mask(&self, n: usize) -> Result<BitVec> {
        BitVec::from_indices(n, self.0.iter().copied())
    }
}

/// Test outcomes; bit `t` set means test `t` was positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeVector {
    bits: BitVec,
}

impl OutcomeVector {
    pub fn from_bits(bits: BitVec) -> Self {
        Self { bits }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut bits = BitVec::zeros(values.len());
        for (t, &v) in values.iter().enumerate() {
            bits.set(t, v);
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_positive(&self, t: usize) -> bool {
        self.bits.get(t)
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    pub fn positives(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn to_json_form(&self) -> OutcomeJson {
        OutcomeJson {
            schema: OUTCOME_SCHEMA.to_string(),
            tests: self.len(),
            bits: self.bits.to_hex(),
        }
    }

    pub fn from_json_form(form: &OutcomeJson) -> Result<Self> {
        if form.schema != OUTCOME_SCHEMA {
            return Err(domain(format!("unsupported outcome schema {:?}", form.schema)));
        }
        Ok(Self { bits: BitVec::from_hex(form.tests, &form.bits)? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeJson {
    pub schema: String,
    pub tests: usize,
    pub bits: String,
}

pub fn generate_design(n: usize, tests: usize, p: f64, seed: u64) -> Result<TestDesign> {
    generate_design_with_limits(n, tests, p, seed, DesignLimits::default())
}

/// Each of the `n · T` cells is one independently with probability `p`.
///
/// Dense designs compare a 53-bit uniform against `p` per cell; sparse ones
/// (`p < 0.25`) draw geometric gaps between ones, which has the same law and
/// costs one draw per one instead of one per cell.
pub fn generate_design_with_limits(
    n: usize,
    tests: usize,
    p: f64,
    seed: u64,
    limits: DesignLimits,
) -> Result<TestDesign> {
    if n == 0 {
        return Err(domain("a design needs at least one item"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("p = {p} outside [0, 1]")));
    }
    let cells = n as u128 * tests as u128;
    if cells > u128::from(limits.max_cells) {
        return Err(Error::Size { cells, budget: limits.max_cells });
    }

    let mut rng = rng::generator(seed);
    let rows = (0..tests).map(|_| sample_row(&mut rng, n, p)).collect();
    Ok(TestDesign { n, rows, p: Some(p), seed: Some(seed) })
}

fn sample_row(rng: &mut Generator, n: usize, p: f64) -> BitVec {
    if p <= 0.0 {
        return BitVec::zeros(n);
    }
    if p >= 1.0 {
        return BitVec::ones(n);
    }
    let mut row = BitVec::zeros(n);
    if p < SPARSE_CUTOFF {
        let ln_q = libm::log1p(-p);
        let mut pos: usize = 0;
        loop {
            let u = rng::unit_f64_open0(rng.next_u64());
            // number of zeros before the next one
            let gap = (libm::log(u) / ln_q).floor();
            if gap >= (n - pos) as f64 {
                break;
            }
            pos += gap as usize;
            row.set(pos, true);
            pos += 1;
            if pos >= n {
                break;
            }
        }
    } else {
        for i in 0..n {
            if rng::unit_f64(rng.next_u64()) < p {
                row.set(i, true);
            }
        }
    }
    row
}

/// Uniform `k`-subset of `{0, …, n-1}` by Floyd's algorithm.
pub fn sample_defective_set(n: usize, k: usize, seed: u64) -> Result<DefectiveSet> {
    if k > n {
        return Err(domain(format!("k = {k} exceeds n = {n}")));
    }
    let mut rng = rng::generator(seed);
    let mut chosen = BTreeSet::new();
    for j in (n - k)..n {
        let t = rng.random_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    Ok(DefectiveSet(chosen.into_iter().collect()))
}

/// `y_t = 1` iff test `t` contains some item of `defectives`.
pub fn run_tests(design: &TestDesign, defectives: &DefectiveSet) -> Result<OutcomeVector> {
    defectives.check_range(design.n)?;
    let mask = defectives.to_mask(design.n)?;
    Ok(outcomes_for_mask(design, &mask))
}

pub(crate) fn outcomes_for_mask(design: &TestDesign, mask: &BitVec) -> OutcomeVector {
    let mut bits = BitVec::zeros(design.tests());
    for (t, row) in design.rows.iter().enumerate() {
        if row.intersects(mask) {
            bits.set(t, true);
        }
    }
    OutcomeVector { bits }
}

pub(crate) fn check_dims(design: &TestDesign, y: &OutcomeVector) -> Result<()> {
    if y.len() != design.tests() {
        return Err(Error::Dimension(format!(
            "{} outcomes for a design of {} tests",
            y.len(),
            design.tests()
        )));
    }
    Ok(())
}

/// True iff `candidate` would have produced exactly `y`.
pub fn is_satisfying(design: &TestDesign, y: &OutcomeVector, candidate: &DefectiveSet) -> Result<bool> {
    check_dims(design, y)?;
    Ok(run_tests(design, candidate)? == *y)
}
