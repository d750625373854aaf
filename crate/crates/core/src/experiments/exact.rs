//! Exact finite-n success probabilities.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{domain, Result};
use crate::rates::ln_binom;

/// Compensated (Neumaier) sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("p = {p} outside (0, 1)")));
    }
    Ok(())
}

/// Probability that COMP recovers the defective set exactly:
/// `E (1 - q^M)^{n-k}` with `M ~ Bin(T, q^k)` negative tests,
///
/// `Σ_m C(T,m) (q^k)^m (1-q^k)^{T-m} (1-q^m)^{n-k}`,
///
/// summed in log space.
pub fn exact_comp_success(n: u64, k: u64, tests: u64, p: f64) -> Result<f64> {
    check_p(p)?;
    if k > n {
        return Err(domain(format!("k = {k} exceeds n = {n}")));
    }
    if n == k {
        return Ok(1.0);
    }
    let ln_q = (-p).ln_1p();
    let ln_neg = k as f64 * ln_q;
    let ln_pos = (-(ln_neg.exp_m1())).ln();
    let others = (n - k) as f64;

    let mut logs = Vec::with_capacity(tests as usize);
    for m in 1..=tests {
        let mf = m as f64;
        // (1-q^k)^{T-m}: when k = 0 every test is negative
        let pos_part = if tests == m { 0.0 } else if k == 0 { f64::NEG_INFINITY } else { (tests - m) as f64 * ln_pos };
        let cover = others * (-((mf * ln_q).exp_m1())).ln();
        logs.push(ln_binom(tests, m)? + mf * ln_neg + pos_part + cover);
    }
    let Some(max) = logs.iter().copied().filter(|x| x.is_finite()).reduce(f64::max) else {
        return Ok(0.0);
    };
    let mut acc = CompensatedSum::default();
    for l in logs {
        acc.add((l - max).exp());
    }
    Ok((max.exp() * acc.value()).clamp(0.0, 1.0))
}

/// How [`exact_sole_defective_success`] evaluated its alternating sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumMethod {
    Double,
    /// Exact big-integer arithmetic after detecting cancellation.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoleDefectiveProbability {
    pub value: f64,
    pub method: SumMethod,
    /// Estimated absolute error of the double-precision sum.
    pub double_error: f64,
}

/// Relative error tolerated before switching to exact arithmetic.
const CANCELLATION_TOLERANCE: f64 = 1e-8;

/// Probability that each of `k` defectives is the only defective in at
/// least one of `T` Bernoulli(p) tests, by inclusion–exclusion:
///
/// `Σ_{j=0..k} (-1)^j C(k,j) (1 - j p (1-p)^{k-1})^T`.
pub fn exact_sole_defective_success(k: u64, tests: u64, p: f64) -> Result<f64> {
    Ok(exact_sole_defective_detailed(k, tests, p)?.value)
}

pub fn exact_sole_defective_detailed(k: u64, tests: u64, p: f64) -> Result<SoleDefectiveProbability> {
    check_p(p)?;
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    // per-test probability that a given defective is the only one present
    let r = p * ((k - 1) as f64 * (-p).ln_1p()).exp();

    let mut acc = CompensatedSum::default();
    let mut error = 0.0;
    for j in 0..=k {
        let ln_c = ln_binom(k, j)?;
        let jr = j as f64 * r;
        let x = if j == 0 { 0.0 } else if jr >= 1.0 { f64::NEG_INFINITY } else { tests as f64 * (-jr).ln_1p() };
        let magnitude = (ln_c + x).exp();
        let term = if j % 2 == 0 { magnitude } else { -magnitude };
        acc.add(term);
        error += magnitude * (x.abs() + ln_c + 4.0) * f64::EPSILON;
    }
    let value = acc.value();
    if error <= CANCELLATION_TOLERANCE * value.abs() {
        return Ok(SoleDefectiveProbability {
            value: value.clamp(0.0, 1.0),
            method: SumMethod::Double,
            double_error: error,
        });
    }
    Ok(SoleDefectiveProbability {
        value: exact_alternating_sum(k, tests, r).clamp(0.0, 1.0),
        method: SumMethod::Exact,
        double_error: error,
    })
}

/// Splits a positive finite double into `mantissa · 2^exponent`, odd mantissa.
fn dyadic(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut exp) = if field == 0 { (frac, -1074) } else { (frac | (1 << 52), field - 1075) };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += i64::from(tz);
    (mant, exp)
}

/// Evaluates the inclusion–exclusion sum exactly for the double `r`.
fn exact_alternating_sum(k: u64, tests: u64, r: f64) -> f64 {
    let (mant, exp) = dyadic(r);
    // r < 1, so r = mant / 2^scale with scale > 0
    let scale = (-exp) as u64;
    let one = BigInt::from(1u8) << scale;
    let mant = BigInt::from(mant);

    let mut total = BigInt::zero();
    let mut binom = BigUint::from(1u8);
    for j in 0..=k {
        let base = &one - &mant * BigInt::from(j);
        if !base.is_negative() {
            let power = base.pow(tests as u32);
            let term = BigInt::from(binom.clone()) * power;
            if j % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
        }
        binom = binom * BigUint::from(k - j) / BigUint::from(j + 1);
    }
    if !total.is_positive() {
        return 0.0;
    }
    // total / 2^(scale · T)
    let bits = total.bits();
    let shift = bits.saturating_sub(64);
    let top = (total >> shift).to_u64().expect("shifted to 64 bits");
    let exponent = shift as i64 - (scale * tests) as i64;
    libm::ldexp(top as f64, exponent.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32)
}
