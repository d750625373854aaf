//! Closed-form rates, capacity and test-count thresholds for Bernoulli
//! nonadaptive group testing.
//!
//! Logarithms written `log` are base 2; `ln` is natural. Rates are measured
//! in bits per test, thresholds in tests.
//!
//! The ν parameter relates to the Bernoulli inclusion probability through
//! `p = 1 - exp(-ν/k)`, so that a test is negative with probability
//! `(1-p)^k = exp(-ν)`.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optimize::{self, NU_MAX, NU_MIN};

/// Largest `n` for which [`log_binom`] uses exact integer arithmetic.
pub const EXACT_BINOM_MAX_N: u64 = 64;

/// Half-width around a golden-section optimum searched for an exact kink.
const POLISH_RADIUS: f64 = 1e-6;

/// `1 / (e ln 2) ≈ 0.531`, the recurring COMP/DD rate constant.
pub const INV_E_LN2: f64 = 1.0 / (E * LN_2);

/// Problem size, either as counts or as a sparsity exponent `k ≈ n^θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemScale {
    pub n: Option<u64>,
    pub k: Option<u64>,
    pub theta: Option<f64>,
}

impl ProblemScale {
    /// Counts with `θ = ln k / ln n` derived when it is defined.
    pub fn from_counts(n: u64, k: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("n must be positive"));
        }
        if k > n {
            return Err(domain(format!("k = {k} exceeds n = {n}")));
        }
        let theta = if n >= 2 && k >= 1 && k < n {
            Some((k as f64).ln() / (n as f64).ln())
        } else {
            None
        };
        Ok(Self { n: Some(n), k: Some(k), theta })
    }

    pub fn from_theta(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self { n: None, k: None, theta: Some(theta) })
    }
}

/// Density parameter ν together with the inclusion probability it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuParam {
    pub nu: f64,
    pub k: u64,
    pub p: f64,
}

impl NuParam {
    pub fn new(nu: f64, k: u64) -> Result<Self> {
        Ok(Self { nu, k, p: nu_to_p(nu, k)? })
    }

    pub fn from_p(p: f64, k: u64) -> Result<Self> {
        Ok(Self { nu: p_to_nu(p, k)?, k, p })
    }

    /// `q = 1 - p`.
    pub fn q(&self) -> f64 {
        1.0 - self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundKind {
    Capacity,
    CountingBound,
    CompRate,
    DdRate,
    TStar,
    TTyp,
    TComp,
    TSss,
}

impl BoundKind {
    /// True for bits-per-test quantities, false for test counts.
    pub fn is_rate(self) -> bool {
        matches!(
            self,
            Self::Capacity | Self::CountingBound | Self::CompRate | Self::DdRate
        )
    }
}

/// Which branch of the capacity formula is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapacityRegime {
    /// θ = 0: bounded number of defectives.
    BoundedDefectives,
    /// θ ≤ 1/3: the entropy term is binding, C = 1 at ν = ln 2.
    CountingLimited,
    /// 1/3 < θ < θ*: both terms bind; the optimum is where they cross.
    Crossover,
    /// θ ≥ θ*: the first term is binding, maximised at ν = 1.
    DensityLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub kind: BoundKind,
    pub value: f64,
    pub scale: ProblemScale,
    pub nu: Option<NuParam>,
    /// The optimising ν, for formulas defined by an optimisation over ν.
    pub optimal_nu: Option<f64>,
    pub regime: Option<CapacityRegime>,
}

impl RateBound {
    fn new(kind: BoundKind, value: f64, scale: ProblemScale) -> Self {
        Self { kind, value, scale, nu: None, optimal_nu: None, regime: None }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&theta) {
        return Err(domain(format!("theta = {theta} outside [0, 1)")));
    }
    Ok(())
}

fn check_probability(x: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{what} = {x} outside [0, 1]")));
    }
    Ok(())
}

/// `h(x) = x log(1/x) + (1-x) log(1/(1-x))`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability(x, "x")?;
    Ok(entropy_unchecked(x))
}

pub(crate) fn entropy_unchecked(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let y = 1.0 - x;
    -(x * x.log2() + y * y.log2())
}

/// Natural log of the binomial coefficient `C(n, k)`.
///
/// Exact integer arithmetic for `n ≤ 64`; above that, a sum of log ratios
/// when `min(k, n-k)` is small and log-gamma otherwise.
pub fn ln_binom(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(domain(format!("k = {k} exceeds n = {n}")));
    }
    let kk = k.min(n - k);
    if kk == 0 {
        return Ok(0.0);
    }
    if n <= EXACT_BINOM_MAX_N {
        return Ok((exact_binom(n, kk) as f64).ln());
    }
    if kk <= 256 {
        let base = (n - kk) as f64;
        let sum: f64 = (1..=kk).map(|i| (base / i as f64).ln_1p()).sum();
        return Ok(sum);
    }
    let nf = n as f64;
    let kf = kk as f64;
    Ok(libm::lgamma(nf + 1.0) - libm::lgamma(kf + 1.0) - libm::lgamma(nf - kf + 1.0))
}

fn exact_binom(n: u64, k: u64) -> u64 {
    // C(n, i+1) = C(n, i) (n - i) / (i + 1) divides exactly at every step.
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c as u64
}

/// `log2 C(n, k)`: bits needed to name a `k`-subset of `n` items.
pub fn log_binom(n: u64, k: u64) -> Result<f64> {
    Ok(ln_binom(n, k)? / LN_2)
}

/// `p = 1 - exp(-ν/k)`.
pub fn nu_to_p(nu: f64, k: u64) -> Result<f64> {
    if !nu.is_finite() || nu <= 0.0 {
        return Err(domain(format!("nu = {nu} must be positive")));
    }
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    Ok(-(-nu / k as f64).exp_m1())
}

/// Inverse of [`nu_to_p`]: `ν = -k ln(1 - p)`.
pub fn p_to_nu(p: f64, k: u64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("p = {p} outside (0, 1)")));
    }
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    Ok(-(k as f64) * (-p).ln_1p())
}

/// `θ* = 1 / (1 + h(1/e) e ln 2) ≈ 0.359`, where the capacity formula
/// switches to the density-limited branch.
pub fn theta_star() -> f64 {
    1.0 / (1.0 + entropy_unchecked((-1.0f64).exp()) * E * LN_2)
}

/// First term of the capacity max-min: `(ν e^{-ν} / ln 2) (1-θ)/θ`.
pub fn capacity_density_term(nu: f64, theta: f64) -> f64 {
    nu * (-nu).exp() / LN_2 * (1.0 - theta) / theta
}

/// Second term of the capacity max-min: `h(e^{-ν})`.
pub fn capacity_entropy_term(nu: f64) -> f64 {
    entropy_unchecked((-nu).exp())
}

/// `C(θ) = max_ν min{ (ν e^{-ν}/ln 2)(1-θ)/θ, h(e^{-ν}) }`.
pub fn capacity(theta: f64) -> Result<RateBound> {
    check_theta(theta)?;
    let scale = ProblemScale::from_theta(theta)?;
    let mut bound = RateBound::new(BoundKind::Capacity, 1.0, scale);

    let (nu, value, regime) = if theta == 0.0 {
        (LN_2, 1.0, CapacityRegime::BoundedDefectives)
    } else if theta <= 1.0 / 3.0 {
        (LN_2, 1.0, CapacityRegime::CountingLimited)
    } else if theta >= theta_star() {
        (1.0, INV_E_LN2 * (1.0 - theta) / theta, CapacityRegime::DensityLimited)
    } else {
        let objective =
            |nu: f64| capacity_density_term(nu, theta).min(capacity_entropy_term(nu));
        let (mut nu, mut value) = optimize::maximize(objective, NU_MIN, NU_MAX);
        if let Some(x) = optimize::polish_crossing(
            |v| capacity_density_term(v, theta),
            capacity_entropy_term,
            nu,
            POLISH_RADIUS,
        ) {
            nu = x;
            value = objective(x);
        }
        (nu, value, CapacityRegime::Crossover)
    };

    bound.value = value;
    bound.optimal_nu = Some(nu);
    bound.regime = Some(regime);
    Ok(bound)
}

fn min_max_threshold(
    kind: BoundKind,
    n: u64,
    k: u64,
    info_bits: f64,
) -> Result<RateBound> {
    let scale = ProblemScale::from_counts(n, k)?;
    let coupon = k as f64 * (k as f64).ln();
    let (nu, value) = if k == 1 {
        (LN_2, info_bits)
    } else {
        let first = |nu: f64| coupon / (nu * (-nu).exp());
        let second = |nu: f64| info_bits / capacity_entropy_term(nu);
        let objective = |nu: f64| first(nu).max(second(nu));
        let (nu, value) = optimize::minimize(objective, NU_MIN, NU_MAX);
        match optimize::polish_crossing(first, second, nu, POLISH_RADIUS) {
            Some(x) => (x, objective(x)),
            None => (nu, value),
        }
    };
    let mut bound = RateBound::new(kind, value, scale);
    bound.optimal_nu = Some(nu);
    bound.nu = Some(NuParam::new(nu, k)?);
    Ok(bound)
}

/// `T* = min_ν max{ k ln k / (ν e^{-ν}), log2 C(n,k) / h(e^{-ν}) }` with the
/// exact binomial.
pub fn t_star(n: u64, k: u64) -> Result<RateBound> {
    if k < 1 || k >= n {
        return Err(domain(format!("t_star needs 1 <= k < n, got n = {n}, k = {k}")));
    }
    min_max_threshold(BoundKind::TStar, n, k, log_binom(n, k)?)
}

/// As [`t_star`], but with the asymptotic `k log2(n/k)` in place of
/// `log2 C(n,k)`.
pub fn t_sss(n: u64, k: u64) -> Result<RateBound> {
    if k < 2 || k >= n {
        return Err(domain(format!("t_sss needs 2 <= k < n, got n = {n}, k = {k}")));
    }
    let bits = k as f64 * (n as f64 / k as f64).log2();
    min_max_threshold(BoundKind::TSss, n, k, bits)
}

/// Typicality bound `log2 C(n,k) / h((1-p)^k)`.
pub fn t_typ(n: u64, k: u64, p: f64) -> Result<RateBound> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("p = {p} outside (0, 1)")));
    }
    if k < 1 || k > n {
        return Err(domain(format!("t_typ needs 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let negative = (k as f64 * (-p).ln_1p()).exp();
    if negative <= 0.0 || negative >= 1.0 {
        return Err(Error::Degenerate(format!(
            "(1-p)^k = {negative} leaves zero entropy per test"
        )));
    }
    let scale = ProblemScale::from_counts(n, k)?;
    let mut bound = RateBound::new(
        BoundKind::TTyp,
        log_binom(n, k)? / entropy_unchecked(negative),
        scale,
    );
    bound.nu = Some(NuParam::from_p(p, k)?);
    Ok(bound)
}

/// COMP threshold `e k ln n`.
pub fn t_comp(n: u64, k: u64) -> Result<RateBound> {
    if n < 2 || k < 1 || k > n {
        return Err(domain(format!("t_comp needs n >= 2, 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let scale = ProblemScale::from_counts(n, k)?;
    let mut bound = RateBound::new(BoundKind::TComp, E * k as f64 * (n as f64).ln(), scale);
    bound.optimal_nu = Some(1.0);
    bound.nu = Some(NuParam::new(1.0, k)?);
    Ok(bound)
}

/// Maximum COMP rate `(1-θ) / (e ln 2)`.
pub fn comp_max_rate(theta: f64) -> Result<RateBound> {
    check_theta(theta)?;
    Ok(RateBound::new(
        BoundKind::CompRate,
        INV_E_LN2 * (1.0 - theta),
        ProblemScale::from_theta(theta)?,
    ))
}

/// Achievable DD rate `(1/(e ln 2)) min{(1-θ)/θ, 1}`.
pub fn dd_rate(theta: f64) -> Result<RateBound> {
    check_theta(theta)?;
    // same operation order as the density-limited capacity, so the two agree
    // exactly where they coincide
    let value = if theta < 0.5 { INV_E_LN2 } else { INV_E_LN2 * (1.0 - theta) / theta };
    Ok(RateBound::new(
        BoundKind::DdRate,
        value,
        ProblemScale::from_theta(theta)?,
    ))
}

/// The universal ceiling `R ≤ 1`.
pub fn counting_bound(theta: f64) -> Result<RateBound> {
    check_theta(theta)?;
    Ok(RateBound::new(BoundKind::CountingBound, 1.0, ProblemScale::from_theta(theta)?))
}

/// Rate `log2 C(n,k) / T` in bits per test.
pub fn rate(n: u64, k: u64, tests: u64) -> Result<f64> {
    if tests == 0 {
        return Err(domain("rate needs at least one test"));
    }
    Ok(log_binom(n, k)? / tests as f64)
}
