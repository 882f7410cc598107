//! CUSUM contrasts, local CUSUM, residual sums of squares, and the
//! acceptance-threshold rules used by the detectors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bitset::Bitset;
use crate::error::{CrispError, Result};
use crate::scalar::{CompensatedSum, Scalar};
use crate::sphere::LabeledDataset;

/// Direction convention for contrast maximization.
///
/// `Positive`/`Negative` score the signed contrast, for settings where the
/// direction of change is known (the usual choice on the circle, where a
/// region and its complement are both arcs). `TwoSided` scores the absolute
/// contrast.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sided {
    TwoSided,
    Positive,
    Negative,
}

impl Sided {
    /// Score used when comparing candidate regions.
    #[inline]
    pub fn score<T: Scalar>(self, signed: T) -> T {
        match self {
            Sided::TwoSided => signed.abs(),
            Sided::Positive => signed,
            Sided::Negative => -signed,
        }
    }
}

fn group_sums<T: Scalar>(members: &Bitset, ds: &LabeledDataset<T>) -> (T, usize) {
    let mut acc = CompensatedSum::new();
    let mut count = 0usize;
    for i in members.ones() {
        acc.add(ds.value(i));
        count += 1;
    }
    (acc.value(), count)
}

/// Signed CUSUM contrast of a candidate region against its complement:
/// `sqrt(|A| |Aᶜ| / n) (mean(A) - mean(Aᶜ))`, and 0 when either side is
/// empty.
pub fn cusum<T: Scalar>(members: &Bitset, ds: &LabeledDataset<T>) -> T {
    debug_assert_eq!(members.len(), ds.n());
    let n = ds.n();
    let (sum_in, count_in) = group_sums(members, ds);
    let count_out = n - count_in;
    if count_in == 0 || count_out == 0 {
        return T::zero();
    }
    let total = crate::scalar::compensated_sum(ds.values().iter().copied());
    let a = T::from_usize_lossy(count_in);
    let b = T::from_usize_lossy(count_out);
    let nn = T::from_usize_lossy(n);
    (a * b / nn).sqrt() * (sum_in / a - (total - sum_in) / b)
}

/// Local CUSUM of an inner region `A` against the rest of an outer region
/// `B`: `sqrt(|A| |B∖A| / |B|) |mean(A) - mean(B∖A)|`, and 0 when either
/// group is empty. Callers must pass `A ⊆ B`; with `B` the full index set
/// this equals `|cusum(A)|`.
pub fn local_cusum<T: Scalar>(inner: &Bitset, outer: &Bitset, ds: &LabeledDataset<T>) -> T {
    local_cusum_signed(inner, outer, ds).abs()
}

/// Signed variant of [`local_cusum`]: positive when the inner mean exceeds
/// the surrounding mean.
pub fn local_cusum_signed<T: Scalar>(inner: &Bitset, outer: &Bitset, ds: &LabeledDataset<T>) -> T {
    debug_assert!(inner.is_subset_of(outer), "inner must be a subset of outer");
    let (sum_in, count_in) = group_sums(inner, ds);
    let (sum_outer, count_outer) = group_sums(outer, ds);
    let count_rest = count_outer - count_in;
    if count_in == 0 || count_rest == 0 {
        return T::zero();
    }
    let a = T::from_usize_lossy(count_in);
    let b = T::from_usize_lossy(count_rest);
    let m = T::from_usize_lossy(count_outer);
    (a * b / m).sqrt() * (sum_in / a - (sum_outer - sum_in) / b)
}

/// Residual sum of squares of the two-group fit (`A`, `B∖A`) inside `B`,
/// each group about its own mean; empty groups contribute 0.
pub fn rss<T: Scalar>(inner: &Bitset, outer: &Bitset, ds: &LabeledDataset<T>) -> T {
    debug_assert!(inner.is_subset_of(outer), "inner must be a subset of outer");
    let (sum_in, count_in) = group_sums(inner, ds);
    let (sum_outer, count_outer) = group_sums(outer, ds);
    let count_rest = count_outer - count_in;
    let mean_in = if count_in > 0 {
        sum_in / T::from_usize_lossy(count_in)
    } else {
        T::zero()
    };
    let mean_rest = if count_rest > 0 {
        (sum_outer - sum_in) / T::from_usize_lossy(count_rest)
    } else {
        T::zero()
    };
    let mut acc = CompensatedSum::new();
    for i in outer.ones() {
        let centered = if inner.contains(i) {
            ds.value(i) - mean_in
        } else {
            ds.value(i) - mean_rest
        };
        acc.add(centered * centered);
    }
    acc.value().max(T::zero())
}

/// Chi-squared tail bound threshold `m + 2 sqrt(m λ) + 2 λ`.
pub fn rss_threshold_lm<T: Scalar>(m: usize, lambda_r: T) -> Result<T> {
    if m < 1 {
        return Err(CrispError::invalid(
            "residual threshold needs at least 1 degree of freedom",
        ));
    }
    if lambda_r < T::zero() {
        return Err(CrispError::invalid("lambda_r must be nonnegative"));
    }
    let m_t = T::from_usize_lossy(m);
    Ok(m_t + T::two() * (m_t * lambda_r).sqrt() + T::two() * lambda_r)
}

/// Upper `p` quantile of the chi-squared distribution with `m` degrees of
/// freedom (numerical inversion of the regularized incomplete gamma).
pub fn rss_threshold_chi2<T: Scalar>(m: usize, p: T) -> Result<T> {
    if m < 1 {
        return Err(CrispError::invalid(
            "residual threshold needs at least 1 degree of freedom",
        ));
    }
    let p = p.as_f64();
    if !(0.0 < p && p < 1.0) {
        return Err(CrispError::invalid("quantile level must lie in (0, 1)"));
    }
    let dist = ChiSquared::new(m as f64)
        .map_err(|e| CrispError::Numerical(format!("chi-squared setup: {e}")))?;
    let q = dist.inverse_cdf(1.0 - p);
    if !q.is_finite() {
        return Err(CrispError::Numerical(
            "chi-squared quantile inversion failed".into(),
        ));
    }
    Ok(T::from_f64_lossy(q))
}

/// Practical CUSUM acceptance threshold `sqrt(2 log(n J / 2))`.
pub fn cusum_threshold<T: Scalar>(n: usize, j: usize) -> Result<T> {
    let arg = n as f64 * j as f64 / 2.0;
    if arg <= 1.0 {
        return Err(CrispError::invalid(
            "cusum threshold needs n*J/2 > 1",
        ));
    }
    Ok(T::from_f64_lossy((2.0 * arg.ln()).sqrt()))
}

/// Rate-derived tail parameter `λ = 4 (d + 1) log n`.
pub fn rate_lambda<T: Scalar>(d: usize, n: usize) -> T {
    T::from_f64_lossy(4.0 * (d as f64 + 1.0) * (n as f64).ln())
}

/// Rate-derived CUSUM threshold `4 (n λ)^{1/4} + 8 sqrt(λ)`.
pub fn rate_cusum_threshold<T: Scalar>(n: usize, lambda: T) -> T {
    let l = lambda.as_f64();
    T::from_f64_lossy(4.0 * (n as f64 * l).powf(0.25) + 8.0 * l.sqrt())
}

/// Number of outer discs so that, with high probability, some randomly drawn
/// center direction lies within angle `alpha` of any fixed direction (or of
/// its antipode): `ceil(1 / P(cos²(angle) >= cos² alpha))` with the squared
/// cosine distributed Beta(1/2, (d-1)/2) for uniform directions on the
/// sphere in `R^d`.
pub fn num_outer_discs(d: usize, alpha: f64) -> Result<usize> {
    if d < 2 {
        return Err(CrispError::invalid("dimension must be at least 2"));
    }
    if !(0.0 < alpha && alpha < std::f64::consts::FRAC_PI_2) {
        return Err(CrispError::invalid("alpha must lie in (0, pi/2)"));
    }
    let x = alpha.cos().powi(2);
    let cdf = statrs::function::beta::beta_reg(0.5, (d as f64 - 1.0) / 2.0, x);
    let tail = 1.0 - cdf;
    if !(tail.is_finite() && tail > 0.0) {
        return Err(CrispError::Numerical(
            "incomplete beta evaluation failed".into(),
        ));
    }
    Ok((1.0 / tail).ceil().max(1.0) as usize)
}

/// Rule for the CUSUM acceptance threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LambdaTRule<T> {
    /// Fixed user-supplied value.
    Explicit(T),
    /// `sqrt(2 log(n J / 2))`.
    PracticalLog,
    /// `4 (n λ)^{1/4} + 8 sqrt(λ)` with `λ = 4 (d + 1) log n`.
    RateDerived,
}

/// Rule for the residual-sum-of-squares acceptance bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RssRule<T> {
    /// Upper `p` quantile of chi-squared with the fitted degrees of freedom.
    Chi2Quantile(T),
    /// `m + 2 sqrt(m λ_R) + 2 λ_R` with the given `λ_R`.
    LaurentMassart(T),
    /// Same bound with `λ_R = 4 (d + 1) log n`.
    RateDerived,
}

/// Threshold configuration for the multi-region detector. Both the practical
/// rules (defaults) and the rate-derived regime are available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig<T> {
    pub lambda_t: LambdaTRule<T>,
    pub rss: RssRule<T>,
}

impl<T: Scalar> ThresholdConfig<T> {
    /// Practical defaults: log-rule CUSUM threshold and the upper 0.05
    /// chi-squared quantile.
    pub fn practical() -> Self {
        Self {
            lambda_t: LambdaTRule::PracticalLog,
            rss: RssRule::Chi2Quantile(T::from_f64_lossy(0.05)),
        }
    }

    /// Rate-derived regime for both thresholds.
    pub fn rate_derived() -> Self {
        Self {
            lambda_t: LambdaTRule::RateDerived,
            rss: RssRule::RateDerived,
        }
    }

    pub fn resolve_lambda_t(&self, n: usize, j: usize, d: usize) -> Result<T> {
        let v = match self.lambda_t {
            LambdaTRule::Explicit(v) => v,
            LambdaTRule::PracticalLog => cusum_threshold(n, j)?,
            LambdaTRule::RateDerived => rate_cusum_threshold(n, rate_lambda::<T>(d, n)),
        };
        if v <= T::zero() {
            return Err(CrispError::invalid("lambda_t must be positive"));
        }
        Ok(v)
    }

    pub fn resolve_gamma(&self, m: usize, n: usize, d: usize) -> Result<T> {
        match self.rss {
            RssRule::Chi2Quantile(p) => rss_threshold_chi2(m, p),
            RssRule::LaurentMassart(lambda_r) => rss_threshold_lm(m, lambda_r),
            RssRule::RateDerived => rss_threshold_lm(m, rate_lambda::<T>(d, n)),
        }
    }
}
