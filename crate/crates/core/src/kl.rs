//! Bernoulli Kullback-Leibler divergence and its truncated variant.
//!
//! Every index and every lower-bound constraint is built from these two
//! kernels. Values live in [`ExtReal`], so `kl(p, 1)` for `p < 1` is a real
//! `+inf` rather than a large sentinel.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KlError {
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("target {0} is not a number")]
    NotANumber(f64),
}

/// A nonnegative real extended with `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal(0.0);
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);

    /// Wraps `value`, which must be `>= 0` (finite or `+inf`).
    pub fn new(value: f64) -> Option<Self> {
        if value >= 0.0 {
            Some(ExtReal(value))
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    /// Finite value, if any.
    pub fn finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    /// `count * self` with the measure-theoretic convention `0 * inf = 0`.
    pub fn scale_count(self, count: u64) -> ExtReal {
        if count == 0 {
            ExtReal::ZERO
        } else {
            ExtReal(self.0 * count as f64)
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        ExtReal(self.0 + rhs.0)
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        // No NaN can be constructed, so total_cmp agrees with the numeric order.
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            fmt::Display::fmt(&self.0, f)
        }
    }
}

fn check_probability(p: f64) -> Result<(), KlError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(KlError::OutOfRange(p))
    }
}

/// `kl(Bern(p) | Bern(q))` in nats, with `0 ln 0 = 0`.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<ExtReal, KlError> {
    check_probability(p)?;
    check_probability(q)?;
    Ok(ExtReal(kl_raw(p, q)))
}

/// Truncated divergence: `kl(p | min(q, 1))` when `p < q`, `0` otherwise.
///
/// `q` may be any real; targets of the form `mu* - w` are often negative.
pub fn kl_plus(p: f64, q: f64) -> Result<ExtReal, KlError> {
    check_probability(p)?;
    if q.is_nan() {
        return Err(KlError::NotANumber(q));
    }
    Ok(ExtReal(kl_plus_raw(p, q)))
}

/// Unchecked kernel, arguments must already lie in `[0, 1]`.
#[inline]
pub(crate) fn kl_raw(p: f64, q: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    if q <= 0.0 || q >= 1.0 {
        return f64::INFINITY;
    }
    let mut kl = 0.0;
    if p > 0.0 {
        kl += p * (p / q).ln();
    }
    if p < 1.0 {
        kl += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    // rounding can push values a hair below zero when p is close to q
    kl.max(0.0)
}

#[inline]
pub(crate) fn kl_plus_raw(p: f64, q: f64) -> f64 {
    if q <= p {
        0.0
    } else {
        kl_raw(p, q.min(1.0))
    }
}
