//! Special-function kernel: log-gamma, sign-tracked log-space numbers and
//! rising/falling factorial powers.
//!
//! Merger rates multiply rising factorials whose magnitudes span hundreds of
//! orders of magnitude once the number of blocks reaches 10^5, so everything
//! here is expressed through [`LogValue`].
//!
//! `ln_gamma` combines three regimes:
//!
//! * `x >= 10`: Stirling series with eight Bernoulli corrections;
//! * `|x - 1| < 0.2` or `|x - 2| < 0.2`: Taylor series of `ln Γ(1 + z)` built on
//!   `ζ(k) - 1`, so the zeros at 1 and 2 keep full relative accuracy;
//! * everything else: upward recurrence into the Stirling range.

use std::cmp::Ordering;
use std::ops::{Div, Mul};

use crate::error::{domain, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const STIRLING_MIN: f64 = 10.0;

/// Factors of a rising factorial summed directly (in log-space) before
/// switching to a log-gamma ratio.
const DIRECT_PRODUCT_MAX: u64 = 64;

/// `B_{2k} / (2k (2k - 1))` for k = 1..=8.
const STIRLING_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// `ζ(k) - 1` for k = 2..=30.
const ZETA_MINUS_ONE: [f64; 29] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    0.000_994_575_127_818_085_3,
    0.000_494_188_604_119_464_6,
    0.000_246_086_553_308_048_3,
    0.000_122_713_347_578_489_1,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_84e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_33e-7,
    1.192_199_259_653_111e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
    7.450_711_789_835_429e-9,
    3.725_334_024_788_457e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_682e-10,
];

/// `ln Γ(x)` for `x > 0`; returns an error outside the domain.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return domain(format!("log_gamma requires x > 0, got {x}"));
    }
    Ok(ln_gamma(x))
}

/// Unchecked `ln Γ(x)`; NaN for `x <= 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x >= STIRLING_MIN {
        return stirling(x);
    }
    if (x - 1.0).abs() < 0.2 {
        return ln_gamma_1p(x - 1.0);
    }
    if (x - 2.0).abs() < 0.2 {
        let z = x - 2.0;
        return z.ln_1p() + ln_gamma_1p(z);
    }
    if x < 0.2 {
        return ln_gamma_1p(x) - x.ln();
    }
    let mut y = x;
    let mut prod = 1.0;
    while y < STIRLING_MIN {
        prod *= y;
        y += 1.0;
    }
    stirling(y) - prod.ln()
}

fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut sum = 0.0;
    let mut pow = inv;
    for c in STIRLING_COEFFS {
        sum += c * pow;
        pow *= inv2;
    }
    sum
}

fn stirling(x: f64) -> f64 {
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x)
}

/// `ln Γ(1 + z)` for `|z| < 0.25`.
fn ln_gamma_1p(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = -z;
    for (i, zm1) in ZETA_MINUS_ONE.iter().enumerate() {
        let k = (i + 2) as f64;
        pow *= -z;
        sum += zm1 * pow / k;
    }
    // pow carries (-z)^k, and the series term is (-1)^k (ζ(k)-1) z^k / k.
    -z.ln_1p() + z * (1.0 - EULER_GAMMA) + sum
}

/// `ln Γ(x) - ln Γ(y)` for positive arguments.
///
/// Large arguments go through the Stirling difference written in terms of
/// `ln_1p`, which avoids subtracting two values of size `x ln x`.
pub fn ln_gamma_ratio(x: f64, y: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    if x >= STIRLING_MIN && y >= STIRLING_MIN {
        let delta = x - y;
        (y - 0.5) * (delta / y).ln_1p() + delta * x.ln() - delta + stirling_tail(x)
            - stirling_tail(y)
    } else {
        ln_gamma(x) - ln_gamma(y)
    }
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Sign of a [`LogValue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn as_f64(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Zero => 0.0,
            Sign::Positive => 1.0,
        }
    }

    fn flip(self) -> Self {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        match (self, rhs) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        }
    }
}

/// A real number stored as `sign * exp(ln_abs)`.
///
/// When `sign` is [`Sign::Zero`] the magnitude field is ignored.
#[derive(Debug, Clone, Copy)]
pub struct LogValue {
    pub ln_abs: f64,
    pub sign: Sign,
}

impl LogValue {
    pub const ONE: LogValue = LogValue {
        ln_abs: 0.0,
        sign: Sign::Positive,
    };
    pub const ZERO: LogValue = LogValue {
        ln_abs: f64::NEG_INFINITY,
        sign: Sign::Zero,
    };

    pub fn positive(ln_abs: f64) -> Self {
        LogValue {
            ln_abs,
            sign: Sign::Positive,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => LogValue::positive(x.ln()),
            Some(Ordering::Less) => LogValue {
                ln_abs: (-x).ln(),
                sign: Sign::Negative,
            },
            _ => LogValue::ZERO,
        }
    }

    /// Converts back to a float; underflows to 0 and overflows to ±inf.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.ln_abs.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn recip(self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero LogValue");
        LogValue {
            ln_abs: -self.ln_abs,
            sign: self.sign,
        }
    }

    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return LogValue::ONE;
        }
        let sign = match self.sign {
            Sign::Negative if k % 2 != 0 => Sign::Negative,
            Sign::Zero => Sign::Zero,
            _ => Sign::Positive,
        };
        LogValue {
            ln_abs: self.ln_abs * f64::from(k),
            sign,
        }
    }

    /// Sum of two log-space values (log-sum-exp with signs).
    pub fn add(self, other: LogValue) -> LogValue {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let r = (small.ln_abs - big.ln_abs).exp();
        if big.sign == small.sign {
            LogValue {
                ln_abs: big.ln_abs + r.ln_1p(),
                sign: big.sign,
            }
        } else if r == 1.0 {
            LogValue::ZERO
        } else {
            LogValue {
                ln_abs: big.ln_abs + (-r).ln_1p(),
                sign: big.sign,
            }
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        let sign = self.sign * rhs.sign;
        if sign == Sign::Zero {
            return LogValue::ZERO;
        }
        LogValue {
            ln_abs: self.ln_abs + rhs.ln_abs,
            sign,
        }
    }
}

impl Div for LogValue {
    type Output = LogValue;

    fn div(self, rhs: LogValue) -> LogValue {
        self * rhs.recip()
    }
}

/// Which direction a factorial power steps in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorialKind {
    Rising,
    Falling,
}

/// `base (base ± 1) ... ` with `order` factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorialPower {
    pub base: f64,
    pub order: u64,
    pub kind: FactorialKind,
}

impl FactorialPower {
    pub fn eval(&self) -> LogValue {
        match self.kind {
            FactorialKind::Rising => rising(self.base, self.order),
            FactorialKind::Falling => falling(self.base, self.order),
        }
    }
}

/// Rising factorial power `x (x+1) ... (x+k-1)`, exact in sign.
///
/// Factors up to the first positive one are multiplied directly; the
/// remaining positive run uses direct log sums for short runs and a
/// log-gamma ratio for long ones.
pub fn rising(x: f64, k: u64) -> LogValue {
    let mut acc = LogValue::ONE;
    let mut j = 0u64;
    while j < k {
        let f = x + j as f64;
        if f > 0.0 {
            break;
        }
        if f == 0.0 {
            return LogValue::ZERO;
        }
        acc.ln_abs += (-f).ln();
        acc.sign = acc.sign.flip();
        j += 1;
    }
    let rest = k - j;
    if rest == 0 {
        return acc;
    }
    let y = x + j as f64;
    if rest <= DIRECT_PRODUCT_MAX {
        let mut prod = 1.0f64;
        let mut s = 0.0;
        for i in 0..rest {
            prod *= y + i as f64;
            if prod > 1e280 {
                s += prod.ln();
                prod = 1.0;
            }
        }
        acc.ln_abs += s + prod.ln();
    } else {
        acc.ln_abs += ln_gamma_ratio(y + rest as f64, y);
    }
    acc
}

/// Falling factorial power `x (x-1) ... (x-k+1)`.
pub fn falling(x: f64, k: u64) -> LogValue {
    let r = rising(-x, k);
    if k % 2 == 1 {
        LogValue {
            ln_abs: r.ln_abs,
            sign: r.sign.flip(),
        }
    } else {
        r
    }
}

/// Exact ratio `a↑n / b↑(n+z)` for positive `a`, `b`.
pub fn rising_ratio(a: f64, b: f64, z: i64, n: u64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return domain(format!("rising_ratio requires a, b > 0, got ({a}, {b})"));
    }
    let den = n as i64 + z;
    if den < 0 {
        return domain(format!("n + z must be non-negative, got {den}"));
    }
    Ok((rising(a, n) / rising(b, den as u64)).to_f64())
}

/// Leading-order approximation `Γ(b)/Γ(a) · n^{a-b-z}` of `a↑n / b↑(n+z)`.
pub fn rising_ratio_asymptotic(a: f64, b: f64, z: i64, n: u64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return domain(format!(
            "rising_ratio_asymptotic requires a, b > 0, got ({a}, {b})"
        ));
    }
    if n == 0 {
        return domain("rising_ratio_asymptotic requires n >= 1");
    }
    let exponent = a - b - z as f64;
    Ok((ln_gamma(b) - ln_gamma(a) + exponent * (n as f64).ln()).exp())
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma_ratio(n as f64 + 1.0, k as f64 + 1.0) - ln_gamma(n as f64 - k as f64 + 1.0)
}

/// `Γ(x)` for moderate positive arguments.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

#[cfg(test)]
pub(crate) fn sqrt_pi() -> f64 {
    std::f64::consts::PI.sqrt()
}
