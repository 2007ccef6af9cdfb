//! Log-gamma and the polygamma functions of order 0, 1 and 2 on the positive
//! real axis.
//!
//! Every function shifts its argument upward with the standard recurrence
//! until `x >= 6` and then evaluates the Bernoulli-number asymptotic series.

use crate::error::{Error, Result};

const SHIFT_THRESHOLD: f64 = 6.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Even Bernoulli numbers B2, B4, ..., B16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// A strictly positive, finite real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PositiveReal(f64);

impl PositiveReal {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                what: "special-function argument",
                value,
            })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PositiveReal {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

/// ln Γ(x).
pub fn log_gamma(x: PositiveReal) -> f64 {
    ln_gamma_raw(x.get())
}

/// ψ(x), the logarithmic derivative of Γ.
pub fn digamma(x: PositiveReal) -> f64 {
    digamma_raw(x.get())
}

/// ψ⁽¹⁾(x). Strictly positive and strictly decreasing.
pub fn trigamma(x: PositiveReal) -> f64 {
    trigamma_raw(x.get())
}

/// ψ⁽²⁾(x). Strictly negative.
pub fn tetragamma(x: PositiveReal) -> f64 {
    tetragamma_raw(x.get())
}

// The raw variants skip the domain check; callers inside the crate only pass
// concentrations already validated by `DirichletParams`.

pub(crate) fn ln_gamma_raw(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < SHIFT_THRESHOLD {
        prod *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Σ B_2k / (2k (2k-1) z^(2k-1)), summed from the smallest term.
    let mut series = 0.0;
    for k in (1..=BERNOULLI.len()).rev() {
        let n = 2.0 * k as f64;
        series = series * inv2 + BERNOULLI[k - 1] / (n * (n - 1.0));
    }
    series *= inv;
    let stirling = (z - 0.5) * z.ln() - z + HALF_LN_2PI + series;
    stirling - prod.ln()
}

pub(crate) fn digamma_raw(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let mut z = x;
    let mut acc = 0.0;
    while z < SHIFT_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    // Σ B_2k / (2k z^2k)
    let mut series = 0.0;
    for k in (1..=BERNOULLI.len()).rev() {
        series = series * inv2 + BERNOULLI[k - 1] / (2.0 * k as f64);
    }
    series *= inv2;
    acc + z.ln() - 0.5 / z - series
}

pub(crate) fn trigamma_raw(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let mut z = x;
    let mut acc = 0.0;
    while z < SHIFT_THRESHOLD {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Σ B_2k / z^(2k+1)
    let mut series = 0.0;
    for &b in BERNOULLI.iter().rev() {
        series = series * inv2 + b;
    }
    series *= inv2 * inv;
    acc + inv + 0.5 * inv2 + series
}

pub(crate) fn tetragamma_raw(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let mut z = x;
    let mut acc = 0.0;
    while z < SHIFT_THRESHOLD {
        acc -= 2.0 / (z * z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Σ (2k+1) B_2k / z^(2k+2)
    let mut series = 0.0;
    for k in (1..=BERNOULLI.len()).rev() {
        series = series * inv2 + (2.0 * k as f64 + 1.0) * BERNOULLI[k - 1];
    }
    series *= inv2 * inv2;
    acc - inv2 - inv2 * inv - series
}
