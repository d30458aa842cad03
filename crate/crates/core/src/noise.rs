//! Laplace noise and the law of `Z = m - ν`.
//!
//! ABCDP perturbs the acceptance threshold with `m ~ Lap(b)` and every
//! distance with `ν ~ Lap(2b)`. A proposal is accepted when
//! `ρ + ν ≤ ε_abc + m`, i.e. when `Z = m - ν ≥ ρ - ε_abc`, so the density,
//! tail and CDF of `Z` drive all flip-probability and error-bound analytics.

use libm::{exp, fabs, log};
use rand::RngCore;

use crate::error::{invalid, Result};

/// Scale `b` of the threshold noise. `b = 0` is the "no noise" sentinel that
/// corresponds to an infinite privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub const NONE: LaplaceScale = LaplaceScale(0.0);

    pub fn new(b: f64) -> Result<Self> {
        if b.is_finite() && b >= 0.0 {
            Ok(LaplaceScale(b))
        } else {
            Err(invalid(alloc::format!(
                "Laplace scale must be finite and non-negative, got {b}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_noiseless(self) -> bool {
        self.0 == 0.0
    }

    /// One draw from `Lap(0, b)`; exactly `0.0` without touching the
    /// generator when `b = 0`.
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(self, rng: &mut R) -> f64 {
        if self.is_noiseless() {
            return 0.0;
        }
        laplace_inverse_cdf(self.0, open_unit(rng))
    }

    /// The doubled scale used for distance noise.
    #[inline]
    pub fn doubled(self) -> LaplaceScale {
        LaplaceScale(2.0 * self.0)
    }
}

impl TryFrom<f64> for LaplaceScale {
    type Error = crate::Error;

    fn try_from(b: f64) -> Result<Self> {
        LaplaceScale::new(b)
    }
}

impl From<LaplaceScale> for f64 {
    fn from(b: LaplaceScale) -> f64 {
        b.0
    }
}

/// Uniform draw strictly inside (0, 1): the 53-bit grid shifted by half a step.
#[inline]
fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const STEP: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * STEP
}

#[inline]
fn laplace_inverse_cdf(b: f64, u: f64) -> f64 {
    if u < 0.5 {
        b * log(2.0 * u)
    } else {
        -b * log(2.0 * (1.0 - u))
    }
}

/// Draws from `Lap(0, scale)` by inverse-CDF transform.
pub fn sample_laplace<R: RngCore + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if scale.is_nan() || scale < 0.0 {
        return Err(invalid(alloc::format!(
            "Laplace scale must be non-negative, got {scale}"
        )));
    }
    Ok(LaplaceScale::new(scale)?.sample(rng))
}

/// Distribution of `Z = m - ν` with `m ~ Lap(b)` and `ν ~ Lap(2b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDiffDistribution {
    b: f64,
}

impl NoiseDiffDistribution {
    /// Fails for the noiseless sentinel, where `Z` has no density.
    pub fn new(scale: LaplaceScale) -> Result<Self> {
        if scale.is_noiseless() {
            return Err(invalid("noise-difference law is undefined at b = 0"));
        }
        Ok(NoiseDiffDistribution { b: scale.get() })
    }

    pub fn scale(&self) -> LaplaceScale {
        LaplaceScale(self.b)
    }

    /// `f_Z(z) = (1/6b) [2 exp(-|z|/2b) - exp(-|z|/b)]`.
    pub fn pdf(&self, z: f64) -> f64 {
        let r = fabs(z) / self.b;
        (2.0 * exp(-0.5 * r) - exp(-r)) / (6.0 * self.b)
    }

    /// `G_b(a) = P(Z > a) = (1/6) [4 exp(-a/2b) - exp(-a/b)]` for `a ≥ 0`.
    pub fn tail(&self, a: f64) -> Result<f64> {
        if a.is_nan() || a < 0.0 {
            return Err(invalid(alloc::format!(
                "tail argument must be non-negative, got {a}"
            )));
        }
        Ok(self.tail_unchecked(a))
    }

    #[inline]
    pub(crate) fn tail_unchecked(&self, a: f64) -> f64 {
        let r = a / self.b;
        // exp underflows to 0.0 for r beyond ~1400, which is the intended limit.
        (4.0 * exp(-0.5 * r) - exp(-r)) / 6.0
    }

    /// `F_Z(a) = H[a] + (1 - 2H[a]) G_b(|a|)` with `H[0] = 1`.
    pub fn cdf(&self, a: f64) -> f64 {
        let g = self.tail_unchecked(fabs(a));
        if a >= 0.0 {
            1.0 - g
        } else {
            g
        }
    }

    /// One draw of `m - ν`.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = laplace_inverse_cdf(self.b, open_unit(rng));
        let nu = laplace_inverse_cdf(2.0 * self.b, open_unit(rng));
        m - nu
    }
}
