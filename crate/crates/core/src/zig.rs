//! Zero-inflated gamma distribution: an atom at exactly zero mixed with a
//! gamma-distributed positive part.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{domain, Result};
use crate::special::{ln_gamma, regularized_lower_gamma};

/// Smallest mean admitted when moment matching; keeps shape and scale finite
/// when the expected value collapses to (almost) nothing.
pub const MEAN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSpec {
    shape: f64,
    scale: f64,
}

impl GammaSpec {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return domain(format!("gamma needs positive finite shape and scale, got ({shape}, {scale})"));
        }
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        gamma_ln_pdf(self.shape, self.scale, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        regularized_lower_gamma(self.shape, x / self.scale)
    }
}

#[inline]
pub(crate) fn gamma_ln_pdf(shape: f64, scale: f64, x: f64) -> f64 {
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Gamma parameters with the given mean and variance:
/// shape = mean²/variance, scale = variance/mean.
pub fn gamma_from_moments(mean: f64, variance: f64) -> Result<GammaSpec> {
    if !(mean > 0.0 && variance > 0.0 && mean.is_finite() && variance.is_finite()) {
        return domain(format!(
            "moment matching needs positive mean and variance, got ({mean}, {variance})"
        ));
    }
    GammaSpec::new(mean * (mean / variance), variance / mean)
}

/// Moment matching with the mean floored at [`MEAN_FLOOR`]. Used by the
/// model layers, whose means are positive by construction but may underflow.
#[inline]
pub(crate) fn moments_to_shape_scale(mean: f64, variance: f64) -> (f64, f64) {
    let mean = mean.max(MEAN_FLOOR);
    (mean * (mean / variance), variance / mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroInflatedSpec {
    p_zero: f64,
    positive: GammaSpec,
}

impl ZeroInflatedSpec {
    pub fn new(p_zero: f64, positive: GammaSpec) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_zero) {
            return domain(format!("p_zero must lie in [0, 1], got {p_zero}"));
        }
        Ok(Self { p_zero, positive })
    }

    pub fn p_zero(&self) -> f64 {
        self.p_zero
    }

    pub fn positive_part(&self) -> &GammaSpec {
        &self.positive
    }

    /// Mean of the mixture, `(1 - p_zero) · E[gamma]`.
    pub fn mean(&self) -> f64 {
        (1.0 - self.p_zero) * self.positive.mean()
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        zig_log_density(self, x)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        zig_cdf(self, x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        zig_sample(self, rng)
    }
}

/// Log of the mixed density: `ln p_zero` at the atom, `ln(1 - p_zero) + ln g(x)`
/// for `x > 0`. Impossible outcomes give `-∞`.
pub fn zig_log_density(spec: &ZeroInflatedSpec, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return domain(format!("zero-inflated gamma support is [0, ∞), got {x}"));
    }
    Ok(if x == 0.0 {
        spec.p_zero.ln()
    } else {
        (-spec.p_zero).ln_1p() + spec.positive.ln_pdf(x)
    })
}

/// Same as [`zig_log_density`] with the zero part given on the logit scale,
/// which keeps both branches accurate when `p_zero` is within rounding of 0 or 1.
#[inline]
pub(crate) fn zig_log_density_logit(zero_logit: f64, shape: f64, scale: f64, x: f64) -> f64 {
    use crate::special::ln_inverse_logit;
    if x == 0.0 {
        ln_inverse_logit(zero_logit)
    } else {
        ln_inverse_logit(-zero_logit) + gamma_ln_pdf(shape, scale, x)
    }
}

/// `P(X ≤ x) = p_zero + (1 - p_zero) · G(x)`; exactly `p_zero` at `x = 0`.
pub fn zig_cdf(spec: &ZeroInflatedSpec, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return domain(format!("zero-inflated gamma support is [0, ∞), got {x}"));
    }
    if x == 0.0 {
        return Ok(spec.p_zero);
    }
    Ok(spec.p_zero + (1.0 - spec.p_zero) * spec.positive.cdf(x))
}

/// Draws 0 with probability `p_zero`, otherwise a gamma variate. Gamma draws
/// that underflow (tiny shapes) are returned as the smallest positive double,
/// so exact zeros come only from the atom.
pub fn zig_sample<R: Rng + ?Sized>(spec: &ZeroInflatedSpec, rng: &mut R) -> f64 {
    sample_parts(spec.p_zero, spec.positive.shape, spec.positive.scale, rng)
}

#[inline]
pub(crate) fn sample_parts<R: Rng + ?Sized>(p_zero: f64, shape: f64, scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if u < p_zero {
        return 0.0;
    }
    sample_gamma(shape, scale, rng)
}

/// Smallest positive double (subnormal).
pub const SMALLEST_POSITIVE: f64 = 4.9406564584124654e-324;

#[inline]
pub(crate) fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    // rand_distr boosts shape < 1 with a U^(1/shape) factor, which is exact.
    match Gamma::new(shape, scale) {
        Ok(g) => g.sample(rng).max(SMALLEST_POSITIVE),
        Err(_) => SMALLEST_POSITIVE,
    }
}
