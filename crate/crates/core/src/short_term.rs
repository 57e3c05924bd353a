//! Next-day snow depth given today's depth and the day's temperature and
//! precipitation.
//!
//! The positive part is a gamma with an identity-link mean made of three
//! pieces: a small floor `e^mu`, fresh snow `R·beta0·σ(beta1 + beta2·T)` and
//! retained old snow `D_prev·σ(beta3 + (beta4 + beta5·R)·T)`. Its variance
//! grows with the squared expected change in depth, and the probability of
//! bare ground is logistic in the mean.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{contiguous_windows, Dataset, Field};
use crate::error::{domain, Error, Result};
use crate::special::inverse_logit;
use crate::zig::{self, GammaSpec, ZeroInflatedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortTermParams {
    pub mu: f64,
    /// cm of snow per mm of water
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
    pub beta6: f64,
    pub beta7: f64,
    /// cm²
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

impl ShortTermParams {
    /// Number of free parameters.
    pub const N_PARAMS: usize = 11;

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mu, self.beta0, self.beta1, self.beta2, self.beta3, self.beta4, self.beta5,
            self.beta6, self.beta7, self.sigma1_sq, self.sigma2_sq,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return domain("short-term parameters must be finite");
        }
        if self.beta0 < 0.0 {
            return domain(format!("beta0 must be nonnegative, got {}", self.beta0));
        }
        if self.sigma1_sq <= 0.0 || self.sigma2_sq <= 0.0 {
            return domain("sigma1_sq and sigma2_sq must be positive");
        }
        Ok(())
    }

    /// Starting point for maximum-likelihood fits.
    pub fn initial_guess() -> Self {
        Self {
            mu: -5.0,
            beta0: 10.0,
            beta1: 1.0,
            beta2: -1.0,
            beta3: 2.0,
            beta4: 0.0,
            beta5: 0.0,
            beta6: 3.0,
            beta7: -1.0,
            sigma1_sq: 1.0,
            sigma2_sq: 1.0,
        }
    }

    pub fn snowfall_term(&self, temp: f64, precip: f64) -> f64 {
        precip * self.beta0 * inverse_logit(self.beta1 + self.beta2 * temp)
    }

    /// Depth surviving from the previous day.
    pub fn retention_term(&self, temp: f64, precip: f64, prev_depth: f64) -> f64 {
        prev_depth * inverse_logit(self.beta3 + (self.beta4 + self.beta5 * precip) * temp)
    }

    /// Expected depth given snow is present.
    pub fn conditional_mean(&self, inputs: &DayInputs) -> f64 {
        self.mu.exp()
            + self.snowfall_term(inputs.temp, inputs.precip)
            + self.retention_term(inputs.temp, inputs.precip, inputs.prev_depth)
    }

    pub fn conditional_variance(&self, inputs: &DayInputs) -> f64 {
        self.variance_for_mean(self.conditional_mean(inputs), inputs.prev_depth)
    }

    #[inline]
    fn variance_for_mean(&self, mean: f64, prev_depth: f64) -> f64 {
        let change = mean - prev_depth;
        self.sigma1_sq + self.sigma2_sq * change * change
    }

    /// Probability of bare ground.
    pub fn zero_probability(&self, inputs: &DayInputs) -> f64 {
        inverse_logit(self.beta6 + self.beta7 * self.conditional_mean(inputs))
    }

    /// The full one-day-ahead distribution.
    pub fn transition_spec(&self, inputs: &DayInputs) -> ZeroInflatedSpec {
        let t = self.transition(inputs);
        let p_zero = inverse_logit(t.zero_logit);
        // shape/scale come out of the floored moment match and are positive
        ZeroInflatedSpec::new(p_zero, GammaSpec::new(t.shape, t.scale).expect("positive gamma"))
            .expect("probability")
    }

    #[inline]
    pub(crate) fn transition(&self, inputs: &DayInputs) -> Transition {
        let mean = self.conditional_mean(inputs);
        let variance = self.variance_for_mean(mean, inputs.prev_depth);
        let (shape, scale) = zig::moments_to_shape_scale(mean, variance);
        Transition {
            zero_logit: self.beta6 + self.beta7 * mean,
            shape,
            scale,
        }
    }

    /// Draws tomorrow's depth.
    pub fn sample_next<R: Rng + ?Sized>(&self, inputs: &DayInputs, rng: &mut R) -> f64 {
        let t = self.transition(inputs);
        zig::sample_parts(inverse_logit(t.zero_logit), t.shape, t.scale, rng)
    }

    /// Log-likelihood of every usable day-to-day transition in `data`.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        let obs = ShortTermObservations::from_dataset(data)?;
        Ok(obs.log_likelihood(self))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Transition {
    pub zero_logit: f64,
    pub shape: f64,
    pub scale: f64,
}

impl Transition {
    #[inline]
    pub(crate) fn log_density(&self, x: f64) -> f64 {
        zig::zig_log_density_logit(self.zero_logit, self.shape, self.scale, x)
    }
}

/// Covariates of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayInputs {
    /// °C
    pub temp: f64,
    /// mm
    pub precip: f64,
    /// cm
    pub prev_depth: f64,
}

impl DayInputs {
    pub fn new(temp: f64, precip: f64, prev_depth: f64) -> Result<Self> {
        if !(precip >= 0.0 && prev_depth >= 0.0 && temp.is_finite() && precip.is_finite() && prev_depth.is_finite()) {
            return domain(format!(
                "invalid day inputs (temp {temp}, precip {precip}, prev_depth {prev_depth})"
            ));
        }
        Ok(Self {
            temp,
            precip,
            prev_depth,
        })
    }
}

/// A usable transition: covariates plus the observed depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTermObservation {
    pub index: usize,
    pub inputs: DayInputs,
    pub depth: f64,
}

/// The usable transitions of a dataset, extracted once so repeated
/// likelihood evaluations only touch flat arrays.
#[derive(Debug, Clone)]
pub struct ShortTermObservations {
    pub(crate) items: Vec<ShortTermObservation>,
}

impl ShortTermObservations {
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let required = [Field::Temperature, Field::Precipitation, Field::SnowDepth];
        let recs = data.records();
        let mut items = Vec::new();
        for w in contiguous_windows(data, &required, 1) {
            for t in w.start + 1..w.end {
                let r = &recs[t];
                items.push(ShortTermObservation {
                    index: t,
                    inputs: DayInputs {
                        temp: r.temperature.unwrap(),
                        precip: r.precipitation.unwrap(),
                        prev_depth: recs[t - 1].snow_depth.unwrap(),
                    },
                    depth: r.snow_depth.unwrap(),
                });
            }
        }
        if items.is_empty() {
            return Err(Error::NoUsableTransitions);
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ShortTermObservation] {
        &self.items
    }

    /// Sequential sum, so the value is bit-reproducible.
    pub fn log_likelihood(&self, params: &ShortTermParams) -> f64 {
        self.items
            .iter()
            .map(|o| params.transition(&o.inputs).log_density(o.depth))
            .sum()
    }
}

/// Parameters reported for the three Norwegian stations (Oslo, Geilo, Tromsø).
pub mod presets {
    use super::ShortTermParams;

    pub fn oslo() -> ShortTermParams {
        ShortTermParams {
            mu: -6.92,
            beta0: 0.96,
            beta1: 0.88,
            beta2: -1.76,
            beta3: 1.99,
            beta4: -0.30,
            beta5: -0.03,
            beta6: 4.13,
            beta7: -1.97,
            sigma1_sq: 0.63,
            sigma2_sq: 1.79,
        }
    }

    pub fn geilo() -> ShortTermParams {
        ShortTermParams {
            mu: -5.88,
            beta0: 0.72,
            beta1: 1.74,
            beta2: -1.19,
            beta3: 2.86,
            beta4: -0.25,
            beta5: -0.05,
            beta6: 3.61,
            beta7: -0.75,
            sigma1_sq: 1.04,
            sigma2_sq: 2.83,
        }
    }

    pub fn tromso() -> ShortTermParams {
        ShortTermParams {
            mu: -4.23,
            beta0: 0.89,
            beta1: 2.02,
            beta2: -0.83,
            beta3: 2.64,
            beta4: -0.16,
            beta5: -0.04,
            beta6: 3.38,
            beta7: -0.64,
            sigma1_sq: 0.98,
            sigma2_sq: 8.56,
        }
    }
}
