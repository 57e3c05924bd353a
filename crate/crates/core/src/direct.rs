//! Snow depth as its own time series. Same zero-inflated gamma structure as
//! the short-term model, but the mean is log-linear in a seasonal trend,
//! recent snow-cover indicators and recent depths, so no weather input is
//! needed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{contiguous_windows, season_day, Dataset, Field, SeasonDay};
use crate::error::{domain, Error, Result};
use crate::special::inverse_logit;
use crate::weather::FourierTrend;
use crate::zig::{self, GammaSpec, ZeroInflatedSpec};

/// Ceiling on the log of the conditional mean (1 km of snow). Keeps the
/// exponential link finite for any coefficient set.
pub const MAX_LOG_MEAN: f64 = 11.512_925_464_970_229;
/// Floor on the log of the conditional mean, `ln(MEAN_FLOOR)`.
pub const MIN_LOG_MEAN: f64 = -27.631_021_115_928_548;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectParams {
    pub trend: FourierTrend,
    /// Coefficients on snow-cover indicators, lag 1 first.
    pub occ_lags: Vec<f64>,
    /// Coefficients on depths in cm, lag 1 first.
    pub depth_lags: Vec<f64>,
    pub zero_intercept: f64,
    pub zero_slope: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

/// `(m_D, q_D, s_D)`.
pub type DirectOrders = [usize; 3];

impl DirectParams {
    pub fn validate(&self) -> Result<()> {
        self.trend.validate()?;
        if !(self.sigma1_sq > 0.0 && self.sigma2_sq > 0.0) {
            return domain("sigma1_sq and sigma2_sq must be positive");
        }
        let finite = [self.zero_intercept, self.zero_slope, self.sigma1_sq, self.sigma2_sq]
            .iter()
            .chain(&self.occ_lags)
            .chain(&self.depth_lags)
            .all(|v| v.is_finite());
        if !finite {
            return domain("direct-model coefficients must be finite");
        }
        Ok(())
    }

    pub fn orders(&self) -> DirectOrders {
        [self.trend.order, self.occ_lags.len(), self.depth_lags.len()]
    }

    /// Lags of history the model reads.
    pub fn max_lag(&self) -> usize {
        self.occ_lags.len().max(self.depth_lags.len())
    }

    pub fn n_params(&self) -> usize {
        self.trend.n_params() + self.occ_lags.len() + self.depth_lags.len() + 4
    }

    /// Whether the variance falls back to deviation from zero because no
    /// depth lag is part of the model.
    pub fn variance_uses_zero_reference(&self) -> bool {
        self.depth_lags.is_empty()
    }

    #[inline]
    fn log_mean(&self, trend: f64, occ_history: &[u8], depth_history: &[f64]) -> f64 {
        let mut eta = trend;
        for (g, &o) in self.occ_lags.iter().zip(occ_history) {
            eta += g * f64::from(o);
        }
        for (e, &d) in self.depth_lags.iter().zip(depth_history) {
            eta += e * d;
        }
        eta.clamp(MIN_LOG_MEAN, MAX_LOG_MEAN)
    }

    /// Expected depth given snow is present. Histories are most recent first.
    pub fn mean(&self, s: SeasonDay, occ_history: &[u8], depth_history: &[f64]) -> f64 {
        self.log_mean(self.trend.eval(s), occ_history, depth_history).exp()
    }

    #[inline]
    fn transition_from_trend(&self, trend: f64, occ_history: &[u8], depth_history: &[f64]) -> (f64, f64, f64) {
        let mean = self.log_mean(trend, occ_history, depth_history).exp();
        let reference = if self.depth_lags.is_empty() {
            0.0
        } else {
            depth_history[0]
        };
        let change = mean - reference;
        let variance = self.sigma1_sq + self.sigma2_sq * change * change;
        let (shape, scale) = zig::moments_to_shape_scale(mean, variance);
        (self.zero_intercept + self.zero_slope * mean, shape, scale)
    }

    pub fn transition_spec(&self, s: SeasonDay, occ_history: &[u8], depth_history: &[f64]) -> Result<ZeroInflatedSpec> {
        self.check_history(occ_history, depth_history)?;
        let (zl, shape, scale) = self.transition_from_trend(self.trend.eval(s), occ_history, depth_history);
        Ok(ZeroInflatedSpec::new(inverse_logit(zl), GammaSpec::new(shape, scale)?)?)
    }

    fn check_history(&self, occ_history: &[u8], depth_history: &[f64]) -> Result<()> {
        if occ_history.len() < self.occ_lags.len() || depth_history.len() < self.depth_lags.len() {
            return Err(Error::InsufficientHistory(format!(
                "direct model needs {} occurrence and {} depth lags, got {} and {}",
                self.occ_lags.len(),
                self.depth_lags.len(),
                occ_history.len(),
                depth_history.len()
            )));
        }
        Ok(())
    }

    /// One draw of the next depth. Histories are not modified; see
    /// [`DirectHistory`] for a rolling state.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: SeasonDay, occ_history: &[u8], depth_history: &[f64], rng: &mut R) -> f64 {
        let (zl, shape, scale) = self.transition_from_trend(self.trend.eval(s), occ_history, depth_history);
        zig::sample_parts(inverse_logit(zl), shape, scale, rng)
    }

    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        Ok(DirectObservations::from_dataset(data, self.max_lag())?.log_likelihood(self))
    }
}

/// Rolling depth history, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectHistory {
    depths: Vec<f64>,
}

impl DirectHistory {
    /// `chronological` ends with the most recent day; only the last `lags`
    /// values are kept.
    pub fn new(chronological: &[f64], lags: usize) -> Result<Self> {
        if chronological.len() < lags {
            return Err(Error::InsufficientHistory(format!(
                "need {lags} days of snow depth, got {}",
                chronological.len()
            )));
        }
        Ok(Self {
            depths: chronological.iter().rev().take(lags).copied().collect(),
        })
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn occurrences(&self) -> Vec<u8> {
        self.depths.iter().map(|&d| u8::from(d > 0.0)).collect()
    }

    pub fn push(&mut self, depth: f64) {
        if !self.depths.is_empty() {
            self.depths.pop();
            self.depths.insert(0, depth);
        }
    }

    /// Draws the next depth at season day `s` and shifts it into the history.
    pub fn step<R: Rng + ?Sized>(&mut self, params: &DirectParams, s: SeasonDay, rng: &mut R) -> f64 {
        let occ = self.occurrences();
        let d = params.sample_next(s, &occ, &self.depths, rng);
        self.push(d);
        d
    }
}

#[derive(Debug, Clone)]
pub struct DirectObservations {
    lag: usize,
    index: Vec<usize>,
    days: Vec<u16>,
    /// `lag` values per observation, most recent first
    lagged: Vec<f64>,
    depths: Vec<f64>,
}

impl DirectObservations {
    pub fn from_dataset(data: &Dataset, lag: usize) -> Result<Self> {
        check_lag(lag)?;
        let recs = data.records();
        let mut out = Self {
            lag,
            index: Vec::new(),
            days: Vec::new(),
            lagged: Vec::new(),
            depths: Vec::new(),
        };
        for w in contiguous_windows(data, &[Field::SnowDepth], lag) {
            for t in w.start + lag..w.end {
                out.index.push(t);
                out.days.push(season_day(recs[t].date).value());
                out.lagged
                    .extend((1..=lag).map(|j| recs[t - j].snow_depth.unwrap()));
                out.depths.push(recs[t].snow_depth.unwrap());
            }
        }
        if out.depths.is_empty() {
            return Err(Error::NoUsableTransitions);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    fn occ_of(lagged: &[f64]) -> [u8; 64] {
        let mut occ = [0u8; 64];
        for (o, &d) in occ.iter_mut().zip(lagged) {
            *o = u8::from(d > 0.0);
        }
        occ
    }

    pub fn log_likelihood(&self, params: &DirectParams) -> f64 {
        debug_assert!(params.max_lag() <= self.lag);
        let table = params.trend.table();
        let mut total = 0.0;
        for i in 0..self.depths.len() {
            let lagged = &self.lagged[i * self.lag..(i + 1) * self.lag];
            let occ = Self::occ_of(lagged);
            let (zl, shape, scale) = params.transition_from_trend(table[self.days[i] as usize], &occ, lagged);
            total += zig::zig_log_density_logit(zl, shape, scale, self.depths[i]);
        }
        total
    }

    /// Covariates of the log mean, `[Fourier basis, occurrence lags, depth lags]`,
    /// for observations with positive depth.
    pub(crate) fn mean_covariates(&self, orders: DirectOrders) -> Vec<Vec<f64>> {
        let [m, q, s] = orders;
        (0..self.depths.len())
            .filter(|&i| self.depths[i] > 0.0)
            .map(|i| {
                let lagged = &self.lagged[i * self.lag..(i + 1) * self.lag];
                let mut row = Vec::with_capacity(1 + 2 * m + q + s);
                crate::estimation::fourier_row(m, self.days[i], &mut row);
                row.extend(lagged[..q].iter().map(|&d| f64::from(u8::from(d > 0.0))));
                row.extend(&lagged[..s]);
                row
            })
            .collect()
    }

    pub(crate) fn predictive(&self, params: &DirectParams) -> Vec<(usize, ZeroInflatedSpec, f64)> {
        let table = params.trend.table();
        (0..self.depths.len())
            .map(|i| {
                let lagged = &self.lagged[i * self.lag..(i + 1) * self.lag];
                let occ = Self::occ_of(lagged);
                let (zl, shape, scale) = params.transition_from_trend(table[self.days[i] as usize], &occ, lagged);
                let spec = ZeroInflatedSpec::new(inverse_logit(zl), GammaSpec::new(shape, scale).expect("gamma"))
                    .expect("probability");
                (self.index[i], spec, self.depths[i])
            })
            .collect()
    }
}

/// Upper bound on the lag of a direct model.
pub const MAX_DIRECT_LAG: usize = 64;

pub(crate) fn check_lag(lag: usize) -> Result<()> {
    if lag > MAX_DIRECT_LAG {
        return domain(format!("direct model supports at most {MAX_DIRECT_LAG} lags"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params() -> DirectParams {
        DirectParams {
            trend: FourierTrend {
                order: 1,
                a0: 1.5,
                a: vec![0.2],
                b: vec![0.9],
            },
            occ_lags: vec![0.6],
            depth_lags: vec![0.03, -0.01, 0.004],
            zero_intercept: 2.5,
            zero_slope: -1.2,
            sigma1_sq: 0.8,
            sigma2_sq: 1.5,
        }
    }

    fn sd(v: u16) -> SeasonDay {
        SeasonDay::new(v).unwrap()
    }

    #[test]
    fn mean_examples() {
        let p = params();
        let s = sd(20);
        let w = 2.0 * PI * 20.0 / 366.0;
        let trend = 1.5 + 0.2 * w.sin() + 0.9 * w.cos();
        let expected = (trend + 0.6 + 0.03 * 30.0 - 0.01 * 28.0 + 0.004 * 25.0).exp();
        assert_relative_eq!(p.mean(s, &[1], &[30.0, 28.0, 25.0]), expected, max_relative = 1e-12);
        // snow-free history
        assert_eq!(p.mean(s, &[0], &[0.0, 0.0, 0.0]), p.trend.eval(s).exp());
        let mut q = p.clone();
        q.occ_lags = vec![0.0];
        q.depth_lags = vec![0.0; 3];
        assert_eq!(q.mean(s, &[1], &[4.0, 5.0, 6.0]), q.trend.eval(s).exp());
    }

    #[test]
    fn spec_consistency() {
        let p = params();
        let s = sd(30);
        let hist = [22.0, 20.0, 19.0];
        let spec = p.transition_spec(s, &[1], &hist).unwrap();
        let m = p.mean(s, &[1], &hist);
        let v = 0.8 + 1.5 * (m - 22.0) * (m - 22.0);
        assert_relative_eq!(spec.positive_part().mean(), m, max_relative = 1e-12);
        assert_relative_eq!(spec.positive_part().variance(), v, max_relative = 1e-12);
        let pz = inverse_logit(2.5 - 1.2 * m);
        assert_relative_eq!(spec.mean(), (1.0 - pz) * m, max_relative = 1e-12);
    }

    #[test]
    fn variance_floor_when_mean_matches_lag_one() {
        let mut p = params();
        p.occ_lags.clear();
        p.depth_lags = vec![0.0];
        p.trend = FourierTrend::constant(10f64.ln());
        let spec = p.transition_spec(sd(5), &[], &[10.0]).unwrap();
        assert_relative_eq!(spec.positive_part().variance(), 0.8, max_relative = 1e-12);
    }

    #[test]
    fn periodic_only_depends_on_season() {
        let mut p = params();
        p.occ_lags.clear();
        p.depth_lags.clear();
        assert!(p.variance_uses_zero_reference());
        let a = p.transition_spec(sd(40), &[], &[]).unwrap();
        let b = p.transition_spec(sd(40), &[1, 1], &[90.0, 3.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_history_rejected() {
        let p = params();
        assert!(p.transition_spec(sd(40), &[1], &[3.0]).is_err());
        assert!(DirectHistory::new(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn forced_zero() {
        let mut p = params();
        p.zero_intercept = 1000.0;
        p.zero_slope = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut h = DirectHistory::new(&[10.0, 12.0, 14.0], 3).unwrap();
        for _ in 0..100 {
            assert_eq!(h.step(&p, sd(10), &mut rng), 0.0);
        }
        assert_eq!(h.depths(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn mean_finite_for_large_depths() {
        let mut p = params();
        p.depth_lags = vec![10.0, -10.0, 10.0];
        p.occ_lags = vec![10.0];
        let m = p.mean(sd(1), &[1], &[1000.0, 0.0, 1000.0]);
        assert!(m.is_finite() && m > 0.0);
        let spec = p.transition_spec(sd(1), &[1], &[1000.0, 0.0, 1000.0]).unwrap();
        assert!(spec.positive_part().variance().is_finite());
        p.depth_lags = vec![-10.0, 10.0, -10.0];
        assert!(p.mean(sd(1), &[0], &[1000.0, 0.0, 1000.0]) > 0.0);
    }

    #[test]
    fn history_shift() {
        let mut h = DirectHistory::new(&[1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert_eq!(h.depths(), &[4.0, 3.0, 2.0]);
        h.push(0.0);
        assert_eq!(h.depths(), &[0.0, 4.0, 3.0]);
        assert_eq!(h.occurrences(), vec![0, 1, 1]);
    }
}
