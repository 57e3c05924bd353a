//! Stochastic daily weather: an autoregressive temperature model around a
//! Fourier seasonal mean, and a zero-inflated gamma precipitation model whose
//! occurrence and amount depend on season, recent wet days and temperature.

use std::f64::consts::PI;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{contiguous_windows, season_day, Dataset, Field, SeasonDay};
use crate::error::{domain, Error, Result};
use crate::special::{inverse_logit, ln_inverse_logit};
use crate::zig::{self, gamma_ln_pdf};

/// Days in the Fourier period.
pub const PERIOD_DAYS: f64 = 366.0;

/// `a0 + Σ a_k sin(k·2π·s/366) + b_k cos(k·2π·s/366)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTrend {
    pub order: usize,
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierTrend {
    pub fn constant(a0: f64) -> Self {
        Self::zeros(0, a0)
    }

    pub fn zeros(order: usize, a0: f64) -> Self {
        Self {
            order,
            a0,
            a: vec![0.0; order],
            b: vec![0.0; order],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.order || self.b.len() != self.order {
            return domain(format!(
                "Fourier order {} needs {0} sine and cosine coefficients, got {} and {}",
                self.order,
                self.a.len(),
                self.b.len()
            ));
        }
        if !self.a0.is_finite() || self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return domain("Fourier coefficients must be finite");
        }
        Ok(())
    }

    /// Number of coefficients, `1 + 2·order`.
    pub fn n_params(&self) -> usize {
        1 + 2 * self.order
    }

    pub fn eval(&self, s: SeasonDay) -> f64 {
        self.eval_at(f64::from(s.value()))
    }

    /// Evaluation at a real-valued day; periodic with period 366.
    pub fn eval_at(&self, s: f64) -> f64 {
        let w = 2.0 * PI * s / PERIOD_DAYS;
        let mut v = self.a0;
        for k in 0..self.order {
            let (sin, cos) = ((k + 1) as f64 * w).sin_cos();
            v += self.a[k] * sin + self.b[k] * cos;
        }
        v
    }

    /// Values for every season day; index 0 is unused.
    pub fn table(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(367);
        t.push(f64::NAN);
        t.extend((1..=366).map(|s| self.eval_at(f64::from(s))));
        t
    }

    /// Flat coefficient layout `[a0, a1, b1, a2, b2, ...]`.
    pub(crate) fn write_to(&self, out: &mut Vec<f64>) {
        out.push(self.a0);
        for k in 0..self.order {
            out.push(self.a[k]);
            out.push(self.b[k]);
        }
    }

    pub(crate) fn read_from(order: usize, values: &mut std::slice::Iter<'_, f64>) -> Self {
        let a0 = *values.next().expect("a0");
        let mut a = Vec::with_capacity(order);
        let mut b = Vec::with_capacity(order);
        for _ in 0..order {
            a.push(*values.next().expect("a_k"));
            b.push(*values.next().expect("b_k"));
        }
        Self { order, a0, a, b }
    }

    /// Same trend with order raised to `order`, new coefficients zero.
    pub fn extended(&self, order: usize) -> Self {
        let mut t = self.clone();
        t.a.resize(order.max(self.order), 0.0);
        t.b.resize(order.max(self.order), 0.0);
        t.order = order.max(self.order);
        t
    }
}

// ---------------------------------------------------------------------------
// Temperature
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TempParams {
    pub trend: FourierTrend,
    /// AR coefficients on the seasonal anomalies, lag 1 first.
    pub ar: Vec<f64>,
    /// Standard deviation of the Gaussian innovations, °C.
    pub innovation_sd: f64,
}

impl TempParams {
    pub fn validate(&self) -> Result<()> {
        self.trend.validate()?;
        if !(self.innovation_sd > 0.0 && self.innovation_sd.is_finite()) {
            return domain(format!("innovation_sd must be positive, got {}", self.innovation_sd));
        }
        if self.ar.iter().any(|v| !v.is_finite()) {
            return domain("AR coefficients must be finite");
        }
        Ok(())
    }

    /// `(m_T, p_T)`.
    pub fn orders(&self) -> (usize, usize) {
        (self.trend.order, self.ar.len())
    }

    pub fn n_params(&self) -> usize {
        self.trend.n_params() + self.ar.len() + 1
    }

    /// Whether the AR polynomial has all roots outside the unit circle.
    pub fn is_stationary(&self) -> bool {
        ar_is_stationary(&self.ar)
    }

    /// Gaussian log-likelihood of the AR residuals, conditioning on the
    /// first `p_T` days of every temperature window.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        Ok(TempObservations::from_dataset(data, self.ar.len())?.log_likelihood(self))
    }

    /// One step: returns the new temperature and its seasonal anomaly.
    /// `recent_anomalies[0]` is the anomaly of the previous day.
    pub fn step<R: Rng + ?Sized>(&self, s: SeasonDay, recent_anomalies: &[f64], rng: &mut R) -> (f64, f64) {
        let z: f64 = StandardNormal.sample(rng);
        let anomaly = self.predicted_anomaly(recent_anomalies) + self.innovation_sd * z;
        (self.trend.eval(s) + anomaly, anomaly)
    }

    #[inline]
    pub(crate) fn predicted_anomaly(&self, recent_anomalies: &[f64]) -> f64 {
        self.ar
            .iter()
            .zip(recent_anomalies)
            .map(|(a, x)| a * x)
            .sum()
    }

    /// Simulates `horizon` days following `history` (chronological, the
    /// last entry is the most recent day).
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        history: &[(NaiveDate, f64)],
        horizon: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let p = self.ar.len();
        if history.len() < p {
            return Err(Error::InsufficientHistory(format!(
                "temperature simulation needs {p} days of history, got {}",
                history.len()
            )));
        }
        // most recent first
        let mut anomalies: Vec<f64> = history
            .iter()
            .rev()
            .take(p)
            .map(|&(d, t)| t - self.trend.eval(season_day(d)))
            .collect();
        let mut date = match history.last() {
            Some(&(d, _)) => d,
            None => return domain("temperature simulation needs a start date"),
        };
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            date += Duration::days(1);
            let (t, a) = self.step(season_day(date), &anomalies, rng);
            if p > 0 {
                anomalies.pop();
                anomalies.insert(0, a);
            }
            out.push(t);
        }
        Ok(out)
    }
}

/// Stationarity via the step-down recursion: the AR(p) polynomial has all
/// roots outside the unit circle iff every partial autocorrelation obtained
/// by reversing Durbin-Levinson has modulus below one.
pub fn ar_is_stationary(ar: &[f64]) -> bool {
    let mut phi = ar.to_vec();
    while let Some(&k) = phi.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let p = phi.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1)
            .map(|j| (phi[j] + k * phi[p - 2 - j]) / denom)
            .collect();
        phi = next;
    }
    true
}

/// Temperature windows extracted from a dataset.
#[derive(Debug, Clone)]
pub struct TempObservations {
    /// (start, end) offsets into `temps`/`days` for each window.
    windows: Vec<(usize, usize)>,
    temps: Vec<f64>,
    days: Vec<u16>,
    /// dataset index of every entry of `temps`
    index: Vec<usize>,
    lag: usize,
}

impl TempObservations {
    pub fn from_dataset(data: &Dataset, lag: usize) -> Result<Self> {
        let recs = data.records();
        let mut windows = Vec::new();
        let mut temps = Vec::new();
        let mut days = Vec::new();
        let mut index = Vec::new();
        for w in contiguous_windows(data, &[Field::Temperature], lag) {
            let start = temps.len();
            for i in w {
                temps.push(recs[i].temperature.unwrap());
                days.push(season_day(recs[i].date).value());
                index.push(i);
            }
            windows.push((start, temps.len()));
        }
        if windows.is_empty() {
            return Err(Error::NoUsableTransitions);
        }
        Ok(Self {
            windows,
            temps,
            days,
            index,
            lag,
        })
    }

    /// Number of likelihood terms.
    pub fn n_terms(&self) -> usize {
        self.windows.iter().map(|&(s, e)| e - s - self.lag).sum()
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn log_likelihood(&self, params: &TempParams) -> f64 {
        let p = params.ar.len();
        debug_assert!(p <= self.lag);
        let table = params.trend.table();
        let sd = params.innovation_sd;
        let norm = -0.5 * (2.0 * PI).ln() - sd.ln();
        let inv_var = 1.0 / (sd * sd);
        let anomalies: Vec<f64> = self
            .temps
            .iter()
            .zip(&self.days)
            .map(|(t, &s)| t - table[s as usize])
            .collect();
        let mut total = 0.0;
        for &(start, end) in &self.windows {
            for t in start + self.lag..end {
                let mut pred = 0.0;
                for (j, a) in params.ar.iter().enumerate() {
                    pred += a * anomalies[t - 1 - j];
                }
                let e = anomalies[t] - pred;
                total += norm - 0.5 * e * e * inv_var;
            }
        }
        total
    }

    /// One-step-ahead predictive mean with the observed value and its
    /// dataset index.
    pub(crate) fn predictive(&self, params: &TempParams) -> Vec<(usize, f64, f64)> {
        let table = params.trend.table();
        let anomalies: Vec<f64> = self
            .temps
            .iter()
            .zip(&self.days)
            .map(|(t, &s)| t - table[s as usize])
            .collect();
        let mut out = Vec::new();
        for &(start, end) in &self.windows {
            for t in start + self.lag..end {
                let pred: f64 = params
                    .ar
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a * anomalies[t - 1 - j])
                    .sum();
                out.push((self.index[t], table[self.days[t] as usize] + pred, self.temps[t]));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Precipitation
// ---------------------------------------------------------------------------

/// Centering and scaling applied to temperature before it enters the
/// precipitation polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempStandardization {
    pub center: f64,
    pub scale: f64,
}

impl TempStandardization {
    pub const IDENTITY: Self = Self {
        center: 0.0,
        scale: 1.0,
    };

    #[inline]
    pub fn apply(&self, temp: f64) -> f64 {
        (temp - self.center) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecipParams {
    pub amount_trend: FourierTrend,
    /// Coefficients on wet-day indicators, lag 1 first.
    pub amount_occ_lags: Vec<f64>,
    /// Coefficients on powers 1.. of standardized temperature.
    pub amount_temp_poly: Vec<f64>,
    /// Constant gamma shape of wet-day amounts.
    pub amount_cv_shape: f64,
    pub zero_trend: FourierTrend,
    pub zero_occ_lags: Vec<f64>,
    pub zero_temp_poly: Vec<f64>,
    pub temp_standardization: TempStandardization,
}

/// `(m_R, q_R, s_R, m_R0, q_R0, s_R0)`.
pub type PrecipOrders = [usize; 6];

impl PrecipParams {
    pub fn validate(&self) -> Result<()> {
        self.amount_trend.validate()?;
        self.zero_trend.validate()?;
        if !(self.amount_cv_shape > 0.0 && self.amount_cv_shape.is_finite()) {
            return domain(format!("amount_cv_shape must be positive, got {}", self.amount_cv_shape));
        }
        if !(self.temp_standardization.scale > 0.0) {
            return domain("temperature standardization scale must be positive");
        }
        let lists = [
            &self.amount_occ_lags,
            &self.amount_temp_poly,
            &self.zero_occ_lags,
            &self.zero_temp_poly,
        ];
        if lists.iter().any(|l| l.iter().any(|v| !v.is_finite())) {
            return domain("precipitation coefficients must be finite");
        }
        Ok(())
    }

    pub fn orders(&self) -> PrecipOrders {
        [
            self.amount_trend.order,
            self.amount_occ_lags.len(),
            self.amount_temp_poly.len(),
            self.zero_trend.order,
            self.zero_occ_lags.len(),
            self.zero_temp_poly.len(),
        ]
    }

    /// Wet-day lags needed to evaluate either part.
    pub fn max_lag(&self) -> usize {
        self.amount_occ_lags.len().max(self.zero_occ_lags.len())
    }

    pub fn n_params(&self) -> usize {
        self.amount_trend.n_params()
            + self.amount_occ_lags.len()
            + self.amount_temp_poly.len()
            + 1
            + self.zero_trend.n_params()
            + self.zero_occ_lags.len()
            + self.zero_temp_poly.len()
    }

    fn linear_predictor(trend: f64, occ_coefs: &[f64], poly: &[f64], occ_history: &[u8], z: f64) -> f64 {
        let mut eta = trend;
        for (g, &o) in occ_coefs.iter().zip(occ_history) {
            eta += g * f64::from(o);
        }
        let mut zp = 1.0;
        for k in poly {
            zp *= z;
            eta += k * zp;
        }
        eta
    }

    /// Expected wet-day amount, mm. `occ_history[0]` is yesterday's wet-day
    /// indicator.
    pub fn amount_mean(&self, s: SeasonDay, occ_history: &[u8], temp: f64) -> f64 {
        self.amount_log_mean(self.amount_trend.eval(s), occ_history, temp).exp()
    }

    #[inline]
    fn amount_log_mean(&self, trend: f64, occ_history: &[u8], temp: f64) -> f64 {
        Self::linear_predictor(
            trend,
            &self.amount_occ_lags,
            &self.amount_temp_poly,
            occ_history,
            self.temp_standardization.apply(temp),
        )
    }

    #[inline]
    fn zero_logit(&self, trend: f64, occ_history: &[u8], temp: f64) -> f64 {
        Self::linear_predictor(
            trend,
            &self.zero_occ_lags,
            &self.zero_temp_poly,
            occ_history,
            self.temp_standardization.apply(temp),
        )
    }

    /// Probability of a dry day.
    pub fn zero_probability(&self, s: SeasonDay, occ_history: &[u8], temp: f64) -> f64 {
        inverse_logit(self.zero_logit(self.zero_trend.eval(s), occ_history, temp))
    }

    /// One-day predictive distribution.
    pub fn spec(&self, s: SeasonDay, occ_history: &[u8], temp: f64) -> zig::ZeroInflatedSpec {
        let mean = self.amount_mean(s, occ_history, temp).max(zig::MEAN_FLOOR);
        let k = self.amount_cv_shape;
        zig::ZeroInflatedSpec::new(
            self.zero_probability(s, occ_history, temp),
            zig::GammaSpec::new(k, mean / k).expect("positive gamma"),
        )
        .expect("probability")
    }

    /// Draws one day: (amount, wet indicator).
    pub fn simulate<R: Rng + ?Sized>(&self, s: SeasonDay, occ_history: &[u8], temp: f64, rng: &mut R) -> (f64, u8) {
        let p_zero = self.zero_probability(s, occ_history, temp);
        let u: f64 = rng.random();
        if u < p_zero {
            return (0.0, 0);
        }
        let mean = self.amount_mean(s, occ_history, temp).max(zig::MEAN_FLOOR);
        let k = self.amount_cv_shape;
        (zig::sample_gamma(k, mean / k, rng), 1)
    }

    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        Ok(PrecipObservations::from_dataset(data, self.max_lag())?.log_likelihood(self))
    }
}

/// Maximum number of wet-day lags tracked per observation.
pub const MAX_OCC_LAGS: usize = 32;

#[derive(Debug, Clone, Copy)]
pub(crate) struct PrecipObservation {
    pub index: usize,
    pub day: u16,
    pub temp: f64,
    /// bit j set iff it was wet j+1 days before
    pub occ_mask: u32,
    pub amount: f64,
}

impl PrecipObservation {
    fn occ(&self, n: usize) -> [u8; MAX_OCC_LAGS] {
        let mut out = [0u8; MAX_OCC_LAGS];
        for (j, o) in out.iter_mut().enumerate().take(n) {
            *o = ((self.occ_mask >> j) & 1) as u8;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PrecipObservations {
    pub(crate) items: Vec<PrecipObservation>,
    lag: usize,
}

impl PrecipObservations {
    pub fn from_dataset(data: &Dataset, lag: usize) -> Result<Self> {
        if lag > MAX_OCC_LAGS {
            return domain(format!("at most {MAX_OCC_LAGS} wet-day lags are supported"));
        }
        let recs = data.records();
        let mut items = Vec::new();
        for w in contiguous_windows(data, &[Field::Precipitation, Field::Temperature], lag) {
            for t in w.start + lag..w.end {
                let mut mask = 0u32;
                for j in 0..lag {
                    if recs[t - 1 - j].precipitation.unwrap() > 0.0 {
                        mask |= 1 << j;
                    }
                }
                items.push(PrecipObservation {
                    index: t,
                    day: season_day(recs[t].date).value(),
                    temp: recs[t].temperature.unwrap(),
                    occ_mask: mask,
                    amount: recs[t].precipitation.unwrap(),
                });
            }
        }
        if items.is_empty() {
            return Err(Error::NoUsableTransitions);
        }
        Ok(Self { items, lag })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Mean and standard deviation of the temperatures seen by the terms.
    pub fn temp_moments(&self) -> (f64, f64) {
        let n = self.items.len() as f64;
        let mean = self.items.iter().map(|o| o.temp).sum::<f64>() / n;
        let var = self.items.iter().map(|o| (o.temp - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    pub fn log_likelihood(&self, params: &PrecipParams) -> f64 {
        debug_assert!(params.max_lag() <= self.lag);
        let amount_table = params.amount_trend.table();
        let zero_table = params.zero_trend.table();
        let k = params.amount_cv_shape;
        let mut total = 0.0;
        for o in &self.items {
            let occ = o.occ(params.max_lag());
            let zl = params.zero_logit(zero_table[o.day as usize], &occ, o.temp);
            if o.amount == 0.0 {
                total += ln_inverse_logit(zl);
            } else {
                let mean = params
                    .amount_log_mean(amount_table[o.day as usize], &occ, o.temp)
                    .exp()
                    .max(zig::MEAN_FLOOR);
                total += ln_inverse_logit(-zl) + gamma_ln_pdf(k, mean / k, o.amount);
            }
        }
        total
    }

    pub(crate) fn predictive(&self, params: &PrecipParams) -> Vec<(usize, zig::ZeroInflatedSpec, f64)> {
        self.items
            .iter()
            .map(|o| {
                let occ = o.occ(params.max_lag());
                let s = SeasonDay::new(o.day).expect("season day");
                (o.index, params.spec(s, &occ, o.temp), o.amount)
            })
            .collect()
    }
}
