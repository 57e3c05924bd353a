//! Per-family likelihood fits on an unconstrained internal vector.

use crate::data::Dataset;
use crate::direct::{DirectObservations, DirectOrders, DirectParams};
use crate::error::{domain, Result};
use crate::short_term::{ShortTermObservations, ShortTermParams};
use crate::special::{inverse_softplus, logit, softplus};
use crate::weather::{
    FourierTrend, PrecipObservations, PrecipOrders, PrecipParams, TempObservations, TempParams,
    TempStandardization,
};

use super::optimizer::{maximize, FitConfig};
use super::whiten::Whitening;
use super::{aic, FitResult};

/// Bijection between natural parameters and the optimizer's vector.
pub trait Packing {
    type Params;
    fn pack(&self, params: &Self::Params) -> Vec<f64>;
    fn unpack(&self, x: &[f64]) -> Self::Params;
}

/// `beta0` through softplus, both variances through `ln`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShortTermPacking;

impl Packing for ShortTermPacking {
    type Params = ShortTermParams;

    fn pack(&self, p: &ShortTermParams) -> Vec<f64> {
        vec![
            p.mu,
            inverse_softplus(p.beta0),
            p.beta1,
            p.beta2,
            p.beta3,
            p.beta4,
            p.beta5,
            p.beta6,
            p.beta7,
            p.sigma1_sq.ln(),
            p.sigma2_sq.ln(),
        ]
    }

    fn unpack(&self, x: &[f64]) -> ShortTermParams {
        ShortTermParams {
            mu: x[0],
            beta0: softplus(x[1]),
            beta1: x[2],
            beta2: x[3],
            beta3: x[4],
            beta4: x[5],
            beta5: x[6],
            beta6: x[7],
            beta7: x[8],
            sigma1_sq: x[9].exp(),
            sigma2_sq: x[10].exp(),
        }
    }
}

/// Trend, AR coefficients, `ln σ_T`.
#[derive(Debug, Clone, Copy)]
pub struct TempPacking {
    pub fourier_order: usize,
    pub ar_order: usize,
}

impl Packing for TempPacking {
    type Params = TempParams;

    fn pack(&self, p: &TempParams) -> Vec<f64> {
        let mut x = Vec::new();
        p.trend.write_to(&mut x);
        x.extend(&p.ar);
        x.push(p.innovation_sd.ln());
        x
    }

    fn unpack(&self, x: &[f64]) -> TempParams {
        let mut it = x.iter();
        let trend = FourierTrend::read_from(self.fourier_order, &mut it);
        let ar = it.by_ref().take(self.ar_order).copied().collect();
        let innovation_sd = it.next().expect("ln sd").exp();
        TempParams {
            trend,
            ar,
            innovation_sd,
        }
    }
}

/// Amount part, `ln` shape, zero part. The temperature standardization is
/// fixed from the data and not estimated.
#[derive(Debug, Clone, Copy)]
pub struct PrecipPacking {
    pub orders: PrecipOrders,
    pub standardization: TempStandardization,
}

impl Packing for PrecipPacking {
    type Params = PrecipParams;

    fn pack(&self, p: &PrecipParams) -> Vec<f64> {
        let mut x = Vec::new();
        p.amount_trend.write_to(&mut x);
        x.extend(&p.amount_occ_lags);
        x.extend(&p.amount_temp_poly);
        x.push(p.amount_cv_shape.ln());
        p.zero_trend.write_to(&mut x);
        x.extend(&p.zero_occ_lags);
        x.extend(&p.zero_temp_poly);
        x
    }

    fn unpack(&self, x: &[f64]) -> PrecipParams {
        let [m_r, q_r, s_r, m_z, q_z, s_z] = self.orders;
        let mut it = x.iter();
        let amount_trend = FourierTrend::read_from(m_r, &mut it);
        let amount_occ_lags = it.by_ref().take(q_r).copied().collect();
        let amount_temp_poly = it.by_ref().take(s_r).copied().collect();
        let amount_cv_shape = it.next().expect("ln shape").exp();
        let zero_trend = FourierTrend::read_from(m_z, &mut it);
        let zero_occ_lags = it.by_ref().take(q_z).copied().collect();
        let zero_temp_poly = it.by_ref().take(s_z).copied().collect();
        PrecipParams {
            amount_trend,
            amount_occ_lags,
            amount_temp_poly,
            amount_cv_shape,
            zero_trend,
            zero_occ_lags,
            zero_temp_poly,
            temp_standardization: self.standardization,
        }
    }
}

/// Trend, lag coefficients, zero part, `ln` variances. The log-mean
/// coefficients pass through `whitening`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectPacking {
    pub orders: DirectOrders,
    pub whitening: Whitening,
}

impl DirectPacking {
    pub fn new(orders: DirectOrders) -> Self {
        Self {
            orders,
            whitening: Whitening::identity(),
        }
    }

    /// Whitened against the covariates of `obs`.
    pub fn for_observations(orders: DirectOrders, obs: &DirectObservations) -> Self {
        let rows = obs.mean_covariates(orders);
        let dim = 1 + 2 * orders[0] + orders[1] + orders[2];
        Self {
            orders,
            whitening: Whitening::from_rows(0, dim, rows.iter().map(|r| r.as_slice())),
        }
    }
}

impl Packing for DirectPacking {
    type Params = DirectParams;

    fn pack(&self, p: &DirectParams) -> Vec<f64> {
        let mut x = Vec::new();
        p.trend.write_to(&mut x);
        x.extend(&p.occ_lags);
        x.extend(&p.depth_lags);
        x.extend([p.zero_intercept, p.zero_slope, p.sigma1_sq.ln(), p.sigma2_sq.ln()]);
        self.whitening.forward(&mut x);
        x
    }

    fn unpack(&self, x: &[f64]) -> DirectParams {
        let [m, q, s] = self.orders;
        let mut x = x.to_vec();
        self.whitening.backward(&mut x);
        let mut it = x.iter();
        let trend = FourierTrend::read_from(m, &mut it);
        let occ_lags = it.by_ref().take(q).copied().collect();
        let depth_lags = it.by_ref().take(s).copied().collect();
        let mut next = || *it.next().expect("direct tail");
        DirectParams {
            trend,
            occ_lags,
            depth_lags,
            zero_intercept: next(),
            zero_slope: next(),
            sigma1_sq: next().exp(),
            sigma2_sq: next().exp(),
        }
    }
}

fn run<K: Packing>(
    packing: &K,
    init: &K::Params,
    log_likelihood: impl Fn(&K::Params) -> f64,
    n_params: usize,
    config: &FitConfig,
) -> Result<FitResult<K::Params>> {
    let x0 = packing.pack(init);
    let m = maximize(|x| log_likelihood(&packing.unpack(x)), &x0, config)?;
    let params = packing.unpack(&m.x);
    let mut notes = Vec::new();
    if !m.converged {
        notes.push(format!(
            "not converged after {} iterations (gradient norm {:.3e})",
            m.iterations, m.gradient_inf_norm
        ));
    }
    Ok(FitResult {
        params,
        log_likelihood: m.value,
        aic: aic(n_params, m.value),
        n_params,
        iterations: m.iterations,
        converged: m.converged,
        trace: m.trace,
        boundary: false,
        notes,
    })
}

fn clamp_fraction(p: f64) -> f64 {
    p.clamp(1e-4, 1.0 - 1e-4)
}

// ---------------------------------------------------------------------------
// Short-term model
// ---------------------------------------------------------------------------

/// Fits from several starting points and keeps the best. From a large snow
/// ratio the fit can settle on a ridge where nearly all precipitation falls
/// as snow at any temperature and the variance absorbs the misfit.
pub fn fit_short_term(data: &Dataset, config: &FitConfig) -> Result<FitResult<ShortTermParams>> {
    let obs = ShortTermObservations::from_dataset(data)?;
    fit_short_term_multistart(&obs, config)
}

pub(crate) fn fit_short_term_multistart(
    obs: &ShortTermObservations,
    config: &FitConfig,
) -> Result<FitResult<ShortTermParams>> {
    let guess = ShortTermParams::initial_guess();
    let starts = [
        guess,
        ShortTermParams { beta0: 1.0, beta1: 0.0, ..guess },
        ShortTermParams { beta0: 0.3, beta1: -1.0, ..guess },
    ];
    let mut best: Option<FitResult<ShortTermParams>> = None;
    for init in &starts {
        let fit = fit_short_term_from(obs, init, config)?;
        // ties keep the earlier start
        if best.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one start"))
}

pub fn fit_short_term_from(
    obs: &ShortTermObservations,
    init: &ShortTermParams,
    config: &FitConfig,
) -> Result<FitResult<ShortTermParams>> {
    init.validate()?;
    if init.beta0 <= 0.0 {
        return domain("initial beta0 must be positive");
    }
    run(
        &ShortTermPacking,
        init,
        |p| obs.log_likelihood(p),
        ShortTermParams::N_PARAMS,
        config,
    )
}

// ---------------------------------------------------------------------------
// Temperature
// ---------------------------------------------------------------------------

/// Constant mean and overall standard deviation of the observed series.
pub fn initial_temperature(obs: &TempObservations, orders: (usize, usize)) -> TempParams {
    let t = obs.temps();
    let n = t.len() as f64;
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    TempParams {
        trend: FourierTrend::zeros(orders.0, mean),
        ar: vec![0.0; orders.1],
        innovation_sd: var.sqrt().max(1e-3),
    }
}

pub fn fit_temperature(
    data: &Dataset,
    orders: (usize, usize),
    config: &FitConfig,
) -> Result<FitResult<TempParams>> {
    let obs = TempObservations::from_dataset(data, orders.1)?;
    fit_temperature_from(&obs, &initial_temperature(&obs, orders), config)
}

/// Fit on prepared observations, whose conditioning lag must cover the AR
/// order of `init`.
pub fn fit_temperature_from(
    obs: &TempObservations,
    init: &TempParams,
    config: &FitConfig,
) -> Result<FitResult<TempParams>> {
    init.validate()?;
    let (m, p) = init.orders();
    if obs.n_terms() == 0 {
        return Err(crate::error::Error::NoUsableTransitions);
    }
    let packing = TempPacking {
        fourier_order: m,
        ar_order: p,
    };
    let mut fit = run(&packing, init, |q| obs.log_likelihood(q), init.n_params(), config)?;
    if !fit.params.is_stationary() {
        fit.notes.push("fitted AR polynomial is not stationary".into());
    }
    Ok(fit)
}

// ---------------------------------------------------------------------------
// Precipitation
// ---------------------------------------------------------------------------

/// Intercepts from the dry fraction and wet-day amount moments, every other
/// coefficient zero. Temperature is standardized with the moments of the
/// fitted sample.
pub fn initial_precipitation(obs: &PrecipObservations, orders: PrecipOrders) -> PrecipParams {
    let (center, sd) = obs.temp_moments();
    let scale = if sd > 1e-9 { sd } else { 1.0 };
    let items = &obs.items;
    let wet: Vec<f64> = items.iter().map(|o| o.amount).filter(|&a| a > 0.0).collect();
    let dry_fraction = 1.0 - wet.len() as f64 / items.len() as f64;
    let (amount_a0, shape) = if wet.is_empty() {
        (0.0, 1.0)
    } else {
        let n = wet.len() as f64;
        let m = wet.iter().sum::<f64>() / n;
        let v = wet.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
        let shape = if v > 0.0 { (m * m / v).clamp(0.05, 20.0) } else { 1.0 };
        (m.ln(), shape)
    };
    let [m_r, q_r, s_r, m_z, q_z, s_z] = orders;
    PrecipParams {
        amount_trend: FourierTrend::zeros(m_r, amount_a0),
        amount_occ_lags: vec![0.0; q_r],
        amount_temp_poly: vec![0.0; s_r],
        amount_cv_shape: shape,
        zero_trend: FourierTrend::zeros(m_z, logit(clamp_fraction(dry_fraction))),
        zero_occ_lags: vec![0.0; q_z],
        zero_temp_poly: vec![0.0; s_z],
        temp_standardization: TempStandardization { center, scale },
    }
}

pub fn fit_precipitation(
    data: &Dataset,
    orders: PrecipOrders,
    config: &FitConfig,
) -> Result<FitResult<PrecipParams>> {
    let lag = orders[1].max(orders[4]);
    let obs = PrecipObservations::from_dataset(data, lag)?;
    fit_precipitation_from(&obs, &initial_precipitation(&obs, orders), config)
}

pub fn fit_precipitation_from(
    obs: &PrecipObservations,
    init: &PrecipParams,
    config: &FitConfig,
) -> Result<FitResult<PrecipParams>> {
    init.validate()?;
    if init.max_lag() > obs.lag() {
        return domain(format!(
            "model needs {} wet-day lags, observations carry {}",
            init.max_lag(),
            obs.lag()
        ));
    }
    let packing = PrecipPacking {
        orders: init.orders(),
        standardization: init.temp_standardization,
    };
    let mut fit = run(&packing, init, |p| obs.log_likelihood(p), init.n_params(), config)?;
    let wet = obs.items.iter().filter(|o| o.amount > 0.0).count();
    if wet == 0 {
        fit.boundary = true;
        fit.notes
            .push("no wet days: dry probability saturates and amount coefficients are unidentified".into());
    } else if wet == obs.len() {
        fit.boundary = true;
        fit.notes.push("no dry days: dry probability saturates at zero".into());
    }
    Ok(fit)
}

// ---------------------------------------------------------------------------
// Direct model
// ---------------------------------------------------------------------------

/// Seasonal intercept from the mean positive depth and a zero part from the
/// fraction of bare-ground days; lag coefficients start at zero.
pub fn initial_direct(obs: &DirectObservations, orders: DirectOrders) -> DirectParams {
    let depths = obs.depths();
    let pos: Vec<f64> = depths.iter().copied().filter(|&d| d > 0.0).collect();
    let zero_fraction = 1.0 - pos.len() as f64 / depths.len() as f64;
    let (a0, var) = if pos.is_empty() {
        (0.0, 1.0)
    } else {
        let n = pos.len() as f64;
        let m = pos.iter().sum::<f64>() / n;
        let v = pos.iter().map(|d| (d - m).powi(2)).sum::<f64>() / n;
        (m.ln(), v.max(1e-2))
    };
    let [m, q, s] = orders;
    DirectParams {
        trend: FourierTrend::zeros(m, a0),
        occ_lags: vec![0.0; q],
        depth_lags: vec![0.0; s],
        zero_intercept: logit(clamp_fraction(zero_fraction)),
        zero_slope: 0.0,
        sigma1_sq: var,
        sigma2_sq: 0.1,
    }
}

pub fn fit_direct(data: &Dataset, orders: DirectOrders, config: &FitConfig) -> Result<FitResult<DirectParams>> {
    let lag = orders[1].max(orders[2]);
    let obs = DirectObservations::from_dataset(data, lag)?;
    fit_direct_from(&obs, &initial_direct(&obs, orders), config)
}

pub fn fit_direct_from(
    obs: &DirectObservations,
    init: &DirectParams,
    config: &FitConfig,
) -> Result<FitResult<DirectParams>> {
    init.validate()?;
    let packing = DirectPacking::for_observations(init.orders(), obs);
    let mut fit = run(&packing, init, |p| obs.log_likelihood(p), init.n_params(), config)?;
    if obs.depths().iter().all(|&d| d == 0.0) {
        fit.boundary = true;
        fit.notes.push("no snow in the data: zero part saturates".into());
    }
    Ok(fit)
}
