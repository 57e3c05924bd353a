//! Forward stepwise order selection by AIC.
//!
//! The order dimensions are visited round-robin (for temperature: `m_T`,
//! then `p_T`, then `m_T` again, ...). An increment is kept only if it lowers
//! AIC by more than `AIC_TIE`. All candidates are scored on the same
//! observations: the conditioning lag is the largest lag allowed by
//! `max_orders`, so likelihoods of different orders are comparable.

use log::debug;

use crate::data::Dataset;
use crate::direct::DirectObservations;
use crate::error::{domain, Result};
use crate::params::{Family, ModelParams};
use crate::short_term::ShortTermObservations;
use crate::weather::{PrecipObservations, TempObservations};

use super::fit::{
    fit_direct_from, fit_precipitation_from, fit_short_term_from, fit_short_term_multistart, fit_temperature_from,
    initial_direct, initial_precipitation, initial_temperature,
};
use super::{FitConfig, FitResult};

/// Minimum AIC decrease for an increment to count.
const AIC_TIE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Selection {
    pub orders: Vec<usize>,
    pub fit: FitResult<ModelParams>,
    /// AIC of the all-zero model on the same observations.
    pub null_aic: f64,
    /// Every candidate scored, in visiting order.
    pub history: Vec<(Vec<usize>, f64)>,
}

enum Prepared {
    ShortTerm(ShortTermObservations),
    Temperature(TempObservations),
    Precipitation(PrecipObservations),
    Direct(DirectObservations),
}

fn conditioning_lag(family: Family, orders: &[usize]) -> usize {
    match family {
        Family::ShortTerm => 1,
        Family::Temperature => orders[1],
        Family::Precipitation => orders[1].max(orders[4]),
        Family::Direct => orders[1].max(orders[2]),
    }
}

fn check_orders(family: Family, orders: &[usize]) -> Result<()> {
    if orders.len() != family.order_dims() {
        return domain(format!(
            "{family} model takes {} orders, got {}",
            family.order_dims(),
            orders.len()
        ));
    }
    Ok(())
}

impl Prepared {
    fn new(data: &Dataset, family: Family, lag: usize) -> Result<Self> {
        Ok(match family {
            Family::ShortTerm => Prepared::ShortTerm(ShortTermObservations::from_dataset(data)?),
            Family::Temperature => Prepared::Temperature(TempObservations::from_dataset(data, lag)?),
            Family::Precipitation => Prepared::Precipitation(PrecipObservations::from_dataset(data, lag)?),
            Family::Direct => Prepared::Direct(DirectObservations::from_dataset(data, lag)?),
        })
    }

    fn initial(&self, orders: &[usize]) -> ModelParams {
        match self {
            Prepared::ShortTerm(_) => ModelParams::ShortTerm(crate::short_term::ShortTermParams::initial_guess()),
            Prepared::Temperature(o) => ModelParams::Temperature(initial_temperature(o, (orders[0], orders[1]))),
            Prepared::Precipitation(o) => {
                let mut ord = [0; 6];
                ord.copy_from_slice(orders);
                ModelParams::Precipitation(initial_precipitation(o, ord))
            }
            Prepared::Direct(o) => ModelParams::Direct(initial_direct(o, [orders[0], orders[1], orders[2]])),
        }
    }

    /// Fit from the family's default start.
    fn fit_fresh(&self, orders: &[usize], config: &FitConfig) -> Result<FitResult<ModelParams>> {
        match self {
            Prepared::ShortTerm(o) => Ok(fit_short_term_multistart(o, config)?.into_model()),
            _ => self.fit(&self.initial(orders), config),
        }
    }

    fn fit(&self, init: &ModelParams, config: &FitConfig) -> Result<FitResult<ModelParams>> {
        match (self, init) {
            (Prepared::ShortTerm(o), ModelParams::ShortTerm(p)) => Ok(fit_short_term_from(o, p, config)?.into_model()),
            (Prepared::Temperature(o), ModelParams::Temperature(p)) => {
                Ok(fit_temperature_from(o, p, config)?.into_model())
            }
            (Prepared::Precipitation(o), ModelParams::Precipitation(p)) => {
                Ok(fit_precipitation_from(o, p, config)?.into_model())
            }
            (Prepared::Direct(o), ModelParams::Direct(p)) => Ok(fit_direct_from(o, p, config)?.into_model()),
            _ => domain("initial parameters do not match the model family"),
        }
    }
}

/// Copy of `params` with one order raised by one; new coefficients are zero.
fn increment(params: &ModelParams, dim: usize) -> ModelParams {
    let mut p = params.clone();
    match &mut p {
        ModelParams::ShortTerm(_) => {}
        ModelParams::Temperature(t) => match dim {
            0 => t.trend = t.trend.extended(t.trend.order + 1),
            _ => t.ar.push(0.0),
        },
        ModelParams::Precipitation(r) => match dim {
            0 => r.amount_trend = r.amount_trend.extended(r.amount_trend.order + 1),
            1 => r.amount_occ_lags.push(0.0),
            2 => r.amount_temp_poly.push(0.0),
            3 => r.zero_trend = r.zero_trend.extended(r.zero_trend.order + 1),
            4 => r.zero_occ_lags.push(0.0),
            _ => r.zero_temp_poly.push(0.0),
        },
        ModelParams::Direct(d) => match dim {
            0 => d.trend = d.trend.extended(d.trend.order + 1),
            1 => d.occ_lags.push(0.0),
            _ => d.depth_lags.push(0.0),
        },
    }
    p
}

/// Fits one family at fixed orders, conditioning on the model's own lags.
pub fn fit_family(
    data: &Dataset,
    family: Family,
    orders: &[usize],
    config: &FitConfig,
) -> Result<FitResult<ModelParams>> {
    check_orders(family, orders)?;
    let prepared = Prepared::new(data, family, conditioning_lag(family, orders))?;
    prepared.fit_fresh(orders, config)
}

/// Forward stepwise selection up to `max_orders` (per dimension).
pub fn stepwise_select(
    data: &Dataset,
    family: Family,
    max_orders: &[usize],
    config: &FitConfig,
) -> Result<Selection> {
    check_orders(family, max_orders)?;
    let prepared = Prepared::new(data, family, conditioning_lag(family, max_orders))?;
    let mut orders = vec![0usize; max_orders.len()];
    let mut best = prepared.fit_fresh(&orders, config)?;
    let null_aic = best.aic;
    let mut history = vec![(orders.clone(), best.aic)];
    debug!("{family} null model: AIC {:.4}", best.aic);

    if !orders.is_empty() {
        let mut since_improvement = 0;
        let mut dim = 0;
        while since_improvement < orders.len() {
            if orders[dim] < max_orders[dim] {
                let mut cand_orders = orders.clone();
                cand_orders[dim] += 1;
                let cand = prepared.fit(&increment(&best.params, dim), config)?;
                history.push((cand_orders.clone(), cand.aic));
                debug!("{family} orders {cand_orders:?}: AIC {:.4}", cand.aic);
                if cand.aic < best.aic - AIC_TIE {
                    orders = cand_orders;
                    best = cand;
                    since_improvement = 0;
                } else {
                    since_improvement += 1;
                }
            } else {
                since_improvement += 1;
            }
            dim = (dim + 1) % orders.len();
        }
    }

    Ok(Selection {
        orders,
        fit: best,
        null_aic,
        history,
    })
}
