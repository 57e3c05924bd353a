//! Maximum-likelihood fitting and AIC order selection.

mod fit;
mod optimizer;
mod stepwise;
mod whiten;

pub use fit::{
    fit_direct, fit_direct_from, fit_precipitation, fit_precipitation_from, fit_short_term,
    fit_short_term_from, fit_temperature, fit_temperature_from, initial_direct,
    initial_precipitation, initial_temperature, DirectPacking, Packing, PrecipPacking,
    ShortTermPacking, TempPacking,
};
pub use optimizer::{finite_difference, maximize, FitConfig, Maximum};
pub use stepwise::{fit_family, stepwise_select, Selection};
pub use whiten::Whitening;
pub(crate) use whiten::fourier_row;

use crate::params::{FitSummary, ModelParams};

/// Outcome of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<P> {
    pub params: P,
    pub log_likelihood: f64,
    /// `2k - 2·log_likelihood`
    pub aic: f64,
    pub n_params: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood at the start and after every accepted step.
    pub trace: Vec<f64>,
    /// Set when the data push some parameter to the edge of its range.
    pub boundary: bool,
    pub notes: Vec<String>,
}

pub fn aic(n_params: usize, log_likelihood: f64) -> f64 {
    2.0 * n_params as f64 - 2.0 * log_likelihood
}

impl<P> FitResult<P> {
    pub fn map<Q>(self, f: impl FnOnce(P) -> Q) -> FitResult<Q> {
        FitResult {
            params: f(self.params),
            log_likelihood: self.log_likelihood,
            aic: self.aic,
            n_params: self.n_params,
            iterations: self.iterations,
            converged: self.converged,
            trace: self.trace,
            boundary: self.boundary,
            notes: self.notes,
        }
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            log_likelihood: self.log_likelihood,
            aic: self.aic,
            n_params: self.n_params,
            iterations: self.iterations,
            converged: self.converged,
            notes: self.notes.clone(),
        }
    }
}

impl<P: Into<ModelParams>> FitResult<P> {
    pub fn into_model(self) -> FitResult<ModelParams> {
        self.map(Into::into)
    }
}

impl From<crate::short_term::ShortTermParams> for ModelParams {
    fn from(p: crate::short_term::ShortTermParams) -> Self {
        ModelParams::ShortTerm(p)
    }
}

impl From<crate::weather::TempParams> for ModelParams {
    fn from(p: crate::weather::TempParams) -> Self {
        ModelParams::Temperature(p)
    }
}

impl From<crate::weather::PrecipParams> for ModelParams {
    fn from(p: crate::weather::PrecipParams) -> Self {
        ModelParams::Precipitation(p)
    }
}

impl From<crate::direct::DirectParams> for ModelParams {
    fn from(p: crate::direct::DirectParams) -> Self {
        ModelParams::Direct(p)
    }
}
