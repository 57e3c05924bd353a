//! Statistical snow-depth models: fitting, Monte Carlo forecasting and
//! forecast verification for daily station data.

pub mod data;
pub mod direct;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod forecast;
pub mod params;
pub mod short_term;
pub mod special;
pub mod synthetic;
pub mod weather;
pub mod zig;

pub use data::{load_csv, read_weather_forecast, season_day, DailyRecord, Dataset, Field, SeasonDay};
pub use error::{Error, Result};
pub use params::{Family, ModelParams, ParamFile};
