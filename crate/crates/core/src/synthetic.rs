//! Joint simulation of weather and snow depth, for tests and demos.

use chrono::{Duration, NaiveDate};
use rand::Rng;

use crate::data::{season_day, DailyRecord, Dataset};
use crate::error::{domain, Result};
use crate::short_term::{DayInputs, ShortTermParams};
use crate::weather::{PrecipParams, TempParams};

/// Weather generator components.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherModel {
    pub temperature: TempParams,
    pub precipitation: PrecipParams,
}

/// Simulates `days` consecutive days from `start`. Temperature anomalies,
/// wet-day history and depth all start at zero.
pub fn simulate_dataset<R: Rng + ?Sized>(
    station: &str,
    start: NaiveDate,
    days: usize,
    weather: &WeatherModel,
    short_term: &ShortTermParams,
    rng: &mut R,
) -> Result<Dataset> {
    if days < 2 {
        return domain(format!("need at least 2 days, got {days}"));
    }
    weather.temperature.validate()?;
    weather.precipitation.validate()?;
    short_term.validate()?;
    let p = weather.temperature.ar.len();
    let q = weather.precipitation.max_lag();
    let mut anomalies = vec![0.0; p];
    let mut occ = vec![0u8; q];
    let mut depth = 0.0;
    let mut records = Vec::with_capacity(days);
    for i in 0..days {
        let date = start + Duration::days(i as i64);
        let s = season_day(date);
        let (temp, anomaly) = weather.temperature.step(s, &anomalies, rng);
        if p > 0 {
            anomalies.pop();
            anomalies.insert(0, anomaly);
        }
        let (precip, wet) = weather.precipitation.simulate(s, &occ, temp, rng);
        if q > 0 {
            occ.pop();
            occ.insert(0, wet);
        }
        if i > 0 {
            depth = short_term.sample_next(&DayInputs::new(temp, precip, depth)?, rng);
        }
        records.push(DailyRecord::new(date, Some(temp), Some(precip), Some(depth))?);
    }
    Dataset::new(station, records)
}

/// Weather generators with a plausible climate for the three stations'
/// settings. Hand-chosen values, not fitted to station data.
pub mod presets {
    use super::WeatherModel;
    use crate::weather::{FourierTrend, PrecipParams, TempParams, TempStandardization};

    /// Coastal lowland: mean 6.5 °C, about -4 °C in January and 17 °C in July.
    pub fn oslo() -> WeatherModel {
        WeatherModel {
            temperature: TempParams {
                trend: FourierTrend {
                    order: 1,
                    a0: 6.5,
                    a: vec![-2.67],
                    b: vec![-10.15],
                },
                ar: vec![0.75],
                innovation_sd: 2.2,
            },
            precipitation: PrecipParams {
                amount_trend: FourierTrend {
                    order: 1,
                    a0: 4f64.ln(),
                    a: vec![0.0],
                    b: vec![-0.25],
                },
                amount_occ_lags: vec![0.2],
                amount_temp_poly: vec![0.1],
                amount_cv_shape: 0.7,
                zero_trend: FourierTrend::constant(0.6),
                zero_occ_lags: vec![-1.0],
                zero_temp_poly: vec![],
                temp_standardization: TempStandardization {
                    center: 6.0,
                    scale: 8.0,
                },
            },
        }
    }

    /// Mountain plateau: colder and with a longer winter.
    pub fn geilo() -> WeatherModel {
        let mut m = oslo();
        m.temperature.trend.a0 = 1.5;
        m.temperature.trend.b = vec![-9.0];
        m.precipitation.amount_trend.a0 = 3f64.ln();
        m.precipitation.temp_standardization.center = 1.0;
        m
    }

    /// Arctic coast: cold, mild winter amplitude, frequent precipitation.
    pub fn tromso() -> WeatherModel {
        let mut m = oslo();
        m.temperature.trend.a0 = 2.5;
        m.temperature.trend.a = vec![-2.0];
        m.temperature.trend.b = vec![-7.0];
        m.precipitation.zero_trend.a0 = 0.2;
        m.precipitation.temp_standardization.center = 2.5;
        m
    }
}
