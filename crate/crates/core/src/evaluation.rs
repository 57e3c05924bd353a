//! Goodness of fit by the probability integral transform, and forecast skill
//! by leave-one-season-out cross-validation.

use std::io::Write;

use chrono::Datelike;
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{season_year, Dataset, Field};
use crate::direct::{DirectObservations, DirectOrders, DirectParams};
use crate::error::{domain, Error, Result};
use crate::estimation::{fit_direct, fit_precipitation, fit_short_term, fit_temperature, FitConfig};
use crate::forecast::{forecast, ForecastModels, ForecastRequest, LongTermModel};
use crate::params::ModelParams;
use crate::short_term::ShortTermObservations;
use crate::weather::{PrecipObservations, PrecipOrders, TempObservations};
use crate::zig::{ZeroInflatedSpec, SMALLEST_POSITIVE};

pub const DEFAULT_BINS: usize = 20;
pub const WINTER_MONTHS: [u32; 3] = [12, 1, 2];
pub const ALL_MONTHS: [u32; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

// ---------------------------------------------------------------------------
// PIT
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitReport {
    pub values: Vec<f64>,
    pub histogram: Vec<usize>,
    pub ks_statistic: f64,
    pub n: usize,
}

impl PitReport {
    pub fn from_values(values: Vec<f64>, bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NoUsableTransitions);
        }
        if bins == 0 {
            return domain("histogram needs at least one bin");
        }
        let mut histogram = vec![0usize; bins];
        for &u in &values {
            let b = ((u * bins as f64) as usize).min(bins - 1);
            histogram[b] += 1;
        }
        Ok(Self {
            ks_statistic: ks_uniform(&values),
            n: values.len(),
            values,
            histogram,
        })
    }

    /// Whether uniformity is retained at level `alpha`.
    pub fn passes_ks(&self, alpha: f64) -> bool {
        self.ks_statistic < ks_critical_value(self.n, alpha)
    }

    pub fn write_values_csv(&self, mut out: impl Write) -> Result<()> {
        let mut buf = String::from("pit\n");
        for v in &self.values {
            buf.push_str(&v.to_string());
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn write_histogram_csv(&self, mut out: impl Write) -> Result<()> {
        let bins = self.histogram.len();
        let mut buf = String::from("bin,lower,upper,count\n");
        for (i, c) in self.histogram.iter().enumerate() {
            buf.push_str(&format!(
                "{},{},{},{}\n",
                i + 1,
                i as f64 / bins as f64,
                (i + 1) as f64 / bins as f64,
                c
            ));
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `values` and U(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |d, (i, &u)| {
        d.max((i as f64 + 1.0) / n - u).max(u - i as f64 / n)
    })
}

/// Asymptotic KS critical value with Stephens' small-sample correction.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    let sn = (n as f64).sqrt();
    c / (sn + 0.12 + 0.11 / sn)
}

/// PIT of a zero-inflated observation. Zero maps to U(0, F(0)) when
/// randomized. The smallest positive double stands for every gamma draw
/// that underflowed, so it maps to U(F(0), F(x)).
pub fn zig_pit<R: Rng + ?Sized>(spec: &ZeroInflatedSpec, x: f64, randomized: bool, rng: &mut R) -> Result<f64> {
    let f0 = spec.p_zero();
    if x == 0.0 {
        return Ok(if randomized { rng.random::<f64>() * f0 } else { f0 });
    }
    let fx = spec.cdf(x)?;
    if x <= SMALLEST_POSITIVE && randomized {
        return Ok(f0 + rng.random::<f64>() * (fx - f0));
    }
    Ok(fx)
}

/// PIT values of the one-step-ahead predictive distributions of `model` on
/// the days of `data` whose month is listed in `months`.
pub fn pit_series(
    model: &ModelParams,
    data: &Dataset,
    months: &[u32],
    randomized: bool,
    seed: u64,
) -> Result<PitReport> {
    model.validate()?;
    let recs = data.records();
    let keep = |i: usize| months.contains(&recs[i].date.month());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    let mut push_zig = |spec: &ZeroInflatedSpec, x: f64, rng: &mut ChaCha8Rng| -> Result<()> {
        values.push(zig_pit(spec, x, randomized, rng)?);
        Ok(())
    };
    match model {
        ModelParams::ShortTerm(p) => {
            for o in ShortTermObservations::from_dataset(data)?.items() {
                if keep(o.index) {
                    push_zig(&p.transition_spec(&o.inputs), o.depth, &mut rng)?;
                }
            }
        }
        ModelParams::Direct(p) => {
            for (i, spec, x) in DirectObservations::from_dataset(data, p.max_lag())?.predictive(p) {
                if keep(i) {
                    push_zig(&spec, x, &mut rng)?;
                }
            }
        }
        ModelParams::Precipitation(p) => {
            for (i, spec, x) in PrecipObservations::from_dataset(data, p.max_lag())?.predictive(p) {
                if keep(i) {
                    push_zig(&spec, x, &mut rng)?;
                }
            }
        }
        ModelParams::Temperature(p) => {
            let normal = Normal::new(0.0, p.innovation_sd).map_err(|e| Error::Domain(e.to_string()))?;
            for (i, mean, x) in TempObservations::from_dataset(data, p.ar.len())?.predictive(p) {
                if keep(i) {
                    values.push(normal.cdf(x - mean));
                }
            }
        }
    }
    PitReport::from_values(values, DEFAULT_BINS)
}

// ---------------------------------------------------------------------------
// Forecast skill
// ---------------------------------------------------------------------------

/// Mean absolute difference.
pub fn mae(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return domain(format!(
            "length mismatch: {} observed, {} predicted",
            observed.len(),
            predicted.len()
        ));
    }
    if observed.is_empty() {
        return domain("mae needs at least one pair");
    }
    let sum: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).abs()).sum();
    Ok(sum / observed.len() as f64)
}

/// Model orders used in every fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOrders {
    pub temperature: (usize, usize),
    pub precipitation: PrecipOrders,
    pub direct: DirectOrders,
}

impl Default for EvalOrders {
    /// The weather orders selected for Oslo. The direct model leaves out
    /// depth lags: with them the log-linear mean grows faster than the depth
    /// once snow is deep, and simulated paths run away.
    fn default() -> Self {
        Self {
            temperature: (2, 3),
            precipitation: [3, 5, 4, 3, 5, 4],
            direct: [3, 5, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationConfig {
    pub models: Vec<LongTermModel>,
    pub deltas: Vec<usize>,
    pub horizon: usize,
    pub months: Vec<u32>,
    pub n_paths: usize,
    pub seed: u64,
    pub orders: EvalOrders,
    pub fit: FitConfig,
    /// Also score the periodic-only direct model with delta 0.
    pub baseline: bool,
}

impl Default for CrossValidationConfig {
    fn default() -> Self {
        Self {
            models: vec![LongTermModel::Model2],
            deltas: vec![0, 5, 10],
            horizon: 21,
            months: WINTER_MONTHS.to_vec(),
            n_paths: crate::forecast::DEFAULT_PATHS,
            seed: 0,
            orders: EvalOrders::default(),
            fit: FitConfig::default(),
            baseline: true,
        }
    }
}

impl CrossValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.n_paths == 0 {
            return domain("horizon and n_paths must be positive");
        }
        if let Some(d) = self.deltas.iter().find(|&&d| d > self.horizon) {
            return domain(format!("delta {d} exceeds the horizon {}", self.horizon));
        }
        if self.models.contains(&LongTermModel::None) && self.deltas.iter().any(|&d| d < self.horizon) {
            return domain("model `none` only works with delta equal to the horizon");
        }
        if self.months.iter().any(|m| !(1..=12).contains(m)) {
            return domain("months must lie in 1..=12");
        }
        self.fit.validate()
    }
}

/// MAE by lead day for one model and delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillReport {
    /// `model2_delta5`, `baseline`, ...
    pub label: String,
    pub model: LongTermModel,
    pub delta: usize,
    pub horizon: usize,
    pub months: Vec<u32>,
    pub n_forecasts: usize,
    /// Mean observed depth over the evaluation months, cm.
    pub mean_depth: f64,
    /// Index 0 is lead day 1.
    pub per_horizon_mae: Vec<f64>,
    pub normalized_mae: Vec<f64>,
}

impl SkillReport {
    /// `lead,mae_cm,normalized_mae`
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut buf = String::from("lead,mae_cm,normalized_mae\n");
        for (i, (m, n)) in self.per_horizon_mae.iter().zip(&self.normalized_mae).enumerate() {
            buf.push_str(&format!("{},{},{}\n", i + 1, m, n));
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub reports: Vec<SkillReport>,
    pub mean_depth: f64,
    pub seasons: Vec<i32>,
    /// Seasons left out, with the reason.
    pub skipped: Vec<(i32, String)>,
}

/// The data a fold trains on: everything outside the held-out July-June
/// season.
pub fn training_data(data: &Dataset, season: i32) -> Dataset {
    data.masked(|r| season_year(r.date) == season)
}

struct Slot {
    label: String,
    model: LongTermModel,
    delta: usize,
    sums: Vec<f64>,
    n: usize,
}

struct FoldModels {
    short: Option<crate::short_term::ShortTermParams>,
    temp: Option<crate::weather::TempParams>,
    precip: Option<crate::weather::PrecipParams>,
    direct: Option<DirectParams>,
    baseline: Option<DirectParams>,
}

fn fit_fold(train: &Dataset, cfg: &CrossValidationConfig) -> Result<FoldModels> {
    let needs_short = cfg.deltas.iter().any(|&d| d > 0) || cfg.models.contains(&LongTermModel::Model1);
    let needs_direct = cfg.models.contains(&LongTermModel::Model2) && cfg.deltas.iter().any(|&d| d < cfg.horizon);
    let needs_weather = cfg.models.contains(&LongTermModel::Model1) && cfg.deltas.iter().any(|&d| d < cfg.horizon);
    let o = &cfg.orders;
    Ok(FoldModels {
        short: needs_short.then(|| fit_short_term(train, &cfg.fit)).transpose()?.map(|f| f.params),
        temp: needs_weather
            .then(|| fit_temperature(train, o.temperature, &cfg.fit))
            .transpose()?
            .map(|f| f.params),
        precip: needs_weather
            .then(|| fit_precipitation(train, o.precipitation, &cfg.fit))
            .transpose()?
            .map(|f| f.params),
        direct: needs_direct.then(|| fit_direct(train, o.direct, &cfg.fit)).transpose()?.map(|f| f.params),
        baseline: cfg
            .baseline
            .then(|| fit_direct(train, [o.direct[0], 0, 0], &cfg.fit))
            .transpose()?
            .map(|f| f.params),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// History handed to each forecast: enough for the longest supported lag.
const HISTORY_DAYS: usize = 65;

/// Leave-one-season-out evaluation. Every forecast issued on a day of
/// `cfg.months` in the held-out season uses observed weather for its first
/// `delta` days; forecasts reaching a day without an observed depth (or
/// without observed weather within `delta`) are dropped.
pub fn cross_validate(data: &Dataset, cfg: &CrossValidationConfig) -> Result<CrossValidation> {
    cfg.validate()?;
    let recs = data.records();
    let in_months = |i: usize| cfg.months.contains(&recs[i].date.month());
    let mut seasons: Vec<i32> = recs.iter().map(|r| season_year(r.date)).collect();
    seasons.dedup();
    if seasons.len() < 3 {
        return domain(format!("cross-validation needs at least 3 seasons, got {}", seasons.len()));
    }
    let mean_depth = data
        .mean_of(Field::SnowDepth, |r| cfg.months.contains(&r.date.month()))
        .ok_or_else(|| Error::Domain("no snow depth observed in the evaluation months".into()))?;

    let h = cfg.horizon;
    let mut slots = Vec::new();
    for &model in &cfg.models {
        for &delta in &cfg.deltas {
            slots.push(Slot {
                label: format!("{model}_delta{delta}"),
                model,
                delta,
                sums: vec![0.0; h],
                n: 0,
            });
        }
    }
    if cfg.baseline {
        slots.push(Slot {
            label: "baseline".into(),
            model: LongTermModel::Model2,
            delta: 0,
            sums: vec![0.0; h],
            n: 0,
        });
    }

    let mut used = Vec::new();
    let mut skipped = Vec::new();
    for &season in &seasons {
        let issue_days: Vec<usize> = (1..recs.len())
            .filter(|&i| season_year(recs[i].date) == season && in_months(i) && recs[i].snow_depth.is_some())
            .collect();
        if issue_days.is_empty() {
            warn!("season {season}/{}: no winter observations, skipped", season + 1);
            skipped.push((season, "no observations in the evaluation months".to_string()));
            continue;
        }
        let train = training_data(data, season);
        let models = match fit_fold(&train, cfg) {
            Ok(m) => m,
            Err(Error::NoUsableTransitions) | Err(Error::TooShort(_)) => {
                warn!("season {season}/{}: nothing left to train on, skipped", season + 1);
                skipped.push((season, "no usable training data".to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        info!("season {season}/{}: {} issue days", season + 1, issue_days.len());
        used.push(season);

        for &i in &issue_days {
            if i + h >= recs.len() {
                continue;
            }
            let observed: Option<Vec<f64>> = (1..=h).map(|d| recs[i + d].snow_depth).collect();
            let Some(observed) = observed else { continue };
            let history = recs[i + 1 - (i + 1).min(HISTORY_DAYS)..=i].to_vec();
            let seed = splitmix64(cfg.seed ^ splitmix64(i as u64));
            for slot in slots.iter_mut() {
                let weather: Option<Vec<(f64, f64)>> = (1..=slot.delta)
                    .map(|d| Some((recs[i + d].temperature?, recs[i + d].precipitation?)))
                    .collect();
                let Some(weather) = weather else { continue };
                let fm = if slot.label == "baseline" {
                    ForecastModels {
                        direct: models.baseline.as_ref(),
                        ..ForecastModels::default()
                    }
                } else {
                    ForecastModels {
                        short_term: models.short.as_ref(),
                        temperature: models.temp.as_ref(),
                        precipitation: models.precip.as_ref(),
                        direct: models.direct.as_ref(),
                    }
                };
                let req = ForecastRequest {
                    history: history.clone(),
                    weather_forecast: weather,
                    horizon: h,
                    n_paths: cfg.n_paths,
                    seed,
                    long_term: slot.model,
                };
                let ens = match forecast(&fm, &req) {
                    Ok(e) => e,
                    Err(Error::InsufficientHistory(_)) => continue,
                    Err(e) => return Err(e),
                };
                for (d, obs) in observed.iter().enumerate() {
                    slot.sums[d] += (ens.mean(d + 1) - obs).abs();
                }
                slot.n += 1;
            }
        }
    }

    let mut reports = Vec::with_capacity(slots.len());
    for s in slots {
        if s.n == 0 {
            return domain(format!("no usable forecasts for {}", s.label));
        }
        let per_horizon_mae: Vec<f64> = s.sums.iter().map(|v| v / s.n as f64).collect();
        let normalized_mae = per_horizon_mae.iter().map(|m| m / mean_depth).collect();
        reports.push(SkillReport {
            label: s.label,
            model: s.model,
            delta: s.delta,
            horizon: h,
            months: cfg.months.clone(),
            n_forecasts: s.n,
            mean_depth,
            per_horizon_mae,
            normalized_mae,
        });
    }
    Ok(CrossValidation {
        reports,
        mean_depth,
        seasons: used,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::short_term::presets;
    use crate::zig::GammaSpec;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 10.0], &[5.0, 5.0]).unwrap(), 5.0);
        assert_eq!(
            mae(&[3.0, 0.0, 7.0], &[1.0, 2.0, 2.0]).unwrap(),
            mae(&[7.0, 3.0, 0.0], &[2.0, 1.0, 2.0]).unwrap()
        );
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn ks_of_perfect_grid_is_small() {
        let n = 1000;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_uniform(&v) - 0.5 / n as f64).abs() < 1e-12);
        let bad = vec![0.5; 100];
        assert!((ks_uniform(&bad) - 0.5).abs() < 1e-12);
        // tabulated two-sided 1% value for large n
        assert!((ks_critical_value(10_000, 0.01) * 100.0 - 1.6276).abs() < 2e-3);
    }

    #[test]
    fn zero_observation_randomized_within_atom() {
        let spec = ZeroInflatedSpec::new(0.3, GammaSpec::new(2.0, 1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..10_000).map(|_| zig_pit(&spec, 0.0, true, &mut rng).unwrap()).collect();
        assert!(v.iter().all(|&u| (0.0..=0.3).contains(&u)));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.15).abs() < 0.005);
        assert_eq!(zig_pit(&spec, 0.0, false, &mut rng).unwrap(), 0.3);
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(zig_pit(&spec, 0.0, true, &mut a).unwrap(), zig_pit(&spec, 0.0, true, &mut b).unwrap());
    }

    #[test]
    fn histogram_counts_sum_to_n() {
        let r = PitReport::from_values(vec![0.0, 0.05, 0.5, 0.999, 1.0], 20).unwrap();
        assert_eq!(r.histogram.iter().sum::<usize>(), 5);
        assert_eq!(r.histogram[19], 2);
        assert!(PitReport::from_values(vec![], 20).is_err());
    }

    #[test]
    fn misspecified_data_fails_ks() {
        // depth frozen at 30 cm through a warm, wet spell
        let start = chrono::NaiveDate::from_ymd_opt(2000, 12, 1).unwrap();
        let recs = (0..600)
            .map(|i| {
                crate::data::DailyRecord::new(start + chrono::Duration::days(i), Some(6.0), Some(8.0), Some(30.0))
                    .unwrap()
            })
            .collect();
        let data = Dataset::new("x", recs).unwrap();
        let r = pit_series(&ModelParams::ShortTerm(presets::oslo()), &data, &ALL_MONTHS, true, 1).unwrap();
        assert!(!r.passes_ks(0.01));
        assert!(r.values.iter().all(|u| (0.0..=1.0).contains(u)));
    }

    #[test]
    fn training_data_excludes_held_out_season() {
        let start = chrono::NaiveDate::from_ymd_opt(2000, 6, 1).unwrap();
        let recs = (0..800)
            .map(|i| {
                crate::data::DailyRecord::new(start + chrono::Duration::days(i), Some(1.0), Some(0.0), Some(0.0))
                    .unwrap()
            })
            .collect();
        let data = Dataset::new("x", recs).unwrap();
        let train = training_data(&data, 2000);
        for r in train.records() {
            if season_year(r.date) == 2000 {
                assert!(r.temperature.is_none() && r.precipitation.is_none() && r.snow_depth.is_none());
            } else {
                assert!(r.snow_depth.is_some());
            }
        }
    }
}
