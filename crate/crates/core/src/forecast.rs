//! Monte Carlo snow-depth forecasts.
//!
//! For the first `delta` days the short-term model is driven by supplied
//! weather. After that the depth continues either with the direct model
//! (`model2`) or with simulated weather feeding the short-term model
//! (`model1`). Every path draws from its own ChaCha8 stream (master seed,
//! stream = path index), so path `i` is the same whatever `n_paths` is.

use std::fmt::Write as _;
use std::io::Write;

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{season_day, DailyRecord};
use crate::direct::{DirectHistory, DirectParams};
use crate::error::{domain, Error, Result};
use crate::short_term::{DayInputs, ShortTermParams};
use crate::weather::{PrecipParams, TempParams};

pub const DEFAULT_PATHS: usize = 1000;

/// Model used after the supplied weather runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LongTermModel {
    Model1,
    Model2,
    None,
}

impl LongTermModel {
    pub fn name(self) -> &'static str {
        match self {
            LongTermModel::Model1 => "model1",
            LongTermModel::Model2 => "model2",
            LongTermModel::None => "none",
        }
    }
}

impl std::fmt::Display for LongTermModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LongTermModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model1" => Ok(LongTermModel::Model1),
            "model2" => Ok(LongTermModel::Model2),
            "none" => Ok(LongTermModel::None),
            other => domain(format!("unknown long-term model `{other}` (expected model1, model2 or none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRequest {
    /// Observed days up to and including the issue day, oldest first.
    pub history: Vec<DailyRecord>,
    /// (temperature °C, precipitation mm) for days 1..=delta.
    pub weather_forecast: Vec<(f64, f64)>,
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub long_term: LongTermModel,
}

impl ForecastRequest {
    pub fn delta(&self) -> usize {
        self.weather_forecast.len()
    }

    pub fn issue_date(&self) -> Result<NaiveDate> {
        match self.history.last() {
            Some(r) => Ok(r.date),
            None => Err(Error::InsufficientHistory("forecast needs at least one day of history".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return domain("horizon must be at least 1");
        }
        if self.n_paths == 0 {
            return domain("n_paths must be at least 1");
        }
        if self.delta() > self.horizon {
            return domain(format!(
                "delta ({}) cannot exceed the horizon ({})",
                self.delta(),
                self.horizon
            ));
        }
        if self.delta() < self.horizon && self.long_term == LongTermModel::None {
            return domain("a long-term model is required when delta < horizon");
        }
        for (i, &(t, r)) in self.weather_forecast.iter().enumerate() {
            if !t.is_finite() || !(r >= 0.0 && r.is_finite()) {
                return domain(format!("invalid weather forecast on day {}: ({t}, {r})", i + 1));
            }
        }
        let dates_ok = self
            .history
            .windows(2)
            .all(|w| w[1].date == w[0].date + Duration::days(1));
        if !dates_ok {
            return domain("forecast history must be consecutive days");
        }
        self.issue_date()?;
        Ok(())
    }

    /// Last `n` values of a history field, oldest first; `None` if the
    /// history is shorter or any of them is missing.
    fn tail(&self, n: usize, get: impl Fn(&DailyRecord) -> Option<f64>) -> Option<Vec<f64>> {
        if self.history.len() < n {
            return None;
        }
        self.history[self.history.len() - n..].iter().map(get).collect()
    }

    fn current_depth(&self) -> Result<f64> {
        self.history
            .last()
            .and_then(|r| r.snow_depth)
            .ok_or_else(|| Error::InsufficientHistory("snow depth on the issue day is missing".into()))
    }
}

/// Simulated paths, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastEnsemble {
    pub issue_date: NaiveDate,
    pub horizon: usize,
    pub delta: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub long_term: LongTermModel,
    depths: Vec<f64>,
    temps: Vec<Option<f64>>,
    precips: Vec<Option<f64>>,
}

impl ForecastEnsemble {
    fn new(req: &ForecastRequest) -> Result<Self> {
        let n = req.n_paths * req.horizon;
        Ok(Self {
            issue_date: req.issue_date()?,
            horizon: req.horizon,
            delta: req.delta(),
            n_paths: req.n_paths,
            seed: req.seed,
            long_term: req.long_term,
            depths: vec![0.0; n],
            temps: vec![None; n],
            precips: vec![None; n],
        })
    }

    /// Date of lead day `day` (1-based).
    pub fn date(&self, day: usize) -> NaiveDate {
        self.issue_date + Duration::days(day as i64)
    }

    /// Depth on lead day `day` (1-based) of `path`.
    pub fn depth(&self, path: usize, day: usize) -> f64 {
        self.depths[path * self.horizon + day - 1]
    }

    pub fn temp(&self, path: usize, day: usize) -> Option<f64> {
        self.temps[path * self.horizon + day - 1]
    }

    pub fn precip(&self, path: usize, day: usize) -> Option<f64> {
        self.precips[path * self.horizon + day - 1]
    }

    /// Depths of one path, lead days 1..=horizon.
    pub fn path(&self, path: usize) -> &[f64] {
        &self.depths[path * self.horizon..(path + 1) * self.horizon]
    }

    /// Depths of every path on lead day `day`.
    pub fn day_values(&self, day: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.depth(p, day)).collect()
    }

    pub fn mean(&self, day: usize) -> f64 {
        (0..self.n_paths).map(|p| self.depth(p, day)).sum::<f64>() / self.n_paths as f64
    }

    fn header_line(&self) -> String {
        format!(
            "# seed={} model={} delta={} horizon={} n_paths={} issue_date={}",
            self.seed, self.long_term, self.delta, self.horizon, self.n_paths, self.issue_date
        )
    }

    /// Long format: `path,day,date,temp,precip,depth`, one row per path and
    /// lead day; weather not simulated is left empty.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "{}", self.header_line()).unwrap();
        buf.push_str("path,day,date,temp,precip,depth\n");
        out.write_all(buf.as_bytes())?;
        for p in 0..self.n_paths {
            buf.clear();
            for d in 1..=self.horizon {
                writeln!(
                    buf,
                    "{},{},{},{},{},{}",
                    p + 1,
                    d,
                    self.date(d),
                    opt(self.temp(p, d)),
                    opt(self.precip(p, d)),
                    self.depth(p, d)
                )
                .unwrap();
            }
            out.write_all(buf.as_bytes())?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Days 1..=delta of one path with the supplied weather; returns the last depth.
fn run_short(
    short: &ShortTermParams,
    req: &ForecastRequest,
    ens: &mut ForecastEnsemble,
    path: usize,
    d0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut depth = d0;
    for (i, &(t, r)) in req.weather_forecast.iter().enumerate() {
        depth = short.sample_next(&DayInputs::new(t, r, depth)?, rng);
        let k = path * ens.horizon + i;
        ens.depths[k] = depth;
        ens.temps[k] = Some(t);
        ens.precips[k] = Some(r);
    }
    Ok(depth)
}

/// Tracks the depth with supplied weather for the whole horizon.
pub fn forecast_short(short: &ShortTermParams, req: &ForecastRequest) -> Result<ForecastEnsemble> {
    req.validate()?;
    short.validate()?;
    if req.delta() != req.horizon {
        return domain("short-term forecasts need weather for every day of the horizon");
    }
    let d0 = req.current_depth()?;
    let mut ens = ForecastEnsemble::new(req)?;
    for path in 0..req.n_paths {
        let mut rng = path_rng(req.seed, path);
        run_short(short, req, &mut ens, path, d0, &mut rng)?;
    }
    Ok(ens)
}

/// Supplied weather for `delta` days, then the direct model. `short` may be
/// omitted when `delta` is 0.
pub fn forecast_long_model2(
    short: Option<&ShortTermParams>,
    direct: &DirectParams,
    req: &ForecastRequest,
) -> Result<ForecastEnsemble> {
    req.validate()?;
    direct.validate()?;
    if req.delta() >= req.horizon {
        return domain("model2 continuation needs delta < horizon");
    }
    let delta = req.delta();
    let short = match (short, delta) {
        (Some(s), _) => {
            s.validate()?;
            Some(s)
        }
        (None, 0) => None,
        (None, _) => return domain("short_term parameters are required when delta > 0"),
    };
    let lags = direct.max_lag();
    let needed = lags.saturating_sub(delta).max(usize::from(delta > 0));
    let observed = req.tail(needed, |r| r.snow_depth).ok_or_else(|| {
        Error::InsufficientHistory(format!("model2 needs the last {needed} observed snow depths"))
    })?;
    let d0 = if delta > 0 { req.current_depth()? } else { 0.0 };

    let mut ens = ForecastEnsemble::new(req)?;
    let mut chronological = Vec::with_capacity(needed + delta);
    for path in 0..req.n_paths {
        let mut rng = path_rng(req.seed, path);
        if let Some(s) = short {
            run_short(s, req, &mut ens, path, d0, &mut rng)?;
        }
        chronological.clear();
        chronological.extend_from_slice(&observed);
        chronological.extend_from_slice(&ens.path(path)[..delta]);
        let mut hist = DirectHistory::new(&chronological, lags)?;
        for day in delta + 1..=req.horizon {
            let s = season_day(ens.date(day));
            ens.depths[path * ens.horizon + day - 1] = hist.step(direct, s, &mut rng);
        }
    }
    Ok(ens)
}

/// Supplied weather for `delta` days, then simulated temperature and
/// precipitation driving the short-term model.
pub fn forecast_long_model1(
    short: &ShortTermParams,
    temp: &TempParams,
    precip: &PrecipParams,
    req: &ForecastRequest,
) -> Result<ForecastEnsemble> {
    req.validate()?;
    short.validate()?;
    temp.validate()?;
    precip.validate()?;
    if req.delta() >= req.horizon {
        return domain("model1 continuation needs delta < horizon");
    }
    let delta = req.delta();
    let d0 = req.current_depth()?;
    let p = temp.ar.len();
    let q = precip.max_lag();

    // weather lags at the end of the supplied period, most recent first
    let issue = req.issue_date()?;
    let mut temp_lags: Vec<(NaiveDate, f64)> = req
        .weather_forecast
        .iter()
        .enumerate()
        .rev()
        .map(|(i, &(t, _))| (issue + Duration::days(i as i64 + 1), t))
        .take(p)
        .collect();
    let mut precip_lags: Vec<f64> = req.weather_forecast.iter().rev().map(|&(_, r)| r).take(q).collect();
    if temp_lags.len() < p {
        let need = p - temp_lags.len();
        let tail = req.tail(need, |r| r.temperature).ok_or_else(|| {
            Error::InsufficientHistory(format!("model1 needs the last {need} observed temperatures"))
        })?;
        let start = issue - Duration::days(need as i64 - 1);
        for (i, t) in tail.iter().enumerate().rev() {
            temp_lags.push((start + Duration::days(i as i64), *t));
        }
    }
    if precip_lags.len() < q {
        let need = q - precip_lags.len();
        let tail = req.tail(need, |r| r.precipitation).ok_or_else(|| {
            Error::InsufficientHistory(format!("model1 needs the last {need} observed precipitation values"))
        })?;
        precip_lags.extend(tail.iter().rev());
    }
    let anomalies0: Vec<f64> = temp_lags
        .iter()
        .map(|&(d, t)| t - temp.trend.eval(season_day(d)))
        .collect();
    let occ0: Vec<u8> = precip_lags.iter().map(|&r| u8::from(r > 0.0)).collect();

    let mut ens = ForecastEnsemble::new(req)?;
    for path in 0..req.n_paths {
        let mut rng = path_rng(req.seed, path);
        let mut depth = run_short(short, req, &mut ens, path, d0, &mut rng)?;
        let mut anomalies = anomalies0.clone();
        let mut occ = occ0.clone();
        for day in delta + 1..=req.horizon {
            let s = season_day(ens.date(day));
            let (t, a) = temp.step(s, &anomalies, &mut rng);
            if p > 0 {
                anomalies.pop();
                anomalies.insert(0, a);
            }
            let (r, wet) = precip.simulate(s, &occ, t, &mut rng);
            if q > 0 {
                occ.pop();
                occ.insert(0, wet);
            }
            depth = short.sample_next(&DayInputs::new(t, r, depth)?, &mut rng);
            let k = path * ens.horizon + day - 1;
            ens.depths[k] = depth;
            ens.temps[k] = Some(t);
            ens.precips[k] = Some(r);
        }
    }
    Ok(ens)
}

/// The parameter sets a forecast may draw on.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForecastModels<'a> {
    pub short_term: Option<&'a ShortTermParams>,
    pub temperature: Option<&'a TempParams>,
    pub precipitation: Option<&'a PrecipParams>,
    pub direct: Option<&'a DirectParams>,
}

fn require<'a, T>(p: Option<&'a T>, name: &str) -> Result<&'a T> {
    p.ok_or_else(|| Error::Domain(format!("missing {name} parameters")))
}

/// Dispatches on the request: short-term only when `delta == horizon`,
/// otherwise the requested long-term model.
pub fn forecast(models: &ForecastModels<'_>, req: &ForecastRequest) -> Result<ForecastEnsemble> {
    req.validate()?;
    if req.delta() == req.horizon {
        return forecast_short(require(models.short_term, "short_term")?, req);
    }
    match req.long_term {
        LongTermModel::Model2 => {
            let short = if req.delta() > 0 {
                Some(require(models.short_term, "short_term")?)
            } else {
                models.short_term
            };
            forecast_long_model2(short, require(models.direct, "direct")?, req)
        }
        LongTermModel::Model1 => forecast_long_model1(
            require(models.short_term, "short_term")?,
            require(models.temperature, "temperature")?,
            require(models.precipitation, "precipitation")?,
            req,
        ),
        LongTermModel::None => domain("a long-term model is required when delta < horizon"),
    }
}

/// Per-day mean and empirical quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub issue_date: NaiveDate,
    pub seed: u64,
    pub probabilities: Vec<f64>,
    pub mean: Vec<f64>,
    /// `quantiles[day][j]` for `probabilities[j]`.
    pub quantiles: Vec<Vec<f64>>,
}

/// Quantile of sorted data, linear interpolation between order statistics
/// (`h = (n-1)p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(ens: &ForecastEnsemble, probabilities: &[f64]) -> Result<Summary> {
    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return domain("quantile probabilities must lie in [0, 1]");
    }
    if !probabilities.is_empty() && ens.n_paths < 2 {
        return domain("quantiles need at least 2 paths");
    }
    let mut mean = Vec::with_capacity(ens.horizon);
    let mut quantiles = Vec::with_capacity(ens.horizon);
    for day in 1..=ens.horizon {
        let mut v = ens.day_values(day);
        mean.push(v.iter().sum::<f64>() / v.len() as f64);
        v.sort_by(f64::total_cmp);
        quantiles.push(probabilities.iter().map(|&p| quantile_sorted(&v, p)).collect());
    }
    Ok(Summary {
        issue_date: ens.issue_date,
        seed: ens.seed,
        probabilities: probabilities.to_vec(),
        mean,
        quantiles,
    })
}

/// Column label for a probability: 0.05 → `q05`, 0.5 → `q50`, 0.025 → `q2.5`.
pub fn quantile_label(p: f64) -> String {
    let pct = p * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{:02}", pct.round() as u32)
    } else {
        format!("q{}", (pct * 1e6).round() / 1e6)
    }
}

impl Summary {
    /// `day,date,mean,q..` with a seed comment line.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "# seed={} issue_date={}", self.seed, self.issue_date).unwrap();
        buf.push_str("day,date,mean");
        for &p in &self.probabilities {
            buf.push(',');
            buf.push_str(&quantile_label(p));
        }
        buf.push('\n');
        for (i, m) in self.mean.iter().enumerate() {
            let date = self.issue_date + Duration::days(i as i64 + 1);
            write!(buf, "{},{},{}", i + 1, date, m).unwrap();
            for q in &self.quantiles[i] {
                write!(buf, ",{q}").unwrap();
            }
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }
}
