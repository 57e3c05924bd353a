//! Daily station records, calendar helpers and CSV ingestion.
//!
//! A [`Dataset`] is a gap-free daily series: days without a row in the input
//! file are present as records whose fields are all missing. Models never
//! impute; they work on the [`contiguous_windows`] of the fields they need.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Header line of the station CSV format.
pub const CSV_HEADER: [&str; 4] = ["date", "temp_c", "precip_mm", "snow_cm"];

/// One day of observations. Any field may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Daily mean air temperature, °C.
    pub temperature: Option<f64>,
    /// Precipitation over the last 24 h, mm.
    pub precipitation: Option<f64>,
    /// Snow depth, cm. Exactly 0.0 means bare ground.
    pub snow_depth: Option<f64>,
}

impl DailyRecord {
    pub fn missing(date: NaiveDate) -> Self {
        Self {
            date,
            temperature: None,
            precipitation: None,
            snow_depth: None,
        }
    }

    pub fn new(
        date: NaiveDate,
        temperature: Option<f64>,
        precipitation: Option<f64>,
        snow_depth: Option<f64>,
    ) -> Result<Self> {
        check_nonnegative("precipitation", precipitation)?;
        check_nonnegative("snow depth", snow_depth)?;
        for (name, v) in [
            ("temperature", temperature),
            ("precipitation", precipitation),
            ("snow depth", snow_depth),
        ] {
            if matches!(v, Some(x) if !x.is_finite()) {
                return domain(format!("{name} must be finite"));
            }
        }
        Ok(Self {
            date,
            temperature,
            precipitation,
            snow_depth,
        })
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::Temperature => self.temperature,
            Field::Precipitation => self.precipitation,
            Field::SnowDepth => self.snow_depth,
        }
    }

    pub fn has_all(&self, fields: &[Field]) -> bool {
        fields.iter().all(|&f| self.get(f).is_some())
    }
}

fn check_nonnegative(name: &str, value: Option<f64>) -> Result<()> {
    match value {
        Some(v) if v < 0.0 => domain(format!("{name} must be nonnegative, got {v}")),
        _ => Ok(()),
    }
}

/// The observed quantities of a [`DailyRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Temperature,
    Precipitation,
    SnowDepth,
}

/// Ordinal day of the calendar year, 1..=366.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeasonDay(u16);

impl SeasonDay {
    pub fn new(value: u16) -> Result<Self> {
        if (1..=366).contains(&value) {
            Ok(Self(value))
        } else {
            domain(format!("season day must be in 1..=366, got {value}"))
        }
    }

    pub fn value(self) -> u16 {
        self.0
    }
}

/// Day of the year for `date`: Jan 1 is 1, Dec 31 is 365 or 366.
pub fn season_day(date: NaiveDate) -> SeasonDay {
    SeasonDay(date.ordinal() as u16)
}

/// A gap-free daily series for one station.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    station_label: String,
    records: Vec<DailyRecord>,
}

impl Dataset {
    /// Builds a dataset from records with strictly increasing dates; gaps
    /// between dates are filled with all-missing records.
    pub fn new(station_label: impl Into<String>, records: Vec<DailyRecord>) -> Result<Self> {
        let mut filled: Vec<DailyRecord> = Vec::with_capacity(records.len());
        for rec in records {
            if let Some(last) = filled.last() {
                if rec.date <= last.date {
                    return domain(format!(
                        "dates must be strictly increasing: {} follows {}",
                        rec.date, last.date
                    ));
                }
                let mut d = last.date + Duration::days(1);
                while d < rec.date {
                    filled.push(DailyRecord::missing(d));
                    d += Duration::days(1);
                }
            }
            filled.push(rec);
        }
        if filled.len() < 2 {
            return Err(Error::TooShort(filled.len()));
        }
        Ok(Self {
            station_label: station_label.into(),
            records: filled,
        })
    }

    pub fn station_label(&self) -> &str {
        &self.station_label
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.records[0].date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.records[self.records.len() - 1].date
    }

    /// Index of `date`, if it lies inside the series.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date()).num_days();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    /// Copy of the dataset where every record accepted by `hide` has all of
    /// its fields set to missing. Dates are kept so the series stays daily.
    pub fn masked(&self, mut hide: impl FnMut(&DailyRecord) -> bool) -> Dataset {
        let records = self
            .records
            .iter()
            .map(|r| if hide(r) { DailyRecord::missing(r.date) } else { *r })
            .collect();
        Dataset {
            station_label: self.station_label.clone(),
            records,
        }
    }

    /// Reads the station CSV format from any reader.
    pub fn from_reader(station_label: impl Into<String>, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::TooShort(0));
        }
        let found: Vec<&str> = headers.iter().collect();
        if found != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `{}`, found `{}`",
                    CSV_HEADER.join(","),
                    found.join(",")
                ),
            });
        }

        let mut records = Vec::new();
        let mut last_date: Option<NaiveDate> = None;
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let parse_err = |message: String| Error::Parse { line, message };
            if row.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, found {}", row.len())));
            }
            let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
                .map_err(|e| parse_err(format!("malformed date `{}`: {e}", &row[0])))?;
            if let Some(prev) = last_date {
                if date <= prev {
                    return Err(parse_err(format!("date {date} does not follow {prev}")));
                }
            }
            last_date = Some(date);
            let temperature = parse_field(&row[1], "temp_c").map_err(&parse_err)?;
            let precipitation = parse_field(&row[2], "precip_mm").map_err(&parse_err)?;
            let snow_depth = parse_field(&row[3], "snow_cm").map_err(&parse_err)?;
            let rec = DailyRecord::new(date, temperature, precipitation, snow_depth)
                .map_err(|e| parse_err(e.to_string()))?;
            records.push(rec);
        }
        Dataset::new(station_label, records)
    }

    /// Writes the station CSV format. Values are printed with the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_writer(&self, mut writer: impl Write) -> Result<()> {
        let mut buf = String::with_capacity(32 * (self.len() + 1));
        buf.push_str(&CSV_HEADER.join(","));
        buf.push('\n');
        for r in &self.records {
            let _ = write!(buf, "{}", r.date.format("%Y-%m-%d"));
            for v in [r.temperature, r.precipitation, r.snow_depth] {
                buf.push(',');
                if let Some(v) = v {
                    let _ = write!(buf, "{v}");
                }
            }
            buf.push('\n');
        }
        writer.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_writer(std::io::BufWriter::new(file))
    }

    /// Mean of the present values of `field` over the records accepted by `keep`.
    pub fn mean_of(&self, field: Field, mut keep: impl FnMut(&DailyRecord) -> bool) -> Option<f64> {
        let (sum, n) = self
            .records
            .iter()
            .filter(|r| keep(r))
            .filter_map(|r| r.get(field))
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

fn parse_field(raw: &str, name: &str) -> std::result::Result<Option<f64>, String> {
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("{name}: `{raw}` is not a number")),
    }
}

/// Loads a station CSV; the station label is the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path)?;
    Dataset::from_reader(label, std::io::BufReader::new(file))
}

/// Reads a weather forecast: the station CSV format (or its first three
/// columns), one row per consecutive day, temperature and precipitation
/// required. Returns `(date, temp_c, precip_mm)` rows.
pub fn read_weather_forecast(reader: impl Read) -> Result<Vec<(NaiveDate, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != CSV_HEADER && found != CSV_HEADER[..3] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", CSV_HEADER[..3].join(","), found.join(",")),
        });
    }
    let mut out: Vec<(NaiveDate, f64, f64)> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        if row.len() != found.len() {
            return Err(parse_err(format!("expected {} fields, found {}", found.len(), row.len())));
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("malformed date `{}`: {e}", &row[0])))?;
        if let Some(&(prev, _, _)) = out.last() {
            if date != prev + Duration::days(1) {
                return Err(parse_err(format!("date {date} does not follow {prev} by one day")));
            }
        }
        let temp = parse_field(&row[1], "temp_c").map_err(&parse_err)?;
        let precip = parse_field(&row[2], "precip_mm").map_err(&parse_err)?;
        match (temp, precip) {
            (Some(t), Some(r)) if r >= 0.0 => out.push((date, t, r)),
            (Some(_), Some(r)) => return Err(parse_err(format!("precip_mm: {r} is negative"))),
            _ => return Err(parse_err("weather forecast needs temp_c and precip_mm on every day".into())),
        }
    }
    Ok(out)
}

/// Maximal runs of consecutive days on which every field in `required` is
/// present. Runs too short to contribute a term with `min_lag` lags (length
/// ≤ `min_lag`) are left out.
pub fn contiguous_windows(data: &Dataset, required: &[Field], min_lag: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let recs = data.records();
    for (i, r) in recs.iter().enumerate() {
        match (r.has_all(required), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s > min_lag {
                    out.push(s..i);
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if recs.len() - s > min_lag {
            out.push(s..recs.len());
        }
    }
    out
}

/// The July-to-June season a date belongs to, named by the year it starts in.
pub fn season_year(date: NaiveDate) -> i32 {
    if date.month() >= 7 {
        date.year()
    } else {
        date.year() - 1
    }
}
