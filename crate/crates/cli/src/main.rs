//! `snowcast`: fit, forecast, check and evaluate snow-depth models from
//! station CSV files.

mod manifest;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snowcast::estimation::{fit_family, stepwise_select, FitConfig};
use snowcast::evaluation::{cross_validate, pit_series, ks_critical_value, CrossValidationConfig, EvalOrders, ALL_MONTHS, WINTER_MONTHS};
use snowcast::forecast::{forecast, summarize, ForecastModels, ForecastRequest, LongTermModel, DEFAULT_PATHS};
use snowcast::synthetic::{presets, simulate_dataset, WeatherModel};
use snowcast::{load_csv, read_weather_forecast, Dataset, Family, ModelParams, ParamFile};

use manifest::{sibling_path, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "snowcast", version, about = "Snow-depth models for daily station data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model family by maximum likelihood.
    Fit(FitCmd),
    /// Monte Carlo snow-depth forecast from the end of a data file.
    Forecast(ForecastCmd),
    /// Probability integral transform of one-step predictions.
    Gof(GofCmd),
    /// Leave-one-season-out forecast skill.
    Evaluate(EvaluateCmd),
    /// Simulate weather and snow depth into a station CSV.
    Simulate(SimulateCmd),
    /// Repeat the run recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
struct FitFlags {
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    gradient_step: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    convergence_tol: Option<f64>,
    #[arg(long)]
    backtrack_factor: Option<f64>,
}

impl FitFlags {
    fn config(&self) -> FitConfig {
        let mut c = FitConfig::default();
        if let Some(v) = self.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = self.gradient_step {
            c.gradient_step = v;
        }
        if let Some(v) = self.learning_rate {
            c.initial_learning_rate = v;
        }
        if let Some(v) = self.convergence_tol {
            c.convergence_tol = v;
        }
        if let Some(v) = self.backtrack_factor {
            c.backtrack_factor = v;
        }
        c
    }
}

#[derive(Debug, Args)]
struct FitCmd {
    /// Station CSV (`date,temp_c,precip_mm,snow_cm`).
    data: PathBuf,
    /// short_term, temperature, precipitation or direct.
    #[arg(long)]
    family: Family,
    /// Comma-separated model orders. Defaults: temperature 2,3; precipitation
    /// 3,5,4,3,5,4; direct 3,5,0.
    #[arg(long, value_delimiter = ',', conflicts_with = "select")]
    orders: Option<Vec<usize>>,
    /// Choose orders by forward stepwise AIC.
    #[arg(long, requires = "max_orders")]
    select: bool,
    #[arg(long, value_delimiter = ',')]
    max_orders: Option<Vec<usize>>,
    /// Parameter file to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Station name recorded in the parameter file; the data file stem by default.
    #[arg(long)]
    station: Option<String>,
    #[command(flatten)]
    fit: FitFlags,
}

#[derive(Debug, Args)]
struct ForecastCmd {
    data: PathBuf,
    /// Parameter files; one per family needed.
    #[arg(long = "params", required = true)]
    params: Vec<PathBuf>,
    /// Last observed day; the last day of the data by default.
    #[arg(long)]
    issue_date: Option<NaiveDate>,
    /// Days with known weather. Defaults to the length of --weather-forecast, or 0.
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, default_value_t = 21)]
    horizon: usize,
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    paths: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "model2")]
    model: LongTermModel,
    /// Weather for the days after the issue day. Without it, observed weather
    /// from the data file is used for the first `delta` days.
    #[arg(long)]
    weather_forecast: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.5,0.95")]
    quantiles: Vec<f64>,
    /// Ensemble CSV (one row per path and day).
    #[arg(short, long)]
    output: PathBuf,
    /// Per-day mean and quantiles.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Debug, Args)]
struct GofCmd {
    data: PathBuf,
    #[arg(long = "params")]
    params: PathBuf,
    /// Months to score; Dec-Feb for snow models, all months for weather models.
    #[arg(long, value_delimiter = ',')]
    months: Option<Vec<u32>>,
    /// Use F(0) instead of a uniform draw below it for observed zeros.
    #[arg(long)]
    no_randomize: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// PIT values CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Histogram CSV.
    #[arg(long)]
    histogram: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateCmd {
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10")]
    deltas: Vec<usize>,
    #[arg(long, default_value_t = 21)]
    horizon: usize,
    #[arg(long, value_delimiter = ',', default_value = "model2")]
    models: Vec<LongTermModel>,
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    paths: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    months: Option<Vec<u32>>,
    /// m_T,p_T
    #[arg(long, value_delimiter = ',')]
    temperature_orders: Option<Vec<usize>>,
    /// m_R,q_R,s_R,m_R0,q_R0,s_R0
    #[arg(long, value_delimiter = ',')]
    precipitation_orders: Option<Vec<usize>>,
    /// m_D,q_D,s_D (default 3,5,0)
    #[arg(long, value_delimiter = ',')]
    direct_orders: Option<Vec<usize>>,
    /// Skip the periodic-only baseline.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    fit: FitFlags,
}

#[derive(Debug, Args)]
struct SimulateCmd {
    /// short_term, temperature and precipitation parameter files.
    #[arg(long = "params", conflicts_with = "preset")]
    params: Vec<PathBuf>,
    /// oslo, geilo or tromso: built-in weather and Oslo short-term values.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    days: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "2000-07-01")]
    start_date: NaiveDate,
    #[arg(long, default_value = "synthetic")]
    station: String,
    #[arg(short, long)]
    output: PathBuf,
}

/// A mistake in how the command was called (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(cli.command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for usage and input-data problems, 1 for I/O and anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<snowcast::Error>() {
            return match err {
                snowcast::Error::Io(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn run(command: Command, args: &[String]) -> Result<()> {
    match command {
        Command::Fit(c) => cmd_fit(c, args),
        Command::Forecast(c) => cmd_forecast(c, args),
        Command::Gof(c) => cmd_gof(c, args),
        Command::Evaluate(c) => cmd_evaluate(c, args),
        Command::Simulate(c) => cmd_simulate(c, args),
        Command::Replay { manifest } => {
            let m = RunManifest::load(&manifest)?;
            let argv = std::iter::once("snowcast".to_string()).chain(m.args.iter().cloned());
            let cli = Cli::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
            if matches!(cli.command, Command::Replay { .. }) {
                bail!(usage("a manifest cannot replay another replay"));
            }
            run(cli.command, &m.args)
        }
    }
}

/// The flag value, or a fresh seed from system entropy. The returned
/// arguments carry the seed explicitly.
fn resolve_seed(seed: Option<u64>, args: &[String]) -> (u64, &'static str, Vec<String>) {
    match seed {
        Some(s) => (s, "flag", args.to_vec()),
        None => {
            let s: u64 = rand::random();
            eprintln!("seed: {s}");
            let mut a = args.to_vec();
            a.push("--seed".into());
            a.push(s.to_string());
            (s, "entropy", a)
        }
    }
}

fn load_data(path: &Path) -> Result<Dataset> {
    load_csv(path).with_context(|| format!("loading {}", path.display()))
}

fn default_orders(family: Family) -> Vec<usize> {
    let o = EvalOrders::default();
    match family {
        Family::ShortTerm => vec![],
        Family::Temperature => vec![o.temperature.0, o.temperature.1],
        Family::Precipitation => o.precipitation.to_vec(),
        Family::Direct => o.direct.to_vec(),
    }
}

fn check_count(family: Family, what: &str, v: &[usize]) -> Result<()> {
    if v.len() != family.order_dims() {
        bail!(usage(format!(
            "{family} takes {} {what}, got {}",
            family.order_dims(),
            v.len()
        )));
    }
    Ok(())
}

fn cmd_fit(c: FitCmd, args: &[String]) -> Result<()> {
    let data = load_data(&c.data)?;
    let config = c.fit.config();
    config.validate().map_err(|e| usage(e.to_string()))?;
    let station = c.station.clone().unwrap_or_else(|| data.station_label().to_string());
    let (fit, selection) = if c.select {
        let max = c.max_orders.clone().unwrap_or_default();
        check_count(c.family, "maximum orders", &max)?;
        let sel = stepwise_select(&data, c.family, &max, &config)?;
        (sel.fit.clone(), Some(sel))
    } else {
        let orders = c.orders.clone().unwrap_or_else(|| default_orders(c.family));
        check_count(c.family, "orders", &orders)?;
        (fit_family(&data, c.family, &orders, &config)?, None)
    };

    let mut file = ParamFile::new(station, fit.params.clone());
    file.fit = Some(fit.summary());
    file.save(&c.output).with_context(|| format!("writing {}", c.output.display()))?;

    let orders = fit.params.orders();
    println!("family: {}", c.family);
    println!("orders: {}", join(&orders));
    println!("log_likelihood: {:.6}", fit.log_likelihood);
    println!("aic: {:.6}", fit.aic);
    println!("parameters: {}", fit.n_params);
    println!("iterations: {}", fit.iterations);
    println!("converged: {}", fit.converged);
    if let Some(sel) = &selection {
        println!("null_aic: {:.6}", sel.null_aic);
        println!("candidates: {}", sel.history.len());
    }
    for n in &fit.notes {
        println!("note: {n}");
    }

    let mut m = RunManifest::new("fit", args);
    m.inputs.push(c.data.clone());
    m.outputs.push(c.output.clone());
    m.config = serde_json::json!({
        "family": c.family,
        "orders": orders,
        "select": c.select,
        "max_orders": c.max_orders,
        "fit": config,
    });
    m.write(&sibling_path(&c.output))
}

fn load_params(paths: &[PathBuf]) -> Result<Vec<ModelParams>> {
    let mut out: Vec<ModelParams> = Vec::new();
    for p in paths {
        let f = ParamFile::load(p).with_context(|| format!("loading {}", p.display()))?;
        if out.iter().any(|q| q.family() == f.params.family()) {
            bail!(usage(format!("more than one {} parameter file", f.params.family())));
        }
        out.push(f.params);
    }
    Ok(out)
}

fn cmd_forecast(c: ForecastCmd, args: &[String]) -> Result<()> {
    let (seed, source, args) = resolve_seed(c.seed, args);
    let data = load_data(&c.data)?;
    let params = load_params(&c.params)?;
    let recs = data.records();
    let issue = c.issue_date.unwrap_or(data.end_date());
    let idx = data
        .index_of(issue)
        .ok_or_else(|| usage(format!("issue date {issue} is outside the data")))?;

    let supplied = match &c.weather_forecast {
        Some(p) => {
            let file = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let rows = read_weather_forecast(std::io::BufReader::new(file))
                .with_context(|| format!("reading {}", p.display()))?;
            if let Some(&(first, _, _)) = rows.first() {
                if first != issue + Duration::days(1) {
                    bail!(usage(format!("weather forecast starts {first}, expected {}", issue + Duration::days(1))));
                }
            }
            Some(rows)
        }
        None => None,
    };
    let delta = c.delta.unwrap_or(supplied.as_ref().map_or(0, |r| r.len().min(c.horizon)));
    if delta > c.horizon {
        bail!(usage(format!("--delta ({delta}) cannot exceed --horizon ({})", c.horizon)));
    }
    let weather: Vec<(f64, f64)> = match &supplied {
        Some(rows) => {
            if rows.len() < delta {
                bail!(usage(format!("weather forecast has {} days, --delta is {delta}", rows.len())));
            }
            rows[..delta].iter().map(|&(_, t, r)| (t, r)).collect()
        }
        None => (1..=delta)
            .map(|d| {
                let r = recs.get(idx + d)?;
                Some((r.temperature?, r.precipitation?))
            })
            .collect::<Option<_>>()
            .ok_or_else(|| usage(format!("no observed weather for the {delta} days after {issue}; pass --weather-forecast")))?,
    };

    let find = |f: Family| params.iter().find(|p| p.family() == f);
    let models = ForecastModels {
        short_term: match find(Family::ShortTerm) {
            Some(ModelParams::ShortTerm(p)) => Some(p),
            _ => None,
        },
        temperature: match find(Family::Temperature) {
            Some(ModelParams::Temperature(p)) => Some(p),
            _ => None,
        },
        precipitation: match find(Family::Precipitation) {
            Some(ModelParams::Precipitation(p)) => Some(p),
            _ => None,
        },
        direct: match find(Family::Direct) {
            Some(ModelParams::Direct(p)) => Some(p),
            _ => None,
        },
    };
    let req = ForecastRequest {
        history: recs[..=idx].to_vec(),
        weather_forecast: weather,
        horizon: c.horizon,
        n_paths: c.paths,
        seed,
        long_term: c.model,
    };
    let ens = forecast(&models, &req)?;
    let summary = summarize(&ens, &c.quantiles)?;
    write_with(&c.output, |w| ens.write_csv(w))?;
    write_with(&c.summary, |w| summary.write_csv(w))?;
    println!("issue_date: {issue}");
    println!("delta: {delta}");
    println!("horizon: {}", c.horizon);
    println!("day {} mean: {:.3}", c.horizon, summary.mean[c.horizon - 1]);

    let mut m = RunManifest::new("forecast", &args);
    m.inputs.push(c.data.clone());
    if let Some(p) = &c.weather_forecast {
        m.inputs.push(p.clone());
    }
    m.parameter_files = c.params.clone();
    m.outputs = vec![c.output.clone(), c.summary.clone()];
    m.seed = Some(seed);
    m.seed_source = Some(source.into());
    m.config = serde_json::json!({
        "issue_date": issue,
        "delta": delta,
        "horizon": c.horizon,
        "n_paths": c.paths,
        "model": c.model,
        "quantiles": c.quantiles,
    });
    m.write(&sibling_path(&c.output))
}

fn cmd_gof(c: GofCmd, args: &[String]) -> Result<()> {
    let (seed, source, args) = resolve_seed(c.seed, args);
    let data = load_data(&c.data)?;
    let file = ParamFile::load(&c.params).with_context(|| format!("loading {}", c.params.display()))?;
    let months = c.months.clone().unwrap_or_else(|| match file.params.family() {
        Family::ShortTerm | Family::Direct => WINTER_MONTHS.to_vec(),
        Family::Temperature | Family::Precipitation => ALL_MONTHS.to_vec(),
    });
    let report = pit_series(&file.params, &data, &months, !c.no_randomize, seed)?;
    write_with(&c.output, |w| report.write_values_csv(w))?;
    write_with(&c.histogram, |w| report.write_histogram_csv(w))?;
    println!("n: {}", report.n);
    println!("ks_statistic: {:.6}", report.ks_statistic);
    println!("critical_value: {:.6} (alpha {})", ks_critical_value(report.n, c.alpha), c.alpha);
    println!("uniform: {}", report.passes_ks(c.alpha));

    let mut m = RunManifest::new("gof", &args);
    m.inputs.push(c.data.clone());
    m.parameter_files.push(c.params.clone());
    m.outputs = vec![c.output.clone(), c.histogram.clone()];
    m.seed = Some(seed);
    m.seed_source = Some(source.into());
    m.config = serde_json::json!({
        "months": months,
        "randomized": !c.no_randomize,
        "alpha": c.alpha,
    });
    m.write(&sibling_path(&c.output))
}

fn cmd_evaluate(c: EvaluateCmd, args: &[String]) -> Result<()> {
    let (seed, source, args) = resolve_seed(c.seed, args);
    let data = load_data(&c.data)?;
    let mut orders = EvalOrders::default();
    if let Some(v) = &c.temperature_orders {
        check_count(Family::Temperature, "orders", v)?;
        orders.temperature = (v[0], v[1]);
    }
    if let Some(v) = &c.precipitation_orders {
        check_count(Family::Precipitation, "orders", v)?;
        orders.precipitation.copy_from_slice(v);
    }
    if let Some(v) = &c.direct_orders {
        check_count(Family::Direct, "orders", v)?;
        orders.direct.copy_from_slice(v);
    }
    let cfg = CrossValidationConfig {
        models: c.models.clone(),
        deltas: c.deltas.clone(),
        horizon: c.horizon,
        months: c.months.clone().unwrap_or_else(|| WINTER_MONTHS.to_vec()),
        n_paths: c.paths,
        seed,
        orders,
        fit: c.fit.config(),
        baseline: !c.no_baseline,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    std::fs::create_dir_all(&c.out_dir).with_context(|| format!("creating {}", c.out_dir.display()))?;
    let started = std::time::Instant::now();
    let cv = cross_validate(&data, &cfg)?;
    info!("cross-validation took {:.1?}", started.elapsed());

    let mut outputs = Vec::new();
    for r in &cv.reports {
        let path = c.out_dir.join(format!("{}.csv", r.label));
        write_with(&path, |w| r.write_csv(w))?;
        println!(
            "{}: {} forecasts, lead 1 MAE {:.3}, lead {} MAE {:.3}",
            r.label,
            r.n_forecasts,
            r.per_horizon_mae[0],
            r.horizon,
            r.per_horizon_mae[r.horizon - 1]
        );
        outputs.push(path);
    }
    let json_path = c.out_dir.join("evaluation.json");
    let mut text = serde_json::to_string_pretty(&cv)?;
    text.push('\n');
    std::fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    outputs.push(json_path);
    println!("mean_depth: {:.3}", cv.mean_depth);

    let mut m = RunManifest::new("evaluate", &args);
    m.inputs.push(c.data.clone());
    m.outputs = outputs;
    m.seed = Some(seed);
    m.seed_source = Some(source.into());
    m.config = serde_json::to_value(&cfg)?;
    m.write(&c.out_dir.join("manifest.json"))
}

fn cmd_simulate(c: SimulateCmd, args: &[String]) -> Result<()> {
    let (seed, source, args) = resolve_seed(c.seed, args);
    let (weather, short) = match &c.preset {
        Some(name) => {
            let weather = match name.as_str() {
                "oslo" => presets::oslo(),
                "geilo" => presets::geilo(),
                "tromso" => presets::tromso(),
                other => bail!(usage(format!("unknown preset `{other}` (expected oslo, geilo or tromso)"))),
            };
            (weather, snowcast::short_term::presets::oslo())
        }
        None => {
            let params = load_params(&c.params)?;
            let (mut short, mut temp, mut precip) = (None, None, None);
            for p in params {
                match p {
                    ModelParams::ShortTerm(p) => short = Some(p),
                    ModelParams::Temperature(p) => temp = Some(p),
                    ModelParams::Precipitation(p) => precip = Some(p),
                    ModelParams::Direct(_) => bail!(usage("simulate does not use direct parameters")),
                }
            }
            let need = |name: &str| usage(format!("missing {name} parameters"));
            let weather = WeatherModel {
                temperature: temp.ok_or_else(|| need("temperature"))?,
                precipitation: precip.ok_or_else(|| need("precipitation"))?,
            };
            (weather, short.ok_or_else(|| need("short_term"))?)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = simulate_dataset(&c.station, c.start_date, c.days, &weather, &short, &mut rng)?;
    write_with(&c.output, |w| data.to_writer(w))?;
    println!("days: {}", data.len());

    let mut m = RunManifest::new("simulate", &args);
    m.parameter_files = c.params.clone();
    m.outputs.push(c.output.clone());
    m.seed = Some(seed);
    m.seed_source = Some(source.into());
    m.config = serde_json::json!({
        "preset": c.preset,
        "days": c.days,
        "start_date": c.start_date,
        "station": c.station,
    });
    m.write(&sibling_path(&c.output))
}

fn write_with(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> snowcast::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().map_err(|e| anyhow!("writing {}: {e}", path.display()))
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
