//! Parameter files: one JSON object per fitted model, tagged with its family.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::direct::DirectParams;
use crate::error::{domain, Result};
use crate::short_term::ShortTermParams;
use crate::weather::{PrecipParams, TempParams};

/// Model families that can be fitted and persisted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ShortTerm,
    Temperature,
    Precipitation,
    Direct,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::ShortTerm => "short_term",
            Family::Temperature => "temperature",
            Family::Precipitation => "precipitation",
            Family::Direct => "direct",
        }
    }

    /// Number of order dimensions in stepwise selection.
    pub fn order_dims(self) -> usize {
        match self {
            Family::ShortTerm => 0,
            Family::Temperature => 2,
            Family::Precipitation => 6,
            Family::Direct => 3,
        }
    }
}

impl std::str::FromStr for Family {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short_term" | "short-term" => Ok(Family::ShortTerm),
            "temperature" => Ok(Family::Temperature),
            "precipitation" => Ok(Family::Precipitation),
            "direct" => Ok(Family::Direct),
            other => domain(format!("unknown model family `{other}`")),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of any model family; serialized with a `model` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    ShortTerm(ShortTermParams),
    Temperature(TempParams),
    Precipitation(PrecipParams),
    Direct(DirectParams),
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::ShortTerm(_) => Family::ShortTerm,
            ModelParams::Temperature(_) => Family::Temperature,
            ModelParams::Precipitation(_) => Family::Precipitation,
            ModelParams::Direct(_) => Family::Direct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::ShortTerm(p) => p.validate(),
            ModelParams::Temperature(p) => p.validate(),
            ModelParams::Precipitation(p) => p.validate(),
            ModelParams::Direct(p) => p.validate(),
        }
    }

    /// Number of free parameters, as counted by AIC.
    pub fn n_params(&self) -> usize {
        match self {
            ModelParams::ShortTerm(_) => ShortTermParams::N_PARAMS,
            ModelParams::Temperature(p) => p.n_params(),
            ModelParams::Precipitation(p) => p.n_params(),
            ModelParams::Direct(p) => p.n_params(),
        }
    }

    /// Order vector in stepwise layout (empty for the short-term model).
    pub fn orders(&self) -> Vec<usize> {
        match self {
            ModelParams::ShortTerm(_) => Vec::new(),
            ModelParams::Temperature(p) => {
                let (m, q) = p.orders();
                vec![m, q]
            }
            ModelParams::Precipitation(p) => p.orders().to_vec(),
            ModelParams::Direct(p) => p.orders().to_vec(),
        }
    }
}

/// Fit diagnostics stored next to the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub log_likelihood: f64,
    pub aic: f64,
    pub n_params: usize,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// On-disk parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFile {
    pub station: String,
    #[serde(flatten)]
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
}

impl ParamFile {
    pub fn new(station: impl Into<String>, params: ModelParams) -> Self {
        Self {
            station: station.into(),
            params,
            fit: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamFile = serde_json::from_str(text)?;
        file.params.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::short_term::presets;
    use crate::weather::{FourierTrend, TempStandardization};

    #[test]
    fn short_term_file_is_flat() {
        let f = ParamFile::new("oslo", ModelParams::ShortTerm(presets::oslo()));
        let v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj["model"], "short_term");
        assert_eq!(obj["station"], "oslo");
        for key in [
            "mu", "beta0", "beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "beta7",
            "sigma1_sq", "sigma2_sq",
        ] {
            assert!(obj[key].is_number(), "{key}");
        }
        assert_eq!(obj.len(), 13);
    }

    #[test]
    fn tagged_round_trips() {
        let precip = PrecipParams {
            amount_trend: FourierTrend {
                order: 1,
                a0: 1.1,
                a: vec![0.1 + 0.2],
                b: vec![-1.0 / 3.0],
            },
            amount_occ_lags: vec![0.3],
            amount_temp_poly: vec![],
            amount_cv_shape: 0.71,
            zero_trend: FourierTrend::constant(0.2),
            zero_occ_lags: vec![-1.0, 0.1],
            zero_temp_poly: vec![0.05],
            temp_standardization: TempStandardization {
                center: 5.123456789,
                scale: 7.7,
            },
        };
        let mut f = ParamFile::new("x", ModelParams::Precipitation(precip));
        f.fit = Some(FitSummary {
            log_likelihood: -1234.5678901234,
            aic: 2480.1,
            n_params: 9,
            iterations: 17,
            converged: true,
            notes: vec![],
        });
        let back = ParamFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn invalid_params_rejected_on_load() {
        let mut p = presets::oslo();
        p.sigma1_sq = -1.0;
        let text = ParamFile::new("x", ModelParams::ShortTerm(p)).to_json().unwrap();
        assert!(ParamFile::from_json(&text).is_err());
        assert!(ParamFile::from_json(r#"{"station":"x","model":"bogus"}"#).is_err());
    }
}
