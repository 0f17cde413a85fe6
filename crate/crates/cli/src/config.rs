//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use levy_coupling::coupling::{uniform_grid, CouplingMode, SchemeConfig};
use levy_coupling::drift::{
    linear_drift, parse_power_terms, radial_power_drift, stable_potential_drift, DriftCondition,
    DriftField,
};
use levy_coupling::stable_noise::StableSpec;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DriftChoice {
    /// `b(x) = -2β |x|^{2β-2} x`.
    StablePotential,
    /// `b(x) = -κ x`.
    Linear,
    /// `b(x) = -Σ c |x|^q x` from `drift_terms`.
    Power,
}

impl FromStr for DriftChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stable_potential" => Ok(Self::StablePotential),
            "linear" => Ok(Self::Linear),
            "power" => Ok(Self::Power),
            other => Err(format!(
                "unknown drift {other:?} (expected stable_potential, linear or power)"
            )),
        }
    }
}

impl fmt::Display for DriftChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::StablePotential => "stable_potential",
            Self::Linear => "linear",
            Self::Power => "power",
        })
    }
}

/// Everything a subcommand needs. Defaults reproduce the `β = 1.5`,
/// `α = 1.5`, `d = 1` potential example started at distance 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub alpha: f64,
    pub drift: DriftChoice,
    pub beta: f64,
    pub kappa: f64,
    pub drift_terms: Option<String>,
    /// Overrides of the drift's own condition constants.
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub l0: Option<f64>,
    pub theta: Option<f64>,
    pub p: f64,
    pub paths: usize,
    pub horizon: f64,
    pub record_step: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub dt_max: Option<f64>,
    pub eps_delta: Option<f64>,
    pub eps_couple: Option<f64>,
    pub delta_floor: Option<f64>,
    pub compensate_small: bool,
    pub coupling: CouplingMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 1,
            alpha: 1.5,
            drift: DriftChoice::StablePotential,
            beta: 1.5,
            kappa: 1.0,
            drift_terms: None,
            k1: None,
            k2: None,
            l0: None,
            theta: None,
            p: 1.0,
            paths: 512,
            horizon: 5.0,
            record_step: 0.25,
            seed: 1,
            out: PathBuf::from("out"),
            x0: None,
            y0: None,
            dt_max: None,
            eps_delta: None,
            eps_couple: None,
            delta_floor: None,
            compensate_small: false,
            coupling: CouplingMode::Mixed,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::usage(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_vector(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|v| parse_value::<f64>(key, v.trim()))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::usage(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn parse_mode(value: &str) -> Result<CouplingMode, CliError> {
    match value {
        "mixed" => Ok(CouplingMode::Mixed),
        "synchronous" => Ok(CouplingMode::Synchronous),
        other => Err(CliError::usage(format!(
            "coupling: expected mixed or synchronous, got {other:?}"
        ))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "line {}: expected key = value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            let key = key.trim().to_string();
            if seen.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::usage(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        let mut cfg = Self::default();
        for (key, value) in &seen {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "d" => self.d = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "drift" => self.drift = value.parse().map_err(CliError::usage)?,
            "beta" => self.beta = parse_value(key, value)?,
            "kappa" => self.kappa = parse_value(key, value)?,
            "drift_terms" => self.drift_terms = Some(value.to_string()),
            "k1" => self.k1 = Some(parse_value(key, value)?),
            "k2" => self.k2 = Some(parse_value(key, value)?),
            "l0" => self.l0 = Some(parse_value(key, value)?),
            "theta" => self.theta = Some(parse_value(key, value)?),
            "p" => self.p = parse_value(key, value)?,
            "paths" => self.paths = parse_value(key, value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "record_step" => self.record_step = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "x0" => self.x0 = Some(parse_vector(key, value)?),
            "y0" => self.y0 = Some(parse_vector(key, value)?),
            "dt_max" => self.dt_max = Some(parse_value(key, value)?),
            "eps_delta" => self.eps_delta = Some(parse_value(key, value)?),
            "eps_couple" => self.eps_couple = Some(parse_value(key, value)?),
            "delta_floor" => self.delta_floor = Some(parse_value(key, value)?),
            "compensate_small" => self.compensate_small = parse_bool(key, value)?,
            "coupling" => self.coupling = parse_mode(value)?,
            other => return Err(CliError::usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Builds the model objects and checks cross-field consistency.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let spec = StableSpec::new(self.d, self.alpha)?;
        let mut field = match self.drift {
            DriftChoice::StablePotential => stable_potential_drift(self.beta, self.d)?,
            DriftChoice::Linear => linear_drift(self.kappa, self.d)?,
            DriftChoice::Power => {
                let text = self
                    .drift_terms
                    .as_deref()
                    .ok_or_else(|| CliError::usage("drift = power needs drift_terms"))?;
                radial_power_drift(parse_power_terms(text)?, self.d, format!("power({text})"))?
            }
        };
        let claimed = field.claimed_condition;
        let pick = |over: Option<f64>, base: Option<f64>, name: &str| {
            over.or(base).ok_or_else(|| {
                CliError::usage(format!("{name} must be given for drift = {}", self.drift))
            })
        };
        let cond = DriftCondition::new(
            pick(self.k1, claimed.map(|c| c.k1), "k1")?,
            pick(self.k2, claimed.map(|c| c.k2), "k2")?,
            pick(self.l0, claimed.map(|c| c.l0), "l0")?,
            pick(self.theta, claimed.map(|c| c.theta), "theta")?,
        )?;
        field.claimed_condition = Some(cond);
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(CliError::usage(format!("p must be >= 1, got {}", self.p)));
        }
        if self.paths == 0 {
            return Err(CliError::usage("paths must be positive"));
        }
        let grid = uniform_grid(self.horizon, self.record_step)?;
        let x0 = self.x0.clone().unwrap_or_else(|| {
            let mut v = vec![0.0; self.d];
            v[0] = 0.5;
            v
        });
        let y0 = self.y0.clone().unwrap_or_else(|| vec![0.0; self.d]);
        if x0.len() != self.d || y0.len() != self.d {
            return Err(CliError::usage(format!(
                "x0 and y0 need {} coordinates",
                self.d
            )));
        }
        let defaults = SchemeConfig::for_l0(cond.l0);
        let scheme = SchemeConfig {
            dt_max: self.dt_max.unwrap_or(defaults.dt_max),
            eps_delta: self.eps_delta.unwrap_or(defaults.eps_delta),
            eps_couple: self.eps_couple.unwrap_or(defaults.eps_couple),
            delta_floor: self.delta_floor.unwrap_or(defaults.delta_floor),
            compensate_small: self.compensate_small,
            mode: self.coupling,
            ..defaults
        };
        scheme.validate()?;
        Ok(Resolved {
            spec,
            field,
            cond,
            scheme,
            grid,
            x0,
            y0,
        })
    }
}

/// Model objects built from an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: StableSpec,
    pub field: DriftField,
    pub cond: DriftCondition,
    pub scheme: SchemeConfig,
    pub grid: Vec<f64>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Resolved {
    pub fn r0(&self) -> f64 {
        self.x0
            .iter()
            .zip(&self.y0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
