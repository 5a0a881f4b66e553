use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::injection::ClipMode;
use crate::problems;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InjectionMode {
    #[default]
    None,
    /// One solution `optimum + scale · N(0, I)` per iteration.
    NearOptimum,
    /// One direction towards a perturbed optimum per iteration.
    Direction,
    /// The mean is moved to a perturbed optimum every iteration.
    MeanShift,
    /// The best solution seen so far is re-injected every iteration.
    BestEverElitist,
}

impl FromStr for InjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "none" => Ok(Self::None),
            "near_optimum" => Ok(Self::NearOptimum),
            "direction" => Ok(Self::Direction),
            "mean_shift" => Ok(Self::MeanShift),
            "best_ever" | "best_ever_elitist" => Ok(Self::BestEverElitist),
            _ => Err(Error::Config(format!("unknown injection mode `{s}`"))),
        }
    }
}

impl fmt::Display for InjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::NearOptimum => "near_optimum",
            Self::Direction => "direction",
            Self::MeanShift => "mean_shift",
            Self::BestEverElitist => "best_ever_elitist",
        })
    }
}

pub fn parse_clip_mode(s: &str) -> Result<ClipMode> {
    match s.replace('-', "_").as_str() {
        "hard" | "hard_clip" => Ok(ClipMode::HardClip),
        "cdf" | "cdf_adaptive" => Ok(ClipMode::CdfAdaptive),
        "off" => Ok(ClipMode::Off),
        _ => Err(Error::Config(format!("unknown clip policy `{s}`"))),
    }
}

pub fn clip_mode_name(mode: ClipMode) -> &'static str {
    match mode {
        ClipMode::HardClip => "hard_clip",
        ClipMode::CdfAdaptive => "cdf_adaptive",
        ClipMode::Off => "off",
    }
}

/// Initial mean of a scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialMean {
    /// Problem-specific preset, see [`ScenarioConfig::initial_point`].
    #[default]
    Preset,
    Ones,
    Zeros,
    Values(Vec<f64>),
}

impl FromStr for InitialMean {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "" | "default" | "preset" => Ok(Self::Preset),
            "ones" => Ok(Self::Ones),
            "zeros" => Ok(Self::Zeros),
            list => list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Self::Values)
                .map_err(|_| Error::Config(format!("bad m0 `{list}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub problem: String,
    pub dim: usize,
    pub lambda: Option<usize>,
    /// `None` uses the problem preset.
    pub sigma0: Option<f64>,
    pub m0: InitialMean,
    pub injection_mode: InjectionMode,
    pub injection_scale: f64,
    pub clip_policy: ClipMode,
    pub delta_sigma_max: Option<f64>,
    pub c_y: Option<f64>,
    pub c_ym: Option<f64>,
    pub seed: u64,
    pub target_f: f64,
    pub max_evals: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            problem: "sphere".into(),
            dim: 10,
            lambda: None,
            sigma0: None,
            m0: InitialMean::Preset,
            injection_mode: InjectionMode::None,
            injection_scale: 1e-4,
            clip_policy: ClipMode::HardClip,
            delta_sigma_max: None,
            c_y: None,
            c_ym: None,
            seed: 1,
            target_f: 1e-6,
            max_evals: 100_000,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// Accepts `inf` / `infinity` as well as plain numbers.
fn parse_threshold(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if v.is_nan() {
        return Err(Error::Config(format!("bad value `{value}` for `{key}`")));
    }
    Ok(v)
}

impl ScenarioConfig {
    pub fn new(problem: &str, dim: usize) -> Self {
        ScenarioConfig {
            problem: problem.into(),
            dim,
            ..Self::default()
        }
    }

    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let optional = |v: &str| v.is_empty() || v == "default" || v == "none";
        match key.trim() {
            "problem" => self.problem = value.to_string(),
            "dim" => self.dim = parse_num(key, value)?,
            "lambda" => {
                self.lambda = if optional(value) {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "sigma0" => {
                self.sigma0 = if optional(value) {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "m0" => self.m0 = value.parse()?,
            "injection_mode" => self.injection_mode = value.parse()?,
            "injection_scale" => self.injection_scale = parse_num(key, value)?,
            "clip_policy" => self.clip_policy = parse_clip_mode(value)?,
            "delta_sigma_max" => {
                self.delta_sigma_max = if optional(value) {
                    None
                } else {
                    Some(parse_threshold(key, value)?)
                }
            }
            "c_y" => {
                self.c_y = if optional(value) {
                    None
                } else {
                    Some(parse_threshold(key, value)?)
                }
            }
            "c_ym" => {
                self.c_ym = if optional(value) {
                    None
                } else {
                    Some(parse_threshold(key, value)?)
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "target_f" => self.target_f = parse_num(key, value)?,
            "max_evals" => self.max_evals = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("default".to_string(), |v| v.to_string());
        let m0 = match &self.m0 {
            InitialMean::Preset => "default".to_string(),
            InitialMean::Ones => "ones".to_string(),
            InitialMean::Zeros => "zeros".to_string(),
            InitialMean::Values(v) => v.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        };
        format!(
            "problem={}\ndim={}\nlambda={}\nsigma0={}\nm0={}\ninjection_mode={}\ninjection_scale={}\n\
             clip_policy={}\ndelta_sigma_max={}\nc_y={}\nc_ym={}\nseed={}\ntarget_f={}\nmax_evals={}\n",
            self.problem,
            self.dim,
            self.lambda.map_or("default".to_string(), |l| l.to_string()),
            opt(self.sigma0),
            m0,
            self.injection_mode,
            self.injection_scale,
            clip_mode_name(self.clip_policy),
            opt(self.delta_sigma_max),
            opt(self.c_y),
            opt(self.c_ym),
            self.seed,
            self.target_f,
            self.max_evals,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let obj = problems::by_name(&self.problem, self.dim)?;
        let lambda = self
            .lambda
            .unwrap_or_else(|| crate::params::default_population_size(self.dim));
        if lambda < 2 {
            return Err(Error::Config(format!(
                "lambda must be at least 2, got {lambda}"
            )));
        }
        if self.max_evals < lambda as u64 {
            return Err(Error::Config("max_evals must be at least lambda".into()));
        }
        if let Some(f_opt) = obj.f_opt() {
            if !(self.target_f > f_opt) {
                return Err(Error::Config(format!(
                    "target_f must exceed the optimum value {f_opt}"
                )));
            }
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("sigma0 must be positive and finite".into()));
            }
        }
        if let InitialMean::Values(v) = &self.m0 {
            if v.len() != self.dim || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("m0 must list dim finite values".into()));
            }
        }
        if !(self.injection_scale >= 0.0 && self.injection_scale.is_finite()) {
            return Err(Error::Config(
                "injection_scale must be finite and non-negative".into(),
            ));
        }
        for (name, v) in [
            ("delta_sigma_max", self.delta_sigma_max),
            ("c_y", self.c_y),
            ("c_ym", self.c_ym),
        ] {
            if v.is_some_and(|v| !(v > 0.0)) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Initial mean and step-size. Presets: sphere starts at the ones vector
    /// with σ₀ = 1, Rosenbrock at the origin with σ₀ = 0.5, Rastrigin at
    /// `3 · ones` with σ₀ = 2.
    pub fn initial_point(&self) -> (Vec<f64>, f64) {
        let (preset_m, preset_sigma) = match self.problem.as_str() {
            "rosenbrock" => (0.0, 0.5),
            "rastrigin" => (3.0, 2.0),
            _ => (1.0, 1.0),
        };
        let m = match &self.m0 {
            InitialMean::Preset => vec![preset_m; self.dim],
            InitialMean::Ones => vec![1.0; self.dim],
            InitialMean::Zeros => vec![0.0; self.dim],
            InitialMean::Values(v) => v.clone(),
        };
        (m, self.sigma0.unwrap_or(preset_sigma))
    }
}
