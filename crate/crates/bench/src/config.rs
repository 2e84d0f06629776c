//! Flat `key = value` run configuration with `#` comments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {msg}")]
    BadValue { key: String, value: String, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Quadratic saddle with Gaussian gradient noise.
    Quadratic,
    /// Finite sum of quadratic components.
    FiniteSum,
    /// Distributionally robust logistic regression.
    Dro,
    /// Bare constants (`l_xx`, `l_xy`, `l_yx`, `l_yy`, `gamma`, `mu_y`, noise); certificate checks only.
    Constants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    SapdPlus,
    SapdPlusVr,
    Sgda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleSource {
    Theory,
    Manual,
}

macro_rules! names {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok(<$ty>::$variant),)+
                    _ => Err(format!("expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(<$ty>::$variant => $name,)+ })
            }
        }
    };
}

names!(ProblemKind { Quadratic => "quadratic", FiniteSum => "finite-sum", Dro => "dro", Constants => "constants" });
names!(Algo { SapdPlus => "sapd-plus", SapdPlusVr => "sapd-plus-vr", Sgda => "sgda-baseline" });
names!(ScheduleSource { Theory => "theory", Manual => "manual" });

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub mu_y: f64,
    pub coupling: f64,
    pub l_xx: f64,
    pub l_xy: f64,
    pub l_yx: f64,
    pub l_yy: f64,
    pub delta_x: Option<f64>,
    pub delta_y: Option<f64>,
    pub components: usize,
    pub spread: f64,
    /// LIBSVM file for the DRO problem; a synthetic dataset is generated when absent.
    pub data: Option<PathBuf>,
    pub samples: usize,
    pub features: usize,
    pub dro_alpha: f64,
    pub dro_eta1: f64,
    pub dro_eta2: Option<f64>,
    pub x0_scale: f64,
    pub instance_seed: u64,

    pub algo: Algo,
    pub schedule: ScheduleSource,
    pub eps: f64,
    pub gap0: Option<f64>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub theta: Option<f64>,
    pub n_inner: Option<usize>,
    pub t_outer: Option<usize>,
    /// Samples per stochastic gradient for the non-VR methods.
    pub batch: usize,
    pub b: Option<usize>,
    pub b_x: usize,
    pub b_y: usize,
    pub q: usize,
    /// SGDA iterations between trace rows.
    pub record_every: usize,

    pub seed: u64,
    pub reps: usize,
    pub max_calls: Option<u64>,
    pub max_epochs: Option<f64>,
    pub monitor_every: usize,
    pub lambda: Option<f64>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemKind::Quadratic,
            n: 20,
            m: 10,
            gamma: 1.0,
            mu_y: 0.5,
            coupling: 1.5,
            l_xx: 1.0,
            l_xy: 1.0,
            l_yx: 1.0,
            l_yy: 1.0,
            delta_x: None,
            delta_y: None,
            components: 100,
            spread: 0.5,
            data: None,
            samples: 1000,
            features: 20,
            dro_alpha: 10.0,
            dro_eta1: 1e-3,
            dro_eta2: None,
            x0_scale: 1.0,
            instance_seed: 0,
            algo: Algo::SapdPlus,
            schedule: ScheduleSource::Theory,
            eps: 0.1,
            gap0: None,
            tau: None,
            sigma: None,
            theta: None,
            n_inner: None,
            t_outer: None,
            batch: 1,
            b: None,
            b_x: 10,
            b_y: 10,
            q: 10,
            record_every: 100,
            seed: 0,
            reps: 1,
            max_calls: None,
            max_epochs: None,
            monitor_every: 0,
            lambda: None,
            out: PathBuf::from("trace.csv"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue { key: key.into(), value: value.into(), msg: e.to_string() })
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

/// Splits `text` into `(key, value)` pairs, skipping blank lines and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: format!("expected `key = value`, got `{line}`") })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, msg: "empty key".into() });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_text(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "problem" => self.problem = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "m" => self.m = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "mu_y" => self.mu_y = parse(key, v)?,
            "coupling" => self.coupling = parse(key, v)?,
            "l_xx" => self.l_xx = parse(key, v)?,
            "l_xy" => self.l_xy = parse(key, v)?,
            "l_yx" => self.l_yx = parse(key, v)?,
            "l_yy" => self.l_yy = parse(key, v)?,
            "delta_x" => self.delta_x = parse_opt(key, v)?,
            "delta_y" => self.delta_y = parse_opt(key, v)?,
            "components" => self.components = parse(key, v)?,
            "spread" => self.spread = parse(key, v)?,
            "data" => self.data = if v.is_empty() || v == "none" { None } else { Some(PathBuf::from(v)) },
            "samples" => self.samples = parse(key, v)?,
            "features" => self.features = parse(key, v)?,
            "dro_alpha" => self.dro_alpha = parse(key, v)?,
            "dro_eta1" => self.dro_eta1 = parse(key, v)?,
            "dro_eta2" => self.dro_eta2 = parse_opt(key, v)?,
            "x0_scale" => self.x0_scale = parse(key, v)?,
            "instance_seed" => self.instance_seed = parse(key, v)?,
            "algo" => self.algo = parse(key, v)?,
            "schedule" => self.schedule = parse(key, v)?,
            "eps" => self.eps = parse(key, v)?,
            "gap0" => self.gap0 = parse_opt(key, v)?,
            "tau" => self.tau = parse_opt(key, v)?,
            "sigma" => self.sigma = parse_opt(key, v)?,
            "theta" => self.theta = parse_opt(key, v)?,
            "n_inner" => self.n_inner = parse_opt(key, v)?,
            "t_outer" => self.t_outer = parse_opt(key, v)?,
            "batch" => self.batch = parse(key, v)?,
            "b" => self.b = parse_opt(key, v)?,
            "b_x" => self.b_x = parse(key, v)?,
            "b_y" => self.b_y = parse(key, v)?,
            "q" => self.q = parse(key, v)?,
            "record_every" => self.record_every = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "reps" => self.reps = parse(key, v)?,
            "max_calls" => self.max_calls = parse_opt(key, v)?,
            "max_epochs" => self.max_epochs = parse_opt(key, v)?,
            "monitor_every" => self.monitor_every = parse(key, v)?,
            "lambda" => self.lambda = parse_opt(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Every key with its current value, one `key = value` line each; parsing the result
    /// reproduces this configuration exactly.
    pub fn to_text(&self) -> String {
        fn opt<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
        }
        let pairs: Vec<(&str, String)> = vec![
            ("problem", self.problem.to_string()),
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("gamma", self.gamma.to_string()),
            ("mu_y", self.mu_y.to_string()),
            ("coupling", self.coupling.to_string()),
            ("l_xx", self.l_xx.to_string()),
            ("l_xy", self.l_xy.to_string()),
            ("l_yx", self.l_yx.to_string()),
            ("l_yy", self.l_yy.to_string()),
            ("delta_x", opt(&self.delta_x)),
            ("delta_y", opt(&self.delta_y)),
            ("components", self.components.to_string()),
            ("spread", self.spread.to_string()),
            ("data", self.data.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())),
            ("samples", self.samples.to_string()),
            ("features", self.features.to_string()),
            ("dro_alpha", self.dro_alpha.to_string()),
            ("dro_eta1", self.dro_eta1.to_string()),
            ("dro_eta2", opt(&self.dro_eta2)),
            ("x0_scale", self.x0_scale.to_string()),
            ("instance_seed", self.instance_seed.to_string()),
            ("algo", self.algo.to_string()),
            ("schedule", self.schedule.to_string()),
            ("eps", self.eps.to_string()),
            ("gap0", opt(&self.gap0)),
            ("tau", opt(&self.tau)),
            ("sigma", opt(&self.sigma)),
            ("theta", opt(&self.theta)),
            ("n_inner", opt(&self.n_inner)),
            ("t_outer", opt(&self.t_outer)),
            ("batch", self.batch.to_string()),
            ("b", opt(&self.b)),
            ("b_x", self.b_x.to_string()),
            ("b_y", self.b_y.to_string()),
            ("q", self.q.to_string()),
            ("record_every", self.record_every.to_string()),
            ("seed", self.seed.to_string()),
            ("reps", self.reps.to_string()),
            ("max_calls", opt(&self.max_calls)),
            ("max_epochs", opt(&self.max_epochs)),
            ("monitor_every", self.monitor_every.to_string()),
            ("lambda", opt(&self.lambda)),
            ("out", self.out.display().to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
