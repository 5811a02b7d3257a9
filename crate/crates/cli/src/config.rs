//! `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! preset = example1
//! grid.n = 256
//! discount.a = cos2pix
//! discount.lambda_schedule = 1e-1, 3e-2, 1e-2, 3e-3, 1e-3
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;
use weakkam_core::discount::{geometric_schedule, validate_schedule};
use weakkam_core::Strategy;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn at(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line: Some(line), message: message.into() }
}

fn global(message: impl Into<String>) -> ConfigError {
    ConfigError { line: None, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetChoice {
    Example1,
    Example2,
    Custom,
}

impl fmt::Display for PresetChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetChoice::Example1 => "example1",
            PresetChoice::Example2 => "example2",
            PresetChoice::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialChoice {
    /// Whatever the preset prescribes.
    Preset,
    CosineWell,
    SinSquared,
    Zero,
    Samples(PathBuf),
}

impl fmt::Display for PotentialChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialChoice::Preset => f.write_str("preset"),
            PotentialChoice::CosineWell => f.write_str("cosine_well"),
            PotentialChoice::SinSquared => f.write_str("sin_squared"),
            PotentialChoice::Zero => f.write_str("zero"),
            PotentialChoice::Samples(p) => write!(f, "samples({})", p.display()),
        }
    }
}

/// Discount coefficient `a`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientChoice {
    Cos2Pix,
    NegCos2Pix,
    Const(f64),
    Samples(PathBuf),
}

impl fmt::Display for CoefficientChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientChoice::Cos2Pix => f.write_str("cos2pix"),
            CoefficientChoice::NegCos2Pix => f.write_str("neg_cos2pix"),
            CoefficientChoice::Const(c) => write!(f, "const({c})"),
            CoefficientChoice::Samples(p) => write!(f, "samples({})", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassChoice {
    Index(usize),
    /// Class of the Aubry node nearest to this position.
    Near(f64),
}

impl fmt::Display for ClassChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassChoice::Index(i) => write!(f, "{i}"),
            ClassChoice::Near(x) => write!(f, "near({x})"),
        }
    }
}

/// `auto` or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto<T> {
    Auto,
    Value(T),
}

impl<T: fmt::Display> fmt::Display for Auto<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auto::Auto => f.write_str("auto"),
            Auto::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: PresetChoice,
    pub n: usize,
    pub circumference: f64,
    pub dt: Auto<f64>,
    pub potential: PotentialChoice,
    pub v_max: Auto<f64>,
    pub p_max: Auto<f64>,
    /// Drift of the custom Lagrangian `(v - omega)^2 / 4 + U(x)`.
    pub omega: f64,
    pub coefficient: CoefficientChoice,
    pub class: ClassChoice,
    pub level: Auto<f64>,
    pub schedule: Vec<f64>,
    /// Extra rate below the schedule for the small-rate consistency check.
    pub consistency_lambda: Option<f64>,
    pub solver: Strategy,
    pub max_iters: usize,
    pub tol_fix: f64,
    pub tol_aubry: Auto<f64>,
    pub tol_class: Auto<f64>,
    pub tol_fixed: Auto<f64>,
    pub orbit_steps: Auto<usize>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: PresetChoice::Example1,
            n: 256,
            circumference: 1.0,
            dt: Auto::Auto,
            potential: PotentialChoice::Preset,
            v_max: Auto::Auto,
            p_max: Auto::Auto,
            omega: 0.0,
            coefficient: CoefficientChoice::Cos2Pix,
            class: ClassChoice::Index(0),
            level: Auto::Auto,
            schedule: geometric_schedule(1e-1, 1e-3, 7),
            consistency_lambda: Some(1e-6),
            solver: Strategy::PolicyIteration,
            max_iters: 200_000,
            tol_fix: 1e-10,
            tol_aubry: Auto::Auto,
            tol_class: Auto::Auto,
            tol_fixed: Auto::Auto,
            orbit_steps: Auto::Auto,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn real(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|_| at(line, format!("{key}: expected a number, got {value:?}")))?;
    if !v.is_finite() {
        return Err(at(line, format!("{key}: value must be finite")));
    }
    Ok(v)
}

fn positive(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = real(line, key, value)?;
    if v <= 0.0 {
        return Err(at(line, format!("{key}: value must be positive")));
    }
    Ok(v)
}

fn count(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| at(line, format!("{key}: expected a nonnegative integer, got {value:?}")))
}

fn auto_or<T>(value: &str, parse: impl FnOnce(&str) -> Result<T, ConfigError>) -> Result<Auto<T>, ConfigError> {
    if value == "auto" {
        Ok(Auto::Auto)
    } else {
        parse(value).map(Auto::Value)
    }
}

/// Argument of `name(arg)`, if `value` has that shape.
fn call<'a>(value: &'a str, name: &str) -> Option<&'a str> {
    value.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')').map(str::trim)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen = HashSet::new();
    let mut samples_file: Option<(usize, PathBuf)> = None;
    let mut wants_samples: Option<usize> = None;
    let mut custom_kind_set = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) =
            content.split_once('=').ok_or_else(|| at(line, format!("expected `key = value`, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(at(line, format!("{key}: missing value")));
        }
        if !seen.insert(key.to_string()) {
            return Err(at(line, format!("duplicate key {key}")));
        }
        match key {
            "preset" => {
                cfg.preset = match value {
                    "example1" => PresetChoice::Example1,
                    "example2" => PresetChoice::Example2,
                    "custom" => PresetChoice::Custom,
                    other => return Err(at(line, format!("unknown preset {other:?}"))),
                }
            }
            "grid.n" => {
                let n = count(line, key, value)?;
                if n < 4 {
                    return Err(at(line, format!("grid.n must be at least 4, got {n}")));
                }
                cfg.n = n;
            }
            "grid.circumference" => cfg.circumference = positive(line, key, value)?,
            "grid.dt" => cfg.dt = auto_or(value, |v| positive(line, key, v))?,
            "potential" => {
                cfg.potential = match value {
                    "preset" => PotentialChoice::Preset,
                    "cosine_well" => PotentialChoice::CosineWell,
                    "sin_squared" => PotentialChoice::SinSquared,
                    "zero" => PotentialChoice::Zero,
                    "samples" => {
                        wants_samples = Some(line);
                        PotentialChoice::Preset
                    }
                    other => return Err(at(line, format!("unknown potential {other:?}"))),
                }
            }
            "potential.samples_file" => samples_file = Some((line, PathBuf::from(value))),
            "hamiltonian.v_max" => cfg.v_max = auto_or(value, |v| positive(line, key, v))?,
            "hamiltonian.p_max" => cfg.p_max = auto_or(value, |v| positive(line, key, v))?,
            "custom.lagrangian" => {
                if value != "tilted" {
                    return Err(at(line, format!("unknown custom Lagrangian {value:?} (available: tilted)")));
                }
                custom_kind_set = true;
            }
            "custom.omega" => cfg.omega = real(line, key, value)?,
            "discount.a" => {
                cfg.coefficient = match value {
                    "cos2pix" => CoefficientChoice::Cos2Pix,
                    "neg_cos2pix" => CoefficientChoice::NegCos2Pix,
                    v => {
                        if let Some(arg) = call(v, "const") {
                            CoefficientChoice::Const(real(line, key, arg)?)
                        } else if let Some(arg) = call(v, "samples") {
                            CoefficientChoice::Samples(PathBuf::from(arg))
                        } else {
                            return Err(at(line, format!("unknown coefficient {v:?}")));
                        }
                    }
                }
            }
            "discount.class" => {
                cfg.class = if let Some(arg) = call(value, "near") {
                    ClassChoice::Near(real(line, key, arg)?)
                } else {
                    ClassChoice::Index(count(line, key, value)?)
                }
            }
            "discount.A" => cfg.level = auto_or(value, |v| positive(line, key, v))?,
            "discount.lambda_schedule" => {
                let rates = value.split(',').map(|s| positive(line, key, s.trim())).collect::<Result<Vec<f64>, _>>()?;
                validate_schedule(&rates).map_err(|e| at(line, e.to_string()))?;
                cfg.schedule = rates;
            }
            "discount.consistency_lambda" => {
                cfg.consistency_lambda = if value == "none" { None } else { Some(positive(line, key, value)?) };
            }
            "discount.solver" => {
                cfg.solver = match value {
                    "policy" => Strategy::PolicyIteration,
                    "value" => Strategy::ValueIteration,
                    other => return Err(at(line, format!("unknown solver {other:?} (policy or value)"))),
                }
            }
            "discount.max_iters" => {
                cfg.max_iters = count(line, key, value)?;
                if cfg.max_iters == 0 {
                    return Err(at(line, "discount.max_iters must be positive"));
                }
            }
            "discount.tol_fix" => cfg.tol_fix = positive(line, key, value)?,
            "tol.aubry" => cfg.tol_aubry = auto_or(value, |v| positive(line, key, v))?,
            "tol.class" => cfg.tol_class = auto_or(value, |v| positive(line, key, v))?,
            "tol.fixed" => cfg.tol_fixed = auto_or(value, |v| positive(line, key, v))?,
            "orbit.steps" => cfg.orbit_steps = auto_or(value, |v| count(line, key, v))?,
            "output.dir" => cfg.output_dir = PathBuf::from(value),
            "seed" => {
                cfg.seed = value.parse().map_err(|_| at(line, format!("seed: expected an integer, got {value:?}")))?
            }
            other => return Err(at(line, format!("unknown key {other:?}"))),
        }
    }

    match (wants_samples, samples_file) {
        (Some(_), Some((_, path))) => cfg.potential = PotentialChoice::Samples(path),
        (Some(line), None) => return Err(at(line, "potential = samples needs potential.samples_file")),
        (None, Some((line, _))) => return Err(at(line, "potential.samples_file given without potential = samples")),
        (None, None) => {}
    }
    if cfg.preset == PresetChoice::Custom && !custom_kind_set {
        return Err(global("preset = custom needs custom.lagrangian"));
    }
    if cfg.preset != PresetChoice::Custom && (custom_kind_set || seen.contains("custom.omega")) {
        return Err(global("custom.* keys only apply to preset = custom"));
    }
    if let Some(extra) = cfg.consistency_lambda {
        if cfg.schedule.last().is_some_and(|&last| extra >= last) {
            return Err(global("discount.consistency_lambda must be below the last scheduled rate"));
        }
    }
    Ok(cfg)
}

/// Reads `path` and resolves relative file references, including
/// `output.dir`, against its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| global(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let PotentialChoice::Samples(p) = &mut cfg.potential {
        resolve(p);
    }
    if let CoefficientChoice::Samples(p) = &mut cfg.coefficient {
        resolve(p);
    }
    resolve(&mut cfg.output_dir);
    Ok(cfg)
}

/// Numbers separated by commas, whitespace or newlines; `#` starts a comment.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| global(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        for tok in content.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| global(format!("{}:{}: expected a number, got {tok:?}", path.display(), idx + 1)))?;
            if !v.is_finite() {
                return Err(global(format!("{}:{}: non-finite sample", path.display(), idx + 1)));
            }
            out.push(v);
        }
    }
    Ok(out)
}
