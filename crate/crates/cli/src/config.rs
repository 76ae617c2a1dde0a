//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use skrein::heattrace::default_t_grid;
use skrein::model::validate;
use skrein::numerics::geometric_grid;
use skrein::specfun::FnAccuracy;
use skrein::spectrum::DEFAULT_Z_MAX;
use skrein::{BoundaryMode, ExtensionParam, ProblemSpec, Tolerances};

use crate::CliError;

const KEYS: &[&str] = &[
    "nu",
    "potential_coeffs",
    "trunc_radius",
    "far_cutoff",
    "mode",
    "tolerances",
    "allow_extreme_nu",
    "theta",
    "lambda_max",
    "z_max",
    "t_grid",
    "z_grid",
    "samples",
    "seed",
    "theta_range",
    "z_range",
    "krein_threshold",
    "max_k",
    "base_max_k",
    "truncation",
    "fit_half_integers",
    "fit_anomalous",
    "fit_window",
    "free_exponent",
    "threshold_constant",
    "threshold_anomalous",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub thetas: Vec<ExtensionParam>,
    pub lambda_max: f64,
    pub z_max: f64,
    pub t_grid: Vec<f64>,
    pub z_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub theta_range: (f64, f64),
    pub z_range: (f64, f64),
    pub krein_threshold: f64,
    pub max_k: usize,
    pub base_max_k: usize,
    pub truncation: f64,
    pub fit_half_integers: i32,
    pub fit_anomalous: i32,
    pub fit_window: Option<(f64, f64)>,
    pub free_exponent: Option<f64>,
    pub threshold_constant: f64,
    pub threshold_anomalous: f64,
    /// Normalised key/value pairs as read, for the manifest.
    pub entries: BTreeMap<String, String>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn num(key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| bad(key, format!("not a number: {v:?}")))?;
    if !x.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(x)
}

fn int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| bad(key, format!("not an integer: {v:?}")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn pair(key: &str, v: &str) -> Result<(f64, f64), CliError> {
    match list(key, v)?.as_slice() {
        [a, b] if a < b => Ok((*a, *b)),
        _ => Err(bad(key, "expected `lo, hi` with lo < hi")),
    }
}

fn flag(key: &str, v: &str) -> Result<bool, CliError> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(bad(key, format!("expected true/false, got {other:?}"))),
    }
}

pub fn parse_thetas(v: &str) -> Result<Vec<ExtensionParam>, CliError> {
    let out: Vec<ExtensionParam> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ExtensionParam>().map_err(|e| bad("theta", e)))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(bad("theta", "empty list"));
    }
    Ok(out)
}

/// `geom:lo:hi:n` or an explicit ascending list.
fn grid(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let v = v.trim();
    let g = if let Some(rest) = v.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(key, "expected geom:lo:hi:n"));
        }
        let (lo, hi) = (num(key, parts[0])?, num(key, parts[1])?);
        let n: usize = int(key, parts[2])?;
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(bad(key, "need 0 < lo < hi and n >= 2"));
        }
        geometric_grid(lo, hi, n)
    } else {
        list(key, v)?
    };
    if g.is_empty() {
        return Err(bad(key, "empty grid"));
    }
    if g.iter().any(|x| *x <= 0.0) || g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(key, "grid must be positive and strictly ascending"));
    }
    Ok(g)
}

fn tolerances(v: &str) -> Result<Tolerances, CliError> {
    let mut t = Tolerances::default();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, x) = part
            .split_once(':')
            .ok_or_else(|| bad("tolerances", format!("expected name:value, got {part:?}")))?;
        let x = num("tolerances", x)?;
        match k.trim() {
            "ode" => t.ode = x,
            "match" => t.matching = x,
            "fn" => t.function = FnAccuracy::new(x).map_err(|e| bad("tolerances", e))?,
            other => return Err(bad("tolerances", format!("unknown tolerance {other:?}"))),
        }
    }
    Ok(t)
}

/// Splits the file into key/value pairs; `#` starts a comment.
pub fn read_entries(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(CliError::Config(format!(
                "line {}: unknown key {k:?}",
                i + 1
            )));
        }
        if entries.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!(
                "line {}: duplicate key {k:?}",
                i + 1
            )));
        }
    }
    Ok(entries)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Config("config is not UTF-8".into()))?;
        Ok((Self::parse(&text)?, bytes))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let e = read_entries(text)?;
        let get = |k: &str| e.get(k).map(String::as_str);
        let nu = num("nu", get("nu").ok_or_else(|| bad("nu", "required"))?)?;
        let coeffs = get("potential_coeffs")
            .map(|v| list("potential_coeffs", v))
            .transpose()?
            .unwrap_or_default();
        let mut spec = ProblemSpec::unchecked(
            nu,
            coeffs,
            get("trunc_radius")
                .map(|v| num("trunc_radius", v))
                .transpose()?
                .unwrap_or(1.0),
        );
        if let Some(v) = get("far_cutoff") {
            spec.far_cutoff = num("far_cutoff", v)?;
        }
        if let Some(v) = get("mode") {
            spec.mode = match v {
                "wall" => BoundaryMode::Wall,
                "half_line" => BoundaryMode::HalfLine,
                other => {
                    return Err(bad(
                        "mode",
                        format!("expected wall or half_line, got {other:?}"),
                    ))
                }
            };
        }
        if let Some(v) = get("tolerances") {
            spec.tolerances = tolerances(v)?;
        }
        if let Some(v) = get("allow_extreme_nu") {
            spec.allow_extreme_nu = flag("allow_extreme_nu", v)?;
        }
        let spec = validate(&spec).map_err(|e| CliError::Config(e.to_string()))?;
        let positive = |k: &str, d: f64| -> Result<f64, CliError> {
            let x = get(k).map(|v| num(k, v)).transpose()?.unwrap_or(d);
            if x > 0.0 {
                Ok(x)
            } else {
                Err(bad(k, "must be positive"))
            }
        };
        let free_exponent = match get("free_exponent") {
            None | Some("false") | Some("no") => None,
            Some("true") | Some("yes") => Some(0.5),
            Some(v) => Some(num("free_exponent", v)?),
        };
        let cfg = RunConfig {
            thetas: get("theta")
                .map(parse_thetas)
                .transpose()?
                .unwrap_or(vec![ExtensionParam::Finite(0.0)]),
            lambda_max: positive("lambda_max", 1e3)?,
            z_max: positive("z_max", DEFAULT_Z_MAX)?,
            t_grid: get("t_grid")
                .map(|v| grid("t_grid", v))
                .transpose()?
                .unwrap_or_else(default_t_grid),
            z_grid: get("z_grid")
                .map(|v| grid("z_grid", v))
                .transpose()?
                .unwrap_or_else(|| geometric_grid(20.0, 2e4, 24)),
            samples: get("samples")
                .map(|v| int("samples", v))
                .transpose()?
                .unwrap_or(100),
            seed: get("seed")
                .map(|v| int("seed", v))
                .transpose()?
                .unwrap_or(1),
            theta_range: get("theta_range")
                .map(|v| pair("theta_range", v))
                .transpose()?
                .unwrap_or((-1.0, 10.0)),
            z_range: get("z_range")
                .map(|v| pair("z_range", v))
                .transpose()?
                .unwrap_or((2.0, 50.0)),
            krein_threshold: positive("krein_threshold", 1e-8)?,
            max_k: get("max_k")
                .map(|v| int("max_k", v))
                .transpose()?
                .unwrap_or(6),
            base_max_k: get("base_max_k")
                .map(|v| int("base_max_k", v))
                .transpose()?
                .unwrap_or(8),
            truncation: positive("truncation", 3.0)?,
            fit_half_integers: get("fit_half_integers")
                .map(|v| int("fit_half_integers", v))
                .transpose()?
                .unwrap_or(1),
            fit_anomalous: get("fit_anomalous")
                .map(|v| int("fit_anomalous", v))
                .transpose()?
                .unwrap_or(6),
            fit_window: get("fit_window")
                .map(|v| pair("fit_window", v))
                .transpose()?,
            free_exponent,
            threshold_constant: positive("threshold_constant", 0.01)?,
            threshold_anomalous: positive("threshold_anomalous", 0.02)?,
            spec,
            entries: e.clone(),
        };
        if cfg.z_range.0 <= 0.0 {
            return Err(bad("z_range", "must be positive"));
        }
        if cfg.fit_half_integers < 0 || cfg.fit_anomalous < 0 {
            return Err(bad("fit_half_integers", "counts must be non-negative"));
        }
        Ok(cfg)
    }
}
