//! `key = value` configuration with flag overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use critdet_core::integrate::IntegratorConfig;
use critdet_core::model::{Coefficients, Preset};
use serde::{Deserialize, Serialize};

use crate::args::Global;
use crate::failure::{bad_args, Failure};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub entries: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad_args(format!("config line {}: expected key = value", n + 1)))?;
            entries.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad_args(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    /// The flag value if given, else the config entry, else `default`.
    pub fn pick<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick_opt(key, flag)?.unwrap_or(default))
    }

    pub fn pick_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| bad_args(format!("config key {key} = {v:?}: {e}"))),
        }
    }

    pub fn flag(&self, key: &str, flag: bool) -> Result<bool, Failure> {
        if flag {
            return Ok(true);
        }
        Ok(self.pick_opt::<bool>(key, None)?.unwrap_or(false))
    }
}

pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| bad_args(format!("{what}: {p:?}: {e}"))))
        .collect()
}

pub fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), Failure> {
    match parse_list(s, what)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(bad_args(format!("{what}: expected two comma-separated numbers, got {s:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientChoice {
    /// Preset name, or `explicit` / `beta`.
    pub source: String,
    pub gamma: [f64; 3],
    pub beta: f64,
}

pub fn coefficients(g: &Global, s: &Settings) -> Result<(Coefficients, CoefficientChoice), Failure> {
    let gammas = s.pick_opt::<String>("gammas", g.gammas.clone())?;
    let beta = s.pick_opt::<f64>("beta", g.beta)?;
    let preset = s.pick::<String>("coeffs", g.coeffs.clone(), "paneitz".into())?;
    let (c, source) = if let Some(list) = gammas {
        let v = parse_list(&list, "gammas")?;
        let [g1, g2, g3] = v[..] else {
            return Err(bad_args("gammas: expected g1,g2,g3"));
        };
        (Coefficients::new(g1, g2, g3)?, "explicit".to_string())
    } else if let Some(b) = beta {
        (Coefficients::from_beta(b)?, "beta".to_string())
    } else {
        let p: Preset = preset.parse()?;
        (p.coefficients(), p.name().to_string())
    };
    let choice = CoefficientChoice { source, gamma: [c.gamma1, c.gamma2, c.gamma3], beta: c.beta };
    Ok((c, choice))
}

pub fn integrator(g: &Global, s: &Settings, base: IntegratorConfig) -> Result<IntegratorConfig, Failure> {
    let mut cfg = base;
    cfg.rel_tol = s.pick("rel-tol", g.rel_tol, cfg.rel_tol)?;
    cfg.abs_tol = s.pick("abs-tol", g.abs_tol, cfg.abs_tol)?;
    cfg.max_step = s.pick("max-step", g.max_step, cfg.max_step)?;
    cfg.blowup_norm = s.pick("blowup-norm", None, cfg.blowup_norm)?;
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0 && cfg.max_step > 0.0 && cfg.blowup_norm > 0.0) {
        return Err(bad_args("tolerances, max-step and blowup-norm must be positive"));
    }
    if cfg.rel_tol < 4.0 * f64::EPSILON {
        return Err(bad_args(format!("rel-tol {:e} is below machine precision", cfg.rel_tol)));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_keys() {
        let s = Settings::parse("# header\nrel_tol = 1e-9\n\nEps = 0.2  # trailing\n").unwrap();
        assert_eq!(s.raw("rel-tol"), Some("1e-9"));
        assert_eq!(s.pick::<f64>("eps", None, 0.0).unwrap(), 0.2);
        assert_eq!(s.pick::<f64>("eps", Some(0.5), 0.0).unwrap(), 0.5);
        assert!(Settings::parse("novalue").is_err());
    }
}
