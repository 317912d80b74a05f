//! Scenario configuration: flat `key = value` files, built-in presets and
//! command-line overrides, layered in that order (later layers win).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nlsync_core::model::{Params, State3};
use nlsync_core::pde::{Field3, Grid1D, Scheme, StepperConfig};

use crate::error::CliError;

pub const PAPER_ODE: &str = include_str!("../presets/paper-ode.conf");
pub const PAPER_SYNC: &str = include_str!("../presets/paper-sync.conf");

/// Every recognised key with its default value.
const DEFAULTS: &[(&str, &str)] = &[
    ("a", "0.4"),
    ("alpha", "0.175"),
    ("k", "5"),
    ("d1", "0.1"),
    ("d2", "0.1"),
    ("d3", "0.1"),
    ("length", "10"),
    ("grid_n", "201"),
    ("dt", "1e-3"),
    ("t_end", "40"),
    ("scheme", "crank-nicolson-diffusion"),
    ("u0", "0.349, 0, -0.3"),
    ("ic_modulation", "0.3"),
    ("master_ic", "0.349:0.5pi, 0:0.5pi, -0.3:0.5pi"),
    ("slave_ic", "0.7:0.6pi, 0.15:0.4pi, 0.7:0.7pi"),
    ("snapshot_count", "200"),
    ("controls", "on"),
    ("transient", "100"),
    ("reortho_interval", "1"),
];

pub fn preset_text(name: &str) -> Result<&'static str, CliError> {
    match name {
        "paper-ode" => Ok(PAPER_ODE),
        "paper-sync" => Ok(PAPER_SYNC),
        other => Err(CliError::Config(format!(
            "unknown preset `{other}` (expected paper-ode or paper-sync)"
        ))),
    }
}

/// Resolved `key -> value` strings, echoed verbatim into manifests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConfig(BTreeMap<String, String>);

impl Default for RawConfig {
    fn default() -> Self {
        Self(
            DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }
}

impl RawConfig {
    /// Apply a `key = value` document; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{origin}:{}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.merge_text(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !DEFAULTS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    fn number(&self, key: &str) -> Result<f64, CliError> {
        let raw = self.get(key);
        parse_number(raw)
            .ok_or_else(|| CliError::Config(format!("invalid number for `{key}`: `{raw}`")))
    }

    fn count(&self, key: &str) -> Result<usize, CliError> {
        let raw = self.get(key);
        raw.parse()
            .map_err(|_| CliError::Config(format!("invalid integer for `{key}`: `{raw}`")))
    }
}

/// Plain float, or a multiple of π written `0.5pi` / `pi`.
fn parse_number(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    if let Some(coef) = raw.strip_suffix("pi") {
        let coef = coef.trim().trim_end_matches('*').trim();
        let c = if coef.is_empty() {
            1.0
        } else {
            coef.parse::<f64>().ok()?
        };
        return Some(c * PI);
    }
    raw.parse().ok()
}

/// `base·(1 + modulation·cos(ω x))` per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineProfile {
    pub base: [f64; 3],
    pub omega: [f64; 3],
}

impl CosineProfile {
    fn parse(key: &str, raw: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
        let bad = || {
            CliError::Config(format!(
                "invalid value for `{key}`: `{raw}` (expected three `base:omega` entries)"
            ))
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut base = [0.0; 3];
        let mut omega = [0.0; 3];
        for (j, part) in parts.iter().enumerate() {
            let (b, w) = part.split_once(':').unwrap_or((part, "0"));
            base[j] = parse_number(b).ok_or_else(bad)?;
            omega[j] = parse_number(w).ok_or_else(bad)?;
        }
        Ok(Self { base, omega })
    }

    pub fn field(&self, grid: Grid1D, modulation: f64) -> Field3 {
        Field3::from_fn(grid, |x| {
            let c = |j: usize| self.base[j] * (1.0 + modulation * (self.omega[j] * x).cos());
            State3::new(c(0), c(1), c(2))
        })
    }

    /// Wavenumbers whose cosine does not have zero slope at `x = length`.
    pub fn incompatible_wavenumbers(&self, length: f64) -> Vec<f64> {
        self.omega
            .iter()
            .copied()
            .filter(|w| (w * length).sin().abs() > 1e-9)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: Params,
    pub grid: Grid1D,
    pub stepper: StepperConfig,
    pub t_end: f64,
    pub u0: State3,
    pub master_ic: CosineProfile,
    pub slave_ic: CosineProfile,
    pub ic_modulation: f64,
    pub snapshot_count: usize,
    pub controls_on: bool,
    pub transient: f64,
    pub reortho_interval: f64,
    pub raw: RawConfig,
}

impl ScenarioConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let params = Params {
            a: raw.number("a")?,
            alpha: raw.number("alpha")?,
            k: raw.number("k")?,
            d1: raw.number("d1")?,
            d2: raw.number("d2")?,
            d3: raw.number("d3")?,
        };
        params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let grid = Grid1D::new(raw.number("length")?, raw.count("grid_n")?)
            .map_err(|e| CliError::Config(e.to_string()))?;

        let dt = raw.number("dt")?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CliError::Config(format!("`dt` must be positive, got {dt}")));
        }
        let scheme = match raw.get("scheme") {
            "crank-nicolson-diffusion" | "crank-nicolson" | "cn" => Scheme::CrankNicolsonDiffusion,
            "backward-euler-diffusion" | "backward-euler" | "be" => Scheme::BackwardEulerDiffusion,
            other => {
                return Err(CliError::Config(format!(
                    "invalid value for `scheme`: `{other}`"
                )))
            }
        };
        let t_end = raw.number("t_end")?;
        if t_end.is_nan() || t_end < dt {
            return Err(CliError::Config(format!(
                "`t_end` ({t_end}) must be at least one step ({dt})"
            )));
        }

        let u0 = {
            let v = raw.get("u0");
            let parts: Option<Vec<f64>> = v.split(',').map(parse_number).collect();
            match parts.as_deref() {
                Some([a, b, c]) => State3::new(*a, *b, *c),
                _ => return Err(CliError::Config(format!("invalid value for `u0`: `{v}`"))),
            }
        };

        let controls_on = match raw.get("controls") {
            "on" | "true" => true,
            "off" | "false" => false,
            other => {
                return Err(CliError::Config(format!(
                    "invalid value for `controls`: `{other}`"
                )))
            }
        };

        Ok(Self {
            params,
            grid,
            stepper: StepperConfig { dt, scheme },
            t_end,
            u0,
            master_ic: CosineProfile::parse("master_ic", raw.get("master_ic"))?,
            slave_ic: CosineProfile::parse("slave_ic", raw.get("slave_ic"))?,
            ic_modulation: raw.number("ic_modulation")?,
            snapshot_count: raw.count("snapshot_count")?,
            controls_on,
            transient: raw.number("transient")?,
            reortho_interval: raw.number("reortho_interval")?,
            raw,
        })
    }

    /// Warnings about initial data that violate the zero-flux boundaries.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, ic) in [("master_ic", &self.master_ic), ("slave_ic", &self.slave_ic)] {
            for w in ic.incompatible_wavenumbers(self.grid.length()) {
                out.push(format!(
                    "warning: {name} wavenumber {w} is not Neumann-compatible on length {}",
                    self.grid.length()
                ));
            }
        }
        out
    }
}
