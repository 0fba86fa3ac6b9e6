//! Flat key=value run configuration.

use crate::error::{Error, Result};
use crate::params::{derived_gamma_z, reference_params, CollectiveScaledParams, MagnetometerParams};
use crate::superop::DEFAULT_N_MAX;
use std::collections::BTreeMap;
use std::str::FromStr;

/// Parses a number with an optional k/M/G suffix ("500k", "2.5M", "10G").
pub fn parse_number(raw: &str) -> Result<f64> {
    let s = raw.trim();
    let (body, scale) = match s.chars().last() {
        Some('k') => (&s[..s.len() - 1], 1e3),
        Some('M') => (&s[..s.len() - 1], 1e6),
        Some('G') => (&s[..s.len() - 1], 1e9),
        _ => (s, 1.0),
    };
    let v: f64 = body.trim().parse().map_err(|_| Error::Config(format!("not a number: {raw:?}")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("not a finite number: {raw:?}")));
    }
    Ok(v * scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    SweepBz,
    SweepN,
    SweepPump,
    SweepKappa,
    BenchmarkFinite,
    CrbWitness,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SweepBz => "sweep-bz",
            Mode::SweepN => "sweep-n",
            Mode::SweepPump => "sweep-pump",
            Mode::SweepKappa => "sweep-kappa",
            Mode::BenchmarkFinite => "benchmark-finite",
            Mode::CrbWitness => "crb-witness",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sweep-bz" => Mode::SweepBz,
            "sweep-n" => Mode::SweepN,
            "sweep-pump" => Mode::SweepPump,
            "sweep-kappa" => Mode::SweepKappa,
            "benchmark-finite" => Mode::BenchmarkFinite,
            "crb-witness" => Mode::CrbWitness,
            _ => return Err(Error::Config(format!("unknown mode {s:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    TwoLevel,
    FourLevel,
    CollectiveMf,
    CollectiveFinite,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TwoLevel => "semiclassical-2lvl",
            ModelKind::FourLevel => "semiclassical-4lvl",
            ModelKind::CollectiveMf => "collective-mf",
            ModelKind::CollectiveFinite => "collective-finite",
        }
    }

    pub fn is_collective(self) -> bool {
        matches!(self, ModelKind::CollectiveMf | ModelKind::CollectiveFinite)
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "semiclassical-2lvl" => ModelKind::TwoLevel,
            "semiclassical-4lvl" => ModelKind::FourLevel,
            "collective-mf" => ModelKind::CollectiveMf,
            "collective-finite" => ModelKind::CollectiveFinite,
            _ => return Err(Error::Config(format!("unknown model {s:?}"))),
        })
    }
}

/// How κ_P follows from γ_P in the collective model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PumpScaling {
    /// κ_P = γ_P: the per-atom pump is γ_P/N.
    NonCollective,
    /// κ_P = N·γ_P.
    Collective,
}

/// Quantity varied by benchmark-finite and crb-witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    HZ,
    KappaZ,
    N,
}

impl FromStr for SweepVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "h_z" => SweepVar::HZ,
            "kappa_z" => SweepVar::KappaZ,
            "n_atoms" | "N" => SweepVar::N,
            _ => return Err(Error::Config(format!("unknown sweep variable {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: MagnetometerParams,
    pub model: Option<ModelKind>,
    pub pump: PumpScaling,
    pub kappa_p: Option<f64>,
    pub kappa_z: Option<f64>,
    pub n_max: usize,
    pub rotate_background: bool,
    pub grid: Option<String>,
    pub n_list: Option<Vec<usize>>,
    pub sweep_var: Option<SweepVar>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: reference_params(),
            model: None,
            pump: PumpScaling::NonCollective,
            kappa_p: None,
            kappa_z: None,
            n_max: DEFAULT_N_MAX,
            rotate_background: true,
            grid: None,
            n_list: None,
            sweep_var: None,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

pub fn parse_n_list(v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|t| {
            let x = parse_number(t)?;
            if x < 1.0 || x.fract() != 0.0 {
                return Err(Error::Config(format!("atom numbers must be positive integers, got {t:?}")));
            }
            Ok(x as usize)
        })
        .collect()
}

impl RunConfig {
    /// Reads `key = value` lines on top of the reference parameters. Blank
    /// lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
        }
        let mut cfg = RunConfig::default();
        for (k, v) in &entries {
            cfg.set(k, v)?;
        }
        let p = &mut cfg.params;
        let touches_flux = ["omega", "n_photons_in", "tau"].iter().any(|k| entries.contains_key(*k));
        if touches_flux && !entries.contains_key("gamma_z") {
            p.gamma_z = derived_gamma_z(p.omega, p.n_photons_in / p.tau).map_err(|e| Error::Config(e.to_string()))?;
        }
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "h_x" => p.h_x = parse_number(v)?,
            "h_z" => p.h_z = parse_number(v)?,
            "mu" => p.mu = parse_number(v)?,
            "gamma" => p.gamma = parse_number(v)?,
            "gamma_z" => p.gamma_z = parse_number(v)?,
            "gamma_P" => p.gamma_p = parse_number(v)?,
            "omega" => p.omega = parse_number(v)?,
            "eps_delta" => p.eps_delta = parse_number(v)?,
            "tau" => p.tau = parse_number(v)?,
            "n_atoms" => p.n_atoms = parse_number(v)?,
            "n_photons_in" => p.n_photons_in = parse_number(v)?,
            "column" => p.column = parse_number(v)?,
            "theta_rot" => p.theta_rot = parse_number(v)?,
            "kappa_P" => self.kappa_p = Some(parse_number(v)?),
            "kappa_z" => self.kappa_z = Some(parse_number(v)?),
            "n_max" => {
                let n = parse_number(v)?;
                if n < 1.0 || n.fract() != 0.0 {
                    return Err(Error::Config(format!("n_max must be a positive integer, got {v:?}")));
                }
                self.n_max = n as usize;
            }
            "rotate_background" => self.rotate_background = parse_bool(key, v)?,
            "collective_pump" => {
                self.pump = match v {
                    "noncollective" => PumpScaling::NonCollective,
                    "collective" => PumpScaling::Collective,
                    _ => return Err(Error::Config(format!("collective_pump: expected noncollective or collective, got {v:?}"))),
                }
            }
            "model" => self.model = Some(v.parse()?),
            "grid" => self.grid = Some(v.to_string()),
            "n_list" => self.n_list = Some(parse_n_list(v)?),
            "sweep_var" => self.sweep_var = Some(v.parse()?),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Collective inputs for the current magnetometer parameters.
    pub fn collective(&self, p: &MagnetometerParams) -> CollectiveScaledParams {
        let mut s = match self.pump {
            PumpScaling::NonCollective => CollectiveScaledParams::with_pump(p, p.gamma_p),
            PumpScaling::Collective => CollectiveScaledParams::from_params(p),
        };
        if let Some(k) = self.kappa_p {
            s.kappa_p = k;
        }
        if let Some(k) = self.kappa_z {
            s.kappa_z = k;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_number("500k").unwrap(), 5e5);
        assert_eq!(parse_number("2.5M").unwrap(), 2.5e6);
        assert_eq!(parse_number("10G").unwrap(), 1e10);
        assert_eq!(parse_number("6e12").unwrap(), 6e12);
        assert_eq!(parse_number(" -3 ").unwrap(), -3.0);
        assert!(parse_number("1x").is_err());
    }

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse("# comment\nh_z = 100k\nmodel = collective-mf\n").unwrap();
        assert_eq!(c.params.h_z, 1e5);
        assert_eq!(c.params.h_x, reference_params().h_x);
        assert_eq!(c.model, Some(ModelKind::CollectiveMf));
    }

    #[test]
    fn gamma_z_follows_omega() {
        let c = RunConfig::parse("omega = 50M").unwrap();
        assert!((c.params.gamma_z - 4.0 * reference_params().gamma_z).abs() < 1e-9);
        let c = RunConfig::parse("omega = 50M\ngamma_z = 1").unwrap();
        assert_eq!(c.params.gamma_z, 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("h_x = 1\nh_x = 2").is_err());
        assert!(RunConfig::parse("h_x").is_err());
        assert!(RunConfig::parse("eps_delta = 0").is_err());
    }
}
