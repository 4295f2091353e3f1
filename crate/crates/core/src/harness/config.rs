//! Experiment configuration and its `key = value` text form.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{AttackBudget, AttackKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Proposed,
    B1,
    B2,
    B3,
    B4,
    Eve,
    Fading,
    Quant,
    Mismatch,
    Air,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::Proposed,
        Scenario::B1,
        Scenario::B2,
        Scenario::B3,
        Scenario::B4,
        Scenario::Eve,
        Scenario::Fading,
        Scenario::Quant,
        Scenario::Mismatch,
        Scenario::Air,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Proposed => "proposed",
            Scenario::B1 => "B1",
            Scenario::B2 => "B2",
            Scenario::B3 => "B3",
            Scenario::B4 => "B4",
            Scenario::Eve => "eve",
            Scenario::Fading => "fading",
            Scenario::Quant => "quant",
            Scenario::Mismatch => "mismatch",
            Scenario::Air => "air",
        }
    }

    /// Link scenarios that a BLER or beta sweep can run.
    pub fn is_link(self) -> bool {
        matches!(self, Scenario::Proposed | Scenario::B1 | Scenario::B2 | Scenario::B3 | Scenario::B4)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Scenario::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// Which sweep a configuration drives; fixes the meaning of `grid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepKind {
    /// `grid` is rho_slot in dB.
    Bler,
    /// `grid` is beta at fixed `rho_slot_db`.
    Beta,
    /// `grid` is rho_slot in dB.
    Air,
    /// `grid` is LUT bit width, one series per `sigma_grid` entry.
    Quant,
    /// `grid` is the set of estimate/true ratios.
    Mismatch,
    /// `grid` is rho_slot in dB, one series per `budgets` entry.
    Eve,
    /// `grid` is the Ricean K factor (`inf` for no fading).
    Fading,
}

impl SweepKind {
    pub fn axis(self) -> &'static str {
        match self {
            SweepKind::Bler | SweepKind::Air | SweepKind::Eve => "rho_slot_db",
            SweepKind::Beta => "beta",
            SweepKind::Quant => "bits",
            SweepKind::Mismatch => "ratio",
            SweepKind::Fading => "rice_k",
        }
    }

    fn accepts(self, s: Scenario) -> bool {
        match self {
            SweepKind::Bler | SweepKind::Beta => s.is_link(),
            SweepKind::Air => s == Scenario::Air,
            SweepKind::Quant => s == Scenario::Quant,
            SweepKind::Mismatch => s == Scenario::Mismatch,
            SweepKind::Eve => s == Scenario::Eve,
            SweepKind::Fading => s == Scenario::Fading,
        }
    }
}

/// Stop a point after `max_codewords`, or earlier once `target_errors`
/// block errors have been seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_codewords: u64,
    pub target_errors: Option<u64>,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule { max_codewords: 10_000, target_errors: Some(200) }
    }
}

impl StoppingRule {
    pub fn fixed(codewords: u64) -> Self {
        StoppingRule { max_codewords: codewords, target_errors: None }
    }

    pub fn done(&self, errors: u64, trials: u64) -> bool {
        trials >= self.max_codewords || self.target_errors.is_some_and(|t| errors >= t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sweep: SweepKind,
    pub scenario: Scenario,
    /// Further link scenarios evaluated at the same points (BLER and beta
    /// sweeps only).
    pub baselines: Vec<Scenario>,
    pub k: usize,
    pub m: usize,
    pub beta: f64,
    pub sigma_c: f64,
    pub rho_slot_db: f64,
    pub grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub budgets: Vec<usize>,
    pub code_seed: u64,
    pub master_seed: u64,
    pub flat_seed: u64,
    pub stopping: StoppingRule,
    /// Proposed and B1 share channel realizations.
    pub paired: bool,
    pub repetition: usize,
    pub air_bits: usize,
    pub attack: AttackKind,
    pub gd_iters: usize,
    pub gd_step: f64,
    pub fd_epsilon: f64,
    pub gd_init_from_best: bool,
    /// Quantized runs use the exact `sigma^2 + beta |t_q|^2` denominator.
    pub exact_quantized: bool,
    pub level: f64,
    pub out: Option<PathBuf>,
}

fn range(lo: f64, step: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).map(|v| (v * 1e9).round() / 1e9).collect()
}

impl ExperimentConfig {
    /// Defaults for a sweep kind; `scenario` must be one it accepts.
    pub fn new(sweep: SweepKind, scenario: Scenario) -> Result<Self> {
        let mut cfg = ExperimentConfig {
            sweep,
            scenario,
            baselines: Vec::new(),
            k: 20,
            m: 64,
            beta: 0.3,
            sigma_c: 0.15,
            rho_slot_db: -3.0,
            grid: Vec::new(),
            sigma_grid: vec![0.20, 0.24, 0.28],
            budgets: vec![1000],
            code_seed: 1,
            master_seed: 0,
            flat_seed: 2024,
            stopping: StoppingRule::default(),
            paired: true,
            repetition: 20,
            air_bits: 200_000,
            attack: AttackKind::RandomSearch,
            gd_iters: 50,
            gd_step: 0.1,
            fd_epsilon: 1e-3,
            gd_init_from_best: false,
            exact_quantized: false,
            level: 0.95,
            out: None,
        };
        cfg.grid = match sweep {
            SweepKind::Bler => range(-8.0, 0.5, 4.0),
            SweepKind::Beta => range(0.0, 0.05, 0.4),
            SweepKind::Air => range(-10.0, 2.0, 6.0),
            SweepKind::Quant => vec![6.0, 8.0, 12.0, 16.0, 32.0],
            SweepKind::Mismatch => vec![0.5, 0.75, 1.0, 1.25, 1.5],
            SweepKind::Eve => range(-6.0, 2.0, 2.0),
            SweepKind::Fading => vec![0.0, 1.0, 3.0, 10.0, 30.0, f64::INFINITY],
        };
        match sweep {
            SweepKind::Mismatch => {
                cfg.sigma_c = 0.22;
                cfg.stopping = StoppingRule::fixed(1000);
            }
            SweepKind::Eve => cfg.stopping = StoppingRule::fixed(2000),
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.sweep.accepts(self.scenario) {
            return bad(format!("scenario '{}' cannot drive a {:?} sweep", self.scenario, self.sweep));
        }
        if let Some(b) = self.baselines.iter().find(|b| !b.is_link() || !self.scenario.is_link()) {
            return bad(format!("baseline '{b}' only combines with link scenarios"));
        }
        if self.k == 0 || self.m < 2 || !self.m.is_power_of_two() {
            return bad(format!("need k >= 1 and M a power of two >= 2, got k={} M={}", self.k, self.m));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta must be in [0, 1), got {}", self.beta));
        }
        if !(self.sigma_c > 0.0 && self.sigma_c.is_finite()) {
            return bad(format!("sigma_c must be positive, got {}", self.sigma_c));
        }
        if self.grid.is_empty() || self.grid.iter().any(|v| v.is_nan()) {
            return bad("grid must hold at least one number".into());
        }
        if self.stopping.max_codewords == 0 {
            return bad("max_codewords must be positive".into());
        }
        if self.repetition == 0 || self.air_bits == 0 {
            return bad("repetition and air_bits must be positive".into());
        }
        if self.budgets.contains(&0) {
            return bad("attack budgets must be positive".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must be in (0, 1), got {}", self.level));
        }
        match self.sweep {
            SweepKind::Beta if self.grid.iter().any(|b| !(0.0..1.0).contains(b)) => {
                bad("beta grid values must lie in [0, 1)".into())
            }
            SweepKind::Quant if self.grid.iter().any(|b| b.fract() != 0.0 || *b < 2.0 || *b > 52.0) => {
                bad("bit widths must be integers in 2..=52".into())
            }
            SweepKind::Quant if self.sigma_grid.iter().any(|s| !(*s > 0.0)) => {
                bad("sigma_grid values must be positive".into())
            }
            SweepKind::Mismatch if self.grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) => {
                bad("mismatch ratios must be positive".into())
            }
            SweepKind::Fading if self.grid.iter().any(|r| *r < 0.0) => bad("K factors must be >= 0".into()),
            _ => Ok(()),
        }
    }

    pub fn attack_budget(&self, candidates: usize) -> AttackBudget {
        AttackBudget {
            candidates,
            kind: self.attack,
            gd_iters: self.gd_iters,
            gd_step: self.gd_step,
            fd_epsilon: self.fd_epsilon,
            gd_init_from_best: self.gd_init_from_best,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let cfg_err = |what: &str| Error::Config(format!("bad value '{v}' for {what}"));
        let num = |what: &str| parse_f64(v).ok_or_else(|| cfg_err(what));
        let int = |what: &str| v.parse::<u64>().map_err(|_| cfg_err(what));
        let flag = |what: &str| match v.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            _ => Err(cfg_err(what)),
        };
        match key.trim() {
            "scenario" => {
                let list = parse_list(v, |s| s.parse::<Scenario>())?;
                let (first, rest) = list.split_first().ok_or_else(|| cfg_err("scenario"))?;
                self.scenario = *first;
                self.baselines = rest.to_vec();
            }
            "baselines" => self.baselines = parse_list(v, |s| s.parse::<Scenario>())?,
            "k" => self.k = int("k")? as usize,
            "M" | "m" => self.m = int("M")? as usize,
            "beta" => self.beta = num("beta")?,
            "sigma_c" => self.sigma_c = num("sigma_c")?,
            "rho_slot_db" => self.rho_slot_db = num("rho_slot_db")?,
            "grid" => self.grid = parse_grid(v)?,
            "sigma_grid" => self.sigma_grid = parse_grid(v)?,
            "budgets" => self.budgets = parse_list(v, |s| s.parse::<usize>().map_err(|_| cfg_err("budgets")))?,
            "code_seed" => self.code_seed = int("code_seed")?,
            "seed" | "master_seed" => self.master_seed = int("seed")?,
            "flat_seed" => self.flat_seed = int("flat_seed")?,
            "max_codewords" => self.stopping.max_codewords = int("max_codewords")?,
            "target_errors" => {
                self.stopping.target_errors = match v {
                    "none" | "off" => None,
                    _ => Some(int("target_errors")?),
                }
            }
            "paired" => self.paired = flag("paired")?,
            "repetition" => self.repetition = int("repetition")? as usize,
            "air_bits" => self.air_bits = int("air_bits")? as usize,
            "attack" => {
                self.attack = match v.to_ascii_lowercase().as_str() {
                    "random" | "random-search" | "random_search" => AttackKind::RandomSearch,
                    "gd" | "gradient" | "gradient-descent" | "gradient_descent" => AttackKind::GradientDescent,
                    _ => return Err(cfg_err("attack")),
                }
            }
            "gd_iters" => self.gd_iters = int("gd_iters")? as usize,
            "gd_step" => self.gd_step = num("gd_step")?,
            "fd_epsilon" => self.fd_epsilon = num("fd_epsilon")?,
            "gd_init_from_best" => self.gd_init_from_best = flag("gd_init_from_best")?,
            "exact_quantized" => self.exact_quantized = flag("exact_quantized")?,
            "level" => self.level = num("level")?,
            "out" => self.out = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a config file body: one `key = value` per line, `#` starts
    /// a comment, blank lines ignored. Validates the result.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        self.validate()
    }

    /// Canonical text form; parsing it back reproduces the configuration.
    pub fn to_text(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        let scen = std::iter::once(self.scenario).chain(self.baselines.iter().copied());
        let mut s = format!("# {:?} sweep over {}\n", self.sweep, self.sweep.axis());
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("scenario", scen.map(|s| s.name().to_string()).collect::<Vec<_>>().join(","));
        kv("k", self.k.to_string());
        kv("M", self.m.to_string());
        kv("beta", fmt_f64(self.beta));
        kv("sigma_c", fmt_f64(self.sigma_c));
        kv("rho_slot_db", fmt_f64(self.rho_slot_db));
        kv("grid", list(&self.grid));
        kv("sigma_grid", list(&self.sigma_grid));
        kv("budgets", self.budgets.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","));
        kv("code_seed", self.code_seed.to_string());
        kv("seed", self.master_seed.to_string());
        kv("flat_seed", self.flat_seed.to_string());
        kv("max_codewords", self.stopping.max_codewords.to_string());
        kv("target_errors", self.stopping.target_errors.map_or("none".into(), |t| t.to_string()));
        kv("paired", self.paired.to_string());
        kv("repetition", self.repetition.to_string());
        kv("air_bits", self.air_bits.to_string());
        kv(
            "attack",
            match self.attack {
                AttackKind::RandomSearch => "random-search".into(),
                AttackKind::GradientDescent => "gradient-descent".into(),
            },
        );
        kv("gd_iters", self.gd_iters.to_string());
        kv("gd_step", fmt_f64(self.gd_step));
        kv("fd_epsilon", fmt_f64(self.fd_epsilon));
        kv("gd_init_from_best", self.gd_init_from_best.to_string());
        kv("exact_quantized", self.exact_quantized.to_string());
        kv("level", fmt_f64(self.level));
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_text`]. The output
    /// path is not part of it.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x:?}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Some(f64::INFINITY),
        t => t.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(f).collect()
}

/// Comma list of numbers, or `start:step:stop` (inclusive).
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let err = || Error::Config(format!("bad grid '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, step, hi] => {
            let (lo, step, hi) =
                (parse_f64(lo).ok_or_else(err)?, parse_f64(step).ok_or_else(err)?, parse_f64(hi).ok_or_else(err)?);
            if !(step > 0.0) || hi < lo || !hi.is_finite() || (hi - lo) / step > 1e6 {
                return Err(err());
            }
            Ok(range(lo, step, hi))
        }
        [_] => {
            let v = parse_list(s, |t| parse_f64(t).ok_or_else(err))?;
            if v.is_empty() {
                Err(err())
            } else {
                Ok(v)
            }
        }
        _ => Err(err()),
    }
}
