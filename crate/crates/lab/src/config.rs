//! Experiment configuration: a flat `key = value` file with `#` comments,
//! overridden by command-line flags.
//!
//! Keys: `p`, `n_grid`, `delta`, `epsilon`, `budgets`, `intervals`, `seed`,
//! `out`, `threads`. Lists are comma separated; `intervals` holds `a:b`
//! pairs of log₂-eigenvalue bounds added to the Berry–Esseen table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub base_probs: Vec<f64>,
    pub n_grid: Vec<u64>,
    pub deltas: Vec<f64>,
    /// Error targets; each command has its own default when empty.
    pub epsilons: Vec<f64>,
    /// Explicit budgets for the communication sweep, in addition to the
    /// searched minimum.
    pub budgets: Vec<u32>,
    pub intervals: Vec<(f64, f64)>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            base_probs: vec![0.75, 0.25],
            n_grid: vec![64, 256, 1024, 4096],
            deltas: vec![0.95],
            epsilons: Vec::new(),
            budgets: Vec::new(),
            intervals: Vec::new(),
            seed: 1,
            out_dir: PathBuf::from("out"),
            threads: 1,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub n_grid: Option<String>,
    pub p: Option<String>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| LabError::Config(format!("{key}: cannot parse {s:?}"))))
        .collect()
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| LabError::Config(format!("{key}: cannot parse {value:?}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(LabError::io(path))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "p" => self.base_probs = list(key, value)?,
            "n_grid" => self.n_grid = list(key, value)?,
            "delta" => self.deltas = list(key, value)?,
            "epsilon" => self.epsilons = list(key, value)?,
            "budgets" => self.budgets = list(key, value)?,
            "intervals" => {
                self.intervals = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|pair| {
                        let (a, b) = pair
                            .split_once(':')
                            .ok_or_else(|| LabError::Config(format!("intervals: expected a:b, got {pair:?}")))?;
                        Ok((scalar(key, a)?, scalar(key, b)?))
                    })
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = scalar(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "threads" => self.threads = scalar(key, value)?,
            _ => return Err(LabError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out_dir = p.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(g) = &o.n_grid {
            self.set("n_grid", g)?;
        }
        if let Some(p) = &o.p {
            self.set("p", p)?;
        }
        if let Some(e) = o.epsilon {
            self.epsilons = vec![e];
        }
        if let Some(d) = o.delta {
            self.deltas = vec![d];
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let ascending = |v: &[u64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.n_grid.is_empty() || !ascending(&self.n_grid) || self.n_grid[0] == 0 {
            return Err(LabError::Config("n_grid must be nonempty, positive and strictly ascending".into()));
        }
        if self.base_probs.is_empty() {
            return Err(LabError::Config("p must be nonempty".into()));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(LabError::Config("delta values must lie in (0, 1]".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 2.0)) {
            return Err(LabError::Config("epsilon values must lie in (0, 2)".into()));
        }
        if self.threads == 0 {
            return Err(LabError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn epsilons_or(&self, default: f64) -> Vec<f64> {
        if self.epsilons.is_empty() {
            vec![default]
        } else {
            self.epsilons.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_overrides() {
        let text = "# sweep\np = 0.6, 0.4\nn_grid = 10,20 # short\nseed = 7\nintervals = -3:-1\n";
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.base_probs, vec![0.6, 0.4]);
        assert_eq!(cfg.n_grid, vec![10, 20]);
        assert_eq!(cfg.intervals, vec![(-3.0, -1.0)]);
        cfg.apply(&Overrides { seed: Some(9), epsilon: Some(0.1), ..Default::default() }).unwrap();
        assert_eq!((cfg.seed, cfg.epsilons.clone()), (9, vec![0.1]));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("n_grid = a").is_err());
        let cfg = ExperimentConfig::parse("n_grid = 20, 10").unwrap();
        assert!(cfg.validate().is_err());
    }
}
