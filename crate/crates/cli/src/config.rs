//! Resolved experiment configuration and its canonical JSON form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use coalsim_core::harness::linear_grid;
use coalsim_core::rates::{BetaParams, Model};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// `t0:t1:k`, `k` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub t1: f64,
    pub points: usize,
}

impl Grid {
    pub fn times(&self) -> Vec<f64> {
        linear_grid(self.t0, self.t1, self.points)
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [t0, t1, k] = parts[..] else {
            return Err(format!("expected t0:t1:k, got {s:?}"));
        };
        let t0: f64 = t0.parse().map_err(|_| format!("bad start time {t0:?}"))?;
        let t1: f64 = t1.parse().map_err(|_| format!("bad end time {t1:?}"))?;
        let points: usize = k.parse().map_err(|_| format!("bad point count {k:?}"))?;
        if !(t0.is_finite() && t1.is_finite() && t0 >= 0.0 && t1 >= t0) {
            return Err(format!("need 0 <= t0 <= t1, got {t0}:{t1}"));
        }
        if points == 0 || (points == 1 && t1 != t0) {
            return Err(format!("need at least 2 points on [{t0}, {t1}]"));
        }
        Ok(Grid { t0, t1, points })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.t0, self.t1, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CurveName {
    C,
    Cstar,
    Mean,
    Spectrum,
    SpectrumInfty,
    Genfun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConvergeKind {
    Count,
    Mean,
    Spectrum,
}

/// Parameters of one subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Rates {
        model: Model,
        n_max: usize,
        row: Option<usize>,
    },
    Limits {
        model: Model,
        curve: CurveName,
        i: Option<usize>,
        x: Option<f64>,
        alpha: f64,
        grid: Grid,
    },
    Simulate {
        model: Model,
        n: usize,
        replicates: usize,
        t_max: Option<f64>,
        grid: Grid,
        trajectory: bool,
    },
    Spectrum {
        model: Model,
        n: usize,
        d: usize,
        gen_fun_x: f64,
        replicates: usize,
        t_max: Option<f64>,
        grid: Grid,
    },
    Converge {
        experiment: ConvergeKind,
        model: Model,
        alpha: f64,
        d: usize,
        gen_fun_x: f64,
        n_list: Vec<usize>,
        replicates: usize,
        grid: Grid,
        tolerance: Option<f64>,
    },
    Verify {
        quick: bool,
        statistical: bool,
    },
}

/// Everything that determines the bytes of a run's output. The thread count
/// is deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub tau_const: f64,
    pub format: Format,
    pub run: Command,
}

impl ExperimentConfig {
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks invariants that deserialization alone does not enforce.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tau_const > 0.0 && self.tau_const.is_finite()) {
            return Err(CliError::Usage(format!("tau constant must be positive, got {}", self.tau_const)));
        }
        let model = match &self.run {
            Command::Rates { model, .. }
            | Command::Limits { model, .. }
            | Command::Simulate { model, .. }
            | Command::Spectrum { model, .. }
            | Command::Converge { model, .. } => Some(model),
            Command::Verify { .. } => None,
        };
        if let Some(p) = model.and_then(Model::beta_params) {
            BetaParams::new(p.a(), p.b()).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: Grid = "0:3:7".parse().unwrap();
        assert_eq!(g.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(g.to_string(), "0:3:7");
        assert!("0:3".parse::<Grid>().is_err());
        assert!("3:0:4".parse::<Grid>().is_err());
        assert!("0:1:1".parse::<Grid>().is_err());
        assert_eq!("2:2:1".parse::<Grid>().unwrap().times(), vec![2.0]);
    }

    #[test]
    fn canonical_round_trip() {
        let cfg = ExperimentConfig {
            seed: 7,
            tau_const: 1.0,
            format: Format::Csv,
            run: Command::Converge {
                experiment: ConvergeKind::Count,
                model: Model::beta(0.5, 0.5).unwrap(),
                alpha: -1.0,
                d: 5,
                gen_fun_x: 0.5,
                n_list: vec![100, 1000],
                replicates: 20,
                grid: "0:3:64".parse().unwrap(),
                tolerance: Some(0.03),
            },
        };
        let text = cfg.to_canonical_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_canonical_json(), text);
    }

    #[test]
    fn rejects_bad_params_and_unknown_fields() {
        let bad = r#"{"seed":1,"tau_const":1.0,"format":"csv","run":{"command":"rates","model":{"model":"beta","a":-1.0,"b":1.0},"n_max":4,"row":null}}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let extra = r#"{"seed":1,"tau_const":1.0,"format":"csv","threads":4,"run":{"command":"verify","quick":true,"statistical":false}}"#;
        assert!(ExperimentConfig::from_json(extra).is_err());
    }
}
