use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use coalsim_core::rates::Model;

use crate::config::{Command, ConvergeKind, CurveName, ExperimentConfig, Format, Grid};
use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "coalsim", version, about = "Beta-coalescent rates, small-time limits and simulation")]
pub struct Cli {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for ensembles; does not change any output.
    #[arg(long, global = true, env = "COALSIM_THREADS")]
    pub threads: Option<usize>,

    /// Output file (standard output if omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Constant c in the time scale τ_n = c·n^β.
    #[arg(long, global = true)]
    pub tau_const: Option<f64>,

    /// Print the resolved configuration instead of running it.
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Kingman's coalescent instead of a beta model.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub kingman: bool,
}

impl ModelArgs {
    fn resolve(&self) -> Result<Model, CliError> {
        if self.kingman {
            return Ok(Model::Kingman);
        }
        match (self.a, self.b) {
            (Some(a), Some(b)) => Model::beta(a, b).map_err(|e| CliError::Usage(e.to_string())),
            _ => Err(CliError::Usage("give --a and --b, or --kingman".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Merger rates λ_{m,k} as `m,k,log_lambda,lambda`.
    Rates {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n_max: usize,
        /// Only this row.
        #[arg(long)]
        row: Option<usize>,
    },
    /// A limit curve on a time grid as `t,value`.
    Limits {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        curve: CurveName,
        /// Block size for spectrum curves.
        #[arg(long)]
        i: Option<usize>,
        /// Argument of the generating function.
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        /// Space exponent for the mean curve.
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value = "0:3:7")]
        t_grid: Grid,
    },
    /// Ensemble of block-counting chains.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value = "0:1:11")]
        grid: Grid,
        /// Emit the jump times of a single run instead of ensemble statistics.
        #[arg(long)]
        trajectory: bool,
    },
    /// Ensemble of block-size-spectrum chains.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        gen_fun_x: f64,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value = "0:1:11")]
        grid: Grid,
    },
    /// Convergence of rescaled ensembles to their limits.
    Converge {
        #[arg(value_enum)]
        experiment: ConvergeKind,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        gen_fun_x: f64,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, default_value = "0:3:64")]
        grid: Grid,
        /// Pass threshold on the largest-n sup error.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Self-checks of the numerical identities.
    Verify {
        /// Reduced problem sizes.
        #[arg(long)]
        quick: bool,
        /// Also run the pre-registered statistical tests of the simulator.
        #[arg(long)]
        statistical: bool,
    },
    /// Run a saved configuration.
    Run {
        config: PathBuf,
    },
}

impl Cli {
    pub fn threads(&self) -> Result<usize, CliError> {
        match self.threads {
            Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
            Some(t) => Ok(t),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// The configuration this invocation describes; flags given next to
    /// `run` override the saved values.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let run = match &self.command {
            Sub::Run { config } => {
                let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(config)?)?;
                if let Some(s) = self.seed {
                    cfg.seed = s;
                }
                if let Some(f) = self.format {
                    cfg.format = f;
                }
                if let Some(c) = self.tau_const {
                    cfg.tau_const = c;
                }
                cfg.validate()?;
                return Ok(cfg);
            }
            Sub::Rates { model, n_max, row } => Command::Rates {
                model: model.resolve()?,
                n_max: *n_max,
                row: *row,
            },
            Sub::Limits { model, curve, i, x, alpha, t_grid } => Command::Limits {
                model: model.resolve()?,
                curve: *curve,
                i: *i,
                x: *x,
                alpha: *alpha,
                grid: *t_grid,
            },
            Sub::Simulate { model, n, replicates, t_max, grid, trajectory } => Command::Simulate {
                model: model.resolve()?,
                n: *n,
                replicates: *replicates,
                t_max: *t_max,
                grid: *grid,
                trajectory: *trajectory,
            },
            Sub::Spectrum { model, n, d, gen_fun_x, replicates, t_max, grid } => Command::Spectrum {
                model: model.resolve()?,
                n: *n,
                d: *d,
                gen_fun_x: *gen_fun_x,
                replicates: *replicates,
                t_max: *t_max,
                grid: *grid,
            },
            Sub::Converge { experiment, model, alpha, d, gen_fun_x, n_list, replicates, grid, tolerance } => {
                Command::Converge {
                    experiment: *experiment,
                    model: model.resolve()?,
                    alpha: *alpha,
                    d: *d,
                    gen_fun_x: *gen_fun_x,
                    n_list: n_list.clone(),
                    replicates: *replicates,
                    grid: *grid,
                    tolerance: *tolerance,
                }
            }
            Sub::Verify { quick, statistical } => Command::Verify {
                quick: *quick,
                statistical: *statistical,
            },
        };
        let default_format = match run {
            Command::Converge { .. } => Format::Json,
            _ => Format::Csv,
        };
        // the statistical self-checks are pre-registered with their own seed
        let default_seed = match run {
            Command::Verify { .. } => coalsim_core::verify::DEFAULT_STAT_SEED,
            _ => DEFAULT_SEED,
        };
        let cfg = ExperimentConfig {
            seed: self.seed.unwrap_or(default_seed),
            tau_const: self.tau_const.unwrap_or(1.0),
            format: self.format.unwrap_or(default_format),
            run,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
