//! Space–time rescaling of simulated paths and convergence measurement
//! against the closed-form limits.
//!
//! A path of the `n`-coalescent is rescaled to `t ↦ n^α X(t τ_n)` with
//! `τ_n = tau_const · n^β`.

use serde::{Deserialize, Serialize};

use crate::error::{regime, Error, Result};
use crate::limits::{
    c_limit, c_star_limit, gen_fun, mean_limit, spectrum_limit_tail, spectrum_limits,
};
use crate::rates::{Model, RateTable};
use crate::sim::{
    run_ensemble, BlockCountTrajectory, EnsembleSpec, EnsembleStats, Observable, SeedPolicy,
    SpectrumTrajectory,
};

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 64;
/// Default first grid time when the oracle has a pole at zero.
pub const DEFAULT_POLE_GRID_START: f64 = 0.25;
/// Normal quantile for 95% confidence half-widths.
const Z95: f64 = 1.959_963_984_540_054;

/// Space exponent `α`, time exponent `β` and the constant in `τ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescaling {
    pub alpha: f64,
    pub beta: f64,
    pub tau_const: f64,
}

impl Rescaling {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Rescaling {
            alpha,
            beta,
            tau_const: 1.0,
        }
    }

    pub fn identity() -> Self {
        Rescaling::new(0.0, 0.0)
    }

    pub fn with_tau_const(mut self, tau_const: f64) -> Self {
        self.tau_const = tau_const;
        self
    }

    /// The inverse map: `(-α, -β)` with reciprocal constant.
    pub fn inverse(&self) -> Self {
        Rescaling {
            alpha: -self.alpha,
            beta: -self.beta,
            tau_const: 1.0 / self.tau_const,
        }
    }

    /// `τ_n`.
    pub fn tau(&self, n: usize) -> f64 {
        self.tau_const * (n as f64).powf(self.beta)
    }

    /// `n^α`.
    pub fn space_factor(&self, n: usize) -> f64 {
        (n as f64).powf(self.alpha)
    }

    /// Block-count rescaling `β = (1-a)α`, `α ∈ [-1, 0)`.
    pub fn for_block_count(model: &Model, alpha: f64) -> Result<Self> {
        let r = Rescaling::new(alpha, (1.0 - model.effective_a()) * alpha);
        r.check_block_count(model)?;
        Ok(r)
    }

    /// Mean rescaling: `β = (1-a)α` when coming down from infinity,
    /// otherwise `α = -1`, `β = 0`.
    pub fn for_mean(model: &Model, alpha: f64) -> Result<Self> {
        let r = if model.comes_down_from_infinity() {
            Rescaling::new(alpha, (1.0 - model.effective_a()) * alpha)
        } else {
            Rescaling::new(alpha, 0.0)
        };
        r.check_mean(model)?;
        Ok(r)
    }

    /// Spectrum rescaling `α = -1`, `β = a - 1`.
    pub fn for_spectrum(model: &Model) -> Result<Self> {
        let r = Rescaling::new(-1.0, model.effective_a() - 1.0);
        r.check_spectrum(model)?;
        Ok(r)
    }

    fn beta_matches(&self, model: &Model) -> bool {
        let want = (1.0 - model.effective_a()) * self.alpha;
        (self.beta - want).abs() <= 1e-12 * want.abs().max(1.0)
    }

    pub fn check_block_count(&self, model: &Model) -> Result<()> {
        if !model.comes_down_from_infinity() {
            return regime(format!("{} does not come down from infinity", model.label()));
        }
        if !(self.alpha >= -1.0 && self.alpha < 0.0) {
            return regime(format!("block-count limits need alpha in [-1, 0), got {}", self.alpha));
        }
        if !self.beta_matches(model) {
            return regime(format!("block-count limits need beta = (1-a) alpha, got {}", self.beta));
        }
        Ok(())
    }

    pub fn check_mean(&self, model: &Model) -> Result<()> {
        if model.comes_down_from_infinity() {
            if self.alpha < -1.0 || !self.beta_matches(model) {
                return regime(format!(
                    "mean limits need alpha >= -1 and beta = (1-a) alpha, got ({}, {})",
                    self.alpha, self.beta
                ));
            }
        } else if self.alpha != -1.0 || self.beta != 0.0 {
            return regime(format!(
                "without coming down from infinity the mean needs alpha = -1, beta = 0, got ({}, {})",
                self.alpha, self.beta
            ));
        }
        Ok(())
    }

    pub fn check_spectrum(&self, model: &Model) -> Result<()> {
        if !model.comes_down_from_infinity() {
            return regime(format!("{} does not come down from infinity", model.label()));
        }
        if self.alpha != -1.0 || !self.beta_matches(model) {
            return regime(format!(
                "spectrum limits need alpha = -1 and beta = a - 1, got ({}, {})",
                self.alpha, self.beta
            ));
        }
        Ok(())
    }
}

/// A step function `t ↦ n^α X(t τ_n)` stored as the raw path plus the
/// accumulated rescaling, so composing with the inverse is exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub tau_const: f64,
    pub components: Vec<String>,
    raw_times: Vec<f64>,
    raw_values: Vec<Vec<f64>>,
}

impl StepFunction {
    pub fn from_block_counts(traj: &BlockCountTrajectory) -> Self {
        StepFunction {
            n: traj.n_start,
            alpha: 0.0,
            beta: 0.0,
            tau_const: 1.0,
            components: vec!["count".into()],
            raw_times: traj.events.iter().map(|e| e.0).collect(),
            raw_values: traj.events.iter().map(|e| vec![e.1 as f64]).collect(),
        }
    }

    pub fn from_spectrum(traj: &SpectrumTrajectory) -> Self {
        let mut components = vec!["count".to_string()];
        components.extend((1..=traj.d).map(|i| format!("type_{i}")));
        components.push("tail".into());
        StepFunction {
            n: traj.n_start as usize,
            alpha: 0.0,
            beta: 0.0,
            tau_const: 1.0,
            components,
            raw_times: traj.events.iter().map(|e| e.0).collect(),
            raw_values: traj
                .events
                .iter()
                .map(|(_, s)| {
                    let mut v = vec![s.block_count() as f64];
                    v.extend(s.counts.iter().map(|&c| f64::from(c)));
                    v.push(f64::from(s.tail_count));
                    v
                })
                .collect(),
        }
    }

    fn current(&self) -> Rescaling {
        Rescaling {
            alpha: self.alpha,
            beta: self.beta,
            tau_const: self.tau_const,
        }
    }

    /// Jump times and values after rescaling.
    pub fn points(&self) -> Vec<(f64, Vec<f64>)> {
        let r = self.current();
        let (tau, s) = (r.tau(self.n), r.space_factor(self.n));
        self.raw_times
            .iter()
            .zip(&self.raw_values)
            .map(|(t, v)| (t / tau, v.iter().map(|x| x * s).collect()))
            .collect()
    }

    /// Right-continuous value at rescaled time `t`.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let r = self.current();
        let clock = t * r.tau(self.n);
        let idx = self.raw_times.partition_point(|&x| x <= clock).saturating_sub(1);
        let s = r.space_factor(self.n);
        self.raw_values[idx].iter().map(|x| x * s).collect()
    }
}

/// Applies `r` on top of whatever rescaling `f` already carries.
pub fn rescale(f: &StepFunction, r: &Rescaling) -> StepFunction {
    StepFunction {
        alpha: f.alpha + r.alpha,
        beta: f.beta + r.beta,
        tau_const: f.tau_const * r.tau_const,
        ..f.clone()
    }
}

/// Oracle used for the block-count experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockCountOracle {
    /// `c(t)`, the limit for `α = -1`.
    C,
    /// `c*(t)`, the limit for `α ∈ (-1, 0)`.
    CStar,
}

impl BlockCountOracle {
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha == -1.0 {
            BlockCountOracle::C
        } else {
            BlockCountOracle::CStar
        }
    }

    fn eval(&self, model: &Model, t: f64) -> Result<f64> {
        match self {
            BlockCountOracle::C => c_limit(model, t),
            BlockCountOracle::CStar => c_star_limit(model, t),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            BlockCountOracle::C => "c",
            BlockCountOracle::CStar => "c_star",
        }
    }
}

/// Errors of one observable at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NReport {
    pub n: usize,
    /// Rescaled ensemble mean per grid point.
    pub mean: Vec<f64>,
    /// 95% confidence half-width of the rescaled mean per grid point.
    pub ci_half_width: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub sup_error: f64,
    pub sup_rel_error: f64,
    /// Largest CI half-width on the grid, on the scale of the error used
    /// for the verdict.
    pub max_ci_half_width: f64,
}

impl NReport {
    fn error(&self, relative: bool) -> f64 {
        if relative {
            self.sup_rel_error
        } else {
            self.sup_error
        }
    }
}

/// Convergence of one observable across the `n` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableReport {
    pub name: String,
    pub oracle_name: String,
    pub oracle: Vec<f64>,
    pub per_n: Vec<NReport>,
    /// Sup errors are non-increasing in `n` up to twice the CI half-width.
    pub monotone: bool,
}

impl ObservableReport {
    pub fn sup_errors(&self, relative: bool) -> Vec<f64> {
        self.per_n.iter().map(|r| r.error(relative)).collect()
    }

    pub fn final_error(&self, relative: bool) -> f64 {
        self.per_n.last().map_or(f64::NAN, |r| r.error(relative))
    }
}

/// Outcome of a convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub model: Model,
    pub rescaling: Rescaling,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    pub grid: Vec<f64>,
    /// Whether verdicts use relative sup errors.
    pub relative: bool,
    pub observables: Vec<ObservableReport>,
    /// The same ensembles scored against an oracle from a different regime.
    pub contrast: Option<ObservableReport>,
    pub tolerance: Option<f64>,
    /// Final-`n` error within tolerance for every observable, if a tolerance was set.
    pub passed: Option<bool>,
}

impl ConvergenceReport {
    pub fn empty(experiment: &str, model: Model, rescaling: Rescaling) -> Self {
        ConvergenceReport {
            experiment: experiment.into(),
            model,
            rescaling,
            n_values: vec![],
            replicates: 0,
            master_seed: 0,
            grid: vec![],
            relative: false,
            observables: vec![],
            contrast: None,
            tolerance: None,
            passed: None,
        }
    }

    pub fn observable(&self, name: &str) -> Option<&ObservableReport> {
        self.observables.iter().find(|o| o.name == name)
    }

    pub fn monotone(&self) -> bool {
        self.observables.iter().all(|o| o.monotone)
    }

    /// Sets the tolerance and recomputes the verdict.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self.passed = Some(
            self.observables
                .iter()
                .all(|o| o.final_error(self.relative) <= tol),
        );
        self
    }
}

/// Common settings of a convergence run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSettings {
    pub n_values: Vec<usize>,
    pub replicates: usize,
    /// Rescaled times.
    pub grid: Vec<f64>,
    pub seeds: SeedPolicy,
    pub threads: usize,
    pub tau_const: f64,
}

/// `k` evenly spaced points on `[t0, t1]`.
pub fn linear_grid(t0: f64, t1: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![t0],
        _ => (0..k)
            .map(|j| t0 + (t1 - t0) * j as f64 / (k - 1) as f64)
            .collect(),
    }
}

struct Target {
    name: String,
    oracle_name: String,
    column: usize,
    oracle: Vec<f64>,
}

fn score(
    target: &Target,
    per_n: &[(usize, f64, EnsembleStats)],
    relative: bool,
) -> ObservableReport {
    let reports: Vec<NReport> = per_n
        .iter()
        .map(|(n, s, st)| {
            let mean: Vec<f64> = st.mean[target.column].iter().map(|m| m * s).collect();
            let ci: Vec<f64> = st.var[target.column]
                .iter()
                .map(|v| Z95 * (v / st.replicates as f64).sqrt() * s)
                .collect();
            let abs_error: Vec<f64> = mean.iter().zip(&target.oracle).map(|(m, o)| (m - o).abs()).collect();
            let sup_error = abs_error.iter().copied().fold(0.0, f64::max);
            let sup_rel_error = abs_error
                .iter()
                .zip(&target.oracle)
                .map(|(e, o)| if *o == 0.0 { *e } else { e / o.abs() })
                .fold(0.0, f64::max);
            let max_ci = ci
                .iter()
                .zip(&target.oracle)
                .map(|(c, o)| if relative && *o != 0.0 { c / o.abs() } else { *c })
                .fold(0.0, f64::max);
            NReport {
                n: *n,
                mean,
                ci_half_width: ci,
                abs_error,
                sup_error,
                sup_rel_error,
                max_ci_half_width: max_ci,
            }
        })
        .collect();
    let monotone = reports.windows(2).all(|w| {
        let (e0, e1) = (w[0].error(relative), w[1].error(relative));
        e1 <= e0 || e1 <= 2.0 * w[1].max_ci_half_width
    });
    ObservableReport {
        name: target.name.clone(),
        oracle_name: target.oracle_name.clone(),
        oracle: target.oracle.clone(),
        per_n: reports,
        monotone,
    }
}

fn check_settings(s: &ConvergenceSettings) -> Result<()> {
    if s.n_values.is_empty() {
        return Err(Error::Config("no n values given".into()));
    }
    if s.grid.is_empty() {
        return Err(Error::Config("empty time grid".into()));
    }
    if s.replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    if !(s.tau_const > 0.0) {
        return Err(Error::Config("tau constant must be positive".into()));
    }
    Ok(())
}

/// Runs the ensembles for every `n` and returns `(n, n^α, stats)`.
fn run_all(
    model: &Model,
    r: &Rescaling,
    s: &ConvergenceSettings,
    observable: Observable,
) -> Result<Vec<(usize, f64, EnsembleStats)>> {
    let n_max = *s.n_values.iter().max().expect("checked non-empty");
    let table = RateTable::for_simulation(model, n_max)?;
    s.n_values
        .iter()
        .map(|&n| {
            let tau = r.tau(n);
            let spec = EnsembleSpec {
                n,
                observable,
                grid: s.grid.iter().map(|t| t * tau).collect(),
            };
            let stats = run_ensemble(&table, &spec, s.replicates, s.seeds.derive(n as u64), s.threads)?;
            Ok((n, r.space_factor(n), stats))
        })
        .collect()
}

fn oracle_values(grid: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
    grid.iter().map(|&t| f(t)).collect()
}

fn report_header(
    experiment: &str,
    model: &Model,
    r: Rescaling,
    s: &ConvergenceSettings,
    relative: bool,
) -> ConvergenceReport {
    ConvergenceReport {
        n_values: s.n_values.clone(),
        replicates: s.replicates,
        master_seed: s.seeds.master_seed,
        grid: s.grid.clone(),
        relative,
        ..ConvergenceReport::empty(experiment, *model, r)
    }
}

/// Rescaled block counts against `c` (for `α = -1`) or `c*` (for
/// `α ∈ (-1, 0)`). The other oracle is scored as a contrast.
pub fn converge_block_count(
    model: &Model,
    alpha: f64,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceReport> {
    converge_block_count_with_oracle(model, alpha, BlockCountOracle::for_alpha(alpha), settings)
}

/// As [`converge_block_count`] with an explicit oracle; refuses an oracle
/// from the wrong side of `α = -1`.
pub fn converge_block_count_with_oracle(
    model: &Model,
    alpha: f64,
    oracle: BlockCountOracle,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceReport> {
    check_settings(settings)?;
    let r = Rescaling::for_block_count(model, alpha)?.with_tau_const(settings.tau_const);
    if oracle != BlockCountOracle::for_alpha(alpha) {
        return Err(Error::Config(format!(
            "oracle {} does not describe the alpha = {alpha} regime",
            oracle.name()
        )));
    }
    if oracle == BlockCountOracle::CStar && settings.grid.iter().any(|&t| t < crate::limits::T_MIN) {
        return Err(Error::Config("the c_star oracle needs a grid bounded away from 0".into()));
    }
    let relative = oracle == BlockCountOracle::CStar;
    let other = match oracle {
        BlockCountOracle::C => BlockCountOracle::CStar,
        BlockCountOracle::CStar => BlockCountOracle::C,
    };
    let primary = Target {
        name: "count".into(),
        oracle_name: oracle.name().into(),
        column: 0,
        oracle: oracle_values(&settings.grid, |t| oracle.eval(model, t))?,
    };
    let runs = run_all(model, &r, settings, Observable::BlockCount)?;
    let mut report = report_header("block_count", model, r, settings, relative);
    report.observables.push(score(&primary, &runs, relative));
    if let Ok(values) = oracle_values(&settings.grid, |t| other.eval(model, t)) {
        let contrast = Target {
            name: "count".into(),
            oracle_name: other.name().into(),
            column: 0,
            oracle: values,
        };
        report.contrast = Some(score(&contrast, &runs, relative));
    }
    Ok(report)
}

/// `n^{-1} E[N_n(t)]` against `exp(-((a+b-1)/(a-1)) t)` for `a > 1`.
pub fn converge_mean_stays_infinite(
    model: &Model,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceReport> {
    check_settings(settings)?;
    if model.comes_down_from_infinity() {
        return regime(format!("{} comes down from infinity", model.label()));
    }
    let r = Rescaling::for_mean(model, -1.0)?.with_tau_const(settings.tau_const);
    let target = Target {
        name: "count".into(),
        oracle_name: "mean_exp".into(),
        column: 0,
        oracle: oracle_values(&settings.grid, |t| mean_limit(model, t, -1.0))?,
    };
    let runs = run_all(model, &r, settings, Observable::BlockCount)?;
    let mut report = report_header("mean_stays_infinite", model, r, settings, false);
    report.observables.push(score(&target, &runs, false));
    Ok(report)
}

/// Per-class spectrum densities, tail and the generating function at `x`
/// against their limits under `α = -1`, `β = a - 1`.
pub fn converge_spectrum(
    model: &Model,
    d: usize,
    gen_fun_x: f64,
    settings: &ConvergenceSettings,
) -> Result<ConvergenceReport> {
    check_settings(settings)?;
    if d == 0 {
        return Err(Error::Config("spectrum truncation d must be at least 1".into()));
    }
    let r = Rescaling::for_spectrum(model)?.with_tau_const(settings.tau_const);
    let limits: Vec<Vec<f64>> = settings
        .grid
        .iter()
        .map(|&t| spectrum_limits(model, d, t))
        .collect::<Result<_>>()?;
    let mut targets: Vec<Target> = (1..=d)
        .map(|i| Target {
            name: format!("type_{i}"),
            oracle_name: format!("c_{i}"),
            column: i,
            oracle: limits.iter().map(|l| l[i - 1]).collect(),
        })
        .collect();
    targets.push(Target {
        name: "tail".into(),
        oracle_name: "c_tail".into(),
        column: d + 1,
        oracle: oracle_values(&settings.grid, |t| spectrum_limit_tail(model, d, t))?,
    });
    targets.push(Target {
        name: "gen_fun".into(),
        oracle_name: format!("gen_fun(x={gen_fun_x})"),
        column: d + 2,
        oracle: oracle_values(&settings.grid, |t| gen_fun(model, t, gen_fun_x))?,
    });
    let runs = run_all(model, &r, settings, Observable::Spectrum { d, gen_fun_x })?;
    let mut report = report_header("spectrum", model, r, settings, false);
    report.observables = targets.iter().map(|t| score(t, &runs, false)).collect();
    Ok(report)
}
