//! Runs a resolved configuration and renders its output.

use serde::Serialize;
use serde_json::{json, Value};

use coalsim_core::harness::{
    converge_block_count, converge_mean_stays_infinite, converge_spectrum, ConvergenceReport,
    ConvergenceSettings,
};
use coalsim_core::limits::{CurveKind, LimitCurve};
use coalsim_core::rates::{Model, RateTable};
use coalsim_core::sim::{
    run_ensemble, simulate_block_count, EnsembleSpec, EnsembleStats, Observable, SeedPolicy,
};
use coalsim_core::verify::{self, VerifyOptions};

use crate::config::{Command, ConvergeKind, CurveName, ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::{num, Csv};

/// Rendered output: the main document, an optional companion document
/// (written next to `--out` with the given extension) and whether the run
/// counts as a failure.
pub struct Rendered {
    pub main: String,
    pub companion: Option<(&'static str, String)>,
    pub failed: bool,
}

impl Rendered {
    fn plain(main: String) -> Self {
        Rendered {
            main,
            companion: None,
            failed: false,
        }
    }
}

fn metadata(cfg: &ExperimentConfig) -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seed_policy": SeedPolicy::new(cfg.seed).describe(),
    })
}

fn pretty(doc: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

fn json_doc(cfg: &ExperimentConfig, key: &str, body: impl Serialize) -> Result<String, CliError> {
    let mut doc = metadata(cfg);
    doc[key] = serde_json::to_value(body)?;
    pretty(&doc)
}

/// CSV main document with a JSON metadata companion, or one JSON document.
fn tabular(cfg: &ExperimentConfig, csv: Csv, key: &str, body: impl Serialize) -> Result<Rendered, CliError> {
    Ok(match cfg.format {
        Format::Csv => Rendered {
            main: csv.finish(),
            companion: Some(("json", pretty(&metadata(cfg))?)),
            failed: false,
        },
        Format::Json => Rendered::plain(json_doc(cfg, key, body)?),
    })
}

pub fn execute(cfg: &ExperimentConfig, threads: usize) -> Result<Rendered, CliError> {
    let seeds = SeedPolicy::new(cfg.seed);
    match &cfg.run {
        Command::Rates { model, n_max, row } => rates(cfg, model, *n_max, *row),
        Command::Limits { model, curve, i, x, alpha, grid } => {
            let kind = curve_kind(*curve, *i, *x, *alpha)?;
            let curve = LimitCurve::new(*model, kind);
            let mut csv = Csv::new(&["t", "value"]);
            let mut rows = Vec::new();
            for t in grid.times() {
                let v = curve.eval(t)?;
                csv.row([num(t), num(v)]);
                rows.push((t, v));
            }
            tabular(cfg, csv, "curve", rows)
        }
        Command::Simulate { model, n, replicates, t_max, grid, trajectory } => {
            let table = RateTable::for_simulation(model, *n)?;
            if *trajectory {
                let tr = simulate_block_count(&table, *n, *t_max, &mut seeds.rng(0))?;
                let mut csv = Csv::new(&["t", "count"]);
                for (t, m) in &tr.events {
                    csv.row([num(*t), m.to_string()]);
                }
                return tabular(cfg, csv, "trajectory", &tr);
            }
            let spec = EnsembleSpec {
                n: *n,
                observable: Observable::BlockCount,
                grid: clip(grid.times(), *t_max),
            };
            let stats = run_ensemble(&table, &spec, *replicates, seeds, threads)?;
            ensemble(cfg, &stats, 0)
        }
        Command::Spectrum { model, n, d, gen_fun_x, replicates, t_max, grid } => {
            let table = RateTable::for_simulation(model, *n)?;
            let spec = EnsembleSpec {
                n: *n,
                observable: Observable::Spectrum { d: *d, gen_fun_x: *gen_fun_x },
                grid: clip(grid.times(), *t_max),
            };
            let stats = run_ensemble(&table, &spec, *replicates, seeds, threads)?;
            ensemble(cfg, &stats, *d)
        }
        Command::Converge { experiment, model, alpha, d, gen_fun_x, n_list, replicates, grid, tolerance } => {
            let settings = ConvergenceSettings {
                n_values: n_list.clone(),
                replicates: *replicates,
                grid: grid.times(),
                seeds,
                threads,
                tau_const: cfg.tau_const,
            };
            let mut report = match experiment {
                ConvergeKind::Count => converge_block_count(model, *alpha, &settings)?,
                ConvergeKind::Mean if model.comes_down_from_infinity() => {
                    converge_block_count(model, *alpha, &settings)?
                }
                ConvergeKind::Mean => converge_mean_stays_infinite(model, &settings)?,
                ConvergeKind::Spectrum => converge_spectrum(model, *d, *gen_fun_x, &settings)?,
            };
            if let Some(tol) = tolerance {
                report = report.with_tolerance(*tol);
            }
            converge(cfg, &report)
        }
        Command::Verify { quick, statistical } => {
            let results = verify::run(&VerifyOptions {
                quick: *quick,
                statistical: *statistical,
                seed: cfg.seed,
                threads,
            });
            let failed = results.iter().any(|r| !r.passed);
            let main = match cfg.format {
                Format::Json => json_doc(cfg, "checks", &results)?,
                Format::Csv => {
                    let mut s = String::new();
                    for r in &results {
                        let tag = if r.passed { "PASS" } else { "FAIL" };
                        s.push_str(&format!("{tag} {}: {}\n", r.name, r.detail));
                    }
                    s
                }
            };
            Ok(Rendered {
                main,
                companion: None,
                failed,
            })
        }
    }
}

fn clip(mut grid: Vec<f64>, t_max: Option<f64>) -> Vec<f64> {
    if let Some(t) = t_max {
        grid.retain(|&g| g <= t);
    }
    grid
}

fn curve_kind(curve: CurveName, i: Option<usize>, x: Option<f64>, alpha: f64) -> Result<CurveKind, CliError> {
    let need_i = || i.ok_or_else(|| CliError::Usage("this curve needs --i".into()));
    Ok(match curve {
        CurveName::C => CurveKind::C,
        CurveName::Cstar => CurveKind::CStar,
        CurveName::Mean => CurveKind::Mean { alpha },
        CurveName::Spectrum => CurveKind::Spectrum { i: need_i()? },
        CurveName::SpectrumInfty => CurveKind::SpectrumInfty { i: need_i()? },
        CurveName::Genfun => CurveKind::GenFun {
            x: x.ok_or_else(|| CliError::Usage("the genfun curve needs --x".into()))?,
        },
    })
}

#[derive(Serialize)]
struct RateRow {
    m: usize,
    k: usize,
    log_lambda: f64,
    lambda: f64,
}

fn rates(cfg: &ExperimentConfig, model: &Model, n_max: usize, row: Option<usize>) -> Result<Rendered, CliError> {
    if n_max < 2 {
        return Err(CliError::Usage("--n-max must be at least 2".into()));
    }
    let rows = match row {
        Some(m) if !(2..=n_max).contains(&m) => {
            return Err(CliError::Usage(format!("--row must lie in 2..={n_max}")))
        }
        Some(m) => m..=m,
        None => 2..=n_max,
    };
    let table = RateTable::for_simulation(model, n_max)?;
    let mut csv = Csv::new(&["m", "k", "log_lambda", "lambda"]);
    let mut out = Vec::new();
    for m in rows {
        for (j, &ln) in table.ln_row(m)?.iter().enumerate() {
            let k = j + 2;
            let lambda = ln.exp();
            let shown = if lambda == 0.0 { String::new() } else { num(lambda) };
            csv.row([m.to_string(), k.to_string(), num(ln), shown]);
            out.push(RateRow { m, k, log_lambda: ln, lambda });
        }
    }
    tabular(cfg, csv, "rates", out)
}

fn ensemble(cfg: &ExperimentConfig, stats: &EnsembleStats, d: usize) -> Result<Rendered, CliError> {
    let mut header = vec!["t".to_string(), "mean_count".into(), "var_count".into()];
    header.extend((1..=d).map(|i| format!("mean_type_{i}")));
    if d > 0 {
        header.push("mean_tail".into());
    }
    let mut csv = Csv::new(&header);
    for (j, t) in stats.grid.iter().enumerate() {
        let mut row = vec![num(*t), num(stats.mean[0][j]), num(stats.var[0][j])];
        if d > 0 {
            row.extend((1..=d + 1).map(|c| num(stats.mean[c][j])));
        }
        csv.row(row);
    }
    tabular(cfg, csv, "ensemble", stats)
}

fn converge(cfg: &ExperimentConfig, report: &ConvergenceReport) -> Result<Rendered, CliError> {
    let mut csv = Csv::new(&["observable", "oracle", "n", "t", "mean", "limit", "abs_error", "ci_half_width"]);
    for obs in report.observables.iter().chain(&report.contrast) {
        for r in &obs.per_n {
            for (j, t) in report.grid.iter().enumerate() {
                csv.row([
                    obs.name.clone(),
                    obs.oracle_name.clone(),
                    r.n.to_string(),
                    num(*t),
                    num(r.mean[j]),
                    num(obs.oracle[j]),
                    num(r.abs_error[j]),
                    num(r.ci_half_width[j]),
                ]);
            }
        }
    }
    let json = json_doc(cfg, "report", report)?;
    Ok(match cfg.format {
        Format::Json => Rendered {
            main: json,
            companion: Some(("csv", csv.finish())),
            failed: false,
        },
        Format::Csv => Rendered {
            main: csv.finish(),
            companion: Some(("json", json)),
            failed: false,
        },
    })
}
