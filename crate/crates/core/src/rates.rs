//! Merger rates of the beta(a, b)-coalescent and the moment functionals of
//! the block-loss rate.
//!
//! Any `k` specific blocks among `m` merge at rate
//! `λ_{m,k} = a↑(k-2) b↑(m-k) / (a+b)↑(m-2)`. Kingman's coalescent is a
//! separate [`Model`] variant with `λ_{m,2} = 1` and no multiple mergers.

use serde::{Deserialize, Serialize};

use crate::error::{domain, regime, Error, Result};
use crate::specfun::{ln_binomial, ln_gamma, rising, LogValue};

/// Default bound on the number of stored rates in a dense table (128 MiB).
pub const DEFAULT_ENTRY_BUDGET: usize = 1 << 24;

/// Rows between re-anchoring the across-row recursion on a direct evaluation.
const REANCHOR_EVERY: usize = 32;

/// Parameters of a beta(a, b) measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return domain(format!("beta parameters must be positive, got a={a}, b={b}"));
        }
        Ok(BetaParams { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn comes_down_from_infinity(&self) -> bool {
        self.a < 1.0
    }

    /// Rejects the points `a ∈ {1, 2}` where the moment asymptotics change form.
    pub fn require_generic(&self) -> Result<()> {
        if self.a == 1.0 || self.a == 2.0 {
            return domain(format!(
                "a = {} is excluded from the moment asymptotics",
                self.a
            ));
        }
        Ok(())
    }

    pub fn lambda(&self, m: u64, k: u64) -> Result<LogValue> {
        check_mk(m, k)?;
        Ok(LogValue::positive(self.ln_lambda_unchecked(m, k)))
    }

    fn ln_lambda_unchecked(&self, m: u64, k: u64) -> f64 {
        let (a, b) = (self.a, self.b);
        rising(a, k - 2).ln_abs + rising(b, m - k).ln_abs - rising(a + b, m - 2).ln_abs
    }
}

/// A coalescent model: beta(a, b) or Kingman.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    Beta(BetaParams),
    Kingman,
}

impl Model {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        Ok(Model::Beta(BetaParams::new(a, b)?))
    }

    pub fn comes_down_from_infinity(&self) -> bool {
        match self {
            Model::Beta(p) => p.comes_down_from_infinity(),
            Model::Kingman => true,
        }
    }

    /// The exponent `a` that enters the limit formulas; Kingman behaves as `a = 0`.
    pub fn effective_a(&self) -> f64 {
        match self {
            Model::Beta(p) => p.a,
            Model::Kingman => 0.0,
        }
    }

    pub fn beta_params(&self) -> Option<BetaParams> {
        match self {
            Model::Beta(p) => Some(*p),
            Model::Kingman => None,
        }
    }

    /// Rate at which a given set of `k` out of `m` blocks merges.
    pub fn lambda(&self, m: u64, k: u64) -> Result<LogValue> {
        match self {
            Model::Beta(p) => p.lambda(m, k),
            Model::Kingman => {
                check_mk(m, k)?;
                Ok(if k == 2 { LogValue::ONE } else { LogValue::ZERO })
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Model::Beta(p) => format!("beta({}, {})", p.a, p.b),
            Model::Kingman => "kingman".to_string(),
        }
    }
}

fn check_mk(m: u64, k: u64) -> Result<()> {
    if k < 2 || k > m {
        return domain(format!("rate index requires 2 <= k <= m, got m={m}, k={k}"));
    }
    Ok(())
}

/// Rate λ_{m,k} as a log-space value.
pub fn lambda(model: &Model, m: u64, k: u64) -> Result<LogValue> {
    model.lambda(m, k)
}

/// `λ_{m,k+1} / λ_{m,k}`.
#[inline]
fn in_row_ratio(p: &BetaParams, m: u64, k: u64) -> f64 {
    (p.a + k as f64 - 2.0) / (p.b + (m - k) as f64 - 1.0)
}

/// `C(m,l+1) λ_{m,l+1} / (C(m,l) λ_{m,l})`.
#[inline]
fn weight_ratio(p: &BetaParams, m: u64, l: u64) -> f64 {
    (m - l) as f64 / (l + 1) as f64 * in_row_ratio(p, m, l)
}

/// `ln (C(m,2) λ_{m,2})`.
fn ln_head_weight(p: &BetaParams, m: u64) -> f64 {
    let mf = m as f64;
    (mf * (mf - 1.0) / 2.0).ln() + p.ln_lambda_unchecked(m, 2)
}

/// `ln Σ_{l=2}^m C(m,l) λ_{m,l} f(l)` for a positive weight function `f`,
/// summed term by term.
fn ln_weighted_row_sum(p: &BetaParams, m: u64, f: impl Fn(u64) -> f64) -> f64 {
    let mut w = 1.0f64;
    let mut scale = ln_head_weight(p, m);
    let mut sum = 0.0f64;
    for l in 2..=m {
        sum += w * f(l);
        if l < m {
            w *= weight_ratio(p, m, l);
            if w > 1e250 {
                scale += w.ln();
                sum /= w;
                w = 1.0;
            }
        }
    }
    scale + sum.ln()
}

#[derive(Debug, Clone)]
enum Storage {
    /// Log-rates, row `m` at offset `(m-2)(m-1)/2`.
    Dense(Vec<f64>),
    /// Rates are recomputed from the closed form on demand.
    Compact,
}

/// Merger rates and total jump rates up to a fixed number of blocks.
#[derive(Debug, Clone)]
pub struct RateTable {
    model: Model,
    n_max: usize,
    storage: Storage,
    /// `ln Σ_k C(m,k) λ_{m,k}`, indexed by `m`; entries 0 and 1 are unused.
    ln_row_totals: Vec<f64>,
}

/// Dense rate table using the recursions, within the default memory budget.
pub fn build_rate_table(model: &Model, n_max: usize) -> Result<RateTable> {
    RateTable::dense(model, n_max, DEFAULT_ENTRY_BUDGET)
}

fn dense_offset(m: usize) -> usize {
    (m - 2) * (m - 1) / 2
}

impl RateTable {
    /// Builds a table that stores every `λ_{m,k}`; fails if the triangle has
    /// more than `budget` entries.
    pub fn dense(model: &Model, n_max: usize, budget: usize) -> Result<Self> {
        if n_max < 2 {
            return domain(format!("rate table needs n_max >= 2, got {n_max}"));
        }
        let entries = dense_offset(n_max + 1);
        if entries > budget {
            return Err(Error::Resource(format!(
                "dense rate table for n_max={n_max} needs {entries} entries, budget is {budget}"
            )));
        }
        let mut logs = Vec::with_capacity(entries);
        match model {
            Model::Kingman => {
                for m in 2..=n_max {
                    logs.push(0.0);
                    logs.extend(std::iter::repeat_n(f64::NEG_INFINITY, m - 2));
                }
            }
            Model::Beta(p) => {
                let mut head = 0.0f64;
                for m in 2..=n_max {
                    let mu = m as u64;
                    if m > 2 {
                        // λ_{m,2} from λ_{m-1,2}.
                        head += ((p.b + (m - 3) as f64) / (p.a + p.b + (m - 3) as f64)).ln();
                    }
                    if (m - 2) % REANCHOR_EVERY == 0 {
                        head = p.ln_lambda_unchecked(mu, 2);
                    }
                    let mut v = head;
                    logs.push(v);
                    for k in 2..mu {
                        v += in_row_ratio(p, mu, k).ln();
                        logs.push(v);
                    }
                }
            }
        }
        let mut table = RateTable {
            model: *model,
            n_max,
            storage: Storage::Dense(logs),
            ln_row_totals: Vec::new(),
        };
        table.fill_row_totals();
        Ok(table)
    }

    /// Builds a table that keeps only the row totals; individual rates come
    /// from the closed form. Suitable for simulation at large `n`.
    pub fn compact(model: &Model, n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return domain(format!("rate table needs n_max >= 2, got {n_max}"));
        }
        let mut table = RateTable {
            model: *model,
            n_max,
            storage: Storage::Compact,
            ln_row_totals: Vec::new(),
        };
        table.fill_row_totals();
        Ok(table)
    }

    /// Dense when it fits the default budget, compact otherwise.
    pub fn for_simulation(model: &Model, n_max: usize) -> Result<Self> {
        match Self::dense(model, n_max, DEFAULT_ENTRY_BUDGET) {
            Err(Error::Resource(_)) => Self::compact(model, n_max),
            other => other,
        }
    }

    fn fill_row_totals(&mut self) {
        let mut totals = vec![f64::NAN; self.n_max + 1];
        for (m, slot) in totals.iter_mut().enumerate().skip(2) {
            *slot = match &self.model {
                Model::Kingman => ((m * (m - 1)) as f64 / 2.0).ln(),
                Model::Beta(p) => ln_weighted_row_sum(p, m as u64, |_| 1.0),
            };
        }
        self.ln_row_totals = totals;
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    fn check_row(&self, m: usize) -> Result<()> {
        if m < 2 || m > self.n_max {
            return domain(format!(
                "row {m} outside the table range 2..={}",
                self.n_max
            ));
        }
        Ok(())
    }

    /// `ln λ_{m,k}`; `-inf` for Kingman multiple mergers.
    pub fn ln_lambda(&self, m: usize, k: usize) -> Result<f64> {
        self.check_row(m)?;
        check_mk(m as u64, k as u64)?;
        Ok(match &self.storage {
            Storage::Dense(logs) => logs[dense_offset(m) + k - 2],
            Storage::Compact => match &self.model {
                Model::Beta(p) => p.ln_lambda_unchecked(m as u64, k as u64),
                Model::Kingman => {
                    if k == 2 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                }
            },
        })
    }

    pub fn lambda(&self, m: usize, k: usize) -> Result<LogValue> {
        let v = self.ln_lambda(m, k)?;
        Ok(if v == f64::NEG_INFINITY {
            LogValue::ZERO
        } else {
            LogValue::positive(v)
        })
    }

    /// `ln λ_{m,k}` for `k = 2..=m`.
    pub fn ln_row(&self, m: usize) -> Result<Vec<f64>> {
        self.check_row(m)?;
        Ok(match &self.storage {
            Storage::Dense(logs) => logs[dense_offset(m)..dense_offset(m + 1)].to_vec(),
            Storage::Compact => (2..=m).map(|k| self.ln_lambda(m, k).unwrap()).collect(),
        })
    }

    /// Logarithm of the total jump rate out of a state with `m` blocks.
    pub fn ln_row_total(&self, m: usize) -> Result<f64> {
        self.check_row(m)?;
        Ok(self.ln_row_totals[m])
    }

    pub fn row_total(&self, m: usize) -> Result<f64> {
        Ok(self.ln_row_total(m)?.exp())
    }

    /// Draws a merger size from the row-`m` merger-size distribution by
    /// sequential inversion of `u ∈ [0, 1)`.
    pub fn sample_merger_size(&self, m: usize, u: f64) -> usize {
        debug_assert!(m >= 2 && m <= self.n_max);
        let p = match &self.model {
            Model::Kingman => return 2,
            Model::Beta(p) => p,
        };
        if m == 2 {
            return 2;
        }
        let mu = m as u64;
        let ln_w2 = ln_head_weight(p, mu) - self.ln_row_totals[m];
        if ln_w2 < -700.0 {
            return sample_from_pmf(&merger_size_pmf_beta(p, mu, self.ln_row_totals[m]), u);
        }
        let mut w = ln_w2.exp();
        let mut cum = 0.0;
        for l in 2..mu {
            cum += w;
            if u < cum {
                return l as usize;
            }
            w *= weight_ratio(p, mu, l);
        }
        m
    }
}

fn sample_from_pmf(pmf: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (j, q) in pmf.iter().enumerate() {
        cum += q;
        if u < cum {
            return j + 2;
        }
    }
    pmf.len() + 1
}

fn merger_size_pmf_beta(p: &BetaParams, m: u64, ln_total: f64) -> Vec<f64> {
    let mut ln_w = ln_head_weight(p, m) - ln_total;
    let mut out = Vec::with_capacity(m as usize - 1);
    for l in 2..=m {
        out.push(ln_w.exp());
        if l < m {
            ln_w += weight_ratio(p, m, l).ln();
        }
    }
    out
}

/// Distribution of the number of blocks taking part in the next merger from
/// `m` blocks; entry `j` is the probability of merging `j + 2` blocks.
pub fn merger_size_pmf(table: &RateTable, m: usize) -> Result<Vec<f64>> {
    table.check_row(m)?;
    let mut pmf = match table.model() {
        Model::Kingman => {
            let mut v = vec![0.0; m - 1];
            v[0] = 1.0;
            return Ok(v);
        }
        Model::Beta(p) => merger_size_pmf_beta(p, m as u64, table.ln_row_totals[m]),
    };
    let s: f64 = pmf.iter().sum();
    for q in &mut pmf {
        *q /= s;
    }
    Ok(pmf)
}

/// Power `(l-1)^k` or falling `l↓k` weighting in a moment functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentKind {
    Power,
    Falling,
}

/// `γ_n^{(k)}` for k = 0..=3 and `γ_n^{(k̲)}` for k = 1..=3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaMoments {
    pub n: u64,
    pub gamma: [f64; 4],
    pub gamma_falling: [f64; 3],
}

impl GammaMoments {
    /// Exact values from the closed forms.
    pub fn closed_form(p: &BetaParams, n: u64) -> Result<Self> {
        check_moment_args(p, n)?;
        let (a, b) = (p.a, p.b);
        let nf = n as f64;
        // b↑(n-1) / (a+b)↑(n-2)
        let r2 = (rising(b, n - 1).ln_abs - rising(a + b, n - 2).ln_abs).exp();
        let g0 = ((a + b - 1.0) * (a + b - 2.0) + r2 * ((1.0 - a) * nf + 1.0 - b))
            / ((1.0 - a) * (2.0 - a));
        let f1 = nf * ((a + b - 1.0) - r2) / (a - 1.0);
        let f2 = nf * (nf - 1.0);
        let f3 = a * nf * (nf - 1.0) * (nf - 2.0) / (a + b);
        let g1 = f1 - g0;
        let g2 = f2 - g1;
        // (l-1)^3 = l↓3 + (l-1)
        let g3 = f3 + g1;
        Ok(GammaMoments {
            n,
            gamma: [g0, g1, g2, g3],
            gamma_falling: [f1, f2, f3],
        })
    }

    /// Reference values by summing `C(n,l) λ_{n,l} f(l)` over all `l`.
    pub fn direct(p: &BetaParams, n: u64) -> Result<Self> {
        check_moment_args(p, n)?;
        let s = |f: &dyn Fn(u64) -> f64| ln_weighted_row_sum(p, n, f).exp();
        Ok(GammaMoments {
            n,
            gamma: [
                s(&|_| 1.0),
                s(&|l| (l - 1) as f64),
                s(&|l| ((l - 1) as f64).powi(2)),
                s(&|l| ((l - 1) as f64).powi(3)),
            ],
            gamma_falling: [
                s(&|l| l as f64),
                s(&|l| (l * (l - 1)) as f64),
                s(&|l| (l * (l - 1) * (l - 2)) as f64),
            ],
        })
    }

    pub fn get(&self, k: usize, kind: MomentKind) -> f64 {
        match (kind, k) {
            (MomentKind::Power, _) => self.gamma[k],
            (MomentKind::Falling, 0) => self.gamma[0],
            (MomentKind::Falling, _) => self.gamma_falling[k - 1],
        }
    }
}

fn check_moment_args(p: &BetaParams, n: u64) -> Result<()> {
    p.require_generic()?;
    if n < 2 {
        return domain(format!("moment functionals need n >= 2, got {n}"));
    }
    Ok(())
}

/// Closed-form moment functional `γ_n^{(k)}` or `γ_n^{(k̲)}`.
pub fn gamma_moment(p: &BetaParams, n: u64, k: usize, kind: MomentKind) -> Result<f64> {
    if k > 3 {
        return domain(format!("moment order must be at most 3, got {k}"));
    }
    Ok(GammaMoments::closed_form(p, n)?.get(k, kind))
}

/// Leading behaviour `γ_n^{(k)} ~ C n^p`, returned as `(C, p)`.
pub fn gamma_asymptotic_constant(p: &BetaParams, k: usize) -> Result<(f64, f64)> {
    p.require_generic()?;
    let (a, b) = (p.a, p.b);
    let k_const = || (ln_gamma(a + b) - ln_gamma(b)).exp() / (2.0 - a);
    match k {
        0 if a < 2.0 => Ok((k_const(), 2.0 - a)),
        0 => Ok(((a + b - 1.0) * (a + b - 2.0) / ((a - 1.0) * (a - 2.0)), 0.0)),
        1 if a < 1.0 => Ok((k_const() / (1.0 - a), 2.0 - a)),
        1 => Ok(((a + b - 1.0) / (a - 1.0), 1.0)),
        2 => Ok((1.0, 2.0)),
        3 => Ok((a / (a + b), 3.0)),
        _ => domain(format!("no asymptotic constant for moment order {k}")),
    }
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_binomial(n, k)
}

/// Reports whether `(a, b)` gives a process that never comes down from
/// infinity, i.e. the mean-field regime with `a > 1`.
pub fn require_cdi(model: &Model) -> Result<()> {
    if model.comes_down_from_infinity() {
        Ok(())
    } else {
        regime(format!(
            "{} does not come down from infinity (needs a < 1)",
            model.label()
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    fn factorial(n: u64) -> f64 {
        (1..=n).map(|j| j as f64).product()
    }

    #[test]
    fn small_rates() {
        let bs = Model::beta(1.0, 1.0).unwrap();
        assert!(rel(bs.lambda(4, 3).unwrap().to_f64(), 1.0 / 6.0) < 1e-14);
        let arc = Model::beta(0.5, 0.5).unwrap();
        assert!(rel(arc.lambda(3, 2).unwrap().to_f64(), 0.5) < 1e-14);
        for m in [Model::beta(0.3, 2.0).unwrap(), Model::Kingman] {
            assert_eq!(m.lambda(2, 2).unwrap().to_f64(), 1.0);
        }
        assert!(bs.lambda(3, 1).is_err());
        assert!(bs.lambda(3, 4).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -1.0).is_err());
        let p = BetaParams::new(0.7, 1.0).unwrap();
        assert!(p.comes_down_from_infinity());
        assert!(!BetaParams::new(1.5, 1.0).unwrap().comes_down_from_infinity());
        assert!(BetaParams::new(1.0, 1.0).unwrap().require_generic().is_err());
        assert!(BetaParams::new(2.0, 1.0).unwrap().require_generic().is_err());
    }

    #[test]
    fn bolthausen_sznitman_row() {
        let t = build_rate_table(&Model::beta(1.0, 1.0).unwrap(), 5).unwrap();
        for k in 2..=5u64 {
            let want = factorial(k - 2) * factorial(5 - k) / 24.0;
            assert!(rel(t.lambda(5, k as usize).unwrap().to_f64(), want) < 1e-14);
        }
    }

    #[test]
    fn trivial_table() {
        let t = build_rate_table(&Model::beta(0.4, 3.0).unwrap(), 2).unwrap();
        assert_eq!(t.lambda(2, 2).unwrap().to_f64(), 1.0);
        assert!(rel(t.row_total(2).unwrap(), 1.0) < 1e-15);
    }

    #[test]
    fn dense_and_compact_agree() {
        let model = Model::beta(0.5, 0.5).unwrap();
        let d = build_rate_table(&model, 200).unwrap();
        let c = RateTable::compact(&model, 200).unwrap();
        assert!(!c.is_dense());
        for k in 2..=200 {
            let x = d.ln_lambda(200, k).unwrap();
            let y = c.ln_lambda(200, k).unwrap();
            assert!((x - y).abs() < 1e-10, "k={k}");
        }
        assert_eq!(d.ln_row_total(150).unwrap(), c.ln_row_total(150).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let model = Model::beta(0.5, 0.5).unwrap();
        assert!(matches!(
            RateTable::dense(&model, 1000, 1000),
            Err(Error::Resource(_))
        ));
        assert!(!RateTable::for_simulation(&model, 10_000).unwrap().is_dense());
    }

    #[test]
    fn pmf_examples() {
        let t = build_rate_table(&Model::beta(1.0, 1.0).unwrap(), 10).unwrap();
        assert_eq!(merger_size_pmf(&t, 2).unwrap(), vec![1.0]);
        let p3 = merger_size_pmf(&t, 3).unwrap();
        assert!((p3[0] - 0.75).abs() < 1e-14 && (p3[1] - 0.25).abs() < 1e-14);
        assert!(merger_size_pmf(&t, 11).is_err());

        let t = build_rate_table(&Model::beta(0.5, 0.5).unwrap(), 50).unwrap();
        let pmf = merger_size_pmf(&t, 50).unwrap();
        let brute: Vec<f64> = (2..=50u64)
            .map(|l| (ln_choose(50, l) + t.ln_lambda(50, l as usize).unwrap()).exp())
            .collect();
        let s: f64 = brute.iter().sum();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (q, r) in pmf.iter().zip(&brute) {
            assert!(rel(*q, r / s) < 1e-10);
        }
    }

    #[test]
    fn sampler_inverts_pmf() {
        let t = build_rate_table(&Model::beta(0.5, 0.5).unwrap(), 30).unwrap();
        let pmf = merger_size_pmf(&t, 30).unwrap();
        let mut cum = 0.0;
        for (j, q) in pmf.iter().enumerate().take(10) {
            assert_eq!(t.sample_merger_size(30, cum + 0.5 * q), j + 2);
            cum += q;
        }
        let k = build_rate_table(&Model::Kingman, 30).unwrap();
        assert_eq!(k.sample_merger_size(30, 0.999), 2);
    }

    #[test]
    fn rows_decrease_only_away_from_the_last_entry() {
        // λ_{m,m} / λ_{m,m-1} = (a+m-3)/b, so rows turn upward at the end.
        let t = build_rate_table(&Model::beta(0.5, 0.5).unwrap(), 20).unwrap();
        let row = t.ln_row(20).unwrap();
        assert!(row[..9].windows(2).all(|w| w[1] < w[0]));
        assert!(row[18] > row[17]);
        let t = build_rate_table(&Model::beta(0.5, 0.1).unwrap(), 3).unwrap();
        assert!(t.ln_lambda(3, 3).unwrap() > t.ln_lambda(3, 2).unwrap());
    }

    #[test]
    fn kingman_table() {
        let t = build_rate_table(&Model::Kingman, 10).unwrap();
        assert!(t.lambda(10, 3).unwrap().is_zero());
        assert!(rel(t.row_total(10).unwrap(), 45.0) < 1e-14);
    }

    #[test]
    fn gamma_two_falling_is_exact() {
        let p = BetaParams::new(0.5, 0.5).unwrap();
        for n in [2u64, 3, 17, 1000] {
            let g = gamma_moment(&p, n, 2, MomentKind::Falling).unwrap();
            assert!(rel(g, (n * (n - 1)) as f64) < 1e-15);
        }
    }

    #[test]
    fn gamma_closed_forms_match_direct_sum() {
        for (a, b) in [(0.5, 0.5), (0.3, 2.0), (1.5, 0.5), (3.0, 1.0), (2.6, 0.2)] {
            let p = BetaParams::new(a, b).unwrap();
            for n in [2u64, 3, 10, 100, 1000] {
                let c = GammaMoments::closed_form(&p, n).unwrap();
                let d = GammaMoments::direct(&p, n).unwrap();
                for k in 0..4 {
                    assert!(rel(c.gamma[k], d.gamma[k]) < 1e-10, "a={a} b={b} n={n} k={k}");
                }
                for k in 0..3 {
                    assert!(rel(c.gamma_falling[k], d.gamma_falling[k]) < 1e-10, "a={a} b={b} n={n} k={k} {} {}", c.gamma_falling[k], d.gamma_falling[k]);
                }
            }
        }
    }

    #[test]
    fn gamma_three_falling_product_form() {
        // (a-2)↑3 n↓3 (a+b+1)↑(n-3) / ((a-2)(a-1)(a+b)↑(n-2))
        let (a, b) = (0.5, 1.0);
        let p = BetaParams::new(a, b).unwrap();
        for n in [3u64, 10, 500] {
            let nf = n as f64;
            let v = rising(a - 2.0, 3).to_f64() * nf * (nf - 1.0) * (nf - 2.0)
                * (rising(a + b + 1.0, n - 3) / rising(a + b, n - 2)).to_f64()
                / ((a - 2.0) * (a - 1.0));
            assert!(rel(gamma_moment(&p, n, 3, MomentKind::Falling).unwrap(), v) < 1e-12);
        }
    }

    #[test]
    fn asymptotic_constants() {
        let p = BetaParams::new(0.5, 0.5).unwrap();
        let (c, e) = gamma_asymptotic_constant(&p, 1).unwrap();
        assert!(rel(c, 4.0 / (3.0 * crate::specfun::sqrt_pi())) < 1e-14);
        assert_eq!(e, 1.5);
        let (c, e) = gamma_asymptotic_constant(&BetaParams::new(3.0, 1.0).unwrap(), 1).unwrap();
        assert!(rel(c, 1.5) < 1e-15);
        assert_eq!(e, 1.0);
        let (c, e) = gamma_asymptotic_constant(&BetaParams::new(0.5, 1.0).unwrap(), 3).unwrap();
        assert!(rel(c, 1.0 / 3.0) < 1e-15);
        assert_eq!(e, 3.0);
        assert!(gamma_asymptotic_constant(&BetaParams::new(1.0, 1.0).unwrap(), 1).is_err());
    }

    proptest! {
        #[test]
        fn binomial_type_identity(a in 0.01f64..3.0, b in 0.01f64..3.0, n in 0u64..=60) {
            // Σ_l C(n,l) a↑l b↑(n-l) = (a+b)↑n
            let mut terms = LogValue::ZERO;
            for l in 0..=n {
                let t = LogValue::positive(ln_choose(n, l)) * rising(a, l) * rising(b, n - l);
                terms = terms.add(t);
            }
            let rhs = rising(a + b, n);
            prop_assert!(((terms.ln_abs - rhs.ln_abs).exp() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn consistency_recursion(a in 0.05f64..3.0, b in 0.05f64..3.0) {
            let t = build_rate_table(&Model::beta(a, b).unwrap(), 80).unwrap();
            for m in 2..80 {
                for k in 2..=m {
                    let lhs = t.lambda(m, k).unwrap();
                    let rhs = t.lambda(m + 1, k).unwrap().add(t.lambda(m + 1, k + 1).unwrap());
                    prop_assert!(((lhs.ln_abs - rhs.ln_abs).exp() - 1.0).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn rows_are_log_convex(a in 0.05f64..3.0, b in 0.05f64..3.0) {
            let t = build_rate_table(&Model::beta(a, b).unwrap(), 60).unwrap();
            for m in 4..=60 {
                let row = t.ln_row(m).unwrap();
                prop_assert!(row.windows(3).all(|w| w[2] - w[1] >= w[1] - w[0] - 1e-12));
            }
        }
    }
}
