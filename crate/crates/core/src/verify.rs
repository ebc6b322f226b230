//! Self-checks: exact identities (deterministic suite) and pre-registered
//! statistical tests of the simulator (statistical suite).

use serde::Serialize;

use crate::bell::{
    bell_number, complete_bell, compose_egf, lah, partial_bell_enumerated, partial_bell_recurrence,
    stirling2,
};
use crate::error::Result;
use crate::limits::{
    c_limit, c_limit_derivative, c_star_limit, c_star_limit_derivative, mean_limit,
    spectrum_limit, spectrum_limit_bell, spectrum_limits, verify_ode_solution, CurveKind,
    DriftConstants, LimitCurve,
};
use crate::rates::{build_rate_table, gamma_asymptotic_constant, BetaParams, GammaMoments, MomentKind, Model, RateTable};
use crate::sim::stats::{chi_square_homogeneity, ks_two_sample};
use crate::sim::{
    simulate_block_count, simulate_labelled, simulate_spectrum, simulate_spectrum_from, restrict,
    SeedPolicy, SpectrumOptions,
};
use crate::specfun::{ln_gamma, rising, rising_ratio, rising_ratio_asymptotic, Sign};

/// Significance level of every statistical check.
pub const SIGNIFICANCE: f64 = 0.01;

/// Master seed of the pre-registered statistical checks.
pub const DEFAULT_STAT_SEED: u64 = 20_240_601;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn bound(name: &str, worst: f64, tol: f64) -> Self {
        CheckResult {
            name: name.into(),
            passed: worst <= tol,
            detail: format!("worst {worst:.3e} (tol {tol:.0e})"),
        }
    }

    fn flag(name: &str, passed: bool, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<CheckResult>) -> Self {
        r.unwrap_or_else(|e| CheckResult::flag(name, false, format!("error: {e}")))
    }
}

/// Which suites to run and at what size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub quick: bool,
    pub statistical: bool,
    pub seed: u64,
    pub threads: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            quick: false,
            statistical: false,
            seed: DEFAULT_STAT_SEED,
            threads: 1,
        }
    }
}

pub fn run(options: &VerifyOptions) -> Vec<CheckResult> {
    let mut out = deterministic_suite(options.quick);
    if options.statistical {
        out.extend(statistical_suite(options.quick, SeedPolicy::new(options.seed)));
    }
    out
}

fn rel(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
    }
}

/// Parameter pairs with `a` away from the branch points 1 and 2.
fn sample_params() -> Vec<BetaParams> {
    [(0.5, 0.5), (0.3, 2.0), (0.8, 1.0), (0.05, 0.7), (1.5, 0.4), (2.7, 1.3), (3.0, 1.0)]
        .iter()
        .map(|&(a, b)| BetaParams::new(a, b).expect("valid"))
        .collect()
}

pub fn deterministic_suite(quick: bool) -> Vec<CheckResult> {
    type Check = fn(bool) -> Result<CheckResult>;
    let checks: [(&str, Check); 16] = [
        ("log_gamma factorials", check_log_gamma),
        ("rising vs product", check_rising_product),
        ("rising splitting", check_rising_split),
        ("rising ratio asymptotics", check_rising_ratio),
        ("rates closed products", check_rate_products),
        ("rates consistency recursion", check_consistency),
        ("binomial-type identity", check_binomial_type),
        ("gamma moments closed vs direct", check_gamma_moments),
        ("gamma moment asymptotics", check_gamma_asymptotics),
        ("partial Bell recurrence vs enumeration", check_bell_recurrence),
        ("Bell, Stirling and Lah identities", check_bell_numbers),
        ("EGF composition", check_egf),
        ("Bernoulli residuals", check_bernoulli),
        ("ODE solutions", check_odes),
        ("spectrum forms", check_spectrum_forms),
        ("Kingman limits", check_kingman),
    ];
    checks
        .iter()
        .map(|(name, f)| CheckResult::from_result(name, f(quick)))
        .collect()
}

fn check_log_gamma(_quick: bool) -> Result<CheckResult> {
    let mut worst = rel(ln_gamma(0.5), 0.5 * std::f64::consts::PI.ln());
    let mut ln_fact = 0.0f64;
    for n in 1..=60u32 {
        worst = worst.max((ln_gamma(f64::from(n)) - ln_fact).abs() / ln_fact.max(1.0));
        ln_fact += f64::from(n).ln();
    }
    Ok(CheckResult::bound("log_gamma factorials", worst, 1e-13))
}

fn check_rising_product(_quick: bool) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for j in 1..=40 {
        let x = 0.137 * j as f64;
        let mut prod = 1.0;
        for k in 0..=30u64 {
            worst = worst.max(rel(rising(x, k).to_f64(), prod));
            prod *= x + k as f64;
        }
    }
    Ok(CheckResult::bound("rising vs product", worst, 1e-12))
}

fn check_rising_split(_quick: bool) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let mut sign_ok = true;
    for j in 0..24 {
        let x = -2.95 + 0.25 * j as f64 + 0.013;
        for k in 0..=20u64 {
            for m in (0..=20u64).step_by(3) {
                let lhs = rising(x, k) * rising(x + k as f64, m);
                let rhs = rising(x, k + m);
                sign_ok &= lhs.sign == rhs.sign;
                if rhs.sign != Sign::Zero {
                    worst = worst.max((lhs.ln_abs - rhs.ln_abs).abs().exp_m1().abs());
                }
            }
        }
    }
    let mut r = CheckResult::bound("rising splitting", worst, 1e-10);
    r.passed &= sign_ok;
    Ok(r)
}

fn check_rising_ratio(quick: bool) -> Result<CheckResult> {
    let top = if quick { 5 } else { 6 };
    let mut ok = true;
    for &(a, b, z) in &[(0.5, 1.0, 0i64), (2.0, 1.0, 0), (0.3, 1.7, -2)] {
        let mut prev = f64::INFINITY;
        for e in 2..=top {
            let n = 10u64.pow(e);
            let gap = (rising_ratio(a, b, z, n)? / rising_ratio_asymptotic(a, b, z, n)? - 1.0).abs();
            ok &= gap < prev;
            prev = gap;
        }
    }
    Ok(CheckResult::flag(
        "rising ratio asymptotics",
        ok,
        format!("monotone gap shrink for n = 10^2..10^{top}"),
    ))
}

/// `ln k!` by summing logarithms, independent of the gamma function.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    for k in 1..=n {
        v[k] = v[k - 1] + (k as f64).ln();
    }
    v
}

/// Worst relative error of the beta(1,1) and beta(1/2,1/2) tables against
/// their product formulas.
pub fn rate_product_error(n_max: usize) -> Result<f64> {
    let lf = ln_factorials(2 * n_max);
    let ln4 = 4f64.ln();
    // (1/2)↑j = (2j)! / (4^j j!)
    let ln_half_rising = |j: usize| lf[2 * j] - j as f64 * ln4 - lf[j];
    let t11 = build_rate_table(&Model::beta(1.0, 1.0)?, n_max)?;
    let tas = build_rate_table(&Model::beta(0.5, 0.5)?, n_max)?;
    let mut worst = 0.0f64;
    for m in 2..=n_max {
        for k in 2..=m {
            let bs = lf[k - 2] + lf[m - k] - lf[m - 1];
            let arc = ln_half_rising(k - 2) + ln_half_rising(m - k) - lf[m - 2];
            worst = worst.max(rel(t11.lambda(m, k)?.to_f64(), bs.exp()));
            worst = worst.max(rel(tas.lambda(m, k)?.to_f64(), arc.exp()));
        }
    }
    Ok(worst)
}

fn check_rate_products(quick: bool) -> Result<CheckResult> {
    let n = if quick { 60 } else { 200 };
    Ok(CheckResult::bound("rates closed products", rate_product_error(n)?, 1e-10))
}

/// Worst relative error of `λ_{m,k} = λ_{m+1,k} + λ_{m+1,k+1}` on a table.
pub fn consistency_error(table: &RateTable) -> Result<f64> {
    let mut worst = 0.0f64;
    for m in 2..table.n_max() {
        for k in 2..=m {
            let lhs = table.lambda(m, k)?;
            let rhs = table.lambda(m + 1, k)?.add(table.lambda(m + 1, k + 1)?);
            worst = worst.max((lhs.ln_abs - rhs.ln_abs).abs().exp_m1().abs());
        }
    }
    Ok(worst)
}

fn check_consistency(quick: bool) -> Result<CheckResult> {
    let n = if quick { 100 } else { 500 };
    let mut worst = 0.0f64;
    for p in sample_params() {
        worst = worst.max(consistency_error(&build_rate_table(&Model::Beta(p), n)?)?);
    }
    worst = worst.max(consistency_error(&build_rate_table(&Model::Kingman, n)?)?);
    Ok(CheckResult::bound("rates consistency recursion", worst, 1e-10))
}

fn check_binomial_type(_quick: bool) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for (a, b) in [(0.1, 2.9), (0.5, 0.5), (1.3, 0.7), (2.2, 2.8)] {
        for n in 0..=60u64 {
            let lhs = (0..=n).fold(crate::specfun::LogValue::ZERO, |acc, l| {
                let term = crate::specfun::LogValue::positive(crate::rates::ln_choose(n, l))
                    * rising(a, l)
                    * rising(b, n - l);
                acc.add(term)
            });
            let rhs = rising(a + b, n);
            worst = worst.max((lhs.ln_abs - rhs.ln_abs).abs().exp_m1().abs());
        }
    }
    Ok(CheckResult::bound("binomial-type identity", worst, 1e-10))
}

fn check_gamma_moments(quick: bool) -> Result<CheckResult> {
    let (n_top, stride) = if quick { (200, 7) } else { (2000, 1) };
    let mut worst = 0.0f64;
    let mut falling2_exact = true;
    for p in sample_params() {
        for n in (2..=n_top).step_by(stride) {
            let c = GammaMoments::closed_form(&p, n)?;
            let d = GammaMoments::direct(&p, n)?;
            for k in 0..4 {
                worst = worst.max(rel(c.get(k, MomentKind::Power), d.get(k, MomentKind::Power)));
            }
            for k in 1..4 {
                worst = worst.max(rel(c.get(k, MomentKind::Falling), d.get(k, MomentKind::Falling)));
            }
            falling2_exact &= c.get(2, MomentKind::Falling) == (n * (n - 1)) as f64;
        }
    }
    let mut r = CheckResult::bound("gamma moments closed vs direct", worst, 1e-9);
    r.passed &= falling2_exact;
    Ok(r)
}

fn check_gamma_asymptotics(quick: bool) -> Result<CheckResult> {
    let top = if quick { 5 } else { 6 };
    let mut ok = true;
    let mut last = 0.0f64;
    for p in sample_params() {
        for k in [0usize, 1, 3] {
            let (c, e) = gamma_asymptotic_constant(&p, k)?;
            let mut prev = f64::INFINITY;
            for j in 2..=top {
                let n = 10u64.pow(j);
                let g = GammaMoments::closed_form(&p, n)?.get(k, MomentKind::Power);
                let gap = (g / (c * (n as f64).powf(e)) - 1.0).abs();
                ok &= gap <= prev;
                prev = gap;
            }
            let n = 10f64.powi(top as i32);
            let mut rate = (1.0 - p.a()).abs().min(1.0);
            if k == 0 {
                rate = rate.min((2.0 - p.a()).abs());
            }
            ok &= prev <= 10.0 * n.powf(-rate);
            last = last.max(prev);
        }
    }
    Ok(CheckResult::flag(
        "gamma moment asymptotics",
        ok,
        format!("monotone, within 10 n^-r; worst gap at n=10^{top}: {last:.3e}"),
    ))
}

fn check_bell_recurrence(quick: bool) -> Result<CheckResult> {
    let top = if quick { 8 } else { 10 };
    let w: Vec<f64> = (1..=top).map(|j| 0.3 + 0.7 * j as f64 - 0.05 * (j * j) as f64).collect();
    let mut worst = 0.0f64;
    for i in 1..=top {
        for l in 1..=i {
            worst = worst.max(rel(partial_bell_recurrence(i, l, &w)?, partial_bell_enumerated(i, l, &w)?));
        }
    }
    Ok(CheckResult::bound("partial Bell recurrence vs enumeration", worst, 1e-12))
}

fn check_bell_numbers(_quick: bool) -> Result<CheckResult> {
    let ones = vec![1.0; 10];
    let mut ok = true;
    for i in 1..=10 {
        let sum: f64 = (1..=i).map(|l| crate::bell::partial_bell(i, l, &ones).unwrap_or(f64::NAN)).sum();
        ok &= sum == bell_number(i) as f64;
        ok &= (1..=i).map(|l| stirling2(i, l)).sum::<u128>() == bell_number(i);
        let fact: Vec<f64> = (1..=10).map(|j| (1..=j).map(|x| x as f64).product()).collect();
        for k in 1..=i {
            ok &= crate::bell::partial_bell(i, k, &fact)? == lah(i, k) as f64;
        }
    }
    Ok(CheckResult::flag("Bell, Stirling and Lah identities", ok, "i <= 10".into()))
}

fn check_egf(_quick: bool) -> Result<CheckResult> {
    let order = 10;
    let v: Vec<f64> = (0..=order).map(|j| 1.0 / (1.0 + j as f64) - 0.2 * j as f64).collect();
    let w: Vec<f64> = (0..=order).map(|j| if j == 0 { 0.0 } else { 0.5 + 0.1 * j as f64 }).collect();
    let comp = compose_egf(&v[1..], &w[1..], order);
    let mut worst = 0.0f64;
    for i in 1..=order {
        worst = worst.max(rel(comp[i], complete_bell(i, &v[1..], &w[1..])?));
    }
    Ok(CheckResult::bound("EGF composition", worst, 1e-9))
}

fn check_bernoulli(_quick: bool) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for (a, b) in [(0.5, 0.5), (0.3, 2.0), (0.8, 1.0), (0.05, 3.0)] {
        let model = Model::beta(a, b)?;
        let dc = DriftConstants::new(&model)?;
        for j in 0..=40 {
            let t = 0.25 * j as f64;
            worst = worst.max(rel(c_limit_derivative(&model, t)?, dc.bernoulli_rhs(c_limit(&model, t)?)));
            if t >= 0.25 {
                worst = worst.max(rel(
                    c_star_limit_derivative(&model, t)?,
                    dc.bernoulli_rhs(c_star_limit(&model, t)?),
                ));
                worst = worst.max(rel(mean_limit(&model, t, -1.0)?, c_limit(&model, t)?));
            }
        }
    }
    Ok(CheckResult::bound("Bernoulli residuals", worst, 1e-9))
}

fn check_odes(quick: bool) -> Result<CheckResult> {
    let steps = if quick { 10_000 } else { 20_000 };
    let model = Model::beta(0.5, 0.5)?;
    let mut curves = vec![
        (LimitCurve::new(model, CurveKind::C), 0.0),
        (LimitCurve::new(model, CurveKind::CStar), 0.25),
        (LimitCurve::new(Model::beta(3.0, 1.0)?, CurveKind::Mean { alpha: -1.0 }), 0.0),
    ];
    for x in [-0.5, 0.0, 0.3, 0.9] {
        curves.push((LimitCurve::new(model, CurveKind::GenFunG { x }), 0.0));
    }
    let mut worst = 0.0f64;
    for (curve, t0) in curves {
        worst = worst.max(verify_ode_solution(&curve, t0, 10.0, steps)?.max_rel_deviation);
    }
    Ok(CheckResult::bound("ODE solutions", worst, 1e-8))
}

fn check_spectrum_forms(quick: bool) -> Result<CheckResult> {
    let steps = if quick { 2000 } else { 4000 };
    let mut worst = 0.0f64;
    for (a, b) in [(0.5, 0.5), (0.3, 2.0), (0.8, 1.0)] {
        let model = Model::beta(a, b)?;
        for t in [0.5, 1.0, 2.0] {
            for i in 1..=8 {
                worst = worst.max(rel(spectrum_limit(&model, i, t)?, spectrum_limit_bell(&model, i, t)?));
            }
        }
        let check = verify_ode_solution(&LimitCurve::new(model, CurveKind::Spectrum { i: 8 }), 0.0, 2.0, steps)?;
        worst = worst.max(check.max_rel_deviation);
    }
    Ok(CheckResult::bound("spectrum forms", worst, 1e-6))
}

fn check_kingman(_quick: bool) -> Result<CheckResult> {
    let k = Model::Kingman;
    let mut worst = 0.0f64;
    for j in 1..=40 {
        let t = 0.25 * j as f64;
        worst = worst.max(rel(c_limit(&k, t)?, 2.0 / (2.0 + t)));
        worst = worst.max(rel(c_star_limit(&k, t)?, 2.0 / t));
        let c = 2.0 / (2.0 + t);
        let s = spectrum_limits(&k, 10, t)?;
        for (i, v) in s.iter().enumerate() {
            worst = worst.max(rel(*v, c * c * (1.0 - c).powi(i as i32)));
        }
    }
    Ok(CheckResult::bound("Kingman limits", worst, 1e-10))
}

/// Outcome of a two-sample test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: (usize, usize),
}

impl TestOutcome {
    pub fn passes(&self) -> bool {
        self.p_value >= SIGNIFICANCE
    }
}

fn outcome_check(name: &str, r: Result<TestOutcome>) -> CheckResult {
    match r {
        Ok(o) => CheckResult::flag(
            name,
            o.passes(),
            format!("statistic {:.4}, p = {:.4} (samples {:?})", o.statistic, o.p_value, o.samples),
        ),
        Err(e) => CheckResult::flag(name, false, format!("error: {e}")),
    }
}

/// Block counts at `t` of `n`-runs restricted to `[small]` against direct
/// `small`-runs, chi-square over `{1..small}`.
pub fn restriction_chi_square(
    model: &Model,
    n: usize,
    small: usize,
    t: f64,
    replicates: u64,
    seeds: SeedPolicy,
) -> Result<TestOutcome> {
    let table = build_rate_table(model, n)?;
    let (sa, sb) = (seeds.derive(1), seeds.derive(2));
    let mut restricted = vec![0u64; small];
    let mut direct = vec![0u64; small];
    for r in 0..replicates {
        let big = simulate_labelled(&table, n, &mut sa.rng(r))?;
        restricted[restrict(&big, small)?.value_at(t).num_blocks() - 1] += 1;
        let tr = simulate_block_count(&table, small, Some(t), &mut sb.rng(r))?;
        direct[tr.value_at(t) - 1] += 1;
    }
    let (statistic, _, p_value) = chi_square_homogeneity(&restricted, &direct);
    Ok(TestOutcome {
        statistic,
        p_value,
        samples: (replicates as usize, replicates as usize),
    })
}

/// Absorption times after first hitting exactly `m` blocks in `n`-runs
/// against fresh runs started from the hit block sizes.
pub fn temporal_coupling_ks(
    model: &Model,
    n: usize,
    m: usize,
    replicates: u64,
    seeds: SeedPolicy,
) -> Result<TestOutcome> {
    let table = build_rate_table(model, n)?;
    let (sa, sb) = (seeds.derive(3), seeds.derive(4));
    let options = SpectrumOptions::new(n);
    let mut after = Vec::new();
    let mut fresh = Vec::new();
    for r in 0..replicates {
        let tr = simulate_spectrum(&table, n, options, &mut sa.rng(r))?;
        let Some((t_hit, snap)) = tr.events.iter().find(|(_, s)| s.block_count() == m as u64) else {
            continue;
        };
        let absorbed = tr.absorption_time().expect("run without horizon is absorbed");
        after.push(absorbed - t_hit);
        let sizes: Vec<u32> = snap
            .counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i as u32 + 1, c as usize))
            .collect();
        let restart = simulate_spectrum_from(&table, sizes, options, &mut sb.rng(r))?;
        fresh.push(restart.absorption_time().expect("absorbed"));
    }
    let (statistic, p_value) = ks_two_sample(&after, &fresh);
    Ok(TestOutcome {
        statistic,
        p_value,
        samples: (after.len(), fresh.len()),
    })
}

/// Absorption times of the block-count chain against those embedded in the
/// spectrum chain.
pub fn embedded_count_ks(model: &Model, n: usize, replicates: u64, seeds: SeedPolicy) -> Result<TestOutcome> {
    let table = build_rate_table(model, n)?;
    let (sa, sb) = (seeds.derive(5), seeds.derive(6));
    let mut x = Vec::with_capacity(replicates as usize);
    let mut y = Vec::with_capacity(replicates as usize);
    for r in 0..replicates {
        x.push(simulate_block_count(&table, n, None, &mut sa.rng(r))?.absorption_time().expect("absorbed"));
        y.push(
            simulate_spectrum(&table, n, SpectrumOptions::new(4), &mut sb.rng(r))?
                .absorption_time()
                .expect("absorbed"),
        );
    }
    let (statistic, p_value) = ks_two_sample(&x, &y);
    Ok(TestOutcome {
        statistic,
        p_value,
        samples: (x.len(), y.len()),
    })
}

/// Mean first holding time at `m` blocks in standard errors from `1/row_total`.
pub fn holding_time_z(table: &RateTable, m: usize, replicates: u64, seeds: SeedPolicy) -> Result<f64> {
    let mut sum = 0.0;
    for r in 0..replicates {
        sum += simulate_block_count(table, m, None, &mut seeds.rng(r))?.events[1].0;
    }
    let mean = sum / replicates as f64;
    let expected = 1.0 / table.row_total(m)?;
    // exponential holding times: sd = mean
    Ok((mean - expected) / (expected / (replicates as f64).sqrt()))
}

pub fn statistical_suite(quick: bool, seeds: SeedPolicy) -> Vec<CheckResult> {
    let model = Model::beta(0.5, 0.5).expect("valid");
    let scale = if quick { 10 } else { 1 };
    let mut out = vec![
        outcome_check(
            "consistency under restriction (chi-square)",
            restriction_chi_square(&model, 6, 4, 0.3, 100_000 / scale, seeds.derive(10)),
        ),
        outcome_check(
            "temporal coupling (KS)",
            temporal_coupling_ks(&model, 8, 4, 20_000 / scale, seeds.derive(11)),
        ),
        outcome_check(
            "embedded block count (KS)",
            embedded_count_ks(&model, 100, 10_000 / scale, seeds.derive(12)),
        ),
    ];
    let holding = build_rate_table(&model, 1000).and_then(|table| {
        [10usize, 100, 1000]
            .iter()
            .map(|&m| holding_time_z(&table, m, 20_000 / scale, seeds.derive(13 + m as u64)))
            .collect::<Result<Vec<f64>>>()
    });
    out.push(match holding {
        Ok(z) => CheckResult::flag(
            "holding-time means",
            z.iter().all(|v| v.abs() <= 4.0),
            format!("z-scores {z:.2?} at m = 10, 100, 1000"),
        ),
        Err(e) => CheckResult::flag("holding-time means", false, format!("error: {e}")),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_deterministic_suite_passes() {
        for r in deterministic_suite(true) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
