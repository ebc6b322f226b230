//! Deterministic small-time limits of the rescaled block counts and block
//! size spectra, with an RK4 cross-check against their defining ODEs.
//!
//! With `K = Γ(a+b)/((2-a)Γ(b))` and `G = K/(1-a)` the rescaled block count
//! solves `c' = -G c^{2-a}`, giving `c(t) = (1 + K t)^{1/(a-1)}` from `c(0) = 1`
//! and `c*(t) = (K t)^{1/(a-1)}` from infinity. Kingman's coalescent enters
//! as `a = 0`, `K = G = 1/2`.

use serde::{Deserialize, Serialize};

use crate::bell::BellTable;
use crate::error::{domain, regime, Error, Result};
use crate::rates::Model;
use crate::specfun::{ln_gamma, rising};

/// Smallest time accepted by evaluators with a pole at `t = 0`.
pub const T_MIN: f64 = 1e-9;

/// Floor below which a Richardson estimate never triggers a step-size error.
const RICHARDSON_FLOOR: f64 = 1e-9;

/// Drift constants of the limiting Bernoulli equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftConstants {
    pub a: f64,
    pub k: f64,
    pub g_full: f64,
}

impl DriftConstants {
    pub fn new(model: &Model) -> Result<Self> {
        match model {
            Model::Kingman => Ok(DriftConstants {
                a: 0.0,
                k: 0.5,
                g_full: 0.5,
            }),
            Model::Beta(p) => {
                if !p.comes_down_from_infinity() {
                    return regime(format!(
                        "small-time limits need a < 1, got a = {}",
                        p.a()
                    ));
                }
                let (a, b) = (p.a(), p.b());
                let k = (ln_gamma(a + b) - ln_gamma(b)).exp() / (2.0 - a);
                Ok(DriftConstants {
                    a,
                    k,
                    g_full: k / (1.0 - a),
                })
            }
        }
    }

    fn exponent(&self) -> f64 {
        1.0 / (self.a - 1.0)
    }

    /// Right-hand side `-G y^{2-a}` of the Bernoulli equation.
    pub fn bernoulli_rhs(&self, y: f64) -> f64 {
        -self.g_full * y.powf(2.0 - self.a)
    }
}

/// `c(t) = (1 + K t)^{1/(a-1)}`.
pub fn c_limit(model: &Model, t: f64) -> Result<f64> {
    check_time(t)?;
    let dc = DriftConstants::new(model)?;
    Ok((1.0 + dc.k * t).powf(dc.exponent()))
}

/// Analytic derivative of [`c_limit`].
pub fn c_limit_derivative(model: &Model, t: f64) -> Result<f64> {
    check_time(t)?;
    let dc = DriftConstants::new(model)?;
    let p = dc.exponent();
    Ok(p * dc.k * (1.0 + dc.k * t).powf(p - 1.0))
}

/// `c*(t) = (K t)^{1/(a-1)}`; rejects `t < T_MIN`.
pub fn c_star_limit(model: &Model, t: f64) -> Result<f64> {
    check_positive_time(t)?;
    let dc = DriftConstants::new(model)?;
    Ok((dc.k * t).powf(dc.exponent()))
}

/// Analytic derivative of [`c_star_limit`].
pub fn c_star_limit_derivative(model: &Model, t: f64) -> Result<f64> {
    check_positive_time(t)?;
    let dc = DriftConstants::new(model)?;
    let p = dc.exponent();
    Ok(p * dc.k * (dc.k * t).powf(p - 1.0))
}

/// Block-count solution started from mass `M`: `(M^{a-1} + K t)^{1/(a-1)}`.
pub fn c_finite_mass(model: &Model, mass: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(mass > 0.0) {
        return domain(format!("initial mass must be positive, got {mass}"));
    }
    let dc = DriftConstants::new(model)?;
    Ok((mass.powf(dc.a - 1.0) + dc.k * t).powf(dc.exponent()))
}

/// Decay rate of the mean block fraction for `a > 1`: `(a+b-1)/(a-1)`.
pub fn mean_decay_rate(model: &Model) -> Result<f64> {
    match model {
        Model::Beta(p) if p.a() > 1.0 => {
            p.require_generic()?;
            Ok((p.a() + p.b() - 1.0) / (p.a() - 1.0))
        }
        _ => regime(format!(
            "exponential mean decay needs a > 1, got {}",
            model.label()
        )),
    }
}

/// Limit of the rescaled mean block count under `(n^α, n^β)` rescaling.
///
/// * `a < 1`, `α = -1`: `c(t)`;
/// * `a < 1`, `α > -1`: `c*(t)`;
/// * `a > 1`, `α = -1`: `exp(-((a+b-1)/(a-1)) t)`.
pub fn mean_limit(model: &Model, t: f64, alpha: f64) -> Result<f64> {
    if let Model::Beta(p) = model {
        p.require_generic()?;
    }
    if model.comes_down_from_infinity() {
        if alpha == -1.0 {
            c_limit(model, t)
        } else if alpha > -1.0 {
            c_star_limit(model, t)
        } else {
            regime(format!("no nontrivial mean limit for alpha = {alpha} < -1"))
        }
    } else if alpha == -1.0 {
        check_time(t)?;
        Ok((-mean_decay_rate(model)? * t).exp())
    } else {
        regime(format!(
            "without coming down from infinity the mean limit needs alpha = -1, got {alpha}"
        ))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return domain(format!("time must be finite and non-negative, got {t}"));
    }
    Ok(())
}

fn check_positive_time(t: f64) -> Result<()> {
    if !(t >= T_MIN) || !t.is_finite() {
        return domain(format!("time must be at least {T_MIN}, got {t}"));
    }
    Ok(())
}

fn check_x(x: f64) -> Result<()> {
    if !(x.abs() < 1.0) {
        return domain(format!("generating-function argument needs |x| < 1, got {x}"));
    }
    Ok(())
}

/// `g(t, x) = ((1-x)^{a-1} + K t)^{1/(a-1)}`, so that `𝒢 = c - g`.
pub fn gen_fun_g(model: &Model, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    check_x(x)?;
    let dc = DriftConstants::new(model)?;
    Ok(((1.0 - x).powf(dc.a - 1.0) + dc.k * t).powf(dc.exponent()))
}

/// Generating function `𝒢(t, x) = Σ_i c_i(t) x^i` of the limiting spectrum.
pub fn gen_fun(model: &Model, t: f64, x: f64) -> Result<f64> {
    Ok(c_limit(model, t)? - gen_fun_g(model, t, x)?)
}

/// Coefficients `c_1, ..., c_n` of `-(s (1-x)^{a-1} + K t)^{1/(a-1)}`.
///
/// With `c = (s + Kt)^p`, `ε = Kt / (s + Kt)` and `φ = 1 - (1-x)^{1-a}` the
/// power equals `c (1-x) (1 - εφ)^p`. The coefficients `S_k` of
/// `(1 - εφ)^p` come from the J.C.P. Miller recurrence, in which every term
/// is non-negative for `a < 1`, and `c_i = c (S_{i-1} - S_i)`.
fn spectrum_series(dc: &DriftConstants, scale: f64, t: f64, n: usize) -> Vec<f64> {
    let a = dc.a;
    let p = dc.exponent();
    let y = dc.k * t;
    let total = scale + y;
    let eps = y / total;
    // H_k = -ε φ_k, φ_1 = 1-a, φ_k = φ_{k-1} (k-2+a) / k
    let mut h = vec![0.0; n + 1];
    let mut phi = 1.0 - a;
    for k in 1..=n {
        if k > 1 {
            phi *= (k as f64 - 2.0 + a) / k as f64;
        }
        h[k] = -eps * phi;
    }
    let mut big_s = Vec::with_capacity(n + 1);
    big_s.push(1.0);
    for m in 1..=n {
        let mut acc = 0.0;
        for k in 1..=m {
            acc += ((p + 1.0) * k as f64 - m as f64) * h[k] * big_s[m - k];
        }
        big_s.push(acc / m as f64);
    }
    let c = total.powf(p);
    (1..=n).map(|i| c * (big_s[i - 1] - big_s[i])).collect()
}

/// `c_1(t), ..., c_n(t)`.
pub fn spectrum_limits(model: &Model, n: usize, t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    let dc = DriftConstants::new(model)?;
    Ok(spectrum_series(&dc, 1.0, t, n))
}

/// Limiting density `c_i(t)` of blocks of size `i`.
pub fn spectrum_limit(model: &Model, i: usize, t: f64) -> Result<f64> {
    if i == 0 {
        return domain("block size must be at least 1");
    }
    Ok(spectrum_limits(model, i, t)?[i - 1])
}

/// `c(t) - Σ_{i<=d} c_i(t)`, the limiting density of blocks larger than `d`.
pub fn spectrum_limit_tail(model: &Model, d: usize, t: f64) -> Result<f64> {
    let cs = spectrum_limits(model, d, t)?;
    Ok(c_limit(model, t)? - cs.iter().sum::<f64>())
}

/// `c_i(t)` from the complete Bell polynomial
/// `(c^{2-a}/i!) B_i((1/(1-a))↑• (-c^{1-a})^{•-1}, (1-a)↑•)`.
///
/// The alternating sum loses accuracy as `i` grows; use it for small `i`.
pub fn spectrum_limit_bell(model: &Model, i: usize, t: f64) -> Result<f64> {
    if i == 0 {
        return domain("block size must be at least 1");
    }
    let c = c_limit(model, t)?;
    let dc = DriftConstants::new(model)?;
    let a = dc.a;
    let w: Vec<f64> = (1..=i).map(|k| rising(1.0 - a, k as u64).to_f64()).collect();
    let u = -c.powf(1.0 - a);
    let v: Vec<f64> = (1..=i)
        .map(|m| rising(1.0 / (1.0 - a), m as u64).to_f64() * u.powi(m as i32 - 1))
        .collect();
    let table = BellTable::new(i, &w);
    let fact = rising(1.0, i as u64).to_f64();
    Ok(c.powf(2.0 - a) * table.complete(i, &v) / fact)
}

/// `(c*^{2-a}/i!) B_i((1/(1-a))↑•, (1-a)↑•)`, the closed form stated for the
/// spectrum started from infinitely many blocks.
///
/// All terms are positive; the sum is taken over normalised exponential
/// generating function coefficients so large `i` does not overflow.
pub fn spectrum_limit_infty(model: &Model, i: usize, t: f64) -> Result<f64> {
    if i == 0 {
        return domain("block size must be at least 1");
    }
    let cs = c_star_limit(model, t)?;
    let dc = DriftConstants::new(model)?;
    Ok(cs.powf(2.0 - dc.a) * infty_bell_coefficient(dc.a, i))
}

/// `B_i((1/(1-a))↑•, (1-a)↑•) / i!`.
pub fn infty_bell_coefficient(a: f64, i: usize) -> f64 {
    // W(x) = Σ_k (1-a)↑k x^k / k!, and B_{i,m}/i! = [x^i] W^m / m!.
    let mut wk = vec![0.0; i + 1];
    let mut coef = 1.0;
    for (k, slot) in wk.iter_mut().enumerate().skip(1) {
        coef *= (1.0 - a + (k - 1) as f64) / k as f64;
        *slot = coef;
    }
    let mut power = vec![0.0; i + 1];
    power[0] = 1.0;
    let mut total = 0.0;
    let mut vm = 1.0;
    for m in 1..=i {
        power = crate::bell::series_mul(&power, &wk, i);
        // (1/(1-a))↑m / m!
        vm *= (1.0 / (1.0 - a) + (m - 1) as f64) / m as f64;
        total += vm * power[i];
    }
    total
}

/// Spectrum `c_{M,i}(t)` started from `M` singletons: coefficients of
/// `-((M(1-x))^{a-1} + K t)^{1/(a-1)}`.
pub fn spectrum_finite_mass(model: &Model, mass: f64, n: usize, t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    if !(mass > 0.0) {
        return domain(format!("initial mass must be positive, got {mass}"));
    }
    let dc = DriftConstants::new(model)?;
    Ok(spectrum_series(&dc, mass.powf(dc.a - 1.0), t, n))
}

/// Right-hand side of the triangular spectrum system driven by the total `c`:
/// `c_i' = G c^{2-a} Σ_m (a-2)↑m c^{-m} [x^i] C(x)^m / m!`.
pub fn spectrum_ode_rhs(dc: &DriftConstants, c_total: f64, cs: &[f64], out: &mut [f64]) {
    let d = cs.len();
    let a = dc.a;
    let mut series = vec![0.0; d + 1];
    series[1..].copy_from_slice(cs);
    let mut power = vec![0.0; d + 1];
    power[0] = 1.0;
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut vm = 1.0;
    for m in 1..=d {
        power = crate::bell::series_mul(&power, &series, d);
        vm *= (a - 2.0 + (m - 1) as f64) / (m as f64 * c_total);
        for i in m..=d {
            out[i - 1] += vm * power[i];
        }
    }
    let scale = dc.g_full * c_total.powf(2.0 - a);
    out.iter_mut().for_each(|o| *o *= scale);
}

/// Classical fourth-order Runge–Kutta with a fixed step. `observe` is called
/// after every step with the current time and state.
pub fn rk4<F, O>(f: F, t0: f64, y0: &[f64], t1: f64, steps: usize, mut observe: O) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        f(t, &y, &mut k1);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        f(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        f(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = y[j] + h * k3[j];
        }
        f(t + h, &tmp, &mut k4);
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        observe(t0 + (s + 1) as f64 * h, &y);
    }
    y
}

/// Which limit a [`LimitCurve`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveKind {
    C,
    CStar,
    Mean { alpha: f64 },
    Spectrum { i: usize },
    SpectrumInfty { i: usize },
    GenFunG { x: f64 },
    GenFun { x: f64 },
}

/// A closed-form limit together with the ODE it is claimed to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCurve {
    pub kind: CurveKind,
    pub model: Model,
}

impl LimitCurve {
    pub fn new(model: Model, kind: CurveKind) -> Self {
        LimitCurve { kind, model }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let m = &self.model;
        match self.kind {
            CurveKind::C => c_limit(m, t),
            CurveKind::CStar => c_star_limit(m, t),
            CurveKind::Mean { alpha } => mean_limit(m, t, alpha),
            CurveKind::Spectrum { i } => spectrum_limit(m, i, t),
            CurveKind::SpectrumInfty { i } => spectrum_limit_infty(m, i, t),
            CurveKind::GenFunG { x } => gen_fun_g(m, t, x),
            CurveKind::GenFun { x } => gen_fun(m, t, x),
        }
    }

    /// Closed-form values of every ODE component at `t`.
    fn state(&self, t: f64) -> Result<Vec<f64>> {
        match self.kind {
            CurveKind::Spectrum { i } => spectrum_limits(&self.model, i, t),
            CurveKind::SpectrumInfty { i } => {
                (1..=i).map(|j| spectrum_limit_infty(&self.model, j, t)).collect()
            }
            _ => Ok(vec![self.eval(t)?]),
        }
    }

    fn requires_positive_start(&self) -> bool {
        match self.kind {
            CurveKind::CStar | CurveKind::SpectrumInfty { .. } => true,
            CurveKind::Mean { alpha } => alpha > -1.0,
            _ => false,
        }
    }
}

/// Result of integrating a curve's ODE from its closed-form initial value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeCheck {
    /// Largest relative gap between the RK4 solution and the closed form.
    pub max_rel_deviation: f64,
    /// Richardson estimate of the RK4 error at the requested step count.
    pub richardson_estimate: f64,
}

fn rel_gap(num: f64, exact: f64) -> f64 {
    if !num.is_finite() {
        f64::INFINITY
    } else if num == exact {
        0.0
    } else {
        (num - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
    }
}

/// Integrates the ODE that `curve` should satisfy from its closed-form value
/// at `t0` and reports the largest relative deviation on `(t0, t1]`.
///
/// Fails with [`Error::StepSize`] when the integrator's own error estimate is
/// too large for the deviation to say anything about the closed form.
pub fn verify_ode_solution(curve: &LimitCurve, t0: f64, t1: f64, steps: usize) -> Result<OdeCheck> {
    if !(t1 > t0) || steps == 0 {
        return domain(format!("need t0 < t1 and steps > 0, got [{t0}, {t1}], {steps}"));
    }
    if curve.requires_positive_start() && t0 < T_MIN {
        return domain(format!("curves started from infinity need t0 >= {T_MIN}"));
    }
    check_time(t0)?;
    let y0 = curve.state(t0)?;
    let rhs = ode_rhs(curve)?;

    let steps = steps + steps % 2;
    let run = |n: usize| -> Result<(f64, Vec<Vec<f64>>)> {
        let mut worst = 0.0f64;
        let mut failure = None;
        let mut path = Vec::with_capacity(n);
        rk4(
            |t, y, out| rhs(t, y, out),
            t0,
            &y0,
            t1,
            n,
            |t, y| {
                match curve.state(t) {
                    Ok(exact) => {
                        for (num, ex) in y.iter().zip(&exact) {
                            worst = worst.max(rel_gap(*num, *ex));
                        }
                    }
                    Err(e) => failure = Some(e),
                }
                path.push(y.to_vec());
            },
        );
        match failure {
            Some(e) => Err(e),
            None => Ok((worst, path)),
        }
    };
    let (deviation, fine) = run(steps)?;
    let (_, coarse) = run(steps / 2)?;
    let mut richardson = 0.0f64;
    for (j, yc) in coarse.iter().enumerate() {
        for (c, f) in yc.iter().zip(&fine[2 * j + 1]) {
            richardson = richardson.max(rel_gap(*c, *f) / 15.0);
        }
    }
    if richardson > RICHARDSON_FLOOR && richardson >= 0.1 * deviation {
        return Err(Error::StepSize {
            estimate: richardson,
            limit: RICHARDSON_FLOOR.max(0.1 * deviation),
        });
    }
    Ok(OdeCheck {
        max_rel_deviation: deviation,
        richardson_estimate: richardson,
    })
}

type Rhs = Box<dyn Fn(f64, &[f64], &mut [f64])>;

fn ode_rhs(curve: &LimitCurve) -> Result<Rhs> {
    let model = curve.model;
    match curve.kind {
        CurveKind::Mean { .. } if !model.comes_down_from_infinity() => {
            let rate = mean_decay_rate(&model)?;
            Ok(Box::new(move |_, y, out| out[0] = -rate * y[0]))
        }
        CurveKind::C | CurveKind::CStar | CurveKind::Mean { .. } | CurveKind::GenFunG { .. } => {
            let dc = DriftConstants::new(&model)?;
            Ok(Box::new(move |_, y, out| out[0] = dc.bernoulli_rhs(y[0])))
        }
        CurveKind::GenFun { .. } => {
            let dc = DriftConstants::new(&model)?;
            Ok(Box::new(move |t, y, out| {
                let c = (1.0 + dc.k * t).powf(dc.exponent());
                out[0] = -dc.g_full * ((c - y[0]).powf(2.0 - dc.a) - c.powf(2.0 - dc.a));
            }))
        }
        CurveKind::Spectrum { .. } => {
            let dc = DriftConstants::new(&model)?;
            Ok(Box::new(move |t, y, out| {
                let c = (1.0 + dc.k * t).powf(dc.exponent());
                spectrum_ode_rhs(&dc, c, y, out);
            }))
        }
        CurveKind::SpectrumInfty { .. } => {
            let dc = DriftConstants::new(&model)?;
            Ok(Box::new(move |t, y, out| {
                let c = (dc.k * t).powf(dc.exponent());
                spectrum_ode_rhs(&dc, c, y, out);
            }))
        }
    }
}
