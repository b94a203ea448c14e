//! Time-dependent dependence of the residual vector: Kendall functions of
//! the survival copula `C_t`, Kendall's τ and tail-dependence coefficients.

use serde::Serialize;

use crate::distorted::Model;
use crate::error::{Error, Result};
use crate::generators::{Family, LowerAsymptotics, MixingLaw, UpperAsymptotics};
use crate::lmp::CoreParams;
use crate::numerics::{integrate_interval, integrate_unit, limit_at_zero_with, LimitOptions};

// ---------------------------------------------------------------------------
// J integrals

/// `Jᵢ(e^{lv}) = (γᵢ/α²)(αᵢ(v^α − 1) − α ln v)`.
fn j_closed_log(core: &CoreParams, i: usize, lv: f64) -> f64 {
    let (g, a) = if i == 1 {
        (core.gamma1, core.alpha1)
    } else {
        (core.gamma2, core.alpha2)
    };
    let al = core.alpha;
    (g / (al * al)) * (a * (al * lv).exp_m1() - al * lv)
}

fn j_quadrature_log(core: &CoreParams, i: usize, lv: f64) -> Result<f64> {
    let upper = core.marginal_quantile_log(i, lv);
    let r = integrate_interval(
        |z| {
            let h = core.marginal_hazard(i, z);
            h * h
        },
        0.0,
        upper,
        1e-13,
    )?;
    Ok(r.value)
}

fn j_check(i: usize, v: f64) -> Result<()> {
    if i != 1 && i != 2 {
        return Err(Error::Domain(format!("margin index {i} must be 1 or 2")));
    }
    if v == 0.0 {
        return Err(Error::Divergent("J_i(0) is infinite".into()));
    }
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain(format!("J_i argument {v} outside (0, 1]")));
    }
    Ok(())
}

/// `Jᵢ(v) = ∫₀^{Ḡᵢ⁻¹(v)} gᵢ²/Ḡᵢ² dz` in closed form.
pub fn j_integral(core: &CoreParams, i: usize, v: f64) -> Result<f64> {
    j_check(i, v)?;
    Ok(j_closed_log(core, i, v.ln()))
}

/// `Jᵢ(v)` by adaptive quadrature of the squared hazard.
pub fn j_integral_quadrature(core: &CoreParams, i: usize, v: f64) -> Result<f64> {
    j_check(i, v)?;
    j_quadrature_log(core, i, v.ln())
}

// ---------------------------------------------------------------------------
// Kendall functions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KendallSource {
    ClosedForm,
    Quadrature,
    Empirical,
}

#[derive(Debug, Clone, Serialize)]
pub struct KendallCurve {
    pub t: f64,
    pub source: KendallSource,
    /// `(s, K(s))` pairs.
    pub grid: Vec<(f64, f64)>,
}

/// `k/(n+1)` for `k = 1..=n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JMethod {
    Closed,
    Quadrature,
}

/// `K_t(s) = s − s η(y) [2 ln v + (J₁(v) + J₂(v))/λ]` where
/// `y = h⁻¹(s h(e^{−τ}))`, `v = e^τ y` and `η` is the elasticity of `h`.
pub fn kendall_value(m: &Model, t: f64, s: f64, j: JMethod) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("Kendall argument {s} outside [0, 1]")));
    }
    if s == 0.0 || s == 1.0 {
        return Ok(s);
    }
    let g = m.generator();
    let core = m.core();
    let tau = m.tau(t);
    let lv = g.log_residual_inverse(tau, s.ln())?;
    let ly = lv - tau;
    let eta = g.elasticity(ly)?;
    let (j1, j2) = match j {
        JMethod::Closed => (j_closed_log(core, 1, lv), j_closed_log(core, 2, lv)),
        JMethod::Quadrature => (j_quadrature_log(core, 1, lv)?, j_quadrature_log(core, 2, lv)?),
    };
    let bracket = 2.0 * lv + (j1 + j2) / core.lambda;
    Ok(s - s * eta * bracket)
}

/// General-formula Kendall curve with the `Jᵢ` integrals by quadrature.
pub fn kendall_function(m: &Model, t: f64, s_grid: &[f64]) -> Result<KendallCurve> {
    let grid = s_grid
        .iter()
        .map(|&s| Ok((s, kendall_value(m, t, s, JMethod::Quadrature)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(KendallCurve {
        t,
        source: KendallSource::Quadrature,
        grid,
    })
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Registered `(generator, core)` pairs with a closed-form `K_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ClosedKendall {
    /// Mixing generator with ratio `γ/α` over the exchangeable-rate core.
    Mixing(MixingLaw),
    /// Bivariate Gompertz: `h(x) = exp(−ξ(1/x − 1))` over an `α = 1` core.
    Gompertz { xi: f64 },
    /// `h(x) = ln(1 + ρx)/ln(1 + ρ)` over an `α = 1` core.
    LogSeries { rho: f64 },
}

fn closed_kendall_kind(m: &Model) -> Option<ClosedKendall> {
    let core = m.core();
    match m.generator().family() {
        Family::Mixing { law, ratio } if core.is_mu() && rel_eq(*ratio, core.gamma1 / core.alpha) => {
            Some(ClosedKendall::Mixing(*law))
        }
        Family::Mo15 { xi } if core.alpha == 1.0 => Some(ClosedKendall::Gompertz { xi: *xi }),
        Family::LogSeries { a, theta } if *a == 1.0 && core.alpha == 1.0 => {
            Some(ClosedKendall::LogSeries { rho: *theta })
        }
        _ => None,
    }
}

pub fn has_closed_kendall(m: &Model) -> bool {
    closed_kendall_kind(m).is_some()
}

/// Closed-form `K_t(s)` for the registered families; `NotAvailable` for
/// anything else (use [`kendall_function`]).
pub fn kendall_closed_form(m: &Model, t: f64, s: f64) -> Result<f64> {
    let kind = closed_kendall_kind(m).ok_or_else(|| {
        Error::NotAvailable(format!(
            "no closed-form Kendall function for a {} generator over this core",
            m.generator().family_name()
        ))
    })?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("Kendall argument {s} outside [0, 1]")));
    }
    if s == 0.0 || s == 1.0 {
        return Ok(s);
    }
    let c = m.core();
    let tau = m.tau(t);
    Ok(match kind {
        ClosedKendall::Mixing(law) => {
            let (al, g) = (c.alpha, c.gamma1);
            let r = g / al;
            let a12 = c.alpha1 + c.alpha2;
            let q = al * al / g;
            match law {
                MixingLaw::Gamma { a } => {
                    let k = 1.0 + r * tau;
                    s - (a * g * a12 / (al * al))
                        * s.powf((a + 1.0) / a)
                        / k
                        * (tau * al + q * (1.0 - s.powf(-1.0 / a) * k)).exp_m1()
                }
                MixingLaw::PositiveStable { a } => {
                    let w = (r * tau).powf(a) - s.ln();
                    s * (1.0
                        - (a * g / (al * al))
                            * a12
                            * w.powf((a - 1.0) / a)
                            * (tau * al - q * w.powf(1.0 / a)).exp_m1())
                }
                MixingLaw::Sibuya { a } => {
                    let vt = 1.0 - (-(-r * tau).exp_m1()).powf(a);
                    let inner = 1.0 - s * vt;
                    let base = 1.0 - inner.powf(1.0 / a);
                    s - (a * a12 * g / (al * al * vt))
                        * ((tau * al).exp() * base.powf(q) - 1.0)
                        * base
                        * inner.powf((a - 1.0) / a)
                }
                MixingLaw::LogSeries { theta } => {
                    let b = theta * (-r * tau).exp() + 1.0;
                    let bs1 = (s * b.ln()).exp_m1();
                    let bs = bs1 + 1.0;
                    s - g * a12 * bs1 / (al * al * bs * b.ln())
                        * ((tau * al).exp() * (bs1 / theta).powf(q) - 1.0)
                }
            }
        }
        ClosedKendall::Gompertz { xi } => {
            let lam = c.lambda;
            let v = 1.0 - (-lam * t).exp() * s.ln() / xi;
            let sum = c.gamma1 * c.alpha1 + c.gamma2 * c.alpha2;
            s * (1.0
                - xi * (lam * t).exp()
                    * v
                    * (((c.gamma1 + c.gamma2) / lam - 2.0) * v.ln() + (1.0 / v - 1.0) * sum / lam))
        }
        ClosedKendall::LogSeries { rho } => {
            let lam = c.lambda;
            let lb = ((-lam * t).exp() * rho).ln_1p();
            let v1 = (s * lb).exp_m1();
            let v = v1 + 1.0;
            let sum = c.alpha1 * c.gamma1 + c.alpha2 * c.gamma2;
            let e = (lam * t).exp();
            s - v1 / (v * lb)
                * (sum * (e * v1 - rho) / (lam * rho)
                    + (2.0 - (c.gamma1 + c.gamma2) / lam) * ((v1 / rho).ln() + lam * t))
        }
    })
}

pub fn kendall_closed_curve(m: &Model, t: f64, s_grid: &[f64]) -> Result<KendallCurve> {
    let grid = s_grid
        .iter()
        .map(|&s| Ok((s, kendall_closed_form(m, t, s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(KendallCurve {
        t,
        source: KendallSource::ClosedForm,
        grid,
    })
}

/// `τ_t = 3 − 4 ∫₀¹ K_t(s) ds`.
pub fn kendall_tau(m: &Model, t: f64) -> Result<f64> {
    m.generator().elasticity(-1.0)?;
    let r = integrate_unit(
        |s| kendall_value(m, t, s, JMethod::Closed).unwrap_or(f64::NAN),
        1e-10,
    )?;
    Ok(3.0 - 4.0 * r.value)
}

/// `τ = 3 − 4 ∫₀¹ K` for an arbitrary Kendall function.
pub fn tau_from_kendall<K: Fn(f64) -> f64>(k: K) -> Result<f64> {
    Ok(3.0 - 4.0 * integrate_unit(k, 1e-10)?.value)
}

/// Empirical Kendall function of the survival copula: for each point,
/// `Wᵢ = #{j : xⱼ > xᵢ, yⱼ > yᵢ}/(n − 1)` and `K̂(s) = #{Wᵢ ≤ s}/n`.
pub fn empirical_kendall(pairs: &[(f64, f64)], s_grid: &[f64]) -> Result<KendallCurve> {
    if pairs.len() < 10_000 {
        return Err(Error::Domain(format!(
            "empirical Kendall function needs n >= 10000, got {}",
            pairs.len()
        )));
    }
    let w = dominance_levels(pairs);
    let mut sorted = w;
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let grid = s_grid
        .iter()
        .map(|&s| {
            let count = sorted.partition_point(|&x| x <= s);
            (s, count as f64 / n)
        })
        .collect();
    Ok(KendallCurve {
        t: 0.0,
        source: KendallSource::Empirical,
        grid,
    })
}

/// `Wᵢ` for every point, in input order. Sort by `x` descending and count
/// strictly larger `y` among strictly larger `x` with a Fenwick tree.
pub fn dominance_levels(pairs: &[(f64, f64)]) -> Vec<f64> {
    let n = pairs.len();
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let rank = |y: f64| ys.partition_point(|&v| v < y);
    let m = ys.len();
    let mut tree = vec![0u32; m + 1];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pairs[b].0.total_cmp(&pairs[a].0));
    let mut out = vec![0.0; n];
    let denom = (n.max(2) - 1) as f64;
    let mut inserted = 0u32;
    let mut k = 0;
    while k < n {
        let x = pairs[order[k]].0;
        let mut end = k;
        while end < n && pairs[order[end]].0 == x {
            end += 1;
        }
        for &idx in &order[k..end] {
            // inserted points with rank ≤ r(y)
            let r = rank(pairs[idx].1) + 1;
            let mut i = r;
            let mut le = 0u32;
            while i > 0 {
                le += tree[i];
                i &= i - 1;
            }
            out[idx] = (inserted - le) as f64 / denom;
        }
        for &idx in &order[k..end] {
            let mut i = rank(pairs[idx].1) + 1;
            while i <= m {
                tree[i] += 1;
                i += i & i.wrapping_neg();
            }
            inserted += 1;
        }
        k = end;
    }
    out
}

// ---------------------------------------------------------------------------
// Tail dependence

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    PowerAsymptotic,
    ExponentialAsymptotic,
    ClosedFormCore,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailClassification {
    pub beta: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub side: TailSide,
    pub t: f64,
    pub value: f64,
    pub method: TailMethod,
    pub classification: Option<TailClassification>,
    /// Present for numeric limits.
    pub converged: Option<bool>,
    pub sequence_tail: Vec<f64>,
}

impl TailReport {
    fn analytic(side: TailSide, t: f64, value: f64, method: TailMethod, cls: Option<TailClassification>) -> Self {
        TailReport {
            side,
            t,
            value: value.clamp(0.0, 1.0),
            method,
            classification: cls,
            converged: None,
            sequence_tail: Vec::new(),
        }
    }
}

/// Both coefficients at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSummary {
    pub t: f64,
    pub lambda_l: TailReport,
    pub lambda_u: TailReport,
}

/// `λ_L(C_Ḡ)`: `((1−α₂)/(1+α₁−α₂))^{1/α}` for `α₁ ≥ α₂` (swapped otherwise)
/// in the exchangeable-rate case, 0 otherwise.
pub fn core_tail_lower(core: &CoreParams) -> f64 {
    if !core.is_mu() {
        return 0.0;
    }
    let (hi, lo) = if core.alpha1 >= core.alpha2 {
        (core.alpha1, core.alpha2)
    } else {
        (core.alpha2, core.alpha1)
    };
    ((1.0 - lo) / (1.0 + hi - lo)).powf(1.0 / core.alpha)
}

/// `λ_U(C_Ḡ) = (g₁(0) + g₂(0) − λ)/max(g₁(0), g₂(0))`, which is
/// `(1−α₁−α₂)/(1−α₂)` (for `α₁ ≥ α₂`) in the exchangeable-rate case.
pub fn core_tail_upper(core: &CoreParams) -> f64 {
    let (g1, g2) = (core.density_at_zero(1), core.density_at_zero(2));
    ((g1 + g2 - core.lambda) / g1.max(g2)).clamp(0.0, 1.0)
}

pub fn tail_lower(m: &Model, t: f64) -> Result<TailReport> {
    let base = core_tail_lower(m.core());
    let side = TailSide::Lower;
    if matches!(m.generator().family(), Family::Identity) {
        return Ok(TailReport::analytic(side, t, base, TailMethod::ClosedFormCore, None));
    }
    match m.generator().lower_asymptotics() {
        LowerAsymptotics::Power { coef, beta } => Ok(TailReport::analytic(
            side,
            t,
            base.powf(beta),
            TailMethod::PowerAsymptotic,
            Some(TailClassification { beta, scale: coef }),
        )),
        LowerAsymptotics::Exponential { a, beta, .. } if base < 1.0 => Ok(TailReport::analytic(
            side,
            t,
            0.0,
            TailMethod::ExponentialAsymptotic,
            Some(TailClassification { beta, scale: a }),
        )),
        _ => tail_numeric(m, t, side),
    }
}

pub fn tail_upper(m: &Model, t: f64) -> Result<TailReport> {
    let base = core_tail_upper(m.core());
    let side = TailSide::Upper;
    if matches!(m.generator().family(), Family::Identity) {
        return Ok(TailReport::analytic(side, t, base, TailMethod::ClosedFormCore, None));
    }
    if t > 0.0 {
        // h_t is differentiable at 1 with h_t′(1) > 0, i.e. power 1 at 1
        let g = m.generator();
        let y = (-m.tau(t)).exp();
        if g.derivative_order() >= 1 && y > 0.0 {
            let d = g.prime(y)?;
            if d > 0.0 && d.is_finite() {
                let scale = y * d / g.eval(y)?;
                return Ok(TailReport::analytic(
                    side,
                    t,
                    base,
                    TailMethod::PowerAsymptotic,
                    Some(TailClassification { beta: 1.0, scale }),
                ));
            }
        }
        return tail_numeric(m, t, side);
    }
    match m.generator().upper_asymptotics() {
        UpperAsymptotics::Power { coef, beta } => Ok(TailReport::analytic(
            side,
            t,
            2.0 - (2.0 - base).powf(beta),
            TailMethod::PowerAsymptotic,
            Some(TailClassification { beta, scale: coef }),
        )),
        UpperAsymptotics::Other => tail_numeric(m, t, side),
    }
}

pub fn tail_dependence(m: &Model, t: f64, numeric: bool) -> Result<TailSummary> {
    let (l, u) = if numeric {
        (tail_numeric(m, t, TailSide::Lower)?, tail_numeric(m, t, TailSide::Upper)?)
    } else {
        (tail_lower(m, t)?, tail_upper(m, t)?)
    };
    Ok(TailSummary {
        t,
        lambda_l: l,
        lambda_u: u,
    })
}

/// Numeric limits of `C_t(u,u)/u` (lower) and `(1 − 2u + C_t(u,u))/(1 − u)`
/// as `u → 1` (upper), evaluated through `ln C_t`.
pub fn tail_numeric(m: &Model, t: f64, side: TailSide) -> Result<TailReport> {
    let est = match side {
        TailSide::Lower => limit_at_zero_with(
            |u| {
                let lu = u.ln();
                Ok((m.log_copula_t(t, lu, lu)? - lu).exp())
            },
            LimitOptions::default(),
        )?,
        TailSide::Upper => limit_at_zero_with(
            |e| {
                let lu = (-e).ln_1p();
                let one_minus_c = -m.log_copula_t(t, lu, lu)?.exp_m1();
                Ok(2.0 - one_minus_c / e)
            },
            LimitOptions {
                terms: 30,
                tol: 1e-5,
                ..LimitOptions::default()
            },
        )?,
    };
    Ok(TailReport {
        side,
        t,
        value: est.value.clamp(0.0, 1.0),
        method: TailMethod::Numeric,
        classification: None,
        converged: Some(est.converged),
        sequence_tail: est.sequence_tail,
    })
}
