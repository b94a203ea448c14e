//! Joint-life annuities, life expectancies and premium tables.
//!
//! Two bases are offered. The residual basis values an annuity bought at
//! time `t` by a couple alive at `t`: `∫₀^∞ F̄_t(z, z) dz`. The deferred
//! basis values at time 0 an annuity starting at `t` and paying until the
//! horizon `H`: `∫_t^H F̄(z, z) dz`. Independence benchmarks replace the
//! joint survival by the product of the corresponding margins.
//!
//! Discounting is off by default (factor 1); a constant force `δ` multiplies
//! the integrand by `e^{−δz}` with `z` measured from the valuation date.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::distorted::Model;
use crate::error::{Error, Result};
use crate::generators::{Family, Generator};
use crate::lmp::CoreParams;
use crate::numerics::{integrate_interval, integrate_upper_scaled, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingQuote {
    pub t: f64,
    pub premium_joint: f64,
    pub premium_independent: f64,
    pub model_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Basis {
    /// `∫₀^∞` of the residual survival at `t`.
    Residual,
    /// `∫_t^H` of the unconditional survival, valued at 0.
    Deferred { horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PricingOptions {
    pub basis: Basis,
    /// Constant force of interest; 0 means no discounting.
    pub force: f64,
}

/// Horizon used by the reference premium table and life expectancies.
pub const TABLE_HORIZON: f64 = 100.0;

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions {
            basis: Basis::Deferred {
                horizon: TABLE_HORIZON,
            },
            force: 0.0,
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn check_force(force: f64) -> Result<()> {
    if !(force >= 0.0 && force.is_finite()) {
        return Err(Error::Domain(format!("discount force must be >= 0, got {force}")));
    }
    Ok(())
}

fn heavy_tail(m: &Model, force: f64, what: &str) -> Result<()> {
    if force > 0.0 {
        return Ok(());
    }
    if let Some(p) = m.polynomial_tail_index() {
        if p <= 1.0 {
            return Err(Error::Divergent(format!(
                "{what}: `{}` survival decays like z^-{p}, so the undiscounted integral is infinite",
                m.label()
            )));
        }
    }
    Ok(())
}

fn upper<F: Fn(f64) -> f64>(f: F, scale: f64, what: &str) -> Result<f64> {
    match integrate_upper_scaled(f, scale, DEFAULT_TOL) {
        Ok(q) => Ok(q.value),
        Err(Error::NoConvergence { best, .. }) => Err(Error::Divergent(format!(
            "{what}: quadrature did not settle (last estimate {best}); heavy tail suspected"
        ))),
        Err(e) => Err(e),
    }
}

fn unwrap_nan(r: Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

/// `∫₀^∞ F̄_t(z, z) dz = ∫₀^∞ h_τ(e^{−λz}) dz`.
pub fn joint_annuity(m: &Model, t: f64) -> Result<f64> {
    joint_annuity_with(m, t, 0.0)
}

pub fn joint_annuity_with(m: &Model, t: f64, force: f64) -> Result<f64> {
    check_t(t)?;
    check_force(force)?;
    heavy_tail(m, force, "joint annuity")?;
    let tau = m.tau(t);
    let lam = m.core().lambda;
    let g = m.generator();
    upper(
        |z| {
            let lf = unwrap_nan(g.log_residual_distortion(tau, -lam * z));
            (lf - force * z).exp()
        },
        1.0 / lam,
        "joint annuity",
    )
}

/// The same annuity through `∫₀^∞ h(e^{−λ(z+t)}) dz / h(e^{−λt})`.
pub fn joint_annuity_substitution(m: &Model, t: f64) -> Result<f64> {
    check_t(t)?;
    heavy_tail(m, 0.0, "joint annuity")?;
    let lam = m.core().lambda;
    let g = m.generator();
    let den = g.log_h(-lam * t);
    if !den.is_finite() {
        return Err(Error::Underflow(format!("F(t, t) underflows at t = {t}")));
    }
    upper(
        |z| (g.log_h(-lam * (z + t)) - den).exp(),
        1.0 / lam,
        "joint annuity",
    )
}

fn margin_scale(core: &CoreParams) -> f64 {
    core.alpha / core.gamma1.max(core.gamma2)
}

/// `∫₀^∞ F̄₁,t(z) F̄₂,t(z) dz` with the residual margins of `F̄_t`.
pub fn independent_annuity(m: &Model, t: f64) -> Result<f64> {
    independent_annuity_with(m, t, 0.0)
}

pub fn independent_annuity_with(m: &Model, t: f64, force: f64) -> Result<f64> {
    check_t(t)?;
    check_force(force)?;
    heavy_tail(m, force, "independent annuity")?;
    upper(
        |z| {
            let a = unwrap_nan(m.residual_marginal(1, t, z));
            let b = unwrap_nan(m.residual_marginal(2, t, z));
            a * b * (-force * z).exp()
        },
        margin_scale(m.core()),
        "independent annuity",
    )
}

/// `∫_t^H F̄(z, z) e^{−δz} dz`.
pub fn deferred_joint(m: &Model, t: f64, horizon: f64, force: f64) -> Result<f64> {
    check_t(t)?;
    check_force(force)?;
    if horizon <= t {
        return Ok(0.0);
    }
    integrate_interval(
        |z| (unwrap_nan(m.log_fbar(z, z)) - force * z).exp(),
        t,
        horizon,
        DEFAULT_TOL,
    )
    .map(|q| q.value)
}

/// `∫_t^H F̄₁(z) F̄₂(z) e^{−δz} dz`.
pub fn deferred_independent(m: &Model, t: f64, horizon: f64, force: f64) -> Result<f64> {
    check_t(t)?;
    check_force(force)?;
    if horizon <= t {
        return Ok(0.0);
    }
    integrate_interval(
        |z| {
            let a = unwrap_nan(m.marginal_survival(1, z));
            let b = unwrap_nan(m.marginal_survival(2, z));
            a * b * (-force * z).exp()
        },
        t,
        horizon,
        DEFAULT_TOL,
    )
    .map(|q| q.value)
}

/// `∫₀^H h(Ḡᵢ(z)) dz`; `None` integrates to infinity.
pub fn life_expectancy(m: &Model, i: usize, horizon: Option<f64>) -> Result<f64> {
    if i != 1 && i != 2 {
        return Err(Error::Domain(format!("component must be 1 or 2, got {i}")));
    }
    let f = |z: f64| unwrap_nan(m.marginal_survival(i, z));
    match horizon {
        Some(h) => {
            if !(h > 0.0) {
                return Err(Error::Domain(format!("horizon must be positive, got {h}")));
            }
            integrate_interval(f, 0.0, h, DEFAULT_TOL).map(|q| q.value)
        }
        None => {
            heavy_tail(m, 0.0, "life expectancy")?;
            upper(f, margin_scale(m.core()), "life expectancy")
        }
    }
}

pub fn quote(m: &Model, t: f64, opts: &PricingOptions) -> Result<PricingQuote> {
    let (premium_joint, premium_independent) = match opts.basis {
        Basis::Residual => (
            joint_annuity_with(m, t, opts.force)?,
            independent_annuity_with(m, t, opts.force)?,
        ),
        Basis::Deferred { horizon } => (
            deferred_joint(m, t, horizon, opts.force)?,
            deferred_independent(m, t, horizon, opts.force)?,
        ),
    };
    Ok(PricingQuote {
        t,
        premium_joint,
        premium_independent,
        model_label: m.label().to_string(),
    })
}

/// Quotes on the default basis (deferred, horizon 100, no discounting).
pub fn premium_table(m: &Model, ts: &[f64]) -> Result<Vec<PricingQuote>> {
    premium_table_with(m, ts, &PricingOptions::default())
}

pub fn premium_table_with(m: &Model, ts: &[f64], opts: &PricingOptions) -> Result<Vec<PricingQuote>> {
    ts.par_iter().map(|&t| quote(m, t, opts)).collect()
}

/// True when both premium columns are non-increasing in `t`.
pub fn premiums_decreasing(quotes: &[PricingQuote]) -> bool {
    quotes.windows(2).all(|w| {
        w[1].t < w[0].t
            || (w[1].premium_joint <= w[0].premium_joint
                && w[1].premium_independent <= w[0].premium_independent)
    })
}

pub fn table_csv(quotes: &[PricingQuote]) -> String {
    let mut s = String::from("t,joint,independent\n");
    for q in quotes {
        let _ = writeln!(s, "{},{},{}", q.t, q.premium_joint, q.premium_independent);
    }
    s
}

/// Fixed-width text with one row per `t`.
pub fn table_text(quotes: &[PricingQuote]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>8} {:>12} {:>12}", "t", "joint", "indep.");
    for q in quotes {
        let _ = writeln!(
            s,
            "{:>8} {:>12.4} {:>12.4}",
            q.t, q.premium_joint, q.premium_independent
        );
    }
    s
}

/// Premium-table reference model with positive dependence: log-series
/// generator (`ρ = 10`) over a rounded core that needs slack `1e−4`.
pub fn reference_left() -> Result<Model> {
    let core = CoreParams::new(0.0641, 1.0, 0.05, 0.0463, 0.31, 0.3611).with_slack(1e-4);
    let g = Generator::new(Family::LogSeries { a: 1.0, theta: 10.0 })?;
    Model::new(g, core, "left")
}

/// Premium-table reference model with negative dependence.
pub fn reference_right() -> Result<Model> {
    let core = CoreParams::new(0.0726, 1.0, 0.046, 0.0426, 0.15, 0.2129).with_slack(1e-4);
    let g = Generator::new(Family::LogSeries { a: 1.0, theta: 10.0 })?;
    Model::new(g, core, "right")
}

/// Reference premiums for `t = 0, 10, 20`: joint then independent.
pub const REFERENCE_LEFT: [[f64; 3]; 2] = [[27.2170, 18.4047, 11.8301], [25.7805, 16.9899, 10.5226]];
pub const REFERENCE_RIGHT: [[f64; 3]; 2] = [[24.0691, 15.4105, 9.2493], [25.2736, 16.6022, 10.3524]];
pub const REFERENCE_TS: [f64; 3] = [0.0, 10.0, 20.0];
