//! Distortion generators: strictly increasing bijections `h` of `[0, 1]`,
//! their time distortions `d_t`, `h_t`, the pseudo-product and the aging
//! and multiplicativity classifications.
//!
//! Every family is written once as `ℓ ↦ ln h(e^ℓ)` over [`Scalar`], so the
//! same formula yields values (on `f64`) and exact derivatives (on [`Jet`]).

mod jet;
mod survival;

use std::f64::consts::{FRAC_PI_4, PI};

pub use jet::{Jet, Scalar};
pub use survival::SurvivalFn;

use crate::error::{Error, Result};
use crate::numerics::invert_monotone_expanding;

/// Mixing distribution of the common multiplicative factor `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixingLaw {
    /// Standard gamma with shape `a`: `M(u) = (1 − u)^{−a}`.
    Gamma { a: f64 },
    /// Positive stable with index `a`: `M(u) = exp(−(−u)^a)`.
    PositiveStable { a: f64 },
    /// Sibuya with parameter `a`: `M(u) = 1 − (1 − e^u)^a`.
    Sibuya { a: f64 },
    /// Logarithmic series with parameter `θ ∈ (−1, 0)`:
    /// `M(u) = ln(1 + θe^u) / ln(1 + θ)`.
    LogSeries { theta: f64 },
}

impl MixingLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MixingLaw::Gamma { a } => a > 0.0 && a.is_finite(),
            MixingLaw::PositiveStable { a } | MixingLaw::Sibuya { a } => a > 0.0 && a <= 1.0,
            MixingLaw::LogSeries { theta } => theta > -1.0 && theta < 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!("mixing law {self:?} out of range")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MixingLaw::Gamma { .. } => "gamma",
            MixingLaw::PositiveStable { .. } => "positive_stable",
            MixingLaw::Sibuya { .. } => "sibuya",
            MixingLaw::LogSeries { .. } => "log_series",
        }
    }

    /// `ln M_Z(u)` for `u ≤ 0`.
    fn log_mgf<T: Scalar>(&self, u: T) -> T {
        match *self {
            MixingLaw::Gamma { a } => -(-u).ln_1p().scale(a),
            MixingLaw::PositiveStable { a } => -(-u).powf(a),
            MixingLaw::Sibuya { a } => {
                if a == 1.0 {
                    u
                } else {
                    log1mexp(log1mexp(u).scale(a))
                }
            }
            MixingLaw::LogSeries { theta } => {
                (u.exp().scale(theta).ln_1p() / T::cst(theta.ln_1p())).ln()
            }
        }
    }
}

/// `ln(1 − e^u)` for `u < 0`, accurate at both ends.
fn log1mexp<T: Scalar>(u: T) -> T {
    if u.value() > -std::f64::consts::LN_2 {
        (-u.exp_m1()).ln()
    } else {
        (-u.exp()).ln_1p()
    }
}

/// Generator families. Parameters are stored as given; see
/// [`Generator::new`] for admissible ranges.
#[derive(Debug, Clone)]
pub enum Family {
    Identity,
    /// `h(x) = x^β`.
    Power { beta: f64 },
    /// `h(x) = exp(−(−a ln x)^α)`.
    Weibull { a: f64, alpha: f64 },
    /// `h(x) = exp(−ξ(x^{−μ} − 1))`.
    Gompertz { xi: f64, mu: f64 },
    /// `h(x) = exp(−ξ(x^{−1} − 1))`; needs `ξ ≥ 1` inside a model.
    Mo15 { xi: f64 },
    /// `h(x) = (1 − a ln x)^{−1/μ}`.
    Pareto { a: f64, mu: f64 },
    /// `h(x) = (θx^{−a} + 1 − θ)^{−1}`.
    Logistic { a: f64, theta: f64 },
    /// `h(x) = ln(1 + θx^a) / ln(1 + θ)`, `θ > −1`, `θ ≠ 0`.
    LogSeries { a: f64, theta: f64 },
    /// `h(x) = (4/π) atan(x^a)`.
    Arctan { a: f64 },
    /// `h(x) = sin(θx) / sin θ`, `θ ∈ (0, π/2]`.
    Sine { theta: f64 },
    /// `h(x) = Σ c_k x^k`; `c_0 = 0`, `Σ c_k = 1`, `h′ > 0` on `(0, 1]`.
    Polynomial { coeffs: Vec<f64> },
    /// `h(z) = M_Z(ratio · ln z)`.
    Mixing { law: MixingLaw, ratio: f64 },
    /// `h(x) = H̄(−ln x)`.
    FromSurvival(SurvivalFn),
}

/// Behaviour of `h(x)` as `x → 0⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowerAsymptotics {
    /// `h(x) ~ coef · x^β`.
    Power { coef: f64, beta: f64 },
    /// `h(x) = d · exp(−a x^{−β})`.
    Exponential { d: f64, a: f64, beta: f64 },
    Other,
}

/// Behaviour of `1 − h(x)` as `x → 1⁻`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperAsymptotics {
    /// `1 − h(x) ~ coef · (1 − x)^β`.
    Power { coef: f64, beta: f64 },
    Other,
}

/// A validated generator. Immutable; cheap to clone.
#[derive(Debug, Clone)]
pub struct Generator {
    family: Family,
}

fn check(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameters(what.to_string()))
    }
}

fn pos(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl Generator {
    pub fn new(family: Family) -> Result<Self> {
        match &family {
            Family::Identity => {}
            Family::Power { beta } => check(pos(*beta), "power: beta must be > 0")?,
            Family::Weibull { a, alpha } => {
                check(pos(*a) && pos(*alpha), "weibull: a and alpha must be > 0")?
            }
            Family::Gompertz { xi, mu } => {
                check(pos(*xi) && pos(*mu), "gompertz: xi and mu must be > 0")?
            }
            Family::Mo15 { xi } => check(pos(*xi), "mo15: xi must be > 0")?,
            Family::Pareto { a, mu } => check(pos(*a) && pos(*mu), "pareto: a and mu must be > 0")?,
            Family::Logistic { a, theta } => {
                check(pos(*a) && pos(*theta), "logistic: a and theta must be > 0")?
            }
            Family::LogSeries { a, theta } => check(
                pos(*a) && *theta > -1.0 && *theta != 0.0 && theta.is_finite(),
                "log_series: a must be > 0 and theta in (-1, 0) or (0, inf)",
            )?,
            Family::Arctan { a } => check(pos(*a), "arctan: a must be > 0")?,
            Family::Sine { theta } => check(
                *theta > 0.0 && *theta <= PI / 2.0,
                "sine: theta must lie in (0, pi/2]",
            )?,
            Family::Polynomial { coeffs } => validate_polynomial(coeffs)?,
            Family::Mixing { law, ratio } => {
                law.validate()?;
                check(pos(*ratio), "mixing: ratio must be > 0")?
            }
            Family::FromSurvival(_) => {}
        }
        Ok(Generator { family })
    }

    pub fn identity() -> Self {
        Generator {
            family: Family::Identity,
        }
    }

    pub fn from_mixing(law: MixingLaw, ratio: f64) -> Result<Self> {
        Generator::new(Family::Mixing { law, ratio })
    }

    pub fn from_survival(s: SurvivalFn) -> Self {
        Generator {
            family: Family::FromSurvival(s),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Stable family tag used in configs and reports.
    pub fn family_name(&self) -> &'static str {
        match &self.family {
            Family::Identity => "identity",
            Family::Power { .. } => "power",
            Family::Weibull { .. } => "weibull",
            Family::Gompertz { .. } => "gompertz",
            Family::Mo15 { .. } => "mo15",
            Family::Pareto { .. } => "pareto",
            Family::Logistic { .. } => "logistic",
            Family::LogSeries { .. } => "log_series",
            Family::Arctan { .. } => "arctan",
            Family::Sine { .. } => "sine",
            Family::Polynomial { .. } => "polynomial",
            Family::Mixing { .. } => "mixing",
            Family::FromSurvival(_) => "from_survival",
        }
    }

    pub fn has_closed_inverse(&self) -> bool {
        !matches!(self.family, Family::Polynomial { .. } | Family::FromSurvival(_))
    }

    /// Highest derivative order available (0 to 3).
    pub fn derivative_order(&self) -> usize {
        match &self.family {
            Family::FromSurvival(s) if s.has_density() => 1,
            Family::FromSurvival(_) => 0,
            _ => 3,
        }
    }

    fn log_h_generic<T: Scalar>(&self, l: T) -> T {
        match &self.family {
            Family::Identity => l,
            Family::Power { beta } => l.scale(*beta),
            Family::Weibull { a, alpha } => -(-l).scale(*a).powf(*alpha),
            Family::Gompertz { xi, mu } => -(-l).scale(*mu).exp_m1().scale(*xi),
            Family::Mo15 { xi } => -(-l).exp_m1().scale(*xi),
            Family::Pareto { a, mu } => -(-l).scale(*a).ln_1p().scale(1.0 / mu),
            Family::Logistic { a, theta } => -(-l).scale(*a).exp_m1().scale(*theta).ln_1p(),
            Family::LogSeries { a, theta } => {
                (l.scale(*a).exp().scale(*theta).ln_1p() / T::cst(theta.ln_1p())).ln()
            }
            Family::Arctan { a } => l.scale(*a).exp().atan().scale(4.0 / PI).ln(),
            Family::Sine { theta } => (l.exp().scale(*theta).sin() / T::cst(theta.sin())).ln(),
            Family::Polynomial { coeffs } => {
                let x = l.exp();
                let mut acc = T::cst(0.0);
                for &c in coeffs.iter().rev() {
                    acc = acc * x + T::cst(c);
                }
                acc.ln()
            }
            Family::Mixing { law, ratio } => law.log_mgf(l.scale(*ratio)),
            Family::FromSurvival(s) => T::cst(s.survival(-l.value()).ln()),
        }
    }

    /// `ln h(e^ℓ)` for `ℓ ≤ 0`.
    pub fn log_h(&self, l: f64) -> f64 {
        if l == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        if l >= 0.0 {
            return 0.0;
        }
        self.log_h_generic(l).min(0.0)
    }

    /// Jet of `ℓ ↦ ln h(e^ℓ)` at `ℓ`.
    fn log_h_jet(&self, l: f64) -> Result<Jet> {
        if let Family::FromSurvival(s) = &self.family {
            let z = -l;
            let f = s.survival(z);
            let dens = s
                .density(z)
                .ok_or_else(|| Error::Capability("survival generator has no density".into()))?;
            return Ok(Jet {
                v: f.ln(),
                d1: dens / f,
                d2: f64::NAN,
                d3: f64::NAN,
            });
        }
        Ok(self.log_h_generic(Jet::variable(l)))
    }

    /// Elasticity `x h′(x) / h(x)` at `x = e^ℓ`.
    pub fn elasticity(&self, l: f64) -> Result<f64> {
        if self.derivative_order() < 1 {
            return Err(Error::Capability(format!(
                "{} generator has no derivative",
                self.family_name()
            )));
        }
        Ok(self.log_h_jet(l)?.d1)
    }

    /// Inverse of [`Generator::log_h`]: `ln h⁻¹(e^{lu})` for `lu ≤ 0`.
    pub fn log_h_inv(&self, lu: f64) -> f64 {
        if lu == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        if lu >= 0.0 {
            return 0.0;
        }
        let w = -lu;
        let l = match &self.family {
            Family::Identity => lu,
            Family::Power { beta } => lu / beta,
            Family::Weibull { a, alpha } => -w.powf(1.0 / alpha) / a,
            Family::Gompertz { xi, mu } => -(w / xi).ln_1p() / mu,
            Family::Mo15 { xi } => -(w / xi).ln_1p(),
            Family::Pareto { a, mu } => -(mu * w).exp_m1() / a,
            Family::Logistic { a, theta } => {
                // ln(1 + (e^w − 1)/θ), split to stay finite for large w
                let m = if w > 1.0 {
                    w + (-(1.0 - theta) * (-w).exp()).ln_1p() - theta.ln()
                } else {
                    (w.exp_m1() / theta).ln_1p()
                };
                -m / a
            }
            Family::LogSeries { a, theta } => log_series_inverse(lu, *theta) / a,
            Family::Arctan { a } => {
                let u = lu.exp();
                let l = if u < 1e-8 {
                    lu + FRAC_PI_4.ln()
                } else {
                    (FRAC_PI_4 * u).tan().ln()
                };
                l / a
            }
            Family::Sine { theta } => {
                let u = lu.exp();
                if u < 1e-8 {
                    lu + (theta.sin() / theta).ln()
                } else {
                    ((u * theta.sin()).asin() / theta).ln()
                }
            }
            Family::Mixing { law, ratio } => {
                let m = match *law {
                    MixingLaw::Gamma { a } => -(w / a).exp_m1(),
                    MixingLaw::PositiveStable { a } => -w.powf(1.0 / a),
                    MixingLaw::Sibuya { a } => {
                        if lu < -700.0 {
                            lu - a.ln()
                        } else {
                            log1mexp(log1mexp(lu) / a)
                        }
                    }
                    MixingLaw::LogSeries { theta } => log_series_inverse(lu, theta),
                };
                m / ratio
            }
            Family::Polynomial { .. } | Family::FromSurvival(_) => self.numeric_log_inverse(lu),
        };
        l.min(0.0)
    }

    fn numeric_log_inverse(&self, lu: f64) -> f64 {
        let tol = 1e-14 * lu.abs().max(1.0);
        match invert_monotone_expanding(|s| self.log_h(-s), lu, 0.0, 1.0, tol) {
            Ok(s) => -s,
            Err(Error::NoConvergence { best, .. }) => -best,
            Err(_) => f64::NAN,
        }
    }

    /// `h(x)`, clamped exactly at the endpoints.
    pub fn eval(&self, x: f64) -> Result<f64> {
        unit_domain(x, "h")?;
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(self.log_h(x.ln()).exp().clamp(0.0, 1.0))
    }

    /// `h⁻¹(u)`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        unit_domain(u, "h⁻¹")?;
        if u == 0.0 {
            return Ok(0.0);
        }
        let l = self.log_h_inv(u.ln());
        if l.is_nan() {
            return Err(Error::NotANumber { at: u });
        }
        Ok(l.exp().clamp(0.0, 1.0))
    }

    /// The `order`-th derivative of `h` at `x ∈ (0, 1]`, `order ∈ 1..=3`.
    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        if !(1..=3).contains(&order) {
            return Err(Error::Domain(format!("derivative order {order} not in 1..=3")));
        }
        if order > self.derivative_order() {
            return Err(Error::Capability(format!(
                "{} generator has derivatives up to order {}",
                self.family_name(),
                self.derivative_order()
            )));
        }
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::Domain(format!("derivative point {x} outside (0, 1]")));
        }
        if let Family::FromSurvival(s) = &self.family {
            let z = -x.ln();
            return Ok(s.density(z).unwrap_or(f64::NAN) / x);
        }
        let lx = Jet::variable(x).ln();
        let h = self.log_h_generic(lx).exp();
        Ok(match order {
            1 => h.d1,
            2 => h.d2,
            _ => h.d3,
        })
    }

    pub fn prime(&self, x: f64) -> Result<f64> {
        self.derivative(x, 1)
    }

    /// `d_t(x) = h(e^{−t} h⁻¹(x)) / h(e^{−t})`.
    pub fn time_distortion(&self, t: f64, x: f64) -> Result<f64> {
        time_domain(t)?;
        unit_domain(x, "d_t")?;
        if t == 0.0 || x == 0.0 || x == 1.0 {
            return Ok(x);
        }
        let v = self.log_time_distortion(t, x.ln())?;
        Ok(v.exp().clamp(0.0, 1.0))
    }

    /// `ln d_t(e^{lx})`.
    pub fn log_time_distortion(&self, t: f64, lx: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(lx);
        }
        let den = self.log_h(-t);
        if !den.is_finite() {
            return Err(Error::Underflow(format!("h(e^-t) underflows at t = {t}")));
        }
        self.log_residual_distortion(t, self.log_h_inv(lx))
    }

    /// `(ξ, μ)` for the families with `ln h(e^l) = −ξ(e^{−μl} − 1)`, whose
    /// residual distortions stay in closed form: `ln h_t(e^l) = −ξe^{μt}(e^{−μl} − 1)`.
    /// The generic ratio would subtract two numbers of size `ξe^{μt}`.
    fn gompertz_shape(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Gompertz { xi, mu } => Some((xi, mu)),
            Family::Mo15 { xi } => Some((xi, 1.0)),
            _ => None,
        }
    }

    /// `h_t(x) = h(e^{−t} x) / h(e^{−t})`.
    pub fn residual_distortion(&self, t: f64, x: f64) -> Result<f64> {
        time_domain(t)?;
        unit_domain(x, "h_t")?;
        if x == 0.0 {
            return Ok(0.0);
        }
        if x == 1.0 {
            return Ok(1.0);
        }
        Ok(self.log_residual_distortion(t, x.ln())?.exp().clamp(0.0, 1.0))
    }

    /// `ln h_t(e^{lx})`.
    pub fn log_residual_distortion(&self, t: f64, lx: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(self.log_h(lx));
        }
        if let Some((xi, mu)) = self.gompertz_shape() {
            return Ok((-xi * (mu * t).exp() * (-mu * lx).exp_m1()).min(0.0));
        }
        let den = self.log_h(-t);
        if !den.is_finite() {
            return Err(Error::Underflow(format!("h(e^-t) underflows at t = {t}")));
        }
        Ok((self.log_h(lx - t) - den).min(0.0))
    }

    /// `ln h_t⁻¹(e^{lu}) = t + ln h⁻¹(e^{lu} h(e^{−t}))`.
    pub fn log_residual_inverse(&self, t: f64, lu: f64) -> Result<f64> {
        if lu == f64::NEG_INFINITY {
            return Ok(lu);
        }
        if let Some((xi, mu)) = self.gompertz_shape() {
            return Ok((-(-lu / (xi * (mu * t).exp())).ln_1p() / mu).min(0.0));
        }
        let den = self.log_h(-t);
        if !den.is_finite() {
            return Err(Error::Underflow(format!("h(e^-t) underflows at t = {t}")));
        }
        Ok((t + self.log_h_inv(lu + den)).min(0.0))
    }

    /// `h_t⁻¹(u) = e^t h⁻¹(u h(e^{−t}))`.
    pub fn residual_inverse(&self, t: f64, u: f64) -> Result<f64> {
        time_domain(t)?;
        unit_domain(u, "h_t⁻¹")?;
        if u == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(1.0);
        }
        Ok(self.log_residual_inverse(t, u.ln())?.exp())
    }

    /// `a ⊗_h b = h(h⁻¹(a) h⁻¹(b))`.
    pub fn pseudo_product(&self, a: f64, b: f64) -> Result<f64> {
        unit_domain(a, "pseudo-product")?;
        unit_domain(b, "pseudo-product")?;
        if a == 0.0 || b == 0.0 {
            return Ok(0.0);
        }
        let l = self.log_h_inv(a.ln()) + self.log_h_inv(b.ln());
        Ok(self.log_h(l).exp().clamp(0.0, 1.0))
    }

    pub fn lower_asymptotics(&self) -> LowerAsymptotics {
        use LowerAsymptotics as L;
        match &self.family {
            Family::Identity => L::Power { coef: 1.0, beta: 1.0 },
            Family::Power { beta } => L::Power { coef: 1.0, beta: *beta },
            Family::Weibull { a, alpha } if *alpha == 1.0 => L::Power { coef: 1.0, beta: *a },
            Family::Weibull { .. } => L::Other,
            Family::Gompertz { xi, mu } => L::Exponential {
                d: xi.exp(),
                a: *xi,
                beta: *mu,
            },
            Family::Mo15 { xi } => L::Exponential {
                d: xi.exp(),
                a: *xi,
                beta: 1.0,
            },
            Family::Pareto { .. } => L::Other,
            Family::Logistic { a, theta } => L::Power {
                coef: 1.0 / theta,
                beta: *a,
            },
            Family::LogSeries { a, theta } => L::Power {
                coef: theta / theta.ln_1p(),
                beta: *a,
            },
            Family::Arctan { a } => L::Power {
                coef: 4.0 / PI,
                beta: *a,
            },
            Family::Sine { theta } => L::Power {
                coef: theta / theta.sin(),
                beta: 1.0,
            },
            Family::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .find(|(_, &c)| c != 0.0)
                .map(|(k, &c)| L::Power {
                    coef: c,
                    beta: k as f64,
                })
                .unwrap_or(L::Other),
            Family::Mixing { law, ratio } => match *law {
                MixingLaw::Gamma { .. } => L::Other,
                MixingLaw::PositiveStable { a } if a == 1.0 => L::Power {
                    coef: 1.0,
                    beta: *ratio,
                },
                MixingLaw::PositiveStable { .. } => L::Other,
                MixingLaw::Sibuya { a } => L::Power { coef: a, beta: *ratio },
                MixingLaw::LogSeries { theta } => L::Power {
                    coef: theta / theta.ln_1p(),
                    beta: *ratio,
                },
            },
            Family::FromSurvival(_) => L::Other,
        }
    }

    pub fn upper_asymptotics(&self) -> UpperAsymptotics {
        use UpperAsymptotics as U;
        let linear = |c: f64| U::Power { coef: c, beta: 1.0 };
        match &self.family {
            Family::Identity => linear(1.0),
            Family::Power { beta } => linear(*beta),
            Family::Weibull { a, alpha } => U::Power {
                coef: a.powf(*alpha),
                beta: *alpha,
            },
            Family::Gompertz { xi, mu } => linear(xi * mu),
            Family::Mo15 { xi } => linear(*xi),
            Family::Pareto { a, mu } => linear(a / mu),
            Family::Logistic { a, theta } => linear(a * theta),
            Family::LogSeries { a, theta } => linear(a * theta / ((1.0 + theta) * theta.ln_1p())),
            Family::Arctan { a } => linear(2.0 * a / PI),
            Family::Sine { theta } => linear(theta / theta.tan()),
            Family::Polynomial { coeffs } => linear(
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| k as f64 * c)
                    .sum(),
            ),
            Family::Mixing { law, ratio } => match *law {
                MixingLaw::Gamma { a } => linear(a * ratio),
                MixingLaw::PositiveStable { a } | MixingLaw::Sibuya { a } => U::Power {
                    coef: ratio.powf(a),
                    beta: a,
                },
                MixingLaw::LogSeries { theta } => {
                    linear(ratio * theta / ((1.0 + theta) * theta.ln_1p()))
                }
            },
            Family::FromSurvival(s) => match s.density(0.0) {
                Some(f0) if f0 > 0.0 && f0.is_finite() => linear(f0),
                _ => U::Other,
            },
        }
    }

    /// Tail weight of `z ↦ h(e^{−z})`: `Some(rate)` when it decays at least
    /// exponentially with that rate, `None` for polynomial-type decay.
    pub fn exponential_decay_rate(&self) -> Option<f64> {
        match self.lower_asymptotics() {
            LowerAsymptotics::Power { beta, .. } => Some(beta),
            LowerAsymptotics::Exponential { .. } => Some(f64::INFINITY),
            LowerAsymptotics::Other => match &self.family {
                Family::Weibull { alpha, .. } if *alpha > 1.0 => Some(f64::INFINITY),
                Family::Mixing {
                    law: MixingLaw::PositiveStable { .. },
                    ..
                } => Some(0.0),
                _ => None,
            },
        }
    }
}

/// `ln(expm1(e^{lu} ln(1+θ)) / θ)`, accurate for very negative `lu`.
fn log_series_inverse(lu: f64, theta: f64) -> f64 {
    let big_l = theta.ln_1p();
    let v = lu.exp() * big_l;
    if v.abs() < 1e-5 {
        lu + (big_l / theta).ln() + (v / 2.0 + v * v / 6.0).ln_1p()
    } else {
        (v.exp_m1() / theta).ln()
    }
}

fn validate_polynomial(coeffs: &[f64]) -> Result<()> {
    check(coeffs.len() >= 2, "polynomial: need at least a linear term")?;
    check(
        coeffs.iter().all(|c| c.is_finite()),
        "polynomial: coefficients must be finite",
    )?;
    check(coeffs[0] == 0.0, "polynomial: constant term must be 0")?;
    let sum: f64 = coeffs.iter().sum();
    check((sum - 1.0).abs() < 1e-12, "polynomial: coefficients must sum to 1")?;
    // h′(1) = 0 is allowed
    for k in 1..1000 {
        let x = k as f64 / 1000.0;
        let mut d = 0.0;
        for (j, &c) in coeffs.iter().enumerate().skip(1).rev() {
            d = d * x + j as f64 * c;
        }
        check(d > 0.0, "polynomial: derivative must be > 0 on (0, 1]")?;
    }
    Ok(())
}

fn unit_domain(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what}: argument {x} outside [0, 1]")))
    }
}

fn time_domain(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time {t} must be finite and >= 0")))
    }
}

// ---------------------------------------------------------------------------
// Aging and multiplicativity

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum AgingClass {
    #[serde(rename = "NBU")]
    Nbu,
    #[serde(rename = "NWU")]
    Nwu,
    /// `d_t(x) = x` on the grid (exponential, memoryless).
    #[serde(rename = "memoryless")]
    Memoryless,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FailureRateClass {
    #[serde(rename = "IFR")]
    Ifr,
    #[serde(rename = "DFR")]
    Dfr,
    #[serde(rename = "memoryless")]
    Memoryless,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AgingNode {
    pub t: f64,
    pub x: f64,
    pub d_t: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AgingProfile {
    pub nbu_nwu: AgingClass,
    pub ifr_dfr: FailureRateClass,
    pub evidence_grid: Vec<AgingNode>,
}

#[derive(Debug, Clone)]
pub struct AgingGrid {
    pub ts: Vec<f64>,
    pub xs: Vec<f64>,
}

impl Default for AgingGrid {
    fn default() -> Self {
        AgingGrid {
            ts: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
            xs: (1..=19).map(|k| k as f64 * 0.05).collect(),
        }
    }
}

const SIGN_TOL: f64 = 1e-13;
const SIGN_QUORUM: f64 = 0.95;

/// Counts of strictly negative, strictly positive and total comparisons.
#[derive(Default)]
struct SignTally {
    neg: usize,
    posv: usize,
    total: usize,
}

impl SignTally {
    fn push(&mut self, diff: f64) {
        self.total += 1;
        if diff < -SIGN_TOL {
            self.neg += 1;
        } else if diff > SIGN_TOL {
            self.posv += 1;
        }
    }

    /// `Some(-1)`, `Some(1)`, `Some(0)` (all ties) or `None` (mixed/weak).
    fn verdict(&self) -> Option<i8> {
        let quorum = (SIGN_QUORUM * self.total as f64).ceil() as usize;
        if self.neg == 0 && self.posv == 0 {
            Some(0)
        } else if self.posv == 0 && self.neg >= quorum {
            Some(-1)
        } else if self.neg == 0 && self.posv >= quorum {
            Some(1)
        } else {
            None
        }
    }
}

/// NBU/NWU from the sign of `d_t(x) − x` and IFR/DFR from the monotonicity
/// of `d_t(x)` in `t`, over `t > 0` nodes of the grid.
pub fn aging_profile(g: &Generator, grid: &AgingGrid) -> Result<AgingProfile> {
    let mut ts = grid.ts.clone();
    ts.sort_by(f64::total_cmp);
    let mut evidence = Vec::with_capacity(ts.len() * grid.xs.len());
    let mut nbu = SignTally::default();
    let mut ifr = SignTally::default();
    for &x in &grid.xs {
        let mut prev: Option<f64> = None;
        for &t in &ts {
            let d = g.time_distortion(t, x)?;
            evidence.push(AgingNode { t, x, d_t: d });
            if t > 0.0 {
                nbu.push(d - x);
            }
            if let Some(p) = prev {
                ifr.push(d - p);
            }
            prev = Some(d);
        }
    }
    let nbu_nwu = match nbu.verdict() {
        Some(-1) => AgingClass::Nbu,
        Some(1) => AgingClass::Nwu,
        Some(_) => AgingClass::Memoryless,
        None => AgingClass::Neither,
    };
    let ifr_dfr = match ifr.verdict() {
        Some(-1) => FailureRateClass::Ifr,
        Some(1) => FailureRateClass::Dfr,
        Some(_) => FailureRateClass::Memoryless,
        None => FailureRateClass::Neither,
    };
    Ok(AgingProfile {
        nbu_nwu,
        ifr_dfr,
        evidence_grid: evidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicativity {
    Sub,
    Super,
    Neither,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MultiplicativityReport {
    pub empirical: Multiplicativity,
    /// `h″ ≤ 0` and `h‴ ≤ 0` on the derivative grid.
    pub sub_condition: bool,
    /// `h″ ≥ 0`, `h‴ ≥ 0` and `h(x) ≥ x²` on the derivative grid.
    pub super_condition: bool,
    /// The condition matching the empirical verdict holds.
    pub sufficient_condition_met: bool,
}

/// Sign of `h(xy) − h(x)h(y)` over `points × points` interior nodes, and
/// the derivative conditions on a 99-point grid.
pub fn multiplicativity_check(g: &Generator, points: usize) -> Result<MultiplicativityReport> {
    let points = points.max(2);
    let nodes: Vec<f64> = (1..=points).map(|k| k as f64 / (points + 1) as f64).collect();
    let mut tally = SignTally::default();
    for &x in &nodes {
        for &y in &nodes {
            tally.push(g.eval(x * y)? - g.eval(x)? * g.eval(y)?);
        }
    }
    // Equality everywhere is neither sub- nor super-multiplicative.
    let empirical = match tally.verdict() {
        Some(-1) => Multiplicativity::Sub,
        Some(1) => Multiplicativity::Super,
        _ => Multiplicativity::Neither,
    };
    let (mut sub, mut sup) = (g.derivative_order() >= 3, g.derivative_order() >= 3);
    if sub {
        let eps = 1e-10;
        for k in 1..100 {
            let x = k as f64 / 100.0;
            let d2 = g.derivative(x, 2)?;
            let d3 = g.derivative(x, 3)?;
            let scale = 1.0 + d2.abs() + d3.abs();
            sub &= d2 <= eps * scale && d3 <= eps * scale;
            sup &= d2 >= -eps * scale && d3 >= -eps * scale && g.eval(x)? >= x * x - eps;
        }
    }
    let sufficient_condition_met = match empirical {
        Multiplicativity::Sub => sub,
        Multiplicativity::Super => sup,
        Multiplicativity::Neither => false,
    };
    Ok(MultiplicativityReport {
        empirical,
        sub_condition: sub,
        super_condition: sup,
        sufficient_condition_met,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn catalog() -> Vec<Generator> {
        let fams = vec![
            Family::Identity,
            Family::Power { beta: 2.5 },
            Family::Weibull { a: 1.3, alpha: 0.7 },
            Family::Weibull { a: 0.8, alpha: 2.0 },
            Family::Gompertz { xi: 1.5, mu: 0.8 },
            Family::Mo15 { xi: 2.0 },
            Family::Pareto { a: 1.0, mu: 2.0 },
            Family::Logistic { a: 1.2, theta: 0.4 },
            Family::Logistic { a: 0.9, theta: 3.0 },
            Family::LogSeries { a: 1.0, theta: 10.0 },
            Family::LogSeries { a: 1.5, theta: -0.6 },
            Family::Arctan { a: 2.0 },
            Family::Sine { theta: 1.2 },
            Family::Polynomial {
                coeffs: vec![0.0, 1.5, 0.0, -0.5],
            },
            Family::Mixing {
                law: MixingLaw::Gamma { a: 2.0 },
                ratio: 0.4,
            },
            Family::Mixing {
                law: MixingLaw::PositiveStable { a: 0.5 },
                ratio: 1.5,
            },
            Family::Mixing {
                law: MixingLaw::Sibuya { a: 0.6 },
                ratio: 0.3,
            },
            Family::Mixing {
                law: MixingLaw::LogSeries { theta: -0.7 },
                ratio: 2.0,
            },
        ];
        fams.into_iter().map(|f| Generator::new(f).unwrap()).collect()
    }

    #[test]
    fn closed_form_values() {
        let g = Generator::new(Family::Mo15 { xi: 1.0 }).unwrap();
        close(g.eval(0.5).unwrap(), (-1.0f64).exp(), 1e-15);
        let id = Generator::identity();
        close(id.eval(0.37).unwrap(), 0.37, 1e-16);
        let ls = Generator::new(Family::LogSeries { a: 1.0, theta: 10.0 }).unwrap();
        assert_eq!(ls.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn time_distortion_examples() {
        let gz = Generator::new(Family::Gompertz {
            xi: 0.7,
            mu: 2f64.ln(),
        })
        .unwrap();
        close(gz.time_distortion(1.0, 0.5).unwrap(), 0.25, 1e-14);
        let pa = Generator::new(Family::Pareto { a: 1.0, mu: 1.0 }).unwrap();
        close(pa.time_distortion(1.0, 0.5).unwrap(), 2.0 / 3.0, 1e-14);
        for g in catalog() {
            assert_eq!(g.time_distortion(0.0, 0.3).unwrap(), 0.3);
        }
    }

    #[test]
    fn residual_distortion_of_power_is_time_free() {
        let g = Generator::new(Family::Power { beta: 1.7 }).unwrap();
        for &t in &[0.0, 1.0, 7.0] {
            close(g.residual_distortion(t, 0.4).unwrap(), 0.4f64.powf(1.7), 1e-14);
            assert_eq!(g.residual_distortion(t, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn pseudo_product_examples() {
        let g = Generator::new(Family::Weibull { a: 1.0, alpha: 0.5 }).unwrap();
        let a = (-1.0f64).exp();
        close(g.pseudo_product(a, a).unwrap(), (-(2f64.sqrt())).exp(), 1e-14);
        close(g.pseudo_product(0.3, 1.0).unwrap(), 0.3, 1e-14);
        close(
            Generator::identity().pseudo_product(0.3, 0.6).unwrap(),
            0.18,
            1e-15,
        );
    }

    #[test]
    fn pseudo_product_is_invariant_under_powers() {
        let base = Generator::new(Family::Logistic { a: 1.0, theta: 0.5 }).unwrap();
        let powered = Generator::new(Family::Logistic { a: 2.3, theta: 0.5 }).unwrap();
        for &a in &[0.1, 0.4, 0.8] {
            for &b in &[0.05, 0.5, 0.95] {
                close(
                    base.pseudo_product(a, b).unwrap(),
                    powered.pseudo_product(a, b).unwrap(),
                    1e-10,
                );
            }
        }
    }

    #[test]
    fn mixing_matches_closed_forms() {
        let g = Generator::from_mixing(MixingLaw::Gamma { a: 2.0 }, 1.0).unwrap();
        close(g.eval((-1.0f64).exp()).unwrap(), 0.25, 1e-15);
        let s = Generator::from_mixing(MixingLaw::Sibuya { a: 1.0 }, 0.3).unwrap();
        for &z in &[0.1, 0.5, 0.9] {
            close(s.eval(z).unwrap(), z.powf(0.3), 1e-15);
        }
        let l = Generator::from_mixing(MixingLaw::LogSeries { theta: -0.5 }, 1.0).unwrap();
        assert_eq!(l.eval(1.0).unwrap(), 1.0);
        close(l.eval(0.4).unwrap(), (1.0 - 0.2f64).ln() / 0.5f64.ln(), 1e-14);
        let st = Generator::from_mixing(MixingLaw::PositiveStable { a: 0.5 }, 2.0).unwrap();
        close(st.eval(0.3).unwrap(), (-(-2.0 * 0.3f64.ln()).sqrt()).exp(), 1e-15);
    }

    #[test]
    fn mixing_law_ranges() {
        assert!(MixingLaw::Gamma { a: 0.0 }.validate().is_err());
        assert!(MixingLaw::PositiveStable { a: 1.2 }.validate().is_err());
        assert!(MixingLaw::Sibuya { a: 1.0 }.validate().is_ok());
        assert!(MixingLaw::LogSeries { theta: 0.2 }.validate().is_err());
    }

    #[test]
    fn survival_generators() {
        let e = Generator::from_survival(SurvivalFn::new("exp", |z: f64| (-z).exp()).unwrap());
        for &x in &[0.1, 0.5, 0.9] {
            close(e.eval(x).unwrap(), x, 1e-15);
        }
        let w = Generator::from_survival(SurvivalFn::new("weibull", |z: f64| (-z * z).exp()).unwrap());
        let w_closed = Generator::new(Family::Weibull { a: 1.0, alpha: 2.0 }).unwrap();
        let p = Generator::from_survival(SurvivalFn::new("pareto", |z: f64| 1.0 / (1.0 + z)).unwrap());
        for &x in &[0.05, 0.3, 0.7] {
            close(w.eval(x).unwrap(), w_closed.eval(x).unwrap(), 1e-15);
            close(p.eval(x).unwrap(), 1.0 / (1.0 - x.ln()), 1e-15);
        }
        assert!(SurvivalFn::new("bad", |z: f64| (z - 1.0).abs().min(1.0)).is_err());
    }

    #[test]
    fn survival_generator_distortion_matches_definition() {
        let hbar = |z: f64| 1.0 / (1.0 + z).powi(2);
        let g = Generator::from_survival(SurvivalFn::new("p2", hbar).unwrap());
        for &t in &[0.5, 2.0, 6.0] {
            for &x in &[0.1f64, 0.45, 0.9] {
                let q = 1.0 / x.sqrt() - 1.0;
                close(g.time_distortion(t, x).unwrap(), hbar(t + q) / hbar(t), 1e-9);
            }
        }
    }

    #[test]
    fn derivatives_need_capability() {
        let g = Generator::from_survival(SurvivalFn::new("exp", |z: f64| (-z).exp()).unwrap());
        assert!(matches!(g.prime(0.5), Err(Error::Capability(_))));
        let g = Generator::from_survival(
            SurvivalFn::new("exp", |z: f64| (-z).exp())
                .unwrap()
                .with_density(|z: f64| (-z).exp()),
        );
        close(g.prime(0.5).unwrap(), 1.0, 1e-14);
        assert!(matches!(g.derivative(0.5, 2), Err(Error::Capability(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for g in catalog() {
            for &x in &[0.2, 0.5, 0.8] {
                let e = 1e-5;
                let fd = (g.eval(x + e).unwrap() - g.eval(x - e).unwrap()) / (2.0 * e);
                let d1 = g.prime(x).unwrap();
                assert!((d1 - fd).abs() < 1e-6 * (1.0 + d1.abs()), "{:?} {x}", g.family());
                let fd2 = (g.prime(x + e).unwrap() - g.prime(x - e).unwrap()) / (2.0 * e);
                let d2 = g.derivative(x, 2).unwrap();
                assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()), "{:?} {x}", g.family());
                let fd3 = (g.derivative(x + e, 2).unwrap() - g.derivative(x - e, 2).unwrap()) / (2.0 * e);
                let d3 = g.derivative(x, 3).unwrap();
                assert!((d3 - fd3).abs() < 1e-4 * (1.0 + d3.abs()), "{:?} {x}", g.family());
            }
        }
    }

    #[test]
    fn domain_errors() {
        let g = Generator::identity();
        assert!(matches!(g.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(g.inverse(-0.1), Err(Error::Domain(_))));
        assert!(matches!(g.time_distortion(-1.0, 0.5), Err(Error::Domain(_))));
        let gz = Generator::new(Family::Gompertz { xi: 1.0, mu: 1.0 }).unwrap();
        assert!(matches!(gz.time_distortion(800.0, 0.5), Err(Error::Underflow(_))));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Generator::new(Family::Sine { theta: 2.0 }).is_err());
        assert!(Generator::new(Family::LogSeries { a: 1.0, theta: 0.0 }).is_err());
        assert!(Generator::new(Family::Polynomial {
            coeffs: vec![0.0, -0.5, 1.5]
        })
        .is_err());
        assert!(Generator::new(Family::Weibull { a: -1.0, alpha: 1.0 }).is_err());
    }

    #[test]
    fn aging_catalog() {
        let grid = AgingGrid::default();
        let cases = [
            (Family::Weibull { a: 1.0, alpha: 2.0 }, AgingClass::Nbu, FailureRateClass::Ifr),
            (Family::Weibull { a: 1.0, alpha: 0.5 }, AgingClass::Nwu, FailureRateClass::Dfr),
            (Family::Gompertz { xi: 1.0, mu: 0.5 }, AgingClass::Nbu, FailureRateClass::Ifr),
            (Family::Pareto { a: 1.0, mu: 1.0 }, AgingClass::Nwu, FailureRateClass::Dfr),
            (Family::Identity, AgingClass::Memoryless, FailureRateClass::Memoryless),
        ];
        for (f, a, i) in cases {
            let p = aging_profile(&Generator::new(f.clone()).unwrap(), &grid).unwrap();
            assert_eq!((p.nbu_nwu, p.ifr_dfr), (a, i), "{f:?}");
            assert_eq!(p.evidence_grid.len(), 6 * 19);
        }
    }

    #[test]
    fn multiplicativity_examples() {
        let sub = Generator::new(Family::Polynomial {
            coeffs: vec![0.0, 1.5, 0.0, -0.5],
        })
        .unwrap();
        let r = multiplicativity_check(&sub, 19).unwrap();
        assert_eq!(r.empirical, Multiplicativity::Sub);
        assert!(r.sufficient_condition_met);

        let sup = Generator::new(Family::Polynomial {
            coeffs: vec![0.0, 0.25, 0.5, 0.25],
        })
        .unwrap();
        let r = multiplicativity_check(&sup, 19).unwrap();
        assert_eq!(r.empirical, Multiplicativity::Super);
        assert!(r.sufficient_condition_met);

        let r = multiplicativity_check(&Generator::identity(), 19).unwrap();
        assert_eq!(r.empirical, Multiplicativity::Neither);
        assert!(r.sub_condition && r.super_condition);
    }

    #[test]
    fn gompertz_residual_shortcut() {
        for f in [Family::Mo15 { xi: 2.0 }, Family::Gompertz { xi: 0.7, mu: 1.5 }] {
            let g = Generator::new(f).unwrap();
            for lx in [-3.0, -0.4, -1e-6] {
                let generic = g.log_h(lx - 1.0) - g.log_h(-1.0);
                let fast = g.log_residual_distortion(1.0, lx).unwrap();
                assert!((fast - generic).abs() <= 1e-12 * generic.abs().max(1.0));
                let back = g.log_residual_distortion(20.0, g.log_residual_inverse(20.0, lx).unwrap()).unwrap();
                assert!((back - lx).abs() <= 1e-14 * lx.abs());
            }
        }
    }

    proptest! {
        #[test]
        fn bijection_axioms(idx in 0usize..18, u in 1e-6f64..0.999_999) {
            let g = &catalog()[idx];
            prop_assert_eq!(g.eval(0.0).unwrap(), 0.0);
            prop_assert!((g.eval(1.0).unwrap() - 1.0).abs() <= 1e-12);
            // heavy-tailed families send small u below the f64 range: compare in logs
            let lx = g.log_h_inv(u.ln());
            let back = g.log_h(lx).exp();
            prop_assert!((back - u).abs() <= 1e-10, "{:?}: {} vs {}", g.family(), back, u);
            if lx > -700.0 {
                let back = g.eval(g.inverse(u).unwrap()).unwrap();
                prop_assert!((back - u).abs() <= 1e-10, "{:?}: {} vs {}", g.family(), back, u);
            }
        }

        #[test]
        fn strictly_increasing(idx in 0usize..18, x in 0.001f64..0.998) {
            let g = &catalog()[idx];
            prop_assert!(g.eval(x).unwrap() < g.eval(x + 0.001).unwrap());
        }

        #[test]
        fn time_distortion_is_continuous_in_t(idx in 0usize..18, t in 0.0f64..5.0, x in 0.05f64..0.95) {
            let g = &catalog()[idx];
            let a = g.time_distortion(t, x).unwrap();
            let b = g.time_distortion(t + 1e-7, x).unwrap();
            prop_assert!((a - b).abs() < 1e-5);
        }

        #[test]
        fn weibull_random_parameters(a in 0.1f64..5.0, alpha in 0.2f64..4.0, u in 1e-8f64..0.99999) {
            let g = Generator::new(Family::Weibull { a, alpha }).unwrap();
            // h⁻¹(u) leaves the f64 range for small a and alpha
            let lx = g.log_h_inv(u.ln());
            prop_assert!((g.log_h(lx).exp() - u).abs() <= 1e-10);
            if lx > -700.0 {
                let back = g.eval(g.inverse(u).unwrap()).unwrap();
                prop_assert!((back - u).abs() <= 1e-10);
            }
        }
    }
}
