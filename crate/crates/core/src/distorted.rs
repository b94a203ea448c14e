//! Distorted models `F̄ = h(Ḡ)`: joint and residual survival, residual
//! margins, the time-dependent copula and the bivariate Gompertz bridge.
//!
//! Model time `t` enters the generator as `τ = λt`, so that
//! `F̄(t, t) = h(e^{−λt})` and `F̄_t = h_τ ∘ Ḡ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{Family, Generator, MixingLaw};
use crate::lmp::CoreParams;
use crate::numerics::{integrate_upper_scaled, DEFAULT_TOL};

#[derive(Debug, Clone)]
pub struct Model {
    generator: Generator,
    core: CoreParams,
    label: String,
}

impl Model {
    pub fn new(generator: Generator, core: CoreParams, label: impl Into<String>) -> Result<Self> {
        core.check()?;
        core.singular_mass()?;
        if let Family::Mo15 { xi } = generator.family() {
            if *xi < 1.0 {
                return Err(Error::InvalidParameters(format!(
                    "mo15 generator needs xi >= 1 inside a model, got {xi}"
                )));
            }
        }
        Ok(Model {
            generator,
            core,
            label: label.into(),
        })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn core(&self) -> &CoreParams {
        &self.core
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Generator time `λt`.
    pub fn tau(&self, t: f64) -> f64 {
        self.core.lambda * t
    }

    /// `ln F̄(x, y)`.
    pub fn log_fbar(&self, x: f64, y: f64) -> Result<f64> {
        nonneg(x)?;
        nonneg(y)?;
        Ok(self.generator.log_h(self.core.log_gbar(x, y)))
    }

    pub fn fbar(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.log_fbar(x, y)?.exp())
    }

    /// `ln F̄_t(x, y) = ln h_τ(Ḡ(x, y))`.
    pub fn log_fbar_residual(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        nonneg(t)?;
        nonneg(x)?;
        nonneg(y)?;
        self.generator
            .log_residual_distortion(self.tau(t), self.core.log_gbar(x, y))
    }

    /// Survival of the residual vector `(X − t, Y − t | X > t, Y > t)`.
    pub fn fbar_residual(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.log_fbar_residual(t, x, y)?.exp())
    }

    /// `F̄(x+t, y+t) / F̄(t, t)`, formed in the log domain.
    pub fn fbar_ratio(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        nonneg(t)?;
        let num = self.log_fbar(x + t, y + t)?;
        let den = self.log_fbar(t, t)?;
        if !den.is_finite() {
            return Err(Error::Underflow(format!("F(t, t) underflows at t = {t}")));
        }
        Ok((num - den).exp())
    }

    /// The model-time distortion `d_{λt}(v)`.
    pub fn distortion(&self, t: f64, v: f64) -> Result<f64> {
        self.generator.time_distortion(self.tau(t), v)
    }

    /// `F̄(x+t, y+t)/F̄(t, t) − d_t(F̄(x, y))`.
    pub fn generalized_weak_residual(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let lhs = self.fbar_ratio(t, x, y)?;
        let lf = self.log_fbar(x, y)?;
        let rhs = if lf == f64::NEG_INFINITY {
            0.0
        } else {
            self.generator.log_time_distortion(self.tau(t), lf)?.exp()
        };
        Ok(lhs - rhs)
    }

    /// `h(Ḡᵢ(z))`.
    pub fn marginal_survival(&self, i: usize, z: f64) -> Result<f64> {
        self.core.marginal_survival(i, z)?;
        Ok(self.generator.log_h(self.core.log_marginal(i, z)).exp())
    }

    /// Margin of `F̄_t`: `h_τ(Ḡᵢ(x))`.
    pub fn residual_marginal(&self, i: usize, t: f64, x: f64) -> Result<f64> {
        nonneg(t)?;
        self.core.marginal_survival(i, x)?;
        Ok(self
            .generator
            .log_residual_distortion(self.tau(t), self.core.log_marginal(i, x))?
            .exp())
    }

    /// `ln C_t(e^{lu}, e^{lv})` with `C_t(u, v) = h_τ(C_Ḡ(h_τ⁻¹(u), h_τ⁻¹(v)))`.
    pub fn log_copula_t(&self, t: f64, lu: f64, lv: f64) -> Result<f64> {
        let tau = self.tau(t);
        let inv = |l: f64| self.generator.log_residual_inverse(tau, l);
        let c = self.core.log_core_copula(inv(lu)?, inv(lv)?);
        if c == f64::NEG_INFINITY {
            return Ok(c);
        }
        Ok(self
            .generator
            .log_residual_distortion(tau, c)?
            .min(lu)
            .min(lv))
    }

    pub fn copula_t(&self, t: f64, u: f64, v: f64) -> Result<f64> {
        nonneg(t)?;
        unit(u)?;
        unit(v)?;
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        if u == 0.0 || v == 0.0 {
            return Ok(0.0);
        }
        Ok(self.log_copula_t(t, u.ln(), v.ln())?.exp())
    }

    /// `S_t(x) = P(X = Y) h_τ(e^{−λx})`, survival of the singular component.
    pub fn singular_line_survival(&self, t: f64, x: f64) -> Result<f64> {
        nonneg(t)?;
        nonneg(x)?;
        let p0 = self.core.singular_mass()?;
        if p0 == 0.0 {
            return Ok(0.0);
        }
        let l = self
            .generator
            .log_residual_distortion(self.tau(t), -self.core.lambda * x)?;
        Ok(p0 * l.exp())
    }

    /// Power `p` with `h(e^{−z}) ~ C z^{−p}`, for generators whose distorted
    /// survivals decay polynomially.
    pub fn polynomial_tail_index(&self) -> Option<f64> {
        match self.generator.family() {
            Family::Pareto { mu, .. } => Some(1.0 / mu),
            Family::Mixing {
                law: MixingLaw::Gamma { a },
                ..
            } => Some(*a),
            _ => None,
        }
    }

    /// `e_i(t) = ∫₀^∞ d_t(F̄ᵢ(z)) dz`, i.e. the mean of the `i`-th margin of
    /// `F̄_t`. Heavy tails give `value = +∞` and a diagnostic.
    pub fn mean_excess(&self, i: usize, t: f64) -> Result<MeanExcess> {
        nonneg(t)?;
        self.core.marginal_survival(i, 0.0)?;
        if let Some(p) = self.polynomial_tail_index() {
            if p <= 1.0 {
                return Ok(MeanExcess {
                    value: f64::INFINITY,
                    diagnostic: Some(format!(
                        "residual margin decays like z^-{p}; the mean is infinite"
                    )),
                });
            }
        }
        let (g, _) = match i {
            1 => (self.core.gamma1, self.core.alpha1),
            _ => (self.core.gamma2, self.core.alpha2),
        };
        let scale = self.core.alpha / g;
        match integrate_upper_scaled(
            |z| self.residual_marginal(i, t, z).unwrap_or(f64::NAN),
            scale,
            DEFAULT_TOL,
        ) {
            Ok(q) => Ok(MeanExcess {
                value: q.value,
                diagnostic: None,
            }),
            Err(Error::NoConvergence { best, .. }) => Ok(MeanExcess {
                value: f64::INFINITY,
                diagnostic: Some(format!("quadrature did not settle (last estimate {best})")),
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanExcess {
    pub value: f64,
    pub diagnostic: Option<String>,
}

/// Bivariate Gompertz parameters
/// `F̄(x, y) = exp(−ξ₁(e^{λ₁x + (λ−λ₁)y} − 1) − (ξ − ξ₁)(e^{λy} − 1))`, `x ≥ y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mo15Params {
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub xi: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl Mo15Params {
    pub fn check(&self) -> Result<()> {
        let q = self;
        let all_pos = [q.lambda, q.lambda1, q.lambda2, q.xi, q.xi1, q.xi2]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        let rules: [(bool, &str); 6] = [
            (all_pos, "all rates and shapes must be > 0"),
            (q.xi >= 1.0, "xi >= 1"),
            (q.xi1 < q.xi && q.xi2 < q.xi, "xi_i < xi (so that alpha_i > 0)"),
            (q.lambda >= q.lambda1.max(q.lambda2), "lambda >= max(lambda1, lambda2)"),
            (
                q.lambda * (q.xi - 1.0) >= (q.lambda1 * (q.xi1 - 1.0)).max(q.lambda2 * (q.xi2 - 1.0)),
                "lambda*(xi-1) >= max(lambda_i*(xi_i-1))",
            ),
            (
                q.lambda1 * q.xi1 + q.lambda2 * q.xi2 >= q.lambda * q.xi,
                "lambda1*xi1 + lambda2*xi2 >= lambda*xi",
            ),
        ];
        for (ok, name) in rules {
            if !ok {
                return Err(Error::InvalidParameters(format!("bivariate Gompertz: {name} violated")));
            }
        }
        Ok(())
    }

    pub fn core(&self) -> CoreParams {
        CoreParams::new(
            self.lambda,
            1.0,
            self.lambda1,
            self.lambda2,
            1.0 - self.xi1 / self.xi,
            1.0 - self.xi2 / self.xi,
        )
    }

    /// `(λ₁ξ₁ + λ₂ξ₂)/(λξ) − 1`.
    pub fn singular_mass(&self) -> f64 {
        (self.lambda1 * self.xi1 + self.lambda2 * self.xi2) / (self.lambda * self.xi) - 1.0
    }

    /// Piecewise closed form of the joint survival.
    pub fn fbar_closed(&self, x: f64, y: f64) -> f64 {
        self.residual_closed(0.0, x, y)
    }

    /// `F̄_t(x, y) = exp(−e^{λt}[ξ₁(e^{λ₁x+(λ−λ₁)y} − 1) + (ξ−ξ₁)(e^{λy} − 1)])`
    /// for `x ≥ y`, symmetric otherwise.
    pub fn residual_closed(&self, t: f64, x: f64, y: f64) -> f64 {
        let (x, y, li, xii) = if x >= y {
            (x, y, self.lambda1, self.xi1)
        } else {
            (y, x, self.lambda2, self.xi2)
        };
        let inner = xii * (li * x + (self.lambda - li) * y).exp_m1()
            + (self.xi - xii) * (self.lambda * y).exp_m1();
        (-(self.lambda * t).exp() * inner).exp()
    }
}

/// The bivariate Gompertz model as `h(Ḡ)` with `h(x) = exp(−ξ(x^{−1} − 1))`
/// and core `α = 1`, `γᵢ = λᵢ`, `αᵢ = 1 − ξᵢ/ξ`.
pub fn mo15_bridge(q: &Mo15Params) -> Result<Model> {
    q.check()?;
    let g = Generator::new(Family::Mo15 { xi: q.xi })?;
    Model::new(g, q.core(), "bivariate-gompertz")
}

fn nonneg(z: f64) -> Result<()> {
    if z >= 0.0 && !z.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time {z} must be >= 0")))
    }
}

fn unit(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {u} outside [0, 1]")))
    }
}
