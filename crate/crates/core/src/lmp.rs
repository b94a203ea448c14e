//! The undistorted weak lack-of-memory family
//! `Ḡ(x, y) = e^{−λy} (α₁ + (1 − α₁) e^{γ₁(x−y)})^{−1/α}` for `x ≥ y`
//! (symmetric for `x < y`), and the strong-case solution `H̄(x + ay)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::SurvivalFn;
use crate::numerics::invert_monotone_expanding;

pub const DEFAULT_SLACK: f64 = 1e-9;

/// Parameters of the core family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreParams {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_slack() -> f64 {
    DEFAULT_SLACK
}

/// A violated admissibility condition and by how much.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub bound: String,
    /// Positive amount by which the inequality fails.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    /// `max(γ₁, γ₂)/α`, must not exceed `λ`.
    pub lambda_lower: f64,
    /// `(γ₁(1−α₁) + γ₂(1−α₂))/α`, must not be exceeded by `λ`.
    pub lambda_upper: f64,
    pub slack: f64,
    pub violations: Vec<Violation>,
    /// Violations absorbed by the slack.
    pub tolerated: Vec<Violation>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<()> {
        if self.ok {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .map(|v| format!("{} (violated by {:e})", v.bound, v.margin))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidParameters(msg))
    }
}

const LOWER_BOUND: &str = "max(gamma1, gamma2)/alpha <= lambda";
const UPPER_BOUND: &str = "lambda <= (gamma1*(1-alpha1) + gamma2*(1-alpha2))/alpha";

impl CoreParams {
    pub fn new(lambda: f64, alpha: f64, gamma1: f64, gamma2: f64, alpha1: f64, alpha2: f64) -> Self {
        CoreParams {
            lambda,
            alpha,
            gamma1,
            gamma2,
            alpha1,
            alpha2,
            slack: DEFAULT_SLACK,
        }
    }

    /// The exchangeable-rate case `γ₁ = γ₂ = γ`, `λ = γ/α`.
    pub fn mu(alpha: f64, gamma: f64, alpha1: f64, alpha2: f64) -> Self {
        CoreParams::new(gamma / alpha, alpha, gamma, gamma, alpha1, alpha2)
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = slack;
        self
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut field = |name: &str, ok: bool| {
            if !ok {
                violations.push(Violation {
                    bound: name.to_string(),
                    margin: f64::NAN,
                });
            }
        };
        let fin = |x: f64| x.is_finite() && x > 0.0;
        field("lambda > 0", fin(self.lambda));
        field("alpha > 0", fin(self.alpha));
        field("gamma1 > 0", fin(self.gamma1));
        field("gamma2 > 0", fin(self.gamma2));
        field("0 < alpha1 < 1", self.alpha1 > 0.0 && self.alpha1 < 1.0);
        field("0 < alpha2 < 1", self.alpha2 > 0.0 && self.alpha2 < 1.0);
        field("slack >= 0", self.slack >= 0.0 && self.slack.is_finite());

        let lambda_lower = self.gamma1.max(self.gamma2) / self.alpha;
        let lambda_upper =
            (self.gamma1 * (1.0 - self.alpha1) + self.gamma2 * (1.0 - self.alpha2)) / self.alpha;
        let mut tolerated = Vec::new();
        if violations.is_empty() {
            for (name, margin) in [
                (LOWER_BOUND, lambda_lower - self.lambda),
                (UPPER_BOUND, self.lambda - lambda_upper),
            ] {
                if margin > 0.0 {
                    let v = Violation {
                        bound: name.to_string(),
                        margin,
                    };
                    if margin > self.slack {
                        violations.push(v);
                    } else {
                        tolerated.push(v);
                    }
                }
            }
        }
        ValidationReport {
            ok: violations.is_empty(),
            lambda_lower,
            lambda_upper,
            slack: self.slack,
            violations,
            tolerated,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.validate().into_result()
    }

    pub fn is_mu(&self) -> bool {
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        rel(self.gamma1, self.gamma2) && rel(self.lambda, self.gamma1 / self.alpha)
    }

    fn side(&self, i: usize) -> (f64, f64) {
        match i {
            1 => (self.gamma1, self.alpha1),
            _ => (self.gamma2, self.alpha2),
        }
    }

    /// `ln Ḡᵢ(z)`.
    pub fn log_marginal(&self, i: usize, z: f64) -> f64 {
        let (g, a) = self.side(i);
        let e = g * z;
        // ln(αᵢ + (1−αᵢ)e^{e}) = e + ln(1 − αᵢ(1 − e^{−e}))
        -(e + (-a * -(-e).exp_m1()).ln_1p()) / self.alpha
    }

    pub fn marginal_survival(&self, i: usize, z: f64) -> Result<f64> {
        index(i)?;
        nonneg(z)?;
        Ok(self.log_marginal(i, z).exp())
    }

    /// Hazard `gᵢ/Ḡᵢ`.
    pub fn marginal_hazard(&self, i: usize, z: f64) -> f64 {
        let (g, a) = self.side(i);
        (g / self.alpha) * (1.0 - a) / (a * (-g * z).exp() + 1.0 - a)
    }

    /// `gᵢ = −dḠᵢ/dz`.
    pub fn marginal_density(&self, i: usize, z: f64) -> Result<f64> {
        index(i)?;
        nonneg(z)?;
        Ok(self.log_marginal(i, z).exp() * self.marginal_hazard(i, z))
    }

    /// `gᵢ(0) = γᵢ(1 − αᵢ)/α`.
    pub fn density_at_zero(&self, i: usize) -> f64 {
        let (g, a) = self.side(i);
        g * (1.0 - a) / self.alpha
    }

    /// `Ḡᵢ⁻¹(e^{lu})`.
    pub fn marginal_quantile_log(&self, i: usize, lu: f64) -> f64 {
        let (g, a) = self.side(i);
        let w = -self.alpha * lu;
        let m = if w < 1.0 {
            (w.exp_m1() / (1.0 - a)).ln_1p()
        } else {
            w + (-a * (-w).exp()).ln_1p() - (1.0 - a).ln()
        };
        (m / g).max(0.0)
    }

    pub fn marginal_quantile(&self, i: usize, u: f64) -> Result<f64> {
        index(i)?;
        if u == 0.0 {
            return Err(Error::Domain("quantile at u = 0 is +infinity".into()));
        }
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("quantile level {u} outside (0, 1]")));
        }
        if u == 1.0 {
            return Ok(0.0);
        }
        Ok(self.marginal_quantile_log(i, u.ln()))
    }

    /// `ln Ḡ(x, y)`.
    pub fn log_gbar(&self, x: f64, y: f64) -> f64 {
        if x == y {
            return -self.lambda * x;
        }
        if x > y {
            -self.lambda * y + self.log_marginal(1, x - y)
        } else {
            -self.lambda * x + self.log_marginal(2, y - x)
        }
    }

    pub fn gbar(&self, x: f64, y: f64) -> Result<f64> {
        nonneg(x)?;
        nonneg(y)?;
        Ok(self.log_gbar(x, y).exp())
    }

    /// `(g₁(0) + g₂(0))/λ − 1`, possibly slightly negative inside the slack.
    pub fn singular_mass_raw(&self) -> f64 {
        (self.density_at_zero(1) + self.density_at_zero(2)) / self.lambda - 1.0
    }

    /// `P(X = Y)`; clamped to 0 (with a warning) when negative within slack.
    /// The slack is in rate units, so the mass tolerance is `slack/λ`.
    pub fn singular_mass(&self) -> Result<f64> {
        let m = self.singular_mass_raw();
        if m < -self.slack / self.lambda {
            return Err(Error::InvalidParameters(format!(
                "singular mass {m:e} is negative beyond slack {:e}",
                self.slack
            )));
        }
        if m < 0.0 {
            log::warn!("singular mass {m:e} clamped to 0 (parameters are inside slack)");
            return Ok(0.0);
        }
        Ok(m)
    }

    /// `P(X > Y)` and `P(X < Y)`: `1 − gᵢ(0)/λ`, renormalised with the
    /// clamped singular mass so the three probabilities sum to 1.
    pub fn side_probabilities(&self) -> Result<(f64, f64, f64)> {
        let p0 = self.singular_mass()?;
        let p1 = (1.0 - self.density_at_zero(1) / self.lambda).max(0.0);
        let p2 = (1.0 - self.density_at_zero(2) / self.lambda).max(0.0);
        let k = (1.0 - p0) / (p1 + p2);
        Ok((p0, p1 * k, p2 * k))
    }

    /// `ln C_Ḡ(e^{lu}, e^{lv})` via `Ḡ(Ḡ₁⁻¹, Ḡ₂⁻¹)`.
    pub fn log_core_copula(&self, lu: f64, lv: f64) -> f64 {
        if lu == f64::NEG_INFINITY || lv == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let x = self.marginal_quantile_log(1, lu.min(0.0));
        let y = self.marginal_quantile_log(2, lv.min(0.0));
        self.log_gbar(x, y).min(lu).min(lv)
    }

    /// Closed form `(α₂U + α₁V + (1−α₁−α₂) max(U, V))^{−1/α}` with
    /// `U = (u^{−α} − α₁)/(1 − α₁)`; `None` outside the exchangeable-rate case.
    pub fn core_copula_closed(&self, u: f64, v: f64) -> Option<f64> {
        if !self.is_mu() {
            return None;
        }
        if u == 0.0 || v == 0.0 {
            return Some(0.0);
        }
        let (a, a1, a2) = (self.alpha, self.alpha1, self.alpha2);
        let uu = (u.powf(-a) - a1) / (1.0 - a1);
        let vv = (v.powf(-a) - a2) / (1.0 - a2);
        Some((a2 * uu + a1 * vv + (1.0 - a1 - a2) * uu.max(vv)).powf(-1.0 / a))
    }

    pub fn core_copula_generic(&self, u: f64, v: f64) -> f64 {
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        self.log_core_copula(u.ln(), v.ln()).exp()
    }

    pub fn core_copula(&self, u: f64, v: f64) -> Result<f64> {
        unit(u)?;
        unit(v)?;
        if u == 1.0 {
            return Ok(v);
        }
        if v == 1.0 {
            return Ok(u);
        }
        Ok(self
            .core_copula_closed(u, v)
            .unwrap_or_else(|| self.core_copula_generic(u, v)))
    }

    /// `Ḡ(x+t, y+t) − Ḡ(x, y)Ḡ(t, t)`.
    pub fn weak_lmp_residual(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        weak_lmp_residual_of(|a, b| self.gbar(a, b), x, y, t)
    }
}

/// The weak lack-of-memory residual of an arbitrary bivariate survival.
pub fn weak_lmp_residual_of<F>(f: F, x: f64, y: f64, t: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(f(x + t, y + t)? - f(x, y)? * f(t, t)?)
}

fn index(i: usize) -> Result<()> {
    if i == 1 || i == 2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("margin index {i} must be 1 or 2")))
    }
}

fn nonneg(z: f64) -> Result<()> {
    if z >= 0.0 {
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

/// Strong-case solution `F̄(x, y) = H̄(x + ay)` with `H̄` convex.
#[derive(Debug, Clone)]
pub struct StrongCore {
    hbar: SurvivalFn,
    a: f64,
}

impl StrongCore {
    pub fn new(hbar: SurvivalFn, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameters(format!("scale a = {a} must be > 0")));
        }
        // second differences on a log-spaced grid
        let mut z = 1e-4;
        while z < 1e3 {
            let h = 0.25 * z;
            let d2 = hbar.survival(z + h) - 2.0 * hbar.survival(z) + hbar.survival(z - h);
            if d2 < -1e-14 {
                return Err(Error::InvalidParameters(format!(
                    "survival `{}` is not convex near z = {z}",
                    hbar.label()
                )));
            }
            z *= 1.3;
        }
        Ok(StrongCore { hbar, a })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        nonneg(x)?;
        nonneg(y)?;
        Ok(self.hbar.survival(x + self.a * y))
    }

    /// `d_{s,t}(v) = H̄(s + ta + H̄⁻¹(v)) / H̄(s + ta)`.
    pub fn distortion(&self, s: f64, t: f64, v: f64) -> Result<f64> {
        nonneg(s)?;
        nonneg(t)?;
        unit(v)?;
        if v == 0.0 {
            return Ok(0.0);
        }
        let c = s + t * self.a;
        let q = self.hbar.quantile(v)?;
        Ok(self.hbar.survival(c + q) / self.hbar.survival(c))
    }

    /// `H̄⁻¹`, exposed for callers mapping levels back to times.
    pub fn quantile(&self, v: f64) -> Result<f64> {
        invert_monotone_expanding(|z| self.hbar.survival(z), v, 0.0, 1.0, 1e-15)
    }
}
