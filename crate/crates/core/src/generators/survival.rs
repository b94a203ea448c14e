use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::invert_monotone_expanding;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A univariate survival function `H̄` of a strictly positive lifetime,
/// optionally with its density `−H̄′`.
#[derive(Clone)]
pub struct SurvivalFn {
    label: String,
    survival: RealFn,
    density: Option<RealFn>,
}

impl fmt::Debug for SurvivalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurvivalFn")
            .field("label", &self.label)
            .field("has_density", &self.density.is_some())
            .finish()
    }
}

impl SurvivalFn {
    /// Wraps `survival` after checking `H̄(0) = 1` and strict decrease on a
    /// log-spaced grid over `[0, 10⁴]`.
    pub fn new<F>(label: impl Into<String>, survival: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let s = SurvivalFn {
            label: label.into(),
            survival: Arc::new(survival),
            density: None,
        };
        s.check()?;
        Ok(s)
    }

    pub fn with_density<F>(mut self, density: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.density = Some(Arc::new(density));
        self
    }

    fn check(&self) -> Result<()> {
        let s0 = self.survival(0.0);
        if (s0 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameters(format!(
                "survival function `{}` has H(0) = {s0}, expected 1",
                self.label
            )));
        }
        let mut prev = s0;
        let mut z = 1e-6;
        while z < 1e4 {
            let v = self.survival(z);
            if !(v >= 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameters(format!(
                    "survival function `{}` leaves [0, 1] at z = {z}: {v}",
                    self.label
                )));
            }
            if v > prev || (v == prev && v > 0.0) {
                return Err(Error::NotMonotone(format!(
                    "survival function `{}` is not strictly decreasing near z = {z}",
                    self.label
                )));
            }
            prev = v;
            z *= 1.5;
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn survival(&self, z: f64) -> f64 {
        (self.survival)(z)
    }

    pub fn density(&self, z: f64) -> Option<f64> {
        self.density.as_ref().map(|f| f(z))
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    /// `H̄⁻¹(u)` by bracketing inversion.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("survival level {u} outside (0, 1]")));
        }
        if u == 1.0 {
            return Ok(0.0);
        }
        invert_monotone_expanding(|z| self.survival(z), u, 0.0, 1.0, 1e-15 * u.max(1e-300))
    }
}
