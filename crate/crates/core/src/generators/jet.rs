//! Third-order Taylor jets: values carrying their first three derivatives
//! with respect to a single seed variable. Generator formulas are written
//! once over [`Scalar`] and evaluated either on `f64` or on [`Jet`].

use std::ops::{Add, Div, Mul, Neg, Sub};

/// The arithmetic a generator formula may use.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(c: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn exp_m1(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn atan(self) -> Self;
    fn sin(self) -> Self;

    fn scale(self, c: f64) -> Self {
        self * Self::cst(c)
    }
    fn shift(self, c: f64) -> Self {
        self + Self::cst(c)
    }
}

impl Scalar for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
}

/// `(f, f′, f″, f‴)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub fn variable(x: f64) -> Self {
        Jet {
            v: x,
            d1: 1.0,
            d2: 0.0,
            d3: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Jet {
            v: c,
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
        }
    }

    /// Chain rule (Faà di Bruno to third order) for an outer function whose
    /// derivatives at `self.v` are `f0..f3`.
    fn compose(self, f0: f64, f1: f64, f2: f64, f3: f64) -> Self {
        let (g1, g2, g3) = (self.d1, self.d2, self.d3);
        Jet {
            v: f0,
            d1: f1 * g1,
            d2: f2 * g1 * g1 + f1 * g2,
            d3: f3 * g1 * g1 * g1 + 3.0 * f2 * g1 * g2 + f1 * g3,
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d3: self.d3 + o.d3,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d3: self.d3 - o.d3,
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
            d3: -self.d3,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.v * o.d1 + self.d1 * o.v,
            d2: self.v * o.d2 + 2.0 * self.d1 * o.d1 + self.d2 * o.v,
            d3: self.v * o.d3 + 3.0 * self.d1 * o.d2 + 3.0 * self.d2 * o.d1 + self.d3 * o.v,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let r = 1.0 / o.v;
        let recip = o.compose(r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r);
        self * recip
    }
}

impl Scalar for Jet {
    fn cst(c: f64) -> Self {
        Jet::constant(c)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e, e)
    }
    fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.compose(self.v.ln(), r, -r * r, 2.0 * r * r * r)
    }
    fn ln_1p(self) -> Self {
        let r = 1.0 / (1.0 + self.v);
        self.compose(self.v.ln_1p(), r, -r * r, 2.0 * r * r * r)
    }
    fn exp_m1(self) -> Self {
        let e = self.v.exp();
        self.compose(self.v.exp_m1(), e, e, e)
    }
    fn powf(self, p: f64) -> Self {
        let x = self.v;
        let f0 = x.powf(p);
        let f1 = p * x.powf(p - 1.0);
        let f2 = p * (p - 1.0) * x.powf(p - 2.0);
        let f3 = p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0);
        self.compose(f0, f1, f2, f3)
    }
    fn atan(self) -> Self {
        let x = self.v;
        let q = 1.0 / (1.0 + x * x);
        self.compose(
            x.atan(),
            q,
            -2.0 * x * q * q,
            (6.0 * x * x - 2.0) * q * q * q,
        )
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose(s, c, -s, -c)
    }
}
