//! Numerical kernels shared by every other module: adaptive Gauss–Kronrod
//! quadrature on `[0, 1]`, finite intervals and `[0, ∞)`, bracketing
//! inversion of monotone functions, and one-sided limits by Aitken
//! extrapolation along a geometric sequence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default absolute tolerance for quadrature.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default tolerance on `|f(x) - target|` for inversion.
pub const INVERSION_TOL: f64 = 1e-8;

const MAX_SUBINTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    /// Last accelerated values of the sequence, oldest first.
    pub sequence_tail: Vec<f64>,
    pub converged: bool,
}

// 15-point Kronrod nodes on [-1, 1] (non-negative half) with the embedded
// 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if fc.is_nan() {
        return Err(Error::NotANumber { at: center });
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if f1.is_nan() {
            return Err(Error::NotANumber { at: x1 });
        }
        if f2.is_nan() {
            return Err(Error::NotANumber { at: x2 });
        }
        kronrod += WGK[j] * (f1 + f2);
        // odd Kronrod indices are the Gauss nodes
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        return Err(Error::Divergent(format!("non-finite integrand near {center}")));
    }
    Ok(Segment { a, b, value, error })
}

/// Globally adaptive Gauss–Kronrod (7/15) on a finite interval `[a, b]`.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("interval [{a}, {b}] must be finite")));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 1,
        });
    }
    if b < a {
        let r = integrate_interval(f, b, a, tol)?;
        return Ok(QuadratureResult {
            value: -r.value,
            ..r
        });
    }

    let mut heap = BinaryHeap::new();
    let first = gauss_kronrod(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut evaluations = 15;
    heap.push(first);

    while total_err > tol.max(50.0 * f64::EPSILON * total.abs()) {
        if heap.len() >= MAX_SUBINTERVALS {
            return Err(Error::NoConvergence {
                message: format!(
                    "quadrature budget of {MAX_SUBINTERVALS} subintervals exhausted (error estimate {total_err:e})"
                ),
                best: total,
            });
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            heap.push(Segment {
                error: 0.0,
                ..worst
            });
            total_err = heap.iter().map(|s| s.error).sum();
            if heap.iter().all(|s| s.error == 0.0) {
                break;
            }
            continue;
        }
        let split = gauss_kronrod(&f, worst.a, mid).and_then(|l| Ok((l, gauss_kronrod(&f, mid, worst.b)?)));
        let (left, right) = match split {
            Ok(lr) => lr,
            Err(Error::Divergent(msg)) => {
                return Err(Error::NoConvergence {
                    message: format!("refinement stopped: {msg}"),
                    best: total,
                })
            }
            Err(e) => return Err(e),
        };
        evaluations += 30;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // refresh the running sums now and then to keep cancellation in check
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let abs_error_estimate: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadratureResult {
        value,
        abs_error_estimate,
        evaluations,
    })
}

/// `∫₀¹ f`. Integrable endpoint singularities are fine since no node sits on
/// an endpoint.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<QuadratureResult> {
    integrate_interval(f, 0.0, 1.0, tol)
}

/// `∫₀^∞ f` with unit time scale. See [`integrate_upper_scaled`].
pub fn integrate_upper<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<QuadratureResult> {
    integrate_upper_scaled(f, 1.0, tol)
}

/// `∫₀^∞ f` through the map `z = scale·(1 − s)/s`, `s ∈ (0, 1]`.
///
/// `scale` should be the natural time scale of the integrand (for survival
/// functions, `1/rate`) so the transformed integrand is O(1). Exponential and
/// integrable power-law tails are both handled without a cutoff.
pub fn integrate_upper_scaled<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    let mapped = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let z = scale * (1.0 - s) / s;
        let fz = f(z);
        if fz == 0.0 {
            0.0
        } else {
            fz * scale / (s * s)
        }
    };
    integrate_unit(mapped, tol)
}

/// Solve `f(x) = target` for `x ∈ [lo, hi]`, `f` strictly monotone.
///
/// Brent's method (bisection safeguarding inverse quadratic / secant steps);
/// the bracket is preserved at every iteration.
pub fn invert_monotone<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::Domain(format!("empty bracket [{lo}, {hi}]")));
    }
    let flo = f(lo);
    let fhi = f(hi);
    if flo.is_nan() {
        return Err(Error::NotANumber { at: lo });
    }
    if fhi.is_nan() {
        return Err(Error::NotANumber { at: hi });
    }
    let (fmin, fmax) = if flo <= fhi { (flo, fhi) } else { (fhi, flo) };
    if target < fmin || target > fmax {
        return Err(Error::NotBracketed {
            target,
            lo,
            hi,
            flo,
            fhi,
        });
    }
    if (flo - target).abs() <= tol {
        return Ok(lo);
    }
    if (fhi - target).abs() <= tol {
        return Ok(hi);
    }

    let mut a = lo;
    let mut b = hi;
    let mut fa = flo - target;
    let mut fb = fhi - target;
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..200 {
        if fb.signum() == fc.signum() && fb != 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let half = 0.5 * (c - b);
        if fb.abs() <= tol {
            return Ok(b);
        }
        if half.abs() <= xtol {
            // bracket collapsed without meeting tol: only a jump can cause that
            if (fb - fc).abs() > 2.0 * tol {
                return Err(Error::NotMonotone(format!(
                    "jump of {} across x = {b}",
                    (fb - fc).abs()
                )));
            }
            return Ok(b);
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * half * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > xtol { d } else { xtol.copysign(half) };
        let fx = f(b);
        if fx.is_nan() {
            return Err(Error::NotANumber { at: b });
        }
        if fx < fmin - tol || fx > fmax + tol {
            return Err(Error::NotMonotone(format!(
                "f({b}) = {fx} leaves the range [{fmin}, {fmax}] spanned by the bracket"
            )));
        }
        fb = fx - target;
    }
    Err(Error::NoConvergence {
        message: "inversion iteration budget exhausted".into(),
        best: b,
    })
}

/// Like [`invert_monotone`] on `[lo, ∞)`: doubles the upper end of the
/// bracket, starting at `hi`, until it brackets `target`.
pub fn invert_monotone_expanding<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let flo = f(lo);
    let increasing_hint = {
        let fh = f(hi);
        fh >= flo
    };
    for _ in 0..1100 {
        let fh = f(hi);
        let reached = if increasing_hint {
            fh >= target
        } else {
            fh <= target
        };
        if reached {
            return invert_monotone(&f, target, lo, hi, tol);
        }
        if !hi.is_finite() {
            break;
        }
        hi = lo + 2.0 * (hi - lo);
    }
    Err(Error::NotBracketed {
        target,
        lo,
        hi,
        flo,
        fhi: f(hi),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LimitOptions {
    /// First point of the sequence `u_k = u0·2^{-k}`.
    pub u0: f64,
    pub terms: usize,
    pub tol: f64,
    /// Number of trailing accelerated values that must agree within `tol`.
    pub window: usize,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            u0: 0.25,
            terms: 40,
            tol: 1e-6,
            window: 4,
        }
    }
}

/// One-sided limit `lim_{u→0⁺} g(u)` along `u_k = u0·2^{-k}`, accelerated
/// with Aitken's Δ² process.
///
/// Evaluation stops early when `g` reports an error (underflow of the
/// caller's intermediate values); at least three points are required.
pub fn limit_at_zero<G: Fn(f64) -> Result<f64>>(g: G) -> Result<LimitEstimate> {
    limit_at_zero_with(g, LimitOptions::default())
}

pub fn limit_at_zero_with<G: Fn(f64) -> Result<f64>>(
    g: G,
    opts: LimitOptions,
) -> Result<LimitEstimate> {
    let mut raw = Vec::with_capacity(opts.terms);
    let mut u = opts.u0;
    let mut first_failure = None;
    for _ in 0..opts.terms {
        match g(u) {
            Ok(v) if v.is_finite() => raw.push(v),
            Ok(v) => {
                first_failure = Some(Error::Underflow(format!(
                    "limit sequence produced {v} at u = {u:e}"
                )));
                break;
            }
            Err(e) => {
                first_failure = Some(e);
                break;
            }
        }
        u *= 0.5;
    }
    if raw.len() < 3 {
        return Err(first_failure.unwrap_or_else(|| {
            Error::Underflow("fewer than three limit-sequence terms".into())
        }));
    }

    let accelerated: Vec<f64> = raw
        .windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - 2.0 * w[1] + w[0];
            let scale = w[0].abs().max(w[1].abs()).max(w[2].abs()).max(1e-300);
            if d2.abs() <= 1e-13 * scale {
                w[2]
            } else {
                let a = w[0] - d1 * d1 / d2;
                if a.is_finite() { a } else { w[2] }
            }
        })
        .collect();

    // Deep terms can be dominated by cancellation noise in `g`, so the
    // estimate comes from the flattest window, the latest one on ties.
    let window = opts.window.max(2).min(accelerated.len());
    let spread = |w: &[f64]| w.windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max);
    let mut best = accelerated.len() - window;
    for start in (0..=accelerated.len() - window).rev() {
        if spread(&accelerated[start..start + window]) < spread(&accelerated[best..best + window]) {
            best = start;
        }
    }
    let tail = accelerated[best..best + window].to_vec();
    let converged = spread(&tail) <= opts.tol;
    let value = *tail.last().expect("window is at least one");
    Ok(LimitEstimate {
        value,
        sequence_tail: tail,
        converged,
    })
}
