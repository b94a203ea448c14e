//! Exact simulation of `(X, Y)` including the atom on the diagonal.
//!
//! With `W = min(X, Y)` and `D = X − Y`:
//! `P(W > w) = h(e^{−λw})`; given `W = w` the atom `D = 0` has probability
//! `p₀` and the side `D > 0` has probability `1 − g₁(0)/λ`, both free of `w`;
//! on that side `D` has conditional survival proportional to
//! `q_w(d) = h′(e^{−λw}Ḡ₁(d)) (λḠ₁(d) − g₁(d))`. The negative side is
//! symmetric.
//!
//! Each draw uses its own ChaCha8 stream (`seed`, stream = draw index), so
//! batches are reproducible regardless of thread count.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::distorted::Model;
use crate::error::{Error, Result};
use crate::generators::{Generator, MixingLaw};
use crate::lmp::CoreParams;
use crate::numerics::invert_monotone_expanding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Draw {
    pub x: f64,
    pub y: f64,
    pub atom: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub pairs: Vec<Draw>,
    pub seed: u64,
    pub model_label: String,
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Uniform on `(0, 1]`.
fn open_uniform<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

struct Sides {
    p0: f64,
    p1: f64,
}

fn sides(core: &CoreParams) -> Result<Sides> {
    let (p0, p1, _) = core.side_probabilities()?;
    Ok(Sides { p0, p1 })
}

/// `ln h′(e^{lx})`, through the elasticity: `h′(x) = η h(x)/x`.
fn log_h_prime(g: &Generator, lx: f64) -> Result<f64> {
    let eta = g.elasticity(lx)?;
    Ok(eta.ln() + g.log_h(lx) - lx)
}

/// `ln(λḠᵢ(d) − gᵢ(d))`. The gap `λ − rᵢ(d)` is split as
/// `(λ − γᵢ/α) + (γᵢ/α)·aᵢe^{−γᵢd}/(aᵢe^{−γᵢd} + 1 − aᵢ)` to avoid
/// cancellation when `rᵢ(d)` approaches `λ`.
fn log_side_kernel(core: &CoreParams, i: usize, d: f64) -> f64 {
    let (g, a) = if i == 1 {
        (core.gamma1, core.alpha1)
    } else {
        (core.gamma2, core.alpha2)
    };
    let rate = g / core.alpha;
    let w = a * (-g * d).exp();
    let gap = ((core.lambda - rate).max(0.0) + rate * w / (w + 1.0 - a)).max(f64::MIN_POSITIVE);
    core.log_marginal(i, d) + gap.ln()
}

/// Absolute tolerance on `ln(q_w(d)/q_w(0))`; the composed log-domain
/// evaluations carry noise of order 1e−11.
const LOG_RATIO_TOL: f64 = 1e-9;

fn draw_one<R: Rng>(g: &Generator, core: &CoreParams, s: &Sides, rng: &mut R) -> Result<Draw> {
    let lam = core.lambda;
    let lw_level = g.log_h_inv(open_uniform(rng).ln());
    let w = -lw_level / lam;
    let c = rng.random::<f64>();
    if c < s.p0 {
        return Ok(Draw { x: w, y: w, atom: true });
    }
    let i = if c < s.p0 + s.p1 { 1 } else { 2 };
    let target = open_uniform(rng).ln();
    let base = -lam * w;
    let identity = matches!(g.family(), crate::generators::Family::Identity);
    let norm = if identity {
        0.0
    } else {
        log_h_prime(g, base)?
    } + log_side_kernel(core, i, 0.0);
    let log_ratio = |d: f64| -> f64 {
        let hp = if identity {
            0.0
        } else {
            match log_h_prime(g, base + core.log_marginal(i, d)) {
                Ok(v) => v,
                Err(_) => f64::NAN,
            }
        };
        (hp + log_side_kernel(core, i, d) - norm).min(0.0)
    };
    let d = if target == 0.0 {
        0.0
    } else {
        let gi = if i == 1 { core.gamma1 } else { core.gamma2 };
        invert_monotone_expanding(log_ratio, target, 0.0, core.alpha / gi, LOG_RATIO_TOL)?
    };
    Ok(if i == 1 {
        Draw { x: w + d, y: w, atom: false }
    } else {
        Draw { x: w, y: w + d, atom: false }
    })
}

fn run<F>(n: usize, seed: u64, label: &str, f: F) -> Result<SampleBatch>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Draw> + Sync,
{
    if n == 0 {
        return Err(Error::Domain("sample size must be >= 1".into()));
    }
    let pairs = (0..n)
        .into_par_iter()
        .map(|k| f(&mut stream(seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch {
        pairs,
        seed,
        model_label: label.to_string(),
    })
}

/// Draws from the undistorted core `Ḡ`.
pub fn sample_core(p: &CoreParams, n: usize, seed: u64) -> Result<SampleBatch> {
    p.check()?;
    let s = sides(p)?;
    let id = Generator::identity();
    run(n, seed, "core", |rng| draw_one(&id, p, &s, rng))
}

/// Draws from `F̄ = h(Ḡ)`; needs `h′`.
pub fn sample_model(m: &Model, n: usize, seed: u64) -> Result<SampleBatch> {
    if m.generator().derivative_order() < 1 {
        return Err(Error::Capability(
            "sampling a distorted model needs the generator derivative".into(),
        ));
    }
    let s = sides(m.core())?;
    run(n, seed, m.label(), |rng| draw_one(m.generator(), m.core(), &s, rng))
}

/// Draws `Z` from the mixing law, then `(X, Y)` from `Ḡ^{rZ}`, which is the
/// core with `α′ = α/(rZ)` and `λ′ = rZλ` (`r = γ/α`).
pub fn sample_mixing_shortcut(law: MixingLaw, p: &CoreParams, n: usize, seed: u64) -> Result<SampleBatch> {
    law.validate()?;
    p.check()?;
    if !p.is_mu() {
        return Err(Error::InvalidParameters(
            "mixing shortcut needs gamma1 = gamma2 and lambda = gamma/alpha".into(),
        ));
    }
    let r = p.gamma1 / p.alpha;
    let id = Generator::identity();
    let gamma = match law {
        MixingLaw::Gamma { a } => Some(Gamma::new(a, 1.0).map_err(|e| Error::InvalidParameters(e.to_string()))?),
        _ => None,
    };
    run(n, seed, "mixing-shortcut", |rng| {
        let z = match law {
            MixingLaw::Gamma { .. } => gamma.as_ref().expect("built above").sample(rng),
            MixingLaw::PositiveStable { a } => positive_stable(a, rng),
            MixingLaw::Sibuya { a } => sibuya(a, rng),
            MixingLaw::LogSeries { theta } => log_series(-theta, rng),
        };
        let c = r * z;
        let mut core = *p;
        core.alpha = p.alpha / c;
        core.lambda = p.lambda * c;
        let s = sides(&core)?;
        draw_one(&id, &core, &s, rng)
    })
}

/// Positive stable variate with Laplace transform `e^{−s^a}` (Kanter's
/// representation: `U` uniform on `(0, π)`, `E` standard exponential).
pub fn positive_stable<R: Rng>(a: f64, rng: &mut R) -> f64 {
    if a == 1.0 {
        return 1.0;
    }
    let u = PI * open_uniform(rng);
    let e: f64 = Exp1.sample(rng);
    let left = (a * u).sin() / u.sin().powf(1.0 / a);
    let right = (((1.0 - a) * u).sin() / e).powf((1.0 - a) / a);
    left * right
}

/// Sibuya variate, `E[x^Z] = 1 − (1 − x)^a`, by inverting
/// `P(Z > k) = Γ(k + 1 − a)/(Γ(k + 1)Γ(1 − a))`.
pub fn sibuya<R: Rng>(a: f64, rng: &mut R) -> f64 {
    if a == 1.0 {
        return 1.0;
    }
    let u = open_uniform(rng);
    let lg1a = libm::lgamma(1.0 - a);
    let log_tail = |k: f64| libm::lgamma(k + 1.0 - a) - libm::lgamma(k + 1.0) - lg1a;
    let lu = u.ln();
    // smallest k ≥ 1 with P(Z > k) < u
    if log_tail(1.0) < lu {
        return 1.0;
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while log_tail(hi) >= lu {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    while hi - lo > 1.0 {
        let mid = (0.5 * (lo + hi)).floor();
        if log_tail(mid) >= lu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Logarithmic series variate with `P(k) = −p^k/(k ln(1 − p))`, Kemp's
/// second accelerated generator.
pub fn log_series<R: Rng>(p: f64, rng: &mut R) -> f64 {
    let r = (-p).ln_1p();
    loop {
        let v = rng.random::<f64>();
        if v >= p {
            return 1.0;
        }
        let u = rng.random::<f64>();
        let q = -(r * u).exp_m1();
        if v <= q * q {
            let k = (1.0 + v.ln() / q.ln()).floor();
            if k < 1.0 || v == 0.0 {
                continue;
            }
            return k;
        }
        return if v >= q { 1.0 } else { 2.0 };
    }
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn coordinates(&self) -> Vec<(f64, f64)> {
        self.pairs.iter().map(|d| (d.x, d.y)).collect()
    }

    /// CSV with header `x,y,atom`, 17 significant digits, LF newlines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut buf = String::with_capacity(self.pairs.len() * 52 + 16);
        buf.push_str("x,y,atom\n");
        for d in &self.pairs {
            use std::fmt::Write as _;
            let _ = writeln!(buf, "{:.16e},{:.16e},{}", d.x, d.y, u8::from(d.atom));
        }
        out.write_all(buf.as_bytes())
    }

    pub fn read_csv<R: BufRead>(input: R, seed: u64, label: &str) -> Result<SampleBatch> {
        let mut pairs = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Config(e.to_string()))?;
            if k == 0 {
                if line.trim() != "x,y,atom" {
                    return Err(Error::Config(format!("unexpected header `{line}`")));
                }
                continue;
            }
            let mut it = line.split(',');
            let mut next = || {
                it.next()
                    .ok_or_else(|| Error::Config(format!("short row {k}: `{line}`")))
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("row {k}: {e}")))
            };
            let x = parse(next()?)?;
            let y = parse(next()?)?;
            let atom = next()? == "1";
            pairs.push(Draw { x, y, atom });
        }
        Ok(SampleBatch {
            pairs,
            seed,
            model_label: label.to_string(),
        })
    }
}

pub fn empirical_survival(b: &SampleBatch, x: f64, y: f64) -> f64 {
    frac(b, |d| d.x > x && d.y > y)
}

pub fn empirical_atom(b: &SampleBatch) -> f64 {
    frac(b, |d| d.atom)
}

/// Empirical `S(x) = P(X = Y > x)`.
pub fn empirical_atom_survival(b: &SampleBatch, x: f64) -> f64 {
    frac(b, |d| d.atom && d.x > x)
}

fn frac<F: Fn(&Draw) -> bool>(b: &SampleBatch, f: F) -> f64 {
    if b.pairs.is_empty() {
        return f64::NAN;
    }
    b.pairs.iter().filter(|d| f(d)).count() as f64 / b.pairs.len() as f64
}

/// Half-width of the normal-approximation binomial interval at level `z`.
pub fn binomial_half_width(p: f64, n: usize, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}

/// Two-sided normal quantile for 99% intervals.
pub const Z99: f64 = 2.5758293035489004;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Family;

    fn within_ci(emp: f64, p: f64, n: usize) -> bool {
        (emp - p).abs() <= binomial_half_width(p, n, Z99) + 1e-12
    }

    #[test]
    fn atom_and_side_probabilities() {
        let core = CoreParams::mu(1.0, 0.1, 0.3, 0.2);
        let n = 100_000;
        let b = sample_core(&core, n, 7).unwrap();
        assert!(within_ci(empirical_atom(&b), 0.5, n));
        let above = b.pairs.iter().filter(|d| d.x > d.y).count() as f64 / n as f64;
        assert!(within_ci(above, 0.3, n), "{above}");
        assert!(b.pairs.iter().all(|d| !d.atom || d.x == d.y));
    }

    #[test]
    fn core_joint_survival() {
        let core = CoreParams::new(0.2, 0.5, 0.1, 0.08, 0.3, 0.4);
        let n = 100_000;
        let b = sample_core(&core, n, 11).unwrap();
        for &(x, y) in &[(1.0, 1.0), (3.0, 0.5), (0.5, 6.0), (8.0, 8.0)] {
            let p = core.gbar(x, y).unwrap();
            assert!(within_ci(empirical_survival(&b, x, y), p, n), "({x},{y})");
        }
    }

    #[test]
    fn identity_atom_survival() {
        let core = CoreParams::mu(1.0, 0.1, 0.3, 0.2);
        let n = 100_000;
        let b = sample_core(&core, n, 3).unwrap();
        assert_eq!(empirical_atom_survival(&b, 0.0), empirical_atom(&b));
        let p = 0.5 * (-0.1f64 * 5.0).exp();
        assert!(within_ci(empirical_atom_survival(&b, 5.0), p, n));
    }

    #[test]
    fn deterministic() {
        let core = CoreParams::mu(1.0, 0.1, 0.3, 0.2);
        let a = sample_core(&core, 500, 42).unwrap();
        let b = sample_core(&core, 500, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_core(&core, 500, 43).unwrap());
    }

    #[test]
    fn model_sampler_needs_derivative() {
        use crate::generators::SurvivalFn;
        let g = Generator::from_survival(SurvivalFn::new("e", |z: f64| (-z).exp()).unwrap());
        let m = Model::new(g, CoreParams::mu(1.0, 0.1, 0.3, 0.2), "m").unwrap();
        assert!(matches!(sample_model(&m, 10, 1), Err(Error::Capability(_))));
    }

    #[test]
    fn distorted_joint_survival() {
        let core = CoreParams::mu(1.0, 0.5, 0.3, 0.2);
        let g = Generator::new(Family::Weibull { a: 1.0, alpha: 0.6 }).unwrap();
        let m = Model::new(g, core, "w").unwrap();
        let n = 100_000;
        let b = sample_model(&m, n, 5).unwrap();
        for &(x, y) in &[(0.5, 0.5), (2.0, 0.3), (0.1, 3.0)] {
            let p = m.fbar(x, y).unwrap();
            assert!(within_ci(empirical_survival(&b, x, y), p, n), "({x},{y})");
        }
        assert!(within_ci(empirical_atom(&b), 0.5, n));
    }

    #[test]
    fn variate_means() {
        let mut rng = stream(9, 0);
        let n = 200_000;
        // log-series mean −p/((1−p) ln(1−p))
        let p = 0.6;
        let mean: f64 = (0..n).map(|_| log_series(p, &mut rng)).sum::<f64>() / n as f64;
        let exact = -p / ((1.0 - p) * (1.0 - p).ln());
        assert!((mean - exact).abs() < 0.02, "{mean} vs {exact}");
        // Sibuya generating function at x = 1/2
        let a = 0.4;
        let pgf: f64 = (0..n).map(|_| 0.5f64.powf(sibuya(a, &mut rng))).sum::<f64>() / n as f64;
        assert!((pgf - (1.0 - 0.5f64.powf(a))).abs() < 0.005);
        // stable Laplace transform at s = 1
        let lt: f64 = (0..n).map(|_| (-positive_stable(0.5, &mut rng)).exp()).sum::<f64>() / n as f64;
        assert!((lt - (-1.0f64).exp()).abs() < 0.005, "{lt}");
    }

    #[test]
    fn csv_round_trip() {
        let core = CoreParams::mu(1.0, 0.1, 0.3, 0.2);
        let b = sample_core(&core, 200, 1).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,atom\n"));
        let back = SampleBatch::read_csv(&buf[..], 1, "core").unwrap();
        assert_eq!(back, b);
    }
}
