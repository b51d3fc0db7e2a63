//! One-dimensional adaptive quadrature and the radial integrals every
//! normalization constant reduces to.
//!
//! All phase-space integrals of the model are integrals of radial profiles
//! `(1 ± r²)₊^p` against `r^a`, so they collapse to
//!
//! ```text
//! J(a, p, ±) = ∫₀^∞ r^a (1 ± r²)₊^p dr
//! ```
//!
//! Each is available both by adaptive Gauss–Kronrod quadrature and in closed
//! form through the Beta function; callers cross-check the two.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
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
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-13,
            max_intervals: 4000,
        }
    }
}

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
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        kron += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * h;
    let error = ((kron - gauss) * h).abs();
    (value, error)
}

/// Adaptive Gauss–Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (value, error) = kronrod(&f, a, b);
    if !value.is_finite() {
        return Err(Error::IntegralDivergence(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut count = 1;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if count >= opts.max_intervals {
            return Err(Error::Convergence(format!(
                "quadrature on [{a}, {b}] reached {count} intervals, error {total_err:e}"
            )));
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval exhausted at machine resolution; accept what we have
            heap.push(Segment { error: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.error).sum();
            if total_err == 0.0 {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod(&f, seg.a, mid);
        let (v2, e2) = kronrod(&f, mid, seg.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::IntegralDivergence(format!(
                "non-finite integrand near [{}, {}]",
                seg.a, seg.b
            )));
        }
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        count += 1;
        if count % 64 == 0 {
            // resum to wash out cancellation in the running totals
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Sign of the quadratic inside a Barenblatt-type profile: `(1 + r²)` for
/// heavy tails (fast diffusion), `(1 − r²)₊` for compact support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Heavy,
    Compact,
}

impl Tail {
    /// `Heavy` when `1 − m > 0`, `Compact` when `m > 1`.
    pub fn for_exponent(m: f64) -> Self {
        if m < 1.0 {
            Tail::Heavy
        } else {
            Tail::Compact
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Tail::Heavy => 1.0,
            Tail::Compact => -1.0,
        }
    }
}

fn check_radial(a: f64, p: f64, tail: Tail) -> Result<()> {
    if a <= -1.0 {
        return Err(Error::IntegralDivergence(format!(
            "r^{a} is not integrable at the origin"
        )));
    }
    match tail {
        Tail::Heavy if a + 2.0 * p >= -1.0 => Err(Error::IntegralDivergence(format!(
            "r^{a} (1 + r²)^{p} decays too slowly (exponent {})",
            a + 2.0 * p
        ))),
        Tail::Compact if p <= -1.0 => Err(Error::IntegralDivergence(format!(
            "(1 − r²)^{p} is not integrable at r = 1"
        ))),
        _ => Ok(()),
    }
}

/// Natural log of `J(a, p, tail)` from the Beta function.
pub fn ln_radial_closed(a: f64, p: f64, tail: Tail) -> Result<f64> {
    check_radial(a, p, tail)?;
    let s = 0.5 * (a + 1.0);
    let ln_half = -std::f64::consts::LN_2;
    Ok(match tail {
        // ∫₀^∞ r^a (1+r²)^p dr = ½ B(s, −p − s)
        Tail::Heavy => ln_half + ln_gamma(s) + ln_gamma(-p - s) - ln_gamma(-p),
        // ∫₀^1 r^a (1−r²)^p dr = ½ B(s, p + 1)
        Tail::Compact => ln_half + ln_gamma(s) + ln_gamma(p + 1.0) - ln_gamma(p + s + 1.0),
    })
}

pub fn radial_closed(a: f64, p: f64, tail: Tail) -> Result<f64> {
    ln_radial_closed(a, p, tail).map(f64::exp)
}

/// `J(a, p, tail)` by adaptive quadrature.
///
/// The heavy tail on `[1, ∞)` is mapped with `r = 1/u`, `u = w^{1/(e+1)}`
/// where `e = −a − 2p − 2`; the Jacobian then cancels the algebraic decay
/// exactly and the integrand on `w ∈ [0, 1]` is bounded.
pub fn radial_quadrature(a: f64, p: f64, tail: Tail) -> Result<f64> {
    check_radial(a, p, tail)?;
    let opts = QuadOptions::default();
    match tail {
        Tail::Heavy => {
            // work with a log-scaled integrand so huge |p| stays finite
            let head = integrate(|r| (a * r.ln() + p * (r * r).ln_1p()).exp(), 0.0, 1.0, opts)?;
            let e = -a - 2.0 * p - 2.0;
            let expo = 2.0 / (e + 1.0);
            let tail_part = integrate(
                |w: f64| {
                    if w == 0.0 {
                        1.0
                    } else {
                        (p * (w.powf(expo)).ln_1p()).exp()
                    }
                },
                0.0,
                1.0,
                opts,
            )? / (e + 1.0);
            Ok(head + tail_part)
        }
        Tail::Compact => integrate(
            |r: f64| {
                let q = 1.0 - r * r;
                if q <= 0.0 || r == 0.0 && a > 0.0 {
                    0.0
                } else {
                    (a * r.ln() + p * q.ln()).exp()
                }
            },
            0.0,
            1.0,
            opts,
        ),
    }
}

/// `J(a, p, tail)` by quadrature, refused unless the Beta closed form agrees
/// to `rel_tol`.
pub fn radial_checked(a: f64, p: f64, tail: Tail, rel_tol: f64) -> Result<f64> {
    let q = radial_quadrature(a, p, tail)?;
    let c = radial_closed(a, p, tail)?;
    let rel = rel_diff(q, c);
    if rel > rel_tol || !rel.is_finite() {
        return Err(Error::QuadratureMismatch {
            quadrature: q,
            closed_form: c,
            rel,
        });
    }
    Ok(q)
}

/// Surface area of the unit sphere `𝕊^{n−1} ⊂ ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    let h = 0.5 * n as f64;
    2.0 * PI.powf(h) / ln_gamma(h).exp()
}

/// Relative difference `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
