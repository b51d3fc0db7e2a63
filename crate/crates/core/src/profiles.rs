//! Closed-form solutions: the pressure `P⋆`, the fundamental solution `f⋆`,
//! the stationary profiles `g_γ`/`G_γ`, and the changes of variables and
//! invariance orbits relating them.
//!
//! Everything here is a pointwise evaluator; sampling onto grids lives in
//! [`crate::fields`].

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quad::{integrate, radial_closed, QuadOptions};

fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `((1 − m)/m · P)₊^{1/(m−1)}`, the density attached to a pressure value.
///
/// Worked in log space so that exponents `±1/(m−1)` near `m = 1` stay finite.
pub fn density_of_pressure(p: &ModelParams, pressure: f64) -> f64 {
    let q = p.pressure_factor() * pressure;
    if q <= 0.0 {
        return 0.0;
    }
    (p.power() * q.ln()).exp()
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive, got {t}")))
    }
}

/// `β(t) = ((1 − A)t)^{2(1−m)/(m−m₁)} γ⋆`.
pub fn beta(t: f64, p: &ModelParams) -> f64 {
    let s = (1.0 - p.a) * t;
    let e = 2.0 * (1.0 - p.m) / (p.m - p.m1);
    (e * s.ln()).exp() * p.gamma_star
}

/// Explicit pressure solution `P⋆(t, x, v)`.
pub fn pressure_star(t: f64, x: &[f64], v: &[f64], p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    let s = (1.0 - p.a) * t;
    let mut quad = 0.0;
    for (&xi, &vi) in x.iter().zip(v) {
        let y = xi / s;
        quad += (vi - y) * (vi - y) + p.a * y * y;
    }
    Ok(beta(t, p) + p.b() / s * quad)
}

/// Fundamental solution `f⋆(t, x, v)`; exactly zero outside the support when `m > 1`.
pub fn fundamental_solution(t: f64, x: &[f64], v: &[f64], p: &ModelParams) -> Result<f64> {
    Ok(density_of_pressure(p, pressure_star(t, x, v, p)?))
}

/// `f⋆(t, x − x₀ − t v₀, v − v₀)`, the Galilean translate of `f⋆`.
pub fn translated_solution(
    t: f64,
    x: &[f64],
    v: &[f64],
    x0: &[f64],
    v0: &[f64],
    p: &ModelParams,
) -> Result<f64> {
    let xs: Vec<f64> = (0..x.len()).map(|i| x[i] - x0[i] - t * v0[i]).collect();
    let vs: Vec<f64> = (0..v.len()).map(|i| v[i] - v0[i]).collect();
    fundamental_solution(t, &xs, &vs, p)
}

/// Coefficient layout of a stationary profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileFrame {
    /// `γ + B|v|² + AB|x|²`, the self-similar variables.
    SelfSimilar,
    /// `γ + B√A(|v|² + |x|²)`, the variables in which transport is a rotation.
    Rotating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub p: ModelParams,
    pub gamma: f64,
    pub frame: ProfileFrame,
}

impl ProfileSpec {
    pub fn new(p: &ModelParams, gamma: f64, frame: ProfileFrame) -> Self {
        Self {
            p: p.clone(),
            gamma,
            frame,
        }
    }

    pub fn star(p: &ModelParams, frame: ProfileFrame) -> Self {
        Self::new(p, p.gamma_star, frame)
    }

    /// Pressure of the profile at `(x, v)`.
    pub fn pressure(&self, x: &[f64], v: &[f64]) -> f64 {
        let b = self.p.b();
        match self.frame {
            ProfileFrame::SelfSimilar => self.gamma + b * (norm2(v) + self.p.a * norm2(x)),
            ProfileFrame::Rotating => self.gamma + b * self.p.a.sqrt() * (norm2(v) + norm2(x)),
        }
    }

    pub fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        density_of_pressure(&self.p, self.pressure(x, v))
    }
}

/// Stationary profile value; same as [`ProfileSpec::value`].
pub fn profile(spec: &ProfileSpec, x: &[f64], v: &[f64]) -> f64 {
    spec.value(x, v)
}

/// Offset `γ` whose profile carries mass `mass`.
///
/// Mass scales as `|γ|^{d(m−m₁)/(m−1)}`, so this is a closed-form rescaling
/// of `γ⋆`.
pub fn gamma_for_mass(p: &ModelParams, mass: f64) -> f64 {
    let e = p.d as f64 * (p.m - p.m1) / (p.m - 1.0);
    p.gamma_star * mass.powf(1.0 / e)
}

/// The self-similar change of variables with initial scale `R₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarMap {
    pub p: ModelParams,
    pub r0: f64,
}

/// A phase-space point together with its time coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub time: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl SelfSimilarMap {
    pub fn new(p: &ModelParams, r0: f64) -> Result<Self> {
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(Error::Domain(format!("initial scale must be nonnegative, got {r0}")));
        }
        Ok(Self { p: p.clone(), r0 })
    }

    /// `R(t) = (R₀^{1−A} + (1 − A)t)^{1/(1−A)}`.
    pub fn scale(&self, t: f64) -> f64 {
        let e = 1.0 - self.p.a;
        (self.r0.powf(e) + e * t).powf(1.0 / e)
    }

    /// `τ = log R(t)`.
    pub fn tau(&self, t: f64) -> Result<f64> {
        let r = self.scale(t);
        if r > 0.0 && r.is_finite() {
            Ok(r.ln())
        } else {
            Err(Error::Domain(format!("scale R({t}) = {r} is not positive")))
        }
    }

    /// Inverse of [`Self::tau`].
    pub fn time(&self, tau: f64) -> f64 {
        let e = 1.0 - self.p.a;
        ((e * tau).exp() - self.r0.powf(e)) / e
    }

    /// Jacobian exponent: `f = R^{−d(1+A)} g`.
    fn weight(&self, r: f64) -> f64 {
        r.powf(-(self.p.d as f64) * (1.0 + self.p.a))
    }

    /// `(t, x, v) ↦ (τ, x/R, v/R^A − x/R)` and the factor `R^{d(1+A)}` with `g = factor · f`.
    pub fn to_self_similar_point(&self, t: f64, x: &[f64], v: &[f64]) -> Result<(PhasePoint, f64)> {
        let tau = self.tau(t)?;
        let r = tau.exp();
        let ra = r.powf(self.p.a);
        let xs: Vec<f64> = x.iter().map(|xi| xi / r).collect();
        let vs: Vec<f64> = v.iter().zip(&xs).map(|(vi, yi)| vi / ra - yi).collect();
        Ok((
            PhasePoint {
                time: tau,
                x: xs,
                v: vs,
            },
            1.0 / self.weight(r),
        ))
    }

    /// `(τ, x, v) ↦ (t, Rx, R^A(v + x))` and the factor `R^{−d(1+A)}` with `f = factor · g`.
    pub fn from_self_similar_point(&self, tau: f64, x: &[f64], v: &[f64]) -> (PhasePoint, f64) {
        let r = tau.exp();
        let ra = r.powf(self.p.a);
        let xs: Vec<f64> = x.iter().map(|xi| r * xi).collect();
        let vs: Vec<f64> = v.iter().zip(x).map(|(vi, xi)| ra * (vi + xi)).collect();
        (
            PhasePoint {
                time: self.time(tau),
                x: xs,
                v: vs,
            },
            self.weight(r),
        )
    }

    /// Pulls an `f`-evaluator back to self-similar variables.
    pub fn to_self_similar<'a, F>(&'a self, f: F) -> impl Fn(f64, &[f64], &[f64]) -> f64 + 'a
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + 'a,
    {
        move |tau, x, v| {
            let (q, w) = self.from_self_similar_point(tau, x, v);
            f(q.time, &q.x, &q.v) / w
        }
    }

    /// Pushes a `g`-evaluator forward to the original variables.
    pub fn from_self_similar<'a, G>(&'a self, g: G) -> impl Fn(f64, &[f64], &[f64]) -> f64 + 'a
    where
        G: Fn(f64, &[f64], &[f64]) -> f64 + 'a,
    {
        move |t, x, v| match self.to_self_similar_point(t, x, v) {
            Ok((q, w)) => g(q.time, &q.x, &q.v) / w,
            Err(_) => f64::NAN,
        }
    }
}

/// Mass orbit `f_M(t, x, v) = M f(M^{2ζ}t, M^ζ x, M^{−ζ} v)`.
pub fn mass_rescale<'a, F>(f: F, mass: f64, p: &ModelParams) -> impl Fn(f64, &[f64], &[f64]) -> f64 + 'a
where
    F: Fn(f64, &[f64], &[f64]) -> f64 + 'a,
{
    let z = p.zeta;
    let (st, sx, sv) = (mass.powf(2.0 * z), mass.powf(z), mass.powf(-z));
    move |t, x, v| {
        let xs: Vec<f64> = x.iter().map(|a| sx * a).collect();
        let vs: Vec<f64> = v.iter().map(|a| sv * a).collect();
        mass * f(st * t, &xs, &vs)
    }
}

/// Scale orbit `f_λ(t, x, v) = λ⁴ f(λ^{2(m−m₁)}t, λ^{m−m₃}x, λ^{m₂−m}v)`; mass preserving.
pub fn scale_orbit<'a, F>(f: F, lambda: f64, p: &ModelParams) -> impl Fn(f64, &[f64], &[f64]) -> f64 + 'a
where
    F: Fn(f64, &[f64], &[f64]) -> f64 + 'a,
{
    let st = lambda.powf(2.0 * (p.m - p.m1));
    let sx = lambda.powf(p.m - p.m3);
    let sv = lambda.powf(p.m2 - p.m);
    let amp = lambda.powi(4);
    move |t, x, v| {
        let xs: Vec<f64> = x.iter().map(|a| sx * a).collect();
        let vs: Vec<f64> = v.iter().map(|a| sv * a).collect();
        amp * f(st * t, &xs, &vs)
    }
}

/// One-dimensional Barenblatt shape `(1 ± r²)₊^{1/(m−1)}`, `+` for `m < 1`.
pub fn barenblatt_shape(m: f64, r: f64) -> f64 {
    let q = 1.0 + (1.0 - m).signum() * r * r;
    if q <= 0.0 {
        0.0
    } else {
        q.powf(1.0 / (m - 1.0))
    }
}

/// Level set of `P⋆(t)` enclosing half of the mass (`d = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct HalfMassEllipse {
    pub t: f64,
    /// Pressure value on the ellipse.
    pub level: f64,
    /// Radius of the level set in the normalized variable where `f⋆ ∝ (1 ± r²)₊^{1/(m−1)}`.
    pub radius: f64,
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the x-axis, radians in `(−π/2, π/2]`.
    pub rotation: f64,
    /// Quadratic form `M` with the ellipse `{z : zᵀ M z = 1}`, `z = (x, v)`.
    pub form: [[f64; 2]; 2],
}

impl HalfMassEllipse {
    /// `n` points on the ellipse, counterclockwise from the major axis.
    pub fn points(&self, n: usize) -> Vec<(f64, f64)> {
        let (c, s) = (self.rotation.cos(), self.rotation.sin());
        (0..n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let (a, b) = (self.semi_major * th.cos(), self.semi_minor * th.sin());
                (self.center.0 + c * a - s * b, self.center.1 + s * a + c * b)
            })
            .collect()
    }

    pub fn contains(&self, x: f64, v: f64) -> bool {
        let m = &self.form;
        m[0][0] * x * x + 2.0 * m[0][1] * x * v + m[1][1] * v * v <= 1.0
    }
}

/// Fraction of the unit profile's mass inside radius `r0` (in ℝ² with `d = 1`).
fn enclosed_fraction(p: &ModelParams, r0: f64, total: f64) -> Result<f64> {
    let pw = p.power();
    let sign = p.tail().sign();
    let inner = integrate(
        |r| {
            let q = 1.0 + sign * r * r;
            if q <= 0.0 {
                0.0
            } else {
                r * q.powf(pw)
            }
        },
        0.0,
        r0,
        QuadOptions {
            rel_tol: 1e-12,
            ..Default::default()
        },
    )?;
    Ok(inner / total)
}

/// Half-mass ellipse of `f⋆(t)` in the `(x, v)` plane.
///
/// The level is found by bisection on the enclosed mass, itself computed by
/// quadrature of the radial profile.
pub fn half_mass_ellipse(t: f64, p: &ModelParams) -> Result<HalfMassEllipse> {
    check_time(t)?;
    if p.d != 1 {
        return Err(Error::Value("half-mass ellipse is defined for d = 1".into()));
    }
    let total = radial_closed(1.0, p.power(), p.tail())?;
    let mut hi = 1.0;
    if p.m < 1.0 {
        while enclosed_fraction(p, hi, total)? < 0.5 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Convergence("half-mass radius is unbounded".into()));
            }
        }
    }
    let mut lo = 0.0;
    let mut converged = false;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if enclosed_fraction(p, mid, total)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(
            "half-mass bisection did not converge in 200 iterations".into(),
        ));
    }
    let r0 = 0.5 * (lo + hi);
    let b = beta(t, p);
    let level = b + b.abs() * r0 * r0;

    // (B/s)[(v − x/s)² + A x²/s²] = |β| r0²
    let s = (1.0 - p.a) * t;
    let scale = p.b() / (s * b.abs() * r0 * r0);
    let form = [
        [scale * (1.0 + p.a) / (s * s), -scale / s],
        [-scale / s, scale],
    ];
    let (a11, a12, a22) = (form[0][0], form[0][1], form[1][1]);
    let mean = 0.5 * (a11 + a22);
    let dev = (0.25 * (a11 - a22).powi(2) + a12 * a12).sqrt();
    let (lmin, lmax) = (mean - dev, mean + dev);
    // the major axis is the eigenvector of the smaller eigenvalue
    let rotation = if a12 == 0.0 {
        if a11 <= a22 {
            0.0
        } else {
            std::f64::consts::FRAC_PI_2
        }
    } else {
        (lmin - a11).atan2(a12)
    };
    let rotation = if rotation > std::f64::consts::FRAC_PI_2 {
        rotation - std::f64::consts::PI
    } else if rotation <= -std::f64::consts::FRAC_PI_2 {
        rotation + std::f64::consts::PI
    } else {
        rotation
    };
    Ok(HalfMassEllipse {
        t,
        level,
        radius: r0,
        center: (0.0, 0.0),
        semi_major: 1.0 / lmin.sqrt(),
        semi_minor: 1.0 / lmax.sqrt(),
        rotation,
        form,
    })
}
