//! Scalar constants of the model, derived once from `(d, m)`.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::quad::{radial_checked, sphere_area, Tail};

/// Agreement demanded between quadrature and the Beta closed form.
pub const CLOSED_FORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub d: usize,
    pub m: f64,
    /// `A = (1 + d − dm)/(3 − d + dm)`.
    pub a: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m_tilde1: f64,
    pub m_c: f64,
    pub zeta: f64,
    pub alpha: f64,
    pub k: f64,
    /// Carries the sign of `1 − m`.
    pub gamma_star: f64,
    /// `∫∫ g⋆^m`; absent when it diverges (`m ≤ m̃₁` in the fast-diffusion range).
    pub z_m: Option<f64>,
    pub strict_theorem_range: bool,
}

/// Exact rational form of `m` when the float is one (0.8 ↦ 4/5).
fn as_rational(m: f64) -> Option<Rational64> {
    let r = Rational64::approximate_float(m)?;
    if *r.denom() > 1_000_000 {
        return None;
    }
    let back = *r.numer() as f64 / *r.denom() as f64;
    (back == m).then_some(r)
}

fn range_error(d: usize, m: f64, reason: impl Into<String>) -> Error {
    Error::Range {
        d,
        m,
        reason: reason.into(),
    }
}

/// Membership of `m` in `(m1, 1) ∪ (1, m2)`, and independently `A ∈ (0, 1)`;
/// exact when `m` is a short rational.
fn admissible(d: usize, m: f64) -> Result<(bool, bool, f64)> {
    if let Some(r) = as_rational(m) {
        let one = Rational64::from_integer(1);
        let di = Rational64::from_integer(d as i64);
        let m1 = one - one / di;
        let m2 = one + one / di;
        let by_m = (r > m1 && r < one) || (r > one && r < m2);
        let num = one + di - di * r;
        let den = Rational64::from_integer(3) - di + di * r;
        if den == Rational64::from_integer(0) {
            return Ok((by_m, false, f64::NAN));
        }
        let a = num / den;
        let by_a = a > Rational64::from_integer(0) && a < one;
        return Ok((by_m, by_a, *a.numer() as f64 / *a.denom() as f64));
    }
    let df = d as f64;
    let m1 = 1.0 - 1.0 / df;
    let m2 = 1.0 + 1.0 / df;
    let by_m = (m > m1 && m < 1.0) || (m > 1.0 && m < m2);
    let a = (1.0 + df - df * m) / (3.0 - df + df * m);
    let by_a = a > 0.0 && a < 1.0;
    Ok((by_m, by_a, a))
}

/// Validates `(d, m)` and derives every constant.
///
/// `strict` adds the `1/2 < m < 3/2` restriction under which the
/// one-dimensional convergence theorem is stated.
pub fn model_params(d: usize, m: f64, strict: bool) -> Result<ModelParams> {
    if d == 0 {
        return Err(Error::Value("dimension must be at least 1".into()));
    }
    if !m.is_finite() {
        return Err(Error::Value(format!("exponent m = {m} is not finite")));
    }
    if m == 1.0 {
        return Err(Error::Value(
            "m = 1 is the linear case; the pressure change of variables degenerates".into(),
        ));
    }
    let (by_m, by_a, a) = admissible(d, m)?;
    if by_m != by_a {
        return Err(Error::Value(format!(
            "range test on m ({by_m}) and on A = {a} ({by_a}) disagree"
        )));
    }
    if !by_m {
        return Err(range_error(d, m, "need m in (1 - 1/d, 1) or (1, 1 + 1/d)"));
    }
    if strict && d == 1 && !(m > 0.5 && m < 1.5) {
        return Err(range_error(d, m, "theorem range for d = 1 is 1/2 < m < 3/2"));
    }

    let df = d as f64;
    let m_c = (df - 2.0) / df;
    let alpha = 1.0 / (df * (m - m_c));
    let k = 1.0 + 2.0 * alpha * (m - 1.0);
    let k_direct = 1.0 + 1.0 / (0.5 * df + 1.0 / (m - 1.0));
    if (k - k_direct).abs() > 1e-12 * k.abs().max(1.0) {
        return Err(Error::Value(format!(
            "the two expressions for k disagree: {k} vs {k_direct}"
        )));
    }

    let mut p = ModelParams {
        d,
        m,
        a,
        m1: 1.0 - 1.0 / df,
        m2: 1.0 + 1.0 / df,
        m3: 1.0 - 3.0 / df,
        m_tilde1: df / (df + 1.0),
        m_c,
        zeta: -(1.0 - m) / 4.0,
        alpha,
        k,
        gamma_star: f64::NAN,
        z_m: None,
        strict_theorem_range: strict,
    };
    p.gamma_star = gamma_star(&p)?;
    p.z_m = star_power_integral(&p, m).ok();
    Ok(p)
}

impl ModelParams {
    pub fn tail(&self) -> Tail {
        Tail::for_exponent(self.m)
    }

    /// Exponent `1/(m − 1)` of the profiles.
    pub fn power(&self) -> f64 {
        1.0 / (self.m - 1.0)
    }

    /// `B = (1 + A)/2`, the coefficient of `|v|²` in the stationary pressure.
    pub fn b(&self) -> f64 {
        0.5 * (1.0 + self.a)
    }

    /// `(1 − m)/m`, the factor turning pressure into density.
    pub fn pressure_factor(&self) -> f64 {
        (1.0 - self.m) / self.m
    }
}

/// Unit-offset phase-space integral `I = ∫_{ℝ^{2d}} (1 ± |z|²)₊^p dz`.
fn unit_integral(d: usize, p: f64, tail: Tail) -> Result<f64> {
    let j = radial_checked(2.0 * d as f64 - 1.0, p, tail, CLOSED_FORM_TOL)?;
    Ok(sphere_area(2 * d) * j)
}

/// Natural log of the Jacobian and offset factor turning `∫∫ g_γ^q` into the
/// unit integral, for `|γ| = 1`, together with the exponent of `|γ|`.
///
/// With `v = √(|γ|/B) z_v`, `x = √(|γ|/(AB)) z_x`:
/// `∫∫ g_γ^q = (|γ|/B)^d A^{−d/2} |(1−m)γ/m|^{q/(m−1)} ∫(1 ± |z|²)₊^{q/(m−1)} dz`.
fn scaling(p: &ModelParams, q: f64) -> (f64, f64) {
    let df = p.d as f64;
    let ln_pref =
        -df * p.b().ln() - 0.5 * df * p.a.ln() + q * p.power() * p.pressure_factor().abs().ln();
    let gamma_exp = df + q * p.power();
    (ln_pref, gamma_exp)
}

/// Offset `γ⋆` of the unit-mass stationary profile.
///
/// Solves `K |γ|^{d(m − m₁)/(m−1)} I = 1`; `I` comes from quadrature and is
/// rejected if it strays from the closed form. Negative for `m > 1`.
pub fn gamma_star(p: &ModelParams) -> Result<f64> {
    let i = unit_integral(p.d, p.power(), p.tail())?;
    let (ln_pref, e) = scaling(p, 1.0);
    let ln_abs = -(ln_pref + i.ln()) / e;
    Ok(p.tail().sign() * ln_abs.exp())
}

/// `∫∫ g_γ^q` for the stationary profile with offset `γ`.
pub fn profile_power_integral(p: &ModelParams, gamma: f64, q: f64) -> Result<f64> {
    if (1.0 - p.m) * gamma <= 0.0 {
        return Err(Error::Value(format!(
            "offset {gamma} has the wrong sign for m = {}",
            p.m
        )));
    }
    let i = unit_integral(p.d, q * p.power(), p.tail())?;
    let (ln_pref, e) = scaling(p, q);
    Ok((ln_pref + e * gamma.abs().ln()).exp() * i)
}

fn star_power_integral(p: &ModelParams, q: f64) -> Result<f64> {
    profile_power_integral(p, p.gamma_star, q)
}

/// `∫∫ |v|² g_γ`, finite for `m > d/(d + 1)`.
pub fn profile_v2_moment(p: &ModelParams, gamma: f64) -> Result<f64> {
    if (1.0 - p.m) * gamma <= 0.0 {
        return Err(Error::Value(format!("offset {gamma} has the wrong sign")));
    }
    let df = p.d as f64;
    // ∫|z_v|² h(|z|) dz over ℝ^{2d} is half of ∫|z|² h(|z|) dz
    let j = radial_checked(2.0 * df + 1.0, p.power(), p.tail(), CLOSED_FORM_TOL)?;
    let (ln_pref, e) = scaling(p, 1.0);
    let scale = (gamma.abs() / p.b()).ln();
    Ok(0.5 * sphere_area(2 * p.d) * j * (ln_pref + e * gamma.abs().ln() + scale).exp())
}

/// Closure constants of the local equilibrium `(μ + c|v|²)₊^{1/(m−1)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumNormalization {
    /// `ρ = (μ/μ₁)^{1/(k−1)}`.
    pub mu1: f64,
    /// `(1/d) ∇x ∫|v|² (μ + c|v|²)₊^{1/(m−1)} dv = ν₁ ∇x ρ^k`.
    pub nu1: f64,
}

impl EquilibriumNormalization {
    pub fn mu_of_rho(&self, p: &ModelParams, rho: f64) -> f64 {
        self.mu1 * rho.powf(p.k - 1.0)
    }

    pub fn rho_of_mu(&self, p: &ModelParams, mu: f64) -> f64 {
        (mu / self.mu1).powf(1.0 / (p.k - 1.0))
    }
}

/// `μ₁` and `ν₁` for the coefficient `c` (its sign must follow `1 − m`).
///
/// Substituting `v = √(μ/|c|) w` reduces both v-integrals to radial
/// integrals in ℝ^d. The second v-moment is only claimed for
/// `m > d/(d+1)` and is refused below.
pub fn equilibrium_normalization(c: f64, p: &ModelParams) -> Result<EquilibriumNormalization> {
    if c == 0.0 || !c.is_finite() || (1.0 - p.m) * c < 0.0 {
        return Err(Error::Value(format!(
            "coefficient c = {c} must be nonzero with the sign of 1 - m"
        )));
    }
    if p.m < 1.0 && p.m <= p.m_tilde1 {
        return Err(Error::IntegralDivergence(format!(
            "second v-moment of the equilibrium needs m > {}",
            p.m_tilde1
        )));
    }
    let df = p.d as f64;
    let s = sphere_area(p.d);
    let j0 = radial_checked(df - 1.0, p.power(), p.tail(), CLOSED_FORM_TOL)?;
    let j2 = radial_checked(df + 1.0, p.power(), p.tail(), CLOSED_FORM_TOL)?;
    let ca = c.abs();
    let k1 = ca.powf(-0.5 * df) * s * j0;
    let k2 = ca.powf(-0.5 * df - 1.0) * s * j2;
    let mu1 = k1.powf(-(p.k - 1.0));
    let nu1 = k2 * mu1.powf(p.k / (p.k - 1.0)) / df;
    Ok(EquilibriumNormalization { mu1, nu1 })
}

/// Local-equilibrium coefficient `(1 − m)(1 + A)/(2m)` in self-similar variables.
pub fn local_equilibrium_coefficient(p: &ModelParams) -> f64 {
    p.pressure_factor() * p.b()
}

/// Hilbert-expansion coefficient `(1 − m)/(2m)` of the diffusion limit.
pub fn hilbert_coefficient(p: &ModelParams) -> f64 {
    0.5 * p.pressure_factor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};
    use std::f64::consts::PI;

    #[test]
    fn a_and_k_at_four_fifths() {
        let p = model_params(1, 0.8, true).unwrap();
        assert!((p.a - 3.0 / 7.0).abs() < 1e-15);
        assert!((p.k - 7.0 / 9.0).abs() < 1e-15);
        assert!((p.alpha - 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(p.m1, 0.0);
        assert_eq!(p.m2, 2.0);
        assert!(p.gamma_star > 0.0);
    }

    #[test]
    fn linear_case_is_a_value_error() {
        assert!(matches!(model_params(1, 1.0, true), Err(Error::Value(_))));
        assert!(matches!(model_params(3, 1.0, false), Err(Error::Value(_))));
    }

    #[test]
    fn range_boundaries_are_exact() {
        assert!(matches!(model_params(2, 0.4, false), Err(Error::Range { .. })));
        assert!(matches!(model_params(2, 0.5, false), Err(Error::Range { .. })));
        assert!(matches!(model_params(2, 1.5, false), Err(Error::Range { .. })));
        assert!(model_params(2, 0.51, false).is_ok());
        assert!(matches!(model_params(1, 0.45, true), Err(Error::Range { .. })));
        assert!(model_params(1, 0.45, false).is_ok());
        assert!(matches!(model_params(1, 1.5, true), Err(Error::Range { .. })));
    }

    #[test]
    fn gamma_star_half() {
        // A = 3/5, exponent of γ is −1, I = π
        let p = model_params(1, 0.5, false).unwrap();
        let expected = 2.0 * PI / (0.6f64.sqrt() * 1.6);
        assert!((p.gamma_star - expected).abs() < 1e-10 * expected, "{}", p.gamma_star);
    }

    #[test]
    fn gamma_star_sign_follows_regime() {
        for &(d, m) in &[(1, 0.7), (1, 1.3), (2, 0.8), (2, 1.2), (3, 0.9), (3, 1.1)] {
            let p = model_params(d, m, false).unwrap();
            assert!((1.0 - m) * p.gamma_star > 0.0);
            assert!((1.0 - m) * (1.0 - p.k) > 0.0);
        }
    }

    #[test]
    fn unit_mass_by_nested_quadrature() {
        // direct 2-D integration of g⋆ in (x, v), independent of the radial reduction
        for &m in &[0.7, 0.8, 1.3] {
            let p = model_params(1, m, true).unwrap();
            let b = p.b();
            let g = |x: f64, v: f64| {
                let q = p.pressure_factor() * (p.gamma_star + b * (v * v + p.a * x * x));
                if q <= 0.0 {
                    0.0
                } else {
                    q.powf(p.power())
                }
            };
            let opts = QuadOptions { rel_tol: 1e-10, ..Default::default() };
            // map ℝ → (−1, 1) with x = s/(1 − s²)
            let map = |s: f64| (s / (1.0 - s * s), (1.0 + s * s) / (1.0 - s * s).powi(2));
            let inner = |x: f64| {
                integrate(
                    |s| {
                        let (v, j) = map(s);
                        g(x, v) * j
                    },
                    -1.0,
                    1.0,
                    opts,
                )
                .unwrap()
            };
            let mass = integrate(
                |s| {
                    let (x, j) = map(s);
                    inner(x) * j
                },
                -1.0,
                1.0,
                opts,
            )
            .unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "m={m}: {mass}");
        }
    }

    #[test]
    fn z_m_exists_above_threshold_only() {
        assert!(model_params(1, 0.8, true).unwrap().z_m.is_some());
        assert!(model_params(1, 0.45, false).unwrap().z_m.is_none());
        assert!(model_params(1, 1.2, true).unwrap().z_m.is_some());
    }

    #[test]
    fn equilibrium_round_trip() {
        let p = model_params(1, 0.8, true).unwrap();
        let c = hilbert_coefficient(&p);
        let n = equilibrium_normalization(c, &p).unwrap();
        assert!(n.nu1 > 0.0 && n.mu1 > 0.0);
        for &mu in &[0.3, 1.0, 4.0] {
            let rho = 2.0
                * integrate(
                    |s: f64| {
                        let v = s / (1.0 - s * s);
                        let j = (1.0 + s * s) / (1.0 - s * s).powi(2);
                        (mu + c * v * v).powf(p.power()) * j
                    },
                    0.0,
                    1.0,
                    QuadOptions::default(),
                )
                .unwrap();
            let back = n.mu_of_rho(&p, rho);
            assert!((back - mu).abs() < 1e-8 * mu, "{back} vs {mu}");
        }
        assert!(matches!(
            equilibrium_normalization(hilbert_coefficient(&model_params(1, 0.45, false).unwrap()), &model_params(1, 0.45, false).unwrap()),
            Err(Error::IntegralDivergence(_))
        ));
    }
}
