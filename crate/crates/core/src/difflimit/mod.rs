//! Formal diffusion limit: macroscopic constants, Barenblatt profiles of
//! `∂τ ρ = Δx ρ^k`, an explicit porous-medium solver used as an oracle, and
//! the ε-sweep comparing kinetic densities with the macroscopic solution.

mod kinetic;

pub use kinetic::{
    diffusion_limit_experiment, local_equilibrium, DiffLimitConfig, DiffLimitReport, DiffLimitRow,
};

use crate::error::{Error, Result};
use crate::params::{equilibrium_normalization, hilbert_coefficient, ModelParams};
use crate::quad::{radial_checked, sphere_area, Tail};

/// Agreement demanded between the `c⋆` quadrature and its Beta closed form.
const C_STAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MacroParams {
    pub d: usize,
    pub m: f64,
    pub alpha: f64,
    pub eta: f64,
    pub k: f64,
    pub beta: f64,
    pub c_star: f64,
    pub mu1: f64,
    pub nu1: f64,
}

pub fn macro_params(p: &ModelParams) -> Result<MacroParams> {
    let df = p.d as f64;
    let m = p.m;
    let range = |reason: &str| Error::Range {
        d: p.d,
        m,
        reason: reason.into(),
    };
    if m <= p.m_c {
        return Err(range("the diffusion limit needs m > m_c (alpha > 0)"));
    }
    if m <= p.m_tilde1 {
        return Err(range("the diffusion limit needs a second moment, m > d/(d+1)"));
    }
    let alpha = 1.0 / (df * (m - p.m_c));
    let eta = 3.0 / (2.0 * (df * m - df + 1.0));
    let k = 1.0 + 2.0 * alpha * (m - 1.0);
    let beta = 1.0 / (df * (k - 1.0) + 2.0);
    let closure = equilibrium_normalization(hilbert_coefficient(p), p)?;
    // ∫(c + a|x|²)₊^{1/(k−1)} = c^{q + d/2} |a|^{−d/2} |𝕊^{d−1}| J
    let a = (1.0 - k) / (2.0 * k);
    let q = 1.0 / (k - 1.0);
    let j = radial_checked(df - 1.0, q, Tail::for_exponent(k), C_STAR_TOL)?;
    let unit = a.abs().powf(-0.5 * df) * sphere_area(p.d) * j;
    let c_star = unit.recip().powf(1.0 / (q + 0.5 * df));
    Ok(MacroParams {
        d: p.d,
        m,
        alpha,
        eta,
        k,
        beta,
        c_star,
        mu1: closure.mu1,
        nu1: closure.nu1,
    })
}

impl MacroParams {
    /// `R(s) = (1 + s/α)^α`.
    pub fn scale(&self, s: f64) -> f64 {
        (1.0 + s / self.alpha).powf(self.alpha)
    }

    /// `σ(s) = (1 + s/α)^{−1}`.
    pub fn sigma(&self, s: f64) -> f64 {
        1.0 / (1.0 + s / self.alpha)
    }

    /// `τ(s) = αν₁/(2(1+α)) ((1 + s/α)^{2(1+α)} − 1)`, so `dτ/ds = ν₁R²/σ`, `τ(0) = 0`.
    pub fn tau(&self, s: f64) -> f64 {
        let a = self.alpha;
        a * self.nu1 / (2.0 * (1.0 + a)) * ((1.0 + s / a).powf(2.0 * (1.0 + a)) - 1.0)
    }

    /// Inverse of [`Self::tau`].
    pub fn s_of_tau(&self, tau: f64) -> f64 {
        let a = self.alpha;
        let base = 1.0 + 2.0 * (1.0 + a) * tau / (a * self.nu1);
        a * (base.powf(1.0 / (2.0 * (1.0 + a))) - 1.0)
    }

    /// `ρ⋆(x) = (c⋆ + (1−k)/(2k) |x|²)₊^{1/(k−1)}` from `|x|²`.
    pub fn rho_star(&self, r2: f64) -> f64 {
        let base = self.c_star + (1.0 - self.k) / (2.0 * self.k) * r2;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(1.0 / (self.k - 1.0))
        }
    }
}

/// Barenblatt solution `(τ/β)^{−dβ} ρ⋆((τ/β)^{−β} x)` with unit mass.
pub fn barenblatt(tau: f64, x: &[f64], mp: &MacroParams) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("Barenblatt time must be positive, got {tau}")));
    }
    let lam = (tau / mp.beta).powf(-mp.beta);
    let r2: f64 = x.iter().map(|xi| (lam * xi).powi(2)).sum();
    Ok(lam.powi(mp.d as i32) * mp.rho_star(r2))
}

/// Uniform cell-centred grid on `[−l, l]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub n: usize,
    pub l: f64,
}

impl Line {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 3 || !(l > 0.0 && l.is_finite()) {
            return Err(Error::Value(format!("invalid line grid n = {n}, l = {l}")));
        }
        Ok(Self { n, l })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.l + (i as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|i| f(self.node(i))).collect()
    }

    pub fn mass(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() * self.dx()
    }

    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>() * self.dx()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmeOptions {
    pub cfl: f64,
    pub max_steps: usize,
}

impl Default for PmeOptions {
    fn default() -> Self {
        Self {
            cfl: 0.45,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: usize,
}

/// `∂τ ρ = ∂x² ρ^k` on `line` with zero-flux ends, by explicit finite volumes.
///
/// Face fluxes are `−(ρ_{i+1}^k − ρ_i^k)/dx`; the step uses the largest
/// secant diffusivity `(ρ_{i+1}^k − ρ_i^k)/(ρ_{i+1} − ρ_i)`, which keeps the
/// update monotone. Returns the states at each of `times` (increasing).
pub fn pme_solve(rho0: &[f64], k: f64, times: &[f64], line: &Line, opts: PmeOptions) -> Result<PmeTrajectory> {
    if rho0.len() != line.n {
        return Err(Error::Value("initial density does not match the grid".into()));
    }
    if rho0.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Value("initial density must be nonnegative".into()));
    }
    if !(k > 1.0 / 3.0) {
        return Err(Error::Value(format!("need k > d/(d+2) = 1/3, got {k}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::Value("output times must be nonnegative and increasing".into()));
    }
    let n = line.n;
    let dx = line.dx();
    let mut rho = rho0.to_vec();
    let mut pk = vec![0.0; n];
    let mut flux = vec![0.0; n + 1];
    let mut now = 0.0;
    let mut steps = 0;
    let mut states = Vec::with_capacity(times.len());
    for &target in times {
        while now < target {
            let mut dmax: f64 = 0.0;
            for i in 0..n {
                pk[i] = rho[i].powf(k);
            }
            for i in 0..n - 1 {
                let dr = rho[i + 1] - rho[i];
                let dp = pk[i + 1] - pk[i];
                let dif = if dr.abs() > 1e-14 * rho[i].max(rho[i + 1]) && dr != 0.0 {
                    dp / dr
                } else {
                    k * rho[i].max(rho[i + 1]).powf(k - 1.0)
                };
                if dif.is_finite() {
                    dmax = dmax.max(dif);
                }
                flux[i + 1] = -dp / dx;
            }
            let limit = opts.cfl * dx * dx / dmax.max(1e-300);
            let dt = limit.min(target - now);
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Cfl {
                    needed: ((target - now) / limit).ceil() as usize + steps,
                    cap: opts.max_steps,
                });
            }
            for i in 0..n {
                rho[i] -= dt / dx * (flux[i + 1] - flux[i]);
            }
            if rho.iter().any(|r| !r.is_finite()) {
                return Err(Error::NonFinite { cell: 0 });
            }
            now = if dt == target - now { target } else { now + dt };
        }
        states.push(rho.clone());
    }
    Ok(PmeTrajectory {
        times: times.to_vec(),
        states,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::model_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mp() -> MacroParams {
        macro_params(&model_params(1, 0.8, false).unwrap()).unwrap()
    }

    /// `∫_{−l}^{l} ρ` by the trapezoid rule.
    fn mass(tau: f64, l: f64, n: usize, mp: &MacroParams) -> f64 {
        let h = 2.0 * l / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * barenblatt(tau, &[-l + i as f64 * h], mp).unwrap()
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn rational_constants() {
        let mp = mp();
        assert!((mp.alpha - 5.0 / 9.0).abs() < 1e-14);
        assert!((mp.eta - 1.875).abs() < 1e-14);
        assert!((mp.k - 7.0 / 9.0).abs() < 1e-14);
        assert!((mp.beta - 9.0 / 16.0).abs() < 1e-14);
        assert!(mp.c_star > 0.0);
    }

    #[test]
    fn identities_over_random_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut seen = 0;
        while seen < 1000 {
            let d = rng.random_range(1..=3usize);
            let m: f64 = rng.random_range(0.0..2.0);
            let Ok(p) = model_params(d, m, false) else { continue };
            if (m - 1.0).abs() < 1e-3 || m <= p.m_tilde1.max(p.m_c) + 1e-3 {
                continue;
            }
            let mp = macro_params(&p).unwrap();
            let df = d as f64;
            assert!((1.0 / mp.alpha - df * (m - p.m_c)).abs() < 1e-12);
            assert!((2.0 * (df * m - df + 1.0) * mp.eta - 3.0).abs() < 1e-12);
            assert!((mp.k - 1.0 - 2.0 * mp.alpha * (m - 1.0)).abs() < 1e-12);
            assert!((1.0 / mp.beta - df * (mp.k - 1.0) - 2.0).abs() < 1e-12);
            assert!((mp.k - p.k).abs() < 1e-12);
            let lhs = 1.0 / (2.0 * mp.alpha * (m - 1.0));
            assert!((lhs - (df / 2.0 + 1.0 / (m - 1.0))).abs() < 1e-12 * lhs.abs().max(1.0));
            assert!(mp.k > df / (df + 2.0));
            assert_eq!(mp.tau(0.0), 0.0);
            seen += 1;
        }
    }

    #[test]
    fn rejects_exponents_without_second_moment() {
        for (d, m) in [(1, 0.4), (1, 0.5), (2, 0.6), (3, 0.7)] {
            let p = model_params(d, m, false).unwrap();
            assert!(matches!(macro_params(&p), Err(Error::Range { .. })), "d={d} m={m}");
        }
    }

    #[test]
    fn time_change_derivative_and_inverse() {
        let mp = mp();
        let h = 1e-5;
        for s in [0.0, 1.0, 5.0] {
            let fd = (mp.tau(s + h) - mp.tau(s - h)) / (2.0 * h);
            let exact = mp.nu1 * mp.scale(s).powi(2) / mp.sigma(s);
            assert!((fd - exact).abs() < 1e-8 * exact, "s={s}: {fd} vs {exact}");
            assert!((mp.s_of_tau(mp.tau(s)) - s).abs() < 1e-12 * (1.0 + s));
        }
    }

    #[test]
    fn barenblatt_has_unit_mass() {
        let mp = mp();
        for tau in [0.1, 1.0, 10.0] {
            // tail ~ |x|^{2/(k−1)} = |x|^{−9}: beyond l the mass is O(l^{−8})
            let scale = (tau / mp.beta).powf(mp.beta);
            let l = 400.0 * scale;
            let decay = 2.0 / (mp.k - 1.0);
            let tail = 2.0 / (-decay - 1.0)
                * barenblatt(tau, &[l], &mp).unwrap()
                * l;
            let got = mass(tau, l, 800_000, &mp) + tail;
            assert!((got - 1.0).abs() < 1e-8, "tau={tau}: {got}");
        }
    }

    #[test]
    fn porous_medium_profile_has_unit_mass() {
        let mp = macro_params(&model_params(1, 1.3, false).unwrap()).unwrap();
        assert!(mp.k > 1.0);
        for tau in [0.1, 1.0, 10.0] {
            let got = mass(tau, 30.0 * (tau / mp.beta).powf(mp.beta), 400_000, &mp);
            assert!((got - 1.0).abs() < 1e-8, "tau={tau}: {got}");
        }
    }

    #[test]
    fn self_similarity() {
        let mp = mp();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let tau: f64 = rng.random_range(0.05..20.0);
            let x: f64 = rng.random_range(-10.0..10.0);
            let lam: f64 = rng.random_range(0.2..5.0);
            let a = barenblatt(tau, &[x], &mp).unwrap();
            let b = lam.powi(mp.d as i32) * barenblatt(lam.powf(1.0 / mp.beta) * tau, &[lam * x], &mp).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300) * 10.0, "{a} vs {b}");
        }
        assert!(matches!(barenblatt(0.0, &[1.0], &mp), Err(Error::Domain(_))));
    }

    #[test]
    fn barenblatt_solves_the_diffusion_equation() {
        for m in [0.8, 1.3] {
            let mp = macro_params(&model_params(1, m, false).unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let pts: Vec<(f64, f64)> = (0..30)
                .map(|_| (rng.random_range(0.5..3.0), rng.random_range(-1.5..1.5)))
                .collect();
            let res = |h: f64| {
                pts.iter()
                    .map(|&(t, x)| {
                        let r = |t: f64, x: f64| barenblatt(t, &[x], &mp).unwrap();
                        let dt = (r(t + h, x) - r(t - h, x)) / (2.0 * h);
                        let lap = (r(t, x + h).powf(mp.k) - 2.0 * r(t, x).powf(mp.k) + r(t, x - h).powf(mp.k)) / (h * h);
                        (dt - lap).abs()
                    })
                    .fold(0.0, f64::max)
            };
            let (coarse, fine) = (res(1e-2), res(5e-3));
            assert!(fine < 1e-4, "m={m}: residual {fine}");
            assert!(coarse / fine > 3.0, "m={m}: {coarse} -> {fine}");
        }
    }

    fn tracking_error(n: usize) -> (f64, f64) {
        let mp = mp();
        let line = Line::new(n, 40.0).unwrap();
        let rho0 = line.sample(|x| barenblatt(1.0, &[x], &mp).unwrap());
        let traj = pme_solve(&rho0, mp.k, &[1.0], &line, PmeOptions::default()).unwrap();
        let exact = line.sample(|x| barenblatt(2.0, &[x], &mp).unwrap());
        let drift = (line.mass(&traj.states[0]) - line.mass(&rho0)).abs() / line.mass(&rho0);
        (line.l1_distance(&traj.states[0], &exact), drift)
    }

    #[test]
    fn pme_tracks_barenblatt_and_conserves_mass() {
        let (e1, d1) = tracking_error(200);
        let (e2, d2) = tracking_error(400);
        assert!(e2 <= 1e-2, "L1 error {e2}");
        assert!(e1 / e2 > 2.0, "refinement {e1} -> {e2}");
        assert!(d1 < 1e-12 && d2 < 1e-12, "{d1} {d2}");
    }

    #[test]
    fn pme_keeps_constants_and_reports_step_cap() {
        let line = Line::new(50, 3.0).unwrap();
        let traj = pme_solve(&vec![0.7; 50], 1.5, &[0.5, 1.0], &line, PmeOptions::default()).unwrap();
        for s in &traj.states {
            assert!(s.iter().all(|r| (r - 0.7).abs() < 1e-14));
        }
        let rho0 = line.sample(|x| (1.0 - x * x).max(0.0));
        let opts = PmeOptions {
            max_steps: 10,
            ..PmeOptions::default()
        };
        assert!(matches!(pme_solve(&rho0, 2.0, &[10.0], &line, opts), Err(Error::Cfl { .. })));
        assert!(pme_solve(&rho0, 0.3, &[1.0], &line, PmeOptions::default()).is_err());
    }

    #[test]
    fn local_equilibrium_matches_density_and_closure() {
        let mp = mp();
        let nv = 400;
        let dv = 60.0 / nv as f64;
        let v: Vec<f64> = (0..nv).map(|j| -30.0 + (j as f64 + 0.5) * dv).collect();
        for rho in [1e-4, 0.1, 1.0, 5.0] {
            let h = local_equilibrium(rho, &v, dv, &mp).unwrap();
            let got: f64 = h.iter().sum::<f64>() * dv;
            assert!((got - rho).abs() < 1e-12 * rho);
            // continuous closure μ = μ₁ρ^{k−1} recovers the profile up to quadrature
            let mu = mp.mu1 * rho.powf(mp.k - 1.0);
            let c = (1.0 - mp.m) / (2.0 * mp.m);
            let i = nv / 2;
            let want = (mu + c * v[i] * v[i]).powf(1.0 / (mp.m - 1.0));
            assert!((h[i] - want).abs() < 2e-3 * want, "rho={rho}: {} vs {want}", h[i]);
        }
    }
}
