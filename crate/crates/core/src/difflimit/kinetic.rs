//! Kinetic runs in the diffusive scaling, d = 1:
//!
//! ```text
//! ∂τ h + (c/ε) v ∂x h = (ν₁c²/ε²)(∂v² h^m + ∂v(v h)),   c(τ) = σ/(ν₁R)
//! ```
//!
//! Strang splitting: exact Fourier shifts along a periodic x for each v-row,
//! and the well-balanced Fokker–Planck step in v with `c` frozen at the
//! step midpoint. Densities are compared with the Barenblatt solution of
//! `∂τ ρ = ∂x² ρ^k`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{barenblatt, macro_params, Line, MacroParams};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::params::ModelParams;
use crate::solver::diffusion::{step_diffusion_fields, FpCoefficients, VBlock};

const BISECTION_STEPS: usize = 200;
const FLOOR: f64 = 1e-14;

/// `H = (μ + c v²)₊^{1/(m−1)}`, `c = (1−m)/(2m)`, with `μ` chosen so that
/// `Σ H dv = rho` on the given nodes.
pub fn local_equilibrium(rho: f64, v: &[f64], dv: f64, mp: &MacroParams) -> Result<Vec<f64>> {
    let m = mp.m;
    let c = (1.0 - m) / (2.0 * m);
    let p = 1.0 / (m - 1.0);
    let profile = |mu: f64| -> Vec<f64> {
        v.iter()
            .map(|vi| {
                let b = mu + c * vi * vi;
                if b > 0.0 {
                    b.powf(p)
                } else {
                    0.0
                }
            })
            .collect()
    };
    if rho == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Value(format!("density must be nonnegative, got {rho}")));
    }
    let mass = |mu: f64| profile(mu).iter().sum::<f64>() * dv;
    // mass is monotone in μ: decreasing for m < 1, increasing for m > 1
    let falling = m < 1.0;
    let too_big = |mu: f64| (mass(mu) > rho) == falling;
    let guess = mp.mu1 * rho.powf(mp.k - 1.0);
    let (mut lo, mut hi) = (guess, guess);
    let mut tries = 0;
    while !too_big(lo) {
        lo *= 0.5;
        tries += 1;
        if tries > 2000 {
            return Err(Error::Convergence(format!("no lower bracket for rho = {rho}")));
        }
    }
    while too_big(hi) {
        hi *= 2.0;
        tries += 1;
        if tries > 2000 {
            return Err(Error::Convergence(format!("no upper bracket for rho = {rho}")));
        }
    }
    // invariant: too_big(lo), !too_big(hi)
    for _ in 0..BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if too_big(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut h = profile(hi);
    let s = h.iter().sum::<f64>() * dv;
    h.iter_mut().for_each(|x| *x *= rho / s);
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffLimitConfig {
    /// Barenblatt time of the initial density.
    pub tau0: f64,
    /// Elapsed times at which densities are compared.
    pub taus: Vec<f64>,
    pub nx: usize,
    pub lx: f64,
    pub nv: usize,
    pub lv: f64,
    /// Macro step as a fraction of the relaxation time `ε²/(ν₁c²)`.
    pub step_fraction: f64,
    pub cfl: f64,
    pub max_substeps: usize,
    pub exec: Exec,
}

impl Default for DiffLimitConfig {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            taus: vec![0.25, 0.5, 1.0],
            nx: 192,
            lx: 24.0,
            nv: 80,
            lv: 20.0,
            step_fraction: 0.2,
            cfl: 0.4,
            max_substeps: 100_000,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffLimitRow {
    pub eps: f64,
    pub tau: f64,
    /// `‖ρ_h − ρ_B‖_{L¹}`.
    pub error: f64,
    /// Same, with `h` replaced by its local equilibrium under the continuous closure `μ = μ₁ρ^{k−1}`.
    pub projected_error: f64,
    /// `‖h − H[ρ_h]‖_{L¹}/‖h‖_{L¹}`.
    pub equilibrium_gap: f64,
    /// Relative change of the total mass since the start.
    pub mass_drift: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffLimitReport {
    pub macro_params: MacroParams,
    pub config: DiffLimitConfig,
    pub rows: Vec<DiffLimitRow>,
}

impl DiffLimitReport {
    pub fn rows_at(&self, tau: f64) -> Vec<&DiffLimitRow> {
        self.rows.iter().filter(|r| (r.tau - tau).abs() < 1e-12).collect()
    }
}

struct Kinetic<'a> {
    mp: &'a MacroParams,
    eps: f64,
    line: Line,
    v: Vec<f64>,
    dv: f64,
    geom: VBlock,
    fft: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    cfg: &'a DiffLimitConfig,
}

impl Kinetic<'_> {
    /// `c` at elapsed time `t`; the kinetic clock starts at `s = 0`.
    fn speed(&self, t: f64) -> f64 {
        let s = self.mp.s_of_tau(t);
        self.mp.sigma(s) / (self.mp.nu1 * self.mp.scale(s))
    }

    fn density(&self, h: &[f64]) -> Vec<f64> {
        h.chunks(self.geom.nv).map(|b| b.iter().sum::<f64>() * self.dv).collect()
    }

    /// `h(x, v) ← h(x − a v, v)` on the periodic x-grid, then negatives are
    /// cleared row by row without changing row sums.
    fn transport(&self, h: &mut [f64], a: f64) {
        let (nx, nv) = (self.line.n, self.geom.nv);
        let dx = self.line.dx();
        let (fwd, inv) = (&self.fft.0, &self.fft.1);
        let src: &[f64] = h;
        let rows = self.cfg.exec.map(nv, |j| {
            let shift = -a * self.v[j] / dx;
            let mut buf: Vec<Complex64> = (0..nx).map(|i| Complex64::new(src[i * nv + j], 0.0)).collect();
            fwd.process(&mut buf);
            for (f, z) in buf.iter_mut().enumerate() {
                let signed = if 2 * f < nx { f as f64 } else { f as f64 - nx as f64 };
                let phase = 2.0 * PI * signed * shift / nx as f64;
                if 2 * f == nx {
                    *z *= phase.cos();
                } else {
                    *z *= Complex64::from_polar(1.0, phase);
                }
            }
            inv.process(&mut buf);
            let mut row: Vec<f64> = buf.into_iter().map(|z| z.re / nx as f64).collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x = x.max(0.0));
            let pos: f64 = row.iter().sum();
            if pos > 0.0 && total > 0.0 {
                row.iter_mut().for_each(|x| *x *= total / pos);
            }
            row
        });
        for (j, row) in rows.into_iter().enumerate() {
            for (i, x) in row.into_iter().enumerate() {
                h[i * nv + j] = x;
            }
        }
    }

    fn relax(&self, h: &mut [f64], c: f64, dt: f64) -> Result<()> {
        let coeffs = FpCoefficients {
            m: self.mp.m,
            rate: self.mp.nu1 * c * c / (self.eps * self.eps),
            kappa: 1.0,
        };
        step_diffusion_fields(
            &mut [h],
            self.geom,
            coeffs,
            None,
            FLOOR,
            dt,
            self.cfg.cfl,
            self.cfg.max_substeps,
            self.cfg.exec,
        )?;
        Ok(())
    }

    fn equilibrium(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let mut h = Vec::with_capacity(rho.len() * self.geom.nv);
        for &r in rho {
            h.extend(local_equilibrium(r, &self.v, self.dv, self.mp)?);
        }
        Ok(h)
    }

    /// Density of `H` with the continuous closure `μ = μ₁ρ^{k−1}`.
    fn closure_density(&self, rho: &[f64]) -> Vec<f64> {
        let m = self.mp.m;
        let c = (1.0 - m) / (2.0 * m);
        rho.iter()
            .map(|&r| {
                if r <= 0.0 {
                    return 0.0;
                }
                let mu = self.mp.mu1 * r.powf(self.mp.k - 1.0);
                self.v
                    .iter()
                    .map(|vi| {
                        let b = mu + c * vi * vi;
                        if b > 0.0 {
                            b.powf(1.0 / (m - 1.0))
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
                    * self.dv
            })
            .collect()
    }

    fn run(&self) -> Result<Vec<DiffLimitRow>> {
        let cfg = self.cfg;
        let x = self.line.nodes();
        let rho0: Vec<f64> = x
            .iter()
            .map(|xi| barenblatt(cfg.tau0, &[*xi], self.mp))
            .collect::<Result<_>>()?;
        let mut h = self.equilibrium(&rho0)?;
        let mass0: f64 = h.iter().sum();
        let mut t = 0.0;
        let mut steps = 0;
        let mut rows = Vec::with_capacity(cfg.taus.len());
        for &target in &cfg.taus {
            while t < target {
                let c0 = self.speed(t);
                let relax_time = self.eps * self.eps / (self.mp.nu1 * c0 * c0);
                let mut dt = cfg.step_fraction * relax_time;
                let last = dt >= target - t;
                if last {
                    dt = target - t;
                }
                let c = self.speed(t + 0.5 * dt);
                let a = 0.5 * dt * c / self.eps;
                self.transport(&mut h, a);
                self.relax(&mut h, c, dt)?;
                self.transport(&mut h, a);
                t = if last { target } else { t + dt };
                steps += 1;
            }
            if let Some(cell) = h.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { cell });
            }
            let rho = self.density(&h);
            let exact: Vec<f64> = x
                .iter()
                .map(|xi| barenblatt(cfg.tau0 + target, &[*xi], self.mp))
                .collect::<Result<_>>()?;
            let eq = self.equilibrium(&rho)?;
            let gap = h.iter().zip(&eq).map(|(a, b)| (a - b).abs()).sum::<f64>() / h.iter().sum::<f64>();
            rows.push(DiffLimitRow {
                eps: self.eps,
                tau: target,
                error: self.line.l1_distance(&rho, &exact),
                projected_error: self.line.l1_distance(&self.closure_density(&rho), &exact),
                equilibrium_gap: gap,
                mass_drift: (h.iter().sum::<f64>() - mass0) / mass0,
                steps,
            });
        }
        Ok(rows)
    }
}

/// Runs the kinetic equation for each `ε` from the local equilibrium of a
/// Barenblatt density and records the L¹ distance to the Barenblatt solution.
pub fn diffusion_limit_experiment(eps: &[f64], p: &ModelParams, cfg: &DiffLimitConfig) -> Result<DiffLimitReport> {
    if p.d != 1 {
        return Err(Error::Value(format!("the kinetic diffusion-limit run is one-dimensional, got d = {}", p.d)));
    }
    if p.m >= p.m2 {
        return Err(Error::Range {
            d: p.d,
            m: p.m,
            reason: "the kinetic run needs m < m2".into(),
        });
    }
    let mp = &macro_params(p)?;
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Value("epsilons must be positive and decreasing".into()));
    }
    if !(cfg.tau0 > 0.0) || !(cfg.step_fraction > 0.0) {
        return Err(Error::Value("tau0 and step_fraction must be positive".into()));
    }
    if cfg.taus.windows(2).any(|w| w[1] <= w[0]) || cfg.taus.first().is_some_and(|t| *t <= 0.0) {
        return Err(Error::Value("comparison times must be positive and increasing".into()));
    }
    if cfg.nv < 3 || !(cfg.lv > 0.0) {
        return Err(Error::Value(format!("invalid velocity grid nv = {}, lv = {}", cfg.nv, cfg.lv)));
    }
    let line = Line::new(cfg.nx, cfg.lx)?;
    let dv = 2.0 * cfg.lv / cfg.nv as f64;
    let v: Vec<f64> = (0..cfg.nv).map(|j| -cfg.lv + (j as f64 + 0.5) * dv).collect();
    let geom = VBlock {
        d: 1,
        nv: cfg.nv,
        dv,
        lv: cfg.lv,
    };
    let mut planner = FftPlanner::<f64>::new();
    let fft = (planner.plan_fft_forward(cfg.nx), planner.plan_fft_inverse(cfg.nx));
    let runs = cfg.exec.map(eps.len(), |i| {
        Kinetic {
            mp,
            eps: eps[i],
            line,
            v: v.clone(),
            dv,
            geom,
            fft: fft.clone(),
            cfg,
        }
        .run()
    });
    let mut rows = Vec::new();
    for r in runs {
        rows.extend(r?);
    }
    Ok(DiffLimitReport {
        macro_params: mp.clone(),
        config: cfg.clone(),
        rows,
    })
}
