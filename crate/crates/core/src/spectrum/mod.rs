//! Spectrum of the linearized operator around `g⋆` (`d = 1`, `m < 1`):
//!
//! ```text
//! 𝓛h = m Δv(g⋆^{m−1} h) + (1+A) ∇v·(v h) − v·∇x h + A x·∇v h
//! ```
//!
//! discretized in the symmetrized form `L f = g⋆^{(m−2)/2} 𝓛(g⋆^{(2−m)/2} f)`
//! on a rectangle or an ellipse with zero exterior values.

mod eigen;
mod sparse;

pub use eigen::{
    eigensolve, parity_blocks, AnalyticCheck, Backend, Block, EigenOptions, Parity, SpectrumResult,
    DENSE_LIMIT, INTERIOR_SHARE,
};
pub use sparse::Csr;

use crate::error::{Error, Result};
use crate::fields::PhaseGrid;
use crate::par::Exec;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `[−lx, lx] × [−lv, lv]`.
    Rectangle { lx: f64, lv: f64 },
    /// `(x/ax)² + (v/av)² < 1`, discretized on its bounding box.
    Ellipse { ax: f64, av: f64 },
}

impl Domain {
    /// Ellipse with the area of the rectangle `[−lx, lx] × [−lv, lv]`.
    pub fn equal_area_ellipse(lx: f64, lv: f64) -> Self {
        let s = 2.0 / std::f64::consts::PI.sqrt();
        Domain::Ellipse { ax: s * lx, av: s * lv }
    }

    pub fn half_widths(&self) -> (f64, f64) {
        match *self {
            Domain::Rectangle { lx, lv } => (lx, lv),
            Domain::Ellipse { ax, av } => (ax, av),
        }
    }

    pub fn contains(&self, x: f64, v: f64) -> bool {
        match *self {
            Domain::Rectangle { lx, lv } => x.abs() < lx && v.abs() < lv,
            Domain::Ellipse { ax, av } => (x / ax).powi(2) + (v / av).powi(2) < 1.0,
        }
    }

    /// Gauge with the boundary at 1: max-norm for the rectangle, Euclidean for the ellipse.
    pub fn relative_radius(&self, x: f64, v: f64) -> f64 {
        match *self {
            Domain::Rectangle { lx, lv } => (x / lx).abs().max((v / lv).abs()),
            Domain::Ellipse { ax, av } => ((x / ax).powi(2) + (v / av).powi(2)).sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Rectangle { .. } => "rectangle",
            Domain::Ellipse { .. } => "ellipse",
        }
    }
}

/// Which terms enter the matrix and how the first-order ones are differenced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub upwind: bool,
    /// `−v ∂x + A x ∂v`; off leaves the v-Fokker–Planck part alone.
    pub transport: bool,
    /// Replaces `g⋆^{m−1}` by 1 in the diffusion.
    pub unit_diffusivity: bool,
}

impl Default for Stencil {
    fn default() -> Self {
        Self {
            upwind: false,
            transport: true,
            unit_diffusivity: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearOperatorAssembly {
    pub p: ModelParams,
    pub domain: Domain,
    pub nx: usize,
    pub nv: usize,
    pub dx: f64,
    pub dv: f64,
    pub stencil: Stencil,
    /// `(i, j)` of each active cell, x-major.
    pub cells: Vec<(usize, usize)>,
    /// Active index of cell `i·nv + j`, if any.
    pub index: Vec<Option<usize>>,
    /// `g⋆^{(2−m)/2}` on active cells: `h = weight · f`.
    pub weight: Vec<f64>,
    pub matrix: Csr,
}

fn check_setting(p: &ModelParams) -> Result<()> {
    if p.d != 1 {
        return Err(Error::Value(format!("the spectrum is implemented for d = 1, got d = {}", p.d)));
    }
    if !(p.m > p.m1 && p.m < 1.0) {
        return Err(Error::Range {
            d: p.d,
            m: p.m,
            reason: "the linearization is set up for m in (m1, 1)".into(),
        });
    }
    Ok(())
}

/// Stationary pressure `γ⋆ + B(v² + A x²)`.
fn pressure(p: &ModelParams, x: f64, v: f64) -> f64 {
    p.gamma_star + p.b() * (v * v + p.a * x * x)
}

/// `g⋆(x, v)`.
pub fn g_star(p: &ModelParams, x: f64, v: f64) -> f64 {
    (p.pressure_factor() * pressure(p, x, v)).powf(p.power())
}

impl LinearOperatorAssembly {
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let (lx, lv) = self.domain.half_widths();
        (
            -lx + (i as f64 + 0.5) * self.dx,
            -lv + (j as f64 + 0.5) * self.dv,
        )
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Active index of the image under `(x, v) ↦ (−x, −v)`.
    pub fn mirror(&self, k: usize) -> usize {
        let (i, j) = self.cells[k];
        self.index[(self.nx - 1 - i) * self.nv + (self.nv - 1 - j)]
            .expect("domains are symmetric")
    }

    /// Samples `h` on the active cells in the symmetrized frame, `f = h / weight`.
    pub fn sample<H: Fn(f64, f64) -> f64>(&self, h: H) -> Vec<f64> {
        self.cells
            .iter()
            .zip(&self.weight)
            .map(|(&(i, j), w)| {
                let (x, v) = self.cell_center(i, j);
                h(x, v) / w
            })
            .collect()
    }

    /// Whether active cell `k` lies in the window scaled by `frac` from the domain.
    pub fn in_window(&self, k: usize, frac: f64) -> bool {
        let (i, j) = self.cells[k];
        let (x, v) = self.cell_center(i, j);
        self.domain.relative_radius(x, v) <= frac
    }

    /// `‖L f − λ f‖ / ‖f‖` over the active cells of the window scaled by `frac`.
    pub fn windowed_residual(&self, f: &[f64], lambda: f64, frac: f64) -> f64 {
        let lf = self.matrix.mul(f);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.len() {
            if self.in_window(k, frac) {
                num += (lf[k] - lambda * f[k]).powi(2);
                den += f[k] * f[k];
            }
        }
        (num / den).sqrt()
    }
}

/// Builds the sparse symmetrized operator on the active cells of `domain`,
/// split into `nx × nv` cells over its bounding box.
pub fn assemble(
    p: &ModelParams,
    domain: Domain,
    nx: usize,
    nv: usize,
    stencil: Stencil,
    exec: Exec,
) -> Result<LinearOperatorAssembly> {
    check_setting(p)?;
    if nx < 3 || nv < 3 {
        return Err(Error::Value(format!("grid {nx} x {nv} is too small")));
    }
    let (lx, lv) = domain.half_widths();
    if !(lx > 0.0 && lv > 0.0) {
        return Err(Error::Value("domain extents must be positive".into()));
    }
    let dx = 2.0 * lx / nx as f64;
    let dv = 2.0 * lv / nv as f64;
    let mut cells = Vec::new();
    let mut index = vec![None; nx * nv];
    for i in 0..nx {
        for j in 0..nv {
            let x = -lx + (i as f64 + 0.5) * dx;
            let v = -lv + (j as f64 + 0.5) * dv;
            if domain.contains(x, v) {
                index[i * nv + j] = Some(cells.len());
                cells.push((i, j));
            }
        }
    }
    let m = p.m;
    let x_of = |i: usize| -lx + (i as f64 + 0.5) * dx;
    let v_of = |j: usize| -lv + (j as f64 + 0.5) * dv;
    let weight_at = |i: usize, j: usize| g_star(p, x_of(i), v_of(j)).powf(0.5 * (2.0 - m));
    let weight: Vec<f64> = cells.iter().map(|&(i, j)| weight_at(i, j)).collect();
    if let Some(k) = weight.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Domain(format!("g* underflows at active cell {k}")));
    }
    let diffusivity = |i: usize, j: usize| {
        if stencil.unit_diffusivity {
            1.0
        } else {
            g_star(p, x_of(i), v_of(j)).powf(m - 1.0)
        }
    };
    let a = p.a;
    let rows = exec.map(cells.len(), |k| {
        let (i, j) = cells[k];
        let (x, v) = (x_of(i), v_of(j));
        // coefficients of 𝓛 acting on h, by neighbour offset
        let mut c = [[0.0f64; 3]; 3];
        let mut add = |di: isize, dj: isize, val: f64| {
            c[(di + 1) as usize][(dj + 1) as usize] += val;
        };
        let dm = m / (dv * dv);
        add(0, 0, -2.0 * dm * diffusivity(i, j));
        if j > 0 {
            add(0, -1, dm * diffusivity(i, j - 1));
        }
        if j + 1 < nv {
            add(0, 1, dm * diffusivity(i, j + 1));
        }
        let s = 1.0 + a;
        if stencil.upwind {
            // ∂v(v h) in flux form, each face value taken against the inward drift −(1+A)v
            let up = v + 0.5 * dv;
            let lo = v - 0.5 * dv;
            add(0, if up > 0.0 { 1 } else { 0 }, s * up / dv);
            add(0, if lo > 0.0 { 0 } else { -1 }, -s * lo / dv);
        } else {
            add(0, 1, s * (v + dv) / (2.0 * dv));
            add(0, -1, -s * (v - dv) / (2.0 * dv));
        }
        if stencil.transport {
            if stencil.upwind {
                // −v ∂x h moves along +v, A x ∂v h along −A x
                if v > 0.0 {
                    add(0, 0, -v / dx);
                    add(-1, 0, v / dx);
                } else {
                    add(1, 0, -v / dx);
                    add(0, 0, v / dx);
                }
                let cv = -a * x;
                if cv > 0.0 {
                    add(0, 0, -cv / dv);
                    add(0, -1, cv / dv);
                } else {
                    add(0, 1, -cv / dv);
                    add(0, 0, cv / dv);
                }
            } else {
                add(1, 0, -v / (2.0 * dx));
                add(-1, 0, v / (2.0 * dx));
                add(0, 1, a * x / (2.0 * dv));
                add(0, -1, -a * x / (2.0 * dv));
            }
        }
        let wk = weight[k];
        let mut row = Vec::with_capacity(5);
        for (di, line) in c.iter().enumerate() {
            for (dj, &val) in line.iter().enumerate() {
                if val == 0.0 {
                    continue;
                }
                let ii = i as isize + di as isize - 1;
                let jj = j as isize + dj as isize - 1;
                if ii < 0 || jj < 0 || ii >= nx as isize || jj >= nv as isize {
                    continue;
                }
                let (ii, jj) = (ii as usize, jj as usize);
                if let Some(q) = index[ii * nv + jj] {
                    row.push((q, val * weight[q] / wk));
                }
            }
        }
        row.sort_by_key(|e| e.0);
        row
    });
    Ok(LinearOperatorAssembly {
        p: p.clone(),
        domain,
        nx,
        nv,
        dx,
        dv,
        stencil,
        cells,
        index,
        weight,
        matrix: Csr::from_rows(rows),
    })
}

/// The four explicit eigenmodes of `𝓛`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `h₀ = g⋆^{2−m}`, eigenvalue 0.
    Kernel,
    /// `h₁`, from the scale invariance, eigenvalue `−(1−A)`.
    Scaling,
    /// `h₂ = (v − x) h₀`, eigenvalue `−A`.
    Shift,
    /// `h₃ = (v − A x) h₀`, eigenvalue `−1`.
    Boost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMode {
    pub mode: Mode,
    /// Eigenvalue of `𝓛` (not of `−𝓛`).
    pub lambda: f64,
    pub parity: Parity,
    p: ModelParams,
}

impl AnalyticMode {
    pub fn label(&self) -> &'static str {
        match self.mode {
            Mode::Kernel => "h0",
            Mode::Scaling => "h1",
            Mode::Shift => "h2",
            Mode::Boost => "h3",
        }
    }

    pub fn eval(&self, x: f64, v: f64) -> f64 {
        let p = &self.p;
        let h0 = g_star(p, x, v).powf(2.0 - p.m);
        match self.mode {
            Mode::Kernel => h0,
            Mode::Scaling => {
                let (a, b) = (p.a, p.b());
                let c = 1.0 / (p.d as f64 * (1.0 - p.m));
                let q = p.gamma_star
                    + (b - a * c) * v * v
                    + (1.0 - a) * c * x * v
                    + a * (b - c) * x * x;
                b / p.m * q * h0
            }
            Mode::Shift => (v - x) * h0,
            Mode::Boost => (v - p.a * x) * h0,
        }
    }
}

/// `(λ, h)` for the kernel, the scaling mode and the two translation modes.
pub fn analytic_eigenpairs(p: &ModelParams) -> Result<Vec<AnalyticMode>> {
    check_setting(p)?;
    let mk = |mode, lambda, parity| AnalyticMode {
        mode,
        lambda,
        parity,
        p: p.clone(),
    };
    Ok(vec![
        mk(Mode::Kernel, 0.0, Parity::Even),
        mk(Mode::Scaling, -(1.0 - p.a), Parity::Even),
        mk(Mode::Shift, -p.a, Parity::Odd),
        mk(Mode::Boost, -1.0, Parity::Odd),
    ])
}

/// `𝓛h(x, v)` by centred differences of step `delta` applied to `h`.
pub fn apply_continuous<H: Fn(f64, f64) -> f64>(p: &ModelParams, h: &H, x: f64, v: f64, delta: f64) -> f64 {
    let m = p.m;
    let q = |v: f64| g_star(p, x, v).powf(m - 1.0) * h(x, v);
    let diff = m * (q(v + delta) - 2.0 * q(v) + q(v - delta)) / (delta * delta);
    let drift = (1.0 + p.a)
        * ((v + delta) * h(x, v + delta) - (v - delta) * h(x, v - delta))
        / (2.0 * delta);
    let hx = (h(x + delta, v) - h(x - delta, v)) / (2.0 * delta);
    let hv = (h(x, v + delta) - h(x, v - delta)) / (2.0 * delta);
    diff + drift - v * hx + p.a * x * hv
}

/// Both sides of `2⟨𝓛h, h⟩ = −2m ∫∫ g⋆ |∇v(g⋆^{m−2} h)|²` in the weight
/// `g⋆^{m−2}`, each by midpoint quadrature over `grid` with derivatives of
/// `h` taken by centred differences.
pub fn dissipation_check<H: Fn(f64, f64) -> f64 + Sync>(
    p: &ModelParams,
    h: H,
    grid: &PhaseGrid,
    exec: Exec,
) -> Result<(f64, f64)> {
    check_setting(p)?;
    if grid.d != 1 {
        return Err(Error::Value("dissipation check needs a d = 1 grid".into()));
    }
    let m = p.m;
    let delta = 1e-3;
    let sums = exec.map(grid.nx, |i| {
        let x = grid.x_node(i);
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for j in 0..grid.nv {
            let v = grid.v_node(j);
            let gs = g_star(p, x, v);
            let hv = h(x, v);
            lhs += 2.0 * apply_continuous(p, &h, x, v, delta) * hv * gs.powf(m - 2.0);
            let u = |v: f64| g_star(p, x, v).powf(m - 2.0) * h(x, v);
            let du = (u(v + delta) - u(v - delta)) / (2.0 * delta);
            rhs -= 2.0 * m * gs * du * du;
        }
        (lhs, rhs)
    });
    let vol = grid.cell_volume();
    let (l, r) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    Ok((l * vol, r * vol))
}
