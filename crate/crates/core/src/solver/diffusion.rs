//! Nonlinear Fokker–Planck step in v:
//!
//! ```text
//! ∂t G = rate · ∇v·(G ∇v Ψ),   Ψ = m/(m−1) G^{m−1} + κ|v|²/2
//! ```
//!
//! which is `rate (Δv G^m + κ ∇v·(vG))`. Fluxes are upwinded in `G` along
//! the sign of the discrete `ΔΨ`, so sampled stationary profiles (constant
//! `Ψ` along v) are fixed points of the discrete scheme, positivity holds
//! under the step restriction below, and mass telescopes exactly.

use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpCoefficients {
    pub m: f64,
    pub rate: f64,
    pub kappa: f64,
}

/// Geometry of one v-block: `d` axes of `nv` cells, spacing `dv`, half-width `lv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VBlock {
    pub d: usize,
    pub nv: usize,
    pub dv: f64,
    pub lv: f64,
}

impl VBlock {
    pub fn len(&self) -> usize {
        self.nv.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn node(&self, j: usize) -> f64 {
        -self.lv + (j as f64 + 0.5) * self.dv
    }

    fn v2(&self, iv: usize) -> f64 {
        let mut r = iv;
        let mut s = 0.0;
        for _ in 0..self.d {
            let v = self.node(r % self.nv);
            s += v * v;
            r /= self.nv;
        }
        s
    }
}

/// Lower cap on `G` inside the pressure, keeping `G^{m−1}` bounded for `m < 1`.
#[derive(Debug, Clone, Copy)]
pub enum Floor<'a> {
    None,
    Constant(f64),
    /// One value per cell of the block.
    Cells(&'a [f64]),
}

impl Floor<'_> {
    fn at(&self, i: usize) -> f64 {
        match self {
            Floor::None => 0.0,
            Floor::Constant(c) => *c,
            Floor::Cells(s) => s[i],
        }
    }
}

/// Work arrays reused across substeps.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    psi: Vec<f64>,
    dpsi: Vec<f64>,
    delta: Vec<f64>,
    /// Mass removed by clipping at zero (round-off level under the step bound).
    pub clipped: f64,
}

/// Advances all `members` (blocks of the same x-cell from different fields)
/// by `dt` with a common substep sequence; returns the number of substeps.
///
/// Sharing the sequence keeps the discrete scheme order preserving across
/// members, which is what comparison checks need.
pub fn advance_blocks(
    members: &mut [&mut [f64]],
    geom: VBlock,
    coeffs: FpCoefficients,
    floor: Floor<'_>,
    dt: f64,
    cfl: f64,
    max_substeps: usize,
    scratch: &mut Scratch,
) -> Result<usize> {
    let n = geom.len();
    let stride: Vec<usize> = (0..geom.d).map(|a| geom.nv.pow((geom.d - 1 - a) as u32)).collect();
    let v2: Vec<f64> = (0..n).map(|iv| geom.v2(iv)).collect();
    let idx = |iv: usize, a: usize| (iv / stride[a]) % geom.nv;
    scratch.psi.resize(members.len() * n, 0.0);
    scratch.dpsi.resize(members.len() * n, 0.0);
    scratch.delta.resize(n, 0.0);
    let m = coeffs.m;
    let pf = m / (m - 1.0);
    let h2 = geom.dv * geom.dv;

    let mut remaining = dt;
    let mut steps = 0;
    while remaining > 0.0 {
        // pressures and the largest admissible substep over all members
        let mut worst: f64 = 0.0;
        for (k, g) in members.iter().enumerate() {
            let psi = &mut scratch.psi[k * n..(k + 1) * n];
            let dpsi = &mut scratch.dpsi[k * n..(k + 1) * n];
            for i in 0..n {
                let gi = g[i];
                let fl = floor.at(i);
                let ge = gi.max(fl);
                if ge > 0.0 {
                    let p = ge.powf(m - 1.0);
                    psi[i] = pf * p + 0.5 * coeffs.kappa * v2[i];
                    dpsi[i] = if gi > fl { m * p / ge } else { 0.0 };
                } else {
                    psi[i] = 0.5 * coeffs.kappa * v2[i];
                    dpsi[i] = 0.0;
                }
            }
            for i in 0..n {
                let mut s = 0.0;
                for a in 0..geom.d {
                    let j = idx(i, a);
                    for nb in [
                        (j > 0).then(|| i - stride[a]),
                        (j + 1 < geom.nv).then(|| i + stride[a]),
                    ]
                    .into_iter()
                    .flatten()
                    {
                        s += (psi[i] - psi[nb]).max(0.0);
                        if m < 1.0 {
                            // ∂/∂G_i of the upwind flux, order preservation
                            s += g[i].max(g[nb]) * dpsi[i];
                        } else {
                            s += 2.0 * m * g[i].max(g[nb]).powf(m - 1.0);
                        }
                    }
                }
                worst = worst.max(s);
            }
        }
        let limit = if worst > 0.0 {
            cfl * h2 / (coeffs.rate * worst)
        } else {
            f64::INFINITY
        };
        let mut sub = remaining.min(limit);
        if sub < remaining && remaining - sub < 1e-3 * sub {
            // avoid a sliver step at the end
            sub = 0.5 * remaining;
        }
        if !(sub > 0.0) || !sub.is_finite() {
            return Err(Error::NonFinite { cell: 0 });
        }
        steps += 1;
        if steps > max_substeps {
            let needed = (dt / limit).ceil();
            return Err(Error::Cfl {
                needed: if needed.is_finite() { needed as usize } else { usize::MAX },
                cap: max_substeps,
            });
        }
        let factor = sub * coeffs.rate / h2;
        for (k, g) in members.iter_mut().enumerate() {
            let psi = &scratch.psi[k * n..(k + 1) * n];
            let delta = &mut scratch.delta;
            delta.iter_mut().for_each(|x| *x = 0.0);
            for a in 0..geom.d {
                let s = stride[a];
                for i in 0..n {
                    if idx(i, a) + 1 >= geom.nv {
                        continue;
                    }
                    let r = i + s;
                    let dp = psi[r] - psi[i];
                    // flow from high Ψ to low Ψ, carried by the upwind value
                    let flux = if dp > 0.0 { g[r] * dp } else { g[i] * dp };
                    delta[i] += flux;
                    delta[r] -= flux;
                }
            }
            for i in 0..n {
                let next = g[i] + factor * delta[i];
                if next < 0.0 {
                    scratch.clipped -= next;
                    g[i] = 0.0;
                } else {
                    g[i] = next;
                }
            }
        }
        remaining -= sub;
    }
    Ok(steps)
}

/// Advances every x-block of each field in `fields` (all the same shape,
/// x-major with `geom.len()` values per block) by `dt`.
///
/// Blocks are independent, so they run in parallel under `exec`, each with
/// its own substep sequence shared by all fields.
#[allow(clippy::too_many_arguments)]
pub fn step_diffusion_fields(
    fields: &mut [&mut [f64]],
    geom: VBlock,
    coeffs: FpCoefficients,
    floor: Option<&[f64]>,
    floor_constant: f64,
    dt: f64,
    cfl: f64,
    max_substeps: usize,
    exec: Exec,
) -> Result<DiffusionStats> {
    let nb = geom.len();
    let nx = fields[0].len() / nb;
    let mut per_x: Vec<Vec<&mut [f64]>> = (0..nx).map(|_| Vec::with_capacity(fields.len())).collect();
    for f in fields.iter_mut() {
        for (ix, c) in f.chunks_mut(nb).enumerate() {
            per_x[ix].push(c);
        }
    }
    let results = exec.map_mut(&mut per_x, |ix, members| {
        let fl = match floor {
            Some(cells) => Floor::Cells(&cells[ix * nb..(ix + 1) * nb]),
            None if floor_constant > 0.0 => Floor::Constant(floor_constant),
            None => Floor::None,
        };
        let mut scratch = Scratch::default();
        advance_blocks(members, geom, coeffs, fl, dt, cfl, max_substeps, &mut scratch)
            .map(|n| (n, scratch.clipped))
    });
    let mut stats = DiffusionStats::default();
    for r in results {
        let (n, c) = r?;
        stats.max_substeps = stats.max_substeps.max(n);
        stats.clipped += c;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiffusionStats {
    /// Largest substep count over the x-blocks.
    pub max_substeps: usize,
    /// Clipped mass, in units of values (multiply by the cell volume).
    pub clipped: f64,
}
