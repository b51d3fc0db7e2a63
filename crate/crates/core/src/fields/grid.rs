use crate::error::{Error, Result};
use crate::par::Exec;

/// Uniform cell-centred grid on `[−Lx, Lx]^d × [−Lv, Lv]^d`.
///
/// Storage is row-major over `(x₁, …, x_d, v₁, …, v_d)` with the last axis
/// fastest, so every x-cell owns one contiguous block of `Nv^d` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub d: usize,
    pub nx: usize,
    pub nv: usize,
    pub lx: f64,
    pub lv: f64,
    pub dx: f64,
    pub dv: f64,
}

impl PhaseGrid {
    pub fn new(d: usize, nx: usize, nv: usize, lx: f64, lv: f64) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Value(format!("phase grids support d = 1 or 2, got {d}")));
        }
        if nx < 2 || nv < 2 {
            return Err(Error::Value(format!("need at least 2 cells per axis, got {nx}x{nv}")));
        }
        if !(lx > 0.0 && lv > 0.0 && lx.is_finite() && lv.is_finite()) {
            return Err(Error::Value(format!("extents must be positive, got {lx}, {lv}")));
        }
        Ok(Self {
            d,
            nx,
            nv,
            lx,
            lv,
            dx: 2.0 * lx / nx as f64,
            dv: 2.0 * lv / nv as f64,
        })
    }

    /// Number of x-cells, `Nx^d`.
    pub fn x_cells(&self) -> usize {
        self.nx.pow(self.d as u32)
    }

    /// Number of v-cells per x-cell, `Nv^d`.
    pub fn v_cells(&self) -> usize {
        self.nv.pow(self.d as u32)
    }

    pub fn len(&self) -> usize {
        self.x_cells() * self.v_cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_volume(&self) -> f64 {
        self.dx.powi(self.d as i32)
    }

    pub fn v_volume(&self) -> f64 {
        self.dv.powi(self.d as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.x_volume() * self.v_volume()
    }

    pub fn x_node(&self, i: usize) -> f64 {
        -self.lx + (i as f64 + 0.5) * self.dx
    }

    pub fn v_node(&self, j: usize) -> f64 {
        -self.lv + (j as f64 + 0.5) * self.dv
    }

    /// Per-axis indices of x-cell `ix` (first axis slowest).
    pub fn x_index(&self, ix: usize) -> [usize; 2] {
        if self.d == 1 {
            [ix, 0]
        } else {
            [ix / self.nx, ix % self.nx]
        }
    }

    pub fn v_index(&self, iv: usize) -> [usize; 2] {
        if self.d == 1 {
            [iv, 0]
        } else {
            [iv / self.nv, iv % self.nv]
        }
    }

    /// Writes the centre of x-cell `ix` into `out[..d]`.
    pub fn x_center(&self, ix: usize, out: &mut [f64]) {
        let idx = self.x_index(ix);
        for a in 0..self.d {
            out[a] = self.x_node(idx[a]);
        }
    }

    pub fn v_center(&self, iv: usize, out: &mut [f64]) {
        let idx = self.v_index(iv);
        for a in 0..self.d {
            out[a] = self.v_node(idx[a]);
        }
    }

    /// `|x|²` at x-cell `ix`.
    pub fn x_norm2(&self, ix: usize) -> f64 {
        let idx = self.x_index(ix);
        (0..self.d).map(|a| self.x_node(idx[a]).powi(2)).sum()
    }

    pub fn v_norm2(&self, iv: usize) -> f64 {
        let idx = self.v_index(iv);
        (0..self.d).map(|a| self.v_node(idx[a]).powi(2)).sum()
    }

    /// Cell average of `|v|²` for a piecewise-constant field: `|v_c|² + dΔv²/12`.
    pub fn v_norm2_cell(&self, iv: usize) -> f64 {
        self.v_norm2(iv) + self.d as f64 * self.dv * self.dv / 12.0
    }

    /// Samples `f(x, v)` at cell centres.
    pub fn sample<F>(&self, exec: Exec, f: F) -> Vec<f64>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
    {
        let mut out = vec![0.0; self.len()];
        let nvc = self.v_cells();
        exec.for_each_chunk(&mut out, nvc, |ix, block| {
            let mut x = [0.0; 2];
            let mut v = [0.0; 2];
            self.x_center(ix, &mut x);
            for (iv, slot) in block.iter_mut().enumerate() {
                self.v_center(iv, &mut v);
                *slot = f(&x[..self.d], &v[..self.d]);
            }
        });
        out
    }

    /// Index of the cell mirrored through the origin, `(x, v) ↦ (−x, −v)`.
    pub fn mirror(&self, idx: usize) -> usize {
        let nvc = self.v_cells();
        let (ix, iv) = (idx / nvc, idx % nvc);
        (self.x_cells() - 1 - ix) * nvc + (nvc - 1 - iv)
    }

    /// Index of the cell mirrored in v only.
    pub fn mirror_v(&self, idx: usize) -> usize {
        let nvc = self.v_cells();
        let (ix, iv) = (idx / nvc, idx % nvc);
        ix * nvc + (nvc - 1 - iv)
    }

    pub fn same_shape(&self, other: &PhaseGrid) -> bool {
        self.d == other.d && self.nx == other.nx && self.nv == other.nv
    }
}
