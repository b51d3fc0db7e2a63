//! Phase-space grids, discrete distributions and their functionals.

mod diagnostics;
mod grid;

pub use diagnostics::{
    interpolation_constant, interpolation_slack, phi, psi, DiagnosticsReport, Reference,
    REPORT_HEADER,
};
pub use grid::PhaseGrid;

use crate::error::{Error, Result};
use crate::par::Exec;

/// Which variables a field lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// `f(t, x, v)`.
    Original,
    /// `g(τ, x, v)` in self-similar variables.
    SelfSimilar,
    /// `G`, self-similar with `x` and `v` stretched so transport is a rotation.
    Rotating,
    /// Signed perturbation of the linearized problem.
    Linearized,
}

impl Frame {
    pub fn tag(self) -> &'static str {
        match self {
            Frame::Original => "f",
            Frame::SelfSimilar => "g",
            Frame::Rotating => "G",
            Frame::Linearized => "h",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Some(match s {
            "f" => Frame::Original,
            "g" => Frame::SelfSimilar,
            "G" => Frame::Rotating,
            "h" => Frame::Linearized,
            _ => return None,
        })
    }
}

/// Cell averages of a distribution on a [`PhaseGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    pub frame: Frame,
}

impl Field {
    pub fn new(grid: PhaseGrid, values: Vec<f64>, frame: Frame) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Value(format!(
                "field has {} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell });
        }
        if frame != Frame::Linearized {
            if let Some(i) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::Value(format!(
                    "distribution is negative at cell {i}: {}",
                    values[i]
                )));
            }
        }
        Ok(Self { grid, values, frame })
    }

    pub fn sample<F>(grid: &PhaseGrid, frame: Frame, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
    {
        let values = grid.sample(Exec::default(), f);
        Self {
            grid: grid.clone(),
            values,
            frame,
        }
    }

    pub fn zeros(grid: &PhaseGrid, frame: Frame) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            frame,
        }
    }

    /// v-block of x-cell `ix`.
    pub fn block(&self, ix: usize) -> &[f64] {
        let n = self.grid.v_cells();
        &self.values[ix * n..(ix + 1) * n]
    }

    fn block_sums<F: Fn(usize, usize, f64) -> f64>(&self, f: F) -> f64 {
        // per-x partial sums reduced in index order: deterministic
        let mut total = 0.0;
        for ix in 0..self.grid.x_cells() {
            let mut s = 0.0;
            for (iv, &g) in self.block(ix).iter().enumerate() {
                s += f(ix, iv, g);
            }
            total += s;
        }
        total
    }

    /// `∫∫ g` by the midpoint rule.
    pub fn mass(&self) -> f64 {
        self.block_sums(|_, _, g| g) * self.grid.cell_volume()
    }

    /// `ρ(x) = ∫ g dv` per x-cell.
    pub fn spatial_density(&self) -> Vec<f64> {
        let w = self.grid.v_volume();
        (0..self.grid.x_cells())
            .map(|ix| self.block(ix).iter().sum::<f64>() * w)
            .collect()
    }

    /// `(∫∫ |x|² g, ∫∫ |v|² g)` at cell centres.
    pub fn second_moments(&self) -> (f64, f64) {
        let vol = self.grid.cell_volume();
        let x2 = self.block_sums(|ix, _, g| self.grid.x_norm2(ix) * g) * vol;
        let v2 = self.block_sums(|_, iv, g| self.grid.v_norm2(iv) * g) * vol;
        (x2, v2)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `‖self − other‖_p` with the cell volume as weight.
    pub fn lp_distance(&self, other: &Field, p: f64) -> f64 {
        assert!(self.grid.same_shape(&other.grid));
        let vol = self.grid.cell_volume();
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum();
        (s * vol).powf(1.0 / p)
    }

    pub fn l1_distance(&self, other: &Field) -> f64 {
        assert!(self.grid.same_shape(&other.grid));
        let vol = self.grid.cell_volume();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * vol
    }

    /// `∫∫ (other − self)₊`.
    pub fn positive_excess(&self, other: &Field) -> f64 {
        let vol = self.grid.cell_volume();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (b - a).max(0.0))
            .sum::<f64>()
            * vol
    }

    /// Copy reflected in v, `g(x, −v)`.
    pub fn reflect_v(&self) -> Field {
        let mut out = self.clone();
        for i in 0..self.values.len() {
            out.values[self.grid.mirror_v(i)] = self.values[i];
        }
        out
    }

    /// Copy reflected through the origin, `g(−x, −v)`.
    pub fn reflect(&self) -> Field {
        let mut out = self.clone();
        for i in 0..self.values.len() {
            out.values[self.grid.mirror(i)] = self.values[i];
        }
        out
    }
}
