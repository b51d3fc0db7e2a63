//! Compressed-row storage and shifted sparse LU factorizations.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// From per-row `(column, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for r in rows {
            for (c, v) in r {
                col.push(c);
                val.push(v);
            }
            ptr.push(col.len());
        }
        Self { n, ptr, col, val }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.ptr[i]..self.ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn mul_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(c, v)| x[c] * v).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn shifted<T, F>(&self, shift: T, conv: F) -> Result<SparseColMat<usize, T>>
    where
        T: faer::traits::ComplexField + Copy + std::ops::Sub<Output = T>,
        F: Fn(f64) -> T,
    {
        let mut trips = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            let mut diag = false;
            for (c, v) in self.row(i) {
                if c == i {
                    trips.push(Triplet::new(i, c, conv(v) - shift));
                    diag = true;
                } else {
                    trips.push(Triplet::new(i, c, conv(v)));
                }
            }
            if !diag {
                trips.push(Triplet::new(i, i, conv(0.0) - shift));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trips)
            .map_err(|e| Error::Inversion(format!("sparse assembly: {e:?}")))
    }
}

/// `(A − σ)⁻¹` for a real shift.
pub struct RealSolver {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    shift: f64,
}

impl RealSolver {
    pub fn new(a: &Csr, shift: f64) -> Result<Self> {
        let lu = a
            .shifted(shift, |v| v)?
            .sp_lu()
            .map_err(|_| Error::SingularShift(shift))?;
        Ok(Self { lu, shift })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut rhs);
        let x: Vec<f64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::SingularShift(self.shift))
        }
    }
}

/// `(A − σ)⁻¹` for a complex shift.
pub struct ComplexSolver {
    lu: faer::sparse::linalg::solvers::Lu<usize, Complex64>,
}

impl ComplexSolver {
    pub fn new(a: &Csr, shift: Complex64) -> Result<Self> {
        let lu = a
            .shifted(shift, |v| Complex64::new(v, 0.0))?
            .sp_lu()
            .map_err(|_| Error::SingularShift(shift.re))?;
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut rhs);
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }
}
