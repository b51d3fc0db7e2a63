//! Eigenvalues of the assembled operator.
//!
//! The operator commutes with `(x, v) ↦ (−x, −v)`, so it is first split into
//! its even and odd blocks. Each block is solved densely (Hessenberg + shifted
//! QR) or by shift-invert Arnoldi on a sparse LU; every reported eigenvalue is
//! then polished by inverse iteration, which also yields its residual.

use faer::Mat;
use num_complex::Complex64;

use super::sparse::{ComplexSolver, Csr, RealSolver};
use super::{analytic_eigenpairs, Domain, LinearOperatorAssembly};
use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn name(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Dense up to [`DENSE_LIMIT`] unknowns, Arnoldi above.
    Auto,
    Dense,
    Arnoldi,
}

/// Interior share above which an eigenvector counts as a bulk mode.
pub const INTERIOR_SHARE: f64 = 0.5;

/// Largest dimension handed to the dense backend by [`Backend::Auto`].
pub const DENSE_LIMIT: usize = 6000;

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Auto => "auto",
            Backend::Dense => "dense",
            Backend::Arnoldi => "arnoldi",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Backend::Auto),
            "dense" => Some(Backend::Dense),
            "arnoldi" => Some(Backend::Arnoldi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub backend: Backend,
    pub count: usize,
    /// Arnoldi shift; retried at `1e-3` when it is an eigenvalue.
    pub shift: f64,
    /// Initial Krylov dimension (0: from `count`); grows by half on each restart.
    pub krylov: usize,
    /// Relative Ritz residual at which Arnoldi stops.
    pub tol: f64,
    pub max_restarts: usize,
    /// Window, as a fraction of the half-widths, for analytic-mode residuals.
    pub window: f64,
    pub exec: Exec,
}

impl EigenOptions {
    pub fn new(count: usize) -> Self {
        Self {
            backend: Backend::Auto,
            count,
            shift: 0.0,
            krylov: 0,
            tol: 1e-10,
            max_restarts: 8,
            window: 0.5,
            exec: Exec::default(),
        }
    }
}

/// Discrete check of one analytic eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticCheck {
    pub label: &'static str,
    pub lambda: f64,
    /// Computed eigenvalue closest to `lambda`.
    pub nearest: Option<Complex64>,
    pub distance: f64,
    /// Windowed `‖L P(h) − λ P(h)‖ / ‖P(h)‖` of the sampled mode.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub domain: Domain,
    pub nx: usize,
    pub nv: usize,
    pub active: usize,
    /// Backend actually used.
    pub backend: Backend,
    /// Arnoldi shift actually used (0 for dense).
    pub shift: f64,
    pub count: usize,
    /// Sorted by descending real part.
    pub eigenvalues: Vec<Complex64>,
    /// `‖Lu − λu‖ / ‖u‖` of the polished eigenvector.
    pub residuals: Vec<f64>,
    /// Share of `‖u‖²` inside the interior window; modes trapped at the
    /// truncation boundary have almost none.
    pub interior: Vec<f64>,
    pub parities: Vec<Parity>,
    pub analytic: Vec<AnalyticCheck>,
}

impl SpectrumResult {
    /// The computed approximation of the kernel: the eigenvalue of least modulus.
    pub fn kernel(&self) -> Option<Complex64> {
        self.eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| a.norm().total_cmp(&b.norm()))
    }

    /// Eigenvalue of largest real part once the kernel approximation is removed.
    pub fn leading_nonzero(&self) -> Option<Complex64> {
        let k = self.kernel()?;
        let mut skipped = false;
        self.eigenvalues.iter().copied().find(|z| {
            if !skipped && *z == k {
                skipped = true;
                false
            } else {
                true
            }
        })
    }

    /// Largest real part among interior modes (share at least
    /// [`INTERIOR_SHARE`]) once the kernel approximation is removed.
    pub fn leading_interior(&self) -> Option<Complex64> {
        let k = self.kernel()?;
        self.eigenvalues
            .iter()
            .zip(&self.interior)
            .find(|(z, s)| **z != k && **s >= INTERIOR_SHARE)
            .map(|(z, _)| *z)
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn nearest(&self, target: f64) -> Option<(Complex64, f64)> {
        self.eigenvalues
            .iter()
            .map(|z| (*z, (*z - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// One parity block: the operator restricted to symmetric or antisymmetric vectors.
#[derive(Debug, Clone)]
pub struct Block {
    pub parity: Parity,
    /// Active index and mirror image (none on the symmetry centre) of each basis vector.
    pub basis: Vec<(usize, Option<usize>)>,
    pub matrix: Csr,
}

/// Splits the operator into its even and odd blocks (odd may be empty).
pub fn parity_blocks(asm: &LinearOperatorAssembly, exec: Exec) -> Vec<Block> {
    let n = asm.len();
    let mut pairs = Vec::new();
    let mut singles = Vec::new();
    for k in 0..n {
        let q = asm.mirror(k);
        if k < q {
            pairs.push((k, Some(q)));
        } else if k == q {
            singles.push((k, None));
        }
    }
    [Parity::Even, Parity::Odd]
        .into_iter()
        .filter_map(|parity| {
            let mut basis = pairs.clone();
            if parity == Parity::Even {
                basis.extend(singles.iter().copied());
            }
            if basis.is_empty() {
                return None;
            }
            // position and sign of every active index within this basis
            let mut slot = vec![(usize::MAX, 0.0); n];
            for (b, &(k, q)) in basis.iter().enumerate() {
                match q {
                    Some(q) => {
                        let s = std::f64::consts::FRAC_1_SQRT_2;
                        slot[k] = (b, s);
                        slot[q] = (b, if parity == Parity::Even { s } else { -s });
                    }
                    None => slot[k] = (b, 1.0),
                }
            }
            let rows = exec.map(basis.len(), |a| {
                let (k, q) = basis[a];
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(10);
                for r in std::iter::once(k).chain(q) {
                    let sr = slot[r].1;
                    for (c, val) in asm.matrix.row(r) {
                        let (b, sc) = slot[c];
                        if b != usize::MAX {
                            row.push((b, sr * sc * val));
                        }
                    }
                }
                row.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
                for (c, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged
            });
            Some(Block {
                parity,
                basis,
                matrix: Csr::from_rows(rows),
            })
        })
        .collect()
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic start vector with no symmetry.
fn start_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 1.0 + 0.5 * (0.7 * i as f64).sin() + 0.25 * (1.3 * i as f64 + 0.4).cos())
        .collect()
}

/// Inverse iteration near `lambda`; returns the better of `lambda` and the
/// Rayleigh quotient, its residual and the unit eigenvector.
///
/// Iterates until the residual reaches `1e-13 ‖A‖∞`, which clustered,
/// nearly defective eigenvalues need more than a couple of sweeps for.
fn polish(a: &Csr, lambda: Complex64) -> Result<(Complex64, f64, Vec<Complex64>)> {
    let scale = 1.0 + lambda.norm();
    let shift = lambda + Complex64::new(1e-10, 1e-10) * scale;
    let solver = ComplexSolver::new(a, shift)?;
    let target = 1e-13 * a.norm_inf().max(1.0);
    let mut u: Vec<Complex64> = start_vector(a.n).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let evaluate = |u: &[Complex64]| {
        let au = a.mul_complex(u);
        let rq = au.iter().zip(u).map(|(p, q)| q.conj() * p).sum::<Complex64>();
        let residual = |z: Complex64| {
            au.iter().zip(u).map(|(p, q)| (p - z * q).norm_sqr()).sum::<f64>().sqrt()
        };
        let (r0, r1) = (residual(lambda), residual(rq));
        if r1 < r0 {
            (rq, r1)
        } else {
            (lambda, r0)
        }
    };
    let mut best = (lambda, f64::INFINITY, u.clone());
    for _ in 0..40 {
        let next = solver.solve(&u);
        let nn = norm(&next);
        if !(nn.is_finite() && nn > 0.0) {
            break;
        }
        u = next.into_iter().map(|z| z / nn).collect();
        let (z, r) = evaluate(&u);
        if r < best.1 {
            best = (z, r, u.clone());
        }
        if r <= target {
            break;
        }
    }
    Ok(best)
}

/// Eigenvalues of `(A − σ)⁻¹` of largest modulus, returned as eigenvalues of `A`.
fn arnoldi(a: &Csr, want: usize, shift: f64, opts: &EigenOptions) -> Result<Vec<Complex64>> {
    let n = a.n;
    let solver = RealSolver::new(a, shift)?;
    let want = want.min(n);
    let mut k = if opts.krylov > 0 { opts.krylov } else { (3 * want).max(want + 40) }.min(n);
    let mut start = start_vector(n);
    for restart in 0..opts.max_restarts.max(1) {
        let s0 = start.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut basis = vec![start.iter().map(|v| v / s0).collect::<Vec<f64>>()];
        let mut h = Mat::<f64>::zeros(k + 1, k);
        let mut kk = k;
        for j in 0..k {
            let mut w = solver.solve(&basis[j])?;
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c: f64 = b.iter().zip(&w).map(|(p, q)| p * q).sum();
                    h[(i, j)] += c;
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            h[(j + 1, j)] = nw;
            if nw <= 1e-13 * h[(j, j)].abs().max(1.0) {
                // invariant subspace
                kk = j + 1;
                break;
            }
            if j + 1 < k {
                basis.push(w.iter().map(|v| v / nw).collect());
            }
        }
        let hk = Mat::from_fn(kk, kk, |i, j| h[(i, j)]);
        let evd = hk
            .eigen()
            .map_err(|e| Error::Convergence(format!("Hessenberg eigenproblem: {e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let mut order: Vec<usize> = (0..kk).collect();
        order.sort_by(|&p, &q| s[q].norm().total_cmp(&s[p].norm()));
        order.truncate(want);
        let beta = h[(kk, kk - 1)];
        let mut converged = true;
        let mut next = vec![0.0; n];
        for &c in &order {
            let y: Vec<Complex64> = (0..kk).map(|i| u[(i, c)]).collect();
            let ny = norm(&y);
            let est = beta * y[kk - 1].norm() / (ny * s[c].norm());
            if !(est <= opts.tol) {
                converged = false;
            }
            for (i, b) in basis.iter().take(kk).enumerate() {
                let coef = (y[i].re + y[i].im) / ny;
                next.iter_mut().zip(b).for_each(|(x, v)| *x += coef * v);
            }
        }
        if converged {
            return Ok(order.iter().map(|&c| shift + 1.0 / s[c]).collect());
        }
        if restart + 1 == opts.max_restarts.max(1) {
            break;
        }
        // restart from the wanted Ritz vectors in a larger space
        start = next;
        k = (k + k / 2).min(n);
    }
    Err(Error::Convergence(format!(
        "Arnoldi did not reach {:e} in {} restarts",
        opts.tol, opts.max_restarts
    )))
}

fn block_candidates(block: &Block, opts: &EigenOptions, backend: Backend, shift: f64) -> Result<Vec<Complex64>> {
    match backend {
        Backend::Arnoldi => arnoldi(&block.matrix, opts.count, shift, opts),
        _ => block
            .matrix
            .to_dense()
            .eigenvalues()
            .map_err(|e| Error::Convergence(format!("dense eigenvalues: {e:?}"))),
    }
}

/// The `count` eigenvalues of largest real part (dense), or the `count`
/// closest to the shift per parity block, sorted by real part (Arnoldi).
pub fn eigensolve(asm: &LinearOperatorAssembly, opts: &EigenOptions) -> Result<SpectrumResult> {
    if opts.count == 0 {
        return Err(Error::Value("count must be at least 1".into()));
    }
    let backend = match opts.backend {
        Backend::Auto if asm.len() <= DENSE_LIMIT => Backend::Dense,
        Backend::Auto => Backend::Arnoldi,
        b => b,
    };
    let blocks = parity_blocks(asm, opts.exec);
    let mut shift = if backend == Backend::Arnoldi { opts.shift } else { 0.0 };
    let solve_all = |shift: f64| -> Result<Vec<(Complex64, usize)>> {
        let found = opts.exec.map(blocks.len(), |b| block_candidates(&blocks[b], opts, backend, shift));
        let mut all = Vec::new();
        for (b, r) in found.into_iter().enumerate() {
            all.extend(r?.into_iter().map(|z| (z, b)));
        }
        Ok(all)
    };
    let mut all = match solve_all(shift) {
        Err(Error::SingularShift(_)) if backend == Backend::Arnoldi => {
            shift = 1e-3;
            solve_all(shift)?
        }
        r => r?,
    };
    all.sort_by(|p, q| q.0.re.total_cmp(&p.0.re).then(q.0.im.total_cmp(&p.0.im)));
    all.truncate(opts.count);
    let polished = opts.exec.map(all.len(), |i| polish(&blocks[all[i].1].matrix, all[i].0));
    let mut eigenvalues = Vec::with_capacity(all.len());
    let mut residuals = Vec::with_capacity(all.len());
    let mut interior = Vec::with_capacity(all.len());
    let mut parities = Vec::with_capacity(all.len());
    for ((z, b), r) in all.iter().zip(polished) {
        let (_, res, u) = r?;
        let block = &blocks[*b];
        let (mut inside, mut total) = (0.0, 0.0);
        for (&(k, q), c) in block.basis.iter().zip(&u) {
            // both members of a pair carry half of |c|²
            let share = if q.is_some() { 0.5 } else { 1.0 } * c.norm_sqr();
            for cell in std::iter::once(k).chain(q) {
                total += share;
                if asm.in_window(cell, opts.window) {
                    inside += share;
                }
            }
        }
        eigenvalues.push(*z);
        residuals.push(res);
        interior.push(inside / total);
        parities.push(block.parity);
    }
    let mut result = SpectrumResult {
        domain: asm.domain,
        nx: asm.nx,
        nv: asm.nv,
        active: asm.len(),
        backend,
        shift,
        count: opts.count,
        eigenvalues,
        residuals,
        interior,
        parities,
        analytic: Vec::new(),
    };
    result.analytic = analytic_eigenpairs(&asm.p)?
        .iter()
        .map(|mode| {
            let f = asm.sample(|x, v| mode.eval(x, v));
            let near = result.nearest(mode.lambda);
            AnalyticCheck {
                label: mode.label(),
                lambda: mode.lambda,
                nearest: near.map(|n| n.0),
                distance: near.map_or(f64::INFINITY, |n| n.1),
                residual: asm.windowed_residual(&f, mode.lambda, opts.window),
            }
        })
        .collect();
    Ok(result)
}
