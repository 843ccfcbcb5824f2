//! Dense operators on an [`IndexWindow`]: norms, the contraction `R = Id − AA*/‖A‖²`,
//! Neumann-series inversion and a pivoted LU oracle.
//!
//! Every quantity here belongs to the truncated operator, not to the infinite matrix it
//! approximates.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::lattice::{IndexWindow, Lattice};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix indexed by the points of a window, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    window: Arc<IndexWindow>,
    entries: Vec<Complex64>,
}

impl OperatorMatrix {
    pub fn new(window: Arc<IndexWindow>, entries: Vec<Complex64>) -> Result<Self> {
        let n = window.len();
        if entries.len() != n * n {
            return Err(domain(format!(
                "window has {n} points, expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("matrix entries must be finite"));
        }
        Ok(OperatorMatrix { window, entries })
    }

    pub fn from_real(window: Arc<IndexWindow>, entries: &[f64]) -> Result<Self> {
        Self::new(window, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(window: Arc<IndexWindow>, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        let n = window.len();
        let entries = (0..n * n).map(|k| f(k / n, k % n)).collect();
        Self::new(window, entries)
    }

    /// Real matrix indexed by the points `0, 1, …, n−1` of `Z`.
    pub fn from_rows_on_line(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(domain("rows must form a square matrix"));
        }
        let window = IndexWindow::from_coords(
            Lattice::integer(1),
            (0..n as i64).map(|i| vec![i]).collect(),
        )?;
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_real(Arc::new(window), &flat)
    }

    pub fn identity(window: Arc<IndexWindow>) -> Self {
        Self::scaled_identity(window, ONE)
    }

    fn scaled_identity(window: Arc<IndexWindow>, value: Complex64) -> Self {
        let n = window.len();
        let mut entries = vec![ZERO; n * n];
        for i in 0..n {
            entries[i * n + i] = value;
        }
        OperatorMatrix { window, entries }
    }

    pub fn zeros(window: Arc<IndexWindow>) -> Self {
        let n = window.len();
        OperatorMatrix {
            window,
            entries: vec![ZERO; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> &Arc<IndexWindow> {
        &self.window
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        let n = self.n();
        self.entries[i * n + j] = value;
    }

    /// Distance between the window points indexing row `i` and column `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.window.distance(i, j)
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n();
        let mut entries = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        OperatorMatrix {
            window: self.window.clone(),
            entries,
        }
    }

    /// Matrix product. Rows are computed independently in a fixed order, so the result does
    /// not depend on the number of threads.
    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n();
        assert_eq!(n, other.n(), "matmul dimension mismatch");
        let mut out = vec![ZERO; n * n];
        out.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            let lhs = &self.entries[i * n..(i + 1) * n];
            for (k, &a) in lhs.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let rhs = &other.entries[k * n..(k + 1) * n];
                for (o, &b) in row.iter_mut().zip(rhs) {
                    *o += a * b;
                }
            }
        });
        OperatorMatrix {
            window: self.window.clone(),
            entries: out,
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                self.entries[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, x)| a * x)
                    .sum()
            })
            .collect()
    }

    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let mut out = vec![ZERO; n];
        for (row, &vi) in self.entries.chunks_exact(n).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        OperatorMatrix {
            window: self.window.clone(),
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.n(), other.n(), "dimension mismatch");
        OperatorMatrix {
            window: self.window.clone(),
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n(), other.n(), "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.n(), self.n(), &self.entries)
    }
}

/// Tuning for norm and spectrum computations.
#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    pub max_iter: usize,
    /// Windows up to this size use a full Hermitian eigen-decomposition.
    pub exact_cutoff: usize,
    /// Iterations of the power method run as a cross-check in the exact regime.
    pub crosscheck_iter: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            max_iter: 100_000,
            exact_cutoff: 256,
            crosscheck_iter: 200,
            seed: 0x005e_ed0f_dec0,
        }
    }
}

/// Operator norm with the provenance of the value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    /// Power-method estimate (a lower bound up to rounding).
    pub power_estimate: f64,
    pub iterations: usize,
    pub exact: Option<f64>,
}

fn hermitian_eigenvalues(h: &OperatorMatrix) -> Vec<f64> {
    h.to_nalgebra().symmetric_eigenvalues().iter().copied().collect()
}

fn seeded_vector(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|z| *z /= norm);
    }
    norm
}

/// Largest eigenvalue of a Hermitian positive semi-definite operator given by `apply`.
///
/// Returns `(estimate, iterations, converged)`.
fn power_iteration(
    n: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> (f64, usize, bool) {
    let mut v = seeded_vector(n, seed);
    normalize(&mut v);
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let mut w = apply(&v);
        let next: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        if normalize(&mut w) == 0.0 {
            return (0.0, it, true);
        }
        let converged = it > 1 && (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        v = w;
        if converged {
            return (lambda, it, true);
        }
    }
    (lambda, max_iter, false)
}

/// `ℓ² → ℓ²` operator norm (largest singular value).
pub fn op_norm(a: &OperatorMatrix, tol: f64) -> Result<f64> {
    Ok(op_norm_detailed(a, tol, &NormOptions::default())?.value)
}

pub fn op_norm_detailed(a: &OperatorMatrix, tol: f64, opts: &NormOptions) -> Result<NormEstimate> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = a.n();
    let gram = |v: &[Complex64]| a.apply(&a.apply_adjoint(v));
    if n <= opts.exact_cutoff {
        let h = a.matmul(&a.adjoint());
        let top = hermitian_eigenvalues(&h)
            .into_iter()
            .fold(0.0f64, f64::max);
        let exact = top.max(0.0).sqrt();
        let (power, iterations, _) = power_iteration(n, gram, tol, opts.crosscheck_iter, opts.seed);
        return Ok(NormEstimate {
            value: exact,
            power_estimate: power.max(0.0).sqrt(),
            iterations,
            exact: Some(exact),
        });
    }
    let (power, iterations, converged) = power_iteration(n, gram, tol, opts.max_iter, opts.seed);
    let value = power.max(0.0).sqrt();
    if !converged {
        return Err(Error::Convergence {
            what: format!("operator norm after {iterations} power iterations"),
            estimate: value,
        });
    }
    Ok(NormEstimate {
        value,
        power_estimate: value,
        iterations,
        exact: None,
    })
}

/// The contraction `r = ‖Id − AA*/‖A‖²‖` of a finite operator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Contraction {
    pub r: f64,
    pub op_norm: f64,
    /// `r ≥ 1 − tol`: the truncation is numerically singular.
    pub near_singular: bool,
}

struct Gram {
    norm: f64,
    r: f64,
    residual: OperatorMatrix,
}

fn gram_contraction(a: &OperatorMatrix, tol: f64, opts: &NormOptions) -> Result<Gram> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = a.n();
    let h = a.matmul(&a.adjoint());
    if n <= opts.exact_cutoff {
        let eig = hermitian_eigenvalues(&h);
        let top = eig.iter().copied().fold(0.0f64, f64::max);
        if top <= 0.0 {
            return Err(Error::Singular("zero operator".into()));
        }
        let c = top;
        let r = eig
            .iter()
            .map(|&l| (1.0 - l / c).abs())
            .fold(0.0f64, f64::max);
        let residual = OperatorMatrix::identity(a.window.clone()).sub(&h.scale(ONE / c));
        return Ok(Gram {
            norm: top.sqrt(),
            r,
            residual,
        });
    }
    let norm = op_norm_detailed(a, tol, opts)?.value;
    if norm <= 0.0 {
        return Err(Error::Singular("zero operator".into()));
    }
    let c = norm * norm;
    let residual = OperatorMatrix::identity(a.window.clone()).sub(&h.scale(ONE / c));
    let r = op_norm_detailed(&residual, tol, opts)?.value;
    Ok(Gram { norm, r, residual })
}

pub fn contraction_r(a: &OperatorMatrix, tol: f64) -> Result<Contraction> {
    let g = gram_contraction(a, tol, &NormOptions::default())?;
    Ok(Contraction {
        r: g.r,
        op_norm: g.norm,
        near_singular: g.r >= 1.0 - tol,
    })
}

/// Truncated Neumann inverse `A⁻¹ ≈ A*·Σ_{n=0}^{N} Rⁿ / ‖A‖²`.
#[derive(Debug, Clone)]
pub struct NeumannInverse {
    pub approx_inverse: OperatorMatrix,
    pub terms_used: usize,
    /// Bound on every entry of `A⁻¹ − approx_inverse` (exact arithmetic).
    pub tail_bound: f64,
    pub r: f64,
    pub op_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NeumannOptions {
    pub max_terms: usize,
    pub norm: NormOptions,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        NeumannOptions {
            max_terms: 100_000_000,
            norm: NormOptions::default(),
        }
    }
}

/// Smallest `N ≥ 0` with `r^{N+1}/(1−r) ≤ tol`.
pub fn neumann_terms(r: f64, tol: f64) -> usize {
    if r <= 0.0 {
        return 0;
    }
    let target = tol.ln() + (1.0 - r).ln();
    let mut n = ((target / r.ln()).ceil() - 1.0).max(0.0) as usize;
    while n > 0 && (n as f64) * r.ln() <= target {
        n -= 1;
    }
    while ((n + 1) as f64) * r.ln() > target {
        n += 1;
    }
    n
}

/// `Σ_{n=0}^{count−1} Rⁿ` by binary splitting: `S_{2m} = S_m + R^m S_m`, `S_{m+1} = S_m + R^m`.
fn geometric_sum(r: &OperatorMatrix, count: usize) -> OperatorMatrix {
    let id = OperatorMatrix::identity(r.window.clone());
    if count == 0 {
        return OperatorMatrix::zeros(r.window.clone());
    }
    let bits = usize::BITS - count.leading_zeros();
    let mut sum = id;
    let mut power = r.clone();
    for bit in (0..bits - 1).rev() {
        sum = sum.add(&power.matmul(&sum));
        power = power.matmul(&power);
        if count >> bit & 1 == 1 {
            sum = sum.add(&power);
            if bit > 0 {
                power = power.matmul(r);
            }
        }
    }
    sum
}

pub fn neumann_inverse(a: &OperatorMatrix, tol: f64) -> Result<NeumannInverse> {
    neumann_inverse_with(a, tol, &NeumannOptions::default())
}

pub fn neumann_inverse_with(
    a: &OperatorMatrix,
    tol: f64,
    opts: &NeumannOptions,
) -> Result<NeumannInverse> {
    let g = gram_contraction(a, tol, &opts.norm)?;
    if g.r >= 1.0 {
        return Err(Error::Precondition(format!(
            "Neumann series needs r < 1, got r = {}",
            g.r
        )));
    }
    let terms = neumann_terms(g.r, tol);
    if terms > opts.max_terms {
        return Err(Error::Convergence {
            what: format!("Neumann series needs {terms} terms, limit is {}", opts.max_terms),
            estimate: g.r,
        });
    }
    let c = g.norm * g.norm;
    let sum = geometric_sum(&g.residual, terms + 1);
    let approx_inverse = a.adjoint().matmul(&sum).scale(Complex64::new(1.0 / c, 0.0));
    let tail_bound = if g.r == 0.0 {
        0.0
    } else {
        g.r.powi(terms as i32 + 1) / (1.0 - g.r) / g.norm
    };
    Ok(NeumannInverse {
        approx_inverse,
        terms_used: terms,
        tail_bound,
        r: g.r,
        op_norm: g.norm,
    })
}

/// Default pivot floor relative to the largest entry of `A`.
pub const DEFAULT_RELATIVE_PIVOT_FLOOR: f64 = 1e-14;

pub fn direct_inverse(a: &OperatorMatrix) -> Result<OperatorMatrix> {
    direct_inverse_with_floor(a, DEFAULT_RELATIVE_PIVOT_FLOOR)
}

/// Inverse by LU factorisation with partial pivoting, solving `A·X = Id` column by column.
pub fn direct_inverse_with_floor(a: &OperatorMatrix, relative_floor: f64) -> Result<OperatorMatrix> {
    let n = a.n();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(Error::Singular("zero operator".into()));
    }
    let floor = relative_floor * scale;
    let mut lu = a.entries.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (pivot_row, pivot_abs) = (k..n)
            .map(|i| (i, lu[i * n + k].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs <= floor {
            return Err(Error::Singular(format!(
                "pivot {pivot_abs:e} at column {k} is below the floor {floor:e}"
            )));
        }
        if pivot_row != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot_row * n + j);
            }
            perm.swap(k, pivot_row);
        }
        let pivot = lu[k * n + k];
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / pivot;
            if factor == ZERO {
                continue;
            }
            lu[i * n + k] = factor;
            for j in (k + 1)..n {
                let u = lu[k * n + j];
                lu[i * n + j] -= factor * u;
            }
        }
    }
    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|col| {
            // P·A = L·U, so solve L·y = P·e_col then U·x = y.
            let mut x: Vec<Complex64> = perm.iter().map(|&p| if p == col { ONE } else { ZERO }).collect();
            for i in 0..n {
                let mut acc = x[i];
                for j in 0..i {
                    acc -= lu[i * n + j] * x[j];
                }
                x[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[i];
                for j in (i + 1)..n {
                    acc -= lu[i * n + j] * x[j];
                }
                x[i] = acc / lu[i * n + i];
            }
            x
        })
        .collect();
    let mut entries = vec![ZERO; n * n];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            entries[i * n + j] = v;
        }
    }
    OperatorMatrix::new(a.window.clone(), entries)
}

/// Extreme points `[a, b]` of the spectrum of `AA*` and `κ = b/a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralInterval {
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
}

/// `a ≤ tol·b` is reported as singular.
pub fn spectral_interval(a: &OperatorMatrix, tol: f64) -> Result<SpectralInterval> {
    spectral_interval_with(a, tol, &NormOptions::default())
}

pub fn spectral_interval_with(
    m: &OperatorMatrix,
    tol: f64,
    opts: &NormOptions,
) -> Result<SpectralInterval> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = m.n();
    let (lo, hi) = if n <= opts.exact_cutoff {
        let eig = hermitian_eigenvalues(&m.matmul(&m.adjoint()));
        (
            eig.iter().copied().fold(f64::INFINITY, f64::min),
            eig.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    } else {
        let gram = |v: &[Complex64]| m.apply(&m.apply_adjoint(v));
        let (hi, it, ok) = power_iteration(n, gram, tol, opts.max_iter, opts.seed);
        if !ok {
            return Err(Error::Convergence {
                what: format!("largest eigenvalue of AA* after {it} iterations"),
                estimate: hi,
            });
        }
        // largest eigenvalue of hi·Id − AA* is hi − lo
        let shifted = |v: &[Complex64]| {
            let w = gram(v);
            v.iter().zip(w).map(|(x, y)| x * hi - y).collect()
        };
        let (gap, it, ok) = power_iteration(n, shifted, tol, opts.max_iter, opts.seed ^ 1);
        if !ok {
            return Err(Error::Convergence {
                what: format!("smallest eigenvalue of AA* after {it} iterations"),
                estimate: hi - gap,
            });
        }
        (hi - gap, hi)
    };
    if !(hi > 0.0) || lo <= tol * hi {
        return Err(Error::Singular(format!(
            "smallest eigenvalue of AA* is {lo:e} (largest {hi:e}); condition number undefined"
        )));
    }
    Ok(SpectralInterval {
        a: lo,
        b: hi,
        kappa: hi / lo,
    })
}
