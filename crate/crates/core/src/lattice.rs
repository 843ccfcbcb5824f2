//! Lattices `Λ = G·Z^d`, finite index windows and the summability constant `m_ε`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{domain, Error, Result};

/// Generators with `|det G|` at or below this value are rejected as singular.
pub const DET_FLOOR: f64 = 1e-12;

/// Default cap on the number of points in an [`IndexWindow`].
pub const DEFAULT_MAX_WINDOW_POINTS: usize = 1 << 14;

/// Default cap on the number of ℓ∞ shells summed by [`m_epsilon`].
pub const DEFAULT_MAX_SHELLS: usize = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LatticeRepr {
    dimension: usize,
    generator: Vec<f64>,
}

/// A lattice `G·Z^d` with a non-singular generator stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeRepr", into = "LatticeRepr")]
pub struct Lattice {
    dim: usize,
    generator: Vec<f64>,
    min_singular: f64,
}

impl TryFrom<LatticeRepr> for Lattice {
    type Error = Error;

    fn try_from(repr: LatticeRepr) -> Result<Self> {
        Lattice::new(repr.dimension, repr.generator)
    }
}

impl From<Lattice> for LatticeRepr {
    fn from(l: Lattice) -> Self {
        LatticeRepr {
            dimension: l.dim,
            generator: l.generator,
        }
    }
}

impl Lattice {
    pub fn new(dim: usize, generator: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("lattice dimension must be positive"));
        }
        if generator.len() != dim * dim {
            return Err(domain(format!(
                "generator needs {} entries for dimension {dim}, got {}",
                dim * dim,
                generator.len()
            )));
        }
        if generator.iter().any(|g| !g.is_finite()) {
            return Err(domain("generator entries must be finite"));
        }
        let g = DMatrix::from_row_slice(dim, dim, &generator);
        let det = g.determinant();
        if det.abs() <= DET_FLOOR {
            return Err(domain(format!("generator is singular (|det G| = {:e})", det.abs())));
        }
        let min_singular = g
            .singular_values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        Ok(Lattice {
            dim,
            generator,
            min_singular,
        })
    }

    /// The integer lattice `Z^d`.
    pub fn integer(dim: usize) -> Self {
        let mut generator = vec![0.0; dim * dim];
        for i in 0..dim {
            generator[i * dim + i] = 1.0;
        }
        Lattice::new(dim, generator).expect("identity generator is non-singular")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major generator entries.
    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    pub fn determinant(&self) -> f64 {
        DMatrix::from_row_slice(self.dim, self.dim, &self.generator).determinant()
    }

    /// Smallest singular value of `G`; `|G·z| ≥ min_singular·|z|` for all integer `z`.
    pub fn min_singular_value(&self) -> f64 {
        self.min_singular
    }

    /// The point `G·z`.
    pub fn point(&self, z: &[i64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.generator[i * self.dim + j] * z[j] as f64)
                    .sum()
            })
            .collect()
    }

    /// Euclidean norm of `G·z`.
    pub fn norm_of(&self, z: &[i64]) -> f64 {
        self.point(z).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Euclidean distance `d(s,t) = |s − t|`.
pub fn distance(s: &[f64], t: &[f64]) -> f64 {
    debug_assert_eq!(s.len(), t.len());
    s.iter()
        .zip(t)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// A finite set of lattice points in lexicographic order of their integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexWindow {
    lattice: Lattice,
    coords: Vec<Vec<i64>>,
    points: Vec<Vec<f64>>,
    radius: usize,
}

impl IndexWindow {
    /// Builds a window from arbitrary distinct integer coordinates.
    ///
    /// Coordinates are sorted lexicographically; `radius` becomes the largest `|z|_∞`.
    pub fn from_coords(lattice: Lattice, mut coords: Vec<Vec<i64>>) -> Result<Self> {
        if coords.is_empty() {
            return Err(domain("window must contain at least one point"));
        }
        if let Some(bad) = coords.iter().find(|z| z.len() != lattice.dim()) {
            return Err(domain(format!(
                "coordinate {bad:?} does not match lattice dimension {}",
                lattice.dim()
            )));
        }
        coords.sort();
        if coords.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("window points must be pairwise distinct"));
        }
        let radius = coords
            .iter()
            .flat_map(|z| z.iter().map(|c| c.unsigned_abs()))
            .max()
            .unwrap_or(0) as usize;
        let points = coords.iter().map(|z| lattice.point(z)).collect();
        Ok(IndexWindow {
            lattice,
            coords,
            points,
            radius,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn coords(&self, i: usize) -> &[i64] {
        &self.coords[i]
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.points[i], &self.points[j])
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        self.coords.binary_search_by(|c| c.as_slice().cmp(z)).ok()
    }

    /// Largest distance between two window points.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(self.distance(i, j));
            }
        }
        best
    }
}

/// All points `G·z` with `|z|_∞ ≤ radius`, in lexicographic `z` order.
pub fn make_window(lattice: &Lattice, radius: usize) -> Result<IndexWindow> {
    make_window_with_budget(lattice, radius, DEFAULT_MAX_WINDOW_POINTS)
}

pub fn make_window_with_budget(
    lattice: &Lattice,
    radius: usize,
    max_points: usize,
) -> Result<IndexWindow> {
    let d = lattice.dim();
    let side = 2 * radius as u64 + 1;
    if d as f64 * (side as f64).ln() > (max_points as f64).ln() + 1e-12 {
        return Err(Error::Capacity(format!(
            "window of radius {radius} in dimension {d} has {side}^{d} points, budget is {max_points}"
        )));
    }
    let r = radius as i64;
    let total = side.pow(d as u32) as usize;
    let mut coords = Vec::with_capacity(total);
    let mut z = vec![-r; d];
    loop {
        coords.push(z.clone());
        // odometer, last coordinate fastest
        let mut k = d;
        loop {
            if k == 0 {
                let points = coords.iter().map(|z| lattice.point(z)).collect();
                return Ok(IndexWindow {
                    lattice: lattice.clone(),
                    coords,
                    points,
                    radius,
                });
            }
            k -= 1;
            if z[k] < r {
                z[k] += 1;
                break;
            }
            z[k] = -r;
        }
    }
}

/// Calls `f` on every integer vector with `|z|_∞ = n` exactly.
///
/// The shell is split by the first coordinate reaching `±n`: earlier coordinates lie in
/// `[−(n−1), n−1]`, later ones in `[−n, n]`.
pub fn for_each_shell_point(dim: usize, n: usize, mut f: impl FnMut(&[i64])) {
    let n = n as i64;
    if n == 0 {
        f(&vec![0; dim]);
        return;
    }
    let mut z = vec![0i64; dim];
    for lead in 0..dim {
        let lo: Vec<i64> = (0..dim)
            .map(|i| if i < lead { -(n - 1) } else { -n })
            .collect();
        let hi: Vec<i64> = (0..dim)
            .map(|i| if i < lead { n - 1 } else { n })
            .collect();
        for sign in [-1i64, 1] {
            z.copy_from_slice(&lo);
            z[lead] = sign * n;
            'odometer: loop {
                f(&z);
                let mut k = dim;
                loop {
                    if k == 0 {
                        break 'odometer;
                    }
                    k -= 1;
                    if k == lead {
                        continue;
                    }
                    if z[k] < hi[k] {
                        z[k] += 1;
                        break;
                    }
                    z[k] = lo[k];
                }
            }
        }
    }
}

/// Upper bound on the number of points in the shell `|z|_∞ = n`.
fn shell_count_bound(dim: usize, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        2.0 * dim as f64 * ((2 * n + 1) as f64).powi(dim as i32 - 1)
    }
}

/// Estimate of `m_ε = sup_s Σ_t e^{−ε d(s,t)}` within `tail_tol`.
///
/// The lattice is translation invariant, so the sum is taken around the origin.
pub fn m_epsilon(lattice: &Lattice, epsilon: f64, tail_tol: f64) -> Result<f64> {
    m_epsilon_with_limit(lattice, epsilon, tail_tol, DEFAULT_MAX_SHELLS)
}

pub fn m_epsilon_with_limit(
    lattice: &Lattice,
    epsilon: f64,
    tail_tol: f64,
    max_shells: usize,
) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(domain(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if !(tail_tol > 0.0) {
        return Err(domain(format!("tail_tol must be positive, got {tail_tol}")));
    }
    let d = lattice.dim();
    let decay = epsilon * lattice.min_singular_value();
    let mut sum = 0.0;
    for n in 0..=max_shells {
        for_each_shell_point(d, n, |z| sum += (-epsilon * lattice.norm_of(z)).exp());
        // Terms T(j) = count(j)·e^{−ε c j} have ratio T(j+1)/T(j) decreasing in j,
        // so the tail past n is at most T(n+1)/(1 − ratio(n+1)).
        let j = (n + 1) as f64;
        let ratio = (-decay).exp() * ((2.0 * j + 3.0) / (2.0 * j + 1.0)).powi(d as i32 - 1);
        if ratio < 1.0 {
            let log_term = shell_count_bound(d, n + 1).ln() - decay * j;
            let tail = log_term.exp() / (1.0 - ratio);
            if tail <= tail_tol {
                return Ok(sum);
            }
        }
    }
    Err(Error::Convergence {
        what: format!("m_epsilon tail bound above {tail_tol} after {max_shells} shells"),
        estimate: sum,
    })
}

/// `Σ_{z ∈ Z^d} f(|G·z|)` for a non-increasing profile `f`, summed over ℓ∞ shells until the
/// shell bound `count(n)·f(c_G·n)` falls below `rel_tol` of the running sum.
pub fn shell_sum(
    lattice: &Lattice,
    profile: impl Fn(f64) -> f64,
    rel_tol: f64,
    max_shells: usize,
) -> Result<f64> {
    let d = lattice.dim();
    let c = lattice.min_singular_value();
    let mut sum = 0.0;
    let mut prev_bound = f64::INFINITY;
    for n in 0..=max_shells {
        for_each_shell_point(d, n, |z| sum += profile(lattice.norm_of(z)));
        let bound = shell_count_bound(d, n + 1) * profile(c * (n + 1) as f64);
        if n > 0 && bound <= rel_tol * sum.max(f64::MIN_POSITIVE) && bound <= prev_bound {
            return Ok(sum);
        }
        prev_bound = bound;
    }
    Err(Error::Convergence {
        what: format!("lattice shell sum not settled after {max_shells} shells"),
        estimate: sum,
    })
}

/// Upper bound on `Σ_{z ∈ Z^d} e^{−k|G·z|^β}` for `β ∈ (0, 1]`.
///
/// Shells are summed exactly until the tail bound drops below `rel_tol` of the sum or
/// `max_points` lattice points have been visited; the remaining tail is bounded by
/// `2d·3^{d−1} ∫_N^∞ x^{d−1} e^{−a x^β} dx = 2d·3^{d−1} β⁻¹ a^{−d/β} Γ(d/β, a N^β)` with
/// `a = k·c_G^β`, and added to the result.
pub fn stretched_exp_sum(
    lattice: &Lattice,
    k: f64,
    beta: f64,
    rel_tol: f64,
    max_points: usize,
) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(domain(format!("k must be positive, got {k}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta must lie in (0,1], got {beta}")));
    }
    let d = lattice.dim();
    let df = d as f64;
    let a = k * lattice.min_singular_value().powf(beta);
    let s = df / beta;
    let log_prefactor = (2.0 * df).ln() + (df - 1.0) * 3f64.ln() - beta.ln() - s * a.ln() + ln_gamma(s);
    let tail_after = |n: usize| {
        let q = gamma_ur(s, a * (n as f64).powf(beta));
        if q > 0.0 {
            (log_prefactor + q.ln()).exp()
        } else {
            0.0
        }
    };
    let mut sum = 0.0;
    let mut visited = 0usize;
    let mut n = 0usize;
    loop {
        for_each_shell_point(d, n, |z| {
            sum += (-k * lattice.norm_of(z).powf(beta)).exp();
            visited += 1;
        });
        // the integral bound needs 2x + 3 ≤ 3x on [N, ∞)
        if n >= 3 {
            let tail = tail_after(n);
            if tail <= rel_tol * sum || visited >= max_points {
                return Ok(sum + tail);
            }
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_z1(eps: f64) -> f64 {
        let q = (-eps).exp();
        (1.0 + q) / (1.0 - q)
    }

    #[test]
    fn window_sizes() {
        let z1 = Lattice::integer(1);
        let w = make_window(&z1, 0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.point(0), &[0.0]);

        let w = make_window(&z1, 2).unwrap();
        let pts: Vec<f64> = w.points().iter().map(|p| p[0]).collect();
        assert_eq!(pts, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);

        let w = make_window(&Lattice::integer(2), 1).unwrap();
        assert_eq!(w.len(), 9);
        // brute-force enumeration of |z|_∞ ≤ 1
        let mut expected = vec![];
        for a in -1..=1i64 {
            for b in -1..=1i64 {
                expected.push(vec![a, b]);
            }
        }
        for (i, z) in expected.iter().enumerate() {
            assert_eq!(w.coords(i), z.as_slice());
        }
    }

    #[test]
    fn window_capacity() {
        let err = make_window_with_budget(&Lattice::integer(3), 10, 1000).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        assert!(make_window_with_budget(&Lattice::integer(3), 4, 729).is_ok());
    }

    #[test]
    fn window_points_follow_generator() {
        let l = Lattice::new(2, vec![2.0, 1.0, 0.0, 1.0]).unwrap();
        let w = make_window(&l, 1).unwrap();
        for i in 0..w.len() {
            let z = w.coords(i);
            let expect = [2.0 * z[0] as f64 + z[1] as f64, z[1] as f64];
            assert_eq!(w.point(i), &expect);
        }
    }

    #[test]
    fn from_coords_rejects_duplicates() {
        let l = Lattice::integer(1);
        assert!(IndexWindow::from_coords(l.clone(), vec![vec![1], vec![1]]).is_err());
        let w = IndexWindow::from_coords(l, vec![vec![3], vec![0]]).unwrap();
        assert_eq!(w.coords(0), &[0]);
        assert_eq!(w.radius(), 3);
        assert_eq!(w.index_of(&[3]), Some(1));
    }

    #[test]
    fn singular_generator_rejected() {
        assert!(Lattice::new(2, vec![1.0, 2.0, 2.0, 4.0]).is_err());
        assert!(Lattice::new(2, vec![1.0]).is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(distance(&[3.0], &[7.0]), 4.0);
        assert_eq!(distance(&[1.5, 2.0], &[1.5, 2.0]), 0.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn shells_partition_the_box() {
        for dim in 1..=3 {
            for n in 0..4usize {
                let mut shell = vec![];
                for_each_shell_point(dim, n, |z| shell.push(z.to_vec()));
                let mut sorted = shell.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), shell.len(), "duplicates in shell");
                assert!(shell
                    .iter()
                    .all(|z| z.iter().map(|c| c.abs()).max().unwrap() == n as i64));
                let expected = (2 * n + 1).pow(dim as u32)
                    - if n == 0 { 0 } else { (2 * n - 1).pow(dim as u32) };
                assert_eq!(shell.len(), expected);
            }
        }
    }

    #[test]
    fn m_epsilon_geometric_series() {
        let z1 = Lattice::integer(1);
        let m = m_epsilon(&z1, 2f64.ln(), 1e-10).unwrap();
        assert!((m - 3.0).abs() <= 1e-10, "{m}");
        let m = m_epsilon(&z1, 1.0, 1e-10).unwrap();
        assert!((m - 2.163953413738653).abs() <= 1e-10, "{m}");
        let m = m_epsilon(&z1, 50.0, 1e-10).unwrap();
        assert!(m >= 1.0 && m - 1.0 < 1e-20);
    }

    #[test]
    fn m_epsilon_matches_closed_form_grid() {
        let z1 = Lattice::integer(1);
        for eps in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let m = m_epsilon(&z1, eps, 1e-10).unwrap();
            assert!((m - closed_form_z1(eps)).abs() <= 1e-10, "eps={eps}");
        }
    }

    #[test]
    fn m_epsilon_z2_factorises_for_l1_like_check() {
        // On Z² with the Euclidean metric there is no closed form; compare against a brute
        // force box sum that is large enough for the tail to be negligible.
        let z2 = Lattice::integer(2);
        let eps = 1.5;
        let m = m_epsilon(&z2, eps, 1e-12).unwrap();
        let mut brute = 0.0;
        for a in -40i64..=40 {
            for b in -40i64..=40 {
                brute += (-eps * ((a * a + b * b) as f64).sqrt()).exp();
            }
        }
        assert!((m - brute).abs() < 1e-11, "{m} vs {brute}");
    }

    #[test]
    fn m_epsilon_errors() {
        let z1 = Lattice::integer(1);
        assert!(matches!(m_epsilon(&z1, 0.0, 1e-10), Err(Error::Domain(_))));
        assert!(matches!(m_epsilon(&z1, -1.0, 1e-10), Err(Error::Domain(_))));
        assert!(matches!(
            m_epsilon_with_limit(&z1, 1e-3, 1e-10, 10),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn shell_sum_matches_m_epsilon() {
        let z1 = Lattice::integer(1);
        let s = shell_sum(&z1, |d| (-0.7 * d).exp(), 1e-16, 100_000).unwrap();
        assert!((s - closed_form_z1(0.7)).abs() < 1e-12);
    }

    #[test]
    fn stretched_sum_bounds() {
        let z1 = Lattice::integer(1);
        // β = 1 reduces to the closed form m_k
        let got = stretched_exp_sum(&z1, 0.7, 1.0, 1e-13, 1 << 20).unwrap();
        let exact = closed_form_z1(0.7);
        assert!(got >= exact && got - exact < 1e-10, "{got} {exact}");
        // a small point budget still gives an upper bound
        let coarse = stretched_exp_sum(&z1, 1.0, 0.3, 1e-13, 100).unwrap();
        let fine = stretched_exp_sum(&z1, 1.0, 0.3, 1e-13, 1 << 22).unwrap();
        assert!(coarse >= fine);
        // brute force partial sum stays below the bound
        let partial: f64 = (-200_000i64..=200_000).map(|t| (-(t.abs() as f64).powf(0.3)).exp()).sum();
        assert!(fine >= partial - 1e-9);
        let z2 = Lattice::integer(2);
        let b = stretched_exp_sum(&z2, 1.0, 0.5, 1e-12, 1 << 20).unwrap();
        assert!(b.is_finite() && b > 1.0);
        assert!(stretched_exp_sum(&z1, 1.0, 1.5, 1e-12, 100).is_err());
    }
}
