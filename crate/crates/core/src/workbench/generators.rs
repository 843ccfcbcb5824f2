//! Test-matrix families.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::phi_legendre;
use crate::error::{domain, Error, Result};
use crate::lattice::{
    m_epsilon, make_window, shell_sum, stretched_exp_sum, IndexWindow, Lattice, DEFAULT_MAX_SHELLS,
};
use crate::operator::OperatorMatrix;
use crate::phi::PhiSpec;

/// Relative accuracy of the lattice envelope sums behind the diagonal shift `λ`.
const ENVELOPE_SUM_TOL: f64 = 1e-12;

/// Lattice points summed explicitly before the sub-exponential tail bound takes over.
const ENVELOPE_SUM_POINTS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorKind {
    /// `A = I − Γ` with `Γ` equal to `e^{−1/k}` on the first superdiagonal.
    ///
    /// `beta > 1` keeps the matrix and tags the super-exponential envelope `e^{−d^β/k}`,
    /// which the one-step superdiagonal satisfies.
    ShiftExample {
        k: f64,
        #[serde(default = "one")]
        beta: f64,
    },
    RandomExponential { gamma: f64, seed: u64, dominance: f64 },
    RandomBanded { m: f64, seed: u64, dominance: f64 },
    RandomSubexp { beta: f64, k: f64, seed: u64, dominance: f64 },
    RandomPhi { phi: PhiSpec, seed: u64, dominance: f64 },
    /// `(2d + shift)·Id` minus the lattice-neighbour adjacency.
    TridiagonalSpd { shift: f64 },
    ScaledIdentity { dominance: f64 },
}

fn one() -> f64 {
    1.0
}

fn default_lattice() -> Lattice {
    Lattice::integer(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(default = "default_lattice")]
    pub lattice: Lattice,
    pub radius: usize,
    #[serde(flatten)]
    pub kind: GeneratorKind,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn dominant(v: f64) -> Result<()> {
    if v > 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("dominance must exceed 1, got {v}")))
    }
}

impl GeneratorSpec {
    pub fn new(lattice: Lattice, radius: usize, kind: GeneratorKind) -> Result<Self> {
        let spec = GeneratorSpec { lattice, radius, kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            GeneratorKind::ShiftExample { k, beta } => {
                positive("k", *k)?;
                if !(*beta >= 1.0 && beta.is_finite()) {
                    return Err(domain(format!("beta must be at least 1, got {beta}")));
                }
                if self.lattice.dim() != 1 {
                    return Err(domain("the shift example lives on a one-dimensional lattice"));
                }
                Ok(())
            }
            GeneratorKind::RandomExponential { gamma, dominance, .. } => {
                positive("gamma", *gamma)?;
                dominant(*dominance)
            }
            GeneratorKind::RandomBanded { m, dominance, .. } => {
                if !(*m >= 0.0 && m.is_finite()) {
                    return Err(domain(format!("band width must be non-negative, got {m}")));
                }
                dominant(*dominance)
            }
            GeneratorKind::RandomSubexp { beta, k, dominance, .. } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(domain(format!("sub-exponential beta must lie in (0,1), got {beta}")));
                }
                positive("k", *k)?;
                dominant(*dominance)
            }
            GeneratorKind::RandomPhi { phi, dominance, .. } => {
                phi.validate()?;
                dominant(*dominance)
            }
            GeneratorKind::TridiagonalSpd { shift } => positive("shift", *shift),
            GeneratorKind::ScaledIdentity { dominance } => dominant(*dominance),
        }
    }

    pub fn window(&self) -> Result<Arc<IndexWindow>> {
        Ok(Arc::new(make_window(&self.lattice, self.radius)?))
    }

    pub fn with_radius(&self, radius: usize) -> Self {
        GeneratorSpec {
            radius,
            ..self.clone()
        }
    }

    /// Matrices whose entries vanish beyond a fixed distance.
    pub fn is_banded(&self) -> bool {
        matches!(
            self.kind,
            GeneratorKind::ShiftExample { .. }
                | GeneratorKind::RandomBanded { .. }
                | GeneratorKind::TridiagonalSpd { .. }
                | GeneratorKind::ScaledIdentity { .. }
        )
    }
}

/// Inverse of the infinite shift example, `B_{s,t} = e^{−(t−s)/k}` for `s ≤ t` and 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftOracle {
    pub k: f64,
    pub beta: f64,
}

impl ShiftOracle {
    /// Entry at lattice coordinates `s`, `t`.
    pub fn entry(&self, s: i64, t: i64) -> f64 {
        if t < s {
            return 0.0;
        }
        let n = t - s;
        if self.beta == 1.0 {
            (-(n as f64) / self.k).exp()
        } else {
            // coefficient of Γⁿ in the finite series Σ Γⁿ
            let q = (-1.0 / self.k).exp();
            (0..n).fold(1.0, |acc, _| acc * q)
        }
    }

    pub fn matrix(&self, window: Arc<IndexWindow>) -> Result<OperatorMatrix> {
        let w = window.clone();
        OperatorMatrix::from_fn(window, move |i, j| {
            Complex64::new(self.entry(w.coords(i)[0], w.coords(j)[0]), 0.0)
        })
    }
}

/// The shift example `A = I − Γ` on a window of a one-dimensional lattice.
pub fn gen_shift_example(
    k: f64,
    window: Arc<IndexWindow>,
    beta: f64,
) -> Result<(OperatorMatrix, ShiftOracle)> {
    positive("k", k)?;
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(domain(format!("beta must be at least 1, got {beta}")));
    }
    if window.dim() != 1 {
        return Err(domain(format!(
            "the shift example needs a one-dimensional window, got dimension {}",
            window.dim()
        )));
    }
    let q = (-1.0 / k).exp();
    let w = window.clone();
    let a = OperatorMatrix::from_fn(window, move |i, j| {
        let (s, t) = (w.coords(i)[0], w.coords(j)[0]);
        if s == t {
            Complex64::new(1.0, 0.0)
        } else if t == s + 1 {
            Complex64::new(-q, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })?;
    Ok((a, ShiftOracle { k, beta }))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Sign-and-size factor `σ_{s,t} ∈ [−1, 1]`, a function of the seed and the coordinates only.
fn sigma(seed: u64, s: &[i64], t: &[i64]) -> f64 {
    let key = s
        .iter()
        .chain(t)
        .fold(splitmix(seed), |h, &z| splitmix(h ^ z as u64));
    ChaCha8Rng::seed_from_u64(key).gen_range(-1.0..=1.0)
}

/// Unit-amplitude envelope of a random family as a function of distance.
fn envelope(kind: &GeneratorKind) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    Ok(match kind.clone() {
        GeneratorKind::RandomExponential { gamma, .. } => Box::new(move |d: f64| (-gamma * d).exp()),
        GeneratorKind::RandomBanded { m, .. } => {
            Box::new(move |d: f64| if d <= m + 1e-9 { 1.0 } else { 0.0 })
        }
        GeneratorKind::RandomSubexp { beta, k, .. } => {
            Box::new(move |d: f64| (-k * d.powf(beta)).exp())
        }
        GeneratorKind::RandomPhi { phi, .. } => {
            // e^{−h(d)} exceeds 1 for d < 1, hence the cap
            Box::new(move |d: f64| {
                phi_legendre(&phi, d)
                    .map(|h| (-h).exp().min(1.0))
                    .unwrap_or(0.0)
            })
        }
        _ => return Err(domain("not a random family")),
    })
}

/// `λ = dominance · Σ_{t ∈ Λ} env(d(0,t))`.
///
/// Every off-diagonal row sum of `|E|` is below the lattice sum minus the `t = s` term, so
/// Schur's test gives `‖E‖ < λ` and `λ·Id + E` is invertible.
pub fn dominance_lambda(spec: &GeneratorSpec) -> Result<f64> {
    let dominance = match &spec.kind {
        GeneratorKind::RandomExponential { dominance, .. }
        | GeneratorKind::RandomBanded { dominance, .. }
        | GeneratorKind::RandomSubexp { dominance, .. }
        | GeneratorKind::RandomPhi { dominance, .. } => *dominance,
        _ => return Err(domain("not a random family")),
    };
    let sum = match &spec.kind {
        GeneratorKind::RandomExponential { gamma, .. } => {
            m_epsilon(&spec.lattice, *gamma, ENVELOPE_SUM_TOL)? + ENVELOPE_SUM_TOL
        }
        GeneratorKind::RandomSubexp { beta, k, .. } => {
            stretched_exp_sum(&spec.lattice, *k, *beta, ENVELOPE_SUM_TOL, ENVELOPE_SUM_POINTS)?
        }
        kind => {
            let env = envelope(kind)?;
            shell_sum(&spec.lattice, &env, ENVELOPE_SUM_TOL, DEFAULT_MAX_SHELLS)?
                * (1.0 + ENVELOPE_SUM_TOL)
        }
    };
    if !sum.is_finite() {
        return Err(Error::Degenerate("envelope is not summable on the lattice".into()));
    }
    Ok(dominance * sum)
}

/// `A = λ·Id + E` with `E_{s,t} = σ_{s,t}·env(d(s,t))` off the diagonal.
pub fn gen_random_decay(spec: &GeneratorSpec) -> Result<OperatorMatrix> {
    spec.validate()?;
    let seed = match &spec.kind {
        GeneratorKind::RandomExponential { seed, .. }
        | GeneratorKind::RandomBanded { seed, .. }
        | GeneratorKind::RandomSubexp { seed, .. }
        | GeneratorKind::RandomPhi { seed, .. } => *seed,
        _ => return Err(domain("not a random family")),
    };
    let env = envelope(&spec.kind)?;
    let lambda = dominance_lambda(spec)?;
    let window = spec.window()?;
    let w = window.clone();
    OperatorMatrix::from_fn(window, move |i, j| {
        if i == j {
            Complex64::new(lambda, 0.0)
        } else {
            let e = env(w.distance(i, j));
            if e == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(sigma(seed, w.coords(i), w.coords(j)) * e, 0.0)
            }
        }
    })
}

fn tridiagonal_spd(window: Arc<IndexWindow>, shift: f64) -> Result<OperatorMatrix> {
    let diag = 2.0 * window.dim() as f64 + shift;
    let w = window.clone();
    OperatorMatrix::from_fn(window, move |i, j| {
        let l1: i64 = w
            .coords(i)
            .iter()
            .zip(w.coords(j))
            .map(|(a, b)| (a - b).abs())
            .sum();
        match l1 {
            0 => Complex64::new(diag, 0.0),
            1 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 0.0),
        }
    })
}

/// A generated matrix together with its closed-form inverse when one exists.
#[derive(Debug, Clone)]
pub struct Generated {
    pub matrix: OperatorMatrix,
    pub oracle: Option<ShiftOracle>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    match &spec.kind {
        GeneratorKind::ShiftExample { k, beta } => {
            let (matrix, oracle) = gen_shift_example(*k, spec.window()?, *beta)?;
            Ok(Generated {
                matrix,
                oracle: Some(oracle),
            })
        }
        GeneratorKind::TridiagonalSpd { shift } => Ok(Generated {
            matrix: tridiagonal_spd(spec.window()?, *shift)?,
            oracle: None,
        }),
        GeneratorKind::ScaledIdentity { dominance } => Ok(Generated {
            matrix: OperatorMatrix::identity(spec.window()?).scale(Complex64::new(*dominance, 0.0)),
            oracle: None,
        }),
        _ => Ok(Generated {
            matrix: gen_random_decay(spec)?,
            oracle: None,
        }),
    }
}
