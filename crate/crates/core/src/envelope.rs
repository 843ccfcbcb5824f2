//! Decay envelopes, membership constants and empirical decay-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::operator::OperatorMatrix;
use crate::phi::PhiSpec;

/// Bins whose largest entry is below this fraction of the matrix maximum are left out of fits.
pub const DEFAULT_ZERO_FLOOR: f64 = 1e-14;

/// Constants `C_p` of the bounds `|A_{s,t}| ≤ C_p e^{−p d(s,t)}` on a finite grid of `p`.
///
/// `k1` stands in for `K₁ = sup_{p ≥ 1} C_p e^{−pφ(p)}`, clamped to be at least 1. The
/// limsup constant `K` of the growth condition is not computable from finite data and is not
/// represented; see [`phi_k1_sup`] for the supremum over all real `p ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiConstants {
    pub grid: Vec<f64>,
    pub cp_values: Vec<f64>,
    pub k1: f64,
}

/// Envelope families bounding `|A_{s,t}|` as a function of `d(s,t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DecayEnvelope {
    Banded { m: f64 },
    Polynomial { k: f64 },
    SubExponential { k: f64, beta: f64 },
    Exponential { gamma: f64, c: f64 },
    SuperExponential { k: f64, beta: f64 },
    PhiFamily { spec: PhiSpec, constants: PhiConstants },
}

impl DecayEnvelope {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            DecayEnvelope::Banded { m } => positive("m", *m),
            DecayEnvelope::Polynomial { k } => positive("k", *k),
            DecayEnvelope::SubExponential { k, beta } => {
                positive("k", *k)?;
                if *beta > 0.0 && *beta < 1.0 {
                    Ok(())
                } else {
                    Err(domain(format!("sub-exponential beta must lie in (0,1), got {beta}")))
                }
            }
            DecayEnvelope::Exponential { gamma, c } => {
                positive("gamma", *gamma)?;
                if *c >= 1.0 {
                    Ok(())
                } else {
                    Err(domain(format!("exponential constant must be at least 1, got {c}")))
                }
            }
            DecayEnvelope::SuperExponential { k, beta } => {
                positive("k", *k)?;
                if *beta > 1.0 {
                    Ok(())
                } else {
                    Err(domain(format!("super-exponential beta must exceed 1, got {beta}")))
                }
            }
            DecayEnvelope::PhiFamily { spec, constants } => {
                spec.validate()?;
                if constants.grid.len() != constants.cp_values.len() {
                    return Err(domain("phi constants grid and values differ in length"));
                }
                Ok(())
            }
        }
    }

    /// Envelope value at `distance`; `p` selects the grid constant for the φ family.
    pub fn value(&self, distance: f64, p: Option<f64>) -> Result<f64> {
        if !(distance >= 0.0) {
            return Err(domain(format!("distance must be non-negative, got {distance}")));
        }
        Ok(match self {
            DecayEnvelope::Banded { m } => {
                if distance <= *m {
                    1.0
                } else {
                    0.0
                }
            }
            DecayEnvelope::Polynomial { k } => (1.0 + distance).powf(-k / 2.0),
            DecayEnvelope::Exponential { gamma, c } => c * (-gamma * distance).exp(),
            DecayEnvelope::SubExponential { k, beta }
            | DecayEnvelope::SuperExponential { k, beta } => (-k * distance.powf(*beta)).exp(),
            DecayEnvelope::PhiFamily { constants, .. } => {
                let p = p.ok_or_else(|| Error::Usage("phi-family envelope needs p".into()))?;
                let idx = constants
                    .grid
                    .iter()
                    .position(|&g| (g - p).abs() <= 1e-12 * p.abs().max(1.0))
                    .ok_or_else(|| {
                        Error::Usage(format!("p = {p} is not on the stored constant grid"))
                    })?;
                (constants.cp_values[idx].ln() - p * distance).exp()
            }
        })
    }
}

/// `ln max_{s,t} |A_{s,t}|·e^{w(d(s,t))}`, or `−∞` for the zero matrix.
pub fn log_weighted_sup(a: &OperatorMatrix, weight: impl Fn(f64) -> f64) -> f64 {
    let n = a.n();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j).norm();
            if v > 0.0 {
                best = best.max(v.ln() + weight(a.distance(i, j)));
            }
        }
    }
    best
}

/// Smallest `C ≥ 1` with `|A_{s,t}| ≤ C e^{−γ d(s,t)}` on the window.
pub fn membership_constant(a: &OperatorMatrix, gamma: f64) -> f64 {
    log_weighted_sup(a, |d| gamma * d).max(0.0).exp()
}

/// Log-linear fit `ln max|A| ≈ log_constant − rate·x(d)` over distance bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub rate: f64,
    pub log_constant: f64,
    pub max_residual: f64,
    /// `(distance, max |entry|)` for each bin that entered the fit.
    pub bins: Vec<(f64, f64)>,
}

/// Per-distance maxima of `|A_{s,t}|`, sorted by distance.
///
/// Lattice distances form a discrete set; values within a relative `1e−9` are merged.
pub fn distance_bins(a: &OperatorMatrix) -> Vec<(f64, f64)> {
    let n = a.n();
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((a.distance(i, j), a.get(i, j).norm()));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut bins: Vec<(f64, f64)> = Vec::new();
    for (d, v) in pairs {
        match bins.last_mut() {
            Some((bd, bv)) if d - *bd <= 1e-9 * bd.max(1.0) => *bv = bv.max(v),
            _ => bins.push((d, v)),
        }
    }
    bins
}

pub fn fit_exponential_rate(a: &OperatorMatrix, min_distance: f64) -> Result<EnvelopeFit> {
    fit_decay_profile(a, min_distance, |d| d, DEFAULT_ZERO_FLOOR)
}

/// Fits `ln max|A|` against `profile(d)`; `profile(d) = d^β` gives the (sub/super-)exponential
/// model `C e^{−k d^β}`.
pub fn fit_decay_profile(
    a: &OperatorMatrix,
    min_distance: f64,
    profile: impl Fn(f64) -> f64,
    zero_floor: f64,
) -> Result<EnvelopeFit> {
    let max_entry = a.max_abs();
    if max_entry == 0.0 {
        return Err(Error::Degenerate("all entries are zero".into()));
    }
    let floor = zero_floor * max_entry;
    let bins: Vec<(f64, f64)> = distance_bins(a)
        .into_iter()
        .filter(|&(d, v)| d >= min_distance && v > floor && v > 0.0)
        .collect();
    if bins.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 usable distance bins, found {}",
            bins.len()
        )));
    }
    let xs: Vec<f64> = bins.iter().map(|&(d, _)| profile(d)).collect();
    let ys: Vec<f64> = bins.iter().map(|&(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("profile is constant over the usable bins".into()));
    }
    let slope = sxy / sxx;
    let log_constant = mean_y - slope * mean_x;
    let rate = -slope;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (log_constant - rate * x))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnvelopeFit {
        rate,
        log_constant,
        max_residual,
        bins,
    })
}

fn check_p_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.is_empty() {
        return Err(domain("p grid must not be empty"));
    }
    if p_grid.iter().any(|&p| !(p >= 1.0) || !p.is_finite()) {
        return Err(domain("p grid values must be finite and at least 1"));
    }
    if p_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("p grid must be sorted ascending"));
    }
    Ok(())
}

/// `C_p = membership_constant(A, p)` on the grid and `K₁ = max(1, max_p C_p e^{−pφ(p)})`.
pub fn phi_constants_of(a: &OperatorMatrix, spec: &PhiSpec, p_grid: &[f64]) -> Result<PhiConstants> {
    check_p_grid(p_grid)?;
    let mut cp_values = Vec::with_capacity(p_grid.len());
    let mut log_k1 = f64::NEG_INFINITY;
    for &p in p_grid {
        let log_cp = log_weighted_sup(a, |d| p * d).max(0.0);
        cp_values.push(log_cp.exp());
        log_k1 = log_k1.max(log_cp - p * spec.eval(p)?);
    }
    Ok(PhiConstants {
        grid: p_grid.to_vec(),
        cp_values,
        k1: log_k1.max(0.0).exp(),
    })
}

const GOLDEN_STEPS: usize = 200;

/// Golden-section maximum of a unimodal `f` on `[lo, hi]`, including the endpoints.
fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd).max(f(lo)).max(f(hi))
}

/// `sup_{p ≥ 1} p·(d − φ(p))`.
///
/// For `d ≤ 1` the supremum sits at `p = 1`. Otherwise it is searched on `[1, φ⁻¹(d)]`, past
/// which the expression is negative; the search assumes `p ↦ p·φ(p)` is convex, as it is for
/// powers, `ln(p + e − 1)` and their products.
pub fn phi_legendre(spec: &PhiSpec, d: f64) -> Result<f64> {
    if d <= 1.0 {
        return Ok(d - 1.0);
    }
    let p_hi = match spec.inverse(d, 1e-9) {
        Ok(p) => p,
        Err(Error::Convergence { estimate, .. }) => estimate,
        Err(e) => return Err(e),
    };
    // search in u = ln p; a monotone reparametrisation keeps the maximiser unique
    let h = |u: f64| {
        let p = u.exp();
        p * (d - spec.value_unchecked(p))
    };
    Ok(golden_max(h, 0.0, p_hi.ln()).max(d - 1.0))
}

/// `K₁ = sup_{p ≥ 1} C_p e^{−pφ(p)}` over all real `p ≥ 1`, clamped to be at least 1.
///
/// Exchanging the suprema gives `max_{s,t} |A_{s,t}|·e^{sup_p p(d − φ(p))}`, evaluated once
/// per distance bin.
pub fn phi_k1_sup(a: &OperatorMatrix, spec: &PhiSpec) -> Result<f64> {
    let mut log_k1 = 0.0f64;
    for (d, v) in distance_bins(a) {
        if v > 0.0 {
            log_k1 = log_k1.max(v.ln() + phi_legendre(spec, d)?);
        }
    }
    Ok(log_k1.exp())
}

/// Weight data for the sub-exponential class `ρ(ξ) = ξ^β`, `β ∈ (0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubExpWeight {
    pub rho_beta: f64,
    pub s_exponent: f64,
    pub dimension: usize,
}

impl SubExpWeight {
    pub fn new(rho_beta: f64, s_exponent: f64, dimension: usize) -> Result<Self> {
        let w = SubExpWeight {
            rho_beta,
            s_exponent,
            dimension,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_beta > 0.0 && self.rho_beta < 1.0) {
            return Err(domain(format!("rho exponent must lie in (0,1), got {}", self.rho_beta)));
        }
        if self.dimension == 0 {
            return Err(domain("dimension must be positive"));
        }
        if !(self.s_exponent > self.dimension as f64) {
            return Err(domain(format!(
                "s must exceed the dimension {}, got {}",
                self.dimension, self.s_exponent
            )));
        }
        Ok(())
    }

    pub fn rho(&self, xi: f64) -> f64 {
        xi.powf(self.rho_beta)
    }
}

/// `max_{ξ ∈ [0, ξ_max]} (1+ξ)^{d+1} e^{−ε ρ(ξ)}`: the smallest `C̃_ε` on that range.
pub fn subexp_c_tilde(w: &SubExpWeight, eps: f64, xi_max: f64) -> Result<f64> {
    w.validate()?;
    if !(eps > 0.0) {
        return Err(domain(format!("epsilon must be positive, got {eps}")));
    }
    let power = (w.dimension + 1) as f64;
    let log_g = |xi: f64| power * (1.0 + xi).ln() - eps * w.rho(xi);
    if !(xi_max > 0.0) {
        return Ok(log_g(0.0).exp());
    }
    const SCAN: usize = 8192;
    // quadratic spacing resolves the region near 0 where ρ is steep
    let xi_at = |i: usize| xi_max * (i as f64 / SCAN as f64).powi(2);
    let (best_i, _) = (0..=SCAN)
        .map(|i| (i, log_g(xi_at(i))))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let lo = xi_at(best_i.saturating_sub(1));
    let hi = xi_at((best_i + 1).min(SCAN));
    Ok(golden_max(log_g, lo, hi).exp())
}

/// Constants of the sub-exponential hypotheses measured on a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubExpReport {
    pub beta: f64,
    /// `(k, C_k)` with `C_k = max |A_{s,t}| e^{kρ(d)}`.
    pub ck: Vec<(f64, f64)>,
    /// `(ε, C̃_ε)` over `ξ ∈ [0, xi_max]`.
    pub c_tilde: Vec<(f64, f64)>,
    pub xi_max: f64,
}

pub fn check_subexp_hypotheses(
    w: &SubExpWeight,
    a: &OperatorMatrix,
    k_grid: &[f64],
    eps_grid: &[f64],
) -> Result<SubExpReport> {
    w.validate()?;
    if k_grid.iter().any(|&k| !(k > 0.0)) {
        return Err(domain("k grid values must be positive"));
    }
    let xi_max = a.window().diameter();
    let ck = k_grid
        .iter()
        .map(|&k| (k, log_weighted_sup(a, |d| k * w.rho(d)).exp()))
        .collect();
    let c_tilde = eps_grid
        .iter()
        .map(|&eps| subexp_c_tilde(w, eps, xi_max).map(|c| (eps, c)))
        .collect::<Result<_>>()?;
    Ok(SubExpReport {
        beta: w.rho_beta,
        ck,
        c_tilde,
        xi_max,
    })
}
