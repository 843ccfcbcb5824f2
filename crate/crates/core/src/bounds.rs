//! Closed-form bounds `|A⁻¹_{s,t}| ≤ constant·e^{−rate·d(s,t)}`.
//!
//! Three bounds are available:
//! - [`demko_bound`]: banded matrices, rate from the condition number of `AA*`. The constant
//!   `C` has no closed form and is supplied by the caller.
//! - [`jaffard_constants`]: exponential decay `|A_{s,t}| ≤ C_γ e^{−γ d}`, with two free
//!   parameters `0 < δ < γ′ < γ`; [`optimize_jaffard`] picks them on a grid.
//! - [`thm44_constants`]: decay for every `p ≥ 1` with constants controlled by an admissible
//!   φ of homogeneity exponent `a`.
//!
//! The lattice enters only through `ε ↦ m_ε`, passed in as a function so this module does not
//! depend on how the lattice is truncated.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Demko,
    Jaffard,
    Thm44,
}

/// Every intermediate quantity of a bound. Fields that do not apply to a kind are `None`
/// and serialise as `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gamma: Option<f64>,
    pub gamma_prime: Option<f64>,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    pub c_tilde: Option<f64>,
    pub c_gamma: Option<f64>,
    /// `ε ↦ m_ε` for every ε the bound used, keyed by the decimal form of ε.
    pub m_values: BTreeMap<String, f64>,
    pub k1: Option<f64>,
    pub a: Option<f64>,
    pub c2: Option<f64>,
    pub op_norm: Option<f64>,
    pub m: Option<f64>,
    pub kappa: Option<f64>,
    pub demko_c: Option<f64>,
    /// `D = (ln(C̃K₁²m₁²r⁻¹) + 2·4^a)⁻¹` of the φ-growth bound.
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub rate: f64,
    pub constant: f64,
    pub inputs: BoundInputs,
}

impl BoundReport {
    /// `constant·e^{−rate·distance}`.
    pub fn value(&self, distance: f64) -> f64 {
        if distance == 0.0 {
            self.constant
        } else {
            self.constant * (-self.rate * distance).exp()
        }
    }
}

fn eps_key(eps: f64) -> String {
    format!("{eps}")
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("r must lie in (0,1), got {r}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_at_least_one(name: &str, v: f64) -> Result<()> {
    if v >= 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and at least 1, got {v}")))
    }
}

/// `q = 1 − 2/(√κ + 1)` for `κ = b/a ≥ 1`.
pub fn demko_ratio(a_spec: f64, b_spec: f64) -> Result<f64> {
    check_positive("a", a_spec)?;
    let kappa = b_spec / a_spec;
    if !(kappa >= 1.0) {
        return Err(domain(format!("need b ≥ a so that kappa ≥ 1, got kappa = {kappa}")));
    }
    Ok(1.0 - 2.0 / (kappa.sqrt() + 1.0))
}

/// `C·exp((1/m)·ln(1 − 2/(√κ+1))·distance)` with `κ = b/a`.
///
/// For `κ = 1` the logarithm is `−∞`: the bound is `C` at distance 0 and 0 elsewhere.
pub fn demko_bound(m: f64, a_spec: f64, b_spec: f64, c: f64, distance: f64) -> Result<f64> {
    check_positive("m", m)?;
    let q = demko_ratio(a_spec, b_spec)?;
    if distance == 0.0 {
        return Ok(c);
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(c * (q.ln() * distance / m).exp())
}

pub fn demko_report(m: f64, a_spec: f64, b_spec: f64, c: f64) -> Result<BoundReport> {
    check_positive("m", m)?;
    check_positive("C", c)?;
    let q = demko_ratio(a_spec, b_spec)?;
    Ok(BoundReport {
        kind: BoundKind::Demko,
        rate: -q.ln() / m,
        constant: c,
        inputs: BoundInputs {
            m: Some(m),
            kappa: Some(b_spec / a_spec),
            demko_c: Some(c),
            ..BoundInputs::default()
        },
    })
}

/// Measured quantities entering the Jaffard bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JaffardInputs {
    pub gamma: f64,
    /// `C_γ ≥ 1` with `|A_{s,t}| ≤ C_γ e^{−γ d}`.
    pub c_gamma: f64,
    pub r: f64,
    pub op_norm: f64,
}

impl JaffardInputs {
    fn validate(&self) -> Result<()> {
        check_positive("gamma", self.gamma)?;
        check_at_least_one("C_gamma", self.c_gamma)?;
        check_r(self.r)?;
        check_positive("operator norm", self.op_norm)
    }

    fn c_tilde(&self) -> f64 {
        1.0 + self.op_norm.powi(-2)
    }

    /// `γ₁ = min{δ, (γ′−δ)ln(1/r) / ln(C̃C_γ²r⁻¹m²_{(γ−γ′)/2})}` given `m_{(γ−γ′)/2}`.
    fn gamma1(&self, delta: f64, gamma_prime: f64, m_half: f64) -> f64 {
        let denom = (self.c_tilde() * self.c_gamma.powi(2) * m_half.powi(2) / self.r).ln();
        delta.min((gamma_prime - delta) * (1.0 / self.r).ln() / denom)
    }

    /// `C_{A,γ₁} = 2C_γ m_{γ−γ₁} / ((1−r)‖A‖²)`.
    fn constant(&self, m_gap: f64) -> f64 {
        2.0 * self.c_gamma * m_gap / ((1.0 - self.r) * self.op_norm.powi(2))
    }
}

/// Jaffard bound for fixed `δ` and `γ′`.
pub fn jaffard_constants(
    inputs: &JaffardInputs,
    m_of: &dyn Fn(f64) -> Result<f64>,
    delta: f64,
    gamma_prime: f64,
) -> Result<BoundReport> {
    inputs.validate()?;
    if !(delta > 0.0 && delta < gamma_prime && gamma_prime < inputs.gamma) {
        return Err(domain(format!(
            "need 0 < delta < gamma' < gamma, got delta = {delta}, gamma' = {gamma_prime}, gamma = {}",
            inputs.gamma
        )));
    }
    let half = (inputs.gamma - gamma_prime) / 2.0;
    let m_half = m_of(half)?;
    let gamma1 = inputs.gamma1(delta, gamma_prime, m_half);
    let gap = inputs.gamma - gamma1;
    let m_gap = m_of(gap)?;
    let mut m_values = BTreeMap::new();
    m_values.insert(eps_key(half), m_half);
    m_values.insert(eps_key(gap), m_gap);
    Ok(BoundReport {
        kind: BoundKind::Jaffard,
        rate: gamma1,
        constant: inputs.constant(m_gap),
        inputs: BoundInputs {
            gamma: Some(inputs.gamma),
            gamma_prime: Some(gamma_prime),
            delta: Some(delta),
            r: Some(inputs.r),
            c_tilde: Some(inputs.c_tilde()),
            c_gamma: Some(inputs.c_gamma),
            m_values,
            op_norm: Some(inputs.op_norm),
            ..BoundInputs::default()
        },
    })
}

/// Maximises `γ₁` over `γ′ = γ·j/(g+1)`, `δ = γ′·i/(g+1)` for `i, j ∈ 1..=g`.
///
/// Ties on `γ₁` go to the smaller constant, then to the smaller `δ`.
pub fn optimize_jaffard(
    inputs: &JaffardInputs,
    m_of: &dyn Fn(f64) -> Result<f64>,
    grid_size: usize,
) -> Result<BoundReport> {
    inputs.validate()?;
    if grid_size < 2 {
        return Err(domain(format!("grid size must be at least 2, got {grid_size}")));
    }
    let g = grid_size as f64;
    let mut candidates = Vec::with_capacity(grid_size * grid_size);
    for j in 1..=grid_size {
        let gamma_prime = inputs.gamma * j as f64 / (g + 1.0);
        let m_half = m_of((inputs.gamma - gamma_prime) / 2.0)?;
        for i in 1..=grid_size {
            let delta = gamma_prime * i as f64 / (g + 1.0);
            candidates.push((inputs.gamma1(delta, gamma_prime, m_half), delta, gamma_prime));
        }
    }
    let best = candidates
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut chosen: Option<(f64, f64, f64)> = None;
    for &(gamma1, delta, gamma_prime) in candidates.iter().filter(|c| c.0 == best) {
        let constant = inputs.constant(m_of(inputs.gamma - gamma1)?);
        let better = match chosen {
            None => true,
            Some((c, d, _)) => constant < c || (constant == c && delta < d),
        };
        if better {
            chosen = Some((constant, delta, gamma_prime));
        }
    }
    let (_, delta, gamma_prime) = chosen.expect("grid is non-empty");
    jaffard_constants(inputs, m_of, delta, gamma_prime)
}

/// Measured quantities entering the φ-growth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm44Inputs {
    pub k1: f64,
    /// `m_ε` at `ε = 1`.
    pub m1: f64,
    pub r: f64,
    pub op_norm: f64,
    /// Homogeneity exponent of φ.
    pub a: f64,
    /// `C_2` with `|A_{s,t}| ≤ C_2 e^{−2d}`.
    pub c2: f64,
}

/// `b = ln(1/r)/(ln(C̃K₁²m₁²r⁻¹) + 2·4^a)` and `C_A = 2C₂m₁/((1−r)‖A‖²)`.
pub fn thm44_constants(inputs: &Thm44Inputs) -> Result<BoundReport> {
    check_at_least_one("K1", inputs.k1)?;
    check_at_least_one("m1", inputs.m1)?;
    check_r(inputs.r)?;
    check_positive("operator norm", inputs.op_norm)?;
    if !(inputs.a > 1.0 && inputs.a.is_finite()) {
        return Err(domain(format!("homogeneity exponent must exceed 1, got {}", inputs.a)));
    }
    check_at_least_one("C2", inputs.c2)?;
    let c_tilde = 1.0 + inputs.op_norm.powi(-2);
    let log_term = (c_tilde * inputs.k1.powi(2) * inputs.m1.powi(2) / inputs.r).ln();
    let denom = log_term + 2.0 * 4f64.powf(inputs.a);
    let d = 1.0 / denom;
    let log_inv_r = (1.0 / inputs.r).ln();
    debug_assert!(d * log_inv_r <= 1.0);
    let mut m_values = BTreeMap::new();
    m_values.insert(eps_key(1.0), inputs.m1);
    Ok(BoundReport {
        kind: BoundKind::Thm44,
        rate: log_inv_r / denom,
        constant: 2.0 * inputs.c2 * inputs.m1 / ((1.0 - inputs.r) * inputs.op_norm.powi(2)),
        inputs: BoundInputs {
            r: Some(inputs.r),
            c_tilde: Some(c_tilde),
            m_values,
            k1: Some(inputs.k1),
            a: Some(inputs.a),
            c2: Some(inputs.c2),
            op_norm: Some(inputs.op_norm),
            d: Some(d),
            ..BoundInputs::default()
        },
    })
}
