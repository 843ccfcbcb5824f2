//! Admissible rate functions `φ: [1,∞) → [1,∞)`.
//!
//! An admissible φ is strictly increasing, satisfies `φ(1) = 1`, tends to infinity, and is
//! sub-homogeneous: `φ(ξp) ≤ ξ^{a−1}·φ(p)` for all `ξ, p ≥ 1` with some `a > 1`. Those
//! properties make φ continuous and bijective, so [`PhiSpec::inverse`] can bisect.
//!
//! Sub-homogeneity can only be checked on a finite grid ([`PhiSpec::verify_condition_b`]).
//! For the shipped kinds the exponent is exact; for products it is the sum rule below. A user
//! constructing a spec with a hand-picked `a` gets a grid certificate, not a proof.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default bisection tolerance for [`PhiSpec::inverse`].
pub const DEFAULT_INVERSE_TOL: f64 = 1e-12;

/// Bracket doublings allowed before [`PhiSpec::inverse`] gives up.
pub const MAX_BRACKET_DOUBLINGS: u32 = 200;

/// Slack allowed on the sub-homogeneity ratio.
pub const CONDITION_B_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiKind {
    /// `p^α`
    Power { alpha: f64 },
    /// `ln(p + e − 1)`
    Log,
    /// Product of the factors.
    Product { factors: Vec<PhiSpec> },
}

/// A rate function together with its homogeneity exponent `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    #[serde(flatten)]
    pub kind: PhiKind,
    pub a: f64,
}

/// Outcome of [`PhiSpec::verify_condition_b`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionBCheck {
    pub pass: bool,
    pub max_ratio: f64,
}

impl PhiSpec {
    /// `p^α` with the exact exponent `a = 1 + α`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(domain(format!("power exponent must be positive, got {alpha}")));
        }
        Ok(PhiSpec {
            kind: PhiKind::Power { alpha },
            a: 1.0 + alpha,
        })
    }

    /// `ln(p + e − 1)` with `a = 2`.
    pub fn log() -> Self {
        PhiSpec {
            kind: PhiKind::Log,
            a: 2.0,
        }
    }

    /// Product of admissible functions; `a = 1 + Σ (a_i − 1)`.
    pub fn product(factors: Vec<PhiSpec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(domain("product needs at least one factor"));
        }
        for f in &factors {
            f.validate()?;
        }
        let a = 1.0 + factors.iter().map(|f| f.a - 1.0).sum::<f64>();
        Ok(PhiSpec {
            kind: PhiKind::Product { factors },
            a,
        })
    }

    /// Overrides the homogeneity exponent.
    pub fn with_a(mut self, a: f64) -> Result<Self> {
        if !(a > 1.0) {
            return Err(domain(format!("homogeneity exponent must exceed 1, got {a}")));
        }
        self.a = a;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) || !self.a.is_finite() {
            return Err(domain(format!("homogeneity exponent must exceed 1, got {}", self.a)));
        }
        match &self.kind {
            PhiKind::Power { alpha } if !(*alpha > 0.0) || !alpha.is_finite() => Err(domain(
                format!("power exponent must be positive, got {alpha}"),
            )),
            PhiKind::Product { factors } if factors.is_empty() => {
                Err(domain("product needs at least one factor"))
            }
            PhiKind::Product { factors } => factors.iter().try_for_each(PhiSpec::validate),
            _ => Ok(()),
        }
    }

    /// `φ(p)` without the domain check.
    pub(crate) fn value_unchecked(&self, p: f64) -> f64 {
        self.value(p)
    }

    fn value(&self, p: f64) -> f64 {
        match &self.kind {
            PhiKind::Power { alpha } => p.powf(*alpha),
            PhiKind::Log => (p + std::f64::consts::E - 1.0).ln(),
            PhiKind::Product { factors } => factors.iter().map(|f| f.value(p)).product(),
        }
    }

    /// `φ(p)` for `p ≥ 1`.
    pub fn eval(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(domain(format!("phi is defined on [1, inf), got p = {p}")));
        }
        Ok(self.value(p))
    }

    /// `φ₁(p) = p·φ(p)`.
    pub fn phi1(&self, p: f64) -> Result<f64> {
        Ok(p * self.eval(p)?)
    }

    /// `p ≥ 1` with `|φ(p) − y| ≤ tol`, by bisection on a bracket grown geometrically from
    /// `[1, 2]`.
    ///
    /// If the bracket shrinks to adjacent floats first, the closer endpoint is returned; `tol`
    /// is effectively floored at the floating-point resolution of φ near the answer.
    pub fn inverse(&self, y: f64, tol: f64) -> Result<f64> {
        if !(y >= 1.0) {
            return Err(domain(format!("phi takes values in [1, inf), got y = {y}")));
        }
        if !(tol > 0.0) {
            return Err(domain(format!("tolerance must be positive, got {tol}")));
        }
        if (self.value(1.0) - y).abs() <= tol {
            return Ok(1.0);
        }
        let mut lo = 1.0f64;
        let mut hi = 2.0f64;
        let mut doublings = 0;
        while self.value(hi) < y {
            if doublings == MAX_BRACKET_DOUBLINGS {
                return Err(Error::Convergence {
                    what: format!("phi bracket for y = {y} exceeded 2^{MAX_BRACKET_DOUBLINGS}"),
                    estimate: hi,
                });
            }
            lo = hi;
            hi *= 2.0;
            doublings += 1;
        }
        loop {
            let mid = 0.5 * (lo + hi);
            let v = self.value(mid);
            if (v - y).abs() <= tol {
                return Ok(mid);
            }
            if mid <= lo || mid >= hi {
                let (elo, ehi) = ((self.value(lo) - y).abs(), (self.value(hi) - y).abs());
                return Ok(if elo <= ehi { lo } else { hi });
            }
            if v < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// Checks `φ(ξp) ≤ ξ^{a−1} φ(p)` on an `n × n` geometric grid of `[1, ξ_max] × [1, p_max]`.
    pub fn verify_condition_b(&self, xi_max: f64, p_max: f64, n_samples: usize) -> ConditionBCheck {
        let xs = geometric_grid(xi_max.max(1.0), n_samples.max(1));
        let ps = geometric_grid(p_max.max(1.0), n_samples.max(1));
        let mut max_ratio = 0.0f64;
        for &xi in &xs {
            for &p in &ps {
                let ratio = self.value(xi * p) / (xi.powf(self.a - 1.0) * self.value(p));
                max_ratio = max_ratio.max(ratio);
            }
        }
        ConditionBCheck {
            pass: max_ratio <= 1.0 + CONDITION_B_SLACK,
            max_ratio,
        }
    }
}

fn geometric_grid(max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let step = max.ln() / (n - 1) as f64;
    (0..n).map(|i| (step * i as f64).exp()).collect()
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PhiKind::Power { alpha } => write!(f, "power:{alpha}"),
            PhiKind::Log => write!(f, "log"),
            PhiKind::Product { factors } => {
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{factor}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `power:<alpha>`, `log`, or a `*`-separated product such as `power:1*log`.
impl FromStr for PhiSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('*').map(str::trim).collect();
        let mut factors = Vec::with_capacity(parts.len());
        for part in parts {
            let factor = if part == "log" {
                PhiSpec::log()
            } else if let Some(alpha) = part.strip_prefix("power:") {
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad power exponent in {part:?}")))?;
                PhiSpec::power(alpha)?
            } else {
                return Err(Error::Parse(format!(
                    "unknown phi {part:?}; expected power:<alpha>, log, or a product joined by '*'"
                )));
            };
            factors.push(factor);
        }
        if factors.len() == 1 {
            Ok(factors.pop().unwrap())
        } else {
            PhiSpec::product(factors)
        }
    }
}
