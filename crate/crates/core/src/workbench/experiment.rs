//! End-to-end verification runs.

use std::cell::RefCell;
use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    demko_report, optimize_jaffard, thm44_constants, BoundKind, BoundReport, JaffardInputs,
    Thm44Inputs,
};
use crate::envelope::{
    check_subexp_hypotheses, fit_decay_profile, log_weighted_sup, membership_constant,
    phi_constants_of, phi_k1_sup, EnvelopeFit, SubExpReport, SubExpWeight,
};
use crate::error::{Error, Result};
use crate::lattice::m_epsilon;
use crate::operator::{
    contraction_r, direct_inverse, neumann_inverse, spectral_interval, OperatorMatrix,
};
use crate::workbench::generators::{generate, GeneratorKind, GeneratorSpec};

/// Measured contractions below this are replaced by it; the bounds hold for every `r′ ≥ r`.
pub const MIN_CONTRACTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubexpConfig {
    pub k_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Polynomial weight exponent `s > d`; `None` uses `d + 1`.
    pub s_exponent: Option<f64>,
}

impl Default for SubexpConfig {
    fn default() -> Self {
        SubexpConfig {
            k_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            eps_grid: vec![0.5, 1.0, 2.0],
            s_exponent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Tolerance of norm, contraction and spectrum computations.
    pub tol: f64,
    /// Tail tolerance of the Neumann series.
    pub neumann_tol: f64,
    /// Tail tolerance of lattice sums `m_ε`; the tolerance is added to every sum.
    pub m_tail_tol: f64,
    pub jaffard_grid: usize,
    /// Decay rate `γ` fed to the Jaffard bound; `None` takes the generator's rate or 1.
    pub gamma: Option<f64>,
    pub p_grid: Vec<f64>,
    pub min_fit_distance: f64,
    /// Bins below this fraction of the largest inverse entry are left out of the fit.
    pub fit_zero_floor: f64,
    /// Allowed excess of `|A⁻¹|` over the bound; `None` means 0, or `1e−10` for Demko.
    pub slack: Option<f64>,
    /// Allowed excess of `|Neumann − direct|` over the Neumann tail bound.
    pub crosscheck_slack: f64,
    pub truncation_radii: Vec<usize>,
    pub subexp: SubexpConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tol: 1e-12,
            neumann_tol: 1e-15,
            m_tail_tol: 1e-12,
            jaffard_grid: 64,
            gamma: None,
            p_grid: vec![1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0],
            min_fit_distance: 1.0,
            fit_zero_floor: 1e-8,
            slack: None,
            crosscheck_slack: 1e-10,
            truncation_radii: Vec::new(),
            subexp: SubexpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub generator: GeneratorSpec,
    pub bound: BoundReport,
    /// Exponential fit of the inverse; `null` when fewer than two distances carry mass.
    pub fit: Option<EnvelopeFit>,
    pub entrywise_pass: bool,
    /// `max_{s,t} |A⁻¹_{s,t}| − bound(d(s,t)) − slack`.
    pub worst_violation: f64,
    /// `(radius, max entry delta)` against the next larger radius.
    pub truncation: Vec<(usize, f64)>,
    pub runtime_ms: u64,
}

/// A report with the matrices behind it.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub matrix: OperatorMatrix,
    pub inverse: OperatorMatrix,
    /// `max |Neumann − direct|`.
    pub crosscheck_delta: f64,
    pub tail_bound: f64,
}

impl ExperimentOutcome {
    /// `(s, t, distance, |A⁻¹_{s,t}|, bound)` for every entry.
    pub fn rows(&self) -> Vec<(usize, usize, f64, f64, f64)> {
        let n = self.inverse.n();
        let mut rows = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let d = self.inverse.distance(i, j);
                rows.push((i, j, d, self.inverse.get(i, j).norm(), self.report.bound.value(d)));
            }
        }
        rows
    }
}

/// `ε ↦ m_ε + tail_tol`, memoised.
struct MCache<'a> {
    lattice: &'a crate::lattice::Lattice,
    tail_tol: f64,
    seen: RefCell<HashMap<u64, f64>>,
}

impl MCache<'_> {
    fn get(&self, eps: f64) -> Result<f64> {
        if let Some(v) = self.seen.borrow().get(&eps.to_bits()) {
            return Ok(*v);
        }
        let v = m_epsilon(self.lattice, eps, self.tail_tol)? + self.tail_tol;
        self.seen.borrow_mut().insert(eps.to_bits(), v);
        Ok(v)
    }
}

/// Inverse by Neumann series, checked against LU.
fn checked_inverse(
    a: &OperatorMatrix,
    config: &ExperimentConfig,
) -> Result<(OperatorMatrix, f64, f64, f64, f64)> {
    let contraction = contraction_r(a, config.tol)?;
    if contraction.near_singular {
        return Err(Error::Precondition(format!(
            "near-singular truncation: r = {} within {} of 1",
            contraction.r, config.tol
        )));
    }
    let neumann = neumann_inverse(a, config.neumann_tol)?;
    let direct = direct_inverse(a)?;
    let delta = neumann.approx_inverse.max_abs_diff(&direct);
    if delta > neumann.tail_bound + config.crosscheck_slack {
        return Err(Error::Convergence {
            what: format!(
                "Neumann and direct inverses differ by {delta:e}, tail bound {:e}",
                neumann.tail_bound
            ),
            estimate: delta,
        });
    }
    Ok((
        neumann.approx_inverse,
        delta,
        neumann.tail_bound,
        neumann.r,
        neumann.op_norm,
    ))
}

fn generator_gamma(spec: &GeneratorSpec) -> f64 {
    match spec.kind {
        GeneratorKind::RandomExponential { gamma, .. } => gamma,
        _ => 1.0,
    }
}

fn worst_violation(inverse: &OperatorMatrix, bound: &BoundReport, slack: f64) -> f64 {
    let n = inverse.n();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let v = inverse.get(i, j).norm() - bound.value(inverse.distance(i, j)) - slack;
            worst = worst.max(v);
        }
    }
    worst
}

fn jaffard_bound(
    spec: &GeneratorSpec,
    a: &OperatorMatrix,
    r: f64,
    op_norm: f64,
    config: &ExperimentConfig,
) -> Result<BoundReport> {
    let gamma = config.gamma.unwrap_or_else(|| generator_gamma(spec));
    let inputs = JaffardInputs {
        gamma,
        c_gamma: membership_constant(a, gamma),
        r,
        op_norm,
    };
    let cache = MCache {
        lattice: &spec.lattice,
        tail_tol: config.m_tail_tol,
        seen: RefCell::new(HashMap::new()),
    };
    optimize_jaffard(&inputs, &|eps| cache.get(eps), config.jaffard_grid)
}

fn thm44_bound(
    spec: &GeneratorSpec,
    a: &OperatorMatrix,
    r: f64,
    op_norm: f64,
    config: &ExperimentConfig,
) -> Result<BoundReport> {
    let phi = match &spec.kind {
        GeneratorKind::RandomPhi { phi, .. } => phi.clone(),
        _ => crate::phi::PhiSpec::power(1.0)?,
    };
    let on_grid = phi_constants_of(a, &phi, &config.p_grid)?.k1;
    let k1 = on_grid.max(phi_k1_sup(a, &phi)?);
    let m1 = m_epsilon(&spec.lattice, 1.0, config.m_tail_tol)? + config.m_tail_tol;
    thm44_constants(&Thm44Inputs {
        k1,
        m1,
        r,
        op_norm,
        a: phi.a,
        c2: membership_constant(a, 2.0),
    })
}

/// Band width `max{d(s,t) : A_{s,t} ≠ 0}`; a diagonal matrix counts as width 1.
fn measured_band(a: &OperatorMatrix) -> f64 {
    let n = a.n();
    let mut m = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if a.get(i, j).norm() != 0.0 {
                m = m.max(a.distance(i, j));
            }
        }
    }
    if m == 0.0 {
        1.0
    } else {
        m
    }
}

fn demko_bound_for(
    spec: &GeneratorSpec,
    a: &OperatorMatrix,
    inverse: &OperatorMatrix,
    config: &ExperimentConfig,
) -> Result<BoundReport> {
    if !spec.is_banded() {
        return Err(Error::Precondition(
            "the Demko bound needs a banded generator".into(),
        ));
    }
    let interval = spectral_interval(a, config.tol)?;
    let c = (0..inverse.n())
        .map(|i| inverse.get(i, i).norm())
        .fold(0.0f64, f64::max);
    demko_report(measured_band(a), interval.a, interval.b, c)
}

pub fn run_experiment(
    spec: &GeneratorSpec,
    which: BoundKind,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    run_experiment_full(spec, which, config).map(|o| o.report)
}

pub fn run_experiment_full(
    spec: &GeneratorSpec,
    which: BoundKind,
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let a = generate(spec)?.matrix;
    let (inverse, crosscheck_delta, tail_bound, r, op_norm) = checked_inverse(&a, config)?;
    let r = r.max(MIN_CONTRACTION);
    let bound = match which {
        BoundKind::Jaffard => jaffard_bound(spec, &a, r, op_norm, config)?,
        BoundKind::Thm44 => thm44_bound(spec, &a, r, op_norm, config)?,
        BoundKind::Demko => demko_bound_for(spec, &a, &inverse, config)?,
    };
    let slack = config.slack.unwrap_or(match which {
        BoundKind::Demko => 1e-10,
        _ => 0.0,
    });
    let worst = worst_violation(&inverse, &bound, slack);
    let fit = match fit_decay_profile(&inverse, config.min_fit_distance, |d| d, config.fit_zero_floor) {
        Ok(f) => Some(f),
        Err(Error::Fit(_)) | Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let truncation = if config.truncation_radii.is_empty() {
        Vec::new()
    } else {
        truncation_study(spec, &config.truncation_radii)?
    };
    let report = ExperimentReport {
        generator: spec.clone(),
        bound,
        fit,
        entrywise_pass: worst <= 0.0,
        worst_violation: worst,
        truncation,
        runtime_ms: start.elapsed().as_millis() as u64,
    };
    Ok(ExperimentOutcome {
        report,
        matrix: a,
        inverse,
        crosscheck_delta,
        tail_bound,
    })
}

/// Max entrywise change of the inverse between consecutive radii, on the smaller window.
pub fn truncation_study(spec: &GeneratorSpec, radii: &[usize]) -> Result<Vec<(usize, f64)>> {
    if radii.len() < 2 {
        return Err(Error::Precondition(format!(
            "a truncation study needs at least 2 radii, got {}",
            radii.len()
        )));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("radii must be strictly increasing".into()));
    }
    let inverses = radii
        .iter()
        .map(|&r| generate(&spec.with_radius(r)).and_then(|g| direct_inverse(&g.matrix)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(radii.len() - 1);
    for (k, pair) in inverses.windows(2).enumerate() {
        let (small, large) = (&pair[0], &pair[1]);
        let ws = small.window();
        let wl = large.window();
        let map: Vec<usize> = (0..small.n())
            .map(|i| wl.index_of(ws.coords(i)).expect("boxes are nested"))
            .collect();
        let mut delta = 0.0f64;
        for i in 0..small.n() {
            for j in 0..small.n() {
                delta = delta.max((small.get(i, j) - large.get(map[i], map[j])).norm());
            }
        }
        out.push((radii[k], delta));
    }
    Ok(out)
}

/// Empirical check of sub-exponential inverse-closedness on one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubexpExperimentReport {
    pub generator: GeneratorSpec,
    /// Constants of the forward matrix and weight.
    pub hypotheses: SubExpReport,
    /// `(k, C′_k)` with `C′_k = max |A⁻¹_{s,t}| e^{kρ(d)}` on the window.
    pub inverse_constants: Vec<(f64, f64)>,
    /// Fit of `ln max|A⁻¹|` against `d^β`; the rate is the empirical `k′`.
    pub fit: Option<EnvelopeFit>,
    /// Every `C′_k` is finite and the fitted rate is positive.
    pub sub_exponential_decay: bool,
    pub conclusion: String,
    pub runtime_ms: u64,
}

pub fn run_subexp_experiment(
    spec: &GeneratorSpec,
    config: &ExperimentConfig,
) -> Result<SubexpExperimentReport> {
    let start = Instant::now();
    let beta = match spec.kind {
        GeneratorKind::RandomSubexp { beta, .. } => beta,
        _ => {
            return Err(Error::Precondition(
                "the sub-exponential experiment needs a random_subexp generator".into(),
            ))
        }
    };
    let a = generate(spec)?.matrix;
    let (inverse, ..) = checked_inverse(&a, config)?;
    let dim = spec.lattice.dim();
    let weight = SubExpWeight::new(
        beta,
        config.subexp.s_exponent.unwrap_or(dim as f64 + 1.0),
        dim,
    )?;
    let hypotheses = check_subexp_hypotheses(&weight, &a, &config.subexp.k_grid, &config.subexp.eps_grid)?;
    let inverse_constants: Vec<(f64, f64)> = config
        .subexp
        .k_grid
        .iter()
        .map(|&k| (k, log_weighted_sup(&inverse, |d| k * weight.rho(d)).exp()))
        .collect();
    let fit = match fit_decay_profile(
        &inverse,
        config.min_fit_distance,
        |d| d.powf(beta),
        config.fit_zero_floor,
    ) {
        Ok(f) => Some(f),
        Err(Error::Fit(_)) | Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    let finite = inverse_constants.iter().all(|&(_, c)| c.is_finite());
    let decays = fit.as_ref().is_some_and(|f| f.rate > 0.0);
    let ok = finite && decays;
    let conclusion = match (&fit, ok) {
        (Some(f), true) => format!(
            "inverse decays like exp(-k' d^{beta}) with fitted k' = {:.6}; C'_k finite for every k on the grid",
            f.rate
        ),
        _ => "no sub-exponential decay of the inverse detected on this window".to_string(),
    };
    Ok(SubexpExperimentReport {
        generator: spec.clone(),
        hypotheses,
        inverse_constants,
        fit,
        sub_exponential_decay: ok,
        conclusion,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::phi::PhiSpec;

    fn spec(kind: GeneratorKind, radius: usize) -> GeneratorSpec {
        GeneratorSpec::new(Lattice::integer(1), radius, kind).unwrap()
    }

    #[test]
    fn shift_example_jaffard() {
        let s = spec(GeneratorKind::ShiftExample { k: 1.0, beta: 1.0 }, 16);
        let rep = run_experiment(&s, BoundKind::Jaffard, &ExperimentConfig::default()).unwrap();
        assert!(rep.entrywise_pass);
        assert!((rep.fit.unwrap().rate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scaled_identity_passes() {
        let s = spec(GeneratorKind::ScaledIdentity { dominance: 2.0 }, 6);
        for which in [BoundKind::Jaffard, BoundKind::Thm44, BoundKind::Demko] {
            let rep = run_experiment(&s, which, &ExperimentConfig::default()).unwrap();
            assert!(rep.entrywise_pass, "{which:?}");
            assert!(rep.fit.is_none());
            if which != BoundKind::Demko {
                assert_eq!(rep.bound.inputs.r, Some(MIN_CONTRACTION));
            }
        }
    }

    #[test]
    fn random_families_pass() {
        let cfg = ExperimentConfig::default();
        let rep = run_experiment(
            &spec(GeneratorKind::RandomExponential { gamma: 2.0, seed: 1, dominance: 2.0 }, 8),
            BoundKind::Jaffard,
            &cfg,
        )
        .unwrap();
        assert!(rep.entrywise_pass, "{}", rep.worst_violation);
        let rep = run_experiment(
            &spec(
                GeneratorKind::RandomPhi { phi: PhiSpec::power(1.0).unwrap(), seed: 1, dominance: 2.0 },
                8,
            ),
            BoundKind::Thm44,
            &cfg,
        )
        .unwrap();
        assert!(rep.entrywise_pass, "{}", rep.worst_violation);
    }

    #[test]
    fn demko_needs_band() {
        let s = spec(GeneratorKind::RandomExponential { gamma: 1.0, seed: 1, dominance: 2.0 }, 4);
        let err = run_experiment(&s, BoundKind::Demko, &ExperimentConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let s = spec(GeneratorKind::TridiagonalSpd { shift: 0.5 }, 16);
        let rep = run_experiment(&s, BoundKind::Demko, &ExperimentConfig::default()).unwrap();
        assert!(rep.entrywise_pass);
        assert_eq!(rep.bound.inputs.m, Some(1.0));
    }

    #[test]
    fn truncation_of_shift_is_exact() {
        let s = spec(GeneratorKind::ShiftExample { k: 1.0, beta: 1.0 }, 8);
        let t = truncation_study(&s, &[8, 16]).unwrap();
        assert_eq!(t, vec![(8, 0.0)]);
        assert!(matches!(truncation_study(&s, &[8]), Err(Error::Precondition(_))));
        assert!(matches!(truncation_study(&s, &[8, 8]), Err(Error::Precondition(_))));
    }

    #[test]
    fn subexp_runs() {
        let s = spec(GeneratorKind::RandomSubexp { beta: 0.5, k: 1.0, seed: 2, dominance: 2.0 }, 16);
        let rep = run_subexp_experiment(&s, &ExperimentConfig::default()).unwrap();
        assert!(rep.sub_exponential_decay, "{}", rep.conclusion);
        assert!(run_subexp_experiment(
            &spec(GeneratorKind::ScaledIdentity { dominance: 2.0 }, 3),
            &ExperimentConfig::default()
        )
        .is_err());
    }

    #[test]
    fn report_keys() {
        let s = spec(GeneratorKind::ShiftExample { k: 2.0, beta: 1.0 }, 4);
        let rep = run_experiment(&s, BoundKind::Jaffard, &ExperimentConfig::default()).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "bound",
                "entrywise_pass",
                "fit",
                "generator",
                "runtime_ms",
                "truncation",
                "worst_violation"
            ]
        );
    }
}
