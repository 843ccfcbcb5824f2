//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use approx::abs_diff_eq;

use offdecay::bounds::{
    demko_bound, jaffard_constants, optimize_jaffard, thm44_constants, BoundKind, JaffardInputs, Thm44Inputs,
};
use offdecay::envelope::{fit_decay_profile, membership_constant};
use offdecay::lattice::{m_epsilon, make_window, Lattice};
use offdecay::operator::{direct_inverse, neumann_inverse};
use offdecay::phi::PhiSpec;
use offdecay::workbench::{
    gen_shift_example, generate, run_experiment, run_experiment_full, ExperimentConfig, GeneratorKind, GeneratorSpec,
};

type Check = std::result::Result<String, String>;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn run(id: usize, name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Check) -> Outcome {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail = format!("{detail}; exceeded {:.0} s limit", limit.as_secs_f64());
        }
    }
    Outcome { id, name, pass, detail, elapsed }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn z1(radius: usize, kind: GeneratorKind) -> GeneratorSpec {
    GeneratorSpec::new(Lattice::integer(1), radius, kind).unwrap()
}

fn shift_exactness() -> Check {
    let config = ExperimentConfig::default();
    let mut worst: f64 = 0.0;
    for k in [1.0, 2.0, 3.0, 4.0] {
        let spec = z1(64, GeneratorKind::ShiftExample { k, beta: 1.0 });
        let out = run_experiment_full(&spec, BoundKind::Jaffard, &config).map_err(|e| e.to_string())?;
        let oracle = generate(&spec).unwrap().oracle.unwrap().matrix(spec.window().unwrap()).unwrap();
        let err = out.inverse.max_abs_diff(&oracle);
        worst = worst.max(err);
        ensure(err <= 1e-13, || format!("k={k}: inverse off by {err:e}"))?;
        let rate = out.report.fit.as_ref().ok_or(format!("k={k}: no fit"))?.rate;
        ensure((rate - 1.0 / k).abs() <= 1e-6, || format!("k={k}: fitted rate {rate}"))?;
        ensure(out.report.entrywise_pass, || format!("k={k}: bound violated"))?;
    }
    Ok(format!("max |inverse - oracle| = {worst:.1e}"))
}

fn families(seed: u64) -> Vec<GeneratorKind> {
    let d = 2.0;
    vec![
        GeneratorKind::ShiftExample { k: 1.0 + (seed % 3) as f64, beta: 1.0 },
        GeneratorKind::RandomExponential { gamma: 1.0, seed, dominance: d },
        GeneratorKind::RandomBanded { m: 1.0 + (seed % 3) as f64, seed, dominance: d },
        GeneratorKind::RandomSubexp { beta: 0.5, k: 1.0, seed, dominance: d },
        GeneratorKind::RandomPhi { phi: PhiSpec::power(1.0).unwrap(), seed, dominance: d },
        GeneratorKind::RandomPhi { phi: PhiSpec::power(2.0).unwrap(), seed, dominance: d },
        GeneratorKind::RandomPhi { phi: PhiSpec::log(), seed, dominance: d },
        GeneratorKind::TridiagonalSpd { shift: 0.5 + seed as f64 },
        GeneratorKind::ScaledIdentity { dominance: d },
    ]
}

fn neumann_vs_direct() -> Check {
    let mut count = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for seed in 0..6u64 {
        for kind in families(seed) {
            let spec = if seed == 5 {
                if matches!(kind, GeneratorKind::ShiftExample { .. }) {
                    continue;
                }
                GeneratorSpec::new(Lattice::integer(2), 4, kind).unwrap()
            } else {
                z1(8 * (1 + seed as usize % 4), kind)
            };
            let a = generate(&spec).map_err(|e| e.to_string())?.matrix;
            let ni = neumann_inverse(&a, 1e-13).map_err(|e| e.to_string())?;
            let direct = direct_inverse(&a).map_err(|e| e.to_string())?;
            let diff = ni.approx_inverse.max_abs_diff(&direct);
            worst_excess = worst_excess.max(diff - ni.tail_bound);
            ensure(diff <= ni.tail_bound + 1e-10, || {
                format!("{spec:?}: |neumann - direct| = {diff:e} > tail {:e}", ni.tail_bound)
            })?;
            count += 1;
        }
    }
    ensure(count >= 50, || format!("only {count} matrices"))?;
    Ok(format!("{count} matrices, max (diff - tail) = {worst_excess:.1e}"))
}

fn jaffard_soundness() -> Check {
    let config = ExperimentConfig::default();
    let mut count = 0;
    let mut worst = f64::NEG_INFINITY;
    for gamma in [1.0, 2.0] {
        for seed in 0..10u64 {
            let spec = z1(16 + 8 * (seed as usize % 2), GeneratorKind::RandomExponential { gamma, seed, dominance: 2.0 });
            let rep = run_experiment(&spec, BoundKind::Jaffard, &config).map_err(|e| e.to_string())?;
            worst = worst.max(rep.worst_violation);
            ensure(rep.entrywise_pass && rep.worst_violation <= 0.0, || {
                format!("gamma={gamma} seed={seed}: violation {}", rep.worst_violation)
            })?;
            count += 1;
        }
    }
    Ok(format!("{count} matrices, worst violation {worst:.3e}"))
}

fn thm44_soundness() -> Check {
    let config = ExperimentConfig::default();
    let mut count = 0;
    let mut worst = f64::NEG_INFINITY;
    for phi in [PhiSpec::power(1.0).unwrap(), PhiSpec::power(2.0).unwrap(), PhiSpec::log()] {
        for seed in 0..7u64 {
            let spec = z1(16, GeneratorKind::RandomPhi { phi: phi.clone(), seed, dominance: 2.0 });
            let rep = run_experiment(&spec, BoundKind::Thm44, &config).map_err(|e| e.to_string())?;
            worst = worst.max(rep.worst_violation);
            ensure(rep.entrywise_pass && rep.worst_violation <= 0.0, || {
                format!("{phi} seed={seed}: violation {}", rep.worst_violation)
            })?;
            count += 1;
        }
    }
    Ok(format!("{count} matrices, worst violation {worst:.3e}"))
}

fn m_epsilon_closed_form() -> Check {
    let lattice = Lattice::integer(1);
    let mut prev = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for eps in [0.1, 0.5, std::f64::consts::LN_2, 1.0, 2.0, 5.0] {
        let got = m_epsilon(&lattice, eps, 1e-12).map_err(|e| e.to_string())?;
        let q = (-eps).exp();
        let want = (1.0 + q) / (1.0 - q);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-10, || format!("eps={eps}: {got} vs {want}"))?;
        ensure(got < prev, || format!("not decreasing at eps={eps}"))?;
        prev = got;
    }
    Ok(format!("max error {worst:.1e}"))
}

fn demko_decay() -> Check {
    let config = ExperimentConfig::default();
    let spec = z1(64, GeneratorKind::TridiagonalSpd { shift: 0.5 });
    let out = run_experiment_full(&spec, BoundKind::Demko, &config).map_err(|e| e.to_string())?;
    let rep = &out.report;
    let kappa = rep.bound.inputs.kappa.ok_or("no kappa")?;
    let c = rep.bound.inputs.demko_c.ok_or("no C")?;
    let q = 1.0 - 2.0 / (kappa.sqrt() + 1.0);
    let mut worst = f64::NEG_INFINITY;
    for (_, _, d, entry, _) in out.rows() {
        worst = worst.max(entry - c * q.powf(d));
    }
    ensure(worst <= 1e-10, || format!("violation {worst:e}"))?;
    ensure(rep.entrywise_pass, || format!("report violation {}", rep.worst_violation))?;
    Ok(format!("kappa = {kappa:.3}, q = {q:.4}, worst excess {worst:.2e}"))
}

fn bound_arithmetic() -> Check {
    let m = |eps: f64| -> offdecay::Result<f64> {
        Ok(if (eps - 0.5).abs() < 1e-12 { 3.0 } else { 2.0 })
    };
    let inputs = JaffardInputs { gamma: 2.0, c_gamma: 1.0, r: 0.5, op_norm: 1.0 };
    let rep = jaffard_constants(&inputs, &m, 0.5, 1.0).map_err(|e| e.to_string())?;
    let gamma1 = 0.5 * 2f64.ln() / 36f64.ln();
    ensure(abs_diff_eq!(rep.rate, gamma1, epsilon = 1e-9), || format!("gamma1 {}", rep.rate))?;
    ensure(abs_diff_eq!(rep.rate, 0.09671, epsilon = 1e-5), || format!("gamma1 {}", rep.rate))?;
    ensure(abs_diff_eq!(rep.constant, 8.0, epsilon = 1e-9), || format!("C {}", rep.constant))?;

    let small_r = JaffardInputs { r: 1e-300, ..inputs };
    let rep = jaffard_constants(&small_r, &m, 0.5, 1.0).map_err(|e| e.to_string())?;
    ensure(rep.rate > 0.45 && rep.rate <= 0.5, || format!("small-r gamma1 {}", rep.rate))?;

    let z1_m = |eps: f64| -> offdecay::Result<f64> {
        let q = (-eps).exp();
        Ok((1.0 + q) / (1.0 - q))
    };
    let best = optimize_jaffard(&inputs, &z1_m, 64).map_err(|e| e.to_string())?;
    let interior = jaffard_constants(&inputs, &z1_m, 0.5, 1.0).map_err(|e| e.to_string())?;
    ensure(best.rate >= interior.rate, || "optimizer below an interior point".into())?;

    let e = std::f64::consts::E;
    let rep = thm44_constants(&Thm44Inputs { k1: 1.0, m1: 1.0, r: 1.0 / e, op_norm: 1.0, a: 2.0, c2: 1.0 })
        .map_err(|e| e.to_string())?;
    let b = 1.0 / (1.0 + 2f64.ln() + 32.0);
    ensure(abs_diff_eq!(rep.rate, b, epsilon = 1e-9), || format!("b {}", rep.rate))?;
    let ca = 2.0 / (1.0 - 1.0 / e);
    ensure(abs_diff_eq!(rep.constant, ca, epsilon = 1e-9), || format!("C_A {}", rep.constant))?;

    let half = demko_bound(1.0, 1.0, 9.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    ensure(abs_diff_eq!(half, 0.5, epsilon = 1e-12), || format!("demko {half}"))?;
    Ok(format!("gamma1 = {gamma1:.5}, optimized gamma1 = {:.5}, b = {b:.6}", best.rate))
}

fn decay_class_demos() -> Check {
    let threshold = 1e6f64;
    for k in [1.0, 2.0, 3.0] {
        let w = Arc::new(make_window(&Lattice::integer(1), 64).unwrap());
        let (a, _) = gen_shift_example(k, w, 1.0).map_err(|e| e.to_string())?;
        for gamma in 1..=10 {
            let c = membership_constant(&a, gamma as f64);
            ensure(c <= threshold, || format!("k={k}: forward constant {c:e} at gamma={gamma}"))?;
        }
        let inv = neumann_inverse(&a, 1e-15).map_err(|e| e.to_string())?.approx_inverse;
        let fail = membership_constant(&inv, 2.0 / k);
        let pass = membership_constant(&inv, 1.0 / k);
        ensure(fail > threshold, || format!("k={k}: inverse constant {fail:e} at 2/k"))?;
        ensure(pass <= threshold, || format!("k={k}: inverse constant {pass:e} at 1/k"))?;
    }

    let mut ratio = f64::INFINITY;
    for k in [1.0, 2.0, 3.0] {
        let w = Arc::new(make_window(&Lattice::integer(1), 64).unwrap());
        let (a, _) = gen_shift_example(k, w, 2.0).map_err(|e| e.to_string())?;
        let inv = neumann_inverse(&a, 1e-15).map_err(|e| e.to_string())?.approx_inverse;
        let exp_fit = fit_decay_profile(&inv, 1.0, |d| d, 1e-8).map_err(|e| e.to_string())?;
        let sup_fit = fit_decay_profile(&inv, 1.0, |d| d * d, 1e-8).map_err(|e| e.to_string())?;
        let (re, rs) = (exp_fit.max_residual.abs(), sup_fit.max_residual.abs());
        ensure(re <= 1e-6, || format!("k={k}: exponential residual {re:e}"))?;
        ensure(rs >= 10.0 * re, || format!("k={k}: super-exponential residual {rs:e} vs {re:e}"))?;
        ratio = ratio.min(rs / re.max(f64::MIN_POSITIVE));
    }
    Ok(format!("min residual ratio {ratio:.1e}"))
}

fn phi_properties() -> Check {
    let kinds = [
        PhiSpec::power(1.0).unwrap(),
        PhiSpec::power(2.0).unwrap(),
        PhiSpec::log(),
        "power:1*log".parse::<PhiSpec>().map_err(|e| e.to_string())?,
    ];
    let mut worst: f64 = 0.0;
    for spec in &kinds {
        for i in 0..=60 {
            let p = 10f64.powf(i as f64 / 10.0);
            let y = spec.eval(p).map_err(|e| e.to_string())?;
            let back = spec.inverse(y, 1e-12 * y.max(1.0)).map_err(|e| e.to_string())?;
            let rel = (back - p).abs() / p;
            worst = worst.max(rel);
            ensure(rel <= 1e-10, || format!("{spec}: p={p} came back as {back}"))?;
        }
        let check = spec.verify_condition_b(100.0, 100.0, 32);
        ensure(check.pass, || format!("{spec}: condition (b) ratio {}", check.max_ratio))?;
    }
    Ok(format!("max relative round-trip error {worst:.1e}"))
}

fn cli_determinism() -> Check {
    let once = || -> std::result::Result<serde_json::Value, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_offdecay"))
            .args(["verify-jaffard", "--seed", "7"])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("exit {:?}", out.status.code()))?;
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        v.as_object_mut().ok_or("not an object")?.remove("runtime_ms");
        Ok(v)
    };
    let (a, b) = (once()?, once()?);
    ensure(a == b, || "outputs differ".into())?;
    Ok("identical output".into())
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let outcomes = vec![
        run(1, "shift example exactness", secs(5), shift_exactness),
        run(2, "neumann matches direct inverse", secs(60), neumann_vs_direct),
        run(3, "optimized jaffard bound holds", secs(60), jaffard_soundness),
        run(4, "phi-growth bound holds", secs(60), thm44_soundness),
        run(5, "m_epsilon closed form on Z1", None, m_epsilon_closed_form),
        run(6, "demko decay on tridiagonal SPD", None, demko_decay),
        run(7, "bound arithmetic", None, bound_arithmetic),
        run(8, "decay class demonstrations", None, decay_class_demos),
        run(9, "phi round trip and condition (b)", None, phi_properties),
        run(10, "cli determinism", None, cli_determinism),
    ];
    for o in &outcomes {
        println!(
            "{} criterion {:>2}: {} ({:.2} s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.elapsed.as_secs_f64(),
            o.detail
        );
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
