//! Command-line front end: generators, bound verification and truncation studies.
//!
//! Exit status is 0 when every check passes, 2 when a bound is violated and 1 on errors.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use offdecay::bounds::BoundKind;
use offdecay::lattice::{m_epsilon, Lattice};
use offdecay::phi::PhiSpec;
use offdecay::workbench::{
    run_experiment_full, run_subexp_experiment, truncation_study, ExperimentConfig,
    GeneratorKind, GeneratorSpec,
};
use offdecay::{Error, Result};

#[derive(Parser)]
#[command(name = "offdecay", version, about = "Off-diagonal decay of matrix inverses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Seed of the random generators [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Window radius in lattice coordinates
    #[arg(long)]
    radius: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// TOML file with optional [experiment] and [generator] tables
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dimension of the integer lattice Z^d [default: 1]
    #[arg(long)]
    dim: Option<usize>,
    /// Row-major lattice generator matrix, comma separated (overrides --dim's identity)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    basis: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate m_ε = Σ_t e^{−ε|t|} over the lattice
    MEpsilon {
        #[command(flatten)]
        common: Common,
        /// ε values, comma separated [default: 0.1,0.5,ln 2,1,2,5]
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1e-12)]
        tail_tol: f64,
    },
    /// I − Γ with Γ = e^{−1/k} on the superdiagonal, checked against the Jaffard bound
    ShiftExample {
        #[command(flatten)]
        common: Common,
        /// [default: 1]
        #[arg(long)]
        k: Option<f64>,
        /// Super-exponential tag β ≥ 1 [default: 1]
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Random exponential-decay matrix against the optimised Jaffard bound
    VerifyJaffard {
        #[command(flatten)]
        common: Common,
        /// Decay rate γ of the generator [default: 1]
        #[arg(long)]
        gamma: Option<f64>,
        /// [default: 2]
        #[arg(long)]
        dominance: Option<f64>,
        /// Grid size of the (δ, γ′) search
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Random φ-family matrix against the φ-growth bound
    VerifyThm44 {
        #[command(flatten)]
        common: Common,
        /// φ as power:<α>, log, or a product joined by '*' [default: power:1]
        #[arg(long)]
        phi: Option<String>,
        /// [default: 2]
        #[arg(long)]
        dominance: Option<f64>,
    },
    /// Banded matrix against the Demko bound with C calibrated on the diagonal
    Demko {
        #[command(flatten)]
        common: Common,
        /// Diagonal shift of the tridiagonal SPD generator [default: 0.5]
        #[arg(long)]
        shift: Option<f64>,
        /// Use a random banded generator of this width instead
        #[arg(long)]
        band: Option<f64>,
        /// Dominance of the random banded generator [default: 2]
        #[arg(long)]
        dominance: Option<f64>,
    },
    /// Sub-exponential matrix: inverse constants and fitted rate
    Subexp {
        #[command(flatten)]
        common: Common,
        /// [default: 0.5]
        #[arg(long)]
        beta: Option<f64>,
        /// [default: 1]
        #[arg(long)]
        k: Option<f64>,
        /// [default: 2]
        #[arg(long)]
        dominance: Option<f64>,
    },
    /// Change of the inverse between consecutive window radii
    Truncation {
        #[command(flatten)]
        common: Common,
        /// Strictly increasing radii [default: R/4, R/2, R with R = --radius or 32]
        #[arg(long, value_delimiter = ',')]
        radii: Vec<usize>,
        /// [default: 1]
        #[arg(long)]
        gamma: Option<f64>,
        /// [default: 2]
        #[arg(long)]
        dominance: Option<f64>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    experiment: ExperimentConfig,
    generator: Option<GeneratorSpec>,
}

fn load_config(common: &Common) -> Result<ConfigFile> {
    match &common.config {
        None => Ok(ConfigFile::default()),
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        }
    }
}

fn lattice_of(common: &Common, fallback: Option<&Lattice>) -> Result<Lattice> {
    match (&common.basis, common.dim) {
        (Some(basis), dim) => {
            let d = dim.unwrap_or_else(|| (basis.len() as f64).sqrt().round() as usize);
            Lattice::new(d, basis.clone())
        }
        (None, Some(d)) => {
            if d == 0 {
                return Err(Error::Usage("--dim must be positive".into()));
            }
            Ok(Lattice::integer(d))
        }
        (None, None) => Ok(fallback.cloned().unwrap_or_else(|| Lattice::integer(1))),
    }
}

fn set_seed(kind: &mut GeneratorKind, value: u64) {
    match kind {
        GeneratorKind::RandomExponential { seed, .. }
        | GeneratorKind::RandomBanded { seed, .. }
        | GeneratorKind::RandomSubexp { seed, .. }
        | GeneratorKind::RandomPhi { seed, .. } => *seed = value,
        _ => {}
    }
}

/// The generator from the config file, or the one built from the subcommand's flags.
///
/// `family_flags` tells whether any generator-specific flag was given; those flags only
/// apply to the subcommand's own generator.
fn resolve_generator(
    common: &Common,
    file: &ConfigFile,
    family_flags: bool,
    default_radius: usize,
    kind: GeneratorKind,
) -> Result<GeneratorSpec> {
    let (mut spec, from_file) = match &file.generator {
        Some(g) => {
            if family_flags {
                return Err(Error::Usage(
                    "generator flags cannot be combined with a [generator] table in the config file".into(),
                ));
            }
            (g.clone(), true)
        }
        None => (
            GeneratorSpec {
                lattice: Lattice::integer(1),
                radius: default_radius,
                kind,
            },
            false,
        ),
    };
    if !from_file || common.dim.is_some() || common.basis.is_some() {
        spec.lattice = lattice_of(common, Some(&spec.lattice))?;
    }
    if let Some(r) = common.radius {
        spec.radius = r;
    }
    if let Some(seed) = common.seed {
        set_seed(&mut spec.kind, seed);
    }
    spec.validate()?;
    Ok(spec)
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Parse(format!("cannot serialise report: {e}")))
}

fn coords_label(coords: &[i64]) -> String {
    coords
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn run_bound(
    common: &Common,
    spec: GeneratorSpec,
    which: BoundKind,
    config: &ExperimentConfig,
) -> Result<u8> {
    let outcome = run_experiment_full(&spec, which, config)?;
    let text = match common.format {
        Format::Json => to_json(&outcome.report)?,
        Format::Csv => {
            let w = outcome.inverse.window().clone();
            let mut s = String::from("s,t,distance,abs_inverse_entry,bound_value\n");
            for (i, j, d, v, b) in outcome.rows() {
                s.push_str(&format!(
                    "{},{},{:?},{:?},{:?}\n",
                    coords_label(w.coords(i)),
                    coords_label(w.coords(j)),
                    d,
                    v,
                    b
                ));
            }
            s
        }
    };
    emit(common, &text)?;
    Ok(if outcome.report.entrywise_pass { 0 } else { 2 })
}

#[derive(Serialize)]
struct MEpsilonRow {
    epsilon: f64,
    m_epsilon: f64,
}

#[derive(Serialize)]
struct MEpsilonReport {
    lattice: Lattice,
    tail_tol: f64,
    values: Vec<MEpsilonRow>,
}

#[derive(Serialize)]
struct TruncationReport {
    generator: GeneratorSpec,
    truncation: Vec<(usize, f64)>,
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::MEpsilon { common, eps, tail_tol } => {
            let file = load_config(&common)?;
            let lattice = lattice_of(&common, file.generator.as_ref().map(|g| &g.lattice))?;
            let eps = if eps.is_empty() {
                vec![0.1, 0.5, std::f64::consts::LN_2, 1.0, 2.0, 5.0]
            } else {
                eps
            };
            let values = eps
                .iter()
                .map(|&e| {
                    m_epsilon(&lattice, e, tail_tol).map(|m| MEpsilonRow {
                        epsilon: e,
                        m_epsilon: m,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let text = match common.format {
                Format::Json => to_json(&MEpsilonReport {
                    lattice,
                    tail_tol,
                    values,
                })?,
                Format::Csv => {
                    let mut s = String::from("epsilon,m_epsilon\n");
                    for row in &values {
                        s.push_str(&format!("{:?},{:?}\n", row.epsilon, row.m_epsilon));
                    }
                    s
                }
            };
            emit(&common, &text)?;
            Ok(0)
        }
        Command::ShiftExample { common, k, beta } => {
            let file = load_config(&common)?;
            let kind = GeneratorKind::ShiftExample {
                k: k.unwrap_or(1.0),
                beta: beta.unwrap_or(1.0),
            };
            let flags = k.is_some() || beta.is_some();
            let spec = resolve_generator(&common, &file, flags, 32, kind)?;
            run_bound(&common, spec, BoundKind::Jaffard, &file.experiment)
        }
        Command::VerifyJaffard { common, gamma, dominance, grid } => {
            let file = load_config(&common)?;
            let kind = GeneratorKind::RandomExponential {
                gamma: gamma.unwrap_or(1.0),
                seed: 0,
                dominance: dominance.unwrap_or(2.0),
            };
            let flags = gamma.is_some() || dominance.is_some();
            let spec = resolve_generator(&common, &file, flags, 16, kind)?;
            let mut config = file.experiment.clone();
            if let Some(g) = grid {
                config.jaffard_grid = g;
            }
            run_bound(&common, spec, BoundKind::Jaffard, &config)
        }
        Command::VerifyThm44 { common, phi, dominance } => {
            let file = load_config(&common)?;
            let parsed: PhiSpec = phi.as_deref().unwrap_or("power:1").parse()?;
            let kind = GeneratorKind::RandomPhi {
                phi: parsed,
                seed: 0,
                dominance: dominance.unwrap_or(2.0),
            };
            let flags = phi.is_some() || dominance.is_some();
            let spec = resolve_generator(&common, &file, flags, 16, kind)?;
            run_bound(&common, spec, BoundKind::Thm44, &file.experiment)
        }
        Command::Demko { common, shift, band, dominance } => {
            let file = load_config(&common)?;
            let kind = match band {
                Some(m) => {
                    if shift.is_some() {
                        return Err(Error::Usage("--shift and --band are exclusive".into()));
                    }
                    GeneratorKind::RandomBanded {
                        m,
                        seed: 0,
                        dominance: dominance.unwrap_or(2.0),
                    }
                }
                None => {
                    if dominance.is_some() {
                        return Err(Error::Usage("--dominance needs --band".into()));
                    }
                    GeneratorKind::TridiagonalSpd {
                        shift: shift.unwrap_or(0.5),
                    }
                }
            };
            let flags = shift.is_some() || band.is_some() || dominance.is_some();
            let spec = resolve_generator(&common, &file, flags, 64, kind)?;
            run_bound(&common, spec, BoundKind::Demko, &file.experiment)
        }
        Command::Subexp { common, beta, k, dominance } => {
            let file = load_config(&common)?;
            let kind = GeneratorKind::RandomSubexp {
                beta: beta.unwrap_or(0.5),
                k: k.unwrap_or(1.0),
                seed: 0,
                dominance: dominance.unwrap_or(2.0),
            };
            let flags = beta.is_some() || k.is_some() || dominance.is_some();
            let spec = resolve_generator(&common, &file, flags, 16, kind)?;
            let report = run_subexp_experiment(&spec, &file.experiment)?;
            let text = match common.format {
                Format::Json => to_json(&report)?,
                Format::Csv => {
                    let mut s = String::from("k,inverse_constant\n");
                    for (k, c) in &report.inverse_constants {
                        s.push_str(&format!("{k:?},{c:?}\n"));
                    }
                    s
                }
            };
            emit(&common, &text)?;
            Ok(if report.sub_exponential_decay { 0 } else { 2 })
        }
        Command::Truncation { common, radii, gamma, dominance } => {
            let file = load_config(&common)?;
            let kind = GeneratorKind::RandomExponential {
                gamma: gamma.unwrap_or(1.0),
                seed: 0,
                dominance: dominance.unwrap_or(2.0),
            };
            let flags = gamma.is_some() || dominance.is_some();
            let radius = common.radius.unwrap_or(32);
            let spec = resolve_generator(&common, &file, flags, radius, kind)?;
            let radii = if radii.is_empty() {
                vec![radius / 4, radius / 2, radius]
            } else {
                radii
            };
            let truncation = truncation_study(&spec, &radii)?;
            let text = match common.format {
                Format::Json => to_json(&TruncationReport {
                    generator: spec,
                    truncation,
                })?,
                Format::Csv => {
                    let mut s = String::from("radius,max_entry_delta\n");
                    for (r, d) in &truncation {
                        s.push_str(&format!("{r},{d:?}\n"));
                    }
                    s
                }
            };
            emit(&common, &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
