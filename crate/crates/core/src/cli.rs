//! Command-line front end: classification, Cayley transforms, scattering-pH
//! verification, simulation with CSV trajectories, trapezoidal
//! discretization, dilation and interconnection.
//!
//! Exit codes are stable per error class:
//! 0 all requested checks pass, 1 a verification failed, 2 parse/read error,
//! 3 dimension or validation error, 4 simulation step failure, 5 coupling
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::geometric::{self, GeometricError, GeometricPh};
use crate::interconnect::{
    closed_loop, compose_storage, general_interconnect, redheffer_reduce, CouplingFile,
    CouplingRelation, InterconnectError,
};
use crate::linalg::{Field, Matrix, Tolerances};
use crate::subspace::{self, Subspace, SubspaceError};
use crate::systems::{
    self, DescriptorSystem, StandardSystem, StorageWeight, SystemError, SystemFile, Trajectory,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DIMENSION: i32 = 3;
pub const EXIT_STEP: i32 = 4;
pub const EXIT_COUPLING: i32 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "dtph",
    about = "Discrete-time scattering port-Hamiltonian systems toolkit",
    version
)]
pub struct Cli {
    /// Uniform tolerance override (also via the DTPH_TOL environment
    /// variable); replaces every default tolerance base factor.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Emit machine-readable JSON to stdout instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify a subspace file against the structural predicates.
    Classify { path: PathBuf },
    /// Cayley-transform a subspace and report the classification.
    Cayley {
        path: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        /// Write the transformed subspace JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Verify the scattering-pH inequality for a system and weight.
    CheckPh {
        path: PathBuf,
        #[arg(long)]
        weight: Option<PathBuf>,
        /// Search for a weight instead of reading one.
        #[arg(long)]
        find_weight: bool,
    },
    /// Search a storage weight via the bounded-real Riccati iteration.
    FindWeight {
        path: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate a system or geometric pH file; write a trajectory CSV.
    Simulate {
        path: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input CSV (one row per step) instead of seeded random inputs.
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Initial state as a Matrix JSON column; defaults to zero.
        #[arg(long)]
        x0: Option<PathBuf>,
        /// Storage weight for dissipation margins (systems only; identity
        /// when omitted).
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Repeat with seeds seed, seed+1, ...; the CSV is written for the
        /// first trial only.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Trapezoidal discretization of a monotone relation.
    Discretize {
        path: PathBuf,
        #[arg(long)]
        h: f64,
        /// Lagrangian relation file (identity graph when omitted).
        #[arg(long)]
        lagrangian: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Dilate a scattering-pH system into geometric form.
    Dilate {
        path: PathBuf,
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long)]
        find_weight: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Interconnect two systems (general / redheffer / feedback).
    Interconnect {
        path1: PathBuf,
        path2: PathBuf,
        #[arg(long, default_value = "redheffer")]
        mode: String,
        /// Coupling JSON (required for mode "general").
        #[arg(long)]
        coupling: Option<PathBuf>,
        #[arg(long)]
        weight1: Option<PathBuf>,
        #[arg(long)]
        weight2: Option<PathBuf>,
        /// Search weights for both systems before verification.
        #[arg(long)]
        find_weight: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> CliError {
        CliError {
            code,
            message: message.into(),
        }
    }
}

type CliResult = Result<i32, CliError>;

impl From<SubspaceError> for CliError {
    fn from(e: SubspaceError) -> CliError {
        let code = match &e {
            SubspaceError::ZeroCayleyParameter => EXIT_DIMENSION,
            SubspaceError::NotAGraph { .. } => EXIT_STEP,
            _ => EXIT_DIMENSION,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> CliError {
        let code = match &e {
            SystemError::Dimension { .. } | SystemError::NotHpd(_) => EXIT_DIMENSION,
            SystemError::NonUniqueStep { .. }
            | SystemError::InconsistentStep { .. }
            | SystemError::InconsistentInitialState { .. }
            | SystemError::SingularPencil
            | SystemError::IndexTooHigh { .. } => EXIT_STEP,
            SystemError::WeightNotFound { .. } | SystemError::NotScatteringPh { .. } => {
                EXIT_CHECK_FAILED
            }
            SystemError::Linalg(_) => EXIT_DIMENSION,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<GeometricError> for CliError {
    fn from(e: GeometricError) -> CliError {
        let code = match &e {
            GeometricError::NonUniqueStep { .. } | GeometricError::InconsistentStep { .. } => {
                EXIT_STEP
            }
            GeometricError::NotScatteringPh { .. }
            | GeometricError::DiscretizationNotContractive => EXIT_CHECK_FAILED,
            GeometricError::Subspace(s) => return CliError::new(EXIT_DIMENSION, s.to_string()),
            GeometricError::System(s) => return CliError::new(EXIT_STEP, s.to_string()),
            _ => EXIT_DIMENSION,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<InterconnectError> for CliError {
    fn from(e: InterconnectError) -> CliError {
        let code = match &e {
            InterconnectError::NonContractiveCoupling { .. }
            | InterconnectError::CouplingSingular { .. }
            | InterconnectError::CouplingNotMaximal { .. }
            | InterconnectError::FeedbackSingular { .. }
            | InterconnectError::NotCausal => EXIT_COUPLING,
            InterconnectError::System(s) => return CliError::new(EXIT_STEP, s.to_string()),
            _ => EXIT_DIMENSION,
        };
        CliError::new(code, e.to_string())
    }
}

/// Malformed JSON exits 2; well-formed JSON that fails semantic validation
/// (dimension mismatches, missing members) exits 3 with the offending field
/// named by the deserializer.
fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display()))
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    serde_json::from_value(value)
        .map_err(|e| CliError::new(EXIT_DIMENSION, format!("{}: {e}", path.display())))
}


/// Write `payload` to `output` when given; in `--json` mode without an
/// output path the payload is embedded into the report under "result" so
/// stdout stays a single JSON document.
fn emit(
    output: Option<&Path>,
    payload: &str,
    as_json: bool,
    mut report: serde_json::Value,
) -> Result<serde_json::Value, CliError> {
    match output {
        Some(p) => {
            std::fs::write(p, payload).map_err(|e| {
                CliError::new(EXIT_PARSE, format!("cannot write {}: {e}", p.display()))
            })?;
        }
        None if as_json => {
            let value: serde_json::Value = serde_json::from_str(payload).unwrap();
            report["result"] = value;
        }
        None => println!("{payload}"),
    }
    Ok(report)
}

fn tolerances(cli_tol: Option<f64>) -> Result<Tolerances, CliError> {
    let from_env = std::env::var("DTPH_TOL")
        .ok()
        .and_then(|v| v.parse::<f64>().ok());
    match cli_tol.or(from_env) {
        Some(t) => Tolerances::uniform(t)
            .map_err(|e| CliError::new(EXIT_DIMENSION, format!("--tol: {e}"))),
        None => Ok(Tolerances::default()),
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = dispatch(&cli);
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult {
    let tol = tolerances(cli.tol)?;
    match &cli.command {
        Command::Classify { path } => run_classify(path, &tol, cli.json),
        Command::Cayley {
            path,
            alpha,
            beta,
            output,
        } => run_cayley(path, *alpha, *beta, output.as_deref(), &tol, cli.json),
        Command::CheckPh {
            path,
            weight,
            find_weight,
        } => run_check_ph(path, weight.as_deref(), *find_weight, &tol, cli.json),
        Command::FindWeight { path, output } => {
            run_find_weight(path, output.as_deref(), &tol, cli.json)
        }
        Command::Simulate {
            path,
            steps,
            seed,
            inputs,
            x0,
            weight,
            output,
            trials,
        } => run_simulate(
            path,
            *steps,
            *seed,
            inputs.as_deref(),
            x0.as_deref(),
            weight.as_deref(),
            output.as_deref(),
            *trials,
            &tol,
            cli.json,
        ),
        Command::Discretize {
            path,
            h,
            lagrangian,
            output,
        } => run_discretize(path, *h, lagrangian.as_deref(), output.as_deref(), &tol, cli.json),
        Command::Dilate {
            path,
            weight,
            find_weight,
            output,
        } => run_dilate(
            path,
            weight.as_deref(),
            *find_weight,
            output.as_deref(),
            &tol,
            cli.json,
        ),
        Command::Interconnect {
            path1,
            path2,
            mode,
            coupling,
            weight1,
            weight2,
            find_weight,
            output,
        } => run_interconnect(
            path1,
            path2,
            mode,
            coupling.as_deref(),
            weight1.as_deref(),
            weight2.as_deref(),
            *find_weight,
            output.as_deref(),
            &tol,
            cli.json,
        ),
    }
}

fn flag(v: bool) -> &'static str {
    if v {
        "yes"
    } else {
        "no"
    }
}

fn run_classify(path: &Path, tol: &Tolerances, as_json: bool) -> CliResult {
    let sub: Subspace = read_json(path)?;
    let report = subspace::classify(&sub, tol)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        println!("subspace in K^{} x K^{}, dim {}", sub.p(), sub.q(), report.dim);
        println!("{:<22} {}", "contractive", flag(report.contractive));
        println!("{:<22} {}", "monotone", flag(report.monotone));
        println!("{:<22} {}", "norm_preserving", flag(report.norm_preserving));
        println!("{:<22} {}", "dirac", flag(report.dirac));
        println!("{:<22} {}", "lagrangian", flag(report.lagrangian));
        println!(
            "{:<22} {}",
            "maximal_contractive", flag(report.maximal_contractive)
        );
        println!(
            "{:<22} {}",
            "maximal_monotone", flag(report.maximal_monotone)
        );
        println!(
            "{:<22} {}",
            "maximal_norm_preserving", flag(report.maximal_norm_preserving)
        );
    }
    Ok(EXIT_OK)
}

fn run_cayley(
    path: &Path,
    alpha: f64,
    beta: f64,
    output: Option<&Path>,
    tol: &Tolerances,
    as_json: bool,
) -> CliResult {
    let sub: Subspace = read_json(path)?;
    let out = subspace::cayley(&sub, Complex64::new(alpha, 0.0), Complex64::new(beta, 0.0))?;
    let report = subspace::classify(&out, tol)?;
    let payload = serde_json::to_string_pretty(&out).unwrap();
    let doc = emit(
        output,
        &payload,
        as_json,
        json!({"dim": report.dim, "classification": report}),
    )?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else if output.is_some() {
        println!(
            "cayley(alpha={alpha}, beta={beta}): dim {} contractive={} monotone={} norm_preserving={}",
            report.dim,
            flag(report.contractive),
            flag(report.monotone),
            flag(report.norm_preserving)
        );
    }
    Ok(EXIT_OK)
}

fn load_standard(path: &Path) -> Result<StandardSystem, CliError> {
    let file: SystemFile = read_json(path)?;
    Ok(file.into_standard()?)
}

fn load_weight(path: &Path, tol: &Tolerances) -> Result<StorageWeight, CliError> {
    let x: Matrix = read_json(path)?;
    Ok(StorageWeight::new(x, tol)?)
}

fn obtain_weight(
    sys: &StandardSystem,
    weight: Option<&Path>,
    find: bool,
    tol: &Tolerances,
) -> Result<StorageWeight, CliError> {
    match (weight, find) {
        (Some(p), _) => load_weight(p, tol),
        (None, true) => Ok(systems::find_storage_weight(sys, tol, 5000)?),
        (None, false) => Err(CliError::new(
            EXIT_DIMENSION,
            "either --weight <path> or --find-weight is required",
        )),
    }
}

fn run_check_ph(
    path: &Path,
    weight: Option<&Path>,
    find_weight: bool,
    tol: &Tolerances,
    as_json: bool,
) -> CliResult {
    let sys = load_standard(path)?;
    let w = obtain_weight(&sys, weight, find_weight, tol)?;
    let report = systems::is_scattering_ph(&sys, &w, tol)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        println!(
            "scattering_ph={} lmi_lambda_max={:e} weighted_norm={}",
            flag(report.passes),
            report.lmi_lambda_max,
            report.weighted_norm
        );
    }
    Ok(if report.passes { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn run_find_weight(
    path: &Path,
    output: Option<&Path>,
    tol: &Tolerances,
    as_json: bool,
) -> CliResult {
    let sys = load_standard(path)?;
    let w = systems::find_storage_weight(&sys, tol, 5000)?;
    let report = systems::is_scattering_ph(&sys, &w, tol)?;
    let payload = serde_json::to_string_pretty(w.matrix()).unwrap();
    let doc = emit(
        output,
        &payload,
        as_json,
        json!({"found": true, "lmi_lambda_max": report.lmi_lambda_max}),
    )?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else if output.is_some() {
        println!("weight found, lmi_lambda_max={:e}", report.lmi_lambda_max);
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// Simulation: input generation, CSV formatting
// ---------------------------------------------------------------------------

fn random_inputs(m: usize, steps: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| Matrix::from_fn_real(m, 1, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

fn read_inputs_csv(path: &Path, m: usize) -> Result<Vec<Matrix>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display()))
    })?;
    let mut rows: Vec<Matrix> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() => continue, // header line
            Err(e) => {
                return Err(CliError::new(
                    EXIT_PARSE,
                    format!("{}:{}: {e}", path.display(), lineno + 1),
                ))
            }
        };
        let u = if values.len() == m {
            Matrix::col_from_real(&values)
        } else if values.len() == 2 * m {
            Matrix::col_from_complex(
                &values
                    .chunks(2)
                    .map(|p| Complex64::new(p[0], p[1]))
                    .collect::<Vec<_>>(),
            )
        } else {
            return Err(CliError::new(
                EXIT_PARSE,
                format!(
                    "{}:{}: expected {m} (or {}) columns, got {}",
                    path.display(),
                    lineno + 1,
                    2 * m,
                    values.len()
                ),
            ));
        };
        rows.push(u);
    }
    Ok(rows)
}

fn vec_is_complex(vs: &[Matrix]) -> bool {
    vs.iter().any(|v| v.field() == Field::Complex)
}

fn push_header(header: &mut String, name: &str, len: usize, complex: bool) {
    for i in 1..=len {
        if complex {
            let _ = write!(header, ",re({name}_{i}),im({name}_{i})");
        } else {
            let _ = write!(header, ",{name}_{i}");
        }
    }
}

fn push_values(line: &mut String, v: &Matrix, complex: bool) {
    for i in 0..v.rows() {
        let z = v.at(i, 0);
        if complex {
            let _ = write!(line, ",{},{}", z.re, z.im);
        } else {
            let _ = write!(line, ",{}", z.re);
        }
    }
}

/// Trajectory CSV: `k, x_1.., u_1.., y_1.., residual, margin` with complex
/// values split into `re(..), im(..)` pairs. The final row carries the
/// terminal state with the step columns left empty.
fn trajectory_csv(
    states: &[Matrix],
    inputs: &[Matrix],
    outputs: &[Matrix],
    residuals: &[f64],
    margins: &[f64],
) -> String {
    let n = states.first().map_or(0, Matrix::rows);
    let m = inputs.first().map_or(0, Matrix::rows);
    let p = outputs.first().map_or(0, Matrix::rows);
    let cx = vec_is_complex(states) || vec_is_complex(inputs) || vec_is_complex(outputs);
    let mut out = String::from("k");
    push_header(&mut out, "x", n, cx);
    push_header(&mut out, "u", m, cx);
    push_header(&mut out, "y", p, cx);
    out.push_str(",residual,margin\n");
    let width = |len: usize| if cx { 2 * len } else { len };
    for k in 0..inputs.len() {
        let mut line = format!("{k}");
        push_values(&mut line, &states[k], cx);
        push_values(&mut line, &inputs[k], cx);
        push_values(&mut line, &outputs[k], cx);
        let _ = write!(line, ",{},{}", residuals[k], margins[k]);
        line.push('\n');
        out.push_str(&line);
    }
    // terminal state row
    let mut line = format!("{}", inputs.len());
    push_values(&mut line, &states[inputs.len()], cx);
    for _ in 0..width(m) + width(p) + 2 {
        line.push(',');
    }
    line.push('\n');
    out.push_str(&line);
    out
}

enum SimTarget {
    System(Box<SystemFile>),
    Geometric(Box<GeometricPh>),
}

fn load_sim_target(path: &Path) -> Result<SimTarget, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display()))
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    if value.get("N").is_some() {
        let g: GeometricPh = serde_json::from_value(value)
            .map_err(|e| CliError::new(EXIT_DIMENSION, format!("{}: {e}", path.display())))?;
        Ok(SimTarget::Geometric(Box::new(g)))
    } else {
        let s: SystemFile = serde_json::from_value(value)
            .map_err(|e| CliError::new(EXIT_DIMENSION, format!("{}: {e}", path.display())))?;
        Ok(SimTarget::System(Box::new(s)))
    }
}

struct SimSummary {
    min_margin: f64,
    max_residual: f64,
    steps: usize,
    csv: String,
}

fn simulate_once(
    target: &SimTarget,
    steps: usize,
    seed: u64,
    inputs_path: Option<&Path>,
    x0_path: Option<&Path>,
    weight_path: Option<&Path>,
    tol: &Tolerances,
) -> Result<SimSummary, CliError> {
    match target {
        SimTarget::Geometric(g) => {
            let m = g.external_dim();
            let inputs = match inputs_path {
                Some(p) => read_inputs_csv(p, m)?,
                None => random_inputs(m, steps, seed),
            };
            let x0 = match x0_path {
                Some(p) => read_json::<Matrix>(p)?,
                None => Matrix::zeros(g.state_dim(), 1),
            };
            let traj = geometric::simulate(g, &x0, &inputs, tol)?;
            let csv = trajectory_csv(
                &traj.states,
                &traj.inputs,
                &traj.outputs,
                &traj.power_residuals,
                &traj.margins,
            );
            Ok(SimSummary {
                min_margin: traj.min_margin(),
                max_residual: traj.max_power_residual(),
                steps: traj.steps(),
                csv,
            })
        }
        SimTarget::System(file) => {
            let file = (**file).clone();
            let is_standard = file.is_standard();
            let desc: DescriptorSystem = file.into_descriptor()?;
            let m = desc.input_dim();
            let inputs = match inputs_path {
                Some(p) => read_inputs_csv(p, m)?,
                None => random_inputs(m, steps, seed),
            };
            let x0 = match x0_path {
                Some(p) => read_json::<Matrix>(p)?,
                None => Matrix::zeros(desc.state_dim(), 1),
            };
            let traj: Trajectory = if is_standard {
                let std_sys = StandardSystem::new(
                    desc.a.clone(),
                    desc.b.clone(),
                    desc.c.clone(),
                    desc.d.clone(),
                    desc.partition,
                )?;
                systems::simulate_standard(&std_sys, &x0, &inputs)?
            } else {
                systems::simulate_descriptor(&desc, &x0, &inputs, tol)?
            };
            let weight = match weight_path {
                Some(p) => load_weight(p, tol)?,
                None => StorageWeight::identity(desc.state_dim()),
            };
            let margins = systems::check_dissipation(&traj, &weight, &desc.e, tol);
            let max_residual = traj.residuals.iter().cloned().fold(0.0f64, f64::max);
            let csv = trajectory_csv(
                &traj.states,
                &traj.inputs,
                &traj.outputs,
                &traj.residuals,
                &margins.margins,
            );
            Ok(SimSummary {
                min_margin: margins.min_margin,
                max_residual,
                steps: traj.steps(),
                csv,
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    path: &Path,
    steps: usize,
    seed: u64,
    inputs: Option<&Path>,
    x0: Option<&Path>,
    weight: Option<&Path>,
    output: Option<&Path>,
    trials: Option<usize>,
    tol: &Tolerances,
    as_json: bool,
) -> CliResult {
    let target = load_sim_target(path)?;
    let n_trials = trials.unwrap_or(1).max(1);
    let mut overall_min = f64::INFINITY;
    let mut overall_res = 0.0f64;
    let mut last_steps = 0;
    let mut summaries = Vec::new();
    for t in 0..n_trials {
        let s = simulate_once(&target, steps, seed + t as u64, inputs, x0, weight, tol)?;
        if t == 0 {
            if let Some(p) = output {
                std::fs::write(p, &s.csv).map_err(|e| {
                    CliError::new(EXIT_PARSE, format!("cannot write {}: {e}", p.display()))
                })?;
            } else if !as_json && n_trials == 1 {
                print!("{}", s.csv);
            }
        }
        overall_min = overall_min.min(s.min_margin);
        overall_res = overall_res.max(s.max_residual);
        last_steps = s.steps;
        summaries.push((seed + t as u64, s.min_margin, s.max_residual));
    }
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "min_margin": overall_min,
                "max_residual": overall_res,
                "steps": last_steps,
                "trials": summaries
                    .iter()
                    .map(|(s, m, r)| json!({"seed": s, "min_margin": m, "max_residual": r}))
                    .collect::<Vec<_>>(),
            }))
            .unwrap()
        );
    } else {
        for (s, m, r) in &summaries {
            if n_trials > 1 {
                println!("trial seed={s} min_margin={m} max_residual={r}");
            }
        }
        println!(
            "min_margin={} max_residual={} steps={}",
            overall_min, overall_res, last_steps
        );
    }
    Ok(if overall_min >= -tol.psd_atol {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn run_discretize(
    path: &Path,
    h: f64,
    lagrangian: Option<&Path>,
    output: Option<&Path>,
    tol: &Tolerances,
    as_json: bool,
) -> CliResult {
    let m: Subspace = read_json(path)?;
    let l: Option<Subspace> = match lagrangian {
        Some(p) => Some(read_json(p)?),
        None => None,
    };
    let out = geometric::discretize_dh(&m, l.as_ref(), h, tol).map_err(|e| match e {
        GeometricError::NotMonotone { .. } | GeometricError::NotLagrangian => {
            CliError::new(EXIT_DIMENSION, e.to_string())
        }
        other => other.into(),
    })?;
    let payload = serde_json::to_string_pretty(&out.relation).unwrap();
    let doc = emit(
        output,
        &payload,
        as_json,
        json!({"h": h, "dim": out.report.dim, "classification": out.report}),
    )?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else if output.is_some() {
        println!(
            "discretized with h={h}: dim {} contractive={} norm_preserving={}",
            out.report.dim,
            flag(out.report.contractive),
            flag(out.report.norm_preserving)
        );
    }
    Ok(EXIT_OK)
}

fn run_dilate(
    path: &Path,
    weight: Option<&Path>,
    find_weight: bool,
    output: Option<&Path>,
    tol: &Tolerances,
    as_json: bool,
) -> CliResult {
    let sys = load_standard(path)?;
    let w = obtain_weight(&sys, weight, find_weight, tol)?;
    let g = geometric::dilate(&sys, &w, tol)?;
    let report = geometric::validate(&g, tol)?;
    let payload = serde_json::to_string_pretty(&g).unwrap();
    let doc = emit(
        output,
        &payload,
        as_json,
        json!({
            "n": g.state_dim(),
            "r": g.resistive_dim(),
            "m": g.external_dim(),
            "valid": report.valid,
        }),
    )?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else if output.is_some() {
        println!(
            "dilated: n={} r={} m={} valid={}",
            g.state_dim(),
            g.resistive_dim(),
            g.external_dim(),
            flag(report.valid)
        );
    }
    Ok(if report.valid { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[allow(clippy::too_many_arguments)]
fn run_interconnect(
    path1: &Path,
    path2: &Path,
    mode: &str,
    coupling: Option<&Path>,
    weight1: Option<&Path>,
    weight2: Option<&Path>,
    find_weight: bool,
    output: Option<&Path>,
    tol: &Tolerances,
    as_json: bool,
) -> CliResult {
    let file1: SystemFile = read_json(path1)?;
    let file2: SystemFile = read_json(path2)?;
    let weights = |s1: &StandardSystem,
                   s2: &StandardSystem|
     -> Result<Option<(StorageWeight, StorageWeight)>, CliError> {
        match (weight1, weight2, find_weight) {
            (Some(p1), Some(p2), _) => Ok(Some((load_weight(p1, tol)?, load_weight(p2, tol)?))),
            (None, None, true) => Ok(Some((
                systems::find_storage_weight(s1, tol, 5000)?,
                systems::find_storage_weight(s2, tol, 5000)?,
            ))),
            (None, None, false) => Ok(None),
            _ => Err(CliError::new(
                EXIT_DIMENSION,
                "provide both --weight1 and --weight2, or --find-weight",
            )),
        }
    };

    match mode {
        "redheffer" => {
            let s1 = file1.into_standard()?;
            let s2 = file2.into_standard()?;
            let w = weights(&s1, &s2)?;
            let red = redheffer_reduce(&s1, &s2, tol)?;
            let n1 = s1.state_dim();
            let n2 = s2.state_dim();
            let mut doc = serde_json::to_value(SystemFile::from_standard(&red.system)).unwrap();
            doc["blocks"] = json!({"x1": [0, n1], "x2": [n1, n2]});
            let payload = serde_json::to_string_pretty(&doc).unwrap();
            let mut pass = true;
            let mut lmi = None;
            if let Some((x1, x2)) = w {
                let x_hat = compose_storage(&x1, &x2);
                let report = systems::is_scattering_ph(&red.system, &x_hat, tol)?;
                pass = report.passes;
                lmi = Some(report.lmi_lambda_max);
            }
            let report_doc = emit(
                output,
                &payload,
                as_json,
                json!({
                    "mode": "redheffer",
                    "invertibility": red.invertibility,
                    "ph_verified": lmi.is_some() && pass,
                    "lmi_lambda_max": lmi,
                }),
            )?;
            if as_json {
                println!("{}", serde_json::to_string_pretty(&report_doc).unwrap());
            } else {
                match lmi {
                    Some(l) => println!(
                        "redheffer reduction: ph={} lmi_lambda_max={l:e}",
                        flag(pass)
                    ),
                    None => println!("redheffer reduction: no weights given, LMI not checked"),
                }
            }
            Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        "feedback" => {
            let s1 = file1.into_standard()?;
            let s2 = file2.into_standard()?;
            let (x1, x2) = weights(&s1, &s2)?.ok_or_else(|| {
                CliError::new(
                    EXIT_DIMENSION,
                    "feedback mode needs --weight1/--weight2 or --find-weight",
                )
            })?;
            let report = closed_loop(&s1, &s2, &x1, &x2, tol)?;
            let n1 = s1.state_dim();
            let n2 = s2.state_dim();
            let closed = StandardSystem::new(
                report.a_hat.clone(),
                Matrix::zeros(n1 + n2, 0),
                Matrix::zeros(0, n1 + n2),
                Matrix::zeros(0, 0),
                None,
            )?;
            let mut doc = serde_json::to_value(SystemFile::from_standard(&closed)).unwrap();
            doc["blocks"] = json!({"x1": [0, n1], "x2": [n1, n2]});
            let payload = serde_json::to_string_pretty(&doc).unwrap();
            let report_doc = emit(
                output,
                &payload,
                as_json,
                json!({
                    "mode": "feedback",
                    "contractive": report.contractive,
                    "weighted_norm": report.weighted_norm,
                    "lmi_lambda_max": report.lmi_lambda_max,
                    "literal_norm_max_ratio": report.literal_norm_max_ratio,
                }),
            )?;
            if as_json {
                println!("{}", serde_json::to_string_pretty(&report_doc).unwrap());
            } else {
                println!(
                    "closed loop: contractive={} weighted_norm={} lmi_lambda_max={:e} literal_norm_max_ratio={}",
                    flag(report.contractive),
                    report.weighted_norm,
                    report.lmi_lambda_max,
                    report.literal_norm_max_ratio
                );
            }
            Ok(if report.contractive {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        "general" => {
            let d1 = file1.into_descriptor()?;
            let d2 = file2.into_descriptor()?;
            let m1a = d1
                .partition
                .ok_or_else(|| {
                    CliError::new(EXIT_DIMENSION, "system 1 carries no port partition")
                })?
                .m1;
            let m1b = d2
                .partition
                .ok_or_else(|| {
                    CliError::new(EXIT_DIMENSION, "system 2 carries no port partition")
                })?
                .m1;
            let relation: CouplingRelation = match coupling {
                Some(p) => {
                    let file: CouplingFile = read_json(p)?;
                    file.into_relation(m1a, m1b)?
                }
                None => {
                    return Err(CliError::new(
                        EXIT_DIMENSION,
                        "mode \"general\" needs --coupling <path>",
                    ))
                }
            };
            let composed = general_interconnect(&d1, &d2, &relation, tol)?;
            let mut doc =
                serde_json::to_value(SystemFile::from_descriptor(&composed.system)).unwrap();
            doc["blocks"] = serde_json::to_value(composed.blocks).unwrap();
            let payload = serde_json::to_string_pretty(&doc).unwrap();
            let report_doc = emit(
                output,
                &payload,
                as_json,
                json!({
                    "mode": "general",
                    "state_dim": composed.system.state_dim(),
                    "causal": true,
                }),
            )?;
            if as_json {
                println!("{}", serde_json::to_string_pretty(&report_doc).unwrap());
            } else {
                println!(
                    "composed descriptor: state_dim={} causal=yes",
                    composed.system.state_dim()
                );
            }
            Ok(EXIT_OK)
        }
        other => Err(CliError::new(
            EXIT_DIMENSION,
            format!("--mode: unknown mode {other:?} (general|redheffer|feedback)"),
        )),
    }
}
