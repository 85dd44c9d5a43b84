//! Batch front end: configuration loading and the four subcommands
//! (`solve`, `sweep`, `verify`, `rearrange-check`), together with the file
//! formats they emit. One config file plus the seeds inside it fully
//! determines a run; outputs carry no timestamps, so reruns are bitwise
//! reproducible.
//!
//! Exit codes: 0 for success (for check commands: everything passed),
//! 1 for configuration, argument, or input-file problems, 2 for numeric
//! outcomes (non-convergence, failed checks).
//!
//! All floats are written with `Display`, which prints the shortest string
//! that parses back to the same bits, so every emitted table is lossless.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::grid::{random_bumps, Boundary, Field, Grid};
use crate::model::{validate_problem, CouplingTerm, Nonlinearity, Potential, PowerTerm, Problem};
use crate::rearrange::{check_rearrangement_inequalities, coupled_rearrange_1d};
use crate::report::VerificationReport;
use crate::solver::{
    solve_ground_state, solve_relaxed_ball, sweep_masses, FlowOptions, InitKind, MassConstraint,
    SolveResult, SweepRecord,
};
use crate::verify::{
    check_binding, check_coercivity, check_power_expansion, check_product_expansion,
    check_subcritical_split, fit_decay, line_fit, overlap_sigma,
};
use crate::{energy, Error, Result};

/// Default worker-thread count for sweeps when `--threads` is absent.
pub const THREADS_ENV: &str = "GROUNDFLOW_THREADS";

const SWEEP_CSV_HEADER: &str = "a1,a2,C,E,lambda1,lambda2,converged";

#[derive(Parser, Debug)]
#[command(
    name = "groundflow",
    about = "Constrained ground states of coupled field equations",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the constrained energy and write the final state
    Solve(CommonArgs),
    /// Solve a grid of mass pairs, with and without the wells
    Sweep(CommonArgs),
    /// Run the configured verification checks
    Verify(CommonArgs),
    /// Audit the rearrangement inequalities on random field pairs
    RearrangeCheck(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Run configuration file (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the configured output directory
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Sweep worker threads; defaults to GROUNDFLOW_THREADS, then all cores
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
    /// Previous run directory (u1.field, u2.field) to warm-start from
    #[arg(long, value_name = "DIR")]
    resume: Option<PathBuf>,
}

/// Parses arguments, runs the selected command, and maps errors to the
/// exit-code contract. The first argument is the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests arrive here too; they are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence(_) | Error::UndefinedMultiplier(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let common = match &cli.command {
        Command::Solve(a) | Command::Sweep(a) | Command::Verify(a) | Command::RearrangeCheck(a) => {
            a
        }
    };
    setup_threads(common)?;
    let config = RunConfig::load(&common.config)?;
    match &cli.command {
        Command::Solve(a) => cmd_solve(&config, a),
        Command::Sweep(a) => cmd_sweep(&config, a),
        Command::Verify(a) => cmd_verify(&config, a),
        Command::RearrangeCheck(a) => cmd_rearrange_check(&config, a),
    }
}

fn setup_threads(args: &CommonArgs) -> Result<()> {
    let count = match args.threads {
        Some(k) => Some(k),
        None => match std::env::var(THREADS_ENV) {
            Ok(raw) => Some(raw.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got {raw:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(k) = count {
        if k == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        // tests drive several runs per process; later calls are no-ops
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    grid: GridSpec,
    problem: ProblemSpec,
    #[serde(default)]
    flow: FlowSpec,
    #[serde(default)]
    output: OutputSpec,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    #[serde(default)]
    verify: Option<VerifySpec>,
    #[serde(default)]
    rearrange: Option<RearrangeSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    dimension: usize,
    half_width: f64,
    points_per_axis: usize,
    #[serde(default = "default_boundary")]
    boundary: String,
}

fn default_boundary() -> String {
    "periodic".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSpec {
    coefficient: f64,
    exponent: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingSpec {
    coefficient: f64,
    exponents: (f64, f64),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSpec {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    depth: f64,
    #[serde(default)]
    width: f64,
    #[serde(default)]
    strength: f64,
    #[serde(default)]
    exponent: f64,
    #[serde(default)]
    sigma: f64,
    #[serde(default)]
    tau: f64,
}

impl PotentialSpec {
    fn build(&self, key: &str) -> Result<Potential> {
        match self.kind.as_deref().unwrap_or("zero") {
            "zero" => Ok(Potential::zero()),
            "gaussian_well" => Potential::gaussian_well(self.depth, self.width)
                .map_err(|e| Error::Config(format!("{key}: {e}"))),
            "power_coulomb" => {
                Potential::power_coulomb(self.strength, self.exponent, self.sigma, self.tau)
                    .map_err(|e| Error::Config(format!("{key}: {e}")))
            }
            other => Err(Error::Config(format!(
                "{key}.kind must be zero, gaussian_well or power_coulomb, got {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSpec {
    masses: [f64; 2],
    #[serde(default)]
    first_terms: Vec<TermSpec>,
    #[serde(default)]
    second_terms: Vec<TermSpec>,
    #[serde(default)]
    coupling_terms: Vec<CouplingSpec>,
    #[serde(default)]
    potential1: PotentialSpec,
    #[serde(default)]
    potential2: PotentialSpec,
}

impl ProblemSpec {
    fn build(&self) -> Result<Problem> {
        let to_power = |t: &TermSpec| PowerTerm {
            coefficient: t.coefficient,
            exponent: t.exponent,
        };
        let nonlinearity = Nonlinearity::new(
            self.first_terms.iter().map(to_power).collect(),
            self.second_terms.iter().map(to_power).collect(),
            self.coupling_terms
                .iter()
                .map(|t| CouplingTerm {
                    coefficient: t.coefficient,
                    exponents: t.exponents,
                })
                .collect(),
        )
        .map_err(|e| Error::Config(format!("problem: {e}")))?;
        let potentials = [
            self.potential1.build("problem.potential1")?,
            self.potential2.build("problem.potential2")?,
        ];
        Problem::new(nonlinearity, potentials, self.masses)
            .map_err(|e| Error::Config(format!("problem.masses: {e}")))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FlowSpec {
    dt: f64,
    max_iters: usize,
    tol_residual: f64,
    tol_energy: f64,
    backtracking: bool,
    seed: u64,
    restarts: usize,
    /// "gaussian" or "random".
    init: String,
    init_width: f64,
    init_bumps: usize,
    /// "sphere" (masses pinned) or "ball" (masses bounded above).
    constraint: String,
}

impl Default for FlowSpec {
    fn default() -> FlowSpec {
        let base = FlowOptions::default();
        FlowSpec {
            dt: base.dt,
            max_iters: base.max_iters,
            tol_residual: base.tol_residual,
            tol_energy: base.tol_energy,
            backtracking: base.backtracking,
            seed: base.seed,
            restarts: base.restarts,
            init: "gaussian".into(),
            init_width: 1.0,
            init_bumps: 3,
            constraint: "sphere".into(),
        }
    }
}

impl FlowSpec {
    fn build(&self, resume: Option<[Field; 2]>) -> Result<(FlowOptions, MassConstraint)> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "flow.dt must be positive, got {}",
                self.dt
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("flow.max_iters must be at least 1".into()));
        }
        for (key, value) in [
            ("flow.tol_residual", self.tol_residual),
            ("flow.tol_energy", self.tol_energy),
            ("flow.init_width", self.init_width),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{key} must be positive, got {value}")));
            }
        }
        let init = match (resume, self.init.as_str()) {
            (Some(fields), _) => InitKind::Given(fields),
            (None, "gaussian") => InitKind::Gaussian {
                width: self.init_width,
            },
            (None, "random") => {
                if self.init_bumps == 0 {
                    return Err(Error::Config("flow.init_bumps must be at least 1".into()));
                }
                InitKind::Random {
                    bumps: self.init_bumps,
                }
            }
            (None, other) => {
                return Err(Error::Config(format!(
                    "flow.init must be gaussian or random, got {other:?}"
                )))
            }
        };
        let constraint = match self.constraint.as_str() {
            "sphere" => MassConstraint::Sphere,
            "ball" => MassConstraint::Ball,
            other => {
                return Err(Error::Config(format!(
                    "flow.constraint must be sphere or ball, got {other:?}"
                )))
            }
        };
        Ok((
            FlowOptions {
                dt: self.dt,
                max_iters: self.max_iters,
                tol_residual: self.tol_residual,
                tol_energy: self.tol_energy,
                backtracking: self.backtracking,
                seed: self.seed,
                restarts: self.restarts.max(1),
                init,
            },
            constraint,
        ))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    directory: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> OutputSpec {
        OutputSpec {
            directory: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    masses1: Vec<f64>,
    masses2: Vec<f64>,
    #[serde(default = "default_chain_len")]
    chain_len: usize,
}

fn default_chain_len() -> usize {
    8
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct VerifySpec {
    /// Any of: decay, overlap, binding, power_expansion, product_expansion,
    /// subcritical_split, coercivity, rearrange.
    checks: Vec<String>,
    /// Run directory of the primary state (with this config's wells).
    state_a: Option<PathBuf>,
    /// Run directory of the comparison state (wells removed).
    state_b: Option<PathBuf>,
    /// Separations for overlap and binding; snapped to the grid.
    r_ladder: Vec<f64>,
    decay_window: (f64, f64),
    power_p: f64,
    product_gammas: (f64, f64),
    product_eta: f64,
    split_epsilons: Vec<f64>,
    samples: usize,
    trials: usize,
    /// Optional sweep table whose energies are held against the floor.
    sweep_csv: Option<PathBuf>,
}

impl Default for VerifySpec {
    fn default() -> VerifySpec {
        VerifySpec {
            checks: Vec::new(),
            state_a: None,
            state_b: None,
            r_ladder: Vec::new(),
            decay_window: (8.0, 14.0),
            power_p: 2.5,
            product_gammas: (2.0, 2.0),
            product_eta: 0.5,
            split_epsilons: vec![0.01],
            samples: 10_000,
            trials: 500,
            sweep_csv: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RearrangeSpec {
    pairs: usize,
    seed: u64,
    bumps: usize,
}

impl Default for RearrangeSpec {
    fn default() -> RearrangeSpec {
        RearrangeSpec {
            pairs: 200,
            seed: 21,
            bumps: 3,
        }
    }
}

impl RunConfig {
    /// Reads and parses a TOML config. Every parse error carries the key
    /// path; nothing numerical runs until the whole file is understood.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Config sections turned into library objects, ready to run.
struct Instance {
    grid: Grid,
    problem: Problem,
    options: FlowOptions,
    constraint: MassConstraint,
    outdir: PathBuf,
}

fn instantiate(
    config: &RunConfig,
    args: &CommonArgs,
    resume: Option<[Field; 2]>,
) -> Result<Instance> {
    let boundary = match config.grid.boundary.as_str() {
        "periodic" => Boundary::Periodic,
        "dirichlet" => Boundary::Dirichlet,
        other => {
            return Err(Error::Config(format!(
                "grid.boundary must be periodic or dirichlet, got {other:?}"
            )))
        }
    };
    let grid = Grid::new(
        config.grid.dimension,
        config.grid.half_width,
        config.grid.points_per_axis,
        boundary,
    )
    .map_err(|e| Error::Config(format!("grid: {e}")))?;
    let problem = config.problem.build()?;
    let admissibility = validate_problem(&problem, &grid);
    if !admissibility.all_ok() {
        return Err(Error::Config(format!(
            "problem: {}",
            admissibility.messages.join("; ")
        )));
    }
    let (options, constraint) = config.flow.build(resume)?;
    let outdir = args
        .output
        .clone()
        .unwrap_or_else(|| config.output.directory.clone());
    Ok(Instance {
        grid,
        problem,
        options,
        constraint,
        outdir,
    })
}

// ---------------------------------------------------------------------------
// solve

fn cmd_solve(config: &RunConfig, args: &CommonArgs) -> Result<i32> {
    let resume = match &args.resume {
        Some(dir) => Some(load_fields(dir)?),
        None => None,
    };
    let inst = instantiate(config, args, resume)?;
    fs::create_dir_all(&inst.outdir)?;
    let result = match inst.constraint {
        MassConstraint::Sphere => solve_ground_state(&inst.problem, &inst.grid, &inst.options)?,
        MassConstraint::Ball => solve_relaxed_ball(&inst.problem, &inst.grid, &inst.options)?,
    };
    write_solve_outputs(&inst.outdir, &result)?;
    if result.converged {
        println!(
            "converged in {} iterations, energy = {}",
            result.iterations, result.energy.total
        );
        Ok(0)
    } else {
        eprintln!(
            "stopped after {} iterations at residual {}",
            result.iterations, result.residual
        );
        Ok(2)
    }
}

fn load_fields(dir: &Path) -> Result<[Field; 2]> {
    let u1 = Field::read_snapshot(&dir.join("u1.field"))?;
    let u2 = Field::read_snapshot(&dir.join("u2.field"))?;
    Ok([u1, u2])
}

fn write_solve_outputs(dir: &Path, result: &SolveResult) -> Result<()> {
    let mut summary = String::new();
    summary.push_str(&format!("converged = {}\n", result.converged));
    summary.push_str(&format!("iterations = {}\n", result.iterations));
    summary.push_str(&format!("residual = {}\n", result.residual));
    summary.push_str(&format!("lambda1 = {}\n", result.lambda[0]));
    summary.push_str(&format!("lambda2 = {}\n", result.lambda[1]));
    summary.push_str(&format!("mass1 = {}\n", result.fields[0].mass()));
    summary.push_str(&format!("mass2 = {}\n", result.fields[1].mass()));
    for (key, value) in result.energy.key_values() {
        summary.push_str(&format!("{key} = {value}\n"));
    }
    fs::write(dir.join("summary.txt"), summary)?;

    let mut history = String::from("iteration,dt,energy,residual\n");
    for sample in &result.history {
        history.push_str(&format!(
            "{},{},{},{}\n",
            sample.iteration, sample.dt, sample.energy, sample.residual
        ));
    }
    fs::write(dir.join("history.csv"), history)?;

    result.fields[0].write_snapshot(&dir.join("u1.field"))?;
    result.fields[1].write_snapshot(&dir.join("u2.field"))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

fn cmd_sweep(config: &RunConfig, args: &CommonArgs) -> Result<i32> {
    let spec = config.sweep.as_ref().ok_or_else(|| {
        Error::Config("sweep: section missing; provide [sweep] with masses1 and masses2".into())
    })?;
    for (key, list) in [("sweep.masses1", &spec.masses1), ("sweep.masses2", &spec.masses2)] {
        if list.is_empty() {
            return Err(Error::Config(format!("{key} must not be empty")));
        }
        if let Some(bad) = list.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::Config(format!(
                "{key} entries must be nonnegative and finite, got {bad}"
            )));
        }
    }
    if spec.chain_len == 0 {
        return Err(Error::Config("sweep.chain_len must be at least 1".into()));
    }
    let inst = instantiate(config, args, None)?;
    fs::create_dir_all(&inst.outdir)?;
    let mut pairs = Vec::with_capacity(spec.masses1.len() * spec.masses2.len());
    for &a1 in &spec.masses1 {
        for &a2 in &spec.masses2 {
            pairs.push([a1, a2]);
        }
    }
    let records = sweep_masses(&inst.problem, &inst.grid, &inst.options, &pairs, spec.chain_len)?;
    write_sweep_csv(&inst.outdir.join("sweep.csv"), &records)?;
    write_sweep_rows(&inst.outdir, &spec.masses2, &records)?;
    let audit = sweep_audit(spec.masses1.len(), spec.masses2.len(), &records);
    fs::write(inst.outdir.join("audit.txt"), audit.render())?;

    let mut failures = 0;
    for record in records.iter().filter(|r| !r.converged) {
        failures += 1;
        eprintln!(
            "sweep point ({}, {}) did not converge",
            record.masses[0], record.masses[1]
        );
    }
    println!(
        "{} points, {} failures, table in {}",
        records.len(),
        failures,
        inst.outdir.join("sweep.csv").display()
    );
    Ok(if failures == 0 { 0 } else { 2 })
}

fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.masses[0],
            r.masses[1],
            r.trapped_energy,
            r.free_energy,
            r.lambda[0],
            r.lambda[1],
            r.converged
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a sweep table back. Rows restore everything the floor checks
/// need; iteration counts are not stored in the CSV and read as zero.
pub fn parse_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(SWEEP_CSV_HEADER) => {}
        other => {
            return Err(Error::Config(format!(
                "{}: expected header {SWEEP_CSV_HEADER:?}, got {other:?}",
                path.display()
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::Config(format!(
                "{}: line {} has {} fields, expected 7",
                path.display(),
                lineno + 2,
                parts.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            parts[i].parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "{}: line {} field {} is not a number: {:?}",
                    path.display(),
                    lineno + 2,
                    i + 1,
                    parts[i]
                ))
            })
        };
        records.push(SweepRecord {
            masses: [num(0)?, num(1)?],
            trapped_energy: num(2)?,
            free_energy: num(3)?,
            lambda: [num(4)?, num(5)?],
            iterations: 0,
            converged: parts[6].trim() == "true",
        });
    }
    Ok(records)
}

/// Two-column series for plotting: one file per second-mass value, trapped
/// and free energies against the first mass.
fn write_sweep_rows(dir: &Path, masses2: &[f64], records: &[SweepRecord]) -> Result<()> {
    for (j, &a2) in masses2.iter().enumerate() {
        let mut trapped = format!("# trapped energy vs a1 at a2 = {a2}\n");
        let mut free = format!("# free energy vs a1 at a2 = {a2}\n");
        for r in records.iter().skip(j).step_by(masses2.len()) {
            trapped.push_str(&format!("{} {}\n", r.masses[0], r.trapped_energy));
            free.push_str(&format!("{} {}\n", r.masses[0], r.free_energy));
        }
        fs::write(dir.join(format!("trapped_vs_a1_row{j}.dat")), trapped)?;
        fs::write(dir.join(format!("free_vs_a1_row{j}.dat")), free)?;
    }
    Ok(())
}

/// Monotonicity and continuity audit over the row-major sweep table:
/// minimum energy drop along each mass axis (strict decrease expected) and
/// the largest adjacent jump (a continuity indicator, informational).
fn sweep_audit(rows: usize, cols: usize, records: &[SweepRecord]) -> VerificationReport {
    let mut report = VerificationReport::default();
    let value = |i: usize, j: usize| records[i * cols + j].trapped_energy;
    let mut min_drop_axis1 = f64::INFINITY;
    let mut min_drop_axis2 = f64::INFINITY;
    let mut max_jump = 0.0f64;
    for j in 0..cols {
        for i in 0..rows.saturating_sub(1) {
            let drop = value(i, j) - value(i + 1, j);
            min_drop_axis1 = min_drop_axis1.min(drop);
            max_jump = max_jump.max(drop.abs());
        }
    }
    for i in 0..rows {
        for j in 0..cols.saturating_sub(1) {
            let drop = value(i, j) - value(i, j + 1);
            min_drop_axis2 = min_drop_axis2.min(drop);
            max_jump = max_jump.max(drop.abs());
        }
    }
    if rows > 1 {
        report.push(
            "sweep_monotone_axis1",
            min_drop_axis1,
            0.0,
            0.0,
            min_drop_axis1 > 0.0,
        );
    }
    if cols > 1 {
        report.push(
            "sweep_monotone_axis2",
            min_drop_axis2,
            0.0,
            0.0,
            min_drop_axis2 > 0.0,
        );
    }
    report.push("sweep_max_adjacent_jump", max_jump, f64::INFINITY, 0.0, true);
    report
}

// ---------------------------------------------------------------------------
// verify

fn cmd_verify(config: &RunConfig, args: &CommonArgs) -> Result<i32> {
    let spec = config.verify.as_ref().ok_or_else(|| {
        Error::Config("verify: section missing; provide [verify] with a checks list".into())
    })?;
    let inst = instantiate(config, args, None)?;
    fs::create_dir_all(&inst.outdir)?;
    let mut state_a: Option<SolveResult> = None;
    let mut state_b: Option<SolveResult> = None;
    let mut merged = VerificationReport::default();
    for check in &spec.checks {
        match check.as_str() {
            "decay" => {
                let a = cached_state(&mut state_a, &spec.state_a, "verify.state_a", &inst)?;
                decay_rows(&mut merged, &inst, a, spec);
            }
            "overlap" => {
                let a = cached_state(&mut state_a, &spec.state_a, "verify.state_a", &inst)?
                    .clone();
                let b = cached_state(&mut state_b, &spec.state_b, "verify.state_b", &inst)?;
                overlap_rows(&mut merged, &inst, &a, b, spec)?;
            }
            "binding" => {
                let a = cached_state(&mut state_a, &spec.state_a, "verify.state_a", &inst)?
                    .clone();
                let b = cached_state(&mut state_b, &spec.state_b, "verify.state_b", &inst)?;
                let ladder: Vec<f64> = spec.r_ladder.iter().map(|&r| inst.grid.snap(r)).collect();
                merged.merge(check_binding(&inst.problem, &a, b, &ladder)?);
            }
            "power_expansion" => {
                merged.merge(check_power_expansion(spec.power_p, spec.samples)?);
            }
            "product_expansion" => {
                merged.merge(check_product_expansion(
                    spec.product_gammas.0,
                    spec.product_gammas.1,
                    spec.product_eta,
                    spec.samples,
                )?);
            }
            "subcritical_split" => {
                merged.merge(check_subcritical_split(
                    &inst.problem.nonlinearity,
                    inst.grid.dimension(),
                    &spec.split_epsilons,
                    spec.samples,
                )?);
            }
            "coercivity" => {
                let sweep = match &spec.sweep_csv {
                    Some(path) => parse_sweep_csv(path)?,
                    None => Vec::new(),
                };
                merged.merge(check_coercivity(
                    &inst.problem,
                    &inst.grid,
                    spec.trials,
                    &sweep,
                )?);
            }
            "rearrange" => {
                let a = cached_state(&mut state_a, &spec.state_a, "verify.state_a", &inst)?
                    .clone();
                merged.merge(rearrange_rows(&a, &inst)?);
            }
            other => {
                return Err(Error::Config(format!(
                    "verify.checks: unknown check {other:?}; valid names are decay, overlap, \
                     binding, power_expansion, product_expansion, subcritical_split, coercivity, \
                     rearrange"
                )))
            }
        }
    }
    let text = merged.render();
    fs::write(inst.outdir.join("verify_report.txt"), &text)?;
    print!("{text}");
    Ok(if merged.all_pass() { 0 } else { 2 })
}

fn cached_state<'a>(
    slot: &'a mut Option<SolveResult>,
    dir: &Option<PathBuf>,
    key: &str,
    inst: &Instance,
) -> Result<&'a SolveResult> {
    if slot.is_none() {
        let dir = dir
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{key} is required by the requested checks")))?;
        // the comparison state was minimized with the wells removed, and
        // its recovered multipliers must reflect that
        let problem = if key == "verify.state_b" {
            inst.problem.without_potentials()
        } else {
            inst.problem.clone()
        };
        *slot = Some(load_state(dir, key, &problem, inst)?);
    }
    Ok(slot.as_ref().expect("just filled"))
}

/// Rebuilds a `SolveResult` from saved snapshots. Energy and multipliers
/// are recomputed from the fields, so the summary file is not needed; the
/// iteration history is gone and reads as empty.
fn load_state(dir: &Path, key: &str, problem: &Problem, inst: &Instance) -> Result<SolveResult> {
    let [u1, u2] = load_fields(dir)?;
    if !u1.grid().same_layout(&inst.grid) || !u2.grid().same_layout(&inst.grid) {
        return Err(Error::Config(format!(
            "{key}: snapshot grid does not match the [grid] section"
        )));
    }
    let energy = energy::breakdown(&u1, &u2, problem)?;
    let gradient = energy::gradient(&u1, &u2, problem)?;
    let mut lambda = [f64::NAN; 2];
    for (i, u) in [&u1, &u2].into_iter().enumerate() {
        let mass = u.mass();
        if mass > 0.0 {
            lambda[i] = -gradient[i].inner(u)? / mass;
        }
    }
    let residual = energy::residual(&gradient, &u1, &u2, lambda).unwrap_or(f64::NAN);
    Ok(SolveResult {
        fields: [u1, u2],
        lambda,
        energy,
        residual,
        iterations: 0,
        converged: true,
        history: Vec::new(),
    })
}

/// Tail slopes of both components against the effective frequencies
/// derived from the recovered multipliers; 10 percent relative tolerance.
fn decay_rows(report: &mut VerificationReport, inst: &Instance, state: &SolveResult, spec: &VerifySpec) {
    let (f1, f2) = inst
        .problem
        .nonlinearity
        .effective_frequencies(state.lambda[0], state.lambda[1]);
    for (i, (u, fbar)) in [(&state.fields[0], f1), (&state.fields[1], f2)]
        .into_iter()
        .enumerate()
    {
        let name = format!("decay_slope_u{}", i + 1);
        if u.mass() <= 0.0 {
            continue;
        }
        let rate = fbar.sqrt();
        if !(rate.is_finite() && rate > 0.0) {
            report.push(name, f64::NAN, f64::NAN, 0.1, false);
            continue;
        }
        match fit_decay(u, spec.decay_window, rate) {
            Ok(fit) => {
                let pass = fit.trusted() && fit.relative_gap() <= 0.1;
                report.push(name, fit.slope, -rate, 0.1, pass);
                report.push(
                    format!("decay_fit_r2_u{}", i + 1),
                    fit.r_squared,
                    0.99,
                    0.0,
                    fit.trusted(),
                );
            }
            Err(e) => {
                eprintln!("decay fit for component {}: {e}", i + 1);
                report.push(name, f64::NAN, -rate, 0.1, false);
            }
        }
    }
}

/// Overlap integrals of the first components over the separation ladder.
/// The integral is dominated by the slower of the two tails, so the
/// log-slope must match the smaller effective decay rate within 10 percent.
fn overlap_rows(
    report: &mut VerificationReport,
    inst: &Instance,
    state_a: &SolveResult,
    state_b: &SolveResult,
    spec: &VerifySpec,
) -> Result<()> {
    if spec.r_ladder.len() < 2 {
        return Err(Error::Config(
            "verify.r_ladder needs at least two separations for the overlap slope".into(),
        ));
    }
    let rate_of = |state: &SolveResult| {
        let (f1, _) = inst
            .problem
            .nonlinearity
            .effective_frequencies(state.lambda[0], state.lambda[1]);
        f1.sqrt()
    };
    let rate = rate_of(state_a).min(rate_of(state_b));
    let mut points = Vec::with_capacity(spec.r_ladder.len());
    let mut positive = true;
    for &raw in &spec.r_ladder {
        let r = inst.grid.snap(raw);
        let sigma = overlap_sigma(&state_a.fields[0], &state_b.fields[0], r)?;
        report.push(format!("overlap_sigma_r{r}"), sigma, 0.0, 0.0, sigma > 0.0);
        if sigma > 0.0 {
            points.push((r, sigma.ln()));
        } else {
            positive = false;
        }
    }
    if !positive || points.len() < 2 {
        report.push("overlap_slope", f64::NAN, -rate, 0.1, false);
        return Ok(());
    }
    let (slope, _, _) = line_fit(&points);
    let pass = rate.is_finite()
        && rate > 0.0
        && (slope + rate).abs() <= 0.1 * rate;
    report.push("overlap_slope", slope, -rate, 0.1, pass);
    Ok(())
}

/// Interaction, potential, and gradient rows for the saved pair, plus
/// exact-additivity rows for the coupled rearrangement. Minimizers are
/// positive on every cell and two of them cannot share one grid, so the
/// additivity rows run on copies truncated to the largest half of the
/// cells per component.
fn rearrange_rows(state: &SolveResult, inst: &Instance) -> Result<VerificationReport> {
    let [u1, u2] = &state.fields;
    let mut report = check_rearrangement_inequalities(u1, u2, &inst.problem)?;
    let keep = inst.grid.len() / 2;
    let t1 = keep_largest(u1, keep);
    let t2 = keep_largest(u2, keep);
    let star = coupled_rearrange_1d(&t1, &t2)?;
    let volume = inst.grid.cell_volume();
    for p in [2.0, 3.0, 4.0] {
        let lp = |f: &Field| -> f64 {
            f.values().iter().map(|v| v.abs().powf(p)).sum::<f64>() * volume
        };
        let total = lp(&t1) + lp(&t2);
        let gap = (lp(&star) - total).abs();
        let tolerance = 1e-12 * (1.0 + total);
        report.push(
            format!("coupled_lp_additivity_p{p}"),
            gap,
            0.0,
            tolerance,
            gap <= tolerance,
        );
    }
    Ok(report)
}

fn keep_largest(field: &Field, keep: usize) -> Field {
    let values = field.values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut out = Field::zeros(field.grid());
    for &k in order.iter().take(keep) {
        out.values_mut()[k] = values[k];
    }
    out
}

// ---------------------------------------------------------------------------
// rearrange-check

fn cmd_rearrange_check(config: &RunConfig, args: &CommonArgs) -> Result<i32> {
    let spec = config.rearrange.clone().unwrap_or_default();
    if spec.pairs == 0 {
        return Err(Error::Config("rearrange.pairs must be at least 1".into()));
    }
    if spec.bumps == 0 {
        return Err(Error::Config("rearrange.bumps must be at least 1".into()));
    }
    let inst = instantiate(config, args, None)?;
    fs::create_dir_all(&inst.outdir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut violations = 0usize;
    let mut min_interaction = f64::INFINITY;
    let mut min_potential = f64::INFINITY;
    let mut min_gradient = f64::INFINITY;
    let mut max_additivity_gap = 0.0f64;
    let keep = inst.grid.len() / 2;
    let volume = inst.grid.cell_volume();
    for pair in 0..spec.pairs {
        let u = random_bumps(&inst.grid, &mut rng, spec.bumps);
        let v = random_bumps(&inst.grid, &mut rng, spec.bumps);
        let single = check_rearrangement_inequalities(&u, &v, &inst.problem)?;
        for check in &single.checks {
            if !check.pass {
                violations += 1;
                eprintln!(
                    "pair {pair}: {} measured {} against {}",
                    check.name, check.measured, check.bound
                );
            }
            match check.name.as_str() {
                "rearrange_interaction_gain" => {
                    min_interaction = min_interaction.min(check.measured)
                }
                "rearrange_potential_gain" => min_potential = min_potential.min(check.measured),
                "rearrange_gradient_drop" => min_gradient = min_gradient.min(check.measured),
                _ => {}
            }
        }
        // exact additivity of the coupled rearrangement; 1d only, and the
        // dimension guard in the op is exactly the error this command
        // reports on higher-dimensional grids
        let t1 = keep_largest(&u, keep);
        let t2 = keep_largest(&v, keep);
        let star = coupled_rearrange_1d(&t1, &t2)?;
        for p in [2.0, 3.0, 4.0] {
            let lp = |f: &Field| -> f64 {
                f.values().iter().map(|x| x.abs().powf(p)).sum::<f64>() * volume
            };
            let total = lp(&t1) + lp(&t2);
            let gap = (lp(&star) - total).abs();
            if gap > 1e-12 * (1.0 + total) {
                violations += 1;
                eprintln!("pair {pair}: additivity gap {gap} at p = {p}");
            }
            max_additivity_gap = max_additivity_gap.max(gap / (1.0 + total));
        }
    }
    let mut report = VerificationReport::default();
    report.push("rearrange_pairs", spec.pairs as f64, 1.0, 0.0, true);
    report.push(
        "rearrange_violations",
        violations as f64,
        0.0,
        0.0,
        violations == 0,
    );
    report.push(
        "rearrange_min_interaction_gain",
        min_interaction,
        0.0,
        0.0,
        min_interaction >= 0.0 || violations == 0,
    );
    report.push(
        "rearrange_min_potential_gain",
        min_potential,
        0.0,
        0.0,
        min_potential >= 0.0 || violations == 0,
    );
    report.push(
        "rearrange_min_gradient_drop",
        min_gradient,
        0.0,
        0.0,
        min_gradient.is_finite(),
    );
    report.push(
        "rearrange_max_relative_additivity_gap",
        max_additivity_gap,
        1e-12,
        0.0,
        max_additivity_gap <= 1e-12,
    );
    let text = report.render();
    fs::write(inst.outdir.join("rearrange_report.txt"), &text)?;
    print!("{text}");
    Ok(if report.all_pass() { 0 } else { 2 })
}
