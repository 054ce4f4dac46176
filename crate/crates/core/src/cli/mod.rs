//! Batch driver. Subcommands read a run configuration (flags override it),
//! run one pipeline stage and write reports into the output directory.
//!
//! Exit status: 0 pass, 1 conclusion failure, 2 hypothesis failure,
//! 3 usage or I/O error.

pub mod config;
mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use crate::comparison::{contact_propagation, scenario_graph, ScenarioFile, CONTACT_TOL, SCENARIO_TOL};
use crate::error::{Error, Result};
use crate::foliation::Generator;
use crate::graph::build_graph;
use crate::groundstate::{probe_configs, verify_theorem, write_reports_csv};
use crate::hull::solver::solve_hull;
use crate::hull::HullFunction;
use crate::model::file::Model;
use crate::model::probes::ferromagnetic_check;
use crate::model::{LatticeConfiguration, Medium};
use crate::site::cube;

pub use config::RunConfig;
pub use report::cmd_report;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONCLUSION: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fk-ground", version, about = "Foliations of equilibria and ground-state certification for Frenkel-Kontorova lattice models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Model file; overrides the config.
    #[arg(short, long)]
    pub model: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Worker threads (0 picks automatically); overrides the config.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed for probe configurations; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the hull equation of a quasi-periodic model.
    SolveHull(Common),
    /// Check the hypotheses and certify foliation members as ground states.
    Verify(Common),
    /// Turn the outputs of earlier runs into plot-ready CSV tables.
    Report(Common),
    /// Validate a model file and report its sign and connectivity checks.
    CheckModel(Common),
    /// Run contact propagation on a scenario file.
    Contact {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Maps an error to the exit-status contract.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Hypothesis { .. }
        | Error::Precondition(_)
        | Error::Resonance { .. }
        | Error::Convergence { .. }
        | Error::MemberRejected { .. } => EXIT_HYPOTHESIS,
        Error::Search { .. }
        | Error::Counterexample { .. }
        | Error::Stall { .. }
        | Error::Unreachable { .. }
        | Error::NonFinite { .. } => EXIT_CONCLUSION,
        Error::Contract(_) | Error::InvalidModel(_) | Error::Format(_) | Error::MissingInput(_) | Error::Io(_) => {
            EXIT_USAGE
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &common.model {
        cfg.model = Some(m.clone());
    }
    if let Some(o) = &common.output {
        cfg.output = o.clone();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_model(cfg: &RunConfig) -> Result<Model> {
    let p = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Contract("no model file given (config `model` or --model)".into()))?;
    Model::load(p)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let common = match &cli.command {
        Command::SolveHull(c)
        | Command::Verify(c)
        | Command::Report(c)
        | Command::CheckModel(c)
        | Command::Contact { common: c, .. } => c,
    };
    let cfg = match resolve(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::SolveHull(_) => cmd_solve_hull(&cfg),
        Command::Verify(_) => cmd_verify(&cfg),
        Command::Report(_) => cmd_report(&cfg),
        Command::CheckModel(_) => cmd_check_model(&cfg),
        Command::Contact { scenario, .. } => cmd_contact(&cfg, scenario),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            let mut body = json!({
                "kind": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            });
            if let Error::Hypothesis { name, .. } = &e {
                body["hypothesis"] = json!(name);
            }
            if let Err(w) = write_json(&cfg.output.join("error.json"), &body) {
                eprintln!("error: could not write error report: {w}");
            }
            code
        }
    }
}

/// Solves the hull equation; writes `hull.toml`, `hull_convergence.csv`
/// and `hull_summary.json`.
pub fn cmd_solve_hull(cfg: &RunConfig) -> Result<i32> {
    let model = load_model(cfg)?;
    let v = match model.spec.medium() {
        Medium::QuasiPeriodic(v) => v.clone(),
        _ => return Err(Error::InvalidModel("solve-hull needs a quasi-periodic medium".into())),
    };
    let omega = model
        .omega
        .ok_or_else(|| Error::InvalidModel("solve-hull needs `omega` in the model".into()))?;
    let sol = solve_hull(&v, omega, cfg.hull.schedule(v.epsilon()), &cfg.hull.options())?;
    write_file(&cfg.output.join("hull.toml"), sol.hull.to_toml()?.as_bytes())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stage", "epsilon", "step", "residual", "linear_iterations", "converged"])
        .map_err(crate::foliation::csv_err)?;
    for (s, st) in sol.stages.iter().enumerate() {
        for (k, r) in st.residuals.iter().enumerate() {
            let lin = st.linear_iterations.get(k).map(|n| n.to_string()).unwrap_or_default();
            w.write_record([
                s.to_string(),
                st.epsilon.to_string(),
                k.to_string(),
                r.to_string(),
                lin,
                st.converged.to_string(),
            ])
            .map_err(crate::foliation::csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_file(&cfg.output.join("hull_convergence.csv"), &bytes)?;

    let summary = json!({
        "command": "solve-hull",
        "model": model.spec.label(),
        "epsilon": v.epsilon(),
        "omega": omega,
        "n_trunc": cfg.hull.n_trunc,
        "newton_steps": sol.newton_steps(),
        "continuation_stages": sol.stages.len(),
        "residual": sol.residual,
        "refined_residual": sol.refined_residual,
        "quadratic_constant": sol.quadratic_constant(),
        "ratios": sol.ratios(),
        "monotonicity_margin": sol.margin,
        "sup_norm": sol.sup_norm,
        "min_divisor": sol.min_divisor,
        "coefficients": sol.hull.modes().len(),
    });
    write_json(&cfg.output.join("hull_summary.json"), &summary)?;
    println!(
        "hull solved: residual {:e} after {} Newton steps, margin {:.6}, sup norm {:.6e}",
        sol.residual,
        sol.newton_steps(),
        sol.margin,
        sol.sup_norm
    );
    Ok(EXIT_PASS)
}

/// The family whose members are verified.
fn family(model: &Model, cfg: &RunConfig) -> Result<(Generator, String)> {
    let path = cfg.hull_path();
    let hull = match model.spec.medium() {
        Medium::QuasiPeriodic(v) if path.exists() || !v.is_zero() => Some(Arc::new(HullFunction::load(&path)?)),
        _ => None,
    };
    let g = Generator::for_model(model, hull).map_err(|e| match e {
        Error::Contract(m) => Error::Contract(format!("{}: {m}", path.display())),
        e => e,
    })?;
    let source = match &g {
        Generator::Hull(_) => format!("hull {}", path.display()),
        Generator::Linear { .. } => "linear".into(),
    };
    Ok((g, source))
}

/// Runs the hypothesis checks and the window verification; writes
/// `foliation.csv`, `graph_edges.txt`, `groundstate.csv` and `summary.json`.
pub fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let model = load_model(cfg)?;
    let (generator, source) = family(&model, cfg)?;
    let opts = cfg.verify_options(model.tolerances.sign, model.tolerances.edge_threshold);
    let start = std::time::Instant::now();
    let r = verify_theorem(&model.spec, generator, &opts)?;
    info!("verification took {:.2?}", start.elapsed());

    if cfg.report.csv() {
        let mut buf = Vec::new();
        r.family.write_csv(&mut buf)?;
        write_file(&cfg.output.join("foliation.csv"), &buf)?;
        let mut buf = Vec::new();
        write_reports_csv(&r.reports, &mut buf)?;
        write_file(&cfg.output.join("groundstate.csv"), &buf)?;
    }
    write_file(&cfg.output.join("graph_edges.txt"), r.edges.as_bytes())?;
    if cfg.report.json() {
        let summary = json!({
            "command": "verify",
            "model": model.spec.label(),
            "family": source,
            "seed": cfg.seed,
            "hypotheses": r.hypotheses,
            "coverage": r.coverage,
            "violations": r.violations,
            "worst": r.worst,
            "monotone": r.monotone,
            "max_stationarity": r.max_stationarity,
            "gamma_tol": opts.gamma_tol,
            "stationarity_tol": opts.stationarity_tol,
            "pass": r.pass,
        });
        write_json(&cfg.output.join("summary.json"), &summary)?;
    }
    match r.worst {
        Some((b, w, g)) if !r.pass => {
            println!("verification FAILED: {} violations, worst gamma {g:e} at beta {b}, window size {w}", r.violations);
            Ok(EXIT_CONCLUSION)
        }
        _ => {
            println!(
                "verification passed: {} minimizations, max gamma {:e}, max stationarity {:e}",
                r.reports.len(),
                r.worst.map_or(0.0, |w| w.2),
                r.max_stationarity
            );
            Ok(if r.pass { EXIT_PASS } else { EXIT_CONCLUSION })
        }
    }
}

/// Validates a model and prints its sign, connectivity and resonance checks.
pub fn cmd_check_model(cfg: &RunConfig) -> Result<i32> {
    let model = load_model(cfg)?;
    let spec = &model.spec;
    let dim = spec.dim();
    let block = cube(dim, -20, 20);
    let base = LatticeConfiguration::linear(dim, model.omega.unwrap_or(0.0), 0.0);
    let probes = probe_configs(&[base], &block, 8, cfg.seed);
    let ferro = ferromagnetic_check(spec, &probes, &block, model.tolerances.sign)?;
    let graph = build_graph(spec, &probes, &block, model.tolerances.edge_threshold)?;
    let trans = graph.is_transitive();
    let resonance = model.potential.as_ref().and_then(|v| v.nonresonance());
    let summary = json!({
        "command": "check-model",
        "model": spec.label(),
        "dim": dim,
        "range_bound": spec.range_bound(),
        "translation_invariant": spec.translation_invariant(),
        "ferromagnetic": ferro,
        "transitivity": trans,
        "smallest_frequency": resonance,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    if !ferro.is_ferromagnetic {
        eprintln!("ferromagnetic_check failed");
        return Ok(EXIT_HYPOTHESIS);
    }
    if !trans.transitive {
        eprintln!("interaction graph is not connected");
        return Ok(EXIT_HYPOTHESIS);
    }
    Ok(EXIT_PASS)
}

/// Runs contact propagation on a scenario; writes `contact.json`.
pub fn cmd_contact(cfg: &RunConfig, scenario: &Path) -> Result<i32> {
    let model = load_model(cfg)?;
    let file = ScenarioFile::load(scenario)?;
    let sc = file.build(scenario.parent().unwrap_or(Path::new(".")))?;
    let graph = scenario_graph(&model.spec, &sc)?;
    let r = contact_propagation(&model.spec, &graph, &sc, SCENARIO_TOL, CONTACT_TOL)?;
    write_json(
        &cfg.output.join("contact.json"),
        &json!({ "command": "contact", "model": model.spec.label(), "report": r }),
    )?;
    println!(
        "contact propagation certified {} sites ({} on the frontier)",
        r.certified.len(),
        r.frontier.len()
    );
    Ok(EXIT_PASS)
}
