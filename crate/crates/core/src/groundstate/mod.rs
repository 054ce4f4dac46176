//! Numerical certification that foliation members are ground states:
//! hypothesis checks, then finite-window minimization of the relative
//! energy over a schedule of nested connected windows.

mod local;
pub mod minimize;

use std::io::Write;

use log::info;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::foliation::{build_foliation, check_axioms, AxiomReport, FoliationFamily, Generator};
use crate::graph::{build_graph, InteractionGraph, TransitivityReport};
use crate::model::probes::{coercivity_probe, ferromagnetic_check, FerromagneticReport};
use crate::model::{InteractionSpec, LatticeConfiguration, Perturbation};
use crate::site::{cube, Site, SiteSet};

pub use local::LocalProblem;
pub use minimize::{
    brute_force_oracle, minimize_window, MinimizeOptions, OracleResult, WindowMinimum, COERCIVITY_RAYS,
};

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateReport {
    pub beta: f64,
    pub window_size: usize,
    pub window: SiteSet,
    pub phi_star: Perturbation,
    pub gamma_star: f64,
    pub stationarity: f64,
    pub pass: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOptions {
    /// β values at which windows are minimized.
    pub betas: Vec<f64>,
    /// β grid of the foliation whose axioms are checked.
    pub foliation_grid: Vec<f64>,
    /// Largest number of seed sites per window.
    pub max_window: usize,
    pub gamma_tol: f64,
    pub stationarity_tol: f64,
    /// Member admission tolerance; `None` picks the family default.
    pub equilibrium_tol: Option<f64>,
    pub sign_tol: f64,
    pub edge_threshold: f64,
    pub a4_targets: Vec<f64>,
    /// Random perturbed probes added to the members for the sign checks.
    pub random_probes: usize,
    pub seed: u64,
    /// Half-width of the site block used for the axiom and sign checks.
    pub foliation_radius: i64,
    pub minimize: MinimizeOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            betas: crate::foliation::uniform_grid(-1.0, 1.0, 21),
            foliation_grid: crate::foliation::default_beta_grid(101),
            max_window: 15,
            gamma_tol: 1e-8,
            stationarity_tol: 1e-8,
            equilibrium_tol: None,
            sign_tol: crate::model::probes::DEFAULT_SIGN_TOL,
            edge_threshold: crate::graph::DEFAULT_EDGE_THRESHOLD,
            a4_targets: crate::foliation::default_a4_targets(),
            random_probes: 8,
            seed: 0,
            foliation_radius: 50,
            minimize: MinimizeOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivitySummary {
    pub pass: bool,
    pub rays_checked: usize,
    pub failure: Option<(f64, Site)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Hypotheses {
    pub ferromagnetic: FerromagneticReport,
    pub transitivity: TransitivityReport,
    pub axioms: AxiomReport,
    pub coercivity: CoercivitySummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct Coverage {
    pub betas: usize,
    pub max_window: usize,
    pub minimizations: usize,
    pub largest_window_sites: usize,
    pub statement: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub hypotheses: Hypotheses,
    pub reports: Vec<GroundStateReport>,
    pub violations: usize,
    /// `(β, window size, Γ*)` of the largest Γ*.
    pub worst: Option<(f64, usize, f64)>,
    pub monotone: bool,
    pub max_stationarity: f64,
    pub coverage: Coverage,
    pub pass: bool,
    #[serde(skip)]
    pub family: FoliationFamily,
    /// Edge list of the interaction graph on the check block.
    #[serde(skip)]
    pub edges: String,
}

/// Slack allowed when checking that Γ* does not decrease as windows grow.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Seed sites ordered by distance from the origin, then lexicographically.
pub fn seed_order(dim: usize, count: usize) -> Vec<Site> {
    let mut r = 0;
    loop {
        let c = cube(dim, -r, r);
        if c.len() >= count {
            let mut v: Vec<Site> = c.into_iter().collect();
            let origin = Site::origin(dim);
            v.sort_by_key(|s| (s.cheb_dist(&origin), *s));
            v.truncate(count);
            return v;
        }
        r += 1;
    }
}

/// Nested windows: the connected hulls of the first `1..=max` seed sites.
pub fn window_schedule(graph: &InteractionGraph, dim: usize, max: usize) -> Result<Vec<SiteSet>> {
    let seeds = seed_order(dim, max);
    let mut out = Vec::with_capacity(max);
    let mut acc = SiteSet::new();
    for s in seeds {
        acc.insert(s);
        out.push(graph.connected_hull(&acc)?);
    }
    Ok(out)
}

fn hypothesis(name: &str, detail: impl Into<String>) -> Error {
    Error::Hypothesis {
        name: name.into(),
        detail: detail.into(),
    }
}

/// Probe configurations for the sign checks: the sampled members plus
/// seeded random perturbations of them.
pub fn probe_configs(
    members: &[LatticeConfiguration],
    window: &SiteSet,
    extra: usize,
    seed: u64,
) -> Vec<LatticeConfiguration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = members.to_vec();
    for _ in 0..extra {
        let k = rng.random_range(0..members.len());
        let phi: Perturbation = window
            .iter()
            .map(|s| (*s, rng.random_range(-1.0..1.0)))
            .collect();
        out.push(members[k].perturbed(&phi));
    }
    out
}

/// Runs the hypothesis checks in order (sign, transitivity, foliation
/// axioms, coercivity) and then minimizes every (β, window) pair.
///
/// A failed hypothesis aborts with [`Error::Hypothesis`] naming it; the
/// conclusion is then not tested.
pub fn verify_theorem(spec: &InteractionSpec, generator: Generator, opts: &VerifyOptions) -> Result<VerifyReport> {
    validate(opts)?;
    let clock = std::time::Instant::now();
    let dim = spec.dim();
    let reach = spec.range_bound() as i64;
    let seeds: SiteSet = seed_order(dim, opts.max_window).into_iter().collect();
    let seed_radius = seeds.iter().map(|s| s.cheb_dist(&Site::origin(dim))).max().unwrap_or(0) as i64;
    let radius = opts.foliation_radius.max(seed_radius + 2 * reach);
    let block = cube(dim, -radius, radius);

    let members: Vec<LatticeConfiguration> = opts.betas.iter().map(|&b| generator.member(b)).collect();
    let probes = probe_configs(&members, &block, opts.random_probes, opts.seed);

    let ferro = ferromagnetic_check(spec, &probes, &block, opts.sign_tol)?;
    if !ferro.is_ferromagnetic {
        let detail = match &ferro.worst_entry {
            Some((p, q, v)) => format!("ferromagnetic_check failed: mixed partial {v} at ({p}, {q})"),
            None => "ferromagnetic_check failed".into(),
        };
        return Err(hypothesis("ferromagnetic", detail));
    }

    info!("sign check done at {:.2?}", clock.elapsed());
    let graph = build_graph(spec, &probes, &block, opts.edge_threshold)?;
    let transitivity = graph.is_transitive();
    if !transitivity.transitive {
        return Err(hypothesis(
            "transitive",
            format!("interaction graph has {} components", transitivity.components),
        ));
    }

    info!("graph done at {:.2?}", clock.elapsed());
    let fam = build_foliation(spec, generator, &opts.foliation_grid, &block, opts.equilibrium_tol)
        .map_err(|e| hypothesis("foliation_axioms", e.to_string()))?;
    let axioms = check_axioms(&fam, &opts.a4_targets)?;
    if !axioms.all_pass() {
        return Err(hypothesis(
            "foliation_axioms",
            format!(
                "A1 {} A2 {} A2' {} A3 {} A4 {}",
                axioms.a1, axioms.a2, axioms.a2_strict, axioms.a3.pass, axioms.a4.certified
            ),
        ));
    }

    info!("foliation axioms done at {:.2?}", clock.elapsed());
    let schedule = window_schedule(&graph, dim, opts.max_window)?;
    let largest = schedule.last().cloned().unwrap_or_default();
    let coercivity = coercivity_block(spec, &members, &opts.betas, &largest)?;
    if !coercivity.pass {
        let (b, s) = coercivity.failure.expect("failure recorded");
        return Err(hypothesis("coercivity", format!("coercivity probe failed at site {s}, beta {b}")));
    }

    info!("coercivity done at {:.2?}", clock.elapsed());
    let jobs: Vec<(usize, usize)> = (0..opts.betas.len())
        .flat_map(|b| (0..schedule.len()).map(move |w| (b, w)))
        .collect();
    let mopts = MinimizeOptions {
        check_coercivity: false,
        stationarity_tol: opts.stationarity_tol,
        ..opts.minimize
    };
    let reports: Vec<GroundStateReport> = jobs
        .par_iter()
        .map(|&(b, w)| {
            let m = minimize_window(spec, &members[b], &schedule[w], &mopts)?;
            Ok(GroundStateReport {
                beta: opts.betas[b],
                window_size: w + 1,
                window: schedule[w].clone(),
                pass: m.gamma_star <= opts.gamma_tol && m.stationarity < opts.stationarity_tol,
                phi_star: m.phi_star,
                gamma_star: m.gamma_star,
                stationarity: m.stationarity,
                iterations: m.iterations,
            })
        })
        .collect::<Result<_>>()?;

    let monotone = reports
        .chunks(schedule.len().max(1))
        .all(|c| c.windows(2).all(|w| w[1].gamma_star >= w[0].gamma_star - MONOTONE_SLACK));
    let violations = reports.iter().filter(|r| !r.pass).count();
    let worst = reports
        .iter()
        .fold(None::<&GroundStateReport>, |a, r| match a {
            Some(a) if a.gamma_star >= r.gamma_star => Some(a),
            _ => Some(r),
        })
        .map(|r| (r.beta, r.window_size, r.gamma_star));
    let max_stationarity = reports.iter().map(|r| r.stationarity).fold(0.0, f64::max);
    let coverage = Coverage {
        betas: opts.betas.len(),
        max_window: opts.max_window,
        minimizations: reports.len(),
        largest_window_sites: largest.len(),
        statement: format!(
            "perturbations supported in {} nested connected windows of up to {} sites around the origin, at {} values of beta",
            schedule.len(),
            largest.len(),
            opts.betas.len()
        ),
    };
    Ok(VerifyReport {
        hypotheses: Hypotheses {
            ferromagnetic: ferro,
            transitivity,
            axioms,
            coercivity,
        },
        pass: violations == 0 && monotone,
        reports,
        violations,
        worst,
        monotone,
        max_stationarity,
        coverage,
        family: fam,
        edges: graph.edge_list_text(),
    })
}

fn validate(opts: &VerifyOptions) -> Result<()> {
    if opts.betas.is_empty() || opts.max_window == 0 {
        return Err(Error::Contract("verification needs at least one beta and window".into()));
    }
    let tols = [opts.gamma_tol, opts.stationarity_tol, opts.sign_tol, opts.edge_threshold];
    if tols.iter().any(|t| !(*t > 0.0)) || opts.equilibrium_tol.is_some_and(|t| !(t > 0.0)) {
        return Err(Error::Contract("tolerances must be positive".into()));
    }
    Ok(())
}

fn coercivity_block(
    spec: &InteractionSpec,
    members: &[LatticeConfiguration],
    betas: &[f64],
    window: &SiteSet,
) -> Result<CoercivitySummary> {
    let empty = Perturbation::new();
    let mut rays = 0;
    for (u, b) in members.iter().zip(betas) {
        for s in window {
            rays += 1;
            if !coercivity_probe(spec, u, &empty, s, &COERCIVITY_RAYS)?.pass {
                return Ok(CoercivitySummary {
                    pass: false,
                    rays_checked: rays,
                    failure: Some((*b, *s)),
                });
            }
        }
    }
    Ok(CoercivitySummary {
        pass: true,
        rays_checked: rays,
        failure: None,
    })
}

fn window_text(w: &SiteSet) -> String {
    w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}

/// One row per (β, window).
pub fn write_reports_csv<W: Write>(reports: &[GroundStateReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "beta",
        "window_size",
        "window",
        "gamma_star",
        "stationarity",
        "iterations",
        "verdict",
    ])
    .map_err(crate::foliation::csv_err)?;
    for r in reports {
        w.write_record([
            r.beta.to_string(),
            r.window_size.to_string(),
            window_text(&r.window),
            r.gamma_star.to_string(),
            r.stationarity.to_string(),
            r.iterations.to_string(),
            if r.pass { "pass" } else { "fail" }.to_string(),
        ])
        .map_err(crate::foliation::csv_err)?;
    }
    w.flush()?;
    Ok(())
}
