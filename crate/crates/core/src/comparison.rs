//! Structural identities behind the comparison argument: the integral
//! form of residual differences and the propagation of contact between
//! ordered equilibria.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, InteractionGraph, DEFAULT_EDGE_THRESHOLD};
use crate::hull::{sample_config, HullFunction};
use crate::model::{Field, InteractionSpec, LatticeConfiguration, Overlay, Perturbation};
use crate::quadrature::gauss_legendre;
use crate::site::{widen, Site, SiteSet};

pub const DEFAULT_QUADRATURE_NODES: usize = 16;
pub const CONTACT_TOL: f64 = 1e-8;
pub const SCENARIO_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HilbertCheck {
    /// `E_i(u*+η) − E_i(u*)`.
    pub lhs: f64,
    /// `Σ_j η_j ∫₀¹ ∂_j E_i(u*+tη) dt`.
    pub rhs: f64,
    pub discrepancy: f64,
}

/// `I_{ij} = ∫₀¹ ∂_i∂_j S(u*+tη) dt` for every `j ∈ supp(η)`.
fn integrated_hessian<F: Field + ?Sized>(
    spec: &InteractionSpec,
    u: &F,
    eta: &Perturbation,
    site: &Site,
    targets: &SiteSet,
    nodes: usize,
) -> Result<Vec<(Site, f64)>> {
    let (x, w) = gauss_legendre(nodes);
    let mut out: Vec<(Site, f64)> = targets.iter().map(|j| (*j, 0.0)).collect();
    for (t, wt) in x.iter().zip(&w) {
        let scaled: Perturbation = eta.iter().map(|(k, v)| (*k, t * v)).collect();
        let f = Overlay::new(u, &scaled);
        for (j, acc) in out.iter_mut() {
            *acc += wt * spec.hessian_entry(&f, site, j)?;
        }
    }
    Ok(out)
}

/// Compares `E_i(u*+η) − E_i(u*)` with its integral representation,
/// evaluated by `nodes`-point Gauss-Legendre quadrature.
pub fn hilbert_identity_check<F: Field + ?Sized>(
    spec: &InteractionSpec,
    u_star: &F,
    eta: &Perturbation,
    site: &Site,
    nodes: usize,
) -> Result<HilbertCheck> {
    spec.check_perturbation(eta)?;
    if nodes == 0 {
        return Err(Error::Contract("quadrature needs at least one node".into()));
    }
    let lhs = spec.residual(&Overlay::new(u_star, eta), site)? - spec.residual(u_star, site)?;
    let supp: SiteSet = eta.keys().copied().collect();
    let rhs = integrated_hessian(spec, u_star, eta, site, &supp, nodes)?
        .iter()
        .map(|(j, i)| eta[j] * i)
        .sum::<f64>();
    Ok(HilbertCheck {
        lhs,
        rhs,
        discrepancy: (lhs - rhs).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Nonnegative,
    Nonpositive,
}

/// Two configurations `u*` and `u*+η` touching at `contact_site`.
#[derive(Clone, Debug)]
pub struct ContactScenario {
    pub base: LatticeConfiguration,
    pub eta: Perturbation,
    pub contact_site: Site,
    /// Connected set on which both configurations are equilibria.
    pub window: SiteSet,
}

impl ContactScenario {
    pub fn sign(&self) -> Result<Sign> {
        let pos = self.eta.values().any(|v| *v > 0.0);
        let neg = self.eta.values().any(|v| *v < 0.0);
        match (pos, neg) {
            (true, true) => Err(Error::Precondition("eta changes sign".into())),
            (false, true) => Ok(Sign::Nonpositive),
            _ => Ok(Sign::Nonnegative),
        }
    }

    fn eta_at(&self, s: &Site) -> f64 {
        self.eta.get(s).copied().unwrap_or(0.0)
    }

    fn perturbed(&self) -> Overlay<'_, LatticeConfiguration> {
        Overlay::new(&self.base, &self.eta)
    }

    /// Checks the scenario invariants: single sign, `η_{i*} = 0`, equal
    /// residuals at `i*`, and both residuals vanishing on the window.
    pub fn validate(&self, spec: &InteractionSpec, scenario_tol: f64) -> Result<Sign> {
        spec.check_perturbation(&self.eta)?;
        let sign = self.sign()?;
        let i = &self.contact_site;
        if self.eta_at(i) != 0.0 {
            return Err(Error::Precondition(format!("eta does not vanish at the contact site {i}")));
        }
        let d = spec.residual(&self.perturbed(), i)? - spec.residual(&self.base, i)?;
        if d.abs() > scenario_tol {
            return Err(Error::Precondition(format!(
                "residuals differ by {d:e} at the contact site {i}"
            )));
        }
        for s in &self.window {
            let r0 = spec.residual(&self.base, s)?;
            let r1 = spec.residual(&self.perturbed(), s)?;
            if r0.abs() > scenario_tol || r1.abs() > scenario_tol {
                return Err(Error::Precondition(format!(
                    "equilibrium equations fail at {s}: residuals {r0:e}, {r1:e}"
                )));
            }
        }
        Ok(sign)
    }
}

/// Interaction graph around a scenario, probed at `u*` and `u*+η`.
pub fn scenario_graph(spec: &InteractionSpec, sc: &ContactScenario) -> Result<InteractionGraph> {
    let mut core = sc.window.clone();
    core.insert(sc.contact_site);
    let block = widen(&core, spec.range_bound());
    let probes = vec![sc.base.clone(), sc.base.perturbed(&sc.eta)];
    build_graph(spec, &probes, &block, DEFAULT_EDGE_THRESHOLD)
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighborBound {
    pub site: Site,
    pub eta: f64,
    /// `|ΔE_{i*} − η_{i*} I_{i*i*}| / |I_{i*j}|`, a bound on `|η_j|`.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContactReport {
    pub contact_site: Site,
    pub sign: Sign,
    pub certified: SiteSet,
    pub neighbors: Vec<NeighborBound>,
}

fn contact_at(
    spec: &InteractionSpec,
    graph: &InteractionGraph,
    sc: &ContactScenario,
    site: &Site,
    contact_tol: f64,
) -> Result<(SiteSet, Vec<NeighborBound>)> {
    let neighbors: SiteSet = graph.neighbors(site).copied().collect();
    let mut targets = neighbors.clone();
    targets.insert(*site);
    let integrals = integrated_hessian(spec, &sc.base, &sc.eta, site, &targets, DEFAULT_QUADRATURE_NODES)?;
    let diag = integrals.iter().find(|(j, _)| j == site).map_or(0.0, |x| x.1);
    let delta = spec.residual(&sc.perturbed(), site)? - spec.residual(&sc.base, site)?;
    let rest = (delta - sc.eta_at(site) * diag).abs();
    let mut certified: SiteSet = std::iter::once(*site).collect();
    let mut bounds = Vec::with_capacity(neighbors.len());
    for (j, ij) in integrals.iter().filter(|(j, _)| j != site) {
        let eta = sc.eta_at(j);
        let bound = if *ij != 0.0 { rest / ij.abs() } else { f64::INFINITY };
        if eta.abs() > contact_tol {
            return Err(Error::Counterexample { site: *j, eta, bound });
        }
        certified.insert(*j);
        bounds.push(NeighborBound { site: *j, eta, bound });
    }
    Ok((certified, bounds))
}

/// Certifies `η_j = 0` at the graph neighbors of the contact site.
pub fn contact_check(
    spec: &InteractionSpec,
    graph: &InteractionGraph,
    sc: &ContactScenario,
    scenario_tol: f64,
    contact_tol: f64,
) -> Result<ContactReport> {
    let sign = sc.validate(spec, scenario_tol)?;
    let (certified, neighbors) = contact_at(spec, graph, sc, &sc.contact_site, contact_tol)?;
    Ok(ContactReport {
        contact_site: sc.contact_site,
        sign,
        certified,
        neighbors,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationReport {
    pub sign: Sign,
    /// `S̃` together with its distance-one frontier.
    pub certified: SiteSet,
    pub frontier: SiteSet,
    pub steps: usize,
    /// Largest neighbor bound met along the way.
    pub max_bound: f64,
}

/// Repeats the contact check from the contact site through the window.
/// The window must lie within distance one of the contact site's
/// component, otherwise propagation stalls.
pub fn contact_propagation(
    spec: &InteractionSpec,
    graph: &InteractionGraph,
    sc: &ContactScenario,
    scenario_tol: f64,
    contact_tol: f64,
) -> Result<PropagationReport> {
    let sign = sc.validate(spec, scenario_tol)?;
    let mut certified = SiteSet::new();
    let mut done = SiteSet::new();
    let mut queue = VecDeque::from([sc.contact_site]);
    let mut max_bound: f64 = 0.0;
    while let Some(i) = queue.pop_front() {
        if !done.insert(i) {
            continue;
        }
        let (zeros, bounds) = contact_at(spec, graph, sc, &i, contact_tol)?;
        max_bound = bounds.iter().map(|b| b.bound).fold(max_bound, f64::max);
        for z in zeros {
            if sc.window.contains(&z) && !done.contains(&z) {
                queue.push_back(z);
            }
            certified.insert(z);
        }
    }
    let unreached: Vec<Site> = sc.window.difference(&done).copied().collect();
    if !unreached.is_empty() {
        return Err(Error::Stall { unreached });
    }
    let frontier: SiteSet = graph.frontier(&sc.window)?.difference(&sc.window).copied().collect();
    Ok(PropagationReport {
        sign,
        certified,
        frontier,
        steps: done.len(),
        max_bound,
    })
}

/// Scenario file, `fk-contact-v1`.
///
/// ```toml
/// format = "fk-contact-v1"
/// contact_site = [0]
/// window = [[-2], [-1], [0], [1], [2]]
/// eta = [[[5], 0.25], [[6], 0.1]]
///
/// [base]
/// kind = "linear"
/// omega = 0.3
/// offset = 0.0
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format: String,
    pub contact_site: Vec<i64>,
    pub window: Vec<Vec<i64>>,
    #[serde(default)]
    pub eta: Vec<(Vec<i64>, f64)>,
    pub base: BaseSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaseSection {
    Linear {
        #[serde(default = "one")]
        dim: usize,
        omega: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Member `β` of a saved hull family; the path is relative to the
    /// scenario file.
    Hull { path: PathBuf, beta: f64 },
}

fn one() -> usize {
    1
}

pub const SCENARIO_FORMAT: &str = "fk-contact-v1";

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if f.format != SCENARIO_FORMAT {
            return Err(Error::Format(format!(
                "expected format `{SCENARIO_FORMAT}`, found `{}`",
                f.format
            )));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text)
    }

    /// Builds the scenario; `dir` resolves relative hull paths.
    pub fn build(&self, dir: &Path) -> Result<ContactScenario> {
        let site = |c: &Vec<i64>| Site::new(c);
        let base = match &self.base {
            BaseSection::Linear { dim, omega, offset } => LatticeConfiguration::linear(*dim, *omega, *offset),
            BaseSection::Hull { path, beta } => {
                let h = HullFunction::load(&dir.join(path))?;
                sample_config(&h, *beta)
            }
        };
        let mut eta = Perturbation::new();
        for (k, v) in &self.eta {
            if eta.insert(site(k)?, *v).is_some() {
                return Err(Error::Format(format!("site {k:?} listed twice in eta")));
            }
        }
        Ok(ContactScenario {
            base,
            eta,
            contact_site: site(&self.contact_site)?,
            window: self.window.iter().map(site).collect::<Result<_>>()?,
        })
    }
}
