//! β-indexed families of equilibria and the foliation axioms:
//! (A1) every member is an equilibrium, (A2) members are ordered in β,
//! (A2') strictly, (A3) members diverge to ±∞ with β, (A4) every value at
//! every site is attained by some member.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hull::HullFunction;
use crate::model::file::Model;
use crate::model::{Field, InteractionSpec, LatticeConfiguration, Medium};
use crate::site::{Site, SiteSet};

/// A continuous-in-β source of members.
#[derive(Clone, Debug)]
pub enum Generator {
    /// `u_i^β = ω Σ_k i_k + β`.
    Linear { dim: usize, omega: f64 },
    /// `u_n^β = nω + h(nωα + βα) + β`.
    Hull(Arc<HullFunction>),
}

impl Generator {
    pub fn member(&self, beta: f64) -> LatticeConfiguration {
        match self {
            Generator::Linear { dim, omega } => LatticeConfiguration::linear(*dim, *omega, beta),
            Generator::Hull(h) => crate::hull::sample_config(h, beta),
        }
    }

    /// `u_i^β` without building a member.
    pub fn value(&self, site: &Site, beta: f64) -> f64 {
        match self {
            Generator::Linear { omega, .. } => {
                site.coords().iter().map(|&c| c as f64 * omega).sum::<f64>() + beta
            }
            Generator::Hull(h) => {
                let x = site.index() as f64 * h.omega();
                let theta: Vec<f64> = h.alpha().iter().map(|a| ((x + beta) * a).rem_euclid(1.0)).collect();
                x + h.eval(&theta) + beta
            }
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, Generator::Linear { .. })
    }

    /// The family generator of a loaded model. Quasi-periodic media need a
    /// hull matching the model's `alpha` and `omega`, except that a zero
    /// potential falls back to the linear family when none is given.
    pub fn for_model(model: &Model, hull: Option<Arc<HullFunction>>) -> Result<Generator> {
        let omega = model.omega.unwrap_or(0.0);
        match model.spec.medium() {
            Medium::QuasiPeriodic(v) => match hull {
                None if v.is_zero() => Ok(Generator::Linear { dim: 1, omega }),
                None => Err(Error::MissingInput("hull function of the quasi-periodic medium".into())),
                Some(h) if h.alpha() != v.alpha() || Some(h.omega()) != model.omega => Err(Error::Contract(
                    "hull does not match the model's alpha and omega".into(),
                )),
                Some(h) => Ok(Generator::Hull(h)),
            },
            Medium::Periodic(v) if !v.is_zero() => Err(Error::InvalidModel(
                "no foliation generator for a periodic medium with a nonzero potential".into(),
            )),
            _ => Ok(Generator::Linear {
                dim: model.spec.dim(),
                omega,
            }),
        }
    }
}

/// Slack for closed-form members, whose residuals vanish up to rounding.
pub fn closed_form_tolerance(max_abs_value: f64) -> f64 {
    1e-12 * (1.0 + max_abs_value)
}

pub const HULL_EQUILIBRIUM_TOL: f64 = 1e-10;

/// `n` points on `[-2, 2]` plus `±10³`.
pub fn default_beta_grid(n: usize) -> Vec<f64> {
    let mut g = vec![-1e3];
    g.extend(uniform_grid(-2.0, 2.0, n));
    g.push(1e3);
    g
}

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct FoliationFamily {
    pub beta_grid: Vec<f64>,
    pub window: SiteSet,
    pub members: Vec<LatticeConfiguration>,
    pub generator: Option<Generator>,
    /// Largest `|E_i|` over the window, per member.
    pub max_residuals: Vec<f64>,
    /// Tolerance each member was admitted under.
    pub tolerances: Vec<f64>,
}

fn check_grid(beta_grid: &[f64]) -> Result<()> {
    if beta_grid.is_empty() {
        return Err(Error::Contract("empty beta grid".into()));
    }
    if beta_grid.iter().any(|b| !b.is_finite()) || beta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("beta grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Samples `generator` on `beta_grid` and admits each member (A1).
///
/// `equilibrium_tol = None` selects the default: rounding slack for closed
/// forms, `1e-10` for hulls.
pub fn build_foliation(
    spec: &InteractionSpec,
    generator: Generator,
    beta_grid: &[f64],
    window: &SiteSet,
    equilibrium_tol: Option<f64>,
) -> Result<FoliationFamily> {
    check_grid(beta_grid)?;
    let members: Vec<LatticeConfiguration> = beta_grid.iter().map(|&b| generator.member(b)).collect();
    let closed = generator.is_closed_form();
    let tol_for = |u: &LatticeConfiguration| match equilibrium_tol {
        Some(t) => t,
        None if closed => {
            let m = window.iter().fold(0.0f64, |a, s| a.max(u.value(s).abs()));
            closed_form_tolerance(m + 1.0)
        }
        None => HULL_EQUILIBRIUM_TOL,
    };
    let tolerances: Vec<f64> = members.iter().map(tol_for).collect();
    admit(spec, beta_grid, members, window, Some(generator), tolerances)
}

/// Admits an explicit list of members, each under `equilibrium_tol`.
pub fn build_from_members(
    spec: &InteractionSpec,
    beta_grid: &[f64],
    members: Vec<LatticeConfiguration>,
    window: &SiteSet,
    equilibrium_tol: f64,
) -> Result<FoliationFamily> {
    check_grid(beta_grid)?;
    if members.len() != beta_grid.len() {
        return Err(Error::Contract("one member per beta is required".into()));
    }
    let tolerances = vec![equilibrium_tol; members.len()];
    admit(spec, beta_grid, members, window, None, tolerances)
}

fn admit(
    spec: &InteractionSpec,
    beta_grid: &[f64],
    members: Vec<LatticeConfiguration>,
    window: &SiteSet,
    generator: Option<Generator>,
    tolerances: Vec<f64>,
) -> Result<FoliationFamily> {
    if window.is_empty() {
        return Err(Error::Contract("empty foliation window".into()));
    }
    let worst: Vec<(Site, f64)> = members
        .par_iter()
        .map(|u| {
            let mut w = (*window.iter().next().expect("nonempty"), 0.0f64);
            for s in window {
                let r = spec.residual(u, s)?.abs();
                if r > w.1 {
                    w = (*s, r);
                }
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    for ((b, (site, r)), tol) in beta_grid.iter().zip(&worst).zip(&tolerances) {
        if *r >= *tol && !(*r == 0.0 && *tol == 0.0) {
            return Err(Error::MemberRejected {
                beta: *b,
                site: *site,
                residual: *r,
            });
        }
    }
    Ok(FoliationFamily {
        beta_grid: beta_grid.to_vec(),
        window: window.clone(),
        members,
        generator,
        max_residuals: worst.iter().map(|w| w.1).collect(),
        tolerances,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderWitness {
    pub site: Site,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct A3Report {
    pub pass: bool,
    /// `min_i u_i^{β_max} − max_i u_i^{β_mid}` and its lower counterpart.
    pub upper_gap: f64,
    pub lower_gap: f64,
    /// `β − 2‖h‖∞` lower bound on `u^β − u^0` for hull families.
    pub analytic_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct A4Report {
    pub certified: bool,
    pub method: &'static str,
    pub targets_checked: usize,
    /// Largest `|u_i^β − v|` at the returned witnesses.
    pub worst_mismatch: f64,
    pub failures: Vec<(Site, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub a1: bool,
    pub a1_max_residual: f64,
    pub a2: bool,
    pub a2_strict: bool,
    /// Smallest gap between consecutive members over the window.
    pub ordering_margin: f64,
    pub a2_witness: Option<OrderWitness>,
    pub a3: A3Report,
    pub a4: A4Report,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.a1 && self.a2 && self.a2_strict && self.a3.pass && self.a4.certified
    }
}

/// Bisection tolerance for the A4 witnesses.
pub const A4_TOL: f64 = 1e-10;

impl FoliationFamily {
    /// Gap `min_i (u^{β_{k+1}}_i − u^{β_k}_i)` for each consecutive pair.
    pub fn ordering_gaps(&self) -> Vec<(Site, f64)> {
        self.members
            .par_windows(2)
            .map(|w| {
                let mut best = (*self.window.iter().next().expect("nonempty"), f64::INFINITY);
                for s in &self.window {
                    let g = w[1].value(s) - w[0].value(s);
                    if g < best.1 {
                        best = (*s, g);
                    }
                }
                best
            })
            .collect()
    }

    /// A family on a smaller window, reusing the members.
    pub fn restrict(&self, window: &SiteSet) -> FoliationFamily {
        FoliationFamily {
            window: window.clone(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let gaps = self.ordering_gaps();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["beta", "max_residual", "ordering_margin"])
            .map_err(csv_err)?;
        for (k, b) in self.beta_grid.iter().enumerate() {
            let gap = gaps.get(k).map(|g| g.1.to_string()).unwrap_or_default();
            w.write_record([b.to_string(), self.max_residuals[k].to_string(), gap])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Checks (A1)–(A4) and (A2') on the family's window.
///
/// `a4_targets` are the values `v` tried at each site; only those inside the
/// sampled range `[u_i^{β_min}, u_i^{β_max}]` are bracketed.
pub fn check_axioms(fam: &FoliationFamily, a4_targets: &[f64]) -> Result<AxiomReport> {
    let a1_max = fam.max_residuals.iter().copied().fold(0.0, f64::max);
    let a1 = fam
        .max_residuals
        .iter()
        .zip(&fam.tolerances)
        .all(|(r, t)| r < t || *r == 0.0);

    let gaps = fam.ordering_gaps();
    let mut witness: Option<OrderWitness> = None;
    for (k, (site, g)) in gaps.iter().enumerate() {
        if witness.as_ref().is_none_or(|w| *g < w.gap) {
            witness = Some(OrderWitness {
                site: *site,
                beta_lo: fam.beta_grid[k],
                beta_hi: fam.beta_grid[k + 1],
                gap: *g,
            });
        }
    }
    let margin = witness.as_ref().map_or(f64::INFINITY, |w| w.gap);
    let a2 = margin >= 0.0;
    let a2_strict = margin > 0.0;

    let a3 = check_a3(fam)?;
    let a4 = check_a4(fam, a4_targets);
    Ok(AxiomReport {
        a1,
        a1_max_residual: a1_max,
        a2,
        a2_strict,
        ordering_margin: margin,
        a2_witness: if a2_strict { None } else { witness },
        a3,
        a4,
    })
}

fn check_a3(fam: &FoliationFamily) -> Result<A3Report> {
    let n = fam.beta_grid.len();
    let mid = n / 2;
    let (lo, hi) = (0, n - 1);
    let vals = |k: usize| fam.window.iter().map(move |s| fam.members[k].value(s));
    let min_hi = vals(hi).fold(f64::INFINITY, f64::min);
    let max_mid = vals(mid).fold(f64::NEG_INFINITY, f64::max);
    let min_mid = vals(mid).fold(f64::INFINITY, f64::min);
    let max_lo = vals(lo).fold(f64::NEG_INFINITY, f64::max);
    let upper_gap = min_hi - max_mid;
    let lower_gap = min_mid - max_lo;
    let half_hi = 0.5 * (fam.beta_grid[hi] - fam.beta_grid[mid]);
    let half_lo = 0.5 * (fam.beta_grid[mid] - fam.beta_grid[lo]);
    let analytic_bound = match &fam.generator {
        Some(Generator::Hull(h)) => {
            let sup = h.sup_norm(4 * h.n_trunc() + 2)?;
            Some(fam.beta_grid[hi] - 2.0 * sup)
        }
        Some(Generator::Linear { .. }) => Some(fam.beta_grid[hi]),
        None => None,
    };
    let sampled = n >= 3 && upper_gap >= half_hi && lower_gap >= half_lo;
    Ok(A3Report {
        pass: sampled && analytic_bound.is_none_or(|b| b > 0.0),
        upper_gap,
        lower_gap,
        analytic_bound,
    })
}

fn check_a4(fam: &FoliationFamily, targets: &[f64]) -> A4Report {
    let Some(gen) = &fam.generator else {
        return A4Report {
            certified: false,
            method: "no continuous generator; not certified",
            targets_checked: 0,
            worst_mismatch: f64::NAN,
            failures: Vec::new(),
        };
    };
    let first = fam.members.first().expect("nonempty");
    let last = fam.members.last().expect("nonempty");
    // Per site: targets checked, worst mismatch, unbracketed targets.
    type SiteA4 = (usize, f64, Vec<(Site, f64)>);
    let results: Vec<SiteA4> = fam
        .window
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|s| {
            let lo_v = first.value(s);
            let hi_v = last.value(s);
            let mut count = 0;
            let mut worst: f64 = 0.0;
            let mut fails = Vec::new();
            for &v in targets.iter().filter(|v| **v >= lo_v && **v <= hi_v) {
                count += 1;
                match bracket_witness(gen, fam, s, v) {
                    Some(b) => worst = worst.max((gen.value(s, b) - v).abs()),
                    None => fails.push((**s, v)),
                }
            }
            (count, worst, fails)
        })
        .collect();
    let targets_checked = results.iter().map(|r| r.0).sum();
    let worst_mismatch = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let failures: Vec<(Site, f64)> = results.into_iter().flat_map(|r| r.2).collect();
    A4Report {
        certified: failures.is_empty() && worst_mismatch < A4_TOL,
        method: "intermediate value theorem on the continuous generator, bracketed by sampled members and (A3)",
        targets_checked,
        worst_mismatch,
        failures,
    }
}

/// Finds `β` with `u_site^β = v` by bracketing between sampled members and
/// bisecting the generator.
pub fn bracket_witness(gen: &Generator, fam: &FoliationFamily, site: &Site, v: f64) -> Option<f64> {
    // Members are ordered at `site`, so the bracket is found by bisection.
    let first_above = fam.members.partition_point(|u| u.value(site) < v);
    let k = first_above.saturating_sub(1);
    if k + 1 >= fam.members.len() {
        return None;
    }
    if !(fam.members[k].value(site) <= v && v <= fam.members[k + 1].value(site)) {
        return None;
    }
    let (mut a, mut b) = (fam.beta_grid[k], fam.beta_grid[k + 1]);
    let fa = gen.value(site, a) - v;
    if fa.abs() < A4_TOL {
        return Some(a);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = gen.value(site, m) - v;
        if fm.abs() < A4_TOL {
            return Some(m);
        }
        if fm < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a <= f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
    }
    let m = 0.5 * (a + b);
    ((gen.value(site, m) - v).abs() < A4_TOL).then_some(m)
}

/// Default A4 test values.
pub fn default_a4_targets() -> Vec<f64> {
    vec![-500.0, -37.5, -1.3, 0.0, 0.7, 2.9, 41.0, 500.0]
}
