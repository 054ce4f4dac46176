//! Sampling probes for the structural hypotheses: ferromagnetic sign,
//! coercivity along single-site rays, and tail summability.

use serde::Serialize;

use super::{Field, InteractionSpec, Overlay, Perturbation};
use crate::error::{Error, Result};
use crate::site::{Site, SiteSet};

pub const DEFAULT_SIGN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct FerromagneticReport {
    pub is_ferromagnetic: bool,
    /// Largest off-diagonal per-term mixed partial seen, `(p, q, value)`.
    pub worst_entry: Option<(Site, Site, f64)>,
    pub samples: usize,
    pub probe_configs: usize,
}

/// Evaluates every off-diagonal per-term mixed partial over the terms
/// touching `window` at each probe configuration.
pub fn ferromagnetic_check<F: Field>(
    spec: &InteractionSpec,
    probes: &[F],
    window: &SiteSet,
    tol: f64,
) -> Result<FerromagneticReport> {
    if probes.is_empty() {
        return Err(Error::Contract("ferromagnetic check needs at least one probe".into()));
    }
    let terms = spec.terms_touching(window);
    let mut worst: Option<(Site, Site, f64)> = None;
    let mut samples = 0;
    let mut buf = Vec::new();
    for u in probes {
        for a in &terms {
            a.gather(u, &mut buf);
            let cell = a.term.cell();
            for p in 0..cell.len() {
                for q in (p + 1)..cell.len() {
                    let h = a.term.hess(&a.base, &buf, p, q);
                    samples += 1;
                    if worst.is_none_or(|w| h > w.2) {
                        let sp = a.base.add(&cell[p]);
                        let sq = a.base.add(&cell[q]);
                        let (sp, sq) = if sp <= sq { (sp, sq) } else { (sq, sp) };
                        worst = Some((sp, sq, h));
                    }
                }
            }
        }
    }
    Ok(FerromagneticReport {
        is_ferromagnetic: worst.is_none_or(|w| w.2 <= tol),
        worst_entry: worst,
        samples,
        probe_configs: probes.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub site: Site,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub pass: bool,
}

/// Magnitude from which samples count as tail samples.
pub const COERCIVITY_TAIL: f64 = 10.0;

/// `Σ_{B ∩ A ≠ ∅} [H_B(u+φ+t δ_site) − H_B(u+φ)]` for each `t`, with
/// `A = supp(φ) ∪ {site}`.
///
/// Passes when, on each side, the tail samples (`|t| ≥ 10`) increase with
/// `|t|` and the outermost one exceeds every sample closer to the origin.
pub fn coercivity_probe<F: Field + ?Sized>(
    spec: &InteractionSpec,
    u: &F,
    phi: &Perturbation,
    site: &Site,
    t_values: &[f64],
) -> Result<CoercivityReport> {
    spec.check_perturbation(phi)?;
    let mut anchor: SiteSet = phi.keys().copied().collect();
    anchor.insert(*site);
    let base = Overlay::new(u, phi);
    let mut values = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let kick: Perturbation = [(*site, t)].into_iter().collect();
        values.push(-spec.relative_energy(&base, &kick, &anchor)?);
    }
    let pass = tail_grows(t_values, &values, 1.0) && tail_grows(t_values, &values, -1.0);
    Ok(CoercivityReport {
        site: *site,
        t: t_values.to_vec(),
        values,
        pass,
    })
}

fn tail_grows(t: &[f64], v: &[f64], sign: f64) -> bool {
    let mut tail: Vec<(f64, f64)> = t
        .iter()
        .zip(v)
        .filter(|(t, _)| **t * sign >= COERCIVITY_TAIL)
        .map(|(t, v)| (t.abs(), *v))
        .collect();
    if tail.is_empty() {
        return false;
    }
    tail.sort_by(|a, b| a.0.total_cmp(&b.0));
    if tail.windows(2).any(|w| w[1].1 <= w[0].1) {
        return false;
    }
    let top = tail.last().expect("nonempty").1;
    t.iter()
        .zip(v)
        .filter(|(t, _)| t.abs() < COERCIVITY_TAIL)
        .all(|(_, v)| *v < top)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailSums {
    pub l: u64,
    /// `Σ_B Σ_{i∈B} |∂_i H_B|`.
    pub first: f64,
    /// `Σ_B Σ_{p,q∈B} |∂_p∂_q H_B|`.
    pub second: f64,
}

/// Derivative mass of the terms meeting `supp(φ)` with diameter `≥ L`,
/// maximized over the segment points `u + sφ`, `s ∈ {0, ½, 1}`.
pub fn summability_probe<F: Field + ?Sized>(
    spec: &InteractionSpec,
    u: &F,
    phi: &Perturbation,
    l_values: &[u64],
) -> Result<Vec<TailSums>> {
    spec.check_perturbation(phi)?;
    let supp: SiteSet = phi.keys().copied().collect();
    let terms = spec.terms_touching(&supp);
    let segment: Vec<Perturbation> = [0.0, 0.5, 1.0]
        .iter()
        .map(|s| phi.iter().map(|(k, v)| (*k, s * v)).collect())
        .collect();
    let mut out = Vec::with_capacity(l_values.len());
    let mut buf = Vec::new();
    for &l in l_values {
        let mut first_max: f64 = 0.0;
        let mut second_max: f64 = 0.0;
        for seg in &segment {
            let w = Overlay::new(u, seg);
            let mut first = 0.0;
            let mut second = 0.0;
            for a in terms.iter().filter(|a| a.diameter() >= l) {
                a.gather(&w, &mut buf);
                let n = buf.len();
                for p in 0..n {
                    first += a.term.grad(&a.base, &buf, p).abs();
                    for q in 0..n {
                        second += a.term.hess(&a.base, &buf, p, q).abs();
                    }
                }
            }
            first_max = first_max.max(first);
            second_max = second_max.max(second);
        }
        out.push(TailSums {
            l,
            first: first_max,
            second: second_max,
        });
    }
    Ok(out)
}
