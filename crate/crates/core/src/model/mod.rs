//! Interaction specifications and the basic energy operations on them.
//!
//! Every windowed sum walks the anchored terms in lexicographic order of
//! their base site, then rule index, so results are bit-reproducible.

pub mod builtin;
pub mod config;
pub mod file;
pub mod potential;
pub mod probes;
pub mod terms;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub use config::{Background, Field, LatticeConfiguration, Overlay, Perturbation};
pub use potential::{FourierPotential, Mode};
pub use terms::InteractionTerm;

use crate::error::{Error, Result};
use crate::site::{Site, SiteSet};

/// Which base sites a rule is anchored at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorFilter {
    All,
    /// Skip bases whose first coordinate `n` has `(n + 1) mod modulus == 0`.
    SkipModulo { modulus: i64 },
}

impl AnchorFilter {
    fn admits(&self, base: &Site) -> bool {
        match *self {
            AnchorFilter::All => true,
            AnchorFilter::SkipModulo { modulus } => (base.index() + 1).rem_euclid(modulus) != 0,
        }
    }
}

/// A term shape translated to every admitted base site.
#[derive(Clone, Debug)]
pub struct TermRule {
    pub term: Arc<dyn InteractionTerm>,
    pub anchors: AnchorFilter,
}

impl TermRule {
    pub fn everywhere(term: impl InteractionTerm + 'static) -> Self {
        TermRule {
            term: Arc::new(term),
            anchors: AnchorFilter::All,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Medium {
    None,
    Periodic(Arc<FourierPotential>),
    QuasiPeriodic(Arc<FourierPotential>),
}

impl Medium {
    pub fn potential(&self) -> Option<&Arc<FourierPotential>> {
        match self {
            Medium::None => None,
            Medium::Periodic(v) | Medium::QuasiPeriodic(v) => Some(v),
        }
    }
}

/// A term instance: rule `rule` anchored at `base`.
#[derive(Clone, Copy, Debug)]
pub struct Anchored<'a> {
    pub rule: usize,
    pub base: Site,
    pub term: &'a dyn InteractionTerm,
}

impl Anchored<'_> {
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.term.cell().iter().map(move |o| self.base.add(o))
    }

    /// Position of `s` in the cell, if the term acts on it.
    pub fn slot(&self, s: &Site) -> Option<usize> {
        let off = s.sub(&self.base);
        self.term.cell().iter().position(|o| *o == off)
    }

    pub fn gather<F: Field + ?Sized>(&self, u: &F, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.sites().map(|s| u.value(&s)));
    }

    pub fn diameter(&self) -> u64 {
        self.term.range()
    }
}

#[derive(Clone, Debug)]
pub struct InteractionSpec {
    dim: usize,
    rules: Vec<TermRule>,
    range_bound: u64,
    medium: Medium,
    translation_invariant: bool,
    label: String,
}

impl InteractionSpec {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        rules: Vec<TermRule>,
        range_bound: u64,
        medium: Medium,
    ) -> Result<Self> {
        if !(1..=crate::site::MAX_DIM).contains(&dim) {
            return Err(Error::InvalidModel(format!("unsupported dimension {dim}")));
        }
        if rules.is_empty() {
            return Err(Error::InvalidModel("a model needs at least one term".into()));
        }
        for r in &rules {
            terms::validate_cell(r.term.cell(), dim)
                .map_err(|e| Error::InvalidModel(format!("term `{}`: {e}", r.term.name())))?;
            if r.term.range() >= range_bound {
                return Err(Error::InvalidModel(format!(
                    "term `{}` has range {} but range_bound is {range_bound}",
                    r.term.name(),
                    r.term.range()
                )));
            }
        }
        let translation_invariant = rules.iter().all(|r| r.anchors == AnchorFilter::All);
        Ok(InteractionSpec {
            dim,
            rules,
            range_bound,
            medium,
            translation_invariant,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rules(&self) -> &[TermRule] {
        &self.rules
    }

    pub fn range_bound(&self) -> u64 {
        self.range_bound
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn check_site(&self, s: &Site) -> Result<()> {
        if s.dim() != self.dim {
            return Err(Error::Contract(format!(
                "site {s} has dimension {} but the model has dimension {}",
                s.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    fn check_sites<'a>(&self, sites: impl IntoIterator<Item = &'a Site>) -> Result<()> {
        sites.into_iter().try_for_each(|s| self.check_site(s))
    }

    /// All anchored terms whose cell meets `sites`, in canonical order.
    pub fn terms_touching(&self, sites: &SiteSet) -> Vec<Anchored<'_>> {
        let mut keys = BTreeSet::new();
        for s in sites {
            for (ri, r) in self.rules.iter().enumerate() {
                for o in r.term.cell() {
                    let base = s.sub(o);
                    if r.anchors.admits(&base) {
                        keys.insert((base, ri));
                    }
                }
            }
        }
        keys.into_iter()
            .map(|(base, rule)| Anchored {
                rule,
                base,
                term: self.rules[rule].term.as_ref(),
            })
            .collect()
    }

    /// Anchored terms acting on `site`.
    pub fn terms_at(&self, site: &Site) -> Vec<Anchored<'_>> {
        self.terms_touching(&std::iter::once(*site).collect())
    }

    fn eval_energy<F: Field + ?Sized>(&self, a: &Anchored, u: &F, buf: &mut Vec<f64>) -> Result<f64> {
        a.gather(u, buf);
        let e = a.term.energy(&a.base, buf);
        if !e.is_finite() {
            return Err(Error::NonFinite {
                term: a.term.name().to_string(),
                base: a.base,
                quantity: "energy",
            });
        }
        Ok(e)
    }

    /// `Σ_{B ∩ window ≠ ∅} H_B(u)`.
    pub fn window_energy<F: Field + ?Sized>(&self, u: &F, window: &SiteSet) -> Result<f64> {
        self.check_sites(window)?;
        let mut buf = Vec::new();
        let mut acc = 0.0;
        for a in self.terms_touching(window) {
            acc += self.eval_energy(&a, u, &mut buf)?;
        }
        Ok(acc)
    }

    /// `Γ(φ; u, anchor) = Σ_{B ∩ anchor ≠ ∅} [H_B(u) − H_B(u+φ)]`.
    ///
    /// The anchor is widened to contain `supp(φ)`; terms away from the
    /// support contribute exact zeros, so the value does not depend on how
    /// far the anchor extends beyond the support.
    pub fn relative_energy<F: Field + ?Sized>(
        &self,
        u: &F,
        phi: &Perturbation,
        anchor: &SiteSet,
    ) -> Result<f64> {
        self.check_perturbation(phi)?;
        self.check_sites(anchor)?;
        let mut set = anchor.clone();
        set.extend(phi.keys().copied());
        let moved = Overlay::new(u, phi);
        let mut b0 = Vec::new();
        let mut b1 = Vec::new();
        let mut acc = 0.0;
        for a in self.terms_touching(&set) {
            let e0 = self.eval_energy(&a, u, &mut b0)?;
            let e1 = self.eval_energy(&a, &moved, &mut b1)?;
            acc += e0 - e1;
        }
        Ok(acc)
    }

    pub fn check_perturbation(&self, phi: &Perturbation) -> Result<()> {
        for (s, v) in phi {
            self.check_site(s)?;
            if !v.is_finite() {
                return Err(Error::Contract(format!("perturbation value at {s} is not finite")));
            }
        }
        Ok(())
    }

    /// `E_i(u) = Σ_{B ∋ i} ∂_{u_i} H_B(u)`.
    pub fn residual<F: Field + ?Sized>(&self, u: &F, site: &Site) -> Result<f64> {
        self.check_site(site)?;
        let mut buf = Vec::new();
        let mut acc = 0.0;
        for a in self.terms_at(site) {
            let p = a.slot(site).expect("term touches site");
            a.gather(u, &mut buf);
            let g = a.term.grad(&a.base, &buf, p);
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    term: a.term.name().to_string(),
                    base: a.base,
                    quantity: "gradient",
                });
            }
            acc += g;
        }
        Ok(acc)
    }

    /// `Σ_{B ⊇ {p,q}} ∂²H_B/∂u_p∂u_q(u)`.
    ///
    /// Evaluated with the pair in canonical order so the result is exactly
    /// symmetric in `p` and `q`.
    pub fn hessian_entry<F: Field + ?Sized>(&self, u: &F, p: &Site, q: &Site) -> Result<f64> {
        self.check_site(p)?;
        self.check_site(q)?;
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        if p.cheb_dist(q) >= self.range_bound {
            return Ok(0.0);
        }
        let mut buf = Vec::new();
        let mut acc = 0.0;
        for a in self.terms_at(p) {
            let (Some(ip), Some(iq)) = (a.slot(p), a.slot(q)) else {
                continue;
            };
            a.gather(u, &mut buf);
            let h = a.term.hess(&a.base, &buf, ip, iq);
            if !h.is_finite() {
                return Err(Error::NonFinite {
                    term: a.term.name().to_string(),
                    base: a.base,
                    quantity: "hessian",
                });
            }
            acc += h;
        }
        Ok(acc)
    }

    /// Residuals at every site of `sites`, keyed by site.
    pub fn residuals<F: Field + ?Sized>(&self, u: &F, sites: &SiteSet) -> Result<BTreeMap<Site, f64>> {
        sites.iter().map(|s| Ok((*s, self.residual(u, s)?))).collect()
    }
}
