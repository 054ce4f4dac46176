//! The energy of `u + φ` restricted to the terms meeting a finite window,
//! as a function of the window values of `φ`.

use crate::error::Result;
use crate::model::{Field, InteractionSpec, InteractionTerm, Perturbation};
use crate::site::{Site, SiteSet};

enum Slot {
    Var(usize),
    Fixed(f64),
}

struct LocalTerm<'a> {
    term: &'a dyn InteractionTerm,
    base: Site,
    slots: Vec<Slot>,
    /// `H_B(u)`.
    e0: f64,
}

pub struct LocalProblem<'a> {
    pub sites: Vec<Site>,
    /// Background values `u_i` at the window sites.
    pub u0: Vec<f64>,
    terms: Vec<LocalTerm<'a>>,
}

impl<'a> LocalProblem<'a> {
    pub fn new<F: Field + ?Sized>(spec: &'a InteractionSpec, u: &F, window: &SiteSet) -> Result<Self> {
        spec.check_perturbation(&window.iter().map(|s| (*s, 0.0)).collect())?;
        let sites: Vec<Site> = window.iter().copied().collect();
        let u0: Vec<f64> = sites.iter().map(|s| u.value(s)).collect();
        let mut terms = Vec::new();
        let mut buf = Vec::new();
        for a in spec.terms_touching(window) {
            let slots = a
                .sites()
                .map(|s| match sites.binary_search(&s) {
                    Ok(i) => Slot::Var(i),
                    Err(_) => Slot::Fixed(u.value(&s)),
                })
                .collect::<Vec<_>>();
            buf.clear();
            for sl in &slots {
                buf.push(match sl {
                    Slot::Var(i) => u0[*i],
                    Slot::Fixed(v) => *v,
                });
            }
            let e0 = a.term.energy(&a.base, &buf);
            if !e0.is_finite() {
                return Err(crate::error::Error::NonFinite {
                    term: a.term.name().to_string(),
                    base: a.base,
                    quantity: "energy",
                });
            }
            terms.push(LocalTerm {
                term: a.term,
                base: a.base,
                slots,
                e0,
            });
        }
        Ok(LocalProblem { sites, u0, terms })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    fn fill(&self, t: &LocalTerm, phi: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        for sl in &t.slots {
            buf.push(match sl {
                Slot::Var(i) => self.u0[*i] + phi[*i],
                Slot::Fixed(v) => *v,
            });
        }
    }

    /// `Γ(φ) = Σ_B [H_B(u) − H_B(u+φ)]`.
    pub fn gamma(&self, phi: &[f64]) -> f64 {
        let mut buf = Vec::new();
        let mut acc = 0.0;
        for t in &self.terms {
            self.fill(t, phi, &mut buf);
            acc += t.e0 - t.term.energy(&t.base, &buf);
        }
        acc
    }

    /// `Σ_B [H_B(u+φ+s) − H_B(u+φ)]`, accurate for small steps `s`.
    pub fn energy_change(&self, phi: &[f64], step: &[f64]) -> f64 {
        let moved: Vec<f64> = phi.iter().zip(step).map(|(a, b)| a + b).collect();
        let mut b0 = Vec::new();
        let mut b1 = Vec::new();
        let mut acc = 0.0;
        for t in &self.terms {
            self.fill(t, phi, &mut b0);
            self.fill(t, &moved, &mut b1);
            acc += t.term.energy(&t.base, &b1) - t.term.energy(&t.base, &b0);
        }
        acc
    }

    /// `E_i(u+φ)` at every window site.
    pub fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.len()];
        let mut buf = Vec::new();
        for t in &self.terms {
            self.fill(t, phi, &mut buf);
            for (p, sl) in t.slots.iter().enumerate() {
                if let Slot::Var(i) = sl {
                    g[*i] += t.term.grad(&t.base, &buf, p);
                }
            }
        }
        g
    }

    /// Hessian of the window energy, row-major.
    pub fn hessian(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut h = vec![0.0; n * n];
        let mut buf = Vec::new();
        for t in &self.terms {
            self.fill(t, phi, &mut buf);
            for (p, sp) in t.slots.iter().enumerate() {
                let Slot::Var(i) = sp else { continue };
                for (q, sq) in t.slots.iter().enumerate().skip(p) {
                    let Slot::Var(j) = sq else { continue };
                    let v = t.term.hess(&t.base, &buf, p, q);
                    h[i * n + j] += v;
                    if i != j {
                        h[j * n + i] += v;
                    }
                }
            }
        }
        h
    }

    pub fn to_perturbation(&self, phi: &[f64]) -> Perturbation {
        self.sites.iter().copied().zip(phi.iter().copied()).collect()
    }

    /// Window variables each term depends on, for tabulation.
    pub(crate) fn term_vars(&self) -> Vec<Vec<usize>> {
        self.terms
            .iter()
            .map(|t| {
                let mut v: Vec<usize> = t
                    .slots
                    .iter()
                    .filter_map(|s| match s {
                        Slot::Var(i) => Some(*i),
                        Slot::Fixed(_) => None,
                    })
                    .collect();
                v.sort();
                v.dedup();
                v
            })
            .collect()
    }

    /// `H_B(u) − H_B(u+φ)` of term `k`.
    pub(crate) fn term_gamma(&self, k: usize, phi: &[f64], buf: &mut Vec<f64>) -> f64 {
        let t = &self.terms[k];
        self.fill(t, phi, buf);
        t.e0 - t.term.energy(&t.base, buf)
    }

    pub(crate) fn term_count(&self) -> usize {
        self.terms.len()
    }
}
