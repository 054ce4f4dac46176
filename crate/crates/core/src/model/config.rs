//! Lattice configurations: a background plus a finitely supported overlay.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::hull::HullFunction;
use crate::site::Site;

/// Finitely supported perturbation `φ`.
pub type Perturbation = BTreeMap<Site, f64>;

/// Anything that assigns a real value to each site.
pub trait Field: Sync {
    fn value(&self, s: &Site) -> f64;
}

pub type SiteFn = Arc<dyn Fn(&Site) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Background {
    /// `u_i = slope·i + offset`.
    Linear { slope: Vec<f64>, offset: f64 },
    /// `u_n = nω + h(nωα)` for a (translated) hull `h`; one-dimensional only.
    Hull(Arc<HullFunction>),
    /// Arbitrary closed form.
    Closed(SiteFn),
}

impl fmt::Debug for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Background::Linear { slope, offset } => f
                .debug_struct("Linear")
                .field("slope", slope)
                .field("offset", offset)
                .finish(),
            Background::Hull(h) => f.debug_tuple("Hull").field(&h.offset()).finish(),
            Background::Closed(_) => f.write_str("Closed(..)"),
        }
    }
}

impl Background {
    pub fn value(&self, s: &Site) -> f64 {
        match self {
            Background::Linear { slope, offset } => {
                s.coords()
                    .iter()
                    .zip(slope)
                    .map(|(&c, &w)| c as f64 * w)
                    .sum::<f64>()
                    + offset
            }
            Background::Hull(h) => h.lattice_value(s.index()),
            Background::Closed(f) => f(s),
        }
    }
}

/// `u = background + φ`.
#[derive(Clone, Debug)]
pub struct LatticeConfiguration {
    pub background: Background,
    pub perturbation: Perturbation,
}

impl LatticeConfiguration {
    pub fn new(background: Background) -> Self {
        LatticeConfiguration {
            background,
            perturbation: Perturbation::new(),
        }
    }

    /// `u_i = ω Σ_k i_k + offset`, the same slope along every axis.
    pub fn linear(dim: usize, omega: f64, offset: f64) -> Self {
        LatticeConfiguration::new(Background::Linear {
            slope: vec![omega; dim],
            offset,
        })
    }

    pub fn hull(h: Arc<HullFunction>) -> Self {
        LatticeConfiguration::new(Background::Hull(h))
    }

    pub fn closed(f: impl Fn(&Site) -> f64 + Send + Sync + 'static) -> Self {
        LatticeConfiguration::new(Background::Closed(Arc::new(f)))
    }

    /// A copy with `phi` added to the current overlay.
    pub fn perturbed(&self, phi: &Perturbation) -> Self {
        let mut out = self.clone();
        for (s, v) in phi {
            *out.perturbation.entry(*s).or_insert(0.0) += v;
        }
        out
    }

    pub fn with_perturbation(mut self, phi: Perturbation) -> Self {
        self.perturbation = phi;
        self
    }

    pub fn background_value(&self, s: &Site) -> f64 {
        self.background.value(s)
    }
}

impl Field for LatticeConfiguration {
    fn value(&self, s: &Site) -> f64 {
        let b = self.background.value(s);
        match self.perturbation.get(s) {
            Some(p) => b + p,
            None => b,
        }
    }
}

/// Borrowed view `u + φ`.
pub struct Overlay<'a, F: Field + ?Sized> {
    base: &'a F,
    phi: &'a Perturbation,
}

impl<'a, F: Field + ?Sized> Overlay<'a, F> {
    pub fn new(base: &'a F, phi: &'a Perturbation) -> Self {
        Overlay { base, phi }
    }
}

impl<F: Field + ?Sized> Field for Overlay<'_, F> {
    fn value(&self, s: &Site) -> f64 {
        let b = self.base.value(s);
        match self.phi.get(s) {
            Some(p) => b + p,
            None => b,
        }
    }
}

/// Values stored in a map, with a fallback field elsewhere.
pub struct Tabulated<'a, F: Field + ?Sized> {
    pub table: &'a BTreeMap<Site, f64>,
    pub fallback: &'a F,
}

impl<F: Field + ?Sized> Field for Tabulated<'_, F> {
    fn value(&self, s: &Site) -> f64 {
        match self.table.get(s) {
            Some(v) => *v,
            None => self.fallback.value(s),
        }
    }
}
