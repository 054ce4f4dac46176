//! Built-in model families.

use std::sync::Arc;

use super::terms::{AntiBond, MediumTerm, PairTerm, PinningTerm, ThreeBodyTerm};
use super::{AnchorFilter, FourierPotential, InteractionSpec, Medium, TermRule};
use crate::error::{Error, Result};
use crate::site::Site;

fn unit(dim: usize, axis: usize) -> Site {
    let mut c = [0i64; 3];
    c[axis] = 1;
    Site::new(&c[..dim]).expect("dimension validated")
}

fn elastic_rules(dim: usize) -> Vec<TermRule> {
    (0..dim)
        .map(|k| TermRule::everywhere(PairTerm::elastic(unit(dim, k))))
        .collect()
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("unsupported dimension {dim}")))
    }
}

/// Classic Frenkel-Kontorova model on `Z^dim`: elastic bonds along each axis
/// plus the on-site term `-V(u)` with a one-dimensional periodic `V`.
pub fn fk_periodic(dim: usize, potential: Option<Arc<FourierPotential>>) -> Result<InteractionSpec> {
    check_dim(dim)?;
    let mut rules = elastic_rules(dim);
    let medium = match potential {
        Some(v) => {
            if v.torus_dim() != 1 {
                return Err(Error::InvalidModel(
                    "a periodic medium needs a one-dimensional potential".into(),
                ));
            }
            rules.push(TermRule::everywhere(MediumTerm::new(dim, v.clone())));
            Medium::Periodic(v)
        }
        None => Medium::None,
    };
    InteractionSpec::new("fk-periodic", dim, rules, 2, medium)
}

/// One-dimensional chain in a quasi-periodic medium, `H(x,y) = (x-y)²/2 − V(xα)`.
pub fn fk_quasiperiodic(potential: Arc<FourierPotential>) -> Result<InteractionSpec> {
    let mut rules = elastic_rules(1);
    rules.push(TermRule::everywhere(MediumTerm::new(1, potential.clone())));
    InteractionSpec::new("fk-quasiperiodic", 1, rules, 2, Medium::QuasiPeriodic(potential))
}

fn medium_rule(
    rules: &mut Vec<TermRule>,
    potential: Option<Arc<FourierPotential>>,
) -> Medium {
    match potential {
        Some(v) => {
            rules.push(TermRule::everywhere(MediumTerm::new(1, v.clone())));
            if v.torus_dim() == 1 {
                Medium::Periodic(v)
            } else {
                Medium::QuasiPeriodic(v)
            }
        }
        None => Medium::None,
    }
}

/// Chain with pair couplings `c_r` (the mixed partial) for `r = 1..=cutoff`.
pub fn long_range_pair(
    coefficients: &[f64],
    potential: Option<Arc<FourierPotential>>,
) -> Result<InteractionSpec> {
    if coefficients.is_empty() {
        return Err(Error::InvalidModel("long-range-pair needs at least one coefficient".into()));
    }
    let mut rules: Vec<TermRule> = coefficients
        .iter()
        .enumerate()
        .map(|(r, &c)| TermRule::everywhere(PairTerm::new(Site::d1(r as i64 + 1), c)))
        .collect();
    let medium = medium_rule(&mut rules, potential);
    InteractionSpec::new("long-range-pair", 1, rules, coefficients.len() as u64 + 1, medium)
}

/// Couplings `c_r = −2^{−r}` up to `cutoff`.
pub fn geometric_coefficients(cutoff: usize) -> Vec<f64> {
    (1..=cutoff).map(|r| -(0.5f64).powi(r as i32)).collect()
}

/// Chain built from the three-site term alone, plus an optional medium.
pub fn three_body(gamma: f64, potential: Option<Arc<FourierPotential>>) -> Result<InteractionSpec> {
    let mut rules = vec![TermRule::everywhere(ThreeBodyTerm::new(gamma))];
    let medium = medium_rule(&mut rules, potential);
    InteractionSpec::new("three-body", 1, rules, 3, medium)
}

/// Negative control: bonds `(x+y)²/2` with mixed partial `+1`.
pub fn antiferromagnetic() -> Result<InteractionSpec> {
    let rules = vec![TermRule::everywhere(AntiBond::new(Site::d1(1), 1.0))];
    InteractionSpec::new("antiferromagnetic", 1, rules, 2, Medium::None)
}

/// On-site pinning only; the interaction graph has no edges.
pub fn decoupled() -> Result<InteractionSpec> {
    let rules = vec![TermRule::everywhere(PinningTerm::new(1, 1.0))];
    InteractionSpec::new("decoupled", 1, rules, 1, Medium::None)
}

/// Elastic chain cut into blocks of length `block`: the bond from `n` to
/// `n+1` is omitted whenever `(n+1) mod block == 0`.
pub fn blocks(block: i64) -> Result<InteractionSpec> {
    if block < 1 {
        return Err(Error::InvalidModel("block length must be positive".into()));
    }
    let rules = vec![
        TermRule {
            term: Arc::new(PairTerm::elastic(Site::d1(1))),
            anchors: AnchorFilter::SkipModulo { modulus: block },
        },
        TermRule::everywhere(PinningTerm::new(1, 1.0)),
    ];
    InteractionSpec::new("blocks", 1, rules, 2, Medium::None)
}
