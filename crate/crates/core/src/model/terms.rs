//! Local interaction terms `H_B` with analytic first and second partials.

use std::fmt;
use std::sync::Arc;

use super::potential::FourierPotential;
use crate::site::Site;

/// One local energy `H_B`, anchored at a base site and acting on the values
/// at `base + cell[p]`.
///
/// `x[p]` is the configuration value at `base + cell[p]`. Medium-dependent
/// terms may use `base` directly.
pub trait InteractionTerm: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn cell(&self) -> &[Site];
    fn energy(&self, base: &Site, x: &[f64]) -> f64;
    fn grad(&self, base: &Site, x: &[f64], p: usize) -> f64;
    fn hess(&self, base: &Site, x: &[f64], p: usize, q: usize) -> f64;

    /// Chebyshev diameter of the cell.
    fn range(&self) -> u64 {
        let cell = self.cell();
        let mut r = 0;
        for a in cell {
            for b in cell {
                r = r.max(a.cheb_dist(b));
            }
        }
        r
    }
}

/// Checks the structural invariants of a cell.
pub fn validate_cell(cell: &[Site], dim: usize) -> Result<(), String> {
    if cell.is_empty() {
        return Err("empty cell".into());
    }
    if cell.iter().any(|s| s.dim() != dim) {
        return Err(format!("cell offsets must have dimension {dim}"));
    }
    let mut sorted = cell.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != cell.len() {
        return Err("duplicate cell offsets".into());
    }
    Ok(())
}

/// `H = -c/2 (x_1 - x_0)^2`, whose mixed partial is `c`.
#[derive(Debug)]
pub struct PairTerm {
    name: String,
    cell: [Site; 2],
    coupling: f64,
}

impl PairTerm {
    pub fn new(offset: Site, coupling: f64) -> Self {
        PairTerm {
            name: format!("pair[{offset}]"),
            cell: [Site::origin(offset.dim()), offset],
            coupling,
        }
    }

    /// The standard elastic bond `(x - y)^2 / 2`.
    pub fn elastic(offset: Site) -> Self {
        let mut t = PairTerm::new(offset, -1.0);
        t.name = format!("bond[{offset}]");
        t
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

impl InteractionTerm for PairTerm {
    fn name(&self) -> &str {
        &self.name
    }
    fn cell(&self) -> &[Site] {
        &self.cell
    }
    fn energy(&self, _: &Site, x: &[f64]) -> f64 {
        let d = x[1] - x[0];
        -0.5 * self.coupling * d * d
    }
    fn grad(&self, _: &Site, x: &[f64], p: usize) -> f64 {
        let g = self.coupling * (x[1] - x[0]);
        if p == 0 {
            g
        } else {
            -g
        }
    }
    fn hess(&self, _: &Site, _: &[f64], p: usize, q: usize) -> f64 {
        if p == q {
            -self.coupling
        } else {
            self.coupling
        }
    }
}

/// `H = k/2 (x_0 + x_1)^2`: an antiferromagnetic bond with mixed partial `+k`.
#[derive(Debug)]
pub struct AntiBond {
    name: String,
    cell: [Site; 2],
    stiffness: f64,
}

impl AntiBond {
    pub fn new(offset: Site, stiffness: f64) -> Self {
        AntiBond {
            name: format!("anti[{offset}]"),
            cell: [Site::origin(offset.dim()), offset],
            stiffness,
        }
    }
}

impl InteractionTerm for AntiBond {
    fn name(&self) -> &str {
        &self.name
    }
    fn cell(&self) -> &[Site] {
        &self.cell
    }
    fn energy(&self, _: &Site, x: &[f64]) -> f64 {
        let s = x[0] + x[1];
        0.5 * self.stiffness * s * s
    }
    fn grad(&self, _: &Site, x: &[f64], _: usize) -> f64 {
        self.stiffness * (x[0] + x[1])
    }
    fn hess(&self, _: &Site, _: &[f64], _: usize, _: usize) -> f64 {
        self.stiffness
    }
}

/// Single-site medium term `H = -V(x α)`.
#[derive(Debug)]
pub struct MediumTerm {
    cell: [Site; 1],
    potential: Arc<FourierPotential>,
}

impl MediumTerm {
    pub fn new(dim: usize, potential: Arc<FourierPotential>) -> Self {
        MediumTerm {
            cell: [Site::origin(dim)],
            potential,
        }
    }

    pub fn potential(&self) -> &FourierPotential {
        &self.potential
    }
}

impl InteractionTerm for MediumTerm {
    fn name(&self) -> &str {
        "medium"
    }
    fn cell(&self) -> &[Site] {
        &self.cell
    }
    fn energy(&self, _: &Site, x: &[f64]) -> f64 {
        -self.potential.line_value(x[0])
    }
    fn grad(&self, _: &Site, x: &[f64], _: usize) -> f64 {
        -self.potential.line_d1(x[0])
    }
    fn hess(&self, _: &Site, x: &[f64], _: usize, _: usize) -> f64 {
        -self.potential.line_d2(x[0])
    }
}

/// Single-site pinning `H = k/2 x^2`.
#[derive(Debug)]
pub struct PinningTerm {
    cell: [Site; 1],
    stiffness: f64,
}

impl PinningTerm {
    pub fn new(dim: usize, stiffness: f64) -> Self {
        PinningTerm {
            cell: [Site::origin(dim)],
            stiffness,
        }
    }
}

impl InteractionTerm for PinningTerm {
    fn name(&self) -> &str {
        "pinning"
    }
    fn cell(&self) -> &[Site] {
        &self.cell
    }
    fn energy(&self, _: &Site, x: &[f64]) -> f64 {
        0.5 * self.stiffness * x[0] * x[0]
    }
    fn grad(&self, _: &Site, x: &[f64], _: usize) -> f64 {
        self.stiffness * x[0]
    }
    fn hess(&self, _: &Site, _: &[f64], _: usize, _: usize) -> f64 {
        self.stiffness
    }
}

/// `H = (x-y)^2/2 + (y-z)^2/2 + γ ln cosh(x - z)` on three consecutive sites.
#[derive(Debug)]
pub struct ThreeBodyTerm {
    cell: [Site; 3],
    gamma: f64,
}

impl ThreeBodyTerm {
    pub fn new(gamma: f64) -> Self {
        ThreeBodyTerm {
            cell: [Site::d1(0), Site::d1(1), Site::d1(2)],
            gamma,
        }
    }
}

/// `ln cosh(s)` without overflow for large `|s|`.
fn ln_cosh(s: f64) -> f64 {
    let a = s.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn sech2(s: f64) -> f64 {
    let c = 1.0 / s.cosh();
    c * c
}

impl InteractionTerm for ThreeBodyTerm {
    fn name(&self) -> &str {
        "three-body"
    }
    fn cell(&self) -> &[Site] {
        &self.cell
    }
    fn energy(&self, _: &Site, x: &[f64]) -> f64 {
        let a = x[0] - x[1];
        let b = x[1] - x[2];
        0.5 * a * a + 0.5 * b * b + self.gamma * ln_cosh(x[0] - x[2])
    }
    fn grad(&self, _: &Site, x: &[f64], p: usize) -> f64 {
        let t = self.gamma * (x[0] - x[2]).tanh();
        match p {
            0 => x[0] - x[1] + t,
            1 => 2.0 * x[1] - x[0] - x[2],
            _ => x[2] - x[1] - t,
        }
    }
    fn hess(&self, _: &Site, x: &[f64], p: usize, q: usize) -> f64 {
        let s = self.gamma * sech2(x[0] - x[2]);
        match (p.min(q), p.max(q)) {
            (0, 0) | (2, 2) => 1.0 + s,
            (1, 1) => 2.0,
            (0, 1) | (1, 2) => -1.0,
            _ => -s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(t: &dyn InteractionTerm, x: &[f64]) {
        let b = Site::origin(t.cell()[0].dim());
        let h = 1e-6;
        for p in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[p] += h;
            xm[p] -= h;
            let fd = (t.energy(&b, &xp) - t.energy(&b, &xm)) / (2.0 * h);
            assert!((fd - t.grad(&b, x, p)).abs() < 1e-7, "{} grad {p}", t.name());
            for q in 0..x.len() {
                let fd = (t.grad(&b, &xp, q) - t.grad(&b, &xm, q)) / (2.0 * h);
                assert!((fd - t.hess(&b, x, p, q)).abs() < 1e-6, "{} hess {p}{q}", t.name());
                assert_eq!(t.hess(&b, x, p, q), t.hess(&b, x, q, p));
            }
        }
    }

    #[test]
    fn analytic_partials_match_differences() {
        let pot = Arc::new(FourierPotential::cosine_demo(0.3, vec![1.0, 2f64.sqrt()]));
        fd_check(&PairTerm::new(Site::d1(2), -0.7), &[0.3, -1.1]);
        fd_check(&AntiBond::new(Site::d1(1), 1.0), &[0.3, -1.1]);
        fd_check(&MediumTerm::new(1, pot), &[0.77]);
        fd_check(&PinningTerm::new(1, 2.0), &[0.4]);
        fd_check(&ThreeBodyTerm::new(0.5), &[0.2, 0.9, -0.4]);
    }

    #[test]
    fn ln_cosh_is_stable() {
        assert!((ln_cosh(0.3) - 0.3f64.cosh().ln()).abs() < 1e-15);
        assert!((ln_cosh(1000.0) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-9);
        assert_eq!(ln_cosh(-5.0), ln_cosh(5.0));
    }

    #[test]
    fn ranges() {
        assert_eq!(PairTerm::new(Site::d1(3), -1.0).range(), 3);
        assert_eq!(ThreeBodyTerm::new(1.0).range(), 2);
        assert_eq!(PinningTerm::new(2, 1.0).range(), 0);
    }
}
