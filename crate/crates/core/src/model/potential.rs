//! Trigonometric potentials `V(θ) = ε Σ_k c_k e^{2πi k·θ}` on the torus.
//!
//! A periodic medium is the case `d = 1`, `α = (1)`; a quasi-periodic medium
//! has `d ≥ 2` and rationally independent `α`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use crate::error::{Error, Result};

/// One stored Fourier mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub k: Vec<i64>,
    pub coeff: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierPotential {
    epsilon: f64,
    alpha: Vec<f64>,
    modes: Vec<Mode>,
    /// `2π k·α` per mode, cached for evaluation along the winding line.
    freq: Vec<f64>,
}

const HERMITIAN_TOL: f64 = 1e-14;

impl FourierPotential {
    pub fn new(epsilon: f64, alpha: Vec<f64>, modes: Vec<Mode>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidModel("potential needs a nonempty alpha".into()));
        }
        if !epsilon.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel("non-finite potential parameters".into()));
        }
        let d = alpha.len();
        for m in &modes {
            if m.k.len() != d {
                return Err(Error::InvalidModel(format!(
                    "mode {:?} has length {} but alpha has length {d}",
                    m.k,
                    m.k.len()
                )));
            }
            if !(m.coeff.re.is_finite() && m.coeff.im.is_finite()) {
                return Err(Error::InvalidModel(format!("non-finite coefficient at {:?}", m.k)));
            }
        }
        let mut sorted = modes;
        sorted.sort_by(|a, b| a.k.cmp(&b.k));
        for w in sorted.windows(2) {
            if w[0].k == w[1].k {
                return Err(Error::InvalidModel(format!("duplicate mode {:?}", w[0].k)));
            }
        }
        for m in &sorted {
            let neg: Vec<i64> = m.k.iter().map(|v| -v).collect();
            let partner = sorted
                .iter()
                .find(|o| o.k == neg)
                .map(|o| o.coeff)
                .unwrap_or_default();
            if (partner - m.coeff.conj()).norm() > HERMITIAN_TOL * (1.0 + m.coeff.norm()) {
                return Err(Error::InvalidModel(format!(
                    "coefficients are not hermitian at mode {:?}",
                    m.k
                )));
            }
        }
        let freq = sorted.iter().map(|m| TAU * dot(&m.k, &alpha)).collect();
        Ok(FourierPotential {
            epsilon,
            alpha,
            modes: sorted,
            freq,
        })
    }

    /// The zero potential on a torus of dimension `alpha.len()`.
    pub fn zero(alpha: Vec<f64>) -> Self {
        FourierPotential::new(0.0, alpha, Vec::new()).expect("empty potential is valid")
    }

    /// `ε Σ_j cos(2π θ_j)`, the standard demo medium.
    pub fn cosine_demo(epsilon: f64, alpha: Vec<f64>) -> Self {
        let d = alpha.len();
        let mut modes = Vec::with_capacity(2 * d);
        for j in 0..d {
            for s in [1, -1] {
                let mut k = vec![0; d];
                k[j] = s;
                modes.push(Mode {
                    k,
                    coeff: Complex64::new(0.5, 0.0),
                });
            }
        }
        FourierPotential::new(epsilon, alpha, modes).expect("demo potential is valid")
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn torus_dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon == 0.0 || self.modes.iter().all(|m| m.coeff == Complex64::default())
    }

    /// Same shape with a different amplitude.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        FourierPotential {
            epsilon,
            ..self.clone()
        }
    }

    /// Smallest `|k·α|` over stored nonzero modes, with the minimizing mode.
    pub fn nonresonance(&self) -> Option<(Vec<i64>, f64)> {
        self.modes
            .iter()
            .filter(|m| m.k.iter().any(|&v| v != 0))
            .map(|m| (m.k.clone(), dot(&m.k, &self.alpha).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `V(θ)` at a torus point.
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.sum(theta, |_, c, e| (c * e).re)
    }

    /// `(α·∇)V(θ)`.
    pub fn d_alpha(&self, theta: &[f64]) -> f64 {
        self.sum(theta, |f, c, e| (c * e * Complex64::new(0.0, f)).re)
    }

    /// `(α·∇)²V(θ)`.
    pub fn d2_alpha(&self, theta: &[f64]) -> f64 {
        self.sum(theta, |f, c, e| -(c * e).re * f * f)
    }

    fn sum(&self, theta: &[f64], g: impl Fn(f64, Complex64, Complex64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (m, &f) in self.modes.iter().zip(&self.freq) {
            let phase = TAU * dot(&m.k, theta);
            acc += g(f, m.coeff, Complex64::cis(phase));
        }
        self.epsilon * acc
    }

    /// `V(xα)`, the potential along the winding line.
    pub fn line_value(&self, x: f64) -> f64 {
        self.line_sum(x, |_, c, e| (c * e).re)
    }

    /// `d/dx V(xα) = (∂_αV)(xα)`.
    pub fn line_d1(&self, x: f64) -> f64 {
        self.line_sum(x, |f, c, e| (c * e * Complex64::new(0.0, f)).re)
    }

    /// `d²/dx² V(xα)`.
    pub fn line_d2(&self, x: f64) -> f64 {
        self.line_sum(x, |f, c, e| -(c * e).re * f * f)
    }

    fn line_sum(&self, x: f64, g: impl Fn(f64, Complex64, Complex64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (m, &f) in self.modes.iter().zip(&self.freq) {
            acc += g(f, m.coeff, Complex64::cis(f * x));
        }
        self.epsilon * acc
    }
}

pub(crate) fn dot(k: &[i64], a: &[f64]) -> f64 {
    k.iter().zip(a).map(|(&k, &a)| k as f64 * a).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> FourierPotential {
        FourierPotential::cosine_demo(0.01, vec![1.0, 2f64.sqrt()])
    }

    #[test]
    fn demo_matches_closed_form() {
        let v = demo();
        let th = [0.13, 0.71];
        let want = 0.01 * ((TAU * th[0]).cos() + (TAU * th[1]).cos());
        assert!((v.value(&th) - want).abs() < 1e-16);
        let x = 0.37;
        let want = 0.01 * ((TAU * x).cos() + (TAU * x * 2f64.sqrt()).cos());
        assert!((v.line_value(x) - want).abs() < 1e-16);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let v = demo();
        let h = 1e-5;
        for &x in &[-1.3, 0.0, 0.42, 7.9] {
            let fd1 = (v.line_value(x + h) - v.line_value(x - h)) / (2.0 * h);
            assert!((fd1 - v.line_d1(x)).abs() < 1e-9);
            let fd2 = (v.line_d1(x + h) - v.line_d1(x - h)) / (2.0 * h);
            assert!((fd2 - v.line_d2(x)).abs() < 1e-8);
            let th = [x, 2f64.sqrt() * x];
            assert!((v.d_alpha(&th) - v.line_d1(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let modes = vec![Mode {
            k: vec![1, 0],
            coeff: Complex64::new(1.0, 0.0),
        }];
        assert!(FourierPotential::new(1.0, vec![1.0, 2.0], modes).is_err());
    }

    #[test]
    fn nonresonance_reports_worst_mode() {
        let (k, d) = demo().nonresonance().unwrap();
        assert_eq!(d, 1.0);
        assert_eq!(k.iter().map(|v| v.abs()).sum::<i64>(), 1);
        let res = FourierPotential::new(
            1.0,
            vec![1.0, 1.0],
            vec![
                Mode { k: vec![1, -1], coeff: Complex64::new(0.5, 0.0) },
                Mode { k: vec![-1, 1], coeff: Complex64::new(0.5, 0.0) },
            ],
        )
        .unwrap();
        assert_eq!(res.nonresonance().unwrap().1, 0.0);
    }
}
