//! Hull functions `h: T^d → R` of quasi-periodic equilibria
//! `u_n = nω + h(nωα)`, stored as truncated Fourier series.

pub mod file;
mod gmres;
pub mod grid;
pub mod solver;

use std::f64::consts::TAU;

use num_complex::Complex64;

pub use grid::Grid;
pub use solver::{hull_residual, solve_hull, EpsilonSchedule, HullSolution, SolverOptions};

use crate::error::{Error, Result};
use crate::model::potential::dot;
use crate::model::LatticeConfiguration;

/// `h_β(σ) = Σ_{|k|∞ ≤ N} c_k e^{2πik·σ} + offset`.
///
/// The zero mode is always 0; the average of a translate lives in `offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct HullFunction {
    alpha: Vec<f64>,
    omega: f64,
    n_trunc: usize,
    coeffs: Vec<Complex64>,
    offset: f64,
}

impl HullFunction {
    pub fn zero(alpha: Vec<f64>, omega: f64, n_trunc: usize) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidModel("a hull needs a torus of dimension at least 2".into()));
        }
        if !omega.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel("non-finite hull parameters".into()));
        }
        let side = 2 * n_trunc + 1;
        let len = side
            .checked_pow(alpha.len() as u32)
            .filter(|&l| l <= 1 << 26)
            .ok_or_else(|| Error::InvalidModel("hull truncation too large".into()))?;
        Ok(HullFunction {
            alpha,
            omega,
            n_trunc,
            coeffs: vec![Complex64::default(); len],
            offset: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn side(&self) -> usize {
        2 * self.n_trunc + 1
    }

    fn flat(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim() {
            return None;
        }
        let n = self.n_trunc as i64;
        let mut idx = 0;
        for &kj in k {
            if kj.abs() > n {
                return None;
            }
            idx = idx * self.side() + (kj + n) as usize;
        }
        Some(idx)
    }

    fn unflat(&self, mut idx: usize, out: &mut [i64]) {
        let n = self.n_trunc as i64;
        for a in (0..self.dim()).rev() {
            out[a] = (idx % self.side()) as i64 - n;
            idx /= self.side();
        }
    }

    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.flat(k).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    /// Sets `c_k` and `c_{-k} = conj(c_k)`.
    pub fn set_coeff(&mut self, k: &[i64], c: Complex64) -> Result<()> {
        let i = self
            .flat(k)
            .ok_or_else(|| Error::Contract(format!("mode {k:?} outside the truncation cube")))?;
        if k.iter().all(|&v| v == 0) {
            return Err(Error::Contract("the zero mode of a hull is fixed at 0".into()));
        }
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        let j = self.flat(&neg).expect("cube is symmetric");
        self.coeffs[i] = c;
        self.coeffs[j] = c.conj();
        Ok(())
    }

    /// Nonzero modes in lexicographic order.
    pub fn modes(&self) -> Vec<(Vec<i64>, Complex64)> {
        let mut k = vec![0; self.dim()];
        let mut out = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != Complex64::default() {
                self.unflat(i, &mut k);
                out.push((k.clone(), *c));
            }
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `e(kθ_a)` for `k = -N..=N` on each axis.
    fn phase_tables(&self, theta: &[f64]) -> Vec<Vec<Complex64>> {
        let n = self.n_trunc as i64;
        theta
            .iter()
            .map(|&t| {
                let t = t.rem_euclid(1.0);
                (-n..=n).map(|k| Complex64::cis(TAU * k as f64 * t)).collect()
            })
            .collect()
    }

    /// `Σ_k c_k Π_a t_a[k_a]`, contracting one axis at a time.
    fn contract(&self, tables: &[Vec<Complex64>]) -> Complex64 {
        let side = self.side();
        let row = |r: &[Complex64], t: &[Complex64]| r.iter().zip(t).map(|(c, e)| c * e).sum::<Complex64>();
        let (last, rest) = tables.split_last().expect("at least one axis");
        let mut cur: Vec<Complex64> = self.coeffs.chunks_exact(side).map(|r| row(r, last)).collect();
        for t in rest.iter().rev() {
            cur = cur.chunks_exact(side).map(|r| row(r, t)).collect();
        }
        cur[0]
    }

    /// `h_β(θ)`, including the offset.
    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.contract(&self.phase_tables(theta)).re + self.offset
    }

    /// `(α·∇)h(θ)`.
    pub fn d_alpha(&self, theta: &[f64]) -> f64 {
        let tables = self.phase_tables(theta);
        let n = self.n_trunc as i64;
        let mut acc = 0.0;
        for (a, w) in self.alpha.iter().enumerate() {
            // ∂_a multiplies mode k by 2πi k_a.
            let mut t = tables.clone();
            for (k, e) in (-n..=n).zip(t[a].iter_mut()) {
                *e *= Complex64::new(0.0, TAU * k as f64);
            }
            acc += w * self.contract(&t).re;
        }
        acc
    }

    /// Lattice value `u_n = nω + h_β(nωα)`.
    pub fn lattice_value(&self, n: i64) -> f64 {
        let x = n as f64 * self.omega;
        let theta: Vec<f64> = self.alpha.iter().map(|a| (x * a).rem_euclid(1.0)).collect();
        x + self.eval(&theta)
    }

    /// `h_β(σ) = h(σ + βα) + β`, as phase-shifted coefficients plus offset.
    pub fn translate(&self, beta: f64) -> HullFunction {
        let mut out = self.clone();
        let mut k = vec![0; self.dim()];
        // Mode `-k` sits at the mirrored flat index; set it from `k` so the
        // result stays exactly hermitian.
        let len = out.coeffs.len();
        for i in 0..len / 2 {
            let c = self.coeffs[i];
            if c == Complex64::default() {
                continue;
            }
            self.unflat(i, &mut k);
            let phase = (beta * dot(&k, &self.alpha)).rem_euclid(1.0);
            let t = c * Complex64::cis(TAU * phase);
            out.coeffs[i] = t;
            out.coeffs[len - 1 - i] = t.conj();
        }
        out.offset += beta;
        out
    }

    /// Spectral-layout coefficients on `grid`, optionally weighted per mode.
    pub(crate) fn to_spectral(
        &self,
        grid: &Grid,
        weight: impl Fn(&[i64]) -> Complex64,
    ) -> Result<Vec<Complex64>> {
        if grid.dim() != self.dim() || grid.per_axis() < self.side() {
            return Err(Error::Contract(format!(
                "grid resolution {} below 2N+1 = {}",
                grid.per_axis(),
                self.side()
            )));
        }
        let mut out = vec![Complex64::default(); grid.len()];
        let mut k = vec![0; self.dim()];
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == Complex64::default() {
                continue;
            }
            self.unflat(i, &mut k);
            let j = grid.index_of_mode(&k).expect("grid holds the cube");
            out[j] = *c * weight(&k);
        }
        Ok(out)
    }

    /// Grid values of `h` (without the offset) with per-mode weights.
    pub(crate) fn grid_values(
        &self,
        grid: &Grid,
        weight: impl Fn(&[i64]) -> Complex64,
    ) -> Result<Vec<f64>> {
        let mut s = self.to_spectral(grid, weight)?;
        grid.inverse(&mut s);
        Ok(s.into_iter().map(|c| c.re).collect())
    }

    /// Replaces the coefficients by the spectral data of a real grid field
    /// on a grid with exactly `2N+1` points per axis. The zero mode is
    /// dropped and hermitian symmetry is imposed.
    pub(crate) fn set_from_grid(&mut self, grid: &Grid, values: &[f64]) {
        assert_eq!(grid.per_axis(), self.side());
        let mut s = Grid::to_complex(values);
        grid.forward(&mut s);
        let mut k = vec![0; self.dim()];
        let mut neg = vec![0; self.dim()];
        for i in 0..self.coeffs.len() {
            self.unflat(i, &mut k);
            for (a, b) in neg.iter_mut().zip(&k) {
                *a = -b;
            }
            let c = s[grid.index_of_mode(&k).expect("cube")];
            let cn = s[grid.index_of_mode(&neg).expect("cube")];
            self.coeffs[i] = 0.5 * (c + cn.conj());
        }
        let zero = self.flat(&vec![0; self.dim()]).expect("zero mode");
        self.coeffs[zero] = Complex64::default();
    }

    /// `min_σ 1 + (α·∇)h(σ)` over an `m^d` grid.
    pub fn monotonicity_margin(&self, m: usize) -> Result<f64> {
        let grid = Grid::new(self.dim(), m.max(self.side()));
        let dh = self.grid_values(&grid, |k| Complex64::new(0.0, TAU * dot(k, &self.alpha)))?;
        Ok(dh.iter().fold(f64::INFINITY, |a, &v| a.min(1.0 + v)))
    }

    /// Sup norm of `h - offset` on an `m^d` grid.
    pub fn sup_norm(&self, m: usize) -> Result<f64> {
        let grid = Grid::new(self.dim(), m.max(self.side()));
        let v = self.grid_values(&grid, |_| Complex64::new(1.0, 0.0))?;
        Ok(v.iter().fold(0.0, |a, &x| a.max(x.abs())))
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> HullFunction {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= s;
        }
        out
    }
}

/// Lattice configuration `u_n^β = nω + h_β(nωα)`.
pub fn sample_config(h: &HullFunction, beta: f64) -> LatticeConfiguration {
    LatticeConfiguration::hull(std::sync::Arc::new(h.translate(beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Field;
    use crate::site::Site;

    fn sample_hull() -> HullFunction {
        let mut h = HullFunction::zero(vec![1.0, 2f64.sqrt()], 0.618, 3).unwrap();
        h.set_coeff(&[1, 0], Complex64::new(0.01, 0.002)).unwrap();
        h.set_coeff(&[0, 2], Complex64::new(-0.003, 0.0)).unwrap();
        h.set_coeff(&[1, -1], Complex64::new(0.0, 0.004)).unwrap();
        h
    }

    fn direct(h: &HullFunction, th: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, c) in h.modes() {
            acc += (c * Complex64::cis(TAU * dot(&k, th))).re;
        }
        acc + h.offset()
    }

    #[test]
    fn eval_matches_direct_sum() {
        let h = sample_hull();
        for th in [[0.1, 0.2], [0.77, -3.4], [12.5, 0.0]] {
            assert!((h.eval(&th) - direct(&h, &th)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_mode_is_fixed() {
        let mut h = sample_hull();
        assert!(h.set_coeff(&[0, 0], Complex64::new(1.0, 0.0)).is_err());
        assert!(h.set_coeff(&[4, 0], Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn translate_zero_is_identity_and_composes() {
        let h = sample_hull();
        assert_eq!(h.translate(0.0), h);
        let a = h.translate(0.3).translate(1.1);
        let b = h.translate(1.4);
        assert!((a.offset() - b.offset()).abs() < 1e-12);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn translate_shifts_argument() {
        let h = sample_hull();
        let beta = 0.37;
        let hb = h.translate(beta);
        let th = [0.25, 0.6];
        let shifted = [th[0] + beta * h.alpha[0], th[1] + beta * h.alpha[1]];
        assert!((hb.eval(&th) - (h.eval(&shifted) + beta)).abs() < 1e-14);
    }

    #[test]
    fn zero_hull_samples_linear_configuration() {
        let h = HullFunction::zero(vec![1.0, 2f64.sqrt()], 0.3, 4).unwrap();
        let u = sample_config(&h, 0.5);
        for n in -5..5 {
            assert_eq!(u.value(&Site::d1(n)), n as f64 * 0.3 + 0.5);
        }
        assert_eq!(h.monotonicity_margin(9).unwrap(), 1.0);
    }

    #[test]
    fn margin_matches_derivative_and_detects_folds() {
        let h = sample_hull();
        let m = h.monotonicity_margin(64).unwrap();
        let mut worst = f64::INFINITY;
        for i in 0..64 {
            for j in 0..64 {
                let th = [i as f64 / 64.0, j as f64 / 64.0];
                worst = worst.min(1.0 + h.d_alpha(&th));
            }
        }
        assert!((m - worst).abs() < 1e-14);
        assert!(h.scaled(100.0).monotonicity_margin(64).unwrap() < 0.0);
    }

    #[test]
    fn d_alpha_matches_difference_quotient() {
        let h = sample_hull();
        let th = [0.3, 0.9];
        let e = 1e-6;
        let fwd = [th[0] + e * h.alpha[0], th[1] + e * h.alpha[1]];
        let bwd = [th[0] - e * h.alpha[0], th[1] - e * h.alpha[1]];
        let fd = (h.eval(&fwd) - h.eval(&bwd)) / (2.0 * e);
        assert!((fd - h.d_alpha(&th)).abs() < 1e-8);
    }
}
