//! Newton iteration for the hull equation
//!
//! `R(h)(σ) = h(σ+ωα) + h(σ−ωα) − 2h(σ) + ∂_αV(σ + α h(σ)) = 0`
//!
//! collocated on the `(2N+1)^d` grid. Each step solves the bordered system
//! `(Δ_ω + c) δ − μ = −(R − λ)`, `mean δ = 0`, where `Δ_ω` is the shift
//! Laplacian with symbol `2cos(2πωk·α) − 2`, `c = ∂²_αV(σ + αh)` and `λ` is
//! a scalar that absorbs the constant mode and vanishes at a solution.

use std::f64::consts::TAU;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::gmres::gmres;
use super::grid::Grid;
use super::HullFunction;
use crate::error::{Error, Result};
use crate::model::potential::dot;
use crate::model::FourierPotential;

/// Continuation in the potential amplitude: start at `initial`, double on
/// success, halve the step on failure, give up below `min_step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub target: f64,
    pub min_step: f64,
}

impl EpsilonSchedule {
    /// Solve at the target amplitude directly, falling back to halving.
    pub fn direct(target: f64) -> Self {
        EpsilonSchedule {
            initial: target,
            target,
            min_step: target.abs() / 1024.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    pub n_trunc: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub divisor_floor: f64,
    /// Grids with fewer points than this use a dense LU solve.
    pub dense_below: usize,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// Refinement factor of the a-posteriori residual check.
    pub verify_refinement: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            n_trunc: 32,
            tol: 1e-12,
            max_iter: 12,
            divisor_floor: 1e-6,
            dense_below: 64 * 64,
            gmres_restart: 120,
            gmres_max_iter: 3000,
            verify_refinement: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageLog {
    pub epsilon: f64,
    /// `max |R|` on the collocation grid before each step and after the last.
    pub residuals: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DivisorReport {
    pub mode: Vec<i64>,
    /// `dist(ω k·α, Z)`.
    pub divisor: f64,
}

#[derive(Clone, Debug)]
pub struct HullSolution {
    pub hull: HullFunction,
    pub stages: Vec<StageLog>,
    pub min_divisor: Option<DivisorReport>,
    pub residual: f64,
    /// `max |R|` on the refined grid.
    pub refined_residual: f64,
    pub margin: f64,
    pub sup_norm: f64,
}

/// Residuals at or below this level are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-14;

impl HullSolution {
    pub fn final_stage(&self) -> Option<&StageLog> {
        self.stages.last()
    }

    /// Newton updates taken in the final stage.
    pub fn newton_steps(&self) -> usize {
        self.final_stage().map_or(0, |s| s.residuals.len().saturating_sub(1))
    }

    /// Ratios `r_{k+1} / r_k²` of the final stage.
    pub fn ratios(&self) -> Vec<(f64, f64, f64)> {
        let Some(s) = self.final_stage() else {
            return Vec::new();
        };
        s.residuals
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| (w[0], w[1], w[1] / (w[0] * w[0])))
            .collect()
    }

    /// `C = max r_{k+1}/r_k²` over the last three steps whose output is
    /// above the round-off floor.
    pub fn quadratic_constant(&self) -> Option<f64> {
        let r: Vec<f64> = self
            .ratios()
            .into_iter()
            .filter(|(_, next, _)| *next > NOISE_FLOOR)
            .map(|(_, _, c)| c)
            .collect();
        let tail = &r[r.len().saturating_sub(3)..];
        tail.iter().copied().reduce(f64::max)
    }
}

fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Smallest `dist(ω k·α, Z)` over nonzero modes of the truncation cube.
pub fn small_divisor(alpha: &[f64], omega: f64, n_trunc: usize) -> Option<DivisorReport> {
    let d = alpha.len();
    let side = 2 * n_trunc + 1;
    let n = n_trunc as i64;
    let mut best: Option<DivisorReport> = None;
    let mut k = vec![0i64; d];
    for idx in 0..side.pow(d as u32) {
        let mut r = idx;
        for a in (0..d).rev() {
            k[a] = (r % side) as i64 - n;
            r /= side;
        }
        // One representative of each pair ±k: first nonzero entry positive.
        if k.iter().find(|&&v| v != 0).is_none_or(|&v| v < 0) {
            continue;
        }
        let div = dist_to_int(omega * dot(&k, alpha));
        let size = |m: &[i64]| m.iter().map(|v| v.abs()).max().unwrap_or(0);
        if best
            .as_ref()
            .is_none_or(|b| div < b.divisor || (div == b.divisor && size(&k) < size(&b.mode)))
        {
            best = Some(DivisorReport {
                mode: k.clone(),
                divisor: div,
            });
        }
    }
    best
}

fn shift_symbol(k: &[i64], alpha: &[f64], omega: f64) -> f64 {
    2.0 * (TAU * omega * dot(k, alpha)).cos() - 2.0
}

/// `R(h)` on an `m^d` grid, `m ≥ 2N+1`.
pub fn hull_residual(h: &HullFunction, v: &FourierPotential, m: usize) -> Result<Vec<f64>> {
    if v.alpha() != h.alpha() {
        return Err(Error::Contract("hull and potential use different alpha".into()));
    }
    if m < 2 * h.n_trunc() + 1 {
        return Err(Error::Contract(format!(
            "grid resolution {m} below 2N+1 = {}",
            2 * h.n_trunc() + 1
        )));
    }
    let grid = Grid::new(h.dim(), m);
    let (alpha, omega) = (h.alpha(), h.omega());
    let vals = h.grid_values(&grid, |_| Complex64::new(1.0, 0.0))?;
    let shifts = h.grid_values(&grid, |k| Complex64::new(shift_symbol(k, alpha, omega), 0.0))?;
    let off = h.offset();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut th = [0.0; 8];
            let th = &mut th[..grid.dim()];
            grid.point(i, th);
            let hv = vals[i] + off;
            for (t, a) in th.iter_mut().zip(alpha) {
                *t += a * hv;
            }
            shifts[i] + v.d_alpha(th)
        })
        .collect())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

struct Stage<'a> {
    grid: &'a Grid,
    alpha: &'a [f64],
    symbol: Vec<f64>,
    opts: &'a SolverOptions,
}

impl Stage<'_> {
    fn residual_and_curvature(
        &self,
        v: &FourierPotential,
        h: &HullFunction,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let vals = h.grid_values(g, |_| Complex64::new(1.0, 0.0)).expect("grid matches");
        let mut s: Vec<Complex64> = h.to_spectral(g, |_| Complex64::new(1.0, 0.0)).expect("grid matches");
        for (c, w) in s.iter_mut().zip(&self.symbol) {
            *c *= w;
        }
        g.inverse(&mut s);
        let pointwise: Vec<(f64, f64)> = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let mut th = [0.0; 8];
                let th = &mut th[..g.dim()];
                g.point(i, th);
                for (t, a) in th.iter_mut().zip(self.alpha) {
                    *t += a * vals[i];
                }
                (v.d_alpha(th), v.d2_alpha(th))
            })
            .collect();
        let r = s.iter().zip(&pointwise).map(|(a, p)| a.re + p.0).collect();
        let c = pointwise.iter().map(|p| p.1).collect();
        (r, c, vals)
    }

    fn apply_laplacian(&self, x: &[f64], out: &mut [f64]) {
        let mut s = Grid::to_complex(x);
        self.grid.forward(&mut s);
        for (c, w) in s.iter_mut().zip(&self.symbol) {
            *c *= w;
        }
        self.grid.inverse(&mut s);
        for (o, c) in out.iter_mut().zip(&s) {
            *o = c.re;
        }
    }

    /// Solves `(Δ + c) δ − μ = rhs`, `mean δ = 0`. The flag is false when
    /// the solve produced no usable step.
    fn solve_bordered(&self, c: &[f64], rhs: &[f64], fnorm: f64) -> (Vec<f64>, f64, usize, bool) {
        let n = rhs.len();
        if n < self.opts.dense_below {
            return self.solve_dense(c, rhs);
        }
        let inv_n = 1.0 / n as f64;
        let apply_a = |x: &[f64], y: &mut [f64]| {
            self.apply_laplacian(&x[..n], &mut y[..n]);
            let mu = x[n];
            let mut mean = 0.0;
            for i in 0..n {
                y[i] += c[i] * x[i] - mu;
                mean += x[i];
            }
            y[n] = mean * inv_n;
        };
        let cbar = c.iter().sum::<f64>() * inv_n;
        let clamp = self.opts.divisor_floor * self.opts.divisor_floor;
        let minv = |x: &[f64], y: &mut [f64]| {
            let mut s = Grid::to_complex(&x[..n]);
            self.grid.forward(&mut s);
            let y0 = s[0].re;
            let z = x[n];
            for (i, v) in s.iter_mut().enumerate().skip(1) {
                let mut d = self.symbol[i] + cbar;
                if d.abs() < clamp {
                    d = clamp.copysign(d);
                }
                *v /= d;
            }
            s[0] = Complex64::new(z, 0.0);
            self.grid.inverse(&mut s);
            for (o, v) in y[..n].iter_mut().zip(&s) {
                *o = v.re;
            }
            y[n] = cbar * z - y0;
        };
        let mut b = rhs.to_vec();
        b.push(0.0);
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let eta = fnorm.min(1e-3);
        let tol = (eta * bnorm).max(1e-15 * (n as f64).sqrt());
        let out = gmres(apply_a, minv, &b, tol, self.opts.gmres_restart, self.opts.gmres_max_iter);
        if !out.converged {
            debug!("gmres stopped at residual {:e} (target {tol:e})", out.residual);
        }
        // A missed forcing term still gives a usable inexact Newton step as
        // long as the linear residual shrank by a fixed factor.
        let usable = out.converged || out.residual <= 0.1 * bnorm;
        let mu = out.x[n];
        let mut x = out.x;
        x.truncate(n);
        (x, mu, out.iterations, usable)
    }

    fn solve_dense(&self, c: &[f64], rhs: &[f64]) -> (Vec<f64>, f64, usize, bool) {
        let g = self.grid;
        let n = rhs.len();
        let d = g.dim();
        let m = g.per_axis();
        // Δ is a convolution: Δ_ij = kernel(σ_i − σ_j).
        let mut kern: Vec<Complex64> = self.symbol.iter().map(|&s| Complex64::new(s / n as f64, 0.0)).collect();
        g.inverse(&mut kern);
        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut mi = vec![0usize; d];
        let mut mj = vec![0usize; d];
        for i in 0..n {
            g.multi_index(i, &mut mi);
            for j in 0..n {
                g.multi_index(j, &mut mj);
                let mut diff = 0;
                for ax in 0..d {
                    diff = diff * m + (mi[ax] + m - mj[ax]) % m;
                }
                a[(i, j)] = kern[diff].re;
            }
            a[(i, i)] += c[i];
            a[(i, n)] = -1.0;
            a[(n, i)] = 1.0 / n as f64;
        }
        let mut b = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            b[i] = rhs[i];
        }
        match a.lu().solve(&b) {
            Some(x) => (x.as_slice()[..n].to_vec(), x[n], 1, true),
            None => (vec![0.0; n], 0.0, 1, false),
        }
    }

    fn newton(&self, v: &FourierPotential, start: &HullFunction) -> (HullFunction, StageLog) {
        let mut h = start.clone();
        let mut lambda = 0.0;
        let mut log = StageLog {
            epsilon: v.epsilon(),
            residuals: Vec::new(),
            linear_iterations: Vec::new(),
            converged: false,
        };
        for it in 0..=self.opts.max_iter {
            let (r, c, vals) = self.residual_and_curvature(v, &h);
            let rmax = max_abs(&r);
            log.residuals.push(rmax);
            debug!("eps {:e} step {it}: max|R| = {rmax:e}, lambda = {lambda:e}", v.epsilon());
            if rmax < self.opts.tol {
                log.converged = true;
                break;
            }
            let first = log.residuals[0];
            // Past the first two steps a healthy Newton iteration at least
            // halves the residual; anything slower means the predictor is
            // outside the basin and a smaller continuation step is cheaper.
            let stalled = it >= 2 && rmax > 0.5 * log.residuals[it - 1];
            if !rmax.is_finite() || it == self.opts.max_iter || stalled || (it > 0 && rmax > 1e3 * first.max(1e-300)) {
                break;
            }
            let f: Vec<f64> = r.iter().map(|x| -(x - lambda)).collect();
            let fnorm = max_abs(&f);
            let (delta, mu, lin, solved) = self.solve_bordered(&c, &f, fnorm);
            log.linear_iterations.push(lin);
            if !solved {
                debug!("linear solve missed its tolerance; the next residual decides");
            }
            let next: Vec<f64> = vals.iter().zip(&delta).map(|(a, b)| a + b).collect();
            h.set_from_grid(self.grid, &next);
            lambda += mu;
        }
        (h, log)
    }
}

/// Spectral Newton solve of the hull equation with continuation in ε.
pub fn solve_hull(
    potential: &FourierPotential,
    omega: f64,
    schedule: EpsilonSchedule,
    opts: &SolverOptions,
) -> Result<HullSolution> {
    let alpha = potential.alpha().to_vec();
    if alpha.len() < 2 {
        return Err(Error::InvalidModel("hull solver needs a torus of dimension at least 2".into()));
    }
    if !(opts.tol > 0.0 && opts.divisor_floor >= 0.0) {
        return Err(Error::Contract("solver tolerances must be positive".into()));
    }
    let min_divisor = small_divisor(&alpha, omega, opts.n_trunc);
    if let Some(dv) = &min_divisor {
        if dv.divisor < opts.divisor_floor {
            return Err(Error::Resonance {
                mode: dv.mode.clone(),
                divisor: dv.divisor,
                floor: opts.divisor_floor,
            });
        }
    }
    let mut h = HullFunction::zero(alpha.clone(), omega, opts.n_trunc)?;
    let grid = Grid::new(alpha.len(), 2 * opts.n_trunc + 1);
    let mut symbol = vec![0.0; grid.len()];
    let mut k = vec![0i64; alpha.len()];
    for (i, s) in symbol.iter_mut().enumerate() {
        grid.mode(i, &mut k);
        *s = shift_symbol(&k, &alpha, omega);
    }
    let stage = Stage {
        grid: &grid,
        alpha: &alpha,
        symbol,
        opts,
    };

    let target = potential.epsilon();
    let mut stages = Vec::new();
    let mut done = 0.0;
    // Step length grows after a success and halves after a failure.
    let mut step = if schedule.initial > 0.0 && schedule.initial.abs() < target.abs() {
        schedule.initial.abs()
    } else {
        target.abs()
    };
    let mut attempt = step.copysign(target);
    loop {
        let v = potential.with_epsilon(attempt);
        let (cand, log) = stage.newton(&v, &h);
        let ok = log.converged;
        info!(
            "continuation eps = {attempt:e}: {} after {} steps",
            if ok { "converged" } else { "failed" },
            log.residuals.len() - 1
        );
        let history = log.residuals.clone();
        stages.push(log);
        if ok {
            h = cand;
            done = attempt;
            if done == target {
                break;
            }
            step *= 2.0;
        } else {
            step /= 2.0;
            if step < schedule.min_step.max(f64::MIN_POSITIVE) {
                return Err(Error::Convergence {
                    epsilon: attempt,
                    history,
                });
            }
        }
        attempt = if done.abs() + step >= target.abs() {
            target
        } else {
            done + step.copysign(target)
        };
    }
    let refined = hull_residual(&h, potential, opts.verify_refinement.max(1) * grid.per_axis())?;
    let residual = stages.last().and_then(|s| s.residuals.last().copied()).unwrap_or(0.0);
    let fine = grid.per_axis() * 2;
    Ok(HullSolution {
        margin: h.monotonicity_margin(fine)?,
        sup_norm: h.sup_norm(fine)?,
        refined_residual: max_abs(&refined),
        residual,
        hull: h,
        stages,
        min_divisor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha() -> Vec<f64> {
        vec![1.0, 2f64.sqrt()]
    }

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn zero_potential_needs_no_step() {
        let v = FourierPotential::zero(alpha());
        let opts = SolverOptions {
            n_trunc: 4,
            ..Default::default()
        };
        let sol = solve_hull(&v, golden(), EpsilonSchedule::direct(0.0), &opts).unwrap();
        assert!(sol.hull.modes().is_empty());
        assert!(sol.newton_steps() <= 1);
        assert_eq!(sol.margin, 1.0);
    }

    #[test]
    fn resonant_alpha_is_rejected() {
        let v = FourierPotential::cosine_demo(0.001, vec![1.0, 1.0]);
        let opts = SolverOptions {
            n_trunc: 4,
            ..Default::default()
        };
        match solve_hull(&v, golden(), EpsilonSchedule::direct(0.001), &opts) {
            Err(Error::Resonance { mode, divisor, .. }) => {
                assert_eq!(mode, vec![1, -1]);
                assert!(divisor < 1e-12);
            }
            other => panic!("expected resonance, got {other:?}"),
        }
    }

    #[test]
    fn residual_of_zero_potential_is_shift_laplacian() {
        let mut h = HullFunction::zero(alpha(), golden(), 3).unwrap();
        h.set_coeff(&[1, 1], Complex64::new(0.02, -0.01)).unwrap();
        h.set_coeff(&[0, 3], Complex64::new(0.005, 0.0)).unwrap();
        let v = FourierPotential::zero(alpha());
        let m = 11;
        let r = hull_residual(&h, &v, m).unwrap();
        let g = Grid::new(2, m);
        let w = golden();
        for (i, ri) in r.iter().enumerate() {
            let mut p = [0.0; 2];
            g.point(i, &mut p);
            let plus = [p[0] + w * alpha()[0], p[1] + w * alpha()[1]];
            let minus = [p[0] - w * alpha()[0], p[1] - w * alpha()[1]];
            let want = h.eval(&plus) + h.eval(&minus) - 2.0 * h.eval(&p);
            assert!((ri - want).abs() < 1e-15);
        }
        assert!(hull_residual(&h, &v, 5).is_err());
    }

    #[test]
    fn dense_and_iterative_paths_agree() {
        let v = FourierPotential::cosine_demo(0.001, alpha());
        let dense = SolverOptions {
            n_trunc: 8,
            ..Default::default()
        };
        let iter = SolverOptions {
            dense_below: 0,
            ..dense
        };
        let a = solve_hull(&v, golden(), EpsilonSchedule::direct(0.001), &dense).unwrap();
        let b = solve_hull(&v, golden(), EpsilonSchedule::direct(0.001), &iter).unwrap();
        assert!(a.residual < 1e-12 && b.residual < 1e-12);
        for ((ka, ca), (kb, cb)) in a.hull.modes().iter().zip(b.hull.modes().iter()) {
            assert_eq!(ka, kb);
            assert!((ca - cb).norm() < 1e-12);
        }
    }

    #[test]
    fn small_divisor_of_golden_demo_is_above_floor() {
        let d = small_divisor(&alpha(), golden(), 32).unwrap();
        assert!(d.divisor > 1e-6 && d.divisor < 1e-3, "{}", d.divisor);
    }
}
