//! Finite-window minimization of `φ ↦ Σ_B H_B(u+φ)` and the exhaustive
//! grid oracle used to validate it.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::local::LocalProblem;
use crate::error::{Error, Result};
use crate::model::probes::coercivity_probe;
use crate::model::{Field, InteractionSpec, Perturbation};
use crate::site::SiteSet;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Newton stops once `max |E_i(u+φ)|` falls below this.
    pub grad_tol: f64,
    /// Accepted stationarity if the search stalls on round-off.
    pub stationarity_tol: f64,
    pub check_coercivity: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iter: 200,
            grad_tol: 1e-13,
            stationarity_tol: 1e-8,
            check_coercivity: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowMinimum {
    pub phi_star: Perturbation,
    /// `Γ(φ*; u, window)`.
    pub gamma_star: f64,
    /// `max_{i∈window} |E_i(u+φ*)|`.
    pub stationarity: f64,
    pub iterations: usize,
}

/// Ray lengths used by the coercivity precondition.
pub const COERCIVITY_RAYS: [f64; 7] = [-1000.0, -100.0, -10.0, 0.0, 10.0, 100.0, 1000.0];

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Newton direction for the (possibly shifted) Hessian; the shift grows
/// until the Cholesky factorization succeeds.
fn newton_direction(h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let base = DMatrix::from_row_slice(n, n, h);
    let scale = h.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    let mut tau = 0.0;
    for _ in 0..60 {
        let shifted = &base + DMatrix::identity(n, n) * tau;
        if let Some(ch) = shifted.cholesky() {
            let rhs = DVector::from_iterator(n, g.iter().map(|x| -x));
            return ch.solve(&rhs).iter().copied().collect();
        }
        tau = if tau == 0.0 { 1e-10 * scale } else { tau * 4.0 };
    }
    g.iter().map(|x| -x).collect()
}

/// Minimizes the window energy of `u + φ` over `φ` supported in `window`,
/// starting from `φ = 0`.
pub fn minimize_window<F: Field + ?Sized>(
    spec: &InteractionSpec,
    u: &F,
    window: &SiteSet,
    opts: &MinimizeOptions,
) -> Result<WindowMinimum> {
    if window.is_empty() {
        return Err(Error::Contract("empty minimization window".into()));
    }
    if opts.check_coercivity {
        for s in window {
            let r = coercivity_probe(spec, u, &Perturbation::new(), s, &COERCIVITY_RAYS)?;
            if !r.pass {
                return Err(Error::Precondition(format!("coercivity probe failed at site {s}")));
            }
        }
    }
    let prob = LocalProblem::new(spec, u, window)?;
    let n = prob.len();
    let mut phi = vec![0.0; n];
    let mut g = prob.gradient(&phi);
    let mut trajectory = vec![max_abs(&g)];
    let mut iterations = 0;
    while max_abs(&g) > opts.grad_tol && iterations < opts.max_iter {
        iterations += 1;
        let h = prob.hessian(&phi);
        let mut p = newton_direction(&h, &g);
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) || p.iter().any(|x| !x.is_finite()) {
            p = g.iter().map(|x| -x).collect();
            slope = dot(&g, &p);
        }
        let accepted = line_search(&prob, &phi, &p, slope, &g).map(|t| (t, p)).or_else(|| {
            let q: Vec<f64> = g.iter().map(|x| -x).collect();
            let s = dot(&g, &q);
            line_search(&prob, &phi, &q, s, &g).map(|t| (t, q))
        });
        let Some((t, dir)) = accepted else {
            break;
        };
        for (x, d) in phi.iter_mut().zip(&dir) {
            *x += t * d;
        }
        g = prob.gradient(&phi);
        trajectory.push(max_abs(&g));
    }
    let stationarity = max_abs(&g);
    if !(stationarity <= opts.stationarity_tol) {
        return Err(Error::Search {
            iterations,
            trajectory,
        });
    }
    Ok(WindowMinimum {
        gamma_star: prob.gamma(&phi),
        phi_star: prob.to_perturbation(&phi),
        stationarity,
        iterations,
    })
}

/// Armijo backtracking; also accepts steps that lower the gradient when the
/// energy change is below round-off.
fn line_search(
    prob: &LocalProblem,
    phi: &[f64],
    dir: &[f64],
    slope: f64,
    g: &[f64],
) -> Option<f64> {
    let g0 = max_abs(g);
    let mut t = 1.0;
    for _ in 0..60 {
        let step: Vec<f64> = dir.iter().map(|d| t * d).collect();
        let de = prob.energy_change(phi, &step);
        if de <= 1e-4 * t * slope {
            return Some(t);
        }
        if de.abs() <= 1e-14 {
            let trial: Vec<f64> = phi.iter().zip(&step).map(|(a, b)| a + b).collect();
            if max_abs(&prob.gradient(&trial)) < g0 {
                return Some(t);
            }
        }
        t *= 0.5;
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub gamma_max: f64,
    pub argmax: Perturbation,
    pub evaluations: usize,
}

/// Exhaustive maximization of `Γ(φ; u, window)` over the product grid
/// `{k·step : |k·step| ≤ half_width}` per site. Ties keep the
/// lexicographically smallest `φ`.
pub fn brute_force_oracle<F: Field + ?Sized>(
    spec: &InteractionSpec,
    u: &F,
    window: &SiteSet,
    half_width: f64,
    step: f64,
) -> Result<OracleResult> {
    if window.is_empty() || window.len() > 3 {
        return Err(Error::Contract("the oracle handles windows of 1 to 3 sites".into()));
    }
    if !(step > 0.0 && half_width >= 0.0) {
        return Err(Error::Contract("oracle grid needs a positive step".into()));
    }
    let prob = LocalProblem::new(spec, u, window)?;
    let n = prob.len();
    let kmax = (half_width / step).round() as i64;
    let vals: Vec<f64> = (-kmax..=kmax).map(|k| k as f64 * step).collect();
    let m = vals.len();

    // Terms grouped by the window variables they read, tabulated over the grid.
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (k, vars) in prob.term_vars().into_iter().enumerate() {
        groups.entry(vars).or_default().push(k);
    }
    let mut buf = Vec::new();
    let mut phi = vec![0.0; n];
    let mut tables: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for (vars, terms) in &groups {
        if vars.is_empty() {
            continue;
        }
        let size = m.pow(vars.len() as u32);
        let mut table = vec![0.0; size];
        for (idx, slot) in table.iter_mut().enumerate() {
            phi.iter_mut().for_each(|x| *x = 0.0);
            let mut r = idx;
            for &v in vars.iter().rev() {
                phi[v] = vals[r % m];
                r /= m;
            }
            *slot = terms.iter().map(|&k| prob.term_gamma(k, &phi, &mut buf)).sum();
        }
        tables.push((vars.clone(), table));
    }
    debug_assert_eq!(
        groups.values().map(|v| v.len()).sum::<usize>(),
        prob.term_count()
    );

    let total = m.pow(n as u32);
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    let mut digits = vec![0usize; n];
    for idx in 0..total {
        let mut r = idx;
        for d in digits.iter_mut().rev() {
            *d = r % m;
            r /= m;
        }
        let mut acc = 0.0;
        for (vars, table) in &tables {
            let mut t = 0;
            for &v in vars {
                t = t * m + digits[v];
            }
            acc += table[t];
        }
        if acc > best {
            best = acc;
            best_idx = idx;
        }
    }
    let mut r = best_idx;
    for d in digits.iter_mut().rev() {
        *d = r % m;
        r /= m;
    }
    let argmax = prob
        .sites
        .iter()
        .zip(&digits)
        .map(|(s, &d)| (*s, vals[d]))
        .collect();
    Ok(OracleResult {
        gamma_max: best,
        argmax,
        evaluations: total,
    })
}
