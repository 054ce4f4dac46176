//! Restarted GMRES with right preconditioning.

pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from `x = 0`, applying `A M⁻¹` and recovering
/// `x = M⁻¹ y`. Stops once `‖b − A x‖₂ ≤ tol`.
pub fn gmres(
    apply_a: impl Fn(&[f64], &mut [f64]),
    apply_minv: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut beta = norm(&r);
    let mut total = 0;
    let mut tmp = vec![0.0; n];
    let mut z = vec![0.0; n];
    while beta > tol && total < max_iter {
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            apply_minv(&v[j], &mut z);
            apply_a(&z, &mut tmp);
            let mut w = tmp.clone();
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            // second Gram-Schmidt pass keeps the basis orthogonal near convergence
            for (i, vi) in v.iter().enumerate() {
                let c = dot(&w, vi);
                h[i][j] += c;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= c * vk;
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let den = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if den == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = h[j][j] / den;
                sn[j] = h[j + 1][j] / den;
            }
            h[j][j] = cs[j] * h[j][j] + sn[j] * h[j + 1][j];
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            k_used = j + 1;
            if g[j + 1].abs() <= tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in (i + 1)..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut upd = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (u, vk) in upd.iter_mut().zip(vi) {
                *u += yi * vk;
            }
        }
        apply_minv(&upd, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        apply_a(&x, &mut tmp);
        for ((ri, bi), ai) in r.iter_mut().zip(b).zip(&tmp) {
            *ri = bi - ai;
        }
        let new_beta = norm(&r);
        if new_beta >= beta {
            beta = new_beta;
            break;
        }
        beta = new_beta;
    }
    GmresOutcome {
        x,
        iterations: total,
        residual: beta,
        converged: beta <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.0], [2.0, 5.0, 1.0], [0.0, -1.0, 3.0]];
        let b = [1.0, 2.0, 3.0];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..3 {
                y[i] = (0..3).map(|j| a[i][j] * x[j]).sum();
            }
        };
        let ident = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let out = gmres(apply, ident, &b, 1e-14, 10, 50);
        assert!(out.converged);
        let mut ax = [0.0; 3];
        apply(&out.x, &mut ax);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let d = [1.0, 10.0, 100.0, 1000.0];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..4 {
                y[i] = d[i] * x[i];
            }
        };
        let inv = |x: &[f64], y: &mut [f64]| {
            for i in 0..4 {
                y[i] = x[i] / d[i];
            }
        };
        let out = gmres(apply, inv, &[1.0, 1.0, 1.0, 1.0], 1e-12, 10, 10);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }
}
