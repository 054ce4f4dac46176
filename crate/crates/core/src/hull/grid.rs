//! Uniform tensor grids on the torus and their discrete Fourier transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `m^d` points `σ = i/m`, flattened row-major (axis 0 slowest).
#[derive(Clone)]
pub struct Grid {
    d: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("d", &self.d).field("m", &self.m).finish()
    }
}

impl Grid {
    pub fn new(d: usize, m: usize) -> Self {
        assert!(d >= 1 && m >= 1, "grid needs positive dimension and size");
        let mut planner = FftPlanner::new();
        Grid {
            d,
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn per_axis(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis indices of a flat index.
    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = idx % self.m;
            idx /= self.m;
        }
    }

    /// Torus point of a flat index.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut mi = [0usize; 8];
        self.multi_index(idx, &mut mi[..self.d]);
        for a in 0..self.d {
            out[a] = mi[a] as f64 / self.m as f64;
        }
    }

    /// Signed frequency of a per-axis FFT index.
    pub fn wave(&self, i: usize) -> i64 {
        if i <= self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Signed frequency vector of a flat index in spectral layout.
    pub fn mode(&self, idx: usize, out: &mut [i64]) {
        let mut mi = [0usize; 8];
        self.multi_index(idx, &mut mi[..self.d]);
        for a in 0..self.d {
            out[a] = self.wave(mi[a]);
        }
    }

    /// Flat spectral index of mode `k`, if representable on this grid.
    pub fn index_of_mode(&self, k: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for &kj in k {
            if kj.unsigned_abs() as usize > (self.m - 1) / 2 {
                return None;
            }
            idx = idx * self.m + kj.rem_euclid(self.m as i64) as usize;
        }
        Some(idx)
    }

    /// Grid values to coefficients `ĝ_k = m^{-d} Σ g(σ) e^{-2πik·σ}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// Coefficients to grid values `g(σ) = Σ ĝ_k e^{2πik·σ}`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        let m = self.m;
        let mut line = vec![Complex64::default(); m];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for axis in 0..self.d {
            let stride = m.pow((self.d - 1 - axis) as u32);
            let block = stride * m;
            for start in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let base = start + off;
                    if stride == 1 {
                        plan.process_with_scratch(&mut data[base..base + m], &mut scratch);
                        continue;
                    }
                    for (j, l) in line.iter_mut().enumerate() {
                        *l = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, l) in line.iter().enumerate() {
                        data[base + j * stride] = *l;
                    }
                }
            }
        }
    }

    pub fn to_complex(values: &[f64]) -> Vec<Complex64> {
        values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn forward_inverse_roundtrip() {
        let g = Grid::new(2, 7);
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut c = Grid::to_complex(&vals);
        g.forward(&mut c);
        g.inverse(&mut c);
        for (a, b) in c.iter().zip(&vals) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_its_slot() {
        let g = Grid::new(2, 9);
        let k = [2i64, -3];
        let mut c = vec![Complex64::default(); g.len()];
        let mut p = [0.0; 2];
        for (i, v) in c.iter_mut().enumerate() {
            g.point(i, &mut p);
            *v = Complex64::cis(TAU * (k[0] as f64 * p[0] + k[1] as f64 * p[1]));
        }
        g.forward(&mut c);
        let idx = g.index_of_mode(&k).unwrap();
        for (i, v) in c.iter().enumerate() {
            let want = if i == idx { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
        let mut back = [0i64; 2];
        g.mode(idx, &mut back);
        assert_eq!(back, k);
        assert!(g.index_of_mode(&[5, 0]).is_none());
    }
}
